"""qgeom: quantization workbench for particle motion on curved submanifolds."""

from . import errors
from .brackets import (
    ConstraintSet,
    Observable,
    PhasePoint,
    constraints_from_surface,
    dirac_bracket,
    poisson,
    second_class_check,
    selfadjoint_correction,
)
from .conversion import (
    ExtendedPhasePoint,
    angular_identity_gap,
    conversion_constraints,
    conversion_residual_strict,
    conversion_residual_weak,
)
from .curves import PlanarCurve
from .fieldexpr import FieldExpr, differentiate, evaluate, parse_field
from .geometry import (
    CurvatureFrame,
    SurfaceSpec,
    closest_point,
    eikonal_residual,
    orthonormal_frame,
    project_orthogonal_pair,
    sample_on_surface,
    shape_spectrum,
    unit_normal,
)
from .potentials import (
    PotentialReport,
    SchemeId,
    fujii_extra,
    vq_conversion,
    vq_curve,
    vq_dirac_distance,
    vq_dirac_raw,
    vq_flat_bundle,
    vq_paraboloid,
    vq_podolsky,
    vq_thin_layer,
)
from .spectral import (
    AnnulusProblem,
    SpectrumResult,
    TubeProblem,
    annulus_spectrum,
    area_ratio,
    area_ratio_expansion,
    curve_effective_spectrum,
    delta_sweep,
    sphere_spectrum,
    transverse_energy,
    tube_band_spectrum,
)

__version__ = "0.1.0"
