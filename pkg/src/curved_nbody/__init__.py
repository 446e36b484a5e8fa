"""Gravitational n-body problem on spheres: dynamics, relative equilibria,
and probes of the minimum-distance bound."""
from .bound_probe import (
    BlowupDiagnostic,
    BoundScanResult,
    blowup_diagnostic,
    frame_rotation,
    scan_bound,
    shrink_family_probe,
)
from .dynamics import (
    BodySystem,
    PhaseState,
    Trajectory,
    acceleration,
    integrate,
    min_pairwise_distance,
    tangent_velocity,
)
from .equilibria import (
    REProblem,
    REResidual,
    RESolution,
    classify,
    dedup,
    re_residual,
    solve_re,
    verify_orbit,
)
from .errors import (
    ConfigError,
    CurvedNBodyError,
    InvalidArgumentError,
    SingularityError,
    StiffnessError,
    UnsupportedMetricError,
)
from .geometry import (
    RotationSpec,
    SpacePoint,
    chordal_distance,
    geodesic_distance,
    random_sphere_point,
    rate_matrix,
    rotation_at,
    rotation_generator,
    sigma_inner,
)

__version__ = "0.1.0"
