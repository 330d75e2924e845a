"""Numerical toolkit for conformal scalar-curvature rigidity.

Conformal transformation laws, rigidity certificates (integral, spectral,
and volume criteria), subcritical quotient estimates, and a semilinear
prescribed-curvature boundary-value solver with a shooting cross-check.
"""

from .conformal import (
    BoundaryTrace,
    ConformalFactor,
    ScalarField,
    curvature_coupling,
    mean_curvature_transform,
    positive_part,
    scalar_curvature_transform,
)
from .discretize import (
    DiscreteDomain,
    RadialGeometry,
    annulus,
    assemble,
    ball,
    build_box_mesh,
    build_radial_domain,
    cap,
    integrate_power,
    interval,
    nodal_laplacian,
    normal_derivative,
    parse_geometry,
    radial_laplacian,
    read_mesh,
    sphere,
    sphere_area,
    write_mesh,
)
from .errors import (
    AssemblyError,
    ConfigError,
    CurvrigError,
    FieldDomainError,
    InputError,
    SolverError,
    UnsupportedDimensionError,
)
from .quotient import (
    QuotientEstimate,
    bubble_test_field,
    einstein_quotient,
    estimate_quotient,
    sphere_yamabe_constant,
)
from .rigidity import (
    CERTIFICATE_COLUMNS,
    DeficitField,
    LapseField,
    LapseReport,
    RatioTrace,
    RigidityCertificate,
    SupersolutionReport,
    certificates_to_csv,
    check_eigen_criterion,
    check_einstein_volume,
    check_sobolev_criterion,
    eigen_ratio_trace,
    lapse_residual,
    verify_supersolution,
    write_certificates_csv,
)
from .solver import (
    BvpProblem,
    ContinuationTable,
    ScanResult,
    ScanSolution,
    ShootResult,
    Solution,
    SolutionSet,
    default_starts,
    multiplicity_scan,
    profiles_to_csv,
    radial_shoot,
    ratio_continuation,
    solve_bvp,
    write_profiles_csv,
)
from .spectral import EigenResult, dirichlet_lambda1, rayleigh_quotient

__version__ = "1.0.0"

__all__ = [
    "AssemblyError",
    "BoundaryTrace",
    "BvpProblem",
    "ConfigError",
    "ConformalFactor",
    "ContinuationTable",
    "CurvrigError",
    "CERTIFICATE_COLUMNS",
    "DeficitField",
    "DiscreteDomain",
    "EigenResult",
    "FieldDomainError",
    "InputError",
    "LapseField",
    "LapseReport",
    "QuotientEstimate",
    "RadialGeometry",
    "RatioTrace",
    "RigidityCertificate",
    "ScalarField",
    "ScanResult",
    "ScanSolution",
    "ShootResult",
    "Solution",
    "SolutionSet",
    "SolverError",
    "SupersolutionReport",
    "UnsupportedDimensionError",
    "annulus",
    "assemble",
    "ball",
    "build_box_mesh",
    "build_radial_domain",
    "bubble_test_field",
    "cap",
    "certificates_to_csv",
    "check_eigen_criterion",
    "check_einstein_volume",
    "check_sobolev_criterion",
    "curvature_coupling",
    "default_starts",
    "dirichlet_lambda1",
    "eigen_ratio_trace",
    "einstein_quotient",
    "estimate_quotient",
    "integrate_power",
    "interval",
    "lapse_residual",
    "mean_curvature_transform",
    "multiplicity_scan",
    "nodal_laplacian",
    "normal_derivative",
    "parse_geometry",
    "positive_part",
    "profiles_to_csv",
    "radial_laplacian",
    "radial_shoot",
    "ratio_continuation",
    "rayleigh_quotient",
    "read_mesh",
    "scalar_curvature_transform",
    "solve_bvp",
    "sphere",
    "sphere_area",
    "sphere_yamabe_constant",
    "verify_supersolution",
    "write_certificates_csv",
    "write_mesh",
    "write_profiles_csv",
]
