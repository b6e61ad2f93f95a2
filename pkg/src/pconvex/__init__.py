"""Numerical toolkit for p-convex geometry.

Cone calculus on the p-positivity cone P_p, p-plurisubharmonicity of
scalar fields, boundary p-convexity of implicit hypersurfaces, extreme
rays of P_p and grid approximations of p-convex hulls.
"""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .exceptions import (
    CertificationError,
    ConvergenceError,
    DegenerateGradientError,
    DomainError,
    FocalPointError,
    PConvexError,
)
from .spectra import (
    PDegree,
    PlaneFrame,
    Spectrum,
    SymMatrix,
    eigh,
    ordered_eigen_sum,
    projector,
    trace_on_plane,
)
from .pcone import (
    ConeVerdict,
    DerivationMatrix,
    derivation_min_eig,
    derivation_operator,
    grassmann_trace_min,
    hodge_dual_form,
    is_p_positive,
    riesz_characteristic,
)
from .riesz import RieszKernel, p_harmonic_defect, riesz_gradient, riesz_hessian, riesz_value
from .fields import (
    MinimalSurfacePatch,
    ScalarField,
    collar_exhaustion,
    fd_hessian,
    minimal_graph_residual,
    minimal_restriction_trace,
    psh_report,
    restriction_laplacian,
)
from .hypersurface import (
    CurvatureProfile,
    ImplicitSurface,
    distance_to_boundary,
    ellipsoid,
    is_boundary_p_convex,
    neg_log_dist_trace,
    parallel_curvatures,
    principal_curvatures,
    second_fundamental_form,
    sphere,
)
from .extremal import RayClass, classify_psd_ray, classify_ray, face_dimension_oracle, generators
from .hull import (
    Dictionary,
    Grid,
    HullResult,
    PConvexHull,
    PPositiveMargin,
    compute_hull,
    default_dictionary,
    hull_nesting_check,
)
