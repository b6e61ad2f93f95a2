"""Implicit hypersurfaces: second fundamental form, principal curvatures,
boundary p-convexity, parallel surfaces and the distance function.

Orientation: Omega = {rho < 0}, interior unit normal -grad(rho)/|grad(rho)|,
so round spheres have positive curvature.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .exceptions import ConvergenceError, DegenerateGradientError, DomainError, FocalPointError
from .fields import (
    Polynomial,
    ScalarField,
    fd_gradient,
    fd_hessian,
    gradient_at,
    hessian_at,
    polynomial_field,
)
from .pcone import DEFAULT_TOL, ConeVerdict
from .spectra import PDegree, PlaneFrame, SymMatrix, eigh, trace_on_plane, weighted_sum

GRADIENT_THRESHOLD = 1e-6
ON_SURFACE_TOL = 1e-8
NEWTON_MAX_ITER = 100
UNIQUE_TOL = 1e-6


class ImplicitSurface:
    """The hypersurface {rho = 0} bounding Omega = {rho < 0}.

    ``scale`` is a characteristic length used for tolerances and ray
    shooting; ``box`` (optional) bounds the domain for fields built on it.
    """

    def __init__(self, rho, threshold=GRADIENT_THRESHOLD, scale=1.0, name="surface",
                 box=None):
        if not isinstance(rho, ScalarField):
            raise TypeError("rho must be a ScalarField")
        self.rho = rho
        self.threshold = float(threshold)
        self.scale = float(scale)
        self.name = name
        self.box = None if box is None else np.asarray(box, dtype=float)

    @property
    def n(self):
        return self.rho.n

    def __repr__(self):
        return f"ImplicitSurface({self.name!r}, n={self.n})"

    def contains(self, x):
        """True when x lies in Omega."""
        return self.rho(x) < 0.0


def sphere(R, n=3, center=None):
    R = float(R)
    if not R > 0:
        raise ValueError("radius must be positive")
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    rho = ScalarField(
        n,
        lambda x: float((x - c) @ (x - c)) - R * R,
        gradient=lambda x: 2.0 * (x - c),
        hessian=lambda x: 2.0 * np.eye(n),
        vectorized=lambda X: np.sum((X - c) ** 2, axis=1) - R * R,
        name=f"sphere:{R:g}",
        check=False,
    )
    box = np.stack([c - 1.01 * R, c + 1.01 * R], axis=1)
    return ImplicitSurface(rho, scale=R, name=f"sphere:{R:g}", box=box)


def ellipsoid(semi_axes):
    a = np.asarray(semi_axes, dtype=float)
    if a.ndim != 1 or len(a) < 2 or np.any(a <= 0):
        raise ValueError("ellipsoid needs at least two positive semi-axes")
    n = len(a)
    w = 1.0 / (a * a)
    rho = ScalarField(
        n,
        lambda x: float(np.sum(w * x * x)) - 1.0,
        gradient=lambda x: 2.0 * w * x,
        hessian=lambda x: np.diag(2.0 * w),
        vectorized=lambda X: (X * X) @ w - 1.0,
        name="ellipsoid",
        check=False,
    )
    name = "ellipsoid:" + ",".join(f"{v:g}" for v in a)
    return ImplicitSurface(rho, scale=float(a.max()), name=name,
                           box=np.stack([-1.01 * a, 1.01 * a], axis=1))


def polynomial_surface(poly, scale=1.0, box=None):
    if not isinstance(poly, Polynomial):
        poly = Polynomial.from_json(poly)
    return ImplicitSurface(polynomial_field(poly, check=False), scale=scale, name="poly", box=box)


def parse_surface(spec, poly_loader=None):
    """``sphere:R[,n]``, ``ellipsoid:a,b[,c...]`` or ``poly:<file>``."""
    kind, _, arg = spec.partition(":")
    if kind == "sphere":
        parts = [float(v) for v in arg.split(",")]
        if len(parts) == 1:
            return sphere(parts[0])
        if len(parts) == 2:
            return sphere(parts[0], n=int(parts[1]))
    elif kind == "ellipsoid":
        return ellipsoid([float(v) for v in arg.split(",")])
    elif kind == "poly" and arg:
        if poly_loader is None:
            raise ValueError("poly surfaces need a file loader")
        return polynomial_surface(poly_loader(arg))
    raise ValueError(f"bad surface spec {spec!r}")


@dataclass(frozen=True)
class CurvatureProfile:
    """Principal curvatures (ascending) at ``point`` w.r.t. the interior ``normal``.

    ``frame`` holds the matching principal directions.
    """

    point: np.ndarray
    kappas: np.ndarray
    frame: PlaneFrame
    normal: np.ndarray = field(repr=False)

    def form(self, e):
        """II(e, e) for a tangent vector e (ambient coordinates)."""
        c = self.frame.vectors @ np.asarray(e, dtype=float)
        return float(np.sum(self.kappas * c * c))


def _normal_data(s, x):
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != s.n:
        raise ValueError(f"point has dimension {x.shape[0]}, surface lives in R^{s.n}")
    g = gradient_at(s.rho, x)
    gn = float(np.linalg.norm(g))
    if gn < s.threshold:
        raise DegenerateGradientError(f"|grad rho| = {gn:.3e} below threshold {s.threshold:g}")
    r = s.rho(x)
    if abs(r) > ON_SURFACE_TOL * max(1.0, gn * max(1.0, float(np.max(np.abs(x))))):
        raise DomainError(f"point is not on the surface (rho = {r:.3e})")
    return x, g, gn


def tangent_frame(normal):
    """An orthonormal basis of the orthogonal complement of ``normal``."""
    nu = np.asarray(normal, dtype=float)
    nu = nu / np.linalg.norm(nu)
    n = nu.shape[0]
    q, _ = np.linalg.qr(np.column_stack([nu, np.eye(n)]))
    return PlaneFrame(q[:, 1:n].T)


def second_fundamental_form(s, x):
    """II at a boundary point as a form on an orthonormal tangent frame.

    ``D^2 rho / |grad rho|`` restricted to the tangent space.  Returns
    ``(SymMatrix of size n-1, PlaneFrame)``.
    """
    x, g, gn = _normal_data(s, x)
    T = tangent_frame(g)
    H = hessian_at(s.rho, x).array
    form = T.vectors @ H @ T.vectors.T / gn
    return SymMatrix(form), T


def principal_curvatures(s, x):
    x, g, gn = _normal_data(s, x)
    form, T = second_fundamental_form(s, x)
    spec = eigh(form)
    dirs = spec.frame.T @ T.vectors
    return CurvatureProfile(x, np.array(spec.eigenvalues), PlaneFrame(dirs), -g / gn)


def is_boundary_p_convex(s, x, p, tol=DEFAULT_TOL):
    """Verdict of the ordered p-sum of principal curvatures (p <= n - 1)."""
    if p > s.n - 1:
        raise ValueError(f"p={p} exceeds the tangent dimension {s.n - 1}")
    prof = principal_curvatures(s, x)
    margin = weighted_sum(prof.kappas, PDegree(p, s.n - 1))
    scale = max(1.0, float(np.max(np.abs(prof.kappas))))
    return ConeVerdict.from_margin(margin, tol * scale)


def parallel_curvatures(profile, delta):
    """Curvatures of the parallel surface at distance ``delta`` inside.

    kappa_j(delta) = kappa_j / (1 - delta kappa_j), valid before the first
    focal point (delta kappa_j < 1 for every j).
    """
    delta = float(delta)
    if delta < 0:
        raise ValueError("delta must be non-negative")
    k = np.asarray(profile.kappas, dtype=float)
    bad = np.nonzero(delta * k >= 1.0)[0]
    if bad.size:
        j = int(bad[0])
        raise FocalPointError(
            f"delta={delta:g} reaches the focal point of curvature index {j} "
            f"(kappa={k[j]:g})", index=j)
    new = k / (1.0 - delta * k)
    order = np.argsort(new, kind="stable")
    frame = PlaneFrame(profile.frame.vectors[order])
    point = np.asarray(profile.point) + delta * np.asarray(profile.normal)
    return CurvatureProfile(point, new[order], frame, profile.normal)


# -- distance ---------------------------------------------------------------

@dataclass(frozen=True)
class DistanceResult:
    """Nearest boundary point.  ``unique`` is False when restarts disagree."""

    delta: float
    foot: np.ndarray
    unique: bool
    alternatives: tuple = ()


def _shoot(s, x, d):
    # first sign change of rho along the ray x + t d, t > 0
    t_prev, t = 0.0, 0.05 * s.scale
    for _ in range(60):
        y = x + t * d
        try:
            val = s.rho(y)
        except DomainError:
            return None
        if val > 0:
            try:
                root = brentq(lambda u: s.rho(x + u * d), t_prev, t, xtol=1e-14 * s.scale,
                              rtol=4 * np.finfo(float).eps)
            except (ValueError, DomainError):
                return None
            return x + root * d
        t_prev, t = t, 2.0 * t
    return None


def _newton_foot(s, x, y):
    # Solve y - x + mu grad rho(y) = 0, rho(y) = 0 (stationary points of |y - x|).
    n = s.n
    g = gradient_at(s.rho, y)
    gg = float(g @ g)
    if gg == 0.0:
        return None
    mu = -float((y - x) @ g) / gg
    tol = 1e-15 * max(1.0, s.scale)
    for _ in range(NEWTON_MAX_ITER):
        g = gradient_at(s.rho, y)
        H = hessian_at(s.rho, y).array
        F = np.concatenate([y - x + mu * g, [s.rho(y)]])
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = np.eye(n) + mu * H
        J[:n, n] = g
        J[n, :n] = g
        if np.linalg.norm(F) <= tol:
            break
        # lstsq: J is singular at focal points (e.g. the centre of a ball)
        step = np.linalg.lstsq(J, -F, rcond=None)[0]
        y = y + step[:n]
        mu = mu + step[n]
        if np.linalg.norm(step[:n]) <= tol * 10 + 1e-15 * np.linalg.norm(y):
            break
    else:
        return None
    g = gradient_at(s.rho, y)
    gn = float(np.linalg.norm(g))
    if gn < s.threshold or abs(s.rho(y)) > 1e-10 * max(1.0, s.scale * gn):
        return None
    d = x - y
    dn = float(np.linalg.norm(d))
    if dn > 0 and np.linalg.norm(d - (d @ g) / (gn * gn) * g) > 1e-6 * max(dn, 1e-300):
        return None
    return y


def _start_directions(s, x, grad):
    n = s.n
    dirs = [grad / np.linalg.norm(grad)] if np.linalg.norm(grad) > 0 else []
    eye = np.eye(n)
    dirs += [eye[i] for i in range(n)] + [-eye[i] for i in range(n)]
    rng = np.random.default_rng(12345)
    for v in rng.standard_normal((2 * n, n)):
        dirs.append(v / np.linalg.norm(v))
    return dirs


def distance_to_boundary(s, x, check_unique=True):
    """Distance from an interior point to the surface and a nearest foot point.

    Multi-start Newton on the Lagrange system of ``min |y - x|`` subject to
    ``rho(y) = 0``.  Starts come from rays along grad rho, the coordinate
    axes and a fixed set of random directions.  Ties between distinct feet
    (within 1e-6) are reported through ``unique=False``, never resolved.
    With ``check_unique=False`` only the gradient ray is tried first and
    the other rays are used as a fallback.
    """
    x = np.asarray(x, dtype=float).ravel()
    if s.rho(x) >= 0:
        raise DomainError("point is not inside the domain")
    grad = gradient_at(s.rho, x)
    dirs = _start_directions(s, x, grad)
    feet = []
    if not check_unique and np.linalg.norm(grad) > 0:
        y0 = _shoot(s, x, dirs[0])
        y = None if y0 is None else _newton_foot(s, x, y0)
        if y is not None:
            return DistanceResult(float(np.linalg.norm(x - y)), y, True)
    for d in dirs:
        y0 = _shoot(s, x, d)
        if y0 is None:
            continue
        y = _newton_foot(s, x, y0)
        if y is not None:
            feet.append(y)
    if not feet:
        raise ConvergenceError("no start converged to a boundary foot point")
    dists = np.array([np.linalg.norm(x - y) for y in feet])
    best = int(np.argmin(dists))
    dmin = float(dists[best])
    foot = feet[best]
    ties = [feet[i] for i in range(len(feet))
            if dists[i] <= dmin + 1e-8 * max(1.0, s.scale)
            and np.linalg.norm(feet[i] - foot) > UNIQUE_TOL]
    return DistanceResult(dmin, foot, not ties, tuple(ties))


def neg_log_distance(s):
    """The field ``-log delta`` on Omega."""

    def func(x):
        return -math.log(distance_to_boundary(s, x, check_unique=False).delta)

    def guarded(x):
        if s.rho(x) >= 0:
            raise DomainError("point is not inside the domain")
        return func(x)

    f = ScalarField(s.n, guarded, s.box, name=f"-log delta({s.name})", check=False)

    def values(X):
        return np.array([guarded(x) for x in X])

    f.vectorized = values
    return f


def distance_level_set(s, delta0):
    """The parallel surface {delta = delta0} as an implicit surface.

    Its defining function ``delta0 - delta`` is negative on the inner
    region, so the interior-normal convention carries over.  Derivatives
    are by finite differences of the distance function.
    """
    delta0 = float(delta0)

    def func(x):
        if s.rho(x) >= 0:
            raise DomainError("point is not inside the domain")
        return delta0 - distance_to_boundary(s, x, check_unique=False).delta

    rho = ScalarField(s.n, func, s.box, name=f"level({s.name}, {delta0:g})", check=False)
    rho.vectorized = lambda X: np.array([func(x) for x in X])
    return ImplicitSurface(rho, scale=s.scale, name=rho.name, box=s.box)


# -- -log delta trace -------------------------------------------------------

@dataclass(frozen=True)
class CanonicalPlane:
    """``V = span{cos(theta) n + sin(theta) e_1, e_2, ..., e_p}``."""

    theta: float
    normal: np.ndarray
    tangent: tuple  # (e_1 or None, e_2, ..., e_p)


def canonical_decomposition(V, normal):
    """Write the p-plane ``V`` in canonical form relative to the unit ``normal``."""
    if not isinstance(V, PlaneFrame):
        V = PlaneFrame(V)
    nu = np.asarray(normal, dtype=float)
    nu = nu / np.linalg.norm(nu)
    M = V.matrix
    c = M.T @ nu
    cos_t = min(1.0, float(np.linalg.norm(c)))
    k = V.k
    if cos_t <= 1e-12:
        return CanonicalPlane(math.pi / 2, nu, tuple(V.vectors))
    q, _ = np.linalg.qr(np.column_stack([c, np.eye(k)]))
    u1 = M @ (c / np.linalg.norm(c))
    rest = [M @ q[:, j] for j in range(1, k)]
    sin_t = math.sqrt(max(0.0, 1.0 - cos_t * cos_t))
    e1 = None if sin_t <= 1e-12 else (u1 - cos_t * nu) / sin_t
    return CanonicalPlane(math.acos(cos_t), nu, (e1, *rest))


def canonical_plane(normal, tangents, theta):
    """Frame of ``span{cos(theta) n + sin(theta) t_1, t_2, ...}``."""
    nu = np.asarray(normal, dtype=float)
    t = [np.asarray(v, dtype=float) for v in tangents]
    first = math.cos(theta) * nu + math.sin(theta) * t[0]
    return PlaneFrame.span([first, *t[1:]])


def neg_log_dist_trace(s, x, V, p=None):
    """``tr_V Hess(-log delta)`` two ways: closed form and finite differences.

    Closed form, with II_delta the second fundamental form of the level set
    through x (curvatures transported from the foot point):

        (1/delta) [sin^2(theta) II_delta(e_1, e_1) + sum_{j>=2} II_delta(e_j, e_j)]
            + cos^2(theta) / delta^2

    Returns ``(value_formula, value_fd)``.
    """
    if not isinstance(V, PlaneFrame):
        V = PlaneFrame(V)
    if p is not None and int(p) != V.k:
        raise ValueError(f"plane has dimension {V.k}, expected p={p}")
    x = np.asarray(x, dtype=float).ravel()
    dist = distance_to_boundary(s, x)
    if not dist.unique:
        raise DomainError("nearest boundary point is not unique (cut locus)")
    delta = dist.delta
    prof = parallel_curvatures(principal_curvatures(s, dist.foot), delta)
    canon = canonical_decomposition(V, prof.normal)
    e1, *rest = canon.tangent
    sin2 = math.sin(canon.theta) ** 2
    cos2 = math.cos(canon.theta) ** 2
    tang = sum(prof.form(e) for e in rest)
    if e1 is not None:
        tang += sin2 * prof.form(e1)
    value_formula = tang / delta + cos2 / (delta * delta)
    value_fd = trace_on_plane(fd_hessian(neg_log_distance(s), x), V)
    return value_formula, value_fd


__all__ = [
    "CanonicalPlane",
    "CurvatureProfile",
    "DistanceResult",
    "ImplicitSurface",
    "canonical_decomposition",
    "canonical_plane",
    "distance_level_set",
    "distance_to_boundary",
    "ellipsoid",
    "fd_gradient",
    "is_boundary_p_convex",
    "neg_log_dist_trace",
    "neg_log_distance",
    "parallel_curvatures",
    "parse_surface",
    "polynomial_surface",
    "principal_curvatures",
    "second_fundamental_form",
    "sphere",
    "tangent_frame",
]
