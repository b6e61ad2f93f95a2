"""Extreme rays of P_p: generators, spectral classification and a face oracle.

For 1 < p < n the extreme rays are spanned by ``I - p P_e`` (spectrum
proportional to (-(p-1), 1, ..., 1)) and, when p < n - 1, by the rank-one
projections ``P_e``.  ``classify_ray`` decides this from the spectrum and,
for boundary points that are not extreme, returns an explicit splitting
``A = B + C`` into two non-proportional members of the cone.
``face_dimension_oracle`` checks extremality independently by measuring
the face of A numerically.
"""
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .pcone import BOUNDARY, DEFAULT_TOL, INTERIOR, OUTSIDE, is_p_positive
from .spectra import PDegree, SymMatrix, as_degree, as_sym, eigh, ordered_eigen_sum, projector

log = logging.getLogger(__name__)

EXTREME_NEG_EIG = "extreme_neg_eig"
EXTREME_PROJECTION = "extreme_projection"
BOUNDARY_NOT_EXTREME = "boundary_not_extreme"
LABELS = (EXTREME_NEG_EIG, EXTREME_PROJECTION, BOUNDARY_NOT_EXTREME, INTERIOR, OUTSIDE)

PATTERN_TOL = 1e-6
WITNESS_MARGIN_TOL = 1e-8
WITNESS_MIN_ANGLE = 1e-3


@dataclass(frozen=True)
class RayClass:
    """Classification of the ray through A.

    ``spectrum`` is the ascending spectrum scaled to unit Euclidean norm.
    ``witness`` is ``(B, C)`` with ``A = B + C`` for boundary points that
    are not extreme, otherwise None.
    """

    label: str
    spectrum: np.ndarray
    margin: float
    witness: tuple = None

    @property
    def extreme(self):
        return self.label in (EXTREME_NEG_EIG, EXTREME_PROJECTION)


def generators(p, n, e):
    """The two generator forms ``(I - p P_e, P_e)`` for a unit vector e."""
    e = np.asarray(e, dtype=float).ravel()
    if e.shape[0] != n:
        raise ValueError(f"vector has dimension {e.shape[0]}, expected {n}")
    if abs(np.linalg.norm(e) - 1.0) > 1e-10:
        raise ValueError("e must be a unit vector")
    p = as_degree(p, n).p
    if not 1.0 < p < n:
        raise ValueError(f"generators need 1 < p < n, got p={p:g}, n={n}")
    P = projector(e)
    return SymMatrix(np.eye(n) - p * P.array), P


def neg_eig_pattern(p, n):
    v = np.ones(n)
    v[0] = -(p - 1.0)
    return v / np.linalg.norm(v)


def projection_pattern(n):
    v = np.zeros(n)
    v[-1] = 1.0
    return v


def _matches(lam_unit, pattern, tol):
    return float(np.max(np.abs(lam_unit - pattern))) <= tol


def ray_angle(B, C):
    """Angle between B and C in the Frobenius inner product."""
    b, c = as_sym(B).array.ravel(), as_sym(C).array.ravel()
    cos = float(b @ c) / (np.linalg.norm(b) * np.linalg.norm(c))
    return math.acos(max(-1.0, min(1.0, cos)))


def _frame_form(Q, values):
    return SymMatrix((Q * np.asarray(values, dtype=float)) @ Q.T)


def _tie_groups(lam, tol):
    groups, start = [], 0
    for i in range(1, len(lam) + 1):
        if i == len(lam) or lam[i] - lam[i - 1] > tol:
            groups.append(list(range(start, i)))
            start = i
    return groups


def _face_split(lam, Q, weights, tol):
    # One negative eigenvalue, not the extreme pattern: perturb along a
    # direction constant on each group of (numerically) tied eigenvalues,
    # orthogonal to lam and to the group weights.  The ordering between
    # groups is preserved, so both halves keep margin exactly zero.
    groups = _tie_groups(lam, tol)
    k = len(groups)
    if k < 3:
        return None
    W = np.array([[weights[g].sum() for g in groups],
                  [lam[g].mean() for g in groups]])
    _, _, vt = np.linalg.svd(W)
    dg = vt[-1]
    d = np.empty(len(lam))
    for g, val in zip(groups, dg):
        d[g] = val
    gaps = [lam[groups[i + 1][0]] - lam[groups[i][-1]] for i in range(k - 1)]
    t = 0.25 * min(gaps) / float(np.max(np.abs(d)))
    return _frame_form(Q, 0.5 * (lam + t * d)), _frame_form(Q, 0.5 * (lam - t * d))


def _witness(A, lam, Q, degree, scale):
    n = len(lam)
    tie = PATTERN_TOL * scale
    if lam[1] < -tie:
        # two negative eigenvalues: Lemma 5.4 split
        alpha = lam[0] + lam[1]
        s = lam[0] / alpha
        v = lam.copy()
        v[0], v[1] = alpha, 0.0
        w = lam.copy()
        w[0], w[1] = 0.0, alpha
        return _frame_form(Q, s * v), _frame_form(Q, (1.0 - s) * w)
    if lam[0] < -tie:
        weights = degree.weights()
        top = _tie_groups(lam, tie)[-1]
        if len(top) < n and np.all(weights[top] == 0.0):
            # lower the top eigenvalue group onto the next one; the weighted
            # sum does not see it, and the peeled part is positive semidefinite
            drop = np.zeros(n)
            drop[top] = lam[top] - lam[top[0] - 1]
            return _frame_form(Q, drop), _frame_form(Q, lam - drop)
        return _face_split(lam, Q, weights, tie)
    positive = np.nonzero(lam > tie)[0]
    if len(positive) >= 2:
        # positive-quadrant split: peel off the top axis ray
        top = np.zeros(n)
        top[-1] = lam[-1]
        return _frame_form(Q, top), _frame_form(Q, lam - top)
    if len(positive) == 1:
        # rank one at p >= n - 1: tilt inside the zero eigenspace
        eps = 0.25 * lam[-1]
        b = np.zeros(n)
        b[-1] = 0.5 * lam[-1]
        c = b.copy()
        b[0], b[1] = eps, -eps
        c[0], c[1] = -eps, eps
        return _frame_form(Q, b), _frame_form(Q, c)
    return None


def verify_witness(A, witness, p, tol=WITNESS_MARGIN_TOL):
    """Check ``A = B + C``, both margins >= -tol, and distinct rays."""
    A = as_sym(A)
    B, C = witness
    sum_err = float(np.max(np.abs(A.array - B.array - C.array)))
    mb = ordered_eigen_sum(B, p) / A.scale()
    mc = ordered_eigen_sum(C, p) / A.scale()
    angle = ray_angle(B, C)
    ok = sum_err <= 1e-10 * A.scale() and mb >= -tol and mc >= -tol and angle >= WITNESS_MIN_ANGLE
    return ok, {"sum_error": sum_err, "margin_b": mb, "margin_c": mc, "angle": angle}


def classify_ray(A, p, tol=PATTERN_TOL, cone_tol=DEFAULT_TOL):
    """Classify the ray through A in P_p for 1 < p < n.

    Membership uses ``is_p_positive`` at ``cone_tol``; boundary spectra are
    matched against the two normalized extreme patterns at ``tol``.  For
    p = 1 use ``classify_psd_ray``; P_n is a half-space without extreme rays.
    """
    A = as_sym(A)
    degree = as_degree(p, A.n)
    if not 1.0 < degree.p < A.n:
        raise ValueError(f"classify_ray needs 1 < p < n (got p={degree.p:g}, n={A.n}); "
                         "use classify_psd_ray for p = 1")
    spec = eigh(A)
    lam = np.array(spec.eigenvalues)
    norm = float(np.linalg.norm(lam))
    if norm == 0.0:
        raise ValueError("the zero matrix spans no ray")
    unit = lam / norm
    verdict = is_p_positive(A, degree, cone_tol)
    if verdict.status != BOUNDARY:
        return RayClass(verdict.status, unit, verdict.margin)
    if _matches(unit, neg_eig_pattern(degree.p, A.n), tol):
        return RayClass(EXTREME_NEG_EIG, unit, verdict.margin)
    if _matches(unit, projection_pattern(A.n), tol) and degree.p < A.n - 1:
        return RayClass(EXTREME_PROJECTION, unit, verdict.margin)
    Q = np.array(spec.frame)
    witness = _witness(A, lam, Q, degree, norm)
    return RayClass(BOUNDARY_NOT_EXTREME, unit, verdict.margin, witness)


def classify_psd_ray(A, tol=PATTERN_TOL, cone_tol=DEFAULT_TOL):
    """p = 1 mode: in the PSD cone the extreme rays are exactly the P_e."""
    A = as_sym(A)
    spec = eigh(A)
    lam = np.array(spec.eigenvalues)
    norm = float(np.linalg.norm(lam))
    if norm == 0.0:
        raise ValueError("the zero matrix spans no ray")
    unit = lam / norm
    verdict = is_p_positive(A, 1, cone_tol)
    if verdict.status != BOUNDARY:
        return RayClass(verdict.status, unit, verdict.margin)
    if _matches(unit, projection_pattern(A.n), tol):
        return RayClass(EXTREME_PROJECTION, unit, verdict.margin)
    Q = np.array(spec.frame)
    top = np.zeros(A.n)
    top[-1] = lam[-1]
    return RayClass(BOUNDARY_NOT_EXTREME, unit, verdict.margin,
                    (_frame_form(Q, top), _frame_form(Q, lam - top)))


# -- face oracle --------------------------------------------------------------

def sym_basis(n):
    """Orthonormal basis of Sym^2(R^n) under the Frobenius inner product."""
    basis = []
    for i, j in itertools.combinations_with_replacement(range(n), 2):
        E = np.zeros((n, n))
        if i == j:
            E[i, i] = 1.0
        else:
            E[i, j] = E[j, i] = 1.0 / math.sqrt(2.0)
        basis.append(E)
    return np.array(basis)


@dataclass(frozen=True)
class FaceEstimate:
    """Dimension of the face of P_p containing A, and the surviving directions."""

    dimension: int
    survivors: tuple
    planes_used: int
    nullity: int


def _margin(M, p):
    return ordered_eigen_sum(SymMatrix(M), p)


def face_dimension_oracle(A, p, plane_samples=200, t_step=1e-3, tol=1e-8, seed=0):
    """Estimate the dimension of the smallest face of P_p containing A.

    1. Sample p-planes W minimizing tr_W A: the eigenvectors below the
       p-th eigenvalue plus a subspace of its eigenspace, one exact
       eigenplane for every four Haar-random choices of that subspace.
    2. Directions B with tr_W B = 0 on all sampled W (nullspace of the
       linear constraints, SVD cutoff 1e-8), with A itself projected out.
    3. Second-order screening: the quadratic model of the margin along
       the nullspace is diagonalized and each eigen-direction B is kept
       when both A + t B and A - t B stay in P_p (margin >= -10 tol).

    Returns a ``FaceEstimate``; dimension 1 means the ray of A is extreme.
    """
    A = as_sym(A)
    n = A.n
    if float(p) != int(p) or not 1 < int(p) < n:
        raise ValueError(f"the oracle needs integer 1 < p < n, got p={p}, n={n}")
    p = int(p)
    a = A.array / np.linalg.norm(A.array)
    verdict = is_p_positive(SymMatrix(a), p, tol)
    if verdict.status != BOUNDARY:
        raise ValueError(f"A is not on the boundary of P_{p} (status {verdict.status})")
    spec = eigh(SymMatrix(a))
    lam, Q = np.array(spec.eigenvalues), np.array(spec.frame)
    tie = 1e-6
    lam_p = lam[p - 1]
    below = np.nonzero(lam < lam_p - tie)[0]
    group = np.nonzero(np.abs(lam - lam_p) <= tie)[0]
    m, free = len(below), p - len(below)

    rng = np.random.default_rng(seed)
    Ebelow, Egroup = Q[:, below], Q[:, group]
    planes = []
    for k in range(plane_samples):
        if k % 5 == 0:
            U = Egroup[:, :free]
        else:
            g, r = np.linalg.qr(rng.standard_normal((len(group), free)))
            U = Egroup @ g
        W = np.column_stack([Ebelow, U])
        if np.trace(W.T @ a @ W) <= tol:
            planes.append(W @ W.T)
    if not planes:
        raise ValueError("no minimizing planes were sampled")

    basis = sym_basis(n)
    rows = np.einsum("sij,bij->sb", np.array(planes), basis)
    _, sv, vt = np.linalg.svd(rows)
    rank = int(np.sum(sv > 1e-8 * sv[0]))
    null = vt[rank:]
    a_coef = np.einsum("ij,bij->b", a, basis)
    null = null - np.outer(null @ a_coef, a_coef) / (a_coef @ a_coef)
    if null.size:
        u, s, _ = np.linalg.svd(null.T, full_matrices=False)
        null = u[:, s > 1e-8].T
    dirs = [np.einsum("b,bij->ij", c, basis) for c in null]

    # quadratic model q(B) ~ (margin(A + hB) + margin(A - hB)) / (2 h^2)
    h = t_step

    def q(B):
        return (_margin(a + h * B, p) + _margin(a - h * B, p)) / (2.0 * h * h)

    k = len(dirs)
    qm = np.zeros((k, k))
    for i in range(k):
        qm[i, i] = q(dirs[i])
        for j in range(i + 1, k):
            qm[i, j] = qm[j, i] = 0.25 * (q(dirs[i] + dirs[j]) - q(dirs[i] - dirs[j]))
    survivors = []
    if k:
        _, vecs = np.linalg.eigh(qm)
        for c in vecs.T:
            B = np.einsum("k,kij->ij", c, np.array(dirs))
            B /= np.linalg.norm(B)
            if (_margin(a + t_step * B, p) >= -10 * tol
                    and _margin(a - t_step * B, p) >= -10 * tol):
                survivors.append(SymMatrix(B))
    return FaceEstimate(1 + len(survivors), tuple(survivors), len(planes), k)


# -- corpus -------------------------------------------------------------------

def _unit(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def _orthonormal_pair(rng, n):
    q, _ = np.linalg.qr(rng.standard_normal((n, 2)))
    return q[:, 0], q[:, 1]


def labeled_corpus(size=500, seed=0, dims=(3, 4, 5)):
    """Boundary matrices with known labels for 1 < p < n integer.

    Families: ``I - p P_e`` (extreme), ``P_e`` (extreme iff p < n - 1),
    ``(I - p P_e) + (I - p P_f)``, ``(I - p P_e) + c P_f`` with e orthogonal to f,
    and ``P_e + P_f`` for p <= n - 2 (never extreme).
    Returns a list of ``(A, p, expected_label, family)``.
    """
    rng = np.random.default_rng(seed)
    cases = [(n, p) for n in dims for p in range(2, n)]
    out = []
    while len(out) < size:
        n, p = cases[rng.integers(len(cases))]
        family = ("neg_eig", "projection", "neg_sum", "mixed", "proj_sum")[rng.integers(5)]
        I = np.eye(n)
        if family == "neg_eig":
            A, label = I - p * np.outer(*(2 * [_unit(rng, n)])), EXTREME_NEG_EIG
        elif family == "projection":
            e = _unit(rng, n)
            A = np.outer(e, e)
            label = EXTREME_PROJECTION if p < n - 1 else BOUNDARY_NOT_EXTREME
        elif family == "neg_sum":
            e, f = _unit(rng, n), _unit(rng, n)
            s, t = rng.uniform(0.2, 1.0, 2)
            A = s * (I - p * np.outer(e, e)) + t * (I - p * np.outer(f, f))
            label = BOUNDARY_NOT_EXTREME
        elif family == "mixed":
            e, f = _orthonormal_pair(rng, n)
            A = (I - p * np.outer(e, e)) + rng.uniform(0.2, 2.0) * np.outer(f, f)
            label = BOUNDARY_NOT_EXTREME
        else:
            if p > n - 2:
                continue
            e, f = _unit(rng, n), _unit(rng, n)
            A = np.outer(e, e) + rng.uniform(0.2, 1.0) * np.outer(f, f)
            label = BOUNDARY_NOT_EXTREME
        out.append((SymMatrix(A), p, label, family))
    return out


def fibonacci_hemisphere(count):
    """``count`` nearly uniform unit vectors in the upper half of S^2."""
    k = np.arange(count) + 0.5
    z = k / count
    phi = math.pi * (3.0 - math.sqrt(5.0)) * k
    r = np.sqrt(1.0 - z * z)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def generator_spanning_check(samples=100, generator_count=1000, seed=0, tol=1e-3,
                             min_margin=0.1):
    """Approximate random members of P_2(R^3) by non-negative combinations
    of ``I - 2 P_e`` over a discretized hemisphere (scipy ``nnls``).

    Members are drawn with normalized margin >= ``min_margin`` and trace 1.
    Returns the list of Frobenius residuals and the indices that exceed
    ``tol``; every failure is logged.
    """
    n, p = 3, 2
    E = fibonacci_hemisphere(generator_count)
    gens = np.array([np.eye(n) - p * np.outer(e, e) for e in E])
    G = gens.reshape(generator_count, -1).T
    rng = np.random.default_rng(seed)
    residuals, failures = [], []
    while len(residuals) < samples:
        M = rng.standard_normal((n, n))
        M = 0.5 * (M + M.T)
        M = M - (ordered_eigen_sum(SymMatrix(M), p) - min_margin * np.linalg.norm(M)) / p * np.eye(n)
        tr = np.trace(M)
        if tr <= 0:
            continue
        M = M / tr
        _, res = nnls(G, M.ravel())
        residuals.append(float(res))
        if res > tol:
            failures.append(len(residuals) - 1)
            log.warning("spanning check: sample %d residual %.3e exceeds %.0e",
                        len(residuals) - 1, res, tol)
    return residuals, failures


__all__ = [
    "BOUNDARY_NOT_EXTREME",
    "EXTREME_NEG_EIG",
    "EXTREME_PROJECTION",
    "FaceEstimate",
    "LABELS",
    "RayClass",
    "classify_psd_ray",
    "classify_ray",
    "face_dimension_oracle",
    "fibonacci_hemisphere",
    "generator_spanning_check",
    "generators",
    "labeled_corpus",
    "neg_eig_pattern",
    "projection_pattern",
    "ray_angle",
    "sym_basis",
    "verify_witness",
]
