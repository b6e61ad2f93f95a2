"""Membership and structure of the p-positivity cone P_p in Sym^2(R^n).

A symmetric A is p-positive when the (fractionally weighted) sum of its p
smallest eigenvalues is non-negative.  Three routes to the same number are
provided: the ordered eigenvalue sum, the smallest eigenvalue of the
derivation operator D_A on p-vectors, and a Monte Carlo minimum of plane
traces over random p-planes (an upper bound only).
"""
import functools
import itertools
from dataclasses import dataclass

import numpy as np

from .spectra import (
    PDegree,
    SymMatrix,
    as_degree,
    as_sym,
    ordered_eigen_sum,
    projector,
)

INTERIOR = "interior"
BOUNDARY = "boundary"
OUTSIDE = "outside"
UNDETERMINED = "undetermined"

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class ConeVerdict:
    """Three-way membership verdict.

    ``tol`` is the absolute tolerance actually applied to ``margin``.  A
    verdict with ``status == "undetermined"`` carries a ``note`` (non-smooth
    point, stencil outside the domain, ...) and a NaN margin.
    """

    status: str
    margin: float
    tol: float
    note: str = None

    @property
    def in_cone(self):
        return self.status in (INTERIOR, BOUNDARY)

    @classmethod
    def from_margin(cls, margin, tol):
        if margin > tol:
            status = INTERIOR
        elif margin < -tol:
            status = OUTSIDE
        else:
            status = BOUNDARY
        return cls(status, float(margin), float(tol))

    @classmethod
    def undetermined(cls, note, tol=float("nan")):
        return cls(UNDETERMINED, float("nan"), tol, note)


def is_p_positive(A, p, tol=DEFAULT_TOL):
    """Classify ``A`` against P_p.  ``tol`` is relative to ``max(1, |A|_inf)``."""
    A = as_sym(A)
    if not tol > 0:
        raise ValueError("tol must be positive")
    margin = ordered_eigen_sum(A, as_degree(p, A.n))
    return ConeVerdict.from_margin(margin, tol * A.scale())


@dataclass(frozen=True)
class DerivationMatrix:
    """D_A acting on Lambda^p R^n in the basis e_I, I ascending, lexicographic."""

    n: int
    p: int
    index_map: tuple
    entries: np.ndarray

    @property
    def dim(self):
        return len(self.index_map)


@functools.lru_cache(maxsize=None)
def _derivation_stencil(n, p):
    # For each (row J, column I, A-index (j, i), sign): D_A e_I has
    # coefficient sign * A[j, i] on e_J, J = I with i replaced by j.
    index_map = tuple(itertools.combinations(range(n), p))
    position = {I: k for k, I in enumerate(index_map)}
    rows, cols, ai, aj, signs = [], [], [], [], []
    for col, I in enumerate(index_map):
        members = set(I)
        for i in I:
            rows.append(col)
            cols.append(col)
            ai.append(i)
            aj.append(i)
            signs.append(1.0)
            for j in range(n):
                if j in members:
                    continue
                J = tuple(sorted((members - {i}) | {j}))
                lo, hi = min(i, j), max(i, j)
                between = sum(1 for m in I if lo < m < hi)
                rows.append(position[J])
                cols.append(col)
                ai.append(j)
                aj.append(i)
                signs.append(-1.0 if between % 2 else 1.0)
    return (
        index_map,
        np.array(rows),
        np.array(cols),
        np.array(ai),
        np.array(aj),
        np.array(signs),
    )


def derivation_operator(A, p):
    """Matrix of the derivation D_A on p-vectors.

    ``D_A(v_1 ^ ... ^ v_p) = sum_k v_1 ^ ... ^ (A v_k) ^ ... ^ v_p``.  The
    diagonal entry at I is the sum of A_ii over i in I; the entry linking I
    and J = (I - {i}) + {j} is A_ij times the parity of the number of
    elements of I strictly between i and j (the transpositions needed to
    move e_j into sorted position).
    """
    A = as_sym(A)
    p = int(p)
    if not 1 <= p <= A.n:
        raise ValueError(f"p={p} outside [1, {A.n}]")
    index_map, rows, cols, ai, aj, signs = _derivation_stencil(A.n, p)
    d = np.zeros((len(index_map), len(index_map)))
    np.add.at(d, (rows, cols), signs * A.array[ai, aj])
    d.setflags(write=False)
    return DerivationMatrix(A.n, p, index_map, d)


def derivation_min_eig(A, p):
    """Smallest eigenvalue of D_A (LAPACK ``eigvalsh``; dim may reach C(16, 8))."""
    d = derivation_operator(A, p)
    return float(np.linalg.eigvalsh(d.entries)[0])


@functools.lru_cache(maxsize=32)
def _haar_projectors(n, p, samples, seed):
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((samples, n, p)))
    flat = np.einsum("sik,sjk->sij", q, q).reshape(samples, n * n)
    flat.setflags(write=False)
    return flat


def grassmann_trace_min(A, p, samples=1000, seed=0):
    """Minimum of tr_W A over ``samples`` Haar-random p-planes W.

    Always an upper bound for the ordered eigenvalue sum; it is a witness,
    not a membership test.  Deterministic for a given ``seed``.
    """
    A = as_sym(A)
    p = int(p)
    if not 1 <= p <= A.n:
        raise ValueError(f"p={p} outside [1, {A.n}]")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    traces = _haar_projectors(A.n, p, int(samples), seed) @ A.array.ravel()
    return float(traces.min())


def hodge_dual_form(A):
    """``(tr A) I - A``: D_A transported to R^n when p = n - 1."""
    A = as_sym(A)
    return SymMatrix(A.trace() * np.eye(A.n) - A.array)


def riesz_path(n, p):
    """``I - p P_{e_1}`` in R^n."""
    e = np.zeros(n)
    e[0] = 1.0
    return SymMatrix(np.eye(n) - p * projector(e).array)


def riesz_characteristic(member, n, tol=1e-9, probes=65):
    """Largest p in [1, 2n] with ``member(I - p P_e)``, by bisection.

    ``member`` must fail monotonically along the path; this is checked on a
    grid of ``probes`` points before bisecting.  Returns ``2n`` when the
    membership never fails on the search interval.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    lo, hi = 1.0, 2.0 * n
    if not member(riesz_path(n, lo)):
        raise ValueError("characteristic below 1: I - P_e is not a member")
    grid = np.linspace(lo, hi, probes)
    flags = [bool(member(riesz_path(n, t))) for t in grid]
    first_fail = next((k for k, f in enumerate(flags) if not f), None)
    if first_fail is not None and any(flags[first_fail:]):
        raise ValueError("membership is not monotone along I - p P_e")
    if first_fail is None:
        return hi
    lo, hi = float(grid[first_fail - 1]), float(grid[first_fail])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if member(riesz_path(n, mid)):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def p_cone_member(q, tol=DEFAULT_TOL):
    """Membership predicate for P_q (boundary counts as member)."""

    def member(A):
        return is_p_positive(A, q, tol).in_cone

    return member


def subset_sums(values, p):
    """All sums over p-subsets of ``values``, ascending."""
    return np.sort(
        np.array([sum(c) for c in itertools.combinations(values, p)], dtype=float)
    )


__all__ = [
    "BOUNDARY",
    "INTERIOR",
    "OUTSIDE",
    "UNDETERMINED",
    "ConeVerdict",
    "DerivationMatrix",
    "PDegree",
    "derivation_min_eig",
    "derivation_operator",
    "grassmann_trace_min",
    "hodge_dual_form",
    "is_p_positive",
    "p_cone_member",
    "riesz_characteristic",
    "riesz_path",
    "subset_sums",
]
