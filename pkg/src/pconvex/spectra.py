"""Dense symmetric linear algebra at small dimension.

Everything here works on ``SymMatrix`` values: immutable, exactly
symmetric, finite.  The eigensolver is a cyclic Jacobi iteration, which is
slow asymptotically but accurate and fully deterministic for n <= 16.
"""
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError

MAX_DIM = 16
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
ORTHO_TOL = 1e-10


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class SymMatrix:
    """A symmetric matrix of size n x n, stored as a read-only array.

    Build from a square array (``SymMatrix(a)``), from the row-major upper
    triangle (``SymMatrix.from_upper``) or with the helpers ``identity`` and
    ``diag``.  Arrays that are not symmetric to within ``1e-12`` relative
    are rejected; accepted arrays are symmetrized exactly.
    """

    __slots__ = ("_a",)

    def __init__(self, a):
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        n = a.shape[0]
        if not 1 <= n <= MAX_DIM:
            raise ValueError(f"dimension {n} outside [1, {MAX_DIM}]")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        scale = max(1.0, float(np.max(np.abs(a))))
        if np.max(np.abs(a - a.T)) > 1e-12 * scale:
            raise ValueError("matrix is not symmetric")
        self._a = _readonly(0.5 * (a + a.T))

    @classmethod
    def from_upper(cls, n, upper):
        upper = [float(x) for x in upper]
        if len(upper) != n * (n + 1) // 2:
            raise ValueError(
                f"expected {n * (n + 1) // 2} upper-triangular entries for n={n}, "
                f"got {len(upper)}"
            )
        a = np.zeros((n, n))
        a[np.triu_indices(n)] = upper
        return cls(a + np.triu(a, 1).T)

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    @classmethod
    def diag(cls, values):
        return cls(np.diag(np.asarray(values, dtype=float)))

    @property
    def n(self):
        return self._a.shape[0]

    @property
    def array(self):
        """Read-only view of the full matrix."""
        return self._a

    @property
    def upper(self):
        return self._a[np.triu_indices(self.n)].tolist()

    def norm_inf(self):
        """Largest absolute entry."""
        return float(np.max(np.abs(self._a)))

    def scale(self):
        """``max(1, |A|_inf)``, the reference magnitude for relative tolerances."""
        return max(1.0, self.norm_inf())

    def trace(self):
        return float(np.trace(self._a))

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._a.copy()
        return self._a.astype(dtype)

    def __add__(self, other):
        if isinstance(other, SymMatrix):
            return SymMatrix(self._a + other._a)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, SymMatrix):
            return SymMatrix(self._a - other._a)
        return NotImplemented

    def __mul__(self, c):
        if isinstance(c, (int, float, np.floating, np.integer)):
            return SymMatrix(float(c) * self._a)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / float(c))

    def __neg__(self):
        return SymMatrix(-self._a)

    def __eq__(self, other):
        return isinstance(other, SymMatrix) and np.array_equal(self._a, other._a)

    def __hash__(self):
        return hash(self._a.tobytes())

    def __repr__(self):
        return f"SymMatrix({self._a.tolist()!r})"


def as_sym(a):
    return a if isinstance(a, SymMatrix) else SymMatrix(a)


@dataclass(frozen=True)
class Spectrum:
    """Ascending eigenvalues and the matching orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    frame: np.ndarray

    def reconstruct(self):
        q = self.frame
        return (q * self.eigenvalues) @ q.T


@dataclass(frozen=True)
class PDegree:
    """A real degree ``1 <= p <= n``, split into ``bar_p = floor(p)`` and ``frac``."""

    p: float
    n: int

    def __post_init__(self):
        p = float(self.p)
        if not math.isfinite(p) or not 1.0 <= p <= self.n:
            raise ValueError(f"degree p={self.p} outside [1, {self.n}]")
        object.__setattr__(self, "p", p)

    @property
    def bar_p(self):
        return int(math.floor(self.p))

    @property
    def frac(self):
        return self.p - self.bar_p

    @property
    def is_integer(self):
        return self.frac == 0.0

    def weights(self):
        """Weights applied to the ascending eigenvalues by the ordered sum."""
        w = np.zeros(self.n)
        w[: self.bar_p] = 1.0
        if self.bar_p < self.n:
            w[self.bar_p] = self.frac
        return w


def as_degree(p, n):
    if isinstance(p, PDegree):
        if p.n != n:
            raise ValueError(f"degree is for dimension {p.n}, matrix has n={n}")
        return p
    return PDegree(p, n)


class PlaneFrame:
    """An orthonormal k-frame in R^n, spanning a k-plane.

    ``vectors`` has shape (k, n); ``matrix`` is the (n, k) column form.
    """

    __slots__ = ("_v",)

    def __init__(self, vectors):
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        k, n = v.shape
        if not 1 <= k <= n:
            raise ValueError(f"a frame needs 1 <= k <= n, got k={k}, n={n}")
        if not np.all(np.isfinite(v)):
            raise ValueError("frame vectors must be finite")
        if np.max(np.abs(v @ v.T - np.eye(k))) > ORTHO_TOL:
            raise ValueError("frame vectors are not orthonormal")
        self._v = _readonly(v)

    @classmethod
    def span(cls, vectors):
        """Orthonormalize ``vectors`` (rows) by QR and return their frame."""
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        q, r = np.linalg.qr(v.T)
        d = np.abs(np.diag(r))
        if np.any(d <= 1e-12 * max(1.0, float(np.max(np.abs(v))))):
            raise ValueError("vectors are linearly dependent")
        q = q * np.sign(np.diag(r))
        return cls(q.T)

    @classmethod
    def coordinate(cls, n, indices):
        return cls(np.eye(n)[list(indices)])

    @classmethod
    def random(cls, n, k, rng):
        """Haar-distributed k-plane: Gaussian matrix, orthonormalized."""
        q, r = np.linalg.qr(rng.standard_normal((n, k)))
        return cls((q * np.sign(np.diag(r))).T)

    @property
    def n(self):
        return self._v.shape[1]

    @property
    def k(self):
        return self._v.shape[0]

    @property
    def vectors(self):
        return self._v

    @property
    def matrix(self):
        return self._v.T

    def projector(self):
        return self._v.T @ self._v

    def __repr__(self):
        return f"PlaneFrame({self._v.tolist()!r})"


def _jacobi(a):
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    fro = float(np.sqrt(np.sum(a * a)))
    threshold = JACOBI_TOL * fro

    def off(m):
        return float(np.linalg.norm(m - np.diag(np.diag(m))))

    for _ in range(JACOBI_MAX_SWEEPS):
        if off(a) <= threshold:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                h = a[q, q] - a[p, p]
                if abs(h) + 100.0 * abs(apq) == abs(h):
                    t = apq / h  # tiny rotation; tau would overflow
                else:
                    tau = h / (2.0 * apq)
                    t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    if off(a) <= threshold:
        return np.diag(a).copy(), v
    raise ConvergenceError(
        f"Jacobi iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps "
        f"(off-diagonal norm {off(a):.3e}, threshold {threshold:.3e})"
    )


def eigh(A):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Eigenvalues come back ascending (stable sort, so ties keep the rotation
    order) and each eigenvector is signed so that its largest-magnitude
    component is positive.  Identical input bits give identical output.

    Raises ``ConvergenceError`` if the off-diagonal mass is still above
    ``1e-12 * |A|_F`` after 100 sweeps.
    """
    A = as_sym(A)
    w, v = _jacobi(A.array)
    order = np.argsort(w, kind="stable")
    w = w[order]
    v = v[:, order]
    for j in range(v.shape[1]):
        i = int(np.argmax(np.abs(v[:, j])))
        if v[i, j] < 0:
            v[:, j] = -v[:, j]
    return Spectrum(_readonly(w), _readonly(v))


def eigenvalues(A):
    return eigh(A).eigenvalues


def weighted_sum(values, p):
    """Ordered sum of already-ascending ``values`` for degree ``p``.

    ``lam_1 + ... + lam_[p] + (p - [p]) lam_[p]+1``; the fractional term is
    dropped when p is an integer (in particular when p = n).
    """
    values = np.asarray(values, dtype=float)
    p = as_degree(p, len(values))
    total = float(np.sum(values[: p.bar_p]))
    if p.frac > 0.0:
        total += p.frac * float(values[p.bar_p])
    return total


def ordered_eigen_sum(A, p):
    """Sum of the p smallest eigenvalues of ``A``, fractionally weighted.

    >>> ordered_eigen_sum(SymMatrix.diag([-1.5, 1, 1]), 2.5)
    0.0
    """
    A = as_sym(A)
    return weighted_sum(eigh(A).eigenvalues, as_degree(p, A.n))


def trace_on_plane(A, W):
    """Trace of the restriction of ``A`` to the plane spanned by frame ``W``."""
    A = as_sym(A)
    if not isinstance(W, PlaneFrame):
        W = PlaneFrame(W)
    if W.n != A.n:
        raise ValueError(f"frame lives in R^{W.n}, matrix in R^{A.n}")
    v = W.vectors
    return float(np.einsum("ki,ij,kj->", v, A.array, v))


def projector(e):
    """Orthogonal projection onto the line through ``e`` (need not be unit)."""
    e = np.asarray(e, dtype=float).ravel()
    nrm2 = float(e @ e)
    if not math.isfinite(nrm2) or nrm2 == 0.0:
        raise ValueError("cannot project onto the zero vector")
    return SymMatrix(np.outer(e, e) / nrm2)
