"""Riesz kernels K_p and their derivatives.

    K_p(x) = |x|^(2-p)       1 <= p < 2
           = log|x|          p = 2
           = -|x|^(2-p)      2 < p <= n

Every Hessian is a positive multiple of ``I - p P_x``, so K_p is p-harmonic
away from the origin.
"""
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .spectra import PDegree, SymMatrix, ordered_eigen_sum

POLE_RADIUS = 1e-12
LOG_BRANCH_TOL = 1e-12


@dataclass(frozen=True)
class RieszKernel:
    p: float
    n: int

    def __post_init__(self):
        d = PDegree(self.p, self.n)
        object.__setattr__(self, "p", d.p)

    @property
    def degree(self):
        return PDegree(self.p, self.n)

    @property
    def is_log(self):
        return abs(self.p - 2.0) < LOG_BRANCH_TOL

    def scalar(self, r):
        """c_p(r) with Hessian = c_p(r) (I - p P_x) and gradient = c_p(r) x."""
        if self.is_log:
            return r ** -2.0
        return abs(2.0 - self.p) * r ** -self.p

    def __call__(self, x):
        return riesz_value(self, x)


def _radius(k, x):
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != k.n:
        raise ValueError(f"point has dimension {x.shape[0]}, kernel expects {k.n}")
    r = float(np.linalg.norm(x))
    if r < POLE_RADIUS:
        raise DomainError("Riesz kernel evaluated at its pole")
    return x, r


def riesz_value(k, x):
    _, r = _radius(k, x)
    if k.is_log:
        return math.log(r)
    if k.p < 2.0:
        return r ** (2.0 - k.p)
    return -(r ** (2.0 - k.p))


def riesz_values(k, X):
    """Vectorized ``riesz_value`` over the rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    r = np.linalg.norm(X, axis=1)
    if np.any(r < POLE_RADIUS):
        raise DomainError("Riesz kernel evaluated at its pole")
    if k.is_log:
        return np.log(r)
    if k.p < 2.0:
        return r ** (2.0 - k.p)
    return -(r ** (2.0 - k.p))


def riesz_gradient(k, x):
    x, r = _radius(k, x)
    return k.scalar(r) * x


def riesz_hessian(k, x):
    x, r = _radius(k, x)
    proj = np.outer(x, x) / (r * r)
    return SymMatrix(k.scalar(r) * (np.eye(k.n) - k.p * proj))


def p_harmonic_defect(H, p):
    """Ordered p-eigenvalue sum of a Hessian; zero exactly when p-harmonic there."""
    return ordered_eigen_sum(H, p)
