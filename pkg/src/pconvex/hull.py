"""Grid outer approximation of the p-convex hull of a finite set.

A point x of the box X is kept when no function of a finite dictionary of
certified p-plurisubharmonic functions separates it from K, i.e. when
``u(x) <= max_K u`` for every entry u.  More entries can only shrink the
mask, so the result always contains the true hull (relative to X) on the
grid.
"""
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .exceptions import CertificationError, DomainError
from .fields import affine_field, norm2_field, psh_report, riesz_field
from .pcone import OUTSIDE, UNDETERMINED
from .spectra import as_degree

MASK_TOL = 1e-9
CERT_POINTS_PER_AXIS = 5
POLE_OFFSET = 0.25          # pole distance from the box, in units of diam X
MIN_POLE_MARGIN = 0.1       # certified lower bound, in units of diam X

AFFINE = "affine"
QUADRATIC = "convex-quadratic"
RIESZ = "riesz-translate"


def _as_box(box):
    box = np.array(box, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2 or np.any(box[:, 0] >= box[:, 1]):
        raise ValueError("box must be a list of increasing [lo, hi] pairs")
    return box


def box_diameter(box):
    box = _as_box(box)
    return float(np.linalg.norm(box[:, 1] - box[:, 0]))


def distance_to_box(x, box):
    box = _as_box(box)
    x = np.asarray(x, dtype=float)
    gap = np.maximum(box[:, 0] - x, 0.0) + np.maximum(x - box[:, 1], 0.0)
    return float(np.linalg.norm(gap))


@dataclass(frozen=True)
class Entry:
    """A dictionary function with its provenance.

    ``key`` identifies the entry across dictionaries (tag, kernel degree,
    parameters) so nesting can be checked by set inclusion.
    """

    tag: str
    field: object = field(repr=False, compare=False)
    params: tuple = ()

    @property
    def key(self):
        return (self.tag, self.params)


def affine_entry(direction):
    d = tuple(float(v) for v in direction)
    return Entry(AFFINE, affine_field(np.array(d)), d)


def quadratic_entry(center):
    c = tuple(float(v) for v in center)
    return Entry(QUADRATIC, norm2_field(len(c), center=np.array(c)), c)


def riesz_entry(p, pole):
    a = tuple(float(v) for v in pole)
    return Entry(RIESZ, riesz_field(p, len(a), pole=np.array(a)), (float(p),) + a)


def _translate_entry(e, v):
    if e.tag == AFFINE:
        # u(x - v) = d.x - d.v: same direction up to a constant
        d = np.array(e.params)
        f = affine_field(d, -float(d @ v))
        return Entry(AFFINE, f, e.params + (float(d @ v),))
    if e.tag == QUADRATIC:
        return quadratic_entry(np.array(e.params) + v)
    p, *pole = e.params
    return riesz_entry(p, np.array(pole) + v)


class Dictionary:
    """Certified p-plurisubharmonic functions on the box X.

    Every entry is checked with ``psh_report`` on a 5^n grid of X and
    every Riesz pole must lie at least ``0.1 diam X`` outside X; failures
    raise ``CertificationError`` naming the entry.
    """

    def __init__(self, p, box, entries, certify=True):
        self.box = _as_box(box)
        self.n = self.box.shape[0]
        self.p = as_degree(p, self.n).p
        self.entries = tuple(entries)
        if certify:
            self.certify()

    def __len__(self):
        return len(self.entries)

    def __repr__(self):
        return f"Dictionary(p={self.p:g}, n={self.n}, entries={len(self)})"

    def keys(self):
        return {e.key for e in self.entries}

    def certification_points(self, per_axis=CERT_POINTS_PER_AXIS):
        axes = [lo + (np.arange(per_axis) + 0.5) / per_axis * (hi - lo) for lo, hi in self.box]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.n)

    def certify(self):
        pts = self.certification_points()
        diam = box_diameter(self.box)
        for e in self.entries:
            if e.tag == RIESZ:
                pole = np.array(e.params[1:])
                if distance_to_box(pole, self.box) < MIN_POLE_MARGIN * diam:
                    raise CertificationError(
                        f"pole {pole.tolist()} closer than {MIN_POLE_MARGIN} diam to the box", e)
            for x, v in zip(pts, psh_report(e.field, pts, self.p)):
                if v.status in (OUTSIDE, UNDETERMINED):
                    raise CertificationError(
                        f"{e.tag} entry {e.params} is not {self.p:g}-psh at {x.tolist()} "
                        f"(status {v.status}, margin {v.margin:.3e})", e)
        return True

    def translated(self, v):
        """Translate the box and every entry by ``v``."""
        v = np.asarray(v, dtype=float)
        return Dictionary(self.p, self.box + v[:, None],
                          [_translate_entry(e, v) for e in self.entries], certify=False)

    def extended(self, entries, p=None):
        return Dictionary(self.p if p is None else p, self.box, self.entries + tuple(entries))

    def values(self, X):
        """(entries, points) matrix of entry values."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([e.field.values(X) for e in self.entries])


def affine_directions(n):
    """The 2n^2 directions +-e_i and +-(e_i +- e_j)/sqrt(2)."""
    eye = np.eye(n)
    dirs = [s * eye[i] for i in range(n) for s in (1.0, -1.0)]
    r = 1.0 / math.sqrt(2.0)
    for i in range(n):
        for j in range(i + 1, n):
            for a in (1.0, -1.0):
                for b in (1.0, -1.0):
                    dirs.append(r * (a * eye[i] + b * eye[j]))
    return np.array(dirs)


def pole_positions(box, per_face, seed=0):
    """``per_face`` poles beyond each of the 2n faces of the box, at distance
    ``0.25 diam`` from it, with tangential coordinates uniform over the face."""
    box = _as_box(box)
    n = box.shape[0]
    offset = POLE_OFFSET * box_diameter(box)
    rng = np.random.default_rng(seed)
    poles = []
    for axis in range(n):
        for side in (0, 1):
            for _ in range(per_face):
                a = rng.uniform(box[:, 0], box[:, 1])
                a[axis] = box[axis, 0] - offset if side == 0 else box[axis, 1] + offset
                poles.append(a)
    return np.array(poles).reshape(-1, n)


def default_dictionary(p, box, pole_count=None, seed=0, kernel_degrees=None):
    """Affine, convex-quadratic and Riesz-translate entries on ``box``.

    ``pole_count`` is the number of poles per face (default 4n); the
    kernels K_q for q in ``kernel_degrees`` (default just p) are placed at
    every pole.  Quadratic centres (n^2 of them) are drawn uniformly in the
    box from ``seed``.
    """
    box = _as_box(box)
    n = box.shape[0]
    p = as_degree(p, n).p
    if pole_count is None:
        pole_count = 4 * n
    if pole_count < 0:
        raise ValueError("pole_count must be >= 0")
    rng = np.random.default_rng(seed)
    entries = [affine_entry(d) for d in affine_directions(n)]
    entries += [quadratic_entry(c) for c in rng.uniform(box[:, 0], box[:, 1], size=(n * n, n))]
    degrees = [p] if kernel_degrees is None else list(kernel_degrees)
    for a in pole_positions(box, pole_count, seed):
        entries += [riesz_entry(q, a) for q in degrees]
    return Dictionary(p, box, entries)


def nested_dictionaries(p_list, box, pole_count=None, seed=0):
    """Dictionaries for ascending ``p_list`` where each one contains all
    earlier ones (the kernels K_q for every q <= p in the list)."""
    p_list = list(p_list)
    if p_list != sorted(p_list):
        raise ValueError("p_list must be ascending")
    return [default_dictionary(p, box, pole_count, seed, kernel_degrees=p_list[: k + 1])
            for k, p in enumerate(p_list)]


# -- grids and results --------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Cell-centred grid: ``res[i]`` cells along axis i of ``box``."""

    box: np.ndarray
    res: tuple

    def __post_init__(self):
        box = _as_box(self.box)
        res = tuple(int(r) for r in self.res)
        if len(res) != box.shape[0] or min(res) < 2:
            raise ValueError("grid needs one resolution >= 2 per axis")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "res", res)

    @classmethod
    def from_json(cls, obj):
        return cls(obj["box"], obj["res"])

    def to_json(self):
        return {"box": self.box.tolist(), "res": list(self.res)}

    @property
    def n(self):
        return len(self.res)

    @property
    def spacing(self):
        return (self.box[:, 1] - self.box[:, 0]) / np.array(self.res)

    def axes(self):
        return [lo + (np.arange(r) + 0.5) * (hi - lo) / r for (lo, hi), r in zip(self.box, self.res)]

    def centers(self):
        """Cell centres, shape (prod(res), n), C order."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1).reshape(-1, self.n)

    def cell_index(self, X):
        """Flat index of the (half-open) cell containing each row of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        idx = np.floor((X - self.box[:, 0]) / self.spacing).astype(int)
        idx = np.clip(idx, 0, np.array(self.res) - 1)
        return np.ravel_multi_index(idx.T, self.res)

    def translated(self, v):
        return Grid(self.box + np.asarray(v, dtype=float)[:, None], self.res)


def rle_encode(mask):
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return {"first": False, "runs": []}
    change = np.nonzero(flat[1:] != flat[:-1])[0] + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    return {"first": bool(flat[0]), "runs": np.diff(bounds).tolist()}


def rle_decode(obj, shape):
    value, out = bool(obj["first"]), []
    for run in obj["runs"]:
        out.append(np.full(run, value))
        value = not value
    flat = np.concatenate(out) if out else np.zeros(0, dtype=bool)
    return flat.reshape(shape)


@dataclass(frozen=True)
class HullResult:
    """Mask and per-cell margin ``min_u (max_K u - u)`` on a grid."""

    grid: Grid
    mask: np.ndarray
    margin: np.ndarray
    p: float
    entries: int

    @property
    def cell_count(self):
        return int(self.mask.sum())

    def to_json(self):
        m = self.margin
        return {
            "grid": self.grid.to_json(),
            "p": self.p,
            "entries": self.entries,
            "cells_in": self.cell_count,
            "mask_rle": rle_encode(self.mask),
            "margin_stats": {"min": float(m.min()), "max": float(m.max()),
                             "mean": float(m.mean())},
        }

    def margins_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(self.grid.n)] + ["margin", "in_hull"])
        for c, m, k in zip(self.grid.centers(), self.margin.ravel(), self.mask.ravel()):
            w.writerow([f"{v:.12g}" for v in c] + [f"{m:.12g}", int(k)])
        return buf.getvalue()


def _check_points(K, box):
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if K.shape[0] == 0:
        raise ValueError("K must be non-empty")
    if K.shape[1] != box.shape[0]:
        raise ValueError(f"points have dimension {K.shape[1]}, box has {box.shape[0]}")
    if np.any(K < box[:, 0]) or np.any(K > box[:, 1]):
        raise DomainError("K is not contained in the box")
    return K


def compute_hull(K, grid, dictionary, tol=MASK_TOL):
    """Outer approximation of the p-convex hull of K relative to the box.

    The margin of a cell is the largest of ``min_u (max_K u - u(y))`` over
    its centre y and any points of K inside the cell, so cells meeting K
    are always in.  A cell is in the mask when its margin is >= -tol.
    """
    if not isinstance(grid, Grid):
        grid = Grid.from_json(grid)
    if not np.allclose(grid.box, dictionary.box):
        raise ValueError("grid and dictionary boxes differ")
    K = _check_points(K, dictionary.box)
    vk = dictionary.values(K)
    sup = vk.max(axis=1)
    centers = grid.centers()
    margin = np.min(sup[:, None] - dictionary.values(centers), axis=0)
    kmargin = np.min(sup[:, None] - vk, axis=0)
    cells = grid.cell_index(K)
    np.maximum.at(margin, cells, kmargin)
    margin = margin.reshape(grid.res)
    return HullResult(grid, margin >= -tol, margin, dictionary.p, len(dictionary))


@dataclass(frozen=True)
class NestingReport:
    p_list: tuple
    cell_counts: tuple
    violations: tuple  # (p_index, flat cell index) where mask_q has a cell mask_p lacks

    @property
    def ok(self):
        return not self.violations

    def to_json(self):
        return {"p_list": list(self.p_list), "cell_counts": list(self.cell_counts),
                "violations": [list(v) for v in self.violations], "ok": self.ok}


def hull_nesting_check(K, grid, p_list, dictionaries):
    """Check mask_q inside mask_p for consecutive p < q in ``p_list``."""
    p_list = tuple(float(p) for p in p_list)
    if list(p_list) != sorted(p_list) or len(p_list) != len(dictionaries):
        raise ValueError("p_list must be ascending and match the dictionaries")
    for a, b in zip(dictionaries, dictionaries[1:]):
        if not a.keys() <= b.keys():
            raise ValueError("dictionaries are not nested")
    results = [compute_hull(K, grid, d) for d in dictionaries]
    violations = []
    for k in range(1, len(results)):
        extra = results[k].mask & ~results[k - 1].mask
        violations += [(k, int(i)) for i in np.flatnonzero(extra)]
    return NestingReport(p_list, tuple(r.cell_count for r in results), tuple(violations)), results


# -- sklearn-style estimators ------------------------------------------------

class PConvexHull(BaseEstimator):
    """Estimator wrapper: ``fit(K)`` records ``max_K u`` for each entry of
    the default dictionary; ``decision_function(X)`` is the separation
    margin and ``predict(X)`` the hull membership."""

    def __init__(self, p=1.0, box=None, pole_count=None, seed=0, tol=MASK_TOL):
        self.p = p
        self.box = box
        self.pole_count = pole_count
        self.seed = seed
        self.tol = tol

    def fit(self, K, y=None):
        K = np.atleast_2d(np.asarray(K, dtype=float))
        box = self.box
        if box is None:
            lo, hi = K.min(axis=0), K.max(axis=0)
            pad = 0.1 * max(1.0, float(np.max(hi - lo)))
            box = np.stack([lo - pad, hi + pad], axis=1)
        self.dictionary_ = default_dictionary(self.p, box, self.pole_count, self.seed)
        K = _check_points(K, self.dictionary_.box)
        self.sup_ = self.dictionary_.values(K).max(axis=1)
        self.n_features_in_ = K.shape[1]
        return self

    def decision_function(self, X):
        return np.min(self.sup_[:, None] - self.dictionary_.values(X), axis=0)

    def predict(self, X):
        return self.decision_function(X) >= -self.tol

    def grid_hull(self, K, res):
        return compute_hull(K, Grid(self.dictionary_.box, res), self.dictionary_, self.tol)


class PPositiveMargin(TransformerMixin, BaseEstimator):
    """Map rows of upper-triangular coefficients to ordered eigen-sums,
    one column per degree in ``p_values``."""

    def __init__(self, p_values=(1.0,)):
        self.p_values = p_values

    def fit(self, X, y=None):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        m = X.shape[1]
        n = int(round((math.sqrt(8 * m + 1) - 1) / 2))
        if n * (n + 1) // 2 != m:
            raise ValueError(f"{m} columns is not a triangular number")
        self.n_ = n
        self.n_features_in_ = m
        return self

    def transform(self, X):
        from .spectra import SymMatrix, eigh, weighted_sum

        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty((X.shape[0], len(self.p_values)))
        for i, row in enumerate(X):
            lam = eigh(SymMatrix.from_upper(self.n_, row)).eigenvalues
            out[i] = [weighted_sum(lam, p) for p in self.p_values]
        return out


def load_points(obj):
    """``{"n": int, "points": [[...], ...]}`` -> (m, n) array."""
    n = int(obj["n"])
    K = np.array(obj["points"], dtype=float)
    if K.ndim != 2 or K.shape[1] != n or K.shape[0] == 0:
        raise ValueError(f"points must be a non-empty list of {n}-vectors")
    return K


__all__ = [
    "AFFINE",
    "QUADRATIC",
    "RIESZ",
    "Dictionary",
    "Entry",
    "Grid",
    "HullResult",
    "NestingReport",
    "PConvexHull",
    "PPositiveMargin",
    "affine_directions",
    "compute_hull",
    "default_dictionary",
    "hull_nesting_check",
    "load_points",
    "nested_dictionaries",
    "pole_positions",
    "rle_decode",
    "rle_encode",
]
