import json
import math

import numpy as np
import pytest
from scipy.spatial import Delaunay
from sklearn.base import clone

from pconvex.exceptions import CertificationError, DomainError
from pconvex.fields import restriction_laplacian
from pconvex.hull import (
    AFFINE,
    QUADRATIC,
    RIESZ,
    Dictionary,
    Grid,
    PConvexHull,
    PPositiveMargin,
    affine_directions,
    affine_entry,
    box_diameter,
    compute_hull,
    default_dictionary,
    distance_to_box,
    hull_nesting_check,
    load_points,
    nested_dictionaries,
    quadratic_entry,
    riesz_entry,
    rle_decode,
    rle_encode,
)
from pconvex.spectra import PlaneFrame, SymMatrix, ordered_eigen_sum

SQUARE_BOX = [[-1, 1], [-1, 1]]


def square_distance(X, half=0.5):
    gap = np.maximum(np.abs(X) - half, 0.0)
    return np.linalg.norm(gap, axis=1)


def disk_safe_res(interval, gap=1e-3):
    # odd resolution (a layer of centres on x3 = 0) with no centre within gap of the unit circle
    for r in range(15, 41, 2):
        ax = Grid([interval], (r,)).axes()[0]
        radii = np.hypot(*np.meshgrid(ax, ax))
        if np.min(np.abs(radii - 1)) >= gap:
            return r
    raise AssertionError("no suitable resolution")


class TestDictionary:
    def test_sizes(self):
        d = default_dictionary(1, SQUARE_BOX)
        tags = [e.tag for e in d.entries]
        assert tags.count(AFFINE) == 8 and tags.count(QUADRATIC) == 4
        assert tags.count(RIESZ) == 4 * 2 * 2 * 2
        assert len(affine_directions(3)) == 18

    def test_no_poles(self):
        d = default_dictionary(1, SQUARE_BOX, pole_count=0)
        assert {e.tag for e in d.entries} == {AFFINE, QUADRATIC}

    def test_pole_distance(self):
        box = [[-1, 1]] * 3
        d = default_dictionary(2, box, pole_count=2)
        for e in d.entries:
            if e.tag == RIESZ:
                assert distance_to_box(e.params[1:], box) >= 0.2
                assert e.params[0] == 2

    def test_kernel_below_p_fails_certification(self):
        pole = [0, 0, 3.0]
        with pytest.raises(CertificationError, match="not 1.5-psh"):
            Dictionary(1.5, [[-1, 1]] * 3, [riesz_entry(2, pole)])
        Dictionary(2, [[-1, 1]] * 3, [riesz_entry(2, pole)])
        Dictionary(2.5, [[-1, 1]] * 3, [riesz_entry(2, pole)])

    def test_pole_too_close(self):
        box = [[-1, 1]] * 2
        with pytest.raises(CertificationError, match="closer"):
            Dictionary(2, box, [riesz_entry(2, [1.1, 0])])

    def test_negative_pole_count(self):
        with pytest.raises(ValueError):
            default_dictionary(1, SQUARE_BOX, pole_count=-1)

    def test_nested(self):
        ds = nested_dictionaries([1, 2, 3], [[-1, 1]] * 3, pole_count=1)
        assert ds[0].keys() <= ds[1].keys() <= ds[2].keys()
        with pytest.raises(ValueError):
            nested_dictionaries([2, 1], [[-1, 1]] * 3)


class TestComputeHull:
    def test_singleton(self):
        a = np.array([0.3, -0.2])
        d = Dictionary(1, SQUARE_BOX, [quadratic_entry(a), affine_entry([1, 0])])
        grid = Grid(SQUARE_BOX, (16, 16))
        res = compute_hull([a], grid, d)
        assert res.cell_count == 1
        assert res.mask.ravel()[grid.cell_index(a)[0]]

    def test_square_convex_oracle(self):
        K = np.array([[-0.5, -0.5], [-0.5, 0.5], [0.5, -0.5], [0.5, 0.5]])
        grid = Grid(SQUARE_BOX, (64, 64))
        res = compute_hull(K, grid, default_dictionary(1, SQUARE_BOX))
        C = grid.centers()
        dist = square_distance(C)
        mask = res.mask.ravel()
        assert np.all(mask[dist == 0])                 # nothing of the square is lost
        assert np.all(dist[mask] <= np.linalg.norm(grid.spacing))  # within one cell

    @pytest.mark.parametrize("p", [1, 1.5, 2])
    def test_triangle_soundness(self, p):
        K = np.array([[-0.7, -0.6], [0.8, -0.3], [0.1, 0.75]])
        grid = Grid(SQUARE_BOX, (48, 48))
        res = compute_hull(K, grid, default_dictionary(p, SQUARE_BOX))
        inside = Delaunay(K).find_simplex(grid.centers()) >= 0
        assert np.all(res.mask.ravel()[inside])

    def test_cells_with_points_are_in(self):
        rng = np.random.default_rng(0)
        K = rng.uniform(-0.9, 0.9, (7, 2))
        grid = Grid(SQUARE_BOX, (20, 20))
        res = compute_hull(K, grid, default_dictionary(2, SQUARE_BOX))
        assert np.all(res.mask.ravel()[grid.cell_index(K)])
        assert np.array_equal(res.mask, res.margin >= -1e-9)

    def test_circle_spans_disk(self):
        box = [[-1.5, 1.5]] * 3
        grid = Grid(box, (disk_safe_res(box[0]),) * 3)
        t = np.linspace(0, 2 * math.pi, 4096, endpoint=False)
        K = np.column_stack([np.cos(t), np.sin(t), np.zeros_like(t)])
        d = default_dictionary(2, box)
        res = compute_hull(K, grid, d)
        C = grid.centers()
        disk = (np.abs(C[:, 2]) < 1e-12) & (np.linalg.norm(C[:, :2], axis=1) <= 1)
        assert disk.sum() > 0
        assert np.all(res.mask.ravel()[disk])
        # each entry is subharmonic on the plane of the disk
        W = PlaneFrame.coordinate(3, [0, 1])
        for e in d.entries:
            for c in C[disk][::7]:
                assert restriction_laplacian(e.field, (c, W)) >= -2e-4

    def test_monotone_in_dictionary(self):
        K = np.array([[-0.5, 0.1], [0.4, 0.3], [0.0, -0.6]])
        grid = Grid(SQUARE_BOX, (32, 32))
        small = default_dictionary(1, SQUARE_BOX, pole_count=0)
        big = small.extended([quadratic_entry([0.1, 0.1]), riesz_entry(1, [0, 2.0])])
        m_small = compute_hull(K, grid, small).mask
        m_big = compute_hull(K, grid, big).mask
        assert np.all(m_big <= m_small)

    def test_translation_equivariance(self):
        K = np.array([[-0.5, 0.25], [0.5, 0.25], [0.0, -0.5]])
        grid = Grid(SQUARE_BOX, (8, 8))
        d = default_dictionary(2, SQUARE_BOX, pole_count=1)
        v = np.array([0.5, -0.25])  # whole cells
        a = compute_hull(K, grid, d)
        b = compute_hull(K + v, grid.translated(v), d.translated(v))
        assert np.array_equal(a.mask, b.mask)
        np.testing.assert_allclose(a.margin, b.margin, atol=1e-12)

    def test_errors(self):
        d = default_dictionary(1, SQUARE_BOX, pole_count=0)
        grid = Grid(SQUARE_BOX, (4, 4))
        with pytest.raises(DomainError):
            compute_hull([[2.0, 0.0]], grid, d)
        with pytest.raises(ValueError):
            compute_hull(np.zeros((0, 2)), grid, d)
        with pytest.raises(ValueError):
            Grid(SQUARE_BOX, (1, 4))
        with pytest.raises(ValueError):
            compute_hull([[0, 0]], Grid([[-2, 2], [-2, 2]], (4, 4)), d)


class TestNesting:
    def test_cube(self):
        box = [[-1, 1]] * 3
        K = np.array([[x, y, z] for x in (-0.5, 0.5) for y in (-0.5, 0.5) for z in (-0.5, 0.5)])
        grid = Grid(box, (9, 9, 9))
        ds = nested_dictionaries([1, 2, 3], box, pole_count=1)
        report, results = hull_nesting_check(K, grid, [1, 2, 3], ds)
        assert report.ok
        assert list(report.cell_counts) == sorted(report.cell_counts, reverse=True)
        assert json.loads(json.dumps(report.to_json()))["ok"]

    def test_single(self):
        d = default_dictionary(2, SQUARE_BOX, pole_count=0)
        report, _ = hull_nesting_check([[0, 0]], Grid(SQUARE_BOX, (4, 4)), [2], [d])
        assert report.ok

    def test_not_nested(self):
        a = default_dictionary(1, SQUARE_BOX, pole_count=0, seed=0)
        b = default_dictionary(2, SQUARE_BOX, pole_count=0, seed=1)
        with pytest.raises(ValueError, match="nested"):
            hull_nesting_check([[0, 0]], Grid(SQUARE_BOX, (4, 4)), [1, 2], [a, b])


class TestSerialization:
    def test_rle(self):
        rng = np.random.default_rng(1)
        for shape in ((5,), (4, 6), (3, 3, 3)):
            m = rng.random(shape) < 0.4
            assert np.array_equal(rle_decode(rle_encode(m), shape), m)

    def test_result_json_and_csv(self):
        grid = Grid(SQUARE_BOX, (4, 4))
        res = compute_hull([[0, 0], [0.5, 0.5]], grid, default_dictionary(1, SQUARE_BOX, pole_count=0))
        obj = json.loads(json.dumps(res.to_json()))
        assert np.array_equal(rle_decode(obj["mask_rle"], grid.res), res.mask)
        assert obj["cells_in"] == res.cell_count
        lines = res.margins_csv().splitlines()
        assert lines[0] == "x0,x1,margin,in_hull" and len(lines) == 17
        assert Grid.from_json(grid.to_json()).res == grid.res

    def test_load_points(self):
        K = load_points({"n": 2, "points": [[0, 1], [1, 0]]})
        assert K.shape == (2, 2)
        with pytest.raises(ValueError):
            load_points({"n": 3, "points": [[0, 1]]})


class TestEstimators:
    def test_hull_estimator(self):
        K = np.array([[-0.5, -0.5], [0.5, -0.5], [0.0, 0.5]])
        est = PConvexHull(p=1, box=SQUARE_BOX).fit(K)
        assert np.all(est.predict(K))
        assert est.predict([[0.0, -0.1]])[0]
        assert not est.predict([[0.9, 0.9]])[0]
        assert est.decision_function([[0.9, 0.9]])[0] < 0
        assert clone(est).get_params()["p"] == 1
        assert est.grid_hull(K, (8, 8)).cell_count > 0

    def test_default_box(self):
        est = PConvexHull(p=2).fit([[0, 0, 0], [1, 1, 1]])
        assert np.all(est.dictionary_.box[:, 0] < 0) and est.n_features_in_ == 3

    def test_margin_transformer(self):
        rng = np.random.default_rng(2)
        rows = rng.standard_normal((5, 6))
        out = PPositiveMargin(p_values=(1, 2, 2.5)).fit_transform(rows)
        for row, vals in zip(rows, out):
            A = SymMatrix.from_upper(3, row)
            np.testing.assert_allclose(vals, [ordered_eigen_sum(A, p) for p in (1, 2, 2.5)], atol=1e-12)
        with pytest.raises(ValueError):
            PPositiveMargin().fit(np.zeros((2, 5)))

    def test_box_diameter(self):
        assert box_diameter(SQUARE_BOX) == pytest.approx(2 * math.sqrt(2))
