"""Property-based checks of the cone calculus and the curvature transport."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pconvex.extremal import classify_ray
from pconvex.hypersurface import CurvatureProfile, parallel_curvatures
from pconvex.pcone import OUTSIDE, derivation_min_eig, is_p_positive, subset_sums
from pconvex.spectra import PlaneFrame, SymMatrix, eigh, ordered_eigen_sum

finite = st.floats(-10, 10, allow_nan=False, allow_subnormal=False)


@st.composite
def sym_matrices(draw, n_min=2, n_max=5):
    n = draw(st.integers(n_min, n_max))
    M = draw(arrays(float, (n, n), elements=finite))
    return SymMatrix(0.5 * (M + M.T))


@st.composite
def degrees(draw, n):
    return draw(st.floats(1, n, allow_nan=False))


def orthogonal(seed, n):
    q, r = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def scale(*mats):
    return max(1.0, *(m.norm_inf() for m in mats))


@settings(max_examples=200, deadline=None)
@given(sym_matrices(), st.data())
def test_eigh_matches_lapack(A, data):
    spec = eigh(A)
    np.testing.assert_allclose(spec.eigenvalues, np.linalg.eigvalsh(A.array), atol=1e-10 * scale(A))
    np.testing.assert_allclose(spec.reconstruct(), A.array, atol=1e-10 * scale(A))


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_concave_and_homogeneous(data):
    A = data.draw(sym_matrices())
    B = data.draw(sym_matrices(A.n, A.n))
    p = data.draw(degrees(A.n))
    t = data.draw(st.floats(0, 5))
    tol = 1e-9 * scale(A, B)
    assert ordered_eigen_sum(A + B, p) >= ordered_eigen_sum(A, p) + ordered_eigen_sum(B, p) - tol
    assert abs(ordered_eigen_sum(A * t, p) - t * ordered_eigen_sum(A, p)) <= 1e-9 * (1 + t) * scale(A)


@settings(max_examples=200, deadline=None)
@given(sym_matrices(), st.integers(0, 2**32 - 1), st.data())
def test_orthogonal_invariance(A, seed, data):
    p = data.draw(degrees(A.n))
    Q = orthogonal(seed, A.n)
    B = SymMatrix(Q @ A.array @ Q.T)
    assert abs(ordered_eigen_sum(A, p) - ordered_eigen_sum(B, p)) <= 1e-9 * scale(A)


@settings(max_examples=200, deadline=None)
@given(sym_matrices(), st.data())
def test_cones_nest(A, data):
    p = data.draw(degrees(A.n))
    q = data.draw(st.floats(p, A.n))
    if is_p_positive(A, p).status != OUTSIDE:
        assert is_p_positive(A, q).status != OUTSIDE


@settings(max_examples=100, deadline=None)
@given(sym_matrices(2, 5), st.data())
def test_derivation_spectrum(A, data):
    p = data.draw(st.integers(1, A.n))
    lam = np.linalg.eigvalsh(A.array)
    sums = np.sort(subset_sums(lam, p))
    assert abs(derivation_min_eig(A, p) - sums[0]) <= 1e-8 * scale(A)
    assert abs(ordered_eigen_sum(A, p) - sums[0]) <= 1e-8 * scale(A)


@settings(max_examples=100, deadline=None)
@given(sym_matrices(3, 5), st.integers(0, 2**32 - 1), st.data())
def test_plane_trace_bound(A, seed, data):
    p = data.draw(st.integers(1, A.n))
    W = PlaneFrame.random(A.n, p, np.random.default_rng(seed))
    from pconvex.spectra import trace_on_plane

    assert trace_on_plane(A, W) >= ordered_eigen_sum(A, p) - 1e-9 * scale(A)


@settings(max_examples=100, deadline=None)
@given(st.integers(3, 5), st.integers(0, 2**32 - 1), st.data())
def test_classification_invariance(n, seed, data):
    p = data.draw(st.integers(2, n - 1))
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n)
    e /= np.linalg.norm(e)
    A = SymMatrix(np.eye(n) - p * np.outer(e, e))
    Q = orthogonal(seed + 1, n)
    assert classify_ray(A, p).label == classify_ray(SymMatrix(Q @ A.array @ Q.T), p).label


@settings(max_examples=200, deadline=None)
@given(arrays(float, 3, elements=st.floats(-3, 3)), st.floats(0, 0.2))
def test_parallel_monotone(kappas, delta):
    kappas = np.sort(kappas)
    prof = CurvatureProfile(np.zeros(4), kappas, PlaneFrame(np.eye(4)[:3]), np.eye(4)[3])
    a = parallel_curvatures(prof, delta).kappas
    b = parallel_curvatures(prof, delta + 0.05).kappas
    assert np.all(np.diff(a) >= 0)
    assert np.all(b >= a - 1e-15)
