import math

import numpy as np
import pytest

from pconvex.exceptions import DomainError
from pconvex.fields import fd_gradient, fd_hessian, riesz_field
from pconvex.pcone import OUTSIDE, is_p_positive
from pconvex.riesz import RieszKernel, p_harmonic_defect, riesz_gradient, riesz_hessian, riesz_value
from pconvex.spectra import SymMatrix


def random_points(rng, count, n, rmin=0.5, rmax=4.0):
    X = rng.standard_normal((count, n))
    return X * rng.uniform(rmin, rmax, (count, 1)) / np.linalg.norm(X, axis=1, keepdims=True)


class TestValues:
    def test_examples(self):
        assert riesz_value(RieszKernel(2, 2), [1, 0]) == 0.0
        assert riesz_value(RieszKernel(1, 2), [0, 3]) == pytest.approx(3)
        assert riesz_value(RieszKernel(3, 3), [0, 0, 2]) == pytest.approx(-0.5)

    def test_pole(self):
        k = RieszKernel(2, 3)
        for fn in (riesz_value, riesz_gradient, riesz_hessian):
            with pytest.raises(DomainError, match="pole"):
                fn(k, [0, 0, 0])

    def test_degree_range(self):
        with pytest.raises(ValueError):
            RieszKernel(4.5, 4)

    def test_log_branch_selection(self):
        assert RieszKernel(2 + 1e-13, 3).is_log
        assert not RieszKernel(2 + 1e-9, 3).is_log


class TestDerivatives:
    def test_hessian_examples(self):
        np.testing.assert_allclose(riesz_hessian(RieszKernel(2, 2), [1, 0]).array, np.diag([-1, 1]))
        np.testing.assert_allclose(riesz_hessian(RieszKernel(3, 3), [0, 0, 2]).array,
                                   np.diag([1, 1, -2]) / 8)
        np.testing.assert_allclose(riesz_hessian(RieszKernel(1, 2), [0, 1]).array, np.diag([1, 0]))

    def test_gradient_examples(self):
        np.testing.assert_allclose(riesz_gradient(RieszKernel(2, 2), [2, 0]), [0.5, 0])
        np.testing.assert_allclose(riesz_gradient(RieszKernel(1, 2), [0, 1]), [0, 1])
        np.testing.assert_allclose(riesz_gradient(RieszKernel(4, 4), [1, 0, 0, 0]), [2, 0, 0, 0])

    @pytest.mark.parametrize("p", [1, 1.5, 2, 2.5, 3, 4])
    def test_against_finite_differences(self, p):
        n = 4
        rng = np.random.default_rng(int(10 * p))
        k = RieszKernel(p, n)
        f = riesz_field(p, n)
        for x in random_points(rng, 250, n):
            H = riesz_hessian(k, x).array
            err = np.max(np.abs(H - fd_hessian(f, x).array))
            assert err <= 1e-5 * max(1.0, np.max(np.abs(H)))
            g = riesz_gradient(k, x)
            assert np.max(np.abs(g - fd_gradient(f, x))) <= 1e-6 * max(1.0, np.max(np.abs(g)))

    @pytest.mark.parametrize("p", [1, 1.5, 2.5, 3, 4])
    def test_scaling(self, p):
        rng = np.random.default_rng(1)
        k = RieszKernel(p, 4)
        x = random_points(rng, 1, 4)[0]
        t = 1.7
        np.testing.assert_allclose(riesz_hessian(k, t * x).array,
                                   t ** -p * riesz_hessian(k, x).array, rtol=1e-12, atol=1e-15)


class TestHarmonicity:
    @pytest.mark.parametrize("p", [1, 1.5, 2, 2.5, 3, 3.5, 4])
    def test_p_harmonic_and_sharp(self, p):
        n = 4
        k = RieszKernel(p, n)
        for x in random_points(np.random.default_rng(2), 100, n):
            H = riesz_hessian(k, x)
            assert abs(p_harmonic_defect(H, p)) <= 1e-9
            assert is_p_positive(H, p).status != OUTSIDE
            for q in np.arange(1.0, p - 0.24, 0.25):
                assert is_p_positive(H, q).status == OUTSIDE
            if p < n:
                assert p_harmonic_defect(H, min(n, p + 0.5)) > 0

    def test_zero(self):
        assert p_harmonic_defect(SymMatrix(np.zeros((3, 3))), 2) == 0.0

    def test_newtonian_is_harmonic(self):
        k = RieszKernel(3, 3)
        H = riesz_hessian(k, [0.3, -1.2, 0.8])
        assert p_harmonic_defect(H, 3) == pytest.approx(H.trace(), abs=1e-15)
        assert abs(H.trace()) < 1e-12 * math.e
