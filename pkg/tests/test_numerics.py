import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmmpef.errors import NotPositiveDefiniteError, QuadratureError, ValidationError
from gmmpef.gmm import raw_moments
from gmmpef.numerics import (
    IllConditionedWarning,
    QuadratureSettings,
    hankel_from_moments,
    integrate,
    is_positive_definite,
    solve,
)

from conftest import small_gmm


class TestIntegrate:
    def test_square(self):
        assert integrate(lambda x: x**2, 0.0, 1.0) == pytest.approx(1 / 3, abs=1e-12)

    def test_normal_mass(self):
        f = lambda x: np.exp(-0.5 * x**2) / math.sqrt(2 * math.pi)  # noqa: E731
        assert integrate(f, -8.0, 8.0) == pytest.approx(1.0, abs=1e-10)

    def test_sine(self):
        assert integrate(np.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-10)

    def test_vector_valued(self):
        f = lambda x: np.stack([np.ones_like(x), x, x**2], axis=1)  # noqa: E731
        np.testing.assert_allclose(integrate(f, 0.0, 2.0), [2.0, 2.0, 8 / 3], atol=1e-12)

    def test_empty_interval(self):
        assert integrate(np.cos, 1.0, 1.0) == 0.0

    @pytest.mark.parametrize("a,b", [(0.0, -1.0), (0.0, np.inf)])
    def test_bad_limits(self, a, b):
        with pytest.raises(ValidationError):
            integrate(np.cos, a, b)

    def test_depth_exhaustion_carries_estimate(self):
        s = QuadratureSettings(abs_tol=1e-14, max_depth=2, rel_tol=1e-16, initial_panels=1)
        with pytest.raises(QuadratureError) as info:
            integrate(lambda x: np.sqrt(np.abs(x)), 0.0, 1.0, s)
        assert info.value.estimate == pytest.approx(2 / 3, abs=1e-2)
        assert info.value.error > 0

    def test_narrow_peak_found_through_breakpoints(self):
        f = lambda x: np.exp(-0.5 * ((x - 0.3137) / 1e-3) ** 2)  # noqa: E731
        s = QuadratureSettings(initial_panels=4)
        got = integrate(f, -1.0, 1.0, s, breakpoints=[0.3137])
        assert got == pytest.approx(1e-3 * math.sqrt(2 * math.pi), rel=1e-8)

    @given(st.floats(-3, 3), st.floats(0.1, 3), st.floats(0.05, 0.95))
    @settings(max_examples=40, deadline=None)
    def test_additive_over_splits(self, a, width, frac):
        f = lambda x: np.exp(np.sin(3 * x)) * (1 + x**2)  # noqa: E731
        b = a + width
        c = a + frac * width
        s = QuadratureSettings()
        whole = integrate(f, a, b, s)
        assert integrate(f, a, c, s) + integrate(f, c, b, s) == pytest.approx(whole, abs=2 * s.abs_tol + 1e-12 * abs(whole))


class TestHankel:
    def test_identity_layout(self):
        np.testing.assert_array_equal(hankel_from_moments([1, 0, 1]).dense(), np.eye(2))

    def test_corner_moment(self):
        H = hankel_from_moments([1, 0, 1, 0, 3]).dense()
        np.testing.assert_array_equal(H, [[1, 0, 1], [0, 1, 0], [1, 0, 3]])

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=9).filter(lambda v: len(v) % 2 == 1))
    def test_structure(self, coeffs):
        H = hankel_from_moments(coeffs).dense()
        assert np.array_equal(H, H.T)
        n = H.shape[0]
        for i in range(n - 1):
            for j in range(1, n):
                assert H[i, j] == H[i + 1, j - 1]

    def test_even_length_rejected(self):
        with pytest.raises(ValidationError):
            hankel_from_moments([1, 0, 1, 0])


class TestSolve:
    def test_identity(self):
        sol = solve(hankel_from_moments([1, 0, 1]), [3, 7])
        np.testing.assert_allclose(sol.x, [3, 7])
        assert sol.method == "dense"

    def test_two_by_two_by_hand(self):
        np.testing.assert_allclose(solve(hankel_from_moments([1, 1, 2]), [1, 1]).x, [1, 0], atol=1e-14)

    @pytest.mark.parametrize("method", ["dense", "levinson"])
    @pytest.mark.parametrize("d", range(2, 9))
    def test_random_moment_systems_match_lu(self, rng, d, method):
        for _ in range(15):
            m = small_gmm(rng, rng.integers(1, 4), spread=1.0)
            H = hankel_from_moments(raw_moments(m, 2 * d))
            b = rng.normal(size=d + 1)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", IllConditionedWarning)
                sol = solve(H, b, method=method)
            A = H.dense()
            assert np.max(np.abs(A @ sol.x - b)) <= 1e-9 * (1 + np.max(np.abs(b)))
            if sol.condition < 1e8:
                np.testing.assert_allclose(sol.x, np.linalg.solve(A, b), rtol=1e-6, atol=1e-9)

    def test_levinson_agrees_with_dense(self, rng):
        for _ in range(20):
            H = hankel_from_moments(raw_moments(small_gmm(rng, 2, 1.0), 6))
            b = rng.normal(size=4)
            x_l = solve(H, b, method="levinson").x
            x_d = solve(H, b).x
            np.testing.assert_allclose(x_l, x_d, rtol=1e-8, atol=1e-10)

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefiniteError, match="moment matrix not positive definite"):
            solve(hankel_from_moments([1, 1, 1]), [1, 1])

    def test_ill_conditioned_warning(self):
        # a nearly degenerate distribution: variance 1e-15 around mean 1
        H = hankel_from_moments([1.0, 1.0, 1.0 + 1e-15])
        with pytest.warns(IllConditionedWarning):
            sol = solve(H, [1.0, 0.0])
        assert sol.warnings

    def test_unknown_method(self):
        with pytest.raises(ValidationError):
            solve(hankel_from_moments([1, 0, 1]), [1, 1], method="qr")


class TestPositiveDefinite:
    def test_standard_normal(self):
        assert is_positive_definite(hankel_from_moments([1, 0, 1]))

    def test_degenerate(self):
        assert not is_positive_definite(hankel_from_moments([1, 1, 1]))

    def test_random_mixture_moments(self, rng):
        for _ in range(20):
            H = hankel_from_moments(raw_moments(small_gmm(rng, 3, 1.0), 8))
            assert np.all(np.linalg.eigvalsh(H.dense()) > 0)
            assert is_positive_definite(H)
