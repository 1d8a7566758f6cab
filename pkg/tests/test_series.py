import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hjb_planner import (
    ModelParams,
    build_kernel,
    eval_log_u,
    eval_u,
    eval_u_prime,
    expected_optimal_cost,
)
from hjb_planner.series import _series_sum, _x_of

# Brute-force partial sums of the coefficient formula at 40 decimal digits
# (mpmath), frozen; keys are (n_goods, sigma, r).
BRUTE_FORCE_U = {
    (2, 1.0, 1.0): 1.0634833707413235,
    (1, 0.5, 1.7): 87.3960767629235165,
    (4, 2.0, 3.0): 1.22469528069319178,
    (10, 1.0, 2.2): 1.58662215759626718,
    (100, 0.5, 2.0): 1.85937385199465741,
    (2, 5.0, 0.3): 1.00000081000016403,
}
BRUTE_FORCE_U_PRIME = {
    (2, 1.0, 1.0): 0.25789430539089632,
    (1, 0.5, 1.7): 566.490149268983459,
    (4, 2.0, 3.0): 0.318492918296665802,
    (10, 1.0, 2.2): 1.26374913749200548,
    (100, 0.5, 2.0): 2.2804739278253747,
    (2, 5.0, 0.3): 1.08000043740005893e-5,
}
LOG_U_20_N2_SIGMA_HALF = 795.738911950745019  # ln u(20), N=2, sigma=0.5
COST_N2_SIGMA1_R1 = 0.12309943837096261  # 2 ln u(1), N=2, sigma=1


class TestModelParams:
    def test_accepts_valid(self):
        p = ModelParams(n_goods=3, sigma=0.7, radius=2.5)
        assert p.alpha == 1.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_goods=0, sigma=1.0, radius=1.0),
            dict(n_goods=2, sigma=0.0, radius=1.0),
            dict(n_goods=2, sigma=-1.0, radius=1.0),
            dict(n_goods=2, sigma=1.0, radius=0.0),
            dict(n_goods=2, sigma=math.inf, radius=1.0),
            dict(n_goods=2, sigma=1.0, radius=1.0, alpha=2.0),
        ],
    )
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            ModelParams(**kwargs)


class TestBuildKernel:
    def test_first_coefficients_n2(self, std_kernel):
        # a_1 = 1/(N+2) = 1/4, a_2 = 1/(2!*4*8) = 1/64
        assert std_kernel.log_a[0] == 0.0
        assert math.exp(std_kernel.log_a[1]) == pytest.approx(0.25, rel=1e-14)
        assert math.exp(std_kernel.log_a[2]) == pytest.approx(1 / 64, rel=1e-14)

    def test_first_coefficients_n4(self):
        k = build_kernel(ModelParams(4, 1.0, 1.0))
        assert math.exp(k.log_a[1]) == pytest.approx(1 / 6, rel=1e-14)
        assert math.exp(k.log_a[2]) == pytest.approx(1 / 120, rel=1e-14)

    def test_log_recurrence_exact(self, std_kernel):
        n = std_kernel.params.n_goods
        for j in range(1, std_kernel.truncation_order + 1):
            expected = std_kernel.log_a[j - 1] - math.log(j) - math.log(n + 4 * j - 2)
            assert std_kernel.log_a[j] == expected

    def test_log_a_strictly_decreasing(self, wide_kernel):
        assert np.all(np.diff(wide_kernel.log_a) < 0.0)
        assert np.all(np.isfinite(wide_kernel.log_a))

    @pytest.mark.parametrize("n,sigma", [(1, 1.0), (2, 0.5), (10, 2.0)])
    def test_small_order_when_x_at_most_one(self, n, sigma):
        # x(r_max) = 1 decays factorially from the first term
        k = build_kernel(
            ModelParams(n, sigma, radius=1e-3), term_tol=1e-16, r_max=math.sqrt(2) * sigma
        )
        assert k.truncation_order <= 10

    def test_truncation_overflow_refused(self):
        with pytest.raises(ValueError, match="series truncation overflow"):
            build_kernel(ModelParams(2, 0.05, 1.0), r_max=10.0)

    def test_rejects_bad_tol_and_range(self, std_params):
        with pytest.raises(ValueError):
            build_kernel(std_params, term_tol=1.5)
        with pytest.raises(ValueError):
            build_kernel(std_params, r_max=0.5)  # below radius


class TestEvaluation:
    def test_origin_exact(self, std_kernel):
        assert eval_u(std_kernel, 0.0) == 1.0
        assert eval_u_prime(std_kernel, 0.0) == 0.0
        assert eval_log_u(std_kernel, 0.0) == 0.0

    @pytest.mark.parametrize("key,expected", sorted(BRUTE_FORCE_U.items()))
    def test_u_matches_brute_force(self, key, expected):
        n, sigma, r = key
        k = build_kernel(ModelParams(n, sigma, radius=r), r_max=r)
        assert eval_u(k, r) == pytest.approx(expected, rel=1e-13)

    @pytest.mark.parametrize("key,expected", sorted(BRUTE_FORCE_U_PRIME.items()))
    def test_u_prime_matches_brute_force(self, key, expected):
        n, sigma, r = key
        k = build_kernel(ModelParams(n, sigma, radius=r), r_max=r)
        assert eval_u_prime(k, r) == pytest.approx(expected, rel=5e-13)

    def test_log_path_beyond_double_range(self, wide_kernel):
        # u(20) ~ e^795 overflows; the log route must stay finite and sharp
        assert eval_u(wide_kernel, 20.0) == math.inf
        assert eval_log_u(wide_kernel, 20.0) == pytest.approx(
            LOG_U_20_N2_SIGMA_HALF, rel=1e-14
        )
        x = _x_of(wide_kernel, np.asarray([20.0]))[0]
        assert eval_log_u(wide_kernel, 20.0) <= x / 4  # growth bound, log form

    def test_log_and_linear_paths_agree(self, wide_kernel):
        # Horner vs log-sum-exp are independent summations for x <= 1
        grid = np.linspace(0.05, 15.0, 97)
        u = eval_u(wide_kernel, grid)
        log_u = eval_log_u(wide_kernel, grid)
        assert np.max(np.abs(np.exp(log_u) - u) / u) < 1e-13

    def test_alpha_is_a_plain_post_multiplier(self, std_kernel):
        for r in (0.0, 0.3, 1.0):
            x = _x_of(std_kernel, np.asarray([r]))
            assert eval_u(std_kernel, r) == std_kernel.params.alpha * float(
                _series_sum(std_kernel, x)[0]
            )

    def test_outside_certified_range(self, std_kernel):
        for bad in (1.0000001, -0.1, math.nan):
            with pytest.raises(ValueError):
                eval_u(std_kernel, bad)
            with pytest.raises(ValueError):
                eval_u_prime(std_kernel, bad)

    def test_vectorized_matches_scalar(self, std_kernel):
        grid = np.linspace(0.0, 1.0, 17)
        vec = eval_u(std_kernel, grid)
        assert vec.shape == grid.shape
        for r, v in zip(grid, vec):
            assert eval_u(std_kernel, float(r)) == v

    @given(r=st.floats(min_value=0.0, max_value=20.0))
    @settings(max_examples=200, deadline=None)
    def test_growth_bounds_hypothesis(self, wide_kernel, r):
        # log forms of the growth/slope bounds, slack 1e-12
        n = wide_kernel.params.n_goods
        sigma4 = wide_kernel.params.sigma**4
        x = r**4 / (4 * sigma4)
        assert eval_log_u(wide_kernel, r) <= x / (n + 2) + 1e-12
        if r > 0.0:
            up = eval_u_prime(wide_kernel, r)
            if math.isfinite(up) and up > 0.0:
                bound = 3 * math.log(r) - math.log(sigma4 * (n + 2)) + x / (n + 2)
                assert math.log(up) <= bound + 1e-12

    @given(
        lo=st.floats(min_value=0.0, max_value=14.0),
        span=st.floats(min_value=1e-3, max_value=3.0),
    )
    @settings(max_examples=150, deadline=None)
    def test_monotone_nondecreasing(self, wide_kernel, lo, span):
        hi = min(lo + span, 20.0)
        assert eval_u(wide_kernel, hi) >= eval_u(wide_kernel, lo)
        assert eval_u_prime(wide_kernel, hi) >= eval_u_prime(wide_kernel, lo)

    def test_convex_on_grid(self, std_kernel, wide_kernel):
        for kernel, hi in ((std_kernel, 1.0), (wide_kernel, 15.0)):
            grid = np.linspace(0.0, hi, 301)
            u = eval_u(kernel, grid)
            second = np.diff(u, 2)
            assert np.all(second >= -1e-12 * np.maximum(1.0, u[1:-1]))


class TestExpectedCost:
    def test_zero_at_boundary_exact(self, std_kernel):
        assert expected_optimal_cost(std_kernel, std_kernel.params.radius) == 0.0

    def test_from_origin(self, std_kernel):
        assert expected_optimal_cost(std_kernel, 0.0) == pytest.approx(
            COST_N2_SIGMA1_R1, rel=1e-13
        )

    def test_growth_bound_from_origin(self, std_kernel):
        p = std_kernel.params
        cap = p.radius**4 / (2 * p.sigma**2 * (p.n_goods + 2))
        assert 0.0 < expected_optimal_cost(std_kernel, 0.0) <= cap

    def test_decreasing_in_start_radius(self, std_kernel):
        grid = np.linspace(0.0, 1.0, 41)
        costs = expected_optimal_cost(std_kernel, grid)
        assert np.all(np.diff(costs) <= 0.0)
        assert np.all(costs >= 0.0)

    def test_start_beyond_boundary(self, std_kernel):
        with pytest.raises(ValueError, match="start beyond stopping boundary"):
            expected_optimal_cost(std_kernel, 1.2)
