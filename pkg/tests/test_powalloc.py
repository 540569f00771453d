"""Power allocation: gamma factors, layered powers, group-count choice.

The layered-power algebra has two independent closed forms for total
power; several tests deliberately compare them rather than sharing one
implementation.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uraspread import (
    AlphaCurve,
    AllocationResult,
    CalibrationError,
    InfeasibleGroupError,
    SystemParams,
    brute_force_best_partition,
    calibrate_alpha_min,
    gamma,
    group_count_objective,
    hessian_check,
    min_group_power,
    optimize_group_count,
    power_levels,
    total_power,
)


def random_feasible_instance(rng):
    """Constant-alpha instance whose largest group stays feasible."""
    m = int(rng.integers(1, 7))
    sizes = rng.integers(1, 31, size=m)
    alpha = rng.uniform(0.001, 0.9 / max(sizes.max() - 1, 1))
    return sizes.tolist(), AlphaCurve.constant(alpha), alpha


class TestAlphaCurve:
    def test_interpolation_and_clamping(self):
        curve = AlphaCurve((1.0, 3.0), (0.2, 0.4))
        assert curve(2.0) == pytest.approx(0.3)
        assert curve(0.5) == 0.2  # clamped low
        assert curve(10.0) == 0.4  # clamped high

    def test_csv_round_trip(self, tmp_path):
        curve = AlphaCurve((1.0, 8.0, 64.0), (0.31, 0.11, 0.03))
        path = tmp_path / "alpha.csv"
        curve.to_csv(path)
        assert path.read_text().splitlines()[0] == "K,alpha_min"
        back = AlphaCurve.from_csv(path)
        assert back.k_values == curve.k_values
        assert back.alpha_values == curve.alpha_values

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "alpha.csv"
        path.write_text("k,alpha\n1,0.1\n")
        with pytest.raises(ValueError):
            AlphaCurve.from_csv(path)

    def test_validation(self):
        with pytest.raises(ValueError):
            AlphaCurve((3.0, 1.0), (0.1, 0.1))
        with pytest.raises(ValueError):
            AlphaCurve((1.0, 2.0), (0.0, 0.5))
        with pytest.raises(ValueError):
            AlphaCurve((), ())


class TestAllocationResult:
    def test_json_round_trip(self):
        res = AllocationResult(m=2, k=(10, 10), p=(0.1, 0.2), p_t=3.0)
        back = AllocationResult.from_json(res.to_json())
        assert back == res

    def test_infeasible_marker(self):
        res = AllocationResult.infeasible()
        assert not res.feasible and res.p_t is None
        assert AllocationResult.from_json(res.to_json()) == res


class TestGamma:
    def test_single_user_is_alpha(self):
        assert gamma(1, AlphaCurve.constant(0.37)) == pytest.approx(0.37)

    def test_arithmetic_point(self):
        assert gamma(51, AlphaCurve.constant(0.01)) == pytest.approx(0.02)

    def test_boundary_infeasible(self):
        with pytest.raises(InfeasibleGroupError):
            gamma(11, AlphaCurve.constant(0.1))

    def test_rejects_fractional_below_one(self):
        with pytest.raises(ValueError):
            gamma(0.5, AlphaCurve.constant(0.1))


class TestMinGroupPower:
    def test_single_user_unit_noise(self):
        assert min_group_power(1, 1.0, AlphaCurve.constant(0.21)) == pytest.approx(0.21)

    def test_arithmetic_point(self):
        got = min_group_power(2, 1.0, AlphaCurve.constant(0.1))
        assert got == pytest.approx(0.1 / 0.9)

    def test_linear_in_variance(self):
        curve = AlphaCurve.constant(0.05)
        assert min_group_power(4, 2.0, curve) == pytest.approx(
            2 * min_group_power(4, 1.0, curve), rel=1e-12
        )

    @given(k=st.integers(1, 15), sigma2=st.floats(1.0, 50.0))
    @settings(max_examples=60, deadline=None)
    def test_sinr_target_met_with_equality(self, k, sigma2):
        alpha = 0.05
        p = min_group_power(k, sigma2, AlphaCurve.constant(alpha))
        sinr = p / (sigma2 + (k - 1) * p)
        assert sinr == pytest.approx(alpha, rel=1e-12)


class TestPowerLevels:
    def test_single_group(self):
        res = power_levels([7], AlphaCurve.constant(0.05))
        g = 0.05 / (1 - 6 * 0.05)
        assert res.p[0] == pytest.approx(g, rel=1e-12)
        assert res.p_t == pytest.approx(7 * g, rel=1e-12)

    def test_two_group_worked_example(self):
        res = power_levels((10, 10), AlphaCurve.constant(0.05))
        assert res.p[0] == pytest.approx(0.090909, abs=5e-7)
        assert res.p[1] == pytest.approx(0.173554, abs=5e-7)
        assert res.p_t == pytest.approx(2.64463, abs=5e-6)
        g = 0.05 / (1 - 9 * 0.05)
        assert res.p_t == pytest.approx((1 + 10 * g) ** 2 - 1, rel=1e-12)

    def test_levels_strictly_increase_for_equal_groups(self):
        res = power_levels([5, 5, 5, 5], AlphaCurve.constant(0.02))
        assert all(a < b for a, b in zip(res.p, res.p[1:]))

    def test_infeasible_group_raises(self):
        with pytest.raises(InfeasibleGroupError):
            power_levels([30, 5], AlphaCurve.constant(0.05))

    def test_sum_and_product_forms_agree(self):
        # 1000 random instances; the two closed forms are independent
        rng = np.random.default_rng(99)
        for _ in range(1000):
            sizes, curve, _ = random_feasible_instance(rng)
            res = power_levels(sizes, curve)
            assert res.p_t == pytest.approx(
                float(np.dot(sizes, res.p)), rel=1e-9
            )
            assert res.p_t == pytest.approx(total_power(sizes, curve), rel=1e-9)

    def test_realized_sinr_is_alpha_min(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            sizes, curve, alpha = random_feasible_instance(rng)
            res = power_levels(sizes, curve)
            noise = 1.0
            for k, p in zip(sizes, res.p):
                sinr = p / (noise + (k - 1) * p)
                assert sinr == pytest.approx(alpha, rel=1e-12)
                noise += k * p


class TestTotalPower:
    def test_single_group(self):
        curve = AlphaCurve.constant(0.02)
        assert total_power([10], curve) == pytest.approx(10 * gamma(10, curve), rel=1e-12)

    def test_half_gamma_pairs(self):
        # alpha = 1/3 makes gamma(2) = 0.5, so (1+1)(1+1)-1 = 3
        curve = AlphaCurve.constant(1 / 3)
        assert gamma(2, curve) == pytest.approx(0.5, rel=1e-12)
        assert total_power([2, 2], curve) == pytest.approx(3.0, rel=1e-12)


class TestBruteForcePartition:
    def test_twelve_into_three(self):
        assert brute_force_best_partition(12, 3, AlphaCurve.constant(0.05)) == (4, 4, 4)

    def test_two_into_two(self):
        assert brute_force_best_partition(2, 2, AlphaCurve.constant(0.05)) == (1, 1)

    def test_thirteen_into_three(self):
        got = brute_force_best_partition(13, 3, AlphaCurve.constant(0.05))
        assert sorted(got) == [4, 4, 5]

    def test_instance_size_guard(self):
        with pytest.raises(ValueError):
            brute_force_best_partition(41, 3, AlphaCurve.constant(0.01))
        with pytest.raises(ValueError):
            brute_force_best_partition(20, 5, AlphaCurve.constant(0.01))

    def test_deterministic_lexicographic_tie_break(self):
        a = brute_force_best_partition(9, 2, AlphaCurve.constant(0.03))
        b = brute_force_best_partition(9, 2, AlphaCurve.constant(0.03))
        assert a == b

    @given(k_a=st.integers(2, 24), m=st.integers(1, 3))
    @settings(max_examples=30, deadline=None)
    def test_balanced_within_one(self, k_a, m):
        if m > k_a:
            return
        got = brute_force_best_partition(k_a, m, AlphaCurve.constant(0.01))
        assert max(got) - min(got) <= 1
        assert sum(got) == k_a


class TestHessianCheck:
    def test_positive_on_feasible_instances(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            sizes, curve, _ = random_feasible_instance(rng)
            ok, entries = hessian_check(sizes, curve)
            assert ok and (entries > 0).all()

    def test_symmetry(self):
        _, entries = hessian_check((10, 10), AlphaCurve.constant(0.05))
        assert entries[0] == pytest.approx(entries[1], rel=1e-12)

    def test_matches_finite_differences(self):
        # independent J: product of (1 + K gamma(K)) with continuous K
        alpha = 0.04
        sizes = [6.0, 11.0, 3.0]

        def j(k_vec):
            out = 1.0
            for k in k_vec:
                g = alpha / (1 - (k - 1) * alpha)
                out *= 1 + k * g
            return out

        _, entries = hessian_check([int(s) for s in sizes], AlphaCurve.constant(alpha))
        h = 1e-4
        for idx in range(3):
            up = list(sizes)
            dn = list(sizes)
            up[idx] += h
            dn[idx] -= h
            fd = (j(up) - 2 * j(sizes) + j(dn)) / h**2
            assert entries[idx] == pytest.approx(fd, rel=1e-4)


class TestGroupCountChoice:
    def test_constant_gamma_prefers_one_group(self):
        # force gamma (not alpha) constant: alpha(K) = g / (1 + (K-1) g)
        g = 0.02
        ks = np.arange(1.0, 201.0)
        curve = AlphaCurve(tuple(ks), tuple(g / (1.0 + (ks - 1.0) * g)))
        res = optimize_group_count(100, curve, 20)
        assert res.m == 1

    def test_fixed_reference_reading_prefers_fewest_feasible(self):
        res = optimize_group_count(100, AlphaCurve.constant(0.05), 10, k_ref=5.0)
        assert res.m == 5  # m < 5 cannot realize its groups at alpha 0.05

    def test_worked_example_hundred_users(self):
        res = optimize_group_count(100, AlphaCurve.constant(0.05), 10)
        assert res.m == 10
        assert res.k == (10,) * 10
        obj = group_count_objective(100, 10, AlphaCurve.constant(0.05))
        assert obj == pytest.approx(643, abs=1)

    def test_returned_minimum_is_exhaustive(self):
        curve = AlphaCurve.constant(0.05)
        res = optimize_group_count(100, curve, 10)
        objs = []
        for m in range(1, 11):
            try:
                objs.append(group_count_objective(100, m, curve))
            except InfeasibleGroupError:
                continue
        assert group_count_objective(100, res.m, curve) == min(objs)

    def test_steep_curve_prefers_single_group(self):
        # alpha_min dropping like 1/K keeps one big group cheapest
        ks = np.arange(1.0, 41.0)
        curve = AlphaCurve(tuple(ks), tuple(0.4 / ks))
        res = optimize_group_count(10, curve, 4)
        assert res.m == 1

    def test_no_feasible_count_raises(self):
        with pytest.raises(InfeasibleGroupError):
            optimize_group_count(100, AlphaCurve.constant(0.05), 4)

    def test_remainder_goes_to_lowest_groups(self):
        res = optimize_group_count(11, AlphaCurve.constant(0.05), 2)
        assert res.m == 2 and res.k == (6, 5)


class TestCalibration:
    def desk(self, k_0):
        return SystemParams(k_a=k_0, b=30, n_s=32, n_c=128, list_size=16, b_s=8)

    def test_vacuous_target_returns_bracket_floor(self):
        alpha = calibrate_alpha_min(1, self.desk(1), eps=1.0, trials=2)
        assert alpha == pytest.approx(1e-4 / (1 + 0 * 1e-4), rel=1e-12)

    def test_vacuous_target_two_users(self):
        alpha = calibrate_alpha_min(2, self.desk(2), eps=1.0, trials=2)
        assert alpha == pytest.approx(1e-4 / (1 + 1e-4), rel=1e-12)

    def test_self_consistency_light(self):
        from uraspread import PowerProfile, estimate_pupe

        params = self.desk(1)
        alpha = calibrate_alpha_min(1, params, eps=0.5, trials=10, seed=3)
        power = alpha / (1 - 0 * alpha)  # K_0 = 1: P = alpha back out
        profile = PowerProfile(group_sizes=(256,), power_levels=(power,))
        est = estimate_pupe(params, profile, trials=50, seed=11)
        assert est.pupe <= 0.5 + 3 * max(est.ci95 / 1.96, 0.05)

    def test_monotone_in_target(self):
        params = self.desk(1)
        ladder = [
            calibrate_alpha_min(1, params, eps=e, trials=6, seed=7)
            for e in (0.34, 0.67, 1.0)
        ]
        assert ladder[0] >= ladder[1] >= ladder[2]

    def test_unreachable_target_raises(self):
        params = self.desk(1)
        with pytest.raises(CalibrationError):
            # bracket capped below any decodable power
            calibrate_alpha_min(1, params, eps=0.05, trials=2, bracket=(1e-4, 1e-3))

    def test_invalid_target_rejected(self):
        with pytest.raises(ValueError):
            calibrate_alpha_min(1, self.desk(1), eps=-0.1, trials=2)
