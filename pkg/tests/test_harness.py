"""Monte Carlo orchestration: trials, PUPE estimation, power search."""

import math

import numpy as np
import pytest

from uraspread import (
    BracketError,
    PowerProfile,
    estimate_pupe,
    find_min_ebno,
    profile_ebno_db,
    run_trial,
    scale_for_ebno_db,
    trial_seed,
)

MID_SCALE = 0.04  # desk-scale waterfall midpoint: pupe near one half


class TestRunTrial:
    def test_noiseless_high_power_decodes_all(self, desk_params, desk_profile):
        out = run_trial(desk_params, desk_profile, seed=0, noise_on=False)
        assert out.missed == 0
        assert set(out.transmitted) == set(out.recovered)
        assert out.false_positives == ()

    def test_zero_power_misses_everything(self, desk_params, desk_profile):
        out = run_trial(desk_params, desk_profile, power_scale=0.0, seed=1)
        assert out.missed == desk_params.k_a
        assert not out.recovered

    def test_same_seed_bit_identical(self, desk_params, desk_profile):
        a = run_trial(desk_params, desk_profile, power_scale=MID_SCALE, seed=9)
        b = run_trial(desk_params, desk_profile, power_scale=MID_SCALE, seed=9)
        assert a == b

    def test_outcome_invariants(self, desk_params, desk_profile):
        for seed in range(8):
            out = run_trial(desk_params, desk_profile, power_scale=MID_SCALE, seed=seed)
            assert 0 <= out.missed <= desk_params.k_a
            assert len(out.recovered) <= desk_params.k_a
            assert len(out.transmitted) == desk_params.k_a
            assert out.iterations >= 1

    def test_ebno_point_matches_scale(self, desk_params, desk_profile):
        scale = scale_for_ebno_db(desk_params, desk_profile, 6.0)
        via_scale = run_trial(desk_params, desk_profile, power_scale=scale, seed=4)
        via_ebno = run_trial(desk_params, desk_profile, ebno_db=6.0, seed=4)
        assert via_scale == via_ebno

    def test_negative_power_rejected(self, desk_params, desk_profile):
        with pytest.raises(ValueError):
            run_trial(desk_params, desk_profile, power_scale=-1.0)


class TestSeeds:
    def test_trial_seed_reproducible_in_isolation(self):
        a = np.random.default_rng(trial_seed(5, 3)).integers(0, 1 << 30, size=4)
        b = np.random.default_rng(trial_seed(5, 3)).integers(0, 1 << 30, size=4)
        assert np.array_equal(a, b)

    def test_trial_seeds_distinct(self):
        streams = {
            tuple(np.random.default_rng(trial_seed(5, t)).integers(0, 1 << 30, size=4))
            for t in range(16)
        }
        assert len(streams) == 16


class TestEstimatePupe:
    def test_all_missed_gives_one_with_zero_width(self, desk_params, desk_profile):
        est = estimate_pupe(desk_params, desk_profile, power_scale=0.0, trials=6)
        assert est.pupe == 1.0 and est.ci95 == 0.0

    def test_noiseless_gives_zero(self, desk_params, desk_profile):
        est = estimate_pupe(
            desk_params, desk_profile, trials=5, seed=2, noise_on=False
        )
        assert est.pupe == 0.0 and est.ci95 == 0.0

    def test_deterministic_per_seed(self, desk_params, desk_profile):
        a = estimate_pupe(desk_params, desk_profile, power_scale=MID_SCALE, trials=10, seed=3)
        b = estimate_pupe(desk_params, desk_profile, power_scale=MID_SCALE, trials=10, seed=3)
        assert a == b

    def test_single_trial_has_no_width(self, desk_params, desk_profile):
        est = estimate_pupe(desk_params, desk_profile, power_scale=MID_SCALE, trials=1)
        assert est.ci95 == 0.0

    def test_ci_shrinks_like_root_two(self, desk_params, desk_profile):
        small = estimate_pupe(
            desk_params, desk_profile, power_scale=MID_SCALE, trials=30, seed=8
        )
        big = estimate_pupe(
            desk_params, desk_profile, power_scale=MID_SCALE, trials=60, seed=8
        )
        assert small.ci95 > 0
        ratio = big.ci95 / small.ci95
        # same seed ladder: the first half of the big run is the small run
        assert 0.5 <= ratio <= 0.95

    def test_trial_count_validated(self, desk_params, desk_profile):
        with pytest.raises(ValueError):
            estimate_pupe(desk_params, desk_profile, trials=0)


class TestFindMinEbno:
    def test_vacuous_target_returns_bracket_floor(self, desk_params, desk_profile):
        got = find_min_ebno(desk_params, desk_profile, eps=1.0, trials=2, seed=3)
        floor = profile_ebno_db(desk_params, desk_profile, 2.0**-20)
        assert got == pytest.approx(floor, rel=1e-12)

    def test_unreachable_target_raises(self, desk_params, desk_profile):
        weak = desk_profile.scaled(1e-4)
        with pytest.raises(BracketError):
            find_min_ebno(
                desk_params,
                weak,
                eps=0.01,
                trials=4,
                seed=5,
                scale_limits=(0.25, 4.0),
            )

    def test_found_point_meets_target(self, desk_params, desk_profile):
        eps, trials = 0.25, 20
        ebno = find_min_ebno(
            desk_params, desk_profile, eps=eps, trials=trials, seed=6, tol_db=0.5
        )
        assert math.isfinite(ebno)
        scale = scale_for_ebno_db(desk_params, desk_profile, ebno)
        est = estimate_pupe(
            desk_params, desk_profile, power_scale=scale, trials=trials, seed=6
        )
        assert est.pupe <= eps

    def test_accepts_builder_callable(self, desk_params, desk_profile):
        calls = []

        def builder(scale):
            calls.append(scale)
            return desk_profile.scaled(scale)

        find_min_ebno(desk_params, builder, eps=1.0, trials=2, seed=3)
        assert calls  # the search drove the builder


class TestEbnoAccounting:
    def test_scale_round_trips_through_db(self, desk_params, desk_profile):
        for target in (-3.0, 0.0, 6.0):
            scale = scale_for_ebno_db(desk_params, desk_profile, target)
            assert profile_ebno_db(desk_params, desk_profile, scale) == pytest.approx(
                target, abs=1e-12
            )

    def test_average_power_linear_in_scale(self, desk_params, desk_profile):
        base = profile_ebno_db(desk_params, desk_profile, 1.0)
        assert profile_ebno_db(desk_params, desk_profile, 2.0) == pytest.approx(
            base + 10 * math.log10(2.0), abs=1e-12
        )
