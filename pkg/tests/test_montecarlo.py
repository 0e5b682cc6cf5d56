import math

import pytest

from core.exception import InfeasibleConfig, PreconditionViolated
from core.form import DiffusionSpec
from core.measure import INF, Interval, RadonMeasure
from core.montecarlo import (
    SimConfig,
    Terminal,
    binomial_halfwidth,
    build_walk,
    estimate_exit_time,
    estimate_hitting,
    estimate_survival,
    hitting_probability,
    simulate_path,
    simulate_paths,
    survival_walk,
)
from core.scale import ScaleFunction


def coarse(seed: int = 7) -> SimConfig:
    return SimConfig(seed=seed, step_h=1 / 16, max_steps=10 ** 6, block_size=512, workers=1)


def killed(spec: DiffusionSpec, density: float) -> DiffusionSpec:
    lo, hi = spec.interval.lo, spec.interval.hi
    return DiffusionSpec(spec.interval, spec.s, spec.m, RadonMeasure.lebesgue(lo, hi, density), spec.name)


class TestSimConfig:
    def test_step_must_be_positive(self):
        with pytest.raises(InfeasibleConfig):
            SimConfig(seed=1, step_h=0.0)

    def test_counts_must_be_positive(self):
        with pytest.raises(InfeasibleConfig):
            SimConfig(seed=1, step_h=0.1, block_size=0)

    def test_step_wider_than_the_window(self, brownian_01_spec):
        cfg = SimConfig(seed=1, step_h=1.5, max_steps=100, block_size=10, workers=1)
        with pytest.raises(InfeasibleConfig):
            simulate_path(brownian_01_spec, 0.5, 0.0, 1.0, cfg)


class TestWalk:
    def test_grid_holds_the_start(self, cantor_spec):
        walk = build_walk(cantor_spec, 0.0, 1 / 3, 1.0, coarse(), False, False)
        assert walk.start / walk.size == pytest.approx(5 / 12)
        assert not walk.snapped
        assert walk.points[0] == 0.0 and walk.points[-1] == 1.0

    def test_brownian_increments(self, sim_config, brownian_01_spec):
        walk = build_walk(brownian_01_spec, 0.0, 0.5, 1.0, sim_config, False, False)
        h = walk.h
        assert walk.time_increments[5] == pytest.approx(h * h)
        assert walk.time_increments[0] == 0.0
        assert not walk.killing_increments.any()

    def test_survival_walk_reflects_included_ends(self, sim_config, brownian_01_spec):
        walk = survival_walk(brownian_01_spec, 0.5, sim_config)
        assert walk.reflect_left and walk.reflect_right

    def test_survival_walk_cuts_the_line(self, sim_config, brownian_line_spec):
        walk = survival_walk(brownian_line_spec, 0.0, sim_config)
        assert walk.reflect_left and walk.reflect_right
        assert walk.start == walk.size // 2

    def test_block_runs_past_the_absorbing_end(self, brownian_01_spec):
        # four cells from the middle node: every path ends on an edge after an even number of steps
        cfg = SimConfig(seed=3, step_h=0.25, max_steps=10 ** 5, block_size=4096, workers=1)
        results = simulate_paths(brownian_01_spec, 0.5, 0.0, 1.0, 100, cfg)
        assert all(result.terminal in (Terminal.HIT_LEFT, Terminal.HIT_RIGHT) for result in results)
        assert all(result.steps >= 2 and result.steps % 2 == 0 for result in results)
        assert all(result.lifetime == pytest.approx(result.steps / 16) for result in results)


class TestHitting:
    """
    P^x(T_b < T_a) against (s(x) - s(a))/(s(b) - s(a)).
    """
    def test_formula(self, cantor_spec):
        assert hitting_probability(cantor_spec, 0.0, 1 / 3, 1.0).value == pytest.approx(5 / 12, abs=1e-8)

    @pytest.mark.slow
    def test_brownian_line(self, sim_config, brownian_line_spec):
        estimate = estimate_hitting(brownian_line_spec, 0.0, 0.25, 1.0, 2000, sim_config)
        sigma = math.sqrt(0.25 * 0.75 / 2000)
        assert estimate.formula_p == pytest.approx(0.25)
        assert abs(estimate.p_hat - 0.25) <= 4 * sigma
        assert estimate.censored_fraction == 0.0

    @pytest.mark.slow
    def test_cantor_scale(self, cantor_spec):
        estimate = estimate_hitting(cantor_spec, 0.0, 1 / 3, 1.0, 2000, coarse())
        p = 5 / 12
        assert abs(estimate.p_hat - p) <= 4 * math.sqrt(p * (1 - p) / 2000)
        row = estimate.as_row()
        assert row["spec_id"] == "cantor_scale"
        assert set(row) == {"spec_id", "a", "x", "b", "n", "p_hat", "ci", "formula_p", "pass"}

    @pytest.mark.slow
    def test_rational_windows(self, windows_spec):
        # (0.75, 1.25) is the first window, where s grows at unit rate
        estimate = estimate_hitting(windows_spec, 0.75, 0.875, 1.25, 20000, coarse())
        assert estimate.formula_p == pytest.approx(0.25, abs=1e-8)
        assert not estimate.snapped
        assert abs(estimate.p_hat - 0.25) <= 4 * math.sqrt(0.25 * 0.75 / 20000)

    def test_deterministic(self, brownian_01_spec):
        first = simulate_paths(brownian_01_spec, 0.5, 0.0, 1.0, 50, coarse(3))
        second = simulate_paths(brownian_01_spec, 0.5, 0.0, 1.0, 50, coarse(3))
        assert first == second

    def test_no_killing_no_killed_paths(self, brownian_line_spec):
        results = simulate_paths(brownian_line_spec, 0.5, 0.0, 1.0, 200, coarse())
        assert all(result.terminal is not Terminal.KILLED for result in results)

    def test_start_on_the_edge(self, brownian_line_spec):
        result = simulate_path(brownian_line_spec, 0.0, 0.0, 1.0, coarse())
        assert result.terminal is Terminal.HIT_LEFT
        assert result.lifetime == 0.0

    def test_window_must_sit_in_the_interval(self, brownian_01_spec):
        with pytest.raises(PreconditionViolated):
            estimate_hitting(brownian_01_spec, 0.0, 0.5, 2.0, 10, coarse())
        with pytest.raises(PreconditionViolated):
            estimate_hitting(brownian_01_spec, 0.5, 0.2, 1.0, 10, coarse())

    def test_binomial_halfwidth(self):
        assert binomial_halfwidth(0.5, 100, 0.95) == pytest.approx(1.959964 * 0.05, rel=1e-5)
        assert binomial_halfwidth(0.0, 100) == 0.0


class TestExitTime:
    @pytest.mark.slow
    def test_brownian(self, sim_config, brownian_01_spec):
        estimate = estimate_exit_time(brownian_01_spec, 0.0, 0.5, 1.0, 500, sim_config)
        assert abs(estimate.mean - 0.25) <= 4 * estimate.stderr + 0.01
        assert estimate.as_row()["n"] == 500

    @pytest.mark.slow
    def test_fine_grid(self, brownian_01_spec):
        cfg = SimConfig(seed=31, step_h=1 / 256, max_steps=10 ** 7, block_size=4096, workers=1)
        estimate = estimate_exit_time(brownian_01_spec, 0.0, 0.5, 1.0, 20000, cfg)
        assert abs(estimate.mean - 0.25) <= 0.02 * 0.25 + 3 * estimate.stderr
        assert not estimate.flagged


class TestSurvival:
    """
    Killing and absorption before a model-time horizon.
    """
    def test_no_killing_on_a_closed_interval(self, brownian_01_spec):
        estimate = estimate_survival(brownian_01_spec, 0.5, 0.5, 100, coarse())
        assert estimate.fraction == 1.0
        assert estimate.killed == 0 and estimate.absorbed == 0

    def test_constant_killing_rate(self, brownian_01_spec):
        estimate = estimate_survival(killed(brownian_01_spec, 1.0), 0.5, 0.5, 1000, coarse())
        assert estimate.fraction == pytest.approx(math.exp(-0.5), abs=0.06)

    def test_more_killing_never_helps(self, brownian_01_spec):
        light = estimate_survival(killed(brownian_01_spec, 1.0), 0.5, 0.5, 200, coarse(11))
        heavy = estimate_survival(killed(brownian_01_spec, 2.0), 0.5, 0.5, 200, coarse(11))
        assert heavy.fraction <= light.fraction
        assert heavy.killed >= light.killed

    def test_half_line_absorbs_at_zero(self):
        interval = Interval.open(0.0, INF)
        spec = DiffusionSpec(interval, ScaleFunction.identity(interval), RadonMeasure.lebesgue(0.0, INF))
        estimate = estimate_survival(spec, 1.0, 1.0, 1000, coarse())
        # P(T_0 > 1) = 2Φ(1) - 1
        assert estimate.fraction == pytest.approx(0.6827, abs=0.07)
        assert estimate.absorbed > 0
        assert estimate.killed == 0

    def test_horizon_must_be_positive(self, brownian_01_spec):
        with pytest.raises(PreconditionViolated):
            estimate_survival(brownian_01_spec, 0.5, 0.0, 10, coarse())

    @pytest.mark.slow
    def test_rational_windows_leave_through_infinity(self, windows_spec):
        estimate = estimate_survival(windows_spec, 1.0, 50.0, 10000, coarse())
        assert estimate.fraction < 0.99
        assert estimate.absorbed > 0
        assert not estimate.flagged

    def test_censored_paths_do_not_count_as_alive(self, brownian_01_spec):
        # 64 steps of h² = 1/256 never reach the horizon, so only killed paths finish
        cfg = SimConfig(seed=5, step_h=1 / 16, max_steps=64, block_size=512, workers=1)
        estimate = estimate_survival(killed(brownian_01_spec, 1.0), 0.5, 1.0, 200, cfg)
        assert estimate.censored > 0 and estimate.killed > 0
        assert estimate.killed + estimate.censored == 200
        assert estimate.fraction == 0.0
        assert estimate.flagged
        assert estimate.censored_fraction == pytest.approx(estimate.censored / 200)
