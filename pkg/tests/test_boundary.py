import math

import pytest
from hypothesis import given, settings, strategies as st

from core.boundary import (
    BoundaryClass,
    boundary_class,
    boundary_report,
    classify,
    dissipativity_bound,
    is_conservative,
    is_dissipative,
    is_dissipative_via_M,
    is_recurrent,
    limit_MS,
    mean_exit_time,
    tail_integral_bound,
)
from core.exception import PreconditionViolated
from core.form import DiffusionSpec, Side
from core.measure import INF, Atom, Interval, PowerDensity, RadonMeasure
from core.named import rational_windows_signed
from core.scale import ScaleFunction
from core.verdict import TriBool

HALF_LINE = Interval.open(0.0, INF)
UNIT_OPEN = Interval.open(0.0, 1.0)


def half_line_brownian() -> DiffusionSpec:
    return DiffusionSpec(HALF_LINE, ScaleFunction.identity(HALF_LINE), RadonMeasure.lebesgue(0.0, INF))


def power_spec(scale_exponent: float, speed_exponent: float) -> DiffusionSpec:
    """
    ds = x^q dx and m = x^p dx on (0, 1), singular at the left end.
    """
    if scale_exponent == 0:
        ds = RadonMeasure.lebesgue(0.0, 1.0)
    else:
        ds = RadonMeasure.of(PowerDensity(0.0, scale_exponent, 1.0, 0.0, 1.0))
    m =RadonMeasure.of(PowerDensity(0.0, speed_exponent, 1.0, 0.0, 1.0))
    return DiffusionSpec(UNIT_OPEN, ScaleFunction(UNIT_OPEN, 0.5, 0.0, ds), m)


class TestBoundaryClass:
    def test_included_ends_are_first(self, brownian_01_spec):
        assert boundary_class(brownian_01_spec, Side.LEFT) is BoundaryClass.FIRST
        assert boundary_class(brownian_01_spec, Side.RIGHT) is BoundaryClass.FIRST

    def test_line_ends_are_second(self, brownian_line_spec):
        assert boundary_class(brownian_line_spec, Side.LEFT) is BoundaryClass.SECOND
        assert boundary_class(brownian_line_spec, Side.RIGHT) is BoundaryClass.SECOND

    def test_half_line(self):
        spec = half_line_brownian()
        assert boundary_class(spec, Side.LEFT) is BoundaryClass.THIRD
        assert boundary_class(spec, Side.RIGHT) is BoundaryClass.SECOND

    def test_rational_windows(self, windows_spec):
        assert boundary_class(windows_spec, Side.LEFT) is BoundaryClass.THIRD
        assert boundary_class(windows_spec, Side.RIGHT) is BoundaryClass.THIRD


class TestDissipativity:
    """
    ∫ |s(x) - s(e)| m(dx) near e, decided directly and through M(x) = m((x, c)).
    """
    def test_half_line_left_end(self):
        spec = half_line_brownian()
        assert is_dissipative(spec, Side.LEFT) is TriBool.YES
        assert is_dissipative_via_M(spec, Side.LEFT) is TriBool.YES
        assert is_dissipative(spec, Side.RIGHT) is TriBool.NO

    def test_first_class_end_is_never_dissipative(self, brownian_01_spec):
        assert is_dissipative(brownian_01_spec, Side.LEFT) is TriBool.NO
        assert is_dissipative_via_M(brownian_01_spec, Side.LEFT) is TriBool.NO

    def test_logarithmic_divergence(self):
        spec = power_spec(0.0, -2.0)
        assert is_dissipative(spec, Side.LEFT) is TriBool.NO
        assert is_dissipative_via_M(spec, Side.LEFT) is TriBool.NO

    def test_integrable_singularity(self):
        spec = power_spec(0.0, -1.5)
        assert is_dissipative(spec, Side.LEFT) is TriBool.YES
        assert is_dissipative_via_M(spec, Side.LEFT) is TriBool.YES

    @settings(max_examples=60, deadline=None)
    @given(
        st.sampled_from([-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0]),
        st.integers(-12, 2).map(lambda quarters: quarters / 4),
    )
    def test_both_rules_agree(self, scale_exponent, speed_exponent):
        spec = power_spec(scale_exponent, speed_exponent)
        expected = TriBool.of(scale_exponent + speed_exponent + 2 > 0)
        assert is_dissipative(spec, Side.LEFT) is expected
        assert is_dissipative_via_M(spec, Side.LEFT) is expected

    def test_anchor_point_independence(self):
        divergent, convergent = power_spec(0.0, -2.0), power_spec(0.0, -1.5)
        for x in (0.25, 0.75):
            assert tail_integral_bound(divergent, Side.LEFT, x).is_infinite
            assert tail_integral_bound(convergent, Side.LEFT, x).is_finite

    def test_tail_integral_encloses_the_closed_form(self):
        # ∫_0^x z·z^-1.5 dz = 2√x
        bound = tail_integral_bound(power_spec(0.0, -1.5), Side.LEFT, 0.75)
        assert bound.contains(2 * math.sqrt(0.75), slack=1e-8)

    def test_tail_integral_needs_a_third_class_end(self, brownian_01_spec):
        with pytest.raises(PreconditionViolated):
            tail_integral_bound(brownian_01_spec, Side.LEFT, 0.5)

    def test_affine_recalibration_changes_nothing(self):
        spec = half_line_brownian()
        shifted = spec.affine(3.0, 1.0)
        for side in Side:
            assert classify(shifted, side) == classify(spec, side)


class TestLimitMS:
    def test_half_line(self):
        values = limit_MS(half_line_brownian(), Side.LEFT)
        assert len(values) > 1
        assert values[-1][1].value < values[0][1].value
        assert values[-1][1].value < 1e-6

    def test_integrable_singularity(self):
        values = limit_MS(power_spec(0.0, -1.5), Side.LEFT)
        assert values[-1][1].value < 1e-4

    def test_needs_a_dissipative_end(self):
        with pytest.raises(PreconditionViolated):
            limit_MS(power_spec(0.0, -2.0), Side.LEFT)

    def test_rational_windows_right_end(self, windows_spec):
        values = limit_MS(windows_spec, Side.RIGHT)
        assert values[-1][1].value < 1e-6


class TestRecurrenceAndConservativeness:
    def test_brownian_line(self, brownian_line_spec):
        assert is_recurrent(brownian_line_spec) is TriBool.YES
        assert is_conservative(brownian_line_spec) is TriBool.YES

    def test_half_line(self):
        assert is_recurrent(half_line_brownian()) is TriBool.NO
        assert is_conservative(half_line_brownian()) is TriBool.NO

    def test_killing(self, brownian_line_spec):
        killed = DiffusionSpec(
            brownian_line_spec.interval, brownian_line_spec.s, brownian_line_spec.m, RadonMeasure.of(Atom(0.0, 1.0)),
        )
        assert is_recurrent(killed) is TriBool.NO
        assert is_conservative(killed) is TriBool.NO

    def test_rational_windows(self, windows_spec):
        right = classify(windows_spec, Side.RIGHT)
        assert right.klass is BoundaryClass.THIRD
        assert right.dissipative is TriBool.YES
        assert is_conservative(windows_spec) is TriBool.NO
        assert is_recurrent(windows_spec) is TriBool.NO

    def test_signed_rational_windows(self):
        spec = rational_windows_signed()
        assert boundary_class(spec, Side.RIGHT) is BoundaryClass.THIRD
        assert is_dissipative(spec, Side.RIGHT) is TriBool.YES

    def test_dissipativity_bound(self, windows_spec):
        bound = dissipativity_bound(windows_spec, Side.RIGHT)
        assert bound.is_finite
        assert 0 < bound.upper <= 2.0


class TestBoundaryReport:
    def test_rational_windows(self, windows_spec):
        report = boundary_report(windows_spec)
        assert report["name"] == "rational_windows"
        assert report["right"]["class"] == "third"
        assert report["right"]["dissipative"] == "yes"
        assert report["right"]["endpoint"] == "inf"
        assert report["conservative"] == "no"
        assert report["strongly_local"] is True
        assert "dissipativity_bound" in report["right"]

    def test_brownian_line(self, brownian_line_spec):
        report = boundary_report(brownian_line_spec)
        assert report["left"]["class"] == "second"
        assert report["recurrent"] == "yes"
        assert report["transient"] == "no"
        assert "dissipativity_bound" not in report["left"]


class TestMeanExitTime:
    def test_brownian_from_the_middle(self, brownian_01_spec):
        assert mean_exit_time(brownian_01_spec, 0.0, 0.5, 1.0).value == pytest.approx(0.25)

    @given(st.floats(0.01, 0.99))
    def test_brownian_parabola(self, x):
        spec = half_line_brownian()
        assert mean_exit_time(spec, 1.0, 1.0 + x, 2.0).value == pytest.approx(x * (1 - x), abs=1e-9)

    def test_doubled_speed_doubles_the_time(self, brownian_01_spec):
        spec = DiffusionSpec(brownian_01_spec.interval, brownian_01_spec.s, RadonMeasure.lebesgue(0.0, 1.0, 2.0))
        assert mean_exit_time(spec, 0.0, 0.5, 1.0).value == pytest.approx(0.5)

    def test_start_at_the_edge(self, brownian_01_spec):
        assert mean_exit_time(brownian_01_spec, 0.0, 0.0, 1.0).value == 0.0

    def test_window_outside_of_the_interval(self, brownian_01_spec):
        with pytest.raises(PreconditionViolated):
            mean_exit_time(brownian_01_spec, 0.0, 0.5, 2.0)
