import pytest
from hypothesis import given, settings, strategies as st

from core.exception import FormFunctionException, MismatchedBase, SupportGapException
from core.form import (
    DiffusionSpec,
    FormFunction,
    Side,
    StepFunction,
    Variant,
    energy,
    is_regular_subspace,
    membership,
    regular_boundary,
    subspace_from_set,
    unit_contraction,
)
from core.measure import INF, Atom, BorelSet, Interval, IntervalSet, RadonMeasure
from core.scale import ScaleFunction
from core.verdict import Answer, TriBool

UNIT_OPEN = Interval.open(0.0, 1.0)


def open_brownian() -> DiffusionSpec:
    return DiffusionSpec(UNIT_OPEN, ScaleFunction.identity(UNIT_OPEN), RadonMeasure.lebesgue(0.0, 1.0))


def with_killing(spec: DiffusionSpec, k: RadonMeasure) -> DiffusionSpec:
    return DiffusionSpec(spec.interval, spec.s, spec.m, k, spec.name)


step_functions = st.builds(
    lambda cuts, values: StepFunction(
        (-INF, *(0.05 * c for c in sorted(cuts)), INF),
        tuple(values[:len(cuts) + 1]),
    ),
    st.lists(st.integers(1, 19), unique=True, max_size=5),
    st.lists(st.integers(-6, 6).map(lambda v: v / 2), min_size=6, max_size=6),
)


class TestStepFunction:
    def test_values(self):
        step = StepFunction((0.0, 1.0, 2.0), (3.0, -1.0))
        assert step.value_at(0.5) == 3.0
        assert step.value_at(1.5) == -1.0
        assert step.value_at(5.0) == 0.0

    def test_validation(self):
        with pytest.raises(FormFunctionException):
            StepFunction((0.0, 1.0), (1.0, 2.0))
        with pytest.raises(FormFunctionException):
            StepFunction((1.0, 0.0), (1.0, ))


class TestFormFunction:
    def test_one_coefficient_per_component(self, cantor_spec):
        with pytest.raises(FormFunctionException):
            FormFunction(cantor_spec.s, 0.0, 0.0, (StepFunction.constant(1.0), ))

    def test_scale_function_evaluates_to_the_scale(self, cantor_spec):
        u = FormFunction.of_scale(cantor_spec.s)
        assert abs(u.eval(1 / 3).value - 5 / 6) <= 1e-8

    def test_component_indicator_is_the_cantor_function(self, cantor_spec):
        c = FormFunction.component_indicator(cantor_spec.s, 1)
        assert c.eval(0.8).value == pytest.approx(0.75, abs=1e-8)


class TestEnergy:
    """
    E(u, v) = ∫ du/ds dv/ds ds + ∫ uv dk.
    """
    def test_cantor_scale(self, cantor_spec):
        s = FormFunction.of_scale(cantor_spec.s)
        c = FormFunction.component_indicator(cantor_spec.s, 1)
        assert energy(cantor_spec, s, s).value == pytest.approx(2.0, abs=1e-6)
        assert energy(cantor_spec, c, c).value == pytest.approx(1.0, abs=1e-6)
        assert energy(cantor_spec, s, c).value == pytest.approx(1.0, abs=1e-6)

    def test_brownian(self, brownian_01_spec):
        s = FormFunction.of_scale(brownian_01_spec.s)
        assert energy(brownian_01_spec, s, s).value == pytest.approx(1.0)

    def test_scale_measure_wider_than_the_interval(self):
        unit = Interval.closed(0.0, 1.0)
        wide = ScaleFunction(unit, 0.0, 0.0, RadonMeasure.lebesgue())
        spec = DiffusionSpec(unit, wide, RadonMeasure.lebesgue(0.0, 1.0))
        s = FormFunction.of_scale(spec.s)
        assert energy(spec, s, s).value == pytest.approx(1.0)
        assert membership(spec, s).is_yes

    def test_killing_atom(self, brownian_01_spec):
        spec = with_killing(brownian_01_spec, RadonMeasure.of(Atom(0.5, 2.0)))
        s = FormFunction.of_scale(spec.s)
        assert energy(spec, s, s).value == pytest.approx(1.5, abs=1e-8)

    def test_killing_density(self, brownian_01_spec):
        spec = with_killing(brownian_01_spec, RadonMeasure.lebesgue(0.0, 1.0))
        s = FormFunction.of_scale(spec.s)
        assert energy(spec, s, s).value == pytest.approx(4 / 3, abs=1e-8)

    def test_function_over_another_scale(self, brownian_01_spec, cantor_spec):
        u = FormFunction.of_scale(cantor_spec.s)
        with pytest.raises(FormFunctionException):
            energy(brownian_01_spec, u, u)

    def test_overlapping_components_need_equal_coefficients(self, brownian_01_spec):
        doubled = RadonMeasure.lebesgue(0.0, 1.0).plus(RadonMeasure.lebesgue(0.0, 1.0))
        scale = ScaleFunction(brownian_01_spec.interval, 0.0, 0.0, doubled)
        spec = DiffusionSpec(brownian_01_spec.interval, scale, brownian_01_spec.m)
        u = FormFunction(scale, 0.0, 0.0, (StepFunction.constant(1.0), StepFunction.zero()))
        with pytest.raises(FormFunctionException):
            energy(spec, u, u)

    @settings(max_examples=30, deadline=None)
    @given(step_functions, step_functions)
    def test_symmetric(self, first, second):
        spec = with_killing(open_brownian(), RadonMeasure.of(Atom(0.5, 1.0)))
        u = FormFunction(spec.s, 0.0, 0.25, (first, ))
        v = FormFunction(spec.s, 0.0, -1.0, (second, ))
        assert energy(spec, u, v).value == pytest.approx(energy(spec, v, u).value, abs=1e-9)


class TestMembership:
    def test_cantor_function_is_in_the_cantor_form(self, cantor_spec):
        c = FormFunction.component_indicator(cantor_spec.s, 1)
        assert membership(cantor_spec, c).is_yes

    def test_cantor_function_is_not_in_brownian_form(self, brownian_01_spec, cantor_spec):
        c = FormFunction.component_indicator(cantor_spec.s, 1)
        verdict = membership(brownian_01_spec, c)
        assert verdict.answer is Answer.NO
        assert verdict.reason

    def test_identity_on_the_line_is_not_square_integrable(self, brownian_line_spec):
        u = FormFunction.of_scale(brownian_line_spec.s)
        assert membership(brownian_line_spec, u).answer is Answer.NO

    def test_constants_on_closed_interval(self, brownian_01_spec):
        one = FormFunction.constant(brownian_01_spec.s, 1.0)
        assert membership(brownian_01_spec, one).is_yes
        assert membership(brownian_01_spec, one, Variant.ZERO_BOUNDARY).is_yes

    def test_zero_boundary_at_regular_ends(self):
        spec = open_brownian()
        one = FormFunction.constant(spec.s, 1.0)
        tent = FormFunction(spec.s, 0.0, 0.0, (StepFunction((-INF, 0.5, INF), (1.0, -1.0)), ))
        assert membership(spec, one).is_yes
        assert membership(spec, one, Variant.ZERO_BOUNDARY).answer is Answer.NO
        assert membership(spec, tent, Variant.ZERO_BOUNDARY).is_yes


class TestRegularBoundary:
    def test_open_ends_are_regular(self):
        spec = open_brownian()
        assert regular_boundary(spec, Side.LEFT) is TriBool.YES
        assert regular_boundary(spec, Side.RIGHT) is TriBool.YES

    def test_included_ends_are_not(self, brownian_01_spec):
        assert regular_boundary(brownian_01_spec, Side.LEFT) is TriBool.NO

    def test_natural_scale_infinite(self, brownian_line_spec):
        assert regular_boundary(brownian_line_spec, Side.RIGHT) is TriBool.NO


class TestUnitContraction:
    """
    v = (0 ∨ u) ∧ 1 stays in the form and does not raise the energy.
    """
    def test_clipped_line(self, brownian_01_spec):
        u = FormFunction(brownian_01_spec.s, 0.0, -0.5, (StepFunction.constant(2.0), ))
        v = unit_contraction(u)
        assert v.eval(0.0).value == 0.0
        assert v.eval(0.5).value == pytest.approx(0.5, abs=1e-6)
        assert v.eval(1.0).value == pytest.approx(1.0, abs=1e-6)
        assert energy(brownian_01_spec, v, v).value == pytest.approx(2.0, abs=1e-6)
        assert energy(brownian_01_spec, u, u).value == pytest.approx(4.0)

    @settings(max_examples=30, deadline=None)
    @given(step_functions, st.sampled_from([-1.0, -0.5, 0.0, 0.25, 0.5, 1.0, 1.5]))
    def test_energy_does_not_grow(self, coefficient, base_val):
        spec = open_brownian()
        u = FormFunction(spec.s, 0.0, base_val, (coefficient, ))
        v = unit_contraction(u)
        assert energy(spec, v, v).value <= energy(spec, u, u).value + 1e-9
        for x in (0.0, 0.3, 0.7, 1.0):
            assert -1e-6 <= v.eval(x).value <= 1.0 + 1e-6

    @pytest.mark.slow
    @settings(max_examples=500, deadline=None)
    @given(step_functions, st.sampled_from([-1.0, -0.5, 0.0, 0.25, 0.5, 1.0, 1.5]))
    def test_energy_does_not_grow_at_scale(self, coefficient, base_val):
        spec = open_brownian()
        u = FormFunction(spec.s, 0.0, base_val, (coefficient, ))
        v = unit_contraction(u)
        assert energy(spec, v, v).value <= energy(spec, u, u).value + 1e-9


class TestRegularSubspace:
    def test_brownian_inside_cantor_scale(self, brownian_01_spec, cantor_spec):
        assert is_regular_subspace(brownian_01_spec, cantor_spec).is_yes

    def test_cantor_scale_not_inside_brownian(self, brownian_01_spec, cantor_spec):
        assert is_regular_subspace(cantor_spec, brownian_01_spec).answer is Answer.NO

    def test_different_intervals(self, brownian_01_spec, brownian_line_spec):
        with pytest.raises(MismatchedBase):
            is_regular_subspace(brownian_01_spec, brownian_line_spec)

    def test_killing_must_agree(self, brownian_01_spec, cantor_spec):
        killed = with_killing(brownian_01_spec, RadonMeasure.lebesgue(0.0, 1.0))
        assert is_regular_subspace(killed, cantor_spec).answer is Answer.NO

    def test_subspace_from_the_cantor_set(self, cantor_spec):
        sub = subspace_from_set(cantor_spec, BorelSet.cantor(Interval.closed(0.0, 1.0)))
        assert sub.s.is_piecewise_linear
        assert is_regular_subspace(sub, cantor_spec).is_yes

    def test_subspace_from_an_interval_leaves_a_gap(self, cantor_spec):
        with pytest.raises(SupportGapException) as error:
            subspace_from_set(cantor_spec, IntervalSet.of(Interval.open(0.2, 0.4)))
        assert (error.value.gap.lo, error.value.gap.hi) == (0.2, 0.4)
