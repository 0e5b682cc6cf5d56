import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from core.exception import IntervalException, MeasureException, NonIntegrableException
from core.measure import (
    INF,
    Approx,
    Atom,
    CantorCopy,
    ExtendedSum,
    Interval,
    IntervalSet,
    LebesgueDensity,
    PiecewiseLinear,
    PowerDensity,
    RadonMeasure,
    RationalWindows,
    integrate_bounded,
    is_fully_supported,
    nth_positive_rational,
)

TOL = 1e-9


class TestInterval:
    """
    Construction rules and the small helpers of Interval.
    """
    def test_rejects_reversed_ends(self):
        with pytest.raises(IntervalException):
            Interval(1.0, 0.0)

    def test_rejects_included_infinite_end(self):
        with pytest.raises(IntervalException):
            Interval(-INF, 0.0, True, False)

    def test_degenerate_needs_both_flags(self):
        with pytest.raises(IntervalException):
            Interval(0.0, 0.0)
        assert Interval.closed(0.0, 0.0).is_degenerate

    def test_interior_points(self):
        assert Interval.real_line().interior_point() == 0.0
        assert Interval.open(0.0, INF).interior_point() == 1.0
        assert Interval.closed(0.0, 1.0).interior_point() == 0.5

    def test_contains_respects_flags(self):
        closed = Interval.closed(0.0, 1.0)
        opened = Interval.open(0.0, 1.0)
        assert closed.contains(0.0) and closed.contains(1.0)
        assert not opened.contains(0.0) and not opened.contains(1.0)
        assert opened.closure() == closed
        assert closed.interior() == opened


class TestIntervalSet:
    def test_closed_pieces_sharing_an_end_merge(self):
        merged = IntervalSet.of(Interval.closed(0.0, 1.0), Interval.closed(1.0, 2.0))
        assert merged.pieces == (Interval.closed(0.0, 2.0), )

    def test_open_pieces_sharing_an_end_stay_apart(self):
        pieces = IntervalSet.of(Interval.open(0.0, 1.0), Interval.open(1.0, 2.0))
        assert len(pieces) == 2

    def test_complement_within(self):
        gaps = IntervalSet.of(Interval.open(0.2, 0.4)).complement_within(Interval.closed(0.0, 1.0))
        assert gaps.pieces == (Interval.closed(0.0, 0.2), Interval.closed(0.4, 1.0))


class TestApprox:
    """
    Certified arithmetic over the extended reals.
    """
    def test_errors_add(self):
        total = Approx(1.0, 0.1) + Approx(2.0, 0.2)
        assert total.value == pytest.approx(3.0)
        assert total.error == pytest.approx(0.3)

    def test_opposite_infinities_do_not_add(self):
        with pytest.raises(NonIntegrableException):
            _ = Approx.infinite() + Approx.infinite(-1)

    def test_negative_error_is_invalid(self):
        with pytest.raises(MeasureException):
            Approx(1.0, -1.0)

    def test_infinite_value_is_not_finite(self):
        assert Approx.infinite().is_infinite
        assert not Approx.infinite().is_finite
        assert not Approx(1.0, INF).is_finite

    def test_scaling_by_zero_is_exact_zero(self):
        assert Approx.infinite() * 0 == Approx(0.0)

    @given(
        st.floats(-1e6, 1e6), st.floats(0, 1e3),
        st.floats(-1e6, 1e6), st.floats(0, 1e3),
    )
    def test_sum_encloses_every_pair(self, a, a_error, b, b_error):
        total = Approx(a, a_error) + Approx(b, b_error)
        assert total.contains(a + b, slack=1e-6)
        assert total.contains(a - a_error + b - b_error, slack=1e-6)


class TestExtendedSum:
    def test_linear_integral(self):
        total = ExtendedSum()
        total.add_linear_integral(1.0, 0.0, 1.0, 0.0, 2.0)
        assert total.result().value == pytest.approx(2.0)

    def test_unbounded_linear_integral_diverges(self):
        total = ExtendedSum()
        total.add_linear_integral(1.0, 1.0, 0.0, 0.0, INF)
        assert total.result() == Approx.infinite()


class TestPiecewiseLinear:
    def test_hat(self):
        hat = PiecewiseLinear.hat(0.0, 1.0, 2.0)
        assert hat(1.0) == 1.0
        assert hat(0.5) == 0.5
        assert hat(3.0) == 0.0

    def test_precomposed(self):
        shifted = PiecewiseLinear.identity().precomposed(1.0, 2.0)
        assert shifted(3.0) == 7.0


class TestLebesgue:
    def test_mass_is_clipped_to_the_density(self):
        mu = RadonMeasure.lebesgue(0.0, 1.0)
        assert mu.mass(Interval.open(0.25, 2.0), TOL).value == pytest.approx(0.75)

    def test_identity_integral_is_exact(self):
        result = RadonMeasure.lebesgue(0.0, 1.0).integrate_kernel(
            PiecewiseLinear.identity(), Interval.open(0.0, 1.0), TOL
        )
        assert result.value == pytest.approx(0.5)
        assert result.error == 0.0

    def test_whole_line_mass_is_infinite(self):
        assert RadonMeasure.lebesgue().mass(Interval.real_line(), TOL).is_infinite

    def test_negative_density_is_rejected(self):
        with pytest.raises(MeasureException):
            LebesgueDensity((0.0, 1.0), (-1.0, ))

    @given(
        st.lists(st.floats(0.0, 5.0), min_size=3, max_size=3),
        st.floats(-3.0, 3.0), st.floats(0.01, 3.0), st.floats(0.01, 3.0),
    )
    def test_mass_is_additive(self, densities, a, first, second):
        mu = RadonMeasure.of(LebesgueDensity((-2.0, 0.0, 1.0, 4.0), tuple(densities)))
        b, c = a + first, a + first + second
        whole = mu.mass(Interval.open(a, c), TOL).value
        parts = mu.mass(Interval.open(a, b), TOL).value + mu.mass(Interval.open(b, c), TOL).value
        assert whole == pytest.approx(parts, rel=1e-12, abs=1e-12)


class TestCantorCopy:
    """
    The Cantor measure is integrated over its self-similar tree.
    """
    def test_integral_of_identity_is_the_midpoint(self):
        cantor = RadonMeasure.of(CantorCopy(Interval.closed(0.0, 1.0), 1.0))
        result = cantor.integrate_kernel(PiecewiseLinear.identity(), Interval.real_line(), TOL)
        assert result.value == pytest.approx(0.5)

    def test_left_half(self):
        cantor = CantorCopy(Interval.closed(0.0, 1.0), 1.0)
        assert cantor.mass(Interval.open(0.0, 0.5), TOL).contains(0.5, slack=1e-12)

    def test_mass_matches_the_cantor_function(self):
        # c(0.8) - c(0.2) = 3/4 - 1/4
        cantor = CantorCopy(Interval.closed(0.0, 1.0), 1.0)
        assert cantor.mass(Interval.open(0.2, 0.8), TOL).value == pytest.approx(0.5, abs=1e-9)

    def test_has_no_lebesgue_cover(self):
        cantor = CantorCopy(Interval.closed(0.0, 1.0), 1.0)
        assert cantor.cover() == []
        assert not cantor.is_absolutely_continuous

    def test_support_must_be_bounded(self):
        with pytest.raises(MeasureException):
            CantorCopy(Interval.open(0.0, INF), 1.0)


class TestRationalWindows:
    def test_enumeration_order(self):
        assert [nth_positive_rational(n) for n in range(1, 6)] == [
            Fraction(1), Fraction(1, 2), Fraction(2), Fraction(1, 3), Fraction(3),
        ]

    def test_windows_shrink_geometrically(self):
        windows = RationalWindows()
        assert windows.window(1) == Interval.open(0.75, 1.25)
        assert windows.center(2) == 0.5

    def test_signed_centers_alternate(self):
        windows = RationalWindows(signed=True)
        assert [windows.center(n) for n in (1, 2, 3)] == [1.0, -1.0, 0.5]

    def test_total_mass_is_at_most_one(self):
        total = RadonMeasure.of(RationalWindows()).mass(Interval.open(0.0, INF), TOL)
        assert total.is_finite
        assert total.upper <= 1.0 + 1e-12
        assert total.lower > 0.5

    def test_hull(self):
        assert RationalWindows().hull() == Interval.open(0.0, INF)
        assert RationalWindows(signed=True).hull() == Interval.real_line()

    def test_windows_below_float_spacing_stay_in_the_tail(self):
        windows = RationalWindows()
        total = RadonMeasure.of(windows).mass(Interval.open(0.0, INF), 1e-30)
        assert total.is_finite
        assert 0.5 < total.lower and total.upper <= 1.0 + 1e-12
        assert total.error < 2.0 ** -40
        assert all(piece.length > 0 for piece in windows.union(RationalWindows.MAX_WINDOWS))

    def test_long_cutoff(self):
        windows = RationalWindows(count_cutoff=200)
        points = windows.structure_points()
        assert points == sorted(points)
        assert windows.tail_mass(200) == 0.0


class TestPowerDensity:
    def test_integrable_singularity(self):
        mu = RadonMeasure.of(PowerDensity(0.0, 0.5, 1.0, 0.0, 1.0))
        assert mu.mass(Interval.open(0.0, 1.0), TOL).value == pytest.approx(2 / 3)

    def test_non_integrable_singularity(self):
        mu = RadonMeasure.of(PowerDensity(0.0, -2.0, 1.0, 0.0, 1.0))
        assert mu.mass(Interval.open(0.0, 1.0), TOL).is_infinite

    def test_anchor_inside_the_piece_is_rejected(self):
        with pytest.raises(MeasureException):
            PowerDensity(0.5, -0.5, 1.0, 0.0, 1.0)


class TestRadonMeasure:
    """
    Sums of components: Radon checks, normal forms and supports.
    """
    def test_singularity_at_an_included_end_is_not_radon(self):
        mu = RadonMeasure.of(PowerDensity(0.0, -2.0, 1.0, 0.0, 1.0))
        with pytest.raises(MeasureException):
            mu.check_radon(Interval.closed(0.0, 1.0))
        mu.check_radon(Interval.open(0.0, 1.0))

    def test_canonical_merges_lebesgue_parts(self):
        doubled = RadonMeasure.of(LebesgueDensity.uniform(0.0, 1.0), LebesgueDensity.uniform(0.0, 1.0))
        assert doubled.canonical().components == (LebesgueDensity((0.0, 1.0), (2.0, )), )
        assert doubled.same_as(RadonMeasure.lebesgue(0.0, 1.0, 2.0))

    def test_canonical_merges_atoms(self):
        atoms = RadonMeasure.of(Atom(0.5, 1.0), Atom(0.5, 2.0))
        assert atoms.canonical().components == (Atom(0.5, 3.0), )

    def test_support_gaps(self):
        mu = RadonMeasure.lebesgue(0.0, 1.0).plus(RadonMeasure.lebesgue(2.0, 3.0))
        gaps = mu.support_gaps(Interval.open(0.0, 3.0))
        assert gaps.pieces == (Interval.open(1.0, 2.0), )
        assert not is_fully_supported(mu, Interval.open(0.0, 3.0))
        assert is_fully_supported(mu, Interval.open(0.0, 1.0))

    def test_atoms(self):
        mu = RadonMeasure.lebesgue(0.0, 1.0).plus(RadonMeasure.of(Atom(0.5, 2.0)))
        assert not mu.is_atomless
        assert mu.atoms() == [Atom(0.5, 2.0)]
        assert mu.without_atoms().is_atomless

    def test_scaling(self):
        mu = RadonMeasure.lebesgue(0.0, 1.0).scaled(3.0)
        assert mu.mass(Interval.open(0.0, 1.0), TOL).value == pytest.approx(3.0)
        assert RadonMeasure.lebesgue(0.0, 1.0).scaled(0.0).is_zero
        with pytest.raises(MeasureException):
            mu.scaled(-1.0)


class TestIntegrateBounded:
    def test_encloses_the_integral(self):
        result = integrate_bounded(
            RadonMeasure.lebesgue(0.0, 1.0), lambda u, v: (u, v), Interval.open(0.0, 1.0), 1e-3,
        )
        assert result.contains(0.5)
        assert result.error <= 1e-3

    def test_atoms_are_evaluated_at_their_location(self):
        mu = RadonMeasure.of(Atom(0.25, 2.0))
        result = integrate_bounded(mu, lambda u, v: (u, v), Interval.open(0.0, 1.0), 1e-6)
        assert result.value == pytest.approx(0.5)
        assert math.isclose(result.error, 0.0, abs_tol=1e-15)
