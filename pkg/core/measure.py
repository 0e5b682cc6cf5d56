import heapq
import json
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from math import gcd
from typing import Callable, Dict, Iterable, Iterator, List, Optional, Tuple

from .configuration import config
from .exception import IntervalException, MeasureException, NonIntegrableException, UnsupportedOperation
from .utilities import encode_real, format_real

log = logging.getLogger(__name__)

INF = math.inf


def representative_point(lo: float, hi: float) -> float:
    # Some point strictly inside (lo, hi), also for infinite ends.
    if math.isinf(lo) and math.isinf(hi):
        return 0.0
    if math.isinf(lo):
        return hi - 1.0
    if math.isinf(hi):
        return lo + 1.0
    return (lo + hi) / 2


def _sign(value: float) -> int:
    return (value > 0) - (value < 0)


##########
# Intervals
##########
@dataclass(frozen=True)
class Interval:
    """
    An interval of the extended real line with explicit endpoint inclusion flags.
    Infinite endpoints are never included; a degenerate [x, x] needs both flags set.
    """
    lo: float
    hi: float
    lo_included: bool = False
    hi_included: bool = False

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise IntervalException("interval endpoints must not be NaN")
        if self.lo > self.hi:
            raise IntervalException(f"interval lower end {self.lo} exceeds upper end {self.hi}")
        if (math.isinf(self.lo) and self.lo_included) or (math.isinf(self.hi) and self.hi_included):
            raise IntervalException("an infinite endpoint can not be included")
        if self.lo == self.hi and not (self.lo_included and self.hi_included):
            raise IntervalException(f"degenerate interval at {self.lo} must be closed")

    @classmethod
    def open(cls, lo: float, hi: float) -> "Interval":
        return cls(lo, hi, False, False)

    @classmethod
    def closed(cls, lo: float, hi: float) -> "Interval":
        return cls(lo, hi, not math.isinf(lo), not math.isinf(hi))

    @classmethod
    def real_line(cls) -> "Interval":
        return cls(-INF, INF)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def is_bounded(self) -> bool:
        return not (math.isinf(self.lo) or math.isinf(self.hi))

    @property
    def is_degenerate(self) -> bool:
        return self.lo == self.hi

    def interior(self) -> "Interval":
        """
        I° - the same endpoints with both flags cleared.
        """
        if self.is_degenerate:
            raise IntervalException("a degenerate interval has an empty interior")
        return Interval(self.lo, self.hi)

    def closure(self) -> "Interval":
        return Interval.closed(self.lo, self.hi)

    def interior_point(self, fraction: float = 0.5) -> float:
        """
        A reference point strictly inside the interval, moving monotonically with `fraction` in (0, 1).
        """
        if self.is_bounded:
            return self.lo + fraction * (self.hi - self.lo)
        if not math.isinf(self.lo):
            return self.lo + 2 * fraction
        if not math.isinf(self.hi):
            return self.hi - 2 * (1 - fraction)
        return 2 * fraction - 1

    def contains(self, x: float) -> bool:
        above = self.lo < x or (self.lo_included and x == self.lo)
        below = x < self.hi or (self.hi_included and x == self.hi)
        return above and below

    def contains_interval(self, other: "Interval") -> bool:
        lo_ok = other.lo > self.lo or (other.lo == self.lo and (self.lo_included or not other.lo_included))
        hi_ok = other.hi < self.hi or (other.hi == self.hi and (self.hi_included or not other.hi_included))
        return lo_ok and hi_ok

    def intersect(self, other: "Interval") -> Optional["Interval"]:
        if self.lo > other.lo:
            lo, lo_included = self.lo, self.lo_included
        elif self.lo < other.lo:
            lo, lo_included = other.lo, other.lo_included
        else:
            lo, lo_included = self.lo, self.lo_included and other.lo_included

        if self.hi < other.hi:
            hi, hi_included = self.hi, self.hi_included
        elif self.hi > other.hi:
            hi, hi_included = other.hi, other.hi_included
        else:
            hi, hi_included = self.hi, self.hi_included and other.hi_included

        return make_interval(lo, hi, lo_included, hi_included)

    def dump(self) -> dict:
        return {
            "lo": encode_real(self.lo),
            "hi": encode_real(self.hi),
            "lo_included": self.lo_included,
            "hi_included": self.hi_included,
        }

    def __str__(self):
        left = "[" if self.lo_included else "("
        right = "]" if self.hi_included else ")"
        return f"{left}{format_real(self.lo)}, {format_real(self.hi)}{right}"


def make_interval(lo: float, hi: float, lo_included: bool = False, hi_included: bool = False) -> Optional[Interval]:
    """
    Build an Interval, or return None when the described set is empty.
    Inclusion flags on infinite endpoints are silently dropped.
    """
    lo_included = lo_included and not math.isinf(lo)
    hi_included = hi_included and not math.isinf(hi)
    if lo > hi:
        return None
    if lo == hi and not (lo_included and hi_included):
        return None
    return Interval(lo, hi, lo_included, hi_included)


@dataclass(frozen=True)
class IntervalSet:
    """
    A finite union of intervals kept in canonical form:
    sorted by lower end, with no two pieces that could be merged.
    Build it through canonicalize (or IntervalSet.of), not directly.
    """
    pieces: Tuple[Interval, ...] = ()

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls(())

    @classmethod
    def of(cls, *intervals: Interval) -> "IntervalSet":
        return canonicalize(list(intervals))

    def __iter__(self) -> Iterator[Interval]:
        return iter(self.pieces)

    def __len__(self):
        return len(self.pieces)

    @property
    def is_empty(self) -> bool:
        return len(self.pieces) == 0

    @property
    def length(self) -> float:
        return math.fsum(piece.length for piece in self.pieces)

    def contains(self, x: float) -> bool:
        return any(piece.contains(x) for piece in self.pieces)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return canonicalize(list(self.pieces) + list(other.pieces))

    def intersection(self, interval: Interval) -> "IntervalSet":
        clipped = [piece.intersect(interval) for piece in self.pieces]
        return IntervalSet(tuple(piece for piece in clipped if piece is not None))

    def complement_within(self, interval: Interval) -> "IntervalSet":
        gaps: List[Interval] = []
        cursor, cursor_included = interval.lo, interval.lo_included

        for piece in self.intersection(interval):
            gap = make_interval(cursor, piece.lo, cursor_included, not piece.lo_included)
            if gap is not None:
                gaps.append(gap)
            cursor, cursor_included = piece.hi, not piece.hi_included

        tail = make_interval(cursor, interval.hi, cursor_included, interval.hi_included)
        if tail is not None:
            gaps.append(tail)

        return IntervalSet(tuple(gaps))

    def dump(self) -> list:
        return [piece.dump() for piece in self.pieces]

    def __str__(self):
        if self.is_empty:
            return "∅"
        return " ∪ ".join(str(piece) for piece in self.pieces)


def canonicalize(pieces: List[Interval]) -> IntervalSet:
    """
    Merge a list of intervals into canonical form. The union is preserved.

    Two pieces merge when they overlap, or when they share an endpoint that at least one of them includes:
    {[0,1], [1,2]} becomes {[0,2]} while {(0,1), (1,2)} stays as it is.
    """
    ordered = sorted(pieces, key=lambda piece: (piece.lo, not piece.lo_included))
    merged: List[Interval] = []

    for piece in ordered:
        if merged:
            last = merged[-1]
            touches = piece.lo < last.hi or (
                piece.lo == last.hi and (last.hi_included or piece.lo_included)
            )
            if touches:
                hi, hi_included = max((last.hi, last.hi_included), (piece.hi, piece.hi_included))
                merged[-1] = Interval(last.lo, hi, last.lo_included, hi_included)
                continue

        merged.append(piece)

    return IntervalSet(tuple(merged))


@dataclass(frozen=True)
class BorelSet:
    """
    The Borel sets the subspace calculus can represent: a finite union of intervals
    plus whole Cantor sets, each named by the support of a CantorCopy component.
    A Cantor set is Lebesgue-null, so marking it only removes the matching singular component.
    """
    intervals: IntervalSet = field(default_factory=IntervalSet.empty)
    cantor_supports: Tuple[Interval, ...] = ()

    @classmethod
    def of_intervals(cls, *intervals: Interval) -> "BorelSet":
        return cls(canonicalize(list(intervals)))

    @classmethod
    def cantor(cls, support: Interval) -> "BorelSet":
        return cls(IntervalSet.empty(), (support, ))

    @property
    def is_empty(self) -> bool:
        return self.intervals.is_empty and not self.cantor_supports

    def __str__(self):
        parts = [str(self.intervals)] if not self.intervals.is_empty else []
        parts.extend(f"Cantor{support}" for support in self.cantor_supports)
        return " ∪ ".join(parts) or "∅"


##########
# Certified arithmetic
##########
@dataclass(frozen=True)
class Approx:
    """
    A real number with a certified absolute error bound.
    An infinite value means the quantity is certified infinite (error is then meaningless and kept at 0).
    Bounds cover the analytic approximation only, not float rounding.
    """
    value: float
    error: float = 0.0

    def __post_init__(self):
        if math.isnan(self.value) or math.isnan(self.error) or self.error < 0:
            raise MeasureException(f"invalid certified value {self.value} ± {self.error}")

    @classmethod
    def exact(cls, value: float) -> "Approx":
        return cls(float(value), 0.0)

    @classmethod
    def infinite(cls, sign: int = 1) -> "Approx":
        return cls(INF if sign > 0 else -INF, 0.0)

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)

    @property
    def is_finite(self) -> bool:
        return not self.is_infinite and not math.isinf(self.error)

    @property
    def lower(self) -> float:
        return self.value - self.error if not self.is_infinite else self.value

    @property
    def upper(self) -> float:
        return self.value + self.error if not self.is_infinite else self.value

    def contains(self, x: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= x <= self.upper + slack

    def __add__(self, other) -> "Approx":
        other = _as_approx(other)
        if self.is_infinite and other.is_infinite and _sign(self.value) != _sign(other.value):
            raise NonIntegrableException("sum of +inf and -inf is undefined")
        if self.is_infinite:
            return self
        if other.is_infinite:
            return other
        return Approx(self.value + other.value, self.error + other.error)

    __radd__ = __add__

    def __neg__(self) -> "Approx":
        return Approx(-self.value, self.error)

    def __sub__(self, other) -> "Approx":
        return self + (-_as_approx(other))

    def __rsub__(self, other) -> "Approx":
        return _as_approx(other) - self

    def __mul__(self, other) -> "Approx":
        if isinstance(other, Approx):
            if self.is_infinite or other.is_infinite:
                if (self.value == 0 and self.error == 0) or (other.value == 0 and other.error == 0):
                    return Approx(0.0)
                if self.lower <= 0 <= self.upper or other.lower <= 0 <= other.upper:
                    raise NonIntegrableException("product of an infinite value and a value of unknown sign")
                return Approx.infinite(_sign(self.value) * _sign(other.value))
            error = abs(self.value) * other.error + abs(other.value) * self.error + self.error * other.error
            return Approx(self.value * other.value, error)

        factor = float(other)
        if factor == 0:
            return Approx(0.0)
        if self.is_infinite:
            return Approx.infinite(_sign(self.value) * _sign(factor))
        return Approx(self.value * factor, self.error * abs(factor))

    __rmul__ = __mul__

    def __truediv__(self, other: float) -> "Approx":
        return self * (1.0 / float(other))

    def __str__(self):
        if self.is_infinite:
            return format_real(self.value)
        return f"{format_real(self.value)} ± {self.error:.3g}"


def _as_approx(value) -> Approx:
    if isinstance(value, Approx):
        return value
    return Approx(float(value))


class ExtendedSum:
    """
    Accumulator over the extended reals: finite parts are summed with math.fsum,
    infinite parts only remember their signs.
    """
    __slots__ = ("_values", "_errors", "_positive_infinite", "_negative_infinite")

    def __init__(self):
        self._values: List[float] = []
        self._errors: List[float] = []
        self._positive_infinite = False
        self._negative_infinite = False

    def add(self, value: float, error: float = 0.0):
        if math.isinf(value):
            if value > 0:
                self._positive_infinite = True
            else:
                self._negative_infinite = True
            return
        self._values.append(value)
        self._errors.append(error)

    def add_approx(self, approx: Approx):
        self.add(approx.value, approx.error)

    def add_diverging(self, sign: int):
        if sign > 0:
            self._positive_infinite = True
        elif sign < 0:
            self._negative_infinite = True

    def add_linear_integral(self, factor: float, alpha: float, beta: float, lo: float, hi: float):
        """
        Adds factor * ∫_lo^hi (alpha + beta·x) dx, which diverges on unbounded ranges unless the integrand vanishes.
        """
        if factor == 0 or lo >= hi:
            return
        if not (math.isinf(lo) or math.isinf(hi)):
            self.add(factor * (alpha * (hi - lo) + beta * (hi * hi - lo * lo) / 2))
            return

        if math.isinf(hi):
            self.add_diverging(_sign(factor) * (_sign(beta) if beta != 0 else _sign(alpha)))
        if math.isinf(lo):
            self.add_diverging(_sign(factor) * (-_sign(beta) if beta != 0 else _sign(alpha)))

    def result(self) -> Approx:
        if self._positive_infinite and self._negative_infinite:
            raise NonIntegrableException("integrand has both a +inf and a -inf part")
        if self._positive_infinite:
            return Approx.infinite(1)
        if self._negative_infinite:
            return Approx.infinite(-1)
        return Approx(math.fsum(self._values), math.fsum(self._errors))


##########
# Piecewise-linear integrands
##########
@dataclass(frozen=True)
class PiecewiseLinear:
    """
    Continuous piecewise-linear function on the real line: linear interpolation between knots,
    extended linearly with the given slopes beyond the first and last knot.
    """
    knots: Tuple[float, ...]
    values: Tuple[float, ...]
    left_slope: float = 0.0
    right_slope: float = 0.0

    def __post_init__(self):
        if len(self.knots) == 0 or len(self.knots) != len(self.values):
            raise MeasureException("piecewise-linear function needs as many values as knots (at least one)")
        if any(math.isinf(k) or math.isnan(k) for k in self.knots):
            raise MeasureException("piecewise-linear knots must be finite")
        if any(b <= a for a, b in zip(self.knots, self.knots[1:])):
            raise MeasureException("piecewise-linear knots must be strictly increasing")

    @classmethod
    def constant(cls, value: float) -> "PiecewiseLinear":
        return cls((0.0, ), (float(value), ))

    @classmethod
    def linear(cls, alpha: float, beta: float) -> "PiecewiseLinear":
        """
        x ↦ alpha + beta·x
        """
        return cls((0.0, ), (float(alpha), ), float(beta), float(beta))

    @classmethod
    def identity(cls) -> "PiecewiseLinear":
        return cls.linear(0.0, 1.0)

    @classmethod
    def hat(cls, lo: float, mid: float, hi: float, peak: float = 1.0) -> "PiecewiseLinear":
        return cls((lo, mid, hi), (0.0, float(peak), 0.0))

    def segment(self, x: float) -> Tuple[float, float]:
        # (alpha, beta) of the linear piece containing x
        if x <= self.knots[0]:
            beta = self.left_slope
            return self.values[0] - beta * self.knots[0], beta
        if x >= self.knots[-1]:
            beta = self.right_slope
            return self.values[-1] - beta * self.knots[-1], beta

        index = max(i for i, k in enumerate(self.knots) if k <= x)
        k0, k1 = self.knots[index], self.knots[index + 1]
        v0, v1 = self.values[index], self.values[index + 1]
        beta = (v1 - v0) / (k1 - k0)
        return v0 - beta * k0, beta

    def __call__(self, x: float) -> float:
        if math.isinf(x):
            slope = self.right_slope if x > 0 else self.left_slope
            if slope == 0:
                return self.values[-1] if x > 0 else self.values[0]
            return slope * x
        alpha, beta = self.segment(x)
        return alpha + beta * x

    def pieces(self, lo: float, hi: float) -> List[Tuple[float, float, float, float]]:
        """
        Split (lo, hi) at the knots.

        Returns:
            List of (u, v, alpha, beta) with the function equal to alpha + beta·x on (u, v).
        """
        if lo >= hi:
            return []
        cuts = [lo] + [k for k in self.knots if lo < k < hi] + [hi]
        result = []
        for u, v in zip(cuts, cuts[1:]):
            alpha, beta = self.segment(representative_point(u, v))
            result.append((u, v, alpha, beta))
        return result

    def range_on(self, lo: float, hi: float) -> Tuple[float, float]:
        points = [lo, hi] + [k for k in self.knots if lo < k < hi]
        samples = [self(point) for point in points]
        return min(samples), max(samples)

    def max_abs_on(self, lo: float, hi: float) -> float:
        low, high = self.range_on(lo, hi)
        return max(abs(low), abs(high))

    @property
    def max_abs_slope(self) -> float:
        slopes = [abs(self.left_slope), abs(self.right_slope)]
        slopes.extend(
            abs((v1 - v0) / (k1 - k0))
            for k0, k1, v0, v1 in zip(self.knots, self.knots[1:], self.values, self.values[1:])
        )
        return max(slopes)

    def precomposed(self, alpha: float, beta: float) -> "PiecewiseLinear":
        """
        x ↦ self(alpha + beta·x) for beta > 0.
        """
        if beta <= 0:
            raise MeasureException("precomposition needs an increasing affine map")
        knots = tuple((k - alpha) / beta for k in self.knots)
        return PiecewiseLinear(knots, self.values, self.left_slope * beta, self.right_slope * beta)

    def __add__(self, other: "PiecewiseLinear") -> "PiecewiseLinear":
        knots = tuple(sorted(set(self.knots) | set(other.knots)))
        values = tuple(self(k) + other(k) for k in knots)
        return PiecewiseLinear(knots, values, self.left_slope + other.left_slope, self.right_slope + other.right_slope)

    def scaled(self, factor: float) -> "PiecewiseLinear":
        return PiecewiseLinear(
            self.knots, tuple(v * factor for v in self.values), self.left_slope * factor, self.right_slope * factor
        )


##########
# Rational enumeration
##########
def _rational_order() -> Iterator[Fraction]:
    total = 2
    while True:
        for numerator in range(1, total):
            denominator = total - numerator
            if gcd(numerator, denominator) == 1:
                yield Fraction(numerator, denominator)
        total += 1


_rational_stream = _rational_order()
_positive_rationals: List[Fraction] = []


def nth_positive_rational(n: int) -> Fraction:
    """
    The n-th positive rational q/p in lowest terms, ordered by p+q and then by q.
    """
    if n < 1:
        raise MeasureException(f"rationals are enumerated from 1, got {n}")
    while len(_positive_rationals) < n:
        _positive_rationals.append(next(_rational_stream))
    return _positive_rationals[n - 1]


@lru_cache(maxsize=128)
def _window_union(signed: bool, count: int) -> IntervalSet:
    windows = [RationalWindows(signed=signed).window(n) for n in range(1, count + 1)]
    return canonicalize(windows)


@lru_cache(maxsize=2)
def _resolvable_windows(signed: bool) -> int:
    # windows narrower than the float spacing at their centre collapse to a point
    windows = RationalWindows(signed=signed)
    for n in range(1, RationalWindows.MAX_WINDOWS + 1):
        center, radius = windows.center(n), 2.0 ** -(n + 1)
        if not center - radius < center < center + radius:
            return n - 1
    return RationalWindows.MAX_WINDOWS


##########
# Measure components
##########
class MeasureComponent(ABC):
    """
    One summand of a RadonMeasure. Components are immutable values.
    """
    KIND: str = ""

    @abstractmethod
    def integrate(self, g: PiecewiseLinear, interval: Interval, tol: float) -> Approx:
        """
        Certified ∫_interval g d(component), error at most tol (infinite values are certified exactly).
        """

    def mass(self, interval: Interval, tol: float) -> Approx:
        return self.integrate(PiecewiseLinear.constant(1.0), interval, tol)

    @abstractmethod
    def cover(self) -> List[Interval]:
        """
        Open intervals on which every open subinterval carries positive mass.
        """

    @abstractmethod
    def structure_points(self) -> List[float]:
        """
        Finite points where the component changes its structure.
        """

    @abstractmethod
    def scaled(self, factor: float) -> "MeasureComponent":
        pass

    @abstractmethod
    def times_indicator(self, keep: IntervalSet) -> List["MeasureComponent"]:
        """
        The component multiplied by 1_keep, as a list of components.

        Raises:
            UnsupportedOperation when the product leaves the representable algebra.
        """

    @abstractmethod
    def dump(self) -> dict:
        pass

    @property
    def is_atomless(self) -> bool:
        return True

    @property
    def is_absolutely_continuous(self) -> bool:
        return True


@dataclass(frozen=True)
class LebesgueDensity(MeasureComponent):
    """
    Piecewise-constant density: values[i] on (breakpoints[i], breakpoints[i+1]), zero elsewhere.
    The outer breakpoints may be infinite.
    """
    breakpoints: Tuple[float, ...]
    values: Tuple[float, ...]
    KIND = "lebesgue"

    def __post_init__(self):
        if len(self.breakpoints) < 2 or len(self.values) != len(self.breakpoints) - 1:
            raise MeasureException("lebesgue density needs one value per piece between breakpoints")
        if any(b <= a for a, b in zip(self.breakpoints, self.breakpoints[1:])):
            raise MeasureException("lebesgue breakpoints must be strictly increasing")
        if any(math.isinf(b) for b in self.breakpoints[1:-1]):
            raise MeasureException("only the outer lebesgue breakpoints may be infinite")
        if any(math.isnan(v) or math.isinf(v) or v < 0 for v in self.values):
            raise MeasureException("lebesgue density values must be finite and nonnegative")

    @classmethod
    def uniform(cls, lo: float = -INF, hi: float = INF, density: float = 1.0) -> "LebesgueDensity":
        return cls((float(lo), float(hi)), (float(density), ))

    def pieces(self) -> Iterator[Tuple[float, float, float]]:
        return zip(self.breakpoints, self.breakpoints[1:], self.values)

    def density_at(self, x: float) -> float:
        """
        Density on the piece containing x (the right piece at a breakpoint).
        """
        for lo, hi, value in self.pieces():
            if lo <= x < hi:
                return value
        return 0.0

    def integrate(self, g: PiecewiseLinear, interval: Interval, tol: float) -> Approx:
        total = ExtendedSum()
        for lo, hi, value in self.pieces():
            if value == 0:
                continue
            u, w = max(lo, interval.lo), min(hi, interval.hi)
            for a, b, alpha, beta in g.pieces(u, w):
                total.add_linear_integral(value, alpha, beta, a, b)
        return total.result()

    def cover(self) -> List[Interval]:
        return [Interval.open(lo, hi) for lo, hi, value in self.pieces() if value > 0]

    def structure_points(self) -> List[float]:
        return [b for b in self.breakpoints if not math.isinf(b)]

    def scaled(self, factor: float) -> "LebesgueDensity":
        return LebesgueDensity(self.breakpoints, tuple(v * factor for v in self.values))

    def times_indicator(self, keep: IntervalSet) -> List[MeasureComponent]:
        first, last = self.breakpoints[0], self.breakpoints[-1]
        cuts = set(self.breakpoints)
        for piece in keep:
            cuts.update(b for b in (piece.lo, piece.hi) if first < b < last)
        cuts = sorted(cuts)

        values = []
        for lo, hi in zip(cuts, cuts[1:]):
            point = representative_point(lo, hi)
            values.append(self.density_at(point) if keep.contains(point) else 0.0)

        if all(v == 0 for v in values):
            return []
        return [LebesgueDensity(tuple(cuts), tuple(values))]

    def dump(self) -> dict:
        return {
            "kind": self.KIND,
            "breakpoints": [encode_real(b) for b in self.breakpoints],
            "values": list(self.values),
        }


@dataclass(frozen=True)
class Atom(MeasureComponent):
    location: float
    weight: float
    KIND = "atom"

    def __post_init__(self):
        if math.isinf(self.location) or math.isnan(self.location):
            raise MeasureException("atom location must be finite")
        if not (self.weight > 0) or math.isinf(self.weight):
            raise MeasureException("atom mass must be positive and finite")

    def integrate(self, g: PiecewiseLinear, interval: Interval, tol: float) -> Approx:
        if not interval.contains(self.location):
            return Approx(0.0)
        return Approx(g(self.location) * self.weight)

    def cover(self) -> List[Interval]:
        return []

    def structure_points(self) -> List[float]:
        return [self.location]

    def scaled(self, factor: float) -> "Atom":
        return Atom(self.location, self.weight * factor)

    def times_indicator(self, keep: IntervalSet) -> List[MeasureComponent]:
        return [self] if keep.contains(self.location) else []

    @property
    def is_atomless(self) -> bool:
        return False

    @property
    def is_absolutely_continuous(self) -> bool:
        return False

    def dump(self) -> dict:
        return {"kind": self.KIND, "location": self.location, "mass": self.weight}


@dataclass(frozen=True)
class CantorCopy(MeasureComponent):
    """
    The standard Cantor measure mapped affinely onto a closed bounded support, with total mass `weight`.

    Integrals descend the self-similar tree of nodes (closed thirds), with node ends kept as exact Fractions.
    A node fully inside the integration range, on which the integrand is affine, contributes
    exactly weight(node)·g(midpoint) by the symmetry of the Cantor measure.
    """
    support: Interval
    weight: float
    KIND = "cantor"

    def __post_init__(self):
        if not self.support.is_bounded or self.support.is_degenerate:
            raise MeasureException("cantor copy needs a bounded non-degenerate support")
        if not (self.weight > 0) or math.isinf(self.weight):
            raise MeasureException("cantor weight must be positive and finite")

    def _depth_for(self, scale: float, tol: float, uncertain_chains: int) -> int:
        if scale <= 0:
            return 0
        wanted = math.ceil(math.log2(max(uncertain_chains, 1) * scale / tol)) + 1
        return max(1, min(wanted, config.CANTOR_MAX_DEPTH))

    def integrate(self, g: PiecewiseLinear, interval: Interval, tol: float) -> Approx:
        lo, hi = Fraction(self.support.lo), Fraction(self.support.hi)
        region_lo, region_hi = max(self.support.lo, interval.lo), min(self.support.hi, interval.hi)
        if region_lo >= region_hi:
            return Approx(0.0)

        inner_knots = [Fraction(k) for k in g.knots if self.support.lo < k < self.support.hi]
        depth = self._depth_for(self.weight * g.max_abs_on(region_lo, region_hi), tol, 2 + len(inner_knots))

        values: List[float] = []
        errors: List[float] = []
        stack = [(lo, hi, self.weight, 0)]
        while stack:
            u, v, w, level = stack.pop()
            if v <= interval.lo or u >= interval.hi:
                continue

            inside = interval.lo <= u and v <= interval.hi
            affine = not any(u < k < v for k in inner_knots)
            if inside and affine:
                values.append(w * g(float((u + v) / 2)))
                continue

            if level >= depth:
                a, b = float(max(u, Fraction(region_lo))), float(min(v, Fraction(region_hi)))
                g_min, g_max = g.range_on(a, b)
                if inside:
                    low, high = w * g_min, w * g_max
                else:
                    low, high = min(0.0, w * g_min), max(0.0, w * g_max)
                values.append((low + high) / 2)
                errors.append((high - low) / 2)
                continue

            third = (v - u) / 3
            stack.append((u, u + third, w / 2, level + 1))
            stack.append((v - third, v, w / 2, level + 1))

        return Approx(math.fsum(values), math.fsum(errors))

    def cover(self) -> List[Interval]:
        return []

    def structure_points(self) -> List[float]:
        return [self.support.lo, self.support.hi]

    def scaled(self, factor: float) -> "CantorCopy":
        return CantorCopy(self.support, self.weight * factor)

    def sub_copies(self, keep: IntervalSet) -> List["CantorCopy"]:
        """
        Split 1_keep·(this copy) into whole sub-copies (self-similar nodes).

        Raises:
            UnsupportedOperation when a boundary of keep never separates the nodes within the depth limit.
        """
        copies: List[CantorCopy] = []
        stack = [(Fraction(self.support.lo), Fraction(self.support.hi), self.weight, 0)]
        while stack:
            u, v, w, level = stack.pop()
            node = Interval.closed(float(u), float(v))
            if any(piece.closure().lo <= u and v <= piece.closure().hi for piece in keep):
                copies.append(CantorCopy(node, w))
                continue
            if all(v <= piece.lo or u >= piece.hi for piece in keep):
                continue
            if level >= config.CANTOR_MAX_DEPTH:
                raise UnsupportedOperation(
                    f"restricting the Cantor copy on {self.support} to {keep} does not resolve into sub-copies"
                )
            third = (v - u) / 3
            stack.append((v - third, v, w / 2, level + 1))
            stack.append((u, u + third, w / 2, level + 1))

        return sorted(copies, key=lambda copy: copy.support.lo)

    def times_indicator(self, keep: IntervalSet) -> List[MeasureComponent]:
        return list(self.sub_copies(keep))

    @property
    def is_absolutely_continuous(self) -> bool:
        return False

    def dump(self) -> dict:
        return {"kind": self.KIND, "support": self.support.dump(), "weight": self.weight}


@dataclass(frozen=True)
class RationalWindows(MeasureComponent):
    """
    density·1_G(y)dy where G is the union of the windows (r_n − 2^-(n+1), r_n + 2^-(n+1)) around the
    enumerated positive rationals r_n. With `signed`, odd windows sit at +r_⌈n/2⌉ and even ones at −r_⌈n/2⌉.
    count_cutoff=None keeps every window.
    """
    count_cutoff: Optional[int] = None
    signed: bool = False
    density: float = 1.0
    KIND = "rational_windows"

    # Windows beyond this count, or too narrow to resolve in floats, are bounded by the geometric tail.
    MAX_WINDOWS = 400

    def __post_init__(self):
        if self.count_cutoff is not None and self.count_cutoff < 1:
            raise MeasureException("rational windows cutoff must be a positive integer")
        if not (self.density > 0) or math.isinf(self.density):
            raise MeasureException("rational windows density must be positive and finite")

    def center(self, n: int) -> float:
        if not self.signed:
            return float(nth_positive_rational(n))
        rational = float(nth_positive_rational((n + 1) // 2))
        return rational if n % 2 == 1 else -rational

    def window(self, n: int) -> Interval:
        center, radius = self.center(n), 2.0 ** -(n + 1)
        return Interval.open(center - radius, center + radius)

    def _limit(self) -> int:
        limit = self.count_cutoff if self.count_cutoff is not None else self.MAX_WINDOWS
        return min(limit, _resolvable_windows(self.signed))

    def union(self, count: int) -> IntervalSet:
        return _window_union(self.signed, min(count, self._limit()))

    def tail_mass(self, count: int) -> float:
        """
        Upper bound of the Lebesgue mass of windows count+1, count+2, ... (without the density factor).
        """
        if self.count_cutoff is not None:
            if count >= self.count_cutoff:
                return 0.0
            return 2.0 ** -count - 2.0 ** -self.count_cutoff
        return 2.0 ** -count

    def hull(self) -> Interval:
        if self.count_cutoff is not None:
            pieces = self.union(self.count_cutoff).pieces
            return Interval.open(pieces[0].lo, pieces[-1].hi)
        if self.signed:
            return Interval.real_line()
        return Interval.open(0.0, INF)

    def mass(self, interval: Interval, tol: float) -> Approx:
        count = min(max(1, math.ceil(math.log2(self.density / tol))), self._limit())
        covered = self.union(count).intersection(interval).length
        tail = min(self.tail_mass(count), interval.length - covered)
        return Approx(self.density * (covered + tail / 2), self.density * tail / 2)

    def integrate(self, g: PiecewiseLinear, interval: Interval, tol: float) -> Approx:
        # |g(y)| ≤ A + L|y| and every point of window n satisfies |y| ≤ n + 1.
        offset, slope = abs(g(0.0)), g.max_abs_slope

        def tail_bound(count: int) -> float:
            if self.tail_mass(count) == 0:
                return 0.0
            return self.density * (offset + slope * (count + 3)) * 2.0 ** -count

        count = 1
        while tail_bound(count) > tol and count < self._limit():
            count += 1
        tail = tail_bound(count)
        if tail > tol:
            log.debug(f"rational windows tail {tail:.3g} stays above tol {tol:.3g} at {count} windows")

        total = ExtendedSum()
        for piece in self.union(count).intersection(interval):
            for a, b, alpha, beta in g.pieces(piece.lo, piece.hi):
                total.add_linear_integral(self.density, alpha, beta, a, b)
        covered = total.result()

        if g.range_on(interval.lo, interval.hi)[0] >= 0:
            return Approx(covered.value + tail / 2, covered.error + tail / 2)
        return Approx(covered.value, covered.error + tail)

    def cover(self) -> List[Interval]:
        if self.count_cutoff is not None:
            return list(self.union(self.count_cutoff).pieces)
        return [self.hull()]

    def structure_points(self) -> List[float]:
        if self.count_cutoff is not None:
            return [b for piece in self.union(self.count_cutoff) for b in (piece.lo, piece.hi)]
        return []

    def scaled(self, factor: float) -> "RationalWindows":
        return replace(self, density=self.density * factor)

    def times_indicator(self, keep: IntervalSet) -> List[MeasureComponent]:
        hull = self.hull()
        if any(piece.contains_interval(hull) for piece in keep):
            return [self]
        overlapping = [piece.intersect(hull) for piece in keep]
        if all(part is None or part.is_degenerate for part in overlapping):
            return []
        raise UnsupportedOperation(f"rational windows restricted to {keep} are not representable")

    def dump(self) -> dict:
        return {
            "kind": self.KIND,
            "count_cutoff": self.count_cutoff,
            "signed": self.signed,
            "density": self.density,
        }


def _power_integral(exponent: float, w1: float, w2: float) -> float:
    # ∫_{w1}^{w2} w^exponent dw for 0 ≤ w1 < w2 ≤ inf, possibly +inf
    if w1 >= w2:
        return 0.0
    if exponent == -1:
        if w1 == 0 or math.isinf(w2):
            return INF
        return math.log(w2 / w1)
    power = exponent + 1
    if w1 == 0 and power < 0:
        return INF
    if math.isinf(w2):
        return INF if power > 0 else w1 ** power / -power
    low = 0.0 if w1 == 0 else w1 ** power
    return (w2 ** power - low) / power


@dataclass(frozen=True)
class PowerDensity(MeasureComponent):
    """
    Density coefficient·|x − anchor|^exponent on (lo, hi), with the anchor outside the open piece.
    Integrals are closed-form and may be certified infinite near the anchor or towards infinity.
    """
    anchor: float
    exponent: float
    coefficient: float
    lo: float
    hi: float
    KIND = "power"

    def __post_init__(self):
        if math.isinf(self.anchor) or math.isnan(self.anchor) or math.isinf(self.exponent):
            raise MeasureException("power density anchor and exponent must be finite")
        if not (self.coefficient > 0) or math.isinf(self.coefficient):
            raise MeasureException("power density coefficient must be positive and finite")
        if not self.lo < self.hi:
            raise MeasureException("power density piece must be non-empty")
        if self.lo < self.anchor < self.hi:
            raise MeasureException("power density anchor must lie outside its piece")

    @property
    def orientation(self) -> int:
        # +1 when the piece lies right of the anchor
        return 1 if self.anchor <= self.lo else -1

    def _add_piece(self, total: ExtendedSum, alpha: float, beta: float, u: float, v: float):
        sigma = self.orientation
        # in w = |x − anchor|: alpha + beta·x = a0 + b0·w
        a0, b0 = alpha + beta * self.anchor, beta * sigma
        w1, w2 = (u - self.anchor, v - self.anchor) if sigma > 0 else (self.anchor - v, self.anchor - u)
        p = self.exponent

        diverging = False
        if w1 == 0:
            if a0 != 0 and p <= -1:
                total.add_diverging(_sign(a0))
                diverging = True
            elif a0 == 0 and b0 != 0 and p + 1 <= -1:
                total.add_diverging(_sign(b0))
                diverging = True
        if math.isinf(w2):
            if b0 != 0 and p + 1 >= -1:
                total.add_diverging(_sign(b0))
                diverging = True
            elif b0 == 0 and a0 != 0 and p >= -1:
                total.add_diverging(_sign(a0))
                diverging = True
        if diverging:
            return

        part = 0.0
        if a0 != 0:
            part += a0 * _power_integral(p, w1, w2)
        if b0 != 0:
            part += b0 * _power_integral(p + 1, w1, w2)
        total.add(self.coefficient * part)

    def integrate(self, g: PiecewiseLinear, interval: Interval, tol: float) -> Approx:
        total = ExtendedSum()
        u, v = max(self.lo, interval.lo), min(self.hi, interval.hi)
        for a, b, alpha, beta in g.pieces(u, v):
            self._add_piece(total, alpha, beta, a, b)
        return total.result()

    def density_at(self, x: float) -> float:
        if not self.lo < x < self.hi:
            return 0.0
        return self.coefficient * abs(x - self.anchor) ** self.exponent

    def cover(self) -> List[Interval]:
        return [Interval.open(self.lo, self.hi)]

    def structure_points(self) -> List[float]:
        return [b for b in (self.lo, self.hi) if not math.isinf(b)]

    def scaled(self, factor: float) -> "PowerDensity":
        return replace(self, coefficient=self.coefficient * factor)

    def times_indicator(self, keep: IntervalSet) -> List[MeasureComponent]:
        parts = []
        for piece in keep:
            u, v = max(self.lo, piece.lo), min(self.hi, piece.hi)
            if u < v:
                parts.append(replace(self, lo=u, hi=v))
        return parts

    def dump(self) -> dict:
        return {
            "kind": self.KIND,
            "anchor": self.anchor,
            "exponent": self.exponent,
            "coefficient": self.coefficient,
            "lo": encode_real(self.lo),
            "hi": encode_real(self.hi),
        }


_KIND_ORDER = {
    LebesgueDensity.KIND: 0,
    PowerDensity.KIND: 1,
    RationalWindows.KIND: 2,
    CantorCopy.KIND: 3,
    Atom.KIND: 4,
}


##########
# Radon measures
##########
@dataclass(frozen=True)
class RadonMeasure:
    """
    A finite formal sum of measure components.
    """
    components: Tuple[MeasureComponent, ...] = ()

    @classmethod
    def zero(cls) -> "RadonMeasure":
        return cls(())

    @classmethod
    def of(cls, *components: MeasureComponent) -> "RadonMeasure":
        return cls(tuple(components))

    @classmethod
    def lebesgue(cls, lo: float = -INF, hi: float = INF, density: float = 1.0) -> "RadonMeasure":
        return cls((LebesgueDensity.uniform(lo, hi, density), ))

    def __iter__(self) -> Iterator[MeasureComponent]:
        return iter(self.components)

    def __len__(self):
        return len(self.components)

    @property
    def is_zero(self) -> bool:
        return len(self.components) == 0

    @property
    def is_atomless(self) -> bool:
        return all(component.is_atomless for component in self.components)

    def atoms(self) -> List[Atom]:
        return [component for component in self.components if isinstance(component, Atom)]

    def without_atoms(self) -> "RadonMeasure":
        return RadonMeasure(tuple(c for c in self.components if not isinstance(c, Atom)))

    def structure_points(self) -> List[float]:
        return sorted({b for component in self.components for b in component.structure_points()})

    def mass(self, interval: Interval, tol: float) -> Approx:
        if tol <= 0:
            raise MeasureException("tolerance must be positive")
        total = ExtendedSum()
        share = tol / max(1, len(self.components))
        for component in self.components:
            total.add_approx(component.mass(interval, share))
        return total.result()

    def integrate_kernel(self, g: PiecewiseLinear, interval: Interval, tol: float) -> Approx:
        if tol <= 0:
            raise MeasureException("tolerance must be positive")
        total = ExtendedSum()
        share = tol / max(1, len(self.components))
        for component in self.components:
            total.add_approx(component.integrate(g, interval, share))
        return total.result()

    def cover(self) -> List[Interval]:
        return [piece for component in self.components for piece in component.cover()]

    def support_gaps(self, interval: Interval) -> IntervalSet:
        """
        Open subintervals of `interval` that carry no mass (maximal ones).
        """
        covered = canonicalize([piece.closure() for piece in self.cover()])
        gaps = covered.complement_within(interval)
        return IntervalSet(tuple(gap for gap in gaps if not gap.is_degenerate))

    def check_radon(self, interval: Interval):
        """
        Raises MeasureException when some compact subinterval of `interval` would carry infinite mass.
        Only power densities anchored inside the interval can do that.
        """
        for component in self.components:
            if isinstance(component, PowerDensity) and component.exponent <= -1 \
                    and interval.contains(component.anchor) \
                    and component.anchor in (component.lo, component.hi):
                raise MeasureException(
                    f"power density anchored at {component.anchor} has infinite mass near a point of {interval}"
                )

    def scaled(self, factor: float) -> "RadonMeasure":
        if factor < 0:
            raise MeasureException("measures can only be scaled by nonnegative factors")
        if factor == 0:
            return RadonMeasure.zero()
        return RadonMeasure(tuple(component.scaled(factor) for component in self.components))

    def plus(self, other: "RadonMeasure") -> "RadonMeasure":
        return RadonMeasure(self.components + other.components)

    def times_indicator(self, keep: IntervalSet) -> "RadonMeasure":
        return RadonMeasure(tuple(
            part for component in self.components for part in component.times_indicator(keep)
        ))

    def canonical(self) -> "RadonMeasure":
        """
        A normal form: like components merged, Lebesgue pieces summed and trimmed, a fixed component order.
        Two measures are taken as equal exactly when their canonical forms are.
        """
        lebesgue = [c for c in self.components if isinstance(c, LebesgueDensity)]
        merged: List[MeasureComponent] = []

        if lebesgue:
            cuts = sorted({b for c in lebesgue for b in c.breakpoints})
            values = [
                math.fsum(c.density_at(representative_point(lo, hi)) for c in lebesgue)
                for lo, hi in zip(cuts, cuts[1:])
            ]
            # merge equal neighbours
            kept_cuts, kept_values = [cuts[0]], []
            for cut, value in zip(cuts[1:], values):
                if kept_values and kept_values[-1] == value:
                    kept_cuts[-1] = cut
                else:
                    kept_values.append(value)
                    kept_cuts.append(cut)
            while kept_values and kept_values[0] == 0:
                kept_values.pop(0)
                kept_cuts.pop(0)
            while kept_values and kept_values[-1] == 0:
                kept_values.pop()
                kept_cuts.pop()
            if kept_values:
                merged.append(LebesgueDensity(tuple(kept_cuts), tuple(kept_values)))

        grouped: Dict[Tuple, MeasureComponent] = {}
        for component in self.components:
            if isinstance(component, Atom):
                key, amount = (Atom.KIND, component.location), component.weight
            elif isinstance(component, CantorCopy):
                key, amount = (CantorCopy.KIND, component.support), component.weight
            elif isinstance(component, PowerDensity):
                key = (PowerDensity.KIND, component.anchor, component.exponent, component.lo, component.hi)
                amount = component.coefficient
            elif isinstance(component, RationalWindows):
                key, amount = (RationalWindows.KIND, component.count_cutoff, component.signed), component.density
            else:
                continue

            if key in grouped:
                previous = grouped[key]
                grouped[key] = previous.scaled((_amount_of(previous) + amount) / _amount_of(previous))
            else:
                grouped[key] = component

        merged.extend(grouped.values())
        merged.sort(key=lambda c: (_KIND_ORDER[c.KIND], json.dumps(c.dump(), sort_keys=True)))
        return RadonMeasure(tuple(merged))

    def same_as(self, other: "RadonMeasure") -> bool:
        return self.canonical().dump() == other.canonical().dump()

    def dump(self) -> dict:
        return {"components": [component.dump() for component in self.components]}

    def __str__(self):
        if self.is_zero:
            return "0"
        return " + ".join(component.KIND for component in self.components)


def _amount_of(component: MeasureComponent) -> float:
    if isinstance(component, Atom):
        return component.weight
    if isinstance(component, CantorCopy):
        return component.weight
    if isinstance(component, PowerDensity):
        return component.coefficient
    if isinstance(component, RationalWindows):
        return component.density
    raise MeasureException(f"no scalar amount for {component.KIND}")


##########
# Module-level operations
##########
def mass(mu: RadonMeasure, interval: Interval, tol: float) -> Approx:
    return mu.mass(interval, tol)


def integrate_kernel(mu: RadonMeasure, g: PiecewiseLinear, interval: Interval, tol: float) -> Approx:
    """
    Certified ∫_interval g dμ for a continuous piecewise-linear g.
    Exact (error 0) when μ only has Lebesgue, power and atom components.

    Raises:
        NonIntegrableException when the integral has both a +inf and a -inf part.
    """
    return mu.integrate_kernel(g, interval, tol)


def is_fully_supported(mu: RadonMeasure, interval: Interval) -> bool:
    """
    True iff every open subinterval of `interval` has positive μ-mass, decided from component supports.
    """
    if interval.is_degenerate:
        return any(atom.location == interval.lo for atom in mu.atoms())
    return mu.support_gaps(interval).is_empty


def integrate_bounded(
        mu: RadonMeasure,
        bounds: Callable[[float, float], Tuple[float, float]],
        interval: Interval,
        tol: float,
        max_cells: Optional[int] = None,
) -> Approx:
    """
    Certified ∫_interval f dμ for an integrand known only through enclosures.

    Args:
        mu:
            The measure.
        bounds:
            bounds(u, v) returns (low, high) with low ≤ f ≤ high on [u, v]; called with u == v at atoms.
        interval:
            Bounded integration range.
        tol:
            Target error. Refinement stops early (with a warning) when the cell budget runs out.
        max_cells:
            Cell budget, defaults to Tolerances.max_refinement_cells.

    Returns:
        Approx whose error covers both the enclosure widths and the mass errors.
    """
    if not interval.is_bounded:
        raise UnsupportedOperation(f"cell refinement needs a bounded range, got {interval}")
    max_cells = max_cells or config.MAX_REFINEMENT_CELLS

    total = ExtendedSum()
    for atom in mu.atoms():
        if interval.contains(atom.location):
            low, high = bounds(atom.location, atom.location)
            total.add(atom.weight * (low + high) / 2, atom.weight * (high - low) / 2)

    diffuse = mu.without_atoms()
    if diffuse.is_zero or interval.is_degenerate:
        return total.result()

    cell_tol = tol / (4 * max_cells)

    def evaluate(u: float, v: float) -> Tuple[float, float]:
        cell_mass = diffuse.mass(Interval.open(u, v), cell_tol)
        if cell_mass.upper <= 0:
            return 0.0, 0.0
        m_low, m_high = max(0.0, cell_mass.lower), cell_mass.upper
        low, high = bounds(u, v)
        corners = [low * m_low, low * m_high, high * m_low, high * m_high]
        return (min(corners) + max(corners)) / 2, (max(corners) - min(corners)) / 2

    cuts = [interval.lo] + [b for b in diffuse.structure_points() if interval.lo < b < interval.hi] + [interval.hi]
    heap: List[Tuple[float, float, float, float]] = []
    for u, v in zip(cuts, cuts[1:]):
        value, error = evaluate(u, v)
        heapq.heappush(heap, (-error, u, v, value))

    total_error = math.fsum(-entry[0] for entry in heap)
    while total_error > tol / 2 and len(heap) < max_cells:
        negative_error, u, v, value = heapq.heappop(heap)
        middle = (u + v) / 2
        if negative_error == 0 or not u < middle < v:
            heapq.heappush(heap, (negative_error, u, v, value))
            break
        total_error += negative_error
        for a, b in ((u, middle), (middle, v)):
            part_value, part_error = evaluate(a, b)
            heapq.heappush(heap, (-part_error, a, b, part_value))
            total_error += part_error

    if total_error > tol / 2:
        log.warning(f"Refinement budget of {max_cells} cells exhausted on {interval}, error {total_error:.3g}.")

    for negative_error, _, _, value in heap:
        total.add(value, -negative_error)
    return total.result()


def components_of_kind(mu: RadonMeasure, kinds: Iterable[type]) -> List[MeasureComponent]:
    kinds = tuple(kinds)
    return [component for component in mu if isinstance(component, kinds)]
