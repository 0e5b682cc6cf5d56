import logging
import math
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Tuple, Union

from .configuration import config
from .exception import (
    FormFunctionException,
    MeasureException,
    MismatchedBase,
    NonIntegrableException,
    ScaleException,
    UnsupportedOperation,
)
from .measure import (
    INF,
    Approx,
    BorelSet,
    CantorCopy,
    ExtendedSum,
    Interval,
    IntervalSet,
    LebesgueDensity,
    MeasureComponent,
    PiecewiseLinear,
    PowerDensity,
    RadonMeasure,
    RationalWindows,
    integrate_bounded,
    is_fully_supported,
    representative_point,
)
from .scale import ScaleFunction, restrict_scale
from .utilities import encode_real
from .verdict import TriBool, Verdict

log = logging.getLogger(__name__)


class Side(Enum):
    LEFT = "left"
    RIGHT = "right"

    def endpoint(self, interval: Interval) -> float:
        return interval.lo if self is Side.LEFT else interval.hi

    def is_included(self, interval: Interval) -> bool:
        return interval.lo_included if self is Side.LEFT else interval.hi_included


class Variant(Enum):
    FULL = "full"
    ZERO_BOUNDARY = "zero_boundary"


@dataclass(frozen=True)
class DiffusionSpec:
    """
    A one-dimensional diffusion as the triple (s, m, k) on an interval I.
    m must charge every open subinterval of I; k may be zero (then the form is strongly local).
    """
    interval: Interval
    s: ScaleFunction
    m: RadonMeasure
    k: RadonMeasure = RadonMeasure()
    name: str = ""

    def __post_init__(self):
        if self.s.domain != self.interval:
            raise ScaleException(f"scale lives on {self.s.domain}, not on {self.interval}")
        self.m.check_radon(self.interval)
        self.k.check_radon(self.interval)
        if not is_fully_supported(self.m, self.interval):
            gaps = self.m.support_gaps(self.interval)
            raise MeasureException(f"speed measure has no mass on {gaps.pieces[0] if gaps.pieces else self.interval}")

    @property
    def is_strongly_local(self) -> bool:
        return self.k.canonical().is_zero

    def with_scale(self, s: ScaleFunction) -> "DiffusionSpec":
        return replace(self, s=s)

    def affine(self, factor: float, shift: float = 0.0) -> "DiffusionSpec":
        return replace(self, s=self.s.affine(factor, shift))

    def __str__(self):
        return f"<DiffusionSpec {self.name or '?'} on {self.interval}: ds={self.s.ds}, m={self.m}, k={self.k}>"


##########
# Form functions
##########
@dataclass(frozen=True)
class StepFunction:
    """
    values[i] on (breakpoints[i], breakpoints[i+1]), zero outside. Outer breakpoints may be infinite.
    """
    breakpoints: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        if len(self.breakpoints) < 2 or len(self.values) != len(self.breakpoints) - 1:
            raise FormFunctionException("step function needs one value per piece between breakpoints")
        if any(b <= a for a, b in zip(self.breakpoints, self.breakpoints[1:])):
            raise FormFunctionException("step function breakpoints must be strictly increasing")
        if any(math.isinf(v) or math.isnan(v) for v in self.values):
            raise FormFunctionException("step function values must be finite")

    @classmethod
    def constant(cls, value: float) -> "StepFunction":
        return cls((-INF, INF), (float(value), ))

    @classmethod
    def zero(cls) -> "StepFunction":
        return cls.constant(0.0)

    @classmethod
    def indicator(cls, intervals: List[Tuple[float, float]]) -> "StepFunction":
        cuts = sorted({-INF, INF, *(b for piece in intervals for b in piece)})
        values = tuple(
            1.0 if any(lo <= representative_point(a, b) <= hi for lo, hi in intervals) else 0.0
            for a, b in zip(cuts, cuts[1:])
        )
        return cls(tuple(cuts), values)

    def pieces(self) -> Iterator[Tuple[float, float, float]]:
        return zip(self.breakpoints, self.breakpoints[1:], self.values)

    def value_at(self, x: float) -> float:
        for lo, hi, value in self.pieces():
            if lo <= x < hi:
                return value
        return 0.0

    @property
    def is_zero(self) -> bool:
        return all(v == 0 for v in self.values)

    @property
    def max_abs(self) -> float:
        return max(abs(v) for v in self.values)

    def _combine(self, other: "StepFunction", operation) -> "StepFunction":
        cuts = sorted(set(self.breakpoints) | set(other.breakpoints))
        values = []
        for lo, hi in zip(cuts, cuts[1:]):
            point = representative_point(lo, hi)
            values.append(operation(self.value_at(point), other.value_at(point)))
        return StepFunction(tuple(cuts), tuple(values))

    def __add__(self, other: "StepFunction") -> "StepFunction":
        return self._combine(other, lambda a, b: a + b)

    def times(self, other: "StepFunction") -> "StepFunction":
        return self._combine(other, lambda a, b: a * b)

    def scaled(self, factor: float) -> "StepFunction":
        return StepFunction(self.breakpoints, tuple(v * factor for v in self.values))

    def dump(self) -> dict:
        return {
            "breakpoints": [encode_real(b) for b in self.breakpoints],
            "values": list(self.values),
        }


@dataclass(frozen=True)
class FormFunction:
    """
    A function u of the form domain, written through its component-wise densities du/ds:

        u(x) = base_val + Σ_i ∫ coeffs[i] d(ds component i) between base_x and x
    """
    scale: ScaleFunction
    base_x: float
    base_val: float
    coeffs: Tuple[StepFunction, ...]

    def __post_init__(self):
        if len(self.coeffs) != len(self.scale.ds):
            raise FormFunctionException(
                f"{len(self.coeffs)} coefficients given for {len(self.scale.ds)} scale components"
            )
        if math.isinf(self.base_x) or not self.scale.domain.closure().contains(self.base_x):
            raise FormFunctionException(f"base point {self.base_x} is outside of {self.scale.domain}")

    @classmethod
    def from_coefficients(
            cls, scale: ScaleFunction, coeffs: List[StepFunction],
            base_val: float = 0.0, base_x: Optional[float] = None,
    ) -> "FormFunction":
        return cls(scale, scale.base_x if base_x is None else base_x, base_val, tuple(coeffs))

    @classmethod
    def of_scale(cls, scale: ScaleFunction) -> "FormFunction":
        """
        u = s.
        """
        return cls(scale, scale.base_x, scale.base_val, tuple(StepFunction.constant(1.0) for _ in scale.ds))

    @classmethod
    def constant(cls, scale: ScaleFunction, value: float) -> "FormFunction":
        return cls(scale, scale.base_x, value, tuple(StepFunction.zero() for _ in scale.ds))

    @classmethod
    def component_indicator(cls, scale: ScaleFunction, index: int, base_val: float = 0.0) -> "FormFunction":
        """
        The cumulative of one scale component, e.g. the Cantor function for the Cantor component of x + c(x).
        """
        coeffs = tuple(
            StepFunction.constant(1.0 if position == index else 0.0) for position in range(len(scale.ds))
        )
        return cls(scale, scale.base_x, base_val, coeffs)

    def increment(self, lo: float, hi: float, tol: Optional[float] = None) -> Approx:
        """
        u(hi) - u(lo) for lo ≤ hi.
        """
        tol = tol or config.DEFAULT_TOL
        terms = [
            (component, value, max(lo, piece_lo), min(hi, piece_hi))
            for component, coeff in zip(self.scale.ds, self.coeffs)
            for piece_lo, piece_hi, value in coeff.pieces()
            if value != 0 and max(lo, piece_lo) < min(hi, piece_hi)
        ]
        total = ExtendedSum()
        for component, value, a, b in terms:
            share = tol / (len(terms) * abs(value))
            total.add_approx(component.mass(Interval.open(a, b), share) * value)
        return total.result()

    def eval(self, x: float, tol: Optional[float] = None) -> Approx:
        if x == self.base_x:
            return Approx(self.base_val)
        if x > self.base_x:
            return self.base_val + self.increment(self.base_x, x, tol)
        return self.base_val - self.increment(x, self.base_x, tol)

    def breakpoints(self) -> List[float]:
        domain = self.scale.domain
        points = {self.base_x}
        points.update(b for coeff in self.coeffs for b in coeff.breakpoints if domain.lo < b < domain.hi)
        points.update(b for b in self.scale.ds.structure_points() if domain.lo < b < domain.hi)
        return sorted(points)

    @property
    def is_piecewise_linear(self) -> bool:
        return self.scale.is_piecewise_linear

    def as_piecewise_linear(self) -> PiecewiseLinear:
        """
        u as an exact piecewise-linear function of x (only over Lebesgue scales).
        """
        if not self.is_piecewise_linear:
            raise FormFunctionException("form function over a singular scale is not piecewise linear")
        domain = self.scale.domain
        knots = sorted(set(self.breakpoints()) | {b for b in (domain.lo, domain.hi) if not math.isinf(b)})
        values = [self.eval(k).value for k in knots]

        def slope_at(x: float) -> float:
            return math.fsum(
                coeff.value_at(x) * component.density_at(x)
                for component, coeff in zip(self.scale.ds, self.coeffs)
            )

        return PiecewiseLinear(tuple(knots), tuple(values), slope_at(knots[0] - 1.0), slope_at(knots[-1] + 1.0))

    def dump(self) -> dict:
        return {
            "base_x": encode_real(self.base_x),
            "base_val": self.base_val,
            "coeffs": [coeff.dump() for coeff in self.coeffs],
        }


def _regions(component: MeasureComponent) -> List[Interval]:
    if isinstance(component, CantorCopy):
        return [component.support.interior()]
    return component.cover()


def _overlap(first: Interval, second: Interval) -> Optional[Interval]:
    common = first.intersect(second)
    if common is None or common.is_degenerate:
        return None
    return common


def check_overlapping_coefficients(u: FormFunction):
    """
    Absolutely continuous components (and Cantor copies) that overlap must carry the same coefficient there,
    otherwise du/ds is not the component-wise coefficient.

    Raises:
        FormFunctionException naming the components and the overlap.
    """
    components = list(u.scale.ds)
    for i, first in enumerate(components):
        for j in range(i + 1, len(components)):
            second = components[j]
            both_ac = first.is_absolutely_continuous and second.is_absolutely_continuous
            both_cantor = isinstance(first, CantorCopy) and isinstance(second, CantorCopy)
            if not (both_ac or both_cantor):
                continue

            for region_a in _regions(first):
                for region_b in _regions(second):
                    common = _overlap(region_a, region_b)
                    if common is None:
                        continue
                    difference = u.coeffs[i]._combine(u.coeffs[j], lambda a, b: a - b)
                    for lo, hi, value in difference.pieces():
                        if value != 0 and _overlap(Interval.open(lo, hi), common) is not None:
                            raise FormFunctionException(
                                f"coefficients of components {i} and {j} differ on {common}"
                            )


##########
# Energy
##########
def _quadratic_integral(total: ExtendedSum, factor: float, first: Tuple[float, float],
                        second: Tuple[float, float], lo: float, hi: float):
    # factor·∫ (a1 + b1 x)(a2 + b2 x) dx over (lo, hi)
    (a1, b1), (a2, b2) = first, second
    c0, c1, c2 = a1 * a2, a1 * b2 + a2 * b1, b1 * b2
    if lo >= hi or factor == 0:
        return
    if not (math.isinf(lo) or math.isinf(hi)):
        total.add(factor * (c0 * (hi - lo) + c1 * (hi ** 2 - lo ** 2) / 2 + c2 * (hi ** 3 - lo ** 3) / 3))
        return

    def sign_towards(direction: int) -> int:
        for coefficient, parity in ((c2, 1), (c1, direction), (c0, 1)):
            if coefficient != 0:
                return (1 if coefficient * parity > 0 else -1)
        return 0

    if math.isinf(hi):
        total.add_diverging(sign_towards(1))
    if math.isinf(lo):
        total.add_diverging(sign_towards(-1))


def _killing_energy(spec: DiffusionSpec, u: FormFunction, v: FormFunction, tol: float) -> Approx:
    killing = spec.k
    if killing.is_zero:
        return Approx(0.0)

    total = Approx(0.0)
    atoms = [atom for atom in killing.atoms() if spec.interval.contains(atom.location)]
    for atom in atoms:
        share = tol / (4 * len(atoms))
        total += u.eval(atom.location, share) * v.eval(atom.location, share) * atom.weight

    diffuse = [component for component in killing.without_atoms()]
    lebesgue = [component for component in diffuse if isinstance(component, LebesgueDensity)]
    others = [component for component in diffuse if not isinstance(component, LebesgueDensity)]

    if lebesgue and u.is_piecewise_linear and v.is_piecewise_linear:
        u_linear, v_linear = u.as_piecewise_linear(), v.as_piecewise_linear()
        exact = ExtendedSum()
        for component in lebesgue:
            for lo, hi, density in component.pieces():
                lo, hi = max(lo, spec.interval.lo), min(hi, spec.interval.hi)
                cuts = sorted({lo, hi, *(k for k in u_linear.knots + v_linear.knots if lo < k < hi)})
                for a, b in zip(cuts, cuts[1:]):
                    point = representative_point(a, b)
                    _quadratic_integral(exact, density, u_linear.segment(point), v_linear.segment(point), a, b)
        total += exact.result()
    else:
        others = lebesgue + others

    for component in others:
        total += _refined_product_integral(spec, u, v, component, tol / (2 * max(1, len(others))))

    return total


def _variation_bound(u: FormFunction, lo: float, hi: float) -> float:
    cell = Interval.open(lo, hi)
    return math.fsum(
        coeff.max_abs * component.mass(cell, 1e-3).upper
        for component, coeff in zip(u.scale.ds, u.coeffs)
        if not coeff.is_zero
    )


def _refined_product_integral(
        spec: DiffusionSpec, u: FormFunction, v: FormFunction, component: MeasureComponent, tol: float
) -> Approx:
    support = _regions(component)
    if not support:
        return Approx(0.0)
    low = max(min(piece.lo for piece in support), spec.interval.lo)
    high = min(max(piece.hi for piece in support), spec.interval.hi)
    if low >= high:
        return Approx(0.0)
    if math.isinf(low) or math.isinf(high):
        raise UnsupportedOperation(f"killing integral of a {component.KIND} component over an unbounded range")
    region = Interval.closed(low, high)

    def bounds(a: float, b: float) -> Tuple[float, float]:
        enclosures = []
        for function in (u, v):
            start = function.eval(a, tol)
            spread = _variation_bound(function, a, b) if b > a else 0.0
            enclosures.append((start.lower - spread, start.upper + spread))
        (u_low, u_high), (v_low, v_high) = enclosures
        corners = [u_low * v_low, u_low * v_high, u_high * v_low, u_high * v_high]
        return min(corners), max(corners)

    return integrate_bounded(RadonMeasure.of(component), bounds, region, tol)


def energy(spec: DiffusionSpec, u: FormFunction, v: FormFunction, tol: Optional[float] = None) -> Approx:
    """
    E(u, v) = ∫ (du/ds)(dv/ds) ds + ∫ u·v dk, certified.

    Raises:
        FormFunctionException when u or v is not written over spec.s, or has inconsistent coefficients.
    """
    tol = tol or config.DEFAULT_TOL
    for function in (u, v):
        if function.scale != spec.s:
            raise FormFunctionException("form function is not expressed over the scale of the diffusion")
        check_overlapping_coefficients(function)

    # coefficients are constant out to ±inf; only the part inside I carries energy
    terms = []
    for component, a, b in zip(spec.s.ds, u.coeffs, v.coeffs):
        for lo, hi, value in a.times(b).pieces():
            lo, hi = max(lo, spec.interval.lo), min(hi, spec.interval.hi)
            if value != 0 and lo < hi:
                terms.append((component, lo, hi, value))

    differential = ExtendedSum()
    for component, lo, hi, value in terms:
        share = tol / (2 * len(terms) * abs(value))
        differential.add_approx(component.mass(Interval.open(lo, hi), share) * value)

    return differential.result() + _killing_energy(spec, u, v, tol / 2)


##########
# Boundaries and membership
##########
def regular_boundary(spec: DiffusionSpec, side: Side, tol: Optional[float] = None) -> TriBool:
    """
    An endpoint is regular when it is not in I, s is finite there and m + k is finite near it.
    """
    tol = tol or config.DEFAULT_TOL
    if side.is_included(spec.interval):
        return TriBool.NO

    endpoint = side.endpoint(spec.interval)
    s_value = spec.s.eval(endpoint, tol)
    if s_value.is_infinite:
        return TriBool.NO
    if math.isinf(s_value.error):
        return TriBool.UNKNOWN

    anchor = spec.interval.interior_point()
    near = Interval.open(endpoint, anchor) if side is Side.LEFT else Interval.open(anchor, endpoint)
    nearby_mass = spec.m.mass(near, tol) + spec.k.mass(near, tol)
    if nearby_mass.is_infinite:
        return TriBool.NO
    if not nearby_mass.is_finite:
        return TriBool.UNKNOWN
    return TriBool.YES


def _lebesgue_ratio(
        u_parts: List[Tuple[LebesgueDensity, StepFunction]],
        target: List[MeasureComponent],
) -> Union[StepFunction, Verdict]:
    # du/ds on the Lebesgue part: (Σ coeff·density of u) / (Lebesgue density of ds)
    target_lebesgue = [c for c in target if isinstance(c, LebesgueDensity)]
    target_other_ac = [c for c in target if c.is_absolutely_continuous and not isinstance(c, LebesgueDensity)]

    cuts = {-INF, INF}
    for component, coeff in u_parts:
        cuts.update(component.breakpoints)
        cuts.update(coeff.breakpoints)
    for component in target_lebesgue:
        cuts.update(component.breakpoints)
    for component in target_other_ac:
        cuts.update(b for region in component.cover() for b in (region.lo, region.hi))
    cuts = sorted(cuts)

    ratios = []
    for lo, hi in zip(cuts, cuts[1:]):
        point = representative_point(lo, hi)
        numerator = math.fsum(coeff.value_at(point) * c.density_at(point) for c, coeff in u_parts)
        if numerator == 0:
            ratios.append(0.0)
            continue
        if any(region.contains(point) for c in target_other_ac for region in c.cover()):
            return Verdict.unsupported(f"Lebesgue part of du overlaps a non-Lebesgue density of ds on ({lo}, {hi})")
        denominator = math.fsum(c.density_at(point) for c in target_lebesgue)
        if denominator == 0:
            return Verdict.no(f"du has a Lebesgue part on ({lo}, {hi}) where ds has none")
        ratios.append(numerator / denominator)

    return StepFunction(tuple(cuts), tuple(ratios))


def rewrite_over(u: FormFunction, target: ScaleFunction) -> Union[FormFunction, Verdict]:
    """
    Rewrite du over the components of another scale.

    Returns:
        The rewritten FormFunction, or a no/unsupported Verdict naming the first component that does not fit.
    """
    if u.scale == target:
        return u
    if u.scale.domain != target.domain:
        return Verdict.unsupported(f"form function lives on {u.scale.domain}, the scale on {target.domain}")

    target_components = list(target.ds)
    coeffs = [StepFunction.zero() for _ in target_components]
    lebesgue_parts: List[Tuple[LebesgueDensity, StepFunction]] = []

    for component, coeff in zip(u.scale.ds, u.coeffs):
        if coeff.is_zero:
            continue
        if isinstance(component, LebesgueDensity):
            lebesgue_parts.append((component, coeff))
            continue
        if component in target_components:
            index = target_components.index(component)
            coeffs[index] = coeffs[index] + coeff
            continue

        if isinstance(component, CantorCopy):
            same_support = [
                index for index, candidate in enumerate(target_components)
                if isinstance(candidate, CantorCopy) and candidate.support == component.support
            ]
            if same_support:
                index = same_support[0]
                coeffs[index] = coeffs[index] + coeff.scaled(component.weight / target_components[index].weight)
                continue
            if any(
                    isinstance(candidate, CantorCopy) and _overlap(candidate.support, component.support)
                    for candidate in target_components
            ):
                return Verdict.unsupported(f"Cantor component on {component.support} overlaps a different Cantor copy")
            return Verdict.no(f"Cantor component on {component.support} is not absolutely continuous w.r.t. ds")

        return Verdict.unsupported(f"{component.KIND} component has no identical counterpart in ds")

    if lebesgue_parts:
        ratio = _lebesgue_ratio(lebesgue_parts, target_components)
        if isinstance(ratio, Verdict):
            return ratio
        for index, candidate in enumerate(target_components):
            if isinstance(candidate, LebesgueDensity):
                coeffs[index] = coeffs[index] + ratio

    rewritten = FormFunction(target, u.base_x, u.base_val, tuple(coeffs))
    try:
        check_overlapping_coefficients(rewritten)
    except FormFunctionException as e:
        return Verdict.unsupported(str(e))
    return rewritten


def _power_square_finite(component: PowerDensity, u_linear: PiecewiseLinear) -> bool:
    # ∫ (a + b x)² C|x - anchor|^p over the piece: divergence only at the anchor or at infinity
    p = component.exponent
    for lo, hi, alpha, beta in u_linear.pieces(component.lo, component.hi):
        a0 = alpha + beta * component.anchor
        b0 = beta * component.orientation
        near_anchor = component.anchor in (lo, hi)
        if near_anchor and ((a0 != 0 and p <= -1) or (a0 == 0 and b0 != 0 and p + 2 <= -1)):
            return False
        if math.isinf(lo) or math.isinf(hi):
            if (b0 != 0 and p + 2 >= -1) or (b0 == 0 and a0 != 0 and p >= -1):
                return False
    return True


def square_integrable(u: FormFunction, mu: RadonMeasure, interval: Interval, tol: float) -> TriBool:
    """
    Decide ∫ u² dμ < ∞ over the interval.
    """
    if mu.is_zero:
        return TriBool.YES

    try:
        ends = [u.eval(interval.lo, tol), u.eval(interval.hi, tol)]
    except NonIntegrableException:
        ends = [Approx.infinite()]
    total_mass = mu.mass(interval, tol)
    if all(end.is_finite for end in ends) and total_mass.is_finite:
        return TriBool.YES

    if not u.is_piecewise_linear:
        return TriBool.UNKNOWN

    u_linear = u.as_piecewise_linear()
    for component in mu.without_atoms():
        if isinstance(component, LebesgueDensity):
            squares = ExtendedSum()
            for lo, hi, density in component.pieces():
                lo, hi = max(lo, interval.lo), min(hi, interval.hi)
                for a, b, alpha, beta in u_linear.pieces(lo, hi):
                    _quadratic_integral(squares, density, (alpha, beta), (alpha, beta), a, b)
            if squares.result().is_infinite:
                return TriBool.NO
        elif isinstance(component, PowerDensity):
            if not _power_square_finite(component, u_linear):
                return TriBool.NO
        # Cantor copies have bounded support and window masses decay geometrically

    return TriBool.YES


def membership(spec: DiffusionSpec, u: FormFunction, variant: Variant = Variant.FULL,
               tol: Optional[float] = None) -> Verdict:
    """
    Decide u ∈ F (or F₀ for the zero_boundary variant).

    Clauses, in order: du rewrites over ds; du/ds ∈ L²(ds); u ∈ L²(m + k); u vanishes at regular boundaries.
    """
    tol = tol or config.DEFAULT_TOL
    rewritten = rewrite_over(u, spec.s)
    if isinstance(rewritten, Verdict):
        return rewritten

    for index, (component, coeff) in enumerate(zip(spec.s.ds, rewritten.coeffs)):
        for lo, hi, value in coeff.pieces():
            lo, hi = max(lo, spec.interval.lo), min(hi, spec.interval.hi)
            if value == 0 or lo >= hi:
                continue
            if component.mass(Interval.open(lo, hi), tol).is_infinite:
                return Verdict.no(f"du/ds is not square integrable against component {index} on ({lo}, {hi})")

    for name, measure in (("m", spec.m), ("k", spec.k)):
        decided = square_integrable(rewritten, measure, spec.interval, tol)
        if decided is TriBool.NO:
            return Verdict.no(f"u is not in L²({name})")
        if decided is TriBool.UNKNOWN:
            return Verdict.unsupported(f"could not decide whether u is in L²({name})")

    if variant is Variant.ZERO_BOUNDARY:
        for side in Side:
            regular = regular_boundary(spec, side, tol)
            if regular is TriBool.UNKNOWN:
                return Verdict.unsupported(f"could not decide whether the {side.value} boundary is regular")
            if regular is TriBool.NO:
                continue
            value = rewritten.eval(side.endpoint(spec.interval), tol)
            if value.lower > tol or value.upper < -tol:
                return Verdict.no(f"u = {value} at the regular {side.value} boundary, not 0")

    return Verdict.yes()


##########
# Markovian contraction
##########
def _active_signs(u: FormFunction, lo: float, hi: float) -> set:
    point = representative_point(lo, hi)
    cell = Interval.open(lo, hi)
    signs = set()
    for component, coeff in zip(u.scale.ds, u.coeffs):
        value = coeff.value_at(point)
        if value != 0 and component.mass(cell, 1e-3).upper > 0:
            signs.add(value > 0)
    return signs


def _finite_proxy(lo: float, hi: float) -> Tuple[float, float]:
    # finite stand-ins for infinite cell ends, used only for locating crossings
    if math.isinf(lo):
        lo = (hi if not math.isinf(hi) else 0.0) - 2.0 ** 30
    if math.isinf(hi):
        hi = lo + 2.0 ** 31
    return lo, hi


def _crossing(u: FormFunction, lo: float, hi: float, level: float, tol: float) -> Optional[float]:
    # on a monotone stretch, the point where u passes `level` (None if it does not)
    low_value, high_value = u.eval(lo, tol).value, u.eval(hi, tol).value
    if not min(low_value, high_value) < level < max(low_value, high_value):
        return None
    increasing = high_value > low_value
    for _ in range(200):
        if hi - lo <= tol:
            break
        middle = (lo + hi) / 2
        above = u.eval(middle, tol).value > level
        if above == increasing:
            hi = middle
        else:
            lo = middle
    return (lo + hi) / 2


def _collect_kept(u: FormFunction, lo: float, hi: float, tol: float, kept: List[Tuple[float, float]], depth: int = 0):
    signs = _active_signs(u, lo, hi)
    if not signs:
        return

    if len(signs) == 1:
        a, b = _finite_proxy(lo, hi)
        crossings = sorted(
            x for x in (_crossing(u, a, b, level, tol) for level in (0.0, 1.0)) if x is not None
        )
        cuts = [lo] + crossings + [hi]
        for start, end in zip(cuts, cuts[1:]):
            value = u.eval(representative_point(start, end), tol).value
            if 0 < value < 1:
                kept.append((start, end))
        return

    a, b = _finite_proxy(lo, hi)
    if b - a > tol and depth < 60:
        middle = representative_point(lo, hi)
        _collect_kept(u, lo, middle, tol, kept, depth + 1)
        _collect_kept(u, middle, hi, tol, kept, depth + 1)
        return

    # mixed directions on a tiny cell: keep it only when u certainly stays inside (0, 1)
    start = u.eval(a, tol)
    spread = _variation_bound(u, a, b)
    if 0 < start.lower - spread and start.upper + spread < 1:
        kept.append((lo, hi))


def unit_contraction(u: FormFunction, tol: Optional[float] = None) -> FormFunction:
    """
    v = (0 ∨ u) ∧ 1: coefficients are kept where 0 < u < 1 and zeroed elsewhere,
    with the crossings of 0 and 1 located by bisection and inserted as breakpoints.
    """
    tol = tol or config.DEFAULT_TOL
    domain = u.scale.domain
    cuts = [domain.lo] + [b for b in u.breakpoints() if domain.lo < b < domain.hi] + [domain.hi]

    kept: List[Tuple[float, float]] = []
    for lo, hi in zip(cuts, cuts[1:]):
        _collect_kept(u, lo, hi, tol, kept)

    indicator = StepFunction.indicator(kept)
    coeffs = tuple(coeff.times(indicator) for coeff in u.coeffs)
    base_val = min(1.0, max(0.0, u.base_val))
    log.debug(f"Contraction keeps {len(kept)} stretches")
    return FormFunction(u.scale, u.base_x, base_val, coeffs)


##########
# Regular subspaces
##########
def _node_level(small: CantorCopy, big: CantorCopy) -> Optional[int]:
    # level of `small` as a self-similar node of `big`, None when it is not one
    lo, hi = Fraction(big.support.lo), Fraction(big.support.hi)
    target_lo, target_hi = small.support.lo, small.support.hi
    width = target_hi - target_lo
    for level in range(config.CANTOR_MAX_DEPTH + 1):
        if math.isclose(float(lo), target_lo, abs_tol=1e-12 * width) \
                and math.isclose(float(hi), target_hi, abs_tol=1e-12 * width):
            return level
        third = (hi - lo) / 3
        if float(hi - lo) <= width:
            return None
        if target_hi <= float(lo + third) + 1e-12 * width:
            hi = lo + third
        elif target_lo >= float(hi - third) - 1e-12 * width:
            lo = hi - third
        else:
            return None
    return None


def _density_positive_at(component: MeasureComponent, x: float) -> bool:
    return any(region.contains(x) for region in component.cover())


def is_regular_subspace(sub: DiffusionSpec, sup: DiffusionSpec) -> Verdict:
    """
    Decide whether sub is a regular subspace of sup: equal killing measures and d(sub.s) = 1_B·d(sup.s).

    Raises:
        MismatchedBase when the intervals or the speed measures differ.
    """
    if sub.interval != sup.interval:
        raise MismatchedBase(f"intervals differ: {sub.interval} and {sup.interval}")
    if not sub.m.same_as(sup.m):
        raise MismatchedBase("speed measures differ")
    if not sub.k.same_as(sup.k):
        return Verdict.no("killing measures differ")

    sub_ds, sup_ds = sub.s.ds.canonical(), sup.s.ds.canonical()
    sup_cantor = [c for c in sup_ds if isinstance(c, CantorCopy)]
    sup_other_ac = [c for c in sup_ds if isinstance(c, (RationalWindows, PowerDensity))]

    matched: Dict[int, List[Interval]] = {}
    for component in sub_ds:
        if isinstance(component, LebesgueDensity):
            continue
        if isinstance(component, CantorCopy):
            placed = False
            for index, big in enumerate(sup_cantor):
                level = _node_level(component, big)
                if level is None:
                    continue
                expected = big.weight / 2 ** level
                if not math.isclose(component.weight, expected, rel_tol=1e-9):
                    return Verdict.no(
                        f"density {component.weight / expected:g} on the Cantor component on {component.support}"
                    )
                matched.setdefault(index, []).append(component.support)
                placed = True
                break
            if placed:
                continue
            if any(_overlap(component.support, big.support) for big in sup_cantor):
                return Verdict.unsupported(f"Cantor component on {component.support} overlaps a different copy")
            return Verdict.no(f"Cantor component on {component.support} is not part of the larger scale")

        if component in sup_other_ac:
            continue
        return Verdict.unsupported(f"{component.KIND} component has no identical counterpart in the larger scale")

    for supports in matched.values():
        for i, first in enumerate(supports):
            for second in supports[i + 1:]:
                if _overlap(first, second):
                    return Verdict.no(f"nested Cantor sub-components on {first} and {second} double the density")

    sub_lebesgue = [c for c in sub_ds if isinstance(c, LebesgueDensity)]
    sup_lebesgue = [c for c in sup_ds if isinstance(c, LebesgueDensity)]
    cuts = sorted({-INF, INF, *(b for c in sub_lebesgue + sup_lebesgue for b in c.breakpoints)})
    sub_other = [c for c in sub_ds if isinstance(c, (RationalWindows, PowerDensity))]
    for lo, hi in zip(cuts, cuts[1:]):
        point = representative_point(lo, hi)
        sub_density = math.fsum(c.density_at(point) for c in sub_lebesgue)
        if sub_density == 0:
            continue
        if any(_density_positive_at(c, point) and c not in sub_other for c in sup_other_ac):
            return Verdict.unsupported(f"Lebesgue part on ({lo}, {hi}) overlaps a density missing from the subspace")
        sup_density = math.fsum(c.density_at(point) for c in sup_lebesgue)
        if not math.isclose(sub_density, sup_density, rel_tol=1e-12):
            ratio = sub_density / sup_density if sup_density else INF
            return Verdict.no(f"density {ratio:g} on ({lo}, {hi}) is neither 0 nor 1")

    return Verdict.yes()


def subspace_from_set(sup: DiffusionSpec, removed: Union[BorelSet, IntervalSet]) -> DiffusionSpec:
    """
    The regular subspace with ds0 = 1_{A^c}·ds.

    Raises:
        SupportGapException when the restricted scale would be constant on an open gap.
    """
    restricted = restrict_scale(sup.s, removed)
    return replace(sup, s=restricted)
