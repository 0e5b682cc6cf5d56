import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

from .configuration import config
from .exception import SupportGapException, OutOfRangeException, ScaleException, UnsupportedOperation
from .measure import (
    INF,
    Approx,
    BorelSet,
    CantorCopy,
    Interval,
    IntervalSet,
    LebesgueDensity,
    PiecewiseLinear,
    RadonMeasure,
    integrate_bounded,
    nth_positive_rational,
)
from .utilities import encode_real

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScaleFunction:
    """
    A strictly increasing continuous function on `domain`, stored as a base point and its Stieltjes measure:

        s(x) = base_val + sign(x - base_x)·ds(between base_x and x)

    ds must be atomless (continuity) and fully supported on the domain (strict increase).
    base_x may be a finite endpoint of the domain's closure.
    """
    domain: Interval
    base_x: float
    base_val: float
    ds: RadonMeasure

    def __post_init__(self):
        if math.isinf(self.base_x) or not self.domain.closure().contains(self.base_x):
            raise ScaleException(f"base point {self.base_x} must be a finite point of the closure of {self.domain}")
        if not self.ds.is_atomless:
            raise ScaleException("a scale measure can not have atoms")
        self.ds.check_radon(self.domain)
        if not self.domain.is_degenerate:
            gaps = self.ds.support_gaps(self.domain)
            if not gaps.is_empty:
                raise ScaleException(f"scale is constant on {gaps.pieces[0]}, so not strictly increasing")

    @classmethod
    def identity(cls, domain: Interval, base_x: float = 0.0) -> "ScaleFunction":
        """
        s(x) = x on the domain.
        """
        if not domain.closure().contains(base_x):
            base_x = domain.lo if not math.isinf(domain.lo) else domain.hi
        return cls(domain, base_x, base_x, RadonMeasure.lebesgue(domain.lo, domain.hi))

    @classmethod
    def linear(cls, domain: Interval, slope: float, offset: float = 0.0) -> "ScaleFunction":
        """
        s(x) = offset + slope·x for slope > 0.
        """
        if slope <= 0:
            raise ScaleException("a linear scale needs a positive slope")
        base_x = 0.0 if domain.closure().contains(0.0) else (domain.lo if not math.isinf(domain.lo) else domain.hi)
        return cls(domain, base_x, offset + slope * base_x, RadonMeasure.lebesgue(domain.lo, domain.hi, slope))

    def affine(self, factor: float, shift: float = 0.0) -> "ScaleFunction":
        """
        The scale factor·s + shift (factor > 0) describing the same diffusion.
        """
        if factor <= 0:
            raise ScaleException("affine recalibration needs a positive factor")
        return ScaleFunction(self.domain, self.base_x, factor * self.base_val + shift, self.ds.scaled(factor))

    def eval(self, x: float, tol: Optional[float] = None) -> Approx:
        """
        Certified s(x) for x in the closure of the domain; at an open endpoint this is the monotone limit,
        which may be certified infinite.
        """
        if not self.domain.closure().contains(x) and not (math.isinf(x) and x in (self.domain.lo, self.domain.hi)):
            raise OutOfRangeException(f"{x} is outside of the closure of {self.domain}")
        return _cached_eval(self, float(x), float(tol or config.DEFAULT_TOL))

    def at_endpoint(self, side: str, tol: Optional[float] = None) -> Approx:
        return self.eval(self.domain.lo if side == "left" else self.domain.hi, tol)

    @property
    def is_piecewise_linear(self) -> bool:
        return all(isinstance(component, LebesgueDensity) for component in self.ds)

    def as_piecewise_linear(self) -> PiecewiseLinear:
        """
        s as an exact piecewise-linear function (only when ds is a Lebesgue density).
        Outside of the domain the function continues with the outer densities.
        """
        if not self.is_piecewise_linear:
            raise UnsupportedOperation("scale has singular components and is not piecewise linear")

        inner = {self.base_x}
        inner.update(b for b in self.ds.structure_points() if self.domain.lo <= b <= self.domain.hi)
        knots = tuple(sorted(inner))
        values = tuple(self.eval(k).value for k in knots)

        density = self.ds.canonical()
        if density.is_zero:
            raise ScaleException("empty scale measure")
        lebesgue: LebesgueDensity = density.components[0]
        left_slope = lebesgue.density_at(knots[0] - 1.0)
        right_slope = lebesgue.density_at(knots[-1] + 1.0)
        return PiecewiseLinear(knots, values, left_slope, right_slope)

    def dump(self) -> dict:
        return {
            "base_x": encode_real(self.base_x),
            "base_val": self.base_val,
            "ds": self.ds.dump(),
        }


@lru_cache(maxsize=8192)
def _cached_eval(s: ScaleFunction, x: float, tol: float) -> Approx:
    if x == s.base_x:
        return Approx(s.base_val)
    if x > s.base_x:
        return s.base_val + s.ds.mass(Interval.open(s.base_x, x), tol)
    return s.base_val - s.ds.mass(Interval.open(x, s.base_x), tol)


def inverse(s: ScaleFunction, y: float, tol: Optional[float] = None) -> Approx:
    """
    Locate x with |s(x) - y| ≤ tol by monotone bisection.

    Returns:
        Approx whose value is x and whose error bounds the distance to the exact preimage.

    Raises:
        OutOfRangeException if y is not in the range of s.
    """
    tol = tol or config.DEFAULT_TOL
    evaluation_tol = tol / 4

    low_end, high_end = s.at_endpoint("left", evaluation_tol), s.at_endpoint("right", evaluation_tol)
    if y < low_end.lower or y > high_end.upper:
        raise OutOfRangeException(f"{y} is outside of the range [{low_end}, {high_end}] of the scale")

    lo, hi = _bracket(s, y, evaluation_tol)
    for _ in range(400):
        middle = (lo + hi) / 2
        value = s.eval(middle, evaluation_tol)
        if abs(value.value - y) + value.error <= tol:
            return Approx(middle, max(middle - lo, hi - middle))
        if value.value < y:
            lo = middle
        else:
            hi = middle
        if not lo < (lo + hi) / 2 < hi:
            break

    middle = (lo + hi) / 2
    log.warning(f"Scale inverse at {y} stopped at bracket [{lo}, {hi}] without reaching tol {tol:.3g}.")
    return Approx(middle, max(middle - lo, hi - middle))


def _bracket(s: ScaleFunction, y: float, tol: float) -> Tuple[float, float]:
    # finite [lo, hi] inside the closure of the domain with s(lo) ≤ y ≤ s(hi)
    domain = s.domain
    lo = domain.lo if not math.isinf(domain.lo) else None
    hi = domain.hi if not math.isinf(domain.hi) else None

    distance = 1.0
    while lo is None:
        candidate = s.base_x - distance
        if s.eval(candidate, tol).upper <= y:
            lo = candidate
        distance *= 2
        if distance > 2.0 ** 80:
            raise OutOfRangeException(f"{y} is not reached by the scale towards -inf")

    distance = 1.0
    while hi is None:
        candidate = s.base_x + distance
        if s.eval(candidate, tol).lower >= y:
            hi = candidate
        distance *= 2
        if distance > 2.0 ** 80:
            raise OutOfRangeException(f"{y} is not reached by the scale towards +inf")

    return lo, hi


def cantor_function(x: Union[float, Fraction], depth: int) -> float:
    """
    Depth-d iterate of the Cantor function from the exact ternary digits of x.

    Stops early (and is then exact) when a digit 1 shows up, otherwise |c_d(x) - c(x)| ≤ 2^-d.
    """
    if not 0 <= x <= 1:
        raise ScaleException(f"the Cantor function is defined on [0, 1], got {x}")
    if x == 1:
        return 1.0

    remainder = Fraction(x)
    value = Fraction(0)
    for digit_index in range(1, depth + 1):
        remainder *= 3
        digit = math.floor(remainder)
        remainder -= digit
        if digit == 1:
            return float(value + Fraction(1, 2 ** digit_index))
        value += Fraction(digit // 2, 2 ** digit_index)

    return float(value)


def enumerate_rationals(n: int) -> Fraction:
    """
    The n-th positive rational q/p (lowest terms), ordered by p+q and then by q:
    1, 1/2, 2, 1/3, 3, 1/4, 2/3, 3/2, 4, ...
    """
    return nth_positive_rational(n)


def restrict_scale(s: ScaleFunction, removed: Union[BorelSet, IntervalSet]) -> ScaleFunction:
    """
    The scale s0 with ds0 = 1_{A^c}·ds.

    Args:
        s:
            Scale to restrict.
        removed:
            The set A. Cantor markers drop the matching CantorCopy components.

    Raises:
        SupportGapException if s0 would be constant on some open subinterval.
        UnsupportedOperation if 1_{A^c}·ds leaves the component algebra.
    """
    if isinstance(removed, IntervalSet):
        removed = BorelSet(removed)
    if removed.is_empty:
        return s

    keep = removed.intervals.complement_within(Interval.real_line())
    components = []
    for component in s.ds:
        if isinstance(component, CantorCopy) and component.support in removed.cantor_supports:
            log.debug(f"Dropping Cantor component on {component.support}")
            continue
        components.extend(component.times_indicator(keep))

    restricted = RadonMeasure(tuple(components))
    gaps = restricted.support_gaps(s.domain)
    if not gaps.is_empty:
        raise SupportGapException(gaps.pieces[0])

    return ScaleFunction(s.domain, s.base_x, s.base_val, restricted)


##########
# Composition with measures
##########
def _preimage_on(function: PiecewiseLinear, y: float) -> Optional[float]:
    for u, v, alpha, beta in function.pieces(-INF, INF):
        if beta > 0:
            x = (y - alpha) / beta
            if u <= x <= v:
                return x
    return None


def _compose_piecewise_linear(psi: PiecewiseLinear, s_linear: PiecewiseLinear) -> PiecewiseLinear:
    knots = set(s_linear.knots)
    for y in psi.knots:
        x = _preimage_on(s_linear, y)
        if x is not None and not math.isinf(x):
            knots.add(x)
    knots = tuple(sorted(knots))
    values = tuple(psi(s_linear(k)) for k in knots)

    left_slope = values[0] - psi(s_linear(knots[0] - 1.0))
    right_slope = psi(s_linear(knots[-1] + 1.0)) - values[-1]
    return PiecewiseLinear(knots, values, left_slope, right_slope)


def integrate_composed(
        mu: RadonMeasure,
        s: ScaleFunction,
        psi: PiecewiseLinear,
        interval: Interval,
        tol: Optional[float] = None,
        x_knots: Optional[Sequence[float]] = None,
) -> Approx:
    """
    Certified ∫_interval ψ(s(z)) μ(dz) for ψ piecewise linear in natural scale.

    Args:
        mu:
            Measure to integrate against.
        s:
            Scale function.
        psi:
            Integrand in natural scale.
        interval:
            Integration range.
        tol:
            Target error.
        x_knots:
            Points whose s-images include every knot of ψ inside s(interval). When omitted,
            the preimages are located by bisection.

    Returns:
        Approx, exact when s is piecewise linear and μ has only Lebesgue, power and atom components.
    """
    tol = tol or config.DEFAULT_TOL

    if s.is_piecewise_linear:
        composed = _compose_piecewise_linear(psi, s.as_piecewise_linear())
        return mu.integrate_kernel(composed, interval, tol)

    if not interval.is_bounded:
        raise UnsupportedOperation(f"composed integrals over the unbounded range {interval} need a linear scale")

    diffuse = mu.without_atoms()
    if all(isinstance(component, LebesgueDensity) for component in diffuse):
        return _integrate_composed_fubini(mu, s, psi, interval, tol, x_knots)

    return _integrate_composed_cells(mu, s, psi, interval, tol)


def _integrate_composed_cells(
        mu: RadonMeasure, s: ScaleFunction, psi: PiecewiseLinear, interval: Interval, tol: float
) -> Approx:
    evaluation_tol = tol / 16

    def bounds(u: float, v: float) -> Tuple[float, float]:
        s_low = s.eval(u, evaluation_tol).lower
        s_high = s.eval(v, evaluation_tol).upper
        return psi.range_on(s_low, s_high)

    return integrate_bounded(mu, bounds, interval, tol)


def _linear_piece(
        s: ScaleFunction, psi: PiecewiseLinear, u: float, v: float, evaluation_tol: float, mass: float,
) -> Tuple[Approx, Approx, float, float, float]:
    # ψ's piece at the middle of s((u, v)), and the error of using it on the whole region: a knot inside
    # leaves the stretch between it and the nearer end on another piece, off the line by at most 2·L·length
    s_u = s.eval(u, evaluation_tol)
    s_v = s.eval(v, evaluation_tol)
    middle = (s_u.value + s_v.value) / 2
    alpha, beta = psi.segment(middle)
    wrong_side = sum(
        k - s_u.lower if k < middle else s_v.upper - k
        for k in psi.knots
        if s_u.lower < k < s_v.upper
    )
    return s_u, s_v, alpha, beta, 2 * psi.max_abs_slope * wrong_side * mass


def _integrate_composed_fubini(
        mu: RadonMeasure,
        s: ScaleFunction,
        psi: PiecewiseLinear,
        interval: Interval,
        tol: float,
        x_knots: Optional[Sequence[float]],
) -> Approx:
    # On a region (u, v) where ψ(y) = alpha + beta·y:
    #   ∫ ψ(s) dm = alpha·m(u,v) + beta·(s(u)·m(u,v) + ∫_(u,v) m((y, v)) ds(y))
    lebesgue = mu.without_atoms()
    share = tol / 8

    exact_cuts: List[float] = []
    fuzzy_cells: List[Tuple[float, float]] = []
    if x_knots is not None:
        exact_cuts = [x for x in x_knots if interval.lo < x < interval.hi]
    else:
        low_value = s.eval(interval.lo, share).lower
        high_value = s.eval(interval.hi, share).upper
        for y in psi.knots:
            if low_value < y < high_value:
                located = inverse(s, y, share)
                lo = max(interval.lo, located.value - located.error)
                hi = min(interval.hi, located.value + located.error)
                if lo < hi:
                    fuzzy_cells.append((lo, hi))
                else:
                    exact_cuts.append(located.value)

    cuts = sorted({interval.lo, interval.hi, *exact_cuts, *(b for cell in fuzzy_cells for b in cell)})
    fuzzy = set(fuzzy_cells)
    regions = list(zip(cuts, cuts[1:]))
    region_tol = share / max(1, len(regions))

    total = Approx(0.0)
    for u, v in regions:
        region = Interval.open(u, v)
        if (u, v) in fuzzy:
            total += _integrate_composed_cells(lebesgue, s, psi, region, region_tol)
            continue

        region_mass = lebesgue.mass(region, region_tol)
        if region_mass.upper <= 0:
            continue

        # knots handed in through x_knots sit inside the enclosures of s(u) and s(v); a tighter look shrinks them
        for evaluation_tol in (region_tol / 4, region_tol / 4096):
            s_u, s_v, alpha, beta, slip = _linear_piece(s, psi, u, v, evaluation_tol, region_mass.upper)
            if slip <= region_tol:
                break
        else:
            log.debug(f"ψ has a knot inside s({region}); refining that region instead.")
            total += _integrate_composed_cells(lebesgue, s, psi, region, region_tol)
            continue

        knots = [u] + [b for b in lebesgue.structure_points() if u < b < v] + [v]
        tail_mass = PiecewiseLinear(
            tuple(knots),
            tuple(lebesgue.mass(Interval.open(k, v), region_tol).value if k < v else 0.0 for k in knots),
        )
        inner = s.ds.integrate_kernel(tail_mass, region, region_tol)
        total += alpha * region_mass.value + beta * (s_u * region_mass.value + inner) + Approx(0.0, slip)

    atoms = [atom for atom in mu.atoms() if interval.contains(atom.location)]
    for atom in atoms:
        value = s.eval(atom.location, share / max(1, len(atoms)))
        low, high = psi.range_on(value.lower, value.upper)
        total += Approx(atom.weight * (low + high) / 2, atom.weight * (high - low) / 2)

    return total
