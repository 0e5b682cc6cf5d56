import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Tuple

from .configuration import config
from .exception import PreconditionViolated
from .form import DiffusionSpec, Side, regular_boundary
from .measure import (
    INF,
    Approx,
    CantorCopy,
    Interval,
    LebesgueDensity,
    MeasureComponent,
    PiecewiseLinear,
    PowerDensity,
    RadonMeasure,
    RationalWindows,
)
from .scale import integrate_composed
from .utilities import encode_real
from .verdict import TriBool

log = logging.getLogger(__name__)

# Windows beyond |x| carry mass ≤ density·2^(1.5 - |x|), dominated by C·|x|^-4.
_WINDOW_TAIL_EXPONENT = 4.0
_WINDOW_TAIL_COEFFICIENT = 2 ** 1.5 * (_WINDOW_TAIL_EXPONENT / (math.e * math.log(2))) ** _WINDOW_TAIL_EXPONENT
_CANTOR_DIMENSION = math.log(2) / math.log(3)
# infinite endpoints: the local laws start this many times further out than any structure point
_FAR_FACTOR = 64


class BoundaryClass(Enum):
    FIRST = "first"
    SECOND = "second"
    THIRD = "third"


@dataclass(frozen=True)
class EndpointClassification:
    side: Side
    endpoint: float
    klass: BoundaryClass
    dissipative: TriBool
    regular: TriBool

    @property
    def is_conservative(self) -> TriBool:
        return ~self.dissipative

    def dump(self) -> dict:
        return {
            "endpoint": encode_real(self.endpoint),
            "class": self.klass.value,
            "dissipative": self.dissipative.value,
            "regular": self.regular.value,
        }


##########
# Endpoint laws
##########
class LawKind(Enum):
    DENSITY = "density"
    MASS = "mass"


@dataclass(frozen=True)
class PowerLaw:
    """
    Envelope of one measure component near an endpoint, in a local coordinate t that tends to 0 at the endpoint
    (t = |x - e| for a finite endpoint, t = 1/|x| for an infinite one). Valid for 0 < t < horizon:

        DENSITY:  low·t^exponent ≤ dμ/dt ≤ high·t^exponent
        MASS:     low·t^exponent ≤ μ(0, t) ≤ high·t^exponent      (exponent > 0)
    """
    low: float
    high: float
    exponent: float
    kind: LawKind


@dataclass(frozen=True)
class LocalCoordinate:
    endpoint: float
    side: Side

    @property
    def is_finite(self) -> bool:
        return not math.isinf(self.endpoint)

    def to_t(self, x: float) -> float:
        if self.is_finite:
            return abs(x - self.endpoint)
        return 1.0 / abs(x)

    def to_x(self, t: float) -> float:
        if self.is_finite:
            return self.endpoint + t if self.side is Side.LEFT else self.endpoint - t
        return -1.0 / t if self.endpoint < 0 else 1.0 / t

    def between(self, x: float) -> Interval:
        """
        The open stretch between the endpoint and x.
        """
        return Interval.open(self.endpoint, x) if self.side is Side.LEFT else Interval.open(x, self.endpoint)


def _horizon(spec: DiffusionSpec, local: LocalCoordinate, anchor: float) -> float:
    # every law is valid on (0, horizon) and the anchor lies beyond it
    points = [anchor]
    for measure in (spec.s.ds, spec.m, spec.k):
        points.extend(measure.structure_points())
        points.extend(atom.location for atom in measure.atoms())
        points.extend(c.anchor for c in measure if isinstance(c, PowerDensity))
    points = [p for p in points if not math.isinf(p)]

    if local.is_finite:
        distances = [abs(p - local.endpoint) for p in points if p != local.endpoint]
        return min([1.0] + distances) / 2

    anchors = [abs(c.anchor) + 1 for measure in (spec.s.ds, spec.m, spec.k)
               for c in measure if isinstance(c, PowerDensity)]
    reach = max([1.0] + [abs(p) for p in points] + anchors)
    return 1.0 / (_FAR_FACTOR * reach)


def _component_law(component: MeasureComponent, local: LocalCoordinate, horizon: float) -> Optional[PowerLaw]:
    inside = local.to_x(horizon / 2)

    if isinstance(component, LebesgueDensity):
        density = component.density_at(inside)
        if density == 0:
            return None
        return PowerLaw(density, density, 0.0 if local.is_finite else -2.0, LawKind.DENSITY)

    if isinstance(component, PowerDensity):
        if not component.lo < inside < component.hi:
            return None
        c, p = component.coefficient, component.exponent
        if local.is_finite:
            if component.anchor == local.endpoint:
                return PowerLaw(c, c, p, LawKind.DENSITY)
            distance = abs(local.endpoint - component.anchor)
            ends = [c * (distance - horizon) ** p, c * (distance + horizon) ** p]
            return PowerLaw(min(ends), max(ends), 0.0, LawKind.DENSITY)
        # |x - anchor| = |x|·f with f in [1/2, 3/2] beyond the horizon; dx = dt/t²
        ends = [c * 0.5 ** p, c * 1.5 ** p]
        return PowerLaw(min(ends), max(ends), -p - 2.0, LawKind.DENSITY)

    if isinstance(component, CantorCopy):
        support = component.support
        touching = support.lo if local.side is Side.LEFT else support.hi
        if not local.is_finite or touching != local.endpoint:
            return None
        # μ(0, t) lies within a factor 2 of w·(t/L)^dimension
        scale = support.length ** _CANTOR_DIMENSION
        return PowerLaw(component.weight / (2 * scale), 2 * component.weight / scale, _CANTOR_DIMENSION, LawKind.MASS)

    if isinstance(component, RationalWindows):
        if local.is_finite:
            if component.count_cutoff is not None:
                if component.union(component.count_cutoff).contains(inside):
                    return PowerLaw(component.density, component.density, 0.0, LawKind.DENSITY)
                return None
            if not component.hull().contains(inside):
                return None
            return PowerLaw(0.0, component.density, 0.0, LawKind.DENSITY)
        if component.count_cutoff is not None or not component.hull().contains(inside):
            return None
        return PowerLaw(0.0, component.density * _WINDOW_TAIL_COEFFICIENT, _WINDOW_TAIL_EXPONENT, LawKind.MASS)

    # atoms sit beyond the horizon
    return None


def endpoint_laws(mu: RadonMeasure, local: LocalCoordinate, horizon: float) -> List[PowerLaw]:
    laws = (_component_law(component, local, horizon) for component in mu)
    return [law for law in laws if law is not None]


def _scale_terms(ds_laws: List[PowerLaw]) -> Optional[List[Tuple[float, float, float]]]:
    # envelope of |s(x) - s(e)| as Σ (low, high)·t^σ; None when it is not finite
    terms = []
    for law in ds_laws:
        if law.kind is LawKind.MASS:
            terms.append((law.low, law.high, law.exponent))
        elif law.exponent > -1:
            terms.append((law.low / (law.exponent + 1), law.high / (law.exponent + 1), law.exponent + 1))
        else:
            return None
    return terms


def _direct_rule(ds_laws: List[PowerLaw], m_laws: List[PowerLaw]) -> TriBool:
    # ∫ |s - s(e)| dm near e, pairing each term of the scale envelope with each speed density
    terms = _scale_terms(ds_laws)
    if terms is None:
        return TriBool.UNKNOWN

    densities = [law for law in m_laws if law.kind is LawKind.DENSITY]
    for low, _, sigma in terms:
        for law in densities:
            if low > 0 and law.low > 0 and sigma + law.exponent <= -1:
                return TriBool.NO

    for _, high, sigma in terms:
        for law in densities:
            if high > 0 and law.high > 0 and sigma + law.exponent <= -1:
                return TriBool.UNKNOWN
    return TriBool.YES


def _direct_tail(ds_laws: List[PowerLaw], m_laws: List[PowerLaw], horizon: float) -> float:
    # upper bound of the integral over local coordinates (0, horizon), assuming _direct_rule said YES
    terms = _scale_terms(ds_laws) or []
    scale_at_horizon = math.fsum(high * horizon ** sigma for _, high, sigma in terms)
    parts = []
    for law in m_laws:
        if law.kind is LawKind.MASS:
            parts.append(scale_at_horizon * law.high * horizon ** law.exponent)
            continue
        for _, high, sigma in terms:
            power = sigma + law.exponent + 1
            if high > 0 and law.high > 0:
                parts.append(high * law.high * horizon ** power / power)
    return math.fsum(parts)


def _remaining_mass_rule(ds_laws: List[PowerLaw], m_laws: List[PowerLaw]) -> TriBool:
    # ∫ M ds near e with M(x) = m between x and the anchor
    if any(law.kind is LawKind.DENSITY and law.exponent <= -1 for law in ds_laws):
        return TriBool.UNKNOWN

    # M grows like t^r (r < 0) for speed densities t^p with p < -1; p = -1 gives a logarithm
    growth = []
    for law in m_laws:
        if law.kind is LawKind.DENSITY and law.exponent < -1:
            r = law.exponent + 1
            growth.append((law.low * (1 - 2 ** r) / abs(r), law.high / abs(r), r))

    def diverges(r: float, law: PowerLaw) -> bool:
        if law.kind is LawKind.DENSITY:
            return r + law.exponent <= -1
        return law.exponent + r <= 0

    for low, _, r in growth:
        for law in ds_laws:
            if low > 0 and law.low > 0 and diverges(r, law):
                return TriBool.NO
    for _, high, r in growth:
        for law in ds_laws:
            if high > 0 and law.high > 0 and diverges(r, law):
                return TriBool.UNKNOWN
    return TriBool.YES


##########
# Classification
##########
def _first_decided(question: Callable[[float], TriBool]) -> TriBool:
    for tol in config.TOL_LADDER:
        answer = question(tol)
        if answer is not TriBool.UNKNOWN:
            return answer
    return TriBool.UNKNOWN


def boundary_class(spec: DiffusionSpec, side: Side, tol: Optional[float] = None) -> BoundaryClass:
    endpoint = side.endpoint(spec.interval)
    if not math.isinf(endpoint) and side.is_included(spec.interval):
        return BoundaryClass.FIRST
    if spec.s.eval(endpoint, tol).is_infinite:
        return BoundaryClass.SECOND
    return BoundaryClass.THIRD


def _laws_near(spec: DiffusionSpec, side: Side, anchor: Optional[float] = None):
    anchor = spec.interval.interior_point() if anchor is None else anchor
    local = LocalCoordinate(side.endpoint(spec.interval), side)
    horizon = _horizon(spec, local, anchor)
    return local, horizon, endpoint_laws(spec.s.ds, local, horizon), endpoint_laws(spec.m, local, horizon)


def is_dissipative(spec: DiffusionSpec, side: Side, tol: Optional[float] = None) -> TriBool:
    """
    Decide ∫ |s(x) - s(e)| m(dx) < ∞ near the endpoint e (only third-class endpoints can be dissipative).
    """
    if boundary_class(spec, side, tol) is not BoundaryClass.THIRD:
        return TriBool.NO
    _, _, ds_laws, m_laws = _laws_near(spec, side)
    return _direct_rule(ds_laws, m_laws)


def is_dissipative_via_M(spec: DiffusionSpec, side: Side, tol: Optional[float] = None) -> TriBool:
    """
    The same question through ∫ M ds, M(x) = m((x, c)).
    """
    if boundary_class(spec, side, tol) is not BoundaryClass.THIRD:
        return TriBool.NO
    _, _, ds_laws, m_laws = _laws_near(spec, side)
    return _remaining_mass_rule(ds_laws, m_laws)


def tail_integral_bound(spec: DiffusionSpec, side: Side, x: float, tol: Optional[float] = None) -> Approx:
    """
    Certified ∫ |s(z) - s(e)| m(dz) over z between x and the third-class endpoint e.

    Returns:
        Approx; certified infinite when divergent, with an infinite error when undecided.

    Raises:
        PreconditionViolated when the endpoint is not of the third class or x is not inside the interval.
    """
    tol = tol or config.DEFAULT_TOL
    if boundary_class(spec, side, tol) is not BoundaryClass.THIRD:
        raise PreconditionViolated(f"the {side.value} endpoint is not of the third class")
    if not spec.interval.interior().contains(x):
        raise PreconditionViolated(f"{x} is not an interior point of {spec.interval}")

    local, horizon, ds_laws, m_laws = _laws_near(spec, side, x)
    decided = _direct_rule(ds_laws, m_laws)
    if decided is TriBool.NO:
        return Approx.infinite()

    cut = local.to_x(horizon)
    bulk_region = Interval.open(min(cut, x), max(cut, x))
    s_end = spec.s.eval(local.endpoint, tol / 4)
    if side is Side.LEFT:
        distance = PiecewiseLinear.linear(-s_end.value, 1.0)
    else:
        distance = PiecewiseLinear.linear(s_end.value, -1.0)
    bulk = integrate_composed(spec.m, spec.s, distance, bulk_region, tol / 2)
    bulk += Approx(0.0, s_end.error * spec.m.mass(bulk_region, tol / 4).upper)

    if decided is TriBool.UNKNOWN:
        return Approx(bulk.value, INF)
    tail = _direct_tail(ds_laws, m_laws, horizon)
    return Approx(bulk.value + tail / 2, bulk.error + tail / 2)


def dissipativity_bound(spec: DiffusionSpec, side: Side, tol: Optional[float] = None) -> Approx:
    return tail_integral_bound(spec, side, spec.interval.interior_point(), tol)


def limit_MS(
        spec: DiffusionSpec, side: Side, sequence_length: Optional[int] = None, tol: Optional[float] = None,
) -> List[Tuple[float, Approx]]:
    """
    M(x)·|s(x) - s(e)| along points x_k approaching a dissipative endpoint geometrically
    (in the local coordinate, by config.LIMIT_RATIO per step). The values tend to zero.

    Raises:
        PreconditionViolated unless the endpoint is certified dissipative.
    """
    tol = tol or config.DEFAULT_TOL
    sequence_length = sequence_length or config.LIMIT_SEQUENCE_LENGTH
    if is_dissipative(spec, side, tol) is not TriBool.YES:
        raise PreconditionViolated(f"the {side.value} endpoint is not certified dissipative")

    anchor = spec.interval.interior_point()
    local, horizon, _, _ = _laws_near(spec, side, anchor)

    values = []
    for step in range(sequence_length):
        x = local.to_x(horizon * config.LIMIT_RATIO ** step)
        remaining = spec.m.mass(Interval.open(min(x, anchor), max(x, anchor)), tol)
        covered = spec.s.ds.mass(local.between(x), tol / max(1.0, remaining.upper))
        values.append((x, remaining * covered))

    if log.isEnabledFor(logging.DEBUG):
        log.debug(f"M·s sequence at the {side.value} end: {[str(value) for _, value in values]}")
    return values


def classify(spec: DiffusionSpec, side: Side, tol: Optional[float] = None) -> EndpointClassification:
    tol = tol or config.DEFAULT_TOL
    klass = boundary_class(spec, side, tol)
    dissipative = is_dissipative(spec, side, tol) if klass is BoundaryClass.THIRD else TriBool.NO
    regular = _first_decided(lambda ladder_tol: regular_boundary(spec, side, ladder_tol))
    return EndpointClassification(side, side.endpoint(spec.interval), klass, dissipative, regular)


def is_recurrent(spec: DiffusionSpec, tol: Optional[float] = None) -> TriBool:
    """
    Recurrent iff k = 0 and neither endpoint is of the third class.
    """
    classes = [boundary_class(spec, side, tol) for side in Side]
    return TriBool.of(spec.is_strongly_local and BoundaryClass.THIRD not in classes)


def is_conservative(spec: DiffusionSpec, tol: Optional[float] = None) -> TriBool:
    """
    Conservative iff k = 0 and both endpoints are conservative (not dissipative).
    """
    return TriBool.all([
        TriBool.of(spec.is_strongly_local),
        *(~is_dissipative(spec, side, tol) for side in Side),
    ])


def mean_exit_time(spec: DiffusionSpec, a: float, x: float, b: float, tol: Optional[float] = None) -> Approx:
    """
    Expected exit time from (a, b) started at x, ignoring killing:

        ∫_(a,b) G(x, z) m(dz),  G(x, z) = 2(min(X, Z) - A)(B - max(X, Z))/(B - A)

    with capital letters the natural-scale images. Brownian motion (s = x, m = dx) exits (0, 1) from 1/2 after 1/4.
    """
    tol = tol or config.DEFAULT_TOL
    if not a < b or not a <= x <= b:
        raise PreconditionViolated(f"need a < b and a ≤ x ≤ b, got ({a}, {x}, {b})")
    closure = spec.interval.closure()
    if math.isinf(a) or math.isinf(b) or not (closure.contains(a) and closure.contains(b)):
        raise PreconditionViolated(f"[{a}, {b}] is not a bounded part of the closure of {spec.interval}")
    if x in (a, b):
        return Approx(0.0)

    start, current, end = (spec.s.eval(point, tol / 8) for point in (a, x, b))
    peak = 2 * (current.value - start.value) * (end.value - current.value) / (end.value - start.value)
    kernel = PiecewiseLinear.hat(start.value, current.value, end.value, peak)

    region = Interval.open(a, b)
    value = integrate_composed(spec.m, spec.s, kernel, region, tol / 2, x_knots=[a, x, b])

    scale_error = start.error + current.error + end.error
    if scale_error > 0:
        value += Approx(0.0, 4 * scale_error * spec.m.mass(region, tol / 8).upper)
    return value


def boundary_report(spec: DiffusionSpec, tol: Optional[float] = None) -> dict:
    """
    The classification report of both endpoints together with the recurrence and conservativeness verdicts.
    """
    tol = tol or config.DEFAULT_TOL
    report = {"name": spec.name}
    for side in Side:
        classification = classify(spec, side, tol)
        entry = classification.dump()
        if classification.klass is BoundaryClass.THIRD and classification.dissipative is not TriBool.NO:
            bound = dissipativity_bound(spec, side, tol)
            entry["dissipativity_bound"] = encode_real(bound.upper)
        report[side.value] = entry

    recurrent = is_recurrent(spec, tol)
    report["recurrent"] = recurrent.value
    report["transient"] = (~recurrent).value
    report["conservative"] = is_conservative(spec, tol).value
    report["strongly_local"] = spec.is_strongly_local
    return report
