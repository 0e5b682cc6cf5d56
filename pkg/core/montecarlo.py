import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import List, Optional, Tuple

import numpy as np
from scipy.stats import norm

from .boundary import BoundaryClass, boundary_class, tail_integral_bound
from .configuration import config
from .exception import InfeasibleConfig, PreconditionViolated, UnsupportedOperation
from .form import DiffusionSpec, Side
from .measure import INF, Approx, Interval, PiecewiseLinear, RadonMeasure
from .scale import integrate_composed, inverse

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    """
    Random walk settings. `step_h` is the natural-scale step before snapping to the window.
    """
    seed: int
    step_h: float = field(default_factory=lambda: config.STEP_H)
    max_steps: int = field(default_factory=lambda: config.MAX_STEPS)
    block_size: int = field(default_factory=lambda: config.BLOCK_SIZE)
    workers: int = field(default_factory=lambda: config.WORKERS)

    def __post_init__(self):
        if not self.step_h > 0:
            raise InfeasibleConfig(f"step_h must be positive, got {self.step_h}")
        if self.max_steps < 1 or self.block_size < 1 or self.workers < 1:
            raise InfeasibleConfig("max_steps, block_size and workers must be positive")


class Terminal(Enum):
    HIT_LEFT = "hit_left"
    HIT_RIGHT = "hit_right"
    KILLED = "killed"
    CENSORED = "censored"
    ALIVE = "alive"


@dataclass(frozen=True)
class PathResult:
    terminal: Terminal
    lifetime: float
    steps: int


@dataclass(frozen=True, eq=False)
class NaturalScaleWalk:
    """
    Simple random walk on nodes 0..size of a natural-scale grid with spacing h.
    Per step from node j the clock advances by time_increments[j] and the killing clock by killing_increments[j].
    End nodes either reflect or absorb.
    """
    natural: np.ndarray
    points: Tuple[float, ...]
    time_increments: np.ndarray
    killing_increments: np.ndarray
    start: int
    reflect_left: bool
    reflect_right: bool
    snapped: bool

    @property
    def size(self) -> int:
        return len(self.natural) - 1

    @property
    def h(self) -> float:
        return float(self.natural[1] - self.natural[0])

    @property
    def hit_probability(self) -> float:
        return self.start / self.size

    def fold(self, positions: np.ndarray) -> np.ndarray:
        n = self.size
        if self.reflect_left and self.reflect_right:
            wrapped = np.mod(positions, 2 * n)
            return np.where(wrapped <= n, wrapped, 2 * n - wrapped)
        if self.reflect_left:
            return np.abs(positions)
        if self.reflect_right:
            return n - np.abs(n - positions)
        return positions

    def absorbing(self, nodes: np.ndarray) -> np.ndarray:
        left = (nodes == 0) & (not self.reflect_left)
        right = (nodes == self.size) & (not self.reflect_right)
        return left | right

    def terminal_at(self, node: int) -> Terminal:
        return Terminal.HIT_LEFT if node == 0 else Terminal.HIT_RIGHT


##########
# Building the walk
##########
def _align(
        low: Optional[float], start: float, high: Optional[float], h: float, span_steps: int,
) -> Tuple[float, int, int, bool]:
    """
    Choose the grid: returns (h, size, start node, snapped). A missing end is placed span_steps away.
    """
    if low is None and high is None:
        return h, 2 * span_steps, span_steps, False
    if low is None:
        steps = max(1, math.ceil((high - start) / h))
        spacing = (high - start) / steps
        return spacing, steps + span_steps, span_steps, False
    if high is None:
        steps = max(1, math.ceil((start - low) / h))
        spacing = (start - low) / steps
        return spacing, steps + span_steps, steps, False

    width = high - low
    size = math.ceil(width / h)
    if size < 2:
        raise InfeasibleConfig(f"step {h} is too large for a natural-scale window of width {width}")
    ratio = (start - low) / width
    fraction = Fraction(ratio).limit_denominator(4 * size)
    if abs(float(fraction) - ratio) <= 1e-9:
        size = math.ceil(size / fraction.denominator) * fraction.denominator
        return width / size, size, fraction.numerator * size // fraction.denominator, False

    node = round(ratio * size)
    log.warning(f"Start point snapped to the natural-scale grid: {ratio:.6g} of the window becomes {node}/{size}")
    return width / size, size, node, True


def _hat_kernel(natural: np.ndarray, node: int) -> PiecewiseLinear:
    last = len(natural) - 1
    if node == 0:
        return PiecewiseLinear((natural[0], natural[1]), (1.0, 0.0))
    if node == last:
        return PiecewiseLinear((natural[-2], natural[-1]), (0.0, 1.0))
    return PiecewiseLinear.hat(natural[node - 1], natural[node], natural[node + 1])


def _hat_mass(
        spec: DiffusionSpec, measure: RadonMeasure, is_speed: bool,
        points: Tuple[float, ...], natural: np.ndarray, node: int, tol: float,
) -> float:
    # ∫ φ_node(s(z)) μ(dz); cells reaching an infinite endpoint are split off and closed with the tail bound
    if measure.is_zero:
        return 0.0
    last = len(points) - 1
    lo, hi = points[max(0, node - 1)], points[min(last, node + 1)]
    kernel = _hat_kernel(natural, node)
    lo_included = node == 0 and spec.interval.contains(lo)
    hi_included = node == last and spec.interval.contains(hi)

    if spec.s.is_piecewise_linear or not (math.isinf(lo) or math.isinf(hi)):
        cell = Interval(lo, hi, lo_included, hi_included)
        knots = [points[j] for j in range(max(0, node - 1), min(last, node + 1) + 1)]
        return integrate_composed(measure, spec.s, kernel, cell, tol, x_knots=knots).value

    side = Side.RIGHT if math.isinf(hi) else Side.LEFT
    centre = points[node]
    far = centre + max(1.0, abs(centre)) if side is Side.RIGHT else centre - max(1.0, abs(centre))
    bulk_cell = Interval.open(lo, far) if side is Side.RIGHT else Interval.open(far, hi)
    knots = [bulk_cell.lo, centre, bulk_cell.hi]
    bulk = integrate_composed(measure, spec.s, kernel, bulk_cell, tol, x_knots=knots).value

    tail_region = Interval.open(far, INF) if side is Side.RIGHT else Interval.open(-INF, far)
    if is_speed:
        step = float(natural[1] - natural[0])
        tail = tail_integral_bound(spec, side, far, tol)
        if not tail.is_finite and not tail.is_infinite:
            log.warning(f"Speed mass beyond {far} is not certified; using its midpoint {tail.value:.6g}")
        return bulk + tail.value / step
    if measure.mass(tail_region, tol).upper > 0:
        raise UnsupportedOperation(f"killing mass beyond {far} near an infinite endpoint is not supported")
    return bulk


def build_walk(
        spec: DiffusionSpec,
        low: Optional[float],
        x: float,
        high: Optional[float],
        cfg: SimConfig,
        reflect_left: bool,
        reflect_right: bool,
        span_steps: int = 0,
        tol: Optional[float] = None,
) -> NaturalScaleWalk:
    """
    Walk between low and high (points of the closure of I) started at x. A None end is a truncation
    span_steps natural-scale steps away from x, which always reflects.
    """
    evaluation_tol = (tol or config.DEFAULT_TOL) * cfg.step_h
    start = spec.s.eval(x, evaluation_tol).value
    low_value = None if low is None else spec.s.eval(low, evaluation_tol).value
    high_value = None if high is None else spec.s.eval(high, evaluation_tol).value
    if any(value is not None and math.isinf(value) for value in (low_value, high_value)):
        raise InfeasibleConfig("the walk window must be bounded in natural scale")

    h, size, node, snapped = _align(low_value, start, high_value, cfg.step_h, span_steps)
    origin = low_value if low_value is not None else start - node * h
    natural = origin + h * np.arange(size + 1)
    if low_value is not None:
        natural[0] = low_value
    if high_value is not None:
        natural[-1] = high_value

    points = []
    for index, y in enumerate(natural):
        if index == 0 and low is not None:
            points.append(low)
        elif index == size and high is not None:
            points.append(high)
        else:
            points.append(inverse(spec.s, float(y), evaluation_tol).value)
    points = tuple(points)

    times = np.zeros(size + 1)
    killing = np.zeros(size + 1)
    reflecting = {0: reflect_left or low is None, size: reflect_right or high is None}
    for index in range(size + 1):
        if index in reflecting and not reflecting[index]:
            continue
        # reflecting ends use the one-sided kernel 2(h - |Z - Y|)
        factor = 2 * h if index in reflecting else h
        times[index] = factor * _hat_mass(spec, spec.m, True, points, natural, index, evaluation_tol)
        killing[index] = factor * _hat_mass(spec, spec.k, False, points, natural, index, evaluation_tol)

    return NaturalScaleWalk(
        natural=natural,
        points=points,
        time_increments=times,
        killing_increments=killing,
        start=node,
        reflect_left=reflecting[0],
        reflect_right=reflecting[size],
        snapped=snapped,
    )


def window_walk(spec: DiffusionSpec, a: float, x: float, b: float, cfg: SimConfig) -> NaturalScaleWalk:
    """
    Walk on [a, b] started at x, absorbed at both window ends, included endpoints of I too.
    """
    if not a < b or not a <= x <= b:
        raise PreconditionViolated(f"need a < b and a ≤ x ≤ b, got ({a}, {x}, {b})")
    closure = spec.interval.closure()
    if not (closure.contains(a) and closure.contains(b)):
        raise PreconditionViolated(f"[{a}, {b}] is not inside the closure of {spec.interval}")
    return build_walk(spec, a, x, b, cfg, False, False)


##########
# Paths
##########
def run_path(walk: NaturalScaleWalk, seed: int, index: int, cfg: SimConfig,
             horizon: Optional[float] = None) -> PathResult:
    """
    One path from its own counter-based stream (seed, index). The unit-exponential killing threshold is drawn
    first, so paths stay coupled across killing measures.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))
    threshold = rng.standard_exponential()

    position = walk.start
    if walk.absorbing(np.array([position]))[0]:
        return PathResult(walk.terminal_at(position), 0.0, 0)

    time, clock, steps = 0.0, 0.0, 0
    while steps < cfg.max_steps:
        size = min(cfg.block_size, cfg.max_steps - steps)
        unfolded = position + np.cumsum(rng.integers(0, 2, size=size) * 2 - 1)
        # nodes past an absorbing end only occur after the hit and are discarded; clip them onto the grid
        before = np.clip(walk.fold(np.concatenate(([position], unfolded[:-1]))), 0, walk.size)
        after = np.clip(walk.fold(unfolded), 0, walk.size)
        dt = walk.time_increments[before]
        dk = walk.killing_increments[before]
        times = time + np.cumsum(dt)
        clocks = clock + np.cumsum(dk)

        def first(mask: np.ndarray) -> int:
            found = np.flatnonzero(mask)
            return int(found[0]) if found.size else size

        first_hit = first(walk.absorbing(after))
        first_kill = first(clocks > threshold)
        first_late = first(times >= horizon) if horizon is not None else size
        index_of_event = min(first_hit, first_kill, first_late)
        if index_of_event == size:
            position, time, clock = int(unfolded[-1]), float(times[-1]), float(clocks[-1])
            steps += size
            continue

        i = index_of_event
        time_before = float(times[i - 1]) if i > 0 else time
        clock_before = float(clocks[i - 1]) if i > 0 else clock
        candidates = []
        if i == first_kill:
            candidates.append((time_before + dt[i] * (threshold - clock_before) / dk[i], 0, Terminal.KILLED))
        if i == first_late:
            candidates.append((horizon, 1, Terminal.ALIVE))
        if i == first_hit:
            candidates.append((float(times[i]), 2, walk.terminal_at(int(after[i]))))
        lifetime, _, terminal = min(candidates, key=lambda candidate: candidate[:2])
        return PathResult(terminal, float(lifetime), steps + i + 1)

    return PathResult(Terminal.CENSORED, time, steps)


def _run_range(walk: NaturalScaleWalk, seed: int, start: int, stop: int, cfg: SimConfig,
               horizon: Optional[float]) -> List[PathResult]:
    results = []
    for index in range(start, stop):
        results.append(run_path(walk, seed, index, cfg, horizon))
        done = index + 1
        if done % config.PROGRESS_LOG_INTERVAL == 0:
            log.info(f"Simulated {done} paths.")
    return results


def run_paths(walk: NaturalScaleWalk, n_paths: int, cfg: SimConfig,
              horizon: Optional[float] = None) -> List[PathResult]:
    """
    n_paths paths, split into contiguous index ranges across cfg.workers processes. Results keep index order.
    """
    if n_paths < 1:
        raise PreconditionViolated("need at least one path")
    if cfg.workers == 1 or n_paths < 2 * cfg.workers:
        return _run_range(walk, cfg.seed, 0, n_paths, cfg, horizon)

    bounds = np.linspace(0, n_paths, cfg.workers + 1).astype(int)
    with ProcessPoolExecutor(max_workers=cfg.workers) as executor:
        futures = [
            executor.submit(_run_range, walk, cfg.seed, int(start), int(stop), cfg, horizon)
            for start, stop in zip(bounds, bounds[1:])
        ]
        return [result for future in futures for result in future.result()]


def simulate_path(spec: DiffusionSpec, x0: float, a: float, b: float, cfg: SimConfig, index: int = 0) -> PathResult:
    walk = window_walk(spec, a, x0, b, cfg)
    return run_path(walk, cfg.seed, index, cfg)


def simulate_paths(spec: DiffusionSpec, x0: float, a: float, b: float, n_paths: int,
                   cfg: SimConfig) -> List[PathResult]:
    walk = window_walk(spec, a, x0, b, cfg)
    return run_paths(walk, n_paths, cfg)


##########
# Estimators
##########
def _censoring(results: List[PathResult]) -> Tuple[float, bool]:
    censored = sum(1 for result in results if result.terminal is Terminal.CENSORED)
    fraction = censored / len(results)
    flagged = fraction > config.CENSORED_FLAG_FRACTION
    if flagged:
        log.warning(f"{fraction:.2%} of the paths were censored at the step limit.")
    return fraction, flagged


def binomial_halfwidth(p: float, n: int, confidence: Optional[float] = None) -> float:
    confidence = confidence or config.CONFIDENCE
    z = norm.ppf(1 - (1 - confidence) / 2)
    return float(z * math.sqrt(max(p * (1 - p), 0.0) / n)) if n > 0 else INF


def hitting_probability(spec: DiffusionSpec, a: float, x: float, b: float, tol: Optional[float] = None) -> Approx:
    """
    P^x(T_b < T_a) = (s(x) - s(a))/(s(b) - s(a)).
    """
    start, current, end = (spec.s.eval(point, tol) for point in (a, x, b))
    width = end - start
    value = (current.value - start.value) / width.value
    error = (current.error + start.error) / width.lower + abs(value) * width.error / width.lower
    return Approx(value, error)


@dataclass(frozen=True)
class HittingEstimate:
    spec_id: str
    a: float
    x: float
    b: float
    n: int
    p_hat: float
    ci: float
    formula_p: float
    censored_fraction: float
    flagged: bool
    snapped: bool

    @property
    def passed(self) -> bool:
        return abs(self.p_hat - self.formula_p) <= self.ci and not self.flagged

    def as_row(self) -> dict:
        return {
            "spec_id": self.spec_id,
            "a": self.a,
            "x": self.x,
            "b": self.b,
            "n": self.n,
            "p_hat": self.p_hat,
            "ci": self.ci,
            "formula_p": self.formula_p,
            "pass": self.passed,
        }


def estimate_hitting(spec: DiffusionSpec, a: float, x: float, b: float, n_paths: int, cfg: SimConfig,
                     spec_id: str = "") -> HittingEstimate:
    """
    Fraction of uncensored paths leaving (a, b) on the right, with a binomial confidence half-width.
    """
    walk = window_walk(spec, a, x, b, cfg)
    results = run_paths(walk, n_paths, cfg)

    censored_fraction, flagged = _censoring(results)
    finished = [result for result in results if result.terminal is not Terminal.CENSORED]
    hits = sum(1 for result in finished if result.terminal is Terminal.HIT_RIGHT)
    p_hat = hits / len(finished) if finished else math.nan
    return HittingEstimate(
        spec_id=spec_id or spec.name,
        a=a, x=x, b=b, n=n_paths,
        p_hat=p_hat,
        ci=binomial_halfwidth(p_hat, len(finished)) if finished else INF,
        formula_p=hitting_probability(spec, a, x, b).value,
        censored_fraction=censored_fraction,
        flagged=flagged,
        snapped=walk.snapped,
    )


@dataclass(frozen=True)
class ExitTimeEstimate:
    spec_id: str
    a: float
    x: float
    b: float
    n: int
    mean: float
    stderr: float
    censored_fraction: float
    flagged: bool

    def as_row(self) -> dict:
        return {
            "spec_id": self.spec_id,
            "a": self.a,
            "x": self.x,
            "b": self.b,
            "n": self.n,
            "mean": self.mean,
            "stderr": self.stderr,
        }


def estimate_exit_time(spec: DiffusionSpec, a: float, x: float, b: float, n_paths: int, cfg: SimConfig,
                       spec_id: str = "") -> ExitTimeEstimate:
    """
    Sample mean of the exit time from (a, b) and its standard error.
    """
    if not spec.is_strongly_local:
        log.warning("Killing shortens the lifetimes, the mean exit time estimate is biased.")
    walk = window_walk(spec, a, x, b, cfg)
    results = run_paths(walk, n_paths, cfg)

    censored_fraction, flagged = _censoring(results)
    lifetimes = [result.lifetime for result in results if result.terminal is not Terminal.CENSORED]
    count = len(lifetimes)
    mean = math.fsum(lifetimes) / count if count else math.nan
    if count > 1:
        variance = math.fsum((value - mean) ** 2 for value in lifetimes) / (count - 1)
        stderr = math.sqrt(variance / count)
    else:
        stderr = INF
    return ExitTimeEstimate(spec_id or spec.name, a, x, b, n_paths, mean, stderr, censored_fraction, flagged)


@dataclass(frozen=True)
class SurvivalEstimate:
    spec_id: str
    x: float
    horizon: float
    n: int
    fraction: float
    killed: int
    absorbed: int
    censored: int
    censored_fraction: float
    flagged: bool

    def as_row(self) -> dict:
        return {
            "spec_id": self.spec_id,
            "x": self.x,
            "horizon": self.horizon,
            "n": self.n,
            "fraction": self.fraction,
            "killed": self.killed,
            "absorbed": self.absorbed,
        }


def survival_walk(spec: DiffusionSpec, x: float, cfg: SimConfig) -> NaturalScaleWalk:
    """
    Walk over the whole interval: first-class ends reflect, third-class ends absorb and
    second-class sides are cut config.SURVIVAL_SPAN_STEPS steps away from x, reflecting there.
    """
    if not spec.interval.contains(x):
        raise PreconditionViolated(f"{x} is not in {spec.interval}")
    classes = {side: boundary_class(spec, side) for side in Side}
    ends = {
        side: None if klass is BoundaryClass.SECOND else side.endpoint(spec.interval)
        for side, klass in classes.items()
    }
    reflect_left = classes[Side.LEFT] is BoundaryClass.FIRST
    reflect_right = classes[Side.RIGHT] is BoundaryClass.FIRST
    return build_walk(
        spec, ends[Side.LEFT], x, ends[Side.RIGHT], cfg, reflect_left, reflect_right,
        span_steps=config.SURVIVAL_SPAN_STEPS,
    )


def estimate_survival(spec: DiffusionSpec, x: float, horizon: float, n_paths: int, cfg: SimConfig,
                      spec_id: str = "") -> SurvivalEstimate:
    """
    Fraction of uncensored paths neither killed nor absorbed by model time `horizon`.
    """
    if not horizon > 0:
        raise PreconditionViolated("survival horizon must be positive")
    walk = survival_walk(spec, x, cfg)
    results = run_paths(walk, n_paths, cfg, horizon)

    censored_fraction, flagged = _censoring(results)
    counts = {terminal: 0 for terminal in Terminal}
    for result in results:
        counts[result.terminal] += 1
    # a censored path stopped short of the horizon with its fate unknown
    finished = n_paths - counts[Terminal.CENSORED]
    return SurvivalEstimate(
        spec_id=spec_id or spec.name,
        x=x,
        horizon=horizon,
        n=n_paths,
        fraction=counts[Terminal.ALIVE] / finished if finished else math.nan,
        killed=counts[Terminal.KILLED],
        absorbed=counts[Terminal.HIT_LEFT] + counts[Terminal.HIT_RIGHT],
        censored=counts[Terminal.CENSORED],
        censored_fraction=censored_fraction,
        flagged=flagged,
    )
