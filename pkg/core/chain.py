import logging
import math
from collections import deque
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import block_diag
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .configuration import config
from .exception import ChainException, EmptyCone, PreconditionViolated
from .form import DiffusionSpec
from .measure import Interval, PiecewiseLinear, RadonMeasure
from .scale import integrate_composed

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FiniteChain:
    """
    A continuous-time chain on states 0..n-1 given by its generator Q:
    Q[i, j] ≥ 0 off the diagonal, Q[i, i] = -Σ_j Q[i, j] - κ_i with killing rate κ_i ≥ 0.
    """
    generator: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.generator, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 1:
            raise ChainException(f"generator must be a non-empty square matrix, got shape {q.shape}")
        if not np.all(np.isfinite(q)):
            raise ChainException("generator entries must be finite")
        off_diagonal = q - np.diag(np.diag(q))
        if np.any(off_diagonal < 0):
            raise ChainException("off-diagonal rates must be nonnegative")
        row_sums = q.sum(axis=1)
        slack = 1e-12 * np.maximum(1.0, np.abs(np.diag(q)))
        if np.any(row_sums > slack):
            raise ChainException("generator rows must sum to at most zero")
        object.__setattr__(self, "generator", q)

    @classmethod
    def from_rates(cls, rates: np.ndarray, killing: Optional[Sequence[float]] = None) -> "FiniteChain":
        rates = np.array(rates, dtype=float)
        np.fill_diagonal(rates, 0.0)
        killing = np.zeros(rates.shape[0]) if killing is None else np.asarray(killing, dtype=float)
        if np.any(killing < 0):
            raise ChainException("killing rates must be nonnegative")
        return cls(rates - np.diag(rates.sum(axis=1) + killing))

    @classmethod
    def birth_death(
            cls, up: Sequence[float], down: Sequence[float], killing: Optional[Sequence[float]] = None,
    ) -> "FiniteChain":
        """
        States 0..n-1 with rate up[i] from i to i+1 and down[i] from i+1 to i (both of length n-1).
        """
        if len(up) != len(down):
            raise ChainException("up and down rates must have the same length")
        n = len(up) + 1
        rates = np.zeros((n, n))
        for i, (forward, backward) in enumerate(zip(up, down)):
            rates[i, i + 1] = forward
            rates[i + 1, i] = backward
        return cls.from_rates(rates, killing)

    @property
    def n(self) -> int:
        return self.generator.shape[0]

    @property
    def rates(self) -> np.ndarray:
        rates = self.generator.copy()
        np.fill_diagonal(rates, 0.0)
        return rates

    @property
    def killing(self) -> np.ndarray:
        return np.maximum(0.0, -self.generator.sum(axis=1))

    def jump_probabilities(self) -> np.ndarray:
        """
        Embedded jump chain: row i is the law of the next state given a jump (killing excluded).
        """
        rates = self.rates
        totals = rates.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(totals > 0, rates / totals, 0.0)

    def disjoint_union(self, other: "FiniteChain") -> "FiniteChain":
        return FiniteChain(block_diag(self.generator, other.generator))

    def dump(self) -> dict:
        return {"rates": self.rates.tolist(), "killing": self.killing.tolist()}

    def __str__(self):
        return f"<FiniteChain n={self.n}>"


@dataclass(frozen=True, eq=False)
class MeasureCone:
    """
    Nonnegative solutions of detailed balance, spanned by vectors with disjoint supports.
    Every basis vector has 1 as its first nonzero entry.
    """
    basis: Tuple[np.ndarray, ...]

    @property
    def dimension(self) -> int:
        return len(self.basis)

    def dump(self) -> dict:
        return {"dimension": self.dimension, "basis": [vector.tolist() for vector in self.basis]}


def is_irreducible(chain: FiniteChain) -> bool:
    """
    True iff the directed graph of positive rates is strongly connected.
    """
    count, _ = connected_components(csr_matrix(chain.rates > 0), directed=True, connection="strong")
    return bool(count == 1)


def resolvent(chain: FiniteChain, alpha: float) -> np.ndarray:
    """
    U^α = (αI - Q)^-1.
    """
    if not alpha > 0:
        raise PreconditionViolated(f"resolvent needs alpha > 0, got {alpha}")
    matrix = alpha * np.eye(chain.n) - chain.generator
    return np.linalg.solve(matrix, np.eye(chain.n))


@dataclass(frozen=True)
class IrreducibilityReport:
    irreducible: bool
    columns_full: bool
    columns_all_or_nothing: bool
    row_sums_bounded: bool

    @property
    def consistent(self) -> bool:
        return self.irreducible == self.columns_full == self.columns_all_or_nothing and self.row_sums_bounded

    def dump(self) -> dict:
        return {
            "irreducible": self.irreducible,
            "columns_full": self.columns_full,
            "columns_all_or_nothing": self.columns_all_or_nothing,
            "row_sums_bounded": self.row_sums_bounded,
            "consistent": self.consistent,
        }


def irreducibility_report(chain: FiniteChain, alpha: Optional[float] = None) -> IrreducibilityReport:
    """
    Compares irreducibility with the positivity pattern of the resolvent columns:
    irreducible iff every column of U^α is positive everywhere iff every column is either zero or positive everywhere.
    """
    alpha = alpha or config.RESOLVENT_ALPHA
    u = resolvent(chain, alpha)
    positive = u > config.POSITIVITY_ATOL
    all_or_nothing = all(column.all() or not column.any() for column in positive.T)
    row_sums_bounded = bool(np.all(u.sum(axis=1) <= (1 + 1e-9) / alpha)) and bool(np.all(u >= -config.POSITIVITY_ATOL))
    return IrreducibilityReport(
        irreducible=is_irreducible(chain),
        columns_full=bool(positive.all()),
        columns_all_or_nothing=all_or_nothing,
        row_sums_bounded=row_sums_bounded,
    )


def symmetrizing_basis(chain: FiniteChain) -> MeasureCone:
    """
    Basis of the nonnegative π with π_i Q_ij = π_j Q_ji for all i ≠ j.

    A one-way rate i→j forces π_i = 0. Two-way rates fix ratios inside their connected pieces;
    a piece whose ratios disagree around a cycle (Kolmogorov's criterion) only admits zero.

    Raises:
        EmptyCone when only π = 0 solves.
    """
    rates = chain.rates
    n = chain.n
    two_way = (rates > 0) & (rates.T > 0)
    forced_zero = np.any((rates > 0) & (rates.T == 0), axis=1)

    pieces_count, labels = connected_components(csr_matrix(two_way), directed=False)
    basis: List[np.ndarray] = []
    for piece in range(pieces_count):
        members = np.flatnonzero(labels == piece)
        if forced_zero[members].any():
            continue

        root = int(members[0])
        weights = np.zeros(n)
        weights[root] = 1.0
        queue = deque([root])
        seen = {root}
        while queue:
            i = queue.popleft()
            for j in np.flatnonzero(two_way[i]):
                if j not in seen:
                    weights[j] = weights[i] * rates[i, j] / rates[j, i]
                    seen.add(int(j))
                    queue.append(int(j))

        flows = weights[:, None] * rates
        balanced = np.allclose(flows[two_way], flows.T[two_way], rtol=config.BALANCE_RTOL, atol=0.0)
        if not balanced:
            log.debug(f"Detailed balance fails around a cycle through state {root}")
            continue
        basis.append(weights)

    if not basis:
        raise EmptyCone("only the zero measure satisfies detailed balance")
    return MeasureCone(tuple(basis))


##########
# Diffusion to chain
##########
def _check_grid(spec: DiffusionSpec, grid: Sequence[float]) -> List[float]:
    grid = [float(x) for x in grid]
    if len(grid) < 3:
        raise ChainException("a grid needs at least 3 points")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ChainException("grid points must be strictly increasing")
    closure = spec.interval.closure()
    if any(math.isinf(x) or not closure.contains(x) for x in grid):
        raise ChainException(f"grid points must be finite points of the closure of {spec.interval}")
    return grid


def _cell(spec: DiffusionSpec, grid: List[float], index: int) -> Interval:
    lo = grid[max(0, index - 1)]
    hi = grid[min(len(grid) - 1, index + 1)]
    lo_included = index == 0 and spec.interval.contains(lo)
    hi_included = index == len(grid) - 1 and spec.interval.contains(hi)
    return Interval(lo, hi, lo_included, hi_included)


def _hat(natural: List[float], index: int) -> PiecewiseLinear:
    # φ_i in natural scale; the end nodes get half hats
    if index == 0:
        return PiecewiseLinear((natural[0], natural[1]), (1.0, 0.0))
    if index == len(natural) - 1:
        return PiecewiseLinear((natural[-2], natural[-1]), (0.0, 1.0))
    return PiecewiseLinear.hat(natural[index - 1], natural[index], natural[index + 1])


# tighter evaluations tried, each 256 times finer, while neighbouring grid points overlap in natural scale
SEPARATION_ROUNDS = 8


def natural_grid(spec: DiffusionSpec, grid: List[float], tol: float) -> List[float]:
    """
    s at the grid points. Overlapping neighbours are re-evaluated more tightly until their enclosures separate;
    points that still share one float value have no s-increase a float grid can carry.
    """
    current = tol
    natural = [spec.s.eval(x, current) for x in grid]
    for _ in range(SEPARATION_ROUNDS):
        overlapping = [i for i in range(len(grid) - 1) if natural[i + 1].lower <= natural[i].upper]
        if not overlapping:
            break
        current /= 256
        log.debug(f"{len(overlapping)} grid cells overlap in natural scale, evaluating s at tol {current:.3g}")
        for i in {j for i in overlapping for j in (i, i + 1)}:
            natural[i] = spec.s.eval(grid[i], current)

    values = [value.value for value in natural]
    for i in range(len(grid) - 1):
        if values[i + 1] <= values[i]:
            raise ChainException(
                f"grid is degenerate in natural scale: s({grid[i]}) and s({grid[i + 1]}) do not separate"
            )
    return values


def cell_masses(
        spec: DiffusionSpec, grid: Sequence[float], measure: Optional[RadonMeasure] = None,
        tol: Optional[float] = None,
) -> np.ndarray:
    """
    ∫ φ_i(s(z)) μ(dz) for the natural-scale hat functions φ_i of the grid (μ = m by default).
    """
    tol = tol or config.DEFAULT_TOL
    measure = spec.m if measure is None else measure
    grid = _check_grid(spec, grid)
    natural = natural_grid(spec, grid, tol)

    masses = np.zeros(len(grid))
    if measure.is_zero:
        return masses
    for index in range(len(grid)):
        cell = _cell(spec, grid, index)
        knots = [grid[j] for j in range(max(0, index - 1), min(len(grid), index + 2))]
        masses[index] = integrate_composed(
            measure, spec.s, _hat(natural, index), cell, tol / len(grid), x_knots=knots
        ).value
    return masses


def discretize(spec: DiffusionSpec, grid: Sequence[float], tol: Optional[float] = None) -> FiniteChain:
    """
    Birth-death chain on the grid, reflecting at both ends.

    Jumps follow the two-point hitting law p_up(i) = (s(x_i) - s(x_i-1))/(s(x_i+1) - s(x_i-1)), the mean holding
    time at an interior node is the mean exit time from (x_i-1, x_i+1), i.e. 2Δ⁻Δ⁺/(Δ⁻ + Δ⁺)·π_i with π_i the hat
    mass of m, and the killing rate is ∫φ_i dk / π_i. The hat masses π then satisfy detailed balance:
    π_i·up_i = 1/(2Δ⁺_i).
    """
    tol = tol or config.DEFAULT_TOL
    grid = _check_grid(spec, grid)
    natural = natural_grid(spec, grid, tol)
    speed = cell_masses(spec, grid, spec.m, tol)
    if np.any(speed <= 0):
        raise ChainException("a grid cell carries no speed mass")
    killing = cell_masses(spec, grid, spec.k, tol) / speed

    steps = np.diff(natural)
    up = 1.0 / (2.0 * steps * speed[:-1])
    down = 1.0 / (2.0 * steps * speed[1:])
    log.debug(f"Discretized {spec.name or 'spec'} on {len(grid)} nodes")
    return FiniteChain.birth_death(up, down, killing)
