"""Partition functions: nested log-space quadrature for small n, the h_n ratio estimator, telescoping."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import comb, logsumexp, roots_jacobi

from .domains import Domain, DomainGrid, IntervalUnion
from .ensembles import ChainResult, batch_means, run_chains
from .errors import ConfigError, InsufficientDataError, QuadratureCostError, UnequilibratedChainWarning
from .fields import FieldSpec
from .potential import EquilibriumSolution

logger = logging.getLogger(__name__)

MAX_EXACT_N = 3
EVALUATION_BUDGET = 5e7
DEFAULT_ORDER = 24
DEFAULT_PIECES = 4


@dataclass(frozen=True)
class PartitionRecord:
    """log Z (or log h) with its method and error estimate."""

    n: int
    beta: float
    field_tag: str
    value_log: float
    method: str
    error_estimate: float
    equilibrated: bool = True

    def __post_init__(self) -> None:
        if not math.isfinite(self.value_log):
            raise ValueError(f"log value must be finite, got {self.value_log}")
        if self.error_estimate < 0:
            raise ValueError("error estimate must be nonnegative")

    def to_row(self) -> list:
        return [self.n, self.beta, self.method, self.value_log, self.error_estimate]


# --------------------------------------------------------------------- one-point rules


@lru_cache(maxsize=64)
def _jacobi_rule(order: int, right: float, left: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and log weights for weight (1-x)^right (1+x)^left on [-1, 1]."""
    x, w = roots_jacobi(order, right, left)
    return x, np.log(w)


def _uses_panels(grid: DomainGrid) -> bool:
    return isinstance(grid.geometry, IntervalUnion) and grid.tau_is_uniform


def _clip_intervals(intervals, region: Optional[Domain]) -> list[tuple[float, float]]:
    if region is None:
        return list(intervals)
    if not isinstance(region, IntervalUnion):
        raise ConfigError("real panel quadrature accepts interval regions only")
    out = []
    for a, b in intervals:
        for c, d in region.intervals:
            lo, hi = max(a, c), min(b, d)
            if hi > lo:
                out.append((lo, hi))
    return out


def _panel_rule(grid: DomainGrid, fixed: np.ndarray, beta: float, region: Optional[Domain], order: int,
                pieces: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss–Jacobi panels split at the fixed points; the |w - z|^beta factor at a panel end goes into the weight."""
    density_log = float(grid.log_tau_density(grid.nodes[:1])[0])
    fixed_real = np.sort(fixed.real[np.abs(fixed.imag) < 1e-14]) if fixed.size else np.zeros(0)
    nodes_out, logw_out = [], []
    for a, b in _clip_intervals(grid.geometry.intervals, region):
        cuts = np.linspace(a, b, pieces + 1)
        inner = fixed_real[(fixed_real > a) & (fixed_real < b)]
        edges = np.unique(np.concatenate([cuts, inner]))
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi - lo <= 0:
                continue
            left_sing = bool(np.any(np.abs(fixed_real - lo) <= 1e-14 * max(1.0, abs(lo))))
            right_sing = bool(np.any(np.abs(fixed_real - hi) <= 1e-14 * max(1.0, abs(hi))))
            x, logw = _jacobi_rule(order, beta if right_sing else 0.0, beta if left_sing else 0.0)
            half = 0.5 * (hi - lo)
            w_nodes = 0.5 * (lo + hi) + half * x
            logw = logw + math.log(half) + density_log
            # |w - end|^beta = half^beta (1 -/+ x)^beta; the (1 -/+ x)^beta part is in the weight.
            logw = logw + beta * math.log(half) * (int(left_sing) + int(right_sing))
            others = fixed_real[(np.abs(fixed_real - lo) > 1e-14 * max(1.0, abs(lo))) &
                                (np.abs(fixed_real - hi) > 1e-14 * max(1.0, abs(hi)))] if (left_sing or right_sing) \
                else fixed_real
            if others.size:
                logw = logw + beta * np.log(np.abs(w_nodes[:, None] - others[None, :])).sum(axis=1)
            nodes_out.append(w_nodes.astype(complex))
            logw_out.append(logw)
    if not nodes_out:
        return np.zeros(0, dtype=complex), np.zeros(0)
    return np.concatenate(nodes_out), np.concatenate(logw_out)


def _cell_rule(grid: DomainGrid, fixed: np.ndarray, beta: float, region: Optional[Domain]) -> tuple[np.ndarray, np.ndarray]:
    mask = grid.eligible.copy()
    if region is not None:
        mask &= region.contains(grid.nodes)
    nodes = grid.nodes[mask]
    with np.errstate(divide="ignore"):
        logw = np.log(grid.tau_mass[mask])
        if fixed.size:
            logw = logw + beta * np.log(np.abs(nodes[:, None] - fixed[None, :])).sum(axis=1)
    return nodes, logw


def one_point_rule(grid: DomainGrid, field: FieldSpec, fixed, n: int, region: Optional[Domain] = None,
                   order: int = DEFAULT_ORDER, pieces: int = DEFAULT_PIECES) -> tuple[np.ndarray, np.ndarray]:
    """Nodes w_k and log weights so that sum_k e^{logw_k} f(w_k) ~ int e^{-2nQ(w)} prod_j |w - z_j|^beta f(w) dtau(w)."""
    fixed = np.atleast_1d(np.asarray(fixed, dtype=complex))
    if _uses_panels(grid):
        if region is None or isinstance(region, IntervalUnion):
            nodes, logw = _panel_rule(grid, fixed, field.beta, region, order, pieces)
        else:
            nodes, logw = _panel_rule(grid, fixed, field.beta, None, order, pieces)
            keep = region.contains(nodes)
            nodes, logw = nodes[keep], logw[keep]
    else:
        nodes, logw = _cell_rule(grid, fixed, field.beta, region)
    return nodes, logw - 2.0 * n * np.asarray(field.q(nodes), dtype=float)


def log_point_integral(grid: DomainGrid, field: FieldSpec, points, n: int, region: Optional[Domain] = None,
                       order: int = DEFAULT_ORDER) -> float:
    """log int_Y e^{-2nQ(w)} prod_j |w - z_j|^beta dtau(w)."""
    _, logw = one_point_rule(grid, field, points, n, region, order)
    return float(logsumexp(logw)) if logw.size else -math.inf


# --------------------------------------------------------------------- nested quadrature


def _estimated_cost(grid: DomainGrid, n: int, order: int, pieces: int) -> float:
    if _uses_panels(grid):
        per_level = order * (len(grid.geometry.intervals) * pieces + n)
    else:
        per_level = int(np.count_nonzero(grid.eligible))
    return float(per_level) ** n


def _nested_log(grid: DomainGrid, field: FieldSpec, n: int, regions: Sequence[Optional[Domain]],
                first_weight: Optional[Callable[[np.ndarray], np.ndarray]], order: int, pieces: int) -> float:
    """log of the n-fold integral of the joint density, coordinate k restricted to regions[k]."""
    if n > MAX_EXACT_N:
        raise QuadratureCostError(f"tensor quadrature refuses n={n} > {MAX_EXACT_N}")
    cost = _estimated_cost(grid, n, order, pieces)
    if cost > EVALUATION_BUDGET:
        raise QuadratureCostError(f"tensor quadrature needs ~{cost:.3g} evaluations, budget {EVALUATION_BUDGET:.3g}")

    def level(fixed: np.ndarray, k: int) -> float:
        nodes, logw = one_point_rule(grid, field, fixed, n, regions[k], order, pieces)
        if k == 0 and first_weight is not None:
            with np.errstate(divide="ignore"):
                logw = logw + np.log(first_weight(nodes))
        if nodes.size == 0:
            return -math.inf
        if k == n - 1:
            return float(logsumexp(logw))
        inner = np.array([level(np.append(fixed, w), k + 1) for w in nodes])
        return float(logsumexp(logw + inner))

    return level(np.zeros(0, dtype=complex), 0)


def _coarser(grid: DomainGrid) -> DomainGrid:
    if grid.resolution < 4:
        raise ConfigError("grid too coarse for an error estimate")
    return DomainGrid.build(grid.geometry, grid.resolution // 2, grid.tau_scale, grid.truncation_radius,
                            grid.unbounded)


def _with_error(grid: DomainGrid, compute: Callable[[DomainGrid, int], float], order: int) -> tuple[float, float]:
    """Value and error estimate: order doubling for panels, grid coarsening for cell sums."""
    value = compute(grid, order)
    if _uses_panels(grid):
        other = compute(grid, 2 * order)
        return other, abs(other - value)
    if grid.resolution >= 4 and grid.tau_is_uniform:
        return value, abs(value - compute(_coarser(grid), order))
    return value, 0.0


def exact_partition_small_n(grid: DomainGrid, field: FieldSpec, n: int, order: int = DEFAULT_ORDER,
                            pieces: int = DEFAULT_PIECES) -> PartitionRecord:
    """log Z_n by nested quadrature, n in {1, 2, 3}."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    if n > MAX_EXACT_N:
        raise QuadratureCostError(f"exact partition function refuses n={n} > {MAX_EXACT_N}")
    value, err = _with_error(
        grid, lambda g, o: _nested_log(g, field, n, [None] * n, None, o, pieces), order)
    logger.debug("exact log Z_%d = %.12g (err %.2g)", n, value, err)
    return PartitionRecord(n=n, beta=field.beta, field_tag=field.tag, value_log=value, method="quadrature",
                           error_estimate=err)


def exact_outlier_prob(grid: DomainGrid, field: FieldSpec, n: int, window: Domain, any_coordinate: bool = False,
                       order: int = DEFAULT_ORDER, pieces: int = DEFAULT_PIECES) -> float:
    """psi_n(W) (or the any-coordinate probability by inclusion–exclusion) by quadrature."""
    log_z = _nested_log(grid, field, n, [None] * n, None, order, pieces)

    def restricted(k: int) -> float:
        regions = [window] * k + [None] * (n - k)
        log_w = _nested_log(grid, field, n, regions, None, order, pieces)
        return math.exp(log_w - log_z) if log_w > -math.inf else 0.0

    if not any_coordinate:
        return min(max(restricted(1), 0.0), 1.0)
    total = sum((-1) ** (k + 1) * comb(n, k, exact=True) * restricted(k) for k in range(1, n + 1))
    return min(max(total, 0.0), 1.0)


def exact_moment(grid: DomainGrid, field: FieldSpec, n: int, func: Optional[Callable] = None,
                 order: int = DEFAULT_ORDER, pieces: int = DEFAULT_PIECES) -> float:
    """E[func(z_1)] by quadrature; func defaults to |z|^2 and must be nonnegative."""
    func = func or (lambda z: np.abs(z) ** 2)
    log_z = _nested_log(grid, field, n, [None] * n, None, order, pieces)
    log_m = _nested_log(grid, field, n, [None] * n, func, order, pieces)
    return math.exp(log_m - log_z)


# --------------------------------------------------------------------- ratio estimator


def ratio_chain_field(field: FieldSpec, n: int) -> FieldSpec:
    """Potential nQ/(n-1) of the (n-1)-point ensemble sampled for h_n."""
    return field.scaled(n / (n - 1))


def ratio_estimate_h_n(grid: DomainGrid, field: FieldSpec, n: int, chains: Sequence[ChainResult],
                       order: int = DEFAULT_ORDER, max_samples: int = 4000, batches: int = 20) -> PartitionRecord:
    """log h_n = log Z_n(Q) - log Z_{n-1}(nQ/(n-1)) from chains of the (n-1)-point ensemble."""
    if n < 2:
        raise ConfigError("h_n needs n >= 2")
    equilibrated = all(c.equilibrated for c in chains)
    if not equilibrated:
        warnings.warn(UnequilibratedChainWarning(f"h_{n}: some chains are not equilibrated"), stacklevel=2)
    per_chain = []
    total = sum(c.samples.shape[0] for c in chains)
    if total == 0:
        raise InsufficientDataError("no chain samples for the ratio estimator")
    step = max(1, total // max_samples)
    for chain in chains:
        if chain.samples.shape[1] != n - 1:
            raise ConfigError(f"h_{n} needs chains of {n - 1} points, got {chain.samples.shape[1]}")
        rows = chain.samples[::step]
        per_chain.append(np.array([log_point_integral(grid, field, row, n, order=order) for row in rows]))
    flat = np.concatenate(per_chain)
    shift = float(flat.max())
    mean, stderr, _ = batch_means([np.exp(v - shift) for v in per_chain], batches)
    value = shift + math.log(mean)
    error = stderr / mean
    logger.info("log h_%d = %.6f +- %.2g (%d samples)", n, value, error, flat.size)
    return PartitionRecord(n=n, beta=field.beta, field_tag=field.tag, value_log=value, method="ratio-chain",
                           error_estimate=error, equilibrated=equilibrated)


def ratio_chains(grid: DomainGrid, field: FieldSpec, n: int, seeds: Sequence[int], sweeps: int,
                 burn_in: Optional[int] = None, thin: int = 1, **kwargs) -> list[ChainResult]:
    """Chains targeting the (n-1)-point ensemble with potential nQ/(n-1)."""
    return run_chains(n - 1, ratio_chain_field(field, n), grid, seeds, sweeps, burn_in=burn_in, thin=thin, **kwargs)


@dataclass(frozen=True)
class TelescopeResult:
    record: PartitionRecord
    anchor: PartitionRecord
    steps: tuple[PartitionRecord, ...]


def telescoped_log_partition(grid: DomainGrid, field: FieldSpec, n: int, seeds: Sequence[int], sweeps: int,
                             burn_in: Optional[int] = None, anchor: int = 2, thin: int = 1,
                             order: int = DEFAULT_ORDER) -> TelescopeResult:
    """log Z_n(Q) = sum_{k=anchor+1..n} log h_k(nQ/k) + log Z_anchor(nQ/anchor)."""
    if not 1 <= anchor <= MAX_EXACT_N:
        raise ConfigError(f"anchor must be in 1..{MAX_EXACT_N}")
    if n < anchor:
        raise ConfigError(f"n={n} below the anchor {anchor}")
    base = exact_partition_small_n(grid, field.scaled(n / anchor), anchor, order)
    steps = []
    for k in range(anchor + 1, n + 1):
        field_k = field.scaled(n / k)
        chains = ratio_chains(grid, field_k, k, seeds, sweeps, burn_in=burn_in, thin=thin)
        steps.append(ratio_estimate_h_n(grid, field_k, k, chains, order=order))
    value = base.value_log + sum(s.value_log for s in steps)
    error = math.sqrt(base.error_estimate ** 2 + sum(s.error_estimate ** 2 for s in steps))
    record = PartitionRecord(n=n, beta=field.beta, field_tag=field.tag, value_log=value, method="telescoped",
                             error_estimate=error, equilibrated=all(s.equilibrated for s in steps))
    return TelescopeResult(record=record, anchor=base, steps=tuple(steps))


# --------------------------------------------------------------------- checks


@dataclass(frozen=True)
class EnergyScalingReport:
    rows: tuple[tuple[int, float], ...]
    target: float
    final_gap: float
    passed: bool


def energy_scaling_check(records: Sequence[PartitionRecord], sol: EquilibriumSolution, beta: Optional[float] = None,
                         rel_tol: float = 0.15, abs_tol: float = 0.1) -> EnergyScalingReport:
    """(1/n^2) log Z_n against -(beta/2) E(mu)."""
    anchored = [r for r in records if r.method in ("quadrature", "telescoped")]
    if not anchored:
        raise InsufficientDataError("energy scaling check is missing an anchored log Z_n")
    beta = sol.beta if beta is None else beta
    target = -0.5 * beta * sol.energy
    rows = tuple(sorted((r.n, r.value_log / r.n ** 2) for r in anchored))
    final = rows[-1][1]
    gap = abs(final - target)
    passed = gap <= abs_tol if abs(target) < 1e-6 else gap <= rel_tol * abs(target)
    return EnergyScalingReport(rows=rows, target=target, final_gap=gap, passed=passed)


@dataclass(frozen=True)
class RatioRow:
    n: int
    per_n: float
    target: float
    error: float

    def to_row(self) -> list:
        return [self.n, self.per_n, self.target, self.error]


def ratio_study(grid: DomainGrid, field: FieldSpec, n_grid: Sequence[int], sol: EquilibriumSolution,
                seeds: Sequence[int], sweeps: int, burn_in: Optional[int] = None, thin: int = 1,
                order: int = DEFAULT_ORDER) -> list[RatioRow]:
    """(n, (1/n) log h_n, -rho beta) for each n of the grid."""
    target = -sol.rho * field.beta
    rows = []
    for n in n_grid:
        chains = ratio_chains(grid, field, n, seeds, sweeps, burn_in=burn_in, thin=thin)
        rec = ratio_estimate_h_n(grid, field, n, chains, order=order)
        rows.append(RatioRow(n=int(n), per_n=rec.value_log / n, target=target, error=rec.error_estimate / n))
    return rows
