"""Beta-ensembles: joint density, Metropolis chains, outlier estimates and rate fits."""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy import sparse, stats
from scipy.optimize import linprog

from .domains import Domain, DomainGrid
from .errors import (
    ConfigError,
    InsufficientDataError,
    RareEventWarning,
    UnequilibratedChainWarning,
)
from .fields import FieldSpec
from .potential import EquilibriumSolution, green_function, rate_function

logger = logging.getLogger(__name__)

TARGET_ACCEPTANCE = 0.3
MIN_BURN_IN = 5000
DEFAULT_CHAINS = 8
DEFAULT_N_GRID = (8, 16, 24, 32, 48, 64)
COHERENCE_EVERY = 1000
COHERENCE_TOL = 1e-9

SampleSink = Callable[[int, int, np.ndarray], None]


@dataclass(frozen=True, eq=False)
class EnsembleConfig:
    """n coordinates in Y with field Q, plus the outlier window W."""

    n: int
    field: FieldSpec
    grid: DomainGrid
    window: Domain

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ConfigError("ensemble needs n >= 1")
        if not self.window.within_box_of(self.grid.geometry):
            raise ConfigError("window W must lie in the bounding box of Y")
        if not np.all(self.grid.eligible):
            logger.warning("tau has zero-mass cells; the rate function assumes supp(tau) = Y")

    def with_n(self, n: int) -> "EnsembleConfig":
        return EnsembleConfig(n=int(n), field=self.field, grid=self.grid, window=self.window)


class EnsembleState:
    """n points with a cached log-gap matrix, Q values and log joint density."""

    def __init__(self, points, field: FieldSpec):
        self.points = np.array(points, dtype=complex).ravel()
        self.n = int(self.points.size)
        self.log_gaps = np.zeros((self.n, self.n))
        self.q_values = np.zeros(self.n)
        self.log_density = 0.0
        self.resync(field)

    def resync(self, field: FieldSpec) -> None:
        """Rebuild every cache from the points."""
        with np.errstate(divide="ignore"):
            gaps = np.log(np.abs(self.points[:, None] - self.points[None, :]))
        np.fill_diagonal(gaps, 0.0)
        self.log_gaps = gaps
        self.q_values = np.asarray(field.q(self.points), dtype=float)
        self.log_density = log_joint_density(self, field)

    def cache_error(self, field: FieldSpec) -> float:
        fresh = EnsembleState(self.points, field).log_density
        if not (math.isfinite(fresh) and math.isfinite(self.log_density)):
            return 0.0 if fresh == self.log_density else math.inf
        return abs(fresh - self.log_density)

    def copy(self) -> "EnsembleState":
        other = object.__new__(EnsembleState)
        other.points = self.points.copy()
        other.n = self.n
        other.log_gaps = self.log_gaps.copy()
        other.q_values = self.q_values.copy()
        other.log_density = self.log_density
        return other


def log_joint_density(state: EnsembleState, field: FieldSpec) -> float:
    """beta sum_{i<j} log|z_i - z_j| - 2n sum_i Q(z_i); -inf on coincident points."""
    pts = state.points
    n = pts.size
    if n > 1:
        iu = np.triu_indices(n, k=1)
        with np.errstate(divide="ignore"):
            pair = float(np.sum(np.log(np.abs(pts[iu[0]] - pts[iu[1]]))))
    else:
        pair = 0.0
    if pair == -math.inf:
        return -math.inf
    return field.beta * pair - 2.0 * n * float(np.sum(field.q(pts)))


def log_target(points, field: FieldSpec, grid: DomainGrid) -> float:
    """Log of the sampled density exp(log_joint_density) * prod tau-density(z_i)."""
    pts = np.asarray(points, dtype=complex)
    if not np.all(grid.contains(pts)):
        return -math.inf
    return log_joint_density(EnsembleState(pts, field), field) + float(np.sum(grid.log_tau_density(pts)))


def proposal_log_density(geometry: Domain, x: complex, y: complex, scale: float) -> float:
    """Log density of the random-walk proposal x -> y used by the geometry."""
    if geometry.kind == "circle":
        step = (np.angle(y - geometry.center) - np.angle(x - geometry.center))
        sigma = scale / geometry.radius
        wraps = step + 2.0 * np.pi * np.arange(-3, 4)
        return float(np.log(np.sum(stats.norm.pdf(wraps, scale=sigma))))
    if geometry.dimension == 1:
        return float(stats.norm.logpdf(y.real - x.real, scale=scale))
    return float(stats.norm.logpdf(y.real - x.real, scale=scale) + stats.norm.logpdf(y.imag - x.imag, scale=scale))


def log_acceptance_ratio(state: EnsembleState, i: int, y: complex, field: FieldSpec, grid: DomainGrid,
                         scale: float) -> float:
    """Metropolis–Hastings log ratio for moving coordinate i to y."""
    x = state.points[i]
    if not bool(grid.contains(y)):
        return -math.inf
    others = np.delete(state.points, i)
    with np.errstate(divide="ignore"):
        new_gaps = np.log(np.abs(y - others))
    if np.any(new_gaps == -math.inf):
        return -math.inf
    old_gaps = np.delete(state.log_gaps[i], i)
    q_new = float(field.q(y))
    delta = field.beta * (float(new_gaps.sum()) - float(old_gaps.sum()))
    delta -= 2.0 * state.n * (q_new - state.q_values[i])
    delta += float(grid.log_tau_density(y)[0] - grid.log_tau_density(x)[0])
    delta += proposal_log_density(grid.geometry, y, x, scale) - proposal_log_density(grid.geometry, x, y, scale)
    return delta


@dataclass
class ChainStats:
    """Counters of one chain; acceptance counts restart when adaptation freezes."""

    seed: int
    proposal_scale: float
    burn_in: int
    sweeps: int = 0
    proposed: int = 0
    accepted: int = 0
    adapting: bool = True
    coherence_failures: int = 0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0


def mcmc_sweep(state: EnsembleState, field: FieldSpec, grid: DomainGrid, stats_: ChainStats,
               rng: np.random.Generator) -> EnsembleState:
    """n single-coordinate Metropolis proposals; O(n) cache update per accepted move."""
    geometry = grid.geometry
    n = state.n
    scale = stats_.proposal_scale
    for i in range(n):
        x = state.points[i]
        y = geometry.propose(x, scale, rng)
        stats_.proposed += 1
        u = rng.random()
        if not bool(grid.contains(y)):
            continue
        with np.errstate(divide="ignore"):
            row = np.log(np.abs(y - state.points))
        row[i] = 0.0
        if np.any(row == -math.inf):
            continue
        q_new = float(field.q(y))
        pair_change = float(row.sum() - state.log_gaps[i].sum())
        delta = field.beta * pair_change - 2.0 * n * (q_new - state.q_values[i])
        if not grid.tau_is_uniform:
            delta += float(grid.log_tau_density(y)[0] - grid.log_tau_density(x)[0])
        if u == 0.0 or math.log(u) < delta:
            state.points[i] = y
            state.log_gaps[i, :] = row
            state.log_gaps[:, i] = row
            state.log_density += field.beta * pair_change - 2.0 * n * (q_new - state.q_values[i])
            state.q_values[i] = q_new
            stats_.accepted += 1
    stats_.sweeps += 1
    return state


@dataclass(frozen=True, eq=False)
class ChainResult:
    """Post-burn-in samples (rows are configurations) and the chain's final state."""

    chain_id: int
    samples: np.ndarray
    stats: ChainStats
    equilibrated: bool
    final_state: EnsembleState
    n: int = 0
    field_tag: str = ""
    sweep_index: np.ndarray = dataclass_field(default_factory=lambda: np.zeros(0, dtype=int))


def default_burn_in(total_sweeps: int) -> int:
    return max(int(0.2 * total_sweeps), MIN_BURN_IN)


def initial_points(n: int, grid: DomainGrid, rng: np.random.Generator) -> np.ndarray:
    """n distinct grid nodes drawn with probability proportional to tau mass."""
    p = grid.tau_mass / grid.tau_mass.sum()
    eligible = int(np.count_nonzero(p))
    if eligible < n:
        raise ConfigError(f"grid has {eligible} nodes with tau mass, cannot place {n} points")
    return grid.nodes[rng.choice(grid.n_nodes, size=n, replace=False, p=p)]


def _adapt(stats_: ChainStats, window_accepted: int, window_proposed: int, diameter: float) -> None:
    if window_proposed == 0:
        return
    rate = window_accepted / window_proposed
    new = stats_.proposal_scale * math.exp(rate - TARGET_ACCEPTANCE)
    stats_.proposal_scale = float(min(max(new, 1e-6 * diameter), diameter))


def run_chain(n: int, field: FieldSpec, grid: DomainGrid, seed: int, sweeps: int,
              burn_in: Optional[int] = None, thin: int = 1, chain_id: int = 0,
              initial: Optional[np.ndarray] = None, proposal_scale: Optional[float] = None,
              sample_sink: Optional[SampleSink] = None, adapt_every: int = 50) -> ChainResult:
    """One Metropolis chain: adaptive burn-in, then frozen-scale measurement sweeps.

    sweeps counts burn-in plus measurement. Every thin-th measurement sweep is
    recorded; sample_sink receives (chain_id, sweep, points) for each record.
    """
    burn_in = default_burn_in(sweeps) if burn_in is None else int(burn_in)
    if not 0 <= burn_in < sweeps:
        raise ConfigError(f"need 0 <= burn_in < sweeps, got burn_in={burn_in} sweeps={sweeps}")
    if thin < 1:
        raise ConfigError("thin must be >= 1")
    rng = np.random.default_rng(seed)
    pts = initial_points(n, grid, rng) if initial is None else np.asarray(initial, dtype=complex)
    state = EnsembleState(pts, field)
    diameter = max(grid.diameter, grid.cell_size)
    scale = proposal_scale if proposal_scale is not None else max(diameter / (4.0 * max(n, 1) ** 0.5), grid.cell_size)
    chain_stats = ChainStats(seed=int(seed), proposal_scale=float(scale), burn_in=burn_in)

    records = []
    sweep_index = []
    window_acc = window_prop = 0
    for sweep in range(sweeps):
        acc0, prop0 = chain_stats.accepted, chain_stats.proposed
        mcmc_sweep(state, field, grid, chain_stats, rng)
        if chain_stats.adapting:
            window_acc += chain_stats.accepted - acc0
            window_prop += chain_stats.proposed - prop0
            if (sweep + 1) % adapt_every == 0:
                _adapt(chain_stats, window_acc, window_prop, diameter)
                window_acc = window_prop = 0
            if sweep + 1 >= burn_in:
                chain_stats.adapting = False
                chain_stats.accepted = chain_stats.proposed = 0
                logger.debug("chain %d frozen proposal scale %.4g", chain_id, chain_stats.proposal_scale)
            continue
        if (sweep + 1) % COHERENCE_EVERY == 0:
            if state.cache_error(field) > COHERENCE_TOL:
                chain_stats.coherence_failures += 1
                state.resync(field)
        measured = sweep - burn_in
        if measured % thin == 0:
            records.append(state.points.copy())
            sweep_index.append(sweep)
            if sample_sink is not None:
                sample_sink(chain_id, sweep, state.points)

    coherent = state.cache_error(field) <= COHERENCE_TOL and chain_stats.coherence_failures == 0
    rate = chain_stats.acceptance_rate
    equilibrated = (not chain_stats.adapting) and coherent and 0.05 <= rate <= 0.95
    if not equilibrated:
        warnings.warn(UnequilibratedChainWarning(
            f"chain {chain_id} (seed {seed}, n={n}) not equilibrated: acceptance {rate:.3f}, "
            f"coherent={coherent}"), stacklevel=2)
    logger.info("chain %d n=%d seed=%d: %d samples, acceptance %.3f, scale %.4g",
                chain_id, n, seed, len(records), rate, chain_stats.proposal_scale)
    samples = np.array(records, dtype=complex).reshape(len(records), n)
    return ChainResult(chain_id=chain_id, samples=samples, stats=chain_stats, equilibrated=equilibrated,
                       final_state=state, n=n, field_tag=field.tag, sweep_index=np.asarray(sweep_index, dtype=int))


def run_chains(n: int, field: FieldSpec, grid: DomainGrid, seeds: Sequence[int], sweeps: int,
               burn_in: Optional[int] = None, thin: int = 1, sample_sink: Optional[SampleSink] = None,
               **kwargs) -> list[ChainResult]:
    """Independent chains, one per seed, run in seed order."""
    return [run_chain(n, field, grid, seed, sweeps, burn_in=burn_in, thin=thin, chain_id=k,
                      sample_sink=sample_sink, **kwargs)
            for k, seed in enumerate(seeds)]


@dataclass(frozen=True)
class EmpiricalMeasure:
    points: np.ndarray
    masses: np.ndarray


def empirical_measure(state) -> EmpiricalMeasure:
    """Mass 1/n at each of the n points."""
    pts = np.asarray(state.points if isinstance(state, EnsembleState) else state, dtype=complex).ravel()
    return EmpiricalMeasure(points=pts, masses=np.full(pts.size, 1.0 / pts.size))


# --------------------------------------------------------------------- estimation


@dataclass(frozen=True)
class OutlierRecord:
    n: int
    psi_hat: float
    ci_low: float
    ci_high: float
    method: str
    stderr: float = 0.0
    hits: int = 0
    samples: int = 0
    event: str = "first"

    def __post_init__(self) -> None:
        if not (0.0 <= self.psi_hat <= 1.0 and self.ci_low <= self.psi_hat <= self.ci_high):
            raise ValueError(f"inconsistent outlier record: {self}")

    def to_dict(self) -> dict:
        return {"n": self.n, "psi_hat": self.psi_hat, "ci_low": self.ci_low, "ci_high": self.ci_high,
                "method": self.method, "stderr": self.stderr, "hits": self.hits, "samples": self.samples,
                "event": self.event}


def batch_means(series: Iterable[np.ndarray], batches: int = 20) -> tuple[float, float, int]:
    """Pooled mean and batch-means standard error over several chains."""
    means, sizes = [], []
    for s in series:
        s = np.asarray(s, dtype=float)
        if s.size == 0:
            continue
        k = min(batches, s.size)
        for chunk in np.array_split(s, k):
            means.append(chunk.mean())
            sizes.append(chunk.size)
    if not means:
        raise InsufficientDataError("no samples to average")
    means_arr = np.asarray(means)
    sizes_arr = np.asarray(sizes, dtype=float)
    mean = float(np.average(means_arr, weights=sizes_arr))
    stderr = float(np.std(means_arr, ddof=1) / math.sqrt(means_arr.size)) if means_arr.size > 1 else 0.0
    return mean, stderr, int(means_arr.size)


def _indicator_record(n: int, indicators: list[np.ndarray], event: str, level: float, batches: int) -> OutlierRecord:
    total = int(sum(ind.size for ind in indicators))
    if total == 0:
        raise InsufficientDataError("chains carry no post-burn-in samples")
    hits = float(sum(float(ind.sum()) for ind in indicators))
    if hits == 0:
        warnings.warn(RareEventWarning(
            f"rare event at n={n}: no hits in {total} samples; use larger chains or smaller n"), stacklevel=3)
        return OutlierRecord(n=n, psi_hat=0.0, ci_low=0.0, ci_high=min(1.0, 3.0 / total), method="mcmc",
                             hits=0, samples=total, event=event)
    mean, stderr, _ = batch_means(indicators, batches)
    z = float(stats.norm.ppf(0.5 + level / 2.0))
    psi = min(max(mean, 0.0), 1.0)
    return OutlierRecord(n=n, psi_hat=psi, ci_low=max(0.0, psi - z * stderr), ci_high=min(1.0, psi + z * stderr),
                         method="mcmc", stderr=stderr, hits=int(round(hits)), samples=total, event=event)


def estimate_outlier_prob(config: EnsembleConfig, chains: Sequence[ChainResult], n: Optional[int] = None,
                          symmetrize: bool = False, level: float = 0.95, batches: int = 20) -> OutlierRecord:
    """Fraction of samples with z_1 in W (or the coordinate average when symmetrized)."""
    n = config.n if n is None else n
    indicators = []
    for chain in chains:
        if chain.samples.size == 0:
            continue
        inside = config.window.contains(chain.samples)
        indicators.append(inside.mean(axis=1) if symmetrize else inside[:, 0].astype(float))
    return _indicator_record(n, indicators, "first-symmetrized" if symmetrize else "first", level, batches)


def estimate_any_coordinate_prob(config: EnsembleConfig, chains: Sequence[ChainResult], n: Optional[int] = None,
                                 level: float = 0.95, batches: int = 20) -> OutlierRecord:
    """Fraction of samples with at least one coordinate in W."""
    n = config.n if n is None else n
    indicators = [config.window.contains(c.samples).any(axis=1).astype(float) for c in chains if c.samples.size]
    return _indicator_record(n, indicators, "any", level, batches)


@dataclass(frozen=True)
class SandwichReport:
    n: int
    lower_ok: bool
    upper_ok: bool

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.upper_ok


def sandwich_check(first: OutlierRecord, any_: OutlierRecord, n: int) -> SandwichReport:
    """psi_n <= psi'_n <= n psi_n, each side within the confidence intervals."""
    return SandwichReport(n=n, lower_ok=first.ci_low <= any_.ci_high + 1e-15,
                          upper_ok=any_.ci_low <= n * first.ci_high + 1e-15)


@dataclass(frozen=True)
class LdpReport:
    records: tuple[OutlierRecord, ...]
    fitted_rate: float
    fitted_intercept: float
    rate_stderr: float
    predicted_rate: float
    relative_gap: float
    verdict: str
    used_n: tuple[int, ...]
    window_touches_support: bool

    def to_dict(self) -> dict:
        return {
            "records": [r.to_dict() for r in self.records],
            "fitted_rate": self.fitted_rate,
            "fitted_intercept": self.fitted_intercept,
            "rate_stderr": self.rate_stderr,
            "predicted_rate": self.predicted_rate,
            "relative_gap": self.relative_gap,
            "verdict": self.verdict,
            "used_n": list(self.used_n),
            "window_touches_support": self.window_touches_support,
        }


def predicted_window_rate(sol: EquilibriumSolution, field: FieldSpec, window: Domain,
                          grid: Optional[DomainGrid] = None, probes: int = 400,
                          slack: Optional[float] = None) -> float:
    """inf of the rate function over W ∩ Y, from window probes and grid nodes in W."""
    pts = window.probes(probes)
    if grid is not None:
        pts = np.concatenate([pts[grid.contains(pts)], grid.nodes[window.contains(grid.nodes) & grid.eligible]])
        slack = grid.cell_size if slack is None else slack
    if pts.size == 0:
        raise ConfigError("window W does not meet Y")
    return float(np.min(rate_function(sol, field, pts, slack=slack or 0.0)))


def ldp_rate_fit(records: Sequence[OutlierRecord], sol: Optional[EquilibriumSolution], window: Domain,
                 field: FieldSpec, grid: Optional[DomainGrid] = None, rel_tol: float = 0.15,
                 predicted_rate: Optional[float] = None, level: float = 0.95) -> LdpReport:
    """Weighted least squares of -log psi_n on n, compared with inf_W of the rate function."""
    usable = [r for r in records if r.psi_hat > 0]
    if len(usable) < 4:
        raise InsufficientDataError(f"rate fit needs >= 4 values of n with nonzero estimates, got {len(usable)}")
    ns = np.array([r.n for r in usable], dtype=float)
    psi = np.array([r.psi_hat for r in usable])
    y = -np.log(psi)
    z = float(stats.norm.ppf(0.5 + level / 2.0))
    sigma = np.array([(r.ci_high - r.ci_low) / (2.0 * z * r.psi_hat) for r in usable])
    if np.any(sigma > 0):
        sigma = np.where(sigma > 0, sigma, sigma[sigma > 0].min())
        weights = 1.0 / sigma
    else:
        weights = np.ones_like(y)
    coef, cov = np.polyfit(ns, y, 1, w=weights, cov="unscaled")
    resid = (y - np.polyval(coef, ns)) * weights
    dof = max(ns.size - 2, 1)
    scale = float(resid @ resid) / dof
    rate_se = float(math.sqrt(max(cov[0, 0] * scale, 0.0)))
    fitted = float(coef[0])

    if predicted_rate is None:
        if sol is None:
            raise ConfigError("rate fit needs an equilibrium solution or an explicit predicted rate")
        predicted_rate = predicted_window_rate(sol, field, window, grid)
    touches = bool(sol is not None and sol.support_sr.size and np.any(window.contains(sol.nodes[sol.support_sr])))
    if predicted_rate <= 1e-9:
        gap = abs(fitted)
        verdict = "pass-degenerate" if abs(fitted) <= 2.0 * rate_se + 1e-12 else "fail"
    else:
        gap = abs(fitted - predicted_rate) / predicted_rate
        verdict = "pass" if gap <= rel_tol else "fail"
    logger.info("rate fit over n=%s: fitted %.4f (se %.2g) predicted %.4f -> %s",
                [int(v) for v in ns], fitted, rate_se, predicted_rate, verdict)
    return LdpReport(records=tuple(records), fitted_rate=fitted, fitted_intercept=float(coef[1]),
                     rate_stderr=rate_se, predicted_rate=float(predicted_rate), relative_gap=float(gap),
                     verdict=verdict, used_n=tuple(int(v) for v in ns), window_touches_support=touches)


# --------------------------------------------------------------------- extremal configurations


@dataclass(frozen=True)
class FeketeResult:
    points: np.ndarray
    indices: np.ndarray
    log_a: float
    value: float
    passes: int


def fekete_ascent(n: int, grid: DomainGrid, field: FieldSpec, rng: np.random.Generator,
                  starts: int = 4, max_passes: int = 100) -> FeketeResult:
    """Coordinate ascent of log A over grid nodes, best of several random starts.

    value is (1/n^2) log A at the returned configuration.
    """
    if n < 2:
        raise ConfigError("Fekete ascent needs n >= 2")
    eligible = np.flatnonzero(grid.eligible)
    if eligible.size < n:
        raise ConfigError(f"only {eligible.size} eligible nodes for n={n}")
    nodes = grid.nodes[eligible]
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(nodes[:, None] - nodes[None, :]))
    np.fill_diagonal(logs, 0.0)
    penalty = 2.0 * n * np.asarray(field.q(nodes), dtype=float)

    best: Optional[FeketeResult] = None
    for _ in range(starts):
        idx = rng.choice(nodes.size, size=n, replace=False)
        total = logs[:, idx].sum(axis=1)
        passes = 0
        for passes in range(1, max_passes + 1):
            moved = False
            for i in range(n):
                occupied = np.zeros(nodes.size, dtype=bool)
                occupied[idx] = True
                occupied[idx[i]] = False
                score = field.beta * (total - logs[:, idx[i]]) - penalty
                score[occupied] = -np.inf
                k = int(np.argmax(score))
                if k != idx[i] and score[k] > score[idx[i]]:
                    total += logs[:, k] - logs[:, idx[i]]
                    idx[i] = k
                    moved = True
            if not moved:
                break
        pts = nodes[idx]
        log_a = log_joint_density(EnsembleState(pts, field), field)
        candidate = FeketeResult(points=pts, indices=eligible[idx], log_a=log_a, value=log_a / n ** 2, passes=passes)
        if best is None or candidate.log_a > best.log_a:
            best = candidate
    logger.debug("fekete n=%d value %.6f", n, best.value)
    return best


# --------------------------------------------------------------------- distances and concentration


def _transport_w1(a_pts: np.ndarray, a_w: np.ndarray, b_pts: np.ndarray, b_w: np.ndarray) -> float:
    cost = np.abs(a_pts[:, None] - b_pts[None, :])
    m, k = cost.shape
    rows = sparse.kron(sparse.identity(m), np.ones((1, k)))
    cols = sparse.kron(np.ones((1, m)), sparse.identity(k))
    res = linprog(cost.ravel(), A_eq=sparse.vstack([rows, cols]).tocsr(), b_eq=np.concatenate([a_w, b_w]),
                  bounds=(0, None), method="highs")
    if not res.success:
        raise ConfigError(f"transport problem failed: {res.message}")
    return float(res.fun)


def wasserstein_to_equilibrium(points, sol: EquilibriumSolution, masses=None) -> float:
    """W1 distance between a point measure and the solver's equilibrium measure."""
    pts = np.asarray(points, dtype=complex).ravel()
    w = np.full(pts.size, 1.0 / pts.size) if masses is None else np.asarray(masses, dtype=float)
    support = sol.measure.support()
    eq_pts, eq_w = sol.nodes[support], sol.weights[support]
    if np.all(np.abs(pts.imag) < 1e-12) and np.all(np.abs(eq_pts.imag) < 1e-12):
        return float(stats.wasserstein_distance(pts.real, eq_pts.real, w, eq_w))
    return _transport_w1(pts, w / w.sum(), eq_pts, eq_w / eq_w.sum())


def concentration_profile(samples_by_n: dict[int, np.ndarray], sol: EquilibriumSolution, radius: float = 0.2,
                          max_samples: int = 200) -> list[tuple[int, float]]:
    """(n, fraction of sampled configurations outside the W1 ball around the equilibrium)."""
    out = []
    for n in sorted(samples_by_n):
        configs = np.asarray(samples_by_n[n])
        step = max(1, configs.shape[0] // max_samples)
        picked = configs[::step]
        outside = [wasserstein_to_equilibrium(c, sol) > radius for c in picked]
        out.append((int(n), float(np.mean(outside)) if outside else 0.0))
    return out


@dataclass(frozen=True)
class PotentialGapReport:
    n: int
    potential_gap: float
    sup_gap: float


def configuration_potential_gaps(points, sol: EquilibriumSolution, grid: DomainGrid, field: FieldSpec,
                                 probes: int = 100) -> PotentialGapReport:
    """Probe max of (1/(n-1)) sum_{j>=2} log|w - z_j| - U^mu(w), and (1/n) log ||e^{-nR} prod (t - z_j)||_Y + rho."""
    pts = np.asarray(points, dtype=complex).ravel()
    n = pts.size
    if n < 2:
        raise ConfigError("potential gaps need n >= 2")
    w = grid.geometry.probes(probes)
    w = w[grid.contains(w)]
    near = np.min(np.abs(w[:, None] - pts[None, :]), axis=1) > 0.5 * grid.cell_size
    w = w[near]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        u_mu = np.asarray(green_function(sol, None, w)) - sol.rho
    empirical = np.log(np.abs(w[:, None] - pts[None, 1:])).mean(axis=1)
    potential_gap = float(np.max(empirical - u_mu)) if w.size else -math.inf

    nodes = grid.nodes[grid.eligible]
    with np.errstate(divide="ignore"):
        log_abs = np.log(np.abs(nodes[:, None] - pts[None, :])).sum(axis=1)
    sup_gap = float(np.max(log_abs - n * field.r(nodes))) / n + sol.rho
    return PotentialGapReport(n=n, potential_gap=potential_gap, sup_gap=sup_gap)
