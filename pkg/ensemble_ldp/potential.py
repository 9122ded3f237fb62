"""Weighted logarithmic potential theory on a grid.

Energy E(nu) = -sum_{i!=j} w_i w_j log|z_i - z_j| - sum_i w_i^2 log(delta_i/2) + 2 sum_i w_i R(z_i),
its minimizer over the probability simplex (the weighted equilibrium measure),
the Robin constant, the Green function V = U^mu + rho and the rate function
beta (R - V). Closed forms for the radial and the real quadratic cases live
here as well; they serve as oracles for the discrete solver.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field as dataclass_field, replace
from typing import Any, Optional, Sequence

import numpy as np
import scipy.linalg
from numpy.polynomial import polynomial as npoly
from scipy.integrate import trapezoid
from scipy.optimize import bisect

from .domains import Domain, DomainGrid, truncation_radius
from .errors import (
    BracketError,
    ConfigError,
    DesingularizedEvaluationWarning,
    DimensionMismatchError,
    HypothesisViolation,
    InvalidMeasureError,
    NegativeRateWarning,
)
from .fields import FieldSpec

logger = logging.getLogger(__name__)

__all__ = [
    "DiscreteMeasure",
    "EquilibriumSolution",
    "RadialEquilibrium",
    "SemicircleEquilibrium",
    "SolverOptions",
    "SuperlogReport",
    "SupportReport",
    "extract_supports",
    "green_function",
    "hypothesis_counterexample_field",
    "log_kernel",
    "radial_equilibrium",
    "radial_support_radius",
    "rate_function",
    "refinement_study",
    "robin_constant",
    "semicircle_equilibrium",
    "solution_from_measure",
    "solve_equilibrium",
    "truncation_radius",
    "validate_superlogarithmic",
    "weighted_energy",
]

VERDICT_HOLDS = "holds"
VERDICT_MARGINAL = "marginal"
VERDICT_FAILS = "fails"


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability vector over grid nodes."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise InvalidMeasureError("measure weights must be a nonempty vector")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidMeasureError("measure weights must be finite and nonnegative")
        total = math.fsum(w)
        if abs(total - 1.0) > 1e-12:
            raise InvalidMeasureError(f"measure weights sum to {total:.15g}, not 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, weights) -> "DiscreteMeasure":
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        total = math.fsum(w)
        if not total > 0:
            raise InvalidMeasureError("cannot normalize a zero measure")
        return cls(w / total)

    @classmethod
    def uniform(cls, size: int) -> "DiscreteMeasure":
        return cls(np.full(int(size), 1.0 / int(size)))

    @classmethod
    def uniform_on(cls, grid: DomainGrid, mask) -> "DiscreteMeasure":
        """Uniform mass per unit cell volume over the masked nodes."""
        w = np.where(np.asarray(mask, dtype=bool), grid.cell_volume, 0.0)
        return cls.normalized(w)

    @property
    def size(self) -> int:
        return int(self.weights.size)

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 50_000
    gap_tol: float = 1e-8
    polish_every: int = 25
    refresh_every: int = 100
    desingularize: bool = True
    tol_weight: float = 1e-3
    record_trace: bool = True

    def __post_init__(self) -> None:
        if self.max_iter < 1 or self.polish_every < 1 or self.refresh_every < 1:
            raise ConfigError("solver iteration counts must be positive")
        if not self.gap_tol > 0:
            raise ConfigError("gap_tol must be positive")


@dataclass(frozen=True, eq=False)
class EquilibriumSolution:
    """Converged (or best) equilibrium measure with its potential data.

    potential_values, r_values and eligible cover every grid node; weights of
    nodes outside supp(tau) are zero.
    """

    measure: DiscreteMeasure
    rho: float
    potential_values: np.ndarray
    r_values: np.ndarray
    nodes: np.ndarray
    diag_desing: np.ndarray
    eligible: np.ndarray
    beta: float
    energy: float
    kkt_residual: float
    iterations: int
    converged: bool
    gap: float
    support_sr: np.ndarray = dataclass_field(default_factory=lambda: np.zeros(0, dtype=int))
    support_sr_star: np.ndarray = dataclass_field(default_factory=lambda: np.zeros(0, dtype=int))
    hypothesis_verdict: str = VERDICT_MARGINAL
    energy_trace: np.ndarray = dataclass_field(default_factory=lambda: np.zeros(0))
    truncation_radius: Optional[float] = None
    notes: tuple[str, ...] = ()

    @property
    def weights(self) -> np.ndarray:
        return self.measure.weights

    @property
    def green_values(self) -> np.ndarray:
        """V = U^mu + rho at every node."""
        return self.potential_values + self.rho

    @property
    def kkt_tolerance(self) -> float:
        return max(self.kkt_residual, 1e-12)

    def to_dict(self) -> dict[str, Any]:
        return {
            "nodes": [[float(z.real), float(z.imag)] for z in self.nodes],
            "weights": [float(w) for w in self.weights],
            "rho": float(self.rho),
            "kkt_residual": float(self.kkt_residual),
            "support_SR": [int(i) for i in self.support_sr],
            "support_SRstar": [int(i) for i in self.support_sr_star],
            "energy": float(self.energy),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "hypothesis_verdict": self.hypothesis_verdict,
            "truncation_radius": self.truncation_radius,
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class SupportReport:
    support_sr: np.ndarray
    support_sr_star: np.ndarray
    verdict: str
    mismatch: int
    allowance: int
    tol_weight: float
    tol_eq: float

    def __iter__(self):
        # Unpacks as the (S_R, S_R*) pair.
        yield self.support_sr
        yield self.support_sr_star


@dataclass(frozen=True)
class SuperlogReport:
    radii: tuple[float, ...]
    values: tuple[float, ...]
    margin: float
    b: float
    passed: bool
    reason: str

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"


def _pairwise_log(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.abs(a[:, None] - b[None, :]))


def log_kernel(nodes: np.ndarray, diag_desing: np.ndarray, desingularize: bool = True) -> np.ndarray:
    """K_ij = -log|z_i - z_j| with K_ii = -log(delta_i/2) (or 0 when not desingularized)."""
    k = -_pairwise_log(nodes, nodes)
    np.fill_diagonal(k, -np.log(0.5 * diag_desing) if desingularize else 0.0)
    return k


def _check_sizes(mu: DiscreteMeasure, grid: DomainGrid) -> None:
    if mu.size != grid.n_nodes:
        raise DimensionMismatchError(f"measure has {mu.size} weights, grid has {grid.n_nodes} nodes")


def weighted_energy(mu: DiscreteMeasure, grid: DomainGrid, field: FieldSpec, desingularize: bool = True) -> float:
    """Discrete weighted energy of mu on the grid."""
    _check_sizes(mu, grid)
    idx = mu.support()
    w = mu.weights[idx]
    k = log_kernel(grid.nodes[idx], grid.diag_desing[idx], desingularize)
    r = field.r(grid.nodes[idx])
    return float(w @ k @ w + 2.0 * r @ w)


def _polish(k: np.ndarray, r: np.ndarray, w: np.ndarray) -> Optional[np.ndarray]:
    """Minimize the energy on the current active face by bordered KKT solves.

    Returns None when the linear algebra breaks down.
    """
    active = np.flatnonzero(w > 0)
    cur = w[active].copy()
    for _ in range(active.size):
        m = active.size
        bordered = np.zeros((m + 1, m + 1))
        bordered[:m, :m] = k[np.ix_(active, active)]
        bordered[:m, m] = 1.0
        bordered[m, :m] = 1.0
        rhs = np.concatenate([-r[active], [1.0]])
        try:
            target = scipy.linalg.solve(bordered, rhs, assume_a="sym")[:m]
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            return None
        if not np.all(np.isfinite(target)):
            return None
        if target.min() >= 0.0:
            cur = target
            break
        step = target - cur
        shrinking = np.flatnonzero(step < 0)
        ratios = cur[shrinking] / -step[shrinking]
        j = shrinking[np.argmin(ratios)]
        cur = cur + min(1.0, float(ratios.min())) * step
        cur[j] = 0.0
        keep = cur > 0
        active, cur = active[keep], cur[keep]
        if active.size == 0:
            return None
    out = np.zeros_like(w)
    out[active] = np.clip(cur, 0.0, None)
    total = out.sum()
    return out / total if total > 0 else None


def _frank_wolfe(k: np.ndarray, r: np.ndarray, opts: SolverOptions):
    m = r.size
    w = np.zeros(m)
    start = int(np.argmin(r))
    w[start] = 1.0
    kw = k[start].copy()
    energy = float(w @ kw + 2.0 * r @ w)
    trace = [energy]
    gap = math.inf
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        g = kw + r
        phi = float(w @ g)
        s = int(np.argmin(g))
        gap = 2.0 * (phi - g[s])
        if gap <= opts.gap_tol * max(abs(energy), 1.0):
            converged = True
            break
        active = np.flatnonzero(w > 0)
        a = int(active[np.argmax(g[active])])
        away_gap = 2.0 * (g[a] - phi)
        wkw = float(w @ kw)
        if gap >= away_gap or w[a] >= 1.0 - 1e-15:
            slope = -gap
            curvature = k[s, s] - 2.0 * kw[s] + wkw
            gamma_max = 1.0
        else:
            slope = -away_gap
            curvature = wkw - 2.0 * kw[a] + k[a, a]
            gamma_max = w[a] / (1.0 - w[a])
        gamma = gamma_max if curvature <= 0 else min(gamma_max, -slope / (2.0 * curvature))
        gamma = max(gamma, 0.0)
        if gap >= away_gap or w[a] >= 1.0 - 1e-15:
            w *= 1.0 - gamma
            w[s] += gamma
            kw = (1.0 - gamma) * kw + gamma * k[s]
        else:
            w *= 1.0 + gamma
            w[a] -= gamma
            if gamma >= gamma_max:
                w[a] = 0.0
            kw = (1.0 + gamma) * kw - gamma * k[a]
        np.clip(w, 0.0, None, out=w)
        energy = energy + gamma * slope + gamma * gamma * curvature

        if it % opts.polish_every == 0:
            candidate = _polish(k, r, w)
            if candidate is not None:
                idx = np.flatnonzero(candidate > 0)
                cand_kw = k[:, idx] @ candidate[idx]
                cand_energy = float(candidate @ cand_kw + 2.0 * r @ candidate)
                if cand_energy <= energy:
                    w, kw, energy = candidate, cand_kw, cand_energy
        if it % opts.refresh_every == 0:
            w /= w.sum()
            idx = np.flatnonzero(w > 0)
            kw = k[:, idx] @ w[idx]
            energy = float(w @ kw + 2.0 * r @ w)
        if opts.record_trace:
            trace.append(energy)
        if it % 1000 == 0:
            logger.debug("frank-wolfe iter %d energy %.12g gap %.3g", it, energy, gap)
    w /= math.fsum(w)
    return w, it, converged, gap, np.asarray(trace)


def solve_equilibrium(grid: DomainGrid, field: FieldSpec, opts: Optional[SolverOptions] = None) -> EquilibriumSolution:
    """Minimize the weighted energy over probability vectors on supp(tau) ∩ grid."""
    opts = opts or SolverOptions()
    eligible_idx = np.flatnonzero(grid.eligible)
    if eligible_idx.size < 2:
        raise ConfigError("equilibrium solver needs at least two nodes with positive tau mass")
    r_all = np.asarray(field.r(grid.nodes), dtype=float)
    bad = np.flatnonzero(~np.isfinite(r_all[eligible_idx]))
    if bad.size:
        z = grid.nodes[eligible_idx[bad[0]]]
        raise ConfigError(f"field is not finite at node {z}")

    nodes = grid.nodes[eligible_idx]
    k = log_kernel(nodes, grid.diag_desing[eligible_idx], opts.desingularize)
    w, iterations, converged, gap, trace = _frank_wolfe(k, r_all[eligible_idx], opts)
    if not converged:
        logger.warning("equilibrium solver hit the iteration cap (%d) with gap %.3g", iterations, gap)
    weights = np.zeros(grid.n_nodes)
    weights[eligible_idx] = w
    sol = solution_from_measure(grid, field, DiscreteMeasure(weights), opts.desingularize, opts.tol_weight,
                                iterations=iterations, converged=converged, gap=gap, energy_trace=trace, kernel=k)
    logger.info("equilibrium on %d nodes: rho=%.6f kkt=%.2e iterations=%d support=%d verdict=%s",
                grid.n_nodes, sol.rho, sol.kkt_residual, iterations, sol.support_sr.size, sol.hypothesis_verdict)
    return sol


def solution_from_measure(grid: DomainGrid, field: FieldSpec, measure: DiscreteMeasure, desingularize: bool = True,
                          tol_weight: float = 1e-3, *, iterations: int = 0, converged: bool = False,
                          gap: float = math.inf, energy_trace: Optional[np.ndarray] = None,
                          kernel: Optional[np.ndarray] = None) -> EquilibriumSolution:
    """Potential, Robin constant, KKT residual and supports of a given measure on the grid."""
    _check_sizes(measure, grid)
    eligible_idx = np.flatnonzero(grid.eligible)
    if np.any(measure.weights[~grid.eligible] > 0):
        raise InvalidMeasureError("measure charges nodes outside supp(tau)")
    r_all = np.asarray(field.r(grid.nodes), dtype=float)
    k = kernel if kernel is not None else log_kernel(grid.nodes[eligible_idx], grid.diag_desing[eligible_idx],
                                                     desingularize)
    r = r_all[eligible_idx]
    w = measure.weights[eligible_idx]
    on_support = w > 0
    potential = -(k[:, on_support] @ w[on_support])
    u_all = np.empty(grid.n_nodes)
    u_all[eligible_idx] = potential
    others = np.flatnonzero(~grid.eligible)
    if others.size:
        support = measure.support()
        u_all[others] = _pairwise_log(grid.nodes[others], grid.nodes[support]) @ measure.weights[support]

    energy = float(w @ -potential + 2.0 * r @ w)
    rho = energy - float(r @ w)
    g = r - potential
    kkt = max(float(np.max(np.abs(g[on_support] - rho))), max(0.0, rho - float(g.min())))
    notes = []
    if grid.unbounded:
        notes.append(f"unbounded set truncated at radius {grid.truncation_radius:.6g}")
    notes.append(f"regularity of {grid.kind} assumed from the domain catalogue")

    sol = EquilibriumSolution(
        measure=measure, rho=rho, potential_values=u_all, r_values=r_all,
        nodes=grid.nodes, diag_desing=grid.diag_desing, eligible=grid.eligible.copy(), beta=field.beta,
        energy=energy, kkt_residual=kkt, iterations=iterations, converged=converged, gap=gap,
        energy_trace=np.zeros(0) if energy_trace is None else energy_trace,
        truncation_radius=grid.truncation_radius, notes=tuple(notes))
    report = extract_supports(sol, tol_weight, grid=grid)
    return replace(sol, support_sr=report.support_sr, support_sr_star=report.support_sr_star,
                   hypothesis_verdict=report.verdict)


def robin_constant(sol: EquilibriumSolution, grid: DomainGrid, field: FieldSpec,
                   desingularize: bool = True) -> float:
    """rho = E(mu) - sum_i w_i R(z_i)."""
    _check_sizes(sol.measure, grid)
    energy = weighted_energy(sol.measure, grid, field, desingularize)
    return energy - float(sol.weights @ field.r(grid.nodes))


def green_function(sol: EquilibriumSolution, grid: Optional[DomainGrid], z):
    """V(z) = sum_i w_i log|z - z_i| + rho.

    At a weighted node the self term is replaced by log(delta_i/2) and a
    DesingularizedEvaluationWarning is emitted.
    """
    if grid is not None and grid.n_nodes != sol.nodes.size:
        raise DimensionMismatchError("solution and grid have different node counts")
    scalar = np.ndim(z) == 0
    pts = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    idx = sol.measure.support()
    w = sol.weights[idx]
    dist = np.abs(pts[:, None] - sol.nodes[idx][None, :])
    hit = dist <= 1e-12 * max(1.0, float(np.max(np.abs(sol.nodes))))
    if hit.any():
        warnings.warn(DesingularizedEvaluationWarning(
            f"{int(hit.any(axis=1).sum())} evaluation point(s) coincide with weighted nodes; "
            "self terms replaced by log(delta/2)"), stacklevel=2)
        dist = np.where(hit, 0.5 * sol.diag_desing[idx][None, :], dist)
    values = np.log(dist) @ w + sol.rho
    values = values.reshape(np.shape(z)) if not scalar else values
    return float(values[0]) if scalar else values


def rate_function(sol: EquilibriumSolution, field: FieldSpec, z, slack: float = 0.0):
    """J(z) = beta (R(z) - V(z)) = 2Q(z) - beta V(z), clamped near zero.

    Values in (-band, 0) with band = beta (3 kkt + slack) are reported as 0;
    more negative values raise a NegativeRateWarning and are returned as is.
    """
    scalar = np.ndim(z) == 0
    pts = np.atleast_1d(np.asarray(z, dtype=complex))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DesingularizedEvaluationWarning)
        v = np.asarray(green_function(sol, None, pts))
    j = field.beta * (np.asarray(field.r(pts)) - v)
    band = field.beta * (3.0 * sol.kkt_tolerance + slack)
    low = j <= -band
    if np.any(low):
        warnings.warn(NegativeRateWarning(
            f"rate function reaches {float(j.min()):.3g} below the clamp band {-band:.3g}; "
            "the equilibrium solve is not converged"), stacklevel=2)
    j = np.where((j < 0) & ~low, 0.0, j)
    return float(j.ravel()[0]) if scalar else j


def extract_supports(sol: EquilibriumSolution, tol_weight: float = 1e-3, tol_eq: Optional[float] = None,
                     grid: Optional[DomainGrid] = None) -> SupportReport:
    """S_R (weight above tol_weight * max weight), S_R* (|R - V| < tol_eq) and their comparison.

    The verdict allows a symmetric difference up to the boundary layer of S_R
    ("holds"), up to three layers ("marginal"), and fails beyond that.
    """
    w = sol.weights
    if not w.max() > 0:
        raise InvalidMeasureError("empty measure has no support")
    sr = np.flatnonzero(w > tol_weight * w.max())
    if tol_eq is None:
        tol_eq = max(3.0 * sol.kkt_residual, 1e-8 * max(1.0, abs(sol.rho)))
    resid = np.abs(sol.r_values - sol.green_values)
    sr_star = np.flatnonzero(sol.eligible & (resid < tol_eq))
    mismatch = int(np.setxor1d(sr, sr_star).size)
    if grid is not None:
        allowance = max(1, int(grid.boundary_layer(sr).size))
    else:
        allowance = max(1, int(math.ceil(0.1 * sr.size)))
    if mismatch <= allowance:
        verdict = VERDICT_HOLDS
    elif mismatch <= 3 * allowance:
        verdict = VERDICT_MARGINAL
    else:
        verdict = VERDICT_FAILS
    if verdict == VERDICT_HOLDS and not sol.converged:
        verdict = VERDICT_MARGINAL
    logger.debug("supports: |S_R|=%d |S_R*|=%d mismatch=%d allowance=%d -> %s",
                 sr.size, sr_star.size, mismatch, allowance, verdict)
    return SupportReport(sr, sr_star, verdict, mismatch, allowance, float(tol_weight), float(tol_eq))


def require_contact_equality(sol: EquilibriumSolution) -> None:
    """Raise HypothesisViolation unless S_R and S_R* agree."""
    if sol.hypothesis_verdict == VERDICT_FAILS:
        raise HypothesisViolation("contact-set-equality",
                                  f"S_R != S_R*: |S_R|={sol.support_sr.size}, |S_R*|={sol.support_sr_star.size}")


# --------------------------------------------------------------------- radial closed forms


def _require_radial_monotone(field: FieldSpec, t: np.ndarray) -> np.ndarray:
    tr = t * field.radial_r_prime(t)
    r = field.radial_r(t)
    if not (np.all(np.diff(tr) > -1e-12 * np.abs(tr[1:])) and np.all(np.diff(r) >= -1e-12 * np.abs(r[1:]))):
        raise BracketError("radial closed-form hypotheses not met: t R'(t) or R(t) is not increasing")
    return tr


def radial_support_radius(field: FieldSpec) -> float:
    """T0 solving T0 R'(T0) = 1, by bisection to 1e-10."""
    if not field.is_radial:
        raise ConfigError("support radius needs a radial field")
    t = np.geomspace(1e-8, 1e8, 2001)
    tr = _require_radial_monotone(field, t)
    above = np.flatnonzero(tr >= 1.0)
    if above.size == 0 or above[0] == 0:
        raise BracketError("t R'(t) = 1 has no root on [1e-8, 1e8]")
    lo, hi = t[above[0] - 1], t[above[0]]
    root = bisect(lambda s: float(s * field.radial_r_prime(np.array([s]))[0]) - 1.0, lo, hi, xtol=1e-10)
    return float(root)


def _radial_second_derivative(field: FieldSpec, t: np.ndarray) -> np.ndarray:
    if field.kind == "radial":
        return (2.0 * field.scale / field.beta) * npoly.polyval(t, npoly.polyder(field.coefficients, 2))
    step = 1e-5 * np.maximum(t, 1.0)
    return (field.radial_r_prime(t + step) - field.radial_r_prime(np.maximum(t - step, 0.0))) / (
        t + step - np.maximum(t - step, 0.0))


@dataclass(frozen=True, eq=False)
class RadialEquilibrium:
    """Closed-form equilibrium for radial R on the plane: uniform-in-angle, supported on |z| <= T0."""

    field: FieldSpec
    support_radius: float
    rho: float

    @property
    def r_at_support(self) -> float:
        return float(self.field.radial_r(np.array([self.support_radius]))[0])

    def density(self, z) -> np.ndarray:
        """Density Delta R / (2 pi) against area measure."""
        t = np.abs(np.asarray(z, dtype=complex))
        safe = np.maximum(t, 1e-12)
        lap = _radial_second_derivative(self.field, safe) + self.field.radial_r_prime(safe) / safe
        return np.where(t <= self.support_radius, lap / (2.0 * np.pi), 0.0)

    def green(self, z) -> np.ndarray:
        t = np.abs(np.asarray(z, dtype=complex))
        inside = t <= self.support_radius
        with np.errstate(divide="ignore"):
            outside = np.log(t) + self.rho
        return np.where(inside, self.field.radial_r(t), outside)

    def rate(self, z) -> np.ndarray:
        t = np.abs(np.asarray(z, dtype=complex))
        return self.field.beta * (self.field.radial_r(t) - self.green(z))

    def energy(self) -> float:
        """E(mu) = rho + int R dmu, with the mass integral done radially."""
        t = np.linspace(0.0, self.support_radius, 4001)
        radial_mass = self.density(t + 0j) * 2.0 * np.pi * t
        mean_r = float(trapezoid(radial_mass * self.field.radial_r(t), t) / trapezoid(radial_mass, t))
        return self.rho + mean_r


def radial_equilibrium(field: FieldSpec) -> RadialEquilibrium:
    """Closed form for radial R with t R'(t) and R(t) increasing: rho = R(T0) - log T0."""
    t0 = radial_support_radius(field)
    rho = float(field.radial_r(np.array([t0]))[0]) - math.log(t0)
    return RadialEquilibrium(field=field, support_radius=t0, rho=rho)


def _semicircle_log_potential(s: np.ndarray) -> np.ndarray:
    """Logarithmic potential of the semicircle law on [-2, 2]."""
    s = np.asarray(s, dtype=complex)
    root = np.sqrt(s - 2.0) * np.sqrt(s + 2.0)
    return np.real(s * s / 4.0 - 0.5 - s * root / 4.0 + np.log((s + root) / 2.0))


@dataclass(frozen=True)
class SemicircleEquilibrium:
    """Equilibrium of R(x) = c x^2 on the real line: semicircle on [-a, a], a = 1/sqrt(c)."""

    c: float

    @property
    def half_width(self) -> float:
        return 1.0 / math.sqrt(self.c)

    @property
    def rho(self) -> float:
        return 0.5 - math.log(self.half_width / 2.0)

    @property
    def energy(self) -> float:
        # int c x^2 dmu = c a^2 / 4 = 1/4
        return self.rho + 0.25

    def density(self, x) -> np.ndarray:
        a = self.half_width
        x = np.real(np.asarray(x, dtype=complex))
        return np.where(np.abs(x) <= a, 2.0 / (np.pi * a * a) * np.sqrt(np.clip(a * a - x * x, 0.0, None)), 0.0)

    def green(self, z) -> np.ndarray:
        return _semicircle_log_potential(2.0 * np.asarray(z, dtype=complex) / self.half_width) + 0.5

    def rate(self, z, beta: float) -> np.ndarray:
        x = np.asarray(z, dtype=complex)
        return beta * (self.c * np.real(x) ** 2 - self.green(x))


def semicircle_equilibrium(c: float) -> SemicircleEquilibrium:
    if not c > 0:
        raise ConfigError("semicircle case needs c > 0")
    return SemicircleEquilibrium(float(c))


# --------------------------------------------------------------------- growth and studies


def validate_superlogarithmic(field: FieldSpec, grid: DomainGrid, margin: float = 1.0) -> SuperlogReport:
    """R - (1+b) log r at the truncation radius and at 2x, 4x of it: increasing and above margin."""
    if not grid.unbounded:
        raise ConfigError("growth validation applies to unbounded (truncated) grids")
    b = field.b
    radius = float(grid.truncation_radius)
    radii = np.array([radius, 2.0 * radius, 4.0 * radius])
    try:
        growth = field.radial_r(radii)
    except ConfigError as exc:
        return SuperlogReport(tuple(radii), (), margin, b, False, str(exc))
    values = growth - (1.0 + b) * np.log(radii)
    increasing = bool(np.all(np.diff(values) > 0))
    above = bool(values[0] > margin)
    reason = "ok" if increasing and above else (
        "R - (1+b) log r is not increasing" if not increasing else f"value {values[0]:.4g} below margin {margin}")
    report = SuperlogReport(tuple(float(r) for r in radii), tuple(float(v) for v in values), float(margin), b,
                            increasing and above, reason)
    logger.debug("superlogarithmic check for %s: %s (%s)", field.tag, report.verdict, reason)
    return report


def hypothesis_counterexample_field(sol: EquilibriumSolution, grid: DomainGrid, field: FieldSpec) -> FieldSpec:
    """Field whose weight exponent is the computed V itself; its contact set is all of Y."""
    _check_sizes(sol.measure, grid)
    q_values = 0.5 * field.beta * sol.green_values
    return FieldSpec.tabulated(grid.nodes, q_values, field.beta, tag=f"green-of-{field.tag}")


def refinement_study(geometry: Domain, field: FieldSpec, resolutions: Sequence[int],
                     opts: Optional[SolverOptions] = None, **grid_kwargs) -> list[tuple[float, float]]:
    """(cell size, rho) for each resolution, finest last."""
    rows = []
    for res in sorted(int(r) for r in resolutions):
        grid = DomainGrid.build(geometry, res, **grid_kwargs)
        sol = solve_equilibrium(grid, field, opts)
        rows.append((float(grid.cell_size), float(sol.rho)))
        logger.info("refinement: h=%.4g rho=%.8f", grid.cell_size, sol.rho)
    return rows
