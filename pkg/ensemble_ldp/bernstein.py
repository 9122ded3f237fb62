"""Weighted orthonormal polynomials and Bernstein–Markov diagnostics on a grid."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from .domains import DomainGrid
from .errors import ConfigError, SingularGramError
from .fields import FieldSpec
from .potential import EquilibriumSolution

logger = logging.getLogger(__name__)

SINGULAR_DROP = 1e-10


@dataclass(frozen=True, eq=False)
class WeightedBasis:
    """Orthonormal phi_0..phi_n for cell_mass * e^{-2nR} on the grid.

    The basis is held through its Hessenberg recurrence
    z phi_k = sum_{j<=k+1} H[j, k] phi_j, so it evaluates anywhere.
    """

    degree: int
    weight_n: float
    hessenberg: np.ndarray
    values: np.ndarray
    nodes: np.ndarray
    measure: np.ndarray
    norm0: float
    gram_condition: float
    orthonormality_defect: float
    planar: bool

    def evaluate(self, z) -> np.ndarray:
        """phi_k(z) for k = 0..degree, one column per k."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        x = z if self.planar else z.real.astype(complex)
        out = np.zeros((x.size, self.degree + 1), dtype=complex)
        out[:, 0] = 1.0 / self.norm0
        h = self.hessenberg
        for k in range(self.degree):
            v = x * out[:, k] - out[:, :k + 1] @ h[:k + 1, k]
            out[:, k + 1] = v / h[k + 1, k]
        return out

    def christoffel(self, z) -> np.ndarray:
        """K(z, z) = sum_k |phi_k(z)|^2."""
        return np.sum(np.abs(self.evaluate(z)) ** 2, axis=1)


def _inner(measure: np.ndarray, a: np.ndarray, b: np.ndarray) -> complex:
    return complex(np.sum(measure * a * np.conj(b)))


def build_weighted_basis(grid: DomainGrid, field: FieldSpec, n: int, weight_n: Optional[float] = None) -> WeightedBasis:
    """Gram–Schmidt with one reorthogonalization pass on the Krylov sequence 1, z, z^2, ...

    Equivalent to orthonormalizing the monomials, but built by multiplying the
    previous basis function by z.
    """
    if n < 0:
        raise ConfigError("degree must be nonnegative")
    weight_n = float(n if weight_n is None else weight_n)
    mask = grid.eligible
    nodes = grid.nodes[mask]
    planar = grid.dimension == 2 or bool(np.any(np.abs(nodes.imag) > 1e-14))
    x = nodes if planar else nodes.real.astype(complex)
    r = np.asarray(field.r(nodes), dtype=float)
    log_mu = np.log(grid.tau_mass[mask]) - 2.0 * weight_n * r
    measure = np.exp(log_mu - log_mu.max())
    shift = float(log_mu.max())

    q = np.zeros((nodes.size, n + 1), dtype=complex)
    h = np.zeros((n + 2, n + 1), dtype=complex)
    norm0 = math.sqrt(float(np.sum(measure)))
    q[:, 0] = 1.0 / norm0
    for k in range(n):
        v = x * q[:, k]
        before = math.sqrt(max(_inner(measure, v, v).real, 0.0))
        for _ in range(2):
            coeffs = (np.conj(q[:, :k + 1]).T * measure) @ v
            v = v - q[:, :k + 1] @ coeffs
            h[:k + 1, k] += coeffs
        after = math.sqrt(max(_inner(measure, v, v).real, 0.0))
        if after <= SINGULAR_DROP * max(before, np.finfo(float).tiny):
            raise SingularGramError(k + 1, f"weighted Gram matrix is singular at degree {k + 1} "
                                           f"({int(np.count_nonzero(measure > 0))} support points)")
        h[k + 1, k] = after
        q[:, k + 1] = v / after

    gram = (np.conj(q).T * measure) @ q
    defect = float(np.max(np.abs(gram - np.eye(n + 1))))
    # monomials in the orthonormal basis: column k holds z^k, and R[:, k+1] = H R[:, k]
    change = np.zeros((n + 1, n + 1), dtype=complex)
    change[0, 0] = norm0
    for k in range(n):
        change[:, k + 1] = h[:n + 1, :n + 1] @ change[:, k]
    with np.errstate(over="ignore", invalid="ignore"):
        cond = float(np.linalg.cond(change) ** 2) if n else 1.0
    # back to the unshifted weight: phi = psi * e^{-shift/2}
    scale = math.exp(-0.5 * shift)
    basis = WeightedBasis(degree=n, weight_n=weight_n, hessenberg=h, values=q * scale, nodes=nodes,
                          measure=measure / scale ** 2, norm0=norm0 / scale, gram_condition=cond,
                          orthonormality_defect=defect, planar=planar)
    logger.debug("basis degree %d: defect %.2e, gram condition %.3g", n, defect, cond)
    return basis


def _log_weight(field: FieldSpec, z: np.ndarray, n: float) -> np.ndarray:
    return -n * np.asarray(field.r(z), dtype=float)


def bm_constant(basis: WeightedBasis, grid: DomainGrid, field: FieldSpec) -> float:
    """M_n = max over grid nodes of sqrt(e^{-2nR} sum_k |phi_k|^2)."""
    z = grid.nodes
    log_k = np.log(basis.christoffel(z))
    return float(np.exp(0.5 * np.max(log_k + 2.0 * _log_weight(field, z, basis.weight_n))))


@dataclass(frozen=True)
class TightnessReport:
    node: complex
    bm_constant: float
    attained: float

    @property
    def relative_gap(self) -> float:
        return abs(self.attained - self.bm_constant) / self.bm_constant


def kernel_polynomial_tightness(basis: WeightedBasis, grid: DomainGrid, field: FieldSpec) -> TightnessReport:
    """Ratio sup|e^{-nR} p| / ||p||_2 for the kernel polynomial at the maximizing node; equals M_n."""
    z = grid.nodes
    phis = basis.evaluate(z)
    log_w = _log_weight(field, z, basis.weight_n)
    k_diag = np.sum(np.abs(phis) ** 2, axis=1)
    star = int(np.argmax(np.log(k_diag) + 2.0 * log_w))
    coeffs = np.conj(phis[star])
    p = phis @ coeffs
    sup = float(np.max(np.abs(p) * np.exp(log_w)))
    l2 = math.sqrt(float(np.sum(np.abs(coeffs) ** 2)))
    return TightnessReport(node=complex(z[star]), bm_constant=bm_constant(basis, grid, field), attained=sup / l2)


@dataclass(frozen=True)
class BmRow:
    n: int
    m_n: float

    @property
    def root(self) -> float:
        return self.m_n ** (1.0 / self.n) if self.n else math.nan

    def to_row(self) -> list:
        return [self.n, self.m_n, self.root]


@dataclass(frozen=True)
class BmStudy:
    rows: tuple[BmRow, ...]
    decreasing: bool
    final_root: float
    band: float

    @property
    def passed(self) -> bool:
        return self.decreasing and self.final_root <= self.band


def bm_study(grid: DomainGrid, field: FieldSpec, degrees: Sequence[int], band: float = 1.1) -> BmStudy:
    """M_n^{1/n} over the degrees; accepted when decreasing with final value within the band."""
    rows = []
    for n in sorted(int(d) for d in degrees):
        basis = build_weighted_basis(grid, field, n)
        rows.append(BmRow(n=n, m_n=bm_constant(basis, grid, field)))
        logger.info("M_%d = %.6g (root %.6f)", n, rows[-1].m_n, rows[-1].root)
    roots = [r.root for r in rows if r.n > 0]
    decreasing = all(b < a for a, b in zip(roots, roots[1:]))
    return BmStudy(rows=tuple(rows), decreasing=decreasing, final_root=roots[-1] if roots else math.nan, band=band)


# --------------------------------------------------------------------- random polynomial checks


def _random_coefficients(n: int, rng: np.random.Generator, planar: bool, monic: bool = False) -> np.ndarray:
    c = rng.standard_normal(n + 1).astype(complex)
    if planar:
        c = (c + 1j * rng.standard_normal(n + 1)) / math.sqrt(2.0)
    if monic:
        c[-1] = 1.0
    return c


def _log_abs_poly(coeffs: np.ndarray, z: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.abs(np.polynomial.polynomial.polyval(z, coeffs)))


def _planar(grid: DomainGrid) -> bool:
    return grid.dimension == 2 or grid.kind == "circle"


@dataclass(frozen=True)
class SupRestrictionReport:
    n: int
    trials: int
    max_ratio: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_ratio <= self.tolerance


def sup_restriction_check(sol: EquilibriumSolution, grid: DomainGrid, field: FieldSpec, n: int, trials: int,
                          rng: np.random.Generator, cells: float = 2.0, coefficients=None) -> SupRestrictionReport:
    """max over random p of ||e^{-nR}p||_Y / ||e^{-nR}p||_{S_R dilated}."""
    if sol.support_sr.size == 0:
        raise ConfigError("sup restriction needs a nonempty S_R")
    near = grid.dilate(sol.support_sr, cells)
    z = grid.nodes
    log_w = _log_weight(field, z, n)
    polys = [np.asarray(coefficients, dtype=complex)] if coefficients is not None else [
        _random_coefficients(n, rng, _planar(grid)) for _ in range(trials)]
    worst = 0.0
    for c in polys:
        vals = _log_abs_poly(c, z) + log_w
        worst = max(worst, float(np.max(vals) - np.max(vals[near])))
    return SupRestrictionReport(n=n, trials=len(polys), max_ratio=math.exp(worst), tolerance=1.0 + 5.0 * grid.cell_size)


@dataclass(frozen=True)
class MonicReport:
    n: int
    trials: int
    min_margin: float
    slack: float

    @property
    def passed(self) -> bool:
        return self.min_margin >= -self.slack


def monic_lower_bound_check(sol: EquilibriumSolution, grid: DomainGrid, field: FieldSpec, n: int, trials: int,
                            rng: np.random.Generator, rho_tol: float = 0.02, polynomials=None) -> MonicReport:
    """min over monic p of log ||e^{-nR}p||_{S_R} + n rho, accepted above -n rho_tol."""
    z = grid.nodes[sol.support_sr]
    log_w = _log_weight(field, z, n)
    polys = [np.asarray(p, dtype=complex) for p in polynomials] if polynomials is not None else [
        _random_coefficients(n, rng, _planar(grid), monic=True) for _ in range(trials)]
    margins = [float(np.max(_log_abs_poly(c, z) + log_w)) + n * sol.rho for c in polys]
    return MonicReport(n=n, trials=len(polys), min_margin=min(margins), slack=n * rho_tol)


@dataclass(frozen=True)
class MonicIntegralReport:
    n: int
    trials: int
    min_value: float
    slack: float

    @property
    def passed(self) -> bool:
        return self.min_value >= -self.slack


def monic_integral_bound_check(sol: EquilibriumSolution, grid: DomainGrid, field: FieldSpec, n: int, trials: int,
                               rng: np.random.Generator, slack: float = 0.1) -> MonicIntegralReport:
    """min over monic p of (1/n) log int |e^{-nR} p|^beta dtau + rho beta."""
    mask = grid.eligible
    z = grid.nodes[mask]
    log_mass = np.log(grid.tau_mass[mask])
    log_w = _log_weight(field, z, n)
    beta = field.beta
    values = []
    for _ in range(trials):
        c = _random_coefficients(n, rng, _planar(grid), monic=True)
        values.append(float(logsumexp(beta * (_log_abs_poly(c, z) + log_w) + log_mass)) / n + sol.rho * beta)
    return MonicIntegralReport(n=n, trials=trials, min_value=min(values), slack=slack)


@dataclass(frozen=True)
class BernsteinWalshReport:
    n: int
    trials: int
    max_violation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance


def bernstein_walsh_check(sol: EquilibriumSolution, grid: DomainGrid, field: FieldSpec, n: int, trials: int,
                          rng: np.random.Generator, tol: float = 0.02) -> BernsteinWalshReport:
    """|e^{-nR}p(z)| <= ||e^{-nR}p||_{S_R} e^{n(V(z) - R(z))} at every node, in log form."""
    z = grid.nodes
    log_w = _log_weight(field, z, n)
    v_minus_r = sol.green_values - sol.r_values
    worst = -math.inf
    for _ in range(trials):
        c = _random_coefficients(n, rng, _planar(grid))
        vals = _log_abs_poly(c, z) + log_w
        bound = float(np.max(vals[sol.support_sr])) + n * v_minus_r
        worst = max(worst, float(np.max(vals - bound)))
    return BernsteinWalshReport(n=n, trials=trials, max_violation=worst, tolerance=n * tol)


# --------------------------------------------------------------------- tails


@dataclass(frozen=True)
class TailMassReport:
    n_grid: tuple[int, ...]
    ratio_out: tuple[float, ...]
    slope: float
    r_squared: float
    drop_per_doubling: tuple[float, ...]

    @property
    def passed(self) -> bool:
        return self.slope < 0 and self.r_squared >= 0.9

    def rows(self) -> list[list]:
        return [[n, r, self.slope] for n, r in zip(self.n_grid, self.ratio_out)]


def tail_ratio(coeffs: np.ndarray, grid: DomainGrid, field: FieldSpec, n: int, beta: float,
               neighborhood: np.ndarray) -> float:
    """int_{Y \\ N} |e^{-nR}p|^beta dtau / int_N |e^{-nR}p|^beta dtau."""
    mask = grid.eligible.copy()
    inside = np.zeros(grid.n_nodes, dtype=bool)
    inside[neighborhood] = True
    z = grid.nodes
    with np.errstate(divide="ignore"):
        terms = beta * (_log_abs_poly(coeffs, z) + _log_weight(field, z, n)) + np.log(grid.tau_mass)
    out_mask = mask & ~inside
    in_mask = mask & inside
    if not out_mask.any():
        return 0.0
    return float(math.exp(logsumexp(terms[out_mask]) - logsumexp(terms[in_mask])))


def tail_mass_check(grid: DomainGrid, field: FieldSpec, n_grid: Sequence[int], beta: Optional[float] = None,
                    neighborhood=None, sol: Optional[EquilibriumSolution] = None, cells: float = 3.0,
                    trials: int = 50, rng: Optional[np.random.Generator] = None,
                    constant: bool = False) -> TailMassReport:
    """Median tail ratio outside a neighbourhood N of S_R* over random (or constant) polynomials, fitted in n."""
    beta = field.beta if beta is None else beta
    if neighborhood is None:
        if sol is None:
            raise ConfigError("tail check needs a neighbourhood or an equilibrium solution")
        neighborhood = grid.dilate(sol.support_sr_star, cells)
    neighborhood = np.asarray(neighborhood, dtype=int)
    if np.all(np.isin(np.flatnonzero(grid.eligible), neighborhood)):
        raise ConfigError("neighbourhood N covers all of Y; the tail check would be vacuous")
    rng = rng or np.random.default_rng(0)
    ns = sorted(int(n) for n in n_grid)
    medians = []
    for n in ns:
        polys = [np.ones(1, dtype=complex)] if constant else [
            _random_coefficients(n, rng, _planar(grid)) for _ in range(trials)]
        medians.append(float(np.median([tail_ratio(c, grid, field, n, beta, neighborhood) for c in polys])))
    logs = np.log(np.maximum(np.asarray(medians), np.finfo(float).tiny))
    fit = stats.linregress(ns, logs) if len(ns) >= 2 else None
    slope = float(fit.slope) if fit is not None else math.nan
    r2 = float(fit.rvalue ** 2) if fit is not None else math.nan
    drops = tuple(a / b if b > 0 else math.inf for a, b in zip(medians, medians[1:]))
    logger.info("tail ratios %s over n=%s: slope %.4g, r^2 %.3f", medians, ns, slope, r2)
    return TailMassReport(n_grid=tuple(ns), ratio_out=tuple(medians), slope=slope, r_squared=r2,
                          drop_per_doubling=drops)


@dataclass(frozen=True)
class TauTailReport:
    a: float
    on_grid: float
    tail: float
    passed: bool
    reason: str


def tau_tail_check(grid: DomainGrid, a: float = 2.0) -> TauTailReport:
    """int_Y dtau / |z|^a over |z| >= 1: grid part plus the Lebesgue tail beyond the truncation radius."""
    far = np.abs(grid.nodes) >= 1.0
    on_grid = float(np.sum(grid.tau_mass[far] / np.abs(grid.nodes[far]) ** a))
    if not grid.unbounded:
        return TauTailReport(a=a, on_grid=on_grid, tail=0.0, passed=True, reason="bounded Y")
    radius = float(grid.truncation_radius)
    density = float(np.median(grid.tau_mass / grid.cell_volume))
    dim = grid.dimension
    if a <= dim:
        return TauTailReport(a=a, on_grid=on_grid, tail=math.inf, passed=False,
                             reason=f"dtau/|z|^a diverges for a <= {dim} with Lebesgue tau")
    if dim == 1:
        tail = density * 2.0 * radius ** (1.0 - a) / (a - 1.0)
    else:
        tail = density * 2.0 * math.pi * radius ** (2.0 - a) / (a - 2.0)
    return TauTailReport(a=a, on_grid=on_grid, tail=tail, passed=True, reason="finite tail")
