"""Acceptance runs at full size: prints one line per check with its measured values and pass/fail."""

import argparse
import math
import sys
import tempfile
import time
import warnings
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from ensemble_ldp.bernstein import bm_study, build_weighted_basis, tail_mass_check
from ensemble_ldp.config import load_config
from ensemble_ldp.domains import Circle, Disc, DomainGrid, IntervalUnion, truncated_grid
from ensemble_ldp.ensembles import (
    EnsembleConfig,
    EnsembleState,
    batch_means,
    estimate_outlier_prob,
    fekete_ascent,
    log_acceptance_ratio,
    run_chains,
)
from ensemble_ldp.errors import SingularGramError
from ensemble_ldp.fields import FieldSpec
from ensemble_ldp.normconst import exact_moment, exact_outlier_prob, ratio_study, telescoped_log_partition
from ensemble_ldp.potential import solve_equilibrium
from experiments import run_ldp_experiment

CONFIGS = ROOT / "configs"
SEEDS = [1, 2, 3, 4]


def gaussian_field(beta=2.0):
    return FieldSpec.polynomial([0.0, 0.0, 0.5], beta=beta, tag="gaussian")


def ac1_equilibrium():
    grid = DomainGrid.build(Disc(2.0), 60)
    sol = solve_equilibrium(grid, FieldSpec.radial([0.0, 0.0, 1.0], beta=2.0))
    radius = float(np.max(np.abs(sol.nodes[sol.support_sr])))
    rho = 0.5 + 0.5 * math.log(2.0)
    ok = abs(radius - 1 / math.sqrt(2.0)) <= 2 * grid.cell_size and abs(sol.rho - rho) <= 0.02 \
        and sol.kkt_residual <= 1e-3
    return ok, f"radius {radius:.4f} rho {sol.rho:.5f} kkt {sol.kkt_residual:.2e}"


def ac2_ratio():
    grid = DomainGrid.build(IntervalUnion([(-3.0, 3.0)]), 300)
    field = gaussian_field()
    sol = solve_equilibrium(grid, field)
    rows = ratio_study(grid, field, [2, 32], sol, SEEDS, sweeps=20000, burn_in=5000)
    exact_h2 = math.log(math.pi / 4.0) - math.log(math.sqrt(math.pi / 2.0))
    anchor_ok = abs(2.0 * rows[0].per_n - exact_h2) <= 3.0 * 2.0 * rows[0].error + 1e-12
    gap = abs(rows[-1].per_n - rows[-1].target) / abs(rows[-1].target)
    return anchor_ok and gap <= 0.10, f"(1/32) log h_32 {rows[-1].per_n:.4f} target {rows[-1].target:.4f} " \
                                      f"gap {gap:.3f} anchor_ok {anchor_ok}"


def ac3_circle():
    grid = DomainGrid.build(Circle(1.0), 256, tau_scale=1.0 / (2.0 * math.pi))
    field = FieldSpec.radial([0.0], beta=2.0)
    n = 32
    tele = telescoped_log_partition(grid, field, n, SEEDS, sweeps=6000, burn_in=1500)
    scaled = tele.record.value_log / n ** 2
    fekete = fekete_ascent(n, grid, field, np.random.default_rng(0))
    # equally spaced points: log A = beta (n/2) log n
    closed = field.beta * 0.5 * n * math.log(n) / n ** 2
    ok = abs(scaled) <= 0.1 and abs(fekete.value - closed) <= 0.1 * closed
    return ok, f"(1/n^2) log Z_n {scaled:.4f} fekete {fekete.value:.4f} (equally spaced {closed:.4f})"


def ac4_ac5_ldp():
    lines, ok = [], True
    for name, accepted in (("disc_ldp.json", ("pass",)), ("disc_ldp_overlap.json", ("pass-degenerate",))):
        config = load_config(CONFIGS / name)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            outcome = run_ldp_experiment(config, tempfile.mkdtemp(prefix="ldp_"))
        report = outcome.payload
        sandwich = outcome.verdicts["outlier-ldp-rate"]["sandwich"]
        ok &= report.verdict in accepted and sandwich
        lines.append(f"{name}: fitted {report.fitted_rate:.4f} predicted {report.predicted_rate:.4f} "
                     f"-> {report.verdict}, sandwich {sandwich}")
    return ok, "; ".join(lines)


def ac6_bernstein_markov():
    grid = DomainGrid.build(IntervalUnion([(-1.0, 1.0)]), 400)
    study = bm_study(grid, gaussian_field(), [10, 20, 30, 40, 50])
    dirac = DomainGrid.discrete([-1.0, -0.5, 0.0, 0.5, 1.0])
    try:
        build_weighted_basis(dirac, gaussian_field(), 5)
        singular = False
    except SingularGramError as exc:
        singular = exc.degree == 5
    roots = ", ".join(f"{r.root:.4f}" for r in study.rows)
    return study.passed and singular, f"M_n^(1/n): {roots}; dirac singular at 5: {singular}"


def ac7_tail():
    field = gaussian_field()
    grid = truncated_grid("real_line", field, 400)
    sol = solve_equilibrium(grid, field)
    report = tail_mass_check(grid, field, [10, 20, 40], sol=sol, trials=50, rng=np.random.default_rng(7))
    drops = ", ".join(f"{d:.3g}" for d in report.drop_per_doubling)
    return all(d >= 10.0 for d in report.drop_per_doubling), f"drop per doubling {drops}"


def ac8_oracles():
    grid = DomainGrid.build(IntervalUnion([(-3.0, 3.0)]), 60)
    window = IntervalUnion([(1.0, 3.0)])
    fields = [gaussian_field(2.0), gaussian_field(1.0), FieldSpec.polynomial([0.0, 0.0, 0.0, 0.0, 0.25], beta=2.0)]
    ok, worst = True, 0.0
    for field in fields:
        for n in (2, 3):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                chains = run_chains(n, field, grid, SEEDS, sweeps=20000, burn_in=5000)
            psi = estimate_outlier_prob(EnsembleConfig(n=n, field=field, grid=grid, window=window), chains)
            psi_exact = exact_outlier_prob(grid, field, n, window, order=8 if n == 3 else 24)
            m, m_se, _ = batch_means([np.abs(c.samples[:, 0]) ** 2 for c in chains])
            m_exact = exact_moment(grid, field, n, order=8 if n == 3 else 24)
            for got, se, want in ((psi.psi_hat, psi.stderr, psi_exact), (m, m_se, m_exact)):
                z = abs(got - want) / max(se, 1e-12)
                worst = max(worst, z)
                ok &= z <= 3.0
    return ok, f"worst deviation {worst:.2f} standard errors"


def ac9_invariants():
    grid = DomainGrid.build(Disc(2.0), 40)
    field = FieldSpec.radial([0.0, 0.0, 1.0], beta=2.0)
    rng = np.random.default_rng(3)
    pts = np.array([0.1 + 0.2j, -0.3 + 0.1j, 0.4 - 0.5j])
    y = 0.2 - 0.1j
    forward = log_acceptance_ratio(EnsembleState(pts, field), 0, y, field, grid, 0.3)
    moved = pts.copy()
    moved[0] = y
    backward = log_acceptance_ratio(EnsembleState(moved, field), 0, pts[0], field, grid, 0.3)
    balance = abs(forward + backward) <= 1e-10

    line = DomainGrid.build(IntervalUnion([(-3.0, 3.0)]), 60)
    window = IntervalUnion([(1.0, 3.0)])
    a = exact_outlier_prob(line, gaussian_field(), 2, window)
    b = exact_outlier_prob(line.with_tau_scale(float(rng.uniform(0.1, 10.0))), gaussian_field(), 2, window)
    scaling = math.isclose(a, b, rel_tol=1e-10)

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        first = run_chains(4, field, grid, [9], sweeps=600, burn_in=200)
        second = run_chains(4, field, grid, [9], sweeps=600, burn_in=200)
    reproducible = np.array_equal(first[0].samples, second[0].samples)
    return balance and scaling and reproducible, \
        f"detailed balance {balance}, tau scaling {scaling}, reproducible {reproducible}"


CHECKS = {
    "ac1": ac1_equilibrium,
    "ac2": ac2_ratio,
    "ac3": ac3_circle,
    "ac4": ac4_ac5_ldp,
    "ac6": ac6_bernstein_markov,
    "ac7": ac7_tail,
    "ac8": ac8_oracles,
    "ac9": ac9_invariants,
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("checks", nargs="*", help=f"subset of {sorted(CHECKS)} (default: all)")
    args = parser.parse_args()
    names = args.checks or list(CHECKS)
    unknown = sorted(set(names) - set(CHECKS))
    if unknown:
        parser.error(f"unknown checks: {unknown}")
    failures = 0
    for name in names:
        start = time.perf_counter()
        ok, detail = CHECKS[name]()
        elapsed = time.perf_counter() - start
        failures += not ok
        print(f"{name:<4} {'pass' if ok else 'FAIL':<4} {elapsed:>8.1f}s  {detail}")
    print("Done.")
    sys.exit(1 if failures else 0)


if __name__ == "__main__":
    main()
