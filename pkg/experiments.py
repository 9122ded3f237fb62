"""Experiment runner: equilibrium, sampling, outlier rate, ratio and Bernstein-Markov scenarios."""

import argparse
import logging
import sys
from dataclasses import dataclass, field as dataclass_field
from typing import Any, Optional

import numpy as np

from ensemble_ldp.bernstein import BmStudy, bm_study, tail_mass_check, tau_tail_check
from ensemble_ldp.config import ExperimentConfig, load_config
from ensemble_ldp.domains import DomainGrid
from ensemble_ldp.ensembles import (
    EnsembleConfig,
    estimate_any_coordinate_prob,
    estimate_outlier_prob,
    ldp_rate_fit,
    run_chains,
    sandwich_check,
)
from ensemble_ldp.errors import (
    ConfigError,
    EnsembleLdpError,
    HypothesisViolation,
    QuadratureCostError,
    UnconvergedEquilibriumError,
)
from ensemble_ldp.fields import FieldSpec
from ensemble_ldp.normconst import exact_partition_small_n, ratio_study
from ensemble_ldp.potential import (
    EquilibriumSolution,
    extract_supports,
    hypothesis_counterexample_field,
    solve_equilibrium,
    validate_superlogarithmic,
)
from ensemble_ldp.protocol import (
    BM_COLUMNS,
    PARTITION_COLUMNS,
    PSI_COLUMNS,
    RATIO_COLUMNS,
    SAMPLE_COLUMNS,
    TAIL_COLUMNS,
    encode_solution,
    sample_rows,
)
from ensemble_ldp.store import RunStore

logger = logging.getLogger("experiments")

EXIT_PASS = 0
EXIT_VERDICT_FAIL = 1
EXIT_HYPOTHESIS = 2
EXIT_ERROR = 3

# numbered result each verdict tests, stored with the verdict
VERDICT_REFERENCES = {
    "contact-set-equality": "Hypothesis 6.1",
    "superlogarithmic-growth": "§2 (p0)",
    "tau-tail-integrability": "Hypothesis 7.1",
    "weighted-bernstein-markov": "Hypothesis 3.9",
    "outlier-ldp-rate": "Theorems 6.2/7.3",
    "normalizing-constant-ratio": "Theorem 5.1",
    "tail-mass-concentration": "Lemma 3.11 / Theorem 7.2",
}


@dataclass
class ScenarioOutcome:
    """Result of one scenario: pass/fail plus the verdicts it recorded."""

    scenario: str
    passed: bool
    verdicts: dict[str, Any] = dataclass_field(default_factory=dict)
    payload: Any = None


@dataclass(frozen=True, eq=False)
class PreparedEquilibrium:
    grid: DomainGrid
    field: FieldSpec
    sol: EquilibriumSolution
    contact: dict


def _open_store(config: ExperimentConfig, out_dir: Optional[str]) -> RunStore:
    return RunStore(out_dir or config.output_dir)


def _record(store: RunStore, outcome: ScenarioOutcome, check: str, value: dict) -> None:
    value = {**value, "reference": VERDICT_REFERENCES[check]}
    store.record_verdict(check, value)
    outcome.verdicts[check] = value


def prepare_equilibrium(config: ExperimentConfig) -> PreparedEquilibrium:
    """Build the grid and solve; with counterexample set, re-solve for R replaced by the computed V."""
    grid = config.build_grid()
    field = config.field
    sol = solve_equilibrium(grid, field, config.solver)
    if config.counterexample:
        field = hypothesis_counterexample_field(sol, grid, field)
        logger.info("counterexample: re-solving with R := V of %s", config.field.tag)
        sol = solve_equilibrium(grid, field, config.solver)
    if sol.kkt_residual > config.tolerances.kkt_max:
        raise UnconvergedEquilibriumError(
            f"KKT residual {sol.kkt_residual:.3g} exceeds {config.tolerances.kkt_max:.3g} "
            f"after {sol.iterations} iterations")
    tol = config.tolerances
    report = extract_supports(sol, tol.tol_weight, tol.tol_eq, grid)
    contact = {
        "verdict": report.verdict,
        "mismatch": report.mismatch,
        "allowance": report.allowance,
        "size_SR": int(report.support_sr.size),
        "size_SRstar": int(report.support_sr_star.size),
        "tol_weight": report.tol_weight,
        "tol_eq": report.tol_eq,
        "reference": VERDICT_REFERENCES["contact-set-equality"],
    }
    return PreparedEquilibrium(grid=grid, field=field, sol=sol, contact=contact)


def _require_contact(store: RunStore, outcome: ScenarioOutcome, prepared: PreparedEquilibrium) -> None:
    _record(store, outcome, "contact-set-equality", prepared.contact)
    if prepared.contact["verdict"] == "fails":
        raise HypothesisViolation(
            "contact-set-equality",
            f"S_R != S_R* ({prepared.contact['mismatch']} nodes differ, allowance {prepared.contact['allowance']})")
    if prepared.contact["verdict"] == "marginal":
        logger.warning("contact set agrees only marginally with the support")


def _require_growth(config: ExperimentConfig, store: RunStore, outcome: ScenarioOutcome,
                    grid: DomainGrid, field: FieldSpec) -> None:
    """Superlogarithmic growth of R and tau-tail integrability, for unbounded Y only."""
    if not grid.unbounded:
        return
    growth = validate_superlogarithmic(field, grid, config.tolerances.superlog_margin)
    _record(store, outcome, "superlogarithmic-growth",
            {"verdict": growth.verdict, "reason": growth.reason, "b": growth.b, "values": list(growth.values)})
    if not growth.passed:
        raise HypothesisViolation("superlogarithmic-growth", growth.reason)
    a = config.tolerances.tau_tail_a or float(grid.dimension + 1)
    tail = tau_tail_check(grid, a)
    _record(store, outcome, "tau-tail-integrability",
            {"verdict": "pass" if tail.passed else "fail", "a": tail.a, "on_grid": tail.on_grid,
             "tail": tail.tail, "reason": tail.reason})
    if not tail.passed:
        raise HypothesisViolation("tau-tail-integrability", tail.reason)


def _bm_verdict(config: ExperimentConfig, grid: DomainGrid, field: FieldSpec) -> tuple[dict, BmStudy]:
    study = bm_study(grid, field, config.bm.degrees, config.tolerances.bm_band)
    return {
        "verdict": "pass" if study.passed else "fail",
        "decreasing": study.decreasing,
        "final_root": study.final_root,
        "band": study.band,
        "degrees": [r.n for r in study.rows],
        "field": field.tag,
    }, study


def _require_bm(config: ExperimentConfig, store: RunStore, outcome: ScenarioOutcome,
                grid: DomainGrid, field: FieldSpec) -> None:
    """Reuse a cached Bernstein-Markov verdict for this field, or run the study."""
    check = "weighted-bernstein-markov"
    cached = store.verdict(check)
    if cached is not None and cached.get("field") == field.tag:
        logger.info("reusing cached %s verdict: %s", check, cached["verdict"])
        cached = {**cached, "reference": VERDICT_REFERENCES[check]}
        outcome.verdicts[check] = cached
        verdict = cached
    else:
        verdict, _ = _bm_verdict(config, grid, field)
        _record(store, outcome, check, verdict)
    if verdict["verdict"] != "pass":
        raise HypothesisViolation(check, f"M_n^(1/n) not decreasing into the band (final {verdict['final_root']})")


def run_equilibrium(config: ExperimentConfig, out_dir: Optional[str] = None) -> ScenarioOutcome:
    """Solve and write equilibrium.json plus supports.json."""
    store = _open_store(config, out_dir)
    prepared = prepare_equilibrium(config)
    sol = prepared.sol
    outcome = ScenarioOutcome("equilibrium", passed=prepared.contact["verdict"] != "fails", payload=sol)
    store.write_json("equilibrium.json", encode_solution(sol, prepared.grid, prepared.field), owner="equilibrium")
    doc = dict(prepared.contact)
    doc.update({"rho": sol.rho, "energy": sol.energy, "kkt_residual": sol.kkt_residual,
                "converged": sol.converged, "support_SR": sol.support_sr, "support_SRstar": sol.support_sr_star})
    store.write_json("supports.json", doc, owner="equilibrium")
    _record(store, outcome, "contact-set-equality", prepared.contact)
    return outcome


def run_sample(config: ExperimentConfig, out_dir: Optional[str] = None) -> ScenarioOutcome:
    """Run the chains for every n and log the recorded configurations as CSV."""
    store = _open_store(config, out_dir)
    grid = config.build_grid()
    summary = []
    for n in config.n_grid:
        name = f"samples_n{n}.csv"
        sink = None
        if config.log_samples:
            store.start_table(name, SAMPLE_COLUMNS, owner="sample")

            def sink(chain_id, sweep, points, _name=name):
                store.append_rows(_name, sample_rows(chain_id, sweep, points), owner="sample")

        chains = run_chains(n, config.field, grid, config.seeds, config.sweeps, config.burn_in,
                            config.thin, sample_sink=sink)
        summary.append({
            "n": n,
            "chains": [{"seed": c.stats.seed, "acceptance": c.stats.acceptance_rate,
                        "proposal_scale": c.stats.proposal_scale, "samples": int(c.samples.shape[0]),
                        "equilibrated": c.equilibrated} for c in chains],
        })
    store.write_json("chains.json", {"field": config.field.tag, "runs": summary}, owner="sample")
    passed = all(c["equilibrated"] for run in summary for c in run["chains"])
    return ScenarioOutcome("sample", passed=passed, payload=summary)


def run_ldp_experiment(config: ExperimentConfig, out_dir: Optional[str] = None) -> ScenarioOutcome:
    """Outlier probabilities over n, fitted against the infimum of the rate function on W."""
    if config.window is None:
        raise ConfigError("ldp scenario needs a window")
    store = _open_store(config, out_dir)
    prepared = prepare_equilibrium(config)
    outcome = ScenarioOutcome("ldp", passed=False)
    _require_contact(store, outcome, prepared)
    grid, field, sol = prepared.grid, prepared.field, prepared.sol
    _require_growth(config, store, outcome, grid, field)
    _require_bm(config, store, outcome, grid, field)

    base = EnsembleConfig(n=config.n_grid[0], field=field, grid=grid, window=config.window)
    store.start_table("psi.csv", PSI_COLUMNS, owner="ldp")
    records, sandwiches = [], []
    for n in config.n_grid:
        ens = base.with_n(n)
        chains = run_chains(n, field, grid, config.seeds, config.sweeps, config.burn_in, config.thin)
        first = estimate_outlier_prob(ens, chains, symmetrize=config.symmetrize)
        any_ = estimate_any_coordinate_prob(ens, chains)
        records.append(first)
        if first.psi_hat > 0:
            sandwiches.append(sandwich_check(first, any_, n))
        store.append_rows("psi.csv", [[getattr(r, c) for c in PSI_COLUMNS] for r in (first, any_)], owner="ldp")

    report = ldp_rate_fit(records, sol, config.window, field, grid, rel_tol=config.tolerances.rel_gap)
    sandwich_ok = all(s.passed for s in sandwiches)
    doc = report.to_dict()
    doc["sandwich"] = [{"n": s.n, "lower_ok": s.lower_ok, "upper_ok": s.upper_ok} for s in sandwiches]
    store.write_json("ldp_report.json", doc, owner="ldp")
    _record(store, outcome, "outlier-ldp-rate",
            {"verdict": report.verdict, "fitted_rate": report.fitted_rate, "predicted_rate": report.predicted_rate,
             "relative_gap": report.relative_gap, "sandwich": sandwich_ok})
    outcome.passed = report.verdict in ("pass", "pass-degenerate") and sandwich_ok
    outcome.payload = report
    return outcome


def run_ratio_experiment(config: ExperimentConfig, out_dir: Optional[str] = None) -> ScenarioOutcome:
    """(1/n) log h_n over n against -rho beta, with the n=2 anchor checked by quadrature."""
    store = _open_store(config, out_dir)
    prepared = prepare_equilibrium(config)
    grid, field, sol = prepared.grid, prepared.field, prepared.sol
    outcome = ScenarioOutcome("ratio", passed=False)
    _require_growth(config, store, outcome, grid, field)

    rows = ratio_study(grid, field, config.n_grid, sol, config.seeds, config.sweeps, config.burn_in, config.thin)
    store.start_table("ratio.csv", RATIO_COLUMNS, owner="ratio")
    store.append_rows("ratio.csv", [r.to_row() for r in rows], owner="ratio")

    anchor_ok = True
    anchor_doc = None
    by_n = {r.n: r for r in rows}
    if 2 in by_n:
        try:
            z2 = exact_partition_small_n(grid, field, 2)
            z1 = exact_partition_small_n(grid, field.scaled(2.0), 1)
        except QuadratureCostError as exc:
            logger.warning("n=2 anchor skipped: %s", exc)
        else:
            store.start_table("partition.csv", PARTITION_COLUMNS, owner="ratio")
            store.append_rows("partition.csv", [z1.to_row(), z2.to_row()], owner="ratio")
            exact_h2 = z2.value_log - z1.value_log
            chain_h2 = 2.0 * by_n[2].per_n
            se = 2.0 * by_n[2].error + z2.error_estimate + z1.error_estimate
            anchor_ok = abs(chain_h2 - exact_h2) <= 3.0 * se + 1e-12
            anchor_doc = {"exact_log_h2": exact_h2, "chain_log_h2": chain_h2, "agrees": anchor_ok}

    final = rows[-1]
    target = final.target
    # near-zero targets (flat circle) are compared absolutely
    gap = abs(final.per_n - target) / (abs(target) if abs(target) >= 1e-2 else 1.0)
    within = gap <= config.tolerances.ratio_rel
    verdict = {"verdict": "pass" if within and anchor_ok else "fail", "n": final.n, "per_n": final.per_n,
               "target": target, "relative_gap": gap, "anchor": anchor_doc}
    _record(store, outcome, "normalizing-constant-ratio", verdict)
    outcome.passed = verdict["verdict"] == "pass"
    outcome.payload = rows
    return outcome


def run_bm_experiment(config: ExperimentConfig, out_dir: Optional[str] = None) -> ScenarioOutcome:
    """M_n table over the degrees and the tail-mass fit outside a neighbourhood of S_R*."""
    store = _open_store(config, out_dir)
    prepared = prepare_equilibrium(config)
    grid, field, sol = prepared.grid, prepared.field, prepared.sol
    outcome = ScenarioOutcome("bm", passed=False)
    _require_growth(config, store, outcome, grid, field)

    verdict, study = _bm_verdict(config, grid, field)
    store.start_table("bm.csv", BM_COLUMNS, owner="bm")
    store.append_rows("bm.csv", [r.to_row() for r in study.rows], owner="bm")
    _record(store, outcome, "weighted-bernstein-markov", verdict)

    try:
        tail = tail_mass_check(grid, field, config.bm.tail_n, sol=sol, cells=config.bm.cells,
                               trials=config.bm.trials, rng=np.random.default_rng(config.seeds[0]))
    except ConfigError as exc:
        logger.info("tail-mass check skipped: %s", exc)
        tail_verdict = {"verdict": "skipped", "reason": str(exc)}
    else:
        store.start_table("tail.csv", TAIL_COLUMNS, owner="bm")
        store.append_rows("tail.csv", tail.rows(), owner="bm")
        tail_verdict = {"verdict": "pass" if tail.passed else "fail", "slope": tail.slope,
                        "r_squared": tail.r_squared, "drop_per_doubling": list(tail.drop_per_doubling)}
    _record(store, outcome, "tail-mass-concentration", tail_verdict)
    outcome.passed = verdict["verdict"] == "pass" and tail_verdict["verdict"] != "fail"
    outcome.payload = study
    return outcome


SCENARIOS = {
    "equilibrium": run_equilibrium,
    "sample": run_sample,
    "ldp": run_ldp_experiment,
    "ratio": run_ratio_experiment,
    "bm": run_bm_experiment,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="experiments", description=__doc__)
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=None, help="output directory (default: config output_dir)")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        config = load_config(args.config)
        if config.scenario != args.scenario:
            logger.info("config scenario %r run as %r", config.scenario, args.scenario)
        outcome = SCENARIOS[args.scenario](config, args.out)
    except HypothesisViolation as exc:
        reference = VERDICT_REFERENCES.get(exc.check, "")
        print(f"hypothesis violation [{reference}]: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (EnsembleLdpError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:
        logger.exception("unexpected failure")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    status = "pass" if outcome.passed else "fail"
    logger.info("%s finished: %s", outcome.scenario, status)
    for check, value in sorted(outcome.verdicts.items()):
        print(f"{check}: {value['verdict']} [{value['reference']}]")
    return EXIT_PASS if outcome.passed else EXIT_VERDICT_FAIL


if __name__ == "__main__":
    sys.exit(main())
