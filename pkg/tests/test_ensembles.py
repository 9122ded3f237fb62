"""Tests for the joint density, Metropolis chains, outlier estimates and rate fits."""

import math
import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from ensemble_ldp.domains import Annulus, Circle, Disc, DomainGrid, IntervalUnion
from ensemble_ldp.errors import ConfigError, InsufficientDataError, RareEventWarning
from ensemble_ldp.ensembles import (
    ChainStats,
    EnsembleConfig,
    EnsembleState,
    OutlierRecord,
    batch_means,
    concentration_profile,
    configuration_potential_gaps,
    empirical_measure,
    estimate_any_coordinate_prob,
    estimate_outlier_prob,
    fekete_ascent,
    ldp_rate_fit,
    log_acceptance_ratio,
    log_joint_density,
    log_target,
    mcmc_sweep,
    predicted_window_rate,
    proposal_log_density,
    run_chain,
    run_chains,
    sandwich_check,
    wasserstein_to_equilibrium,
)
from ensemble_ldp.fields import FieldSpec


@pytest.fixture(scope="module")
def small_disc():
    grid = DomainGrid.build(Disc(2.0), 20)
    field = FieldSpec.radial([0.0, 0.0, 1.0], beta=2.0)
    return grid, field


@pytest.fixture(scope="module")
def disc_chains(small_disc):
    grid, field = small_disc
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_chains(4, field, grid, seeds=[11, 12], sweeps=600, burn_in=200)


def _records(rate, intercept=0.1, ns=(8, 16, 24, 32, 48, 64)):
    out = []
    for n in ns:
        psi = math.exp(-rate * n + intercept)
        out.append(OutlierRecord(n=n, psi_hat=psi, ci_low=0.9 * psi, ci_high=min(1.0, 1.1 * psi), method="mcmc"))
    return out


class TestJointDensity:
    """Log joint density and its cached state."""

    def test_two_points(self):
        field = FieldSpec.radial([0.0, 0.0, 1.0], beta=2.0)
        state = EnsembleState([0.5, -0.5j], field)
        expected = 2.0 * math.log(abs(0.5 + 0.5j)) - 2.0 * 2 * (0.25 + 0.25)
        assert math.isclose(state.log_density, expected, rel_tol=1e-12)
        assert math.isclose(log_joint_density(state, field), expected, rel_tol=1e-12)

    def test_coincident_points(self):
        field = FieldSpec.radial([0.0, 0.0, 1.0], beta=2.0)
        assert EnsembleState([0.3, 0.3], field).log_density == -math.inf

    def test_log_target_outside_domain(self, small_disc):
        grid, field = small_disc
        assert log_target([0.1, 3.0], field, grid) == -math.inf

    def test_cache_stays_coherent(self, small_disc):
        grid, field = small_disc
        rng = np.random.default_rng(5)
        state = EnsembleState([0.1, 0.4j, -0.3, 0.2 - 0.2j, 0.5 + 0.5j], field)
        stats_ = ChainStats(seed=5, proposal_scale=0.3, burn_in=0)
        for _ in range(200):
            mcmc_sweep(state, field, grid, stats_, rng)
        assert stats_.accepted > 0
        assert state.cache_error(field) < 1e-9

    def test_empirical_measure_masses(self):
        em = empirical_measure(np.array([0.0, 1.0, 2.0, 3.0]))
        assert np.allclose(em.masses, 0.25)


class TestDetailedBalance:
    """Metropolis-Hastings ratio is exact in log space."""

    @pytest.mark.parametrize("geometry,points,move", [
        (Disc(2.0), [0.1 + 0.2j, -0.4, 0.3j], 0.6 - 0.1j),
        (Circle(1.0), [1.0 + 0j, 1j, -1.0 + 0j], complex(math.cos(2.0), math.sin(2.0))),
        (IntervalUnion([(-3.0, 3.0)]), [-1.0 + 0j, 0.5 + 0j, 2.0 + 0j], 1.1 + 0j),
    ])
    def test_ratio_matches_target(self, geometry, points, move):
        grid = DomainGrid.build(geometry, 40)
        field = FieldSpec.radial([0.0, 0.0, 1.0], beta=2.0)
        scale = 0.4
        state = EnsembleState(points, field)
        moved = np.array(points, dtype=complex)
        moved[1] = move
        forward = log_acceptance_ratio(state, 1, move, field, grid, scale)
        expected = (log_target(moved, field, grid) - log_target(points, field, grid)
                    + proposal_log_density(geometry, move, points[1], scale)
                    - proposal_log_density(geometry, points[1], move, scale))
        assert math.isclose(forward, expected, rel_tol=1e-10, abs_tol=1e-10)
        backward = log_acceptance_ratio(EnsembleState(moved, field), 1, points[1], field, grid, scale)
        assert math.isclose(forward, -backward, rel_tol=1e-10, abs_tol=1e-10)

    def test_circle_proposal_symmetric(self):
        circle = Circle(1.0)
        x, y = 1.0 + 0j, complex(math.cos(3.0), math.sin(3.0))
        assert math.isclose(proposal_log_density(circle, x, y, 0.5), proposal_log_density(circle, y, x, 0.5))

    def test_move_outside_rejected(self, small_disc):
        grid, field = small_disc
        state = EnsembleState([0.1, 0.2j], field)
        assert log_acceptance_ratio(state, 0, 2.5 + 0j, field, grid, 0.3) == -math.inf


class TestChains:
    """Burn-in, thinning and reproducibility."""

    def test_reproducible(self, small_disc):
        grid, field = small_disc
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a = run_chain(3, field, grid, seed=7, sweeps=300, burn_in=100, thin=2)
            b = run_chain(3, field, grid, seed=7, sweeps=300, burn_in=100, thin=2)
        assert np.array_equal(a.samples, b.samples)
        assert a.samples.shape == (100, 3)

    def test_burn_in_must_be_below_sweeps(self, small_disc):
        grid, field = small_disc
        with pytest.raises(ConfigError):
            run_chain(3, field, grid, seed=1, sweeps=100, burn_in=100)

    def test_sample_sink_receives_records(self, small_disc):
        grid, field = small_disc
        seen = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            result = run_chain(2, field, grid, seed=3, sweeps=50, burn_in=10, thin=5,
                               sample_sink=lambda cid, sweep, pts: seen.append((cid, sweep, pts.copy())))
        assert len(seen) == result.samples.shape[0] == 8
        assert all(grid.contains(pts).all() for _, _, pts in seen)

    def test_frozen_scale_counts(self, disc_chains):
        for chain in disc_chains:
            assert not chain.stats.adapting
            assert chain.stats.proposed == 4 * (600 - 200)


class TestOutlierEstimates:
    """psi_n estimates, zero-hit bound and sandwich."""

    def test_zero_hits_give_upper_bound(self, small_disc, disc_chains):
        grid, field = small_disc
        config = EnsembleConfig(n=4, field=field, grid=grid, window=Annulus(1.9, 2.0))
        with pytest.warns(RareEventWarning):
            rec = estimate_outlier_prob(config, disc_chains)
        total = sum(c.samples.shape[0] for c in disc_chains)
        assert rec.psi_hat == 0.0 and rec.hits == 0
        assert math.isclose(rec.ci_high, min(1.0, 3.0 / total))

    def test_sandwich(self, small_disc, disc_chains):
        grid, field = small_disc
        config = EnsembleConfig(n=4, field=field, grid=grid, window=Annulus(0.5, 0.9))
        first = estimate_outlier_prob(config, disc_chains)
        any_ = estimate_any_coordinate_prob(config, disc_chains)
        assert first.psi_hat <= any_.psi_hat
        assert sandwich_check(first, any_, 4).passed

    def test_symmetrized_event(self, small_disc, disc_chains):
        grid, field = small_disc
        config = EnsembleConfig(n=4, field=field, grid=grid, window=Annulus(0.5, 0.9))
        rec = estimate_outlier_prob(config, disc_chains, symmetrize=True)
        assert rec.event == "first-symmetrized"
        assert 0.0 < rec.psi_hat < 1.0

    def test_window_outside_box(self, small_disc):
        grid, field = small_disc
        with pytest.raises(ConfigError):
            EnsembleConfig(n=4, field=field, grid=grid, window=Annulus(2.5, 3.0))

    def test_batch_means_constant(self):
        mean, stderr, batches = batch_means([np.full(100, 0.25), np.full(60, 0.25)], batches=10)
        assert math.isclose(mean, 0.25) and stderr == 0.0 and batches == 20

    def test_batch_means_empty(self):
        with pytest.raises(InsufficientDataError):
            batch_means([np.zeros(0)])

    def test_record_validation(self):
        with pytest.raises(ValueError):
            OutlierRecord(n=4, psi_hat=0.5, ci_low=0.6, ci_high=0.7, method="mcmc")


class TestRateFit:
    """Weighted least squares of -log psi_n against n."""

    def test_exact_exponential(self):
        window = Annulus(0.95, 1.05)
        field = FieldSpec.radial([0.0, 0.0, 1.0], beta=2.0)
        report = ldp_rate_fit(_records(0.3), None, window, field, predicted_rate=0.3)
        assert abs(report.fitted_rate - 0.3) < 1e-9
        assert report.verdict == "pass"
        assert report.used_n == (8, 16, 24, 32, 48, 64)

    def test_wrong_prediction_fails(self):
        field = FieldSpec.radial([0.0, 0.0, 1.0], beta=2.0)
        report = ldp_rate_fit(_records(0.3), None, Annulus(0.95, 1.05), field, predicted_rate=0.5)
        assert report.verdict == "fail"
        assert math.isclose(report.relative_gap, 0.4, rel_tol=1e-6)

    def test_degenerate_window(self):
        field = FieldSpec.radial([0.0, 0.0, 1.0], beta=2.0)
        report = ldp_rate_fit(_records(0.0, intercept=-0.7), None, Annulus(0.1, 0.3), field, predicted_rate=0.0)
        assert report.verdict == "pass-degenerate"

    def test_too_few_points(self):
        field = FieldSpec.radial([0.0, 0.0, 1.0], beta=2.0)
        with pytest.raises(InsufficientDataError):
            ldp_rate_fit(_records(0.3, ns=(8, 16, 24)), None, Annulus(0.95, 1.05), field, predicted_rate=0.3)

    def test_predicted_rate_on_disc(self, disc_problem):
        rate = predicted_window_rate(disc_problem.sol, disc_problem.field, Annulus(0.95, 1.05), disc_problem.grid)
        assert abs(rate - 0.2144) < 0.1

    def test_report_serializes(self):
        field = FieldSpec.radial([0.0, 0.0, 1.0], beta=2.0)
        doc = ldp_rate_fit(_records(0.3), None, Annulus(0.95, 1.05), field, predicted_rate=0.3).to_dict()
        assert doc["verdict"] == "pass" and len(doc["records"]) == 6


class TestExtremalAndDistances:
    """Fekete ascent, Wasserstein distance and configuration gaps."""

    def test_fekete_on_circle(self, circle_problem):
        n = 8
        res = fekete_ascent(n, circle_problem.grid, circle_problem.field, np.random.default_rng(0))
        exact = 2.0 * (n / 2.0) * math.log(n)
        assert res.log_a <= exact + 1e-9
        assert res.log_a >= exact - 0.5
        assert math.isclose(res.value, res.log_a / n ** 2)

    def test_fekete_pair_on_interval(self):
        grid = DomainGrid.build(IntervalUnion([(-1.0, 1.0)]), 100)
        field = FieldSpec.polynomial([0.0], beta=2.0)
        res = fekete_ascent(2, grid, field, np.random.default_rng(5))
        ends = np.sort(res.points.real)
        assert abs(ends[0] + 1.0) <= grid.cell_size
        assert abs(ends[1] - 1.0) <= grid.cell_size
        assert math.isclose(res.log_a, 2.0 * math.log(ends[1] - ends[0]), rel_tol=1e-12)

    def test_fekete_needs_two_points(self, circle_problem):
        with pytest.raises(ConfigError):
            fekete_ascent(1, circle_problem.grid, circle_problem.field, np.random.default_rng(0))

    def test_wasserstein_zero_on_itself(self, interval_problem):
        sol = interval_problem.sol
        support = sol.measure.support()
        d = wasserstein_to_equilibrium(sol.nodes[support], sol, masses=sol.weights[support])
        assert d < 1e-12

    def test_planar_wasserstein_to_origin(self, disc_problem):
        d = wasserstein_to_equilibrium([0j], disc_problem.sol)
        assert abs(d - 2.0 / 3.0 / math.sqrt(2.0)) < 0.03

    def test_concentration_profile_fractions(self, interval_problem):
        rng = np.random.default_rng(2)
        samples = {4: rng.uniform(-1.4, 1.4, size=(20, 4)) + 0j, 8: rng.uniform(-1.4, 1.4, size=(20, 8)) + 0j}
        profile = concentration_profile(samples, interval_problem.sol, radius=0.2)
        assert [n for n, _ in profile] == [4, 8]
        assert all(0.0 <= f <= 1.0 for _, f in profile)

    def test_potential_gaps_finite(self, interval_problem):
        pts = np.array([-1.0, -0.4, 0.1, 0.7, 1.2]) + 0j
        report = configuration_potential_gaps(pts, interval_problem.sol, interval_problem.grid,
                                              interval_problem.field)
        assert report.n == 5
        assert math.isfinite(report.potential_gap) and math.isfinite(report.sup_gap)
