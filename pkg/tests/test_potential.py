"""Tests for the equilibrium solver, supports, Green and rate functions and the closed forms."""

import math
import sys
import warnings
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import trapezoid

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from ensemble_ldp.domains import Circle, Disc, DomainGrid, IntervalUnion, truncated_grid
from ensemble_ldp.errors import (
    BracketError,
    ConfigError,
    DesingularizedEvaluationWarning,
    DimensionMismatchError,
    HypothesisViolation,
    InvalidMeasureError,
)
from ensemble_ldp.fields import FieldSpec
from ensemble_ldp.potential import (
    DiscreteMeasure,
    extract_supports,
    green_function,
    hypothesis_counterexample_field,
    radial_equilibrium,
    radial_support_radius,
    rate_function,
    refinement_study,
    require_contact_equality,
    robin_constant,
    semicircle_equilibrium,
    solve_equilibrium,
    validate_superlogarithmic,
    weighted_energy,
)

DISC_RHO = 0.5 + 0.5 * math.log(2.0)
DISC_T0 = 1.0 / math.sqrt(2.0)


class TestDiscreteMeasure:
    """Probability vectors over grid nodes."""

    def test_uniform_sums_to_one(self):
        mu = DiscreteMeasure.uniform(7)
        assert mu.size == 7
        assert math.isclose(mu.weights.sum(), 1.0)

    def test_negative_weight_rejected(self):
        with pytest.raises(InvalidMeasureError):
            DiscreteMeasure(np.array([1.5, -0.5]))

    def test_unnormalized_rejected(self):
        with pytest.raises(InvalidMeasureError):
            DiscreteMeasure(np.array([0.5, 0.6]))

    def test_large_vector_held_to_absolute_tolerance(self):
        w = np.full(10000, 1e-4)
        w[0] += 5e-12
        with pytest.raises(InvalidMeasureError):
            DiscreteMeasure(w)
        mu = DiscreteMeasure.normalized(np.random.default_rng(1).random(10000))
        assert mu.size == 10000

    def test_normalized_rescales(self):
        mu = DiscreteMeasure.normalized([2.0, 2.0, 4.0])
        assert np.allclose(mu.weights, [0.25, 0.25, 0.5])

    def test_energy_size_mismatch(self, disc_problem):
        with pytest.raises(DimensionMismatchError):
            weighted_energy(DiscreteMeasure.uniform(3), disc_problem.grid, disc_problem.field)


class TestDiscEquilibrium:
    """R = |z|^2 on the radius-2 disc against the radial closed form."""

    def test_robin_constant(self, disc_problem):
        assert abs(disc_problem.sol.rho - DISC_RHO) < 0.04

    def test_kkt_residual(self, disc_problem):
        assert disc_problem.sol.kkt_residual <= 1e-3

    def test_weights_form_probability(self, disc_problem):
        w = disc_problem.sol.weights
        assert np.all(w >= 0)
        assert math.isclose(w.sum(), 1.0, abs_tol=1e-12)

    def test_support_radius(self, disc_problem):
        sol, grid = disc_problem.sol, disc_problem.grid
        radius = float(np.max(np.abs(sol.nodes[sol.support_sr])))
        assert abs(radius - DISC_T0) <= 3 * grid.cell_size

    def test_contact_set_matches_support(self, disc_problem):
        assert disc_problem.sol.hypothesis_verdict in ("holds", "marginal")
        require_contact_equality(disc_problem.sol)

    def test_robin_constant_recomputed(self, disc_problem):
        rho = robin_constant(disc_problem.sol, disc_problem.grid, disc_problem.field)
        assert math.isclose(rho, disc_problem.sol.rho, abs_tol=1e-9)

    def test_energy_never_increases(self, disc_problem):
        trace = disc_problem.sol.energy_trace
        assert trace.size > 0
        assert np.all(np.diff(trace) <= 1e-10 * np.maximum(1.0, np.abs(trace[1:])))

    def test_minimizes_over_random_measures(self, disc_problem):
        grid, field = disc_problem.grid, disc_problem.field
        best = weighted_energy(disc_problem.sol.measure, grid, field)
        rng = np.random.default_rng(17)
        for trial in range(100):
            w = np.zeros(grid.n_nodes)
            if trial % 2:
                w[:] = rng.dirichlet(np.ones(grid.n_nodes))
            else:
                chosen = rng.choice(grid.n_nodes, size=25, replace=False)
                w[chosen] = rng.dirichlet(np.ones(25))
            assert best <= weighted_energy(DiscreteMeasure.normalized(w), grid, field) + 1e-9

    @pytest.mark.timeout(600)
    def test_full_resolution_disc(self):
        grid = DomainGrid.build(Disc(2.0), 60)
        sol = solve_equilibrium(grid, FieldSpec.radial([0.0, 0.0, 1.0], beta=2.0))
        radius = float(np.max(np.abs(sol.nodes[sol.support_sr])))
        assert sol.kkt_residual <= 1e-3
        assert abs(sol.rho - DISC_RHO) <= 0.02
        assert abs(radius - DISC_T0) <= 2 * grid.cell_size

    def test_supports_unpack_as_pair(self, disc_problem):
        sr, sr_star = extract_supports(disc_problem.sol, grid=disc_problem.grid)
        assert sr.size > 0 and sr_star.size > 0

    def test_to_dict_keys(self, disc_problem):
        doc = disc_problem.sol.to_dict()
        for key in ("nodes", "weights", "rho", "kkt_residual", "support_SR", "support_SRstar"):
            assert key in doc


class TestGreenAndRate:
    """V = U^mu + rho and the rate function beta (R - V)."""

    def test_far_field_matches_log_plus_rho(self, disc_problem):
        z = 50.0
        v = green_function(disc_problem.sol, disc_problem.grid, z)
        assert abs(v - (math.log(z) + disc_problem.sol.rho)) < 1e-3

    def test_node_evaluation_warns(self, disc_problem):
        sol = disc_problem.sol
        with pytest.warns(DesingularizedEvaluationWarning):
            green_function(sol, disc_problem.grid, sol.nodes[sol.support_sr[0]])

    def test_grid_mismatch(self, disc_problem, interval_problem):
        with pytest.raises(DimensionMismatchError):
            green_function(disc_problem.sol, interval_problem.grid, 0.5)

    def test_rate_outside_support(self, disc_problem):
        exact = radial_equilibrium(disc_problem.field)
        got = rate_function(disc_problem.sol, disc_problem.field, 1.5)
        assert abs(got - float(exact.rate(1.5))) < 0.1

    def test_rate_vanishes_on_support(self, disc_problem):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            got = rate_function(disc_problem.sol, disc_problem.field, 0.3 + 0.02j)
        assert abs(got) < 0.1

    def test_rate_is_nonnegative_on_nodes(self, disc_problem):
        sol = disc_problem.sol
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DesingularizedEvaluationWarning)
            j = rate_function(sol, disc_problem.field, sol.nodes, slack=disc_problem.grid.cell_size)
        assert np.all(j >= 0)


class TestRadialClosedForm:
    """Support radius, Robin constant and rate for radial fields."""

    def test_disc_support_radius(self):
        field = FieldSpec.radial([0.0, 0.0, 1.0], beta=2.0)
        assert abs(radial_support_radius(field) - DISC_T0) < 1e-8

    def test_disc_closed_form(self):
        eq = radial_equilibrium(FieldSpec.radial([0.0, 0.0, 1.0], beta=2.0))
        assert abs(eq.rho - DISC_RHO) < 1e-8
        assert abs(eq.energy() - (DISC_RHO + 0.25)) < 1e-6
        assert abs(float(eq.rate(0.95)) - 0.2144) < 1e-3
        assert abs(float(eq.rate(1.0)) - 2.0 * (1.0 - DISC_RHO)) < 1e-9

    def test_density_integrates_to_one(self):
        eq = radial_equilibrium(FieldSpec.radial([0.0, 0.0, 1.0], beta=2.0))
        t = np.linspace(0.0, eq.support_radius, 2001)
        mass = trapezoid(eq.density(t + 0j) * 2.0 * np.pi * t, t)
        assert abs(mass - 1.0) < 1e-3

    def test_non_radial_field_rejected(self):
        with pytest.raises(ConfigError):
            radial_support_radius(FieldSpec.polynomial([0.0, 0.0, 1.0], beta=2.0))

    def test_decreasing_field_has_no_bracket(self):
        with pytest.raises(BracketError):
            radial_support_radius(FieldSpec.radial([0.0, 0.0, -1.0], beta=2.0))


class TestSemicircle:
    """Real quadratic case against the semicircle law."""

    def test_constants(self):
        eq = semicircle_equilibrium(0.5)
        assert math.isclose(eq.half_width, math.sqrt(2.0))
        assert math.isclose(eq.rho, DISC_RHO)
        assert math.isclose(eq.energy, DISC_RHO + 0.25)

    def test_green_equals_field_on_support(self):
        eq = semicircle_equilibrium(0.5)
        x = np.array([-1.0, 0.0, 0.5, 1.2])
        assert np.allclose(eq.green(x), 0.5 * x ** 2, atol=1e-12)

    def test_green_far_field(self):
        eq = semicircle_equilibrium(0.5)
        assert abs(float(eq.green(1e4)) - (math.log(1e4) + eq.rho)) < 1e-6

    def test_solver_matches(self, interval_problem):
        eq = semicircle_equilibrium(0.5)
        assert abs(interval_problem.sol.rho - eq.rho) < 0.02
        sol = interval_problem.sol
        edge = float(np.max(np.abs(sol.nodes[sol.support_sr].real)))
        assert abs(edge - eq.half_width) <= 4 * interval_problem.grid.cell_size

    def test_rejects_nonpositive(self):
        with pytest.raises(ConfigError):
            semicircle_equilibrium(0.0)


class TestCircle:
    """Q = 0 on the unit circle: uniform measure, rho = 0."""

    def test_uniform_weights(self, circle_problem):
        w = circle_problem.sol.weights
        assert np.allclose(w, 1.0 / w.size, atol=5e-4)

    def test_robin_constant_zero(self, circle_problem):
        assert abs(circle_problem.sol.rho) < 0.01

    def test_green_at_centre_vanishes(self, circle_problem):
        assert abs(green_function(circle_problem.sol, circle_problem.grid, 0.0)) < 0.01

    @pytest.mark.timeout(300)
    def test_energy_near_zero_at_512_nodes(self):
        grid = DomainGrid.build(Circle(1.0), 512, tau_scale=1.0 / (2.0 * math.pi))
        field = FieldSpec.radial([0.0], beta=2.0)
        sol = solve_equilibrium(grid, field)
        assert abs(weighted_energy(sol.measure, grid, field)) <= 0.02


class TestContactSetCounterexample:
    """R replaced by the computed V: the contact set becomes all of Y."""

    def test_supports_disagree(self, disc_problem):
        grid, field = disc_problem.grid, disc_problem.field
        field2 = hypothesis_counterexample_field(disc_problem.sol, grid, field)
        sol2 = solve_equilibrium(grid, field2)
        report = extract_supports(sol2, tol_eq=1e-2, grid=grid)
        assert report.verdict == "fails"
        assert report.support_sr_star.size > report.support_sr.size


class TestRefusal:
    """require_contact_equality refuses with a named check."""

    def test_named_violation(self, disc_problem):
        from dataclasses import replace

        broken = replace(disc_problem.sol, hypothesis_verdict="fails")
        with pytest.raises(HypothesisViolation) as excinfo:
            require_contact_equality(broken)
        assert excinfo.value.check == "contact-set-equality"


class TestSuperlogarithmicGrowth:
    """Growth check of R on unbounded sets."""

    def test_quadratic_passes(self):
        field = FieldSpec.polynomial([0.0, 0.0, 0.5], beta=2.0)
        grid = truncated_grid("real_line", field, 100)
        report = validate_superlogarithmic(field, grid)
        assert report.passed and report.verdict == "pass"

    def test_logarithmic_fails(self):
        field = FieldSpec.radial_function(lambda t: np.log1p(t), beta=2.0)
        grid = DomainGrid.build(Disc(50.0), 10, truncation_radius=50.0, unbounded=True)
        assert not validate_superlogarithmic(field, grid).passed

    def test_bounded_grid_rejected(self, disc_problem):
        with pytest.raises(ConfigError):
            validate_superlogarithmic(disc_problem.field, disc_problem.grid)


class TestRefinement:
    """Robin constant settles as the interval grid is refined."""

    def test_converges(self):
        field = FieldSpec.polynomial([0.0, 0.0, 0.5], beta=2.0)
        rows = refinement_study(IntervalUnion([(-3.0, 3.0)]), field, [75, 150, 300])
        assert [h for h, _ in rows] == sorted((h for h, _ in rows), reverse=True)
        errors = [abs(rho - DISC_RHO) for _, rho in rows]
        assert errors[-1] < 0.02
