"""Tests for weighted orthonormal bases, Bernstein–Markov constants and the tail checks."""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from ensemble_ldp.bernstein import (
    bernstein_walsh_check,
    bm_constant,
    bm_study,
    build_weighted_basis,
    kernel_polynomial_tightness,
    monic_integral_bound_check,
    monic_lower_bound_check,
    sup_restriction_check,
    tail_mass_check,
    tau_tail_check,
)
from ensemble_ldp.domains import DomainGrid, IntervalUnion, truncated_grid
from ensemble_ldp.errors import ConfigError, SingularGramError
from ensemble_ldp.fields import FieldSpec


@pytest.fixture(scope="module")
def lebesgue_interval():
    """Lebesgue measure on [-1, 1] with R(x) = x^2/2."""
    grid = DomainGrid.build(IntervalUnion([(-1.0, 1.0)]), 400)
    field = FieldSpec.polynomial([0.0, 0.0, 0.5], beta=2.0)
    return grid, field


class TestWeightedBasis:
    """Orthonormal basis for e^{-2nR} dtau."""

    def test_orthonormal(self, lebesgue_interval):
        grid, field = lebesgue_interval
        basis = build_weighted_basis(grid, field, 20)
        assert basis.orthonormality_defect < 1e-8
        assert basis.values.shape == (grid.n_nodes, 21)

    def test_evaluate_matches_stored_values(self, lebesgue_interval):
        grid, field = lebesgue_interval
        basis = build_weighted_basis(grid, field, 12)
        assert np.allclose(basis.evaluate(basis.nodes), basis.values, rtol=1e-8, atol=1e-10)

    def test_negative_degree(self, lebesgue_interval):
        grid, field = lebesgue_interval
        with pytest.raises(ConfigError):
            build_weighted_basis(grid, field, -1)

    def test_dirac_measure_is_singular(self):
        grid = DomainGrid.discrete([-1.0, -0.5, 0.0, 0.5, 1.0])
        field = FieldSpec.polynomial([0.0, 0.0, 0.5], beta=2.0)
        build_weighted_basis(grid, field, 4)
        with pytest.raises(SingularGramError) as excinfo:
            build_weighted_basis(grid, field, 5)
        assert excinfo.value.degree == 5

    def test_planar_basis(self, disc_problem):
        basis = build_weighted_basis(disc_problem.grid, disc_problem.field, 6)
        assert basis.planar
        assert basis.orthonormality_defect < 1e-8


class TestBernsteinMarkov:
    """M_n^{1/n} for Lebesgue measure on [-1, 1]."""

    def test_roots_decrease_into_band(self, lebesgue_interval):
        grid, field = lebesgue_interval
        study = bm_study(grid, field, [10, 20, 30, 40, 50])
        assert study.decreasing
        assert study.final_root <= 1.1
        assert study.passed
        assert [row.n for row in study.rows] == [10, 20, 30, 40, 50]

    def test_constant_is_at_least_one_over_root_mass(self, lebesgue_interval):
        # sup |e^{-nR} p| >= ||p||_2 / sqrt(tau(Y)) for the constant polynomial
        grid, field = lebesgue_interval
        basis = build_weighted_basis(grid, field, 0)
        assert bm_constant(basis, grid, field) >= 1.0 / math.sqrt(2.0) - 1e-9

    def test_kernel_polynomial_attains_constant(self, lebesgue_interval):
        grid, field = lebesgue_interval
        basis = build_weighted_basis(grid, field, 15)
        report = kernel_polynomial_tightness(basis, grid, field)
        assert report.relative_gap < 1e-8


class TestRandomPolynomialChecks:
    """Sup restriction, monic lower bounds and Bernstein–Walsh on the disc example."""

    def test_sup_lives_on_support(self, disc_problem):
        rng = np.random.default_rng(5)
        report = sup_restriction_check(disc_problem.sol, disc_problem.grid, disc_problem.field, 10, 20, rng)
        assert report.trials == 20
        assert report.passed

    def test_given_coefficients(self, disc_problem):
        report = sup_restriction_check(disc_problem.sol, disc_problem.grid, disc_problem.field, 2, 0,
                                       np.random.default_rng(0), coefficients=[1.0, 0.0, 1.0])
        assert report.trials == 1
        assert report.max_ratio >= 1.0

    def test_monic_lower_bound(self, disc_problem):
        rng = np.random.default_rng(6)
        report = monic_lower_bound_check(disc_problem.sol, disc_problem.grid, disc_problem.field, 8, 20, rng,
                                         rho_tol=0.05)
        assert report.passed

    def test_monic_integral_values(self, disc_problem):
        rng = np.random.default_rng(7)
        report = monic_integral_bound_check(disc_problem.sol, disc_problem.grid, disc_problem.field, 8, 10, rng)
        assert report.trials == 10
        assert math.isfinite(report.min_value)

    def test_bernstein_walsh(self, disc_problem):
        rng = np.random.default_rng(8)
        report = bernstein_walsh_check(disc_problem.sol, disc_problem.grid, disc_problem.field, 10, 20, rng,
                                       tol=0.05)
        assert report.passed


class TestTailMass:
    """Mass of |e^{-nR}p|^beta outside a neighbourhood of the support."""

    def test_tail_decays_geometrically(self, interval_problem):
        grid, field = interval_problem.grid, interval_problem.field
        inside = np.flatnonzero(np.abs(grid.nodes.real) <= 2.0)
        report = tail_mass_check(grid, field, [10, 20, 40], neighborhood=inside, rng=np.random.default_rng(1))
        assert report.passed
        assert report.slope < 0
        assert all(drop >= 10.0 for drop in report.drop_per_doubling)

    def test_constant_polynomial(self, interval_problem):
        grid, field = interval_problem.grid, interval_problem.field
        inside = np.flatnonzero(np.abs(grid.nodes.real) <= 2.0)
        report = tail_mass_check(grid, field, [10, 20, 40], neighborhood=inside, constant=True)
        assert report.passed
        assert len(report.rows()) == 3

    def test_neighbourhood_from_solution(self, interval_problem):
        report = tail_mass_check(interval_problem.grid, interval_problem.field, [10, 20],
                                 sol=interval_problem.sol, trials=10)
        assert report.n_grid == (10, 20)

    def test_covering_neighbourhood_rejected(self, interval_problem):
        grid = interval_problem.grid
        with pytest.raises(ConfigError):
            tail_mass_check(grid, interval_problem.field, [10, 20], neighborhood=np.arange(grid.n_nodes))

    def test_needs_neighbourhood_or_solution(self, interval_problem):
        with pytest.raises(ConfigError):
            tail_mass_check(interval_problem.grid, interval_problem.field, [10, 20])


class TestTauTail:
    """Integrability of dtau / |z|^a at infinity."""

    def test_bounded_grid(self, disc_problem):
        report = tau_tail_check(disc_problem.grid, a=1.0)
        assert report.passed and report.tail == 0.0

    def test_real_line_integrable(self):
        field = FieldSpec.polynomial([0.0, 0.0, 0.5], beta=2.0)
        report = tau_tail_check(truncated_grid("real_line", field, 100), a=2.0)
        assert report.passed
        assert 0.0 < report.tail < math.inf

    def test_real_line_divergent(self):
        field = FieldSpec.polynomial([0.0, 0.0, 0.5], beta=2.0)
        report = tau_tail_check(truncated_grid("real_line", field, 100), a=1.0)
        assert not report.passed
        assert report.tail == math.inf
