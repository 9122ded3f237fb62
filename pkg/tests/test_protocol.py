"""Tests for the JSON document and CSV row encoders."""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from ensemble_ldp.errors import ConfigError
from ensemble_ldp.protocol import (
    SAMPLE_COLUMNS,
    decode_document,
    decode_rows,
    decode_solution,
    encode_document,
    encode_row,
    encode_solution,
    sample_rows,
)


class TestDocuments:
    """Stable JSON bytes."""

    def test_key_order_does_not_matter(self):
        assert encode_document({"b": 1, "a": 2}) == encode_document({"a": 2, "b": 1})

    def test_numpy_values_unwrapped(self):
        doc = decode_document(encode_document({"x": np.float64(0.5), "n": np.int64(3), "v": np.arange(2),
                                               "ok": np.bool_(True), "z": 1 + 2j}))
        assert doc == {"x": 0.5, "n": 3, "v": [0, 1], "ok": True, "z": [1.0, 2.0]}

    def test_nan_becomes_null(self):
        assert decode_document(encode_document({"x": math.nan})) == {"x": None}


class TestRows:
    """CSV lines."""

    def test_float_repr_preserved(self):
        line = encode_row([1, 0.1 + 0.2, "pass"])
        assert decode_rows(line) == [["1", repr(0.1 + 0.2), "pass"]]

    def test_sample_rows_match_columns(self):
        rows = sample_rows(2, 17, [1 + 2j, -0.5 + 0j])
        assert all(len(r) == len(SAMPLE_COLUMNS) for r in rows)
        assert rows[1] == [2, 17, 1, -0.5, 0.0]


class TestSolutionDocument:
    """Equilibrium documents carry grid and field and rebuild the solution."""

    def test_rebuilds_robin_constant(self, circle_problem):
        doc = decode_document(encode_document(
            encode_solution(circle_problem.sol, circle_problem.grid, circle_problem.field)))
        sol, grid, field = decode_solution(doc)
        assert grid.n_nodes == circle_problem.grid.n_nodes
        assert field.beta == 2.0
        assert math.isclose(sol.rho, circle_problem.sol.rho, abs_tol=1e-9)

    def test_missing_key(self, circle_problem):
        doc = encode_solution(circle_problem.sol, circle_problem.grid, circle_problem.field)
        del doc["weights"]
        with pytest.raises(ConfigError):
            decode_solution(doc)
