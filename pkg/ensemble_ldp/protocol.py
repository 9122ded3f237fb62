"""JSON documents and CSV rows for run outputs."""

import csv
import io
import json
import math
from typing import Any, Iterable, Sequence

import numpy as np

from .domains import DomainGrid
from .errors import ConfigError
from .fields import FieldSpec
from .potential import DiscreteMeasure, EquilibriumSolution, solution_from_measure

SAMPLE_COLUMNS = ("chain_id", "sweep", "coordinate_index", "x", "y")
PSI_COLUMNS = ("n", "event", "psi_hat", "ci_low", "ci_high", "method", "stderr", "hits", "samples")
PARTITION_COLUMNS = ("n", "beta", "method", "log_value", "error")
RATIO_COLUMNS = ("n", "log_h_over_n", "minus_rho_beta", "error")
BM_COLUMNS = ("n", "M_n", "M_n_root")
TAIL_COLUMNS = ("n", "ratio_out", "fit_slope")


def _plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as null."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, complex):
        return [value.real, value.imag]
    return value


def encode_document(doc: dict) -> bytes:
    """Encode a document as sorted, indented JSON (stable bytes for equal content)."""
    return (json.dumps(_plain(doc), sort_keys=True, indent=2, allow_nan=False) + "\n").encode("utf-8")


def decode_document(data: bytes) -> dict:
    """Decode a JSON document."""
    return json.loads(data.decode("utf-8"))


def encode_row(values: Sequence[Any]) -> str:
    """One CSV line; floats in repr form."""
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow(
        [repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in values])
    return buf.getvalue()


def decode_rows(text: str) -> list[list[str]]:
    return list(csv.reader(io.StringIO(text)))


def sample_rows(chain_id: int, sweep: int, points: Iterable[complex]) -> list[list]:
    """CSV rows (chain_id, sweep, coordinate_index, x, y) for one recorded configuration."""
    return [[chain_id, sweep, i, float(z.real), float(z.imag)] for i, z in enumerate(points)]


def encode_solution(sol: EquilibriumSolution, grid: DomainGrid, field: FieldSpec) -> dict:
    """Equilibrium solution document carrying its grid and field."""
    doc = sol.to_dict()
    doc["grid"] = grid.to_dict()
    doc["field"] = field.to_dict()
    return doc


def decode_solution(doc: dict) -> tuple[EquilibriumSolution, DomainGrid, FieldSpec]:
    """Rebuild grid, field and solution (potential data recomputed from the weights)."""
    for key in ("nodes", "weights", "rho", "kkt_residual", "support_SR", "support_SRstar", "grid", "field"):
        if key not in doc:
            raise ConfigError(f"solution document lacks {key!r}")
    grid = DomainGrid.from_dict(doc["grid"])
    field = FieldSpec.from_dict(doc["field"])
    nodes = np.array([complex(x, y) for x, y in doc["nodes"]])
    if nodes.size != grid.n_nodes or not np.allclose(nodes, grid.nodes, rtol=0.0, atol=1e-12):
        raise ConfigError("solution nodes do not match the rebuilt grid")
    sol = solution_from_measure(grid, field, DiscreteMeasure.normalized(doc["weights"]),
                                iterations=int(doc.get("iterations", 0)), converged=bool(doc.get("converged", False)))
    return sol, grid, field
