"""Confining potentials Q and the weight exponent R = 2Q/beta."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Any, Callable, Optional

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.interpolate import LinearNDInterpolator
from scipy.spatial import cKDTree

from .errors import ConfigError, DimensionMismatchError

logger = logging.getLogger(__name__)

FIELD_KINDS = ("polynomial", "radial", "radial_function", "tabulated")

RadialFunc = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class FieldSpec:
    """External field Q at inverse temperature beta.

    kind:
      polynomial       Q(z) = sum c_k x^k with x = Re z
      radial           Q(z) = sum c_k r^k with r = |z|
      radial_function  Q(z) = func(|z|)
      tabulated        Q given at table nodes, linear interpolation off the table
    scale multiplies Q; it carries the rescaled potentials nQ/(n-1).
    """

    beta: float
    kind: str
    coefficients: tuple[float, ...] = ()
    func: Optional[RadialFunc] = None
    derivative: Optional[RadialFunc] = None
    table_nodes: Optional[np.ndarray] = None
    table_values: Optional[np.ndarray] = None
    scale: float = 1.0
    superlog_margin_b: Optional[float] = None
    tag: str = ""

    def __post_init__(self) -> None:
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ConfigError(f"beta must be positive, got {self.beta}")
        if self.kind not in FIELD_KINDS:
            raise ConfigError(f"unknown field kind: {self.kind}")
        if self.kind in ("polynomial", "radial") and not self.coefficients:
            raise ConfigError(f"{self.kind} field needs coefficients")
        if self.kind == "radial_function" and self.func is None:
            raise ConfigError("radial_function field needs func")
        if self.kind == "tabulated":
            if self.table_nodes is None or self.table_values is None:
                raise ConfigError("tabulated field needs table_nodes and table_values")
            if np.shape(self.table_nodes) != np.shape(self.table_values):
                raise DimensionMismatchError("table_nodes and table_values differ in shape")
        if self.superlog_margin_b is not None and not self.superlog_margin_b > 0:
            raise ConfigError("superlog_margin_b must be positive")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ConfigError(f"scale must be positive, got {self.scale}")

    @classmethod
    def polynomial(cls, coefficients, beta: float, b: Optional[float] = None, tag: str = "") -> "FieldSpec":
        return cls(beta=float(beta), kind="polynomial", coefficients=tuple(float(c) for c in coefficients),
                   superlog_margin_b=b, tag=tag or f"poly{list(coefficients)}")

    @classmethod
    def radial(cls, coefficients, beta: float, b: Optional[float] = None, tag: str = "") -> "FieldSpec":
        return cls(beta=float(beta), kind="radial", coefficients=tuple(float(c) for c in coefficients),
                   superlog_margin_b=b, tag=tag or f"radial{list(coefficients)}")

    @classmethod
    def radial_function(cls, func: RadialFunc, beta: float, derivative: Optional[RadialFunc] = None,
                        b: Optional[float] = None, tag: str = "") -> "FieldSpec":
        return cls(beta=float(beta), kind="radial_function", func=func, derivative=derivative,
                   superlog_margin_b=b, tag=tag or "radial_function")

    @classmethod
    def tabulated(cls, nodes, values, beta: float, tag: str = "") -> "FieldSpec":
        nodes = np.asarray(nodes, dtype=complex).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if not np.all(np.isfinite(values)):
            raise ConfigError("tabulated field values must be finite")
        return cls(beta=float(beta), kind="tabulated", table_nodes=nodes, table_values=values,
                   tag=tag or "tabulated")

    @classmethod
    def from_exponent(cls, kind: str, r_coefficients, beta: float, b: Optional[float] = None) -> "FieldSpec":
        """Build Q from the coefficients of R = 2Q/beta."""
        q_coeffs = [0.5 * beta * c for c in r_coefficients]
        if kind == "polynomial":
            return cls.polynomial(q_coeffs, beta, b=b)
        if kind == "radial":
            return cls.radial(q_coeffs, beta, b=b)
        raise ConfigError(f"from_exponent supports polynomial and radial kinds, got {kind}")

    def scaled(self, factor: float) -> "FieldSpec":
        """Field with Q replaced by factor * Q (beta unchanged)."""
        return replace(self, scale=self.scale * float(factor))

    def with_beta(self, beta: float) -> "FieldSpec":
        return replace(self, beta=float(beta))

    @property
    def is_radial(self) -> bool:
        return self.kind in ("radial", "radial_function")

    @property
    def b(self) -> float:
        return self.superlog_margin_b if self.superlog_margin_b is not None else 1.0

    @cached_property
    def _table_is_real(self) -> bool:
        return bool(np.all(np.abs(np.imag(self.table_nodes)) < 1e-14))

    @cached_property
    def _table_interp(self):
        nodes = self.table_nodes
        if self._table_is_real:
            order = np.argsort(nodes.real)
            return nodes.real[order], self.table_values[order]
        pts = np.column_stack([nodes.real, nodes.imag])
        return LinearNDInterpolator(pts, self.table_values), cKDTree(pts)

    def _q_unscaled(self, z: np.ndarray) -> np.ndarray:
        if self.kind == "polynomial":
            return npoly.polyval(np.real(z), self.coefficients)
        if self.kind == "radial":
            return npoly.polyval(np.abs(z), self.coefficients)
        if self.kind == "radial_function":
            return np.asarray(self.func(np.abs(z)), dtype=float)
        if self._table_is_real:
            xs, vals = self._table_interp
            return np.interp(np.real(z), xs, vals)
        interp, tree = self._table_interp
        pts = np.column_stack([np.real(z).ravel(), np.imag(z).ravel()])
        out = np.asarray(interp(pts), dtype=float)
        missing = ~np.isfinite(out)
        if missing.any():
            _, idx = tree.query(pts[missing])
            out[missing] = self.table_values[idx]
        return out.reshape(np.shape(z))

    def q(self, z) -> np.ndarray:
        """Q evaluated at complex points z."""
        z = np.asarray(z, dtype=complex)
        return self.scale * self._q_unscaled(z)

    def r(self, z) -> np.ndarray:
        """Weight exponent R(z) = 2 Q(z) / beta."""
        return (2.0 / self.beta) * self.q(z)

    def radial_r(self, t) -> np.ndarray:
        """R along |z| = t, taking the smaller value over the two real directions for polynomial fields."""
        t = np.asarray(t, dtype=float)
        if self.kind == "polynomial":
            return np.minimum(self.r(t + 0j), self.r(-t + 0j))
        if self.is_radial:
            return self.r(t + 0j)
        raise ConfigError("growth along rays is not defined for tabulated fields")

    def radial_r_prime(self, t) -> np.ndarray:
        """dR/dt for radial fields."""
        if not self.is_radial:
            raise ConfigError("radial derivative requires a radial field")
        t = np.asarray(t, dtype=float)
        factor = 2.0 * self.scale / self.beta
        if self.kind == "radial":
            return factor * npoly.polyval(t, npoly.polyder(self.coefficients))
        if self.derivative is not None:
            return factor * np.asarray(self.derivative(t), dtype=float)
        step = 1e-6 * np.maximum(t, 1.0)
        return factor * (np.asarray(self.func(t + step)) - np.asarray(self.func(np.maximum(t - step, 0.0)))) / (
            t + step - np.maximum(t - step, 0.0))

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "radial_function":
            raise ConfigError("radial_function fields cannot be serialized")
        out: dict[str, Any] = {"beta": self.beta, "kind": self.kind, "scale": self.scale, "tag": self.tag}
        if self.coefficients:
            out["coefficients"] = list(self.coefficients)
        if self.superlog_margin_b is not None:
            out["superlog_margin_b"] = self.superlog_margin_b
        if self.kind == "tabulated":
            out["table_nodes"] = [[float(z.real), float(z.imag)] for z in self.table_nodes]
            out["table_values"] = [float(v) for v in self.table_values]
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FieldSpec":
        known = {"beta", "kind", "coefficients", "scale", "tag", "superlog_margin_b", "table_nodes", "table_values"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown field keys: {sorted(unknown)}")
        if "beta" not in data or "kind" not in data:
            raise ConfigError("field needs beta and kind")
        kind = data["kind"]
        if kind == "tabulated":
            nodes = [complex(x, y) for x, y in data.get("table_nodes", [])]
            spec = cls.tabulated(nodes, data.get("table_values", []), data["beta"], tag=data.get("tag", ""))
        else:
            spec = cls(beta=float(data["beta"]), kind=kind,
                       coefficients=tuple(float(c) for c in data.get("coefficients", ())),
                       superlog_margin_b=data.get("superlog_margin_b"), tag=data.get("tag", ""))
        return replace(spec, scale=float(data.get("scale", 1.0)))
