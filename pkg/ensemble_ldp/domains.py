"""Domain catalogue (intervals, circle, disc, annulus, rectangle) and their discretizations."""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Any, Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import BracketError, ConfigError, DimensionMismatchError
from .fields import FieldSpec

logger = logging.getLogger(__name__)

# Mean of log|x - y| over two uniform points of a unit segment / unit square.
SEGMENT_SELF_LOG = -1.5
SQUARE_SELF_LOG = (math.log(2.0) + math.pi) / 3.0 - 25.0 / 12.0

_ON_CURVE_TOL = 1e-9


class Domain(ABC):
    """A closed set Y (or a query window W) in the complex plane."""

    kind: str = ""
    dimension: int = 2

    @abstractmethod
    def contains(self, z) -> np.ndarray: ...

    @abstractmethod
    def bounding_box(self) -> tuple[float, float, float, float]: ...

    @abstractmethod
    def cells(self, resolution: int) -> tuple[np.ndarray, np.ndarray, float]:
        """Cell centres, cell measures and cell size at the given resolution."""

    @abstractmethod
    def propose(self, z: complex, scale: float, rng: np.random.Generator) -> complex:
        """Symmetric random-walk proposal around z."""

    @abstractmethod
    def sample(self, k: int, rng: np.random.Generator) -> np.ndarray: ...

    @abstractmethod
    def to_dict(self) -> dict[str, Any]: ...

    @property
    def diameter(self) -> float:
        x0, x1, y0, y1 = self.bounding_box()
        return math.hypot(x1 - x0, y1 - y0)

    def self_log(self, cell_size: float) -> float:
        """Mean log-distance between two points of one cell."""
        base = SEGMENT_SELF_LOG if self.dimension == 1 else SQUARE_SELF_LOG
        return math.log(cell_size) + base

    def within_box_of(self, other: "Domain", slack: float = 1e-9) -> bool:
        a = self.bounding_box()
        b = other.bounding_box()
        return a[0] >= b[0] - slack and a[1] <= b[1] + slack and a[2] >= b[2] - slack and a[3] <= b[3] + slack

    def probes(self, k: int) -> np.ndarray:
        """Deterministic well-spread points of the set (for minima over a window)."""
        return self.sample(k, np.random.default_rng(12345))


class IntervalUnion(Domain):
    """Finite union of closed real intervals."""

    kind = "intervals"
    dimension = 1

    def __init__(self, intervals):
        ivs = sorted((float(a), float(b)) for a, b in intervals)
        if not ivs:
            raise ConfigError("interval union needs at least one interval")
        for a, b in ivs:
            if not b > a:
                raise ConfigError(f"degenerate interval [{a}, {b}]")
        for (_, b0), (a1, _) in zip(ivs, ivs[1:]):
            if a1 < b0:
                raise ConfigError("intervals must not overlap")
        self.intervals: tuple[tuple[float, float], ...] = tuple(ivs)

    @property
    def length(self) -> float:
        return sum(b - a for a, b in self.intervals)

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        x = z.real
        inside = np.zeros(z.shape, dtype=bool)
        for a, b in self.intervals:
            inside |= (x >= a) & (x <= b)
        return inside & (np.abs(z.imag) <= _ON_CURVE_TOL)

    def bounding_box(self):
        return self.intervals[0][0], self.intervals[-1][1], 0.0, 0.0

    def cells(self, resolution: int):
        total = self.length
        centres, sizes = [], []
        for a, b in self.intervals:
            m = max(1, int(round(resolution * (b - a) / total)))
            h = (b - a) / m
            centres.append(a + h * (np.arange(m) + 0.5))
            sizes.append(np.full(m, h))
        sizes_arr = np.concatenate(sizes)
        return np.concatenate(centres).astype(complex), sizes_arr, float(sizes_arr.max())

    def propose(self, z, scale, rng):
        return complex(z.real + scale * rng.standard_normal(), 0.0)

    def sample(self, k, rng):
        lengths = np.array([b - a for a, b in self.intervals])
        which = rng.choice(len(self.intervals), size=k, p=lengths / lengths.sum())
        lo = np.array([self.intervals[i][0] for i in which])
        return (lo + rng.random(k) * lengths[which]).astype(complex)

    def probes(self, k):
        lengths = np.array([b - a for a, b in self.intervals])
        out = []
        for (a, b), length in zip(self.intervals, lengths):
            m = max(2, int(round(k * length / lengths.sum())))
            out.append(np.linspace(a, b, m))
        return np.concatenate(out).astype(complex)

    def to_dict(self):
        return {"kind": self.kind, "intervals": [list(iv) for iv in self.intervals]}


class Circle(Domain):
    """Circle |z - center| = radius with arc-length measure."""

    kind = "circle"
    dimension = 1

    def __init__(self, radius: float = 1.0, center: complex = 0j):
        if not radius > 0:
            raise ConfigError("circle radius must be positive")
        self.radius = float(radius)
        self.center = complex(center)

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        return np.abs(np.abs(z - self.center) - self.radius) <= _ON_CURVE_TOL * max(1.0, self.radius)

    def bounding_box(self):
        c, r = self.center, self.radius
        return c.real - r, c.real + r, c.imag - r, c.imag + r

    def cells(self, resolution):
        theta = 2.0 * np.pi * (np.arange(resolution) + 0.5) / resolution
        h = 2.0 * np.pi * self.radius / resolution
        return self.center + self.radius * np.exp(1j * theta), np.full(resolution, h), h

    def propose(self, z, scale, rng):
        angle = np.angle(z - self.center) + (scale / self.radius) * rng.standard_normal()
        return self.center + self.radius * complex(math.cos(angle), math.sin(angle))

    def sample(self, k, rng):
        return self.center + self.radius * np.exp(2j * np.pi * rng.random(k))

    def probes(self, k):
        return self.center + self.radius * np.exp(2j * np.pi * np.arange(k) / k)

    def to_dict(self):
        return {"kind": self.kind, "radius": self.radius, "center": [self.center.real, self.center.imag]}


class _PlanarDomain(Domain):
    dimension = 2

    def cells(self, resolution):
        x0, x1, y0, y1 = self.bounding_box()
        h = max(x1 - x0, y1 - y0) / resolution
        nx = max(1, int(round((x1 - x0) / h)))
        ny = max(1, int(round((y1 - y0) / h)))
        xs = x0 + (x1 - x0) / nx * (np.arange(nx) + 0.5)
        ys = y0 + (y1 - y0) / ny * (np.arange(ny) + 0.5)
        hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
        gx, gy = np.meshgrid(xs, ys, indexing="xy")
        pts = (gx + 1j * gy).ravel()
        pts = pts[self.contains(pts)]
        return pts, np.full(pts.size, hx * hy), math.sqrt(hx * hy)

    def propose(self, z, scale, rng):
        step = rng.standard_normal(2)
        return complex(z.real + scale * step[0], z.imag + scale * step[1])

    def sample(self, k, rng):
        x0, x1, y0, y1 = self.bounding_box()
        out = np.empty(0, dtype=complex)
        while out.size < k:
            trial = (x0 + (x1 - x0) * rng.random(2 * k)) + 1j * (y0 + (y1 - y0) * rng.random(2 * k))
            out = np.concatenate([out, trial[self.contains(trial)]])
        return out[:k]


class Disc(_PlanarDomain):
    kind = "disc"

    def __init__(self, radius: float, center: complex = 0j):
        if not radius > 0:
            raise ConfigError("disc radius must be positive")
        self.radius = float(radius)
        self.center = complex(center)

    def contains(self, z):
        return np.abs(np.asarray(z, dtype=complex) - self.center) <= self.radius

    def bounding_box(self):
        c, r = self.center, self.radius
        return c.real - r, c.real + r, c.imag - r, c.imag + r

    def to_dict(self):
        return {"kind": self.kind, "radius": self.radius, "center": [self.center.real, self.center.imag]}


class Annulus(_PlanarDomain):
    kind = "annulus"

    def __init__(self, inner: float, outer: float, center: complex = 0j):
        if not 0 <= inner < outer:
            raise ConfigError("annulus needs 0 <= inner < outer")
        self.inner = float(inner)
        self.outer = float(outer)
        self.center = complex(center)

    def contains(self, z):
        r = np.abs(np.asarray(z, dtype=complex) - self.center)
        return (r >= self.inner) & (r <= self.outer)

    def bounding_box(self):
        c, r = self.center, self.outer
        return c.real - r, c.real + r, c.imag - r, c.imag + r

    def probes(self, k):
        m = max(4, int(math.sqrt(k)))
        radii = np.linspace(self.inner, self.outer, m)
        angles = 2.0 * np.pi * np.arange(m) / m
        return (self.center + radii[:, None] * np.exp(1j * angles)[None, :]).ravel()

    def to_dict(self):
        return {"kind": self.kind, "inner": self.inner, "outer": self.outer,
                "center": [self.center.real, self.center.imag]}


class Rectangle(_PlanarDomain):
    kind = "rectangle"

    def __init__(self, xmin: float, xmax: float, ymin: float, ymax: float):
        if not (xmax > xmin and ymax > ymin):
            raise ConfigError("degenerate rectangle")
        self.box = (float(xmin), float(xmax), float(ymin), float(ymax))

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        x0, x1, y0, y1 = self.box
        return (z.real >= x0) & (z.real <= x1) & (z.imag >= y0) & (z.imag <= y1)

    def bounding_box(self):
        return self.box

    def to_dict(self):
        x0, x1, y0, y1 = self.box
        return {"kind": self.kind, "xmin": x0, "xmax": x1, "ymin": y0, "ymax": y1}


def domain_from_dict(data: dict[str, Any]) -> Domain:
    """Parse a domain/window block; unknown keys are rejected."""
    kind = data.get("kind")
    allowed = {
        "intervals": {"kind", "intervals"},
        "circle": {"kind", "radius", "center"},
        "disc": {"kind", "radius", "center"},
        "annulus": {"kind", "inner", "outer", "center"},
        "rectangle": {"kind", "xmin", "xmax", "ymin", "ymax"},
    }
    if kind not in allowed:
        raise ConfigError(f"unknown domain kind: {kind}")
    unknown = set(data) - allowed[kind]
    if unknown:
        raise ConfigError(f"unknown keys for {kind}: {sorted(unknown)}")
    center = complex(*data.get("center", (0.0, 0.0)))
    if kind == "intervals":
        return IntervalUnion(data["intervals"])
    if kind == "circle":
        return Circle(data.get("radius", 1.0), center)
    if kind == "disc":
        return Disc(data["radius"], center)
    if kind == "annulus":
        return Annulus(data["inner"], data["outer"], center)
    return Rectangle(data["xmin"], data["xmax"], data["ymin"], data["ymax"])


@dataclass(frozen=True, eq=False)
class DomainGrid:
    """Discretization of Y: nodes, tau-cell masses and diagonal desingularization constants."""

    geometry: Domain
    nodes: np.ndarray
    tau_mass: np.ndarray
    diag_desing: np.ndarray
    cell_volume: np.ndarray
    cell_size: float
    resolution: int = 0
    tau_scale: float = 1.0
    truncation_radius: Optional[float] = None
    unbounded: bool = False

    def __post_init__(self) -> None:
        n = self.nodes.shape[0]
        if self.tau_mass.shape != (n,) or self.diag_desing.shape != (n,) or self.cell_volume.shape != (n,):
            raise DimensionMismatchError("grid arrays must share the node count")
        if np.any(self.tau_mass < 0) or not np.any(self.tau_mass > 0):
            raise ConfigError("tau masses must be nonnegative with at least one positive")
        if np.any(self.diag_desing <= 0):
            raise ConfigError("diagonal desingularization constants must be positive")
        if np.unique(self.nodes).size != n:
            raise ConfigError("grid nodes must be pairwise distinct")
        if self.unbounded and not (self.truncation_radius and self.truncation_radius > 0):
            raise ConfigError("unbounded grids need a positive truncation radius")

    @classmethod
    def build(cls, geometry: Domain, resolution: int, tau_scale: float = 1.0,
              truncation_radius: Optional[float] = None, unbounded: bool = False) -> "DomainGrid":
        """Uniform discretization with Lebesgue (or arc-length) tau scaled by tau_scale."""
        nodes, volume, h = geometry.cells(int(resolution))
        if nodes.size == 0:
            raise ConfigError(f"resolution {resolution} leaves no nodes in {geometry.kind}")
        desing = np.full(nodes.size, 2.0 * math.exp(geometry.self_log(h)))
        return cls(geometry=geometry, nodes=nodes, tau_mass=tau_scale * volume, diag_desing=desing,
                   cell_volume=volume, cell_size=h, resolution=int(resolution), tau_scale=float(tau_scale),
                   truncation_radius=truncation_radius, unbounded=unbounded)

    @classmethod
    def discrete(cls, points, masses=None, geometry: Optional[Domain] = None) -> "DomainGrid":
        """Grid carrying a finite sum of Dirac masses at the given points."""
        pts = np.asarray(points, dtype=complex).ravel()
        masses = np.ones(pts.size) if masses is None else np.asarray(masses, dtype=float)
        if geometry is None:
            xs = np.sort(pts.real)
            pad = 0.5 * (np.min(np.diff(xs)) if xs.size > 1 else 1.0)
            if np.any(np.abs(pts.imag) > 0):
                geometry = Rectangle(xs[0] - pad, xs[-1] + pad, pts.imag.min() - pad, pts.imag.max() + pad)
            else:
                geometry = IntervalUnion([(xs[0] - pad, xs[-1] + pad)])
        spacing = np.min(np.abs(pts[:, None] - pts[None, :]) + np.eye(pts.size) * np.inf) if pts.size > 1 else 1.0
        return cls(geometry=geometry, nodes=pts, tau_mass=masses, diag_desing=np.full(pts.size, spacing),
                   cell_volume=np.ones(pts.size), cell_size=float(spacing), resolution=pts.size)

    @property
    def kind(self) -> str:
        return self.geometry.kind

    @property
    def dimension(self) -> int:
        return self.geometry.dimension

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.size)

    @property
    def eligible(self) -> np.ndarray:
        return self.tau_mass > 0

    @property
    def diameter(self) -> float:
        return self.geometry.diameter

    def refined(self, factor: int = 2) -> "DomainGrid":
        return DomainGrid.build(self.geometry, self.resolution * factor, self.tau_scale,
                                self.truncation_radius, self.unbounded)

    def with_tau_scale(self, c: float) -> "DomainGrid":
        """Same grid with every tau mass multiplied by c."""
        if not c > 0:
            raise ConfigError("tau scale must be positive")
        return replace(self, tau_mass=self.tau_mass * c, tau_scale=self.tau_scale * c)

    @cached_property
    def _tree(self) -> cKDTree:
        return cKDTree(np.column_stack([self.nodes.real, self.nodes.imag]))

    @cached_property
    def _log_density(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.tau_mass / self.cell_volume)

    @cached_property
    def tau_is_uniform(self) -> bool:
        """tau has one constant positive density over every cell."""
        return bool(np.all(self.eligible) and np.ptp(self._log_density) < 1e-12)

    def nearest(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        _, idx = self._tree.query(np.column_stack([z.real, z.imag]))
        return idx

    def log_tau_density(self, z) -> np.ndarray:
        """log of the tau density at z, read from the nearest cell."""
        return self._log_density[self.nearest(z)]

    def contains(self, z) -> np.ndarray:
        return self.geometry.contains(z)

    def dilate(self, indices, cells: float) -> np.ndarray:
        """Indices of nodes within `cells` cell sizes of the given node set."""
        indices = np.asarray(sorted(set(int(i) for i in indices)), dtype=int)
        if indices.size == 0:
            return indices
        radius = cells * self.cell_size * (1.0 + 1e-9)
        pts = np.column_stack([self.nodes.real[indices], self.nodes.imag[indices]])
        hits = self._tree.query_ball_point(pts, r=radius)
        return np.unique(np.concatenate([np.asarray(h, dtype=int) for h in hits] + [indices]))

    def boundary_layer(self, indices) -> np.ndarray:
        """Members of the node set having a neighbouring node outside it."""
        members = np.zeros(self.n_nodes, dtype=bool)
        members[np.asarray(list(indices), dtype=int)] = True
        radius = 1.5 * self.cell_size
        out = []
        for i in np.flatnonzero(members):
            nbrs = self._tree.query_ball_point([self.nodes[i].real, self.nodes[i].imag], r=radius)
            if not all(members[j] for j in nbrs) or len(nbrs) < (3 if self.dimension == 1 else 9):
                out.append(i)
        return np.asarray(out, dtype=int)

    def to_dict(self) -> dict[str, Any]:
        return {
            "geometry": self.geometry.to_dict(),
            "resolution": self.resolution,
            "tau_scale": self.tau_scale,
            "truncation_radius": self.truncation_radius,
            "unbounded": self.unbounded,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DomainGrid":
        unknown = set(data) - {"geometry", "resolution", "tau_scale", "truncation_radius", "unbounded"}
        if unknown:
            raise ConfigError(f"unknown grid keys: {sorted(unknown)}")
        return cls.build(domain_from_dict(data["geometry"]), int(data["resolution"]),
                         float(data.get("tau_scale", 1.0)), data.get("truncation_radius"),
                         bool(data.get("unbounded", False)))


def truncation_radius(field: FieldSpec, b: Optional[float] = None, lift: float = 10.0,
                      r_max: float = 1e6) -> float:
    """Smallest r with R(r) - (1+b) log r >= min R + lift."""
    b = field.b if b is None else b
    probe = np.geomspace(1e-3, r_max, 4000)
    growth = field.radial_r(probe)
    r_min = float(np.min(np.concatenate([growth, field.radial_r(np.zeros(1))])))
    excess = growth - (1.0 + b) * np.log(probe) - (r_min + lift)
    ok = np.flatnonzero((excess >= 0) & (probe >= 1.0))
    if ok.size == 0:
        raise BracketError("no truncation radius below r_max; R is not superlogarithmic on the probe range")
    k = ok[0]
    lo = probe[k - 1] if k > 0 else probe[k]
    hi = probe[k]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        val = field.radial_r(np.array([mid]))[0] - (1.0 + b) * math.log(mid) - (r_min + lift)
        if val >= 0:
            hi = mid
        else:
            lo = mid
    logger.debug("truncation radius %.6g for field %s", hi, field.tag)
    return float(max(hi, 1.0))


def truncated_grid(kind: str, field: FieldSpec, resolution: int, b: Optional[float] = None) -> DomainGrid:
    """Grid of the unbounded set (real line or plane) cut at the truncation radius."""
    radius = truncation_radius(field, b)
    if kind == "real_line":
        geometry: Domain = IntervalUnion([(-radius, radius)])
    elif kind == "plane":
        geometry = Disc(radius)
    else:
        raise ConfigError(f"unknown unbounded domain: {kind}")
    return DomainGrid.build(geometry, resolution, truncation_radius=radius, unbounded=True)
