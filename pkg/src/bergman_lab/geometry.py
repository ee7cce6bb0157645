"""Dyadic Carleson geometry of the upper half-plane.

Two adjacent dyadic systems, Carleson boxes, the weighted area measure
dA_alpha, the Bergman distance and the truncated Whitney mesh that carries
every discretized object in the package.

Conventions
-----------
* ``D1`` intervals are ``[j 2^k, (j+1) 2^k)``.  ``D2`` intervals are the
  ``D1`` intervals of the same level translated by ``(-1)^k 2^k / 3``.
* ``Q_I = I x (0, |I|)``, ``Q_I^up = I x [|I|/2, |I|)``.  Heights are
  half-open so that the upper boxes of one system tile the half-plane.
* Box membership on a mesh is decided by the cell node: cell ``c`` belongs
  to ``Q_I`` when its centre lies in ``Q_I``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

SYSTEMS = ("D1", "D2")


class GeometryError(ValueError):
    """Invalid parameter or a point outside the domain of an operation."""


@dataclass(frozen=True)
class GlobalConfig:
    """Scale range, truncation and the fixed constants of the construction."""

    alpha: float = 0.0
    k_min: int = -5
    k_max: int = 3
    x_extent: float = 8.0
    inflation_factor: float = 1.1
    frak_A: int = 8
    bergman_radius: float = 1.0

    def __post_init__(self):
        if not self.alpha > -1:
            raise GeometryError(f"alpha must exceed -1, got {self.alpha}")
        if not self.k_min < self.k_max:
            raise GeometryError("k_min must be smaller than k_max")
        if not 1 < self.inflation_factor < 2:
            raise GeometryError("inflation_factor must lie in (1, 2)")
        if self.frak_A < 4:
            raise GeometryError("frak_A must be at least 4")
        if not self.x_extent > 0 or not self.bergman_radius > 0:
            raise GeometryError("x_extent and bergman_radius must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "GlobalConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)

    def with_(self, **kw) -> "GlobalConfig":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return GlobalConfig(**d)


def system_shift(system: str, level: int) -> float:
    """Horizontal offset of the level-``level`` grid of ``system``."""
    if system == "D1":
        return 0.0
    if system == "D2":
        return (-1) ** (level % 2) * 2.0**level / 3.0
    raise GeometryError(f"unknown dyadic system {system!r}")


@dataclass(frozen=True, order=True)
class DyadicInterval:
    system: str
    level: int
    index: int

    @property
    def length(self) -> float:
        return 2.0**self.level

    @property
    def x0(self) -> float:
        return self.index * self.length + system_shift(self.system, self.level)

    @property
    def x1(self) -> float:
        return self.x0 + self.length

    @property
    def center(self) -> float:
        return self.x0 + 0.5 * self.length

    def children(self) -> tuple["DyadicInterval", "DyadicInterval"]:
        m = self.index_at(self.level - 1, self.x0)
        return (DyadicInterval(self.system, self.level - 1, m),
                DyadicInterval(self.system, self.level - 1, m + 1))

    def parent(self) -> "DyadicInterval":
        return DyadicInterval(self.system, self.level + 1,
                              self.index_at(self.level + 1, self.center))

    def index_at(self, level: int, x: float) -> int:
        """Index of the interval of this system at ``level`` containing ``x``."""
        return int(math.floor((x - system_shift(self.system, level)) / 2.0**level))

    def contains(self, x: float) -> bool:
        return self.x0 <= x < self.x1

    def to_dict(self) -> dict:
        return {"system": self.system, "level": self.level, "index": self.index,
                "x0": self.x0, "x1": self.x1}


def interval_at(system: str, level: int, x: float) -> DyadicInterval:
    j = int(math.floor((x - system_shift(system, level)) / 2.0**level))
    return DyadicInterval(system, level, j)


@dataclass(frozen=True)
class CarlesonBox:
    """An axis-parallel box over ``[x0, x1)``.

    ``kind`` is ``"full"`` (heights ``(0, h)``), ``"upper"`` (``[h/2, h)``) or
    ``"inflated"`` (the base expanded about its centre by ``inflation``, heights
    ``(0, h)``), where ``h = x1 - x0`` is the length of the base interval.
    """

    x0: float
    x1: float
    kind: str = "full"
    interval: DyadicInterval | None = None
    inflation: float = 1.1

    @classmethod
    def of(cls, I: DyadicInterval, kind: str = "full", inflation: float = 1.1):
        return cls(I.x0, I.x1, kind, I, inflation)

    @property
    def side(self) -> float:
        return self.x1 - self.x0

    @property
    def xrange(self) -> tuple[float, float]:
        if self.kind == "inflated":
            c, half = 0.5 * (self.x0 + self.x1), 0.5 * self.inflation * self.side
            return c - half, c + half
        return self.x0, self.x1

    @property
    def yrange(self) -> tuple[float, float]:
        h = self.side
        return (0.5 * h, h) if self.kind == "upper" else (0.0, h)

    @property
    def center(self) -> complex:
        """Euclidean centre of the square ``Q_I``."""
        return complex(0.5 * (self.x0 + self.x1), 0.5 * self.side)

    def contains(self, z) -> np.ndarray:
        z = np.asarray(z)
        a, b = self.xrange
        y0, y1 = self.yrange
        y = z.imag
        lower = (y >= y0) if self.kind == "upper" else (y > y0)
        return (z.real >= a) & (z.real < b) & lower & (y < y1)


def measure_A_alpha(box: CarlesonBox, alpha: float) -> float:
    """Exact ``dA_alpha`` measure of a box."""
    if not alpha > -1:
        raise GeometryError(f"alpha must exceed -1, got {alpha}")
    a, b = box.xrange
    y0, y1 = box.yrange
    return rect_measure(a, b, y0, y1, alpha)


def rect_measure(x0, x1, y0, y1, alpha: float):
    """``dA_alpha`` measure of ``[x0, x1] x [y0, y1]`` (vectorized)."""
    e = alpha + 1.0
    return (np.asarray(x1) - x0) * 2.0**alpha * (np.asarray(y1) ** e - np.asarray(y0) ** e) / np.pi


def _level_range(system: str, level: int, lo: float, hi: float, contained: bool):
    h = 2.0**level
    s = system_shift(system, level)
    if contained:
        return math.ceil((lo - s) / h - 1e-12), math.floor((hi - s) / h + 1e-12) - 1
    return math.floor((lo - s) / h), math.ceil((hi - s) / h) - 1


def build_systems(cfg: GlobalConfig) -> tuple[list[DyadicInterval], list[DyadicInterval]]:
    """All intervals of both systems in the scale range meeting ``[-X, X]``."""
    out = []
    for system in SYSTEMS:
        ivs = []
        for k in range(cfg.k_min, cfg.k_max + 1):
            j0, j1 = _level_range(system, k, -cfg.x_extent, cfg.x_extent, False)
            for j in range(j0, j1 + 1):
                I = DyadicInterval(system, k, j)
                if I.x1 > -cfg.x_extent and I.x0 < cfg.x_extent:
                    ivs.append(I)
        out.append(ivs)
    return out[0], out[1]


def chain_to_top(z: complex, I: DyadicInterval, k_floor: int | None = None) -> list[DyadicInterval]:
    """Nested chain ``I = I_0 > I_1 > ...`` ending at the interval whose upper box holds ``z``.

    When ``k_floor`` is given the chain stops at that level even if ``z`` lies
    further down (the mesh cell containing ``z`` then plays the last role).
    """
    if not (I.contains(z.real) and 0 < z.imag < I.length):
        raise GeometryError(f"{z} is not in the Carleson box of {I}")
    chain = [I]
    J = I
    while not z.imag >= 0.5 * J.length:
        if k_floor is not None and J.level <= k_floor:
            break
        J = interval_at(J.system, J.level - 1, z.real)
        chain.append(J)
    return chain


def _check_upper(*zs):
    for z in zs:
        if np.any(np.asarray(z).imag <= 0):
            raise GeometryError("points must lie in the open upper half-plane")


def pseudo_hyperbolic(z, w):
    """``|z - w| / |z - conj(w)|``."""
    z, w = np.asarray(z), np.asarray(w)
    return np.abs(z - w) / np.abs(z - np.conj(w))


def bergman_distance(z, w):
    """Bergman distance ``artanh(|z - w| / |z - conj(w)|)``."""
    _check_upper(z, w)
    d = np.arctanh(pseudo_hyperbolic(z, w))
    return float(d) if np.ndim(d) == 0 else d


def bergman_disk_euclidean(z: complex, r: float) -> tuple[complex, float]:
    """Euclidean centre and radius of the Bergman disk ``beta(z, r)``."""
    t = math.tanh(r)
    y = z.imag
    return complex(z.real, y * (1 + t * t) / (1 - t * t)), 2 * t * y / (1 - t * t)


@dataclass
class BoxFamily:
    """Covered Carleson boxes of one dyadic system together with mesh incidence."""

    system: str
    levels: np.ndarray
    indices: np.ndarray
    x0: np.ndarray
    x1: np.ndarray
    exact_measure: np.ndarray
    incidence: sparse.csr_matrix  # boxes x cells, 1 where node in Q_I
    covered_measure: np.ndarray
    ancestors: np.ndarray  # cells x levels, box id or -1

    def __len__(self):
        return len(self.levels)

    @property
    def side(self):
        return self.x1 - self.x0

    @property
    def centers(self):
        return 0.5 * (self.x0 + self.x1) + 0.5j * self.side

    def interval(self, b: int) -> DyadicInterval:
        return DyadicInterval(self.system, int(self.levels[b]), int(self.indices[b]))

    def members(self, b: int) -> np.ndarray:
        E = self.incidence
        return E.indices[E.indptr[b]:E.indptr[b + 1]]

    def box_id(self, I: DyadicInterval) -> int:
        return self._lookup.get((I.level, I.index), -1)

    @cached_property
    def _lookup(self):
        return {(int(l), int(j)): b for b, (l, j) in enumerate(zip(self.levels, self.indices))}

    @cached_property
    def coo(self):
        """Row (box) and column (cell) arrays of the incidence pattern."""
        E = self.incidence.tocoo()
        return E.row, E.col

    def averages(self, f, w) -> np.ndarray:
        """Covered-measure box averages of ``f`` with cell weights ``w``."""
        return (self.incidence @ (np.asarray(f) * w)) / (self.incidence @ w)


class Mesh:
    """Truncated Whitney mesh: upper boxes of one system over all scales.

    Parameters
    ----------
    cfg : GlobalConfig
    system : {"D1", "D2"}
        System whose upper boxes form the cells.
    """

    def __init__(self, cfg: GlobalConfig, system: str = "D1"):
        self.cfg = cfg
        self.system = system
        self.alpha = cfg.alpha
        lv, ix = [], []
        for k in range(cfg.k_min, cfg.k_max + 1):
            j0, j1 = _level_range(system, k, -cfg.x_extent, cfg.x_extent, True)
            n = max(j1 - j0 + 1, 0)
            lv.append(np.full(n, k))
            ix.append(np.arange(j0, j0 + n))
        self.levels = np.concatenate(lv).astype(int)
        self.indices = np.concatenate(ix).astype(int)
        if len(self.levels) == 0:
            raise GeometryError("mesh is empty; enlarge x_extent or k_max")
        h = 2.0**self.levels
        shift = np.array([system_shift(system, k) for k in self.levels])
        self.x0 = self.indices * h + shift
        self.x1 = self.x0 + h
        self.h = h
        self.nodes = 0.5 * (self.x0 + self.x1) + 0.75j * h
        self.quad_weights = self.weights_for(self.alpha)

    def __len__(self):
        return len(self.nodes)

    @property
    def N(self) -> int:
        return len(self.nodes)

    def weights_for(self, alpha: float) -> np.ndarray:
        """Exact ``dA_alpha`` measure of every cell."""
        return rect_measure(self.x0, self.x1, 0.5 * self.h, self.h, alpha)

    def total_measure(self) -> float:
        return float(self.quad_weights.sum())

    def cells(self) -> list[CarlesonBox]:
        return [CarlesonBox.of(DyadicInterval(self.system, int(k), int(j)), "upper",
                               self.cfg.inflation_factor)
                for k, j in zip(self.levels, self.indices)]

    def covers(self, z) -> np.ndarray:
        """Whether points lie in the region tiled by the cells."""
        z = np.asarray(z)
        c = self.cfg
        return ((np.abs(z.real) < c.x_extent) & (z.imag >= 2.0 ** (c.k_min - 1))
                & (z.imag < 2.0**c.k_max))

    def family(self, system: str) -> BoxFamily:
        if system not in self._families:
            self._families[system] = self._build_family(system)
        return self._families[system]

    @cached_property
    def _families(self):
        return {}

    def _build_family(self, system: str) -> BoxFamily:
        c = self.cfg
        lv, ix = [], []
        for k in range(c.k_min, c.k_max + 1):
            j0, j1 = _level_range(system, k, -c.x_extent, c.x_extent, True)
            n = max(j1 - j0 + 1, 0)
            lv.append(np.full(n, k))
            ix.append(np.arange(j0, j0 + n))
        levels = np.concatenate(lv).astype(int)
        indices = np.concatenate(ix).astype(int)
        offsets, first = {}, 0
        for k, arr in zip(range(c.k_min, c.k_max + 1), ix):
            offsets[k] = (first, int(arr[0]) if len(arr) else 0, len(arr))
            first += len(arr)
        L = c.k_max - c.k_min + 1
        anc = -np.ones((self.N, L), dtype=np.int64)
        x = self.nodes.real
        rows, cols = [], []
        for k in range(c.k_min, c.k_max + 1):
            start, j0, n = offsets[k]
            if n == 0:
                continue
            j = np.floor((x - system_shift(system, k)) / 2.0**k).astype(np.int64)
            ok = (self.nodes.imag < 2.0**k) & (j >= j0) & (j < j0 + n)
            b = np.where(ok, start + j - j0, -1)
            anc[:, k - c.k_min] = b
            cells = np.nonzero(ok)[0]
            rows.append(b[cells])
            cols.append(cells)
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        E = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(levels), self.N))
        E.sort_indices()
        h = 2.0**levels
        x0 = indices * h + np.array([system_shift(system, k) for k in levels])
        x1 = x0 + h
        return BoxFamily(system, levels, indices, x0, x1,
                         rect_measure(x0, x1, 0.0, h, self.alpha), E,
                         E @ self.quad_weights, anc)

    def families(self, systems=SYSTEMS) -> list[BoxFamily]:
        return [self.family(s) for s in systems]

    def hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.nodes).tobytes())
        h.update(np.ascontiguousarray(self.quad_weights).tobytes())
        return h.hexdigest()[:16]

    def to_json(self) -> str:
        return json.dumps([{"system": self.system, "level": int(k), "index": int(j),
                            "x0": float(a), "x1": float(b)}
                           for k, j, a, b in zip(self.levels, self.indices, self.x0, self.x1)])


def systems_to_json(d1, d2) -> str:
    ivs = sorted(list(d1) + list(d2), key=lambda I: (I.system, I.level, I.index))
    return json.dumps([I.to_dict() for I in ivs])


def bergman_disk(z: complex, r: float, mesh: Mesh) -> np.ndarray:
    """Indices of cells whose node lies within Bergman distance ``r`` of ``z``.

    An empty array flags a disk outside the mesh coverage.
    """
    if z.imag <= 0:
        raise GeometryError("disk centre must lie in the upper half-plane")
    if r <= 0:
        raise GeometryError("radius must be positive")
    rho = pseudo_hyperbolic(mesh.nodes, z)
    return np.nonzero(rho <= math.tanh(r))[0]


def disk_membership(mesh: Mesh, r: float, rows=None) -> np.ndarray:
    """Boolean matrix: node ``j`` lies in ``beta(node_i, r)`` for ``i`` in ``rows``."""
    z = mesh.nodes if rows is None else mesh.nodes[rows]
    rho = pseudo_hyperbolic(z[:, None], mesh.nodes[None, :])
    return rho <= math.tanh(r)


def interior_nodes(mesh: Mesh, r: float) -> np.ndarray:
    """Cells whose Bergman disk of radius ``r`` lies inside the mesh coverage."""
    z = mesh.nodes
    c, R = bergman_disk_euclidean_arrays(z, r)
    cf = mesh.cfg
    ok = ((c.imag - R >= 2.0 ** (cf.k_min - 1)) & (c.imag + R <= 2.0**cf.k_max)
          & (np.abs(c.real) + R <= cf.x_extent))
    return np.nonzero(ok)[0]


def bergman_disk_euclidean_arrays(z, r: float):
    t = math.tanh(r)
    y = np.asarray(z).imag
    return np.asarray(z).real + 1j * y * (1 + t * t) / (1 - t * t), 2 * t * y / (1 - t * t)


def whitney_radius(mesh: Mesh) -> float:
    """Smallest ``R`` with every upper cell inside ``beta(node, R)``.

    The per-cell value depends only on the cell shape, so it is the same on
    every level; this is checked.
    """
    corners = np.stack([mesh.x0 + 0.5j * mesh.h, mesh.x1 + 0.5j * mesh.h,
                        mesh.x0 + 1j * mesh.h, mesh.x1 + 1j * mesh.h], axis=1)
    per_cell = np.arctanh(pseudo_hyperbolic(mesh.nodes[:, None], corners)).max(axis=1)
    if np.ptp(per_cell) > 1e-12 * per_cell.max():
        raise GeometryError("per-cell Whitney radius is not scale invariant")
    return float(per_cell.max())


def disk_overlap(mesh: Mesh, R: float) -> int:
    """Largest number of disks ``beta(node_I, 2R)`` containing a single node."""
    counts = np.zeros(mesh.N, dtype=int)
    for start in range(0, mesh.N, 1024):
        rows = np.arange(start, min(start + 1024, mesh.N))
        counts += disk_membership(mesh, 2 * R, rows).sum(axis=0)
    return int(counts.max())


def box_rule(x0: float, x1: float, y0: float, y1: float, alpha: float,
             n: int = 8, layers: int = 30):
    """Tensor Gauss rule for ``dA_alpha`` on a rectangle, graded dyadically toward ``y = 0``.

    Returns nodes (complex) and weights summing to the exact measure up to
    the part of the bottom layer below ``y1 2^-layers``.
    """
    gx, gw = np.polynomial.legendre.leggauss(n)
    edges = [y1]
    while len(edges) <= layers and edges[-1] / 2 > y0:
        edges.append(edges[-1] / 2)
    edges.append(y0)
    edges = np.array(edges[::-1])
    xs = 0.5 * (x1 - x0) * (gx + 1) + x0
    wx = 0.5 * (x1 - x0) * gw
    ys, wy = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        ys.append(0.5 * (b - a) * (gx + 1) + a)
        wy.append(0.5 * (b - a) * gw)
    ys = np.concatenate(ys)
    wy = np.concatenate(wy) * (alpha + 1) * (2 * ys) ** alpha / np.pi
    Z = (xs[None, :] + 1j * ys[:, None]).ravel()
    W = (wy[:, None] * wx[None, :]).ravel()
    return Z, W
