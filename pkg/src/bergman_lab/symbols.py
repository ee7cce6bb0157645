"""Symbols and oscillation norms.

Box functionals use mesh cell sums over the cells whose node lies in the
box, with averages taken over the covered part of the box.  Bergman-disk
functionals use the cells whose node lies in the disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import geometry as geo
from .geometry import SYSTEMS, CarlesonBox, DyadicInterval, Mesh
from .weights import Weight, constant as constant_weight


class SymbolError(ValueError):
    pass


class BDAConditioningError(SymbolError):
    """Raised when a disk has too few cells for the requested fit degree."""


class Symbol:
    """Complex function on the upper half-plane.

    Parameters
    ----------
    evaluator : callable
        Vectorized complex -> complex map.
    name : str
    holomorphic : bool
    derivative : callable, optional
    expected : str
        Documented class membership (``"VMO"``, ``"BMO"``, ``"BO"``, ``"BA"``,
        ``"BMO2"``, ``"unbounded"``, ``"constant"``).
    """

    def __init__(self, evaluator: Callable, name: str, holomorphic: bool = False,
                 derivative: Callable | None = None, expected: str = "BMO2",
                 node_values: np.ndarray | None = None, singular_y=()):
        self._f = evaluator
        self.singular_y = tuple(singular_y)
        self.name = name
        self.holomorphic = holomorphic
        self.derivative = derivative
        self.expected = expected
        self.node_values = node_values

    def __call__(self, z):
        return np.asarray(self._f(np.asarray(z, dtype=complex)), dtype=complex)

    def __repr__(self):
        return f"Symbol({self.name})"

    def at_nodes(self, mesh: Mesh) -> np.ndarray:
        if self.node_values is not None:
            if len(self.node_values) != mesh.N:
                raise SymbolError("grid symbol does not match the mesh")
            return np.asarray(self.node_values, complex)
        return self(mesh.nodes)

    def conj(self) -> "Symbol":
        f = self._f
        nv = None if self.node_values is None else np.conj(self.node_values)
        return Symbol(lambda z: np.conj(f(z)), f"conj({self.name})", False,
                      expected=self.expected, node_values=nv)

    def scaled(self, c: complex, shift: complex = 0.0) -> "Symbol":
        f = self._f
        nv = None if self.node_values is None else c * np.asarray(self.node_values) + shift
        return Symbol(lambda z: c * f(z) + shift, f"{c}*{self.name}+{shift}", self.holomorphic,
                      expected=self.expected, node_values=nv)

    def __sub__(self, other: "Symbol") -> "Symbol":
        f, g = self._f, other._f
        return Symbol(lambda z: f(z) - g(z), f"{self.name}-{other.name}",
                      self.holomorphic and other.holomorphic)


# ---------------------------------------------------------------------------
# library


def constant(c: complex = 1.0) -> Symbol:
    return Symbol(lambda z: np.full(np.shape(z), c, dtype=complex), f"const({c})", True,
                  lambda z: np.zeros(np.shape(z), complex), "constant")


def identity() -> Symbol:
    return Symbol(lambda z: z, "z", True, lambda z: np.ones(np.shape(z), complex), "unbounded")


def square() -> Symbol:
    return Symbol(lambda z: z * z, "z^2", True, lambda z: 2 * z, "unbounded")


def holo_log() -> Symbol:
    """``log(z + i)``: Bloch-type, oscillation vanishing at small scales."""
    return Symbol(lambda z: np.log(z + 1j), "log(z+i)", True, lambda z: 1 / (z + 1j), "VMO")


def cauchy() -> Symbol:
    """``i / (z + i)``."""
    return Symbol(lambda z: 1j / (z + 1j), "i/(z+i)", True, lambda z: -1j / (z + 1j) ** 2, "VMO")


def exp_iz() -> Symbol:
    """``exp(i z)``: oscillation persists along the real direction."""
    return Symbol(lambda z: np.exp(1j * z), "exp(iz)", True, lambda z: 1j * np.exp(1j * z), "BMO")


def log_z() -> Symbol:
    """``log z``: scale invariant oscillation at the origin, BMO but not VMO."""
    return Symbol(np.log, "log z", True, lambda z: 1 / z, "BMO")


def log_im() -> Symbol:
    """``log(Im z)``, real valued, in BO."""
    return Symbol(lambda z: np.log(np.asarray(z).imag).astype(complex), "log(Im z)", False,
                  expected="BO")


def conj_identity() -> Symbol:
    return Symbol(np.conj, "conj(z)", False, expected="unbounded")


def conj_log() -> Symbol:
    return Symbol(lambda z: np.conj(np.log(z + 1j)), "conj(log(z+i))", False, expected="BO")


def bump(center: complex = 2j, radius: float = 1.5) -> Symbol:
    """Smooth compactly supported bump ``exp(1 - 1/(1 - |z - c|^2/r^2))``."""
    def f(z):
        t = np.abs(z - center) ** 2 / radius**2
        out = np.zeros(np.shape(z), complex)
        inside = t < 1
        out[inside] = np.exp(1 - 1 / (1 - t[inside]))
        return out
    return Symbol(f, "bump", False, expected="BA")


def trig(seed: int = 0, terms: int = 4) -> Symbol:
    """Random trigonometric polynomial in ``x`` damped in ``y`` (not holomorphic)."""
    rng = np.random.default_rng(seed)
    c = rng.normal(size=terms) + 1j * rng.normal(size=terms)
    phase = rng.uniform(0, 2 * np.pi, size=terms)
    k = np.arange(1, terms + 1)

    def f(z):
        z = np.asarray(z)
        x, y = z.real[..., None], z.imag[..., None]
        return np.sum(c * np.cos(k * x + phase) * np.exp(-k * y), axis=-1)
    return Symbol(f, f"trig(seed={seed})", False, expected="BMO2")


def counterexample_b() -> Symbol:
    """``|Im z - 1/2|^{-1/4}`` on the disk ``D(i/2, 1/4)``, zero outside."""
    def f(z):
        z = np.asarray(z)
        inside = np.abs(z - 0.5j) < 0.25
        out = np.zeros(np.shape(z), complex)
        with np.errstate(divide="ignore"):
            out[inside] = np.abs(z.imag[inside] - 0.5) ** -0.25
        return out
    return Symbol(f, "counterexample_b", False, expected="BA", singular_y=(0.5,))


def line_singular(power: float = 0.5, height: float = 0.5) -> Symbol:
    """``|Im z - height|^{-power}``; square integrable near the line only for ``power < 1/2``."""
    def f(z):
        with np.errstate(divide="ignore"):
            return (np.abs(np.asarray(z).imag - height) ** -power).astype(complex)
    return Symbol(f, f"|y-{height:g}|^-{power:g}", False, expected="unbounded",
                  singular_y=(height,))


def grid(values, name: str = "grid") -> Symbol:
    v = np.asarray(values, complex)

    def f(z):
        raise SymbolError("grid symbols can only be sampled at mesh nodes")
    return Symbol(f, name, False, node_values=v)


HOLOMORPHIC_LIBRARY = {"log(z+i)": holo_log, "i/(z+i)": cauchy, "exp(iz)": exp_iz,
                       "log z": log_z, "z": identity, "z^2": square}
GENERAL_LIBRARY = {"log(Im z)": log_im, "conj(z)": conj_identity, "conj(log(z+i))": conj_log,
                   "bump": bump, "trig": trig, "counterexample_b": counterexample_b}


def from_config(spec: dict) -> Symbol:
    kind = spec.get("kind")
    table = {"holo_log": holo_log, "identity": identity, "counterexample_b": counterexample_b,
             "cauchy": cauchy, "exp_iz": exp_iz, "log_z": log_z, "square": square,
             "log_im": log_im, "conj_identity": conj_identity, "conj_log": conj_log,
             "bump": bump}
    if kind in table:
        return table[kind]()
    if kind == "constant":
        return constant(complex(spec.get("c", 1.0)))
    if kind == "trig":
        return trig(int(spec.get("seed", 0)), int(spec.get("terms", 4)))
    if kind == "grid":
        import csv
        with open(spec["file"], newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        vals = []
        for r in rows:
            try:
                vals.append(complex(float(r[-2]), float(r[-1])) if len(r) >= 2 else complex(r[0]))
            except ValueError:
                continue
        return grid(vals, spec.get("name", "grid"))
    raise SymbolError(f"unknown symbol kind {kind!r}")


# ---------------------------------------------------------------------------
# box oscillations


@dataclass
class OscillationReport:
    value: float
    argmax: tuple | None
    table: dict = field(default_factory=dict)
    small_scale_trace: list | None = None
    far_trace: list | None = None
    verdict: bool | None = None

    def __float__(self):
        return float(self.value)


def box_oscillations(bv: np.ndarray, mesh: Mesh, system: str, p: float = 1.0,
                     alpha: float | None = None):
    """``int_Q |b - b_Q|^p`` for every covered box, with box averages and measures."""
    fam = mesh.family(system)
    wq = mesh.quad_weights if alpha is None else mesh.weights_for(alpha)
    rows, cols = fam.coo
    m = fam.incidence @ wq
    bq = (fam.incidence @ (bv * wq)) / m
    d = np.abs(bv[cols] - bq[rows]) ** p * wq[cols]
    return np.bincount(rows, d, minlength=len(fam)), m, bq


def exact_box_oscillations(b: Symbol, mesh: Mesh, system: str, p: float = 1.0,
                           alpha: float | None = None, n: int = 8, layers: int = 20):
    """Like :func:`box_oscillations` but on full boxes with a graded Gauss rule."""
    alpha = mesh.alpha if alpha is None else alpha
    fam = mesh.family(system)
    Zt, Wt = geo.box_rule(0.0, 1.0, 0.0, 1.0, alpha, n, layers)
    osc = np.empty(len(fam))
    m = np.empty(len(fam))
    bq = np.empty(len(fam), complex)
    for k in np.unique(fam.levels):
        sel = np.nonzero(fam.levels == k)[0]
        h = 2.0**k
        for start in range(0, len(sel), 256):
            sl = sel[start:start + 256]
            Z = fam.x0[sl, None] + h * Zt[None, :]
            W = h ** (alpha + 2) * Wt
            with np.errstate(all="ignore"):
                bv = b(Z)
            mean = bv @ W / W.sum()
            osc[sl] = (np.abs(bv - mean[:, None]) ** p) @ W
            m[sl] = W.sum()
            bq[sl] = mean
    return osc, m, bq


def _sup_report(values_by_system: dict, mesh: Mesh) -> OscillationReport:
    best, arg = -1.0, None
    table = {"system": [], "level": [], "index": [], "value": []}
    for s, vals in values_by_system.items():
        fam = mesh.family(s)
        table["system"] += [s] * len(vals)
        table["level"] += fam.levels.tolist()
        table["index"] += fam.indices.tolist()
        table["value"] += vals.tolist()
        b = int(np.argmax(vals))
        if vals[b] > best:
            best, arg = float(vals[b]), (s, int(fam.levels[b]), int(fam.indices[b]))
    return OscillationReport(max(best, 0.0), arg, table)


def bmo_nu_box_values(b: Symbol, nu: Weight | None, mesh: Mesh, systems=SYSTEMS,
                      mode: str = "mesh") -> dict:
    """Per-box ``nu(Q)^-1 int_Q |b - b_Q| dA_alpha``.

    ``mode="mesh"`` uses the covered cells; ``mode="exact"`` integrates over
    the full boxes with a graded Gauss rule (analytic symbols and weights).
    """
    nu = nu if nu is not None else constant_weight(1.0)
    out = {}
    if mode == "mesh":
        bv = b.at_nodes(mesh)
        nv = nu.at_nodes(mesh)
        for s in systems:
            osc, _, _ = box_oscillations(bv, mesh, s)
            out[s] = osc / (mesh.family(s).incidence @ (nv * mesh.quad_weights))
        return out
    if mode != "exact":
        raise SymbolError(f"unknown mode {mode!r}")
    from .weights import box_averages
    for s in systems:
        osc, m, _ = exact_box_oscillations(b, mesh, s)
        out[s] = osc / (box_averages(nu, mesh, s, 1.0, "exact") * m)
    return out


def bmo_nu_norm(b: Symbol, nu: Weight | None, mesh: Mesh, systems=SYSTEMS,
                mode: str = "mesh") -> OscillationReport:
    """Truncated ``sup_I nu(Q_I)^-1 int_{Q_I} |b - b_{Q_I}| dA_alpha``."""
    return _sup_report(bmo_nu_box_values(b, nu, mesh, systems, mode), mesh)


def vmo_nu_trace(b: Symbol, nu: Weight | None, mesh: Mesh, systems=SYSTEMS,
                 rel_threshold: float = 0.25, n_radii: int = 6,
                 mode: str = "exact") -> OscillationReport:
    """Small-scale and far-away envelopes of the box oscillation.

    The verdict is ``True`` ("consistent with VMO") when both traces end below
    ``rel_threshold`` times the BMO norm and decrease over their last three
    entries.  An identically zero trace passes.  Full-box integration
    (``mode="exact"``) is the default so that fine boxes are not starved of
    cells by the mesh floor.
    """
    if b.node_values is not None:
        mode = "mesh"
    vals = bmo_nu_box_values(b, nu, mesh, systems, mode)
    rep = _sup_report(vals, mesh)
    levels = np.concatenate([mesh.family(s).levels for s in systems])
    centers = np.concatenate([mesh.family(s).centers for s in systems])
    v = np.concatenate([vals[s] for s in systems])
    small = [(int(k), float(v[levels == k].max())) for k in range(mesh.cfg.k_max, mesh.cfg.k_min - 1, -1)
             if np.any(levels == k)]
    radii = np.linspace(0, mesh.cfg.x_extent, n_radii + 1)[:-1]
    far = [(float(R), float(v[np.abs(centers) >= R].max())) for R in radii
           if np.any(np.abs(centers) >= R)]
    norm = rep.value

    def ok(trace):
        t = np.array([y for _, y in trace])
        if norm <= 1e-12 or np.all(t <= 1e-12 * max(norm, 1.0)):
            return True
        tail = t[-3:]
        slope = np.polyfit(np.arange(len(tail)), tail, 1)[0] if len(tail) > 1 else 0.0
        vanished = t[-1] <= 1e-12 * norm
        return bool(t[-1] <= rel_threshold * norm and (slope < 0 or vanished))

    rep.small_scale_trace = small
    rep.far_trace = far
    rep.verdict = ok(small) and ok(far)
    return rep


def bmo2_norm(b: Symbol, mesh: Mesh, systems=SYSTEMS, mode: str = "mesh") -> OscillationReport:
    """Truncated ``sup_I (A(Q_I)^-1 int_{Q_I} |b - b_{Q_I}|^2 dA)^{1/2}`` with unweighted area."""
    out = {}
    for s in systems:
        if mode == "exact":
            osc, m, _ = exact_box_oscillations(b, mesh, s, 2.0, alpha=0.0)
        else:
            osc, m, _ = box_oscillations(b.at_nodes(mesh), mesh, s, p=2.0, alpha=0.0)
        out[s] = np.sqrt(osc / m)
    return _sup_report(out, mesh)


def box_l1_l2(b: Symbol, mesh: Mesh, system: str = "D1"):
    """Per-box normalized L1 and L2 oscillations with unweighted area."""
    bv = b.at_nodes(mesh)
    o1, m, _ = box_oscillations(bv, mesh, system, 1.0, alpha=0.0)
    o2, _, _ = box_oscillations(bv, mesh, system, 2.0, alpha=0.0)
    return o1 / m, np.sqrt(o2 / m)


# ---------------------------------------------------------------------------
# disk functionals


def _disk_rows(mesh: Mesh, r: float, rows=None, chunk: int = 512):
    rows = np.arange(mesh.N) if rows is None else np.asarray(rows)
    for start in range(0, len(rows), chunk):
        sel = rows[start:start + chunk]
        yield sel, geo.disk_membership(mesh, r, sel)


def bo_norm(b: Symbol, mesh: Mesh, r: float = 1.0, values: np.ndarray | None = None) -> float:
    """``max_z max_{w in beta(z, r)} |b(z) - b(w)|`` over mesh nodes."""
    bv = b.at_nodes(mesh) if values is None else values
    best = 0.0
    for sel, M in _disk_rows(mesh, r):
        diff = np.abs(bv[sel][:, None] - bv[None, :])
        best = max(best, float(np.max(np.where(M, diff, 0.0))))
    return best


def ba_norm(b: Symbol, mesh: Mesh, r: float = 1.0, values: np.ndarray | None = None,
            quadrature: str = "mesh", levels: int = 6) -> float:
    """``max_z (A(beta(z,r))^-1 int_{beta} |b|^2 dA)^{1/2}`` over mesh nodes.

    ``quadrature="disk"`` integrates each disk with :func:`graded_disk_rule`
    (``levels`` grading layers toward the symbol's singular heights) instead
    of summing mesh cells.
    """
    if quadrature == "disk":
        best = 0.0
        for z in mesh.nodes:
            c, R = geo.bergman_disk_euclidean(z, r)
            P, W = graded_disk_rule(c, R, b.singular_y, levels)
            with np.errstate(all="ignore"):
                v = float(np.sum(np.abs(b(P)) ** 2 * W) / np.sum(W))
            best = max(best, v)
        return math.sqrt(best)
    bv = b.at_nodes(mesh) if values is None else values
    w0 = mesh.weights_for(0.0)
    b2 = np.abs(bv) ** 2 * w0
    best = 0.0
    for sel, M in _disk_rows(mesh, r):
        num = M @ b2
        den = M @ w0
        best = max(best, float(np.sqrt(np.max(num / den))))
    return best


def disk_rule(z: complex, r: float, n_r: int = 16, n_t: int = 32):
    """Polar Gauss rule for ``dA`` on the Euclidean disk equal to ``beta(z, r)``."""
    c, R = geo.bergman_disk_euclidean(z, r)
    g, gw = np.polynomial.legendre.leggauss(n_r)
    rho = 0.5 * R * (g + 1)
    wr = 0.5 * R * gw * rho
    th = 2 * np.pi * np.arange(n_t) / n_t
    pts = c + rho[:, None] * np.exp(1j * th)[None, :]
    wts = np.repeat(wr[:, None] * (2 * np.pi / n_t), n_t, axis=1)
    return pts.ravel(), wts.ravel()


def graded_disk_rule(c: complex, R: float, singular_y=(), levels: int = 6, n: int = 8):
    """Gauss rule for ``dA`` on the Euclidean disk ``D(c, R)``, graded toward singular heights.

    The height is parametrized as ``y = Im c + R sin(phi)`` so the chord
    length is smooth; ``phi`` breakpoints accumulate geometrically at every
    singular height inside the disk, ``levels`` layers deep.
    """
    g, gw = np.polynomial.legendre.leggauss(n)
    brk = [-np.pi / 2, np.pi / 2]
    for s in singular_y:
        u = (s - c.imag) / R
        if -1 < u < 1:
            ps = math.asin(u)
            brk.append(ps)
            for side in (-1, 1):
                room = (ps + np.pi / 2) if side < 0 else (np.pi / 2 - ps)
                brk += [ps + side * room * 0.5 * 2.0**-j for j in range(levels)]
    brk = np.unique(brk)
    phis, wph = [], []
    for a, b_ in zip(brk[:-1], brk[1:]):
        phis.append(0.5 * (b_ - a) * (g + 1) + a)
        wph.append(0.5 * (b_ - a) * gw)
    phi = np.concatenate(phis)
    wphi = np.concatenate(wph)
    half = R * np.cos(phi)
    y = c.imag + R * np.sin(phi)
    X = c.real + half[:, None] * g[None, :]
    W = (wphi * R * np.cos(phi) * half)[:, None] * gw[None, :]
    return (X + 1j * y[:, None]).ravel(), W.ravel()


def disk_average(b: Symbol, z, r: float, measure: str = "area", n_r: int = 16,
                 n_t: int = 32) -> np.ndarray:
    """Average of ``b`` over ``beta(z, r)`` in ``dA`` (``"area"``) or ``dA / y^2`` (``"invariant"``)."""
    z = np.atleast_1d(np.asarray(z, complex))
    t = math.tanh(r)
    g, gw = np.polynomial.legendre.leggauss(n_r)
    u = 0.5 * (g + 1)
    th = 2 * np.pi * np.arange(n_t) / n_t
    y = z.imag
    C = z.real + 1j * y * (1 + t * t) / (1 - t * t)
    R = 2 * t * y / (1 - t * t)
    offs = (u[:, None] * np.exp(1j * th)[None, :]).ravel()
    base_w = np.repeat((0.5 * gw * u)[:, None], n_t, axis=1).ravel()
    out = np.empty(len(z), complex)
    for start in range(0, len(z), 256):
        sl = slice(start, start + 256)
        P = C[sl, None] + R[sl, None] * offs[None, :]
        W = np.broadcast_to(base_w, P.shape)
        if measure == "invariant":
            W = W / P.imag**2
        elif measure != "area":
            raise SymbolError(f"unknown disk measure {measure!r}")
        out[sl] = np.sum(b(P) * W, axis=1) / np.sum(W, axis=1)
    return out


@dataclass
class SplitReport:
    b1: Symbol
    b2: Symbol
    bo_b1: float
    ba_b2: float
    bmo2: float
    ratio: float
    measure: str


def split_bo_ba(b: Symbol, mesh: Mesh, r: float = 1.0, measure: str = "area") -> SplitReport:
    """Split ``b = b1 + b2`` with ``b1`` the Bergman-disk average of ``b``.

    ``measure="area"`` averages in ``dA``; ``"invariant"`` averages in the
    Mobius invariant measure ``dA / y^2``, for which holomorphic ``b`` gives
    ``b1 = b``.
    """
    def f1(z):
        z = np.asarray(z, complex)
        return disk_average(b, z.ravel(), r, measure).reshape(z.shape)

    b1 = Symbol(f1, f"avg[{b.name}]", False)
    b2 = Symbol(lambda z: b(z) - f1(z), f"{b.name}-avg", False)
    v = b.at_nodes(mesh)
    v1 = disk_average(b, mesh.nodes, r, measure)
    bo1 = bo_norm(b1, mesh, r, values=v1)
    ba2 = ba_norm(b2, mesh, r, values=v - v1)
    n2 = bmo2_norm(b, mesh).value
    ratio = (bo1 + ba2) / n2 if n2 > 0 else math.nan
    return SplitReport(b1, b2, bo1, ba2, n2, ratio, measure)


def bda_disk_residual(b: Symbol, mesh: Mesh, z: complex, r: float, degree: int,
                      values: np.ndarray | None = None, cells=None,
                      quadrature: str = "mesh") -> float:
    """Weighted least-squares residual of the best holomorphic polynomial on one disk.

    ``quadrature="mesh"`` uses the cells whose node lies in ``beta(z, r)``;
    ``"disk"`` uses a polar Gauss rule on the disk itself.
    """
    c, R = geo.bergman_disk_euclidean(z, r)
    if quadrature == "disk":
        P, w = disk_rule(z, r)
        u = (P - c) / R
        sw = np.sqrt(w / w.sum())
        V = np.vander(u, degree + 1, increasing=True) * sw[:, None]
        bv = b(P)
        coef = np.linalg.lstsq(V, bv * sw, rcond=None)[0]
        return float(np.sqrt(np.sum(np.abs(bv * sw - V @ coef) ** 2)))
    cells = geo.bergman_disk(z, r, mesh) if cells is None else cells
    if len(cells) < degree + 1:
        raise BDAConditioningError(
            f"disk at {z} holds {len(cells)} cells, fewer than degree+1={degree + 1}")
    bv = (b.at_nodes(mesh) if values is None else values)[cells]
    u = (mesh.nodes[cells] - c) / R
    w = mesh.weights_for(0.0)[cells]
    sw = np.sqrt(w / w.sum())
    V = np.vander(u, degree + 1, increasing=True) * sw[:, None]
    coef, _, rank, sv = np.linalg.lstsq(V, bv * sw, rcond=None)
    if rank < degree + 1 or sv[-1] < 1e-12 * sv[0]:
        raise BDAConditioningError(f"normal equations singular at {z} for degree {degree}")
    res = bv * sw - V @ coef
    return float(np.sqrt(np.sum(np.abs(res) ** 2)))


@dataclass
class BDAReport:
    value: float
    argmax: complex
    degree_table: list


def bda_norm(b: Symbol, mesh: Mesh, r: float = 1.0, degree: int = 6,
             nodes: str = "interior") -> BDAReport:
    """``max_z min_h`` disk ``L^2`` distance from holomorphic polynomials of ``degree``.

    The degree table lists the same maximum for every degree ``0..degree``;
    it is non-increasing since the polynomial spaces are nested.
    """
    if degree < 0:
        raise SymbolError("degree must be non-negative")
    rows = geo.interior_nodes(mesh, r) if nodes == "interior" else np.arange(mesh.N)
    if len(rows) == 0:
        rows = np.arange(mesh.N)
    bv = b.at_nodes(mesh)
    best = np.zeros(degree + 1)
    arg = [None] * (degree + 1)
    for sel, M in _disk_rows(mesh, r, rows):
        for i, mask in zip(sel, M):
            cells = np.nonzero(mask)[0]
            for d in range(degree + 1):
                v = bda_disk_residual(b, mesh, mesh.nodes[i], r, d, bv, cells)
                if v > best[d]:
                    best[d], arg[d] = v, mesh.nodes[i]
    return BDAReport(float(best[degree]), arg[degree],
                     [(d, float(best[d])) for d in range(degree + 1)])


# ---------------------------------------------------------------------------
# oscillation along a chain of upper boxes


def _rect_avg(b: Symbol, x0, x1, y1, alpha):
    Z, W = geo.box_rule(x0, x1, 0.0, y1, alpha, n=10)
    return Z, W, np.sum(b(Z) * W) / np.sum(W)


def oscillation_chain_bound(b: Symbol, I: DyadicInterval, z: complex, mesh: Mesh,
                            inflation: float | None = None) -> tuple[float, float]:
    """Both sides of ``|b(z) - b_{Q_I}| <~ sum_J <|b - b_{Q_J}|>_{Q~_J}`` along the chain.

    Averages use a graded Gauss rule on each box, so the inflated boxes need
    not be dyadic.
    """
    alpha = mesh.alpha
    infl = mesh.cfg.inflation_factor if inflation is None else inflation
    chain = geo.chain_to_top(z, I, k_floor=mesh.cfg.k_min)
    _, _, bQ = _rect_avg(b, I.x0, I.x1, I.length, alpha)
    lhs = float(abs(b(np.array([z]))[0] - bQ))
    rhs = 0.0
    for J in chain:
        _, _, bJ = _rect_avg(b, J.x0, J.x1, J.length, alpha)
        box = CarlesonBox.of(J, "inflated", infl)
        a, c = box.xrange
        Z, W = geo.box_rule(a, c, 0.0, J.length, alpha, n=10)
        rhs += float(np.sum(np.abs(b(Z) - bJ) * W) / np.sum(W))
    return lhs, rhs
