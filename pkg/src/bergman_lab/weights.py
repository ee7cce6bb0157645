"""Weights on the upper half-plane and their class characteristics.

A :class:`Weight` wraps a positive evaluator.  Weights that depend on
``Im z`` only carry a ``moment`` routine giving exact integrals of their
powers against ``(2y)^alpha dy``; these drive the closed-form box averages.
Every characteristic can alternatively be computed from mesh cell sums
(``mode="mesh"``), and ``mode="truncated"`` cuts the exact box integrals at
the mesh floor ``2^(k_min - 1)`` to expose divergence under refinement.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .geometry import SYSTEMS, GlobalConfig, Mesh, box_rule, rect_measure

INF_THRESHOLD = 1e6


class WeightError(ValueError):
    pass


def _y_measure(y0, y1, alpha):
    e = alpha + 1.0
    return 2.0**alpha * (np.asarray(y1) ** e - np.asarray(y0) ** e) / e


class Weight:
    """Positive function on the upper half-plane.

    Parameters
    ----------
    evaluator : callable
        Vectorized map from complex points to positive reals.
    name : str
    y_only : bool
        Whether the weight depends on ``Im z`` only.
    moment : callable, optional
        ``moment(y0, y1, p, alpha)`` returning ``int_{y0}^{y1} w(y)^p (2y)^alpha dy``
        (``inf`` when divergent).  Only meaningful for ``y_only`` weights.
    singular_y : tuple of float
        Heights where the weight or its reciprocal is singular.
    """

    def __init__(self, evaluator: Callable, name: str = "weight", y_only: bool = False,
                 moment: Callable | None = None, singular_y=(), power: tuple | None = None,
                 node_values: np.ndarray | None = None):
        self._f = evaluator
        self.name = name
        self.y_only = y_only
        self.moment = moment
        self.singular_y = tuple(singular_y)
        self.power = power  # (c, s) for c * y^s
        self.node_values = node_values
        self._cache: dict = {}

    def __call__(self, z) -> np.ndarray:
        return self._f(np.asarray(z, dtype=complex))

    def __repr__(self):
        return f"Weight({self.name})"

    def at_nodes(self, mesh: Mesh) -> np.ndarray:
        key = ("nodes", id(mesh))
        if key not in self._cache:
            if self.node_values is not None:
                if len(self.node_values) != mesh.N:
                    raise WeightError("grid weight does not match the mesh")
                v = np.asarray(self.node_values, float)
            else:
                v = np.asarray(self(mesh.nodes), float)
            if not np.all(v > 0) or not np.all(np.isfinite(v)):
                raise WeightError(f"{self.name} is not finite and positive at every node")
            self._cache[key] = v
        return self._cache[key]

    def cell_averages(self, mesh: Mesh, system: str, p: float = 1.0) -> np.ndarray:
        """Covered-measure averages of ``w^p`` over the boxes of ``system``."""
        key = ("avg", id(mesh), system, p)
        if key not in self._cache:
            fam = mesh.family(system)
            self._cache[key] = fam.averages(self.at_nodes(mesh) ** p, mesh.quad_weights)
        return self._cache[key]

    @property
    def analytic(self) -> bool:
        return self.node_values is None

    def reciprocal(self) -> "Weight":
        return self.pow(-1.0)

    def pow(self, q: float) -> "Weight":
        mom = None
        if self.moment is not None:
            m = self.moment
            mom = lambda y0, y1, p, a: m(y0, y1, p * q, a)  # noqa: E731
        pw = None if self.power is None else (self.power[0] ** q, self.power[1] * q)
        nv = None if self.node_values is None else np.asarray(self.node_values) ** q
        f = self._f
        return Weight(lambda z: f(z) ** q, f"({self.name})^{q:g}", self.y_only, mom,
                      self.singular_y, pw, nv)

    def __mul__(self, other: "Weight") -> "Weight":
        if not isinstance(other, Weight):
            c = float(other)
            other = constant(c)
        f, g = self._f, other._f
        y_only = self.y_only and other.y_only
        pw = None
        mom = None
        if self.power is not None and other.power is not None:
            pw = (self.power[0] * other.power[0], self.power[1] + other.power[1])
            mom = _power_moment(*pw)
        elif y_only:
            mom = _quad_moment(lambda y: f(1j * y) * g(1j * y),
                               self.singular_y + other.singular_y)
        nv = None
        if self.node_values is not None or other.node_values is not None:
            if self.node_values is None or other.node_values is None:
                raise WeightError("cannot combine grid and analytic weights")
            nv = np.asarray(self.node_values) * other.node_values
        out = Weight(lambda z: f(z) * g(z), f"{self.name}*{other.name}", y_only, mom,
                     self.singular_y + other.singular_y, pw, nv)
        if pw is not None:
            out.moment = mom
        return out

    def rect_average(self, x0, x1, y0, y1, alpha: float, p: float = 1.0) -> float:
        """Exact (or high-order) average of ``w^p`` over a rectangle in ``dA_alpha``."""
        if self.moment is not None:
            num = self.moment(y0, y1, p, alpha)
            return float(num / _y_measure(y0, y1, alpha))
        if self.y_only:
            num = _quad_moment(lambda y: self._f(1j * y), self.singular_y)(y0, y1, p, alpha)
            return float(num / _y_measure(y0, y1, alpha))
        if not self.analytic:
            raise WeightError("grid weights have no pointwise rectangle averages; use mode='mesh'")
        Z, W = box_rule(x0, x1, y0, y1, alpha)
        return float(np.sum(self(Z) ** p * W) / np.sum(W))


def _power_moment(c: float, s: float):
    def moment(y0, y1, p, alpha):
        e = s * p + alpha + 1.0
        if y0 <= 0 and e <= 0:
            return math.inf
        if abs(e) < 1e-14:
            return c**p * 2.0**alpha * math.log(y1 / y0)
        return c**p * 2.0**alpha * (y1**e - y0**e) / e
    return moment


def _quad_moment(g: Callable, singular_y=()):
    def moment(y0, y1, p, alpha):
        pts = [y for y in singular_y if y0 < y < y1]
        edges = [y0] + pts + [y1]
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            val, _ = integrate.quad(lambda y: float(np.real(g(y))) ** p * (2 * y) ** alpha,
                                    a, b, limit=200)
            total += val
        return total if math.isfinite(total) else math.inf
    return moment


def constant(c: float = 1.0) -> Weight:
    if c <= 0:
        raise WeightError("constant weight must be positive")
    return Weight(lambda z: np.full(np.shape(z), float(c)), f"const({c:g})", True,
                  _power_moment(c, 0.0), power=(float(c), 0.0))


def power_weight(s: float, c: float = 1.0) -> Weight:
    """``c (Im z)^s``."""
    return Weight(lambda z: c * np.asarray(z).imag ** s, f"y^{s:g}", True,
                  _power_moment(c, s), power=(float(c), float(s)))


def _counterexample_moment(y0, y1, p, alpha):
    # int |y - 1/2|^{-p/2} (2y)^alpha dy
    q = -0.5 * p
    if y0 < 0.5 < y1 and q <= -1:
        return math.inf
    if y0 == 0.5 or y1 == 0.5:
        if q <= -1:
            return math.inf
    if alpha == 0:
        e = q + 1.0

        def F(y):
            u = y - 0.5
            if e == 0:
                return math.copysign(math.log(abs(u)), u)
            return math.copysign(abs(u) ** e / e, u)
        return F(y1) - F(y0)
    return _quad_moment(lambda y: np.abs(y - 0.5) ** -0.5, (0.5,))(y0, y1, p, alpha)


def apr_counterexample() -> Weight:
    """``|Im z - 1/2|^{-1/2}``: a B2 weight that is not of bounded hyperbolic oscillation."""
    def f(z):
        with np.errstate(divide="ignore"):
            return np.abs(np.asarray(z).imag - 0.5) ** -0.5
    return Weight(f, "apr_counterexample", True, _counterexample_moment, (0.5,))


def conformal(eta: float) -> Weight:
    """``|h'(z)|^eta`` for the Cayley map ``h(z) = (z - i)/(z + i)``."""
    def f(z):
        return (2.0 / np.abs(np.asarray(z) + 1j) ** 2) ** eta
    return Weight(f, f"conformal({eta:g})", False)


def grid(values, name: str = "grid") -> Weight:
    """Weight known only at mesh nodes (mesh order)."""
    v = np.asarray(values, float)

    def f(z):
        raise WeightError("grid weights can only be sampled at mesh nodes")
    return Weight(f, name, False, node_values=v)


def load_grid_csv(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    try:
        return np.array([float(r[-1]) for r in rows])
    except ValueError:
        return np.array([float(r[-1]) for r in rows[1:]])


def from_config(spec: dict) -> Weight:
    """Build a weight from ``{"kind": ..., ...}``."""
    kind = spec.get("kind")
    if kind == "power":
        return power_weight(float(spec["s"]), float(spec.get("c", 1.0)))
    if kind == "constant":
        return constant(float(spec.get("c", 1.0)))
    if kind == "apr_counterexample":
        return apr_counterexample()
    if kind == "conformal":
        return conformal(float(spec["eta"]))
    if kind == "grid":
        return grid(load_grid_csv(spec["file"]), spec.get("name", "grid"))
    raise WeightError(f"unknown weight kind {kind!r}")


# ---------------------------------------------------------------------------
# characteristics


def _flag(v: float) -> float:
    return math.inf if not math.isfinite(v) or v > INF_THRESHOLD else float(v)


def _box_table(mesh: Mesh, systems=SYSTEMS, upper: bool = False):
    """Distinct boxes as (system, level, x0, x1) arrays over the covered families."""
    out = []
    for s in systems:
        fam = mesh.family(s)
        out.append((s, fam))
    return out


def _exact_box_averages(w: Weight, mesh: Mesh, system: str, p: float, mode: str,
                        alpha: float | None = None) -> np.ndarray:
    alpha = mesh.alpha if alpha is None else alpha
    fam = mesh.family(system)
    floor = 2.0 ** (mesh.cfg.k_min - 1) if mode == "truncated" else 0.0
    h = fam.side
    if w.y_only:
        out = np.empty(len(fam))
        for k in np.unique(fam.levels):
            sel = fam.levels == k
            out[sel] = w.rect_average(0.0, 1.0, floor, 2.0**k, alpha, p)
        return out
    return np.array([w.rect_average(a, b, floor, hh, alpha, p)
                     for a, b, hh in zip(fam.x0, fam.x1, h)])


def box_averages(w: Weight, mesh: Mesh, system: str, p: float = 1.0,
                 mode: str = "exact") -> np.ndarray:
    """Averages of ``w^p`` over every covered box ``Q_I`` of ``system``.

    ``mode`` is ``"exact"`` (full boxes, closed form or high-order rule),
    ``"truncated"`` (same, cut at the mesh floor) or ``"mesh"`` (cell sums).
    """
    if mode == "mesh" or not w.analytic:
        return w.cell_averages(mesh, system, p)
    if mode not in ("exact", "truncated"):
        raise WeightError(f"unknown averaging mode {mode!r}")
    return _exact_box_averages(w, mesh, system, p, mode)


def b2_characteristic(w: Weight, mesh: Mesh, systems=SYSTEMS, mode: str = "exact") -> float:
    """Truncated ``sup_I <w>_{Q_I} <w^-1>_{Q_I}``; ``inf`` flags divergence."""
    best = 1.0
    with np.errstate(all="ignore"):
        for s in systems:
            a = box_averages(w, mesh, s, 1.0, mode)
            b = box_averages(w, mesh, s, -1.0, mode)
            prod = a * b
            if not np.all(np.isfinite(prod)):
                return math.inf
            best = max(best, float(prod.max()))
    return _flag(best)


def apr_constant(w: Weight, mesh: Mesh, grid_n: int = 16, shifts: int = 8) -> float:
    """Sampled ``sup_I sup/inf`` of ``w`` over upper boxes ``Q_I^up``.

    Boxes of both systems are used, plus ``shifts`` uniformly translated
    non-dyadic boxes per level.  The result is a lower bound for the true
    constant.
    """
    if not w.analytic:
        v = w.at_nodes(mesh)
        return _flag(float(v.max() / v.min()))
    cfg = mesh.cfg
    u = np.linspace(0.0, 1.0, grid_n)
    best = 1.0
    for k in range(cfg.k_min, cfg.k_max + 1):
        h = 2.0**k
        x0s = []
        for s in SYSTEMS:
            fam = mesh.family(s)
            x0s.append(fam.x0[fam.levels == k])
        x0s.append(-cfg.x_extent + h * (np.arange(shifts) + 0.5) / shifts
                   + np.linspace(0, 2 * cfg.x_extent - 2 * h, shifts))
        x0s = np.concatenate(x0s)
        if len(x0s) == 0:
            continue
        if w.y_only:
            x0s = x0s[:1]
        ys = h / 2 + u * h / 2
        xs = u * h
        with np.errstate(all="ignore"):
            Z = x0s[:, None, None] + xs[None, None, :] + 1j * ys[None, :, None]
            v = w(Z).reshape(len(x0s), -1)
            ratio = v.max(axis=1) / v.min(axis=1)
        if not np.all(np.isfinite(ratio)):
            return math.inf
        best = max(best, float(ratio.max()))
    return _flag(best)


def reverse_holder_constant(w: Weight, mesh: Mesh, r: float, systems=SYSTEMS,
                            mode: str = "exact") -> float:
    """Truncated ``sup_I <w^r>^{1/r} / <w>`` over boxes ``Q_I``."""
    if not r > 1:
        raise WeightError("reverse Holder exponent must exceed 1")
    best = 1.0
    with np.errstate(all="ignore"):
        for s in systems:
            num = box_averages(w, mesh, s, r, mode) ** (1.0 / r)
            den = box_averages(w, mesh, s, 1.0, mode)
            ratio = num / den
            if not np.all(np.isfinite(ratio)):
                return math.inf
            best = max(best, float(ratio.max()))
    return _flag(best)


def binfty_characteristic(w: Weight, mesh: Mesh, system: str = "D1") -> float:
    """Truncated ``sup_I sigma(Q_I)^-1 int_{Q_I} M_D(sigma 1_{Q_I}) dA_alpha`` on the mesh."""
    fam = mesh.family(system)
    v = w.at_nodes(mesh)
    wq = mesh.quad_weights
    avg = fam.averages(v, wq)
    anc = fam.ancestors
    vals = np.where(anc >= 0, avg[np.maximum(anc, 0)], -np.inf)
    cum = np.maximum.accumulate(vals, axis=1)  # max over boxes at level <= l
    best = 1.0
    for b in range(len(fam)):
        cells = fam.members(b)
        l = fam.levels[b] - mesh.cfg.k_min
        num = float(np.sum(cum[cells, l] * wq[cells]))
        best = max(best, num / float(np.sum(v[cells] * wq[cells])))
    return _flag(best)


def bloom_nu(mu: Weight, lam: Weight) -> Weight:
    """``nu = mu^{1/2} lambda^{-1/2}``."""
    nu = mu.pow(0.5) * lam.pow(-0.5)
    nu.name = f"nu[{mu.name},{lam.name}]"
    return nu


@dataclass
class BloomTriple:
    mu: Weight
    lam: Weight
    nu: Weight = field(init=False)

    def __post_init__(self):
        self.nu = bloom_nu(self.mu, self.lam)

    def check_nodes(self, mesh: Mesh) -> float:
        """Max relative deviation of ``nu`` from ``mu^{1/2} lambda^{-1/2}`` at nodes."""
        a = self.nu.at_nodes(mesh)
        b = np.sqrt(self.mu.at_nodes(mesh)) / np.sqrt(self.lam.at_nodes(mesh))
        return float(np.max(np.abs(a - b) / b))


def bloom_box_ratios(mu: Weight, lam: Weight, mesh: Mesh, systems=SYSTEMS) -> np.ndarray:
    """``mu(Q)^{1/2} lambda^{-1}(Q)^{1/2} / nu(Q)`` on every covered box (cell sums).

    The lower bound 1 holds exactly by Cauchy-Schwarz since all three
    integrals use the same cells.
    """
    nu = bloom_nu(mu, lam)
    out = []
    wq = mesh.quad_weights
    for s in systems:
        E = mesh.family(s).incidence
        m = E @ (mu.at_nodes(mesh) * wq)
        li = E @ (wq / lam.at_nodes(mesh))
        n = E @ (nu.at_nodes(mesh) * wq)
        out.append(np.sqrt(m * li) / n)
    return np.concatenate(out)


def further_weighted_b2(sigma: Weight, mesh: Mesh, eps: float, systems=SYSTEMS) -> float:
    """``sup_I <rho sigma>^{dA_{alpha-eps}} <rho^-1 sigma^-1>^{dA_{alpha-3eps}}``, ``rho = y^-eps``."""
    alpha = mesh.alpha
    if not alpha - 3 * eps > -1:
        raise WeightError("eps too large for the shifted measures")
    rho = power_weight(-eps)
    a_w = rho * sigma
    b_w = rho.reciprocal() * sigma.reciprocal()
    best = 0.0
    with np.errstate(all="ignore"):
        for s in systems:
            fam = mesh.family(s)
            if sigma.y_only:
                vals = []
                for k in np.unique(fam.levels):
                    h = 2.0**k
                    vals.append(a_w.rect_average(0, h, 0, h, alpha - eps)
                                * b_w.rect_average(0, h, 0, h, alpha - 3 * eps))
                vals = np.array(vals)
            else:
                vals = np.array([a_w.rect_average(x0, x1, 0, x1 - x0, alpha - eps)
                                 * b_w.rect_average(x0, x1, 0, x1 - x0, alpha - 3 * eps)
                                 for x0, x1 in zip(fam.x0, fam.x1)])
            if not np.all(np.isfinite(vals)):
                return math.inf
            best = max(best, float(vals.max()))
    return _flag(best)


@dataclass
class WeightReport:
    name: str
    b2_char: float
    apr_const: float
    rh_exponent_table: list
    binfty_char: float
    convergence: list

    def to_dict(self) -> dict:
        return {"name": self.name, "b2_char": self.b2_char, "apr_const": self.apr_const,
                "rh_exponent_table": self.rh_exponent_table,
                "binfty_char": self.binfty_char, "convergence": self.convergence}


def convergence_table(w: Weight, cfg: GlobalConfig, widen=(0, 2, 4), mode: str = "truncated"):
    """``b2`` at scale ranges widened by the given numbers of levels on both ends."""
    rows = []
    for d in widen:
        c = cfg.with_(k_min=cfg.k_min - d, k_max=cfg.k_max + d,
                      x_extent=cfg.x_extent * 2.0**d)
        m = Mesh(c.with_(x_extent=max(c.x_extent, 2.0 ** (c.k_max + 1))))
        rows.append({"k_min": c.k_min, "k_max": c.k_max,
                     "b2": b2_characteristic(w, m, mode=mode)})
    return rows


def weight_report(w: Weight, mesh: Mesh, rs=(1.1, 1.5, 2.0), widen=(0, 2)) -> WeightReport:
    analytic = w.analytic
    mode = "exact" if analytic else "mesh"
    conv = convergence_table(w, mesh.cfg, widen) if analytic else []
    return WeightReport(
        w.name,
        b2_characteristic(w, mesh, mode=mode),
        apr_constant(w, mesh),
        [(r, reverse_holder_constant(w, mesh, r, mode=mode)) for r in rs],
        binfty_characteristic(w, mesh) if _finite_at_nodes(w, mesh) else math.inf,
        conv,
    )


def _finite_at_nodes(w: Weight, mesh: Mesh) -> bool:
    try:
        w.at_nodes(mesh)
        return True
    except WeightError:
        return False
