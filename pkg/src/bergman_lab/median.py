"""Complex median and the lower-bound test configuration.

Quadrants around a centre ``c`` with rotation ``theta`` are indexed by
``j = 0..3`` counterclockwise, quadrant ``j`` covering the angles
``[j pi/2, (j+1) pi/2)`` of ``e^{i theta}(v - c)``.  Two conventions are used:

* half-open quadrants (as above; the centre belongs to quadrant 0) form a
  true partition of the plane;
* closed quadrants (both boundary rays and the centre included) are used
  for the ``1/16`` mass guarantee and for the sets ``F_j``.

The test configuration uses its own local quadrature: a uniform grid on
``S_I`` and Whitney cells of ``Q_I`` down to a fixed depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import DyadicInterval, Mesh, rect_measure
from .operators import bergman_kernel
from .symbols import Symbol
from .weights import Weight, constant as constant_weight

GRID = 180
QUARTER = np.pi / 2


class ComplexMedianError(RuntimeError):
    """No rotation on the search grid meets the 1/16 bound."""

    def __init__(self, msg, best):
        super().__init__(msg)
        self.best = best


class CoverageError(ValueError):
    pass


def weighted_median(x, m) -> float:
    """Smallest value at which the cumulative mass reaches half the total."""
    order = np.argsort(x, kind="stable")
    cum = np.cumsum(np.asarray(m, float)[order])
    k = int(np.searchsorted(cum, 0.5 * cum[-1] * (1 - 1e-14)))
    return float(np.asarray(x)[order][k])


def quadrant_index(u) -> np.ndarray:
    """Half-open quadrant of each rotated offset ``u``."""
    ang = np.mod(np.angle(u), 2 * np.pi)
    j = np.floor(ang / QUARTER).astype(int) % 4
    return np.where(u == 0, 0, j)


def closed_membership(u, tol: float = 0.0) -> np.ndarray:
    """``(4, n)`` boolean: offset ``u`` lies in closed quadrant ``j``."""
    x, y = np.real(u), np.imag(u)
    s = tol * np.maximum(np.abs(u), 1.0)
    return np.stack([(x >= -s) & (y >= -s), (x <= s) & (y >= -s),
                     (x <= s) & (y <= s), (x >= -s) & (y <= s)])


@dataclass
class ComplexMedian:
    center: complex
    theta: float
    masses: np.ndarray          # half-open, partition of the total
    closed_masses: np.ndarray
    total: float
    source: str = "grid"

    @property
    def min_fraction(self) -> float:
        return float(self.closed_masses.min() / self.total)

    def offsets(self, v) -> np.ndarray:
        return np.exp(1j * self.theta) * (np.asarray(v) - self.center)

    def to_dict(self) -> dict:
        return {"center": [self.center.real, self.center.imag], "theta": self.theta,
                "masses": self.masses.tolist(), "closed_masses": self.closed_masses.tolist(),
                "total": self.total, "min_fraction": self.min_fraction, "source": self.source}


def median_at(values, masses, theta: float) -> ComplexMedian:
    """Coordinatewise weighted median in the frame rotated by ``theta``."""
    v = np.asarray(values, complex)
    m = np.asarray(masses, float)
    r = np.exp(1j * theta) * v
    cr = complex(weighted_median(r.real, m), weighted_median(r.imag, m))
    center = np.exp(-1j * theta) * cr
    u = r - cr
    q = quadrant_index(u)
    half = np.bincount(q, m, minlength=4)
    closed = closed_membership(u, 1e-13) @ m
    return ComplexMedian(complex(center), float(theta), half, closed, float(m.sum()))


def principal_angle(values, masses) -> float:
    """Rotation putting the principal axis of the weighted values on the real axis, mod pi/2."""
    v = np.asarray(values, complex)
    m = np.asarray(masses, float)
    d = v - np.sum(v * m) / m.sum()
    cov = np.array([[np.sum(m * d.real**2), np.sum(m * d.real * d.imag)],
                    [np.sum(m * d.real * d.imag), np.sum(m * d.imag**2)]])
    _, vec = np.linalg.eigh(cov)
    return float(np.mod(-np.arctan2(vec[1, 1], vec[0, 1]), QUARTER))


def complex_median(values, masses, grid: int = GRID, fraction: float = 1 / 16,
                   fallback: bool = True) -> ComplexMedian:
    """First rotation ``k pi / (2 grid)`` whose closed quadrants each hold ``fraction`` of the mass.

    Nearly collinear values only split correctly when the line is aligned
    with a rotated axis, which the grid may miss.  With ``fallback`` the
    principal-axis rotation is tried after the grid; the result then has
    ``source == "principal-axis"``.  The mass bound is never relaxed.
    """
    m = np.asarray(masses, float)
    if not m.sum() > 0:
        raise ValueError("total mass must be positive")
    best = None
    for k in range(grid):
        cm = median_at(values, m, k * QUARTER / grid)
        if cm.closed_masses.min() >= fraction * cm.total * (1 - 1e-12):
            return cm
        if best is None or cm.min_fraction > best.min_fraction:
            best = cm
    if fallback:
        cm = median_at(values, m, principal_angle(values, m))
        if cm.closed_masses.min() >= fraction * cm.total * (1 - 1e-12):
            cm.source = "principal-axis"
            return cm
    raise ComplexMedianError("no rotation on the grid meets the mass bound", best)


# ---------------------------------------------------------------------------
# test configuration


@dataclass
class LocalCells:
    nodes: np.ndarray
    weights: np.ndarray


def _uniform_cells(x0, x1, y0, y1, n, alpha) -> LocalCells:
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X0, Y0 = np.meshgrid(xs[:-1], ys[:-1])
    X1, Y1 = np.meshgrid(xs[1:], ys[1:])
    nodes = (0.5 * (X0 + X1) + 0.5j * (Y0 + Y1)).ravel()
    return LocalCells(nodes, rect_measure(X0, X1, Y0, Y1, alpha).ravel())


def _whitney_cells(x0, L, depth, sub, alpha) -> LocalCells:
    nodes, wts = [], []
    for l in range(depth + 1):
        h = L / 2**l
        for j in range(2**l):
            c = _uniform_cells(x0 + j * h, x0 + (j + 1) * h, h / 2, h, sub, alpha)
            nodes.append(c.nodes)
            wts.append(c.weights)
    return LocalCells(np.concatenate(nodes), np.concatenate(wts))


@dataclass
class TestConfiguration:
    x0: float
    length: float
    frak_A: float
    alpha: float
    S: LocalCells
    Q: LocalCells
    tilde: tuple            # (x0, x1, height) of Q_tilde
    median: ComplexMedian
    F: list                 # index arrays into S
    B: list                 # index arrays into Q
    theta1: float
    c1: float
    c2: float
    max_angle_dev: float
    b_S: np.ndarray
    b_Q: np.ndarray
    mass_S: float
    mass_Q: float
    F_masses: list = field(default_factory=list)

    @property
    def z_Q(self) -> complex:
        return complex(self.x0 + 0.5 * self.length, 0.5 * self.length)

    @property
    def w_S(self) -> complex:
        return complex(self.x0 + 0.5 * self.length, (self.frak_A + 0.5) * self.length)

    def to_dict(self) -> dict:
        return {"x0": self.x0, "length": self.length, "frak_A": self.frak_A,
                "median": self.median.to_dict(), "theta1": self.theta1,
                "c1": self.c1, "c2": self.c2, "max_angle_dev": self.max_angle_dev,
                "F_fractions": [m / self.mass_S for m in self.F_masses]}


def build_test_configuration(I, b: Symbol, alpha: float = 0.0, frak_A: float = 8,
                             depth: int = 6, sub: int = 2, n_s: int = 24,
                             mesh: Mesh | None = None) -> TestConfiguration:
    """Test boxes ``S_I``, ``Q_I``, ``Q_tilde`` and the quadrant sets for base interval ``I``.

    ``I`` is a :class:`DyadicInterval` or a pair ``(x0, length)``.  When a mesh
    is given its scale range must contain ``|I|`` and cover ``Q_tilde``; otherwise :class:`CoverageError` lists the missing scales.
    """
    x0, L = (I.x0, I.length) if isinstance(I, DyadicInterval) else (float(I[0]), float(I[1]))
    xc = x0 + 0.5 * L
    tilde = (xc - frak_A * L, xc + frak_A * L, 2 * frak_A * L)
    if mesh is not None:
        c = mesh.cfg
        missing = []
        if tilde[2] > 2.0**c.k_max:
            missing.append(f"above 2^{c.k_max} (need height {tilde[2]:g})")
        if L < 2.0**c.k_min:
            missing.append(f"below 2^{c.k_min} (need {L:g})")
        if max(abs(tilde[0]), abs(tilde[1])) > c.x_extent:
            missing.append(f"x outside [-{c.x_extent:g}, {c.x_extent:g}]")
        if missing:
            raise CoverageError("test configuration not covered: " + "; ".join(missing))
    S = _uniform_cells(x0, x0 + L, frak_A * L, (frak_A + 1) * L, n_s, alpha)
    Q = _whitney_cells(x0, L, depth, sub, alpha)
    bS, bQ = b(S.nodes), b(Q.nodes)
    cm = complex_median(bS, S.weights)
    uS = cm.offsets(bS)
    uQ = cm.offsets(bQ)
    closedS = closed_membership(uS, 1e-13)
    qQ = quadrant_index(uQ)
    F = [np.nonzero(closedS[j])[0] for j in range(4)]
    B = [np.nonzero(qQ == (j + 2) % 4)[0] for j in range(4)]
    d = Q.nodes[:, None] - np.conj(S.nodes)[None, :]
    A_Q = float(rect_measure(x0, x0 + L, 0.0, L, alpha))
    ker = np.abs(d) ** -(2 + alpha)
    z_Q = complex(xc, 0.5 * L)
    w_S = complex(xc, (frak_A + 0.5) * L)
    theta1 = float(-(2 + alpha) * np.angle(z_Q - np.conj(w_S)))
    return TestConfiguration(
        x0, L, frak_A, alpha, S, Q, tilde, cm, F, B, theta1,
        float(ker.min() * A_Q), float(ker.max() * A_Q),
        float(np.max(np.abs(np.angle(d) - np.pi / 2))), bS, bQ,
        float(S.weights.sum()), float(Q.weights.sum()),
        [float(S.weights[f].sum()) for f in F])


def configuration_geometry_ok(cfg: TestConfiguration) -> bool:
    """``Q_I`` and ``S_I`` both lie in ``Q_tilde``."""
    a, b, h = cfg.tilde
    return (a <= cfg.x0 and cfg.x0 + cfg.length <= b
            and (cfg.frak_A + 1) * cfg.length <= h)


def angle_threshold(tol: float = np.pi / 100) -> float:
    """Smallest ``frak_A`` with ``|arg(z - conj(w)) - pi/2| <= tol`` on the closed boxes."""
    return 1.0 / math.tan(tol)


def commutator_on_indicator(cfg: TestConfiguration, j: int, b: Symbol) -> np.ndarray:
    """``[b, P_alpha](chi_{F_j})`` at the nodes of ``B_j`` by direct quadrature."""
    zi = cfg.Q.nodes[cfg.B[j]]
    wi = cfg.S.nodes[cfg.F[j]]
    K = bergman_kernel(zi[:, None], wi[None, :], cfg.alpha)
    diff = cfg.b_Q[cfg.B[j]][:, None] - cfg.b_S[cfg.F[j]][None, :]
    return (diff * K) @ cfg.S.weights[cfg.F[j]]


@dataclass
class LowerBound:
    lhs: float
    rhs_pieces: list
    step1_min_margin: float
    cs_factors: list

    @property
    def rhs(self) -> float:
        return float(sum(self.rhs_pieces))

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs_pieces": self.rhs_pieces, "rhs": self.rhs,
                "step1_min_margin": self.step1_min_margin, "cs_factors": self.cs_factors}


def oscillation_lower_bound(cfg: TestConfiguration, b: Symbol, mu: Weight | None = None,
                            lam: Weight | None = None, positive: bool = False) -> LowerBound:
    """Both ends of the lower-bound chain on one test configuration.

    ``lhs = nu(Q_I)^-1 int_{Q_I} |b - b_{Q_I}| dA_alpha`` and, for each ``j``,
    ``rhs_j = nu(Q_I)^-1 int_{B_j} |[b, P](chi_{F_j})| dA_alpha``.  The
    Cauchy-Schwarz factors ``nu(Q_I)^-1 mu(F_j)^{1/2} lambda^-1(B_j)^{1/2}``
    bound ``rhs_j / ||[b, P]||``.  ``positive=True`` uses the kernel of
    ``P_alpha^+``.
    """
    mu = mu or constant_weight(1.0)
    lam = lam or constant_weight(1.0)
    Qn, Qw = cfg.Q.nodes, cfg.Q.weights
    nu_Q = np.sum(np.sqrt(mu(Qn) / lam(Qn)) * Qw)
    bq = np.sum(cfg.b_Q * Qw) / Qw.sum()
    lhs = float(np.sum(np.abs(cfg.b_Q - bq) * Qw) / nu_Q)
    pieces, cs = [], []
    margin = np.inf
    for j in range(4):
        if len(cfg.B[j]) == 0 or len(cfg.F[j]) == 0:
            pieces.append(0.0)
            cs.append(0.0)
            continue
        zi = Qn[cfg.B[j]]
        wi = cfg.S.nodes[cfg.F[j]]
        K = bergman_kernel(zi[:, None], wi[None, :], cfg.alpha)
        if positive:
            K = np.abs(K)
        diff = cfg.b_Q[cfg.B[j]][:, None] - cfg.b_S[cfg.F[j]][None, :]
        val = (diff * K) @ cfg.S.weights[cfg.F[j]]
        pieces.append(float(np.sum(np.abs(val) * Qw[cfg.B[j]]) / nu_Q))
        beta = (j + 2) * QUARTER + QUARTER / 2
        rot = np.exp(1j * (cfg.median.theta - beta)) * diff
        absd = np.abs(diff)
        ok = absd > 1e-14
        if np.any(ok):
            margin = min(margin, float(np.min((rot.real[ok] - absd[ok] / np.sqrt(2)) / absd[ok])))
        muF = np.sum(mu(wi) * cfg.S.weights[cfg.F[j]])
        lB = np.sum(Qw[cfg.B[j]] / lam(zi))
        cs.append(float(np.sqrt(muF * lB) / nu_Q))
    return LowerBound(lhs, pieces, float(margin), cs)


@dataclass
class Step2Report:
    frak_A: float
    max_im_re: float
    max_abs_re: float
    closed_box_sup: float
    target: float
    passed: bool
    minimal_A: float | None
    sweep: list

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _step2_ratio(cfg: TestConfiguration, j: int = 0):
    zi = cfg.Q.nodes[cfg.B[j]] if len(cfg.B[j]) else cfg.Q.nodes
    wi = cfg.S.nodes[cfg.F[j]] if len(cfg.F[j]) else cfg.S.nodes
    d = zi[:, None] - np.conj(wi)[None, :]
    v = np.exp(1j * cfg.theta1) / d ** (2 + cfg.alpha) if float(cfg.alpha).is_integer() \
        else np.exp(1j * cfg.theta1) * np.exp(-(2 + cfg.alpha) * np.log(d))
    return float(np.max(np.abs(v.imag) / v.real)), float(np.max(np.abs(v) / v.real))


def step2_kernel_real_part_check(cfg: TestConfiguration, alpha: float | None = None,
                                 sweep=range(4, 33), b: Symbol | None = None) -> Step2Report:
    """Nodewise ``|Im(e^{i theta1} k)| / Re(e^{i theta1} k)`` over ``B_1 x F_1``.

    Also reports the supremum over the closed boxes,
    ``tan((2 + alpha) atan(1/A))``, and the smallest ``A`` in ``sweep`` whose
    nodewise ratio meets ``2/A``.
    """
    alpha = cfg.alpha if alpha is None else alpha
    im_re, abs_re = _step2_ratio(cfg)
    rows = []
    minimal = None
    for A in sweep:
        if b is None:
            c = cfg
            if A != cfg.frak_A:
                c = _reshape(cfg, A)
        else:
            c = build_test_configuration((cfg.x0, cfg.length), b, alpha, A)
        r, _ = _step2_ratio(c)
        rows.append((A, r, 2.0 / A))
        if minimal is None and r <= 2.0 / A:
            minimal = A
    target = 2.0 / cfg.frak_A
    return Step2Report(cfg.frak_A, im_re, abs_re,
                       math.tan((2 + alpha) * math.atan(1.0 / cfg.frak_A)), target,
                       im_re <= target, minimal, rows)


def _reshape(cfg: TestConfiguration, A: float) -> TestConfiguration:
    """Same configuration with ``S_I`` moved to height ``A |I|`` and ``F_1 = S_I``."""
    L = cfg.length
    n = int(round(math.sqrt(len(cfg.S.nodes))))
    S = _uniform_cells(cfg.x0, cfg.x0 + L, A * L, (A + 1) * L, n, cfg.alpha)
    out = TestConfiguration(cfg.x0, L, A, cfg.alpha, S, cfg.Q, cfg.tilde, cfg.median,
                            [np.arange(len(S.nodes))] * 4, [np.arange(len(cfg.Q.nodes))] * 4,
                            cfg.theta1, cfg.c1, cfg.c2, cfg.max_angle_dev, cfg.b_S, cfg.b_Q,
                            cfg.mass_S, cfg.mass_Q)
    return out


def disjointified_masses(configs: list[TestConfiguration], j: int = 0,
                         separation: float = 50.0, fraction: float = 1 / 24) -> list[float]:
    """Mass fractions of ``F_{k,j}`` after removing cells inside later ``S_{I_l}``.

    Requires ``separation |I_{k+1}| <= |I_k|``; raises ``AssertionError`` if any
    disjointified set falls below ``fraction`` of ``A_alpha(S_{I_k})``.
    """
    for a, b in zip(configs[:-1], configs[1:]):
        if separation * b.length > a.length:
            raise ValueError("base intervals are not separated enough")
    out = []
    for k, c in enumerate(configs):
        keep = np.ones(len(c.F[j]), bool)
        pts = c.S.nodes[c.F[j]]
        for later in configs[k + 1:]:
            L = later.length
            inside = ((pts.real >= later.x0) & (pts.real < later.x0 + L)
                      & (pts.imag >= later.frak_A * L) & (pts.imag < (later.frak_A + 1) * L))
            keep &= ~inside
        frac = float(c.S.weights[c.F[j]][keep].sum() / c.mass_S)
        assert frac >= fraction, f"disjointified F fell to {frac:.4f} of A(S)"
        out.append(frac)
    return out
