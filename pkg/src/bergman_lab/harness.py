"""Experiment orchestration and report emission.

Each experiment takes an :class:`ExperimentConfig` and returns an
:class:`ExperimentReport` holding per-resolution tables, measured constants
and pass/fail verdicts.  Thresholds come from the shipped calibration file
merged with the ``thresholds`` block of the config; nothing is hard-coded
in the runners.
"""

from __future__ import annotations

import copy
import csv
import json
import math
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import median as md
from . import operators as op
from . import symbols as sy
from . import weights as wt
from .geometry import GeometryError, GlobalConfig, Mesh

EXPERIMENTS = ("bloom", "sparse", "necessity", "compactness", "nonanalytic",
               "counterexample", "weights-report", "reproducing")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


class RefusedError(ValueError):
    """Inputs outside the class an experiment is valid for."""


def load_calibration() -> dict:
    text = resources.files("bergman_lab").joinpath("calibration.json").read_text()
    return json.loads(text)


_P = lambda s: {"kind": "power", "s": s}
_C = {"kind": "constant"}

DEFAULTS = {
    "bloom": {
        "resolutions": [-5, -6],
        "symbols": [{"kind": k} for k in ("holo_log", "cauchy", "exp_iz", "log_z", "identity")],
        "weight_pairs": [[_C, _C], [_P(0.5), _P(0.5)], [_P(-0.5), _P(0.25)]],
        "extra_pairs": [[_P(0.5), _P(-0.5)]],
    },
    "sparse": {
        "resolutions": [-5, -6],
        "n_functions": 20,
        "symbols": [{"kind": k} for k in ("holo_log", "cauchy", "exp_iz", "conj_log", "log_im")],
    },
    "necessity": {
        "resolutions": [-5],
        "intervals": [[0.25, 0.5], [-3.0, 0.25], [2.0, 0.125], [0.5, 0.0625], [-0.5, 0.5],
                      [1.0, 0.03125]],
        "symbols": [{"kind": k} for k in ("holo_log", "cauchy", "exp_iz", "log_z", "identity",
                                          "square", "log_im", "conj_identity", "conj_log",
                                          "bump", "counterexample_b")] + [{"kind": "trig", "seed": 0}],
        "frak_A": 8, "depth": 6, "n_s": 24,
        "step2_sweep": [4, 6, 8, 12, 16, 24, 32],
    },
    "compactness": {
        "resolutions": [-5, -6],
        "vmo_symbol": {"kind": "holo_log"},
        "bmo_symbol": {"kind": "log_z"},
        "etas": [1.0, 0.5, 0.25],
        "split_symbols": [{"kind": "holo_log"}, {"kind": "log_z"}],
    },
    "nonanalytic": {
        "resolutions": [-6, -7],
        "symbols": [{"kind": k} for k in ("log_im", "conj_identity", "conj_log", "bump")]
        + [{"kind": "trig", "seed": 0}],
        "holomorphic_check": [{"kind": "holo_log"}],
        "sigmas": [_C, _P(0.5)],
        "conformal_eta": 0.5,
        "eps_sweep": [0.05, 0.1, 0.2],
    },
    "counterexample": {
        "resolutions": [-5],
        "band_levels": [0, 1, 2, 3, 4],
        "band_side0": 0.125,
        "band_factor": 4,
        "f_scale": 16.0,
        "widen": [0, 2, 4],
    },
    "weights-report": {
        "resolutions": [-5],
        "weights": [_C, _P(0.5), _P(-0.5), {"kind": "conformal", "eta": 0.5},
                    {"kind": "apr_counterexample"}, _P(1.0)],
    },
    "reproducing": {
        "resolutions": [-3, -4, -5],
        "global": {"k_max": 5, "x_extent": 32.0},
        "w0": [0.3, 1.0],
    },
}


@dataclass
class ExperimentConfig:
    experiment: str
    global_cfg: GlobalConfig
    params: dict
    resolutions: list
    seed: int = 0
    output: str | None = None
    thresholds: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict, experiment: str | None = None) -> "ExperimentConfig":
        exp = experiment or d.get("experiment")
        if exp not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {exp!r}; choose from {', '.join(EXPERIMENTS)}")
        params = copy.deepcopy(DEFAULTS[exp])
        params.update(d.get("params", {}))
        g = dict(params.pop("global", {}))
        g.update(d.get("global", {}))
        try:
            gcfg = GlobalConfig.from_dict(g)
        except (GeometryError, TypeError) as e:
            raise ConfigError(str(e)) from e
        res = list(d.get("resolutions", params.pop("resolutions")))
        params.pop("resolutions", None)
        if not res:
            raise ConfigError("at least one resolution is required")
        th = load_calibration().get(exp, {})
        th.update(d.get("thresholds", {}))
        return cls(exp, gcfg, params, res, int(d.get("seed", 0)), d.get("output"), th)

    def mesh(self, k_min: int) -> Mesh:
        return Mesh(self.global_cfg.with_(k_min=int(k_min)))


@dataclass
class ExperimentReport:
    experiment: str
    tables: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    plots: dict = field(default_factory=dict)
    runtime: float = 0.0
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(bool(v) for v in self.verdicts.values())

    def add_row(self, table: str, **row):
        self.tables.setdefault(table, []).append(row)

    def summary(self) -> dict:
        return {"experiment": self.experiment, "passed": self.passed,
                "verdicts": {k: bool(v) for k, v in self.verdicts.items()},
                "constants": _jsonable(self.constants), "notes": self.notes,
                "runtime_s": round(self.runtime, 3)}

    def write(self, outdir) -> Path:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "summary.json", "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
        for name, rows in self.tables.items():
            _write_csv(out / f"table_{name}.csv", rows)
        for name, pts in self.plots.items():
            _write_csv(out / f"plot_{name}.csv", [{"x": x, "y": y} for x, y in pts])
        return out


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return str(v)


def _write_csv(path, rows):
    keys = []
    for r in rows:
        for k in r:
            if k not in keys:
                keys.append(k)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(keys)
        for r in rows:
            w.writerow([_fmt(r.get(k, "")) for k in keys])


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def rel_change(a: float, b: float) -> float:
    """``|b - a| / max(|a|, |b|)``; zero when both vanish."""
    m = max(abs(a), abs(b))
    return 0.0 if m == 0 else abs(b - a) / m


# ---------------------------------------------------------------------------
# bloom


def run_bloom(cfg: ExperimentConfig) -> ExperimentReport:
    """Ratio ``||[b, P]||_{L2(mu) -> L2(lambda)} / ||b||_{BMOA_nu}`` over symbols and weight pairs."""
    th = cfg.thresholds
    rep = ExperimentReport("bloom")
    syms = [sy.from_config(s) for s in cfg.params["symbols"]]
    pairs = [(wt.from_config(a), wt.from_config(b), False) for a, b in cfg.params["weight_pairs"]]
    pairs += [(wt.from_config(a), wt.from_config(b), True)
              for a, b in cfg.params.get("extra_pairs", [])]
    for k in cfg.resolutions:
        mesh = cfg.mesh(k)
        for mu, lam, _ in pairs:
            for w in (mu, lam):
                if not math.isfinite(wt.b2_characteristic(w, mesh)):
                    raise RefusedError(f"weight {w.name} is not in B2; bloom refuses it")
        P = op.assemble_bergman(mesh)
        Pp = op.assemble_berezin_plus(mesh)
        for b in syms:
            C = op.commutator(P, b)
            Cp = op.commutator(Pp, b)
            for mu, lam, extra in pairs:
                nu = wt.bloom_nu(mu, lam)
                n = op.weighted_operator_norm(C, mu, lam, mesh, seed=cfg.seed).value
                npl = op.weighted_operator_norm(Cp, mu, lam, mesh, seed=cfg.seed).value
                bn = sy.bmo_nu_norm(b, nu, mesh, mode="exact").value
                zero = n < th["zero"] and bn < th["zero"]
                rep.add_row("ratios", k_min=k, N=mesh.N, symbol=b.name, mu=mu.name,
                            lam=lam.name, extra=extra, comm_norm=n, comm_plus_norm=npl,
                            bmo_nu=bn, ratio=math.nan if zero else n / bn,
                            ratio_plus=math.nan if zero else npl / bn)
    rows = rep.tables["ratios"]
    core = [r for r in rows if not r["extra"] and math.isfinite(r["ratio"])]
    r = np.array([x["ratio"] for x in core])
    spread = float(r.max() / r.min()) if len(r) else math.nan
    rep.constants.update(min_ratio=float(r.min()), max_ratio=float(r.max()), spread=spread)
    rep.verdicts["spread_bounded"] = spread <= th["spread_bound"]
    worst, worst_extra = 0.0, 0.0
    if len(cfg.resolutions) > 1:
        k0, k1 = cfg.resolutions[-2], cfg.resolutions[-1]
        idx = {(x["symbol"], x["mu"], x["lam"], x["k_min"]): x for x in rows}
        for x in rows:
            if x["k_min"] != k1 or not math.isfinite(x["ratio"]):
                continue
            c = rel_change(idx[(x["symbol"], x["mu"], x["lam"], k0)]["ratio"], x["ratio"])
            rep.add_row("stability", symbol=x["symbol"], mu=x["mu"], lam=x["lam"],
                        extra=x["extra"], rel_change=c)
            if x["extra"]:
                worst_extra = max(worst_extra, c)
            else:
                worst = max(worst, c)
        rep.verdicts["refinement_stable"] = worst < th["stability"]
    rep.constants.update(worst_rel_change=worst, worst_rel_change_extra=worst_extra)
    extra = [x["ratio"] for x in rows if x["extra"] and math.isfinite(x["ratio"])]
    if extra:
        rep.constants["extra_within_bracket"] = bool(
            max(max(extra), r.max()) / min(min(extra), r.min()) <= th["spread_bound"])
    rep.plots["ratios"] = [(i, x["ratio"]) for i, x in enumerate(core)]
    return rep


# ---------------------------------------------------------------------------
# sparse domination


def function_suite(mesh: Mesh, n: int = 20, seed: int = 0) -> list[np.ndarray]:
    """Seeded non-negative test functions on the nodes: indicators, bumps, powers, Poisson tails."""
    rng = np.random.default_rng(seed)
    z = mesh.nodes
    out = []
    for i in range(n):
        kind = i % 4
        c = z[rng.integers(mesh.N)]
        if kind == 0:
            r = abs(c.imag) * rng.uniform(0.5, 2.0)
            out.append((np.abs(z - c) <= r).astype(float))
        elif kind == 1:
            out.append(np.exp(-np.abs(z - c) ** 2 / c.imag**2))
        elif kind == 2:
            out.append(z.imag ** rng.uniform(-0.5, 0.5) * np.exp(-np.abs(z.real - c.real) / 4))
        else:
            out.append(1.0 / (1.0 + np.abs(z - c.real) ** 2))
    return out


def sparse_side(mesh: Mesh, f, A: dict, systems=("D1", "D2")) -> np.ndarray:
    total = np.zeros(mesh.N)
    for s in systems:
        total += A[s].matrix @ np.abs(f) + op.sparse_tower(mesh, s, f)[0]
    return total


def run_sparse(cfg: ExperimentConfig) -> ExperimentReport:
    """Nodewise constants in ``P+ f <= C sum_j A_j f`` and in the commutator form."""
    th = cfg.thresholds
    rep = ExperimentReport("sparse")
    syms = [sy.from_config(s) for s in cfg.params["symbols"]]
    consts, cconsts = {}, {}
    for k in cfg.resolutions:
        mesh = cfg.mesh(k)
        Pp = op.assemble_berezin_plus(mesh)
        A = {s: op.sparse_averaging(mesh, s) for s in ("D1", "D2")}
        best = 0.0
        suite = function_suite(mesh, cfg.params["n_functions"], cfg.seed)
        for i, f in enumerate(suite):
            lhs = Pp.matrix @ f
            rhs = sparse_side(mesh, f, A)
            c = float(np.max(lhs / rhs))
            best = max(best, c)
            rep.add_row("functions", k_min=k, N=mesh.N, function=i, constant=c)
        consts[k] = best
        cbest = 0.0
        for b in syms:
            C = op.commutator(Pp, b).matrix
            forms = {s: op.sparse_b_forms(mesh, s, b) for s in ("D1", "D2")}
            for i, f in enumerate(suite[:5]):
                lhs = np.abs(C @ f)
                rhs = np.zeros(mesh.N)
                for s, (Ab, Abs) in forms.items():
                    _, tb, tbs = op.sparse_tower(mesh, s, f, b)
                    rhs += Ab.matrix @ f + Abs.matrix @ f + tb + tbs
                ok = rhs > 0
                c = float(np.max(lhs[ok] / rhs[ok])) if ok.any() else 0.0
                if np.any((~ok) & (lhs > 1e-14)):
                    c = math.inf
                cbest = max(cbest, c)
                rep.add_row("commutator", k_min=k, symbol=b.name, function=i, constant=c)
        cconsts[k] = cbest
        rep.add_row("constants", k_min=k, N=mesh.N, sparse_constant=best, commutator_constant=cbest)
    last = cfg.resolutions[-1]
    rep.constants.update(sparse_constant=consts[last], commutator_constant=cconsts[last])
    rep.verdicts["one_constant"] = consts[last] <= th["constant_bound"]
    rep.verdicts["commutator_finite"] = math.isfinite(cconsts[last])
    if len(cfg.resolutions) > 1:
        c = rel_change(consts[cfg.resolutions[-2]], consts[last])
        rep.constants["rel_change"] = c
        rep.verdicts["refinement_stable"] = c < th["stability"]
    rep.plots["constants"] = [(k, consts[k]) for k in cfg.resolutions]
    return rep


# ---------------------------------------------------------------------------
# necessity


def run_necessity(cfg: ExperimentConfig) -> ExperimentReport:
    """Lower-bound chain over base intervals and the symbol library."""
    th = cfg.thresholds
    p = cfg.params
    rep = ExperimentReport("necessity")
    mesh = cfg.mesh(cfg.resolutions[0])
    P = op.assemble_bergman(mesh)
    Pp = op.assemble_berezin_plus(mesh)
    A = p.get("frak_A", cfg.global_cfg.frak_A)
    mass_ok, step1_ok = True, True
    per_symbol = {}
    cs_ratio = 0.0
    for spec in p["symbols"]:
        b = sy.from_config(spec)
        cn = op.weighted_operator_norm(op.commutator(P, b), None, None, mesh, seed=cfg.seed).value
        cpn = op.weighted_operator_norm(op.commutator(Pp, b), None, None, mesh, seed=cfg.seed).value
        for x0, L in p["intervals"]:
            conf = md.build_test_configuration((x0, L), b, mesh.alpha, A, p["depth"], n_s=p["n_s"],
                                               mesh=mesh)
            fr = min(conf.F_masses) / conf.mass_S
            mass_ok &= fr >= th["mass_fraction"] - th["mass_slack"]
            lb = md.oscillation_lower_bound(conf, b)
            lbp = md.oscillation_lower_bound(conf, b, positive=True)
            if math.isfinite(lb.step1_min_margin):
                step1_ok &= lb.step1_min_margin >= -th["step1_slack"]
            zero = lb.lhs < 1e-12
            chain = math.nan if zero else lb.lhs / lb.rhs
            chainp = math.nan if zero else lb.lhs / lbp.rhs
            cs = [r / (cn * c) for r, c in zip(lb.rhs_pieces, lb.cs_factors) if c > 0 and cn > 0]
            cs_ratio = max([cs_ratio] + cs)
            rep.add_row("configurations", symbol=b.name, x0=x0, length=L,
                        median_source=conf.median.source, min_F_fraction=fr,
                        lhs=lb.lhs, rhs=lb.rhs, rhs_plus=lbp.rhs, chain_constant=chain,
                        chain_constant_plus=chainp, comm_norm=cn, comm_plus_norm=cpn,
                        lhs_over_norm=math.nan if cn == 0 else lb.lhs / cn,
                        step1_margin=lb.step1_min_margin, c1=conf.c1, c2=conf.c2)
            if not zero:
                per_symbol.setdefault(b.name, []).append(chain)
    uniform = len(p["intervals"]) >= 5
    worst_chain, worst_spread = 0.0, 1.0
    for name, vals in per_symbol.items():
        v = np.array(vals)
        spread = float(v.max() / v.min())
        worst_chain = max(worst_chain, float(v.max()))
        worst_spread = max(worst_spread, spread)
        rep.add_row("uniform", symbol=name, intervals=len(v), max_constant=float(v.max()),
                    min_constant=float(v.min()), spread=spread)
        uniform &= bool(v.max() <= th["chain_bound"] and spread <= th["uniform_spread"])
    # Step II on a symbol-independent configuration
    conf = md.build_test_configuration(tuple(p["intervals"][0]), sy.identity(), mesh.alpha, A,
                                       p["depth"], n_s=p["n_s"])
    s2 = md.step2_kernel_real_part_check(conf, sweep=p["step2_sweep"])
    for a, r, target in s2.sweep:
        rep.add_row("step2", frak_A=a, max_im_re=r, target=target, passes=r <= target)
    rep.plots["step2"] = [(a, r) for a, r, _ in s2.sweep]
    rep.constants.update(step2_ratio=s2.max_im_re, step2_target=th["step2_factor"] / A,
                         step2_closed_box_sup=s2.closed_box_sup, step2_minimal_A=s2.minimal_A,
                         step2_abs_over_re=s2.max_abs_re, kernel_bracket=conf.c2 / conf.c1,
                         angle_threshold=md.angle_threshold(), max_angle_dev=conf.max_angle_dev,
                         worst_chain_constant=worst_chain, worst_spread=worst_spread,
                         cauchy_schwarz_ratio=cs_ratio)
    rep.verdicts["median_masses"] = bool(mass_ok)
    rep.verdicts["step1_angle"] = bool(step1_ok)
    rep.verdicts["step2_ratio"] = s2.max_im_re <= th["step2_factor"] / A
    rep.verdicts["uniform_constant"] = bool(uniform)
    return rep


# ---------------------------------------------------------------------------
# compactness


def matched_symbols(vmo: sy.Symbol, bmo: sy.Symbol, mesh: Mesh):
    """Both symbols rescaled to unit truncated BMO norm."""
    nv = sy.bmo_nu_norm(vmo, None, mesh, mode="exact").value
    nb = sy.bmo_nu_norm(bmo, None, mesh, mode="exact").value
    return vmo.scaled(1.0 / nv), bmo.scaled(1.0 / nb)


def run_compactness(cfg: ExperimentConfig) -> ExperimentReport:
    """Kernel-split table and singular-value decay at matched BMO norm."""
    th = cfg.thresholds
    p = cfg.params
    rep = ExperimentReport("compactness")
    kk, top = th["k_from"], th["top_k"]
    decay_ok = True
    for k in cfg.resolutions:
        mesh = cfg.mesh(k)
        P = op.assemble_bergman(mesh)
        v, b = matched_symbols(sy.from_config(p["vmo_symbol"]), sy.from_config(p["bmo_symbol"]), mesh)
        sv = op.singular_values(op.commutator(P, v), None, None, mesh, top, seed=cfg.seed)
        sb = op.singular_values(op.commutator(P, b), None, None, mesh, top, seed=cfg.seed)
        for i in range(top):
            rep.add_row("singular_values", k_min=k, N=mesh.N, index=i + 1, vmo=sv[i], bmo=sb[i])
        decay_ok &= bool(np.all(sv[kk - 1:] < sb[kk - 1:]))
        rep.plots[f"sv_vmo_k{k}"] = [(i + 1, s) for i, s in enumerate(sv)]
        rep.plots[f"sv_bmo_k{k}"] = [(i + 1, s) for i, s in enumerate(sb)]
        if k == cfg.resolutions[0]:
            for spec in p["split_symbols"]:
                s = sy.from_config(spec)
                tr = sy.vmo_nu_trace(s, None, mesh)
                rep.add_row("vmo_traces", symbol=s.name, verdict=tr.verdict,
                            small_scale=";".join(f"{t:.4g}" for _, t in tr.small_scale_trace),
                            far=";".join(f"{t:.4g}" for _, t in tr.far_trace))
                for eta in p["etas"]:
                    pieces = op.kernel_split(mesh, eta=eta, P=P)
                    norms = [op.weighted_operator_norm(op.commutator(pc, s), None, None, mesh,
                                                       seed=cfg.seed).value for pc in pieces[:3]]
                    hs = op.hilbert_schmidt_norm(op.commutator(pieces[3], s), None, None, mesh)
                    rep.add_row("kernel_split", symbol=s.name, eta=eta, norm_K0=norms[0],
                                norm_K1=norms[1], norm_K2=norms[2], hs_K3=hs)
    rep.verdicts["decay_dichotomy"] = decay_ok
    return rep


# ---------------------------------------------------------------------------
# non-analytic symbols


def run_nonanalytic(cfg: ExperimentConfig) -> ExperimentReport:
    """Ratio ``||[b, P]||_{L2(sigma)} / ||b||_{BMO2}`` for sigma in B2 and APR."""
    th = cfg.thresholds
    p = cfg.params
    rep = ExperimentReport("nonanalytic")
    sigmas = [wt.from_config(s) for s in p["sigmas"]]
    syms = [sy.from_config(s) for s in p["symbols"]]
    holo = [sy.from_config(s) for s in p.get("holomorphic_check", [])]
    gate_mesh = cfg.mesh(cfg.resolutions[0])
    for s in sigmas:
        gate(s, gate_mesh)
    ratios = {}
    holo_names = {b.name for b in holo}
    for k in cfg.resolutions:
        mesh = cfg.mesh(k)
        P = op.assemble_bergman(mesh)
        for b in syms + holo:
            C = op.commutator(P, b)
            bn = sy.bmo2_norm(b, mesh, mode="exact").value
            for s in sigmas:
                n = op.weighted_operator_norm(C, s, s, mesh, seed=cfg.seed).value
                r = n / bn if bn > 0 else math.nan
                ratios[(b.name, s.name, k)] = r
                rep.add_row("ratios", k_min=k, N=mesh.N, symbol=b.name, sigma=s.name,
                            holomorphic=b.name in holo_names, comm_norm=n, bmo2=bn, ratio=r)
    last = cfg.resolutions[-1]
    core = [v for (b, s, k), v in ratios.items()
            if k == last and b in {x.name for x in syms} and math.isfinite(v)]
    rep.constants["max_ratio"] = max(core)
    rep.verdicts["ratio_bounded"] = max(core) <= th["ratio_bound"]
    if len(cfg.resolutions) > 1:
        prev = cfg.resolutions[-2]
        worst = max(rel_change(ratios[(b.name, s.name, prev)], ratios[(b.name, s.name, last)])
                    for b in syms for s in sigmas)
        rep.constants["worst_rel_change"] = worst
        rep.verdicts["refinement_stable"] = worst < th["stability"]
    # split path, Carleson constant and the further B2 condition at the first resolution
    mesh = gate_mesh
    P = op.assemble_bergman(mesh)
    sig = sigmas[-1]
    for b in syms:
        sp = sy.split_bo_ba(b, mesh, cfg.global_cfg.bergman_radius, measure="invariant")
        hb = op.weighted_operator_norm(op.hankel(P, sp.b1), sig, sig, mesh, seed=cfg.seed).value
        carleson = max(float(np.max(mesh.family(s).averages(np.abs(sp.b2.at_nodes(mesh)) ** 2,
                                                            mesh.quad_weights)))
                       for s in ("D1", "D2"))
        rep.add_row("split", symbol=b.name, sigma=sig.name, bo_b1=sp.bo_b1, hankel_b1=hb,
                    hankel_over_bo=hb / sp.bo_b1 if sp.bo_b1 > 0 else math.nan,
                    ba_b2=sp.ba_b2, carleson_b2=carleson)
    conf = wt.conformal(p["conformal_eta"])
    for s in sigmas + [conf]:
        for eps in p["eps_sweep"]:
            v = wt.further_weighted_b2(s, mesh, eps)
            rep.add_row("further_b2", sigma=s.name, eps=eps, value=v, finite=math.isfinite(v))
    C = op.commutator(P, syms[0])
    rep.add_row("conformal", sigma=conf.name, apr=wt.apr_constant(conf, mesh),
                b2=wt.b2_characteristic(conf, mesh, mode="mesh"),
                ratio=op.weighted_operator_norm(C, conf, conf, mesh, seed=cfg.seed).value
                / sy.bmo2_norm(syms[0], mesh, mode="exact").value)
    rep.verdicts["further_b2_finite"] = all(r["finite"] for r in rep.tables["further_b2"])
    return rep


def gate(sigma: wt.Weight, mesh: Mesh):
    """Refuse weights outside ``B2`` and ``APR``."""
    if not math.isfinite(wt.apr_constant(sigma, mesh)):
        raise RefusedError(f"{sigma.name} is not APR; use the counterexample experiment")
    if not math.isfinite(wt.b2_characteristic(sigma, mesh)):
        raise RefusedError(f"{sigma.name} is not in B2")


# ---------------------------------------------------------------------------
# counterexample


DISK_C = 0.5j
DISK_R = 0.25


def band_rule(side: float, n: int = 16):
    """Uniform rows of height ``side`` across ``D(i/2, 1/4)``, Gauss along each chord.

    Returns nodes, ``dA_0`` weights (with the ``1/pi``) and row heights.
    """
    rows = int(round(2 * DISK_R / side))
    y = DISK_C.imag - DISK_R + (np.arange(rows) + 0.5) * side
    half = np.sqrt(np.maximum(DISK_R**2 - (y - DISK_C.imag) ** 2, 0.0))
    g, gw = np.polynomial.legendre.leggauss(n)
    Z = half[:, None] * g[None, :] + 1j * y[:, None]
    W = half[:, None] * gw[None, :] * side / np.pi
    return Z.ravel(), W.ravel()


def run_counterexample(cfg: ExperimentConfig) -> ExperimentReport:
    """The APR-failing weight where the commutator is unbounded."""
    th = cfg.thresholds
    p = cfg.params
    rep = ExperimentReport("counterexample")
    sigma = wt.apr_counterexample()
    b = sy.counterexample_b()
    scale = p["f_scale"]
    mesh = cfg.mesh(cfg.resolutions[0])
    rep.constants["apr"] = wt.apr_constant(sigma, mesh)
    conv = wt.convergence_table(sigma, mesh.cfg, tuple(p["widen"]), mode="exact")
    for r in conv:
        rep.add_row("b2", **r)
    vals = [r["b2"] for r in conv]
    rep.constants["b2"] = vals[-1]
    rep.verdicts["b2_stable"] = all(math.isfinite(v) for v in vals) and \
        rel_change(vals[0], vals[-1]) < th["b2_stability"]
    # pointwise bracket on the disk
    Zs, Ws = band_rule(2.0 ** -6)
    ang = np.linspace(0, 2 * np.pi, 48, endpoint=False)
    probe = np.concatenate([[DISK_C], (DISK_C + np.outer(np.linspace(0.02, 0.999, 12) * DISK_R,
                                                           np.exp(1j * ang))).ravel()])
    K = op.bergman_kernel(probe[:, None], Zs[None, :], 0.0)
    pf = scale * (K @ Ws)
    Zb, Wb = sy.graded_disk_rule(DISK_C, DISK_R, (0.5,), levels=30, n=10)
    Kb = op.bergman_kernel(probe[:, None], Zb[None, :], 0.0)
    pbf = scale * (Kb @ (b(Zb) * Wb / np.pi))
    rep.constants.update(min_abs_Pf=float(np.abs(pf).min()), pf_center=float(abs(pf[0])),
                         max_abs_Pbf=float(np.abs(pbf).max()))
    rep.verdicts["pf_lower_bound"] = float(np.abs(pf).min()) >= th["pf_floor"] - th["pf_slack"]
    rep.verdicts["pbf_bounded"] = bool(np.isfinite(pbf).all())
    # divergence trace in the refinement band
    trace = []
    for lv in p["band_levels"]:
        side = p["band_side0"] / p["band_factor"] ** lv
        Z, W = band_rule(side)
        Kz = op.bergman_kernel(Z[:, None], Zs[None, :], 0.0)
        pfz = scale * (Kz @ Ws)
        val = float(np.sum(np.abs(b(Z)) ** 2 * np.abs(pfz) ** 2 * sigma(Z) * W))
        trace.append(val)
        rep.add_row("divergence", level=lv, side=side, nodes=len(Z), integral=val)
    growth = [trace[i + 1] / trace[i] - 1 for i in range(len(trace) - 1)]
    incr = np.diff(trace)
    for i, g in enumerate(growth):
        rep.tables["divergence"][i + 1]["growth"] = g
    n = th["levels"]
    rep.constants.update(growth=growth, increments=incr.tolist())
    rep.verdicts["strictly_increasing"] = bool(np.all(incr > 0))
    rep.verdicts["growth_per_level"] = len(growth) >= n and all(g >= th["growth"] for g in growth[:n])
    rep.verdicts["no_plateau"] = bool(np.all(incr[1:] >= 0.95 * incr[:-1]))
    rep.plots["divergence"] = list(zip(p["band_levels"], trace))
    return rep


# ---------------------------------------------------------------------------
# weights report and reproducing study


def run_weights_report(cfg: ExperimentConfig) -> ExperimentReport:
    th = cfg.thresholds
    rep = ExperimentReport("weights-report")
    mesh = cfg.mesh(cfg.resolutions[0])
    for spec in cfg.params["weights"]:
        w = wt.from_config(spec)
        r = wt.weight_report(w, mesh)
        row = {"weight": w.name, "b2_exact": r.b2_char, "b2_truncated": math.nan,
               "b2_mesh": wt.b2_characteristic(w, mesh, mode="mesh") if _positive(w, mesh) else math.inf,
               "apr": r.apr_const, "binfty": r.binfty_char}
        if w.analytic:
            row["b2_truncated"] = wt.b2_characteristic(w, mesh, mode="truncated")
        for rr, v in r.rh_exponent_table:
            row[f"rh_{rr}"] = v
        rep.add_row("weights", **row)
        for c in r.convergence:
            rep.add_row("convergence", weight=w.name, **c)
    levels = mesh.cfg.k_max - mesh.cfg.k_min + 1
    half = next(r for r in rep.tables["weights"] if r["weight"] == wt.power_weight(0.5).name)
    const = next(r for r in rep.tables["weights"] if r["weight"] == wt.constant(1.0).name)
    rep.constants.update(levels=levels, b2_half=half["b2_exact"], b2_const=const["b2_exact"])
    rep.verdicts["power_half"] = levels >= th["min_levels"] and \
        abs(half["b2_exact"] - th["b2_target"]) <= th["b2_tol"] * th["b2_target"]
    rep.verdicts["constant_one"] = const["b2_exact"] == 1.0
    return rep


def _positive(w, mesh) -> bool:
    try:
        w.at_nodes(mesh)
        return True
    except wt.WeightError:
        return False


def reproducing_errors(mesh: Mesh, w0: complex) -> tuple[float, float]:
    """``||P k_w0 - k_w0|| / ||k_w0||`` and ``||P^2 - P||`` in ``L2(dA_alpha)``."""
    P = op.assemble_bergman(mesh)
    a = mesh.alpha
    k = op.bergman_kernel(mesh.nodes, np.full(mesh.N, w0), a)
    w = mesh.quad_weights
    nrm = lambda v: float(np.sqrt(np.sum(np.abs(v) ** 2 * w)))
    rep = nrm(P.matrix @ k - k) / nrm(k)
    # P is self-adjoint in L2(w); its conjugate is Hermitian, so ||P^2 - P|| = max |l^2 - l|
    H = op.conjugated_matrix(P, None, None, mesh)
    lam = np.linalg.eigvalsh(0.5 * (H + H.conj().T))
    return rep, float(np.max(np.abs(lam**2 - lam)))


def run_reproducing(cfg: ExperimentConfig) -> ExperimentReport:
    th = cfg.thresholds
    rep = ExperimentReport("reproducing")
    w0 = complex(*cfg.params["w0"])
    errs, idem = [], []
    for k in cfg.resolutions:
        mesh = cfg.mesh(k)
        e, d = reproducing_errors(mesh, w0)
        errs.append(e)
        idem.append(d)
        rep.add_row("convergence", k_min=k, N=mesh.N, reproducing=e, idempotence=d)
    rep.plots["reproducing"] = list(zip(cfg.resolutions, errs))
    rep.constants.update(final_reproducing=errs[-1], final_idempotence=idem[-1])
    rep.verdicts["reproducing_monotone"] = all(b < a for a, b in zip(errs, errs[1:]))
    rep.verdicts["idempotence_monotone"] = all(b < a for a, b in zip(idem, idem[1:]))
    rep.verdicts["final_tolerance"] = errs[-1] <= th["final_tol"] and idem[-1] <= th["final_tol"]
    return rep


RUNNERS = {"bloom": run_bloom, "sparse": run_sparse, "necessity": run_necessity,
           "compactness": run_compactness, "nonanalytic": run_nonanalytic,
           "counterexample": run_counterexample, "weights-report": run_weights_report,
           "reproducing": run_reproducing}


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    t = time.perf_counter()
    rep = RUNNERS[cfg.experiment](cfg)
    rep.runtime = time.perf_counter() - t
    if cfg.output:
        rep.write(cfg.output)
    return rep
