"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Criteria 2 and 4-9 run the shipped experiments at their default
configurations (the same runs as ``bergman-lab experiment <id>``), so the
whole file takes a few minutes.  Run it alone with
``python3 tests/test_acceptance.py`` or ``pytest tests/test_acceptance.py``.
"""

import time

import numpy as np
import pytest

from bergman_lab import harness
from bergman_lab import operators as op
from bergman_lab import symbols as sy
from bergman_lab import weights as wt
from bergman_lab.geometry import GlobalConfig, Mesh

RESULTS = {}

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module", autouse=True)
def _summary(request):
    yield
    tr = request.config.pluginmanager.get_plugin("terminalreporter")
    lines = ["", "acceptance summary"]
    for n in sorted(RESULTS):
        ok, detail, secs = RESULTS[n]
        lines.append(f"  criterion {n}: {'PASS' if ok else 'FAIL'}  ({secs:.0f}s)  {detail}")
    for line in lines:
        if tr is not None:
            tr.write_line(line)
        else:
            print(line)


def _record(n, ok, detail, t0):
    RESULTS[n] = (bool(ok), detail, time.perf_counter() - t0)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    return bool(ok)


def _experiment(eid):
    return harness.run_experiment(harness.ExperimentConfig.from_dict({}, eid))


def _fmt_verdicts(rep):
    return ", ".join(f"{k}={'ok' if v else 'no'}" for k, v in rep.verdicts.items())


def test_criterion_1_exact_identities():
    t0 = time.perf_counter()
    mesh = Mesh(GlobalConfig())
    assert mesh.N <= 2048
    P = op.assemble_bergman(mesh)
    b = sy.holo_log()
    scale = np.max(np.abs(P.matrix))

    comm = op.commutator(P, b).matrix
    rhs = op.hankel(P, b).matrix - op.hankel(P, b.conj()).adjoint().matrix
    e_comm = np.max(np.abs(comm - rhs)) / np.max(np.abs(comm))

    parts = op.kernel_split(mesh, eta=0.5, P=P)
    e_split = np.max(np.abs(sum(p.matrix for p in parts) - P.matrix)) / scale

    Pp = op.assemble_berezin_plus(mesh)
    e_abs = np.max(np.abs(np.abs(P.matrix) - Pp.matrix)) / scale

    rng = np.random.default_rng(0)
    w = mesh.quad_weights
    e_pair = 0.0
    for s in ("D1", "D2"):
        Ab, Abs = op.sparse_b_forms(mesh, s, b)
        for _ in range(3):
            f, g = rng.random(mesh.N), rng.random(mesh.N)
            lhs = np.sum((Ab @ f) * g * w)
            rhs_ = np.sum(f * (Abs @ g) * w)
            e_pair = max(e_pair, abs(lhs - rhs_) / abs(lhs))

    errs = {"commutator": e_comm, "split": e_split, "abs": e_abs, "pairing": e_pair}
    ok = all(v <= 1e-12 for v in errs.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in errs.items())
    assert _record(1, ok, detail, t0), detail


def test_criterion_2_reproducing_convergence():
    t0 = time.perf_counter()
    rep = _experiment("reproducing")
    rows = rep.tables["convergence"]
    detail = ("N " + "/".join(str(r["N"]) for r in rows)
              + "; reproducing " + ", ".join(f"{r['reproducing']:.3f}" for r in rows)
              + "; idempotence " + ", ".join(f"{r['idempotence']:.4f}" for r in rows)
              + f"; tol {rep_tol():.0e}")
    assert max(r["N"] for r in rows) >= 4000
    assert _record(2, rep.passed, detail, t0), detail


def rep_tol():
    return harness.load_calibration()["reproducing"]["final_tol"]


def test_criterion_3_weight_characteristics():
    t0 = time.perf_counter()
    mesh = Mesh(GlobalConfig())
    levels = mesh.cfg.k_max - mesh.cfg.k_min + 1
    half = wt.b2_characteristic(wt.power_weight(0.5), mesh)
    const = wt.b2_characteristic(wt.constant(1.0), mesh)
    rep = _experiment("weights-report")
    ok = levels >= 8 and abs(half - 4 / 3) <= 0.02 * 4 / 3 and const == 1.0 and rep.passed
    detail = f"levels {levels}, [y^1/2] {half:.4f} (target 4/3), [1] {const!r}"
    assert _record(3, ok, detail, t0), detail


def test_criterion_4_sparse_domination():
    t0 = time.perf_counter()
    rep = _experiment("sparse")
    c = rep.constants
    n = len({r["function"] for r in rep.tables["functions"]})
    ok = rep.passed and n >= 20
    detail = (f"{n} functions, C {c['sparse_constant']:.2f}, change {c['rel_change']:.1%}; "
              + _fmt_verdicts(rep))
    assert _record(4, ok, detail, t0), detail


def test_criterion_5_bloom():
    t0 = time.perf_counter()
    rep = _experiment("bloom")
    c = rep.constants
    p = harness.DEFAULTS["bloom"]
    ok = rep.passed and len(p["symbols"]) >= 4 and len(p["weight_pairs"]) >= 3
    detail = (f"spread {c['spread']:.2f}, worst change {c['worst_rel_change']:.1%}; "
              + _fmt_verdicts(rep))
    assert _record(5, ok, detail, t0), detail


def test_criterion_6_necessity():
    t0 = time.perf_counter()
    rep = _experiment("necessity")
    c = rep.constants
    n = len(harness.DEFAULTS["necessity"]["intervals"])
    ok = rep.passed and n >= 5
    detail = (f"{n} intervals, step II {c['step2_ratio']:.4f} vs {c['step2_target']:.4f}, "
              f"worst chain {c['worst_chain_constant']:.0f}; " + _fmt_verdicts(rep))
    assert _record(6, ok, detail, t0), detail


def test_criterion_7_counterexample():
    t0 = time.perf_counter()
    rep = _experiment("counterexample")
    c = rep.constants
    detail = (f"min|Pf| {c['min_abs_Pf']:.4f}, B2 {c['b2']:.4f}, growth "
              + ", ".join(f"{g:.0%}" for g in c["growth"]) + "; " + _fmt_verdicts(rep))
    assert _record(7, rep.passed, detail, t0), detail


def test_criterion_8_compactness():
    t0 = time.perf_counter()
    rep = _experiment("compactness")
    res = sorted({r["k_min"] for r in rep.tables["singular_values"]})
    ok = rep.passed and len(res) >= 2
    detail = f"resolutions {res}; " + _fmt_verdicts(rep)
    assert _record(8, ok, detail, t0), detail


def test_criterion_9_nonanalytic():
    t0 = time.perf_counter()
    rep = _experiment("nonanalytic")
    c = rep.constants
    refused = False
    cfg = harness.ExperimentConfig.from_dict(
        {"params": {"sigmas": [{"kind": "apr_counterexample"}]}}, "nonanalytic")
    try:
        harness.run_experiment(cfg)
    except harness.RefusedError:
        refused = True
    ok = rep.passed and refused
    detail = (f"max ratio {c['max_ratio']:.3f}, worst change {c['worst_rel_change']:.1%}, "
              f"counterexample weight refused={refused}; " + _fmt_verdicts(rep))
    assert _record(9, ok, detail, t0), detail


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
