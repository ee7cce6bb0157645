import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from bergman_lab import weights as wt
from bergman_lab.geometry import GlobalConfig, Mesh


def _b2_power_oracle(s):
    # <y^s> <y^-s> over a full box (0, h), alpha = 0, by quadrature on h = 1
    a, _ = integrate.quad(lambda y: y**s, 0, 1)
    b, _ = integrate.quad(lambda y: y**-s, 0, 1)
    return a * b


def test_constant_weight(small_mesh):
    w = wt.constant(3.0)
    assert wt.b2_characteristic(w, small_mesh) == pytest.approx(1.0)
    assert wt.apr_constant(w, small_mesh) == pytest.approx(1.0)
    assert wt.binfty_characteristic(w, small_mesh) == pytest.approx(1.0)


def test_b2_half_power(small_mesh):
    assert _b2_power_oracle(0.5) == pytest.approx(4 / 3, rel=1e-8)
    assert wt.b2_characteristic(wt.power_weight(0.5), small_mesh) == pytest.approx(4 / 3, rel=1e-12)


@pytest.mark.parametrize("s", [1.0, 1.5, -1.0])
def test_b2_divergent_powers(small_mesh, s):
    assert wt.b2_characteristic(wt.power_weight(s), small_mesh) == math.inf


@given(st.floats(-0.9, 0.9))
def test_b2_power_closed_form(s):
    mesh = Mesh(GlobalConfig(k_min=-2, k_max=1, x_extent=2.0))
    assert wt.b2_characteristic(wt.power_weight(s), mesh) == pytest.approx(
        max(1.0, _b2_power_oracle(s)), rel=1e-6)


@pytest.mark.parametrize("s", [0.5, -0.5, 2.0])
def test_apr_power(small_mesh, s):
    assert wt.apr_constant(wt.power_weight(s), small_mesh) == pytest.approx(2 ** abs(s), rel=1e-9)


def test_reverse_holder_half_power(small_mesh):
    assert wt.reverse_holder_constant(wt.power_weight(0.5), small_mesh, 2.0) == pytest.approx(
        1.06066, abs=1e-5)
    with pytest.raises(wt.WeightError):
        wt.reverse_holder_constant(wt.power_weight(0.5), small_mesh, 1.0)


@given(st.floats(-0.8, 0.8), st.floats(0.1, 10))
def test_b2_symmetric_and_scale_free(s, c):
    mesh = Mesh(GlobalConfig(k_min=-2, k_max=1, x_extent=2.0))
    w = wt.power_weight(s, c)
    for mode in ("exact", "mesh"):
        a = wt.b2_characteristic(w, mesh, mode=mode)
        assert wt.b2_characteristic(w.reciprocal(), mesh, mode=mode) == pytest.approx(a, rel=1e-9)
        assert wt.b2_characteristic(wt.power_weight(s), mesh, mode=mode) == pytest.approx(
            a, rel=1e-9)


@given(st.floats(-0.9, 0.9))
def test_mesh_b2_at_least_one(s):
    # Cauchy-Schwarz on the same cells
    mesh = Mesh(GlobalConfig(k_min=-2, k_max=1, x_extent=2.0))
    assert wt.b2_characteristic(wt.power_weight(s), mesh, mode="mesh") >= 1.0


def test_truncated_b2_below_exact(mesh):
    w = wt.power_weight(0.5)
    t = wt.b2_characteristic(w, mesh, mode="truncated")
    assert 1.0 < t < wt.b2_characteristic(w, mesh)


def test_apr_counterexample(small_mesh):
    w = wt.apr_counterexample()
    assert math.isfinite(wt.b2_characteristic(w, small_mesh))
    assert wt.apr_constant(w, small_mesh) == math.inf


def test_bloom_nu(small_mesh):
    t = wt.BloomTriple(wt.power_weight(0.5), wt.power_weight(-0.5))
    assert t.check_nodes(small_mesh) < 1e-12
    assert np.allclose(t.nu.at_nodes(small_mesh), small_mesh.nodes.imag**0.5)
    assert np.all(wt.bloom_box_ratios(t.mu, t.lam, small_mesh) >= 1 - 1e-12)


def test_further_weighted_b2_finite(small_mesh):
    v = wt.further_weighted_b2(wt.power_weight(0.5), small_mesh, 0.05)
    assert math.isfinite(v) and v >= 1.0
    with pytest.raises(wt.WeightError):
        wt.further_weighted_b2(wt.power_weight(0.5), small_mesh, 0.5)


def test_nonpositive_weight_rejected(small_mesh):
    with pytest.raises(wt.WeightError):
        wt.constant(0.0)
    with pytest.raises(wt.WeightError):
        wt.grid(np.zeros(small_mesh.N)).at_nodes(small_mesh)


def test_grid_weight_matches_analytic(small_mesh):
    w = wt.power_weight(0.3)
    g = wt.grid(w.at_nodes(small_mesh))
    assert wt.b2_characteristic(g, small_mesh) == pytest.approx(
        wt.b2_characteristic(w, small_mesh, mode="mesh"), rel=1e-12)


def test_from_config_and_report(small_mesh, tmp_path):
    assert wt.from_config({"kind": "power", "s": 0.5}).power == (1.0, 0.5)
    with pytest.raises(wt.WeightError):
        wt.from_config({"kind": "nope"})
    p = tmp_path / "w.csv"
    p.write_text("node,w\n" + "\n".join(f"{i},{v}" for i, v in
                                        enumerate(small_mesh.nodes.imag)))
    assert np.allclose(wt.from_config({"kind": "grid", "file": str(p)}).at_nodes(small_mesh),
                       small_mesh.nodes.imag)
    rep = wt.weight_report(wt.power_weight(0.5), small_mesh).to_dict()
    assert rep["b2_char"] == pytest.approx(4 / 3)
    assert [r["k_min"] for r in rep["convergence"]] == [-3, -5]
