import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bergman_lab import symbols as sy
from bergman_lab import weights as wt
from bergman_lab.geometry import DyadicInterval, GlobalConfig, Mesh, bergman_disk_euclidean

tiny = Mesh(GlobalConfig(k_min=-2, k_max=1, x_extent=2.0))


def test_constant_symbol_has_zero_norms(small_mesh):
    b = sy.constant(2 - 1j)
    assert sy.bmo_nu_norm(b, None, small_mesh).value == pytest.approx(0, abs=1e-12)
    assert sy.bmo2_norm(b, small_mesh, mode="exact").value == pytest.approx(0, abs=1e-12)
    assert sy.bo_norm(b, small_mesh) == 0
    assert sy.vmo_nu_trace(b, None, small_mesh).verdict


def test_bmo2_of_identity(small_mesh):
    # x and y are uniform on a full square of side h: variance h^2/12 each
    h = 2.0**small_mesh.cfg.k_max
    assert sy.bmo2_norm(sy.identity(), small_mesh, mode="exact").value == pytest.approx(
        h / math.sqrt(6), rel=1e-9)


def test_bo_of_log_height(small_mesh):
    # log(Im w / Im z) ranges over [-2r, 2r] on the Bergman disk of radius r
    r = 1.0
    c, R = bergman_disk_euclidean(1j, r)
    assert math.log((c.imag + R) / (c.imag - R)) / 2 == pytest.approx(2 * r)
    v = sy.bo_norm(sy.log_im(), small_mesh, r)
    assert v == pytest.approx(math.log(4))  # node heights differ by factors of 2
    assert v <= 2 * r


def test_bda_of_conjugate():
    z, r = 0.3 + 1j, 1.0
    _, R = bergman_disk_euclidean(z, r)
    v = sy.bda_disk_residual(sy.conj_identity(), tiny, z, r, 4, quadrature="disk")
    assert v == pytest.approx(R / math.sqrt(2), rel=1e-10)


def test_bda_polynomial_exact(small_mesh):
    table = sy.bda_norm(sy.square(), small_mesh, 1.0, 3).degree_table
    vals = [v for _, v in table]
    assert vals[2] < 1e-10 and vals[3] < 1e-10
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_bda_conditioning_error(small_mesh):
    with pytest.raises(sy.BDAConditioningError):
        sy.bda_disk_residual(sy.identity(), small_mesh, 0.1 + 0.2j, 0.05, 3)


def test_invariant_split_keeps_holomorphic():
    z = np.array([0.2 + 0.5j, -1 + 2j])
    b = sy.holo_log()
    assert np.allclose(sy.disk_average(b, z, 1.0, "invariant", n_r=32, n_t=64), b(z), atol=1e-8)
    assert not np.allclose(sy.disk_average(b, z, 1.0, "area"), b(z), atol=1e-3)


def test_split_components(small_mesh):
    rep = sy.split_bo_ba(sy.conj_log(), small_mesh)
    assert rep.bo_b1 > 0 and rep.ba_b2 > 0 and math.isfinite(rep.ratio)
    z = small_mesh.nodes[:5]
    assert np.allclose(rep.b1(z) + rep.b2(z), sy.conj_log()(z))


@given(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_bmo_homogeneous_and_shift_invariant(c, d):
    b = sy.cauchy()
    base = sy.bmo_nu_norm(b, None, tiny).value
    assert sy.bmo_nu_norm(b.scaled(c, d), None, tiny).value == pytest.approx(
        abs(c) * base, rel=1e-9, abs=1e-12)


def test_bmo_nu_with_weight(small_mesh):
    nu = wt.power_weight(0.5)
    for mode in ("mesh", "exact"):
        v = sy.bmo_nu_norm(sy.log_im(), nu, small_mesh, mode=mode).value
        assert 0 < v < math.inf


@pytest.mark.parametrize("factory,expected", [(sy.cauchy, True), (sy.bump, True),
                                              (sy.log_im, False)])
def test_vmo_verdicts(mesh, factory, expected):
    assert sy.vmo_nu_trace(factory(), None, mesh).verdict is expected


def test_oscillation_chain(small_mesh):
    I = DyadicInterval("D1", 1, 0)
    lhs, rhs = sy.oscillation_chain_bound(sy.holo_log(), I, 0.7 + 0.1j, small_mesh)
    assert 0 < lhs <= 10 * rhs
    lhs, rhs = sy.oscillation_chain_bound(sy.constant(1.0), I, 0.7 + 0.1j, small_mesh)
    assert lhs == pytest.approx(0, abs=1e-12) and rhs == pytest.approx(0, abs=1e-12)


def test_counterexample_symbol():
    b = sy.counterexample_b()
    assert b(np.array([3j]))[0] == 0
    assert abs(b(np.array([0.51j]))[0]) == pytest.approx(0.01**-0.25)


def test_config_factory(tmp_path, small_mesh):
    assert sy.from_config({"kind": "trig", "seed": 3}).name == "trig(seed=3)"
    with pytest.raises(sy.SymbolError):
        sy.from_config({"kind": "nope"})
    v = small_mesh.nodes
    p = tmp_path / "b.csv"
    p.write_text("re,im\n" + "\n".join(f"{z.real},{z.imag}" for z in v))
    g = sy.from_config({"kind": "grid", "file": str(p)})
    assert np.allclose(g.at_nodes(small_mesh), v)
    with pytest.raises(sy.SymbolError):
        g.at_nodes(tiny)
