import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from bergman_lab.geometry import (CarlesonBox, DyadicInterval, GeometryError, GlobalConfig, Mesh,
                                  bergman_disk_euclidean, bergman_distance, box_rule,
                                  build_systems, chain_to_top, interval_at, measure_A_alpha,
                                  rect_measure, system_shift, whitney_radius)

points = st.builds(complex, st.floats(-50, 50), st.floats(1e-3, 50))


def test_unit_box_measure():
    I = DyadicInterval("D1", 0, 0)
    assert measure_A_alpha(CarlesonBox.of(I), 0.0) == pytest.approx(1 / math.pi, rel=1e-14)
    J = DyadicInterval("D1", 1, 0)
    assert measure_A_alpha(CarlesonBox.of(J), 0.0) == pytest.approx(4 / math.pi, rel=1e-14)


@pytest.mark.parametrize("alpha", [-0.5, 0.0, 0.7, 2.0])
def test_rect_measure_against_quadrature(alpha):
    f = lambda y, x: (alpha + 1) * (2 * y) ** alpha / math.pi  # noqa: E731
    ref, _ = integrate.dblquad(f, -0.3, 1.1, 0.0, 0.8)
    assert rect_measure(-0.3, 1.1, 0.0, 0.8, alpha) == pytest.approx(ref, rel=1e-9)


def test_box_rule_sums_to_measure():
    _, W = box_rule(0.0, 2.0, 0.0, 2.0, 0.5, layers=40)
    assert W.sum() == pytest.approx(rect_measure(0, 2, 0, 2, 0.5), rel=1e-9)


def test_second_system_shift():
    assert system_shift("D1", 3) == 0.0
    assert system_shift("D2", 0) == pytest.approx(1 / 3)
    assert system_shift("D2", 1) == pytest.approx(-2 / 3)
    with pytest.raises(GeometryError):
        system_shift("D3", 0)


def test_small_systems():
    d1, d2 = build_systems(GlobalConfig(k_min=0, k_max=1, x_extent=2.0))
    assert len(d1) == 6 and len(d2) == 8
    for I in d1 + d2:
        assert I.x1 > -2 and I.x0 < 2


def test_children_and_parent():
    for s in ("D1", "D2"):
        I = DyadicInterval(s, 2, 1)
        a, b = I.children()
        assert a.x0 == pytest.approx(I.x0) and b.x1 == pytest.approx(I.x1)
        assert a.parent() == I and b.parent() == I


def test_chain_length():
    I = DyadicInterval("D1", 0, 0)
    chain = chain_to_top(0.3 + 0.125j, I)
    assert len(chain) == 3
    assert [J.level for J in chain] == [0, -1, -2]
    with pytest.raises(GeometryError):
        chain_to_top(0.3 + 2j, I)


def test_known_distance():
    assert bergman_distance(1j, 2j) == pytest.approx(0.5 * math.log(2), rel=1e-14)


def _corner_radius():
    # cell [0,1] x [1/2, 1], node at 1/2 + 3i/4
    c = 0.5 + 0.75j
    worst = 0.0
    for w in (0.5j, 1 + 0.5j, 1j, 1 + 1j):
        worst = max(worst, math.atanh(abs(c - w) / abs(c - w.conjugate())))
    return worst


def test_whitney_radius(small_mesh):
    assert _corner_radius() == pytest.approx(0.44191, abs=1e-5)
    assert whitney_radius(small_mesh) == pytest.approx(_corner_radius(), rel=1e-12)


def test_disk_euclidean_boundary():
    z, r = 0.4 + 1.3j, 0.8
    c, R = bergman_disk_euclidean(z, r)
    t = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    d = bergman_distance(c + R * np.exp(1j * t), np.full(64, z))
    assert np.allclose(d, r, rtol=1e-10)


@given(points, points, points)
def test_triangle_inequality(a, b, c):
    assert bergman_distance(a, c) <= bergman_distance(a, b) + bergman_distance(b, c) + 1e-9


@given(points, points, st.floats(1e-2, 1e2), st.floats(-10, 10))
def test_distance_invariance(a, b, s, t):
    d = bergman_distance(a, b)
    assert bergman_distance(s * a + t, s * b + t) == pytest.approx(d, rel=1e-6, abs=1e-9)


def test_distance_rejects_lower_half_plane():
    with pytest.raises(GeometryError):
        bergman_distance(1j, -1j)


def test_config_validation():
    with pytest.raises(GeometryError):
        GlobalConfig(alpha=-1.0)
    with pytest.raises(GeometryError):
        GlobalConfig(k_min=3, k_max=3)
    with pytest.raises(GeometryError):
        GlobalConfig(frak_A=2)
    assert GlobalConfig.from_dict({"alpha": 0.5, "unknown": 1}).alpha == 0.5


def test_default_mesh_size():
    m = Mesh(GlobalConfig())
    assert m.N == 1022
    assert np.allclose(m.nodes.imag, 0.75 * m.h)


def test_mesh_cells_tile_region(small_mesh):
    c = small_mesh.cfg
    area = rect_measure(-c.x_extent, c.x_extent, 2.0 ** (c.k_min - 1), 2.0**c.k_max, c.alpha)
    assert small_mesh.total_measure() == pytest.approx(area, rel=1e-12)


def test_mesh_hash_is_deterministic():
    cfg = GlobalConfig(k_min=-2, k_max=1, x_extent=2.0)
    assert Mesh(cfg).hash() == Mesh(cfg).hash()
    assert Mesh(cfg).hash() != Mesh(cfg.with_(alpha=0.5)).hash()


def test_family_incidence(small_mesh):
    for s in ("D1", "D2"):
        fam = small_mesh.family(s)
        for b in range(0, len(fam), 7):
            I = fam.interval(b)
            inside = CarlesonBox.of(I).contains(small_mesh.nodes)
            assert set(np.nonzero(inside)[0]) == set(fam.members(b))


@given(st.sampled_from(["D1", "D2"]), st.integers(-6, 6), st.floats(-100, 100))
def test_interval_at_contains(system, level, x):
    assert interval_at(system, level, x).contains(x)
