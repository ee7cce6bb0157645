import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bergman_lab import median as md
from bergman_lab import symbols as sy
from bergman_lab.geometry import GlobalConfig, Mesh

# dyadic coordinates keep shifts and power-of-two scalings exact
dyadic = st.integers(-40, 40).map(lambda k: k / 8)
clouds = st.lists(st.tuples(dyadic, dyadic, st.floats(0.1, 3)), min_size=5, max_size=40)


def _split(data):
    v = np.array([complex(a, b) for a, b, _ in data])
    m = np.array([w for _, _, w in data])
    return v, m


def test_weighted_median():
    assert md.weighted_median([3, 1, 2], [1, 1, 1]) == 2
    assert md.weighted_median([1, 2, 3], [3, 1, 1]) == 1


def test_four_points():
    cm = md.complex_median([1, -1, 1j, -1j], [1, 1, 1, 1])
    assert cm.center == 0 and cm.theta == 0
    assert np.allclose(cm.masses, 1.0) and np.allclose(cm.closed_masses, 2.0)


def test_constant_values():
    cm = md.complex_median(np.full(7, 2 + 3j), np.arange(1, 8))
    assert cm.center == 2 + 3j and cm.min_fraction == 1.0


@given(clouds, st.builds(complex, dyadic, dyadic), st.sampled_from([0.25, 0.5, 2.0, 8.0]))
def test_equivariance(data, shift, scale):
    v, m = _split(data)
    try:
        cm = md.complex_median(v, m)
    except md.ComplexMedianError:
        return
    moved = md.median_at(scale * v + shift, m, cm.theta)
    assert moved.center == pytest.approx(scale * cm.center + shift, abs=1e-12)
    assert np.allclose(moved.masses, cm.masses)


@given(clouds, st.floats(0, np.pi / 2))
def test_masses_partition_total(data, theta):
    v, m = _split(data)
    cm = md.median_at(v, m, theta)
    assert cm.masses.sum() == pytest.approx(m.sum())
    assert np.all(cm.closed_masses >= cm.masses - 1e-12)


def test_collinear_needs_principal_axis():
    t = np.linspace(-1, 1, 41)
    v = np.exp(0.3j) * t + (1 + 1j)
    m = np.ones_like(t)
    with pytest.raises(md.ComplexMedianError):
        md.complex_median(v, m, fallback=False)
    cm = md.complex_median(v, m)
    assert cm.source == "principal-axis" and cm.min_fraction >= 1 / 16


def test_angle_threshold():
    assert md.angle_threshold() == pytest.approx(31.8205, abs=1e-4)


@pytest.fixture(scope="module")
def configs():
    return {A: md.build_test_configuration((0.0, 1 / 64), sy.holo_log(), frak_A=A)
            for A in (4, 8, 16)}


def test_configuration_structure(configs):
    c = configs[8]
    assert md.configuration_geometry_ok(c)
    assert c.theta1 == pytest.approx(-math.pi)
    assert min(c.F_masses) >= c.mass_S / 16
    assert sum(len(B) for B in c.B) == len(c.Q.nodes)
    assert c.mass_S == pytest.approx((1 / 64) ** 2 / math.pi)


def test_kernel_bracket_tightens(configs):
    ratios = [configs[A].c2 / configs[A].c1 for A in (4, 8, 16)]
    assert all(r > 1 for r in ratios)
    assert ratios[0] > ratios[1] > ratios[2]


def test_step_one_margin(configs):
    for c in configs.values():
        lb = md.oscillation_lower_bound(c, sy.holo_log())
        assert lb.step1_min_margin >= -1e-9
        assert lb.lhs > 0 and lb.rhs > 0


def test_lower_bound_matches_direct_commutator(configs):
    c = configs[8]
    lb = md.oscillation_lower_bound(c, sy.holo_log())
    nu_Q = c.Q.weights.sum()
    for j in range(4):
        v = md.commutator_on_indicator(c, j, sy.holo_log())
        direct = float(np.sum(np.abs(v) * c.Q.weights[c.B[j]]) / nu_Q)
        assert direct == pytest.approx(lb.rhs_pieces[j], rel=1e-12, abs=1e-18)


def test_step_two(configs):
    r = md.step2_kernel_real_part_check(configs[8], sweep=(4, 6, 8, 12, 16))
    assert r.closed_box_sup == pytest.approx(math.tan(2 * math.atan(1 / 8)))
    assert r.max_im_re <= r.closed_box_sup
    assert r.passed and r.minimal_A <= 8
    ratios = [x for _, x, _ in r.sweep]
    assert all(a > b for a, b in zip(ratios, ratios[1:]))


def test_coverage_error():
    mesh = Mesh(GlobalConfig(k_min=-3, k_max=2, x_extent=4.0))
    with pytest.raises(md.CoverageError):
        md.build_test_configuration((0.0, 1 / 64), sy.holo_log(), mesh=mesh)
    with pytest.raises(md.CoverageError):
        md.build_test_configuration((0.0, 1.0), sy.holo_log(), mesh=mesh)


def test_disjointified_masses():
    b = sy.holo_log()
    a = md.build_test_configuration((0.0, 1.0), b)
    c = md.build_test_configuration((0.25, 1 / 64), b)
    fr = md.disjointified_masses([a, c])
    assert all(f >= 1 / 24 for f in fr)
    with pytest.raises(ValueError):
        md.disjointified_masses([a, md.build_test_configuration((0.0, 0.5), b)])
