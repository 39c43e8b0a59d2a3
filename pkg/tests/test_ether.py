import numpy as np
import pytest

from etherstar import ether, suites

TIGHT = ether.FlowConfig(steps_per_unit=1024)


def test_flat_exp_is_translation(flat, rng):
    for _ in range(10):
        x = rng.normal(size=2)
        v = rng.normal(size=2)
        assert np.allclose(ether.exp_map(flat, x, v), x + v, atol=1e-12)


def test_flat_log_roundtrip(flat, rng):
    x = rng.normal(size=2)
    b = rng.normal(size=2)
    v = ether.log_map(flat, x, b)
    assert np.allclose(ether.exp_map(flat, x, v), b, atol=1e-10)


def test_sphere_exp_log_roundtrip(sphere, rng):
    for _ in range(15):
        x = suites.sample_point(sphere, rng)
        e1, e2 = sphere.frame_at(x)
        c = rng.normal(size=2) * 0.4
        v = c[0] * e1 + c[1] * e2
        b = ether.exp_map(sphere, x, v, TIGHT)
        assert abs(np.linalg.norm(b) - 1.0) < 1e-10
        w = ether.log_map(sphere, x, b, TIGHT)
        assert np.allclose(w, v, atol=1e-9)


def test_geodesic_symmetry(flat, sphere, rng):
    # reflection reverses the exponential map
    for m in (flat, sphere):
        for _ in range(15):
            x = suites.sample_point(m, rng)
            if m.is_compact:
                e1, e2 = m.frame_at(x)
                c = rng.normal(size=2) * 0.4
                v = c[0] * e1 + c[1] * e2
            else:
                v = rng.normal(size=2) * 0.5
            plus = ether.exp_map(m, x, v, TIGHT)
            minus = ether.exp_map(m, x, -v, TIGHT)
            assert np.allclose(m.reflect(x, plus), minus, atol=1e-8)


def test_zero_curvature(flat, sphere, rng):
    for m in (flat, sphere):
        worst = 0.0
        for _ in range(25):
            x = suites.sample_point(m, rng)
            z = suites.sample_near(m, rng, x, 0.6)
            worst = max(worst, ether.zero_curvature_residual(m, x, z))
        assert worst < 1e-6


def test_flow_point_scaling(flat, rng):
    # the v-flow from x runs x + 2vt, so t = 1/2 lands on Exp_x(v)
    x = rng.normal(size=2)
    v = rng.normal(size=2)
    assert np.allclose(ether.flow_point(flat, x, v, x, 0.5), x + v,
                       atol=1e-10)
    assert np.allclose(ether.flow_point(flat, x, v, x, 0.25), x + 0.5 * v,
                       atol=1e-10)


def test_translate_composition(flat, rng):
    # translating along a two leg path composes the leg translations
    x = rng.normal(size=2) * 0.3
    a = x + np.array([0.4, 0.1])
    b = a + np.array([-0.2, 0.3])
    z = rng.normal(size=2) * 0.3
    one = ether.translate(flat, [x, a, b], z, TIGHT)
    two = ether.translate(flat, [a, b], ether.translate(flat, [x, a], z, TIGHT), TIGHT)
    assert np.allclose(one, two, atol=1e-8)


def test_sphere_log_antipodal_rejected(sphere):
    x = np.array([0.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        ether.log_map(sphere, x, -x)


def test_ell_invert_roundtrip(flat, rng):
    # the momentum map inverse reproduces the covector it came from
    x = rng.normal(size=2) * 0.5
    eta = rng.normal(size=2) * 0.5
    z = ether.ell_invert(flat, x, eta)
    chart = flat.chart(x)
    u = chart.to_chart(z)
    # flat closed form: ell(x, z) = 2 J (z - x) on the centered chart
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert np.allclose(2 * J @ u, eta, atol=1e-8)
