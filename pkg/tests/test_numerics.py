import numpy as np
import pytest

from etherstar import numerics
from etherstar.errors import NewtonDiverged


def test_rk4_exponential():
    out = numerics.rk4(lambda y: y, np.array([1.0]), 1.0, 256)
    assert abs(out[0] - np.e) < 1e-9


def test_rk4_sampled_shape():
    ys = numerics.rk4_sampled(lambda y: -y, np.array([1.0]), 1.0, 64)
    assert ys.shape == (65, 1)
    assert abs(ys[-1, 0] - np.exp(-1.0)) < 1e-9


def test_newton_scalar_root():
    root = numerics.newton(lambda v: np.array([np.cos(v[0]) - v[0]]),
                           np.array([0.5]))
    assert abs(np.cos(root[0]) - root[0]) < 1e-12


def test_newton_divergence():
    with pytest.raises(NewtonDiverged):
        numerics.newton(lambda v: np.array([v[0] ** 2 + 1.0]),
                        np.array([1.0]), max_iter=10)


def test_fd_derivatives():
    f = lambda v: float(np.sin(v[0]) * v[1])
    x = np.array([0.4, 1.3])
    g = numerics.fd_gradient(f, x)
    assert np.allclose(g, [np.cos(0.4) * 1.3, np.sin(0.4)], atol=1e-9)
    h = numerics.fd_hessian(f, x)
    assert abs(h[0, 1] - np.cos(0.4)) < 1e-6
    assert abs(h[0, 0] + np.sin(0.4) * 1.3) < 1e-6


def test_loglog_slope_exact():
    hs = [0.1, 0.05, 0.025]
    errs = [2.0 * h ** 3 for h in hs]
    assert abs(numerics.loglog_slope(hs, errs) - 3.0) < 1e-12


def test_shoelace_unit_square():
    pts = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    assert abs(abs(numerics.shoelace(pts)) - 1.0) < 1e-14


def test_solid_angle_octant():
    a = np.array([1.0, 0.0, 0.0])
    b = np.array([0.0, 1.0, 0.0])
    c = np.array([0.0, 0.0, 1.0])
    assert abs(abs(numerics.solid_angle(a, b, c)) - np.pi / 2) < 1e-12


def test_sphere_area_grid():
    pts, wts = numerics.sphere_area_grid(24, 48)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-14)
    assert abs(wts.sum() - 4 * np.pi) < 1e-12
    # grid integrates a smooth harmonic exactly enough: z^2 -> 4pi/3
    val = float(np.sum(wts * pts[:, 2] ** 2))
    assert abs(val - 4 * np.pi / 3) < 1e-12


def test_gauss_legendre():
    x, w = numerics.gauss_legendre(0.0, 2.0, 8)
    assert abs(np.sum(w * x ** 3) - 4.0) < 1e-12


def test_richardson():
    # eliminate the leading h^2 term of a model sequence
    exact = 1.7
    coarse = exact + 4e-3
    fine = exact + 1e-3
    assert abs(numerics.richardson(coarse, fine, 2) - exact) < 1e-12
