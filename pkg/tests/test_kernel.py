import numpy as np
import pytest

from etherstar import kernel, suites
from etherstar.errors import BranchError, FocalTriple, MembraneChartError


def test_flat_phase_closed_form(flat, rng):
    # membrane phase equals the symplectic area closed form
    for _ in range(50):
        x, y, z = (rng.normal(size=2) for _ in range(3))
        got = kernel.phase(flat, x, y, z)
        assert abs(got - kernel.flat_phase(x, y, z)) < 1e-8


def test_flat_phase_degenerate_rows(flat, rng):
    x = rng.normal(size=2)
    y = rng.normal(size=2)
    # z = y closes one side; x = y zeroes the area entirely
    assert abs(kernel.phase(flat, x, y, y)
               - kernel.flat_phase(x, y, y)) < 1e-10
    assert abs(kernel.phase(flat, x, x, rng.normal(size=2))) < 1e-10


def test_flat_amplitude_constant(flat, rng):
    for _ in range(10):
        x, y, z = (rng.normal(size=2) for _ in range(3))
        assert abs(kernel.amplitude(flat, x, y, z) - 4.0) < 1e-10


def test_flat_kernel_value_assembly(flat, rng):
    x, y, z = (rng.normal(size=2) for _ in range(3))
    hbar = 0.2
    kv = kernel.kernel_value(flat, x, y, z, hbar)
    expect = kv.amplitude * np.exp(1j * kv.phase / hbar) / (2 * np.pi * hbar) ** 2
    assert abs(kv.value - expect) < 1e-12
    assert kv.branch == 0


def test_flat_phase_differential(flat, rng):
    # Hamilton-Jacobi property of the phase in its z slot
    for _ in range(10):
        x, y, z = (rng.normal(size=2) * 0.7 for _ in range(3))
        assert kernel.phase_gradient_residual(flat, x, y, z) < 1e-6


def test_sphere_multiplicity_two(sphere, rng):
    # both branches solve with healthy determinants on cap triples
    for _ in range(40):
        x, y, z = suites.sample_triple(sphere, rng)
        d0 = kernel.solve_triangle(sphere, x, y, z, 0).det_factor
        d1 = kernel.solve_triangle(sphere, x, y, z, 1).det_factor
        assert d0 > 1e-10 and d1 > 1e-10
        # the branch pair shares |det| through the antipodal flip
        assert abs(d0 - d1) < 1e-7 * max(1.0, d0)
    with pytest.raises(BranchError):
        kernel.solve_triangle(sphere, x, y, z, 2)


def test_sphere_solution_reflections(sphere, rng):
    # (x, y, z) are the side midpoints of the solution triangle
    x, y, z = suites.sample_triple(sphere, rng)
    sol = kernel.solve_triangle(sphere, x, y, z, 0)
    assert np.allclose(sphere.reflect(y, sol.b), sol.a, atol=1e-9)
    assert np.allclose(sphere.reflect(x, sol.a), sol.c, atol=1e-9)
    assert np.allclose(sphere.reflect(z, sol.c), sol.b, atol=1e-9)


def test_sphere_focal_triple(sphere):
    # mutually orthogonal triple is exactly focal on both branches
    x = np.array([1.0, 0.0, 0.0])
    y = np.array([0.0, 1.0, 0.0])
    z = np.array([0.0, 0.0, 1.0])
    for branch in (0, 1):
        with pytest.raises(FocalTriple):
            kernel.solve_triangle(sphere, x, y, z, branch)
    # determinant grows quadratically off the focal point
    eps = 1e-3
    znear = np.array([eps, 0.0, 1.0])
    znear = znear / np.linalg.norm(znear)
    det = kernel.solve_triangle(sphere, x, y, znear, 0).det_factor
    assert abs(det - 4.0 * eps ** 2) < 1e-8


def test_sphere_branch_one_membrane_chart(sphere, rng):
    # the second branch's midpoints span more than a hemisphere, so
    # its phase has no single-chart membrane; amplitude still exists
    x, y, z = suites.sample_triple(sphere, rng)
    with pytest.raises(MembraneChartError):
        kernel.phase(sphere, x, y, z, 1)
    assert kernel.amplitude(sphere, x, y, z, 1) > 0.0


def test_sphere_phase_differential(sphere, rng):
    for _ in range(10):
        x, y, z = suites.sample_triple(sphere, rng)
        assert kernel.phase_gradient_residual(sphere, x, y, z) < 1e-4


def test_sphere_amplitude_against_reflection_free(sphere, rng):
    # determinant amplitude agrees with the reflection-free route
    x, y, z = suites.sample_triple(sphere, rng)
    a = kernel.amplitude(sphere, x, y, z)
    b = kernel.reflection_free_amplitude(sphere, x, y, z)
    assert abs(a - b) < 1e-4 * a


def test_transport_residual(sphere, rng):
    x, y, z = suites.sample_triple(sphere, rng)
    assert kernel.transport_residual(sphere, x, y, z) < 1e-3
