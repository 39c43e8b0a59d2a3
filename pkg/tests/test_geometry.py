import numpy as np
import pytest

from etherstar import geometry, suites
from etherstar.errors import OffManifoldError


def test_get_model_specs():
    assert geometry.get_model("flat:1").model_id == "flat:1"
    assert geometry.get_model("flat:2").n == 2
    assert geometry.get_model("sphere").model_id == "sphere"
    with pytest.raises(ValueError):
        geometry.get_model("torus")
    with pytest.raises(ValueError):
        geometry.get_model("flat:0")


def test_flat_structure(flat):
    z = np.array([0.3, -0.2])
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert np.array_equal(flat.omega_at(z), J)
    assert np.array_equal(flat.psi_at(z), -J)
    assert flat.dim == 2
    assert not flat.is_compact
    assert flat.branch_count == 1
    assert flat.dm_density(z) == 1.0
    assert np.allclose(flat.christoffel_at(z), 0.0)


def test_flat_reflection_closed_form(flat, rng):
    for _ in range(20):
        x = rng.normal(size=2)
        z = rng.normal(size=2)
        assert np.allclose(flat.reflect(x, z), 2 * x - z, atol=1e-14)
    x = rng.normal(size=2)
    assert np.allclose(flat.reflect(x, x), x, atol=1e-14)
    ds = geometry.reflect_jacobian_chart(flat, x, rng.normal(size=2))
    assert np.allclose(ds, -np.eye(2), atol=1e-9)


def test_flat_ether_form(flat, rng):
    # generating form of the reflection family: 2 J (z - x)
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    for _ in range(10):
        x = rng.normal(size=2)
        z = rng.normal(size=2)
        assert np.allclose(flat.ether_form(x, z), 2 * J @ (z - x),
                           atol=1e-12)


def test_sphere_point_validation(sphere):
    with pytest.raises(OffManifoldError):
        sphere.check_point(np.array([1.0, 0.0, 0.1]))
    with pytest.raises(OffManifoldError):
        sphere.check_point(np.array([1.0, 0.0]))
    p = sphere.project(np.array([3.0, 4.0, 0.0]))
    assert np.allclose(np.linalg.norm(p), 1.0, atol=1e-15)


def test_sphere_frame(sphere, rng):
    for _ in range(20):
        z = suites.sample_point(sphere, rng)
        e1, e2 = sphere.frame_at(z)
        assert abs(np.dot(e1, e2)) < 1e-12
        assert abs(np.dot(e1, z)) < 1e-12
        assert np.allclose(np.cross(e1, e2), z, atol=1e-12)


def test_sphere_chart_matrices(sphere, rng):
    z = suites.sample_point(sphere, rng)
    assert np.allclose(sphere.omega_at(z),
                       np.array([[0.0, -1.0], [1.0, 0.0]]), atol=1e-12)
    assert np.allclose(sphere.psi_at(z),
                       np.array([[0.0, 1.0], [-1.0, 0.0]]), atol=1e-12)
    # psi is the matrix inverse of omega in the chart
    assert np.allclose(sphere.psi_at(z) @ sphere.omega_at(z),
                       np.eye(2), atol=1e-12)


def test_sphere_reflection_axioms(sphere, rng):
    for _ in range(50):
        x = suites.sample_point(sphere, rng)
        z = suites.sample_point(sphere, rng)
        sz = sphere.reflect(x, z)
        assert np.allclose(sz, 2 * np.dot(x, z) * x - z, atol=1e-14)
        assert np.allclose(sphere.reflect(x, sz), z, atol=1e-12)
        assert np.allclose(sphere.reflect(x, x), x, atol=1e-12)


def test_sphere_reflection_symplectic(sphere, rng):
    for _ in range(20):
        x = suites.sample_point(sphere, rng)
        z = suites.sample_near(sphere, rng, x, 0.9)
        ds = geometry.reflect_jacobian_chart(sphere, x, z)
        pulled = ds.T @ sphere.omega_at(sphere.reflect(x, z)) @ ds
        assert np.allclose(pulled, sphere.omega_at(z), atol=1e-7)


def test_sphere_ether_form_antisymmetry(sphere, rng):
    # the generating form is odd under the reflection itself
    for _ in range(20):
        x = suites.sample_point(sphere, rng)
        z = suites.sample_near(sphere, rng, x, 0.9)
        a = sphere.ether_form(x, z)
        b = sphere.ether_form(x, sphere.reflect(x, z))
        assert np.allclose(a, -b, atol=1e-12)
        assert np.allclose(a, 2 * np.cross(x, z), atol=1e-12)


def test_sphere_measure_density(sphere):
    u = np.array([0.2, -0.1])
    expect = (1.0 + np.dot(u, u)) ** -1.5
    assert np.allclose(sphere.dm_density(u), expect, rtol=1e-12)


def test_connection_consistency(flat, sphere, rng):
    # connection extracted from the reflection family matches the
    # model's christoffel data at the chart center
    z = rng.normal(size=2)
    gam = geometry.connection_from_reflections(flat, z)
    assert np.allclose(gam, 0.0, atol=1e-8)
    zs = suites.sample_point(sphere, rng)
    gam = geometry.connection_from_reflections(sphere, zs)
    assert np.allclose(gam, sphere.christoffel_at(zs), atol=1e-6)


def test_nabla_omega_residual(flat, sphere, rng):
    assert geometry.nabla_omega_residual(flat, rng.normal(size=2)) < 1e-10
    zs = suites.sample_point(sphere, rng)
    assert geometry.nabla_omega_residual(sphere, zs) < 1e-6
