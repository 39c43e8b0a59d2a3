import numpy as np
import pytest

from etherstar import hermite
from etherstar.errors import TruncationError


def test_ladder_commutator():
    a = hermite.ladder(12)
    comm = a @ a.T - a.T @ a
    # truncation corrupts only the last diagonal entry
    assert np.allclose(comm[:-1, :-1], np.eye(11), atol=1e-14)


def test_quadratures_commutator():
    q, p = hermite.quadratures(0.2, 16)
    comm = q @ p - p @ q
    assert np.allclose(comm[:-1, :-1], 1j * 0.2 * np.eye(15), atol=1e-13)
    assert np.allclose(q, q.conj().T, atol=1e-14)
    assert np.allclose(p, p.conj().T, atol=1e-14)


def test_weyl_quantize_oscillator_spectrum():
    hbar = 0.2
    terms = {(2, 0): 0.5, (0, 2): 0.5}
    hop = hermite.weyl_quantize(terms, hbar, 10)
    # interior block is exactly diagonal with E_n = hbar (n + 1/2)
    want = hbar * (np.arange(8) + 0.5)
    assert np.allclose(hop[:8, :8], np.diag(want), atol=1e-13)


def test_weyl_quantize_qp_symmetrization():
    hbar = 0.3
    hop = hermite.weyl_quantize({(1, 1): 1.0}, hbar, 12)
    q, p = hermite.quadratures(hbar, 12)
    sym = 0.5 * (q @ p + p @ q)
    assert np.allclose(hop[:10, :10], sym[:10, :10], atol=1e-13)


def test_coherent_vector_annihilation():
    hbar = 0.2
    x = np.array([0.3, -0.1])
    vec = hermite.coherent_vector(x, hbar, 64)
    a = hermite.ladder(64)
    beta = (x[0] + 1j * x[1]) / np.sqrt(2 * hbar)
    resid = a @ vec - beta * vec
    assert np.linalg.norm(resid[:-8]) < 1e-10
    assert abs(np.linalg.norm(vec) - 1.0) < 1e-12


def test_displacement_unitary():
    d = hermite.displacement(np.array([0.2, 0.4]), 0.2, 48)
    err = d.conj().T @ d - np.eye(48)
    # unitarity holds away from the truncation corner
    assert np.linalg.norm(err[:32, :32]) < 1e-10


def test_phase_point_kernel_parity_at_origin():
    k = hermite.phase_point_kernel(np.zeros(2), 0.2, 16)
    want = np.diag(2.0 * (-1.0) ** np.arange(16))
    assert np.allclose(k, want, atol=1e-12)


def test_filter_weights_shape():
    w = hermite.filter_weights(64)
    assert w[0] == 1.0
    assert w[-1] == pytest.approx(np.exp(-hermite.FILTER_STRENGTH))
    assert np.all(np.diff(w) <= 0)


def test_symbol_trace_identity():
    # the filtered trace of the identity is the unit symbol
    val = hermite.symbol_trace(np.eye(96), np.array([0.2, -0.1]), 0.2)
    assert abs(val - 1.0) < 1e-10


def test_propagator_unitarity():
    hbar = 0.2
    hop = hermite.weyl_quantize({(2, 0): 0.5, (0, 2): 0.5}, hbar, 32)
    u = hermite.propagator(hop, 0.7, hbar)
    assert np.linalg.norm(u.conj().T @ u - np.eye(32)) < 1e-12


def test_gaussian_operator_symbol_roundtrip():
    hbar = 0.2
    center = np.array([0.15, -0.2])
    sigma = 0.5
    direct = hermite.gaussian_operator(center, sigma, hbar, 48)
    # symbol value at the center via the filtered trace round trip
    val = hermite.symbol_trace(direct, center, hbar)
    assert abs(val - 1.0) < 1e-6
    with pytest.raises(ValueError):
        hermite.gaussian_operator(center, 0.1, hbar, 48)


def test_hermite_functions_orthonormal():
    x, w = hermite.gauss_hermite_total(80)
    h = hermite.hermite_functions(6, x)
    gram = (h * w) @ h.T
    assert np.allclose(gram, np.eye(6), atol=1e-10)


def test_truncation_check():
    hermite.truncation_check([1.0, 1.0 + 1e-12])
    with pytest.raises(TruncationError):
        hermite.truncation_check([1.0, 1.001])
