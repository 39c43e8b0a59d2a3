"""Hermite-basis operator tools for one flat degree of freedom.

Ladder and quadrature matrices, Weyl quantization of polynomial and sampled
symbols, the phase-point parity kernel, and filtered traces that read a
smooth symbol back off a finite matrix.  Everything here works at a fixed
basis dimension; callers pick the dimension large enough that the states
they touch are negligible near the truncation edge.
"""

from math import comb

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .errors import TruncationError

# Spectral filter defaults: exp(-strength * (n/(dim-1))^(2*power)) keeps the
# low Hermite modes untouched and rolls off the truncation-polluted tail.
FILTER_STRENGTH = 25.0
FILTER_POWER = 4


def ladder(dim):
    """Lowering operator a in the Hermite basis.

    Parameters
    ----------
    dim : int
        Basis dimension.

    Returns
    -------
    ndarray
        Real (dim, dim) matrix with a[n-1, n] = sqrt(n).
    """
    return np.diag(np.sqrt(np.arange(1.0, dim)), 1)


def quadratures(hbar, dim):
    """Position and momentum matrices at Planck constant hbar.

    Returns
    -------
    (ndarray, ndarray)
        Complex (dim, dim) matrices q_op, p_op with [q_op, p_op] = i*hbar
        away from the truncation corner.
    """
    a = ladder(dim)
    ad = a.T
    q_op = np.sqrt(hbar / 2.0) * (a + ad).astype(complex)
    p_op = 1j * np.sqrt(hbar / 2.0) * (ad - a)
    return q_op, p_op


def weyl_quantize(terms, hbar, dim):
    """Weyl (symmetric) quantization of a polynomial symbol.

    Each monomial q^m p^n maps to 2^{-m} sum_r C(m, r) q_op^r p_op^n
    q_op^{m-r}, the fully symmetrized ordering.

    Parameters
    ----------
    terms : dict or iterable
        Map (or iterable of pairs) from multi-index (m, n) to a complex
        coefficient; the index counts powers of q and p.
    hbar : float
        Planck constant.
    dim : int
        Basis dimension.

    Returns
    -------
    ndarray
        Complex (dim, dim) operator matrix.
    """
    items = terms.items() if hasattr(terms, "items") else list(terms)
    items = [(tuple(int(e) for e in mi), complex(c)) for mi, c in items]
    for mi, _ in items:
        if len(mi) != 2 or min(mi) < 0:
            raise ValueError("expected multi-indices (m, n) over one q and one p")
    q_op, p_op = quadratures(hbar, dim)
    deg_q = max((mi[0] for mi, _ in items), default=0)
    deg_p = max((mi[1] for mi, _ in items), default=0)
    q_pow = [np.eye(dim, dtype=complex)]
    for _ in range(deg_q):
        q_pow.append(q_pow[-1] @ q_op)
    p_pow = [np.eye(dim, dtype=complex)]
    for _ in range(deg_p):
        p_pow.append(p_pow[-1] @ p_op)
    out = np.zeros((dim, dim), dtype=complex)
    for (m, n), coeff in items:
        if coeff == 0:
            continue
        block = np.zeros((dim, dim), dtype=complex)
        for r in range(m + 1):
            block += comb(m, r) * (q_pow[r] @ p_pow[n] @ q_pow[m - r])
        out += coeff * 0.5 ** m * block
    return out


def phase_point_kernel(x, hbar, dim):
    """Phase-point kernel 2 D(2 alpha) Pi in the Hermite basis.

    The trace of an operator against this kernel is the operator's Weyl
    symbol at the phase point x = (q, p).  Built band by band; magnitudes
    are assembled in log space so large displacements do not overflow.

    Parameters
    ----------
    x : array_like
        Phase point (q, p).
    hbar : float
        Planck constant.
    dim : int
        Basis dimension.

    Returns
    -------
    ndarray
        Complex (dim, dim) matrix.
    """
    q, p = float(x[0]), float(x[1])
    beta = 2.0 * (q + 1j * p) / np.sqrt(2.0 * hbar)
    mag2 = abs(beta) ** 2
    ab = abs(beta)
    th = np.angle(beta) if ab > 0 else 0.0
    logab = np.log(ab) if ab > 0 else -np.inf
    out = np.zeros((dim, dim), dtype=complex)
    for k in range(dim):
        n = np.arange(dim - k)
        # k * logab is 0 for the main diagonal even when beta vanishes
        band_log = k * logab if k else 0.0
        logmag = 0.5 * (gammaln(n + 1) - gammaln(n + k + 1)) + band_log - mag2 / 2.0
        lag = eval_genlaguerre(n, k, mag2)
        base = np.exp(logmag) * lag
        idx = np.arange(dim - k)
        out[idx + k, idx] = base * np.exp(1j * k * th) * (2.0 * (-1.0) ** n)
        if k:
            out[idx, idx + k] = base * np.exp(-1j * k * th) * (-1.0) ** k * (2.0 * (-1.0) ** (n + k))
    return out


def filter_weights(dim, strength=FILTER_STRENGTH, power=FILTER_POWER):
    """Smooth spectral roll-off for truncated traces.

    Returns
    -------
    ndarray
        Real weights exp(-strength * (n/(dim-1))^(2*power)), length dim.
    """
    n = np.arange(dim) / float(dim - 1)
    return np.exp(-strength * n ** (2 * power))


def symbol_trace(op, x, hbar, weights=None):
    """Weyl symbol of a matrix at one phase point, by filtered trace.

    Evaluates tr(F K F op) with K the phase-point kernel and F the spectral
    filter; the filter suppresses the truncation-edge modes that an exact
    trace of a finite matrix would alias into the symbol.

    Parameters
    ----------
    op : ndarray
        Operator matrix, shape (dim, dim).
    x : array_like
        Phase point (q, p).
    hbar : float
        Planck constant.
    weights : ndarray, optional
        Filter weights; defaults to filter_weights(dim).

    Returns
    -------
    complex
    """
    dim = op.shape[0]
    if weights is None:
        weights = filter_weights(dim)
    kern = phase_point_kernel(x, hbar, dim)
    return complex(np.einsum("m,mn,n,nm->", weights, kern, weights, op))


def hermite_functions(count, x):
    """First `count` Hermite functions evaluated on a grid.

    Returns
    -------
    ndarray
        Shape (count, len(x)); row n is the L2-normalized Hermite
        function psi_n.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((count, x.size))
    out[0] = np.pi ** (-0.25) * np.exp(-x * x / 2.0)
    if count > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, count - 1):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * x * out[n] - np.sqrt(n / (n + 1.0)) * out[n - 1]
    return out


def gauss_hermite_total(count):
    """Gauss-Hermite nodes with total weights.

    The returned weights integrate plain decaying functions: the rule is
    sum(w * f(s)) for integral f dx, with w = 1/(count * psi_{count-1}(s)^2),
    stable at large count where the e^{x^2}-scaled classical weights
    overflow.

    Returns
    -------
    (ndarray, ndarray)
        Nodes and total weights, each length count.
    """
    s, _ = np.polynomial.hermite.hermgauss(count)
    psi = hermite_functions(count, s)
    w = 1.0 / (count * psi[count - 1] ** 2)
    return s, w


def symbol_trace_quadrature(op, x, hbar, nodes=None):
    """Weyl symbol at a phase point by direct position-space quadrature.

    Independent of the band-structured kernel route: writes the trace as an
    integral over the cross-correlation variable u,
    2 * int psi_m(q-u) op[m,n] psi_n(q+u) e^{2ipu/hbar} du,
    and applies a Gauss-Hermite rule.  Slower than symbol_trace; kept as a
    cross-check.

    Parameters
    ----------
    op : ndarray
        Operator matrix.
    x : array_like
        Phase point (q, p).
    hbar : float
        Planck constant.
    nodes : int, optional
        Quadrature order; defaults to 4 * dim + 64.

    Returns
    -------
    complex
    """
    dim = op.shape[0]
    q, p = float(x[0]), float(x[1])
    if nodes is None:
        nodes = 4 * dim + 64
    s, tw = gauss_hermite_total(nodes)
    u = np.sqrt(hbar) * s
    # Hermite functions carry the scale: psi((q -/+ u)/sqrt(hbar)) / hbar^(1/4).
    a_grid = hermite_functions(dim, (q - u) / np.sqrt(hbar)) / hbar ** 0.25
    b_grid = hermite_functions(dim, (q + u) / np.sqrt(hbar)) / hbar ** 0.25
    osc = np.exp(2j * p * u / hbar)
    w_total = tw * osc * np.sqrt(hbar)
    return complex(2.0 * np.sum(w_total * np.sum(a_grid * (op @ b_grid), axis=0)))


def coherent_vector(x, hbar, dim):
    """Coherent-state coefficient vector at phase point x = (q, p).

    Returns
    -------
    ndarray
        Complex length-dim vector c_n = e^{-|alpha|^2/2} alpha^n/sqrt(n!)
        with alpha = (q + ip)/sqrt(2 hbar), assembled in log space.
    """
    q, p = float(x[0]), float(x[1])
    alpha = (q + 1j * p) / np.sqrt(2.0 * hbar)
    n = np.arange(dim)
    if abs(alpha) == 0:
        out = np.zeros(dim, dtype=complex)
        out[0] = 1.0
        return out
    logmag = n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1.0) - abs(alpha) ** 2 / 2.0
    return np.exp(logmag + 1j * n * np.angle(alpha))


def displacement(x, hbar, dim):
    """Displacement operator carrying the vacuum to the coherent state at x.

    Returns
    -------
    ndarray
        Complex (dim, dim) unitary (up to truncation) exp(alpha a+ - conj
        (alpha) a) with alpha = (q + ip)/sqrt(2 hbar).
    """
    from scipy.linalg import expm

    q, p = float(x[0]), float(x[1])
    alpha = (q + 1j * p) / np.sqrt(2.0 * hbar)
    a = ladder(dim).astype(complex)
    return expm(alpha * a.T - np.conj(alpha) * a)


def gaussian_operator(center, sigma, hbar, dim):
    """Weyl quantization of a unit-height isotropic Gaussian symbol.

    The symbol exp(-|z - center|^2 / (2 sigma^2)) quantizes in closed form
    to a displaced power of the number operator: the operator is
    (2 sigma^2/(2 sigma^2 + hbar)) D k^N D* with k = (2 sigma^2 - hbar) /
    (2 sigma^2 + hbar), exact up to basis truncation.

    Parameters
    ----------
    center : array_like
        Symbol center (q, p).
    sigma : float
        Gaussian width; must satisfy 2 sigma^2 >= hbar so the operator is a
        positive contraction.  Equality gives the coherent projector.
    hbar : float
        Planck constant.
    dim : int
        Basis dimension.

    Returns
    -------
    ndarray
        Complex (dim, dim) operator matrix.
    """
    sigma = float(sigma)
    if 2.0 * sigma ** 2 < hbar:
        raise ValueError("gaussian_operator needs 2*sigma^2 >= hbar")
    k = (2.0 * sigma ** 2 - hbar) / (2.0 * sigma ** 2 + hbar)
    amp = 2.0 * sigma ** 2 / (2.0 * sigma ** 2 + hbar)
    core = amp * np.diag(k ** np.arange(dim)).astype(complex)
    d_op = displacement(center, hbar, dim)
    return d_op @ core @ d_op.conj().T


def propagator(hop, t, hbar):
    """Unitary evolution matrix exp(-i t H / hbar) via eigendecomposition.

    Parameters
    ----------
    hop : ndarray
        Hermitian operator matrix.
    t : float
        Time.
    hbar : float
        Planck constant.

    Returns
    -------
    ndarray
        Complex (dim, dim) matrix.
    """
    herm_defect = np.max(np.abs(hop - hop.conj().T))
    if herm_defect > 1e-9 * max(1.0, np.max(np.abs(hop))):
        raise ValueError("propagator needs a Hermitian matrix")
    w, v = np.linalg.eigh(hop)
    return (v * np.exp(-1j * t * w / hbar)) @ v.conj().T


def truncation_check(values, tol=1e-8):
    """Raise TruncationError unless successive refinements agree.

    Parameters
    ----------
    values : sequence of complex
        Results at increasing basis dimension.
    tol : float
        Allowed change between the last two refinements.
    """
    if len(values) < 2:
        return
    drift = abs(values[-1] - values[-2])
    if drift > tol:
        raise TruncationError(
            "symbol not truncation-converged: refinement moved %.3e > %.3e" % (drift, tol)
        )
