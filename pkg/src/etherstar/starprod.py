"""Star products three ways.

Terminating Moyal calculus on polynomial symbols (flat, exact), a covariant
deformation series through second order in hbar on either model, and an
oscillatory-quadrature product that integrates symbol pairs against the
semiclassical kernel on one flat degree of freedom.
"""

import re
from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np

from .errors import DegreeCapError, QuadratureError, SymbolError
from .geometry import christoffel_at, j_matrix


def _cgrad(fn, u, step):
    # complex-valued central difference; the shared helpers are real-only
    u = np.asarray(u, dtype=float)
    out = np.zeros(u.size, dtype=complex)
    for i in range(u.size):
        e = np.zeros(u.size)
        e[i] = step
        out[i] = (fn(u + e) - fn(u - e)) / (2.0 * step)
    return out


def _chess(fn, u, step):
    u = np.asarray(u, dtype=float)
    k = u.size
    out = np.zeros((k, k), dtype=complex)
    f0 = fn(u)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = step
        out[i, i] = (fn(u + ei) - 2.0 * f0 + fn(u - ei)) / step**2
        for j in range(i + 1, k):
            ej = np.zeros(k)
            ej[j] = step
            val = (
                fn(u + ei + ej) - fn(u + ei - ej) - fn(u - ei + ej) + fn(u - ei - ej)
            ) / (4.0 * step * step)
            out[i, j] = out[j, i] = val
    return out

DEGREE_CAP = 64
PRUNE = 1e-16
# Widening ladder for symbols with no declared decay; the induced bias is
# O(1/Sigma^2) per level, removed by two-level Richardson extrapolation.
UNITY_WIDTHS = (8.0, 8.0 * np.sqrt(2.0), 16.0)


class PolySymbol:
    """Polynomial symbol with sparse complex coefficients.

    Terms map a multi-index over the 2n flat coordinates (q1, p1, ...,
    qn, pn) to a coefficient.  For one degree of freedom the text form
    accepts strings like "0.5 q^2 + 0.5 p^2".
    """

    def __init__(self, terms=None, n=1):
        self.n = int(n)
        self.terms = {}
        for mi, c in dict(terms or {}).items():
            key = tuple(int(e) for e in mi)
            if len(key) != 2 * self.n or min(key, default=0) < 0:
                raise ValueError("multi-index %r does not fit %d variables" % (mi, 2 * self.n))
            c = complex(c)
            if c != 0:
                self.terms[key] = self.terms.get(key, 0.0) + c
        self.terms = {k: v for k, v in self.terms.items() if v != 0}

    @classmethod
    def parse(cls, text):
        """Parse a one-dof polynomial like "0.5 q^2 + 0.5 p^2 - q p".

        Coefficients are real literals; variables are q and p with
        optional integer carets, juxtaposition meaning product.
        """
        cleaned = text.strip()
        if not cleaned:
            raise ValueError("empty polynomial text")
        terms = {}
        for chunk in re.split(r"(?<![eE])(?=[+-])", cleaned):
            chunk = chunk.strip()
            if not chunk:
                continue
            m = re.match(
                r"^([+-]?\s*(?:(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)?)\s*(.*)$", chunk
            )
            coeff_text = m.group(1).replace(" ", "")
            rest = m.group(2).strip()
            if coeff_text in ("", "+", "-"):
                coeff = 1.0 if coeff_text != "-" else -1.0
            else:
                coeff = float(coeff_text)
            if rest and not re.fullmatch(r"(?:[qp](?:\^\d+)?(?:[\s*]+|$))*", rest + " "):
                raise ValueError("cannot parse monomial %r" % rest)
            mq = mp = 0
            for var, exp in re.findall(r"([qp])(?:\^(\d+))?", rest):
                k = int(exp) if exp else 1
                if var == "q":
                    mq += k
                else:
                    mp += k
            key = (mq, mp)
            terms[key] = terms.get(key, 0.0) + coeff
        return cls(terms, n=1)

    @classmethod
    def from_json(cls, obj, n=None):
        """Build from {"terms": [{"mi": [...], "re": r, "im": i}, ...]}."""
        rows = obj["terms"]
        if n is None:
            n = len(rows[0]["mi"]) // 2 if rows else 1
        terms = {}
        for row in rows:
            key = tuple(int(e) for e in row["mi"])
            c = complex(float(row.get("re", 0.0)), float(row.get("im", 0.0)))
            terms[key] = terms.get(key, 0.0) + c
        return cls(terms, n=n)

    def to_json(self):
        rows = [
            {"mi": list(mi), "re": c.real, "im": c.imag}
            for mi, c in sorted(self.terms.items())
        ]
        return {"terms": rows}

    def degree(self):
        return max((sum(mi) for mi in self.terms), default=0)

    def evaluate(self, z):
        """Evaluate at z with shape (..., 2n); returns complex of shape (...)."""
        z = np.asarray(z, dtype=float)
        out = np.zeros(z.shape[:-1], dtype=complex)
        for mi, c in self.terms.items():
            term = np.full(z.shape[:-1], c, dtype=complex)
            for i, e in enumerate(mi):
                if e:
                    term = term * z[..., i] ** e
            out += term
        return out if out.shape else complex(out)

    def deriv(self, k):
        """Partial derivative with respect to coordinate k."""
        terms = {}
        for mi, c in self.terms.items():
            if mi[k] == 0:
                continue
            nmi = list(mi)
            nmi[k] -= 1
            terms[tuple(nmi)] = terms.get(tuple(nmi), 0.0) + c * mi[k]
        return PolySymbol(terms, n=self.n)

    def conj(self):
        return PolySymbol({mi: np.conj(c) for mi, c in self.terms.items()}, n=self.n)

    def distance(self, other):
        """Max coefficient difference against another polynomial."""
        keys = set(self.terms) | set(other.terms)
        return max(
            (abs(self.terms.get(k, 0.0) - other.terms.get(k, 0.0)) for k in keys),
            default=0.0,
        )

    def __add__(self, other):
        if np.isscalar(other):
            other = PolySymbol({(0,) * (2 * self.n): other}, n=self.n)
        terms = dict(self.terms)
        for mi, c in other.terms.items():
            terms[mi] = terms.get(mi, 0.0) + c
        return PolySymbol(terms, n=self.n)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, other):
        if np.isscalar(other):
            return PolySymbol({mi: c * other for mi, c in self.terms.items()}, n=self.n)
        terms = {}
        for mi, c in self.terms.items():
            for mj, d in other.terms.items():
                key = tuple(a + b for a, b in zip(mi, mj))
                terms[key] = terms.get(key, 0.0) + c * d
        return PolySymbol(terms, n=self.n)

    __rmul__ = __mul__

    def __repr__(self):
        return "PolySymbol(%r, n=%d)" % (self.terms, self.n)


class FieldSymbol:
    """Scalar field on chart coordinates with optional analytic derivatives.

    Parameters
    ----------
    fn : callable
        Field value; takes a chart point (2n,) and returns a scalar.
        Batched input (k, 2n) should return (k,) when used with the
        quadrature product.
    grad, hess : callable, optional
        Analytic gradient (2n,) and Hessian (2n, 2n); finite differences
        fill in when absent.
    envelope : tuple, optional
        (center, sigma) Gaussian decay bound used to place quadrature
        nodes; None declares a non-decaying symbol.
    name : str
        Label for error messages.
    """

    def __init__(self, fn, grad=None, hess=None, envelope=None, name="f"):
        self.fn = fn
        self.grad = grad
        self.hess = hess
        self.envelope = None
        if envelope is not None:
            center, sigma = envelope
            self.envelope = (np.asarray(center, dtype=float), float(sigma))
        self.name = name

    def value(self, u):
        return self.fn(np.asarray(u, dtype=float))

    def gradient(self, u, step=1e-5, force_fd=False):
        u = np.asarray(u, dtype=float)
        if self.grad is not None and not force_fd:
            return np.asarray(self.grad(u), dtype=complex)
        return _cgrad(self.fn, u, step)

    def hessian(self, u, step=1e-3, force_fd=False):
        u = np.asarray(u, dtype=float)
        if self.hess is not None and not force_fd:
            return np.asarray(self.hess(u), dtype=complex)
        if self.grad is not None and not force_fd:
            # difference the analytic gradient; one order cheaper in noise
            dim = u.size
            out = np.zeros((dim, dim), dtype=complex)
            for k in range(dim):
                e = np.zeros(dim)
                e[k] = step
                out[:, k] = (
                    np.asarray(self.grad(u + e), dtype=complex)
                    - np.asarray(self.grad(u - e), dtype=complex)
                ) / (2.0 * step)
            return 0.5 * (out + out.T)
        return _chess(self.fn, u, step)

    def conj(self):
        fn = self.fn
        out = FieldSymbol(
            lambda u: np.conj(fn(u)),
            grad=None if self.grad is None else (lambda u: np.conj(self.grad(u))),
            hess=None if self.hess is None else (lambda u: np.conj(self.hess(u))),
            envelope=self.envelope,
            name="conj(%s)" % self.name,
        )
        return out

    def derivative_defect(self, u, step=1e-5):
        """Max difference between supplied derivatives and finite differences."""
        u = np.asarray(u, dtype=float)
        worst = 0.0
        if self.grad is not None:
            worst = max(
                worst,
                float(np.max(np.abs(self.gradient(u) - self.gradient(u, force_fd=True)))),
            )
        if self.hess is not None:
            worst = max(
                worst,
                float(np.max(np.abs(self.hessian(u) - _chess(self.fn, u, 1e-3)))),
            )
        return worst


def unit_symbol():
    """The constant symbol 1, with no decay envelope."""

    def one(u):
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            return 1.0 + 0.0j
        return np.ones(u.shape[0], dtype=complex)

    zeros2 = np.zeros(2)

    return FieldSymbol(
        one,
        grad=lambda u: np.zeros(np.asarray(u).shape[-1], dtype=complex),
        hess=lambda u: np.zeros((np.asarray(u).shape[-1],) * 2, dtype=complex),
        envelope=None,
        name="1",
    )


def gaussian_symbol(center, sigma, height=1.0, name="gauss"):
    """Isotropic Gaussian field with analytic derivatives and envelope."""
    center = np.asarray(center, dtype=float)
    sigma = float(sigma)
    height = complex(height)

    def fn(u):
        u = np.asarray(u, dtype=float)
        d = u - center
        return height * np.exp(-np.sum(d * d, axis=-1) / (2.0 * sigma**2))

    def grad(u):
        d = np.asarray(u, dtype=float) - center
        return fn(u) * (-d / sigma**2)

    def hess(u):
        d = np.asarray(u, dtype=float) - center
        eye = np.eye(center.size)
        return fn(u) * (np.outer(d, d) / sigma**4 - eye / sigma**2)

    return FieldSymbol(fn, grad=grad, hess=hess, envelope=(center, sigma), name=name)


def poly_field(poly, center=None, envelope=None):
    """Wrap a PolySymbol as a FieldSymbol with analytic derivatives.

    With a center, the field reads the polynomial in the flat chart
    centered there: fn(u) = poly(center + u), so series evaluations at
    the center agree with the global polynomial at that point.
    """
    dim = 2 * poly.n
    shift = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    grads = [poly.deriv(k) for k in range(dim)]
    hesses = [[grads[j].deriv(k) for k in range(dim)] for j in range(dim)]

    def fn(u):
        return poly.evaluate(shift + np.asarray(u, dtype=float))

    def grad(u):
        # component axis last so batched points pass through unchanged
        w = shift + np.asarray(u, dtype=float)
        return np.stack([np.asarray(g.evaluate(w), dtype=complex) for g in grads], axis=-1)

    def hess(u):
        w = shift + np.asarray(u, dtype=float)
        rows = [
            np.stack([np.asarray(hesses[j][k].evaluate(w), dtype=complex) for k in range(dim)], axis=-1)
            for j in range(dim)
        ]
        return np.stack(rows, axis=-2)

    return FieldSymbol(fn, grad=grad, hess=hess, envelope=envelope, name="poly")


@dataclass(frozen=True)
class SeriesConfig:
    """Settings for the covariant deformation series.

    hbar > 0; order 0, 1, or 2; mode picks analytic derivatives when the
    fields supply them ("analytic") or forces central differences
    ("finite-difference").
    """

    hbar: float = 0.1
    order: int = 2
    mode: str = "analytic"

    def __post_init__(self):
        if self.hbar <= 0:
            raise ValueError("hbar must be positive")
        if self.order not in (0, 1, 2):
            raise ValueError("series order must be 0, 1, or 2")
        if self.mode not in ("analytic", "finite-difference"):
            raise ValueError("mode must be 'analytic' or 'finite-difference'")


def moyal_poly(f, g, hbar, degree_cap=DEGREE_CAP):
    """Exact Weyl star product of two polynomial symbols on flat phase space.

    The bidifferential series terminates, so the result is again a
    polynomial; associativity and the commutation relations hold to
    roundoff.

    Parameters
    ----------
    f, g : PolySymbol
        Factors over the same number of degrees of freedom.
    hbar : float
        Deformation parameter.
    degree_cap : int
        Guard against runaway degree growth.

    Returns
    -------
    PolySymbol
    """
    if f.n != g.n:
        raise ValueError("factor symbols live on different phase spaces")
    if f.degree() + g.degree() > degree_cap:
        raise DegreeCapError(
            "star product degree %d exceeds cap %d" % (f.degree() + g.degree(), degree_cap)
        )
    n = f.n
    dim = 2 * n
    jmat = j_matrix(n)
    pairs = [(a, b) for a in range(dim) for b in range(dim) if jmat[a, b] != 0]
    # doubled-variable polynomial: keys (mi_x, mi_y), one slot per factor
    current = {}
    for mi, c in f.terms.items():
        for mj, d in g.terms.items():
            current[(mi, mj)] = current.get((mi, mj), 0.0) + c * d
    out = {}
    k = 0
    while current:
        scale = (0.5j * hbar) ** k / factorial(k)
        for (mi, mj), c in current.items():
            key = tuple(a + b for a, b in zip(mi, mj))
            out[key] = out.get(key, 0.0) + scale * c
        nxt = {}
        for (mi, mj), c in current.items():
            for a, b in pairs:
                if mi[a] == 0 or mj[b] == 0:
                    continue
                ni = list(mi)
                nj = list(mj)
                ni[a] -= 1
                nj[b] -= 1
                key = (tuple(ni), tuple(nj))
                val = jmat[a, b] * mi[a] * mj[b] * c
                nxt[key] = nxt.get(key, 0.0) + val
        current = {key: v for key, v in nxt.items() if v != 0}
        k += 1
    return PolySymbol(out, n=n)


def series_terms(m, f, g, z, mode="analytic"):
    """Deformation-series coefficients c_0, c_1, c_2 at a point.

    Values are the hbar-free coefficients: the product through second
    order is c_0 + hbar c_1 + hbar^2 c_2.  Fields are functions on the
    chart at z; derivatives are covariant via the connection there.

    Returns
    -------
    (complex, complex, complex)
    """
    chart = m.chart(z)
    u0 = chart.to_chart(z)
    psi = m.psi_at(z)
    gamma = christoffel_at(m, z)
    force_fd = mode == "finite-difference"
    fv = complex(f.value(u0))
    gv = complex(g.value(u0))
    fa = f.gradient(u0, force_fd=force_fd)
    ga = g.gradient(u0, force_fd=force_fd)
    c0 = fv * gv
    c1 = -0.5j * complex(fa @ psi @ ga)
    hf = f.hessian(u0, force_fd=force_fd) - np.einsum("l,ljk->jk", fa, gamma)
    hg = g.hessian(u0, force_fd=force_fd) - np.einsum("l,ljk->jk", ga, gamma)
    c2 = -0.125 * complex(np.einsum("ab,cd,ac,bd->", psi, psi, hf, hg))
    return c0, c1, c2


def series_product(m, f, g, z, cfg):
    """Covariant deformation series product evaluated at one point.

    Parameters
    ----------
    m : model
        Owning manifold; supplies the chart, the Poisson tensor, and the
        connection at z.
    f, g : FieldSymbol
        Fields on the chart at z.
    z : array_like
        Manifold point.
    cfg : SeriesConfig
        hbar, truncation order, and derivative mode.

    Returns
    -------
    complex
    """
    c0, c1, c2 = series_terms(m, f, g, z, mode=cfg.mode)
    val = c0
    if cfg.order >= 1:
        val = val + cfg.hbar * c1
    if cfg.order >= 2:
        val = val + cfg.hbar**2 * c2
    return val


def germ_residual(m, f, x, cfg):
    """Defect of the derivation property at the base point.

    Measures max_j |i hbar d_j f(x) - (f * H_{x,j})(x)| where H_{x,j} are
    the chart components of the generating form based at x and the star
    is the deformation series at the configured order.  Exact for flat
    charts at order >= 1; decays like hbar^3 on the sphere at order 1.

    Returns
    -------
    float
    """
    chart = m.chart(x)
    u0 = chart.to_chart(x)
    dim = u0.size
    # the form lives in the cotangent space at x: component directions are
    # frozen to the coordinate basis there while the argument moves
    basis = chart.jacobian(u0)
    force_fd = cfg.mode == "finite-difference"
    grad_f = f.gradient(u0, force_fd=force_fd)
    worst = 0.0
    for j in range(dim):

        def comp(u, _j=j):
            u = np.asarray(u, dtype=float)
            pt = chart.to_manifold(u)
            return float(basis[:, _j] @ m.ether_form(x, pt))

        h_j = FieldSymbol(comp, name="H_%d" % j)
        star = series_product(m, f, h_j, x, cfg)
        worst = max(worst, abs(1j * cfg.hbar * grad_f[j] - star))
    return worst


@dataclass(frozen=True)
class QuadConfig:
    """Node counts and verification settings for the quadrature product."""

    nodes: int = 48
    prune: float = PRUNE
    check: bool = False
    check_tol: float = 1e-6

    def __post_init__(self):
        if self.nodes < 4:
            raise ValueError("need at least 4 nodes per axis")


@lru_cache(maxsize=32)
def _gh_nodes(count):
    s, w = np.polynomial.hermite.hermgauss(count)
    return s, w * np.exp(s * s)


def _gh_grid(center, scale, count):
    """Tensor Gauss-Hermite nodes with envelope-absorbed total weights."""
    s, w_abs = _gh_nodes(count)
    q = center[0] + scale * s
    p = center[1] + scale * s
    w_axis = w_abs * scale
    pts = np.stack(np.meshgrid(q, p, indexing="ij"), axis=-1).reshape(-1, 2)
    return pts, np.outer(w_axis, w_axis).ravel()


def _wedge_outer(u, v):
    # W[i, j] = u_i ^ v_j with u ^ v = u_q v_p - u_p v_q
    return np.outer(u[:, 0], v[:, 1]) - np.outer(u[:, 1], v[:, 0])


def _batch_values(field, pts):
    vals = field.fn(pts)
    vals = np.asarray(vals, dtype=complex)
    if vals.shape != (len(pts),):
        # field only supports single points; fall back to a loop
        vals = np.array([field.fn(p) for p in pts], dtype=complex)
    return vals


def _slot_grid(env_own, width_other, zc, radius, hbar, nodes):
    """Node center and scale for one integration slot.

    The other factor's spread sigma damps this slot's integrand a
    stationary-phase width hbar/(2 sigma) around the evaluation point, so
    the effective support is the product of that window with the slot's
    own envelope.  The grid must also cover the whole z tile.  Both slots
    shrink this way; the scheme resolves the cross phase exactly when
    sigma_f sigma_g >= hbar/2, the width regime the product contract
    assumes.
    """
    center_own, sigma_own = env_own
    window = hbar / (2.0 * width_other)
    eff = 1.0 / np.sqrt(1.0 / sigma_own**2 + 1.0 / window**2)
    pull = sigma_own**2 / (sigma_own**2 + window**2)
    center = center_own + (zc - center_own) * pull
    s_max = float(_gh_nodes(nodes)[0][-1])
    half_span = radius * pull + 8.0 * eff
    scale = max(eff * np.sqrt(2.0), half_span / s_max)
    return center, scale


def _star_grid(f, g, zpts, env_f, env_g, hbar, cfg):
    """Separable-phase quadrature of the kernel product on a tight z batch.

    The membrane phase of the flat kernel splits over the two integration
    slots, so the double integral is two matrix products over pruned
    Gauss-Hermite grids.
    """
    (cf, sf), (cg, sg) = env_f, env_g
    zc = zpts.mean(axis=0)
    radius = float(np.max(np.linalg.norm(zpts - zc, axis=1))) if len(zpts) > 1 else 0.0
    cx, scale_x = _slot_grid((cf, sf), sg, zc, radius, hbar, cfg.nodes)
    cy, scale_y = _slot_grid((cg, sg), sf, zc, radius, hbar, cfg.nodes)
    xpts, wx = _gh_grid(cx, scale_x, cfg.nodes)
    ypts, wy = _gh_grid(cy, scale_y, cfg.nodes)
    fw = _batch_values(f, xpts) * wx
    gw = _batch_values(g, ypts) * wy
    keep_x = np.abs(fw) >= cfg.prune * np.max(np.abs(fw))
    keep_y = np.abs(gw) >= cfg.prune * np.max(np.abs(gw))
    xpts, fw = xpts[keep_x], fw[keep_x]
    ypts, gw = ypts[keep_y], gw[keep_y]
    uz = np.exp(-2j / hbar * _wedge_outer(xpts, zpts))
    partial = np.zeros((len(zpts), len(xpts)), dtype=complex)
    # cap the kernel slab at ~256 MB of complex entries
    ychunk = max(64, (1 << 24) // max(len(xpts), 1))
    for lo in range(0, len(ypts), ychunk):
        sl = slice(lo, min(lo + ychunk, len(ypts)))
        e0 = np.exp(-2j / hbar * _wedge_outer(ypts[sl], xpts))
        vz = np.exp(+2j / hbar * _wedge_outer(ypts[sl], zpts))
        partial += (gw[sl][:, None] * vz).T @ e0
    acc = ((fw[None, :] * uz.T) * partial).sum(axis=1)
    return 4.0 * acc / (2.0 * np.pi * hbar) ** 2


def _star_tiled(f, g, zpts, env_f, env_g, hbar, cfg):
    """Split wide z batches into tiles the matched grids can cover."""
    zc = zpts.mean(axis=0)
    radius = float(np.max(np.linalg.norm(zpts - zc, axis=1))) if len(zpts) > 1 else 0.0
    r_max = 2.0 * max(env_f[1], env_g[1])
    if radius <= r_max or len(zpts) < 4:
        return _star_grid(f, g, zpts, env_f, env_g, hbar, cfg)
    axis = int(np.argmax(zpts.max(axis=0) - zpts.min(axis=0)))
    cut = np.median(zpts[:, axis])
    left = zpts[:, axis] <= cut
    if left.all() or not left.any():
        return _star_grid(f, g, zpts, env_f, env_g, hbar, cfg)
    out = np.empty(len(zpts), dtype=complex)
    out[left] = _star_tiled(f, g, zpts[left], env_f, env_g, hbar, cfg)
    out[~left] = _star_tiled(f, g, zpts[~left], env_f, env_g, hbar, cfg)
    return out


def _quad_once(f, g, zpts, hbar, cfg):
    env_f, env_g = f.envelope, g.envelope
    if env_f is not None and env_g is not None:
        return _star_tiled(f, g, zpts, env_f, env_g, hbar, cfg)
    if env_f is None and env_g is None:
        raise SymbolError(
            "quadrature product needs a decay envelope on at least one factor"
        )
    # One factor does not decay: widen it with a broad Gaussian at each
    # evaluation point and remove the bias by Richardson in 1/Sigma^2.
    # Stationary phase pins the other slot near z at width hbar/(2 Sigma).
    out = np.zeros(len(zpts), dtype=complex)
    for i, z in enumerate(zpts):
        vals = []
        for big in UNITY_WIDTHS:
            wide = gaussian_symbol(z, big)
            narrow_scale = hbar / (2.0 * big * np.sqrt(2.0))
            if env_g is None:
                gv = g.fn

                def widened(u, _gv=gv, _w=wide):
                    return np.asarray(_gv(u), dtype=complex) * _w.fn(u)

                g_eff = FieldSymbol(widened, envelope=(z, big), name="widened")
                vals.append(
                    _star_grid(
                        f, g_eff, z[None, :], (z, narrow_scale / np.sqrt(2.0)),
                        (z, big), hbar, cfg,
                    )[0]
                )
            else:
                fv = f.fn

                def widened(u, _fv=fv, _w=wide):
                    return np.asarray(_fv(u), dtype=complex) * _w.fn(u)

                f_eff = FieldSymbol(widened, envelope=(z, big), name="widened")
                vals.append(
                    _star_grid(
                        f_eff, g, z[None, :], (z, big),
                        (z, narrow_scale / np.sqrt(2.0)), hbar, cfg,
                    )[0]
                )
        v1, v2, v3 = vals
        r1 = 2.0 * v2 - v1
        r2 = 2.0 * v3 - v2
        out[i] = (4.0 * r2 - r1) / 3.0
    return out


def quad_product(f, g, z, hbar, quad_cfg=None):
    """Star product of two fields by oscillatory quadrature (one flat dof).

    Integrates f(x) g(y) against the closed-form flat kernel on tensor
    Gauss-Hermite grids matched to the declared envelopes.  A factor with
    no envelope is handled by the widening ladder, so the unity element
    reproduces f(z).

    The node placement resolves the kernel oscillation when the declared
    widths satisfy sigma_f * sigma_g >= hbar / 2 and neither width is far
    above sqrt(hbar).  Much wider symbols need the tiny values of the
    stationary window, which only emerge from cancellation across the
    whole partner mass; node counts must then grow like (sigma^2/hbar)^2,
    and the doubling check reports the non-convergence.

    Parameters
    ----------
    f, g : FieldSymbol
        Factor fields on the flat chart, one degree of freedom.
    z : array_like
        Evaluation point (2,) or batch (k, 2).
    hbar : float
        Deformation parameter; the oscillation budget assumes
        hbar >= 0.05 at default node counts.
    quad_cfg : QuadConfig, optional
        Node counts, pruning threshold, and the node-doubling check.

    Returns
    -------
    complex or ndarray
    """
    if hbar <= 0:
        raise ValueError("hbar must be positive")
    cfg = quad_cfg or QuadConfig()
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    zpts = np.atleast_2d(z)
    if zpts.shape[-1] != 2:
        raise ValueError("quadrature product is implemented for one degree of freedom")
    vals = _quad_once(f, g, zpts, hbar, cfg)
    if cfg.check:
        dense = QuadConfig(nodes=2 * cfg.nodes, prune=cfg.prune)
        vals2 = _quad_once(f, g, zpts, hbar, dense)
        drift = float(np.max(np.abs(vals - vals2)))
        if drift > cfg.check_tol:
            raise QuadratureError(
                "node doubling moved the product by %.3e > %.3e" % (drift, cfg.check_tol)
            )
        vals = vals2
    return complex(vals[0]) if single else vals
