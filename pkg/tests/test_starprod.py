import numpy as np
import pytest

from etherstar import hermite, starprod
from etherstar.errors import QuadratureError, SymbolError

HBAR = 0.2
SIG0 = np.sqrt(HBAR / 2.0)


def test_poly_parse_and_evaluate():
    f = starprod.PolySymbol.parse("q^2 p - 0.5p + 2")
    assert f.evaluate(np.array([2.0, 3.0])) == pytest.approx(12.5)
    assert f.degree() == 3
    with pytest.raises(ValueError):
        starprod.PolySymbol.parse("q^2x")


def test_poly_algebra_roundtrip():
    f = starprod.PolySymbol.parse("q p + 1")
    g = starprod.PolySymbol.parse("q - p")
    z = np.array([0.3, -0.7])
    assert (f * g).evaluate(z) == pytest.approx(f.evaluate(z) * g.evaluate(z))
    assert (f + g).evaluate(z) == pytest.approx(f.evaluate(z) + g.evaluate(z))
    back = starprod.PolySymbol.from_json(f.to_json())
    assert back.distance(f) == 0.0


def test_poly_deriv():
    f = starprod.PolySymbol.parse("q^3 p^2")
    fq = f.deriv(0)
    assert fq.evaluate(np.array([1.0, 2.0])) == pytest.approx(12.0)


def test_moyal_canonical_commutator():
    q = starprod.PolySymbol.parse("q")
    p = starprod.PolySymbol.parse("p")
    qp = starprod.moyal_poly(q, p, HBAR)
    pq = starprod.moyal_poly(p, q, HBAR)
    comm = qp - pq
    # q*p = qp + i hbar/2 and p*q = qp - i hbar/2
    assert qp.terms[(1, 1)] == pytest.approx(1.0)
    assert qp.terms[(0, 0)] == pytest.approx(1j * HBAR / 2)
    assert comm.terms[(0, 0)] == pytest.approx(1j * HBAR)


def test_moyal_matches_operator_composition():
    # compare against operator multiplication in the Hermite basis
    hbar = 0.2
    dim = 48
    f = starprod.PolySymbol.parse("q^2 + 0.3q p")
    g = starprod.PolySymbol.parse("p^2 - 0.5q")
    prod = starprod.moyal_poly(f, g, hbar)
    fop = hermite.weyl_quantize(f.terms, hbar, dim)
    gop = hermite.weyl_quantize(g.terms, hbar, dim)
    pop = hermite.weyl_quantize(
        {k: complex(v) for k, v in prod.terms.items()}, hbar, dim)
    err = (fop @ gop - pop)[:dim - 16, :dim - 16]
    assert np.max(np.abs(err)) < 1e-10


def test_moyal_degree_cap():
    f = starprod.PolySymbol.parse("q^40")
    g = starprod.PolySymbol.parse("p^40")
    with pytest.raises(Exception):
        starprod.moyal_poly(f, g, HBAR, degree_cap=32)


def test_series_terms_flat_closed_form(flat):
    # c1 is the Poisson bracket with the pinned orientation
    f = starprod.PolySymbol.parse("q^2")
    g = starprod.PolySymbol.parse("p^2")
    z = np.array([0.4, -0.2])
    ff = starprod.poly_field(f, center=z)
    gf = starprod.poly_field(g, center=z)
    c0, c1, c2 = starprod.series_terms(flat, ff, gf, z)
    assert c0 == pytest.approx(f.evaluate(z) * g.evaluate(z))
    # {q^2, p^2} = 4 q p with the sign set by psi = -J
    bracket = -0.5j * (-4.0 * z[0] * z[1])
    assert c1 == pytest.approx(bracket, rel=1e-9)
    assert c2 == pytest.approx(-0.5, rel=1e-9)


def test_series_matches_moyal_flat(flat, rng):
    # order-2 covariant series reproduces Moyal to O(hbar^3)
    f = starprod.PolySymbol.parse("q^2 p")
    g = starprod.PolySymbol.parse("q p^2 + 0.5q")
    hbar = 0.05
    cfg = starprod.SeriesConfig(hbar=hbar, order=2)
    exact = starprod.moyal_poly(f, g, hbar)
    worst = 0.0
    for _ in range(5):
        z = rng.normal(size=2) * 0.6
        ff = starprod.poly_field(f, center=z)
        gf = starprod.poly_field(g, center=z)
        val = starprod.series_product(flat, ff, gf, z, cfg)
        worst = max(worst, abs(val - exact.evaluate(z)))
    assert worst < 1e-4


def test_series_order_slope(flat, rng):
    # the order-2 truncation error scales as hbar^3
    f = starprod.PolySymbol.parse("q^2 p")
    g = starprod.PolySymbol.parse("q p^2 + 0.5q")
    z = np.array([0.5, 0.3])
    ff = starprod.poly_field(f, center=z)
    gf = starprod.poly_field(g, center=z)
    hs = [0.1, 0.05, 0.025]
    errs = []
    for h in hs:
        cfg = starprod.SeriesConfig(hbar=h, order=2)
        exact = starprod.moyal_poly(f, g, h).evaluate(z)
        errs.append(abs(starprod.series_product(flat, ff, gf, z, cfg) - exact))
    from etherstar.numerics import loglog_slope
    assert loglog_slope(hs, errs) > 2.7


def test_finite_difference_mode_agrees(flat):
    f = starprod.PolySymbol.parse("q^2 p")
    g = starprod.PolySymbol.parse("p^2")
    z = np.array([0.3, 0.2])
    ff = starprod.poly_field(f, center=z)
    gf = starprod.poly_field(g, center=z)
    ana = starprod.series_terms(flat, ff, gf, z, mode="analytic")
    fd = starprod.series_terms(flat, ff, gf, z, mode="finite-difference")
    assert np.allclose(ana, fd, atol=1e-6)


def test_germ_residual_flat(flat):
    f = starprod.gaussian_symbol(np.zeros(2), 1.0)
    cfg = starprod.SeriesConfig(hbar=0.1, order=1)
    assert starprod.germ_residual(flat, f, np.array([0.2, 0.1]), cfg) < 1e-8


def test_germ_residual_sphere(sphere):
    # covariant derivation property in the sphere germ, every hbar
    bump = starprod.FieldSymbol(
        lambda u: np.exp(-0.5 * float(u @ u)) * (1.0 + u[0]),
        name="bump")
    x = sphere.project(np.array([0.3, -0.2, 0.9]))
    for h in (0.1, 0.05, 0.025):
        cfg = starprod.SeriesConfig(hbar=h, order=1)
        assert starprod.germ_residual(sphere, bump, x, cfg) < 1e-9


def test_quad_unity(flat):
    # star with the unit symbol reproduces the field
    f = starprod.gaussian_symbol(np.array([0.1, -0.2]), SIG0)
    one = starprod.unit_symbol()
    z = np.array([[0.0, 0.0], [0.1, -0.2], [0.3, 0.1]])
    left = starprod.quad_product(one, f, z, HBAR)
    right = starprod.quad_product(f, one, z, HBAR)
    direct = np.array([f.value(p) for p in z])
    assert np.max(np.abs(left - direct)) < 1e-6
    assert np.max(np.abs(right - direct)) < 1e-6


def test_quad_hermiticity(flat):
    f = starprod.gaussian_symbol(np.array([0.1, -0.2]), SIG0)
    g = starprod.gaussian_symbol(np.array([-0.2, 0.1]), SIG0 * 1.2)
    z = np.array([[0.05, 0.0], [-0.1, 0.15]])
    fg = starprod.quad_product(f, g, z, HBAR)
    gf = starprod.quad_product(g.conj(), f.conj(), z, HBAR)
    assert np.max(np.abs(np.conj(fg) - gf)) < 1e-8


def test_quad_associativity(flat):
    f = starprod.gaussian_symbol(np.array([0.1, 0.0]), SIG0)
    g = starprod.gaussian_symbol(np.array([-0.1, 0.1]), SIG0)
    h = starprod.gaussian_symbol(np.array([0.0, -0.1]), SIG0)
    z = np.array([[0.0, 0.0], [0.1, 0.1]])
    cfg = starprod.QuadConfig(nodes=48)
    fg = starprod.quad_product(f, g, z, HBAR, cfg)
    gh = starprod.quad_product(g, h, z, HBAR, cfg)
    # associate through field wrappers built from the inner products
    fg_field = _tabulated_field(f, g, HBAR, cfg)
    gh_field = _tabulated_field(g, h, HBAR, cfg)
    left = starprod.quad_product(fg_field, h, z, HBAR, cfg)
    right = starprod.quad_product(f, gh_field, z, HBAR, cfg)
    assert np.max(np.abs(left - right)) < 1e-5


def _tabulated_field(f, g, hbar, cfg):
    # wrap the inner star product as an evaluable field with the
    # combined envelope of its factors
    cf, sf = f.envelope
    cg, sg = g.envelope
    center = 0.5 * (np.asarray(cf) + np.asarray(cg))
    sigma = max(sf, sg) * np.sqrt(2.0)

    def fn(u):
        return complex(starprod.quad_product(f, g, np.asarray(u, dtype=float),
                                             hbar, cfg))

    return starprod.FieldSymbol(fn, envelope=(center, sigma), name="inner")


def test_quad_matches_operator_oracle(flat):
    # coherent-width pair against the Hermite operator composition
    hbar = 0.2
    dim = 64
    c1, c2 = np.array([0.15, -0.1]), np.array([-0.1, 0.2])
    s0 = np.sqrt(hbar / 2.0)
    f = starprod.gaussian_symbol(c1, s0)
    g = starprod.gaussian_symbol(c2, s0)
    z = np.array([0.05, 0.0])
    got = complex(starprod.quad_product(f, g, z, hbar))
    fop = hermite.gaussian_operator(c1, s0, hbar, dim)
    gop = hermite.gaussian_operator(c2, s0, hbar, dim)
    want = hermite.symbol_trace(fop @ gop, z, hbar)
    assert abs(got - want) < 1e-10


def test_quad_check_flags_unresolvable(flat):
    # widths below the resolvability budget fail the doubling check
    f = starprod.gaussian_symbol(np.zeros(2), 0.12)
    g = starprod.gaussian_symbol(np.array([0.1, 0.0]), 0.12)
    cfg = starprod.QuadConfig(nodes=24, check=True, check_tol=1e-10)
    with pytest.raises(QuadratureError):
        starprod.quad_product(f, g, np.array([0.0, 0.0]), HBAR, cfg)


def test_field_symbol_derivative_defect(flat):
    f = starprod.gaussian_symbol(np.array([0.2, 0.1]), 0.8)
    assert f.derivative_defect(np.array([0.1, -0.1])) < 1e-6
