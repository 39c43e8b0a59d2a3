"""Seeded invariant suites behind the command line front end.

Each suite samples with one numpy Generator and returns plain row
dicts {name, status, residual, tol, samples, skipped, seconds}; a
report passes iff every row passes.  Rows are assembled in a fixed
order so a fixed seed fixes the whole report.
"""

import time

import numpy as np

from . import ether, evolution, geometry, kernel, starprod
from .errors import FocalTriple, MembraneChartError

# Sphere samples stay inside a geodesic cap of this radius so that all
# reflection triangles are nonfocal and membranes fit one hemisphere.
CAP_RADIUS = 0.45


def _row(name, residual, tol, samples, seconds, skipped=0):
    status = "pass" if residual <= tol else "fail"
    return {
        "name": name,
        "status": status,
        "residual": float(residual),
        "tol": float(tol),
        "samples": int(samples),
        "skipped": int(skipped),
        "seconds": float(seconds),
    }


def sample_point(m, rng, scale=0.8):
    """One random manifold point; flat components are normal(0, scale)."""
    if m.model_id == "sphere":
        v = rng.normal(size=3)
        return v / np.linalg.norm(v)
    return scale * rng.normal(size=m.dim)


def sample_near(m, rng, x, radius):
    """Random point within the given geodesic radius of x."""
    if m.model_id != "sphere":
        return x + radius * rng.uniform(-1.0, 1.0, size=m.dim)
    e1, e2 = m.frame_at(x)
    ang = rng.uniform(0.0, 2.0 * np.pi)
    r = radius * np.sqrt(rng.uniform(0.0, 1.0))
    v = np.cos(ang) * e1 + np.sin(ang) * e2
    return np.cos(r) * x + np.sin(r) * v


def sample_triple(m, rng):
    """Random kernel triple (x, y, z), sphere samples in one cap."""
    if m.model_id != "sphere":
        return tuple(sample_point(m, rng) for _ in range(3))
    c = sample_point(m, rng)
    return tuple(sample_near(m, rng, c, CAP_RADIUS) for _ in range(3))


def geometry_suite(m, rng, samples=32):
    """Reflection axioms: involution, fixed point, symplecticity,
    form antisymmetry."""
    rows = []
    t0 = time.perf_counter()
    w_inv = w_fix = w_symp = w_anti = 0.0
    for _ in range(samples):
        x = sample_point(m, rng)
        z = sample_near(m, rng, x, CAP_RADIUS)
        sz = m.project(m.reflect(x, z))
        w_inv = max(w_inv, float(np.max(np.abs(m.reflect(x, sz) - z))))
        w_fix = max(w_fix, float(np.max(np.abs(m.reflect(x, x) - x))))
        ds = geometry.reflect_jacobian_chart(m, x, z)
        lhs = ds.T @ m.omega_at(sz) @ ds
        w_symp = max(w_symp, float(np.max(np.abs(lhs - m.omega_at(z)))))
        w_anti = max(
            w_anti,
            float(np.max(np.abs(m.ether_form(x, sz) + m.ether_form(x, z)))),
        )
    dt = (time.perf_counter() - t0) / 4.0
    rows.append(_row("geometry/reflect-involution", w_inv, 1e-8, samples, dt))
    rows.append(_row("geometry/reflect-fixed-point", w_fix, 1e-10, samples, dt))
    rows.append(_row("geometry/reflect-symplectic", w_symp, 1e-8, samples, dt))
    rows.append(_row("geometry/form-antisymmetry", w_anti, 1e-8, samples, dt))
    return rows


def ether_suite(m, rng, samples=16):
    """Structure equation, exp/log consistency, geodesic symmetry."""
    rows = []
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(samples):
        x = sample_point(m, rng)
        z = sample_near(m, rng, x, CAP_RADIUS)
        worst = max(worst, ether.zero_curvature_residual(m, x, z))
    dt = time.perf_counter() - t0
    rows.append(_row("ether/zero-curvature", worst, 1e-6, samples, dt))

    t0 = time.perf_counter()
    w_log = w_sym = 0.0
    for _ in range(samples):
        x = sample_point(m, rng)
        b = sample_near(m, rng, x, CAP_RADIUS)
        v = ether.log_map(m, x, b)
        w_log = max(w_log, float(np.max(np.abs(ether.exp_map(m, x, v) - b))))
        sx = m.project(m.reflect(x, ether.exp_map(m, x, v)))
        w_sym = max(w_sym, float(np.max(np.abs(ether.exp_map(m, x, -v) - sx))))
    dt = (time.perf_counter() - t0) / 2.0
    rows.append(_row("ether/exp-log-roundtrip", w_log, 1e-9, samples, dt))
    rows.append(_row("ether/geodesic-symmetry", w_sym, 1e-8, samples, dt))
    return rows


def kernel_suite(m, rng, samples=24):
    """Membrane phase and amplitude checks; sphere counts branches."""
    rows = []
    if m.model_id != "sphere":
        t0 = time.perf_counter()
        w_ph = w_amp = 0.0
        for _ in range(samples):
            x, y, z = sample_triple(m, rng)
            kv = kernel.kernel_value(m, x, y, z, hbar=1.0)
            w_ph = max(w_ph, abs(kv.phase - kernel.flat_phase(x, y, z)))
            w_amp = max(w_amp, abs(kv.amplitude - 4.0**m.n) / 4.0**m.n)
        dt = (time.perf_counter() - t0) / 2.0
        rows.append(_row("kernel/flat-phase-closed-form", w_ph, 1e-8,
                         samples, dt))
        rows.append(_row("kernel/flat-amplitude", w_amp, 1e-10, samples, dt))
    else:
        t0 = time.perf_counter()
        w_mult = 0.0
        skipped = 0
        for _ in range(samples):
            x, y, z = sample_triple(m, rng)
            found = 0
            try:
                for branch in (0, 1):
                    kernel.solve_triangle(m, x, y, z, branch)
                    found += 1
            except FocalTriple:
                skipped += 1
                continue
            w_mult = max(w_mult, abs(found - 2.0))
        dt = time.perf_counter() - t0
        rows.append(_row("kernel/sphere-multiplicity-two", w_mult, 0.0,
                         samples, dt, skipped=skipped))

    t0 = time.perf_counter()
    worst = 0.0
    hj_tol = 1e-6 if m.model_id != "sphere" else 1e-4
    n_hj = max(4, samples // 4)
    for _ in range(n_hj):
        x, y, z = sample_triple(m, rng)
        try:
            worst = max(worst, kernel.phase_gradient_residual(m, x, y, z))
        except (FocalTriple, MembraneChartError):
            continue
    dt = time.perf_counter() - t0
    rows.append(_row("kernel/phase-differential", worst, hj_tol, n_hj, dt))
    return rows


def starprod_suite(m, rng, hbar, samples=8):
    """Star product identities at smoke scale."""
    rows = []
    if m.model_id != "sphere":
        t0 = time.perf_counter()
        q = starprod.PolySymbol.parse("q")
        p = starprod.PolySymbol.parse("p")
        comm = starprod.moyal_poly(q, p, hbar) - starprod.moyal_poly(p, q, hbar)
        resid = 0.0
        for mi, c in comm.terms.items():
            want = 1j * hbar if mi == (0, 0) else 0.0
            resid = max(resid, abs(c - want))
        dt = time.perf_counter() - t0
        rows.append(_row("starprod/moyal-commutator", resid, 1e-14, 1, dt))

        t0 = time.perf_counter()
        f = starprod.PolySymbol.parse("q^2 p")
        g = starprod.PolySymbol.parse("q p^2 + 0.5q")
        exact = starprod.moyal_poly(f, g, 0.05)
        cfg = starprod.SeriesConfig(hbar=0.05, order=2)
        worst = 0.0
        for _ in range(samples):
            z = sample_point(m, rng)
            # series fields live on the chart at z, so recenter there
            ff = starprod.poly_field(f, center=z)
            gf = starprod.poly_field(g, center=z)
            worst = max(worst,
                        abs(starprod.series_product(m, ff, gf, z, cfg)
                            - exact.evaluate(z)))
        dt = time.perf_counter() - t0
        rows.append(_row("starprod/series-vs-moyal", worst, 1e-4, samples, dt))

        sig = np.sqrt(hbar / 2.0)
        fg = starprod.gaussian_symbol(np.array([0.1, -0.2]), 1.5 * sig)
        gg = starprod.gaussian_symbol(np.array([-0.2, 0.1]), 1.2 * sig)
        zs = np.array([[0.0, 0.0], [0.15, -0.1], [-0.1, 0.2]])

        t0 = time.perf_counter()
        one = starprod.unit_symbol()
        left = starprod.quad_product(fg, one, zs, hbar)
        worst = float(np.max(np.abs(left - fg.value(zs))))
        dt = time.perf_counter() - t0
        rows.append(_row("starprod/quad-unity", worst, 1e-6, len(zs), dt))

        t0 = time.perf_counter()
        fw = starprod.quad_product(fg, gg, zs, hbar)
        rev = starprod.quad_product(gg.conj(), fg.conj(), zs, hbar)
        worst = float(np.max(np.abs(np.conj(fw) - rev)))
        dt = time.perf_counter() - t0
        rows.append(_row("starprod/quad-hermiticity", worst, 1e-8, len(zs), dt))
    else:
        t0 = time.perf_counter()
        cfg = starprod.SeriesConfig(hbar=hbar, order=1)
        worst = 0.0
        for _ in range(samples):
            x = sample_point(m, rng)

            def fn(u):
                u = np.asarray(u, dtype=float)
                return np.exp(-0.5 * np.sum(u * u, axis=-1)) * (1.0 + u[..., 0])

            f = starprod.FieldSymbol(fn, name="bump")
            worst = max(worst, starprod.germ_residual(m, f, x, cfg))
        dt = time.perf_counter() - t0
        rows.append(_row("starprod/germ-derivation", worst, 1e-8, samples, dt))
    return rows


def evolution_suite(m, rng, hbar, samples=4):
    """Quadratic oracle agreement, amplitude law, free shift."""
    rows = []
    if m.model_id == "sphere" or m.n != 1:
        return rows
    osc = starprod.PolySymbol.parse("0.5q^2+0.5p^2")
    osc_f = starprod.poly_field(osc)

    t0 = time.perf_counter()
    worst = 0.0
    pts = rng.uniform(-0.7, 0.7, size=(samples, 2))
    for xg in pts:
        ov = evolution.oracle_symbol(osc, xg, 1.0, hbar, 128)
        sv = evolution.evolution_symbol(osc_f, xg, 1.0, hbar)
        worst = max(worst, abs(sv.value - ov) / abs(ov))
    dt = time.perf_counter() - t0
    rows.append(_row("evolution/quadratic-vs-oracle", worst, 1e-5,
                     samples, dt))

    t0 = time.perf_counter()
    worst = 0.0
    x = np.array([0.5, 0.3])
    for t in (0.5, 1.0):
        sv = evolution.evolution_symbol(osc_f, x, t, hbar)
        worst = max(worst, abs(sv.amplitude - 1.0 / np.cos(t / 2.0)))
    dt = time.perf_counter() - t0
    rows.append(_row("evolution/amplitude-law", worst, 1e-8, 2, dt))

    t0 = time.perf_counter()
    hq = starprod.PolySymbol.parse("q")
    worst = 0.0
    for xg in pts:
        ov = evolution.oracle_symbol(hq, xg, 0.5, hbar, 128)
        worst = max(worst, abs(ov - np.exp(-1j * 0.5 * xg[0] / hbar)))
    dt = time.perf_counter() - t0
    rows.append(_row("evolution/free-shift-closed-form", worst, 1e-9,
                     samples, dt))
    return rows


def run_all(m, hbar, seed, samples_scale=1.0):
    """Run every suite that applies to the model.

    Parameters
    ----------
    m : manifold model
    hbar : float
        Planck constant for the star product and evolution rows.
    seed : int
        Generator seed; fixes the report.
    samples_scale : float
        Multiplier on the per-suite default sample counts.

    Returns
    -------
    list of dict
        Check rows in a fixed order.
    """
    rng = np.random.default_rng(seed)

    def n(base):
        return max(2, int(round(base * samples_scale)))

    rows = []
    rows += geometry_suite(m, rng, samples=n(32))
    rows += ether_suite(m, rng, samples=n(16))
    rows += kernel_suite(m, rng, samples=n(24))
    rows += starprod_suite(m, rng, hbar, samples=n(8))
    rows += evolution_suite(m, rng, hbar, samples=n(4))
    return rows
