"""Intrinsic dynamics generated by the form eta = H_x(z).

Exponential map and its inverse, point flows, groupoid translations
g_{x,y}, inversion of the symplectic fibration ell, the order-(0|1)
symbol lift to the secondary phase space, and the zero-curvature
residual check.

Sign and scaling conventions (fixed by the flat displacement test and
enforced in the test suite): the generator of the v-flow is

    E_{x,v}(z) = -Psi(z) grad_z <v, H_x(z)>,

which equals the constant field 2 v on the flat model, and the
exponential map is the time-1/2 point of that flow, so that flat
exp_map(x, v) = x + v.
"""

from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import NewtonDiverged
from .numerics import (FD_STEP_FIRST, fd_mixed, newton, richardson, rk4,
                       rk4_nonautonomous)


@dataclass(frozen=True)
class FlowConfig:
    """Fixed-step RK4 flow settings.

    steps_per_unit scales with integration time; min_steps is the floor
    (at least 16); tol is the target accuracy used by refinement checks.
    """
    steps_per_unit: int = 256
    min_steps: int = 16
    tol: float = 1e-9

    def __post_init__(self):
        if self.min_steps < 16:
            raise ValueError("step count floor must be >= 16")
        if self.tol <= 0.0:
            raise ValueError("tolerance must be positive")

    def steps(self, t):
        return max(self.min_steps, int(np.ceil(self.steps_per_unit * abs(t))))


DEFAULT_FLOW = FlowConfig()


def _tangent_check(m, x, v):
    v = np.asarray(v, dtype=float)
    if m.model_id == "sphere":
        err = abs(float(np.dot(v, x)))
        if err > 1e-8:
            raise ValueError("sphere tangent vector must satisfy v . x = 0")
        v = v - x * float(np.dot(v, x))
    return v


def ether_generator(m, x, v):
    """Hamiltonian vector field of h(z) = <v, H_x(z)>.

    The sign is fixed so the flat generator is the constant field 2 v
    (the library-wide displacement convention). On the sphere the field
    is 2 [v (z.x) - x (z.v)], a rigid rotation about x cross v, so the
    trajectories are great circles.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if m.model_id == "sphere":
        def field(z):
            return 2.0 * (v * np.dot(z, x) - x * np.dot(z, v))
        return field

    two_v = 2.0 * v

    def field(z):
        return two_v
    return field


def _postprocess(m):
    if m.model_id == "sphere":
        return lambda z: z / np.linalg.norm(z)
    return None


def exp_map(m, x, v, cfg=None):
    """Ether exponential: the time-1/2 point of the v-flow from x.

    Parameters
    ----------
    m : manifold model
    x : ndarray
        Base point.
    v : ndarray
        Tangent vector at x (sphere: ambient, v . x = 0).
    cfg : FlowConfig, optional

    Returns
    -------
    ndarray
        Exp_x(v); flat model: exactly x + v up to integrator error.
    """
    cfg = cfg or DEFAULT_FLOW
    x = m.check_point(x)
    v = _tangent_check(m, x, v)
    if np.allclose(v, 0.0):
        return x.copy()
    field = ether_generator(m, x, v)
    out = rk4(field, x, 0.5, cfg.steps(0.5), postprocess=_postprocess(m))
    return out


def log_map(m, x, b, cfg=None):
    """Inverse of exp_map: v with exp_map(m, x, v) = b.

    Newton on the tangent components, seeded with the flat difference
    (sphere: the rotation-angle guess along the connecting great
    circle). Sphere input must not be antipodal to x.
    """
    cfg = cfg or DEFAULT_FLOW
    x = m.check_point(x)
    b = m.check_point(b)
    if m.model_id != "sphere":
        return b - x
    c = float(np.clip(np.dot(x, b), -1.0, 1.0))
    d = b - x * float(np.dot(x, b))
    nd = np.linalg.norm(d)
    if nd < 1e-13:
        if c > 0.0:
            return np.zeros(3)
        raise ValueError("log map undefined for antipodal input")
    theta = float(np.arccos(c))
    direction = d / nd
    e1, e2 = m.frame_at(x)
    chart_b = m.chart(b)
    v0 = theta * direction

    def residual(comp):
        v = comp[0] * e1 + comp[1] * e2
        return chart_b.to_chart(exp_map(m, x, v, cfg))

    comp0 = np.array([np.dot(v0, e1), np.dot(v0, e2)])
    comp = newton(residual, comp0, max_iter=50, step_tol=1e-12,
                  resid_tol=1e-12, fd_step=1e-6)
    return comp[0] * e1 + comp[1] * e2


def flow_point(m, x, v, y, t, cfg=None):
    """Flow the Hamiltonian <v, H_x> from the point y for time t.

    The generator is scaled as in exp_map: the flat trajectory is
    y + 2 v t, so t = 1/2 reproduces the exponential displacement.
    """
    cfg = cfg or DEFAULT_FLOW
    x = m.check_point(x)
    y = m.check_point(y)
    v = _tangent_check(m, x, v)
    if t == 0.0 or np.allclose(v, 0.0):
        return y.copy()
    field = ether_generator(m, x, v)
    return rk4(field, y, t, cfg.steps(t), postprocess=_postprocess(m))


def _segment(m, p0, p1):
    """Base path x(s) and velocity for one straight/great-circle leg."""
    if m.model_id == "sphere":
        alpha = float(np.arccos(np.clip(np.dot(p0, p1), -1.0, 1.0)))
        if alpha < 1e-13:
            return None
        sa = np.sin(alpha)

        def base(s):
            return (np.sin((1.0 - s) * alpha) * p0 + np.sin(s * alpha) * p1) / sa

        def vel(s):
            return alpha * (-np.cos((1.0 - s) * alpha) * p0
                            + np.cos(s * alpha) * p1) / sa
        return base, vel
    if np.allclose(p0, p1):
        return None
    dv = p1 - p0

    def base(s):
        return p0 + s * dv

    def vel(s):
        return dv
    return base, vel


def translate(m, path, z0, cfg=None):
    """Groupoid translation g_{x,y}(z0) along a waypoint path y -> x.

    Integrates dz/ds = E_{x(s), dx/ds}(z) over each straight-line /
    great-circle leg between consecutive waypoints (64 steps per leg at
    the default configuration). Zero curvature makes the result
    path-independent, which the tests check on the sphere.

    Parameters
    ----------
    path : sequence of points
        Waypoints ordered from y (first) to x (last).
    z0 : ndarray
        The point being transported.
    """
    cfg = cfg or DEFAULT_FLOW
    pts = [m.check_point(p) for p in path]
    if len(pts) < 1:
        raise ValueError("path needs at least one waypoint")
    z = m.check_point(z0).copy()
    steps = max(cfg.min_steps, cfg.steps_per_unit // 4)
    for p0, p1 in zip(pts[:-1], pts[1:]):
        seg = _segment(m, p0, p1)
        if seg is None:
            continue
        base, vel = seg

        def field(s, zz):
            return ether_generator(m, base(s), vel(s))(zz)

        z = rk4_nonautonomous(field, z, 0.0, 1.0, steps,
                              postprocess=_postprocess(m))
    return z


def _cotangent_rep(m, chart, u, comps):
    """Ambient covector with the given chart components at chart point u."""
    if m.model_id != "sphere":
        return np.asarray(comps, dtype=float)
    t = chart.jacobian(np.asarray(u, dtype=float))
    gram = t.T @ t
    coef = np.linalg.solve(gram, np.asarray(comps, dtype=float))
    return t @ coef


def ell_invert(m, x, eta, cfg=None):
    """Invert the fibration: find z with ether_form(m, x, z) = eta.

    Newton from z = x in the chart at x; the flat case is linear and
    converges in one step to x + (1/2) Psi eta.

    Raises
    ------
    NewtonDiverged
        |eta| at or beyond the model fibration radius, or no
        convergence (outside the fibration neighborhood).
    """
    x = m.check_point(x)
    eta = np.asarray(eta, dtype=float)
    if m.model_id == "sphere":
        eta = eta - x * float(np.dot(eta, x))
    if np.linalg.norm(eta) >= m.fibration_radius:
        raise NewtonDiverged("eta outside the fibration neighborhood",
                             iterations=0,
                             residual=float(np.linalg.norm(eta)))
    chart = m.chart(x)

    if m.model_id == "sphere":
        e1, e2 = chart.e1, chart.e2
        target = np.array([np.dot(eta, e1), np.dot(eta, e2)])

        def residual(u):
            p = chart.to_manifold(u)
            w = m.ether_form(x, p)
            return np.array([np.dot(w, e1), np.dot(w, e2)]) - target

        def jac(u):
            t = chart.jacobian(u)
            cols = []
            for b in range(2):
                d = 2.0 * np.cross(x, t[:, b])
                cols.append([np.dot(d, e1), np.dot(d, e2)])
            return np.array(cols).T

        u = newton(residual, np.zeros(2), jac=jac, max_iter=50,
                   step_tol=1e-14, resid_tol=1e-13)
        return chart.to_manifold(u)

    def residual(u):
        return m.ether_form(x, chart.to_manifold(u)) - eta

    def jac(u):
        return 2.0 * m.J

    u = newton(residual, np.zeros(m.dim), jac=jac, max_iter=50,
               step_tol=1e-14, resid_tol=1e-13)
    return chart.to_manifold(u)


def lift_symbol(m, f, x, eta, order=1, hbar=1.0, step=1e-3):
    """Symbol lift to the secondary phase space, order 0 or 1 in hbar.

    Order 0 is the pullback through the fibration, f(ell(x, eta)).
    Order 1 adds the two O(hbar) correction terms: the mixed-trace term

        -(i hbar / 2) sum_k d^2/dx^k d eta_k [f(ell(x, eta))]

    and the connection-type term

        -(i hbar / 2) sum_s d/d eta_s [f(ell)] *
                      sum_k d/d eta_k [ dH_x(ell)_s / dz^k ],

    with all derivatives by central differences in the chart at x
    (Richardson-refined for the mixed trace). On the flat model both
    corrections vanish identically: the first is the trace of a
    symmetric array against the antisymmetric Psi, the second
    differentiates a constant Jacobian.

    Parameters
    ----------
    f : callable
        Scalar field on chart coordinates at x.
    order : 0 or 1
    """
    x = m.check_point(x)
    eta = np.asarray(eta, dtype=float)
    dim = m.dim
    chart = m.chart(x)
    if m.model_id == "sphere":
        eta = eta - x * float(np.dot(eta, x))
        w0 = np.array([np.dot(eta, chart.e1), np.dot(eta, chart.e2)])
    else:
        w0 = eta.copy()

    def composite(uw):
        u = uw[:dim]
        w = uw[dim:]
        base = chart.to_manifold(u)
        rep = _cotangent_rep(m, chart, u, w)
        if m.model_id == "sphere":
            rep = rep - base * float(np.dot(rep, base))
        z = ell_invert(m, base, rep)
        return f(chart.to_chart(z))

    uw0 = np.concatenate([np.zeros(dim), w0])
    value = complex(composite(uw0))
    if order == 0:
        return value
    if order != 1:
        raise ValueError("order must be 0 or 1")

    def mixed_trace(h):
        return sum(fd_mixed(composite, uw0, k, dim + k, h, h)
                   for k in range(dim))

    t1 = richardson(mixed_trace(step), mixed_trace(0.5 * step), 2)

    # z-Jacobian of the chart components of H_x, evaluated at ell(x, .)
    def hx_jacobian(w):
        rep = _cotangent_rep(m, chart, np.zeros(dim), w)
        if m.model_id == "sphere":
            rep = rep - x * float(np.dot(rep, x))
        z = ell_invert(m, x, rep)
        uz = chart.to_chart(z)
        d = np.zeros((dim, dim))
        for k in range(dim):
            e = np.zeros(dim)
            e[k] = FD_STEP_FIRST
            hp = _ether_chart_components(m, chart, x, chart.to_manifold(uz + e))
            hm = _ether_chart_components(m, chart, x, chart.to_manifold(uz - e))
            d[:, k] = (hp - hm) / (2.0 * FD_STEP_FIRST)
        return d

    def f_at_w(w):
        return composite(np.concatenate([np.zeros(dim), w]))

    grad_w = np.zeros(dim)
    bsum = np.zeros(dim)
    for k in range(dim):
        e = np.zeros(dim)
        e[k] = step
        grad_w[k] = (f_at_w(w0 + e) - f_at_w(w0 - e)) / (2.0 * step)
        dj = (hx_jacobian(w0 + e) - hx_jacobian(w0 - e)) / (2.0 * step)
        bsum += dj[:, k]
    t2 = float(np.dot(grad_w, bsum))

    return value - 0.5j * hbar * (t1 + t2)


def _ether_chart_components(m, chart, x, z):
    """Components of H_x(z) along the chart coordinate basis at x."""
    w = m.ether_form(x, z)
    if m.model_id != "sphere":
        return w
    t = chart.jacobian(np.zeros(2))
    return t.T @ w


def zero_curvature_residual(m, x, z, step=FD_STEP_FIRST):
    """Residual of the structure equation for the generating form.

    max over j < k of | d_j H_k - d_k H_j + {H_j, H_k} | at (x, z):
    x-derivatives by central differences in the chart at x, the Poisson
    bracket in z analytic. Zero curvature makes this vanish for both
    built-in models.
    """
    x = m.check_point(x)
    z = m.check_point(z)
    dim = m.dim
    chart = m.chart(x)

    def h_comps(u):
        base = chart.to_manifold(u)
        w = m.ether_form(base, z)
        if m.model_id != "sphere":
            return w
        t = chart.jacobian(u)
        return t.T @ w

    grad = np.zeros((dim, dim))  # grad[j, k] = d_{x^j} H_k
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = step
        grad[j] = (h_comps(e) - h_comps(-e)) / (2.0 * step)

    if m.model_id == "sphere":
        t = chart.jacobian(np.zeros(2))
        # H_k(z) = 2 z . (T_k cross x), ambient gradient 2 (T_k cross x)
        gv = [2.0 * np.cross(t[:, k], x) for k in range(2)]

        def bracket(j, k):
            return float(np.dot(z, np.cross(gv[j], gv[k])))
    else:
        psi = m.psi_at(z)
        gv = [-2.0 * (m.J @ np.eye(dim)[:, j]) for j in range(dim)]

        def bracket(j, k):
            return float(gv[j] @ psi @ gv[k])

    worst = 0.0
    for j in range(dim):
        for k in range(j + 1, dim):
            worst = max(worst,
                        abs(grad[j, k] - grad[k, j] + bracket(j, k)))
    return worst
