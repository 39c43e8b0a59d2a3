"""Shared numerical building blocks.

Fixed-step RK4 integration, damped Newton, central finite differences,
Richardson extrapolation, signed polygon areas, and quadrature grids.
All solvers are deterministic; tolerances follow the library-wide
defaults (first derivatives: step 1e-5, second derivatives: step 1e-3,
relative to coordinate scale 1).
"""

import numpy as np

from .errors import IntegratorError, NewtonDiverged

FD_STEP_FIRST = 1e-5
FD_STEP_SECOND = 1e-3


def rk4(field, y0, t, steps, postprocess=None):
    """Integrate dy/ds = field(y) from s=0 to s=t with fixed-step RK4.

    Parameters
    ----------
    field : callable
        Maps a state array to its derivative, same shape.
    y0 : ndarray
        Initial state.
    t : float
        Total integration time (may be negative).
    steps : int
        Number of RK4 steps, at least 1.
    postprocess : callable, optional
        Applied to the state after every step (e.g. renormalization).

    Returns
    -------
    ndarray
        Final state.
    """
    y = np.array(y0, dtype=float)
    h = t / steps
    for _ in range(steps):
        k1 = field(y)
        k2 = field(y + 0.5 * h * k1)
        k3 = field(y + 0.5 * h * k2)
        k4 = field(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if postprocess is not None:
            y = postprocess(y)
    if not np.all(np.isfinite(y)):
        raise IntegratorError("RK4 produced non-finite state")
    return y


def rk4_sampled(field, y0, t, steps, postprocess=None):
    """Like rk4 but returns the full (steps+1, ...) sample array."""
    y = np.array(y0, dtype=float)
    out = np.empty((steps + 1,) + y.shape)
    out[0] = y
    h = t / steps
    for i in range(steps):
        k1 = field(y)
        k2 = field(y + 0.5 * h * k1)
        k3 = field(y + 0.5 * h * k2)
        k4 = field(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if postprocess is not None:
            y = postprocess(y)
        out[i + 1] = y
    if not np.all(np.isfinite(y)):
        raise IntegratorError("RK4 produced non-finite state")
    return out


def rk4_nonautonomous(field, y0, s0, s1, steps, postprocess=None):
    """Fixed-step RK4 for dy/ds = field(s, y) from s0 to s1."""
    y = np.array(y0, dtype=float)
    h = (s1 - s0) / steps
    s = s0
    for _ in range(steps):
        k1 = field(s, y)
        k2 = field(s + 0.5 * h, y + 0.5 * h * k1)
        k3 = field(s + 0.5 * h, y + 0.5 * h * k2)
        k4 = field(s + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if postprocess is not None:
            y = postprocess(y)
        s += h
    if not np.all(np.isfinite(y)):
        raise IntegratorError("RK4 produced non-finite state")
    return y


def newton(residual, x0, jac=None, max_iter=50, step_tol=1e-12,
           resid_tol=0.0, fd_step=1e-7):
    """Damped Newton iteration for residual(x) = 0.

    Parameters
    ----------
    residual : callable
        Maps (k,) to (k,).
    x0 : ndarray
        Initial guess.
    jac : callable, optional
        Jacobian at x; central differences with step fd_step otherwise.
    max_iter : int
        Iteration cap (default 50).
    step_tol : float
        Convergence when the Newton step norm drops below this.
    resid_tol : float
        Optional early exit on residual norm.

    Returns
    -------
    ndarray
        The solution.

    Raises
    ------
    NewtonDiverged
        No convergence within max_iter, or the damping line search failed.
    """
    x = np.array(x0, dtype=float)
    r = residual(x)
    rn = np.linalg.norm(r)
    for it in range(max_iter):
        if rn <= resid_tol:
            return x
        if jac is not None:
            jm = jac(x)
        else:
            jm = fd_jacobian(residual, x, fd_step)
        try:
            step = np.linalg.solve(jm, -r)
        except np.linalg.LinAlgError:
            raise NewtonDiverged("singular Newton Jacobian",
                                 iterations=it, residual=float(rn))
        lam = 1.0
        for _ in range(10):
            xn = x + lam * step
            r_new = residual(xn)
            rn_new = np.linalg.norm(r_new)
            if rn_new < rn or rn_new <= resid_tol:
                break
            lam *= 0.5
        else:
            # no damping factor reduced the residual
            if np.linalg.norm(step) < step_tol:
                return x
            raise NewtonDiverged("Newton damping failed",
                                 iterations=it, residual=float(rn))
        x, r, rn = xn, r_new, rn_new
        if np.linalg.norm(lam * step) < step_tol:
            return x
    if rn <= max(resid_tol, 1e-10):
        return x
    raise NewtonDiverged("Newton did not converge",
                         iterations=max_iter, residual=float(rn))


def fd_gradient(f, x, step=FD_STEP_FIRST):
    """Central-difference gradient of a scalar function on R^k."""
    x = np.asarray(x, dtype=float)
    g = np.zeros(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = step
        g[i] = (f(x + e) - f(x - e)) / (2.0 * step)
    return g


def fd_jacobian(F, x, step=FD_STEP_FIRST):
    """Central-difference Jacobian of a vector function."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = step
        cols.append((np.asarray(F(x + e)) - np.asarray(F(x - e)))
                    / (2.0 * step))
    return np.stack(cols, axis=-1)


def fd_hessian(f, x, step=FD_STEP_SECOND):
    """Central-difference symmetric Hessian of a scalar function."""
    x = np.asarray(x, dtype=float)
    k = x.size
    h = np.zeros((k, k))
    f0 = f(x)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = step
        h[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / step ** 2
        for j in range(i + 1, k):
            ej = np.zeros(k)
            ej[j] = step
            v = (f(x + ei + ej) - f(x + ei - ej)
                 - f(x - ei + ej) + f(x - ei - ej)) / (4.0 * step ** 2)
            h[i, j] = v
            h[j, i] = v
    return h


def fd_mixed(f, x, i, j, step_i, step_j):
    """Central 4-point mixed second difference d2 f / dx_i dx_j."""
    x = np.asarray(x, dtype=float)
    ei = np.zeros(x.size)
    ej = np.zeros(x.size)
    ei[i] = step_i
    ej[j] = step_j
    return (f(x + ei + ej) - f(x + ei - ej)
            - f(x - ei + ej) + f(x - ei - ej)) / (4.0 * step_i * step_j)


def richardson(coarse, fine, order):
    """Eliminate the leading O(h^order) error from a step-halved pair."""
    w = 2.0 ** order
    return (w * fine - coarse) / (w - 1.0)


def loglog_slope(hs, errs):
    """Least-squares slope of log(err) against log(h)."""
    hs = np.asarray(hs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if np.any(errs <= 0.0):
        raise ValueError("order fit needs positive errors")
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


def shoelace(points):
    """Signed area of a closed planar polygon (counterclockwise positive).

    Parameters
    ----------
    points : ndarray, shape (k, 2)
        Vertices in order; the polygon closes from the last back to the
        first vertex.
    """
    p = np.asarray(points, dtype=float)
    q = np.roll(p, -1, axis=0)
    return 0.5 * float(np.sum(p[:, 0] * q[:, 1] - q[:, 0] * p[:, 1]))


def solid_angle(a, b, c):
    """Signed solid angle of the spherical triangle (a, b, c).

    Positive when (a, b, c) winds counterclockwise seen from outside the
    sphere. Uses the half-angle tangent form, stable for thin slivers.
    """
    num = float(np.dot(a, np.cross(b, c)))
    den = 1.0 + float(np.dot(a, b)) + float(np.dot(b, c)) + float(np.dot(c, a))
    return 2.0 * np.arctan2(num, den)


def sphere_area_grid(n_theta, n_phi):
    """Quadrature grid on S^2 for the standard area measure.

    Gauss-Legendre in cos(theta) times a uniform trapezoid rule in phi
    (exact for trigonometric polynomials of bounded degree).

    Returns
    -------
    points : ndarray, shape (n_theta * n_phi, 3)
    weights : ndarray, shape (n_theta * n_phi,)
        Weights sum to 4*pi.
    """
    c, wc = np.polynomial.legendre.leggauss(n_theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    s = np.sqrt(1.0 - c ** 2)
    pts = np.empty((n_theta, n_phi, 3))
    pts[:, :, 0] = s[:, None] * np.cos(phi)[None, :]
    pts[:, :, 1] = s[:, None] * np.sin(phi)[None, :]
    pts[:, :, 2] = c[:, None] * np.ones(n_phi)[None, :]
    w = (wc[:, None] * (2.0 * np.pi / n_phi)) * np.ones(n_phi)[None, :]
    return pts.reshape(-1, 3), w.reshape(-1)


def gauss_legendre(a, b, n):
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return mid + half * x, half * w
