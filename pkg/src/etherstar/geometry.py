"""Manifold models: flat R^{2n} and the unit sphere S^2.

Each model carries a symplectic form, a chart family, a reflection map
s_x, and the generating 1-form eta = H_x(z) ("Ether Hamiltonian") that
drives everything else in the library.

Conventions, fixed once and enforced by tests:

* Flat phase space uses Darboux coordinates (q1, p1, ..., qn, pn) and
  the constant form  omega = J,  J = [[0, 1], [-1, 0]] per block, so
  omega(u, v) = u^T J v = u_q v_p - u_p v_q  and  Psi = omega^{-1} = -J.
* Sphere points are ambient unit 3-vectors. 2x2 chart matrices live in
  a deterministic orthonormal tangent frame (e1, e2) with e1 x e2 = z,
  built from the smallest-magnitude ambient axis. In that frame the
  area-form orientation gives  omega_12 = -1,  i.e. omega(v, w) =
  -z . (v x w),  which makes the Poisson bracket the standard
  {f, g}(z) = z . (grad f x grad g).
* Sphere charts are gnomonic (central projection onto the tangent
  plane): geodesics map to straight lines and the connection
  coefficients vanish at the chart center, which is where all chart
  quantities are evaluated.

Points, tangent vectors, and covector components are plain numpy
arrays; the model object tells you how to interpret them.
"""

import numpy as np

from .errors import ChartDomainError, OffManifoldError

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def j_matrix(n):
    """Block-diagonal standard symplectic matrix for n degrees of freedom."""
    return np.kron(np.eye(n), J2)


def _normalize(v):
    return v / np.linalg.norm(v)


class FlatChart:
    """Global Darboux chart translated to a center point."""

    def __init__(self, model, center):
        self.model = model
        self.center = np.asarray(center, dtype=float)
        self.dim = model.dim

    def to_chart(self, p):
        return np.asarray(p, dtype=float) - self.center

    def to_manifold(self, u):
        return self.center + np.asarray(u, dtype=float)

    def jacobian(self, u):
        # d(manifold point)/d(chart coords)
        return np.eye(self.dim)

    def coords_jacobian(self, p):
        # d(chart coords)/d(manifold point)
        return np.eye(self.dim)

    def omega(self, u):
        return self.model.J.copy()


class SphereChart:
    """Gnomonic chart centered at a point of S^2.

    Chart coordinates u cover the open hemisphere around the center;
    the inverse image of u is normalize(center + u_1 e_1 + u_2 e_2).
    Great circles through the center map to straight lines, so the
    chart is geodesic at its center and the connection coefficients
    vanish there.
    """

    def __init__(self, model, center):
        self.model = model
        self.center = _normalize(np.asarray(center, dtype=float))
        self.e1, self.e2 = model.frame_at(self.center)
        self.dim = 2

    def to_manifold(self, u):
        w = self.center + u[0] * self.e1 + u[1] * self.e2
        return w / np.linalg.norm(w)

    def to_chart(self, p):
        p = np.asarray(p, dtype=float)
        d = float(np.dot(p, self.center))
        if d <= 1e-12:
            raise ChartDomainError("point outside the chart hemisphere")
        return np.array([np.dot(p, self.e1), np.dot(p, self.e2)]) / d

    def jacobian(self, u):
        # columns are d(point)/d(u_a); point = w/|w|, w = center + u.e
        w = self.center + u[0] * self.e1 + u[1] * self.e2
        nw = np.linalg.norm(w)
        p = w / nw
        cols = []
        for e in (self.e1, self.e2):
            cols.append((e - p * np.dot(p, e)) / nw)
        return np.stack(cols, axis=1)

    def coords_jacobian(self, p):
        # rows are d(u_a)/d(point components) at the manifold point p
        p = np.asarray(p, dtype=float)
        d = float(np.dot(p, self.center))
        rows = []
        for e in (self.e1, self.e2):
            rows.append((e * d - self.center * np.dot(p, e)) / d ** 2)
        return np.stack(rows, axis=0)

    def omega(self, u):
        # pullback of the symplectic form: omega_ab = -p . (T_a x T_b)
        p = self.to_manifold(u)
        t = self.jacobian(u)
        w12 = -float(np.dot(p, np.cross(t[:, 0], t[:, 1])))
        return np.array([[0.0, w12], [-w12, 0.0]])


class FlatModel:
    """Flat phase space R^{2n} with the constant Darboux form."""

    def __init__(self, n=1):
        if n < 1:
            raise ValueError("flat model needs n >= 1")
        self.n = n
        self.dim = 2 * n
        self.model_id = "flat:%d" % n
        self.atlas = "single global Darboux chart"
        self.is_compact = False
        self.has_analytic_reflection = True
        self.branch_count = 1
        self.fibration_radius = np.inf
        self.J = j_matrix(n)

    def check_point(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dim,) or not np.all(np.isfinite(z)):
            raise OffManifoldError(
                "flat:%d point must be a finite vector of length %d"
                % (self.n, self.dim))
        return z

    def project(self, z):
        return np.asarray(z, dtype=float)

    def chart(self, center):
        return FlatChart(self, self.check_point(center))

    def omega_at(self, z):
        self.check_point(z)
        return self.J.copy()

    def psi_at(self, z):
        self.check_point(z)
        return -self.J

    def reflect(self, x, z):
        return 2.0 * np.asarray(x, dtype=float) - np.asarray(z, dtype=float)

    def reflect_jacobian_chart(self, x, z):
        # s_x is affine, the chart derivative is exactly -I
        return -np.eye(self.dim)

    def ether_form(self, x, z):
        # H_x(z) = 2 omega (z - x), components in the global chart
        return 2.0 * self.J @ (np.asarray(z, float) - np.asarray(x, float))

    def ether_form_chart(self, x, z):
        return self.ether_form(x, z)

    def christoffel_at(self, z):
        return np.zeros((self.dim, self.dim, self.dim))

    def dm_density(self, u):
        # Liouville density |Pf omega| in Darboux coordinates
        return 1.0


class SphereModel:
    """Unit sphere S^2 with the (unit) area symplectic form."""

    def __init__(self):
        self.n = 1
        self.dim = 2
        self.model_id = "sphere"
        self.atlas = "gnomonic tangent charts, deterministic frames"
        self.is_compact = True
        self.has_analytic_reflection = True
        self.branch_count = 2
        self.fibration_radius = 2.0
        # model metadata for the quantization condition: integral of the
        # first Chern class of the quantizing line bundle
        self.chern_integral = 2

    def check_point(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape != (3,) or abs(np.linalg.norm(z) - 1.0) > 1e-8:
            raise OffManifoldError("sphere point must be a unit 3-vector")
        return z

    def project(self, z):
        return _normalize(np.asarray(z, dtype=float))

    def frame_at(self, z):
        """Deterministic orthonormal tangent frame with e1 x e2 = z."""
        z = self.project(z)
        k = int(np.argmin(np.abs(z)))
        axis = np.zeros(3)
        axis[k] = 1.0
        e1 = _normalize(axis - z[k] * z)
        e2 = np.cross(z, e1)
        return e1, e2

    def chart(self, center):
        return SphereChart(self, self.check_point(center))

    def omega_at(self, z):
        self.check_point(z)
        # omega(v, w) = -z . (v x w) in the right-handed frame (e1, e2)
        return np.array([[0.0, -1.0], [1.0, 0.0]])

    def psi_at(self, z):
        self.check_point(z)
        return np.array([[0.0, 1.0], [-1.0, 0.0]])

    def reflect(self, x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        return 2.0 * float(np.dot(x, z)) * x - z

    def reflect_jacobian_ambient(self, x):
        x = np.asarray(x, dtype=float)
        return 2.0 * np.outer(x, x) - np.eye(3)

    def ether_form(self, x, z):
        # ambient representative of H_x(z) = 2 [x cross z] . dx; it is
        # automatically orthogonal to x (the T*_x gauge)
        return 2.0 * np.cross(np.asarray(x, float), np.asarray(z, float))

    def ether_form_chart(self, x, z):
        w = self.ether_form(x, z)
        e1, e2 = self.frame_at(x)
        return np.array([np.dot(w, e1), np.dot(w, e2)])

    def christoffel_at(self, z):
        # gnomonic charts are geodesic at their center
        self.check_point(z)
        return np.zeros((2, 2, 2))

    def dm_density(self, u):
        # |Pf omega| pulled back to the gnomonic chart
        return (1.0 + float(np.dot(u, u))) ** -1.5


class LambertChart:
    """Equal-area azimuthal chart: Darboux coordinates on the sphere.

    Radial profile rho = 2 sin(theta/2) makes the pullback of the
    symplectic form constant, omega_chart = [[0, -1], [1, 0]], so these
    are canonical coordinates (the Liouville measure is Lebesgue).
    Identities stated in canonical coordinates (symbol-calculus
    expansions, transport equations) must be evaluated here rather than
    in the gnomonic chart. Covers everything but the antipode.
    """

    def __init__(self, model, center):
        self.model = model
        self.center = _normalize(np.asarray(center, dtype=float))
        self.e1, self.e2 = model.frame_at(self.center)
        self.dim = 2

    def to_manifold(self, u):
        r = float(np.hypot(u[0], u[1]))
        if r < 1e-14:
            return self.center.copy()
        if r >= 2.0:
            raise ChartDomainError("equal-area radius must be < 2")
        theta = 2.0 * np.arcsin(0.5 * r)
        uhat = (u[0] * self.e1 + u[1] * self.e2) / r
        return np.cos(theta) * self.center + np.sin(theta) * uhat

    def to_chart(self, p):
        p = np.asarray(p, dtype=float)
        c = float(np.clip(np.dot(p, self.center), -1.0, 1.0))
        if c <= -1.0 + 1e-12:
            raise ChartDomainError("antipode is outside the chart")
        d = p - self.center * c
        nd = np.linalg.norm(d)
        theta = np.arccos(c)
        if nd < 1e-14:
            return np.zeros(2)
        rho = 2.0 * np.sin(0.5 * theta)
        return rho * np.array([np.dot(d, self.e1),
                               np.dot(d, self.e2)]) / nd

    def jacobian(self, u):
        # columns d(point)/d(u_a); exact except at the center, where
        # the polar parametrization is replaced by its smooth limit
        r = float(np.hypot(u[0], u[1]))
        if r < 1e-9:
            return np.stack([self.e1, self.e2], axis=1)
        theta = 2.0 * np.arcsin(0.5 * r)
        dtheta = 1.0 / np.sqrt(1.0 - 0.25 * r * r)
        uhat = (u[0] * self.e1 + u[1] * self.e2) / r
        cols = []
        for a, e in enumerate((self.e1, self.e2)):
            dr = u[a] / r
            duhat = (e - uhat * dr) / r
            cols.append((-np.sin(theta) * self.center
                         + np.cos(theta) * uhat) * dtheta * dr
                        + np.sin(theta) * duhat)
        return np.stack(cols, axis=1)

    def omega(self, u):
        p = self.to_manifold(u)
        t = self.jacobian(u)
        w12 = -float(np.dot(p, np.cross(t[:, 0], t[:, 1])))
        return np.array([[0.0, w12], [-w12, 0.0]])


def darboux_chart(m, center):
    """Chart with constant symplectic components around a point.

    The flat chart already is one; the sphere gets the equal-area
    azimuthal chart.
    """
    if m.model_id == "sphere":
        return LambertChart(m, center)
    return m.chart(center)


def get_model(spec):
    """Build a manifold model from its selection string.

    Parameters
    ----------
    spec : str
        "flat:<n>" or "sphere".
    """
    if spec == "sphere":
        return SphereModel()
    if spec.startswith("flat:"):
        try:
            n = int(spec.split(":", 1)[1])
        except ValueError:
            raise ValueError("bad manifold spec %r" % (spec,))
        return FlatModel(n)
    raise ValueError("bad manifold spec %r (use 'flat:<n>' or 'sphere')"
                     % (spec,))


def omega_at(m, z):
    """Symplectic form matrix at z in the chart frame at z."""
    return m.omega_at(z)


def psi_at(m, z):
    """Poisson tensor Psi(z) = omega(z)^{-1} in the chart frame at z."""
    return m.psi_at(z)


def reflect(m, x, z):
    """The reflection s_x(z): symplectic involution with fixed point x."""
    return m.reflect(x, z)


def ether_form(m, x, z):
    """Components of the generating form eta = H_x(z).

    Flat model: the 2n chart components 2 omega (z - x). Sphere: the
    ambient representative 2 (x cross z), which satisfies the gauge
    eta . x = 0.
    """
    return m.ether_form(x, z)


def christoffel_at(m, z):
    """Connection coefficients Gamma^l_{jk} in the chart at z.

    Both built-in models use charts that are geodesic at their center,
    so the coefficients vanish there; the nontrivial content is that
    this choice is compatible with the form (nabla omega = 0) and with
    the reflection-generated connection, which the tests check by
    finite differences.
    """
    return m.christoffel_at(z)


def connection_from_reflections(m, z, step=1e-3):
    """Connection coefficients from the reflection family.

    Gamma(z) = -1/2 D^2_z s_x(z) at x = z, computed by central second
    differences of the chart representation of s_x.

    Returns
    -------
    ndarray, shape (dim, dim, dim)
        Gamma[l, j, k], symmetric in (j, k) up to difference error.
    """
    if not m.has_analytic_reflection:
        raise ValueError("model has no reflection map")
    if step < 1e-8:
        raise ValueError("step size underflow")
    chart = m.chart(z)
    x = chart.to_manifold(np.zeros(m.dim))

    def s_chart(u):
        return chart.to_chart(m.reflect(x, chart.to_manifold(u)))

    dim = m.dim
    gamma = np.zeros((dim, dim, dim))
    s0 = s_chart(np.zeros(dim))
    for j in range(dim):
        ej = np.zeros(dim)
        ej[j] = step
        gamma[:, j, j] = (s_chart(ej) - 2.0 * s0 + s_chart(-ej)) / step ** 2
        for k in range(j + 1, dim):
            ek = np.zeros(dim)
            ek[k] = step
            v = (s_chart(ej + ek) - s_chart(ej - ek)
                 - s_chart(-ej + ek) + s_chart(-ej - ek)) / (4.0 * step ** 2)
            gamma[:, j, k] = v
            gamma[:, k, j] = v
    return -0.5 * gamma


def nabla_omega_residual(m, z, step=1e-4):
    """Max component of the covariant derivative of omega in the chart at z.

    nabla_l omega_ab = d_l omega_ab - Gamma^c_la omega_cb
                       - Gamma^c_lb omega_ac, by central differences.
    """
    chart = m.chart(z)
    gamma = m.christoffel_at(z)
    dim = m.dim
    omega0 = chart.omega(np.zeros(dim))
    worst = 0.0
    for l in range(dim):
        e = np.zeros(dim)
        e[l] = step
        d_omega = (chart.omega(e) - chart.omega(-e)) / (2.0 * step)
        corr = (np.einsum("ca,cb->ab", gamma[:, l, :], omega0)
                + np.einsum("cb,ac->ab", gamma[:, l, :], omega0))
        worst = max(worst, float(np.max(np.abs(d_omega - corr))))
    return worst


def reflect_jacobian_chart(m, x, z, step=1e-5):
    """Chart-to-chart Jacobian of s_x at z by central differences.

    Source chart is centered at z, target chart at s_x(z); this is the
    matrix used in the symplecticity test
    Ds^T omega(s_x(z)) Ds = omega(z).
    """
    source = m.chart(z)
    target = m.chart(m.project(m.reflect(x, z)))

    def s_chart(u):
        return target.to_chart(m.reflect(x, source.to_manifold(u)))

    dim = m.dim
    cols = []
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = step
        cols.append((s_chart(e) - s_chart(-e)) / (2.0 * step))
    return np.stack(cols, axis=1)
