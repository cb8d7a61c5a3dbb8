"""
Kerr background geometry in ingoing Eddington-Finkelstein (IEF) coordinates.

Everything downstream (spectral operators, the hyperboloidal evolver, the
transport reconstructor) consumes the closed-form scalars defined here:
Sigma, Delta, the Killing-spinor component kappa1, the Weyl scalar Psi2,
the principal null tetrad (l, n, m, mbar) regular on the future horizon,
its spin coefficients, and the height function h(r) defining the
hyperboloidal time tau = v - h(r) together with the compactified radial
coordinate R = 1/r.

Conventions: signature (+,-,-,-), coordinates ordered (v, r, theta, phi).
Geometric units; M and a carry length dimension.  All functions broadcast
over numpy arrays.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

SQRT2 = np.sqrt(2.0)

# Fixed by the hyperboloidal slicing choice: the height function's arctan
# term uses this constant, and tau0 is the initial-slice label.
C_HYP = 1.0e6
TAU0_OVER_M = 10.0

# beta, beta' contain cot(theta), csc(theta); closer to the axis than this
# the evaluation is refused rather than extrapolated.
POLE_THETA_TOL = 1.0e-6


class ParameterDomainError(ValueError):
    """Raised for parameters outside the subextreme Kerr domain."""


class PoleEvaluationError(ValueError):
    """Raised when an axis-singular quantity is evaluated at theta = 0, pi."""


@dataclass(frozen=True)
class KerrBackground:
    """Subextreme Kerr parameters plus derived constants.

    The single source of geometric truth: every other routine takes one of
    these instead of raw (M, a).
    """

    mass: float
    spin: float
    horizon_radius: float
    hyperboloidal_constant: float = C_HYP
    initial_time: float = field(default=0.0)

    @property
    def M(self):
        return self.mass

    @property
    def a(self):
        return self.spin

    @property
    def r_plus(self):
        return self.horizon_radius


def make_background(M, a):
    """Construct a KerrBackground, rejecting M <= 0 and |a| >= M.

    r_plus = M + sqrt(M^2 - a^2) is the larger root of Delta.
    """
    if not np.isfinite(M) or M <= 0.0:
        raise ParameterDomainError(f"mass must be positive, got M={M}")
    if not np.isfinite(a) or abs(a) >= M:
        raise ParameterDomainError(
            f"subextreme spin required (|a| < M), got a={a}, M={M}"
        )
    r_plus = M + np.sqrt(M * M - a * a)
    return KerrBackground(
        mass=float(M),
        spin=float(a),
        horizon_radius=float(r_plus),
        hyperboloidal_constant=C_HYP,
        initial_time=TAU0_OVER_M * float(M),
    )


@dataclass(frozen=True)
class BackgroundScalars:
    Sigma: np.ndarray
    Delta: np.ndarray
    kappa1: np.ndarray
    Psi2: np.ndarray
    uplambda_value: float


def background_scalars(bg, r, theta):
    """Sigma, Delta, kappa1 = -(r - i a cos(theta))/3, Psi2 = -M (r - i a cos(theta))^-3.

    The de-boosting factor uplambda is identically 1 in this tetrad.
    """
    r = np.asarray(r, dtype=float)
    cth = np.cos(np.asarray(theta, dtype=float))
    a, M = bg.a, bg.M
    Sigma = a * a * cth * cth + r * r
    Delta = a * a - 2.0 * M * r + r * r
    w = r - 1j * a * cth
    kappa1 = -w / 3.0
    Psi2 = -M / w**3
    return BackgroundScalars(Sigma, Delta, kappa1, Psi2, 1.0)


@dataclass(frozen=True)
class SpinCoefficientSet:
    rho: np.ndarray
    rho_prime: np.ndarray
    tau: np.ndarray
    tau_prime: np.ndarray
    beta: np.ndarray
    beta_prime: np.ndarray
    epsilon: np.ndarray
    kappa: float = 0.0
    kappa_prime: float = 0.0
    sigma: float = 0.0
    sigma_prime: float = 0.0
    epsilon_prime: float = 0.0


def spin_coefficients(bg, r, theta):
    """GHP spin coefficients of the Znajek tetrad.

    kappa = kappa' = sigma = sigma' = 0 (principal, shear-free) and
    epsilon' = 0 (n is auto-parallel).  beta and beta' are singular on the
    axis and evaluation there is rejected.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < POLE_THETA_TOL) or np.any(theta > np.pi - POLE_THETA_TOL):
        raise PoleEvaluationError(
            "beta, beta' contain cot/csc(theta); refuse theta within "
            f"{POLE_THETA_TOL} of the axis"
        )
    s = background_scalars(bg, r, theta)
    a = bg.a
    sth, cth = np.sin(theta), np.cos(theta)
    k1 = s.kappa1
    k1b = np.conj(k1)
    rho = s.Delta / (3.0 * SQRT2 * k1 * s.Sigma)
    rho_p = -1.0 / (3.0 * SQRT2 * k1)
    tau = -1j * a * sth / (9.0 * SQRT2 * k1 * k1)
    tau_p = -1j * a * sth / (SQRT2 * s.Sigma)
    beta_p = -(cth / sth) / (6.0 * SQRT2 * k1b)
    beta = -1j * (2.0 * a - 3j * cth * k1b) / (18.0 * SQRT2 * k1 * k1 * sth)
    eps = (2.0 * s.Delta - 6.0 * bg.M * k1 - 9.0 * k1 * k1 - s.Sigma) / (
        6.0 * SQRT2 * k1 * s.Sigma
    )
    return SpinCoefficientSet(rho, rho_p, tau, tau_p, beta, beta_p, eps)


@dataclass(frozen=True)
class TetradSet:
    """Contravariant tetrad components in the (v, r, theta, phi) basis."""

    l: np.ndarray
    n: np.ndarray
    m: np.ndarray
    mbar: np.ndarray


def tetrad_vectors(bg, r, theta):
    """Znajek principal null tetrad; rows are (v, r, theta, phi) components."""
    s = background_scalars(bg, r, theta)
    a = bg.a
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    shape = np.broadcast(r, theta).shape
    Sig = np.broadcast_to(s.Sigma, shape)
    Del = np.broadcast_to(s.Delta, shape)
    w = np.broadcast_to(r - 1j * a * np.cos(theta), shape)
    sth = np.broadcast_to(np.sin(theta), shape)
    rr = np.broadcast_to(r, shape)

    l = np.zeros(shape + (4,), dtype=complex)
    l[..., 0] = SQRT2 * (a * a + rr * rr) / Sig
    l[..., 1] = Del / (SQRT2 * Sig)
    l[..., 3] = SQRT2 * a / Sig

    n = np.zeros(shape + (4,), dtype=complex)
    n[..., 1] = -1.0 / SQRT2

    m = np.zeros(shape + (4,), dtype=complex)
    m[..., 0] = 1j * a * sth / (SQRT2 * w)
    m[..., 2] = 1.0 / (SQRT2 * w)
    m[..., 3] = 1j / (SQRT2 * w * sth)

    return TetradSet(l, n, m, np.conj(m))


def metric_components(bg, r, theta):
    """Covariant Kerr metric in IEF coordinates, shape (..., 4, 4).

    g_vv = (Delta - a^2 sin^2)/Sigma, g_vr = -1, g_rphi = a sin^2,
    g_vphi = 2 M a r sin^2/Sigma, g_thth = -Sigma,
    g_phiphi = (a^2 sin^2 Delta - (a^2+r^2)^2) sin^2 / Sigma.
    """
    s = background_scalars(bg, r, theta)
    a, M = bg.a, bg.M
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    shape = np.broadcast(r, theta).shape
    sth2 = np.broadcast_to(np.sin(theta) ** 2, shape)
    Sig = np.broadcast_to(s.Sigma, shape)
    Del = np.broadcast_to(s.Delta, shape)
    rr = np.broadcast_to(r, shape)

    g = np.zeros(shape + (4, 4))
    g[..., 0, 0] = (Del - a * a * sth2) / Sig
    g[..., 0, 1] = g[..., 1, 0] = -1.0
    g[..., 0, 3] = g[..., 3, 0] = 2.0 * M * a * rr * sth2 / Sig
    g[..., 1, 3] = g[..., 3, 1] = a * sth2
    g[..., 2, 2] = -Sig
    g[..., 3, 3] = (a * a * sth2 * Del - (a * a + rr * rr) ** 2) * sth2 / Sig
    return g


def reconstruct_from_tetrad(bg, r, theta):
    """Residual of g_ab = 2(l_(a n_b) - m_(a mbar_b)) against the closed form.

    Returns max over components of |g_closed - g_tetrad| / max(1, |g_closed|).
    """
    g = metric_components(bg, r, theta)
    tet = tetrad_vectors(bg, r, theta)
    l_dn = np.einsum("...ab,...b->...a", g, tet.l)
    n_dn = np.einsum("...ab,...b->...a", g, tet.n)
    m_dn = np.einsum("...ab,...b->...a", g, tet.m)
    mb_dn = np.conj(m_dn)
    sym = lambda u, w: u[..., :, None] * w[..., None, :] + u[..., None, :] * w[..., :, None]
    g_tet = sym(l_dn, n_dn) - sym(m_dn, mb_dn)
    scale = np.maximum(1.0, np.abs(g).max(axis=(-2, -1)))
    err = np.abs(g_tet - g).max(axis=(-2, -1))
    return err / scale


def tetrad_inner_products(bg, r, theta):
    """Max deviation of the tetrad normalization from (l.n, m.mbar) = (1, -1),
    all other inner products zero."""
    g = metric_components(bg, r, theta)
    tet = tetrad_vectors(bg, r, theta)
    ip = lambda u, w: np.einsum("...ab,...a,...b->...", g, u, w)
    legs = [tet.l, tet.n, tet.m, tet.mbar]
    target = np.zeros((4, 4), dtype=complex)
    target[0, 1] = target[1, 0] = 1.0
    target[2, 3] = target[3, 2] = -1.0
    dev = 0.0
    for i in range(4):
        for j in range(i, 4):
            dev = np.maximum(dev, np.abs(ip(legs[i], legs[j]) - target[i, j]))
    return dev


# ---------------------------------------------------------------------------
# Hyperboloidal chart: tau = v - h(r), R = 1/r.
# ---------------------------------------------------------------------------

def height_function(bg, r):
    """h(r) and h'(r) for the hyperboloidal time tau = v - h(r).

    h(r) = 2 (r - r+) + 4 M log(r/r+) + 3 M^2 (r+ - r)^2/(r+ r^2)
           + 2 M arctan((C-1) M / r) - 2 M arctan((C-1) M / r+),
    so h(r+) = 0 exactly and h/r -> 2 at infinity.
    """
    r = np.asarray(r, dtype=float)
    M, rp, C = bg.M, bg.r_plus, bg.hyperboloidal_constant
    x = (C - 1.0) * M
    h = (
        2.0 * (r - rp)
        + 4.0 * M * np.log(r / rp)
        + 3.0 * M * M * (rp - r) ** 2 / (rp * r * r)
        + 2.0 * M * np.arctan(x / r)
        - 2.0 * M * np.arctan(x / rp)
    )
    hp = (
        2.0
        + 4.0 * M / r
        + 6.0 * M * M * (r - rp) / r**3
        - 2.0 * x * M / (x * x + r * r)
    )
    return h, hp


def H_of_R(bg, R):
    """H(R) = h'(1/R), written so R = 0 (Scri) needs no special case:

    H = 2 + 4 M R + 6 M^2 R^2 (1 - r+ R) - 2 (C-1) M^2 R^2 / (1 + (C-1)^2 M^2 R^2).
    """
    R = np.asarray(R, dtype=float)
    M, rp, C = bg.M, bg.r_plus, bg.hyperboloidal_constant
    c1 = C - 1.0
    return (
        2.0
        + 4.0 * M * R
        + 6.0 * M * M * R * R * (1.0 - rp * R)
        - 2.0 * c1 * M * M * R * R / (1.0 + (c1 * M * R) ** 2)
    )


def H_prime_of_R(bg, R):
    """dH/dR, closed form."""
    R = np.asarray(R, dtype=float)
    M, rp, C = bg.M, bg.r_plus, bg.hyperboloidal_constant
    c1 = C - 1.0
    den = 1.0 + (c1 * M * R) ** 2
    return (
        4.0 * M
        + 12.0 * M * M * R
        - 18.0 * M * M * rp * R * R
        - 4.0 * c1 * M * M * R / den**2
    )


def outer_chart(bg):
    """The member of the same slicing family whose arctan transition is
    removed (constant -> 1): identical h to within O(r/(C M)) on any
    compactified grid, but with coefficient tables free of the sub-grid
    transition layer at R ~ 1/(C M).  The evolver discretizes this chart;
    see its module docstring."""
    return KerrBackground(
        mass=bg.mass,
        spin=bg.spin,
        horizon_radius=bg.horizon_radius,
        hyperboloidal_constant=1.0,
        initial_time=bg.initial_time,
    )


def _G_aux(bg, R):
    # (H - 2)/R, regular at R = 0; building block of the cancellation-free
    # wave-coefficient below.
    M, rp, C = bg.M, bg.r_plus, bg.hyperboloidal_constant
    c1 = C - 1.0
    return (
        4.0 * M
        + 6.0 * M * M * R * (1.0 - rp * R)
        - 2.0 * c1 * M * M * R / (1.0 + (c1 * M * R) ** 2)
    )


def wave_prefactor(bg, R):
    """(2 + 2 a^2 R^2 - H R^2 Delta) / R^2, evaluated cancellation-free.

    This is the combination controlling the d_tau^2 coefficient of the
    compactified radial wave operator; its R -> 0 limit is 2 C M^2.
    Algebraically it equals
        2 (C-1) M^2/(1 + (C-1)^2 M^2 R^2) - 6 M^2 (1 - r+ R) + G(R) (2 M - a^2 R)
    with G = (H - 2)/R, which avoids the catastrophic subtraction of the
    naive form near Scri.
    """
    R = np.asarray(R, dtype=float)
    M, C, a = bg.M, bg.hyperboloidal_constant, bg.a
    c1 = C - 1.0
    G = _G_aux(bg, R)
    return (
        2.0 * c1 * M * M / (1.0 + (c1 * M * R) ** 2)
        - 6.0 * M * M * (1.0 - bg.r_plus * R)
        + G * (2.0 * M - a * a * R)
    )


def to_hyperboloidal(bg, v, r):
    """(v, r) -> (tau, R) with tau = v - h(r), R = 1/r."""
    h, _ = height_function(bg, r)
    return v - h, 1.0 / np.asarray(r, dtype=float)


def to_ingoing(bg, tau, R):
    """(tau, R) -> (v, r); rejects R = 0 (Scri has no finite r)."""
    R = np.asarray(R, dtype=float)
    if np.any(R <= 0.0):
        raise ParameterDomainError("to_ingoing requires R > 0")
    r = 1.0 / R
    h, _ = height_function(bg, r)
    return tau + h, r


def tau_hat(bg, v, r):
    """Horizon-crossing time tau_hat = v - h(r)/2; labels the initial slice."""
    h, _ = height_function(bg, r)
    return v - 0.5 * h


def r_init_on_sigma_init(bg, v):
    """Radius where the ingoing ray v = const meets the initial slice
    {tau_hat = tau0}, i.e. the root of v - h(r)/2 = tau0."""
    tau0 = bg.initial_time
    f = lambda r: (v - 0.5 * height_function(bg, r)[0]) - tau0
    if f(bg.r_plus) < 0.0:
        raise ParameterDomainError(
            f"ray v={v} lies in the past of the initial slice (v < tau0)"
        )
    r_hi = max(4.0 * bg.M, 2.0 * bg.r_plus)
    while f(r_hi) > 0.0:
        r_hi *= 2.0
        if r_hi > 1e12 * bg.M:
            raise ParameterDomainError(f"failed to bracket r_init for v={v}")
    return brentq(f, bg.r_plus, r_hi, xtol=1e-14, rtol=1e-15)


def spacelike_condition(bg, r):
    """Sufficient condition for tau-slices to be spacelike:
    a^2/(a^2+r^2) < h'(r) < 2(a^2+r^2)/Delta - a^2/(a^2+r^2).
    Returns (lower margin, upper margin); both positive when satisfied."""
    r = np.asarray(r, dtype=float)
    _, hp = height_function(bg, r)
    a = bg.a
    q = a * a / (a * a + r * r)
    Delta = a * a - 2.0 * bg.M * r + r * r
    return hp - q, 2.0 * (a * a + r * r) / Delta - q - hp


# ---------------------------------------------------------------------------
# Tortoise coordinates.
# ---------------------------------------------------------------------------

_TORTOISE_CUTOFF = 1.0e-12


def tortoise(bg, r):
    """r*(r) with dr*/dr = (r^2+a^2)/Delta, normalized r*(3M) = 0.

    Computed by adaptive quadrature from 3M (uniform in a; no partial
    fraction branch bookkeeping).  Radii within a relative 1e-12 of the
    horizon return -inf.
    """
    M, a = bg.M, bg.a
    integrand = lambda x: (x * x + a * a) / (a * a - 2.0 * M * x + x * x)

    def one(ri):
        if ri <= bg.r_plus * (1.0 + _TORTOISE_CUTOFF):
            return -np.inf
        val, _ = quad(integrand, 3.0 * M, ri, limit=200)
        return val

    r = np.asarray(r, dtype=float)
    if r.ndim == 0:
        return one(float(r))
    return np.array([one(ri) for ri in r.ravel()]).reshape(r.shape)


def r_sharp(bg, r):
    """r#(r) with dr#/dr = a/Delta, normalized r#(3M) = 0.

    Defined for completeness of the chart dictionary; only round-trip
    exercised downstream.
    """
    M, a = bg.M, bg.a
    integrand = lambda x: a / (a * a - 2.0 * M * x + x * x)

    def one(ri):
        if ri <= bg.r_plus * (1.0 + _TORTOISE_CUTOFF):
            return -np.inf if a > 0 else np.inf if a < 0 else 0.0
        val, _ = quad(integrand, 3.0 * M, ri, limit=200)
        return val

    r = np.asarray(r, dtype=float)
    if r.ndim == 0:
        return one(float(r))
    return np.array([one(ri) for ri in r.ravel()]).reshape(r.shape)
