"""
Radial transport reconstruction along the ingoing principal direction.

The six spin-weighted unknowns (spins -2, -2, -1, -1, -1, 0)

    sigma_p, G2, tau_p, G1, beta_p, G0

satisfy first-order equations Y F = rhs(F_earlier, psi_m2) along each
ingoing ray (fixed v, theta, phi), with Y = -d_r, sourced by the
spin-weight -2 radiation field and ordered by the dependency chain
sigma_p -> {G2, tau_p} -> G1 -> beta_p -> G0.  Rays start on the initial
slice {v - h(r)/2 = tau0} at r_init(v) and run down to the horizon.

The right sides involve the tetrad edth operator rather than the spherical
one; on boost-weight-zero fields of spin s the two are related by

    edt phi = (-hedt phi + 9 kappa1^2 tau L_xi phi - 3 s kappa1 tau phi)/(3 kappa1).

The sign of the hedt term is fixed by the internal identities
edt kappa1 = -kappa1 tau, edt conj(kappa1') = kappa1 tau and the tau-ring
closure, which the printed form of the conversion fails; see the tests.

L_xi = d_v couples neighbouring rays when a != 0.  The march therefore
reparametrizes every ray to xi in [0, 1] and advances all rays together,
differencing across the v-grid for d_v at fixed r via the chain rule.
Fixture-driven and axisymmetric stationary runs have d_v = 0 exactly.

Also here: the Taylor machinery for 1/h'(r) at Scri, 1/h' = sum a_k R^k
+ b_l(R) R^{l+1}, with a_k produced by Richardson-extrapolated limits.
"""

from dataclasses import dataclass

import numpy as np

from . import angular as ang
from . import background as kb

SQRT2 = np.sqrt(2.0)

FIELD_NAMES = ("sigma_p", "G2", "tau_p", "G1", "beta_p", "G0")
FIELD_SPINS = {"sigma_p": -2, "G2": -2, "tau_p": -1, "G1": -1, "beta_p": -1, "G0": 0}


class BasisSet:
    """Cache of harmonic bases sharing nodes, keyed by (spin, mode)."""

    def __init__(self, m, lmax, n_theta=None):
        self.m = m
        self.lmax = lmax
        ref = ang.make_basis(0, m, lmax, n_theta=n_theta)
        self.n_theta = ref.n_theta
        self.nodes_theta = ref.nodes_theta
        self.weights = ref.weights
        self._cache = {(0, m): ref}

    def get(self, s, m=None):
        m = self.m if m is None else m
        key = (s, m)
        if key not in self._cache:
            self._cache[key] = ang.make_basis(s, m, self.lmax, n_theta=self.n_theta)
        return self._cache[key]

    def hedt(self, samples, s, m=None):
        """Spectral spherical edth on theta-samples (last axis), spin s -> s+1."""
        b = self.get(s, m)
        return ang.synthesize(self.get(s + 1, m), ang.apply_hedt(ang.analyze(b, samples)))

    def hedtp(self, samples, s, m=None):
        b = self.get(s, m)
        return ang.synthesize(self.get(s - 1, m), ang.apply_hedtp(ang.analyze(b, samples)))


def ghp_edt(bg, bases, r, samples, s, m=None, dv=None):
    """Tetrad edth on theta-sampled spin-s data at radius r (raises spin).

    dv supplies d_v of the field (None means stationary).
    """
    theta = bases.nodes_theta
    k1 = -(np.asarray(r) - 1j * bg.a * np.cos(theta)) / 3.0
    tau = -1j * bg.a * np.sin(theta) / (9.0 * SQRT2 * k1 * k1)
    out = -bases.hedt(samples, s, m) - 3.0 * s * k1 * tau * samples
    if dv is not None:
        out = out + 9.0 * k1 * k1 * tau * dv
    return out / (3.0 * k1)


def ghp_edtp(bg, bases, r, samples, s, m=None, dv=None):
    """Tetrad edth-prime on spin-s data (lowers spin)."""
    theta = bases.nodes_theta
    k1b = -(np.asarray(r) + 1j * bg.a * np.cos(theta)) / 3.0
    taub = 1j * bg.a * np.sin(theta) / (9.0 * SQRT2 * k1b * k1b)
    out = -bases.hedtp(samples, s, m) + 3.0 * s * k1b * taub * samples
    if dv is not None:
        out = out + 9.0 * k1b * k1b * taub * dv
    return out / (3.0 * k1b)


def transport_rhs(bg, bases, r, fields, psi_m2, dv_fields=None, m=None):
    """Y-derivatives of the six transport unknowns at radius r.

    fields: dict name -> (..., n_theta) complex samples; psi_m2 likewise.
    dv_fields: optional dict of d_v samples for the edth conversions.
    Conjugated entries (G1, beta_p) pair modes m and -m; the default m is
    the basis-set mode and axisymmetric data is self-contained.
    """
    a = bg.a
    theta = bases.nodes_theta
    k1 = -(r - 1j * a * np.cos(theta)) / 3.0
    k1b = np.conj(k1)
    tau = -1j * a * np.sin(theta) / (9.0 * SQRT2 * k1 * k1)
    tau_p = -1j * a * np.sin(theta) / (SQRT2 * (a**2 * np.cos(theta) ** 2 + r * r))
    taub = np.conj(tau)
    tau_pb = np.conj(tau_p)
    dv = dv_fields or {}
    m = bases.m if m is None else m

    sig, G2, tp, G1, bp, G0 = (fields[k] for k in FIELD_NAMES)

    out = {}
    out["sigma_p"] = -12.0 * k1b * psi_m2 / np.sqrt(r * r + a * a)
    out["G2"] = -(2.0 / 3.0) * sig

    e_sig = ghp_edt(bg, bases, r, sig, -2, m, dv.get("sigma_p"))
    out["tau_p"] = -k1 * (e_sig - 2.0 * tau * sig + 2.0 * tau_pb * sig) / (6.0 * k1b * k1b)

    e_G2 = ghp_edt(bg, bases, r, G2, -2, m, dv.get("G2"))
    out["G1"] = (
        2.0 * k1 * k1 * k1b * k1b * tp / (r * r)
        + k1 * k1 * k1b * (e_G2 - tau * G2 + tau_pb * G2) / (2.0 * r * r)
    )

    out["beta_p"] = r * G1 / (6.0 * k1 * k1 * k1b * k1b) + k1 * tau * G2 / (6.0 * k1b * k1b)

    G1c = np.conj(G1)
    bpc = np.conj(bp)
    e_G1 = ghp_edt(bg, bases, r, G1, -1, m, dv.get("G1"))
    e_bp = ghp_edt(bg, bases, r, bp, -1, m, dv.get("beta_p"))
    dv_G1c = None if "G1" not in dv else np.conj(dv["G1"])
    dv_bpc = None if "beta_p" not in dv else np.conj(dv["beta_p"])
    ep_G1c = ghp_edtp(bg, bases, r, G1c, 1, -m, dv_G1c)
    ep_bpc = ghp_edtp(bg, bases, r, bpc, 1, -m, dv_bpc)
    out["G0"] = (
        -(e_G1 - tau * G1) / (3.0 * k1)
        - tau * G1 / r
        - taub * G1c / r
        + 2.0 * k1 * k1 * k1b * (e_bp - tau_pb * bp) / (r * r)
        - (ep_G1c - taub * G1c) / (3.0 * k1b)
        + 2.0 * k1 * k1b * k1b * (ep_bpc - tau_p * bpc) / (r * r)
    )
    return out


@dataclass
class TransportState:
    """March history of the six unknowns on a (v, r, theta) grid."""

    v: np.ndarray            # (n_v,)
    r: np.ndarray            # (n_v, n_r) per-ray radial ladders, decreasing
    theta: np.ndarray        # (n_theta,)
    fields: dict             # name -> (n_v, n_r, n_theta) complex
    m: int


def integrate_chain(bg, bases, v_values, n_steps=512, source=None, initial_data=None):
    """Integrate the six transport equations from the initial slice to the
    horizon along each ray v = const, by classical RK4 in the march
    parameter xi (r = r_init(v) + xi (r_plus - r_init(v))).

    source: callable (v_array, r_array, theta_nodes) -> psi_m2 samples of
        shape (n_v, n_theta); None means zero.
    initial_data: callable (name, r_array, theta_nodes) -> samples on the
        initial slice (r_array holds r_init per ray); None means zeros.
    """
    v = np.atleast_1d(np.asarray(v_values, dtype=float))
    n_v = v.size
    theta = bases.nodes_theta
    n_th = theta.size
    r_init = np.array([kb.r_init_on_sigma_init(bg, vi) for vi in v])
    span = bg.r_plus - r_init                       # negative: marching inward
    _, hp_init = kb.height_function(bg, r_init)
    drinit_dv = 2.0 / hp_init                       # dr_init/dv on the slice

    if n_v >= 5:
        dv_spacing = v[1] - v[0]
        if not np.allclose(np.diff(v), dv_spacing):
            raise ValueError("cross-ray differencing needs a uniform v grid")
    else:
        dv_spacing = None  # single/few rays: stationary treatment of d_v

    state = {}
    for name in FIELD_NAMES:
        if initial_data is None:
            state[name] = np.zeros((n_v, n_th), dtype=complex)
        else:
            state[name] = np.asarray(initial_data(name, r_init, theta), dtype=complex)

    def d_dv(arr):
        # 4th-order d/dv at fixed xi; zero when too few rays (stationary).
        if dv_spacing is None:
            return np.zeros_like(arr)
        out = np.empty_like(arr)
        h = dv_spacing
        out[2:-2] = (arr[:-4] - 8.0 * arr[1:-3] + 8.0 * arr[3:-1] - arr[4:]) / (12.0 * h)
        out[0] = (-25.0 * arr[0] + 48.0 * arr[1] - 36.0 * arr[2] + 16.0 * arr[3] - 3.0 * arr[4]) / (12.0 * h)
        out[1] = (-3.0 * arr[0] - 10.0 * arr[1] + 18.0 * arr[2] - 6.0 * arr[3] + arr[4]) / (12.0 * h)
        out[-2] = (3.0 * arr[-1] + 10.0 * arr[-2] - 18.0 * arr[-3] + 6.0 * arr[-4] - arr[-5]) / (12.0 * h)
        out[-1] = (25.0 * arr[-1] - 48.0 * arr[-2] + 36.0 * arr[-3] - 16.0 * arr[-4] + 3.0 * arr[-5]) / (12.0 * h)
        return out

    def stage_rhs(xi, st):
        r_here = r_init + xi * span  # (n_v,)
        psi = (
            np.zeros((n_v, n_th), dtype=complex)
            if source is None
            else np.asarray(source(v, r_here, theta), dtype=complex)
        )
        rr = r_here[:, None]
        if dv_spacing is None:
            # stationary treatment: the physical d_v vanishes identically
            out = transport_rhs(bg, bases, rr, st, psi, None, m=bases.m)
        else:
            # d_v at fixed r = d_v at fixed xi + (Y F) r_init'(v)(1 - xi);
            # the Y F entering each correction is independent of d_v data
            # (the chain is triangular), so one preparatory pass suffices.
            pre = transport_rhs(bg, bases, rr, st, psi, None, m=bases.m)
            chain = (drinit_dv * (1.0 - xi))[:, None]
            dvr = {n: d_dv(st[n]) + pre[n] * chain for n in FIELD_NAMES}
            out = transport_rhs(bg, bases, rr, st, psi, dvr, m=bases.m)
        # dF/dxi = (r_plus - r_init) dF/dr and Y = -d_r
        return {n: span[:, None] * (-out[n]) for n in FIELD_NAMES}

    # record the march on the xi ladder
    n_r = n_steps + 1
    xi_grid = np.linspace(0.0, 1.0, n_r)
    hist = {name: np.empty((n_v, n_r, n_th), dtype=complex) for name in FIELD_NAMES}
    for name in FIELD_NAMES:
        hist[name][:, 0] = state[name]

    dxi_step = 1.0 / n_steps
    for i in range(n_steps):
        xi = i * dxi_step
        k1 = stage_rhs(xi, state)
        s2 = {n: state[n] + 0.5 * dxi_step * k1[n] for n in FIELD_NAMES}
        k2 = stage_rhs(xi + 0.5 * dxi_step, s2)
        s3 = {n: state[n] + 0.5 * dxi_step * k2[n] for n in FIELD_NAMES}
        k3 = stage_rhs(xi + 0.5 * dxi_step, s3)
        s4 = {n: state[n] + dxi_step * k3[n] for n in FIELD_NAMES}
        k4 = stage_rhs(xi + dxi_step, s4)
        for n in FIELD_NAMES:
            state[n] = state[n] + (dxi_step / 6.0) * (k1[n] + 2.0 * k2[n] + 2.0 * k3[n] + k4[n])
            hist[n][:, i + 1] = state[n]

    r_ladder = r_init[:, None] + xi_grid[None, :] * span[:, None]
    return TransportState(v, r_ladder, theta, hist, bases.m)


# ---------------------------------------------------------------------------
# Taylor coefficients of 1/h' at Scri.
# ---------------------------------------------------------------------------

@dataclass
class HPrimeExpansion:
    order: int
    coefficients: np.ndarray  # a_0 .. a_order

    def __post_init__(self):
        self._bg = None

    def remainder(self, R):
        """b_order(R) with 1/h' = sum a_k R^k + b_order(R) R^(order+1), by
        exact subtraction (reconstruction is exact to roundoff)."""
        R = np.asarray(R, dtype=float)
        part = np.polyval(self.coefficients[::-1], R)
        inv_hp = 1.0 / kb.H_of_R(self._bg, R)
        with np.errstate(divide="ignore", invalid="ignore"):
            b = (inv_hp - part) / R ** (self.order + 1)
        return b

    def reconstruct(self, R):
        R = np.asarray(R, dtype=float)
        return np.polyval(self.coefficients[::-1], R) + self.remainder(R) * R ** (self.order + 1)


def _richardson_limit(f, R0=1.0e-7, ratio=2.0, levels=8):
    """lim_{R->0} f(R) by a Neville table on the ladder R0 / ratio^i.

    The ladder sits well inside the analyticity radius ~ 1/(C M) of the
    slicing functions.
    """
    vals = np.array([f(R0 / ratio**i) for i in range(levels)], dtype=float)
    T = vals.copy()
    for k in range(1, levels):
        T[: levels - k] = (ratio**k * T[1 : levels - k + 1] - T[: levels - k]) / (ratio**k - 1.0)
    return T[0]


def h_prime_expansion(bg, order):
    """Taylor coefficients a_0..a_order of 1/h' about Scri.

    a_k = lim_{R->0} (1/h' - sum_{j<k} a_j R^j)/R^k, each limit by
    Richardson extrapolation; accuracy degrades with k as the subtraction
    sheds digits (a_0, a_1 are good to ~1e-12 and ~1e-9).
    """
    if order > 6:
        raise ValueError("expansion implemented for order <= 6")
    coeffs = []
    for k in range(order + 1):
        def f(R, _k=k):
            val = 1.0 / float(kb.H_of_R(bg, R))
            for j, aj in enumerate(coeffs):
                val -= aj * R**j
            return val / R**_k
        coeffs.append(_richardson_limit(f))
    exp = HPrimeExpansion(order, np.array(coeffs))
    exp._bg = bg
    return exp
