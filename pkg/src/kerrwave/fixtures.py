"""
Closed-form stationary solutions (linearized mass and angular momentum in
the outgoing radiation gauge) and the randomized identity-verification
harness.

The two fixtures are exact solutions of the linearized vacuum equations:
they satisfy all six transport equations simultaneously, which makes them
the strongest cross-module check available (geometry, tetrad edth
conversion, and the transport right sides all enter at once).  Their
rescaled metric components reduce to constants of integration:

  mass fixture:      G2hat = G1hat = 0,   G0hat = -(2/81) dM
  ang.mom. fixture:  G2hat = 0,  G1hat = -(i sqrt2/81) M sin(theta) da,
                     G0hat = 2 M a (1+cos^2) da / (81 Sigma).

Both are axisymmetric and stationary, so every d_v term vanishes exactly.
"""

from dataclasses import dataclass, field

import numpy as np

from . import angular as ang
from . import background as kb
from . import evolve as ev
from . import transport as tr
from . import diagnostics as dg

SQRT2 = np.sqrt(2.0)


def _geom(bg, r, theta):
    a = bg.a
    cth = np.cos(theta)
    k1 = -(r - 1j * a * cth) / 3.0
    k1b = np.conj(k1)
    Sigma = a * a * cth * cth + r * r
    return k1, k1b, Sigma


@dataclass
class FieldFixture:
    """Closed-form component evaluators, all functions of (r, theta)."""

    kind: str
    parameter: float
    components: dict = field(default_factory=dict)

    _ZERO_DEFAULT = True

    def __call__(self, name, r, theta):
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if name in self.components:
            return np.asarray(self.components[name](r, theta), dtype=complex)
        shape = np.broadcast(r, theta).shape
        return np.zeros(shape, dtype=complex)

    def hatted(self, name, r, theta):
        """The six transport unknowns, built from the defining combinations
        of the raw components (not from pre-simplified forms)."""
        bg = self.components["_bg"]
        k1, k1b, Sigma = _geom(bg, r, theta)
        a = bg.a
        rho_p = -1.0 / (3.0 * SQRT2 * k1)
        rho_pb = np.conj(rho_p)
        tau_t = -1j * a * np.sin(theta) / (9.0 * SQRT2 * k1 * k1)
        tau_pb = np.conj(-1j * a * np.sin(theta) / (SQRT2 * Sigma))
        if name == "sigma_p":
            return self("tilde_sigma_p", r, theta) / rho_pb
        if name == "G2":
            return self("G20p", r, theta) * k1b
        if name == "tau_p":
            return (1.0 + k1 / (2.0 * k1b)) * self("tilde_tau_p", r, theta) - self(
                "tilde_beta_p", r, theta
            )
        if name == "G1":
            return self("G10p", r, theta) * k1**3 * k1b * rho_p / r
        if name == "beta_p":
            return k1b * (
                self("tilde_beta_p", r, theta)
                - 0.5 * self("G10p", r, theta) * rho_pb
                + 0.5 * self("G20p", r, theta) * tau_pb
                - self("tilde_tau_p", r, theta)
            )
        if name == "G0":
            return self("G00p", r, theta) * k1**3 * k1b * rho_p**2 / r
        raise KeyError(name)


def lin_mass_fixture(bg, dM):
    """Variation of the mass parameter; already in the radiation gauge.

    Only G00p = -4 r dM / Sigma survives among the metric components, and
    the connection carries tilde epsilon, kappa, rho plus the middle Weyl
    perturbation."""
    def G00p(r, th):
        _, _, Sigma = _geom(bg, r, th)
        return -4.0 * r * dM / Sigma + 0j

    def t_eps(r, th):
        k1, _, _ = _geom(bg, r, th)
        return dM / (9.0 * SQRT2 * k1 * k1)

    def t_kappa(r, th):
        k1, _, Sigma = _geom(bg, r, th)
        return 1j * SQRT2 * bg.a * r * np.sin(th) * dM / (9.0 * k1 * k1 * Sigma)

    def t_rho(r, th):
        k1, _, Sigma = _geom(bg, r, th)
        return -SQRT2 * r * dM / (3.0 * k1 * Sigma)

    def psi2(r, th):
        k1, _, _ = _geom(bg, r, th)
        return dM / (27.0 * k1**3)

    return FieldFixture(
        "linearized-mass", dM,
        {"_bg": bg, "G00p": G00p, "tilde_epsilon": t_eps, "tilde_kappa": t_kappa,
         "tilde_rho": t_rho, "thetaPsi2": psi2},
    )


def lin_angmom_fixture(bg, da):
    """Variation of the angular momentum per unit mass, transformed to the
    radiation gauge."""
    M = bg.M

    def G00p(r, th):
        _, _, Sigma = _geom(bg, r, th)
        return 4.0 * M * bg.a * (1.0 + np.cos(th) ** 2) * r * da / Sigma**2 + 0j

    def G01p(r, th):
        _, k1b, Sigma = _geom(bg, r, th)
        return -2j * M * r * np.sin(th) * da / (3.0 * k1b * Sigma)

    def G10p(r, th):
        k1, _, Sigma = _geom(bg, r, th)
        return 2j * M * r * np.sin(th) * da / (3.0 * k1 * Sigma)

    def t_beta(r, th):
        k1, _, Sigma = _geom(bg, r, th)
        return 1j * M * np.sin(th) * da / (6.0 * SQRT2 * k1 * Sigma)

    def t_beta_p(r, th):
        k1, k1b, Sigma = _geom(bg, r, th)
        return 1j * M * np.sin(th) * (k1 + 2.0 * k1b) * da / (6.0 * SQRT2 * k1 * k1 * Sigma)

    def t_tau(r, th):
        _, _, Sigma = _geom(bg, r, th)
        return -1j * M * r * np.sin(th) * da / (SQRT2 * Sigma**2)

    def t_tau_p(r, th):
        k1, _, _ = _geom(bg, r, th)
        return 1j * M * np.sin(th) * da / (27.0 * SQRT2 * k1**3)

    def t_sigma(r, th):
        k1, _, Sigma = _geom(bg, r, th)
        return -M * bg.a * r * np.sin(th) ** 2 * da / (3.0 * SQRT2 * k1 * Sigma**2)

    def psi1(r, th):
        k1, _, _ = _geom(bg, r, th)
        return 1j * M * (bg.a**2 + r * r) * np.sin(th) * da / (486.0 * k1**6)

    def psi2(r, th):
        k1, _, _ = _geom(bg, r, th)
        return M * (bg.a + 1j * r * np.cos(th)) * da / (81.0 * k1**5)

    def psi3(r, th):
        k1, _, _ = _geom(bg, r, th)
        return -1j * M * np.sin(th) * da / (54.0 * k1**4)

    return FieldFixture(
        "linearized-angular-momentum", da,
        {"_bg": bg, "G00p": G00p, "G01p": G01p, "G10p": G10p,
         "tilde_beta": t_beta, "tilde_beta_p": t_beta_p, "tilde_tau": t_tau,
         "tilde_tau_p": t_tau_p, "tilde_sigma": t_sigma,
         "thetaPsi1": psi1, "thetaPsi2": psi2, "thetaPsi3": psi3},
    )


# ---------------------------------------------------------------------------
# Identity verification harness.
# ---------------------------------------------------------------------------

_FD6_OFFSETS = (-3, -2, -1, 1, 2, 3)
_FD6_WEIGHTS = (-1.0 / 60, 3.0 / 20, -3.0 / 4, 3.0 / 4, -3.0 / 20, 1.0 / 60)


def _fd6_r(f, r, theta, h):
    """6th-order central d/dr of a closed-form evaluator."""
    out = 0.0
    for o, w in zip(_FD6_OFFSETS, _FD6_WEIGHTS):
        out = out + w * f(r + o * h, theta)
    return out / h


def fixture_transport_residuals(bg, fixture, n_r=50, n_theta=50, lmax=None,
                                r_range=None, fd_step=None, mutate=None):
    """Max residual |Y(field) - rhs| over an (r, theta) grid for each of the
    six transport equations, with Y from 6th-order differencing of the
    closed forms and the right sides from the spectral machinery."""
    lmax = (n_theta - 6) if lmax is None else lmax
    bases = tr.BasisSet(0, lmax, n_theta=n_theta)
    theta = bases.nodes_theta
    if r_range is None:
        r_range = (bg.r_plus * 1.05, 20.0 * bg.M)
    r_grid = np.linspace(*r_range, n_r)
    h = fd_step if fd_step is not None else 1e-2 * bg.M

    resid = {name: 0.0 for name in tr.FIELD_NAMES}
    for r in r_grid:
        fields = {name: fixture.hatted(name, r, theta) for name in tr.FIELD_NAMES}
        psi_m2 = np.zeros_like(theta, dtype=complex)
        rhs = tr.transport_rhs(bg, bases, r, fields, psi_m2, m=0)
        if mutate == "transport_tau_p":
            k1, k1b, _ = _geom(bg, r, theta)
            tau_t = -1j * bg.a * np.sin(theta) / (9.0 * SQRT2 * k1 * k1)
            # flip the sign of the 2 tau sigma_p term
            rhs["tau_p"] = rhs["tau_p"] - k1 * (-4.0 * tau_t * fields["sigma_p"]) / (
                6.0 * k1b * k1b
            )
        for name in tr.FIELD_NAMES:
            yval = -_fd6_r(lambda rr, th: fixture.hatted(name, rr, th), r, theta, h)
            resid[name] = max(resid[name], float(np.abs(yval - rhs[name]).max()))
    return resid


def _test_field_bundle(rng, n):
    """Random smooth radial profiles with exact first/second derivatives:
    f(r) = sum_k c_k r^-k, k = 0..3."""
    c = rng.standard_normal((n, 4)) + 1j * rng.standard_normal((n, 4))

    def f(r):
        return sum(c[:, k] * r ** (-k) for k in range(4))

    def fp(r):
        return sum(-k * c[:, k] * r ** (-k - 1) for k in range(1, 4))

    def fpp(r):
        return sum(k * (k + 1) * c[:, k] * r ** (-k - 2) for k in range(1, 4))

    return f, fp, fpp


def verify_identities(bg, sample_count=1000, a_values=(0.0, 0.3, 0.9, 0.999),
                      seed=0, mutate=None):
    """Randomized residual report for the algebraic and differential
    identities of the geometry layer.

    Returns a dict name -> max residual over sample_count random points per
    spin value.  `mutate` names a deliberate sign error used as a negative
    control; the corresponding residual must come out large.
    """
    rng = np.random.default_rng(seed)
    M = bg.M
    report = {}

    def track(name, val):
        report[name] = max(report.get(name, 0.0), float(val))

    for a_frac in a_values:
        b = kb.make_background(M, a_frac * M)
        r = b.r_plus * (1.0 + 10 ** rng.uniform(-2.0, 3.0, sample_count))
        th = rng.uniform(0.05, np.pi - 0.05, sample_count)

        # metric from tetrad
        track("metric_reconstruction", kb.reconstruct_from_tetrad(b, r, th).max())

        # de-boosting factor is unity
        sc = kb.spin_coefficients(b, r, th)
        s = kb.background_scalars(b, r, th)
        lam = -3.0 * SQRT2 * s.kappa1 * sc.rho_prime
        sign = -1.0 if mutate == "lambda_sign" else 1.0
        track("uplambda_unity", np.abs(sign * lam - 1.0).max())

        # cross relations between the conjugated coefficients
        k1, k1b = s.kappa1, np.conj(s.kappa1)
        lhs1 = k1b * np.conj(sc.rho_prime)
        rhs1 = k1 * sc.rho_prime
        track("cross_rho", np.abs(lhs1 - rhs1).max() / np.abs(rhs1).max())
        lhs2 = k1b * np.conj(sc.tau_prime)
        rhs2 = -k1 * sc.tau
        if mutate == "cross_sign":
            rhs2 = -rhs2
        denom = max(np.abs(rhs2).max(), 1e-30)
        track("cross_tau", np.abs(lhs2 - rhs2).max() / denom)

        # tetrad edth of the Killing-spinor scalar: edt kappa1 = -kappa1 tau
        bases = tr.BasisSet(0, 8)
        thq = bases.nodes_theta
        for rr in r[:: max(1, sample_count // 8)]:
            k1q = -(rr - 1j * b.a * np.cos(thq)) / 3.0
            tauq = -1j * b.a * np.sin(thq) / (9.0 * SQRT2 * k1q * k1q)
            if mutate == "edt_printed_sign":
                # the uncorrected conversion (positive hedt term)
                e = (bases.hedt(k1q, 0) ) / (3.0 * k1q)
            else:
                e = tr.ghp_edt(b, bases, rr, k1q, 0)
            track("edt_kappa1", np.abs(e + k1q * tauq).max())

        # spherical edth commutator on random band-limited data
        for sw in (-3, -2, -1, 0, 1, 2, 3):
            basis = ang.make_basis(sw, 1 if abs(sw) < 3 else 0, 10)
            c = rng.standard_normal(basis.n_l) + 1j * rng.standard_normal(basis.n_l)
            f = ang.ModalField(basis.s, basis.m, basis.lmin, c)
            ud = ang.apply_hedtp(ang.apply_hedt(f))
            du = ang.apply_hedt(ang.apply_hedtp(f))
            comm = ud.coeff - du.coeff + sw * ang._realign(
                f.coeff, f.lmin, ud.lmin, basis.lmax
            )
            scale = np.abs(c).max()
            track("edth_commutator", np.abs(comm).max() / scale)

        # [Y, V] on analytic profiles  (IEF form: coefficient derivatives exact)
        n = min(sample_count, 256)
        f, fp, fpp = _test_field_bundle(rng, n)
        rr = b.r_plus * (1.0 + 10 ** rng.uniform(-2.0, 2.0, n))
        om = rng.uniform(-1.0, 1.0, n)
        mm = rng.integers(-2, 3, n)
        a_ = b.a
        Delta = a_ * a_ - 2.0 * M * rr + rr * rr
        opr = a_ * a_ + rr * rr
        dcoef = M * (rr * rr - a_ * a_) / opr**2      # d/dr [Delta/(2(r^2+a^2))]
        dphi = -2.0 * a_ * rr / opr**2                # d/dr [a/(r^2+a^2)]
        Yf = -fp(rr)
        YVf = -(1j * om * fp(rr) + dcoef * fp(rr) + Delta / (2.0 * opr) * fpp(rr)
                + 1j * mm * dphi * f(rr)
                + 1j * mm * a_ / opr * fp(rr))
        VYf = -(1j * om * fp(rr) + Delta / (2.0 * opr) * fpp(rr) + 1j * mm * a_ / opr * fp(rr))
        comm = YVf - VYf
        msign = -1.0 if mutate == "commutator_sign" else 1.0
        expect = (2.0 * a_ * rr / opr**2) * (1j * mm * f(rr)) + msign * M * (
            rr * rr - a_ * a_
        ) / opr**2 * Yf
        scale = np.maximum(np.abs(Yf), 1.0)
        track("commutator_YV", (np.abs(comm - expect) / scale).max())

    # fixture transport residuals (finite-difference Y side)
    b3 = kb.make_background(M, 0.3 * M)
    for mk, maker, par in (("mass", lin_mass_fixture, 0.7), ("angmom", lin_angmom_fixture, 0.4)):
        fx = maker(b3, par)
        res = fixture_transport_residuals(
            b3, fx, n_r=12, n_theta=32,
            mutate=mutate if mutate == "transport_tau_p" else None,
        )
        track(f"transport_{mk}", max(res.values()))

    # the fourth-order identity vanishes on both fixtures (their radiation
    # fields are identically zero)
    grid = ev.GridSpec(n_r=32, lmax=4)
    em2 = ev.TeukolskyEvolver(b3, grid, s=-2, m=0)
    ep2 = ev.TeukolskyEvolver(b3, grid, s=2, m=0)
    z = np.zeros((em2.n_l, grid.n_r), dtype=complex)
    jf_m2 = dg.JetField(-2, 0, em2.basis.lmin, [z] * 5)
    zp = np.zeros((ep2.n_l, grid.n_r), dtype=complex)
    jf_p2 = dg.JetField(2, 0, ep2.basis.lmin, [zp] * 5)
    track("tsi_on_fixtures", np.abs(dg.tsi_residual(b3, em2, ep2, jf_m2, jf_p2)).max())

    return report
