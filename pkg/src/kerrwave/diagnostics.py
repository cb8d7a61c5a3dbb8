"""
Measured counterparts of the decay machinery: slice energies, weighted
norms, the fourth-order radiation-field identity residual, late-time tail
power fits, and the bounded-energy monitor.

Energies live on tau-slices with the dtau normal and the coordinate Leray
form dr d(cos theta) dphi.  With nu = dtau,

  E^1(phi) = M int [ (Y tau)|V phi|^2 + (V tau)|Y phi|^2
                     + ((Y+V) tau) r^-2 (|hedt phi|^2 + |hedtp phi|^2) ] d^3mu,

where Y tau = H and V tau = R^2 N / (2 (1 + a^2 R^2)) are both positive on
spacelike slices, so E^1 >= 0.  E^k sums E^1 over up to k-1 applications
of {Y, V, r^-1 hedt, r^-1 hedtp} with M^(2i) weights.  The weighted norms
W^k_alpha use the rescaled set {M Y, r V, hedt, hedtp} and the measure
M^(-alpha-1) r^alpha d^3mu.

All consumers take tau-derivative jets produced by the evolver (the
equation substituted repeatedly), never finite differences of snapshots.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import angular as ang

SQRT2 = np.sqrt(2.0)


@dataclass
class JetField:
    """A spin-weighted field with its tau-derivative jet on the (l, R) grid."""

    s: int
    m: int
    lmin: int
    jets: list  # [f, d_tau f, ...] each (n_l, n_r) complex


def jet_field_from_state(evolver, state, depth):
    return JetField(
        evolver.s, evolver.m, evolver.basis.lmin,
        evolver.jets(state.psi, state.pi, depth),
    )


def apply_Y(evolver, jf):
    return JetField(jf.s, jf.m, jf.lmin, evolver.apply_Y_jets(jf.jets))


def apply_V(evolver, jf):
    return JetField(jf.s, jf.m, jf.lmin, evolver.apply_V_jets(jf.jets))


def _apply_ladder(evolver, jf, raise_spin, radial_weight=None):
    """hedt / hedtp (optionally weighted by a radial factor) on a jet field."""
    lmax = evolver.grid.lmax
    degrees = np.arange(jf.lmin, jf.lmin + jf.jets[0].shape[0])
    if raise_spin:
        fac = ang.hedt_factor(jf.s, degrees)
        s_new = jf.s + 1
    else:
        fac = ang.hedtp_factor(jf.s, degrees)
        s_new = jf.s - 1
    lmin_new = max(abs(s_new), abs(jf.m))
    w = 1.0 if radial_weight is None else radial_weight[None, :]
    jets = [
        ang._realign(fac[:, None] * (w * J), jf.lmin, lmin_new, lmax)
        for J in jf.jets
    ]
    return JetField(s_new, jf.m, lmin_new, jets)


def _b_ops(evolver):
    """{Y, V, r^-1 hedt, r^-1 hedtp} acting on jet fields (r^-1 = R)."""
    return [
        lambda jf: apply_Y(evolver, jf),
        lambda jf: apply_V(evolver, jf),
        lambda jf: _apply_ladder(evolver, jf, True, evolver.R),
        lambda jf: _apply_ladder(evolver, jf, False, evolver.R),
    ]


def _d_ops(evolver):
    """Rescaled set {M Y, r V, hedt, hedtp} on jet fields.

    r V is regular through Scri: V's coefficients vanish like R^2 there,
    so the 1/R rescaling leaves a factor R -> 0 at the boundary node.
    """
    M = evolver.bg.M
    with np.errstate(divide="ignore"):
        rr = np.where(evolver.R > 0.0, 1.0 / np.maximum(evolver.R, 1e-300), 0.0)

    def MY(jf):
        out = apply_Y(evolver, jf)
        out.jets = [M * J for J in out.jets]
        return out

    def rV(jf):
        out = apply_V(evolver, jf)
        out.jets = [rr[None, :] * J for J in out.jets]
        return out

    return [
        MY,
        rV,
        lambda jf: _apply_ladder(evolver, jf, True),
        lambda jf: _apply_ladder(evolver, jf, False),
    ]


def _sphere_norm2(coeff):
    """Full-sphere squared L2 per radial node: 4 pi sum_l |c_l|^2."""
    return 4.0 * np.pi * np.sum(np.abs(coeff) ** 2, axis=0)


def _radial_integral(evolver, density):
    """int density dr via dr = dR / R^2.  The supplied densities vanish
    like R^2 at Scri; the boundary node takes the one-sided limit value."""
    R = evolver.R
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(R > 0.0, 1.0 / np.maximum(R, 1e-300) ** 2, 0.0)
    vals = density * w
    vals[..., 0] = vals[..., 1]
    return np.trapz(vals, R, axis=-1)


def energy_1(evolver, jf):
    """E^1 of a jet field on its slice (jet depth >= 1)."""
    e = evolver
    ytau = e.H
    vtau = e.R**2 * e.capN / (2.0 * e.opr)
    Vf = apply_V(e, jf).jets[0]
    Yf = apply_Y(e, jf).jets[0]
    up = _apply_ladder(e, jf, True).jets[0]
    dn = _apply_ladder(e, jf, False).jets[0]
    ang_part = (e.R**2) * (_sphere_norm2(up) + _sphere_norm2(dn))  # r^-2 |..|^2
    density = ytau * _sphere_norm2(Vf) + vtau * _sphere_norm2(Yf) + (ytau + vtau) * ang_part
    return float(e.bg.M * _radial_integral(e, density))


def slice_energy(evolver, jf, k=1):
    """E^k: E^1 summed over up to k-1 applications of the basic operator
    set with M^(2i) weights.  Jet depth must cover k."""
    if k < 1 or k > 3:
        raise ValueError("implemented for 1 <= k <= 3")
    ops = _b_ops(evolver)
    M2 = evolver.bg.M ** 2
    total = energy_1(evolver, jf)
    layer = [jf]
    for i in range(1, k):
        layer = [op(f) for f in layer for op in ops]
        total += (M2**i) * sum(energy_1(evolver, f) for f in layer)
    return total


def weighted_norm(evolver, jf, k, alpha, region="slice", tau=None):
    """W^k_alpha slice norm, M^(-alpha-1) int r^alpha |phi|^2_{k,D} d^3mu.

    region: 'slice' (all r), 'exterior' (r >= tau), 'interior' (r <= tau).
    Divergent cases (field finite at Scri with alpha > -1) honestly return
    inf through the boundary-node weight.
    """
    if not (-3.0 <= alpha <= 9.0):
        raise ValueError("alpha in [-3, 9]")
    e = evolver
    R = e.R
    if region == "slice":
        mask = np.ones_like(R)
    elif region in ("exterior", "interior"):
        if tau is None:
            raise ValueError("region split needs tau")
        with np.errstate(divide="ignore"):
            r = np.where(R > 0, 1.0 / np.maximum(R, 1e-300), np.inf)
        mask = (r >= tau) if region == "exterior" else (r <= tau)
        mask = mask.astype(float)
    else:
        raise ValueError(f"unknown region {region!r}")

    M = e.bg.M
    # r^alpha dr = R^(-alpha-2) dR; the Scri node weight is the limit value
    ex = -alpha - 2.0
    with np.errstate(divide="ignore"):
        w = np.where(R > 0.0, np.maximum(R, 1e-300) ** ex, 0.0)
    if ex < 0.0:
        w[0] = np.inf
    elif ex == 0.0:
        w[0] = 1.0

    ops = _d_ops(e)
    layer = [jf]
    dens = _sphere_norm2(jf.jets[0])
    total = 0.0
    for i in range(0, k + 1):
        if i > 0:
            layer = [op(f) for f in layer for op in ops]
            dens = sum(_sphere_norm2(f.jets[0]) for f in layer)
        contrib = dens * mask * w
        contrib = np.where(dens * mask == 0.0, 0.0, contrib)  # 0 * inf at Scri
        total += M ** (-alpha - 1.0) * float(np.trapz(contrib, R, axis=-1))
    return total


# ---------------------------------------------------------------------------
# Fourth-order identity residual linking the two radiation fields.
# ---------------------------------------------------------------------------

def tsi_residual(bg, evm2, evp2, jf_m2, jf_p2):
    """Residual of the fourth-order identity linking the two radiation
    fields,

      hedt^4 psi(-2) + 3 M L_xi conj(psi(-2))
      + sum_{k=1..4} C(4,k) tring^k hedt^(4-k) L_xi^k psi(-2)
      - (1/4) (Y + r/(a^2+r^2))^4 psi(+2),

    evaluated pointwise on the (R, theta) grid; identically zero on
    constrained pairs, nonzero on generic independent ones.  The factor
    tring = i a sin(theta)/sqrt(2) is annihilated by hedt, L_xi and Y, so
    its powers multiply pointwise.  Jets of depth >= 4 are required for
    both fields; conjugation pairs modes +-m, so only the self-contained
    m = 0 case is accepted.
    """
    if jf_m2.m != 0 or jf_p2.m != 0:
        raise ValueError("conjugation pairs modes +-m; implemented for m = 0")
    lmax = evm2.grid.lmax
    bases = {s: ang.make_basis(s, 0, lmax) for s in (-2, -1, 0, 1, 2)}
    theta = bases[-2].nodes_theta
    tring = 1j * bg.a * np.sin(theta) / SQRT2

    # C(4,k) tring^k hedt^(4-k) d_tau^k psi(-2); term k has spin 2-k and
    # the tring^k factor restores spin 2.
    res = np.zeros((evm2.R.size, theta.size), dtype=complex)
    for kk in range(0, 5):
        fldc = ang.ModalField(-2, 0, jf_m2.lmin, jf_m2.jets[kk])
        for _ in range(4 - kk):
            fldc = ang.apply_hedt(fldc)
        samples = ang.synthesize(bases[fldc.s], fldc)  # (n_r, n_theta)
        res += math.comb(4, kk) * (tring**kk)[None, :] * samples

    # + 3 M conj(d_tau psi(-2)), conjugated in sample space
    dt_samples = ang.synthesize(
        bases[-2], ang.ModalField(-2, 0, jf_m2.lmin, jf_m2.jets[1])
    )
    res += 3.0 * bg.M * np.conj(dt_samples)

    # - (1/4)(Y + r/(a^2+r^2))^4 psi(+2), composed as four first-order
    # applications (matches the factored operator, keeps stencils narrow)
    R = evp2.R
    w = R / (1.0 + bg.a**2 * R**2)  # r/(a^2+r^2) in the compactified chart
    jets = jf_p2.jets
    for _ in range(4):
        applied = evp2.apply_Y_jets(jets)
        jets = [applied[i] + w[None, :] * jets[i] for i in range(len(applied))]
    yterm = ang.synthesize(bases[2], ang.ModalField(2, 0, jf_p2.lmin, jets[0]))
    return res - 0.25 * yterm


# ---------------------------------------------------------------------------
# Tail fits and energy monitoring.
# ---------------------------------------------------------------------------

@dataclass
class TailFit:
    probe: object
    window: tuple
    power: float
    drift: float
    residual: float


def fit_local_power(tau, amp, window=None, n_subwindows=3):
    """Local power index p = -d ln|phi| / d ln tau by least squares over the
    window; drift is the spread of p across log-spaced sub-windows."""
    tau = np.asarray(tau, dtype=float)
    amp = np.asarray(amp, dtype=float)
    if window is not None:
        sel = (tau >= window[0]) & (tau <= window[1])
        tau, amp = tau[sel], amp[sel]
    if tau.size < 4:
        raise ValueError("window holds too few samples")
    if np.any(amp <= 0.0):
        raise ValueError("non-positive samples in fit window")
    x, y = np.log(tau), np.log(amp)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    p = -float(slope)

    edges = np.exp(np.linspace(x[0], x[-1], n_subwindows + 1))
    ps = []
    for i in range(n_subwindows):
        sel = (tau >= edges[i]) & (tau <= edges[i + 1])
        if sel.sum() >= 3:
            s_i = np.polyfit(x[sel], y[sel], 1)[0]
            ps.append(-float(s_i))
    drift = max(abs(pi - p) for pi in ps) if ps else 0.0
    return TailFit(None, (float(tau[0]), float(tau[-1])), p, drift, resid)


@dataclass
class NormReport:
    tau: float
    energies: dict        # k -> E^k
    weighted: dict        # (k, alpha, region) -> W^k_alpha


@dataclass
class BeamVerdict:
    ratio: float
    bounded: bool
    transient: float
    tolerance: float
    series: list = field(default_factory=list)


def beam_energy_series(evolver, snapshots, i_max=2, k=1):
    """Sum over i <= i_max of E^k(psi^(i)) for each snapshot, using the
    derived stack (repeated scaled-V applications on jets)."""
    out_tau, out_E = [], []
    for st in snapshots:
        stack = evolver.derived_stack(st.psi, st.pi, imax=i_max, extra_depth=k)
        total = 0.0
        for i in range(i_max + 1):
            jf = JetField(evolver.s, evolver.m, evolver.basis.lmin, stack[i])
            total += slice_energy(evolver, jf, k=k)
        out_tau.append(st.tau)
        out_E.append(total)
    return np.array(out_tau), np.array(out_E)


def beam_monitor(tau, energies, transient=None, tolerance=0.01, M=1.0):
    """Boundedness verdict: sup_{tau >= transient} E(tau)/E(tau_0) <= 1+tol."""
    tau = np.asarray(tau, dtype=float)
    energies = np.asarray(energies, dtype=float)
    if transient is None:
        transient = 50.0 * M
    e0 = energies[0]
    late = energies[tau >= transient]
    if late.size == 0:
        late = energies[-1:]
    ratio = float(late.max() / e0) if e0 > 0 else (0.0 if late.max() == 0 else np.inf)
    return BeamVerdict(ratio, ratio <= 1.0 + tolerance, float(transient), tolerance,
                       list(zip(tau.tolist(), energies.tolist())))
