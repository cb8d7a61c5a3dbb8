"""
Spin-weighted spherical harmonics on Gauss-Legendre nodes, per azimuthal mode.

Fields of spin weight s and azimuthal number m are stored as coefficient
vectors over degrees l in [max(|s|,|m|), lmax].  The basis functions used
here are

    B_{s,l,m}(theta) = (-1)^s sqrt(2l+1) d^l_{m,-s}(theta),

i.e. sqrt(4 pi) times the unit-normalized spin-weighted harmonics at
phi = 0, so that the full-sphere Plancherel identity reads
int |phi|^2 d^2mu = 4 pi sum |c_l|^2.  With this family the edth ladder is

    hedt  : c_l -> -sqrt((l+s+1)(l-s)/2) c_l   (spin s -> s+1),
    hedtp : c_l -> +sqrt((l+s)(l-s+1)/2) c_l   (spin s -> s-1),

which reproduces the norm relation int|hedt phi|^2 = int|hedtp phi|^2
- s int|phi|^2 and the commutator hedt hedtp = hedtp hedt - s exactly in
coefficient space; the hedtp sign is pinned by those two identities.

Evaluation is by the three-term recurrence in l at fixed (s, m) (the
cos(theta) coupling relation), seeded at l0 = max(|s|,|m|) with the
Wigner-d sum formula.
"""

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

SPIN_RANGE = 3  # |s| <= 3 working range


def _wigner_d_sum(l, m, k, theta):
    """Wigner d^l_{m,k}(theta) by the explicit sum formula; small l only."""
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    jmin = max(0, m - k)
    jmax = min(l + m, l - k)
    pref = math.sqrt(
        math.factorial(l + m)
        * math.factorial(l - m)
        * math.factorial(l + k)
        * math.factorial(l - k)
    )
    out = np.zeros_like(np.asarray(theta, dtype=float))
    for j in range(jmin, jmax + 1):
        den = (
            math.factorial(l + m - j)
            * math.factorial(j)
            * math.factorial(l - k - j)
            * math.factorial(k - m + j)
        )
        out = out + ((-1.0) ** j / den) * c ** (2 * l + m - k - 2 * j) * s ** (
            2 * j - m + k
        )
    return pref * out


def _recurrence_coeffs(s, m, l):
    """alpha, beta in  cos(theta) B_l = alpha_l B_{l+1} + beta_l B_l + alpha_{l-1} B_{l-1}."""
    lp = l + 1.0
    alpha = math.sqrt((lp * lp - m * m) * (lp * lp - s * s)) / (
        lp * math.sqrt((2.0 * l + 1.0) * (2.0 * l + 3.0))
    )
    beta = 0.0 if l == 0 else -m * s / (l * (l + 1.0))
    return alpha, beta


@dataclass(frozen=True)
class HarmonicBasis:
    """Sampled basis of B_{s,l,m} on Gauss-Legendre nodes in cos(theta).

    Immutable after construction; `functions` has shape (n_l, n_theta) with
    rows indexed by l - lmin.
    """

    s: int
    m: int
    lmax: int
    nodes_theta: np.ndarray
    weights: np.ndarray
    functions: np.ndarray

    @property
    def lmin(self):
        return max(abs(self.s), abs(self.m))

    @property
    def degrees(self):
        return np.arange(self.lmin, self.lmax + 1)

    @property
    def n_l(self):
        return self.lmax - self.lmin + 1

    @property
    def n_theta(self):
        return self.nodes_theta.size

    def sibling(self, s):
        """Basis of another spin on the same nodes and degree cap."""
        if s == self.s:
            return self
        return make_basis(s, self.m, self.lmax, n_theta=self.n_theta)


def make_basis(s, m, lmax, n_theta=None):
    """Build a HarmonicBasis; lmax must cover l0 = max(|s|,|m|)."""
    if abs(s) > SPIN_RANGE:
        raise ValueError(f"spin weight |s| <= {SPIN_RANGE} supported, got {s}")
    l0 = max(abs(s), abs(m))
    if lmax < l0:
        raise ValueError(f"lmax={lmax} below max(|s|,|m|)={l0}")
    if n_theta is None:
        n_theta = lmax + 8
    x, w = leggauss(n_theta)
    theta = np.arccos(x[::-1])  # increasing theta
    w = w[::-1]

    xg = x[::-1]
    B = np.zeros((lmax - l0 + 1, n_theta))
    B[0] = (-1.0) ** s * math.sqrt(2.0 * l0 + 1.0) * _wigner_d_sum(l0, m, -s, theta)
    if lmax > l0:
        prev = np.zeros(n_theta)
        cur = B[0]
        for l in range(l0, lmax):
            alpha, beta = _recurrence_coeffs(s, m, l)
            alpham = _recurrence_coeffs(s, m, l - 1)[0] if l > l0 else 0.0
            nxt = ((xg - beta) * cur - alpham * prev) / alpha
            B[l - l0 + 1] = nxt
            prev, cur = cur, nxt
    return HarmonicBasis(int(s), int(m), int(lmax), theta, w, B)


@dataclass
class ModalField:
    """Coefficients of one spin-weighted field for one azimuthal mode."""

    s: int
    m: int
    lmin: int
    coeff: np.ndarray

    @property
    def lmax(self):
        return self.lmin + self.coeff.shape[0] - 1

    def copy(self):
        return ModalField(self.s, self.m, self.lmin, self.coeff.copy())


def analyze(basis, samples):
    """Project theta-samples (on the basis nodes) onto coefficients.

    c_l = (1/2) sum_j w_j B_l(theta_j) f(theta_j); exact for band-limited f.
    """
    samples = np.asarray(samples)
    if samples.shape[-1] != basis.n_theta:
        raise ValueError(
            f"expected {basis.n_theta} theta samples, got {samples.shape[-1]}"
        )
    c = 0.5 * np.einsum("lj,...j->...l", basis.functions * basis.weights, samples)
    return ModalField(basis.s, basis.m, basis.lmin, np.moveaxis(c, -1, 0))


def synthesize(basis, fld):
    """Evaluate a ModalField on the basis nodes."""
    if fld.s != basis.s or fld.m != basis.m or fld.lmin != basis.lmin:
        raise ValueError("field/basis mismatch (spin, mode, or degree range)")
    return np.einsum("l...,lj->...j", fld.coeff, basis.functions)


def field_norm2(fld):
    """Full-sphere squared L2 norm, 4 pi sum |c_l|^2."""
    return 4.0 * np.pi * float(np.sum(np.abs(fld.coeff) ** 2))


def hedt_factor(s, degrees):
    """Ladder factor of hedt at spin s: -sqrt((l+s+1)(l-s)/2)."""
    l = np.asarray(degrees, dtype=float)
    return -np.sqrt(np.maximum((l + s + 1.0) * (l - s), 0.0) / 2.0)


def hedtp_factor(s, degrees):
    """Ladder factor of hedtp at spin s: +sqrt((l+s)(l-s+1)/2)."""
    l = np.asarray(degrees, dtype=float)
    return np.sqrt(np.maximum((l + s) * (l - s + 1.0), 0.0) / 2.0)


def _realign(coeff, lmin_old, lmin_new, lmax):
    """Shift a coefficient block between degree ranges, zero-filling."""
    n_new = lmax - lmin_new + 1
    out = np.zeros((n_new,) + coeff.shape[1:], dtype=coeff.dtype)
    lo = max(lmin_old, lmin_new)
    out[lo - lmin_new : coeff.shape[0] + lmin_old - lmin_new] = coeff[lo - lmin_old :]
    return out


def apply_hedt(fld):
    """hedt: ModalField of spin s -> spin s+1."""
    s = fld.s
    if s + 1 > SPIN_RANGE:
        raise ValueError(f"target spin {s+1} outside working range")
    degrees = np.arange(fld.lmin, fld.lmax + 1, dtype=float)
    fac = hedt_factor(s, degrees)
    coeff = fac.reshape((-1,) + (1,) * (fld.coeff.ndim - 1)) * fld.coeff
    lmin_new = max(abs(s + 1), abs(fld.m))
    return ModalField(s + 1, fld.m, lmin_new, _realign(coeff, fld.lmin, lmin_new, fld.lmax))


def apply_hedtp(fld):
    """hedtp: ModalField of spin s -> spin s-1."""
    s = fld.s
    if s - 1 < -SPIN_RANGE:
        raise ValueError(f"target spin {s-1} outside working range")
    degrees = np.arange(fld.lmin, fld.lmax + 1, dtype=float)
    fac = hedtp_factor(s, degrees)
    coeff = fac.reshape((-1,) + (1,) * (fld.coeff.ndim - 1)) * fld.coeff
    lmin_new = max(abs(s - 1), abs(fld.m))
    return ModalField(s - 1, fld.m, lmin_new, _realign(coeff, fld.lmin, lmin_new, fld.lmax))


def s_ring_eigen(basis):
    """Diagonal of the ring operator 2 hedt hedtp at spin s: -(l+s)(l-s+1)."""
    l = basis.degrees.astype(float)
    s = basis.s
    return -(l + s) * (l - s + 1.0)


def coupling_matrices(basis):
    """Matrices of multiplication by cos(theta) (bandwidth 1) and
    sin^2(theta) (bandwidth 2) on the retained degree band.

    Computed by Gauss-Legendre quadrature of triple products, which is
    exact here since B_l B_l' are polynomials in cos(theta).
    """
    B = basis.functions
    x = np.cos(basis.nodes_theta)
    w = basis.weights
    Mcos = 0.5 * np.einsum("lj,j,kj->lk", B, w * x, B)
    Msin2 = 0.5 * np.einsum("lj,j,kj->lk", B, w * (1.0 - x * x), B)
    return Mcos, Msin2


def hedt4_ladder(l):
    """Constant in hedt^4 (s=-2, degree l) = (l+2)!/(4 (l-2)!) (spin +2)."""
    if l < 2:
        raise ValueError("hedt^4 ladder defined for l >= 2")
    return (l - 1.0) * l * (l + 1.0) * (l + 2.0) / 4.0


def coordinate_hedt(basis, samples, s=None):
    """Pointwise coordinate form of hedt on theta-samples:
    (1/sqrt2)(d_theta + i m csc - s cot) for the e^{i m phi} mode.

    Derivatives via the exact spectral route; kept for oracles and for
    callers holding samples rather than coefficients.
    """
    if s is None:
        s = basis.s
    fld = analyze(basis, samples)
    return synthesize(basis.sibling(s + 1), apply_hedt(fld))


def coordinate_hedtp(basis, samples, s=None):
    if s is None:
        s = basis.s
    fld = analyze(basis, samples)
    return synthesize(basis.sibling(s - 1), apply_hedtp(fld))
