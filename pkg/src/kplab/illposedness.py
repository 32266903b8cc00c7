"""Two-bump datum, resonance function, the second Picard iterate of the
cross term, and the norm-growth sweep that rules out twice-differentiable
flow maps for p > 2.

Everything here works directly on frequency boxes with tensor quadrature:
the required xi-resolution (mu/4 = lam^-2/4 at lam = 64) is infeasible on a
full lattice, and the datum is a characteristic function, exact in box
arithmetic.  Anisotropic norms of box data are evaluated in slope
coordinates; when a box meets many sectors the lattice sum over sector
centers is replaced by the slope integral (relative error is exponentially
small in the count, and the reduction is exact at p = 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .decomposition import lqlp_norm_from_masses
from .errors import ConfigurationError, DomainError, PreconditionError
from .reporting import fit_loglog_slope


@dataclass(frozen=True)
class IllposedParams:
    mu: float
    lam: float
    p: float
    coupling: bool = True

    def __post_init__(self):
        for v, name in ((self.mu, "mu"), (self.lam, "lam")):
            j = round(math.log2(v))
            if abs(v - 2.0 ** j) > 1e-12 * v:
                raise ConfigurationError(f"{name}={v} must be a power of 2")
        if not (self.mu < 1 < self.lam):
            raise ConfigurationError("need mu << 1 << lam")
        if not (1.0 < self.p < math.inf):
            raise ConfigurationError("p must lie in (1, inf)")
        if self.coupling and not (0.5 <= self.mu * self.lam ** 2 <= 2.0):
            raise ConfigurationError(
                f"coupling requires mu*lam^2 in [1/2, 2], got {self.mu * self.lam ** 2}")


@dataclass(frozen=True)
class FrequencyBox:
    xi_range: tuple
    eta_range: tuple   # the same interval in both transverse dims
    amplitude: float

    def __post_init__(self):
        if not (self.xi_range[0] < self.xi_range[1]
                and self.eta_range[0] < self.eta_range[1]):
            raise ConfigurationError("frequency box ranges must be nonempty")
        if not (self.amplitude > 0):
            raise ConfigurationError("box amplitude must be positive")

    def volume(self) -> float:
        dxi = self.xi_range[1] - self.xi_range[0]
        de = self.eta_range[1] - self.eta_range[0]
        return dxi * de * de

    def l2_norm(self) -> float:
        return self.amplitude * math.sqrt(self.volume())


_MAX_FREQUENCY = 2.0 ** 20


def two_bump_datum(ip: IllposedParams) -> tuple:
    """The two characteristic-function bumps of the ill-posedness datum."""
    mu, lam, p = ip.mu, ip.lam, ip.p
    if lam + mu > _MAX_FREQUENCY:
        raise ConfigurationError("boxes off the admissible frequency window")
    eta = (lam * mu / 2, 2 * lam * mu)
    box1 = FrequencyBox((mu / 2, mu), eta, mu ** -3 * (lam / mu) ** (-2.0 / p))
    box2 = FrequencyBox((lam + mu / 2, lam + mu), eta, mu ** -1.5 * lam ** -1.5)
    return box1, box2


# Operation alias.
build_phi = two_bump_datum


# ----------------------------------------------------------------------
# Anisotropic norm of single-shell boxes
# ----------------------------------------------------------------------

def _shell_of_box(box: FrequencyBox) -> float:
    xlo, xhi = box.xi_range
    if xlo <= 0:
        raise ConfigurationError("expected a positive-xi box")
    lam_shell = 2.0 ** math.floor(math.log2(xlo))
    if xhi > 2 * lam_shell * (1 + 1e-12):
        raise ConfigurationError("box straddles a dyadic shell boundary")
    return lam_shell


def _box_sector_lp(box: FrequencyBox, p: float, n_slope: int = 240) -> float:
    """(sum over sectors of mass^{p/2})^{1/p} for one single-shell box.

    Sector masses in slope coordinates: for slope s inside the box's slope
    region, the window eta in xi*(s +- lam/2) is much narrower than the eta
    box when many sectors are met, so

        mass(s1, s2) = amp^2 lam^2 int_{Xi(s1) ^ Xi(s2)} xi^2 dxi,

    and the lattice sum over sector centers is the slope integral with
    lattice density 1/lam^2.  When the box meets only a few sectors the sum
    is enumerated exactly (per-dim overlap of windows with the eta box).
    """
    lam = _shell_of_box(box)
    xlo, xhi = box.xi_range
    elo, ehi = box.eta_range
    slo, shi = elo / xhi, ehi / xlo
    m_lo = math.floor(slo / lam + 0.5)
    m_hi = math.floor(shi / lam + 0.5)
    count = m_hi - m_lo + 1
    xg, xw = np.polynomial.legendre.leggauss(64)
    xi = 0.5 * (xhi + xlo) + 0.5 * (xhi - xlo) * xg
    wxi = 0.5 * (xhi - xlo) * xw
    if count <= 256:
        ms = np.arange(m_lo, m_hi + 1)
        lo = np.maximum(np.outer(xi, lam * (ms - 0.5)), elo)
        hi = np.minimum(np.outer(xi, lam * (ms + 0.5)), ehi)
        ov = np.maximum(hi - lo, 0.0)                       # (n_xi, n_m)
        mass = box.amplitude ** 2 * np.einsum("x,xa,xb->ab", wxi, ov, ov)
        if p == math.inf:
            return float(np.sqrt(np.max(mass)))
        return float(np.sum(mass ** (p / 2.0)) ** (1.0 / p))
    # many sectors: slope-integral route
    gl, gw = np.polynomial.legendre.leggauss(n_slope)
    s = 0.5 * (shi + slo) + 0.5 * (shi - slo) * gl
    ws = 0.5 * (shi - slo) * gw
    lo1 = np.maximum(xlo, elo / s)
    hi1 = np.minimum(xhi, ehi / s)
    acc = 0.0
    mx = 0.0
    for i in range(n_slope):
        lo = np.maximum(lo1[i], lo1)
        hi = np.minimum(hi1[i], hi1)
        integ = np.where(hi > lo, (hi ** 3 - lo ** 3) / 3.0, 0.0)
        mass = box.amplitude ** 2 * lam ** 2 * integ
        acc += ws[i] * np.sum(ws * mass ** (p / 2.0))
        mx = max(mx, float(np.max(mass)))
    if p == math.inf:
        return math.sqrt(mx)
    return float((acc / lam ** 2) ** (1.0 / p))


def box_lqlp_norm(boxes, q: float, p: float) -> float:
    """l^q l^p L^2 norm of a union of positive-xi single-shell boxes."""
    shells: dict = {}
    for box in boxes:
        lam = _shell_of_box(box)
        val = math.sqrt(lam) * _box_sector_lp(box, p)
        shells.setdefault(lam, []).append(val)
    per_shell = []
    for lam, vals in sorted(shells.items()):
        if len(vals) == 1:
            per_shell.append(vals[0])
        elif p == math.inf:
            per_shell.append(max(vals))
        else:
            per_shell.append(float(np.sum(np.asarray(vals) ** p) ** (1 / p)))
    arr = np.asarray(per_shell)
    if q == math.inf:
        return float(np.max(arr))
    return float(np.sum(arr ** q) ** (1.0 / q))


# ----------------------------------------------------------------------
# Resonance function
# ----------------------------------------------------------------------

def resonance_function(xi: float, xi1: float, eta, eta1) -> float:
    """R = -3 xi xi1 (xi-xi1) - (xi xi1/(xi-xi1)) |eta/xi - eta1/xi1|^2."""
    if xi == 0 or xi1 == 0 or xi == xi1:
        raise DomainError("resonance function pole (xi, xi1, xi-xi1 must be nonzero)")
    d0 = eta[0] / xi - eta1[0] / xi1
    d1 = eta[1] / xi - eta1[1] / xi1
    return -3.0 * xi * xi1 * (xi - xi1) - (xi * xi1 / (xi - xi1)) * (d0 * d0 + d1 * d1)


def sample_interaction_set(ip: IllposedParams, n: int, seed: int = 0):
    """Uniform samples of the pair set A; returns (R values, lam^2 mu)."""
    rng = np.random.default_rng(seed)
    mu, lam = ip.mu, ip.lam
    xi1 = rng.uniform(mu / 2, mu, n)
    xi2 = rng.uniform(lam + mu / 2, lam + mu, n)
    e1 = rng.uniform(lam * mu / 2, 2 * lam * mu, (n, 2))
    e2 = rng.uniform(lam * mu / 2, 2 * lam * mu, (n, 2))
    xi = xi1 + xi2
    eta = e1 + e2
    d0 = eta[:, 0] / xi - e1[:, 0] / xi1
    d1 = eta[:, 1] / xi - e1[:, 1] / xi1
    R = -3.0 * xi * xi1 * (xi - xi1) - (xi * xi1 / (xi - xi1)) * (d0 ** 2 + d1 ** 2)
    return R, lam ** 2 * mu


def cross_term_support(ip: IllposedParams):
    """xi-intervals of the three parts of u1^2 and their exact disjointness."""
    mu, lam = ip.mu, ip.lam
    f1 = (mu, 2 * mu)
    f2 = (2 * lam + mu, 2 * lam + 2 * mu)
    f3 = (lam + mu, lam + 2 * mu)

    def disjoint(a, b):
        return a[1] < b[0] or b[1] < a[0]

    return f1, f2, f3, disjoint(f1, f3) and disjoint(f3, f2) and disjoint(f1, f2)


# ----------------------------------------------------------------------
# Second Picard iterate of the cross term
# ----------------------------------------------------------------------

def _gl_nodes(lo, hi, n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (hi + lo) + 0.5 * (hi - lo) * x, 0.5 * (hi - lo) * w


def _simpson_weights(n: int) -> np.ndarray:
    if n < 3 or n % 2 == 0:
        raise ConfigurationError("Simpson needs an odd node count >= 3")
    w = np.zeros(n)
    w[0] = w[-1] = 1.0
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / (3.0 * (n - 1))


def _clip(lo1, hi1, lo2, hi2):
    return max(lo1, lo2), min(hi1, hi2)


@dataclass
class CrossTermResult:
    xi_nodes: np.ndarray
    eta_nodes: np.ndarray
    weights: tuple                  # (w_xi, w_eta)
    closed: np.ndarray              # (n_xi, n_eta, n_eta) complex
    direct: np.ndarray
    rel_l2_gap: float
    prefactor: complex              # overall factor fixed by the direct oracle
    integrand_real_mean: float      # stats of Re (e^{iR}-1)/(iR) over A
    integrand_real_min: float


def second_picard_cross_term(ip: IllposedParams, n_out: int = 8,
                             n_pair: int = 24, n_pair_direct: int = 18,
                             n_simpson: int = 33,
                             rel_tol: float = 0.05,
                             amp_override=None) -> CrossTermResult:
    """Sampled cross-term coefficient F3-hat(1, xi, eta) by two routes.

    closed: analytic time factor (e^{iR}-1)/(iR), tensor Gauss-Legendre over
    the pair set A.  direct: composite-Simpson quadrature in s of the
    Duhamel integrand e^{i s R}, with factorized transverse sums on an
    independent pair quadrature.  One refinement pass on disagreement; a
    residual disagreement beyond rel_tol raises ConfigurationError.
    """
    if not ip.coupling:
        raise PreconditionError("cross-term experiment requires the coupling flag")
    mu, lam = ip.mu, ip.lam
    box1, box2 = two_bump_datum(ip)
    if amp_override is not None:
        amp = amp_override
    else:
        amp = box1.amplitude * box2.amplitude
    if amp == 0.0:
        z = np.zeros((n_out, n_out, n_out), dtype=np.complex128)
        xi_out, w_xi = _gl_nodes(lam + mu, lam + 2 * mu, n_out)
        eta_out, w_eta = _gl_nodes(lam * mu, 4 * lam * mu, n_out)
        return CrossTermResult(xi_out, eta_out, (w_xi, w_eta), z, z.copy(),
                               0.0, -4j, 1.0, 1.0)

    xi_out, w_xi = _gl_nodes(lam + mu, lam + 2 * mu, n_out)
    eta_out, w_eta = _gl_nodes(lam * mu, 4 * lam * mu, n_out)
    pref = -4j * amp  # -2 (second Gateaux derivative) * 2 (cross term) * i (d/dx)/i

    def omega(xi, e1, e2):
        return xi ** 3 - (e1 ** 2 + e2 ** 2) / xi

    rsum, rcount, rmin = 0.0, 0, math.inf

    def closed_route(n_nodes, collect=False):
        nonlocal rsum, rcount, rmin
        vals = np.zeros((n_out, n_out, n_out), dtype=np.complex128)
        for ix, xo in enumerate(xi_out):
            xlo, xhi = _clip(mu / 2, mu, xo - lam - mu, xo - lam - mu / 2)
            if xhi <= xlo:
                continue
            x1, wx1 = _gl_nodes(xlo, xhi, n_nodes)
            for i1, eo1 in enumerate(eta_out):
                elo1, ehi1 = _clip(lam * mu / 2, 2 * lam * mu,
                                   eo1 - 2 * lam * mu, eo1 - lam * mu / 2)
                if ehi1 <= elo1:
                    continue
                h1, wh1 = _gl_nodes(elo1, ehi1, n_nodes)
                for i2, eo2 in enumerate(eta_out):
                    elo2, ehi2 = _clip(lam * mu / 2, 2 * lam * mu,
                                       eo2 - 2 * lam * mu, eo2 - lam * mu / 2)
                    if ehi2 <= elo2:
                        continue
                    h2, wh2 = _gl_nodes(elo2, ehi2, n_nodes)
                    X = x1[:, None, None]
                    D0 = eo1 / xo - h1[None, :, None] / X
                    D1 = eo2 / xo - h2[None, None, :] / X
                    R = (-3.0 * xo * X * (xo - X)
                         - (xo * X / (xo - X)) * (D0 ** 2 + D1 ** 2))
                    ker = np.where(np.abs(R) > 1e-12,
                                   (np.exp(1j * R) - 1.0) / (1j * R), 1.0)
                    if collect:
                        rsum += float(np.sum(ker.real))
                        rcount += ker.size
                        rmin = min(rmin, float(np.min(ker.real)))
                    W = (wx1[:, None, None] * wh1[None, :, None]
                         * wh2[None, None, :])
                    vals[ix, i1, i2] = np.sum(W * ker)
        return vals

    def direct_route(n_nodes):
        s_nodes = np.linspace(0.0, 1.0, n_simpson)
        sw = _simpson_weights(n_simpson)
        vals = np.zeros((n_out, n_out, n_out), dtype=np.complex128)
        for ix, xo in enumerate(xi_out):
            xlo, xhi = _clip(mu / 2, mu, xo - lam - mu, xo - lam - mu / 2)
            if xhi <= xlo:
                continue
            x1, wx1 = _gl_nodes(xlo, xhi, n_nodes)
            A = -3.0 * xo * x1 * (xo - x1)                    # (nx,)
            B = -(xo * x1 / (xo - x1))                        # (nx,)
            for i1, eo1 in enumerate(eta_out):
                elo1, ehi1 = _clip(lam * mu / 2, 2 * lam * mu,
                                   eo1 - 2 * lam * mu, eo1 - lam * mu / 2)
                if ehi1 <= elo1:
                    continue
                h1, wh1 = _gl_nodes(elo1, ehi1, n_nodes)
                C1 = (eo1 / xo - h1[None, :] / x1[:, None]) ** 2   # (nx, nh)
                T1 = np.einsum("h,sxh->sx", wh1,
                               np.exp(1j * s_nodes[:, None, None] * B[None, :, None] * C1[None]))
                for i2, eo2 in enumerate(eta_out):
                    elo2, ehi2 = _clip(lam * mu / 2, 2 * lam * mu,
                                       eo2 - 2 * lam * mu, eo2 - lam * mu / 2)
                    if ehi2 <= elo2:
                        continue
                    h2, wh2 = _gl_nodes(elo2, ehi2, n_nodes)
                    C2 = (eo2 / xo - h2[None, :] / x1[:, None]) ** 2
                    T2 = np.einsum("h,sxh->sx", wh2,
                                   np.exp(1j * s_nodes[:, None, None] * B[None, :, None] * C2[None]))
                    phase = np.exp(1j * s_nodes[:, None] * A[None, :])
                    vals[ix, i1, i2] = np.einsum("s,x,sx->", sw, wx1, phase * T1 * T2)
        return vals

    def finish(vals):
        return pref * xi_out[:, None, None] * np.exp(
            1j * omega(xi_out[:, None, None], eta_out[None, :, None],
                       eta_out[None, None, :])) * vals

    closed = finish(closed_route(n_pair, collect=True))
    direct = finish(direct_route(n_pair_direct))

    def l2(arr):
        W = (w_xi[:, None, None] * w_eta[None, :, None] * w_eta[None, None, :])
        return math.sqrt(float(np.sum(W * np.abs(arr) ** 2)))

    gap = l2(closed - direct) / max(l2(closed), 1e-300)
    if gap > rel_tol:
        closed = finish(closed_route(int(n_pair * 1.5)))
        direct = finish(direct_route(int(n_pair_direct * 1.5)))
        gap = l2(closed - direct) / max(l2(closed), 1e-300)
        if gap > rel_tol:
            raise ConfigurationError(
                f"cross-term quadratures disagree by {gap:.2%} after refinement")
    return CrossTermResult(xi_out, eta_out, (w_xi, w_eta), closed, direct, gap,
                           prefactor=pref / abs(amp) if amp else pref,
                           integrand_real_mean=rsum / max(rcount, 1),
                           integrand_real_min=rmin)


def cross_term_norm(ip: IllposedParams, result: CrossTermResult) -> float:
    """l^infty l^p L^2 norm of the sampled cross term.

    Sector addressing per quadrature node; for the sweep parameters the
    support lies in one shell and one sector, so this reduces to the
    lam^{1/2}-weighted L^2 mass, but mixed-sector supports are handled.
    """
    w_xi, w_eta = result.weights
    masses: dict = {}
    for ix, xo in enumerate(result.xi_nodes):
        j = math.floor(math.log2(xo))
        lam_shell = 2.0 ** j
        for i1, eo1 in enumerate(result.eta_nodes):
            m1 = math.floor(eo1 / xo / lam_shell + 0.5)
            for i2, eo2 in enumerate(result.eta_nodes):
                m2 = math.floor(eo2 / xo / lam_shell + 0.5)
                key = (j, m1, m2)
                contrib = (w_xi[ix] * w_eta[i1] * w_eta[i2]
                           * abs(result.closed[ix, i1, i2]) ** 2)
                masses[key] = masses.get(key, 0.0) + contrib
    return lqlp_norm_from_masses(masses, math.inf, ip.p)


@dataclass
class GrowthReport:
    lams: np.ndarray
    mus: np.ndarray
    norms: np.ndarray
    gaps: np.ndarray
    slope: float
    predicted: float


def growth_sweep(lams, p: float, **kwargs) -> GrowthReport:
    """Fitted log2 slope of ||F3(1)|| against lam with mu = lam^{-2}.

    Predicted exponent 3 - 6/p: growth for p > 2, flat at p = 2.
    """
    lams = sorted(lams)
    if len(lams) < 3:
        raise ConfigurationError("growth sweep needs at least 3 lam values")
    norms, gaps, mus = [], [], []
    for lam in lams:
        mu = lam ** -2.0
        ip = IllposedParams(mu, lam, p)
        res = second_picard_cross_term(ip, **kwargs)
        norms.append(cross_term_norm(ip, res))
        gaps.append(res.rel_l2_gap)
        mus.append(mu)
    slope = fit_loglog_slope(np.asarray(lams), np.asarray(norms))
    return GrowthReport(np.asarray(lams), np.asarray(mus), np.asarray(norms),
                        np.asarray(gaps), slope, 3.0 - 6.0 / p)
