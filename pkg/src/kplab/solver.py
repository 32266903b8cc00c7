"""Nonlinear KP-II evolution, Duhamel quadrature, Picard iteration, and the
slope-filtered bilinear projections.

The evolution equation in coefficient form is

    d/dt u-hat = i w(xi, eta) u-hat  +  N(u)-hat,      N(u) = -d/dx (u^2),

integrated with an integrating-factor classical 4-stage Runge-Kutta scheme:
the stiff oscillatory linear part is treated exactly by unit-modulus phase
factors, so the scheme is exact for the linear flow and 4th order in the
nonlinearity.  Quadratic products are dealiased with the 2/3 rule, which
also makes the masked pointwise square equal to the exact truncated
convolution, and keeps the discrete mass integral u^2 conserved up to time
discretization error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .decomposition import (NormParams, SpaceTimeTrace, lqlp_norm,
                            v2_variation_norm)
from .errors import (AccuracyError, BlowupError, ConfigurationError,
                     DivergenceError, PreconditionError)
from .spectral import (GridSpec, SpectralField, omega_mesh,
                       structural_mask)

# ----------------------------------------------------------------------
# Dealiasing and the quadratic term
# ----------------------------------------------------------------------

_MASK_CACHE: dict = {}


def dealias_mask(grid: GridSpec) -> np.ndarray:
    """2/3-rule mask intersected with the structural mask."""
    got = _MASK_CACHE.get(grid)
    if got is None:
        kx = np.abs(grid.mode_numbers(0))[:, None, None]
        k1 = np.abs(grid.mode_numbers(1))[None, :, None]
        k2 = np.abs(grid.mode_numbers(2))[None, None, :]
        got = ((kx <= grid.modes_x // 3) & (k1 <= grid.modes_y1 // 3)
               & (k2 <= grid.modes_y2 // 3) & structural_mask(grid))
        _MASK_CACHE[grid] = got
    return got


def _nonlinear_rhs(grid: GridSpec, coeff: np.ndarray, mask: np.ndarray,
                   xi: np.ndarray) -> np.ndarray:
    """-i xi * mask * FFT( (IFFT coeff)^2 ): the coefficient-space N(u)."""
    phys = np.fft.ifftn(coeff * mask) * coeff.size
    sq = np.fft.fftn(phys.real ** 2) / coeff.size
    return -1j * xi * np.where(mask, sq, 0.0)


def nonlinearity(u: SpectralField) -> SpectralField:
    """Spectral representation of -d/dx(u^2) with the 2/3-rule mask applied.

    The xi = 0 output plane is annihilated by the derivative, so the result
    keeps the zero-x-mean invariant automatically.
    """
    if not u.real_flag:
        raise PreconditionError("nonlinearity requires a real field")
    g = u.grid
    mask = dealias_mask(g) if g.dealias else structural_mask(g)
    xi = g.xi_axis()[:, None, None]
    return SpectralField(g, _nonlinear_rhs(g, u.coeff, mask, xi), real_flag=True)


def nonlinearity_direct(u: SpectralField) -> SpectralField:
    """O(N^2) frequency-space convolution oracle for the quadratic term.

    Verification-scale only; matches nonlinearity() on masked inputs.
    """
    g = u.grid
    if np.prod(g.shape) > 40 ** 3:
        raise ConfigurationError("direct convolution oracle limited to small grids")
    mask = dealias_mask(g) if g.dealias else structural_mask(g)
    cin = np.where(mask, u.coeff, 0.0)
    idx = np.nonzero(cin)
    kx = g.mode_numbers(0)[idx[0]]
    k1 = g.mode_numbers(1)[idx[1]]
    k2 = g.mode_numbers(2)[idx[2]]
    vals = cin[idx]
    nx, n1, n2 = g.shape
    out = np.zeros(g.shape, dtype=np.complex128)
    for a in range(vals.size):
        tx, t1, t2 = kx[a] + kx, k1[a] + k1, k2[a] + k2
        ok = ((np.abs(tx) < nx // 2) & (np.abs(t1) < n1 // 2) & (np.abs(t2) < n2 // 2))
        np.add.at(out, (tx[ok] % nx, t1[ok] % n1, t2[ok] % n2), vals[a] * vals[ok])
    xi = g.xi_axis()[:, None, None]
    out = -1j * xi * np.where(mask, out, 0.0)
    return SpectralField(g, out, real_flag=True)


def spectral_product(u: SpectralField, v: SpectralField) -> SpectralField:
    """Exact (alias-free) convolution product u*v truncated to the grid.

    Implemented by zero-padded FFT; the xi = 0 output plane is dropped per
    the zero-x-mean invariant.
    """
    if u.grid != v.grid:
        raise ConfigurationError("product requires a shared grid")
    g = u.grid
    nx, n1, n2 = g.shape
    big = (2 * nx, 2 * n1, 2 * n2)

    def embed(c):
        out = np.zeros(big, dtype=np.complex128)
        kx, k1, k2 = g.mode_numbers(0), g.mode_numbers(1), g.mode_numbers(2)
        out[np.ix_(kx % big[0], k1 % big[1], k2 % big[2])] = c
        return out

    pu, pv = embed(u.coeff), embed(v.coeff)
    prod = np.fft.fftn(np.fft.ifftn(pu) * np.fft.ifftn(pv)) * pu.size
    kx, k1, k2 = g.mode_numbers(0), g.mode_numbers(1), g.mode_numbers(2)
    out = prod[np.ix_(kx % big[0], k1 % big[1], k2 % big[2])]
    out[0, :, :] = 0.0
    out[~structural_mask(g)] = 0.0
    return SpectralField(g, out, u.real_flag and v.real_flag)


# ----------------------------------------------------------------------
# Time stepping
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    grid: GridSpec
    dt: float = 0.01
    T: float = 1.0
    samples_per_unit: int = 8
    integrator: str = "ifrk4"
    nonlinear_scale: float = 1.0

    def __post_init__(self):
        if not (self.dt > 0):
            raise ConfigurationError("dt must be positive")
        if self.T < self.dt:
            raise ConfigurationError("horizon T must be at least one step")
        if self.integrator != "ifrk4":
            raise ConfigurationError(f"unknown integrator {self.integrator!r}")
        if self.nonlinear_scale != 0.0 and not self.grid.dealias:
            raise ConfigurationError("nonlinear runs require dealiasing on")


def evolve(u0: SpectralField, cfg: SimConfig) -> SpaceTimeTrace:
    """Integrate the nonlinear flow; returns the sampled trajectory.

    Raises BlowupError with a time stamp on NaN or norm explosion (the
    small-data step guard).
    """
    g = cfg.grid
    if u0.grid != g:
        raise ConfigurationError("datum grid differs from SimConfig grid")
    mask = dealias_mask(g) if g.dealias else structural_mask(g)
    xi = g.xi_axis()[:, None, None]
    omega = omega_mesh(g)
    alpha = cfg.nonlinear_scale

    sample_dt = 1.0 / cfg.samples_per_unit
    n_samples = int(round(cfg.T / sample_dt))
    steps = max(1, math.ceil(sample_dt / cfg.dt))
    h = sample_dt / steps
    E = np.exp(1j * omega * h)
    E2 = np.exp(1j * omega * h / 2)

    c = np.where(mask, u0.coeff, 0.0) if g.dealias else u0.coeff.copy()
    norm0 = np.sqrt(np.sum(np.abs(c) ** 2))
    times = [0.0]
    states = [SpectralField(g, c.copy(), u0.real_flag)]

    def rhs(a):
        if alpha == 0.0:
            return np.zeros_like(a)
        return alpha * _nonlinear_rhs(g, a, mask, xi)

    t = 0.0
    for js in range(1, n_samples + 1):
        for _ in range(steps):
            n1 = rhs(c)
            u2 = E2 * (c + 0.5 * h * n1)
            n2 = rhs(u2)
            u3 = E2 * c + 0.5 * h * n2
            n3 = rhs(u3)
            u4 = E * c + h * (E2 * n3)
            n4 = rhs(u4)
            c = E * c + (h / 6.0) * (E * n1 + 2.0 * E2 * (n2 + n3) + n4)
            t += h
            nn = np.sqrt(np.sum(np.abs(c) ** 2))
            if not np.isfinite(nn) or (norm0 > 0 and nn > 1e3 * norm0):
                raise BlowupError(f"step rejected at t={t:.6g} (norm {nn:.3e})", t=t)
        times.append(js * sample_dt)
        states.append(SpectralField(g, c.copy(), u0.real_flag))
    return SpaceTimeTrace(np.asarray(times), states, window="hann")


def mass_series(tr: SpaceTimeTrace) -> np.ndarray:
    """Integral of u^2 over the box at each sample (the conserved quantity)."""
    return np.array([s.l2_norm() ** 2 for s in tr.states])


# ----------------------------------------------------------------------
# Duhamel quadrature
# ----------------------------------------------------------------------

def _composite_weights(n: int, dt: float) -> np.ndarray:
    """Composite Simpson weights on n uniform samples (3/8 tail if needed)."""
    if n < 3:
        raise PreconditionError("Duhamel quadrature needs at least 3 samples")
    w = np.zeros(n)
    if (n - 1) % 2 == 0:
        w[0] = w[-1] = 1.0
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        w *= dt / 3.0
    elif n == 4:
        w = dt * 3.0 / 8.0 * np.array([1.0, 3.0, 3.0, 1.0])
    else:
        w[: n - 3] += _composite_weights(n - 3, dt)
        w[n - 4:] += dt * 3.0 / 8.0 * np.array([1.0, 3.0, 3.0, 1.0])
    return w


def duhamel_integral(forcing: SpaceTimeTrace, t: float,
                     tol: float = 1e-8) -> SpectralField:
    """integral_0^t S(t-s) f(s) ds by interaction-picture composite Simpson.

    A coarse/fine Richardson comparison guards the tolerance: if halving the
    sampling changes the result by more than tol (relative to the forcing
    scale), an AccuracyError reports the required density.
    """
    if not forcing.is_uniform():
        raise PreconditionError("duhamel_integral requires a uniform forcing grid")
    times = forcing.times
    i_end = int(np.argmin(np.abs(times - t)))
    if abs(times[i_end] - t) > 1e-9 * max(1.0, abs(t)):
        raise PreconditionError(f"t={t} is not a forcing sample time")
    if i_end < 2:
        raise AccuracyError("forcing must be sampled at >= 3 points up to t")
    n = i_end + 1
    dt = forcing.dt()
    g = forcing.grid
    omega = omega_mesh(g)
    arr = forcing.stack()[:n]
    pull = arr * np.exp(-1j * omega[None, ...] * times[:n, None, None, None])

    w = _composite_weights(n, dt)
    integral = np.tensordot(w, pull, axes=(0, 0))

    if n >= 5 and n % 2 == 1:
        sub = pull[::2]  # same endpoints, doubled spacing
        wc = _composite_weights(sub.shape[0], 2 * dt)
        coarse = np.tensordot(wc, sub, axes=(0, 0))
        scale = np.sqrt(g.volume * np.sum(np.abs(integral) ** 2))
        err = np.sqrt(g.volume * np.sum(np.abs(integral - coarse) ** 2)) / 15.0
        if scale > 0 and err > tol * max(scale, 1.0):
            need = dt * (tol * max(scale, 1.0) / err) ** 0.25
            raise AccuracyError(
                f"Duhamel quadrature error {err:.3e} exceeds tol {tol:.1e}; "
                f"sample spacing of about {need:.3e} required")
    out = integral * np.exp(1j * omega * t)
    return SpectralField(g, out, real_flag=forcing.states[0].real_flag)


# ----------------------------------------------------------------------
# Picard iteration
# ----------------------------------------------------------------------

@dataclass
class PicardReport:
    iterates: int
    diffs: list
    ratios: list
    converged: bool
    diffs_lqlp: list = field(default_factory=list)
    diffs_v2: list = field(default_factory=list)


def _surrogate_diff_norm(grid: GridSpec, times: np.ndarray, a: np.ndarray,
                         b: np.ndarray, np_: NormParams):
    """sup-in-t lqlp norm plus the 2-variation of the difference trace."""
    diff = a - b
    sup_lqlp = 0.0
    for i in range(times.size):
        sup_lqlp = max(sup_lqlp, lqlp_norm(SpectralField(grid, diff[i]), np_))
    states = [SpectralField(grid, diff[i], real_flag=False) for i in range(times.size)]
    v2 = v2_variation_norm(SpaceTimeTrace(times, states, window="none"))
    return sup_lqlp, v2


def picard_iterate(u0: SpectralField, cfg: SimConfig, n_max: int = 12,
                   tol: float = 1e-10,
                   norm_params: NormParams | None = None,
                   smallness_threshold: float = 0.05):
    """Duhamel fixed-point iteration w <- S(t)u0 + int_0^t S(t-s) N(w)(s) ds.

    Returns (trace of the final iterate, PicardReport).  Successive
    differences are measured in the composite surrogate norm (sup-in-t
    anisotropic norm + 2-variation of the difference); three consecutive
    ratios >= 1 raise DivergenceError.
    """
    np_ = norm_params or NormParams()
    datum_norm = lqlp_norm(u0, np_)
    if datum_norm > smallness_threshold:
        raise PreconditionError(
            f"datum norm {datum_norm:.3e} exceeds the small-data threshold "
            f"{smallness_threshold:.1e}")
    g = cfg.grid
    mask = dealias_mask(g) if g.dealias else structural_mask(g)
    xi = g.xi_axis()[:, None, None]
    omega = omega_mesh(g)
    alpha = cfg.nonlinear_scale

    n_t = int(round(cfg.T / cfg.dt)) + 1
    times = np.arange(n_t) * cfg.dt
    phases = np.exp(1j * omega[None, ...] * times[:, None, None, None])
    base = np.where(mask, u0.coeff, 0.0)[None, ...] * phases  # S(t) u0

    # Prefix Simpson weight matrix W[j, i]: integral over [0, t_j].
    W = np.zeros((n_t, n_t))
    for jj in range(2, n_t):
        W[jj, : jj + 1] = _composite_weights(jj + 1, cfg.dt)
    if n_t >= 2:
        W[1, :2] = cfg.dt / 2.0  # trapezoid on the first interval only

    def apply_duhamel(warr):
        forc = np.empty_like(warr)
        for i in range(n_t):
            forc[i] = alpha * _nonlinear_rhs(g, warr[i], mask, xi)
        pull = forc * np.conj(phases)
        integ = np.tensordot(W, pull.reshape(n_t, -1), axes=(1, 0))
        integ = integ.reshape(warr.shape) * phases
        return base + integ

    w = base.copy()
    diffs, ratios, dl, dv = [], [], [], []
    converged = datum_norm == 0.0
    n_done = 0
    rising = 0
    for it in range(1, n_max + 1):
        w_next = apply_duhamel(w)
        sl, sv = _surrogate_diff_norm(g, times, w_next, w, np_)
        d = sl + sv
        dl.append(sl)
        dv.append(sv)
        diffs.append(d)
        if len(diffs) >= 2 and diffs[-2] > 0:
            r = diffs[-1] / diffs[-2]
            ratios.append(r)
            rising = rising + 1 if r >= 1.0 else 0
            if rising >= 3:
                raise DivergenceError(
                    f"non-contractive ratios for 3 consecutive iterates "
                    f"(last {r:.3f}); datum too large")
        w = w_next
        n_done = it
        if d <= tol:
            converged = True
            break
    states = [SpectralField(g, w[i], u0.real_flag) for i in range(n_t)]
    trace = SpaceTimeTrace(times, states, window="hann")
    return trace, PicardReport(n_done, diffs, ratios, converged, dl, dv)


# ----------------------------------------------------------------------
# Slope-filtered bilinear projections
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class MultiplierProfile:
    """Even C^2 cutoff phi1 on R^2 (1 on (-plateau, plateau)^2, 0 outside
    (-support, support)^2) and the derived telescoping band family."""

    plateau: float = 128.0
    support: float = 129.0

    def __post_init__(self):
        if not (0 < self.plateau < self.support):
            raise ConfigurationError("need 0 < plateau < support")

    def _ramp(self, a: np.ndarray) -> np.ndarray:
        a = np.abs(a)
        t = np.clip((a - self.plateau) / (self.support - self.plateau), 0.0, 1.0)
        s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t))  # quintic smoothstep, C^2
        return 1.0 - s

    def phi1(self, s1, s2) -> np.ndarray:
        return self._ramp(np.asarray(s1, dtype=float)) * self._ramp(np.asarray(s2, dtype=float))

    def band_weight(self, L: float, s1, s2) -> np.ndarray:
        """rho_L: phi1 at L=1, else psi_L(s) = phi1(s/L) - phi1(2s/L)."""
        if L == 1:
            return self.phi1(s1, s2)
        if L < 2 or abs(L - 2.0 ** round(math.log2(L))) > 1e-12 * L:
            raise ConfigurationError("band index L must be a power of 2, >= 1")
        s1 = np.asarray(s1, dtype=float)
        s2 = np.asarray(s2, dtype=float)
        return self.phi1(s1 / L, s2 / L) - self.phi1(2 * s1 / L, 2 * s2 / L)

    def bands_for_extent(self, max_abs_arg: float) -> list:
        """All L whose union covers arguments up to max_abs_arg (sum = 1)."""
        L, bands = 1.0, [1.0]
        while self.plateau * L < max_abs_arg:
            L *= 2.0
            bands.append(L)
        bands.append(bands[-1] * 2.0)
        return bands


DEFAULT_PROFILE = MultiplierProfile()

_SLOPE_PRODUCT_LIMIT = 24 ** 3


def _mode_list(u: SpectralField):
    g = u.grid
    idx = np.nonzero(u.coeff)
    xi = g.mode_numbers(0)[idx[0]] * g.dxi
    e1 = g.mode_numbers(1)[idx[1]] * g.deta1
    e2 = g.mode_numbers(2)[idx[2]] * g.deta2
    return xi, e1, e2, u.coeff[idx]


def slope_filtered_product(u: SpectralField, v: SpectralField, L: float,
                           profile: MultiplierProfile = DEFAULT_PROFILE,
                           return_report: bool = False):
    """The band-L piece of the product:  weight rho_L((s1-s2)/(xi1+xi2))
    applied to each frequency pair of the convolution.

    Direct O(Nu * Nv) pair quadrature; verification-scale (grids <= 24^3).
    Pairs with xi1 + xi2 = 0 feed the dropped xi = 0 plane; their mass is
    counted and reported.
    """
    if u.grid != v.grid:
        raise ConfigurationError("slope_filtered_product requires a shared grid")
    g = u.grid
    if int(np.prod(g.shape)) > _SLOPE_PRODUCT_LIMIT:
        raise ConfigurationError("slope_filtered_product is restricted to <= 24^3 grids")
    xu, e1u, e2u, cu = _mode_list(u)
    xv, e1v, e2v, cv = _mode_list(v)
    nx, n1, n2 = g.shape
    out = np.zeros(g.shape, dtype=np.complex128)
    dropped = 0.0
    s1v = e1v / xv
    s2v = e2v / xv
    for a in range(cu.size):
        xsum = xu[a] + xv
        zero = xsum == 0.0
        if np.any(zero):
            dropped += float(np.sum(np.abs(cu[a] * cv[zero]) ** 2))
        ok = ~zero
        arg1 = (e1u[a] / xu[a] - s1v[ok]) / xsum[ok]
        arg2 = (e2u[a] / xu[a] - s2v[ok]) / xsum[ok]
        w = profile.band_weight(L, arg1, arg2)
        tx = np.rint((xsum[ok]) / g.dxi).astype(int)
        t1 = np.rint((e1u[a] + e1v[ok]) / g.deta1).astype(int)
        t2 = np.rint((e2u[a] + e2v[ok]) / g.deta2).astype(int)
        infl = ((np.abs(tx) < nx // 2) & (np.abs(t1) < n1 // 2) & (np.abs(t2) < n2 // 2))
        vals = w * cu[a] * cv[ok]
        np.add.at(out, (tx[infl] % nx, t1[infl] % n1, t2[infl] % n2), vals[infl])
    fieldout = SpectralField(g, out, u.real_flag and v.real_flag)
    if return_report:
        return fieldout, {"dropped_zero_xi_mass": dropped}
    return fieldout


def slope_band_extent(grid: GridSpec) -> float:
    """Largest |(s1-s2)/(xi1+xi2)| over grid mode pairs, for band coverage."""
    smax = max(abs(grid.eta1_axis()).max() / grid.dxi,
               abs(grid.eta2_axis()).max() / grid.dxi)
    return 2.0 * smax / grid.dxi
