"""Datum generators: Gaussian bumps, sector indicators, random band fields,
and the lattice rendition of the two-bump ill-posedness datum.

Gaussian data are defined by closed-form coefficient formulas, so the whole
dilation family h -> h^2 u(h x, h^2 y) is available analytically: the scale-h
coefficients are h^{-3} * base(xi/h, eta/h^2) evaluated on the lattice.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .spectral import GridSpec, SpectralField, make_field

# counter-based generator so ensembles are order-independent
def member_rng(run_seed: int, member: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(np.uint64(run_seed) << np.uint64(32))
                                                + np.uint64(member)))


def gaussian_datum(grid: GridSpec, amplitude: float = 1.0, scale: float = 1.0,
                   center_xi: float = 2.0, center_eta=(0.0, 0.0),
                   width_xi: float = 0.75, width_eta: float = 0.75) -> SpectralField:
    """Real field with Gaussian coefficient profile around +-(center_xi, center_eta).

    `scale` applies the exact dilation u -> scale^2 u(scale x, scale^2 y) to
    the base formula, evaluated in closed form on the lattice.
    """
    if center_xi == 0.0:
        raise ConfigurationError("center_xi must be nonzero (zero-x-mean fields)")
    h = scale
    xi = grid.xi_axis()[:, None, None] / h
    e1 = grid.eta1_axis()[None, :, None] / h ** 2
    e2 = grid.eta2_axis()[None, None, :] / h ** 2
    prof = (np.exp(-((xi - center_xi) ** 2) / (2 * width_xi ** 2))
            * np.exp(-((e1 - center_eta[0]) ** 2 + (e2 - center_eta[1]) ** 2)
                     / (2 * width_eta ** 2)))
    coeff = (amplitude / h ** 3) * prof
    return make_field(grid, coeff, real_flag=True, hermitize=True)


def sector_indicator_datum(grid: GridSpec, lam: float, k=(0, 0),
                           amplitude: float = 1.0) -> SpectralField:
    """Indicator of one slope sector (both signs of xi, Hermitian)."""
    xi = grid.xi_axis()[:, None, None]
    e1 = grid.eta1_axis()[None, :, None]
    e2 = grid.eta2_axis()[None, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        s1 = np.where(xi != 0, e1 / np.where(xi == 0, 1.0, xi), np.inf)
        s2 = np.where(xi != 0, e2 / np.where(xi == 0, 1.0, xi), np.inf)
    shell = (np.abs(xi) >= lam) & (np.abs(xi) < 2 * lam)
    box = ((s1 - lam * k[0] >= -lam / 2) & (s1 - lam * k[0] < lam / 2)
           & (s2 - lam * k[1] >= -lam / 2) & (s2 - lam * k[1] < lam / 2))
    coeff = np.where(shell & box, amplitude + 0.0j, 0.0)
    if not coeff.any():
        raise ConfigurationError(f"sector (lam={lam}, k={k}) does not meet the grid")
    return make_field(grid, coeff, real_flag=True, hermitize=True)


def random_band_field(grid: GridSpec, rng: np.random.Generator,
                      xi_lo: float, xi_hi: float,
                      eta_max: float | None = None,
                      slope_box=None, norm: float = 1.0) -> SpectralField:
    """Random real field with coefficients supported in xi_lo < |xi| <= xi_hi.

    Optional eta_max limits |eta_i|; slope_box=(lo1,hi1,lo2,hi2) instead
    restricts eta/xi componentwise.  Coefficients are complex Gaussian,
    normalized to the requested L^2 norm.
    """
    xi = grid.xi_axis()[:, None, None]
    e1 = grid.eta1_axis()[None, :, None]
    e2 = grid.eta2_axis()[None, None, :]
    sup = ((np.abs(xi) > xi_lo) & (np.abs(xi) <= xi_hi)
           & np.ones(grid.shape, dtype=bool))
    if eta_max is not None:
        sup &= (np.abs(e1) <= eta_max) & (np.abs(e2) <= eta_max)
    if slope_box is not None:
        lo1, hi1, lo2, hi2 = slope_box
        with np.errstate(divide="ignore", invalid="ignore"):
            s1 = np.where(xi != 0, e1 / np.where(xi == 0, 1.0, xi), np.inf)
            s2 = np.where(xi != 0, e2 / np.where(xi == 0, 1.0, xi), np.inf)
        sup &= (s1 >= lo1) & (s1 <= hi1) & (s2 >= lo2) & (s2 <= hi2)
    sup &= xi != 0
    if not sup.any():
        raise ConfigurationError("random band support is empty on this grid")
    z = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    f = make_field(grid, np.where(sup, z, 0.0), real_flag=True, hermitize=True)
    cur = f.l2_norm()
    if cur == 0.0:
        raise ConfigurationError("random band field degenerated to zero")
    return SpectralField(grid, f.coeff * (norm / cur), real_flag=True)


def scattering_datum(grid: GridSpec, rng: np.random.Generator,
                     lqlp_target: float, norm_params=None) -> SpectralField:
    """Coherent broadband datum for asymptotic-state experiments.

    Envelope |xi| exp(-xi^2/2) vanishes linearly at low x-frequency (the
    datum is morally an x-derivative) and the slope profile is aligned, so
    pullback increments are dominated by interactions whose phase spread the
    grid resolves; amplitude jitter and the slope center are randomized.
    """
    from .decomposition import NormParams, lqlp_norm
    npar = norm_params or NormParams()
    xi = grid.xi_axis()[:, None, None]
    e1 = grid.eta1_axis()[None, :, None]
    e2 = grid.eta2_axis()[None, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        s1 = np.where(xi != 0, e1 / np.where(xi == 0, 1.0, xi), 0.0)
        s2 = np.where(xi != 0, e2 / np.where(xi == 0, 1.0, xi), 0.0)
    cs = rng.uniform(-0.2, 0.2, 2)
    jitter = 1.0 + 0.2 * rng.standard_normal(grid.shape)
    phase = np.exp(1j * rng.uniform(0, 2 * np.pi))
    env = (np.abs(xi) * np.exp(-xi ** 2 / 2.0)
           * np.exp(-((s1 - cs[0]) ** 2 + (s2 - cs[1]) ** 2) / (2 * 0.5 ** 2)))
    env = np.where(xi != 0, env, 0.0)
    f = make_field(grid, env * jitter * phase, real_flag=True, hermitize=True)
    n = lqlp_norm(f, npar)
    if n == 0.0:
        raise ConfigurationError("scattering datum degenerated to zero")
    return SpectralField(grid, f.coeff * (lqlp_target / n), real_flag=True)


def two_bump_lattice_datum(grid: GridSpec, mu: float, lam: float,
                           p: float) -> SpectralField:
    """Lattice rendition of the two-bump datum: characteristic-function bumps

        amp1 = mu^-3 (lam/mu)^{-2/p}   on  xi in [mu/2, mu],
        amp2 = mu^{-3/2} lam^{-3/2}    on  xi in [lam + mu/2, lam + mu],

    both with eta in [lam mu / 2, 2 lam mu]^2 (Hermitian mirror added).
    """
    xi = grid.xi_axis()[:, None, None]
    e1 = grid.eta1_axis()[None, :, None]
    e2 = grid.eta2_axis()[None, None, :]
    ebox = (e1 >= lam * mu / 2) & (e1 <= 2 * lam * mu) \
        & (e2 >= lam * mu / 2) & (e2 <= 2 * lam * mu)
    box1 = (xi >= mu / 2) & (xi <= mu) & ebox
    box2 = (xi >= lam + mu / 2) & (xi <= lam + mu) & ebox
    if not box1.any() or not box2.any():
        raise ConfigurationError(
            "two-bump boxes are off the representable frequency window")
    amp1 = mu ** -3 * (lam / mu) ** (-2.0 / p)
    amp2 = mu ** -1.5 * lam ** -1.5
    # continuum spectral densities -> series coefficients on this lattice
    cell = grid.dxi * grid.deta1 * grid.deta2 / grid.volume
    coeff = (np.where(box1, amp1 + 0.0j, 0.0)
             + np.where(box2, amp2 + 0.0j, 0.0)) * np.sqrt(cell)
    return make_field(grid, coeff, real_flag=True, hermitize=True)
