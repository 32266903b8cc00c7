"""Anisotropic periodic spectral core.

The physical domain is a periodic box [0, Lx) x [0, Ly1) x [0, Ly2).
Fields are represented by Fourier-series coefficients c(kx, ky1, ky2) so that

    u(x, y1, y2) = sum_k c(k) exp(i (xi x + eta1 y1 + eta2 y2)),

with xi = kx * 2pi/Lx and eta_i = ky_i * 2pi/Ly_i.  Coefficient arrays are
stored in FFT (natural) order; every public entry point addresses modes by
physical wavenumber, never by array index.

Two hard structural invariants hold for every field in the package:

* the xi = 0 plane is identically zero (so 1/xi symbols are well defined),
* Nyquist planes are identically zero (so Hermitian symmetry is exact).

The linear flow multiplies each coefficient by exp(i t w(xi, eta)) with the
dispersion symbol w(xi, eta) = xi^3 - |eta|^2/xi, and is exactly unitary.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, DomainError, PreconditionError

SNAPSHOT_MAGIC = b"KP3F"
SNAPSHOT_VERSION = 1

_DROPPED_MASS_WARN = 1e-10


@dataclass(frozen=True)
class GridSpec:
    """Anisotropic frequency grid for the periodic box."""

    modes_x: int
    modes_y1: int
    modes_y2: int
    length_x: float
    length_y1: float
    length_y2: float
    dealias: bool = True

    def __post_init__(self):
        for n, name in ((self.modes_x, "modes_x"), (self.modes_y1, "modes_y1"),
                        (self.modes_y2, "modes_y2")):
            if n < 8 or n % 2 != 0:
                raise ConfigurationError(f"{name}={n}: mode counts must be even and >= 8")
        for L, name in ((self.length_x, "length_x"), (self.length_y1, "length_y1"),
                        (self.length_y2, "length_y2")):
            if not (L > 0):
                raise ConfigurationError(f"{name}={L}: box lengths must be positive")

    @property
    def shape(self):
        return (self.modes_x, self.modes_y1, self.modes_y2)

    @property
    def dxi(self) -> float:
        return 2.0 * np.pi / self.length_x

    @property
    def deta1(self) -> float:
        return 2.0 * np.pi / self.length_y1

    @property
    def deta2(self) -> float:
        return 2.0 * np.pi / self.length_y2

    @property
    def volume(self) -> float:
        return self.length_x * self.length_y1 * self.length_y2

    def mode_numbers(self, axis: int) -> np.ndarray:
        """Integer mode numbers along one axis, FFT order."""
        n = self.shape[axis]
        return np.fft.fftfreq(n, 1.0 / n).astype(np.int64)

    def xi_axis(self) -> np.ndarray:
        return self.mode_numbers(0) * self.dxi

    def eta1_axis(self) -> np.ndarray:
        return self.mode_numbers(1) * self.deta1

    def eta2_axis(self) -> np.ndarray:
        return self.mode_numbers(2) * self.deta2

    def xi_max(self) -> float:
        # Nyquist planes are excluded from use.
        return (self.modes_x // 2 - 1) * self.dxi

    def dyadic_range(self):
        """All dyadic scales lam = 2^j with a nonempty shell lam <= |xi| < 2lam."""
        jlo = _dyadic_floor_exp(self.dxi)
        jhi = _dyadic_floor_exp(self.xi_max())
        if jhi < jlo:
            raise ConfigurationError("grid has an empty dyadic range")
        return [2.0 ** j for j in range(jlo, jhi + 1)]


def _dyadic_floor_exp(x: float) -> int:
    """Largest integer j with 2**j <= x, robust at exact powers of two."""
    if not (x > 0):
        raise DomainError(f"dyadic exponent of non-positive value {x}")
    j = int(np.floor(np.log2(x)))
    while 2.0 ** j > x:
        j -= 1
    while 2.0 ** (j + 1) <= x:
        j += 1
    return j


# Per-grid caches of heavy meshes.  GridSpec is frozen/hashable.
_MESH_CACHE: dict = {}


def _grid_meshes(grid: GridSpec):
    got = _MESH_CACHE.get(grid)
    if got is not None:
        return got
    xi = grid.xi_axis()[:, None, None]
    e1 = grid.eta1_axis()[None, :, None]
    e2 = grid.eta2_axis()[None, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        omega = xi ** 3 - (e1 ** 2 + e2 ** 2) / xi
    omega = np.where(xi == 0.0, 0.0, omega)

    nyq = np.ones(grid.shape, dtype=bool)
    nyq[grid.modes_x // 2, :, :] = False
    nyq[:, grid.modes_y1 // 2, :] = False
    nyq[:, :, grid.modes_y2 // 2] = False
    nyq[0, :, :] = False  # zero-x-mean plane
    got = {"xi": xi, "eta1": e1, "eta2": e2, "omega": omega, "keep": nyq}
    _MESH_CACHE[grid] = got
    return got


def omega_mesh(grid: GridSpec) -> np.ndarray:
    """Dispersion symbol on the full grid (0 on the excluded xi=0 plane)."""
    return _grid_meshes(grid)["omega"]


def structural_mask(grid: GridSpec) -> np.ndarray:
    """True on modes a field may occupy (xi != 0, no Nyquist planes)."""
    return _grid_meshes(grid)["keep"]


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients of a field on `grid`.  Treated as immutable."""

    grid: GridSpec
    coeff: np.ndarray
    real_flag: bool = True

    def __post_init__(self):
        if self.coeff.shape != self.grid.shape:
            raise ConfigurationError(
                f"coefficient shape {self.coeff.shape} != grid shape {self.grid.shape}")

    def validate(self, hermitian_tol: float = 1e-12) -> None:
        """Check the structural invariants; raises ConfigurationError."""
        c = self.coeff
        if np.any(c[0, :, :] != 0):
            raise ConfigurationError("zero-x-mean invariant violated")
        if np.any(c[~structural_mask(self.grid)] != 0):
            raise ConfigurationError("Nyquist-plane content present")
        if self.real_flag:
            mirror = np.conj(c[_reverse_index(self.grid)])
            scale = np.max(np.abs(c)) or 1.0
            if np.max(np.abs(c - mirror)) > hermitian_tol * scale:
                raise ConfigurationError("Hermitian symmetry violated for real field")

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.volume * np.sum(np.abs(self.coeff) ** 2)))

    def mode(self, xi: float, eta1: float, eta2: float) -> complex:
        """Coefficient at a physical wavenumber (must lie on the lattice)."""
        i = _snap(xi, self.grid.dxi, self.grid.modes_x, "xi")
        j = _snap(eta1, self.grid.deta1, self.grid.modes_y1, "eta1")
        k = _snap(eta2, self.grid.deta2, self.grid.modes_y2, "eta2")
        return complex(self.coeff[i, j, k])


@dataclass(frozen=True)
class PhysicalField:
    """Real samples on the uniform space grid."""

    grid: GridSpec
    samples: np.ndarray

    def __post_init__(self):
        if self.samples.shape != self.grid.shape:
            raise ConfigurationError(
                f"sample shape {self.samples.shape} != grid shape {self.grid.shape}")

    def l2_norm(self) -> float:
        n = self.samples.size
        return float(np.sqrt(self.grid.volume / n * np.sum(self.samples ** 2)))


def _snap(value: float, delta: float, n: int, name: str) -> int:
    k = value / delta
    ki = int(np.rint(k))
    if abs(k - ki) > 1e-9 * max(1.0, abs(k)):
        raise ConfigurationError(f"{name}={value} is not on the lattice (spacing {delta})")
    if not (-n // 2 < ki < n // 2):
        raise ConfigurationError(f"{name}={value} outside representable range")
    return ki % n


_REV_CACHE: dict = {}


def _reverse_index(grid: GridSpec):
    got = _REV_CACHE.get(grid)
    if got is None:
        ix = (-np.arange(grid.modes_x)) % grid.modes_x
        i1 = (-np.arange(grid.modes_y1)) % grid.modes_y1
        i2 = (-np.arange(grid.modes_y2)) % grid.modes_y2
        got = np.ix_(ix, i1, i2)
        _REV_CACHE[grid] = got
    return got


def make_field(grid: GridSpec, coeff: np.ndarray, real_flag: bool = True,
               hermitize: bool = False) -> SpectralField:
    """Construct a field, enforcing the structural invariants.

    With hermitize=True the conjugate-mirror average is taken first, which is
    the standard way to realize a real field from a one-sided bump formula.
    """
    c = np.array(coeff, dtype=np.complex128)
    if hermitize:
        c = 0.5 * (c + np.conj(c[_reverse_index(grid)]))
    c[~structural_mask(grid)] = 0.0
    return SpectralField(grid, c, real_flag)


def zero_field(grid: GridSpec) -> SpectralField:
    return SpectralField(grid, np.zeros(grid.shape, dtype=np.complex128))


# ----------------------------------------------------------------------
# Transforms
# ----------------------------------------------------------------------

def forward_transform(f: PhysicalField, mean_tol: float = 1e-10) -> SpectralField:
    """Physical samples -> coefficients; enforces the zero-x-mean invariant."""
    c = np.fft.fftn(f.samples) / f.samples.size
    amp = np.max(np.abs(c)) or 1.0
    if np.max(np.abs(c[0, :, :])) > mean_tol * amp:
        raise ConfigurationError("physical field has a nonzero x-mean")
    return make_field(f.grid, c, real_flag=True)


def inverse_transform(u: SpectralField, imag_tol: float = 1e-9) -> PhysicalField:
    """Coefficients -> physical samples; real part returned for real fields."""
    s = np.fft.ifftn(u.coeff) * u.coeff.size
    if u.real_flag:
        amp = np.max(np.abs(s)) or 1.0
        if np.max(np.abs(s.imag)) > imag_tol * amp:
            raise ConfigurationError("field marked real has non-real samples")
    return PhysicalField(u.grid, np.ascontiguousarray(s.real))


# ----------------------------------------------------------------------
# Dispersion symbol and the linear group
# ----------------------------------------------------------------------

def dispersion_symbol(xi: float, eta) -> float:
    """w(xi, eta) = xi^3 - |eta|^2 / xi.  Pole at xi = 0 is a domain error."""
    if xi == 0:
        raise DomainError("dispersion symbol evaluated at xi = 0")
    e1, e2 = eta
    return xi ** 3 - (e1 * e1 + e2 * e2) / xi


def apply_linear_propagator(u: SpectralField, t: float) -> SpectralField:
    """Exact linear flow: multiply each coefficient by exp(i t w(xi, eta))."""
    phase = np.exp(1j * t * omega_mesh(u.grid))
    return SpectralField(u.grid, u.coeff * phase, u.real_flag)


# ----------------------------------------------------------------------
# Symmetry transforms
# ----------------------------------------------------------------------

def galilean_lattice(grid: GridSpec):
    """Admissible Galilean slopes are integer multiples of these two values."""
    return (grid.deta1 / grid.dxi, grid.deta2 / grid.dxi)


def _galilean_integers(grid: GridSpec, c) -> tuple[int, int]:
    base = galilean_lattice(grid)
    ms = []
    for ci, bi in zip(c, base):
        m = ci / bi
        mi = int(np.rint(m))
        if abs(m - mi) > 1e-9 * max(1.0, abs(m)):
            u1, u2 = base
            raise PreconditionError(
                "Galilean slope must be grid-aligned: admissible c are integer "
                f"multiples of ({u1:.6g}, {u2:.6g})")
        ms.append(mi)
    return ms[0], ms[1]


def galilean_shift(u: SpectralField, c, return_dropped: bool = False):
    """Relocate coefficients per the Galilean action u-hat(xi, eta + c xi).

    Modes relocated off the representable grid are dropped; when the dropped
    L^2 mass exceeds 1e-10 of the total a warning is issued.
    """
    g = u.grid
    m1, m2 = _galilean_integers(g, c)
    n1, n2 = g.modes_y1, g.modes_y2
    k1 = g.mode_numbers(1)
    k2 = g.mode_numbers(2)
    out = np.zeros_like(u.coeff)
    for ix, kx in enumerate(g.mode_numbers(0)):
        if kx == 0 or abs(kx) == g.modes_x // 2:
            continue
        s1 = k1 + m1 * kx        # source eta1 mode feeding each target
        s2 = k2 + m2 * kx
        ok1 = np.abs(s1) < n1 // 2
        ok2 = np.abs(s2) < n2 // 2
        rows = np.where(ok1)[0]
        cols = np.where(ok2)[0]
        if rows.size == 0 or cols.size == 0:
            continue
        out[ix][np.ix_(rows, cols)] = u.coeff[ix][np.ix_(s1[rows] % n1, s2[cols] % n2)]
    total = g.volume * np.sum(np.abs(u.coeff) ** 2)
    kept = g.volume * np.sum(np.abs(out) ** 2)
    dropped = max(0.0, float(total - kept))
    if total > 0 and dropped > _DROPPED_MASS_WARN * total:
        warnings.warn(f"galilean_shift dropped off-grid mass {dropped:.3e} "
                      f"({dropped / total:.3e} of total)", stacklevel=2)
    shifted = SpectralField(g, out, u.real_flag)
    if return_dropped:
        return shifted, dropped
    return shifted


def galilean_boost(u: SpectralField, c, t: float) -> SpectralField:
    """Full time-t Galilean symmetry: shift plus the phase exp(it(|c|^2 xi + 2 c.eta)).

    At t = 0 this is galilean_shift.  If w solves the nonlinear equation with
    datum u0 then the boost of w(t) equals the evolution of the shifted datum.
    """
    shifted = galilean_shift(u, c)
    m = _grid_meshes(u.grid)
    c1, c2 = c
    phase = np.exp(1j * t * ((c1 * c1 + c2 * c2) * m["xi"]
                             + 2.0 * (c1 * m["eta1"] + c2 * m["eta2"])))
    return SpectralField(u.grid, shifted.coeff * phase, u.real_flag)


def scaling_transform(u: SpectralField, lam: float, same_grid: bool = False) -> SpectralField:
    """Realize u -> lam^2 u(lam x, lam^2 y, .) exactly.

    Default: return the field on the rescaled (nested) grid with box lengths
    (Lx/lam, Ly/lam^2); this is an exact relabeling for any dyadic lam.
    With same_grid=True the modes are moved within the original lattice,
    which requires (lam kx, lam^2 ky) to stay representable.
    """
    j = _check_dyadic(lam)
    g = u.grid
    if not same_grid:
        g2 = replace(g, length_x=g.length_x / lam,
                     length_y1=g.length_y1 / lam ** 2,
                     length_y2=g.length_y2 / lam ** 2)
        return SpectralField(g2, lam ** 2 * u.coeff, u.real_flag)

    rx = lam
    ry = lam ** 2
    out = np.zeros_like(u.coeff)
    idx = np.nonzero(u.coeff)
    kx = g.mode_numbers(0)[idx[0]].astype(float)
    k1 = g.mode_numbers(1)[idx[1]].astype(float)
    k2 = g.mode_numbers(2)[idx[2]].astype(float)
    tx, t1, t2 = kx * rx, k1 * ry, k2 * ry
    for t, name in ((tx, "x"), (t1, "y1"), (t2, "y2")):
        if np.any(np.abs(t - np.rint(t)) > 1e-9):
            raise ConfigurationError(
                f"scaling by {lam} moves occupied {name}-modes off the integer lattice")
    tx, t1, t2 = np.rint(tx).astype(int), np.rint(t1).astype(int), np.rint(t2).astype(int)
    if (np.any(np.abs(tx) >= g.modes_x // 2) or np.any(np.abs(t1) >= g.modes_y1 // 2)
            or np.any(np.abs(t2) >= g.modes_y2 // 2)):
        raise ConfigurationError(f"scaling by {lam} moves occupied modes out of range")
    out[tx % g.modes_x, t1 % g.modes_y1, t2 % g.modes_y2] = lam ** 2 * u.coeff[idx]
    return SpectralField(g, out, u.real_flag)


def _check_dyadic(lam: float) -> int:
    if not (lam > 0):
        raise ConfigurationError(f"scale factor {lam} must be positive")
    j = int(np.rint(np.log2(lam)))
    if abs(lam - 2.0 ** j) > 1e-12 * lam:
        raise ConfigurationError(f"scale factor {lam} must be a power of 2")
    return j


# ----------------------------------------------------------------------
# Inner products
# ----------------------------------------------------------------------

def inner(u: SpectralField, v: SpectralField) -> complex:
    """Space inner product <u, v> = integral u conj(v) over the box."""
    if u.grid != v.grid:
        raise ConfigurationError("inner product requires a shared grid")
    return complex(u.grid.volume * np.sum(u.coeff * np.conj(v.coeff)))


def trilinear_pairing(u: SpectralField, w: SpectralField) -> float:
    """Real pairing integral u * w dx dy for real fields (no conjugation)."""
    if u.grid != w.grid:
        raise ConfigurationError("pairing requires a shared grid")
    val = u.grid.volume * np.sum(u.coeff * w.coeff[_reverse_index(u.grid)])
    return float(np.real(val))


# ----------------------------------------------------------------------
# Snapshot file format
# ----------------------------------------------------------------------
# Header: magic "KP3F", version u32, modes_x/y1/y2 u32, three box lengths as
# IEEE-754 binary64, real_flag u8; then coefficients as interleaved (re, im)
# binary64 pairs, little-endian, k_x-major order.

_HEADER = struct.Struct("<4sIIII dddB")


def write_snapshot(u: SpectralField, path) -> None:
    g = u.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION,
                              g.modes_x, g.modes_y1, g.modes_y2,
                              g.length_x, g.length_y1, g.length_y2,
                              1 if u.real_flag else 0))
        inter = np.empty(u.coeff.shape + (2,), dtype="<f8")
        inter[..., 0] = u.coeff.real
        inter[..., 1] = u.coeff.imag
        fh.write(inter.tobytes(order="C"))


def read_snapshot(path) -> SpectralField:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        magic, version, nx, n1, n2, lx, l1, l2, rflag = _HEADER.unpack(header)
        if magic != SNAPSHOT_MAGIC:
            raise ConfigurationError(f"bad snapshot magic {magic!r}")
        if version != SNAPSHOT_VERSION:
            raise ConfigurationError(f"unsupported snapshot version {version}")
        grid = GridSpec(nx, n1, n2, lx, l1, l2)
        raw = np.frombuffer(fh.read(), dtype="<f8")
    expect = 2 * nx * n1 * n2
    if raw.size != expect:
        raise ConfigurationError(f"snapshot payload has {raw.size} doubles, expected {expect}")
    inter = raw.reshape(nx, n1, n2, 2)
    coeff = inter[..., 0] + 1j * inter[..., 1]
    return make_field(grid, coeff, real_flag=bool(rflag))
