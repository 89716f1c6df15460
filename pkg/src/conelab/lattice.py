"""Periodic lattice model of R^n with an integral-approximating DFT.

Points sit at ``x_k = -L/2 + k L/N`` on each axis (or shifted by half a cell
when ``offset=True``); frequencies are ``xi_m = m/L`` with
``m in {-N/2, ..., N/2-1}``.  The last axis is the distinguished ``x_n``
direction, the first ``n-1`` axes make up ``x'``.

Spectra are stored in numpy FFT order (index ``i`` holds ``m = i`` for
``i < N/2`` and ``m = i - N`` otherwise); the binary container writes them in
centred order.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import EmptyBand

__all__ = [
    "GridSpec",
    "Band",
    "SpatialField",
    "Spectrum",
    "forward_transform",
    "inverse_transform",
    "synthesize",
    "fold",
    "from_folded",
    "band_limited_test_function",
    "pure_mode",
    "zeros",
    "band_modes",
    "frequency_grid",
    "to_bytes",
    "from_bytes",
    "save",
    "load",
]


@dataclass(frozen=True)
class GridSpec:
    n: int = 3
    L: float = 8.0
    N: int = 32
    offset: bool = False
    band_limit: float | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"dimension n must be an integer >= 3, got {self.n}")
        if int(self.N) != self.N or self.N <= 0 or self.N % 2:
            raise ValueError(f"samples per axis N must be even and positive, got {self.N}")
        if not self.L > 0:
            raise ValueError(f"period L must be positive, got {self.L}")
        if self.band_limit is not None and self.band_limit >= self.nyquist:
            raise ValueError(
                f"band limit {self.band_limit} not covered by Nyquist frequency {self.nyquist}"
            )

    @property
    def nyquist(self) -> float:
        return self.N / (2.0 * self.L)

    @property
    def cell(self) -> float:
        return self.L / self.N

    @property
    def cell_volume(self) -> float:
        return self.cell**self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def origin(self) -> float:
        return -self.L / 2 + (0.5 * self.cell if self.offset else 0.0)

    def coords(self) -> np.ndarray:
        """One-dimensional sample coordinates shared by every axis."""
        return self.origin + self.cell * np.arange(self.N)

    def modes(self) -> np.ndarray:
        """Integer frequency indices along one axis, FFT order."""
        return np.fft.fftfreq(self.N, d=1.0 / self.N).astype(np.int64)

    def with_offset(self, offset: bool = True) -> "GridSpec":
        return GridSpec(self.n, self.L, self.N, offset, self.band_limit)


@dataclass(frozen=True)
class Band:
    """Frequency band ``lo < xi_n < hi`` and ``r_min <= |xi'| <= r_max``."""

    xi_n: tuple[float, float] = (0.5, 2.0)
    r_max: float = 1.0
    r_min: float = 0.0

    def __post_init__(self):
        lo, hi = self.xi_n
        if not lo < hi:
            raise ValueError(f"band needs xi_n[0] < xi_n[1], got {self.xi_n}")
        if not 0 <= self.r_min <= self.r_max:
            raise ValueError(f"band needs 0 <= r_min <= r_max, got {self.r_min}, {self.r_max}")

    def contains(self, xi_prime_norm, xi_n):
        lo, hi = self.xi_n
        return (
            (xi_n > lo) & (xi_n < hi) & (xi_prime_norm <= self.r_max) & (xi_prime_norm >= self.r_min)
        )


@lru_cache(maxsize=32)
def _grids(spec: GridSpec):
    m = spec.modes()
    ints = np.meshgrid(*([m] * spec.n), indexing="ij")
    xi_n = ints[-1] / spec.L
    xp2 = sum(k.astype(float) ** 2 for k in ints[:-1]) / spec.L**2
    for a in (xi_n, xp2):
        a.flags.writeable = False
    return xp2, xi_n


def frequency_grid(spec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(|xi'|^2, xi_n)`` over the whole lattice in FFT order (read-only)."""
    return _grids(spec)


@lru_cache(maxsize=32)
def _phase(spec: GridSpec) -> np.ndarray:
    # e^{2 pi i m x0 / L} per axis; the full phase is the outer product
    return np.exp(2j * np.pi * spec.modes() * spec.origin / spec.L)


def _outer_phase(spec: GridSpec, conj: bool = False) -> np.ndarray:
    p = _phase(spec)
    if conj:
        p = p.conj()
    out = p
    for _ in range(spec.n - 1):
        out = np.multiply.outer(out, p)
    return out


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Spectrum:
    spec: GridSpec
    coefficients: np.ndarray

    def __post_init__(self):
        c = _frozen(self.coefficients)
        if c.shape != self.spec.shape:
            raise ValueError(f"expected shape {self.spec.shape}, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("spectrum has non-finite coefficients")
        object.__setattr__(self, "coefficients", c)

    def support(self, rtol: float = 1e-13) -> tuple[np.ndarray, np.ndarray]:
        """Integer modes ``(K, n)`` and coefficients ``(K,)`` of the nonzero entries.

        Entries below ``rtol * max|F|`` are treated as FFT round-off.
        """
        c = self.coefficients
        scale = np.abs(c).max() if c.size else 0.0
        if scale == 0.0:
            return np.zeros((0, self.spec.n), dtype=np.int64), np.zeros(0, dtype=complex)
        idx = np.nonzero(np.abs(c) > rtol * scale)
        m = self.spec.modes()
        modes = np.stack([m[i] for i in idx], axis=-1)
        return modes, c[idx]

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coefficients) ** 2) / self.spec.L**self.spec.n))

    def __add__(self, other: "Spectrum") -> "Spectrum":
        return Spectrum(self.spec, self.coefficients + other.coefficients)

    def __mul__(self, c) -> "Spectrum":
        if isinstance(c, Spectrum):
            return Spectrum(self.spec, self.coefficients * c.coefficients)
        return Spectrum(self.spec, self.coefficients * c)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class SpatialField:
    spec: GridSpec
    values: np.ndarray
    # exact spectrum when the field was synthesised from one; skips FFT round-off
    _spectrum: Spectrum | None = field(default=None, repr=False)

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != self.spec.shape:
            raise ValueError(f"expected shape {self.spec.shape}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite samples")
        object.__setattr__(self, "values", v)

    def norm(self, p: float = 2.0) -> float:
        return float((self.spec.cell_volume * np.sum(np.abs(self.values) ** p)) ** (1.0 / p))

    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def __add__(self, other: "SpatialField") -> "SpatialField":
        spec = None
        if self._spectrum is not None and other._spectrum is not None:
            spec = self._spectrum + other._spectrum
        return SpatialField(self.spec, self.values + other.values, spec)

    def __sub__(self, other: "SpatialField") -> "SpatialField":
        return self + (-1.0) * other

    def __mul__(self, c) -> "SpatialField":
        if isinstance(c, SpatialField):
            return SpatialField(self.spec, self.values * c.values)
        spec = None if self._spectrum is None else self._spectrum * c
        return SpatialField(self.spec, self.values * c, spec)

    __rmul__ = __mul__


def zeros(spec: GridSpec) -> SpatialField:
    z = np.zeros(spec.shape, dtype=complex)
    return SpatialField(spec, z, Spectrum(spec, z))


def forward_transform(f: SpatialField) -> Spectrum:
    """``F(xi_m) = (L/N)^n sum_k f(x_k) exp(-2 pi i xi_m . x_k)``."""
    if f._spectrum is not None:
        return f._spectrum
    spec = f.spec
    F = np.fft.fftn(f.values) * _outer_phase(spec, conj=True) * spec.cell_volume
    return Spectrum(spec, F)


def inverse_transform(F: Spectrum) -> SpatialField:
    """``f(x_k) = L^{-n} sum_m F(xi_m) exp(2 pi i xi_m . x_k)``."""
    spec = F.spec
    vals = np.fft.ifftn(F.coefficients * _outer_phase(spec)) / spec.cell_volume
    return SpatialField(spec, vals, F)


def fold(spec: GridSpec, modes: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Fold arbitrary integer modes onto the ``N^n`` DFT grid.

    Returns the array ``D`` with ``L^{-n} N^n ifftn(D)`` equal to
    ``L^{-n} sum_j c_j exp(2 pi i (m_j/L) . x_k)`` at every lattice point.
    Modes outside the Nyquist box pick up the phase the shifted origin needs.
    """
    modes = np.asarray(modes, dtype=np.int64).reshape(-1, spec.n)
    coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
    size = spec.N**spec.n
    phase = np.exp(2j * np.pi * spec.origin / spec.L * modes.sum(axis=1))
    flat = np.ravel_multi_index(tuple(np.mod(modes, spec.N).T), spec.shape)
    c = coeffs * phase
    D = np.bincount(flat, weights=c.real, minlength=size) + 1j * np.bincount(
        flat, weights=c.imag, minlength=size
    )
    return D.reshape(spec.shape)


def from_folded(spec: GridSpec, D: np.ndarray, spectrum: "Spectrum | None" = None) -> SpatialField:
    vals = np.fft.ifftn(D) * (spec.N**spec.n) / spec.L**spec.n
    return SpatialField(spec, vals, spectrum)


def synthesize(spec: GridSpec, modes: np.ndarray, coeffs: np.ndarray) -> SpatialField:
    """Evaluate ``L^{-n} sum_j c_j exp(2 pi i (m_j/L) . x)`` exactly at the lattice points.

    ``modes`` are integer vectors that may lie outside the Nyquist box (e.g.
    sums ``m_xi + m_eta`` from a bilinear product).  When they all lie inside,
    the exact spectrum is attached to the result.
    """
    modes = np.asarray(modes, dtype=np.int64).reshape(-1, spec.n)
    coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
    N = spec.N
    cached = None
    if np.all((modes >= -N // 2) & (modes < N // 2)):
        size = N**spec.n
        flat = np.ravel_multi_index(tuple(np.mod(modes, N).T), spec.shape)
        Fc = np.bincount(flat, weights=coeffs.real, minlength=size) + 1j * np.bincount(
            flat, weights=coeffs.imag, minlength=size
        )
        cached = Spectrum(spec, Fc.reshape(spec.shape))
    return from_folded(spec, fold(spec, modes, coeffs), cached)


def pure_mode(spec: GridSpec, m, amplitude: complex = 1.0) -> SpatialField:
    """``amplitude * exp(2 pi i (m/L) . x)`` as a field with exact spectrum."""
    m = np.asarray(m, dtype=np.int64).reshape(1, spec.n)
    return synthesize(spec, m, np.array([amplitude * spec.L**spec.n]))


def band_modes(spec: GridSpec, band: Band) -> np.ndarray:
    """Integer modes ``(K, n)`` of the lattice frequencies inside ``band``."""
    lo, hi = band.xi_n
    ny = spec.nyquist
    if max(abs(lo), abs(hi)) > ny or band.r_max > ny * np.sqrt(spec.n - 1):
        raise ValueError(f"band {band} does not fit inside the Nyquist box (Nyquist {ny})")
    xp2, xi_n = frequency_grid(spec)
    mask = band.contains(np.sqrt(xp2), xi_n)
    # the -N/2 mode is its own alias and never belongs to a band
    for ax in range(spec.n):
        sl = [slice(None)] * spec.n
        sl[ax] = spec.N // 2
        mask[tuple(sl)] = False
    idx = np.nonzero(mask)
    m = spec.modes()
    return np.stack([m[i] for i in idx], axis=-1)


def band_limited_test_function(spec: GridSpec, band: Band, seed: int) -> SpatialField:
    """Random trigonometric polynomial with spectrum on the band, unit L^2 norm."""
    modes = band_modes(spec, band)
    if len(modes) == 0:
        raise EmptyBand(f"no lattice frequency of {spec} lies in {band}")
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(len(modes)) + 1j * rng.standard_normal(len(modes))
    # Parseval: ||f||^2 = L^{-n} sum |F|^2
    c *= np.sqrt(spec.L**spec.n / np.sum(np.abs(c) ** 2))
    return synthesize(spec, modes, c)


# -- binary container -------------------------------------------------------

_MAGIC = b"CNLB"
_HEADER = struct.Struct("<4sBBBBIId")


def to_bytes(obj: SpatialField | Spectrum) -> bytes:
    """Header ``(magic, version, kind, offset, 0, n, N, L)`` then little-endian
    interleaved real/imag float64, row-major with the last axis fastest.
    Spectra are written in centred order (``m = -N/2`` first)."""
    spec = obj.spec
    if isinstance(obj, SpatialField):
        data, kind = obj.values, 0
    else:
        data, kind = np.fft.fftshift(obj.coefficients), 1
    head = _HEADER.pack(_MAGIC, 1, kind, int(spec.offset), 0, spec.n, spec.N, float(spec.L))
    return head + np.ascontiguousarray(data, dtype="<c16").tobytes()


def from_bytes(buf: bytes) -> SpatialField | Spectrum:
    magic, version, kind, offset, _, n, N, L = _HEADER.unpack_from(buf)
    if magic != _MAGIC or version != 1:
        raise ValueError("not a conelab lattice container")
    spec = GridSpec(n=n, L=L, N=N, offset=bool(offset))
    data = np.frombuffer(buf, dtype="<c16", offset=_HEADER.size).reshape(spec.shape)
    if kind == 0:
        return SpatialField(spec, data)
    return Spectrum(spec, np.fft.ifftshift(data))


def save(obj: SpatialField | Spectrum, path) -> None:
    Path(path).write_bytes(to_bytes(obj))


def load(path) -> SpatialField | Spectrum:
    return from_bytes(Path(path).read_bytes())
