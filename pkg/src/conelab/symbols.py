"""Pointwise multiplier symbols of the bilinear cone family and its pieces.

Frequencies are arrays whose last axis has length ``n``; the first ``n-1``
components form ``xi'`` and the last is ``xi_n``.  Throughout,

    a = |xi'|^2 / (R^2 xi_n^2),   b = |eta'|^2 / (R^2 eta_n^2),

and ``(x)^s_+`` is 0 on ``x <= 0`` and ``x**s`` on ``x > 0`` for every real
``s`` (so ``(x)^0_+`` is the indicator of the open set ``x > 0``).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .bumps import DEFAULT_BUMPS, BumpCatalog
from .errors import KindMismatch

U_H = np.sqrt(29.0 / 32.0)


class _Diagnostics:
    """Counts evaluations of a negative power exactly on its zero set."""

    def __init__(self):
        self.boundary_hits = 0

    def reset(self):
        self.boundary_hits = 0


diagnostics = _Diagnostics()


def pos_power(base, sigma: float):
    base = np.asarray(base, dtype=float)
    out = np.zeros_like(base)
    pos = base > 0
    if sigma == 0:
        out[pos] = 1.0
    else:
        out[pos] = base[pos] ** sigma
    if sigma < 0:
        diagnostics.boundary_hits += int(np.count_nonzero(base == 0))
    return out


def _split(xi):
    xi = np.asarray(xi, dtype=float)
    return np.sum(xi[..., :-1] ** 2, axis=-1), xi[..., -1]


def _ratio(xp2, xn, scale):
    """``|xi'|^2 / (scale^2 xi_n^2)``; +inf where ``xi_n = 0``."""
    xp2 = np.asarray(xp2, dtype=float)
    xn = np.asarray(xn, dtype=float)
    den = scale**2 * xn**2
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        r = np.where(den > 0, xp2 / np.where(den > 0, den, 1.0), np.inf)
    return r


def _out(v, ref):
    return float(v) if np.ndim(v) == 0 else v


# -- kernels on (|xi'|^2, xi_n) ------------------------------------------------
# These take precomputed squared norms so lattice sweeps avoid rebuilding
# (..., n) frequency arrays.


def k_bilinear_cone(xp2, xn, ep2, en, lam, R, bumps=DEFAULT_BUMPS):
    a = _ratio(xp2, xn, R)
    b = _ratio(ep2, en, R)
    return pos_power(1.0 - a - b, lam) * bumps.phi(xn) * bumps.phi(en)


def k_linear_cone(xp2, xn, nu, t, bumps=DEFAULT_BUMPS):
    if t <= 0:
        return np.zeros(np.broadcast(np.asarray(xp2), np.asarray(xn)).shape)
    w = _ratio(xp2, xn, t)
    return pos_power(1.0 - w, nu) * bumps.phi(xn)


def k_linear_cone_diff(xp2, xn, nu, t, bumps=DEFAULT_BUMPS):
    """Symbol of ``T^{nu+1}_t - T^nu_t``, i.e. ``-(1-w)^nu_+ w phi``."""
    return k_linear_cone(xp2, xn, nu + 1, t, bumps) - k_linear_cone(xp2, xn, nu, t, bumps)


def k_piece(xp2, xn, ep2, en, lam, R, j, bumps=DEFAULT_BUMPS):
    a = _ratio(xp2, xn, R)
    m = k_bilinear_cone(xp2, xn, ep2, en, lam, R, bumps)
    if j == 1:
        return bumps.psi1(np.minimum(a, 2.0)) * m
    return bumps.psi(2.0**j * (1.0 - np.minimum(a, 2.0))) * m


def k_sub_piece(xp2, xn, ep2, en, lam, R, j=None, i=None, bumps=DEFAULT_BUMPS):
    """Pieces of ``m^{lam,1}`` split along the eta variable.

    ``j >= 2`` selects the eta-side dyadic shell; ``i in {1, 2}`` selects the
    ``psi1^1`` / ``psi1^2`` centre pieces.
    """
    a = np.minimum(_ratio(xp2, xn, R), 2.0)
    b = np.minimum(_ratio(ep2, en, R), 2.0)
    common = bumps.psi1(a) * bumps.phi(xn) * bumps.phi(en)
    if j is not None:
        one_b = 1.0 - b
        with np.errstate(divide="ignore", invalid="ignore"):
            inner = np.where(one_b > 0, 1.0 - a / np.where(one_b > 0, one_b, 1.0), 0.0)
        return (
            common
            * bumps.psi(2.0**j * one_b)
            * pos_power(one_b, lam)
            * pos_power(inner, lam)
        )
    if i == 1:
        cut = bumps.psi1_1(b)
    elif i == 2:
        cut = bumps.psi1_2(b)
    else:
        raise ValueError("sub_piece needs j >= 2 or i in {1, 2}")
    return common * cut * pos_power(1.0 - a - b, lam)


def k_srt(xp2, xn, j, mu, R, t, bumps=DEFAULT_BUMPS):
    a = np.minimum(_ratio(xp2, xn, R), 2.0)
    out = bumps.phi(xn) * pos_power(1.0 - a - t * t, mu - 1.0)
    if j is not None:
        out = out * bumps.psi(2.0**j * (1.0 - a))
    return out


def k_brt(xp2, xn, j, mu, R, t, bumps=DEFAULT_BUMPS):
    """``j=None`` drops the dyadic cutoff (the full-cone B operator)."""
    a = np.minimum(_ratio(xp2, xn, R), 2.0)
    q = np.minimum(_ratio(xp2, xn, 1.0), 2.0 * R * R)
    out = bumps.phi(xn) * pos_power(R * R - q - t * t, mu - 1.0)
    if j is not None:
        out = out * bumps.psi(2.0**j * (1.0 - a))
    return out


def k_smooth_annulus(xp2, xn, delta, t, bumps=DEFAULT_BUMPS):
    if t <= 0:
        return np.zeros(np.broadcast(np.asarray(xp2), np.asarray(xn)).shape)
    w = np.minimum(_ratio(xp2, xn, t), 2.0)
    return bumps.phi(xn) * bumps.capital_psi((1.0 - w) / delta)


def k_tilde_gamma(xp2, xn, nu, gamma, t, bumps=DEFAULT_BUMPS):
    if t <= 0:
        return np.zeros(np.broadcast(np.asarray(xp2), np.asarray(xn)).shape)
    w = np.minimum(_ratio(xp2, xn, t), 2.0)
    return (
        bumps.capital_psi(2.0**gamma * (1.0 - w))
        * 2.0 ** (nu * gamma)
        * pos_power(1.0 - w, nu)
        * w
        * bumps.phi(xn)
    )


def k_h(ep2, en, mu, R, t, bumps=DEFAULT_BUMPS):
    if not 0 <= t <= U_H:
        raise ValueError(f"t must lie in [0, sqrt(29/32)], got {t}")
    b = np.minimum(_ratio(ep2, en, R), 2.0)
    return bumps.phi(en) * bumps.psi1_2(b) * pos_power(1.0 - t * t - b, mu - 1.0)


def k_bpsi1(xp2, xn, R, bumps=DEFAULT_BUMPS):
    a = np.minimum(_ratio(xp2, xn, R), 2.0)
    return bumps.phi(xn) * bumps.psi1(a)


# -- public pointwise API -----------------------------------------------------


def bilinear_cone(xi, eta, lam, R, bumps=DEFAULT_BUMPS):
    """``(1 - a - b)^lam_+ phi(xi_n) phi(eta_n)``."""
    xp2, xn = _split(xi)
    ep2, en = _split(eta)
    return _out(k_bilinear_cone(xp2, xn, ep2, en, lam, R, bumps), xi)


def linear_cone(xi, nu, t, bumps=DEFAULT_BUMPS):
    """``(1 - |xi'|^2/(t^2 xi_n^2))^nu_+ phi(xi_n)``."""
    xp2, xn = _split(xi)
    return _out(k_linear_cone(xp2, xn, nu, t, bumps), xi)


def linear_cone_diff(xi, nu, t, bumps=DEFAULT_BUMPS):
    xp2, xn = _split(xi)
    return _out(k_linear_cone_diff(xp2, xn, nu, t, bumps), xi)


def piece_j(xi, eta, lam, R, j, bumps=DEFAULT_BUMPS):
    """``psi(2^j(1-a)) m`` for ``j >= 2``; ``psi1(a) m`` for ``j = 1``."""
    if j < 1:
        raise ValueError("j must be >= 1")
    xp2, xn = _split(xi)
    ep2, en = _split(eta)
    return _out(k_piece(xp2, xn, ep2, en, lam, R, j, bumps), xi)


def sub_piece(xi, eta, lam, R, j=None, i=None, bumps=DEFAULT_BUMPS):
    xp2, xn = _split(xi)
    ep2, en = _split(eta)
    return _out(k_sub_piece(xp2, xn, ep2, en, lam, R, j, i, bumps), xi)


def srt_symbol(xi, j, mu, R, t, bumps=DEFAULT_BUMPS):
    xp2, xn = _split(xi)
    return _out(k_srt(xp2, xn, j, mu, R, t, bumps), xi)


def brt_symbol(xi, j, mu, R, t, bumps=DEFAULT_BUMPS):
    xp2, xn = _split(xi)
    return _out(k_brt(xp2, xn, j, mu, R, t, bumps), xi)


def smooth_annulus(xi, delta, t, bumps=DEFAULT_BUMPS):
    if not 0 < delta <= 1 / 8:
        raise ValueError(f"delta must lie in (0, 1/8], got {delta}")
    xp2, xn = _split(xi)
    return _out(k_smooth_annulus(xp2, xn, delta, t, bumps), xi)


def tilde_gamma(xi, nu, gamma, t, bumps=DEFAULT_BUMPS):
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    xp2, xn = _split(xi)
    return _out(k_tilde_gamma(xp2, xn, nu, gamma, t, bumps), xi)


def h_symbol(eta, mu, R, t, bumps=DEFAULT_BUMPS):
    ep2, en = _split(eta)
    return _out(k_h(ep2, en, mu, R, t, bumps), eta)


def bpsi1_symbol(xi, R, bumps=DEFAULT_BUMPS):
    xp2, xn = _split(xi)
    return _out(k_bpsi1(xp2, xn, R, bumps), xi)


# -- descriptors --------------------------------------------------------------


class SymbolKind(enum.Enum):
    BilinearCone = "bilinear_cone"
    LinearCone = "linear_cone"
    LinearConeDiff = "linear_cone_diff"
    PieceJ = "piece_j"
    PieceOne = "piece_one"
    SubPieceJ = "sub_piece_j"
    SubPieceOne1 = "sub_piece_one1"
    SubPieceOne2 = "sub_piece_one2"
    SRT = "srt"
    BRT = "brt"
    SmoothAnnulus = "smooth_annulus"
    TildeGamma = "tilde_gamma"
    Hmu = "h_mu"
    Bpsi1 = "b_psi1"


BILINEAR_KINDS = frozenset(
    {
        SymbolKind.BilinearCone,
        SymbolKind.PieceJ,
        SymbolKind.PieceOne,
        SymbolKind.SubPieceJ,
        SymbolKind.SubPieceOne1,
        SymbolKind.SubPieceOne2,
    }
)


@dataclass(frozen=True)
class SymbolDescriptor:
    """Parameterised description of one multiplier symbol.

    Linear kinds read ``t`` as their scale (``R`` for ``Bpsi1``); bilinear kinds
    read ``R``.  ``j=None`` on SRT/BRT means no dyadic cutoff.
    """

    kind: SymbolKind
    lam: float | None = None
    mu: float | None = None
    nu: float | None = None
    R: float | None = None
    t: float | None = None
    j: int | None = None
    gamma: int | None = None
    delta: float | None = None
    bumps: BumpCatalog = field(default=DEFAULT_BUMPS, compare=False)

    def __post_init__(self):
        k = self.kind
        if self.lam is not None and self.lam <= 0 and k in BILINEAR_KINDS:
            raise ValueError("lam must be positive")
        if self.R is not None and self.R <= 0:
            raise ValueError("R must be positive")
        if self.t is not None and self.t < 0:
            raise ValueError("t must be nonnegative")
        if k in (SymbolKind.PieceJ, SymbolKind.SubPieceJ) and (self.j is None or self.j < 2):
            raise ValueError(f"{k.value} needs j >= 2")
        if k == SymbolKind.SmoothAnnulus and not (self.delta is not None and 0 < self.delta <= 1 / 8):
            raise ValueError("smooth annulus needs 0 < delta <= 1/8")
        if k == SymbolKind.TildeGamma and (self.gamma is None or self.gamma < 1):
            raise ValueError("tilde_gamma needs gamma >= 1")

    @property
    def is_bilinear(self) -> bool:
        return self.kind in BILINEAR_KINDS

    def with_(self, **kw) -> "SymbolDescriptor":
        return replace(self, **kw)

    def linear_values(self, xp2, xn):
        if self.is_bilinear:
            raise KindMismatch(f"{self.kind.value} is bilinear")
        K, b = SymbolKind, self.bumps
        k = self.kind
        if k == K.LinearCone:
            return k_linear_cone(xp2, xn, self.nu, self.t, b)
        if k == K.LinearConeDiff:
            return k_linear_cone_diff(xp2, xn, self.nu, self.t, b)
        if k == K.SRT:
            return k_srt(xp2, xn, self.j, self.mu, self.R, self.t, b)
        if k == K.BRT:
            return k_brt(xp2, xn, self.j, self.mu, self.R, self.t, b)
        if k == K.SmoothAnnulus:
            return k_smooth_annulus(xp2, xn, self.delta, self.t, b)
        if k == K.TildeGamma:
            return k_tilde_gamma(xp2, xn, self.nu, self.gamma, self.t, b)
        if k == K.Hmu:
            return k_h(xp2, xn, self.mu, self.R, self.t, b)
        if k == K.Bpsi1:
            return k_bpsi1(xp2, xn, self.R, b)
        raise KindMismatch(f"unhandled linear kind {k}")

    def bilinear_values(self, xp2, xn, ep2, en):
        if not self.is_bilinear:
            raise KindMismatch(f"{self.kind.value} is linear")
        K, b = SymbolKind, self.bumps
        k = self.kind
        args = (xp2, xn, ep2, en, self.lam, self.R)
        if k == K.BilinearCone:
            return k_bilinear_cone(*args, b)
        if k == K.PieceJ:
            return k_piece(*args, self.j, b)
        if k == K.PieceOne:
            return k_piece(*args, 1, b)
        if k == K.SubPieceJ:
            return k_sub_piece(*args, j=self.j, bumps=b)
        if k == K.SubPieceOne1:
            return k_sub_piece(*args, i=1, bumps=b)
        return k_sub_piece(*args, i=2, bumps=b)
