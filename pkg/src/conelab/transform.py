"""Linear and bilinear multiplier operators on the lattice.

Two independent routes evaluate the bilinear cone operator:

* ``apply_bilinear_direct`` sums ``m(xi, eta) F(xi) G(eta)`` over the sparse
  supports of both spectra and folds the sum frequencies back onto the grid;
* ``apply_bilinear_subordinated`` writes the symbol as a t-integral of a
  product of two linear symbols and applies one FFT pair per quadrature node.
"""
from __future__ import annotations

import warnings

import numpy as np
from scipy.special import gammaln

from . import lattice as lat
from . import symbols as sym
from .bumps import DEFAULT_BUMPS
from .errors import BudgetExceeded, KindMismatch, QuadratureUnderresolved
from .lattice import SpatialField, Spectrum, forward_transform, inverse_transform
from .quadrature import QuadratureRule, composite_rule, gauss_jacobi
from .symbols import SymbolDescriptor, SymbolKind

DEFAULT_BUDGET = 8**6
_CHUNK_BYTES = 64 * 2**20


def c_lambda(mu: float, nu: float) -> float:
    """``2 Gamma(mu+nu+1) / (Gamma(nu+1) Gamma(mu))``."""
    return float(2.0 * np.exp(gammaln(mu + nu + 1.0) - gammaln(nu + 1.0) - gammaln(mu)))


def _check_split(lam, mu, nu):
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    if nu <= -1:
        raise ValueError(f"nu must exceed -1, got {nu}")
    if abs(mu + nu - lam) > 1e-12 * max(1.0, abs(lam)):
        raise ValueError(f"mu + nu must equal lam ({mu} + {nu} != {lam})")


# -- linear ------------------------------------------------------------------


def apply_linear(f: SpatialField, s: SymbolDescriptor) -> SpatialField:
    """``inverse_transform(symbol * forward_transform(f))``."""
    if s.is_bilinear:
        raise KindMismatch(f"apply_linear got bilinear kind {s.kind.value}")
    F = forward_transform(f)
    xp2, xn = lat.frequency_grid(f.spec)
    return inverse_transform(Spectrum(f.spec, s.linear_values(xp2, xn) * F.coefficients))


class SparseSpectrum:
    """Nonzero part of a spectrum with its ``(|xi'|^2, xi_n)`` values."""

    def __init__(self, f: SpatialField):
        self.spec = f.spec
        self.modes, self.coeffs = forward_transform(f).support()
        k = self.modes / f.spec.L
        self.xp2 = np.sum(k[:, :-1] ** 2, axis=1)
        self.xn = k[:, -1]
        self.flat = np.ravel_multi_index(tuple(np.mod(self.modes, f.spec.N).T), f.spec.shape)

    def __len__(self):
        return len(self.coeffs)

    @property
    def rho(self) -> np.ndarray:
        """``|xi'| / |xi_n|`` (inf where ``xi_n = 0``)."""
        with np.errstate(divide="ignore"):
            return np.sqrt(self.xp2) / np.abs(self.xn)

    def node_fields(self, rows: np.ndarray) -> np.ndarray:
        """Fields for each row of symbol values on the support: shape ``(K, N^n)``.

        Row ``k`` is ``inverse_transform(rows[k] * F)`` flattened.
        """
        spec = self.spec
        rows = np.atleast_2d(rows)
        size = spec.N**spec.n
        phase = lat._outer_phase(spec)
        out = np.empty((rows.shape[0], size), dtype=complex)
        step = max(1, _CHUNK_BYTES // (16 * size))
        for lo in range(0, rows.shape[0], step):
            hi = min(lo + step, rows.shape[0])
            full = np.zeros((hi - lo, size), dtype=complex)
            full[:, self.flat] = rows[lo:hi] * self.coeffs
            full = full.reshape((hi - lo,) + spec.shape) * phase
            vals = np.fft.ifftn(full, axes=tuple(range(1, spec.n + 1))) / spec.cell_volume
            out[lo:hi] = vals.reshape(hi - lo, size)
        return out


def linear_stack(sp: SparseSpectrum, desc: SymbolDescriptor, nodes) -> np.ndarray:
    """Symbol rows of a t-family over the support, one row per node."""
    return np.stack([desc.with_(t=float(t)).linear_values(sp.xp2, sp.xn) for t in nodes])


# -- bilinear: direct oracle --------------------------------------------------


def apply_bilinear_direct(
    f: SpatialField,
    g: SpatialField,
    lam: float,
    R: float,
    symbol: SymbolDescriptor | None = None,
    budget: int = DEFAULT_BUDGET,
    bumps=DEFAULT_BUMPS,
) -> SpatialField:
    """``L^{-2n} sum_{xi, eta} m(xi, eta) F(xi) G(eta) e^{2 pi i x.(xi+eta)}`` by double sum.

    ``symbol`` overrides the bilinear cone with any other bilinear kind (its
    ``lam``/``R`` are taken from the arguments).
    """
    if symbol is None:
        symbol = SymbolDescriptor(SymbolKind.BilinearCone, lam=lam, R=R, bumps=bumps)
    elif not symbol.is_bilinear:
        raise KindMismatch(f"direct bilinear oracle got linear kind {symbol.kind.value}")
    else:
        symbol = symbol.with_(lam=lam, R=R)
    spec = f.spec
    sf, sg = SparseSpectrum(f), SparseSpectrum(g)
    pairs = len(sf) * len(sg)
    if pairs > budget:
        raise BudgetExceeded(f"{pairs} coefficient pairs exceed budget {budget}")
    D = np.zeros(spec.shape, dtype=complex)
    if pairs:
        rows = max(1, (1 << 20) // max(len(sg), 1))
        for lo in range(0, len(sf), rows):
            hi = min(lo + rows, len(sf))
            m = symbol.bilinear_values(
                sf.xp2[lo:hi, None], sf.xn[lo:hi, None], sg.xp2[None, :], sg.xn[None, :]
            )
            c = m * sf.coeffs[lo:hi, None] * sg.coeffs[None, :] / spec.L**spec.n
            modes = sf.modes[lo:hi, None, :] + sg.modes[None, :, :]
            D += lat.fold(spec, modes.reshape(-1, spec.n), c.reshape(-1))
    return lat.from_folded(spec, D)


# -- bilinear: subordination ---------------------------------------------------


def _exponents_smooth(mu, nu) -> bool:
    return float(mu - 1).is_integer() and mu >= 1 and float(nu).is_integer() and nu >= 0


def _b_breakpoints(sf: SparseSpectrum, R: float) -> np.ndarray:
    # B^{R,t} switches off at t = sqrt(R^2 - |xi'|^2/xi_n^2)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(sf.xn != 0, sf.xp2 / np.where(sf.xn != 0, sf.xn**2, 1.0), np.inf)
    base = R * R - q
    return np.sqrt(base[base > 0])


def operator_rule(t_max, breakpoints, mu, nu, panels=256, tolerance=1e-6) -> QuadratureRule:
    """Default t-rule for subordination integrals on ``[0, t_max]``.

    Gauss-Legendre of order 4 when both exponents ``mu-1`` and ``nu`` are
    nonnegative integers (the integrand is then polynomial between
    breakpoints), tanh-sinh otherwise to absorb the endpoint singularities.
    """
    if _exponents_smooth(mu, nu):
        return composite_rule(0.0, t_max, breakpoints, panels, 4, "gauss", tolerance=tolerance)
    return composite_rule(0.0, t_max, breakpoints, panels, 31, "tanh_sinh", tolerance=tolerance)


def subordination_rule(f, g, lam, R, mu=1.0, j=None, panels=256) -> QuadratureRule:
    nu = lam - mu
    sf, sg = SparseSpectrum(f), SparseSpectrum(g)
    t_max = R * (np.sqrt(2.0 ** (1 - j)) if j is not None else 1.0)
    bp = np.concatenate([_b_breakpoints(sf, R), sg.rho[np.isfinite(sg.rho)]])
    return operator_rule(t_max, bp, mu, nu, panels)


def _subordinated_terms(f, g, lam, R, mu, rule, j, bumps):
    nu = lam - mu
    sf, sg = SparseSpectrum(f), SparseSpectrum(g)
    t = rule.nodes
    Brows = np.stack([sym.k_brt(sf.xp2, sf.xn, j, mu, R, tk, bumps) for tk in t])
    Trows = np.stack([sym.k_linear_cone(sg.xp2, sg.xn, nu, tk, bumps) for tk in t])
    return sf, sg, Brows, Trows


def apply_bilinear_subordinated(
    f: SpatialField,
    g: SpatialField,
    lam: float,
    R: float,
    mu: float = 1.0,
    rule: QuadratureRule | None = None,
    j: int | None = None,
    check: bool = False,
    bumps=DEFAULT_BUMPS,
) -> SpatialField:
    """``c R^{-2 lam} int_0^{T} B^{R,t}_mu f(x) T^nu_t g(x) t^{2nu+1} dt`` with ``nu = lam - mu``.

    ``j=None`` gives the full bilinear cone (``T = R``); an integer ``j >= 2``
    restricts to the ``j``-th dyadic piece (``T = R sqrt(2^{1-j})``).  With
    ``check=True`` the result is recomputed on a refined rule and a
    ``QuadratureUnderresolved`` warning is issued if they differ by more than
    the rule's tolerance.
    """
    nu = lam - mu
    _check_split(lam, mu, nu)
    if rule is None:
        rule = subordination_rule(f, g, lam, R, mu, j)
    out = _subordinated(f, g, lam, R, mu, rule, j, bumps)
    if check and rule.build:
        fine = _subordinated(f, g, lam, R, mu, rule.refined(), j, bumps)
        scale = max(np.linalg.norm(fine.values), 1e-300)
        diff = np.linalg.norm(fine.values - out.values) / scale
        if diff > rule.tolerance:
            warnings.warn(
                f"subordination rule under-resolved: refinement changed result by {diff:.3e}",
                QuadratureUnderresolved,
                stacklevel=2,
            )
    return out


def _subordinated(f, g, lam, R, mu, rule, j, bumps) -> SpatialField:
    nu = lam - mu
    sf, sg, Brows, Trows = _subordinated_terms(f, g, lam, R, mu, rule, j, bumps)
    spec = f.spec
    if len(sf) == 0 or len(sg) == 0:
        return lat.zeros(spec)
    coef = c_lambda(mu, nu) * R ** (-2.0 * lam) * rule.weights * rule.nodes ** (2 * nu + 1)
    acc = np.zeros(spec.N**spec.n, dtype=complex)
    step = max(1, _CHUNK_BYTES // (32 * spec.N**spec.n))
    for lo in range(0, len(rule), step):
        hi = min(lo + step, len(rule))
        U = sf.node_fields(Brows[lo:hi])
        V = sg.node_fields(Trows[lo:hi])
        acc += np.einsum("k,kx,kx->x", coef[lo:hi], U, V)
    return SpatialField(spec, acc.reshape(spec.shape))


# -- scalar identity -------------------------------------------------------------


def steinweiss_scalar(mm: float, R: float, lam: float, mu: float, nu: float | None = None, order: int = 64):
    """Both sides of the subordination identity for ``|m|^2 = mm``.

    The right side is the t-integral ``c R^{-2 lam} int_{|m|}^R (R^2-t^2)^{mu-1}
    t^{2 nu+1} (1-mm/t^2)^nu dt`` evaluated after ``s = t^2`` with Gauss-Jacobi
    nodes whose weight absorbs both endpoint singularities.
    Returns ``(lhs, rhs, |lhs - rhs|)``.
    """
    if nu is None:
        nu = lam - mu
    _check_split(lam, mu, nu)
    if not 0 <= mm < R * R:
        raise ValueError("need 0 <= mm < R^2")
    lhs = (1.0 - mm / (R * R)) ** lam
    x, w = gauss_jacobi(order, mu - 1.0, nu)
    half = 0.5 * (R * R - mm)
    # after s = t^2: t^{2nu+1} (1 - mm/t^2)^nu dt = (s - mm)^nu ds / 2, and both
    # endpoint distances are formed directly from x to avoid cancellation
    gap_R = half * (1.0 - x)  # R^2 - s
    gap_m = half * (1.0 + x)  # s - mm
    integrand = gap_R ** (mu - 1.0) * gap_m**nu * 0.5 * half
    weight = (1.0 - x) ** (mu - 1.0) * (1.0 + x) ** nu
    rhs = c_lambda(mu, nu) * R ** (-2.0 * lam) * float(np.sum(w * (integrand / weight)))
    return lhs, rhs, abs(lhs - rhs)


# -- Cauchy-Schwarz majorant --------------------------------------------------------


def cauchy_schwarz_majorant(
    f: SpatialField,
    g: SpatialField,
    lam: float,
    R: float,
    j: int,
    mu: float = 1.0,
    rule: QuadratureRule | None = None,
    bumps=DEFAULT_BUMPS,
):
    """Pointwise ``(lhs, rhs)`` for the j-th piece, both real arrays.

    ``lhs = |T^lam_{R,j}(f, g)|`` through subordination; ``rhs`` is
    ``c 2^{(1-j)/4} (int_0^A |S^{R,s} f s^{2nu+1}|^2 ds)^{1/2}
    ((RA)^{-1} int_0^{RA} |T^nu_t g|^2 dt)^{1/2}`` with ``A = sqrt(2^{1-j})``,
    the S-factor evaluated on the rescaled nodes ``s = t/R``.
    """
    if j < 2:
        raise ValueError("j must be >= 2")
    nu = lam - mu
    _check_split(lam, mu, nu)
    if rule is None:
        rule = subordination_rule(f, g, lam, R, mu, j)
    spec = f.spec
    sf, sg, Brows, Trows = _subordinated_terms(f, g, lam, R, mu, rule, j, bumps)
    if len(sf) == 0 or len(sg) == 0:
        z = np.zeros(spec.shape)
        return z, z.copy()
    A = np.sqrt(2.0 ** (1 - j))
    s_rule = rule.scaled(R)
    Srows = np.stack([sym.k_srt(sf.xp2, sf.xn, j, mu, R, sk, bumps) for sk in s_rule.nodes])
    c = c_lambda(mu, nu)
    coef = c * R ** (-2.0 * lam) * rule.weights * rule.nodes ** (2 * nu + 1)
    size = spec.N**spec.n
    acc = np.zeros(size, dtype=complex)
    s_sq = np.zeros(size)
    t_sq = np.zeros(size)
    step = max(1, _CHUNK_BYTES // (48 * size))
    for lo in range(0, len(rule), step):
        hi = min(lo + step, len(rule))
        U = sf.node_fields(Brows[lo:hi])
        V = sg.node_fields(Trows[lo:hi])
        S = sf.node_fields(Srows[lo:hi])
        acc += np.einsum("k,kx,kx->x", coef[lo:hi], U, V)
        sk = s_rule.nodes[lo:hi, None] ** (2 * nu + 1)
        s_sq += s_rule.weights[lo:hi] @ np.abs(S * sk) ** 2
        t_sq += rule.weights[lo:hi] @ np.abs(V) ** 2
    lhs = np.abs(acc)
    rhs = c * 2.0 ** ((1 - j) / 4.0) * np.sqrt(s_sq) * np.sqrt(t_sq / (R * A))
    return lhs.reshape(spec.shape), rhs.reshape(spec.shape)
