"""Weighted norms, sampled maximal operators, square functions in t, grid maximal functions."""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, ndimage

from . import lattice as lat
from . import transform as tr
from .errors import KindMismatch, SingularNode
from .lattice import GridSpec, SpatialField
from .quadrature import QuadratureRule, composite_rule
from .symbols import SymbolDescriptor, SymbolKind

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WeightParams:
    """Power weight ``|x'|^{-alpha} |x_n|^{-beta}``."""

    alpha: float = 0.0
    beta: float = 0.0

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not 0 <= self.beta < 1:
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")

    def check(self, n: int):
        if self.alpha >= n - 1:
            raise ValueError(f"alpha must be < n-1 = {n - 1}, got {self.alpha}")

    def __add__(self, other: "WeightParams") -> "WeightParams":
        return WeightParams(self.alpha + other.alpha, self.beta + other.beta)

    def half_sum(self, other: "WeightParams") -> "WeightParams":
        """Exponents of ``omega_1^{1/2} omega_2^{1/2}``."""
        return WeightParams(0.5 * (self.alpha + other.alpha), 0.5 * (self.beta + other.beta))


@dataclass(frozen=True)
class RGrid:
    R_min: float = 1.0
    R_max: float = 64.0
    K: int = 49

    def __post_init__(self):
        if not 0 < self.R_min < self.R_max:
            raise ValueError("need 0 < R_min < R_max")
        if self.K < 2:
            raise ValueError("K must be >= 2")

    @property
    def values(self) -> np.ndarray:
        return np.geomspace(self.R_min, self.R_max, self.K)

    def refine(self, factor: int = 2) -> "RGrid":
        """Nested refinement: every old point survives."""
        return RGrid(self.R_min, self.R_max, (self.K - 1) * factor + 1)


# -- weights -----------------------------------------------------------------


def _corner_average(d: int, alpha: float, h: float, q: int = 24) -> float:
    # mean of |x|^{-alpha} over [0,h]^d: split into d pyramids along the max coordinate
    if alpha == 0:
        return 1.0
    if d == 1:
        return h ** (-alpha) / (1.0 - alpha)
    x, w = np.polynomial.legendre.leggauss(q)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    grids = np.meshgrid(*([x] * (d - 1)), indexing="ij")
    wts = np.prod(np.meshgrid(*([w] * (d - 1)), indexing="ij"), axis=0)
    r2 = 1.0 + sum(g**2 for g in grids)
    I = float(np.sum(wts * r2 ** (-alpha / 2.0)))
    return d * h ** (-alpha) / (d - alpha) * I


@lru_cache(maxsize=16)
def _prime_weight(spec: GridSpec, alpha: float, mode: str) -> np.ndarray:
    d = spec.n - 1
    x = spec.coords()
    mesh = np.meshgrid(*([x] * d), indexing="ij")
    r2 = sum(m**2 for m in mesh)
    if alpha == 0:
        return np.ones(r2.shape)
    if mode == "point":
        if np.any(r2 == 0):
            raise SingularNode("a lattice point lies on x' = 0; use an offset grid")
        return r2 ** (-alpha / 2.0)
    if not spec.offset:
        raise ValueError("cell-averaged weights need an offset grid (cell edges on the axes)")
    h = spec.cell
    q = 10
    gx, gw = np.polynomial.legendre.leggauss(q)
    out = np.zeros(r2.shape)
    for idx in itertools.product(range(q), repeat=d):
        pts = [m + 0.5 * h * gx[i] for m, i in zip(mesh, idx)]
        wt = np.prod([0.5 * gw[i] for i in idx])
        out += wt * sum(p**2 for p in pts) ** (-alpha / 2.0)
    corner = np.all(np.abs(np.stack(mesh)) < h, axis=0)
    out[corner] = _corner_average(d, alpha, h)
    return out


@lru_cache(maxsize=16)
def _normal_weight(spec: GridSpec, beta: float, mode: str) -> np.ndarray:
    x = spec.coords()
    if beta == 0:
        return np.ones_like(x)
    if mode == "point":
        if np.any(x == 0):
            raise SingularNode("a lattice point lies on x_n = 0; use an offset grid")
        return np.abs(x) ** (-beta)
    h = spec.cell

    def F(y):
        return np.sign(y) * np.abs(y) ** (1.0 - beta) / (1.0 - beta)

    return (F(x + h / 2) - F(x - h / 2)) / h


def weight_array(spec: GridSpec, w: WeightParams, mode: str = "point") -> np.ndarray:
    """``omega_{alpha,beta}`` on the lattice.

    ``mode="point"`` samples the weight at the lattice points; ``mode="cell"``
    uses its exact average over each lattice cell (offset grids only), which
    keeps the singular cells at the axes accurate.
    """
    if mode not in ("point", "cell"):
        raise ValueError(f"mode must be 'point' or 'cell', got {mode!r}")
    w.check(spec.n)
    wp = _prime_weight(spec, float(w.alpha), mode)
    wn = _normal_weight(spec, float(w.beta), mode)
    return np.multiply.outer(wp, wn)


def weighted_norm(f: SpatialField, w: WeightParams, p: float = 2.0, mode: str = "point") -> float:
    """``((L/N)^n sum_k |f(x_k)|^p omega(x_k))^{1/p}``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    om = weight_array(f.spec, w, mode)
    return float((f.spec.cell_volume * np.sum(np.abs(f.values) ** p * om)) ** (1.0 / p))


def a_delta(delta: float, w: WeightParams) -> float:
    """Three-branch constant by ``alpha + beta`` below, at or above 1."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    s = w.alpha + w.beta
    if math.isclose(s, 1.0, rel_tol=0, abs_tol=1e-12):
        return math.sqrt(delta) * math.sqrt(math.log(1.0 / delta))
    if s < 1:
        return math.sqrt(delta)
    return delta ** ((2.0 - s) / 2.0)


# -- maximal over R ---------------------------------------------------------------

_T_SCALED = {
    SymbolKind.LinearCone,
    SymbolKind.LinearConeDiff,
    SymbolKind.SmoothAnnulus,
    SymbolKind.TildeGamma,
}


def _scaled(desc: SymbolDescriptor, R: float) -> SymbolDescriptor:
    if desc.is_bilinear or desc.kind not in _T_SCALED:
        return desc.with_(R=float(R))
    return desc.with_(t=float(R))


def _r_values(grid) -> np.ndarray:
    vals = grid.values if isinstance(grid, RGrid) else np.atleast_1d(np.asarray(grid, dtype=float))
    if vals.size == 0 or np.any(vals <= 0):
        raise ValueError("R values must be positive and non-empty")
    return vals


def maximal_over_R(inputs, family: SymbolDescriptor, grid, budget: int = tr.DEFAULT_BUDGET):
    """Pointwise ``max_R |T_R(inputs)|`` over the sampled R values.

    ``grid`` is an ``RGrid`` or any sequence of R values.  Linear families take
    one field and read ``R`` as their scale (``t`` for cone-type kinds);
    bilinear families take ``(f, g)`` and use the direct double-sum evaluation.
    """
    Rs = _r_values(grid)
    fields = tuple(inputs) if isinstance(inputs, (tuple, list)) else (inputs,)
    if family.is_bilinear:
        if len(fields) != 2:
            raise KindMismatch("a bilinear family needs two input fields")
        f, g = fields
        out = np.zeros(f.spec.shape)
        for R in Rs:
            v = tr.apply_bilinear_direct(f, g, family.lam, float(R), symbol=family, budget=budget)
            np.maximum(out, np.abs(v.values), out=out)
        return SpatialField(f.spec, out)
    if len(fields) != 1:
        raise KindMismatch("a linear family needs exactly one input field")
    (f,) = fields
    sp = tr.SparseSpectrum(f)
    out = np.zeros(f.spec.N**f.spec.n)
    if len(sp):
        rows = np.stack([_scaled(family, R).linear_values(sp.xp2, sp.xn) for R in Rs])
        for lo in range(0, len(rows), 64):
            U = sp.node_fields(rows[lo : lo + 64])
            np.maximum(out, np.abs(U).max(axis=0), out=out)
    return SpatialField(f.spec, out.reshape(f.spec.shape))


# -- square functions in t ----------------------------------------------------------


def critical_scales(family: SymbolDescriptor, rho: np.ndarray) -> np.ndarray:
    """t-values where a family's t-profile at ``|xi'|/|xi_n| = rho`` has a kink,
    a jump or an edge of support."""
    rho = np.asarray(rho, dtype=float)
    rho = rho[np.isfinite(rho) & (rho > 0)]
    k = family.kind
    if k == SymbolKind.SmoothAnnulus:
        c = family.delta * np.array([0.25, 0.5, 1.0])
    elif k == SymbolKind.TildeGamma:
        c = 2.0 ** (-family.gamma) * np.array([0.25, 0.5, 1.0])
    elif k in (SymbolKind.LinearCone, SymbolKind.LinearConeDiff):
        return np.unique(rho)
    else:
        return np.zeros(0)
    return np.unique((rho[:, None] / np.sqrt(1.0 - c[None, :])).ravel())


_MEASURES = ("dt", "dt/t", "dt/R")


def _measure_factor(measure, nodes, t1):
    if measure == "dt":
        return np.ones_like(nodes)
    if measure == "dt/t":
        return 1.0 / nodes
    if measure == "dt/R":
        return np.full_like(nodes, 1.0 / t1)
    raise ValueError(f"measure must be one of {_MEASURES}, got {measure!r}")


def effective_range(f: SpatialField, family: SymbolDescriptor):
    """Smallest ``[t0, t1]`` outside which the family annihilates ``f``; ``None`` if it always does."""
    sp = tr.SparseSpectrum(f)
    crit = critical_scales(family, sp.rho)
    if crit.size == 0:
        return None
    return float(crit.min()), float(crit.max())


def square_rule(f, family, t_range=None, panels=16, order=40, scheme="gauss") -> QuadratureRule | None:
    """Log-spaced composite rule with breakpoints at every critical scale of the spectrum."""
    sp = tr.SparseSpectrum(f)
    crit = critical_scales(family, sp.rho)
    if t_range is None:
        if crit.size == 0:
            return None
        t_range = (crit.min(), crit.max())
    t0, t1 = t_range
    if not t1 > t0:
        # a single critical scale: the family is supported on a null set of t
        return None
    return composite_rule(t0, t1, crit, panels, order, scheme, spacing="log")


def square_function_t(
    f: SpatialField,
    family: SymbolDescriptor,
    t_range=None,
    measure: str = "dt/t",
    rule: QuadratureRule | None = None,
) -> SpatialField:
    """Pointwise ``(int |T_t f(x)|^2 dmu(t))^{1/2}`` over a linear t-family.

    Without ``rule`` the t-range is cut to where the family can act on the
    spectrum of ``f`` and breakpoints are placed at every critical scale.
    """
    if family.is_bilinear:
        raise KindMismatch("square functions take a linear family")
    spec = f.spec
    if rule is None:
        rule = square_rule(f, family, t_range)
    if rule is None:
        return SpatialField(spec, np.zeros(spec.shape))
    t1 = t_range[1] if t_range is not None else rule.nodes[-1]
    sp = tr.SparseSpectrum(f)
    rows = tr.linear_stack(sp, family, rule.nodes)
    wts = rule.weights * _measure_factor(measure, rule.nodes, t1)
    acc = np.zeros(spec.N**spec.n)
    for lo in range(0, len(rule), 128):
        U = sp.node_fields(rows[lo : lo + 128])
        acc += wts[lo : lo + 128] @ (np.abs(U) ** 2)
    return SpatialField(spec, np.sqrt(acc).reshape(spec.shape))


def plancherel_square_norm(f: SpatialField, family: SymbolDescriptor, measure: str = "dt/t", t_range=None) -> float:
    """``||square_function_t(f)||_2^2`` on the frequency side.

    Each distinct ``(|xi'|^2, xi_n)`` on the spectrum gets its own adaptive 1-d
    integral of ``|symbol|^2`` in t, independent of any composite rule.
    """
    sp = tr.SparseSpectrum(f)
    if len(sp) == 0:
        return 0.0
    spec = f.spec
    keys = np.round(np.stack([sp.xp2, sp.xn], axis=1), 14)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = np.ravel(inv)
    mass = np.bincount(inv, weights=np.abs(sp.coeffs) ** 2, minlength=len(uniq))
    total = 0.0
    for (xp2, xn), m in zip(uniq, mass):
        with np.errstate(divide="ignore"):
            rho = np.sqrt(xp2) / abs(xn) if xn != 0 else np.inf
        crit = critical_scales(family, np.array([rho]))
        if t_range is not None:
            lo, hi = t_range
        elif crit.size >= 2:
            lo, hi = crit.min(), crit.max()
        else:
            continue
        t1 = hi

        def integrand(t):
            v = float(family.with_(t=t).linear_values(np.array(xp2), np.array(xn)))
            return v * v * float(_measure_factor(measure, np.array([t]), t1)[0])

        pts = [c for c in crit if lo < c < hi]
        val, _ = integrate.quad(integrand, lo, hi, points=pts or None, epsabs=0, epsrel=1e-13, limit=400)
        total += m * val
    return total / spec.L**spec.n


# -- cone square function and averaged maximal function ----------------------------


def chain_rule(
    f: SpatialField,
    grid: RGrid | None = None,
    T_max: float | None = None,
    panels: int = 64,
    order: int = 31,
    scheme: str = "tanh_sinh",
) -> QuadratureRule | None:
    """Shared t-rule on ``[0, T_max]`` for the cone square function and ``M^nu``.

    Breakpoints sit at every ``|xi'|/|xi_n|`` of the spectrum and at every
    sampled R, so the partial sums over ``t <= R`` are exact panel unions.
    """
    sp = tr.SparseSpectrum(f)
    rho = sp.rho[np.isfinite(sp.rho)]
    pos = rho[rho > 0]
    bp = list(np.unique(pos))
    hi = 0.0
    if pos.size:
        hi = 64.0 * pos.max()
    if grid is not None:
        bp += list(grid.values)
        hi = max(hi, grid.R_max)
    if T_max is not None:
        hi = T_max
    if hi <= 0:
        return None
    floor = min([b for b in bp if b > 0] + [hi]) / 4.0
    edges = [floor] + bp
    return composite_rule(0.0, hi, edges, panels, order, scheme, spacing="log", log_floor=floor)


def _cone_stack(sp, nu, nodes, bumps):
    return np.stack([tr.sym.k_linear_cone(sp.xp2, sp.xn, nu, t, bumps) for t in nodes])


def gnu_square(f: SpatialField, nu: float, rule: QuadratureRule | None = None, T_max: float | None = None) -> SpatialField:
    """``(int_0^inf |T^{nu+1}_t f - T^nu_t f|^2 dt/t)^{1/2}``, truncated at the rule's end.

    The integrand decays like ``t^{-5}``; the relative tail beyond ``T_max``
    is about ``(rho_max / T_max)^4`` and is logged.
    """
    if nu <= -0.5:
        raise ValueError("nu must exceed -1/2")
    spec = f.spec
    if rule is None:
        rule = chain_rule(f, T_max=T_max)
    if rule is None:
        return SpatialField(spec, np.zeros(spec.shape))
    sp = tr.SparseSpectrum(f)
    rho = sp.rho[np.isfinite(sp.rho)]
    if rho.size and rho.max() > 0:
        log.debug("gnu_square tail estimate %.3e", (rho.max() / rule.nodes[-1]) ** 4)
    fam = SymbolDescriptor(SymbolKind.LinearConeDiff, nu=nu)
    return square_function_t(f, fam, measure="dt/t", rule=rule)


def _partial_means(sp, nu, rule, grid, bumps):
    """``(1/R) sum_{t_k <= R} w_k |T^nu_{t_k} f|^2`` for each R; shape ``(K_R, N^n)``."""
    rows = _cone_stack(sp, nu, rule.nodes, bumps)
    size = sp.spec.N**sp.spec.n
    Rs = grid.values
    cut = np.searchsorted(rule.nodes, Rs, side="right")
    csum = np.zeros(size)
    out = np.zeros((len(Rs), size))
    done = 0
    for i, c in enumerate(cut):
        if c > done:
            U = sp.node_fields(rows[done:c])
            csum = csum + rule.weights[done:c] @ (np.abs(U) ** 2)
            done = c
        out[i] = csum / Rs[i]
    return out


def m_nu(f: SpatialField, nu: float, grid: RGrid, rule: QuadratureRule | None = None, bumps=None) -> SpatialField:
    """``max_R ((1/R) int_0^R |T^nu_t f|^2 dt)^{1/2}`` over the sampled R values."""
    from .bumps import DEFAULT_BUMPS

    if nu <= -0.5:
        raise ValueError("nu must exceed -1/2")
    spec = f.spec
    if rule is None:
        rule = chain_rule(f, grid)
    sp = tr.SparseSpectrum(f)
    if rule is None or len(sp) == 0:
        return SpatialField(spec, np.zeros(spec.shape))
    means = _partial_means(sp, nu, rule, grid, bumps or DEFAULT_BUMPS)
    return SpatialField(spec, np.sqrt(means.max(axis=0)).reshape(spec.shape))


def mnu_chain(f: SpatialField, nu: float, k: int, grid: RGrid, rule: QuadratureRule | None = None):
    """Both sides of ``M^nu <= sum_{i<k} G^{nu+i} + M^{nu+k}`` on one shared rule."""
    if rule is None:
        rule = chain_rule(f, grid)
    lhs = m_nu(f, nu, grid, rule).values.real
    rhs = m_nu(f, nu + k, grid, rule).values.real.copy()
    for i in range(k):
        rhs += gnu_square(f, nu + i, rule).values.real
    return lhs, rhs


# -- grid maximal functions ------------------------------------------------------------


def dyadic_strong_maximal(f: SpatialField) -> SpatialField:
    """Sup of ``|f|`` averages over dyadic rectangles ``Q x I`` containing each point.

    ``Q`` is a dyadic cube over the first ``n-1`` axes and ``I`` an independent
    dyadic interval on the last axis; blocks are aligned to lattice index 0.
    """
    spec = f.spec
    N, n = spec.N, spec.n
    levels = int(round(math.log2(N)))
    if 2**levels != N:
        raise ValueError("dyadic maximal function needs N to be a power of two")
    a = np.abs(f.values)
    out = a.copy()
    for p in range(levels + 1):
        for q in range(levels + 1):
            sp_, sq = 2**p, 2**q
            shape = []
            for _ in range(n - 1):
                shape += [N // sp_, sp_]
            shape += [N // sq, sq]
            blocks = a.reshape(shape).mean(axis=tuple(range(1, 2 * n, 2)), keepdims=True)
            full = np.broadcast_to(blocks, shape).reshape(spec.shape)
            np.maximum(out, full, out=out)
    return SpatialField(spec, out)


def hardy_littlewood(f: SpatialField) -> SpatialField:
    """Centred discrete maximal function over cubes of odd side, periodic wrap."""
    spec = f.spec
    a = np.abs(f.values)
    out = a.copy()
    for side in range(3, spec.N, 2):
        np.maximum(out, ndimage.uniform_filter(a, size=side, mode="wrap"), out=out)
    return SpatialField(spec, out)
