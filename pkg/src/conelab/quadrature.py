"""Quadrature rules for the scale integrals in t.

Rules are composite: the interval is cut into uniform (or geometric) panels,
further split at caller-supplied breakpoints, and each sub-panel receives
Gauss-Legendre or tanh-sinh nodes.  Breakpoints are where a symbol's
t-profile jumps or has an algebraic endpoint singularity, so every sub-panel
sees a smooth integrand.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import expit, roots_jacobi

SCHEMES = ("gauss", "tanh_sinh", "gauss_jacobi")


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    scheme: str
    tolerance: float = 1e-6
    build: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        t = np.asarray(self.nodes, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if t.shape != w.shape or t.ndim != 1:
            raise ValueError("nodes and weights must be 1-d arrays of equal length")
        if len(t) < 8:
            raise ValueError(f"a rule needs at least 8 nodes, got {len(t)}")
        if np.any(np.diff(t) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "nodes", t)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.nodes)

    def integrate(self, values) -> np.ndarray:
        """Weighted sum over the leading axis, accumulated in node order."""
        values = np.asarray(values)
        return np.tensordot(self.weights, values, axes=(0, 0))

    def refined(self, factor: int = 2) -> "QuadratureRule":
        if not self.build:
            raise ValueError("rule was not produced by composite_rule; cannot refine")
        kw = dict(self.build)
        kw["panels"] = kw["panels"] * factor
        return composite_rule(**kw)

    def scaled(self, c: float) -> "QuadratureRule":
        """The rule for ``int f(s) ds`` under ``t = c s`` (nodes ``t/c``)."""
        return QuadratureRule(self.nodes / c, self.weights / c, self.scheme, self.tolerance)


def _tanh_sinh_unit(order: int):
    """Nodes as ``(fraction from a, fraction from b)`` pairs plus unit weights on [0, 1]."""
    K = max(order // 2, 4)
    h = 3.2 / K
    k = np.arange(-K, K + 1)
    u = 0.5 * np.pi * np.sinh(k * h)
    frac_a = expit(2.0 * u)  # (t - a)/(b - a)
    frac_b = expit(-2.0 * u)  # (b - t)/(b - a)
    w = 0.5 * np.pi * h * np.cosh(k * h) * 2.0 * frac_a * frac_b
    return frac_a, frac_b, w


def _panel_nodes(a: float, b: float, order: int, scheme: str, log: bool):
    if log:
        la, lb = np.log(a), np.log(b)
        x, w = _panel_nodes(la, lb, order, scheme, False)
        t = np.exp(x)
        return t, w * t
    if scheme == "gauss":
        x, w = np.polynomial.legendre.leggauss(order)
        return a + 0.5 * (b - a) * (x + 1.0), 0.5 * (b - a) * w
    fa, fb, w = _tanh_sinh_unit(order)
    t = np.where(fa < 0.5, a + (b - a) * fa, b - (b - a) * fb)
    keep = (t > a) & (t < b)
    return t[keep], (b - a) * w[keep]


def composite_rule(
    t0: float,
    t1: float,
    breakpoints=(),
    panels: int = 256,
    order: int = 4,
    scheme: str = "gauss",
    spacing: str = "linear",
    tolerance: float = 1e-6,
    log_floor: float | None = None,
) -> QuadratureRule:
    """Composite rule for ``int_{t0}^{t1} f(t) dt``.

    ``spacing="log"`` lays panels and nodes out in ``log t`` (requires
    ``t0 > 0`` unless ``log_floor`` is given, in which case ``[t0, log_floor]``
    is one linear panel), which suits ``dt/t`` measures over several decades.
    """
    if scheme not in ("gauss", "tanh_sinh"):
        raise ValueError(f"composite scheme must be gauss or tanh_sinh, got {scheme!r}")
    if not t1 > t0:
        raise ValueError("need t1 > t0")
    log = spacing == "log"
    lin_head = None
    if log and t0 <= 0:
        if log_floor is None or not t0 < log_floor < t1:
            raise ValueError("log spacing needs t0 > 0 or t0 < log_floor < t1")
        lin_head = _panel_nodes(t0, log_floor, order, scheme, False)
        edges = np.geomspace(log_floor, t1, panels + 1)
    else:
        edges = np.geomspace(t0, t1, panels + 1) if log else np.linspace(t0, t1, panels + 1)
    bp = np.asarray(list(breakpoints), dtype=float)
    bp = bp[(bp > edges[0]) & (bp < t1)]
    edges = np.unique(np.concatenate([edges, bp]))
    # merge breakpoints closer than round-off; they would produce empty panels
    gap = np.diff(edges) > 1e-13 * max(abs(t1), 1.0)
    edges = np.concatenate([edges[:1], edges[1:][gap]])
    edges[-1] = t1
    ts, ws = ([lin_head[0]], [lin_head[1]]) if lin_head else ([], [])
    for a, b in zip(edges[:-1], edges[1:]):
        t, w = _panel_nodes(a, b, order, scheme, log)
        ts.append(t)
        ws.append(w)
    nodes = np.concatenate(ts)
    weights = np.concatenate(ws)
    # tanh-sinh tails can collide across a shared edge in floating point
    keep = np.concatenate([[True], np.diff(nodes) > 0])
    build = dict(
        t0=t0,
        t1=t1,
        breakpoints=tuple(bp.tolist()),
        panels=panels,
        order=order,
        scheme=scheme,
        spacing=spacing,
        tolerance=tolerance,
        log_floor=log_floor,
    )
    return QuadratureRule(nodes[keep], weights[keep], scheme, tolerance, build)


@lru_cache(maxsize=256)
def _jacobi(order, alpha, beta):
    x, w = roots_jacobi(order, alpha, beta)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_jacobi(order: int, alpha: float, beta: float):
    """Nodes/weights on [-1, 1] for the weight ``(1-x)^alpha (1+x)^beta`` (cached, read-only)."""
    return _jacobi(int(order), float(alpha), float(beta))
