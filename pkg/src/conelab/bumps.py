"""Smooth cutoffs built from a single C-infinity step.

Every bump is a difference or product of rescaled copies of ``theta``, so the
dyadic partition of unity telescopes exactly and can be checked to machine
precision.  All functions accept scalars or arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidPlateau


def _h(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def _ret(v, like):
    return float(v) if np.ndim(like) == 0 else v


def theta(s):
    """Smooth step: 1 on ``s <= 1``, 0 on ``s >= 2``, monotone in between."""
    s_arr = np.asarray(s, dtype=float)
    a = _h(2.0 - s_arr)
    b = _h(s_arr - 1.0)
    return _ret(a / (a + b), s)


def psi(s):
    """Dyadic annulus bump ``theta(s) - theta(2s)``, supported in ``[1/2, 2]``."""
    s_arr = np.asarray(s, dtype=float)
    return _ret(theta(s_arr) - theta(2.0 * s_arr), s)


def psi1(t):
    """Centre piece ``1 - theta(4(1-t))``: 1 on ``[0, 1/2]``, 0 for ``t >= 3/4``."""
    t_arr = np.asarray(t, dtype=float)
    return _ret(1.0 - theta(4.0 * (1.0 - t_arr)), t)


def psi1_split(s):
    """The two halves ``(psi1^1, psi1^2)`` of ``psi1``.

    ``psi1^1`` lives on ``[0, 3/16]`` and ``psi1^2`` on ``[3/32, 3/4]``.
    """
    s_arr = np.asarray(s, dtype=float)
    p = psi1(s_arr)
    cut = theta(32.0 * s_arr / 3.0)
    return _ret(p * cut, s), _ret(p * (1.0 - cut), s)


def psi1_1(s):
    return psi1_split(s)[0]


def psi1_2(s):
    return psi1_split(s)[1]


def capital_psi(s):
    """``psi(2s)``, supported in ``[1/4, 1]`` with ``capital_psi(1/2) = 1``."""
    s_arr = np.asarray(s, dtype=float)
    return _ret(psi(2.0 * s_arr), s)


def varphi(u, plateau=(0.55, 1.9), symmetric: bool = False):
    """Cutoff supported in ``[1/2, 2]`` and identically 1 on ``plateau``.

    With ``symmetric=True`` the cutoff is evaluated at ``|u|``.
    """
    p0, p1 = plateau
    if not 0.5 < p0 < p1 < 2.0:
        raise InvalidPlateau(f"need 1/2 < p0 < p1 < 2, got {plateau}")
    u_arr = np.asarray(u, dtype=float)
    if symmetric:
        u_arr = np.abs(u_arr)
    upper = theta(1.0 + (u_arr - p1) / (2.0 - p1))
    lower = theta(1.0 + (p0 - u_arr) / (p0 - 0.5))
    return _ret(upper * lower, u)


def partition_residual(t, J: int):
    """``|sum_{j=2}^J psi(2^j (1-t)) + psi1(t) - 1|``; telescopes to ``theta(2^{J+1}(1-t))``."""
    if J < 2:
        raise ValueError("J must be >= 2")
    t_arr = np.asarray(t, dtype=float)
    total = psi1(t_arr)
    for j in range(2, J + 1):
        total = total + psi(2.0**j * (1.0 - t_arr))
    return _ret(np.abs(total - 1.0), t)


@dataclass(frozen=True)
class BumpCatalog:
    """The cutoff ``varphi`` configuration shared by every symbol."""

    plateau: tuple[float, float] = (0.55, 1.9)
    symmetric: bool = False

    def __post_init__(self):
        p0, p1 = self.plateau
        if not 0.5 < p0 < p1 < 2.0:
            raise InvalidPlateau(f"need 1/2 < p0 < p1 < 2, got {self.plateau}")

    def phi(self, u):
        return varphi(u, self.plateau, self.symmetric)

    psi = staticmethod(psi)
    psi1 = staticmethod(psi1)
    psi1_1 = staticmethod(psi1_1)
    psi1_2 = staticmethod(psi1_2)
    capital_psi = staticmethod(capital_psi)


DEFAULT_BUMPS = BumpCatalog()
