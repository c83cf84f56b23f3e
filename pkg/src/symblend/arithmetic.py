"""Continued fractions, Diophantine constants and orbit density on the circle.

Rotation numbers live in [0, 1).  Anything that multiplies a rotation number
by a large integer goes through a two-term (hi + lo) split so that the
fractional part of ``n * beta`` stays accurate for ``n`` up to about 1e8.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .errors import RationalDetected

DEFAULT_DPS = 60
QUOTIENT_CEILING = 1e9
_SPLIT_BITS = 26


def _to_mpf(x, dps=DEFAULT_DPS):
    with mpmath.workdps(dps):
        if isinstance(x, RotationNumber):
            return +x.mp
        if isinstance(x, Fraction):
            return mpmath.mpf(x.numerator) / x.denominator
        return mpmath.mpf(x)


def split_hi_lo(value) -> tuple[float, float]:
    """Split a real in [0, 1) into a 26-bit head and a double tail."""
    mp = _to_mpf(value)
    hi = math.ldexp(math.floor(math.ldexp(float(mp), _SPLIT_BITS)), -_SPLIT_BITS)
    with mpmath.workdps(DEFAULT_DPS):
        lo = float(mp - hi)
    return hi, lo


@dataclass(frozen=True)
class RotationNumber:
    """A rotation number in [0, 1) kept at extended precision.

    ``value`` is the nearest double, ``hi + lo`` a double-double version used
    when forming fractional parts of large multiples.
    """

    mp: mpmath.mpf
    value: float = field(init=False)
    hi: float = field(init=False)
    lo: float = field(init=False)

    def __post_init__(self):
        with mpmath.workdps(DEFAULT_DPS):
            mp = self.mp - mpmath.floor(self.mp)
        object.__setattr__(self, "mp", mp)
        object.__setattr__(self, "value", float(mp))
        hi, lo = split_hi_lo(mp)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "lo", lo)

    @classmethod
    def from_value(cls, x) -> "RotationNumber":
        if isinstance(x, RotationNumber):
            return x
        return cls(_to_mpf(x))

    @classmethod
    def golden(cls) -> "RotationNumber":
        """The golden mean (sqrt(5) - 1) / 2 with partial quotients all 1."""
        with mpmath.workdps(DEFAULT_DPS):
            return cls((mpmath.sqrt(5) - 1) / 2)

    @classmethod
    def from_quotients(cls, quotients, tail=1) -> "RotationNumber":
        """Build [0; a1, a2, ...] followed by a tail of repeated ``tail`` quotients."""
        with mpmath.workdps(DEFAULT_DPS):
            if tail == 1:
                x = (mpmath.sqrt(5) - 1) / 2
            else:
                # fixed point of x = 1 / (tail + x)
                x = (mpmath.sqrt(tail * tail + 4) - tail) / 2
            for a in reversed(list(quotients)):
                x = 1 / (a + x)
            return cls(x)

    def __float__(self):
        return self.value


def continued_fraction(x, depth: int, ceiling: float = QUOTIENT_CEILING,
                       dps: int = DEFAULT_DPS) -> list[int]:
    """Return the first ``depth`` partial quotients of x in [0, 1).

    Raises RationalDetected when a quotient exceeds ``ceiling`` or the
    remainder vanishes before ``depth`` terms are produced.
    """
    with mpmath.workdps(dps):
        r = _to_mpf(x, dps)
        r = r - mpmath.floor(r)
        floor_eps = mpmath.mpf(2) ** (-(mpmath.mp.prec - 8))
        out = []
        for i in range(depth):
            if r <= floor_eps:
                raise RationalDetected(
                    f"remainder vanished after {i} quotients: {out}")
            inv = 1 / r
            a = int(mpmath.floor(inv))
            if a > ceiling:
                raise RationalDetected(
                    f"quotient {a} at position {i + 1} exceeds ceiling {ceiling:g}")
            out.append(a)
            r = inv - a
        return out


def convergents(quotients) -> list[tuple[int, int]]:
    """Convergents p_k / q_k of [0; a1, a2, ...] as integer pairs."""
    p_prev, p = 1, 0
    q_prev, q = 0, 1
    out = []
    for a in quotients:
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        out.append((p, q))
    return out


def frac_multiples(beta, n) -> np.ndarray:
    """Fractional parts of n * beta for an integer array n (|n| up to about 1e12)."""
    hi, lo = split_hi_lo(beta) if not isinstance(beta, RotationNumber) else (beta.hi, beta.lo)
    n_int = np.asarray(n, dtype=np.int64)
    # hi is a multiple of 2**-26, so only n mod 2**26 matters for the head
    a = np.mod(n_int, 1 << _SPLIT_BITS).astype(np.float64) * hi
    b = n_int.astype(np.float64) * lo
    f = (a - np.floor(a)) + (b - np.floor(b))
    return f - np.floor(f)


def circle_distance(f) -> np.ndarray:
    """Distance to the nearest integer."""
    f = np.asarray(f, dtype=np.float64)
    f = f - np.floor(f)
    return np.minimum(f, 1.0 - f)


def diophantine_constant(beta, q_max: int, chunk: int = 1 << 20) -> float:
    """min over 1 <= q <= q_max of q * dist(q beta, Z)."""
    q_max = int(q_max)
    if q_max < 1:
        raise ValueError("q_max must be >= 1")
    beta = RotationNumber.from_value(beta)
    best = math.inf
    for start in range(1, q_max + 1, chunk):
        q = np.arange(start, min(q_max, start + chunk - 1) + 1, dtype=np.int64)
        vals = q * circle_distance(frac_multiples(beta, q))
        best = min(best, float(vals.min()))
    return best


def orbit_density_radius(beta, offset: float, N: int) -> float:
    """Half of the largest gap left by {offset + n beta : 0 <= n < N} on R/Z."""
    N = int(N)
    if N < 1:
        raise ValueError("N must be >= 1")
    beta = RotationNumber.from_value(beta)
    pts = frac_multiples(beta, np.arange(N)) + offset
    pts = np.sort(pts - np.floor(pts))
    gaps = np.diff(pts, append=pts[0] + 1.0)
    return 0.5 * float(gaps.max())


def dirichlet_constant(beta, N: int, q_max: int | None = None) -> float:
    """Empirical C in r_N <= C / (N alpha), with alpha = dioph(beta, q_max or N)."""
    alpha = diophantine_constant(beta, q_max or N)
    return orbit_density_radius(beta, 0.0, N) * N * alpha
