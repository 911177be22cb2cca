"""Scale factors as exact rationals.

Scales are kept as :class:`fractions.Fraction` so that ``floor(r * h)`` and the
HR-to-LR pixel projection are computed without floating-point drift
(``2.3 * 50`` is ``114.99999999999999`` in binary floating point).
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

#: The training grid 1.1, 1.2, ..., 4.0.
TRAINING_SCALES: tuple[Fraction, ...] = tuple(Fraction(k, 10) for k in range(11, 41))


def as_scale(r) -> Fraction:
    """Convert a float, string or Fraction to an exact scale (decimal semantics for floats)."""
    if isinstance(r, Fraction):
        return r
    if isinstance(r, (int, np.integer)):
        return Fraction(int(r))
    if isinstance(r, str):
        return Fraction(r.strip())
    return Fraction(repr(float(r)))


def scaled_extent(n: int, r) -> int:
    """``floor(r * n)`` computed exactly."""
    return math.floor(as_scale(r) * n)


def format_scale(r) -> str:
    r = as_scale(r)
    return f"{float(r):g}"


def sample_scale(rng: np.random.Generator, scales=TRAINING_SCALES) -> Fraction:
    """Draw one scale uniformly from ``scales``."""
    return scales[int(rng.integers(len(scales)))]
