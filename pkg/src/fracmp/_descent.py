"""Shared step-size plumbing for the monotone descent loops."""
from __future__ import annotations

import numpy as np


def bb_alpha(du: np.ndarray, dg: np.ndarray, fallback: float,
             lo: float = 1e-14, hi: float = 1e14) -> float:
    """Barzilai-Borwein step from a secant pair, clipped to [lo, hi].

    Prefers the long BB1 step; falls back to BB2, then to the supplied
    default when the curvature estimate is not positive.
    """
    uu = float(du @ du)
    ug = float(du @ dg)
    gg = float(dg @ dg)
    if ug > 0.0 and uu > 0.0:
        alpha = uu / ug
    elif ug > 0.0 and gg > 0.0:
        alpha = ug / gg
    else:
        alpha = fallback
    return float(np.clip(alpha, lo, hi))
