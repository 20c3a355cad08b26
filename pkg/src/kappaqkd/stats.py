"""Small statistics helpers with no dependencies on the rest of the package."""
import math

import numpy as np
from scipy.stats import norm

from .errors import LengthMismatch


def binomial_ci(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    z = norm.ppf(0.5 + confidence / 2.0)
    p = successes / trials
    z2n = z * z / trials
    centre = (p + z2n / 2.0) / (1.0 + z2n)
    half = z / (1.0 + z2n) * math.sqrt(p * (1.0 - p) / trials + z2n / (4.0 * trials))
    # clamp roundoff at the boundaries so (0, n) and (n, n) hit 0 and 1 exactly
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


def qber(alice_bits, bob_bits) -> float:
    """Fraction of positions where the two bit strings differ."""
    a = np.asarray(alice_bits).ravel()
    b = np.asarray(bob_bits).ravel()
    if a.shape != b.shape:
        raise LengthMismatch(f"key lengths differ: {a.size} vs {b.size}")
    if a.size < 1:
        raise ValueError("keys must be non-empty")
    return float(np.count_nonzero(a != b)) / a.size
