"""Small information-theoretic helpers used across the package.

All internal likelihood arithmetic is carried out in nats; report layers
convert to bits at the boundary. ``LOG2E`` is the conversion factor.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp, xlogy

LOG2E = float(np.log2(np.e))
LN2 = float(np.log(2.0))


def nats_to_bits(x):
    return x * LOG2E


def bits_to_nats(x):
    return x * LN2


def kl_nats(p, q):
    """KL divergence D(p || q) in nats between discrete distributions.

    Rows of zero probability in ``p`` contribute nothing; a positive-``p``
    cell with ``q == 0`` yields ``inf`` (absolute-continuity failure).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    active = p > 0
    if np.any(q[active] == 0):
        return float("inf")
    return float(np.sum(xlogy(p[active], p[active] / q[active])))


def kl_bits(p, q):
    return nats_to_bits(kl_nats(p, q))


def bernoulli_kl_nats(p, q):
    """Binary KL d(p || q) in nats, vectorized over ``q``."""
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = xlogy(p, p) - xlogy(p, q)
        b = xlogy(1.0 - p, 1.0 - p) - xlogy(1.0 - p, 1.0 - q)
    out = a + b
    # xlogy(p, 0) is -inf for p > 0; the KL there is +inf
    return np.where(np.isnan(out), np.inf, out)


def normalized(probs, atol=1e-9):
    """Validate and renormalize a probability vector (guards drift only)."""
    probs = np.asarray(probs, dtype=float)
    if np.any(probs < -atol):
        raise ValueError(f"negative probability: {probs.min()}")
    total = probs.sum()
    if not np.isfinite(total) or abs(total - 1.0) > atol:
        raise ValueError(f"probabilities sum to {total}, expected 1")
    return np.clip(probs, 0.0, None) / total


def wilson_interval(successes, trials, z=1.96):
    """Wilson score interval for a binomial proportion.

    Returns ``(estimate, lower, upper)``; well behaved at 0 and N successes.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = (z / denom) * np.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials))
    return phat, max(0.0, center - half), min(1.0, center + half)


def as_generator(seed):
    """Accept an int seed or an existing Generator; never fall back to OS entropy."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("a seed is required; implicit OS randomness is not allowed")
    return np.random.default_rng(seed)


__all__ = [
    "LOG2E",
    "LN2",
    "logsumexp",
    "nats_to_bits",
    "bits_to_nats",
    "kl_nats",
    "kl_bits",
    "bernoulli_kl_nats",
    "normalized",
    "wilson_interval",
    "as_generator",
]
