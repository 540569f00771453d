"""Spreading and the Gaussian multiple-access channel.

Each user's n_c antipodal symbols are spread by its signature column
into a length n = n_s * n_c vector (Kronecker product). The channel
adds the users and unit-variance real Gaussian noise. The receiver
views the frame as an n_s x n_c matrix whose column t is the t-th
spreading block, so a one-user noiseless frame is exactly the outer
product a v^T.

Noise variance is fixed at 1; all operating-point control happens
through the column powers P_k.
"""

from __future__ import annotations

import numpy as np

from .codebook import PowerProfile


def spread(v: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Spread symbols v (length n_c) by signature a (length n_s).

    Returns x = v kron a: block t of length n_s equals v[t] * a.
    """
    v = np.asarray(v, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if v.ndim != 1 or a.ndim != 1:
        raise ValueError("spread expects two vectors")
    return np.kron(v, a)


def to_frame(y: np.ndarray, n_s: int, n_c: int) -> np.ndarray:
    """Reshape a length n_s*n_c vector so block t becomes column t."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (n_s * n_c,):
        raise ValueError(f"expected length {n_s * n_c}, got {y.shape}")
    return np.ascontiguousarray(y.reshape(n_c, n_s).T)


def gmac_superpose(
    signals, n_s: int, n_c: int, noise_on: bool = True, seed=0
) -> np.ndarray:
    """Sum spread signals plus (optional) unit Gaussian noise.

    Parameters
    ----------
    signals : iterable of length n_s*n_c vectors; may be empty.
    n_s, n_c : frame geometry.
    noise_on : add z ~ N(0, I) when True.
    seed : int, SeedSequence, or Generator for the noise draw.

    Returns
    -------
    (n_s, n_c) received frame.
    """
    n = n_s * n_c
    y = np.zeros(n)
    for x in signals:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (n,):
            raise ValueError(f"signal length {x.shape} != n={n}")
        y = y + x
    if noise_on:
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        y = y + rng.standard_normal(n)
    return to_frame(y, n_s, n_c)


def average_power(profile: PowerProfile, n_s: int) -> float:
    """System average power per channel use, E[P_k] / n_s under the
    uniform column choice (a user's per-use power is n_c P_k / n)."""
    sizes = np.asarray(profile.group_sizes, dtype=np.float64)
    powers = np.asarray(profile.power_levels, dtype=np.float64)
    return float((sizes / sizes.sum()) @ powers / n_s)
