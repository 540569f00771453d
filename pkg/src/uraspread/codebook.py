"""Grouped-power Gaussian signature codebook.

The codebook A has 2^B_s columns of length n_s, laid out in contiguous
groups of ascending power: columns [0, l_1) form group 1 at power P_1,
the next l_2 columns group 2 at P_2, and so on. A user's B_s preamble
bits select a column (big-endian), so the preamble also selects the
user's transmit power. A_N is the unit-norm twin used by the detector.

The contiguous ascending layout makes "drop the i highest-power groups"
a plain column slice, which the interference canceller leans on.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .powalloc import AllocationResult


@dataclass(frozen=True)
class PowerProfile:
    """Column counts and squared-norm targets per power group."""

    group_sizes: tuple[int, ...]  # l_k columns in group k, sum = 2^B_s
    power_levels: tuple[float, ...]  # P_k, nondecreasing

    def __post_init__(self) -> None:
        if len(self.group_sizes) != len(self.power_levels):
            raise ValueError("group_sizes and power_levels length mismatch")
        if not self.group_sizes:
            raise ValueError("profile needs at least one group")
        if any(l < 1 or l != int(l) for l in self.group_sizes):
            raise ValueError(f"group sizes must be positive ints, got {self.group_sizes}")
        if any(p <= 0 for p in self.power_levels):
            raise ValueError(f"power levels must be positive, got {self.power_levels}")
        if any(
            p_next < p_prev
            for p_prev, p_next in zip(self.power_levels, self.power_levels[1:])
        ):
            raise ValueError(f"power levels must be nondecreasing, got {self.power_levels}")

    @property
    def m(self) -> int:
        return len(self.group_sizes)

    @property
    def n_columns(self) -> int:
        return int(sum(self.group_sizes))

    def scaled(self, power_scale: float) -> "PowerProfile":
        """Same layout with every P_k multiplied by ``power_scale``."""
        if power_scale <= 0:
            raise ValueError(f"power scale must be positive, got {power_scale}")
        return PowerProfile(
            group_sizes=self.group_sizes,
            power_levels=tuple(p * power_scale for p in self.power_levels),
        )

    def expected_group_users(self, k_a: int) -> np.ndarray:
        """Expected active users per group, l_k * K_a / 2^B_s."""
        sizes = np.asarray(self.group_sizes, dtype=np.float64)
        return sizes * k_a / self.n_columns

    def column_powers(self) -> np.ndarray:
        """Per-column squared-norm targets, length 2^B_s."""
        return np.repeat(self.power_levels, self.group_sizes).astype(np.float64)


@dataclass(frozen=True)
class SignatureCodebook:
    """Immutable signature matrix with its unit-norm twin."""

    a: np.ndarray  # (n_s, 2^B_s), column j has squared norm P_group_of(j)
    a_n: np.ndarray  # same columns scaled to unit norm
    profile: PowerProfile

    @property
    def n_s(self) -> int:
        return self.a.shape[0]

    @property
    def n_columns(self) -> int:
        return self.a.shape[1]

    def group_of(self, column: int) -> int:
        """Zero-based power-group index of a column."""
        if not 0 <= column < self.n_columns:
            raise IndexError(f"column {column} out of range [0, {self.n_columns})")
        edges = np.cumsum(self.profile.group_sizes)
        return int(np.searchsorted(edges, column, side="right"))

    def power_of(self, column: int) -> float:
        return self.profile.power_levels[self.group_of(column)]

    def columns_below_group(self, n_groups_removed: int) -> int:
        """Number of leading columns left when the ``n_groups_removed``
        highest-power groups are dropped (contiguous layout)."""
        m = self.profile.m
        if not 0 <= n_groups_removed <= m:
            raise ValueError(f"can remove 0..{m} groups, got {n_groups_removed}")
        return int(sum(self.profile.group_sizes[: m - n_groups_removed]))

    def dump(self, path) -> None:
        """Binary export: 16-byte header (n_s, column count as little-endian
        uint64) followed by column-major little-endian float64 data."""
        with open(path, "wb") as fh:
            fh.write(struct.pack("<QQ", self.n_s, self.n_columns))
            fh.write(self.a.astype("<f8").ravel(order="F").tobytes())


def generate_codebook(
    n_s: int, b_s: int, profile: PowerProfile, seed
) -> SignatureCodebook:
    """Draw the signature codebook for a given seed.

    Columns are i.i.d. standard Gaussian vectors, each shifted to zero
    empirical mean and then scaled so its squared norm hits the group's
    P_k exactly. Deterministic given ``seed``.
    """
    if n_s < 2:
        # a length-1 column is annihilated by mean subtraction
        raise ValueError(f"n_s must be >= 2, got {n_s}")
    if profile.n_columns != 2**b_s:
        raise ValueError(
            f"profile covers {profile.n_columns} columns, expected 2^{b_s}"
        )
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n_s, profile.n_columns))
    a -= a.mean(axis=0, keepdims=True)  # zero mean first, then scale
    norms = np.linalg.norm(a, axis=0)
    a_n = a / norms
    a = a_n * np.sqrt(profile.column_powers())
    return SignatureCodebook(a=a, a_n=a_n, profile=profile)


def column_for_preamble(preamble: np.ndarray, b_s: int) -> int:
    """Map B_s preamble bits (big-endian) to a column index."""
    bits = np.asarray(preamble).astype(np.int64)
    if bits.shape != (b_s,):
        raise ValueError(f"expected {b_s} preamble bits, got shape {bits.shape}")
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("preamble bits must be 0/1")
    return int(bits @ (1 << np.arange(b_s - 1, -1, -1, dtype=np.int64)))


def preamble_for_column(column: int, b_s: int) -> np.ndarray:
    """Inverse of :func:`column_for_preamble`."""
    if not 0 <= column < 2**b_s:
        raise ValueError(f"column {column} out of range for B_s={b_s}")
    return np.array([(column >> (b_s - 1 - i)) & 1 for i in range(b_s)], dtype=np.int8)


def profile_from_allocation(alloc: AllocationResult, b_s: int) -> PowerProfile:
    """Turn optimizer group sizes (user counts) into column counts.

    Column counts are proportional to the user counts: l_k =
    round(2^B_s * K_k / K_a), fixed up by +-1 on the largest-remainder
    entries so they sum to 2^B_s.
    """
    if not alloc.feasible:
        raise ValueError("cannot build a profile from an infeasible allocation")
    total = 2**b_s
    k = np.asarray(alloc.k, dtype=np.float64)
    exact = total * k / k.sum()
    sizes = np.rint(exact).astype(np.int64)
    remainder = exact - sizes  # in [-0.5, 0.5]
    deficit = total - int(sizes.sum())
    step = 1 if deficit > 0 else -1
    # ties resolved toward the lower index: stable sort on the key
    order = np.argsort(-step * remainder, kind="stable")
    for j in range(abs(deficit)):
        sizes[order[j]] += step
    if np.any(sizes < 1):
        raise ValueError(
            f"allocation group too small to reach any column at B_s={b_s}: {sizes}"
        )
    powers = np.asarray(alloc.p, dtype=np.float64)
    srt = np.argsort(powers, kind="stable")
    return PowerProfile(
        group_sizes=tuple(int(s) for s in sizes[srt]),
        power_levels=tuple(float(p) for p in powers[srt]),
    )
