"""Closed-form power allocation across user groups.

Users are split into m groups; group j's power P_j is chosen so that,
with all higher-power groups already cancelled and the lower-power
groups treated as noise, the group hits its required SINR alpha_min(K_j)
with equality. That target comes from an AlphaCurve, either loaded from
CSV or measured by simulation (calibrate_alpha_min). Stacking the
per-group conditions gives the product recursion

    gamma_j = alpha_j / (1 - (K_j - 1) alpha_j)
    P_j     = gamma_j * prod_{i<j} (1 + K_i gamma_i)

with total power P_T = sum K_j P_j = prod(1 + K_j gamma_j) - 1. The
group count itself is picked by minimizing (1 + K_a gamma_0 / m)^m over
m, with gamma_0 evaluated at the continuous per-group size K_a / m.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class InfeasibleGroupError(ValueError):
    """No finite power reaches the SINR target for this group size."""


class CalibrationError(RuntimeError):
    """The power search for alpha_min failed to converge in bracket."""


@dataclass(frozen=True)
class AlphaCurve:
    """Required-SINR samples alpha_min(K), piecewise-linear in K."""

    k_values: tuple[float, ...]
    alpha_values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.k_values) != len(self.alpha_values) or not self.k_values:
            raise ValueError("need equal-length, nonempty sample arrays")
        if any(b <= a for a, b in zip(self.k_values, self.k_values[1:])):
            raise ValueError(f"K samples must be strictly increasing: {self.k_values}")
        if any(k < 1 for k in self.k_values):
            raise ValueError("K samples must be >= 1")
        if any(not 0 < a < 1 for a in self.alpha_values):
            raise ValueError(f"alpha_min samples must lie in (0,1): {self.alpha_values}")

    def __call__(self, k) -> float:
        """Interpolated alpha_min at group size k (clamped at endpoints)."""
        return float(np.interp(k, self.k_values, self.alpha_values))

    @classmethod
    def constant(cls, alpha: float, k_max: float = 1024.0) -> "AlphaCurve":
        """Flat curve alpha_min(K) = alpha (handy for closed-form checks)."""
        return cls(k_values=(1.0, float(k_max)), alpha_values=(alpha, alpha))

    @classmethod
    def from_csv(cls, path) -> "AlphaCurve":
        """Load samples from a CSV with header ``K,alpha_min``."""
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["K", "alpha_min"]:
                raise ValueError(f"expected header 'K,alpha_min', got {header}")
            rows = [(float(k), float(a)) for k, a in reader]
        rows.sort(key=lambda r: r[0])
        return cls(
            k_values=tuple(r[0] for r in rows),
            alpha_values=tuple(r[1] for r in rows),
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["K", "alpha_min"])
            for k, a in zip(self.k_values, self.alpha_values):
                writer.writerow([f"{k:.10g}", f"{a:.10g}"])


@dataclass(frozen=True)
class AllocationResult:
    """Group layout chosen by the allocator."""

    m: int
    k: tuple[int, ...]  # users per group
    p: tuple[float, ...]  # power per group, ascending for optimizer output
    p_t: float | None  # total power sum K_j P_j; None when infeasible
    feasible: bool = True

    def to_json(self) -> str:
        return json.dumps(
            {
                "m": self.m,
                "K": list(self.k),
                "P": list(self.p),
                "P_T": self.p_t,
                "feasible": self.feasible,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "AllocationResult":
        raw = json.loads(text)
        return cls(
            m=int(raw["m"]),
            k=tuple(int(v) for v in raw["K"]),
            p=tuple(float(v) for v in raw["P"]),
            p_t=None if raw["P_T"] is None else float(raw["P_T"]),
            feasible=bool(raw["feasible"]),
        )

    @classmethod
    def infeasible(cls, m: int = 0) -> "AllocationResult":
        return cls(m=m, k=(), p=(), p_t=None, feasible=False)


def gamma(k, curve: AlphaCurve) -> float:
    """gamma = alpha / (1 - (K-1) alpha) at alpha = alpha_min(K).

    Group size k may be fractional (continuous relaxation during the
    group-count search). Raises InfeasibleGroupError when (K-1) alpha
    >= 1: treating K-1 same-power interferers as noise caps the SINR at
    1/(K-1) no matter how much power is spent.
    """
    if k < 1:
        raise ValueError(f"group size must be >= 1, got {k}")
    alpha = curve(k)
    denom = 1.0 - (k - 1.0) * alpha
    if denom <= 0.0:
        raise InfeasibleGroupError(
            f"(K-1)*alpha_min = {(k - 1.0) * alpha:.6g} >= 1 for K={k}"
        )
    return alpha / denom


def min_group_power(k, sigma2: float, curve: AlphaCurve) -> float:
    """Smallest power meeting the SINR target over noise-plus-
    interference floor sigma2: P = gamma(K) * sigma2."""
    if sigma2 < 1.0:
        raise ValueError(f"sigma2 includes the unit noise floor, got {sigma2}")
    return gamma(k, curve) * sigma2


def power_levels(group_sizes, curve: AlphaCurve) -> AllocationResult:
    """Per-group powers via the product recursion, lowest power first.

    Group 1 is decoded last and sees only noise (sigma_1^2 = 1); each
    later group additionally sees all earlier groups as interference.
    The result satisfies every group's SINR condition with equality.
    """
    sizes = [int(k) for k in group_sizes]
    if not sizes or any(k < 1 for k in sizes):
        raise ValueError(f"group sizes must be positive, got {group_sizes}")
    gammas = [gamma(k, curve) for k in sizes]
    powers: list[float] = []
    sigma2 = 1.0
    for k_j, g_j in zip(sizes, gammas):
        powers.append(g_j * sigma2)
        sigma2 *= 1.0 + k_j * g_j
    p_t = float(sum(k_j * p_j for k_j, p_j in zip(sizes, powers)))
    # self-check: realized SINR per group must equal the curve target
    floor = 1.0
    for k_j, p_j in zip(sizes, powers):
        sinr = p_j / (floor + (k_j - 1) * p_j)
        target = curve(k_j)
        if not math.isclose(sinr, target, rel_tol=1e-9):
            raise RuntimeError(
                f"SINR self-check failed: {sinr!r} vs target {target!r} for K={k_j}"
            )
        floor += k_j * p_j
    return AllocationResult(
        m=len(sizes),
        k=tuple(sizes),
        p=tuple(powers),
        p_t=p_t,
        feasible=True,
    )


def total_power(group_sizes, curve: AlphaCurve) -> float:
    """Total power in product form, prod(1 + K_j gamma_j) - 1."""
    sizes = [int(k) for k in group_sizes]
    if not sizes or any(k < 1 for k in sizes):
        raise ValueError(f"group sizes must be positive, got {group_sizes}")
    prod = 1.0
    for k_j in sizes:
        prod *= 1.0 + k_j * gamma(k_j, curve)
    return prod - 1.0


def brute_force_best_partition(k_a: int, m: int, curve: AlphaCurve) -> tuple[int, ...]:
    """Exhaustive minimizer of total power over ordered compositions.

    Oracle-sized only (K_a <= 40, m <= 4); ties break lexicographically.
    """
    if k_a > 40 or m > 4:
        raise ValueError(f"instance too large for brute force: K_a={k_a}, m={m}")
    if m < 1 or k_a < m:
        raise ValueError(f"need 1 <= m <= K_a, got m={m}, K_a={k_a}")

    best: tuple[float, tuple[int, ...]] | None = None

    def compositions(total: int, parts: int, prefix: tuple[int, ...]):
        if parts == 1:
            yield prefix + (total,)
            return
        for first in range(1, total - parts + 2):
            yield from compositions(total - first, parts - 1, prefix + (first,))

    for sizes in compositions(k_a, m, ()):
        try:
            p_t = total_power(sizes, curve)
        except InfeasibleGroupError:
            continue
        if best is None or p_t < best[0]:
            best = (p_t, sizes)
    if best is None:
        raise InfeasibleGroupError(f"no feasible composition of {k_a} into {m} groups")
    return best[1]


def hessian_check(group_sizes, curve: AlphaCurve) -> tuple[bool, np.ndarray]:
    """Diagonal curvature of the total-power product term.

    With alpha locally constant per group, gamma' = gamma^2 and
    gamma'' = 2 gamma^3, giving diagonal entries
    (P_T + 1)(K_j gamma'' + 2 gamma') / (1 + K_j gamma_j). All entries
    positive confirms the relaxed size optimization is convex.
    """
    sizes = [int(k) for k in group_sizes]
    gammas = np.array([gamma(k, curve) for k in sizes])
    k_arr = np.array(sizes, dtype=np.float64)
    prod = float(np.prod(1.0 + k_arr * gammas))  # = P_T + 1
    g1 = gammas**2
    g2 = 2.0 * gammas**3
    entries = prod * (k_arr * g2 + 2.0 * g1) / (1.0 + k_arr * gammas)
    return bool(np.all(entries > 0.0)), entries


def group_count_objective(
    k_a: int, m: int, curve: AlphaCurve, k_ref: float | None = None
) -> float:
    """(1 + K_a gamma_0 / m)^m with gamma_0 at K_0 = K_a/m (or at the
    fixed reference size k_ref when given)."""
    k_0 = k_a / m if k_ref is None else k_ref
    g_0 = gamma(k_0, curve)
    return (1.0 + k_a * g_0 / m) ** m


def optimize_group_count(
    k_a: int,
    curve: AlphaCurve,
    m_max: int,
    k_ref: float | None = None,
) -> AllocationResult:
    """Pick the group count minimizing the total-power objective.

    Scans m = 1..m_max with the continuous equal split K_0 = K_a/m,
    skipping infeasible counts, then materializes integer group sizes
    (equal split, remainder on the lowest-index groups) and their
    powers. Ties go to the smaller m.
    """
    if m_max < 1:
        raise ValueError(f"m_max must be >= 1, got {m_max}")
    if k_a < 1:
        raise ValueError(f"K_a must be >= 1, got {k_a}")
    best: tuple[float, int] | None = None
    for m in range(1, min(m_max, k_a) + 1):
        try:
            gamma(k_a / m, curve)  # the groups must be realizable either way
            obj = group_count_objective(k_a, m, curve, k_ref)
        except InfeasibleGroupError:
            continue
        if best is None or obj < best[0]:
            best = (obj, m)
    if best is None:
        raise InfeasibleGroupError(
            f"no feasible group count in 1..{m_max} for K_a={k_a}"
        )
    m = best[1]
    q, rem = divmod(k_a, m)
    sizes = [q + 1] * rem + [q] * (m - rem)
    return power_levels(sizes, curve)


def calibrate_alpha_min(
    k_0: int,
    sim_params,
    eps: float,
    trials: int,
    seed: int = 0,
    bracket: tuple[float, float] = (1e-4, 1e2),
    rel_tol: float = 0.05,
) -> float:
    """Measure alpha_min(K_0) by bisecting the common power.

    Simulates K_0 equal-power users (single group) through the full
    encode/decode chain, finds the smallest power P whose PUPE is <= eps
    (relative power tolerance ``rel_tol``), and converts via
    alpha = P / (1 + (K_0 - 1) P). The same seed ladder is reused at
    every probe so the power sweep sees common random numbers.
    """
    from .codebook import PowerProfile  # local: avoids an import cycle
    from .harness import estimate_pupe

    if not 0 < eps <= 1:
        raise ValueError(f"eps must be in (0,1], got {eps}")
    lo, hi = bracket
    if not 0 < lo < hi:
        raise ValueError(f"bad bracket {bracket}")
    params = _with_users(sim_params, k_0)

    def pupe_at(power: float) -> float:
        profile = PowerProfile(
            group_sizes=(2**params.b_s,), power_levels=(power,)
        )
        return estimate_pupe(params, profile, trials=trials, seed=seed).pupe

    if pupe_at(lo) <= eps:
        return lo / (1.0 + (k_0 - 1) * lo)
    if pupe_at(hi) > eps:
        raise CalibrationError(
            f"PUPE above eps={eps} even at the bracket top P={hi}"
        )
    while hi / lo > 1.0 + rel_tol:
        mid = math.sqrt(lo * hi)
        if pupe_at(mid) <= eps:
            hi = mid
        else:
            lo = mid
    return hi / (1.0 + (k_0 - 1) * hi)


def _with_users(params, k_0: int):
    import dataclasses

    return dataclasses.replace(params, k_a=k_0, k_t=max(params.k_t, k_0))


def calibrate_curve(
    k_list,
    sim_params,
    eps: float,
    trials: int,
    seed: int = 0,
) -> AlphaCurve:
    """Run calibrate_alpha_min over a ladder of group sizes."""
    ks = sorted(set(int(k) for k in k_list))
    alphas = [calibrate_alpha_min(k, sim_params, eps, trials, seed=seed) for k in ks]
    return AlphaCurve(
        k_values=tuple(float(k) for k in ks), alpha_values=tuple(alphas)
    )


def save_allocation(alloc: AllocationResult, path) -> None:
    Path(path).write_text(alloc.to_json() + "\n")


def load_allocation(path) -> AllocationResult:
    return AllocationResult.from_json(Path(path).read_text())
