"""Monte Carlo harness: trials, PUPE estimation, operating-point search.

A trial draws fresh messages, a fresh codebook, and fresh noise from a
counter-derived seed, runs the full transmit/receive chain, and scores
the per-user error as the fraction of transmitted message contents
absent from the decoder's output list. Everything is deterministic
given (params, profile, power scale, master seed); trial t of a batch
can be reproduced in isolation from (master seed, t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import average_power, to_frame
from .codebook import PowerProfile, generate_codebook
from .polar import PolarCodeSpec, polar_transform
from .receiver import decode_frame, default_design_snr, pack_message
from .sysparams import SystemParams, energy_per_bit, energy_per_bit_db


class BracketError(RuntimeError):
    """The power walk never crossed the PUPE target."""


@dataclass(frozen=True)
class TrialOutcome:
    """Scoreboard of one simulated frame."""

    transmitted: tuple[int, ...]  # K_a messages as B-bit ints
    recovered: frozenset[int]  # decoder output list
    missed: int  # transmitted contents absent from recovered
    false_positives: tuple[int, ...]  # recovered but never transmitted
    iterations: int  # cancellation outer-loop count


@dataclass(frozen=True)
class PupeEstimate:
    """Aggregated per-user error probability over a trial batch."""

    pupe: float
    ci95: float  # normal-approximation half-width
    trials: int
    seed: int
    false_positives: float  # mean count per trial, not part of pupe


def trial_seed(master_seed: int, trial: int) -> np.random.SeedSequence:
    """Counter-based per-trial seed; trial t is reproducible alone."""
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(trial,))


def scale_for_ebno_db(params: SystemParams, profile: PowerProfile, ebno_db: float) -> float:
    """Joint power multiplier that puts the profile at a given E_b/N_0."""
    base = energy_per_bit(average_power(profile, params.n_s), params.n, params.b)
    return 10.0 ** (ebno_db / 10.0) / base


def profile_ebno_db(
    params: SystemParams, profile: PowerProfile, power_scale: float = 1.0
) -> float:
    """E_b/N_0 (dB) of the profile scaled by ``power_scale``."""
    return energy_per_bit_db(
        power_scale * average_power(profile, params.n_s), params.n, params.b
    )


def _build_code_spec(
    params: SystemParams, profile: PowerProfile
) -> PolarCodeSpec:
    return PolarCodeSpec.construct(
        params.n_c,
        params.payload_len,
        default_design_snr(profile, params.k_a),
        crc_len=params.r,
        crc_poly=params.crc_poly,
    )


def run_trial(
    params: SystemParams,
    profile: PowerProfile,
    power_scale: float = 1.0,
    seed=0,
    *,
    ebno_db: float | None = None,
    noise_on: bool = True,
    code_spec: PolarCodeSpec | None = None,
    trace: list | None = None,
) -> TrialOutcome:
    """Simulate one frame end to end.

    The operating point is the profile with all P_k jointly multiplied
    by ``power_scale`` (or placed at ``ebno_db`` when given). A scale of
    exactly 0 sends nothing while the receiver keeps the base-profile
    codebook, so the frame is pure noise from the decoder's view.
    """
    if ebno_db is not None:
        power_scale = scale_for_ebno_db(params, profile, ebno_db)
    if power_scale < 0:
        raise ValueError(f"power scale must be >= 0, got {power_scale}")
    silent = power_scale == 0.0
    tx_profile = profile if silent else profile.scaled(power_scale)
    if code_spec is None:
        code_spec = _build_code_spec(params, tx_profile)

    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    cb_ss, msg_ss, noise_ss = ss.spawn(3)
    codebook = generate_codebook(params.n_s, params.b_s, tx_profile, cb_ss)

    rng = np.random.default_rng(msg_ss)
    bits = rng.integers(0, 2, size=(params.k_a, params.b), dtype=np.int8)
    weights = 1 << np.arange(params.b_s - 1, -1, -1, dtype=np.int64)
    columns = bits[:, : params.b_s].astype(np.int64) @ weights
    info = bits[:, params.b_s :]

    # batch encode: CRC via the parity matrix, then the polar transform
    crc = (info.astype(np.int64) @ code_spec.crc_mat.astype(np.int64) & 1).astype(np.int8)
    u = np.zeros((params.k_a, params.n_c), dtype=np.int8)
    u[:, code_spec.info_set] = np.concatenate([info, crc], axis=1)
    symbols = 1.0 - 2.0 * polar_transform(u).astype(np.float64)

    y = np.zeros((params.n_s, params.n_c))
    if not silent:
        y = codebook.a[:, columns] @ symbols
    if noise_on:
        noise_rng = np.random.default_rng(noise_ss)
        y = y + to_frame(noise_rng.standard_normal(params.n), params.n_s, params.n_c)

    recovered, state = decode_frame(
        y, codebook, params, code_spec=code_spec, trace=trace, return_state=True
    )

    transmitted = tuple(
        pack_message(int(columns[i]), info[i]) for i in range(params.k_a)
    )
    content = set(transmitted)
    return TrialOutcome(
        transmitted=transmitted,
        recovered=frozenset(recovered),
        missed=len(content - recovered),
        false_positives=tuple(sorted(recovered - content)),
        iterations=state.iterations,
    )


def estimate_pupe(
    params: SystemParams,
    profile: PowerProfile,
    power_scale: float = 1.0,
    trials: int = 100,
    seed: int = 0,
    *,
    ebno_db: float | None = None,
    noise_on: bool = True,
    trace: list | None = None,
) -> PupeEstimate:
    """Mean missed fraction over independent trials with a 95% CI."""
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")
    if ebno_db is not None:
        power_scale = scale_for_ebno_db(params, profile, ebno_db)
    silent = power_scale == 0.0
    code_spec = _build_code_spec(
        params, profile if silent else profile.scaled(power_scale)
    )
    fractions = np.empty(trials)
    fp = 0
    for t in range(trials):
        outcome = run_trial(
            params,
            profile,
            power_scale,
            trial_seed(seed, t),
            noise_on=noise_on,
            code_spec=code_spec,
            trace=trace,
        )
        fractions[t] = outcome.missed / params.k_a
        fp += len(outcome.false_positives)
    pupe = float(fractions.mean())
    ci95 = 0.0 if trials == 1 else float(1.96 * fractions.std(ddof=1) / math.sqrt(trials))
    return PupeEstimate(
        pupe=pupe, ci95=ci95, trials=trials, seed=seed, false_positives=fp / trials
    )


def find_min_ebno(
    params: SystemParams,
    profile_builder,
    eps: float | None = None,
    trials: int = 100,
    tol_db: float = 0.25,
    seed: int = 0,
    *,
    noise_on: bool = True,
    scale_limits: tuple[float, float] = (2.0**-20, 2.0**20),
) -> float:
    """Smallest E_b/N_0 (dB) with PUPE <= eps, to tol_db resolution.

    ``profile_builder`` is either a PowerProfile (every P_k is scaled
    jointly) or a callable scale -> PowerProfile. The search walks the
    scale in factors of two to bracket the target, then bisects in log
    scale; every probe reuses the same seed ladder (common random
    numbers), so the result is deterministic.
    """
    if eps is None:
        eps = params.eps
    builder = profile_builder if callable(profile_builder) else profile_builder.scaled

    def pupe(scale: float) -> float:
        return estimate_pupe(
            params, builder(scale), trials=trials, seed=seed, noise_on=noise_on
        ).pupe

    def ebno(scale: float) -> float:
        return profile_ebno_db(params, builder(scale))

    lo_limit, hi_limit = scale_limits
    if pupe(1.0) <= eps:
        hi = 1.0
        lo = None
        while hi / 2.0 >= lo_limit:
            cand = hi / 2.0
            if pupe(cand) <= eps:
                hi = cand
            else:
                lo = cand
                break
        if lo is None:
            return ebno(hi)  # passes all the way down to the bracket floor
    else:
        lo = 1.0
        hi = None
        while lo * 2.0 <= hi_limit:
            cand = lo * 2.0
            if pupe(cand) <= eps:
                hi = cand
                break
            lo = cand
        if hi is None:
            raise BracketError(
                f"PUPE stayed above eps={eps} up to power scale {lo:g}"
            )

    while 10.0 * math.log10(hi / lo) > tol_db:
        mid = math.sqrt(lo * hi)
        if pupe(mid) <= eps:
            hi = mid
        else:
            lo = mid
    return ebno(hi)
