"""Unsourced random access over a Gaussian MAC with grouped-power
random spreading, CRC-aided polar coding, and MMSE/SIC reception."""

from .channel import average_power, gmac_superpose, spread, to_frame
from .codebook import (
    PowerProfile,
    SignatureCodebook,
    column_for_preamble,
    generate_codebook,
    preamble_for_column,
    profile_from_allocation,
)
from .harness import (
    BracketError,
    PupeEstimate,
    TrialOutcome,
    estimate_pupe,
    find_min_ebno,
    profile_ebno_db,
    run_trial,
    scale_for_ebno_db,
    trial_seed,
)
from .polar import (
    Codeword,
    PolarCodeSpec,
    construct_frozen_set,
    crc_append,
    crc_check,
    polar_encode,
    polar_transform,
    save_frozen_set,
    scl_decode,
    scl_decode_batch,
)
from .powalloc import (
    AllocationResult,
    AlphaCurve,
    CalibrationError,
    InfeasibleGroupError,
    brute_force_best_partition,
    calibrate_alpha_min,
    calibrate_curve,
    gamma,
    group_count_objective,
    hessian_check,
    load_allocation,
    min_group_power,
    optimize_group_count,
    power_levels,
    save_allocation,
    total_power,
)
from .receiver import (
    DecoderState,
    DetectionOutput,
    MmseOutput,
    bits_to_int,
    count_mults_covariance,
    count_mults_energy,
    covariance_detect,
    decode_frame,
    default_design_snr,
    form_llrs,
    form_llrs_all,
    int_to_bits,
    mmse_estimate,
    pack_message,
    sic_subtract,
)
from .sysparams import (
    SystemParams,
    collision_bound,
    energy_per_bit,
    energy_per_bit_db,
    load_config,
    select_bs,
)

__version__ = "0.1.0"
