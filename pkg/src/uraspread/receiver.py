"""Three-stage receiver: detect signatures, estimate symbols, cancel.

Per detection pass, the covariance statistic ||Y_res^T a_hat_j||^2 ranks
the unit-norm codebook columns and the top K_r + k_delta survive. Their
full-power columns feed a joint linear MMSE estimate of the symbol
matrix; each row's LLRs go to the CRC-aided list decoder, and every
payload that clears its CRC is re-encoded, re-spread, and subtracted
from the residual. The pass structure follows the decoder loop: an
inner sweep i = 0..m drops the i highest-power groups from detection
(their users are expected to be gone by then), restarting from i = 0
whenever anything new decodes, and the frame ends when a full sweep
decodes nothing or no users remain.

CRC gating means a falsely detected column is almost never subtracted,
so detection overshoot (k_delta) is cheap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .codebook import SignatureCodebook
from .polar import PolarCodeSpec, polar_encode, scl_decode_batch
from .sysparams import SystemParams

_DETECT_CHUNK = 8192  # columns per score block: keeps Y^T A tiles small


@dataclass(frozen=True)
class DetectionOutput:
    """Top-scoring columns of one detection pass."""

    indices: np.ndarray  # column indices, scores nonincreasing
    scores: np.ndarray  # matching ||Y_res^T a_hat_j||^2 values
    capped: bool  # True when fewer columns were available than asked


@dataclass(frozen=True)
class MmseOutput:
    """Joint symbol estimate for the detected signatures."""

    v_hat: np.ndarray  # (detected, n_c) symbol estimates
    sigma2: np.ndarray  # (detected,) per-row MSE, each in (0, 1]


@dataclass
class DecoderState:
    """Mutable bookkeeping of the cancellation loop."""

    y_res: np.ndarray  # residual frame, n_s x n_c
    k_r: int  # users believed still undecoded
    codebook: SignatureCodebook
    params: SystemParams
    code_spec: PolarCodeSpec
    flag: int = 1
    k_x: int = 0
    iterations: int = 0
    # (message int, column, power group) per accepted decode
    recovered: list[tuple[int, int, int]] = field(default_factory=list)
    available: np.ndarray = None  # bool mask, False once a column is used

    def __post_init__(self) -> None:
        if self.available is None:
            self.available = np.ones(self.codebook.n_columns, dtype=bool)


def bits_to_int(bits: np.ndarray) -> int:
    """Big-endian bit vector to arbitrary-precision int."""
    value = 0
    for b in np.asarray(bits).astype(np.int64):
        value = (value << 1) | int(b)
    return value


def int_to_bits(value: int, width: int) -> np.ndarray:
    """Inverse of :func:`bits_to_int`."""
    if value < 0 or value >> width:
        raise ValueError(f"{value} does not fit in {width} bits")
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.int8)


def pack_message(column: int, info_bits: np.ndarray) -> int:
    """Canonical message identity: preamble value then payload bits."""
    bits = np.asarray(info_bits)
    return (column << bits.shape[0]) | bits_to_int(bits)


def covariance_detect(
    y_res: np.ndarray, a_n_sub: np.ndarray, k_gamma: int
) -> DetectionOutput:
    """Rank columns by ||Y_res^T a_hat_j||^2 and keep the top k_gamma.

    Only the diagonal of the covariance statistic is ever formed, one
    column block at a time. Ties break toward the lower column index;
    if fewer than k_gamma columns exist the result is capped.
    """
    if k_gamma < 1:
        raise ValueError(f"k_gamma must be >= 1, got {k_gamma}")
    n_cols = a_n_sub.shape[1]
    scores = np.empty(n_cols)
    for start in range(0, n_cols, _DETECT_CHUNK):
        block = a_n_sub[:, start : start + _DETECT_CHUNK]
        g = block.T @ y_res
        scores[start : start + _DETECT_CHUNK] = np.einsum("ij,ij->i", g, g)
    keep = min(k_gamma, n_cols)
    order = np.lexsort((np.arange(n_cols), -scores))[:keep]
    return DetectionOutput(
        indices=order, scores=scores[order], capped=keep < k_gamma
    )


def mmse_estimate(a_d: np.ndarray, y_res: np.ndarray) -> MmseOutput:
    """Linear MMSE symbol estimates for the detected columns.

    Solves with C_y = I + A_D A_D^T (always SPD) rather than inverting:
    V_hat = A_D^T C_y^{-1} Y_res, and the error variances are the
    diagonal of I - A_D^T C_y^{-1} A_D.
    """
    if a_d.ndim != 2 or a_d.shape[1] == 0:
        raise ValueError("need at least one detected signature")
    n_s = a_d.shape[0]
    c_y = np.eye(n_s) + a_d @ a_d.T
    factor = cho_factor(c_y, lower=True)
    solved = cho_solve(factor, np.concatenate([y_res, a_d], axis=1))
    v_hat = a_d.T @ solved[:, : y_res.shape[1]]
    sigma2 = 1.0 - np.einsum("ij,ij->j", a_d, solved[:, y_res.shape[1] :])
    sigma2 = np.maximum(sigma2, 1e-15)  # exact value is in (0,1]; guard fp dust
    return MmseOutput(v_hat=v_hat, sigma2=sigma2)


def form_llrs(mmse_out: MmseOutput, row: int) -> np.ndarray:
    """LLRs for one detected row, d = 2 v_hat / sigma^2."""
    return 2.0 * mmse_out.v_hat[row] / mmse_out.sigma2[row]


def form_llrs_all(mmse_out: MmseOutput) -> np.ndarray:
    """LLR matrix for every detected row at once."""
    return 2.0 * mmse_out.v_hat / mmse_out.sigma2[:, None]


def sic_subtract(state: DecoderState, decoded) -> DecoderState:
    """Subtract re-encoded decoded messages from the residual.

    ``decoded`` holds (column, payload) pairs whose CRC already passed;
    columns must be distinct and not previously subtracted. Updates
    K_r, the recovered list, and the column availability in place.
    """
    pairs = list(decoded)
    cols = [c for c, _ in pairs]
    if len(set(cols)) != len(cols):
        raise ValueError(f"duplicate columns in one subtraction: {cols}")
    for c in cols:
        if not state.available[c]:
            raise ValueError(f"column {c} was already subtracted this frame")
    if len(pairs) > state.k_r:
        raise ValueError(f"cannot subtract {len(pairs)} messages with K_r={state.k_r}")
    spec = state.code_spec
    for column, payload in pairs:
        cw = polar_encode(np.asarray(payload, dtype=np.int8), spec)
        state.y_res -= np.outer(state.codebook.a[:, column], cw.symbols)
        state.available[column] = False
        msg = pack_message(column, np.asarray(payload)[: spec.info_len])
        state.recovered.append((msg, column, state.codebook.group_of(column)))
    state.k_r -= len(pairs)
    return state


def default_design_snr(profile, k_a: int) -> float:
    """Construction SNR for the polar code: the SINR the power layering
    grants the weakest group (its power over noise plus expected
    within-group interference), which is plain P_1 for a lone user."""
    k_1 = profile.expected_group_users(k_a)[0]
    p_1 = profile.power_levels[0]
    return p_1 / (1.0 + max(k_1 - 1.0, 0.0) * p_1)


def decode_frame(
    y: np.ndarray,
    codebook: SignatureCodebook,
    params: SystemParams,
    code_spec: PolarCodeSpec | None = None,
    trace: list | None = None,
    return_state: bool = False,
):
    """Run the full cancellation loop on one received frame.

    Returns the set of recovered messages (each packed as an int of the
    B message bits); with ``return_state`` the DecoderState comes along
    for diagnostics. ``trace``, when a list, collects one row per
    (iteration, inner pass): (iteration, i, K_r, K_x, detected count,
    decoded count, residual energy).
    """
    if code_spec is None:
        code_spec = PolarCodeSpec.construct(
            params.n_c,
            params.payload_len,
            default_design_snr(codebook.profile, params.k_a),
            crc_len=params.r,
            crc_poly=params.crc_poly,
        )
    state = DecoderState(
        y_res=np.array(y, dtype=np.float64, copy=True),
        k_r=params.k_a,
        codebook=codebook,
        params=params,
        code_spec=code_spec,
    )
    seen = set()
    m = codebook.profile.m

    while state.flag == 1:
        state.k_x = 0
        for i in range(m + 1):
            limit = codebook.columns_below_group(i)
            avail = np.flatnonzero(state.available[:limit])
            if avail.size == 0:
                if trace is not None:
                    trace.append(
                        (state.iterations + 1, i, state.k_r, state.k_x, 0, 0,
                         float(np.sum(state.y_res**2)))
                    )
                continue
            if avail.size == limit:
                sub = codebook.a_n[:, :limit]
            else:
                sub = codebook.a_n[:, avail]
            k_gamma = state.k_r + params.k_delta
            det = covariance_detect(state.y_res, sub, k_gamma)
            selected = avail[det.indices]

            mm = mmse_estimate(codebook.a[:, selected], state.y_res)
            payloads, ok = scl_decode_batch(
                form_llrs_all(mm), code_spec, params.list_size
            )

            # A strong codeword leaks onto correlated wrong columns and can
            # clear the CRC there too, so CRC passage alone does not prove
            # the signal is present at that column. Rank candidates by the
            # residual energy their hypothesis explains, <Y_res, a c^T>: a
            # true user outranks every leaked copy of it, and once it is
            # subtracted the copies no longer reduce the residual and fail
            # the acceptance check below.
            ranked = []
            for row in range(selected.size):
                if not ok[row]:
                    continue
                column = int(selected[row])
                cw = polar_encode(np.asarray(payloads[row], dtype=np.int8), code_spec)
                col_vec = codebook.a[:, column]
                corr = float(col_vec @ state.y_res @ cw.symbols)
                ranked.append((corr, row, column, cw))
            ranked.sort(key=lambda t: -t[0])

            n_accepted = 0
            for _, row, column, cw in ranked:
                if state.k_r == 0:
                    break
                key = payloads[row][: code_spec.info_len].tobytes()
                if key in seen:
                    continue
                col_vec = codebook.a[:, column]
                corr = float(col_vec @ state.y_res @ cw.symbols)
                energy = float(col_vec @ col_vec) * cw.symbols.size
                if 2.0 * corr <= energy:
                    continue
                seen.add(key)
                sic_subtract(state, [(column, payloads[row])])
                n_accepted += 1
            state.k_x += n_accepted
            if trace is not None:
                trace.append(
                    (state.iterations + 1, i, state.k_r, state.k_x,
                     int(selected.size), n_accepted,
                     float(np.sum(state.y_res**2)))
                )
            if state.k_x >= 1:
                break
        state.iterations += 1
        if state.k_x == 0 or state.k_r == 0:
            state.flag = 0

    messages = {msg for msg, _, _ in state.recovered}
    return (messages, state) if return_state else messages


def count_mults_covariance(n_s: int, n_c: int, b_s: int) -> int:
    """Multiplications to form the detection statistic once:
    n_s^2 n_c + 2^B_s n_s^2 + 2^B_s n_s."""
    return n_s * n_s * n_c + (1 << b_s) * n_s * n_s + (1 << b_s) * n_s


def count_mults_energy(n_s: int, n_c: int, b_s: int, g: int) -> int:
    """Multiplications of the reference energy detector, n_s n_c 2^(g+B_s)."""
    return n_s * n_c * (1 << (g + b_s))
