"""CRC-aided polar coding for the payload bits of each user.

The code is an (n_c, k) polar code in natural order: the encoder applies
the iterated 2x2 kernel x = u F^(kron n) without any bit-reversal
permutation, so for n_c = 2 the codeword is (u1 xor u2, u2). The frozen
set comes from density evolution under the Gaussian approximation at a
configurable design SNR. Decoding is successive-cancellation list (SCL)
with the CRC selecting the winning path; a frame whose final list holds
no CRC-passing path is reported as a failure, which the interference
canceller uses to skip subtraction.

All decode paths are vectorized: the decoder works on a batch of LLR
rows at once (one per detected signature) with the list dimension as an
array axis, so a whole detection pass decodes in a handful of numpy
calls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# LLR magnitudes beyond this add nothing to path selection and can
# overflow the exponential-domain interpretations; clamp at the door.
LLR_CLAMP = 40.0

_GA_M_MAX = 1.0e6  # cap on evolved LLR means
_GA_CROSS = 10.0  # seam between the two phi approximations


# ---- CRC ----------------------------------------------------------------


def crc_remainder(bits: np.ndarray, poly: int, r: int) -> np.ndarray:
    """Remainder of bits * x^r modulo the generator polynomial.

    Parameters
    ----------
    bits : array of 0/1, most significant (first transmitted) bit first.
    poly : generator polynomial; bit i is the coefficient of x^i and the
        leading x^r term must be present.
    r : CRC length in bits.
    """
    if r == 0:
        return np.zeros(0, dtype=np.int8)
    if poly >> r != 1:
        raise ValueError(f"poly=0x{poly:X} is not a degree-{r} polynomial")
    mask = (1 << r) - 1
    tap = poly & mask
    reg = 0
    for b in np.asarray(bits).astype(np.int64):
        top = ((reg >> (r - 1)) & 1) ^ int(b)
        reg = (reg << 1) & mask
        if top:
            reg ^= tap
    out = [(reg >> (r - 1 - i)) & 1 for i in range(r)]
    return np.array(out, dtype=np.int8)


def _crc_matrix(info_len: int, poly: int, r: int) -> np.ndarray:
    # CRC is linear over GF(2): precompute remainders of the unit vectors
    # so batch checking reduces to one matmul mod 2.
    g = np.zeros((info_len, r), dtype=np.uint8)
    for i in range(info_len):
        e = np.zeros(info_len, dtype=np.int8)
        e[i] = 1
        g[i] = crc_remainder(e, poly, r)
    return g


# ---- code specification --------------------------------------------------


@dataclass(frozen=True)
class PolarCodeSpec:
    """Immutable description of one CRC-aided polar code."""

    n_c: int  # block length, power of two
    k: int  # information length including CRC bits
    frozen_set: np.ndarray  # sorted indices of the n_c - k frozen positions
    info_set: np.ndarray  # sorted complement of frozen_set
    crc_poly: int
    crc_len: int
    design_snr: float  # linear symbol SNR used by the construction
    crc_mat: np.ndarray = field(repr=False)  # (k - crc_len, r) parity matrix

    @classmethod
    def construct(
        cls,
        n_c: int,
        k: int,
        design_snr: float,
        crc_len: int = 11,
        crc_poly: int = 0xE21,
    ) -> "PolarCodeSpec":
        """Build the frozen set at ``design_snr`` and precompute the CRC
        parity matrix. ``k`` counts information plus CRC bits."""
        if crc_len < 0 or crc_len >= k:
            raise ValueError(f"need 0 <= crc_len < k, got crc_len={crc_len}, k={k}")
        frozen = construct_frozen_set(n_c, k, design_snr)
        info = np.setdiff1d(np.arange(n_c), frozen)
        crc_mat = _crc_matrix(k - crc_len, crc_poly, crc_len)
        return cls(
            n_c=n_c,
            k=k,
            frozen_set=frozen,
            info_set=info,
            crc_poly=crc_poly,
            crc_len=crc_len,
            design_snr=design_snr,
            crc_mat=crc_mat,
        )

    @property
    def info_len(self) -> int:
        """Payload bits before the CRC, B_c."""
        return self.k - self.crc_len


@dataclass(frozen=True)
class Codeword:
    """Encoded block: bits and their antipodal symbols (1 - 2*bit)."""

    bits: np.ndarray  # (n_c,) int8 in {0, 1}
    symbols: np.ndarray  # (n_c,) float64 in {+1.0, -1.0}

    def __post_init__(self) -> None:
        if not np.array_equal(self.symbols, 1.0 - 2.0 * self.bits):
            raise ValueError("symbols must equal 1 - 2*bits elementwise")


# ---- construction (Gaussian-approximation density evolution) -------------


def _phi(m: np.ndarray) -> np.ndarray:
    # E[tanh(x/2)] complement for x ~ N(m, 2m); standard two-piece fit.
    m = np.asarray(m, dtype=np.float64)
    out = np.empty_like(m)
    lo = m <= _GA_CROSS
    out[lo] = np.exp(-0.4527 * np.power(m[lo], 0.859) + 0.0218)
    hi = ~lo
    mh = m[hi]
    out[hi] = np.sqrt(np.pi / mh) * np.exp(-mh / 4.0) * (1.0 - 10.0 / (7.0 * mh))
    return np.minimum(out, 1.0)


_PHI_AT_CROSS = float(np.exp(-0.4527 * _GA_CROSS**0.859 + 0.0218))


def _phi_inv(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    out = np.empty_like(y)
    mid = y >= _PHI_AT_CROSS
    ym = np.minimum(y[mid], 1.0 - 1e-16)
    out[mid] = np.power((0.0218 - np.log(ym)) / 0.4527, 1.0 / 0.859)
    tail = ~mid
    if np.any(tail):
        # phi is strictly decreasing above the seam; bisect.
        lo = np.full(tail.sum(), _GA_CROSS)
        hi = np.full(tail.sum(), _GA_M_MAX)
        yt = y[tail]
        for _ in range(80):
            mid_m = 0.5 * (lo + hi)
            too_low = _phi(mid_m) > yt  # phi too large -> mean too small
            lo = np.where(too_low, mid_m, lo)
            hi = np.where(too_low, hi, mid_m)
        out[tail] = 0.5 * (lo + hi)
    return out


def construct_frozen_set(n_c: int, k: int, design_snr: float) -> np.ndarray:
    """Frozen positions of the (n_c, k) code at a linear design SNR.

    Evolves the mean channel LLR through the kernel tree (check branch
    first within each split, matching the natural-order encoder) and
    freezes the n_c - k least reliable positions. Deterministic; ties go
    to the lower index.
    """
    if n_c < 2 or n_c & (n_c - 1):
        raise ValueError(f"n_c must be a power of two >= 2, got {n_c}")
    if not 0 < k <= n_c:
        raise ValueError(f"need 0 < k <= n_c, got k={k}, n_c={n_c}")
    if design_snr <= 0:
        raise ValueError(f"design_snr must be positive, got {design_snr}")
    means = np.array([2.0 * design_snr])
    for _ in range(n_c.bit_length() - 1):
        p = _phi(means)
        worse = np.minimum(_phi_inv(p * (2.0 - p)), means)  # check branch
        better = np.minimum(2.0 * means, _GA_M_MAX)  # variable branch
        means = np.stack([worse, better], axis=-1).ravel()
    order = np.argsort(means, kind="stable")  # ascending reliability
    return np.sort(order[: n_c - k])


def save_frozen_set(spec: PolarCodeSpec, path) -> None:
    """Write the frozen indices one per line (cross-check format)."""
    np.savetxt(path, spec.frozen_set, fmt="%d")


# ---- encoding -------------------------------------------------------------


def polar_transform(bits: np.ndarray) -> np.ndarray:
    """Apply x = u F^(kron n) in place-free natural order.

    Accepts (..., n_c) arrays of 0/1 and transforms the last axis.
    """
    x = np.array(bits, dtype=np.int8, copy=True)
    n_c = x.shape[-1]
    if n_c & (n_c - 1):
        raise ValueError(f"block length must be a power of two, got {n_c}")
    lead = x.shape[:-1]
    h = 1
    while h < n_c:
        v = x.reshape(*lead, n_c // (2 * h), 2, h)
        v[..., 0, :] ^= v[..., 1, :]
        h *= 2
    return x


def crc_append(info_bits: np.ndarray, spec: PolarCodeSpec) -> np.ndarray:
    """Append the CRC remainder: B_c bits in, B_c + r bits out."""
    info_bits = np.asarray(info_bits, dtype=np.int8)
    if info_bits.shape != (spec.info_len,):
        raise ValueError(
            f"expected {spec.info_len} info bits, got shape {info_bits.shape}"
        )
    rem = crc_remainder(info_bits, spec.crc_poly, spec.crc_len)
    return np.concatenate([info_bits, rem])


def crc_check(payload: np.ndarray, spec: PolarCodeSpec) -> bool:
    """True when the trailing r bits match the CRC of the leading bits."""
    payload = np.asarray(payload, dtype=np.int8)
    if payload.shape != (spec.k,):
        raise ValueError(f"expected {spec.k} payload bits, got {payload.shape}")
    if spec.crc_len == 0:
        return True
    rem = crc_remainder(payload[: spec.info_len], spec.crc_poly, spec.crc_len)
    return bool(np.array_equal(rem, payload[spec.info_len :]))


def polar_encode(payload: np.ndarray, spec: PolarCodeSpec) -> Codeword:
    """Encode k payload bits (info + CRC) into a Codeword.

    Payload lands on the non-frozen positions in index order; frozen
    positions carry zeros.
    """
    payload = np.asarray(payload, dtype=np.int8)
    if payload.shape != (spec.k,):
        raise ValueError(f"expected {spec.k} payload bits, got {payload.shape}")
    u = np.zeros(spec.n_c, dtype=np.int8)
    u[spec.info_set] = payload
    bits = polar_transform(u)
    return Codeword(bits=bits, symbols=1.0 - 2.0 * bits.astype(np.float64))


# ---- SCL decoding ----------------------------------------------------------


def _f(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sign(a) * np.sign(b) * np.minimum(np.abs(a), np.abs(b))


def _g(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    return b + (1.0 - 2.0 * c) * a


def scl_decode_batch(
    llrs: np.ndarray, spec: PolarCodeSpec, list_size: int
) -> tuple[np.ndarray, np.ndarray]:
    """List-decode a batch of LLR rows.

    Parameters
    ----------
    llrs : (rows, n_c) channel LLRs (positive favors bit 0).
    spec : code description.
    list_size : L, a power of two.

    Returns
    -------
    payloads : (rows, k) int8 array; row r is the lowest-metric
        CRC-passing path of row r (undefined bits when ok[r] is False).
    ok : (rows,) bool; False marks rows where no path passed the CRC.
    """
    if list_size < 1 or list_size & (list_size - 1):
        raise ValueError(f"list size must be a power of two, got {list_size}")
    llrs = np.atleast_2d(np.asarray(llrs, dtype=np.float64))
    if llrs.shape[1] != spec.n_c:
        raise ValueError(f"expected {spec.n_c} LLRs per row, got {llrs.shape[1]}")
    rows = llrs.shape[0]
    n_c, big_l = spec.n_c, list_size
    n = n_c.bit_length() - 1

    frozen_mask = np.zeros(n_c, dtype=bool)
    frozen_mask[spec.frozen_set] = True

    llr = np.zeros((rows, big_l, n + 1, n_c))
    llr[:, :, n, :] = np.clip(llrs, -LLR_CLAMP, LLR_CLAMP)[:, None, :]
    ps = np.zeros((rows, big_l, n + 1, n_c), dtype=np.int8)
    u = np.zeros((rows, big_l, n_c), dtype=np.int8)
    pm = np.full((rows, big_l), np.inf)
    pm[:, 0] = 0.0

    for i in range(n_c):
        top = n - 1 if i == 0 else (i & -i).bit_length() - 1
        for s in range(top, -1, -1):
            h = 1 << s
            parent = (i >> (s + 1)) << (s + 1)
            child = (i >> s) << s  # == parent for f, parent + h for g
            a = llr[:, :, s + 1, parent : parent + h]
            b = llr[:, :, s + 1, parent + h : parent + 2 * h]
            if (i >> s) & 1 == 0:
                llr[:, :, s, child : child + h] = _f(a, b)
            else:
                c = ps[:, :, s, parent : parent + h]
                llr[:, :, s, child : child + h] = _g(a, b, c)
        d = llr[:, :, 0, i]

        if frozen_mask[i]:
            pm = pm + np.maximum(0.0, -d)
            ps[:, :, 0, i] = 0
        else:
            cand = np.concatenate(
                [pm + np.maximum(0.0, -d), pm + np.maximum(0.0, d)], axis=1
            )
            order = np.argsort(cand, axis=1, kind="stable")[:, :big_l]
            parent = order % big_l
            bit = (order // big_l).astype(np.int8)
            idx = parent[:, :, None, None]
            llr = np.take_along_axis(llr, idx, axis=1)
            ps = np.take_along_axis(ps, idx, axis=1)
            u = np.take_along_axis(u, parent[:, :, None], axis=1)
            pm = np.take_along_axis(cand, order, axis=1)
            u[:, :, i] = bit
            ps[:, :, 0, i] = bit

        ii, s = i, 0
        while ii & 1 and s < n:
            h = 1 << s
            start = (ii >> 1) << (s + 1)
            left = ps[:, :, s, start : start + h]
            right = ps[:, :, s, start + h : start + 2 * h]
            ps[:, :, s + 1, start : start + h] = left ^ right
            ps[:, :, s + 1, start + h : start + 2 * h] = right
            ii >>= 1
            s += 1

    payloads = u[:, :, spec.info_set]  # (rows, L, k)
    if spec.crc_len:
        info = payloads[:, :, : spec.info_len].astype(np.int64)
        want = info @ spec.crc_mat.astype(np.int64) & 1
        ok_path = np.all(want == payloads[:, :, spec.info_len :], axis=2)
    else:
        ok_path = np.ones((rows, big_l), dtype=bool)
    ok_path &= np.isfinite(pm)

    masked = np.where(ok_path, pm, np.inf)
    best = np.argmin(masked, axis=1)  # first minimum: lower path index wins
    ok = np.take_along_axis(ok_path, best[:, None], axis=1)[:, 0]
    out = np.take_along_axis(payloads, best[:, None, None], axis=1)[:, 0, :]
    return np.ascontiguousarray(out), ok


def scl_decode(
    llrs: np.ndarray, spec: PolarCodeSpec, list_size: int
) -> np.ndarray | None:
    """Decode one LLR row; None signals that no list path passed the CRC."""
    payloads, ok = scl_decode_batch(np.asarray(llrs)[None, :], spec, list_size)
    return payloads[0] if ok[0] else None
