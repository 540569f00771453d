"""System-level parameters for the grouped random-spreading link.

Holds the frame geometry (spreading length, polar block length), the
message split between signature selection bits and coded payload bits,
and the Monte Carlo bookkeeping knobs. Everything is validated eagerly
so a bad configuration fails at construction, not mid-simulation.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - py310 fallback
    import tomli as tomllib


def select_bs(k_a: int) -> int:
    """Pick the signature-bit budget B_s for a given active-user count.

    Parameters
    ----------
    k_a : int
        Number of active users.

    Returns
    -------
    int
        Signature bits B_s; the codebook then has 2**B_s columns.

    Raises
    ------
    ValueError
        If ``k_a`` is outside the tabulated range [150, 600]; set
        ``B_s`` explicitly in that case.
    """
    if 150 <= k_a < 200:
        return 14
    if 200 <= k_a <= 250:
        return 15
    if 250 < k_a <= 350:
        return 16
    if 350 < k_a <= 500:
        return 17
    if 500 < k_a <= 600:
        return 18
    raise ValueError(
        f"no tabulated B_s for K_a={k_a}; supported range is [150, 600], "
        "pass an explicit B_s instead"
    )


def collision_bound(k_a: int, b_s: int) -> float:
    """Union bound on the probability that a given user shares its
    signature column with at least one other active user."""
    if k_a < 1:
        raise ValueError(f"K_a must be >= 1, got {k_a}")
    if b_s < 1:
        raise ValueError(f"B_s must be >= 1, got {b_s}")
    return (k_a - 1) / 2.0**b_s


def energy_per_bit(p_avg: float, n: int, b: int) -> float:
    """E_b/N_0 (linear) for average symbol power ``p_avg`` over ``n``
    real channel uses carrying ``b`` message bits, with unit-variance
    real noise (N_0 = 2)."""
    if n <= 0:
        raise ValueError(f"n must be positive, got {n}")
    if b <= 0:
        raise ValueError(f"B must be positive, got {b}")
    if p_avg < 0:
        raise ValueError(f"P_avg must be nonnegative, got {p_avg}")
    return n * p_avg / (2.0 * b)


def energy_per_bit_db(p_avg: float, n: int, b: int) -> float:
    """Same as :func:`energy_per_bit` but in dB."""
    ebn0 = energy_per_bit(p_avg, n, b)
    if ebn0 <= 0:
        raise ValueError("E_b/N_0 is zero; dB undefined")
    return 10.0 * math.log10(ebn0)


@dataclass(frozen=True)
class SystemParams:
    """Frame geometry and simulation knobs, validated on construction."""

    k_a: int  # active users in the frame
    b: int  # message bits per user, B = B_s + B_c
    n_s: int  # spreading sequence length (chips per coded symbol)
    n_c: int  # polar block length, power of two
    list_size: int  # SCL decoder list size L, power of two
    b_s: int | None = None  # signature bits; None -> select_bs(k_a)
    k_t: int | None = None  # total user population; None -> k_a
    r: int = 11  # CRC bits appended to the payload
    crc_poly: int = 0xE21  # CRC generator, bit i = coefficient of x^i
    eps: float = 0.05  # target per-user error probability
    k_delta: int = 10  # detector margin: detect K_r + k_delta columns
    seed: int = 0  # master seed for reproducible runs

    def __post_init__(self) -> None:
        if self.b_s is None:
            object.__setattr__(self, "b_s", select_bs(self.k_a))
        if self.k_t is None:
            object.__setattr__(self, "k_t", self.k_a)
        if self.k_a < 1:
            raise ValueError(f"K_a must be >= 1, got {self.k_a}")
        if self.k_t < self.k_a:
            raise ValueError(f"K_T={self.k_t} smaller than K_a={self.k_a}")
        if self.n_s < 1:
            raise ValueError(f"n_s must be >= 1, got {self.n_s}")
        if self.n_c < 2 or self.n_c & (self.n_c - 1):
            raise ValueError(f"n_c must be a power of two >= 2, got {self.n_c}")
        if self.list_size < 1 or self.list_size & (self.list_size - 1):
            raise ValueError(f"list size must be a power of two, got {self.list_size}")
        if not 0 < self.b_s < self.b:
            raise ValueError(f"need 0 < B_s < B, got B_s={self.b_s}, B={self.b}")
        if self.r < 0:
            raise ValueError(f"CRC length must be >= 0, got {self.r}")
        if self.r and self.crc_poly >> self.r != 1:
            raise ValueError(
                f"crc_poly=0x{self.crc_poly:X} is not a degree-{self.r} polynomial"
            )
        if not self.b_c + self.r < self.n_c:
            raise ValueError(
                f"payload B_c + r = {self.b_c + self.r} must be < n_c = {self.n_c}"
            )
        if 2**self.b_s < self.k_a:
            raise ValueError(
                f"codebook with 2^{self.b_s} columns cannot serve K_a={self.k_a}"
            )
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must be in (0, 1), got {self.eps}")
        if self.k_delta < 0:
            raise ValueError(f"k_delta must be >= 0, got {self.k_delta}")

    @property
    def b_c(self) -> int:
        """Coded payload bits, B_c = B - B_s."""
        return self.b - self.b_s

    @property
    def n(self) -> int:
        """Real channel uses per frame, n = n_s * n_c."""
        return self.n_s * self.n_c

    @property
    def payload_len(self) -> int:
        """Polar information length k = B_c + r (payload plus CRC)."""
        return self.b_c + self.r


_CONFIG_KEYS = {f.name for f in dataclasses.fields(SystemParams)}


def load_config(path: str | Path, seed: int | None = None) -> SystemParams:
    """Load :class:`SystemParams` from a JSON or TOML file.

    Keys must match the field names exactly; unknown keys are rejected.
    ``seed`` (e.g. from a command-line flag) overrides the file's value.
    """
    path = Path(path)
    if path.suffix.lower() == ".json":
        raw = json.loads(path.read_text())
    elif path.suffix.lower() == ".toml":
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    else:
        raise ValueError(f"config must be .json or .toml, got {path.name}")
    if not isinstance(raw, dict):
        raise ValueError(f"config root must be a table/object, got {type(raw)}")
    unknown = sorted(set(raw) - _CONFIG_KEYS)
    if unknown:
        raise ValueError(f"unknown config keys {unknown}; valid: {sorted(_CONFIG_KEYS)}")
    params = SystemParams(**raw)
    if seed is not None:
        params = dataclasses.replace(params, seed=seed)
    return params
