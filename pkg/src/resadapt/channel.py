"""Uplink channel realizations, per-UE power control, antenna selection and
channel estimation.

Two channel models are provided: a single-path line-of-sight model on a
half-wavelength uniform linear array, and i.i.d. Rayleigh fading for rich
scattering. Both return the raw matrix; power control and SNR normalization
are separate steps so that each can be tested in isolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DegenerateChannelError

CHANNEL_KINDS = ("los-ula", "iid-rayleigh")
CSI_MODES = ("perfect", "ls-pilot")

MAX_ANGLE_ATTEMPTS = 10_000


@dataclass(frozen=True)
class ChannelModelSpec:
    kind: str = "los-ula"
    sector: tuple[float, float] = (-60.0, 60.0)
    min_separation: float = 1.0
    distance_range: tuple[float, float] = (10.0, 100.0)
    pathloss_exponent: float = 2.0
    wavelength_spacing: float = 0.5

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ConfigError(f"unknown channel kind {self.kind!r}; expected one of {CHANNEL_KINDS}")
        lo, hi = self.sector
        if not (-90.0 <= lo < hi <= 90.0):
            raise ConfigError(f"sector {self.sector} must be an increasing interval within [-90, 90] degrees")
        if not self.min_separation > 0:
            raise ConfigError("min_separation must be positive")
        dmin, dmax = self.distance_range
        if not (0 < dmin <= dmax):
            raise ConfigError(f"distance_range {self.distance_range} must be positive and ordered")
        if self.pathloss_exponent < 0:
            raise ConfigError("pathloss_exponent must be non-negative")
        if not self.wavelength_spacing > 0:
            raise ConfigError("wavelength_spacing must be positive")

    @property
    def sector_width(self) -> float:
        return self.sector[1] - self.sector[0]


@dataclass(frozen=True)
class ChannelRealization:
    """Channel matrix ``H`` (B x U), per-UE transmit power scales and the
    1-based inclusive active antenna interval."""

    H: np.ndarray
    sigma2_u: np.ndarray = field(default=None)
    active_range: tuple[int, int] = field(default=None)

    def __post_init__(self):
        H = np.asarray(self.H, dtype=complex)
        if H.ndim != 2:
            raise ConfigError("H must be a B x U matrix")
        object.__setattr__(self, "H", H)
        B, U = H.shape
        s2 = np.ones(U) if self.sigma2_u is None else np.asarray(self.sigma2_u, dtype=float)
        if s2.shape != (U,):
            raise ConfigError(f"sigma2_u has shape {s2.shape}, expected ({U},)")
        object.__setattr__(self, "sigma2_u", s2)
        if self.active_range is None:
            object.__setattr__(self, "active_range", (1, B))
        else:
            first, last = self.active_range
            if not (1 <= first <= last <= B):
                raise ConfigError(f"active range {self.active_range} outside 1..{B}")

    @property
    def B(self) -> int:
        return self.H.shape[0]

    @property
    def U(self) -> int:
        return self.H.shape[1]

    @property
    def B_prime(self) -> int:
        return self.active_range[1] - self.active_range[0] + 1

    @property
    def active_slice(self) -> slice:
        return slice(self.active_range[0] - 1, self.active_range[1])

    @property
    def H_active(self) -> np.ndarray:
        return self.H[self.active_slice]

    def effective_gains(self) -> np.ndarray:
        """sigma2_u * ||h_u||^2 over the full array."""
        return self.sigma2_u * np.sum(np.abs(self.H) ** 2, axis=0)


def steering_vector(B: int, theta_deg: float, spacing: float = 0.5) -> np.ndarray:
    """ULA response exp(j 2 pi spacing (b-1) sin(theta)), b = 1..B."""
    b = np.arange(B)
    return np.exp(2j * np.pi * spacing * b * math.sin(math.radians(theta_deg)))


def draw_angles(spec: ChannelModelSpec, U: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform angles in the sector with pairwise separation >= min_separation.

    Angles are placed one at a time; a candidate too close to an accepted
    angle is redrawn. The total number of draws is bounded.
    """
    if U * spec.min_separation > spec.sector_width:
        raise ConfigError(
            f"cannot place {U} UEs {spec.min_separation} deg apart in a "
            f"{spec.sector_width} deg sector"
        )
    lo, hi = spec.sector
    angles: list[float] = []
    for _ in range(MAX_ANGLE_ATTEMPTS):
        cand = rng.uniform(lo, hi)
        if all(abs(cand - a) >= spec.min_separation for a in angles):
            angles.append(cand)
            if len(angles) == U:
                return np.array(angles)
    raise ConfigError(
        f"angle assignment for U={U} failed after {MAX_ANGLE_ATTEMPTS} attempts "
        f"(min separation {spec.min_separation} deg)"
    )


def generate_channel(spec: ChannelModelSpec, B: int, U: int, rng: np.random.Generator) -> ChannelRealization:
    if U < 1 or B < 1:
        raise ConfigError(f"need B >= 1 and U >= 1, got B={B}, U={U}")
    if spec.kind == "iid-rayleigh":
        H = (rng.standard_normal((B, U)) + 1j * rng.standard_normal((B, U))) / math.sqrt(2.0)
    else:
        theta = draw_angles(spec, U, rng)
        dist = rng.uniform(*spec.distance_range, size=U)
        gain = dist ** (-spec.pathloss_exponent / 2.0)
        b = np.arange(B)[:, None]
        phase = 2 * np.pi * spec.wavelength_spacing * np.sin(np.radians(theta))[None, :]
        H = gain[None, :] * np.exp(1j * b * phase)
    return ChannelRealization(H)


def power_control_scales(g: np.ndarray) -> np.ndarray:
    """Per-UE transmit scales for channel gains ``g`` (= ||h_u||^2).

    Each UE aims at the geometric mean of the gains with its transmit scale
    limited to [1/2, 2] (+-3 dB). When the gain spread exceeds 16 the +-3 dB
    range alone cannot bring the received powers within a factor of 4; the
    outlying received powers are then pulled into a factor-4 window centred
    (in dB) between the extremes.
    """
    g = np.asarray(g, dtype=float)
    if np.any(~np.isfinite(g)) or np.any(g <= 0):
        raise DegenerateChannelError("power control needs finite, nonzero channel columns")
    gbar = math.exp(float(np.mean(np.log(g))))
    s2 = np.clip(gbar / g, 0.5, 2.0)
    p = s2 * g
    pmax, pmin = p.max(), p.min()
    if pmax > 4.0 * pmin:
        c = math.sqrt(pmax * pmin)
        p = np.clip(p, c / 2.0, 2.0 * c)
        s2 = p / g
    return s2


def apply_power_control(ch: ChannelRealization) -> ChannelRealization:
    g = np.sum(np.abs(ch.H) ** 2, axis=0)
    if np.any(g == 0):
        raise DegenerateChannelError(f"zero-norm channel column(s): {np.flatnonzero(g == 0).tolist()}")
    return replace(ch, sigma2_u=power_control_scales(g))


def normalize_channel(ch: ChannelRealization) -> ChannelRealization:
    """Rescale H so that sum_u sigma2_u ||h_u||^2 = B, i.e. SNR = Es/N0."""
    total = float(np.sum(ch.effective_gains()))
    if total <= 0:
        raise DegenerateChannelError("channel carries no energy")
    return replace(ch, H=ch.H * math.sqrt(ch.B / total))


def select_antennas(B: int, B_prime: int) -> tuple[int, int]:
    """Centered block of B' contiguous antennas, as a 1-based inclusive interval."""
    if not (1 <= B_prime <= B):
        raise ConfigError(f"need 1 <= B' <= B, got B'={B_prime}, B={B}")
    offset = (B - B_prime) // 2
    return offset + 1, offset + B_prime


def with_active(ch: ChannelRealization, B_prime: int) -> ChannelRealization:
    return replace(ch, active_range=select_antennas(ch.B, B_prime))


def pilot_matrix(U: int) -> np.ndarray:
    """U x U orthogonal pilots; row u is UE u's unit-norm pilot sequence."""
    t = np.arange(U)
    return np.exp(-2j * np.pi * np.outer(t, t) / U) / math.sqrt(U)


def ls_estimate(H_active: np.ndarray, amplitude: np.ndarray, N0: float, noise: np.ndarray) -> np.ndarray:
    """Least-squares estimate from one orthogonal pilot block.

    ``amplitude`` is the per-UE transmit amplitude sqrt(Es sigma2_u) and
    ``noise`` unit-variance complex Gaussian samples shaped like H_active.
    Leading batch dimensions broadcast.
    """
    U = H_active.shape[-1]
    P = pilot_matrix(U)
    Y = (H_active * amplitude[..., None, :]) @ P + math.sqrt(N0) * noise
    return (Y @ P.conj().T) / amplitude[..., None, :]


def estimate_channel(
    ch: ChannelRealization,
    mode: str,
    Es: float,
    N0: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    if mode == "perfect":
        return ch.H_active.copy()
    if mode != "ls-pilot":
        raise ConfigError(f"unknown CSI mode {mode!r}; expected one of {CSI_MODES}")
    if rng is None:
        raise ConfigError("ls-pilot estimation needs a random generator")
    shape = (ch.B_prime, ch.U)
    noise = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    amplitude = np.sqrt(Es * ch.sigma2_u)
    return ls_estimate(ch.H_active, amplitude, N0, noise)


def save_matrix_csv(path, H: np.ndarray) -> None:
    """Write a complex matrix as CSV: header ``rows,cols`` then one row per
    matrix row with interleaved real/imag parts."""
    H = np.asarray(H, dtype=complex)
    rows, cols = H.shape
    inter = np.empty((rows, 2 * cols))
    inter[:, 0::2] = H.real
    inter[:, 1::2] = H.imag
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{rows},{cols}\n")
        for r in inter:
            fh.write(",".join(f"{v:.17g}" for v in r) + "\n")


def load_matrix_csv(path) -> np.ndarray:
    with open(path, encoding="ascii") as fh:
        rows, cols = (int(x) for x in fh.readline().split(","))
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape != (rows, 2 * cols):
        raise ConfigError(f"{path}: body shape {data.shape} does not match header {rows}x{cols}")
    return data[:, 0::2] + 1j * data[:, 1::2]


def save_matrix_bin(path, H: np.ndarray) -> None:
    """Little-endian binary: two uint32 (rows, cols), then float64 interleaved
    real/imag in row-major order."""
    H = np.ascontiguousarray(H, dtype="<c16")
    with open(path, "wb") as fh:
        np.array(H.shape, dtype="<u4").tofile(fh)
        H.view("<f8").tofile(fh)


def load_matrix_bin(path) -> np.ndarray:
    with open(path, "rb") as fh:
        rows, cols = np.fromfile(fh, dtype="<u4", count=2)
        flat = np.fromfile(fh, dtype="<f8")
    if flat.size != 2 * rows * cols:
        raise ConfigError(f"{path}: payload size does not match header {rows}x{cols}")
    return flat.view("<c16").reshape(rows, cols).astype(complex)
