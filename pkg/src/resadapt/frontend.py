"""ADC front end: q-bit uniform midrise quantizer, MSE-optimal step size for
Gaussian inputs, and the per-antenna input variance used to set the step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigError

MAX_ADC_BITS = 8
GOLDEN_TOL = 1e-6
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def is_ideal(bits) -> bool:
    return bits is None or math.isinf(bits)


@dataclass(frozen=True)
class QuantizerSpec:
    q: float
    delta: float = 1.0

    def __post_init__(self):
        if not is_ideal(self.q):
            if self.q < 1 or int(self.q) != self.q:
                raise ConfigError(f"quantizer bits must be a positive integer or inf, got {self.q}")
            if not self.delta > 0:
                raise ConfigError(f"step size must be positive, got {self.delta}")


@dataclass(frozen=True)
class AdcInputStats:
    sigma2_adc: float


def quantize(y, q, delta):
    """Midrise quantizer applied elementwise to real input.

    Levels are +-(delta/2)(2m-1), m = 1..2^(q-1). Inputs with
    |y| >= delta 2^(q-1) saturate to the outermost level, so the boundary
    itself belongs to the saturation branch.
    """
    if is_ideal(q):
        return np.asarray(y, dtype=float)
    delta = np.asarray(delta, dtype=float)
    top = delta * (2.0 ** q - 1.0) / 2.0
    out = delta * np.floor(y / delta) + delta / 2.0
    return np.clip(out, -top, top)


def quantize_scalar(y: float, spec: QuantizerSpec) -> float:
    return float(quantize(y, spec.q, spec.delta))


def quantize_complex(x, q, delta):
    """Independent I/Q quantization of a complex array."""
    if is_ideal(q):
        return np.asarray(x, dtype=complex)
    return quantize(x.real, q, delta) + 1j * quantize(x.imag, q, delta)


def _phi(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _Phi(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def gaussian_mse(delta: float, q: int) -> float:
    """E[(Q_q(y) - y)^2] for y ~ N(0, 1), in closed form.

    Sums the second moment about each reconstruction level over the positive
    cells and doubles it (the quantizer is odd, the density even).
    """
    levels = 2 ** (q - 1)
    total = 0.0
    for m in range(1, levels + 1):
        a = (m - 1) * delta
        c = (m - 0.5) * delta
        pa = _phi(a)
        if m < levels:
            b = m * delta
            pb = _phi(b)
            mass = _Phi(b) - _Phi(a)
            bpb = b * pb
        else:
            pb = 0.0
            mass = 1.0 - _Phi(a)
            bpb = 0.0
        second = mass + a * pa - bpb
        first = pa - pb
        total += second - 2.0 * c * first + c * c * mass
    return 2.0 * total


def golden_section(f, lo: float, hi: float, tol: float = GOLDEN_TOL) -> float:
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _check_bits(q) -> int:
    if is_ideal(q) or int(q) != q or not 1 <= q <= MAX_ADC_BITS:
        raise ConfigError(f"optimal step size defined for q in 1..{MAX_ADC_BITS}, got {q}")
    return int(q)


@lru_cache(maxsize=None)
def unit_step_size(q: int) -> float:
    """MSE-optimal step for a unit-variance real Gaussian input."""
    q = _check_bits(q)
    # overload point 2^(q-1) * delta stays below 8 sigma for q <= 8
    hi = 8.0 / 2 ** (q - 1)
    return golden_section(lambda d: gaussian_mse(d, q), 1e-4, hi)


def optimal_step_size(q, sigma: float) -> float:
    if not sigma > 0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    return sigma * unit_step_size(_check_bits(q))


def adc_input_variance(H_active, sigma2_u, Es: float, N0: float) -> AdcInputStats:
    """Largest per-antenna receive variance over the active array."""
    H_active = np.asarray(H_active)
    if H_active.ndim != 2 or H_active.shape[0] == 0:
        raise ConfigError("adc_input_variance needs a nonempty active antenna set")
    per_antenna = np.abs(H_active) ** 2 @ np.asarray(sigma2_u, dtype=float)
    return AdcInputStats(N0 + Es * float(per_antenna.max()))


def adc_step(q, sigma2_adc: float) -> float:
    """Step for each real quantizer; I and Q each carry half the complex variance."""
    return optimal_step_size(q, math.sqrt(sigma2_adc / 2.0))


def adc_array(y_active, q, delta):
    return quantize_complex(np.asarray(y_active, dtype=complex), q, delta)
