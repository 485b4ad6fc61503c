"""Power models for the ADC array and the finite-alphabet equalizer.

ADC array: Walden figure of merit times 2^q conversion steps for 2 B'
converters at rate f_s. Equalizer: a linear fit in k of measured
processing-in-memory power at a reference point, scaled proportionally in
q, B', U and f_s.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .errors import ModelUndefinedError
from .frontend import is_ideal

FOM_WALDEN = 70.8e-15  # J per conversion step, 28 nm SAR ADC at 2 GS/s
FS_REF = 2e9


@dataclass(frozen=True)
class PowerConstants:
    fom: float = FOM_WALDEN
    eq_slope: float = 2.44  # W per equalizer bit at the reference point
    eq_intercept: float = -0.48
    ref_q: int = 7
    ref_b_prime: int = 256
    ref_u: int = 16
    ref_fs: float = FS_REF

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULT_CONSTANTS = PowerConstants()


@dataclass(frozen=True)
class PowerBreakdown:
    p_adc: float
    p_eq: float

    @property
    def p_total(self) -> float:
        return self.p_adc + self.p_eq


def _finite_bits(name: str, value) -> None:
    if is_ideal(value):
        raise ModelUndefinedError(f"power model undefined for {name}=inf")
    if value < 1:
        raise ModelUndefinedError(f"power model needs {name} >= 1, got {value}")


def adc_power(q, B_prime: int, f_s: float = FS_REF, fom: float = FOM_WALDEN) -> float:
    _finite_bits("q", q)
    return fom * 2.0 ** q * 2 * B_prime * f_s


def eq_power(k, q, B_prime: int, U: int, f_s: float = FS_REF, constants: PowerConstants = DEFAULT_CONSTANTS) -> float:
    _finite_bits("k", k)
    _finite_bits("q", q)
    c = constants
    return (
        (c.eq_slope * k + c.eq_intercept)
        * (q / c.ref_q)
        * (B_prime / c.ref_b_prime)
        * (U / c.ref_u)
        * (f_s / c.ref_fs)
    )


def total_power(q, k, B_prime: int, U: int, f_s: float = FS_REF, constants: PowerConstants = DEFAULT_CONSTANTS) -> PowerBreakdown:
    return PowerBreakdown(
        adc_power(q, B_prime, f_s, constants.fom),
        eq_power(k, q, B_prime, U, f_s, constants),
    )
