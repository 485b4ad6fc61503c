"""Monte-Carlo uplink simulation: BER estimation, minimum-SNR search and SNR
loss.

A trial is one channel draw followed by ``n_symbols`` channel uses. Every
random quantity of a trial comes from its own stream, seeded from
(master seed, trial index, purpose tag), so results do not depend on the
order in which trials run or on how they are split across workers. Channel,
symbol and unit-noise draws depend only on the scenario (channel model, B,
U, modulation, block length, seed); all configurations (q, k, B') and SNR
probes of a scenario reuse them, which pairs the comparisons.
"""

from __future__ import annotations

import logging
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .channel import (
    apply_power_control,
    generate_channel,
    ls_estimate,
    normalize_channel,
    select_antennas,
)
from .config import SearchSettings, SystemConfig
from .constellation import _POPCOUNT, get_constellation
from .equalizer import flmmse_quantize, lmmse_matrix, unbiased_scaling
from .errors import ConfigError, DegenerateEqualizerError, InfeasibleError
from .frontend import is_ideal, quantize_complex, unit_step_size

log = logging.getLogger(__name__)


def trial_rng(master_seed: int, trial: int, tag: str) -> np.random.Generator:
    """Independent stream for one purpose of one trial."""
    ss = np.random.SeedSequence([master_seed, trial, zlib.crc32(tag.encode())])
    return np.random.default_rng(ss)


def _unit_cn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * math.sqrt(0.5)


@dataclass(frozen=True, eq=False)
class TrialDraws:
    """SNR- and configuration-independent draws for a batch of trials."""

    H: np.ndarray  # (T, B, U), power-controlled and normalized
    sigma2: np.ndarray  # (T, U)
    labels: np.ndarray  # (T, U, N)
    noise: np.ndarray  # (T, B, N), unit variance
    pilot_noise: np.ndarray  # (T, B, U), unit variance


def _scenario_key(cfg: SystemConfig) -> tuple:
    return (cfg.channel, cfg.B, cfg.U, cfg.modulation, cfg.n_symbols, cfg.normalize, cfg.seed)


@lru_cache(maxsize=512)
def _draws(key: tuple, start: int, stop: int) -> TrialDraws:
    spec, B, U, modulation, N, normalize, seed = key
    M = get_constellation(modulation).size
    Hs, s2s, labs, noises, pilots = [], [], [], [], []
    for t in range(start, stop):
        ch = apply_power_control(generate_channel(spec, B, U, trial_rng(seed, t, "channel")))
        if normalize:
            ch = normalize_channel(ch)
        Hs.append(ch.H)
        s2s.append(ch.sigma2_u)
        labs.append(trial_rng(seed, t, "symbols").integers(0, M, size=(U, N)))
        noises.append(_unit_cn(trial_rng(seed, t, "noise"), (B, N)))
        pilots.append(_unit_cn(trial_rng(seed, t, "pilot"), (B, U)))
    out = TrialDraws(np.stack(Hs), np.stack(s2s), np.stack(labs), np.stack(noises), np.stack(pilots))
    for arr in (out.H, out.sigma2, out.labels, out.noise, out.pilot_noise):
        arr.flags.writeable = False
    return out


def draws_for(cfg: SystemConfig, start: int, stop: int) -> TrialDraws:
    return _draws(_scenario_key(cfg), start, stop)


def clear_caches() -> None:
    _draws.cache_clear()


def n0_for_snr(snr_db: float, Es: float) -> float:
    """Noise variance giving the requested SNR for a normalized channel
    (sum_u sigma2_u ||h_u||^2 = B)."""
    return Es / 10.0 ** (snr_db / 10.0)


def simulate_batch(cfg: SystemConfig, snr_db: float, draws: TrialDraws) -> tuple[int, int]:
    """Bit errors and bit count for one batch of trials at one SNR."""
    const = get_constellation(cfg.modulation)
    T, B, U = draws.H.shape
    N = draws.labels.shape[-1]
    Es = cfg.Es
    N0 = n0_for_snr(snr_db, Es)
    first, last = select_antennas(B, cfg.B_prime)
    act = slice(first - 1, last)

    amp = np.sqrt(Es * draws.sigma2)  # (T, U)
    x = const.points[draws.labels] * amp[..., None]
    Ha = draws.H[:, act, :]
    y = Ha @ x + math.sqrt(N0) * draws.noise[:, act, :]

    if is_ideal(cfg.q):
        z = y
    else:
        rx_power = (np.abs(Ha) ** 2) @ draws.sigma2[..., None]  # (T, B', 1)
        sigma2_adc = N0 + Es * rx_power.max(axis=(1, 2))
        delta = unit_step_size(int(cfg.q)) * np.sqrt(sigma2_adc / 2.0)
        z = quantize_complex(y, int(cfg.q), delta[:, None, None])

    if cfg.csi == "perfect":
        H_est = Ha
    else:
        H_est = ls_estimate(Ha, amp, N0, draws.pilot_noise[:, act, :])

    W_H = lmmse_matrix(H_est, N0 / Es)
    try:
        X_H = flmmse_quantize(W_H, cfg.k)
    except DegenerateEqualizerError:
        X_H = W_H  # only reachable for an all-zero estimate column; flagged below
    mu, bad = unbiased_scaling(X_H, H_est, strict=False)
    zero_rows = np.all(X_H == 0, axis=-1)
    bad = bad | zero_rows
    mu = np.where(bad, 0.0, mu)

    s_hat = mu[..., None] * (X_H @ z)
    rx_labels = const.detect(s_hat / amp[..., None])
    errs = _POPCOUNT[np.bitwise_xor(draws.labels, rx_labels)].sum(axis=-1)  # (T, U)
    bits_per_ue = N * const.bits_per_symbol
    # a UE whose equalizer cannot be unbiased counts as coin flipping
    errs = np.where(bad, bits_per_ue // 2, errs)
    return int(errs.sum()), T * U * bits_per_ue


@dataclass(frozen=True)
class BerEstimate:
    bit_errors: int
    bits_total: int
    trials: int = 0

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_total if self.bits_total else float("nan")

    @property
    def std_err(self) -> float:
        p = self.ber
        return math.sqrt(p * (1.0 - p) / self.bits_total) if self.bits_total else float("nan")

    def __add__(self, other: "BerEstimate") -> "BerEstimate":
        return BerEstimate(
            self.bit_errors + other.bit_errors,
            self.bits_total + other.bits_total,
            self.trials + other.trials,
        )


def _batch_job(args) -> tuple[int, int, int]:
    cfg, snr_db, start, stop = args
    e, n = simulate_batch(cfg, snr_db, draws_for(cfg, start, stop))
    return e, n, stop - start


def _batches(start: int, stop: int, size: int):
    for a in range(start, stop, size):
        yield a, min(a + size, stop)


def run_ber(
    cfg: SystemConfig,
    snr_db: float,
    n_trials: int,
    master_seed: int | None = None,
    workers: int = 1,
    batch_trials: int = 16,
) -> BerEstimate:
    """Fixed-length BER estimate over trials 0..n_trials-1."""
    if n_trials < 1:
        raise ConfigError("n_trials must be >= 1")
    if master_seed is not None:
        cfg = cfg.with_(seed=master_seed)
    jobs = [(cfg, snr_db, a, b) for a, b in _batches(0, n_trials, batch_trials)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_batch_job, jobs))
    else:
        parts = [_batch_job(j) for j in jobs]
    total = BerEstimate(0, 0, 0)
    for e, n, t in parts:
        total = total + BerEstimate(e, n, t)
    return total


def trial_budget(cfg: SystemConfig, search: SearchSettings) -> int:
    """Trials after which std_err <= rel_precision * target holds at BER = target."""
    bits_per_trial = cfg.U * cfg.n_symbols * get_constellation(cfg.modulation).bits_per_symbol
    t = search.target_ber
    bits = t * (1.0 - t) / (search.rel_precision * t) ** 2
    max_trials = max(1, search.max_channel_uses // cfg.n_symbols)
    return min(max_trials, max(search.min_trials, math.ceil(bits / bits_per_trial)))


def estimate_ber(cfg: SystemConfig, snr_db: float, search: SearchSettings) -> BerEstimate:
    """Sequential BER estimate used by the SNR search.

    Batches of trials are added in a fixed order. Sampling stops early once
    the estimate lies decisively on one side of the target; otherwise it runs
    to the precision budget of ``trial_budget``. The budget does not depend
    on the observed BER, so configurations near the target are compared on
    exactly the same trials.
    """
    target = search.target_ber
    budget = trial_budget(cfg, search)
    est = BerEstimate(0, 0, 0)
    start = 0
    while start < budget:
        stop = min(start + search.batch_trials, budget)
        e, n = simulate_batch(cfg, snr_db, draws_for(cfg, start, stop))
        est = est + BerEstimate(e, n, stop - start)
        start = stop
        if est.trials < search.min_trials:
            continue
        se = max(est.std_err, _floor_se(est))
        if search.decisive_z is not None and abs(est.ber - target) > search.decisive_z * se:
            break
    return est


def _floor_se(est: BerEstimate) -> float:
    # zero observed errors would otherwise give std_err = 0
    return math.sqrt(0.5 / est.bits_total)


@dataclass(frozen=True)
class Probe:
    snr_db: float
    ber: float
    std_err: float
    trials: int


@dataclass
class SnrSearchResult:
    min_snr_db: float
    probes: list[Probe] = field(default_factory=list)
    clamped: bool = False  # target already met at the lower end of the range
    monotone: bool = True


def min_snr_for_target(cfg: SystemConfig, search: SearchSettings | None = None) -> SnrSearchResult:
    """Smallest SNR (within tol_db) at which the estimated BER is <= target.

    Raises InfeasibleError when the target is missed at the top of the range.
    """
    search = search or SearchSettings()
    target = search.target_ber
    probes: dict[float, BerEstimate] = {}

    def ber_at(snr: float) -> float:
        snr = round(snr, 9)
        if snr not in probes:
            probes[snr] = estimate_ber(cfg, snr, search)
        return probes[snr].ber

    def result(snr: float, clamped: bool = False) -> SnrSearchResult:
        items = sorted(probes.items())
        plist = [Probe(s, e.ber, e.std_err, e.trials) for s, e in items]
        monotone = all(
            b.ber <= a.ber + 3.0 * math.hypot(a.std_err, b.std_err) for a, b in zip(plist, plist[1:])
        )
        if not monotone:
            log.warning("non-monotone BER vs SNR for %s", _describe(cfg))
        return SnrSearchResult(snr, plist, clamped, monotone)

    n_steps = int(math.ceil((search.snr_max - search.snr_min) / search.coarse_step - 1e-9))
    grid = [search.snr_min + i * search.coarse_step for i in range(n_steps)] + [search.snr_max]

    if ber_at(grid[-1]) > target:
        floor = ber_at(grid[-1])
        raise InfeasibleError(
            f"target BER {target} not reached at {grid[-1]} dB (BER {floor:.4g}) for {_describe(cfg)}",
            floor_ber=floor,
        )
    if ber_at(grid[0]) <= target:
        log.warning("target met at the lower search limit %.2f dB for %s", grid[0], _describe(cfg))
        return result(grid[0], clamped=True)

    lo, hi = 0, len(grid) - 1  # ber(grid[lo]) > target >= ber(grid[hi])
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ber_at(grid[mid]) > target:
            lo = mid
        else:
            hi = mid
    a, b = grid[lo], grid[hi]
    while b - a > search.tol_db:
        m = 0.5 * (a + b)
        if ber_at(m) > target:
            a = m
        else:
            b = m
    return result(b)


def _describe(cfg: SystemConfig) -> str:
    return (
        f"{cfg.modulation}/{cfg.channel.kind} B={cfg.B} U={cfg.U} "
        f"q={cfg.q} k={cfg.k} B'={cfg.B_prime}"
    )


def snr_loss(cfg: SystemConfig, reference: SystemConfig | None = None, search: SearchSettings | None = None) -> float:
    """Min-SNR difference against the reference (default: the ideal config).

    Both searches run on the same channel-seed ensemble; configs with a
    different scenario seed are rejected.
    """
    reference = reference or cfg.ideal()
    if _scenario_key(cfg) != _scenario_key(reference):
        raise ConfigError("SNR loss needs both configs on the same scenario and seed ensemble")
    if cfg == reference:
        return 0.0
    ref = min_snr_for_target(reference, search).min_snr_db
    return min_snr_for_target(cfg, search).min_snr_db - ref
