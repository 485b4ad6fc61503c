"""Configuration sweeps, Pareto envelopes of (SNR loss, power), the fixed
worst-case baseline and the adaptive-vs-baseline comparison."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .config import SearchSettings, SweepGrid, SystemConfig
from .errors import ConfigError, InfeasibleError, ResAdaptError
from .frontend import is_ideal
from .montecarlo import min_snr_for_target
from .power import DEFAULT_CONSTANTS, PowerBreakdown, PowerConstants, adc_power, eq_power, total_power

log = logging.getLogger(__name__)


def _bits_key(b) -> float:
    return math.inf if is_ideal(b) else int(b)


@dataclass(frozen=True)
class ParetoPoint:
    snr_loss_db: float
    power_w: float
    config: tuple  # (q, k, B')
    u: int
    p_adc_w: float = 0.0
    p_eq_w: float = 0.0

    @property
    def q(self):
        return self.config[0]

    @property
    def k(self):
        return self.config[1]

    @property
    def b_prime(self) -> int:
        return self.config[2]

    def sort_key(self) -> tuple:
        return (self.snr_loss_db, self.power_w, tuple(_bits_key(c) for c in self.config))


@dataclass(frozen=True)
class SweepRecord:
    scenario: str
    u: int
    q: float
    k: float
    b_prime: int
    min_snr_db: float | None
    snr_loss_db: float | None
    status: str = "ok"  # ok | infeasible | error
    floor_ber: float | None = None
    clamped: bool = False
    probes: tuple = field(default=(), compare=False, repr=False)  # search diagnostics

    @property
    def feasible(self) -> bool:
        return self.status == "ok" and self.snr_loss_db is not None

    @property
    def config(self) -> tuple:
        return (self.q, self.k, self.b_prime)


@dataclass
class SweepResult:
    scenario: str
    records: list[SweepRecord] = field(default_factory=list)
    reference: dict[int, float] = field(default_factory=dict)  # U -> ideal min SNR

    def candidates(self, u: int, B: int, f_s: float, constants: PowerConstants = DEFAULT_CONSTANTS) -> list[ParetoPoint]:
        """Finite-resolution feasible configs for one U as (loss, power) points."""
        out = []
        for r in self.records:
            if r.u != u or not r.feasible or is_ideal(r.q) or is_ideal(r.k):
                continue
            p = total_power(r.q, r.k, r.b_prime, u, f_s, constants)
            out.append(ParetoPoint(r.snr_loss_db, p.p_total, r.config, u, p.p_adc, p.p_eq))
        return out

    def lookup(self, u: int, q, k, b_prime: int) -> SweepRecord | None:
        for r in self.records:
            if r.u == u and r.q == q and r.k == k and r.b_prime == b_prime:
                return r
        return None


def scenario_label(cfg: SystemConfig) -> str:
    return f"{cfg.channel.kind}/{cfg.modulation}"


def _search_job(args):
    cfg, search = args
    try:
        res = min_snr_for_target(cfg, search)
    except InfeasibleError as exc:
        return ("infeasible", None, exc.floor_ber, False, ())
    except ResAdaptError as exc:
        log.info("config failed: %s", exc)
        return ("error", None, None, False, ())
    return ("ok", res.min_snr_db, None, res.clamped, tuple(res.probes))


def grid_configs(base: SystemConfig, grid: SweepGrid, u: int, b_primes) -> list[SystemConfig]:
    return [base.with_(U=u, q=q, k=k, B_prime=b) for b in b_primes for q in grid.q for k in grid.k]


def sweep(
    base: SystemConfig,
    grid: SweepGrid,
    search: SearchSettings | None = None,
    workers: int = 1,
) -> SweepResult:
    """Min-SNR and SNR loss for every (U, B', q, k) of the grid.

    The ideal configuration (q = k = inf, B' = B) of every U is searched as
    the loss reference; an infeasible reference drops that U entirely.
    """
    search = search or SearchSettings()
    users = grid.u or (base.U,)
    b_primes = grid.b_prime or (base.B_prime,)
    for b in b_primes:
        if not 1 <= b <= base.B:
            raise ConfigError(f"B'={b} outside 1..{base.B}")

    jobs: list[SystemConfig] = []
    for u in users:
        jobs.append(base.ideal().with_(U=u))
        jobs.extend(grid_configs(base, grid, u, b_primes))
    args = [(c, search) for c in jobs]
    if workers > 1:
        chunk = max(1, math.ceil(len(args) / (4 * workers)))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_search_job, args, chunksize=chunk))
    else:
        outcomes = [_search_job(a) for a in args]

    label = scenario_label(base)
    result = SweepResult(label)
    for cfg, (status, snr, floor, clamped, _) in zip(jobs, outcomes):
        if not cfg.is_ideal or cfg.U in result.reference:
            continue
        if status != "ok":
            log.warning("ideal reference infeasible for %s U=%d; U skipped", label, cfg.U)
            continue
        if clamped:
            log.warning("ideal reference for %s U=%d sits at the SNR search floor", label, cfg.U)
        result.reference[cfg.U] = snr
    for cfg, (status, snr, floor, clamped, probes) in zip(jobs, outcomes):
        ref = result.reference.get(cfg.U)
        if ref is None:
            continue
        if status != "ok":
            log.info("excluded %s U=%d q=%s k=%s B'=%d: %s", label, cfg.U, cfg.q, cfg.k, cfg.B_prime, status)
        loss = snr - ref if status == "ok" else None
        result.records.append(
            SweepRecord(label, cfg.U, cfg.q, cfg.k, cfg.B_prime, snr, loss, status, floor, clamped, probes)
        )
    # the reference also appears in the grid when it contains (inf, inf, B); keep one record
    seen = set()
    unique = []
    for r in result.records:
        key = (r.u, r.config)
        if key not in seen:
            seen.add(key)
            unique.append(r)
    result.records = unique
    return result


def sweep_candidates(result: SweepResult, B: int, f_s: float, constants=DEFAULT_CONSTANTS) -> dict[int, list[ParetoPoint]]:
    users = sorted({r.u for r in result.records})
    cands = {u: result.candidates(u, B, f_s, constants) for u in users}
    for u, pts in cands.items():
        if not pts:
            raise InfeasibleError(f"no feasible finite-resolution configuration for {result.scenario} U={u}")
    return cands


def pareto_envelope(points) -> list[ParetoPoint]:
    """Non-dominated (loss, power) points, sorted by loss ascending.

    Exact duplicates on both axes keep the lexicographically smallest
    (q, k, B').
    """
    pts = sorted(points, key=ParetoPoint.sort_key)
    out = []
    best_power = math.inf
    for p in pts:
        if p.power_w < best_power:
            out.append(p)
            best_power = p.power_w
    return out


def dominates(a: ParetoPoint, b: ParetoPoint) -> bool:
    return (
        a.snr_loss_db <= b.snr_loss_db
        and a.power_w <= b.power_w
        and (a.snr_loss_db < b.snr_loss_db or a.power_w < b.power_w)
    )


@dataclass(frozen=True)
class BaselineSpec:
    q: int
    k: int
    constraint_db: float = 0.1
    worst_u: int = 0
    worst_loss_db: float = 0.0


def select_baseline(
    records,
    constraint_db: float = 0.1,
    B: int | None = None,
    f_s: float = 2e9,
    constants: PowerConstants = DEFAULT_CONSTANTS,
) -> BaselineSpec:
    """Cheapest finite (q, k) at B' = B whose loss stays below the constraint
    in every (scenario, U) present in ``records``.

    Power is compared at the largest U of the set, the worst-case load.
    """
    records = list(records)
    if B is None:
        B = max(r.b_prime for r in records)
    full = [r for r in records if r.b_prime == B]
    scenarios = {(r.scenario, r.u) for r in full}
    if not scenarios:
        raise ConfigError(f"no sweep records at B'=B={B}")
    u_max = max(u for _, u in scenarios)
    by_pair: dict[tuple, dict] = {}
    for r in full:
        if is_ideal(r.q) or is_ideal(r.k):
            continue
        by_pair.setdefault((int(r.q), int(r.k)), {})[(r.scenario, r.u)] = r

    feasible = []
    for pair, recs in by_pair.items():
        if set(recs) != scenarios:
            continue
        if all(r.feasible and r.snr_loss_db < constraint_db for r in recs.values()):
            worst = max(recs.values(), key=lambda r: (r.snr_loss_db, r.u))
            power = total_power(pair[0], pair[1], B, u_max, f_s, constants).p_total
            feasible.append((power, pair, worst))
    if not feasible:
        raise InfeasibleError(f"no (q, k) keeps the SNR loss below {constraint_db} dB on every scenario")
    power, (q, k), worst = min(feasible, key=lambda t: (t[0], t[1]))
    return BaselineSpec(q, k, constraint_db, worst.u, worst.snr_loss_db)


def baseline_power(
    u: int,
    baseline: BaselineSpec,
    B: int,
    f_s: float = 2e9,
    constants: PowerConstants = DEFAULT_CONSTANTS,
) -> PowerBreakdown:
    """All B antennas at fixed (q, k); only the equalizer scales with U."""
    return PowerBreakdown(
        adc_power(baseline.q, B, f_s, constants.fom),
        eq_power(baseline.k, baseline.q, B, u, f_s, constants),
    )


def adaptive_power(envelope, allowed_loss_db: float) -> ParetoPoint:
    """Lowest-power envelope point whose loss does not exceed the budget."""
    ok = [p for p in envelope if p.snr_loss_db <= allowed_loss_db]
    if not ok:
        raise InfeasibleError(f"no envelope point within {allowed_loss_db} dB SNR loss")
    return min(ok, key=lambda p: (p.power_w, p.snr_loss_db, tuple(_bits_key(c) for c in p.config)))


@dataclass(frozen=True)
class Comparison:
    scenario: str
    u: int
    allowed_loss_db: float
    baseline: PowerBreakdown
    adaptive: ParetoPoint | None

    @property
    def ratio(self) -> float:
        """baseline / adaptive power (savings factor)."""
        if self.adaptive is None:
            return math.nan
        return self.baseline.p_total / self.adaptive.power_w


def compare(
    envelopes: dict,
    baseline: BaselineSpec,
    allowed_losses,
    B: int,
    f_s: float = 2e9,
    constants: PowerConstants = DEFAULT_CONSTANTS,
    scenario: str = "",
) -> list[Comparison]:
    """Baseline vs adaptive power for every U of ``envelopes`` (U -> envelope)
    and every allowed loss."""
    out = []
    for allowed in allowed_losses:
        for u in sorted(envelopes):
            base = baseline_power(u, baseline, B, f_s, constants)
            try:
                pt = adaptive_power(envelopes[u], allowed)
            except InfeasibleError:
                pt = None
            out.append(Comparison(scenario, u, allowed, base, pt))
    return out
