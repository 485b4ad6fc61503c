"""Scenario and run configuration.

Run files are INI-style (``key = value`` under ``[section]`` headers). Lists
are comma separated and may contain inclusive integer ranges such as
``24..32``; ``inf`` denotes infinite resolution. A resolved configuration
round-trips through JSON so that every result directory can be re-run.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .channel import CSI_MODES, ChannelModelSpec
from .constellation import get_constellation
from .equalizer import MAX_EQ_BITS
from .errors import ConfigError
from .frontend import MAX_ADC_BITS, is_ideal
from .power import PowerConstants

INF = math.inf


def parse_bits(text) -> float:
    if isinstance(text, (int, float)):
        return float(text) if is_ideal(text) else int(text)
    t = str(text).strip().lower()
    if t in ("inf", "infinity", "∞"):
        return INF
    try:
        return int(t)
    except ValueError as exc:
        raise ConfigError(f"expected an integer bit count or 'inf', got {text!r}") from exc


def format_bits(b) -> str | int:
    return "inf" if is_ideal(b) else int(b)


def parse_int_list(text) -> list:
    """``"1..3, 8, inf"`` -> [1, 2, 3, 8, inf]."""
    if not isinstance(text, str):
        return [parse_bits(v) for v in text]
    out = []
    for tok in str(text).split(","):
        tok = tok.strip()
        if not tok:
            continue
        if ".." in tok:
            lo, hi = tok.split("..", 1)
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ConfigError(f"empty range {tok!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(parse_bits(tok))
    return out


def parse_float_list(text) -> list[float]:
    if not isinstance(text, str):
        return [float(v) for v in text]
    return [float(t) for t in str(text).split(",") if t.strip()]


def _check_q(q):
    if not is_ideal(q) and not (int(q) == q and 1 <= q <= MAX_ADC_BITS):
        raise ConfigError(f"ADC bits q must be in 1..{MAX_ADC_BITS} or inf, got {q}")


# simulations may probe finer equalizers than the swept range (convergence checks)
MAX_SIM_EQ_BITS = 16


def _check_k(k, limit=MAX_EQ_BITS):
    if not is_ideal(k) and not (int(k) == k and 1 <= k <= limit):
        raise ConfigError(f"equalizer bits k must be in 1..{limit} or inf, got {k}")


@dataclass(frozen=True)
class SystemConfig:
    B: int = 32
    B_prime: int | None = None  # None: all antennas active
    U: int = 4
    q: float = INF
    k: float = INF
    f_s: float = 2e9
    Es: float = 1.0
    modulation: str = "qpsk"
    channel: ChannelModelSpec = field(default_factory=ChannelModelSpec)
    csi: str = "perfect"
    n_symbols: int = 32  # channel uses per channel draw (one coherence block)
    normalize: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.B_prime is None:
            object.__setattr__(self, "B_prime", self.B)
        object.__setattr__(self, "q", parse_bits(self.q))
        object.__setattr__(self, "k", parse_bits(self.k))
        object.__setattr__(self, "modulation", get_constellation(self.modulation).name)
        if self.B < 1 or self.U < 1:
            raise ConfigError(f"need B >= 1 and U >= 1, got B={self.B}, U={self.U}")
        if not 1 <= self.B_prime <= self.B:
            raise ConfigError(f"need 1 <= B' <= B, got B'={self.B_prime}, B={self.B}")
        _check_q(self.q)
        _check_k(self.k, MAX_SIM_EQ_BITS)
        if not self.f_s > 0 or not self.Es > 0:
            raise ConfigError("f_s and Es must be positive")
        if self.csi not in CSI_MODES:
            raise ConfigError(f"unknown CSI mode {self.csi!r}; expected one of {CSI_MODES}")
        if self.n_symbols < 1:
            raise ConfigError("n_symbols must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.channel.kind == "los-ula" and self.U * self.channel.min_separation > self.channel.sector_width:
            raise ConfigError(
                f"cannot place U={self.U} UEs {self.channel.min_separation} deg apart in the sector"
            )

    def with_(self, **changes) -> "SystemConfig":
        return replace(self, **changes)

    @property
    def is_ideal(self) -> bool:
        return is_ideal(self.q) and is_ideal(self.k) and self.B_prime == self.B

    def ideal(self) -> "SystemConfig":
        """Infinite-resolution, all-antenna reference for this scenario."""
        return replace(self, q=INF, k=INF, B_prime=self.B)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["q"] = format_bits(self.q)
        d["k"] = format_bits(self.k)
        d["channel"] = _channel_to_dict(self.channel)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        d = dict(d)
        if "channel" in d and not isinstance(d["channel"], ChannelModelSpec):
            d["channel"] = _channel_from_dict(d["channel"])
        return cls(**_known(cls, d))


def _channel_to_dict(spec: ChannelModelSpec) -> dict:
    d = asdict(spec)
    d["sector"] = list(spec.sector)
    d["distance_range"] = list(spec.distance_range)
    return d


def _channel_from_dict(d: dict) -> ChannelModelSpec:
    d = dict(d)
    for key in ("sector", "distance_range"):
        if key in d:
            vals = parse_float_list(d[key])
            if len(vals) != 2:
                raise ConfigError(f"channel.{key} needs two values")
            d[key] = tuple(vals)
    for key in ("min_separation", "pathloss_exponent", "wavelength_spacing"):
        if key in d:
            d[key] = float(d[key])
    return ChannelModelSpec(**_known(ChannelModelSpec, d))


def _known(cls, d: dict) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return d


@dataclass(frozen=True)
class SearchSettings:
    target_ber: float = 0.01
    tol_db: float = 0.1
    snr_min: float = -10.0
    snr_max: float = 40.0
    coarse_step: float = 2.0
    rel_precision: float = 0.1  # stop once std_err <= rel_precision * target_ber
    decisive_z: float | None = 4.0  # or once |ber - target| > z * std_err
    min_trials: int = 256
    max_channel_uses: int = 100_000
    batch_trials: int = 64

    def __post_init__(self):
        if not 0 < self.target_ber < 0.5:
            raise ConfigError("target_ber must lie in (0, 0.5)")
        if not self.tol_db > 0 or not self.coarse_step > 0:
            raise ConfigError("tol_db and coarse_step must be positive")
        if not self.snr_min < self.snr_max:
            raise ConfigError("snr_min must be below snr_max")
        if self.min_trials < 1 or self.batch_trials < 1 or self.max_channel_uses < 1:
            raise ConfigError("trial counts must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "SearchSettings":
        d = dict(_known(cls, d))
        for f in fields(cls):
            if f.name in d:
                v = d[f.name]
                if f.name == "decisive_z":
                    d[f.name] = None if v in (None, "", "none", "None") else float(v)
                elif f.name in ("min_trials", "max_channel_uses", "batch_trials"):
                    d[f.name] = int(float(v))
                else:
                    d[f.name] = float(v)
        return cls(**d)


@dataclass(frozen=True)
class SweepGrid:
    q: tuple = (1, 2, 3, 4, 5, 6, 7, 8, INF)
    k: tuple = (1, 2, 3, 4, 5, 6, INF)
    b_prime: tuple = ()
    u: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "q", tuple(parse_int_list(self.q)))
        object.__setattr__(self, "k", tuple(parse_int_list(self.k)))
        object.__setattr__(self, "b_prime", tuple(int(b) for b in parse_int_list(self.b_prime)))
        object.__setattr__(self, "u", tuple(int(u) for u in parse_int_list(self.u)))
        for q in self.q:
            _check_q(q)
        for k in self.k:
            _check_k(k)
        if not self.q or not self.k:
            raise ConfigError("sweep grid needs at least one q and one k value")

    def to_dict(self) -> dict:
        return {
            "q": [format_bits(v) for v in self.q],
            "k": [format_bits(v) for v in self.k],
            "b_prime": list(self.b_prime),
            "u": list(self.u),
        }


@dataclass(frozen=True)
class BerSettings:
    snr_db: tuple = (-5.0, 0.0, 5.0, 10.0, 15.0)
    n_trials: int = 64

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(parse_float_list(self.snr_db)))
        object.__setattr__(self, "n_trials", int(self.n_trials))
        if self.n_trials < 1 or not self.snr_db:
            raise ConfigError("ber settings need n_trials >= 1 and a nonempty SNR grid")


@dataclass(frozen=True)
class CompareSettings:
    allowed_loss_db: tuple = (0.1, 0.5)
    constraint_db: float = 0.1
    baseline_q: float | None = None
    baseline_k: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "allowed_loss_db", tuple(parse_float_list(self.allowed_loss_db)))
        object.__setattr__(self, "constraint_db", float(self.constraint_db))
        for name in ("baseline_q", "baseline_k"):
            v = getattr(self, name)
            if v in ("", None):
                object.__setattr__(self, name, None)
            else:
                object.__setattr__(self, name, parse_bits(v))
        if (self.baseline_q is None) != (self.baseline_k is None):
            raise ConfigError("baseline_q and baseline_k must be given together")
        if self.baseline_q is not None:
            if is_ideal(self.baseline_q) or is_ideal(self.baseline_k):
                raise ConfigError("a fixed baseline needs finite q and k")
            _check_q(self.baseline_q)
            _check_k(self.baseline_k)

    def to_dict(self) -> dict:
        return {
            "allowed_loss_db": list(self.allowed_loss_db),
            "constraint_db": self.constraint_db,
            "baseline_q": None if self.baseline_q is None else format_bits(self.baseline_q),
            "baseline_k": None if self.baseline_k is None else format_bits(self.baseline_k),
        }


@dataclass(frozen=True)
class RunConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    sweep: SweepGrid = field(default_factory=SweepGrid)
    search: SearchSettings = field(default_factory=SearchSettings)
    ber: BerSettings = field(default_factory=BerSettings)
    compare: CompareSettings = field(default_factory=CompareSettings)
    power: PowerConstants = field(default_factory=PowerConstants)

    def __post_init__(self):
        B = self.system.B
        for b in self.sweep.b_prime:
            if not 1 <= b <= B:
                raise ConfigError(f"sweep B'={b} outside 1..B={B}")
        for u in self.sweep.u:
            if u < 1:
                raise ConfigError(f"sweep U={u} must be >= 1")
            # raises for infeasible angle packing
            self.system.with_(U=u)

    @property
    def b_primes(self) -> tuple:
        return self.sweep.b_prime or (self.system.B_prime,)

    @property
    def users(self) -> tuple:
        return self.sweep.u or (self.system.U,)

    def to_dict(self) -> dict:
        return {
            "system": self.system.to_dict(),
            "sweep": self.sweep.to_dict(),
            "search": asdict(self.search),
            "ber": {"snr_db": list(self.ber.snr_db), "n_trials": self.ber.n_trials},
            "compare": self.compare.to_dict(),
            "power": self.power.as_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        unknown = set(d) - {"system", "channel", "sweep", "search", "ber", "compare", "power"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        sys_d = dict(d.get("system", {}))
        if "channel" in d:
            sys_d["channel"] = {**sys_d.get("channel", {}), **d["channel"]}
        system = SystemConfig.from_dict(_coerce_system(sys_d))
        power_d = {key: float(v) for key, v in _known(PowerConstants, dict(d.get("power", {}))).items()}
        for key in ("ref_q", "ref_b_prime", "ref_u"):
            if key in power_d:
                power_d[key] = int(power_d[key])
        return cls(
            system=system,
            sweep=SweepGrid(**_known(SweepGrid, dict(d.get("sweep", {})))),
            search=SearchSettings.from_dict(d.get("search", {})),
            ber=BerSettings(**_known(BerSettings, dict(d.get("ber", {})))),
            compare=CompareSettings(**_known(CompareSettings, dict(d.get("compare", {})))),
            power=PowerConstants(**power_d),
        )


_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _coerce_system(d: dict) -> dict:
    out = dict(d)
    for key in ("B", "U", "n_symbols", "seed"):
        if key in out:
            out[key] = int(float(out[key]))
    if "B_prime" in out:
        v = out["B_prime"]
        out["B_prime"] = None if v in (None, "", "none", "None") else int(float(v))
    for key in ("f_s", "Es"):
        if key in out:
            out[key] = float(out[key])
    if "normalize" in out and not isinstance(out["normalize"], bool):
        try:
            out["normalize"] = _BOOL[str(out["normalize"]).strip().lower()]
        except KeyError as exc:
            raise ConfigError(f"normalize must be a boolean, got {out['normalize']!r}") from exc
    return out


def read_ini(path) -> dict:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case sensitive (B vs b_prime)
    with open(path, encoding="utf-8") as fh:
        parser.read_file(fh)
    return {sec: dict(parser.items(sec)) for sec in parser.sections()}


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        if path.suffix == ".json":
            data = json.loads(path.read_text(encoding="utf-8"))
        else:
            data = read_ini(path)
    except (OSError, configparser.Error, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        return RunConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid config {path}: {exc}") from exc
