"""Command-line front end: power tables, BER curves, Pareto envelopes and
the adaptive-vs-baseline comparison.

Every command writes its CSV into ``--out`` together with a sidecar
``<command>_config.json`` holding the resolved run configuration; passing
that file back via ``--config`` reproduces the run.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from .adapt import (
    BaselineSpec,
    SweepResult,
    compare,
    pareto_envelope,
    select_baseline,
    sweep,
    sweep_candidates,
)
from .config import RunConfig, format_bits, load_config
from .errors import (
    ConfigError,
    DegenerateChannelError,
    DegenerateEqualizerError,
    InfeasibleError,
    ModelUndefinedError,
    NumericalError,
    ResAdaptError,
)
from .montecarlo import run_ber
from .power import total_power

log = logging.getLogger("resadapt")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4

ENVELOPE_COLUMNS = ["u", "q", "k", "b_prime", "snr_loss_db", "p_adc_w", "p_eq_w", "p_total_w"]


def fmt(x) -> str:
    """Locale-free CSV cell: 9 significant digits, 'inf' for infinite bits."""
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return "%.9g" % x
    return str(x)


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


def write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_sidecar(out: Path, command: str, run: RunConfig) -> None:
    # worker count is deliberately absent: it never changes results
    (out / f"{command}_config.json").write_text(run.to_json(), encoding="utf-8")


def _bits(b):
    return format_bits(b)


# -- power -----------------------------------------------------------------


def cmd_power(run: RunConfig, out: Path, workers: int = 1, verbose: bool = False) -> list[list]:
    rows = []
    fs = run.system.f_s
    for u in run.users:
        for b in run.b_primes:
            for q in run.sweep.q:
                for k in run.sweep.k:
                    try:
                        p = total_power(q, k, b, u, fs, run.power)
                        vals = [p.p_adc, p.p_eq, p.p_total]
                    except ModelUndefinedError:
                        vals = ["n/a", "n/a", "n/a"]
                    rows.append([u, _bits(q), _bits(k), b, *vals])
    write_csv(out / "power.csv", ["u", "q", "k", "b_prime", "p_adc_w", "p_eq_w", "p_total_w"], rows)
    write_sidecar(out, "power", run)
    return rows


# -- ber ------------------------------------------------------------------


def cmd_ber(run: RunConfig, out: Path, workers: int = 1, verbose: bool = False) -> list[list]:
    cfg = run.system
    rows = []
    for snr in run.ber.snr_db:
        est = run_ber(cfg, snr, run.ber.n_trials, workers=workers, batch_trials=run.search.batch_trials)
        log.info("SNR %.2f dB: BER %.4g (%d trials)", snr, est.ber, est.trials)
        rows.append([float(snr), est.ber, est.std_err, est.trials])
    write_csv(out / "ber.csv", ["snr_db", "ber", "std_err", "trials"], rows)
    write_sidecar(out, "ber", run)
    return rows


# -- pareto / compare ------------------------------------------------------


def _run_sweep(run: RunConfig, workers: int) -> SweepResult:
    res = sweep(run.system, replace(run.sweep, b_prime=run.b_primes, u=run.users), run.search, workers)
    if not res.reference:
        raise InfeasibleError("ideal reference infeasible for every U; widen the SNR range")
    return res


def _envelopes(run: RunConfig, res: SweepResult) -> dict:
    cands = sweep_candidates(res, run.system.B, run.system.f_s, run.power)
    return {u: pareto_envelope(pts) for u, pts in cands.items()}


def _write_sweep(out: Path, res: SweepResult) -> None:
    rows = [
        [r.u, _bits(r.q), _bits(r.k), r.b_prime, r.status, r.min_snr_db, r.snr_loss_db, r.floor_ber, r.clamped]
        for r in res.records
    ]
    write_csv(
        out / "sweep.csv",
        ["u", "q", "k", "b_prime", "status", "min_snr_db", "snr_loss_db", "floor_ber", "clamped"],
        rows,
    )


def _write_probes(out: Path, res: SweepResult) -> None:
    rows = []
    for r in res.records:
        for p in r.probes:
            rows.append([r.u, _bits(r.q), _bits(r.k), r.b_prime, p.snr_db, p.ber, p.std_err, p.trials])
    write_csv(out / "probes.csv", ["u", "q", "k", "b_prime", "snr_db", "ber", "std_err", "trials"], rows)


def _envelope_rows(envelopes: dict) -> list[list]:
    rows = []
    for u in sorted(envelopes):
        for p in envelopes[u]:
            rows.append([u, _bits(p.q), _bits(p.k), p.b_prime, p.snr_loss_db, p.p_adc_w, p.p_eq_w, p.power_w])
    return rows


def cmd_pareto(run: RunConfig, out: Path, workers: int = 1, verbose: bool = False) -> dict:
    res = _run_sweep(run, workers)
    envelopes = _envelopes(run, res)
    write_csv(out / "envelope.csv", ENVELOPE_COLUMNS, _envelope_rows(envelopes))
    _write_sweep(out, res)
    if verbose:
        _write_probes(out, res)
    summary = {
        "scenario": res.scenario,
        "reference_min_snr_db": {str(u): res.reference[u] for u in sorted(res.reference)},
        "envelope_points": {str(u): len(envelopes[u]) for u in sorted(envelopes)},
        "feasible_candidates": {
            str(u): sum(1 for r in res.records if r.u == u and r.feasible) for u in sorted(envelopes)
        },
        "power_constants": run.power.as_dict(),
    }
    write_json(out / "pareto.json", summary)
    write_sidecar(out, "pareto", run)
    return {"sweep": res, "envelopes": envelopes, "summary": summary}


def cmd_compare(run: RunConfig, out: Path, workers: int = 1, verbose: bool = False) -> dict:
    res = _run_sweep(run, workers)
    envelopes = _envelopes(run, res)
    cs = run.compare
    B, fs = run.system.B, run.system.f_s
    if cs.baseline_q is not None:
        baseline = BaselineSpec(int(cs.baseline_q), int(cs.baseline_k), cs.constraint_db)
    else:
        if B not in run.b_primes:
            raise ConfigError(f"baseline selection needs B'=B={B} in the sweep")
        baseline = select_baseline(res.records, cs.constraint_db, B, fs, run.power)
    comps = compare(envelopes, baseline, cs.allowed_loss_db, B, fs, run.power, res.scenario)

    rows = []
    for c in comps:  # grouped by allowed loss, one block per value
        a = c.adaptive
        rows.append([
            c.allowed_loss_db,
            c.u,
            baseline.q,
            baseline.k,
            c.baseline.p_total,
            None if a is None else _bits(a.q),
            None if a is None else _bits(a.k),
            None if a is None else a.b_prime,
            None if a is None else a.snr_loss_db,
            None if a is None else a.power_w,
            c.ratio,
        ])
    write_csv(
        out / "compare.csv",
        [
            "allowed_loss_db", "u", "baseline_q", "baseline_k", "baseline_w",
            "adaptive_q", "adaptive_k", "adaptive_b_prime", "adaptive_snr_loss_db", "adaptive_w", "ratio",
        ],
        rows,
    )
    write_csv(out / "envelope.csv", ENVELOPE_COLUMNS, _envelope_rows(envelopes))
    _write_sweep(out, res)
    if verbose:
        _write_probes(out, res)
    summary = {
        "scenario": res.scenario,
        "baseline": {
            "q": baseline.q,
            "k": baseline.k,
            "constraint_db": baseline.constraint_db,
            "worst_u": baseline.worst_u,
            "worst_loss_db": baseline.worst_loss_db,
        },
        "power_constants": run.power.as_dict(),
    }
    ratios: dict = {}
    for c in comps:
        ratios.setdefault(fmt(float(c.allowed_loss_db)), {})[str(c.u)] = None if math.isnan(c.ratio) else c.ratio
    summary["ratios"] = ratios
    write_json(out / "compare.json", summary)
    write_sidecar(out, "compare", run)
    return {"sweep": res, "envelopes": envelopes, "baseline": baseline, "comparisons": comps}


COMMANDS = {"power": cmd_power, "ber": cmd_ber, "pareto": cmd_pareto, "compare": cmd_compare}


# -- entry point -----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="resadapt", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, help="INI or JSON run configuration")
    p.add_argument("--seed", type=int, help="master seed (overrides the config file)")
    p.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override a config value, e.g. --set sweep.q=1..8 (repeatable)",
    )
    p.add_argument("--verbose", "-v", action="store_true", help="log progress and write per-probe CSV")
    return p


def resolve_config(args) -> RunConfig:
    data: dict = {}
    if args.config is not None:
        data = load_config(args.config).to_dict()
    for item in args.set:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not sep or not dot or not name:
            raise ConfigError(f"--set expects SECTION.KEY=VALUE, got {item!r}")
        data.setdefault(section, {})[name] = value.strip()
    if args.seed is not None:
        data.setdefault("system", {})["seed"] = args.seed
    try:
        return RunConfig.from_dict(data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        run = resolve_config(args)
        args.out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](run, args.out, workers=args.workers, verbose=args.verbose)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NumericalError, DegenerateEqualizerError, DegenerateChannelError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ResAdaptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
