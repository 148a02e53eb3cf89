"""Command-line front end: identify, synthesize, simulate, campaign, report.

Exit codes: 0 success, 1 partial campaign failure, 2 quality gate missed,
3 input parse error, 4 identification failure, 5 synthesis failure,
64 usage error.  ``WAVEFEED_OUT`` overrides the output directory.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy import signal

from . import __version__
from .controllers import (CHANNELS, FeedbackConfig, ShapingConfig, ShapingError, design_feedforward,
                          schedule_channel)
from .forces import (CoefficientFormatError, IdentificationError, PwemModel, identify_pwem,
                     load_reference_coefficients, read_coefficients, select_causalization_delay)
from .lti import LTIError, NonMinimumPhaseError, freqresp
from .metrics import (METRIC_LABELS, TABLE1, LoadCase, RunMetrics, campaign_aggregate, combine,
                      read_load_cases, summarize, write_load_cases)
from .plant import demo_parameters, load_parameters, operating_point
from .simulator import MODES, Scenario, SimulationDivergedError, run
from .waves import WAVE_BAND, PredictionConfig

EXIT_OK, EXIT_PARTIAL, EXIT_QUALITY, EXIT_PARSE, EXIT_IDENT, EXIT_SYNTH, EXIT_USAGE = 0, 1, 2, 3, 4, 5, 64

log = logging.getLogger("wavefeed")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _output_dir(arg: str | None, default: str = "wavefeed_out") -> Path:
    out = Path(os.environ.get("WAVEFEED_OUT") or arg or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, default=float) + "\n")


def _load_plant(path):
    return demo_parameters() if path is None else load_parameters(path)


def _load_coefficients(path):
    return load_reference_coefficients() if path is None else read_coefficients(path)


def _load_pwem(path, coeff_path=None, t_p: float = 10.0) -> PwemModel:
    if path is not None:
        return PwemModel.from_dict(json.loads(Path(path).read_text()))
    return identify_pwem(_load_coefficients(coeff_path), t_p)


# --------------------------------------------------------------------------
# identify

def cmd_identify(args) -> int:
    if args.order < 1:
        raise UsageError("order must be a positive integer")
    coeffs = _load_coefficients(args.coefficients)
    if args.t_p == "auto":
        t_p = select_causalization_delay(coeffs)
    else:
        try:
            t_p = float(args.t_p)
        except ValueError:
            raise UsageError(f"--t-p must be 'auto' or a number, got {args.t_p!r}") from None
    pwem = identify_pwem(coeffs, t_p, order=args.order)
    report = pwem.fit_report
    out = _output_dir(args.out)
    _write_json(out / "pwem.json", pwem.to_dict())
    _write_json(out / "fit_report.json", dict(report.to_dict(), t_p=t_p, order=args.order))
    for name, fit in report.fit_percent.items():
        print(f"{name:>14s}: fit {fit:7.3f} %")
    print(f"{'t_p':>14s}: {t_p:g} s    FPE {report.fpe:.4g}")
    passed = all(v >= args.threshold for v in report.fit_percent.values())
    return EXIT_OK if passed else EXIT_QUALITY


# --------------------------------------------------------------------------
# synthesize

def _bode_columns(name, resp):
    return {f"{name}_mag_db": 20 * np.log10(np.maximum(np.abs(resp), 1e-300)),
            f"{name}_phase_deg": np.degrees(np.unwrap(np.angle(resp)))}


def cmd_synthesize(args) -> int:
    params = _load_plant(args.plant)
    pwem = _load_pwem(args.pwem, args.coefficients)
    channel = None if args.channel == "auto" else args.channel
    shaping = None if args.no_shaping else ShapingConfig(order=args.order, hp_corner=args.hp_corner)
    ff = design_feedforward(params, pwem, args.wind, args.k_ff, shaping, channel)
    out = _output_dir(args.out)
    _write_json(out / "controller.json", ff.to_dict())

    w = np.logspace(np.log10(2 * np.pi / 2000), np.log10(2 * np.pi / 1.5), 400)
    cols = {"omega_rad_s": w}
    cols.update(_bode_columns("full", freqresp(ff.full.scaled(ff.k_ff), w)[:, 0, 0]))
    if shaping is not None:
        from .lti import reduce_order
        full = ff.full
        if shaping.order is not None and shaping.order < full.n_states:
            reduced = reduce_order(full, shaping.order).model
        else:
            reduced = full
        cols.update(_bode_columns("reduced", freqresp(reduced.scaled(ff.k_ff), w)[:, 0, 0]))
        cols.update(_bode_columns("shaped", freqresp(ff.transfer, w)[:, 0, 0]))
    with open(out / "bode.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(cols)
        for row in zip(*cols.values()):
            wr.writerow([repr(float(v)) for v in row])
    print(f"channel {ff.channel}, full order {ff.full.n_states}, controller order {ff.unit.n_states}")
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate

def _case_from_args(args) -> LoadCase:
    if args.case is not None:
        if not 1 <= args.case <= len(TABLE1):
            raise UsageError(f"--case must lie in 1..{len(TABLE1)}")
        return TABLE1[args.case - 1]
    if args.wind is None:
        raise UsageError("give --case or --wind (with --hs and --ts)")
    return LoadCase(args.wind, args.hs, args.ts, 1.0)


def cmd_simulate(args) -> int:
    case = _case_from_args(args)
    params = _load_plant(args.plant)
    pwem = _load_pwem(args.pwem, args.coefficients)
    coeffs = _load_coefficients(args.coefficients)
    shaping = None if args.no_shaping else ShapingConfig(order=args.order, hp_corner=args.hp_corner)
    sc = Scenario(case, mode=args.mode, duration=args.duration, dt=args.dt, wave_seed=args.wave_seed,
                  wind_seed=args.wind_seed, k_ff=args.k_ff, turbulence_intensity=args.ti, shaping=shaping,
                  channel_mode=args.channel, prediction=PredictionConfig(args.distance, pwem.t_p))
    rec = run(sc, params, coeffs, pwem)
    out = _output_dir(args.out)
    rec.to_csv(out / "record.csv", stride=args.record_stride)
    m = summarize(rec)
    _write_json(out / "metrics.json", m.to_dict())
    for key, label in METRIC_LABELS.items():
        print(f"{label:>28s}: {getattr(m, key):.5g}")
    return EXIT_OK


# --------------------------------------------------------------------------
# campaign

@dataclass
class CampaignConfig:
    """Campaign settings; ``None`` paths select the shipped demo fixtures."""

    plant: str | None = None
    coefficients: str | None = None
    load_cases: str | None = None
    modes: list = field(default_factory=lambda: list(MODES))
    k_ff: float = 1.0
    seeds: list = field(default_factory=lambda: [1, 2])
    duration: float = 3600.0
    dt: float = 0.05
    turbulence_intensity: float = 0.04
    num_components: int = 50
    ff_order: int | None = 8
    hp_corner: float | None = 2 * np.pi / 200
    channel_mode: str = "auto"
    prediction_time: float | str = 10.0
    upstream_distance: float = 313.0
    output: str = "campaign_out"
    workers: int = 0
    record_stride: int = 20
    write_records: bool = True

    def __post_init__(self):
        if not self.modes:
            raise ValueError("at least one mode is required")
        bad = [m for m in self.modes if m not in MODES]
        if bad:
            raise ValueError(f"unknown modes {bad}; choose from {MODES}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        for key in ("plant", "coefficients", "load_cases"):
            path = getattr(self, key)
            if path is not None and not Path(path).exists():
                raise ValueError(f"{key} file {path} does not exist")

    @classmethod
    def from_file(cls, path) -> CampaignConfig:
        data = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def _run_cell(job):
    key, scenario, params, coeffs, pwem, ff = job
    try:
        rec = run(scenario, params, coeffs, pwem, feedforward=ff)
        return key, rec, None
    except (SimulationDivergedError, LTIError, ValueError) as err:
        return key, None, f"{type(err).__name__}: {err}"


def _omega_spectrum(rec):
    m = rec.steady_mask
    fs = 1 / (rec.time[1] - rec.time[0])
    f, p = signal.welch(rec["rotor_speed"][m], fs=fs, nperseg=min(4096, int(m.sum())))
    return f, p


def run_campaign(cfg: CampaignConfig, out: Path) -> tuple[int, object]:
    params = _load_plant(cfg.plant)
    coeffs = _load_coefficients(cfg.coefficients)
    t_p = select_causalization_delay(coeffs) if cfg.prediction_time == "auto" else float(cfg.prediction_time)
    pwem = identify_pwem(coeffs, t_p)
    cases = read_load_cases(cfg.load_cases) if cfg.load_cases else TABLE1
    shaping = ShapingConfig(cfg.ff_order, cfg.hp_corner) if (cfg.ff_order or cfg.hp_corner) else None
    prediction = PredictionConfig(cfg.upstream_distance, t_p)

    controllers = {}
    if "BL+FF" in cfg.modes:
        for i, case in enumerate(cases):
            channel = None if cfg.channel_mode == "auto" else cfg.channel_mode
            controllers[i] = design_feedforward(params, pwem, case.wind_speed, 1.0, shaping, channel)

    jobs = []
    for mode in cfg.modes:
        for i, case in enumerate(cases):
            for seed in cfg.seeds:
                sc = Scenario(case, mode=mode, duration=cfg.duration, dt=cfg.dt, wave_seed=seed,
                              wind_seed=seed, k_ff=cfg.k_ff, prediction=prediction,
                              turbulence_intensity=cfg.turbulence_intensity,
                              num_components=cfg.num_components, shaping=shaping,
                              channel_mode=cfg.channel_mode)
                jobs.append(((mode, i, seed), sc, params, coeffs, pwem, controllers.get(i)))

    workers = cfg.workers or min(len(jobs), os.cpu_count() or 1)
    t0 = time.perf_counter()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    elapsed = time.perf_counter() - t0

    rec_dir = out / "records"
    if cfg.write_records:
        rec_dir.mkdir(exist_ok=True)
    failures, per_run, spectra = {}, {}, {}
    for (mode, i, seed), rec, err in results:   # pool.map keeps job order
        tag = f"{mode.replace('+', 'p')}_case{i + 1}_seed{seed}"
        if err is not None:
            failures[tag] = err
            log.warning("run %s failed: %s", tag, err)
            continue
        if cfg.write_records:
            rec.to_csv(rec_dir / f"{tag}.csv", stride=cfg.record_stride)
        per_run[(mode, i, seed)] = summarize(rec)
        if mode in ("BL", "BL+FF"):
            spectra.setdefault((mode, i), []).append(_omega_spectrum(rec))

    with open(out / "metrics_runs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mode", "case", "seed", *METRIC_LABELS])
        for (mode, i, seed), m in per_run.items():
            w.writerow([mode, i + 1, seed, *(repr(getattr(m, k)) for k in METRIC_LABELS)])
    write_load_cases(out / "load_cases.csv", cases)
    _write_spectra(out / "spectra_rotor_speed.csv", spectra, cases)

    report = None
    try:
        report = _aggregate(per_run, cfg.modes, cases, cfg.seeds)
        report.to_csv(out / "aggregate.csv")
        report.per_case_csv(out / "per_case.csv")
        (out / "aggregate.txt").write_text(report.to_text())
    except ValueError as err:
        log.warning("aggregate incomplete: %s", err)
    _write_json(out / "campaign.json", {
        "version": __version__, "config": asdict(cfg), "t_p": t_p, "elapsed_s": elapsed,
        "runs": len(jobs), "failed": failures})
    return (EXIT_PARTIAL if failures else EXIT_OK), report


def _aggregate(per_run, modes, cases, seeds):
    per_case = {}
    for mode in modes:
        rows = []
        for i in range(len(cases)):
            ms = [per_run[(mode, i, s)] for s in seeds if (mode, i, s) in per_run]
            rows.append(combine(ms) if len(ms) == len(seeds) else None)
        per_case[mode] = rows
    return campaign_aggregate(per_case, cases)


def _write_spectra(path, spectra, cases):
    if not spectra:
        return
    cols = {}
    for (mode, i), items in sorted(spectra.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        f = items[0][0]
        cols.setdefault("frequency_hz", f)
        cols[f"case{i + 1}_{mode}"] = np.mean([p for _, p in items], axis=0)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in zip(*cols.values()):
            w.writerow([repr(float(v)) for v in row])


def cmd_campaign(args) -> int:
    if args.write_config:
        _write_json(Path(args.write_config), asdict(CampaignConfig()))
        return EXIT_OK
    cfg = CampaignConfig.from_file(args.config) if args.config else CampaignConfig()
    overrides = {k: v for k, v in (("modes", args.modes), ("seeds", args.seeds), ("k_ff", args.k_ff),
                                   ("duration", args.duration), ("workers", args.workers),
                                   ("load_cases", args.cases), ("plant", args.plant),
                                   ("coefficients", args.coefficients)) if v is not None}
    if args.no_records:
        overrides["write_records"] = False
    cfg = replace(cfg, **overrides)
    out = _output_dir(args.out or cfg.output)
    code, report = run_campaign(cfg, out)
    if report is not None:
        print(report.to_text(), end="")
    print(f"outputs written to {out}")
    return code


# --------------------------------------------------------------------------
# report

def cmd_report(args) -> int:
    src = Path(args.directory)
    runs = src / "metrics_runs.csv"
    if not runs.exists():
        raise FileNotFoundError(f"{runs} not found; run a campaign first")
    cases_path = src / "load_cases.csv"
    cases = read_load_cases(cases_path) if cases_path.exists() else TABLE1
    per_run, modes, seeds = {}, [], []
    with open(runs, newline="") as fh:
        for row in csv.DictReader(fh):
            mode, i, seed = row["mode"], int(row["case"]) - 1, int(row["seed"])
            per_run[(mode, i, seed)] = RunMetrics(*(float(row[k]) for k in METRIC_LABELS))
            if mode not in modes:
                modes.append(mode)
            if seed not in seeds:
                seeds.append(seed)
    report = _aggregate(per_run, modes, cases, seeds)
    out = _output_dir(args.out, default=str(src))
    report.to_csv(out / "aggregate.csv")
    report.per_case_csv(out / "per_case.csv")
    (out / "aggregate.txt").write_text(report.to_text())
    print(report.to_text(), end="")
    return EXIT_OK


# --------------------------------------------------------------------------

def _shaping_flags(p):
    p.add_argument("--order", type=int, default=8, help="reduced feedforward order")
    p.add_argument("--hp-corner", type=float, default=2 * np.pi / 200, help="high-pass corner [rad/s]")
    p.add_argument("--no-shaping", action="store_true", help="keep the full-order, unfiltered controller")
    p.add_argument("--channel", choices=("auto", *CHANNELS), default="auto")


def _model_flags(p):
    p.add_argument("--plant", help="plant parameter JSON (default: shipped demo)")
    p.add_argument("--coefficients", help="force coefficient CSV (default: shipped reference set)")
    p.add_argument("--pwem", help="identified model JSON (default: identify from coefficients)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wavefeed", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("identify", help="identify the wave-force model from coefficients")
    p.add_argument("coefficients", nargs="?", help="coefficient CSV (default: shipped reference set)")
    p.add_argument("--order", type=int, default=9)
    p.add_argument("--t-p", default="auto", help="prediction time in s, or 'auto'")
    p.add_argument("--threshold", type=float, default=85.0, help="minimum fit percent per output")
    p.add_argument("--out")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("synthesize", help="synthesize the feedforward controller and Bode data")
    _model_flags(p)
    p.add_argument("--wind", type=float, default=8.0, help="mean wind speed of the operating point")
    p.add_argument("--k-ff", type=float, default=1.0)
    _shaping_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("simulate", help="simulate one scenario")
    _model_flags(p)
    p.add_argument("--case", type=int, help="load case number 1..7")
    p.add_argument("--wind", type=float)
    p.add_argument("--hs", type=float, default=2.0)
    p.add_argument("--ts", type=float, default=8.0)
    p.add_argument("--mode", choices=MODES, default="BL+FF")
    p.add_argument("--duration", type=float, default=3600.0)
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--wave-seed", type=int, default=1)
    p.add_argument("--wind-seed", type=int, default=1)
    p.add_argument("--k-ff", type=float, default=1.0)
    p.add_argument("--ti", type=float, default=0.04, help="rotor-effective turbulence intensity")
    p.add_argument("--distance", type=float, default=313.0, help="upstream measurement distance [m]")
    p.add_argument("--record-stride", type=int, default=1)
    _shaping_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("campaign", help="run modes x load cases x seeds and aggregate")
    p.add_argument("--config", help="campaign JSON file")
    p.add_argument("--write-config", metavar="PATH", help="write the default config and exit")
    p.add_argument("--modes", nargs="+", choices=MODES)
    p.add_argument("--seeds", nargs="+", type=int)
    p.add_argument("--k-ff", type=float)
    p.add_argument("--duration", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--cases", help="load-case CSV (default: built-in table)")
    p.add_argument("--plant")
    p.add_argument("--coefficients")
    p.add_argument("--no-records", action="store_true", help="skip per-run CSV records")
    p.add_argument("--out")
    p.set_defaults(func=cmd_campaign)

    p = sub.add_parser("report", help="re-aggregate a finished campaign")
    p.add_argument("directory")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as err:
        print(f"wavefeed: usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (CoefficientFormatError, json.JSONDecodeError, FileNotFoundError) as err:
        print(f"wavefeed: cannot parse input: {err}", file=sys.stderr)
        return EXIT_PARSE
    except IdentificationError as err:
        print(f"wavefeed: identification failed: {err}", file=sys.stderr)
        return EXIT_IDENT
    except NonMinimumPhaseError as err:
        zeros = ", ".join(f"{z:.4g}" for z in err.zeros)
        print(f"wavefeed: synthesis failed, non-minimum-phase zeros at {zeros}", file=sys.stderr)
        return EXIT_SYNTH
    except (ShapingError, LTIError) as err:
        print(f"wavefeed: synthesis failed: {err}", file=sys.stderr)
        return EXIT_SYNTH
    except ValueError as err:
        print(f"wavefeed: invalid input: {err}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
