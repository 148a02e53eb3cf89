"""Performance measures: speed regulation, power, pitch activity and fatigue.

Fatigue uses four-point rainflow counting with the residue counted as
half cycles, and 1 Hz damage equivalent loads.  Campaign aggregates weight
load cases by their occurrence probability.
"""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

RPM_PER_RAD_S = 60 / (2 * np.pi)
WOEHLER = {"tower_base_moment": 4.0, "blade_root_moment": 10.0, "shaft_moment": 4.0}
DEFAULT_TRANSIENT = 200.0


@dataclass(frozen=True)
class LoadCase:
    """Mean wind (m/s), significant height (m), spectral period (s), probability."""

    wind_speed: float
    hs: float
    ts: float
    probability: float

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability must lie in [0, 1], got {self.probability}")
        if self.wind_speed < 0 or self.hs < 0 or not self.ts > 0:
            raise ValueError("load case needs wind_speed >= 0, hs >= 0 and ts > 0")


TABLE1 = (
    LoadCase(5.0, 1.4, 7.0, 0.14),
    LoadCase(7.1, 1.7, 8.0, 0.24),
    LoadCase(10.3, 2.2, 8.0, 0.26),
    LoadCase(13.9, 3.0, 9.5, 0.20),
    LoadCase(17.9, 4.3, 10.0, 0.11),
    LoadCase(22.1, 6.2, 12.5, 0.038),
    LoadCase(25.0, 8.3, 12.0, 0.0074),
)


def read_load_cases(path: str | Path) -> tuple[LoadCase, ...]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    try:
        return tuple(LoadCase(float(r["wind_speed"]), float(r["hs"]), float(r["ts"]),
                              float(r["probability"])) for r in rows)
    except (KeyError, TypeError, ValueError) as err:
        raise ValueError(f"malformed load-case table {path}: {err}") from None


def write_load_cases(path: str | Path, cases: Sequence[LoadCase]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f.name for f in fields(LoadCase)])
        for c in cases:
            w.writerow([repr(v) for v in asdict(c).values()])


# --------------------------------------------------------------------------
# rainflow and damage equivalent loads

def turning_points(series) -> np.ndarray:
    """Local extrema including both end points; plateaus collapse to one sample."""
    x = np.asarray(series, dtype=float).ravel()
    if x.size == 0:
        return x
    keep = np.r_[True, np.diff(x) != 0]
    x = x[keep]
    if x.size < 3:
        return x
    d = np.diff(x)
    interior = np.flatnonzero(d[:-1] * d[1:] < 0) + 1
    return x[np.r_[0, interior, x.size - 1]]


def rainflow_count(series) -> list[tuple[float, float, float]]:
    """Cycles as ``(range, mean, count)`` with ``count`` 1.0 or 0.5."""
    x = np.asarray(series, dtype=float).ravel()
    if x.size < 3:
        raise ValueError("rainflow counting needs at least three samples")
    cycles: list[tuple[float, float, float]] = []
    stack: list[float] = []
    for p in turning_points(x):
        stack.append(float(p))
        while len(stack) >= 4:
            a, b, c, d = stack[-4:]
            inner = abs(c - b)
            if inner <= abs(b - a) and inner <= abs(d - c):
                cycles.append((inner, 0.5 * (b + c), 1.0))
                del stack[-3:-1]
            else:
                break
    for a, b in zip(stack[:-1], stack[1:]):
        cycles.append((abs(b - a), 0.5 * (a + b), 0.5))
    return cycles


def del_1hz(cycles, duration: float, woehler_m: float) -> float:
    """Damage equivalent load at a reference rate of one cycle per second."""
    if not duration > 0:
        raise ValueError("duration must be positive")
    if not woehler_m >= 1:
        raise ValueError("Woehler exponent must be >= 1")
    if len(cycles) == 0:
        return 0.0
    arr = np.asarray(cycles, dtype=float)
    ranges, counts = arr[:, 0], arr[:, 2]
    # normalize before the power so m = 10 cannot overflow
    top = ranges.max()
    if top == 0:
        return 0.0
    return float(top * (np.sum(counts * (ranges / top) ** woehler_m) / duration) ** (1 / woehler_m))


# --------------------------------------------------------------------------
# per-run metrics

@dataclass(frozen=True)
class RunMetrics:
    """Table-2 style measures of one run (RPM, kW, deg/s, kN m)."""

    std_rotor_speed: float
    mean_power: float
    mean_pitch_rate: float
    del_tower_base: float
    del_blade_root: float
    del_shaft: float

    def to_dict(self) -> dict:
        return asdict(self)


METRIC_LABELS = {
    "std_rotor_speed": "STD Omega [RPM]",
    "mean_power": "mean P [kW]",
    "mean_pitch_rate": "mean |pitch rate| [deg/s]",
    "del_tower_base": "DEL M_ty [kNm]",
    "del_blade_root": "DEL M_b [kNm]",
    "del_shaft": "DEL M_lss [kNm]",
}
DEL_EXPONENT = {"del_tower_base": WOEHLER["tower_base_moment"],
                "del_blade_root": WOEHLER["blade_root_moment"],
                "del_shaft": WOEHLER["shaft_moment"]}


def summarize(record, transient: float | None = None) -> RunMetrics:
    """Metrics over the part of ``record`` after the transient window."""
    transient = record.transient if transient is None else transient
    t = record.time
    if t[-1] - t[0] <= transient:
        raise ValueError(f"record of {t[-1] - t[0]:.1f} s is shorter than the {transient} s transient")
    keep = t >= t[0] + transient
    duration = float(t[keep][-1] - t[keep][0] + (t[1] - t[0]))

    def ch(name):
        return np.asarray(record.channels[name])[keep]

    dels = {key: del_1hz(rainflow_count(ch(chan)), duration, m) / 1e3
            for key, (chan, m) in zip(("del_tower_base", "del_blade_root", "del_shaft"),
                                      WOEHLER.items())}
    return RunMetrics(
        std_rotor_speed=float(np.std(ch("rotor_speed")) * RPM_PER_RAD_S),
        mean_power=float(np.mean(ch("power")) / 1e3),
        mean_pitch_rate=float(np.degrees(np.mean(np.abs(ch("pitch_rate"))))),
        **dels,
    )


def _weighted(values: np.ndarray, weights: np.ndarray, exponent: float | None) -> float:
    w = weights / weights.sum()
    if exponent is None:
        return float(np.sum(w * values))
    return float(np.sum(w * values**exponent) ** (1 / exponent))


def combine(metrics: Sequence[RunMetrics], weights=None) -> RunMetrics:
    """Weighted mean; DELs are averaged on their Woehler power then re-rooted."""
    if len(metrics) == 0:
        raise ValueError("nothing to combine")
    w = np.ones(len(metrics)) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (len(metrics),) or np.any(w < 0) or not w.sum() > 0:
        raise ValueError("weights must be non-negative with a positive sum")
    out = {}
    for f in fields(RunMetrics):
        vals = np.array([getattr(m, f.name) for m in metrics])
        out[f.name] = _weighted(vals, w, DEL_EXPONENT.get(f.name))
    return RunMetrics(**out)


# --------------------------------------------------------------------------
# campaign report

@dataclass(frozen=True)
class PerformanceReport:
    """Per-case and probability-weighted metrics for each controller mode."""

    modes: tuple[str, ...]
    cases: tuple[LoadCase, ...]
    per_case: Mapping[str, tuple[RunMetrics, ...]]
    aggregate: Mapping[str, RunMetrics]

    def ratio(self, numerator: str = "BL+FF", denominator: str = "BL") -> dict[str, float]:
        a, b = self.aggregate[numerator], self.aggregate[denominator]
        return {k: (getattr(a, k) / getattr(b, k) if getattr(b, k) != 0 else float("nan"))
                for k in METRIC_LABELS}

    def to_csv(self, path: str | Path) -> None:
        """Aggregate table: one row per metric, modes as columns, ratio last."""
        has_ratio = {"BL", "BL+FF"} <= set(self.modes)
        ratio = self.ratio() if has_ratio else {}
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", *self.modes] + (["BL+FF/BL"] if has_ratio else []))
            for key, label in METRIC_LABELS.items():
                row = [label] + [repr(getattr(self.aggregate[m], key)) for m in self.modes]
                w.writerow(row + ([repr(ratio[key])] if has_ratio else []))

    def per_case_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mode", "case", "wind_speed", "hs", "ts", "probability", *METRIC_LABELS])
            for mode in self.modes:
                for i, (case, m) in enumerate(zip(self.cases, self.per_case[mode]), start=1):
                    w.writerow([mode, i, case.wind_speed, case.hs, case.ts, case.probability,
                                *(repr(getattr(m, k)) for k in METRIC_LABELS)])

    def to_text(self) -> str:
        has_ratio = {"BL", "BL+FF"} <= set(self.modes)
        ratio = self.ratio() if has_ratio else {}
        head = ["", *self.modes] + (["BL+FF/BL"] if has_ratio else [])
        rows = [head]
        for key, label in METRIC_LABELS.items():
            row = [label] + [f"{getattr(self.aggregate[m], key):.4g}" for m in self.modes]
            if has_ratio:
                row.append(f"{100 * (ratio[key] - 1):+.1f}%")
            rows.append(row)
        widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
        lines = ["  ".join(c.ljust(widths[0]) if i == 0 else c.rjust(widths[i]) for i, c in enumerate(r))
                 for r in rows]
        return "\n".join(lines) + "\n"


def campaign_aggregate(per_case: Mapping[str, Sequence[RunMetrics | None]],
                       table: Sequence[LoadCase] = TABLE1) -> PerformanceReport:
    """Probability-weighted aggregate over the load-case table for every mode."""
    missing = {mode: [i + 1 for i in range(len(table))
                      if i >= len(rows) or rows[i] is None]
               for mode, rows in per_case.items()}
    missing = {m: rows for m, rows in missing.items() if rows}
    if missing:
        raise ValueError(f"missing load cases (1-based rows): {missing}")
    weights = np.array([c.probability for c in table])
    agg = {mode: combine(list(rows)[: len(table)], weights) for mode, rows in per_case.items()}
    return PerformanceReport(tuple(per_case), tuple(table),
                             {m: tuple(r) for m, r in per_case.items()}, agg)
