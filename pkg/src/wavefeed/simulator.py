"""Closed-loop time-domain simulation of the linear plant with the baseline
and wave feedforward controllers under irregular waves and turbulent wind.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import signal

from . import __version__
from .controllers import (CHANNEL_INPUT, PITCH, TORQUE, BaselineController, FeedbackConfig,
                          FeedforwardController, ShapingConfig, design_feedforward, schedule_channel)
from .forces import ForceCoefficientSet, PwemModel, identify_pwem, load_reference_coefficients
from .lti import discretize
from .metrics import DEFAULT_TRANSIENT, LoadCase
from .plant import FORCE_INPUTS, PlantParameters, demo_parameters, linearize, operating_point
from .waves import (PredictionConfig, WavePredictor, WaveRealization, WaveSpectrumParams,
                    elevation_at, linear_response, synthesize_realization)

MODES = ("BL", "BL+FF", "BL-no-waves")
DIVERGENCE_LIMIT = 1e9
WIND_CORNER_HZ = 0.02
DEFAULT_TI = 0.04

CHANNEL_UNITS = {
    "rotor_speed": "rad/s",
    "power": "W",
    "pitch": "rad",
    "pitch_rate": "rad/s",
    "gen_torque": "N m",
    "platform_pitch": "rad",
    "platform_surge": "m",
    "tower_deflection": "m",
    "tower_base_moment": "N m",
    "blade_root_moment": "N m",
    "shaft_moment": "N m",
    "wind_speed": "m/s",
    "eta_upstream": "m",
    "eta_platform": "m",
    "eta_predicted": "m",
    "surge_force": "N",
    "pitch_moment": "N m",
    "u_ff": "N m | rad",
}


class SimulationDivergedError(RuntimeError):
    def __init__(self, time: float, state: np.ndarray):
        self.time, self.state = time, state
        super().__init__(f"simulation diverged at t = {time:.2f} s "
                         f"(max |state| = {np.abs(state).max():.3g})")


@dataclass(frozen=True)
class Scenario:
    """One closed-loop run.

    ``waves`` overrides the spectral realization (for example a single
    component); ``turbulence_intensity`` applies to the rotor-effective
    wind.  ``force_model`` selects the wave-force truth: raw coefficients
    or the identified model.
    """

    load_case: LoadCase
    mode: str = "BL"
    duration: float = 3600.0
    dt: float = 0.05
    wave_seed: int = 0
    wind_seed: int = 0
    k_ff: float = 1.0
    prediction: PredictionConfig = PredictionConfig(313.0, 10.0)
    turbulence_intensity: float = DEFAULT_TI
    num_components: int = 50
    shaping: ShapingConfig | None = ShapingConfig()
    channel_mode: str = "auto"
    force_model: str = "coefficients"
    ramp_time: float = 60.0
    transient: float = DEFAULT_TRANSIENT
    waves: WaveRealization | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.duration < 600.0:
            raise ValueError("duration must be at least 600 s")
        if not 0 < self.dt <= 0.25:
            raise ValueError("dt must lie in (0, 0.25] s")
        if self.turbulence_intensity < 0:
            raise ValueError("turbulence intensity must be non-negative")
        if self.channel_mode not in ("auto", TORQUE, PITCH):
            raise ValueError("channel_mode must be auto, torque or pitch")
        if self.force_model not in ("coefficients", "pwem"):
            raise ValueError("force_model must be 'coefficients' or 'pwem'")
        if not 0 <= self.ramp_time < self.transient:
            raise ValueError("ramp_time must be shorter than the transient window")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["waves"] = None if self.waves is None else {
            "amplitudes": self.waves.amplitudes.tolist(),
            "frequencies": self.waves.frequencies.tolist(),
            "phases": self.waves.phases.tolist()}
        return d

    @classmethod
    def from_dict(cls, data: dict) -> Scenario:
        data = dict(data)
        data["load_case"] = LoadCase(**data["load_case"])
        if isinstance(data.get("prediction"), dict):
            data["prediction"] = PredictionConfig(**data["prediction"])
        if isinstance(data.get("shaping"), dict):
            sh = dict(data["shaping"])
            sh["band"] = tuple(sh.get("band", ShapingConfig().band))
            data["shaping"] = ShapingConfig(**sh)
        if isinstance(data.get("waves"), dict):
            w = data["waves"]
            data["waves"] = WaveRealization.from_components(w["amplitudes"], w["frequencies"], w["phases"])
        return cls(**data)


@dataclass(frozen=True)
class SimulationRecord:
    """Uniformly sampled channels of one run; ``transient`` seconds are excluded from metrics."""

    time: np.ndarray
    channels: dict
    transient: float = DEFAULT_TRANSIENT
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.time)
        for name, values in self.channels.items():
            if len(values) != n:
                raise ValueError(f"channel {name} has {len(values)} samples, expected {n}")
            if not np.all(np.isfinite(values)):
                raise ValueError(f"channel {name} contains non-finite values")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.channels[name]

    @property
    def steady_mask(self) -> np.ndarray:
        return self.time >= self.time[0] + self.transient

    def to_csv(self, path: str | Path, stride: int = 1) -> None:
        """Write channels as CSV plus a JSON metadata sidecar next to it."""
        path = Path(path)
        names = list(self.channels)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time [s]"] + [f"{n} [{CHANNEL_UNITS.get(n, '-')}]" for n in names])
            data = np.column_stack([self.time] + [self.channels[n] for n in names])[::stride]
            for row in data:
                w.writerow([repr(float(v)) for v in row])
        meta = dict(self.metadata, transient=self.transient, stride=stride, channels=names)
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2, default=str))

    @classmethod
    def from_csv(cls, path: str | Path) -> SimulationRecord:
        path = Path(path)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            data = np.array([[float(v) for v in row] for row in reader])
        names = [h.rsplit(" [", 1)[0] for h in header[1:]]
        meta_path = path.with_suffix(".json")
        meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
        return cls(data[:, 0], {n: data[:, i + 1] for i, n in enumerate(names)},
                   float(meta.get("transient", DEFAULT_TRANSIENT)), meta)


# --------------------------------------------------------------------------
# disturbances

def wind_series(mean: float, turbulence_intensity: float, seed: int, duration: float, dt: float,
                corner_hz: float = WIND_CORNER_HZ) -> np.ndarray:
    """Rotor-effective wind: mean plus first-order filtered Gaussian noise.

    The AR(1) process starts in its stationary distribution and has
    standard deviation ``turbulence_intensity * mean``.
    """
    if turbulence_intensity < 0:
        raise ValueError("turbulence intensity must be non-negative")
    n = int(round(duration / dt))
    sigma = turbulence_intensity * mean
    if sigma == 0:
        return np.full(n, float(mean))
    phi = np.exp(-2 * np.pi * corner_hz * dt)
    noise = np.random.default_rng(seed).standard_normal(n)
    drive = np.sqrt(1 - phi**2) * noise
    drive[0] = noise[0]
    return mean + sigma * signal.lfilter([1.0], [1.0, -phi], drive)


def _ramp(t: np.ndarray, ramp_time: float) -> np.ndarray:
    if ramp_time <= 0:
        return np.ones_like(t)
    return np.where(t < ramp_time, 0.5 - 0.5 * np.cos(np.pi * np.clip(t, 0, None) / ramp_time), 1.0)


def _interp_complex(grid: np.ndarray, values: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.interp(w, grid, values.real) + 1j * np.interp(w, grid, values.imag)


def wave_force_gains(waves: WaveRealization, coeffs: ForceCoefficientSet | None,
                     pwem: PwemModel | None, source: str = "coefficients") -> np.ndarray:
    """Complex elevation-to-force gains at each wave component, shape ``(n, 2)``."""
    w = waves.frequencies
    if source == "pwem":
        return pwem.non_causal_response(w)
    grid, vals = coeffs.frequencies, coeffs.values
    if w.size and (w.min() < grid[0] or w.max() > grid[-1]):
        raise ValueError("wave components fall outside the coefficient grid")
    return np.column_stack([_interp_complex(grid, vals[:, j], w) for j in range(vals.shape[1])])


@lru_cache(maxsize=8)
def _reference_pwem(t_p: float) -> PwemModel:
    return identify_pwem(load_reference_coefficients(), t_p)


def default_models(t_p: float = 10.0) -> tuple[PlantParameters, ForceCoefficientSet, PwemModel]:
    return demo_parameters(), load_reference_coefficients(), _reference_pwem(float(t_p))


# --------------------------------------------------------------------------
# closed-loop run

def feedforward_command(ff: FeedforwardController, eta_pred: np.ndarray, dt: float) -> np.ndarray:
    """Causal controller output from the predicted elevation (Tustin discretization)."""
    model = ff.transfer
    if model.n_states == 0:
        return model.D[0, 0] * eta_pred + 0.0
    A, B, C, D, _ = signal.cont2discrete((model.A, model.B, model.C, model.D), dt, method="bilinear")
    _, y, _ = signal.dlsim((A, B, C, D, dt), eta_pred)
    return y[:, 0] + 0.0


def _rate_limit(u: np.ndarray, rate: float, lo: float, hi: float) -> np.ndarray:
    out = np.empty_like(u)
    prev = 0.0
    for k, v in enumerate(u):
        v = min(max(v, prev - rate, lo), prev + rate, hi)
        out[k] = prev = v
    return out


def run(scenario: Scenario, params: PlantParameters | None = None,
        coeffs: ForceCoefficientSet | None = None, pwem: PwemModel | None = None,
        feedback: FeedbackConfig | None = None, feedforward: FeedforwardController | None = None,
        ) -> SimulationRecord:
    """Simulate ``scenario`` and return the record.

    Missing models default to the shipped demo plant, reference force
    coefficients and the model identified from them.  When ``feedforward``
    is given it is used as is (with the scenario's ``k_ff``), otherwise it
    is synthesized for the load case operating point.
    """
    sc = scenario
    if params is None or coeffs is None or pwem is None:
        d_params, d_coeffs, d_pwem = default_models(sc.prediction.prediction_time)
        params, coeffs, pwem = params or d_params, coeffs or d_coeffs, pwem or d_pwem
    if abs(pwem.t_p - sc.prediction.prediction_time) > 1e-9:
        raise ValueError(f"force model lead {pwem.t_p} s differs from prediction time "
                         f"{sc.prediction.prediction_time} s")
    feedback = feedback or FeedbackConfig.from_plant(params)
    case = sc.load_case
    op = operating_point(params, case.wind_speed)
    plant = discretize(linearize(params, op), sc.dt)

    n = int(round(sc.duration / sc.dt))
    t = np.arange(n) * sc.dt
    ramp = _ramp(t, sc.ramp_time)

    # disturbances
    wind = wind_series(case.wind_speed, sc.turbulence_intensity, sc.wind_seed, sc.duration, sc.dt)
    wind = case.wind_speed + ramp * (wind - case.wind_speed)
    with_waves = sc.mode != "BL-no-waves" and (sc.waves is not None or case.hs > 0)
    forces = np.zeros((n, 2))
    eta_up = eta_0 = eta_pred = u_ff = np.zeros(n)
    channel = None
    if with_waves:
        waves = sc.waves or synthesize_realization(
            WaveSpectrumParams(case.hs, case.ts, num_components=sc.num_components, seed=sc.wave_seed))
        gains = wave_force_gains(waves, coeffs, pwem, sc.force_model)
        forces = ramp[:, None] * linear_response(waves, gains, t)
        eta_0 = elevation_at(waves, 0.0, t)
        predictor = WavePredictor(sc.prediction, sc.dt)
        # the upstream probe has been recording before t = 0
        hist = predictor.length - 1
        t_up = np.arange(-hist, n) * sc.dt
        eta_up_full = elevation_at(waves, -sc.prediction.upstream_distance, t_up)
        eta_up = eta_up_full[hist:]
        eta_pred = predictor.apply(eta_up_full)[hist:]
        if sc.mode == "BL+FF":
            if sc.channel_mode == "auto":
                channel = schedule_channel(op, params.rated_wind_speed)
            else:
                channel = sc.channel_mode
            ff = feedforward if feedforward is not None else design_feedforward(
                params, pwem, case.wind_speed, 1.0, sc.shaping, channel)
            channel = ff.channel
            ff = ff.with_gain(sc.k_ff)
            raw = ramp * feedforward_command(ff, eta_pred, sc.dt)
            if channel == TORQUE:
                u_ff = _rate_limit(raw, feedback.max_torque_rate * sc.dt, -feedback.max_torque,
                                   feedback.max_torque)
            else:
                span = feedback.max_pitch - feedback.min_pitch
                u_ff = _rate_limit(raw, feedback.max_pitch_rate * sc.dt, -span, span)
    ff_torque = u_ff if channel == TORQUE else np.zeros(n)
    ff_pitch = u_ff if channel == PITCH else np.zeros(n)

    # exogenous part of the state update, precomputed
    iu = [plant.input_index(name) for name in ("gen_torque", "pitch")]
    ie = [plant.input_index("wind")] + [plant.input_index(f) for f in FORCE_INPUTS]
    exo = np.column_stack([wind - case.wind_speed, forces])
    Bx = exo @ plant.B[:, ie].T
    A, Bu = plant.A, plant.B[:, iu]
    c_omega = plant.C[plant.output_index("rotor_speed")]
    if np.any(plant.D[plant.output_index("rotor_speed")]):
        raise ValueError("rotor speed must not have direct feedthrough")

    ctrl = BaselineController(feedback)
    ctrl.reset(op)
    tau0, theta0, omega0 = op.gen_torque, op.pitch, op.rotor_speed
    tau_max, th_lo, th_hi = feedback.max_torque, feedback.min_pitch, feedback.max_pitch
    x = np.zeros(plant.n_states)
    X = np.empty((n, plant.n_states))
    U = np.empty((n, 2))
    step = ctrl.step
    for k in range(n):
        X[k] = x
        tau_fb, th_fb = step(omega0 + float(c_omega @ x), sc.dt)
        tau = min(max(tau_fb + ff_torque[k], 0.0), tau_max)
        theta = min(max(th_fb + ff_pitch[k], th_lo), th_hi)
        u = (tau - tau0, theta - theta0)
        U[k] = u
        x = A @ x + Bu @ u + Bx[k]
        if k % 200 == 199 and not np.abs(x).max() < DIVERGENCE_LIMIT:
            raise SimulationDivergedError(t[k], x)
    if not np.abs(x).max() < DIVERGENCE_LIMIT:
        raise SimulationDivergedError(t[-1], x)

    full_u = np.zeros((n, plant.n_inputs))
    full_u[:, iu] = U
    full_u[:, ie] = exo
    Y = X @ plant.C.T + full_u @ plant.D.T
    steady = op.steady_outputs(params)
    out = {name: steady[name] + Y[:, plant.output_index(name)] for name in plant.output_names}
    pitch_cmd = theta0 + U[:, 1]
    channels = {
        "rotor_speed": out["rotor_speed"],
        "power": out["power"],
        "pitch": pitch_cmd,
        "pitch_rate": np.r_[0.0, np.diff(pitch_cmd)] / sc.dt,
        "gen_torque": tau0 + U[:, 0],
        "platform_pitch": out["platform_pitch"],
        "platform_surge": out["platform_surge"],
        "tower_deflection": out["tower_deflection"],
        "tower_base_moment": out["tower_base_moment"],
        "blade_root_moment": out["blade_root_moment"],
        "shaft_moment": out["shaft_moment"],
        "wind_speed": wind,
        "eta_upstream": eta_up,
        "eta_platform": eta_0,
        "eta_predicted": eta_pred,
        "surge_force": forces[:, 0],
        "pitch_moment": forces[:, 1],
        "u_ff": u_ff,
    }
    meta = {"scenario": sc.to_dict(), "channel": channel, "version": __version__,
            "operating_point": {"wind_speed": op.wind_speed, "rotor_speed": op.rotor_speed,
                                "pitch": op.pitch, "gen_torque": op.gen_torque}}
    return SimulationRecord(t, channels, sc.transient, meta)


def with_mode(scenario: Scenario, mode: str, **changes) -> Scenario:
    return replace(scenario, mode=mode, **changes)
