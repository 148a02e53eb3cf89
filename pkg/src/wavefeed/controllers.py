"""Baseline variable-speed/variable-pitch feedback and wave feedforward.

The baseline regulates rotor speed with an optimal-mode torque law below
rated and a gain-scheduled PI pitch loop above rated. The feedforward
controller maps the predicted wave elevation at the platform to a torque
or pitch increment that cancels the wave-induced rotor-speed response of
the linear plant.
"""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .lti import (NonMinimumPhaseError, StateSpaceModel, from_transfer_function, freqresp, invert,
                  minimal_realization, reduce_order, relative_degree, series, static_gain, subsystem,
                  zeros)
from .lti import feedback as close_loop
from .plant import OperatingPoint, PlantParameters, linearize, operating_point, wave_path
from .waves import WAVE_BAND

TORQUE, PITCH = "torque", "pitch"
CHANNELS = (TORQUE, PITCH)
CHANNEL_INPUT = {TORQUE: "gen_torque", PITCH: "pitch"}
FF_INPUT = "eta_pred"
DEFAULT_HP_CORNER = 2 * np.pi / 200
DEFAULT_FF_ORDER = 8
LIFT_CORNER = 1.0
HYSTERESIS = 0.5

__all__ = [
    "TORQUE", "PITCH", "CHANNELS", "CHANNEL_INPUT", "FeedbackConfig", "BaselineController",
    "baseline_action", "linear_feedback", "closed_loop", "ShapingConfig", "ShapingError",
    "FeedforwardController", "synthesize_ff", "shape_controller", "schedule_channel",
    "design_feedforward", "band_deviation_db",
]


class ShapingError(RuntimeError):
    """Reduced and filtered controller departs too far from the full order on the band."""


# --------------------------------------------------------------------------
# baseline feedback

@dataclass(frozen=True)
class FeedbackConfig:
    """Gains and limits of the baseline speed regulator.

    Angles are in rad, speeds in rad/s, torques in N m. PI gains are
    tabulated against blade pitch and interpolated linearly.
    """

    optimal_gain: float
    rated_speed: float
    rated_power: float
    schedule_pitch: tuple[float, ...]
    proportional_gain: tuple[float, ...]
    integral_gain: tuple[float, ...]
    min_pitch: float = 0.0
    max_pitch: float = np.radians(90.0)
    max_pitch_rate: float = np.radians(10.0)
    max_torque_ratio: float = 1.2
    max_torque_rate: float = 2.0e7
    filter_corner: float = 2.0

    def __post_init__(self):
        for name in ("schedule_pitch", "proportional_gain", "integral_gain"):
            object.__setattr__(self, name, tuple(float(v) for v in np.atleast_1d(getattr(self, name))))
        n = len(self.schedule_pitch)
        if n == 0 or len(self.proportional_gain) != n or len(self.integral_gain) != n:
            raise ValueError("gain schedule needs matching, non-empty pitch and gain tables")
        if n > 1 and np.any(np.diff(self.schedule_pitch) <= 0):
            raise ValueError("schedule_pitch must be strictly increasing")
        gains = np.r_[self.proportional_gain, self.integral_gain, self.optimal_gain]
        if not np.all(np.isfinite(gains)) or np.any(gains < 0):
            raise ValueError("controller gains must be finite and non-negative")
        for name in ("rated_speed", "rated_power", "max_pitch_rate", "max_torque_ratio",
                     "max_torque_rate", "filter_corner"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.max_pitch > self.min_pitch:
            raise ValueError("max_pitch must exceed min_pitch")

    @property
    def rated_torque(self) -> float:
        return self.rated_power / self.rated_speed

    @property
    def max_torque(self) -> float:
        return self.max_torque_ratio * self.rated_torque

    def pi_gains(self, pitch: float) -> tuple[float, float]:
        kp = np.interp(pitch, self.schedule_pitch, self.proportional_gain)
        ki = np.interp(pitch, self.schedule_pitch, self.integral_gain)
        return float(kp), float(ki)

    @classmethod
    def from_plant(cls, params: PlantParameters, bandwidth: float = 0.12, damping: float = 0.7,
                   **limits) -> FeedbackConfig:
        """Pole placement of the rigid-rotor speed loop at each tabulated pitch.

        With ``J dOmega/dt = a dOmega + G dtheta`` and constant-power torque,
        ``a = dQ/dOmega + P/Omega_r^2``, the PI law puts the closed-loop
        poles at natural frequency ``bandwidth`` with the given damping.
        """
        if params.table is None:
            params = params.with_table()
        tab = params.table
        above = tab.wind_speed > params.rated_wind_speed
        if not np.any(above):
            raise ValueError("gradient table has no above-rated entries")
        J = params.drivetrain_inertia
        pitch = tab.pitch[above]
        G = tab.dQ_dtheta[above]
        a = tab.dQ_domega[above] + params.rated_power / params.rated_speed**2
        # at high wind the aerodynamic damping alone exceeds the target
        kp = np.maximum(-(2 * damping * bandwidth * J + a) / G, 0.0)
        ki = -bandwidth**2 * J / G
        order = np.argsort(pitch)
        return cls(params.optimal_gain, params.rated_speed, params.rated_power,
                   tuple(pitch[order]), tuple(kp[order]), tuple(ki[order]),
                   min_pitch=params.min_pitch, **limits)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> FeedbackConfig:
        return cls(**data)


@dataclass
class BaselineController:
    """Discrete-time baseline regulator with anti-windup and rate limits."""

    config: FeedbackConfig
    filtered_speed: float = 0.0
    integrator: float = field(default=np.nan)
    torque: float = 0.0
    pitch: float = field(default=np.nan)

    def __post_init__(self):
        if np.isnan(self.integrator):
            self.integrator = self.config.min_pitch
        if np.isnan(self.pitch):
            self.pitch = self.config.min_pitch

    def reset(self, op: OperatingPoint) -> None:
        """Start at the steady state of ``op``."""
        self.filtered_speed = op.rotor_speed
        self.integrator = op.pitch
        self.torque = op.gen_torque
        self.pitch = op.pitch

    def step(self, omega_meas: float, dt: float) -> tuple[float, float]:
        """Advance one sample and return ``(torque, pitch)``."""
        cfg = self.config
        if omega_meas < 0:
            raise ValueError("measured rotor speed must be non-negative")
        alpha = np.exp(-cfg.filter_corner * dt)
        self.filtered_speed = alpha * self.filtered_speed + (1 - alpha) * omega_meas
        w = self.filtered_speed

        tau = cfg.optimal_gain * w * w
        if w > 0:
            tau = min(tau, cfg.rated_power / w)
        step = cfg.max_torque_rate * dt
        tau = min(max(tau, self.torque - step, 0.0), self.torque + step, cfg.max_torque)

        kp, ki = cfg.pi_gains(self.pitch)
        err = w - cfg.rated_speed
        integ = self.integrator + ki * err * dt
        theta = kp * err + integ
        step = cfg.max_pitch_rate * dt
        lo = max(cfg.min_pitch, self.pitch - step)
        hi = min(cfg.max_pitch, self.pitch + step)
        if not lo <= theta <= hi:
            theta = min(max(theta, lo), hi)
            integ = theta - kp * err   # back-calculation anti-windup
        self.integrator = integ
        self.torque, self.pitch = float(tau), float(theta)
        return self.torque, self.pitch


def baseline_action(controller: BaselineController, omega_meas: float, dt: float) -> tuple[float, float]:
    return controller.step(omega_meas, dt)


def linear_feedback(cfg: FeedbackConfig, op: OperatingPoint) -> StateSpaceModel:
    """Small-signal model of the baseline: rotor-speed deviation to torque and pitch."""
    wc = cfg.filter_corner
    lpf = from_transfer_function([wc], [1.0, wc])
    if op.rotor_speed < cfg.rated_speed * (1 - 1e-9):
        gain = np.array([[2 * cfg.optimal_gain * op.rotor_speed], [0.0]])
        law = static_gain(gain)
    else:
        kp, ki = cfg.pi_gains(op.pitch)
        A = np.zeros((1, 1))
        B = np.ones((1, 1))
        C = np.array([[0.0], [ki]])
        D = np.array([[-cfg.rated_power / op.rotor_speed**2], [kp]])
        law = StateSpaceModel(A, B, C, D)
    model = series(law, lpf)
    return model.renamed(("rotor_speed",), ("gen_torque", "pitch"))


def closed_loop(plant: StateSpaceModel, fb: StateSpaceModel) -> StateSpaceModel:
    """Plant with the baseline loop closed; all plant inputs stay external."""
    return close_loop(plant, fb, ["rotor_speed"], ["gen_torque", "pitch"])


# --------------------------------------------------------------------------
# feedforward synthesis

@dataclass(frozen=True)
class ShapingConfig:
    order: int | None = DEFAULT_FF_ORDER
    hp_corner: float | None = DEFAULT_HP_CORNER
    band: tuple[float, float] = WAVE_BAND
    tolerance_db: float = 3.0


@dataclass(frozen=True)
class FeedforwardController:
    """Predicted elevation to control increment.

    ``unit`` is the controller at ``k_ff = 1``; ``transfer`` scales its
    output by ``k_ff`` so the response is exactly linear in the gain.
    ``full`` keeps the unshaped synthesis result for comparison.
    """

    channel: str
    unit: StateSpaceModel
    k_ff: float = 1.0
    hp_corner: float | None = None
    order: int | None = None
    full: StateSpaceModel | None = None

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValueError(f"channel must be one of {CHANNELS}, got {self.channel!r}")
        if not np.isfinite(self.k_ff):
            raise ValueError("k_ff must be finite")
        if self.unit.n_states and not self.unit.is_stable():
            raise ValueError("feedforward controller must be stable")
        if self.hp_corner is not None and self.unit.n_states:
            dc = np.abs(freqresp(self.unit, [0.0])).max()
            peak = np.abs(freqresp(self.unit, np.linspace(*WAVE_BAND, 50))).max()
            if dc > 1e-9 * max(peak, 1e-300):
                raise ValueError("shaped controller must vanish at DC")

    @property
    def transfer(self) -> StateSpaceModel:
        return self.unit.scaled(self.k_ff)

    def with_gain(self, k_ff: float) -> FeedforwardController:
        return replace(self, k_ff=float(k_ff))

    def to_dict(self) -> dict:
        return {"channel": self.channel, "k_ff": self.k_ff, "hp_corner": self.hp_corner,
                "order": self.order, "unit": self.unit.to_dict(),
                "full": self.full.to_dict() if self.full is not None else None}

    @classmethod
    def from_dict(cls, data: dict) -> FeedforwardController:
        full = data.get("full")
        return cls(data["channel"], StateSpaceModel.from_dict(data["unit"]), float(data["k_ff"]),
                   data.get("hp_corner"), data.get("order"),
                   StateSpaceModel.from_dict(full) if full else None)


def _lift(model: StateSpaceModel, r: int, a: float) -> StateSpaceModel:
    """Multiply a model of relative degree >= r by ``(s + a)^r``."""
    A, B, C, D = model.A, model.B, model.C, model.D
    shift = A + a * np.eye(model.n_states)
    for _ in range(r):
        C, D = C @ shift, C @ B
    return StateSpaceModel(A, B, C, D, model.input_names, model.output_names)


def _is_zero(model: StateSpaceModel) -> bool:
    return not np.any(model.D) and (model.n_states == 0 or not np.any(model.C) or not np.any(model.B))


def synthesize_ff(g_eta_to_omega: StateSpaceModel, g_u_to_omega: StateSpaceModel, k_ff: float = 1.0,
                  shaping: ShapingConfig | None = None, channel: str = TORQUE,
                  epsilon: float = 0.05) -> FeedforwardController:
    """Feedforward ``C = -k G_eta G_u^-1``, optionally reduced and high-pass filtered.

    The inverse is made proper by lifting both factors with ``(s + a)^r``,
    ``r`` the relative degree of ``G_u``, which keeps the cancellation
    exact. Only when ``G_eta`` has lower relative degree is the inverse
    rolled off with ``1/(epsilon s + 1)^r``.
    """
    for g in (g_eta_to_omega, g_u_to_omega):
        if g.n_inputs != 1 or g.n_outputs != 1:
            raise ValueError("feedforward synthesis expects SISO models")
        if g.n_states and not g.is_stable():
            raise ValueError("feedforward synthesis needs stable models")
    out_name = CHANNEL_INPUT[channel]
    if _is_zero(g_eta_to_omega):
        unit = static_gain([[0.0]], (FF_INPUT,), (out_name,))
        return FeedforwardController(channel, unit, float(k_ff), None, 0, unit)

    z = zeros(g_u_to_omega)
    if np.any(z.real >= 0):
        raise NonMinimumPhaseError(z, "control-to-speed path is non-minimum phase; "
                                      "exact inversion would be unstable")
    r = relative_degree(g_u_to_omega)
    if r > g_u_to_omega.n_states:
        raise ValueError("control-to-speed path is identically zero")
    r_eta = relative_degree(g_eta_to_omega, tol=1e-9)
    if r == 0:
        inverse = invert(g_u_to_omega)
        unit = series(inverse, g_eta_to_omega)
    elif r_eta >= r:
        inverse = invert(_lift(g_u_to_omega, r, LIFT_CORNER))
        unit = series(inverse, _lift(g_eta_to_omega, r, LIFT_CORNER))
    else:
        warnings.warn(f"wave path has relative degree {r_eta} < {r}; "
                      f"rolling off the inverse, cancellation is approximate", stacklevel=2)
        # (epsilon s + 1)^r G_u is biproper
        inverse = invert(_lift(g_u_to_omega, r, 1 / epsilon).scaled(epsilon**r))
        unit = series(inverse, g_eta_to_omega)
    full = minimal_realization(unit.scaled(-1.0)).renamed((FF_INPUT,), (out_name,))

    if shaping is None:
        return FeedforwardController(channel, full, float(k_ff), None, full.n_states, full)
    shaped = shape_controller(full, shaping.order, shaping.hp_corner, shaping.band, shaping.tolerance_db)
    return FeedforwardController(channel, shaped, float(k_ff), shaping.hp_corner, shaped.n_states, full)


def band_deviation_db(model: StateSpaceModel, reference: StateSpaceModel,
                      band=WAVE_BAND, points: int = 400) -> float:
    w = np.linspace(band[0], band[1], points)
    a = np.abs(freqresp(model, w)[:, 0, 0])
    b = np.abs(freqresp(reference, w)[:, 0, 0])
    return float(np.max(np.abs(20 * np.log10(a / b))))


def shape_controller(full: StateSpaceModel, target_order: int | None = DEFAULT_FF_ORDER,
                     hp_corner: float | None = DEFAULT_HP_CORNER, band=WAVE_BAND,
                     tolerance_db: float = 3.0) -> StateSpaceModel:
    """Balanced truncation to ``target_order`` followed by ``s/(s + hp_corner)``."""
    if full.n_states and not full.is_stable():
        raise ValueError("controller to shape must be stable")
    reduced = full
    if target_order is not None and target_order < full.n_states:
        reduced = reduce_order(full, target_order).model
    shaped = reduced
    if hp_corner is not None:
        if not hp_corner > 0:
            raise ValueError("hp_corner must be positive")
        hpf = StateSpaceModel([[-hp_corner]], [[1.0]], [[-hp_corner]], [[1.0]],
                              full.output_names, full.output_names)
        shaped = series(hpf, reduced)
    dev = band_deviation_db(shaped, full, band)
    if dev > tolerance_db:
        raise ShapingError(f"shaped controller deviates {dev:.2f} dB from full order on the band; "
                           f"raise target_order above {target_order}")
    return shaped


def schedule_channel(wind_speed: float | OperatingPoint, rated_wind_speed: float,
                     previous: str | None = None, hysteresis: float = HYSTERESIS) -> str:
    """Torque below rated, pitch above, holding ``previous`` inside the hysteresis band."""
    v = wind_speed.wind_speed if isinstance(wind_speed, OperatingPoint) else float(wind_speed)
    if v > rated_wind_speed + hysteresis / 2:
        return PITCH
    if v < rated_wind_speed - hysteresis / 2:
        return TORQUE
    if previous is not None:
        if previous not in CHANNELS:
            raise ValueError(f"unknown channel {previous!r}")
        return previous
    return PITCH if v > rated_wind_speed else TORQUE


def design_feedforward(params: PlantParameters, pwem, wind_speed: float, k_ff: float = 1.0,
                       shaping: ShapingConfig | None = ShapingConfig(), channel: str | None = None,
                       ) -> FeedforwardController:
    """Synthesize the feedforward for the linear plant at ``wind_speed``."""
    op = operating_point(params, wind_speed)
    plant = linearize(params, op)
    channel = channel or schedule_channel(op, params.rated_wind_speed)
    g_eta = subsystem(wave_path(plant, pwem), pwem.model.input_names[0], "rotor_speed")
    g_u = subsystem(plant, CHANNEL_INPUT[channel], "rotor_speed")
    return synthesize_ff(g_eta, g_u, k_ff, shaping, channel)
