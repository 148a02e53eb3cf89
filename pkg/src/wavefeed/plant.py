"""Surrogate linear floating-turbine plant.

Three mechanical degrees of freedom (platform surge ``x_p``, platform pitch
``beta_p``, tower-top deflection ``x_d``), the rotor speed ``Omega`` and a
first-order generator-torque lag, linearized about an operating point.

Sign conventions: ``x`` points downwind, platform pitch is positive when the
tower leans downwind, and the hub position is ``x_p + h beta_p + x_d``. The
rotor sees the relative wind ``v - (x_p' + h beta_p' + x_d')``.

All model signals are deviations from the operating point; the
:class:`OperatingPoint` carries the steady values.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import linalg, optimize

from .lti import StateSpaceModel, series, subsystem

INPUTS = ("gen_torque", "pitch", "wind", "surge_force", "pitch_moment")
OUTPUTS = ("rotor_speed", "platform_pitch", "platform_surge", "tower_deflection",
           "tower_base_moment", "shaft_moment", "blade_root_moment", "power", "thrust")
STATES = ("platform_surge", "platform_pitch", "tower_deflection", "platform_surge_rate",
          "platform_pitch_rate", "tower_deflection_rate", "rotor_speed", "gen_torque_actual")
FORCE_INPUTS = ("surge_force", "pitch_moment")
GRAVITY = 9.81


class OperatingPointError(ValueError):
    """Raised for wind speeds outside the gradient table."""


@dataclass(frozen=True)
class AeroModel:
    """Analytic power-coefficient surface with momentum-theory thrust.

    ``Cp(lambda, theta) = s [c1 (c2/li - c3 th - c4) exp(-c5/li) + c6 lambda]``
    with ``1/li = 1/(lambda + 0.08 th) - 0.035`` and ``th`` the pitch angle
    in degrees. The thrust coefficient follows from the axial induction
    ``a`` solving ``Cp = 4 a (1 - a)^2``: ``Ct = 4 a (1 - a)``.
    """

    radius: float = 89.15
    air_density: float = 1.225
    coefficients: tuple[float, ...] = (0.5176, 116.0, 0.4, 5.0, 21.0, 0.0068)
    cp_scale: float = 0.9194641030711951

    def cp(self, tsr, pitch):
        c1, c2, c3, c4, c5, c6 = self.coefficients
        th = np.degrees(pitch)
        inv_li = 1.0 / (tsr + 0.08 * th) - 0.035
        return self.cp_scale * (c1 * (c2 * inv_li - c3 * th - c4) * np.exp(-c5 * inv_li) + c6 * tsr)

    def ct(self, tsr, pitch):
        cp = float(np.clip(self.cp(tsr, pitch), -5.0, 16 / 27 - 1e-12))
        a = optimize.brentq(lambda a: 4 * a * (1 - a) ** 2 - cp, -1.0, 1 / 3)
        return 4 * a * (1 - a)

    @cached_property
    def optimum(self) -> tuple[float, float]:
        """Tip-speed ratio and power coefficient at fine pitch optimum."""
        res = optimize.minimize_scalar(lambda l: -self.cp(l, 0.0), bounds=(3.0, 15.0),
                                       method="bounded", options={"xatol": 1e-10})
        return float(res.x), float(-res.fun)

    def _area(self) -> float:
        return np.pi * self.radius**2

    def torque(self, wind: float, pitch: float, omega: float) -> float:
        tsr = omega * self.radius / wind
        return 0.5 * self.air_density * self._area() * wind**3 * self.cp(tsr, pitch) / omega

    def thrust(self, wind: float, pitch: float, omega: float) -> float:
        tsr = omega * self.radius / wind
        return 0.5 * self.air_density * self._area() * wind**2 * self.ct(tsr, pitch)

    def gradients(self, wind: float, pitch: float, omega: float) -> dict[str, float]:
        """Central finite-difference partial derivatives of torque and thrust."""
        hv, hp, ho = 1e-4 * wind, 1e-5, 1e-5 * omega
        out = {}
        for name, f in (("Q", self.torque), ("T", self.thrust)):
            out[f"d{name}_dv"] = (f(wind + hv, pitch, omega) - f(wind - hv, pitch, omega)) / (2 * hv)
            out[f"d{name}_dtheta"] = (f(wind, pitch + hp, omega) - f(wind, pitch - hp, omega)) / (2 * hp)
            out[f"d{name}_domega"] = (f(wind, pitch, omega + ho) - f(wind, pitch, omega - ho)) / (2 * ho)
        return out


GRADIENT_KEYS = ("dQ_dv", "dQ_dtheta", "dQ_domega", "dT_dv", "dT_dtheta", "dT_domega")


@dataclass(frozen=True, eq=False)
class GradientTable:
    """Steady states and aerodynamic gradients per mean wind speed (SI units, rad)."""

    wind_speed: np.ndarray
    rotor_speed: np.ndarray
    pitch: np.ndarray
    gen_torque: np.ndarray
    thrust: np.ndarray
    dQ_dv: np.ndarray
    dQ_dtheta: np.ndarray
    dQ_domega: np.ndarray
    dT_dv: np.ndarray
    dT_dtheta: np.ndarray
    dT_domega: np.ndarray

    def __post_init__(self):
        for f in self.__dataclass_fields__:
            arr = np.array(getattr(self, f), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, f, arr)
        v = self.wind_speed
        if v.ndim != 1 or v.size < 2 or np.any(np.diff(v) <= 0):
            raise ValueError("gradient table wind speeds must be strictly increasing")
        if any(getattr(self, f).shape != v.shape for f in self.__dataclass_fields__):
            raise ValueError("gradient table columns must have equal length")

    def __eq__(self, other):
        if not isinstance(other, GradientTable):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f)) for f in self.__dataclass_fields__)

    def interpolate(self, wind: float) -> dict[str, float]:
        v = self.wind_speed
        if not v[0] - 1e-9 <= wind <= v[-1] + 1e-9:
            raise OperatingPointError(f"wind speed {wind} m/s outside table range [{v[0]}, {v[-1]}]")
        return {f: float(np.interp(wind, v, getattr(self, f))) for f in self.__dataclass_fields__}

    def to_dict(self) -> dict:
        return {f: getattr(self, f).tolist() for f in self.__dataclass_fields__}


@dataclass(frozen=True)
class PlantParameters:
    """Structural, hydrostatic, drivetrain and rating data of the surrogate plant.

    ``nacelle_mass`` is the tower-top modal mass (rotor, nacelle and a share
    of the tower) at ``hub_height`` above the platform reference point.
    Stiffnesses include mooring, hydrostatics and gravity; damping includes
    linearized hydrodynamic damping.
    """

    platform_mass: float = 3.5e7
    platform_inertia: float = 1.6e10
    nacelle_mass: float = 8.3e5
    hub_height: float = 119.0
    surge_stiffness: float = 1.75e5
    pitch_stiffness: float = 1.2e9
    tower_stiffness: float = 8.2e6
    surge_damping: float = 8.0e5
    pitch_damping: float = 2.2e9
    tower_damping: float = 5.2e4
    rotor_inertia: float = 1.5647e8
    generator_inertia: float = 3.75e6
    torque_lag: float = 0.1
    rated_power: float = 10.0e6
    min_pitch: float = 0.0
    aero: AeroModel = field(default_factory=AeroModel)
    table: GradientTable | None = None

    def __post_init__(self):
        positive = ("platform_mass", "platform_inertia", "nacelle_mass", "hub_height", "surge_stiffness",
                    "pitch_stiffness", "tower_stiffness", "rotor_inertia", "generator_inertia",
                    "torque_lag", "rated_power")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("surge_damping", "pitch_damping", "tower_damping"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def drivetrain_inertia(self) -> float:
        return self.rotor_inertia + self.generator_inertia

    @property
    def optimal_gain(self) -> float:
        """Torque gain ``K`` of the ``tau = K Omega^2`` law tracking the Cp optimum."""
        tsr, cp = self.aero.optimum
        return 0.5 * self.aero.air_density * np.pi * self.aero.radius**5 * cp / tsr**3

    @property
    def rated_speed(self) -> float:
        """Rotor speed at which the optimal-mode law reaches rated power."""
        return (self.rated_power / self.optimal_gain) ** (1 / 3)

    @property
    def rated_torque(self) -> float:
        return self.rated_power / self.rated_speed

    @property
    def rated_wind_speed(self) -> float:
        return self.rated_speed * self.aero.radius / self.aero.optimum[0]

    @property
    def mass_matrix(self) -> np.ndarray:
        m, h = self.nacelle_mass, self.hub_height
        return np.array([[self.platform_mass + m, m * h, m],
                         [m * h, self.platform_inertia + m * h * h, m * h],
                         [m, m * h, m]])

    @property
    def stiffness_matrix(self) -> np.ndarray:
        return np.diag([self.surge_stiffness, self.pitch_stiffness, self.tower_stiffness])

    @property
    def damping_matrix(self) -> np.ndarray:
        return np.diag([self.surge_damping, self.pitch_damping, self.tower_damping])

    @property
    def thrust_arm(self) -> np.ndarray:
        return np.array([1.0, self.hub_height, 1.0])

    def with_table(self, wind_speeds=None) -> PlantParameters:
        return replace(self, table=tabulate_gradients(self, wind_speeds))

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k not in ("aero", "table")}
        out["aero"] = {"radius": self.aero.radius, "air_density": self.aero.air_density,
                       "coefficients": list(self.aero.coefficients), "cp_scale": self.aero.cp_scale}
        out["table"] = self.table.to_dict() if self.table is not None else None
        return out

    @classmethod
    def from_dict(cls, data: dict) -> PlantParameters:
        data = dict(data)
        aero = data.pop("aero", None)
        table = data.pop("table", None)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown plant parameters: {sorted(unknown)}")
        aero_model = AeroModel(**{**aero, "coefficients": tuple(aero["coefficients"])}) if aero else AeroModel()
        params = cls(**data, aero=aero_model)
        return replace(params, table=GradientTable(**table)) if table else params.with_table()


def steady_pitch(params: PlantParameters, wind: float) -> float:
    """Pitch angle holding rated torque at rated speed (0 at or below rated wind)."""
    if wind <= params.rated_wind_speed:
        return params.min_pitch
    aero, w_r, q_r = params.aero, params.rated_speed, params.rated_torque
    return float(optimize.brentq(lambda th: aero.torque(wind, th, w_r) - q_r, params.min_pitch,
                                 np.radians(45.0), xtol=1e-14))


def steady_rotor_speed(params: PlantParameters, wind: float, pitch: float, torque: float) -> float:
    """Rotor speed balancing aerodynamic torque against a fixed generator torque.

    Nonlinear equilibrium of the rotor alone; the stable branch (aerodynamic
    torque falling with speed) is returned.
    """
    aero = params.aero
    lo, hi = 0.3 * params.rated_speed * wind / params.rated_wind_speed, 3.0 * params.rated_speed
    grid = np.linspace(lo, hi, 400)
    resid = np.array([aero.torque(wind, pitch, w) - torque for w in grid])
    for k in range(len(grid) - 1):
        if resid[k] > 0 >= resid[k + 1]:
            return float(optimize.brentq(lambda w: aero.torque(wind, pitch, w) - torque,
                                         grid[k], grid[k + 1], xtol=1e-14))
    raise OperatingPointError(f"no stable rotor equilibrium at {wind} m/s")


def tabulate_gradients(params: PlantParameters, wind_speeds=None) -> GradientTable:
    winds = np.arange(4.0, 25.0 + 1e-9, 0.5) if wind_speeds is None else np.asarray(wind_speeds, float)
    cols = {k: [] for k in ("rotor_speed", "pitch", "gen_torque", "thrust", *GRADIENT_KEYS)}
    tsr_opt = params.aero.optimum[0]
    for v in winds:
        if v <= params.rated_wind_speed:
            omega, pitch = tsr_opt * v / params.aero.radius, params.min_pitch
            torque = params.optimal_gain * omega**2
        else:
            omega, pitch, torque = params.rated_speed, steady_pitch(params, v), params.rated_torque
        cols["rotor_speed"].append(omega)
        cols["pitch"].append(pitch)
        cols["gen_torque"].append(torque)
        cols["thrust"].append(params.aero.thrust(v, pitch, omega))
        for key, value in params.aero.gradients(v, pitch, omega).items():
            cols[key].append(value)
    return GradientTable(wind_speed=winds, **cols)


@dataclass(frozen=True)
class OperatingPoint:
    """Steady state at a mean wind speed, with interpolated aerodynamic gradients."""

    wind_speed: float
    rotor_speed: float
    pitch: float
    gen_torque: float
    thrust: float
    gradients: dict[str, float]
    platform_surge: float = 0.0
    platform_pitch: float = 0.0
    tower_deflection: float = 0.0
    above_rated: bool = False

    @property
    def power(self) -> float:
        return self.gen_torque * self.rotor_speed

    def steady_outputs(self, params: PlantParameters) -> dict[str, float]:
        """Absolute values of the plant outputs at this operating point."""
        h, g = params.hub_height, GRAVITY
        shear = params.tower_stiffness * self.tower_deflection
        return {
            "rotor_speed": self.rotor_speed,
            "platform_pitch": self.platform_pitch,
            "platform_surge": self.platform_surge,
            "tower_deflection": self.tower_deflection,
            "tower_base_moment": h * shear + params.nacelle_mass * g * (h * self.platform_pitch
                                                                        + self.tower_deflection),
            "shaft_moment": self.gen_torque,
            "blade_root_moment": self.thrust * 2 * params.aero.radius / 9,
            "power": self.power,
            "thrust": self.thrust,
        }


def operating_point(params: PlantParameters, wind: float) -> OperatingPoint:
    """Steady state at ``wind`` under the baseline control law.

    Rotor speed, pitch and torque are solved exactly from the aerodynamic
    model; gradients are interpolated linearly from the table.
    """
    if params.table is None:
        params = params.with_table()
    grads = params.table.interpolate(wind)
    if wind <= params.rated_wind_speed:
        omega = params.aero.optimum[0] * wind / params.aero.radius
        pitch, torque = params.min_pitch, params.optimal_gain * omega**2
    else:
        omega, pitch, torque = params.rated_speed, steady_pitch(params, wind), params.rated_torque
    thrust = params.aero.thrust(wind, pitch, omega)
    q0 = np.linalg.solve(params.stiffness_matrix, params.thrust_arm * thrust)
    return OperatingPoint(float(wind), float(omega), float(pitch), float(torque), float(thrust),
                          {k: grads[k] for k in GRADIENT_KEYS}, float(q0[0]), float(q0[1]), float(q0[2]),
                          bool(wind > params.rated_wind_speed))


def linearize(params: PlantParameters, op: OperatingPoint) -> StateSpaceModel:
    """Eight-state linear model about ``op``.

    Inputs are ``INPUTS`` (N m, rad, m/s, N, N m) and outputs ``OUTPUTS``
    (rad/s, rad, m, m, N m, N m, N m, W, N), all as deviations.
    """
    if params.table is not None:
        params.table.interpolate(op.wind_speed)
    g = op.gradients
    M, K, D = params.mass_matrix, params.stiffness_matrix, params.damping_matrix
    e = params.thrust_arm
    J, h = params.drivetrain_inertia, params.hub_height
    Minv = np.linalg.inv(M)

    # thrust deviation = Tv (v - e.qdot) + Ttheta theta + Tomega Omega
    A = np.zeros((8, 8))
    B = np.zeros((8, 5))
    A[0:3, 3:6] = np.eye(3)
    A[3:6, 0:3] = -Minv @ K
    A[3:6, 3:6] = -Minv @ (D + g["dT_dv"] * np.outer(e, e))
    A[3:6, 6] = Minv @ e * g["dT_domega"]
    B[3:6, 1] = Minv @ e * g["dT_dtheta"]
    B[3:6, 2] = Minv @ e * g["dT_dv"]
    B[3:6, 3] = Minv[:, 0]
    B[3:6, 4] = Minv[:, 1]
    # rotor: J Omega' = Qv (v - e.qdot) + Qtheta theta + Qomega Omega - tau
    A[6, 3:6] = -g["dQ_dv"] * e / J
    A[6, 6] = g["dQ_domega"] / J
    A[6, 7] = -1.0 / J
    B[6, 1] = g["dQ_dtheta"] / J
    B[6, 2] = g["dQ_dv"] / J
    # generator torque actuator lag
    A[7, 7] = -1.0 / params.torque_lag
    B[7, 0] = 1.0 / params.torque_lag

    C = np.zeros((9, 8))
    Dm = np.zeros((9, 5))
    C[0, 6] = 1.0
    C[1, 1] = 1.0
    C[2, 0] = 1.0
    C[3, 2] = 1.0
    # tower base: shear through the tower at hub height plus nacelle weight offset
    C[4, 2] = h * params.tower_stiffness + params.nacelle_mass * GRAVITY
    C[4, 5] = h * params.tower_damping
    C[4, 1] = params.nacelle_mass * GRAVITY * h
    # aerodynamic torque and thrust deviations
    q_row = np.zeros(8)
    q_row[3:6] = -g["dQ_dv"] * e
    q_row[6] = g["dQ_domega"]
    q_in = np.array([0.0, g["dQ_dtheta"], g["dQ_dv"], 0.0, 0.0])
    t_row = np.zeros(8)
    t_row[3:6] = -g["dT_dv"] * e
    t_row[6] = g["dT_domega"]
    t_in = np.array([0.0, g["dT_dtheta"], g["dT_dv"], 0.0, 0.0])
    # low-speed shaft: rigid two-inertia split of aerodynamic and generator torque
    jr, jg = params.rotor_inertia, params.generator_inertia
    C[5] = jg / J * q_row
    C[5, 7] += jr / J
    Dm[5] = jg / J * q_in
    # blade root: a third of the thrust acting at two thirds of the radius
    arm = 2 * params.aero.radius / 9
    C[6], Dm[6] = arm * t_row, arm * t_in
    C[7, 6] = op.gen_torque
    C[7, 7] = op.rotor_speed
    C[8], Dm[8] = t_row, t_in
    return StateSpaceModel(A, B, C, Dm, INPUTS, OUTPUTS)


def wave_path(plant: StateSpaceModel, pwem) -> StateSpaceModel:
    """Elevation-to-output model: the PWEM in series with the plant force inputs."""
    model = getattr(pwem, "model", pwem)
    if tuple(model.output_names) != FORCE_INPUTS:
        raise ValueError(f"PWEM outputs {model.output_names} do not match plant force inputs {FORCE_INPUTS}")
    try:
        forces = subsystem(plant, list(FORCE_INPUTS), list(plant.output_names))
    except KeyError as exc:
        raise ValueError(f"plant lacks force inputs: {exc}") from None
    return series(forces, model)


def natural_periods(params: PlantParameters) -> dict[str, float]:
    """Undamped natural periods (s) of the mechanical modes, longest first."""
    evals = linalg.eigh(params.stiffness_matrix, params.mass_matrix, eigvals_only=True)
    periods = np.sort(2 * np.pi / np.sqrt(evals))[::-1]
    return dict(zip(("surge", "pitch", "tower"), map(float, periods)))


DEMO_FILE = "demo_triplespar_like.json"


def save_parameters(params: PlantParameters, path: str | Path) -> None:
    Path(path).write_text(json.dumps(params.to_dict(), indent=1))


def load_parameters(path: str | Path) -> PlantParameters:
    return PlantParameters.from_dict(json.loads(Path(path).read_text()))


def demo_parameters() -> PlantParameters:
    """The shipped 10 MW class demo parameter set."""
    text = (resources.files("wavefeed") / "data" / DEMO_FILE).read_text()
    return PlantParameters.from_dict(json.loads(text))
