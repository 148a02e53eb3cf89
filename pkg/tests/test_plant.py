import json
from dataclasses import replace

import numpy as np
import pytest

from wavefeed.forces import PwemModel, rational_force_model
from wavefeed.lti import StateSpaceModel, evaluate, freqresp, series, simulate_discrete, discretize, static_gain, subsystem
from wavefeed.plant import (FORCE_INPUTS, INPUTS, OUTPUTS, OperatingPointError, PlantParameters, demo_parameters,
                            linearize, load_parameters, natural_periods, operating_point, save_parameters,
                            steady_rotor_speed, wave_path)

TABLE1_WINDS = (5.0, 7.1, 10.3, 13.9, 17.9, 22.1, 25.0)


@pytest.fixture(scope="module")
def params():
    return demo_parameters()


@pytest.fixture(scope="module")
def plant8(params):
    return linearize(params, operating_point(params, 8.0))


def dc_gain(model, u, y):
    return evaluate(subsystem(model, u, y), 0.0)[0, 0].real


# -- parameters ------------------------------------------------------------

def test_demo_table_covers_operating_range(params):
    v = params.table.wind_speed
    assert v[0] <= 4.0 and v[-1] >= 25.0
    assert np.all(np.diff(v) > 0)


def test_demo_rating(params):
    assert params.rated_power == 10e6
    assert params.rated_speed == pytest.approx(1.0, abs=0.05)
    # the optimal-mode torque law meets rated power at rated speed
    assert params.optimal_gain * params.rated_speed**3 == pytest.approx(params.rated_power)
    lam, cp = params.aero.optimum
    power = 0.5 * 1.225 * np.pi * params.aero.radius**2 * params.rated_wind_speed**3 * cp
    assert power == pytest.approx(10e6, rel=1e-4)


def test_parameter_file_round_trip(tmp_path, params):
    path = tmp_path / "plant.json"
    save_parameters(params, path)
    assert load_parameters(path) == params


def test_parameters_without_table_are_tabulated(tmp_path, params):
    data = params.to_dict()
    data["table"] = None
    path = tmp_path / "plant.json"
    path.write_text(json.dumps(data))
    assert load_parameters(path).table == params.table


@pytest.mark.parametrize("name", ["platform_mass", "pitch_stiffness", "rotor_inertia", "torque_lag"])
def test_non_positive_parameters_rejected(params, name):
    with pytest.raises(ValueError):
        replace(params, **{name: 0.0})


def test_negative_damping_rejected(params):
    with pytest.raises(ValueError):
        replace(params, pitch_damping=-1.0)


def test_unknown_parameter_rejected(params):
    data = params.to_dict()
    data["bogus"] = 1.0
    with pytest.raises(ValueError, match="bogus"):
        PlantParameters.from_dict(data)


def test_natural_periods(params):
    periods = natural_periods(params)
    assert 25 <= periods["pitch"] <= 40
    assert 60 <= periods["surge"] <= 120


# -- operating points ------------------------------------------------------

@pytest.mark.parametrize("wind", TABLE1_WINDS)
def test_operating_point_is_aerodynamic_equilibrium(params, wind):
    op = operating_point(params, wind)
    aero_torque = params.aero.torque(wind, op.pitch, op.rotor_speed)
    assert aero_torque == pytest.approx(op.gen_torque, rel=1e-9)
    q0 = np.array([op.platform_surge, op.platform_pitch, op.tower_deflection])
    np.testing.assert_allclose(params.stiffness_matrix @ q0, params.thrust_arm * op.thrust, rtol=1e-12)
    assert op.above_rated == (wind > params.rated_wind_speed)
    if op.above_rated:
        assert op.power == pytest.approx(params.rated_power)


@pytest.mark.parametrize("wind", [3.9, 25.1, -1.0])
def test_operating_point_outside_table(params, wind):
    with pytest.raises(OperatingPointError):
        operating_point(params, wind)


@pytest.mark.parametrize("wind", [5.0, 8.0, 10.0])
def test_below_rated_gradients_match_optimum_identities(params, wind):
    # on the Cp optimum dCp/dlambda = 0, so dQ/dv = 3Q/v and dQ/dOmega = -Q/Omega
    op = operating_point(params, wind)
    assert op.gradients["dQ_dv"] == pytest.approx(3 * op.gen_torque / wind, rel=1e-4)
    assert op.gradients["dQ_domega"] == pytest.approx(-op.gen_torque / op.rotor_speed, rel=1e-4)


# -- linear model ----------------------------------------------------------

def test_linear_model_shape(plant8):
    assert plant8.n_states == 8
    assert plant8.input_names == INPUTS
    assert plant8.output_names == OUTPUTS


@pytest.mark.parametrize("wind", np.arange(4.0, 25.01, 1.5))
def test_open_loop_stable_everywhere(params, wind):
    assert linearize(params, operating_point(params, wind)).is_stable()


def test_zero_deviation_is_equilibrium(plant8):
    d = discretize(plant8, 0.05)
    y, x = simulate_discrete(d, np.zeros((20000, 5)))
    assert np.abs(y).max() == 0.0 and np.abs(x).max() == 0.0


@pytest.mark.parametrize("wind", TABLE1_WINDS)
def test_torque_slows_rotor(params, wind):
    assert dc_gain(linearize(params, operating_point(params, wind)), "gen_torque", "rotor_speed") < 0


@pytest.mark.parametrize("wind", [13.9, 17.9, 22.1, 25.0])
def test_pitch_slows_rotor_above_rated(params, wind):
    assert dc_gain(linearize(params, operating_point(params, wind)), "pitch", "rotor_speed") < 0


@pytest.mark.parametrize("wind", [5.0, 7.1, 10.3])
def test_wind_speeds_up_rotor_below_rated(params, wind):
    assert dc_gain(linearize(params, operating_point(params, wind)), "wind", "rotor_speed") > 0


@pytest.mark.parametrize("wind", [7.1, 10.3, 17.9])
def test_dc_gains_match_nonlinear_rotor_equilibrium(params, wind):
    op = operating_point(params, wind)
    G = linearize(params, op)
    base = steady_rotor_speed(params, wind, op.pitch, op.gen_torque)
    assert base == pytest.approx(op.rotor_speed, rel=1e-9)
    dt = 1e-4 * op.gen_torque
    d_tau = (steady_rotor_speed(params, wind, op.pitch, op.gen_torque + dt)
             - steady_rotor_speed(params, wind, op.pitch, op.gen_torque - dt)) / (2 * dt)
    assert dc_gain(G, "gen_torque", "rotor_speed") == pytest.approx(d_tau, rel=1e-3)
    dv = 1e-3
    d_v = (steady_rotor_speed(params, wind + dv, op.pitch, op.gen_torque)
           - steady_rotor_speed(params, wind - dv, op.pitch, op.gen_torque)) / (2 * dv)
    assert dc_gain(G, "wind", "rotor_speed") == pytest.approx(d_v, rel=1e-3)


def test_pitch_step_exposes_negative_damping(params):
    # more pitch: less thrust, so the platform starts to rotate upwind (negative pitch)
    G = linearize(params, operating_point(params, 17.9))
    j = G.input_index("pitch")
    assert G.D[G.output_index("thrust"), j] < 0
    pitch_rate_state = 4
    assert G.B[pitch_rate_state, j] < 0
    # and with the tower leaning upwind the rotor sees more wind
    dt = 0.05
    y, _ = simulate_discrete(discretize(G, dt), np.tile([0, np.radians(1.0), 0, 0, 0], (100, 1)))
    assert y[-1, G.output_index("platform_pitch")] < 0


@pytest.mark.parametrize("wind", TABLE1_WINDS)
def test_rotor_paths_are_minimum_phase(params, wind):
    from wavefeed.lti import zeros
    G = linearize(params, operating_point(params, wind))
    for u in ("gen_torque", "pitch"):
        assert np.all(zeros(subsystem(G, u, "rotor_speed")).real < 0)


def test_subsystem_matches_full_response(plant8):
    w = np.linspace(0.05, 3.0, 20)
    sub = subsystem(plant8, "gen_torque", "rotor_speed")
    full = freqresp(plant8, w)
    np.testing.assert_allclose(freqresp(sub, w)[:, 0, 0],
                               full[:, plant8.output_index("rotor_speed"), plant8.input_index("gen_torque")],
                               rtol=1e-10)
    with pytest.raises(KeyError):
        subsystem(plant8, "gen_torque", "nacelle_yaw")


def test_power_and_shaft_outputs(params):
    op = operating_point(params, 8.0)
    G = linearize(params, op)
    # static torque step: power follows Omega0 dtau + tau0 dOmega, shaft moment tau at DC
    dc = evaluate(G, 0.0).real
    i = G.input_index("gen_torque")
    dOmega = dc[G.output_index("rotor_speed"), i]
    assert dc[G.output_index("power"), i] == pytest.approx(op.rotor_speed + op.gen_torque * dOmega, rel=1e-9)
    # with the rotor at rest relative to its aero torque change the shaft carries the full torque
    dq = op.gradients["dQ_domega"] * dOmega
    assert dc[G.output_index("shaft_moment"), i] == pytest.approx(dq, rel=1e-6)


def test_tower_base_moment_balances_static_thrust(params):
    # static thrust step: tower shear equals thrust, so M_ty = h dT + m g (h beta + x_d)
    op = operating_point(params, 8.0)
    G = linearize(params, op)
    dc = evaluate(G, 0.0).real
    i = G.input_index("wind")
    dT = dc[G.output_index("thrust"), i]
    beta = dc[G.output_index("platform_pitch"), i]
    xd = dc[G.output_index("tower_deflection"), i]
    expected = params.hub_height * dT + params.nacelle_mass * 9.81 * (params.hub_height * beta + xd)
    assert dc[G.output_index("tower_base_moment"), i] == pytest.approx(expected, rel=1e-9)


# -- wave path -------------------------------------------------------------

def pwem_reference():
    return PwemModel(rational_force_model(), 10.0)


def test_wave_path_equals_product(plant8):
    pwem = pwem_reference()
    path = wave_path(plant8, pwem)
    w = np.linspace(0.2, 2.5, 25)
    forces = freqresp(subsystem(plant8, list(FORCE_INPUTS), list(OUTPUTS)), w)
    expected = forces @ freqresp(pwem.model, w)
    np.testing.assert_allclose(freqresp(path, w), expected, rtol=1e-9, atol=1e-12 * np.abs(expected).max())


def test_wave_path_chained_rotor_speed(plant8):
    pwem = pwem_reference()
    w = np.linspace(0.3, 2.0, 20)
    chain = series(subsystem(plant8, list(FORCE_INPUTS), "rotor_speed"), pwem.model)
    full = freqresp(plant8, w)
    g_f = full[:, plant8.output_index("rotor_speed"), [3, 4]]
    expected = np.einsum("ni,ni->n", g_f, freqresp(pwem.model, w)[:, :, 0])
    np.testing.assert_allclose(freqresp(chain, w)[:, 0, 0], expected, rtol=1e-9)


def test_zero_pwem_gives_zero_path(plant8):
    zero = static_gain(np.zeros((2, 1)), ("eta",), FORCE_INPUTS)
    assert np.abs(freqresp(wave_path(plant8, zero), [0.5, 1.0])).max() == 0.0


def test_unit_static_pwem_sums_force_columns(plant8):
    unit = static_gain(np.ones((2, 1)), ("eta",), FORCE_INPUTS)
    w = np.array([0.4, 0.9])
    full = freqresp(plant8, w)
    np.testing.assert_allclose(freqresp(wave_path(plant8, unit), w)[:, :, 0], full[:, :, 3] + full[:, :, 4],
                               rtol=1e-12)


def test_wave_path_channel_mismatch(plant8):
    wrong = static_gain(np.ones((2, 1)), ("eta",), ("heave_force", "pitch_moment"))
    with pytest.raises(ValueError):
        wave_path(plant8, wrong)
