import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import signal

from wavefeed import lti
from wavefeed.lti import (FrequencyResponseSet, StateSpaceModel, discretize, evaluate,
                          freqresp, invert, reduce_order, series)

from conftest import random_stable

LOG_GRID = np.logspace(-2, 1, 50)


def first_order(pole: float, zero: float | None = None) -> StateSpaceModel:
    """(s + zero)/(s + pole), or 1/(s + pole) when zero is None."""
    if zero is None:
        return StateSpaceModel([[-pole]], [[1.0]], [[1.0]], [[0.0]])
    return StateSpaceModel([[-pole]], [[1.0]], [[zero - pole]], [[1.0]])


def poly_eval(model: StateSpaceModel, w: float) -> complex:
    num, den = signal.ss2tf(model.A, model.B, model.C, model.D)
    s = 1j * w
    return np.polyval(num[0], s) / np.polyval(den, s)


# -- construction ---------------------------------------------------------

def test_dimension_checks():
    with pytest.raises(lti.DimensionError):
        StateSpaceModel(np.eye(2), np.ones((3, 1)), np.ones((1, 2)), [[0.0]])
    with pytest.raises(lti.DimensionError):
        StateSpaceModel([[-1.0]], [[1.0]], [[1.0]], [[0.0]], ("a", "b"))
    with pytest.raises(lti.DimensionError):
        StateSpaceModel(np.eye(2) * -1, np.ones((2, 2)), np.ones((1, 2)), np.zeros((1, 2)), ("a", "a"))


def test_model_is_immutable():
    g = first_order(1.0)
    with pytest.raises(ValueError):
        g.A[0, 0] = 3.0


# -- evaluate -------------------------------------------------------------

def test_evaluate_dc_gain():
    assert evaluate(first_order(1.0), 0.0) == pytest.approx(1.0)


def test_evaluate_unit_frequency():
    assert evaluate(first_order(1.0), 1.0)[0, 0] == pytest.approx(0.5 - 0.5j, abs=1e-15)


def test_evaluate_matches_polynomial_oracle(rng):
    g = random_stable(rng, 4)
    assert evaluate(g, 0.5)[0, 0] == pytest.approx(poly_eval(g, 0.5), rel=1e-10)


def test_evaluate_at_pole_raises():
    integrator = StateSpaceModel([[0.0]], [[1.0]], [[1.0]], [[0.0]])
    with pytest.raises(lti.EvaluationAtPoleError):
        evaluate(integrator, 0.0)
    oscillator = StateSpaceModel([[0.0, 2.0], [-2.0, 0.0]], [[0.0], [1.0]], [[1.0, 0.0]], [[0.0]])
    with pytest.raises(lti.EvaluationAtPoleError):
        evaluate(oscillator, 2.0)


def test_freqresp_matches_pointwise(rng):
    g = random_stable(rng, 6, m=2, p=3)
    H = freqresp(g, LOG_GRID)
    for w, h in zip(LOG_GRID, H):
        np.testing.assert_allclose(h, evaluate(g, w), rtol=1e-9, atol=1e-12)


def test_evaluate_linear_in_bcd(rng):
    g1 = random_stable(rng, 4)
    B2, C2, D2 = rng.normal(size=(4, 1)), rng.normal(size=(1, 4)), rng.normal(size=(1, 1))
    w = 0.7
    # linear in B
    gb = StateSpaceModel(g1.A, g1.B + 2 * B2, g1.C, g1.D)
    expected = evaluate(g1, w) + 2 * evaluate(StateSpaceModel(g1.A, B2, g1.C, 0 * g1.D), w)
    np.testing.assert_allclose(evaluate(gb, w), expected, rtol=1e-12)
    # linear in (C, D)
    gc = StateSpaceModel(g1.A, g1.B, g1.C - C2, g1.D - D2)
    expected = evaluate(g1, w) - evaluate(StateSpaceModel(g1.A, g1.B, C2, D2), w)
    np.testing.assert_allclose(evaluate(gc, w), expected, rtol=1e-12)


# -- series ---------------------------------------------------------------

def test_series_with_identity(rng):
    g = random_stable(rng, 4)
    ident = lti.static_gain([[1.0]])
    grid = rng.uniform(0.01, 10, 20)
    np.testing.assert_allclose(freqresp(series(ident, g), grid), freqresp(g, grid), rtol=1e-12)


def test_series_analytic_product():
    g = series(first_order(1.0), first_order(2.0))
    assert evaluate(g, 1.0)[0, 0] == pytest.approx(1 / ((1 + 1j) * (2 + 1j)), rel=1e-12)


def test_series_dimension_mismatch(rng):
    with pytest.raises(lti.DimensionError):
        series(random_stable(rng, 2, m=2), random_stable(rng, 2, p=1))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_series_homomorphism(seed):
    rng = np.random.default_rng(seed)
    g1 = random_stable(rng, 3, m=2, p=3)
    g2 = random_stable(rng, 4, m=3, p=2)
    H = freqresp(series(g2, g1), LOG_GRID)
    expected = freqresp(g2, LOG_GRID) @ freqresp(g1, LOG_GRID)
    scale = np.abs(expected).max()
    # random similarities can be ill-conditioned near light resonances
    np.testing.assert_allclose(H, expected, rtol=1e-8, atol=1e-10 * scale)


def test_feedback_matches_frequency_domain_formula(rng):
    plant = random_stable(rng, 4, m=2, p=2).renamed(("u", "d"), ("y", "z"))
    ctrl = random_stable(rng, 2, feedthrough=True).scaled(0.1).renamed(("y",), ("u",))
    cl = lti.feedback(plant, ctrl, ["y"], ["u"])
    for w in (0.1, 0.9, 3.0):
        G = evaluate(plant, w)
        K = evaluate(ctrl, w)[0, 0]
        # y = G_yu u + G_yd d, u = K y -> y/d = G_yd / (1 - K G_yu)
        expected = G[0, 1] / (1 - K * G[0, 0])
        assert evaluate(cl, w)[0, 1] == pytest.approx(expected, rel=1e-9)


# -- invert ---------------------------------------------------------------

def test_invert_static_gain():
    inv = invert(lti.static_gain([[2.0]]))
    assert inv.D[0, 0] == pytest.approx(0.5)
    assert inv.n_states == 0


def test_invert_biproper():
    g = first_order(1.0, zero=2.0)          # (s+2)/(s+1)
    inv = invert(g)
    np.testing.assert_allclose(inv.poles(), [-2.0])
    grid = np.logspace(-2, 2, 20)
    prod = freqresp(inv, grid)[:, 0, 0] * freqresp(g, grid)[:, 0, 0]
    np.testing.assert_allclose(prod, 1.0, atol=1e-10)
    expected = (1j * grid + 1) / (1j * grid + 2)
    np.testing.assert_allclose(freqresp(inv, grid)[:, 0, 0], expected, rtol=1e-12)


def test_invert_non_minimum_phase():
    g = first_order(1.0, zero=-1.0)         # (s-1)/(s+1)
    with pytest.raises(lti.NonMinimumPhaseError) as err:
        invert(g)
    np.testing.assert_allclose(err.value.zeros, [1.0])


def test_invert_strictly_proper_rejected():
    with pytest.raises(lti.NotInvertibleError):
        invert(first_order(1.0))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_invert_series_is_identity(seed):
    rng = np.random.default_rng(seed)
    g = random_stable(rng, 4, m=2, p=2)
    try:
        inv = invert(g)
    except lti.NonMinimumPhaseError:
        return
    H = freqresp(series(inv, g), LOG_GRID)
    np.testing.assert_allclose(H, np.broadcast_to(np.eye(2), H.shape), atol=1e-8)


def test_zeros_of_siso():
    g = series(first_order(1.0, zero=3.0), first_order(2.0))   # (s+3)/((s+1)(s+2))
    np.testing.assert_allclose(lti.zeros(g), [-3.0], atol=1e-9)
    assert lti.relative_degree(g) == 1
    assert lti.relative_degree(first_order(1.0, zero=3.0)) == 0
    assert lti.relative_degree(series(first_order(1.0), first_order(2.0))) == 2


# -- reduction ------------------------------------------------------------

def test_reduce_redundant_parallel_branch():
    branch = first_order(1.0)
    g = lti.parallel(branch, branch)
    red = reduce_order(g, 1)
    grid = np.logspace(-2, 2, 50)
    err = np.abs(freqresp(red.model, grid) - freqresp(g, grid)).max()
    assert err < 1e-8
    assert red.error_bound < 1e-8


def test_reduce_full_order_is_identity(rng):
    g = random_stable(rng, 6)
    red = reduce_order(g, 6)
    np.testing.assert_allclose(freqresp(red.model, LOG_GRID), freqresp(g, LOG_GRID), atol=1e-10)


def test_reduce_rejects_unstable():
    with pytest.raises(lti.UnstableModelError):
        reduce_order(StateSpaceModel(np.diag([1.0, -1.0]), np.ones((2, 1)), np.ones((1, 2)), [[0.0]]), 1)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), r=st.integers(2, 12))
def test_reduce_respects_hsv_bound(seed, r):
    rng = np.random.default_rng(seed)
    g = random_stable(rng, 18)
    red = reduce_order(g, r)
    grid = np.logspace(-2, 1.5, 50)
    err = np.abs(freqresp(red.model, grid) - freqresp(g, grid))[:, 0, 0]
    assert np.all(err <= red.error_bound * (1 + 1e-6) + 1e-12)
    assert red.model.n_states == r


# -- discretization -------------------------------------------------------

def test_discretize_integrator():
    d = discretize(StateSpaceModel([[0.0]], [[1.0]], [[1.0]], [[0.0]]), 0.1)
    assert d.A[0, 0] == pytest.approx(1.0)
    assert d.B[0, 0] == pytest.approx(0.1)
    assert d.dt == 0.1


def test_discretize_first_order():
    d = discretize(first_order(1.0), 0.05)
    assert d.A[0, 0] == pytest.approx(np.exp(-0.05), rel=1e-14)


def rk4_step_response(g: StateSpaceModel, t_end: float, h: float) -> tuple[np.ndarray, np.ndarray]:
    u = np.ones(g.n_inputs)
    f = lambda x: g.A @ x + g.B @ u
    n_steps = int(round(t_end / h))
    x = np.zeros(g.n_states)
    ys = [g.C @ x + g.D @ u]
    for _ in range(n_steps):
        k1 = f(x)
        k2 = f(x + h / 2 * k1)
        k3 = f(x + h / 2 * k2)
        k4 = f(x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys.append(g.C @ x + g.D @ u)
    return np.arange(n_steps + 1) * h, np.array(ys)


def test_discretize_step_response_matches_rk4(rng):
    g = random_stable(rng, 4)
    dt, h = 0.1, 0.001
    t, y_ref = rk4_step_response(g, 10.0, h)
    d = discretize(g, dt)
    n = int(round(10.0 / dt))
    y, _ = lti.simulate_discrete(d, np.ones((n + 1, 1)))
    stride = int(round(dt / h))
    np.testing.assert_allclose(y[:, 0], y_ref[::stride, 0], atol=1e-6)


# -- serialization --------------------------------------------------------

def test_model_roundtrip(tmp_path, rng):
    g = random_stable(rng, 3, m=2, p=2).renamed(("a", "b"), ("c", "d"))
    lti.save_model(g, tmp_path / "g.json", note="x")
    assert json.loads((tmp_path / "g.json").read_text())["note"] == "x"
    g2 = lti.load_model(tmp_path / "g.json")
    np.testing.assert_array_equal(g2.A, g.A)
    assert g2.input_names == ("a", "b") and g2.output_names == ("c", "d")


def test_frequency_response_csv_roundtrip(tmp_path, rng):
    g = random_stable(rng, 3, m=2, p=2).renamed(("a", "b"), ("c", "d"))
    frs = FrequencyResponseSet.from_model(g, LOG_GRID)
    frs.to_csv(tmp_path / "g.csv")
    header = (tmp_path / "g.csv").read_text().splitlines()[0].split(",")
    assert header[:3] == ["omega_rad_s", "c/a_re", "c/a_im"]
    back = FrequencyResponseSet.from_csv(tmp_path / "g.csv")
    np.testing.assert_array_equal(back.samples, frs.samples)
    assert back.output_names == ("c", "d")


def test_frequency_grid_validation():
    with pytest.raises(lti.LTIError):
        FrequencyResponseSet([1.0, 0.5], np.ones(2))
    with pytest.raises(lti.LTIError):
        FrequencyResponseSet([0.0, 0.5], np.ones(2))
