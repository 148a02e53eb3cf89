"""Continuous-time LTI models: realization, interconnection, inversion,
frequency evaluation, ZOH discretization and balanced truncation."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg as la

#: Condition-number threshold above which a matrix is treated as singular.
SINGULAR_COND = 1e12


class LTIError(ValueError):
    """Base class for LTI model errors."""


class DimensionError(LTIError):
    pass


class EvaluationAtPoleError(LTIError):
    def __init__(self, omega: float):
        super().__init__(f"resolvent (i*omega*I - A) is singular at omega={omega!r}")
        self.omega = omega


class NotInvertibleError(LTIError):
    pass


class NonMinimumPhaseError(LTIError):
    """Raised when an inverse would be unstable; carries the offending zeros."""

    def __init__(self, zeros: np.ndarray, message: str | None = None):
        zeros = np.asarray(zeros)
        if message is None:
            message = "model is non-minimum-phase, right-half-plane zeros at " + ", ".join(
                f"{z:.6g}" for z in zeros
            )
        super().__init__(message)
        self.zeros = zeros


class UnstableModelError(LTIError):
    def __init__(self, poles: np.ndarray):
        poles = np.asarray(poles)
        super().__init__(
            "model is not asymptotically stable, poles at "
            + ", ".join(f"{p:.6g}" for p in poles)
        )
        self.poles = poles


def _shaped(value, rows: int, cols: int, name: str) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.size == 0 and rows * cols == 0:
        arr = np.zeros((rows, cols))
    elif arr.size == rows * cols and arr.ndim < 2:
        arr = arr.reshape(rows, cols)
    if arr.shape != (rows, cols):
        raise DimensionError(f"{name} must be {(rows, cols)}, got {arr.shape}")
    arr.setflags(write=False)
    return arr


def _default_names(prefix: str, n: int) -> tuple[str, ...]:
    return tuple(f"{prefix}{i}" for i in range(n))


@dataclass(frozen=True)
class StateSpaceModel:
    """LTI realization ``dx = A x + B u``, ``y = C x + D u``.

    ``dt`` is ``None`` for continuous time; discrete models produced by
    :func:`discretize` carry their sample time and use
    ``x[k+1] = A x[k] + B u[k]``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    input_names: tuple[str, ...] = ()
    output_names: tuple[str, ...] = ()
    dt: float | None = None

    def __post_init__(self):
        D = np.atleast_2d(np.array(self.D, dtype=float))
        if D.ndim != 2:
            raise DimensionError(f"D must be 2-D, got shape {D.shape}")
        p, m = D.shape
        A = np.array(self.A, dtype=float)
        n = int(round(np.sqrt(A.size)))
        A = _shaped(A, n, n, "A")
        B = _shaped(self.B, n, m, "B")
        C = _shaped(self.C, p, n, "C")
        D = _shaped(D, p, m, "D")
        inputs = tuple(self.input_names) or _default_names("u", m)
        outputs = tuple(self.output_names) or _default_names("y", p)
        if len(inputs) != m or len(set(inputs)) != m:
            raise DimensionError(f"need {m} unique input names, got {inputs}")
        if len(outputs) != p or len(set(outputs)) != p:
            raise DimensionError(f"need {p} unique output names, got {outputs}")
        if self.dt is not None and not self.dt > 0:
            raise LTIError("dt must be positive for a discrete model")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "input_names", inputs)
        object.__setattr__(self, "output_names", outputs)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]

    @property
    def is_discrete(self) -> bool:
        return self.dt is not None

    def poles(self) -> np.ndarray:
        return la.eigvals(self.A) if self.n_states else np.zeros(0, dtype=complex)

    def is_stable(self, margin: float = 0.0) -> bool:
        poles = self.poles()
        if self.is_discrete:
            return bool(np.all(np.abs(poles) < 1.0 - margin))
        return bool(np.all(poles.real < -margin))

    def renamed(self, inputs: Sequence[str] | None = None,
                outputs: Sequence[str] | None = None) -> StateSpaceModel:
        return StateSpaceModel(self.A, self.B, self.C, self.D,
                               tuple(inputs) if inputs is not None else self.input_names,
                               tuple(outputs) if outputs is not None else self.output_names,
                               self.dt)

    def scaled(self, gain: float) -> StateSpaceModel:
        """Multiply the output by a scalar gain."""
        return StateSpaceModel(self.A, self.B, gain * self.C, gain * self.D,
                               self.input_names, self.output_names, self.dt)

    def input_index(self, name: str) -> int:
        try:
            return self.input_names.index(name)
        except ValueError:
            raise KeyError(f"unknown input channel {name!r}; have {self.input_names}") from None

    def output_index(self, name: str) -> int:
        try:
            return self.output_names.index(name)
        except ValueError:
            raise KeyError(f"unknown output channel {name!r}; have {self.output_names}") from None

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "B": self.B.tolist(),
            "C": self.C.tolist(),
            "D": self.D.tolist(),
            "input_names": list(self.input_names),
            "output_names": list(self.output_names),
            "dt": self.dt,
        }

    @classmethod
    def from_dict(cls, data: dict) -> StateSpaceModel:
        p = len(data["D"])
        m = len(data["D"][0]) if p else len(data.get("input_names", []))
        n = len(data["A"])
        A = np.array(data["A"], dtype=float).reshape(n, n)
        B = np.array(data["B"], dtype=float).reshape(n, m)
        C = np.array(data["C"], dtype=float).reshape(p, n)
        D = np.array(data["D"], dtype=float).reshape(p, m)
        return cls(A, B, C, D, tuple(data.get("input_names", ())),
                   tuple(data.get("output_names", ())), data.get("dt"))


def static_gain(D, input_names: Sequence[str] = (), output_names: Sequence[str] = ()) -> StateSpaceModel:
    D = np.atleast_2d(np.asarray(D, dtype=float))
    p, m = D.shape
    return StateSpaceModel(np.zeros((0, 0)), np.zeros((0, m)), np.zeros((p, 0)), D,
                           tuple(input_names), tuple(output_names))


def from_transfer_function(num: Sequence[float], den: Sequence[float]) -> StateSpaceModel:
    """SISO realization from polynomial coefficients (highest power first)."""
    from scipy import signal

    A, B, C, D = signal.tf2ss(num, den)
    return StateSpaceModel(A, B, C, D)


def save_model(model: StateSpaceModel, path: str | Path, **extra) -> None:
    data = model.to_dict()
    data.update(extra)
    Path(path).write_text(json.dumps(data, indent=2))


def load_model(path: str | Path) -> StateSpaceModel:
    return StateSpaceModel.from_dict(json.loads(Path(path).read_text()))


# --------------------------------------------------------------------------
# frequency response

def evaluate(model: StateSpaceModel, omega: float) -> np.ndarray:
    """Return ``C (i*omega*I - A)^-1 B + D`` as a ``(p, m)`` complex matrix.

    Discrete models are evaluated on the unit circle, ``z = exp(i*omega*dt)``.
    """
    omega = float(omega)
    if not np.isfinite(omega) or omega < 0:
        raise LTIError(f"omega must be finite and non-negative, got {omega}")
    s = np.exp(1j * omega * model.dt) if model.is_discrete else 1j * omega
    if model.n_states == 0:
        return model.D.astype(complex)
    model = balance_states(model)
    M = s * np.eye(model.n_states) - model.A
    if np.linalg.cond(M) > SINGULAR_COND:
        raise EvaluationAtPoleError(omega)
    return model.C @ np.linalg.solve(M, model.B.astype(complex)) + model.D


def freqresp(model: StateSpaceModel, omegas) -> np.ndarray:
    """Vectorized :func:`evaluate`; returns shape ``(len(omegas), p, m)``."""
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    out = np.empty((omegas.size, model.n_outputs, model.n_inputs), dtype=complex)
    if model.n_states == 0:
        out[:] = model.D
        return out
    model = balance_states(model)
    # modal evaluation when A is diagonalizable and well conditioned
    lam, V = la.eig(model.A)
    if np.linalg.cond(V) < 1e5:
        Vi_B = np.linalg.solve(V, model.B.astype(complex))
        C_V = model.C @ V
        s = np.exp(1j * omegas * model.dt) if model.is_discrete else 1j * omegas
        denom = s[:, None] - lam[None, :]
        if np.any(np.abs(denom) < 1e-300):
            raise EvaluationAtPoleError(float(omegas[np.argmin(np.abs(denom).min(axis=1))]))
        out[:] = np.einsum("pk,nk,km->npm", C_V, 1.0 / denom, Vi_B) + model.D
        return out
    for i, w in enumerate(omegas):
        out[i] = evaluate(model, w)
    return out


# --------------------------------------------------------------------------
# interconnection

def series(g2: StateSpaceModel, g1: StateSpaceModel) -> StateSpaceModel:
    """Realization of ``g2 * g1`` (``g1`` first)."""
    if g1.n_outputs != g2.n_inputs:
        raise DimensionError(
            f"cannot cascade: g1 has {g1.n_outputs} outputs, g2 has {g2.n_inputs} inputs")
    if g1.dt != g2.dt:
        raise LTIError("cannot cascade models with different sample times")
    n1, n2 = g1.n_states, g2.n_states
    A = np.block([[g1.A, np.zeros((n1, n2))],
                  [g2.B @ g1.C, g2.A]])
    B = np.vstack([g1.B, g2.B @ g1.D])
    C = np.hstack([g2.D @ g1.C, g2.C])
    D = g2.D @ g1.D
    return StateSpaceModel(A, B, C, D, g1.input_names, g2.output_names, g1.dt)


def parallel(g1: StateSpaceModel, g2: StateSpaceModel) -> StateSpaceModel:
    """Realization of ``g1 + g2`` (shared inputs, summed outputs)."""
    if (g1.n_inputs, g1.n_outputs) != (g2.n_inputs, g2.n_outputs):
        raise DimensionError("parallel connection needs matching channel counts")
    A = la.block_diag(g1.A, g2.A)
    B = np.vstack([g1.B, g2.B])
    C = np.hstack([g1.C, g2.C])
    return StateSpaceModel(A, B, C, g1.D + g2.D, g1.input_names, g1.output_names, g1.dt)


def append(*models: StateSpaceModel) -> StateSpaceModel:
    """Block-diagonal stacking of independent models."""
    A = la.block_diag(*[g.A for g in models])
    B = la.block_diag(*[g.B for g in models])
    C = la.block_diag(*[g.C for g in models])
    D = la.block_diag(*[g.D for g in models])
    inputs = tuple(n for g in models for n in g.input_names)
    outputs = tuple(n for g in models for n in g.output_names)
    return StateSpaceModel(A, B, C, D, inputs, outputs, models[0].dt)


def subsystem(model: StateSpaceModel, inputs: str | Sequence[str],
              outputs: str | Sequence[str]) -> StateSpaceModel:
    """Select input/output channels by name."""
    inputs = [inputs] if isinstance(inputs, str) else list(inputs)
    outputs = [outputs] if isinstance(outputs, str) else list(outputs)
    ii = [model.input_index(n) for n in inputs]
    oo = [model.output_index(n) for n in outputs]
    return StateSpaceModel(model.A, model.B[:, ii], model.C[oo, :], model.D[np.ix_(oo, ii)],
                           tuple(inputs), tuple(outputs), model.dt)


def feedback(plant: StateSpaceModel, controller: StateSpaceModel,
             measured: Sequence[str], actuated: Sequence[str]) -> StateSpaceModel:
    """Close ``u[actuated] += K y[measured]`` (positive feedback convention).

    The controller's inputs are the ``measured`` plant outputs and its
    outputs are added to the ``actuated`` plant inputs.  The closed loop
    keeps every plant input as an external input and every plant output,
    followed by the controller outputs, as outputs.
    """
    yi = [plant.output_index(n) for n in measured]
    ui = [plant.input_index(n) for n in actuated]
    if controller.n_inputs != len(yi) or controller.n_outputs != len(ui):
        raise DimensionError("controller channel count does not match measured/actuated lists")
    n, nk = plant.n_states, controller.n_states
    m, p = plant.n_inputs, plant.n_outputs
    Su = np.zeros((m, len(ui)))
    Su[ui, range(len(ui))] = 1.0
    Sy = np.zeros((len(yi), p))
    Sy[range(len(yi)), yi] = 1.0
    # algebraic loop: v = K_D (Sy y), y = C x + D (w + Su v)
    Dk = controller.D
    E = np.eye(len(ui)) - Dk @ Sy @ plant.D @ Su
    if np.linalg.cond(E) > SINGULAR_COND:
        raise LTIError("ill-posed feedback interconnection (algebraic loop)")
    Ei = np.linalg.inv(E)
    # v = Ei (Dk Sy C x + Dk Sy D w + Ck xk)
    Vx = Ei @ Dk @ Sy @ plant.C
    Vw = Ei @ Dk @ Sy @ plant.D
    Vk = Ei @ controller.C
    Ax = plant.A + plant.B @ Su @ Vx
    Axk = plant.B @ Su @ Vk
    Bw = plant.B + plant.B @ Su @ Vw
    # controller sees y = C x + D w + D Su v
    Yx = plant.C + plant.D @ Su @ Vx
    Yk = plant.D @ Su @ Vk
    Yw = plant.D + plant.D @ Su @ Vw
    Akx = controller.B @ Sy @ Yx
    Akk = controller.A + controller.B @ Sy @ Yk
    Bkw = controller.B @ Sy @ Yw
    A = np.block([[Ax, Axk], [Akx, Akk]])
    B = np.vstack([Bw, Bkw])
    C = np.vstack([np.hstack([Yx, Yk]), np.hstack([Vx, Vk])])
    D = np.vstack([Yw, Vw])
    outputs = plant.output_names + tuple(f"fb_{name}" for name in controller.output_names)
    return StateSpaceModel(A, B, C, D, plant.input_names, outputs, plant.dt)


# --------------------------------------------------------------------------
# zeros, relative degree, inversion

def relative_degree(model: StateSpaceModel, tol: float = 1e-12) -> int:
    """Relative degree of a SISO model (``n_states + 1`` for a zero model)."""
    if model.n_inputs != 1 or model.n_outputs != 1:
        raise DimensionError("relative degree is defined here for SISO models only")
    scale = max(1.0, np.abs(model.A).max(initial=0.0))
    ref = (np.abs(model.C).max(initial=0.0) * np.abs(model.B).max(initial=0.0)
           + abs(model.D[0, 0]))
    if abs(model.D[0, 0]) > tol * max(ref, 1e-300):
        return 0
    v = model.B[:, 0].copy()
    for k in range(model.n_states):
        markov = float(model.C[0] @ v)
        if abs(markov) > tol * max(ref, 1e-300) * scale ** k:
            return k + 1
        v = model.A @ v
    return model.n_states + 1


def zeros(model: StateSpaceModel) -> np.ndarray:
    """Finite invariant zeros of a square model (Rosenbrock pencil)."""
    if model.n_inputs != model.n_outputs:
        raise DimensionError("zeros() requires a square model")
    n, m = model.n_states, model.n_inputs
    if n == 0:
        return np.zeros(0, dtype=complex)
    M = np.block([[model.A, model.B], [model.C, model.D]])
    N = np.zeros_like(M)
    N[:n, :n] = np.eye(n)
    z = la.eigvals(M, N)
    z = z[np.isfinite(z)]
    return z[np.abs(z) < 1e10]


def invert(model: StateSpaceModel) -> StateSpaceModel:
    """Inverse of a square, biproper, minimum-phase model.

    Raises :class:`NotInvertibleError` when ``D`` is singular (relative
    degree > 0) and :class:`NonMinimumPhaseError` when the inverse would be
    unstable; the error carries the offending zeros.
    """
    if model.n_inputs != model.n_outputs:
        raise NotInvertibleError("only square models can be inverted")
    if np.linalg.cond(model.D) > SINGULAR_COND:
        raise NotInvertibleError(
            "feedthrough D is singular; augment the relative degree before inverting")
    Di = np.linalg.inv(model.D)
    A = model.A - model.B @ Di @ model.C
    inv = StateSpaceModel(A, model.B @ Di, -Di @ model.C, Di,
                          model.output_names, model.input_names, model.dt)
    poles = inv.poles()
    bad = poles[poles.real >= 0] if not model.is_discrete else poles[np.abs(poles) >= 1]
    if bad.size:
        raise NonMinimumPhaseError(bad)
    return inv


def inverse_poles(model: StateSpaceModel) -> np.ndarray:
    return invert(model).poles()


# --------------------------------------------------------------------------
# balanced truncation

@dataclass(frozen=True)
class ReducedModel:
    model: StateSpaceModel
    hankel_singular_values: np.ndarray
    error_bound: float


def _psd_factor(W: np.ndarray) -> np.ndarray:
    """Return L with ``W ~= L L^T`` for a symmetric PSD matrix."""
    W = 0.5 * (W + W.T)
    lam, U = la.eigh(W)
    lam = np.clip(lam, 0.0, None)
    return U * np.sqrt(lam)


def gramians(model: StateSpaceModel) -> tuple[np.ndarray, np.ndarray]:
    if not model.is_stable():
        raise UnstableModelError(model.poles())
    Wc = la.solve_continuous_lyapunov(model.A, -model.B @ model.B.T)
    Wo = la.solve_continuous_lyapunov(model.A.T, -model.C.T @ model.C)
    return Wc, Wo


def hankel_singular_values(model: StateSpaceModel) -> np.ndarray:
    Wc, Wo = gramians(model)
    Lc, Lo = _psd_factor(Wc), _psd_factor(Wo)
    return la.svdvals(Lo.T @ Lc)


def reduce_order(model: StateSpaceModel, target_order: int) -> ReducedModel:
    """Square-root balanced truncation.

    The returned :class:`ReducedModel` carries the H-infinity error bound
    ``2 * sum(truncated Hankel singular values)``.
    """
    if model.is_discrete:
        raise LTIError("balanced truncation is implemented for continuous models")
    n = model.n_states
    if not 0 < target_order <= n:
        raise LTIError(f"target_order must lie in (0, {n}], got {target_order}")
    Wc, Wo = gramians(model)
    Lc, Lo = _psd_factor(Wc), _psd_factor(Wo)
    U, hsv, Vt = la.svd(Lo.T @ Lc)
    if target_order == n:
        return ReducedModel(model, hsv, 0.0)
    r = target_order
    if hsv[r - 1] <= hsv[0] * 1e-14:
        raise LTIError(
            f"only {int(np.sum(hsv > hsv[0] * 1e-14))} Hankel singular values are "
            f"numerically nonzero; choose a lower target order")
    s = 1.0 / np.sqrt(hsv[:r])
    T = Lc @ Vt[:r].T * s          # n x r
    Ti = (U[:, :r] * s).T @ Lo.T   # r x n
    reduced = StateSpaceModel(Ti @ model.A @ T, Ti @ model.B, model.C @ T, model.D,
                              model.input_names, model.output_names)
    return ReducedModel(reduced, hsv, float(2.0 * hsv[r:].sum()))


def balance_states(model: StateSpaceModel) -> StateSpaceModel:
    """Diagonal similarity that equilibrates row and column norms of ``A``."""
    if model.n_states == 0:
        return model
    _, (s, _) = la.matrix_balance(model.A, permute=False, separate=True)
    return StateSpaceModel(model.A * s[None, :] / s[:, None], model.B / s[:, None],
                           model.C * s[None, :], model.D, model.input_names, model.output_names, model.dt)


def minimal_realization(model: StateSpaceModel, rtol: float = 1e-9) -> StateSpaceModel:
    """Drop balanced states whose Hankel singular value is below ``rtol * max``."""
    model = balance_states(model)
    hsv = hankel_singular_values(model)
    keep = int(np.sum(hsv > rtol * hsv[0])) if hsv.size and hsv[0] > 0 else 0
    if keep == 0:
        return static_gain(model.D, model.input_names, model.output_names)
    if keep == model.n_states:
        return model
    return reduce_order(model, keep).model


# --------------------------------------------------------------------------
# discretization and discrete simulation

def discretize(model: StateSpaceModel, dt: float) -> StateSpaceModel:
    """Zero-order-hold equivalent with sample time ``dt``."""
    if not dt > 0:
        raise LTIError(f"dt must be positive, got {dt}")
    if model.is_discrete:
        raise LTIError("model is already discrete")
    n, m = model.n_states, model.n_inputs
    M = np.zeros((n + m, n + m))
    M[:n, :n] = model.A * dt
    M[:n, n:] = model.B * dt
    E = la.expm(M)
    return StateSpaceModel(E[:n, :n], E[:n, n:], model.C, model.D,
                           model.input_names, model.output_names, float(dt))


def simulate_discrete(model: StateSpaceModel, u: np.ndarray,
                      x0: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Run a discrete model over an input sequence of shape ``(N, m)``.

    Returns ``(y, x)`` with ``y`` of shape ``(N, p)`` and the state
    trajectory ``x`` of shape ``(N + 1, n)``.
    """
    if not model.is_discrete:
        raise LTIError("simulate_discrete needs a discrete model")
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    N = u.shape[0]
    x = np.zeros((N + 1, model.n_states))
    if x0 is not None:
        x[0] = x0
    A, B = model.A, model.B
    Bu = u @ B.T
    for k in range(N):
        x[k + 1] = A @ x[k] + Bu[k]
    y = x[:-1] @ model.C.T + u @ model.D.T
    return y, x


# --------------------------------------------------------------------------
# sampled frequency responses

@dataclass(frozen=True)
class FrequencyResponseSet:
    """Complex responses sampled on a strictly increasing, positive grid.

    ``samples`` has shape ``(len(frequencies), p, m)``.
    """

    frequencies: np.ndarray
    samples: np.ndarray
    input_names: tuple[str, ...] = ()
    output_names: tuple[str, ...] = ()

    def __post_init__(self):
        w = np.array(self.frequencies, dtype=float).ravel()
        g = np.array(self.samples, dtype=complex)
        if g.ndim == 1:
            g = g[:, None, None]
        elif g.ndim == 2:
            g = g[:, :, None]
        if w.size == 0 or np.any(w <= 0) or np.any(np.diff(w) <= 0):
            raise LTIError("frequency grid must be positive and strictly increasing")
        if g.shape[0] != w.size:
            raise DimensionError(f"samples shape {g.shape} does not match grid of {w.size}")
        _, p, m = g.shape
        inputs = tuple(self.input_names) or _default_names("u", m)
        outputs = tuple(self.output_names) or _default_names("y", p)
        if len(inputs) != m or len(outputs) != p:
            raise DimensionError("channel names do not match sample dimensions")
        w.setflags(write=False)
        g.setflags(write=False)
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "samples", g)
        object.__setattr__(self, "input_names", inputs)
        object.__setattr__(self, "output_names", outputs)

    @property
    def n_outputs(self) -> int:
        return self.samples.shape[1]

    @property
    def n_inputs(self) -> int:
        return self.samples.shape[2]

    def band_mask(self, band: Sequence[float]) -> np.ndarray:
        lo, hi = band
        return (self.frequencies >= lo) & (self.frequencies <= hi)

    def with_samples(self, samples: np.ndarray) -> FrequencyResponseSet:
        return FrequencyResponseSet(self.frequencies, samples, self.input_names, self.output_names)

    @classmethod
    def from_model(cls, model: StateSpaceModel, frequencies) -> FrequencyResponseSet:
        return cls(frequencies, freqresp(model, frequencies), model.input_names, model.output_names)

    def to_csv(self, path: str | Path) -> None:
        header = ["omega_rad_s"]
        for o in self.output_names:
            for i in self.input_names:
                header += [f"{o}/{i}_re", f"{o}/{i}_im"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for w, g in zip(self.frequencies, self.samples):
                row = [repr(float(w))]
                for val in g.ravel():
                    row += [repr(float(val.real)), repr(float(val.imag))]
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path: str | Path) -> FrequencyResponseSet:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        pairs = [h[:-3] for h in header[1::2]]
        outputs, inputs = [], []
        for pair in pairs:
            o, _, i = pair.partition("/")
            if o not in outputs:
                outputs.append(o)
            if i not in inputs:
                inputs.append(i)
        data = np.array([[float(v) for v in r] for r in body if r])
        vals = data[:, 1::2] + 1j * data[:, 2::2]
        samples = vals.reshape(len(data), len(outputs), len(inputs))
        return cls(data[:, 0], samples, tuple(inputs), tuple(outputs))
