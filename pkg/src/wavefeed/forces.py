"""Parametric wave-excitation model (PWEM) identification.

Frequency-domain force coefficients from a panel code are non-causal: the
force on the platform starts before the elevation at its centre of buoyancy
rises. Delaying the coefficients by ``t_p`` makes them causal so that a
low-order state-space model driven by a ``t_p``-ahead elevation prediction
reproduces the forces.

Identification pipeline: causalize, resample to a uniform grid, inverse
transform to an impulse response, ERA realization, stability projection,
vector-fitting pole refinement on the band, least-squares output map.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import linalg

from .lti import FrequencyResponseSet, StateSpaceModel, freqresp

OUTPUTS = ("surge_force", "pitch_moment")
INPUT = "eta"
CSV_COLUMNS = ("omega_rad_s", "Fx_re", "Fx_im", "My_re", "My_im")

# inverse-transform grid: uniform, 0 to 2 rad/s, Hermitian extension
IMPULSE_WMAX = 2.0
IMPULSE_POINTS = 2048
# time-domain interpolation factor for the pre-zero energy test
ENERGY_OVERSAMPLE = 8
HANKEL_RANK_RTOL = 1e-9
STABILITY_MARGIN = 1e-6
ROLLOFF_RATIO = 0.10


class IdentificationError(RuntimeError):
    """Raised when the realization or delay search cannot deliver a model."""


class CoefficientFormatError(ValueError):
    """Raised for malformed coefficient files."""


@dataclass(frozen=True)
class ForceCoefficientSet:
    """Wave force per metre of elevation: surge force (N/m) and pitch moment (N m/m).

    Sets whose magnitude does not roll off to below 10% of the peak at the
    top of the grid are accepted but flagged (``rolls_off`` is False and a
    warning is emitted), since a truncated response aliases in the inverse
    transform.
    """

    response: FrequencyResponseSet

    def __post_init__(self):
        r = self.response
        if r.n_inputs != 1 or tuple(r.output_names) != OUTPUTS:
            raise ValueError(f"force coefficients need outputs {OUTPUTS} and one input, "
                             f"got {r.output_names} x {r.input_names}")
        if not self.rolls_off:
            warnings.warn("force coefficients do not roll off at the top of the grid",
                          RuntimeWarning, stacklevel=3)

    @classmethod
    def from_arrays(cls, frequencies, surge_force, pitch_moment) -> ForceCoefficientSet:
        samples = np.stack([np.asarray(surge_force), np.asarray(pitch_moment)], axis=1)
        return cls(FrequencyResponseSet(frequencies, samples[:, :, None], (INPUT,), OUTPUTS))

    @property
    def frequencies(self) -> np.ndarray:
        return self.response.frequencies

    @property
    def values(self) -> np.ndarray:
        """Complex samples, shape ``(n_freq, 2)``."""
        return self.response.samples[:, :, 0]

    @property
    def rolls_off(self) -> bool:
        mag = np.abs(self.response.samples[:, :, 0])
        return bool(np.all(mag[-1] < ROLLOFF_RATIO * mag.max(axis=0)))

    def with_values(self, values: np.ndarray) -> ForceCoefficientSet:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return ForceCoefficientSet(self.response.with_samples(np.asarray(values)[:, :, None]))


def read_coefficients(path: str | Path) -> ForceCoefficientSet:
    """Read the five-column coefficient CSV (header row mandatory)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [(reader.line_num, r) for r in reader if r and not r[0].startswith("#")]
    if not rows:
        raise CoefficientFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0][1]]
    if tuple(header) != CSV_COLUMNS:
        raise CoefficientFormatError(
            f"{path}, line {rows[0][0]}: expected header {','.join(CSV_COLUMNS)}, got {header}")
    values = []
    for line, r in rows[1:]:
        try:
            if len(r) != len(CSV_COLUMNS):
                raise ValueError(f"expected {len(CSV_COLUMNS)} fields, got {len(r)}")
            values.append([float(v) for v in r])
        except ValueError as exc:
            raise CoefficientFormatError(f"{path}, line {line}: {exc}") from None
    data = np.array(values, dtype=float).reshape(-1, len(CSV_COLUMNS))
    if len(data) < 2:
        raise CoefficientFormatError(f"{path}: need at least two rows of five columns")
    if not np.all(np.isfinite(data)):
        raise CoefficientFormatError(f"{path}: non-finite values")
    try:
        return ForceCoefficientSet.from_arrays(data[:, 0], data[:, 1] + 1j * data[:, 2],
                                               data[:, 3] + 1j * data[:, 4])
    except ValueError as exc:
        raise CoefficientFormatError(f"{path}: {exc}") from None


def write_coefficients(coeffs: ForceCoefficientSet, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for w, (fx, my) in zip(coeffs.frequencies, coeffs.values):
            writer.writerow([repr(float(v)) for v in (w, fx.real, fx.imag, my.real, my.imag)])


# -- causalization ---------------------------------------------------------

def causalize(coeffs: ForceCoefficientSet, t_p: float) -> ForceCoefficientSet:
    """Delay the coefficients by ``t_p`` seconds (pure phase, magnitude unchanged)."""
    if t_p < 0:
        raise ValueError("t_p must be non-negative")
    if t_p == 0:
        return coeffs
    shift = np.exp(-1j * coeffs.frequencies * t_p)
    return coeffs.with_values(coeffs.values * shift[:, None])


def _uniform_spectrum(coeffs: ForceCoefficientSet, wmax: float = IMPULSE_WMAX,
                      points: int = IMPULSE_POINTS) -> tuple[np.ndarray, np.ndarray]:
    grid = np.linspace(0.0, wmax, points)
    w, g = coeffs.frequencies, coeffs.values
    out = np.empty((points, g.shape[1]), dtype=complex)
    for j in range(g.shape[1]):
        # np.interp holds the end values outside the coefficient grid
        out[:, j] = np.interp(grid, w, g[:, j].real) + 1j * np.interp(grid, w, g[:, j].imag)
    out[0] = out[0].real
    return grid, out


def impulse_response(coeffs: ForceCoefficientSet, oversample: int = 1
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Real impulse response of the coefficient set.

    Returns ``(t, h)`` with ``h`` of shape ``(n, 2)`` and ``t`` wrapped so
    that the second half of the periodic record carries negative times.
    Sample spacing is ``pi / IMPULSE_WMAX / oversample``.
    """
    _, spectrum = _uniform_spectrum(coeffs)
    n = 2 * (IMPULSE_POINTS - 1) * oversample
    dt = np.pi / IMPULSE_WMAX / oversample
    h = np.fft.irfft(spectrum, n, axis=0) * oversample / (np.pi / IMPULSE_WMAX)
    t = np.arange(n) * dt
    t[n // 2:] -= n * dt
    return t, h


def pre_zero_energy_fraction(coeffs: ForceCoefficientSet, t_p: float = 0.0) -> np.ndarray:
    """Fraction of impulse-response energy at negative times, per output."""
    t, h = impulse_response(causalize(coeffs, t_p), ENERGY_OVERSAMPLE)
    energy = np.sum(h**2, axis=0)
    negative = np.sum(h[t < 0] ** 2, axis=0)
    return np.divide(negative, energy, out=np.zeros_like(energy), where=energy > 0)


def select_causalization_delay(coeffs: ForceCoefficientSet, energy_tolerance: float = 0.01,
                               step: float = 0.5, max_delay: float = 60.0) -> float:
    """Smallest delay on a ``step`` grid meeting the energy tolerance on both outputs."""
    if not 0 < energy_tolerance < 1:
        raise ValueError("energy_tolerance must lie in (0, 1)")
    for t_p in np.arange(0.0, max_delay + step / 2, step):
        if np.all(pre_zero_energy_fraction(coeffs, t_p) <= energy_tolerance):
            return float(t_p)
    raise IdentificationError(f"no delay up to {max_delay} s brings the pre-zero energy "
                              f"below {energy_tolerance:.3g}")


# -- identification ---------------------------------------------------------

@dataclass(frozen=True)
class FitReport:
    """Per-output fit percentage and Akaike's final prediction error on a band."""

    fit_percent: dict[str, float]
    fpe: float
    band: tuple[float, float]
    residual_variance: float
    num_parameters: int
    num_samples: int

    def to_dict(self) -> dict:
        return {"fit_percent": dict(self.fit_percent), "fpe": self.fpe, "band": list(self.band),
                "residual_variance": self.residual_variance,
                "num_parameters": self.num_parameters, "num_samples": self.num_samples}


@dataclass(frozen=True)
class PwemModel:
    model: StateSpaceModel
    t_p: float
    fit_report: FitReport | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.t_p <= 0:
            raise ValueError("t_p must be positive")
        if not self.model.is_stable():
            raise ValueError("PWEM must be asymptotically stable")
        if self.model.n_inputs != 1 or self.model.n_outputs != 2:
            raise ValueError("PWEM maps one elevation input to two force outputs")

    @property
    def order(self) -> int:
        return self.model.n_states

    def response(self, omega) -> np.ndarray:
        """Frequency response of the causalized model, shape ``(n, 2)``."""
        return freqresp(self.model, np.atleast_1d(omega))[:, :, 0]

    def non_causal_response(self, omega) -> np.ndarray:
        """Model response with the delay removed, comparable to raw coefficients."""
        w = np.atleast_1d(np.asarray(omega, dtype=float))
        return self.response(w) * np.exp(1j * w * self.t_p)[:, None]

    def to_dict(self) -> dict:
        return {"model": self.model.to_dict(), "t_p": self.t_p,
                "fit_report": self.fit_report.to_dict() if self.fit_report else None}

    @classmethod
    def from_dict(cls, data: dict) -> PwemModel:
        rep = data.get("fit_report")
        report = None
        if rep:
            report = FitReport(dict(rep["fit_percent"]), float(rep["fpe"]), tuple(rep["band"]),
                               float(rep["residual_variance"]), int(rep["num_parameters"]),
                               int(rep["num_samples"]))
        return cls(StateSpaceModel.from_dict(data["model"]), float(data["t_p"]), report)


def _era_poles(impulse: np.ndarray, dt: float, order: int) -> np.ndarray:
    """Continuous-time poles from an ERA realization of sampled Markov parameters."""
    p = impulse.shape[1]
    blocks = max(3 * order, 50)
    if 2 * blocks + 2 > impulse.shape[0] // 2:
        raise IdentificationError("impulse response too short for the requested order")
    markov = impulse[1: 2 * blocks + 2]  # skip t = 0, where feedthrough and the jump live
    idx = np.arange(blocks)[:, None] + np.arange(blocks)[None, :]
    H0 = markov[idx].transpose(0, 2, 1).reshape(blocks * p, blocks)
    H1 = markov[idx + 1].transpose(0, 2, 1).reshape(blocks * p, blocks)
    U, s, Vt = np.linalg.svd(H0, full_matrices=False)
    rank = int(np.sum(s > HANKEL_RANK_RTOL * s[0])) if s[0] > 0 else 0
    if rank < order:
        raise IdentificationError(f"Hankel matrix has numerical rank {rank} < order {order}; "
                                  f"try order <= {max(rank, 1)}")
    root = 1 / np.sqrt(s[:order])
    Ad = (root[:, None] * U[:, :order].T) @ H1 @ (Vt[:order].T * root[None, :])
    lam = np.linalg.eigvals(Ad).astype(complex)
    poles = np.empty(order, dtype=complex)
    negative_real = (lam.imag == 0) & (lam.real < 0)
    poles[negative_real] = np.log(np.abs(lam[negative_real]) + 1e-300) / dt
    poles[~negative_real] = np.log(lam[~negative_real]) / dt
    return poles


def _project_stable(poles: np.ndarray) -> np.ndarray:
    """Reflect right-half-plane poles and keep every pole off the axis."""
    re = -np.abs(poles.real)
    re = np.minimum(re, -STABILITY_MARGIN * np.maximum(np.abs(poles), 1.0))
    return re + 1j * poles.imag


def _modal_pair(poles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Real block-diagonal A and controllable B for a conjugate-closed pole set."""
    blocks, b = [], []
    for p in poles:
        if p.imag > 0:
            blocks.append(np.array([[p.real, p.imag], [-p.imag, p.real]]))
            b += [0.0, 1.0]
        elif p.imag == 0:
            blocks.append(np.array([[p.real]]))
            b.append(1.0)
    return linalg.block_diag(*blocks), np.array(b)[:, None]


def _conjugate_closed(poles: np.ndarray) -> np.ndarray:
    """Snap near-conjugate pairs so that the set is exactly conjugate-closed."""
    poles = np.asarray(poles, dtype=complex)
    upper = poles[poles.imag > 0]
    real = poles[poles.imag == 0].real
    out = np.concatenate([upper, upper.conj(), real + 0j])
    if out.size != poles.size:
        # an unmatched complex pole: drop its imaginary part
        lower = poles[poles.imag < 0]
        extra = lower.size - upper.size
        real = np.concatenate([real, np.sort(lower.real)[:extra]])
        out = np.concatenate([upper, upper.conj(), real + 0j])
    return out


def _basis(A: np.ndarray, B: np.ndarray, omega: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    eye = np.eye(n)
    return np.stack([np.linalg.solve(1j * w * eye - A, B[:, 0]) for w in omega])


def _vector_fit(poles: np.ndarray, omega: np.ndarray, data: np.ndarray, iterations: int) -> np.ndarray:
    """Relocate a common pole set to the zeros of the vector-fitting weight function."""
    p = data.shape[1]
    data = data / np.sqrt(np.mean(np.abs(data) ** 2, axis=0))
    for _ in range(iterations):
        A, B = _modal_pair(poles)
        n = A.shape[0]
        X = _basis(A, B, omega)
        rows = []
        for j in range(p):
            block = np.zeros((omega.size, p * (n + 1) + n), dtype=complex)
            block[:, j * (n + 1): j * (n + 1) + n] = X
            block[:, j * (n + 1) + n] = 1.0
            block[:, p * (n + 1):] = -data[:, j: j + 1] * X
            rows.append(block)
        M = np.vstack(rows)
        rhs = data.T.ravel()
        Mr = np.vstack([M.real, M.imag])
        rr = np.concatenate([rhs.real, rhs.imag])
        scale = np.linalg.norm(Mr, axis=0)
        scale[scale == 0] = 1.0
        theta = np.linalg.lstsq(Mr / scale, rr, rcond=None)[0] / scale
        sigma = theta[p * (n + 1):]
        updated = _project_stable(np.linalg.eigvals(A - B @ sigma[None, :]))
        updated = _conjugate_closed(updated)
        converged = np.allclose(np.sort_complex(updated), np.sort_complex(poles), rtol=1e-10, atol=1e-12)
        poles = updated
        if converged:
            break
    return poles


def _fit_output_map(A: np.ndarray, B: np.ndarray, omega: np.ndarray,
                    data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = _basis(A, B, omega)
    R = np.hstack([X, np.ones((omega.size, 1))])
    Rr = np.vstack([R.real, R.imag])
    rhs = np.vstack([data.real, data.imag])
    theta = np.linalg.lstsq(Rr, rhs, rcond=None)[0]
    return theta[:-1].T, theta[-1:].T


def identify_pwem(coeffs: ForceCoefficientSet, t_p: float, order: int = 9,
                  band: Sequence[float] = (2 * np.pi / 20, 2 * np.pi / 3),
                  refine_iterations: int = 50) -> PwemModel:
    """Identify a stable ``order``-state model of the causalized coefficients.

    Parameters
    ----------
    coeffs
        Non-parametric (non-causal) force coefficients.
    t_p
        Causalization delay in seconds, e.g. from :func:`select_causalization_delay`.
    order
        Number of states.
    band
        Frequency band (rad/s) on which poles are refined and the fit is reported.
    refine_iterations
        Maximum vector-fitting iterations; 0 keeps the ERA poles.
    """
    if int(order) != order or order < 1:
        raise ValueError("order must be a positive integer")
    if t_p <= 0:
        raise ValueError("t_p must be positive")
    lo, hi = band
    w = coeffs.frequencies
    if not (w[0] <= lo < hi <= w[-1]):
        raise ValueError(f"band {band} not inside the coefficient grid [{w[0]}, {w[-1]}]")
    delayed = causalize(coeffs, t_p)
    _, h = impulse_response(delayed)
    poles = _project_stable(_conjugate_closed(_era_poles(h, np.pi / IMPULSE_WMAX, order)))
    mask = delayed.response.band_mask(band)
    omega, data = w[mask], delayed.values[mask]
    if refine_iterations:
        poles = _vector_fit(poles, omega, data, refine_iterations)
    A, B = _modal_pair(poles)
    C, D = _fit_output_map(A, B, omega, data)
    model = StateSpaceModel(A, B, C, D, (INPUT,), OUTPUTS)
    pwem = PwemModel(model, float(t_p))
    return PwemModel(model, float(t_p), fit_metrics(pwem, coeffs, band))


def fit_percent(estimate: np.ndarray, data: np.ndarray) -> np.ndarray:
    """Normalized fit ``100 (1 - |estimate - data| / |data - mean(data)|)`` per column."""
    estimate = np.atleast_2d(np.asarray(estimate).T).T
    data = np.atleast_2d(np.asarray(data).T).T
    spread = np.linalg.norm(data - data.mean(axis=0), axis=0)
    miss = np.linalg.norm(estimate - data, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        fit = 100 * (1 - miss / spread)
    return np.where(spread > 0, fit, np.where(miss == 0, 100.0, -np.inf))


def fit_metrics(model: PwemModel, coeffs: ForceCoefficientSet,
                band: Sequence[float] = (2 * np.pi / 20, 2 * np.pi / 3)) -> FitReport:
    """Fit percentage per output and final prediction error on ``band``.

    The model is compared with the coefficients causalized by ``model.t_p``.
    Complex residuals count as two real observations each.
    """
    delayed = causalize(coeffs, model.t_p)
    mask = delayed.response.band_mask(band)
    if not mask.any():
        raise ValueError("band contains no coefficient samples")
    data = delayed.values[mask]
    fitted = model.response(delayed.frequencies[mask])
    err = fitted - data
    fits = dict(zip(OUTPUTS, map(float, fit_percent(fitted, data))))
    m = model.model
    d = m.n_states + m.n_states * m.n_outputs + m.n_outputs
    N = 2 * err.size
    V = float(np.sum(np.abs(err) ** 2) / N)
    fpe = V * (1 + d / N) / (1 - d / N) if d < N else float("inf")
    return FitReport(fits, float(fpe), (float(band[0]), float(band[1])), V, d, N)


# -- synthetic reference set ------------------------------------------------

def _pole(omega_n: float, zeta: float) -> complex:
    return complex(-zeta * omega_n, omega_n * np.sqrt(1 - zeta**2))


# modes and zeros of the rational model behind the shipped coefficient set
REFERENCE_POLES = (_pole(0.45, 0.35), _pole(0.8, 0.3), _pole(1.2, 0.3), _pole(1.6, 0.3), complex(-0.9))
REFERENCE_ZEROS = {
    "surge_force": (0.0, -2.0, -0.2 + 0.9j, -0.2 - 0.9j, -0.3 + 1.5j, -0.3 - 1.5j, -0.6),
    "pitch_moment": (0.0, -2.0, -0.1 + 0.6j, -0.1 - 0.6j, -0.6 + 1.4j, -0.6 - 1.4j, -0.8),
}
REFERENCE_PEAKS = {"surge_force": 8.0e6, "pitch_moment": 3.2e8}
REFERENCE_LEAD = 10.0


def rational_force_model(poles: Sequence[complex] = REFERENCE_POLES,
                         zeros: dict[str, Sequence[complex]] | None = None,
                         peaks: dict[str, float] | None = None) -> StateSpaceModel:
    """Causal SIMO force model with common poles and per-output zeros.

    Only poles with non-negative imaginary part are listed; each complex
    pole contributes its conjugate. Each output is scaled so that its
    magnitude peak over 0.01 to 3 rad/s equals ``peaks[name]``.
    """
    zeros = REFERENCE_ZEROS if zeros is None else zeros
    peaks = REFERENCE_PEAKS if peaks is None else peaks
    full = []
    for p in poles:
        full += [p, np.conj(p)] if p.imag > 0 else [complex(p.real)]
    full = np.array(full)
    A, B = _modal_pair(np.array(poles))
    rows = []
    for name in OUTPUTS:
        z = np.asarray(zeros[name], dtype=complex)
        cols = []
        for p in poles:
            residue = np.prod(p - z) / np.prod([p - q for q in full if q != p])
            if p.imag > 0:
                # r/(s-p) + conj(r)/(s-conj p) realized with B = [0, 1]
                cols += [-2 * residue.imag, 2 * residue.real]
            else:
                cols.append(residue.real)
        rows.append(cols)
    C = np.array(rows)
    model = StateSpaceModel(A, B, C, np.zeros((2, 1)), (INPUT,), OUTPUTS)
    grid = np.linspace(0.01, 3.0, 3000)
    peak = np.abs(freqresp(model, grid)[:, :, 0]).max(axis=0)
    gain = np.array([peaks[name] for name in OUTPUTS]) / peak
    return StateSpaceModel(A, B, C * gain[:, None], model.D, (INPUT,), OUTPUTS)


def synthetic_coefficients(model: StateSpaceModel | None = None, lead: float = REFERENCE_LEAD,
                           frequencies=None) -> ForceCoefficientSet:
    """Non-causal coefficients: a causal model advanced by ``lead`` seconds."""
    model = rational_force_model() if model is None else model
    w = np.arange(0.01, 3.0 + 1e-9, 0.005) if frequencies is None else np.asarray(frequencies, float)
    g = freqresp(model, w)[:, :, 0] * np.exp(1j * w * lead)[:, None]
    return ForceCoefficientSet.from_arrays(w, g[:, 0], g[:, 1])


REFERENCE_FILE = "triplespar_like_coefficients.csv"


def load_reference_coefficients() -> ForceCoefficientSet:
    """Shipped synthetic coefficient set (reference rational model, 10 s lead)."""
    with resources.as_file(resources.files("wavefeed") / "data" / REFERENCE_FILE) as path:
        return read_coefficients(path)
