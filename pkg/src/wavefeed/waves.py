"""Irregular linear waves in deep water and upstream-to-platform prediction.

Waves travel in +x; the platform sits at x = 0 and the upstream measurement
point A at x = -L.  Elevation follows the e^{i w t} convention:

    eta(x, t) = sum_j a_j cos(w_j t - k_j x + phi_j),   k_j = w_j^2 / g
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate, linalg, signal

from .lti import FrequencyResponseSet

GRAVITY = 9.81
#: Wave-energy band, periods 3 s to 20 s.
WAVE_BAND = (2 * np.pi / 20.0, 2 * np.pi / 3.0)


class CausalityError(ValueError):
    """Prediction is anticausal at some requested frequencies."""

    def __init__(self, frequencies: np.ndarray):
        self.frequencies = np.asarray(frequencies)
        shown = ", ".join(f"{w:.4g}" for w in self.frequencies[:10])
        more = "" if self.frequencies.size <= 10 else f" (+{self.frequencies.size - 10} more)"
        super().__init__(f"prediction is anticausal at omega = {shown}{more} rad/s; "
                         "increase the upstream distance or reduce the prediction time")


@dataclass(frozen=True)
class WaveSpectrumParams:
    hs: float
    tp: float
    gamma: float = 3.3
    num_components: int = 200
    frequency_band: tuple[float, float] = WAVE_BAND
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.frequency_band
        if not (self.hs > 0 and self.tp > 0):
            raise ValueError("hs and tp must be positive")
        if self.gamma < 1:
            raise ValueError("gamma must be >= 1")
        if self.num_components < 1:
            raise ValueError("num_components must be >= 1")
        if not 0 < lo < hi:
            raise ValueError(f"invalid frequency band {self.frequency_band}")


def jonswap(omega, hs: float, tp: float, gamma: float = 3.3) -> np.ndarray:
    """One-sided JONSWAP density S(omega) in m^2 s/rad, scaled so that the
    integral over (0, inf) equals (hs / 4)^2."""
    omega = np.asarray(omega, dtype=float)
    return _jonswap_shape(omega, tp, gamma) * (hs / 4.0) ** 2 / _jonswap_area(tp, gamma)


def _jonswap_shape(omega: np.ndarray, tp: float, gamma: float) -> np.ndarray:
    wp = 2 * np.pi / tp
    w = np.where(omega > 0, omega, np.inf)
    sigma = np.where(w <= wp, 0.07, 0.09)
    r = np.exp(-((w - wp) ** 2) / (2 * sigma**2 * wp**2))
    return w**-5 * np.exp(-1.25 * (wp / w) ** 4) * gamma**r


def _jonswap_area(tp: float, gamma: float) -> float:
    wp = 2 * np.pi / tp
    f = lambda w: float(_jonswap_shape(np.array(w), tp, gamma))
    area = 0.0
    for a, b in ((0.2 * wp, wp), (wp, 3 * wp), (3 * wp, 60 * wp)):
        area += integrate.quad(f, a, b, limit=200)[0]
    return area


@dataclass(frozen=True)
class WaveRealization:
    """Finite sum of deep-water linear wave components."""

    amplitudes: np.ndarray
    frequencies: np.ndarray
    phases: np.ndarray
    wavenumbers: np.ndarray
    g: float = GRAVITY

    def __post_init__(self):
        arrays = [np.array(v, dtype=float).ravel() for v in
                  (self.amplitudes, self.frequencies, self.phases, self.wavenumbers)]
        if len({a.size for a in arrays}) != 1:
            raise ValueError("component arrays must have equal length")
        a, w, _, k = arrays
        if np.any(a < 0):
            raise ValueError("amplitudes must be non-negative")
        if np.any(w <= 0):
            raise ValueError("frequencies must be strictly positive")
        if not np.allclose(k, w**2 / self.g, rtol=1e-12, atol=0):
            raise ValueError("wavenumbers violate deep-water dispersion k = w^2/g")
        for name, arr in zip(("amplitudes", "frequencies", "phases", "wavenumbers"), arrays):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_components(cls, amplitudes, frequencies, phases, g: float = GRAVITY) -> WaveRealization:
        w = np.atleast_1d(np.asarray(frequencies, dtype=float))
        return cls(np.atleast_1d(amplitudes), w, np.atleast_1d(phases), w**2 / g, g)

    @property
    def variance(self) -> float:
        return float(np.sum(self.amplitudes**2) / 2)

    def scaled(self, factor: float) -> WaveRealization:
        return WaveRealization(self.amplitudes * factor, self.frequencies, self.phases,
                               self.wavenumbers, self.g)


def synthesize_realization(params: WaveSpectrumParams, g: float = GRAVITY) -> WaveRealization:
    """Draw components from a JONSWAP spectrum on an equal-energy grid.

    The band is split into ``num_components`` bins of equal spectral area;
    each component sits at its bin's energy centroid with amplitude
    ``sqrt(2 * S_bin * dw_bin)`` and an independent uniform phase.
    """
    lo, hi = params.frequency_band
    n = params.num_components
    w = np.linspace(lo, hi, max(20001, 50 * n))
    S = jonswap(w, params.hs, params.tp, params.gamma)
    cum = integrate.cumulative_trapezoid(S, w, initial=0.0)
    total = cum[-1]
    rng = np.random.default_rng(params.seed)
    phases = rng.uniform(0.0, 2 * np.pi, n)
    if total <= 0:
        centers = np.linspace(lo, hi, n + 2)[1:-1] if n > 1 else np.array([(lo + hi) / 2])
        return WaveRealization.from_components(np.zeros(n), centers, phases, g)
    edges = np.interp(np.linspace(0.0, total, n + 1), cum, w)
    edges[0], edges[-1] = lo, hi
    first_moment = integrate.cumulative_trapezoid(S * w, w, initial=0.0)
    m0 = np.diff(np.interp(edges, w, cum))
    m1 = np.diff(np.interp(edges, w, first_moment))
    centers = np.where(m0 > 0, m1 / np.where(m0 > 0, m0, 1.0), 0.5 * (edges[:-1] + edges[1:]))
    amplitudes = np.sqrt(2.0 * np.clip(m0, 0.0, None))
    return WaveRealization.from_components(amplitudes, centers, phases, g)


def _component_sum(real: WaveRealization, x: float, t: np.ndarray,
                   gain: np.ndarray | None = None, chunk: int = 8192) -> np.ndarray:
    amp = real.amplitudes.astype(complex) if gain is None else real.amplitudes * gain
    # complex amplitude at position x
    c = amp * np.exp(1j * (real.phases - real.wavenumbers * x))
    t = np.asarray(t, dtype=float)
    flat = t.ravel()
    out = np.empty(flat.size)
    for start in range(0, flat.size, chunk):
        tt = flat[start:start + chunk]
        out[start:start + chunk] = np.real(np.exp(1j * np.outer(tt, real.frequencies)) @ c)
    return out.reshape(t.shape)


def elevation_at(real: WaveRealization, x: float, t) -> np.ndarray | float:
    """Surface elevation at position ``x`` (m) and time(s) ``t`` (s)."""
    result = _component_sum(real, float(x), np.asarray(t, dtype=float))
    return float(result) if np.ndim(t) == 0 else result


def linear_response(real: WaveRealization, transfer: np.ndarray, t, x: float = 0.0) -> np.ndarray:
    """Steady-state response of a linear system with complex gain ``transfer``
    (one value per component) to the elevation at ``x``."""
    transfer = np.asarray(transfer)
    if transfer.ndim == 1:
        return _component_sum(real, x, np.asarray(t, dtype=float), transfer)
    return np.stack([_component_sum(real, x, np.asarray(t, dtype=float), col)
                     for col in transfer.T], axis=-1)


# --------------------------------------------------------------------------
# prediction

@dataclass(frozen=True)
class PredictionConfig:
    upstream_distance: float
    prediction_time: float
    g: float = GRAVITY

    def __post_init__(self):
        if not (self.upstream_distance > 0 and self.prediction_time > 0 and self.g > 0):
            raise ValueError("upstream distance, prediction time and g must be positive")

    def phase(self, omega) -> np.ndarray:
        """Phase of the prediction filter, ``w (t_p - w L / g)``."""
        omega = np.asarray(omega, dtype=float)
        return omega * (self.prediction_time - omega * self.upstream_distance / self.g)

    @property
    def causal_cutoff(self) -> float:
        """Lowest frequency at which the prediction is causal."""
        return self.g * self.prediction_time / self.upstream_distance


def causal_mask(cfg: PredictionConfig, omega) -> np.ndarray:
    """True where ``t_p - w L / g <= 0`` (prediction realizable)."""
    omega = np.asarray(omega, dtype=float)
    arg = cfg.prediction_time - omega * cfg.upstream_distance / cfg.g
    return arg <= 1e-12 * cfg.prediction_time


def prediction_filter(cfg: PredictionConfig, grid, wave_band: Sequence[float] | None = None
                      ) -> FrequencyResponseSet:
    """Unit-magnitude filter from upstream elevation to future platform elevation.

    When ``wave_band`` is given, any grid frequency inside it at which the
    filter is anticausal raises :class:`CausalityError`.
    """
    grid = np.asarray(grid, dtype=float)
    if wave_band is not None:
        lo, hi = wave_band
        inside = (grid >= lo) & (grid <= hi)
        bad = grid[inside & ~causal_mask(cfg, grid)]
        if bad.size:
            raise CausalityError(bad)
    samples = np.exp(1j * cfg.phase(grid))
    return FrequencyResponseSet(grid, samples, ("eta_upstream",), ("eta_platform_predicted",))


def min_measurement_distance(max_period: float, prediction_time: float, g: float = GRAVITY) -> float:
    """Smallest upstream distance keeping the prediction causal for all
    periods up to ``max_period``."""
    if max_period <= 0 or prediction_time < 0 or g <= 0:
        raise ValueError("max_period and g must be positive, prediction_time non-negative")
    return g * max_period * prediction_time / (2 * np.pi)


class WavePredictor:
    """Causal FIR realization of the prediction filter.

    Taps are the least-squares fit to the ideal response, weighted to the
    wave band (weight ``out_of_band_weight`` elsewhere), restricted to
    non-negative lags.  The normal equations are Toeplitz and solved by
    Levinson recursion.  Output sample ``n`` depends only on upstream
    samples ``<= n``; ``transient`` is the start-up time before the output
    is valid.
    """

    def __init__(self, cfg: PredictionConfig, dt: float, band: Sequence[float] = WAVE_BAND,
                 out_of_band_weight: float = 1e-6, margin: float = 60.0):
        lo, hi = band
        if not causal_mask(cfg, lo):
            raise CausalityError(np.array([lo]))
        self.cfg, self.dt, self.band = cfg, float(dt), (float(lo), float(hi))
        design_hi = 1.15 * hi
        max_delay = 2 * design_hi * cfg.upstream_distance / cfg.g - cfg.prediction_time
        self.length = int(np.ceil((max_delay + margin) / dt)) + 1
        nfft = 1 << int(np.ceil(np.log2(16 * self.length)))
        omega = 2 * np.pi * np.fft.rfftfreq(nfft, dt)
        in_band = (omega >= lo) & (omega <= design_hi)
        weight = np.where(in_band, 1.0, out_of_band_weight)
        desired = np.where(in_band, np.exp(1j * cfg.phase(omega)), 0.0)
        autocorr = np.fft.irfft(weight, nfft)[: self.length]
        cross = np.fft.irfft(weight * desired, nfft)[: self.length]
        self.kernel = linalg.solve_toeplitz(autocorr, cross)
        self.transient = max(2 * 2 * np.pi / lo, self.length * dt)

    def response(self, omega) -> np.ndarray:
        omega = np.atleast_1d(np.asarray(omega, dtype=float))
        k = np.arange(self.length)
        return np.exp(-1j * np.outer(omega, k * self.dt)) @ self.kernel

    def apply(self, upstream: np.ndarray) -> np.ndarray:
        """Predicted platform elevation ``t_p`` ahead, same length as input."""
        upstream = np.asarray(upstream, dtype=float)
        if upstream.size == 0:
            return upstream.copy()
        return signal.oaconvolve(upstream, self.kernel, mode="full")[: upstream.size]


def predict_elevation(upstream, dt: float, cfg: PredictionConfig,
                      band: Sequence[float] = WAVE_BAND, duration: float | None = None) -> np.ndarray:
    """Predict ``eta_0(t + t_p)`` from a uniformly sampled upstream record.

    ``upstream`` is an elevation series sampled at ``dt``, or a
    :class:`WaveRealization` sampled at ``x = -L`` over ``duration`` seconds.
    """
    if isinstance(upstream, WaveRealization):
        if duration is None:
            raise ValueError("duration is required when predicting from a WaveRealization")
        t = np.arange(int(round(duration / dt))) * dt
        upstream = elevation_at(upstream, -cfg.upstream_distance, t)
    lo, hi = band
    prediction_filter(cfg, np.linspace(lo, hi, 64), wave_band=band)
    return WavePredictor(cfg, dt, band).apply(upstream)


def nrmse(estimate: np.ndarray, truth: np.ndarray) -> float:
    truth = np.asarray(truth, dtype=float)
    return float(np.sqrt(np.mean((np.asarray(estimate) - truth) ** 2)) / np.std(truth))


def write_elevation_csv(path: str | Path, t, eta) -> None:
    """Two-column CSV: time (s), elevation (m)."""
    data = np.column_stack([np.asarray(t, dtype=float), np.asarray(eta, dtype=float)])
    np.savetxt(path, data, delimiter=",", header="time_s,elevation_m", comments="", fmt="%.17g")


def read_elevation_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected two columns (time, elevation)")
    return data[:, 0], data[:, 1]
