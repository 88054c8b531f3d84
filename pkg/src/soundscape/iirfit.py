"""Low-order IIR approximation of HRIR magnitudes (high-performance mode).

Per direction and ear, a cascade of peaking biquads plus a broadband gain
is fitted to the response's log-magnitude over 300 Hz - 12 kHz on a
log-spaced grid, by coordinate (compass) descent over each section's
center frequency, Q and gain. Sections start at detected spectral peaks
with 0 dB gain and the broadband gain starts at the best flat fit, so the
reported error can never exceed the pure-gain error. Phase is not fitted:
rendering replaces it with the explicit interaural delay.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .binaural import HrirSet
from .effects import biquad_coeffs

FIT_BAND_HZ = (300.0, 12_000.0)
FIT_GRID_POINTS = 96
_MAG_FLOOR_DB = -140.0


@dataclass
class BiquadSection:
    b0: float
    b1: float
    b2: float
    a1: float
    a2: float


@dataclass
class CascadeFit:
    gain_db: float
    sections: list[BiquadSection]
    error_db: float  # RMS log-magnitude error over the fit band
    converged: bool = True


@dataclass
class HrirIirBank:
    order: int
    sample_rate: int
    grid: list[tuple[float, float]]
    left: list[CascadeFit] = field(default_factory=list)
    right: list[CascadeFit] = field(default_factory=list)
    band_hz: tuple[float, float] = FIT_BAND_HZ


def _fit_grid(fs: int) -> np.ndarray:
    hi = min(FIT_BAND_HZ[1], 0.45 * fs)
    return np.geomspace(FIT_BAND_HZ[0], hi, FIT_GRID_POINTS)


def target_magnitude_db(ir: np.ndarray, freqs_hz: np.ndarray, fs: int) -> np.ndarray:
    """Exact DTFT magnitude of a FIR at the given frequencies, in dB."""
    n = np.arange(ir.shape[0])
    w = 2.0 * np.pi * freqs_hz[:, None] / fs
    h = np.exp(-1j * w * n[None, :]) @ ir
    return 20.0 * np.log10(np.maximum(np.abs(h), 10 ** (_MAG_FLOOR_DB / 20.0)))


def _cascade_mag_db(params: np.ndarray, z: np.ndarray, fs: int) -> np.ndarray:
    """params = [gain_db, (log2 fc, ln q, gain_db) per section]."""
    total = np.full(z.shape, params[0])
    for i in range((params.shape[0] - 1) // 3):
        fc = 2.0 ** params[1 + 3 * i]
        q = math.exp(params[2 + 3 * i])
        g = params[3 + 3 * i]
        c = biquad_coeffs("peaking", fc, q, g, fs)
        num = c["b0"] + c["b1"] * z + c["b2"] * z * z
        den = 1.0 + c["a1"] * z + c["a2"] * z * z
        total += 20.0 * np.log10(np.maximum(np.abs(num / den), 1e-12))
    return total


def _pick_peaks(freqs: np.ndarray, residual_db: np.ndarray, count: int) -> list[float]:
    """Frequencies of the strongest local extrema of the residual."""
    mag = np.abs(residual_db)
    candidates = [
        i for i in range(1, len(mag) - 1) if mag[i] >= mag[i - 1] and mag[i] >= mag[i + 1]
    ]
    candidates.sort(key=lambda i: -mag[i])
    picked: list[float] = []
    for i in candidates:
        f = freqs[i]
        if all(abs(math.log2(f / p)) > 0.3 for p in picked):
            picked.append(f)
        if len(picked) == count:
            break
    # spread any remaining sections evenly over the band
    fallback = np.geomspace(freqs[0] * 2, freqs[-1] / 2, count)
    for f in fallback:
        if len(picked) == count:
            break
        picked.append(float(f))
    return picked


def fit_cascade(target_db: np.ndarray, freqs: np.ndarray, fs: int, n_sections: int,
                max_sweeps: int = 120) -> CascadeFit:
    z = np.exp(-1j * 2.0 * np.pi * freqs / fs)

    def rms(params):
        return float(np.sqrt(np.mean((_cascade_mag_db(params, z, fs) - target_db) ** 2)))

    gain0 = float(np.mean(target_db))
    params = [gain0]
    for f in _pick_peaks(freqs, target_db - gain0, n_sections):
        params += [math.log2(f), math.log(1.5), 0.0]
    params = np.array(params)

    lo = np.array([-60.0] + [math.log2(250.0), math.log(0.3), -24.0] * n_sections)
    hi = np.array([60.0] + [math.log2(0.45 * fs), math.log(20.0), 24.0] * n_sections)
    steps = np.array([1.0] + [0.5, 0.5, 2.0] * n_sections)
    tol = 0.01

    err = rms(params)
    sweeps = 0
    while np.max(steps) > tol and sweeps < max_sweeps:
        err_at_sweep_start = err
        improved = False
        for k in range(params.shape[0]):
            for sign in (1.0, -1.0):
                moved = False
                for _ in range(200):  # ride an improving direction to its end
                    trial = params.copy()
                    trial[k] = min(max(trial[k] + sign * steps[k], lo[k]), hi[k])
                    if trial[k] == params[k]:
                        break
                    e = rms(trial)
                    if e < err - 1e-12:
                        params, err = trial, e
                        moved = True
                        improved = True
                    else:
                        break
                if moved:
                    break
        # shrink once a whole sweep stops paying (not just on total failure)
        if not improved or err_at_sweep_start - err < 1e-3:
            steps *= 0.5
        sweeps += 1

    converged = bool(np.max(steps) <= tol)
    sections = []
    for i in range(n_sections):
        fc = 2.0 ** params[1 + 3 * i]
        q = math.exp(params[2 + 3 * i])
        c = biquad_coeffs("peaking", fc, q, params[3 + 3 * i], fs)
        sections.append(BiquadSection(c["b0"], c["b1"], c["b2"], c["a1"], c["a2"]))
    if not converged:
        # flat-gain fallback keeps the result well defined
        flat = np.array([gain0] + [math.log2(1000.0), math.log(1.0), 0.0] * n_sections)
        flat_err = rms(flat)
        if flat_err < err:
            err = flat_err
            sections = [
                BiquadSection(1.0, 0.0, 0.0, 0.0, 0.0) for _ in range(n_sections)
            ]
            params[0] = gain0
    return CascadeFit(float(params[0]), sections, err, converged)


def fit_iir_approximation(hrirs: HrirSet, order: int) -> HrirIirBank:
    """Fit per-direction, per-ear biquad cascades of the given (even) order.

    Returns the bank with the achieved RMS log-magnitude error for every
    direction; a non-converged direction raises a warning and falls back
    to a flat gain.
    """
    if order not in (4, 6, 8):
        raise ValueError(f"order must be 4, 6 or 8, got {order}")
    n_sections = order // 2
    freqs = _fit_grid(hrirs.sample_rate)
    bank = HrirIirBank(order=order, sample_rate=hrirs.sample_rate, grid=list(hrirs.grid))
    for i in range(len(hrirs.grid)):
        for ears, irs in ((bank.left, hrirs.left), (bank.right, hrirs.right)):
            target = target_magnitude_db(irs[i], freqs, hrirs.sample_rate)
            fit = fit_cascade(target, freqs, hrirs.sample_rate, n_sections)
            if not fit.converged:
                warnings.warn(
                    f"IIR fit did not converge for direction {i} "
                    f"(az {hrirs.grid[i][0]:g}, el {hrirs.grid[i][1]:g}); flat-gain fallback"
                )
            ears.append(fit)
    return bank


def bank_to_document(bank: HrirIirBank) -> dict:
    """JSON form written by the fit CLI, including the per-direction error table."""
    def fits(items):
        return [
            {
                "gain_db": f.gain_db,
                "error_db": f.error_db,
                "converged": f.converged,
                "sections": [
                    {"b0": s.b0, "b1": s.b1, "b2": s.b2, "a1": s.a1, "a2": s.a2}
                    for s in f.sections
                ],
            }
            for f in items
        ]

    return {
        "order": bank.order,
        "sample_rate": bank.sample_rate,
        "band_hz": list(bank.band_hz),
        "grid": [{"azimuth_deg": az, "elevation_deg": el} for az, el in bank.grid],
        "left": fits(bank.left),
        "right": fits(bank.right),
    }
