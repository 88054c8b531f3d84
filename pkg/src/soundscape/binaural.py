"""Binaural spatialization of a mono stream for one source-relative pose.

The chain per processed block: distance attenuation, air-absorption
lowpass, interaural time difference as a pure far-ear fractional delay
(Woodworth spherical-head model with head radius = circumference / 2*pi
and c = 343 m/s), per-ear head-related impulse response convolution with
history carried across blocks, and a near-field level-difference shelf.
When the selected impulse-response grid point changes between blocks, the
old and new filters both run for one block and their outputs crossfade
linearly, so pose motion never clicks.

Supplied HRIR sets are assumed time-aligned across ears (minimum-phase
like): the interaural delay is added explicitly and would double up with
any delay already baked into the responses.

A high-performance mode replaces the convolution with low-order IIR
cascades fitted to each response's magnitude (see iirfit), keeping the
explicit interaural delay.

Azimuth convention everywhere: positive azimuth is to the listener's
LEFT (counterclockwise, matching the yaw frame); elevation positive up.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .audio import AudioBuffer, decode_wav, encode_wav
from .convolve import fft_convolve

SPEED_OF_SOUND = 343.0
AIR_CUTOFF_MAX_HZ = 20_000.0
AIR_CUTOFF_MIN_HZ = 1_000.0
AIR_HALVING_METRES = 15.0
NEAR_FIELD_SHELF_HZ = 2_000.0
NEAR_FIELD_MAX_DB = 6.0


class HrirError(Exception):
    pass


@dataclass
class DistanceModel:
    reference_distance: float = 1.0
    attenuation_db_per_m: float = 3.0
    near_field_radius: float = 1.5
    far_field_distance: float = 15.0
    near_field_max_db: float = NEAR_FIELD_MAX_DB

    def __post_init__(self):
        if self.reference_distance <= 0:
            raise ValueError("reference_distance must be > 0")
        if self.attenuation_db_per_m < 0:
            raise ValueError("attenuation must be >= 0 dB/m")
        if self.far_field_distance <= self.near_field_radius:
            raise ValueError("far_field_distance must exceed near_field_radius")


@dataclass
class HrirSet:
    """Indexed impulse-response pairs on an azimuth/elevation grid.

    ``left``/``right`` have shape (directions, taps); ``grid`` holds
    (azimuth_deg in [0, 360), elevation_deg in [-90, 90]) per direction.
    """

    sample_rate: int
    grid: list[tuple[float, float]]
    left: np.ndarray
    right: np.ndarray
    name: str = ""

    def __post_init__(self):
        self.left = np.asarray(self.left, dtype=np.float64)
        self.right = np.asarray(self.right, dtype=np.float64)
        if not self.grid:
            raise HrirError("HRIR grid is empty")
        if self.left.shape != self.right.shape or self.left.shape[0] != len(self.grid):
            raise HrirError("HRIR arrays do not match the grid")
        for az, el in self.grid:
            if not (0.0 <= az < 360.0) or not (-90.0 <= el <= 90.0):
                raise HrirError(f"grid point ({az}, {el}) out of range")

    @property
    def length(self) -> int:
        return self.left.shape[1]


def select_hrir(hrirs: HrirSet, azimuth_deg: float, elevation_deg: float) -> int:
    """Index of the grid point with smallest great-circle angle to the query.

    Ties resolve to the lowest index. The azimuth difference is folded to
    [0, 180] before the cosine so mirrored queries against a mirrored grid
    compute bit-identical distances.
    """
    az = azimuth_deg % 360.0
    g_az = np.array([p[0] for p in hrirs.grid])
    g_el = np.radians([p[1] for p in hrirs.grid])
    el = math.radians(elevation_deg)

    d_az = np.abs(g_az - az) % 360.0
    d_az = np.where(d_az > 180.0, 360.0 - d_az, d_az)
    cos_angle = np.sin(el) * np.sin(g_el) + np.cos(el) * np.cos(g_el) * np.cos(np.radians(d_az))
    return int(np.argmax(cos_angle))


def _lateral_sin(azimuth_rad: float, elevation_rad: float) -> float:
    """sin(lateral angle), computed odd-exact in azimuth so that mirrored
    poses produce exactly negated values."""
    s = math.sin(abs(azimuth_rad)) * math.cos(elevation_rad)
    return -s if azimuth_rad < 0 else s


def itd_delays(
    head_circumference_m: float, azimuth_rad: float, elevation_rad: float
) -> tuple[float, float]:
    """(delay_left_s, delay_right_s): Woodworth interaural time difference.

    With head radius r = circumference / 2*pi and lateral angle
    theta = arcsin(sin(az) * cos(el)), the full difference
    (r / c) * (|theta| + sin |theta|) is applied to the far ear; the near
    ear gets zero.
    """
    r = head_circumference_m / (2.0 * math.pi)
    u = _lateral_sin(azimuth_rad, elevation_rad)
    theta = math.asin(min(1.0, abs(u)))
    itd = (r / SPEED_OF_SOUND) * (theta + math.sin(theta))
    if u > 0:  # source to the left: right ear is far
        return 0.0, itd
    if u < 0:
        return itd, 0.0
    return 0.0, 0.0


def distance_gain(d_m: float, model: DistanceModel) -> float:
    """Linear gain 10^(-k * max(d - d_ref, 0) / 20); never boosts below d_ref."""
    over = max(d_m - model.reference_distance, 0.0)
    return 10.0 ** (-model.attenuation_db_per_m * over / 20.0)


def air_absorption_cutoff(d_m: float, model: DistanceModel) -> float:
    """Lowpass cutoff emulating air absorption: full band up to the far-field
    distance, then halving every 15 m, floored at 1 kHz."""
    if d_m <= model.far_field_distance:
        return AIR_CUTOFF_MAX_HZ
    cutoff = AIR_CUTOFF_MAX_HZ * 2.0 ** (-(d_m - model.far_field_distance) / AIR_HALVING_METRES)
    return max(cutoff, AIR_CUTOFF_MIN_HZ)


def near_field_ild_gains(
    d_m: float, azimuth_rad: float, model: DistanceModel
) -> tuple[float, float]:
    """(left_db, right_db) for the 2 kHz head-shadow shelf.

    Inside the near-field radius the near ear gets a boost and the far ear
    the matching cut, scaled by closeness and lateralness:
    g = max_db * (1 - d/radius) * |sin az|. This shelf model is this
    engine's own; the strength is configurable via the distance model.
    """
    if d_m >= model.near_field_radius:
        return 0.0, 0.0
    u = _lateral_sin(azimuth_rad, 0.0)
    g = model.near_field_max_db * (1.0 - d_m / model.near_field_radius) * abs(u)
    if u > 0:
        return g, -g
    if u < 0:
        return -g, g
    return 0.0, 0.0


class _FractionalDelay:
    """Linear-interpolation fractional delay with per-block history."""

    def __init__(self, max_delay_samples: int):
        self.history = np.zeros(max_delay_samples + 2)

    def process(self, block: np.ndarray, delay_samples: float) -> np.ndarray:
        h = self.history.shape[0]
        d = min(max(delay_samples, 0.0), h - 2.0)
        ext = np.concatenate([self.history, block])
        base = int(math.floor(d))
        frac = d - base
        idx = np.arange(block.shape[0]) + h - base
        out = (1.0 - frac) * ext[idx] + frac * ext[idx - 1]
        self.history = ext[-h:].copy()
        return out

    def reset(self):
        self.history[:] = 0.0


class _OnePoleLowpass:
    def __init__(self):
        self.zi = np.zeros(1)

    def process(self, block: np.ndarray, cutoff_hz: float, fs: int) -> np.ndarray:
        if cutoff_hz >= AIR_CUTOFF_MAX_HZ:
            k = 1.0  # exact bypass
        else:
            k = 1.0 - math.exp(-2.0 * math.pi * cutoff_hz / fs)
        out, self.zi = lfilter([k], [1.0, k - 1.0], block, zi=self.zi)
        return out

    def reset(self):
        self.zi[:] = 0.0


class _ShelfFilter:
    """High-shelf biquad whose gain is retuned per block (identity at 0 dB)."""

    def __init__(self):
        self.zi = np.zeros(2)

    def process(self, block: np.ndarray, gain_db: float, fs: int) -> np.ndarray:
        if gain_db == 0.0:
            b, a = [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]
        else:
            from .effects import biquad_coeffs

            c = biquad_coeffs("highshelf", NEAR_FIELD_SHELF_HZ, 1.0 / math.sqrt(2.0), gain_db, fs)
            b, a = [c["b0"], c["b1"], c["b2"]], [1.0, c["a1"], c["a2"]]
        out, self.zi = lfilter(b, a, block, zi=self.zi)
        return out

    def reset(self):
        self.zi[:] = 0.0


class _FirEar:
    """Per-ear block convolution with enough input history for kernel swaps."""

    def __init__(self, taps: int):
        self.history = np.zeros(max(taps - 1, 0))

    def apply(self, kernel: np.ndarray, block: np.ndarray) -> np.ndarray:
        h = self.history.shape[0]
        full = np.concatenate([self.history, block])
        return fft_convolve(full, kernel)[h : h + block.shape[0]]

    def push(self, block: np.ndarray):
        h = self.history.shape[0]
        if h:
            full = np.concatenate([self.history, block])
            self.history = full[-h:].copy()

    def reset(self):
        self.history[:] = 0.0


class _IirEar:
    """Per-ear biquad-cascade filter (high-performance mode)."""

    def __init__(self, n_sections: int):
        self.zi = np.zeros((n_sections, 2))

    def apply_inplace(self, cascade, block: np.ndarray) -> np.ndarray:
        out = block * 10.0 ** (cascade.gain_db / 20.0)
        for i, s in enumerate(cascade.sections):
            out, self.zi[i] = lfilter(
                [s.b0, s.b1, s.b2], [1.0, s.a1, s.a2], out, zi=self.zi[i]
            )
        return out

    def reset(self):
        self.zi[:] = 0.0


class Spatializer:
    """Single-owner spatialization state for one source.

    One processing thread may call :meth:`process_block`; the HRIR set and
    distance model are immutable and shareable across instances.
    """

    def __init__(
        self,
        hrirs: HrirSet,
        model: DistanceModel,
        head_circumference_m: float = 0.55,
        block_size: int = 128,
        sample_rate: int = 48_000,
        mode: str = "full_hrir",
        iir_bank=None,
    ):
        if mode not in ("full_hrir", "high_performance"):
            raise ValueError(f"unknown spatializer mode {mode!r}")
        if mode == "high_performance" and iir_bank is None:
            from .iirfit import fit_iir_approximation

            iir_bank = fit_iir_approximation(hrirs, order=6)
        self.hrirs = hrirs
        self.model = model
        self.head_circumference = head_circumference_m
        self.block_size = block_size
        self.sample_rate = sample_rate
        self.mode = mode
        self.iir_bank = iir_bank

        max_itd = (head_circumference_m / (2 * math.pi) / SPEED_OF_SOUND) * (math.pi / 2 + 1)
        max_delay = int(math.ceil(max_itd * sample_rate)) + 2
        self._delay = (_FractionalDelay(max_delay), _FractionalDelay(max_delay))
        self._air = (_OnePoleLowpass(), _OnePoleLowpass())
        self._shelf = (_ShelfFilter(), _ShelfFilter())
        if mode == "full_hrir":
            self._fir = (_FirEar(hrirs.length), _FirEar(hrirs.length))
        else:
            n_sec = iir_bank.order // 2
            self._iir = (_IirEar(n_sec), _IirEar(n_sec))
            self._iir_next = (_IirEar(n_sec), _IirEar(n_sec))
        self._prev_index: int | None = None

    def reset(self):
        for pair in (self._delay, self._air, self._shelf):
            for f in pair:
                f.reset()
        if self.mode == "full_hrir":
            for f in self._fir:
                f.reset()
        else:
            for f in self._iir:
                f.reset()
            for f in self._iir_next:
                f.reset()
        self._prev_index = None

    def _ear_kernels(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        return self.hrirs.left[index], self.hrirs.right[index]

    def process_block(
        self, mono_block: np.ndarray, azimuth_rad: float, elevation_rad: float, distance_m: float
    ) -> np.ndarray:
        """Spatialize one block; returns shape (2, block_size) [left, right]."""
        x = np.asarray(mono_block, dtype=np.float64)
        if x.shape[0] != self.block_size:
            raise ValueError(f"expected block of {self.block_size} frames, got {x.shape[0]}")
        fs = self.sample_rate

        x = x * distance_gain(distance_m, self.model)
        cutoff = air_absorption_cutoff(distance_m, self.model)
        delays = itd_delays(self.head_circumference, azimuth_rad, elevation_rad)
        shelves = near_field_ild_gains(distance_m, azimuth_rad, self.model)

        index = select_hrir(self.hrirs, math.degrees(azimuth_rad), math.degrees(elevation_rad))
        prev = self._prev_index if self._prev_index is not None else index
        n = self.block_size
        fade_in = np.arange(1, n + 1) / n

        ears = []
        for ear in (0, 1):
            y = self._delay[ear].process(x, delays[ear] * fs)
            y = self._air[ear].process(y, cutoff, fs)
            if self.mode == "full_hrir":
                fir = self._fir[ear]
                y_new = fir.apply(self._ear_kernels(index)[ear], y)
                if prev != index:
                    y_old = fir.apply(self._ear_kernels(prev)[ear], y)
                    y_new = y_old * (1.0 - fade_in) + y_new * fade_in
                fir.push(y)
            else:
                bank = self.iir_bank
                cascade = (bank.left, bank.right)[ear][index]
                if prev != index:
                    y_old = self._iir[ear].apply_inplace((bank.left, bank.right)[ear][prev], y)
                    fresh = self._iir_next[ear]
                    fresh.reset()
                    y_cur = fresh.apply_inplace(cascade, y)
                    y_new = y_old * (1.0 - fade_in) + y_cur * fade_in
                    self._iir[ear].zi[:] = fresh.zi
                else:
                    y_new = self._iir[ear].apply_inplace(cascade, y)
            y_new = self._shelf[ear].process(y_new, shelves[ear], fs)
            ears.append(y_new)

        self._prev_index = index
        return np.stack(ears)


def synthetic_head_hrirs(
    sample_rate: int = 48_000,
    azimuth_step_deg: int = 5,
    elevations_deg: tuple[float, ...] = (-30.0, 0.0, 30.0),
    length: int = 64,
) -> HrirSet:
    """Analytic spherical-head HRIR set used as the built-in default.

    Each ear's response is a decaying one-pole kernel whose brightness and
    level follow the head-shadow angle; entries at azimuth > 180 degrees
    are exact left/right mirrors of their counterparts, so the set is
    left-right symmetric bit for bit. No interaural delay is baked in
    (the spatializer adds it), keeping the set time-aligned by
    construction.
    """
    azimuths = [float(a) for a in range(0, 360, azimuth_step_deg)]
    grid = [(az, el) for el in elevations_deg for az in azimuths]

    def ear_ir(lateral: float, el_deg: float) -> np.ndarray:
        shadow = (1.0 - lateral) / 2.0  # 0 bright (ipsilateral) .. 1 dark
        el_tilt = 1.0 - 0.15 * math.sin(math.radians(el_deg))
        a = min(max(0.04 + 0.72 * shadow * el_tilt, 0.02), 0.9)
        gain = 10.0 ** ((3.0 - 9.0 * shadow) / 20.0)
        return gain * (1.0 - a) * a ** np.arange(length, dtype=np.float64)

    by_dir: dict[tuple[float, float], tuple[np.ndarray, np.ndarray]] = {}
    for el in elevations_deg:
        for az in azimuths:
            if az <= 180.0:
                # median-plane entries (0 and 180 degrees) must be exactly
                # lateral-free for both ears to coincide bit for bit
                u = 0.0 if az % 180.0 == 0.0 else math.sin(math.radians(az)) * math.cos(math.radians(el))
                by_dir[(az, el)] = (ear_ir(u, el), ear_ir(-u, el))
            else:
                mirror_l, mirror_r = by_dir[(360.0 - az, el)]
                by_dir[(az, el)] = (mirror_r.copy(), mirror_l.copy())

    left = np.stack([by_dir[p][0] for p in grid])
    right = np.stack([by_dir[p][1] for p in grid])
    return HrirSet(sample_rate, grid, left, right, name="synthetic-spherical-head")


def _direction_filename(az: float, el: float) -> str:
    return f"az{az:g}_el{el:g}.wav"


def save_hrir_dir(hrirs: HrirSet, path: str):
    """Write the directory package format: index.json + one stereo WAV per
    direction, named az{A}_el{E}.wav."""
    os.makedirs(path, exist_ok=True)
    index = {
        "name": hrirs.name,
        "sample_rate": hrirs.sample_rate,
        "length": hrirs.length,
        "grid": [{"azimuth_deg": az, "elevation_deg": el} for az, el in hrirs.grid],
    }
    with open(os.path.join(path, "index.json"), "w", encoding="utf-8") as f:
        json.dump(index, f, indent=2)
    for i, (az, el) in enumerate(hrirs.grid):
        pair = AudioBuffer(np.stack([hrirs.left[i], hrirs.right[i]]), hrirs.sample_rate)
        with open(os.path.join(path, _direction_filename(az, el)), "wb") as f:
            f.write(encode_wav(pair, depth="float32"))


def load_hrir_dir(path: str) -> HrirSet:
    index_path = os.path.join(path, "index.json")
    try:
        with open(index_path, encoding="utf-8") as f:
            index = json.load(f)
    except FileNotFoundError:
        raise HrirError(f"no index.json in {path!r}")
    grid = [(float(p["azimuth_deg"]), float(p["elevation_deg"])) for p in index["grid"]]
    length = int(index["length"])
    rate = int(index["sample_rate"])
    left = np.zeros((len(grid), length))
    right = np.zeros((len(grid), length))
    for i, (az, el) in enumerate(grid):
        fname = os.path.join(path, _direction_filename(az, el))
        with open(fname, "rb") as f:
            buf = decode_wav(f.read())
        if buf.channels != 2 or buf.frames != length or buf.sample_rate != rate:
            raise HrirError(f"{fname}: expected stereo, {length} taps at {rate} Hz")
        left[i] = buf.data[0]
        right[i] = buf.data[1]
    return HrirSet(rate, grid, left, right, name=index.get("name", os.path.basename(path)))
