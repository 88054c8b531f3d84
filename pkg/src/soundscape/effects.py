"""Offline effect rack: biquad filters, dynamics compressor, convolution,
gain and fades, applied in order to an AudioBuffer.

Biquad coefficients follow the Audio-EQ-Cookbook definitions (the de facto
contract of browser audio filter nodes), a0-normalized. Filtering runs in
direct-form-II-transposed per channel. The compressor is feed-forward with
a peak detector, one-pole attack/release smoothing and a soft knee, its
static gain computed in the dB domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.signal import lfilter

from .audio import AudioBuffer
from .convolve import fft_convolve

BIQUAD_KINDS = ("lowpass", "highpass", "bandpass", "lowshelf", "highshelf", "peaking", "notch")
EFFECT_KINDS = BIQUAD_KINDS + ("compressor", "convolver", "gain", "fade_in", "fade_out")

MAX_IMPULSE_SECONDS = 10.0


class EffectError(Exception):
    pass


class EffectParameterError(EffectError):
    pass


class EffectChainError(EffectError):
    def __init__(self, index: int, kind: str, cause: Exception):
        super().__init__(f"effect {index} ({kind}): {cause}")
        self.index = index


@dataclass
class EffectSpec:
    kind: str
    fc: float = 1000.0
    q: float = 1.0 / math.sqrt(2.0)
    gain_db: float = 0.0
    threshold_db: float = -24.0
    ratio: float = 12.0
    attack_s: float = 0.003
    release_s: float = 0.25
    knee_db: float = 30.0
    impulse: Optional[AudioBuffer] = None
    duration_s: float = 0.0
    extra: dict = field(default_factory=dict)

    def validate(self, sample_rate: int):
        if self.kind not in EFFECT_KINDS:
            raise EffectParameterError(f"unknown effect kind {self.kind!r}")
        if self.kind in BIQUAD_KINDS:
            if not (0.0 < self.fc < sample_rate / 2.0):
                raise EffectParameterError(
                    f"fc must be in (0, {sample_rate / 2:g}) Hz, got {self.fc!r}"
                )
            if self.q <= 0:
                raise EffectParameterError(f"q must be > 0, got {self.q!r}")
        if self.kind == "compressor":
            if self.ratio < 1:
                raise EffectParameterError(f"ratio must be >= 1, got {self.ratio!r}")
            if self.attack_s < 0 or self.release_s < 0:
                raise EffectParameterError("attack and release must be >= 0")
            if self.knee_db < 0:
                raise EffectParameterError("knee must be >= 0")
        if self.kind == "convolver":
            if self.impulse is None:
                raise EffectParameterError("convolver requires an impulse buffer")
            if self.impulse.duration > MAX_IMPULSE_SECONDS:
                raise EffectError(
                    f"impulse of {self.impulse.duration:.2f} s exceeds the "
                    f"{MAX_IMPULSE_SECONDS:g} s limit"
                )
        if self.kind in ("fade_in", "fade_out") and self.duration_s < 0:
            raise EffectParameterError("fade duration must be >= 0")


def biquad_coeffs(kind: str, fc: float, q: float, gain_db: float, fs: float) -> dict:
    """Audio-EQ-Cookbook biquad, returned a0-normalized as {b0,b1,b2,a1,a2}."""
    if not (0.0 < fc < fs / 2.0):
        raise EffectParameterError(f"fc must be in (0, {fs / 2:g}) Hz, got {fc!r}")
    if q <= 0:
        raise EffectParameterError(f"q must be > 0, got {q!r}")

    w0 = 2.0 * math.pi * fc / fs
    cw, sw = math.cos(w0), math.sin(w0)
    alpha = sw / (2.0 * q)
    a = 10.0 ** (gain_db / 40.0)

    if kind == "lowpass":
        b0, b1, b2 = (1 - cw) / 2, 1 - cw, (1 - cw) / 2
        a0, a1, a2 = 1 + alpha, -2 * cw, 1 - alpha
    elif kind == "highpass":
        b0, b1, b2 = (1 + cw) / 2, -(1 + cw), (1 + cw) / 2
        a0, a1, a2 = 1 + alpha, -2 * cw, 1 - alpha
    elif kind == "bandpass":  # constant 0 dB peak gain
        b0, b1, b2 = alpha, 0.0, -alpha
        a0, a1, a2 = 1 + alpha, -2 * cw, 1 - alpha
    elif kind == "notch":
        b0, b1, b2 = 1.0, -2 * cw, 1.0
        a0, a1, a2 = 1 + alpha, -2 * cw, 1 - alpha
    elif kind == "peaking":
        b0, b1, b2 = 1 + alpha * a, -2 * cw, 1 - alpha * a
        a0, a1, a2 = 1 + alpha / a, -2 * cw, 1 - alpha / a
    elif kind == "lowshelf":
        sq = 2.0 * math.sqrt(a) * alpha
        b0 = a * ((a + 1) - (a - 1) * cw + sq)
        b1 = 2 * a * ((a - 1) - (a + 1) * cw)
        b2 = a * ((a + 1) - (a - 1) * cw - sq)
        a0 = (a + 1) + (a - 1) * cw + sq
        a1 = -2 * ((a - 1) + (a + 1) * cw)
        a2 = (a + 1) + (a - 1) * cw - sq
    elif kind == "highshelf":
        sq = 2.0 * math.sqrt(a) * alpha
        b0 = a * ((a + 1) + (a - 1) * cw + sq)
        b1 = -2 * a * ((a - 1) + (a + 1) * cw)
        b2 = a * ((a + 1) + (a - 1) * cw - sq)
        a0 = (a + 1) - (a - 1) * cw + sq
        a1 = 2 * ((a - 1) - (a + 1) * cw)
        a2 = (a + 1) - (a - 1) * cw - sq
    else:
        raise EffectParameterError(f"not a biquad kind: {kind!r}")

    return {"b0": b0 / a0, "b1": b1 / a0, "b2": b2 / a0, "a1": a1 / a0, "a2": a2 / a0}


def biquad_response(coeffs: dict, freq_hz: float, fs: float) -> complex:
    """Transfer function H(e^{j w}) of an a0-normalized biquad."""
    z = np.exp(-1j * 2.0 * math.pi * freq_hz / fs)
    num = coeffs["b0"] + coeffs["b1"] * z + coeffs["b2"] * z * z
    den = 1.0 + coeffs["a1"] * z + coeffs["a2"] * z * z
    return num / den


def _apply_biquad(data: np.ndarray, coeffs: dict) -> np.ndarray:
    b = [coeffs["b0"], coeffs["b1"], coeffs["b2"]]
    a = [1.0, coeffs["a1"], coeffs["a2"]]
    return lfilter(b, a, data, axis=1)


def _smoothing_alpha(time_s: float, fs: int) -> float:
    """One-pole coefficient reaching 1-1/e of a step in time_s."""
    if time_s <= 0:
        return 0.0
    return math.exp(-1.0 / (time_s * fs))


def compressor_static_gain_db(level_db: float, threshold_db: float, ratio: float, knee_db: float) -> float:
    """Gain (dB, <= 0) of the soft-knee static curve at the given input level."""
    over = level_db - threshold_db
    if knee_db > 0 and 2.0 * abs(over) <= knee_db:
        return (1.0 / ratio - 1.0) * (over + knee_db / 2.0) ** 2 / (2.0 * knee_db)
    if over > 0:
        return (1.0 / ratio - 1.0) * over
    return 0.0


def _compress(buf: AudioBuffer, spec: EffectSpec) -> np.ndarray:
    a_att = _smoothing_alpha(spec.attack_s, buf.sample_rate)
    a_rel = _smoothing_alpha(spec.release_s, buf.sample_rate)
    peak = np.max(np.abs(buf.data), axis=0)  # channel-linked detector
    env = 0.0
    floor_db = -120.0
    gains = np.empty(buf.frames)
    for n in range(buf.frames):
        x = peak[n]
        alpha = a_att if x > env else a_rel
        env = alpha * env + (1.0 - alpha) * x
        level_db = 20.0 * math.log10(env) if env > 1e-6 else floor_db
        gains[n] = 10.0 ** (
            compressor_static_gain_db(level_db, spec.threshold_db, spec.ratio, spec.knee_db) / 20.0
        )
    return buf.data * gains[None, :]


def process_effect(buf: AudioBuffer, spec: EffectSpec) -> AudioBuffer:
    """Apply one effect; returns a new buffer (input untouched)."""
    spec.validate(buf.sample_rate)
    fs = buf.sample_rate

    if spec.kind in BIQUAD_KINDS:
        coeffs = biquad_coeffs(spec.kind, spec.fc, spec.q, spec.gain_db, fs)
        return AudioBuffer(_apply_biquad(buf.data, coeffs), fs)

    if spec.kind == "gain":
        return AudioBuffer(buf.data * 10.0 ** (spec.gain_db / 20.0), fs)

    if spec.kind == "compressor":
        return AudioBuffer(_compress(buf, spec), fs)

    if spec.kind == "convolver":
        impulse = spec.impulse
        if impulse.sample_rate != fs:
            raise EffectParameterError(
                f"impulse sample rate {impulse.sample_rate} does not match signal rate {fs}"
            )
        ir = impulse.data.mean(axis=0) if impulse.channels > 1 else impulse.data[0]
        out = np.stack([fft_convolve(ch, ir) for ch in buf.data])
        return AudioBuffer(out, fs)

    if spec.kind in ("fade_in", "fade_out"):
        n = min(buf.frames, int(round(spec.duration_s * fs)))
        out = buf.data.copy()
        if n > 0:
            ramp = np.linspace(0.0, 1.0, n, endpoint=False)
            if spec.kind == "fade_in":
                out[:, :n] *= ramp
            else:
                out[:, buf.frames - n :] *= ramp[::-1]
        return AudioBuffer(out, fs)

    raise EffectParameterError(f"unknown effect kind {spec.kind!r}")


def render_chain(buf: AudioBuffer, specs: list[EffectSpec]) -> AudioBuffer:
    """Left-fold the effect list over the buffer, in order."""
    out = buf
    for i, spec in enumerate(specs):
        try:
            out = process_effect(out, spec)
        except EffectError as e:
            raise EffectChainError(i, spec.kind, e)
    return out


def effect_from_dict(d: dict, base_dir: str | None = None) -> EffectSpec:
    """Build an EffectSpec from its JSON form (the CLI `sample` document).

    A convolver impulse arrives either as {"impulse_file": path} (relative
    to base_dir) or {"impulse_data": base64 WAV bytes}.
    """
    import base64
    import os

    from .audio import decode_wav

    if not isinstance(d, dict) or "kind" not in d:
        raise EffectParameterError(f"effect entry must be an object with a 'kind': {d!r}")
    known = {
        "fc", "q", "gain_db", "threshold_db", "ratio", "attack_s",
        "release_s", "knee_db", "duration_s",
    }
    kwargs = {k: float(v) for k, v in d.items() if k in known}
    impulse = None
    if "impulse_file" in d:
        path = d["impulse_file"]
        if base_dir is not None and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        with open(path, "rb") as f:
            impulse = decode_wav(f.read())
    elif "impulse_data" in d:
        impulse = decode_wav(base64.b64decode(d["impulse_data"]))
    extra = {
        k: v
        for k, v in d.items()
        if k not in known and k not in ("kind", "impulse_file", "impulse_data")
    }
    return EffectSpec(kind=d["kind"], impulse=impulse, extra=extra, **kwargs)
