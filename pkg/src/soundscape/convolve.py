"""Fast convolution primitives.

``fft_convolve`` is an overlap-add FFT convolution used wherever a full
linear convolution is needed (effect racks, impulse-response application,
offline references). ``BlockConvolver`` is its streaming counterpart: it
filters fixed-size blocks against a FIR while carrying enough input
history across calls that the concatenated block outputs equal one long
convolution.
"""

from __future__ import annotations

import numpy as np


def fft_convolve(x: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Full linear convolution of two 1-D arrays via overlap-add FFT.

    Output length is len(x) + len(h) - 1, matching direct time-domain
    convolution to float64 rounding.
    """
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    n, m = x.shape[0], h.shape[0]
    if n == 0 or m == 0:
        return np.zeros(max(n + m - 1, 0))
    if m > n:
        x, h = h, x
        n, m = m, n

    out_len = n + m - 1
    # segment length: power of two giving segments at least as long as h
    fft_len = 1
    while fft_len < 4 * m:
        fft_len *= 2
    seg = fft_len - (m - 1)
    hf = np.fft.rfft(h, fft_len)

    out = np.zeros(out_len)
    for start in range(0, n, seg):
        piece = x[start : start + seg]
        y = np.fft.irfft(np.fft.rfft(piece, fft_len) * hf, fft_len)
        stop = min(start + piece.shape[0] + m - 1, out_len)
        out[start:stop] += y[: stop - start]
    return out


class BlockConvolver:
    """Streaming FIR convolution over fixed-size blocks.

    Keeps the last len(h)-1 input samples so each block is filtered in
    steady state; feeding the same FIR a signal block-by-block produces
    the same samples as filtering it whole. The kernel may be swapped
    between blocks (the caller is responsible for crossfading).
    """

    def __init__(self, kernel: np.ndarray, block_size: int):
        self.kernel = np.asarray(kernel, dtype=np.float64)
        self.block_size = block_size
        self.history = np.zeros(max(self.kernel.shape[0] - 1, 0))

    def process(self, block: np.ndarray, kernel: np.ndarray | None = None) -> np.ndarray:
        """Filter one block; ``kernel`` overrides the stored FIR for this call.

        An override kernel must have the same length as the one the state
        was built for.
        """
        h = self.kernel if kernel is None else np.asarray(kernel, dtype=np.float64)
        block = np.asarray(block, dtype=np.float64)
        hist_len = self.history.shape[0]
        full = np.concatenate([self.history, block])
        y = fft_convolve(full, h)[hist_len : hist_len + block.shape[0]]
        if hist_len:
            self.history = full[-hist_len:].copy()
        return y

    def reset(self):
        self.history[:] = 0.0
