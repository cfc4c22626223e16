"""Log-mel filterbank front end.

Pipeline: pre-emphasis -> framed Hamming-window power spectrum -> 64
triangular mel filters -> natural log -> per-bin instance normalization.

Conventions (fixed, since several are underdetermined by common usage):
  * pre-emphasis uses a replicate-padded boundary, y[0] = (1 - c) * x[0];
  * STFT frames are centered with reflect padding of fft_size // 2;
  * the Hamming window is symmetric, 0.54 - 0.46 cos(2 pi n / (N - 1)),
    zero-padded to fft_size and centered within the frame;
  * the spectrum is power (|X|^2);
  * the mel scale is m = 2595 log10(1 + f / 700) over 0..8000 Hz.

Frame count is L = 1 + floor(T / hop) for a T-sample input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .audio import SAMPLE_RATE, Waveform


@dataclass(frozen=True)
class FeatureParams:
    preemphasis: float = 0.97
    win_ms: float = 25.0
    hop_ms: float = 10.0
    fft_size: int = 512
    n_mels: int = 64
    log_floor: float = 1e-6
    norm_eps: float = 1e-5

    def __post_init__(self):
        if not 0.0 <= self.preemphasis < 1.0:
            raise ValueError("preemphasis must be in [0, 1)")
        if self.fft_size < self.win_length:
            raise ValueError("fft_size must be >= window length in samples")
        if self.n_mels < 1:
            raise ValueError("n_mels must be >= 1")

    @property
    def win_length(self) -> int:
        return int(round(SAMPLE_RATE * self.win_ms / 1000.0))

    @property
    def hop_length(self) -> int:
        return int(round(SAMPLE_RATE * self.hop_ms / 1000.0))


@dataclass(frozen=True)
class FeatureMap:
    """L x n_mels matrix of log-mel values (time-major)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"feature map must be 2-D, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature map contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_mels(self) -> int:
        return self.values.shape[1]


def preemphasize(w: Waveform, coeff: float = 0.97) -> Waveform:
    """First-order high-pass: y[t] = x[t] - coeff * x[t-1], replicate-padded."""
    if not 0.0 <= coeff < 1.0:
        raise ValueError("pre-emphasis coefficient must be in [0, 1)")
    x = w.samples
    y = np.empty_like(x)
    y[0] = (1.0 - coeff) * x[0]
    y[1:] = x[1:] - coeff * x[:-1]
    return Waveform(y)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(
    n_mels: int = 64,
    fft_size: int = 512,
    sample_rate: int = SAMPLE_RATE,
    f_min: float = 0.0,
    f_max: float = 8000.0,
) -> np.ndarray:
    """Triangular mel filters evaluated at FFT bin frequencies.

    Returns an (n_mels, fft_size // 2 + 1) matrix. Filter k rises from edge
    frequency k to a peak of 1 at edge k+1 and falls back to zero at edge
    k+2, where the edges are n_mels + 2 points equally spaced on the mel
    scale between f_min and f_max. Rows are not area-normalized.
    """
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    bin_hz = np.arange(fft_size // 2 + 1) * (sample_rate / fft_size)
    lo = edges_hz[:-2, None]
    mid = edges_hz[1:-1, None]
    hi = edges_hz[2:, None]
    rising = (bin_hz[None, :] - lo) / (mid - lo)
    falling = (hi - bin_hz[None, :]) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling))


def mel_center_frequencies(n_mels: int = 64, f_min: float = 0.0, f_max: float = 8000.0) -> np.ndarray:
    """Peak frequency in Hz of each triangular mel filter."""
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    return edges_hz[1:-1]


def log_mel_spectrogram(w: Waveform, p: FeatureParams = FeatureParams()) -> FeatureMap:
    """Compute the L x n_mels log-mel energy matrix of a waveform.

    L = 1 + floor(T / hop). Requires at least one hop of input.
    """
    x = w.samples
    if x.size < p.hop_length:
        raise ValueError(f"waveform too short: {x.size} samples < one hop ({p.hop_length})")

    window = np.zeros(p.fft_size)
    pad_left = (p.fft_size - p.win_length) // 2
    window[pad_left : pad_left + p.win_length] = np.hamming(p.win_length)

    padded = np.pad(x, p.fft_size // 2, mode="reflect")
    frames = sliding_window_view(padded, p.fft_size)[:: p.hop_length]
    spectrum = np.abs(np.fft.rfft(frames * window, n=p.fft_size, axis=1)) ** 2

    fb = mel_filterbank(p.n_mels, p.fft_size)
    energies = spectrum @ fb.T
    return FeatureMap(np.log(energies + p.log_floor))


def instance_normalize(f: FeatureMap, eps: float = 1e-5) -> FeatureMap:
    """Standardize each mel bin over time: (x - mean) / sqrt(var + eps).

    No learned affine. Requires at least two frames (variance over time is
    undefined otherwise). A constant bin maps to zeros via the eps floor.
    """
    if f.n_frames < 2:
        raise ValueError("instance normalization needs at least 2 frames")
    mean = f.values.mean(axis=0)
    var = f.values.var(axis=0)
    return FeatureMap((f.values - mean) / np.sqrt(var + eps))


def extract_features(w: Waveform, p: FeatureParams = FeatureParams()) -> FeatureMap:
    """Full front end: pre-emphasis, log-mel spectrogram, instance norm."""
    emphasized = preemphasize(w, p.preemphasis)
    return instance_normalize(log_mel_spectrogram(emphasized, p), p.norm_eps)
