"""Deterministic DSP kernel: STFT/ISTFT, magnitude compression, SNR arithmetic, resampling.

All functions are pure and operate on float64 internally. The synthesis path is a
least-squares inverse (window-weighted overlap-add with window-square normalization),
so ``istft(stft(x))`` reconstructs interior samples to machine precision for any
geometry satisfying the NOLA condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import get_window, resample_poly

from .errors import DegenerateInput, InvalidGeometry, InvalidInput

SAMPLE_RATE = 16000

# Default analysis geometry: 25 ms window, 10 ms hop at 16 kHz, 201 frequency bins.
DEFAULT_FFT_SIZE = 400
DEFAULT_HOP = 160
DEFAULT_WINDOW = "hann"

_NOLA_TINY = 1e-11


@dataclass(frozen=True)
class Waveform:
    """Mono audio samples at a fixed rate. Values are finite floats, nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidInput(f"waveform must be 1-D, got shape {samples.shape}")
        if samples.size and not np.all(np.isfinite(samples)):
            raise InvalidInput("waveform contains non-finite values")
        if self.sample_rate <= 0:
            raise InvalidInput(f"sample rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate

    def energy(self) -> float:
        return float(np.sum(self.samples**2))

    def rms(self) -> float:
        return float(np.sqrt(np.mean(self.samples**2))) if len(self) else 0.0


@dataclass(frozen=True)
class SpectrogramGeometry:
    """Analysis geometry; window length equals fft_size and framing is centered."""

    fft_size: int = DEFAULT_FFT_SIZE
    hop: int = DEFAULT_HOP
    window: str = DEFAULT_WINDOW

    def __post_init__(self):
        if self.fft_size <= 0 or self.fft_size % 2 != 0:
            raise InvalidGeometry(f"fft_size must be positive and even, got {self.fft_size}")
        if self.hop <= 0:
            raise InvalidGeometry(f"hop must be positive, got {self.hop}")

    @property
    def bins(self) -> int:
        return self.fft_size // 2 + 1

    def window_array(self) -> np.ndarray:
        # Periodic (DFT-even) window, as used for spectral analysis.
        return get_window(self.window, self.fft_size, fftbins=True).astype(np.float64)

    def ola_window_square(self, n_frames: int) -> np.ndarray:
        """Overlap-added squared window over an n_frames-long synthesis buffer."""
        w2 = self.window_array() ** 2
        out = np.zeros((n_frames - 1) * self.hop + self.fft_size)
        for t in range(n_frames):
            out[t * self.hop : t * self.hop + self.fft_size] += w2
        return out

    def check_nola(self) -> None:
        """Raise InvalidGeometry unless the window-square overlap-add is strictly positive."""
        # Steady state is reached once fft_size/hop frames overlap; probe the middle.
        n_probe = 3 * max(1, math.ceil(self.fft_size / self.hop)) + 3
        ola = self.ola_window_square(n_probe)
        core = ola[self.fft_size : -self.fft_size] if len(ola) > 2 * self.fft_size else ola
        if core.size == 0 or np.min(core) <= _NOLA_TINY:
            raise InvalidGeometry(
                f"NOLA violated for window={self.window!r} fft_size={self.fft_size} hop={self.hop}"
            )

    def n_frames(self, n_samples: int) -> int:
        return n_samples // self.hop + 1


@dataclass(frozen=True)
class ComplexSpectrogram:
    """Complex STFT values, frames x bins."""

    values: np.ndarray
    geometry: SpectrogramGeometry

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.complex128)
        if values.ndim != 2 or values.shape[1] != self.geometry.bins:
            raise InvalidInput(
                f"spectrogram must be (frames, {self.geometry.bins}), got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidInput("spectrogram contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)

    def phase(self) -> np.ndarray:
        return np.angle(self.values)


@dataclass(frozen=True)
class CompressedMagnitude:
    """log1p-compressed magnitude, frames x bins, all values >= 0."""

    values: np.ndarray
    geometry: SpectrogramGeometry = field(default_factory=SpectrogramGeometry)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise InvalidInput(f"compressed magnitude must be 2-D, got shape {values.shape}")
        if values.size and np.min(values) < 0:
            raise InvalidInput("compressed magnitude must be non-negative")
        object.__setattr__(self, "values", values)


def stft(wave: Waveform, geometry: SpectrogramGeometry | None = None) -> ComplexSpectrogram:
    """Centered STFT with reflection padding.

    Frame count is ``len(wave) // hop + 1``; frame t covers samples around t*hop.
    """
    geometry = geometry or SpectrogramGeometry()
    x = wave.samples
    if x.size == 0:
        raise InvalidInput("cannot take STFT of an empty waveform")
    pad = geometry.fft_size // 2
    if x.size <= pad:
        raise InvalidInput(
            f"waveform too short for reflection padding: {x.size} <= {pad} samples"
        )
    xp = np.pad(x, (pad, pad), mode="reflect")
    n_frames = geometry.n_frames(x.size)
    window = geometry.window_array()
    idx = np.arange(geometry.fft_size)[None, :] + geometry.hop * np.arange(n_frames)[:, None]
    frames = xp[idx] * window
    return ComplexSpectrogram(np.fft.rfft(frames, axis=1), geometry)


def istft(spec: ComplexSpectrogram, length: int | None = None,
          sample_rate: int = SAMPLE_RATE) -> Waveform:
    """Least-squares inverse STFT (window-weighted OLA, window-square normalized).

    ``length`` trims/limits the output; by default the maximal reconstructible
    length ``(n_frames - 1) * hop`` is returned.
    """
    geometry = spec.geometry
    geometry.check_nola()
    window = geometry.window_array()
    frames = np.fft.irfft(spec.values, n=geometry.fft_size, axis=1) * window

    pad = geometry.fft_size // 2
    buf_len = (spec.n_frames - 1) * geometry.hop + geometry.fft_size
    out = np.zeros(buf_len)
    wsum = np.zeros(buf_len)
    w2 = window**2
    for t in range(spec.n_frames):
        start = t * geometry.hop
        out[start : start + geometry.fft_size] += frames[t]
        wsum[start : start + geometry.fft_size] += w2
    nonzero = wsum > _NOLA_TINY
    out[nonzero] /= wsum[nonzero]

    if length is None:
        length = (spec.n_frames - 1) * geometry.hop
    if length > buf_len - pad:
        raise InvalidInput(f"requested length {length} exceeds reconstructible {buf_len - pad}")
    return Waveform(out[pad : pad + length], sample_rate)


def compress(mag: np.ndarray, geometry: SpectrogramGeometry | None = None) -> CompressedMagnitude:
    """log1p compression of a non-negative magnitude matrix."""
    mag = np.asarray(mag, dtype=np.float64)
    if mag.size and np.min(mag) < 0:
        raise InvalidInput("magnitude must be non-negative")
    return CompressedMagnitude(np.log1p(mag), geometry or SpectrogramGeometry())


def decompress(cm: CompressedMagnitude | np.ndarray) -> np.ndarray:
    """Inverse of compress: expm1, clipped at zero."""
    values = cm.values if isinstance(cm, CompressedMagnitude) else np.asarray(cm, dtype=np.float64)
    if values.size and np.min(values) < 0:
        raise InvalidInput("compressed magnitude must be non-negative")
    return np.maximum(np.expm1(values), 0.0)


def measure_snr(clean: Waveform, noise: Waveform) -> float:
    """Signal-to-noise ratio in dB: 10*log10(sum(clean^2) / sum(noise^2))."""
    if len(clean) != len(noise):
        raise InvalidInput(f"length mismatch: clean {len(clean)} vs noise {len(noise)}")
    clean_energy = clean.energy()
    noise_energy = noise.energy()
    if noise_energy <= 0.0:
        raise DegenerateInput("noise has zero energy")
    if clean_energy <= 0.0:
        raise DegenerateInput("clean signal has zero energy")
    return 10.0 * math.log10(clean_energy / noise_energy)


def snr_scale(clean: Waveform, noise: Waveform, target_snr_db: float) -> float:
    """Scale s such that measure_snr(clean, s*noise) == target_snr_db."""
    current = measure_snr(clean, noise)
    return 10.0 ** ((current - target_snr_db) / 20.0)


def resample(wave: Waveform, target_rate: int) -> Waveform:
    """Band-limited polyphase resampling; output length is round(len * target/source)."""
    if target_rate <= 0:
        raise InvalidInput(f"target rate must be positive, got {target_rate}")
    if target_rate == wave.sample_rate:
        return wave
    g = math.gcd(target_rate, wave.sample_rate)
    up, down = target_rate // g, wave.sample_rate // g
    out = resample_poly(wave.samples, up, down)
    n_target = round(len(wave) * target_rate / wave.sample_rate)
    if len(out) < n_target:
        out = np.pad(out, (0, n_target - len(out)))
    return Waveform(out[:n_target], target_rate)
