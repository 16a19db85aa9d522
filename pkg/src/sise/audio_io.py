"""RIFF WAVE file I/O: mono, 16-bit PCM or 32-bit float."""

from __future__ import annotations

import os

import numpy as np
from scipy.io import wavfile

from .dsp import SAMPLE_RATE, Waveform, resample
from .errors import InvalidInput


def read_wav(path: str | os.PathLike) -> Waveform:
    """Read a mono wav file. Integer PCM is scaled to [-1, 1)."""
    rate, data = wavfile.read(path)
    if data.ndim != 1:
        raise InvalidInput(f"{path}: expected mono audio, got {data.ndim} channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float64)
    else:
        raise InvalidInput(f"{path}: unsupported sample format {data.dtype}")
    return Waveform(samples, int(rate))


def read_wav_16k(path: str | os.PathLike) -> Waveform:
    """Read and normalize to the pipeline-internal 16 kHz rate."""
    wave = read_wav(path)
    if wave.sample_rate != SAMPLE_RATE:
        wave = resample(wave, SAMPLE_RATE)
    return wave


def write_wav(path: str | os.PathLike, wave: Waveform, fmt: str = "float32") -> None:
    """Write a mono wav file as 32-bit float (default) or 16-bit PCM."""
    if fmt == "float32":
        wavfile.write(path, wave.sample_rate, wave.samples.astype(np.float32))
    elif fmt == "int16":
        clipped = np.clip(wave.samples, -1.0, 1.0 - 1.0 / 32768.0)
        wavfile.write(path, wave.sample_rate, np.round(clipped * 32768.0).astype(np.int16))
    else:
        raise InvalidInput(f"unsupported wav format {fmt!r}; use 'float32' or 'int16'")
