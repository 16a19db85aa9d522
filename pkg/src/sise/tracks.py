"""Articulatory track data: 10 named channels sampled at a fixed frame rate.

Channel order is fixed: six oral constriction channels (LA, LP, TBCL, TBCD,
TTCL, TTCD), the velopharyngeal channel (VEL), then the source channels
(Per, Aper, F0).

File formats, selected by extension:
  .csv  -- delimited text, header row with channel names, one frame per row
  .f32  -- raw little-endian float32, row-major (frames x 10), no header
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

CHANNELS = ("LA", "LP", "TBCL", "TBCD", "TTCL", "TTCD", "VEL", "Per", "Aper", "F0")
N_CHANNELS = len(CHANNELS)
TRACK_RATE = 50  # frames per second, matching the backbone feature stride

ORAL_CHANNELS = CHANNELS[:6]          # task-A targets
SOURCE_CHANNELS = CHANNELS[6:]        # task-B targets: VEL + three source features


@dataclass(frozen=True)
class ArticulatoryTrack:
    """Frames x 10 channel matrix at TRACK_RATE frames per second."""

    channels: np.ndarray
    frame_rate: int = TRACK_RATE

    def __post_init__(self):
        channels = np.asarray(self.channels, dtype=np.float64)
        if channels.ndim != 2 or channels.shape[1] != N_CHANNELS:
            raise InvalidInput(f"track must be (frames, {N_CHANNELS}), got {channels.shape}")
        if channels.size and not np.all(np.isfinite(channels)):
            raise InvalidInput("track contains non-finite values")
        object.__setattr__(self, "channels", channels)

    @property
    def n_frames(self) -> int:
        return self.channels.shape[0]

    def channel(self, name: str) -> np.ndarray:
        return self.channels[:, CHANNELS.index(name)]

    def trimmed(self, n_frames: int) -> "ArticulatoryTrack":
        return ArticulatoryTrack(self.channels[:n_frames], self.frame_rate)


def resample_track(track: ArticulatoryTrack, target_rate: int = TRACK_RATE) -> ArticulatoryTrack:
    """Linear resampling of each channel to a new frame rate."""
    if track.frame_rate == target_rate:
        return track
    n_out = max(2, round(track.n_frames * target_rate / track.frame_rate))
    src_t = np.arange(track.n_frames) / track.frame_rate
    dst_t = np.arange(n_out) / target_rate
    out = np.stack([np.interp(dst_t, src_t, track.channels[:, c]) for c in range(N_CHANNELS)], axis=1)
    return ArticulatoryTrack(out, target_rate)


def write_track(path: str | os.PathLike, track: ArticulatoryTrack) -> None:
    path = str(path)
    if path.endswith(".csv"):
        header = ",".join(CHANNELS)
        np.savetxt(path, track.channels, delimiter=",", header=header, comments="", fmt="%.9g")
    elif path.endswith(".f32"):
        track.channels.astype("<f4").tofile(path)
    else:
        raise InvalidInput(f"unsupported track extension for {path}; use .csv or .f32")


def read_track(path: str | os.PathLike, frame_rate: int = TRACK_RATE) -> ArticulatoryTrack:
    path = str(path)
    if path.endswith(".csv"):
        with open(path, "r", encoding="utf-8") as f:
            header = f.readline().strip().split(",")
            if tuple(header) != CHANNELS:
                raise InvalidInput(f"{path}: unexpected track header {header}")
            data = np.loadtxt(f, delimiter=",", ndmin=2)
    elif path.endswith(".f32"):
        raw = np.fromfile(path, dtype="<f4")
        if raw.size % N_CHANNELS != 0:
            raise InvalidInput(f"{path}: size {raw.size} is not a multiple of {N_CHANNELS}")
        data = raw.reshape(-1, N_CHANNELS).astype(np.float64)
    else:
        raise InvalidInput(f"unsupported track extension for {path}; use .csv or .f32")
    return ArticulatoryTrack(data, frame_rate)
