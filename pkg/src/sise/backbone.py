"""Feature providers: per-layer hidden-state stacks at a 20 ms stride.

Two providers satisfy the same interface: a deterministic toy backbone built
from log mel-filterbank frames and fixed seeded projections, and a thin
adapter for an external pretrained encoder (25 layers). Heads consume the
stack through a softmax-weighted layer sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .dsp import SAMPLE_RATE, Waveform
from .errors import InvalidInput

FEATURE_STRIDE_S = 0.02
FEATURE_HOP = 320   # 20 ms at 16 kHz
FEATURE_WIN = 400   # 25 ms analysis window for the toy filterbank

TOY_N_LAYERS = 4
TOY_N_MELS = 40
TOY_DIM = 32
TOY_PROJECTION_SEED = 314159


@dataclass(frozen=True)
class FeatureStack:
    """Per-layer features, (n_layers, frames, dim), at FEATURE_STRIDE_S stride."""

    layers: np.ndarray
    frame_stride_s: float = FEATURE_STRIDE_S

    def __post_init__(self):
        layers = np.asarray(self.layers, dtype=np.float64)
        if layers.ndim != 3:
            raise InvalidInput(f"feature stack must be 3-D, got shape {layers.shape}")
        object.__setattr__(self, "layers", layers)

    @property
    def n_layers(self) -> int:
        return self.layers.shape[0]

    @property
    def n_frames(self) -> int:
        return self.layers.shape[1]

    @property
    def dim(self) -> int:
        return self.layers.shape[2]


@dataclass(frozen=True)
class LayerWeights:
    """Learnable layer-mixing logits; effective weights are their softmax."""

    logits: np.ndarray

    def __post_init__(self):
        logits = np.asarray(self.logits, dtype=np.float64)
        if logits.ndim != 1:
            raise InvalidInput("layer logits must be a vector")
        object.__setattr__(self, "logits", logits)

    @property
    def weights(self) -> np.ndarray:
        z = self.logits - np.max(self.logits)
        e = np.exp(z)
        return e / np.sum(e)


def weighted_sum(stack: FeatureStack, w: LayerWeights) -> np.ndarray:
    """Softmax-weighted sum over layers -> (frames, dim)."""
    if len(w.logits) != stack.n_layers:
        raise InvalidInput(f"{len(w.logits)} logits for {stack.n_layers} layers")
    return np.tensordot(w.weights, stack.layers, axes=(0, 0))


def mel_filterbank(n_mels: int = TOY_N_MELS, fft_size: int = FEATURE_WIN,
                   sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Triangular mel filter matrix, (fft_size//2 + 1, n_mels)."""
    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    n_bins = fft_size // 2 + 1
    bin_hz = np.arange(n_bins) * sample_rate / fft_size
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2), n_mels + 2))
    fb = np.zeros((n_bins, n_mels))
    for m in range(n_mels):
        lo, mid, hi = edges[m], edges[m + 1], edges[m + 2]
        rising = (bin_hz - lo) / max(mid - lo, 1e-9)
        falling = (hi - bin_hz) / max(hi - mid, 1e-9)
        fb[:, m] = np.maximum(0.0, np.minimum(rising, falling))
    return fb


def toy_projections(n_layers: int = TOY_N_LAYERS, n_mels: int = TOY_N_MELS,
                    dim: int = TOY_DIM, seed: int = TOY_PROJECTION_SEED) -> np.ndarray:
    """Fixed per-layer projection matrices, (n_layers, n_mels, dim).

    Layer 0 is the identity on the first ``dim`` filterbank channels; the
    remaining layers are seeded random matrices with orthonormal columns.
    """
    rng = np.random.default_rng(seed)
    projections = np.zeros((n_layers, n_mels, dim))
    projections[0] = np.eye(n_mels)[:, :dim]
    for layer in range(1, n_layers):
        q, _ = np.linalg.qr(rng.standard_normal((n_mels, dim)))
        projections[layer] = q
    return projections


def module_dtype(module: nn.Module) -> torch.dtype:
    for p in module.parameters():
        return p.dtype
    for b in module.buffers():
        return b.dtype
    return torch.float32


class FeatureBackbone(nn.Module):
    """Interface: waveform batch (B, L) at 16 kHz -> stack (B, n_layers, frames, dim)."""

    n_layers: int
    dim: int

    def extract(self, wave: Waveform) -> FeatureStack:
        """Single-utterance convenience wrapper returning a numpy stack."""
        if wave.sample_rate != SAMPLE_RATE:
            raise InvalidInput(f"backbone expects {SAMPLE_RATE} Hz audio, got {wave.sample_rate}")
        if len(wave) < FEATURE_WIN:
            raise InvalidInput(f"waveform too short for feature extraction: {len(wave)} samples")
        with torch.no_grad():
            x = torch.as_tensor(wave.samples, dtype=module_dtype(self)).unsqueeze(0)
            stack = self.forward(x)[0]
        return FeatureStack(stack.cpu().numpy())


class ToyBackbone(FeatureBackbone):
    """Deterministic pseudo-SSL features: log mel filterbank through fixed projections.

    The filterbank/projection pipeline has no trainable parameters by default;
    ``trainable=True`` promotes the projection matrices to parameters so that
    backbone freezing and joint fine-tuning have a real target in tests and
    small-scale experiments.
    """

    def __init__(self, trainable: bool = False, seed: int = TOY_PROJECTION_SEED):
        super().__init__()
        self.n_layers = TOY_N_LAYERS
        self.dim = TOY_DIM
        self.trainable = trainable
        window = torch.hann_window(FEATURE_WIN, periodic=True, dtype=torch.float64)
        self.register_buffer("window", window)
        self.register_buffer("mel", torch.as_tensor(mel_filterbank(), dtype=torch.float64))
        projections = torch.as_tensor(toy_projections(seed=seed), dtype=torch.float64)
        if trainable:
            self.projections = nn.Parameter(projections)
        else:
            self.register_buffer("projections", projections)
        self.float()

    def filterbank(self, x: torch.Tensor) -> torch.Tensor:
        """Log mel energies, (B, frames, n_mels), centered frames at 20 ms hop."""
        pad = FEATURE_WIN // 2
        xp = torch.nn.functional.pad(x.unsqueeze(1), (pad, pad), mode="reflect").squeeze(1)
        frames = xp.unfold(-1, FEATURE_WIN, FEATURE_HOP)  # (B, F, WIN)
        spec = torch.fft.rfft(frames * self.window, dim=-1)
        power = spec.real**2 + spec.imag**2
        return torch.log1p(power @ self.mel)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        fb = self.filterbank(x)
        return torch.einsum("bfm,lmd->blfd", fb, self.projections)


class ExternalBackbone(FeatureBackbone):
    """Adapter for a pretrained encoder producing 25 hidden-state layers at 20 ms stride.

    ``module`` must map a waveform batch (B, L) to either a tensor
    (B, n_layers, frames, dim) or a sequence of (B, frames, dim) layer tensors.
    """

    def __init__(self, module: nn.Module, n_layers: int = 25, dim: int = 1024):
        super().__init__()
        self.inner = module
        self.n_layers = n_layers
        self.dim = dim

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.inner(x)
        if isinstance(out, (list, tuple)):
            out = torch.stack(list(out), dim=1)
        if out.shape[1] != self.n_layers or out.shape[3] != self.dim:
            raise InvalidInput(
                f"external backbone returned shape {tuple(out.shape)}, "
                f"expected (B, {self.n_layers}, frames, {self.dim})"
            )
        return out


def build_backbone(kind: str) -> FeatureBackbone:
    if kind == "toy":
        return ToyBackbone(trainable=False)
    if kind == "toy-trainable":
        return ToyBackbone(trainable=True)
    raise InvalidInput(f"unknown backbone kind {kind!r}; external backbones are passed in directly")
