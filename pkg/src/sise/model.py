"""Shared-backbone model: masking-based enhancement head and dual-branch inversion head.

Both heads read softmax-weighted sums of the backbone's layer stack (one learnable
weight vector per head unless sharing is configured). The enhancement head predicts
a sigmoid mask over the log1p-compressed magnitude; the masked magnitude is
decompressed, recombined with the noisy phase, and inverted to a waveform. The
inversion head runs two recurrent branches: one for the six oral constriction
channels, one for VEL plus the three source channels, concatenated to a 10-channel
track at 50 Hz.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .backbone import (
    FEATURE_HOP,
    FeatureBackbone,
    FeatureStack,
    LayerWeights,
    build_backbone,
    module_dtype,
)
from .dsp import SAMPLE_RATE, CompressedMagnitude, SpectrogramGeometry, Waveform
from .errors import IncompatibleCheckpoint, InvalidInput
from .tracks import ArticulatoryTrack, N_CHANNELS, TRACK_RATE

N_ORAL = 6    # LA, LP, TBCL, TBCD, TTCL, TTCD
N_SOURCE = 4  # VEL, Per, Aper, F0

CHECKPOINT_FORMAT = 1


@dataclass(frozen=True)
class ModelConfig:
    heads: tuple[str, ...] = ("se", "si")
    backbone: str = "toy"          # toy | toy-trainable | external
    n_layers: int = 4
    feat_dim: int = 32
    se_hidden: int = 256
    si_hidden: int = 256
    rnn_layers: int = 2
    share_layer_weights: bool = False
    fft_size: int = 400
    hop: int = 160
    window: str = "hann"
    init_seed: int = 1234

    def __post_init__(self):
        if not self.heads or any(h not in ("se", "si") for h in self.heads):
            raise InvalidInput(f"heads must be a non-empty subset of ('se', 'si'), got {self.heads}")
        object.__setattr__(self, "heads", tuple(self.heads))

    @property
    def geometry(self) -> SpectrogramGeometry:
        return SpectrogramGeometry(self.fft_size, self.hop, self.window)

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["heads"] = list(self.heads)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["heads"] = tuple(d["heads"])
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


class MaskHead(nn.Module):
    """Recurrent mask estimator with a parallel dense path from the features."""

    def __init__(self, feat_dim: int, n_bins: int, hidden: int, rnn_layers: int):
        super().__init__()
        self.rnn = nn.GRU(feat_dim + n_bins, hidden, num_layers=rnn_layers,
                          bidirectional=True, batch_first=True)
        self.dense = nn.Linear(2 * hidden, n_bins)
        self.residual = nn.Linear(feat_dim, n_bins)

    def forward(self, feats: torch.Tensor, comp: torch.Tensor) -> torch.Tensor:
        h, _ = self.rnn(torch.cat([feats, comp], dim=-1))
        return self.dense(h) + self.residual(feats)  # mask logits


class TrackBranch(nn.Module):
    def __init__(self, feat_dim: int, hidden: int, rnn_layers: int, n_out: int):
        super().__init__()
        self.rnn = nn.GRU(feat_dim, hidden, num_layers=rnn_layers,
                          bidirectional=True, batch_first=True)
        self.proj = nn.Linear(2 * hidden, n_out)

    def forward(self, feats: torch.Tensor) -> torch.Tensor:
        h, _ = self.rnn(feats)
        return self.proj(h)


class TrackHead(nn.Module):
    """Two task branches: oral constriction channels and VEL + source channels."""

    def __init__(self, feat_dim: int, hidden: int, rnn_layers: int):
        super().__init__()
        self.oral = TrackBranch(feat_dim, hidden, rnn_layers, N_ORAL)
        self.source = TrackBranch(feat_dim, hidden, rnn_layers, N_SOURCE)

    def forward(self, feats: torch.Tensor) -> torch.Tensor:
        return torch.cat([self.oral(feats), self.source(feats)], dim=-1)


class SiseModel(nn.Module):
    def __init__(self, config: ModelConfig, backbone: FeatureBackbone | None = None):
        super().__init__()
        self.config = config
        if backbone is None:
            backbone = build_backbone(config.backbone)
        if backbone.n_layers != config.n_layers or backbone.dim != config.feat_dim:
            raise InvalidInput(
                f"backbone provides {backbone.n_layers} layers of dim {backbone.dim}, "
                f"config expects {config.n_layers}x{config.feat_dim}"
            )
        self.backbone = backbone

        self.layer_logits = nn.ParameterDict()
        if config.share_layer_weights:
            self.layer_logits["shared"] = nn.Parameter(torch.zeros(config.n_layers))
        else:
            for head in config.heads:
                self.layer_logits[head] = nn.Parameter(torch.zeros(config.n_layers))

        if "se" in config.heads:
            self.se_head = MaskHead(config.feat_dim, config.n_bins, config.se_hidden,
                                    config.rnn_layers)
        if "si" in config.heads:
            self.si_head = TrackHead(config.feat_dim, config.si_hidden, config.rnn_layers)

        window = torch.hann_window(config.fft_size, periodic=True)
        self.register_buffer("stft_window", window)
        # Per-channel affine track statistics; the inversion head operates in
        # normalized space and outputs are mapped back to physical units.
        self.register_buffer("track_mean", torch.zeros(N_CHANNELS))
        self.register_buffer("track_std", torch.ones(N_CHANNELS))

        self._backbone_frozen = False
        self._init_head_weights()

    # -- initialization ------------------------------------------------------

    def _init_head_weights(self):
        """Uniform fan-in initialization of head and layer-weight parameters, seeded."""
        gen = torch.Generator().manual_seed(self.config.init_seed)
        for name, param in sorted(self.named_parameters()):
            if name.startswith("backbone."):
                continue
            if param.dim() >= 2:
                bound = 1.0 / np.sqrt(param.shape[-1])
            elif "layer_logits" in name:
                continue  # keep the uniform-mixture start
            else:
                bound = 1.0 / np.sqrt(param.shape[0])
            with torch.no_grad():
                param.uniform_(-bound, bound, generator=gen)

    # -- freezing -------------------------------------------------------------

    @property
    def backbone_frozen(self) -> bool:
        return self._backbone_frozen

    @backbone_frozen.setter
    def backbone_frozen(self, frozen: bool):
        self._backbone_frozen = bool(frozen)
        for p in self.backbone.parameters():
            p.requires_grad_(not frozen)

    def trainable_parameters(self):
        return [p for p in self.parameters() if p.requires_grad]

    # -- forward pieces --------------------------------------------------------

    def head_logits(self, head: str) -> torch.Tensor:
        key = "shared" if self.config.share_layer_weights else head
        return self.layer_logits[key]

    def layer_weights(self, head: str) -> LayerWeights:
        return LayerWeights(self.head_logits(head).detach().cpu().numpy())

    def features(self, x: torch.Tensor) -> torch.Tensor:
        return self.backbone(x)

    def weighted_features(self, stack: torch.Tensor, head: str) -> torch.Tensor:
        w = torch.softmax(self.head_logits(head), dim=0).to(stack.dtype)
        return torch.einsum("l,blfd->bfd", w, stack)

    def _stft(self, x: torch.Tensor) -> torch.Tensor:
        """Complex STFT, (B, frames, bins), matching the numpy kernel's convention."""
        spec = torch.stft(
            x, self.config.fft_size, hop_length=self.config.hop,
            win_length=self.config.fft_size, window=self.stft_window.to(x.dtype),
            center=True, pad_mode="reflect", normalized=False,
            onesided=True, return_complex=True,
        )
        return spec.transpose(1, 2)

    def _istft(self, spec: torch.Tensor, length: int) -> torch.Tensor:
        return torch.istft(
            spec.transpose(1, 2), self.config.fft_size, hop_length=self.config.hop,
            win_length=self.config.fft_size,
            window=self.stft_window.to(spec.real.dtype),
            center=True, length=length,
        )

    def se_apply(self, x: torch.Tensor, stack: torch.Tensor | None = None,
                 mask_override: torch.Tensor | None = None) -> dict:
        """Enhancement pass on a waveform batch (B, L).

        ``mask_override`` bypasses the learned mask (test hook; e.g. an all-ones
        mask turns the path into a plain analysis/synthesis round trip).
        """
        if "se" not in self.config.heads:
            raise InvalidInput("model has no enhancement head")
        if x.shape[-1] < self.config.fft_size:
            raise InvalidInput(f"input shorter than one analysis frame: {x.shape[-1]} samples")
        if stack is None:
            stack = self.features(x)
        feats = self.weighted_features(stack, "se")
        feats_up = torch.repeat_interleave(feats, 2, dim=1)

        spec = self._stft(x)
        mag = spec.abs()
        comp = torch.log1p(mag)

        n_frames = min(feats_up.shape[1], comp.shape[1])
        feats_up = feats_up[:, :n_frames]
        comp = comp[:, :n_frames]
        spec = spec[:, :n_frames]
        mag = mag[:, :n_frames]

        if mask_override is not None:
            mask = mask_override.to(comp.dtype)
        else:
            mask = torch.sigmoid(self.se_head(feats_up, comp))
        enhanced_mag = torch.expm1(mask * comp)
        unit_phase = spec / mag.clamp_min(1e-12)
        enhanced = self._istft(enhanced_mag * unit_phase, length=x.shape[-1])
        return {"enhanced": enhanced, "mask": mask, "compressed": comp}

    def si_apply(self, x: torch.Tensor, stack: torch.Tensor | None = None,
                 normalized: bool = False) -> torch.Tensor:
        """Inversion pass: (B, L) -> (B, frames, 10) at the 50 Hz track rate."""
        if "si" not in self.config.heads:
            raise InvalidInput("model has no inversion head")
        if x.shape[-1] < self.config.fft_size:
            raise InvalidInput(f"input shorter than one analysis frame: {x.shape[-1]} samples")
        if stack is None:
            stack = self.features(x)
        feats = self.weighted_features(stack, "si")
        pred = self.si_head(feats)
        if normalized:
            return pred
        return pred * self.track_std.to(pred.dtype) + self.track_mean.to(pred.dtype)

    def set_track_stats(self, mean: np.ndarray, std: np.ndarray):
        self.track_mean.copy_(torch.as_tensor(mean, dtype=self.track_mean.dtype))
        self.track_std.copy_(torch.as_tensor(std, dtype=self.track_std.dtype).clamp_min(1e-6))

    # -- single-utterance API ---------------------------------------------------

    def _as_batch(self, wave: Waveform) -> torch.Tensor:
        if wave.sample_rate != SAMPLE_RATE:
            raise InvalidInput(f"expected {SAMPLE_RATE} Hz audio, got {wave.sample_rate}")
        return torch.as_tensor(wave.samples, dtype=module_dtype(self)).unsqueeze(0)

    def se_forward(self, noisy: Waveform) -> tuple[Waveform, np.ndarray, CompressedMagnitude]:
        """Enhance one utterance: returns (enhanced, mask, compressed noisy magnitude)."""
        self.eval()
        with torch.no_grad():
            out = self.se_apply(self._as_batch(noisy))
        enhanced = Waveform(out["enhanced"][0].cpu().numpy().astype(np.float64))
        mask = out["mask"][0].cpu().numpy()
        comp = CompressedMagnitude(out["compressed"][0].cpu().numpy(), self.config.geometry)
        return enhanced, mask, comp

    def si_forward(self, wave: Waveform) -> ArticulatoryTrack:
        """Invert one utterance to a 10-channel track at 50 Hz."""
        self.eval()
        with torch.no_grad():
            pred = self.si_apply(self._as_batch(wave))
        return ArticulatoryTrack(pred[0].cpu().numpy().astype(np.float64), TRACK_RATE)

    def extract_features(self, wave: Waveform) -> FeatureStack:
        return self.backbone.extract(wave)


def expected_track_frames(n_samples: int) -> int:
    return round(n_samples * TRACK_RATE / SAMPLE_RATE)


def feature_frames(n_samples: int) -> int:
    return n_samples // FEATURE_HOP + 1


def parameter_digest(module: nn.Module, prefix: str = "") -> str:
    """Content hash of a module's parameters and buffers (optionally name-filtered)."""
    h = hashlib.sha256()
    state = module.state_dict()
    for name in sorted(state):
        if prefix and not name.startswith(prefix):
            continue
        h.update(name.encode())
        h.update(state[name].cpu().numpy().tobytes())
    return h.hexdigest()


def save_checkpoint(model: SiseModel, path: str | os.PathLike, stage: int | None = None,
                    seed: int | None = None, extra: dict | None = None) -> None:
    payload = {
        "format_version": CHECKPOINT_FORMAT,
        "config": model.config.to_dict(),
        "config_digest": model.config.digest(),
        "state_dict": {k: v.cpu() for k, v in model.state_dict().items()},
        "backbone_frozen": model.backbone_frozen,
        "stage": stage,
        "seed": seed,
        "extra": extra or {},
    }
    # Legacy serialization keeps the file byte-stable across identical runs.
    torch.save(payload, path, _use_new_zipfile_serialization=False)


def load_checkpoint(path: str | os.PathLike, expected_config: ModelConfig | None = None,
                    backbone: FeatureBackbone | None = None) -> tuple[SiseModel, dict]:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    config = ModelConfig.from_dict(payload["config"])
    if config.digest() != payload["config_digest"]:
        raise IncompatibleCheckpoint(f"{path}: config digest mismatch (corrupt or edited checkpoint)")
    if expected_config is not None and expected_config.digest() != payload["config_digest"]:
        raise IncompatibleCheckpoint(
            f"{path}: checkpoint config does not match the requested configuration"
        )
    model = SiseModel(config, backbone=backbone)
    model.load_state_dict(payload["state_dict"])
    model.backbone_frozen = payload["backbone_frozen"]
    meta = {k: payload[k] for k in ("stage", "seed", "extra", "backbone_frozen")}
    return model, meta
