"""Corpus manifests: line-delimited JSON, one utterance variant per line.

The first line is a header record carrying toolkit metadata (version, seed,
analysis geometry, noise-pool provenance). File references are stored relative
to the manifest's directory so a corpus tree can be relocated wholesale.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .errors import InvalidInput

FORMAT_VERSION = 1

SPLITS = ("train", "dev", "test")
NOISE_KINDS = ("babble", "nonbabble", "combined")


@dataclass(frozen=True)
class ManifestEntry:
    utterance_id: str
    split: str
    clean_path: str
    track_path: str
    duration_s: float
    noisy_path: str | None = None
    noise_kind: str | None = None
    snr_db: float | None = None

    def __post_init__(self):
        if self.split not in SPLITS:
            raise InvalidInput(f"unknown split {self.split!r}")
        if self.duration_s <= 0:
            raise InvalidInput(f"{self.utterance_id}: duration must be positive")
        noisy_fields = (self.noisy_path, self.noise_kind, self.snr_db)
        if any(f is not None for f in noisy_fields) and not all(f is not None for f in noisy_fields):
            raise InvalidInput(f"{self.utterance_id}: noisy fields must be all present or all absent")
        if self.noise_kind is not None and self.noise_kind not in NOISE_KINDS:
            raise InvalidInput(f"unknown noise kind {self.noise_kind!r}")

    @property
    def is_noisy(self) -> bool:
        return self.noisy_path is not None

    @property
    def variant_key(self) -> tuple:
        return (self.utterance_id, self.noise_kind, self.snr_db)

    @property
    def input_path(self) -> str:
        """Path of the audio the model consumes: noisy variant if present, else clean."""
        return self.noisy_path if self.noisy_path is not None else self.clean_path


@dataclass
class CorpusManifest:
    entries: list[ManifestEntry] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    root: Path | None = None  # directory paths are relative to; set on save/load

    def validate(self, check_files: bool = False) -> None:
        seen = set()
        for e in self.entries:
            key = e.variant_key
            if key in seen:
                raise InvalidInput(f"duplicate manifest entry {key}")
            seen.add(key)
        if check_files:
            if self.root is None:
                raise InvalidInput("cannot check files without a manifest root")
            for e in self.entries:
                for rel in (e.clean_path, e.track_path, e.noisy_path):
                    if rel is not None and not (self.root / rel).exists():
                        raise InvalidInput(f"missing file referenced by manifest: {rel}")

    def split_entries(self, split: str, noisy: bool | None = None) -> list[ManifestEntry]:
        out = [e for e in self.entries if e.split == split]
        if noisy is not None:
            out = [e for e in out if e.is_noisy == noisy]
        return out

    def resolve(self, rel_path: str) -> Path:
        if self.root is None:
            return Path(rel_path)
        return self.root / rel_path


def save_manifest(manifest: CorpusManifest, path: str | os.PathLike) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"record": "header", "format_version": FORMAT_VERSION, **manifest.metadata}
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(header, sort_keys=True) + "\n")
        for e in manifest.entries:
            rec = {"record": "entry", **{k: v for k, v in asdict(e).items() if v is not None}}
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    manifest.root = path.parent


def load_manifest(path: str | os.PathLike) -> CorpusManifest:
    path = Path(path)
    entries: list[ManifestEntry] = []
    metadata: dict = {}
    with open(path, "r", encoding="utf-8") as f:
        for i, line in enumerate(f):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            kind = rec.pop("record", None)
            if kind == "header":
                rec.pop("format_version", None)
                metadata = rec
            elif kind == "entry":
                entries.append(ManifestEntry(**rec))
            else:
                raise InvalidInput(f"{path}:{i + 1}: unknown record type {kind!r}")
    manifest = CorpusManifest(entries, metadata, root=path.parent)
    manifest.validate()
    return manifest


def manifest_digest(path: str | os.PathLike) -> str:
    """Content digest of a manifest file, for determinism checks."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
