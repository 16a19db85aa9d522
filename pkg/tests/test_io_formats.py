"""File-format tests: wav I/O, track tables, corpus manifests."""

import numpy as np
import pytest
from scipy.io import wavfile

from sise.audio_io import read_wav, read_wav_16k, write_wav
from sise.dsp import Waveform
from sise.errors import InvalidInput
from sise.manifest import (
    CorpusManifest,
    ManifestEntry,
    load_manifest,
    manifest_digest,
    save_manifest,
)
from sise.tracks import (
    CHANNELS,
    ArticulatoryTrack,
    read_track,
    resample_track,
    write_track,
)


# ---------------------------------------------------------------------------
# WAV I/O
# ---------------------------------------------------------------------------


class TestWavIO:
    def test_float32_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        wave = Waveform(0.5 * rng.standard_normal(8000))
        path = tmp_path / "a.wav"
        write_wav(path, wave)
        back = read_wav(path)
        assert back.sample_rate == 16000
        np.testing.assert_allclose(back.samples, wave.samples, atol=1e-7)

    def test_int16_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        wave = Waveform(0.15 * rng.standard_normal(8000))
        path = tmp_path / "a.wav"
        write_wav(path, wave, fmt="int16")
        back = read_wav(path)
        np.testing.assert_allclose(back.samples, wave.samples, atol=1.0 / 32768)

    def test_multichannel_rejected(self, tmp_path):
        path = tmp_path / "stereo.wav"
        wavfile.write(path, 16000, np.zeros((100, 2), dtype=np.float32))
        with pytest.raises(InvalidInput):
            read_wav(path)

    def test_read_16k_resamples(self, tmp_path):
        path = tmp_path / "8k.wav"
        wavfile.write(path, 8000, np.zeros(8000, dtype=np.float32))
        wave = read_wav_16k(path)
        assert wave.sample_rate == 16000
        assert len(wave) == 16000

    def test_unknown_format_rejected(self, tmp_path):
        with pytest.raises(InvalidInput):
            write_wav(tmp_path / "a.wav", Waveform(np.zeros(10)), fmt="mp3")


# ---------------------------------------------------------------------------
# Track tables
# ---------------------------------------------------------------------------


def make_track(n_frames=100, seed=0):
    rng = np.random.default_rng(seed)
    return ArticulatoryTrack(rng.standard_normal((n_frames, 10)))


class TestTracks:
    def test_channel_order(self):
        assert CHANNELS == ("LA", "LP", "TBCL", "TBCD", "TTCL", "TTCD", "VEL", "Per", "Aper", "F0")

    def test_csv_round_trip(self, tmp_path):
        track = make_track()
        path = tmp_path / "t.csv"
        write_track(path, track)
        back = read_track(path)
        np.testing.assert_allclose(back.channels, track.channels, rtol=1e-7, atol=1e-9)

    def test_f32_round_trip(self, tmp_path):
        track = make_track(seed=1)
        path = tmp_path / "t.f32"
        write_track(path, track)
        back = read_track(path)
        np.testing.assert_allclose(back.channels, track.channels, atol=1e-6)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(InvalidInput):
            read_track(path)

    def test_shape_enforced(self):
        with pytest.raises(InvalidInput):
            ArticulatoryTrack(np.zeros((5, 9)))

    def test_nan_rejected(self):
        bad = np.zeros((5, 10))
        bad[2, 3] = np.nan
        with pytest.raises(InvalidInput):
            ArticulatoryTrack(bad)

    def test_resample_track_rate_and_endpoints(self):
        track = make_track(n_frames=100)  # 2 s at 50 Hz
        out = resample_track(ArticulatoryTrack(track.channels, frame_rate=100), 50)
        assert out.frame_rate == 50
        assert out.n_frames == 50
        np.testing.assert_allclose(out.channels[0], track.channels[0])

    def test_channel_accessor(self):
        track = make_track()
        np.testing.assert_array_equal(track.channel("F0"), track.channels[:, 9])


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------


def entry(i, split="train", noisy=False):
    kwargs = {}
    if noisy:
        kwargs = {"noisy_path": f"noisy/{i}.wav", "noise_kind": "babble", "snr_db": 5.0}
    return ManifestEntry(
        utterance_id=f"utt{i:03d}",
        split=split,
        clean_path=f"clean/{i}.wav",
        track_path=f"tracks/{i}.csv",
        duration_s=2.0,
        **kwargs,
    )


class TestManifest:
    def test_save_load_round_trip(self, tmp_path):
        manifest = CorpusManifest(
            [entry(0), entry(1, noisy=True), entry(2, split="test")],
            metadata={"seed": 7, "toolkit_version": "0.1.0"},
        )
        path = tmp_path / "corpus.jsonl"
        save_manifest(manifest, path)
        back = load_manifest(path)
        assert back.metadata["seed"] == 7
        assert len(back.entries) == 3
        assert back.entries[1].is_noisy and back.entries[1].snr_db == 5.0
        assert back.entries[0].noisy_path is None

    def test_digest_stable(self, tmp_path):
        manifest = CorpusManifest([entry(i) for i in range(5)], metadata={"seed": 1})
        save_manifest(manifest, tmp_path / "a.jsonl")
        save_manifest(manifest, tmp_path / "b.jsonl")
        assert manifest_digest(tmp_path / "a.jsonl") == manifest_digest(tmp_path / "b.jsonl")

    def test_duplicate_variant_rejected(self):
        manifest = CorpusManifest([entry(0), entry(0)])
        with pytest.raises(InvalidInput):
            manifest.validate()

    def test_partial_noisy_fields_rejected(self):
        with pytest.raises(InvalidInput):
            ManifestEntry(
                utterance_id="u",
                split="train",
                clean_path="c.wav",
                track_path="t.csv",
                duration_s=1.0,
                noisy_path="n.wav",  # kind and snr missing
            )

    def test_missing_file_check(self, tmp_path):
        manifest = CorpusManifest([entry(0)])
        save_manifest(manifest, tmp_path / "m.jsonl")
        with pytest.raises(InvalidInput):
            manifest.validate(check_files=True)

    def test_split_filter(self):
        manifest = CorpusManifest([entry(0), entry(1, noisy=True), entry(2, split="dev")])
        assert len(manifest.split_entries("train")) == 2
        assert len(manifest.split_entries("train", noisy=True)) == 1
        assert len(manifest.split_entries("dev")) == 1
