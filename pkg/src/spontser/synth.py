"""Seeded synthetic corpus: harmonic tones standing in for labelled speech.

Emotion selects one of four acoustic patterns (pitch band, amplitude
modulation rate, noise mix). Spontaneity is a dialog-level property: it
shifts a latent cue that sets the spectral tilt of the harmonics and the
depth of a slow timbre wobble. Each utterance adds Gaussian noise to that
cue, so a single utterance is an unreliable spontaneity witness while a
run of utterances from the same dialog is a good one.

With ``branch_divergence`` the spontaneous dialogs use a permuted
emotion -> pattern map, so emotion is only decodable once spontaneity is
known.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio_ingest import Utterance, Waveform, build_corpus, write_manifest, write_wav
from .errors import BadConfig


@dataclass(frozen=True)
class ToneBand:
    f0_lo: float
    f0_hi: float
    am_rate: float  # Hz
    noise_mix: float  # white-noise level relative to the tone rms


DEFAULT_BANDS = (
    ToneBand(100.0, 125.0, 3.0, 0.02),
    ToneBand(145.0, 170.0, 5.0, 0.05),
    ToneBand(195.0, 220.0, 7.0, 0.10),
    ToneBand(250.0, 280.0, 9.0, 0.20),
)

# how strongly the spontaneity cue moves the static tilt and the tilt wobble depth
TILT_GAIN = 0.3
WOBBLE_GAIN = 0.5

# spontaneous dialogs swap anger<->joy and neutral<->sadness when diverging
SPONTANEOUS_PATTERN = (1, 0, 3, 2)


@dataclass(frozen=True)
class SynthSpec:
    n_dialogs: int = 25
    utterances_per_dialog: int = 10
    spont_fraction: float = 0.5
    centroid_separation: float = 1.0
    noise_sigma: float = 0.2
    branch_divergence: bool = True
    tone_bands: tuple = DEFAULT_BANDS
    seed: int = 0
    sample_rate: int = 16000
    min_duration: float = 0.5
    max_duration: float = 0.7
    n_sessions: int = 5
    dialog_spread: float = 0.05

    def validate(self):
        if self.n_dialogs < 1 or self.utterances_per_dialog < 1:
            raise BadConfig("need at least one dialog and one utterance per dialog")
        if not 0.0 <= self.spont_fraction <= 1.0:
            raise BadConfig(f"spont_fraction must lie in [0, 1] (got {self.spont_fraction})")
        if not self.centroid_separation > 0:
            raise BadConfig("centroid_separation must be positive")
        if self.noise_sigma < 0 or self.dialog_spread < 0:
            raise BadConfig("noise levels must be nonnegative")
        if len(self.tone_bands) != 4:
            raise BadConfig("tone_bands needs one entry per emotion class")
        if not 0 < self.min_duration <= self.max_duration:
            raise BadConfig("need 0 < min_duration <= max_duration")
        return self


def pattern_for(emotion, spontaneity, branch_divergence):
    if branch_divergence and spontaneity == 1:
        return SPONTANEOUS_PATTERN[emotion]
    return emotion


def synth_tone(rng, band, cue, rate, duration):
    """One utterance. ``cue`` > 0 pushes towards a dark, wobbly spontaneous timbre."""
    n = int(round(duration * rate))
    t = np.arange(n) / rate
    f0 = rng.uniform(band.f0_lo, band.f0_hi)
    tilt = np.clip(1.2 + TILT_GAIN * cue, 0.2, 3.0)
    depth = np.clip(0.35 + WOBBLE_GAIN * cue, 0.0, 1.0)
    wobble = rng.uniform(4.0, 7.0)
    tilt_t = tilt + depth * np.sin(2 * np.pi * wobble * t + rng.uniform(0, 2 * np.pi))
    n_harm = max(1, min(30, int(7000.0 // f0)))
    h = np.arange(1, n_harm + 1)[:, None]
    amps = h ** (-tilt_t[None, :])
    phases = rng.uniform(0, 2 * np.pi, size=(n_harm, 1))
    tone = np.sum(amps * np.sin(2 * np.pi * f0 * h * t[None, :] + phases), axis=0)
    tone /= np.sqrt(np.mean(tone**2))
    tone *= 1.0 + 0.5 * np.sin(2 * np.pi * band.am_rate * t)
    signal = tone + band.noise_mix * rng.standard_normal(n)
    return 0.7 * signal / np.max(np.abs(signal))


def gen_synth_corpus(spec, out_dir):
    """Write WAV files and ``manifest.csv`` under ``out_dir``; return the Corpus."""
    spec.validate()
    out = Path(out_dir)
    (out / "wav").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    n_spont = int(np.floor(spec.spont_fraction * spec.n_dialogs + 0.5))
    spont_of = np.zeros(spec.n_dialogs, dtype=np.int64)
    spont_of[rng.permutation(spec.n_dialogs)[:n_spont]] = 1
    half = spec.centroid_separation / 2.0
    utterances = []
    for d in range(spec.n_dialogs):
        spont = int(spont_of[d])
        session = f"S{d % spec.n_sessions + 1}"
        speaker = f"{session}_{'F' if d % 2 else 'M'}"
        dialog_id = f"dlg{d:03d}"
        dialog_cue = (half if spont else -half) + spec.dialog_spread * rng.standard_normal()
        for k in range(spec.utterances_per_dialog):
            uid = f"{dialog_id}_u{k:02d}"
            emotion = int(rng.integers(0, 4))
            band = spec.tone_bands[pattern_for(emotion, spont, spec.branch_divergence)]
            cue = dialog_cue + spec.noise_sigma * rng.standard_normal()
            duration = rng.uniform(spec.min_duration, spec.max_duration)
            samples = synth_tone(rng, band, cue, spec.sample_rate, duration)
            rel = f"wav/{uid}.wav"
            write_wav(out / rel, Waveform(samples, spec.sample_rate, uid))
            utterances.append(Utterance(uid, rel, session, dialog_id, speaker, spont, emotion))
    corpus = build_corpus(utterances, root=out)
    write_manifest(out / "manifest.csv", corpus)
    return corpus
