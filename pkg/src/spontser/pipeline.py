"""Corpus-level feature extraction: WAV -> frames -> LLDs -> pooled features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio_ingest import frame_signal, load_wav, ms_to_samples
from .errors import BadConfig, MissingAudio
from .lld import LLDConfig, extract_llds
from .models import LabeledDialog
from .pooling import PoolConfig, pool_global


@dataclass(frozen=True)
class FrameConfig:
    window_ms: float = 25.0
    stride_ms: float = 10.0

    def validate(self):
        if not (self.window_ms > 0 and self.stride_ms > 0):
            raise BadConfig(f"window_ms and stride_ms must be positive ({self.window_ms}, {self.stride_ms})")
        return self


def utterance_llds(wave, frame_cfg=FrameConfig(), lld_cfg=LLDConfig()):
    rate = wave.sample_rate
    frames = frame_signal(wave, ms_to_samples(frame_cfg.window_ms, rate), ms_to_samples(frame_cfg.stride_ms, rate))
    return extract_llds(frames, lld_cfg)


def corpus_llds(corpus, frame_cfg=FrameConfig(), lld_cfg=LLDConfig()):
    """LLD matrices for every utterance, keyed by utterance id."""
    frame_cfg.validate()
    lld_cfg.validate()
    out = {}
    for utt in corpus:
        path = corpus.wav_file(utt)
        try:
            wave = load_wav(path, utt.utterance_id)
        except OSError as exc:
            raise MissingAudio(utt.utterance_id, path) from exc
        out[utt.utterance_id] = utterance_llds(wave, frame_cfg, lld_cfg)
    return out


def pool_corpus(llds_by_id, pool_cfg=PoolConfig()):
    pool_cfg.validate()
    return {uid: pool_global(llds, pool_cfg, uid).values for uid, llds in llds_by_id.items()}


def corpus_features(corpus, frame_cfg=FrameConfig(), lld_cfg=LLDConfig(), pool_cfg=PoolConfig()):
    return pool_corpus(corpus_llds(corpus, frame_cfg, lld_cfg), pool_cfg)


def corpus_dialogs(corpus, features, columns=None):
    """Group per-utterance features into :class:`LabeledDialog` records.

    ``columns`` optionally selects a subset of feature dimensions.
    """
    dialogs = []
    for dialog_id, utts in corpus.dialogs().items():
        try:
            X = np.vstack([features[u.utterance_id] for u in utts])
        except KeyError as exc:
            raise BadConfig(f"no features for utterance {exc.args[0]!r}") from None
        if columns is not None:
            X = X[:, columns]
        dialogs.append(
            LabeledDialog(dialog_id, X, utts[0].spontaneity, np.array([u.emotion for u in utts], dtype=np.int64))
        )
    return dialogs
