"""WAV decoding, corpus manifests and signal framing."""

from __future__ import annotations

import csv
import io
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BadConfig, InconsistentDialog, MalformedWav, ManifestError, UnsupportedFormat

MANIFEST_COLUMNS = (
    "utterance_id",
    "wav_path",
    "session_id",
    "dialog_id",
    "speaker_id",
    "spontaneity",
    "emotion",
)

EMOTIONS = ("anger", "joy", "neutral", "sadness")

PCM_SCALE = 32768.0


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate: int
    utterance_id: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise BadConfig("waveform needs a nonempty 1-D sample array")
        if self.sample_rate <= 0:
            raise BadConfig(f"sample_rate={self.sample_rate}")
        if not np.all(np.abs(samples) <= 1.0):
            raise BadConfig("samples must lie in [-1, +1]")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size


@dataclass(frozen=True)
class Utterance:
    utterance_id: str
    wav_path: str
    session_id: str
    dialog_id: str
    speaker_id: str
    spontaneity: int
    emotion: int


@dataclass(frozen=True)
class Corpus:
    """Utterances grouped by dialog, each dialog in recording order.

    ``root`` is the directory relative ``wav_path`` entries resolve against.
    """

    utterances: tuple
    root: Path = field(default_factory=Path)

    def __len__(self):
        return len(self.utterances)

    def __iter__(self):
        return iter(self.utterances)

    def dialogs(self):
        groups = OrderedDict()
        for utt in self.utterances:
            groups.setdefault(utt.dialog_id, []).append(utt)
        return groups

    def wav_file(self, utt):
        path = Path(utt.wav_path)
        return path if path.is_absolute() else self.root / path

    def subset(self, dialog_ids):
        keep = set(dialog_ids)
        return Corpus(tuple(u for u in self.utterances if u.dialog_id in keep), self.root)


@dataclass(frozen=True)
class FrameSequence:
    frames: np.ndarray  # (T, w)
    window_len: int
    stride: int
    sample_rate: int

    @property
    def n_frames(self):
        return self.frames.shape[0]


# -- WAV ------------------------------------------------------------------


def _read_chunks(data):
    if len(data) < 12:
        raise MalformedWav("header truncated")
    riff, _size, wave = struct.unpack("<4sI4s", data[:12])
    if riff != b"RIFF" or wave != b"WAVE":
        raise MalformedWav("not a RIFF/WAVE file")
    pos = 12
    chunks = {}
    while pos + 8 <= len(data):
        cid, csize = struct.unpack("<4sI", data[pos : pos + 8])
        body = data[pos + 8 : pos + 8 + csize]
        if cid == b"data" and len(body) < csize:
            raise MalformedWav(f"data chunk truncated ({len(body)} of {csize} bytes)")
        chunks.setdefault(cid, body)
        pos += 8 + csize + (csize & 1)
    return chunks


def load_wav(path, utterance_id=""):
    """Read a mono 16-bit PCM WAV file into a :class:`Waveform`.

    Samples are scaled by 1/32768, so the result lies in [-1, 1).
    """
    data = Path(path).read_bytes()
    chunks = _read_chunks(data)
    if b"fmt " not in chunks:
        raise MalformedWav("missing fmt chunk")
    fmt = chunks[b"fmt "]
    if len(fmt) < 16:
        raise MalformedWav("fmt chunk truncated")
    code, channels, rate, _byte_rate, _align, bits = struct.unpack("<HHIIHH", fmt[:16])
    if code != 1:
        raise UnsupportedFormat(f"format={code}")
    if channels != 1:
        raise UnsupportedFormat(f"channels={channels}")
    if bits != 16:
        raise UnsupportedFormat(f"bits={bits}")
    if rate == 0:
        raise MalformedWav("sample_rate=0")
    if b"data" not in chunks:
        raise MalformedWav("missing data chunk")
    raw = chunks[b"data"]
    if len(raw) % 2:
        raise MalformedWav("data chunk has odd byte count")
    if not raw:
        raise MalformedWav("data chunk is empty")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / PCM_SCALE
    return Waveform(samples, int(rate), utterance_id)


def write_wav(path, wave):
    """Write ``wave`` as mono 16-bit PCM; samples are rounded and clipped."""
    ints = np.clip(np.round(np.asarray(wave.samples) * PCM_SCALE), -32768, 32767).astype("<i2")
    payload = ints.tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        1,
        1,
        wave.sample_rate,
        wave.sample_rate * 2,
        2,
        16,
        b"data",
        len(payload),
    )
    Path(path).write_bytes(header + payload)


# -- manifest --------------------------------------------------------------


def _parse_label(value, allowed, name, row):
    try:
        label = int(value)
    except (TypeError, ValueError):
        raise ManifestError(row, f"{name} is not an integer: {value!r}") from None
    if label not in allowed:
        raise ManifestError(row, f"{name} out of range: {label}")
    return label


def parse_manifest(path):
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(1, "empty manifest") from None
        missing = [c for c in MANIFEST_COLUMNS if c not in header]
        if missing:
            raise ManifestError(1, f"missing columns: {', '.join(missing)}")
        col = {name: header.index(name) for name in MANIFEST_COLUMNS}
        seen = set()
        utterances = []
        for row_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < len(header):
                raise ManifestError(row_no, f"expected {len(header)} fields, got {len(row)}")
            values = {name: row[i] for name, i in col.items()}
            uid = values["utterance_id"]
            if not uid:
                raise ManifestError(row_no, "empty utterance_id")
            if uid in seen:
                raise ManifestError(row_no, f"duplicate utterance_id {uid!r}")
            seen.add(uid)
            utterances.append(
                Utterance(
                    utterance_id=uid,
                    wav_path=values["wav_path"],
                    session_id=values["session_id"],
                    dialog_id=values["dialog_id"],
                    speaker_id=values["speaker_id"],
                    spontaneity=_parse_label(values["spontaneity"], (0, 1), "spontaneity", row_no),
                    emotion=_parse_label(values["emotion"], (0, 1, 2, 3), "emotion", row_no),
                )
            )
    return build_corpus(utterances, root=path.parent)


def build_corpus(utterances, root=Path()):
    """Group utterances by dialog (first-appearance order) and check label consistency."""
    groups = OrderedDict()
    for utt in utterances:
        groups.setdefault(utt.dialog_id, []).append(utt)
    for dialog_id, utts in groups.items():
        labels = {u.spontaneity for u in utts}
        if len(labels) > 1:
            raise InconsistentDialog(f"dialog {dialog_id!r} mixes spontaneity labels {sorted(labels)}")
    ordered = tuple(u for utts in groups.values() for u in utts)
    return Corpus(ordered, Path(root))


def manifest_text(corpus):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MANIFEST_COLUMNS)
    for u in corpus:
        writer.writerow([getattr(u, name) for name in MANIFEST_COLUMNS])
    return buf.getvalue()


def write_manifest(path, corpus):
    Path(path).write_text(manifest_text(corpus), encoding="utf-8")


# -- framing ---------------------------------------------------------------


def ms_to_samples(ms, sample_rate):
    return max(1, int(round(ms * sample_rate / 1000.0)))


def frame_signal(wave, w, m):
    """Slice ``wave`` into frames of ``w`` samples every ``m`` samples.

    Trailing samples that do not fill a window are dropped; a signal shorter
    than one window yields a single zero-padded frame.
    """
    if w <= 0 or m <= 0:
        raise BadConfig(f"window and stride must be positive (w={w}, m={m})")
    x = np.asarray(wave.samples, dtype=np.float64)
    if x.size < w:
        frames = np.zeros((1, w))
        frames[0, : x.size] = x
    else:
        n = (x.size - w) // m + 1
        idx = np.arange(w)[None, :] + m * np.arange(n)[:, None]
        frames = x[idx]
    return FrameSequence(frames, int(w), int(m), wave.sample_rate)


def frame_wave_ms(wave, window_ms=25.0, stride_ms=10.0):
    rate = wave.sample_rate
    return frame_signal(wave, ms_to_samples(window_ms, rate), ms_to_samples(stride_ms, rate))
