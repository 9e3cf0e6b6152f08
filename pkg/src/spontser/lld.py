"""Frame-level low-level descriptors: MFCC, zero-crossing rate, voicing, F0.

Every descriptor is computed on a ``(T, w)`` block of frames at once; the
single-frame functions are thin wrappers over the batched path.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BadConfig

SCALAR_DESCRIPTORS = ("zcr", "voiceprob", "f0")
DESCRIPTOR_GROUPS = ("mfcc",) + SCALAR_DESCRIPTORS

# a shorter-lag autocorrelation peak wins if it reaches this share of the global maximum
OCTAVE_GUARD = 0.9


@dataclass(frozen=True)
class LLDConfig:
    n_mfcc: int = 12
    n_mel_filters: int = 26
    fmin: float = 0.0
    fmax: float | None = None  # None -> Nyquist
    log_floor: float = 1e-10
    f0_min: float = 80.0
    f0_max: float = 400.0
    voicing_threshold: float = 0.35
    preemphasis: float = 0.97

    def upper_freq(self, rate):
        return rate / 2.0 if self.fmax is None else float(self.fmax)

    def validate(self, rate=None):
        if self.n_mfcc < 1 or self.n_mel_filters < 1:
            raise BadConfig("n_mfcc and n_mel_filters must be positive")
        if self.n_mfcc > self.n_mel_filters:
            raise BadConfig(f"n_mfcc={self.n_mfcc} exceeds n_mel_filters={self.n_mel_filters}")
        if self.log_floor <= 0:
            raise BadConfig("log_floor must be positive")
        if not 0 < self.f0_min < self.f0_max:
            raise BadConfig(f"need 0 < f0_min < f0_max (got {self.f0_min}, {self.f0_max})")
        if not 0.0 <= self.voicing_threshold <= 1.0:
            raise BadConfig("voicing_threshold must lie in [0, 1]")
        if rate is not None:
            if rate <= 0:
                raise BadConfig(f"sample_rate={rate}")
            hi = self.upper_freq(rate)
            if not 0.0 <= self.fmin < hi <= rate / 2.0:
                raise BadConfig(f"need 0 <= fmin < fmax <= rate/2 (got {self.fmin}, {hi}, rate {rate})")
        return self


@dataclass(frozen=True)
class LLDMatrix:
    values: np.ndarray  # (T, k)
    descriptor_names: tuple

    @property
    def k(self):
        return len(self.descriptor_names)

    @property
    def n_frames(self):
        return self.values.shape[0]


def descriptor_names(cfg=LLDConfig()):
    return tuple(f"mfcc{i}" for i in range(1, cfg.n_mfcc + 1)) + SCALAR_DESCRIPTORS


def descriptor_group(name):
    return "mfcc" if name.startswith("mfcc") else name


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=32)
def mel_filterbank(n_fft, rate, n_filters, fmin, fmax):
    """Triangular filters on the mel scale, evaluated at each rfft bin frequency."""
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_filters + 2))
    freqs = np.arange(n_fft // 2 + 1) * rate / n_fft
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (mid - lo)
    falling = (hi - freqs) / (hi - mid)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb.setflags(write=False)
    return fb


@lru_cache(maxsize=32)
def dct_matrix(n):
    """Orthonormal DCT-II basis, rows indexed by coefficient order."""
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    basis = np.sqrt(2.0 / n) * np.cos(np.pi * k * (2 * j + 1) / (2 * n))
    basis[0] /= np.sqrt(2.0)
    basis.setflags(write=False)
    return basis


def _as_frames(frames):
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim == 1:
        frames = frames[None, :]
    if frames.shape[1] < 2:
        raise BadConfig("frames need at least 2 samples")
    return frames


def mfcc_frames(frames, rate, cfg=LLDConfig()):
    cfg.validate(rate)
    frames = _as_frames(frames)
    n = frames.shape[1]
    emph = frames.copy()
    emph[:, 1:] -= cfg.preemphasis * frames[:, :-1]
    mag = np.abs(np.fft.rfft(emph * np.hamming(n), axis=1))
    fb = mel_filterbank(n, float(rate), cfg.n_mel_filters, float(cfg.fmin), cfg.upper_freq(rate))
    log_e = np.log(np.maximum(mag @ fb.T, cfg.log_floor))
    # orders >= 1 are blind to the mean; removing it keeps constant inputs exactly zero
    log_e -= log_e.mean(axis=1, keepdims=True)
    return log_e @ dct_matrix(cfg.n_mel_filters)[1 : cfg.n_mfcc + 1].T


def zcr_frames(frames):
    frames = _as_frames(frames)
    positive = frames >= 0
    changes = np.count_nonzero(positive[:, 1:] != positive[:, :-1], axis=1)
    return changes / (frames.shape[1] - 1)


def _lag_band(rate, cfg):
    return int(math.ceil(rate / cfg.f0_max)), int(math.floor(rate / cfg.f0_min))


def _nccf(frames, lags):
    """Normalized cross-correlation of each mean-removed frame with its lagged self.

    r(tau) = sum x[n] x[n+tau] / sqrt(sum x[n]^2 * sum x[n+tau]^2), over the
    overlapping part, so r(0) = 1 and |r| <= 1.
    """
    x = frames - frames.mean(axis=1, keepdims=True)
    n = x.shape[1]
    energy = np.concatenate([np.zeros((x.shape[0], 1)), np.cumsum(x * x, axis=1)], axis=1)
    out = np.zeros((x.shape[0], len(lags)))
    for i, tau in enumerate(lags):
        if tau <= 0 or tau >= n - 1:
            continue
        num = np.einsum("ij,ij->i", x[:, : n - tau], x[:, tau:])
        den = np.sqrt(energy[:, n - tau] * (energy[:, n] - energy[:, tau]))
        np.divide(num, den, out=out[:, i], where=den > 0)
    return out


def voicing_and_pitch(frames, rate, cfg=LLDConfig()):
    """Return ``(voice_prob, f0)`` arrays for a block of frames."""
    cfg.validate()
    frames = _as_frames(frames)
    t, n = frames.shape
    vp = np.zeros(t)
    f0 = np.zeros(t)
    lo, hi = _lag_band(rate, cfg)
    hi = min(hi, n - 2)
    if n < rate / cfg.f0_min or hi < lo:
        return vp, f0
    lags = np.arange(lo - 1, hi + 2)
    r = _nccf(frames, lags)
    band = r[:, 1:-1]
    peak = band.max(axis=1)
    flat = np.ptp(frames, axis=1) == 0
    vp = np.where(flat, 0.0, np.clip(peak, 0.0, 1.0))
    for i in np.flatnonzero((vp >= cfg.voicing_threshold) & ~flat):
        row = r[i]
        j = _pick_peak(row, peak[i])
        prev, cur, nxt = row[j - 1], row[j], row[j + 1]
        curvature = prev - 2.0 * cur + nxt
        shift = 0.5 * (prev - nxt) / curvature if curvature < 0 else 0.0
        shift = min(max(shift, -1.0), 1.0)
        f0[i] = min(max(rate / (lags[j] + shift), cfg.f0_min), cfg.f0_max)
    return vp, f0


def _pick_peak(row, peak):
    """Index into ``row`` (padded by one lag each side) of the chosen period."""
    inner = np.arange(1, row.size - 1)
    local = (row[inner] >= row[inner - 1]) & (row[inner] >= row[inner + 1])
    strong = row[inner] >= OCTAVE_GUARD * peak
    hits = inner[local & strong]
    if hits.size:
        return int(hits[0])
    return int(inner[np.argmax(row[inner])])


def mfcc(frame, rate, cfg=LLDConfig()):
    return mfcc_frames(frame, rate, cfg)[0]


def zcr(frame):
    return float(zcr_frames(frame)[0])


def voice_prob(frame, rate, cfg=LLDConfig()):
    return float(voicing_and_pitch(frame, rate, cfg)[0][0])


def f0(frame, rate, cfg=LLDConfig()):
    return float(voicing_and_pitch(frame, rate, cfg)[1][0])


def extract_llds(frames, cfg=LLDConfig()):
    """Compute the descriptor matrix for a :class:`FrameSequence`.

    Columns: mfcc1..mfccN, zcr, voiceprob, f0.
    """
    cfg.validate(frames.sample_rate)
    block = frames.frames
    vp, pitch = voicing_and_pitch(block, frames.sample_rate, cfg)
    values = np.column_stack([mfcc_frames(block, frames.sample_rate, cfg), zcr_frames(block), vp, pitch])
    return LLDMatrix(values, descriptor_names(cfg))


def write_lld_csv(path, llds):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("frame_index",) + tuple(llds.descriptor_names))
        for t, row in enumerate(llds.values):
            writer.writerow([t] + [repr(float(v)) for v in row])
