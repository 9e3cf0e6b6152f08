"""Temporal pooling of descriptor tracks into fixed-length utterance features."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import BadConfig, DimensionMismatch

FUNCTIONAL_NAMES = (
    "mean",
    "stddev",
    "kurtosis",
    "skewness",
    "min",
    "max",
    "range",
    "minpos",
    "maxpos",
    "linregc1",
    "linregc2",
    "linregerrQ",
)
N_FUNCTIONALS = len(FUNCTIONAL_NAMES)


@dataclass(frozen=True)
class PoolConfig:
    sma_window: int = 3
    delta_window: int = 2

    def validate(self):
        if self.sma_window < 1 or self.sma_window % 2 == 0:
            raise BadConfig(f"sma_window must be odd and >= 1 (got {self.sma_window})")
        if self.delta_window < 1:
            raise BadConfig(f"delta_window must be >= 1 (got {self.delta_window})")
        return self


@dataclass(frozen=True)
class GlobalFeature:
    values: np.ndarray
    utterance_id: str = ""

    @property
    def d(self):
        return self.values.size


@dataclass(frozen=True)
class ContextFeature:
    values: np.ndarray
    ell: int
    anchor_id: str = ""


def smooth(track, sma_window=3):
    """Centered moving average; the window shrinks to the available frames at the edges."""
    if sma_window < 1 or sma_window % 2 == 0:
        raise BadConfig(f"sma_window must be odd and >= 1 (got {sma_window})")
    x = np.asarray(track, dtype=np.float64)
    if sma_window == 1:
        return x.copy()
    half = sma_window // 2
    csum = np.concatenate([[0.0], np.cumsum(x)])
    t = np.arange(x.size)
    lo = np.maximum(t - half, 0)
    hi = np.minimum(t + half + 1, x.size)
    return (csum[hi] - csum[lo]) / (hi - lo)


def delta(track, delta_window=2):
    """Regression delta over +-D frames with edge replication."""
    if delta_window < 1:
        raise BadConfig(f"delta_window must be >= 1 (got {delta_window})")
    x = np.asarray(track, dtype=np.float64)
    if x.size == 1:
        return np.zeros(1)
    t = np.arange(x.size)
    num = np.zeros(x.size)
    for n in range(1, delta_window + 1):
        ahead = x[np.minimum(t + n, x.size - 1)]
        behind = x[np.maximum(t - n, 0)]
        num += n * (ahead - behind)
    return num / (2.0 * sum(n * n for n in range(1, delta_window + 1)))


def functionals(track):
    """The 12 statistics in FUNCTIONAL_NAMES order.

    Moments are population moments; kurtosis is excess kurtosis. A constant
    track has skewness and kurtosis 0. Positions are relative, argmin/(T-1).
    """
    x = np.asarray(track, dtype=np.float64)
    n = x.size
    mean = x.mean()
    dev = x - mean
    m2 = np.mean(dev**2)
    lo, hi = x.min(), x.max()
    if hi == lo:
        skew = kurt = 0.0
    else:
        skew = np.mean(dev**3) / m2**1.5
        kurt = np.mean(dev**4) / m2**2 - 3.0
    if n == 1:
        minpos = maxpos = slope = mse = 0.0
        offset = float(x[0])
    else:
        minpos = np.argmin(x) / (n - 1)
        maxpos = np.argmax(x) / (n - 1)
        t = np.arange(n, dtype=np.float64)
        tc = t - t.mean()
        slope = np.dot(tc, dev) / np.dot(tc, tc)
        offset = mean - slope * t.mean()
        mse = np.mean((x - (offset + slope * t)) ** 2)
    return np.array([mean, np.sqrt(m2), kurt, skew, lo, hi, hi - lo, minpos, maxpos, slope, offset, mse])


def pooled_tracks(llds, cfg=PoolConfig()):
    """Smoothed tracks followed by their deltas, shape (T, 2k)."""
    cfg.validate()
    base = np.column_stack([smooth(col, cfg.sma_window) for col in llds.values.T])
    deltas = np.column_stack([delta(col, cfg.delta_window) for col in base.T])
    return np.hstack([base, deltas])


def pool_global(llds, cfg=PoolConfig(), utterance_id=""):
    """24k-dimensional utterance feature: 12 functionals over each of the 2k tracks.

    Layout is track-major: the k smoothed tracks in descriptor order, then
    their k deltas, each contributing 12 consecutive entries.
    """
    tracks = pooled_tracks(llds, cfg)
    values = np.concatenate([functionals(col) for col in tracks.T])
    return GlobalFeature(values, utterance_id)


def feature_names(descriptor_names):
    tracks = [f"{n}_sma" for n in descriptor_names] + [f"{n}_sma_de" for n in descriptor_names]
    return [f"{t}_{f}" for t in tracks for f in FUNCTIONAL_NAMES]


def track_slices(descriptor_names):
    """Map each descriptor to its (base, delta) column ranges in a pooled vector."""
    k = len(descriptor_names)
    out = {}
    for i, name in enumerate(descriptor_names):
        base = range(i * N_FUNCTIONALS, (i + 1) * N_FUNCTIONALS)
        de = range((k + i) * N_FUNCTIONALS, (k + i + 1) * N_FUNCTIONALS)
        out[name] = (base, de)
    return out


def context_indices(anchor, ell):
    if ell < 1:
        raise BadConfig(f"sequence length must be >= 1 (got {ell})")
    return [max(0, anchor - (ell - 1) + i) for i in range(ell)]


def concat_context(features, anchor, ell):
    """Concatenate the ``ell`` features of one dialog ending at ``anchor``.

    ``features`` is an (n, d) array or a list of GlobalFeature in recording
    order. Missing predecessors are filled by repeating the first utterance.
    """
    anchor_id = ""
    if len(features) and isinstance(features[0], GlobalFeature):
        anchor_id = features[anchor].utterance_id
        features = np.vstack([f.values for f in features])
    features = np.asarray(features, dtype=np.float64)
    if not 0 <= anchor < features.shape[0]:
        raise IndexError(f"anchor {anchor} outside dialog of {features.shape[0]} utterances")
    return ContextFeature(features[context_indices(anchor, ell)].reshape(-1), ell, anchor_id)


def context_matrix(features, ell):
    """Context features for every anchor of one dialog, shape (n, d*ell)."""
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    return np.vstack([features[context_indices(a, ell)].reshape(-1) for a in range(n)])


# -- feature cache ---------------------------------------------------------


def write_feature_cache(path, ids, matrix, k):
    matrix = np.asarray(matrix, dtype=np.float64)
    d = matrix.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# d={d} k={k}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["utterance_id"] + [f"f_{i}" for i in range(d)])
        for uid, row in zip(ids, matrix):
            writer.writerow([uid] + [repr(float(v)) for v in row])


def read_feature_cache(path):
    """Return ``(ids, matrix, k)`` from a cache written by :func:`write_feature_cache`."""
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("#"):
            raise DimensionMismatch(f"{path}: missing '# d=.. k=..' line")
        meta = dict(part.split("=", 1) for part in first[1:].split())
        d, k = int(meta["d"]), int(meta["k"])
        reader = csv.reader(fh)
        header = next(reader)
        if len(header) != d + 1:
            raise DimensionMismatch(f"{path}: header has {len(header) - 1} columns, expected d={d}")
        ids, rows = [], []
        for row in reader:
            if not row:
                continue
            if len(row) != d + 1:
                raise DimensionMismatch(f"{path}: row for {row[0]!r} has {len(row) - 1} values, expected {d}")
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    return ids, np.array(rows, dtype=np.float64).reshape(len(rows), d), k
