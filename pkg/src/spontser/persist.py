"""Binary model container.

Layout (little-endian)::

    b"SESM" | u32 version | u16 len + kind | u32 len + JSON metadata
    | u32 n_arrays | n x (u16 len + name | u32 rows | u32 cols | rows*cols f64)
    | u32 CRC32 of every preceding byte

Weights are stored as raw IEEE-754 doubles, so a save/load round trip is
bit-exact.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import CorruptFile, SerializationError, VersionMismatch
from .models import BaselineModel, HierarchicalModel, JointEmotionModel, Standardizer
from .svm import BinarySVM, JointModel, KernelSpec, OneVsRestSVM

MAGIC = b"SESM"
FORMAT_VERSION = 1


class _Writer:
    def __init__(self):
        self.arrays = []

    def add(self, name, arr):
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        self.arrays.append((name, arr))


def _dump_binary(w, prefix, m):
    w.add(f"{prefix}.sv", m.support_vectors.reshape(-1, m.dim))
    w.add(f"{prefix}.coef", m.dual_coef)
    w.add(f"{prefix}.bias", m.bias)
    w.add(f"{prefix}.idx", m.support_indices.astype(np.float64))
    w.add(f"{prefix}.C", m.C)
    if m.kernel.kind == "rbf":
        w.add(f"{prefix}.gamma", m.kernel.gamma)
    return {"kernel": m.kernel.kind, "n_iter": m.n_iter, "converged": m.converged, "dim": m.dim}


def _load_binary(arrays, prefix, meta):
    gamma = float(arrays[f"{prefix}.gamma"][0, 0]) if meta["kernel"] == "rbf" else None
    return BinarySVM(
        support_vectors=arrays[f"{prefix}.sv"].reshape(-1, meta["dim"]),
        dual_coef=arrays[f"{prefix}.coef"].reshape(-1),
        bias=float(arrays[f"{prefix}.bias"][0, 0]),
        kernel=KernelSpec(meta["kernel"], gamma),
        support_indices=arrays[f"{prefix}.idx"].reshape(-1).astype(np.int64),
        C=float(arrays[f"{prefix}.C"][0, 0]),
        n_iter=meta["n_iter"],
        converged=meta["converged"],
    )


def _dump_ovr(w, prefix, model):
    machines = []
    for c, m in enumerate(model.machines):
        machines.append(None if m is None else _dump_binary(w, f"{prefix}.c{c}", m))
    return {"machines": machines}


def _load_ovr(arrays, prefix, meta):
    return OneVsRestSVM(
        tuple(None if mm is None else _load_binary(arrays, f"{prefix}.c{c}", mm) for c, mm in enumerate(meta["machines"]))
    )


def _dump_scaler(w, scaler):
    w.add("scaler.mean", scaler.mean)
    w.add("scaler.scale", scaler.scale)


def _load_scaler(arrays):
    return Standardizer(arrays["scaler.mean"].reshape(-1), arrays["scaler.scale"].reshape(-1))


def model_bytes(model):
    w = _Writer()
    kind = model.kind
    _dump_scaler(w, model.scaler)
    meta = {"config": model.config}
    if kind == "baseline":
        meta["emo"] = _dump_ovr(w, "emo", model.emo_clf)
    elif kind == "hierarchical":
        meta["ell"] = model.ell
        meta["spont"] = _dump_binary(w, "spont", model.spont_clf)
        meta["emo0"] = _dump_ovr(w, "emo0", model.emo_clf_scripted)
        meta["emo1"] = _dump_ovr(w, "emo1", model.emo_clf_spontaneous)
    elif kind == "joint":
        j = model.joint
        w.add("joint.W", j.W)
        w.add("joint.C", j.C)
        w.add("joint.final_loss", j.final_loss)
        w.add("joint.loss_history", np.asarray(j.loss_history, dtype=np.float64))
        meta["epochs"] = j.epochs
    else:
        raise SerializationError(f"cannot serialize model kind {kind!r}")

    kind_b = kind.encode("ascii")
    meta_b = json.dumps(meta, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", FORMAT_VERSION), struct.pack("<H", len(kind_b)), kind_b]
    parts += [struct.pack("<I", len(meta_b)), meta_b, struct.pack("<I", len(w.arrays))]
    for name, arr in w.arrays:
        name_b = name.encode("ascii")
        parts += [struct.pack("<H", len(name_b)), name_b, struct.pack("<II", *arr.shape)]
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def save_model(model, path):
    Path(path).write_bytes(model_bytes(model))


class _Reader:
    def __init__(self, data, pos):
        self.data = data
        self.pos = pos

    def take(self, n):
        if self.pos + n > len(self.data):
            raise CorruptFile("unexpected end of model file")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def model_from_bytes(data):
    if len(data) < 8 or data[:4] != MAGIC:
        raise SerializationError("not a model file (bad magic)")
    (version,) = struct.unpack("<I", data[4:8])
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"model file version {version}, this build reads version {FORMAT_VERSION}")
    if len(data) < 12:
        raise CorruptFile("model file truncated")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CorruptFile("checksum mismatch (truncated or damaged file)")
    r = _Reader(body, 8)
    try:
        (klen,) = r.unpack("<H")
        kind = r.take(klen).decode("ascii")
        (mlen,) = r.unpack("<I")
        meta = json.loads(r.take(mlen).decode("utf-8"))
        (n_arrays,) = r.unpack("<I")
        arrays = {}
        for _ in range(n_arrays):
            (nlen,) = r.unpack("<H")
            name = r.take(nlen).decode("ascii")
            rows, cols = r.unpack("<II")
            arrays[name] = np.frombuffer(r.take(8 * rows * cols), dtype="<f8").astype(np.float64).reshape(rows, cols)
    except (UnicodeDecodeError, ValueError) as exc:
        raise CorruptFile(f"unreadable model file: {exc}") from exc

    try:
        scaler = _load_scaler(arrays)
        config = meta.get("config", {})
        if kind == "baseline":
            return BaselineModel(scaler, _load_ovr(arrays, "emo", meta["emo"]), config)
        if kind == "hierarchical":
            return HierarchicalModel(
                scaler,
                _load_binary(arrays, "spont", meta["spont"]),
                _load_ovr(arrays, "emo0", meta["emo0"]),
                _load_ovr(arrays, "emo1", meta["emo1"]),
                int(meta["ell"]),
                config,
            )
        if kind == "joint":
            joint = JointModel(
                W=arrays["joint.W"],
                C=float(arrays["joint.C"][0, 0]),
                final_loss=float(arrays["joint.final_loss"][0, 0]),
                epochs=int(meta["epochs"]),
                loss_history=tuple(arrays["joint.loss_history"].reshape(-1).tolist()),
            )
            return JointEmotionModel(scaler, joint, config)
    except KeyError as exc:
        raise CorruptFile(f"model file lacks field {exc}") from exc
    raise SerializationError(f"unknown model kind {kind!r}")


def load_model(path):
    return model_from_bytes(Path(path).read_bytes())
