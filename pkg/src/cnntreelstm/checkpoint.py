"""Binary model checkpoints.

Layout (all integers little-endian)::

    b"CTLSTM1\\n"
    u64 manifest length, manifest (UTF-8 JSON, sorted keys)
    u32 tensor count
    per tensor: u32 name length, name, u64 rows, u64 cols, rows*cols f64

Tensors of rank > 2 are stored flattened to (shape[0], rest); vectors as
(n, 1). The manifest records every full shape, the model spec, the
embedding vocabularies and an echo of the training config.
"""
from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

from .embedding import EmbeddingChannel, MultiChannelEmbedder, Vocabulary
from .errors import DataError, ShapeError
from .model import ModelSpec, SentimentModel

MAGIC = b"CTLSTM1\n"
FORMAT_VERSION = 1


def _as_2d(theta: np.ndarray) -> np.ndarray:
    if theta.ndim == 1:
        return theta.reshape(-1, 1)
    return theta.reshape(theta.shape[0], -1)


def spec_to_dict(spec: ModelSpec) -> dict:
    return {
        "kind": spec.kind,
        "num_classes": spec.num_classes,
        "memory": spec.memory,
        "filters": [list(f) for f in spec.filters],
        "channel_dims": list(spec.channel_dims),
        "activation": spec.activation,
        "conv_input_dropout": spec.conv_input_dropout,
        "conv_output_dropout": spec.conv_output_dropout,
        "output_dropout": spec.output_dropout,
    }


def spec_from_dict(d: dict) -> ModelSpec:
    d = dict(d)
    d["filters"] = tuple(tuple(int(x) for x in f) for f in d["filters"])
    d["channel_dims"] = tuple(int(x) for x in d["channel_dims"])
    return ModelSpec(**d)


def model_tensors(model: SentimentModel) -> dict[str, np.ndarray]:
    out = dict(model.params())
    for ch in model.embedder.channels:
        out[f"embedding.{ch.name}"] = ch.table
    return out


def to_bytes(model: SentimentModel, setting: str, config: dict | None = None) -> bytes:
    tensors = model_tensors(model)
    manifest = {
        "format": FORMAT_VERSION,
        "spec": spec_to_dict(model.spec),
        "setting": setting,
        "channels": [{"name": ch.name, "dim": ch.dim, "trainable": ch.trainable,
                      "learning_rate": ch.learning_rate, "seed": ch.seed,
                      "vocab": list(ch.vocab.words)} for ch in model.embedder.channels],
        "shapes": {name: list(t.shape) for name, t in tensors.items()},
        "config": config or {},
    }
    text = json.dumps(manifest, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<Q", len(text)))
    buf.write(text)
    buf.write(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        mat = _as_2d(np.asarray(tensors[name], dtype=np.float64))
        raw = name.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<QQ", *mat.shape))
        buf.write(np.ascontiguousarray(mat, dtype="<f8").tobytes())
    return buf.getvalue()


def save(path, model: SentimentModel, setting: str, config: dict | None = None):
    Path(path).write_bytes(to_bytes(model, setting, config))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise DataError("truncated checkpoint")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def from_bytes(data: bytes):
    """Returns (model, manifest). Every stored tensor is checked against the
    shape the manifest declares and the shape the rebuilt model expects."""
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise DataError("not a checkpoint (bad magic)")
    (mlen,) = r.unpack("<Q")
    try:
        manifest = json.loads(r.take(mlen).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"corrupt checkpoint manifest: {exc}") from None
    if manifest.get("format") != FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint format {manifest.get('format')!r}")
    (count,) = r.unpack("<I")
    stored = {}
    for _ in range(count):
        (nlen,) = r.unpack("<I")
        name = r.take(nlen).decode("utf-8")
        rows, cols = r.unpack("<QQ")
        stored[name] = np.frombuffer(r.take(8 * rows * cols), dtype="<f8").astype(np.float64).reshape(rows, cols)
    if r.pos != len(data):
        raise DataError("trailing bytes after last tensor")

    shapes = manifest["shapes"]
    if set(shapes) != set(stored):
        raise ShapeError(f"tensor set {sorted(stored)} does not match manifest {sorted(shapes)}")
    for name, mat in stored.items():
        shape = tuple(shapes[name])
        if mat.size != int(np.prod(shape)) or _as_2d(np.empty(shape)).shape != mat.shape:
            raise ShapeError(f"{name}: stored {mat.shape} inconsistent with declared {shape}")

    spec = spec_from_dict(manifest["spec"])
    channels = []
    for c in manifest["channels"]:
        key = f"embedding.{c['name']}"
        if key not in stored:
            raise ShapeError(f"missing embedding table {key}")
        table = stored[key].reshape(shapes[key])
        if table.shape != (len(c["vocab"]), c["dim"]):
            raise ShapeError(f"{key}: table {table.shape} does not match vocabulary/dim")
        channels.append(EmbeddingChannel(Vocabulary(c["vocab"]), table, trainable=c["trainable"],
                                         learning_rate=c["learning_rate"], seed=c["seed"], name=c["name"]))
    model = SentimentModel.build(spec, MultiChannelEmbedder(channels))
    for name, theta in model.params().items():
        if name not in stored:
            raise ShapeError(f"missing tensor {name}")
        if tuple(shapes[name]) != theta.shape:
            raise ShapeError(f"{name}: declared {tuple(shapes[name])}, model expects {theta.shape}")
        theta[...] = stored[name].reshape(theta.shape)
    extra = set(stored) - set(model_tensors(model))
    if extra:
        raise ShapeError(f"unexpected tensors {sorted(extra)}")
    return model, manifest


def load(path):
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    return from_bytes(data)
