"""Flat ``key = value`` run configuration files.

Blank lines and ``#`` comments are ignored. Unknown keys are an error.
Relative paths are resolved against the directory holding the file.

Example::

    model = cnn-tree-lstm
    memory = 150
    filters = 3:100,5:100
    setting = binary
    train = sst/train.txt
    dev = sst/dev.txt
    test = sst/test.txt
    embeddings = glove.840B.300d.txt,random:300
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .model import TREE, ModelSpec
from .training import TrainConfig

_BOOL = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


def _bool(value: str) -> bool:
    try:
        return _BOOL[value.lower()]
    except KeyError:
        raise ConfigError(f"expected a boolean, got {value!r}") from None


def parse_filters(text: str) -> tuple:
    """``"3:100,5:100"`` -> ((3, 100), (5, 100))."""
    out = []
    for part in text.split(","):
        try:
            width, count = part.split(":")
            out.append((int(width), int(count)))
        except ValueError:
            raise ConfigError(f"bad filter spec {part!r}, expected width:count") from None
        width, count = out[-1]
        if width < 1 or width % 2 == 0:
            raise ConfigError(f"filter width must be odd and positive, got {width}")
        if count < 1:
            raise ConfigError(f"filter count must be positive, got {count}")
    if len({w for w, _ in out}) != len(out):
        raise ConfigError(f"duplicate filter width in {text!r}")
    return tuple(out)


@dataclass(frozen=True)
class EmbeddingSource:
    """A pretrained text file, or ``random:<dim>`` for a seeded random channel."""

    path: Optional[Path] = None
    dim: Optional[int] = None
    trainable: bool = True

    @property
    def is_random(self):
        return self.path is None


@dataclass
class RunConfig:
    model: str = TREE
    memory: int = 150
    filters: tuple = ((3, 100), (5, 100))
    activation: str = "relu"
    train: TrainConfig = field(default_factory=TrainConfig)
    train_path: Optional[Path] = None
    dev_path: Optional[Path] = None
    test_path: Optional[Path] = None
    embeddings: tuple = (EmbeddingSource(dim=300),)
    restrict_vocab: bool = True
    channel_dims: Optional[tuple] = None

    def model_spec(self, channel_dims=None) -> ModelSpec:
        dims = channel_dims or self.channel_dims or self.declared_dims()
        t = self.train
        return ModelSpec(kind=self.model, num_classes=t.task.num_classes, memory=self.memory,
                         filters=self.filters, channel_dims=tuple(dims), activation=self.activation,
                         conv_input_dropout=t.conv_input_dropout, conv_output_dropout=t.conv_output_dropout,
                         output_dropout=t.output_dropout)

    def declared_dims(self) -> tuple:
        dims = []
        for src in self.embeddings:
            if src.dim is None:
                raise ConfigError("channel dimension unknown without loading the file; set channel_dims")
            dims.append(src.dim)
        return tuple(dims)

    def echo(self) -> dict:
        """JSON-ready summary stored in checkpoints."""
        out = dataclasses.asdict(self.train)
        out.update(model=self.model, memory=self.memory, filters=[list(f) for f in self.filters],
                   activation=self.activation)
        return out


_TRAIN_FIELDS = {f.name: f.type for f in dataclasses.fields(TrainConfig)}
_PATH_KEYS = {"train": "train_path", "dev": "dev_path", "test": "test_path"}
_OTHER_KEYS = {"model", "memory", "filters", "activation", "embeddings", "trainable",
               "restrict_vocab", "channel_dims"}


def parse_config(text: str, base_dir=".") -> RunConfig:
    base = Path(base_dir)
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _TRAIN_FIELDS and key not in _PATH_KEYS and key not in _OTHER_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    train_kwargs = {}
    for key, typ in _TRAIN_FIELDS.items():
        if key not in raw:
            continue
        value = raw[key]
        try:
            if typ in ("float", float):
                train_kwargs[key] = float(value)
            elif typ in ("int", int):
                train_kwargs[key] = int(value)
            else:
                train_kwargs[key] = value
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {value!r}") from None
    cfg = RunConfig(train=TrainConfig(**train_kwargs))

    if "model" in raw:
        cfg.model = raw["model"]
    if "memory" in raw:
        try:
            cfg.memory = int(raw["memory"])
        except ValueError:
            raise ConfigError(f"memory: cannot parse {raw['memory']!r}") from None
        if cfg.memory < 1:
            raise ConfigError("memory must be >= 1")
    if "filters" in raw:
        cfg.filters = parse_filters(raw["filters"])
    if "activation" in raw:
        cfg.activation = raw["activation"]
    if "restrict_vocab" in raw:
        cfg.restrict_vocab = _bool(raw["restrict_vocab"])
    if "channel_dims" in raw:
        try:
            cfg.channel_dims = tuple(int(x) for x in raw["channel_dims"].split(","))
        except ValueError:
            raise ConfigError(f"channel_dims: cannot parse {raw['channel_dims']!r}") from None
    for key, attr in _PATH_KEYS.items():
        if key in raw:
            setattr(cfg, attr, base / raw[key])

    if "embeddings" in raw:
        items = [s.strip() for s in raw["embeddings"].split(",")]
        flags = [s.strip() for s in raw.get("trainable", "true").split(",")]
        if len(flags) == 1:
            flags = flags * len(items)
        if len(flags) != len(items):
            raise ConfigError("trainable must list one flag per embedding channel")
        sources = []
        for item, flag in zip(items, flags):
            if item.startswith("random:"):
                try:
                    dim = int(item.split(":", 1)[1])
                except ValueError:
                    raise ConfigError(f"bad random channel {item!r}") from None
                if dim < 1:
                    raise ConfigError("random channel dimension must be >= 1")
                sources.append(EmbeddingSource(dim=dim, trainable=_bool(flag)))
            else:
                sources.append(EmbeddingSource(path=base / item, trainable=_bool(flag)))
        cfg.embeddings = tuple(sources)
    elif "trainable" in raw:
        cfg.embeddings = tuple(dataclasses.replace(s, trainable=_bool(raw["trainable"])) for s in cfg.embeddings)

    if cfg.channel_dims is not None and len(cfg.channel_dims) != len(cfg.embeddings):
        raise ConfigError("channel_dims must list one dimension per embedding channel")
    cfg.model_spec(cfg.channel_dims or tuple(s.dim or 1 for s in cfg.embeddings))  # validate early
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(text, path.parent)
