"""Command-line entry point.

Machine-readable results go to stdout as space-separated ``key=value``
lines; progress and human summaries go to stderr.

Exit codes: 0 ok, 1 usage/config, 2 data, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from collections import Counter
from pathlib import Path

import numpy as np

from . import checkpoint, kernels
from .config import RunConfig, load_config
from .corpusprep import (GloveTrainConfig, build_cooccurrence, glove_channel, glove_train, group_sort,
                         ingest_reviews, tokenize)
from .embedding import EmbeddingChannel, MultiChannelEmbedder, Vocabulary, load_glove_text, save_glove_text
from .errors import ConfigError, DataError, NumericError, ShapeError
from .model import SEQ, TREE, MODEL_KINDS, SentimentModel, param_table
from .numkernel import SeededRng
from .training import aggregate, evaluate, train, training_samples
from .treebank import TaskSetting, load_trees, parse_sexpr, SentimentTree

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
GRADCHECK_TOL = 1e-6

log = logging.getLogger("cnntreelstm")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def emit(**fields):
    print(" ".join(f"{k}={_fmt(v)}" for k, v in fields.items()), flush=True)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def human(msg):
    print(msg, file=sys.stderr, flush=True)


# --------------------------------------------------------------------------
# data assembly


def _setting_trees(split, setting: TaskSetting):
    out = []
    for tree in split.trees:
        t = setting.apply(tree)
        if t is not None:
            out.append(t)
    return out


def load_splits(cfg: RunConfig):
    if cfg.train_path is None:
        raise ConfigError("config needs a 'train' path")
    setting = cfg.train.task
    splits = {"train": _setting_trees(load_trees(cfg.train_path, "train"), setting)}
    for name, path in (("dev", cfg.dev_path), ("test", cfg.test_path)):
        splits[name] = _setting_trees(load_trees(path, name), setting) if path is not None else []
    if not splits["train"]:
        raise DataError("training split is empty after applying the task setting")
    return splits


def _wanted_words(splits):
    words = set()
    for trees in splits.values():
        for tree in trees:
            for tok in tree.leaves():
                words.add(tok)
                words.add(tok.lower())
    return words


def load_channels(cfg: RunConfig, splits) -> list[EmbeddingChannel]:
    """Channels as loaded from disk (or empty random channels), seed 0."""
    keep = _wanted_words(splits) if cfg.restrict_vocab else None
    channels = []
    for k, src in enumerate(cfg.embeddings):
        name = f"emb{k}"
        if src.is_random:
            ch = EmbeddingChannel(Vocabulary(), np.zeros((0, src.dim)), trainable=src.trainable, name=name)
        else:
            ch = load_glove_text(src.path, trainable=src.trainable, name=name, keep=keep)
            if src.dim is not None and ch.dim != src.dim:
                raise DataError(f"{src.path}: dimension {ch.dim}, config says {src.dim}")
        channels.append(ch)
    return channels


def fresh_embedder(base: list[EmbeddingChannel], seed: int) -> MultiChannelEmbedder:
    """Independent copies of the loaded channels with per-run OOV seeds."""
    out = []
    for k, ch in enumerate(base):
        out.append(EmbeddingChannel(Vocabulary(ch.vocab.words), ch.table.copy(), trainable=ch.trainable,
                                    learning_rate=ch.learning_rate, seed=seed * 1000 + k, name=ch.name))
    return MultiChannelEmbedder(out)


# --------------------------------------------------------------------------
# commands


def cmd_train(args):
    cfg = load_config(args.config)
    seed = cfg.train.seed if args.seed is None else args.seed
    if args.runs < 1:
        raise UsageError("--runs must be >= 1")
    splits = load_splits(cfg)
    base = load_channels(cfg, splits)
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    human(f"train={len(splits['train'])} dev={len(splits['dev'])} test={len(splits['test'])} sentences")
    results = []
    for k in range(args.runs):
        run_seed = seed + k
        tc = dataclasses.replace(cfg.train, seed=run_seed)
        embedder = fresh_embedder(base, run_seed)
        model = SentimentModel.build(cfg.model_spec(tuple(ch.dim for ch in embedder.channels)), embedder,
                                     seed=run_seed)
        train_samples = training_samples(model, splits["train"])
        dev = [model.prepare_sentence(t) for t in splits["dev"]]
        test = [model.prepare_sentence(t) for t in splits["test"]]

        def progress(epoch, loss, dev_acc):
            human(f"  run {k} epoch {epoch}/{tc.epochs} loss {loss:.4f} dev {dev_acc:.4f}")

        res = train(model, train_samples, dev, test, tc, on_epoch=progress if args.verbose else None)
        results.append(res)
        emit(run=k, seed=run_seed, best_dev=res.best_dev, test=res.test, best_epoch=res.best_epoch,
             updates=res.updates)
        if out_dir is not None:
            path = out_dir / f"run{k}.ckpt"
            checkpoint.save(path, model, tc.setting, {**cfg.echo(), "seed": run_seed})
            human(f"  checkpoint {path}")
    mean, std, mx = aggregate([r.test for r in results])
    emit(runs=len(results), mean=mean, std=std, max=mx)
    human(f"test accuracy over {len(results)} run(s): mean {100 * mean:.2f} std {100 * std:.2f} "
          f"max {100 * mx:.2f}")
    return EXIT_OK


def cmd_eval(args):
    model, manifest = checkpoint.load(args.checkpoint)
    setting = TaskSetting(args.setting or manifest["setting"])
    if setting.num_classes != model.spec.num_classes:
        raise ConfigError(f"setting {setting.mode} has {setting.num_classes} classes, "
                          f"checkpoint has {model.spec.num_classes}")
    trees = _setting_trees(load_trees(args.trees), setting)
    samples = [model.prepare_sentence(t) for t in trees]
    acc = evaluate(model, samples)
    emit(accuracy=acc, n=len(samples))
    human(f"{args.trees}: {100 * acc:.2f}% of {len(samples)} sentences")
    return EXIT_OK


def _unlabel(tree: SentimentTree) -> SentimentTree:
    if tree.is_leaf:
        return SentimentTree(None, token=tree.token)
    return SentimentTree(None, left=_unlabel(tree.left), right=_unlabel(tree.right))


def cmd_predict(args):
    model, _ = checkpoint.load(args.checkpoint)
    if args.tree is not None:
        tree = _unlabel(parse_sexpr(args.tree))
        sample = model.prepare_tree(tree) if model.is_tree else model.prepare_tokens(tree.leaves())
    else:
        if model.is_tree:
            raise UsageError("a tree-structured checkpoint needs --tree")
        tokens = args.tokens.split()
        if not tokens:
            raise DataError("empty token string")
        sample = model.prepare_tokens(tokens)
    probs = model.sentence_probs(sample)
    label = int(np.argmax(probs))
    emit(label=label, probs=",".join(repr(float(p)) for p in probs))
    return EXIT_OK


def _declared_dims(cfg: RunConfig):
    if cfg.channel_dims is not None:
        return cfg.channel_dims
    dims = []
    for src in cfg.embeddings:
        if src.dim is not None:
            dims.append(src.dim)
            continue
        try:
            with open(src.path, encoding="utf-8") as fh:
                first = fh.readline().split()
        except OSError as exc:
            raise DataError(f"{src.path}: {exc.strerror}") from None
        if len(first) < 2:
            raise DataError(f"{src.path}: cannot read vector dimension")
        dims.append(len(first) - 1)
    return tuple(dims)


def cmd_param_count(args):
    cfg = load_config(args.config)
    spec = cfg.model_spec(_declared_dims(cfg))
    rows = param_table(spec)
    for name, shape, count in rows:
        emit(tensor=name, shape="x".join(map(str, shape)), count=count)
    total = sum(c for _, _, c in rows)
    emit(total=total)
    human(f"{spec.kind}, channels {list(spec.channel_dims)}: {total:,} trainable parameters (embeddings excluded)")
    return EXIT_OK


def cmd_gradcheck(args):
    from .oracle import oracle_gradient_check
    from .toy import gradcheck_instance
    from .training import model_gradient_check

    kinds = MODEL_KINDS if args.model == "all" else (args.model,)
    worst = 0.0
    for kind in kinds:
        per_tensor: dict[str, float] = {}
        for k in range(args.instances):
            model, sample = gradcheck_instance(kind, seed=args.seed + k)
            if args.inject_fault:
                model.fault = args.inject_fault if args.inject_fault != "auto" else (
                    "tree.U" if kind == TREE else "lstm.Ur")
            if args.oracle == "extended":
                err, per = oracle_gradient_check(model, sample, eps=args.eps)
            else:
                err, per = model_gradient_check(model, sample, eps=args.eps)
            for name, e in per.items():
                per_tensor[name] = max(per_tensor.get(name, 0.0), e)
        kind_worst = max(per_tensor.values())
        worst = max(worst, kind_worst)
        for name in sorted(per_tensor):
            emit(model=kind, tensor=name, max_rel_error=per_tensor[name])
        emit(model=kind, instances=args.instances, max_rel_error=kind_worst)
    ok = worst <= GRADCHECK_TOL
    human(f"gradient check {'passed' if ok else 'FAILED'}: max relative error {worst:.3e} "
          f"(tolerance {GRADCHECK_TOL:g})")
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_prep_amazon(args):
    stats = Counter()
    try:
        with open(args.input, encoding="utf-8") as fh:
            records = ingest_reviews(fh, stats)
    except OSError as exc:
        raise DataError(f"{args.input}: {exc.strerror}") from None
    if not records:
        raise DataError(f"{args.input}: no valid review records")
    lines = []
    for rec in group_sort(records):
        text = " ".join(rec.review_text.split()) if args.raw else " ".join(tokenize(rec.review_text))
        lines.append(text + "\n")
    Path(args.output).write_text("".join(lines), encoding="utf-8")
    emit(records=len(records), skipped=stats["skipped"], products=len({r.asin for r in records}))
    return EXIT_OK


_GLOVE_KEYS = {f.name: f.type for f in dataclasses.fields(GloveTrainConfig)}


def _glove_config(args) -> GloveTrainConfig:
    values = {}
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{args.config}: {exc.strerror}") from None
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{args.config}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in _GLOVE_KEYS:
                raise ConfigError(f"{args.config}:{lineno}: unknown key {key!r}")
            values[key] = value
    for key in _GLOVE_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    kwargs = {}
    for key, value in values.items():
        typ = _GLOVE_KEYS[key]
        try:
            if typ in ("bool", bool):
                kwargs[key] = value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes")
            elif typ in ("int", int):
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {value!r}") from None
    return GloveTrainConfig(**kwargs)


def cmd_train_glove(args):
    config = _glove_config(args)
    try:
        with open(args.corpus, encoding="utf-8") as fh:
            documents = [line.split() for line in fh]
    except OSError as exc:
        raise DataError(f"{args.corpus}: {exc.strerror}") from None
    table, vocab = build_cooccurrence(documents, config.window, config.min_count, config.reset_at_boundaries)
    model = glove_train(table, config)
    save_glove_text(glove_channel(model, vocab), args.output)
    emit(vocab=len(vocab), pairs=len(table), iterations=config.iterations,
         initial_cost=model.history[0], final_cost=model.history[-1])
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cnntreelstm", description="CNN + Tree-LSTM sentiment classifiers")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train one or more seeded runs from a config file")
    t.add_argument("config")
    t.add_argument("--seed", type=int, default=None, help="first run seed (default: config seed)")
    t.add_argument("--runs", type=int, default=1)
    t.add_argument("--out", help="directory for best-dev checkpoints run<k>.ckpt")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="root accuracy of a checkpoint on a tree file")
    e.add_argument("checkpoint")
    e.add_argument("trees")
    e.add_argument("--setting", choices=("fine-grained", "binary"))
    e.set_defaults(func=cmd_eval)

    pr = sub.add_parser("predict", help="classify one sentence")
    pr.add_argument("checkpoint")
    g = pr.add_mutually_exclusive_group(required=True)
    g.add_argument("--tree", help="bracketed tree, labels are ignored")
    g.add_argument("--tokens", help="whitespace-separated tokens (sequence model only)")
    pr.set_defaults(func=cmd_predict)

    pc = sub.add_parser("param-count", help="trainable parameters per tensor (embeddings excluded)")
    pc.add_argument("config")
    pc.set_defaults(func=cmd_param_count)

    gc = sub.add_parser("gradcheck", help="finite-difference gradient check on small random instances")
    gc.add_argument("--model", choices=MODEL_KINDS + ("all",), default="all")
    gc.add_argument("--size", choices=("small",), default="small")
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--instances", type=int, default=3)
    gc.add_argument("--eps", type=float, default=1e-5)
    gc.add_argument("--oracle", choices=("extended", "float64"), default="extended",
                    help="finite differences of the independent extended-precision loss, "
                         "or of the model's own float64 forward pass")
    gc.add_argument("--inject-fault", nargs="?", const="auto", default=None, metavar="TENSOR",
                    help="flip the sign of one tensor's gradient (checks the checker)")
    gc.set_defaults(func=cmd_gradcheck)

    pa = sub.add_parser("prep-amazon", help="group, sort and tokenize a JSON-lines review dump")
    pa.add_argument("input")
    pa.add_argument("output")
    pa.add_argument("--raw", action="store_true", help="keep review text untokenized")
    pa.set_defaults(func=cmd_prep_amazon)

    tg = sub.add_parser("train-glove", help="train word vectors on a one-document-per-line corpus")
    tg.add_argument("corpus")
    tg.add_argument("output")
    tg.add_argument("--config", help="key = value file with GloVe settings")
    tg.add_argument("--dim", type=int)
    tg.add_argument("--window", type=int)
    tg.add_argument("--min-count", dest="min_count", type=int)
    tg.add_argument("--iterations", type=int)
    tg.add_argument("--x-max", dest="x_max", type=float)
    tg.add_argument("--alpha", type=float)
    tg.add_argument("--learning-rate", dest="learning_rate", type=float)
    tg.add_argument("--seed", type=int)
    tg.add_argument("--reset-at-boundaries", dest="reset_at_boundaries", action="store_true", default=None)
    tg.set_defaults(func=cmd_train_glove)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    log.debug("kernel backend: %s", kernels.BACKEND)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        human(f"error: {exc}")
        return EXIT_USAGE
    except (DataError, ShapeError, FileNotFoundError) as exc:
        human(f"error: {exc}")
        return EXIT_DATA
    except NumericError as exc:
        human(f"numeric failure: {exc}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
