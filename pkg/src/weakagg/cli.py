"""Command line interface.

Subcommands: `synth` (generate a synthetic corpus), `train` (fit on a corpus
and optionally save a checkpoint), `eval` (score a checkpoint on a corpus),
`protocol individual|universal|finetune` (the experiment protocols), and
`inspect-corpus` (summarize a corpus tree).

Settings resolve in precedence order: command-line flags, then the `--config`
JSON file (sections `train`, `synth`, `filter`), then the `WEAKAGG_SEED`
environment variable (seed only), then builtin defaults.

Exit status: 0 on success, 1 on usage errors, 2 on data or format errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness
from .aggregator import ModelConfig
from .dataset import (CorpusFilter, SynthConfig, bags_by_person, folds_universal, load_corpus,
                      persons, save_corpus, synth_generate)
from .errors import ConfigError, InsufficientDataError, WeakaggError
from .harness import TrainConfig, run_finetune, run_individual, run_universal, train
from .optim import AdamWConfig

TRUTH_FILENAME = "synth_truth.json"


class UsageError(Exception):
    """Bad command line; maps to exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


# --- config file ------------------------------------------------------------

_SECTIONS = ("train", "synth", "filter")


def _read_config(path) -> dict:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid config JSON ({exc})") from None
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: config root must be a JSON object")
    unknown = sorted(set(payload) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"{path}: unknown config sections {unknown}")
    return payload


def _build(cls, data: dict, where: str):
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _resolve_seed(flag_seed, config_seed, fallback: int) -> int:
    if flag_seed is not None:
        return flag_seed
    if config_seed is not None:
        if not isinstance(config_seed, int):
            raise ConfigError(f"config seed must be an integer, got {config_seed!r}")
        return config_seed
    env = os.environ.get("WEAKAGG_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"WEAKAGG_SEED must be an integer, got {env!r}") from None
    return fallback


def _corpus_filter(args, config: dict) -> CorpusFilter:
    section = dict(config.get("filter", {}))
    if "excluded_persons" in section:
        section["excluded_persons"] = frozenset(section["excluded_persons"])
    filt = _build(CorpusFilter, section, "config.filter")
    updates = {}
    if getattr(args, "include_all_persons", False):
        updates["excluded_persons"] = frozenset()
    elif getattr(args, "exclude_persons", None) is not None:
        names = [p.strip() for p in args.exclude_persons.split(",") if p.strip()]
        updates["excluded_persons"] = frozenset(names)
    if getattr(args, "exclude_warmup", None) is not None:
        updates["exclude_warmup_trial"] = args.exclude_warmup
    if getattr(args, "max_frames", None) is not None:
        updates["max_frames_per_bag"] = args.max_frames
    return replace(filt, **updates) if updates else filt


def _load(args, config: dict):
    bags, stats = load_corpus(args.data, _corpus_filter(args, config))
    if not bags:
        raise InsufficientDataError(f"{args.data}: no bags available after filtering")
    return bags, stats


def _train_config(args, config: dict, protocol: str, corpus_dim: int | None) -> TrainConfig:
    section = dict(config.get("train", {}))
    model_data = dict(section.pop("model", {}))
    opt_data = dict(section.pop("optimizer", {}))
    for name in ("embed_dim", "proj_dim", "score_dim", "transform_dim"):
        value = getattr(args, name, None)
        if value is not None:
            model_data[name] = value
    if "embed_dim" not in model_data and corpus_dim is not None:
        model_data["embed_dim"] = corpus_dim
    if getattr(args, "lr", None) is not None:
        opt_data["lr"] = args.lr
    if getattr(args, "weight_decay", None) is not None:
        opt_data["weight_decay"] = args.weight_decay

    config_epochs = section.pop("epochs", None)
    epochs = args.epochs if args.epochs is not None else config_epochs
    if epochs is None:
        epochs = 100 if protocol == "universal" else 50
    seed = _resolve_seed(args.seed, section.pop("seed", None), 0)
    shuffle = section.pop("shuffle_each_epoch", True)
    section.pop("protocol", None)  # the subcommand decides the protocol
    unknown = sorted(section)
    if unknown:
        raise ConfigError(f"config.train: unknown keys {unknown}")
    try:
        return TrainConfig(model=_build(ModelConfig, model_data, "config.train.model"),
                           optimizer=_build(AdamWConfig, opt_data, "config.train.optimizer"),
                           epochs=int(epochs), seed=seed, shuffle_each_epoch=bool(shuffle),
                           protocol=protocol)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# --- subcommand handlers ----------------------------------------------------

def _cmd_synth(args) -> int:
    config = _read_config(args.config) if args.config else {}
    section = dict(config.get("synth", {}))
    overrides = {name: getattr(args, name) for name in
                 ("participants", "bags_per_participant", "frames_per_bag", "embed_dim",
                  "key_frame_signal_dim", "noise_std")
                 if getattr(args, name) is not None}
    section.update(overrides)
    section["seed"] = _resolve_seed(args.seed, section.get("seed"), SynthConfig().seed)
    cfg = _build(SynthConfig, section, "config.synth")

    bags, truth = synth_generate(cfg)
    out = Path(args.out)
    save_corpus(bags, out)
    payload = {
        "key_frames": truth.key_frames,
        "functional": truth.functional.tolist(),
        "config": dataclasses.asdict(cfg),
    }
    (out / TRUTH_FILENAME).write_text(json.dumps(payload, indent=2), encoding="utf-8")
    print(f"wrote {len(bags)} bags for {cfg.participants} participants to {out}")
    return 0


def _cmd_train(args) -> int:
    config = _read_config(args.config) if args.config else {}
    bags, _ = _load(args, config)
    cfg = _train_config(args, config, "plain", bags[0].frames.shape[1])
    ckpt, log = train(bags, cfg)
    print(f"trained {cfg.epochs} epochs on {len(bags)} bags; "
          f"final loss {log.epoch_losses[-1]!r}")
    if args.out:
        harness.save_checkpoint(ckpt, args.out)
        print(f"wrote checkpoint to {args.out}")
    return 0


def _format_target(name: str, cells) -> str:
    parts = [f"{metric}={'undefined' if value is None else repr(value)}"
             for metric, value in zip(("ccc", "pcc", "rmse"), cells.values())]
    return f"{name}: " + " ".join(parts)


def _cmd_eval(args) -> int:
    config = _read_config(args.config) if args.config else {}
    ckpt = harness.load_checkpoint(args.ckpt)
    bags, _ = _load(args, config)
    rep = harness.evaluate(ckpt, bags)
    print(f"bags: {len(bags)}")
    print(_format_target("valence", rep.valence))
    print(_format_target("arousal", rep.arousal))
    return 0


def _emit_table(result_table: str, out_path) -> None:
    if out_path:
        Path(out_path).write_text(result_table, encoding="utf-8")
        print(f"wrote {out_path}")
    else:
        print(result_table, end="")


def _cmd_protocol_individual(args) -> int:
    config = _read_config(args.config) if args.config else {}
    bags, _ = _load(args, config)
    cfg = _train_config(args, config, "individual", bags[0].frames.shape[1])
    result = run_individual(bags, cfg)
    _emit_table(result.table(), args.out_table)
    return 0


def _universal_fold_groups(corpus, args) -> list[frozenset]:
    if args.holdout:
        groups = []
        for raw in args.holdout:
            group = frozenset(p.strip() for p in raw.split(",") if p.strip())
            if not group:
                raise UsageError("--holdout needs at least one person name")
            groups.append(group)
        if len(groups) < 2:
            raise UsageError("universal protocol needs at least two --holdout groups")
        return groups
    k = args.num_folds
    names = persons(corpus)
    if k < 2:
        raise UsageError(f"--num-folds must be >= 2, got {k}")
    if k > len(names):
        raise ConfigError(f"cannot make {k} folds from {len(names)} persons")
    return [frozenset(names[i::k]) for i in range(k)]


def _cmd_protocol_universal(args) -> int:
    config = _read_config(args.config) if args.config else {}
    bags, _ = _load(args, config)
    cfg = _train_config(args, config, "universal", bags[0].frames.shape[1])
    folds = folds_universal(bags, _universal_fold_groups(bags, args))
    result = run_universal(bags, cfg, folds)
    print(f"best fold: {result.best_fold} "
          f"(scores: {', '.join(repr(s) for s in result.fold_scores)})")
    if args.out_ckpt:
        harness.save_checkpoint(result.checkpoint, args.out_ckpt)
        print(f"wrote checkpoint to {args.out_ckpt}")
    _emit_table(result.table(), args.out_table)
    return 0


def _cmd_protocol_finetune(args) -> int:
    config = _read_config(args.config) if args.config else {}
    ckpt = harness.load_checkpoint(args.ckpt)
    bags, _ = _load(args, config)
    cfg = _train_config(args, config, "finetune", bags[0].frames.shape[1])
    result = run_finetune(ckpt, bags, cfg)
    _emit_table(result.table(), args.out_table)
    return 0


def _cmd_inspect(args) -> int:
    config = _read_config(args.config) if args.config else {}
    bags, stats = load_corpus(args.data, _corpus_filter(args, config))
    print(f"root: {args.data}")
    print(f"bags: {len(bags)}")
    if bags:
        by_person = bags_by_person(bags)
        print("persons: " + ", ".join(f"{p} ({len(b)})" for p, b in by_person.items()))
        frames = [bag.frames.shape[0] for bag in bags]
        print(f"embedding dim: {bags[0].frames.shape[1]}")
        print(f"frames per bag: {min(frames)}..{max(frames)}")
        for name, column in (("valence", [b.label.valence for b in bags]),
                             ("arousal", [b.label.arousal for b in bags])):
            print(f"{name}: mean={np.mean(column):.6f} std={np.std(column):.6f}")
    print(f"skipped (no reference entry): {stats.skip_count}")
    print(f"dropped (all frames excluded): {len(stats.dropped_empty)}")
    return 0


# --- parser -----------------------------------------------------------------

def _add_common(parser, *, data=False, seed=True):
    parser.add_argument("--config", metavar="PATH", help="JSON config file")
    if seed:
        parser.add_argument("--seed", type=int)
    if data:
        parser.add_argument("--data", required=True, metavar="DIR", help="corpus root directory")
        parser.add_argument("--exclude-persons", metavar="P01,P02,...",
                            help="replace the default excluded-person set")
        parser.add_argument("--include-all-persons", action="store_true",
                            help="clear the excluded-person set")
        parser.add_argument("--exclude-warmup", action=argparse.BooleanOptionalAction,
                            default=None, help="drop the T00 warm-up trial")
        parser.add_argument("--max-frames", type=int, metavar="N",
                            help="subsample bags down to N frames")


def _add_train_flags(parser):
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--weight-decay", type=float)
    parser.add_argument("--embed-dim", type=int)
    parser.add_argument("--proj-dim", type=int)
    parser.add_argument("--score-dim", type=int)
    parser.add_argument("--transform-dim", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="weakagg",
                     description="Weakly supervised attention aggregation over frame embeddings.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    _add_common(p)
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--participants", type=int)
    p.add_argument("--bags-per-participant", type=int)
    p.add_argument("--frames-per-bag", type=int)
    p.add_argument("--embed-dim", type=int)
    p.add_argument("--key-frame-signal-dim", type=int)
    p.add_argument("--noise-std", type=float)
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("train", help="train on a corpus")
    _add_common(p, data=True)
    _add_train_flags(p)
    p.add_argument("--out", metavar="PATH", help="checkpoint output path")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a corpus")
    _add_common(p, data=True, seed=False)
    p.add_argument("--ckpt", required=True, metavar="PATH")
    p.set_defaults(handler=_cmd_eval)

    proto = sub.add_parser("protocol", help="run an experiment protocol")
    proto_sub = proto.add_subparsers(dest="protocol", required=True)

    p = proto_sub.add_parser("individual", help="per-person models, 2/3-1/3 split")
    _add_common(p, data=True)
    _add_train_flags(p)
    p.add_argument("--out-table", metavar="PATH")
    p.set_defaults(handler=_cmd_protocol_individual)

    p = proto_sub.add_parser("universal", help="cross-validated person-level holdout")
    _add_common(p, data=True)
    _add_train_flags(p)
    p.add_argument("--num-folds", type=int, default=4)
    p.add_argument("--holdout", action="append", metavar="P01,P02,...",
                   help="explicit held-out group; repeat for each fold")
    p.add_argument("--out-table", metavar="PATH")
    p.add_argument("--out-ckpt", metavar="PATH")
    p.set_defaults(handler=_cmd_protocol_universal)

    p = proto_sub.add_parser("finetune", help="adapt a universal checkpoint per person")
    _add_common(p, data=True)
    _add_train_flags(p)
    p.add_argument("--ckpt", required=True, metavar="PATH", help="universal checkpoint")
    p.add_argument("--out-table", metavar="PATH")
    p.set_defaults(handler=_cmd_protocol_finetune)

    p = sub.add_parser("inspect-corpus", help="summarize a corpus tree")
    _add_common(p, data=True, seed=False)
    p.set_defaults(handler=_cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (WeakaggError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
