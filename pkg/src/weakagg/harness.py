"""Training loops, experiment protocols, checkpoints, and report tables.

Everything here is deterministic: the corpus fingerprint, config, and seed
fix every emitted number bitwise. Training visits one bag per optimizer step
(bags have variable frame counts, so per-bag stepping is the natural batch).
Distinct protocol runs (per person, per fold) are independent and merged by
sorted key; within one run training is sequential.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import aggregator
from .aggregator import AggregatorParams, ModelConfig
from .dataset import Bag, bags_by_person, persons
from .errors import ConfigError, FormatError, IntegrityError, NumericError, ShapeError
from .metrics import MetricsReport, aggregate_reports, report
from .optim import AdamWConfig, AdamWState, adamw_init, adamw_step

logger = logging.getLogger(__name__)

PROTOCOLS = ("individual", "universal", "finetune", "plain")

TABLE_HEADER = ("Participant ID", "Valence CCC", "Valence PCC", "Valence RMSE",
                "Arousal CCC", "Arousal PCC", "Arousal RMSE")

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig = ModelConfig()
    optimizer: AdamWConfig = AdamWConfig()
    epochs: int = 50
    seed: int = 0
    shuffle_each_epoch: bool = True
    protocol: str = "plain"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")


@dataclass
class Checkpoint:
    config: ModelConfig
    params: np.ndarray  # flat vector, aggregator.FLATTEN_ORDER
    opt_state: AdamWState
    epoch: int
    seed: int
    corpus_fingerprint: str

    def model_params(self) -> AggregatorParams:
        return aggregator.unflatten_params(self.config, self.params)


@dataclass
class RunLog:
    epoch_losses: list[float]
    duration_seconds: float
    reports: dict[str, MetricsReport] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def corpus_fingerprint(bags: Iterable[Bag]) -> str:
    """Content hash of a corpus, independent of bag ordering."""
    digest = hashlib.sha256()
    for bag in sorted(bags, key=lambda b: b.bag_id.folder):
        digest.update(bag.bag_id.folder.encode())
        digest.update(np.array([bag.label.valence, bag.label.arousal, bag.label.comfort]).tobytes())
        digest.update(np.ascontiguousarray(bag.frames).tobytes())
    return digest.hexdigest()


def _check_corpus(corpus: Sequence[Bag], config: ModelConfig) -> None:
    if not corpus:
        raise ShapeError("corpus is empty")
    for bag in corpus:
        if bag.frames.shape[1] != config.embed_dim:
            raise ShapeError(
                f"bag {bag.bag_id.folder} has embedding dim {bag.frames.shape[1]}, "
                f"model expects {config.embed_dim}")


def train(corpus: Sequence[Bag], cfg: TrainConfig,
          init: Checkpoint | None = None) -> tuple[Checkpoint, RunLog]:
    """Train the aggregation head on a corpus, one bag per step.

    With `init`, parameters start from the checkpoint (config must match)
    and the optimizer state starts fresh. Deterministic per seed, including
    the per-epoch shuffle order.
    """
    _check_corpus(corpus, cfg.model)
    if init is not None:
        if init.config != cfg.model:
            raise ConfigError(f"init checkpoint config {init.config} != train config {cfg.model}")
        theta = init.params.copy()
    else:
        theta = aggregator.flatten_params(aggregator.init_params(cfg.model, cfg.seed))
    opt_state = adamw_init(theta.size)
    rng = np.random.default_rng(cfg.seed)

    started = time.perf_counter()
    epoch_losses: list[float] = []
    n = len(corpus)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle_each_epoch else np.arange(n)
        total = 0.0
        for i in order:
            bag = corpus[i]
            params = aggregator.unflatten_params(cfg.model, theta)
            cache = aggregator.forward(params, bag.frames)
            total += aggregator.loss(cache.output, bag.label)
            grads = aggregator.backward(params, cache, bag.label)
            theta, opt_state = adamw_step(theta, aggregator.flatten_params(grads), opt_state,
                                          cfg.optimizer)
        epoch_loss = total / n
        if not math.isfinite(epoch_loss):
            raise NumericError(f"non-finite training loss at epoch {epoch}")
        epoch_losses.append(epoch_loss)

    ckpt = Checkpoint(cfg.model, theta, opt_state, cfg.epochs, cfg.seed,
                      corpus_fingerprint(corpus))
    log = RunLog(epoch_losses, time.perf_counter() - started)
    return ckpt, log


def predict(ckpt: Checkpoint, bags: Sequence[Bag]) -> np.ndarray:
    """One (valence, arousal) prediction per bag, in bag order."""
    _check_corpus(bags, ckpt.config)
    params = ckpt.model_params()
    return np.array([aggregator.forward(params, bag.frames).output for bag in bags])


def evaluate(ckpt: Checkpoint, bags: Sequence[Bag]) -> MetricsReport:
    """Metrics of the checkpointed model over a bag collection."""
    preds = predict(ckpt, bags)
    truth = np.array([bag.label.targets for bag in bags])
    return report(valence=(truth[:, 0], preds[:, 0]), arousal=(truth[:, 1], preds[:, 1]))


# --- report tables ----------------------------------------------------------

def _fmt(value: float | None) -> str:
    return "" if value is None else repr(value)


def format_table(rows: Sequence[tuple[str, MetricsReport]]) -> str:
    """Render labeled report rows plus Mean/Std aggregation rows as CSV."""
    mean_row, std_row = aggregate_reports([rep for _, rep in rows])
    lines = [",".join(TABLE_HEADER)]
    for label, rep in list(rows) + [("Mean", mean_row), ("Std", std_row)]:
        cells = [label] + [_fmt(v) for v in rep.valence.values() + rep.arousal.values()]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def write_table(path, rows: Sequence[tuple[str, MetricsReport]]) -> None:
    Path(path).write_text(format_table(rows), encoding="utf-8")


def _assert_no_leak(train_bags: Sequence[Bag], test_bags: Sequence[Bag]) -> None:
    shared = ({b.bag_id.folder for b in train_bags}
              & {b.bag_id.folder for b in test_bags})
    assert not shared, f"bags in both train and test: {sorted(shared)}"


# --- protocols --------------------------------------------------------------

TRAIN_FRACTION = 2.0 / 3.0


@dataclass
class ProtocolResult:
    rows: list[tuple[str, MetricsReport]]
    warnings: list[str] = field(default_factory=list)

    def table(self) -> str:
        return format_table(self.rows)


@dataclass
class UniversalResult:
    checkpoint: Checkpoint
    best_fold: int
    rows: list[tuple[str, MetricsReport]]  # per-person test rows of the best fold
    fold_scores: list[float]
    warnings: list[str] = field(default_factory=list)

    def table(self) -> str:
        return format_table(self.rows)


def run_individual(corpus: Sequence[Bag], cfg: TrainConfig) -> ProtocolResult:
    """Per-person models: train on the first two thirds of each person's
    bags, evaluate on the final third. Persons with too few bags are skipped
    with a warning."""
    from .dataset import split_individual  # local import to keep module load light

    result = ProtocolResult(rows=[])
    for idx, (person, bags) in enumerate(bags_by_person(corpus).items()):
        try:
            train_bags, test_bags = split_individual(bags, TRAIN_FRACTION)
        except Exception as exc:
            msg = f"skipping {person}: {exc}"
            logger.warning(msg)
            result.warnings.append(msg)
            continue
        _assert_no_leak(train_bags, test_bags)
        ckpt, _ = train(train_bags, replace(cfg, seed=cfg.seed + idx))
        result.rows.append((person, evaluate(ckpt, test_bags)))
    if not result.rows:
        raise ShapeError("no person had enough bags for an individual model")
    return result


def _fold_score(rep: MetricsReport) -> float:
    """Model selection score: mean held-out CCC over both targets,
    undefined CCCs excluded."""
    defined = [v for v in (rep.valence.ccc, rep.arousal.ccc) if v is not None]
    return float(np.mean(defined)) if defined else float("-inf")


def run_universal(corpus: Sequence[Bag], cfg: TrainConfig,
                  folds: Sequence[tuple[Sequence[Bag], Sequence[Bag]]]) -> UniversalResult:
    """Cross-validation over person-level folds.

    Trains one model per fold, every fold from the same seed, and keeps the
    fold with the highest mean held-out CCC (exact ties broken by lowest
    fold index). Held-out persons are evaluated on their full data.
    """
    if len(folds) < 2:
        raise ValueError(f"universal protocol needs >= 2 folds, got {len(folds)}")
    best: tuple[float, int, Checkpoint, list[tuple[str, MetricsReport]]] | None = None
    scores: list[float] = []
    for fold_idx, (train_bags, test_bags) in enumerate(folds):
        _assert_no_leak(train_bags, test_bags)
        ckpt, _ = train(train_bags, cfg)
        score = _fold_score(evaluate(ckpt, test_bags))
        scores.append(score)
        rows = [(person, evaluate(ckpt, bags))
                for person, bags in bags_by_person(test_bags).items()]
        if best is None or score > best[0]:
            best = (score, fold_idx, ckpt, rows)
    assert best is not None
    return UniversalResult(checkpoint=best[2], best_fold=best[1], rows=best[3],
                           fold_scores=scores)


def run_finetune(universal: Checkpoint, corpus: Sequence[Bag], cfg: TrainConfig,
                 universal_train_persons: Iterable[str] | None = None) -> ProtocolResult:
    """Adapt a universal checkpoint to each person in the corpus.

    Per person: start from the universal parameters with a fresh optimizer,
    train on their two-thirds split, evaluate on the final third. When the
    universal model's training persons are known, overlap is permitted but
    flagged in the warnings.
    """
    from .dataset import split_individual

    if universal.config != cfg.model:
        raise ConfigError(f"checkpoint config {universal.config} != finetune config {cfg.model}")
    known_train = set(universal_train_persons) if universal_train_persons is not None else None
    result = ProtocolResult(rows=[])
    for idx, (person, bags) in enumerate(bags_by_person(corpus).items()):
        if known_train is not None and person in known_train:
            msg = f"{person} was in the universal training set; fine-tuning anyway"
            logger.warning(msg)
            result.warnings.append(msg)
        try:
            train_bags, test_bags = split_individual(bags, TRAIN_FRACTION)
        except Exception as exc:
            msg = f"skipping {person}: {exc}"
            logger.warning(msg)
            result.warnings.append(msg)
            continue
        _assert_no_leak(train_bags, test_bags)
        ckpt, _ = train(train_bags, replace(cfg, seed=cfg.seed + idx), init=universal)
        result.rows.append((person, evaluate(ckpt, test_bags)))
    if not result.rows:
        raise ShapeError("no person had enough bags to fine-tune on")
    return result


# --- checkpoint persistence -------------------------------------------------

def save_checkpoint(ckpt: Checkpoint, path) -> None:
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "model_config": {
            "embed_dim": ckpt.config.embed_dim,
            "proj_dim": ckpt.config.proj_dim,
            "score_dim": ckpt.config.score_dim,
            "transform_dim": ckpt.config.transform_dim,
            "out_dim": ckpt.config.out_dim,
        },
        "params": ckpt.params.tolist(),
        "optimizer_state": {
            "step_count": ckpt.opt_state.step_count,
            "m": ckpt.opt_state.m.tolist(),
            "v": ckpt.opt_state.v.tolist(),
        },
        "epoch": ckpt.epoch,
        "seed": ckpt.seed,
        "corpus_fingerprint": ckpt.corpus_fingerprint,
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_checkpoint(path) -> Checkpoint:
    """Read a checkpoint JSON; round-trips bitwise (floats serialize via repr)."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid checkpoint JSON ({exc})") from None
    try:
        if payload["format_version"] != CHECKPOINT_FORMAT_VERSION:
            raise FormatError(f"{path}: unsupported format_version {payload['format_version']}")
        config = ModelConfig(**payload["model_config"])
        params = np.asarray(payload["params"], dtype=np.float64)
        opt = payload["optimizer_state"]
        state = AdamWState(int(opt["step_count"]),
                           np.asarray(opt["m"], dtype=np.float64),
                           np.asarray(opt["v"], dtype=np.float64))
        ckpt = Checkpoint(config, params, state, int(payload["epoch"]),
                          int(payload["seed"]), str(payload["corpus_fingerprint"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}: malformed checkpoint ({exc})") from None
    expected = aggregator.param_count(config)
    if ckpt.params.ndim != 1 or ckpt.params.size != expected:
        raise IntegrityError(
            f"{path}: parameter count {ckpt.params.size} does not match config ({expected})")
    if ckpt.opt_state.m.shape != ckpt.params.shape or ckpt.opt_state.v.shape != ckpt.params.shape:
        raise IntegrityError(f"{path}: optimizer state length does not match parameters")
    return ckpt
