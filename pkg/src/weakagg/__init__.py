"""Weakly supervised attention aggregation over frame embeddings.

A bag of per-frame embeddings is pooled with learned softmax attention into
a single context vector, from which a sigmoid head predicts two bag-level
targets (valence and arousal) in [0, 1]. The package covers the model and
its hand-derived gradients, an AdamW optimizer, evaluation metrics
(CCC / PCC / RMSE), corpus loading for the folder-per-bag CSV layout,
a synthetic-corpus generator, and the training protocols (individual,
universal, fine-tune) behind the `weakagg` command line tool.
"""

from ._backend import backend_name
from .aggregator import (AggregatorParams, ForwardCache, ModelConfig, backward, flatten_params,
                         forward, init_params, loss, param_count, unflatten_params)
from .dataset import (Bag, BagId, CorpusFilter, LabelPair, SynthConfig, load_corpus, parse_bag_id,
                      save_corpus, split_individual, folds_universal, synth_generate)
from .errors import WeakaggError
from .harness import (Checkpoint, RunLog, TrainConfig, evaluate, load_checkpoint, run_finetune,
                      run_individual, run_universal, save_checkpoint, train)
from .metrics import MetricsReport, TargetMetrics, ccc, pcc, report, rmse
from .optim import AdamWConfig, AdamWState, adamw_init, adamw_step

__all__ = [
    "AdamWConfig", "AdamWState", "AggregatorParams", "Bag", "BagId", "Checkpoint",
    "CorpusFilter", "ForwardCache", "LabelPair", "MetricsReport", "ModelConfig", "RunLog",
    "SynthConfig", "TargetMetrics", "TrainConfig", "WeakaggError", "adamw_init", "adamw_step",
    "backend_name", "backward", "ccc", "evaluate", "flatten_params", "folds_universal",
    "forward", "init_params", "load_checkpoint", "load_corpus", "loss", "param_count",
    "parse_bag_id", "pcc", "report", "rmse", "run_finetune", "run_individual", "run_universal",
    "save_checkpoint", "save_corpus", "split_individual", "synth_generate", "train",
    "unflatten_params",
]

__version__ = "0.1.0"
