"""Acceptance gate: nine end-to-end criteria.

Each test prints one PASS/FAIL line (visible with `pytest -s`; under
`pytest -v` the test name itself is the per-criterion line). Tolerances are
pinned in the assertions, not computed. The metric reference implementations
here are deliberately independent, naive two-pass plain-Python loops.
"""

import math
import subprocess
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest

from weakagg import aggregator
from weakagg.aggregator import ModelConfig, flatten_params, forward, init_params, loss, \
    unflatten_params
from weakagg.dataset import CorpusFilter, SynthConfig, bags_by_person, folds_universal, \
    load_corpus, load_reference, split_individual, synth_generate
from weakagg.diffmath import fd_gradient
from weakagg.harness import TABLE_HEADER, TrainConfig, evaluate, format_table, run_individual, \
    train
from weakagg.optim import AdamWConfig, adamw_init, adamw_step

# model/optimizer settings used for the synthetic-recovery experiments
RECOVERY_MODEL = ModelConfig(embed_dim=32, proj_dim=16, score_dim=8, transform_dim=12, out_dim=2)
RECOVERY_OPT = AdamWConfig(lr=3e-3, weight_decay=0.1)


@contextmanager
def criterion(number, title):
    try:
        yield
    except BaseException:
        print(f"[criterion {number}] {title}: FAIL")
        raise
    print(f"[criterion {number}] {title}: PASS")


@pytest.fixture(scope="module")
def synth_corpus():
    return synth_generate(SynthConfig(seed=7))


# --- 1: gradient oracle -----------------------------------------------------

def test_criterion_1_gradient_oracle():
    with criterion(1, "analytic backward matches central finite differences"):
        started = time.perf_counter()
        config = ModelConfig(embed_dim=16, proj_dim=8, score_dim=6, transform_dim=5, out_dim=2)
        rng = np.random.default_rng(42)
        checked = 0
        for n_frames in (1, 5, 20):
            for _ in range(7):
                params = init_params(config, seed=int(rng.integers(1 << 30)))
                frames = rng.standard_normal((n_frames, config.embed_dim))
                target = rng.uniform(0.05, 0.95, size=2)
                cache = forward(params, frames)
                analytic = flatten_params(aggregator.backward(params, cache, target))

                def objective(theta):
                    out = forward(unflatten_params(config, theta), frames).output
                    return loss(out, target)

                fd = fd_gradient(objective, flatten_params(params), step=1e-5)
                rel = np.abs(analytic - fd) / np.maximum(np.abs(fd), 1e-8)
                assert rel.max() < 1e-4, f"rel err {rel.max():.2e} at J={n_frames}"
                checked += 1
        assert checked >= 20
        assert time.perf_counter() - started < 60.0


# --- 2: attention invariants ------------------------------------------------

def test_criterion_2_attention_invariants():
    with criterion(2, "attention sums to one, outputs in (0,1), permutation invariant"):
        config = ModelConfig(embed_dim=12, proj_dim=7, score_dim=5, transform_dim=4, out_dim=2)
        rng = np.random.default_rng(7)
        params = init_params(config, seed=0)
        for i in range(1000):
            if i % 50 == 0:
                params = init_params(config, seed=i)
            frames = rng.standard_normal((int(rng.integers(1, 25)), config.embed_dim)) \
                * rng.uniform(0.2, 3.0)
            cache = forward(params, frames)
            assert abs(cache.attn.sum() - 1.0) < 1e-9
            assert ((cache.output > 0.0) & (cache.output < 1.0)).all()
            permuted = forward(params, frames[rng.permutation(frames.shape[0])])
            assert np.abs(permuted.output - cache.output).max() < 1e-9


# --- 3: metrics oracle ------------------------------------------------------

def _ref_rmse(truth, pred):
    return math.sqrt(sum((y - p) ** 2 for y, p in zip(truth, pred)) / len(truth))


def _ref_corrs(truth, pred):
    n = len(truth)
    my = sum(truth) / n
    mp = sum(pred) / n
    vy = sum((y - my) ** 2 for y in truth) / n
    vp = sum((p - mp) ** 2 for p in pred) / n
    cov = sum((y - my) * (p - mp) for y, p in zip(truth, pred)) / n
    r = cov / math.sqrt(vy * vp)
    c = 2.0 * math.sqrt(vy) * math.sqrt(vp) * r / (vy + vp + (my - mp) ** 2)
    return r, c


def test_criterion_3_metrics_oracle():
    from weakagg.metrics import ccc, pcc, rmse

    with criterion(3, "metrics match a two-pass reference and hand-derived fixtures"):
        assert abs(ccc([0.0, 1.0, 2.0], [1.0, 2.0, 3.0]) - 4.0 / 7.0) < 1e-12
        assert abs(pcc([0.0, 1.0, 2.0], [1.0, 2.0, 3.0]) - 1.0) < 1e-12
        assert abs(rmse([0.0, 1.0], [1.0, 0.0]) - 1.0) < 1e-12

        rng = np.random.default_rng(99)
        for _ in range(1000):
            n = int(rng.integers(2, 50))
            truth = (rng.uniform(-3.0, 3.0, size=n) * rng.uniform(0.1, 5.0)).tolist()
            pred = (np.asarray(truth) * rng.uniform(-2.0, 2.0)
                    + rng.standard_normal(n) * rng.uniform(0.0, 2.0)
                    + rng.uniform(-1.0, 1.0)).tolist()
            if np.std(truth) < 1e-9 or np.std(pred) < 1e-9:
                continue
            got_r, got_c = pcc(truth, pred), ccc(truth, pred)
            ref_r, ref_c = _ref_corrs(truth, pred)
            assert abs(rmse(truth, pred) - _ref_rmse(truth, pred)) < 1e-12
            assert abs(got_r - ref_r) < 1e-12
            assert abs(got_c - ref_c) < 1e-12
            assert abs(got_c) <= abs(got_r) + 1e-12


# --- 4: synthetic recovery --------------------------------------------------

def test_criterion_4_synthetic_recovery(synth_corpus):
    with criterion(4, "held-out PCC >= 0.8 and attention finds the planted key frame"):
        started = time.perf_counter()
        bags, truth = synth_corpus
        (train_bags, test_bags), = folds_universal(bags, [{"P07", "P08"}])
        cfg = TrainConfig(model=RECOVERY_MODEL, optimizer=RECOVERY_OPT, epochs=100,
                          seed=7, protocol="plain")
        ckpt, _ = train(train_bags, cfg)
        rep = evaluate(ckpt, test_bags)
        assert rep.valence.pcc is not None and rep.valence.pcc >= 0.8, rep.valence
        assert rep.arousal.pcc is not None and rep.arousal.pcc >= 0.8, rep.arousal

        params = ckpt.model_params()
        masses = [forward(params, bag.frames).attn[truth.key_frames[bag.bag_id.folder]]
                  for bag in test_bags]
        mean_mass = float(np.mean(masses))
        n_frames = bags[0].num_frames
        assert mean_mass >= 2.0 / n_frames, f"mass {mean_mass:.3f} < {2.0 / n_frames:.3f}"
        assert time.perf_counter() - started < 300.0


# --- 5: overfit sanity ------------------------------------------------------

def test_criterion_5_overfit_single_bag(synth_corpus):
    with criterion(5, "a single bag is memorized to MSE < 1e-4 within 2000 steps"):
        bag = synth_corpus[0][0]
        cfg = TrainConfig(model=RECOVERY_MODEL, optimizer=AdamWConfig(), epochs=2000,
                          seed=0, shuffle_each_epoch=False, protocol="plain")
        _, log = train([bag], cfg)
        assert min(log.epoch_losses) < 1e-4, f"best MSE {min(log.epoch_losses):.2e}"


# --- 6: individual-protocol table shape -------------------------------------

def test_criterion_6_individual_table_layout(synth_corpus):
    with criterion(6, "per-person table has 8 rows plus Mean/Std matching column stats"):
        bags, _ = synth_corpus
        cfg = TrainConfig(model=RECOVERY_MODEL, optimizer=RECOVERY_OPT, epochs=50,
                          seed=7, protocol="individual")
        result = run_individual(bags, cfg)
        text = result.table()
        lines = text.strip().split("\n")

        assert lines[0] == ",".join(TABLE_HEADER)
        assert len(lines) == 1 + 8 + 2
        labels = [line.split(",")[0] for line in lines[1:]]
        assert labels == [f"P{i:02d}" for i in range(1, 9)] + ["Mean", "Std"]

        table = [line.split(",") for line in lines[1:9]]
        mean_cells = lines[9].split(",")[1:]
        std_cells = lines[10].split(",")[1:]
        for col in range(1, 7):
            values = [float(row[col]) for row in table if row[col] != ""]
            expected_mean = sum(values) / len(values)
            expected_std = math.sqrt(sum((v - expected_mean) ** 2 for v in values)
                                     / (len(values) - 1))
            assert abs(float(mean_cells[col - 1]) - expected_mean) < 1e-12
            assert abs(float(std_cells[col - 1]) - expected_std) < 1e-12


# --- 7: ingestion fixture ---------------------------------------------------

def test_criterion_7_ingestion_fixture(fixture_corpus):
    with criterion(7, "fixture tree loads with halved labels, default exclusions, T00 flag"):
        bags, _ = load_corpus(fixture_corpus)
        kept = {bag.bag_id.person for bag in bags}
        assert kept == {"P01", "P02", "P04", "P06", "P07", "P08", "P09", "P12"}
        assert not kept & {"P03", "P05", "P10", "P11"}

        reference = load_reference(fixture_corpus / "labels.csv")
        for bag in bags:
            raw = reference[bag.bag_id.folder]
            assert bag.label.valence == raw.valence / 2.0
            assert bag.label.arousal == raw.arousal / 2.0

        no_warmup, _ = load_corpus(fixture_corpus, CorpusFilter(exclude_warmup_trial=True))
        assert all(bag.bag_id.trial != "T00" for bag in no_warmup)
        assert len(no_warmup) == len(bags) // 2


# --- 8: determinism of protocol universal ------------------------------------

def _run_universal_cli(corpus, out_dir):
    out_dir.mkdir()
    args = [sys.executable, "-m", "weakagg.cli", "protocol", "universal",
            "--data", str(corpus), "--include-all-persons", "--seed", "7",
            "--epochs", "5", "--proj-dim", "4", "--score-dim", "3", "--transform-dim", "3",
            "--num-folds", "2", "--out-ckpt", str(out_dir / "model.json"),
            "--out-table", str(out_dir / "table.csv")]
    proc = subprocess.run(args, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return (out_dir / "model.json").read_bytes(), (out_dir / "table.csv").read_bytes()


def test_criterion_8_universal_runs_are_bitwise_identical(tmp_path):
    with criterion(8, "two identical universal runs produce bitwise-identical artifacts"):
        corpus = tmp_path / "corpus"
        proc = subprocess.run(
            [sys.executable, "-m", "weakagg.cli", "synth", "--seed", "3",
             "--out", str(corpus), "--participants", "4", "--bags-per-participant", "6",
             "--frames-per-bag", "5", "--embed-dim", "8"],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr

        first_ckpt, first_table = _run_universal_cli(corpus, tmp_path / "run1")
        second_ckpt, second_table = _run_universal_cli(corpus, tmp_path / "run2")
        assert first_ckpt == second_ckpt
        assert first_table == second_table


# --- 9: optimizer sanity ----------------------------------------------------

def test_criterion_9_adamw_sanity():
    with criterion(9, "AdamW minimizes a quadratic and applies exact decoupled decay"):
        theta = np.array([5.0])
        state = adamw_init(1)
        cfg = AdamWConfig(lr=0.1)
        for _ in range(500):
            theta, state = adamw_step(theta, 2.0 * theta, state, cfg)
            if abs(theta[0]) < 0.01:
                break
        assert abs(theta[0]) < 0.01, f"theta still {theta[0]:.4f} after 500 steps"

        decay_cfg = AdamWConfig(lr=0.05, weight_decay=0.2)
        theta = np.array([1.7, -0.3])
        decayed, _ = adamw_step(theta, np.zeros(2), adamw_init(2), decay_cfg)
        np.testing.assert_array_equal(decayed, theta * (1.0 - 0.05 * 0.2))
