"""Acceptance suite: one PASS/FAIL line per criterion.

Criteria 1 to 7 run on built-in data. Criteria 8 to 11 need the experimental
data set: ``$ILGAMMA_DATA_DIR/records.csv`` plus the test membership lists
``prediction_test.json`` and ``generalization_test.json`` (JSON arrays of
record indices). Without those files they are skipped and a synthetic
benchmark stands in.
"""

from __future__ import annotations

import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from ilgamma.autodiff import backward, no_grad
from ilgamma.config import DATA_DIR_ENV
from ilgamma.dataset import load, split_generalization, split_prediction, split_train_val
from ilgamma.ensemble import ensemble_predict, train_ensemble
from ilgamma.evaluate import band_counts, metrics, space_metrics
from ilgamma.featurizer import EDGE_DIM, EDGE_GROUPS, NODE_DIM, NODE_GROUPS, featurize
from ilgamma.gnn import GnnConfig, GnnModel
from ilgamma.mcm import McmModel, build_vocab
from ilgamma.synthetic import ANIONS, CATIONS, make_records
from ilgamma.trainer import EarlyStopping, PlateauScheduler, TrainConfig, mse_loss, train

from .conftest import central_difference, relative_error, sample_entries
from .test_dataset import check_generalization_contract, check_prediction_contract
from .test_evaluate import brute_force
from .test_featurizer import EQUIVALENT_PAIRS, GOLDEN
from .test_gnn import relabel
from .test_trainer import ScriptedModel

EMIM, BF4 = "CC[n+]1ccn(C)c1", "F[B-](F)(F)F"


@pytest.fixture
def report(capsys):
    """Print one verdict line (outside output capture), then assert it."""

    def _report(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nCRITERION {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return _report


def _skip(capsys, number: int, reason: str) -> None:
    with capsys.disabled():
        print(f"\nCRITERION {number:>2}: SKIPPED  {reason}")
    pytest.skip(reason)


# Step-1e-5 central differences carry about 1e-11 of rounding noise on these
# losses, so a 1e-4 relative test is only meaningful for gradients well above
# that; smaller entries are held to an absolute bound instead.
RESOLVABLE = 1e-6


def _gradient_errors(model, batch, count, seed):
    """Relative errors on ``count`` resolvable entries and the worst absolute
    error over sampled entries below the resolvable magnitude."""
    params = model.parameters()

    def loss_value():
        with no_grad():
            return mse_loss(model.forward(batch), batch.targets).item()

    backward(mse_loss(model.forward(batch), batch.targets), params)
    picks = sample_entries(params, 20 * count, np.random.default_rng(seed))
    big = [(p, k) for p, k in picks if abs(p.grad.reshape(-1)[k]) >= RESOLVABLE][:count]
    small = [(p, k) for p, k in picks if abs(p.grad.reshape(-1)[k]) < RESOLVABLE][:20]
    rel = [relative_error(float(p.grad.reshape(-1)[k]), central_difference(loss_value, p, k, step=1e-5))
           for p, k in big]
    absolute = max(abs(float(p.grad.reshape(-1)[k]) - central_difference(loss_value, p, k, step=1e-5))
                   for p, k in small)
    return rel, absolute


def test_criterion_1_gradient_fidelity(report, small_records):
    start = time.perf_counter()
    gnn = GnnModel(seed=11)
    gnn.fit_normalization(small_records)
    gnn_rel, gnn_abs = _gradient_errors(gnn, gnn.make_batch(small_records[:4]), 60, 0)
    mcm = McmModel(build_vocab(small_records), seed=11)
    mcm.fit_normalization(small_records)
    mcm_rel, mcm_abs = _gradient_errors(mcm, mcm.make_batch(small_records[:6]), 60, 1)
    elapsed = time.perf_counter() - start
    worst, worst_abs = max(gnn_rel + mcm_rel), max(gnn_abs, mcm_abs)
    ok = (len(gnn_rel) >= 50 and len(mcm_rel) >= 50 and worst < 1e-4 and worst_abs < 1e-9
          and elapsed < 60)
    report(1, ok, f"GNN {len(gnn_rel)} + MCM {len(mcm_rel)} entries, max rel err {worst:.2e} "
                  f"(< 1e-4); tiny-gradient abs err {worst_abs:.1e} (< 1e-9); {elapsed:.1f} s (< 60 s)")


def _one_hot_groups_ok(matrix, groups):
    start, ok = 0, True
    for _, width in groups:
        if width > 1:
            ok &= bool(np.all(matrix[:, start : start + width].sum(axis=1) == 1))
        start += width
    return ok


def test_criterion_2_featurization_exactness(report):
    molecules = GOLDEN["molecules"]
    widths_ok = groups_ok = golden_ok = True
    for entry in molecules:
        g = featurize(entry["smiles"])
        widths_ok &= g.node_features.shape[1] == NODE_DIM == 22 and g.edge_features.shape[1] == EDGE_DIM == 6
        groups_ok &= _one_hot_groups_ok(g.node_features, NODE_GROUPS)
        if g.num_edges:
            groups_ok &= _one_hot_groups_ok(g.edge_features, EDGE_GROUPS)
        golden_ok &= (
            np.array_equal(g.node_features, np.array(entry["node_features"], dtype=float))
            and np.array_equal(g.edge_index, np.array(entry["edge_index"]).reshape(2, -1))
            and np.array_equal(g.edge_features, np.array(entry["edge_features"], dtype=float).reshape(-1, 6))
        )
    ok = len(molecules) == 25 and widths_ok and groups_ok and golden_ok
    report(2, ok, f"{len(molecules)} molecules: widths 22/6 {widths_ok}, one-hot sums {groups_ok}, "
                  f"golden match {golden_ok}")


def test_criterion_3_symmetry(report):
    model = GnnModel(seed=5)
    solute = featurize("Cc1ccccc1O")
    c, a = featurize(CATIONS[4][0]), featurize(ANIONS[2])
    ref = model.forward_graphs(c, a, solute, 0.35)
    relabel_ok = all(
        model.forward_graphs(relabel(c, s), relabel(a, s + 1), relabel(solute, s + 2), 0.35) == ref
        for s in range(10)
    )
    swap_ok = all(
        model.forward_graphs(featurize(ci), featurize(ai), solute, 0.6)
        == model.forward_graphs(featurize(ai), featurize(ci), solute, 0.6)
        for (ci, _), ai in zip(CATIONS, ANIONS)
    )
    ionic = featurize(EMIM), featurize(BF4)
    rewrite_ok = all(
        model.forward_graphs(*ionic, featurize(x), 0.4) == model.forward_graphs(*ionic, featurize(y), 0.4)
        for x, y in EQUIVALENT_PAIRS
    )
    ok = relabel_ok and swap_ok and rewrite_ok and len(EQUIVALENT_PAIRS) == 10
    report(3, ok, f"relabelling exact {relabel_ok}, ion swap exact {swap_ok}, "
                  f"{len(EQUIVALENT_PAIRS)} SMILES rewrites exact {rewrite_ok}")


def test_criterion_4_overfit(report):
    records = make_records(64, seed=1)
    model = GnnModel(seed=0)
    steps = {"n": 0}

    def stop_when_fitted(epoch, history):
        steps["n"] = epoch  # one Adam step per epoch: batch size equals the subset size
        return history.val_mae[-1] < 0.01

    start = time.perf_counter()
    # validating on the training records themselves tracks the inference-mode train MAE
    _, history = train(model, records, records,
                       TrainConfig(max_epochs=2000, batch_size=64, early_stop_patience=2000),
                       stop_when_fitted)
    elapsed = time.perf_counter() - start
    pred = model.predict(records)
    mae = float(np.mean(np.abs(pred - np.array([r.ln_gamma for r in records]))))
    ok = mae < 0.01 and steps["n"] <= 2000 and elapsed < 300
    report(4, ok, f"train MAE {mae:.4f} (< 0.01) after {steps['n']} steps (<= 2000), "
                  f"{elapsed:.1f} s (< 300 s)")


def test_criterion_5_schedule(report, small_records):
    s = PlateauScheduler(0.001, 0.8, 3)
    rates = [s.step(1.0) for _ in range(3 * 12)]
    # the first value is an improvement, then every third stale epoch decays
    expected = [0.001 * 0.8 ** (i // 3) for i in range(len(rates))]
    plateau_ok = rates == expected
    improving = PlateauScheduler(0.001, 0.8, 3)
    improving_ok = all(improving.step(1.0 / (k + 1)) == 0.001 for k in range(50))
    stopper = EarlyStopping(25)
    stop_epoch = next(e for e in range(1, 100) if stopper.step(float(e)))
    _, history = train(ScriptedModel([0.1 * k for k in range(1, 100)]), small_records[:8],
                       small_records[8:16], TrainConfig(max_epochs=200))
    loop_ok = len(history) == 26 and history.best_epoch == 1
    ok = plateau_ok and improving_ok and stop_epoch == 26 and loop_ok
    report(5, ok, f"lr = 0.001*0.8^k exact for k <= 12 {plateau_ok}, no decay while improving "
                  f"{improving_ok}, early stop at epoch {stop_epoch} (training loop {len(history)})")


def test_criterion_6_split_contracts(report, split_records):
    n_mols = len({m for r in split_records for m in r.molecules})
    failures = []
    for seed in range(20):
        for name, make, check in (
            ("prediction", lambda s: split_prediction(split_records, seed=s), check_prediction_contract),
            ("generalization", lambda s: split_generalization(split_records, s, 0.1, 0.1),
             check_generalization_contract),
        ):
            try:
                check(split_records, make(seed))
            except AssertionError:
                failures.append(f"{name}/{seed}")
    ok = len(split_records) == 500 and n_mols == 40 and not failures
    report(6, ok, f"{len(split_records)} records, {n_mols} molecules, 20 seeds x 2 modes, "
                  f"violations: {failures or 'none'}")


def test_criterion_7_metric_oracle(report):
    rng = np.random.default_rng(2024)
    worst = 0.0
    mae_le_rmse = True
    for _ in range(300):
        n = int(rng.integers(2, 200))
        target = rng.normal(0.0, 2.0, n)
        pred = target + rng.normal(0.0, rng.uniform(0.01, 3.0), n)
        m = metrics(pred, target)
        mae, rmse, r2 = brute_force(list(pred), list(target))
        gamma_t, gamma_p = [math.exp(v) for v in target], [math.exp(v) for v in pred]
        g_mae, g_rmse, g_r2 = brute_force(gamma_p, gamma_t)
        mape = sum(100 * abs(p - t) / t for p, t in zip(gamma_p, gamma_t)) / n
        pairs = [(m.ln.mae, mae), (m.ln.rmse, rmse), (m.ln.r2, r2), (m.gamma.mae, g_mae),
                 (m.gamma.rmse, g_rmse), (m.gamma.r2, g_r2), (m.mape, mape)]
        worst = max(worst, max(abs(a - b) / max(1.0, abs(b)) for a, b in pairs))
        mae_le_rmse &= m.ln.mae <= m.ln.rmse and m.gamma.mae <= m.gamma.rmse
    ok = worst <= 1e-12 and mae_le_rmse
    report(7, ok, f"300 random vectors, max deviation {worst:.1e} (<= 1e-12), MAE <= RMSE {mae_le_rmse}")


# dataset-scale criteria ---------------------------------------------------------

def _data_file(name: str) -> Path | None:
    base = os.environ.get(DATA_DIR_ENV)
    if not base:
        return None
    path = Path(base) / name
    return path if path.exists() else None


def _dataset(capsys, number: int, manifest: str):
    records_path, test_path = _data_file("records.csv"), _data_file(manifest)
    if records_path is None or test_path is None:
        _skip(capsys, number, f"experimental data set not available (needs ${DATA_DIR_ENV}/records.csv "
                              f"and {manifest}); not reproducible here")
    return load(records_path), [int(i) for i in json.loads(test_path.read_text())]


@pytest.mark.dataset
@pytest.mark.slow
def test_criterion_8_single_gnn_prediction(report, capsys):
    records, test = _dataset(capsys, 8, "prediction_test.json")
    split = split_prediction(records, test, seed=0)
    train_r, val_r, test_r = split.take(records)
    model, _ = train(GnnModel(seed=0), train_r, val_r, TrainConfig(seed=0))
    mae = metrics(model.predict(test_r), [r.ln_gamma for r in test_r]).ln.mae
    report(8, 0.073 <= mae <= 0.113, f"single GNN test MAE {mae:.4f} (in [0.073, 0.113])")


@pytest.mark.dataset
@pytest.mark.slow
def test_criterion_9_ensemble_prediction(report, capsys):
    records, test = _dataset(capsys, 9, "prediction_test.json")
    ens = train_ensemble(records, test, n=10, mode="prediction", kind="gnn")
    test_r = [records[i] for i in sorted(test)]
    target = [r.ln_gamma for r in test_r]
    pred, _ = ensemble_predict(ens, test_r)
    mae = metrics(pred, target).ln.mae
    band = band_counts(pred, target)
    coverage = band.inside / band.total
    report(9, mae <= 0.085 and coverage >= 0.97,
           f"10-ensemble test MAE {mae:.4f} (<= 0.085), +-0.5 band {coverage:.1%} (>= 97%)")


@pytest.mark.dataset
@pytest.mark.slow
def test_criterion_10_ensemble_generalization(report, capsys):
    records, test = _dataset(capsys, 10, "generalization_test.json")
    ens = train_ensemble(records, test, n=10, mode="generalization", kind="gnn")
    test_r = [records[i] for i in sorted(test)]
    pred, _ = ensemble_predict(ens, test_r)
    m = metrics(pred, [r.ln_gamma for r in test_r])
    report(10, m.ln.mae <= 0.21 and m.ln.r2 >= 0.95,
           f"10-ensemble test MAE {m.ln.mae:.4f} (<= 0.21), R2 {m.ln.r2:.3f} (>= 0.95)")


@pytest.mark.dataset
@pytest.mark.slow
def test_criterion_11_mcm_validation(report, capsys):
    records, test = _dataset(capsys, 11, "prediction_test.json")
    excluded = set(test)
    pool = [i for i in range(len(records)) if i not in excluded]
    train_idx, val_idx = split_train_val(records, pool, "prediction", seed=0)
    train_r, val_r = [records[i] for i in train_idx], [records[i] for i in val_idx]
    model = McmModel(build_vocab(train_r + val_r), seed=0)
    train(model, train_r, val_r, TrainConfig(seed=0))
    rmse = space_metrics(model.predict(val_r), [r.ln_gamma for r in val_r]).rmse
    report(11, 0.085 <= rmse <= 0.150, f"MCM validation RMSE {rmse:.4f} (in [0.085, 0.150])")


def test_synthetic_benchmark(capsys):
    """Fallback when the experimental data set is absent: a smooth function of
    temperature and graph descriptors, learned on held-out IL-solute pairs."""
    records = make_records(600, seed=0)
    split = split_prediction(records, seed=0)
    train_r, val_r, test_r = split.take(records)
    config = GnnConfig(hidden_dim=32, channel_mlp_widths=[64, 64], interaction_widths=[64, 64],
                       head_widths=[65, 32, 1])
    model, _ = train(GnnModel(config, seed=0), train_r, val_r,
                     TrainConfig(max_epochs=60, batch_size=32, initial_lr=3e-3))
    mae = metrics(model.predict(test_r), [r.ln_gamma for r in test_r]).ln.mae
    with capsys.disabled():
        print(f"\nSYNTHETIC BENCHMARK: {'PASS' if mae < 0.05 else 'FAIL'}  held-out MAE {mae:.4f} "
              f"(< 0.05) on {len(test_r)} records of unseen IL-solute pairs")
    assert mae < 0.05
