"""Train a compact GNN on synthetic records and use it.

Run with ``python demos/quickstart.py``. Takes well under a minute on one core.
The synthetic target is a smooth function of temperature and simple graph
descriptors; swap in ``ilgamma.dataset.load("records.csv")`` for real data.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from ilgamma import artifact
from ilgamma.dataset import DataRecord, split_prediction
from ilgamma.evaluate import band_counts, full_report
from ilgamma.gnn import GnnConfig, GnnModel
from ilgamma.synthetic import make_records
from ilgamma.trainer import TrainConfig, train


def main() -> None:
    records = make_records(600, seed=0)
    split = split_prediction(records, seed=0)
    train_r, val_r, test_r = split.take(records)
    print(f"{len(records)} records: {len(train_r)} train, {len(val_r)} val, {len(test_r)} test")

    # a narrower network than the default keeps the demo quick
    config = GnnConfig(hidden_dim=32, channel_mlp_widths=[64, 64], interaction_widths=[64, 64],
                       head_widths=[65, 32, 1])
    model = GnnModel(config, seed=0)
    print(f"model has {model.num_parameters()} parameters")

    def progress(epoch, history):
        if epoch % 10 == 0:
            print(f"  epoch {epoch:3d}  train MSE {history.train_loss[-1]:.5f}  "
                  f"val MAE {history.val_mae[-1]:.4f}  lr {history.lr[-1]:.2e}")

    model, history = train(model, train_r, val_r,
                           TrainConfig(max_epochs=60, batch_size=32, initial_lr=3e-3), progress)
    print(f"best epoch {history.best_epoch}")

    pred = model.predict(test_r)
    print(full_report(pred, test_r).table())
    counts = band_counts(pred, [r.ln_gamma for r in test_r])
    print(f"{counts.inside} of {counts.total} test points within +-0.5 in ln gamma_inf")

    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "gnn.bin"
        artifact.save(model, path)
        restored = artifact.load(path)
        assert np.array_equal(restored.predict(test_r), pred)
        print(f"artifact round trip is bit-identical ({path.stat().st_size} bytes)")

    query = DataRecord("CCCC[n+]1ccn(C)c1", "F[B-](F)(F)F", "c1ccccc1", 318.15, 0.0,
                       "aromatics", "imidazolium")
    ln_gamma = float(model.predict([query])[0])
    print(f"benzene in [BMIM][BF4] at 318.15 K: ln gamma_inf = {ln_gamma:.3f}, "
          f"gamma_inf = {np.exp(ln_gamma):.3f}")


if __name__ == "__main__":
    main()
