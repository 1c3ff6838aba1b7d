"""Ensembles of independently trained models.

Member ``i`` uses seed ``base_seed + i`` for its own train/validation split of
the non-test pool, its weight initialisation and its minibatch order, so a
member is a pure function of (records, test membership, configs, seed).
Ensemble predictions average member outputs in ln(gamma_inf) space.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import artifact
from .dataset import DataRecord, split_train_val
from .gnn import GnnConfig, GnnModel
from .mcm import McmConfig, McmModel, build_vocab
from .trainer import TrainConfig, train

logger = logging.getLogger(__name__)

MANIFEST_KIND = "ilgamma-ensemble"


class EnsembleMemberError(RuntimeError):
    """A single member failed; carries its index and seed."""

    def __init__(self, index: int, seed: int, cause: BaseException) -> None:
        self.index = index
        self.seed = seed
        self.cause = cause
        super().__init__(f"ensemble member {index} (seed {seed}) failed: {cause}")


@dataclass
class MemberResult:
    seed: int
    artifact_bytes: bytes
    best_val_loss: float
    best_epoch: int
    epochs: int
    train_size: int
    val_size: int


@dataclass
class Ensemble:
    members: list = field(default_factory=list)
    seeds: list[int] = field(default_factory=list)
    mode: str = "prediction"
    test_indices: list[int] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.members)

    @property
    def t_range(self) -> tuple[float, float]:
        """Temperature interval covered by every member's training data."""
        return max(m.t_min for m in self.members), min(m.t_max for m in self.members)


def build_model(kind: str, model_config: dict, seed: int, vocab_records=None):
    if kind == "gnn":
        return GnnModel(GnnConfig.from_dict(model_config), seed=seed)
    if kind == "mcm":
        if vocab_records is None:
            raise ValueError("an MCM model needs records to build its vocabulary")
        return McmModel(build_vocab(vocab_records), McmConfig.from_dict(model_config), seed=seed)
    raise ValueError(f"unknown model kind {kind!r}")


def train_member(
    records: Sequence[DataRecord],
    pool: Sequence[int],
    mode: str,
    kind: str,
    model_config: dict,
    train_config: dict,
    seed: int,
    val_fraction: float | None = None,
) -> MemberResult:
    """Train one member on its own random train/val split of ``pool``."""
    train_idx, val_idx = split_train_val(records, pool, mode, seed, val_fraction)
    train_records = [records[i] for i in train_idx]
    val_records = [records[i] for i in val_idx]
    model = build_model(kind, model_config, seed, train_records + val_records)
    config = TrainConfig.from_dict({**train_config, "seed": seed})
    model, history = train(model, train_records, val_records, config)
    best = history.best_epoch
    return MemberResult(
        seed=seed,
        artifact_bytes=artifact.to_bytes(model, extra={"member_seed": seed, "mode": mode}),
        best_val_loss=history.val_loss[best - 1],
        best_epoch=best,
        epochs=len(history),
        train_size=len(train_records),
        val_size=len(val_records),
    )


def _member_job(args) -> MemberResult:
    return train_member(*args)


def train_ensemble(
    records: Sequence[DataRecord],
    test_indices: Sequence[int],
    n: int = 40,
    mode: str = "prediction",
    kind: str = "gnn",
    model_config: dict | None = None,
    train_config: dict | None = None,
    base_seed: int = 0,
    parallel: int = 1,
    val_fraction: float | None = None,
) -> Ensemble:
    """Train ``n`` members, never showing any of them a test record.

    ``parallel > 1`` trains members in worker processes; results do not
    depend on the degree of parallelism.
    """
    if n < 1:
        raise ValueError("an ensemble needs at least one member")
    test = set(int(i) for i in test_indices)
    pool = [i for i in range(len(records)) if i not in test]
    if not pool:
        raise ValueError("no records left for training after removing the test set")
    model_config = dict(model_config or {})
    train_config = dict(train_config or {})
    seeds = [base_seed + i for i in range(n)]
    jobs = [
        (list(records), pool, mode, kind, model_config, train_config, s, val_fraction)
        for s in seeds
    ]
    results: list[MemberResult] = []
    if parallel <= 1:
        for i, job in enumerate(jobs):
            results.append(_run(i, seeds[i], _member_job, job))
    else:
        with ProcessPoolExecutor(max_workers=parallel) as pool_exec:
            futures = [pool_exec.submit(_member_job, job) for job in jobs]
            for i, fut in enumerate(futures):
                results.append(_run(i, seeds[i], fut.result))
    members = [artifact.from_bytes(r.artifact_bytes) for r in results]
    return Ensemble(
        members=members,
        seeds=seeds,
        mode=mode,
        test_indices=sorted(test),
        val_losses=[r.best_val_loss for r in results],
    )


def _run(index: int, seed: int, fn, *args):
    try:
        result = fn(*args)
    except Exception as exc:  # identify the member, keep the cause chained
        raise EnsembleMemberError(index, seed, exc) from exc
    logger.info("member %d (seed %d) done", index, seed)
    return result


def member_predictions(ensemble: Ensemble, records: Sequence[DataRecord]) -> np.ndarray:
    """(members, samples) matrix of ln(gamma_inf) predictions."""
    if not ensemble.members:
        raise ValueError("empty ensemble")
    rows = []
    for i, member in enumerate(ensemble.members):
        try:
            rows.append(member.predict(records))
        except Exception as exc:
            raise EnsembleMemberError(i, ensemble.seeds[i], exc) from exc
    return np.vstack(rows)


def aggregate(predictions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exactly rounded column means (independent of member order) and
    population standard deviations."""
    predictions = np.atleast_2d(np.asarray(predictions, dtype=np.float64))
    n = predictions.shape[0]
    mean = np.array([math.fsum(col) / n for col in predictions.T])
    dev = predictions - mean
    std = np.array([math.sqrt(math.fsum(col * col) / n) for col in dev.T])
    return mean, std


def ensemble_predict(ensemble: Ensemble, records: Sequence[DataRecord]):
    """Mean ln(gamma_inf) per record and the member standard deviation."""
    return aggregate(member_predictions(ensemble, records))


# manifest files ---------------------------------------------------------------

def save_ensemble(ensemble: Ensemble, directory: str | Path) -> Path:
    """Write one artifact per member plus ``ensemble.json``; return its path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (member, seed) in enumerate(zip(ensemble.members, ensemble.seeds)):
        name = f"member_{i:03d}.bin"
        artifact.save(member, directory / name, extra={"member_seed": seed, "mode": ensemble.mode})
        entries.append({
            "file": name,
            "seed": seed,
            "best_val_loss": ensemble.val_losses[i] if ensemble.val_losses else None,
        })
    manifest = {
        "format": MANIFEST_KIND,
        "mode": ensemble.mode,
        "n": len(entries),
        "test_indices": ensemble.test_indices,
        "members": entries,
    }
    path = directory / "ensemble.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return path


def is_ensemble_manifest(path: str | Path) -> bool:
    path = Path(path)
    if path.is_dir():
        path = path / "ensemble.json"
    if path.suffix != ".json" or not path.exists():
        return False
    try:
        return json.loads(path.read_text()).get("format") == MANIFEST_KIND
    except (json.JSONDecodeError, AttributeError):
        return False


def load_ensemble(path: str | Path) -> Ensemble:
    path = Path(path)
    if path.is_dir():
        path = path / "ensemble.json"
    manifest = json.loads(path.read_text())
    if manifest.get("format") != MANIFEST_KIND:
        raise artifact.ArtifactError(f"{path} is not an ensemble manifest")
    members, seeds, losses = [], [], []
    for entry in manifest["members"]:
        members.append(artifact.load(path.parent / entry["file"]))
        seeds.append(int(entry["seed"]))
        losses.append(entry.get("best_val_loss"))
    return Ensemble(members, seeds, manifest.get("mode", "prediction"),
                    list(manifest.get("test_indices", [])), losses)


def as_ensemble(model) -> Ensemble:
    """Wrap a single model as a one-member ensemble."""
    return Ensemble([model], [model.seed])
