"""Activity-coefficient records, CSV ingest, split protocols and minibatches.

CSV columns: ``cation_smiles, anion_smiles, solute_smiles, temperature_K,
ln_gamma_inf, solute_family, cation_family``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from .featurizer import featurize
from .smiles import SmilesError

COLUMNS = (
    "cation_smiles",
    "anion_smiles",
    "solute_smiles",
    "temperature_K",
    "ln_gamma_inf",
    "solute_family",
    "cation_family",
)

SOLUTE_FAMILIES = (
    "Cl, F compounds",
    "acetic acid",
    "acetonitrile",
    "alcohols",
    "aldehydes",
    "alkanes",
    "alkenes",
    "alkynes",
    "aromatics",
    "cycloalkanes",
    "esters",
    "ethers",
    "ketones",
    "nitro alkanes",
    "pyridine",
    "terpenoids",
    "thiophene",
    "triethylamine",
    "water",
)


class DataError(ValueError):
    pass


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class DataRecord:
    cation_smiles: str
    anion_smiles: str
    solute_smiles: str
    temperature: float
    ln_gamma: float
    solute_family: str
    cation_family: str

    @property
    def il(self) -> str:
        return f"{self.cation_smiles}.{self.anion_smiles}"

    @property
    def combination(self) -> tuple[str, str]:
        return self.il, self.solute_smiles

    @property
    def molecules(self) -> tuple[str, str, str]:
        return self.cation_smiles, self.anion_smiles, self.solute_smiles


def validate_record(record: DataRecord) -> None:
    """Check a record's invariants, featurizing (and caching) its molecules."""
    if not (record.temperature > 0 and math.isfinite(record.temperature)):
        raise DataError(f"temperature must be positive, got {record.temperature}")
    if not math.isfinite(record.ln_gamma):
        raise DataError(f"ln_gamma_inf must be finite, got {record.ln_gamma}")
    if not record.solute_family or not record.cation_family:
        raise DataError("family labels must be non-empty")
    for role, smiles, charge in (
        ("cation", record.cation_smiles, 1),
        ("anion", record.anion_smiles, -1),
        ("solute", record.solute_smiles, 0),
    ):
        graph = featurize(smiles)
        total = int(graph.node_features[:, 13].sum() - graph.node_features[:, 11].sum())
        if total != charge:
            raise DataError(f"{role} {smiles!r} has net charge {total:+d}, expected {charge:+d}")


def load(path: str | Path) -> list[DataRecord]:
    """Read and validate a CSV data file; any bad row aborts with its line number."""
    records: list[DataRecord] = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        missing = [c for c in COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"{path}: missing columns {missing}")
        for row in reader:
            line = reader.line_num
            try:
                record = DataRecord(
                    cation_smiles=row["cation_smiles"].strip(),
                    anion_smiles=row["anion_smiles"].strip(),
                    solute_smiles=row["solute_smiles"].strip(),
                    temperature=_number(row["temperature_K"], "temperature_K"),
                    ln_gamma=_number(row["ln_gamma_inf"], "ln_gamma_inf"),
                    solute_family=row["solute_family"].strip(),
                    cation_family=row["cation_family"].strip(),
                )
                validate_record(record)
            except (DataError, SmilesError, ValueError) as exc:
                raise DataError(f"{path}:{line}: {exc}") from exc
            records.append(record)
    return records


def _number(text: str | None, column: str) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        raise DataError(f"non-numeric {column} {text!r}") from None


def save(records: Iterable[DataRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(COLUMNS)
        for r in records:
            writer.writerow([
                r.cation_smiles, r.anion_smiles, r.solute_smiles, repr(r.temperature),
                repr(r.ln_gamma), r.solute_family, r.cation_family,
            ])


# splits ---------------------------------------------------------------------

class Split(NamedTuple):
    """Record indices per subset."""

    train: list[int]
    val: list[int]
    test: list[int]

    def take(self, records: Sequence[DataRecord]) -> tuple[list[DataRecord], ...]:
        return tuple([records[i] for i in idx] for idx in self)


def _sample_keys(keys: Iterable, fraction: float, rng: np.random.Generator) -> set:
    ordered = sorted(set(keys))
    count = int(math.floor(fraction * len(ordered)))
    picked = rng.permutation(len(ordered))[:count]
    return {ordered[i] for i in picked}


def _train_val(indices: list[int], val_fraction: float, rng: np.random.Generator):
    order = rng.permutation(len(indices))
    n_val = int(math.floor(val_fraction * len(indices)))
    val = sorted(indices[i] for i in order[:n_val])
    train = sorted(indices[i] for i in order[n_val:])
    return train, val


def split_prediction(
    records: Sequence[DataRecord],
    test_indices: Iterable[int] | None = None,
    seed: int = 0,
    val_fraction: float = 0.1,
    test_fraction: float = 0.1,
) -> Split:
    """Test set of unseen IL-solute combinations, remainder split at random.

    ``test_indices`` imports an externally fixed test membership; without it,
    ``test_fraction`` of the unique combinations are sampled.
    """
    _check_fraction(val_fraction)
    rng = np.random.default_rng(seed)
    if test_indices is None:
        _check_fraction(test_fraction)
        chosen = _sample_keys((r.combination for r in records), test_fraction, rng)
        test = [i for i, r in enumerate(records) if r.combination in chosen]
    else:
        test = sorted(set(int(i) for i in test_indices))
        if test and (test[0] < 0 or test[-1] >= len(records)):
            raise SplitError("test index out of range")
    test_set = set(test)
    pool = [i for i in range(len(records)) if i not in test_set]
    overlap = {records[i].combination for i in test} & {records[i].combination for i in pool}
    if overlap:
        example = next(iter(sorted(overlap)))
        raise SplitError(
            f"{len(overlap)} IL-solute combinations occur in both test and train/val, "
            f"e.g. {example}"
        )
    train, val = _train_val(pool, val_fraction, rng)
    return Split(train, val, test)


def split_generalization(
    records: Sequence[DataRecord],
    seed: int = 0,
    test_fraction: float = 0.05,
    val_fraction: float = 0.05,
    stratified: bool = False,
) -> Split:
    """Hold out molecules: every test (val) record contains at least one
    molecule that never occurs in train.

    Molecules are sampled jointly over ions and solutes unless ``stratified``,
    which samples ions and solutes separately with the same fraction.
    """
    _check_fraction(test_fraction)
    _check_fraction(val_fraction)
    rng = np.random.default_rng(seed)
    test_mols = _sample_molecules(records, range(len(records)), test_fraction, rng, stratified)
    test = [i for i, r in enumerate(records) if test_mols.intersection(r.molecules)]
    test_set = set(test)
    rest = [i for i in range(len(records)) if i not in test_set]
    val_mols = _sample_molecules(records, rest, val_fraction, rng, stratified)
    val = [i for i in rest if val_mols.intersection(records[i].molecules)]
    val_set = set(val)
    train = [i for i in rest if i not in val_set]
    return Split(train, val, test)


def split_train_val(
    records: Sequence[DataRecord],
    pool: Sequence[int],
    mode: str,
    seed: int,
    val_fraction: float | None = None,
    stratified: bool = False,
) -> tuple[list[int], list[int]]:
    """Re-randomise train/val within a fixed non-test pool (ensemble members)."""
    rng = np.random.default_rng(seed)
    pool = sorted(pool)
    if mode == "prediction":
        return _train_val(pool, 0.1 if val_fraction is None else val_fraction, rng)
    if mode == "generalization":
        frac = 0.05 if val_fraction is None else val_fraction
        val_mols = _sample_molecules(records, pool, frac, rng, stratified)
        val = [i for i in pool if val_mols.intersection(records[i].molecules)]
        val_set = set(val)
        return [i for i in pool if i not in val_set], val
    raise ValueError(f"unknown split mode {mode!r}")


def _sample_molecules(records, indices, fraction, rng, stratified) -> set[str]:
    if not stratified:
        return _sample_keys(
            (m for i in indices for m in records[i].molecules), fraction, rng
        )
    ions = _sample_keys(
        (m for i in indices for m in records[i].molecules[:2]), fraction, rng
    )
    solutes = _sample_keys((records[i].solute_smiles for i in indices), fraction, rng)
    return ions | solutes


def _check_fraction(f: float) -> None:
    if not 0.0 < f < 1.0:
        raise ValueError(f"fractions must lie in (0, 1), got {f}")


def save_split(split: Split, path: str | Path, **meta) -> None:
    payload = dict(meta)
    payload.update(train=list(split.train), val=list(split.val), test=list(split.test))
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def load_split(path: str | Path) -> tuple[Split, dict]:
    payload = json.loads(Path(path).read_text())
    try:
        split = Split(
            [int(i) for i in payload["train"]],
            [int(i) for i in payload["val"]],
            [int(i) for i in payload["test"]],
        )
    except KeyError as exc:
        raise DataError(f"{path}: split manifest lacks {exc}") from None
    meta = {k: v for k, v in payload.items() if k not in Split._fields}
    return split, meta


# temperature and batching ------------------------------------------------------

def temperature_range(records: Iterable[DataRecord]) -> tuple[float, float]:
    temps = [r.temperature for r in records]
    if not temps:
        raise DataError("cannot compute a temperature range of no records")
    return min(temps), max(temps)


def normalize_temperature(t, t_min: float, t_max: float):
    """Min-max scaling; values outside [t_min, t_max] are not clamped."""
    if not t_max > t_min:
        raise ValueError(f"temperature range is degenerate: T_min={t_min}, T_max={t_max}")
    return (np.asarray(t, dtype=np.float64) - t_min) / (t_max - t_min)


def batches(n_or_records, batch_size: int, seed: int | None) -> Iterator[list[int]]:
    """Yield index batches covering ``range(n)`` once; the last may be short.

    ``seed=None`` keeps the natural order.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    n = n_or_records if isinstance(n_or_records, int) else len(n_or_records)
    order = np.arange(n) if seed is None else np.random.default_rng(seed).permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size].tolist()
