"""Matrix-completion baseline: six categorical IDs (IL, solute, cation, anion,
cation family, solute family) embedded by per-input MLPs, fused, conditioned
on temperature and regressed to ln(gamma_inf).

It can only predict for entities present in its vocabulary.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .autodiff import (
    MLP,
    Module,
    Tensor,
    add,
    concat,
    dropout,
    leaky_relu,
    no_grad,
    reshape,
    take_rows,
)
from .dataset import DataRecord, normalize_temperature, temperature_range

CATEGORIES = ("il", "solute", "cation", "anion", "cation_family", "solute_family")


class OutOfMatrixError(KeyError):
    """The requested entity never appeared in the training/validation data."""

    def __init__(self, category: str, value: str) -> None:
        self.category = category
        self.value = value
        super().__init__(f"{category} {value!r} is outside the matrix (unseen during training)")

    def __str__(self) -> str:
        return self.args[0]


def _key(record: DataRecord, category: str) -> str:
    if category == "il":
        return record.il
    if category == "solute":
        return record.solute_smiles
    if category == "cation":
        return record.cation_smiles
    if category == "anion":
        return record.anion_smiles
    if category == "cation_family":
        return record.cation_family
    if category == "solute_family":
        return record.solute_family
    raise KeyError(category)


@dataclass
class Vocabulary:
    maps: dict[str, dict[str, int]]

    def size(self, category: str) -> int:
        return len(self.maps[category])

    def index(self, category: str, value: str) -> int:
        try:
            return self.maps[category][value]
        except KeyError:
            raise OutOfMatrixError(category, value) from None

    def encode(self, record: DataRecord) -> tuple[int, ...]:
        return tuple(self.index(c, _key(record, c)) for c in CATEGORIES)

    def to_dict(self) -> dict[str, list[str]]:
        return {c: sorted(m, key=m.__getitem__) for c, m in self.maps.items()}

    @classmethod
    def from_dict(cls, data: dict[str, list[str]]) -> "Vocabulary":
        return cls({c: {v: i for i, v in enumerate(data[c])} for c in CATEGORIES})


def build_vocab(records: Sequence[DataRecord]) -> Vocabulary:
    """Sorted, dense index maps built from training + validation records."""
    maps = {}
    for category in CATEGORIES:
        values = set()
        for r in records:
            value = _key(r, category)
            if not value:
                raise ValueError(f"record lacks a {category} key: {r}")
            values.add(value)
        maps[category] = {v: i for i, v in enumerate(sorted(values))}
    return Vocabulary(maps)


@dataclass
class McmConfig:
    embedding_widths: list[int] = field(default_factory=lambda: [64, 32])
    fusion_widths: list[int] = field(default_factory=lambda: [256, 128])
    head_widths: list[int] = field(default_factory=lambda: [64, 1])
    activation_slope: float = 0.01
    dropout: float = 0.0

    @classmethod
    def from_dict(cls, data: dict) -> "McmConfig":
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class McmBatch:
    ids: np.ndarray  # (B, 6)
    t_norm: np.ndarray  # (B, 1)
    targets: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.ids.shape[0]


class McmModel(Module):
    kind = "mcm"

    def __init__(self, vocabulary: Vocabulary, config: McmConfig | None = None, seed: int = 0) -> None:
        config = config or McmConfig()
        rng = np.random.default_rng(seed)
        slope, rate = config.activation_slope, config.dropout
        # one-hot @ W == row lookup, so the first layer is an embedding table
        self.embeddings = [
            MLP(rng, [vocabulary.size(c)] + config.embedding_widths, slope, rate)
            for c in CATEGORIES
        ]
        fused_in = len(CATEGORIES) * config.embedding_widths[-1]
        self.fusion = MLP(rng, [fused_in] + config.fusion_widths, slope, rate)
        self.head = MLP(rng, [config.fusion_widths[-1] + 1] + config.head_widths, slope, rate,
                        final_activation=False)
        self.vocabulary = vocabulary
        self.config = config
        self.seed = seed
        self.t_min: float | None = None
        self.t_max: float | None = None
        self.assign_names("mcm")

    def _embed(self, k: int, ids: np.ndarray, training, rng) -> Tensor:
        mlp = self.embeddings[k]
        first = mlp.layers[0]
        h = leaky_relu(add(take_rows(first.w, ids), first.b), mlp.slope)
        h = dropout(h, mlp.dropout_rate, training, rng)
        for layer in mlp.layers[1:]:
            h = dropout(leaky_relu(layer(h), mlp.slope), mlp.dropout_rate, training, rng)
        return h

    def forward(self, batch: McmBatch, training: bool = False, rng=None) -> Tensor:
        parts = [self._embed(k, batch.ids[:, k], training, rng) for k in range(len(CATEGORIES))]
        fused = self.fusion(concat(parts, axis=1), training, rng)
        out = self.head(concat([fused, Tensor(batch.t_norm)], axis=1), training, rng)
        return reshape(out, (-1,))

    def fit_normalization(self, records: Sequence[DataRecord]) -> None:
        self.t_min, self.t_max = temperature_range(records)

    def normalize(self, temperatures) -> np.ndarray:
        if self.t_min is None:
            raise RuntimeError("temperature normalization has not been fitted")
        return normalize_temperature(temperatures, self.t_min, self.t_max)

    def make_batch(self, records: Sequence[DataRecord], with_targets: bool = True) -> McmBatch:
        ids = np.array([self.vocabulary.encode(r) for r in records], dtype=np.intp)
        t = self.normalize([r.temperature for r in records]).reshape(-1, 1)
        y = np.array([r.ln_gamma for r in records]) if with_targets else None
        return McmBatch(ids.reshape(-1, len(CATEGORIES)), t, y)

    def predict(self, records: Sequence[DataRecord], batch_size: int = 2048) -> np.ndarray:
        out = []
        with no_grad():
            for start in range(0, len(records), batch_size):
                chunk = records[start : start + batch_size]
                out.append(self.forward(self.make_batch(chunk, with_targets=False)).value)
        return np.concatenate(out) if out else np.zeros(0)

    def artifact_config(self) -> dict:
        return self.config.to_dict()
