"""Dual-channel GNN: GINE+GRU message passing for the ionic liquid (cation and
anion share one channel) and for the solute, sum pooling, an interaction MLP
and a temperature-conditioned head predicting ln(gamma_inf)."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .autodiff import (
    MLP,
    GRUCell,
    Module,
    Parameter,
    Segments,
    Tensor,
    add,
    concat,
    glorot_uniform,
    leaky_relu,
    matmul,
    mul,
    no_grad,
    reshape,
    segment_sum,
    take_rows,
)
from .dataset import DataRecord, normalize_temperature, temperature_range
from .featurizer import EDGE_DIM, FEATURIZER_VERSION, NODE_DIM, AttributedGraph, featurize


@dataclass
class GnnConfig:
    hidden_dim: int = 64
    num_layers: int = 2
    channel_mlp_widths: list[int] = field(default_factory=lambda: [256, 256, 128])
    interaction_widths: list[int] = field(default_factory=lambda: [256, 256, 256])
    head_widths: list[int] = field(default_factory=lambda: [257, 128, 1])
    activation_slope: float = 0.01
    dropout: float = 0.0
    share_layer_weights: bool = False

    def __post_init__(self) -> None:
        if self.hidden_dim <= 0 or self.num_layers < 1:
            raise ValueError("hidden_dim and num_layers must be positive")
        if self.head_widths[0] != self.interaction_widths[-1] + 1:
            raise ValueError(
                "head input width must be the interaction output width + 1 "
                f"(temperature), got {self.head_widths[0]} vs {self.interaction_widths[-1]}"
            )
        if self.head_widths[-1] != 1:
            raise ValueError("the head must end in a single output")

    @classmethod
    def from_dict(cls, data: dict) -> "GnnConfig":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def to_dict(self) -> dict:
        return asdict(self)


# batching -------------------------------------------------------------------

@dataclass
class GraphBatch:
    """Disjoint union of graphs; ``node_owner`` maps each node to a sample."""

    node_features: np.ndarray
    edge_source: np.ndarray
    edge_target: np.ndarray
    edge_features: np.ndarray
    node_owner: np.ndarray
    num_samples: int

    def __post_init__(self) -> None:
        self.neighbor_segments = Segments(self.edge_target, self.num_nodes)
        self.pool_segments = Segments(self.node_owner, self.num_samples)

    @property
    def num_nodes(self) -> int:
        return self.node_features.shape[0]

    @classmethod
    def collate(cls, graphs: Sequence[AttributedGraph], owners: Sequence[int], num_samples: int):
        offsets = np.cumsum([0] + [g.num_nodes for g in graphs])
        nodes = np.concatenate([g.node_features for g in graphs]).reshape(-1, NODE_DIM)
        edges = np.concatenate([g.edge_index + off for g, off in zip(graphs, offsets)], axis=1)
        edge_feats = np.concatenate([g.edge_features for g in graphs]).reshape(-1, EDGE_DIM)
        owner = np.repeat(np.asarray(owners, dtype=np.intp), [g.num_nodes for g in graphs])
        return cls(nodes, edges[0], edges[1], edge_feats, owner, num_samples)

    @classmethod
    def single(cls, graph: AttributedGraph) -> "GraphBatch":
        return cls.collate([graph], [0], 1)


@dataclass
class GnnBatch:
    il: GraphBatch
    solute: GraphBatch
    t_norm: np.ndarray  # (B, 1)
    targets: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.t_norm.shape[0]


def collate_samples(
    cations: Sequence[AttributedGraph],
    anions: Sequence[AttributedGraph],
    solutes: Sequence[AttributedGraph],
    t_norm,
    targets=None,
) -> GnnBatch:
    b = len(solutes)
    owners = list(range(b))
    il = GraphBatch.collate(list(cations) + list(anions), owners + owners, b)
    sol = GraphBatch.collate(list(solutes), owners, b)
    t = np.asarray(t_norm, dtype=np.float64).reshape(b, 1)
    y = None if targets is None else np.asarray(targets, dtype=np.float64).reshape(b)
    return GnnBatch(il, sol, t, y)


def _as_batch(graph) -> GraphBatch:
    return graph if isinstance(graph, GraphBatch) else GraphBatch.single(graph)


# layers ---------------------------------------------------------------------

class GineGruLayer(Module):
    def __init__(self, rng: np.random.Generator, dim: int, slope: float) -> None:
        self.gine = MLP(rng, [dim, dim, dim], slope=slope, final_activation=False)
        self.eps = Parameter(np.zeros(1))
        self.gru = GRUCell(rng, dim)
        self.slope = slope

    def __call__(self, graph: GraphBatch, h: Tensor, edge_h: Tensor) -> Tensor:
        messages = leaky_relu(add(take_rows(h, graph.edge_source), edge_h), self.slope)
        aggregated = segment_sum(messages, graph.neighbor_segments)
        scaled = mul(h, add(self.eps, 1.0))
        update = leaky_relu(self.gine(add(scaled, aggregated)), self.slope)
        return self.gru(h, update)


class Channel(Module):
    """Embedding matrices plus the stack of GINE+GRU layers."""

    def __init__(self, rng: np.random.Generator, config: GnnConfig) -> None:
        d = config.hidden_dim
        self.theta_v = Parameter(glorot_uniform(rng, NODE_DIM, d))
        self.theta_e = Parameter(glorot_uniform(rng, EDGE_DIM, d))
        n_owned = 1 if config.share_layer_weights else config.num_layers
        self.layers = [GineGruLayer(rng, d, config.activation_slope) for _ in range(n_owned)]
        self.num_layers = config.num_layers

    def embed(self, graph) -> tuple[Tensor, Tensor]:
        graph = _as_batch(graph)
        if graph.node_features.shape[1] != self.theta_v.shape[0]:
            raise ValueError("node feature width does not match the featurizer version")
        h0 = matmul(Tensor(graph.node_features), self.theta_v)
        edge_h = matmul(Tensor(graph.edge_features), self.theta_e)
        return h0, edge_h

    def layer(self, index: int) -> GineGruLayer:
        return self.layers[0 if len(self.layers) == 1 else index]

    def node_states(self, graph) -> Tensor:
        graph = _as_batch(graph)
        h, edge_h = self.embed(graph)
        for l in range(self.num_layers):
            h = self.layer(l)(graph, h, edge_h)
        return h

    def fingerprint(self, graph) -> Tensor:
        """Sum-pooled final node states, one row per sample."""
        graph = _as_batch(graph)
        return segment_sum(self.node_states(graph), graph.pool_segments)


# model ----------------------------------------------------------------------

class GnnModel(Module):
    kind = "gnn"

    def __init__(self, config: GnnConfig | None = None, seed: int = 0) -> None:
        config = config or GnnConfig()
        rng = np.random.default_rng(seed)
        d = config.hidden_dim
        slope, rate = config.activation_slope, config.dropout
        self.il = Channel(rng, config)
        self.solute = Channel(rng, config)
        self.il_mlp = MLP(rng, [d] + config.channel_mlp_widths, slope, rate)
        self.solute_mlp = MLP(rng, [d] + config.channel_mlp_widths, slope, rate)
        self.interaction_mlp = MLP(
            rng, [2 * config.channel_mlp_widths[-1]] + config.interaction_widths, slope, rate
        )
        self.head = MLP(rng, config.head_widths, slope, rate, final_activation=False)
        self.config = config
        self.seed = seed
        self.featurizer_version = FEATURIZER_VERSION
        self.t_min: float | None = None
        self.t_max: float | None = None
        self.assign_names("gnn")

    # building blocks ------------------------------------------------------
    def il_fingerprint(self, cation, anion=None) -> Tensor:
        """IL fingerprint; with two graphs, both ions pool into one vector."""
        if anion is None:
            return self.il.fingerprint(cation)
        batch = GraphBatch.collate([cation, anion], [0, 0], 1)
        return self.il.fingerprint(batch)

    def solute_fingerprint(self, solute) -> Tensor:
        return self.solute.fingerprint(solute)

    def interaction(self, h_il, h_solute, training: bool = False, rng=None) -> Tensor:
        a = self.il_mlp(h_il, training, rng)
        b = self.solute_mlp(h_solute, training, rng)
        return self.interaction_mlp(concat([a, b], axis=1), training, rng)

    def predict_ln_gamma(self, h_il_s, t_norm, training: bool = False, rng=None) -> Tensor:
        t = np.asarray(t_norm, dtype=np.float64).reshape(-1, 1)
        return self.head(concat([h_il_s, Tensor(t)], axis=1), training, rng)

    def forward(self, batch: GnnBatch, training: bool = False, rng=None) -> Tensor:
        h_il = self.il.fingerprint(batch.il)
        h_s = self.solute.fingerprint(batch.solute)
        out = self.predict_ln_gamma(self.interaction(h_il, h_s, training, rng), batch.t_norm, training, rng)
        return reshape(out, (-1,))

    def forward_graphs(self, cation, anion, solute, t_norm: float) -> float:
        batch = collate_samples([cation], [anion], [solute], [t_norm])
        with no_grad():
            return float(self.forward(batch).value[0])

    # training protocol ------------------------------------------------------
    def fit_normalization(self, records: Sequence[DataRecord]) -> None:
        self.t_min, self.t_max = temperature_range(records)

    def normalize(self, temperatures) -> np.ndarray:
        if self.t_min is None:
            raise RuntimeError("temperature normalization has not been fitted")
        return normalize_temperature(temperatures, self.t_min, self.t_max)

    def make_batch(self, records: Sequence[DataRecord], with_targets: bool = True) -> GnnBatch:
        return collate_samples(
            [featurize(r.cation_smiles) for r in records],
            [featurize(r.anion_smiles) for r in records],
            [featurize(r.solute_smiles) for r in records],
            self.normalize([r.temperature for r in records]),
            [r.ln_gamma for r in records] if with_targets else None,
        )

    def predict(self, records: Sequence[DataRecord], batch_size: int = 512) -> np.ndarray:
        out = []
        with no_grad():
            for start in range(0, len(records), batch_size):
                chunk = records[start : start + batch_size]
                out.append(self.forward(self.make_batch(chunk, with_targets=False)).value)
        return np.concatenate(out) if out else np.zeros(0)

    def artifact_config(self) -> dict:
        return self.config.to_dict()
