"""Attributed molecular graphs: 22-wide node features, 6-wide edge features.

Node layout (offsets)::

    0-8   atom type  C, O, N, F, S, Cl, P, B, Br
    9     in ring
    10    aromatic
    11-13 formal charge -1, 0, +1
    14-17 hybridization sp, sp2, sp3, sp3d2
    18-21 hydrogen count 0, 1, 2, 3

Edge layout: 0-3 bond type (single, double, triple, aromatic), 4 conjugated,
5 in ring. Hydrogens never become nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import networkx as nx
import numpy as np

from .smiles import ELEMENTS, BondOrder, MolecularStructure, read_smiles

FEATURIZER_VERSION = "ilgamma-features-1"
NODE_DIM = 22
EDGE_DIM = 6

CHARGES = (-1, 0, 1)
MAX_HYDROGENS = 3
BOND_TYPES = (BondOrder.SINGLE, BondOrder.DOUBLE, BondOrder.TRIPLE, BondOrder.AROMATIC)

# (name, width) of each one-hot group / flag, in layout order
NODE_GROUPS = (("atom_type", 9), ("in_ring", 1), ("aromatic", 1), ("charge", 3),
               ("hybridization", 4), ("num_h", 4))
EDGE_GROUPS = (("bond_type", 4), ("conjugated", 1), ("in_ring", 1))


class FeaturizationError(ValueError):
    pass


class Hybridization(Enum):
    SP = 0
    SP2 = 1
    SP3 = 2
    SP3D2 = 3


@dataclass(frozen=True)
class RingFlags:
    atoms: tuple[bool, ...]
    bonds: tuple[bool, ...]


@dataclass
class AttributedGraph:
    node_features: np.ndarray  # (num_nodes, 22)
    edge_index: np.ndarray  # (2, num_directed_edges): row 0 source, row 1 target
    edge_features: np.ndarray  # (num_directed_edges, 6)
    smiles: str = ""

    @property
    def num_nodes(self) -> int:
        return self.node_features.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edge_index.shape[1]


def perceive_rings(structure: MolecularStructure) -> RingFlags:
    """A bond is in a ring iff it is not a bridge; an atom iff it touches a ring bond."""
    graph = nx.Graph()
    graph.add_nodes_from(range(structure.num_atoms))
    graph.add_edges_from(b.endpoints for b in structure.bonds)
    bridges = {frozenset(e) for e in nx.bridges(graph)}
    bond_flags = tuple(frozenset(b.endpoints) not in bridges for b in structure.bonds)
    atom_flags = [False] * structure.num_atoms
    for b, flag in zip(structure.bonds, bond_flags):
        if flag:
            atom_flags[b.begin] = atom_flags[b.end] = True
    return RingFlags(tuple(atom_flags), bond_flags)


def perceive_hybridization(structure: MolecularStructure, atom_index: int) -> Hybridization:
    neighbors = structure.neighbors(atom_index)
    if len(neighbors) >= 5:
        return Hybridization.SP3D2
    orders = [b.order for _, b in neighbors]
    doubles = orders.count(BondOrder.DOUBLE)
    if BondOrder.TRIPLE in orders or doubles >= 2:
        return Hybridization.SP
    if structure.atoms[atom_index].aromatic or doubles == 1:
        return Hybridization.SP2
    return Hybridization.SP3


def _unsaturated(structure: MolecularStructure) -> list[bool]:
    flags = [a.aromatic for a in structure.atoms]
    for b in structure.bonds:
        if b.order is not BondOrder.SINGLE:
            flags[b.begin] = flags[b.end] = True
    return flags


def node_features(
    structure: MolecularStructure, atom_index: int, rings: RingFlags
) -> np.ndarray:
    atom = structure.atoms[atom_index]
    if atom.formal_charge not in CHARGES:
        raise FeaturizationError(
            f"{structure.source_smiles}: atom {atom_index} charge {atom.formal_charge} "
            "outside {-1, 0, +1}"
        )
    hydrogens = atom.total_h
    if hydrogens > MAX_HYDROGENS:
        raise FeaturizationError(
            f"{structure.source_smiles}: atom {atom_index} carries {hydrogens} hydrogens; "
            f"the H-count one-hot supports 0-{MAX_HYDROGENS}"
        )
    vec = np.zeros(NODE_DIM)
    vec[ELEMENTS.index(atom.element)] = 1.0
    vec[9] = float(rings.atoms[atom_index])
    vec[10] = float(atom.aromatic)
    vec[11 + CHARGES.index(atom.formal_charge)] = 1.0
    vec[14 + perceive_hybridization(structure, atom_index).value] = 1.0
    vec[18 + hydrogens] = 1.0
    return vec


def edge_features(
    structure: MolecularStructure,
    bond_index: int,
    rings: RingFlags,
    unsaturated: list[bool] | None = None,
) -> np.ndarray:
    """Conjugated means aromatic, or both endpoints carry a multiple bond or
    an aromatic flag."""
    bond = structure.bonds[bond_index]
    if unsaturated is None:
        unsaturated = _unsaturated(structure)
    conjugated = bond.order is BondOrder.AROMATIC or (
        unsaturated[bond.begin] and unsaturated[bond.end]
    )
    vec = np.zeros(EDGE_DIM)
    vec[BOND_TYPES.index(bond.order)] = 1.0
    vec[4] = float(conjugated)
    vec[5] = float(rings.bonds[bond_index])
    return vec


def to_graph(structure: MolecularStructure) -> AttributedGraph:
    rings = perceive_rings(structure)
    unsaturated = _unsaturated(structure)
    nodes = np.array(
        [node_features(structure, i, rings) for i in range(structure.num_atoms)]
    ).reshape(-1, NODE_DIM)
    sources, targets, feats = [], [], []
    for k, bond in enumerate(structure.bonds):
        f = edge_features(structure, k, rings, unsaturated)
        sources += [bond.begin, bond.end]
        targets += [bond.end, bond.begin]
        feats += [f, f]
    edge_index = np.array([sources, targets], dtype=np.intp).reshape(2, -1)
    edges = np.array(feats).reshape(-1, EDGE_DIM)
    for arr in (nodes, edge_index, edges):
        arr.setflags(write=False)
    return AttributedGraph(nodes, edge_index, edges, structure.source_smiles)


@lru_cache(maxsize=None)
def featurize(smiles: str) -> AttributedGraph:
    """SMILES to attributed graph, memoised (graphs are read-only)."""
    return to_graph(read_smiles(smiles))


def feature_rows_csv(graph: AttributedGraph) -> tuple[str, str]:
    """Render node and edge feature tables as CSV text for inspection."""
    node_cols = _column_names(NODE_GROUPS, {
        "atom_type": ELEMENTS,
        "charge": ("-1", "0", "+1"),
        "hybridization": ("sp", "sp2", "sp3", "sp3d2"),
        "num_h": ("0", "1", "2", "3"),
    })
    edge_cols = _column_names(EDGE_GROUPS, {"bond_type": ("single", "double", "triple", "aromatic")})
    node_lines = [",".join(["node"] + node_cols)]
    for i, row in enumerate(graph.node_features):
        node_lines.append(",".join([str(i)] + [str(int(v)) for v in row]))
    edge_lines = [",".join(["source", "target"] + edge_cols)]
    for (s, t), row in zip(graph.edge_index.T, graph.edge_features):
        edge_lines.append(",".join([str(s), str(t)] + [str(int(v)) for v in row]))
    return "\n".join(node_lines) + "\n", "\n".join(edge_lines) + "\n"


def _column_names(groups, labels) -> list[str]:
    cols = []
    for name, width in groups:
        if width == 1:
            cols.append(name)
        else:
            cols += [f"{name}={label}" for label in labels[name]]
    return cols
