"""Show how a SMILES string becomes node and edge feature matrices.

Usage: ``python demos/featurize_molecule.py [SMILES]`` (default: EMIM cation).
"""

from __future__ import annotations

import sys

from ilgamma.featurizer import feature_rows_csv, featurize
from ilgamma.smiles import read_smiles


def main(smiles: str) -> None:
    structure = read_smiles(smiles)
    print(f"{smiles}: {structure.num_atoms} heavy atoms, {len(structure.bonds)} bonds, "
          f"net charge {structure.total_charge:+d}")
    for i, atom in enumerate(structure.atoms):
        flags = "aromatic" if atom.aromatic else "aliphatic"
        print(f"  atom {i}: {atom.element:2s} {flags:9s} H={atom.total_h} charge={atom.formal_charge:+d}")
    graph = featurize(smiles)
    nodes, edges = feature_rows_csv(graph)
    print(f"\nnode features {graph.node_features.shape}, edge features {graph.edge_features.shape}")
    print(nodes)
    print(edges)


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "CC[n+]1ccn(C)c1")
