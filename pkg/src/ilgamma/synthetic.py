"""Synthetic activity-coefficient data over realistic ions and solutes.

The target is a smooth function of temperature and simple graph descriptors
(heavy-atom, heteroatom and aromatic-atom counts), so a graph model can learn
it exactly from structure. Used for tests, demos and desk-scale benchmarks
when the experimental data set is not at hand.
"""

from __future__ import annotations

import itertools

import numpy as np

from .dataset import DataRecord
from .featurizer import featurize

# (SMILES, cation family)
CATIONS: tuple[tuple[str, str], ...] = (
    ("CC[n+]1ccn(C)c1", "imidazolium"),
    ("CCCC[n+]1ccn(C)c1", "imidazolium"),
    ("CCCCCC[n+]1ccn(C)c1", "imidazolium"),
    ("CCCCCCCC[n+]1ccn(C)c1", "imidazolium"),
    ("CCCC[n+]1ccn(C)c1C", "imidazolium"),
    ("CCCC[n+]1ccccc1", "pyridinium"),
    ("CCCC[n+]1ccc(C)cc1", "pyridinium"),
    ("CCCC[N+]1(C)CCCC1", "pyrrolidinium"),
    ("CCCC[N+](C)(C)C", "ammonium"),
    ("CCCC[P+](CCCC)(CCCC)CCCC", "phosphonium"),
    ("CC[S+](CC)CC", "sulfonium"),
    ("OCC[N+](C)(C)C", "ammonium"),
)

ANIONS: tuple[str, ...] = (
    "F[B-](F)(F)F",
    "F[P-](F)(F)(F)(F)F",
    "O=S(=O)([N-]S(=O)(=O)C(F)(F)F)C(F)(F)F",
    "[O-]S(=O)(=O)C(F)(F)F",
    "N#C[N-]C#N",
    "[S-]C#N",
    "CC(=O)[O-]",
    "COS(=O)(=O)[O-]",
    "CCOS(=O)(=O)[O-]",
    "[Cl-]",
    "N#C[C-](C#N)C#N",
    "CCOP(=O)([O-])OCC",
)

# (SMILES, solute family)
SOLUTES: tuple[tuple[str, str], ...] = (
    ("CCCCC", "alkanes"),
    ("CCCCCC", "alkanes"),
    ("CCCCCCC", "alkanes"),
    ("CC(C)CC", "alkanes"),
    ("C=CCCCC", "alkenes"),
    ("C=CCCCCC", "alkenes"),
    ("C#CCCCC", "alkynes"),
    ("C#CCCC", "alkynes"),
    ("c1ccccc1", "aromatics"),
    ("Cc1ccccc1", "aromatics"),
    ("CCc1ccccc1", "aromatics"),
    ("C1CCCCC1", "cycloalkanes"),
    ("CC1CCCCC1", "cycloalkanes"),
    ("CO", "alcohols"),
    ("CCO", "alcohols"),
    ("CCCO", "alcohols"),
    ("CC(C)O", "alcohols"),
    ("O", "water"),
    ("CC(C)=O", "ketones"),
    ("CCC(C)=O", "ketones"),
    ("CCC=O", "aldehydes"),
    ("COC(C)=O", "esters"),
    ("CCOC(C)=O", "esters"),
    ("CCOCC", "ethers"),
    ("C1CCOC1", "ethers"),
    ("CC#N", "acetonitrile"),
    ("CC(=O)O", "acetic acid"),
    ("C[N+](=O)[O-]", "nitro alkanes"),
    ("c1ccncc1", "pyridine"),
    ("c1ccsc1", "thiophene"),
    ("CCN(CC)CC", "triethylamine"),
    ("ClCCl", "Cl, F compounds"),
    ("ClC(Cl)Cl", "Cl, F compounds"),
    ("Clc1ccccc1", "Cl, F compounds"),
    ("CC1=CCC(CC1)C(C)=C", "terpenoids"),
)


def descriptors(smiles: str) -> np.ndarray:
    """(heavy atoms, heteroatoms, aromatic atoms, hydrogens) of a molecule."""
    x = featurize(smiles).node_features
    hydrogens = float((x[:, 18:22] @ np.arange(4)).sum())
    return np.array([x.shape[0], x.shape[0] - x[:, 0].sum(), x[:, 10].sum(), hydrogens])


def synthetic_ln_gamma(cation: str, anion: str, solute: str, temperature: float) -> float:
    """Smooth reference function of structure and temperature."""
    s = descriptors(solute)
    c = descriptors(cation)
    a = descriptors(anion)
    inv_t = 1000.0 / temperature - 3.0
    value = (
        0.16 * s[0]
        - 0.22 * s[1]
        - 0.05 * s[2]
        + 0.02 * s[3]
        - 0.035 * c[0]
        + 0.06 * a[1]
        - 0.02 * a[0]
        + (0.25 + 0.04 * s[0] - 0.02 * c[2]) * inv_t
        - 0.3
    )
    return float(value)


def make_records(
    n_records: int,
    seed: int = 0,
    n_cations: int | None = None,
    n_anions: int | None = None,
    n_solutes: int | None = None,
    temperatures=(298.15, 313.15, 328.15, 343.15, 358.15, 373.15),
    noise: float = 0.0,
) -> list[DataRecord]:
    """Draw ``n_records`` records from the pools (first entries of each pool).

    Combinations (IL, solute) are sampled without replacement and expanded
    over the temperature grid until ``n_records`` rows exist.
    """
    rng = np.random.default_rng(seed)
    cations = CATIONS[: n_cations or len(CATIONS)]
    anions = ANIONS[: n_anions or len(ANIONS)]
    solutes = SOLUTES[: n_solutes or len(SOLUTES)]
    combos = list(itertools.product(range(len(cations)), range(len(anions)), range(len(solutes))))
    order = rng.permutation(len(combos))
    records: list[DataRecord] = []
    for k in order:
        ci, ai, si = combos[k]
        (cat, fam), anion, (sol, sfam) = cations[ci], anions[ai], solutes[si]
        for t in temperatures:
            y = synthetic_ln_gamma(cat, anion, sol, t)
            if noise:
                y += noise * rng.standard_normal()
            records.append(DataRecord(cat, anion, sol, float(t), y, sfam, fam))
            if len(records) == n_records:
                return records
    return records
