"""SMILES tokenizer and parser for the ionic-liquid / solute chemistry subset.

Supports the organic subset and bracket atoms over the nine elements
C, O, N, F, S, Cl, P, B, Br, with formal charges of -1, 0 or +1. Stereo marks
(``/``, ``\\``, ``@``) are accepted and discarded. Multi-component SMILES
(containing ``.``) and isotopes are rejected.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

logger = logging.getLogger(__name__)

ELEMENTS: tuple[str, ...] = ("C", "O", "N", "F", "S", "Cl", "P", "B", "Br")
AROMATIC_ELEMENTS = {"b": "B", "c": "C", "n": "N", "o": "O", "p": "P", "s": "S"}
DEFAULT_VALENCES: dict[str, tuple[int, ...]] = {
    "B": (3,),
    "C": (4,),
    "N": (3,),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
}


class SmilesError(ValueError):
    """Parse failure carrying the input string and the byte offset."""

    def __init__(self, smiles: str, offset: int, message: str) -> None:
        self.smiles = smiles
        self.offset = offset
        self.message = message
        super().__init__(f"{message} at offset {offset} in {smiles!r}")


class BondOrder(Enum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4

    @property
    def valence_contribution(self) -> float:
        return 1.5 if self is BondOrder.AROMATIC else float(self.value)


_BOND_SYMBOLS = {
    "-": BondOrder.SINGLE,
    "=": BondOrder.DOUBLE,
    "#": BondOrder.TRIPLE,
    ":": BondOrder.AROMATIC,
    "/": None,  # directional single bonds: stereo only
    "\\": None,
}


class TokenKind(Enum):
    ATOM = "atom"
    BOND = "bond"
    BRANCH_OPEN = "("
    BRANCH_CLOSE = ")"
    RING = "ring"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    offset: int
    text: str
    element: str | None = None
    aromatic: bool = False
    charge: int = 0
    hcount: int | None = None  # only for bracket atoms
    bond: BondOrder | None = None
    ring: int | None = None

    @property
    def bracket(self) -> bool:
        return self.hcount is not None


@dataclass
class Atom:
    element: str
    formal_charge: int = 0
    aromatic: bool = False
    explicit_h: int | None = None
    implicit_h: int = 0

    @property
    def total_h(self) -> int:
        return self.explicit_h if self.explicit_h is not None else self.implicit_h


@dataclass(frozen=True)
class Bond:
    begin: int
    end: int
    order: BondOrder

    @property
    def endpoints(self) -> tuple[int, int]:
        return self.begin, self.end


@dataclass
class MolecularStructure:
    atoms: list[Atom]
    bonds: list[Bond]
    source_smiles: str
    diagnostics: list[str] = field(default_factory=list)

    @property
    def num_atoms(self) -> int:
        return len(self.atoms)

    @property
    def total_charge(self) -> int:
        return sum(a.formal_charge for a in self.atoms)

    def neighbors(self, index: int) -> list[tuple[int, Bond]]:
        out = []
        for bond in self.bonds:
            if bond.begin == index:
                out.append((bond.end, bond))
            elif bond.end == index:
                out.append((bond.begin, bond))
        return out


# tokenizer --------------------------------------------------------------------

def tokenize(smiles: str) -> list[Token]:
    if not smiles:
        raise SmilesError(smiles, 0, "empty SMILES")
    tokens: list[Token] = []
    i, n = 0, len(smiles)
    while i < n:
        ch = smiles[i]
        if ch == "[":
            close = smiles.find("]", i)
            if close < 0:
                raise SmilesError(smiles, i, "unterminated bracket atom")
            tokens.append(_bracket_atom(smiles, i, smiles[i + 1 : close]))
            i = close + 1
        elif ch in "BC" and smiles.startswith(("Br", "Cl"), i):
            tokens.append(Token(TokenKind.ATOM, i, smiles[i : i + 2], element=smiles[i : i + 2]))
            i += 2
        elif ch in ("B", "C", "N", "O", "P", "S", "F"):
            tokens.append(Token(TokenKind.ATOM, i, ch, element=ch))
            i += 1
        elif ch in AROMATIC_ELEMENTS:
            tokens.append(
                Token(TokenKind.ATOM, i, ch, element=AROMATIC_ELEMENTS[ch], aromatic=True)
            )
            i += 1
        elif ch == "I":
            raise SmilesError(smiles, i, "element I outside the supported set")
        elif ch in _BOND_SYMBOLS:
            tokens.append(Token(TokenKind.BOND, i, ch, bond=_BOND_SYMBOLS[ch]))
            i += 1
        elif ch == "(":
            tokens.append(Token(TokenKind.BRANCH_OPEN, i, ch))
            i += 1
        elif ch == ")":
            tokens.append(Token(TokenKind.BRANCH_CLOSE, i, ch))
            i += 1
        elif ch.isdigit():
            tokens.append(Token(TokenKind.RING, i, ch, ring=int(ch)))
            i += 1
        elif ch == "%":
            digits = smiles[i + 1 : i + 3]
            if len(digits) != 2 or not digits.isdigit():
                raise SmilesError(smiles, i, "'%' must be followed by two digits")
            tokens.append(Token(TokenKind.RING, i, smiles[i : i + 3], ring=int(digits)))
            i += 3
        elif ch == ".":
            raise SmilesError(smiles, i, "multi-component SMILES are not accepted")
        else:
            raise SmilesError(smiles, i, f"unexpected character {ch!r}")
    return tokens


def _bracket_atom(smiles: str, start: int, body: str) -> Token:
    pos = 0

    def fail(msg: str):
        raise SmilesError(smiles, start + 1 + pos, msg)

    if body[:1].isdigit():
        fail("isotopes are not supported")
    if body[:2] in ("Cl", "Br"):
        element, aromatic, pos = body[:2], False, 2
    elif body[:1] in ("C", "O", "N", "F", "S", "P", "B"):
        element, aromatic, pos = body[0], False, 1
    elif body[:1] in AROMATIC_ELEMENTS:
        element, aromatic, pos = AROMATIC_ELEMENTS[body[0]], True, 1
    else:
        symbol = body[:2] if body[1:2].islower() else body[:1]
        fail(f"element {symbol!r} outside the supported set" if symbol else "empty bracket atom")
    # reject two-letter symbols that merely start with a supported letter
    if pos < len(body) and body[pos].islower():
        pos = 0
        fail(f"element {body[:2]!r} outside the supported set")
    if pos < len(body) and body[pos] == "@":
        while pos < len(body) and body[pos] == "@":
            pos += 1
        # extended chirality classes such as @TH1 or @SP2
        if body[pos : pos + 2] in ("TH", "AL", "SP", "TB", "OH"):
            pos += 2
            while pos < len(body) and body[pos].isdigit():
                pos += 1
    hcount = 0
    if pos < len(body) and body[pos] == "H":
        pos += 1
        digits = ""
        while pos < len(body) and body[pos].isdigit():
            digits += body[pos]
            pos += 1
        hcount = int(digits) if digits else 1
    charge = 0
    if pos < len(body) and body[pos] in "+-":
        sign = 1 if body[pos] == "+" else -1
        pos += 1
        if pos < len(body) and body[pos].isdigit():
            digits = ""
            while pos < len(body) and body[pos].isdigit():
                digits += body[pos]
                pos += 1
            charge = sign * int(digits)
        else:
            charge = sign
            while pos < len(body) and body[pos] == ("+" if sign > 0 else "-"):
                charge += sign
                pos += 1
    if pos < len(body) and body[pos] == ":":
        pos += 1
        while pos < len(body) and body[pos].isdigit():
            pos += 1
    if pos != len(body):
        fail(f"unexpected {body[pos]!r} in bracket atom")
    if charge not in (-1, 0, 1):
        raise SmilesError(smiles, start, f"formal charge {charge:+d} outside {{-1, 0, +1}}")
    return Token(
        TokenKind.ATOM,
        start,
        f"[{body}]",
        element=element,
        aromatic=aromatic,
        charge=charge,
        hcount=hcount,
    )


# parser ---------------------------------------------------------------------

def parse(tokens: list[Token], smiles: str = "") -> MolecularStructure:
    """Build atoms and bonds from a token sequence, resolving ring closures."""
    atoms: list[Atom] = []
    bonds: list[Bond] = []
    bonded: set[frozenset[int]] = set()
    branch_stack: list[int] = []
    open_rings: dict[int, tuple[int, BondOrder | None, int]] = {}
    previous: int | None = None
    pending_bond: tuple[BondOrder | None, int] | None = None

    def add_bond(a: int, b: int, order: BondOrder | None, offset: int) -> None:
        if a == b:
            raise SmilesError(smiles, offset, "bond from an atom to itself")
        key = frozenset((a, b))
        if key in bonded:
            raise SmilesError(smiles, offset, "duplicate bond between the same atoms")
        if order is None:
            both_aromatic = atoms[a].aromatic and atoms[b].aromatic
            order = BondOrder.AROMATIC if both_aromatic else BondOrder.SINGLE
        elif order is BondOrder.AROMATIC and not (atoms[a].aromatic and atoms[b].aromatic):
            raise SmilesError(smiles, offset, "aromatic bond between non-aromatic atoms")
        bonded.add(key)
        bonds.append(Bond(a, b, order))

    for tok in tokens:
        if tok.kind is TokenKind.ATOM:
            atoms.append(
                Atom(
                    element=tok.element,
                    formal_charge=tok.charge,
                    aromatic=tok.aromatic,
                    explicit_h=tok.hcount,
                )
            )
            index = len(atoms) - 1
            if previous is not None:
                order, offset = pending_bond if pending_bond else (None, tok.offset)
                add_bond(previous, index, order, offset)
            elif pending_bond is not None:
                raise SmilesError(smiles, pending_bond[1], "bond symbol without a preceding atom")
            pending_bond = None
            previous = index
        elif tok.kind is TokenKind.BOND:
            if pending_bond is not None:
                raise SmilesError(smiles, tok.offset, "two consecutive bond symbols")
            if previous is None:
                raise SmilesError(smiles, tok.offset, "bond symbol without a preceding atom")
            pending_bond = (tok.bond, tok.offset)
        elif tok.kind is TokenKind.BRANCH_OPEN:
            if previous is None:
                raise SmilesError(smiles, tok.offset, "branch without a preceding atom")
            if pending_bond is not None:
                raise SmilesError(smiles, tok.offset, "bond symbol with no following atom")
            branch_stack.append(previous)
        elif tok.kind is TokenKind.BRANCH_CLOSE:
            if not branch_stack:
                raise SmilesError(smiles, tok.offset, "unbalanced ')'")
            if pending_bond is not None:
                raise SmilesError(smiles, pending_bond[1], "bond symbol with no following atom")
            previous = branch_stack.pop()
        elif tok.kind is TokenKind.RING:
            if previous is None:
                raise SmilesError(smiles, tok.offset, "ring closure without a preceding atom")
            order = pending_bond[0] if pending_bond else None
            pending_bond = None
            if tok.ring in open_rings:
                other, other_order, _ = open_rings.pop(tok.ring)
                if order is not None and other_order is not None and order is not other_order:
                    raise SmilesError(smiles, tok.offset, "conflicting ring-closure bond orders")
                add_bond(other, previous, order or other_order, tok.offset)
            else:
                open_rings[tok.ring] = (previous, order, tok.offset)
    if pending_bond is not None:
        raise SmilesError(smiles, pending_bond[1], "bond symbol with no following atom")
    if branch_stack:
        raise SmilesError(smiles, len(smiles), "unbalanced '('")
    if open_rings:
        digit, (_, _, offset) = next(iter(open_rings.items()))
        raise SmilesError(smiles, offset, f"ring closure {digit} never closed")
    if not atoms:
        raise SmilesError(smiles, 0, "no atoms")
    return MolecularStructure(atoms=atoms, bonds=bonds, source_smiles=smiles)


# aromaticity normalisation --------------------------------------------------------

def _six_rings(structure: MolecularStructure) -> list[tuple[int, ...]]:
    adjacency: dict[int, list[int]] = {i: [] for i in range(structure.num_atoms)}
    for b in structure.bonds:
        adjacency[b.begin].append(b.end)
        adjacency[b.end].append(b.begin)
    rings: set[tuple[int, ...]] = set()

    def extend(path: list[int]) -> None:
        if len(path) == 6:
            if path[0] in adjacency[path[-1]]:
                # canonical form: smallest start, smaller second neighbour
                k = path.index(min(path))
                cyc = path[k:] + path[:k]
                if cyc[1] > cyc[-1]:
                    cyc = [cyc[0]] + cyc[1:][::-1]
                rings.add(tuple(cyc))
            return
        for nxt in adjacency[path[-1]]:
            if nxt not in path and nxt > path[0]:
                extend(path + [nxt])

    for start in range(structure.num_atoms):
        extend([start])
    return sorted(rings)


def normalize_kekule_rings(structure: MolecularStructure) -> MolecularStructure:
    """Mark six-membered rings of alternating single/double bonds aromatic.

    Rings already made aromatic count as either order, so fused Kekulé
    systems (e.g. naphthalene) are converted ring by ring.
    """
    bond_at = {frozenset(b.endpoints): i for i, b in enumerate(structure.bonds)}
    bonds = list(structure.bonds)
    atoms = [replace(a) for a in structure.atoms]
    rings = _six_rings(structure)
    changed = True
    while changed:
        changed = False
        for ring in rings:
            idx = [bond_at[frozenset((ring[k], ring[(k + 1) % 6]))] for k in range(6)]
            orders = [bonds[i].order for i in idx]
            if all(o is BondOrder.AROMATIC for o in orders):
                continue
            if not any(o is BondOrder.DOUBLE for o in orders):
                continue
            if _alternates(orders):
                for i in idx:
                    b = bonds[i]
                    bonds[i] = Bond(b.begin, b.end, BondOrder.AROMATIC)
                for a in ring:
                    atoms[a].aromatic = True
                changed = True
    return MolecularStructure(atoms, bonds, structure.source_smiles, list(structure.diagnostics))


def _alternates(orders: list[BondOrder]) -> bool:
    for phase in (0, 1):
        ok = True
        for k, o in enumerate(orders):
            want = BondOrder.DOUBLE if k % 2 == phase else BondOrder.SINGLE
            if o is not want and o is not BondOrder.AROMATIC:
                ok = False
                break
        if ok:
            return True
    return False


# hydrogens ------------------------------------------------------------------

def assign_implicit_hydrogens(structure: MolecularStructure) -> MolecularStructure:
    """Fill ``implicit_h`` of organic-subset atoms from default valences.

    Aromatic bonds count 1.5. Non-aromatic atoms take the smallest allowed
    valence not below their bond-order sum (P: 3/5, S: 2/4/6) and raise if the
    sum exceeds every allowed valence. Aromatic atoms use their lowest
    valence; a deficit (pyrrole-type N, furan O, thiophene S) clamps to 0
    with a diagnostic.
    """
    atoms = [replace(a) for a in structure.atoms]
    diagnostics = list(structure.diagnostics)
    sums = [0.0] * len(atoms)
    for b in structure.bonds:
        sums[b.begin] += b.order.valence_contribution
        sums[b.end] += b.order.valence_contribution
    for i, atom in enumerate(atoms):
        if atom.explicit_h is not None:
            continue
        allowed = DEFAULT_VALENCES[atom.element]
        total = sums[i]
        if atom.aromatic:
            valence = allowed[0]
            # fractional sums (fused ring atoms, 4.5) round toward the valence
            rounded = float(int(total)) if total > valence else float(-int(-total))
            hydrogens = valence - int(rounded)
        else:
            fitting = [v for v in allowed if v >= total]
            if not fitting:
                raise SmilesError(
                    structure.source_smiles,
                    0,
                    f"atom {i} ({atom.element}) has bond-order sum {total:g} above "
                    f"its largest allowed valence {allowed[-1]}",
                )
            hydrogens = fitting[0] - int(total)
        if hydrogens < 0:
            diagnostics.append(
                f"atom {i} ({atom.element}): valence deficit {hydrogens}, implicit H clamped to 0"
            )
            logger.debug("%s: %s", structure.source_smiles, diagnostics[-1])
            hydrogens = 0
        atom.implicit_h = hydrogens
    return MolecularStructure(atoms, list(structure.bonds), structure.source_smiles, diagnostics)


def read_smiles(smiles: str) -> MolecularStructure:
    """Tokenize, parse, normalise Kekulé six-rings and assign hydrogens."""
    structure = parse(tokenize(smiles), smiles)
    _check_connected(structure)
    structure = normalize_kekule_rings(structure)
    return assign_implicit_hydrogens(structure)


def _check_connected(structure: MolecularStructure) -> None:
    # tokens never produce a second component without '.', kept as a guard
    seen = {0}
    frontier = [0]
    while frontier:
        a = frontier.pop()
        for b, _ in structure.neighbors(a):
            if b not in seen:
                seen.add(b)
                frontier.append(b)
    if len(seen) != structure.num_atoms:
        raise SmilesError(structure.source_smiles, 0, "SMILES describes more than one component")


__all__ = [
    "AROMATIC_ELEMENTS",
    "Atom",
    "Bond",
    "BondOrder",
    "DEFAULT_VALENCES",
    "ELEMENTS",
    "MolecularStructure",
    "SmilesError",
    "Token",
    "TokenKind",
    "assign_implicit_hydrogens",
    "normalize_kekule_rings",
    "parse",
    "read_smiles",
    "tokenize",
]
