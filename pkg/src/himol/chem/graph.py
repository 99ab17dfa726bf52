"""Attributed molecular graphs and the valence model.

Aromatic bonds contribute 1.5 to an atom's bond-order sum; the aromatic
contribution is floored so that fused-ring atoms (three aromatic bonds,
4.5 raw) count as 4. Two carve-outs keep the common heteroaromatics
expressible without aromaticity perception: aromatic O/S and any aromatic
atom written with an explicit bracket H count its aromatic bonds as sigma
bonds (1.0 each). Implicit hydrogens are granted to aromatic carbon only;
bracket atoms never receive implicit hydrogens.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

AROMATIC = 1.5  # bond order used for aromatic bonds

# Allowed valences per element (neutral). A positive charge adds one to the
# N/O maximum, a negative charge subtracts one.
VALENCES: dict[str, tuple[int, ...]] = {
    "B": (3,),
    "C": (4,),
    "N": (3,),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
    "H": (1,),
}


class InvalidGraph(ValueError):
    """Operation requires a valence-consistent graph."""


def allowed_valences(element: str, charge: int) -> tuple[int, ...]:
    base = VALENCES[element]
    if element in ("N", "O") and charge != 0:
        shift = 1 if charge > 0 else -1
        return tuple(max(0, v + shift) for v in base)
    return base


@dataclass(frozen=True)
class Atom:
    element: str
    charge: int = 0
    explicit_h: int = 0
    aromatic: bool = False
    bracket: bool = False


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order: float  # 1, 2, 3 or AROMATIC

    def other(self, idx: int) -> int:
        return self.b if idx == self.a else self.a


@dataclass
class MolGraph:
    atoms: list[Atom] = field(default_factory=list)
    bonds: list[Bond] = field(default_factory=list)

    def add_atom(self, atom: Atom) -> int:
        self.atoms.append(atom)
        return len(self.atoms) - 1

    def add_bond(self, a: int, b: int, order: float) -> None:
        n = len(self.atoms)
        if a == b:
            raise ValueError("self-loop bond")
        if not (0 <= a < n and 0 <= b < n):
            raise ValueError("bond atom index out of range")
        if self.find_bond(a, b) is not None:
            raise ValueError("duplicate bond")
        self.bonds.append(Bond(a, b, order))

    def find_bond(self, a: int, b: int) -> Bond | None:
        for bond in self.bonds:
            if {bond.a, bond.b} == {a, b}:
                return bond
        return None

    def neighbors(self, idx: int) -> list[tuple[int, float]]:
        out = []
        for bond in self.bonds:
            if bond.a == idx:
                out.append((bond.b, bond.order))
            elif bond.b == idx:
                out.append((bond.a, bond.order))
        return out

    def degree(self, idx: int) -> int:
        return len(self.neighbors(idx))

    # -- valence arithmetic -------------------------------------------------

    def bond_order_sum(self, idx: int) -> float:
        """Effective bond-order sum under the aromatic counting rules."""
        atom = self.atoms[idx]
        plain = 0.0
        n_aromatic = 0
        for _, order in self.neighbors(idx):
            if order == AROMATIC:
                n_aromatic += 1
            else:
                plain += order
        if n_aromatic == 0:
            return plain
        sigma_only = atom.element in ("O", "S") or (atom.bracket and atom.explicit_h > 0)
        if sigma_only:
            return plain + n_aromatic
        return plain + math.floor(AROMATIC * n_aromatic)

    def implicit_h(self, idx: int) -> int:
        atom = self.atoms[idx]
        if atom.bracket:
            return 0
        used = self.bond_order_sum(idx)
        if atom.aromatic and atom.element != "C":
            return 0
        for valence in allowed_valences(atom.element, atom.charge):
            if valence >= used:
                return int(valence - used)
        return 0

    def total_h(self, idx: int) -> int:
        return self.atoms[idx].explicit_h + self.implicit_h(idx)

    def valence_violations(self) -> list[int]:
        """Indices of atoms whose bond orders + explicit H exceed the model."""
        bad = []
        for idx, atom in enumerate(self.atoms):
            used = self.bond_order_sum(idx) + atom.explicit_h
            if used > max(allowed_valences(atom.element, atom.charge)):
                bad.append(idx)
        return bad

    def aromatic_violations(self) -> list[int]:
        """Aromatic atoms not sitting on a cycle of aromatic bonds, plus
        endpoints of aromatic bonds touching non-aromatic atoms."""
        bad: set[int] = set()
        arom_adj: dict[int, set[int]] = {}
        for bond in self.bonds:
            if bond.order != AROMATIC:
                continue
            for end in (bond.a, bond.b):
                if not self.atoms[end].aromatic:
                    bad.add(end)
            arom_adj.setdefault(bond.a, set()).add(bond.b)
            arom_adj.setdefault(bond.b, set()).add(bond.a)
        # Strip degree<=1 vertices of the aromatic-bond subgraph; whatever
        # survives lies on a cycle.
        adj = {u: set(vs) for u, vs in arom_adj.items()}
        changed = True
        while changed:
            changed = False
            for u in list(adj):
                if len(adj[u]) <= 1:
                    for v in adj[u]:
                        adj[v].discard(u)
                    del adj[u]
                    changed = True
        for idx, atom in enumerate(self.atoms):
            if atom.aromatic and idx not in adj:
                bad.add(idx)
        return sorted(bad)

    def is_valence_consistent(self) -> bool:
        return not self.valence_violations() and not self.aromatic_violations()

    def require_consistent(self) -> None:
        if not self.is_valence_consistent():
            raise InvalidGraph("graph is not valence-consistent")

    # -- structure helpers --------------------------------------------------

    def components(self) -> list[list[int]]:
        seen: set[int] = set()
        comps = []
        for start in range(len(self.atoms)):
            if start in seen:
                continue
            stack = [start]
            comp = []
            seen.add(start)
            while stack:
                u = stack.pop()
                comp.append(u)
                for v, _ in self.neighbors(u):
                    if v not in seen:
                        seen.add(v)
                        stack.append(v)
            comps.append(sorted(comp))
        return comps

    def subgraph(self, keep: list[int]) -> "MolGraph":
        """Induced subgraph on ``keep`` (order preserved)."""
        remap = {old: new for new, old in enumerate(keep)}
        sub = MolGraph(atoms=[self.atoms[i] for i in keep])
        for bond in self.bonds:
            if bond.a in remap and bond.b in remap:
                sub.bonds.append(Bond(remap[bond.a], remap[bond.b], bond.order))
        return sub
