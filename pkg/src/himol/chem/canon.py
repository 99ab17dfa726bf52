"""Canonical SMILES via neighborhood refinement.

Atoms are ranked by iterative refinement of (element, charge, total H,
aromatic) colors against neighbor ranks. When refinement stalls on a tied
cell, every member of the first ambiguous cell is individuated in turn and
the lexicographically smallest emitted string wins, so equal canonical
strings coincide exactly with attributed-graph isomorphism (stereo ignored).
"""

from __future__ import annotations

import heapq

from .graph import AROMATIC, Atom, MolGraph


def refine_ranks(
    n: int,
    colors: list,
    adjacency: list[list[tuple[int, float]]],
) -> list[int]:
    """Dense ranks from initial colors, refined by neighbor structure.

    Generic over color type (must be sortable); shared by canonicalization
    and the graph-kernel subgraph labeler.
    """
    order = sorted(set(colors))
    rank_of = {c: i for i, c in enumerate(order)}
    ranks = [rank_of[c] for c in colors]
    while True:
        keys = [
            (ranks[u], tuple(sorted((lab, ranks[v]) for v, lab in adjacency[u])))
            for u in range(n)
        ]
        uniq = sorted(set(keys))
        key_rank = {k: i for i, k in enumerate(uniq)}
        new = [key_rank[k] for k in keys]
        if new == ranks:
            return ranks
        ranks = new


def _adjacency(graph: MolGraph) -> list[list[tuple[int, float]]]:
    adj: list[list[tuple[int, float]]] = [[] for _ in graph.atoms]
    for bond in graph.bonds:
        adj[bond.a].append((bond.b, bond.order))
        adj[bond.b].append((bond.a, bond.order))
    return adj


def _bond_symbol(order: float, arom_a: bool, arom_b: bool) -> str:
    """Symbol required so that re-parsing recovers the same order."""
    if order == 1.0:
        return "-" if (arom_a and arom_b) else ""
    if order == AROMATIC:
        return "" if (arom_a and arom_b) else ":"
    if order == 2.0:
        return "="
    return "#"


def _atom_token(graph: MolGraph, idx: int) -> str:
    atom = graph.atoms[idx]
    total_h = graph.total_h(idx)
    symbol = atom.element.lower() if atom.aromatic else atom.element
    if atom.charge == 0 and atom.element != "H":
        # Emittable bare iff the parser would re-derive the same H count.
        probe = MolGraph(
            atoms=[
                a if i != idx else Atom(a.element, 0, 0, a.aromatic, False)
                for i, a in enumerate(graph.atoms)
            ],
            bonds=graph.bonds,
        )
        if probe.implicit_h(idx) == total_h:
            return symbol
    if total_h == 0:
        h = ""
    elif total_h == 1:
        h = "H"
    else:
        h = f"H{total_h}"
    if atom.charge == 0:
        q = ""
    elif atom.charge == 1:
        q = "+"
    elif atom.charge == -1:
        q = "-"
    else:
        q = f"+{atom.charge}" if atom.charge > 0 else f"-{-atom.charge}"
    return f"[{symbol}{h}{q}]"


class _Emitter:
    """Writes one component under discrete rankings.

    Atom tokens and bond symbols do not depend on the ranking, so they are
    computed once per graph and reused across the canonical search's many
    candidate emissions."""

    def __init__(self, graph: MolGraph):
        self.n = len(graph.atoms)
        self.adjacency = _adjacency(graph)
        self.atom_tokens = [_atom_token(graph, u) for u in range(self.n)]
        self.bond_symbols: dict[frozenset[int], str] = {}
        for bond in graph.bonds:
            self.bond_symbols[frozenset((bond.a, bond.b))] = _bond_symbol(
                bond.order, graph.atoms[bond.a].aromatic, graph.atoms[bond.b].aromatic
            )

    def __call__(self, ranks: list[int]) -> tuple[str, list[int]]:
        adj = [sorted(nbrs, key=lambda e: ranks[e[0]]) for nbrs in self.adjacency]
        start = min(range(self.n), key=lambda u: ranks[u])

        visit_order: dict[int, int] = {}
        children: dict[int, list[int]] = {}
        ring_partners: dict[int, list[int]] = {}
        seen_edges: set[frozenset[int]] = set()

        def classify(u: int) -> None:
            visit_order[u] = len(visit_order)
            children[u] = []
            for v, _ in adj[u]:
                pair = frozenset((u, v))
                if pair in seen_edges:
                    continue
                seen_edges.add(pair)
                if v in visit_order:
                    ring_partners.setdefault(u, []).append(v)
                    ring_partners.setdefault(v, []).append(u)
                else:
                    children[u].append(v)
                    classify(v)

        classify(start)

        digit_of: dict[frozenset[int], int] = {}
        free: list[int] = list(range(1, 100))
        heapq.heapify(free)
        out: list[str] = []

        def ring_token(digit: int) -> str:
            return str(digit) if digit <= 9 else f"%{digit:02d}"

        def walk(u: int, incoming: str) -> None:
            out.append(incoming + self.atom_tokens[u])
            for v in sorted(ring_partners.get(u, []), key=lambda w: ranks[w]):
                pair = frozenset((u, v))
                if pair not in digit_of:
                    digit_of[pair] = heapq.heappop(free)
                    out.append(self.bond_symbols[pair] + ring_token(digit_of[pair]))
                else:
                    digit = digit_of[pair]
                    out.append(ring_token(digit))
                    heapq.heappush(free, digit)
            kids = children[u]
            for i, v in enumerate(kids):
                sym = self.bond_symbols[frozenset((u, v))]
                if i < len(kids) - 1:
                    out.append("(")
                    walk(v, sym)
                    out.append(")")
                else:
                    walk(v, sym)

        walk(start, "")
        order = sorted(visit_order, key=visit_order.__getitem__)
        return "".join(out), order


_MAX_GENERATORS = 256


def search_min(
    n: int, colors: list, adjacency, emit, generators: list | None = None
) -> tuple[str, list[int]]:
    """Branch-and-min canonical search with automorphism pruning.

    Refines the coloring, individuates members of the smallest ambiguous
    cell in turn, and keeps the lexicographically smallest emitted string.
    ``emit(ranks)`` must return (string, emission order). Two branches
    emitting the same string reveal a graph automorphism; generators
    accumulate across the whole search, and at each node every generator
    that respects the node's coloring merges cell members into orbits so
    only one representative per orbit is explored. This collapses the
    otherwise factorial blowup on highly symmetric molecules.
    """
    if generators is None:
        generators = []
    ranks = refine_ranks(n, colors, adjacency)
    cells: dict[int, list[int]] = {}
    for u, r in enumerate(ranks):
        cells.setdefault(r, []).append(u)
    ambiguous = [r for r, members in cells.items() if len(members) > 1]
    if not ambiguous:
        return emit(ranks)
    target = min(ambiguous, key=lambda r: (len(cells[r]), r))

    parent = list(range(n))  # union-find over automorphism orbits

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: int, b: int) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    def apply(sigma: tuple[int, ...]) -> None:
        if all(ranks[sigma[x]] == ranks[x] for x in range(n)):
            for x in range(n):
                union(x, sigma[x])

    consumed = 0

    def absorb_new_generators() -> None:
        nonlocal consumed
        while consumed < len(generators):
            apply(generators[consumed])
            consumed += 1

    absorb_new_generators()
    best: str | None = None
    best_order: list[int] | None = None
    processed: list[int] = []
    for u in cells[target]:
        absorb_new_generators()  # deeper branches may have found symmetries
        if any(find(u) == find(p) for p in processed):
            continue
        processed.append(u)
        forced = [(ranks[v], 0 if v == u else 1) for v in range(n)]
        candidate, order = search_min(n, forced, adjacency, emit, generators)
        if best is None or candidate < best:
            best, best_order = candidate, order
        elif candidate == best:
            sigma = [0] * n
            for a, b in zip(best_order, order):
                sigma[a] = b
            if any(sigma[x] != x for x in range(n)):
                if len(generators) < _MAX_GENERATORS:
                    generators.append(tuple(sigma))
                apply(tuple(sigma))
    return best, best_order


def canonical_certificate(n: int, colors: list, adjacency) -> str:
    """Label-invariant certificate of a colored, edge-labeled graph: equal
    certificates iff the graphs are isomorphic respecting colors/labels."""

    def emit(ranks: list[int]) -> tuple[str, list[int]]:
        order = sorted(range(n), key=ranks.__getitem__)
        pos = {u: i for i, u in enumerate(order)}
        rows = [
            (colors[u], tuple(sorted((pos[v], lab) for v, lab in adjacency[u])))
            for u in order
        ]
        return repr(rows), order

    if n == 0:
        return "()"
    return search_min(n, colors, adjacency, emit)[0]


def canonical_component(graph: MolGraph) -> str:
    colors = [
        (a.element, a.charge, graph.total_h(i), a.aromatic)
        for i, a in enumerate(graph.atoms)
    ]
    return search_min(len(graph.atoms), colors, _adjacency(graph), _Emitter(graph))[0]


def canonicalize(graph: MolGraph) -> str:
    """Canonical SMILES for a valence-consistent graph.

    Two graphs canonicalize to the same string iff they are isomorphic as
    attributed graphs (element, charge, total H, aromaticity, bond orders).
    The empty graph canonicalizes to the empty string.
    """
    graph.require_consistent()
    if not graph.atoms:
        return ""
    parts = [canonical_component(graph.subgraph(comp)) for comp in graph.components()]
    return ".".join(sorted(parts))


def canonical_smiles(smiles: str) -> str:
    """Parse + canonicalize in one step (raises on invalid input)."""
    from .parser import parse

    return canonicalize(parse(smiles))
