"""Ring-system scaffolds: prune terminal atoms until only rings and linkers remain."""

from __future__ import annotations

from .graph import MolGraph


def scaffold(graph: MolGraph) -> MolGraph:
    """Scaffold of a valence-consistent graph.

    Repeatedly deletes atoms of degree <= 1 (side chains and isolated
    atoms); what survives is the ring systems plus the paths connecting
    them. Acyclic molecules give the empty graph. Idempotent.
    """
    graph.require_consistent()
    keep = set(range(len(graph.atoms)))
    while True:
        degree = {u: 0 for u in keep}
        for bond in graph.bonds:
            if bond.a in keep and bond.b in keep:
                degree[bond.a] += 1
                degree[bond.b] += 1
        drop = {u for u in keep if degree[u] <= 1}
        if not drop:
            break
        keep -= drop
    return graph.subgraph(sorted(keep))
