"""Circular (ECFP-style) fingerprints and Tanimoto similarity.

Hashes are derived with blake2b over a canonical byte encoding, so bit
patterns are stable across processes and independent of PYTHONHASHSEED.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .graph import MolGraph


class MismatchedParams(ValueError):
    """Fingerprints being compared were built with different parameters."""


def stable_hash(value) -> int:
    """Deterministic 64-bit hash of a nested int/float/str/tuple structure."""
    digest = hashlib.blake2b(repr(value).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class Fingerprint:
    bits: int  # big-int bitset
    width: int
    radius: int

    def count(self) -> int:
        return self.bits.bit_count()

    def on_bits(self) -> list[int]:
        return [i for i in range(self.width) if (self.bits >> i) & 1]


def fingerprint(graph: MolGraph, radius: int = 2, width: int = 2048) -> Fingerprint:
    """Iterated neighborhood-hash fingerprint.

    Layer 0 hashes (element, charge, degree, total H, aromatic); each further
    layer mixes the sorted (bond order, neighbor hash) multiset. One bit is
    set per (atom, layer).
    """
    if width <= 0 or width & (width - 1):
        raise ValueError("width must be a power of two")
    graph.require_consistent()
    n = len(graph.atoms)
    neighbors = [graph.neighbors(i) for i in range(n)]
    layer = [
        stable_hash(
            (a.element, a.charge, len(neighbors[i]), graph.total_h(i), a.aromatic)
        )
        for i, a in enumerate(graph.atoms)
    ]
    bits = 0
    for h in layer:
        bits |= 1 << (h % width)
    for depth in range(1, radius + 1):
        layer = [
            stable_hash(
                (depth, layer[i], tuple(sorted((order, layer[v]) for v, order in neighbors[i])))
            )
            for i in range(n)
        ]
        for h in layer:
            bits |= 1 << (h % width)
    return Fingerprint(bits, width, radius)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """|a & b| / |a | b|; 1.0 when both fingerprints are empty."""
    if a.width != b.width or a.radius != b.radius:
        raise MismatchedParams(
            f"width/radius mismatch: ({a.width},{a.radius}) vs ({b.width},{b.radius})"
        )
    union = (a.bits | b.bits).bit_count()
    if union == 0:
        return 1.0
    return (a.bits & b.bits).bit_count() / union
