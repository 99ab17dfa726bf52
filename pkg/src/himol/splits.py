"""Scaffold-based dataset splitting.

Molecules group by canonical scaffold; groups are sorted by descending
size (seed-shuffled within equal sizes) and assigned whole to train until
the 80% target, then to validation until 10%, remainder to test, while
reserving enough groups for the later splits to be nonempty.
"""

from __future__ import annotations

import numpy as np

from .chem import canonicalize, parse, scaffold


class TooFewScaffolds(ValueError):
    pass


def scaffold_key(smiles: str) -> str:
    """Canonical scaffold string; acyclic molecules share the empty key."""
    return canonicalize(scaffold(parse(smiles)))


def scaffold_split(
    smiles: list[str],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[list[str], list[str], list[str]]:
    """Deterministic (per seed) partition of the input into train/valid/test."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must sum to 1")
    groups: dict[str, list[int]] = {}
    for idx, s in enumerate(smiles):
        groups.setdefault(scaffold_key(s), []).append(idx)
    if len(groups) < 3:
        raise TooFewScaffolds(
            f"need at least 3 scaffold groups, found {len(groups)}"
        )
    rng = np.random.default_rng(seed)
    keys = list(groups)
    order = [keys[i] for i in rng.permutation(len(keys))]
    order.sort(key=lambda key: -len(groups[key]))  # stable: seed breaks ties
    n = len(smiles)
    targets = [ratios[0] * n, ratios[1] * n]
    buckets: list[list[int]] = [[], [], []]
    phase = 0
    for pos, key in enumerate(order):
        groups_left_after = len(order) - pos - 1
        # Advance once the phase target is met, or when the later splits
        # would otherwise end up empty.
        while phase < 2 and (
            len(buckets[phase]) >= targets[phase] or groups_left_after < 2 - phase
        ):
            phase += 1
        buckets[phase].extend(groups[key])
    assert buckets[1] and buckets[2]
    return tuple([smiles[i] for i in sorted(bucket)] for bucket in buckets)
