"""Scaffold extraction and scaffold-split tests."""

import pytest

from himol.chem import canonicalize, parse, scaffold
from himol.splits import TooFewScaffolds, scaffold_key, scaffold_split


def scaffold_of(smiles: str) -> str:
    return canonicalize(scaffold(parse(smiles)))


class TestScaffold:
    def test_side_chain_deleted(self):
        assert scaffold_of("CCC1CCCCC1") == scaffold_of("C1CCCCC1")

    def test_acyclic_gives_empty(self):
        assert scaffold_of("CCCC") == ""
        assert scaffold_of("C") == ""

    def test_linker_preserved(self):
        # 6-ring + CCC linker + 6-ring: every atom is a ring atom or on the
        # ring-ring path, so nothing is deleted
        g = scaffold(parse("C1CCCCC1CCCC1CCCCC1"))
        assert len(g.atoms) == 15
        assert canonicalize(g) == canonicalize(parse("C1CCCCC1CCCC1CCCCC1"))

    def test_idempotent(self):
        for s in ("CC1CCCCC1", "c1ccccc1CCC", "O=C1CCCC1C", "CCCC"):
            g = scaffold(parse(s))
            assert canonicalize(scaffold(g)) == canonicalize(g)

    def test_ring_bond_orders_preserved(self):
        g = scaffold(parse("C1=CCCC1CC"))
        assert sorted(b.order for b in g.bonds)[-1] == 2.0

    def test_exocyclic_terminal_atoms_pruned(self):
        # degree-1 atoms go even when double-bonded (the rule is purely
        # degree-based)
        assert scaffold_of("O=C1CCCC1") == scaffold_of("C1CCCC1")

    def test_aromatic_ring_survives(self):
        assert scaffold_of("CCCc1ccccc1") == scaffold_of("c1ccccc1")


class TestScaffoldSplit:
    def test_one_group_raises(self):
        with pytest.raises(TooFewScaffolds):
            scaffold_split(["CC", "CCC", "CCCC"])  # all acyclic: one group

    def test_three_singletons_one_per_split(self):
        data = ["C1CCCCC1", "c1ccccc1", "C1CCC1"]
        train, valid, test = scaffold_split(data)
        assert len(train) == len(valid) == len(test) == 1
        assert sorted(train + valid + test) == sorted(data)

    def test_partition_exact_and_deterministic(self):
        data = (
            ["C" * n + "C1CCCCC1" for n in range(1, 8)]
            + ["C" * n + "c1ccccc1" for n in range(1, 5)]
            + ["C" * n + "C1CCC1" for n in range(1, 4)]
            + ["C1CC1", "C1CCNCC1"]
        )
        a = scaffold_split(data, seed=5)
        b = scaffold_split(data, seed=5)
        assert a == b
        train, valid, test = a
        assert sorted(train + valid + test) == sorted(data)
        # groups are never split across buckets
        for bucket in a:
            keys = {scaffold_key(s) for s in bucket}
            for other in a:
                if other is bucket:
                    continue
                assert not keys & {scaffold_key(s) for s in other}

    def test_ratio_targets_respected(self):
        data = ["C" * n + "C1CCCCC1" for n in range(1, 30)] + [
            "c1ccccc1",
            "C1CCC1",
            "C1CC1",
        ]
        train, valid, test = scaffold_split(data)
        assert len(train) >= len(valid) >= 1
        assert len(test) >= 1

    def test_bad_ratios(self):
        with pytest.raises(ValueError):
            scaffold_split(["C1CC1", "C1CCC1", "c1ccccc1"], ratios=(0.9, 0.2, 0.1))
