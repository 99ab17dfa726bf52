"""Repair-rule tests: paper examples, determinism, soundness."""

import numpy as np
import pytest

from himol.chem import is_valid
from himol.repair import RepairFailed, repair, replay

GOLDEN = [
    ("CC)CCC", "CCCCC"),
    ("CC(CCC", "CC(CCC)"),
    ("CC1CCC", "CCCCC"),
    ("C#C(=CC)C", "C#CC"),
    ("CC1C1", "CCC"),
]


class TestGolden:
    @pytest.mark.parametrize("broken,fixed", GOLDEN)
    def test_byte_exact(self, broken, fixed):
        trace = repair(broken, seed=0)
        assert trace.output == fixed
        assert is_valid(trace.output)

    def test_valid_passthrough(self):
        trace = repair("CCCC", seed=0)
        assert trace.output == "CCCC"
        assert trace.steps == []

    def test_rule_order(self):
        # every fired rule id is >= the previous one within a pass
        trace = repair("CC)C(C1CC", seed=0)
        order = [int(step.rule[1]) for step in trace.steps]
        assert order == sorted(order)
        assert is_valid(trace.output)


class TestContracts:
    def test_determinism(self):
        for seed in (0, 1, 99):
            t1 = repair("CC(C)(C)(C)(CC)C", seed=seed)
            t2 = repair("CC(C)(C)(C)(CC)C", seed=seed)
            assert t1.output == t2.output
            assert t1.steps == t2.steps

    def test_seed_changes_branch_choice(self):
        outputs = {repair("CC(C)(C)(C)(CC)C", seed=s).output for s in range(12)}
        assert len(outputs) > 1  # different branches get dropped
        assert all(is_valid(o) for o in outputs)

    def test_replay_reproduces_output(self):
        for broken, _ in GOLDEN:
            trace = repair(broken, seed=3)
            assert replay(trace.input, trace.steps) == trace.output

    def test_idempotent_on_valid(self):
        for s in ("CCO", "c1ccccc1", "CC(=O)[O-].[NH4+]", "C%12CCCC%12"):
            trace = repair(s, seed=7)
            assert trace.output == s
            assert trace.steps == []

    def test_failure_carries_partial_trace(self):
        with pytest.raises(RepairFailed) as err:
            repair("CC=", seed=0)  # dangling bond: outside the rules' reach
        assert err.value.trace.failed
        assert err.value.trace.input == "CC="

    def test_unlexable_fails(self):
        with pytest.raises(RepairFailed):
            repair("C$C", seed=0)

    def test_broken_aromatic_ring_fails(self):
        # no rule can rebuild an aromatic cycle
        with pytest.raises(RepairFailed):
            repair("cccccc", seed=0)


def mutate(smiles: str, rng) -> str:
    """Damage a valid SMILES with the defect classes model decoding produces
    (and the repair rules target): stray or missing branch tokens, orphan
    ring digits, and valence-overflowing insertions, all applied at token
    boundaries after an atom."""
    from himol.chem import ATOM, RING, lex

    tokens = lex(smiles)
    texts = [t.text for t in tokens]
    atom_slots = [i + 1 for i, t in enumerate(tokens) if t.kind in (ATOM, RING)]
    kind = int(rng.integers(0, 7))
    if kind == 0:  # stray branch close after an atom
        pos = atom_slots[int(rng.integers(0, len(atom_slots)))]
        texts.insert(pos, ")")
    elif kind == 1:  # unclosed branch open before an atom token
        from himol.chem import BOND

        starts = [
            i
            for i, t in enumerate(tokens)
            if t.kind == ATOM and i > 0 and tokens[i - 1].kind != BOND
        ]
        if not starts:
            return smiles + "("
        texts.insert(starts[int(rng.integers(0, len(starts)))], "(")
    elif kind == 2:  # orphan ring digit after an atom
        pos = atom_slots[int(rng.integers(0, len(atom_slots)))]
        texts.insert(pos, str(int(rng.integers(1, 10))))
    elif kind == 3:  # drop one branch close
        closes = [i for i, t in enumerate(tokens) if t.text == ")"]
        if closes:
            del texts[closes[int(rng.integers(0, len(closes)))]]
    elif kind == 4:  # drop one branch open
        opens = [i for i, t in enumerate(tokens) if t.text == "("]
        if opens:
            del texts[opens[int(rng.integers(0, len(opens)))]]
    elif kind == 5:  # valence-overflowing parenthesized branch
        pos = atom_slots[int(rng.integers(0, len(atom_slots)))]
        texts.insert(pos, "(=CC)")
    else:  # valence-overflowing chain insertion
        pos = atom_slots[int(rng.integers(0, len(atom_slots)))]
        texts.insert(pos, "=C")
    return "".join(texts)


class TestFuzz:
    def test_mutation_fuzz_sound(self):
        rng = np.random.default_rng(17)
        seeds = ["CCO", "CC(C)CC", "C1CCCCC1", "CC(=O)OC", "CCC(C)(C)CC",
                 "CCOC(=O)CC", "CC(C)C(C)CC"]
        failures = 0
        total = 1500
        for i in range(total):
            base = seeds[int(rng.integers(0, len(seeds)))]
            broken = mutate(base, rng)
            broken = mutate(broken, rng) if rng.random() < 0.4 else broken
            try:
                trace = repair(broken, seed=i)
                assert is_valid(trace.output), f"unsound repair of {broken!r}"
                assert replay(trace.input, trace.steps) == trace.output
            except RepairFailed:
                failures += 1
        assert failures / total < 0.01
