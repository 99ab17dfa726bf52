"""Fingerprint and Tanimoto tests."""

import numpy as np
import pytest

from himol.chem import (
    Fingerprint,
    InvalidGraph,
    MismatchedParams,
    fingerprint,
    parse,
    tanimoto,
)
from test_canon import random_graph, relabel


def test_self_similarity_is_one():
    for s in ("C", "c1ccccc1", "CC(=O)OC", "CCN"):
        fp = fingerprint(parse(s))
        assert tanimoto(fp, fp) == 1.0


def test_disjoint_molecules_below_one():
    a = fingerprint(parse("C"))
    b = fingerprint(parse("c1ccccc1"))
    assert tanimoto(a, b) < 1.0


def test_direct_bit_arithmetic():
    a = Fingerprint(0b1100, 2048, 2)
    b = Fingerprint(0b1010, 2048, 2)
    assert tanimoto(a, b) == pytest.approx(1 / 3)


def test_empty_fingerprints_convention():
    assert tanimoto(Fingerprint(0, 2048, 2), Fingerprint(0, 2048, 2)) == 1.0


def test_mismatched_params():
    with pytest.raises(MismatchedParams):
        tanimoto(Fingerprint(1, 2048, 2), Fingerprint(1, 1024, 2))
    with pytest.raises(MismatchedParams):
        tanimoto(Fingerprint(1, 2048, 2), Fingerprint(1, 2048, 3))


def test_width_must_be_power_of_two():
    with pytest.raises(ValueError):
        fingerprint(parse("CC"), width=1000)


def test_invalid_graph_rejected():
    from himol.chem import Atom, MolGraph

    g = MolGraph()
    g.add_atom(Atom("O"))
    g.add_atom(Atom("C"))
    g.add_bond(0, 1, 3.0)
    with pytest.raises(InvalidGraph):
        fingerprint(g)


def test_permutation_invariance():
    rng = np.random.default_rng(3)
    for _ in range(60):
        g = random_graph(rng)
        perm = list(rng.permutation(len(g.atoms)))
        assert fingerprint(g).bits == fingerprint(relabel(g, perm)).bits


def test_stable_across_processes_shape():
    # bit pattern depends only on the graph, radius and width
    fp1 = fingerprint(parse("CCO"), radius=2, width=2048)
    fp2 = fingerprint(parse("OCC"), radius=2, width=2048)
    assert fp1.bits == fp2.bits
    assert fp1.width == 2048 and fp1.radius == 2


def test_similar_molecules_share_bits():
    a = fingerprint(parse("CCCCO"))
    b = fingerprint(parse("CCCCCO"))
    c = fingerprint(parse("FC(F)(F)F"))
    assert tanimoto(a, b) > tanimoto(a, c)
