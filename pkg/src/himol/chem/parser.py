"""SMILES parser: token stream to MolGraph.

Ring-closure digits pair first-open/first-close and may be reused once
closed. ``.`` separates components inside one graph. The tolerant entry
point used by the repair rules skips ring defects and collects valence
violations instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .graph import AROMATIC, Atom, MolGraph
from .tokens import (
    ATOM,
    BOND,
    BRANCH_CLOSE,
    BRANCH_OPEN,
    DOT,
    RING,
    LexError,
    SmilesToken,
    lex,
)

# Defect categories. The first six are the classes the repair rules target.
UNMATCHED_BRANCH_CLOSE = "unmatched_branch_close"
UNCLOSED_BRANCH = "unclosed_branch"
UNCLOSED_RING = "unclosed_ring"
RING_TOO_SMALL = "ring_too_small"
DUPLICATE_BOND = "duplicate_bond"
VALENCE_VIOLATION = "valence_violation"
DANGLING_BOND = "dangling_bond"
SYNTAX = "syntax"


class ParseError(ValueError):
    def __init__(self, kind: str, message: str, pos: int = -1, atom_index: int = -1):
        super().__init__(f"{kind}: {message}" + (f" (offset {pos})" if pos >= 0 else ""))
        self.kind = kind
        self.pos = pos
        self.atom_index = atom_index


@dataclass
class RingDefect:
    kind: str  # RING_TOO_SMALL or DUPLICATE_BOND
    open_token: int  # token indices of the offending pair
    close_token: int
    atom_a: int
    atom_b: int


@dataclass
class ParsedStructure:
    """Tolerant parse result: graph plus bookkeeping the repair rules need."""

    graph: MolGraph
    atom_token: list[int] = field(default_factory=list)  # atom idx -> token idx
    ring_defects: list[RingDefect] = field(default_factory=list)
    valence_violations: list[int] = field(default_factory=list)
    aromatic_violations: list[int] = field(default_factory=list)


def _resolve_order(pending: int | None, arom_a: bool, arom_b: bool) -> float:
    if pending is None:
        return AROMATIC if (arom_a and arom_b) else 1.0
    if pending == 0:
        return AROMATIC
    return float(pending)


def parse_tokens(tokens: list[SmilesToken], tolerant: bool = False) -> ParsedStructure:
    graph = MolGraph()
    result = ParsedStructure(graph)
    prev: int | None = None
    # branch stack entries: (attachment atom, atom count at open)
    stack: list[tuple[int, int]] = []
    pending: int | None = None
    pending_pos = -1
    # ring id -> (atom idx, pending order or None, token index)
    ring_open: dict[int, tuple[int, int | None, int]] = {}
    bond_source: dict[frozenset[int], str] = {}

    def fail(kind: str, message: str, pos: int, atom_index: int = -1):
        raise ParseError(kind, message, pos, atom_index)

    for t_idx, tok in enumerate(tokens):
        if tok.kind == ATOM:
            spec = tok.atom
            idx = graph.add_atom(
                Atom(spec.element, spec.charge, spec.explicit_h, spec.aromatic, spec.bracket)
            )
            result.atom_token.append(t_idx)
            if prev is not None:
                order = _resolve_order(
                    pending, graph.atoms[prev].aromatic, spec.aromatic
                )
                graph.add_bond(prev, idx, order)
                bond_source[frozenset((prev, idx))] = "chain"
            pending = None
            prev = idx
        elif tok.kind == BOND:
            if prev is None:
                fail(DANGLING_BOND, "bond with no preceding atom", tok.pos)
            if pending is not None:
                fail(SYNTAX, "two bond symbols in a row", tok.pos)
            pending = tok.bond_order
            pending_pos = tok.pos
        elif tok.kind == RING:
            if prev is None:
                fail(SYNTAX, "ring closure with no preceding atom", tok.pos)
            rid = tok.ring_id
            if rid in ring_open:
                a, open_order, open_tok = ring_open.pop(rid)
                b = prev
                if open_order is not None and pending is not None and open_order != pending:
                    fail(SYNTAX, f"conflicting bond orders on ring {rid}", tok.pos)
                order = _resolve_order(
                    open_order if open_order is not None else pending,
                    graph.atoms[a].aromatic,
                    graph.atoms[b].aromatic,
                )
                pending = None
                pair = frozenset((a, b))
                if a == b:
                    if tolerant:
                        result.ring_defects.append(
                            RingDefect(RING_TOO_SMALL, open_tok, t_idx, a, b)
                        )
                        continue
                    fail(RING_TOO_SMALL, f"ring {rid} closes on a single atom", tok.pos)
                if pair in bond_source:
                    kind = (
                        RING_TOO_SMALL if bond_source[pair] == "chain" else DUPLICATE_BOND
                    )
                    if tolerant:
                        result.ring_defects.append(
                            RingDefect(kind, open_tok, t_idx, a, b)
                        )
                        continue
                    fail(kind, f"ring {rid} forms a ring of fewer than 3 atoms"
                         if kind == RING_TOO_SMALL else f"ring {rid} duplicates a bond",
                         tok.pos)
                graph.add_bond(a, b, order)
                bond_source[pair] = "ring"
            else:
                ring_open[rid] = (prev, pending, t_idx)
                pending = None
        elif tok.kind == BRANCH_OPEN:
            if prev is None:
                fail(SYNTAX, "branch with no attachment atom", tok.pos)
            if pending is not None:
                fail(SYNTAX, "bond symbol before '('", tok.pos)
            stack.append((prev, len(graph.atoms)))
        elif tok.kind == BRANCH_CLOSE:
            if not stack:
                fail(UNMATCHED_BRANCH_CLOSE, "')' without matching '('", tok.pos)
            if pending is not None:
                fail(DANGLING_BOND, "bond symbol before ')'", pending_pos)
            attach, count_at_open = stack.pop()
            if len(graph.atoms) == count_at_open:
                fail(SYNTAX, "empty branch", tok.pos)
            prev = attach
        elif tok.kind == DOT:
            if pending is not None:
                fail(DANGLING_BOND, "bond symbol before '.'", pending_pos)
            prev = None
        else:  # pragma: no cover - lexer emits no other kinds
            fail(SYNTAX, f"unexpected token kind {tok.kind}", tok.pos)

    if pending is not None:
        fail(DANGLING_BOND, "trailing bond symbol", pending_pos)
    if stack:
        fail(UNCLOSED_BRANCH, f"{len(stack)} unclosed '('", stack[-1][1])
    if ring_open:
        rid, (_, _, open_tok) = sorted(ring_open.items())[0]
        fail(UNCLOSED_RING, f"ring {rid} never closes", tokens[open_tok].pos)

    result.valence_violations = graph.valence_violations()
    result.aromatic_violations = graph.aromatic_violations()
    if not tolerant:
        if result.valence_violations:
            idx = result.valence_violations[0]
            fail(VALENCE_VIOLATION, f"atom {idx} exceeds its allowed valence",
                 tokens[result.atom_token[idx]].pos, atom_index=idx)
        if result.aromatic_violations:
            idx = result.aromatic_violations[0]
            fail(VALENCE_VIOLATION, f"aromatic atom {idx} is not on an aromatic ring",
                 tokens[result.atom_token[idx]].pos, atom_index=idx)
    return result


def parse(smiles: str) -> MolGraph:
    """Parse a SMILES string to a molecular graph, or raise LexError/ParseError."""
    if not smiles:
        raise ParseError(SYNTAX, "empty SMILES string", 0)
    return parse_tokens(lex(smiles)).graph


def is_valid(smiles) -> bool:
    """True iff the string parses and the graph satisfies the valence model.

    Total: any exception maps to False.
    """
    try:
        parse(smiles)
        return True
    except (LexError, ParseError, ValueError, TypeError):
        return False
