"""Rule-based repair of invalid SMILES strings.

Five rules run in fixed order, each as a while-loop to fixpoint, and the
whole sequence repeats (a rule can expose work for an earlier one, e.g.
dropping a branch may orphan a ring digit) until the string is valid, no
rule fires, or the pass budget is exhausted:

  R1  drop branch-close tokens that have no open branch to close
  R2  append missing branch-close tokens at the end of the string
  R3  drop ring-opening tokens that never close
  R4  for atoms over their allowed valence, drop one attached branch at a
      time (seeded uniform choice); without parenthesized branches the
      trailing chain after the atom is the droppable unit
  R5  drop ring open/close token pairs that form rings of fewer than
      3 atoms (including ring bonds duplicating an existing bond)
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .chem.parser import is_valid, parse_tokens
from .chem.tokens import (
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


@dataclass(frozen=True)
class RepairStep:
    rule: str  # "R1".."R5"
    pos: int  # char offset in the string this step was applied to
    removed: str
    inserted: str


@dataclass
class RepairTrace:
    input: str
    output: str
    steps: list[RepairStep] = field(default_factory=list)
    seed: int = 0
    failed: bool = False

    def to_dict(self) -> dict:
        return {
            "input": self.input,
            "output": self.output,
            "rules": [
                {"rule": s.rule, "pos": s.pos, "removed": s.removed, "inserted": s.inserted}
                for s in self.steps
            ],
            "failed": self.failed,
        }


class RepairFailed(Exception):
    """Repair did not reach a valid string; carries the partial trace."""

    def __init__(self, trace: RepairTrace):
        super().__init__(f"could not repair {trace.input!r}")
        self.trace = trace


def replay(smiles: str, steps: list[RepairStep]) -> str:
    """Re-apply a recorded trace; reproduces the repair output exactly."""
    s = smiles
    for step in steps:
        assert s[step.pos : step.pos + len(step.removed)] == step.removed
        s = s[: step.pos] + step.inserted + s[step.pos + len(step.removed) :]
    return s


class _Editor:
    """Token-level splices over the working string, with trace recording."""

    def __init__(self, smiles: str, steps: list[RepairStep]):
        self.s = smiles
        self.tokens = lex(smiles)
        self.steps = steps

    def remove_tokens(self, rule: str, idxs: list[int]) -> None:
        # Coalesce consecutive tokens into single splices and apply them
        # right-to-left so char offsets recorded for later splices stay
        # valid during replay.
        ordered = sorted(set(idxs))
        runs: list[tuple[int, int]] = []
        for i in ordered:
            if runs and i == runs[-1][1] + 1:
                runs[-1] = (runs[-1][0], i)
            else:
                runs.append((i, i))
        for lo, hi in reversed(runs):
            start = self.tokens[lo].pos
            end = self.tokens[hi].pos + len(self.tokens[hi].text)
            self.steps.append(RepairStep(rule, start, self.s[start:end], ""))
            self.s = self.s[:start] + self.s[end:]
        self.tokens = lex(self.s)

    def append(self, rule: str, text: str) -> None:
        self.steps.append(RepairStep(rule, len(self.s), "", text))
        self.s = self.s + text
        self.tokens = lex(self.s)


def _with_leading_bond(tokens: list[SmilesToken], idx: int) -> list[int]:
    """Token index plus an immediately preceding bond symbol, if any."""
    if idx > 0 and tokens[idx - 1].kind == BOND:
        return [idx - 1, idx]
    return [idx]


def _rule1(ed: _Editor) -> bool:
    changed = False
    while True:
        depth = 0
        target = -1
        for i, tok in enumerate(ed.tokens):
            if tok.kind == BRANCH_OPEN:
                depth += 1
            elif tok.kind == BRANCH_CLOSE:
                if depth == 0:
                    target = i
                    break
                depth -= 1
        if target < 0:
            return changed
        ed.remove_tokens("R1", [target])
        changed = True


def _rule2(ed: _Editor) -> bool:
    changed = False
    while True:
        depth = 0
        for tok in ed.tokens:
            if tok.kind == BRANCH_OPEN:
                depth += 1
            elif tok.kind == BRANCH_CLOSE and depth > 0:
                depth -= 1
        if depth == 0:
            return changed
        ed.append("R2", ")")
        changed = True


def _rule3(ed: _Editor) -> bool:
    changed = False
    while True:
        occurrences: dict[int, list[int]] = {}
        for i, tok in enumerate(ed.tokens):
            if tok.kind == RING:
                occurrences.setdefault(tok.ring_id, []).append(i)
        unclosed = [idxs[-1] for idxs in occurrences.values() if len(idxs) % 2 == 1]
        if not unclosed:
            return changed
        ed.remove_tokens("R3", _with_leading_bond(ed.tokens, min(unclosed)))
        changed = True


def _branches_and_tail(
    tokens: list[SmilesToken], atom_token: int
) -> tuple[list[tuple[int, int]], tuple[int, int] | None]:
    """Parenthesized branch spans attached to an atom token, and the
    trailing chain span after them (both as inclusive token ranges)."""
    n = len(tokens)
    q = atom_token + 1
    branches: list[tuple[int, int]] = []
    while q < n:
        if tokens[q].kind == RING:
            q += 1
        elif tokens[q].kind == BRANCH_OPEN:
            depth = 0
            m = q
            while m < n:
                if tokens[m].kind == BRANCH_OPEN:
                    depth += 1
                elif tokens[m].kind == BRANCH_CLOSE:
                    depth -= 1
                    if depth == 0:
                        break
                m += 1
            if m >= n:  # unclosed branch; R2 handles it next pass
                return branches, None
            branches.append((q, m))
            q = m + 1
        else:
            break
    if q < n and tokens[q].kind in (BOND, ATOM):
        depth = 0
        r = q
        while r < n:
            kind = tokens[r].kind
            if kind == BRANCH_OPEN:
                depth += 1
            elif kind == BRANCH_CLOSE:
                if depth == 0:
                    break
                depth -= 1
            elif kind == DOT and depth == 0:
                break
            r += 1
        return branches, (q, r - 1)
    return branches, None


def _rule4(ed: _Editor, rng: random.Random) -> bool:
    changed = False
    while True:
        try:
            parsed = parse_tokens(ed.tokens, tolerant=True)
        except Exception:
            return changed  # structural defects remain; earlier rules retry
        fired = False
        for atom in parsed.valence_violations:
            branches, tail = _branches_and_tail(ed.tokens, parsed.atom_token[atom])
            units = branches if branches else ([tail] if tail else [])
            if not units:
                continue
            lo, hi = units[rng.randrange(len(units))]
            ed.remove_tokens("R4", list(range(lo, hi + 1)))
            fired = True
            changed = True
            break
        if not fired:
            return changed


def _rule5(ed: _Editor) -> bool:
    changed = False
    while True:
        try:
            parsed = parse_tokens(ed.tokens, tolerant=True)
        except Exception:
            return changed
        if not parsed.ring_defects:
            return changed
        defect = parsed.ring_defects[0]
        idxs = _with_leading_bond(ed.tokens, defect.open_token) + _with_leading_bond(
            ed.tokens, defect.close_token
        )
        ed.remove_tokens("R5", idxs)
        changed = True


def repair(smiles: str, seed: int = 0, max_passes: int = 64) -> RepairTrace:
    """Repair a SMILES string; valid inputs pass through untouched.

    Deterministic for a given (input, seed). Raises RepairFailed (carrying
    the partial trace) if the rules cannot reach a valid string.
    """
    rng = random.Random(seed)
    steps: list[RepairStep] = []
    if is_valid(smiles):
        return RepairTrace(smiles, smiles, steps, seed)
    try:
        ed = _Editor(smiles, steps)
    except LexError:
        raise RepairFailed(RepairTrace(smiles, smiles, steps, seed, failed=True))
    for _ in range(max_passes):
        changed = _rule1(ed)
        changed |= _rule2(ed)
        changed |= _rule3(ed)
        changed |= _rule4(ed, rng)
        changed |= _rule5(ed)
        if is_valid(ed.s):
            return RepairTrace(smiles, ed.s, steps, seed)
        if not changed:
            break
    raise RepairFailed(RepairTrace(smiles, ed.s, steps, seed, failed=True))
