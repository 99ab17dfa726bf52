"""SMILES tokenizer.

Splits a SMILES string into atom, bond, ring-closure, branch and dot tokens.
Bracket atoms are parsed down to (element, charge, explicit H) here so that
the parser never has to look inside a token. Stereo marks (``@`` inside
brackets, ``/`` and ``\\`` as bonds) are accepted and carried through as
plain single bonds / plain atoms; their stereo meaning is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class LexError(ValueError):
    """Unrecognized or malformed input at a given byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


# Token kinds.
ATOM = "atom"
BOND = "bond"
RING = "ring"
BRANCH_OPEN = "branch_open"
BRANCH_CLOSE = "branch_close"
DOT = "dot"

# Organic subset: atoms that may appear outside brackets.
ORGANIC_TWO_CHAR = ("Cl", "Br")
ORGANIC_ONE_CHAR = frozenset("BCNOPSFI")
AROMATIC_ORGANIC = frozenset("bcnops")

# Elements the valence model covers; everything else is rejected.
SUPPORTED_ELEMENTS = frozenset(
    {"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I", "H"}
)

BOND_CHARS = {"-": 1, "=": 2, "#": 3, ":": 0, "/": 1, "\\": 1}  # ':' marks aromatic


@dataclass(frozen=True)
class AtomSpec:
    """Chemical payload of an atom token."""

    element: str
    charge: int = 0
    explicit_h: int = 0
    aromatic: bool = False
    bracket: bool = False


@dataclass(frozen=True)
class SmilesToken:
    kind: str
    text: str
    pos: int
    # ATOM tokens carry an AtomSpec, RING tokens the ring number,
    # BOND tokens the order (0 means aromatic ':').
    atom: AtomSpec | None = field(default=None, compare=False)
    ring_id: int = -1
    bond_order: int = -1


def _lex_bracket(s: str, start: int) -> tuple[SmilesToken, int]:
    """Lex a bracket atom starting at ``s[start] == '['``."""
    end = s.find("]", start + 1)
    if end < 0:
        raise LexError("unterminated bracket atom", start)
    body = s[start + 1 : end]
    if not body:
        raise LexError("empty bracket atom", start)
    i = 0
    # Isotope digits: accepted, dropped (pass-through only).
    while i < len(body) and body[i].isdigit():
        i += 1
    if i >= len(body):
        raise LexError("bracket atom has no element symbol", start + 1 + i)
    # Element symbol: two-char first, then one-char (upper = aliphatic,
    # lower = aromatic).
    aromatic = False
    if body[i : i + 2] in ORGANIC_TWO_CHAR:
        element = body[i : i + 2]
        i += 2
    elif body[i].isupper():
        element = body[i]
        i += 1
    elif body[i] in AROMATIC_ORGANIC:
        element = body[i].upper()
        aromatic = True
        i += 1
    else:
        raise LexError(f"bad element symbol {body[i]!r}", start + 1 + i)
    if element not in SUPPORTED_ELEMENTS:
        raise LexError(f"unsupported element {element!r}", start + 1)
    # Chirality marks: accepted, dropped.
    while i < len(body) and body[i] == "@":
        i += 1
    # Explicit hydrogen count.
    explicit_h = 0
    if i < len(body) and body[i] == "H":
        if element == "H":
            raise LexError("H atom with attached H count", start + 1 + i)
        i += 1
        digits = ""
        while i < len(body) and body[i].isdigit():
            digits += body[i]
            i += 1
        explicit_h = int(digits) if digits else 1
    # Charge: '+', '-', repeated, or with a count.
    charge = 0
    if i < len(body) and body[i] in "+-":
        sign = 1 if body[i] == "+" else -1
        symbol = body[i]
        i += 1
        digits = ""
        while i < len(body) and body[i].isdigit():
            digits += body[i]
            i += 1
        if digits:
            charge = sign * int(digits)
        else:
            charge = sign
            while i < len(body) and body[i] == symbol:
                charge += sign
                i += 1
    if i != len(body):
        raise LexError(f"unexpected {body[i]!r} in bracket atom", start + 1 + i)
    spec = AtomSpec(element, charge, explicit_h, aromatic, bracket=True)
    token = SmilesToken(ATOM, s[start : end + 1], start, atom=spec)
    return token, end + 1


def lex(smiles: str) -> list[SmilesToken]:
    """Tokenize a SMILES string.

    Raises LexError (with byte offset) on any character outside the
    supported alphabet.
    """
    tokens: list[SmilesToken] = []
    i = 0
    n = len(smiles)
    while i < n:
        c = smiles[i]
        if c == "[":
            token, i = _lex_bracket(smiles, i)
            tokens.append(token)
        elif smiles[i : i + 2] in ORGANIC_TWO_CHAR:
            spec = AtomSpec(smiles[i : i + 2])
            tokens.append(SmilesToken(ATOM, smiles[i : i + 2], i, atom=spec))
            i += 2
        elif c in ORGANIC_ONE_CHAR:
            tokens.append(SmilesToken(ATOM, c, i, atom=AtomSpec(c)))
            i += 1
        elif c in AROMATIC_ORGANIC:
            spec = AtomSpec(c.upper(), aromatic=True)
            tokens.append(SmilesToken(ATOM, c, i, atom=spec))
            i += 1
        elif c in BOND_CHARS:
            tokens.append(SmilesToken(BOND, c, i, bond_order=BOND_CHARS[c]))
            i += 1
        elif c.isdigit():
            tokens.append(SmilesToken(RING, c, i, ring_id=int(c)))
            i += 1
        elif c == "%":
            digits = smiles[i + 1 : i + 3]
            if len(digits) != 2 or not digits.isdigit():
                raise LexError("'%' must be followed by two digits", i)
            tokens.append(SmilesToken(RING, smiles[i : i + 3], i, ring_id=int(digits)))
            i += 3
        elif c == "(":
            tokens.append(SmilesToken(BRANCH_OPEN, c, i))
            i += 1
        elif c == ")":
            tokens.append(SmilesToken(BRANCH_CLOSE, c, i))
            i += 1
        elif c == ".":
            tokens.append(SmilesToken(DOT, c, i))
            i += 1
        else:
            raise LexError(f"unrecognized character {c!r}", i)
    return tokens
