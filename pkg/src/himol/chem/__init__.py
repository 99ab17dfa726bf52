"""Chemical ground-truth engine: SMILES lexing/parsing, valence validation,
canonical forms, fingerprints and scaffolds."""

from .canon import canonical_smiles, canonicalize
from .fingerprint import Fingerprint, MismatchedParams, fingerprint, stable_hash, tanimoto
from .graph import AROMATIC, Atom, Bond, InvalidGraph, MolGraph, allowed_valences
from .parser import (
    DANGLING_BOND,
    DUPLICATE_BOND,
    RING_TOO_SMALL,
    SYNTAX,
    UNCLOSED_BRANCH,
    UNCLOSED_RING,
    UNMATCHED_BRANCH_CLOSE,
    VALENCE_VIOLATION,
    ParseError,
    is_valid,
    parse,
    parse_tokens,
)
from .scaffold import scaffold
from .tokens import ATOM, BOND, BRANCH_CLOSE, BRANCH_OPEN, DOT, RING, LexError, SmilesToken, lex

__all__ = [
    "AROMATIC",
    "ATOM",
    "Atom",
    "BOND",
    "BRANCH_CLOSE",
    "BRANCH_OPEN",
    "Bond",
    "DANGLING_BOND",
    "DOT",
    "DUPLICATE_BOND",
    "Fingerprint",
    "InvalidGraph",
    "LexError",
    "MismatchedParams",
    "MolGraph",
    "ParseError",
    "RING",
    "RING_TOO_SMALL",
    "SYNTAX",
    "SmilesToken",
    "UNCLOSED_BRANCH",
    "UNCLOSED_RING",
    "UNMATCHED_BRANCH_CLOSE",
    "VALENCE_VIOLATION",
    "allowed_valences",
    "canonical_smiles",
    "canonicalize",
    "fingerprint",
    "is_valid",
    "lex",
    "parse",
    "parse_tokens",
    "scaffold",
    "stable_hash",
    "tanimoto",
]
