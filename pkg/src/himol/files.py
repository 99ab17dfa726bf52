"""Molecule list files and run-config echoes.

Molecule lists are UTF-8 text, one SMILES per line, with an optional
tab-separated binary label column; lines starting with '#' are ignored.
Every CLI run drops a JSON echo of its effective configuration next to
its primary output.
"""

from __future__ import annotations

import json
from pathlib import Path


class FileFormatError(ValueError):
    pass


def read_molecules(path: str | Path) -> tuple[list[str], list[int] | None]:
    """Returns (smiles, labels); labels is None for unlabeled files."""
    smiles: list[str] = []
    labels: list[int] = []
    saw_label = saw_plain = False
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) == 1:
            smiles.append(parts[0])
            saw_plain = True
        elif len(parts) == 2:
            if parts[1] not in ("0", "1"):
                raise FileFormatError(
                    f"{path}:{lineno}: label must be 0 or 1, got {parts[1]!r}"
                )
            smiles.append(parts[0])
            labels.append(int(parts[1]))
            saw_label = True
        else:
            raise FileFormatError(f"{path}:{lineno}: too many columns")
    if saw_label and saw_plain:
        raise FileFormatError(f"{path}: mixes labeled and unlabeled lines")
    return smiles, (labels if saw_label else None)


def write_molecules(path: str | Path, smiles: list[str],
                    labels: list[int] | None = None) -> None:
    lines = []
    if labels is None:
        lines = list(smiles)
    else:
        if len(labels) != len(smiles):
            raise ValueError("labels and smiles differ in length")
        lines = [f"{s}\t{y}" for s, y in zip(smiles, labels)]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def config_echo_path(out_path: str | Path) -> Path:
    out = Path(out_path)
    return out.with_name(out.stem + ".config.json")


def write_config_echo(out_path: str | Path, config: dict) -> Path:
    echo = config_echo_path(out_path)
    echo.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return echo


def write_jsonl(path: str | Path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def write_json(path: str | Path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
