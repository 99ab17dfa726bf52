"""Generation-quality metrics: validity, uniqueness, novelty, active ratio,
NSPDK MMD, and the Frechet distance between activation statistics.

Percentages follow the canonical-form set semantics: uniqueness counts
distinct canonical strings among the valid samples, novelty the valid
samples whose canonical form is absent from the training set. Degenerate
denominators yield 0 with a warning recorded on the report instead of
failing the pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backbone import ActivationStats, Backbone
from .chem import canonical_smiles, is_valid, parse
from .nspdk import NspdkConfig, nspdk_mmd
from .repair import RepairFailed, repair


class NumericalError(RuntimeError):
    """Covariance eigenvalues fell below the tolerated negative floor."""


@dataclass
class MetricsReport:
    validity: float = 0.0
    uniqueness: float = 0.0
    novelty: float = 0.0
    active: float | None = None
    nspdk_mmd: float | None = None
    frechet: float | None = None
    n_generated: int = 0
    n_valid: int = 0
    n_unique: int = 0
    n_novel: int = 0
    config: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "validity": self.validity,
            "uniqueness": self.uniqueness,
            "novelty": self.novelty,
            "active": self.active,
            "nspdk_mmd": self.nspdk_mmd,
            "frechet": self.frechet,
            "n_generated": self.n_generated,
            "n_valid": self.n_valid,
            "n_unique": self.n_unique,
            "n_novel": self.n_novel,
            "config": self.config,
            "warnings": self.warnings,
        }


def valid_subset(gen: list[str]) -> list[str]:
    return [s for s in gen if is_valid(s)]


def validity(gen: list[str]) -> float:
    """Percentage of generated strings that parse and satisfy the valence model."""
    if not gen:
        return 0.0
    return 100.0 * sum(is_valid(s) for s in gen) / len(gen)


def uniqueness(gen: list[str]) -> float:
    """Distinct canonical forms over valid generated molecules, in percent."""
    valid = valid_subset(gen)
    if not valid:
        return 0.0
    return 100.0 * len({canonical_smiles(s) for s in valid}) / len(valid)


def novelty(gen: list[str], train: list[str]) -> float:
    """Valid generated molecules whose canonical form is not in the
    training set, in percent."""
    valid = valid_subset(gen)
    if not valid:
        return 0.0
    train_canon = {canonical_smiles(s) for s in train}
    fresh = sum(canonical_smiles(s) not in train_canon for s in valid)
    return 100.0 * fresh / len(valid)


def active_ratio(gen: list[str], classifier) -> tuple[float, list[str]]:
    """Percentage of valid generated molecules the classifier labels 1.

    The classifier is any callable MolGraph -> {0, 1}. Per-molecule
    classifier failures are excluded from the denominator and reported.
    """
    valid = valid_subset(gen)
    warnings: list[str] = []
    hits = 0
    scored = 0
    for smiles in valid:
        try:
            hits += int(classifier(parse(smiles)))
            scored += 1
        except Exception as err:  # noqa: BLE001 - per-molecule isolation
            warnings.append(f"classifier failed on {smiles!r}: {err}")
    if scored == 0:
        warnings.append("active ratio: no molecule could be classified")
        return 0.0, warnings
    return 100.0 * hits / scored, warnings


def frechet(stats_a: ActivationStats, stats_b: ActivationStats) -> float:
    """||m_a - m_b||^2 + Tr(C_a + C_b - 2 (C_a C_b)^(1/2)).

    The matrix square root comes from the symmetric eigendecomposition of
    C_a^(1/2) C_b C_a^(1/2); eigenvalues below -1e-8 raise NumericalError,
    small negatives are clamped to zero.
    """

    def psd_sqrt(mat: np.ndarray) -> np.ndarray:
        vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
        if vals.min() < -1e-8:
            raise NumericalError(f"covariance eigenvalue {vals.min():.3e} < -1e-8")
        vals = np.clip(vals, 0.0, None)
        return (vecs * np.sqrt(vals)) @ vecs.T

    root_a = psd_sqrt(stats_a.cov)
    inner = root_a @ stats_b.cov @ root_a
    vals = np.linalg.eigvalsh((inner + inner.T) / 2.0)
    if vals.min() < -1e-8:
        raise NumericalError(f"cross-term eigenvalue {vals.min():.3e} < -1e-8")
    vals = np.clip(vals, 0.0, None)
    delta = stats_a.mean - stats_b.mean
    value = float(
        delta @ delta
        + np.trace(stats_a.cov)
        + np.trace(stats_b.cov)
        - 2.0 * np.sqrt(vals).sum()
    )
    return max(0.0, value)


def _report(
    gen: list[str],
    train: list[str],
    test: list[str],
    backbone: Backbone | None,
    classifier,
    nspdk_config: NspdkConfig,
    config_echo: dict,
    jobs: int = 1,
) -> MetricsReport:
    report = MetricsReport(config=config_echo)
    report.n_generated = len(gen)
    valid = valid_subset(gen)
    report.n_valid = len(valid)
    report.validity = validity(gen)
    report.uniqueness = uniqueness(gen)
    report.novelty = novelty(gen, train)
    report.n_unique = len({canonical_smiles(s) for s in valid})
    train_canon = {canonical_smiles(s) for s in train}
    report.n_novel = sum(canonical_smiles(s) not in train_canon for s in valid)
    if not valid:
        report.warnings.append("no valid molecules; set metrics default to 0")
    if classifier is not None:
        try:
            report.active, warns = active_ratio(gen, classifier)
            report.warnings.extend(warns)
        except Exception as err:  # noqa: BLE001
            report.warnings.append(f"active ratio failed: {err}")
    if valid and test:
        try:
            report.nspdk_mmd = nspdk_mmd(
                [parse(s) for s in valid], [parse(s) for s in test], nspdk_config,
                jobs=jobs,
            )
        except Exception as err:  # noqa: BLE001
            report.warnings.append(f"nspdk failed: {err}")
        if backbone is not None:
            try:
                report.frechet = frechet(
                    backbone.activation_stats(valid), backbone.activation_stats(test)
                )
            except Exception as err:  # noqa: BLE001
                report.warnings.append(f"frechet failed: {err}")
    elif not test:
        report.warnings.append("no test set; distribution metrics skipped")
    return report


@dataclass
class EvalOutcome:
    raw: MetricsReport
    repaired: MetricsReport | None = None


def evaluate(
    gen: list[str],
    train: list[str],
    test: list[str],
    backbone: Backbone | None = None,
    classifier=None,
    nspdk_config: NspdkConfig | None = None,
    apply_repair: bool = False,
    repair_seed: int = 0,
    jobs: int = 1,
) -> EvalOutcome:
    """Assemble the full metric suite; per-metric failures become warnings.

    With ``apply_repair`` the suite is computed twice: on the raw strings
    and on their repaired variants (unrepairable strings stay raw).
    ``jobs`` caps worker parallelism; results are worker-count invariant.
    """
    nspdk_config = nspdk_config or NspdkConfig()
    echo = {"apply_repair": apply_repair, "nspdk": {"radius": nspdk_config.radius,
            "distance": nspdk_config.distance, "width": nspdk_config.width}}
    outcome = EvalOutcome(
        raw=_report(gen, train, test, backbone, classifier, nspdk_config,
                    {**echo, "variant": "raw"}, jobs=jobs)
    )
    if apply_repair:
        fixed = []
        for s in gen:
            try:
                fixed.append(repair(s, seed=repair_seed).output)
            except RepairFailed:
                fixed.append(s)
        outcome.repaired = _report(
            fixed, train, test, backbone, classifier, nspdk_config,
            {**echo, "variant": "repaired"}, jobs=jobs,
        )
    return outcome
