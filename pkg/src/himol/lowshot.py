"""Low-shot augmentation study: does adding generated molecules to a k-shot
training set improve a property classifier?

Per seed: draw k shots per class from the labeled pool, train one inversion
state per class, generate 3k valid molecules per class (labels inherited
from the generating class), and compare test ROC-AUC of the classifier
fitted on shots alone versus shots plus generations. Results aggregate to
a mean delta and a 95% confidence interval over seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as scipy_stats

from .backbone import Backbone
from .classifier import KnnTanimotoClassifier
from .chem import parse
from .inversion import InversionConfig, train
from .sampler import SamplerConfig, sample


class InsufficientPool(ValueError):
    pass


@dataclass
class LowShotTask:
    pool_smiles: list[str]
    pool_labels: list[int]
    test_smiles: list[str]
    test_labels: list[int]
    shots: int = 16
    seeds: list[int] = field(default_factory=lambda: list(range(20)))

    def __post_init__(self):
        if set(self.pool_labels) - {0, 1} or set(self.test_labels) - {0, 1}:
            raise ValueError("labels must be binary 0/1")
        for label in (0, 1):
            if self.pool_labels.count(label) < self.shots:
                raise InsufficientPool(
                    f"pool has {self.pool_labels.count(label)} molecules of "
                    f"class {label}, need {self.shots}"
                )
        if set(self.test_smiles) & set(self.pool_smiles):
            raise ValueError("test set overlaps the pool")


@dataclass
class LowShotResult:
    mean_delta: float
    ci95: tuple[float, float]
    per_seed: list[float]
    skipped: list[tuple[int, str]]


def roc_auc(scores: list[float], labels: list[int]) -> float:
    """Mann-Whitney ROC-AUC with half credit for tied scores."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=int)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("roc_auc needs both classes present")
    wins = 0.0
    for p in pos:
        wins += np.sum(p > neg) + 0.5 * np.sum(p == neg)
    return float(wins / (len(pos) * len(neg)))


def _auc_of(train_smiles, train_labels, test_smiles, test_labels, knn_k: int) -> float:
    clf = KnnTanimotoClassifier(k=knn_k).fit(train_smiles, train_labels)
    scores = [clf.score(parse(s)) for s in test_smiles]
    return roc_auc(scores, list(test_labels))


def default_generator(
    backbone: Backbone,
    inversion_config: InversionConfig,
    sampler_config: SamplerConfig,
):
    """Per-class generation via inversion + interpolation sampling; keeps
    drawing until the requested number of valid molecules is reached."""

    def generate(class_smiles: list[str], label: int, want: int, seed: int) -> list[str]:
        inv_cfg = InversionConfig(
            **{**inversion_config.__dict__, "seed": seed, "k": min(inversion_config.k, max(1, len(class_smiles) - 1))}
        )
        state, _ = train(class_smiles, backbone, inv_cfg)
        cfg = SamplerConfig(**{**sampler_config.__dict__, "max_samples": want, "seed": seed, "strict": False})
        batch = sample(state, backbone, cfg)
        out = [r.final for r in batch.records if r.valid]
        draws = cfg.max_samples
        while len(out) < want and draws < cfg.draw_budget_factor * want:
            cfg = SamplerConfig(**{**cfg.__dict__, "max_samples": draws * 2})
            batch = sample(state, backbone, cfg)
            out = [r.final for r in batch.records if r.valid]
            draws = cfg.max_samples
        if len(out) < want:
            raise RuntimeError(f"only {len(out)}/{want} valid molecules generated")
        return out[:want]

    return generate


def run_augmentation(
    task: LowShotTask,
    backbone: Backbone | None = None,
    inversion_config: InversionConfig | None = None,
    sampler_config: SamplerConfig | None = None,
    generate_fn=None,
    knn_k: int = 5,
    augment_factor: int = 3,
) -> LowShotResult:
    """Mean and 95% CI of (AUC with augmentation - AUC without) over seeds.

    ``generate_fn(class_smiles, label, want, seed) -> list[str]`` may
    replace the default inversion+sampling pipeline (e.g. an oracle that
    injects held-out real molecules). Seeds whose generation fails are
    skipped with a warning entry.
    """
    if generate_fn is None:
        if backbone is None:
            raise ValueError("need a backbone when no generate_fn is given")
        generate_fn = default_generator(
            backbone,
            inversion_config or InversionConfig(),
            sampler_config or SamplerConfig(),
        )
    pool = np.arange(len(task.pool_smiles))
    labels = np.asarray(task.pool_labels)
    deltas: list[float] = []
    skipped: list[tuple[int, str]] = []
    for seed in task.seeds:
        rng = np.random.default_rng(seed)
        shot_idx = np.concatenate(
            [
                rng.choice(pool[labels == label], size=task.shots, replace=False)
                for label in (0, 1)
            ]
        )
        shot_smiles = [task.pool_smiles[i] for i in shot_idx]
        shot_labels = [task.pool_labels[i] for i in shot_idx]
        try:
            augmented_smiles = list(shot_smiles)
            augmented_labels = list(shot_labels)
            for label in (0, 1):
                members = [s for s, y in zip(shot_smiles, shot_labels) if y == label]
                gen = generate_fn(members, label, augment_factor * task.shots, seed)
                augmented_smiles.extend(gen)
                augmented_labels.extend([label] * len(gen))
            base = _auc_of(shot_smiles, shot_labels, task.test_smiles, task.test_labels, knn_k)
            aug = _auc_of(
                augmented_smiles, augmented_labels, task.test_smiles, task.test_labels, knn_k
            )
            deltas.append(aug - base)
        except Exception as err:  # noqa: BLE001 - seed isolation
            skipped.append((seed, str(err)))
    if not deltas:
        raise RuntimeError("every seed failed generation")
    arr = np.asarray(deltas)
    mean = float(arr.mean())
    if len(arr) > 1:
        half = float(
            scipy_stats.t.ppf(0.975, len(arr) - 1) * arr.std(ddof=1) / np.sqrt(len(arr))
        )
    else:
        half = float("inf")
    return LowShotResult(mean, (mean - half, mean + half), deltas, skipped)
