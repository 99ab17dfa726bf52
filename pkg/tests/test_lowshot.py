"""roc_auc fixtures and the augmentation harness with an oracle generator."""

import numpy as np
import pytest

from corpora import labeled_pool
from himol.lowshot import (
    InsufficientPool,
    LowShotTask,
    roc_auc,
    run_augmentation,
)


class TestRocAuc:
    def test_perfect_ranking(self):
        assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_reversed_ranking(self):
        assert roc_auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0

    def test_all_ties_half(self):
        assert roc_auc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5

    def test_complement_identity(self):
        rng = np.random.default_rng(0)
        scores = list(rng.normal(size=30))
        labels = list(rng.integers(0, 2, size=30))
        if 0 < sum(labels) < 30:
            a = roc_auc(scores, labels)
            b = roc_auc([-s for s in scores], labels)
            assert a + b == pytest.approx(1.0)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            roc_auc([0.1, 0.2], [1, 1])


def make_task(shots=4, seeds=20):
    smiles, labels = labeled_pool()
    pos = [s for s, y in zip(smiles, labels) if y == 1]
    neg = [s for s, y in zip(smiles, labels) if y == 0]
    # strided held-out test set: spreads across the subfamilies
    test_pos, test_neg = pos[::5][:8], neg[::5][:8]
    pool_pos = [s for s in pos if s not in test_pos]
    pool_neg = [s for s in neg if s not in test_neg]
    task = LowShotTask(
        pool_pos + pool_neg,
        [1] * len(pool_pos) + [0] * len(pool_neg),
        test_pos + test_neg,
        [1] * len(test_pos) + [0] * len(test_neg),
        shots=shots,
        seeds=list(range(seeds)),
    )
    return task, pool_pos, pool_neg


class TestTask:
    def test_insufficient_pool(self):
        with pytest.raises(InsufficientPool):
            LowShotTask(["CCO", "CCC"], [1, 0], ["CCCC"], [1], shots=4)

    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            LowShotTask(["CCO", "CCC"], [1, 0], ["CCO"], [1], shots=1)


class TestOracleAugmentation:
    def test_oracle_improves_auc(self):
        task, pos_pool, neg_pool = make_task(shots=4, seeds=20)

        def oracle(class_smiles, label, want, seed):
            # inject true held-out same-class molecules instead of generating
            source = pos_pool if label == 1 else neg_pool
            extra = [s for s in source if s not in class_smiles]
            rng = np.random.default_rng((seed, label))
            picks = rng.choice(len(extra), size=min(want, len(extra)), replace=False)
            return [extra[i] for i in picks]

        result = run_augmentation(task, generate_fn=oracle, knn_k=3)
        assert result.mean_delta > 0.0
        assert result.ci95[0] > 0.0  # 95% CI excludes zero
        assert len(result.per_seed) == 20
        assert not result.skipped

    def test_duplicate_augmentation_is_neutral(self):
        task, _, _ = make_task(shots=4, seeds=6)

        def copies(class_smiles, label, want, seed):
            out = []
            while len(out) < want:
                out.extend(class_smiles)
            return out[:want]

        result = run_augmentation(task, generate_fn=copies, knn_k=3)
        assert result.mean_delta == pytest.approx(0.0, abs=1e-12)

    def test_failed_seeds_skipped(self):
        task, pos_pool, neg_pool = make_task(shots=4, seeds=5)

        def sometimes_broken(class_smiles, label, want, seed):
            if seed == 2:
                raise RuntimeError("generation failed")
            return (class_smiles * want)[:want]

        result = run_augmentation(task, generate_fn=sometimes_broken, knn_k=3)
        assert len(result.per_seed) == 4
        assert [s for s, _ in result.skipped] == [2]

    def test_deterministic(self):
        task, pos_pool, neg_pool = make_task(shots=4, seeds=4)

        def oracle(class_smiles, label, want, seed):
            source = pos_pool if label == 1 else neg_pool
            extra = [s for s in source if s not in class_smiles]
            rng = np.random.default_rng((seed, label))
            picks = rng.choice(len(extra), size=min(want, len(extra)), replace=False)
            return [extra[i] for i in picks]

        r1 = run_augmentation(task, generate_fn=oracle, knn_k=3)
        r2 = run_augmentation(task, generate_fn=oracle, knn_k=3)
        assert r1.per_seed == r2.per_seed


class TestGenerativeAugmentation:
    def test_default_generator_pipeline(self, toy_backbone):
        from himol.inversion import InversionConfig
        from himol.sampler import SamplerConfig

        task, _, _ = make_task(shots=4, seeds=2)
        result = run_augmentation(
            task,
            backbone=toy_backbone,
            inversion_config=InversionConfig(
                epochs=40, batch_size=2, lr=0.1, weight_decay=0.0,
                assign_epochs=3, k=2,
            ),
            sampler_config=SamplerConfig(max_len=32),
            knn_k=3,
        )
        # generated 3k valid molecules per class on both seeds
        assert len(result.per_seed) == 2
        assert not result.skipped
        assert all(np.isfinite(d) for d in result.per_seed)
