"""Molecule sampling by interpolation of learned prompt embeddings.

Draws molecule index pairs (i, j) uniformly with replacement, mixes their
cluster/detail embeddings with lambda ~ Uniform(l, 1-l), decodes with the
generation prompt "A similar chemical of ...", optionally repairs the raw
string, and in strict mode rejects anything invalid, duplicate, or present
in the training set until the batch quota is met.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .backbone import PROMPT_SAMPLE, Backbone, DecodeConfig
from .chem import canonical_smiles, is_valid
from .inversion import HierarchicalEmbeddings
from .repair import RepairFailed, repair


class StrictExhausted(RuntimeError):
    """Strict-mode sampling ran out of draw budget before filling the batch."""


class IndexOutOfRange(IndexError):
    pass


@dataclass
class SamplerConfig:
    max_samples: int = 100
    l: float = 0.0  # lambda ~ Uniform(l, 1-l)
    temperature: float = 1.0
    max_len: int = 96
    seed: int = 0
    strict: bool = False
    apply_repair: bool = False
    greedy: bool = False
    draw_budget_factor: int = 100
    interp_levels: str = "id"  # advanced: mask which levels interpolate

    def __post_init__(self):
        if not 0.0 <= self.l < 0.5:
            raise ValueError("l must lie in [0, 0.5)")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.interp_levels not in ("id", "i", "d"):
            raise ValueError("interp_levels must be 'id', 'i' or 'd'")


@dataclass
class SampleRecord:
    raw: str
    repaired: str | None
    valid: bool
    source_i: int | None
    source_j: int | None
    lam: float | None
    seed: int
    truncated: bool
    repair_failed: bool = False

    @property
    def final(self) -> str:
        return self.repaired if self.repaired is not None else self.raw

    def to_dict(self) -> dict:
        return {
            "raw": self.raw,
            "repaired": self.repaired,
            "valid": self.valid,
            "source_i": self.source_i,
            "source_j": self.source_j,
            "lambda": self.lam,
            "seed": self.seed,
            "truncated": self.truncated,
            "repair_failed": self.repair_failed,
        }


@dataclass
class SampleBatch:
    records: list[SampleRecord] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    total_draws: int = 0

    @property
    def resampling_ratio(self) -> float:
        return self.total_draws / max(1, len(self.records))

    def molecules(self) -> list[str]:
        return [r.final for r in self.records]


def interpolate(
    state: HierarchicalEmbeddings,
    i_idx: int,
    j_idx: int,
    lam: float,
    levels: str = "id",
) -> tuple[np.ndarray, np.ndarray]:
    """Convex mix of two molecules' (cluster, detail) embeddings.

    lam = 1 returns molecule i's embeddings exactly; lam = 0 molecule j's.
    ``levels`` is an advanced mask: "id" mixes both levels (the contract),
    "i" mixes only the cluster embedding (detail stays molecule i's),
    "d" only the detail embedding.
    """
    if levels not in ("id", "i", "d"):
        raise ValueError("levels must be 'id', 'i' or 'd'")
    n = state.n
    if not (0 <= i_idx < n and 0 <= j_idx < n):
        raise IndexOutOfRange(f"indices ({i_idx}, {j_idx}) outside [0, {n})")
    a = (state.inter[state.assign[i_idx]], state.detail[i_idx])
    b = (state.inter[state.assign[j_idx]], state.detail[j_idx])

    def mix(x, y):
        if lam == 1.0:
            return x.copy()
        if lam == 0.0:
            return y.copy()
        return lam * x + (1.0 - lam) * y

    inter = mix(a[0], b[0]) if "i" in levels else a[0].copy()
    detail = mix(a[1], b[1]) if "d" in levels else a[1].copy()
    return inter, detail


def draw_params(config: SamplerConfig, n: int, t: int) -> tuple[int, int, float]:
    """The sampler's (i, j, lambda) draw for draw index t (derived RNG)."""
    rng = np.random.default_rng((config.seed, t))
    i = int(rng.integers(0, n))
    j = int(rng.integers(0, n))
    lam = float(rng.uniform(config.l, 1.0 - config.l))
    return i, j, lam


def _decode_seed(config: SamplerConfig, draw: int) -> int:
    return int(np.random.default_rng((config.seed, draw, 7)).integers(0, 2**63 - 1))


def sample(
    state: HierarchicalEmbeddings,
    backbone: Backbone,
    config: SamplerConfig,
    train_smiles: list[str] | None = None,
) -> SampleBatch:
    """Interpolation sampling with the "A similar chemical of" prompt.

    Strict mode rejects records whose canonical form is invalid, already
    emitted, or present in the training set; every draw counts toward the
    resampling ratio. Fully deterministic for a given config.
    """
    words = backbone.prompt_word_embeddings(PROMPT_SAMPLE)
    train_canon: set[str] = set()
    if train_smiles:
        train_canon = {canonical_smiles(s) for s in train_smiles}
    batch = SampleBatch(config=asdict(config))
    emitted: set[str] = set()
    budget = config.draw_budget_factor * config.max_samples
    draw = 0
    while len(batch.records) < config.max_samples:
        if draw >= budget:
            if config.strict:
                raise StrictExhausted(
                    f"{len(batch.records)}/{config.max_samples} accepted "
                    f"after {draw} draws"
                )
            break
        i, j, lam = draw_params(config, state.n, draw)
        inter_mix, detail_mix = interpolate(state, i, j, lam, config.interp_levels)
        prompt = np.vstack([words, state.shared[None], inter_mix[None], detail_mix[None]])
        seed = _decode_seed(config, draw)
        raw, truncated = backbone.decode(
            prompt,
            DecodeConfig(config.temperature, config.max_len, seed, config.greedy),
            state.head_override,
        )
        draw += 1
        record = SampleRecord(raw, None, False, i, j, lam, seed, truncated)
        if config.apply_repair:
            try:
                record.repaired = repair(raw, seed=seed).output
            except RepairFailed:
                record.repair_failed = True
        record.valid = is_valid(record.final)
        if config.strict:
            if not record.valid:
                continue
            canon = canonical_smiles(record.final)
            if canon in emitted or canon in train_canon:
                continue
            emitted.add(canon)
        batch.records.append(record)
    batch.total_draws = draw
    return batch


def sample_baseline(
    backbone: Backbone,
    prompt: list[str] | np.ndarray,
    config: SamplerConfig | None = None,
    head_override: np.ndarray | None = None,
) -> SampleBatch:
    """Temperature sampling without interpolation (the ablation path).

    ``prompt`` is either a list of vocabulary tokens or a prompt-embedding
    matrix (e.g. the generation words plus a single learned shared token).
    Without an explicit config this path samples at temperature 2.0.
    """
    if config is None:
        config = SamplerConfig(temperature=2.0)
    if isinstance(prompt, np.ndarray):
        prompt_embs = prompt
    else:
        prompt_embs = np.stack([backbone.embedding(t) for t in prompt])
    batch = SampleBatch(config=asdict(config))
    for draw in range(config.max_samples):
        seed = _decode_seed(config, draw)
        raw, truncated = backbone.decode(
            prompt_embs,
            DecodeConfig(config.temperature, config.max_len, seed, config.greedy),
            head_override,
        )
        record = SampleRecord(raw, None, False, None, None, None, seed, truncated)
        if config.apply_repair:
            try:
                record.repaired = repair(raw, seed=seed).output
            except RepairFailed:
                record.repair_failed = True
        record.valid = is_valid(record.final)
        batch.records.append(record)
    batch.total_draws = config.max_samples
    return batch


def shared_only_prompt(backbone: Backbone, state: HierarchicalEmbeddings) -> np.ndarray:
    """Generation prompt for the single-shared-token ablation."""
    words = backbone.prompt_word_embeddings(PROMPT_SAMPLE)
    return np.vstack([words, state.shared[None]])
