"""Hierarchical prompt-token inversion against a frozen backbone.

Learns a shared embedding, a bank of cluster-level embeddings and one
detail embedding per training molecule by descending the cross-entropy of
"The molecule is a <shared><cluster><detail>" -> molecule. Each molecule's
cluster index is the loss-minimizing bank entry; assignments are refreshed
at the start of the first few epochs and frozen afterwards, so the min
over clusters is realized by block coordinate descent instead of scoring
every cluster at every step.
"""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, field

import numpy as np

from .autodiff import AdamW, Tensor, clip_global_norm, concat, no_grad
from .backbone import BOS, EOS, GEN_TOKEN, PAD, PROMPT_TRAIN, Backbone
from .checkpoint import EMBED_MAGIC, load_container, save_container


class KTooLarge(ValueError):
    """Cluster count must be strictly below the dataset size."""


class EmptyDataset(ValueError):
    pass


class DivergedLoss(RuntimeError):
    pass


LEVELS = ("s", "sd", "sid")


@dataclass
class InversionConfig:
    epochs: int = 1000
    batch_size: int = 4
    lr: float = 0.3
    weight_decay: float = 0.01
    clip_norm: float = 1.0
    assign_epochs: int = 5
    k: int = 10
    seed: int = 0
    levels: str = "sid"  # which token levels the prompt carries
    update_head: bool = False

    def __post_init__(self):
        if self.levels not in LEVELS:
            raise ValueError(f"levels must be one of {LEVELS}")
        if self.assign_epochs > self.epochs:
            raise ValueError("assign_epochs cannot exceed epochs")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class HierarchicalEmbeddings:
    shared: np.ndarray  # (E,)
    inter: np.ndarray  # (K, E)
    detail: np.ndarray  # (N, E)
    assign: np.ndarray  # (N,) cluster index per molecule, in [0, K)
    seed: int = 0
    levels: str = "sid"
    head_override: np.ndarray | None = None  # set when the head was co-trained

    def __post_init__(self):
        if self.k >= self.n:
            raise KTooLarge(f"K={self.k} must be < N={self.n}")
        if not (
            np.isfinite(self.shared).all()
            and np.isfinite(self.inter).all()
            and np.isfinite(self.detail).all()
        ):
            raise ValueError("embeddings must be finite")
        if self.assign.min() < 0 or self.assign.max() >= self.k:
            raise ValueError("cluster assignments out of range")

    @property
    def k(self) -> int:
        return self.inter.shape[0]

    @property
    def n(self) -> int:
        return self.detail.shape[0]

    @property
    def embed_dim(self) -> int:
        return self.shared.shape[0]

    def copy(self) -> "HierarchicalEmbeddings":
        return HierarchicalEmbeddings(
            self.shared.copy(),
            self.inter.copy(),
            self.detail.copy(),
            self.assign.copy(),
            self.seed,
            self.levels,
            None if self.head_override is None else self.head_override.copy(),
        )

    def prompt_for(self, backbone: Backbone, n: int) -> np.ndarray:
        """Training prompt embeddings for molecule n under the level mask."""
        words = backbone.prompt_word_embeddings(PROMPT_TRAIN)
        rows = [words, self.shared[None]]
        if "i" in self.levels:
            rows.append(self.inter[self.assign[n]][None])
        if "d" in self.levels:
            rows.append(self.detail[n][None])
        return np.vstack(rows)


@dataclass
class TrainLog:
    epoch_loss: list[float] = field(default_factory=list)
    assign_history: list[np.ndarray] = field(default_factory=list)
    freeze_state: HierarchicalEmbeddings | None = None
    freeze_losses: np.ndarray | None = None  # (N, K) at the last assignment


def init(dataset: list[str], backbone: Backbone, config: InversionConfig) -> HierarchicalEmbeddings:
    """Start every level at the generic pretraining token plus small seeded
    Gaussian noise; cluster assignments start uniform at random."""
    if not dataset:
        raise EmptyDataset("inversion dataset is empty")
    if "i" in config.levels and config.k >= len(dataset):
        raise KTooLarge(f"K={config.k} must be < N={len(dataset)}")
    for smiles in dataset:
        backbone.vocab.encode_smiles(smiles)  # raises UnknownToken early
    rng = np.random.default_rng(config.seed)
    base = backbone.embedding(GEN_TOKEN)
    sigma = 0.01 * float(np.sqrt(np.mean(base**2)))
    e = base.shape[0]
    n = len(dataset)
    k = config.k if "i" in config.levels else 1
    state = HierarchicalEmbeddings(
        shared=base + rng.normal(0.0, sigma, size=e),
        inter=base[None] + rng.normal(0.0, sigma, size=(k, e)),
        detail=base[None] + rng.normal(0.0, sigma, size=(n, e)),
        assign=rng.integers(0, k, size=n),
        seed=config.seed,
        levels=config.levels,
    )
    return state


def _padded_targets(
    backbone: Backbone, target_ids: list[list[int]], prompt_len: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(token input ids, shifted targets, loss mask) for a padded batch."""
    pad = backbone.vocab.id(PAD)
    bos = backbone.vocab.id(BOS)
    eos = backbone.vocab.id(EOS)
    rows = [[bos] + ids + [eos] for ids in target_ids]
    width = max(len(r) for r in rows) - 1
    token_input = np.full((len(rows), width), pad, dtype=np.int64)
    targets = np.zeros((len(rows), prompt_len + width), dtype=np.int64)
    mask = np.zeros((len(rows), prompt_len + width))
    for b, row in enumerate(rows):
        token_input[b, : len(row) - 1] = row[:-1]
        for j, tok in enumerate(row):
            targets[b, prompt_len - 1 + j] = tok
            if j > 0:
                mask[b, prompt_len - 1 + j] = 1.0
    return token_input, targets, mask


def _batch_losses(
    backbone: Backbone,
    prompts: np.ndarray,
    target_ids: list[list[int]],
    head_override: np.ndarray | None = None,
) -> np.ndarray:
    """Per-row mean NLL for a batch of (prompt embeddings, target) pairs."""
    b, p, e = prompts.shape
    token_input, targets, mask = _padded_targets(backbone, target_ids, p)
    with no_grad():
        x = concat([Tensor(prompts), backbone.embed_ids(token_input)], axis=1)
        logits = backbone.logits(backbone.hidden_states(x), head_override).data
    peak = logits.max(axis=-1, keepdims=True)
    lse = peak[..., 0] + np.log(np.exp(logits - peak).sum(axis=-1))
    tok_ll = np.take_along_axis(logits, targets[..., None], axis=-1)[..., 0] - lse
    return -(tok_ll * mask).sum(axis=-1) / mask.sum(axis=-1)


def assignment_losses(
    state: HierarchicalEmbeddings, backbone: Backbone, dataset: list[str]
) -> np.ndarray:
    """(N, K) loss matrix: molecule n scored with every cluster embedding.

    Exactly N x K loss evaluations (one batch of K per molecule).
    """
    words = backbone.prompt_word_embeddings(PROMPT_TRAIN)
    k, e = state.inter.shape
    losses = np.zeros((state.n, k))
    for n, smiles in enumerate(dataset):
        ids = backbone.vocab.encode_smiles(smiles)
        prompts = np.stack(
            [
                np.vstack([words, state.shared[None], state.inter[j][None], state.detail[n][None]])
                for j in range(k)
            ]
        )
        losses[n] = _batch_losses(
            backbone, prompts, [ids] * k, state.head_override
        )
    return losses


def assign_clusters(
    state: HierarchicalEmbeddings, backbone: Backbone, dataset: list[str]
) -> tuple[np.ndarray, np.ndarray]:
    """argmin-over-clusters assignment; ties break toward the smallest index."""
    losses = assignment_losses(state, backbone, dataset)
    return losses.argmin(axis=1), losses


def train(
    dataset: list[str],
    backbone: Backbone,
    config: InversionConfig,
) -> tuple[HierarchicalEmbeddings, TrainLog]:
    """Learn the hierarchical embeddings; the backbone stays untouched.

    Cluster assignments are refreshed at the start of epochs
    1..assign_epochs and frozen afterwards. Updates are AdamW steps with
    global-norm clipping and a linearly decaying learning rate.
    """
    if not backbone.frozen:
        raise ValueError("inversion requires a frozen backbone")
    state = init(dataset, backbone, config)
    log = TrainLog()
    target_ids = [backbone.vocab.encode_smiles(s) for s in dataset]
    words = backbone.prompt_word_embeddings(PROMPT_TRAIN)
    n, e = state.n, state.embed_dim

    params: dict[str, Tensor] = {"s": Tensor(state.shared, requires_grad=True)}
    if "i" in config.levels:
        params["i"] = Tensor(state.inter, requires_grad=True)
    if "d" in config.levels:
        params["d"] = Tensor(state.detail, requires_grad=True)
    head_t: Tensor | None = None
    if config.update_head:
        head_t = Tensor(backbone.params["head"].data.copy(), requires_grad=True)
        params["head"] = head_t

    def current_state() -> HierarchicalEmbeddings:
        return HierarchicalEmbeddings(
            params["s"].data.copy(),
            params["i"].data.copy() if "i" in params else state.inter.copy(),
            params["d"].data.copy() if "d" in params else state.detail.copy(),
            state.assign.copy(),
            config.seed,
            config.levels,
            head_t.data.copy() if head_t is not None else None,
        )

    opt = AdamW(params, lr=config.lr, eps=1e-8, weight_decay=config.weight_decay)
    rng = np.random.default_rng(config.seed)
    words_t = Tensor(words)

    for epoch in range(config.epochs):
        if "i" in config.levels and epoch < config.assign_epochs:
            snapshot = current_state()
            assign, losses = assign_clusters(snapshot, backbone, dataset)
            state.assign = assign
            log.assign_history.append(assign.copy())
            if epoch == config.assign_epochs - 1:
                snapshot.assign = assign.copy()
                log.freeze_state = snapshot
                log.freeze_losses = losses
        lr = config.lr * (1.0 - epoch / config.epochs)
        order = rng.permutation(n)
        batch_losses = []
        for start in range(0, n, config.batch_size):
            batch = order[start : start + config.batch_size]
            b = len(batch)
            pieces = [words_t.broadcast_to((b,) + words.shape)]
            pieces.append(params["s"].reshape(1, 1, e).broadcast_to((b, 1, e)))
            if "i" in params:
                pieces.append(params["i"].take_rows(state.assign[batch]).reshape(b, 1, e))
            if "d" in params:
                pieces.append(params["d"].take_rows(batch).reshape(b, 1, e))
            prompt_len = sum(piece.shape[1] for piece in pieces)
            token_input, targets, mask = _padded_targets(
                backbone, [target_ids[j] for j in batch], prompt_len
            )
            x = concat(pieces + [backbone.embed_ids(token_input)], axis=1)
            loss = backbone.sequence_nll(x, targets, mask, head_t)
            if not np.isfinite(loss.data):
                raise DivergedLoss(f"non-finite loss at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            clip_global_norm(
                [t.grad for t in params.values() if t.grad is not None], config.clip_norm
            )
            opt.step(lr=lr)
            batch_losses.append(float(loss.data))
        log.epoch_loss.append(float(np.mean(batch_losses)))

    final = current_state()
    return final, log


# -- persistence ---------------------------------------------------------------


def dataset_hash(dataset: list[str]) -> str:
    return hashlib.sha256("\n".join(dataset).encode("utf-8")).hexdigest()


def save_embeddings(
    path, state: HierarchicalEmbeddings, config: InversionConfig, data_hash: str
) -> None:
    tensors = {
        "shared": state.shared,
        "inter": state.inter,
        "detail": state.detail,
        "assign": state.assign.astype(np.int64),
    }
    if state.head_override is not None:
        tensors["head_override"] = state.head_override
    meta = {
        "config": asdict(config),
        "dataset_hash": data_hash,
        "levels": state.levels,
        "seed": state.seed,
    }
    save_container(path, EMBED_MAGIC, meta, tensors)


def load_embeddings(path) -> tuple[HierarchicalEmbeddings, dict]:
    meta, tensors = load_container(path, EMBED_MAGIC)
    state = HierarchicalEmbeddings(
        tensors["shared"],
        tensors["inter"],
        tensors["detail"],
        tensors["assign"],
        meta.get("seed", 0),
        meta.get("levels", "sid"),
        tensors.get("head_override"),
    )
    return state, meta
