"""Small frozen autoregressive SMILES language model.

A causal self-attention decoder trained from scratch on a SMILES corpus
with the prompt "The molecule is a" followed by pseudo-token slots that
condition generation. After pretraining the model is frozen; downstream
code supplies prompt token *embeddings* (learned or interpolated) and
reads next-token distributions, cross-entropy against a target string,
gradients with respect to the prompt embeddings, or pooled
penultimate-layer activations.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import (
    AdamW,
    Tensor,
    clip_global_norm,
    concat,
    cross_entropy,
    gelu,
    layer_norm,
    no_grad,
    softmax,
)
from .chem.tokens import LexError, lex

PAD, BOS, EOS = "<pad>", "<bos>", "<eos>"
GEN_TOKEN = "<GEN>"
PROMPT_TRAIN = ("The", "molecule", "is", "a")
PROMPT_SAMPLE = ("A", "similar", "chemical", "of")

_BASE_SMILES_TOKENS = (
    tuple("BCNOPSFI")
    + ("Cl", "Br")
    + tuple("bcnops")
    + tuple("-=#:/\\")
    + tuple(str(d) for d in range(1, 10))
    + tuple(f"%{d:02d}" for d in range(10, 20))
    + ("(", ")", ".")
)


class UnknownToken(ValueError):
    """A SMILES token is outside the model vocabulary."""


class EmptyCorpus(ValueError):
    pass


class DivergedLoss(RuntimeError):
    pass


class Vocab:
    """Token table: specials at slots 0..2, then prompt words, the generic
    pretraining pseudo-token, the base SMILES alphabet, and any bracket-atom
    tokens discovered in the corpus."""

    def __init__(self, entries: list[str]):
        self.entries = list(entries)
        self.index = {tok: i for i, tok in enumerate(self.entries)}
        if len(self.index) != len(self.entries):
            raise ValueError("duplicate vocab entries")
        for i, special in enumerate((PAD, BOS, EOS)):
            if self.entries[i] != special:
                raise ValueError(f"special {special} must sit at slot {i}")

    @classmethod
    def build(cls, corpus: list[str]) -> "Vocab":
        extra = set()
        for smiles in corpus:
            for tok in lex(smiles):
                if tok.text not in _BASE_SMILES_TOKENS:
                    extra.add(tok.text)
        entries = (
            [PAD, BOS, EOS]
            + list(PROMPT_TRAIN)
            + list(PROMPT_SAMPLE)
            + [GEN_TOKEN]
            + list(_BASE_SMILES_TOKENS)
            + sorted(extra)
        )
        return cls(entries)

    def __len__(self) -> int:
        return len(self.entries)

    def id(self, token: str) -> int:
        try:
            return self.index[token]
        except KeyError:
            raise UnknownToken(f"token {token!r} not in vocabulary") from None

    def encode_smiles(self, smiles: str) -> list[int]:
        try:
            tokens = lex(smiles)
        except LexError as err:
            raise UnknownToken(str(err)) from None
        return [self.id(t.text) for t in tokens]


@dataclass(frozen=True)
class BackboneConfig:
    embed_dim: int = 64
    n_layers: int = 2
    n_heads: int = 4
    context: int = 128
    mlp_ratio: int = 4
    init_std: float = 0.02
    n_pseudo_slots: int = 3  # prompt positions reserved for pseudo-tokens


@dataclass(frozen=True)
class PretrainConfig:
    epochs: int = 40
    batch_size: int = 16
    lr: float = 3e-4
    weight_decay: float = 0.01
    clip_norm: float = 1.0
    adam_eps: float = 1e-8
    cond_noise: float = 0.1  # noise on the summary vectors, relative to their RMS
    uncond_prob: float = 0.2  # probability of the generic token filling the slots
    seed: int = 0


@dataclass(frozen=True)
class DecodeConfig:
    temperature: float = 1.0
    max_len: int = 96
    seed: int = 0
    greedy: bool = False


@dataclass
class ActivationStats:
    """Mean and covariance of pooled activations over a molecule set."""

    mean: np.ndarray  # (E,)
    cov: np.ndarray  # (E, E), symmetric PSD up to clamping
    count: int


class Backbone:
    def __init__(self, vocab: Vocab, config: BackboneConfig, seed: int = 0):
        self.vocab = vocab
        self.config = config
        self.frozen = False
        rng = np.random.default_rng(seed)
        e, v = config.embed_dim, len(vocab)
        hidden = config.mlp_ratio * e
        std = config.init_std

        def normal(*shape):
            return Tensor(rng.normal(0.0, std, size=shape), requires_grad=True)

        self.params: dict[str, Tensor] = {
            "tok_emb": normal(v, e),
            "pos_emb": normal(config.context, e),
            "ln_f_g": Tensor(np.ones(e), requires_grad=True),
            "ln_f_b": Tensor(np.zeros(e), requires_grad=True),
            "head": normal(e, v),
        }
        for layer in range(config.n_layers):
            p = f"l{layer}_"
            self.params.update(
                {
                    p + "ln1_g": Tensor(np.ones(e), requires_grad=True),
                    p + "ln1_b": Tensor(np.zeros(e), requires_grad=True),
                    p + "wq": normal(e, e),
                    p + "wk": normal(e, e),
                    p + "wv": normal(e, e),
                    p + "wo": normal(e, e),
                    p + "ln2_g": Tensor(np.ones(e), requires_grad=True),
                    p + "ln2_b": Tensor(np.zeros(e), requires_grad=True),
                    p + "w1": normal(e, hidden),
                    p + "b1": Tensor(np.zeros(hidden), requires_grad=True),
                    p + "w2": normal(hidden, e),
                    p + "b2": Tensor(np.zeros(e), requires_grad=True),
                }
            )

    # -- plumbing -------------------------------------------------------------

    def freeze(self) -> None:
        self.frozen = True
        for p in self.params.values():
            p.requires_grad = False
            p._parents = ()
            p._backward = None
            p.zero_grad()

    @property
    def embed_dim(self) -> int:
        return self.config.embed_dim

    def embedding(self, token: str) -> np.ndarray:
        """Copy of one token-embedding row."""
        return self.params["tok_emb"].data[self.vocab.id(token)].copy()

    def embed_ids(self, ids: list[int] | np.ndarray) -> Tensor:
        return self.params["tok_emb"].take_rows(np.asarray(ids, dtype=np.int64))

    def prompt_word_embeddings(self, words: tuple[str, ...]) -> np.ndarray:
        return np.stack([self.embedding(w) for w in words])

    def generic_prompt(self, words: tuple[str, ...] = PROMPT_TRAIN) -> np.ndarray:
        """Prompt embeddings with every pseudo-token slot at <GEN>."""
        gen = self.embedding(GEN_TOKEN)
        return np.vstack(
            [self.prompt_word_embeddings(words)]
            + [gen[None]] * self.config.n_pseudo_slots
        )

    # -- forward --------------------------------------------------------------

    def hidden_states(self, x: Tensor) -> Tensor:
        """Run the decoder stack over (B, T, E) input embeddings; returns the
        final-normed penultimate states (everything before the output head)."""
        b, t, e = x.shape
        cfg = self.config
        if t > cfg.context:
            raise ValueError(f"sequence length {t} exceeds context {cfg.context}")
        heads = cfg.n_heads
        hd = e // heads
        pos = self.params["pos_emb"].take_rows(np.arange(t))
        h = x + pos
        mask = np.triu(np.full((t, t), -1e30), k=1)
        for layer in range(cfg.n_layers):
            p = f"l{layer}_"
            a = layer_norm(h, self.params[p + "ln1_g"], self.params[p + "ln1_b"])
            q = (a @ self.params[p + "wq"]).reshape(b, t, heads, hd).transpose(0, 2, 1, 3)
            k = (a @ self.params[p + "wk"]).reshape(b, t, heads, hd).transpose(0, 2, 1, 3)
            v = (a @ self.params[p + "wv"]).reshape(b, t, heads, hd).transpose(0, 2, 1, 3)
            scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(hd)) + Tensor(mask)
            attn = softmax(scores, axis=-1)
            ctx = (attn @ v).transpose(0, 2, 1, 3).reshape(b, t, e)
            h = h + ctx @ self.params[p + "wo"]
            m = layer_norm(h, self.params[p + "ln2_g"], self.params[p + "ln2_b"])
            h = h + (gelu(m @ self.params[p + "w1"] + self.params[p + "b1"])
                     @ self.params[p + "w2"] + self.params[p + "b2"])
        return layer_norm(h, self.params["ln_f_g"], self.params["ln_f_b"])

    def logits(self, hidden: Tensor, head_override=None) -> Tensor:
        if head_override is None:
            head = self.params["head"]
        elif isinstance(head_override, Tensor):
            head = head_override  # co-trained head during inversion
        else:
            head = Tensor(head_override)
        return hidden @ head

    def sequence_nll(
        self,
        x: Tensor,
        targets: np.ndarray,
        mask: np.ndarray,
        head_override: np.ndarray | None = None,
    ) -> Tensor:
        """Masked mean cross-entropy of next-token predictions."""
        return cross_entropy(self.logits(self.hidden_states(x), head_override), targets, mask)

    # -- prompt-conditioned API -------------------------------------------------

    def prompt_sequence(
        self, prompt_embeddings: np.ndarray, target_ids: list[int]
    ) -> tuple[Tensor, np.ndarray, np.ndarray, Tensor]:
        """Assemble "<prompt> BOS target EOS" teacher-forcing arrays.

        Returns (input embeddings (1, L-1, E), shifted targets, loss mask,
        prompt tensor) where the prompt tensor is the graph leaf whose grad
        is d loss / d prompt embeddings.
        """
        prompt = Tensor(np.asarray(prompt_embeddings, dtype=np.float64), requires_grad=True)
        p = prompt.shape[0]
        ids = [self.vocab.id(BOS)] + list(target_ids) + [self.vocab.id(EOS)]
        token_embs = self.embed_ids(ids[:-1])
        x = concat([prompt, token_embs], axis=0).reshape(1, p + len(ids) - 1, self.embed_dim)
        targets = np.zeros((1, p + len(ids) - 1), dtype=np.int64)
        mask = np.zeros((1, p + len(ids) - 1))
        for j, tok in enumerate(ids):
            targets[0, p - 1 + j] = tok
            mask[0, p - 1 + j] = 0.0 if j == 0 else 1.0  # BOS is input only
        return x, targets, mask, prompt

    def prompt_loss(
        self,
        prompt_embeddings: np.ndarray,
        target: str,
        head_override: np.ndarray | None = None,
    ) -> tuple[float, np.ndarray]:
        """Mean cross-entropy of the target SMILES given prompt embeddings,
        and the gradient with respect to each prompt embedding. The frozen
        backbone receives no updates."""
        if not self.frozen:
            raise ValueError("prompt_loss requires a frozen backbone")
        target_ids = self.vocab.encode_smiles(target)
        x, targets, mask, prompt = self.prompt_sequence(prompt_embeddings, target_ids)
        loss = self.sequence_nll(x, targets, mask, head_override)
        loss.backward()
        return float(loss.data), prompt.grad.copy()

    def prompt_loss_value(
        self,
        prompt_embeddings: np.ndarray,
        target: str,
        head_override: np.ndarray | None = None,
    ) -> float:
        """Loss only, without building a tape."""
        target_ids = self.vocab.encode_smiles(target)
        with no_grad():
            x, targets, mask, _ = self.prompt_sequence(prompt_embeddings, target_ids)
            loss = self.sequence_nll(x, targets, mask, head_override)
        return float(loss.data)

    def next_distribution(
        self,
        prompt_embeddings: np.ndarray,
        generated_ids: list[int],
        temperature: float,
        head_override: np.ndarray | None = None,
    ) -> np.ndarray:
        """Distribution over the next token given prompt + BOS + generated."""
        with no_grad():
            prompt = Tensor(np.asarray(prompt_embeddings, dtype=np.float64))
            ids = [self.vocab.id(BOS)] + list(generated_ids)
            x = concat([prompt, self.embed_ids(ids)], axis=0)
            x = x.reshape(1, prompt.shape[0] + len(ids), self.embed_dim)
            logits = self.logits(self.hidden_states(x), head_override)
            probs = softmax(Tensor(logits.data[0, -1] / temperature))
        return probs.data

    def decode(
        self,
        prompt_embeddings: np.ndarray,
        config: DecodeConfig,
        head_override: np.ndarray | None = None,
    ) -> tuple[str, bool]:
        """Sample a SMILES token string; returns (text, truncated flag).

        Multinomial sampling of logits/temperature until EOS or max_len;
        greedy argmax when the greedy flag is set. The raw string may be
        invalid SMILES.
        """
        if not self.frozen:
            raise ValueError("decode requires a frozen backbone")
        if config.temperature <= 0:
            raise ValueError("temperature must be positive")
        p = np.asarray(prompt_embeddings).shape[0]
        limit = min(config.max_len, self.config.context - p - 1)
        rng = np.random.default_rng(config.seed)
        eos = self.vocab.id(EOS)
        out_ids: list[int] = []
        truncated = True
        for _ in range(limit):
            probs = self.next_distribution(
                prompt_embeddings, out_ids, config.temperature, head_override
            )
            if config.greedy:
                tok = int(np.argmax(probs))
            else:
                tok = int(rng.choice(len(probs), p=probs))
            if tok == eos:
                truncated = False
                break
            out_ids.append(tok)
        return "".join(self.vocab.entries[i] for i in out_ids), truncated

    def activations(self, smiles: str) -> np.ndarray:
        """Mean-pooled penultimate-layer state over the SMILES tokens."""
        ids = self.vocab.encode_smiles(smiles)
        full = [self.vocab.id(BOS)] + ids + [self.vocab.id(EOS)]
        with no_grad():
            x = self.embed_ids(full).reshape(1, len(full), self.embed_dim)
            hidden = self.hidden_states(x)
        return hidden.data[0, 1 : 1 + len(ids)].mean(axis=0)

    def activation_stats(self, molecules: list[str]) -> ActivationStats:
        acts = np.stack([self.activations(s) for s in molecules])
        mean = acts.mean(axis=0)
        if len(molecules) > 1:
            cov = np.cov(acts, rowvar=False)
        else:
            cov = np.zeros((self.embed_dim, self.embed_dim))
        cov = (cov + cov.T) / 2.0
        return ActivationStats(mean, cov, len(molecules))


def pretrain(corpus: list[str], config: PretrainConfig | None = None,
             arch: BackboneConfig | None = None) -> tuple[Backbone, list[float]]:
    """Train a backbone with teacher forcing on
    "The molecule is a <pseudo slots> BOS x EOS" and freeze it.

    The pseudo-token slots hold a noisy summary of the molecule (the mean
    of its token embeddings) most of the time and the generic <GEN>
    embedding otherwise. A constant slot would carry no information and
    the frozen model would learn to ignore it, leaving nothing for prompt
    inversion to steer; the summary/dropout mix forces a conditioning
    pathway while keeping "The molecule is a <GEN>..." generative on its
    own. Loss covers the SMILES portion (x tokens plus EOS) only. Returns
    the frozen model and the per-epoch mean loss history.
    """
    if not corpus:
        raise EmptyCorpus("pretraining corpus is empty")
    config = config or PretrainConfig()
    arch = arch or BackboneConfig()
    vocab = Vocab.build(corpus)
    model = Backbone(vocab, arch, seed=config.seed)
    slots = arch.n_pseudo_slots
    word_ids = [vocab.id(w) for w in PROMPT_TRAIN]
    p = len(word_ids) + slots
    gen = vocab.id(GEN_TOKEN)
    bos, eos, pad = vocab.id(BOS), vocab.id(EOS), vocab.id(PAD)
    encoded = [vocab.encode_smiles(s) for s in corpus]
    longest = p + 2 + max(len(ids) for ids in encoded)
    if longest > arch.context + 1:
        raise ValueError(f"corpus needs context {longest - 1}, model has {arch.context}")

    opt = AdamW(
        model.params,
        lr=config.lr,
        eps=config.adam_eps,
        weight_decay=config.weight_decay,
    )
    rng = np.random.default_rng(config.seed)
    history: list[float] = []
    e = arch.embed_dim
    for epoch in range(config.epochs):
        order = rng.permutation(len(encoded))
        losses = []
        for start in range(0, len(encoded), config.batch_size):
            rows = [encoded[i] for i in order[start : start + config.batch_size]]
            b = len(rows)
            width = max(len(r) for r in rows) + 1  # BOS + x (EOS is target-only)
            token_input = np.full((b, width), pad, dtype=np.int64)
            targets = np.zeros((b, p + width), dtype=np.int64)
            mask = np.zeros((b, p + width))
            for row, ids in enumerate(rows):
                seq = [bos] + ids + [eos]
                token_input[row, : len(seq) - 1] = seq[:-1]
                for j, tok in enumerate(seq):
                    targets[row, p - 1 + j] = tok
                    if j > 0:
                        mask[row, p - 1 + j] = 1.0
            # Slot content, coarse to fine: the first slot always holds the
            # generic token; the middle slot a noisy composition summary
            # (mean embedding of the molecule's distinct tokens); the last
            # slot a noisy full-sequence mean. With probability uncond_prob
            # every slot falls back to <GEN>.
            slot_rows = []
            for ids in rows:
                gen_t = model.params["tok_emb"].take_rows(np.full(1, gen))
                if rng.random() < config.uncond_prob:
                    summaries = [gen_t] * slots
                else:
                    uniq = model.params["tok_emb"].take_rows(
                        np.asarray(sorted(set(ids)))
                    ).mean(axis=0, keepdims=True)
                    fine = model.params["tok_emb"].take_rows(np.asarray(ids)).mean(
                        axis=0, keepdims=True
                    )
                    summaries = ([gen_t] * (slots - 2) + [uniq, fine]) if slots >= 2 else [fine]
                noisy = []
                for summary in summaries:
                    rms = float(np.sqrt(np.mean(summary.data**2))) or 1.0
                    noise = rng.normal(0.0, config.cond_noise * rms, size=(1, 1, e))
                    noisy.append(summary.reshape(1, 1, e) + Tensor(noise))
                slot_rows.append(concat(noisy, axis=1))
            x = concat(
                [
                    model.embed_ids(np.tile(word_ids, (b, 1))),
                    concat(slot_rows, axis=0),
                    model.embed_ids(token_input),
                ],
                axis=1,
            )
            loss = model.sequence_nll(x, targets, mask)
            if not np.isfinite(loss.data):
                raise DivergedLoss(f"non-finite loss at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            clip_global_norm(
                [t.grad for t in model.params.values() if t.grad is not None],
                config.clip_norm,
            )
            opt.step()
            losses.append(float(loss.data))
        history.append(float(np.mean(losses)))
    model.freeze()
    return model, history


def backbone_meta(model: Backbone) -> dict:
    return {
        "vocab": model.vocab.entries,
        "config": asdict(model.config),
        "frozen": model.frozen,
    }


def backbone_from_parts(meta: dict, tensors: dict[str, np.ndarray]) -> Backbone:
    model = Backbone(Vocab(meta["vocab"]), BackboneConfig(**meta["config"]))
    for name, value in tensors.items():
        model.params[name].data = value.astype(np.float64)
    if meta.get("frozen", True):
        model.freeze()
    return model
