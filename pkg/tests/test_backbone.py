"""Backbone contracts: vocabulary, training, freezing, decoding, persistence."""

import numpy as np
import pytest

from corpora import session_corpus
from himol.backbone import (
    BOS,
    EOS,
    GEN_TOKEN,
    PAD,
    PROMPT_SAMPLE,
    PROMPT_TRAIN,
    BackboneConfig,
    DecodeConfig,
    EmptyCorpus,
    PretrainConfig,
    UnknownToken,
    Vocab,
    pretrain,
)
from himol.checkpoint import (
    EMBED_MAGIC,
    MODEL_MAGIC,
    BadCheckpoint,
    load_container,
    load_model,
    save_container,
    save_model,
)


class TestVocab:
    def test_specials_fixed_slots(self):
        v = Vocab.build(["CCO"])
        assert v.entries[:3] == [PAD, BOS, EOS]

    def test_prompt_words_and_gen_present(self):
        v = Vocab.build(["CCO"])
        for word in PROMPT_TRAIN + PROMPT_SAMPLE + (GEN_TOKEN,):
            v.id(word)

    def test_encode_two_char_and_percent(self):
        v = Vocab.build(["ClCC", "C%12CCCCCCCCCC%12"])
        ids = v.encode_smiles("ClCC")
        assert v.entries[ids[0]] == "Cl"
        assert "%12" in [v.entries[i] for i in v.encode_smiles("C%12CCCCCCCCCC%12")]

    def test_bracket_tokens_from_corpus(self):
        v = Vocab.build(["C[NH2+]C"])
        assert "[NH2+]" in v.entries
        with pytest.raises(UnknownToken):
            v.encode_smiles("C[NH3+]C")

    def test_unknown_token(self):
        v = Vocab.build(["CCO"])
        with pytest.raises(UnknownToken):
            v.encode_smiles("C$C")


class TestPretrain:
    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            pretrain([])

    def test_untrained_loss_near_log_v(self):
        corpus = ["CCO", "CCC"]
        config = PretrainConfig(epochs=1, batch_size=2, lr=0.0, seed=0)
        model, history = pretrain(corpus, config, BackboneConfig(embed_dim=16, n_layers=1, n_heads=2, context=32))
        v = len(model.vocab)
        assert abs(history[0] - np.log(v)) / np.log(v) < 0.25

    def test_memorizes_single_string(self):
        model, history = pretrain(
            ["CCO"],
            PretrainConfig(epochs=80, batch_size=4, lr=3e-3, uncond_prob=1.0, seed=0),
            BackboneConfig(embed_dim=32, n_layers=2, n_heads=4, context=32),
        )
        assert history[-1] < 0.05
        text, truncated = model.decode(model.generic_prompt(), DecodeConfig(greedy=True, max_len=16))
        assert text == "CCO"
        assert not truncated

    def test_loss_history_decreases(self, toy_backbone):
        history = toy_backbone.pretrain_history
        assert history[-1] < history[0]


class TestFrozenContract:
    def test_prompt_loss_requires_frozen(self):
        model, _ = pretrain(
            ["CC"], PretrainConfig(epochs=1, batch_size=1, seed=0),
            BackboneConfig(embed_dim=16, n_layers=1, n_heads=2, context=16),
        )
        assert model.frozen  # pretrain freezes on exit

    def test_prompt_loss_leaves_backbone_byte_identical(self, toy_backbone, tmp_path):
        before = tmp_path / "before.ckpt"
        after = tmp_path / "after.ckpt"
        save_model(before, toy_backbone)
        prompt = toy_backbone.generic_prompt()
        for target in ("CCO", "CCCC", "CC(=O)OC"):
            toy_backbone.prompt_loss(prompt, target)
        save_model(after, toy_backbone)
        assert before.read_bytes() == after.read_bytes()

    def test_checkpoint_roundtrip_bitwise(self, toy_backbone, tmp_path):
        path = tmp_path / "model.ckpt"
        save_model(path, toy_backbone)
        loaded = load_model(path)
        prompt = toy_backbone.generic_prompt()
        l1, g1 = toy_backbone.prompt_loss(prompt, "CCO")
        l2, g2 = loaded.prompt_loss(prompt, "CCO")
        assert l1 == l2
        assert np.array_equal(g1, g2)
        path2 = tmp_path / "again.ckpt"
        save_model(path2, loaded)
        assert path.read_bytes() == path2.read_bytes()


class TestPromptLoss:
    def test_nonnegative_and_deterministic(self, toy_backbone):
        prompt = toy_backbone.generic_prompt()
        l1, g1 = toy_backbone.prompt_loss(prompt, "CCCO")
        l2, g2 = toy_backbone.prompt_loss(prompt, "CCCO")
        assert l1 >= 0.0
        assert l1 == l2
        assert np.array_equal(g1, g2)

    def test_unknown_target_token(self, toy_backbone):
        with pytest.raises(UnknownToken):
            toy_backbone.prompt_loss(toy_backbone.generic_prompt(), "C[SeH]C")

    def test_gradients_match_finite_differences(self, toy_backbone):
        rng = np.random.default_rng(0)
        prompt = toy_backbone.generic_prompt()
        prompt = prompt + rng.normal(0.0, 0.05, size=prompt.shape)
        _, grads = toy_backbone.prompt_loss(prompt, "CC(=O)OC")
        for pos in range(prompt.shape[0]):
            for coord in rng.choice(prompt.shape[1], size=3, replace=False):
                h = 1e-6
                up = prompt.copy()
                up[pos, coord] += h
                down = prompt.copy()
                down[pos, coord] -= h
                num = (
                    toy_backbone.prompt_loss_value(up, "CC(=O)OC")
                    - toy_backbone.prompt_loss_value(down, "CC(=O)OC")
                ) / (2 * h)
                got = grads[pos, coord]
                assert abs(num - got) / max(1e-10, abs(num), abs(got)) < 1e-4


class TestDecode:
    def test_seeded_determinism(self, toy_backbone):
        prompt = toy_backbone.generic_prompt()
        cfg = DecodeConfig(temperature=1.2, max_len=24, seed=42)
        assert toy_backbone.decode(prompt, cfg) == toy_backbone.decode(prompt, cfg)

    def test_greedy_ignores_seed(self, toy_backbone):
        prompt = toy_backbone.generic_prompt()
        a = toy_backbone.decode(prompt, DecodeConfig(greedy=True, max_len=24, seed=1))
        b = toy_backbone.decode(prompt, DecodeConfig(greedy=True, max_len=24, seed=999))
        assert a == b

    def test_temperature_must_be_positive(self, toy_backbone):
        with pytest.raises(ValueError):
            toy_backbone.decode(toy_backbone.generic_prompt(), DecodeConfig(temperature=0.0))

    def test_distribution_sums_to_one(self, toy_backbone):
        prompt = toy_backbone.generic_prompt()
        ids = toy_backbone.vocab.encode_smiles("CCO")
        for prefix_len in range(len(ids) + 1):
            probs = toy_backbone.next_distribution(prompt, ids[:prefix_len], 1.0)
            assert abs(probs.sum() - 1.0) < 1e-9
            probs2 = toy_backbone.next_distribution(prompt, ids[:prefix_len], 2.0)
            assert abs(probs2.sum() - 1.0) < 1e-9

    def test_truncation_flag(self, toy_backbone):
        prompt = toy_backbone.generic_prompt()
        text, truncated = toy_backbone.decode(prompt, DecodeConfig(max_len=1, seed=0))
        assert truncated or text == ""


class TestActivations:
    def test_shape_and_determinism(self, toy_backbone):
        a = toy_backbone.activations("CCO")
        assert a.shape == (toy_backbone.embed_dim,)
        assert np.array_equal(a, toy_backbone.activations("CCO"))

    def test_distinct_molecules_distinct_vectors(self, toy_backbone):
        mols = session_corpus()[:20]
        acts = [toy_backbone.activations(s) for s in mols]
        for i in range(len(acts)):
            for j in range(i + 1, len(acts)):
                assert float(np.abs(acts[i] - acts[j]).max()) > 1e-9

    def test_stats_shape(self, toy_backbone):
        stats = toy_backbone.activation_stats(["CCO", "CCC", "CCCC"])
        e = toy_backbone.embed_dim
        assert stats.mean.shape == (e,)
        assert stats.cov.shape == (e, e)
        assert np.allclose(stats.cov, stats.cov.T, atol=1e-9)
        assert stats.count == 3


class TestCheckpointContainer:
    def test_magic_rejected(self, tmp_path):
        path = tmp_path / "x.ckpt"
        save_container(path, EMBED_MAGIC, {"a": 1}, {"t": np.ones(3)})
        with pytest.raises(BadCheckpoint, match="magic"):
            load_container(path, MODEL_MAGIC)

    def test_corruption_detected(self, tmp_path):
        path = tmp_path / "x.ckpt"
        save_container(path, MODEL_MAGIC, {}, {"t": np.ones(3)})
        raw = bytearray(path.read_bytes())
        raw[60] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(BadCheckpoint, match="checksum"):
            load_container(path, MODEL_MAGIC)

    def test_int_tensors_roundtrip(self, tmp_path):
        path = tmp_path / "x.ckpt"
        save_container(path, MODEL_MAGIC, {"k": 2}, {"c": np.array([3, 1, 2])})
        meta, tensors = load_container(path, MODEL_MAGIC)
        assert meta == {"k": 2}
        assert tensors["c"].dtype == np.int64
        assert list(tensors["c"]) == [3, 1, 2]
