"""Shared fixtures: one pretrained toy backbone serves the whole suite."""

import pytest

from corpora import session_corpus
from himol.backbone import BackboneConfig, PretrainConfig, pretrain

BACKBONE_PRETRAIN = PretrainConfig(
    epochs=60, batch_size=32, lr=2e-3, cond_noise=0.05, seed=1
)
BACKBONE_ARCH = BackboneConfig(embed_dim=48, n_layers=2, n_heads=4, context=48)


@pytest.fixture(scope="session")
def toy_backbone():
    model, history = pretrain(session_corpus(), BACKBONE_PRETRAIN, BACKBONE_ARCH)
    model.pretrain_history = history
    return model
