import numpy as np
import pytest

from gacoop.model import FrozenTextEncoder, PromptParams, build_encoder, encode_text
from gacoop.objectives import Sample
from gacoop.rng import SeededRng


@pytest.fixture
def tiny_encoder():
    """N=3 classes, ctx 2x4, d_embed=6, tau=0.25."""
    return build_encoder(seed=11, n_classes=3, d_embed=6, d_token=4, ctx_len=2, tau=0.25)


@pytest.fixture
def tiny_prompt():
    rng = SeededRng(5)
    return PromptParams(ctx=rng.normal(0.0, 0.5, n=8).reshape(2, 4))


def make_sample(rng: SeededRng, d_embed: int, n_regions: int, label: int) -> Sample:
    regions = (
        np.stack([rng.unit_vector(d_embed) for _ in range(n_regions)])
        if n_regions
        else np.zeros((0, d_embed))
    )
    return Sample(
        global_feature=rng.unit_vector(d_embed),
        region_features=regions,
        label=label,
    )


def make_batch(seed: int, d_embed: int = 6, n_regions: int = 2, n_classes: int = 3, size: int = 2):
    rng = SeededRng(seed)
    return [
        make_sample(rng, d_embed, n_regions, int(rng.next_u64() % n_classes))
        for _ in range(size)
    ]


def identity_encoder() -> FrozenTextEncoder:
    """M=1, d_token=2, W = 4x4 identity: encode_text is plain concat+normalize."""
    return FrozenTextEncoder(
        class_embeddings=np.array([[0.0, 1.0]]),
        w=np.eye(4),
        tau=1.0,
        ctx_len=1,
    )
