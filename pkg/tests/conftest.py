import pytest

from bcdl import (HyperParams, ModelConfig, RngStream, ancestral_sample, build_gram)


@pytest.fixture
def tiny_instance():
    """N=4, K=2, M_x=M_y=2 instance used by the conditional-oracle suite.

    Generated from the model itself with pinned, moderate precisions so all
    conditionals are well scaled; the Gram comes from the generated outputs
    exactly as in training.
    """
    cfg = ModelConfig(dict_size=2, hyper=HyperParams.uniform(2.0))
    rng = RngStream(1234)
    data, state = ancestral_sample(
        cfg, 4, 2, 2, rng,
        fixed_gammas={"gamma_s": 1.0, "gamma_xy": 4.0, "gamma_x": 1.0, "gamma_y": 1.0},
    )
    gram = build_gram(data.y, cfg.kernel)
    # make sure both spike and slab branches appear
    state.z[0, 0] = 1.0
    state.z[1, 1] = -1.0
    return cfg, data, state, gram


@pytest.fixture
def scalar_instance():
    """N=2, K=1, M_x=M_y=1: small enough for closed-form cross-checks."""
    cfg = ModelConfig(dict_size=1, hyper=HyperParams.uniform(2.0))
    rng = RngStream(77)
    data, state = ancestral_sample(
        cfg, 2, 1, 1, rng,
        fixed_gammas={"gamma_s": 1.5, "gamma_xy": 3.0, "gamma_x": 1.0, "gamma_y": 2.0},
    )
    gram = build_gram(data.y, cfg.kernel)
    return cfg, data, state, gram


def seeded(seed, *path):
    return RngStream(seed, tuple(path))


@pytest.fixture
def rng():
    return RngStream(2024)
