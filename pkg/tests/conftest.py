import pathlib

import numpy as np
import pytest

from weakagg.aggregator import ModelConfig

FIXTURE_CORPUS = pathlib.Path(__file__).parent / "fixtures" / "corpus"

# Small enough to keep gradient checks and training loops fast, big enough
# that every parameter tensor has more than one row and column.
SMALL_CONFIG = ModelConfig(embed_dim=16, proj_dim=8, score_dim=6, transform_dim=5, out_dim=2)
TINY_CONFIG = ModelConfig(embed_dim=4, proj_dim=3, score_dim=2, transform_dim=2, out_dim=2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def fixture_corpus():
    assert FIXTURE_CORPUS.is_dir(), "checked-in corpus fixture is missing"
    return FIXTURE_CORPUS
