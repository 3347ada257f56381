import numpy as np
import pytest

from toxivec.ingest import Platform, RawPost
from toxivec.model_io import EmbeddingModel


def make_post(body: str, post_id: int = 1, board: str = "pol",
              platform: Platform = Platform.FOURCHAN, timestamp: int = 1_500_000_000) -> RawPost:
    return RawPost(platform=platform, board=board, post_id=post_id,
                   timestamp=timestamp, body_html=body)


def random_model(size: int, dim: int, seed: int = 0) -> EmbeddingModel:
    rng = np.random.default_rng(seed)
    words = [f"w{i:04d}" for i in range(size)]
    vectors = rng.normal(size=(size, dim)).astype(np.float32)
    return EmbeddingModel(words=words, vectors=vectors)


@pytest.fixture
def toy_model() -> EmbeddingModel:
    # Hand-placed vectors: "north"/"south" nearly parallel, "east" orthogonal.
    words = ["north", "south", "east", "mid"]
    vectors = np.array([
        [1.0, 0.0, 0.0],
        [0.99, 0.14, 0.0],
        [0.0, 0.0, 1.0],
        [0.7, 0.7, 0.0],
    ], dtype=np.float32)
    return EmbeddingModel(words=words, vectors=vectors)
