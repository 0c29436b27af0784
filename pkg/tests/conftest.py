import random

import pytest

from chromafeat.dataset import Example, SparseDataset


def random_dataset(rng: random.Random, n: int, n_features: int, nnz_max: int) -> SparseDataset:
    """Uniform random sparse dataset for property tests."""
    examples = []
    for _ in range(n):
        t = rng.randint(1, nnz_max)
        active = tuple(sorted(rng.sample(range(1, n_features + 1), min(t, n_features))))
        examples.append(Example(rng.randint(0, 1), active))
    return SparseDataset.from_examples(examples)


@pytest.fixture
def rng():
    return random.Random(12345)
