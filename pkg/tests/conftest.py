import numpy as np
import pytest

from src.services.data.sequence import write_sequence
from src.services.data.synthetic import generate_synthetic_sequence


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def frame():
    """One 64x64 synthetic road frame."""
    return generate_synthetic_sequence(seed=3, frame_count=2, size=64).frames[0]


@pytest.fixture
def sequences():
    return [generate_synthetic_sequence(seed=s, frame_count=4, size=32, source=f"seq_{s:03d}") for s in range(2)]


@pytest.fixture
def corpus_dir(tmp_path, sequences):
    root = tmp_path / "corpus"
    for seq in sequences:
        write_sequence(seq, root / seq.source)
    return root
