import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dedup_scan.synth import CorpusSpec, generate

settings.register_profile(
    "suite", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("suite")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def make_rgb(rng):
    def _make(h=64, w=64):
        return rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)

    return _make


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """One shared planted corpus: 30 bases, 6 exact, 8 augmented, 5 leaks."""
    root = tmp_path_factory.mktemp("corpus")
    spec = CorpusSpec(
        train_dir=root / "train",
        val_dir=root / "val",
        seed=42,
        bases=30,
        image_size=64,
        exact_dups=6,
        aug_dups=8,
        leaks=5,
        val_bases=10,
        annotations=True,
    )
    truth = generate(spec, ground_truth_path=root / "ground_truth.json")
    return root, truth
