import time

import numpy as np
import pytest

from rectflip.datasets import make_suite
from rectflip.objective import ObjectiveConfig
from rectflip.oracle import ToyDetector
from rectflip.search import AttackConfig, AttackMode, run_batch

# Master seed for the pinned ablation regression; realized values in the
# acceptance tests were recorded from this exact setup.
ABLATION_SEED = 7
ABLATION_BUDGET = 2000


@pytest.fixture(scope="session")
def toy():
    return ToyDetector()


@pytest.fixture(scope="session")
def suite20():
    return make_suite(20, seed=0)


@pytest.fixture(scope="session")
def ablation20(suite20, toy):
    """All five attack modes on the bundled 20-scene suite, budget 2000.

    Shared across the acceptance tests; worker count provably does not
    change results (each image owns a seeded substream), so 4 workers are
    safe for speed. Returns (results by mode, wall seconds).
    """
    cfg = AttackConfig(
        budget=ABLATION_BUDGET, objective=ObjectiveConfig(num_classes=3)
    )
    start = time.perf_counter()
    results = {
        mode: run_batch(
            suite20, toy, mode, cfg, master_seed=ABLATION_SEED, workers=4
        )
        for mode in AttackMode
    }
    return results, time.perf_counter() - start


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
