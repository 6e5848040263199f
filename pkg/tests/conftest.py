import itertools
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qmpi.runtime import LaunchSpec, launch, register_program, unregister_program  # noqa: E402

_counter = itertools.count()


def spmd(size, entry, *, seed=0, scheduler="round-robin-deterministic", timeout=2.0, **kw):
    """Launch ``entry(ctx)`` on ``size`` ranks under a throwaway program name."""
    name = f"_test_{next(_counter)}"
    register_program(name, entry)
    try:
        return launch(LaunchSpec(name, size, seed=seed, scheduler=scheduler, timeout=timeout, **kw))
    finally:
        unregister_program(name)


def random_state(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
