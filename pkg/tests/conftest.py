from __future__ import annotations

import numpy as np
import pytest

from boxtask.task import (
    DEFAULT_BOXES,
    DEFAULT_KEYS,
    Deterministic,
    EnvConfig,
    Fixed,
    TaskSetup,
)

BOX_BY_ID = {b.id: b for b in DEFAULT_BOXES}
KEY_BY_ID = {k.id: k for k in DEFAULT_KEYS}

# Appendix-style ground truth: box id -> the key that opens it.
TRUE_PAIRS = {
    "red": "red1",
    "pink": "grey2",
    "white": "orange4",
    "purple": "green3",
    "blue": "yellow5",
}


@pytest.fixture
def deterministic_setup() -> TaskSetup:
    return TaskSetup(EnvConfig(reliability=Deterministic(), observability="full", seed=0))


@pytest.fixture
def partial_setup() -> TaskSetup:
    return TaskSetup(
        EnvConfig(reliability=Fixed(rho=0.8), observability="partial", seed=0)
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
