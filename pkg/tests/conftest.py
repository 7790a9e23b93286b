import numpy as np
import pytest

from gunwatch import network as nn


@pytest.fixture
def tiny_net():
    """Smallest network exercising every layer kind (4x4 input)."""
    specs = [
        nn.conv2d(1, 2),
        nn.relu(),
        nn.maxpool2x2(),
        nn.flatten(),
        nn.dense(8, 5),
        nn.relu(),
        nn.dense(5, 3),
        nn.softmax_layer(),
    ]
    return nn.Network(specs, (1, 4, 4), seed=7)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
