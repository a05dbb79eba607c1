import numpy as np
import pytest

from sar2ndwi.unet import UNetConfig, build


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_config():
    """Smallest architecture that still exercises every layer type."""
    return UNetConfig(input_channels=2, encoder_filters=(2, 4), bottleneck_filters=8)


@pytest.fixture
def tiny_params(tiny_config):
    return build(tiny_config, seed=0)
