import pytest
import torch

from fanet.config import ModelName, NetConfig
from fanet.nets.params import ParamStore

SMALL_NET = NetConfig(image_side=8, d_f=4, d_z=3, n_identities=3, conv_widths=(2, 3))


@pytest.fixture
def net() -> NetConfig:
    return SMALL_NET


@pytest.fixture
def store() -> ParamStore:
    """Every model of the small architecture, freshly initialised."""
    return ParamStore.init(SMALL_NET, list(ModelName), seed=0).eval()


@pytest.fixture
def images() -> torch.Tensor:
    generator = torch.Generator().manual_seed(0)
    return torch.rand(2, 8, 8, 1, generator=generator) * 1.8 - 0.9
