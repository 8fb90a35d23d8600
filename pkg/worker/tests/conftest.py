import pytest

from sweepworker.executors import DEFAULT_DEVICE, StubExecutor


@pytest.fixture
def stub():
    return StubExecutor(dict(DEFAULT_DEVICE))


@pytest.fixture
def model():
    return {
        "name": "resnet18",
        "flops_per_image": 3.6e9,
        "param_bytes": 46_000_000,
        "activation_bytes_per_image": 262_144,
        "input_shape": [3, 224, 224],
    }
