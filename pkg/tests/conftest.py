import pytest

from sweepbench.model import Precision, SweepPlan
from sweepbench.presets import builtin_devices, builtin_models

BATCH_SET = (1, 2, 4, 8, 16, 32, 64, 128, 256, 384, 512)
ALL_PRECISIONS = (Precision.FP32, Precision.FP16, Precision.INT8)


@pytest.fixture(scope="session")
def devices():
    return builtin_devices()

@pytest.fixture(scope="session")
def models():
    return builtin_models()


@pytest.fixture
def t4(devices):
    return devices["sim-t4"]


@pytest.fixture
def l4(devices):
    return devices["sim-l4"]


@pytest.fixture
def resnet18(models):
    return models["resnet18"]


@pytest.fixture
def small_plan():
    return SweepPlan(
        devices=("sim-t4",),
        models=("resnet18",),
        precisions=ALL_PRECISIONS,
        batch_sizes=(1, 8, 64),
        sweeps=2,
        repeats=2,
        warmup_iters=3,
        timed_iters=10,
        telemetry_period_ms=50,
        seed=42,
    )
