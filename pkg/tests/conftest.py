import pytest

from nirbench.datagen import generate_dataset
from nirbench.foundation import NoiseConfig, ScenarioConfig


@pytest.fixture(autouse=True)
def _no_seed_override(monkeypatch):
    monkeypatch.delenv("NIRBENCH_SEED", raising=False)


@pytest.fixture(scope="session")
def default_dataset():
    return generate_dataset(ScenarioConfig())


@pytest.fixture(scope="session")
def quiet_dataset():
    return generate_dataset(ScenarioConfig(noise=NoiseConfig(False, False, False)))


@pytest.fixture(scope="session")
def small_dataset():
    return generate_dataset(ScenarioConfig(seed=3, n_subjects=10))
