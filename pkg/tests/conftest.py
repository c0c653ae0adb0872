import numpy as np
import pytest

from neo_ensemble import data as dm


def pytest_configure(config):
    np.set_printoptions(precision=6, suppress=True)


@pytest.fixture(scope="session")
def small_dataset():
    return dm.synth_generate(dm.SynthConfig(n_neg=300, n_pos=30, seed=7))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_record(i, label=0, numeric=None, hla="A*02:01", mut="ACDEFGHIK", wt="ACDEFGHIL"):
    numeric = tuple(float(i + k) for k in range(8)) if numeric is None else tuple(numeric)
    return dm.FeatureRecord(f"r{i}", mut, wt, hla, numeric, label)
