"""Shared fixtures: one small generated population reused across the suite."""

from __future__ import annotations

import numpy as np
import pytest

from ubsb.config import load_config
from ubsb.dataio import Dataset, dataset_from_profiles
from ubsb.synthgen import generate


@pytest.fixture(scope="session")
def config():
    return load_config()


@pytest.fixture(scope="session")
def small_dataset(config) -> Dataset:
    """1200 records, seed 17. Session-scoped: generation calibrates on 1200
    candidate profiles, which dominates the cost."""
    return dataset_from_profiles(generate(config, 1200, 17))


def head_rows(dataset: Dataset, n: int) -> Dataset:
    """Prefix slice; ids stay contiguous from 1 so the invariant holds."""
    return Dataset({name: arr[:n] for name, arr in dataset.columns.items()})


@pytest.fixture(scope="session")
def tiny_dataset(small_dataset) -> Dataset:
    return head_rows(small_dataset, 400)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(0)
