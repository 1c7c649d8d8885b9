"""Shared fixtures: a seeded synthetic corpus and a model trained on it.

Session scope keeps the expensive pieces (1,000-tune corpus, order-6
training) to a single build shared by the unit and acceptance tests.
"""

from __future__ import annotations

import pytest

from emomelody import folk
from emomelody.generator import CharLanguageModel


@pytest.fixture(scope="session")
def balanced_records():
    return folk.training_records(1000, seed=11)


@pytest.fixture(scope="session")
def trained_model(balanced_records):
    return CharLanguageModel.train(balanced_records, order=6, alpha=0.01)


@pytest.fixture(scope="session")
def random_corpus():
    return folk.random_scores(60, seed=7)
