"""Shared fixtures: one small deterministic corpus and benchmarks built from
it, session-scoped because everything downstream treats them as read-only."""
from __future__ import annotations

import pytest

from filingswarm.corpus.reconcile import reconcile
from filingswarm.corpus.schema import load_default_registry
from filingswarm.corpus.synthetic import SyntheticConfig, generate_synthetic
from filingswarm.gateway.deterministic import DeterministicProvider
from filingswarm.questbench import generate_benchmark


@pytest.fixture(scope="session")
def registry():
    return load_default_registry()


@pytest.fixture(scope="session")
def small_store(registry):
    return generate_synthetic(SyntheticConfig(records_per_table=120), seed=7,
                              registry=registry)


@pytest.fixture(scope="session")
def small_view(small_store):
    return reconcile(small_store)


@pytest.fixture(scope="session")
def bench(small_view):
    # 4 questions per template, templated only: 44 instances
    return generate_benchmark(small_view, per_template=4, seed=11)


@pytest.fixture(scope="session")
def bench_mixed(small_view):
    # adds two paraphrases per question: 132 instances
    return generate_benchmark(small_view, per_template=4, seed=11,
                              gateway=DeterministicProvider(), variegate_n=2)
