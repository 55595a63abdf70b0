"""
Pytest configuration and shared fixtures.
"""

import numpy as np
import pytest

from src.collectors.event_log import Trace, build_vocabulary, encode_traces, longest_l_max, write_event_log
from src.collectors.ontology import NodeKind, OntologyGraph, OntologyNode, embed_ontology
from src.nn.model import ModelConfig, NextActivityTransformer, init_params
from src.nn.pos_encoding import PEMode, SpeContext
from src.synthetic.generator import SynthConfig
from src.training.trainer import TrainConfig
from src.utils.config_manager import ENV_KEYS, ENV_PREFIX


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    """Keep SPE_MONITOR_* variables of the host out of the tests."""
    for suffix in ENV_KEYS:
        monkeypatch.delenv(ENV_PREFIX + suffix, raising=False)


@pytest.fixture
def sample_traces():
    """Small hand-written corpus over five activities."""
    return [
        Trace("c1", ("register", "check", "approve", "pay")),
        Trace("c2", ("register", "check", "reject")),
        Trace("c3", ("register", "approve", "pay")),
        Trace("c4", ("register", "check", "check", "approve", "pay")),
    ]


@pytest.fixture
def sample_vocab(sample_traces):
    return build_vocabulary(sample_traces)


@pytest.fixture
def sample_encoded(sample_traces, sample_vocab):
    return encode_traces(sample_traces, sample_vocab, longest_l_max(sample_traces))


@pytest.fixture
def event_log_file(tmp_path, sample_traces):
    """Sample corpus written as an event-log CSV."""
    path = tmp_path / "event_log.csv"
    write_event_log(sample_traces, path)
    return path


@pytest.fixture
def sample_ontology():
    """Two activity types joined by an edge, each owning its activities."""
    nodes = [
        OntologyNode("intake", NodeKind.TYPE),
        OntologyNode("decision", NodeKind.TYPE),
        OntologyNode("register", NodeKind.ACTIVITY),
        OntologyNode("check", NodeKind.ACTIVITY),
        OntologyNode("approve", NodeKind.ACTIVITY),
        OntologyNode("reject", NodeKind.ACTIVITY),
        OntologyNode("pay", NodeKind.ACTIVITY),
    ]
    edges = [
        ("intake", "decision"),
        ("intake", "register"),
        ("intake", "check"),
        ("decision", "approve"),
        ("decision", "reject"),
        ("decision", "pay"),
    ]
    return OntologyGraph(nodes, edges)


@pytest.fixture
def ontology_file(tmp_path, sample_ontology):
    path = tmp_path / "ontology.json"
    sample_ontology.save(path)
    return path


@pytest.fixture
def sample_table(sample_ontology):
    return embed_ontology(sample_ontology, 4)


@pytest.fixture
def tiny_model_config(sample_vocab):
    """Small architecture suitable for fast tests."""
    return ModelConfig(
        vocab_size=sample_vocab.size,
        d_model=8,
        hidden=12,
        heads=2,
        layers=2,
        dropout=0.0,
        pe_mode=PEMode.STRUCTURAL,
        spe_k=4,
    )


@pytest.fixture
def make_model(sample_vocab, sample_table):
    """Factory building a model from a config, attaching the ontology table when needed."""

    def _make(config, seed=0, dtype=np.float64):
        spe = SpeContext(sample_table, sample_vocab) if config.pe_mode is PEMode.STRUCTURAL else None
        return NextActivityTransformer(config, init_params(config, seed, dtype), spe)

    return _make


@pytest.fixture
def fast_train_config():
    return TrainConfig(epochs=3, batch_size=4, patience=2, seed=0)


@pytest.fixture
def small_synth_config():
    return SynthConfig(n_types=4, activities_per_type=2, n_traces=60, max_length=10, mean_length=6.0)


# Pytest configuration
def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line(
        "markers", "slow: marks tests as slow (deselect with '-m \"not slow\"')"
    )
    config.addinivalue_line(
        "markers", "integration: marks tests as integration tests"
    )
    config.addinivalue_line(
        "markers", "unit: marks tests as unit tests"
    )


def pytest_collection_modifyitems(config, items):
    """Modify test collection to add markers automatically."""
    for item in items:
        # Add unit marker to all tests by default
        if not any(marker.name in ['integration', 'slow'] for marker in item.iter_markers()):
            item.add_marker(pytest.mark.unit)

        if 'integration' in item.nodeid or 'slow' in item.name:
            item.add_marker(pytest.mark.slow)
