"""
Synthetic ontologies and event logs.

Activities are grouped into types. The type of the next activity is drawn from
a fixed random transition matrix conditioned on the type visited most often so
far, so the next activity depends on which activities were already performed
rather than on their exact order.
"""

from dataclasses import asdict, dataclass
from typing import Dict, List, Tuple

import numpy as np

from ..collectors.event_log import Trace
from ..collectors.ontology import NodeKind, OntologyGraph, OntologyNode
from ..nn.core import softmax_rows
from ..utils.errors import ConfigurationError
from ..utils.logger import setup_logger

logger = setup_logger(__name__)


@dataclass(frozen=True)
class SynthConfig:
    n_types: int = 22
    activities_per_type: int = 4
    n_traces: int = 5000
    min_length: int = 2
    max_length: int = 25
    mean_length: float = 15.0
    std_length: float = 3.0
    uniform_mix: float = 0.05
    temperature: float = 0.5
    stay_bias: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.n_types < 2:
            raise ConfigurationError(f"Need at least 2 activity types, got {self.n_types}")
        if self.activities_per_type < 1:
            raise ConfigurationError("Need at least one activity per type")
        if self.min_length < 1 or self.max_length < self.min_length:
            raise ConfigurationError(
                f"Invalid trace length range [{self.min_length}, {self.max_length}]"
            )
        if self.n_traces < 1:
            raise ConfigurationError("Need at least one trace")
        if self.temperature < 0 or self.std_length <= 0:
            raise ConfigurationError("temperature must be >= 0 and std_length > 0")
        if not 0.0 <= self.uniform_mix <= 1.0:
            raise ConfigurationError(f"uniform_mix must be in [0, 1], got {self.uniform_mix}")

    def to_dict(self) -> Dict:
        return asdict(self)


def type_name(t: int) -> str:
    return f"type_{t:02d}"


def activity_name(t: int, j: int) -> str:
    return f"act_{t:02d}_{j}"


def gen_ontology(config: SynthConfig) -> OntologyGraph:
    """
    Type nodes joined in a ring, each linked to its own activity nodes.

    Two types are joined by a single edge, since a ring of two would repeat it.
    """
    nodes: List[OntologyNode] = []
    edges: List[Tuple[str, str]] = []
    for t in range(config.n_types):
        nodes.append(OntologyNode(type_name(t), NodeKind.TYPE))
        for j in range(config.activities_per_type):
            nodes.append(OntologyNode(activity_name(t, j), NodeKind.ACTIVITY))
            edges.append((type_name(t), activity_name(t, j)))

    ring = [(t, (t + 1) % config.n_types) for t in range(config.n_types)]
    if config.n_types == 2:
        ring = ring[:1]
    edges.extend((type_name(a), type_name(b)) for a, b in ring)

    graph = OntologyGraph(nodes, edges)
    logger.info("Generated ontology", nodes=graph.n_nodes, edges=graph.n_edges)
    return graph


def activities_by_type(graph: OntologyGraph) -> List[List[str]]:
    """Activity neighbours of every type node, both in graph node order."""
    order = {name: i for i, name in enumerate(graph.node_names)}
    groups = []
    for node in graph.nodes:
        if node.kind is NodeKind.TYPE:
            members = [
                n for n in graph.graph.neighbors(node.name)
                if graph.kind_of(n) is NodeKind.ACTIVITY
            ]
            groups.append(sorted(members, key=order.__getitem__))
    return groups


def transition_matrix(config: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """
    Row-stochastic [T x T] type transition matrix.

    Rows are softmax((N + stay_bias * I) / temperature) with N standard normal;
    temperature 0 puts all mass on each row's maximum.
    """
    n = config.n_types
    scores = rng.standard_normal((n, n)) + config.stay_bias * np.eye(n)
    if config.temperature == 0:
        matrix = np.zeros((n, n))
        matrix[np.arange(n), scores.argmax(axis=1)] = 1.0
        return matrix
    return softmax_rows(scores / config.temperature)


def sample_lengths(config: SynthConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    """Rounded normal lengths truncated to the range by resampling, mixed with uniform draws."""
    lengths = np.zeros(n, dtype=np.int64)
    pending = np.arange(n)
    while pending.size:
        draws = np.rint(rng.normal(config.mean_length, config.std_length, pending.size)).astype(np.int64)
        ok = (draws >= config.min_length) & (draws <= config.max_length)
        lengths[pending[ok]] = draws[ok]
        pending = pending[~ok]
    uniform = rng.random(n) < config.uniform_mix
    lengths[uniform] = rng.integers(config.min_length, config.max_length + 1, int(uniform.sum()))
    return lengths


def gen_traces(config: SynthConfig, graph: OntologyGraph) -> List[Trace]:
    """Deterministic corpus of config.n_traces traces under config.seed."""
    groups = activities_by_type(graph)
    if len(groups) < 2 or not all(groups):
        raise ConfigurationError("Ontology needs at least two types, each with an activity")

    rng = np.random.default_rng(config.seed)
    matrix = transition_matrix(config, rng)
    if matrix.shape[0] != len(groups):
        raise ConfigurationError(
            f"Ontology has {len(groups)} types, configuration expects {config.n_types}"
        )
    lengths = sample_lengths(config, rng, config.n_traces)

    traces = []
    for index, length in enumerate(lengths):
        visits = np.zeros(len(groups), dtype=np.int64)
        activities = []
        for step in range(int(length)):
            if step == 0:
                current = int(rng.integers(len(groups)))
            else:
                current = int(rng.choice(len(groups), p=matrix[int(visits.argmax())]))
            members = groups[current]
            activities.append(members[int(rng.integers(len(members)))])
            visits[current] += 1
        traces.append(Trace(f"case_{index:05d}", tuple(activities)))

    logger.info("Generated traces", traces=len(traces), events=int(lengths.sum()))
    return traces
