"""
Ontology graph ingestion and spectral node embeddings.

The ontology is an undirected graph of activity nodes and activity-type nodes.
Node embeddings are components of the smallest nontrivial eigenvectors of the
symmetric normalized Laplacian I - D^-1/2 A D^-1/2.
"""

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Set, Tuple, Union

import networkx as nx
import numpy as np
import pandas as pd

from ..utils.errors import ConnectivityError, FormatError, ParameterError
from ..utils.logger import setup_logger
from .event_log import Vocabulary

logger = setup_logger(__name__)

PathLike = Union[str, Path]

# Components whose magnitude is within this distance of the column peak count as ties.
SIGN_TIE_TOLERANCE = 1e-12
ZERO_EIGENVALUE_TOLERANCE = 1e-8


class NodeKind(str, Enum):
    ACTIVITY = "activity"
    TYPE = "type"


@dataclass(frozen=True)
class OntologyNode:
    name: str
    kind: NodeKind


class OntologyGraph:
    """Validated, connected, undirected ontology graph."""

    def __init__(self, nodes: Sequence[OntologyNode], edges: Iterable[Tuple[str, str]]):
        self.nodes: Tuple[OntologyNode, ...] = tuple(nodes)
        self.edges: Tuple[Tuple[str, str], ...] = tuple((str(a), str(b)) for a, b in edges)
        self.graph = self._build()

    def _build(self) -> nx.Graph:
        if not self.nodes:
            raise FormatError("Ontology has no nodes")

        graph = nx.Graph()
        for node in self.nodes:
            if node.name in graph:
                raise FormatError(f"Duplicate ontology node: {node.name!r}")
            graph.add_node(node.name, kind=node.kind)

        for a, b in self.edges:
            for endpoint in (a, b):
                if endpoint not in graph:
                    raise FormatError(f"Edge ({a!r}, {b!r}) references unknown node {endpoint!r}")
            if a == b:
                raise FormatError(f"Self-loop on ontology node {a!r}")
            if graph.has_edge(a, b):
                raise FormatError(f"Duplicate ontology edge ({a!r}, {b!r})")
            graph.add_edge(a, b)

        if len(graph) < 2:
            raise FormatError(f"Ontology needs at least two linked nodes, got {list(graph)}")

        components = list(nx.connected_components(graph))
        if len(components) != 1:
            raise ConnectivityError(components)
        return graph

    @property
    def node_names(self) -> List[str]:
        return [node.name for node in self.nodes]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def kind_of(self, name: str) -> NodeKind:
        return self.graph.nodes[name]["kind"]

    def activity_names(self) -> List[str]:
        return [n.name for n in self.nodes if n.kind is NodeKind.ACTIVITY]

    def to_dict(self) -> Dict[str, list]:
        return {
            "nodes": [{"name": n.name, "kind": n.kind.value} for n in self.nodes],
            "edges": [[a, b] for a, b in self.edges],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "OntologyGraph":
        try:
            raw_nodes = data["nodes"]
            raw_edges = data["edges"]
        except (KeyError, TypeError):
            raise FormatError("Ontology document needs 'nodes' and 'edges'") from None

        nodes = []
        for entry in raw_nodes:
            try:
                nodes.append(OntologyNode(str(entry["name"]), NodeKind(entry["kind"])))
            except (KeyError, TypeError, ValueError):
                raise FormatError(f"Malformed ontology node: {entry!r}") from None

        edges = []
        for entry in raw_edges:
            if not isinstance(entry, (list, tuple)) or len(entry) != 2:
                raise FormatError(f"Malformed ontology edge: {entry!r}")
            edges.append((entry[0], entry[1]))
        return cls(nodes, edges)

    def save(self, path: PathLike) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n",
                              encoding="utf-8")

    def __repr__(self) -> str:
        return f"OntologyGraph(nodes={self.n_nodes}, edges={self.n_edges})"


@dataclass(frozen=True)
class LaplacianFactorization:
    """Normalized Laplacian and its eigendecomposition, eigenvalues ascending."""
    delta: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    node_names: Tuple[str, ...]

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T

    def zero_eigenvalue_count(self, tolerance: float = ZERO_EIGENVALUE_TOLERANCE) -> int:
        return int(np.sum(self.eigenvalues < tolerance))


class NodeEmbeddingTable:
    """Immutable per-node spectral embedding of dimension k."""

    def __init__(self, k: int, vectors: Mapping[str, np.ndarray], kinds: Mapping[str, NodeKind]):
        self.k = k
        self.kinds: Dict[str, NodeKind] = dict(kinds)
        self.vectors: Dict[str, np.ndarray] = {}
        self.warned_missing: Set[str] = set()
        for name, vector in vectors.items():
            array = np.array(vector, dtype=np.float64)
            if array.shape != (k,) or not np.all(np.isfinite(array)):
                raise FormatError(f"Embedding for {name!r} must be {k} finite values")
            array.setflags(write=False)
            self.vectors[name] = array

    @property
    def names(self) -> List[str]:
        return list(self.vectors)

    def __contains__(self, name: object) -> bool:
        return name in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def to_frame(self) -> pd.DataFrame:
        columns = [f"c{i}" for i in range(1, self.k + 1)]
        frame = pd.DataFrame(
            [self.vectors[name] for name in self.names], columns=columns
        )
        frame.insert(0, "kind", [self.kinds[name].value for name in self.names])
        frame.insert(0, "node", self.names)
        return frame

    def to_csv(self, path: PathLike) -> None:
        self.to_frame().to_csv(path, index=False, lineterminator="\n")

    @classmethod
    def from_csv(cls, path: PathLike) -> "NodeEmbeddingTable":
        try:
            frame = pd.read_csv(path, dtype={"node": str, "kind": str},
                                keep_default_na=False, float_precision="round_trip")
        except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
            raise FormatError(f"Embedding table {path} is not a readable CSV: {e}") from e
        components = [c for c in frame.columns if c not in ("node", "kind")]
        if "node" not in frame.columns or "kind" not in frame.columns or not components:
            raise FormatError(f"Embedding table {path} needs node, kind and c1..ck columns")
        values = frame[components].to_numpy(dtype=np.float64)
        vectors = dict(zip(frame["node"], values))
        kinds = {name: NodeKind(kind) for name, kind in zip(frame["node"], frame["kind"])}
        return cls(len(components), vectors, kinds)


def parse_ontology(path: PathLike) -> OntologyGraph:
    """
    Parse an ontology JSON file.

    Args:
        path: JSON file {"nodes": [{"name", "kind"}], "edges": [[a, b]]}

    Returns:
        Validated ontology graph
    """
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise FormatError(f"Ontology {path} is not valid UTF-8 JSON: {e}") from e
    graph = OntologyGraph.from_dict(data)
    logger.info(f"Parsed ontology from {path}", nodes=graph.n_nodes, edges=graph.n_edges)
    return graph


def build_laplacian(graph: OntologyGraph) -> LaplacianFactorization:
    """Normalized Laplacian of the graph and its symmetric eigendecomposition."""
    names = graph.node_names
    adjacency = nx.to_numpy_array(graph.graph, nodelist=names, dtype=np.float64, weight=None)
    degree = adjacency.sum(axis=1)
    if np.any(degree == 0):
        lonely = [n for n, d in zip(names, degree) if d == 0]
        raise FormatError(f"Ontology nodes without edges: {lonely}")
    inv_sqrt_degree = 1.0 / np.sqrt(degree)
    delta = np.eye(len(names)) - inv_sqrt_degree[:, None] * adjacency * inv_sqrt_degree[None, :]
    delta = 0.5 * (delta + delta.T)
    eigenvalues, eigenvectors = np.linalg.eigh(delta)
    return LaplacianFactorization(delta, eigenvalues, eigenvectors, tuple(names))


def canonical_sign(column: np.ndarray) -> np.ndarray:
    """Flip a vector so its largest-magnitude component (first on ties) is positive."""
    magnitudes = np.abs(column)
    peak = int(np.flatnonzero(magnitudes >= magnitudes.max() - SIGN_TIE_TOLERANCE)[0])
    return -column if column[peak] < 0 else column


def node_embeddings(
    factorization: LaplacianFactorization,
    graph: OntologyGraph,
    k: int,
) -> NodeEmbeddingTable:
    """
    Spectral embedding from the k smallest nontrivial eigenvectors.

    Column 0 (eigenvalue 0) is skipped. Dimensions beyond n - 1 are zero-filled.
    """
    if k < 1:
        raise ParameterError(f"Embedding dimension must be at least 1, got {k}")

    n = len(factorization.node_names)
    used = min(k, n - 1)
    matrix = np.zeros((n, k), dtype=np.float64)
    for j in range(used):
        matrix[:, j] = canonical_sign(factorization.eigenvectors[:, j + 1])

    vectors = {name: matrix[i] for i, name in enumerate(factorization.node_names)}
    kinds = {name: graph.kind_of(name) for name in factorization.node_names}
    if used < k:
        logger.debug(f"Zero-filling {k - used} embedding dimensions for a {n}-node graph")
    return NodeEmbeddingTable(k, vectors, kinds)


def embed_ontology(graph: OntologyGraph, k: int) -> NodeEmbeddingTable:
    return node_embeddings(build_laplacian(graph), graph, k)


def embedding_for_token(table: NodeEmbeddingTable, vocab: Vocabulary, token_id: int) -> np.ndarray:
    """Spectral vector of a token's ontology node; zeros for specials and unknown activities."""
    if vocab.is_special(token_id):
        return np.zeros(table.k)
    name = vocab.id_to_name[token_id]
    if name not in table:
        if name not in table.warned_missing:
            table.warned_missing.add(name)
            logger.warning(f"Activity {name!r} is not in the ontology, using a zero embedding")
        return np.zeros(table.k)
    return np.array(table.vectors[name])


def token_embedding_matrix(table: NodeEmbeddingTable, vocab: Vocabulary) -> np.ndarray:
    """Stack embedding_for_token over the whole vocabulary into a [V x k] matrix."""
    return np.stack([embedding_for_token(table, vocab, i) for i in range(vocab.size)])
