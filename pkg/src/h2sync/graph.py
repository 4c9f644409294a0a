"""Connected simple undirected weighted graphs and their Laplacian data."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidGraph, NonSymmetric
from .matkernel import max_abs, sym_eig

__all__ = [
    "WeightedGraph",
    "IncidenceForm",
    "LaplacianSpectrum",
    "laplacian",
    "incidence",
    "spectrum",
    "is_connected",
    "spectrally_connected",
    "graph_from_dict",
    "load_graph",
]

ZERO_EIG_TOL = 1e-9


@dataclass(frozen=True)
class WeightedGraph:
    """Simple undirected graph on nodes ``1..node_count``.

    ``edges`` holds ``(i, j, w)`` triples with 1-based endpoints. Their order
    fixes the column order of the incidence matrix.
    """

    node_count: int
    edges: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        if isinstance(self.node_count, bool) or not isinstance(self.node_count, (int, np.integer)):
            raise InvalidGraph("node count must be an integer")
        if self.node_count < 1:
            raise InvalidGraph("node count must be positive")
        seen = set()
        clean = []
        for k, edge in enumerate(self.edges, start=1):
            try:
                i, j, w = edge
            except (TypeError, ValueError):
                raise InvalidGraph(f"edge {k}: expected (i, j, w), got {edge!r}") from None
            for end in (i, j):
                if isinstance(end, bool) or not isinstance(end, (int, np.integer)):
                    raise InvalidGraph(f"edge {k}: node index {end!r} is not an integer")
                if not 1 <= end <= self.node_count:
                    raise InvalidGraph(f"edge {k}: node {end} outside 1..{self.node_count}")
            if i == j:
                raise InvalidGraph(f"edge {k}: self-loop at node {i}")
            w = float(w)
            if not math.isfinite(w) or w <= 0.0:
                raise InvalidGraph(f"edge {k}: weight must be finite and positive, got {w}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise InvalidGraph(f"edge {k}: duplicate edge {{{key[0]}, {key[1]}}}")
            seen.add(key)
            clean.append((int(i), int(j), w))
        object.__setattr__(self, "node_count", int(self.node_count))
        object.__setattr__(self, "edges", tuple(clean))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.node_count, self.node_count))
        for i, j, w in self.edges:
            adj[i - 1, j - 1] = adj[j - 1, i - 1] = w
        return adj


@dataclass(frozen=True)
class IncidenceForm:
    R: np.ndarray
    W: np.ndarray

    def sqrt_weights(self) -> np.ndarray:
        return np.diag(np.sqrt(np.diag(self.W)))


@dataclass(frozen=True)
class LaplacianSpectrum:
    eigenvalues: np.ndarray
    U: np.ndarray

    @property
    def lambda2(self) -> float:
        return float(self.eigenvalues[1]) if len(self.eigenvalues) > 1 else 0.0

    @property
    def lambdaN(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def nonzero(self) -> np.ndarray:
        """Eigenvalues of modes 2..N."""
        return self.eigenvalues[1:]


def laplacian(g: WeightedGraph) -> np.ndarray:
    # degrees accumulate in edge order, the same order R W R^T sums them
    L = np.zeros((g.node_count, g.node_count))
    for i, j, w in g.edges:
        L[i - 1, i - 1] += w
        L[j - 1, j - 1] += w
        L[i - 1, j - 1] -= w
        L[j - 1, i - 1] -= w
    return L


def incidence(g: WeightedGraph) -> IncidenceForm:
    """Signed incidence matrix and edge-weight matrix with ``L = R W R^T``.

    For edge ``k = {i, j}`` the larger endpoint gets +1, the smaller -1.
    """
    R = np.zeros((g.node_count, g.edge_count))
    for k, (i, j, _) in enumerate(g.edges):
        R[max(i, j) - 1, k] = 1.0
        R[min(i, j) - 1, k] = -1.0
    W = np.diag([w for _, _, w in g.edges]) if g.edges else np.zeros((0, 0))
    return IncidenceForm(R, W)


def spectrum(L) -> LaplacianSpectrum:
    """Ascending eigenvalues and orthonormal eigenvectors of a Laplacian.

    Round-off negatives above ``-1e-9 * max(1, lambda_N)`` are clamped to 0.
    """
    L = np.asarray(L, dtype=float)
    if max_abs(L - L.T) > 1e-12:
        raise NonSymmetric("Laplacian is not symmetric")
    w, U = sym_eig(L)
    floor = -ZERO_EIG_TOL * max(1.0, float(w[-1]))
    w = np.where((w < 0.0) & (w > floor), 0.0, w)
    return LaplacianSpectrum(w, U)


def is_connected(g: WeightedGraph) -> bool:
    """Combinatorial connectivity test (union-find over the edge list)."""
    parent = list(range(g.node_count))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    components = g.node_count
    for i, j, _ in g.edges:
        ri, rj = find(i - 1), find(j - 1)
        if ri != rj:
            parent[ri] = rj
            components -= 1
    return components == 1


def spectrally_connected(spec: LaplacianSpectrum) -> bool:
    """Connectivity read off the spectrum: zero is a simple eigenvalue."""
    if len(spec.eigenvalues) == 1:
        return True
    return spec.lambda2 > ZERO_EIG_TOL * max(1.0, spec.lambdaN)


def graph_from_dict(doc) -> WeightedGraph:
    """Build a graph from ``{"nodes": N, "edges": [[i, j, w], ...]}``."""
    if not isinstance(doc, dict):
        raise InvalidGraph("graph document must be a JSON object")
    if "nodes" not in doc:
        raise InvalidGraph("graph: missing field 'nodes'")
    nodes = doc["nodes"]
    edges = doc.get("edges", [])
    if not isinstance(edges, list):
        raise InvalidGraph("graph.edges must be an array")
    parsed = []
    for k, e in enumerate(edges, start=1):
        if not isinstance(e, (list, tuple)) or len(e) != 3:
            raise InvalidGraph(f"graph.edges[{k}]: expected [i, j, w]")
        i, j, w = e
        if isinstance(w, bool) or not isinstance(w, (int, float)):
            raise InvalidGraph(f"graph.edges[{k}]: weight must be a number")
        parsed.append((i, j, w))
    return WeightedGraph(nodes, tuple(parsed))


def load_graph(path) -> WeightedGraph:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidGraph(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise InvalidGraph(f"{path}: {exc.strerror}") from exc
    return graph_from_dict(doc)
