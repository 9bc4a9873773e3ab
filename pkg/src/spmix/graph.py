"""Areal proximity graphs and the Leroux-type CAR precision built on them.

For a binary symmetric adjacency ``G`` with degrees ``d_i`` and a spatial
parameter ``rho``, the CAR precision is ``F - rho * G`` with
``F = diag(rho * d_i + 1 - rho)``. Its inverse (the marginal scale matrix)
is block diagonal over connected components, which every routine here
exploits: factorizations are done one component at a time.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _cc

from .errors import DataError, DomainError, NumericalError

MAX_DENSE_AREAS = 1024


@dataclass(frozen=True)
class ComponentPartition:
    """Connected components as 0-based labels, numbered by first appearance."""

    labels: np.ndarray
    n_components: int

    def members(self, m):
        return np.flatnonzero(self.labels == m)

    def blocks(self):
        return [self.members(m) for m in range(self.n_components)]


@dataclass(frozen=True, eq=False)
class ProximityGraph:
    """Symmetric binary adjacency over ``n_areas`` areal units."""

    adjacency: np.ndarray = field(repr=False)

    def __post_init__(self):
        A = np.array(self.adjacency, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise DataError("adjacency must be a non-empty square matrix")
        if A.shape[0] > MAX_DENSE_AREAS:
            raise DataError(f"dense adjacency limited to {MAX_DENSE_AREAS} areas")
        if not np.all((A == 0) | (A == 1)):
            raise DataError("adjacency entries must be 0 or 1")
        if not np.array_equal(A, A.T):
            raise DataError("adjacency must be symmetric")
        if np.any(np.diag(A) != 0):
            raise DataError("adjacency must have a zero diagonal")
        A.setflags(write=False)
        object.__setattr__(self, "adjacency", A)

    @classmethod
    def from_edge_list(cls, n_areas, edges):
        """Build a graph from 0-based ``(i, j)`` pairs; duplicates collapse."""
        if n_areas < 1:
            raise DataError("need at least one area")
        A = np.zeros((n_areas, n_areas))
        for i, j in edges:
            i, j = int(i), int(j)
            if not (0 <= i < n_areas and 0 <= j < n_areas):
                raise DataError(f"edge ({i}, {j}) out of range for {n_areas} areas")
            if i == j:
                raise DataError(f"self-loop at area {i}")
            A[i, j] = A[j, i] = 1.0
        return cls(A)

    @classmethod
    def empty(cls, n_areas):
        return cls(np.zeros((n_areas, n_areas)))

    @classmethod
    def rook_grid(cls, side):
        """Square ``side x side`` lattice; cells sharing an edge are neighbours.

        Areas are numbered row-major from the bottom-left cell.
        """
        edges = []
        for r in range(side):
            for c in range(side):
                k = r * side + c
                if c + 1 < side:
                    edges.append((k, k + 1))
                if r + 1 < side:
                    edges.append((k, k + side))
        return cls.from_edge_list(side * side, edges)

    @property
    def n_areas(self):
        return self.adjacency.shape[0]

    @cached_property
    def degrees(self):
        return self.adjacency.sum(axis=1)

    def neighbors(self, i):
        return np.flatnonzero(self.adjacency[i])

    def edges(self):
        i, j = np.nonzero(np.triu(self.adjacency))
        return list(zip(i.tolist(), j.tolist()))

    @cached_property
    def components(self):
        return connected_components(self)

    @cached_property
    def csr(self):
        """``(indptr, indices)`` neighbour lists for compiled kernels."""
        m = csr_matrix(self.adjacency)
        return m.indptr.astype(np.int64), m.indices.astype(np.int64)

    def __eq__(self, other):
        return isinstance(other, ProximityGraph) and np.array_equal(
            self.adjacency, other.adjacency
        )

    def __hash__(self):
        return hash(self.adjacency.tobytes())


def connected_components(graph):
    n, raw = _cc(csr_matrix(graph.adjacency), directed=False)
    # relabel by order of first appearance
    order = {}
    labels = np.empty_like(raw)
    for i, r in enumerate(raw):
        labels[i] = order.setdefault(r, len(order))
    return ComponentPartition(labels=labels.astype(np.int64), n_components=int(n))


def _check_rho(rho):
    if not (0.0 < rho < 1.0):
        raise DomainError(f"rho must lie in (0, 1), got {rho!r}")


def car_precision(graph, rho):
    """``F - rho G`` without range checks; valid for any ``rho`` in [0, 1)."""
    A = graph.adjacency
    return np.diag(rho * graph.degrees + 1.0 - rho) - rho * A


def precision_matrix(graph, rho):
    """CAR precision ``F - rho G`` for ``rho`` in (0, 1)."""
    _check_rho(rho)
    return car_precision(graph, rho)


def block_cholesky(graph, rho):
    """Lower Cholesky factor of each component block of ``F - rho G``.

    Returns a list of ``(indices, L)`` pairs.
    """
    P = car_precision(graph, rho)
    out = []
    for idx in graph.components.blocks():
        try:
            L = np.linalg.cholesky(P[np.ix_(idx, idx)])
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"CAR precision not positive definite at rho={rho}") from exc
        out.append((idx, L))
    return out


def car_logdet(graph, rho):
    """``log |F - rho G|`` summed over components."""
    return sum(2.0 * np.log(np.diag(L)).sum() for _, L in block_cholesky(graph, rho))


def marginal_scale_matrix(graph, rho, check=True):
    """``A = (F - rho G)^{-1}``, inverted block-wise so cross-component entries are exactly 0."""
    if check:
        _check_rho(rho)
    n = graph.n_areas
    out = np.zeros((n, n))
    for idx, L in block_cholesky(graph, rho):
        out[np.ix_(idx, idx)] = sla.cho_solve((L, True), np.eye(len(idx)))
    return out


def read_adjacency(path):
    """Read the plain-text adjacency format: ``I`` on the first line, then ``i j`` pairs."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.split("#", 1)[0].strip() for ln in fh]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise DataError(f"{path}: empty adjacency file")
    try:
        n = int(lines[0])
        edges = [tuple(int(t) for t in ln.split()) for ln in lines[1:]]
    except ValueError as exc:
        raise DataError(f"{path}: malformed adjacency file") from exc
    if any(len(e) != 2 for e in edges):
        raise DataError(f"{path}: each edge line needs exactly two indices")
    return ProximityGraph.from_edge_list(n, edges)


def write_adjacency(graph, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{graph.n_areas}\n")
        for i, j in graph.edges():
            fh.write(f"{i} {j}\n")
