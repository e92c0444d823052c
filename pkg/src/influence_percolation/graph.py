"""Simple undirected graphs with block labels.

Graphs are stored in compressed sparse row (CSR) form with sorted neighbour
lists. They come from two places: the stochastic block model generator and
the ingestion of labelled real-world edge lists.
"""

from __future__ import annotations

import json
import logging
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EstimationError, IngestionError, ParameterError

logger = logging.getLogger(__name__)

GRAPH_FORMAT = "influence-percolation-graph"
GRAPH_FORMAT_VERSION = 1


@dataclass(frozen=True)
class BlockModelParams:
    """Parameters of SBM(n, b, p_in, p_out, rho).

    ``rho`` holds the block fractions; block ``i`` gets ``round(n * rho[i])``
    nodes, the largest block absorbing any rounding remainder.
    """

    n: int
    b: int
    p_in: float
    p_out: float
    rho: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rho", tuple(float(r) for r in self.rho))
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be a positive integer, got {self.n!r}")
        if int(self.b) != self.b or self.b < 1:
            raise ParameterError(f"b must be a positive integer, got {self.b!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "b", int(self.b))
        for name in ("p_in", "p_out"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1], got {p!r}")
        if len(self.rho) != self.b:
            raise ParameterError(f"rho has {len(self.rho)} entries but b = {self.b}")
        if any(r < 0 for r in self.rho):
            raise ParameterError(f"rho entries must be nonnegative, got {self.rho}")
        if abs(sum(self.rho) - 1.0) > 1e-12:
            raise ParameterError(f"rho must sum to 1 (within 1e-12), got {sum(self.rho)!r}")
        self.block_sizes()

    def block_sizes(self) -> np.ndarray:
        sizes = np.floor(self.n * np.asarray(self.rho) + 0.5).astype(np.int64)
        remainder = self.n - int(sizes.sum())
        if remainder:
            largest = int(np.argmax(sizes))
            sizes[largest] += remainder
            if sizes[largest] < 0:
                raise ParameterError("rounded block sizes cannot be made to sum to n")
        return sizes


@dataclass(frozen=True)
class IngestStats:
    """Bookkeeping from :func:`load_partitioned_edge_list`."""

    raw_nodes: int
    raw_edge_records: int
    self_loops: int
    duplicate_edges: int
    simple_edges: int
    pruned_nodes: int
    pruned_edges: int
    pruning_rounds: int
    block_labels: tuple[str, ...]


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable simple undirected graph with one block label per node.

    Nodes are ``0..n-1`` and blocks ``0..n_blocks-1``. ``indices[indptr[u]:indptr[u+1]]``
    is the ascending neighbour list of ``u``.
    """

    indptr: np.ndarray
    indices: np.ndarray
    block_of: np.ndarray
    n_blocks: int
    node_ids: tuple[str, ...] | None = None
    ingest_stats: IngestStats | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        indptr = np.ascontiguousarray(self.indptr, dtype=np.int64)
        indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        block_of = np.ascontiguousarray(self.block_of, dtype=np.int64)
        n = len(indptr) - 1
        if n < 0 or indptr[0] != 0 or indptr[-1] != len(indices):
            raise ParameterError("malformed CSR offsets")
        if len(block_of) != n:
            raise ParameterError("block_of must have one entry per node")
        if n and (block_of.min() < 0 or block_of.max() >= self.n_blocks):
            raise ParameterError("block labels out of range")
        if self.node_ids is not None and len(self.node_ids) != n:
            raise ParameterError("node_ids must have one entry per node")
        degree = np.diff(indptr)
        if np.any(degree < 0):
            raise ParameterError("CSR offsets must be nondecreasing")
        rows = np.repeat(np.arange(n, dtype=np.int64), degree)
        if len(indices):
            if indices.min() < 0 or indices.max() >= n:
                raise ParameterError("neighbour id out of range")
            if np.any(rows == indices):
                raise ParameterError("self-loops are not allowed")
            # strictly increasing within each row: no duplicates and sorted
            same_row = rows[1:] == rows[:-1]
            if np.any(indices[1:][same_row] <= indices[:-1][same_row]):
                raise ParameterError("neighbour lists must be sorted without duplicates")
            fwd = rows * n + indices
            rev = np.sort(indices * n + rows)
            if not np.array_equal(fwd, rev):
                raise ParameterError("adjacency is not symmetric")
        for name, arr in (("indptr", indptr), ("indices", indices), ("block_of", block_of)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        degree.setflags(write=False)
        object.__setattr__(self, "_degree", degree)
        object.__setattr__(self, "n_blocks", int(self.n_blocks))

    @classmethod
    def from_edges(
        cls,
        n: int,
        edges: np.ndarray | Iterable[tuple[int, int]],
        block_of: np.ndarray | Iterable[int],
        n_blocks: int | None = None,
        node_ids: tuple[str, ...] | None = None,
        ingest_stats: IngestStats | None = None,
    ) -> Graph:
        """Build a graph from undirected edges; duplicates and self-loops are rejected."""
        e = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
        e = e.reshape(-1, 2)
        block_of = np.asarray(list(block_of) if not isinstance(block_of, np.ndarray) else block_of)
        if n_blocks is None:
            n_blocks = int(block_of.max()) + 1 if len(block_of) else 0
        src = np.concatenate([e[:, 0], e[:, 1]])
        dst = np.concatenate([e[:, 1], e[:, 0]])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        return cls(indptr, dst, block_of, n_blocks, node_ids, ingest_stats)

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    @property
    def degree(self) -> np.ndarray:
        return self._degree

    @property
    def m(self) -> int:
        return len(self.indices) // 2

    @property
    def block_sizes(self) -> np.ndarray:
        return np.bincount(self.block_of, minlength=self.n_blocks)

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u] : self.indptr[u + 1]]

    def has_edge(self, u: int, w: int) -> bool:
        nbrs = self.neighbors(u)
        i = np.searchsorted(nbrs, w)
        return bool(i < len(nbrs) and nbrs[i] == w)

    def edges(self) -> np.ndarray:
        """Edges as an ``(m, 2)`` array with ``u < w``, sorted."""
        rows = np.repeat(np.arange(self.n, dtype=np.int64), self.degree)
        keep = rows < self.indices
        return np.column_stack([rows[keep], self.indices[keep]])

    def nodes_in_block(self, block: int) -> np.ndarray:
        return np.flatnonzero(self.block_of == block)

    def dense_adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        e = self.edges()
        a[e[:, 0], e[:, 1]] = 1.0
        a[e[:, 1], e[:, 0]] = 1.0
        return a

    def relabel(self, perm: np.ndarray) -> Graph:
        """Graph with node ``u`` renamed to ``perm[u]``."""
        perm = np.asarray(perm, dtype=np.int64)
        e = perm[self.edges()]
        block_of = np.empty_like(self.block_of)
        block_of[perm] = self.block_of
        return Graph.from_edges(self.n, e, block_of, self.n_blocks)

    def to_dict(self) -> dict:
        return {
            "format": GRAPH_FORMAT,
            "version": GRAPH_FORMAT_VERSION,
            "n": self.n,
            "n_blocks": self.n_blocks,
            "blocks": self.block_of.tolist(),
            "offsets": self.indptr.tolist(),
            "neighbors": self.indices.tolist(),
            "node_ids": list(self.node_ids) if self.node_ids is not None else None,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> Graph:
        if data.get("format") != GRAPH_FORMAT:
            raise ParameterError(f"not a graph file (format={data.get('format')!r})")
        if data.get("version") != GRAPH_FORMAT_VERSION:
            raise ParameterError(f"unsupported graph file version {data.get('version')!r}")
        node_ids = data.get("node_ids")
        g = cls(
            np.asarray(data["offsets"], dtype=np.int64),
            np.asarray(data["neighbors"], dtype=np.int64),
            np.asarray(data["blocks"], dtype=np.int64),
            data["n_blocks"],
            tuple(node_ids) if node_ids is not None else None,
        )
        if g.n != data["n"]:
            raise ParameterError("graph file node count does not match its offsets")
        return g

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), separators=(",", ":")) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> Graph:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def generate_sbm(params: BlockModelParams, seed=None) -> Graph:
    """Sample SBM(n, b, p_in, p_out, rho) with contiguous block assignment.

    Every unordered pair is an independent Bernoulli trial, so the cost is
    O(n^2). ``seed`` is anything :func:`numpy.random.default_rng` accepts.
    """
    rng = np.random.default_rng(seed)
    sizes = params.block_sizes()
    block_of = np.repeat(np.arange(params.b, dtype=np.int64), sizes)
    n = params.n
    src: list[np.ndarray] = []
    dst: list[np.ndarray] = []
    for u in range(n - 1):
        later = block_of[u + 1 :]
        prob = np.where(later == block_of[u], params.p_in, params.p_out)
        hits = np.flatnonzero(rng.random(n - u - 1) < prob) + (u + 1)
        src.append(np.full(len(hits), u, dtype=np.int64))
        dst.append(hits)
    if src:
        edges = np.column_stack([np.concatenate(src), np.concatenate(dst)])
    else:
        edges = np.empty((0, 2), dtype=np.int64)
    return Graph.from_edges(n, edges, block_of, params.b)


def _natural_key(token: str):
    t = token.strip()
    body = t[1:] if t.startswith("-") else t
    if body.isdigit():
        return (0, int(t), "")
    return (1, 0, t)


def load_partitioned_edge_list(
    edges: Iterable[tuple],
    labels: Mapping,
    min_degree: int = 2,
    iterative: bool = True,
) -> Graph:
    """Turn a raw labelled edge list into a simple :class:`Graph`.

    Self-loops are dropped and parallel (or reversed) edges collapsed. Nodes
    whose degree is below ``min_degree`` are then removed, repeatedly until
    none is left when ``iterative`` is true, or in a single sweep otherwise.
    Surviving nodes are renumbered ``0..n-1`` in natural order of their
    original ids, which are kept in ``Graph.node_ids``; blocks are numbered in
    natural order of their labels.
    """
    labels = {str(k): str(v) for k, v in labels.items()}
    raw_records = 0
    self_loops = 0
    pairs: set[tuple[str, str]] = set()
    seen: set[str] = set()
    for rec in edges:
        a, b = str(rec[0]), str(rec[1])
        raw_records += 1
        seen.add(a)
        seen.add(b)
        if a == b:
            self_loops += 1
            continue
        pairs.add((a, b) if _natural_key(a) <= _natural_key(b) else (b, a))
    if raw_records == 0:
        raise IngestionError("edge list is empty")
    missing = sorted(seen - labels.keys(), key=_natural_key)
    if missing:
        shown = ", ".join(missing[:20]) + (" ..." if len(missing) > 20 else "")
        raise IngestionError(f"{len(missing)} node(s) have no block label: {shown}")

    adj: dict[str, set[str]] = {v: set() for v in labels}
    for a, b in pairs:
        adj[a].add(b)
        adj[b].add(a)
    raw_nodes = len(adj)
    simple_edges = len(pairs)

    rounds = 0
    if min_degree > 0:
        while True:
            doomed = [v for v, nb in adj.items() if len(nb) < min_degree]
            if not doomed:
                break
            rounds += 1
            for v in doomed:
                for w in adj.pop(v):
                    if w in adj:
                        adj[w].discard(v)
            if not iterative:
                break
    if not adj:
        raise IngestionError(
            f"no nodes left after removing nodes of degree < {min_degree} "
            f"({raw_nodes} nodes, {simple_edges} edges before pruning)"
        )

    order = sorted(adj, key=_natural_key)
    index = {v: i for i, v in enumerate(order)}
    block_labels = sorted({labels[v] for v in order}, key=_natural_key)
    block_index = {lab: i for i, lab in enumerate(block_labels)}
    block_of = np.array([block_index[labels[v]] for v in order], dtype=np.int64)
    kept = [(index[a], index[b]) for a, nb in adj.items() for b in nb if index[a] < index[b]]
    edge_arr = np.array(sorted(kept), dtype=np.int64).reshape(-1, 2)
    stats = IngestStats(
        raw_nodes=raw_nodes,
        raw_edge_records=raw_records,
        self_loops=self_loops,
        duplicate_edges=raw_records - self_loops - simple_edges,
        simple_edges=simple_edges,
        pruned_nodes=raw_nodes - len(order),
        pruned_edges=simple_edges - len(edge_arr),
        pruning_rounds=rounds,
        block_labels=tuple(block_labels),
    )
    logger.info(
        "ingested %d nodes / %d edges (dropped %d self-loops, %d duplicates; pruned %d nodes, %d edges in %d rounds)",
        len(order), len(edge_arr), self_loops, stats.duplicate_edges,
        stats.pruned_nodes, stats.pruned_edges, rounds,
    )
    return Graph.from_edges(len(order), edge_arr, block_of, len(block_labels), tuple(order), stats)


def _data_lines(path: str | Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if line:
                yield lineno, line.split()


def read_edge_list(path: str | Path) -> list[tuple[str, str]]:
    """One whitespace-separated node pair per line; ``#`` starts a comment."""
    out = []
    for lineno, tok in _data_lines(path):
        if len(tok) < 2:
            raise IngestionError(f"{path}:{lineno}: expected two node ids")
        out.append((tok[0], tok[1]))
    return out


def read_labels(path: str | Path) -> dict[str, str]:
    """``node block`` lines; a node may appear only once."""
    out: dict[str, str] = {}
    for lineno, tok in _data_lines(path):
        if len(tok) < 2:
            raise IngestionError(f"{path}:{lineno}: expected 'node block'")
        if tok[0] in out and out[tok[0]] != tok[1]:
            raise IngestionError(f"{path}:{lineno}: node {tok[0]} labelled twice")
        out[tok[0]] = tok[1]
    return out


def write_edge_list(g: Graph, path: str | Path) -> None:
    ids = g.node_ids if g.node_ids is not None else [str(u) for u in range(g.n)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for u, w in g.edges():
            fh.write(f"{ids[u]} {ids[w]}\n")


def write_labels(g: Graph, path: str | Path) -> None:
    ids = g.node_ids if g.node_ids is not None else [str(u) for u in range(g.n)]
    names = g.ingest_stats.block_labels if g.ingest_stats is not None else None
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for u in range(g.n):
            blk = int(g.block_of[u])
            fh.write(f"{ids[u]} {names[blk] if names else blk}\n")


_GML_TOKEN = re.compile(r'"[^"]*"|\[|\]|[^\s\[\]"]+')


def read_gml_partition(path: str | Path, label_attr: str = "value") -> tuple[list[tuple[str, str]], dict[str, str]]:
    """Edges and node labels from a GML file such as the Political Blogs network.

    Only the ``node``/``edge`` records of the top-level graph are read. Edge
    direction and multiplicity are kept, so the result can be passed straight
    to :func:`load_partitioned_edge_list`.
    """
    tokens = _GML_TOKEN.findall(Path(path).read_text(encoding="utf-8", errors="replace"))
    pos = 0

    def parse_list() -> list[tuple[str, object]]:
        nonlocal pos
        items: list[tuple[str, object]] = []
        while pos < len(tokens) and tokens[pos] != "]":
            key = tokens[pos]
            pos += 1
            if pos >= len(tokens):
                raise IngestionError(f"{path}: truncated GML after key {key!r}")
            if tokens[pos] == "[":
                pos += 1
                value: object = parse_list()
                if pos >= len(tokens):
                    raise IngestionError(f"{path}: unbalanced brackets")
                pos += 1
            else:
                value = tokens[pos].strip('"')
                pos += 1
            items.append((key, value))
        return items

    top = parse_list()
    graphs = [v for k, v in top if k == "graph"]
    if not graphs:
        raise IngestionError(f"{path}: no graph record")
    edges: list[tuple[str, str]] = []
    labels: dict[str, str] = {}
    for key, rec in graphs[0]:
        if key == "node":
            attrs = dict(rec)
            if label_attr not in attrs:
                raise IngestionError(f"{path}: node {attrs.get('id')} lacks attribute {label_attr!r}")
            labels[str(attrs["id"])] = str(attrs[label_attr])
        elif key == "edge":
            attrs = dict(rec)
            edges.append((str(attrs["source"]), str(attrs["target"])))
    return edges, labels


@dataclass(frozen=True)
class BlockProbEstimate:
    p_in_hat: float
    p_out_hat: float
    rho_hat: tuple[float, ...]
    method: str = "pair"

    def to_dict(self) -> dict:
        return {"p_in": self.p_in_hat, "p_out": self.p_out_hat, "rho": list(self.rho_hat), "method": self.method}


def estimate_block_probs(g: Graph, method: str = "pair") -> BlockProbEstimate:
    """Fit intra/inter-block edge probabilities to a labelled graph.

    ``method="pair"`` divides edge counts by the number of candidate node
    pairs (intra: sum of C(|B_i|, 2); inter: sum over i<j of |B_i||B_j|).
    ``method="edge_fraction"`` returns the fractions of edges that are intra-
    and inter-block, which always sum to one.
    """
    if g.n < 2:
        raise EstimationError("need at least two nodes")
    sizes = g.block_sizes.astype(float)
    e = g.edges()
    intra = int(np.count_nonzero(g.block_of[e[:, 0]] == g.block_of[e[:, 1]]))
    inter = len(e) - intra
    rho_hat = tuple((sizes / g.n).tolist())
    if method == "edge_fraction":
        if len(e) == 0:
            raise EstimationError("graph has no edges")
        return BlockProbEstimate(intra / len(e), inter / len(e), rho_hat, method)
    if method != "pair":
        raise ParameterError(f"unknown estimator {method!r}")
    intra_pairs = float(np.sum(sizes * (sizes - 1) / 2))
    if intra_pairs == 0:
        raise EstimationError("every block has fewer than two nodes; p_in is undefined")
    inter_pairs = (sizes.sum() ** 2 - np.sum(sizes**2)) / 2
    p_out_hat = inter / inter_pairs if inter_pairs > 0 else 0.0
    return BlockProbEstimate(intra / intra_pairs, float(p_out_hat), rho_hat, method)
