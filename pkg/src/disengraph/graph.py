"""Graph data model, dataset directory IO, and neighbor sampling.

Dataset directory layout (UTF-8 text):

    edges.tsv     one undirected edge per line: ``u<TAB>v[<TAB>w]``, w in (0,1]
    features.csv  n rows of comma-separated reals, line index = node id
    labels.tsv    ``u<TAB>label`` or ``u<TAB>l1,l2,...`` (multi-label)
    splits.tsv    ``u<TAB>{train|val|test}``

The adjacency is stored symmetric with no self-loop entries; a frozen copy of
the loaded structure is kept next to the mutable one that refinement edits.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class DataError(Exception):
    """Raised on malformed or inconsistent dataset files."""


class Adjacency:
    """Symmetric weighted adjacency; weights in (0,1], no self loops."""

    __slots__ = ("n", "_rows", "_nbr_ids", "_nbr_w")

    def __init__(self, n):
        self.n = n
        self._rows = [dict() for _ in range(n)]
        self._nbr_ids = None
        self._nbr_w = None

    def set_pair(self, u, v, w):
        if u == v:
            raise ValueError("self loops are not stored")
        w = float(w)
        self._rows[u][v] = w
        self._rows[v][u] = w
        self._nbr_ids = None

    def remove_pair(self, u, v):
        self._rows[u].pop(v, None)
        self._rows[v].pop(u, None)
        self._nbr_ids = None

    def weight(self, u, v):
        return self._rows[u].get(v, 0.0)

    def row(self, u):
        return self._rows[u]

    def _build_cache(self):
        ids, ws = [], []
        for row in self._rows:
            order = sorted(row)
            ids.append(np.asarray(order, dtype=np.int64))
            ws.append(np.asarray([row[v] for v in order], dtype=np.float64))
        self._nbr_ids, self._nbr_w = ids, ws

    def neighbors(self, u):
        """(ids, weights) arrays for node u, sorted by id."""
        if self._nbr_ids is None:
            self._build_cache()
        return self._nbr_ids[u], self._nbr_w[u]

    def degrees(self):
        return np.asarray([sum(row.values()) for row in self._rows], dtype=np.float64)

    def edge_count(self):
        return sum(len(row) for row in self._rows) // 2

    def pairs(self):
        """Iterate undirected edges once as (u, v, w) with u < v."""
        for u, row in enumerate(self._rows):
            for v in sorted(row):
                if u < v:
                    yield u, v, row[v]

    def copy(self):
        out = Adjacency(self.n)
        out._rows = [dict(row) for row in self._rows]
        return out

    def to_csr(self):
        rows, cols, vals = [], [], []
        for u, row in enumerate(self._rows):
            for v, w in row.items():
                rows.append(u)
                cols.append(v)
                vals.append(w)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def equal(self, other, tol=0.0):
        if self.n != other.n:
            return False
        for u in range(self.n):
            a, b = self._rows[u], other._rows[u]
            if set(a) != set(b):
                return False
            for v, w in a.items():
                if abs(w - b[v]) > tol:
                    return False
        return True


@dataclass
class Graph:
    """Node features, labels, splits, and the initial/current adjacency."""

    features: np.ndarray
    adj0: Adjacency
    adj: Adjacency
    labels: np.ndarray | None = None
    label_matrix: np.ndarray | None = None
    multi_label: bool = False
    classes: list = field(default_factory=list)
    splits: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def num_features(self):
        return self.features.shape[1]

    @property
    def num_classes(self):
        return len(self.classes)

    def reset_adjacency(self):
        self.adj = self.adj0.copy()


@dataclass
class NeighborBatch:
    """Fixed-size sample of true neighbors of a target node."""

    target: int
    ids: np.ndarray


def _parse_edges(path, n):
    adj = Adjacency(n)
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in (2, 3):
                raise DataError(f"{path}:{lineno}: expected 'u<TAB>v[<TAB>w]'")
            try:
                u, v = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if not (0 <= u < n and 0 <= v < n):
                raise DataError(f"{path}:{lineno}: node id out of range (n={n})")
            if u == v:
                continue  # self loops are handled at aggregation time, never stored
            key = (min(u, v), max(u, v))
            if key in seen:
                raise DataError(f"{path}:{lineno}: duplicate edge {key}")
            seen.add(key)
            if not (0.0 < w <= 1.0):
                raise DataError(f"{path}:{lineno}: edge weight must be in (0, 1]")
            adj.set_pair(u, v, w)
    return adj


def _parse_labels(path, n):
    raw = {}
    multi = False
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'u<TAB>label'")
            u = int(parts[0])
            if not 0 <= u < n:
                raise DataError(f"{path}:{lineno}: node id out of range")
            if u in raw:
                raise DataError(f"{path}:{lineno}: duplicate label line for node {u}")
            tokens = parts[1].split(",")
            if len(tokens) > 1:
                multi = True
            raw[u] = tokens
    classes = sorted({tok for toks in raw.values() for tok in toks})
    index = {c: i for i, c in enumerate(classes)}
    if multi:
        mat = np.zeros((n, len(classes)), dtype=np.float64)
        for u, toks in raw.items():
            for tok in toks:
                mat[u, index[tok]] = 1.0
        return None, mat, True, classes
    labels = np.full(n, -1, dtype=np.int64)
    for u, toks in raw.items():
        labels[u] = index[toks[0]]
    return labels, None, False, classes


def _parse_splits(path, n):
    splits = {"train": [], "val": [], "test": []}
    assigned = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[1] not in splits:
                raise DataError(f"{path}:{lineno}: expected 'u<TAB>{{train|val|test}}'")
            u = int(parts[0])
            if not 0 <= u < n:
                raise DataError(f"{path}:{lineno}: node id out of range")
            if u in assigned:
                raise DataError(f"{path}:{lineno}: node {u} assigned to overlapping splits")
            assigned[u] = parts[1]
            splits[parts[1]].append(u)
    return {k: np.asarray(sorted(v), dtype=np.int64) for k, v in splits.items()}


def load_dataset(path, adj_as_features=False):
    """Load a dataset directory into a Graph."""
    feat_path = os.path.join(path, "features.csv")
    edge_path = os.path.join(path, "edges.tsv")
    label_path = os.path.join(path, "labels.tsv")
    split_path = os.path.join(path, "splits.tsv")
    for p in (edge_path, label_path, split_path):
        if not os.path.exists(p):
            raise DataError(f"missing dataset file: {p}")

    if os.path.exists(feat_path):
        try:
            features = np.loadtxt(feat_path, delimiter=",", dtype=np.float64, ndmin=2)
        except ValueError as exc:
            raise DataError(f"{feat_path}: non-rectangular or non-numeric features: {exc}") from exc
        n = features.shape[0]
    elif adj_as_features:
        n = _max_node_id(edge_path, label_path, split_path) + 1
        features = None
    else:
        raise DataError(f"missing dataset file: {feat_path}")

    adj0 = _parse_edges(edge_path, n)
    labels, label_matrix, multi, classes = _parse_labels(label_path, n)
    splits = _parse_splits(split_path, n)

    if adj_as_features:
        features = adj0.to_csr().toarray().astype(np.float64)

    return Graph(
        features=features,
        adj0=adj0,
        adj=adj0.copy(),
        labels=labels,
        label_matrix=label_matrix,
        multi_label=multi,
        classes=classes,
        splits=splits,
    )


def _max_node_id(*paths):
    top = -1
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                for tok in line.split("\t"):
                    try:
                        top = max(top, int(tok))
                    except ValueError:
                        break
    if top < 0:
        raise DataError("cannot infer node count: no node ids found")
    return top


def save_dataset(g: Graph, path):
    """Write a Graph back to the dataset directory format (round-trips)."""
    os.makedirs(path, exist_ok=True)
    save_edges(g.adj, os.path.join(path, "edges.tsv"))
    with open(os.path.join(path, "features.csv"), "w", encoding="utf-8") as fh:
        for row in g.features:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    with open(os.path.join(path, "labels.tsv"), "w", encoding="utf-8") as fh:
        if g.multi_label:
            for u in range(g.n):
                toks = [g.classes[c] for c in np.flatnonzero(g.label_matrix[u])]
                if toks:
                    fh.write(f"{u}\t{','.join(toks)}\n")
        else:
            for u in range(g.n):
                if g.labels[u] >= 0:
                    fh.write(f"{u}\t{g.classes[g.labels[u]]}\n")
    with open(os.path.join(path, "splits.tsv"), "w", encoding="utf-8") as fh:
        for name in ("train", "val", "test"):
            for u in g.splits.get(name, []):
                fh.write(f"{u}\t{name}\n")


def save_edges(adj: Adjacency, path):
    with open(path, "w", encoding="utf-8") as fh:
        for u, v, w in adj.pairs():
            fh.write(f"{u}\t{v}\t{w!r}\n")


def degree_probabilities(g: Graph):
    """Degree-normalized sampling distribution computed from the initial adjacency."""
    d = g.adj0.degrees()
    total = d.sum()
    if total <= 0:
        raise ValueError("degree_probabilities of a graph with no edges")
    return d / total


def sample_neighbors(g: Graph, u, size, rng) -> NeighborBatch:
    """Fixed-size neighbor sample from the current adjacency.

    Nodes with at most ``size`` neighbors return the whole neighborhood and
    consume no randomness. Larger neighborhoods are sampled without
    replacement, uniformly when the incident weights are all equal and
    proportionally to edge weight otherwise.
    """
    if size < 1:
        raise ValueError("sample size must be >= 1")
    ids, w = g.adj.neighbors(u)
    if len(ids) <= size:
        return NeighborBatch(u, ids.copy())
    if np.all(w == w[0]):
        pick = rng.choice(len(ids), size=size, replace=False)
    else:
        pick = rng.choice(len(ids), size=size, replace=False, p=w / w.sum())
    return NeighborBatch(u, ids[pick])


def sample_neighbor_table(g: Graph, size, rng):
    """Per-epoch neighbor sample for every node.

    Returns (idx, mask): idx is (n, size) int64 with padded slots pointing at
    node 0, mask is (n, size) float64 with 1.0 on real slots.
    """
    n = g.n
    idx = np.zeros((n, size), dtype=np.int64)
    mask = np.zeros((n, size), dtype=np.float64)
    for u in range(n):
        batch = sample_neighbors(g, u, size, rng).ids
        k = len(batch)
        idx[u, :k] = batch
        mask[u, :k] = 1.0
    return idx, mask


def gather_matrix(idx, mask, n):
    """Sparse (n*size, n) selection matrix with the slot mask folded in."""
    n_rows = idx.size
    data = mask.ravel()
    cols = idx.ravel()
    rows = np.arange(n_rows)
    return sp.csr_matrix((data, (rows, cols)), shape=(n_rows, n))
