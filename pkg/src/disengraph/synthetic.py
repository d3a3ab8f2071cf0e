"""Synthetic graph generators for tests and desk-scale benchmarks."""

from __future__ import annotations

import numpy as np

from .graph import Adjacency, Graph


def graph_from_edges(n, edges, features=None, labels=None, splits=None, classes=None):
    """Assemble a Graph from an undirected edge list of (u, v[, w]) tuples."""
    adj = Adjacency(n)
    for e in edges:
        u, v = e[0], e[1]
        w = e[2] if len(e) > 2 else 1.0
        adj.set_pair(u, v, w)
    if features is None:
        features = np.eye(n, dtype=np.float64)
    labels = None if labels is None else np.asarray(labels, dtype=np.int64)
    classes = classes if classes is not None else (
        [str(c) for c in sorted(set(labels.tolist()))] if labels is not None else []
    )
    return Graph(
        features=np.asarray(features, dtype=np.float64),
        adj0=adj,
        adj=adj.copy(),
        labels=labels,
        multi_label=False,
        classes=classes,
        splits=splits or {},
    )


def path_graph(n, **kw):
    return graph_from_edges(n, [(i, i + 1) for i in range(n - 1)], **kw)


def star_graph(leaves, weights=None, **kw):
    edges = [(0, i + 1, 1.0 if weights is None else weights[i]) for i in range(leaves)]
    return graph_from_edges(leaves + 1, edges, **kw)


def _class_splits(rng, labels, train_per_class, val_per_class):
    train, val, test = [], [], []
    for c in np.unique(labels):
        ids = np.flatnonzero(labels == c)
        ids = rng.permutation(ids)
        train.extend(ids[:train_per_class])
        val.extend(ids[train_per_class:train_per_class + val_per_class])
        test.extend(ids[train_per_class + val_per_class:])
    return {
        "train": np.asarray(sorted(train), dtype=np.int64),
        "val": np.asarray(sorted(val), dtype=np.int64),
        "test": np.asarray(sorted(test), dtype=np.int64),
    }


def sbm_graph(rng, sizes=(100, 100), p_in=0.1, p_out=0.002, feat_dim=16,
              feat_noise=0.5, train_per_class=10, val_per_class=30):
    """Stochastic block model with linearly separable class features."""
    labels = np.concatenate([np.full(s, c) for c, s in enumerate(sizes)]).astype(np.int64)
    n = labels.size
    iu, ju = np.triu_indices(n, 1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(prob.size) < prob
    edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))

    num_classes = len(sizes)
    if feat_dim < num_classes:
        raise ValueError("feat_dim must be >= number of blocks")
    features = feat_noise * rng.standard_normal((n, feat_dim))
    features[np.arange(n), labels] += 1.0

    splits = _class_splits(rng, labels, train_per_class, val_per_class)
    return graph_from_edges(n, edges, features=features, labels=labels, splits=splits)


def two_clique_graph(clique_size=50):
    """Two disjoint cliques; features and labels indicate the clique."""
    n = 2 * clique_size
    edges = []
    for base in (0, clique_size):
        for i in range(clique_size):
            for j in range(i + 1, clique_size):
                edges.append((base + i, base + j))
    labels = np.repeat([0, 1], clique_size)
    features = np.zeros((n, 2))
    features[np.arange(n), labels] = 1.0
    splits = {
        "train": np.asarray([0, clique_size], dtype=np.int64),
        "val": np.asarray([1, clique_size + 1], dtype=np.int64),
        "test": np.asarray(
            [u for u in range(n) if u not in (0, 1, clique_size, clique_size + 1)], dtype=np.int64
        ),
    }
    return graph_from_edges(n, edges, features=features, labels=labels, splits=splits)


def planted_factor_graph(rng, nodes=120, factors=3, groups=4, p_in=0.35,
                         p_out=0.01, feat_noise=0.3, train_per_class=8, val_per_class=8):
    """Graph whose edge set is the union of factor-specific block structures.

    Each factor partitions the nodes into groups independently; factor k
    contributes edges inside its own groups. Features concatenate noisy
    one-hot group indicators of every factor, so each latent factor is
    recoverable. Node labels are the groups of factor 0.

    Returns (graph, factor_edges) where factor_edges[k] is the set of (u, v)
    pairs (u < v) contributed by factor k.
    """
    assignments = [rng.integers(0, groups, nodes) for _ in range(factors)]
    iu, ju = np.triu_indices(nodes, 1)
    factor_edges = []
    union = {}
    for k in range(factors):
        same = assignments[k][iu] == assignments[k][ju]
        keep = same & (rng.random(iu.size) < p_in)
        pairs = set(zip(iu[keep].tolist(), ju[keep].tolist()))
        factor_edges.append(pairs)
        for p in pairs:
            union[p] = 1.0
    noise = rng.random(iu.size) < p_out
    for u, v in zip(iu[noise].tolist(), ju[noise].tolist()):
        union.setdefault((u, v), 1.0)

    features = feat_noise * rng.standard_normal((nodes, factors * groups))
    for k in range(factors):
        features[np.arange(nodes), k * groups + assignments[k]] += 1.0

    labels = assignments[0].astype(np.int64)
    splits = _class_splits(rng, labels, train_per_class, val_per_class)
    g = graph_from_edges(nodes, [(u, v) for (u, v) in union], features=features,
                         labels=labels, splits=splits)
    return g, factor_edges


def multilabel_graph(rng, nodes=200, num_labels=6, extra_label_p=0.4,
                     p_in=0.10, p_out=0.005, feat_noise=0.4):
    """Multi-label graph: nodes share edges when their label sets overlap."""
    primary = rng.integers(0, num_labels, nodes)
    label_matrix = np.zeros((nodes, num_labels), dtype=np.float64)
    label_matrix[np.arange(nodes), primary] = 1.0
    for u in range(nodes):
        if rng.random() < extra_label_p:
            label_matrix[u, rng.integers(0, num_labels)] = 1.0

    iu, ju = np.triu_indices(nodes, 1)
    share = (label_matrix[iu] * label_matrix[ju]).sum(axis=1) > 0
    keep = rng.random(iu.size) < np.where(share, p_in, p_out)
    edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))

    features = feat_noise * rng.standard_normal((nodes, num_labels + 4))
    features[:, :num_labels] += label_matrix

    ids = rng.permutation(nodes)
    splits = {
        "train": np.asarray(sorted(ids[: nodes // 2]), dtype=np.int64),
        "val": np.asarray(sorted(ids[nodes // 2: 3 * nodes // 4]), dtype=np.int64),
        "test": np.asarray(sorted(ids[3 * nodes // 4:]), dtype=np.int64),
    }
    adj = Adjacency(nodes)
    for u, v in edges:
        adj.set_pair(u, v, 1.0)
    return Graph(
        features=features,
        adj0=adj,
        adj=adj.copy(),
        labels=None,
        label_matrix=label_matrix,
        multi_label=True,
        classes=[str(c) for c in range(num_labels)],
        splits=splits,
    )
