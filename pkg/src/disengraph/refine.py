"""Diversity-preserving core-set sampling and local graph refinement.

Each refinement epoch draws a core set of nodes by degree-proportional
sampling with soft deflation: once a node is picked, every neighbor's
probability is multiplied by sin^2(distance / tau), so redundant picks near
an already-covered neighborhood are suppressed. For each core node a
per-component k-nearest-neighbor row is built from the component embeddings,
the K rows are fused by element-wise max, and the fused row is blended with
the initial adjacency. Only core-set rows (and their mirrored columns) ever
change, and the blend always references the initial adjacency, so refinement
cannot compound drift across epochs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Adjacency, Graph, degree_probabilities
from .numerics import l2_normalize_rows

EDGE_DROP_EPS = 1e-4
_DEFLATE_CAP = np.pi / 2 - 1e-6


@dataclass
class RefinementConfig:
    coreset_size: int
    knn_size: int = 10
    gamma: float = 0.3
    tau: float = 0.0  # 0 means calibrate from the median pairwise distance

    def __post_init__(self):
        if self.coreset_size < 1:
            raise ValueError("coreset_size must be >= 1")
        if self.knn_size < 1:
            raise ValueError("knn_size must be >= 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if self.tau < 0.0:
            raise ValueError("tau must be > 0 (or 0 for automatic)")


@dataclass
class CoreSet:
    nodes: list
    prob_trace: list = field(default_factory=list)  # per-draw probability snapshots
    truncated: bool = False  # requested more nodes than the graph has


def deflation(delta, tau):
    """Soft-deflation multiplier sin^2(delta / tau), argument capped at pi/2."""
    ratio = np.minimum(np.asarray(delta, dtype=np.float64) / tau, _DEFLATE_CAP)
    return np.sin(ratio) ** 2


def auto_tau(embeddings, max_nodes=512):
    """Scale such that the median pairwise distance maps to pi/4."""
    emb = np.asarray(embeddings, dtype=np.float64)
    n = emb.shape[0]
    if n > max_nodes:
        emb = emb[np.linspace(0, n - 1, max_nodes).astype(np.int64)]
    sq = np.square(emb).sum(axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * emb @ emb.T, 0.0)
    iu = np.triu_indices(emb.shape[0], 1)
    med = float(np.median(np.sqrt(d2[iu]))) if iu[0].size else 0.0
    if med <= 0.0:
        return 1.0
    return med / (np.pi / 4.0)


def sample_core_set(g: Graph, embeddings, cfg: RefinementConfig, rng) -> CoreSet:
    """Sequential degree-based draw with soft deflation of picked neighborhoods.

    Selected nodes leave the candidate pool; remaining probabilities are
    renormalized before every draw. If every remaining probability has been
    deflated to zero the draw falls back to uniform over the pool.
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    n = g.n
    p = degree_probabilities(g).copy()
    tau = cfg.tau if cfg.tau > 0 else auto_tau(emb)
    m = min(cfg.coreset_size, n)
    core = CoreSet(nodes=[], truncated=cfg.coreset_size > n)
    available = np.ones(n, dtype=bool)
    for _ in range(m):
        w = np.where(available, p, 0.0)
        total = w.sum()
        if total <= 0.0:
            w = available.astype(np.float64)
            total = w.sum()
        probs = w / total
        core.prob_trace.append(probs)
        u = int(rng.choice(n, p=probs))
        core.nodes.append(u)
        available[u] = False
        ids, _ = g.adj.neighbors(u)
        span = np.concatenate([ids, [u]])  # deflate the closed neighborhood
        delta = np.linalg.norm(emb[span] - emb[u], axis=1)
        p[span] *= deflation(delta, tau)
    return core


def component_knn_rows(components, core_nodes, knn_size):
    """Per-component nearest-neighbor rows for every core node.

    components is (n, K, dd); rows hold the ``knn_size`` highest-cosine nodes
    (self excluded, ties to the lower node id) with weights max(cos, 0).
    Returns a list of K dicts mapping core node -> (ids, weights).
    """
    comp = np.asarray(components, dtype=np.float64)
    n, num_comp, _ = comp.shape
    k_eff = min(knn_size, n - 1)
    rows = []
    for k in range(num_comp):
        unit = l2_normalize_rows(comp[:, k, :])
        per_node = {}
        sims = unit[core_nodes] @ unit.T
        for i, u in enumerate(core_nodes):
            s = sims[i].copy()
            s[u] = -np.inf
            thresh = np.partition(s, n - k_eff)[n - k_eff]
            cand = np.flatnonzero(s >= thresh)
            order = np.lexsort((cand, -s[cand]))  # by similarity desc, then id asc
            chosen = cand[order[:k_eff]]
            per_node[u] = (chosen.astype(np.int64), np.clip(s[chosen], 0.0, 1.0))
        rows.append(per_node)
    return rows


def maxpool_fuse(rows):
    """Element-wise max across the K component row-sets."""
    fused = {}
    for per_node in rows:
        for u, (ids, weights) in per_node.items():
            row = fused.setdefault(u, {})
            for v, w in zip(ids.tolist(), weights.tolist()):
                if w > row.get(v, -1.0):
                    row[v] = w
    return fused


def refine_adjacency(adj0: Adjacency, adj_cur: Adjacency, fused, core_nodes, gamma):
    """Blend fused rows with the initial adjacency on the core-set rows.

    Every (u, v) with initial weight > 0 or fused weight > 0 gets
    (1-gamma) * A0 + gamma * fused; entries below the drop threshold vanish.
    Rows are mirrored; when both endpoints are core nodes the larger of the
    two directed blends wins, keeping the result order-independent.
    Returns (new adjacency, number of changed pairs).
    """
    new = adj_cur.copy()
    pair_vals = {}
    for u in core_nodes:
        ids0, w0 = adj0.neighbors(u)
        support = {int(v): float(w) for v, w in zip(ids0, w0)}
        row = fused.get(u, {})
        vals = {}
        for v, a0w in support.items():
            vals[v] = (1.0 - gamma) * a0w + gamma * row.get(v, 0.0)
        for v, fw in row.items():
            if fw > 0.0 and v not in support:
                vals[v] = gamma * fw
        for v, val in vals.items():
            if v == u:
                continue
            key = (min(u, v), max(u, v))
            # a key seen twice means both endpoints are core nodes
            pair_vals[key] = max(pair_vals[key], val) if key in pair_vals else val

    old_pairs = {}
    for u in core_nodes:
        for v in list(new.row(u)):
            key = (min(u, v), max(u, v))
            old_pairs[key] = new.weight(u, v)
            new.remove_pair(u, v)

    changed = 0
    for key in set(old_pairs) | set(pair_vals):
        val = pair_vals.get(key, 0.0)
        effective = val if val >= EDGE_DROP_EPS else 0.0
        if effective > 0.0:
            new.set_pair(key[0], key[1], effective)
        if abs(effective - old_pairs.get(key, 0.0)) > 1e-15:
            changed += 1
    return new, changed


def refine_epoch(g: Graph, aggregated, cfg: RefinementConfig, rng):
    """Run one full refinement pass and install the new adjacency."""
    agg = np.asarray(aggregated, dtype=np.float64)
    n, num_comp, comp_dim = agg.shape
    embeddings = agg.reshape(n, num_comp * comp_dim)
    core = sample_core_set(g, embeddings, cfg, rng)
    rows = component_knn_rows(agg, core.nodes, cfg.knn_size)
    fused = maxpool_fuse(rows)
    new_adj, changed = refine_adjacency(g.adj0, g.adj, fused, core.nodes, cfg.gamma)
    g.adj = new_adj
    return core, changed


def knn_graph(embeddings, k, weight_floor=0.0):
    """Symmetric k-nearest-neighbor graph from row embeddings (cosine)."""
    unit = l2_normalize_rows(np.asarray(embeddings, dtype=np.float64))
    n = unit.shape[0]
    k_eff = min(k, n - 1)
    adj = Adjacency(n)
    sims = unit @ unit.T
    np.fill_diagonal(sims, -np.inf)
    for u in range(n):
        s = sims[u]
        thresh = np.partition(s, n - k_eff)[n - k_eff]
        cand = np.flatnonzero(s >= thresh)
        order = np.lexsort((cand, -s[cand]))
        for v in cand[order[:k_eff]]:
            w = min(max(float(s[v]), 0.0), 1.0)
            if w > weight_floor:
                adj.set_pair(u, int(v), max(w, adj.weight(u, int(v))))
    return adj
