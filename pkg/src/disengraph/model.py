"""Component-specific neighbor aggregation with dynamic assignment.

A layer projects its input into K component spaces (relu + unit
normalization), then iteratively aggregates each node's sampled neighborhood
per component. Two softmax weightings drive the aggregation:

* hubness: softmax over components of the node-neighbor similarity, the
  probability that an edge is attributable to each latent factor;
* authority: softmax over the neighborhood of the similarity within one
  component space, the aggregation weight of each neighbor there.

Each assignment iteration adds the authority- and hubness-weighted neighbor
sums to the running aggregate and re-normalizes. Stacked layers feed the
concatenated component vectors forward; the classifier head is a single
affine map over the (optionally skip-concatenated) layer outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .graph import gather_matrix
from .numerics import ParamStore, l2_normalize, l2_normalize_rows, softmax, xavier_init


@dataclass
class LayerConfig:
    components: int
    component_dim: int
    alpha: float = 0.5
    beta: float = 0.5
    assign_iters: int = 4

    def __post_init__(self):
        if self.components < 1 or self.component_dim < 1:
            raise ValueError("components and component_dim must be >= 1")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if self.assign_iters < 1:
            raise ValueError("assign_iters must be >= 1")

    @property
    def width(self):
        return self.components * self.component_dim


@dataclass
class ModelConfig:
    in_dim: int
    num_classes: int
    layers: list
    skip_connections: bool = True

    def __post_init__(self):
        if not self.layers:
            raise ValueError("at least one layer required")
        steps = {self.layers[i].components - self.layers[i + 1].components
                 for i in range(len(self.layers) - 1)}
        if not steps <= {0, 2, 4} or len(steps) > 1:
            raise ValueError("component counts must decrease by a constant step in {0, 2, 4}")

    @property
    def classifier_in(self):
        if self.skip_connections:
            return sum(lc.width for lc in self.layers)
        return self.layers[-1].width


@dataclass
class ForwardResult:
    logits: ad.Tensor
    rep: ad.Tensor           # final-layer concatenated aggregate, (n, K*dd)
    projected: ad.Tensor     # final-layer component projections, (n, K, dd)
    aggregated: ad.Tensor    # final-layer aggregated components, (n, K, dd)
    layer_reps: list = field(default_factory=list)
    cls_input: ad.Tensor | None = None


# ---------------------------------------------------------------------------
# contract-level reference operations (plain numpy, single node)
# ---------------------------------------------------------------------------

def project_components(x, weights):
    """Project one feature vector into K unit-norm component vectors."""
    x = np.asarray(x, dtype=np.float64)
    out = []
    for w in weights:
        w = np.asarray(w, dtype=np.float64)
        if w.shape[0] != x.size:
            raise ValueError(f"projection expects input dim {w.shape[0]}, got {x.size}")
        out.append(l2_normalize(np.maximum(x @ w, 0.0)))
    return np.stack(out)


def hubness_scores(s):
    """Softmax of per-component similarities; sums to 1 over components."""
    return softmax(np.asarray(s, dtype=np.float64))


def authority_scores(s):
    """Softmax of per-neighbor similarities within one component space."""
    s = np.asarray(s, dtype=np.float64)
    if s.size == 0:
        raise ValueError("authority scores need a nonempty neighbor set")
    return softmax(s)


def dynamic_assignment(c_self, c_neighbors, cfg: LayerConfig):
    """Reference single-node aggregation; the vectorized forward must match.

    c_self is (K, dd), c_neighbors is (B, K, dd), both unit-norm (or zero
    under the guard). An empty neighborhood, or alpha == beta == 0, returns
    the projected components unchanged.
    """
    c_self = np.asarray(c_self, dtype=np.float64)
    c_neighbors = np.asarray(c_neighbors, dtype=np.float64)
    if len(c_neighbors) == 0 or (cfg.alpha == 0.0 and cfg.beta == 0.0):
        return c_self.copy()
    h = c_self.copy()
    for _ in range(cfg.assign_iters):
        s = np.einsum("kd,bkd->bk", h, c_neighbors)
        p = softmax(s, axis=1)   # over components
        q = softmax(s, axis=0)   # over neighbors
        agg = cfg.alpha * np.einsum("bk,bkd->kd", q, c_neighbors) \
            + cfg.beta * np.einsum("bk,bkd->kd", p, c_neighbors)
        h = l2_normalize_rows(h + agg)
    return h


# ---------------------------------------------------------------------------
# vectorized differentiable model
# ---------------------------------------------------------------------------

class DisenModel:
    """Stack of disentangling layers plus an affine classification head."""

    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        self.params = ParamStore()

    def init_params(self, rng, weight_decay=0.0):
        in_dim = self.cfg.in_dim
        for l, lc in enumerate(self.cfg.layers):
            for k in range(lc.components):
                self.params.add(f"layer{l}.proj{k}",
                                xavier_init(in_dim, lc.component_dim, rng),
                                weight_decay=weight_decay)
            in_dim = lc.width
        self.params.add("classifier.W", xavier_init(self.cfg.classifier_in, self.cfg.num_classes, rng))
        self.params.add("classifier.b", np.zeros(self.cfg.num_classes))

    def model_param_names(self):
        return self.params.names()

    def forward(self, features, nbr_idx, mask, leaves=None) -> ForwardResult:
        """Full-graph forward pass over one sampled neighbor table."""
        if leaves is None:
            leaves = self.params.leaves()
        n, size = nbr_idx.shape
        gmat = gather_matrix(nbr_idx, mask, n)
        isolated = mask.sum(axis=1) == 0

        x = ad.Tensor(features)
        layer_reps = []
        projected = aggregated = None
        for l, lc in enumerate(self.cfg.layers):
            comps = [ad.l2_normalize(ad.relu(x @ leaves[f"layer{l}.proj{k}"]))
                     for k in range(lc.components)]
            c = ad.stack(comps, axis=1)  # (n, K, dd)
            h = _assign_batch(c, gmat, mask, isolated, lc, n, size)
            rep = ad.reshape(h, (n, lc.width))
            layer_reps.append(rep)
            projected, aggregated = c, h
            x = rep

        if self.cfg.skip_connections and len(layer_reps) > 1:
            cls_input = ad.concat(layer_reps, axis=1)
        else:
            cls_input = layer_reps[-1]
        logits = cls_input @ leaves["classifier.W"] + leaves["classifier.b"]
        return ForwardResult(logits=logits, rep=layer_reps[-1], projected=projected,
                             aggregated=aggregated, layer_reps=layer_reps, cls_input=cls_input)


def _assign_batch(c, gmat, mask, isolated, lc: LayerConfig, n, size):
    """Vectorized dynamic assignment over every node at once."""
    if lc.alpha == 0.0 and lc.beta == 0.0:
        return c
    k, dd = lc.components, lc.component_dim
    flat = ad.reshape(c, (n, k * dd))
    c_nb = ad.reshape(ad.sparse_gather(flat, gmat), (n, size, k, dd))
    mask3 = mask[:, :, None]
    h = c
    for _ in range(lc.assign_iters):
        s = ad.einsum("nkd,nskd->nsk", h, c_nb)
        p = ad.mul(ad.softmax(s, axis=2), mask3)       # hubness, masked to real slots
        q = ad.masked_softmax(s, mask3, axis=1)        # authority over the neighborhood
        agg = ad.add(ad.mul(ad.einsum("nsk,nskd->nkd", q, c_nb), lc.alpha),
                     ad.mul(ad.einsum("nsk,nskd->nkd", p, c_nb), lc.beta))
        h = ad.l2_normalize(ad.add(h, agg))
    if isolated.any():
        h = ad.where_rows(isolated, c, h)  # empty neighborhood keeps the projection
    return h


# ---------------------------------------------------------------------------
# task losses
# ---------------------------------------------------------------------------

def task_loss_ce(logits, labels, mask_ids):
    """Mean softmax cross-entropy over the masked nodes."""
    mask_ids = np.asarray(mask_ids, dtype=np.int64)
    if mask_ids.size == 0:
        raise ValueError("cross-entropy over an empty node mask")
    sel = ad.take_rows(ad.as_tensor(logits), mask_ids)
    shift = sel.value.max(axis=1, keepdims=True)  # constant shift keeps exp stable
    z = ad.sub(sel, shift)
    lse = ad.log(ad.tsum(ad.exp(z), axis=1, keepdims=True))
    logp = ad.sub(z, lse)
    picked = ad.take_along_rows(logp, np.asarray(labels)[mask_ids])
    return ad.mul(ad.tmean(picked), -1.0)


def task_loss_multilabel(logits, label_matrix, mask_ids):
    """Multi-label soft margin loss averaged over the masked nodes."""
    mask_ids = np.asarray(mask_ids, dtype=np.int64)
    if mask_ids.size == 0:
        raise ValueError("multi-label loss over an empty node mask")
    sel = ad.take_rows(ad.as_tensor(logits), mask_ids)
    y = np.asarray(label_matrix, dtype=np.float64)[mask_ids]
    pos = ad.mul(ad.softplus(ad.mul(sel, -1.0)), y)
    neg = ad.mul(ad.softplus(sel), 1.0 - y)
    return ad.tmean(ad.add(pos, neg))


def predict_classes(logit_values):
    """Argmax prediction; ties resolve to the lower class id."""
    return np.argmax(np.asarray(logit_values), axis=1)


def predict_labelsets(logit_values, threshold=0.5):
    """Multi-label prediction: label c iff sigmoid(score_c) >= threshold."""
    scores = np.asarray(logit_values, dtype=np.float64)
    probs = 1.0 / (1.0 + np.exp(-scores))
    return (probs >= threshold).astype(np.float64)
