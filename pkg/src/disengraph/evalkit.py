"""Evaluation protocols: classification, clustering, label propagation,
component confusion, and similarity-matrix export."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import KMeans
from sklearn.metrics import adjusted_rand_score, normalized_mutual_info_score

from .graph import Adjacency
from .numerics import l2_normalize_rows


@dataclass
class MetricsReport:
    accuracy: float = float("nan")
    macro_f1: float = float("nan")
    micro_f1: float = float("nan")
    clustering_acc: float = float("nan")
    nmi: float = float("nan")
    ari: float = float("nan")
    protocol: str = ""
    split: str = ""
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


def _f1(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return 2.0 * tp / denom if denom > 0 else 0.0


def _single_label_f1(pred, truth, num_classes):
    per_class = []
    for c in range(num_classes):
        tp = int(np.sum((pred == c) & (truth == c)))
        fp = int(np.sum((pred == c) & (truth != c)))
        fn = int(np.sum((pred != c) & (truth == c)))
        per_class.append((tp, fp, fn))
    macro = float(np.mean([_f1(*t) for t in per_class]))
    totals = np.sum(per_class, axis=0)
    micro = _f1(*totals)
    return macro, micro


def classification_metrics(scores, labels, test_ids, multi_label=False,
                           num_classes=None, threshold=0.5) -> MetricsReport:
    """Accuracy and F1 scores on the test ids.

    Single-label: argmax prediction (ties to the lower class id). Multi-label:
    a label is predicted when sigmoid(score) >= threshold; macro-F1 averages
    per-class F1 with zero-division counting as 0, micro-F1 uses global counts.
    """
    test_ids = np.asarray(test_ids, dtype=np.int64)
    if test_ids.size == 0:
        raise ValueError("classification metrics over an empty test set")
    scores = np.asarray(scores, dtype=np.float64)
    if multi_label:
        truth = np.asarray(labels, dtype=np.float64)[test_ids]
        pred = (1.0 / (1.0 + np.exp(-scores[test_ids])) >= threshold).astype(np.float64)
        tp_c = (pred * truth).sum(axis=0)
        fp_c = (pred * (1 - truth)).sum(axis=0)
        fn_c = ((1 - pred) * truth).sum(axis=0)
        macro = float(np.mean([_f1(tp, fp, fn) for tp, fp, fn in zip(tp_c, fp_c, fn_c)]))
        micro = _f1(tp_c.sum(), fp_c.sum(), fn_c.sum())
        exact = float(np.mean(np.all(pred == truth, axis=1)))
        return MetricsReport(accuracy=exact, macro_f1=macro, micro_f1=micro,
                             protocol="multilabel")
    truth = np.asarray(labels, dtype=np.int64)[test_ids]
    pred = np.argmax(scores[test_ids], axis=1)
    acc = float(np.mean(pred == truth))
    k = num_classes if num_classes is not None else int(scores.shape[1])
    macro, micro = _single_label_f1(pred, truth, k)
    return MetricsReport(accuracy=acc, macro_f1=macro, micro_f1=micro, protocol="classify")


def clustering_accuracy(pred_clusters, labels):
    """Best cluster-to-class matching accuracy (Hungarian assignment)."""
    pred_clusters = np.asarray(pred_clusters, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    n_row = pred_clusters.max() + 1
    n_col = labels.max() + 1
    size = max(n_row, n_col)
    contingency = np.zeros((size, size), dtype=np.int64)
    for p, t in zip(pred_clusters, labels):
        contingency[p, t] += 1
    rows, cols = linear_sum_assignment(-contingency)
    return float(contingency[rows, cols].sum() / labels.size)


def cluster_and_score(representations, labels, k, seed) -> MetricsReport:
    """K-means (k-means++ seeding, 10 restarts) scored by ACC / NMI / ARI."""
    reps = np.asarray(representations, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise ValueError("cluster count must be >= 2")
    distinct = np.unique(reps, axis=0).shape[0]
    if k > distinct:
        raise ValueError(f"cluster count {k} exceeds {distinct} distinct points")
    km = KMeans(n_clusters=k, init="k-means++", n_init=10, random_state=int(seed) % (2 ** 31))
    clusters = km.fit_predict(reps)
    return MetricsReport(
        clustering_acc=clustering_accuracy(clusters, labels),
        nmi=float(normalized_mutual_info_score(labels, clusters, average_method="arithmetic")),
        ari=float(adjusted_rand_score(labels, clusters)),
        protocol="cluster",
        seed=int(seed),
    )


def label_propagation_score(adj, labels, train_ids, test_ids, iters=100, alpha=0.99):
    """Clamped label propagation accuracy on the test ids.

    F <- alpha * S F + (1 - alpha) * Y with S the symmetrically normalized
    adjacency; training rows are clamped to their one-hot labels every
    iteration. Test nodes that never receive mass fall back to class 0.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    a = adj.to_csr() if isinstance(adj, Adjacency) else sp.csr_matrix(adj)
    labels = np.asarray(labels, dtype=np.int64)
    train_ids = np.asarray(train_ids, dtype=np.int64)
    test_ids = np.asarray(test_ids, dtype=np.int64)
    n = a.shape[0]
    num_classes = int(labels.max()) + 1

    deg = np.asarray(a.sum(axis=1)).ravel()
    inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    s = sp.diags(inv_sqrt) @ a @ sp.diags(inv_sqrt)

    y = np.zeros((n, num_classes))
    y[train_ids, labels[train_ids]] = 1.0
    f = y.copy()
    for _ in range(iters):
        f = alpha * (s @ f) + (1.0 - alpha) * y
        f[train_ids] = y[train_ids]
    row_mass = f[test_ids].sum(axis=1)
    pred = np.argmax(f[test_ids], axis=1)
    pred = np.where(row_mass > 0, pred, 0)
    return float(np.mean(pred == labels[test_ids]))


def component_confusion(components):
    """Group-average cosine similarity between component distributions.

    components is (n, K, dd). Exact double sum up to n = 3000; beyond that
    the factorized form (dot products of mean unit vectors) is used, which is
    exact because cosine of unit vectors is their inner product.
    """
    comp = np.asarray(components, dtype=np.float64)
    n, k, _ = comp.shape
    unit = np.stack([l2_normalize_rows(comp[:, i, :]) for i in range(k)], axis=1)
    if n <= 3000:
        c = np.zeros((k, k))
        for i in range(k):
            for j in range(k):
                c[i, j] = float((unit[:, i, :] @ unit[:, j, :].T).sum()) / (n * n)
        return c
    means = unit.mean(axis=0)  # (K, dd)
    return means @ means.T


def mean_offdiagonal(matrix):
    m = np.asarray(matrix, dtype=np.float64)
    k = m.shape[0]
    if k < 2:
        return 0.0
    mask = ~np.eye(k, dtype=bool)
    return float(np.abs(m[mask]).mean())


def export_similarity_matrix(representations, components, labels, out_dir):
    """Write class-sorted cosine similarity matrices as headerless CSV.

    One file for the concatenated representation and one per component
    space; rows/columns are ordered by (class label, node id). Returns the
    list of written paths in that order.
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    labels = np.asarray(labels, dtype=np.int64)
    order = np.lexsort((np.arange(labels.size), labels))
    paths = []

    def write(matrix, name):
        path = os.path.join(out_dir, name)
        np.savetxt(path, matrix, fmt="%.8g", delimiter=",")
        paths.append(path)

    unit = l2_normalize_rows(np.asarray(representations, dtype=np.float64))[order]
    write(unit @ unit.T, "similarity.csv")
    comp = np.asarray(components, dtype=np.float64)
    for k in range(comp.shape[1]):
        unit_k = l2_normalize_rows(comp[:, k, :])[order]
        write(unit_k @ unit_k.T, f"similarity_component{k}.csv")
    return paths
