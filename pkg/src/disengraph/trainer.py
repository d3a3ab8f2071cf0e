"""EM-style training loop.

Each epoch runs an E-step (sampled-neighborhood forward pass, then optional
local graph refinement) followed by an M-step (one generator update on the
overall objective, then discriminator updates). Validation accuracy is read
from the epoch's own forward pass; the best-scoring parameter snapshot is
restored at the end.

All randomness flows from one root seed through named substreams
(init / neighbor / adversary / coreset / kmeans / eval / dropout), so
switching a feature off never perturbs the draws of the others.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .adversary import (
    Discriminator,
    adv_loss_terms,
    cls_loss_terms,
    discriminator_step,
    generator_objective,
    nonsaturating_fake_term,
    sample_batch,
)
from .config import TrainConfig
from .graph import Graph, sample_neighbor_table
from .model import (
    DisenModel,
    LayerConfig,
    ModelConfig,
    predict_classes,
    predict_labelsets,
    task_loss_ce,
    task_loss_multilabel,
)
from .numerics import NumericError, adam_step
from .refine import RefinementConfig, refine_epoch

STREAM_NAMES = ("init", "neighbor", "adversary", "coreset", "kmeans", "eval", "dropout")

ABLATION_VARIANTS = ("full", "no_macro", "no_micro", "baseline", "full_refine")


def make_streams(seed):
    """Named independent RNG substreams spawned from one root seed."""
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    return {name: np.random.Generator(np.random.PCG64(child))
            for name, child in zip(STREAM_NAMES, children)}


@dataclass
class EpochRecord:
    epoch: int
    task_loss: float
    adv_loss: float
    cls_loss: float
    disc_loss: float
    val_acc: float
    edges_changed: int
    wall_time: float


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)

    def append(self, rec: EpochRecord):
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def to_jsonl(self):
        return "\n".join(json.dumps(asdict(r)) for r in self.records) + "\n"

    def comparable(self):
        """Records without wall time, for determinism comparisons."""
        out = []
        for r in self.records:
            d = asdict(r)
            d.pop("wall_time")
            out.append(d)
        return out


@dataclass
class TrainResult:
    model: DisenModel
    disc: Discriminator | None
    history: TrainHistory
    graph: Graph                 # carries the final refined adjacency
    best_epoch: int
    best_val: float
    last_val: float
    last_snapshot: dict


def build_model(cfg: TrainConfig, in_dim, num_classes) -> DisenModel:
    layer_cfgs = [
        LayerConfig(components=k, component_dim=cfg.component_dim,
                    alpha=cfg.alpha, beta=cfg.beta, assign_iters=cfg.assign_iters)
        for k in cfg.component_plan()
    ]
    mc = ModelConfig(in_dim=in_dim, num_classes=num_classes, layers=layer_cfgs,
                     skip_connections=cfg.skip_connections)
    return DisenModel(mc)


def _val_score(g: Graph, logit_values, ids):
    if g.multi_label:
        pred = predict_labelsets(logit_values[ids])
        truth = g.label_matrix[ids]
        tp = float((pred * truth).sum())
        denom = pred.sum() + truth.sum()
        return 2.0 * tp / denom if denom > 0 else 0.0
    return float(np.mean(predict_classes(logit_values[ids]) == g.labels[ids]))


def _check_finite(value, epoch, what):
    if not np.isfinite(value):
        raise NumericError(f"epoch {epoch}: {what} is non-finite")
    return value


def train(g: Graph, cfg: TrainConfig) -> TrainResult:
    """Run the full training loop and return the best-checkpoint model."""
    cfg.validate()
    for split in ("train", "val"):
        if split not in g.splits or len(g.splits[split]) == 0:
            raise ValueError(f"graph is missing a '{split}' split")

    streams = make_streams(cfg.seed)
    g.reset_adjacency()

    model = build_model(cfg, g.num_features, g.num_classes)
    model.init_params(streams["init"], weight_decay=cfg.weight_decay)
    last_components = cfg.component_plan()[-1]

    disc = None
    if cfg.adversary:
        disc = Discriminator(cfg.component_dim, last_components, hidden=cfg.disc_hidden)
        disc.init_params(streams["init"])

    rcfg = None
    if cfg.refine:
        size = cfg.coreset_size if cfg.coreset_size > 0 else max(g.n // 10, 64)
        rcfg = RefinementConfig(coreset_size=size, knn_size=cfg.knn_size,
                                gamma=cfg.gamma, tau=cfg.tau)

    train_ids = g.splits["train"]
    val_ids = g.splits["val"]
    history = TrainHistory()
    best_val, best_epoch, best_snap = -1.0, -1, None
    val = 0.0

    for epoch in range(1, cfg.epochs + 1):
        t_start = time.perf_counter()

        # E-step: aggregate representations, then refine the graph locally.
        nbr_idx, mask = sample_neighbor_table(g, cfg.neighbor_samples, streams["neighbor"])
        feats = g.features
        if cfg.input_dropout > 0.0:
            keep = streams["dropout"].random(feats.shape) >= cfg.input_dropout
            feats = feats * keep / (1.0 - cfg.input_dropout)
        leaves = model.params.leaves()
        out = model.forward(feats, nbr_idx, mask, leaves)

        val = _val_score(g, out.logits.value, val_ids)
        if val > best_val:
            best_val, best_epoch = val, epoch
            best_snap = model.params.snapshot()

        edges_changed = 0
        if rcfg is not None and epoch >= cfg.refine_start:
            _, edges_changed = refine_epoch(g, out.aggregated.value, rcfg, streams["coreset"])

        # M-step: generator update on the overall objective, then the
        # discriminator on the same (detached) batch.
        if g.multi_label:
            task = task_loss_multilabel(out.logits, g.label_matrix, train_ids)
        else:
            task = task_loss_ce(out.logits, g.labels, train_ids)
        task_val = _check_finite(float(task.value), epoch, "task loss")

        batch = None
        if disc is not None:
            batch = sample_batch(out.aggregated.value, out.projected.value,
                                 max(cfg.adv_batch, last_components), streams["adversary"])

        if disc is not None and cfg.adv_weight > 0.0:
            dconst = {name: ad.Tensor(disc.params[name]) for name in disc.params.names()}
            flat_idx = batch.node_ids * last_components + batch.comp_ids
            fake_live = ad.take_rows(ad.reshape(out.projected, (-1, cfg.component_dim)), flat_idx)
            real_live = ad.take_rows(ad.reshape(out.aggregated, (-1, cfg.component_dim)), flat_idx)
            # the real pool is a constant in the adversarial term: the
            # generator must not be rewarded for degrading its aggregates
            src_real_const, _ = disc.apply(batch.real, dconst)
            src_fake, logp_fake = disc.apply(fake_live, dconst)
            _, logp_real = disc.apply(real_live, dconst)
            real_term = ad.tmean(ad.log(ad.clamp(src_real_const, 1e-7, 1.0 - 1e-7)))
            if cfg.saturating:
                fake_term = ad.tmean(ad.log(ad.clamp(ad.sub(1.0, src_fake), 1e-7, 1.0 - 1e-7)))
            else:
                fake_term = nonsaturating_fake_term(src_fake)
            adv_term = ad.add(real_term, fake_term)
            cls_term = cls_loss_terms(logp_real, logp_fake, batch.comp_ids)
            total = generator_objective(task, adv_term, cls_term, cfg.adv_weight, cfg.cls_weight)
        else:
            total = task

        ad.backward(total)
        grads = {name: leaf.grad for name, leaf in leaves.items() if leaf.grad is not None}
        adam_step(model.params, grads, lr=cfg.lr)

        adv_val = cls_val = disc_val = float("nan")
        if disc is not None:
            for _ in range(cfg.disc_steps):
                disc_val, adv_val, cls_val = discriminator_step(
                    disc, batch, eta=cfg.cls_weight, lr=cfg.disc_lr)
            _check_finite(adv_val, epoch, "adversarial loss")
            _check_finite(cls_val, epoch, "component classification loss")
            _check_finite(disc_val, epoch, "discriminator loss")

        history.append(EpochRecord(
            epoch=epoch, task_loss=task_val, adv_loss=adv_val, cls_loss=cls_val,
            disc_loss=disc_val, val_acc=val, edges_changed=edges_changed,
            wall_time=time.perf_counter() - t_start,
        ))

        if epoch - best_epoch >= cfg.patience:
            break

    last_snapshot = model.params.snapshot()
    if best_snap is not None:
        model.params.load(best_snap)
    return TrainResult(model=model, disc=disc, history=history, graph=g,
                       best_epoch=best_epoch, best_val=best_val, last_val=val,
                       last_snapshot=last_snapshot)


def evaluate_logits(g: Graph, model: DisenModel, cfg: TrainConfig, rng=None):
    """Deterministic evaluation logits, averaged over resampled neighborhoods."""
    if rng is None:
        rng = make_streams(cfg.seed)["eval"]
    total = None
    with ad.no_grad():
        for _ in range(cfg.eval_samples):
            nbr_idx, mask = sample_neighbor_table(g, cfg.neighbor_samples, rng)
            out = model.forward(g.features, nbr_idx, mask)
            total = out.logits.value if total is None else total + out.logits.value
    return total / cfg.eval_samples


def eval_states(g: Graph, model: DisenModel, cfg: TrainConfig, rng=None):
    """One evaluation forward pass; returns the full ForwardResult."""
    if rng is None:
        rng = make_streams(cfg.seed)["eval"]
    with ad.no_grad():
        nbr_idx, mask = sample_neighbor_table(g, cfg.neighbor_samples, rng)
        return model.forward(g.features, nbr_idx, mask)


def variant_config(base: TrainConfig, variant: str) -> TrainConfig:
    """Config transform for one ablation variant; no special code paths."""
    if variant == "full":
        return base.replace(refine=False)
    if variant == "full_refine":
        return base.replace(refine=True)
    if variant == "no_macro":
        return base.replace(refine=False, adversary=False, adv_weight=0.0)
    if variant == "no_micro":
        return base.replace(refine=False, alpha=0.0, beta=0.0, assign_iters=1)
    if variant == "baseline":
        return base.replace(refine=False, adversary=False, adv_weight=0.0,
                            alpha=0.0, beta=0.0, assign_iters=1)
    raise ValueError(f"unknown ablation variant '{variant}'")


def ablation_matrix(g: Graph, base_cfg: TrainConfig, seeds):
    """Train every ablation variant on shared seeds; returns result rows."""
    rows = []
    for seed in seeds:
        for variant in ABLATION_VARIANTS:
            cfg = variant_config(base_cfg, variant).replace(seed=seed)
            result = train(g, cfg)
            logits = evaluate_logits(g, result.model, cfg)
            test_ids = g.splits.get("test")
            test_score = _val_score(g, logits, test_ids) if test_ids is not None and len(test_ids) else float("nan")
            rows.append({
                "variant": variant,
                "seed": seed,
                "best_val": result.best_val,
                "test_score": test_score,
                "epochs_run": len(result.history),
            })
            g.reset_adjacency()
    return rows
