"""Adversarial regularizer for component-distribution separation.

A single discriminator with a shared trunk and two heads scores individual
component vectors: the source head says whether a sample is an aggregated
component (real) or a projected one (fake); the class head recovers which of
the K component spaces the sample came from. The projection matrices play
the generator role; training them against the discriminator pushes the K
component distributions apart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .numerics import ParamStore, adam_step, xavier_init

PROB_CLAMP = 1e-7


@dataclass
class AdvBatch:
    """Paired real/fake component samples with their component ids."""

    node_ids: np.ndarray
    comp_ids: np.ndarray
    real: np.ndarray  # (B, dd) aggregated components, treated as "real"
    fake: np.ndarray  # (B, dd) projected components, treated as "fake"

    def __len__(self):
        return len(self.comp_ids)


def sample_batch(aggregated, projected, batch_size, rng, enumerate_components=False) -> AdvBatch:
    """Draw B (node, component) pairs; reals from the aggregated pool, fakes
    from the projected pool.

    Nodes are uniform with replacement and the component index is uniform;
    ``enumerate_components`` instead cycles component ids 0..K-1 so a batch of
    size K carries exactly one sample per component.
    """
    aggregated = np.asarray(aggregated, dtype=np.float64)
    projected = np.asarray(projected, dtype=np.float64)
    if aggregated.size == 0 or projected.size == 0:
        raise ValueError("cannot sample an adversarial batch from empty pools")
    n, k, _ = aggregated.shape
    if batch_size < k:
        raise ValueError("batch size must be >= number of components")
    nodes = rng.integers(0, n, size=batch_size)
    if enumerate_components:
        comps = np.arange(batch_size, dtype=np.int64) % k
    else:
        comps = rng.integers(0, k, size=batch_size)
    return AdvBatch(
        node_ids=nodes,
        comp_ids=comps,
        real=aggregated[nodes, comps],
        fake=projected[nodes, comps],
    )


class Discriminator:
    """Shared trunk with a real/fake source head and a K-way class head."""

    def __init__(self, comp_dim, components, hidden=64, slope=0.2):
        self.comp_dim = comp_dim
        self.components = components
        self.hidden = hidden
        self.slope = slope
        self.params = ParamStore()

    def init_params(self, rng):
        self.params.add("disc.trunk.W", xavier_init(self.comp_dim, self.hidden, rng))
        self.params.add("disc.trunk.b", np.zeros(self.hidden))
        self.params.add("disc.src.W", xavier_init(self.hidden, 1, rng))
        self.params.add("disc.src.b", np.zeros(1))
        self.params.add("disc.cls.W", xavier_init(self.hidden, self.components, rng))
        self.params.add("disc.cls.b", np.zeros(self.components))

    def apply(self, x, leaves=None):
        """Score a (B, dd) batch: (source probs in (0,1), class log-probs)."""
        if leaves is None:
            leaves = self.params.leaves()
        x = ad.as_tensor(x)
        t = ad.leaky_relu(x @ leaves["disc.trunk.W"] + leaves["disc.trunk.b"], self.slope)
        src = ad.sigmoid(t @ leaves["disc.src.W"] + leaves["disc.src.b"])
        src = ad.reshape(src, (x.shape[0],))
        logits = t @ leaves["disc.cls.W"] + leaves["disc.cls.b"]
        shift = logits.value.max(axis=1, keepdims=True)
        z = ad.sub(logits, shift)
        log_probs = ad.sub(z, ad.log(ad.tsum(ad.exp(z), axis=1, keepdims=True)))
        return src, log_probs


def adv_loss_terms(src_real, src_fake):
    """Eq-style adversarial loss: E[log D(real)] + E[log(1 - D(fake))].

    Probabilities are clamped away from {0, 1} so no log(0) is evaluated.
    """
    real_term = ad.tmean(ad.log(ad.clamp(src_real, PROB_CLAMP, 1.0 - PROB_CLAMP)))
    fake_term = ad.tmean(ad.log(ad.clamp(ad.sub(1.0, src_fake), PROB_CLAMP, 1.0 - PROB_CLAMP)))
    return ad.add(real_term, fake_term)


def nonsaturating_fake_term(src_fake):
    """-E[log D(fake)], the non-saturating generator alternative."""
    return ad.mul(ad.tmean(ad.log(ad.clamp(src_fake, PROB_CLAMP, 1.0 - PROB_CLAMP))), -1.0)


def component_nll(log_probs, comp_ids):
    """Mean negative log-likelihood of the true component ids."""
    return ad.mul(ad.tmean(ad.take_along_rows(log_probs, comp_ids)), -1.0)


def cls_loss_terms(log_probs_real, log_probs_fake, comp_ids):
    """Component-classification loss: NLL over reals plus NLL over fakes."""
    return ad.add(component_nll(log_probs_real, comp_ids),
                  component_nll(log_probs_fake, comp_ids))


def generator_objective(task_loss, adv_loss, cls_loss, lam, eta):
    """Overall objective: task + lam * (adv + eta * cls)."""
    if lam == 0.0:
        return task_loss
    return ad.add(task_loss, ad.mul(ad.add(adv_loss, ad.mul(cls_loss, eta)), lam))


def adv_loss(disc: Discriminator, batch: AdvBatch):
    """Adversarial loss value of a batch under the current discriminator."""
    if len(batch) == 0:
        raise ValueError("empty adversarial batch")
    with ad.no_grad():
        src_real, _ = disc.apply(batch.real)
        src_fake, _ = disc.apply(batch.fake)
        return float(adv_loss_terms(src_real, src_fake).value)


def cls_loss(disc: Discriminator, batch: AdvBatch):
    """Component-classification loss value of a batch."""
    if len(batch) == 0:
        raise ValueError("empty adversarial batch")
    with ad.no_grad():
        _, logp_real = disc.apply(batch.real)
        _, logp_fake = disc.apply(batch.fake)
        return float(cls_loss_terms(logp_real, logp_fake, batch.comp_ids).value)


def discriminator_step(disc: Discriminator, batch: AdvBatch, eta=1.0, lr=1e-3,
                       beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam step on the discriminator minimizing -adv + eta * cls.

    The batch arrays are constants here: no gradient reaches the component
    pools, and no generator parameter is touched.
    Returns (loss_D, adv, cls) values on the batch before the step.
    """
    leaves = disc.params.leaves()
    src_real, logp_real = disc.apply(batch.real, leaves)
    src_fake, logp_fake = disc.apply(batch.fake, leaves)
    adv = adv_loss_terms(src_real, src_fake)
    cls = cls_loss_terms(logp_real, logp_fake, batch.comp_ids)
    loss = ad.add(ad.mul(adv, -1.0), ad.mul(cls, eta))
    ad.backward(loss)
    grads = {name: leaf.grad for name, leaf in leaves.items() if leaf.grad is not None}
    adam_step(disc.params, grads, lr=lr, beta1=beta1, beta2=beta2, eps=eps)
    return float(loss.value), float(adv.value), float(cls.value)
