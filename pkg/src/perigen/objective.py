"""Training objective: reconstruction + KL regularization + contrastive term.

The reconstruction targets are the decomposed (unit, layout, bonds)
matrices of each training graph, zero-padded to the decoder bounds. The
KL terms keep both posteriors near the standard-normal prior, each with
its own weight. The contrastive term pulls the local latents of graphs
sharing a basic unit together and pushes different units apart, using
cosine similarity at a fixed temperature.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .pgraph import Decomposition, pad_adjacency
from .tensor import Tensor

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-7
NORM_FLOOR = 1e-12

# incremented whenever a batch cannot form a contrastive denominator
single_label_batches = 0


@dataclass(frozen=True)
class LossWeights:
    beta_local: float = 0.1
    beta_global: float = 0.1
    beta_contrast: float = 1.0
    temperature: float = 0.2

    def __post_init__(self):
        if min(self.beta_local, self.beta_global, self.beta_contrast) < 0:
            raise ValueError("loss weights must be >= 0")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")


@dataclass(frozen=True)
class LossBreakdown:
    l_rec: float
    l_kl: float
    l_contra: float
    total: float
    weights: LossWeights


def _bce(probs: Tensor, target: np.ndarray) -> Tensor:
    p = T.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return -T.tsum(target * T.log(p) + (1.0 - target) * T.log(1.0 - p))


def recon_loss(probs: tuple[Tensor, Tensor, Tensor], target) -> Tensor:
    """Mean binary cross-entropy over the three decoded matrices.

    ``target`` is a Decomposition (or a raw (unit, layout, bonds)
    triple), padded here to the decoder output sizes.
    """
    unit_p, bonds_p, layout_p = probs
    if isinstance(target, Decomposition):
        unit_t, layout_t, bonds_t = target.unit, target.layout, target.bonds
    else:
        unit_t, layout_t, bonds_t = (np.asarray(t) for t in target)
        for name, t in (("unit", unit_t), ("layout", layout_t), ("bonds", bonds_t)):
            if not np.isin(t, (0, 1)).all():
                raise ValueError(f"target {name} matrix must be binary")
    n_max = unit_p.data.shape[0]
    m_max = layout_p.data.shape[0]
    unit_t = pad_adjacency(unit_t, n_max).astype(np.float64)
    bonds_t = pad_adjacency(bonds_t, n_max).astype(np.float64)
    layout_t = pad_adjacency(layout_t, m_max).astype(np.float64)
    total = _bce(unit_p, unit_t) + _bce(bonds_p, bonds_t) + _bce(layout_p, layout_t)
    return total * (1.0 / (2 * n_max**2 + m_max**2))


def kl_loss(mu_l, logsig_l, mu_g, logsig_g, beta_local: float, beta_global: float) -> Tensor:
    """Weighted closed-form KL of both diagonal Gaussians against N(0, I)."""
    def _kl(mu, logsig):
        var = T.exp(2.0 * logsig)
        return 0.5 * T.tsum(mu * mu + var - 1.0 - 2.0 * logsig)

    return beta_local * _kl(mu_l, logsig_l) + beta_global * _kl(mu_g, logsig_g)


def contrastive_loss(z_rows, labels, temperature: float, beta: float) -> Tensor:
    """Cosine-similarity contrastive term over one batch of local latents.

    For every ordered within-label pair (including a latent with itself)
    the log-ratio of its similarity against the anchor's cross-label
    similarities is accumulated. A batch with a single distinct label has
    no denominator; it contributes 0 and bumps a module warning counter.
    """
    global single_label_batches
    if len(z_rows) != len(labels):
        raise ValueError(f"{len(z_rows)} latents vs {len(labels)} labels")
    if len(set(labels)) < 2 or beta == 0.0:
        if len(set(labels)) < 2:
            single_label_batches += 1
            log.warning("contrastive term skipped: batch has a single unit label")
        return T.as_tensor(0.0)

    z = T.concat([T.reshape(r, (1, -1)) for r in z_rows], axis=0)
    norms = T.clip(T.sqrt(T.tsum(z * z, axis=1)), NORM_FLOOR, np.inf)
    zn = z / T.reshape(norms, (len(labels), 1))
    sims = T.matmul(zn, T.transpose(zn))

    same = np.array([[a == b for b in labels] for a in labels], dtype=np.float64)
    positives = T.tsum(sims * same) * (1.0 / temperature)
    scaled = T.exp(sims * (1.0 / temperature))
    denom = T.tsum(scaled * (1.0 - same), axis=1)
    pair_counts = same.sum(axis=1)  # anchors appear once per within-label pair
    negatives = T.tsum(T.log(denom) * pair_counts)
    return -beta * (positives - negatives)


def total_loss(recons, kls, z_rows, labels, weights: LossWeights) -> tuple[Tensor, LossBreakdown]:
    """Batch objective: mean recon + mean KL + one contrastive term."""
    if not recons:
        raise ValueError("batch must be nonempty")
    b = len(recons)
    l_rec = T.tsum(T.concat([T.reshape(r, (1,)) for r in recons], axis=0)) * (1.0 / b)
    l_kl = T.tsum(T.concat([T.reshape(k, (1,)) for k in kls], axis=0)) * (1.0 / b)
    l_con = contrastive_loss(z_rows, labels, weights.temperature, weights.beta_contrast)
    total = l_rec + l_kl + l_con
    breakdown = LossBreakdown(
        l_rec=float(l_rec.data),
        l_kl=float(l_kl.data),
        l_contra=float(l_con.data),
        total=float(total.data),
        weights=weights,
    )
    return total, breakdown
