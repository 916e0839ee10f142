"""Mini-batch training with Adam, checkpointing, and exact resume.

All randomness (shuffling, stratified batching, reparameterization
noise) is derived from (seed, epoch, batch) so a run is reproducible
from its config and resuming from a checkpoint replays the identical
trajectory.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import model as M
from . import objective as O
from .datagen import DatasetRecord
from .model import ModelConfig
from .objective import LossWeights
from .pgraph import Decomposition, PeriodicGraph, decompose
from .tensor import Tensor

log = logging.getLogger(__name__)


class NonFiniteLossError(RuntimeError):
    """A loss term became NaN or infinite; the run is aborted."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    checkpoint_every: int = 10
    stratify: bool = True
    model: ModelConfig = field(default_factory=ModelConfig)
    loss: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.stratify and self.batch_size < 2:
            raise ValueError("stratified batching needs batch_size >= 2")
        for name in ("learning_rate", "adam_beta1", "adam_beta2", "adam_eps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        model = ModelConfig(**data.pop("model", {}))
        loss = LossWeights(**data.pop("loss", {}))
        return cls(model=model, loss=loss, **data)


class Adam:
    """Adaptive-moment gradient descent with bias correction."""

    def __init__(self, params: dict[str, Tensor], lr: float, beta1: float, beta2: float, eps: float):
        self.params = params
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self) -> None:
        self.step_count += 1
        t = self.step_count
        for name, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            m_hat = self.m[name] / (1 - self.beta1**t)
            v_hat = self.v[name] / (1 - self.beta2**t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()


@dataclass
class PreparedGraph:
    graph: PeriodicGraph
    features: np.ndarray
    target: Decomposition
    label: str | None


def _prepare(records: list[DatasetRecord]) -> list[PreparedGraph]:
    prepared = []
    for rec in records:
        g = rec.graph()
        if rec.n is None:
            raise ValueError("training records must carry their unit size")
        target = decompose(g, rec.n)
        prepared.append(
            PreparedGraph(graph=g, features=M.node_features(g), target=target, label=rec.unit_kind)
        )
    return prepared


def _batch_plan(labels: list, batch_size: int, stratify: bool, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffle into batches; under stratification every full batch is
    repaired to contain at least two distinct labels when possible."""
    count = len(labels)
    if count <= batch_size:
        idx = rng.permutation(count)
        batches = [idx]
    else:
        if stratify and len(set(labels)) >= 2:
            groups = {}
            for i, lab in enumerate(labels):
                groups.setdefault(lab, []).append(i)
            order = []
            pools = [list(rng.permutation(g)) for g in groups.values()]
            while any(pools):
                for pool in pools:
                    if pool:
                        order.append(pool.pop())
            idx = np.asarray(order)
        else:
            idx = rng.permutation(count)
        full = count // batch_size
        batches = [idx[i * batch_size : (i + 1) * batch_size] for i in range(full)]
        if stratify:
            _repair_batches(batches, labels)
    return batches


def _repair_batches(batches: list[np.ndarray], labels: list) -> None:
    def label_set(batch):
        return {labels[i] for i in batch}

    for bi, batch in enumerate(batches):
        if len(label_set(batch)) >= 2:
            continue
        lone = labels[batch[0]]
        for bj, donor in enumerate(batches):
            if bj == bi:
                continue
            for pos, cand in enumerate(donor):
                if labels[cand] == lone:
                    continue
                donor_after = list(donor)
                donor_after[pos] = batch[0]
                if len({labels[i] for i in donor_after}) >= 2:
                    batch[0], donor[pos] = donor[pos], batch[0]
                    break
            if len(label_set(batch)) >= 2:
                break


def _forward_batch(params, cfg: ModelConfig, weights: LossWeights, items: list[PreparedGraph], noise_rng):
    recons, kls, z_rows, labels = [], [], [], []
    for item in items:
        enc = M.encode(params, cfg, item.graph)
        eta_l = noise_rng.standard_normal((1, cfg.local_dim))
        eta_g = noise_rng.standard_normal((1, cfg.global_dim))
        z_l = M.reparameterize(enc.mu_local, enc.logsig_local, eta_l)
        z_g = M.reparameterize(enc.mu_global, enc.logsig_global, eta_g)
        probs = M.decode(params, cfg, z_l, z_g)
        recons.append(O.recon_loss(probs, item.target))
        kls.append(
            O.kl_loss(
                enc.mu_local, enc.logsig_local, enc.mu_global, enc.logsig_global,
                weights.beta_local, weights.beta_global,
            )
        )
        z_rows.append(z_l)
        labels.append(item.label)
    return O.total_loss(recons, kls, z_rows, labels, weights)


def _check_finite(breakdown: O.LossBreakdown) -> None:
    for term in ("l_rec", "l_kl", "l_contra"):
        if not np.isfinite(getattr(breakdown, term)):
            raise NonFiniteLossError(f"loss term {term} is not finite; aborting")


def save_checkpoint(path, config: TrainConfig, params, optimizer: Adam, epoch: int) -> None:
    arrays = {f"param:{k}": v.data for k, v in params.items()}
    arrays.update({f"adam_m:{k}": v for k, v in optimizer.m.items()})
    arrays.update({f"adam_v:{k}": v for k, v in optimizer.v.items()})
    meta = {
        "config": asdict(config.model),
        "train_config": config.to_dict(),
        "epoch": epoch,
        "adam_step": optimizer.step_count,
    }
    np.savez(path, __meta__=json.dumps(meta), **arrays)


def load_checkpoint(path) -> tuple[TrainConfig, dict[str, Tensor], dict, int, int]:
    cfg, params, meta = M.load_params(path)
    train_cfg = TrainConfig.from_dict(meta["train_config"])
    with np.load(path, allow_pickle=False) as archive:
        moments = {"m": {}, "v": {}}
        for key in archive.files:
            if key.startswith("adam_m:"):
                moments["m"][key[len("adam_m:"):]] = archive[key]
            elif key.startswith("adam_v:"):
                moments["v"][key[len("adam_v:"):]] = archive[key]
    return train_cfg, params, moments, int(meta["epoch"]), int(meta["adam_step"])


def _config_mismatches(a: dict, b: dict, prefix: str = "") -> list[str]:
    keys = sorted(set(a) | set(b))
    diffs = []
    for key in keys:
        va, vb = a.get(key), b.get(key)
        if isinstance(va, dict) and isinstance(vb, dict):
            diffs.extend(_config_mismatches(va, vb, prefix + key + "."))
        elif va != vb:
            diffs.append(f"{prefix}{key}: checkpoint={va!r} requested={vb!r}")
    return diffs


def train(
    config: TrainConfig,
    records: list[DatasetRecord],
    out_dir: str | Path | None = None,
    _state: tuple | None = None,
) -> tuple[dict[str, Tensor], list[dict]]:
    """Run the optimization; returns final parameters and per-epoch rows.

    Each row records the epoch's mean loss terms and wall-clock seconds.
    Checkpoints (with optimizer state) are written into ``out_dir`` at
    the configured cadence plus a final one.
    """
    if not records:
        raise ValueError("dataset must be nonempty")
    prepared = _prepare(records)
    labels = [p.label for p in prepared]
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    if _state is None:
        params = M.init_params(config.model, seed=config.seed)
        optimizer = Adam(
            params, config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps
        )
        start_epoch = 1
    else:
        params, moments, done_epoch, adam_step = _state
        optimizer = Adam(
            params, config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps
        )
        optimizer.m.update(moments["m"])
        optimizer.v.update(moments["v"])
        optimizer.step_count = adam_step
        start_epoch = done_epoch + 1

    rows = []
    for epoch in range(start_epoch, config.epochs + 1):
        started = time.perf_counter()
        shuffle_rng = np.random.default_rng([config.seed, epoch, 0])
        batches = _batch_plan(labels, config.batch_size, config.stratify, shuffle_rng)
        sums = np.zeros(4)
        for b_idx, batch in enumerate(batches):
            noise_rng = np.random.default_rng([config.seed, epoch, 1 + b_idx])
            items = [prepared[i] for i in batch]
            optimizer.zero_grad()
            total, breakdown = _forward_batch(params, config.model, config.loss, items, noise_rng)
            _check_finite(breakdown)
            total.backward()
            optimizer.step()
            sums += (breakdown.l_rec, breakdown.l_kl, breakdown.l_contra, breakdown.total)
        means = sums / len(batches)
        row = {
            "epoch": epoch,
            "l_rec": means[0],
            "l_kl": means[1],
            "l_contra": means[2],
            "total": means[3],
            "seconds": time.perf_counter() - started,
        }
        rows.append(row)
        log.info(
            "epoch %d: rec=%.4f kl=%.4f contra=%.4f total=%.4f",
            epoch, means[0], means[1], means[2], means[3],
        )
        if out_dir is not None and (
            epoch % config.checkpoint_every == 0 or epoch == config.epochs
        ):
            save_checkpoint(out_dir / f"ckpt_epoch_{epoch:04d}.npz", config, params, optimizer, epoch)
    if out_dir is not None:
        save_checkpoint(out_dir / "ckpt_final.npz", config, params, optimizer, config.epochs)
        write_epoch_log(out_dir / "train_log.csv", rows)
    return params, rows


def resume(
    checkpoint: str | Path,
    config: TrainConfig,
    records: list[DatasetRecord],
    out_dir: str | Path | None = None,
) -> tuple[dict[str, Tensor], list[dict]]:
    """Continue a run from a checkpoint as if it had never stopped.

    The checkpoint's stored config must match the requested one
    (epochs may differ: that is the point of resuming).
    """
    stored_cfg, params, moments, done_epoch, adam_step = load_checkpoint(checkpoint)
    stored = stored_cfg.to_dict()
    requested = config.to_dict()
    stored.pop("epochs"), requested.pop("epochs")
    diffs = _config_mismatches(stored, requested)
    if diffs:
        raise ValueError("config does not match checkpoint: " + "; ".join(diffs))
    return train(config, records, out_dir, _state=(params, moments, done_epoch, adam_step))


def write_epoch_log(path: str | Path, rows: list[dict]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("epoch,l_rec,l_kl,l_contra,total,seconds\n")
        for row in rows:
            fh.write(
                f"{row['epoch']},{row['l_rec']:.10g},{row['l_kl']:.10g},"
                f"{row['l_contra']:.10g},{row['total']:.10g},{row['seconds']:.3f}\n"
            )
