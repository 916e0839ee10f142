"""Encoder/decoder network for periodic graphs.

The encoder runs a shared GIN backbone over the (unpadded) adjacency and
splits into two heads: a local head that soft-clusters node embeddings
into a fixed number of representative rows before inferring (mu, log
sigma) of the unit-structure latent, and a global head that sum-pools
node embeddings into the layout latent. Three MLP decoders map the
latents back to edge probabilities for the unit, bond, and layout
matrices; binarizing and assembling those yields a graph that is
periodic by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from . import tensor as T
from .pgraph import Decomposition, PeriodicGraph, assemble, pad_adjacency
from .tensor import Tensor

CLUSTER_COUNT_FLOOR = 1e-8


@dataclass(frozen=True)
class ModelConfig:
    gin_layers: int = 3
    clusters: int = 8
    local_dim: int = 32
    global_dim: int = 32
    hidden: int = 64
    n_max: int = 6
    m_max: int = 8

    def __post_init__(self):
        for name, val in asdict(self).items():
            if val < 1:
                raise ValueError(f"{name} must be >= 1, got {val}")


@dataclass(frozen=True)
class LatentPair:
    """One sampled point (local latent, global latent)."""

    local: np.ndarray
    global_: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "local", np.asarray(self.local, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "global_", np.asarray(self.global_, dtype=np.float64).reshape(-1))
        if not (np.isfinite(self.local).all() and np.isfinite(self.global_).all()):
            raise ValueError("latent vectors must be finite")


def _mlp_shapes(dims: list[int], prefix: str) -> dict[str, tuple]:
    shapes = {}
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:]), start=1):
        shapes[f"{prefix}.w{i}"] = (fan_in, fan_out)
        shapes[f"{prefix}.b{i}"] = (fan_out,)
    return shapes


def param_shapes(cfg: ModelConfig) -> dict[str, tuple]:
    """Canonical name -> shape manifest for every parameter.

    Decoder shapes depend only on the configured bounds, never on any
    dataset's graph sizes.
    """
    h, c = cfg.hidden, cfg.clusters
    shapes: dict[str, tuple] = {}
    in_dim = 2  # node features: constant 1 and normalized degree
    for k in range(cfg.gin_layers):
        shapes.update(_mlp_shapes([in_dim, h, h], f"gin{k}"))
        shapes[f"gin{k}.eps"] = ()
        in_dim = h
    shapes.update(_mlp_shapes([h, h, c], "assign"))
    shapes.update(_mlp_shapes([c * h, h, cfg.local_dim], "local_mu"))
    shapes.update(_mlp_shapes([c * h, h, cfg.local_dim], "local_logsig"))
    shapes.update(_mlp_shapes([h, h, cfg.global_dim], "global_mu"))
    shapes.update(_mlp_shapes([h, h, cfg.global_dim], "global_logsig"))
    shapes.update(_mlp_shapes([cfg.local_dim, h, h, cfg.n_max**2], "dec_unit"))
    shapes.update(_mlp_shapes([cfg.local_dim, h, h, cfg.n_max**2], "dec_bonds"))
    shapes.update(_mlp_shapes([cfg.global_dim, h, h, cfg.m_max**2], "dec_layout"))
    return shapes


def _output_layer_names() -> frozenset[str]:
    return frozenset(
        {
            "assign.w2", "local_mu.w2", "local_logsig.w2",
            "global_mu.w2", "global_logsig.w2",
            "dec_unit.w3", "dec_bonds.w3", "dec_layout.w3",
        }
    )


def init_params(cfg: ModelConfig, seed: int = 0) -> dict[str, Tensor]:
    """He-scaled hidden weights, zero biases and GIN self-weights.

    Head and decoder output layers start near zero so the posteriors sit
    at the prior and all decoded probabilities at 0.5; the sum readout
    over a whole graph stays bounded regardless of graph size.
    """
    rng = np.random.default_rng(seed)
    outputs = _output_layer_names()
    params = {}
    for name, shape in param_shapes(cfg).items():
        if name.endswith(".eps") or ".b" in name:
            params[name] = T.parameter(np.zeros(shape))
            continue
        fan_in = shape[0]
        scale = np.sqrt(2.0 / fan_in)
        if name in outputs:
            scale = 0.01 / np.sqrt(fan_in)
        elif name.startswith("gin") and name.endswith(".w2"):
            # damp the ~(1 + deg) gain of the sum aggregation per layer
            scale *= 0.25
        params[name] = T.parameter(rng.standard_normal(shape) * scale)
    return params


def _mlp(params: dict[str, Tensor], prefix: str, x: Tensor, layers: int) -> Tensor:
    """Apply `layers` linear maps with ReLU between them (none after the last)."""
    for i in range(1, layers + 1):
        x = T.matmul(x, params[f"{prefix}.w{i}"]) + params[f"{prefix}.b{i}"]
        if i < layers:
            x = T.relu(x)
    return x


def node_features(g: PeriodicGraph) -> np.ndarray:
    """Per-node input rows [1, deg/max_deg] over non-padding nodes."""
    adj = g.stripped
    deg = adj.sum(axis=1).astype(np.float64)
    scale = max(1.0, deg.max() if deg.size else 0.0)
    return np.stack([np.ones_like(deg), deg / scale], axis=1)


def gin_forward(params: dict[str, Tensor], cfg: ModelConfig, feats, adjacency) -> Tensor:
    """K rounds of h_v <- MLP((1+eps)h_v + sum of neighbor h_u), ReLU inside."""
    h = T.as_tensor(feats)
    a = T.as_tensor(np.asarray(adjacency, dtype=np.float64))
    if h.data.shape[0] != a.data.shape[0]:
        raise ValueError(
            f"feature rows {h.data.shape} do not align with adjacency {a.data.shape}"
        )
    for k in range(cfg.gin_layers):
        mixed = (1.0 + params[f"gin{k}.eps"]) * h + T.matmul(a, h)
        h = T.relu(_mlp(params, f"gin{k}", mixed, layers=2))
    return h


@dataclass(frozen=True)
class EncodedGraph:
    mu_local: Tensor
    logsig_local: Tensor
    mu_global: Tensor
    logsig_global: Tensor


def soft_cluster_rows(params: dict[str, Tensor], cfg: ModelConfig, h: Tensor) -> Tensor:
    """Soft-assign nodes to representative clusters and average within each.

    Rows of the result are per-cluster mean embeddings, weighted by the
    softmax assignment; soft counts are floored to keep empty clusters
    finite.
    """
    scores = _mlp(params, "assign", h, layers=2)
    soft = T.softmax_rows(scores)                      # N x C
    counts = T.clip(T.tsum(soft, axis=0), CLUSTER_COUNT_FLOOR, np.inf)
    return T.matmul(T.transpose(soft), h) / T.reshape(counts, (cfg.clusters, 1))


def encode(params: dict[str, Tensor], cfg: ModelConfig, g: PeriodicGraph) -> EncodedGraph:
    """Both posteriors from one shared backbone pass."""
    if g.num_nodes == 0:
        raise ValueError("cannot encode an empty graph")
    h = gin_forward(params, cfg, node_features(g), g.stripped)

    # local head: concatenated representative-cluster rows
    cluster_rows = soft_cluster_rows(params, cfg, h)
    flat = T.reshape(cluster_rows, (1, cfg.clusters * cfg.hidden))
    mu_l = _mlp(params, "local_mu", flat, layers=2)
    logsig_l = _mlp(params, "local_logsig", flat, layers=2)

    # global head: per-node MLP then sum readout
    mu_g = T.reshape(T.tsum(_mlp(params, "global_mu", h, layers=2), axis=0), (1, cfg.global_dim))
    logsig_g = T.reshape(
        T.tsum(_mlp(params, "global_logsig", h, layers=2), axis=0), (1, cfg.global_dim)
    )
    return EncodedGraph(mu_l, logsig_l, mu_g, logsig_g)


def local_encode(params, cfg, g: PeriodicGraph) -> tuple[Tensor, Tensor]:
    enc = encode(params, cfg, g)
    return enc.mu_local, enc.logsig_local


def global_encode(params, cfg, g: PeriodicGraph) -> tuple[Tensor, Tensor]:
    enc = encode(params, cfg, g)
    return enc.mu_global, enc.logsig_global


def reparameterize(mu: Tensor, logsig: Tensor, eta) -> Tensor:
    """z = mu + exp(logsig) * eta with eta a standard-normal draw."""
    eta = np.asarray(eta, dtype=np.float64)
    if eta.shape != mu.data.shape:
        raise ValueError(f"eta shape {eta.shape} does not match mu shape {mu.data.shape}")
    return mu + T.exp(logsig) * eta


def _hollow(n: int) -> np.ndarray:
    return 1.0 - np.eye(n)


def decode(params: dict[str, Tensor], cfg: ModelConfig, z_local, z_global) -> tuple[Tensor, Tensor, Tensor]:
    """Edge probabilities (unit, bonds, layout) at the padded bounds.

    Unit and layout probabilities are symmetrized and get a hard zero
    diagonal; the bond matrix stays asymmetric (row = lower unit).
    """
    zl = T.reshape(T.as_tensor(z_local), (1, cfg.local_dim))
    zg = T.reshape(T.as_tensor(z_global), (1, cfg.global_dim))
    unit = T.reshape(T.sigmoid(_mlp(params, "dec_unit", zl, layers=3)), (cfg.n_max, cfg.n_max))
    unit = (unit + T.transpose(unit)) * 0.5 * _hollow(cfg.n_max)
    bonds = T.reshape(T.sigmoid(_mlp(params, "dec_bonds", zl, layers=3)), (cfg.n_max, cfg.n_max))
    layout = T.reshape(T.sigmoid(_mlp(params, "dec_layout", zg, layers=3)), (cfg.m_max, cfg.m_max))
    layout = (layout + T.transpose(layout)) * 0.5 * _hollow(cfg.m_max)
    return unit, bonds, layout


def _binarize_symmetric(probs: np.ndarray, mode: str, rng: np.random.Generator) -> np.ndarray:
    size = probs.shape[0]
    out = np.zeros((size, size), dtype=np.int64)
    iu = np.triu_indices(size, k=1)
    if mode == "threshold":
        vals = (probs[iu] >= 0.5).astype(np.int64)
    else:
        vals = (rng.random(len(iu[0])) < probs[iu]).astype(np.int64)
    out[iu] = vals
    out.T[iu] = vals
    return out


def _binarize_full(probs: np.ndarray, mode: str, rng: np.random.Generator) -> np.ndarray:
    if mode == "threshold":
        return (probs >= 0.5).astype(np.int64)
    return (rng.random(probs.shape) < probs).astype(np.int64)


def _effective_size(binary: np.ndarray) -> int:
    touched = np.flatnonzero(binary.any(axis=0) | binary.any(axis=1))
    return int(touched[-1]) + 1 if touched.size else 1


def graph_from_probabilities(
    unit_p: np.ndarray,
    bonds_p: np.ndarray,
    layout_p: np.ndarray,
    mode: str,
    rng: np.random.Generator,
) -> PeriodicGraph:
    """Binarize decoded probabilities and assemble the resulting graph.

    Threshold mode takes every probability >= 0.5 as an edge; Bernoulli
    mode samples the upper triangle of the two symmetric matrices (and
    mirrors) plus every bond entry. The effective unit size / unit count
    are read off the last nonzero row, the triple is truncated there and
    assembled. All-zero probabilities degenerate to a single isolated
    node.
    """
    if mode not in ("threshold", "bernoulli"):
        raise ValueError(f"unknown mode {mode!r}, expected 'threshold' or 'bernoulli'")
    unit_bin = _binarize_symmetric(np.asarray(unit_p), mode, rng)
    bonds_bin = _binarize_full(np.asarray(bonds_p), mode, rng)
    layout_bin = _binarize_symmetric(np.asarray(layout_p), mode, rng)

    n = _effective_size(unit_bin)
    m = _effective_size(layout_bin)
    d = Decomposition(
        unit=unit_bin[:n, :n], layout=layout_bin[:m, :m], bonds=bonds_bin[:n, :n]
    )
    graph = assemble(d)
    pad = unit_bin.shape[0] * layout_bin.shape[0]
    return PeriodicGraph(
        adjacency=pad_adjacency(graph.stripped, pad),
        num_nodes=n * m,
        n=n,
        m=m,
        decomposition=d,
    )


def sample_graph(
    params: dict[str, Tensor],
    cfg: ModelConfig,
    z: LatentPair | None = None,
    mode: str = "bernoulli",
    seed: int | None = None,
    rng: np.random.Generator | None = None,
) -> PeriodicGraph:
    """Decode a latent point (drawn from the prior when not given) into a
    concrete periodic graph; see graph_from_probabilities for the
    binarization rules."""
    if rng is None:
        rng = np.random.default_rng(seed)
    if z is None:
        z = LatentPair(
            local=rng.standard_normal(cfg.local_dim),
            global_=rng.standard_normal(cfg.global_dim),
        )
    with T.no_grad():
        unit_p, bonds_p, layout_p = decode(params, cfg, z.local, z.global_)
    return graph_from_probabilities(unit_p.data, bonds_p.data, layout_p.data, mode, rng)


def save_params(path: str | Path, cfg: ModelConfig, params: dict[str, Tensor], extra: dict | None = None) -> None:
    """Write a checkpoint: config JSON plus named float64 arrays."""
    arrays = {f"param:{k}": v.data for k, v in params.items()}
    meta = {"config": asdict(cfg)}
    if extra:
        meta.update(extra)
    np.savez(path, __meta__=json.dumps(meta), **arrays)


def load_params(path: str | Path) -> tuple[ModelConfig, dict[str, Tensor], dict]:
    """Read a checkpoint; shape mismatches against the config are rejected."""
    with np.load(path, allow_pickle=False) as archive:
        meta = json.loads(str(archive["__meta__"]))
        cfg = ModelConfig(**meta.pop("config"))
        expected = param_shapes(cfg)
        params = {}
        mismatches = []
        for name, shape in expected.items():
            key = f"param:{name}"
            if key not in archive:
                mismatches.append(f"{name}: missing")
                continue
            arr = archive[key].astype(np.float64)
            if arr.shape != shape:
                mismatches.append(f"{name}: stored {arr.shape}, expected {shape}")
                continue
            params[name] = T.parameter(arr)
        if mismatches:
            raise ValueError("checkpoint does not match its config: " + "; ".join(mismatches))
    return cfg, params, meta
