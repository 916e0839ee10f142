"""Generative modeling of periodic graphs with a disentangled variational autoencoder."""

__version__ = "0.1.0"

from .pgraph import (
    Decomposition,
    PeriodicGraph,
    StructureMatrices,
    assemble,
    avg_clustering,
    bfs_canonical_order,
    build_structure,
    decompose,
    density,
)
from .datagen import (
    DatasetManifest,
    DatasetRecord,
    generate_dataset,
    load_dataset,
    make_global,
    make_neighborhood,
    make_unit,
    save_dataset,
)
from .model import (
    LatentPair,
    ModelConfig,
    decode,
    encode,
    init_params,
    load_params,
    reparameterize,
    sample_graph,
    save_params,
)
from .objective import LossBreakdown, LossWeights, contrastive_loss, kl_loss, recon_loss, total_loss
from .train import TrainConfig, resume, train
from .evaluate import (
    EvalReport,
    bfs_stability,
    disentanglement_score,
    kld_metric,
    latent_traversal,
    novelty,
    uniqueness,
)
