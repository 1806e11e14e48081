"""tfscope: joint characterization of spatiotemporal data manifolds.

One linear (PC/EOF) and two nonlinear (Laplacian Eigenmaps, PC(t-SNE))
dimensionality reductions over space-time cubes, plus temporal-endmember
suggestion and constrained temporal mixture-model inversion.
"""

__version__ = "0.1.0"

from .cube import (
    DataCube,
    SampleMatrix,
    StandardizationSpec,
    flatten,
    load_cube,
    rng_from_seed,
    save_cube,
    subsample,
)
from .laplacian import LeEmbedding, NeighborGraph, build_knn_graph, laplacian, le_embed
from .pca import LinearDecomposition, pca_eof, pca_eof_svd, project, reconstruct
from .pipeline import (
    CharacterizationConfig,
    JointCharacterization,
    SeparabilityReport,
    characterize,
    config_from_dict,
    export_characterization,
    render_map,
    transformed_divergence,
)
from .synth import SignalSet, WeightField, eval_signals, generate_toy_cube, sample_simplex_weights
from .tsne import PcTsneResult, TsneParams, TsneRealization, min_divergence_realization, pc_tsne, tsne_run
from .unmix import (
    EndmemberSet,
    FractionResult,
    endmembers_from_samples,
    endmembers_from_signatures,
    extremity_counts,
    misfit_summary,
    suggest_endmembers,
    unmix,
)

__all__ = [
    "CharacterizationConfig",
    "DataCube",
    "EndmemberSet",
    "FractionResult",
    "JointCharacterization",
    "LeEmbedding",
    "LinearDecomposition",
    "NeighborGraph",
    "PcTsneResult",
    "SampleMatrix",
    "SeparabilityReport",
    "SignalSet",
    "StandardizationSpec",
    "TsneParams",
    "TsneRealization",
    "WeightField",
    "build_knn_graph",
    "characterize",
    "config_from_dict",
    "endmembers_from_samples",
    "endmembers_from_signatures",
    "eval_signals",
    "export_characterization",
    "extremity_counts",
    "flatten",
    "generate_toy_cube",
    "laplacian",
    "le_embed",
    "load_cube",
    "min_divergence_realization",
    "misfit_summary",
    "pc_tsne",
    "pca_eof",
    "pca_eof_svd",
    "project",
    "reconstruct",
    "render_map",
    "rng_from_seed",
    "sample_simplex_weights",
    "save_cube",
    "subsample",
    "suggest_endmembers",
    "transformed_divergence",
    "tsne_run",
    "unmix",
]
