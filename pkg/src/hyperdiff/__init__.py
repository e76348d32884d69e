"""Hyperbolic diffusion embeddings and distances for hierarchical data."""

from hyperdiff.diffusion import (
    MultiScaleDensities,
    SpectralForm,
    fractional_power,
    multiscale_densities,
    spectral_decompose,
)
from hyperdiff.errors import DataError, NumericalError
from hyperdiff.evaluation import (
    EvalReport,
    SplitSpec,
    average_distortion,
    balanced_tree,
    gromov_delta,
    mean_average_precision,
    medoid_classify,
    random_tree,
    shortest_paths,
)
from hyperdiff.hde import (
    HalfSpacePoint,
    HdeEmbedding,
    default_max_scale,
    embed,
    half_space_distance,
    hdd_matrix,
    hdd_pair,
    variant_distance,
)
from hyperdiff.ingest import (
    FeatureMatrix,
    WeightedGraph,
    pairwise_distances,
    read_edge_list,
    read_feature_matrix,
    read_labels,
    write_edge_list,
)
from hyperdiff.kernel import (
    DiffusionOperator,
    epsilon_median,
    gaussian_affinity,
    graph_laplacian,
    heat_kernel_operator,
    normalize_twice,
)

__version__ = "0.1.0"

__all__ = [
    "DataError",
    "DiffusionOperator",
    "EvalReport",
    "FeatureMatrix",
    "HalfSpacePoint",
    "HdeEmbedding",
    "MultiScaleDensities",
    "NumericalError",
    "SpectralForm",
    "SplitSpec",
    "WeightedGraph",
    "average_distortion",
    "balanced_tree",
    "default_max_scale",
    "embed",
    "epsilon_median",
    "fractional_power",
    "gaussian_affinity",
    "graph_laplacian",
    "gromov_delta",
    "half_space_distance",
    "hdd_matrix",
    "hdd_pair",
    "heat_kernel_operator",
    "mean_average_precision",
    "medoid_classify",
    "multiscale_densities",
    "normalize_twice",
    "pairwise_distances",
    "random_tree",
    "read_edge_list",
    "read_feature_matrix",
    "read_labels",
    "shortest_paths",
    "spectral_decompose",
    "variant_distance",
    "write_edge_list",
]
