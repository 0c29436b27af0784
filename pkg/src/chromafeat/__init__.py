"""chromafeat: sparse feature compression via co-occurrence graph coloring."""

from .dataset import (
    Example,
    SparseDataset,
    parse_libsvm,
    serialize_libsvm,
    chronological_split,
    split_at,
    hash_split,
    detect_dense,
)
from .graph import (
    CooccurrenceGraph,
    EdgeHistogram,
    EdgeCounts,
    build_cooccurrence,
    build_thresholded,
    count_edges,
    to_adjacency,
    degree_stats,
)
from .coloring import (
    Coloring,
    FilterResult,
    greedy_color,
    largest_first_order,
    filter_high_degree,
    glauber_sample,
    combine_filtered_coloring,
    check_proper,
)
from .fidelity import (
    good_turing,
    collision_count,
    new_edge_count,
    unseen_feature_count,
    required_colors,
    build_fidelity_report,
)
from .encoders import (
    ColorStats,
    Encoder,
    EncodedDataset,
    SplitterSolution,
    chromatic_view,
    collect_color_stats,
    mutual_information,
    submodular_compress,
    sorting_heuristic_compress,
    target_encode,
    frequency_truncate,
    cl_frequency_truncate,
    hashing_trick,
    encoder_from_solution,
    encode_dataset,
    transform,
)
from .linear import LinearModel, train_logistic, log_loss, accuracy
from .synthetic import SyntheticConfig, generate

__version__ = "0.1.0"
