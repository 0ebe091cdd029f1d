"""Homophily of egocentric communities: overlap statistics, map-equation
community detection, first-appearance order statistics and a growth model."""

from .community import (
    CommunityAssignment,
    codelength,
    community_size_histogram,
    detect_communities,
    optimize_partition,
)
from .features import (
    MISSING,
    FeatureDef,
    FeatureSchema,
    Profile,
    link_overlap,
    subset_overlap,
    trait_match,
)
from .graph import (
    EgoFilter,
    EgoNetwork,
    SocialGraph,
    build_graph,
    extract_ego_network,
    filter_egos,
    ingest_edges,
    ingest_profiles,
    load_store,
    save_store,
)
from .metrics import (
    BinnedCurve,
    appearance_order_curve,
    community_overlap_curve,
    ego_overlap_curve,
)
from .model import (
    ModelConfig,
    OverlapModel,
    local_extrema,
    model_community_overlap,
    model_order_overlap,
    moving_average,
    sample_community_sizes,
    simulate_ego,
    simulate_ensemble,
)
from .orderstats import (
    FirstAppearanceSample,
    first_appearance_orders,
    fit_exponential_scale,
    geometric_pcm,
    geometric_scale,
    pcm_distribution,
)
from .synth import SynthConfig, generate_population

__version__ = "0.1.0"
