"""Training-free online refinement of vision-language predictions.

A dynamic cache of prototype embeddings, spatial scales and adaptive class
priors turns a frozen model's per-proposal outputs into posterior-corrected
predictions, entirely at inference time.  The package operates on
pre-extracted embedding streams; see ``bayescache.io`` for the file formats
and ``bayescache.cli`` for the command-line surface.
"""

from .cache import (
    CacheEntry,
    CacheState,
    adapt,
    best_match,
    confidence_filter,
    create_entry,
    update_entry,
)
from .engine import (
    cache_posterior,
    combined_similarity,
    feature_similarity,
    fuse,
    match_distribution,
    scale_similarity,
    shannon_entropy,
    sigmoid,
    softmax,
)
from .oracle import oracle_posterior
from .pipeline import (
    ImageResult,
    ProposalOutcome,
    SessionResult,
    VARIANTS,
    process_image,
    run_session,
    run_variant_suite,
    variant_config,
)
from .records import (
    AdaptConfig,
    Box,
    ImageRecord,
    PredictionTriple,
    ProposalRecord,
    check_distribution,
    check_feature,
    l2_normalize,
    validate_record,
)
from .surrogate import (
    PrototypeBank,
    ShiftSpec,
    clip_init_pred,
    concentrated_skew,
    gdino_init_pred,
    generate_stream,
    make_prototype_bank,
)

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig", "Box", "CacheEntry", "CacheState", "ImageRecord",
    "ImageResult", "PredictionTriple", "ProposalOutcome", "ProposalRecord",
    "PrototypeBank", "SessionResult", "ShiftSpec", "VARIANTS", "adapt",
    "best_match", "cache_posterior", "check_distribution", "check_feature",
    "clip_init_pred", "combined_similarity", "concentrated_skew",
    "confidence_filter", "create_entry", "feature_similarity", "fuse",
    "gdino_init_pred", "generate_stream", "l2_normalize",
    "make_prototype_bank", "match_distribution", "oracle_posterior",
    "process_image", "run_session", "run_variant_suite", "scale_similarity",
    "shannon_entropy", "sigmoid", "softmax", "update_entry",
    "validate_record", "variant_config",
]
