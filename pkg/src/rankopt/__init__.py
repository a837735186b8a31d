"""rankopt: preference-driven latent search.

Optimizes latent vectors through an (m,k)-ranking oracle (human or
scripted), keeps a store of representative conditions with their optimized
latent priors, and samples new latents for a query by cosine-similarity
selection. A deterministic toy decoder renders latents as 2D paths so
sessions can be ranked visually end to end.
"""

from .decoder import Trajectory, decode, fourier_coefficients, latent_path_matrix
from .errors import (
    ConfigError,
    DegenerateFeedbackError,
    FeedbackError,
    NotFoundError,
    ProtocolError,
    RankOptError,
    UnsupportedFeedbackError,
)
from .optimizer import (
    CandidateSet,
    ComparisonDag,
    FeedbackKind,
    OptimizerConfig,
    OptimizerState,
    RankFeedback,
    RankingOracle,
    RoundRecord,
    ScriptedResult,
    Stage,
    StopRule,
    accept_and_exit,
    apply_feedback,
    best_only,
    build_comparison_dag,
    estimate_gradient,
    full_ranking,
    init_refinement_session,
    init_session,
    run_scripted,
    stage1_step,
    stage2_step,
    transition_to_stage2,
    weighted_reference,
)
from .oracles import (
    EmbeddingQuadraticObjective,
    RosenbrockObjective,
    ScriptedOracle,
    SphereObjective,
    TrajectoryDistanceObjective,
    evaluate,
    objective_from_spec,
    projection_matrix,
)
from .priors import (
    PriorStore,
    RepresentativeEntry,
    attach_optimum,
    cosine_similarity,
    kmeans_representatives,
    lloyd_kmeans,
    load_store,
    read_embeddings_jsonl,
    sample_latent,
    save_store,
    select_prior,
    toy_embed,
    upsert_entry,
)
from .transcript import (
    SessionStart,
    feedback_from_wire,
    feedback_to_wire,
    read_transcript,
    record_to_wire,
    replay_transcript,
    transcript_lines,
    write_transcript,
)

__version__ = "0.1.0"

__all__ = [
    "CandidateSet",
    "ComparisonDag",
    "ConfigError",
    "DegenerateFeedbackError",
    "EmbeddingQuadraticObjective",
    "FeedbackError",
    "FeedbackKind",
    "NotFoundError",
    "OptimizerConfig",
    "OptimizerState",
    "PriorStore",
    "ProtocolError",
    "RankFeedback",
    "RankOptError",
    "RankingOracle",
    "RepresentativeEntry",
    "RosenbrockObjective",
    "RoundRecord",
    "ScriptedOracle",
    "ScriptedResult",
    "SessionStart",
    "SphereObjective",
    "Stage",
    "StopRule",
    "Trajectory",
    "TrajectoryDistanceObjective",
    "UnsupportedFeedbackError",
    "accept_and_exit",
    "apply_feedback",
    "attach_optimum",
    "best_only",
    "build_comparison_dag",
    "cosine_similarity",
    "decode",
    "estimate_gradient",
    "evaluate",
    "feedback_from_wire",
    "feedback_to_wire",
    "fourier_coefficients",
    "full_ranking",
    "init_refinement_session",
    "init_session",
    "kmeans_representatives",
    "latent_path_matrix",
    "lloyd_kmeans",
    "load_store",
    "objective_from_spec",
    "projection_matrix",
    "read_embeddings_jsonl",
    "read_transcript",
    "record_to_wire",
    "replay_transcript",
    "run_scripted",
    "sample_latent",
    "save_store",
    "select_prior",
    "stage1_step",
    "stage2_step",
    "toy_embed",
    "transcript_lines",
    "transition_to_stage2",
    "upsert_entry",
    "weighted_reference",
    "write_transcript",
]
