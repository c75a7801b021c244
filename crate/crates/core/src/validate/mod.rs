//! Stability-based model selection and validation: ARI, the resampling
//! stability search, consensus aggregation, local stability,
//! generalizability, threshold sensitivity and tag composition.

mod ari;
mod consensus;
mod generalize;
mod matching;
mod stability;
mod sweep;

pub use ari::ari;
pub use consensus::{
    consensus, consensus_from_labelings, consensus_labels, local_stability, write_consensus_csv,
    write_local_stability_csv, ConsensusMatrix, ConsensusOptions, Labeling, LocalStability,
};
pub use generalize::{
    cluster_precisions, generalizability, generalizability_grid, memorizing_forest, ClusterPrecision,
    GeneralizabilityReport, GeneralizabilitySummary, ReferenceClusterScore,
};
pub use matching::{contingency, hungarian_max, match_clusters, match_clusters_in, ClusterMatching};
pub use stability::{
    select_model, stability_search, stability_search_matrices, stability_search_views, write_iterates_csv,
    write_stability_csv, PipelineView, RefitPipeline, Selection, StabilityCell, StabilityIterate, StabilityParams,
    StabilityTable,
};
pub use sweep::{
    consensus_partition, gc_composition, sensitivity_sweep, sweep_settings, write_composition_csv, write_sweep_csv,
    Composition, CompositionEntry, SweepRow, SweepSetting,
};
