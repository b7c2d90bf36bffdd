//! IoU metrics, the ablation matrix and comparison reports.

mod mappers;
mod metrics;
mod overlay;
mod report;
mod run;
mod variant;

pub use mappers::{
    compare_mappers, label_satisfied, MapperColumn, MapperComparison, MapperRow, PROXY_TARGETS, WORD2VEC_EXPECTED,
    WORDNET_EXPECTED,
};
pub use metrics::{binary_iou, per_class_miou, per_class_miou_masks, IouCounts, PartitionMetrics};
pub use overlay::{render_overlay, save_overlay};
pub use report::{reference_for, reference_rows, AblationReport, MetricsReport, ReferenceRow, RunMetadata};
pub use run::{
    evaluate_partition, run_ablation, train_variant, CheckpointDir, EpisodeResult, ModelProvider, TrainPlan,
};
pub use variant::{ChannelSource, VariantTag};
