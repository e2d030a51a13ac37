//! Evaluation metrics and protocols.

pub mod align;
pub mod error;
pub mod interp;
pub mod metrics;
pub mod report;
pub mod subsets;

pub use align::{align_similarity, Similarity};
pub use error::EvalError;
pub use interp::interpolate_poses;
pub use metrics::{
    add_adds, auc, interaction_metric, mpjpe_suite, AddAdds, InteractionAuc, MpjpeSuite,
    AUC_MAX_THRESHOLD,
};
pub use report::{EvalReport, SequenceMetrics, SubsetMetrics};
pub use subsets::{split_subsets, SubsetMasks};
