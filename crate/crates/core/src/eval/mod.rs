//! Held-out evaluation: per-category QA with and without introspection,
//! editing scores, self-evaluation agreement, and report export.

mod edit;
mod judge;
mod report;
mod suite;
mod t2i;

pub use edit::{eval_edit, EditResult, EditScores};
pub use judge::{consistency_ratio, gen_labeled_pairs, reason_accuracy, LabeledPair};
pub use report::{load_report, write_report, EvalReport, ReportBuilder};
pub use suite::EvalSuite;
pub use t2i::{eval_t2i, AhaMode, PromptResult, T2iFragment, T2iScores};
