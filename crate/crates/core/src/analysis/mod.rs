//! Post-hoc evaluation: linear cross-entropy benchmarking, confidence and
//! accuracy aggregation over sets, pooling-attention interpretation with
//! closed-loop expectations, and sample-complexity estimates backed by a
//! one-sided t-test.

pub mod attention;
pub mod complexity;
pub mod stats;
pub mod xeb;

pub use attention::{loop_stats, pooling_attention_report, AttentionReport, LoopStat};
pub use complexity::{minimal_passing_sets, sample_complexity, SampleComplexity};
pub use stats::{
    accuracy, average_confidence, crossing_point, mean_stderr, spearman, t_test_greater, TTest,
};
pub use xeb::{xeb_estimate, xeb_exact, xeb_exact_from_probs, XebEstimate};
