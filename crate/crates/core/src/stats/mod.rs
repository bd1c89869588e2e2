//! Agreement statistics between metric scores and human judgments.

pub mod judgments;
pub mod kendall;
pub mod report;

pub use judgments::{load_judgments, parse_judgments, HumanJudgment, JudgmentFormat, Judgments, PairJudgment};
pub use kendall::{kendall_tau_b, kendall_tau_c, pair_counts, PairCounts};
pub use report::{
    correlation_report, pairwise_accuracy, AccuracyBreakdown, CaptionPair, Category, CorrelationReport,
    JudgedCaption, Winner,
};
