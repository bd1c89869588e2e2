use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::kendall::{pair_counts, tau_b_from_counts, tau_c_from_counts, PairCounts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Winner {
    A,
    B,
}

/// Pair categories: human-correct, human-incorrect, human-machine,
/// machine-machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    HC,
    HI,
    HM,
    MM,
}

impl Category {
    pub const ALL: [Category; 4] = [Category::HC, Category::HI, Category::HM, Category::MM];
}

/// One caption with a metric score and a normalized human score.
#[derive(Debug, Clone, PartialEq)]
pub struct JudgedCaption {
    pub instance_id: String,
    pub metric_score: f64,
    pub human_score: f64,
    pub raw_human_score: f64,
    pub dataset_tag: String,
}

/// Two candidate captions for one image and the human preference.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptionPair {
    pub instance_id: String,
    pub score_a: f64,
    pub score_b: f64,
    pub human_winner: Winner,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AccuracyBreakdown {
    #[serde(rename = "HC", skip_serializing_if = "Option::is_none")]
    pub hc: Option<f64>,
    #[serde(rename = "HI", skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(rename = "HM", skip_serializing_if = "Option::is_none")]
    pub hm: Option<f64>,
    #[serde(rename = "MM", skip_serializing_if = "Option::is_none")]
    pub mm: Option<f64>,
    /// Fraction correct over all rows.
    pub mean: f64,
}

impl AccuracyBreakdown {
    pub fn category(&self, c: Category) -> Option<f64> {
        match c {
            Category::HC => self.hc,
            Category::HI => self.hi,
            Category::HM => self.hm,
            Category::MM => self.mm,
        }
    }
}

/// Result of a correlation or ranking-accuracy evaluation.
///
/// Serializes as `{"dataset","n","tau_b","tau_c","accuracy"}` with absent
/// fields omitted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorrelationReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    pub n: usize,
    #[serde(skip)]
    pub counts: Option<PairCounts>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<AccuracyBreakdown>,
}

/// Tau-b and tau-c between metric scores and human scores.
pub fn correlation_report(rows: &[JudgedCaption], dataset: Option<&str>) -> Result<CorrelationReport> {
    let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.metric_score, r.human_score)).collect();
    let counts = pair_counts(&pairs)?;
    Ok(CorrelationReport {
        dataset: dataset.map(str::to_string),
        n: rows.len(),
        tau_b: Some(tau_b_from_counts(&counts)?),
        tau_c: Some(tau_c_from_counts(&counts)?),
        counts: Some(counts),
        accuracy: None,
    })
}

/// Credit for one pair: 1 when the metric prefers the human winner, 0.5 on
/// an exact score tie.
pub fn pair_credit<T: Scalar>(score_a: T, score_b: T, winner: Winner) -> f64 {
    if score_a == score_b {
        return 0.5;
    }
    let metric_winner = if score_a > score_b { Winner::A } else { Winner::B };
    if metric_winner == winner {
        1.0
    } else {
        0.0
    }
}

/// Per-category and overall fraction of pairs where the metric agrees
/// with the human choice.
pub fn pairwise_accuracy(rows: &[CaptionPair]) -> Result<CorrelationReport> {
    if rows.is_empty() {
        return Err(Error::InsufficientData { needed: 1, found: 0 });
    }
    if rows.iter().any(|r| !(r.score_a.is_finite() && r.score_b.is_finite())) {
        return Err(Error::InvalidInput("non-finite pair score".into()));
    }
    let mut per: BTreeMap<Category, (f64, usize)> = BTreeMap::new();
    let mut total = 0.0;
    for r in rows {
        let credit = pair_credit(r.score_a, r.score_b, r.human_winner);
        let e = per.entry(r.category).or_insert((0.0, 0));
        e.0 += credit;
        e.1 += 1;
        total += credit;
    }
    let frac = |c: Category| per.get(&c).map(|(s, k)| s / *k as f64);
    Ok(CorrelationReport {
        dataset: None,
        n: rows.len(),
        counts: None,
        tau_b: None,
        tau_c: None,
        accuracy: Some(AccuracyBreakdown {
            hc: frac(Category::HC),
            hi: frac(Category::HI),
            hm: frac(Category::HM),
            mm: frac(Category::MM),
            mean: total / rows.len() as f64,
        }),
    })
}
