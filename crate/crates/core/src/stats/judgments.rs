//! JSON Lines loaders for human judgment files.
//!
//! * `expert` / `composite`: `{"id","image","caption","human_scores":[..],"scale":[lo,hi]}`
//! * `crowdflower`: `{"id","image","caption","yes":k,"total":t}`
//! * `pairs`: `{"id","image","caption_a","caption_b","winner":"A"|"B","category":"HC"|"HI"|"HM"|"MM"}`

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::stats::report::{Category, Winner};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JudgmentFormat {
    /// Ratings on 1 (irrelevant) .. 4 (perfect match).
    Expert,
    /// Proportion of "yes" votes.
    Crowdflower,
    /// Ratings on 1 .. 5.
    Composite,
    /// Two-caption preference rows.
    Pairs,
}

impl JudgmentFormat {
    pub fn name(self) -> &'static str {
        match self {
            JudgmentFormat::Expert => "expert",
            JudgmentFormat::Crowdflower => "crowdflower",
            JudgmentFormat::Composite => "composite",
            JudgmentFormat::Pairs => "pairs",
        }
    }

    fn default_scale(self) -> Option<(f64, f64)> {
        match self {
            JudgmentFormat::Expert => Some((1.0, 4.0)),
            JudgmentFormat::Composite => Some((1.0, 5.0)),
            _ => None,
        }
    }
}

impl FromStr for JudgmentFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "expert" => Ok(JudgmentFormat::Expert),
            "crowdflower" | "cf" => Ok(JudgmentFormat::Crowdflower),
            "composite" => Ok(JudgmentFormat::Composite),
            "pairs" | "pascal" => Ok(JudgmentFormat::Pairs),
            other => Err(Error::InvalidInput(format!("unknown judgment format {other:?}"))),
        }
    }
}

/// A human score for one caption, normalized to `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HumanJudgment {
    pub instance_id: String,
    pub human_score: f64,
    /// Annotator mean before normalization (vote proportion for crowdflower).
    pub raw_human_score: f64,
    pub dataset_tag: String,
}

/// Human preference between two captions of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct PairJudgment {
    pub instance_id: String,
    pub winner: Winner,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Judgments {
    Scored(Vec<HumanJudgment>),
    Pairs(Vec<PairJudgment>),
}

impl Judgments {
    pub fn len(&self) -> usize {
        match self {
            Judgments::Scored(v) => v.len(),
            Judgments::Pairs(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Deserialize)]
struct RatedRow {
    id: String,
    #[serde(default)]
    #[allow(dead_code)]
    image: Option<String>,
    #[serde(default)]
    #[allow(dead_code)]
    caption: Option<String>,
    human_scores: Vec<f64>,
    scale: Option<[f64; 2]>,
}

#[derive(Deserialize)]
struct VoteRow {
    id: String,
    #[serde(default)]
    #[allow(dead_code)]
    image: Option<String>,
    #[serde(default)]
    #[allow(dead_code)]
    caption: Option<String>,
    yes: u64,
    total: u64,
}

#[derive(Deserialize)]
struct PairRow {
    id: String,
    #[serde(default)]
    #[allow(dead_code)]
    image: Option<String>,
    #[serde(default)]
    #[allow(dead_code)]
    caption_a: Option<String>,
    #[serde(default)]
    #[allow(dead_code)]
    caption_b: Option<String>,
    winner: Winner,
    category: Category,
}

fn rows<R: DeserializeOwned>(path: &Path, text: &str) -> Result<Vec<(usize, R)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(line).map_err(|e| Error::Schema {
            file: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, row));
    }
    Ok(out)
}

/// Parses judgment rows from JSON Lines text; `path` is used in errors.
pub fn parse_judgments(path: &Path, text: &str, format: JudgmentFormat) -> Result<Judgments> {
    let schema = |line: usize, message: String| Error::Schema {
        file: path.to_path_buf(),
        line,
        message,
    };
    let tag = format.name().to_string();
    match format {
        JudgmentFormat::Expert | JudgmentFormat::Composite => {
            let mut out = Vec::new();
            for (line, r) in rows::<RatedRow>(path, text)? {
                let (lo, hi) = r
                    .scale
                    .map(|[lo, hi]| (lo, hi))
                    .or(format.default_scale())
                    .unwrap();
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(schema(line, format!("invalid scale [{lo}, {hi}]")));
                }
                if r.human_scores.is_empty() {
                    return Err(schema(line, "human_scores is empty".into()));
                }
                if let Some(s) = r.human_scores.iter().find(|s| !(**s >= lo && **s <= hi)) {
                    return Err(schema(line, format!("score {s} outside declared range [{lo}, {hi}]")));
                }
                let mean = r.human_scores.iter().sum::<f64>() / r.human_scores.len() as f64;
                out.push(HumanJudgment {
                    instance_id: r.id,
                    human_score: ((mean - lo) / (hi - lo)).clamp(0.0, 1.0),
                    raw_human_score: mean,
                    dataset_tag: tag.clone(),
                });
            }
            Ok(Judgments::Scored(out))
        }
        JudgmentFormat::Crowdflower => {
            let mut out = Vec::new();
            for (line, r) in rows::<VoteRow>(path, text)? {
                if r.total == 0 || r.yes > r.total {
                    return Err(schema(line, format!("invalid vote count {}/{}", r.yes, r.total)));
                }
                let p = r.yes as f64 / r.total as f64;
                out.push(HumanJudgment {
                    instance_id: r.id,
                    human_score: p,
                    raw_human_score: p,
                    dataset_tag: tag.clone(),
                });
            }
            Ok(Judgments::Scored(out))
        }
        JudgmentFormat::Pairs => Ok(Judgments::Pairs(
            rows::<PairRow>(path, text)?
                .into_iter()
                .map(|(_, r)| PairJudgment {
                    instance_id: r.id,
                    winner: r.winner,
                    category: r.category,
                })
                .collect(),
        )),
    }
}

pub fn load_judgments(path: impl AsRef<Path>, format: JudgmentFormat) -> Result<Judgments> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_judgments(path, &text, format)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, f: JudgmentFormat) -> Result<Judgments> {
        parse_judgments(Path::new("j.jsonl"), text, f)
    }

    fn scored(j: Judgments) -> Vec<HumanJudgment> {
        match j {
            Judgments::Scored(v) => v,
            Judgments::Pairs(_) => panic!("expected scored rows"),
        }
    }

    #[test]
    fn expert_top_score_maps_to_one() {
        let j = scored(
            parse(
                r#"{"id":"a","image":"x.jpg","caption":"c","human_scores":[4],"scale":[1,4]}"#,
                JudgmentFormat::Expert,
            )
            .unwrap(),
        );
        assert_eq!(j[0].human_score, 1.0);
        assert_eq!(j[0].raw_human_score, 4.0);
    }

    #[test]
    fn annotators_are_averaged_before_normalizing() {
        let j = scored(parse(r#"{"id":"a","human_scores":[1,2,4]}"#, JudgmentFormat::Expert).unwrap());
        assert!((j[0].human_score - (7.0 / 3.0 - 1.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn crowdflower_vote_proportion() {
        let j = scored(parse(r#"{"id":"a","yes":2,"total":3}"#, JudgmentFormat::Crowdflower).unwrap());
        assert!((j[0].human_score - 2.0 / 3.0).abs() < 1e-15);
        assert!(parse(r#"{"id":"a","yes":4,"total":3}"#, JudgmentFormat::Crowdflower).is_err());
    }

    #[test]
    fn composite_minimum_is_zero() {
        let j = scored(parse(r#"{"id":"a","human_scores":[1],"scale":[1,5]}"#, JudgmentFormat::Composite).unwrap());
        assert_eq!(j[0].human_score, 0.0);
    }

    #[test]
    fn out_of_range_reports_line_number() {
        let text = "{\"id\":\"a\",\"human_scores\":[2]}\n\n{\"id\":\"b\",\"human_scores\":[9]}\n";
        let err = parse(text, JudgmentFormat::Expert).unwrap_err();
        assert!(matches!(err, Error::Schema { line: 3, .. }), "{err}");
    }

    #[test]
    fn malformed_json_reports_line_number() {
        let err = parse("{\"id\":\"a\",\"winner\":\"C\",\"category\":\"HC\"}", JudgmentFormat::Pairs).unwrap_err();
        assert!(matches!(err, Error::Schema { line: 1, .. }));
    }

    #[test]
    fn pairs_rows() {
        let j = parse(
            r#"{"id":"p","image":"i","caption_a":"a","caption_b":"b","winner":"B","category":"MM"}"#,
            JudgmentFormat::Pairs,
        )
        .unwrap();
        assert_eq!(
            j,
            Judgments::Pairs(vec![PairJudgment {
                instance_id: "p".into(),
                winner: Winner::B,
                category: Category::MM
            }])
        );
    }
}
