//! File-level operations behind the `camscore` command line.
//!
//! Scores files are JSON Lines as written by [`cmd_batch`]: one object per
//! instance with an `"id"` and numeric fields (`l_pix` .. `l_dep`, optional
//! `camscore`). Rows carrying an `"error"` are ignored by the readers. For
//! ranking accuracy the two captions of pair `p` are looked up as `p#A` and
//! `p#B`.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::aggregator::{load_model, save_model, train, AggregatorModel, TrainConfig, TrainRecord};
use crate::bundle_io::{load_bundle, save_bundle, MANIFEST_FILE};
use crate::data::SubScores;
use crate::error::{Error, Result};
use crate::pipeline::{score_pair, ScoreConfig};
use crate::stats::{
    correlation_report, load_judgments, pairwise_accuracy, CaptionPair, CorrelationReport, JudgedCaption,
    JudgmentFormat, Judgments,
};
use crate::synthetic::{perturb_scene, random_scene, render_scene, Perturbation, SceneSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest share of judgment ids allowed to lack a score row.
pub const MAX_UNMATCHED_FRACTION: f64 = 0.05;

/// Default canvas side for `--random` scenes.
pub const DEFAULT_CANVAS: usize = 128;

/// Record of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub inputs: Vec<String>,
    pub output: Option<String>,
    pub version: String,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn start(command: &str) -> (Self, Instant) {
        (
            Self {
                command: command.to_string(),
                config: BTreeMap::new(),
                inputs: Vec::new(),
                output: None,
                version: VERSION.to_string(),
                wall_time_s: 0.0,
            },
            Instant::now(),
        )
    }

    pub fn finish(mut self, started: Instant) -> Self {
        self.wall_time_s = started.elapsed().as_secs_f64();
        self
    }
}

/// Sub-scores of one instance, plus the aggregate when a model was given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub id: Option<String>,
    pub l_pix: f64,
    pub l_sem: f64,
    pub l_obj: f64,
    pub l_ciou: f64,
    pub l_dep: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub camscore: Option<f64>,
}

impl ScoreRow {
    fn new(id: Option<String>, s: &SubScores<f64>, camscore: Option<f64>) -> Self {
        Self {
            id,
            l_pix: s.l_pix,
            l_sem: s.l_sem,
            l_obj: s.l_obj,
            l_ciou: s.l_ciou,
            l_dep: s.l_dep,
            camscore,
        }
    }

    pub fn sub_scores(&self) -> SubScores<f64> {
        SubScores::from_array([self.l_pix, self.l_sem, self.l_obj, self.l_ciou, self.l_dep])
    }
}

fn model_error(e: Error) -> Error {
    match e {
        Error::Model(_) => e,
        other => Error::Model(other.to_string()),
    }
}

/// Loads a model file; every failure is reported as a model error.
pub fn read_model(path: &Path) -> Result<AggregatorModel<f64>> {
    load_model(path).map_err(model_error)
}

fn score_paths(
    ori: &Path,
    gen: &Path,
    cfg: &ScoreConfig<f64>,
    model: Option<&AggregatorModel<f64>>,
    id: Option<String>,
) -> Result<ScoreRow> {
    let o = load_bundle::<f64>(ori)?;
    let g = load_bundle::<f64>(gen)?;
    let s = score_pair(&o, &g, cfg)?;
    let camscore = model.map(|m| m.forward(&s)).transpose().map_err(model_error)?;
    Ok(ScoreRow::new(id, &s, camscore))
}

pub fn cmd_score(ori: &Path, gen: &Path, cfg: &ScoreConfig<f64>, model: Option<&Path>) -> Result<ScoreRow> {
    let model = model.map(read_model).transpose()?;
    score_paths(ori, gen, cfg, model.as_ref(), None)
}

#[derive(Debug, Deserialize)]
struct PairLine {
    id: String,
    ori: PathBuf,
    gen: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum BatchRow {
    Scored(ScoreRow),
    Failed { id: String, error: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BatchSummary {
    pub rows: usize,
    pub errors: usize,
}

/// Scores every `{"id","ori","gen"}` line of `pairs_file`. Relative bundle
/// paths resolve against the pairs file's directory. Failures stay in their
/// own row; unparsable lines get the id `line:<n>`.
pub fn batch_rows(
    pairs_file: &Path,
    cfg: &ScoreConfig<f64>,
    model: Option<&AggregatorModel<f64>>,
    parallelism: usize,
) -> Result<Vec<BatchRow>> {
    let text = fs::read_to_string(pairs_file).map_err(|e| Error::io(pairs_file, e))?;
    let base = pairs_file.parent().unwrap_or(Path::new(""));
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l))
        .collect();
    let work = |&(n, line): &(usize, &str)| -> BatchRow {
        let pair: PairLine = match serde_json::from_str(line) {
            Ok(p) => p,
            Err(e) => {
                return BatchRow::Failed {
                    id: format!("line:{n}"),
                    error: e.to_string(),
                }
            }
        };
        match score_paths(&base.join(&pair.ori), &base.join(&pair.gen), cfg, model, Some(pair.id.clone())) {
            Ok(r) => BatchRow::Scored(r),
            Err(e) => {
                log::warn!("{}: {e}", pair.id);
                BatchRow::Failed {
                    id: pair.id,
                    error: e.to_string(),
                }
            }
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?;
    Ok(pool.install(|| lines.par_iter().map(work).collect()))
}

pub fn cmd_batch(
    pairs_file: &Path,
    model: Option<&Path>,
    out_file: &Path,
    parallelism: usize,
    cfg: &ScoreConfig<f64>,
) -> Result<BatchSummary> {
    let model = model.map(read_model).transpose()?;
    let rows = batch_rows(pairs_file, cfg, model.as_ref(), parallelism)?;
    let mut out = String::new();
    for r in &rows {
        out.push_str(&serde_json::to_string(r).expect("row serializes"));
        out.push('\n');
    }
    fs::write(out_file, out).map_err(|e| Error::io(out_file, e))?;
    Ok(BatchSummary {
        rows: rows.len(),
        errors: rows.iter().filter(|r| matches!(r, BatchRow::Failed { .. })).count(),
    })
}

/// Reads a scores file into `id -> row object`, skipping error rows.
pub fn read_scores(path: &Path) -> Result<HashMap<String, serde_json::Map<String, Value>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| Error::Schema {
            file: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let mut obj = match serde_json::from_str::<Value>(line).map_err(|e| schema(e.to_string()))? {
            Value::Object(m) => m,
            _ => return Err(schema("expected a JSON object".into())),
        };
        if obj.contains_key("error") {
            continue;
        }
        let id = match obj.remove("id") {
            Some(Value::String(s)) => s,
            _ => return Err(schema("missing string field `id`".into())),
        };
        if out.insert(id.clone(), obj).is_some() {
            return Err(schema(format!("duplicate id {id:?}")));
        }
    }
    Ok(out)
}

fn field(row: &serde_json::Map<String, Value>, name: &str, id: &str, path: &Path) -> Result<f64> {
    row.get(name)
        .and_then(Value::as_f64)
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::InvalidInput(format!("{}: row {id:?} has no numeric `{name}`", path.display())))
}

fn check_unmatched(unmatched: &[String], total: usize) -> Result<()> {
    if total > 0 && unmatched.len() as f64 > MAX_UNMATCHED_FRACTION * total as f64 {
        return Err(Error::Unmatched {
            unmatched: unmatched.len(),
            total,
            ids: unmatched.to_vec(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub rows: usize,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_validation_tau_b: f64,
    pub model: PathBuf,
    pub log: PathBuf,
    pub unmatched: Vec<String>,
}

/// Training log path used when none is given: `model.json` -> `model.train.csv`.
pub fn default_log_path(model_out: &Path) -> PathBuf {
    model_out.with_extension("train.csv")
}

pub fn write_train_log(records: &[TrainRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e.into()))?;
    for r in records {
        w.serialize(r).map_err(|e| Error::io(path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_train(
    scores_file: &Path,
    judgments_file: &Path,
    format: JudgmentFormat,
    cfg: &TrainConfig<f64>,
    seed: u64,
    model_out: &Path,
    log_out: Option<&Path>,
) -> Result<TrainSummary> {
    let scores = read_scores(scores_file)?;
    let judged = match load_judgments(judgments_file, format)? {
        Judgments::Scored(v) => v,
        Judgments::Pairs(_) => {
            return Err(Error::InvalidInput(
                "pair judgments carry no per-caption score to train on".into(),
            ))
        }
    };
    let mut data = Vec::new();
    let mut unmatched = Vec::new();
    for j in &judged {
        match scores.get(&j.instance_id) {
            Some(row) => {
                let mut a = [0.0; 5];
                for (v, name) in a.iter_mut().zip(["l_pix", "l_sem", "l_obj", "l_ciou", "l_dep"]) {
                    *v = field(row, name, &j.instance_id, scores_file)?;
                }
                data.push((SubScores::from_array(a), j.human_score));
            }
            None => unmatched.push(j.instance_id.clone()),
        }
    }
    if !unmatched.is_empty() {
        log::warn!("{} judgment ids have no score row", unmatched.len());
    }
    let (model, records) = train(&data, cfg, seed)?;
    save_model(&model, model_out)?;
    let log_path = log_out.map_or_else(|| default_log_path(model_out), Path::to_path_buf);
    write_train_log(&records, &log_path)?;
    let last = records.last().expect("at least one epoch");
    Ok(TrainSummary {
        rows: data.len(),
        epochs: last.epoch,
        best_epoch: last.best_epoch,
        best_validation_tau_b: records
            .get(last.best_epoch.wrapping_sub(1))
            .map_or(f64::NAN, |r| r.validation_tau_b),
        model: model_out.to_path_buf(),
        log: log_path,
        unmatched,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalOutcome {
    pub report: CorrelationReport,
    /// Judgment ids with no score row.
    pub unmatched: Vec<String>,
}

/// Kendall correlation between the scores file's `field` and the human
/// judgments. Pair-format judgments are routed to [`cmd_rank_accuracy`].
pub fn cmd_correlate(
    scores_file: &Path,
    judgments_file: &Path,
    format: JudgmentFormat,
    field_name: &str,
) -> Result<EvalOutcome> {
    if format == JudgmentFormat::Pairs {
        return cmd_rank_accuracy(scores_file, judgments_file, field_name);
    }
    let scores = read_scores(scores_file)?;
    let judged = match load_judgments(judgments_file, format)? {
        Judgments::Scored(v) => v,
        Judgments::Pairs(_) => unreachable!("scored format"),
    };
    let mut rows = Vec::new();
    let mut unmatched = Vec::new();
    for j in judged.iter() {
        match scores.get(&j.instance_id) {
            Some(row) => rows.push(JudgedCaption {
                instance_id: j.instance_id.clone(),
                metric_score: field(row, field_name, &j.instance_id, scores_file)?,
                human_score: j.human_score,
                raw_human_score: j.raw_human_score,
                dataset_tag: j.dataset_tag.clone(),
            }),
            None => unmatched.push(j.instance_id.clone()),
        }
    }
    check_unmatched(&unmatched, judged.len())?;
    Ok(EvalOutcome {
        report: correlation_report(&rows, Some(format.name()))?,
        unmatched,
    })
}

pub fn cmd_rank_accuracy(scores_file: &Path, pairs_file: &Path, field_name: &str) -> Result<EvalOutcome> {
    let scores = read_scores(scores_file)?;
    let pairs = match load_judgments(pairs_file, JudgmentFormat::Pairs)? {
        Judgments::Pairs(v) => v,
        Judgments::Scored(_) => unreachable!("pairs format"),
    };
    let mut rows = Vec::new();
    let mut unmatched = Vec::new();
    for p in &pairs {
        let key_a = format!("{}#A", p.instance_id);
        let key_b = format!("{}#B", p.instance_id);
        match (scores.get(&key_a), scores.get(&key_b)) {
            (Some(a), Some(b)) => rows.push(CaptionPair {
                instance_id: p.instance_id.clone(),
                score_a: field(a, field_name, &key_a, scores_file)?,
                score_b: field(b, field_name, &key_b, scores_file)?,
                human_winner: p.winner,
                category: p.category,
            }),
            _ => unmatched.push(p.instance_id.clone()),
        }
    }
    check_unmatched(&unmatched, pairs.len())?;
    let mut report = pairwise_accuracy(&rows)?;
    report.dataset = Some(JudgmentFormat::Pairs.name().to_string());
    Ok(EvalOutcome { report, unmatched })
}

/// Where [`cmd_synth`] takes its scenes from.
#[derive(Debug, Clone, PartialEq)]
pub enum SynthInput {
    Scene(PathBuf),
    Random { n: usize, seed: u64, canvas: usize },
}

fn write_scene(spec: &SceneSpec, name: &str, perturb: Option<Perturbation>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut emit = |spec: &SceneSpec, name: String| -> Result<()> {
        let dir = out_dir.join(&name);
        save_bundle(&render_scene::<f64>(spec)?, &dir)?;
        let scene_path = out_dir.join(format!("{name}.scene.json"));
        fs::write(&scene_path, spec.to_json() + "\n").map_err(|e| Error::io(&scene_path, e))?;
        written.push(dir.join(MANIFEST_FILE));
        Ok(())
    };
    emit(spec, name.to_string())?;
    if let Some(kind) = perturb {
        emit(&perturb_scene(spec, kind, spec.seed)?, format!("{name}.{}", kind.name()))?;
    }
    Ok(written)
}

/// Renders scenes to bundle directories under `out_dir` and returns the
/// written manifest paths. Each bundle sits next to its `.scene.json`; with
/// `perturb`, a `<name>.<kind>` variant is written as well.
pub fn cmd_synth(input: &SynthInput, perturb: Option<Perturbation>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let scenes: Vec<(String, SceneSpec)> = match input {
        SynthInput::Scene(path) => {
            let spec = SceneSpec::load(path)?;
            let file = path.file_name().and_then(|f| f.to_str()).unwrap_or("scene");
            let name = file.strip_suffix(".scene.json").or_else(|| file.strip_suffix(".json")).unwrap_or(file);
            vec![(name.to_string(), spec)]
        }
        SynthInput::Random { n, seed, canvas } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            (0..*n)
                .map(|i| (format!("scene_{i:04}"), random_scene(rng.gen(), [*canvas, *canvas])))
                .collect()
        }
    };
    if scenes.is_empty() {
        return Ok(Vec::new());
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    for (name, spec) in &scenes {
        written.extend(write_scene(spec, name, perturb, out_dir)?);
    }
    Ok(written)
}

/// Writes one JSON value per line.
pub fn write_json_lines<W: Write, S: Serialize>(mut w: W, rows: &[S]) -> std::io::Result<()> {
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
