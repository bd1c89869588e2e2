use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn camscore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_camscore"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = camscore(args);
    assert!(
        out.status.success(),
        "{args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Renders `n` random scenes and returns their bundle directories.
fn scenes(dir: &Path, n: usize, perturb: Option<&str>) -> Vec<PathBuf> {
    let out = dir.join("scenes");
    let mut args = vec!["synth", "--random", "", "--seed", "11", "--canvas", "64", "--out", s(&out)];
    let n = n.to_string();
    args[2] = &n;
    if let Some(p) = perturb {
        args.extend(["--perturb", p]);
    }
    let paths: Vec<String> = serde_json::from_str(&ok(&args)).unwrap();
    paths.iter().map(|p| Path::new(p).parent().unwrap().to_path_buf()).collect()
}

fn write_lines(path: &Path, rows: &[Value]) {
    let text: String = rows.iter().map(|r| format!("{r}\n")).collect();
    fs::write(path, text).unwrap();
}

#[test]
fn self_comparison_scores_zero_loss() {
    let tmp = tempfile::tempdir().unwrap();
    let b = &scenes(tmp.path(), 1, None)[0];
    let row: Value = serde_json::from_str(&ok(&["score", s(b), s(b)])).unwrap();
    assert_eq!(row["l_pix"], 0.0);
    assert_eq!(row["l_sem"], 1.0);
    assert_eq!(row["l_obj"], 0.0);
    assert_eq!(row["l_ciou"], 0.0);
    assert_eq!(row["l_dep"], 0.0);
    assert!(row.get("camscore").is_none());
}

#[test]
fn zero_weight_model_scores_one_half() {
    let tmp = tempfile::tempdir().unwrap();
    let b = &scenes(tmp.path(), 1, None)[0];
    let model = tmp.path().join("zero.json");
    fs::write(
        &model,
        r#"{"version":1,"layer_dims":[5,1],"weights":[[0,0,0,0,0]],"biases":[[0]],"seed":0}"#,
    )
    .unwrap();
    let row: Value = serde_json::from_str(&ok(&["score", s(b), s(b), "--model", s(&model)])).unwrap();
    assert_eq!(row["camscore"], 0.5);
}

#[test]
fn batch_keeps_input_order_and_reports_bad_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let b = scenes(tmp.path(), 3, Some("move_object"));
    // synth lists each scene then its variant
    let pairs = tmp.path().join("pairs.jsonl");
    write_lines(
        &pairs,
        &[
            json!({"id": "z", "ori": s(&b[0]), "gen": s(&b[1])}),
            json!({"id": "a", "ori": s(&b[2]), "gen": s(&b[3])}),
            json!({"id": "gone", "ori": s(&b[0]), "gen": "no/such/bundle"}),
            json!({"id": "m", "ori": s(&b[4]), "gen": s(&b[5])}),
        ],
    );
    let out = tmp.path().join("scores.jsonl");
    ok(&["batch", s(&pairs), "--out", s(&out), "--parallelism", "3"]);
    let rows: Vec<Value> = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let ids: Vec<&str> = rows.iter().map(|r| r["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["z", "a", "gone", "m"]);
    assert!(rows[2]["error"].as_str().unwrap().contains("no/such/bundle"));
    for i in [0, 1, 3] {
        assert!(rows[i]["l_ciou"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn empty_pairs_file_gives_empty_output() {
    let tmp = tempfile::tempdir().unwrap();
    let pairs = tmp.path().join("pairs.jsonl");
    fs::write(&pairs, "").unwrap();
    let out = tmp.path().join("scores.jsonl");
    ok(&["batch", s(&pairs), "--out", s(&out)]);
    assert_eq!(fs::read_to_string(&out).unwrap(), "");
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn synth_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("none");
    assert_eq!(ok(&["synth", "--random", "0", "--out", s(&empty)]).trim(), "[]");
    assert!(!empty.exists());

    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        ok(&["synth", "--random", "5", "--seed", "7", "--out", s(d)]);
    }
    let (ta, tb) = (tree(&a), tree(&b));
    let manifests = ta.iter().filter(|(p, _)| p.ends_with("manifest.json")).count();
    assert_eq!(manifests, 5);
    assert_eq!(ta, tb);
}

fn expert_rows(human: &[f64]) -> Vec<Value> {
    human
        .iter()
        .enumerate()
        .map(|(i, h)| json!({"id": format!("c{i}"), "human_scores": [h], "scale": [0.0, 1.0]}))
        .collect()
}

fn lcg(state: &mut u64) -> f64 {
    *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (*state >> 11) as f64 / (1u64 << 53) as f64
}

#[test]
fn correlate_agrees_with_identical_and_shuffled_scores() {
    let tmp = tempfile::tempdir().unwrap();
    let mut st = 5;
    let human: Vec<f64> = (0..1000).map(|_| lcg(&mut st)).collect();
    let judgments = tmp.path().join("human.jsonl");
    write_lines(&judgments, &expert_rows(&human));

    let same = tmp.path().join("same.jsonl");
    let score_rows: Vec<Value> = human
        .iter()
        .enumerate()
        .map(|(i, h)| json!({"id": format!("c{i}"), "camscore": h}))
        .collect();
    write_lines(&same, &score_rows);
    let r: Value = serde_json::from_str(&ok(&["correlate", s(&same), s(&judgments), "--format", "expert"])).unwrap();
    assert_eq!(r["tau_b"], 1.0);

    let noise = tmp.path().join("noise.jsonl");
    let score_rows: Vec<Value> = (0..1000).map(|i| json!({"id": format!("c{i}"), "camscore": lcg(&mut st)})).collect();
    write_lines(&noise, &score_rows);
    let r: Value = serde_json::from_str(&ok(&["correlate", s(&noise), s(&judgments), "--format", "expert"])).unwrap();
    assert!(r["tau_b"].as_f64().unwrap().abs() < 0.1, "{r}");
}

#[test]
fn rank_accuracy_counts_agreeing_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let scores = tmp.path().join("scores.jsonl");
    write_lines(
        &scores,
        &[
            json!({"id": "p1#A", "camscore": 0.9}),
            json!({"id": "p1#B", "camscore": 0.1}),
            json!({"id": "p2#A", "camscore": 0.2}),
            json!({"id": "p2#B", "camscore": 0.7}),
            json!({"id": "p3#A", "camscore": 0.4}),
            json!({"id": "p3#B", "camscore": 0.4}),
        ],
    );
    let pairs = tmp.path().join("pairs.jsonl");
    write_lines(
        &pairs,
        &[
            json!({"id": "p1", "winner": "A", "category": "HC"}),
            json!({"id": "p2", "winner": "B", "category": "HC"}),
            json!({"id": "p3", "winner": "A", "category": "MM"}),
        ],
    );
    let r: Value = serde_json::from_str(&ok(&["rank-accuracy", s(&scores), s(&pairs)])).unwrap();
    let acc = &r["accuracy"];
    assert_eq!(acc["HC"], 1.0, "{r}");
    assert_eq!(acc["MM"], 0.5, "{r}");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let b = &scenes(tmp.path(), 1, None)[0];

    let broken = tmp.path().join("broken");
    fs::create_dir(&broken).unwrap();
    fs::write(broken.join("manifest.json"), "{}").unwrap();
    let out = camscore(&["score", s(b), s(&broken)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest.json"));

    let model = tmp.path().join("bad_model.json");
    fs::write(&model, "{\"version\":1}").unwrap();
    assert_eq!(camscore(&["score", s(b), s(b), "--model", s(&model)]).status.code(), Some(2));
    assert_eq!(camscore(&["score", s(b), s(b), "--model", "missing.json"]).status.code(), Some(2));

    // 10 of 100 judged ids have no score row
    let judgments = tmp.path().join("human.jsonl");
    write_lines(&judgments, &expert_rows(&(0..100).map(|i| i as f64 / 100.0).collect::<Vec<_>>()));
    let scores = tmp.path().join("scores.jsonl");
    write_lines(
        &scores,
        &(0..90).map(|i| json!({"id": format!("c{i}"), "camscore": i})).collect::<Vec<_>>(),
    );
    let out = camscore(&["correlate", s(&scores), s(&judgments), "--format", "expert"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("c95"));

    assert_eq!(camscore(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(camscore(&["--help"]).status.code(), Some(0));
}

#[test]
fn run_manifest_goes_to_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    let b = &scenes(tmp.path(), 1, None)[0];
    let out = camscore(&["score", s(b), s(b)]);
    let stderr = String::from_utf8(out.stderr).unwrap();
    let manifest: Value = serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert_eq!(manifest["command"], "score");
    assert_eq!(manifest["config"]["p_norm"], "2");
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
}
