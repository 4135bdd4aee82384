//! End-to-end checks of the binary: every stage runs as a subprocess over
//! real files, exit codes and error records match the contract, and `detect`
//! agrees with the staged pipeline composed manually.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use patlas_core::classify::load_model;
use patlas_core::frn::{self, load_feature_map};
use patlas_core::interchange::load_asg;
use patlas_core::microstructures::load_detections;
use patlas_core::pattern::load_candidates;
use patlas_core::synth::{corpus, SynthConfig};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_patlas")
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .env("PATLAS_LOG", "error")
        .output()
        .expect("binary runs")
}

fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "expected success for {args:?}\nstderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Writes a small planted corpus to disk and runs parse/detect-ms/sample
/// for each project, returning the project names.
fn stage_projects(dir: &Path, cfg: &SynthConfig) -> Vec<String> {
    let fixture = corpus(cfg);
    fs::write(dir.join("labels.csv"), fixture.labels_csv()).unwrap();
    let mut names = Vec::new();
    for project in &fixture.projects {
        let src_root = dir.join("sources").join(&project.name);
        for (rel, text) in &project.files {
            let path = src_root.join(rel);
            fs::create_dir_all(path.parent().unwrap()).unwrap();
            fs::write(path, text).unwrap();
        }
        let asg = format!("{}.asg.json", project.name);
        let ms = format!("{}.ms.jsonl", project.name);
        let cands = format!("{}.cands.jsonl", project.name);
        run_ok(
            dir,
            &[
                "parse",
                "--project",
                &project.name,
                "--out",
                &asg,
                &format!("sources/{}", project.name),
            ],
        );
        run_ok(dir, &["detect-ms", "--asg", &asg, "--out", &ms]);
        run_ok(
            dir,
            &["sample", "--asg", &asg, "--ms", &ms, "--out", &cands],
        );
        names.push(project.name.clone());
    }
    let manifest: Vec<serde_json::Value> = names
        .iter()
        .map(|name| {
            serde_json::json!({
                "asg": format!("{name}.asg.json"),
                "detections": format!("{name}.ms.jsonl"),
                "candidates": format!("{name}.cands.jsonl"),
            })
        })
        .collect();
    fs::write(
        dir.join("manifest.json"),
        serde_json::json!({ "projects": manifest }).to_string(),
    )
    .unwrap();
    names
}

fn small_config() -> SynthConfig {
    SynthConfig {
        projects: 4,
        planted_per_pattern: 10,
        singleton_lures: 12,
        hook_hierarchies: 3,
        container_hierarchies: 2,
        wrapper_hierarchies: 2,
        seed: 11,
    }
}

#[test]
fn pipeline_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let names = stage_projects(dir, &small_config());

    // npcr 4 on 10 positives gives a 50-example dataset.
    run_ok(
        dir,
        &[
            "dataset",
            "--manifest",
            "manifest.json",
            "--labels",
            "labels.csv",
            "--pattern",
            "singleton",
            "--npcr",
            "4",
            "--seed",
            "9",
            "--out",
            "ds.jsonl",
            "--folds",
            "folds.json",
            "--accounting",
            "acc.json",
        ],
    );
    let (ds, _) = patlas_core::dataset::load_dataset(&dir.join("ds.jsonl")).unwrap();
    assert_eq!(ds.positives(), 10);
    assert_eq!(ds.examples.len(), 50);

    let accounting: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("acc.json")).unwrap()).unwrap();
    assert_eq!(accounting["labels"]["per_pattern"]["singleton"]["revised"], 10);
    assert_eq!(accounting["build"]["clamped"], false);
    assert_eq!(accounting["build"]["negatives_sampled"], 40);

    run_ok(
        dir,
        &[
            "train",
            "--dataset",
            "ds.jsonl",
            "--n-trees",
            "16",
            "--seed",
            "3",
            "--out",
            "model.json",
        ],
    );

    let eval_out = run_ok(
        dir,
        &[
            "evaluate",
            "--dataset",
            "ds.jsonl",
            "--folds",
            "folds.json",
            "--n-trees",
            "16",
            "--seed",
            "3",
            "--report",
            "report.json",
        ],
    );
    let table = String::from_utf8_lossy(&eval_out.stdout);
    assert!(table.contains("forest"), "text table names the model: {table}");
    assert!(table.contains("aggregate"), "text table has the aggregate row");
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert!(report["metadata"]["generated_at_unix"].is_u64());
    assert_eq!(report["report"]["pattern"], "singleton");
    assert!(report["report"]["mean"]["mcc"].as_f64().unwrap() > 0.5);

    run_ok(
        dir,
        &[
            "search",
            "--dataset",
            "ds.jsonl",
            "--folds",
            "folds.json",
            "--budget",
            "3",
            "--seed",
            "7",
            "--out",
            "search.json",
            "--model",
            "best.json",
        ],
    );
    let search: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("search.json")).unwrap()).unwrap();
    assert_eq!(search["trials"].as_array().unwrap().len(), 3);
    let best: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("best.json")).unwrap()).unwrap();
    assert!(best["provenance"]["fold_hash"].is_u64());

    // Detection over the first project's sources, with the plain model.
    let project = &names[0];
    run_ok(
        dir,
        &[
            "detect",
            "--project",
            project,
            "--model",
            "model.json",
            "--out",
            "hits.jsonl",
            &format!("sources/{project}"),
        ],
    );
    let hits_text = fs::read_to_string(dir.join("hits.jsonl")).unwrap();
    let hits: Vec<serde_json::Value> = hits_text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!hits.is_empty());
    let probs: Vec<f64> = hits
        .iter()
        .map(|h| h["probability"].as_f64().unwrap())
        .collect();
    assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
    assert!(
        probs.windows(2).all(|w| w[0] >= w[1]),
        "hits sorted by probability descending"
    );
    for hit in &hits {
        assert_eq!(hit["pattern"], "singleton");
        assert_eq!(hit["project"].as_str().unwrap(), project);
        assert_eq!(
            hit["positive"].as_bool().unwrap(),
            hit["probability"].as_f64().unwrap() >= 0.5
        );
    }
    // Every planted keeper in this project surfaces as a confident hit.
    let planted_keys: Vec<String> = ds
        .examples
        .iter()
        .filter(|e| e.label && e.project == *project)
        .map(|e| e.unique_key.clone())
        .collect();
    assert!(!planted_keys.is_empty());
    for key in &planted_keys {
        let hit = hits
            .iter()
            .find(|h| h["unique_key"].as_str() == Some(key))
            .unwrap_or_else(|| panic!("planted {key} missing from detect output"));
        assert!(hit["probability"].as_f64().unwrap() > 0.5);
    }

    // detect equals normalize + predict composed manually on the same files.
    let (forest, mut registry) = load_model(&dir.join("model.json")).unwrap();
    let asg = load_asg(&dir.join(format!("{project}.asg.json"))).unwrap();
    let detections = load_detections(&dir.join(format!("{project}.ms.jsonl"))).unwrap();
    for hit in &hits {
        let key = hit["unique_key"].as_str().unwrap();
        let candidates =
            load_candidates(&asg, &dir.join(format!("{project}.cands.jsonl"))).unwrap();
        let candidate = candidates
            .iter()
            .find(|c| c.unique_key() == key)
            .expect("hit corresponds to a sampled candidate");
        let fm = frn::normalize(&asg, &detections, candidate, &mut registry).unwrap();
        let composed = forest.predict_fm(&fm).unwrap();
        assert_eq!(hit["probability"].as_f64().unwrap(), composed);
    }
}

#[test]
fn detect_scores_both_composite_mappings_in_the_drawing_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    stage_projects(dir, &small_config());
    run_ok(
        dir,
        &[
            "dataset",
            "--manifest",
            "manifest.json",
            "--labels",
            "labels.csv",
            "--pattern",
            "composite",
            "--npcr",
            "2",
            "--seed",
            "9",
            "--out",
            "composite.jsonl",
        ],
    );
    run_ok(
        dir,
        &[
            "train",
            "--dataset",
            "composite.jsonl",
            "--n-trees",
            "32",
            "--seed",
            "3",
            "--out",
            "composite-model.json",
        ],
    );

    let fixture = include_str!("../../patlas-core/tests/fixtures/drawing/Drawing.java");
    fs::create_dir_all(dir.join("fixture")).unwrap();
    fs::write(dir.join("fixture/Drawing.java"), fixture).unwrap();
    let out = run_ok(
        dir,
        &[
            "detect",
            "--project",
            "draw",
            "--model",
            "composite-model.json",
            "fixture",
        ],
    );
    let hits: Vec<serde_json::Value> = String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    // One composite anchor (Picture) over two leaves (Line, Rectangle).
    assert_eq!(hits.len(), 2, "{hits:?}");
    for hit in &hits {
        let roles = hit["roles"].as_array().unwrap();
        let bound = |role: &str| {
            roles
                .iter()
                .find(|r| r["role"] == role)
                .and_then(|r| r["type"].as_str())
                .unwrap()
                .to_string()
        };
        assert_eq!(bound("Component"), "draw.Graphic");
        assert_eq!(bound("Composite"), "draw.Picture");
        assert!(
            hit["probability"].as_f64().unwrap() > 0.5,
            "mapping should score as a positive: {hit}"
        );
    }
    let leaves: Vec<String> = hits
        .iter()
        .map(|h| {
            h["roles"].as_array().unwrap()[2]["type"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    assert!(leaves.contains(&"draw.Line".to_string()), "{leaves:?}");
    assert!(leaves.contains(&"draw.Rectangle".to_string()), "{leaves:?}");
}

#[test]
fn normalize_and_render_roundtrip() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let names = stage_projects(dir, &small_config());
    let project = &names[0];
    let asg_path = format!("{project}.asg.json");
    let ms_path = format!("{project}.ms.jsonl");

    run_ok(
        dir,
        &[
            "sample",
            "--asg",
            &asg_path,
            "--ms",
            &ms_path,
            "--pattern",
            "singleton",
            "--out",
            "singleton.jsonl",
        ],
    );
    run_ok(
        dir,
        &[
            "normalize",
            "--asg",
            &asg_path,
            "--ms",
            &ms_path,
            "--candidates",
            "singleton.jsonl",
            "--out-dir",
            "maps",
            "--registry-out",
            "registry.json",
        ],
    );
    let asg = load_asg(&dir.join(&asg_path)).unwrap();
    let candidates = load_candidates(&asg, &dir.join("singleton.jsonl")).unwrap();
    let mut maps: Vec<PathBuf> = fs::read_dir(dir.join("maps"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    maps.sort();
    assert_eq!(maps.len(), candidates.len());

    // Map files load back against the written registry and render in every
    // format without panicking.
    let registry = patlas_core::registry::RoleRegistry::load(&dir.join("registry.json")).unwrap();
    let fm = load_feature_map(&maps[0], &asg, &registry).unwrap();
    assert_eq!(fm.pattern, patlas_core::pattern::Pattern::Singleton);

    let map_arg = maps[0].to_str().unwrap().to_string();
    for format in ["text", "pgm", "svg", "json"] {
        let out = run_ok(
            dir,
            &[
                "render",
                "--map",
                &map_arg,
                "--asg",
                &asg_path,
                "--registry",
                "registry.json",
                "--format",
                format,
            ],
        );
        assert!(!out.stdout.is_empty(), "{format} rendering is non-empty");
    }
    let json_out = run_ok(
        dir,
        &[
            "render",
            "--map",
            &map_arg,
            "--asg",
            &asg_path,
            "--registry",
            "registry.json",
            "--format",
            "json",
        ],
    );
    let rendered: serde_json::Value = serde_json::from_slice(&json_out.stdout).unwrap();
    assert_eq!(rendered["pattern"], "singleton");
    assert_eq!(
        rendered["cells"].as_array().unwrap().len(),
        rendered["rows"].as_u64().unwrap() as usize
    );
}

#[test]
fn exit_codes_and_error_records() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();

    // Usage error: unknown flag.
    let usage = run(dir, &["parse", "--nonsense"]);
    assert_eq!(usage.status.code(), Some(2));

    // Usage error: out-of-range threshold is rejected before any work.
    let threshold = run(
        dir,
        &[
            "detect",
            "--project",
            "x",
            "--model",
            "missing.json",
            "--threshold",
            "1.5",
            "src",
        ],
    );
    assert_eq!(threshold.status.code(), Some(2));

    // Data error: missing input file, with a machine-readable record.
    let data = run(dir, &["detect-ms", "--asg", "missing.json", "--out", "out.jsonl"]);
    assert_eq!(data.status.code(), Some(3));
    let record: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&data.stderr).trim()).unwrap();
    assert_eq!(record["class"], "data");
    assert_eq!(record["exit"], 3);
    assert!(record["error"].is_string());
    assert!(!dir.join("out.jsonl").exists(), "no partial artifact");

    // Evaluation error: cross-validation needs at least two folds.
    let names = stage_projects(
        dir,
        &SynthConfig {
            projects: 2,
            planted_per_pattern: 4,
            singleton_lures: 6,
            hook_hierarchies: 1,
            container_hierarchies: 1,
            wrapper_hierarchies: 1,
            seed: 2,
        },
    );
    assert_eq!(names.len(), 2);
    run_ok(
        dir,
        &[
            "dataset",
            "--manifest",
            "manifest.json",
            "--labels",
            "labels.csv",
            "--pattern",
            "singleton",
            "--npcr",
            "1",
            "--seed",
            "5",
            "--out",
            "ds.jsonl",
            "--folds",
            "folds.json",
        ],
    );
    let folds: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("folds.json")).unwrap()).unwrap();
    let one_fold = serde_json::json!({ "fold": [folds["fold"][0]] });
    fs::write(dir.join("one-fold.json"), one_fold.to_string()).unwrap();
    let eval = run(
        dir,
        &[
            "evaluate",
            "--dataset",
            "ds.jsonl",
            "--folds",
            "one-fold.json",
            "--seed",
            "1",
        ],
    );
    assert_eq!(eval.status.code(), Some(4));
    let record: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&eval.stderr).trim()).unwrap();
    assert_eq!(record["class"], "evaluation");
    assert_eq!(record["exit"], 4);
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    stage_projects(dir, &small_config());

    let dataset_args = [
        "dataset",
        "--manifest",
        "manifest.json",
        "--labels",
        "labels.csv",
        "--pattern",
        "template-method",
        "--npcr",
        "2",
        "--augment",
        "1",
        "--seed",
        "21",
        "--out",
        "ds.jsonl",
        "--folds",
        "folds.json",
    ];
    run_ok(dir, &dataset_args);
    let ds_a = fs::read(dir.join("ds.jsonl")).unwrap();
    let folds_a = fs::read(dir.join("folds.json")).unwrap();
    run_ok(dir, &dataset_args);
    assert_eq!(ds_a, fs::read(dir.join("ds.jsonl")).unwrap());
    assert_eq!(folds_a, fs::read(dir.join("folds.json")).unwrap());

    let search_args = [
        "search",
        "--dataset",
        "ds.jsonl",
        "--folds",
        "folds.json",
        "--budget",
        "4",
        "--seed",
        "7",
        "--out",
        "search.json",
        "--model",
        "best.json",
    ];
    run_ok(dir, &search_args);
    let search_a = fs::read(dir.join("search.json")).unwrap();
    let model_a = fs::read(dir.join("best.json")).unwrap();
    run_ok(dir, &search_args);
    assert_eq!(search_a, fs::read(dir.join("search.json")).unwrap());
    assert_eq!(model_a, fs::read(dir.join("best.json")).unwrap());

    let train_args = [
        "train",
        "--dataset",
        "ds.jsonl",
        "--n-trees",
        "8",
        "--seed",
        "3",
        "--out",
        "model.json",
    ];
    run_ok(dir, &train_args);
    let trained_a = fs::read(dir.join("model.json")).unwrap();
    run_ok(dir, &train_args);
    assert_eq!(trained_a, fs::read(dir.join("model.json")).unwrap());
}
