//! Command line front end: every pipeline stage as a subcommand over plain
//! files, so stages can be rerun, swapped, or audited independently.
//!
//! Artifacts are staged next to their target and renamed into place, and a
//! failing run deletes whatever it already wrote, so interrupted or failed
//! invocations leave no partial outputs. Reruns with identical inputs and
//! seeds produce byte-identical artifacts; the one exception is the
//! `evaluate` report, whose timestamp lives in a separate metadata field.
//! Errors print a one-line JSON record to stderr and exit 3 (data) or 4
//! (evaluation); usage mistakes exit 2. `PATLAS_LOG` controls verbosity.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use patlas_core::asg::Asg;
use patlas_core::classify::{
    load_model, save_model, FeatureSubsample, ForestBackend, Hyperparams, SplitMode,
    TrainedForest,
};
use patlas_core::dataset::{
    self, load_dataset, load_folds, load_labels, save_dataset, save_folds, LabelInstance,
    ProjectInputs,
};
use patlas_core::error::{Error, ErrorClass, Result};
use patlas_core::eval::cross_validate;
use patlas_core::frn::{self, load_feature_map, save_feature_map, FeatureMap};
use patlas_core::interchange::{load_asg, save_asg};
use patlas_core::microstructures::{
    detect_all, load_detections, save_detections, MsDetections,
};
use patlas_core::parse::parse_source_files;
use patlas_core::pattern::{load_candidates, save_candidates, CandidateMapping, Pattern};
use patlas_core::registry::RoleRegistry;
use patlas_core::render::{render, RenderFormat};
use patlas_core::sample::{sample, sample_all};
use patlas_core::search::{random_search, SearchSpace};

#[derive(Parser)]
#[command(
    name = "patlas",
    version,
    about = "Detects design pattern instances from feature maps of micro-structures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse Java sources into a typed program graph.
    Parse(ParseArgs),
    /// Detect the micro-structure catalog over a graph.
    DetectMs(DetectMsArgs),
    /// Sample candidate role mappings from detections.
    Sample(SampleArgs),
    /// Normalize candidates into feature-map CSVs plus a role registry.
    Normalize(NormalizeArgs),
    /// Render one feature map as text, PGM, SVG, or JSON.
    Render(RenderArgs),
    /// Assemble a labeled dataset (and folds) from per-project artifacts.
    Dataset(DatasetArgs),
    /// Train a random forest on a dataset.
    Train(TrainArgs),
    /// Cross-validate one hyperparameter setting over project folds.
    Evaluate(EvaluateArgs),
    /// Random-search the hyperparameter space under a budget.
    Search(SearchArgs),
    /// End to end: sources to per-candidate probabilities.
    Detect(DetectArgs),
}

#[derive(Args)]
struct ParseArgs {
    /// Project name recorded in the graph.
    #[arg(long)]
    project: String,
    /// Output graph path (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Source files, or directories searched recursively for .java files.
    #[arg(required = true)]
    sources: Vec<PathBuf>,
}

#[derive(Args)]
struct DetectMsArgs {
    /// Input graph (from `parse`).
    #[arg(long)]
    asg: PathBuf,
    /// Output detection dump (JSONL).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    /// Input graph (from `parse`).
    #[arg(long)]
    asg: PathBuf,
    /// Input detections (from `detect-ms`).
    #[arg(long)]
    ms: PathBuf,
    /// Restrict to one pattern; all four when omitted.
    #[arg(long)]
    pattern: Option<Pattern>,
    /// Cap per-anchor combinations; 0 means unlimited.
    #[arg(long, default_value_t = 0)]
    anchor_cap: usize,
    /// Output candidate dump (JSONL).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NormalizeArgs {
    /// Input graph (from `parse`).
    #[arg(long)]
    asg: PathBuf,
    /// Input detections (from `detect-ms`).
    #[arg(long)]
    ms: PathBuf,
    /// Input candidate dump (from `sample`).
    #[arg(long)]
    candidates: PathBuf,
    /// Output directory; receives one map-NNNNN.csv per candidate.
    #[arg(long)]
    out_dir: PathBuf,
    /// Existing registry snapshot to extend instead of starting empty.
    #[arg(long)]
    registry_in: Option<PathBuf>,
    /// Where to write the updated registry snapshot.
    #[arg(long)]
    registry_out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Feature-map CSV (from `normalize`).
    #[arg(long)]
    map: PathBuf,
    /// Graph the map's candidate refers to.
    #[arg(long)]
    asg: PathBuf,
    /// Registry snapshot the map's codes come from.
    #[arg(long)]
    registry: PathBuf,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Text,
    Pgm,
    Svg,
    Json,
}

#[derive(Args)]
struct DatasetArgs {
    /// JSON manifest listing per-project artifacts:
    /// {"projects":[{"asg":..,"detections":..,"candidates":..}]}.
    /// Relative paths resolve against the manifest's directory.
    #[arg(long)]
    manifest: PathBuf,
    /// Ground-truth label CSV (instance,project,pattern,role,type_name).
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    pattern: Pattern,
    /// Negatives sampled per positive.
    #[arg(long, default_value_t = 1)]
    npcr: u32,
    /// Row-permutation augmentation passes over the originals.
    #[arg(long, default_value_t = 0)]
    augment: u32,
    /// Match labels by unique key instead of exact role bindings.
    #[arg(long)]
    relaxed: bool,
    #[arg(long)]
    seed: u64,
    /// Output dataset container (JSONL with embedded registry).
    #[arg(long)]
    out: PathBuf,
    /// Also write one-fold-per-project splits for the dataset.
    #[arg(long)]
    folds: Option<PathBuf>,
    /// Also write label and negative-sampling accounting as JSON.
    #[arg(long)]
    accounting: Option<PathBuf>,
}

#[derive(Args)]
struct HpArgs {
    #[arg(long, default_value_t = 64)]
    n_trees: u32,
    /// Depth cap; unlimited when omitted.
    #[arg(long)]
    max_depth: Option<u32>,
    #[arg(long, default_value_t = 2)]
    min_split: u32,
    /// Per-split feature pool: "sqrt" or a fraction in (0, 1].
    #[arg(long, default_value = "sqrt")]
    feature_subsample: String,
    /// Fraction of the training set drawn (without replacement) per tree.
    #[arg(long, default_value_t = 1.0)]
    bootstrap: f64,
    #[arg(long, value_enum, default_value_t = SplitModeArg::Equality)]
    split_mode: SplitModeArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitModeArg {
    Equality,
    Threshold,
}

#[derive(Args)]
struct TrainArgs {
    /// Input dataset container (from `dataset`).
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    hp: HpArgs,
    #[arg(long)]
    seed: u64,
    /// Output model file (JSON with embedded registry).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Input dataset container (from `dataset`).
    #[arg(long)]
    dataset: PathBuf,
    /// Fold file (from `dataset --folds`).
    #[arg(long)]
    folds: PathBuf,
    #[command(flatten)]
    hp: HpArgs,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0.5, value_parser = parse_threshold)]
    threshold: f64,
    /// Write the report as JSON; its timestamp sits in a separate
    /// metadata field so the report body stays rerun-stable.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    /// Input dataset container (from `dataset`).
    #[arg(long)]
    dataset: PathBuf,
    /// Fold file (from `dataset --folds`).
    #[arg(long)]
    folds: PathBuf,
    /// Number of hyperparameter draws to evaluate.
    #[arg(long)]
    budget: u32,
    #[arg(long)]
    seed: u64,
    /// Output trial log and winning hyperparameters (JSON, timestamp-free).
    #[arg(long)]
    out: PathBuf,
    /// Also train a model on the full dataset with the winner.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    /// Project name recorded for the parsed sources.
    #[arg(long)]
    project: String,
    /// Trained model file (from `train` or `search --model`).
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 0.5, value_parser = parse_threshold)]
    threshold: f64,
    /// Output JSONL; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Source files, or directories searched recursively for .java files.
    #[arg(required = true)]
    sources: Vec<PathBuf>,
}

fn parse_threshold(s: &str) -> std::result::Result<f64, String> {
    let value: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err("threshold must lie in [0, 1]".to_string())
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PATLAS_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Err(err) = run(cli.command) {
        let (label, code) = match err.class() {
            ErrorClass::Data => ("data", 3),
            ErrorClass::Evaluation => ("evaluation", 4),
        };
        let record = serde_json::json!({
            "class": label,
            "error": err.to_string(),
            "exit": code,
        });
        eprintln!("{record}");
        std::process::exit(code);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Parse(a) => run_parse(a),
        Command::DetectMs(a) => run_detect_ms(a),
        Command::Sample(a) => run_sample(a),
        Command::Normalize(a) => run_normalize(a),
        Command::Render(a) => run_render(a),
        Command::Dataset(a) => run_dataset(a),
        Command::Train(a) => run_train(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Search(a) => run_search(a),
        Command::Detect(a) => run_detect(a),
    }
}

// ---------------------------------------------------------------------------
// Artifact plumbing
// ---------------------------------------------------------------------------

/// Writes through a temporary file in the target directory, renaming into
/// place only on success, so a failure never leaves a truncated artifact.
fn staged(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir)?;
    let tmp = tempfile::Builder::new()
        .prefix(".patlas-")
        .suffix(".tmp")
        .tempfile_in(&dir)?;
    write(tmp.path())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn staged_text(path: &Path, text: &str) -> Result<()> {
    staged(path, |p| {
        fs::write(p, text)?;
        Ok(())
    })
}

/// Stages a write and records the final path so a later failure in the same
/// run can delete every artifact written so far.
fn staged_tracked(
    written: &mut Vec<PathBuf>,
    path: &Path,
    write: impl FnOnce(&Path) -> Result<()>,
) -> Result<()> {
    staged(path, write)?;
    written.push(path.to_path_buf());
    Ok(())
}

fn clean_artifacts(written: &[PathBuf]) {
    for path in written {
        let _ = fs::remove_file(path);
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => staged_text(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Collects source files: explicit files are taken as given, directories are
/// walked recursively for .java files, and the result is sorted by path so
/// type ids do not depend on filesystem iteration order.
fn collect_sources(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    fn walk(dir: &Path, files: &mut BTreeSet<PathBuf>) -> Result<()> {
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() {
                walk(&path, files)?;
            } else if path.extension().is_some_and(|e| e == "java") {
                files.insert(path);
            }
        }
        Ok(())
    }

    let mut files = BTreeSet::new();
    for input in inputs {
        let meta = fs::metadata(input)?;
        if meta.is_dir() {
            walk(input, &mut files)?;
        } else {
            files.insert(input.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::Ingest("no .java sources found".to_string()));
    }
    Ok(files.into_iter().collect())
}

/// FNV-1a over bytes; stable across runs and platforms. Used to stamp models
/// with the identity of the fold file their hyperparameters were tuned on.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn hyperparams(args: &HpArgs, seed: u64) -> Result<Hyperparams> {
    let feature_subsample = if args.feature_subsample == "sqrt" {
        FeatureSubsample::Sqrt
    } else {
        let fraction: f64 = args.feature_subsample.parse().map_err(|_| {
            Error::Train(format!(
                "feature subsample must be \"sqrt\" or a fraction, got {:?}",
                args.feature_subsample
            ))
        })?;
        FeatureSubsample::Fraction(fraction)
    };
    let hp = Hyperparams {
        n_trees: args.n_trees,
        max_depth: args.max_depth,
        min_split: args.min_split,
        feature_subsample,
        bootstrap_fraction: args.bootstrap,
        seed,
        split_mode: match args.split_mode {
            SplitModeArg::Equality => SplitMode::Equality,
            SplitModeArg::Threshold => SplitMode::Threshold,
        },
    };
    hp.validate()?;
    Ok(hp)
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

fn run_parse(args: ParseArgs) -> Result<()> {
    let paths = collect_sources(&args.sources)?;
    let asg = parse_source_files(&args.project, &paths)?;
    log::info!(
        "parsed {} files into {} types",
        paths.len(),
        asg.types().len()
    );
    staged(&args.out, |p| save_asg(&asg, p))
}

fn run_detect_ms(args: DetectMsArgs) -> Result<()> {
    let asg = load_asg(&args.asg)?;
    let detections = detect_all(&asg);
    log::info!("detected {} micro-structure instances", detections.total());
    staged(&args.out, |p| save_detections(&detections, p))
}

fn run_sample(args: SampleArgs) -> Result<()> {
    let asg = load_asg(&args.asg)?;
    let detections = load_detections(&args.ms)?;
    let candidates: Vec<CandidateMapping> = match args.pattern {
        Some(pattern) => sample(&asg, &detections, pattern, args.anchor_cap),
        None => sample_all(&asg, &detections, args.anchor_cap)
            .into_iter()
            .flat_map(|(_, group)| group)
            .collect(),
    };
    log::info!("sampled {} candidate mappings", candidates.len());
    staged(&args.out, |p| save_candidates(&asg, &candidates, p))
}

fn run_normalize(args: NormalizeArgs) -> Result<()> {
    let asg = load_asg(&args.asg)?;
    let detections = load_detections(&args.ms)?;
    let candidates = load_candidates(&asg, &args.candidates)?;
    let mut registry = match &args.registry_in {
        Some(path) => RoleRegistry::load(path)?,
        None => RoleRegistry::new(),
    };
    // Normalize everything before writing anything: failures leave no files,
    // and every CSV embeds the final registry fingerprint.
    let maps: Vec<FeatureMap> = candidates
        .iter()
        .map(|c| frn::normalize(&asg, &detections, c, &mut registry))
        .collect::<Result<_>>()?;
    fs::create_dir_all(&args.out_dir)?;
    let mut written = Vec::new();
    let result = (|| {
        for (i, fm) in maps.iter().enumerate() {
            let path = args.out_dir.join(format!("map-{i:05}.csv"));
            staged_tracked(&mut written, &path, |p| save_feature_map(fm, &registry, p))?;
        }
        staged_tracked(&mut written, &args.registry_out, |p| registry.save(p))
    })();
    if result.is_err() {
        clean_artifacts(&written);
    }
    log::info!("normalized {} candidates into {}", maps.len(), args.out_dir.display());
    result
}

fn run_render(args: RenderArgs) -> Result<()> {
    let asg = load_asg(&args.asg)?;
    let registry = RoleRegistry::load(&args.registry)?;
    let fm = load_feature_map(&args.map, &asg, &registry)?;
    let text = match args.format {
        OutputFormat::Text => render(&fm, RenderFormat::Text),
        OutputFormat::Pgm => render(&fm, RenderFormat::Pgm),
        OutputFormat::Svg => render(&fm, RenderFormat::Svg),
        OutputFormat::Json => {
            let cells: Vec<Vec<u32>> = (0..fm.rows)
                .map(|r| (0..fm.cols).map(|c| fm.cell(r, c)).collect())
                .collect();
            let value = serde_json::json!({
                "pattern": fm.pattern,
                "project": fm.candidate.project,
                "unique_key": fm.unique_key(),
                "label": fm.label,
                "rows": fm.rows,
                "cols": fm.cols,
                "row_labels": fm.row_labels,
                "col_labels": fm.col_labels,
                "cells": cells,
            });
            let mut text = serde_json::to_string_pretty(&value)?;
            text.push('\n');
            text
        }
    };
    emit(args.out.as_deref(), &text)
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    projects: Vec<ManifestProject>,
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestProject {
    asg: PathBuf,
    detections: PathBuf,
    candidates: PathBuf,
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

fn run_dataset(args: DatasetArgs) -> Result<()> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&args.manifest)?)?;
    if manifest.projects.is_empty() {
        return Err(Error::Dataset("manifest lists no projects".to_string()));
    }
    let base = args
        .manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();

    let mut asgs: BTreeMap<String, Asg> = BTreeMap::new();
    let mut loaded: Vec<(String, MsDetections, Vec<CandidateMapping>)> = Vec::new();
    for entry in &manifest.projects {
        let asg = load_asg(&resolve(&base, &entry.asg))?;
        let detections = load_detections(&resolve(&base, &entry.detections))?;
        // Candidate dumps may hold all four patterns; the build consumes
        // only the slice for the requested one.
        let candidates: Vec<CandidateMapping> =
            load_candidates(&asg, &resolve(&base, &entry.candidates))?
                .into_iter()
                .filter(|c| c.pattern == args.pattern)
                .collect();
        let name = asg.project().to_string();
        if asgs.contains_key(&name) {
            return Err(Error::Dataset(format!(
                "manifest lists project {name} twice"
            )));
        }
        loaded.push((name.clone(), detections, candidates));
        asgs.insert(name, asg);
    }

    let (labels, label_report) = load_labels(&args.labels, &asgs)?;
    let positives: Vec<LabelInstance> = labels
        .into_iter()
        .filter(|l| l.mapping.pattern == args.pattern)
        .collect();
    let inputs: Vec<ProjectInputs> = loaded
        .iter()
        .map(|(name, detections, candidates)| ProjectInputs {
            asg: &asgs[name],
            detections,
            candidates,
        })
        .collect();

    let mut registry = RoleRegistry::new();
    let (built, build_report) = dataset::build(
        args.pattern,
        &inputs,
        &positives,
        args.npcr,
        args.relaxed,
        args.seed,
        &mut registry,
    )?;
    let ds = if args.augment > 0 {
        dataset::augment(&built, args.augment, args.seed)?
    } else {
        built
    };
    log::info!(
        "dataset: {} examples ({} positive) across {} projects",
        ds.examples.len(),
        ds.positives(),
        asgs.len()
    );

    let mut written = Vec::new();
    let result = (|| {
        staged_tracked(&mut written, &args.out, |p| save_dataset(&ds, &registry, p))?;
        if let Some(folds_path) = &args.folds {
            let folds = dataset::project_folds(&ds)?;
            staged_tracked(&mut written, folds_path, |p| save_folds(&folds, p))?;
        }
        if let Some(accounting_path) = &args.accounting {
            let value = serde_json::json!({
                "labels": label_report,
                "build": build_report,
            });
            let mut text = serde_json::to_string_pretty(&value)?;
            text.push('\n');
            staged_tracked(&mut written, accounting_path, |p| {
                fs::write(p, &text)?;
                Ok(())
            })?;
        }
        Ok(())
    })();
    if result.is_err() {
        clean_artifacts(&written);
    }
    result
}

fn run_train(args: TrainArgs) -> Result<()> {
    let (ds, registry) = load_dataset(&args.dataset)?;
    let hp = hyperparams(&args.hp, args.seed)?;
    let ids: Vec<usize> = ds.examples.iter().map(|e| e.id).collect();
    let forest = TrainedForest::train(&ds, &ids, &hp)?;
    log::info!(
        "trained {} forest: {} trees on {} examples",
        forest.pattern,
        forest.trees.len(),
        ids.len()
    );
    staged(&args.out, |p| save_model(&forest, &registry, p))
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let (ds, _registry) = load_dataset(&args.dataset)?;
    let folds = load_folds(&args.folds)?;
    let hp = hyperparams(&args.hp, args.seed)?;
    let backend = ForestBackend { hp };
    let report = cross_validate(&ds, &folds, &backend, "forest", args.threshold)?;
    print!("{}", report.to_text());
    if let Some(report_path) = &args.report {
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .unwrap_or_default()
            .as_secs();
        let value = serde_json::json!({
            "metadata": { "generated_at_unix": timestamp },
            "report": report,
        });
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        staged_text(report_path, &text)?;
    }
    Ok(())
}

fn run_search(args: SearchArgs) -> Result<()> {
    let (ds, registry) = load_dataset(&args.dataset)?;
    let folds = load_folds(&args.folds)?;
    let space = SearchSpace::default();
    let outcome = random_search(&ds, &folds, &space, args.budget, args.seed)?;
    log::info!(
        "search: best mean MCC {:.4} over {} trials",
        outcome.best_score,
        outcome.trials.len()
    );
    let value = serde_json::json!({
        "kind": "patlas-search",
        "version": 1,
        "pattern": ds.pattern,
        "budget": args.budget,
        "seed": args.seed,
        "best": outcome.best,
        "best_score": outcome.best_score,
        "trials": outcome.trials,
    });
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');

    let mut written = Vec::new();
    let result = (|| {
        staged_tracked(&mut written, &args.out, |p| {
            fs::write(p, &text)?;
            Ok(())
        })?;
        if let Some(model_path) = &args.model {
            let ids: Vec<usize> = ds.examples.iter().map(|e| e.id).collect();
            let mut forest = TrainedForest::train(&ds, &ids, &outcome.best)?;
            forest.provenance.fold_hash =
                Some(fnv1a64(dataset::folds_to_json(&folds).as_bytes()));
            staged_tracked(&mut written, model_path, |p| save_model(&forest, &registry, p))?;
        }
        Ok(())
    })();
    if result.is_err() {
        clean_artifacts(&written);
    }
    result
}

fn run_detect(args: DetectArgs) -> Result<()> {
    let (forest, mut registry) = load_model(&args.model)?;
    let paths = collect_sources(&args.sources)?;
    let asg = parse_source_files(&args.project, &paths)?;
    let detections = detect_all(&asg);
    let candidates = sample(&asg, &detections, forest.pattern, 0);
    log::info!(
        "detect: scoring {} {} candidates in {}",
        candidates.len(),
        forest.pattern,
        args.project
    );

    let mut scored: Vec<(f64, String, String)> = Vec::with_capacity(candidates.len());
    for candidate in &candidates {
        let fm = frn::normalize(&asg, &detections, candidate, &mut registry)?;
        let probability = forest.predict_fm(&fm)?;
        let roles: Vec<serde_json::Value> = candidate
            .role_bindings()
            .map(|(role, id)| {
                serde_json::json!({ "role": role, "type": asg.type_node(id).name })
            })
            .collect();
        let record = serde_json::json!({
            "pattern": forest.pattern,
            "project": asg.project(),
            "unique_key": fm.unique_key(),
            "probability": probability,
            "positive": probability >= args.threshold,
            "roles": roles,
        });
        scored.push((probability, fm.unique_key(), record.to_string()));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));

    let mut text = String::new();
    for (_, _, line) in &scored {
        text.push_str(line);
        text.push('\n');
    }
    emit(args.out.as_deref(), &text)
}
