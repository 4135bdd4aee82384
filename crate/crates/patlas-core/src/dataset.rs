//! Labeled dataset assembly.
//!
//! Turns ground-truth labels plus sampled candidates into a binary
//! classification dataset of feature maps. Candidates matching a labeled
//! instance become positives; a seeded subsample of the rest becomes
//! negatives, sized by the negative-positive candidate ratio (NPCR).
//! Optional augmentation adds row-permuted copies, and the split planner
//! produces one fold per project so no project's types inform both sides of
//! an evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::asg::{Asg, TypeId};
use crate::error::{Error, Result};
use crate::frn::{normalize, FeatureMap};
use crate::microstructures::MsDetections;
use crate::pattern::{pattern_def, CandidateMapping, Pattern};
use crate::registry::{RegistrySnapshot, RoleRegistry};
use crate::rng;

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

/// One ground-truth occurrence from a label file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelInstance {
    /// Instance id from the file, for reporting.
    pub instance: String,
    pub mapping: CandidateMapping,
}

/// Why a label instance was dropped during loading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DroppedLabel {
    pub project: String,
    pub pattern: Pattern,
    pub instance: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LabelCounts {
    /// Instances in the file.
    pub original: usize,
    /// Instances whose types all resolved to in-project classes.
    pub revised: usize,
    /// Distinct unique keys among revised instances.
    pub unique: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LabelReport {
    pub per_pattern: BTreeMap<Pattern, LabelCounts>,
    pub dropped: Vec<DroppedLabel>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelRow {
    instance: String,
    project: String,
    pattern: String,
    role: String,
    type_name: String,
}

/// Loads a label CSV (columns `instance,project,pattern,role,type_name`, one
/// row per bound role, rows of one instance grouped by the instance column).
///
/// Types resolve against the project's graph by qualified name, falling back
/// to a simple name when it is unambiguous among in-project types. Instances
/// that reference unresolvable or external types, or that do not bind every
/// role, are dropped and reported rather than failing the load; malformed
/// rows (unknown pattern, role not in the pattern, duplicate role) fail it.
pub fn load_labels(
    path: &Path,
    asgs: &BTreeMap<String, Asg>,
) -> Result<(Vec<LabelInstance>, LabelReport)> {
    let mut reader = csv::Reader::from_path(path)?;
    // Group rows per instance, preserving first-appearance order.
    let mut order: Vec<(String, Pattern, String)> = Vec::new();
    let mut groups: BTreeMap<(String, Pattern, String), BTreeMap<String, String>> =
        BTreeMap::new();
    for (idx, row) in reader.deserialize().enumerate() {
        let row: LabelRow = row?;
        let pattern: Pattern = row.pattern.parse().map_err(|_| {
            Error::Label(format!(
                "row {}: unknown pattern {:?}",
                idx + 2,
                row.pattern
            ))
        })?;
        let def = pattern_def(pattern);
        if def.role_index(&row.role).is_none() {
            return Err(Error::Label(format!(
                "row {}: {pattern} has no role {:?}",
                idx + 2,
                row.role
            )));
        }
        let key = (row.project.clone(), pattern, row.instance.clone());
        let group = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            BTreeMap::new()
        });
        if group.insert(row.role.clone(), row.type_name.clone()).is_some() {
            return Err(Error::Label(format!(
                "row {}: instance {:?} binds role {:?} twice",
                idx + 2,
                row.instance,
                row.role
            )));
        }
    }

    let mut report = LabelReport::default();
    let mut out = Vec::new();
    let mut unique: BTreeMap<Pattern, BTreeSet<String>> = BTreeMap::new();
    for key in order {
        let (project, pattern, instance) = key.clone();
        let roles = &groups[&key];
        let counts = report.per_pattern.entry(pattern).or_default();
        counts.original += 1;
        let drop = |reason: String, report: &mut LabelReport| {
            report.dropped.push(DroppedLabel {
                project: project.clone(),
                pattern,
                instance: instance.clone(),
                reason,
            });
        };
        let Some(asg) = asgs.get(&project) else {
            drop(format!("project {project:?} has no graph"), &mut report);
            continue;
        };
        let def = pattern_def(pattern);
        let mut bindings = Vec::with_capacity(def.k());
        let mut failure = None;
        for role in def.roles {
            let Some(type_name) = roles.get(*role) else {
                failure = Some(format!("role {role:?} is unbound"));
                break;
            };
            match resolve_label_type(asg, type_name) {
                Ok(id) => bindings.push(id),
                Err(reason) => {
                    failure = Some(reason);
                    break;
                }
            }
        }
        if failure.is_none() && roles.len() != def.k() {
            failure = Some("binds roles outside the pattern".to_string());
        }
        let mapping = match failure {
            Some(reason) => {
                drop(reason, &mut report);
                continue;
            }
            None => match CandidateMapping::new(asg, pattern, bindings) {
                Ok(m) => m,
                Err(e) => {
                    drop(e.to_string(), &mut report);
                    continue;
                }
            },
        };
        let counts = report.per_pattern.entry(pattern).or_default();
        counts.revised += 1;
        unique
            .entry(pattern)
            .or_default()
            .insert(mapping.unique_key());
        out.push(LabelInstance { instance, mapping });
    }
    for (pattern, keys) in unique {
        report.per_pattern.entry(pattern).or_default().unique = keys.len();
    }
    Ok((out, report))
}

fn resolve_label_type(asg: &Asg, name: &str) -> std::result::Result<TypeId, String> {
    if let Some(id) = asg.find_internal_type(name) {
        return Ok(id);
    }
    let matches: Vec<TypeId> = asg
        .types()
        .iter()
        .filter(|t| asg.is_internal(t.id) && t.simple_name() == name)
        .map(|t| t.id)
        .collect();
    match matches.len() {
        1 => Ok(matches[0]),
        0 => {
            let stub = asg.find_type(name).is_some()
                || asg.types().iter().any(|t| t.simple_name() == name);
            if stub {
                Err(format!("type {name:?} is external to the project"))
            } else {
                Err(format!("type {name:?} not found in the project"))
            }
        }
        n => Err(format!("simple name {name:?} is ambiguous ({n} matches)")),
    }
}

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

/// One feature map with its label and provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledExample {
    /// Dense id; equals the example's index in the dataset.
    pub id: usize,
    pub fm: FeatureMap,
    pub label: bool,
    pub project: String,
    pub unique_key: String,
    /// Source example id when this is a row-permuted copy.
    pub augmented_from: Option<usize>,
    /// Applied permutation: output row `i` is source row `row_order[i]`.
    pub row_order: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub pattern: Pattern,
    pub examples: Vec<LabeledExample>,
    pub npcr: u32,
    pub seed: u64,
    /// Whether positives matched on unique key rather than exact bindings.
    pub relaxed: bool,
}

impl Dataset {
    pub fn positives(&self) -> usize {
        self.examples.iter().filter(|e| e.label).count()
    }

    pub fn negatives(&self) -> usize {
        self.examples.len() - self.positives()
    }

    pub fn projects(&self) -> BTreeSet<&str> {
        self.examples.iter().map(|e| e.project.as_str()).collect()
    }
}

/// Everything build needs from one project.
pub struct ProjectInputs<'a> {
    pub asg: &'a Asg,
    pub detections: &'a MsDetections,
    pub candidates: &'a [CandidateMapping],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BuildReport {
    pub pattern: Pattern,
    pub positives: usize,
    pub negatives_available: usize,
    pub negatives_sampled: usize,
    /// True when fewer negatives existed than the ratio asked for.
    pub clamped: bool,
    /// Labeled instances no sampled candidate matched, by unique key.
    pub unreachable_positives: Vec<String>,
}

/// Builds a labeled dataset for one pattern.
///
/// Candidates matching a label become positives; matching is exact binding
/// equality by default, or unique-key equality in relaxed mode. Negatives
/// are a uniform, seeded subsample without replacement of the remaining
/// candidates, `npcr` per positive, clamped with a warning when the pool is
/// too small. Labeled instances the sampler never produced cannot become
/// examples; they are reported as unreachable.
pub fn build(
    pattern: Pattern,
    projects: &[ProjectInputs],
    positives: &[LabelInstance],
    npcr: u32,
    relaxed: bool,
    seed: u64,
    registry: &mut RoleRegistry,
) -> Result<(Dataset, BuildReport)> {
    if npcr == 0 {
        return Err(Error::Dataset("npcr must be at least 1".to_string()));
    }
    let mut by_project: BTreeMap<&str, &ProjectInputs> = BTreeMap::new();
    for p in projects {
        if by_project.insert(p.asg.project(), p).is_some() {
            return Err(Error::Dataset(format!(
                "project {:?} supplied twice",
                p.asg.project()
            )));
        }
    }

    let mut candidates: Vec<&CandidateMapping> = Vec::new();
    for p in projects {
        for c in p.candidates {
            if c.pattern != pattern {
                return Err(Error::Dataset(format!(
                    "candidate of pattern {} in a {} build",
                    c.pattern, pattern
                )));
            }
            candidates.push(c);
        }
    }
    candidates.sort();
    candidates.dedup();

    let relevant: Vec<&LabelInstance> = positives
        .iter()
        .filter(|l| l.mapping.pattern == pattern)
        .collect();
    let matches = |c: &CandidateMapping| {
        relevant.iter().any(|l| {
            if relaxed {
                l.mapping.project == c.project && l.mapping.unique_key() == c.unique_key()
            } else {
                l.mapping == *c
            }
        })
    };

    let mut positive_candidates = Vec::new();
    let mut negative_pool = Vec::new();
    for c in candidates {
        if matches(c) {
            positive_candidates.push(c);
        } else {
            negative_pool.push(c);
        }
    }
    let unreachable_positives: Vec<String> = {
        let mut keys: Vec<String> = relevant
            .iter()
            .filter(|l| {
                !positive_candidates.iter().any(|c| {
                    if relaxed {
                        c.project == l.mapping.project
                            && c.unique_key() == l.mapping.unique_key()
                    } else {
                        **c == l.mapping
                    }
                })
            })
            .map(|l| l.mapping.unique_key())
            .collect();
        keys.sort();
        keys.dedup();
        keys
    };
    if !unreachable_positives.is_empty() {
        log::warn!(
            "{pattern}: {} labeled instances were never sampled as candidates",
            unreachable_positives.len()
        );
    }
    if positive_candidates.is_empty() {
        return Err(Error::Dataset(format!(
            "{pattern}: no labeled positive appears among the candidates; \
             the negative-positive ratio is undefined"
        )));
    }

    let want = positive_candidates.len() * npcr as usize;
    let take = want.min(negative_pool.len());
    let clamped = take < want;
    if clamped {
        log::warn!(
            "{pattern}: wanted {want} negatives for npcr {npcr} but only {} candidates remain",
            negative_pool.len()
        );
    }
    let mut rng = rng::substream(seed, "negatives");
    let mut chosen: Vec<&CandidateMapping> =
        rand::seq::index::sample(&mut rng, negative_pool.len(), take)
            .iter()
            .map(|i| negative_pool[i])
            .collect();

    let mut selected: Vec<(&CandidateMapping, bool)> = positive_candidates
        .iter()
        .map(|c| (*c, true))
        .chain(chosen.drain(..).map(|c| (c, false)))
        .collect();
    selected.sort_by(|a, b| a.0.cmp(b.0));

    let negatives_sampled = take;
    let negatives_available = negative_pool.len();
    let positives_found = positive_candidates.len();

    let mut examples = Vec::with_capacity(selected.len());
    for (id, (candidate, label)) in selected.into_iter().enumerate() {
        let inputs = by_project.get(candidate.project.as_str()).ok_or_else(|| {
            Error::Dataset(format!(
                "candidate references project {:?} with no inputs",
                candidate.project
            ))
        })?;
        let mut fm = normalize(inputs.asg, inputs.detections, candidate, registry)?;
        fm.label = Some(label);
        examples.push(LabeledExample {
            id,
            unique_key: fm.unique_key(),
            project: candidate.project.clone(),
            fm,
            label,
            augmented_from: None,
            row_order: None,
        });
    }

    Ok((
        Dataset {
            pattern,
            examples,
            npcr,
            seed,
            relaxed,
        },
        BuildReport {
            pattern,
            positives: positives_found,
            negatives_available,
            negatives_sampled,
            clamped,
            unreachable_positives,
        },
    ))
}

/// Adds `passes` row-permuted copies of every example.
///
/// Each copy draws its own permutation from a substream keyed by (pass,
/// source id), so datasets augment identically regardless of call order.
/// Labels, projects, and unique keys carry over; columns are never permuted.
/// The input must be unaugmented: copying copies would skew the original
/// distribution in ways that are hard to reason about.
pub fn augment(ds: &Dataset, passes: u32, seed: u64) -> Result<Dataset> {
    if ds.examples.iter().any(|e| e.augmented_from.is_some()) {
        return Err(Error::Dataset(
            "dataset already contains augmented examples".to_string(),
        ));
    }
    let mut out = ds.clone();
    for pass in 1..=u64::from(passes) {
        for source in &ds.examples {
            let mut rng =
                rng::substream_indexed(seed, "augment", (pass << 32) | source.id as u64);
            let mut perm: Vec<usize> = (0..source.fm.rows).collect();
            perm.shuffle(&mut rng);

            let cols = source.fm.cols;
            let mut cells = vec![0u32; source.fm.cells.len()];
            let mut row_labels = vec![String::new(); source.fm.rows];
            for (new_row, old_row) in perm.iter().enumerate() {
                cells[new_row * cols..(new_row + 1) * cols]
                    .copy_from_slice(&source.fm.cells[old_row * cols..(old_row + 1) * cols]);
                row_labels[new_row] = source.fm.row_labels[*old_row].clone();
            }
            let fm = FeatureMap {
                cells,
                row_labels,
                ..source.fm.clone()
            };
            out.examples.push(LabeledExample {
                id: out.examples.len(),
                fm,
                label: source.label,
                project: source.project.clone(),
                unique_key: source.unique_key.clone(),
                augmented_from: Some(source.id),
                row_order: Some(perm),
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fold {
    pub test_project: String,
    pub test_ids: Vec<usize>,
    pub train_ids: Vec<usize>,
}

/// One fold per project: that project's examples (augmented copies included)
/// test, everything else trains. Verifies that no unique key lands on both
/// sides of any fold.
pub fn project_folds(ds: &Dataset) -> Result<Vec<Fold>> {
    let projects = ds.projects();
    if projects.len() < 2 {
        return Err(Error::Split(format!(
            "project folds need at least two projects, found {}",
            projects.len()
        )));
    }
    let mut folds = Vec::new();
    for project in projects {
        let (test, train): (Vec<&LabeledExample>, Vec<&LabeledExample>) =
            ds.examples.iter().partition(|e| e.project == project);
        let test_keys: BTreeSet<&str> = test.iter().map(|e| e.unique_key.as_str()).collect();
        if let Some(leak) = train.iter().find(|e| test_keys.contains(e.unique_key.as_str())) {
            return Err(Error::Split(format!(
                "unique key {:?} appears in both train and test of fold {project:?}",
                leak.unique_key
            )));
        }
        folds.push(Fold {
            test_project: project.to_string(),
            test_ids: test.iter().map(|e| e.id).collect(),
            train_ids: train.iter().map(|e| e.id).collect(),
        });
    }
    Ok(folds)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FoldPlan {
    fold: Vec<Fold>,
}

pub fn folds_to_json(folds: &[Fold]) -> String {
    let mut text = serde_json::to_string_pretty(&FoldPlan {
        fold: folds.to_vec(),
    })
    .expect("fold plan serializes");
    text.push('\n');
    text
}

pub fn save_folds(folds: &[Fold], path: &Path) -> Result<()> {
    fs::write(path, folds_to_json(folds))?;
    Ok(())
}

pub fn load_folds(path: &Path) -> Result<Vec<Fold>> {
    let text = fs::read_to_string(path)?;
    let plan: FoldPlan = serde_json::from_str(&text)
        .map_err(|e| Error::Split(format!("{}: {e}", path.display())))?;
    Ok(plan.fold)
}

// ---------------------------------------------------------------------------
// Container file
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetHeader {
    kind: String,
    version: u32,
    pattern: Pattern,
    npcr: u32,
    seed: u64,
    relaxed: bool,
    examples: usize,
    registry: RegistrySnapshot,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExampleRecord {
    id: usize,
    project: String,
    label: bool,
    unique_key: String,
    augmented_from: Option<usize>,
    row_order: Option<Vec<usize>>,
    rows: usize,
    cols: usize,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    cells: Vec<u32>,
    /// Candidate bindings in pattern role order.
    candidate: Vec<u32>,
}

/// Writes the dataset as line-delimited JSON: a header record carrying the
/// registry snapshot, then one record per example.
pub fn save_dataset(ds: &Dataset, registry: &RoleRegistry, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    let header = DatasetHeader {
        kind: "patlas-dataset".to_string(),
        version: 1,
        pattern: ds.pattern,
        npcr: ds.npcr,
        seed: ds.seed,
        relaxed: ds.relaxed,
        examples: ds.examples.len(),
        registry: registry.to_snapshot(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.push(b'\n');
    for e in &ds.examples {
        let record = ExampleRecord {
            id: e.id,
            project: e.project.clone(),
            label: e.label,
            unique_key: e.unique_key.clone(),
            augmented_from: e.augmented_from,
            row_order: e.row_order.clone(),
            rows: e.fm.rows,
            cols: e.fm.cols,
            row_labels: e.fm.row_labels.clone(),
            col_labels: e.fm.col_labels.clone(),
            cells: e.fm.cells.clone(),
            candidate: e.fm.candidate.bindings.iter().map(|b| b.0).collect(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.push(b'\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads a container written by [`save_dataset`], restoring the registry it
/// was encoded with and revalidating ids, keys, and registry closure.
pub fn load_dataset(path: &Path) -> Result<(Dataset, RoleRegistry)> {
    let file = fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Dataset("dataset file is empty".to_string()))??;
    let header: DatasetHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::Dataset(format!("dataset header: {e}")))?;
    if header.kind != "patlas-dataset" || header.version != 1 {
        return Err(Error::Dataset(format!(
            "unsupported dataset container {}/{}",
            header.kind, header.version
        )));
    }
    let registry = RoleRegistry::from_snapshot(&header.registry)?;

    let mut examples = Vec::with_capacity(header.examples);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: ExampleRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Dataset(format!("example {}: {e}", examples.len())))?;
        if r.id != examples.len() {
            return Err(Error::Dataset(format!(
                "example ids must be dense; expected {}, found {}",
                examples.len(),
                r.id
            )));
        }
        if r.cells.len() != r.rows * r.cols {
            return Err(Error::Dataset(format!(
                "example {}: {} cells for a {}x{} map",
                r.id,
                r.cells.len(),
                r.rows,
                r.cols
            )));
        }
        for code in r.cells.iter().filter(|c| **c != 0) {
            if registry.describe(*code).is_none() {
                return Err(Error::Dataset(format!(
                    "example {}: cell code {code} is not in the registry",
                    r.id
                )));
            }
        }
        let candidate = CandidateMapping::from_parts(
            header.pattern,
            &r.project,
            r.candidate.iter().map(|b| TypeId(*b)).collect(),
        )?;
        if candidate.unique_key() != r.unique_key {
            return Err(Error::Dataset(format!(
                "example {}: stored unique_key disagrees with bindings",
                r.id
            )));
        }
        let fm = FeatureMap {
            pattern: header.pattern,
            rows: r.rows,
            cols: r.cols,
            cells: r.cells,
            row_labels: r.row_labels,
            col_labels: r.col_labels,
            candidate,
            label: Some(r.label),
        };
        examples.push(LabeledExample {
            id: r.id,
            fm,
            label: r.label,
            project: r.project,
            unique_key: r.unique_key,
            augmented_from: r.augmented_from,
            row_order: r.row_order,
        });
    }
    if examples.len() != header.examples {
        return Err(Error::Dataset(format!(
            "header promises {} examples, file has {}",
            header.examples,
            examples.len()
        )));
    }
    for e in &examples {
        if let Some(src) = e.augmented_from {
            let source = examples.get(src).ok_or_else(|| {
                Error::Dataset(format!("example {}: missing source {src}", e.id))
            })?;
            if source.label != e.label
                || source.project != e.project
                || source.unique_key != e.unique_key
            {
                return Err(Error::Dataset(format!(
                    "augmented example {} disagrees with its source {src}",
                    e.id
                )));
            }
        }
    }
    Ok((
        Dataset {
            pattern: header.pattern,
            examples,
            npcr: header.npcr,
            seed: header.seed,
            relaxed: header.relaxed,
        },
        registry,
    ))
}
