//! Random-forest classification over flattened feature maps.
//!
//! Cells hold categorical role codes, so trees split on equality (is the
//! code in this cell exactly v, or anything else) rather than on numeric
//! thresholds; code magnitudes reflect encounter order, nothing more. A
//! threshold mode is kept behind a flag for comparison runs.
//!
//! Every source of randomness is a named substream of the hyper-parameter
//! seed: trees draw their subsample and per-split feature subsets from
//! per-tree streams, so a forest is reproducible regardless of training
//! order or parallelism.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::frn::FeatureMap;
use crate::pattern::Pattern;
use crate::registry::{RegistrySnapshot, RoleRegistry};
use crate::rng;

/// How a split examines a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Partition on code equality; the natural fit for categorical codes.
    Equality,
    /// Partition on code magnitude, mirroring pipelines that feed raw ids
    /// into numeric learners unpreprocessed.
    Threshold,
}

/// Per-split feature pool size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    /// floor(sqrt(dims)), the usual forest heuristic.
    Sqrt,
    /// A fixed fraction of dims, rounded, at least one.
    Fraction(f64),
}

impl FeatureSubsample {
    fn count(&self, dims: usize) -> usize {
        let m = match self {
            FeatureSubsample::Sqrt => (dims as f64).sqrt().floor() as usize,
            FeatureSubsample::Fraction(f) => (f * dims as f64).round() as usize,
        };
        m.clamp(1, dims)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    pub n_trees: u32,
    /// None grows until purity or `min_split` stops a branch.
    pub max_depth: Option<u32>,
    /// Nodes with fewer samples become leaves.
    pub min_split: u32,
    pub feature_subsample: FeatureSubsample,
    /// Fraction of the training set drawn (without replacement) per tree.
    pub bootstrap_fraction: f64,
    pub seed: u64,
    pub split_mode: SplitMode,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            n_trees: 64,
            max_depth: None,
            min_split: 2,
            feature_subsample: FeatureSubsample::Sqrt,
            bootstrap_fraction: 1.0,
            seed: 0,
            split_mode: SplitMode::Equality,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Train("n_trees must be at least 1".to_string()));
        }
        if self.min_split < 2 {
            return Err(Error::Train("min_split must be at least 2".to_string()));
        }
        if let FeatureSubsample::Fraction(f) = self.feature_subsample {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::Train(format!(
                    "feature_subsample fraction {f} outside (0, 1]"
                )));
            }
        }
        if !(self.bootstrap_fraction > 0.0 && self.bootstrap_fraction <= 1.0) {
            return Err(Error::Train(format!(
                "bootstrap_fraction {} outside (0, 1]",
                self.bootstrap_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        /// Positive-class frequency of the training samples that reached
        /// this leaf.
        p: f64,
    },
    Split {
        dim: usize,
        /// Equality mode: take `hit` when `x[dim] == value`. Threshold
        /// mode: take `hit` when `x[dim] <= value`.
        value: u32,
        mode: SplitMode,
        hit: Box<TreeNode>,
        miss: Box<TreeNode>,
    },
}

impl TreeNode {
    fn leaf_for(labels: &[bool], samples: &[usize]) -> TreeNode {
        let pos = samples.iter().filter(|i| labels[**i]).count();
        TreeNode::Leaf {
            p: pos as f64 / samples.len() as f64,
        }
    }

    fn predict(&self, x: &[u32]) -> f64 {
        match self {
            TreeNode::Leaf { p } => *p,
            TreeNode::Split {
                dim,
                value,
                mode,
                hit,
                miss,
            } => {
                let take_hit = match mode {
                    SplitMode::Equality => x[*dim] == *value,
                    SplitMode::Threshold => x[*dim] <= *value,
                };
                if take_hit {
                    hit.predict(x)
                } else {
                    miss.predict(x)
                }
            }
        }
    }

    fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { hit, miss, .. } => 1 + hit.depth().max(miss.depth()),
        }
    }

    fn validate(&self, dims: usize) -> Result<()> {
        match self {
            TreeNode::Leaf { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::Predict(format!("leaf frequency {p} outside [0, 1]")));
                }
            }
            TreeNode::Split { dim, hit, miss, .. } => {
                if *dim >= dims {
                    return Err(Error::Predict(format!(
                        "split dimension {dim} outside {dims} input dimensions"
                    )));
                }
                hit.validate(dims)?;
                miss.validate(dims)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    /// Dataset build seed, echoed for audit.
    pub dataset_seed: u64,
    pub npcr: u32,
    pub trained_on: usize,
    /// Digest of the fold plan when training data came from one.
    pub fold_hash: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainedForest {
    pub pattern: Pattern,
    /// Flattened input length (catalog rows times pattern roles).
    pub dims: usize,
    pub hp: Hyperparams,
    pub provenance: Provenance,
    pub trees: Vec<TreeNode>,
}

impl TrainedForest {
    /// Trains one forest on `train_ids` of the dataset.
    ///
    /// Each tree sees a seeded subsample of the rows and greedily picks the
    /// best Gini split over a fresh uniform subset of the cells that vary
    /// at that node; zero-gain splits end the branch. Both classes must be
    /// present: a single-class set has no boundary to learn and almost
    /// always signals an upstream filtering mistake.
    pub fn train(ds: &Dataset, train_ids: &[usize], hp: &Hyperparams) -> Result<TrainedForest> {
        hp.validate()?;
        if train_ids.is_empty() {
            return Err(Error::Train("training set is empty".to_string()));
        }
        let mut features: Vec<&[u32]> = Vec::with_capacity(train_ids.len());
        let mut labels: Vec<bool> = Vec::with_capacity(train_ids.len());
        for id in train_ids {
            let e = ds
                .examples
                .get(*id)
                .ok_or_else(|| Error::Train(format!("train id {id} outside the dataset")))?;
            features.push(e.fm.flatten());
            labels.push(e.label);
        }
        let dims = features[0].len();
        if features.iter().any(|f| f.len() != dims) {
            return Err(Error::Train("examples disagree on dimensions".to_string()));
        }
        if labels.iter().all(|l| *l) || labels.iter().all(|l| !*l) {
            return Err(Error::Train(
                "training set contains a single class".to_string(),
            ));
        }

        let n = features.len();
        let per_tree = ((hp.bootstrap_fraction * n as f64).round() as usize).clamp(1, n);
        let mut trees = Vec::with_capacity(hp.n_trees as usize);
        for tree_index in 0..u64::from(hp.n_trees) {
            let mut tree_rng = rng::substream_indexed(hp.seed, "tree", tree_index);
            let samples: Vec<usize> = if per_tree == n {
                (0..n).collect()
            } else {
                let mut picked: Vec<usize> =
                    rand::seq::index::sample(&mut tree_rng, n, per_tree).into_iter().collect();
                picked.sort_unstable();
                picked
            };
            trees.push(grow(
                &features,
                &labels,
                samples,
                hp,
                dims,
                0,
                &mut tree_rng,
            ));
        }
        Ok(TrainedForest {
            pattern: ds.pattern,
            dims,
            hp: hp.clone(),
            provenance: Provenance {
                dataset_seed: ds.seed,
                npcr: ds.npcr,
                trained_on: n,
                fold_hash: None,
            },
            trees,
        })
    }

    /// Mean positive-leaf frequency across trees.
    ///
    /// Codes never seen in training compare unequal to every learned split
    /// value and simply fall through the miss branches.
    pub fn predict(&self, features: &[u32]) -> Result<f64> {
        if features.len() != self.dims {
            return Err(Error::Predict(format!(
                "input has {} dimensions, model expects {}",
                features.len(),
                self.dims
            )));
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(features)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    pub fn predict_fm(&self, fm: &FeatureMap) -> Result<f64> {
        if fm.pattern != self.pattern {
            return Err(Error::Predict(format!(
                "model was trained for {}, map is for {}",
                self.pattern, fm.pattern
            )));
        }
        self.predict(fm.flatten())
    }

    /// Probability threshold to class decision.
    pub fn decide(&self, features: &[u32], threshold: f64) -> Result<bool> {
        Ok(self.predict(features)? >= threshold)
    }

    pub fn max_depth_reached(&self) -> usize {
        self.trees.iter().map(TreeNode::depth).max().unwrap_or(0)
    }
}

fn impurity(count: usize, positives: usize) -> f64 {
    let p = positives as f64 / count as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

fn grow(
    features: &[&[u32]],
    labels: &[bool],
    samples: Vec<usize>,
    hp: &Hyperparams,
    dims: usize,
    depth: u32,
    tree_rng: &mut rand_chacha::ChaCha20Rng,
) -> TreeNode {
    let total = samples.len();
    let total_pos = samples.iter().filter(|i| labels[**i]).count();
    let parent_impurity = impurity(total, total_pos);
    let stop = total < hp.min_split as usize
        || parent_impurity == 0.0
        || hp.max_depth.is_some_and(|d| depth >= d);
    if stop {
        return TreeNode::leaf_for(labels, &samples);
    }

    // Cells constant within the node cannot split it and never count
    // against the pool size: the search walks a shuffled dimension order
    // and stops once it has scored `m` dimensions that actually vary here,
    // so sparse maps still grow past their uninformative rows. At full
    // pool size the order stays ascending and consumes no randomness.
    let m = hp.feature_subsample.count(dims);
    let full = m >= dims;
    let mut order: Vec<usize> = (0..dims).collect();
    if !full {
        use rand::seq::SliceRandom;
        order.shuffle(tree_rng);
    }

    // One counting pass per dimension scores every candidate value; only
    // the winning split partitions the sample list.
    let mut best: Option<(f64, usize, u32)> = None;
    let mut consider = |gain: f64, dim: usize, value: u32| {
        if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
            best = Some((gain, dim, value));
        }
    };
    let mut varying_seen = 0usize;
    for dim in order {
        if !full && varying_seen >= m {
            break;
        }
        let mut tally: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
        for s in &samples {
            let e = tally.entry(features[*s][dim]).or_insert((0, 0));
            e.0 += 1;
            e.1 += usize::from(labels[*s]);
        }
        if tally.len() < 2 {
            continue;
        }
        varying_seen += 1;
        let gain_of = |hit_count: usize, hit_pos: usize| {
            let frac_hit = hit_count as f64 / total as f64;
            parent_impurity
                - frac_hit * impurity(hit_count, hit_pos)
                - (1.0 - frac_hit) * impurity(total - hit_count, total_pos - hit_pos)
        };
        match hp.split_mode {
            SplitMode::Equality => {
                for (value, (count, pos)) in &tally {
                    consider(gain_of(*count, *pos), dim, *value);
                }
            }
            SplitMode::Threshold => {
                // Prefix sums over ascending values; x <= v is vacuous for
                // the largest value.
                let mut acc = (0usize, 0usize);
                for (k, (value, (count, pos))) in tally.iter().enumerate() {
                    acc.0 += count;
                    acc.1 += pos;
                    if k + 1 == tally.len() {
                        break;
                    }
                    consider(gain_of(acc.0, acc.1), dim, *value);
                }
            }
        }
    }

    match best {
        None => TreeNode::leaf_for(labels, &samples),
        Some((_, dim, value)) => {
            let (hit, miss): (Vec<usize>, Vec<usize>) =
                samples.iter().partition(|i| match hp.split_mode {
                    SplitMode::Equality => features[**i][dim] == value,
                    SplitMode::Threshold => features[**i][dim] <= value,
                });
            let hit = grow(features, labels, hit, hp, dims, depth + 1, tree_rng);
            let miss = grow(features, labels, miss, hp, dims, depth + 1, tree_rng);
            TreeNode::Split {
                dim,
                value,
                mode: hp.split_mode,
                hit: Box::new(hit),
                miss: Box::new(miss),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Backend interface
// ---------------------------------------------------------------------------

/// A trainable classifier over flattened feature maps. Evaluation code only
/// depends on this, so other model families can slot in.
pub trait ClassifierBackend {
    type Model;

    fn train(&self, ds: &Dataset, train_ids: &[usize]) -> Result<Self::Model>;
    fn predict(&self, model: &Self::Model, features: &[u32]) -> Result<f64>;
}

/// The random-forest backend.
#[derive(Debug, Clone)]
pub struct ForestBackend {
    pub hp: Hyperparams,
}

impl ClassifierBackend for ForestBackend {
    type Model = TrainedForest;

    fn train(&self, ds: &Dataset, train_ids: &[usize]) -> Result<TrainedForest> {
        TrainedForest::train(ds, train_ids, &self.hp)
    }

    fn predict(&self, model: &TrainedForest, features: &[u32]) -> Result<f64> {
        model.predict(features)
    }
}

// ---------------------------------------------------------------------------
// Model file
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    kind: String,
    version: u32,
    registry: RegistrySnapshot,
    #[serde(flatten)]
    forest: TrainedForest,
}

/// Serializes a model together with the registry snapshot its features were
/// encoded with; prediction inputs must be normalized under a registry that
/// extends this snapshot.
pub fn model_to_json(forest: &TrainedForest, registry: &RoleRegistry) -> Result<String> {
    let file = ModelFile {
        kind: "patlas-model".to_string(),
        version: 1,
        registry: registry.to_snapshot(),
        forest: forest.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    Ok(text)
}

pub fn save_model(forest: &TrainedForest, registry: &RoleRegistry, path: &Path) -> Result<()> {
    fs::write(path, model_to_json(forest, registry)?)?;
    Ok(())
}

pub fn model_from_json(text: &str) -> Result<(TrainedForest, RoleRegistry)> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::Predict(format!("model file: {e}")))?;
    if file.kind != "patlas-model" || file.version != 1 {
        return Err(Error::Predict(format!(
            "unsupported model container {}/{}",
            file.kind, file.version
        )));
    }
    let registry = RoleRegistry::from_snapshot(&file.registry)?;
    for tree in &file.forest.trees {
        tree.validate(file.forest.dims)?;
    }
    if file.forest.trees.len() != file.forest.hp.n_trees as usize {
        return Err(Error::Predict(format!(
            "model stores {} trees but declares n_trees {}",
            file.forest.trees.len(),
            file.forest.hp.n_trees
        )));
    }
    Ok((file.forest, registry))
}

pub fn load_model(path: &Path) -> Result<(TrainedForest, RoleRegistry)> {
    model_from_json(&fs::read_to_string(path)?)
}
