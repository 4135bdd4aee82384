//! Budgeted random search over forest hyper-parameters.
//!
//! Configurations are drawn uniformly from the declared space, scored by
//! project-fold cross-validation, and ranked by mean MCC. A trial that
//! fails keeps its slot with a score of -1 so the argmax stays defined
//! across the whole budget.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classify::{FeatureSubsample, ForestBackend, Hyperparams, SplitMode};
use crate::dataset::{Dataset, Fold};
use crate::error::{Error, Result};
use crate::eval::cross_validate;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    /// Inclusive bounds, sampled log-uniformly.
    pub n_trees: (u32, u32),
    /// Inclusive bounds, sampled uniformly.
    pub max_depth: (u32, u32),
    /// Inclusive bounds, sampled uniformly.
    pub min_split: (u32, u32),
    /// Uniform choice among the listed pool sizes.
    pub feature_subsample: Vec<FeatureSubsample>,
    /// Inclusive bounds, sampled uniformly.
    pub bootstrap_fraction: (f64, f64),
    /// Fixed for the whole search, not sampled.
    pub split_mode: SplitMode,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            n_trees: (8, 256),
            max_depth: (2, 32),
            min_split: (2, 16),
            feature_subsample: vec![
                FeatureSubsample::Sqrt,
                FeatureSubsample::Fraction(0.25),
                FeatureSubsample::Fraction(0.5),
                FeatureSubsample::Fraction(1.0),
            ],
            bootstrap_fraction: (0.5, 1.0),
            split_mode: SplitMode::Equality,
        }
    }
}

impl SearchSpace {
    fn validate(&self) -> Result<()> {
        let ordered = |(lo, hi): (u32, u32)| lo <= hi;
        if self.n_trees.0 == 0 || !ordered(self.n_trees) {
            return Err(Error::Search(format!("bad n_trees range {:?}", self.n_trees)));
        }
        if !ordered(self.max_depth) {
            return Err(Error::Search(format!(
                "bad max_depth range {:?}",
                self.max_depth
            )));
        }
        if self.min_split.0 < 2 || !ordered(self.min_split) {
            return Err(Error::Search(format!(
                "bad min_split range {:?}",
                self.min_split
            )));
        }
        if self.feature_subsample.is_empty() {
            return Err(Error::Search("empty feature_subsample pool".to_string()));
        }
        let (lo, hi) = self.bootstrap_fraction;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::Search(format!(
                "bad bootstrap_fraction range {:?}",
                self.bootstrap_fraction
            )));
        }
        Ok(())
    }

    /// One uniform draw. The forest seed is the search seed itself, so a
    /// one-point space yields byte-identical trials.
    fn draw(&self, rng: &mut rand_chacha::ChaCha20Rng, seed: u64) -> Hyperparams {
        let (lo, hi) = self.n_trees;
        let n_trees = if lo == hi {
            lo
        } else {
            let ln = rng.random_range(f64::from(lo).ln()..=f64::from(hi).ln());
            (ln.exp().round() as u32).clamp(lo, hi)
        };
        Hyperparams {
            n_trees,
            max_depth: Some(rng.random_range(self.max_depth.0..=self.max_depth.1)),
            min_split: rng.random_range(self.min_split.0..=self.min_split.1),
            feature_subsample: self.feature_subsample
                [rng.random_range(0..self.feature_subsample.len())],
            bootstrap_fraction: rng
                .random_range(self.bootstrap_fraction.0..=self.bootstrap_fraction.1),
            seed,
            split_mode: self.split_mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trial {
    pub index: usize,
    pub hp: Hyperparams,
    /// Mean MCC across evaluated folds; -1 when the trial failed.
    pub score: f64,
    pub score_sd: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchOutcome {
    pub best: Hyperparams,
    pub best_score: f64,
    pub trials: Vec<Trial>,
}

/// True when `a` outranks `b`: higher score, then fewer trees, then a
/// shallower depth cap, then earlier draw.
fn outranks(a: &Trial, b: &Trial) -> bool {
    let depth = |t: &Trial| t.hp.max_depth.unwrap_or(u32::MAX);
    (b.score, a.hp.n_trees, depth(a), a.index)
        < (a.score, b.hp.n_trees, depth(b), b.index)
}

/// Draws and scores `budget` configurations.
pub fn random_search(
    ds: &Dataset,
    folds: &[Fold],
    space: &SearchSpace,
    budget: u32,
    seed: u64,
) -> Result<SearchOutcome> {
    if budget == 0 {
        return Err(Error::Search("budget must be at least 1".to_string()));
    }
    space.validate()?;
    let mut trials = Vec::with_capacity(budget as usize);
    for index in 0..budget as usize {
        let mut draw_rng = rng::substream_indexed(seed, "trial", index as u64);
        let hp = space.draw(&mut draw_rng, seed);
        let backend = ForestBackend { hp: hp.clone() };
        let trial = match cross_validate(ds, folds, &backend, "forest", 0.5) {
            Ok(report) => Trial {
                index,
                hp,
                score: report.mean.mcc,
                score_sd: report.sd.mcc,
                error: None,
            },
            Err(e) => {
                log::warn!("trial {index} failed: {e}");
                Trial {
                    index,
                    hp,
                    score: -1.0,
                    score_sd: 0.0,
                    error: Some(e.to_string()),
                }
            }
        };
        trials.push(trial);
    }
    let best = trials
        .iter()
        .fold(None::<&Trial>, |best, t| match best {
            Some(b) if !outranks(t, b) => Some(b),
            _ => Some(t),
        })
        .expect("budget is at least 1");
    Ok(SearchOutcome {
        best: best.hp.clone(),
        best_score: best.score,
        trials: trials.clone(),
    })
}

/// The strongest `k` trials in rank order, keeping every trial whose score
/// ties the k-th one.
pub fn top_trials(trials: &[Trial], k: usize) -> Vec<&Trial> {
    let mut ranked: Vec<&Trial> = trials.iter().collect();
    ranked.sort_by(|a, b| {
        if outranks(a, b) {
            std::cmp::Ordering::Less
        } else if outranks(b, a) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
    if k == 0 || ranked.len() <= k {
        return ranked;
    }
    let boundary = ranked[k - 1].score;
    let keep = ranked
        .iter()
        .position(|t| t.score < boundary)
        .unwrap_or(ranked.len())
        .max(k);
    ranked.truncate(keep);
    ranked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asg::TypeId;
    use crate::dataset::{project_folds, LabeledExample};
    use crate::frn::FeatureMap;
    use crate::pattern::{CandidateMapping, Pattern};

    fn toy_dataset(per_project: usize, single_class_projects: bool) -> Dataset {
        let mut examples = Vec::new();
        let projects: &[&str] = if single_class_projects {
            // Two pure projects leave every fold's training half
            // single-class, so every trial must fail.
            &["alpha", "beta"]
        } else {
            &["alpha", "beta", "gamma"]
        };
        for project in projects.iter().copied() {
            for i in 0..per_project {
                let id = examples.len();
                let positive = if single_class_projects {
                    project == "alpha"
                } else {
                    i % 2 == 0
                };
                let code = if positive { 7 } else { 3 + (i % 3) as u32 };
                let candidate =
                    CandidateMapping::from_parts(Pattern::Singleton, project, vec![TypeId(i as u32)])
                        .unwrap();
                let fm = FeatureMap {
                    pattern: Pattern::Singleton,
                    rows: 2,
                    cols: 1,
                    cells: vec![code, (i % 2) as u32],
                    row_labels: vec!["r0".to_string(), "r1".to_string()],
                    col_labels: vec!["Singleton".to_string()],
                    label: Some(positive),
                    candidate,
                };
                examples.push(LabeledExample {
                    id,
                    label: positive,
                    project: project.to_string(),
                    unique_key: fm.unique_key(),
                    augmented_from: None,
                    row_order: None,
                    fm,
                });
            }
        }
        Dataset {
            pattern: Pattern::Singleton,
            examples,
            npcr: 1,
            seed: 0,
            relaxed: false,
        }
    }

    fn point_space() -> SearchSpace {
        SearchSpace {
            n_trees: (4, 4),
            max_depth: (3, 3),
            min_split: (2, 2),
            feature_subsample: vec![FeatureSubsample::Fraction(1.0)],
            bootstrap_fraction: (1.0, 1.0),
            split_mode: SplitMode::Equality,
        }
    }

    #[test]
    fn budget_one_returns_its_single_draw() {
        let ds = toy_dataset(8, false);
        let folds = project_folds(&ds).unwrap();
        let out = random_search(&ds, &folds, &SearchSpace::default(), 1, 5).unwrap();
        assert_eq!(out.trials.len(), 1);
        assert_eq!(out.best, out.trials[0].hp);
        assert_eq!(out.best_score, out.trials[0].score);
    }

    #[test]
    fn one_point_space_yields_identical_trials() {
        let ds = toy_dataset(8, false);
        let folds = project_folds(&ds).unwrap();
        let out = random_search(&ds, &folds, &point_space(), 5, 9).unwrap();
        assert_eq!(out.trials.len(), 5);
        for t in &out.trials {
            assert_eq!(t.hp, out.trials[0].hp);
            assert_eq!(t.score, out.trials[0].score);
        }
        // Exact ties resolve to draw order.
        assert_eq!(out.best, out.trials[0].hp);
        assert_eq!(out.best_score, 1.0, "separable toy data");
    }

    #[test]
    fn search_is_deterministic_and_stays_in_bounds() {
        let ds = toy_dataset(8, false);
        let folds = project_folds(&ds).unwrap();
        let space = SearchSpace::default();
        let a = random_search(&ds, &folds, &space, 6, 42).unwrap();
        let b = random_search(&ds, &folds, &space, 6, 42).unwrap();
        assert_eq!(a, b);
        for t in &a.trials {
            assert!((8..=256).contains(&t.hp.n_trees));
            assert!((2..=32).contains(&t.hp.max_depth.unwrap()));
            assert!((2..=16).contains(&t.hp.min_split));
            assert!((0.5..=1.0).contains(&t.hp.bootstrap_fraction));
            assert_eq!(t.hp.seed, 42);
        }
        // Draws actually vary across the budget.
        assert!(a.trials.iter().any(|t| t.hp != a.trials[0].hp));
        // The winner never scores below the default configuration on the
        // same data (argmax property; both reach 1.0 here).
        let default_backend = ForestBackend {
            hp: Hyperparams {
                seed: 42,
                ..Hyperparams::default()
            },
        };
        let default_score = cross_validate(&ds, &folds, &default_backend, "forest", 0.5)
            .unwrap()
            .mean
            .mcc;
        assert!(a.best_score >= default_score);
    }

    #[test]
    fn failed_trials_keep_their_slot_at_minus_one() {
        // Every project is single-class, so every fold's training half is
        // too, and every cross-validation errors out.
        let ds = toy_dataset(6, true);
        let folds = project_folds(&ds).unwrap();
        let out = random_search(&ds, &folds, &SearchSpace::default(), 4, 1).unwrap();
        assert_eq!(out.trials.len(), 4);
        for t in &out.trials {
            assert_eq!(t.score, -1.0);
            assert!(t.error.is_some());
        }
        assert_eq!(out.best_score, -1.0);
        assert_eq!(out.best, out.trials[0].hp);
    }

    #[test]
    fn rejects_bad_inputs() {
        let ds = toy_dataset(8, false);
        let folds = project_folds(&ds).unwrap();
        assert!(random_search(&ds, &folds, &SearchSpace::default(), 0, 1).is_err());
        let bad = SearchSpace {
            min_split: (1, 4),
            ..SearchSpace::default()
        };
        assert!(random_search(&ds, &folds, &bad, 1, 1).is_err());
        let bad = SearchSpace {
            feature_subsample: vec![],
            ..SearchSpace::default()
        };
        assert!(random_search(&ds, &folds, &bad, 1, 1).is_err());
    }

    fn trial(index: usize, score: f64, n_trees: u32, depth: Option<u32>) -> Trial {
        Trial {
            index,
            hp: Hyperparams {
                n_trees,
                max_depth: depth,
                ..Hyperparams::default()
            },
            score,
            score_sd: 0.0,
            error: None,
        }
    }

    #[test]
    fn ranking_breaks_ties_toward_simpler_models() {
        let trials = vec![
            trial(0, 0.9, 64, Some(8)),
            trial(1, 0.9, 16, Some(8)),
            trial(2, 0.9, 16, Some(4)),
            trial(3, 0.9, 16, None),
            trial(4, 0.8, 8, Some(2)),
        ];
        let ranked = top_trials(&trials, 10);
        let order: Vec<usize> = ranked.iter().map(|t| t.index).collect();
        // Equal scores: fewer trees first, then shallower, unlimited depth
        // last among equals, and score still dominates everything.
        assert_eq!(order, vec![2, 1, 3, 0, 4]);
    }

    #[test]
    fn top_trials_include_boundary_ties() {
        let trials = vec![
            trial(0, 1.0, 8, Some(2)),
            trial(1, 0.9, 8, Some(2)),
            trial(2, 0.9, 16, Some(2)),
            trial(3, 0.9, 32, Some(2)),
            trial(4, 0.5, 8, Some(2)),
        ];
        let top = top_trials(&trials, 2);
        assert_eq!(top.len(), 4, "everything tied at the 2nd score stays");
        assert!(top.iter().all(|t| t.score >= 0.9));
        assert_eq!(top_trials(&trials, 30).len(), 5);
    }
}
