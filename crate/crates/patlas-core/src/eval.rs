//! Metrics and project-fold cross-validation.
//!
//! All metrics fall back to 0 when a denominator vanishes; an undefined
//! association is reported as chance level so downstream scoring stays
//! total. The aggregate line uses the sample (n-1) standard deviation
//! because fold counts are small.

use serde::{Deserialize, Serialize};

use crate::classify::ClassifierBackend;
use crate::dataset::{Dataset, Fold};
use crate::error::{Error, Result};
use crate::pattern::Pattern;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    /// Counts (predicted, actual) pairs.
    pub fn tally(pairs: impl IntoIterator<Item = (bool, bool)>) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::default();
        for (predicted, actual) in pairs {
            match (predicted, actual) {
                (true, true) => cm.tp += 1,
                (true, false) => cm.fp += 1,
                (false, false) => cm.tn += 1,
                (false, true) => cm.fn_ += 1,
            }
        }
        cm
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn metrics(&self) -> Result<Metrics> {
        if self.total() == 0 {
            return Err(Error::Metric("empty confusion matrix".to_string()));
        }
        let (tp, fp, tn, fn_) = (
            self.tp as f64,
            self.fp as f64,
            self.tn as f64,
            self.fn_ as f64,
        );
        let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
        let accuracy = (tp + tn) / (tp + fp + tn + fn_);
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = ratio(2.0 * precision * recall, precision + recall);
        let den = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
        let mcc = if den == 0.0 {
            0.0
        } else {
            (tp * tn - fp * fn_) / den.sqrt()
        };
        Ok(Metrics {
            accuracy,
            precision,
            recall,
            f1,
            mcc,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub mcc: f64,
}

impl Metrics {
    fn values(&self) -> [f64; 5] {
        [self.accuracy, self.precision, self.recall, self.f1, self.mcc]
    }

    fn from_values(v: [f64; 5]) -> Metrics {
        Metrics {
            accuracy: v[0],
            precision: v[1],
            recall: v[2],
            f1: v[3],
            mcc: v[4],
        }
    }
}

/// Association-strength label for a correlation magnitude.
pub fn interpret_mcc(mcc: f64) -> Result<&'static str> {
    if !(-1.0..=1.0).contains(&mcc) {
        return Err(Error::Metric(format!("mcc {mcc} outside [-1, 1]")));
    }
    let m = mcc.abs();
    Ok(if m < 0.2 {
        "very weak"
    } else if m < 0.4 {
        "weak"
    } else if m < 0.6 {
        "moderate"
    } else if m < 0.8 {
        "strong"
    } else {
        "very strong"
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FoldOutcome {
    pub fold: usize,
    pub test_project: String,
    pub train_examples: usize,
    pub test_examples: usize,
    /// Reason this fold produced no model, when it did not.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub skipped: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub confusion: Option<ConfusionMatrix>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metrics: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvReport {
    pub model: String,
    pub pattern: Pattern,
    pub threshold: f64,
    pub folds: Vec<FoldOutcome>,
    pub evaluated_folds: usize,
    pub mean: Metrics,
    pub sd: Metrics,
}

impl CvReport {
    /// Aligned table, one row per fold plus the aggregate line.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "model: {} | pattern: {} | threshold: {:.2}\n",
            self.model, self.pattern, self.threshold
        );
        let width = self
            .folds
            .iter()
            .map(|f| f.test_project.len())
            .chain(["project".len()])
            .max()
            .unwrap_or(7);
        out.push_str(&format!(
            "fold  {:width$}  n_test  accuracy  precision  recall     f1    mcc\n",
            "project",
        ));
        for f in &self.folds {
            if let Some(reason) = &f.skipped {
                out.push_str(&format!(
                    "{:>4}  {:width$}  (skipped: {reason})\n",
                    f.fold, f.test_project,
                ));
                continue;
            }
            let m = f.metrics.expect("evaluated fold carries metrics");
            out.push_str(&format!(
                "{:>4}  {:width$}  {:>6}  {:>8.3}  {:>9.3}  {:>6.3}  {:>5.3}  {:>5.3}\n",
                f.fold, f.test_project, f.test_examples,
                m.accuracy, m.precision, m.recall, m.f1, m.mcc,
            ));
        }
        let pm = |m: f64, s: f64| format!("{m:.3} \u{00b1} {s:.3}");
        out.push_str(&format!(
            "aggregate over {} folds: accuracy {}  precision {}  recall {}  f1 {}  mcc {} ({})\n",
            self.evaluated_folds,
            pm(self.mean.accuracy, self.sd.accuracy),
            pm(self.mean.precision, self.sd.precision),
            pm(self.mean.recall, self.sd.recall),
            pm(self.mean.f1, self.sd.f1),
            pm(self.mean.mcc, self.sd.mcc),
            interpret_mcc(self.mean.mcc.clamp(-1.0, 1.0)).expect("clamped"),
        ));
        out
    }
}

/// Trains and scores one model per fold, testing on the held-out project.
///
/// Folds whose training half collapses to a single class are skipped with a
/// warning rather than failing the run; the report says so. Training on the
/// test project is re-checked here even though fold construction already
/// guarantees it.
pub fn cross_validate<B: ClassifierBackend>(
    ds: &Dataset,
    folds: &[Fold],
    backend: &B,
    model_name: &str,
    threshold: f64,
) -> Result<CvReport> {
    if folds.len() < 2 {
        return Err(Error::Metric(format!(
            "cross-validation needs at least 2 folds, got {}",
            folds.len()
        )));
    }
    let mut outcomes = Vec::with_capacity(folds.len());
    let mut evaluated: Vec<Metrics> = Vec::new();
    for (index, fold) in folds.iter().enumerate() {
        for id in &fold.train_ids {
            let e = ds
                .examples
                .get(*id)
                .ok_or_else(|| Error::Split(format!("fold {index} references example {id}")))?;
            if e.project == fold.test_project {
                return Err(Error::Split(format!(
                    "fold {index} trains on its own test project {}",
                    fold.test_project
                )));
            }
        }
        let mut outcome = FoldOutcome {
            fold: index,
            test_project: fold.test_project.clone(),
            train_examples: fold.train_ids.len(),
            test_examples: fold.test_ids.len(),
            skipped: None,
            confusion: None,
            metrics: None,
        };
        let single_class = {
            let mut labels = fold.train_ids.iter().map(|id| ds.examples[*id].label);
            let first = labels.next();
            first.is_none() || labels.all(|l| Some(l) == first)
        };
        if single_class {
            let reason = "single-class training set".to_string();
            log::warn!(
                "skipping fold {index} (test project {}): {reason}",
                fold.test_project
            );
            outcome.skipped = Some(reason);
            outcomes.push(outcome);
            continue;
        }
        let model = backend.train(ds, &fold.train_ids)?;
        let mut pairs = Vec::with_capacity(fold.test_ids.len());
        for id in &fold.test_ids {
            let e = &ds.examples[*id];
            let p = backend.predict(&model, e.fm.flatten())?;
            pairs.push((p >= threshold, e.label));
        }
        let cm = ConfusionMatrix::tally(pairs);
        let metrics = cm.metrics()?;
        outcome.confusion = Some(cm);
        outcome.metrics = Some(metrics);
        evaluated.push(metrics);
        outcomes.push(outcome);
    }
    if evaluated.is_empty() {
        return Err(Error::Metric(
            "every fold was skipped; no metrics to aggregate".to_string(),
        ));
    }
    let n = evaluated.len() as f64;
    let mut mean = [0.0f64; 5];
    for m in &evaluated {
        for (acc, v) in mean.iter_mut().zip(m.values()) {
            *acc += v;
        }
    }
    for acc in &mut mean {
        *acc /= n;
    }
    let mut sd = [0.0f64; 5];
    if evaluated.len() > 1 {
        for m in &evaluated {
            for ((acc, v), mu) in sd.iter_mut().zip(m.values()).zip(mean) {
                *acc += (v - mu) * (v - mu);
            }
        }
        for acc in &mut sd {
            *acc = (*acc / (n - 1.0)).sqrt();
        }
    }
    Ok(CvReport {
        model: model_name.to_string(),
        pattern: ds.pattern,
        threshold,
        folds: outcomes,
        evaluated_folds: evaluated.len(),
        mean: Metrics::from_values(mean),
        sd: Metrics::from_values(sd),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asg::TypeId;
    use crate::classify::{ForestBackend, Hyperparams};
    use crate::dataset::{project_folds, LabeledExample};
    use crate::frn::FeatureMap;
    use crate::pattern::CandidateMapping;
    use proptest::prelude::*;

    fn cm(tp: u64, fp: u64, tn: u64, fn_: u64) -> ConfusionMatrix {
        ConfusionMatrix { tp, fp, tn, fn_ }
    }

    #[test]
    fn metric_endpoints() {
        let perfect = cm(10, 0, 10, 0).metrics().unwrap();
        assert_eq!(perfect.accuracy, 1.0);
        assert_eq!(perfect.precision, 1.0);
        assert_eq!(perfect.recall, 1.0);
        assert_eq!(perfect.f1, 1.0);
        assert_eq!(perfect.mcc, 1.0);

        let inverted = cm(0, 10, 0, 10).metrics().unwrap();
        assert_eq!(inverted.accuracy, 0.0);
        assert_eq!(inverted.mcc, -1.0);

        assert!(cm(0, 0, 0, 0).metrics().is_err());
    }

    #[test]
    fn worked_confusion_example() {
        // tp 6, fp 2, tn 8, fn 4: cross-checked by hand, the numerator is
        // 6*8 - 2*4 = 40 and the denominator sqrt(8*10*10*12) = sqrt(9600),
        // which reduces to 1/sqrt(6).
        let m = cm(6, 2, 8, 4).metrics().unwrap();
        assert!((m.mcc - 40.0 / 9600f64.sqrt()).abs() < 1e-12);
        assert!((m.mcc - 1.0 / 6f64.sqrt()).abs() < 1e-12);
        assert!((m.mcc - 0.408_248_290_463_863).abs() < 1e-12);
        assert!((m.accuracy - 0.7).abs() < 1e-12);
        assert!((m.precision - 0.75).abs() < 1e-12);
        assert!((m.recall - 0.6).abs() < 1e-12);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_denominator_conventions() {
        // Never predicts positive: precision, f1, mcc all collapse to 0.
        let m = cm(0, 0, 5, 5).metrics().unwrap();
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.recall, 0.0);
        assert_eq!(m.f1, 0.0);
        assert_eq!(m.mcc, 0.0);
        // Single-class test set with all-positive predictions.
        let m = cm(5, 0, 0, 0).metrics().unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.mcc, 0.0);
    }

    #[test]
    fn independent_predictions_score_zero() {
        // tp = P*i, fn = P*(j-i), fp = Q*i, tn = Q*(j-i) makes the
        // prediction statistically independent of the label for any
        // margins, so the association must be chance level.
        for p in 1..=4u64 {
            for q in 1..=4u64 {
                for j in 2..=4u64 {
                    for i in 1..j {
                        let m = cm(p * i, q * i, q * (j - i), p * (j - i)).metrics().unwrap();
                        assert!(m.mcc.abs() < 1e-12, "p={p} q={q} i={i} j={j}: {}", m.mcc);
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn swap_symmetries(tp in 0u64..40, fp in 0u64..40, tn in 0u64..40, fn_ in 0u64..40) {
            prop_assume!(tp + fp + tn + fn_ > 0);
            let base = cm(tp, fp, tn, fn_).metrics().unwrap();
            // Relabeling the classes preserves both accuracy and mcc.
            let flipped = cm(tn, fn_, tp, fp).metrics().unwrap();
            prop_assert!((base.accuracy - flipped.accuracy).abs() < 1e-12);
            prop_assert!((base.mcc - flipped.mcc).abs() < 1e-12);
            // Inverting the predictions negates mcc.
            let inverted = cm(fp, tp, fn_, tn).metrics().unwrap();
            prop_assert!((base.mcc + inverted.mcc).abs() < 1e-12);
            for v in base.values() {
                prop_assert!((-1.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn interpretation_scale() {
        assert_eq!(interpret_mcc(0.51).unwrap(), "moderate");
        assert_eq!(interpret_mcc(0.79).unwrap(), "strong");
        assert_eq!(interpret_mcc(-1.0).unwrap(), "very strong");
        assert_eq!(interpret_mcc(0.0).unwrap(), "very weak");
        assert_eq!(interpret_mcc(-0.25).unwrap(), "weak");
        assert_eq!(interpret_mcc(0.2).unwrap(), "weak");
        assert_eq!(interpret_mcc(0.8).unwrap(), "very strong");
        assert!(interpret_mcc(1.2).is_err());
        assert!(interpret_mcc(f64::NAN).is_err());
    }

    /// A dataset of single-cell maps spread over projects; the cell code
    /// equals 7 exactly on positives unless `noisy`.
    fn toy_dataset(projects: &[(&str, usize)], noisy_project: Option<&str>) -> Dataset {
        let mut examples = Vec::new();
        for (project, count) in projects {
            for i in 0..*count {
                let id = examples.len();
                let positive = i % 2 == 0;
                let code = if positive && noisy_project != Some(*project) {
                    7
                } else {
                    3 + (i % 3) as u32
                };
                let candidate = CandidateMapping::from_parts(
                    Pattern::Singleton,
                    project,
                    vec![TypeId(i as u32)],
                )
                .unwrap();
                let fm = FeatureMap {
                    pattern: Pattern::Singleton,
                    rows: 1,
                    cols: 1,
                    cells: vec![code],
                    row_labels: vec!["r0".to_string()],
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

    fn backend() -> ForestBackend {
        ForestBackend {
            hp: Hyperparams {
                n_trees: 4,
                seed: 11,
                ..Hyperparams::default()
            },
        }
    }

    #[test]
    fn separable_data_scores_perfectly() {
        let ds = toy_dataset(&[("alpha", 8), ("beta", 8), ("gamma", 8)], None);
        let folds = project_folds(&ds).unwrap();
        let report = cross_validate(&ds, &folds, &backend(), "forest", 0.5).unwrap();
        assert_eq!(report.folds.len(), 3);
        assert_eq!(report.evaluated_folds, 3);
        assert_eq!(report.mean.mcc, 1.0);
        assert_eq!(report.sd.mcc, 0.0);
        assert_eq!(report.mean.accuracy, 1.0);
        let text = report.to_text();
        assert!(text.contains("1.000 \u{00b1} 0.000"), "{text}");
        assert!(text.contains("very strong"), "{text}");
        assert!(text.contains("pattern: singleton"), "{text}");
    }

    /// Backend that ignores the data and always answers positive.
    struct ConstantPositive;

    impl ClassifierBackend for ConstantPositive {
        type Model = ();

        fn train(&self, _ds: &Dataset, _ids: &[usize]) -> crate::error::Result<()> {
            Ok(())
        }

        fn predict(&self, _model: &(), _features: &[u32]) -> crate::error::Result<f64> {
            Ok(1.0)
        }
    }

    #[test]
    fn constant_predictor_scores_chance_level() {
        let ds = toy_dataset(&[("alpha", 8), ("beta", 8)], None);
        let folds = project_folds(&ds).unwrap();
        let report = cross_validate(&ds, &folds, &ConstantPositive, "const", 0.5).unwrap();
        assert_eq!(report.mean.mcc, 0.0);
        assert_eq!(report.mean.recall, 1.0);
        assert_eq!(report.mean.accuracy, 0.5);
    }

    #[test]
    fn needs_two_folds_and_clean_splits() {
        let ds = toy_dataset(&[("alpha", 8), ("beta", 8)], None);
        let folds = project_folds(&ds).unwrap();
        assert!(cross_validate(&ds, &folds[..1], &backend(), "forest", 0.5).is_err());

        let mut leaky = folds.clone();
        let foreign = leaky[1].train_ids[0];
        leaky[0].train_ids.push(foreign);
        leaky[0].test_project = ds.examples[foreign].project.clone();
        let err = cross_validate(&ds, &leaky, &backend(), "forest", 0.5).unwrap_err();
        assert!(err.to_string().contains("test project"), "{err}");
    }

    #[test]
    fn single_class_training_fold_is_skipped() {
        let ds = toy_dataset(&[("alpha", 8), ("beta", 8)], None);
        let mut folds = project_folds(&ds).unwrap();
        // Restrict fold 0's training rows to positives only.
        folds[0].train_ids.retain(|id| ds.examples[*id].label);
        let report = cross_validate(&ds, &folds, &backend(), "forest", 0.5).unwrap();
        assert_eq!(report.folds.len(), 2);
        assert_eq!(report.evaluated_folds, 1);
        assert!(report.folds[0].skipped.as_deref() == Some("single-class training set"));
        assert!(report.folds[0].metrics.is_none());
        assert!(report.folds[1].metrics.is_some());
        // A lone evaluated fold gets a zero spread.
        assert_eq!(report.sd.accuracy, 0.0);
        assert!(report.to_text().contains("skipped: single-class"));

        folds[1].train_ids.retain(|id| ds.examples[*id].label);
        assert!(cross_validate(&ds, &folds, &backend(), "forest", 0.5).is_err());
    }

    #[test]
    fn report_round_trips_as_json() {
        let ds = toy_dataset(&[("alpha", 8), ("beta", 8), ("gamma", 6)], Some("gamma"));
        let folds = project_folds(&ds).unwrap();
        let report = cross_validate(&ds, &folds, &backend(), "forest", 0.5).unwrap();
        let text = serde_json::to_string_pretty(&report).unwrap();
        let back: CvReport = serde_json::from_str(&text).unwrap();
        assert_eq!(report, back);
    }
}
