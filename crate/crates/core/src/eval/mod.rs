//! Confusion matrices, precision/recall/F1, one-vs-rest ROC/AUC and the
//! raw-vs-enhanced comparison.

mod render;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use render::{render_improvements, render_table, write_confusion_csv, write_roc_csvs};

use crate::corpus::{ClassId, ClassTaxonomy};
use crate::matrix::FeatureMatrix;
use crate::models::ModelKind;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{0} true labels but {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("label {0} is outside the taxonomy")]
    UnknownLabel(usize),
    #[error("scores cover a single class")]
    SingleClass,
    #[error("score {0} is not finite")]
    NonFiniteScore(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("model sets differ between scenarios: {0}")]
    ModelMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scenario {
    /// Raw TF-IDF features.
    #[serde(rename = "RD")]
    Raw,
    /// Leaf embedding cascade.
    #[serde(rename = "FE")]
    Enhanced,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Raw => "RD",
            Scenario::Enhanced => "FE",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Counts with true classes as rows and predicted classes as columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self, EvalError> {
        let k = counts.len();
        if k == 0 || counts.iter().any(|r| r.len() != k) {
            return Err(EvalError::ShapeMismatch("confusion counts must be square".into()));
        }
        Ok(Self { counts })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn row_sum(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    pub fn col_sum(&self, k: usize) -> u64 {
        self.counts.iter().map(|r| r[k]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|k| self.counts[k][k]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.trace() as f64 / n as f64,
        }
    }
}

pub fn confusion_matrix(
    y_true: &[ClassId],
    y_pred: &[ClassId],
    taxonomy: &ClassTaxonomy,
) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let k = taxonomy.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (t, p) in y_true.iter().zip(y_pred) {
        if t.0 >= k {
            return Err(EvalError::UnknownLabel(t.0));
        }
        if p.0 >= k {
            return Err(EvalError::UnknownLabel(p.0));
        }
        counts[t.0][p.0] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when any of the three hit a 0/0 and was reported as 0.
    pub degenerate: bool,
}

fn ratio(num: u64, den: u64, degenerate: &mut bool) -> f64 {
    if den == 0 {
        *degenerate = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn prf_per_class(cm: &ConfusionMatrix, k: usize) -> Prf {
    let mut degenerate = false;
    let tp = cm.get(k, k);
    let precision = ratio(tp, cm.col_sum(k), &mut degenerate);
    let recall = ratio(tp, cm.row_sum(k), &mut degenerate);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        degenerate = true;
        0.0
    };
    Prf {
        precision,
        recall,
        f1,
        degenerate,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores `>= threshold` are called positive; infinite for the origin.
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
    /// `auc = auc_numerator / auc_denominator`, both exact integers.
    pub auc_numerator: u128,
    pub auc_denominator: u128,
}

/// ROC curve over every distinct score (tied scores enter together) and the
/// trapezoid area, carried as an exact fraction of `2 * P * N`.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocCurve, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch(labels.len(), scores.len()));
    }
    if let Some(&s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore(s));
    }
    let pos = labels.iter().filter(|&&l| l).count() as u128;
    let neg = labels.len() as u128 - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0u128, 0u128);
    let mut area = 0u128;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area += (fp - fp0) * (tp + tp0);
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: s,
        });
    }
    let den = 2 * pos * neg;
    Ok(RocCurve {
        points,
        auc: area as f64 / den as f64,
        auc_numerator: area,
        auc_denominator: den,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when the evaluation set holds no positives or no negatives for the class.
    pub auc: Option<f64>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
}

/// Unweighted mean; `None` for an empty slice.
pub fn macro_average(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

impl MacroMetrics {
    /// Unweighted means over classes. AUC averages the classes where it is defined.
    pub fn from_classes(classes: &[ClassMetrics]) -> Self {
        let col = |f: fn(&ClassMetrics) -> f64| macro_average(&classes.iter().map(f).collect::<Vec<_>>()).unwrap_or(0.0);
        let aucs: Vec<f64> = classes.iter().filter_map(|c| c.auc).collect();
        Self {
            precision: col(|c| c.precision),
            recall: col(|c| c.recall),
            f1: col(|c| c.f1),
            auc: macro_average(&aucs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: ModelKind,
    pub scenario: Scenario,
    pub n: u64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    #[serde(rename = "macro")]
    pub macro_avg: MacroMetrics,
    /// Emitted as separate CSV files rather than inside the structured report.
    #[serde(skip)]
    pub roc: Vec<Option<RocCurve>>,
}

/// Assembles the report for one model and scenario. `probas` holds one
/// probability column per class in taxonomy order.
pub fn build_report(
    cm: &ConfusionMatrix,
    probas: &FeatureMatrix,
    y_true: &[ClassId],
    taxonomy: &ClassTaxonomy,
    model: ModelKind,
    scenario: Scenario,
) -> Result<EvalReport, EvalError> {
    let k = taxonomy.len();
    if cm.n_classes() != k || probas.n_cols() != k {
        return Err(EvalError::ShapeMismatch(format!(
            "taxonomy has {k} classes, confusion matrix {}, probabilities {}",
            cm.n_classes(),
            probas.n_cols()
        )));
    }
    if probas.n_rows() != y_true.len() || cm.total() != y_true.len() as u64 {
        return Err(EvalError::ShapeMismatch(format!(
            "{} labels, {} probability rows, {} confusion entries",
            y_true.len(),
            probas.n_rows(),
            cm.total()
        )));
    }
    let mut per_class = Vec::with_capacity(k);
    let mut roc = Vec::with_capacity(k);
    for c in 0..k {
        let prf = prf_per_class(cm, c);
        let scores: Vec<f64> = probas.rows().map(|r| r[c]).collect();
        let labels: Vec<bool> = y_true.iter().map(|y| y.0 == c).collect();
        let curve = match roc_auc(&scores, &labels) {
            Ok(curve) => Some(curve),
            Err(EvalError::SingleClass) => None,
            Err(e) => return Err(e),
        };
        per_class.push(ClassMetrics {
            class: taxonomy.names()[c].clone(),
            support: cm.row_sum(c),
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
            auc: curve.as_ref().map(|r| r.auc),
            degenerate: prf.degenerate,
        });
        roc.push(curve);
    }
    Ok(EvalReport {
        model,
        scenario,
        n: cm.total(),
        accuracy: cm.accuracy(),
        confusion: cm.clone(),
        macro_avg: MacroMetrics::from_classes(&per_class),
        per_class,
        roc,
    })
}

/// Enhanced minus raw, on accuracy and macro values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub model: ModelKind,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
}

pub fn improvement_table(rd: &[EvalReport], fe: &[EvalReport]) -> Result<Vec<Improvement>, EvalError> {
    let models = |rs: &[EvalReport]| {
        let mut m: Vec<ModelKind> = rs.iter().map(|r| r.model).collect();
        m.sort();
        m
    };
    if models(rd) != models(fe) || rd.len() != fe.len() {
        return Err(EvalError::ModelMismatch(format!("{:?} vs {:?}", models(rd), models(fe))));
    }
    Ok(rd
        .iter()
        .map(|r| {
            let f = fe.iter().find(|f| f.model == r.model).expect("model sets checked");
            let (a, b) = (&r.macro_avg, &f.macro_avg);
            Improvement {
                model: r.model,
                accuracy: f.accuracy - r.accuracy,
                precision: b.precision - a.precision,
                recall: b.recall - a.recall,
                f1: b.f1 - a.f1,
                auc: b.auc.zip(a.auc).map(|(x, y)| x - y),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[usize]) -> Vec<ClassId> {
        v.iter().map(|&i| ClassId(i)).collect()
    }

    #[test]
    fn small_confusion_and_prf() {
        let tax = ClassTaxonomy::new(["A", "B"]).unwrap();
        let cm = confusion_matrix(&ids(&[0, 0, 1]), &ids(&[0, 1, 1]), &tax).unwrap();
        assert_eq!(cm.counts(), &[vec![1, 1], vec![0, 1]]);
        let p = prf_per_class(&cm, 0);
        assert_eq!((p.precision, p.recall), (1.0, 0.5));
        assert!((p.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!(!p.degenerate);
    }

    #[test]
    fn perfect_two_class() {
        let cm = ConfusionMatrix::from_counts(vec![vec![2, 0], vec![0, 2]]).unwrap();
        let p = prf_per_class(&cm, 0);
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn absent_class_is_flagged_zero() {
        let cm = ConfusionMatrix::from_counts(vec![vec![3, 0], vec![0, 0]]).unwrap();
        let p = prf_per_class(&cm, 1);
        assert_eq!((p.precision, p.recall, p.f1), (0.0, 0.0, 0.0));
        assert!(p.degenerate);
    }

    #[test]
    fn confusion_errors() {
        let tax = ClassTaxonomy::new(["A", "B"]).unwrap();
        assert_eq!(
            confusion_matrix(&ids(&[0]), &ids(&[0, 1]), &tax).unwrap_err(),
            EvalError::LengthMismatch(1, 2)
        );
        assert_eq!(
            confusion_matrix(&ids(&[2]), &ids(&[0]), &tax).unwrap_err(),
            EvalError::UnknownLabel(2)
        );
    }

    #[test]
    fn auc_edge_cases() {
        let r = roc_auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(r.auc, 1.0);
        let r = roc_auc(&[0.4; 5], &[true, false, true, false, false]).unwrap();
        assert_eq!(r.auc, 0.5);
        assert_eq!(r.points.len(), 2);
        assert_eq!(roc_auc(&[0.1, 0.2], &[true, true]).unwrap_err(), EvalError::SingleClass);
    }

    #[test]
    fn hand_six_sample_auc() {
        // pairs (pos, neg): pos {0.9, 0.5, 0.3}, neg {0.5, 0.2, 0.1}
        // 0.9 beats 3; 0.5 ties one and beats 2; 0.3 beats 2 -> (3 + 2.5 + 2) / 9
        let r = roc_auc(&[0.9, 0.5, 0.3, 0.5, 0.2, 0.1], &[true, true, true, false, false, false]).unwrap();
        assert_eq!((r.auc_numerator, r.auc_denominator), (15, 18));
    }

    #[test]
    fn improvement_requires_matching_models() {
        let report = |model| EvalReport {
            model,
            scenario: Scenario::Raw,
            n: 1,
            accuracy: 0.5,
            confusion: ConfusionMatrix::from_counts(vec![vec![1]]).unwrap(),
            per_class: vec![],
            macro_avg: MacroMetrics {
                precision: 0.1,
                recall: 0.2,
                f1: 0.3,
                auc: Some(0.4),
            },
            roc: vec![],
        };
        let rd = [report(ModelKind::NaiveBayes)];
        let deltas = improvement_table(&rd, &rd).unwrap();
        assert_eq!(deltas[0].accuracy, 0.0);
        assert_eq!(deltas[0].auc, Some(0.0));
        assert!(improvement_table(&rd, &[report(ModelKind::Mlp2)]).is_err());
    }
}
