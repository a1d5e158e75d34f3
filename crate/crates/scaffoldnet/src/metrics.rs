//! Evaluation metrics: accuracy, mean absolute error, per-class ROC curves,
//! and micro/macro-averaged AUC for the three-class classifier.

use crate::error::{Error, Result};
use crate::model::CLASS_COUNT;

/// One ROC operating point. `threshold` is NaN on averaged curves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// ROC curve with its trapezoidal AUC. Points run from (0, 0) to (1, 1)
/// with non-decreasing FPR and TPR.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Fraction of exact label matches.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::Input(format!(
            "accuracy needs equal non-empty label vectors, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Mean absolute difference over all `N x K` probability/indicator entries.
pub fn mae(probs: &[[f64; CLASS_COUNT]], onehot: &[[f64; CLASS_COUNT]]) -> Result<f64> {
    if probs.len() != onehot.len() || probs.is_empty() {
        return Err(Error::Input(format!(
            "MAE needs equal non-empty matrices, got {} and {} rows",
            probs.len(),
            onehot.len()
        )));
    }
    let mut total = 0.0;
    for (p, y) in probs.iter().zip(onehot) {
        for c in 0..CLASS_COUNT {
            total += (p[c] - y[c]).abs();
        }
    }
    Ok(total / (probs.len() * CLASS_COUNT) as f64)
}

/// Trapezoidal integral of TPR over FPR.
pub fn auc_trapezoid(points: &[RocPoint]) -> f64 {
    let mut area = 0.0;
    for pair in points.windows(2) {
        area += (pair[1].fpr - pair[0].fpr) * (pair[1].tpr + pair[0].tpr) / 2.0;
    }
    area
}

/// Binary ROC swept over descending distinct scores; tied scores collapse to
/// one operating point. Requires at least one positive and one negative.
pub fn roc_binary(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::Input(format!(
            "ROC needs equal non-empty score/label vectors, got {} and {}",
            scores.len(),
            labels.len()
        )));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate(
            "ROC needs both a positive and a negative label".into(),
        ));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        // absorb the whole tie group
        while i < order.len() && scores[order[i]] == score {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold: score,
        });
    }
    let auc = auc_trapezoid(&points);
    Ok(RocCurve { points, auc })
}

/// TPR of a curve at the given FPR. Linear between breakpoints; at a
/// breakpoint with a vertical run, returns the top of the run (the upper
/// envelope), which preserves trapezoidal areas on refined grids.
fn interp_tpr(curve: &RocCurve, x: f64) -> f64 {
    let pts = &curve.points;
    // index of the last point with fpr <= x
    let mut lo = pts.partition_point(|p| p.fpr <= x);
    if lo == 0 {
        return pts[0].tpr;
    }
    lo -= 1;
    if pts[lo].fpr == x || lo + 1 == pts.len() {
        return pts[lo].tpr;
    }
    let (a, b) = (&pts[lo], &pts[lo + 1]);
    a.tpr + (b.tpr - a.tpr) * (x - a.fpr) / (b.fpr - a.fpr)
}

/// Per-class one-vs-rest curves plus micro and macro averages.
#[derive(Debug, Clone)]
pub struct MulticlassRoc {
    /// `None` marks a degenerate class (absent from the labels).
    pub per_class: [Option<RocCurve>; CLASS_COUNT],
    /// ROC over the flattened `N x K` score/indicator matrices.
    pub micro: RocCurve,
    /// Mean per-class TPR on the union FPR grid; `None` if every class was
    /// degenerate.
    pub macro_curve: Option<RocCurve>,
}

impl MulticlassRoc {
    pub fn macro_auc(&self) -> Option<f64> {
        self.macro_curve.as_ref().map(|c| c.auc)
    }
}

/// Build per-class, micro-averaged, and macro-averaged ROC curves from
/// class-probability rows and integer labels.
pub fn multiclass_roc(probs: &[[f64; CLASS_COUNT]], labels: &[usize]) -> Result<MulticlassRoc> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::Input(format!(
            "multiclass ROC needs equal non-empty inputs, got {} and {}",
            probs.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= CLASS_COUNT) {
        return Err(Error::Input(format!(
            "label {bad} out of range for {CLASS_COUNT} classes"
        )));
    }

    let per_class: [Option<RocCurve>; CLASS_COUNT] = std::array::from_fn(|c| {
        let scores: Vec<f64> = probs.iter().map(|p| p[c]).collect();
        let binary: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        roc_binary(&scores, &binary).ok()
    });

    // micro: every matrix element is one binary prediction
    let mut flat_scores = Vec::with_capacity(probs.len() * CLASS_COUNT);
    let mut flat_labels = Vec::with_capacity(probs.len() * CLASS_COUNT);
    for (p, &l) in probs.iter().zip(labels) {
        for (c, &score) in p.iter().enumerate() {
            flat_scores.push(score);
            flat_labels.push(l == c);
        }
    }
    let micro = roc_binary(&flat_scores, &flat_labels)?;

    let available: Vec<&RocCurve> = per_class.iter().flatten().collect();
    let macro_curve = if available.is_empty() {
        None
    } else {
        let mut grid: Vec<f64> = available
            .iter()
            .flat_map(|c| c.points.iter().map(|p| p.fpr))
            .collect();
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();
        let points: Vec<RocPoint> = grid
            .into_iter()
            .map(|x| {
                let mean_tpr = available.iter().map(|c| interp_tpr(c, x)).sum::<f64>()
                    / available.len() as f64;
                RocPoint {
                    fpr: x,
                    tpr: mean_tpr,
                    threshold: f64::NAN,
                }
            })
            .collect();
        let auc = auc_trapezoid(&points);
        Some(RocCurve { points, auc })
    };

    Ok(MulticlassRoc {
        per_class,
        micro,
        macro_curve,
    })
}

/// Aggregate evaluation report for one sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub cross_entropy: f64,
    pub mae: f64,
    pub per_class_auc: [Option<f64>; CLASS_COUNT],
    pub micro_auc: f64,
    pub macro_auc: Option<f64>,
    /// `confusion[true_class][predicted_class]`.
    pub confusion: [[usize; CLASS_COUNT]; CLASS_COUNT],
}

/// Compute the full report plus ROC curves from probability rows and labels.
pub fn build_report(
    probs: &[[f32; CLASS_COUNT]],
    labels: &[usize],
) -> Result<(EvalReport, MulticlassRoc)> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::Input(format!(
            "report needs equal non-empty inputs, got {} and {}",
            probs.len(),
            labels.len()
        )));
    }
    let probs64: Vec<[f64; CLASS_COUNT]> = probs.iter().map(|p| p.map(|v| v as f64)).collect();
    let onehot: Vec<[f64; CLASS_COUNT]> = labels
        .iter()
        .map(|&l| std::array::from_fn(|c| if c == l { 1.0 } else { 0.0 }))
        .collect();

    let pred: Vec<usize> = probs64
        .iter()
        .map(|p| {
            let mut best = 0;
            for (c, &v) in p.iter().enumerate() {
                if v > p[best] {
                    best = c;
                }
            }
            best
        })
        .collect();

    let mut confusion = [[0usize; CLASS_COUNT]; CLASS_COUNT];
    for (&t, &p) in labels.iter().zip(&pred) {
        confusion[t][p] += 1;
    }

    let mut ce = 0.0;
    for (p, &l) in probs64.iter().zip(labels) {
        ce += -(p[l].max(1e-12)).ln();
    }
    ce /= labels.len() as f64;

    let roc = multiclass_roc(&probs64, labels)?;
    let report = EvalReport {
        accuracy: accuracy(&pred, labels)?,
        cross_entropy: ce,
        mae: mae(&probs64, &onehot)?,
        per_class_auc: std::array::from_fn(|c| roc.per_class[c].as_ref().map(|r| r.auc)),
        micro_auc: roc.micro.auc,
        macro_auc: roc.macro_auc(),
        confusion,
    };
    Ok((report, roc))
}
