use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionMetrics {
    pub rmse: f64,
    pub mae: f64,
    /// Missing when the targets have zero variance.
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationMetrics {
    /// Missing when only one class is present.
    pub auc: Option<f64>,
    pub f1: f64,
}

pub fn regression_metrics(pred: &[f64], target: &[f64]) -> Result<RegressionMetrics> {
    if pred.len() != target.len() || pred.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need two or more paired values, got {} predictions and {} targets",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let ss_res: f64 = pred.iter().zip(target).map(|(p, y)| (p - y).powi(2)).sum();
    let mae = pred
        .iter()
        .zip(target)
        .map(|(p, y)| (p - y).abs())
        .sum::<f64>()
        / n;
    let mean = target.iter().sum::<f64>() / n;
    let ss_tot: f64 = target.iter().map(|y| (y - mean).powi(2)).sum();
    Ok(RegressionMetrics {
        rmse: (ss_res / n).sqrt(),
        mae,
        r2: (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot),
    })
}

/// Rank-statistic AUC of `scores` for the positive labels; tied scores get
/// half credit.
pub fn auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let pos = positive.iter().filter(|&&p| p).count();
    let neg = positive.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // average ranks over tie runs, 1-based
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[start]] {
            end += 1;
        }
        let avg = (start + end) as f64 / 2.0 + 1.0;
        rank_sum += order[start..=end].iter().filter(|&&i| positive[i]).count() as f64 * avg;
        start = end + 1;
    }
    let (p, q) = (pos as f64, neg as f64);
    Some((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// F1 of the positive class with `score >= threshold` predicted positive.
pub fn f1_score(scores: &[f64], positive: &[bool], threshold: f64) -> f64 {
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fn_ = 0.0;
    for (&s, &y) in scores.iter().zip(positive) {
        match (s >= threshold, y) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fn_ += 1.0,
            _ => {}
        }
    }
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fn_)
    }
}

pub fn binary_metrics(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
) -> Result<ClassificationMetrics> {
    if scores.len() != labels.len() || scores.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(ClassificationMetrics {
        auc: auc(scores, labels),
        f1: f1_score(scores, labels, threshold),
    })
}

/// Binary metrics on the class-1 probability for two classes; otherwise
/// one-vs-rest AUC and F1 (arg-max decisions) averaged over the classes
/// that occur.
pub fn classification_metrics(
    probs: &[Vec<f64>],
    labels: &[usize],
    threshold: f64,
) -> Result<ClassificationMetrics> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} score rows for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let classes = probs[0].len();
    if classes == 2 {
        let scores: Vec<f64> = probs.iter().map(|p| p[1]).collect();
        let pos: Vec<bool> = labels.iter().map(|&c| c == 1).collect();
        return binary_metrics(&scores, &pos, threshold);
    }
    let argmax: Vec<usize> = probs
        .iter()
        .map(|p| {
            (0..p.len())
                .max_by(|&a, &b| p[a].total_cmp(&p[b]))
                .unwrap_or(0)
        })
        .collect();
    let mut aucs = Vec::new();
    let mut f1s = Vec::new();
    for c in 0..classes {
        let pos: Vec<bool> = labels.iter().map(|&l| l == c).collect();
        if !pos.iter().any(|&p| p) {
            continue;
        }
        let scores: Vec<f64> = probs.iter().map(|p| p[c]).collect();
        if let Some(a) = auc(&scores, &pos) {
            aucs.push(a);
        }
        let hits: Vec<f64> = argmax
            .iter()
            .map(|&a| f64::from(u8::from(a == c)))
            .collect();
        f1s.push(f1_score(&hits, &pos, 0.5));
    }
    Ok(ClassificationMetrics {
        auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
        f1: f1s.iter().sum::<f64>() / f1s.len() as f64,
    })
}
