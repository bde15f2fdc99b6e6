use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::Real;

fn check_lengths<T>(scores: &[T], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

fn to_f64<T: Real>(scores: &[T]) -> Result<Vec<f64>> {
    let v: Vec<f64> = scores.iter().map(|s| s.to_f64_lossy()).collect();
    if v.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    Ok(v)
}

/// Mann-Whitney U statistic of positives over negatives, ties counted one half.
pub fn mann_whitney_u<T: Real>(scores: &[T], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let s = to_f64(scores)?;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[a].partial_cmp(&s[b]).unwrap_or(Ordering::Equal));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && s[order[j + 1]] == s[order[i]] {
            j += 1;
        }
        // Ranks are 1-based; tied block shares the mean rank.
        let mean_rank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum += mean_rank;
            }
        }
        i = j + 1;
    }
    let p = labels.iter().filter(|&&l| l).count() as f64;
    Ok(rank_sum - p * (p + 1.0) / 2.0)
}

/// Area under the ROC curve: probability that a random positive outscores a
/// random negative.
pub fn auroc<T: Real>(scores: &[T], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let p = labels.iter().filter(|&&l| l).count();
    let n = labels.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::UndefinedMetric("AUROC needs both classes"));
    }
    Ok(mann_whitney_u(scores, labels)? / (p as f64 * n as f64))
}

/// Step-wise area under the precision-recall curve (average precision):
/// sum over distinct thresholds of recall gain times precision.
pub fn aupr<T: Real>(scores: &[T], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let total_pos = labels.iter().filter(|&&l| l).count();
    if total_pos == 0 {
        return Err(Error::UndefinedMetric("AUPR needs at least one positive"));
    }
    let s = to_f64(scores)?;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(Ordering::Equal));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = s[order[i]];
        while i < order.len() && s[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / total_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(area)
}
