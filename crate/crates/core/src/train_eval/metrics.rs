//! Ranking metrics. Ties are always split evenly.

use std::cmp::Ordering;

fn desc(a: &f64, b: &f64) -> Ordering {
    b.total_cmp(a)
}

/// ROC AUC via the Mann-Whitney statistic with mid-ranks for ties.
/// `None` unless both classes are present.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let (mut rank_sum, mut pos) = (0.0, 0usize);
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 averaged.
        let mid = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            if labels[k] {
                rank_sum += mid;
                pos += 1;
            }
        }
        i = j + 1;
    }
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Some(u / (pos as f64 * neg as f64))
}

/// Average precision as the step-wise area under the precision-recall
/// curve, one step per distinct score. `None` without positives.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Option<f64> {
    assert_eq!(scores.len(), labels.len());
    let total_pos = labels.iter().filter(|&&l| l).count();
    if total_pos == 0 {
        return None;
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| desc(&scores[a], &scores[b]));
    let (mut tp, mut seen, mut ap) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let group_tp = idx[i..=j].iter().filter(|&&k| labels[k]).count();
        tp += group_tp;
        seen += j - i + 1;
        if group_tp > 0 {
            ap += group_tp as f64 / total_pos as f64 * (tp as f64 / seen as f64);
        }
        i = j + 1;
    }
    Some(ap)
}

/// Rank of `pos` among `negs`: `1 + #greater + #ties / 2`.
pub fn mid_rank(pos: f64, negs: &[f64]) -> f64 {
    let (mut gt, mut eq) = (0usize, 0usize);
    for &n in negs {
        match n.total_cmp(&pos) {
            Ordering::Greater => gt += 1,
            Ordering::Equal => eq += 1,
            Ordering::Less => {}
        }
    }
    1.0 + gt as f64 + eq as f64 / 2.0
}

/// Mean reciprocal mid-rank of each positive against its own negatives.
pub fn mrr(pos: &[f64], negs: &[Vec<f64>]) -> Option<f64> {
    assert_eq!(pos.len(), negs.len());
    if pos.is_empty() {
        return None;
    }
    let s: f64 = pos
        .iter()
        .zip(negs)
        .map(|(&p, n)| 1.0 / mid_rank(p, n))
        .sum();
    Some(s / pos.len() as f64)
}

/// Fraction of correct argmax predictions; equals micro-averaged F1 for
/// single-label classification.
pub fn f1_micro(pred: &[usize], truth: &[usize]) -> Option<f64> {
    assert_eq!(pred.len(), truth.len());
    if pred.is_empty() {
        return None;
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Some(hits as f64 / pred.len() as f64)
}
