use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::STRESSED;
use crate::nn::bce_loss;

pub const THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("{preds} predictions for {labels} labels")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("no samples to score")]
    Empty,
    #[error("AUC needs both classes among the labels")]
    SingleClass,
    #[error("score {0} is not finite")]
    NonFinite(f64),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

fn check_lengths(preds: &[f64], labels: &[u8]) -> Result<(), MetricError> {
    if preds.len() != labels.len() {
        return Err(MetricError::LengthMismatch { preds: preds.len(), labels: labels.len() });
    }
    if preds.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// A prediction is positive iff its probability is at least `threshold`.
pub fn confusion(preds: &[f64], labels: &[u8], threshold: f64) -> Result<Confusion, MetricError> {
    check_lengths(preds, labels)?;
    let mut c = Confusion::default();
    for (&p, &y) in preds.iter().zip(labels) {
        match (p >= threshold, y == STRESSED) {
            (true, true) => c.tp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrecisionRecall {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when any of the three hit a zero denominator and was reported as 0.
    pub degenerate: bool,
}

pub fn precision_recall_f1(c: Confusion) -> PrecisionRecall {
    let mut degenerate = false;
    let mut ratio = |num: f64, den: f64| {
        if den == 0.0 {
            degenerate = true;
            0.0
        } else {
            num / den
        }
    };
    let precision = ratio(c.tp as f64, (c.tp + c.fp) as f64);
    let recall = ratio(c.tp as f64, (c.tp + c.fn_) as f64);
    let f1 = ratio(2.0 * precision * recall, precision + recall);
    PrecisionRecall { precision, recall, f1, degenerate }
}

/// Mann-Whitney AUC with half credit for ties, computed from average ranks.
/// All arithmetic before the final division is on integers, so the result
/// equals the all-pairs count exactly.
pub fn auc(preds: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    check_lengths(preds, labels)?;
    if let Some(&bad) = preds.iter().find(|p| !p.is_finite()) {
        return Err(MetricError::NonFinite(bad));
    }
    let n_pos = labels.iter().filter(|&&y| y == STRESSED).count() as u64;
    let n_neg = labels.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[a].total_cmp(&preds[b]));
    // Twice the rank sum of the positives; a tie group spanning 1-based
    // ranks lo..=hi gives each member rank (lo + hi) / 2.
    let mut twice_rank_sum: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && preds[order[j + 1]] == preds[order[i]] {
            j += 1;
        }
        let twice_rank = (i + 1 + j + 1) as u64;
        let positives = order[i..=j].iter().filter(|&&k| labels[k] == STRESSED).count() as u64;
        twice_rank_sum += twice_rank * positives;
        i = j + 1;
    }
    let twice_u = twice_rank_sum - n_pos * (n_pos + 1);
    Ok(twice_u as f64 / (2 * n_pos * n_neg) as f64)
}

/// Mean binary cross-entropy of stressed-class probabilities.
pub fn mean_bce(preds: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    check_lengths(preds, labels)?;
    Ok(preds.iter().zip(labels).map(|(&p, &y)| bce_loss(p, f64::from(y))).sum::<f64>() / preds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn confusion_tally() {
        let c = confusion(&[0.9, 0.2, 0.6, 0.4], &[1, 0, 0, 1], THRESHOLD).unwrap();
        assert_eq!(c, Confusion { tp: 1, tn: 1, fp: 1, fn_: 1 });
        let c = confusion(&[0.9, 0.1], &[1, 0], THRESHOLD).unwrap();
        assert_eq!((c.fp, c.fn_), (0, 0));
        let c = confusion(&[0.5], &[0], THRESHOLD).unwrap();
        assert_eq!(c.fp, 1);
        assert_eq!(
            confusion(&[0.5], &[0, 1], THRESHOLD),
            Err(MetricError::LengthMismatch { preds: 1, labels: 2 })
        );
        assert_eq!(confusion(&[], &[], THRESHOLD), Err(MetricError::Empty));
    }

    #[test]
    fn precision_recall_cases() {
        let r = precision_recall_f1(Confusion { tp: 8, tn: 5, fp: 2, fn_: 2 });
        assert!((r.precision - 0.8).abs() < 1e-15 && (r.recall - 0.8).abs() < 1e-15 && (r.f1 - 0.8).abs() < 1e-15);
        assert!(!r.degenerate);
        let r = precision_recall_f1(Confusion { tp: 0, tn: 5, fp: 0, fn_: 3 });
        assert_eq!((r.precision, r.f1), (0.0, 0.0));
        assert!(r.degenerate);
        let r = precision_recall_f1(Confusion { tp: 4, tn: 4, fp: 0, fn_: 0 });
        assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn auc_cases() {
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.4; 6], &[1, 0, 1, 0, 0, 1]).unwrap(), 0.5);
        assert_eq!(auc(&[0.8, 0.7, 0.3], &[1, 0, 1]).unwrap(), 0.5);
        assert_eq!(auc(&[0.1, 0.9], &[1, 0]).unwrap(), 0.0);
        assert_eq!(auc(&[0.3, 0.2], &[1, 1]), Err(MetricError::SingleClass));
        assert!(matches!(auc(&[f64::NAN, 0.2], &[1, 0]), Err(MetricError::NonFinite(_))));
    }

    #[test]
    fn bce_of_half_is_ln2() {
        assert!((mean_bce(&[0.5, 0.5], &[0, 1]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    fn brute_auc(preds: &[f64], labels: &[u8]) -> f64 {
        let (mut wins, mut pairs) = (0.0, 0.0);
        for (p, _) in preds.iter().zip(labels).filter(|(_, &y)| y == 1) {
            for (n, _) in preds.iter().zip(labels).filter(|(_, &y)| y == 0) {
                pairs += 1.0;
                wins += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
            }
        }
        wins / pairs
    }

    /// Scores on a 0.05 grid so that ties are common.
    fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2usize..300).prop_flat_map(|n| {
            (prop::collection::vec((-60i32..60).prop_map(|k| f64::from(k) * 0.05), n), prop::collection::vec(0u8..2, n))
        })
    }

    proptest! {
        #[test]
        fn auc_matches_pairs_and_ignores_monotone_maps((preds, mut labels) in scored_labels()) {
            labels[0] = 0;
            labels[1] = 1;
            let a = auc(&preds, &labels).unwrap();
            prop_assert_eq!(a, brute_auc(&preds, &labels));
            let exp: Vec<f64> = preds.iter().map(|p| p.exp()).collect();
            let scaled: Vec<f64> = preds.iter().map(|p| p * 1000.0).collect();
            prop_assert_eq!(auc(&exp, &labels).unwrap(), a);
            prop_assert_eq!(auc(&scaled, &labels).unwrap(), a);
        }

        #[test]
        fn confusion_identities((preds, labels) in scored_labels()) {
            let probs: Vec<f64> = preds.iter().map(|p| (p + 3.0) / 6.0).collect();
            let c = confusion(&probs, &labels, THRESHOLD).unwrap();
            let pos = labels.iter().filter(|&&y| y == 1).count() as u64;
            prop_assert_eq!(c.total(), labels.len() as u64);
            prop_assert_eq!(c.tp + c.fn_, pos);
            let hits = probs.iter().zip(&labels).filter(|(p, y)| (**p >= THRESHOLD) == (**y == 1)).count();
            prop_assert!((c.accuracy() - hits as f64 / labels.len() as f64).abs() <= 1e-12);
            let r = precision_recall_f1(c);
            if !r.degenerate {
                prop_assert!((r.f1 - 2.0 * r.precision * r.recall / (r.precision + r.recall)).abs() <= 1e-12);
            }
        }
    }
}
