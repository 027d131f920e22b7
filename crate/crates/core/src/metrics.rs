//! Quality-of-result metrics, always computed against the golden output.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("length mismatch: approx has {approx} elements, golden has {golden}")]
    LengthMismatch { approx: usize, golden: usize },
    #[error("metric needs at least one element")]
    EmptyInput,
    #[error("every golden element is below the epsilon guard")]
    AllExcluded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "RMSE")]
    Rmse,
    #[serde(rename = "ARE")]
    Are,
    PrecisionRecall,
    Agreement,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Rmse => "RMSE",
            Metric::Are => "ARE",
            Metric::PrecisionRecall => "PrecisionRecall",
            Metric::Agreement => "Agreement",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Metric::Rmse, Metric::Are, Metric::PrecisionRecall, Metric::Agreement]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

/// One metric reading. `value2` carries recall for [`Metric::PrecisionRecall`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QorValue {
    pub metric: Metric,
    pub value: f64,
    pub value2: Option<f64>,
    /// Elements skipped by the ARE epsilon guard.
    pub excluded: Option<usize>,
}

impl QorValue {
    pub fn rmse(v: f64) -> Self {
        Self::single(Metric::Rmse, v)
    }

    pub fn agreement(v: f64) -> Self {
        Self::single(Metric::Agreement, v)
    }

    pub fn precision_recall(p: f64, r: f64) -> Self {
        Self {
            metric: Metric::PrecisionRecall,
            value: p,
            value2: Some(r),
            excluded: None,
        }
    }

    pub fn are(v: &AreResult) -> Self {
        Self {
            metric: Metric::Are,
            value: v.value,
            value2: None,
            excluded: Some(v.excluded),
        }
    }

    fn single(metric: Metric, value: f64) -> Self {
        Self {
            metric,
            value,
            value2: None,
            excluded: None,
        }
    }

    /// Distance from a perfect result: 0 is golden-identical, larger is worse.
    ///
    /// RMSE and ARE are used as-is; precision/recall maps to `1 - (p + r) / 2`;
    /// agreement maps to `1 - agreement`.
    pub fn degradation(&self) -> f64 {
        match self.metric {
            Metric::Rmse | Metric::Are => self.value,
            Metric::PrecisionRecall => 1.0 - 0.5 * (self.value + self.value2.unwrap_or(self.value)),
            Metric::Agreement => 1.0 - self.value,
        }
    }

    pub fn is_perfect(&self) -> bool {
        self.degradation() == 0.0
    }
}

fn check_lengths(approx: usize, golden: usize) -> Result<(), MetricError> {
    if approx != golden {
        return Err(MetricError::LengthMismatch { approx, golden });
    }
    if approx == 0 {
        return Err(MetricError::EmptyInput);
    }
    Ok(())
}

/// Root-mean-square difference.
///
/// ```
/// use imc_sim::metrics::rmse;
/// assert!((rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
/// ```
pub fn rmse(approx: &[f64], golden: &[f64]) -> Result<f64, MetricError> {
    check_lengths(approx.len(), golden.len())?;
    let sum: f64 = approx.iter().zip(golden).map(|(a, g)| (a - g) * (a - g)).sum();
    Ok((sum / approx.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreResult {
    pub value: f64,
    pub excluded: usize,
}

/// Mean relative error over golden elements with `|g| >= eps`.
pub fn are(approx: &[f64], golden: &[f64], eps: f64) -> Result<AreResult, MetricError> {
    check_lengths(approx.len(), golden.len())?;
    let mut sum = 0.0;
    let mut used = 0usize;
    for (a, g) in approx.iter().zip(golden) {
        if g.abs() >= eps {
            let rel = (a - g).abs() / g.abs();
            // A non-finite approximate value is as wrong as it gets.
            sum += if rel.is_finite() { rel } else { f64::MAX / golden.len() as f64 };
            used += 1;
        }
    }
    if used == 0 {
        return Err(MetricError::AllExcluded);
    }
    Ok(AreResult {
        value: sum / used as f64,
        excluded: golden.len() - used,
    })
}

fn ratio_or_one(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// `(precision, recall)` of a predicted set; an empty denominator yields 1.0.
pub fn precision_recall<T: Ord>(pred: &BTreeSet<T>, gold: &BTreeSet<T>) -> (f64, f64) {
    let tp = pred.intersection(gold).count();
    (ratio_or_one(tp, pred.len()), ratio_or_one(tp, gold.len()))
}

/// [`precision_recall`] over two same-shaped boolean masks.
pub fn precision_recall_masks(pred: &[bool], gold: &[bool]) -> Result<(f64, f64), MetricError> {
    if pred.len() != gold.len() {
        return Err(MetricError::LengthMismatch {
            approx: pred.len(),
            golden: gold.len(),
        });
    }
    let tp = pred.iter().zip(gold).filter(|(p, g)| **p && **g).count();
    let np = pred.iter().filter(|p| **p).count();
    let ng = gold.iter().filter(|g| **g).count();
    Ok((ratio_or_one(tp, np), ratio_or_one(tp, ng)))
}

/// Fraction of positions where the labels match.
pub fn agreement<T: PartialEq>(pred: &[T], golden: &[T]) -> Result<f64, MetricError> {
    check_lengths(pred.len(), golden.len())?;
    let same = pred.iter().zip(golden).filter(|(p, g)| p == g).count();
    Ok(same as f64 / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap() - 3.5355).abs() < 1e-4);
        assert_eq!(rmse(&[], &[]), Err(MetricError::EmptyInput));
        assert_eq!(
            rmse(&[1.0], &[1.0, 2.0]),
            Err(MetricError::LengthMismatch { approx: 1, golden: 2 })
        );
    }

    #[test]
    fn are_examples() {
        assert_eq!(are(&[1.0, 2.0], &[1.0, 2.0], 1e-6).unwrap().value, 0.0);
        let r = are(&[1.1, 1.8], &[1.0, 2.0], 1e-6).unwrap();
        assert!((r.value - 0.10).abs() < 1e-12);
        assert_eq!(are(&[5.0, 1.0], &[0.0, 1.0], 1e-6).unwrap(), AreResult { value: 0.0, excluded: 1 });
        assert_eq!(are(&[1.0], &[0.0], 1e-6), Err(MetricError::AllExcluded));
    }

    #[test]
    fn precision_recall_examples() {
        let s = |v: &[char]| v.iter().copied().collect::<BTreeSet<_>>();
        assert_eq!(precision_recall(&s(&['a', 'b']), &s(&['a', 'b'])), (1.0, 1.0));
        let (p, r) = precision_recall(&s(&['b', 'c', 'd']), &s(&['a', 'b', 'c']));
        assert!((p - 2.0 / 3.0).abs() < 1e-12 && (r - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(precision_recall(&s(&[]), &s(&[])), (1.0, 1.0));
        assert_eq!(precision_recall(&s(&['x']), &s(&[])), (0.0, 1.0));
    }

    #[test]
    fn agreement_examples() {
        assert_eq!(agreement(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert!((agreement(&[1, 2, 3], &[1, 2, 4]).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(agreement(&[1, 2], &[3, 4]).unwrap(), 0.0);
        assert!(matches!(agreement(&[1], &[1, 2]), Err(MetricError::LengthMismatch { .. })));
    }

    #[test]
    fn degradation_mapping() {
        assert_eq!(QorValue::agreement(0.75).degradation(), 0.25);
        assert_eq!(QorValue::precision_recall(0.5, 1.0).degradation(), 0.25);
        assert!(QorValue::rmse(0.0).is_perfect());
    }

    proptest! {
        #[test]
        fn rmse_homogeneous(v in proptest::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50), c in -10.0f64..10.0) {
            let (a, g): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let base = rmse(&a, &g).unwrap();
            let ca: Vec<f64> = a.iter().map(|x| x * c).collect();
            let cg: Vec<f64> = g.iter().map(|x| x * c).collect();
            prop_assert!((rmse(&ca, &cg).unwrap() - c.abs() * base).abs() <= 1e-9 * (1.0 + base * c.abs()));
        }

        #[test]
        fn rmse_zero_iff_equal(a in proptest::collection::vec(-1e3f64..1e3, 1..50), i in any::<prop::sample::Index>(), d in 1e-3f64..10.0) {
            prop_assert_eq!(rmse(&a, &a).unwrap(), 0.0);
            let mut b = a.clone();
            let k = i.index(b.len());
            b[k] += d;
            prop_assert!(rmse(&b, &a).unwrap() > 0.0);
        }

        #[test]
        fn agreement_permutation_equivariant(pairs in proptest::collection::vec((0u8..4, 0u8..4), 1..40), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut perm = pairs.clone();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let (p1, g1): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
            let (p2, g2): (Vec<u8>, Vec<u8>) = perm.into_iter().unzip();
            prop_assert_eq!(agreement(&p1, &g1).unwrap(), agreement(&p2, &g2).unwrap());
        }

        #[test]
        fn masks_match_sets(pairs in proptest::collection::vec(any::<(bool, bool)>(), 0..64)) {
            let (p, g): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
            let to_set = |m: &[bool]| m.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i).collect::<BTreeSet<_>>();
            prop_assert_eq!(precision_recall_masks(&p, &g).unwrap(), precision_recall(&to_set(&p), &to_set(&g)));
        }
    }
}
