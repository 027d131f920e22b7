//! Summary statistics over runs.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population standard deviation.
pub fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Nearest-rank percentile, `p` in `0..=100`.
pub fn percentile(v: &[f64], p: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = (p / 100.0 * s.len() as f64).ceil() as usize;
    s[rank.clamp(1, s.len()) - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedTTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t: f64,
    /// Probability of a statistic at least this large if the true mean difference were zero.
    pub p_greater: f64,
    pub p_less: f64,
}

/// Paired t-test on `a[i] - b[i]`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Option<PairedTTest> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let m = mean(&d);
    let sd = (d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt();
    let (t, p_greater) = if sd == 0.0 {
        match m.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => (f64::INFINITY, 0.0),
            Some(std::cmp::Ordering::Less) => (f64::NEG_INFINITY, 1.0),
            _ => (0.0, 0.5),
        }
    } else {
        let t = m / (sd / n.sqrt());
        let dist = StudentsT::new(0.0, 1.0, n - 1.0).ok()?;
        (t, 1.0 - dist.cdf(t))
    };
    Some(PairedTTest {
        n: d.len(),
        mean_diff: m,
        t,
        p_greater,
        p_less: 1.0 - p_greater,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_moments() {
        let v = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0];
        assert_eq!(mean(&v), 5.0);
        assert_eq!(std_dev(&v), 2.0);
        assert_eq!(percentile(&v, 50.0), 4.0);
        assert_eq!(percentile(&v, 5.0), 2.0);
        assert_eq!(percentile(&v, 95.0), 9.0);
        assert_eq!(percentile(&v, 0.0), 2.0);
    }

    #[test]
    fn t_test_against_reference() {
        // Differences 1, 2, 3, 4: mean 2.5, sd 1.291, t = 3.873, df 3.
        let r = paired_t_test(&[2.0, 4.0, 6.0, 8.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((r.t - 3.872_983).abs() < 1e-5);
        assert!((r.p_greater - 0.015_225).abs() < 1e-5, "{}", r.p_greater);
        assert!((r.p_greater + r.p_less - 1.0).abs() < 1e-12);
    }

    #[test]
    fn t_test_degenerate() {
        let r = paired_t_test(&[1.0, 1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(r.p_greater, 0.5);
        let r = paired_t_test(&[2.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_eq!(r.p_greater, 0.0);
        assert!(paired_t_test(&[1.0], &[1.0]).is_none());
    }

    proptest! {
        #[test]
        fn percentiles_are_ordered(v in proptest::collection::vec(-1e6f64..1e6, 1..60)) {
            let lo = percentile(&v, 5.0);
            let hi = percentile(&v, 95.0);
            prop_assert!(lo <= hi);
            prop_assert!(v.contains(&lo) && v.contains(&hi));
            prop_assert!(std_dev(&v) >= 0.0);
        }
    }
}
