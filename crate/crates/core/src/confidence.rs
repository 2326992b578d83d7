//! Simultaneous one-sided confidence bounds on label probabilities.
//!
//! From Monte-Carlo label counts `d_c` (total `d`) this computes a lower
//! bound on the top label's probability and an upper bound on every other
//! label's probability, jointly valid with confidence `1 - α` via a
//! Bonferroni split of `α` across the `|C|` labels.

use serde::{Deserialize, Serialize};

use crate::bits::Label;
use crate::error::{Error, Result};
use crate::special::{beta_quantile, Rounding};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    counts: Vec<u64>,
}

impl LabelCounts {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyLabelSet);
        }
        Ok(Self { counts })
    }

    pub fn zeros(num_labels: usize) -> Result<Self> {
        Self::new(vec![0; num_labels])
    }

    pub fn record(&mut self, label: Label) -> Result<()> {
        let n = self.counts.len();
        let slot = self
            .counts
            .get_mut(label.index())
            .ok_or(Error::LabelOutOfRange { label: label.0, num_labels: n })?;
        *slot += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &LabelCounts) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn num_labels(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, label: Label) -> u64 {
        self.counts.get(label.index()).copied().unwrap_or(0)
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.counts
    }

    /// Most frequent label (smallest id on ties) and whether a tie occurred.
    pub fn top(&self) -> (Label, bool) {
        let best = *self.counts.iter().max().expect("non-empty label set");
        let first = self.counts.iter().position(|&c| c == best).unwrap();
        let ties = self.counts.iter().filter(|&&c| c == best).count() > 1;
        (Label(first as u32), ties)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBounds {
    pub c_a: Label,
    pub pa_lower: f64,
    pub pb_upper: f64,
    pub alpha: f64,
    pub num_labels: usize,
    /// Another label shared the top count.
    pub tie: bool,
}

impl ConfidenceBounds {
    /// `p̲A > p̄B`, i.e. a certificate can be attempted.
    pub fn separated(&self) -> bool {
        self.pa_lower > self.pb_upper
    }
}

/// `p̲A = B(α/|C|; d_A, d - d_A + 1)`, `p̄_c = B(1 - α/|C|; d_c + 1, d - d_c)`,
/// `p̄B = min(max_{c≠A} p̄_c, 1 - p̲A)`.
pub fn simultaneous_bounds(counts: &LabelCounts, alpha: f64) -> Result<ConfidenceBounds> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidProbability(alpha));
    }
    let d = counts.total();
    if d == 0 {
        return Err(Error::OutOfRange("label counts must total at least 1".into()));
    }
    let num_labels = counts.num_labels();
    let (c_a, tie) = counts.top();
    let q = alpha / num_labels as f64;
    let d_a = counts.get(c_a);
    let pa_lower = beta_quantile(q, d_a as f64, (d - d_a + 1) as f64, Rounding::Down)?;

    let mut runner_up = 0.0f64;
    for (c, &d_c) in counts.as_slice().iter().enumerate() {
        if c == c_a.index() {
            continue;
        }
        // d - d_c >= d_A >= 1 because c_A holds the largest count.
        let upper = beta_quantile(1.0 - q, (d_c + 1) as f64, (d - d_c) as f64, Rounding::Up)?;
        runner_up = runner_up.max(upper);
    }
    let complement = 1.0 - pa_lower;
    let pb_upper = runner_up.min(complement);

    Ok(ConfidenceBounds {
        c_a,
        pa_lower,
        pb_upper,
        alpha,
        num_labels,
        tie,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{Beta, ContinuousCDF};

    #[test]
    fn all_votes_for_one_label() {
        let counts = LabelCounts::new(vec![1000, 0]).unwrap();
        let b = simultaneous_bounds(&counts, 0.001).unwrap();
        let analytic = 0.0005f64.powf(1.0 / 1000.0);
        assert_eq!(b.c_a, Label(0));
        assert!((b.pa_lower - analytic).abs() < 1e-12);
        assert!(b.pa_lower <= analytic);
        assert!((b.pb_upper - (1.0 - analytic)).abs() < 1e-12);
        assert!(b.pb_upper <= 1.0 - b.pa_lower);
    }

    #[test]
    fn balanced_counts_do_not_separate() {
        let counts = LabelCounts::new(vec![500, 500]).unwrap();
        let b = simultaneous_bounds(&counts, 0.001).unwrap();
        assert!(b.tie);
        assert!(b.pa_lower < 0.5);
        assert!(!b.separated());
    }

    #[test]
    fn three_labels_match_reference_library() {
        let counts = LabelCounts::new(vec![90, 6, 4]).unwrap();
        let alpha = 0.01;
        let b = simultaneous_bounds(&counts, alpha).unwrap();
        let q = alpha / 3.0;
        let ref_a = Beta::new(90.0, 11.0).unwrap().inverse_cdf(q);
        let ref_b = Beta::new(7.0, 94.0).unwrap().inverse_cdf(1.0 - q);
        assert!((b.pa_lower - ref_a).abs() < 1e-9, "{} vs {ref_a}", b.pa_lower);
        assert!((b.pb_upper - ref_b.min(1.0 - ref_a)).abs() < 1e-9, "{} vs {ref_b}", b.pb_upper);
    }

    #[test]
    fn tie_break_prefers_smallest_id() {
        let counts = LabelCounts::new(vec![3, 7, 7]).unwrap();
        assert_eq!(counts.top(), (Label(1), true));
    }

    #[test]
    fn monotone_in_counts() {
        let d = 200u64;
        let mut last = 0.0;
        for top in 101..=d {
            let b = simultaneous_bounds(&LabelCounts::new(vec![top, d - top]).unwrap(), 0.05).unwrap();
            assert!(b.pa_lower >= last);
            last = b.pa_lower;
        }
    }

    #[test]
    fn errors() {
        assert!(LabelCounts::new(vec![]).is_err());
        let c = LabelCounts::new(vec![0, 0]).unwrap();
        assert!(simultaneous_bounds(&c, 0.05).is_err());
        let c = LabelCounts::new(vec![1, 0]).unwrap();
        assert!(simultaneous_bounds(&c, 0.0).is_err());
        assert!(simultaneous_bounds(&c, 1.0).is_err());
    }

    #[test]
    fn single_label_set() {
        let c = LabelCounts::new(vec![50]).unwrap();
        let b = simultaneous_bounds(&c, 0.05).unwrap();
        assert_eq!(b.pb_upper, 0.0);
        assert!(b.separated());
    }
}
