//! Outward-rounded floating-point helpers for the conservative backend.
//!
//! Every arithmetic result is nudged one ulp in the requested direction, so a
//! lower bound computed with the `_down` helpers never exceeds the real value
//! of the same expression, and `_up` never falls below it.

use serde::{Deserialize, Serialize};

pub fn add_down(a: f64, b: f64) -> f64 {
    (a + b).next_down()
}

pub fn add_up(a: f64, b: f64) -> f64 {
    (a + b).next_up()
}

pub fn sub_down(a: f64, b: f64) -> f64 {
    (a - b).next_down()
}

pub fn sub_up(a: f64, b: f64) -> f64 {
    (a - b).next_up()
}

/// Product of non-negative operands, rounded down (never below zero).
pub fn mul_down(a: f64, b: f64) -> f64 {
    (a * b).next_down().max(0.0)
}

pub fn mul_up(a: f64, b: f64) -> f64 {
    (a * b).next_up()
}

/// A closed interval `[lo, hi]` known to contain a real quantity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "empty interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// `exp(x)` for an `x` known only to within `±err`. Assumes the platform
    /// `exp` is faithful (error under one ulp).
    pub fn exp_of(x: f64, err: f64) -> Self {
        let lo = sub_down(x, err).exp() * (1.0 - 2f64.powi(-50));
        let hi = add_up(x, err).exp() * (1.0 + 2f64.powi(-50));
        Self::new(lo.next_down().max(0.0), hi.next_up())
    }
}

impl std::ops::Add for Interval {
    type Output = Self;

    fn add(self, other: Self) -> Self {
        Self::new(add_down(self.lo, other.lo), add_up(self.hi, other.hi))
    }
}

/// Natural logs of factorials `0!, 1!, …, max!` with a rigorous bound on the
/// accumulated rounding error of each entry.
pub struct LnFactorials {
    values: Vec<f64>,
}

impl LnFactorials {
    pub fn new(max: usize) -> Self {
        let mut values = Vec::with_capacity(max + 1);
        values.push(0.0);
        let mut acc = 0.0f64;
        for i in 1..=max {
            acc += (i as f64).ln();
            values.push(acc);
        }
        Self { values }
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Bound on `|computed ln(i!) - ln(i!)|`: each `ln` is within one ulp and
    /// the running sum of `i` positive terms loses at most `i` half-ulps of
    /// the total.
    pub fn err(&self, i: usize) -> f64 {
        (i as f64 + 2.0) * 2f64.powi(-52) * self.values[i]
    }
}

/// Rigorous enclosure of `C(k, a) · p^(k-a) · q^a` for probabilities `p, q`
/// given by their natural logs (with their own absolute error bounds).
pub fn binomial_term(
    table: &LnFactorials,
    k: usize,
    a: usize,
    ln_p: f64,
    ln_p_err: f64,
    ln_q: f64,
    ln_q_err: f64,
) -> Interval {
    let b = k - a;
    let terms = [
        table.get(k),
        -table.get(a),
        -table.get(b),
        b as f64 * ln_p,
        a as f64 * ln_q,
    ];
    let log: f64 = terms.iter().sum();
    let magnitude: f64 = terms.iter().map(|t| t.abs()).sum();
    let err = table.err(k)
        + table.err(a)
        + table.err(b)
        + b as f64 * ln_p_err
        + a as f64 * ln_q_err
        + 8.0 * 2f64.powi(-53) * magnitude;
    Interval::exp_of(log, 2.0 * err)
}

/// `ln(numer / denom)` with an absolute error bound.
pub fn ln_ratio(numer: u64, denom: u64) -> (f64, f64) {
    let a = (numer as f64).ln();
    let b = (denom as f64).ln();
    // numer/denom are exact up to 2^53; beyond that the conversion itself rounds.
    let conv = if numer.max(denom) > (1u64 << 53) { 2f64.powi(-52) } else { 0.0 };
    let v = a - b;
    (v, 4.0 * 2f64.powi(-52) * (a.abs() + b.abs()) + 2.0 * conv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directed_ops_bracket() {
        let a = 0.1;
        let b = 0.2;
        assert!(add_down(a, b) < a + b && a + b < add_up(a, b));
        assert!(mul_down(a, b) < a * b && a * b < mul_up(a, b));
    }

    #[test]
    fn exp_interval_contains_exact() {
        let iv = Interval::exp_of(1.0, 0.0);
        assert!(iv.contains(std::f64::consts::E));
        assert!(iv.width() < 1e-14);
    }

    #[test]
    fn binomial_term_brackets_small_case() {
        let t = LnFactorials::new(10);
        let (lp, ep) = ln_ratio(7, 10);
        let (lq, eq) = ln_ratio(3, 10);
        // C(10,3) 0.7^7 0.3^3
        let exact = 120.0 * 0.7f64.powi(7) * 0.3f64.powi(3);
        let iv = binomial_term(&t, 10, 3, lp, ep, lq, eq);
        assert!(iv.contains(exact), "{iv:?} vs {exact}");
        assert!(iv.width() / exact < 1e-12);
    }
}
