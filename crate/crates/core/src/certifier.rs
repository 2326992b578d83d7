//! Certified perturbation size from a pair of probability bounds.
//!
//! Given `p̲A ≤ Pr(f(X) = c_A)` and `p̄B ≥ max_{c≠c_A} Pr(f(X) = c)`, region
//! `A` takes `p̲A` of X-mass from the highest-ratio regions and region `B`
//! takes `p̄B` from the lowest-ratio ones. The prediction provably survives
//! every perturbation of weight `k` whenever `Pr(Y ∈ A) > Pr(Y ∈ B)`.

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::bits::{Label, NoiseSpec};
use crate::error::{Error, Result};
use crate::interval::{add_down, add_up, mul_down, mul_up, sub_down, sub_up};
use crate::region::{
    f64_to_rational, ranked_regions_exact, ranked_regions_float, ExactRegions, FloatRegions,
    NumericBackend,
};

/// How far past the first failing `k` the scan keeps probing, to report
/// whether the constraint looked monotone in `k`.
pub const MONOTONE_LOOKAHEAD: usize = 8;

/// Placement of regions `A` and `B` over the ranked regions, exact backend.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionSplit {
    /// Rank holding the partial piece of `A`.
    pub a_star: usize,
    /// Rank holding the partial piece of `B`.
    pub b_star: usize,
    /// X-mass of `A` inside rank `a_star`.
    pub frac_mass_a: BigRational,
    /// X-mass of `B` inside rank `b_star`.
    pub frac_mass_b: BigRational,
    pub regions: ExactRegions,
}

/// Float counterpart of [`RegionSplit`].
///
/// Region capacities are taken at the upper ends of their X-mass intervals.
/// Enlarging capacities can only lower the least Y-mass of a set with
/// X-mass `p̲A` and raise the largest Y-mass of a set with X-mass `p̄B`, so
/// the bounds derived from this split stay on the sound side.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatRegionSplit {
    pub a_star: usize,
    pub b_star: usize,
    pub frac_mass_a: f64,
    pub frac_mass_b: f64,
    /// `p̄B` exceeded the summed capacities after rounding.
    pub b_saturated: bool,
    pub regions: FloatRegions,
}

fn check_bounds(pa: &BigRational, pb: &BigRational) -> Result<()> {
    let zero = BigRational::zero();
    let one = BigRational::one();
    if *pa < zero || *pa > one || *pb < zero || *pb > one {
        return Err(Error::OutOfRange("probability bounds must lie in [0, 1]".into()));
    }
    Ok(())
}

pub fn build_region_split(regions: ExactRegions, pa_lower: &BigRational, pb_upper: &BigRational) -> Result<RegionSplit> {
    check_bounds(pa_lower, pb_upper)?;
    let ranks = &regions.regions;

    let mut cum = BigRational::zero();
    let mut a = None;
    for (j, r) in ranks.iter().enumerate() {
        let next = &cum + &r.prob_x;
        if next >= *pa_lower {
            a = Some((j, pa_lower - &cum));
            break;
        }
        cum = next;
    }
    let (a_star, frac_mass_a) =
        a.ok_or_else(|| Error::Internal("region X-mass sums below p̲A".into()))?;

    let mut cum = BigRational::zero();
    let mut b = None;
    for (j, r) in ranks.iter().enumerate().rev() {
        let next = &cum + &r.prob_x;
        if next >= *pb_upper {
            b = Some((j, pb_upper - &cum));
            break;
        }
        cum = next;
    }
    let (b_star, frac_mass_b) =
        b.ok_or_else(|| Error::Internal("region X-mass sums below p̄B".into()))?;

    Ok(RegionSplit {
        a_star,
        b_star,
        frac_mass_a,
        frac_mass_b,
        regions,
    })
}

/// Y-mass carried by X-mass `frac` inside rank `rank` (that is, `frac / r`).
fn partial_y(regions: &ExactRegions, rank: usize, frac: &BigRational) -> BigRational {
    let r = &regions.regions[rank];
    if frac.is_zero() || r.prob_x.is_zero() {
        return BigRational::zero();
    }
    frac * &r.prob_y / &r.prob_x
}

/// Exact `(Pr(Y ∈ A), Pr(Y ∈ B))`.
pub fn bound_pair(split: &RegionSplit) -> (BigRational, BigRational) {
    let ranks = &split.regions.regions;
    let y_a: BigRational = ranks[..split.a_star].iter().map(|r| r.prob_y.clone()).sum::<BigRational>()
        + partial_y(&split.regions, split.a_star, &split.frac_mass_a);
    let y_b: BigRational = ranks[split.b_star + 1..].iter().map(|r| r.prob_y.clone()).sum::<BigRational>()
        + partial_y(&split.regions, split.b_star, &split.frac_mass_b);
    (y_a, y_b)
}

pub fn build_region_split_float(regions: FloatRegions, pa_lower: f64, pb_upper: f64) -> Result<FloatRegionSplit> {
    if !(0.0..=1.0).contains(&pa_lower) || !(0.0..=1.0).contains(&pb_upper) {
        return Err(Error::OutOfRange("probability bounds must lie in [0, 1]".into()));
    }
    let ranks = &regions.regions;
    let last = ranks.len() - 1;

    // A: remaining mass rounded down (allocating less only lowers the bound).
    let mut rem = pa_lower;
    let mut a = (last, ranks[last].prob_x.hi);
    for (j, r) in ranks.iter().enumerate() {
        if rem <= r.prob_x.hi {
            a = (j, rem);
            break;
        }
        rem = sub_down(rem, r.prob_x.hi).max(0.0);
    }

    // B: remaining mass rounded up.
    let mut rem = pb_upper;
    let mut b = None;
    for (j, r) in ranks.iter().enumerate().rev() {
        if rem <= r.prob_x.hi {
            b = Some((j, rem));
            break;
        }
        rem = sub_up(rem, r.prob_x.hi);
    }
    let b_saturated = b.is_none();
    let (b_star, frac_mass_b) = b.unwrap_or((0, ranks[0].prob_x.hi));

    Ok(FloatRegionSplit {
        a_star: a.0,
        b_star,
        frac_mass_a: a.1,
        frac_mass_b,
        b_saturated,
        regions,
    })
}

/// Lower bound on `Pr(Y ∈ A)` and upper bound on `Pr(Y ∈ B)`.
pub fn bound_pair_float(split: &FloatRegionSplit) -> (f64, f64) {
    let regions = &split.regions;
    let ranks = &regions.regions;

    let mut y_a = 0.0f64;
    for (j, r) in ranks.iter().enumerate().take(split.a_star) {
        if r.empty {
            continue;
        }
        y_a = add_down(y_a, mul_down(r.prob_x.hi, regions.inverse_ratio(j).lo));
    }
    if split.frac_mass_a > 0.0 {
        y_a = add_down(y_a, mul_down(split.frac_mass_a, regions.inverse_ratio(split.a_star).lo));
    }

    if split.b_saturated {
        return (y_a.max(0.0), 1.0);
    }
    let mut y_b = 0.0f64;
    for (j, r) in ranks.iter().enumerate().skip(split.b_star + 1) {
        if r.empty {
            continue;
        }
        y_b = add_up(y_b, mul_up(r.prob_x.hi, regions.inverse_ratio(j).hi));
    }
    if split.frac_mass_b > 0.0 {
        y_b = add_up(y_b, mul_up(split.frac_mass_b, regions.inverse_ratio(split.b_star).hi));
    }
    (y_a.max(0.0), y_b.min(1.0))
}

/// Whether `Pr(Y ∈ A) > Pr(Y ∈ B)` holds for every `δ` with `‖δ‖0 = k`.
pub fn check_radius(
    n: usize,
    k: usize,
    beta: &NoiseSpec,
    pa_lower: f64,
    pb_upper: f64,
    backend: NumericBackend,
) -> Result<bool> {
    match backend {
        NumericBackend::ExactRational => {
            check_radius_exact(n, k, beta, &f64_to_rational(pa_lower), &f64_to_rational(pb_upper))
        }
        NumericBackend::ConservativeFloat => {
            if beta.is_half() {
                return Ok(pa_lower > pb_upper);
            }
            let split = build_region_split_float(ranked_regions_float(n, k, beta)?, pa_lower, pb_upper)?;
            let (y_a, y_b) = bound_pair_float(&split);
            Ok(y_a > y_b)
        }
    }
}

pub fn check_radius_exact(
    n: usize,
    k: usize,
    beta: &NoiseSpec,
    pa_lower: &BigRational,
    pb_upper: &BigRational,
) -> Result<bool> {
    if beta.is_half() {
        check_bounds(pa_lower, pb_upper)?;
        return Ok(pa_lower > pb_upper);
    }
    let split = build_region_split(ranked_regions_exact(n, k, beta)?, pa_lower, pb_upper)?;
    let (y_a, y_b) = bound_pair(&split);
    Ok(y_a > y_b)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertifiedRadius {
    /// Largest `k` such that every `k' ≤ k` passes.
    pub k: usize,
    pub backend: NumericBackend,
    /// No `k` probed after the first failure passed again.
    pub monotone: bool,
    /// Largest `k` evaluated during the scan.
    pub scanned_to: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certification {
    Certified(CertifiedRadius),
    Abstain,
}

impl Certification {
    pub fn radius(&self) -> Option<usize> {
        match self {
            Certification::Certified(r) => Some(r.k),
            Certification::Abstain => None,
        }
    }
}

fn scan<F>(n: usize, backend: NumericBackend, mut check: F) -> Result<CertifiedRadius>
where
    F: FnMut(usize) -> Result<bool>,
{
    let mut first_fail = None;
    for k in 0..=n {
        if !check(k)? {
            first_fail = Some(k);
            break;
        }
    }
    let Some(fail) = first_fail else {
        return Ok(CertifiedRadius { k: n, backend, monotone: true, scanned_to: n });
    };
    if fail == 0 {
        return Err(Error::Internal("check failed at k = 0 despite p̲A > p̄B".into()));
    }
    let stop = n.min(fail + MONOTONE_LOOKAHEAD);
    let mut monotone = true;
    for k in fail + 1..=stop {
        if check(k)? {
            monotone = false;
            break;
        }
    }
    Ok(CertifiedRadius { k: fail - 1, backend, monotone, scanned_to: stop })
}

/// Ascending scan for the largest certifiable `k`; abstains when the bounds
/// do not separate.
pub fn certified_perturbation_size(
    n: usize,
    beta: &NoiseSpec,
    pa_lower: f64,
    pb_upper: f64,
    backend: NumericBackend,
) -> Result<Certification> {
    if !(0.0..=1.0).contains(&pa_lower) || !(0.0..=1.0).contains(&pb_upper) {
        return Err(Error::OutOfRange("probability bounds must lie in [0, 1]".into()));
    }
    if pa_lower <= pb_upper {
        return Ok(Certification::Abstain);
    }
    if beta.is_half() {
        return Ok(Certification::Certified(CertifiedRadius { k: n, backend, monotone: true, scanned_to: n }));
    }
    match backend {
        NumericBackend::ExactRational => {
            let (pa, pb) = (f64_to_rational(pa_lower), f64_to_rational(pb_upper));
            scan(n, backend, |k| check_radius_exact(n, k, beta, &pa, &pb)).map(Certification::Certified)
        }
        NumericBackend::ConservativeFloat => {
            scan(n, backend, |k| check_radius(n, k, beta, pa_lower, pb_upper, backend))
                .map(Certification::Certified)
        }
    }
}

/// Exact-rational variant taking the bounds as fractions.
pub fn certified_perturbation_size_exact(
    n: usize,
    beta: &NoiseSpec,
    pa_lower: &BigRational,
    pb_upper: &BigRational,
) -> Result<Certification> {
    check_bounds(pa_lower, pb_upper)?;
    if pa_lower <= pb_upper {
        return Ok(Certification::Abstain);
    }
    let backend = NumericBackend::ExactRational;
    if beta.is_half() {
        return Ok(Certification::Certified(CertifiedRadius { k: n, backend, monotone: true, scanned_to: n }));
    }
    scan(n, backend, |k| check_radius_exact(n, k, beta, pa_lower, pb_upper)).map(Certification::Certified)
}

/// A replayable end-to-end certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub label: Label,
    pub k_certified: usize,
    pub n: usize,
    pub beta: NoiseSpec,
    pub alpha: f64,
    pub samples: u64,
    pub seed: u64,
    pub backend: NumericBackend,
    pub pa_lower: f64,
    pub pb_upper: f64,
    pub monotone: bool,
    pub tie: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::ranked_regions_exact;

    fn spec(p: u64, q: u64) -> NoiseSpec {
        NoiseSpec::new(p, q).unwrap()
    }

    fn r(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    const EXACT: NumericBackend = NumericBackend::ExactRational;
    const FLOAT: NumericBackend = NumericBackend::ConservativeFloat;

    #[test]
    fn split_on_single_bit_space() {
        let regions = ranked_regions_exact(1, 1, &spec(7, 10)).unwrap();
        let split = build_region_split(regions, &r(7, 10), &r(3, 10)).unwrap();
        assert_eq!(split.a_star, 0);
        assert_eq!(split.frac_mass_a, r(7, 10));
        assert_eq!(split.b_star, 2);
        assert_eq!(split.frac_mass_b, r(3, 10));
        let (y_a, y_b) = bound_pair(&split);
        assert_eq!(y_a, r(3, 10));
        assert_eq!(y_b, r(7, 10));
        assert!(!check_radius_exact(1, 1, &spec(7, 10), &r(7, 10), &r(3, 10)).unwrap());
    }

    #[test]
    fn full_and_empty_regions() {
        let b = spec(7, 10);
        let regions = ranked_regions_exact(4, 2, &b).unwrap();
        let last_nonempty = regions.regions.iter().rposition(|r| !r.empty).unwrap();
        let split = build_region_split(regions, &r(1, 1), &r(0, 1)).unwrap();
        assert_eq!(split.a_star, last_nonempty);
        let (y_a, y_b) = bound_pair(&split);
        assert_eq!((y_a, y_b), (r(1, 1), r(0, 1)));
    }

    #[test]
    fn zero_perturbation_reproduces_bounds() {
        let b = spec(7, 10);
        let split = build_region_split(ranked_regions_exact(5, 0, &b).unwrap(), &r(3, 5), &r(1, 4)).unwrap();
        assert_eq!(bound_pair(&split), (r(3, 5), r(1, 4)));
    }

    #[test]
    fn k_zero_always_passes_when_separated() {
        for n in [1usize, 10, 100] {
            assert!(check_radius(n, 0, &spec(7, 10), 0.51, 0.49, EXACT).unwrap());
            assert!(check_radius(n, 0, &spec(7, 10), 0.51, 0.49, FLOAT).unwrap());
        }
    }

    #[test]
    fn half_beta_certifies_everything() {
        for k in 0..=30 {
            assert!(check_radius(30, k, &spec(1, 2), 0.6, 0.4, EXACT).unwrap());
            assert!(check_radius(30, k, &spec(1, 2), 0.6, 0.4, FLOAT).unwrap());
        }
        let c = certified_perturbation_size(30, &spec(1, 2), 0.6, 0.4, FLOAT).unwrap();
        assert_eq!(c.radius(), Some(30));
    }

    #[test]
    fn perfect_bounds_certify_full_dimension() {
        let c = certified_perturbation_size(12, &spec(7, 10), 1.0, 0.0, EXACT).unwrap();
        assert_eq!(c.radius(), Some(12));
    }

    #[test]
    fn abstains_without_separation() {
        let c = certified_perturbation_size(12, &spec(7, 10), 0.4, 0.4, EXACT).unwrap();
        assert_eq!(c, Certification::Abstain);
    }

    #[test]
    fn float_never_exceeds_exact() {
        let b = spec(7, 10);
        for &(pa, pb) in &[(0.9, 0.1), (0.95, 0.05), (0.7, 0.2), (0.99, 0.01), (0.6, 0.3)] {
            for n in [5usize, 20, 64] {
                let e = certified_perturbation_size(n, &b, pa, pb, EXACT).unwrap().radius().unwrap();
                let f = certified_perturbation_size(n, &b, pa, pb, FLOAT).unwrap().radius().unwrap();
                assert!(f <= e && e - f <= 1, "pa={pa} pb={pb} n={n}: float {f} exact {e}");
            }
        }
    }

    #[test]
    fn float_split_bounds_bracket_exact() {
        let b = spec(4, 5);
        for k in 0..=20 {
            let ex = build_region_split(ranked_regions_exact(20, k, &b).unwrap(), &f64_to_rational(0.8), &f64_to_rational(0.15)).unwrap();
            let (ya, yb) = bound_pair(&ex);
            let fl = build_region_split_float(ranked_regions_float(20, k, &b).unwrap(), 0.8, 0.15).unwrap();
            let (la, ub) = bound_pair_float(&fl);
            assert!(f64_to_rational(la) <= ya, "k={k}");
            assert!(f64_to_rational(ub) >= yb, "k={k}");
        }
    }

    #[test]
    fn low_beta_is_handled() {
        // β < 1/2 reverses the ranking but the certificate is still finite.
        let c = certified_perturbation_size(30, &spec(3, 10), 0.9, 0.1, EXACT).unwrap();
        let k = c.radius().unwrap();
        let mirrored = certified_perturbation_size(30, &spec(7, 10), 0.9, 0.1, EXACT).unwrap();
        assert_eq!(Some(k), mirrored.radius());
    }
}
