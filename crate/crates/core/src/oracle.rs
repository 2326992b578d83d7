//! Ground truth by exhaustive enumeration of `{0,1}^n` for small `n`.
//!
//! Every probability here is an exact rational built from integer point
//! counts, so the oracle shares no arithmetic with the closed forms it checks.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};
use rayon::prelude::*;

use crate::bits::{BitVector, Label, NoiseSpec, StructureVector};
use crate::certifier::{bound_pair, build_region_split};
use crate::error::{Error, Result};
use crate::region::{density_ratio, ranked_regions_exact, ExactRegions};
use crate::smoothing::BaseClassifier;

/// Largest dimension the oracle will enumerate.
pub const MAX_ENUM_N: usize = 20;
/// Largest dimension for classifier-level checks.
pub const MAX_LEMMA_N: usize = 16;

const CHUNK: u64 = 4096;

fn check_n(n: usize, max: usize) -> Result<()> {
    if n > max {
        return Err(Error::TooLarge { n, max });
    }
    Ok(())
}

fn to_mask(v: &BitVector) -> u64 {
    v.ones().fold(0u64, |acc, i| acc | (1 << i))
}

fn from_mask(z: u64, n: usize) -> StructureVector {
    StructureVector::new(BitVector::from_u64(z, n))
}

/// `p^(n-w) (q-p)^w` for `w = 0..=n`: unnormalized `Pr(X = z)` at distance `w`.
fn distance_weights(n: usize, spec: &NoiseSpec) -> Vec<BigInt> {
    let (p, q) = (spec.numer(), spec.denom());
    (0..=n)
        .map(|w| Pow::pow(BigInt::from(p), (n - w) as u64) * Pow::pow(BigInt::from(q - p), w as u64))
        .collect()
}

fn normalizer(n: usize, spec: &NoiseSpec) -> BigInt {
    Pow::pow(BigInt::from(spec.denom()), n as u64)
}

fn fold_counts(counts: &[u64], weights: &[BigInt], denom: &BigInt) -> BigRational {
    let numer: BigInt = counts
        .iter()
        .zip(weights)
        .filter(|(c, _)| **c > 0)
        .map(|(c, w)| BigInt::from(*c) * w)
        .sum();
    BigRational::new(numer, denom.clone())
}

/// Exact `(Pr(X ∈ R(m)), Pr(Y ∈ R(m)))` for every nonempty `m`.
pub type RegionTable = BTreeMap<i64, (BigRational, BigRational)>;

/// Enumerates regions around `s = 0` with `δ` on the first `k` bits.
pub fn enumerate_region_probs(n: usize, k: usize, beta: &NoiseSpec) -> Result<RegionTable> {
    if k > n {
        return Err(Error::OutOfRange(format!("k={k} > n={n}")));
    }
    let s = BitVector::zeros(n);
    let delta = BitVector::from_indices(n, &(0..k).collect::<Vec<_>>())?;
    enumerate_region_probs_for(&s, &delta, beta)
}

/// Enumerates regions for an arbitrary clean vector and perturbation.
///
/// Each `z` is classified by `m = ‖z − (s⊕δ)‖0 − ‖z − s‖0`; the pair of
/// distances also fixes both point probabilities, so points are tallied by
/// `(‖z − s‖0, ‖z − (s⊕δ)‖0)` and converted to rationals once.
pub fn enumerate_region_probs_for(s: &BitVector, delta: &BitVector, beta: &NoiseSpec) -> Result<RegionTable> {
    let n = s.len();
    check_n(n, MAX_ENUM_N)?;
    if delta.len() != n {
        return Err(Error::DimensionMismatch { left: n, right: delta.len() });
    }
    let s_mask = to_mask(s);
    let y_mask = s_mask ^ to_mask(delta);
    let width = n + 1;
    let total = 1u64 << n;
    let tally = (0..total.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut t = vec![0u64; width * width];
            for z in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let w = (z ^ s_mask).count_ones() as usize;
                let v = (z ^ y_mask).count_ones() as usize;
                t[w * width + v] += 1;
            }
            t
        })
        .reduce(
            || vec![0u64; width * width],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    let weights = distance_weights(n, beta);
    let denom = normalizer(n, beta);
    let mut sums: BTreeMap<i64, (BigInt, BigInt)> = BTreeMap::new();
    for w in 0..=n {
        for v in 0..=n {
            let c = tally[w * width + v];
            if c == 0 {
                continue;
            }
            let m = v as i64 - w as i64;
            let entry = sums.entry(m).or_insert_with(|| (BigInt::zero(), BigInt::zero()));
            entry.0 += BigInt::from(c) * &weights[w];
            entry.1 += BigInt::from(c) * &weights[v];
        }
    }
    Ok(sums
        .into_iter()
        .map(|(m, (x, y))| (m, (BigRational::new(x, denom.clone()), BigRational::new(y, denom.clone()))))
        .collect())
}

/// Point law of `s ⊕ ε`: `Pr(X = z) = β^(n−w) (1−β)^w` with `w = ‖z − s‖0`.
#[derive(Clone, Debug)]
pub struct ExactDistribution {
    center: u64,
    n: usize,
    weights: Vec<BigInt>,
    denom: BigInt,
}

impl ExactDistribution {
    pub fn new(center: &BitVector, spec: &NoiseSpec) -> Result<Self> {
        let n = center.len();
        check_n(n, MAX_ENUM_N)?;
        Ok(Self {
            center: to_mask(center),
            n,
            weights: distance_weights(n, spec),
            denom: normalizer(n, spec),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn prob(&self, z: &BitVector) -> BigRational {
        let w = (to_mask(z) ^ self.center).count_ones() as usize;
        BigRational::new(self.weights[w].clone(), self.denom.clone())
    }

    /// Sum over all `2^n` points; equals 1 exactly.
    pub fn total(&self) -> BigRational {
        let counts: Vec<u64> = (0..=self.n).map(|w| binomial_u64(self.n, w)).collect();
        fold_counts(&counts, &self.weights, &self.denom)
    }
}

fn binomial_u64(n: usize, k: usize) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Exact `Pr(f(center ⊕ ε) = c)` for every label `c`.
pub fn exact_smoothed_distribution(
    base: &dyn BaseClassifier,
    center: &StructureVector,
    spec: &NoiseSpec,
) -> Result<Vec<BigRational>> {
    let n = center.dim();
    check_n(n, MAX_ENUM_N)?;
    let labels = base.num_labels();
    let center_mask = to_mask(center.bits());
    let total = 1u64 << n;
    let width = n + 1;
    let chunk = |c: u64| -> Result<Vec<u64>> {
        let batch: Vec<StructureVector> = (c * CHUNK..((c + 1) * CHUNK).min(total)).map(|z| from_mask(z, n)).collect();
        let out = base.classify(&batch)?;
        let mut t = vec![0u64; labels * width];
        for (z, label) in batch.iter().zip(out) {
            if label.index() >= labels {
                return Err(Error::LabelOutOfRange { label: label.0, num_labels: labels });
            }
            let w = (to_mask(z.bits()) ^ center_mask).count_ones() as usize;
            t[label.index() * width + w] += 1;
        }
        Ok(t)
    };
    let chunks = total.div_ceil(CHUNK);
    let parts: Vec<Vec<u64>> = if base.parallel() {
        (0..chunks).into_par_iter().map(chunk).collect::<Result<_>>()?
    } else {
        (0..chunks).map(chunk).collect::<Result<_>>()?
    };
    let mut tally = vec![0u64; labels * width];
    for p in parts {
        tally.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    let weights = distance_weights(n, spec);
    let denom = normalizer(n, spec);
    Ok((0..labels)
        .map(|c| fold_counts(&tally[c * width..(c + 1) * width], &weights, &denom))
        .collect())
}

/// Exact law of `f(s ⊕ δ ⊕ ε)`.
pub fn exact_smoothed_distribution_y(
    base: &dyn BaseClassifier,
    s: &StructureVector,
    delta: &BitVector,
    spec: &NoiseSpec,
) -> Result<Vec<BigRational>> {
    let shifted = StructureVector::new(s.bits().xor(delta)?);
    exact_smoothed_distribution(base, &shifted, spec)
}

/// Exact law of `popcount(s ⊕ ε)`, entry `t` being `Pr(popcount = t)`.
///
/// Ones of `s` survive as `Bin(ones, β)` and zeros turn on as
/// `Bin(zeros, 1 − β)`; the result is their convolution. Works for any `n`.
pub fn exact_popcount_distribution(s: &StructureVector, spec: &NoiseSpec) -> Vec<BigRational> {
    let n = s.dim();
    let ones = s.count_ones();
    let zeros = n - ones;
    let (p, q) = (BigInt::from(spec.numer()), BigInt::from(spec.denom()));
    let f = &q - &p;
    let binom_row = |len: usize| -> Vec<BigInt> {
        let mut row = vec![BigInt::one()];
        for i in 0..len {
            let next = row[i].clone() * BigInt::from(len - i) / BigInt::from(i + 1);
            row.push(next);
        }
        row
    };
    let (ro, rz) = (binom_row(ones), binom_row(zeros));
    // Unnormalized masses: kept ones `a` weigh p^a f^(ones-a), lit zeros `b` weigh f^b p^(zeros-b).
    let kept: Vec<BigInt> = (0..=ones)
        .map(|a| &ro[a] * Pow::pow(&p, a as u64) * Pow::pow(&f, (ones - a) as u64))
        .collect();
    let lit: Vec<BigInt> = (0..=zeros)
        .map(|b| &rz[b] * Pow::pow(&f, b as u64) * Pow::pow(&p, (zeros - b) as u64))
        .collect();
    let mut numer = vec![BigInt::zero(); n + 1];
    for (a, ka) in kept.iter().enumerate() {
        for (b, lb) in lit.iter().enumerate() {
            numer[a + b] += ka * lb;
        }
    }
    let denom = Pow::pow(&q, n as u64);
    numer.into_iter().map(|x| BigRational::new(x, denom.clone())).collect()
}

fn argmax_rational(p: &[BigRational]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LemmaStatus {
    Holds,
    Violated,
    /// The supplied bounds are not valid for this classifier.
    BoundsUnsatisfied,
}

/// Both sides of the two inequalities, as exact values.
#[derive(Clone, Debug)]
pub struct Lemma1Report {
    pub status: LemmaStatus,
    pub c_a: Label,
    pub k: usize,
    /// Exact `Pr(f(X) = c_A)`.
    pub pa_exact: BigRational,
    /// Exact `max_{c≠c_A} Pr(f(X) = c)`.
    pub pb_exact: BigRational,
    pub fy_a: BigRational,
    /// Exact `max_{c≠c_A} Pr(f(Y) = c)`.
    pub fy_b: BigRational,
    pub y_in_a: BigRational,
    pub y_in_b: BigRational,
}

/// Checks `Pr(f(Y)=c_A) ≥ Pr(Y∈A)` and `Pr(f(Y)=c) ≤ Pr(Y∈B)` for every
/// `c ≠ c_A`, after confirming the bounds hold for `f` at `s`.
pub fn verify_lemma1(
    base: &dyn BaseClassifier,
    s: &StructureVector,
    delta: &BitVector,
    pa_lower: &BigRational,
    pb_upper: &BigRational,
    spec: &NoiseSpec,
) -> Result<Lemma1Report> {
    check_n(s.dim(), MAX_LEMMA_N)?;
    let px = exact_smoothed_distribution(base, s, spec)?;
    let a = argmax_rational(&px);
    let max_other = |p: &[BigRational]| {
        p.iter()
            .enumerate()
            .filter(|(c, _)| *c != a)
            .map(|(_, v)| v.clone())
            .max()
            .unwrap_or_else(BigRational::zero)
    };
    let pb_exact = max_other(&px);
    let k = delta.count_ones();
    let split = build_region_split(ranked_regions_exact(s.dim(), k, spec)?, pa_lower, pb_upper)?;
    let (y_in_a, y_in_b) = bound_pair(&split);
    let py = exact_smoothed_distribution_y(base, s, delta, spec)?;
    let fy_b = max_other(&py);
    let status = if px[a] < *pa_lower || pb_exact > *pb_upper {
        LemmaStatus::BoundsUnsatisfied
    } else if py[a] >= y_in_a && fy_b <= y_in_b {
        LemmaStatus::Holds
    } else {
        LemmaStatus::Violated
    };
    Ok(Lemma1Report {
        status,
        c_a: Label(a as u32),
        k,
        pa_exact: px[a].clone(),
        pb_exact,
        fy_a: py[a].clone(),
        fy_b,
        y_in_a,
        y_in_b,
    })
}

/// Outcome of one binary Neyman–Pearson check.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NeymanPearsonTally {
    /// Premise held and conclusion held.
    pub confirmed: usize,
    /// Premise did not hold; nothing to check.
    pub vacuous: usize,
    pub violations: usize,
}

impl NeymanPearsonTally {
    pub fn merge(&mut self, other: NeymanPearsonTally) {
        self.confirmed += other.confirmed;
        self.vacuous += other.vacuous;
        self.violations += other.violations;
    }
}

/// Checks both implications of the binary Neyman–Pearson lemma for the
/// point set `h` against `S = {ratio > r(t)} ∪ S3`, where `S3` is the part
/// of the `m = t` layer selected by `tie_subset`.
///
/// `h` and `tie_subset` are indicator functions over `z` encoded as `u64`.
pub fn check_neyman_pearson<H, T>(
    s: &BitVector,
    delta: &BitVector,
    spec: &NoiseSpec,
    t: i64,
    h: H,
    tie_subset: T,
) -> Result<NeymanPearsonTally>
where
    H: Fn(u64) -> bool,
    T: Fn(u64) -> bool,
{
    let n = s.len();
    check_n(n, MAX_LEMMA_N)?;
    let s_mask = to_mask(s);
    let y_mask = s_mask ^ to_mask(delta);
    let weights = distance_weights(n, spec);
    let r_t = density_ratio(spec, t);
    let zero = || BigInt::zero();
    // Accumulate unnormalized masses; the common denominator cancels.
    let (mut hx, mut hy) = (zero(), zero());
    let (mut hi_x, mut hi_y) = (zero(), zero());
    let (mut lo_x, mut lo_y) = (zero(), zero());
    for z in 0..(1u64 << n) {
        let w = (z ^ s_mask).count_ones() as usize;
        let v = (z ^ y_mask).count_ones() as usize;
        let m = v as i64 - w as i64;
        let r = density_ratio(spec, m);
        let (px, py) = (&weights[w], &weights[v]);
        if h(z) {
            hx += px;
            hy += py;
        }
        let tie = r == r_t && tie_subset(z);
        if r > r_t || tie {
            hi_x += px;
            hi_y += py;
        }
        if r < r_t || tie {
            lo_x += px;
            lo_y += py;
        }
    }
    let mut tally = NeymanPearsonTally::default();
    let mut record = |premise: bool, conclusion: bool| {
        if !premise {
            tally.vacuous += 1;
        } else if conclusion {
            tally.confirmed += 1;
        } else {
            tally.violations += 1;
        }
    };
    record(hx >= hi_x, hy >= hi_y);
    record(hx <= lo_x, hy <= lo_y);
    Ok(tally)
}

/// Mass-level realization of the worst-case classifier for one `k`.
///
/// `assignment[rank]` lists the X-mass of ranked region `rank` given to
/// each label; a label's Y-mass in that region is its X-mass divided by the
/// region's density ratio.
#[derive(Clone, Debug)]
pub struct WorstCaseClassifier {
    pub k: usize,
    pub num_labels: usize,
    pub regions: ExactRegions,
    pub assignment: Vec<Vec<(Label, BigRational)>>,
}

impl WorstCaseClassifier {
    /// Exact `Pr(f*(X) = c)` per label.
    pub fn prob_x(&self) -> Vec<BigRational> {
        let mut out = vec![BigRational::zero(); self.num_labels];
        for parts in &self.assignment {
            for (label, mass) in parts {
                out[label.index()] += mass;
            }
        }
        out
    }

    /// Exact `Pr(f*(Y) = c)` per label.
    pub fn prob_y(&self) -> Vec<BigRational> {
        let mut out = vec![BigRational::zero(); self.num_labels];
        for (rank, parts) in self.assignment.iter().enumerate() {
            let r = &self.regions.regions[rank];
            if r.prob_x.is_zero() {
                continue;
            }
            let scale = &r.prob_y / &r.prob_x;
            for (label, mass) in parts {
                out[label.index()] += mass * &scale;
            }
        }
        out
    }

    /// `c_A` keeps a strict lead over every other label under `Y`.
    pub fn c_a_wins(&self) -> bool {
        let y = self.prob_y();
        y[1..].iter().all(|v| y[0] > *v)
    }
}

/// Ranked regions whose masses come from enumeration rather than closed forms.
fn enumerated_ranked_regions(n: usize, k: usize, beta: &NoiseSpec) -> Result<ExactRegions> {
    let table = enumerate_region_probs(n, k, beta)?;
    let mut regions = ranked_regions_exact(n, k, beta)?;
    if regions.is_merged() {
        return Ok(regions);
    }
    for r in &mut regions.regions {
        let (x, y) = table.get(&r.m).cloned().unwrap_or_else(|| (BigRational::zero(), BigRational::zero()));
        r.empty = x.is_zero();
        r.prob_x = x;
        r.prob_y = y;
    }
    Ok(regions)
}

/// Builds `f*`: `A` (top-ranked `p̲A` of X-mass) → label 0, `B` (bottom-ranked
/// `p̄B`) → label 1, and the remaining mass packed into labels `2..` with at
/// most `p̄B` each.
pub fn build_worst_case(
    n: usize,
    k: usize,
    beta: &NoiseSpec,
    pa_lower: &BigRational,
    pb_upper: &BigRational,
    num_labels: usize,
) -> Result<WorstCaseClassifier> {
    check_n(n, MAX_LEMMA_N)?;
    if num_labels < 2 {
        return Err(Error::SideCondition("at least two labels"));
    }
    let one = BigRational::one();
    if pa_lower < pb_upper {
        return Err(Error::SideCondition("p̲A ≥ p̄B"));
    }
    if pa_lower + pb_upper > one {
        return Err(Error::SideCondition("p̲A + p̄B ≤ 1"));
    }
    let others = BigRational::from_integer(BigInt::from(num_labels - 1));
    if pa_lower + &others * pb_upper < one {
        return Err(Error::SideCondition("p̲A + (|C|−1)·p̄B ≥ 1"));
    }
    let regions = enumerated_ranked_regions(n, k, beta)?;
    let len = regions.len();
    let mut remaining: Vec<BigRational> = regions.regions.iter().map(|r| r.prob_x.clone()).collect();
    let mut assignment: Vec<Vec<(Label, BigRational)>> = vec![Vec::new(); len];

    let mut take = |rank: usize, label: Label, want: &mut BigRational, remaining: &mut Vec<BigRational>| {
        let got = if remaining[rank] < *want { remaining[rank].clone() } else { want.clone() };
        if got.is_zero() {
            return;
        }
        remaining[rank] -= &got;
        *want -= &got;
        assignment[rank].push((label, got));
    };

    let mut want = pa_lower.clone();
    for rank in 0..len {
        take(rank, Label(0), &mut want, &mut remaining);
    }
    let mut want = pb_upper.clone();
    for rank in (0..len).rev() {
        take(rank, Label(1), &mut want, &mut remaining);
    }
    let mut label = 2usize;
    let mut budget = pb_upper.clone();
    for rank in 0..len {
        while !remaining[rank].is_zero() {
            if label >= num_labels {
                return Err(Error::Internal("residual mass exceeds label capacity".into()));
            }
            take(rank, Label(label as u32), &mut budget, &mut remaining);
            if budget.is_zero() {
                label += 1;
                budget = pb_upper.clone();
            }
        }
    }
    Ok(WorstCaseClassifier { k, num_labels, regions, assignment })
}

/// First `k` at which the worst-case classifier no longer keeps `c_A`
/// strictly ahead, or `None` if it wins for every `k ≤ n`.
pub fn tightness_flip_point(
    n: usize,
    beta: &NoiseSpec,
    pa_lower: &BigRational,
    pb_upper: &BigRational,
    num_labels: usize,
) -> Result<Option<usize>> {
    for k in 0..=n {
        if !build_worst_case(n, k, beta, pa_lower, pb_upper, num_labels)?.c_a_wins() {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::region::{prob_x_region, prob_y_region, NumericBackend, Probability};
    use crate::smoothing::FnClassifier;

    fn spec(p: u64, q: u64) -> NoiseSpec {
        NoiseSpec::new(p, q).unwrap()
    }

    fn r(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    #[test]
    fn single_bit_by_hand() {
        let t = enumerate_region_probs(1, 1, &spec(7, 10)).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[&1], (r(7, 10), r(3, 10)));
        assert_eq!(t[&-1], (r(3, 10), r(7, 10)));
    }

    #[test]
    fn zero_perturbation_is_one_region() {
        let t = enumerate_region_probs(3, 0, &spec(1, 2)).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[&0], (r(1, 1), r(1, 1)));
    }

    #[test]
    fn matches_closed_forms_at_n8_k3() {
        let b = spec(4, 5);
        let t = enumerate_region_probs(8, 3, &b).unwrap();
        for m in -8i64..=8 {
            let x = prob_x_region(8, 3, &b, m, NumericBackend::ExactRational).unwrap();
            let y = prob_y_region(8, 3, &b, m, NumericBackend::ExactRational).unwrap();
            let (ex, ey) = t.get(&m).cloned().unwrap_or_else(|| (BigRational::zero(), BigRational::zero()));
            assert_eq!(x, Probability::Exact(ex), "m={m}");
            assert_eq!(y, Probability::Exact(ey), "m={m}");
        }
    }

    #[test]
    fn rejects_large_n() {
        assert!(matches!(enumerate_region_probs(21, 1, &spec(7, 10)), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn point_law_sums_to_one() {
        let s: BitVector = "0110".parse().unwrap();
        let d = ExactDistribution::new(&s, &spec(7, 10)).unwrap();
        assert!(d.total().is_one());
        assert_eq!(d.prob(&s), r(2401, 10000));
        assert_eq!(d.prob(&"1001".parse().unwrap()), r(81, 10000));
    }

    #[test]
    fn smoothed_distribution_examples() {
        let b = spec(7, 10);
        let constant = FnClassifier::new(2, |_: &StructureVector| Label(1));
        let p = exact_smoothed_distribution(&constant, &StructureVector::zeros(5), &b).unwrap();
        assert_eq!(p, vec![r(0, 1), r(1, 1)]);

        let first_bit = FnClassifier::new(2, |s: &StructureVector| Label(s.get(0) as u32));
        let p = exact_smoothed_distribution(&first_bit, &StructureVector::zeros(6), &b).unwrap();
        assert_eq!(p[0], r(7, 10));

        let parity = FnClassifier::new(2, |s: &StructureVector| Label((s.count_ones() % 2) as u32));
        let p = exact_smoothed_distribution(&parity, &StructureVector::zeros(2), &b).unwrap();
        assert_eq!(p[0], r(58, 100));
    }

    #[test]
    fn popcount_law_matches_enumeration() {
        let b = spec(3, 5);
        let s: StructureVector = "1011000".parse().unwrap();
        let law = exact_popcount_distribution(&s, &b);
        assert!(law.iter().cloned().sum::<BigRational>().is_one());
        for t in 0..=7u32 {
            let f = FnClassifier::new(2, move |z: &StructureVector| Label((z.count_ones() >= t as usize) as u32));
            let p = exact_smoothed_distribution(&f, &s, &b).unwrap();
            let tail: BigRational = law[t as usize..].iter().cloned().sum();
            assert_eq!(p[1], tail, "t={t}");
        }
    }

    #[test]
    fn lemma1_holds_at_exact_bounds() {
        let b = spec(7, 10);
        let f = FnClassifier::new(3, |s: &StructureVector| Label(((s.count_ones() * 7 + s.get(2) as usize) % 3) as u32));
        let s: StructureVector = "01101001".parse().unwrap();
        let exact = exact_smoothed_distribution(&f, &s, &b).unwrap();
        let a = argmax_rational(&exact);
        let pb = exact.iter().enumerate().filter(|(c, _)| *c != a).map(|(_, v)| v.clone()).max().unwrap();
        let delta = BitVector::from_indices(8, &[1, 4, 7]).unwrap();
        let rep = verify_lemma1(&f, &s, &delta, &exact[a], &pb, &b).unwrap();
        assert_eq!(rep.status, LemmaStatus::Holds, "{rep:?}");
        let tighter = &exact[a] + r(1, 1000);
        let rep = verify_lemma1(&f, &s, &delta, &tighter, &pb, &b).unwrap();
        assert_eq!(rep.status, LemmaStatus::BoundsUnsatisfied);
    }

    #[test]
    fn neyman_pearson_on_threshold_sets() {
        let s = BitVector::zeros(6);
        let delta = BitVector::from_indices(6, &[0, 1]).unwrap();
        let mut tally = NeymanPearsonTally::default();
        for t in -2..=2 {
            for salt in 0..8u64 {
                let h = move |z: u64| (z.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt).is_multiple_of(3);
                let tie = move |z: u64| (z + salt).is_multiple_of(2);
                tally.merge(check_neyman_pearson(&s, &delta, &spec(7, 10), t, h, tie).unwrap());
            }
        }
        assert_eq!(tally.violations, 0);
        assert!(tally.confirmed > 0);
    }

    #[test]
    fn worst_case_trivial_and_example() {
        let b = spec(7, 10);
        let wc = build_worst_case(4, 2, &b, &r(1, 1), &r(0, 1), 2).unwrap();
        assert_eq!(wc.prob_x(), vec![r(1, 1), r(0, 1)]);
        assert_eq!(wc.prob_y(), vec![r(1, 1), r(0, 1)]);

        let wc = build_worst_case(6, 2, &b, &r(6, 10), &r(4, 10), 2).unwrap();
        assert_eq!(wc.prob_x(), vec![r(6, 10), r(4, 10)]);
    }

    #[test]
    fn worst_case_attains_lemma_bounds() {
        let b = spec(7, 10);
        let (pa, pb) = (r(13, 20), r(3, 20));
        for k in 0..=6 {
            let wc = build_worst_case(6, k, &b, &pa, &pb, 4).unwrap();
            let x = wc.prob_x();
            assert_eq!(x[0], pa);
            assert_eq!(x[1], pb);
            assert!(x[2..].iter().all(|v| *v <= pb));
            let split = build_region_split(ranked_regions_exact(6, k, &b).unwrap(), &pa, &pb).unwrap();
            let (ya, yb) = bound_pair(&split);
            let y = wc.prob_y();
            assert_eq!(y[0], ya);
            assert_eq!(y[1], yb);
        }
    }

    #[test]
    fn worst_case_side_conditions() {
        let b = spec(7, 10);
        assert!(matches!(build_worst_case(4, 1, &b, &r(3, 10), &r(4, 10), 3), Err(Error::SideCondition(_))));
        assert!(matches!(build_worst_case(4, 1, &b, &r(7, 10), &r(4, 10), 3), Err(Error::SideCondition(_))));
        assert!(matches!(build_worst_case(4, 1, &b, &r(5, 10), &r(1, 10), 3), Err(Error::SideCondition(_))));
    }

    #[test]
    fn flip_point_matches_certifier_on_example() {
        use crate::certifier::certified_perturbation_size_exact;
        let b = spec(7, 10);
        let (pa, pb) = (r(6, 10), r(4, 10));
        let flip = tightness_flip_point(6, &b, &pa, &pb, 2).unwrap();
        let k = certified_perturbation_size_exact(6, &b, &pa, &pb).unwrap().radius().unwrap();
        assert_eq!(flip, if k == 6 { None } else { Some(k + 1) });
    }
}
