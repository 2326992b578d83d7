//! Density-ratio regions of the hypercube.
//!
//! Fix `s` and a perturbation `δ` with `‖δ‖0 = k`, and let `X = s ⊕ ε`,
//! `Y = s ⊕ δ ⊕ ε`. A point `z` at distance `w` from `s` and `v` from `s ⊕ δ`
//! has `Pr(X=z)/Pr(Y=z) = (β/(1-β))^(v-w)`. The region `R(m)` collects the
//! points with `v - w = m`, for `m ∈ [-n, n]`. Region probabilities depend
//! on `δ` only through `k`.
//!
//! Two numeric backends are offered. The exact backend works in arbitrary
//! precision rationals. The conservative-float backend returns intervals
//! that provably contain the exact value.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};
use serde::{Deserialize, Serialize};

use crate::bits::NoiseSpec;
use crate::error::{Error, Result};
use crate::interval::{binomial_term, ln_ratio, Interval, LnFactorials};

/// Above this dimension `Auto` switches from exact rationals to floats.
pub const EXACT_AUTO_LIMIT: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NumericBackend {
    ExactRational,
    ConservativeFloat,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum BackendChoice {
    Exact,
    Float,
    #[default]
    Auto,
}

impl BackendChoice {
    pub fn resolve(self, n: usize) -> NumericBackend {
        match self {
            BackendChoice::Exact => NumericBackend::ExactRational,
            BackendChoice::Float => NumericBackend::ConservativeFloat,
            BackendChoice::Auto if n <= EXACT_AUTO_LIMIT => NumericBackend::ExactRational,
            BackendChoice::Auto => NumericBackend::ConservativeFloat,
        }
    }
}

impl std::str::FromStr for BackendChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "float" => Ok(Self::Float),
            "auto" => Ok(Self::Auto),
            other => Err(Error::OutOfRange(format!("unknown backend `{other}`"))),
        }
    }
}

/// A region probability in either backend.
#[derive(Clone, Debug, PartialEq)]
pub enum Probability {
    Exact(BigRational),
    Bounded(Interval),
}

impl Probability {
    pub fn lower_f64(&self) -> f64 {
        match self {
            Probability::Exact(r) => rational_to_f64(r),
            Probability::Bounded(iv) => iv.lo,
        }
    }

    pub fn upper_f64(&self) -> f64 {
        match self {
            Probability::Exact(r) => rational_to_f64(r),
            Probability::Bounded(iv) => iv.hi,
        }
    }
}

/// `C(n, k)` by the multiplicative formula; each partial product is itself a
/// binomial coefficient, so every division is exact.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

fn binomial_i(n: i64, k: i64) -> BigUint {
    if n < 0 || k < 0 || k > n {
        BigUint::zero()
    } else {
        binomial(n as u64, k as u64)
    }
}

/// `|R(w, v)|`: how many `z` are `w` bits from `s` and `v` bits from `s ⊕ δ`.
pub fn region_size(n: usize, k: usize, w: usize, v: usize) -> Result<BigUint> {
    if k > n || w > n || v > n {
        return Err(Error::OutOfRange(format!(
            "region_size(n={n}, k={k}, w={w}, v={v}) needs w, v, k <= n"
        )));
    }
    let (n, k, w, v) = (n as i64, k as i64, w as i64, v as i64);
    let excess = w + v - k;
    if excess < 0 || excess % 2 != 0 {
        return Ok(BigUint::zero());
    }
    // `excess / 2` flips land outside δ's support; the rest inside it.
    Ok(binomial_i(n - k, excess / 2) * binomial_i(k, (w - v + k) / 2))
}

/// Valid `j` range for the summation over region `m`.
fn j_range(n: i64, m: i64) -> std::ops::RangeInclusive<i64> {
    m.max(0)..=n.min(n + m)
}

fn check_region(n: usize, m: i64) -> Result<()> {
    if m.unsigned_abs() as usize > n {
        return Err(Error::OutOfRange(format!("region index m={m} outside [-{n}, {n}]")));
    }
    Ok(())
}

/// `t(m, j) = |R(j - m, j)|`.
pub fn t_coefficient(n: usize, k: usize, m: i64, j: i64) -> Result<BigUint> {
    check_region(n, m)?;
    if k > n {
        return Err(Error::OutOfRange(format!("k={k} > n={n}")));
    }
    let (ni, ki) = (n as i64, k as i64);
    if !j_range(ni, m).contains(&j) {
        return Err(Error::OutOfRange(format!(
            "j={j} outside [{}, {}] for m={m}",
            m.max(0),
            ni.min(ni + m)
        )));
    }
    if (m + ki).rem_euclid(2) != 0 || 2 * j - m < ki {
        return Ok(BigUint::zero());
    }
    Ok(binomial_i(ni - ki, (2 * j - m - ki) / 2) * binomial_i(ki, (ki - m) / 2))
}

/// `r(m) = (β / (1 - β))^m`, exact.
pub fn density_ratio(beta: &NoiseSpec, m: i64) -> BigRational {
    let rho = BigRational::new(
        BigInt::from(beta.numer()),
        BigInt::from(beta.denom() - beta.numer()),
    );
    if m >= 0 {
        Pow::pow(&rho, m.unsigned_abs())
    } else {
        Pow::pow(&rho.recip(), m.unsigned_abs())
    }
}

/// Enclosure of `1 / r(m) = ((1 - β) / β)^m`.
pub fn inverse_ratio_interval(beta: &NoiseSpec, m: i64) -> Interval {
    if m == 0 {
        return Interval::ONE;
    }
    let (l, e) = ln_ratio(beta.denom() - beta.numer(), beta.numer());
    let x = m as f64 * l;
    Interval::exp_of(x, m.unsigned_abs() as f64 * e + 2f64.powi(-52) * x.abs())
}

fn pow_u(base: u64, exp: i64) -> BigInt {
    Pow::pow(BigInt::from(base), exp as u64)
}

/// Which of the two noise laws a probability refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    X,
    Y,
}

/// Literal summation over `t(m, j)`; exact.
fn exact_region_sum(n: usize, k: usize, beta: &NoiseSpec, m: i64, side: Side) -> Result<BigRational> {
    check_region(n, m)?;
    if k > n {
        return Err(Error::OutOfRange(format!("k={k} > n={n}")));
    }
    let (p, q) = (beta.numer(), beta.denom());
    let ni = n as i64;
    let mut numer = BigInt::zero();
    for j in j_range(ni, m) {
        let t = t_coefficient(n, k, m, j)?;
        if t.is_zero() {
            continue;
        }
        // Distance from the centre of the law in question.
        let dist = match side {
            Side::X => j - m,
            Side::Y => j,
        };
        numer += BigInt::from(t) * pow_u(p, ni - dist) * pow_u(q - p, dist);
    }
    Ok(BigRational::new(numer, pow_u(q, ni)))
}

/// `Pr(X ∈ R(m))` when `‖δ‖0 = k`.
///
/// The exact backend evaluates the sum over `j` of `β^(n-(j-m)) (1-β)^(j-m) t(m,j)`
/// term by term. The float backend uses the equivalent closed form: summing
/// over the bits outside `δ`'s support by the binomial theorem leaves
/// `C(k, a) β^(k-a) (1-β)^a` with `a = (k - m) / 2`.
pub fn prob_x_region(
    n: usize,
    k: usize,
    beta: &NoiseSpec,
    m: i64,
    backend: NumericBackend,
) -> Result<Probability> {
    match backend {
        NumericBackend::ExactRational => exact_region_sum(n, k, beta, m, Side::X).map(Probability::Exact),
        NumericBackend::ConservativeFloat => {
            check_region(n, m)?;
            if k > n {
                return Err(Error::OutOfRange(format!("k={k} > n={n}")));
            }
            let table = LnFactorials::new(k);
            Ok(Probability::Bounded(float_region(&table, k, beta, m, Side::X)))
        }
    }
}

/// `Pr(Y ∈ R(m))` when `‖δ‖0 = k`.
pub fn prob_y_region(
    n: usize,
    k: usize,
    beta: &NoiseSpec,
    m: i64,
    backend: NumericBackend,
) -> Result<Probability> {
    match backend {
        NumericBackend::ExactRational => exact_region_sum(n, k, beta, m, Side::Y).map(Probability::Exact),
        NumericBackend::ConservativeFloat => {
            check_region(n, m)?;
            if k > n {
                return Err(Error::OutOfRange(format!("k={k} > n={n}")));
            }
            let table = LnFactorials::new(k);
            Ok(Probability::Bounded(float_region(&table, k, beta, m, Side::Y)))
        }
    }
}

/// Index `a` of the binomial term carrying region `m`, if any.
fn support_index(k: usize, m: i64) -> Option<usize> {
    let k = k as i64;
    if m.abs() > k || (k - m) % 2 != 0 {
        None
    } else {
        Some(((k - m) / 2) as usize)
    }
}

fn float_region(table: &LnFactorials, k: usize, beta: &NoiseSpec, m: i64, side: Side) -> Interval {
    let Some(a) = support_index(k, m) else {
        return Interval::ZERO;
    };
    let (lb, eb) = ln_ratio(beta.numer(), beta.denom());
    let (lf, ef) = ln_ratio(beta.denom() - beta.numer(), beta.denom());
    match side {
        // β^(k-a) (1-β)^a
        Side::X => binomial_term(table, k, a, lb, eb, lf, ef),
        // β^a (1-β)^(k-a)
        Side::Y => binomial_term(table, k, a, lf, ef, lb, eb),
    }
}

fn exact_region_closed(k: usize, beta: &NoiseSpec, m: i64, side: Side) -> BigRational {
    let Some(a) = support_index(k, m) else {
        return BigRational::zero();
    };
    let (p, q) = (beta.numer(), beta.denom());
    let (a, b) = (a as i64, (k - a) as i64);
    let c = BigInt::from(binomial(k as u64, a as u64));
    let numer = match side {
        Side::X => c * pow_u(p, b) * pow_u(q - p, a),
        Side::Y => c * pow_u(p, a) * pow_u(q - p, b),
    };
    BigRational::new(numer, pow_u(q, k as i64))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Region<T> {
    pub m: i64,
    pub prob_x: T,
    pub prob_y: T,
    /// No point of the hypercube falls in this region for this `k`.
    pub empty: bool,
}

/// Regions ranked by descending density ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionProbabilities<T> {
    pub n: usize,
    pub k: usize,
    pub beta: NoiseSpec,
    pub regions: Vec<Region<T>>,
}

pub type ExactRegions = RegionProbabilities<BigRational>;
pub type FloatRegions = RegionProbabilities<Interval>;

impl<T> RegionProbabilities<T> {
    /// True when every region has ratio 1 (`β = 1/2`), collapsed into one.
    pub fn is_merged(&self) -> bool {
        self.beta.is_half()
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn get_m(&self, m: i64) -> Option<&Region<T>> {
        self.regions.iter().find(|r| r.m == m)
    }
}

impl ExactRegions {
    pub fn ratio(&self, rank: usize) -> BigRational {
        density_ratio(&self.beta, self.regions[rank].m)
    }
}

impl FloatRegions {
    pub fn inverse_ratio(&self, rank: usize) -> Interval {
        if self.is_merged() {
            return Interval::ONE;
        }
        inverse_ratio_interval(&self.beta, self.regions[rank].m)
    }
}

fn ranked_m(n: usize, beta: &NoiseSpec) -> Vec<i64> {
    let n = n as i64;
    if beta.keeps_more_than_flips() {
        (-n..=n).rev().collect()
    } else {
        (-n..=n).collect()
    }
}

pub fn ranked_regions_exact(n: usize, k: usize, beta: &NoiseSpec) -> Result<ExactRegions> {
    if k > n {
        return Err(Error::OutOfRange(format!("k={k} > n={n}")));
    }
    let regions = if beta.is_half() {
        vec![Region {
            m: 0,
            prob_x: BigRational::one(),
            prob_y: BigRational::one(),
            empty: false,
        }]
    } else {
        ranked_m(n, beta)
            .into_iter()
            .map(|m| Region {
                m,
                prob_x: exact_region_closed(k, beta, m, Side::X),
                prob_y: exact_region_closed(k, beta, m, Side::Y),
                empty: support_index(k, m).is_none(),
            })
            .collect()
    };
    Ok(RegionProbabilities { n, k, beta: *beta, regions })
}

pub fn ranked_regions_float(n: usize, k: usize, beta: &NoiseSpec) -> Result<FloatRegions> {
    if k > n {
        return Err(Error::OutOfRange(format!("k={k} > n={n}")));
    }
    let regions = if beta.is_half() {
        vec![Region {
            m: 0,
            prob_x: Interval::ONE,
            prob_y: Interval::ONE,
            empty: false,
        }]
    } else {
        let table = LnFactorials::new(k);
        ranked_m(n, beta)
            .into_iter()
            .map(|m| Region {
                m,
                prob_x: float_region(&table, k, beta, m, Side::X),
                prob_y: float_region(&table, k, beta, m, Side::Y),
                empty: support_index(k, m).is_none(),
            })
            .collect()
    };
    Ok(RegionProbabilities { n, k, beta: *beta, regions })
}

#[derive(Clone, Debug, PartialEq)]
pub enum RankedRegions {
    Exact(ExactRegions),
    Float(FloatRegions),
}

/// All `2n + 1` regions in descending-ratio order (ascending `m` when
/// `β < 1/2`). Empty regions are kept and flagged. At `β = 1/2` every ratio
/// is 1 and a single merged region is returned.
pub fn ranked_regions(n: usize, k: usize, beta: &NoiseSpec, backend: NumericBackend) -> Result<RankedRegions> {
    match backend {
        NumericBackend::ExactRational => ranked_regions_exact(n, k, beta).map(RankedRegions::Exact),
        NumericBackend::ConservativeFloat => ranked_regions_float(n, k, beta).map(RankedRegions::Float),
    }
}

/// Nearest `f64` to an exact rational (for reporting only).
pub fn rational_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational value of a finite `f64`.
pub fn f64_to_rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite probability")
}
