use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

use flipcert::certifier::{bound_pair, build_region_split, certified_perturbation_size, check_radius};
use flipcert::confidence::{simultaneous_bounds, LabelCounts};
use flipcert::graph::{graph_from_structure_vector, structure_vector_for_graph, structure_vector_for_node, Graph};
use flipcert::harness::{certified_accuracy_curve, EvaluationRecord};
use flipcert::region::{density_ratio, ranked_regions_exact, ranked_regions_float, region_size, t_coefficient};
use flipcert::{BitVector, Certification, Label, NoiseSpec, NumericBackend};

const EXACT: NumericBackend = NumericBackend::ExactRational;
const FLOAT: NumericBackend = NumericBackend::ConservativeFloat;

fn spec_strategy() -> impl Strategy<Value = NoiseSpec> {
    (1u64..20).prop_filter_map("not 1/2", |p| {
        let s = NoiseSpec::new(p, 20).ok()?;
        (!s.is_half()).then_some(s)
    })
}

fn radius(c: Certification) -> Option<usize> {
    c.radius()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ranked_masses_normalize_and_respect_ratio((n, k) in (1usize..40).prop_flat_map(|n| (Just(n), 0..=n)), b in spec_strategy()) {
        let r = ranked_regions_exact(n, k, &b).unwrap();
        let sx: BigRational = r.regions.iter().map(|g| g.prob_x.clone()).sum();
        let sy: BigRational = r.regions.iter().map(|g| g.prob_y.clone()).sum();
        prop_assert!(sx.is_one());
        prop_assert!(sy.is_one());
        for (rank, g) in r.regions.iter().enumerate() {
            prop_assert_eq!(&g.prob_x, &(r.ratio(rank) * &g.prob_y));
            prop_assert_eq!(g.empty, g.prob_x.is_zero());
        }
        // Ratios strictly decrease along the ranking.
        for w in r.regions.windows(2) {
            prop_assert!(density_ratio(&b, w[0].m) > density_ratio(&b, w[1].m));
        }
    }

    #[test]
    fn x_and_y_swap_under_mirror((n, k) in (1usize..30).prop_flat_map(|n| (Just(n), 0..=n)), b in spec_strategy()) {
        let r = ranked_regions_exact(n, k, &b).unwrap();
        for g in &r.regions {
            let mirror = r.get_m(-g.m).unwrap();
            prop_assert_eq!(&g.prob_x, &mirror.prob_y);
        }
    }

    #[test]
    fn t_coefficient_is_region_size(n in 1usize..16, k in 0usize..16, w in 0usize..16, v in 0usize..16) {
        prop_assume!(k <= n && w <= n && v <= n);
        let m = v as i64 - w as i64;
        prop_assert_eq!(region_size(n, k, w, v).unwrap(), t_coefficient(n, k, m, v as i64).unwrap());
    }

    #[test]
    fn float_regions_bracket_exact((n, k) in (1usize..60).prop_flat_map(|n| (Just(n), 0..=n)), b in spec_strategy()) {
        let e = ranked_regions_exact(n, k, &b).unwrap();
        let f = ranked_regions_float(n, k, &b).unwrap();
        for (ge, gf) in e.regions.iter().zip(&f.regions) {
            let lo = BigRational::from_float(gf.prob_x.lo).unwrap();
            let hi = BigRational::from_float(gf.prob_x.hi).unwrap();
            prop_assert!(lo <= ge.prob_x && ge.prob_x <= hi, "m={}", ge.m);
        }
    }

    #[test]
    fn dropping_empty_regions_changes_nothing(
        (n, k) in (1usize..20).prop_flat_map(|n| (Just(n), 0..=n)),
        b in spec_strategy(),
        pa in 1u32..1000,
        pb in 0u32..1000,
    ) {
        prop_assume!(pa > pb && pa + pb <= 1000);
        let pa = BigRational::new(BigInt::from(pa), BigInt::from(1000));
        let pb = BigRational::new(BigInt::from(pb), BigInt::from(1000));
        let full = ranked_regions_exact(n, k, &b).unwrap();
        let mut pruned = full.clone();
        pruned.regions.retain(|g| !g.empty);
        let a = bound_pair(&build_region_split(full, &pa, &pb).unwrap());
        let c = bound_pair(&build_region_split(pruned, &pa, &pb).unwrap());
        prop_assert_eq!(a, c);
    }

    #[test]
    fn k_monotone_in_bounds(n in 1usize..64, b in spec_strategy(), pa in 0.5f64..1.0, pb in 0.0f64..0.5, bump in 0.0f64..0.2) {
        prop_assume!(pa > pb && pa + pb <= 1.0);
        let base = radius(certified_perturbation_size(n, &b, pa, pb, EXACT).unwrap());
        let higher_pa = (pa + bump).min(1.0 - pb);
        let up = radius(certified_perturbation_size(n, &b, higher_pa, pb, EXACT).unwrap());
        let lower_pb = (pb - bump).max(0.0);
        let down = radius(certified_perturbation_size(n, &b, pa, lower_pb, EXACT).unwrap());
        prop_assert!(up >= base);
        prop_assert!(down >= base);
    }

    #[test]
    fn float_never_exceeds_exact(n in 1usize..64, b in spec_strategy(), pa in 0.3f64..1.0, pb in 0.0f64..0.5) {
        prop_assume!(pa > pb && pa + pb <= 1.0);
        let e = radius(certified_perturbation_size(n, &b, pa, pb, EXACT).unwrap()).unwrap();
        let f = radius(certified_perturbation_size(n, &b, pa, pb, FLOAT).unwrap()).unwrap();
        prop_assert!(f <= e);
        prop_assert!(e - f <= 1);
    }

    #[test]
    fn half_beta_certifies_everything(n in 1usize..500, pa in 0.0f64..1.0, pb in 0.0f64..1.0) {
        prop_assume!(pa > pb);
        let half = NoiseSpec::new(1, 2).unwrap();
        for backend in [EXACT, FLOAT] {
            prop_assert_eq!(radius(certified_perturbation_size(n, &half, pa, pb, backend).unwrap()), Some(n));
            prop_assert!(check_radius(n, n, &half, pa, pb, backend).unwrap());
        }
    }

    #[test]
    fn bounds_stay_ordered(counts in prop::collection::vec(0u64..500, 1..6), alpha in 0.001f64..0.2) {
        prop_assume!(counts.iter().sum::<u64>() > 0);
        let lc = LabelCounts::new(counts.clone()).unwrap();
        let b = simultaneous_bounds(&lc, alpha).unwrap();
        let d = lc.total() as f64;
        let top = *counts.iter().max().unwrap() as f64;
        prop_assert!((0.0..=1.0).contains(&b.pa_lower));
        prop_assert!((0.0..=1.0).contains(&b.pb_upper));
        prop_assert!(b.pb_upper <= 1.0 - b.pa_lower);
        prop_assert!(b.pa_lower <= top / d);
    }

    #[test]
    fn curve_is_non_increasing(recs in prop::collection::vec((0u32..3, prop::option::of((0u32..3, 0usize..10))), 1..50)) {
        let records: Vec<EvaluationRecord> = recs
            .iter()
            .enumerate()
            .map(|(id, (t, v))| EvaluationRecord {
                id,
                true_label: Some(Label(*t)),
                predicted: v.map(|(p, _)| Label(p)),
                k_certified: v.map(|(_, k)| k),
            })
            .collect();
        let sizes: Vec<usize> = (0..12).collect();
        let curve = certified_accuracy_curve(&records, &sizes).unwrap();
        for w in curve.windows(2) {
            prop_assert!(w[1].1 <= w[0].1);
        }
    }

    #[test]
    fn graph_round_trip(n in 2usize..12, edges in prop::collection::vec((0usize..12, 0usize..12), 0..40)) {
        let mut g = Graph::new(n);
        for (u, v) in edges {
            if u < n && v < n && u != v {
                g.add_edge(u, v).unwrap();
            }
        }
        let s = structure_vector_for_graph(&g);
        prop_assert_eq!(s.dim(), n * (n - 1) / 2);
        prop_assert_eq!(s.count_ones(), g.num_edges());
        prop_assert_eq!(graph_from_structure_vector(&s).unwrap(), g.clone());
        for u in 0..n {
            prop_assert_eq!(structure_vector_for_node(&g, u).unwrap().count_ones(), g.degree(u));
        }
    }

    #[test]
    fn xor_is_involution(bits in prop::collection::vec(any::<bool>(), 0..200), flips in prop::collection::vec(any::<bool>(), 0..200)) {
        let len = bits.len().min(flips.len());
        let a = BitVector::from_bools(bits[..len].iter().copied());
        let d = BitVector::from_bools(flips[..len].iter().copied());
        let once = a.xor(&d).unwrap();
        prop_assert_eq!(once.xor(&d).unwrap(), a.clone());
        prop_assert_eq!(a.hamming(&once).unwrap(), d.count_ones());
    }
}
