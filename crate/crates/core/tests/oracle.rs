use num_rational::BigRational;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flipcert::certifier::{certified_perturbation_size_exact, check_radius_exact};
use flipcert::oracle::{
    build_worst_case, check_neyman_pearson, enumerate_region_probs, enumerate_region_probs_for,
    exact_smoothed_distribution, tightness_flip_point, NeymanPearsonTally,
};
use flipcert::region::rational_to_f64;
use flipcert::smoothing::{smoothed_predict, SmoothingConfig};
use flipcert::{BitVector, FnClassifier, Label, NoiseSpec, StructureVector};

fn r(p: i64, q: i64) -> BigRational {
    BigRational::new(p.into(), q.into())
}

fn seven_tenths() -> NoiseSpec {
    NoiseSpec::new(7, 10).unwrap()
}

#[test]
fn region_masses_do_not_depend_on_which_bits_flip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (n, k) in [(9, 4), (12, 7), (10, 1)] {
        let canonical = enumerate_region_probs(n, k, &seven_tenths()).unwrap();
        for _ in 0..5 {
            let s = BitVector::from_bools((0..n).map(|_| rng.gen_bool(0.5)));
            let delta = BitVector::from_indices(n, &sample(&mut rng, n, k).into_vec()).unwrap();
            assert_eq!(enumerate_region_probs_for(&s, &delta, &seven_tenths()).unwrap(), canonical);
        }
    }
}

#[test]
fn check_radius_agrees_with_worst_case_at_n10_k3() {
    let (pa, pb) = (r(9, 10), r(1, 10));
    let certified = check_radius_exact(10, 3, &seven_tenths(), &pa, &pb).unwrap();
    let wc = build_worst_case(10, 3, &seven_tenths(), &pa, &pb, 2).unwrap();
    assert_eq!(certified, wc.c_a_wins());
}

#[test]
fn certified_size_is_tight_at_n12() {
    let (pa, pb) = (r(95, 100), r(5, 100));
    let k = certified_perturbation_size_exact(12, &seven_tenths(), &pa, &pb).unwrap().radius().unwrap();
    let flip = tightness_flip_point(12, &seven_tenths(), &pa, &pb, 2).unwrap();
    assert_eq!(flip, if k == 12 { None } else { Some(k + 1) });
    assert!(k < 12);
}

#[test]
fn neyman_pearson_randomized() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut tally = NeymanPearsonTally::default();
    for _ in 0..60 {
        let n = rng.gen_range(2..=10);
        let k = rng.gen_range(0..=n);
        let b = NoiseSpec::new(rng.gen_range(1..10), 10).unwrap();
        let s = BitVector::from_bools((0..n).map(|_| rng.gen_bool(0.5)));
        let delta = BitVector::from_indices(n, &sample(&mut rng, n, k).into_vec()).unwrap();
        let t = rng.gen_range(-(k as i64)..=k as i64);
        let (h_salt, tie_salt): (u64, u64) = (rng.gen(), rng.gen());
        let density = rng.gen_range(1..8u64);
        let h = move |z: u64| (z ^ h_salt).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 61 < density;
        let tie = move |z: u64| (z ^ tie_salt).wrapping_mul(0xD1B5_4A32_D192_ED03) >> 63 == 1;
        tally.merge(check_neyman_pearson(&s, &delta, &b, t, h, tie).unwrap());
    }
    assert_eq!(tally.violations, 0);
    assert!(tally.confirmed >= 30, "{tally:?}");
}

#[test]
fn parity_estimate_within_three_sigma() {
    let b = seven_tenths();
    let parity = FnClassifier::new(2, |s: &StructureVector| Label((s.count_ones() % 2) as u32));
    let s: StructureVector = "10110010".parse().unwrap();
    let exact = rational_to_f64(&exact_smoothed_distribution(&parity, &s, &b).unwrap()[1]);
    let d = 100_000u64;
    let run = smoothed_predict(&parity, &s, &SmoothingConfig::new(b, d, 8)).unwrap();
    let est = run.counts.get(Label(1)) as f64 / d as f64;
    let sigma = (exact * (1.0 - exact) / d as f64).sqrt();
    assert!((est - exact).abs() <= 3.0 * sigma, "est {est} exact {exact} sigma {sigma}");
}

#[test]
fn top_label_estimate_within_four_sigma() {
    let b = NoiseSpec::new(4, 5).unwrap();
    let f = FnClassifier::new(3, |s: &StructureVector| Label((s.count_ones() / 4).min(2) as u32));
    let s: StructureVector = "11001010011010".parse().unwrap();
    let exact: Vec<f64> = exact_smoothed_distribution(&f, &s, &b).unwrap().iter().map(rational_to_f64).collect();
    let d = 100_000u64;
    let run = smoothed_predict(&f, &s, &SmoothingConfig::new(b, d, 99)).unwrap();
    for (c, p) in exact.iter().enumerate() {
        let est = run.counts.get(Label(c as u32)) as f64 / d as f64;
        let sigma = (p * (1.0 - p) / d as f64).sqrt();
        assert!((est - p).abs() <= 4.0 * sigma, "label {c}: est {est} exact {p}");
    }
}
