//! Normal and binomial primitives against independent oracles: composite
//! Simpson quadrature of the density, brute-force binomial sums, and values
//! frozen from 50-digit arithmetic.

#![allow(clippy::excessive_precision)]

use groupvote::{
    binomial_tail, negative_part_mean, normal_cdf, normal_pdf, positive_part_mean, BinomialTail,
    RandomSource,
};
use proptest::prelude::*;

fn density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// ∫_a^b f by composite Simpson with `panels` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn cdf_by_quadrature(x: f64) -> f64 {
    0.5 + simpson(density, 0.0, x, 20_000)
}

#[test]
fn cdf_matches_quadrature_on_grid() {
    let mut worst: f64 = 0.0;
    let mut x = -8.0;
    while x <= 8.0 {
        worst = worst.max((normal_cdf(x).unwrap() - cdf_by_quadrature(x)).abs());
        x += 0.0625;
    }
    assert!(worst <= 1e-12, "max |error| {worst:e}");
}

#[test]
fn cdf_examples() {
    let x = -0.8 / 30.0;
    let v = normal_cdf(x).unwrap();
    assert!((v - cdf_by_quadrature(x)).abs() < 1e-13);
    assert!((v - 0.489_362_799_909_429_96).abs() < 1e-15);
    assert!((v - 0.48936).abs() < 5e-6);

    let x = -0.8 * 50f64.sqrt() / 30.0;
    let v = normal_cdf(x).unwrap();
    assert!((v - cdf_by_quadrature(x)).abs() < 1e-13);
    assert!((v - 0.425_218_134_156_173_24).abs() < 1e-15);
}

#[test]
fn positive_part_mean_matches_quadrature() {
    let (mu, sigma) = (-0.8, 30.0);
    let integrand = |x: f64| x * density((x - mu) / sigma) / sigma;
    let oracle = simpson(integrand, 0.0, 40.0 * sigma, 200_000);
    let v = positive_part_mean(mu, sigma).unwrap();
    assert!((v - oracle).abs() < 1e-9, "{v} vs {oracle}");
    // 50-digit quadrature of the same integral
    assert!((v - 11.572_523_544_214_27).abs() < 1e-12);
}

#[test]
fn pdf_closed_form() {
    assert!((normal_pdf(0.0).unwrap() - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-16);
    assert!((normal_pdf(1.0).unwrap() - 0.241_970_724_519_143_37).abs() < 1e-16);
}

fn brute_force_tail(n: u64, p: f64, k: u64) -> f64 {
    let mut total = 0.0;
    for j in k..=n {
        let mut c: u128 = 1;
        for i in 0..j {
            c = c * u128::from(n - i) / u128::from(i + 1);
        }
        total += c as f64 * p.powi(j as i32) * (1.0 - p).powi((n - j) as i32);
    }
    total
}

#[test]
fn binomial_tail_against_brute_force() {
    let v = binomial_tail(10, 0.48936, 6).unwrap();
    let oracle = brute_force_tail(10, 0.48936, 6);
    assert!((v - oracle).abs() <= 1e-14 * oracle);
    assert!((v - 0.351_062_902_819_799_88).abs() < 1e-15);

    for &(n, p) in &[(1u64, 0.3), (7, 0.5), (25, 0.05), (40, 0.77), (60, 0.5)] {
        for k in 0..=n {
            let exact = brute_force_tail(n, p, k);
            let got = binomial_tail(n, p, k as i64).unwrap();
            assert!(
                (got - exact).abs() <= 1e-13 * exact.max(1e-300),
                "n={n} p={p} k={k}: {got} vs {exact}"
            );
        }
    }
}

#[test]
fn binomial_tail_large_n_reference_values() {
    // (trials, p, k, P(B ≥ k)) from 50-digit summation.
    let cases = [
        (1000, 0.48936, 530, 0.005_555_598_038_346_706_2),
        (1000, 0.48936, 470, 0.895_538_367_754_292_85),
        (5000, 0.01, 80, 5.165_193_510_754_190_2e-5),
        (100_000, 0.3, 30_200, 0.084_368_866_627_384_001),
        (100_000, 0.3, 29_500, 0.999_728_765_304_733_83),
        (37, 0.9, 30, 0.972_558_640_035_248_48),
    ];
    for (n, p, k, want) in cases {
        let got = binomial_tail(n, p, k).unwrap();
        let rel = ((got - want) / want).abs();
        assert!(rel <= 1e-12, "n={n} k={k}: rel error {rel:e}");
    }
}

#[test]
fn random_source_streams() {
    let draw = |seed, stream| {
        let mut r = RandomSource::new(seed, stream);
        (0..1000).map(|_| r.standard_normal()).collect::<Vec<_>>()
    };
    assert_eq!(draw(9, 3), draw(9, 3));
    let a = draw(9, 3);
    let b = draw(9, 4);
    // sample correlation of independent streams is O(1/√1000)
    let corr: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / 1000.0;
    assert!(corr.abs() < 0.15, "{corr}");
    let mean: f64 = a.iter().sum::<f64>() / 1000.0;
    assert!(mean.abs() < 0.15);
}

proptest! {
    #[test]
    fn cdf_symmetry(x in -40.0f64..40.0) {
        let s = normal_cdf(x).unwrap() + normal_cdf(-x).unwrap() - 1.0;
        prop_assert!(s.abs() <= 1e-14);
        prop_assert_eq!(normal_pdf(x).unwrap(), normal_pdf(-x).unwrap());
    }

    #[test]
    fn partial_means_sum_to_mean(mu in -50.0f64..50.0, sigma in 0.01f64..100.0) {
        let total = positive_part_mean(mu, sigma).unwrap() + negative_part_mean(mu, sigma).unwrap();
        prop_assert!((total - mu).abs() <= 1e-10);
        prop_assert!(positive_part_mean(mu, sigma).unwrap() >= 0.0);
    }

    #[test]
    fn tail_differences_are_pmf(n in 0u64..400, p in 0.0f64..=1.0) {
        let t = BinomialTail::new(n, p).unwrap();
        prop_assert_eq!(t.tail_at_least(0), 1.0);
        prop_assert_eq!(t.tail_at_least(n as i64 + 1), 0.0);
        for k in 0..=n as i64 {
            let pmf = t.tail_at_least(k) - t.tail_at_least(k + 1);
            prop_assert!(pmf >= -1e-12, "k={} pmf={}", k, pmf);
        }
    }
}
