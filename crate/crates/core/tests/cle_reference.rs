use std::sync::Arc;

use dimer_nesting::cle_reference::*;
use dimer_nesting::sampler::stream_rng;

#[test]
fn small_depth_and_deterministic_steps() {
    let u = IncrementLaw::Uniform { lo: 2.0, hi: 3.0 };
    for seed in 0..20 {
        assert_eq!(nesting_count_at_scale(&u, 1.9, seed).unwrap(), 0);
    }
    let c = IncrementLaw::Deterministic(0.7);
    for t in [0.5, 0.7, 3.0, 10.0] {
        assert_eq!(nesting_count_at_scale(&c, t, 1).unwrap(), (t / 0.7 + 1e-12).floor() as u64);
    }
    assert!(nesting_count_at_scale(&c, 0.0, 1).is_err());
    assert!(nesting_count_at_scale(&IncrementLaw::Deterministic(0.0), 1.0, 1).is_err());
}

#[test]
fn counts_are_pathwise_monotone() {
    let law = IncrementLaw::calibrated_placeholder();
    let grid: Vec<f64> = (1..=40).map(|k| 2.0 * k as f64).collect();
    for i in 0..50 {
        let n = nesting_counts_on_grid(&law, &grid, &mut stream_rng(3, i));
        assert!(n.windows(2).all(|p| p[0] <= p[1]));
    }
}

#[test]
fn calibration_moments() {
    let law = IncrementLaw::calibrated_placeholder();
    let pi2 = std::f64::consts::PI.powi(2);
    assert!((law.mean() - pi2).abs() < 1e-12);
    assert!((law.variance() - 2.0 * pi2 * pi2 / 3.0).abs() < 1e-9);
    let (a, b) = law.renewal_slopes();
    assert!((a - 1.0 / pi2).abs() < 1e-15 && (b - 2.0 / (3.0 * pi2)).abs() < 1e-15);
    assert!(IncrementLaw::by_name("nope").is_err());
}

#[test]
fn growth_fits_match_renewal_theory() {
    let grid: Vec<f64> = (1..=8).map(|k| 10.0 * k as f64).collect();
    let custom = IncrementLaw::Custom { sampler: Arc::new(|r: &mut rand_chacha::ChaCha8Rng| 0.5 + rand::Rng::random::<f64>(r)), mean: 1.0, variance: 1.0 / 12.0 };
    for law in [IncrementLaw::calibrated_placeholder(), IncrementLaw::by_name("exponential").unwrap(), custom] {
        let fit = growth_constants_fit(&law, &grid, 5000, 1).unwrap();
        assert!((fit.mean_slope / fit.predicted.0 - 1.0).abs() < 0.05, "{fit:?}");
        assert!((fit.var_slope / fit.predicted.1 - 1.0).abs() < 0.05, "{fit:?}");
        // renewal bracket on the mean
        let m = law.mean();
        for r in &fit.rows {
            assert!(r.mean >= r.t / m - 1.0 && r.mean <= r.t / m + 2.0);
        }
    }
    let exp = growth_constants_fit(&IncrementLaw::by_name("exponential").unwrap(), &grid, 5000, 2).unwrap();
    assert!(exp.ks < 0.05, "{}", exp.ks);
    assert!(growth_constants_fit(&IncrementLaw::Deterministic(1.0), &[5.0], 10, 0).is_err());
}

#[test]
fn fits_are_reproducible() {
    let grid = [10.0, 20.0, 40.0];
    let law = IncrementLaw::by_name("uniform").unwrap();
    let a = growth_constants_fit(&law, &grid, 500, 9).unwrap();
    let b = growth_constants_fit(&law, &grid, 500, 9).unwrap();
    assert_eq!(a.mean_slope, b.mean_slope);
    assert_eq!(a.var_slope, b.var_slope);
}
