//! Monte Carlo checks against closed-form reference values.

use sis_core::theory::{eigen_concentration_check, ks_critical_01, max_spurious_corr, projection_diag_check, SpuriousMode};

#[test]
fn projection_diagonal_has_beta_mean_and_passes_ks() {
    let (n, p, draws) = (10, 100, 4000);
    let r = projection_diag_check(n, p, draws, 17).unwrap();
    // Beta(n/2, (p−n)/2) has mean n/p and variance m(1−m)/(p/2 + 1).
    let m = n as f64 / p as f64;
    let se = (m * (1.0 - m) / (p as f64 / 2.0 + 1.0) / draws as f64).sqrt();
    assert!((r.mean() - m).abs() < 5.0 * se, "mean {} vs {m}", r.mean());
    assert!(r.ks_statistic.unwrap() < ks_critical_01(draws));
}

#[test]
fn projection_reports_are_reproducible() {
    let a = projection_diag_check(4, 12, 300, 5).unwrap();
    let b = projection_diag_check(4, 12, 300, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.ks_statistic.unwrap().to_bits(), b.ks_statistic.unwrap().to_bits());
}

#[test]
fn extreme_eigenvalues_near_their_limits() {
    let r = eigen_concentration_check(100, 400, 100, 3).unwrap();
    assert!((r.sqrt_lambda_max.median() - 1.5).abs() < 0.05);
    assert!((r.sqrt_lambda_min.median() - 0.5).abs() < 0.05);

    let wide = eigen_concentration_check(10, 1000, 100, 4).unwrap();
    assert!((wide.sqrt_lambda_max.median() - 1.0).abs() < 0.15);
    assert!((wide.sqrt_lambda_min.median() - 1.0).abs() < 0.15);
}

#[test]
fn spurious_correlation_scale_and_ordering() {
    let c = (2.0 * 1000f64.ln() / 60.0).sqrt();
    let small = max_spurious_corr(60, 1000, 200, 8, SpuriousMode::Designated).unwrap();
    assert!(small.median() > 0.8 * c && small.median() < 1.2 * c, "median {} vs {c}", small.median());
    let large = max_spurious_corr(60, 5000, 200, 8, SpuriousMode::Designated).unwrap();
    assert!(large.median() > small.median());

    let tall = max_spurious_corr(100_000, 10, 50, 9, SpuriousMode::Designated).unwrap();
    assert!(tall.sample.iter().all(|&v| v <= 0.05));
}

#[test]
fn pairwise_mode_dominates_designated() {
    let designated = max_spurious_corr(30, 200, 100, 10, SpuriousMode::Designated).unwrap();
    let pairwise = max_spurious_corr(30, 200, 100, 10, SpuriousMode::Pairwise { cap: 1_000_000 }).unwrap();
    for (a, b) in designated.sample.iter().zip(&pairwise.sample) {
        assert!(b >= a);
    }
}
