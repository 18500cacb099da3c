//! Sample moments of the generators against their population values.

use ndarray::{Array1, Array2, Axis};
use sis_core::rng::{stream, Purpose};
use sis_core::simgen::{example_cov, gen_coefficients, generate, random_spd, spd_condition, Design, SimulationSpec};

fn sample_cov(x: &Array2<f64>) -> Array2<f64> {
    let n = x.nrows() as f64;
    let mean = x.mean_axis(Axis(0)).unwrap();
    let c = x - &mean;
    c.t().dot(&c) / (n - 1.0)
}

fn cov_with(x: &Array2<f64>, j: usize, y: &Array1<f64>) -> f64 {
    let col = x.column(j);
    let (mx, my) = (col.mean().unwrap(), y.mean().unwrap());
    col.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (y.len() as f64 - 1.0)
}

#[test]
fn example_designs_match_their_covariances() {
    let n = 40_000;
    // Five standard errors of a sample covariance between unit-variance variables.
    let tol = 5.0 * (2.0 / n as f64).sqrt();
    for design in [Design::Ex1, Design::Ex2, Design::Ex3] {
        for rho in [0.1, 0.5, 0.9] {
            let spec = SimulationSpec::example(design, n, 8, rho);
            let inst = generate(&spec, &mut stream(1, 0, Purpose::Test)).unwrap();
            let x = inst.data.x().to_owned();
            let s = sample_cov(&x);
            for i in 0..8 {
                for j in 0..8 {
                    let want = example_cov(design, rho, i, j);
                    assert!((s[[i, j]] - want).abs() < tol, "{design:?} rho={rho} ({i},{j}): {} vs {want}", s[[i, j]]);
                }
            }
            let y = inst.data.y().to_owned();
            let beta = &inst.truth.beta_true;
            if design != Design::Ex1 {
                // The fourth predictor carries no marginal signal.
                let c = cov_with(&x, 3, &y);
                let sd_y = y.std(1.0);
                assert!(c.abs() < 5.0 * sd_y / (n as f64).sqrt(), "{design:?} rho={rho}: cov(X4, Y) = {c}");
            }
            let var_y: f64 = (0..8)
                .flat_map(|i| (0..8).map(move |j| (i, j)))
                .map(|(i, j)| beta[i] * beta[j] * example_cov(design, rho, i, j))
                .sum::<f64>()
                + spec.sigma.powi(2);
            let got = y.var(1.0);
            assert!((got / var_y - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt(), "{design:?} rho={rho}: var(Y) {got} vs {var_y}");
        }
    }
}

#[test]
fn coefficient_signs_and_floor() {
    let (p, s, a) = (50, 10, 1.5);
    let mut negatives = 0;
    let draws = 2000;
    for k in 0..draws {
        let beta = gen_coefficients(p, s, a, &mut stream(2, k, Purpose::Test));
        let nonzero: Vec<f64> = beta.iter().copied().filter(|v| *v != 0.0).collect();
        assert_eq!(nonzero.len(), s);
        assert!(nonzero.iter().all(|v| v.abs() >= a));
        negatives += nonzero.iter().filter(|v| **v < 0.0).count();
    }
    let total = (draws as usize * s) as f64;
    let frac = negatives as f64 / total;
    assert!((frac - 0.4).abs() < 5.0 * (0.24 / total).sqrt(), "negative fraction {frac}");
}

#[test]
fn sim2_block_and_linkage_covariances() {
    let (n, p, s) = (40_000, 14, 4);
    let spec = SimulationSpec::sim2(n, p, s, 1.0);
    let inst = generate(&spec, &mut stream(3, 0, Purpose::Test)).unwrap();
    let x = inst.data.x().to_owned();
    let cov = sample_cov(&x);
    let (r, cond) = (spec.r_resolved(), spec.cond_resolved());
    // Leading block A, then X_{s+i} = Z + r X_i and the rest Z + (1 − r) X_1.
    let a = cov.slice(ndarray::s![..s, ..s]).to_owned();
    let big = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tol = 6.0 * big * (2.0 / n as f64).sqrt();
    for i in 0..s {
        let want_var = 1.0 + r * r * a[[i, i]];
        assert!((cov[[s + i, s + i]] / want_var - 1.0).abs() < 0.05);
        for j in 0..s {
            assert!((cov[[s + i, j]] - r * a[[i, j]]).abs() < tol);
        }
    }
    for i in 2 * s..p {
        assert!((cov[[i, 0]] - (1.0 - r) * a[[0, 0]]).abs() < tol);
        assert!((cov[[i, i]] - (1.0 + (1.0 - r).powi(2) * a[[0, 0]])).abs() < tol + 0.05);
    }
    let truth: Vec<usize> = (0..s).collect();
    assert_eq!(inst.truth.true_model, truth);

    let (spd, _) = random_spd(6, cond, &mut stream(3, 1, Purpose::Test));
    assert!((spd_condition(&spd) - cond).abs() < 1e-8 * cond);
}

#[test]
fn twoclass_means_differ_by_the_gap() {
    let mut spec = SimulationSpec::example(Design::Twoclass, 20_000, 5, 0.0);
    spec.n2 = Some(10_000);
    spec.s = 2;
    spec.gap = 0.8;
    let inst = generate(&spec, &mut stream(4, 0, Purpose::Test)).unwrap();
    let x = inst.data.x();
    let top = x.slice(ndarray::s![..10_000, ..]).mean_axis(Axis(0)).unwrap();
    let bottom = x.slice(ndarray::s![10_000.., ..]).mean_axis(Axis(0)).unwrap();
    let tol = 5.0 * (2.0 / 10_000.0f64).sqrt();
    for j in 0..5 {
        let want = if j < 2 { 0.8 } else { 0.0 };
        assert!((top[j] - bottom[j] - want).abs() < tol, "feature {j}");
    }
}
