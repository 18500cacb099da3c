//! Screening procedures checked against direct computations.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use sis_core::pipelines::{sis_scad_inner, PipelineName, PipelineSpec};
use sis_core::rng::{stream, Purpose, StreamRng};
use sis_core::screening::{classif_screen, isis_select, itrrs_screen, sis_screen, IsisConfig, ItrrsConfig, RidgeLambda};
use sis_core::simgen::{generate, SimulationSpec};
use sis_core::theory::min_model_size_to_cover;
use sis_core::{standardize, Dataset, StandardizedDesign};

fn gaussian(rng: &mut StreamRng, n: usize, p: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, p), || StandardNormal.sample(rng))
}

fn max_union_correlation(sd: &StandardizedDesign, union: &[usize], r: &Array1<f64>) -> f64 {
    union.iter().map(|&j| sd.z.column(j).dot(r).abs()).fold(0.0, f64::max)
}

#[test]
fn itrrs_without_ridge_reproduces_sis() {
    for k in 0..50 {
        let mut rng = stream(600, k, Purpose::Test);
        let n = rng.random_range(20..60);
        let p = rng.random_range(n + 1..6 * n);
        let x = gaussian(&mut rng, n, p);
        let y = Array1::from_shape_simple_fn(n, || StandardNormal.sample(&mut rng)) + x.column(0);
        let sd = standardize(&Dataset::new(x, y).unwrap());
        let d_final = rng.random_range(1..n);
        let delta = rng.random_range(0.3..0.9);
        let out = itrrs_screen(&sd, &ItrrsConfig { lambda: RidgeLambda::Infinite, delta, d_final }).unwrap();
        let sis = sis_screen(&sd, out.result.d).unwrap();
        assert!(out.result.d <= d_final);
        assert_eq!(out.result.ranking, sis.ranking, "instance {k}");
        assert_eq!(out.result.selected, sis.selected, "instance {k}");
    }
}

fn isis_with_scad(sd: &StandardizedDesign, d_total: usize, inner_d: usize) -> sis_core::screening::IsisOutcome {
    let spec = PipelineSpec::new(PipelineName::IsisScad);
    let cfg = IsisConfig { d_total, inner_d, max_steps: 10 };
    isis_select(sd, &cfg, |sub, k| sis_scad_inner(sub, k, &spec)).unwrap()
}

#[test]
fn isis_residuals_are_orthogonal_to_the_union() {
    for k in 0..20 {
        let mut rng = stream(700, k, Purpose::Test);
        let n = rng.random_range(40..80);
        let p = rng.random_range(50..200);
        let x = gaussian(&mut rng, n, p);
        let mut y: Array1<f64> = Array1::from_shape_simple_fn(n, || StandardNormal.sample(&mut rng));
        for j in 0..4 {
            y.scaled_add(rng.random_range(1.0..3.0), &x.column(j));
        }
        let sd = standardize(&Dataset::new(x, y).unwrap());
        let out = isis_with_scad(&sd, n / 3, 6);
        let worst = max_union_correlation(&sd, &out.union, &out.final_residual);
        assert!(worst <= 1e-8 * n as f64, "instance {k}: {worst}");
        for &c in &out.residual_correlation {
            assert!(c <= 1e-8 * n as f64);
        }
        assert!(out.union.len() <= n / 3);
    }
}

/// `X4 = (X1 + X2 + X3)/c + e` with `y = 5(X1 + X2 + X3) − b X4` and `b`
/// chosen so that `y` has zero sample covariance with `X4`.
fn hidden_fourth_instance(seed: u64) -> Dataset {
    let mut rng = stream(800, seed, Purpose::Test);
    let (n, p) = (60, 20);
    let mut x = gaussian(&mut rng, n, p);
    let sum = &x.column(0) + &x.column(1) + &x.column(2);
    let x4 = &sum / 3f64.sqrt() + &x.column(3) * 0.5;
    x.column_mut(3).assign(&x4);
    let c4 = &x4 - x4.mean().unwrap();
    let s5 = &sum * 5.0;
    let cs = &s5 - s5.mean().unwrap();
    let b = c4.dot(&cs) / c4.dot(&c4);
    let y = &s5 - &(&x4 * b);
    Dataset::new(x, y).unwrap()
}

#[test]
fn hidden_fourth_variable_needs_iteration() {
    for seed in 0..5 {
        let data = hidden_fourth_instance(seed);
        let sd = standardize(&data);
        assert!(sd.z.column(3).dot(&sd.y_centered).abs() < 1e-9);
        let sis = sis_screen(&sd, sd.p()).unwrap();
        assert_eq!(*sis.ranking.last().unwrap(), 3, "instance {seed}: SIS should rank X4 last");

        let out = isis_with_scad(&sd, 8, 4);
        for j in 0..4 {
            assert!(out.union.contains(&j), "instance {seed}: union {:?} misses {j}", out.union);
        }
        let worst = max_union_correlation(&sd, &out.union, &out.final_residual);
        assert!(worst <= 1e-8 * sd.n() as f64);
    }
}

/// Ranking of `|t_j|` for the pooled two-sample t-statistic on raw columns.
fn t_statistic_ranking(x: &Array2<f64>, labels: &Array1<f64>) -> Vec<usize> {
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] > 0.0).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] < 0.0).collect();
    let (n1, n2) = (pos.len() as f64, neg.len() as f64);
    let t: Vec<f64> = x
        .axis_iter(Axis(1))
        .map(|col| {
            let a = col.select(Axis(0), &pos);
            let b = col.select(Axis(0), &neg);
            let (ma, mb) = (a.mean().unwrap(), b.mean().unwrap());
            let ss = a.mapv(|v| (v - ma).powi(2)).sum() + b.mapv(|v| (v - mb).powi(2)).sum();
            let sp = (ss / (n1 + n2 - 2.0)).sqrt();
            (ma - mb) / (sp * (1.0 / n1 + 1.0 / n2).sqrt())
        })
        .collect();
    let mut idx: Vec<usize> = (0..t.len()).collect();
    idx.sort_by(|&i, &j| t[j].abs().total_cmp(&t[i].abs()).then(i.cmp(&j)));
    idx
}

#[test]
fn balanced_classification_screen_ranks_like_t_statistics() {
    for k in 0..10 {
        let mut rng = stream(900, k, Purpose::Test);
        let (n, p) = (20, 10);
        let mut x = gaussian(&mut rng, n, p);
        let labels = Array1::from_iter((0..n).map(|i| if i < n / 2 { 1.0 } else { -1.0 }));
        for j in 0..3 {
            for i in 0..n / 2 {
                x[[i, j]] += 0.5 * (j + 1) as f64;
            }
        }
        let sd = standardize(&Dataset::new(x.clone(), labels.clone()).unwrap());
        let got = classif_screen(&sd, labels.view(), p).unwrap();
        assert_eq!(got.ranking, t_statistic_ranking(&x, &labels), "instance {k}");
    }
}

#[test]
fn min_model_size_is_first_covering_screen() {
    for k in 0..10 {
        let spec = SimulationSpec::sim1(60, 150, 4, 1.0);
        let inst = generate(&spec, &mut stream(1000, k, Purpose::Test)).unwrap();
        let sd = standardize(&inst.data);
        let truth = &inst.truth.true_model;
        let first = (1..=sd.p())
            .find(|&d| {
                let sel = sis_screen(&sd, d).unwrap().selected;
                truth.iter().all(|j| sel.contains(j))
            })
            .unwrap();
        assert_eq!(min_model_size_to_cover(&inst).unwrap(), first, "instance {k}");
    }
}

#[test]
fn single_true_variable_ranked_seventeenth() {
    let mut rng = stream(1100, 0, Purpose::Test);
    let (n, p) = (40, 30);
    let mut x = gaussian(&mut rng, n, p);
    // Put sixteen columns ahead of column 0 by making them stronger copies of y.
    let y: Array1<f64> = Array1::from_shape_simple_fn(n, || StandardNormal.sample(&mut rng));
    let col0 = &y + &x.column(0);
    x.column_mut(0).assign(&col0);
    for j in 1..17 {
        let col = &y * (2.0 + j as f64) + &x.column(j);
        x.column_mut(j).assign(&col);
    }
    let data = Dataset::new(x, y).unwrap();
    let sd = standardize(&data);
    let rank0 = sis_screen(&sd, p).unwrap().ranking.iter().position(|&j| j == 0).unwrap() + 1;
    let mut beta = vec![0.0; p];
    beta[0] = 1.0;
    let spec = SimulationSpec::sim1(n, p, 1, 1.0);
    let inst = sis_core::simgen::GeneratedInstance {
        data,
        truth: sis_core::GroundTruth::new(beta, 1.0),
        sigma_used: 1.0,
        design_echo: spec,
    };
    assert_eq!(rank0, 17);
    assert_eq!(min_model_size_to_cover(&inst).unwrap(), 17);
}
