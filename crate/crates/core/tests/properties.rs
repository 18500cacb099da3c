//! Property tests over randomly generated inputs.

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::Rng;
use sis_core::dantzig::{dantzig_select, DantzigConfig};
use sis_core::rng::{stream, Purpose};
use sis_core::penalized::{penalty_deriv, penalty_value, weighted_lasso_cd, PenaltySpec, SolverConfig};
use sis_core::screening::{sis_screen, top_k_by_magnitude};
use sis_core::{ols_fit, standardize, Dataset};

fn matrix(n: usize, p: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-3.0..3.0f64, n * p).prop_map(move |v| Array2::from_shape_vec((n, p), v).unwrap())
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (5usize..15, 2usize..12).prop_flat_map(|(n, p)| {
        (matrix(n, p), prop::collection::vec(-3.0..3.0f64, n))
            .prop_map(|(x, y)| Dataset::new(x, Array1::from(y)).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn standardized_columns_are_centred_and_unit(data in dataset()) {
        let sd = standardize(&data);
        let n = sd.n() as f64;
        for (j, col) in sd.z.columns().into_iter().enumerate() {
            if sd.constant_cols.contains(&j) {
                prop_assert!(col.iter().all(|v| *v == 0.0));
                continue;
            }
            prop_assert!(col.sum().abs() < 1e-9);
            prop_assert!((col.dot(&col) / (n - 1.0) - 1.0).abs() < 1e-9);
        }
        let back = sd.reconstruct();
        for (a, b) in back.iter().zip(data.x().iter()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn sis_selection_is_a_prefix_of_the_ranking(data in dataset(), frac in 0.0..1.0f64) {
        let sd = standardize(&data);
        let d = 1 + ((sd.p() - 1) as f64 * frac) as usize;
        let res = sis_screen(&sd, d).unwrap();
        let mut perm = res.ranking.clone();
        perm.sort_unstable();
        prop_assert_eq!(perm, (0..sd.p()).collect::<Vec<_>>());
        let mut head = res.ranking[..d].to_vec();
        head.sort_unstable();
        prop_assert_eq!(&head, &res.selected);
        let live: Vec<f64> = res.ranking.iter()
            .filter(|j| !sd.constant_cols.contains(j))
            .map(|&j| res.omega[j].abs())
            .collect();
        prop_assert!(live.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn top_k_is_ordered_by_magnitude(v in prop::collection::vec(-5.0..5.0f64, 1..30), k in 0usize..30) {
        let k = k.min(v.len());
        let top = top_k_by_magnitude(&v, k).unwrap();
        prop_assert_eq!(top.len(), k);
        prop_assert!(top.windows(2).all(|w| v[w[0]].abs() >= v[w[1]].abs()));
        if let Some(&last) = top.last() {
            let rest = (0..v.len()).filter(|j| !top.contains(j));
            for j in rest {
                prop_assert!(v[j].abs() <= v[last].abs());
            }
        }
    }

    #[test]
    fn scad_derivative_is_monotone_and_bounded(lam in 0.01..3.0f64, a in 2.1..6.0f64, t in 0.0..20.0f64, dt in 0.0..2.0f64) {
        let spec = PenaltySpec { a, ..PenaltySpec::scad(lam) };
        let d1 = penalty_deriv(&spec, t).unwrap();
        let d2 = penalty_deriv(&spec, t + dt).unwrap();
        prop_assert!(d1 >= d2 - 1e-15);
        prop_assert!((0.0..=lam).contains(&d1));
        let v1 = penalty_value(&spec, t).unwrap();
        let v2 = penalty_value(&spec, t + dt).unwrap();
        prop_assert!(v2 - v1 <= d1 * dt + 1e-12);
        prop_assert!(v2 - v1 >= d2 * dt - 1e-12);
    }

    #[test]
    fn lasso_solution_beats_nearby_points(data in dataset(), lam in 0.01..1.0f64, seed in any::<u64>()) {
        let sd = standardize(&data);
        let (n, d) = (sd.n() as f64, sd.p());
        let w = vec![lam; d];
        let cfg = SolverConfig { tol: 1e-12, max_inner: 100_000, ..SolverConfig::default() };
        let est = weighted_lasso_cd(sd.z.view(), sd.y_centered.view(), &w, &cfg).unwrap();
        let f = |b: &Array1<f64>| {
            let r = &sd.y_centered - &sd.z.dot(b);
            r.dot(&r) / (2.0 * n) + lam * b.iter().map(|v| v.abs()).sum::<f64>()
        };
        let best = Array1::from(est.beta.to_vec());
        let f0 = f(&best);
        let mut rng = stream(seed, 0, Purpose::Test);
        for _ in 0..20 {
            let step = Array1::from_shape_fn(d, |_| rng.random_range(-1e-3..1e-3));
            prop_assert!(f(&(&best + &step)) >= f0 - 1e-10);
        }
    }

    #[test]
    fn dantzig_is_no_longer_than_least_squares(n in 8usize..14, d in 1usize..5, vals in prop::collection::vec(-2.0..2.0f64, 14 * 5 + 14)) {
        let z = Array2::from_shape_vec((n, d), vals[..n * d].to_vec()).unwrap();
        let y = Array1::from(vals[70..70 + n].to_vec());
        let Ok(ls) = ols_fit(z.view(), y.view()) else { return Ok(()) };
        let est = dantzig_select(z.view(), y.view(), &DantzigConfig::new(0.5)).unwrap();
        let l1_ds: f64 = est.beta.iter().map(|v| v.abs()).sum();
        let l1_ls: f64 = ls.iter().map(|v| v.abs()).sum();
        prop_assert!(l1_ds <= l1_ls + 1e-8);
    }

    #[test]
    fn csv_round_trip_is_exact(data in dataset()) {
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.x(), data.x());
        prop_assert_eq!(back.y(), data.y());
    }
}
