//! Dantzig selector checked against brute-force vertex enumeration.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use sis_core::dantzig::{build_dantzig_lp, build_dantzig_lp_compact, correlation_residual, dantzig_select, DantzigConfig};
use sis_core::lp::{simplex_solve, Pricing, SimplexOptions};
use sis_core::rng::{stream, Purpose, StreamRng};

fn gaussian(rng: &mut StreamRng, n: usize, p: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, p), || StandardNormal.sample(rng))
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if m < k {
        return vec![];
    }
    let mut out = combinations(m - 1, k);
    for mut c in combinations(m - 1, k - 1) {
        c.push(m - 1);
        out.push(c);
    }
    out
}

/// Minimum of `‖ζ‖₁` over `|G ζ − c| ≤ bound` by enumerating every point where
/// `d` of the hyperplanes `ζ_j = 0` and `(Gζ)_i = c_i ± bound` meet.
fn enumerate_min_l1(g: &DMatrix<f64>, c: &DVector<f64>, bound: f64) -> f64 {
    let d = g.nrows();
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for j in 0..d {
        let mut e = DVector::zeros(d);
        e[j] = 1.0;
        rows.push((e, 0.0));
    }
    for i in 0..d {
        rows.push((g.row(i).transpose(), c[i] + bound));
        rows.push((g.row(i).transpose(), c[i] - bound));
    }
    let mut best = f64::INFINITY;
    for pick in combinations(rows.len(), d) {
        let a = DMatrix::from_fn(d, d, |r, k| rows[pick[r]].0[k]);
        let b = DVector::from_iterator(d, pick.iter().map(|&r| rows[r].1));
        let Some(zeta) = a.clone().lu().solve(&b) else { continue };
        if (&a * &zeta - &b).amax() > 1e-9 {
            continue;
        }
        let slack = (g * &zeta - c).amax();
        if slack <= bound + 1e-9 {
            best = best.min(zeta.lp_norm(1));
        }
    }
    best
}

struct Instance {
    z: Array2<f64>,
    y: Array1<f64>,
    cfg: DantzigConfig,
}

fn instance(k: u64) -> Instance {
    let mut rng = stream(500, k, Purpose::Test);
    let d = rng.random_range(1..=4);
    let n = rng.random_range(d + 3..12);
    let z = gaussian(&mut rng, n, d);
    let beta = Array1::from_shape_simple_fn(d, || rng.random_range(-3.0..3.0));
    let noise: Array1<f64> = Array1::from_shape_simple_fn(n, || StandardNormal.sample(&mut rng));
    let y = z.dot(&beta) + noise;
    let cfg = DantzigConfig::new(rng.random_range(0.2..1.0));
    Instance { z, y, cfg }
}

#[test]
fn lp_forms_and_selector_match_vertex_enumeration() {
    let mut nontrivial = 0;
    for k in 0..20 {
        let Instance { z, y, cfg } = instance(k);
        let d = z.ncols();
        let g = DMatrix::from_fn(d, d, |i, j| z.column(i).dot(&z.column(j)));
        let c = DVector::from_iterator(d, z.t().dot(&y).iter().copied());
        let bound = cfg.lambda_for(d) * cfg.sigma;
        let want = enumerate_min_l1(&g, &c, bound);
        assert!(want.is_finite());
        if want > 1e-6 {
            nontrivial += 1;
        }

        for pricing in [Pricing::Bland, Pricing::Dantzig] {
            let opts = SimplexOptions { pricing, ..SimplexOptions::default() };
            let full = simplex_solve(&build_dantzig_lp(z.view(), y.view(), &cfg).unwrap(), &opts).unwrap();
            let compact = simplex_solve(&build_dantzig_lp_compact(z.view(), y.view(), &cfg).unwrap(), &opts).unwrap();
            assert!((full.objective - want).abs() < 1e-6, "instance {k}: full form {} vs {want}", full.objective);
            assert!((compact.objective - want).abs() < 1e-6, "instance {k}: compact form {} vs {want}", compact.objective);
        }

        let est = dantzig_select(z.view(), y.view(), &cfg).unwrap();
        let l1: f64 = est.beta.iter().map(|v| v.abs()).sum();
        assert!((l1 - want).abs() < 1e-6, "instance {k}: selector {l1} vs {want}");
        let beta = Array1::from(est.beta.to_vec());
        assert!(correlation_residual(z.view(), y.view(), beta.view()) <= bound + 1e-6);
    }
    assert!(nontrivial >= 10, "only {nontrivial} instances had a nonzero solution");
}

#[test]
fn selector_is_scale_equivariant() {
    for k in 0..10 {
        let Instance { z, y, cfg } = instance(100 + k);
        let base = dantzig_select(z.view(), y.view(), &cfg).unwrap();
        let c = 3.5;
        let scaled_cfg = DantzigConfig { sigma: cfg.sigma * c, ..cfg };
        let scaled = dantzig_select(z.view(), (&y * c).view(), &scaled_cfg).unwrap();
        for (a, b) in base.beta.iter().zip(scaled.beta.iter()) {
            assert!((a * c - b).abs() < 1e-7 * (1.0 + b.abs()), "instance {k}");
        }
    }
}
