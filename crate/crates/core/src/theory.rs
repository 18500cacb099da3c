//! Monte Carlo checks of random-matrix facts behind screening.

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Error, Result};
use crate::linalg::cholesky_solve;
use crate::model::standardize;
use crate::rng::{stream, Purpose};
use crate::screening::sis_rank;
use crate::simgen::GeneratedInstance;

/// Empirical distribution of a Monte Carlo statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    /// Sorted ascending.
    pub sample: Vec<f64>,
    pub reference: String,
    /// Kolmogorov–Smirnov distance to the reference, when it is a distribution.
    pub ks_statistic: Option<f64>,
    pub n_draws: usize,
    /// Draws discarded and redrawn because a matrix was singular.
    pub redraws: usize,
}

impl DistributionReport {
    fn new(mut sample: Vec<f64>, reference: String) -> Self {
        sample.sort_by(f64::total_cmp);
        let n_draws = sample.len();
        Self { sample, reference, ks_statistic: None, n_draws, redraws: 0 }
    }

    pub fn median(&self) -> f64 {
        median_sorted(&self.sample)
    }

    pub fn mean(&self) -> f64 {
        self.sample.iter().sum::<f64>() / self.sample.len() as f64
    }

    /// Fraction of draws `≤ x`.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.sample.partition_point(|&v| v <= x) as f64 / self.sample.len() as f64
    }
}

pub(crate) fn median_sorted(v: &[f64]) -> f64 {
    let m = v.len();
    if m == 0 {
        return f64::NAN;
    }
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// `sup_x |F_n(x) − F(x)|` for a sorted sample.
pub fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let m = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0, |acc: f64, (i, &x)| {
        let f = cdf(x);
        acc.max(((i + 1) as f64 / m - f).abs()).max((f - i as f64 / m).abs())
    })
}

/// Critical value `1.63 / sqrt(m)` of the KS statistic at α = 0.01.
pub fn ks_critical_01(m: usize) -> f64 {
    1.63 / (m as f64).sqrt()
}

fn gaussian<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, p), || StandardNormal.sample(rng))
}

const MAX_REDRAWS: usize = 100;

/// Distribution of the (1,1) entry of the projection `Zᵀ(ZZᵀ)⁻¹Z` for
/// Gaussian `n × p` matrices, compared with `Beta(n/2, (p−n)/2)`.
pub fn projection_diag_check(n: usize, p: usize, n_draws: usize, seed: u64) -> Result<DistributionReport> {
    if !(p > n && n >= 1) {
        return Err(Error::Config(format!("need p > n >= 1, got n = {n}, p = {p}")));
    }
    if n_draws == 0 {
        return Err(Error::EmptySample);
    }
    let draws: Vec<(f64, usize)> = (0..n_draws)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k as u64, Purpose::Theory);
            for attempt in 0..=MAX_REDRAWS {
                let z = gaussian(n, p, &mut rng);
                let gram = z.dot(&z.t());
                let e1 = z.column(0).to_owned();
                if let Some(sol) = cholesky_solve(gram, e1.view()) {
                    return Ok((e1.dot(&sol), attempt));
                }
            }
            Err(Error::SingularDraw(k))
        })
        .collect::<Result<_>>()?;
    let redraws = draws.iter().map(|d| d.1).sum();
    let mut report = DistributionReport::new(
        draws.into_iter().map(|d| d.0).collect(),
        format!("Beta({}, {})", n as f64 / 2.0, (p - n) as f64 / 2.0),
    );
    let beta = Beta::new(n as f64 / 2.0, (p - n) as f64 / 2.0)
        .map_err(|e| Error::Config(format!("invalid Beta parameters: {e}")))?;
    report.ks_statistic = Some(ks_statistic(&report.sample, |x| beta.cdf(x)));
    report.redraws = redraws;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub sqrt_lambda_max: DistributionReport,
    pub sqrt_lambda_min: DistributionReport,
    /// `1 + γ^{-1/2}` with `γ = p/n`.
    pub limit_max: f64,
    /// `1 − γ^{-1/2}`.
    pub limit_min: f64,
}

/// Extreme eigenvalues of `p⁻¹ZZᵀ` for Gaussian `n × p` matrices.
pub fn eigen_concentration_check(n: usize, p: usize, n_draws: usize, seed: u64) -> Result<EigenReport> {
    if !(p > n && n >= 1) {
        return Err(Error::Config(format!("need p > n >= 1, got n = {n}, p = {p}")));
    }
    if n_draws == 0 {
        return Err(Error::EmptySample);
    }
    let pairs: Vec<(f64, f64)> = (0..n_draws)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k as u64, Purpose::Theory);
            let z = gaussian(n, p, &mut rng);
            let m = z.dot(&z.t()) / p as f64;
            let ev = DMatrix::from_fn(n, n, |i, j| m[[i, j]]).symmetric_eigenvalues();
            (ev.max().max(0.0).sqrt(), ev.min().max(0.0).sqrt())
        })
        .collect();
    let g = (p as f64 / n as f64).sqrt().recip();
    Ok(EigenReport {
        sqrt_lambda_max: DistributionReport::new(
            pairs.iter().map(|q| q.0).collect(),
            format!("limit {}", 1.0 + g),
        ),
        sqrt_lambda_min: DistributionReport::new(
            pairs.iter().map(|q| q.1).collect(),
            format!("limit {}", 1.0 - g),
        ),
        limit_max: 1.0 + g,
        limit_min: 1.0 - g,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpuriousMode {
    /// Max over `j ≥ 2` of `|corr(X_j, X_1)|`.
    #[default]
    Designated,
    /// Max over pairs `j < k`; at most `cap` pairs, subsampled uniformly when
    /// there are more.
    Pairwise { cap: usize },
}

/// Maximum absolute sample correlation in i.i.d. Gaussian designs.
pub fn max_spurious_corr(
    n: usize,
    p: usize,
    n_draws: usize,
    seed: u64,
    mode: SpuriousMode,
) -> Result<DistributionReport> {
    if p < 2 || n < 3 {
        return Err(Error::Config(format!("need p >= 2 and n >= 3, got n = {n}, p = {p}")));
    }
    if n_draws == 0 {
        return Err(Error::EmptySample);
    }
    let sample: Vec<f64> = (0..n_draws)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k as u64, Purpose::Theory);
            let mut x = gaussian(n, p, &mut rng);
            for mut col in x.columns_mut() {
                let m = col.mean().unwrap();
                col.mapv_inplace(|v| v - m);
                let s = col.dot(&col).sqrt();
                col.mapv_inplace(|v| v / s);
            }
            match mode {
                SpuriousMode::Designated => {
                    let c = x.t().dot(&x.column(0));
                    c.iter().skip(1).fold(0.0_f64, |m, v| m.max(v.abs()))
                }
                SpuriousMode::Pairwise { cap } => {
                    let total = p * (p - 1) / 2;
                    if total <= cap {
                        let c = x.t().dot(&x);
                        let mut m = 0.0_f64;
                        for j in 0..p {
                            for l in j + 1..p {
                                m = m.max(c[[j, l]].abs());
                            }
                        }
                        m
                    } else {
                        (0..cap).fold(0.0_f64, |m, _| {
                            let j = rng.random_range(0..p);
                            let mut l = rng.random_range(0..p - 1);
                            if l >= j {
                                l += 1;
                            }
                            m.max(x.column(j).dot(&x.column(l)).abs())
                        })
                    }
                }
            }
        })
        .collect();
    Ok(DistributionReport::new(sample, format!("approx {:.4}", (2.0 * (p as f64).ln() / n as f64).sqrt())))
}

/// Smallest SIS size whose selection contains every true variable, i.e. the
/// worst 1-based SIS rank among the true variables.
pub fn min_model_size_to_cover(instance: &GeneratedInstance) -> Result<usize> {
    let truth = &instance.truth.true_model;
    if truth.is_empty() {
        return Err(Error::EmptySample);
    }
    let ranking = sis_rank(&standardize(&instance.data));
    Ok(truth.iter().map(|&j| ranking.rank_of(j).expect("every column is ranked")).max().unwrap())
}
