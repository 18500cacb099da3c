//! Seeded generators for the synthetic regression and classification designs.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, GroundTruth};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Design {
    /// Independent standard Gaussian predictors, random sparse coefficients.
    Sim1,
    /// Correlated predictors built around a random SPD block.
    Sim2,
    /// Equicorrelated predictors, `y = 5x₁ + 5x₂ + 5x₃ + ε`.
    Ex1,
    /// Ex1 plus a common-factor predictor with zero marginal covariance with `y`.
    Ex2,
    /// Ex2 plus an independent weak predictor.
    Ex3,
    /// Two Gaussian classes with a mean shift on the leading features.
    Twoclass,
    /// Pure Gaussian design without signal.
    IidCorr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub design: Design,
    pub n: usize,
    pub p: usize,
    #[serde(default)]
    pub s: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Coefficient floor; defaults to `4 ln n / sqrt(n)`.
    #[serde(default)]
    pub a_coef: Option<f64>,
    #[serde(default)]
    pub rho: f64,
    /// Sim2 linkage; defaults to `1 − 4 ln n / p`.
    #[serde(default)]
    pub r: Option<f64>,
    /// Sim2 condition number; defaults to `sqrt(n) / ln n`.
    #[serde(default)]
    pub cond: Option<f64>,
    /// Twoclass: size of the second class (the first has `n − n2`).
    #[serde(default)]
    pub n2: Option<usize>,
    /// Twoclass mean shift.
    #[serde(default)]
    pub gap: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_sigma() -> f64 {
    1.0
}

impl SimulationSpec {
    pub fn sim1(n: usize, p: usize, s: usize, sigma: f64) -> Self {
        Self {
            design: Design::Sim1,
            n,
            p,
            s,
            sigma,
            a_coef: None,
            rho: 0.0,
            r: None,
            cond: None,
            n2: None,
            gap: 0.0,
            seed: 0,
        }
    }

    pub fn sim2(n: usize, p: usize, s: usize, sigma: f64) -> Self {
        Self { design: Design::Sim2, ..Self::sim1(n, p, s, sigma) }
    }

    pub fn example(design: Design, n: usize, p: usize, rho: f64) -> Self {
        let s = match design {
            Design::Ex1 => 3,
            Design::Ex2 => 4,
            Design::Ex3 => 5,
            _ => 0,
        };
        Self { design, rho, ..Self::sim1(n, p, s, 1.0) }
    }

    pub fn a_coef_resolved(&self) -> f64 {
        let n = self.n as f64;
        self.a_coef.unwrap_or(4.0 * n.ln() / n.sqrt())
    }

    pub fn r_resolved(&self) -> f64 {
        self.r.unwrap_or(1.0 - 4.0 * (self.n as f64).ln() / self.p as f64)
    }

    pub fn cond_resolved(&self) -> f64 {
        let n = self.n as f64;
        self.cond.unwrap_or(n.sqrt() / n.ln())
    }

    /// Copy with every defaulted parameter written out.
    pub fn resolved(&self) -> Self {
        let mut s = self.clone();
        match s.design {
            Design::Sim1 => s.a_coef = Some(self.a_coef_resolved()),
            Design::Sim2 => {
                s.a_coef = Some(self.a_coef_resolved());
                s.r = Some(self.r_resolved());
                s.cond = Some(self.cond_resolved());
            }
            _ => {}
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("n must be >= 2, got {}", self.n)));
        }
        if self.p < 1 || self.s > self.p {
            return Err(Error::Config(format!("need p >= s, got p = {}, s = {}", self.p, self.s)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho must lie in [0,1), got {}", self.rho)));
        }
        match self.design {
            Design::Sim1 | Design::Sim2 if self.s < 1 => {
                Err(Error::Config("sparse designs need s >= 1".into()))
            }
            Design::Sim2 if 2 * self.s >= self.p => {
                Err(Error::Config("Sim2 needs 2s < p".into()))
            }
            Design::Sim2 if !(self.cond_resolved() >= 1.0) => {
                Err(Error::Config("Sim2 condition number must be >= 1".into()))
            }
            Design::Ex1 | Design::Ex2 | Design::Ex3 => {
                let need = match self.design {
                    Design::Ex1 => 3,
                    Design::Ex2 => 4,
                    _ => 5,
                };
                if self.p < need || self.s != need {
                    return Err(Error::Config(format!("design needs p >= {need} and s = {need}")));
                }
                if self.design != Design::Ex1 && self.rho == 0.0 {
                    return Err(Error::BadRho(self.rho));
                }
                Ok(())
            }
            Design::Twoclass => match self.n2 {
                Some(n2) if n2 >= 2 && self.n >= n2 + 2 => Ok(()),
                _ => Err(Error::Config("Twoclass needs n2 >= 2 and n - n2 >= 2".into())),
            },
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedInstance {
    pub data: Dataset,
    pub truth: GroundTruth,
    pub sigma_used: f64,
    /// A copy with defaults resolved (coefficient floor, linkage, condition number).
    pub design_echo: SimulationSpec,
}

impl GeneratedInstance {
    /// Writes `<stem>.csv` (dataset) and `<stem>_truth.csv` (index, beta_true).
    pub fn export(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.data.save_csv(&dir.join(format!("{stem}.csv")))?;
        self.truth.write_csv(std::fs::File::create(dir.join(format!("{stem}_truth.csv")))?)?;
        Ok(())
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian_matrix<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, p), || normal(rng))
}

/// `s` nonzeros at uniformly drawn positions, each `(−1)^u (a + |z|)` with
/// `u ~ Bernoulli(0.4)` and `z` standard Gaussian.
pub fn gen_coefficients<R: Rng + ?Sized>(p: usize, s: usize, a_coef: f64, rng: &mut R) -> Vec<f64> {
    let mut positions = sample(rng, p, s).into_vec();
    positions.sort_unstable();
    let mut beta = vec![0.0; p];
    fill_coefficients(&mut beta, &positions, a_coef, rng);
    beta
}

fn fill_coefficients<R: Rng + ?Sized>(beta: &mut [f64], positions: &[usize], a_coef: f64, rng: &mut R) {
    let flip = Bernoulli::new(0.4).unwrap();
    for &j in positions {
        let negative = flip.sample(rng);
        let mag = a_coef + normal(rng).abs();
        beta[j] = if negative { -mag } else { mag };
    }
}

fn respond<R: Rng + ?Sized>(x: &Array2<f64>, beta: &[f64], sigma: f64, rng: &mut R) -> Array1<f64> {
    let b = Array1::from(beta.to_vec());
    let mut y = x.dot(&b);
    if sigma > 0.0 {
        y.mapv_inplace(|v| v + sigma * normal(rng));
    }
    y
}

pub fn gen_sim1<R: Rng + ?Sized>(spec: &SimulationSpec, rng: &mut R) -> Result<GeneratedInstance> {
    spec.validate()?;
    if spec.design != Design::Sim1 {
        return Err(Error::Config("gen_sim1 called with a different design".into()));
    }
    let x = gaussian_matrix(spec.n, spec.p, rng);
    let beta = gen_coefficients(spec.p, spec.s, spec.a_coef_resolved(), rng);
    let y = respond(&x, &beta, spec.sigma, rng);
    Ok(GeneratedInstance {
        data: Dataset::new(x, y)?,
        truth: GroundTruth::new(beta, spec.sigma),
        sigma_used: spec.sigma,
        design_echo: spec.resolved(),
    })
}

/// Random orthogonal matrix from Gram–Schmidt on a Gaussian matrix.
fn random_orthogonal<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Array2<f64> {
    let mut q = gaussian_matrix(k, k, rng);
    for j in 0..k {
        for i in 0..j {
            let proj = q.column(i).dot(&q.column(j));
            let qi = q.column(i).to_owned();
            q.column_mut(j).scaled_add(-proj, &qi);
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        q.column_mut(j).mapv_inplace(|v| v / norm);
    }
    q
}

/// SPD matrix `Q diag(λ) Qᵀ` with eigenvalues log-spaced on `[1, cond]`,
/// returned with its square-root factor `Q diag(sqrt λ)`.
pub fn random_spd<R: Rng + ?Sized>(k: usize, cond: f64, rng: &mut R) -> (Array2<f64>, Array2<f64>) {
    let q = random_orthogonal(k, rng);
    let eig: Vec<f64> = (0..k)
        .map(|i| if k == 1 { 1.0 } else { cond.powf(i as f64 / (k - 1) as f64) })
        .collect();
    let mut factor = q.clone();
    for (j, mut col) in factor.columns_mut().into_iter().enumerate() {
        col.mapv_inplace(|v| v * eig[j].sqrt());
    }
    let a = factor.dot(&factor.t());
    (a, factor)
}

/// Condition number of a symmetric positive definite matrix.
pub fn spd_condition(a: &Array2<f64>) -> f64 {
    let m = nalgebra::DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]]);
    let ev = m.symmetric_eigenvalues();
    ev.max() / ev.min()
}

pub fn gen_sim2<R: Rng + ?Sized>(spec: &SimulationSpec, rng: &mut R) -> Result<GeneratedInstance> {
    spec.validate()?;
    if spec.design != Design::Sim2 {
        return Err(Error::Config("gen_sim2 called with a different design".into()));
    }
    let (n, p, s) = (spec.n, spec.p, spec.s);
    let r = spec.r_resolved();
    let (_, factor) = random_spd(s, spec.cond_resolved(), rng);
    let mut x = gaussian_matrix(n, p, rng);
    // Leading block ~ N(0, A): rows are factor · g.
    let g = x.slice(ndarray::s![.., ..s]).to_owned();
    x.slice_mut(ndarray::s![.., ..s]).assign(&g.dot(&factor.t()));
    for i in s..2 * s {
        let lead = x.column(i - s).to_owned();
        x.column_mut(i).scaled_add(r, &lead);
    }
    let first = x.column(0).to_owned();
    for i in 2 * s..p {
        x.column_mut(i).scaled_add(1.0 - r, &first);
    }
    let mut beta = vec![0.0; p];
    let positions: Vec<usize> = (0..s).collect();
    fill_coefficients(&mut beta, &positions, spec.a_coef_resolved(), rng);
    let y = respond(&x, &beta, spec.sigma, rng);
    Ok(GeneratedInstance {
        data: Dataset::new(x, y)?,
        truth: GroundTruth::new(beta, spec.sigma),
        sigma_used: spec.sigma,
        design_echo: spec.resolved(),
    })
}

/// Coefficients of the worked examples.
fn example_beta(design: Design, p: usize, rho: f64) -> Vec<f64> {
    let mut beta = vec![0.0; p];
    beta[..3].fill(5.0);
    if matches!(design, Design::Ex2 | Design::Ex3) {
        beta[3] = -15.0 * rho.sqrt();
    }
    if design == Design::Ex3 {
        beta[4] = 1.0;
    }
    beta
}

/// Population covariance of predictors `i` and `j` in the worked examples.
///
/// Ordinary columns are `sqrt(ρ)F + sqrt(1−ρ)e_j`; under Ex2/Ex3 column 3 is
/// the factor `F` itself, and under Ex3 column 4 is independent noise.
pub fn example_cov(design: Design, rho: f64, i: usize, j: usize) -> f64 {
    if i == j {
        return 1.0;
    }
    let special = |k: usize| match design {
        Design::Ex2 => k == 3,
        Design::Ex3 => k == 3,
        _ => false,
    };
    let independent = |k: usize| design == Design::Ex3 && k == 4;
    if independent(i) || independent(j) {
        0.0
    } else if special(i) || special(j) {
        rho.sqrt()
    } else {
        rho
    }
}

pub fn gen_example<R: Rng + ?Sized>(spec: &SimulationSpec, rng: &mut R) -> Result<GeneratedInstance> {
    spec.validate()?;
    let design = spec.design;
    if !matches!(design, Design::Ex1 | Design::Ex2 | Design::Ex3) {
        return Err(Error::Config("gen_example called with a different design".into()));
    }
    let (n, p, rho) = (spec.n, spec.p, spec.rho);
    let beta = example_beta(design, p, rho);
    if design != Design::Ex1 {
        // cov(x₄, y) must vanish and x₄ must have correlation sqrt(ρ) with the rest.
        let cov4y: f64 = (0..p).map(|j| beta[j] * example_cov(design, rho, 3, j)).sum();
        let corr = example_cov(design, rho, 3, 0);
        if cov4y.abs() > 1e-12 || (corr - rho.sqrt()).abs() > 1e-15 {
            return Err(Error::Config("example construction violates its covariance targets".into()));
        }
    }
    let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
    let mut x = Array2::zeros((n, p));
    for mut row in x.rows_mut() {
        let f = normal(rng);
        for (j, v) in row.iter_mut().enumerate() {
            let e = normal(rng);
            *v = match design {
                Design::Ex2 | Design::Ex3 if j == 3 => f,
                Design::Ex3 if j == 4 => e,
                _ => a * f + b * e,
            };
        }
    }
    let y = respond(&x, &beta, spec.sigma, rng);
    Ok(GeneratedInstance {
        data: Dataset::new(x, y)?,
        truth: GroundTruth::new(beta, spec.sigma),
        sigma_used: spec.sigma,
        design_echo: spec.resolved(),
    })
}

/// Pure i.i.d. standard Gaussian `n × p` matrix.
pub fn gen_iid_corr<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Result<Array2<f64>> {
    if n < 2 || p < 2 {
        return Err(Error::Config(format!("need n, p >= 2, got n = {n}, p = {p}")));
    }
    Ok(gaussian_matrix(n, p, rng))
}

/// Labels `+1` for the first `n1` rows and `−1` for the next `n2`; class `+1`
/// has mean `gap` on the `informative` features, all else standard Gaussian.
pub fn gen_twoclass<R: Rng + ?Sized>(
    n1: usize,
    n2: usize,
    p: usize,
    informative: &[usize],
    gap: f64,
    rng: &mut R,
) -> Result<Dataset> {
    if n1 < 2 || n2 < 2 || p < 1 {
        return Err(Error::Config("need n1, n2 >= 2 and p >= 1".into()));
    }
    if let Some(&j) = informative.iter().find(|&&j| j >= p) {
        return Err(Error::BadSize { requested: j, available: p });
    }
    let mut x = gaussian_matrix(n1 + n2, p, rng);
    for i in 0..n1 {
        for &j in informative {
            x[[i, j]] += gap;
        }
    }
    let y = Array1::from_iter((0..n1 + n2).map(|i| if i < n1 { 1.0 } else { -1.0 }));
    Dataset::new(x, y)
}

/// Dispatches on `spec.design`.
pub fn generate<R: Rng + ?Sized>(spec: &SimulationSpec, rng: &mut R) -> Result<GeneratedInstance> {
    match spec.design {
        Design::Sim1 => gen_sim1(spec, rng),
        Design::Sim2 => gen_sim2(spec, rng),
        Design::Ex1 | Design::Ex2 | Design::Ex3 => gen_example(spec, rng),
        Design::Twoclass => {
            spec.validate()?;
            let n2 = spec.n2.unwrap();
            let k = spec.s.max(1).min(spec.p);
            let informative: Vec<usize> = (0..k).collect();
            let data = gen_twoclass(spec.n - n2, n2, spec.p, &informative, spec.gap, rng)?;
            let mut beta = vec![0.0; spec.p];
            if spec.gap != 0.0 {
                beta[..k].fill(spec.gap);
            }
            Ok(GeneratedInstance {
                data,
                truth: GroundTruth::new(beta, 1.0),
                sigma_used: 1.0,
                design_echo: spec.resolved(),
            })
        }
        Design::IidCorr => {
            spec.validate()?;
            let x = gen_iid_corr(spec.n, spec.p, rng)?;
            let y = Array1::from_iter((0..spec.n).map(|_| normal(rng)));
            Ok(GeneratedInstance {
                data: Dataset::new(x, y)?,
                truth: GroundTruth::new(vec![0.0; spec.p], 1.0),
                sigma_used: 1.0,
                design_echo: spec.resolved(),
            })
        }
    }
}
