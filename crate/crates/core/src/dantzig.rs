//! Dantzig selector `min ‖ζ‖₁  s.t.  ‖Zᵀ(y − Zζ)‖_∞ ≤ λ_d σ`, solved as a
//! linear program over `(u, ζ⁺, ζ⁻)`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, s};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::lp::{simplex_solve, LinearProgram, Pricing, SimplexOptions};
use crate::model::ModelEstimate;
use crate::screening::top_k_by_magnitude;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DantzigConfig {
    /// `None` means `sqrt(2 ln d)`.
    #[serde(default)]
    pub lambda_d: Option<f64>,
    pub sigma: f64,
    #[serde(default = "default_lp_tol")]
    pub lp_tol: f64,
    #[serde(default = "default_max_pivots")]
    pub max_pivots: usize,
    #[serde(default)]
    pub pricing: Pricing,
}

fn default_lp_tol() -> f64 {
    1e-8
}

fn default_max_pivots() -> usize {
    200_000
}

impl DantzigConfig {
    pub fn new(sigma: f64) -> Self {
        Self {
            lambda_d: None,
            sigma,
            lp_tol: default_lp_tol(),
            max_pivots: default_max_pivots(),
            pricing: Pricing::default(),
        }
    }

    pub fn lambda_for(&self, d: usize) -> f64 {
        self.lambda_d.unwrap_or_else(|| (2.0 * (d as f64).ln()).max(0.0).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lambda_d {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("lambda_d must be >= 0, got {l}")));
            }
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.lp_tol > 0.0) || self.max_pivots < 1 {
            return Err(Error::Config("lp_tol must be > 0 and max_pivots >= 1".into()));
        }
        Ok(())
    }
}

/// Builds the LP. Variables are ordered `[u (d), ζ⁺ (d), ζ⁻ (d)]`, all
/// nonnegative; rows are `ζ − u ≤ 0`, `−ζ − u ≤ 0`, then
/// `Gζ ≤ λσ + Zᵀy` and `−Gζ ≤ λσ − Zᵀy` with `G = ZᵀZ` and `ζ = ζ⁺ − ζ⁻`.
pub fn build_dantzig_lp(z: ArrayView2<f64>, y: ArrayView1<f64>, cfg: &DantzigConfig) -> Result<LinearProgram> {
    let (n, d) = z.dim();
    if y.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: y.len() });
    }
    if d == 0 {
        return Err(Error::BadSize { requested: 0, available: 0 });
    }
    let bound = cfg.lambda_for(d) * cfg.sigma;
    let g = z.t().dot(&z);
    let zty = z.t().dot(&y);
    let mut a = Array2::zeros((4 * d, 3 * d));
    let mut b = vec![0.0; 4 * d];
    for j in 0..d {
        a[[j, j]] = -1.0;
        a[[j, d + j]] = 1.0;
        a[[j, 2 * d + j]] = -1.0;
        a[[d + j, j]] = -1.0;
        a[[d + j, d + j]] = -1.0;
        a[[d + j, 2 * d + j]] = 1.0;
    }
    a.slice_mut(s![2 * d..3 * d, d..2 * d]).assign(&g);
    a.slice_mut(s![2 * d..3 * d, 2 * d..3 * d]).assign(&(-&g));
    a.slice_mut(s![3 * d..4 * d, d..2 * d]).assign(&(-&g));
    a.slice_mut(s![3 * d..4 * d, 2 * d..3 * d]).assign(&g);
    for j in 0..d {
        b[2 * d + j] = bound + zty[j];
        b[3 * d + j] = bound - zty[j];
    }
    let mut c = vec![0.0; 3 * d];
    c[..d].fill(1.0);
    Ok(LinearProgram { c, a_ub: a, b_ub: b, var_lower_bounds: vec![0.0; 3 * d] })
}

/// Same problem without the bound variables `u`: variables `[ζ⁺, ζ⁻]` and
/// objective `Σ(ζ⁺ + ζ⁻)`, keeping only the two blocks of correlation rows.
/// Any optimum has `ζ⁺_j ζ⁻_j = 0`, so both programs share their optimal `ζ`.
pub fn build_dantzig_lp_compact(
    z: ArrayView2<f64>,
    y: ArrayView1<f64>,
    cfg: &DantzigConfig,
) -> Result<LinearProgram> {
    let full = build_dantzig_lp(z, y, cfg)?;
    let d = z.ncols();
    let a = full.a_ub.slice(s![2 * d.., d..]).to_owned();
    Ok(LinearProgram {
        c: vec![1.0; 2 * d],
        a_ub: a,
        b_ub: full.b_ub[2 * d..].to_vec(),
        var_lower_bounds: vec![0.0; 2 * d],
    })
}

/// Dantzig selector estimate. Entries with `|β_j| ≤ lp_tol` are set to zero.
pub fn dantzig_select(z: ArrayView2<f64>, y: ArrayView1<f64>, cfg: &DantzigConfig) -> Result<ModelEstimate> {
    cfg.validate()?;
    let d = z.ncols();
    let lp = build_dantzig_lp_compact(z, y, cfg)?;
    let opts = SimplexOptions { tol: 1e-9, max_pivots: cfg.max_pivots, pricing: cfg.pricing };
    let sol = simplex_solve(&lp, &opts)?;
    let mut beta = Array1::from_iter((0..d).map(|j| sol.x[j] - sol.x[d + j]));
    beta.mapv_inplace(|v| if v.abs() <= cfg.lp_tol { 0.0 } else { v });
    let objective = beta.iter().map(|v| v.abs()).sum();
    Ok(ModelEstimate::from_beta(beta, objective, sol.pivots, true))
}

/// `‖Zᵀ(y − Zβ)‖_∞`.
pub fn correlation_residual(z: ArrayView2<f64>, y: ArrayView1<f64>, beta: ArrayView1<f64>) -> f64 {
    let r = &y - &z.dot(&beta);
    linalg::max_abs(z.t().dot(&r).view())
}

/// Indices of the `k` largest `|β_j|`, ties by ascending index, in rank order.
pub fn hard_threshold_topk(est: &ModelEstimate, k: usize) -> Result<Vec<usize>> {
    top_k_by_magnitude(&est.beta, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn one_column_lp_shape() {
        let z = array![[1.0], [-1.0], [0.5]];
        let y = array![1.0, 0.0, 0.0];
        let lp = build_dantzig_lp(z.view(), y.view(), &DantzigConfig::new(1.0)).unwrap();
        assert_eq!(lp.n_vars(), 3);
        assert_eq!(lp.n_rows(), 4);
    }

    #[test]
    fn zero_response_gives_zero() {
        let z = array![[1.0, 0.2], [-1.0, 0.3], [0.5, -0.5]];
        let y = array![0.0, 0.0, 0.0];
        let est = dantzig_select(z.view(), y.view(), &DantzigConfig::new(1.0)).unwrap();
        assert!(est.support.is_empty());
    }

    #[test]
    fn loose_bound_makes_origin_optimal() {
        let z = array![[1.0, 0.2], [-1.0, 0.3], [0.5, -0.5]];
        let y = array![1.0, -2.0, 0.5];
        let zty = z.t().dot(&y);
        let cfg = DantzigConfig { lambda_d: Some(linalg::max_abs(zty.view())), ..DantzigConfig::new(1.0) };
        let est = dantzig_select(z.view(), y.view(), &cfg).unwrap();
        assert!(est.support.is_empty());
        assert_eq!(est.objective, 0.0);
    }

    #[test]
    fn top_k_cases() {
        let e = ModelEstimate::from_beta(array![3.0, -5.0, 1.0], 0.0, 0, true);
        let mut top = hard_threshold_topk(&e, 2).unwrap();
        top.sort();
        assert_eq!(top, vec![0, 1]);
        assert_eq!(hard_threshold_topk(&e, 3).unwrap(), vec![1, 0, 2]);
        let zero = ModelEstimate::from_beta(array![0.0, 0.0, 0.0], 0.0, 0, true);
        assert_eq!(hard_threshold_topk(&zero, 2).unwrap(), vec![0, 1]);
        assert!(matches!(hard_threshold_topk(&e, 4), Err(Error::BadSize { .. })));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(DantzigConfig::new(0.0).validate().is_err());
        let cfg = DantzigConfig { lambda_d: Some(-1.0), ..DantzigConfig::new(1.0) };
        assert!(cfg.validate().is_err());
    }
}
