//! Marginal screening: SIS ranking, the iterated ridge screener, iterative SIS
//! on residuals, and the two-class mean-difference screener.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{ols_fit, StandardizedDesign};

/// Ranked marginal statistics and the retained index set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningResult {
    pub omega: Vec<f64>,
    /// Permutation of `0..p`, strongest first.
    pub ranking: Vec<usize>,
    /// First `d` entries of `ranking`, sorted ascending.
    pub selected: Vec<usize>,
    pub d: usize,
}

impl ScreeningResult {
    fn from_ranking(omega: Vec<f64>, ranking: Vec<usize>, d: usize) -> Self {
        let mut selected = ranking[..d].to_vec();
        selected.sort_unstable();
        Self { omega, ranking, selected, d }
    }

    /// Keeps the top `d` of an existing ranking.
    pub fn truncate(&self, d: usize) -> Result<Self> {
        if d == 0 || d > self.ranking.len() {
            return Err(Error::BadSize { requested: d, available: self.ranking.len() });
        }
        Ok(Self::from_ranking(self.omega.clone(), self.ranking.clone(), d))
    }

    /// 1-based rank position of index `j`.
    pub fn rank_of(&self, j: usize) -> Option<usize> {
        self.ranking.iter().position(|&k| k == j).map(|r| r + 1)
    }
}

/// Orders indices by `|score|` descending, ties by ascending index, with the
/// `last` indices pushed to the end.
pub fn rank_by_magnitude(score: &[f64], last: &[usize]) -> Vec<usize> {
    let mut demoted = vec![false; score.len()];
    for &j in last {
        demoted[j] = true;
    }
    let mut idx: Vec<usize> = (0..score.len()).collect();
    idx.sort_by(|&a, &b| {
        demoted[a]
            .cmp(&demoted[b])
            .then_with(|| score[b].abs().total_cmp(&score[a].abs()))
            .then_with(|| a.cmp(&b))
    });
    idx
}

/// Componentwise regression `ω = Zᵀ y` on the standardized design, ranked.
pub fn sis_rank(sd: &StandardizedDesign) -> ScreeningResult {
    let omega = sd.z.t().dot(&sd.y_centered).to_vec();
    let ranking = rank_by_magnitude(&omega, &sd.constant_cols);
    let p = omega.len();
    ScreeningResult::from_ranking(omega, ranking, p)
}

pub fn sis_screen(sd: &StandardizedDesign, d: usize) -> Result<ScreeningResult> {
    if d == 0 || d > sd.p() {
        return Err(Error::BadSize { requested: d, available: sd.p() });
    }
    sis_rank(sd).truncate(d)
}

/// Ridge parameter; `Infinite` is the limit in which ridge scores reduce to `Zᵀy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RidgeLambda {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItrrsConfig {
    pub lambda: RidgeLambda,
    /// Fraction of columns retained per step, in (0, 1).
    pub delta: f64,
    pub d_final: usize,
}

impl ItrrsConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if self.d_final < 1 || self.d_final >= n {
            return Err(Error::Config(format!("d_final must lie in [1, n), got {}", self.d_final)));
        }
        if let RidgeLambda::Finite(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("ridge lambda must be finite and >= 0, got {l}")));
            }
        }
        Ok(())
    }
}

/// Ridge scores `(ZᵀZ + λI)⁻¹ Zᵀ y`. When `p > n` the identity
/// `(ZᵀZ + λI)⁻¹Zᵀ = Zᵀ(ZZᵀ + λI)⁻¹` keeps the solve at `n × n`.
pub fn ridge_scores(sd: &StandardizedDesign, lambda: RidgeLambda) -> Result<Array1<f64>> {
    let z = &sd.z;
    let y = &sd.y_centered;
    let (n, p) = z.dim();
    let lambda = match lambda {
        RidgeLambda::Infinite => return Ok(z.t().dot(y)),
        RidgeLambda::Finite(l) => l,
    };
    if lambda == 0.0 && p >= n {
        return Err(Error::SingularSystem);
    }
    if p > n {
        let mut g: Array2<f64> = z.dot(&z.t());
        g.diag_mut().mapv_inplace(|v| v + lambda);
        let alpha = linalg::cholesky_solve(g, y.view()).ok_or(Error::SingularSystem)?;
        Ok(z.t().dot(&alpha))
    } else {
        let mut g: Array2<f64> = z.t().dot(z);
        g.diag_mut().mapv_inplace(|v| v + lambda);
        let rhs = z.t().dot(y);
        linalg::cholesky_solve(g, rhs.view()).ok_or(Error::SingularSystem)
    }
}

/// One thresholding step: keep the `floor(delta * p_cur)` columns with the
/// largest ridge scores. Returns the kept local indices (rank order) and the scores.
pub fn itrrs_step(
    sd_sub: &StandardizedDesign,
    lambda: RidgeLambda,
    delta: f64,
) -> Result<(Vec<usize>, Array1<f64>)> {
    let p_cur = sd_sub.p();
    let keep = (delta * p_cur as f64).floor() as usize;
    if p_cur < 2 || keep < 1 {
        return Err(Error::BadSize { requested: keep, available: p_cur });
    }
    let scores = ridge_scores(sd_sub, lambda)?;
    let ranking = rank_by_magnitude(scores.as_slice().unwrap(), &sd_sub.constant_cols);
    Ok((ranking[..keep].to_vec(), scores))
}

/// Result of the iterated ridge screener.
#[derive(Debug, Clone, PartialEq)]
pub struct ItrrsOutcome {
    pub result: ScreeningResult,
    /// Retained original indices after each step, sorted.
    pub steps: Vec<Vec<usize>>,
}

/// Repeats `itrrs_step` on the surviving columns, response fixed, until at
/// most `d_final` remain.
pub fn itrrs_screen(sd: &StandardizedDesign, cfg: &ItrrsConfig) -> Result<ItrrsOutcome> {
    cfg.validate(sd.n())?;
    let p = sd.p();
    if p <= cfg.d_final {
        return Err(Error::BadSize { requested: cfg.d_final, available: p });
    }
    let mut current: Vec<usize> = (0..p).collect();
    let mut omega = vec![0.0; p];
    let mut steps = Vec::new();
    while current.len() > cfg.d_final {
        let sub = sd.subset(&current);
        let keep = ((cfg.delta * current.len() as f64).floor() as usize).max(1);
        let scores = ridge_scores(&sub, cfg.lambda)?;
        let local = rank_by_magnitude(scores.as_slice().unwrap(), &sub.constant_cols);
        for (k, &j) in current.iter().enumerate() {
            omega[j] = scores[k];
        }
        let mut next: Vec<usize> = local[..keep].iter().map(|&k| current[k]).collect();
        next.sort_unstable();
        steps.push(next.clone());
        current = next;
    }
    // Survivors first by their final score, then everything else.
    let mut survivor = vec![false; p];
    for &j in &current {
        survivor[j] = true;
    }
    let mut ranking: Vec<usize> = (0..p).collect();
    ranking.sort_by(|&a, &b| {
        survivor[b]
            .cmp(&survivor[a])
            .then_with(|| omega[b].abs().total_cmp(&omega[a].abs()))
            .then_with(|| a.cmp(&b))
    });
    let d = current.len();
    Ok(ItrrsOutcome { result: ScreeningResult::from_ranking(omega, ranking, d), steps })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsisConfig {
    /// Target size of the union of all groups; must be below n.
    pub d_total: usize,
    /// Screening size used inside each step.
    pub inner_d: usize,
    pub max_steps: usize,
}

impl IsisConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.inner_d < 1 || self.inner_d > self.d_total || self.d_total >= n {
            return Err(Error::Config(format!(
                "need 1 <= inner_d ({}) <= d_total ({}) < n ({n})",
                self.inner_d, self.d_total
            )));
        }
        if self.max_steps < 1 {
            return Err(Error::Config("max_steps must be >= 1".into()));
        }
        Ok(())
    }
}

/// What an inner selector reports: local column indices and their fitted coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerSelection {
    pub indices: Vec<usize>,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsisOutcome {
    /// Sorted union of all groups.
    pub union: Vec<usize>,
    /// Original indices chosen at each step.
    pub groups: Vec<Vec<usize>>,
    /// `max_{j in union} |Z_jᵀ r|` after each step.
    pub residual_correlation: Vec<f64>,
    pub final_residual: Array1<f64>,
}

/// Iterative screening on residuals.
///
/// Step 1 runs `inner` on the full design. Afterwards `y` is regressed on the
/// union of everything chosen so far and `inner` is run on the remaining
/// columns with those residuals as response. A group that would overflow
/// `d_total` keeps only its largest-|coefficient| members.
pub fn isis_select<F>(sd: &StandardizedDesign, cfg: &IsisConfig, inner: F) -> Result<IsisOutcome>
where
    F: Fn(&StandardizedDesign, usize) -> Result<InnerSelection>,
{
    cfg.validate(sd.n())?;
    let p = sd.p();
    let y = &sd.y_centered;
    let y_norm = linalg::norm2(y.view());
    let mut in_union = vec![false; p];
    let mut union: Vec<usize> = Vec::new();
    let mut groups = Vec::new();
    let mut residual_correlation = Vec::new();
    let mut response = y.clone();

    for step in 1..=cfg.max_steps {
        let remaining: Vec<usize> = (0..p).filter(|&j| !in_union[j]).collect();
        if remaining.is_empty() {
            break;
        }
        let sub = sd.subset(&remaining).with_response(response.clone());
        let sel = inner(&sub, cfg.inner_d.min(remaining.len()))?;
        if sel.indices.is_empty() {
            return Err(Error::EmptyStep(step));
        }
        let mut order: Vec<usize> = (0..sel.indices.len()).collect();
        let budget = cfg.d_total - union.len();
        if order.len() > budget {
            order.sort_by(|&a, &b| {
                sel.coefficients[b]
                    .abs()
                    .total_cmp(&sel.coefficients[a].abs())
                    .then_with(|| sel.indices[a].cmp(&sel.indices[b]))
            });
            order.truncate(budget);
        }
        let mut group: Vec<usize> = order.iter().map(|&k| remaining[sel.indices[k]]).collect();
        group.sort_unstable();
        for &j in &group {
            in_union[j] = true;
        }
        union.extend_from_slice(&group);
        union.sort_unstable();
        groups.push(group);

        let z_a = linalg::select_columns(sd.z.view(), &union);
        let coef = ols_fit(z_a.view(), y.view()).map_err(|e| Error::Stage {
            stage: "isis residual",
            source: Box::new(e),
        })?;
        response = y - &z_a.dot(&coef);
        residual_correlation.push(linalg::max_abs(z_a.t().dot(&response).view()));

        if union.len() >= cfg.d_total || linalg::norm2(response.view()) <= 1e-10 * y_norm {
            break;
        }
    }
    Ok(IsisOutcome { union, groups, residual_correlation, final_residual: response })
}

/// Two-class screener: `ω_j = Σ_{y=+1} z_ij − Σ_{y=−1} z_ij`.
pub fn classif_screen(
    sd: &StandardizedDesign,
    labels: ArrayView1<f64>,
    d: usize,
) -> Result<ScreeningResult> {
    if labels.len() != sd.n() {
        return Err(Error::LengthMismatch { expected: sd.n(), got: labels.len() });
    }
    if d == 0 || d > sd.p() {
        return Err(Error::BadSize { requested: d, available: sd.p() });
    }
    let mut n_pos = 0;
    let mut n_neg = 0;
    for &l in labels {
        if l == 1.0 {
            n_pos += 1;
        } else if l == -1.0 {
            n_neg += 1;
        } else {
            return Err(Error::Config(format!("class labels must be +1 or -1, got {l}")));
        }
    }
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::OneClassOnly);
    }
    let omega = sd.z.t().dot(&labels).to_vec();
    let ranking = rank_by_magnitude(&omega, &sd.constant_cols);
    Ok(ScreeningResult::from_ranking(omega, ranking, d))
}

/// Indices of the `k` largest magnitudes, ties by ascending index, in rank order.
pub fn top_k_by_magnitude(values: &[f64], k: usize) -> Result<Vec<usize>> {
    if k > values.len() {
        return Err(Error::BadSize { requested: k, available: values.len() });
    }
    let mut r = rank_by_magnitude(values, &[]);
    r.truncate(k);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{standardize, Dataset};
    use ndarray::{array, Array2};

    fn design(x: Array2<f64>, y: Array1<f64>) -> StandardizedDesign {
        standardize(&Dataset::new(x, y).unwrap())
    }

    #[test]
    fn ties_break_by_index_and_constants_rank_last() {
        assert_eq!(rank_by_magnitude(&[1.0, -2.0, 2.0, 0.0], &[]), vec![1, 2, 0, 3]);
        assert_eq!(rank_by_magnitude(&[5.0, 1.0, 0.0], &[0]), vec![1, 2, 0]);
    }

    #[test]
    fn full_retention() {
        let sd = design(array![[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]], array![1.0, 2.0, 4.0]);
        assert_eq!(sis_screen(&sd, 2).unwrap().selected, vec![0, 1]);
        assert!(matches!(sis_screen(&sd, 3), Err(Error::BadSize { .. })));
    }

    #[test]
    fn itrrs_step_rejects_zero_lambda_when_wide() {
        let sd = design(
            array![[1.0, 2.0, 0.0], [0.0, 1.0, 3.0]],
            array![1.0, 2.0],
        );
        assert!(matches!(
            itrrs_step(&sd, RidgeLambda::Finite(0.0), 0.5),
            Err(Error::SingularSystem)
        ));
    }

    #[test]
    fn classif_requires_two_classes() {
        let sd = design(array![[1.0], [2.0], [3.0]], array![1.0, 1.0, 1.0]);
        assert!(matches!(
            classif_screen(&sd, array![1.0, 1.0, 1.0].view(), 1),
            Err(Error::OneClassOnly)
        ));
    }

    #[test]
    fn top_k_orders_by_magnitude() {
        assert_eq!(top_k_by_magnitude(&[3.0, -5.0, 1.0], 2).unwrap(), vec![1, 0]);
        assert_eq!(top_k_by_magnitude(&[0.0, 0.0, 0.0], 2).unwrap(), vec![0, 1]);
        assert!(top_k_by_magnitude(&[1.0], 2).is_err());
    }
}
