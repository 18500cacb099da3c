//! Two-stage methods: screen to a moderate size, then select and estimate.

use std::time::Instant;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::dantzig::{dantzig_select, hard_threshold_topk, DantzigConfig};
use crate::error::{Error, Result};
use crate::linalg;
use crate::lp::Pricing;
use crate::model::{n_over_log_n, ols_fit, standardize, Dataset, ModelEstimate, StandardizedDesign};
use crate::penalized::{adaptive_lasso_fit, bic_select, PenaltySpec, SolverConfig, SCAD_DEFAULT_A};
use crate::screening::{classif_screen, isis_select, sis_screen, InnerSelection, IsisConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PipelineName {
    SisScad,
    SisDs,
    SisDsScad,
    SisDsAdalasso,
    IsisScad,
    SisScadLd,
    SisScadNb,
    /// BIC-tuned Lasso on the full design, without screening.
    Lasso,
}

impl PipelineName {
    pub fn as_str(self) -> &'static str {
        match self {
            PipelineName::SisScad => "SIS_SCAD",
            PipelineName::SisDs => "SIS_DS",
            PipelineName::SisDsScad => "SIS_DS_SCAD",
            PipelineName::SisDsAdalasso => "SIS_DS_ADALASSO",
            PipelineName::IsisScad => "ISIS_SCAD",
            PipelineName::SisScadLd => "SIS_SCAD_LD",
            PipelineName::SisScadNb => "SIS_SCAD_NB",
            PipelineName::Lasso => "LASSO",
        }
    }
}

/// Dantzig stage settings. `sigma: None` estimates the noise level from an
/// OLS fit on the SIS top-`[n/log n]` columns.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DantzigStage {
    #[serde(default)]
    pub lambda_d: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub pricing: Pricing,
    #[serde(default)]
    pub max_pivots: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpec {
    pub name: PipelineName,
    /// Column name in reports; defaults to `name`.
    #[serde(default)]
    pub label: Option<String>,
    /// First-stage size. Defaults depend on the method (see [`PipelineSpec::first_stage_size`]).
    #[serde(default)]
    pub d: Option<usize>,
    /// When `d` is absent, use `[d_factor · n / ln n]` instead of the method default.
    #[serde(default)]
    pub d_factor: Option<f64>,
    /// Second-stage size for the DS-then-refit methods; defaults to `[n/log n]`.
    #[serde(default)]
    pub d_prime: Option<usize>,
    /// Allows `d ≥ n`.
    #[serde(default)]
    pub allow_large_d: bool,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_scad_a")]
    pub scad_a: f64,
    #[serde(default)]
    pub dantzig: DantzigStage,
    /// Size passed to the screener inside each ISIS step; defaults to `[n/log n]`.
    #[serde(default)]
    pub isis_inner_d: Option<usize>,
    #[serde(default)]
    pub isis_max_steps: Option<usize>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Stop after the screening stage (SIS or ISIS) and report that set.
    #[serde(default)]
    pub screen_only: bool,
}

fn default_scad_a() -> f64 {
    SCAD_DEFAULT_A
}

fn default_gamma() -> f64 {
    1.0
}

impl PipelineSpec {
    pub fn new(name: PipelineName) -> Self {
        Self {
            name,
            label: None,
            d: None,
            d_factor: None,
            d_prime: None,
            allow_large_d: false,
            solver: SolverConfig::default(),
            scad_a: SCAD_DEFAULT_A,
            dantzig: DantzigStage::default(),
            isis_inner_d: None,
            isis_max_steps: None,
            gamma: 1.0,
            screen_only: false,
        }
    }

    pub fn with_d(mut self, d: usize) -> Self {
        self.d = Some(d);
        self
    }

    pub fn screening_only(mut self) -> Self {
        self.screen_only = true;
        self
    }

    pub fn labeled(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.name.as_str().to_string())
    }

    pub fn first_stage_size(&self, n: usize) -> usize {
        if let Some(d) = self.d {
            return d;
        }
        if let Some(c) = self.d_factor {
            return n_over_log_n(n, c);
        }
        match self.name {
            PipelineName::SisDsScad | PipelineName::SisDsAdalasso => n - 1,
            PipelineName::SisScadLd | PipelineName::SisScadNb => n_over_log_n(n, 2.0),
            _ => n_over_log_n(n, 1.0),
        }
    }

    pub fn second_stage_size(&self, n: usize) -> usize {
        self.d_prime.unwrap_or_else(|| n_over_log_n(n, 1.0))
    }

    pub fn validate(&self, n: usize, p: usize) -> Result<()> {
        self.solver.validate()?;
        if self.name == PipelineName::Lasso {
            return Ok(());
        }
        let d = self.first_stage_size(n);
        if d == 0 || d > p {
            return Err(Error::Config(format!("first-stage size {d} must lie in 1..={p}")));
        }
        if d >= n && !self.allow_large_d {
            return Err(Error::Config(format!("first-stage size {d} must be < n = {n}")));
        }
        if matches!(self.name, PipelineName::SisDsScad | PipelineName::SisDsAdalasso) {
            let dp = self.second_stage_size(n);
            if dp == 0 || dp >= d {
                return Err(Error::Config(format!("d_prime = {dp} must lie in 1..{d}")));
            }
        }
        if self.name == PipelineName::IsisScad {
            let inner = self.isis_inner_d.unwrap_or_else(|| n_over_log_n(n, 1.0));
            if inner == 0 {
                return Err(Error::Config("ISIS inner size must be >= 1".into()));
            }
        }
        if !(self.scad_a > 2.0) {
            return Err(Error::Config(format!("SCAD a must exceed 2, got {}", self.scad_a)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        if let Some(s) = self.dantzig.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("Dantzig sigma must be > 0, got {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    /// Selected indices in original coordinates.
    pub selected: Vec<usize>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutcome {
    /// Standardized-scale coefficients in original index space. For a
    /// screen-only run the coefficients are zero and the screened set is in
    /// `stage_trace[0]`.
    pub final_estimate: ModelEstimate,
    pub stage_trace: Vec<StageRecord>,
    pub screen_only: bool,
}

impl PipelineOutcome {
    /// The set produced by the screening stage.
    pub fn screened(&self) -> &[usize] {
        &self.stage_trace[0].selected
    }

    /// The model the method reports: the final support, or the screened set
    /// when stopped after screening.
    pub fn reported_model(&self) -> &[usize] {
        if self.screen_only {
            self.screened()
        } else {
            &self.final_estimate.support
        }
    }
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(Error::at_stage(name))
}

struct Trace {
    records: Vec<StageRecord>,
    clock: Instant,
}

impl Trace {
    fn new() -> Self {
        Self { records: Vec::new(), clock: Instant::now() }
    }

    fn push(&mut self, stage: &str, mut selected: Vec<usize>) {
        selected.sort_unstable();
        let now = Instant::now();
        self.records.push(StageRecord {
            stage: stage.to_string(),
            selected,
            seconds: (now - self.clock).as_secs_f64(),
        });
        self.clock = now;
    }
}

fn scad_family(spec: &PipelineSpec) -> PenaltySpec {
    let mut f = PenaltySpec::scad(1.0);
    f.a = spec.scad_a;
    f
}

/// BIC-tuned SCAD on columns `cols`; returns the estimate over `cols`.
fn scad_on(sd: &StandardizedDesign, cols: &[usize], spec: &PipelineSpec) -> Result<ModelEstimate> {
    let z = linalg::select_columns(sd.z.view(), cols);
    Ok(bic_select(z.view(), sd.y_centered.view(), &scad_family(spec), &spec.solver)?.estimate)
}

/// Residual standard deviation of OLS on the SIS top-`[n/log n]` columns.
pub fn estimate_sigma(sd: &StandardizedDesign) -> Result<f64> {
    let n = sd.n();
    let k = n_over_log_n(n, 1.0).clamp(1, sd.p());
    let cols = sis_screen(sd, k)?.selected;
    let z = linalg::select_columns(sd.z.view(), &cols);
    let coef = ols_fit(z.view(), sd.y_centered.view())?;
    let r = &sd.y_centered - &z.dot(&coef);
    let dof = n.saturating_sub(k + 1).max(1) as f64;
    let s = (r.dot(&r) / dof).sqrt();
    if s > 0.0 {
        Ok(s)
    } else {
        Ok(f64::EPSILON)
    }
}

fn dantzig_on(sd: &StandardizedDesign, cols: &[usize], spec: &PipelineSpec) -> Result<ModelEstimate> {
    let sigma = match spec.dantzig.sigma {
        Some(s) => s,
        None => estimate_sigma(sd)?,
    };
    let mut cfg = DantzigConfig::new(sigma);
    cfg.lambda_d = spec.dantzig.lambda_d;
    cfg.pricing = spec.dantzig.pricing;
    if let Some(m) = spec.dantzig.max_pivots {
        cfg.max_pivots = m;
    }
    let z = linalg::select_columns(sd.z.view(), cols);
    dantzig_select(z.view(), sd.y_centered.view(), &cfg)
}

/// One ISIS step: SIS to `k` columns of `sub`, then BIC-tuned SCAD. When the
/// BIC choice is empty, the largest-λ nonempty model on the path is used, and
/// failing that the single top-ranked column.
pub fn sis_scad_inner(sub: &StandardizedDesign, k: usize, spec: &PipelineSpec) -> Result<InnerSelection> {
    let screened = sis_screen(sub, k)?;
    let cols = screened.selected;
    let z = linalg::select_columns(sub.z.view(), &cols);
    let out = bic_select(z.view(), sub.y_centered.view(), &scad_family(spec), &spec.solver)?;
    let est = if out.estimate.support.is_empty() {
        out.path.iter().map(|pt| &pt.estimate).find(|e| !e.support.is_empty())
    } else {
        Some(&out.estimate)
    };
    match est {
        Some(e) => Ok(InnerSelection {
            indices: e.support.iter().map(|&k| cols[k]).collect(),
            coefficients: e.support.iter().map(|&k| e.beta[k]).collect(),
        }),
        None => {
            let top = screened.ranking[0];
            Ok(InnerSelection { indices: vec![top], coefficients: vec![screened.omega[top]] })
        }
    }
}

/// Runs a regression pipeline on `data`.
pub fn run_pipeline(data: &Dataset, spec: &PipelineSpec) -> Result<PipelineOutcome> {
    let sd = standardize(data);
    run_pipeline_standardized(&sd, spec)
}

pub fn run_pipeline_standardized(sd: &StandardizedDesign, spec: &PipelineSpec) -> Result<PipelineOutcome> {
    let (n, p) = (sd.n(), sd.p());
    spec.validate(n, p)?;
    let mut trace = Trace::new();
    let zero = || ModelEstimate::from_beta(Array1::zeros(p), 0.0, 0, true);

    if spec.name == PipelineName::Lasso {
        let out = stage(
            "lasso",
            bic_select(sd.z.view(), sd.y_centered.view(), &PenaltySpec::l1(1.0), &spec.solver),
        )?;
        trace.push("lasso", out.estimate.support.clone());
        return Ok(PipelineOutcome { final_estimate: out.estimate, stage_trace: trace.records, screen_only: false });
    }

    let d = spec.first_stage_size(n);
    let first = if spec.name == PipelineName::IsisScad {
        let cfg = IsisConfig {
            d_total: d,
            inner_d: spec.isis_inner_d.unwrap_or_else(|| n_over_log_n(n, 1.0)),
            max_steps: spec.isis_max_steps.unwrap_or(d),
        };
        let out = stage("isis", isis_select(sd, &cfg, |sub, k| sis_scad_inner(sub, k, spec)))?;
        trace.push("isis", out.union.clone());
        out.union
    } else {
        let res = stage("sis", sis_screen(sd, d))?;
        trace.push("sis", res.selected.clone());
        res.selected
    };
    if spec.screen_only {
        return Ok(PipelineOutcome { final_estimate: zero(), stage_trace: trace.records, screen_only: true });
    }

    let final_estimate = match spec.name {
        PipelineName::SisScad | PipelineName::IsisScad | PipelineName::SisScadLd | PipelineName::SisScadNb => {
            let est = stage("scad", scad_on(sd, &first, spec))?.embed(&first, p);
            trace.push("scad", est.support.clone());
            est
        }
        PipelineName::SisDs => {
            let est = stage("dantzig", dantzig_on(sd, &first, spec))?.embed(&first, p);
            trace.push("dantzig", est.support.clone());
            est
        }
        PipelineName::SisDsScad | PipelineName::SisDsAdalasso => {
            let ds = stage("dantzig", dantzig_on(sd, &first, spec))?;
            trace.push("dantzig", ds.support.iter().map(|&k| first[k]).collect());
            let top = stage("threshold", hard_threshold_topk(&ds, spec.second_stage_size(n)))?;
            let mut cols: Vec<usize> = top.iter().map(|&k| first[k]).collect();
            cols.sort_unstable();
            trace.push("threshold", cols.clone());
            if spec.name == PipelineName::SisDsScad {
                let est = stage("scad", scad_on(sd, &cols, spec))?.embed(&cols, p);
                trace.push("scad", est.support.clone());
                est
            } else {
                // Base coefficients: the DS estimate restricted to the kept columns.
                let base: Vec<f64> = cols
                    .iter()
                    .map(|j| ds.beta[first.binary_search(j).expect("kept column comes from stage one")])
                    .collect();
                let z = linalg::select_columns(sd.z.view(), &cols);
                let est = stage("adaptive_lasso", adaptive_tuned(z.view(), sd.y_centered.view(), &base, spec))?
                    .embed(&cols, p);
                trace.push("adaptive_lasso", est.support.clone());
                est
            }
        }
        PipelineName::Lasso => unreachable!(),
    };
    check_containment(&trace.records)?;
    Ok(PipelineOutcome { final_estimate, stage_trace: trace.records, screen_only: false })
}

fn adaptive_tuned(
    z: ndarray::ArrayView2<f64>,
    y: ArrayView1<f64>,
    base: &[f64],
    spec: &PipelineSpec,
) -> Result<ModelEstimate> {
    if spec.solver.lambda_grid.as_ref().is_some_and(|g| g.len() == 1) {
        let lambda = spec.solver.lambda_grid.as_ref().unwrap()[0];
        return adaptive_lasso_fit(z, y, lambda, spec.gamma, base, &spec.solver);
    }
    let family = PenaltySpec::adaptive(1.0, spec.gamma, base.to_vec());
    Ok(bic_select(z, y, &family, &spec.solver)?.estimate)
}

/// Each stage's set must lie inside the previous one.
fn check_containment(records: &[StageRecord]) -> Result<()> {
    for w in records.windows(2) {
        if let Some(j) = w[1].selected.iter().find(|j| w[0].selected.binary_search(j).is_err()) {
            return Err(Error::Config(format!(
                "stage {} selected column {j} outside stage {}",
                w[1].stage, w[0].stage
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationOutcome {
    pub train_errors: usize,
    pub test_errors: usize,
    /// Selected features in original coordinates, sorted.
    pub selected_features: Vec<usize>,
}

/// Screens with the two-class screener to `[2n/log n]` features (or `spec.d`),
/// scans the SCAD path for the λ whose model size is closest to
/// `target_size` from below, and classifies with a linear rule (`SIS_SCAD_LD`)
/// or Gaussian naive Bayes (`SIS_SCAD_NB`) on the selected features.
///
/// Labels must be `+1` / `−1`.
pub fn classify(
    train: &Dataset,
    test: &Dataset,
    spec: &PipelineSpec,
    target_size: usize,
) -> Result<ClassificationOutcome> {
    if !matches!(spec.name, PipelineName::SisScadLd | PipelineName::SisScadNb) {
        return Err(Error::Config(format!("{} is not a classification pipeline", spec.name.as_str())));
    }
    if test.p() != train.p() {
        return Err(Error::LengthMismatch { expected: train.p(), got: test.p() });
    }
    let (n, p) = (train.n(), train.p());
    let d = spec.first_stage_size(n).min(p);
    let sd = standardize(train);
    let screened = stage("sis", classif_screen(&sd, train.y(), d))?.selected;
    let z = linalg::select_columns(sd.z.view(), &screened);
    let out = stage("scad", bic_select(z.view(), sd.y_centered.view(), &scad_family(spec), &spec.solver))?;
    // Path walk: largest size not exceeding the target, larger λ on ties.
    let mut chosen: Option<&ModelEstimate> = None;
    for pt in &out.path {
        let df = pt.estimate.support.len();
        if df <= target_size && chosen.is_none_or(|c| df > c.support.len()) {
            chosen = Some(&pt.estimate);
        }
    }
    let est = chosen.ok_or(Error::TargetSizeUnreachable(target_size))?;
    let features: Vec<usize> = est.support.iter().map(|&k| screened[k]).collect();
    if features.is_empty() {
        return Err(Error::TargetSizeUnreachable(target_size));
    }

    let xs_train = linalg::select_columns(train.x(), &features);
    let xs_test = linalg::select_columns(test.x(), &features);
    let predict: Box<dyn Fn(ArrayView1<f64>) -> f64> = match spec.name {
        PipelineName::SisScadLd => {
            // Raw-scale slope, intercept at the midpoint of the two class means.
            let w: Array1<f64> =
                Array1::from_iter(est.support.iter().map(|&k| est.beta[k] / sd.col_scales[screened[k]]));
            let (m_pos, m_neg) = class_means(xs_train.view(), train.y());
            let b0 = -0.5 * (m_pos.dot(&w) + m_neg.dot(&w));
            Box::new(move |x| x.dot(&w) + b0)
        }
        _ => {
            let nb = GaussianNb::fit(xs_train.view(), train.y())?;
            Box::new(move |x| nb.log_odds(x))
        }
    };
    let errors = |xs: &ndarray::Array2<f64>, labels: ArrayView1<f64>| {
        xs.rows()
            .into_iter()
            .zip(labels)
            .filter(|(row, &l)| {
                let pred = if predict(row.view()) >= 0.0 { 1.0 } else { -1.0 };
                pred != l
            })
            .count()
    };
    let mut selected_features = features.clone();
    selected_features.sort_unstable();
    Ok(ClassificationOutcome {
        train_errors: errors(&xs_train, train.y()),
        test_errors: errors(&xs_test, test.y()),
        selected_features,
    })
}

fn class_means(x: ndarray::ArrayView2<f64>, labels: ArrayView1<f64>) -> (Array1<f64>, Array1<f64>) {
    let k = x.ncols();
    let (mut pos, mut neg) = (Array1::zeros(k), Array1::zeros(k));
    let (mut np, mut nn) = (0.0, 0.0);
    for (row, &l) in x.rows().into_iter().zip(labels) {
        if l > 0.0 {
            pos += &row;
            np += 1.0;
        } else {
            neg += &row;
            nn += 1.0;
        }
    }
    (pos / np, neg / nn)
}

/// Per-feature Gaussian class-conditional densities with empirical priors.
struct GaussianNb {
    mean: [Array1<f64>; 2],
    var: [Array1<f64>; 2],
    log_prior: [f64; 2],
}

impl GaussianNb {
    fn fit(x: ndarray::ArrayView2<f64>, labels: ArrayView1<f64>) -> Result<Self> {
        let k = x.ncols();
        let mut mean = [Array1::zeros(k), Array1::zeros(k)];
        let mut sq = [Array1::<f64>::zeros(k), Array1::<f64>::zeros(k)];
        let mut count = [0.0_f64; 2];
        for (row, &l) in x.rows().into_iter().zip(labels) {
            let c = usize::from(l < 0.0);
            mean[c] += &row;
            sq[c] += &row.mapv(|v| v * v);
            count[c] += 1.0;
        }
        if count[0] == 0.0 || count[1] == 0.0 {
            return Err(Error::OneClassOnly);
        }
        let pooled_floor = {
            let total = count[0] + count[1];
            let all_mean = (&mean[0] + &mean[1]) / total;
            let all_var = (&sq[0] + &sq[1]) / total - all_mean.mapv(|m| m * m);
            1e-9 * all_var.iter().cloned().fold(0.0, f64::max).max(1.0)
        };
        let var = [0, 1].map(|c| {
            let m = &mean[c] / count[c];
            (&sq[c] / count[c] - m.mapv(|v| v * v)).mapv(|v| v.max(pooled_floor))
        });
        let total = count[0] + count[1];
        Ok(Self {
            mean: [&mean[0] / count[0], &mean[1] / count[1]],
            var,
            log_prior: [(count[0] / total).ln(), (count[1] / total).ln()],
        })
    }

    /// `log P(+1 | x) − log P(−1 | x)`.
    fn log_odds(&self, x: ArrayView1<f64>) -> f64 {
        let ll = |c: usize| {
            let mut s = self.log_prior[c];
            for j in 0..x.len() {
                let v = self.var[c][j];
                let d = x[j] - self.mean[c][j];
                s -= 0.5 * (v.ln() + d * d / v);
            }
            s
        };
        ll(0) - ll(1)
    }
}
