//! Replicated simulation experiments and their aggregate tables.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{l2_error, standardize};
use crate::pipelines::{run_pipeline_standardized, PipelineSpec};
use crate::rng::{stream, Purpose};
use crate::simgen::{generate, SimulationSpec};
use crate::theory::median_sorted;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sim_spec: SimulationSpec,
    pub pipeline_specs: Vec<PipelineSpec>,
    #[serde(default = "default_reps")]
    pub n_reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Record failed replicates and leave them out of the medians instead of aborting.
    #[serde(default)]
    pub skip_failures: bool,
}

fn default_reps() -> usize {
    200
}

impl ExperimentConfig {
    pub fn new(sim_spec: SimulationSpec, pipeline_specs: Vec<PipelineSpec>, n_reps: usize, seed: u64) -> Self {
        Self { sim_spec, pipeline_specs, n_reps, seed, output_dir: None, skip_failures: false }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid experiment config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_reps == 0 {
            return Err(Error::Config("n_reps must be >= 1".into()));
        }
        if self.pipeline_specs.is_empty() {
            return Err(Error::Config("pipeline_specs must not be empty".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for spec in &self.pipeline_specs {
            if !seen.insert(spec.label()) {
                return Err(Error::Config(format!("duplicate method label {}", spec.label())));
            }
        }
        self.sim_spec.validate()?;
        for spec in &self.pipeline_specs {
            spec.validate(self.sim_spec.n, self.sim_spec.p)?;
        }
        Ok(())
    }
}

/// One method on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub method: String,
    /// Reported model size (the screened set for screen-only methods).
    pub size: usize,
    /// ℓ2 estimation error on the raw predictor scale; NaN for screen-only methods.
    pub l2: f64,
    /// Whether the screening-stage set contains every true variable.
    pub covered: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub median_model_size: f64,
    pub median_l2_error: f64,
    pub inclusion_accuracy: f64,
    pub n_ok: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    /// Methods in configuration order.
    pub methods: Vec<String>,
    pub per_method: BTreeMap<String, MethodSummary>,
    /// Sorted by (replicate, method order).
    pub raw: Vec<ReplicateRecord>,
}

fn run_replicate(cfg: &ExperimentConfig, r: usize) -> Result<Vec<ReplicateRecord>> {
    let mut rng = stream(cfg.seed, r as u64, Purpose::Instance);
    let inst = generate(&cfg.sim_spec, &mut rng)?;
    let sd = standardize(&inst.data);
    let truth = &inst.truth;
    let mut out = Vec::with_capacity(cfg.pipeline_specs.len());
    for spec in &cfg.pipeline_specs {
        let mut spec = spec.clone();
        // Simulations know their noise level.
        if spec.dantzig.sigma.is_none() && inst.sigma_used > 0.0 {
            spec.dantzig.sigma = Some(inst.sigma_used);
        }
        let label = spec.label();
        match run_pipeline_standardized(&sd, &spec) {
            Ok(o) => {
                let screened = o.screened();
                let covered = truth.true_model.iter().all(|j| screened.binary_search(j).is_ok());
                let l2 = if o.screen_only {
                    f64::NAN
                } else {
                    let raw = o.final_estimate.to_raw_scale(sd.col_scales.view())?;
                    l2_error(&raw, truth)?
                };
                out.push(ReplicateRecord {
                    replicate: r,
                    method: label,
                    size: o.reported_model().len(),
                    l2,
                    covered,
                    error: None,
                });
            }
            Err(e) if cfg.skip_failures => out.push(ReplicateRecord {
                replicate: r,
                method: label,
                size: 0,
                l2: f64::NAN,
                covered: false,
                error: Some(e.to_string()),
            }),
            Err(e) => return Err(Error::Replicate { replicate: r, method: label, source: Box::new(e) }),
        }
    }
    Ok(out)
}

/// Runs every pipeline on `n_reps` independent instances. Replicate `r` uses
/// the stream `(seed, r)`, so results do not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<AggregateReport> {
    cfg.validate()?;
    let per_rep: Vec<Vec<ReplicateRecord>> =
        (0..cfg.n_reps).into_par_iter().map(|r| run_replicate(cfg, r)).collect::<Result<_>>()?;
    let raw: Vec<ReplicateRecord> = per_rep.into_iter().flatten().collect();
    Ok(aggregate(&cfg.pipeline_specs.iter().map(|s| s.label()).collect::<Vec<_>>(), raw))
}

/// Medians and coverage frequency per method; failed records are excluded.
pub fn aggregate(methods: &[String], mut raw: Vec<ReplicateRecord>) -> AggregateReport {
    let order: BTreeMap<&str, usize> = methods.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
    raw.sort_by_key(|r| (r.replicate, order.get(r.method.as_str()).copied().unwrap_or(usize::MAX)));
    let mut per_method = BTreeMap::new();
    for m in methods {
        let recs: Vec<&ReplicateRecord> = raw.iter().filter(|r| &r.method == m).collect();
        let ok: Vec<&&ReplicateRecord> = recs.iter().filter(|r| r.error.is_none()).collect();
        let mut sizes: Vec<f64> = ok.iter().map(|r| r.size as f64).collect();
        sizes.sort_by(f64::total_cmp);
        let mut l2s: Vec<f64> = ok.iter().map(|r| r.l2).filter(|v| !v.is_nan()).collect();
        l2s.sort_by(f64::total_cmp);
        let covered = ok.iter().filter(|r| r.covered).count();
        per_method.insert(
            m.clone(),
            MethodSummary {
                median_model_size: median_sorted(&sizes),
                median_l2_error: median_sorted(&l2s),
                inclusion_accuracy: if ok.is_empty() { f64::NAN } else { covered as f64 / ok.len() as f64 },
                n_ok: ok.len(),
                n_failed: recs.len() - ok.len(),
            },
        );
    }
    AggregateReport { methods: methods.to_vec(), per_method, raw }
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v:.6}")
    }
}

impl AggregateReport {
    /// `method,median_size,median_l2,inclusion_acc`, one row per method.
    pub fn write_summary_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["method", "median_size", "median_l2", "inclusion_acc"])?;
        for m in &self.methods {
            let s = &self.per_method[m];
            w.write_record([
                m.clone(),
                fmt_num(s.median_model_size),
                fmt_num(s.median_l2_error),
                fmt_num(s.inclusion_accuracy),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_raw_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(w);
        w.write_record(["replicate", "method", "size", "l2", "covered", "error"])?;
        for r in &self.raw {
            w.write_record([
                r.replicate.to_string(),
                r.method.clone(),
                r.size.to_string(),
                fmt_num(r.l2),
                u8::from(r.covered).to_string(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let methods: Vec<serde_json::Value> = self
            .methods
            .iter()
            .map(|m| {
                let s = &self.per_method[m];
                let num = |v: f64| if v.is_nan() { serde_json::Value::Null } else { serde_json::json!(v) };
                serde_json::json!({
                    "method": m,
                    "median_size": num(s.median_model_size),
                    "median_l2": num(s.median_l2_error),
                    "inclusion_acc": num(s.inclusion_accuracy),
                    "n_ok": s.n_ok,
                    "n_failed": s.n_failed,
                })
            })
            .collect();
        serde_json::json!({ "methods": methods })
    }

    /// Writes `summary.csv`, `replicates.csv` and `summary.json` into `dir`.
    pub fn write_all(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_summary_csv(std::fs::File::create(dir.join("summary.csv"))?)?;
        self.write_raw_csv(std::fs::File::create(dir.join("replicates.csv"))?)?;
        let mut summary = self.summary_json();
        summary["config"] = serde_json::to_value(cfg)?;
        summary["design_echo"] = serde_json::to_value(cfg.sim_spec.resolved())?;
        let mut f = std::fs::File::create(dir.join("summary.json"))?;
        serde_json::to_writer_pretty(&mut f, &summary)?;
        writeln!(f)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    /// One `value` column, ascending.
    Sorted,
    /// `bin_left,bin_right,count` with Freedman–Diaconis bin width.
    Histogram,
}

/// Writes plot-ready CSV for a sample. Nothing is written for an empty sample.
pub fn emit_figure_data(sample: &[f64], kind: FigureKind, path: &Path) -> Result<()> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut w = csv::Writer::from_path(path)?;
    match kind {
        FigureKind::Sorted => {
            w.write_record(["value"])?;
            for v in &sorted {
                w.write_record([v.to_string()])?;
            }
        }
        FigureKind::Histogram => {
            w.write_record(["bin_left", "bin_right", "count"])?;
            for (l, r, c) in histogram(&sorted) {
                w.write_record([l.to_string(), r.to_string(), c.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Freedman–Diaconis bins `2·IQR·m^{-1/3}` over a sorted sample; a single
/// bin when the spread or IQR is zero.
pub fn histogram(sorted: &[f64]) -> Vec<(f64, f64, usize)> {
    let m = sorted.len();
    let (lo, hi) = (sorted[0], sorted[m - 1]);
    let q = |f: f64| {
        let pos = f * (m - 1) as f64;
        let (i, t) = (pos.floor() as usize, pos.fract());
        sorted[i] + t * (sorted[(i + 1).min(m - 1)] - sorted[i])
    };
    let width = 2.0 * (q(0.75) - q(0.25)) / (m as f64).cbrt();
    if !(width > 0.0) || hi <= lo {
        return vec![(lo, hi, m)];
    }
    let bins = ((hi - lo) / width).ceil().max(1.0) as usize;
    let mut counts = vec![0usize; bins];
    for &v in sorted {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (lo + k as f64 * width, lo + (k + 1) as f64 * width, c))
        .collect()
}
