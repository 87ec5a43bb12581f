use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gen_multinormal, performance_on, true_conditional_performance, MultinormalSpec, PerformanceMetric};
use crate::analysis::{decompose, DecompositionReport, PairedPerformanceSample};
use crate::combinatorics::stated_oob_weight_mean;
use crate::domain::{Trainer, TrainingSet};
use crate::error::{Error, Result};
use crate::estimators::{draw_pooled_replicates, err_loob_on, CoveragePolicy, EstimatorSpec, Metric, Variant};
use crate::resampling::SamplingModel;
use crate::rng;
use crate::trainers::TrainerSpec;

fn default_trials() -> usize {
    1000
}

fn default_test_per_class() -> usize {
    1000
}

fn default_estimator() -> EstimatorSpec {
    EstimatorSpec::auc_star(200)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakCorrConfig {
    pub spec: MultinormalSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_test_per_class")]
    pub test_per_class: usize,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorSpec,
    #[serde(default)]
    pub trainer: TrainerSpec,
    pub seed: u64,
}

impl WeakCorrConfig {
    /// Defaults: 1000 trials, 1000 test points per class, `AUC^(*)`
    /// with `B = 200`, LDA.
    pub fn new(spec: MultinormalSpec, seed: u64) -> Self {
        WeakCorrConfig {
            spec,
            trials: default_trials(),
            test_per_class: default_test_per_class(),
            estimator: default_estimator(),
            trainer: TrainerSpec::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.trials < 2 {
            return Err(Error::Config("trials must be >= 2".into()));
        }
        if self.test_per_class == 0 {
            return Err(Error::Config("test_per_class must be >= 1".into()));
        }
        self.estimator.validate()
    }

    fn metric(&self) -> PerformanceMetric {
        match self.estimator.metric {
            Metric::Auc => PerformanceMetric::Auc,
            Metric::Error => PerformanceMetric::Error { th: self.estimator.th },
        }
    }
}

/// One Monte-Carlo trial: true, apparent and estimated performance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub trial: usize,
    pub s: f64,
    pub sbar: f64,
    pub shat: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    S,
    Sbar,
    Shat,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::S => "S",
            Role::Sbar => "Sbar",
            Role::Shat => "Shat",
        }
    }
}

/// One Table-1 line: moments of a role and its agreement with `S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoleSummary {
    pub role: Role,
    pub mean: f64,
    pub sigma: f64,
    pub rms_cond: f64,
    pub rms_mean: f64,
    pub rho: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub n1: usize,
    pub n2: usize,
    pub roles: Vec<RoleSummary>,
}

impl ExperimentRow {
    pub fn role(&self, role: Role) -> &RoleSummary {
        self.roles.iter().find(|r| r.role == role).expect("every role is present")
    }

    pub const CSV_HEADER: &'static str = "role,mean,sigma,rms_cond,rms_mean,rho,n";

    /// Table-1 shaped CSV; `n` is the total training size `n1 + n2`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.roles {
            let rho = r.rho.map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{},{},{},{}", r.role.name(), r.mean, r.sigma, r.rms_cond, r.rms_mean, rho, self.n1 + self.n2)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakCorrOutcome {
    pub row: ExperimentRow,
    /// Decomposition of `(S, Ŝ)`.
    pub decomposition: DecompositionReport,
    pub triples: Vec<Triple>,
    pub aborted: usize,
}

impl WeakCorrOutcome {
    pub fn write_triples_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "trial,S,Sbar,Shat")?;
        for t in &self.triples {
            writeln!(w, "{},{},{},{}", t.trial, t.s, t.sbar, t.shat)?;
        }
        Ok(())
    }
}

fn run_trial(cfg: &WeakCorrConfig, t: usize) -> Result<Triple> {
    let seed = rng::derive_seed(cfg.seed, "trial", t as u64);
    let train = gen_multinormal(&cfg.spec, rng::derive_seed(seed, "train", 0))?;
    let rule = cfg.trainer.train(&TrainingSet::full(&train))?;
    let metric = cfg.metric();
    let s = true_conditional_performance(&rule, &cfg.spec, cfg.test_per_class, rng::derive_seed(seed, "test", 0), metric)?;
    let sbar = performance_on(&rule, &train, metric)?;
    let shat = cfg
        .estimator
        .run(&train, &cfg.trainer, Some(rng::derive_seed(seed, "estimator", 0)))?
        .value;
    Ok(Triple { trial: t, s, sbar, shat })
}

fn summarize(role: Role, s: &[f64], values: &[f64]) -> Result<(RoleSummary, DecompositionReport)> {
    let d = decompose(&PairedPerformanceSample::new(s.to_vec(), values.to_vec())?);
    let summary = RoleSummary {
        role,
        mean: d.mean_s_hat,
        sigma: d.sigma_s_hat,
        rms_cond: d.rms_cond,
        rms_mean: d.rms_mean,
        rho: d.rho,
    };
    Ok((summary, d))
}

/// Runs the weak-correlation experiment. Trials whose training or estimation
/// fails are dropped and counted; more than 1% dropped fails the run.
pub fn run_weak_correlation(cfg: &WeakCorrConfig) -> Result<WeakCorrOutcome> {
    cfg.validate()?;
    let results: Vec<Result<Triple>> = (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect();
    let triples: Vec<Triple> = results.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let aborted = cfg.trials - triples.len();
    if aborted * 100 > cfg.trials {
        let first = results.into_iter().find_map(Result::err).expect("aborted > 0");
        return Err(Error::Campaign(format!(
            "{aborted} of {} trials aborted (limit 1%); first failure: {first}",
            cfg.trials
        )));
    }
    if triples.len() < 2 {
        return Err(Error::Campaign("fewer than two successful trials".into()));
    }
    let s: Vec<f64> = triples.iter().map(|t| t.s).collect();
    let sbar: Vec<f64> = triples.iter().map(|t| t.sbar).collect();
    let shat: Vec<f64> = triples.iter().map(|t| t.shat).collect();
    let (s_row, _) = summarize(Role::S, &s, &s)?;
    let (sbar_row, _) = summarize(Role::Sbar, &s, &sbar)?;
    let (shat_row, decomposition) = summarize(Role::Shat, &s, &shat)?;
    Ok(WeakCorrOutcome {
        row: ExperimentRow { n1: cfg.spec.n1, n2: cfg.spec.n2, roles: vec![s_row, sbar_row, shat_row] },
        decomposition,
        triples,
        aborted,
    })
}

fn default_ratio_b() -> usize {
    200
}

fn default_ratio_reps() -> usize {
    100
}

/// Bootstrap ratio-curve campaign: 1-D classes with means 0 and 1 and unit
/// variance, `n1 = n2` per grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatioCurveConfig {
    pub n1_grid: Vec<usize>,
    #[serde(default)]
    pub trainer: TrainerSpec,
    #[serde(default = "default_ratio_b")]
    pub b: usize,
    #[serde(default)]
    pub model: SamplingModel,
    /// Independent datasets per grid point.
    #[serde(default = "default_ratio_reps")]
    pub replicates: usize,
    #[serde(default)]
    pub th: f64,
    pub seed: u64,
}

impl RatioCurveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n1_grid.is_empty() {
            return Err(Error::Config("n1_grid must not be empty".into()));
        }
        if let Some(&n) = self.n1_grid.iter().find(|&&n| n < 2) {
            return Err(Error::Config(format!("n1 = {n} in n1_grid; need n1 >= 2")));
        }
        if self.b == 0 || self.replicates == 0 {
            return Err(Error::Config("b and replicates must be >= 1".into()));
        }
        if !self.th.is_finite() {
            return Err(Error::Config("th must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub n1: usize,
    /// `Σ Err^(*) / Σ Err^(1)` over the replicates.
    pub ratio_empirical: f64,
    /// `(2n−2)/(2n−1)` with `n = 2·n1`.
    pub ratio_theory: f64,
    pub model: SamplingModel,
    pub mean_err_one: f64,
    pub mean_err_star: f64,
    /// Per-replicate ratios, for Monte-Carlo error estimates.
    pub replicate_ratios: Vec<f64>,
}

pub const RATIO_CSV_HEADER: &str = "n1,ratio_empirical,ratio_theory,model";

pub fn write_ratio_csv<W: Write>(rows: &[RatioRow], mut w: W) -> Result<()> {
    writeln!(w, "{RATIO_CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.n1, r.ratio_empirical, r.ratio_theory, r.model)?;
    }
    Ok(())
}

/// Both leave-one-out bootstrap variants on the same replicates of one dataset.
fn ratio_replicate(cfg: &RatioCurveConfig, n1: usize, r: usize) -> Result<(f64, f64)> {
    let spec = MultinormalSpec::new(1, 1.0, n1, n1)?;
    let seed = rng::derive_seed(rng::derive_seed(cfg.seed, "ratio", n1 as u64), "replicate", r as u64);
    let data = gen_multinormal(&spec, rng::derive_seed(seed, "data", 0))?;
    let reps = draw_pooled_replicates(&data, cfg.b, rng::derive_seed(seed, "bootstrap", 0), cfg.model)?;
    let policy = CoveragePolicy::DropAndCount;
    let one = err_loob_on(&data, &cfg.trainer, cfg.th, &reps, Variant::Pooled, policy)?.value;
    let star = err_loob_on(&data, &cfg.trainer, cfg.th, &reps, Variant::Partitioned, policy)?.value;
    Ok((one, star))
}

pub fn run_ratio_curve(cfg: &RatioCurveConfig) -> Result<Vec<RatioRow>> {
    cfg.validate()?;
    cfg.n1_grid
        .iter()
        .map(|&n1| {
            let pairs: Vec<(f64, f64)> = (0..cfg.replicates)
                .into_par_iter()
                .map(|r| ratio_replicate(cfg, n1, r).map_err(|e| Error::at(format!("n1 = {n1}, replicate {r}"), e)))
                .collect::<Result<_>>()?;
            let sum_one: f64 = pairs.iter().map(|p| p.0).sum();
            let sum_star: f64 = pairs.iter().map(|p| p.1).sum();
            if sum_one == 0.0 {
                return Err(Error::NothingTested(format!("n1 = {n1}: every Err^(1) was zero; ratio undefined")));
            }
            let k = pairs.len() as f64;
            Ok(RatioRow {
                n1,
                ratio_empirical: sum_star / sum_one,
                ratio_theory: stated_oob_weight_mean(2 * n1 as u64).to_f64(),
                model: cfg.model,
                mean_err_one: sum_one / k,
                mean_err_star: sum_star / k,
                replicate_ratios: pairs.iter().filter(|p| p.0 > 0.0).map(|p| p.1 / p.0).collect(),
            })
        })
        .collect()
}
