//! Built-in linear trainers used by the simulations and the CLI.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::{ScoringRule, StratifiedDataset, Trainer, TrainingSet};
use crate::error::{Error, Result};

/// `score(x) = w·x + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearRule {
    weights: Vec<f64>,
    offset: f64,
}

impl LinearRule {
    pub fn new(weights: Vec<f64>, offset: f64) -> Self {
        LinearRule { weights, offset }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }
}

impl ScoringRule for LinearRule {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.offset
    }
}

struct ClassMeans {
    m1: Vec<f64>,
    m2: Vec<f64>,
}

fn class_means(set: &TrainingSet<'_>) -> Result<ClassMeans> {
    set.ensure_two_classes()?;
    let p = set.dim();
    let mean = |rows: &mut dyn Iterator<Item = &[f64]>, count: usize| {
        let mut m = vec![0.0; p];
        for row in rows {
            for (acc, v) in m.iter_mut().zip(row) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= count as f64);
        m
    };
    Ok(ClassMeans {
        m1: mean(&mut set.class1_rows(), set.len1()),
        m2: mean(&mut set.class2_rows(), set.len2()),
    })
}

/// Rule with direction `m2 - m1` through the midpoint of the class means.
pub fn nearest_mean_rule(set: &TrainingSet<'_>) -> Result<LinearRule> {
    let ClassMeans { m1, m2 } = class_means(set)?;
    let d: Vec<f64> = m2.iter().zip(&m1).map(|(a, b)| a - b).collect();
    let offset = -0.5 * d.iter().zip(m1.iter().zip(&m2)).map(|(w, (a, b))| w * (a + b)).sum::<f64>();
    Ok(LinearRule::new(d, offset))
}

/// Fisher LDA with pooled covariance (divisor `N - 2`) plus `ridge · I`.
pub fn lda_rule(set: &TrainingSet<'_>, ridge: f64) -> Result<LinearRule> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Domain(format!("ridge must be finite and >= 0, got {ridge}")));
    }
    let ClassMeans { m1, m2 } = class_means(set)?;
    let p = set.dim();
    let mut scatter = DMatrix::<f64>::zeros(p, p);
    let mut accumulate = |row: &[f64], mean: &[f64]| {
        for a in 0..p {
            let da = row[a] - mean[a];
            for b in a..p {
                scatter[(a, b)] += da * (row[b] - mean[b]);
            }
        }
    };
    set.class1_rows().for_each(|r| accumulate(r, &m1));
    set.class2_rows().for_each(|r| accumulate(r, &m2));
    let dof = (set.len1() + set.len2()).saturating_sub(2).max(1) as f64;
    for a in 0..p {
        for b in a..p {
            let v = scatter[(a, b)] / dof;
            scatter[(a, b)] = v;
            scatter[(b, a)] = v;
        }
        scatter[(a, a)] += ridge;
    }
    let d = DVector::from_iterator(p, m2.iter().zip(&m1).map(|(a, b)| a - b));
    let chol = scatter.cholesky().ok_or(Error::SingularCovariance { ridge })?;
    let w = chol.solve(&d);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularCovariance { ridge });
    }
    let offset = -0.5 * (0..p).map(|a| w[a] * (m1[a] + m2[a])).sum::<f64>();
    Ok(LinearRule::new(w.iter().copied().collect(), offset))
}

pub fn train_nearest_mean(dataset: &StratifiedDataset) -> Result<LinearRule> {
    nearest_mean_rule(&TrainingSet::full(dataset))
}

pub fn train_lda(dataset: &StratifiedDataset, ridge: f64) -> Result<LinearRule> {
    lda_rule(&TrainingSet::full(dataset), ridge)
}

/// Named training procedure plus hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TrainerSpec {
    NearestMean,
    Lda {
        #[serde(default = "default_ridge")]
        ridge: f64,
    },
}

pub const DEFAULT_RIDGE: f64 = 1e-6;

fn default_ridge() -> f64 {
    DEFAULT_RIDGE
}

impl Default for TrainerSpec {
    fn default() -> Self {
        TrainerSpec::Lda { ridge: DEFAULT_RIDGE }
    }
}

impl fmt::Display for TrainerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainerSpec::NearestMean => f.write_str("nearest-mean"),
            TrainerSpec::Lda { ridge } => write!(f, "lda(ridge={ridge})"),
        }
    }
}

impl FromStr for TrainerSpec {
    type Err = Error;

    /// Parses a bare identifier; LDA gets the default ridge.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "nearest-mean" => Ok(TrainerSpec::NearestMean),
            "lda" => Ok(TrainerSpec::default()),
            other => Err(Error::Config(format!("unknown trainer `{other}` (expected lda or nearest-mean)"))),
        }
    }
}

impl Trainer for TrainerSpec {
    type Rule = LinearRule;

    fn train(&self, set: &TrainingSet<'_>) -> Result<LinearRule> {
        match *self {
            TrainerSpec::NearestMean => nearest_mean_rule(set),
            TrainerSpec::Lda { ridge } => lda_rule(set, ridge),
        }
    }

    fn id(&self) -> String {
        self.to_string()
    }
}
