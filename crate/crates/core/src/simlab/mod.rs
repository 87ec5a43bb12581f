//! Synthetic data, true-performance oracles and the two Monte-Carlo
//! campaigns: the weak-correlation experiment and the bootstrap ratio curve.

mod campaign;

pub use campaign::*;
pub use crate::trainers::{train_lda, train_nearest_mean};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::domain::{empirical_auc, loss_at, Class, ScoringRule, StratifiedDataset};
use crate::error::{Error, Result};
use crate::rng;

/// Two classes `N(0, I_p)` and `N(c·1, I_p)` with `c = Δ/√p`, so that the
/// Mahalanobis distance between them is `Δ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultinormalSpec {
    pub p: usize,
    pub delta: f64,
    pub n1: usize,
    pub n2: usize,
}

impl MultinormalSpec {
    pub fn new(p: usize, delta: f64, n1: usize, n2: usize) -> Result<Self> {
        let spec = MultinormalSpec { p, delta, n1, n2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::Config("p must be >= 1".into()));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::Config(format!("delta must be finite and >= 0, got {}", self.delta)));
        }
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::Config("n1 and n2 must be >= 1".into()));
        }
        Ok(())
    }

    /// Per-coordinate offset of the class-2 mean.
    pub fn offset(&self) -> f64 {
        self.delta / (self.p as f64).sqrt()
    }

    /// AUC of the Bayes rule, `Φ(Δ/√2)`.
    pub fn population_auc(&self) -> f64 {
        standard_normal_cdf(self.delta / std::f64::consts::SQRT_2)
    }

    pub fn with_sizes(&self, n1: usize, n2: usize) -> Self {
        MultinormalSpec { n1, n2, ..*self }
    }
}

pub fn standard_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

pub fn gen_multinormal(spec: &MultinormalSpec, seed: u64) -> Result<StratifiedDataset> {
    spec.validate()?;
    let c = spec.offset();
    let draw = |tag: &str, n: usize, shift: f64| -> Vec<f64> {
        let mut r = rng::stream(seed, tag, 0);
        (0..n * spec.p).map(|_| {
            let z: f64 = StandardNormal.sample(&mut r);
            z + shift
        }).collect::<Vec<f64>>()
    };
    let class1 = draw("multinormal/class1", spec.n1, 0.0);
    let class2 = draw("multinormal/class2", spec.n2, c);
    StratifiedDataset::from_flat(class1, class2, spec.p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "kebab-case")]
pub enum PerformanceMetric {
    Auc,
    Error { th: f64 },
}

/// AUC (or error rate at `th`) of `rule` on `data` itself.
pub fn performance_on<R: ScoringRule + ?Sized>(
    rule: &R,
    data: &StratifiedDataset,
    metric: PerformanceMetric,
) -> Result<f64> {
    if rule.dim() != data.dim() {
        return Err(Error::DimensionMismatch { expected: rule.dim(), got: data.dim() });
    }
    let s1: Vec<f64> = (0..data.n1()).map(|i| rule.score(data.class1_row(i))).collect();
    let s2: Vec<f64> = (0..data.n2()).map(|j| rule.score(data.class2_row(j))).collect();
    match metric {
        PerformanceMetric::Auc => empirical_auc(&s1, &s2),
        PerformanceMetric::Error { th } => {
            let wrong = s1.iter().map(|&s| loss_at(s, Class::One, th)).sum::<f64>()
                + s2.iter().map(|&s| loss_at(s, Class::Two, th)).sum::<f64>();
            Ok(wrong / data.n() as f64)
        }
    }
}

/// Approximates the true performance of `rule` on a fresh test draw of
/// `test_per_class` points per class.
pub fn true_conditional_performance<R: ScoringRule + ?Sized>(
    rule: &R,
    spec: &MultinormalSpec,
    test_per_class: usize,
    seed: u64,
    metric: PerformanceMetric,
) -> Result<f64> {
    let test = gen_multinormal(&spec.with_sizes(test_per_class, test_per_class), seed)?;
    performance_on(rule, &test, metric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trainers::LinearRule;

    #[test]
    fn offset_and_population_auc() {
        let spec = MultinormalSpec::new(5, 0.8, 10, 10).unwrap();
        assert!((spec.offset() - 0.357_770_876).abs() < 1e-9);
        assert!((spec.population_auc() - 0.7142).abs() < 1e-4);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = MultinormalSpec::new(3, 1.0, 4, 6).unwrap();
        let a = gen_multinormal(&spec, 9).unwrap();
        let b = gen_multinormal(&spec, 9).unwrap();
        let c = gen_multinormal(&spec, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!((a.n1(), a.n2(), a.dim()), (4, 6, 3));
    }

    #[test]
    fn bayes_direction_matches_population_auc() {
        let spec = MultinormalSpec::new(5, 0.8, 1, 1).unwrap();
        let rule = LinearRule::new(vec![1.0; 5], 0.0);
        let auc = true_conditional_performance(&rule, &spec, 100_000, 3, PerformanceMetric::Auc).unwrap();
        assert!((auc - spec.population_auc()).abs() < 0.003, "{auc}");
    }

    #[test]
    fn separated_classes_give_perfect_auc() {
        let spec = MultinormalSpec::new(1, 40.0, 1, 1).unwrap();
        let rule = LinearRule::new(vec![1.0], 0.0);
        let auc = true_conditional_performance(&rule, &spec, 500, 1, PerformanceMetric::Auc).unwrap();
        assert_eq!(auc, 1.0);
        let err = true_conditional_performance(&rule, &spec.with_sizes(1, 1), 500, 1, PerformanceMetric::Error { th: 20.0 })
            .unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn null_separation_gives_half() {
        let spec = MultinormalSpec::new(2, 0.0, 1, 1).unwrap();
        let rule = LinearRule::new(vec![1.0, -0.5], 0.0);
        let auc = true_conditional_performance(&rule, &spec, 20_000, 5, PerformanceMetric::Auc).unwrap();
        // Null standard error of the Mann-Whitney AUC: sqrt((n1+n2+1) / (12 n1 n2)).
        let n = 20_000f64;
        let se = ((2.0 * n + 1.0) / (12.0 * n * n)).sqrt();
        assert!((auc - 0.5).abs() < 3.0 * se, "{auc}");
    }

    #[test]
    fn sample_mahalanobis_distance() {
        let spec = MultinormalSpec::new(5, 0.8, 200_000, 200_000).unwrap();
        let ds = gen_multinormal(&spec, 21).unwrap();
        let mean = |class: Class, n: usize| -> Vec<f64> {
            let mut m = vec![0.0; 5];
            for i in 0..n {
                for (a, b) in m.iter_mut().zip(ds.row(class, i)) {
                    *a += b / n as f64;
                }
            }
            m
        };
        let m1 = mean(Class::One, ds.n1());
        let m2 = mean(Class::Two, ds.n2());
        let d: f64 = m1.iter().zip(&m2).map(|(a, b)| (b - a).powi(2)).sum::<f64>().sqrt();
        assert!((d - 0.8).abs() < 0.02, "{d}");
    }
}
