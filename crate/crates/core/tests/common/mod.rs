#![allow(dead_code)]

use resamplab::simlab::{gen_multinormal, MultinormalSpec};
use resamplab::{Class, LinearRule, Result, ScoringRule, StratifiedDataset, Trainer, TrainingSet};

/// Ignores the training data and scores every point 0.
pub struct ConstTrainer;

pub struct ConstRule(pub usize);

impl ScoringRule for ConstRule {
    fn dim(&self) -> usize {
        self.0
    }

    fn score(&self, _: &[f64]) -> f64 {
        0.0
    }
}

impl Trainer for ConstTrainer {
    type Rule = ConstRule;

    fn train(&self, set: &TrainingSet<'_>) -> Result<ConstRule> {
        Ok(ConstRule(set.dim()))
    }

    fn id(&self) -> String {
        "const".into()
    }
}

/// Returns the same linear rule whatever it is trained on.
pub struct FixedTrainer(pub LinearRule);

impl Trainer for FixedTrainer {
    type Rule = LinearRule;

    fn train(&self, _: &TrainingSet<'_>) -> Result<LinearRule> {
        Ok(self.0.clone())
    }

    fn id(&self) -> String {
        "fixed".into()
    }
}

pub fn normal_data(p: usize, delta: f64, n1: usize, n2: usize, seed: u64) -> StratifiedDataset {
    gen_multinormal(&MultinormalSpec::new(p, delta, n1, n2).unwrap(), seed).unwrap()
}

pub fn separable(n1: usize, n2: usize) -> StratifiedDataset {
    let c1: Vec<f64> = (0..n1).map(|i| -10.0 - i as f64).collect();
    let c2: Vec<f64> = (0..n2).map(|j| 10.0 + j as f64).collect();
    StratifiedDataset::from_scalars(&c1, &c2).unwrap()
}

/// Zero-one loss written out from its definition: a score at or above `th`
/// votes for class 2.
pub fn loss(score: f64, label: Class, th: f64) -> f64 {
    let predicted = if score >= th { Class::Two } else { Class::One };
    if predicted == label {
        0.0
    } else {
        1.0
    }
}

/// Mann-Whitney kernel written out from its definition.
pub fn kernel(a: f64, b: f64) -> f64 {
    if a < b {
        1.0
    } else if a == b {
        0.5
    } else {
        0.0
    }
}

pub fn train_on<T: Trainer>(ds: &StratifiedDataset, t: &T, c1: Vec<usize>, c2: Vec<usize>) -> T::Rule {
    t.train(&TrainingSet::new(ds, c1, c2)).unwrap()
}

/// Splits pooled indices into class-relative index lists.
pub fn split_pooled(ds: &StratifiedDataset, pooled: impl IntoIterator<Item = usize>) -> (Vec<usize>, Vec<usize>) {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for g in pooled {
        if g < ds.n1() {
            a.push(g)
        } else {
            b.push(g - ds.n1())
        }
    }
    (a, b)
}

pub fn pooled_loss<R: ScoringRule>(ds: &StratifiedDataset, rule: &R, g: usize, th: f64) -> f64 {
    let (x, label) = ds.pooled(g);
    loss(rule.score(x), label, th)
}
