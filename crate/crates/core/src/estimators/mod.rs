//! Cross-validation and bootstrap estimators of the error rate and the AUC.
//!
//! Every version comes in a pooled variant (average once over observations or
//! pairs) and a partitioned variant (average within each fold, run or
//! replicate, then across them). For CVK and CVKR the two are algebraically
//! identical; for CVKM and the bootstrap they are not.
//!
//! Error-rate estimators pool both classes into one sample of `n = n1 + n2`
//! labeled points (class 1 first). AUC estimators always resample the two
//! classes independently.
//!
//! Training runs in parallel, but every reduction happens sequentially in a
//! fixed order (observation or pair major, then repetition), so results are
//! bit-reproducible regardless of scheduling.

mod auc;
mod error_rate;

pub use auc::*;
pub use error_rate::*;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{StratifiedDataset, Trainer};
use crate::error::{Error, Result};
use crate::resampling::SamplingModel;

pub const REPORT_SCHEMA: u32 = 1;

/// Cap on redraws when a bootstrap sample misses a class.
pub const MAX_BOOTSTRAP_ATTEMPTS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Version {
    #[serde(rename = "CVN")]
    Cvn,
    #[serde(rename = "CVK")]
    Cvk,
    #[serde(rename = "CVKR")]
    Cvkr,
    #[serde(rename = "CVKM")]
    Cvkm,
    #[serde(rename = "LOOB")]
    Loob,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Pooled,
    Partitioned,
    /// AUC CVK trained only on matched fold indices.
    Reduced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Error,
    #[serde(rename = "AUC")]
    Auc,
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $text),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim() {
                    $($text => Ok($ty::$variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", stringify!($ty), " `{}`"), other
                    ))),
                }
            }
        }
    };
}

text_enum!(Version { Cvn => "CVN", Cvk => "CVK", Cvkr => "CVKR", Cvkm => "CVKM", Loob => "LOOB" });
text_enum!(Variant { Pooled => "Pooled", Partitioned => "Partitioned", Reduced => "Reduced" });
text_enum!(Metric { Error => "Error", Auc => "AUC" });

/// What to do when an observation (or pair) is never tested.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CoveragePolicy {
    /// Leave it out of the average and count it in `excluded_count`.
    #[default]
    DropAndCount,
    /// Fail with [`Error::ZeroCoverage`].
    Strict,
}

impl CoveragePolicy {
    pub fn from_strict(strict: bool) -> Self {
        if strict {
            CoveragePolicy::Strict
        } else {
            CoveragePolicy::DropAndCount
        }
    }
}

/// Result of one estimator run together with the configuration that produced
/// it. Unused configuration fields are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub schema: u32,
    pub value: f64,
    pub version: Version,
    pub variant: Variant,
    pub metric: Metric,
    pub trainer: String,
    pub th: Option<f64>,
    pub k: Option<usize>,
    pub k1: Option<usize>,
    pub k2: Option<usize>,
    pub m: Option<usize>,
    pub b: Option<usize>,
    pub seed: Option<u64>,
    pub sampling_model: Option<SamplingModel>,
    /// Observations or pairs never tested (pooled CVKM and bootstrap), or
    /// replicates with an empty out-of-bag set (partitioned bootstrap).
    pub excluded_count: usize,
}

impl EstimatorReport {
    pub(crate) fn new(version: Version, variant: Variant, metric: Metric, trainer: String, value: f64) -> Self {
        EstimatorReport {
            schema: REPORT_SCHEMA,
            value,
            version,
            variant,
            metric,
            trainer,
            th: None,
            k: None,
            k1: None,
            k2: None,
            m: None,
            b: None,
            seed: None,
            sampling_model: None,
            excluded_count: 0,
        }
    }

    pub const CSV_HEADER: &'static str =
        "schema,version,variant,metric,value,excluded_count,trainer,th,k,k1,k2,m,b,seed,sampling_model";

    /// One CSV record in [`Self::CSV_HEADER`] column order; absent fields are
    /// empty.
    pub fn to_csv_line(&self) -> String {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map(T::to_string).unwrap_or_default()
        }
        let trainer = if self.trainer.contains([',', '"']) {
            format!("\"{}\"", self.trainer.replace('"', "\"\""))
        } else {
            self.trainer.clone()
        };
        [
            self.schema.to_string(),
            self.version.to_string(),
            self.variant.to_string(),
            self.metric.to_string(),
            self.value.to_string(),
            self.excluded_count.to_string(),
            trainer,
            opt(&self.th),
            opt(&self.k),
            opt(&self.k1),
            opt(&self.k2),
            opt(&self.m),
            opt(&self.b),
            opt(&self.seed),
            opt(&self.sampling_model),
        ]
        .join(",")
    }
}

/// Declarative choice of estimator, shared by the CLI and the simulations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    pub version: Version,
    pub variant: Variant,
    pub metric: Metric,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k2: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<usize>,
    #[serde(default)]
    pub model: SamplingModel,
    #[serde(default)]
    pub th: f64,
    #[serde(default)]
    pub strict: bool,
}

impl EstimatorSpec {
    pub fn new(version: Version, variant: Variant, metric: Metric) -> Self {
        EstimatorSpec {
            version,
            variant,
            metric,
            k: None,
            k1: None,
            k2: None,
            m: None,
            b: None,
            model: SamplingModel::Ordered,
            th: 0.0,
            strict: false,
        }
    }

    /// Partitioned LPOBS with `b` ordered replicates.
    pub fn auc_star(b: usize) -> Self {
        EstimatorSpec {
            b: Some(b),
            ..Self::new(Version::Loob, Variant::Partitioned, Metric::Auc)
        }
    }

    pub fn is_randomized(&self) -> bool {
        matches!(self.version, Version::Cvkr | Version::Cvkm | Version::Loob)
    }

    fn need(&self, value: Option<usize>, key: &str) -> Result<usize> {
        value.ok_or_else(|| Error::Config(format!("{} {} needs `{key}`", self.metric, self.version)))
    }

    fn fold_counts(&self) -> Result<(usize, usize)> {
        let k1 = self.k1.or(self.k);
        let k2 = self.k2.or(self.k);
        Ok((self.need(k1, "k1 (or k)")?, self.need(k2, "k2 (or k)")?))
    }

    /// Checks that every parameter the chosen estimator needs is present.
    pub fn validate(&self) -> Result<()> {
        if self.variant == Variant::Reduced && !(self.metric == Metric::Auc && self.version == Version::Cvk) {
            return Err(Error::Config("variant Reduced exists only for AUC CVK".into()));
        }
        if self.version == Version::Cvn && self.variant != Variant::Pooled {
            return Err(Error::Config("CVN has a single variant; use Pooled".into()));
        }
        if !self.th.is_finite() {
            return Err(Error::Config("th must be finite".into()));
        }
        match (self.metric, self.version) {
            (_, Version::Cvn) => {}
            (Metric::Error, Version::Cvk) => {
                self.need(self.k, "k")?;
            }
            (Metric::Error, Version::Cvkr | Version::Cvkm) => {
                self.need(self.k, "k")?;
                self.need(self.m, "m")?;
            }
            (Metric::Auc, Version::Cvk) => {
                self.fold_counts()?;
            }
            (Metric::Auc, Version::Cvkr | Version::Cvkm) => {
                self.fold_counts()?;
                self.need(self.m, "m")?;
            }
            (_, Version::Loob) => {
                self.need(self.b, "b")?;
            }
        }
        Ok(())
    }

    /// Runs the estimator. Randomized versions need a seed.
    pub fn run<T: Trainer>(&self, data: &StratifiedDataset, trainer: &T, seed: Option<u64>) -> Result<EstimatorReport> {
        self.validate()?;
        let seed_for = || seed.ok_or_else(|| Error::Config(format!("{} needs a seed", self.version)));
        let policy = CoveragePolicy::from_strict(self.strict);
        let th = self.th;
        match (self.metric, self.version) {
            (Metric::Error, Version::Cvn) => err_cvn(data, trainer, th),
            (Metric::Error, Version::Cvk) => err_cvk(data, trainer, th, self.need(self.k, "k")?, self.variant, None),
            (Metric::Error, Version::Cvkr) => {
                err_cvkr(data, trainer, th, self.need(self.k, "k")?, self.need(self.m, "m")?, seed_for()?, self.variant)
            }
            (Metric::Error, Version::Cvkm) => err_cvkm(
                data,
                trainer,
                th,
                self.need(self.k, "k")?,
                self.need(self.m, "m")?,
                seed_for()?,
                self.variant,
                policy,
            ),
            (Metric::Error, Version::Loob) => {
                err_loob(data, trainer, th, self.need(self.b, "b")?, seed_for()?, self.model, self.variant, policy)
            }
            (Metric::Auc, Version::Cvn) => auc_cvn(data, trainer),
            (Metric::Auc, Version::Cvk) => {
                let (k1, k2) = self.fold_counts()?;
                auc_cvk(data, trainer, k1, k2, self.variant, None)
            }
            (Metric::Auc, Version::Cvkr) => {
                let (k1, k2) = self.fold_counts()?;
                auc_cvkr(data, trainer, k1, k2, self.need(self.m, "m")?, seed_for()?, self.variant)
            }
            (Metric::Auc, Version::Cvkm) => {
                let (k1, k2) = self.fold_counts()?;
                auc_cvkm(data, trainer, k1, k2, self.need(self.m, "m")?, seed_for()?, self.variant, policy)
            }
            (Metric::Auc, Version::Loob) => {
                auc_lpobs(data, trainer, self.need(self.b, "b")?, seed_for()?, self.model, self.variant, policy)
            }
        }
    }
}

/// Mean of `num[i] / den[i]` over entries with `den[i] > 0`.
pub(crate) fn covered_ratio_mean(
    num: &[f64],
    den: &[u64],
    policy: CoveragePolicy,
    what: &'static str,
) -> Result<(f64, usize)> {
    let mut total = 0.0;
    let mut covered = 0usize;
    for (idx, (&s, &c)) in num.iter().zip(den).enumerate() {
        if c == 0 {
            if policy == CoveragePolicy::Strict {
                return Err(Error::ZeroCoverage { what, index: idx });
            }
            continue;
        }
        total += s / c as f64;
        covered += 1;
    }
    if covered == 0 {
        return Err(Error::NothingTested(format!("no {what} was ever in a test set")));
    }
    Ok((total / covered as f64, num.len() - covered))
}

pub(crate) fn finite_score(score: f64) -> Result<f64> {
    if score.is_finite() {
        Ok(score)
    } else {
        Err(Error::Domain(format!("trained rule produced a non-finite score ({score})")))
    }
}
