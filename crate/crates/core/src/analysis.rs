//! Normalized-MSE decomposition of an estimator against the true conditional
//! performance, and convergence summaries over resampling budgets.
//!
//! All moments are plug-in (divide by `T`), which makes
//!
//! ```text
//! MSE(Ŝ,S)/(σ_S σ_Ŝ) = MSE(Ŝ,E S)/(σ_S σ_Ŝ) + σ_S/σ_Ŝ − 2ρ
//! ```
//!
//! an exact sample identity rather than a population one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Paired per-trial true (`s`) and estimated (`s_hat`) performance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedPerformanceSample {
    s: Vec<f64>,
    s_hat: Vec<f64>,
}

impl PairedPerformanceSample {
    pub fn new(s: Vec<f64>, s_hat: Vec<f64>) -> Result<Self> {
        if s.len() != s_hat.len() {
            return Err(Error::DimensionMismatch { expected: s.len(), got: s_hat.len() });
        }
        if s.len() < 2 {
            return Err(Error::Domain("a paired sample needs T >= 2".into()));
        }
        if s.iter().chain(&s_hat).any(|v| !v.is_finite()) {
            return Err(Error::Domain("paired sample contains a non-finite value".into()));
        }
        Ok(PairedPerformanceSample { s, s_hat })
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn s(&self) -> &[f64] {
        &self.s
    }

    pub fn s_hat(&self) -> &[f64] {
        &self.s_hat
    }

    /// Reads a headed two-column CSV `s,s_hat`.
    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 {
            return Err(Error::Parse(format!("expected 2 columns (s, s_hat), found {}", headers.len())));
        }
        let (mut s, mut s_hat) = (Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = |c: usize| -> Result<f64> {
                rec[c]
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: `{}` is not a number", line + 1, &rec[c])))
            };
            s.push(field(0)?);
            s_hat.push(field(1)?);
        }
        Self::new(s, s_hat)
    }
}

/// All terms of the decomposition. Fields that would divide by a zero
/// standard deviation are `None` and `degenerate` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub t: usize,
    pub mean_s: f64,
    pub mean_s_hat: f64,
    pub sigma_s: f64,
    pub sigma_s_hat: f64,
    pub mse_cond: f64,
    pub mse_mean: f64,
    /// `RMS(Ŝ, S)`.
    pub rms_cond: f64,
    /// `RMS(Ŝ, E S)`, with `E S` the sample mean of `s`.
    pub rms_mean: f64,
    pub rho: Option<f64>,
    /// `σ_S / σ_Ŝ`.
    pub sigma_ratio: Option<f64>,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub residual: Option<f64>,
    pub degenerate: bool,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn decompose(sample: &PairedPerformanceSample) -> DecompositionReport {
    let (s, sh) = (&sample.s, &sample.s_hat);
    let t = s.len() as f64;
    let (ms, msh) = (mean(s), mean(sh));
    let var_s = s.iter().map(|v| (v - ms).powi(2)).sum::<f64>() / t;
    let var_sh = sh.iter().map(|v| (v - msh).powi(2)).sum::<f64>() / t;
    let cov = s.iter().zip(sh).map(|(a, b)| (a - ms) * (b - msh)).sum::<f64>() / t;
    let mse_cond = s.iter().zip(sh).map(|(a, b)| (b - a).powi(2)).sum::<f64>() / t;
    let mse_mean = sh.iter().map(|b| (b - ms).powi(2)).sum::<f64>() / t;
    let (sigma_s, sigma_sh) = (var_s.sqrt(), var_sh.sqrt());

    let degenerate = !(sigma_s > 0.0 && sigma_sh > 0.0);
    let (rho, sigma_ratio, lhs, rhs, residual) = if degenerate {
        (None, None, None, None, None)
    } else {
        let norm = sigma_s * sigma_sh;
        let rho = (cov / norm).clamp(-1.0, 1.0);
        let ratio = sigma_s / sigma_sh;
        let lhs = mse_cond / norm;
        let rhs = mse_mean / norm + ratio - 2.0 * (cov / norm);
        (Some(rho), Some(ratio), Some(lhs), Some(rhs), Some(lhs - rhs))
    };
    DecompositionReport {
        t: s.len(),
        mean_s: ms,
        mean_s_hat: msh,
        sigma_s,
        sigma_s_hat: sigma_sh,
        mse_cond,
        mse_mean,
        rms_cond: mse_cond.sqrt(),
        rms_mean: mse_mean.sqrt(),
        rho,
        sigma_ratio,
        lhs,
        rhs,
        residual,
        degenerate,
    }
}

/// `|lhs − rhs|` of the decomposition.
pub fn identity_residual(sample: &PairedPerformanceSample) -> Result<f64> {
    let r = decompose(sample);
    match r.residual {
        Some(res) => Ok(res.abs()),
        None if r.sigma_s > 0.0 => Err(Error::DegenerateVariance("estimate has zero variance")),
        None => Err(Error::DegenerateVariance("true performance has zero variance")),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub budgets: Vec<u64>,
    /// `|v[i+1] − v[i]|`, one per consecutive pair of budgets.
    pub diffs: Vec<f64>,
    /// Largest successive difference among the upper half of the budgets.
    pub tail_max_gap: f64,
    pub tolerance: f64,
    pub converged: bool,
}

/// Summarizes how an estimate settles as the resampling budget grows.
/// `values` holds `(budget, estimate)` pairs with strictly increasing budgets.
pub fn convergence_diagnostic(values: &[(u64, f64)], tolerance: f64) -> Result<ConvergenceSummary> {
    if values.len() < 3 {
        return Err(Error::Domain(format!("convergence needs >= 3 budgets, got {}", values.len())));
    }
    if values.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::Domain("budgets must be strictly increasing".into()));
    }
    if values.iter().any(|(_, v)| !v.is_finite()) || !(tolerance >= 0.0) {
        return Err(Error::Domain("values and tolerance must be finite, tolerance >= 0".into()));
    }
    let diffs: Vec<f64> = values.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect();
    // diffs[i] spans budgets i and i+1; keep those with i >= len/2.
    let tail_max_gap = diffs[values.len() / 2..].iter().copied().fold(0.0, f64::max);
    Ok(ConvergenceSummary {
        budgets: values.iter().map(|&(b, _)| b).collect(),
        diffs,
        tail_max_gap,
        tolerance,
        converged: tail_max_gap <= tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(s: &[f64], sh: &[f64]) -> PairedPerformanceSample {
        PairedPerformanceSample::new(s.to_vec(), sh.to_vec()).unwrap()
    }

    #[test]
    fn identical_pairing() {
        let v = [0.6, 0.7, 0.65, 0.71, 0.58];
        let r = decompose(&sample(&v, &v));
        assert_eq!(r.rms_cond, 0.0);
        assert!((r.rho.unwrap() - 1.0).abs() < 1e-12);
        assert!(r.residual.unwrap().abs() <= 1e-12);
    }

    #[test]
    fn constant_truth_is_degenerate() {
        let s = sample(&[0.5, 0.5, 0.5], &[0.4, 0.5, 0.6]);
        assert!(decompose(&s).degenerate);
        assert!(matches!(identity_residual(&s), Err(Error::DegenerateVariance(_))));
    }

    #[test]
    fn rejects_bad_samples() {
        assert!(PairedPerformanceSample::new(vec![1.0], vec![1.0]).is_err());
        assert!(PairedPerformanceSample::new(vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(PairedPerformanceSample::new(vec![1.0, f64::NAN], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn hand_computed_moments() {
        // s = (0, 1), ŝ = (1, 1): σ_Ŝ = 0 → degenerate, but MSEs are defined.
        let r = decompose(&sample(&[0.0, 1.0], &[1.0, 1.0]));
        assert_eq!(r.mse_cond, 0.5);
        assert_eq!(r.mse_mean, 0.25);
        assert!(r.degenerate);
        // s = (0, 2), ŝ = (1, 2): means 1, 1.5; σ_S = 1, σ_Ŝ = 0.5, cov = 0.5.
        let r = decompose(&sample(&[0.0, 2.0], &[1.0, 2.0]));
        assert_eq!((r.sigma_s, r.sigma_s_hat), (1.0, 0.5));
        assert_eq!(r.rho, Some(1.0));
        assert_eq!(r.sigma_ratio, Some(2.0));
        assert_eq!(r.mse_cond, 0.5);
        assert_eq!(r.mse_mean, 0.5);
    }

    #[test]
    fn convergence_examples() {
        let flat: Vec<(u64, f64)> = [10, 100, 1000].iter().map(|&m| (m, 0.3)).collect();
        assert!(convergence_diagnostic(&flat, 0.0).unwrap().converged);
        let decay: Vec<(u64, f64)> = [10u64, 100, 1000, 10000].iter().map(|&m| (m, 1.0 / m as f64)).collect();
        assert!(convergence_diagnostic(&decay, 10.0 / 10000.0).unwrap().converged);
        assert!(!convergence_diagnostic(&decay, 1e-5).unwrap().converged);
        assert!(convergence_diagnostic(&flat[..2], 0.1).is_err());
        assert!(convergence_diagnostic(&[(1, 0.0), (1, 0.0), (2, 0.0)], 0.1).is_err());
    }

    fn paired() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..60).prop_flat_map(|t| (prop::collection::vec(-5.0..5.0f64, t), prop::collection::vec(-5.0..5.0f64, t)))
    }

    proptest! {
        #[test]
        fn identity_holds((s, sh) in paired()) {
            let smp = sample(&s, &sh);
            if let Ok(res) = identity_residual(&smp) {
                let r = decompose(&smp);
                let scale = 1.0 + r.lhs.unwrap().abs();
                prop_assert!(res <= 1e-12 * scale, "residual {res}");
            }
        }

        #[test]
        fn shift_invariance((s, sh) in paired(), shift in -3.0..3.0f64) {
            let a = decompose(&sample(&s, &sh));
            let s2: Vec<f64> = s.iter().map(|v| v + shift).collect();
            let sh2: Vec<f64> = sh.iter().map(|v| v + shift).collect();
            let b = decompose(&sample(&s2, &sh2));
            prop_assert!((a.rms_cond - b.rms_cond).abs() < 1e-9);
            prop_assert!((a.rms_mean - b.rms_mean).abs() < 1e-9);
            prop_assert!((a.sigma_s - b.sigma_s).abs() < 1e-9);
            if let (Some(x), Some(y)) = (a.rho, b.rho) {
                prop_assert!((x - y).abs() < 1e-7);
            }
        }

        #[test]
        fn swap_symmetry((s, sh) in paired()) {
            let a = decompose(&sample(&s, &sh));
            let b = decompose(&sample(&sh, &s));
            if let (Some(ra), Some(rb)) = (a.sigma_ratio, b.sigma_ratio) {
                prop_assert!((ra * rb - 1.0).abs() < 1e-9);
                prop_assert!((a.rho.unwrap() - b.rho.unwrap()).abs() < 1e-9);
            }
        }
    }
}
