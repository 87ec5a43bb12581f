use rayon::prelude::*;

use super::{covered_ratio_mean, finite_score, CoveragePolicy, EstimatorReport, Metric, Variant, Version, MAX_BOOTSTRAP_ATTEMPTS};
use crate::domain::{loss_at, ScoringRule, StratifiedDataset, Trainer, TrainingSet};
use crate::error::{Error, Result};
use crate::resampling::{
    bootstrap_replicate_with, make_partition, repeated_partitions, BootstrapReplicate, PartitionMap,
    RepeatedPartition, SamplingModel,
};
use crate::rng;

/// Trains on the pooled indices `train` and returns the zero-one loss of
/// every pooled index in `test`.
fn pooled_losses<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    th: f64,
    train: impl IntoIterator<Item = usize>,
    test: &[usize],
) -> Result<Vec<f64>> {
    let rule = trainer.train(&TrainingSet::from_pooled(data, train))?;
    test.iter()
        .map(|&g| {
            let (x, label) = data.pooled(g);
            Ok(loss_at(finite_score(rule.score(x))?, label, th))
        })
        .collect()
}

fn check_partition(data: &StratifiedDataset, p: &PartitionMap) -> Result<()> {
    if p.n() != data.n() {
        return Err(Error::Domain(format!("partition covers {} observations, dataset has {}", p.n(), data.n())));
    }
    Ok(())
}

/// Loss of every observation under the rule trained without its fold.
fn fold_losses<T: Trainer>(data: &StratifiedDataset, trainer: &T, th: f64, p: &PartitionMap, stage: &str) -> Result<Vec<f64>> {
    let k = p.fold_count();
    let per_fold: Vec<Result<Vec<f64>>> = (0..k)
        .into_par_iter()
        .map(|f| {
            pooled_losses(data, trainer, th, p.complement(f), p.members(f))
                .map_err(|e| Error::at(format!("{stage}fold {}/{k}", f + 1), e))
        })
        .collect();
    let mut q = vec![0.0; p.n()];
    for (f, losses) in per_fold.into_iter().enumerate() {
        for (&i, l) in p.members(f).iter().zip(losses?) {
            q[i] = l;
        }
    }
    Ok(q)
}

fn error_report<T: Trainer>(version: Version, variant: Variant, trainer: &T, th: f64, value: f64) -> EstimatorReport {
    let mut r = EstimatorReport::new(version, variant, Metric::Error, trainer.id(), value);
    r.th = Some(th);
    r
}

/// Leave-one-out CV: `n` trainings on `n-1` points each.
pub fn err_cvn<T: Trainer>(data: &StratifiedDataset, trainer: &T, th: f64) -> Result<EstimatorReport> {
    let n = data.n();
    if n < 2 {
        return Err(Error::Domain("CVN needs n >= 2".into()));
    }
    let losses: Vec<Result<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            pooled_losses(data, trainer, th, (0..n).filter(|&g| g != i), &[i])
                .map(|l| l[0])
                .map_err(|e| Error::at(format!("held-out observation {i}"), e))
        })
        .collect();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(error_report(Version::Cvn, Variant::Pooled, trainer, th, total / n as f64))
}

/// One-run K-fold CV over a given partition.
pub fn err_cvk_on<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    th: f64,
    partition: &PartitionMap,
    variant: Variant,
) -> Result<EstimatorReport> {
    check_partition(data, partition)?;
    let q = fold_losses(data, trainer, th, partition, "")?;
    let value = match variant {
        Variant::Pooled => q.iter().sum::<f64>() / q.len() as f64,
        Variant::Partitioned => partitioned_mean(&q, partition),
        Variant::Reduced => return Err(Error::Domain("Reduced applies only to AUC CVK".into())),
    };
    let mut r = error_report(Version::Cvk, variant, trainer, th, value);
    r.k = Some(partition.fold_count());
    Ok(r)
}

/// Mean over folds of the within-fold mean loss.
fn partitioned_mean(q: &[f64], p: &PartitionMap) -> f64 {
    let size = p.fold_size() as f64;
    let per_fold: f64 = (0..p.fold_count())
        .map(|f| p.members(f).iter().map(|&i| q[i]).sum::<f64>() / size)
        .sum();
    per_fold / p.fold_count() as f64
}

/// One-run K-fold CV. `perm` relabels observations before the contiguous
/// split; without it fold `k` is the `k`-th block of the pooled order.
pub fn err_cvk<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    th: f64,
    k: usize,
    variant: Variant,
    perm: Option<&[usize]>,
) -> Result<EstimatorReport> {
    let p = make_partition(data.n(), k, perm)?;
    err_cvk_on(data, trainer, th, &p, variant)
}

/// Repeated K-fold CV over given shuffled partitions.
pub fn err_cvkr_on<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    th: f64,
    reps: &RepeatedPartition,
    variant: Variant,
) -> Result<EstimatorReport> {
    let m = reps.repetitions();
    if m == 0 {
        return Err(Error::Domain("CVKR needs at least one repetition".into()));
    }
    for p in &reps.maps {
        check_partition(data, p)?;
    }
    let runs: Vec<Vec<f64>> = reps
        .maps
        .iter()
        .enumerate()
        .map(|(r, p)| fold_losses(data, trainer, th, p, &format!("repetition {}/{m} ", r + 1)))
        .collect::<Result<_>>()?;
    let n = data.n();
    let value = match variant {
        Variant::Pooled => {
            let mut total = 0.0;
            for i in 0..n {
                total += runs.iter().map(|q| q[i]).sum::<f64>() / m as f64;
            }
            total / n as f64
        }
        Variant::Partitioned => {
            runs.iter().zip(&reps.maps).map(|(q, p)| partitioned_mean(q, p)).sum::<f64>() / m as f64
        }
        Variant::Reduced => return Err(Error::Domain("Reduced applies only to AUC CVK".into())),
    };
    let mut r = error_report(Version::Cvkr, variant, trainer, th, value);
    r.k = reps.maps.first().map(PartitionMap::fold_count);
    r.m = Some(m);
    r.seed = Some(reps.seed);
    Ok(r)
}

pub fn err_cvkr<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    th: f64,
    k: usize,
    m: usize,
    seed: u64,
    variant: Variant,
) -> Result<EstimatorReport> {
    let reps = repeated_partitions(data.n(), k, m, seed)?;
    err_cvkr_on(data, trainer, th, &reps, variant)
}

/// Monte-Carlo CV over given shuffled partitions: each run trains once
/// without fold 0 and tests on fold 0 only.
pub fn err_cvkm_on<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    th: f64,
    reps: &RepeatedPartition,
    variant: Variant,
    policy: CoveragePolicy,
) -> Result<EstimatorReport> {
    let m = reps.repetitions();
    if m == 0 {
        return Err(Error::Domain("CVKM needs at least one run".into()));
    }
    for p in &reps.maps {
        check_partition(data, p)?;
    }
    let runs: Vec<Result<Vec<f64>>> = reps
        .maps
        .par_iter()
        .enumerate()
        .map(|(r, p)| {
            pooled_losses(data, trainer, th, p.complement(0), p.members(0))
                .map_err(|e| Error::at(format!("run {}/{m}", r + 1), e))
        })
        .collect();
    let runs: Vec<Vec<f64>> = runs.into_iter().collect::<Result<_>>()?;
    let n = data.n();
    let (value, excluded) = match variant {
        Variant::Pooled => {
            let mut num = vec![0.0; n];
            let mut den = vec![0u64; n];
            for (p, losses) in reps.maps.iter().zip(&runs) {
                for (&i, &l) in p.members(0).iter().zip(losses) {
                    num[i] += l;
                    den[i] += 1;
                }
            }
            covered_ratio_mean(&num, &den, policy, "observation")?
        }
        Variant::Partitioned => {
            let v = runs.iter().map(|l| l.iter().sum::<f64>() / l.len() as f64).sum::<f64>() / m as f64;
            (v, 0)
        }
        Variant::Reduced => return Err(Error::Domain("Reduced applies only to AUC CVK".into())),
    };
    let mut r = error_report(Version::Cvkm, variant, trainer, th, value);
    r.k = reps.maps.first().map(PartitionMap::fold_count);
    r.m = Some(m);
    r.seed = Some(reps.seed);
    r.excluded_count = excluded;
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
pub fn err_cvkm<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    th: f64,
    k: usize,
    m: usize,
    seed: u64,
    variant: Variant,
    policy: CoveragePolicy,
) -> Result<EstimatorReport> {
    let reps = repeated_partitions(data.n(), k, m, seed)?;
    err_cvkm_on(data, trainer, th, &reps, variant, policy)
}

/// Draws `b` bootstrap samples of the pooled `n` observations. A sample
/// missing either class is redrawn from a fresh derived stream, up to
/// [`MAX_BOOTSTRAP_ATTEMPTS`] times.
pub fn draw_pooled_replicates(
    data: &StratifiedDataset,
    b: usize,
    seed: u64,
    model: SamplingModel,
) -> Result<Vec<BootstrapReplicate>> {
    if b == 0 {
        return Err(Error::Domain("bootstrap count B must be >= 1".into()));
    }
    let (n, n1) = (data.n(), data.n1());
    let draws: Vec<Result<BootstrapReplicate>> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = rng::derive_seed(seed, "loob", rep as u64);
            for attempt in 0..MAX_BOOTSTRAP_ATTEMPTS {
                let mut stream = rng::stream(rep_seed, "attempt", attempt as u64);
                let r = bootstrap_replicate_with(n, model, &mut stream)?;
                let (c1, c2) = r.counts().split_at(n1);
                if c1.iter().any(|&c| c > 0) && c2.iter().any(|&c| c > 0) {
                    return Ok(r);
                }
            }
            Err(Error::RetryExhausted { replicate: rep, attempts: MAX_BOOTSTRAP_ATTEMPTS })
        })
        .collect();
    draws.into_iter().collect()
}

/// Out-of-bag losses of one replicate: `(observation, loss)` pairs.
fn replicate_losses<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    th: f64,
    rep: &BootstrapReplicate,
) -> Result<Vec<(usize, f64)>> {
    let oob = rep.oob_indices();
    let losses = pooled_losses(data, trainer, th, rep.in_bag_indices(), &oob)?;
    Ok(oob.into_iter().zip(losses).collect())
}

/// Leave-one-out bootstrap over given replicates of the pooled sample.
///
/// Pooled is `Err^(1)`: per observation, the mean loss over replicates that
/// exclude it. Partitioned is `Err^(*)`: per replicate, the mean loss over its
/// out-of-bag set, then the mean over replicates. Replicates with an empty
/// out-of-bag set are skipped by the partitioned variant.
pub fn err_loob_on<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    th: f64,
    reps: &[BootstrapReplicate],
    variant: Variant,
    policy: CoveragePolicy,
) -> Result<EstimatorReport> {
    if reps.is_empty() {
        return Err(Error::Domain("bootstrap count B must be >= 1".into()));
    }
    let n = data.n();
    if let Some(bad) = reps.iter().find(|r| r.n() != n) {
        return Err(Error::Domain(format!("replicate over {} observations, dataset has {n}", bad.n())));
    }
    let per_rep: Vec<Result<Vec<(usize, f64)>>> = reps
        .par_iter()
        .enumerate()
        .map(|(b, r)| replicate_losses(data, trainer, th, r).map_err(|e| Error::at(format!("replicate {b}"), e)))
        .collect();
    let per_rep: Vec<Vec<(usize, f64)>> = per_rep.into_iter().collect::<Result<_>>()?;
    let (value, excluded) = match variant {
        Variant::Pooled => {
            let mut num = vec![0.0; n];
            let mut den = vec![0u64; n];
            for losses in &per_rep {
                for &(i, l) in losses {
                    num[i] += l;
                    den[i] += 1;
                }
            }
            covered_ratio_mean(&num, &den, policy, "observation")?
        }
        Variant::Partitioned => {
            let mut total = 0.0;
            let mut used = 0usize;
            for losses in per_rep.iter().filter(|l| !l.is_empty()) {
                total += losses.iter().map(|&(_, l)| l).sum::<f64>() / losses.len() as f64;
                used += 1;
            }
            if used == 0 {
                return Err(Error::NothingTested("every replicate contained all observations".into()));
            }
            (total / used as f64, reps.len() - used)
        }
        Variant::Reduced => return Err(Error::Domain("Reduced applies only to AUC CVK".into())),
    };
    let mut r = error_report(Version::Loob, variant, trainer, th, value);
    r.b = Some(reps.len());
    r.excluded_count = excluded;
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
pub fn err_loob<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    th: f64,
    b: usize,
    seed: u64,
    model: SamplingModel,
    variant: Variant,
    policy: CoveragePolicy,
) -> Result<EstimatorReport> {
    if data.n() < 2 {
        return Err(Error::Domain("LOOB needs n >= 2".into()));
    }
    let reps = draw_pooled_replicates(data, b, seed, model)?;
    let mut r = err_loob_on(data, trainer, th, &reps, variant, policy)?;
    r.seed = Some(seed);
    r.sampling_model = Some(model);
    Ok(r)
}
