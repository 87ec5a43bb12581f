use rayon::prelude::*;

use super::{covered_ratio_mean, finite_score, CoveragePolicy, EstimatorReport, Metric, Variant, Version};
use crate::domain::{empirical_auc, psi, ScoringRule, StratifiedDataset, Trainer, TrainingSet};
use crate::error::{Error, Result};
use crate::resampling::{
    bootstrap_replicate, repeated_stratified_partitions, stratified_partition, BootstrapReplicate,
    SamplingModel, StratifiedPartition,
};
use crate::rng;

/// Scores of the held-out class-1 and class-2 points under one trained rule.
struct BlockScores {
    s1: Vec<f64>,
    s2: Vec<f64>,
}

impl BlockScores {
    fn psi_sum(&self) -> f64 {
        let mut total = 0.0;
        for &a in &self.s1 {
            for &b in &self.s2 {
                total += psi(a, b);
            }
        }
        total
    }
}

fn train_and_score<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    train: (Vec<usize>, Vec<usize>),
    test1: &[usize],
    test2: &[usize],
) -> Result<BlockScores> {
    let set = TrainingSet::new(data, train.0, train.1);
    set.ensure_two_classes()?;
    let rule = trainer.train(&set)?;
    let s1 = test1.iter().map(|&i| finite_score(rule.score(data.class1_row(i)))).collect::<Result<_>>()?;
    let s2 = test2.iter().map(|&j| finite_score(rule.score(data.class2_row(j)))).collect::<Result<_>>()?;
    Ok(BlockScores { s1, s2 })
}

fn auc_report<T: Trainer>(version: Version, variant: Variant, trainer: &T, value: f64) -> EstimatorReport {
    EstimatorReport::new(version, variant, Metric::Auc, trainer.id(), value)
}

fn check_sizes(data: &StratifiedDataset, p: &StratifiedPartition) -> Result<()> {
    if p.class1.n() != data.n1() || p.class2.n() != data.n2() {
        return Err(Error::Domain(format!(
            "partition covers {}+{} observations, dataset has {}+{}",
            p.class1.n(),
            p.class2.n(),
            data.n1(),
            data.n2()
        )));
    }
    Ok(())
}

/// Leave-pair-out CV: one training per pair `(i, j)` without `x_i` and `y_j`.
pub fn auc_cvn<T: Trainer>(data: &StratifiedDataset, trainer: &T) -> Result<EstimatorReport> {
    let (n1, n2) = (data.n1(), data.n2());
    if n1 < 2 || n2 < 2 {
        return Err(Error::Domain("AUC CVN needs n1 >= 2 and n2 >= 2".into()));
    }
    let pairs: Vec<Result<f64>> = (0..n1 * n2)
        .into_par_iter()
        .map(|pair| {
            let (i, j) = (pair / n2, pair % n2);
            let train = ((0..n1).filter(|&a| a != i).collect(), (0..n2).filter(|&b| b != j).collect());
            train_and_score(data, trainer, train, &[i], &[j])
                .map(|s| psi(s.s1[0], s.s2[0]))
                .map_err(|e| Error::at(format!("held-out pair ({i}, {j})"), e))
        })
        .collect();
    let mut total = 0.0;
    for v in pairs {
        total += v?;
    }
    Ok(auc_report(Version::Cvn, Variant::Pooled, trainer, total / (n1 * n2) as f64))
}

/// Trains once per fold pair `(k1, k2)` and returns the per-pair kernel
/// matrix `q[i * n2 + j]` along with the per-block kernel sums.
fn fold_pair_kernels<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    p: &StratifiedPartition,
    stage: &str,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (kk1, kk2) = (p.class1.fold_count(), p.class2.fold_count());
    let blocks: Vec<Result<BlockScores>> = (0..kk1 * kk2)
        .into_par_iter()
        .map(|blk| {
            let (k1, k2) = (blk / kk2, blk % kk2);
            let train = (p.class1.complement(k1), p.class2.complement(k2));
            train_and_score(data, trainer, train, p.class1.members(k1), p.class2.members(k2))
                .map_err(|e| Error::at(format!("{stage}fold pair ({}/{kk1}, {}/{kk2})", k1 + 1, k2 + 1), e))
        })
        .collect();
    let n2 = data.n2();
    let mut q = vec![0.0; data.n1() * n2];
    let mut sums = Vec::with_capacity(blocks.len());
    for (blk, scores) in blocks.into_iter().enumerate() {
        let scores = scores?;
        let (k1, k2) = (blk / kk2, blk % kk2);
        for (&i, &a) in p.class1.members(k1).iter().zip(&scores.s1) {
            for (&j, &b) in p.class2.members(k2).iter().zip(&scores.s2) {
                q[i * n2 + j] = psi(a, b);
            }
        }
        sums.push(scores.psi_sum());
    }
    Ok((q, sums))
}

fn partitioned_auc(block_sums: &[f64], p: &StratifiedPartition) -> f64 {
    let cell = (p.class1.fold_size() * p.class2.fold_size()) as f64;
    block_sums.iter().map(|s| s / cell).sum::<f64>() / block_sums.len() as f64
}

fn reduced_auc<T: Trainer>(data: &StratifiedDataset, trainer: &T, p: &StratifiedPartition) -> Result<f64> {
    let k = p.class1.fold_count();
    if p.class2.fold_count() != k {
        return Err(Error::Domain(format!(
            "Reduced CVK needs K1 = K2 (got {k} and {})",
            p.class2.fold_count()
        )));
    }
    let blocks: Vec<Result<BlockScores>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train = (p.class1.complement(f), p.class2.complement(f));
            train_and_score(data, trainer, train, p.class1.members(f), p.class2.members(f))
                .map_err(|e| Error::at(format!("fold {}/{k}", f + 1), e))
        })
        .collect();
    let cell = (p.class1.fold_size() * p.class2.fold_size()) as f64;
    let mut total = 0.0;
    for b in blocks {
        total += b?.psi_sum() / cell;
    }
    Ok(total / k as f64)
}

/// One-run stratified K-fold CV of the AUC over a given partition.
pub fn auc_cvk_on<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    partition: &StratifiedPartition,
    variant: Variant,
) -> Result<EstimatorReport> {
    check_sizes(data, partition)?;
    let value = match variant {
        Variant::Pooled => {
            let (q, _) = fold_pair_kernels(data, trainer, partition, "")?;
            q.iter().sum::<f64>() / q.len() as f64
        }
        Variant::Partitioned => {
            let (_, sums) = fold_pair_kernels(data, trainer, partition, "")?;
            partitioned_auc(&sums, partition)
        }
        Variant::Reduced => reduced_auc(data, trainer, partition)?,
    };
    let mut r = auc_report(Version::Cvk, variant, trainer, value);
    r.k1 = Some(partition.class1.fold_count());
    r.k2 = Some(partition.class2.fold_count());
    Ok(r)
}

pub fn auc_cvk<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    k1: usize,
    k2: usize,
    variant: Variant,
    perms: Option<(&[usize], &[usize])>,
) -> Result<EstimatorReport> {
    let p = stratified_partition(data.n1(), k1, data.n2(), k2, perms)?;
    auc_cvk_on(data, trainer, &p, variant)
}

fn check_runs(data: &StratifiedDataset, runs: &[StratifiedPartition], what: &str) -> Result<()> {
    if runs.is_empty() {
        return Err(Error::Domain(format!("{what} needs at least one repetition")));
    }
    runs.iter().try_for_each(|p| check_sizes(data, p))
}

/// Repeated stratified K-fold CV of the AUC over given partitions.
pub fn auc_cvkr_on<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    runs: &[StratifiedPartition],
    variant: Variant,
) -> Result<EstimatorReport> {
    check_runs(data, runs, "CVKR")?;
    let m = runs.len();
    let kernels: Vec<(Vec<f64>, Vec<f64>)> = runs
        .iter()
        .enumerate()
        .map(|(r, p)| fold_pair_kernels(data, trainer, p, &format!("repetition {}/{m} ", r + 1)))
        .collect::<Result<_>>()?;
    let value = match variant {
        Variant::Pooled => {
            let pairs = data.n1() * data.n2();
            let mut total = 0.0;
            for pair in 0..pairs {
                total += kernels.iter().map(|(q, _)| q[pair]).sum::<f64>() / m as f64;
            }
            total / pairs as f64
        }
        Variant::Partitioned => {
            kernels.iter().zip(runs).map(|((_, sums), p)| partitioned_auc(sums, p)).sum::<f64>() / m as f64
        }
        Variant::Reduced => return Err(Error::Domain("Reduced applies only to AUC CVK".into())),
    };
    let mut r = auc_report(Version::Cvkr, variant, trainer, value);
    r.k1 = Some(runs[0].class1.fold_count());
    r.k2 = Some(runs[0].class2.fold_count());
    r.m = Some(m);
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
pub fn auc_cvkr<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    k1: usize,
    k2: usize,
    m: usize,
    seed: u64,
    variant: Variant,
) -> Result<EstimatorReport> {
    let runs = repeated_stratified_partitions(data.n1(), k1, data.n2(), k2, m, seed)?;
    let mut r = auc_cvkr_on(data, trainer, &runs, variant)?;
    r.seed = Some(seed);
    Ok(r)
}

/// Monte-Carlo CV of the AUC: each run trains once without fold 0 of either
/// class and scores the pairs across the two held-out folds.
pub fn auc_cvkm_on<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    runs: &[StratifiedPartition],
    variant: Variant,
    policy: CoveragePolicy,
) -> Result<EstimatorReport> {
    check_runs(data, runs, "CVKM")?;
    let m = runs.len();
    let scores: Vec<Result<BlockScores>> = runs
        .par_iter()
        .enumerate()
        .map(|(r, p)| {
            let train = (p.class1.complement(0), p.class2.complement(0));
            train_and_score(data, trainer, train, p.class1.members(0), p.class2.members(0))
                .map_err(|e| Error::at(format!("run {}/{m}", r + 1), e))
        })
        .collect();
    let scores: Vec<BlockScores> = scores.into_iter().collect::<Result<_>>()?;
    let (value, excluded) = match variant {
        Variant::Pooled => {
            let n2 = data.n2();
            let mut num = vec![0.0; data.n1() * n2];
            let mut den = vec![0u64; data.n1() * n2];
            for (p, s) in runs.iter().zip(&scores) {
                accumulate_pairs(&mut num, &mut den, n2, p.class1.members(0), p.class2.members(0), s);
            }
            covered_ratio_mean(&num, &den, policy, "pair")?
        }
        Variant::Partitioned => {
            let v = scores
                .iter()
                .map(|s| s.psi_sum() / (s.s1.len() * s.s2.len()) as f64)
                .sum::<f64>()
                / m as f64;
            (v, 0)
        }
        Variant::Reduced => return Err(Error::Domain("Reduced applies only to AUC CVK".into())),
    };
    let mut r = auc_report(Version::Cvkm, variant, trainer, value);
    r.k1 = Some(runs[0].class1.fold_count());
    r.k2 = Some(runs[0].class2.fold_count());
    r.m = Some(m);
    r.excluded_count = excluded;
    Ok(r)
}

fn accumulate_pairs(num: &mut [f64], den: &mut [u64], n2: usize, test1: &[usize], test2: &[usize], s: &BlockScores) {
    for (&i, &a) in test1.iter().zip(&s.s1) {
        for (&j, &b) in test2.iter().zip(&s.s2) {
            num[i * n2 + j] += psi(a, b);
            den[i * n2 + j] += 1;
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn auc_cvkm<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    k1: usize,
    k2: usize,
    m: usize,
    seed: u64,
    variant: Variant,
    policy: CoveragePolicy,
) -> Result<EstimatorReport> {
    let runs = repeated_stratified_partitions(data.n1(), k1, data.n2(), k2, m, seed)?;
    let mut r = auc_cvkm_on(data, trainer, &runs, variant, policy)?;
    r.seed = Some(seed);
    Ok(r)
}

/// `b` pairs of independent per-class bootstrap replicates.
pub fn draw_stratified_replicates(
    data: &StratifiedDataset,
    b: usize,
    seed: u64,
    model: SamplingModel,
) -> Result<Vec<(BootstrapReplicate, BootstrapReplicate)>> {
    if b == 0 {
        return Err(Error::Domain("bootstrap count B must be >= 1".into()));
    }
    (0..b as u64)
        .map(|rep| {
            Ok((
                bootstrap_replicate(data.n1(), model, rng::derive_seed(seed, "lpobs/class1", rep))?,
                bootstrap_replicate(data.n2(), model, rng::derive_seed(seed, "lpobs/class2", rep))?,
            ))
        })
        .collect()
}

/// Leave-pair-out bootstrap over given stratified replicates.
///
/// Pooled is `AUC^(1,1)`: per pair, the mean kernel over replicates leaving
/// out both members. Partitioned is `AUC^(*)`: per replicate, the AUC over
/// its out-of-bag pairs, then the mean over replicates; replicates with an
/// empty out-of-bag set in either class are skipped and counted.
pub fn auc_lpobs_on<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    reps: &[(BootstrapReplicate, BootstrapReplicate)],
    variant: Variant,
    policy: CoveragePolicy,
) -> Result<EstimatorReport> {
    if reps.is_empty() {
        return Err(Error::Domain("bootstrap count B must be >= 1".into()));
    }
    let (n1, n2) = (data.n1(), data.n2());
    if let Some((a, b)) = reps.iter().find(|(a, b)| a.n() != n1 || b.n() != n2) {
        return Err(Error::Domain(format!(
            "replicate over {}+{} observations, dataset has {n1}+{n2}",
            a.n(),
            b.n()
        )));
    }
    let scored: Vec<Result<(Vec<usize>, Vec<usize>, BlockScores)>> = reps
        .par_iter()
        .enumerate()
        .map(|(b, (r1, r2))| {
            let (t1, t2) = (r1.oob_indices(), r2.oob_indices());
            if t1.is_empty() || t2.is_empty() {
                return Ok((t1, t2, BlockScores { s1: Vec::new(), s2: Vec::new() }));
            }
            let s = train_and_score(data, trainer, (r1.in_bag_indices(), r2.in_bag_indices()), &t1, &t2)
                .map_err(|e| Error::at(format!("replicate {b}"), e))?;
            Ok((t1, t2, s))
        })
        .collect();
    let scored: Vec<_> = scored.into_iter().collect::<Result<_>>()?;
    let (value, excluded) = match variant {
        Variant::Pooled => {
            let mut num = vec![0.0; n1 * n2];
            let mut den = vec![0u64; n1 * n2];
            for (t1, t2, s) in &scored {
                accumulate_pairs(&mut num, &mut den, n2, t1, t2, s);
            }
            covered_ratio_mean(&num, &den, policy, "pair")?
        }
        Variant::Partitioned => {
            let mut total = 0.0;
            let mut used = 0usize;
            for (_, _, s) in scored.iter().filter(|(_, _, s)| !s.s1.is_empty() && !s.s2.is_empty()) {
                total += empirical_auc(&s.s1, &s.s2)?;
                used += 1;
            }
            if used == 0 {
                return Err(Error::NothingTested("no replicate left out members of both classes".into()));
            }
            (total / used as f64, reps.len() - used)
        }
        Variant::Reduced => return Err(Error::Domain("Reduced applies only to AUC CVK".into())),
    };
    let mut r = auc_report(Version::Loob, variant, trainer, value);
    r.b = Some(reps.len());
    r.excluded_count = excluded;
    Ok(r)
}

#[allow(clippy::too_many_arguments)]
pub fn auc_lpobs<T: Trainer>(
    data: &StratifiedDataset,
    trainer: &T,
    b: usize,
    seed: u64,
    model: SamplingModel,
    variant: Variant,
    policy: CoveragePolicy,
) -> Result<EstimatorReport> {
    if data.n1() < 2 || data.n2() < 2 {
        return Err(Error::Domain("LPOBS needs n1 >= 2 and n2 >= 2".into()));
    }
    let reps = draw_stratified_replicates(data, b, seed, model)?;
    let mut r = auc_lpobs_on(data, trainer, &reps, variant, policy)?;
    r.seed = Some(seed);
    r.sampling_model = Some(model);
    Ok(r)
}
