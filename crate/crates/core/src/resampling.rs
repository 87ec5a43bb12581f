//! Fold assignment and bootstrap replicates.
//!
//! All indices are zero-based: observation `i ∈ 0..n`, fold `k ∈ 0..K`. The
//! contiguous map sends `i` to `⌊i / n_K⌋`, so fold `k` holds
//! `k·n_K .. (k+1)·n_K`.

use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionMap {
    assign: Vec<usize>,
    folds: Vec<Vec<usize>>,
}

impl PartitionMap {
    pub fn n(&self) -> usize {
        self.assign.len()
    }

    pub fn fold_count(&self) -> usize {
        self.folds.len()
    }

    pub fn fold_size(&self) -> usize {
        self.n() / self.fold_count()
    }

    pub fn fold_of(&self, i: usize) -> usize {
        self.assign[i]
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assign
    }

    /// Observations in fold `k`, ascending.
    pub fn members(&self, k: usize) -> &[usize] {
        &self.folds[k]
    }

    /// Observations outside fold `k`, ascending.
    pub fn complement(&self, k: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.assign[i] != k).collect()
    }
}

fn check_divisible(n: usize, k: usize) -> Result<()> {
    if n == 0 || k == 0 {
        return Err(Error::Domain(format!("need n >= 1 and K >= 1, got n = {n}, K = {k}")));
    }
    if !n.is_multiple_of(k) {
        return Err(Error::Divisibility { n, k });
    }
    Ok(())
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    if perm.len() != n {
        return Err(Error::Domain(format!("permutation has length {}, expected {n}", perm.len())));
    }
    let mut seen = vec![false; n];
    for &v in perm {
        if v >= n || seen[v] {
            return Err(Error::Domain("permutation is not a bijection on 0..n".into()));
        }
        seen[v] = true;
    }
    Ok(())
}

/// Equal-block partition of `0..n` into `k` folds, optionally composed with a
/// relabeling: `assign(i) = block(perm[i])`.
pub fn make_partition(n: usize, k: usize, perm: Option<&[usize]>) -> Result<PartitionMap> {
    check_divisible(n, k)?;
    let size = n / k;
    let assign: Vec<usize> = match perm {
        None => (0..n).map(|i| i / size).collect(),
        Some(perm) => {
            check_permutation(perm, n)?;
            perm.iter().map(|&r| r / size).collect()
        }
    };
    let mut folds = vec![Vec::with_capacity(size); k];
    for (i, &f) in assign.iter().enumerate() {
        folds[f].push(i);
    }
    Ok(PartitionMap { assign, folds })
}

/// Uniform random permutation of `0..n` (Fisher-Yates).
pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// `M` shuffled copies of the contiguous partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepeatedPartition {
    pub maps: Vec<PartitionMap>,
    pub perms: Vec<Vec<usize>>,
    pub seed: u64,
}

impl RepeatedPartition {
    pub fn repetitions(&self) -> usize {
        self.maps.len()
    }
}

fn repeated_with_tag(n: usize, k: usize, m: usize, seed: u64, tag: &str) -> Result<RepeatedPartition> {
    check_divisible(n, k)?;
    if m == 0 {
        return Err(Error::Domain("repetition count M must be >= 1".into()));
    }
    let mut maps = Vec::with_capacity(m);
    let mut perms = Vec::with_capacity(m);
    for r in 0..m {
        let perm = random_permutation(n, &mut rng::stream(seed, tag, r as u64));
        maps.push(make_partition(n, k, Some(&perm))?);
        perms.push(perm);
    }
    Ok(RepeatedPartition { maps, perms, seed })
}

pub fn repeated_partitions(n: usize, k: usize, m: usize, seed: u64) -> Result<RepeatedPartition> {
    repeated_with_tag(n, k, m, seed, "partition")
}

/// Independent partitions of the two classes; `K1` and `K2` may differ.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StratifiedPartition {
    pub class1: PartitionMap,
    pub class2: PartitionMap,
}

pub fn stratified_partition(
    n1: usize,
    k1: usize,
    n2: usize,
    k2: usize,
    perms: Option<(&[usize], &[usize])>,
) -> Result<StratifiedPartition> {
    let (p1, p2) = match perms {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    };
    Ok(StratifiedPartition {
        class1: make_partition(n1, k1, p1)?,
        class2: make_partition(n2, k2, p2)?,
    })
}

pub fn repeated_stratified_partitions(
    n1: usize,
    k1: usize,
    n2: usize,
    k2: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<StratifiedPartition>> {
    let c1 = repeated_with_tag(n1, k1, m, seed, "partition/class1")?;
    let c2 = repeated_with_tag(n2, k2, m, seed, "partition/class2")?;
    Ok(c1
        .maps
        .into_iter()
        .zip(c2.maps)
        .map(|(class1, class2)| StratifiedPartition { class1, class2 })
        .collect())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingModel {
    /// `n` i.i.d. uniform index draws.
    #[default]
    Ordered,
    /// Uniform over the `C(2n-1, n)` index multisets.
    #[serde(rename = "multiset")]
    UnorderedMultiset,
}

impl fmt::Display for SamplingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingModel::Ordered => "ordered",
            SamplingModel::UnorderedMultiset => "multiset",
        })
    }
}

impl FromStr for SamplingModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ordered" => Ok(SamplingModel::Ordered),
            "multiset" | "unordered" | "unordered-multiset" => Ok(SamplingModel::UnorderedMultiset),
            other => Err(Error::Config(format!("unknown sampling model `{other}`"))),
        }
    }
}

/// Multiplicity of each original observation in one bootstrap sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BootstrapReplicate {
    counts: Vec<u32>,
    oob: Vec<bool>,
    unseen: usize,
}

impl BootstrapReplicate {
    /// Counts must sum to their own length.
    pub fn from_counts(counts: Vec<u32>) -> Result<Self> {
        let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        if counts.is_empty() || total != counts.len() as u64 {
            return Err(Error::Domain(format!(
                "bootstrap counts must sum to n = {}, got {total}",
                counts.len()
            )));
        }
        let oob: Vec<bool> = counts.iter().map(|&c| c == 0).collect();
        let unseen = oob.iter().filter(|&&b| b).count();
        Ok(BootstrapReplicate { counts, oob, unseen })
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// `oob()[i]` is true when observation `i` is absent from the sample.
    pub fn oob(&self) -> &[bool] {
        &self.oob
    }

    /// Number of absent observations, `a_b`.
    pub fn unseen(&self) -> usize {
        self.unseen
    }

    pub fn oob_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.oob[i]).collect()
    }

    /// Sample members with repetition, ascending.
    pub fn in_bag_indices(&self) -> Vec<usize> {
        self.counts
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(i, c as usize))
            .collect()
    }
}

/// Stars-and-bars decoding: an ascending `n`-subset `s` of `0..2n-1` maps to
/// the multiset with elements `s[k] - k`.
pub fn decode_multiset(n: usize, subset: &[usize]) -> Result<Vec<u32>> {
    if subset.len() != n || n == 0 {
        return Err(Error::Domain(format!("need an {n}-subset, got {} elements", subset.len())));
    }
    let mut counts = vec![0u32; n];
    for (k, &s) in subset.iter().enumerate() {
        if s < k || s - k >= n || (k > 0 && s <= subset[k - 1]) {
            return Err(Error::Domain("subset must be strictly ascending within 0..2n-1".into()));
        }
        counts[s - k] += 1;
    }
    Ok(counts)
}

pub fn bootstrap_replicate_with<R: Rng + ?Sized>(n: usize, model: SamplingModel, rng: &mut R) -> Result<BootstrapReplicate> {
    if n < 2 {
        return Err(Error::Domain(format!("bootstrap needs n >= 2, got {n}")));
    }
    let counts = match model {
        SamplingModel::Ordered => {
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            counts
        }
        SamplingModel::UnorderedMultiset => {
            let mut subset = index::sample(rng, 2 * n - 1, n).into_vec();
            subset.sort_unstable();
            decode_multiset(n, &subset)?
        }
    };
    BootstrapReplicate::from_counts(counts)
}

pub fn bootstrap_replicate(n: usize, model: SamplingModel, seed: u64) -> Result<BootstrapReplicate> {
    bootstrap_replicate_with(n, model, &mut rng::stream(seed, "bootstrap", 0))
}

/// `I_i · I_j` for class-1 replicate `rep1` and class-2 replicate `rep2`.
pub fn pair_oob_indicators(rep1: &BootstrapReplicate, rep2: &BootstrapReplicate) -> Vec<Vec<u8>> {
    rep1.oob()
        .iter()
        .map(|&a| rep2.oob().iter().map(|&b| u8::from(a && b)).collect())
        .collect()
}
