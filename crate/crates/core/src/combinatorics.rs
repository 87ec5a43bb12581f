//! Exact arithmetic for out-of-bag counts of a bootstrap replicate drawn
//! uniformly from the `C(2n-1, n)` index multisets.
//!
//! Every identity has a closed form and an independent summation over the
//! pmf; [`verify_identities`] compares the two exactly.

use std::fmt;
use std::ops::{Add, Div, Mul, Sub};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

/// Normalized arbitrary-precision fraction with positive denominator.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExactRational(BigRational);

impl ExactRational {
    pub fn new(numer: impl Into<BigInt>, denom: impl Into<BigInt>) -> Self {
        ExactRational(BigRational::new(numer.into(), denom.into()))
    }

    pub fn integer(v: impl Into<BigInt>) -> Self {
        ExactRational(BigRational::from_integer(v.into()))
    }

    pub fn zero() -> Self {
        ExactRational(BigRational::zero())
    }

    pub fn one() -> Self {
        ExactRational(BigRational::one())
    }

    fn from_uints(numer: BigUint, denom: BigUint) -> Self {
        Self::new(BigInt::from(numer), BigInt::from(denom))
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl fmt::Display for ExactRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

macro_rules! forward_binop {
    ($tr:ident, $method:ident) => {
        impl $tr for ExactRational {
            type Output = ExactRational;
            fn $method(self, rhs: ExactRational) -> ExactRational {
                ExactRational(self.0.$method(rhs.0))
            }
        }

        impl<'a> $tr<&'a ExactRational> for &'a ExactRational {
            type Output = ExactRational;
            fn $method(self, rhs: &'a ExactRational) -> ExactRational {
                ExactRational((&self.0).$method(&rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);
forward_binop!(Div, div);

impl std::iter::Sum for ExactRational {
    fn sum<I: Iterator<Item = ExactRational>>(iter: I) -> Self {
        iter.fold(ExactRational::zero(), |a, b| a + b)
    }
}

/// `C(n, k)`, zero when `k < 0` or `k > n`.
pub fn binom(n: u64, k: i64) -> BigUint {
    if k < 0 || k as u64 > n {
        return BigUint::zero();
    }
    let k = (k as u64).min(n - k as u64);
    let mut acc = BigUint::one();
    for i in 0..k {
        // exact at every step: acc = C(n, i) before the update
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

fn binom_signed(n: i64, k: i64) -> BigUint {
    if n < 0 {
        BigUint::zero()
    } else {
        binom(n as u64, k)
    }
}

/// `Pr[a = k]` when drawing `m` of `n` symbols with replacement, unordered:
/// `C(n,k)·C(m-1, k+m-n) / C(m+n-1, m)`.
pub fn pmf_unseen_count(n: u64, m: u64, k: i64) -> ExactRational {
    assert!(n >= 1 && m >= 1, "pmf_unseen_count needs n, m >= 1");
    let (ni, mi) = (n as i64, m as i64);
    let numer = binom(n, k) * binom_signed(mi - 1, k + mi - ni);
    ExactRational::from_uints(numer, binom(n + m - 1, m as i64))
}

/// `E[a_b] = n(n-1)/(2n-1)`.
pub fn expected_unseen(n: u64) -> ExactRational {
    assert!(n >= 1);
    ExactRational::new(n * (n - 1), 2 * n - 1)
}

/// `Σ_k k·Pr[a_b = k]`.
pub fn expected_unseen_from_pmf(n: u64) -> ExactRational {
    (0..n as i64)
        .map(|k| ExactRational::integer(k) * pmf_unseen_count(n, n, k))
        .sum()
}

/// `E[1/(1+a_b)] = 2/(n+1)`.
pub fn expected_inv_one_plus_unseen(n: u64) -> ExactRational {
    assert!(n >= 1);
    ExactRational::new(2u64, n + 1)
}

pub fn expected_inv_one_plus_unseen_from_pmf(n: u64) -> ExactRational {
    (0..n as i64)
        .map(|k| pmf_unseen_count(n, n, k) / ExactRational::integer(k + 1))
        .sum()
}

/// `Pr[observation i is in the replicate] = n/(2n-1)`.
pub fn inclusion_probability(n: u64) -> ExactRational {
    assert!(n >= 1);
    ExactRational::new(n, 2 * n - 1)
}

/// Complement route: the replicate avoids `i` iff it is a size-`n` multiset
/// over the other `n-1` symbols, so `1 - C(2n-2, n)/C(2n-1, n)`.
pub fn inclusion_probability_by_complement(n: u64) -> ExactRational {
    assert!(n >= 1);
    let absent = ExactRational::from_uints(binom(2 * n - 2, n as i64), binom(2 * n - 1, n as i64));
    ExactRational::one() - absent
}

/// Mean of the per-observation weight `w = n·I_i/a_b` (taken as 0 when
/// `a_b = 0`). Summing `w` over `i` gives `n·[a_b > 0]`, so by symmetry the
/// mean is `Pr[a_b ≠ 0] = 1 - 1/C(2n-1, n)`.
pub fn expected_oob_weight(n: u64) -> ExactRational {
    assert!(n >= 1);
    ExactRational::one() - pmf_unseen_count(n, n, 0)
}

/// Conditional route to the same mean: given that `i` is absent, the other
/// absences come from drawing `n` of the remaining `n-1` symbols, so
/// `E[w] = Pr[I_i = 1] · n · Σ_k Pr[a' = k]/(1+k)` with `a' ~ pmf(n-1, n, ·)`.
pub fn expected_oob_weight_conditional(n: u64) -> ExactRational {
    assert!(n >= 1);
    if n == 1 {
        return ExactRational::zero();
    }
    let absent = ExactRational::one() - inclusion_probability(n);
    let inner: ExactRational = (0..n as i64 - 1)
        .map(|k| pmf_unseen_count(n - 1, n, k) / ExactRational::integer(k + 1))
        .sum();
    absent * ExactRational::integer(n) * inner
}

/// The published closed form `(2n-2)/(2n-1)` for the mean weight. It equals
/// [`expected_oob_weight`] only at `n = 2`; kept as the reference curve for
/// the bootstrap variant-ratio experiment.
pub fn stated_oob_weight_mean(n: u64) -> ExactRational {
    assert!(n >= 1);
    ExactRational::new(2 * n - 2, 2 * n - 1)
}

/// Visits every size-`n` multiset over `0..n` (as a count vector), via the
/// `n`-subsets of `0..2n-1`.
pub fn for_each_multiset(n: usize, mut visit: impl FnMut(&[u32])) {
    assert!(n >= 1);
    let universe = 2 * n - 1;
    let mut subset: Vec<usize> = (0..n).collect();
    let mut counts = vec![0u32; n];
    loop {
        counts.iter_mut().for_each(|c| *c = 0);
        for (k, &s) in subset.iter().enumerate() {
            counts[s - k] += 1;
        }
        visit(&counts);
        // next combination in lexicographic order
        let mut pos = n;
        while pos > 0 && subset[pos - 1] == universe - n + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return;
        }
        subset[pos - 1] += 1;
        for t in pos..n {
            subset[t] = subset[t - 1] + 1;
        }
    }
}

/// Exact `a_b` distribution obtained by enumerating all multisets.
pub fn enumerated_unseen_pmf(n: usize) -> Vec<ExactRational> {
    let mut tally = vec![0u64; n + 1];
    let mut total = 0u64;
    for_each_multiset(n, |counts| {
        tally[counts.iter().filter(|&&c| c == 0).count()] += 1;
        total += 1;
    });
    tally.into_iter().map(|t| ExactRational::new(t, total)).collect()
}

/// Exact `E[n·I_0/a_b]` by enumeration.
pub fn enumerated_oob_weight_mean(n: usize) -> ExactRational {
    let mut acc = ExactRational::zero();
    let mut total = 0u64;
    for_each_multiset(n, |counts| {
        total += 1;
        let unseen = counts.iter().filter(|&&c| c == 0).count();
        if counts[0] == 0 {
            acc = &acc + &ExactRational::new(n as u64, unseen as u64);
        }
    });
    acc / ExactRational::integer(total)
}

/// Pascal rows `0..=max_n` for repeated exact lookups.
pub struct BinomialTable {
    rows: Vec<Vec<BigUint>>,
}

impl BinomialTable {
    pub fn new(max_n: usize) -> Self {
        let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(max_n + 1);
        rows.push(vec![BigUint::one()]);
        for r in 1..=max_n {
            let prev = &rows[r - 1];
            let mut row = Vec::with_capacity(r + 1);
            row.push(BigUint::one());
            for k in 1..r {
                row.push(&prev[k - 1] + &prev[k]);
            }
            row.push(BigUint::one());
            rows.push(row);
        }
        BinomialTable { rows }
    }

    pub fn get(&self, n: i64, k: i64) -> BigUint {
        if n < 0 || k < 0 || k > n {
            return BigUint::zero();
        }
        self.rows[n as usize][k as usize].clone()
    }

    fn pmf_numerator(&self, n: i64, m: i64, k: i64) -> BigUint {
        self.get(n, k) * self.get(m - 1, k + m - n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Identity {
    PmfNormalization,
    ExpectedUnseen,
    ExpectedInverseOnePlusUnseen,
    InclusionProbability,
    OobWeightMean,
}

impl Identity {
    pub fn name(self) -> &'static str {
        match self {
            Identity::PmfNormalization => "pmf-normalization",
            Identity::ExpectedUnseen => "expected-unseen",
            Identity::ExpectedInverseOnePlusUnseen => "expected-inverse-one-plus-unseen",
            Identity::InclusionProbability => "inclusion-probability",
            Identity::OobWeightMean => "oob-weight-mean",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityCheck {
    pub identity: Identity,
    pub n: u64,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<IdentityCheck>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &IdentityCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct VerifyOptions {
    /// Adds `1/C(2n-1,n)` to `Pr[a_b = 0]` before checking; exercises the
    /// failure path of the harness.
    pub perturb_pmf: bool,
}

/// Checks every identity exactly for `2 ≤ n ≤ n_max` (with `m = n`).
pub fn verify_identities(n_max: u64, opts: VerifyOptions) -> VerifyReport {
    let table = BinomialTable::new((2 * n_max).max(2) as usize);
    let mut report = VerifyReport::default();
    for n in 2..=n_max {
        let ni = n as i64;
        let den = table.get(2 * ni - 1, ni);
        let mut numers: Vec<BigUint> = (0..ni).map(|k| table.pmf_numerator(ni, ni, k)).collect();
        if opts.perturb_pmf {
            numers[0] += BigUint::one();
        }
        let mut push = |identity: Identity, lhs: ExactRational, rhs: ExactRational| {
            let pass = lhs == rhs;
            let detail = if pass { lhs.to_string() } else { format!("{lhs} != {rhs}") };
            report.checks.push(IdentityCheck { identity, n, pass, detail });
        };

        let mass: BigUint = numers.iter().sum();
        push(
            Identity::PmfNormalization,
            ExactRational::from_uints(mass, den.clone()),
            ExactRational::one(),
        );

        let first: BigUint = numers.iter().enumerate().map(|(k, v)| v * BigUint::from(k)).sum();
        let mean = ExactRational::from_uints(first, den.clone());
        push(Identity::ExpectedUnseen, mean.clone(), expected_unseen(n));

        let inv: ExactRational = numers
            .iter()
            .enumerate()
            .map(|(k, v)| ExactRational::from_uints(v.clone(), &den * BigUint::from(k + 1)))
            .sum();
        push(Identity::ExpectedInverseOnePlusUnseen, inv, expected_inv_one_plus_unseen(n));

        let by_mean = ExactRational::one() - mean / ExactRational::integer(n);
        push(Identity::InclusionProbability, by_mean, inclusion_probability(n));

        let zero_mass = ExactRational::from_uints(numers[0].clone(), den.clone());
        push(
            Identity::OobWeightMean,
            ExactRational::one() - zero_mass,
            expected_oob_weight_conditional(n),
        );
    }
    report
}

/// `Σ_k pmf(n, m, k) = 1` via the integer (Vandermonde) form.
pub fn pmf_normalizes(table: &BinomialTable, n: u64, m: u64) -> bool {
    let (ni, mi) = (n as i64, m as i64);
    let mass: BigUint = (0..=ni).map(|k| table.pmf_numerator(ni, mi, k)).sum();
    mass == table.get(ni + mi - 1, mi)
}
