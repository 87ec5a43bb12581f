//! Two-class datasets, the scoring-rule abstraction, the zero-one loss and the
//! Mann-Whitney kernel.
//!
//! Orientation convention: higher scores mean class 2. A useful rule therefore
//! has AUC above one half, and a point is assigned to class 2 when its score
//! is at or above the threshold.

use std::borrow::Cow;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Class {
    One,
    Two,
}

impl Class {
    pub fn tag(self) -> u8 {
        match self {
            Class::One => 1,
            Class::Two => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            1 => Ok(Class::One),
            2 => Ok(Class::Two),
            other => Err(Error::Domain(format!("class tag must be 1 or 2, got {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledPoint {
    features: Vec<f64>,
    label: Class,
}

impl LabeledPoint {
    pub fn new(features: Vec<f64>, label: Class) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Domain("a point needs at least one feature".into()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite feature value".into()));
        }
        Ok(LabeledPoint { features, label })
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn label(&self) -> Class {
        self.label
    }
}

/// Feature matrices for class 1 (`n1 × p`) and class 2 (`n2 × p`), stored
/// row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct StratifiedDataset {
    class1: Vec<f64>,
    class2: Vec<f64>,
    p: usize,
}

impl StratifiedDataset {
    /// Builds a dataset from flat row-major buffers.
    pub fn from_flat(class1: Vec<f64>, class2: Vec<f64>, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::Domain("dimension p must be positive".into()));
        }
        for (name, buf) in [("class 1", &class1), ("class 2", &class2)] {
            if buf.is_empty() {
                return Err(Error::Domain(format!("{name} has no observations")));
            }
            if buf.len() % p != 0 {
                return Err(Error::Domain(format!(
                    "{name} buffer length {} is not a multiple of p = {p}",
                    buf.len()
                )));
            }
            if buf.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("{name} contains a non-finite value")));
            }
        }
        Ok(StratifiedDataset { class1, class2, p })
    }

    pub fn from_rows(class1: &[Vec<f64>], class2: &[Vec<f64>]) -> Result<Self> {
        let p = class1
            .first()
            .or_else(|| class2.first())
            .map(Vec::len)
            .unwrap_or(0);
        for row in class1.iter().chain(class2) {
            if row.len() != p {
                return Err(Error::DimensionMismatch { expected: p, got: row.len() });
            }
        }
        Self::from_flat(class1.concat(), class2.concat(), p)
    }

    /// One-dimensional convenience constructor.
    pub fn from_scalars(class1: &[f64], class2: &[f64]) -> Result<Self> {
        Self::from_flat(class1.to_vec(), class2.to_vec(), 1)
    }

    pub fn from_points(points: &[LabeledPoint]) -> Result<Self> {
        let p = points.first().map(|pt| pt.features.len()).unwrap_or(0);
        let (mut c1, mut c2) = (Vec::new(), Vec::new());
        for pt in points {
            if pt.features.len() != p {
                return Err(Error::DimensionMismatch { expected: p, got: pt.features.len() });
            }
            match pt.label {
                Class::One => c1.extend_from_slice(&pt.features),
                Class::Two => c2.extend_from_slice(&pt.features),
            }
        }
        Self::from_flat(c1, c2, p)
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn n1(&self) -> usize {
        self.class1.len() / self.p
    }

    pub fn n2(&self) -> usize {
        self.class2.len() / self.p
    }

    pub fn n(&self) -> usize {
        self.n1() + self.n2()
    }

    pub fn class1_row(&self, i: usize) -> &[f64] {
        &self.class1[i * self.p..(i + 1) * self.p]
    }

    pub fn class2_row(&self, j: usize) -> &[f64] {
        &self.class2[j * self.p..(j + 1) * self.p]
    }

    pub fn row(&self, class: Class, i: usize) -> &[f64] {
        match class {
            Class::One => self.class1_row(i),
            Class::Two => self.class2_row(i),
        }
    }

    /// Pooled view used by the error-rate estimators: indices `0..n1` are
    /// class 1 and `n1..n` are class 2.
    pub fn pooled(&self, g: usize) -> (&[f64], Class) {
        let n1 = self.n1();
        if g < n1 {
            (self.class1_row(g), Class::One)
        } else {
            (self.class2_row(g - n1), Class::Two)
        }
    }

    pub fn pooled_point(&self, g: usize) -> LabeledPoint {
        let (x, label) = self.pooled(g);
        LabeledPoint { features: x.to_vec(), label }
    }

    /// Drops trailing observations of each class so that `n1` and `n2`
    /// become multiples of `k1` and `k2`.
    pub fn truncate_to_multiples(&self, k1: usize, k2: usize) -> Result<Self> {
        if k1 == 0 || k2 == 0 {
            return Err(Error::Domain("fold counts must be positive".into()));
        }
        let m1 = self.n1() / k1 * k1;
        let m2 = self.n2() / k2 * k2;
        Self::from_flat(
            self.class1[..m1 * self.p].to_vec(),
            self.class2[..m2 * self.p].to_vec(),
            self.p,
        )
    }

    /// Reads the `class,f1,...,fp` CSV format.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0).map(str::trim) != Some("class") || headers.len() < 2 {
            return Err(Error::Parse("dataset header must be `class,f1,...,fp`".into()));
        }
        for (idx, h) in headers.iter().enumerate().skip(1) {
            if h.trim() != format!("f{idx}") {
                return Err(Error::Parse(format!("column {} must be named f{idx}, found `{h}`", idx + 1)));
            }
        }
        let p = headers.len() - 1;
        let (mut c1, mut c2) = (Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = line + 2;
            let tag: u8 = rec[0]
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("row {row}: bad class `{}`", &rec[0])))?;
            let class = Class::from_tag(tag).map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
            let dest = match class {
                Class::One => &mut c1,
                Class::Two => &mut c2,
            };
            for field in rec.iter().skip(1) {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {row}: bad number `{field}`")))?;
                dest.push(v);
            }
        }
        Self::from_flat(c1, c2, p)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["class".to_string()];
        header.extend((1..=self.p).map(|k| format!("f{k}")));
        w.write_record(&header)?;
        for (class, n) in [(Class::One, self.n1()), (Class::Two, self.n2())] {
            for i in 0..n {
                let mut rec = vec![class.tag().to_string()];
                rec.extend(self.row(class, i).iter().map(f64::to_string));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// A trained classifier.
pub trait ScoringRule {
    fn dim(&self) -> usize;

    /// Deterministic score of one feature vector; higher means class 2.
    fn score(&self, x: &[f64]) -> f64;
}

/// The observations a rule is trained on, as index lists into the two
/// classes of a dataset. Indices may repeat (bootstrap multisets).
#[derive(Clone, Debug)]
pub struct TrainingSet<'a> {
    data: &'a StratifiedDataset,
    class1: Cow<'a, [usize]>,
    class2: Cow<'a, [usize]>,
}

impl<'a> TrainingSet<'a> {
    pub fn new(data: &'a StratifiedDataset, class1: Vec<usize>, class2: Vec<usize>) -> Self {
        debug_assert!(class1.iter().all(|&i| i < data.n1()));
        debug_assert!(class2.iter().all(|&j| j < data.n2()));
        TrainingSet {
            data,
            class1: Cow::Owned(class1),
            class2: Cow::Owned(class2),
        }
    }

    pub fn full(data: &'a StratifiedDataset) -> Self {
        Self::new(data, (0..data.n1()).collect(), (0..data.n2()).collect())
    }

    /// Splits pooled indices (see [`StratifiedDataset::pooled`]) by class.
    pub fn from_pooled(data: &'a StratifiedDataset, pooled: impl IntoIterator<Item = usize>) -> Self {
        let n1 = data.n1();
        let (mut c1, mut c2) = (Vec::new(), Vec::new());
        for g in pooled {
            if g < n1 {
                c1.push(g);
            } else {
                c2.push(g - n1);
            }
        }
        Self::new(data, c1, c2)
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn len1(&self) -> usize {
        self.class1.len()
    }

    pub fn len2(&self) -> usize {
        self.class2.len()
    }

    pub fn class1_indices(&self) -> &[usize] {
        &self.class1
    }

    pub fn class2_indices(&self) -> &[usize] {
        &self.class2
    }

    pub fn class1_rows(&self) -> impl Iterator<Item = &'a [f64]> + '_ {
        let data = self.data;
        self.class1.iter().map(move |&i| data.class1_row(i))
    }

    pub fn class2_rows(&self) -> impl Iterator<Item = &'a [f64]> + '_ {
        let data = self.data;
        self.class2.iter().map(move |&j| data.class2_row(j))
    }

    pub fn ensure_two_classes(&self) -> Result<()> {
        if self.class1.is_empty() {
            return Err(Error::EmptyClass { class: 1 });
        }
        if self.class2.is_empty() {
            return Err(Error::EmptyClass { class: 2 });
        }
        Ok(())
    }
}

/// A training procedure. Training must be deterministic in the training set.
pub trait Trainer: Sync {
    type Rule: ScoringRule + Send + Sync;

    fn train(&self, set: &TrainingSet<'_>) -> Result<Self::Rule>;

    /// Short identifier echoed into reports.
    fn id(&self) -> String;
}

/// Mann-Whitney kernel: 1 if `a < b`, 0.5 on an exact tie, 0 if `a > b`.
pub fn mw_kernel(a: f64, b: f64) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!("mw_kernel needs finite scores, got ({a}, {b})")));
    }
    Ok(psi(a, b))
}

#[inline]
pub(crate) fn psi(a: f64, b: f64) -> f64 {
    if a < b {
        1.0
    } else if a == b {
        0.5
    } else {
        0.0
    }
}

/// Mean of `psi(s1[i], s2[j])` over all `n1·n2` pairs.
///
/// Sort-based: each class-1 score is located in the sorted class-2 scores,
/// and the kernel total is accumulated as an integer count of half-units so
/// the result matches the double sum exactly.
pub fn empirical_auc(scores1: &[f64], scores2: &[f64]) -> Result<f64> {
    if scores1.is_empty() || scores2.is_empty() {
        return Err(Error::Domain("empirical_auc needs non-empty score vectors".into()));
    }
    if scores1.iter().chain(scores2).any(|v| !v.is_finite()) {
        return Err(Error::Domain("empirical_auc needs finite scores".into()));
    }
    let mut sorted2 = scores2.to_vec();
    sorted2.sort_by(f64::total_cmp);
    let n2 = sorted2.len() as u64;
    let half_units: u64 = scores1
        .iter()
        .map(|&a| {
            let below = sorted2.partition_point(|&b| b < a) as u64;
            let at_or_below = sorted2.partition_point(|&b| b <= a) as u64;
            2 * (n2 - at_or_below) + (at_or_below - below)
        })
        .sum();
    Ok(half_units as f64 / (2 * scores1.len() as u64 * n2) as f64)
}

/// Zero-one loss of `rule` on `point` at threshold `th`. Scores at or above
/// the threshold are classified as class 2.
pub fn zero_one_loss<R: ScoringRule + ?Sized>(rule: &R, point: &LabeledPoint, th: f64) -> Result<f64> {
    if point.features.len() != rule.dim() {
        return Err(Error::DimensionMismatch {
            expected: rule.dim(),
            got: point.features.len(),
        });
    }
    Ok(loss_at(rule.score(&point.features), point.label, th))
}

#[inline]
pub(crate) fn loss_at(score: f64, label: Class, th: f64) -> f64 {
    let predicted = if score >= th { Class::Two } else { Class::One };
    if predicted == label {
        0.0
    } else {
        1.0
    }
}
