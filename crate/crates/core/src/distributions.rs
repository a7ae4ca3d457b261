//! Finite-support job-size distributions and the two parametric families
//! used for closeness comparisons.

use std::collections::BTreeMap;

use num::traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// A probability distribution over finitely many non-negative sizes.
///
/// Atoms are kept in canonical form: sizes strictly increasing, every
/// probability positive, probabilities summing to exactly one.
#[derive(Debug, Clone)]
pub struct FiniteDist {
    sizes: Vec<Rational>,
    probs: Vec<Rational>,
    // f64 cumulative probabilities, only used to pick atoms when sampling.
    cumulative: Vec<f64>,
}

impl PartialEq for FiniteDist {
    fn eq(&self, other: &Self) -> bool {
        self.sizes == other.sizes && self.probs == other.probs
    }
}

impl Eq for FiniteDist {}

impl FiniteDist {
    /// Builds a distribution from `(size, probability)` pairs.
    ///
    /// Duplicate sizes are merged. Zero or negative probabilities, negative
    /// sizes, an empty atom list and a total mass other than one are errors.
    pub fn new<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Rational, Rational)>,
    {
        let mut merged: BTreeMap<Rational, Rational> = BTreeMap::new();
        for (size, prob) in atoms {
            if size.is_negative() {
                return Err(Error::InvalidDistribution(format!(
                    "negative size {}",
                    rational::to_exact_string(&size)
                )));
            }
            if !prob.is_positive() {
                return Err(Error::InvalidDistribution(format!(
                    "non-positive probability {} at size {}",
                    rational::to_exact_string(&prob),
                    rational::to_exact_string(&size)
                )));
            }
            *merged.entry(size).or_insert_with(Rational::zero) += prob;
        }
        if merged.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        let total: Rational = merged.values().sum();
        if !total.is_one() {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {}",
                rational::to_exact_string(&total)
            )));
        }
        let (sizes, probs): (Vec<_>, Vec<_>) = merged.into_iter().unzip();
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += rational::to_f64(p);
                acc
            })
            .collect();
        Ok(Self {
            sizes,
            probs,
            cumulative,
        })
    }

    pub fn point_mass(size: Rational) -> Result<Self> {
        Self::new([(size, Rational::one())])
    }

    pub fn sizes(&self) -> &[Rational] {
        &self.sizes
    }

    pub fn probs(&self) -> &[Rational] {
        &self.probs
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&Rational, &Rational)> {
        self.sizes.iter().zip(&self.probs)
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// `P(P > x)`.
    pub fn survival(&self, x: &Rational) -> Rational {
        let first_above = self.sizes.partition_point(|s| s <= x);
        self.probs[first_above..].iter().sum()
    }

    /// `P(P > x | P > y)`.
    pub fn conditional_survival(&self, x: &Rational, y: &Rational) -> Result<Rational> {
        let base = self.survival(y);
        if base.is_zero() {
            return Err(Error::ConditionOnZeroEvent(rational::to_exact_string(y)));
        }
        let top = if x > y { x } else { y };
        Ok(self.survival(top) / base)
    }

    pub fn max_support(&self) -> &Rational {
        self.sizes.last().expect("at least one atom")
    }

    pub fn mean(&self) -> Rational {
        self.atoms().map(|(s, p)| s * p).sum()
    }

    /// `E[min(P - y, q) ; P > y]`, the unconditional expected time a
    /// quantum of length `q` started at attained time `y` consumes.
    pub fn partial_work(&self, q: &Rational, y: &Rational) -> Rational {
        let first_above = self.sizes.partition_point(|s| s <= y);
        self.sizes[first_above..]
            .iter()
            .zip(&self.probs[first_above..])
            .map(|(s, p)| {
                let run = s - y;
                if &run < q {
                    run * p
                } else {
                    q * p
                }
            })
            .sum()
    }

    /// Multiplies every size by `factor > 0`.
    pub fn scaled(&self, factor: &Rational) -> Result<Self> {
        if !factor.is_positive() {
            return Err(Error::InvalidParams("scale factor must be positive".into()));
        }
        Self::new(self.atoms().map(|(s, p)| (s * factor, p.clone())))
    }

    /// Index of a random atom drawn with its probability.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.sizes.len() - 1)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &Rational {
        &self.sizes[self.sample_index(rng)]
    }

    /// Reads a single job, `{"atoms": [["size", "prob"], ...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let job: JobFile = serde_json::from_str(text)?;
        job.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&JobFile::from(self)).expect("distribution serializes")
    }

    pub fn to_float(&self) -> FloatDist {
        FloatDist {
            sizes: self.sizes.iter().map(rational::to_f64).collect(),
            cumulative: self.cumulative.clone(),
        }
    }
}

/// Floating-point counterpart of [`FiniteDist`] for large sampling runs.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatDist {
    sizes: Vec<f64>,
    cumulative: Vec<f64>,
}

impl FloatDist {
    pub const MASS_TOLERANCE: f64 = 1e-12;

    pub fn new(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        let mut sorted = atoms.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut sizes: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut probs: Vec<f64> = Vec::with_capacity(sorted.len());
        for (s, p) in sorted {
            if !(s >= 0.0 && s.is_finite()) || !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidDistribution(format!("bad atom ({s}, {p})")));
            }
            if sizes.last() == Some(&s) {
                *probs.last_mut().unwrap() += p;
            } else {
                sizes.push(s);
                probs.push(p);
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > Self::MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { sizes, cumulative })
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    pub fn survival(&self, x: f64) -> f64 {
        let first_above = self.sizes.partition_point(|&s| s <= x);
        let total = self.cumulative[self.cumulative.len() - 1];
        if first_above == 0 {
            total
        } else {
            (total - self.cumulative[first_above - 1]).max(0.0)
        }
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.sizes.len() - 1)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sizes[self.sample_index(rng)]
    }
}

/// Exponential and Pareto families, compared only through their tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParametricDist {
    Exponential { rate: f64 },
    Pareto { scale: f64, shape: f64 },
}

impl ParametricDist {
    pub fn exponential(rate: f64) -> Result<Self> {
        if rate > 0.0 && rate.is_finite() {
            Ok(Self::Exponential { rate })
        } else {
            Err(Error::InvalidParams(format!("exponential rate {rate}")))
        }
    }

    pub fn pareto(scale: f64, shape: f64) -> Result<Self> {
        if scale > 0.0 && shape > 0.0 && scale.is_finite() && shape.is_finite() {
            Ok(Self::Pareto { scale, shape })
        } else {
            Err(Error::InvalidParams(format!(
                "pareto scale {scale}, shape {shape}"
            )))
        }
    }

    pub fn survival(&self, x: f64) -> f64 {
        match *self {
            Self::Exponential { rate } => (-rate * x.max(0.0)).exp(),
            Self::Pareto { scale, shape } => {
                if x < scale {
                    1.0
                } else {
                    (scale / x).powf(shape)
                }
            }
        }
    }
}

/// One distribution per job. Jobs are independent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    jobs: Vec<FiniteDist>,
}

impl Instance {
    pub fn new(jobs: Vec<FiniteDist>) -> Result<Self> {
        if jobs.is_empty() {
            return Err(Error::InvalidParams(
                "an instance needs at least one job".into(),
            ));
        }
        Ok(Self { jobs })
    }

    pub fn jobs(&self) -> &[FiniteDist] {
        &self.jobs
    }

    pub fn job(&self, j: usize) -> &FiniteDist {
        &self.jobs[j]
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn scaled(&self, factor: &Rational) -> Result<Self> {
        Self::new(
            self.jobs
                .iter()
                .map(|d| d.scaled(factor))
                .collect::<Result<_>>()?,
        )
    }

    /// Number of joint realizations, saturating at `u128::MAX`.
    pub fn joint_support_size(&self) -> u128 {
        self.jobs
            .iter()
            .fold(1u128, |acc, d| acc.saturating_mul(d.len() as u128))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&InstanceFile::from(self)).expect("instance serializes")
    }

    /// Short content hash of the canonical JSON form.
    pub fn content_hash(&self) -> String {
        let canonical =
            serde_json::to_string(&InstanceFile::from(self)).expect("instance serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    jobs: Vec<JobFile>,
}

#[derive(Serialize, Deserialize)]
struct JobFile {
    atoms: Vec<AtomFile>,
}

#[derive(Serialize, Deserialize)]
struct AtomFile(
    #[serde(with = "rational::serde_rational")] Rational,
    #[serde(with = "rational::serde_rational")] Rational,
);

impl From<&FiniteDist> for JobFile {
    fn from(d: &FiniteDist) -> Self {
        JobFile {
            atoms: d
                .atoms()
                .map(|(s, p)| AtomFile(s.clone(), p.clone()))
                .collect(),
        }
    }
}

impl TryFrom<JobFile> for FiniteDist {
    type Error = Error;

    fn try_from(job: JobFile) -> Result<Self> {
        FiniteDist::new(job.atoms.into_iter().map(|AtomFile(s, p)| (s, p)))
    }
}

impl From<&Instance> for InstanceFile {
    fn from(inst: &Instance) -> Self {
        InstanceFile {
            jobs: inst.jobs.iter().map(JobFile::from).collect(),
        }
    }
}

impl TryFrom<InstanceFile> for Instance {
    type Error = Error;

    fn try_from(file: InstanceFile) -> Result<Self> {
        let jobs = file
            .jobs
            .into_iter()
            .map(FiniteDist::try_from)
            .collect::<Result<Vec<_>>>()?;
        Instance::new(jobs)
    }
}
