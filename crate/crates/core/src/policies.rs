//! Fixed-quanta schedules for GIPP and Robust Gittins, and their execution
//! against realized job sizes.

use num::traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::distributions::Instance;
use crate::error::{Error, Result};
use crate::gittins::{self, QuantaOrder};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PolicyTag {
    Gipp,
    Rg {
        #[serde(with = "rational::serde_rational")]
        alpha: Rational,
    },
    Custom,
}

/// One step of a schedule: run `job` for up to `length`, from attained `offset`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub job: usize,
    #[serde(with = "rational::serde_rational")]
    pub offset: Rational,
    #[serde(with = "rational::serde_rational")]
    pub length: Rational,
}

/// An ordered list of quanta over `jobs` jobs.
///
/// Each job's entry offsets are the running sum of its earlier entry lengths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleFile")]
pub struct Schedule {
    policy: PolicyTag,
    source: Option<String>,
    jobs: usize,
    entries: Vec<Entry>,
}

#[derive(Deserialize)]
struct ScheduleFile {
    policy: PolicyTag,
    #[serde(default)]
    source: Option<String>,
    jobs: usize,
    entries: Vec<Entry>,
}

impl TryFrom<ScheduleFile> for Schedule {
    type Error = Error;

    fn try_from(f: ScheduleFile) -> Result<Self> {
        let mut s = Schedule::new(f.jobs, f.entries, f.policy)?;
        s.source = f.source;
        Ok(s)
    }
}

impl Schedule {
    /// Validates per-job contiguity and positive lengths.
    pub fn new(jobs: usize, entries: Vec<Entry>, policy: PolicyTag) -> Result<Self> {
        let mut attained = vec![Rational::zero(); jobs];
        for (k, e) in entries.iter().enumerate() {
            if e.job >= jobs {
                return Err(Error::InvalidSchedule(format!(
                    "entry {k} names job {} of {jobs}",
                    e.job
                )));
            }
            if !e.length.is_positive() {
                return Err(Error::InvalidSchedule(format!(
                    "entry {k} has non-positive length"
                )));
            }
            if e.offset != attained[e.job] {
                return Err(Error::InvalidSchedule(format!(
                    "entry {k} of job {} starts at {}, expected {}",
                    e.job,
                    rational::to_exact_string(&e.offset),
                    rational::to_exact_string(&attained[e.job])
                )));
            }
            attained[e.job] += &e.length;
        }
        Ok(Self {
            policy,
            source: None,
            jobs,
            entries,
        })
    }

    /// Builds a schedule from `(job, length)` pairs, filling in offsets.
    pub fn from_lengths<I>(jobs: usize, lengths: I, policy: PolicyTag) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, Rational)>,
    {
        let mut attained = vec![Rational::zero(); jobs];
        let mut entries = Vec::new();
        for (job, length) in lengths {
            if job >= jobs {
                return Err(Error::InvalidSchedule(format!("job {job} of {jobs}")));
            }
            entries.push(Entry {
                job,
                offset: attained[job].clone(),
                length: length.clone(),
            });
            attained[job] += length;
        }
        Self::new(jobs, entries, policy)
    }

    pub fn with_source(mut self, source: String) -> Self {
        self.source = Some(source);
        self
    }

    pub fn policy(&self) -> &PolicyTag {
        &self.policy
    }

    pub fn source(&self) -> Option<&str> {
        self.source.as_deref()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn job_count(&self) -> usize {
        self.jobs
    }

    /// Total scheduled length of each job.
    pub fn coverage(&self) -> Vec<Rational> {
        let mut total = vec![Rational::zero(); self.jobs];
        for e in &self.entries {
            total[e.job] += &e.length;
        }
        total
    }

    /// Checks that every job of `truth` is scheduled up to its largest size.
    pub fn check_covers(&self, truth: &Instance) -> Result<()> {
        if truth.len() != self.jobs {
            return Err(Error::InvalidSchedule(format!(
                "schedule has {} jobs, instance has {}",
                self.jobs,
                truth.len()
            )));
        }
        for (job, (covered, d)) in self.coverage().iter().zip(truth.jobs()).enumerate() {
            if covered < d.max_support() {
                return Err(Error::ScheduleDoesNotCover {
                    job,
                    covered: rational::to_exact_string(covered),
                    needed: rational::to_exact_string(d.max_support()),
                });
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }
}

fn from_order(order: &QuantaOrder, scale: &Rational, policy: PolicyTag) -> Result<Schedule> {
    Schedule::from_lengths(
        order.job_count(),
        order.quanta().iter().map(|q| (q.job, &q.length * scale)),
        policy,
    )
}

/// The Gittins order of `inst`, each quantum at its own length.
pub fn build_gipp_schedule(inst: &Instance) -> Result<Schedule> {
    let order = gittins::gipp_order(inst)?;
    Ok(from_order(&order, &Rational::one(), PolicyTag::Gipp)?.with_source(inst.content_hash()))
}

/// The Gittins order of `predicted` with every quantum stretched by `alpha`.
pub fn build_rg_schedule(predicted: &Instance, alpha: &Rational) -> Result<Schedule> {
    if alpha < &Rational::one() {
        return Err(Error::InvalidAlpha(rational::to_exact_string(alpha)));
    }
    let order = gittins::gipp_order(predicted)?;
    Ok(from_order(
        &order,
        alpha,
        PolicyTag::Rg {
            alpha: alpha.clone(),
        },
    )?
    .with_source(predicted.content_hash()))
}

/// What to do when the schedule runs out before every job finishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    /// Report [`Error::IncompleteSchedule`].
    #[default]
    Strict,
    /// Run leftover jobs to completion in job-index order.
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionResult {
    #[serde(with = "rational::serde_rational_vec")]
    pub completion_times: Vec<Rational>,
    #[serde(with = "rational::serde_rational")]
    pub total: Rational,
}

/// Realized job sizes, one per job.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Realization {
    #[serde(with = "rational::serde_rational_vec")]
    pub sizes: Vec<Rational>,
}

/// Runs `schedule` on realized sizes.
///
/// An entry consumes `min(size - attained, length)` time; entries of finished
/// jobs are skipped at no cost. A job of size zero completes at time zero.
pub fn execute(
    schedule: &Schedule,
    sizes: &[Rational],
    mode: ExecMode,
) -> Result<CompletionResult> {
    if sizes.len() != schedule.jobs {
        return Err(Error::InvalidRealization(format!(
            "{} sizes for {} jobs",
            sizes.len(),
            schedule.jobs
        )));
    }
    if let Some(s) = sizes.iter().find(|s| s.is_negative()) {
        return Err(Error::InvalidRealization(format!(
            "negative size {}",
            rational::to_exact_string(s)
        )));
    }
    let n = sizes.len();
    let mut attained = vec![Rational::zero(); n];
    let mut done: Vec<Option<Rational>> = sizes
        .iter()
        .map(|s| s.is_zero().then(Rational::zero))
        .collect();
    let mut clock = Rational::zero();
    for e in &schedule.entries {
        let j = e.job;
        if done[j].is_some() {
            continue;
        }
        let left = &sizes[j] - &attained[j];
        if left <= e.length {
            clock += left;
            attained[j] = sizes[j].clone();
            done[j] = Some(clock.clone());
        } else {
            clock += &e.length;
            attained[j] += &e.length;
        }
    }
    for j in 0..n {
        if done[j].is_none() {
            match mode {
                ExecMode::Strict => {
                    return Err(Error::IncompleteSchedule {
                        job: j,
                        attained: rational::to_exact_string(&attained[j]),
                        size: rational::to_exact_string(&sizes[j]),
                    })
                }
                ExecMode::Fallback => {
                    clock += &sizes[j] - &attained[j];
                    done[j] = Some(clock.clone());
                }
            }
        }
    }
    let completion_times: Vec<Rational> = done.into_iter().map(|c| c.expect("all done")).collect();
    let total = completion_times.iter().sum();
    Ok(CompletionResult {
        completion_times,
        total,
    })
}
