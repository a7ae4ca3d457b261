//! Investment, rank, per-job quanta and the global Gittins order.

use std::cmp::Ordering;
use std::ops::Range;

use num::traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::distributions::{FiniteDist, Instance};
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::rational::{self, Rational};

/// A scheduling decision: run `job` for up to `length` more time units,
/// starting from attained time `offset`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quantum {
    pub job: usize,
    /// Index of this quantum among the job's quanta.
    pub index: usize,
    #[serde(with = "rational::serde_rational")]
    pub offset: Rational,
    #[serde(with = "rational::serde_rational")]
    pub length: Rational,
    #[serde(with = "rational::serde_rational")]
    pub rank: Rational,
}

fn require_positive_tail(d: &FiniteDist, y: &Rational) -> Result<()> {
    if d.survival(y).is_zero() {
        return Err(Error::ConditionOnZeroEvent(rational::to_exact_string(y)));
    }
    Ok(())
}

/// `E[min(P - y, q) | P > y]`.
pub fn investment(d: &FiniteDist, q: &Rational, y: &Rational) -> Result<Rational> {
    require_positive_tail(d, y)?;
    Ok(d.partial_work(q, y) / d.survival(y))
}

/// `P(P - y <= q | P > y) / E[min(P - y, q) | P > y]`.
///
/// The conditioning cancels, leaving `P(y < P <= y + q) / E[min(P - y, q); P > y]`.
pub fn rank(d: &FiniteDist, q: &Rational, y: &Rational) -> Result<Rational> {
    require_positive_tail(d, y)?;
    if !q.is_positive() {
        return Err(Error::InvalidParams(
            "quantum length must be positive".into(),
        ));
    }
    let done = d.survival(y) - d.survival(&(y + q));
    Ok(done / d.partial_work(q, y))
}

/// The quanta of one job, labelled with job index `job`.
///
/// Starting from attained time 0, each quantum is the smallest distance to a
/// larger atom that maximizes the rank; the job is exhausted at its largest
/// atom. A point mass at 0 has no quanta.
pub fn compute_quanta(d: &FiniteDist, job: usize) -> Vec<Quantum> {
    let sizes = d.sizes();
    let probs = d.probs();
    let mut quanta = Vec::new();
    let mut offset = Rational::zero();
    // first atom strictly above the current offset
    let mut start = sizes.partition_point(|s| s <= &offset);
    while start < sizes.len() {
        let tail: Rational = probs[start..].iter().sum();
        // Walk candidate end points s_k, keeping the numerator (mass in
        // (offset, s_k]) and the partial work incrementally.
        let mut done = Rational::zero();
        let mut work_below = Rational::zero(); // sum of (s_i - offset) p_i for passed atoms
        let mut remaining = tail.clone();
        let mut best: Option<(usize, Rational)> = None;
        for k in start..sizes.len() {
            let q = &sizes[k] - &offset;
            done += &probs[k];
            work_below += &q * &probs[k];
            remaining -= &probs[k];
            let work = &work_below + &q * &remaining;
            let r = &done / &work;
            if best.as_ref().is_none_or(|(_, b)| &r > b) {
                best = Some((k, r));
            }
        }
        let (k, r) = best.expect("at least one candidate");
        let length = &sizes[k] - &offset;
        quanta.push(Quantum {
            job,
            index: quanta.len(),
            offset: offset.clone(),
            length,
            rank: r,
        });
        offset = sizes[k].clone();
        start = k + 1;
    }
    quanta
}

/// All quanta of an instance in the Gittins order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantaOrder {
    quanta: Vec<Quantum>,
    jobs: usize,
}

impl QuantaOrder {
    pub fn quanta(&self) -> &[Quantum] {
        &self.quanta
    }

    pub fn job_count(&self) -> usize {
        self.jobs
    }

    pub fn len(&self) -> usize {
        self.quanta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quanta.is_empty()
    }

    /// Global position of each job's quanta, in per-job order.
    pub fn positions(&self) -> Vec<Vec<usize>> {
        job_positions(self.quanta.iter().map(|q| q.job), self.jobs)
    }
}

fn order_cmp(a: &Quantum, b: &Quantum) -> Ordering {
    b.rank
        .cmp(&a.rank)
        .then(a.job.cmp(&b.job))
        .then(a.index.cmp(&b.index))
}

/// Sorts every job's quanta by rank (descending), breaking ties by job
/// index, then by quantum index.
pub fn gipp_order(inst: &Instance) -> Result<QuantaOrder> {
    gipp_order_with(inst, Exec::default())
}

pub fn gipp_order_with(inst: &Instance, exec: Exec) -> Result<QuantaOrder> {
    let per_job = par::map_indexed(exec, inst.len(), |j| compute_quanta(inst.job(j), j));
    for quanta in &per_job {
        for pair in quanta.windows(2) {
            if pair[1].rank > pair[0].rank {
                return Err(Error::OrderInversion {
                    job: pair[1].job,
                    index: pair[1].index,
                });
            }
        }
    }
    let mut quanta: Vec<Quantum> = per_job.into_iter().flatten().collect();
    quanta.sort_by(order_cmp);
    let order = QuantaOrder {
        quanta,
        jobs: inst.len(),
    };
    for (job, pos) in order.positions().iter().enumerate() {
        for (i, &p) in pos.iter().enumerate() {
            if order.quanta[p].index != i {
                return Err(Error::OrderInversion { job, index: i });
            }
        }
    }
    Ok(order)
}

pub(crate) fn job_positions<I: Iterator<Item = usize>>(jobs: I, n: usize) -> Vec<Vec<usize>> {
    let mut pos = vec![Vec::new(); n];
    for (p, j) in jobs.enumerate() {
        pos[j].push(p);
    }
    pos
}

/// Positional prefix differences `H'(j, i)` of a sequence of job entries.
///
/// `result[j][i]` is the range of global positions after job `j`'s
/// `(i-1)`-th entry up to and including its `i`-th entry.
pub fn history_ranges<I: Iterator<Item = usize>>(jobs: I, n: usize) -> Vec<Vec<Range<usize>>> {
    job_positions(jobs, n)
        .into_iter()
        .map(|pos| {
            let mut prev = 0;
            pos.into_iter()
                .map(|p| {
                    let r = prev..p + 1;
                    prev = p + 1;
                    r
                })
                .collect()
        })
        .collect()
}

/// `H'(j, i)` for every quantum of an order, as lists of quanta.
pub fn history_sets(order: &QuantaOrder) -> Vec<Vec<Vec<&Quantum>>> {
    history_ranges(order.quanta.iter().map(|q| q.job), order.jobs)
        .into_iter()
        .map(|ranges| {
            ranges
                .into_iter()
                .map(|r| order.quanta[r].iter().collect())
                .collect()
        })
        .collect()
}
