//! Expected total completion time of fixed-quanta schedules.
//!
//! Three routes are provided: the prefix-set closed form, exhaustive
//! enumeration of joint realizations, and seeded Monte Carlo. A separate
//! dynamic program computes the optimal nonanticipatory cost on small
//! instances.

use std::collections::HashMap;
use std::time::Instant;

use num::traits::Zero;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::Instance;
use crate::error::{Error, Result};
use crate::gittins::history_ranges;
use crate::par::{self, Exec};
use crate::policies::{execute, ExecMode, Schedule};
use crate::rational::{self, int, Rational};

pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;
pub const DEFAULT_DP_CAP: u128 = 100_000;
pub const MAX_STATES_ENV: &str = "RGSCHED_MAX_STATES";

/// Size limits for the exhaustive oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    pub enumeration: u128,
    pub dp_states: u128,
}

impl Default for Caps {
    fn default() -> Self {
        Self {
            enumeration: DEFAULT_ENUMERATION_CAP,
            dp_states: DEFAULT_DP_CAP,
        }
    }
}

impl Caps {
    /// Defaults, with both caps replaced by `RGSCHED_MAX_STATES` when set.
    pub fn from_env() -> Self {
        match std::env::var(MAX_STATES_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<u128>().ok())
        {
            Some(cap) => Self {
                enumeration: cap,
                dp_states: cap,
            },
            None => Self::default(),
        }
    }
}

/// Closed-form expected cost of `schedule` when sizes follow `truth`.
///
/// For each entry `(j, i)` the contribution is the expected time spent on the
/// entries between job `j`'s previous entry and this one, counted while `j`
/// is still unfinished:
/// `sum over (k, l) in H'(j, i) of P(P_j > y_ji, P_k > y_kl) * I_k(q_kl, y_kl)`.
pub fn expected_cost_closed_form(schedule: &Schedule, truth: &Instance) -> Result<Rational> {
    expected_cost_closed_form_with(schedule, truth, Exec::default())
}

pub fn expected_cost_closed_form_with(
    schedule: &Schedule,
    truth: &Instance,
    exec: Exec,
) -> Result<Rational> {
    schedule.check_covers(truth)?;
    let entries = schedule.entries();
    // E[min(P_k - y, q); P_k > y] per entry
    let work: Vec<Rational> = entries
        .iter()
        .map(|e| truth.job(e.job).partial_work(&e.length, &e.offset))
        .collect();
    let ranges = history_ranges(entries.iter().map(|e| e.job), truth.len());
    let per_job = par::map_indexed(exec, truth.len(), |j| {
        let d = truth.job(j);
        let mut sum = Rational::zero();
        for range in &ranges[j] {
            let own = range.end - 1;
            let alive = d.survival(&entries[own].offset);
            if alive.is_zero() {
                continue;
            }
            sum += &work[own];
            let others: Rational = range.clone().filter(|&p| p != own).map(|p| &work[p]).sum();
            sum += alive * others;
        }
        sum
    });
    Ok(per_job.into_iter().sum())
}

/// Exact expectation over every joint realization, each run with strict
/// execution.
pub fn expected_cost_enumeration(
    schedule: &Schedule,
    truth: &Instance,
    cap: u128,
) -> Result<Rational> {
    expected_cost_enumeration_with(schedule, truth, cap, Exec::default())
}

pub fn expected_cost_enumeration_with(
    schedule: &Schedule,
    truth: &Instance,
    cap: u128,
    exec: Exec,
) -> Result<Rational> {
    let size = truth.joint_support_size();
    if size > cap {
        return Err(Error::StateSpaceTooLarge { size, cap });
    }
    let total = size as usize;
    const CHUNK: usize = 256;
    let chunks = total.div_ceil(CHUNK);
    let partial = par::try_map_indexed(exec, chunks, |c| {
        let mut sum = Rational::zero();
        let mut sizes = Vec::with_capacity(truth.len());
        for idx in c * CHUNK..((c + 1) * CHUNK).min(total) {
            sizes.clear();
            let mut rest = idx;
            let mut prob = rational::one();
            for d in truth.jobs() {
                let a = rest % d.len();
                rest /= d.len();
                sizes.push(d.sizes()[a].clone());
                prob *= &d.probs()[a];
            }
            let run = execute(schedule, &sizes, ExecMode::Strict)?;
            sum += prob * run.total;
        }
        Ok::<_, Error>(sum)
    })?;
    Ok(partial.into_iter().sum())
}

/// Sample mean and standard error of the total completion time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

const MC_CHUNK: usize = 8192;

/// Seeded Monte Carlo estimate.
///
/// Which entry finishes each atom is decided exactly up front; only the
/// clock is accumulated in `f64`. Samples are drawn in fixed-size chunks,
/// chunk `c` from stream `c` of a ChaCha8 generator keyed by `seed`, so the
/// result does not depend on the execution mode.
pub fn monte_carlo_cost(
    schedule: &Schedule,
    truth: &Instance,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    monte_carlo_cost_with(schedule, truth, samples, seed, Exec::default())
}

pub fn monte_carlo_cost_with(
    schedule: &Schedule,
    truth: &Instance,
    samples: usize,
    seed: u64,
    exec: Exec,
) -> Result<MonteCarloEstimate> {
    if samples < 2 {
        return Err(Error::InvalidParams(
            "Monte Carlo needs at least 2 samples".into(),
        ));
    }
    if truth.len() != schedule.job_count() {
        return Err(Error::InvalidSchedule("job count mismatch".into()));
    }
    let entries = schedule.entries();
    let lengths: Vec<f64> = entries
        .iter()
        .map(|e| rational::to_f64(&e.length))
        .collect();
    // finish[j][a] = (entry position, time used in that entry) for atom a,
    // None for a zero size.
    let mut finish: Vec<Vec<Option<(usize, f64)>>> = Vec::with_capacity(truth.len());
    for (j, d) in truth.jobs().iter().enumerate() {
        let mut per_atom = Vec::with_capacity(d.len());
        for s in d.sizes() {
            if s.is_zero() {
                per_atom.push(None);
                continue;
            }
            let hit = entries
                .iter()
                .enumerate()
                .find(|(_, e)| e.job == j && &e.offset < s && s <= &(&e.offset + &e.length));
            match hit {
                Some((p, e)) => per_atom.push(Some((p, rational::to_f64(&(s - &e.offset))))),
                None => {
                    let covered: Rational = entries
                        .iter()
                        .filter(|e| e.job == j)
                        .map(|e| &e.length)
                        .sum();
                    return Err(Error::IncompleteSchedule {
                        job: j,
                        attained: rational::to_exact_string(&covered),
                        size: rational::to_exact_string(s),
                    });
                }
            }
        }
        finish.push(per_atom);
    }
    let floats: Vec<_> = truth.jobs().iter().map(|d| d.to_float()).collect();
    let chunks = samples.div_ceil(MC_CHUNK);
    let stats = par::map_indexed(exec, chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(c as u64);
        let count = MC_CHUNK.min(samples - c * MC_CHUNK);
        let mut acc = Welford::default();
        let mut target: Vec<Option<(usize, f64)>> = vec![None; floats.len()];
        let mut done = vec![false; floats.len()];
        for _ in 0..count {
            let mut total = 0.0;
            for (j, f) in floats.iter().enumerate() {
                target[j] = finish[j][f.sample_index(&mut rng)];
                done[j] = target[j].is_none();
            }
            let mut clock = 0.0;
            for (p, e) in entries.iter().enumerate() {
                let j = e.job;
                if done[j] {
                    continue;
                }
                match target[j] {
                    Some((q, used)) if q == p => {
                        clock += used;
                        total += clock;
                        done[j] = true;
                    }
                    _ => clock += lengths[p],
                }
            }
            acc.push(total);
        }
        acc
    });
    let merged = stats.into_iter().fold(Welford::default(), Welford::merge);
    let variance = merged.m2 / (merged.n - 1) as f64;
    Ok(MonteCarloEstimate {
        mean: merged.mean,
        stderr: (variance / merged.n as f64).sqrt(),
        samples,
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(a: Welford, b: Welford) -> Welford {
        if a.n == 0 {
            return b;
        }
        if b.n == 0 {
            return a;
        }
        let n = a.n + b.n;
        let delta = b.mean - a.mean;
        Welford {
            n,
            mean: a.mean + delta * b.n as f64 / n as f64,
            m2: a.m2 + b.m2 + delta * delta * (a.n as f64 * b.n as f64) / n as f64,
        }
    }
}

/// Optimal expected total completion time over nonanticipatory policies,
/// by exact dynamic programming.
///
/// A state records, per job, how many of its atoms have been ruled out (or
/// that it finished). Decisions happen only at atoms: running a job to its
/// next atom takes a deterministic amount of time, paid once by every
/// unfinished job, after which the job either finishes or moves on.
pub fn brute_force_opt(inst: &Instance, cap: u128) -> Result<Rational> {
    let size = inst
        .jobs()
        .iter()
        .fold(1u128, |acc, d| acc.saturating_mul(d.len() as u128 + 1));
    if size > cap {
        return Err(Error::StateSpaceTooLarge { size, cap });
    }
    let mut solver = OptSolver {
        inst,
        memo: HashMap::new(),
    };
    let start = vec![0u16; inst.len()];
    Ok(solver.value(&start))
}

struct OptSolver<'a> {
    inst: &'a Instance,
    memo: HashMap<Vec<u16>, Rational>,
}

impl OptSolver<'_> {
    fn value(&mut self, state: &[u16]) -> Rational {
        if let Some(v) = self.memo.get(state) {
            return v.clone();
        }
        let jobs = self.inst.jobs();
        let open: Vec<usize> = (0..jobs.len())
            .filter(|&j| (state[j] as usize) < jobs[j].len())
            .collect();
        let mut best: Option<Rational> = None;
        let waiting = int(open.len() as i64);
        for &j in &open {
            let d = &jobs[j];
            let i = state[j] as usize;
            let prev = if i == 0 {
                Rational::zero()
            } else {
                d.sizes()[i - 1].clone()
            };
            let step = &d.sizes()[i] - prev;
            let tail: Rational = d.probs()[i..].iter().sum();
            let finish = &d.probs()[i] / &tail;
            let mut next = state.to_vec();
            next[j] = d.len() as u16;
            let mut cost = &waiting * step + &finish * self.value(&next);
            if i + 1 < d.len() {
                next[j] = (i + 1) as u16;
                cost += (rational::one() - &finish) * self.value(&next);
            }
            if best.as_ref().is_none_or(|b| &cost < b) {
                best = Some(cost);
            }
        }
        let v = best.unwrap_or_else(Rational::zero);
        self.memo.insert(state.to_vec(), v.clone());
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Closed,
    Enum,
    Mc,
    Opt,
}

/// Result of one cost evaluation, as written by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub method: Method,
    /// Exact `"num/den"` for exact methods, a decimal for Monte Carlo.
    pub value: String,
    pub value_decimal: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub samples: Option<usize>,
    pub runtime_ms: u128,
}

impl CostReport {
    pub fn exact(method: Method, value: &Rational, started: Instant) -> Self {
        Self {
            method,
            value: rational::to_exact_string(value),
            value_decimal: rational::to_f64(value),
            stderr: None,
            samples: None,
            runtime_ms: started.elapsed().as_millis(),
        }
    }

    pub fn monte_carlo(est: &MonteCarloEstimate, started: Instant) -> Self {
        Self {
            method: Method::Mc,
            value: est.mean.to_string(),
            value_decimal: est.mean,
            stderr: Some(est.stderr),
            samples: Some(est.samples),
            runtime_ms: started.elapsed().as_millis(),
        }
    }
}
