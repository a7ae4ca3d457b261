//! The brittleness-gap and robustness experiments, and their CSV / JSON
//! reports.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::Instance;
use crate::error::{Error, Result};
use crate::evaluation::{expected_cost_closed_form_with, expected_cost_enumeration_with, Caps};
use crate::instances::{alpha_close_pair, lower_bound_pair, RandomInstanceParams};
use crate::par::{self, Exec};
use crate::policies::{build_gipp_schedule, build_rg_schedule, Schedule};
use crate::rational::{self, int, Rational};

pub const DEFAULT_DIGITS: usize = 6;

/// One row of the gap experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapRow {
    pub n: usize,
    /// GIPP run with the predicted quanta, evaluated on the truth.
    #[serde(with = "rational::serde_rational")]
    pub mispredicted: Rational,
    /// GIPP run with the truth's own quanta.
    #[serde(with = "rational::serde_rational")]
    pub informed: Rational,
}

impl GapRow {
    pub fn ratio(&self) -> Rational {
        &self.mispredicted / &self.informed
    }
}

// Experiments parallelize over rows and trials; each one runs sequentially.
fn cost(schedule: &Schedule, truth: &Instance) -> Result<Rational> {
    expected_cost_closed_form_with(schedule, truth, Exec::Sequential)
}

pub fn gap_experiment(ns: &[usize], eps: &Rational) -> Result<Vec<GapRow>> {
    gap_experiment_with(ns, eps, Exec::default())
}

pub fn gap_experiment_with(ns: &[usize], eps: &Rational, exec: Exec) -> Result<Vec<GapRow>> {
    par::try_map_indexed(exec, ns.len(), |k| {
        let n = ns[k];
        let (truth, predicted) = lower_bound_pair(n, eps)?;
        let mispredicted = cost(&build_gipp_schedule(&predicted)?, &truth)?;
        let informed = cost(&build_gipp_schedule(&truth)?, &truth)?;
        Ok(GapRow {
            n,
            mispredicted,
            informed,
        })
    })
}

pub const GAP_HEADER: [&str; 9] = [
    "n",
    "gipp_true_pred",
    "gipp_true_true",
    "ratio",
    "ref_n_cubed",
    "ref_n_squared",
    "gipp_true_pred_exact",
    "gipp_true_true_exact",
    "ratio_exact",
];

pub fn write_gap_csv<W: Write>(rows: &[GapRow], digits: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GAP_HEADER).map_err(csv_err)?;
    for r in rows {
        let ratio = r.ratio();
        let n = r.n as i64;
        w.write_record([
            r.n.to_string(),
            rational::to_decimal_string(&r.mispredicted, digits),
            rational::to_decimal_string(&r.informed, digits),
            rational::to_decimal_string(&ratio, digits),
            (n * n * n).to_string(),
            (n * n).to_string(),
            rational::to_exact_string(&r.mispredicted),
            rational::to_exact_string(&r.informed),
            rational::to_exact_string(&ratio),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|&(x, y)| (x.ln(), y.ln())).unzip();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustConfig {
    pub trials: usize,
    pub alphas: Vec<Rational>,
    pub params: RandomInstanceParams,
    pub seed: u64,
    /// Also run every RG schedule on every joint realization of the truth.
    pub check_completion: bool,
    pub caps: Caps,
}

impl Default for RobustConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            alphas: vec![
                rational::ratio(101, 100),
                rational::ratio(11, 10),
                rational::ratio(3, 2),
                int(2),
            ],
            params: RandomInstanceParams::default(),
            seed: 7,
            check_completion: true,
            caps: Caps::default(),
        }
    }
}

/// Costs of one α-close pair `(I*, Î)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobustRow {
    pub trial: usize,
    #[serde(with = "rational::serde_rational")]
    pub alpha: Rational,
    pub jobs: usize,
    /// RG on the truth with the predicted quanta.
    #[serde(with = "rational::serde_rational")]
    pub rg_true_pred: Rational,
    /// GIPP on the prediction with its own quanta.
    #[serde(with = "rational::serde_rational")]
    pub gipp_pred_pred: Rational,
    /// RG on the prediction using the truth's quanta.
    #[serde(with = "rational::serde_rational")]
    pub rg_pred_true: Rational,
    /// GIPP on the truth with its own quanta (the optimum).
    #[serde(with = "rational::serde_rational")]
    pub gipp_true_true: Rational,
    /// `None` when the truth's joint support exceeded the enumeration cap.
    pub all_realizations_complete: Option<bool>,
    pub violations: Vec<String>,
}

impl RobustRow {
    pub fn is_violation(&self) -> bool {
        !self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobustReport {
    pub seed: u64,
    pub rows: Vec<RobustRow>,
}

impl RobustReport {
    pub fn violation_count(&self) -> usize {
        self.rows.iter().filter(|r| r.is_violation()).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Seed stream for trial `trial` at the `alpha_index`-th α.
fn trial_rng(seed: u64, alpha_index: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((alpha_index as u64) << 32) | trial as u64);
    rng
}

pub fn robustness_experiment(cfg: &RobustConfig) -> Result<RobustReport> {
    robustness_experiment_with(cfg, Exec::default())
}

pub fn robustness_experiment_with(cfg: &RobustConfig, exec: Exec) -> Result<RobustReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidParams("need at least one trial".into()));
    }
    let total = cfg.trials * cfg.alphas.len();
    let rows = par::try_map_indexed(exec, total, |k| {
        let (ai, trial) = (k / cfg.trials, k % cfg.trials);
        robust_trial(cfg, ai, trial)
    })?;
    Ok(RobustReport {
        seed: cfg.seed,
        rows,
    })
}

fn robust_trial(cfg: &RobustConfig, alpha_index: usize, trial: usize) -> Result<RobustRow> {
    let alpha = &cfg.alphas[alpha_index];
    let mut rng = trial_rng(cfg.seed, alpha_index, trial);
    let (truth, predicted) = alpha_close_pair(&cfg.params, alpha, &mut rng)?;

    let rg_schedule = build_rg_schedule(&predicted, alpha)?;
    let rg_true_pred = cost(&rg_schedule, &truth)?;
    let gipp_pred_pred = cost(&build_gipp_schedule(&predicted)?, &predicted)?;
    let rg_pred_true = cost(&build_rg_schedule(&truth, alpha)?, &predicted)?;
    let gipp_true_true = cost(&build_gipp_schedule(&truth)?, &truth)?;

    let cube = alpha * alpha * alpha;
    let mut violations = Vec::new();
    if rg_true_pred > &cube * &gipp_pred_pred {
        violations.push("rg_true_pred > alpha^3 * gipp_pred_pred".to_string());
    }
    if gipp_pred_pred > rg_pred_true {
        violations.push("gipp_pred_pred > rg_pred_true".to_string());
    }
    if rg_pred_true > &cube * &gipp_true_true {
        violations.push("rg_pred_true > alpha^3 * gipp_true_true".to_string());
    }
    if rg_true_pred > &cube * &cube * &gipp_true_true {
        violations.push("rg_true_pred > alpha^6 * gipp_true_true".to_string());
    }

    let all_realizations_complete =
        if cfg.check_completion && truth.joint_support_size() <= cfg.caps.enumeration {
            match expected_cost_enumeration_with(
                &rg_schedule,
                &truth,
                cfg.caps.enumeration,
                Exec::Sequential,
            ) {
                Ok(enumerated) => {
                    if enumerated != rg_true_pred {
                        violations.push("closed form differs from enumeration".to_string());
                    }
                    Some(true)
                }
                Err(Error::IncompleteSchedule { .. }) => {
                    violations.push("RG schedule left a job unfinished".to_string());
                    Some(false)
                }
                Err(e) => return Err(e),
            }
        } else {
            None
        };

    Ok(RobustRow {
        trial,
        alpha: alpha.clone(),
        jobs: truth.len(),
        rg_true_pred,
        gipp_pred_pred,
        rg_pred_true,
        gipp_true_true,
        all_realizations_complete,
        violations,
    })
}

pub const ROBUST_HEADER: [&str; 18] = [
    "trial",
    "alpha",
    "jobs",
    "rg_true_pred",
    "gipp_pred_pred",
    "rg_pred_true",
    "gipp_true_true",
    "ratio_rg_true_pred_over_gipp_pred_pred",
    "ratio_gipp_pred_pred_over_rg_pred_true",
    "ratio_rg_pred_true_over_gipp_true_true",
    "ratio_rg_true_pred_over_gipp_true_true",
    "alpha_pow6",
    "all_realizations_complete",
    "violation",
    "rg_true_pred_exact",
    "gipp_pred_pred_exact",
    "rg_pred_true_exact",
    "gipp_true_true_exact",
];

pub fn write_robust_csv<W: Write>(report: &RobustReport, digits: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ROBUST_HEADER).map_err(csv_err)?;
    let dec = |x: &Rational| rational::to_decimal_string(x, digits);
    for r in &report.rows {
        let a3 = &r.alpha * &r.alpha * &r.alpha;
        w.write_record([
            r.trial.to_string(),
            rational::to_exact_string(&r.alpha),
            r.jobs.to_string(),
            dec(&r.rg_true_pred),
            dec(&r.gipp_pred_pred),
            dec(&r.rg_pred_true),
            dec(&r.gipp_true_true),
            dec(&(&r.rg_true_pred / &r.gipp_pred_pred)),
            dec(&(&r.gipp_pred_pred / &r.rg_pred_true)),
            dec(&(&r.rg_pred_true / &r.gipp_true_true)),
            dec(&(&r.rg_true_pred / &r.gipp_true_true)),
            dec(&(&a3 * &a3)),
            match r.all_realizations_complete {
                Some(b) => b.to_string(),
                None => "unchecked".to_string(),
            },
            r.violations.join("; "),
            rational::to_exact_string(&r.rg_true_pred),
            rational::to_exact_string(&r.gipp_pred_pred),
            rational::to_exact_string(&r.rg_pred_true),
            rational::to_exact_string(&r.gipp_true_true),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}
