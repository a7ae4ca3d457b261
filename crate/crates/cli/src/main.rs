use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rgsched_core::closeness::{is_alpha_close, minimal_alpha};
use rgsched_core::evaluation::{
    brute_force_opt, expected_cost_closed_form, expected_cost_enumeration, monte_carlo_cost, Caps,
    CostReport, Method,
};
use rgsched_core::experiments::{self, RobustConfig, DEFAULT_DIGITS};
use rgsched_core::gittins::{compute_quanta, gipp_order};
use rgsched_core::instances::{
    alpha_close_pair, lower_bound_pair, random_instance, RandomInstanceParams,
};
use rgsched_core::policies::{
    build_gipp_schedule, build_rg_schedule, execute, ExecMode, Realization, Schedule,
};
use rgsched_core::rational::{self, Rational};
use rgsched_core::{FiniteDist, Instance};

#[derive(Parser)]
#[command(
    name = "rgsched",
    version,
    about = "Gittins and Robust Gittins scheduling with exact evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cost of GIPP under mispredicted vs. correct distributions on the lower-bound family.
    Gap {
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
        ns: Vec<usize>,
        #[arg(long, default_value = "0.1", value_parser = parse_rational)]
        eps: Rational,
        /// CSV output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_DIGITS)]
        digits: usize,
    },
    /// Checks the RG cost chain on random α-close pairs. Exits 1 on any violation.
    Robust {
        #[arg(long, value_delimiter = ',', default_value = "1.01,1.1,1.5,2", value_parser = parse_rational)]
        alphas: Vec<Rational>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[command(flatten)]
        shape: ShapeArgs,
        /// Skip running RG on every joint realization.
        #[arg(long)]
        skip_completion_check: bool,
        /// CSV output; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the full report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_DIGITS)]
        digits: usize,
    },
    /// Exits 0 when the two files are α-close (job by job), 1 otherwise.
    CheckClose {
        #[arg(long, value_parser = parse_rational)]
        alpha: Rational,
        a: PathBuf,
        b: PathBuf,
    },
    /// Smallest α (within `tol`) for which the two files are close.
    MinAlpha {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Per-job quanta as JSON.
    Quanta { instance: PathBuf },
    /// The global GIPP quanta order as JSON.
    Order { instance: PathBuf },
    /// Builds a GIPP or RG schedule from a (predicted) instance.
    Schedule {
        #[arg(long, value_enum)]
        policy: PolicyArg,
        #[arg(long, value_parser = parse_rational)]
        alpha: Option<Rational>,
        predicted: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Executes a schedule on one realization.
    Run {
        schedule: PathBuf,
        realization: PathBuf,
        /// Finish jobs the schedule leaves incomplete instead of failing.
        #[arg(long)]
        fallback: bool,
    },
    /// Expected cost of a schedule under a true instance.
    Evaluate {
        #[arg(long, value_enum, default_value = "closed")]
        method: MethodArg,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Optimal expected cost by dynamic programming (small instances).
    Opt { instance: PathBuf },
    /// Writes instance files.
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Subcommand)]
enum GenCommand {
    /// The mispredicted two-point family.
    LowerBound {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "0.1", value_parser = parse_rational)]
        eps: Rational,
        #[arg(long)]
        out_truth: PathBuf,
        #[arg(long)]
        out_pred: PathBuf,
    },
    /// A random instance.
    Random {
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A random truth and an α-close prediction of it.
    ClosePair {
        #[arg(long, value_parser = parse_rational)]
        alpha: Rational,
        #[command(flatten)]
        shape: ShapeArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_truth: PathBuf,
        #[arg(long)]
        out_pred: PathBuf,
    },
}

#[derive(clap::Args)]
struct ShapeArgs {
    #[arg(long, default_value_t = 3)]
    jobs: usize,
    #[arg(long, default_value_t = 3)]
    max_atoms: usize,
    #[arg(long, default_value_t = 1)]
    size_min: i64,
    #[arg(long, default_value_t = 10)]
    size_max: i64,
    /// Sizes are multiples of 1/denominator.
    #[arg(long, default_value_t = 2)]
    denominator: i64,
}

impl ShapeArgs {
    fn params(&self) -> RandomInstanceParams {
        RandomInstanceParams {
            jobs: self.jobs,
            max_atoms: self.max_atoms,
            size_min: self.size_min,
            size_max: self.size_max,
            size_denominator: self.denominator,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Gipp,
    Rg,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Closed,
    Enum,
    Mc,
}

fn parse_rational(text: &str) -> Result<Rational, String> {
    rational::parse(text).map_err(|e| e.to_string())
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_instance(path: &Path) -> Result<Instance> {
    Instance::from_json(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

/// Either an instance file or a single `{"atoms": ...}` distribution.
fn load_dists(path: &Path) -> Result<Vec<FiniteDist>> {
    let text = read(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let parsed = if value.get("jobs").is_some() {
        Instance::from_json(&text).map(|i| i.jobs().to_vec())
    } else {
        FiniteDist::from_json(&text).map(|d| vec![d])
    };
    parsed.with_context(|| format!("parsing {}", path.display()))
}

fn load_pair(a: &Path, b: &Path) -> Result<Vec<(FiniteDist, FiniteDist)>> {
    let (xs, ys) = (load_dists(a)?, load_dists(b)?);
    if xs.len() != ys.len() {
        bail!(
            "{} has {} jobs but {} has {}",
            a.display(),
            xs.len(),
            b.display(),
            ys.len()
        );
    }
    Ok(xs.into_iter().zip(ys).collect())
}

fn write_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            let written = stdout.write_all(text.as_bytes()).and_then(|_| {
                if text.ends_with('\n') {
                    Ok(())
                } else {
                    stdout.write_all(b"\n")
                }
            });
            match written {
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
                other => Ok(other?),
            }
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let caps = Caps::from_env();
    match cli.command {
        Command::Gap {
            ns,
            eps,
            out,
            digits,
        } => {
            let rows = experiments::gap_experiment(&ns, &eps)?;
            let mut buf = Vec::new();
            experiments::write_gap_csv(&rows, digits, &mut buf)?;
            write_text(out.as_deref(), &String::from_utf8(buf)?)?;
        }
        Command::Robust {
            alphas,
            trials,
            seed,
            shape,
            skip_completion_check,
            out,
            json,
            digits,
        } => {
            let cfg = RobustConfig {
                trials,
                alphas,
                params: shape.params(),
                seed,
                check_completion: !skip_completion_check,
                caps,
            };
            let report = experiments::robustness_experiment(&cfg)?;
            let mut buf = Vec::new();
            experiments::write_robust_csv(&report, digits, &mut buf)?;
            write_text(out.as_deref(), &String::from_utf8(buf)?)?;
            if let Some(path) = json {
                write_text(Some(&path), &report.to_json())?;
            }
            let violations = report.violation_count();
            if violations > 0 {
                eprintln!(
                    "{violations} of {} trials violated a bound",
                    report.rows.len()
                );
                return Ok(ExitCode::from(1));
            }
        }
        Command::CheckClose { alpha, a, b } => {
            for (j, (x, y)) in load_pair(&a, &b)?.iter().enumerate() {
                if !is_alpha_close(x, y, &alpha)? {
                    println!("not close (job {j})");
                    return Ok(ExitCode::from(1));
                }
            }
            println!("close");
        }
        Command::MinAlpha { a, b, tol } => {
            let mut worst = rational::one();
            for (x, y) in load_pair(&a, &b)? {
                worst = worst.max(minimal_alpha(&x, &y, tol)?);
            }
            println!(
                "{}",
                rational::to_decimal_string(&worst, DEFAULT_DIGITS.max(digits_for(tol)))
            );
        }
        Command::Quanta { instance } => {
            let inst = load_instance(&instance)?;
            let per_job: Vec<_> = inst
                .jobs()
                .iter()
                .enumerate()
                .map(|(j, d)| compute_quanta(d, j))
                .collect();
            write_text(None, &to_json(&per_job)?)?;
        }
        Command::Order { instance } => {
            let order = gipp_order(&load_instance(&instance)?)?;
            write_text(None, &to_json(&order.quanta())?)?;
        }
        Command::Schedule {
            policy,
            alpha,
            predicted,
            out,
        } => {
            let inst = load_instance(&predicted)?;
            let schedule = match (policy, alpha) {
                (PolicyArg::Gipp, None) => build_gipp_schedule(&inst)?,
                (PolicyArg::Gipp, Some(_)) => bail!("--alpha only applies to --policy rg"),
                (PolicyArg::Rg, Some(a)) => build_rg_schedule(&inst, &a)?,
                (PolicyArg::Rg, None) => bail!("--policy rg needs --alpha"),
            };
            write_text(out.as_deref(), &schedule.to_json())?;
        }
        Command::Run {
            schedule,
            realization,
            fallback,
        } => {
            let schedule = Schedule::from_json(&read(&schedule)?)?;
            let realization: Realization = serde_json::from_str(&read(&realization)?)?;
            let mode = if fallback {
                ExecMode::Fallback
            } else {
                ExecMode::Strict
            };
            let result = execute(&schedule, &realization.sizes, mode)?;
            write_text(None, &to_json(&result)?)?;
        }
        Command::Evaluate {
            method,
            samples,
            seed,
            schedule,
            truth,
        } => {
            let schedule = Schedule::from_json(&read(&schedule)?)?;
            let truth = load_instance(&truth)?;
            let started = Instant::now();
            let report = match method {
                MethodArg::Closed => CostReport::exact(
                    Method::Closed,
                    &expected_cost_closed_form(&schedule, &truth)?,
                    started,
                ),
                MethodArg::Enum => CostReport::exact(
                    Method::Enum,
                    &expected_cost_enumeration(&schedule, &truth, caps.enumeration)?,
                    started,
                ),
                MethodArg::Mc => CostReport::monte_carlo(
                    &monte_carlo_cost(&schedule, &truth, samples, seed)?,
                    started,
                ),
            };
            write_text(None, &to_json(&report)?)?;
        }
        Command::Opt { instance } => {
            let inst = load_instance(&instance)?;
            let started = Instant::now();
            let report = CostReport::exact(
                Method::Opt,
                &brute_force_opt(&inst, caps.dp_states)?,
                started,
            );
            write_text(None, &to_json(&report)?)?;
        }
        Command::Gen(gen) => generate(gen)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn generate(gen: GenCommand) -> Result<()> {
    match gen {
        GenCommand::LowerBound {
            n,
            eps,
            out_truth,
            out_pred,
        } => {
            let (truth, pred) = lower_bound_pair(n, &eps)?;
            write_text(Some(&out_truth), &truth.to_json())?;
            write_text(Some(&out_pred), &pred.to_json())?;
        }
        GenCommand::Random { shape, seed, out } => {
            let inst = random_instance(&shape.params(), &mut ChaCha8Rng::seed_from_u64(seed))?;
            write_text(out.as_deref(), &inst.to_json())?;
        }
        GenCommand::ClosePair {
            alpha,
            shape,
            seed,
            out_truth,
            out_pred,
        } => {
            let (truth, pred) = alpha_close_pair(
                &shape.params(),
                &alpha,
                &mut ChaCha8Rng::seed_from_u64(seed),
            )?;
            write_text(Some(&out_truth), &truth.to_json())?;
            write_text(Some(&out_pred), &pred.to_json())?;
        }
    }
    Ok(())
}

/// Decimal digits needed to show a tolerance.
fn digits_for(tol: f64) -> usize {
    if tol > 0.0 && tol < 1.0 {
        (-tol.log10()).ceil() as usize + 1
    } else {
        0
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
