//! The `lc-lab` command line.
//!
//! One binary with subcommands sharing config parsing and seed plumbing.
//! Exit codes: 0 on success, 2 for bad input (usage, config validation,
//! data parse errors), 1 for runtime failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde::Serialize;

use crate::datagen::{generate_scenario, read_dataset, write_dataset, Split};
use crate::dmvn::{pmf_binary, pmf_successive, DiscretizedGaussian, Rng};
use crate::error::{LcError, Result};
use crate::experiment::{
    run_all, write_boxplot, write_probes, write_scores, write_table3, RunBundle, RunOptions,
    SEED_TAG_INIT, SEED_TAG_SHUFFLE,
};
use crate::network::{accuracy, train, FfnParameters, ModelFile, TrainConfig};
use crate::oracle::{CaseId, ProbabilityOracle, ScenarioConfig};

/// Seed used when neither `--seed` nor `LC_LAB_SEED` is given.
pub const DEFAULT_SEED: u64 = 17;

/// Environment fallback consulted when `--seed` is absent.
pub const SEED_ENV_VAR: &str = "LC_LAB_SEED";

#[derive(Parser)]
#[command(
    name = "lc-lab",
    about = "Softmax-interpretation verification lab: exact Bayesian oracle vs a trained 2-16-3 net on synthetic discretized-Gaussian cases",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Case selection shared by most subcommands: one case or all five.
#[derive(Args, Debug)]
#[command(group(ArgGroup::new("selection").args(["case", "all"])))]
struct CaseSelect {
    /// Case to run (I..V, or 1..5).
    #[arg(long)]
    case: Option<CaseId>,
    /// Run all five cases.
    #[arg(long)]
    all: bool,
}

impl CaseSelect {
    fn cases(&self, default_all: bool) -> Result<Vec<CaseId>> {
        if self.all {
            return Ok(CaseId::ALL.to_vec());
        }
        match self.case {
            Some(case) => Ok(vec![case]),
            None if default_all => Ok(CaseId::ALL.to_vec()),
            None => Err(LcError::InvalidScenario(
                "select a case with --case or pass --all".into(),
            )),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/test CSV datasets for the selected cases.
    GenData {
        #[command(flatten)]
        select: CaseSelect,
        /// Scenario config JSON replacing the built-in case definition.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: ./runs/<timestamp>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the 2-16-3 model on one case; writes model JSON and history CSV.
    Train {
        #[command(flatten)]
        select: CaseSelect,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Training epochs.
        #[arg(long, default_value_t = 40)]
        epochs: u32,
        /// Directory holding train_<case>.csv / test_<case>.csv; generated
        /// in memory when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full comparison and emit table3/boxplot/probes/scores CSVs.
    Table3 {
        #[command(flatten)]
        select: CaseSelect,
        #[arg(long)]
        seed: Option<u64>,
        /// Seeded runs per case.
        #[arg(long, default_value_t = 3)]
        seeds: usize,
        #[arg(long, default_value_t = 40)]
        epochs: u32,
        /// Case-level worker threads (default: number of cases).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate SM/CV/LC at the fixed probe points for one case.
    Probe {
        #[command(flatten)]
        select: CaseSelect,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 40)]
        epochs: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score seen test points vs fresh unseen points with the configured g.
    Scores {
        #[command(flatten)]
        select: CaseSelect,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 40)]
        epochs: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print exact oracle probabilities at one integer point as JSON.
    Oracle {
        #[command(flatten)]
        select: CaseSelect,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Query point, comma-separated integers (e.g. 4,6).
        #[arg(long)]
        point: String,
    },
    /// Cross-check the two PMF constructions on random inputs.
    PmfCheck {
        /// Dimension range, inclusive (e.g. 1..5).
        #[arg(long, default_value = "1..5")]
        dims: String,
        /// Random (distribution, point) pairs per dimension.
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Runs the CLI and returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                LcError::InvalidScenario(_) | LcError::Parse { .. } => 2,
                _ => 1,
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::GenData {
            select,
            config,
            seed,
            out,
        } => cmd_gen_data(&select, config.as_deref(), seed, out),
        Command::Train {
            select,
            config,
            seed,
            epochs,
            data,
            out,
        } => cmd_train(&select, config.as_deref(), seed, epochs, data.as_deref(), out),
        Command::Table3 {
            select,
            seed,
            seeds,
            epochs,
            jobs,
            out,
        } => cmd_table3(&select, seed, seeds, epochs, jobs, out),
        Command::Probe {
            select,
            seed,
            epochs,
            out,
        } => cmd_probe(&select, seed, epochs, out),
        Command::Scores {
            select,
            seed,
            epochs,
            out,
        } => cmd_scores(&select, seed, epochs, out),
        Command::Oracle {
            select,
            config,
            seed,
            point,
        } => cmd_oracle(&select, config.as_deref(), seed, &point),
        Command::PmfCheck { dims, trials, seed } => cmd_pmf_check(&dims, trials, seed),
    }
}

/// Seed precedence: explicit flag, then the environment fallback, then the
/// fixed default.
fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV_VAR) {
        Ok(value) => value.parse::<u64>().map_err(|_| {
            LcError::InvalidScenario(format!("{SEED_ENV_VAR}={value:?} is not a u64"))
        }),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

/// Output directory: the flag, or ./runs/<unix-seconds>. Created if needed.
fn resolve_out(flag: Option<PathBuf>) -> Result<PathBuf> {
    let dir = flag.unwrap_or_else(|| {
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        PathBuf::from("runs").join(stamp.to_string())
    });
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)?;
    let config: ScenarioConfig = serde_json::from_str(&text).map_err(|e| LcError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    config.validate()?;
    Ok(config)
}

/// The scenario a subcommand operates on: a config file if given (seed flag
/// still wins over the file's seed), else the built-in case.
fn resolve_scenario(
    case: CaseId,
    config_path: Option<&Path>,
    seed_flag: Option<u64>,
) -> Result<ScenarioConfig> {
    match config_path {
        Some(path) => {
            let mut config = load_config(path)?;
            if let Some(seed) = seed_flag {
                config.seed = seed;
            }
            Ok(config)
        }
        None => Ok(ScenarioConfig::builtin(case, resolve_seed(seed_flag)?)),
    }
}

fn cmd_gen_data(
    select: &CaseSelect,
    config_path: Option<&Path>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let out = resolve_out(out)?;
    for case in select.cases(false)? {
        let config = resolve_scenario(case, config_path, seed)?;
        let (train_set, test_set) = generate_scenario(&config)?;
        let train_path = out.join(format!("train_{case}.csv"));
        let test_path = out.join(format!("test_{case}.csv"));
        write_dataset(&train_set, &train_path)?;
        write_dataset(&test_set, &test_path)?;
        println!(
            "case {case}: wrote {} ({} rows) and {} ({} rows)",
            train_path.display(),
            train_set.len(),
            test_path.display(),
            test_set.len()
        );
    }
    Ok(())
}

fn cmd_train(
    select: &CaseSelect,
    config_path: Option<&Path>,
    seed: Option<u64>,
    epochs: u32,
    data: Option<&Path>,
    out: Option<PathBuf>,
) -> Result<()> {
    let out = resolve_out(out)?;
    for case in select.cases(false)? {
        let config = resolve_scenario(case, config_path, seed)?;
        let (train_set, test_set) = match data {
            Some(dir) => {
                let allowed = config.seen_sorted();
                let train_set = read_dataset(
                    &dir.join(format!("train_{case}.csv")),
                    &allowed,
                    &format!("seed{}", config.seed),
                    Split::Train,
                )?;
                let test_set = read_dataset(
                    &dir.join(format!("test_{case}.csv")),
                    &allowed,
                    &format!("seed{}", config.seed),
                    Split::Test,
                )?;
                (train_set, test_set)
            }
            None => generate_scenario(&config)?,
        };

        let init = FfnParameters::glorot(&mut Rng::seeded(config.seed ^ SEED_TAG_INIT));
        let train_config = TrainConfig {
            epochs,
            shuffle_seed: config.seed ^ SEED_TAG_SHUFFLE,
            ..TrainConfig::default()
        };
        let (params, history) = train(init, &train_set, &train_config)?;
        let test_acc = accuracy(&params, &test_set)?;

        let model_path = out.join(format!("model_{case}.json"));
        crate::network::write_model(
            &ModelFile::new(&params, &train_config, config.seed),
            &model_path,
        )?;
        let mut history_csv = String::from("epoch,mean_loss,train_accuracy\n");
        for h in &history {
            history_csv.push_str(&format!("{},{},{}\n", h.epoch, h.mean_loss, h.train_accuracy));
        }
        fs::write(out.join(format!("history_{case}.csv")), history_csv)?;
        println!(
            "case {case}: trained {} epochs, test accuracy {test_acc}, model at {}",
            epochs,
            model_path.display()
        );
    }
    Ok(())
}

fn write_bundle_files(bundle: &RunBundle, out: &Path, files: &[&str]) -> Result<()> {
    for &name in files {
        let path = out.join(name);
        let mut buffer = Vec::new();
        match name {
            "table3.csv" => write_table3(bundle, &mut buffer)?,
            "boxplot.csv" => write_boxplot(bundle, &mut buffer)?,
            "probes.csv" => write_probes(bundle, &mut buffer)?,
            "scores.csv" => write_scores(bundle, &mut buffer)?,
            other => unreachable!("unknown bundle file {other}"),
        }
        fs::write(&path, buffer)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Reports failed cases and names what was still written; true if all ran.
fn report_failures(bundle: &RunBundle) -> bool {
    for outcome in &bundle.cases {
        if let Some(failure) = &outcome.failure {
            eprintln!(
                "case {} failed ({failure}); emitted files hold its {} completed run(s)",
                outcome.case_id,
                outcome.runs.len()
            );
        }
    }
    bundle.all_succeeded()
}

fn cmd_table3(
    select: &CaseSelect,
    seed: Option<u64>,
    seeds: usize,
    epochs: u32,
    jobs: Option<usize>,
    out: Option<PathBuf>,
) -> Result<()> {
    let cases = select.cases(true)?;
    let out = resolve_out(out)?;
    let options = RunOptions {
        jobs: jobs.unwrap_or(cases.len()),
        cases,
        base_seed: resolve_seed(seed)?,
        runs_per_case: seeds,
        epochs,
    };
    let bundle = run_all(&options)?;
    write_bundle_files(
        &bundle,
        &out,
        &["table3.csv", "boxplot.csv", "probes.csv", "scores.csv"],
    )?;
    for outcome in &bundle.cases {
        if let Some((cv, lc)) = bundle.mean_all_mse(outcome.case_id) {
            let mean_acc = outcome.runs.iter().map(|r| r.report.test_accuracy).sum::<f64>()
                / outcome.runs.len() as f64;
            println!(
                "case {}: mean cv_all_mse {cv:.4}, mean lc_all_mse {lc:.4}, mean test_acc {mean_acc:.4}",
                outcome.case_id
            );
        }
    }
    if !report_failures(&bundle) {
        return Err(LcError::Numeric("one or more cases failed".into()));
    }
    Ok(())
}

fn single_case_bundle(case: CaseId, seed: Option<u64>, epochs: u32) -> Result<RunBundle> {
    let options = RunOptions {
        cases: vec![case],
        base_seed: resolve_seed(seed)?,
        runs_per_case: 1,
        epochs,
        jobs: 1,
    };
    let bundle = run_all(&options)?;
    if !report_failures(&bundle) {
        return Err(LcError::Numeric(format!("case {case} failed")));
    }
    Ok(bundle)
}

fn cmd_probe(
    select: &CaseSelect,
    seed: Option<u64>,
    epochs: u32,
    out: Option<PathBuf>,
) -> Result<()> {
    let out = resolve_out(out)?;
    for case in select.cases(false)? {
        let bundle = single_case_bundle(case, seed, epochs)?;
        write_bundle_files(&bundle, &out, &["probes.csv"])?;
        for run in &bundle.cases[0].runs {
            for p in &run.probes {
                println!(
                    "case {case} probe [{},{}] class C{}: sm {} cv {} lc {}",
                    p.point[0], p.point[1], p.class_index, p.sm, p.cv, p.lc
                );
            }
        }
    }
    Ok(())
}

fn cmd_scores(
    select: &CaseSelect,
    seed: Option<u64>,
    epochs: u32,
    out: Option<PathBuf>,
) -> Result<()> {
    let out = resolve_out(out)?;
    for case in select.cases(false)? {
        let bundle = single_case_bundle(case, seed, epochs)?;
        write_bundle_files(&bundle, &out, &["scores.csv"])?;
        for run in &bundle.cases[0].runs {
            for (g, auc) in &run.scores.auc {
                println!("case {case} g={g}: ranking auc {auc}");
            }
        }
    }
    Ok(())
}

/// All oracle quantities at one point, in one JSON document.
#[derive(Serialize)]
struct OracleReport {
    point: Vec<i64>,
    latent_prior: f64,
    marginal: f64,
    posterior: Vec<f64>,
    latent_posterior: Vec<f64>,
    seen_posterior: f64,
    unseen_posterior: f64,
}

/// Parses a comma-separated integer point; non-integer tokens are rejected,
/// since the data space is the integer lattice.
fn parse_point(text: &str) -> Result<Vec<i64>> {
    text.split(',')
        .map(|token| {
            token.trim().parse::<i64>().map_err(|_| {
                LcError::InvalidScenario(format!(
                    "point component {token:?} is not an integer"
                ))
            })
        })
        .collect()
}

fn cmd_oracle(
    select: &CaseSelect,
    config_path: Option<&Path>,
    seed: Option<u64>,
    point: &str,
) -> Result<()> {
    let cases = select.cases(false)?;
    let point = parse_point(point)?;
    for case in cases {
        let config = resolve_scenario(case, config_path, seed)?;
        let oracle = ProbabilityOracle::new(&config)?;
        let split = oracle.seen_posterior(&point)?;
        let report = OracleReport {
            point: point.clone(),
            latent_prior: oracle.latent_prior(),
            marginal: oracle.marginal(&point)?,
            posterior: oracle.posterior(&point)?,
            latent_posterior: oracle.latent_posterior(&point)?,
            seen_posterior: split.seen,
            unseen_posterior: split.unseen,
        };
        println!("{}", serde_json::to_string_pretty(&report)?);
    }
    Ok(())
}

/// Parses an inclusive `a..b` dimension range.
fn parse_dims(text: &str) -> Result<std::ops::RangeInclusive<usize>> {
    let err = || LcError::InvalidScenario(format!("bad --dims {text:?}; expected a..b"));
    let (lo, hi) = text.split_once("..").ok_or_else(err)?;
    let lo: usize = lo.trim().parse().map_err(|_| err())?;
    let hi: usize = hi.trim().parse().map_err(|_| err())?;
    if lo == 0 || hi < lo {
        return Err(err());
    }
    Ok(lo..=hi)
}

fn cmd_pmf_check(dims: &str, trials: usize, seed: Option<u64>) -> Result<()> {
    let dims = parse_dims(dims)?;
    let mut rng = Rng::seeded(resolve_seed(seed)?);
    let mut max_dev = 0.0f64;
    let mut evaluations = 0usize;
    for d in dims {
        for _ in 0..trials {
            let mean: Vec<f64> = (0..d).map(|_| 20.0 * rng.next_f64() - 10.0).collect();
            let variances: Vec<f64> = (0..d).map(|_| 0.25 + 15.75 * rng.next_f64()).collect();
            let dist = DiscretizedGaussian::new(mean, variances)?;
            let x: Vec<i64> = (0..d).map(|_| rng.below(30) as i64 - 15).collect();
            let a = pmf_successive(&x, &dist)?;
            let b = pmf_binary(&x, &dist)?;
            max_dev = max_dev.max((a - b).abs());
            evaluations += 1;
        }
    }
    println!("max |successive - binary| = {max_dev:e} over {evaluations} evaluations");
    if max_dev > 1e-12 {
        return Err(LcError::Numeric(format!(
            "PMF constructions disagree: max deviation {max_dev:e}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_parsing() {
        assert_eq!(parse_point("4,6").unwrap(), vec![4, 6]);
        assert_eq!(parse_point(" -3 , 12 ").unwrap(), vec![-3, 12]);
        assert!(parse_point("4.5,6").is_err());
        assert!(parse_point("4,").is_err());
        assert!(parse_point("a,b").is_err());
    }

    #[test]
    fn dims_parsing() {
        assert_eq!(parse_dims("1..5").unwrap(), 1..=5);
        assert_eq!(parse_dims("3..3").unwrap(), 3..=3);
        assert!(parse_dims("5..1").is_err());
        assert!(parse_dims("0..4").is_err());
        assert!(parse_dims("1-5").is_err());
    }

    #[test]
    fn seed_resolution_prefers_flag() {
        // The env fallback is covered by the CLI integration tests, where
        // the environment can be controlled per process.
        assert_eq!(resolve_seed(Some(5)).unwrap(), 5);
    }
}
