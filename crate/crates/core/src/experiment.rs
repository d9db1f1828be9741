//! The five-case verification harness.
//!
//! For each case a model is trained on seen-class data only, then its softmax
//! outputs are compared point-by-point against two candidate readings: the
//! conventional posterior p(y=k|x) over all classes (CV) and the latent
//! posterior p(y=k|x,s) conditioned on seenness (LC). Per-case mean squared
//! errors, raw squared-error samples, fixed probe points, and seen/unseen
//! cognizance scores are collected and emitted as plot-ready CSV files.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::datagen::{generate_scenario, Dataset};
use crate::dmvn::{sample_one, DiscretizedGaussian, Rng};
use crate::error::{LcError, Result};
use crate::network::{accuracy, forward, train, FfnParameters, TrainConfig, OUTPUTS};
use crate::oracle::{CaseId, ProbabilityOracle, ScenarioConfig};

/// One evaluated test point: the model's softmax against both readings, with
/// per-output-class squared errors.
#[derive(Debug, Clone)]
pub struct InterpretationRecord {
    pub point: [i64; 2],
    pub softmax: [f64; OUTPUTS],
    /// Posterior components of the seen labels (the displayed columns).
    pub cv_truth: [f64; OUTPUTS],
    /// Latent posterior components of the seen labels.
    pub lc_truth: [f64; OUTPUTS],
    pub se_cv: [f64; OUTPUTS],
    pub se_lc: [f64; OUTPUTS],
}

/// One table row: per-class MSE columns plus the pooled mean and spread.
#[derive(Debug, Clone, Copy)]
pub struct MseRow {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// Mean over all per-point-per-class squared errors.
    pub all: f64,
    /// Population standard deviation of the same pooled values.
    pub std: f64,
}

/// Everything measured for one trained model on one case.
#[derive(Debug, Clone)]
pub struct CaseReport {
    pub case_id: CaseId,
    pub unseen_prior: f64,
    pub mse_cv: MseRow,
    pub mse_lc: MseRow,
    pub test_accuracy: f64,
    /// Raw per-point records, kept for boxplot export.
    pub records: Vec<InterpretationRecord>,
    /// Test points skipped because the oracle was undefined there.
    pub skipped: usize,
}

/// Monotone surrogate g for the unknown map from a logit to the joint
/// probability that the class is correct and the instance seen.
#[derive(Debug, Clone, PartialEq)]
pub enum CognizanceFunction {
    Exp,
    Identity,
    /// Degenerate uninformative choice; useful as a null in ranking tests.
    Constant(f64),
}

impl CognizanceFunction {
    pub fn apply(&self, a: f64) -> f64 {
        match self {
            CognizanceFunction::Exp => a.exp(),
            CognizanceFunction::Identity => a,
            CognizanceFunction::Constant(c) => *c,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CognizanceFunction::Exp => "exp",
            CognizanceFunction::Identity => "identity",
            CognizanceFunction::Constant(_) => "const",
        }
    }
}

/// An unnormalized seen-score. For g = exp with any logit above the overflow
/// threshold the sum is computed as a log-sum-exp instead and `is_log` is
/// set; linear and log scores are not directly comparable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub value: f64,
    pub is_log: bool,
}

/// Logit level beyond which exp overflows f64 (exp(710) is infinite).
const EXP_OVERFLOW_LOGIT: f64 = 700.0;

/// Seen-score: the sum of g over the penultimate logits. With g = exp this
/// is exactly the softmax denominator.
pub fn seen_score(penultimate: &[f64], g: &CognizanceFunction) -> Score {
    if *g == CognizanceFunction::Exp {
        let max = penultimate.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max > EXP_OVERFLOW_LOGIT {
            let shifted: f64 = penultimate.iter().map(|a| (a - max).exp()).sum();
            return Score {
                value: max + shifted.ln(),
                is_log: true,
            };
        }
    }
    Score {
        value: penultimate.iter().map(|a| g.apply(*a)).sum(),
        is_log: false,
    }
}

/// Evaluates the trained model against both readings on every test point.
///
/// Points where the oracle is undefined (zero marginal, possible deep in the
/// tails) are skipped and counted rather than failing the run.
pub fn interpretation_errors(
    params: &FfnParameters,
    oracle: &ProbabilityOracle,
    test_set: &Dataset,
) -> Result<(Vec<InterpretationRecord>, usize)> {
    if oracle.seen_labels() != [0, 1, 2] {
        return Err(LcError::InvalidScenario(
            "interpretation requires seen labels {0, 1, 2} mapped to the outputs".into(),
        ));
    }
    let mut records = Vec::with_capacity(test_set.len());
    let mut skipped = 0usize;
    for p in &test_set.points {
        let point: [i64; 2] =
            p.coordinates
                .as_slice()
                .try_into()
                .map_err(|_| LcError::DimensionMismatch {
                    expected: 2,
                    got: p.coordinates.len(),
                })?;
        let (posterior, latent) = match (oracle.posterior(&point), oracle.latent_posterior(&point))
        {
            (Ok(a), Ok(b)) => (a, b),
            (Err(LcError::UndefinedPosterior(_)), _) | (_, Err(LcError::UndefinedPosterior(_))) => {
                skipped += 1;
                continue;
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        let softmax = forward(params, point)?.softmax;
        let mut record = InterpretationRecord {
            point,
            softmax,
            cv_truth: [posterior[0], posterior[1], posterior[2]],
            lc_truth: [latent[0], latent[1], latent[2]],
            se_cv: [0.0; OUTPUTS],
            se_lc: [0.0; OUTPUTS],
        };
        for k in 0..OUTPUTS {
            record.se_cv[k] = (softmax[k] - record.cv_truth[k]).powi(2);
            record.se_lc[k] = (softmax[k] - record.lc_truth[k]).powi(2);
        }
        records.push(record);
    }
    Ok((records, skipped))
}

fn mse_row(per_point: impl Fn(&InterpretationRecord) -> [f64; OUTPUTS] + Copy, records: &[InterpretationRecord]) -> MseRow {
    let n = records.len() as f64;
    let mut class_sums = [0.0; OUTPUTS];
    for r in records {
        for (sum, se) in class_sums.iter_mut().zip(per_point(r)) {
            *sum += se;
        }
    }
    let c = [class_sums[0] / n, class_sums[1] / n, class_sums[2] / n];
    let all = (c[0] + c[1] + c[2]) / 3.0;
    let pooled_n = 3.0 * n;
    let mut var_sum = 0.0;
    for r in records {
        for se in per_point(r) {
            var_sum += (se - all) * (se - all);
        }
    }
    MseRow {
        c0: c[0],
        c1: c[1],
        c2: c[2],
        all,
        std: (var_sum / pooled_n).sqrt(),
    }
}

/// Aggregates records into the per-case table row pair.
pub fn case_report(
    case_id: CaseId,
    unseen_prior: f64,
    records: Vec<InterpretationRecord>,
    skipped: usize,
    test_accuracy: f64,
) -> Result<CaseReport> {
    if records.is_empty() {
        return Err(LcError::Empty("interpretation records"));
    }
    Ok(CaseReport {
        case_id,
        unseen_prior,
        mse_cv: mse_row(|r| r.se_cv, &records),
        mse_lc: mse_row(|r| r.se_lc, &records),
        test_accuracy,
        records,
        skipped,
    })
}

/// SM/CV/LC values of one designated output class at one probe point.
#[derive(Debug, Clone, Copy)]
pub struct ProbeTriple {
    pub point: [i64; 2],
    pub class_index: usize,
    pub sm: f64,
    pub cv: f64,
    pub lc: f64,
}

/// The standard probe set: one point near each seen class mean, each paired
/// with that class's output index. The middle point sits next to the unseen
/// center, whose true position is off the integer lattice.
pub fn default_probes() -> Vec<([i64; 2], usize)> {
    vec![([3, 3], 0), ([4, 6], 1), ([2, 9], 2)]
}

/// Reads the model and both oracle interpretations at fixed probe points.
pub fn probe_points(
    params: &FfnParameters,
    oracle: &ProbabilityOracle,
    probes: &[([i64; 2], usize)],
) -> Result<Vec<ProbeTriple>> {
    probes
        .iter()
        .map(|&(point, class_index)| {
            let softmax = forward(params, point)?.softmax;
            let posterior = oracle.posterior(&point)?;
            let latent = oracle.latent_posterior(&point)?;
            Ok(ProbeTriple {
                point,
                class_index,
                sm: softmax[class_index],
                cv: posterior[class_index],
                lc: latent[class_index],
            })
        })
        .collect()
}

/// One scored evaluation point.
#[derive(Debug, Clone)]
pub struct ScoreRow {
    pub point: [i64; 2],
    pub seen: bool,
    pub g: &'static str,
    pub score: Score,
}

/// Score rows plus the per-g ranking statistic.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
    /// (g name, area under the ROC curve of score vs seen flag).
    pub auc: Vec<(&'static str, f64)>,
}

/// Total order on scores: log-flagged scores represent values beyond f64
/// range and rank above every linear score.
fn score_key(s: &Score) -> (u8, f64) {
    (s.is_log as u8, s.value)
}

/// Area under the ROC curve by the rank-sum method with average ranks for
/// ties, so an uninformative constant score yields exactly 0.5.
fn ranking_auc(scored: &[(Score, bool)]) -> f64 {
    let n_seen = scored.iter().filter(|(_, seen)| *seen).count();
    let n_unseen = scored.len() - n_seen;
    if n_seen == 0 || n_unseen == 0 {
        return f64::NAN;
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| {
        score_key(&scored[a].0)
            .partial_cmp(&score_key(&scored[b].0))
            .expect("scores are finite")
    });
    let mut rank_sum_seen = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && score_key(&scored[order[j]].0) == score_key(&scored[order[i]].0) {
            j += 1;
        }
        // 1-based ranks i+1 ..= j averaged across the tie group.
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if scored[idx].1 {
                rank_sum_seen += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum_seen - (n_seen * (n_seen + 1)) as f64 / 2.0;
    u / (n_seen as f64 * n_unseen as f64)
}

/// Scores the scenario's seen test points against freshly sampled
/// unseen-class points, one row per point per g.
///
/// Unseen points are drawn from the unseen classes with priors renormalized
/// over that set, using the caller's generator (an independent seed stream
/// from the train/test splits).
pub fn score_sweep(
    params: &FfnParameters,
    config: &ScenarioConfig,
    gs: &[CognizanceFunction],
    rng: &mut Rng,
) -> Result<ScoreTable> {
    config.validate()?;
    let (_, test_set) = generate_scenario(config)?;
    let seen_points: Vec<[i64; 2]> = test_set
        .points
        .iter()
        .map(|p| {
            p.coordinates
                .as_slice()
                .try_into()
                .map_err(|_| LcError::DimensionMismatch {
                    expected: 2,
                    got: p.coordinates.len(),
                })
        })
        .collect::<Result<_>>()?;

    let seen_sorted = config.seen_sorted();
    let unseen_classes: Vec<(f64, DiscretizedGaussian)> = config
        .classes
        .iter()
        .filter(|c| !seen_sorted.contains(&c.label))
        .map(|c| {
            Ok((
                c.prior,
                DiscretizedGaussian::new(c.mean.clone(), c.variances.clone())?,
            ))
        })
        .collect::<Result<_>>()?;
    let unseen_mass: f64 = unseen_classes.iter().map(|(p, _)| p).sum();
    if unseen_mass <= 0.0 {
        return Err(LcError::InvalidScenario(
            "score sweep needs unseen prior mass to sample from".into(),
        ));
    }
    let mut unseen_points = Vec::with_capacity(config.test_size);
    for _ in 0..config.test_size {
        let u = rng.next_f64() * unseen_mass;
        let mut acc = 0.0;
        let mut chosen = &unseen_classes[unseen_classes.len() - 1].1;
        for (prior, dist) in &unseen_classes {
            acc += prior;
            if u < acc {
                chosen = dist;
                break;
            }
        }
        let point: [i64; 2] = sample_one(chosen, rng)
            .as_slice()
            .try_into()
            .map_err(|_| LcError::DimensionMismatch { expected: 2, got: 0 })?;
        unseen_points.push(point);
    }

    let mut rows = Vec::with_capacity(gs.len() * (seen_points.len() + unseen_points.len()));
    let mut auc = Vec::with_capacity(gs.len());
    for g in gs {
        let mut scored = Vec::new();
        for (points, seen) in [(&seen_points, true), (&unseen_points, false)] {
            for &point in points.iter() {
                let trace = forward(params, point)?;
                let score = seen_score(&trace.penultimate, g);
                scored.push((score, seen));
                rows.push(ScoreRow {
                    point,
                    seen,
                    g: g.name(),
                    score,
                });
            }
        }
        auc.push((g.name(), ranking_auc(&scored)));
    }
    Ok(ScoreTable { rows, auc })
}

/// Stable mix of a base seed with structural indices, so distinct
/// (case, run) pairs get decorrelated scenario seeds.
pub fn derive_seed(base: u64, case_idx: u64, run_idx: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(splitmix(splitmix(base).wrapping_add(case_idx)).wrapping_add(run_idx))
}

/// Sub-stream tags off a run's scenario seed. The train and test splits use
/// the scenario seed and its ^1 inside dataset generation; these must not
/// collide with those two.
pub const SEED_TAG_INIT: u64 = 2;
pub const SEED_TAG_SHUFFLE: u64 = 3;
pub const SEED_TAG_UNSEEN: u64 = 4;

/// What to run and how.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub cases: Vec<CaseId>,
    pub base_seed: u64,
    pub runs_per_case: usize,
    pub epochs: u32,
    /// Worker threads for case-level parallelism.
    pub jobs: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            cases: CaseId::ALL.to_vec(),
            base_seed: 0,
            runs_per_case: 3,
            epochs: 40,
            jobs: CaseId::ALL.len(),
        }
    }
}

/// One seeded training run of one case.
#[derive(Debug, Clone)]
pub struct CaseRun {
    /// The run's scenario seed (reported in table3.csv).
    pub seed: u64,
    pub report: CaseReport,
    pub probes: Vec<ProbeTriple>,
    pub scores: ScoreTable,
    pub train_secs: f64,
}

/// All runs of one case, or the failure that stopped it.
#[derive(Debug, Clone)]
pub struct CaseOutcome {
    pub case_id: CaseId,
    pub runs: Vec<CaseRun>,
    pub failure: Option<String>,
}

/// Full report bundle across cases and seeds.
#[derive(Debug, Clone)]
pub struct RunBundle {
    pub cases: Vec<CaseOutcome>,
}

impl RunBundle {
    pub fn outcome(&self, case: CaseId) -> Option<&CaseOutcome> {
        self.cases.iter().find(|o| o.case_id == case)
    }

    /// Mean CV and LC ALL-MSE across a case's runs.
    pub fn mean_all_mse(&self, case: CaseId) -> Option<(f64, f64)> {
        let outcome = self.outcome(case)?;
        if outcome.runs.is_empty() {
            return None;
        }
        let n = outcome.runs.len() as f64;
        let cv = outcome.runs.iter().map(|r| r.report.mse_cv.all).sum::<f64>() / n;
        let lc = outcome.runs.iter().map(|r| r.report.mse_lc.all).sum::<f64>() / n;
        Some((cv, lc))
    }

    pub fn all_succeeded(&self) -> bool {
        self.cases.iter().all(|o| o.failure.is_none())
    }
}

fn run_one(case: CaseId, options: &RunOptions, run_idx: usize) -> Result<CaseRun> {
    let scenario_seed = derive_seed(options.base_seed, case.index() as u64, run_idx as u64);
    let config = ScenarioConfig::builtin(case, scenario_seed);
    let (train_set, test_set) = generate_scenario(&config)?;
    let oracle = ProbabilityOracle::new(&config)?;

    let init = FfnParameters::glorot(&mut Rng::seeded(scenario_seed ^ SEED_TAG_INIT));
    let train_config = TrainConfig {
        epochs: options.epochs,
        shuffle_seed: scenario_seed ^ SEED_TAG_SHUFFLE,
        ..TrainConfig::default()
    };
    let started = Instant::now();
    let (params, _history) = train(init, &train_set, &train_config)?;
    let train_secs = started.elapsed().as_secs_f64();

    let test_accuracy = accuracy(&params, &test_set)?;
    let (records, skipped) = interpretation_errors(&params, &oracle, &test_set)?;
    let report = case_report(
        case,
        1.0 - oracle.latent_prior(),
        records,
        skipped,
        test_accuracy,
    )?;
    let probes = probe_points(&params, &oracle, &default_probes())?;
    let scores = score_sweep(
        &params,
        &config,
        &[CognizanceFunction::Exp, CognizanceFunction::Identity],
        &mut Rng::seeded(scenario_seed ^ SEED_TAG_UNSEEN),
    )?;
    Ok(CaseRun {
        seed: scenario_seed,
        report,
        probes,
        scores,
        train_secs,
    })
}

/// Runs every requested case for every seed. Cases run in parallel (bounded
/// by `jobs`); a failure inside one case marks that case and leaves the
/// others untouched.
pub fn run_all(options: &RunOptions) -> Result<RunBundle> {
    if options.cases.is_empty() || options.runs_per_case == 0 {
        return Err(LcError::InvalidScenario(
            "need at least one case and one run".into(),
        ));
    }
    if options.jobs == 0 {
        return Err(LcError::InvalidScenario("jobs must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .expect("thread pool construction");
    let cases = pool.install(|| {
        options
            .cases
            .par_iter()
            .map(|&case_id| {
                let mut runs = Vec::with_capacity(options.runs_per_case);
                let mut failure = None;
                for run_idx in 0..options.runs_per_case {
                    match run_one(case_id, options, run_idx) {
                        Ok(run) => runs.push(run),
                        Err(e) => {
                            failure = Some(format!("run {run_idx}: {e}"));
                            break;
                        }
                    }
                }
                CaseOutcome {
                    case_id,
                    runs,
                    failure,
                }
            })
            .collect()
    });
    Ok(RunBundle { cases })
}

/// Formats a score for CSV: log-flagged values are wrapped so they cannot be
/// mistaken for linear ones.
fn format_score(score: &Score) -> String {
    if score.is_log {
        format!("log({})", score.value)
    } else {
        format!("{}", score.value)
    }
}

/// `table3.csv`: one row per case, interpretation, and seeded run.
pub fn write_table3<W: Write>(bundle: &RunBundle, out: &mut W) -> Result<()> {
    writeln!(out, "case,unseen_prior,interp,c0,c1,c2,all,std,test_acc,seed")?;
    for outcome in &bundle.cases {
        for run in &outcome.runs {
            let r = &run.report;
            for (interp, row) in [("CV", &r.mse_cv), ("LC", &r.mse_lc)] {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{}",
                    r.case_id,
                    r.unseen_prior,
                    interp,
                    row.c0,
                    row.c1,
                    row.c2,
                    row.all,
                    row.std,
                    r.test_accuracy,
                    run.seed
                )?;
            }
        }
    }
    Ok(())
}

/// `boxplot.csv`: every raw squared error, one row per record per class,
/// pooled across seeds.
pub fn write_boxplot<W: Write>(bundle: &RunBundle, out: &mut W) -> Result<()> {
    writeln!(out, "case,interp,class,squared_error")?;
    for outcome in &bundle.cases {
        for run in &outcome.runs {
            for record in &run.report.records {
                for k in 0..OUTPUTS {
                    writeln!(out, "{},CV,C{k},{}", outcome.case_id, record.se_cv[k])?;
                    writeln!(out, "{},LC,C{k},{}", outcome.case_id, record.se_lc[k])?;
                }
            }
        }
    }
    Ok(())
}

/// `probes.csv`: SM/CV/LC triples at the probe points, one row per seeded
/// run per probe.
pub fn write_probes<W: Write>(bundle: &RunBundle, out: &mut W) -> Result<()> {
    writeln!(out, "case,x1,x2,class,sm,cv,lc")?;
    for outcome in &bundle.cases {
        for run in &outcome.runs {
            for p in &run.probes {
                writeln!(
                    out,
                    "{},{},{},C{},{},{},{}",
                    outcome.case_id, p.point[0], p.point[1], p.class_index, p.sm, p.cv, p.lc
                )?;
            }
        }
    }
    Ok(())
}

/// `scores.csv`: per-point seen-scores followed by one summary row per case,
/// run, and g carrying the ranking statistic (seen_flag column = `auc`).
pub fn write_scores<W: Write>(bundle: &RunBundle, out: &mut W) -> Result<()> {
    writeln!(out, "case,x1,x2,seen_flag,g,score")?;
    for outcome in &bundle.cases {
        for run in &outcome.runs {
            for row in &run.scores.rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    outcome.case_id,
                    row.point[0],
                    row.point[1],
                    row.seen as u8,
                    row.g,
                    format_score(&row.score)
                )?;
            }
            for (g, auc) in &run.scores.auc {
                writeln!(out, "{},,,auc,{g},{auc}", outcome.case_id)?;
            }
        }
    }
    Ok(())
}
