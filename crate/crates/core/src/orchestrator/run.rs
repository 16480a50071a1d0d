use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DecisionSpace, Hyperparameters, JobTag, Oracle, OracleError, RunError};
use crate::objective::aggregate;
use crate::zo::{
    converged, euclidean_norm, multi_point_gradient, project_box, sample_unit_direction, AdamState, BoxBounds,
    DirectionalEval, Schedules,
};

const CHECKPOINT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobSign {
    Plus,
    Minus,
}

impl std::fmt::Display for JobSign {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            JobSign::Plus => "+",
            JobSign::Minus => "-",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub hyper: Hyperparameters,
    pub seed: u64,
    /// Worker count; 0 lets rayon decide.
    pub parallelism: usize,
    pub checkpoint_dir: Option<PathBuf>,
    /// Stop cleanly after this iteration, leaving a resumable checkpoint.
    pub stop_after: Option<u64>,
}

impl RunSettings {
    pub fn new(hyper: Hyperparameters, seed: u64) -> Self {
        Self { hyper, seed, parallelism: 0, checkpoint_dir: None, stop_after: None }
    }

    /// Hash of everything that determines the iterate sequence. Worker count,
    /// output options and the iteration cap are excluded, so a finished run
    /// can be extended from its last checkpoint.
    pub fn config_hash<O: Oracle + ?Sized>(&self, oracle: &O, x0: &[f64]) -> String {
        let mut h = Sha256::new();
        h.update(oracle.fingerprint().as_bytes());
        let hyper = Hyperparameters { max_iterations: 0, ..self.hyper };
        h.update(serde_json::to_vec(&hyper).expect("hyperparameters serialize"));
        h.update(self.seed.to_le_bytes());
        for v in x0 {
            h.update(v.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub word_pos: u128,
}

impl RngState {
    fn restore(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_word_pos(self.word_pos);
        rng
    }

    fn capture(seed: u64, rng: &ChaCha20Rng) -> Self {
        Self { seed, word_pos: rng.get_word_pos() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: u64,
    /// Aggregate objective at the iterate, when logging evaluations are on.
    pub f: Option<f64>,
    pub scenario_values: Vec<f64>,
    /// Normalized iterate `x_k` before the update.
    pub x: Vec<f64>,
    pub grad_norm: f64,
    pub eta: f64,
    pub r: f64,
    pub step_norm: f64,
    pub simulations: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    Interrupted,
}

/// Complete optimizer state between iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: u32,
    pub config_hash: String,
    /// Index of the next iteration to run.
    pub k_next: u64,
    pub x: Vec<f64>,
    pub adam: AdamState,
    pub schedules: Schedules,
    pub rng: RngState,
    pub records: Vec<IterationRecord>,
    pub stop: Option<StopReason>,
}

impl Checkpoint {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RunError> {
        let text = fs::read_to_string(path)?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.schema != CHECKPOINT_SCHEMA {
            return Err(RunError::Settings(format!("unsupported checkpoint schema {}", ck.schema)));
        }
        Ok(ck)
    }

    /// Writes through a temporary file so a crash never leaves a torn checkpoint.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), RunError> {
        let path = path.as_ref();
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(self)?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    /// Final normalized iterate.
    pub x: Vec<f64>,
    pub records: Vec<IterationRecord>,
    pub stop: StopReason,
    pub final_objective: Option<f64>,
    pub final_scenario_values: Vec<f64>,
    pub config_hash: String,
}

impl RunOutcome {
    pub fn total_simulations(&self) -> usize {
        self.records.iter().map(|r| r.simulations).sum::<usize>() + self.final_scenario_values.len()
    }
}

/// Single-scenario oracle over a closure; handy for synthetic benchmarks.
pub struct FnOracle<F> {
    label: String,
    space: DecisionSpace,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnOracle<F> {
    pub fn new(label: impl Into<String>, space: DecisionSpace, f: F) -> Self {
        Self { label: label.into(), space, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Oracle for FnOracle<F> {
    fn space(&self) -> &DecisionSpace {
        &self.space
    }

    fn weights(&self) -> Vec<f64> {
        vec![1.0]
    }

    fn evaluate_scenario(&self, x: &[f64], _scenario: usize) -> Result<f64, OracleError> {
        Ok((self.f)(x))
    }

    fn fingerprint(&self) -> String {
        format!("fn:{}:{}", self.label, serde_json::to_string(&self.space).unwrap_or_default())
    }
}

struct Job {
    tag: JobTag,
    point: Vec<f64>,
}

fn build_pool(parallelism: usize) -> Result<rayon::ThreadPool, RunError> {
    rayon::ThreadPoolBuilder::new().num_threads(parallelism).build().map_err(|e| RunError::Pool(e.to_string()))
}

fn execute<O: Oracle + ?Sized>(pool: &rayon::ThreadPool, oracle: &O, jobs: &[Job]) -> Vec<Result<f64, OracleError>> {
    pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                let value = oracle.evaluate_scenario(&job.point, job.tag.scenario)?;
                if value.is_finite() {
                    Ok(value)
                } else {
                    Err(OracleError::NonFinite(value))
                }
            })
            .collect()
    })
}

/// First failure in job order, so the reported error does not depend on scheduling.
fn gather(jobs: Vec<Job>, results: Vec<Result<f64, OracleError>>) -> Result<Vec<f64>, (Job, OracleError)> {
    let mut values = Vec::with_capacity(results.len());
    for (job, result) in jobs.into_iter().zip(results) {
        match result {
            Ok(v) => values.push(v),
            Err(e) => return Err((job, e)),
        }
    }
    Ok(values)
}

/// Aggregate objective and per-scenario values at a normalized point.
pub fn evaluate<O: Oracle + ?Sized>(oracle: &O, x: &[f64], parallelism: usize) -> Result<(f64, Vec<f64>), RunError> {
    let pool = build_pool(parallelism)?;
    let jobs: Vec<Job> = (0..oracle.weights().len())
        .map(|scenario| Job { tag: JobTag { iteration: 0, direction: None, sign: None, scenario }, point: x.to_vec() })
        .collect();
    let results = execute(&pool, oracle, &jobs);
    let values = gather(jobs, results).map_err(|(job, source)| RunError::Oracle {
        tag: job.tag,
        point: job.point,
        source,
        checkpoint: None,
    })?;
    let total = aggregate(&values, &oracle.weights()).map_err(|e| RunError::Oracle {
        tag: JobTag { iteration: 0, direction: None, sign: None, scenario: 0 },
        point: x.to_vec(),
        source: e.into(),
        checkpoint: None,
    })?;
    Ok((total, values))
}

/// Runs the optimizer from the normalized start `x0`.
pub fn run<O: Oracle + ?Sized>(oracle: &O, x0: &[f64], settings: &RunSettings) -> Result<RunOutcome, RunError> {
    settings.hyper.validate()?;
    let d = oracle.space().dimension();
    crate::zo::check_len(d, x0.len())?;
    let unit = BoxBounds::unit(d)?;
    let x = project_box(x0, &unit)?.into_inner();
    let start = Checkpoint {
        schema: CHECKPOINT_SCHEMA,
        config_hash: settings.config_hash(oracle, x0),
        k_next: 1,
        x,
        adam: AdamState::new(d, settings.hyper.beta1, settings.hyper.beta2, settings.hyper.epsilon)?,
        schedules: settings.hyper.schedules()?,
        rng: RngState::capture(settings.seed, &ChaCha20Rng::seed_from_u64(settings.seed)),
        records: Vec::new(),
        stop: None,
    };
    drive(oracle, start, settings)
}

/// Continues from a checkpoint written by a run with the same configuration.
pub fn resume<O: Oracle + ?Sized>(
    oracle: &O,
    x0: &[f64],
    checkpoint: Checkpoint,
    settings: &RunSettings,
) -> Result<RunOutcome, RunError> {
    settings.hyper.validate()?;
    let expected = settings.config_hash(oracle, x0);
    if checkpoint.config_hash != expected {
        return Err(RunError::CheckpointMismatch { expected, found: checkpoint.config_hash });
    }
    let mut checkpoint = checkpoint;
    // a cap reached earlier may have been raised; the loop re-checks it
    if matches!(checkpoint.stop, Some(StopReason::Interrupted | StopReason::MaxIterations)) {
        checkpoint.stop = None;
    }
    drive(oracle, checkpoint, settings)
}

fn save_checkpoint(dir: &Path, state: &Checkpoint) -> Result<PathBuf, RunError> {
    fs::create_dir_all(dir)?;
    let numbered = dir.join(format!("k{:04}.json", state.k_next - 1));
    state.save(&numbered)?;
    let latest = dir.join("latest.json");
    state.save(&latest)?;
    Ok(latest)
}

fn drive<O: Oracle + ?Sized>(
    oracle: &O,
    mut state: Checkpoint,
    settings: &RunSettings,
) -> Result<RunOutcome, RunError> {
    let hyper = &settings.hyper;
    let d = oracle.space().dimension();
    let weights = oracle.weights();
    let n_scenarios = weights.len();
    if n_scenarios == 0 {
        return Err(RunError::Settings("oracle exposes no scenarios".into()));
    }
    let unit = BoxBounds::unit(d)?;
    let pool = build_pool(settings.parallelism)?;
    let mut rng = state.rng.restore();

    while state.stop.is_none() {
        let k = state.k_next;
        if k > hyper.max_iterations {
            state.stop = Some(StopReason::MaxIterations);
            break;
        }
        let started = Instant::now();
        let (eta, r) = (state.schedules.eta, state.schedules.r);

        // directions are drawn before dispatch so RNG use is schedule-independent
        let directions: Vec<Vec<f64>> =
            (0..hyper.batch_size).map(|_| sample_unit_direction(d, &mut rng)).collect::<Result<_, _>>()?;
        let mut jobs = Vec::with_capacity((2 * hyper.batch_size + 1) * n_scenarios);
        for (n, u) in directions.iter().enumerate() {
            for (sign, s) in [(JobSign::Plus, 1.0), (JobSign::Minus, -1.0)] {
                let point: Vec<f64> = state.x.iter().zip(u).map(|(x, u)| x + s * r * u).collect();
                for scenario in 0..n_scenarios {
                    jobs.push(Job {
                        tag: JobTag { iteration: k, direction: Some(n), sign: Some(sign), scenario },
                        point: point.clone(),
                    });
                }
            }
        }
        if hyper.log_objective {
            for scenario in 0..n_scenarios {
                jobs.push(Job {
                    tag: JobTag { iteration: k, direction: None, sign: None, scenario },
                    point: state.x.clone(),
                });
            }
        }
        let simulations = jobs.len();
        let results = execute(&pool, oracle, &jobs);
        let values = match gather(jobs, results) {
            Ok(v) => v,
            Err((job, source)) => {
                let checkpoint = match &settings.checkpoint_dir {
                    Some(dir) => Some(save_checkpoint(dir, &state)?),
                    None => None,
                };
                return Err(RunError::Oracle { tag: job.tag, point: job.point, source, checkpoint });
            }
        };
        debug_assert_eq!(values.len(), simulations);

        let oracle_failure = |e: crate::objective::ObjectiveError| RunError::Oracle {
            tag: JobTag { iteration: k, direction: None, sign: None, scenario: 0 },
            point: state.x.clone(),
            source: e.into(),
            checkpoint: None,
        };
        let mut evals = Vec::with_capacity(hyper.batch_size);
        for (n, u) in directions.into_iter().enumerate() {
            let base = 2 * n * n_scenarios;
            let f_plus = aggregate(&values[base..base + n_scenarios], &weights).map_err(oracle_failure)?;
            let f_minus =
                aggregate(&values[base + n_scenarios..base + 2 * n_scenarios], &weights).map_err(oracle_failure)?;
            evals.push(DirectionalEval { f_plus, f_minus, direction: u });
        }
        let (f, scenario_values) = if hyper.log_objective {
            let tail = values[values.len() - n_scenarios..].to_vec();
            (Some(aggregate(&tail, &weights).map_err(oracle_failure)?), tail)
        } else {
            (None, Vec::new())
        };

        let g = multi_point_gradient(&evals, r, d)?;
        let step = if hyper.use_adam { state.adam.update(&g)? } else { g.g.clone() };
        let proposal: Vec<f64> = state.x.iter().zip(&step).map(|(x, s)| x - eta * s).collect();
        let next = project_box(&proposal, &unit)?.into_inner();
        let step_norm = euclidean_norm(&next.iter().zip(&state.x).map(|(a, b)| a - b).collect::<Vec<_>>());
        let done = converged(&state.x, &next, hyper.tau)?;

        state.records.push(IterationRecord {
            k,
            f,
            scenario_values,
            x: std::mem::replace(&mut state.x, next),
            grad_norm: g.norm(),
            eta,
            r,
            step_norm,
            simulations,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        state.schedules = state.schedules.decay();
        state.k_next = k + 1;
        state.rng = RngState::capture(settings.seed, &rng);
        if done {
            state.stop = Some(StopReason::Converged);
        } else if state.k_next > hyper.max_iterations {
            state.stop = Some(StopReason::MaxIterations);
        } else if settings.stop_after == Some(k) {
            state.stop = Some(StopReason::Interrupted);
        }
        if let Some(dir) = &settings.checkpoint_dir {
            save_checkpoint(dir, &state)?;
        }
    }

    let stop = state.stop.unwrap_or(StopReason::MaxIterations);
    let (final_objective, final_scenario_values) = if hyper.log_objective && stop != StopReason::Interrupted {
        let (total, values) = evaluate_at(oracle, &pool, &state.x, state.k_next)?;
        (Some(total), values)
    } else {
        (None, Vec::new())
    };
    Ok(RunOutcome {
        x: state.x,
        records: state.records,
        stop,
        final_objective,
        final_scenario_values,
        config_hash: state.config_hash,
    })
}

fn evaluate_at<O: Oracle + ?Sized>(
    oracle: &O,
    pool: &rayon::ThreadPool,
    x: &[f64],
    iteration: u64,
) -> Result<(f64, Vec<f64>), RunError> {
    let jobs: Vec<Job> = (0..oracle.weights().len())
        .map(|scenario| Job { tag: JobTag { iteration, direction: None, sign: None, scenario }, point: x.to_vec() })
        .collect();
    let results = execute(pool, oracle, &jobs);
    let values = gather(jobs, results).map_err(|(job, source)| RunError::Oracle {
        tag: job.tag,
        point: job.point,
        source,
        checkpoint: None,
    })?;
    let total = aggregate(&values, &oracle.weights()).map_err(|e| RunError::Oracle {
        tag: JobTag { iteration, direction: None, sign: None, scenario: 0 },
        point: x.to_vec(),
        source: e.into(),
        checkpoint: None,
    })?;
    Ok((total, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(target: Vec<f64>) -> impl Fn(&[f64]) -> f64 + Sync {
        move |x: &[f64]| x.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    #[test]
    fn constant_oracle_converges_at_first_check() {
        let oracle = FnOracle::new("const", DecisionSpace::unit(3).unwrap(), |_: &[f64]| 7.0);
        let out = run(&oracle, &[0.2, 0.5, 0.9], &RunSettings::new(Hyperparameters::default(), 1)).unwrap();
        assert_eq!(out.stop, StopReason::Converged);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.x, vec![0.2, 0.5, 0.9]);
        assert_eq!(out.records[0].grad_norm, 0.0);
    }

    #[test]
    fn simulation_count_per_iteration() {
        let oracle = FnOracle::new("q", DecisionSpace::unit(2).unwrap(), quadratic(vec![0.3, 0.3]));
        let hyper = Hyperparameters { batch_size: 3, max_iterations: 4, tau: 1e-12, ..Default::default() };
        let out = run(&oracle, &[0.9, 0.9], &RunSettings::new(hyper, 5)).unwrap();
        assert_eq!(out.records.len(), 4);
        assert!(out.records.iter().all(|r| r.simulations == 2 * 3 + 1));
        assert_eq!(out.total_simulations(), 4 * 7 + 1);
        let quiet = Hyperparameters { log_objective: false, ..hyper };
        let out = run(&oracle, &[0.9, 0.9], &RunSettings::new(quiet, 5)).unwrap();
        assert!(out.records.iter().all(|r| r.simulations == 6 && r.f.is_none()));
    }

    #[test]
    fn oracle_failure_carries_provenance() {
        let oracle =
            FnOracle::new("nan", DecisionSpace::unit(2).unwrap(), |x: &[f64]| if x[0] > 0.5 { f64::NAN } else { 0.0 });
        let err = run(&oracle, &[0.45, 0.5], &RunSettings::new(Hyperparameters::default(), 3)).unwrap_err();
        match err {
            RunError::Oracle { tag, point, source: OracleError::NonFinite(_), .. } => {
                assert_eq!(tag.iteration, 1);
                assert!(point[0] > 0.5);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn max_iterations_terminates() {
        let oracle = FnOracle::new("q", DecisionSpace::unit(2).unwrap(), quadratic(vec![0.3, 0.7]));
        let hyper = Hyperparameters { max_iterations: 5, tau: 1e-15, ..Default::default() };
        let out = run(&oracle, &[0.0, 0.0], &RunSettings::new(hyper, 9)).unwrap();
        assert_eq!(out.stop, StopReason::MaxIterations);
        assert_eq!(out.records.iter().map(|r| r.k).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn checkpoint_round_trip_and_hash_guard() {
        let dir = tempfile::tempdir().unwrap();
        let oracle = FnOracle::new("q", DecisionSpace::unit(3).unwrap(), quadratic(vec![0.3, 0.7, 0.5]));
        let hyper = Hyperparameters { max_iterations: 12, tau: 1e-15, ..Default::default() };
        let x0 = [0.9, 0.1, 0.5];
        let reference = run(&oracle, &x0, &RunSettings::new(hyper, 4)).unwrap();

        let mut settings = RunSettings::new(hyper, 4);
        settings.checkpoint_dir = Some(dir.path().to_path_buf());
        settings.stop_after = Some(5);
        let partial = run(&oracle, &x0, &settings).unwrap();
        assert_eq!(partial.stop, StopReason::Interrupted);
        let ck = Checkpoint::load(dir.path().join("latest.json")).unwrap();
        assert_eq!(ck.k_next, 6);

        settings.stop_after = None;
        let resumed = resume(&oracle, &x0, ck.clone(), &settings).unwrap();
        assert_eq!(resumed.x, reference.x);
        let strip = |r: &[IterationRecord]| r.iter().map(|r| (r.k, r.f, r.x.clone(), r.grad_norm)).collect::<Vec<_>>();
        assert_eq!(strip(&resumed.records), strip(&reference.records));

        let other = RunSettings::new(Hyperparameters { eta1: 0.05, ..hyper }, 4);
        assert!(matches!(resume(&oracle, &x0, ck, &other), Err(RunError::CheckpointMismatch { .. })));
    }

    #[test]
    fn resume_after_the_last_iteration_stops_at_once() {
        let dir = tempfile::tempdir().unwrap();
        let oracle = FnOracle::new("q", DecisionSpace::unit(2).unwrap(), quadratic(vec![0.3, 0.7]));
        let hyper = Hyperparameters { max_iterations: 4, tau: 1e-15, ..Default::default() };
        let mut settings = RunSettings::new(hyper, 1);
        settings.checkpoint_dir = Some(dir.path().to_path_buf());
        let full = run(&oracle, &[0.5, 0.5], &settings).unwrap();
        let ck = Checkpoint::load(dir.path().join("latest.json")).unwrap();
        let again = resume(&oracle, &[0.5, 0.5], ck, &settings).unwrap();
        assert_eq!(again.stop, StopReason::MaxIterations);
        assert_eq!(again.x, full.x);
        assert_eq!(again.records.len(), full.records.len());
        assert_eq!(
            again.records.iter().map(|r| r.simulations).sum::<usize>(),
            full.records.iter().map(|r| r.simulations).sum::<usize>()
        );
    }

    #[test]
    fn resume_with_other_bounds_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let oracle = FnOracle::new("q", DecisionSpace::unit(2).unwrap(), quadratic(vec![0.3, 0.7]));
        let hyper = Hyperparameters { max_iterations: 6, ..Default::default() };
        let mut settings = RunSettings::new(hyper, 1);
        settings.checkpoint_dir = Some(dir.path().to_path_buf());
        settings.stop_after = Some(2);
        run(&oracle, &[0.5, 0.5], &settings).unwrap();
        let ck = Checkpoint::load(dir.path().join("latest.json")).unwrap();

        let wider = BoxBounds::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let space = DecisionSpace::new(oracle.space().names.clone(), wider).unwrap();
        let moved = FnOracle::new("q", space, quadratic(vec![0.3, 0.7]));
        settings.stop_after = None;
        assert!(matches!(resume(&moved, &[0.5, 0.5], ck, &settings), Err(RunError::CheckpointMismatch { .. })));
    }
}
