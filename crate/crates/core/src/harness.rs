//! Seeded experiment runs and multi-seed suites.
//!
//! One run is: warmup under a uniform random policy (world-model updates
//! only), a reset to the start cell, then the main loop. Each step of the
//! main loop goes observe, world-model update, critic observe, reward,
//! normalize, value update, select action, move.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critics::{CRITIC_HIDDEN, TABULAR_DECAY};
use crate::env::{Cell, GridLayout, NoisyTvEnv, FIRST_STOCHASTIC_COL, GRID_SIZE, NUM_CELLS, OBS_DIM, STATE_DIM};
use crate::error::{Error, Result};
use crate::nn::AdamConfig;
use crate::policy::{
    select_action, uniform_action, RewardNormalizer, VTable, EPSILON, NORMALIZER_DECAY, NORMALIZER_FLOOR, V_ALPHA,
    V_INIT,
};
use crate::rewards::{MethodSpec, RewardMethod, StepContext, VisitCounter, RND_HIDDEN, RND_OUTPUT};
use crate::rng::{stream, Stream};
use crate::world_model::{WorldModel, HIDDEN};

pub const TOTAL_STEPS: usize = 35_000;
pub const WARMUP_STEPS: usize = 100;
pub const EVAL_EVERY: usize = 100;
pub const VISIT_WINDOW: usize = 5_000;
pub const CROSSING_THRESHOLDS: [f64; 3] = [3.0, 2.5, 2.0];

/// Fixed constants, recorded with each run for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub grid_size: usize,
    pub first_stochastic_col: usize,
    pub obs_dim: usize,
    pub world_model_layers: Vec<usize>,
    pub critic_layers: Vec<usize>,
    pub rnd_layers: Vec<usize>,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub v_init: f64,
    pub v_alpha: f64,
    pub epsilon: f64,
    pub normalizer_decay: f64,
    pub normalizer_floor: f64,
    pub tabular_decay: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            grid_size: GRID_SIZE,
            first_stochastic_col: FIRST_STOCHASTIC_COL,
            obs_dim: OBS_DIM,
            world_model_layers: vec![STATE_DIM, HIDDEN, OBS_DIM],
            critic_layers: vec![STATE_DIM, CRITIC_HIDDEN, 1],
            rnd_layers: vec![STATE_DIM, RND_HIDDEN, RND_OUTPUT],
            learning_rate: adam.lr,
            adam_beta1: adam.beta1,
            adam_beta2: adam.beta2,
            adam_eps: adam.eps,
            v_init: V_INIT,
            v_alpha: V_ALPHA,
            epsilon: EPSILON,
            normalizer_decay: NORMALIZER_DECAY,
            normalizer_floor: NORMALIZER_FLOOR,
            tabular_decay: TABULAR_DECAY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub method: MethodSpec,
    pub seed: u64,
    pub total_steps: usize,
    pub warmup_steps: usize,
    pub eval_every: usize,
    pub layout: GridLayout,
    pub hyperparameters: Hyperparameters,
}

impl RunConfig {
    pub fn new(method: MethodSpec, seed: u64) -> Self {
        Self {
            method,
            seed,
            total_steps: TOTAL_STEPS,
            warmup_steps: WARMUP_STEPS,
            eval_every: EVAL_EVERY,
            layout: GridLayout::NoisyTv,
            hyperparameters: Hyperparameters::default(),
        }
    }

    pub fn with_steps(mut self, total_steps: usize) -> Self {
        self.total_steps = total_steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.total_steps == 0 || self.eval_every == 0 || self.total_steps % self.eval_every != 0 {
            return Err(Error::Config(format!(
                "eval_every ({}) must be positive and divide total_steps ({})",
                self.eval_every, self.total_steps
            )));
        }
        if self.hyperparameters != Hyperparameters::default() {
            return Err(Error::Config("hyperparameters are fixed and cannot be overridden".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: usize,
    pub mean_det_error: f64,
}

/// Per-cell visit counts over main-loop steps `[start, end)`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitWindow {
    pub start: usize,
    pub end: usize,
    pub counts: Vec<u32>,
}

impl VisitWindow {
    fn empty(start: usize, end: usize) -> Self {
        Self { start, end, counts: vec![0; NUM_CELLS] }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn deterministic_visits(&self) -> u64 {
        Cell::deterministic_cells().map(|c| u64::from(self.counts[c.index()])).sum()
    }

    pub fn det_fraction(&self) -> f64 {
        self.deterministic_visits() as f64 / self.total().max(1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionPoint {
    pub step: usize,
    pub det_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitLog {
    pub window: usize,
    /// Consecutive windows from step 0; the last may be shorter.
    pub windows: Vec<VisitWindow>,
    pub last5k: VisitWindow,
    /// Deterministic-region fraction within each evaluation block.
    pub block_det_fraction: Vec<FractionPoint>,
}

impl VisitLog {
    /// `early`, `mid`, `late` are the full windows starting at 0, 15k and
    /// 30k; `last5k` is the final window of the run.
    pub fn named_window(&self, name: &str) -> Option<&VisitWindow> {
        let start = match name {
            "early" => 0,
            "mid" => 15_000,
            "late" => 30_000,
            "last5k" => return Some(&self.last5k),
            _ => return None,
        };
        self.windows.iter().find(|w| w.start == start && w.end - w.start == self.window)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetFractions {
    pub early: Option<f64>,
    pub mid: Option<f64>,
    pub late: Option<f64>,
    pub last5k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticPoint {
    pub step: usize,
    pub det_mean: f64,
    pub stoch_mean: f64,
}

/// Reward statistics over one evaluation block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBlock {
    pub step: usize,
    pub count: usize,
    pub mean_raw: f64,
    pub mean_sq_raw: f64,
    pub mean_normalized: f64,
    pub mean_e_before: f64,
    pub mean_e_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: RunConfig,
    pub eval_curve: Vec<EvalPoint>,
    pub visit_log: VisitLog,
    pub det_fraction: DetFractions,
    pub critic_curves: Option<Vec<CriticPoint>>,
    pub final_error: f64,
    pub per_step_rewards: Vec<RewardBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Warmup,
    Main,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("run aborted at {phase:?} step {step}: {source}")]
pub struct RunError {
    pub phase: Phase,
    /// 1-based index of the failing step within its phase; 0 for bad config.
    pub step: usize,
    pub source: Error,
}

impl RunError {
    pub fn is_numerical(&self) -> bool {
        matches!(self.source, Error::Numerical(_))
    }
}

#[derive(Default)]
struct BlockAccumulator {
    count: usize,
    det: usize,
    raw: f64,
    raw_sq: f64,
    normalized: f64,
    e_before: f64,
    e_after: f64,
}

impl BlockAccumulator {
    fn finish(&mut self, step: usize) -> (RewardBlock, FractionPoint) {
        let n = self.count.max(1) as f64;
        let out = (
            RewardBlock {
                step,
                count: self.count,
                mean_raw: self.raw / n,
                mean_sq_raw: self.raw_sq / n,
                mean_normalized: self.normalized / n,
                mean_e_before: self.e_before / n,
                mean_e_after: self.e_after / n,
            },
            FractionPoint { step, det_fraction: self.det as f64 / n },
        );
        *self = Self::default();
        out
    }
}

fn window_fraction(windows: &[VisitWindow], start: usize) -> Option<f64> {
    windows.iter().find(|w| w.start == start && w.end - w.start == VISIT_WINDOW).map(VisitWindow::det_fraction)
}

pub fn run_experiment(cfg: &RunConfig) -> std::result::Result<RunResult, RunError> {
    let fail = |phase, step| move |source| RunError { phase, step, source };
    cfg.validate().map_err(fail(Phase::Main, 0))?;

    let seed = cfg.seed;
    let mut env = NoisyTvEnv::new(cfg.layout, stream(seed, Stream::EnvPatterns), stream(seed, Stream::EnvNoise));
    let mut wm = WorldModel::new(&mut stream(seed, Stream::WorldModelInit));
    let mut method = RewardMethod::build(cfg.method, seed);
    let mut policy_rng = stream(seed, Stream::Policy);
    let mut warmup_rng = stream(seed, Stream::Warmup);

    let mut cell = Cell::START;
    for step in 1..=cfg.warmup_steps {
        let obs = env.observe(cell);
        wm.update(cell, &obs).map_err(fail(Phase::Warmup, step))?;
        let action = uniform_action(&env, cell, &mut warmup_rng);
        cell = env.step(cell, action).map_err(fail(Phase::Warmup, step))?;
    }
    cell = Cell::START;

    let mut normalizer = RewardNormalizer::default();
    let mut values = VTable::default();
    let mut visits = VisitCounter::default();

    let n_evals = cfg.total_steps / cfg.eval_every;
    let mut eval_curve = Vec::with_capacity(n_evals);
    let mut critic_curve = method.estimator().and_then(|e| e.region_means()).map(|_| Vec::with_capacity(n_evals));
    let mut per_step_rewards = Vec::with_capacity(n_evals);
    let mut block_det_fraction = Vec::with_capacity(n_evals);
    let mut block = BlockAccumulator::default();

    let last_start = cfg.total_steps.saturating_sub(VISIT_WINDOW);
    let mut windows: Vec<VisitWindow> = Vec::new();
    let mut last5k = VisitWindow::empty(last_start, cfg.total_steps);

    for t in 0..cfg.total_steps {
        let step = t + 1;
        let obs = env.observe(cell);
        let (e_before, e_after) = wm.update(cell, &obs).map_err(fail(Phase::Main, step))?;
        let ctx = StepContext { cell, obs: &obs, e_before, e_after, visit_count: visits.visit(cell) };

        let (raw, normalized, action) = if cfg.method.is_random() {
            (0.0, 0.0, uniform_action(&env, cell, &mut policy_rng))
        } else {
            method.critic_observe(&ctx).map_err(fail(Phase::Main, step))?;
            let r = method.compute_reward(&ctx).map_err(fail(Phase::Main, step))?;
            if !r.is_finite() {
                return Err(fail(Phase::Main, step)(Error::Numerical(format!("non-finite reward {r}"))));
            }
            let r_norm = normalizer.normalize(r);
            values.update(cell, r_norm).map_err(fail(Phase::Main, step))?;
            (r, r_norm, select_action(&values, &env, cell, &mut policy_rng))
        };

        if t % VISIT_WINDOW == 0 {
            windows.push(VisitWindow::empty(t, (t + VISIT_WINDOW).min(cfg.total_steps)));
        }
        windows.last_mut().expect("window opened above").counts[cell.index()] += 1;
        if t >= last_start {
            last5k.counts[cell.index()] += 1;
        }
        block.count += 1;
        block.det += usize::from(!cell.is_stochastic());
        block.raw += raw;
        block.raw_sq += raw * raw;
        block.normalized += normalized;
        block.e_before += e_before;
        block.e_after += e_after;

        cell = env.step(cell, action).map_err(fail(Phase::Main, step))?;

        if step % cfg.eval_every == 0 {
            let mean_det_error = wm.eval_deterministic(&env);
            if !mean_det_error.is_finite() {
                return Err(fail(Phase::Main, step)(Error::Numerical(format!(
                    "non-finite evaluation error {mean_det_error}"
                ))));
            }
            eval_curve.push(EvalPoint { step, mean_det_error });
            if let Some(curve) = critic_curve.as_mut() {
                let (det_mean, stoch_mean) =
                    method.estimator().and_then(|e| e.region_means()).expect("estimator with per-cell values");
                curve.push(CriticPoint { step, det_mean, stoch_mean });
            }
            let (rewards, fraction) = block.finish(step);
            per_step_rewards.push(rewards);
            block_det_fraction.push(fraction);
        }
    }

    let det_fraction = DetFractions {
        early: window_fraction(&windows, 0),
        mid: window_fraction(&windows, 15_000),
        late: window_fraction(&windows, 30_000),
        last5k: last5k.det_fraction(),
    };
    let final_error = eval_curve.last().expect("at least one evaluation").mean_det_error;
    Ok(RunResult {
        config: cfg.clone(),
        eval_curve,
        visit_log: VisitLog { window: VISIT_WINDOW, windows, last5k, block_det_fraction },
        det_fraction,
        critic_curves: critic_curve,
        final_error,
        per_step_rewards,
    })
}

/// Earliest point of `curve` strictly below `threshold`.
pub fn first_crossing_points(curve: &[EvalPoint], threshold: f64) -> Option<usize> {
    curve.iter().find(|p| p.mean_det_error < threshold).map(|p| p.step)
}

pub fn first_crossing(result: &RunResult, threshold: f64) -> Option<usize> {
    first_crossing_points(&result.eval_curve, threshold)
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Pointwise seed mean and population std of aligned curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub steps: Vec<usize>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Band {
    fn from_curves(steps: Vec<usize>, curves: &[Vec<f64>]) -> Self {
        let (mean, std) = (0..steps.len())
            .map(|i| {
                let xs: Vec<f64> = curves.iter().map(|c| c[i]).collect();
                mean_std(&xs).unwrap_or((f64::NAN, f64::NAN))
            })
            .unzip();
        Self { steps, mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub threshold: f64,
    pub seed_mean: Option<usize>,
    pub per_seed: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: MethodSpec,
    pub seeds: Vec<u64>,
    /// `None` marks a failed run.
    pub finals: Vec<Option<f64>>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub failures: usize,
    pub last5k_det_fraction: Option<f64>,
    pub crossings: Vec<Crossing>,
    pub error: Option<Band>,
    pub det_fraction: Option<Band>,
    pub critic_det: Option<Band>,
    pub critic_stoch: Option<Band>,
}

/// Aggregates one method's runs. Curves are merged over the completed runs
/// whose evaluation schedules agree with the first completed run.
pub fn summarize(method: MethodSpec, runs: &[(u64, Option<&RunResult>)]) -> MethodSummary {
    let done: Vec<&RunResult> = runs.iter().filter_map(|(_, r)| *r).collect();
    let finals: Vec<Option<f64>> = runs.iter().map(|(_, r)| r.map(|r| r.final_error)).collect();
    let completed: Vec<f64> = finals.iter().flatten().copied().collect();
    let stats = mean_std(&completed);

    let steps_of = |r: &RunResult| r.eval_curve.iter().map(|p| p.step).collect::<Vec<_>>();
    let aligned: Vec<&RunResult> = match done.first() {
        Some(first) => done.iter().copied().filter(|r| steps_of(r) == steps_of(first)).collect(),
        None => Vec::new(),
    };
    let band = |f: &dyn Fn(&RunResult) -> Option<Vec<f64>>| -> Option<Band> {
        let curves: Option<Vec<Vec<f64>>> = aligned.iter().map(|r| f(r)).collect();
        match (aligned.first(), curves) {
            (Some(first), Some(curves)) => Some(Band::from_curves(steps_of(first), &curves)),
            _ => None,
        }
    };
    let error = band(&|r| Some(r.eval_curve.iter().map(|p| p.mean_det_error).collect()));
    let det_fraction = band(&|r| Some(r.visit_log.block_det_fraction.iter().map(|p| p.det_fraction).collect()));
    let critic_det = band(&|r| r.critic_curves.as_ref().map(|c| c.iter().map(|p| p.det_mean).collect()));
    let critic_stoch = band(&|r| r.critic_curves.as_ref().map(|c| c.iter().map(|p| p.stoch_mean).collect()));

    let crossings = CROSSING_THRESHOLDS
        .iter()
        .map(|&threshold| Crossing {
            threshold,
            seed_mean: error
                .as_ref()
                .and_then(|b| b.steps.iter().zip(&b.mean).find(|(_, &m)| m < threshold).map(|(&s, _)| s)),
            per_seed: runs.iter().map(|(_, r)| r.and_then(|r| first_crossing(r, threshold))).collect(),
        })
        .collect();

    let fractions: Vec<f64> = done.iter().map(|r| r.det_fraction.last5k).collect();
    MethodSummary {
        method,
        seeds: runs.iter().map(|(s, _)| *s).collect(),
        finals,
        mean: stats.map(|s| s.0),
        std: stats.map(|s| s.1),
        failures: runs.iter().filter(|(_, r)| r.is_none()).count(),
        last5k_det_fraction: mean_std(&fractions).map(|s| s.0),
        crossings,
        error,
        det_fraction,
        critic_det,
        critic_stoch,
    }
}

pub struct RunRecord {
    pub method: MethodSpec,
    pub seed: u64,
    pub outcome: std::result::Result<RunResult, RunError>,
}

pub struct SuiteResult {
    pub runs: Vec<RunRecord>,
    pub summaries: Vec<MethodSummary>,
}

impl SuiteResult {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.outcome.is_err()).count()
    }

    pub fn summary(&self, method: MethodSpec) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    pub fn run(&self, method: MethodSpec, seed: u64) -> Option<&RunResult> {
        self.runs.iter().find(|r| r.method == method && r.seed == seed).and_then(|r| r.outcome.as_ref().ok())
    }
}

/// Runs every (method, seed) pair from `template` (whose method and seed
/// are replaced). `jobs` bounds the worker threads; `None` uses all cores.
pub fn run_suite(
    methods: &[MethodSpec],
    seeds: &[u64],
    template: &RunConfig,
    jobs: Option<usize>,
) -> Result<SuiteResult> {
    if methods.is_empty() || seeds.is_empty() {
        return Err(Error::Config("a suite needs at least one method and one seed".into()));
    }
    template.validate()?;
    let pairs: Vec<(MethodSpec, u64)> = methods.iter().flat_map(|&m| seeds.iter().map(move |&s| (m, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let runs: Vec<RunRecord> = pool.install(|| {
        pairs
            .par_iter()
            .map(|&(method, seed)| RunRecord {
                method,
                seed,
                outcome: run_experiment(&RunConfig { method, seed, ..template.clone() }),
            })
            .collect()
    });
    let summaries = methods
        .iter()
        .map(|&m| {
            let rows: Vec<(u64, Option<&RunResult>)> =
                runs.iter().filter(|r| r.method == m).map(|r| (r.seed, r.outcome.as_ref().ok())).collect();
            summarize(m, &rows)
        })
        .collect();
    Ok(SuiteResult { runs, summaries })
}

/// Batch-means estimate of the mean raw reward over `[from, to)` and its
/// standard error, treating each evaluation block as one sample.
pub fn reward_mean_and_se(result: &RunResult, from: usize, to: usize) -> Option<(f64, f64)> {
    let blocks: Vec<f64> =
        result.per_step_rewards.iter().filter(|b| b.step > from && b.step <= to).map(|b| b.mean_raw).collect();
    if blocks.len() < 2 {
        return None;
    }
    let n = blocks.len() as f64;
    let mean = blocks.iter().sum::<f64>() / n;
    let var = blocks.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}
