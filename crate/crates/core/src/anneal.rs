//! Multi-start simulated annealing over a frozen QUBO, plus an exhaustive
//! solver used as ground truth on small instances.
//!
//! Every run draws from its own ChaCha8 stream keyed by `(seed, run index)`,
//! so results do not depend on how runs are scheduled across threads.

use alloc::vec;
use alloc::vec::Vec;
use core::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::qubo::FrozenQubo;

pub const DEFAULT_SWEEPS: usize = 1000;
pub const DEFAULT_RUNS: usize = 100;
/// `t_cold = COLD_RATIO * t_hot` unless overridden.
pub const COLD_RATIO: f64 = 1e-3;
/// Single flips sampled to size the initial temperature.
pub const CALIBRATION_FLIPS: usize = 1000;
/// Largest model [`brute_force`] accepts.
pub const BRUTE_FORCE_LIMIT: usize = 24;
/// Hard ceiling for [`brute_force_with_limit`].
pub const BRUTE_FORCE_MAX: usize = 30;

const CALIBRATION_STREAM: u64 = u64::MAX;
const RESYNC_INTERVAL: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnnealError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(&'static str),
    #[error("exhaustive search refused: {n} variables exceeds the limit of {limit}")]
    TooManyVariables { n: usize, limit: usize },
    #[error("histogram needs at least one bin")]
    ZeroBins,
    #[error("no runs to summarize")]
    NoRuns,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub t_hot: f64,
    pub t_cold: f64,
    pub sweeps: usize,
    pub runs: usize,
    pub seed: u64,
}

impl Schedule {
    pub fn new(t_hot: f64, t_cold: f64, sweeps: usize, runs: usize, seed: u64) -> Result<Self, AnnealError> {
        let schedule = Schedule {
            t_hot,
            t_cold,
            sweeps,
            runs,
            seed,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    /// Default schedule scaled to the model's energy landscape.
    pub fn calibrated(model: &FrozenQubo, seed: u64) -> Self {
        let t_hot = calibrate_t_hot(model, seed);
        Schedule {
            t_hot,
            t_cold: COLD_RATIO * t_hot,
            sweeps: DEFAULT_SWEEPS,
            runs: DEFAULT_RUNS,
            seed,
        }
    }

    /// Fills unset temperatures from the model, then validates.
    pub fn resolve(
        model: &FrozenQubo,
        t_hot: Option<f64>,
        t_cold: Option<f64>,
        sweeps: usize,
        runs: usize,
        seed: u64,
    ) -> Result<Self, AnnealError> {
        let t_hot = t_hot.unwrap_or_else(|| calibrate_t_hot(model, seed));
        let t_cold = t_cold.unwrap_or(COLD_RATIO * t_hot);
        Schedule::new(t_hot, t_cold, sweeps, runs, seed)
    }

    pub fn validate(&self) -> Result<(), AnnealError> {
        if !(self.t_hot > 0.0 && self.t_hot.is_finite()) {
            return Err(AnnealError::InvalidSchedule("t_hot must be positive"));
        }
        if self.t_cold.is_nan() || self.t_cold <= 0.0 {
            return Err(AnnealError::InvalidSchedule("t_cold must be positive"));
        }
        if self.t_cold.is_nan() || self.t_cold >= self.t_hot {
            return Err(AnnealError::InvalidSchedule("t_cold must be below t_hot"));
        }
        if self.sweeps == 0 {
            return Err(AnnealError::InvalidSchedule("sweeps must be at least 1"));
        }
        if self.runs == 0 {
            return Err(AnnealError::InvalidSchedule("runs must be at least 1"));
        }
        Ok(())
    }

    /// Temperature of sweep `k`, geometric from `t_hot` to `t_cold`.
    pub fn temperature(&self, k: usize) -> f64 {
        if self.sweeps <= 1 {
            return self.t_cold;
        }
        let frac = k as f64 / (self.sweeps - 1) as f64;
        self.t_hot * libm::pow(self.t_cold / self.t_hot, frac)
    }
}

/// Random stream for run `run` of seed `seed`.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Largest `|dE|` over a random walk of single flips from a random state.
/// Falls back to 1 for flat models.
pub fn calibrate_t_hot(model: &FrozenQubo, seed: u64) -> f64 {
    let n = model.n();
    if n == 0 {
        return 1.0;
    }
    let mut rng = run_rng(seed, CALIBRATION_STREAM);
    let mut x: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
    let mut max = 0.0f64;
    for _ in 0..CALIBRATION_FLIPS {
        let i = rng.gen_range(0..n);
        max = max.max(model.delta_unchecked(&x, i).abs());
        x[i] ^= 1;
    }
    if max > 0.0 && max.is_finite() {
        max
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    pub assignment: Vec<u8>,
    /// Recomputed from scratch on `assignment`.
    pub energy: f64,
    pub wall_time: Option<Duration>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealResult {
    pub runs: Vec<RunRecord>,
    /// Position in `runs` of the lowest energy, earliest run on ties.
    pub best: usize,
    /// Resolved schedule, when the solver used one.
    pub schedule: Option<Schedule>,
}

impl AnnealResult {
    /// Sorts by run index and picks the incumbent.
    pub fn from_runs(mut runs: Vec<RunRecord>) -> Result<Self, AnnealError> {
        if runs.is_empty() {
            return Err(AnnealError::NoRuns);
        }
        runs.sort_by_key(|r| r.run);
        let mut best = 0;
        for (k, r) in runs.iter().enumerate() {
            if r.energy < runs[best].energy {
                best = k;
            }
        }
        Ok(AnnealResult {
            runs,
            best,
            schedule: None,
        })
    }

    pub fn best_run(&self) -> &RunRecord {
        &self.runs[self.best]
    }

    pub fn best_energy(&self) -> f64 {
        self.best_run().energy
    }

    pub fn energies(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.energy).collect()
    }

    /// Best-so-far energy after each run.
    pub fn incumbent_trace(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.runs
            .iter()
            .map(|r| {
                best = best.min(r.energy);
                best
            })
            .collect()
    }

    pub fn histogram(&self, bins: usize) -> Result<Vec<HistogramBin>, AnnealError> {
        histogram(&self.energies(), bins)
    }
}

/// One annealing run. `observer` sees the state and the incrementally
/// tracked energy after every accepted flip.
pub fn anneal_run_observed<F>(model: &FrozenQubo, schedule: &Schedule, run: usize, mut observer: F) -> RunRecord
where
    F: FnMut(&[u8], f64),
{
    let n = model.n();
    let mut rng = run_rng(schedule.seed, run as u64);
    let mut x: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2u8)).collect();
    let mut energy = model.energy_unchecked(&x);
    let mut order: Vec<usize> = (0..n).collect();

    for sweep in 0..schedule.sweeps {
        let t = schedule.temperature(sweep);
        order.shuffle(&mut rng);
        for &i in &order {
            let delta = model.delta_unchecked(&x, i);
            let accept = delta <= 0.0 || rng.gen::<f64>() < libm::exp(-delta / t);
            if accept {
                x[i] ^= 1;
                energy += delta;
                observer(&x, energy);
            }
        }
    }

    let energy = model.energy_unchecked(&x);
    RunRecord {
        run,
        assignment: x,
        energy,
        wall_time: None,
    }
}

pub fn anneal_run(model: &FrozenQubo, schedule: &Schedule, run: usize) -> RunRecord {
    anneal_run_observed(model, schedule, run, |_, _| {})
}

/// Serial multi-start annealing.
pub fn simulated_anneal(model: &FrozenQubo, schedule: &Schedule) -> Result<AnnealResult, AnnealError> {
    schedule.validate()?;
    let runs = (0..schedule.runs)
        .map(|r| anneal_run(model, schedule, r))
        .collect();
    let mut result = AnnealResult::from_runs(runs)?;
    result.schedule = Some(*schedule);
    Ok(result)
}

/// Exact minimum by enumerating all `2^n` assignments, `n <= 24`.
///
/// Ties go to the assignment with the smallest value of `sum_i x_i 2^i`,
/// the first one met in counting order.
pub fn brute_force(model: &FrozenQubo) -> Result<(Vec<u8>, f64), AnnealError> {
    brute_force_with_limit(model, BRUTE_FORCE_LIMIT)
}

/// [`brute_force`] with an explicit size cap, at most [`BRUTE_FORCE_MAX`].
pub fn brute_force_with_limit(model: &FrozenQubo, limit: usize) -> Result<(Vec<u8>, f64), AnnealError> {
    let n = model.n();
    let limit = limit.min(BRUTE_FORCE_MAX);
    if n > limit {
        return Err(AnnealError::TooManyVariables { n, limit });
    }
    let mut x = vec![0u8; n];
    let mut energy = model.energy_unchecked(&x);
    let mut code: u64 = 0;
    let mut best_code: u64 = 0;
    let mut best_energy = energy;

    // Gray-code walk: step k flips bit trailing_zeros(k).
    for k in 1u64..(1u64 << n) {
        let i = k.trailing_zeros() as usize;
        energy += model.delta_unchecked(&x, i);
        x[i] ^= 1;
        code ^= 1 << i;
        if k % RESYNC_INTERVAL == 0 {
            energy = model.energy_unchecked(&x);
        }
        let tol = 1e-9 * best_energy.abs().max(1.0);
        if energy < best_energy - tol || (energy <= best_energy + tol && code < best_code) {
            best_energy = energy;
            best_code = code;
        }
    }

    let best: Vec<u8> = (0..n).map(|i| ((best_code >> i) & 1) as u8).collect();
    let energy = model.energy_unchecked(&best);
    Ok((best, energy))
}

/// Pluggable minimizer.
pub trait Solver {
    fn name(&self) -> &'static str;
    fn minimize(&self, model: &FrozenQubo) -> Result<AnnealResult, AnnealError>;
}

/// Schedule settings; unset temperatures are calibrated per model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealConfig {
    pub t_hot: Option<f64>,
    pub t_cold: Option<f64>,
    pub sweeps: usize,
    pub runs: usize,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            t_hot: None,
            t_cold: None,
            sweeps: DEFAULT_SWEEPS,
            runs: DEFAULT_RUNS,
            seed: 0,
        }
    }
}

impl AnnealConfig {
    pub fn resolve(&self, model: &FrozenQubo) -> Result<Schedule, AnnealError> {
        Schedule::resolve(model, self.t_hot, self.t_cold, self.sweeps, self.runs, self.seed)
    }
}

impl From<Schedule> for AnnealConfig {
    fn from(s: Schedule) -> Self {
        AnnealConfig {
            t_hot: Some(s.t_hot),
            t_cold: Some(s.t_cold),
            sweeps: s.sweeps,
            runs: s.runs,
            seed: s.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimulatedAnnealing {
    pub config: AnnealConfig,
}

impl SimulatedAnnealing {
    pub fn new(config: AnnealConfig) -> Self {
        SimulatedAnnealing { config }
    }
}

impl Solver for SimulatedAnnealing {
    fn name(&self) -> &'static str {
        "sa"
    }

    fn minimize(&self, model: &FrozenQubo) -> Result<AnnealResult, AnnealError> {
        simulated_anneal(model, &self.config.resolve(model)?)
    }
}

/// Exhaustive search reported as a single run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSolver {
    pub limit: usize,
}

impl Default for ExactSolver {
    fn default() -> Self {
        ExactSolver {
            limit: BRUTE_FORCE_LIMIT,
        }
    }
}

impl Solver for ExactSolver {
    fn name(&self) -> &'static str {
        "exact"
    }

    fn minimize(&self, model: &FrozenQubo) -> Result<AnnealResult, AnnealError> {
        let (assignment, energy) = brute_force_with_limit(model, self.limit)?;
        AnnealResult::from_runs(vec![RunRecord {
            run: 0,
            assignment,
            energy,
            wall_time: None,
        }])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistogramBin {
    pub center: f64,
    pub width: f64,
    pub count: usize,
    /// `count / (total * width)`, so densities integrate to one.
    pub density: f64,
}

/// Equal-width density histogram over `[min, max]`. A single distinct value
/// gives one bin of unit width.
pub fn histogram(values: &[f64], bins: usize) -> Result<Vec<HistogramBin>, AnnealError> {
    if bins == 0 {
        return Err(AnnealError::ZeroBins);
    }
    if values.is_empty() {
        return Err(AnnealError::NoRuns);
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total = values.len() as f64;
    if max <= min {
        return Ok(vec![HistogramBin {
            center: min,
            width: 1.0,
            count: values.len(),
            density: 1.0,
        }]);
    }
    let width = (max - min) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - min) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(b, count)| HistogramBin {
            center: min + (b as f64 + 0.5) * width,
            width,
            count,
            density: count as f64 / (total * width),
        })
        .collect())
}
