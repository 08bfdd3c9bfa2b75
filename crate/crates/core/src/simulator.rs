//! Monte Carlo engine for the broadcast Markov chain.
//!
//! State `i` counts the validators holding the candidate block. Each step
//! the chain moves to `i + 1` with probability `i(N - i)/N²`, so the time
//! spent in state `i` is geometric. A broadcast ends on reaching `N` holders
//! ([`QuorumMode::FullBroadcast`]) or after state `⌈2(N-1)/3⌉` has been left
//! ([`QuorumMode::TwoThirds`]). A block time is the sum of `phases`
//! independent broadcasts, converted to seconds with the per-step transfer
//! time `Δt`.
//!
//! # Reproducibility
//!
//! Run `r` of [`run_monte_carlo`] draws from `ChaCha8Rng::seed_from_u64(seed)`
//! switched to stream `r` (see [`run_rng`]). Within a run, phases are drawn
//! in order and each phase draws one uniform per state from state 1 upward,
//! redrawing only on an exact zero. This mapping is stable for a given
//! release.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::distributions::{DistError, MomentSummary};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("state {i} outside 1..={max} for {n} validators")]
    StateOutOfRange { i: u32, n: u32, max: u32 },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dist(#[from] DistError),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;

/// Where a broadcast stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuorumMode {
    /// Every validator holds the block.
    #[default]
    FullBroadcast,
    /// The block has reached enough holders for a 2f+1 quorum.
    TwoThirds,
}

impl QuorumMode {
    /// Last state whose sojourn is summed.
    pub fn last_state(self, n: u32) -> u32 {
        match self {
            QuorumMode::FullBroadcast => n - 1,
            QuorumMode::TwoThirds => quorum_threshold(n),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n_validators: u32,
    /// Seconds per chain step.
    pub delta_t: f64,
    pub phases: u32,
    pub quorum_mode: QuorumMode,
    pub seed: u64,
    /// Block creation time added to every block, in seconds. Zero by
    /// default since creation is not the bottleneck.
    pub create_offset: f64,
}

impl SimConfig {
    pub fn new(n_validators: u32, delta_t: f64) -> Self {
        Self {
            n_validators,
            delta_t,
            phases: 3,
            quorum_mode: QuorumMode::FullBroadcast,
            seed: 0,
            create_offset: 0.0,
        }
    }

    pub fn with_phases(mut self, phases: u32) -> Self {
        self.phases = phases;
        self
    }

    pub fn with_quorum(mut self, mode: QuorumMode) -> Self {
        self.quorum_mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_create_offset(mut self, offset: f64) -> Self {
        self.create_offset = offset;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_validators < 2 {
            return Err(SimError::InvalidConfig(format!(
                "n_validators must be >= 2, got {}",
                self.n_validators
            )));
        }
        if !(self.delta_t.is_finite() && self.delta_t > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "delta_t must be finite and > 0, got {}",
                self.delta_t
            )));
        }
        if self.phases == 0 {
            return Err(SimError::InvalidConfig("phases must be >= 1".into()));
        }
        if !(self.create_offset.is_finite() && self.create_offset >= 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "create_offset must be finite and >= 0, got {}",
                self.create_offset
            )));
        }
        Ok(())
    }

    /// Index of the last state summed in each broadcast.
    pub fn last_state(&self) -> u32 {
        self.quorum_mode.last_state(self.n_validators)
    }
}

/// Sojourn steps of one broadcast.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseTrace {
    /// `sojourn_steps[j]` is the time spent in state `j + 1`.
    pub sojourn_steps: Vec<u64>,
    pub total_steps: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    /// Block times in seconds, indexed by run.
    pub samples: Vec<f64>,
    pub summary: MomentSummary,
    pub config: SimConfig,
}

/// Probability `i/N · (N-i)/N` of one more validator receiving the block.
pub fn transition_prob(i: u32, n: u32) -> Result<f64> {
    if n < 2 || i == 0 || i >= n {
        return Err(SimError::StateOutOfRange {
            i,
            n,
            max: n.saturating_sub(1),
        });
    }
    let (i, n) = (f64::from(i), f64::from(n));
    Ok((i / n) * ((n - i) / n))
}

/// `⌈2(N-1)/3⌉`, the last state summed when only a 2f+1 quorum is awaited.
pub fn quorum_threshold(n: u32) -> u32 {
    let twice = 2 * u64::from(n.saturating_sub(1));
    twice.div_ceil(3) as u32
}

/// Geometric variate on `{1, 2, ...}` by inversion, given `ln(1 - p)`.
#[inline]
fn geometric<R: Rng + ?Sized>(ln_q: f64, rng: &mut R) -> u64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            let k = (u.ln() / ln_q).ceil();
            return if k < 1.0 { 1 } else { k as u64 };
        }
    }
}

/// Geometric number of steps spent in state `i`.
pub fn simulate_sojourn<R: Rng + ?Sized>(i: u32, n: u32, rng: &mut R) -> Result<u64> {
    let p = transition_prob(i, n)?;
    Ok(geometric((-p).ln_1p(), rng))
}

/// Precomputed `ln(1 - p_i)` for the states of one broadcast.
#[derive(Debug, Clone)]
struct Chain {
    ln_q: Vec<f64>,
}

impl Chain {
    fn new(n: u32, last_state: u32) -> Self {
        let ln_q = (1..=last_state)
            .map(|i| {
                let p = transition_prob(i, n).expect("state within chain");
                (-p).ln_1p()
            })
            .collect();
        Self { ln_q }
    }

    fn total<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        self.ln_q.iter().map(|&lq| geometric(lq, rng)).sum()
    }

    fn trace<R: Rng + ?Sized>(&self, rng: &mut R) -> PhaseTrace {
        let sojourn_steps: Vec<u64> = self.ln_q.iter().map(|&lq| geometric(lq, rng)).collect();
        let total_steps = sojourn_steps.iter().sum();
        PhaseTrace {
            sojourn_steps,
            total_steps,
        }
    }
}

/// One broadcast: sojourns from state 1 up to the configured last state.
pub fn simulate_broadcast<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<PhaseTrace> {
    config.validate()?;
    Ok(Chain::new(config.n_validators, config.last_state()).trace(rng))
}

/// Total chain steps of one block: the sum of `phases` broadcasts.
pub fn simulate_block_steps<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<u64> {
    config.validate()?;
    let chain = Chain::new(config.n_validators, config.last_state());
    Ok((0..config.phases).map(|_| chain.total(rng)).sum())
}

/// One block time in seconds.
pub fn simulate_block_time<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<f64> {
    let steps = simulate_block_steps(config, rng)?;
    Ok(config.create_offset + config.delta_t * steps as f64)
}

/// Random stream owned by run `run` of a Monte Carlo with the given seed.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Independent block-time draws, computed in parallel. The result depends
/// only on `(config, n_runs)`.
pub fn run_monte_carlo(config: &SimConfig, n_runs: usize) -> Result<MonteCarloResult> {
    let steps = run_monte_carlo_steps(config, n_runs)?;
    let samples: Vec<f64> = steps
        .par_iter()
        .map(|&s| config.create_offset + config.delta_t * s as f64)
        .collect();
    let summary = MomentSummary::from_samples(&samples)?;
    Ok(MonteCarloResult {
        samples,
        summary,
        config: *config,
    })
}

/// Integer step totals behind [`run_monte_carlo`], one per run.
pub fn run_monte_carlo_steps(config: &SimConfig, n_runs: usize) -> Result<Vec<u64>> {
    if n_runs == 0 {
        return Err(SimError::InvalidConfig("n_runs must be >= 1".into()));
    }
    config.validate()?;
    let chain = Chain::new(config.n_validators, config.last_state());
    let phases = config.phases;
    let seed = config.seed;
    Ok((0..n_runs as u64)
        .into_par_iter()
        .map(|run| {
            let mut rng = run_rng(seed, run);
            (0..phases).map(|_| chain.total(&mut rng)).sum()
        })
        .collect())
}

/// Per-run traces of a single broadcast, for sojourn-level diagnostics.
pub fn run_broadcast_traces(config: &SimConfig, n_runs: usize) -> Result<Vec<PhaseTrace>> {
    if n_runs == 0 {
        return Err(SimError::InvalidConfig("n_runs must be >= 1".into()));
    }
    config.validate()?;
    let chain = Chain::new(config.n_validators, config.last_state());
    let seed = config.seed;
    Ok((0..n_runs as u64)
        .into_par_iter()
        .map(|run| chain.trace(&mut run_rng(seed, run)))
        .collect())
}
