//! The samplers: single-site Gibbs, the mixture-proposal Metropolis chain
//! (M³), and their convex combination, plus cardinality-constrained
//! variants and a seeded multi-chain runner.
//!
//! Every acceptance ratio is computed in log space and `min{1, ·}` is
//! taken on the log scale; a step makes exactly one fresh call to the
//! model oracle (the current state's value is cached). The M³ chain also
//! caches `log q(X_t)`, refreshing it lazily after Gibbs moves so that a
//! pure M³ run evaluates the mixture density once per step.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logmodular::{FixedSizeMixture, MixtureError, MixtureProposal};
use crate::model::SetFunction;
use crate::numeric::logistic;
use crate::subset::{GroundSet, Subset};

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    BadAlpha(f64),
    #[error("fixed cardinality {size} exceeds ground set size {n}")]
    SizeTooLarge { size: usize, n: usize },
    #[error("mixture is over {mixture_n} elements but the model has {model_n}")]
    MixtureGroundMismatch { mixture_n: usize, model_n: usize },
    #[error("need at least one chain")]
    NoChains,
    #[error("record_every must be at least 1")]
    BadRecordEvery,
    #[error(transparent)]
    Mixture(#[from] MixtureError),
}

/// Which chain to run, with its proposal machinery where applicable.
#[derive(Debug, Clone)]
pub enum SamplerSpec {
    /// Single-site Gibbs.
    Gibbs,
    /// Metropolis with the state-independent mixture proposal (M³).
    M3 { mixture: MixtureProposal },
    /// `alpha · Gibbs + (1 - alpha) · M³`, realized by a Bernoulli(alpha)
    /// branch per step.
    Combined { mixture: MixtureProposal, alpha: f64 },
    /// Swap-move Gibbs over subsets of fixed cardinality.
    GibbsSwap { size: usize },
    /// M³ restricted to subsets of fixed cardinality.
    M3FixedSize { mixture: MixtureProposal, size: usize },
    /// Combined chain at fixed cardinality.
    CombinedFixedSize {
        mixture: MixtureProposal,
        alpha: f64,
        size: usize,
    },
}

impl SamplerSpec {
    pub fn validate(&self, model_n: usize) -> Result<(), ChainError> {
        let check_alpha = |alpha: f64| {
            if !(alpha > 0.0 && alpha < 1.0) {
                Err(ChainError::BadAlpha(alpha))
            } else {
                Ok(())
            }
        };
        let check_mixture = |q: &MixtureProposal| {
            if q.n() != model_n {
                Err(ChainError::MixtureGroundMismatch {
                    mixture_n: q.n(),
                    model_n,
                })
            } else {
                Ok(())
            }
        };
        let check_size = |size: usize| {
            if size > model_n {
                Err(ChainError::SizeTooLarge { size, n: model_n })
            } else {
                Ok(())
            }
        };
        match self {
            SamplerSpec::Gibbs => Ok(()),
            SamplerSpec::M3 { mixture } => check_mixture(mixture),
            SamplerSpec::Combined { mixture, alpha } => {
                check_alpha(*alpha)?;
                check_mixture(mixture)
            }
            SamplerSpec::GibbsSwap { size } => check_size(*size),
            SamplerSpec::M3FixedSize { mixture, size } => {
                check_mixture(mixture)?;
                check_size(*size)
            }
            SamplerSpec::CombinedFixedSize {
                mixture,
                alpha,
                size,
            } => {
                check_alpha(*alpha)?;
                check_mixture(mixture)?;
                check_size(*size)
            }
        }
    }

    /// Cardinality constraint, if this is a fixed-size variant.
    pub fn fixed_size(&self) -> Option<usize> {
        match self {
            SamplerSpec::GibbsSwap { size }
            | SamplerSpec::M3FixedSize { size, .. }
            | SamplerSpec::CombinedFixedSize { size, .. } => Some(*size),
            _ => None,
        }
    }

    pub fn mixture(&self) -> Option<&MixtureProposal> {
        match self {
            SamplerSpec::M3 { mixture }
            | SamplerSpec::Combined { mixture, .. }
            | SamplerSpec::M3FixedSize { mixture, .. }
            | SamplerSpec::CombinedFixedSize { mixture, .. } => Some(mixture),
            _ => None,
        }
    }
}

/// A chain's position plus cached quantities.
///
/// `log_f` always equals a fresh model evaluation of `current`; `log_q`
/// caches the proposal density of `current` and is dropped whenever a
/// move is made by a step that does not know it.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub current: Subset,
    pub log_f: f64,
    log_q: Option<f64>,
    pub step_count: u64,
}

impl ChainState {
    pub fn new<F: SetFunction>(model: &F, start: Subset) -> Self {
        ChainState {
            current: start,
            log_f: model.log_potential(start),
            log_q: None,
            step_count: 0,
        }
    }

    pub fn cached_log_q(&self) -> Option<f64> {
        self.log_q
    }
}

/// One Gibbs step: pick `v` uniformly, move to `S △ {v}` with probability
/// `exp(F(R)) / (exp(F(R)) + exp(F(S)))`. One oracle call.
pub fn gibbs_step<F: SetFunction, R: Rng + ?Sized>(model: &F, state: &mut ChainState, rng: &mut R) {
    let n = model.ground_size();
    let v = rng.random_range(0..n);
    let proposal = state.current.toggled(v);
    let log_f_r = model.log_potential(proposal);
    let accept = logistic(log_f_r - state.log_f);
    if rng.random::<f64>() < accept {
        state.current = proposal;
        state.log_f = log_f_r;
        state.log_q = None;
    }
    state.step_count += 1;
}

/// One M³ step: draw `R ~ q` independently of the current state and accept
/// with `min{1, π(R) q(S) / (π(S) q(R))}`. Proposing `R = S` is an
/// accepted self-loop. One oracle call.
pub fn m3_step<F: SetFunction, R: Rng + ?Sized>(
    model: &F,
    q: &MixtureProposal,
    state: &mut ChainState,
    rng: &mut R,
) {
    let log_q_s = match state.log_q {
        Some(v) => v,
        None => {
            let v = q.log_pdf(state.current);
            state.log_q = Some(v);
            v
        }
    };
    let proposal = q.sample(rng);
    let log_q_r = q.log_pdf(proposal);
    let log_f_r = model.log_potential(proposal);
    let log_ratio = (log_f_r + log_q_s) - (state.log_f + log_q_r);
    let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
    if accept {
        state.current = proposal;
        state.log_f = log_f_r;
        state.log_q = Some(log_q_r);
    }
    state.step_count += 1;
}

/// One combined-chain step: Gibbs with probability `alpha`, M³ otherwise.
pub fn combined_step<F: SetFunction, R: Rng + ?Sized>(
    model: &F,
    q: &MixtureProposal,
    alpha: f64,
    state: &mut ChainState,
    rng: &mut R,
) {
    if rng.random::<f64>() < alpha {
        gibbs_step(model, state, rng);
    } else {
        m3_step(model, q, state, rng);
    }
}

/// One swap step at fixed cardinality: pick `(v, u)` uniformly from
/// `S × (V∖S)` and move to `(S∖{v})∪{u}` with the Gibbs odds. A no-op when
/// `|S|` is 0 or `n` (no swap pairs exist).
pub fn gibbs_swap_step<F: SetFunction, R: Rng + ?Sized>(
    model: &F,
    state: &mut ChainState,
    rng: &mut R,
) {
    let n = model.ground_size();
    let k = state.current.len();
    if k == 0 || k == n {
        state.step_count += 1;
        return;
    }
    let inside = state.current.nth_member(rng.random_range(0..k));
    let outside = state
        .current
        .complement(n)
        .nth_member(rng.random_range(0..n - k));
    let proposal = state.current.without(inside).with(outside);
    let log_f_r = model.log_potential(proposal);
    let accept = logistic(log_f_r - state.log_f);
    if rng.random::<f64>() < accept {
        state.current = proposal;
        state.log_f = log_f_r;
        state.log_q = None;
    }
    state.step_count += 1;
}

/// One M³ step restricted to subsets of the mixture's fixed cardinality.
pub fn m3_fixed_size_step<F: SetFunction, R: Rng + ?Sized>(
    model: &F,
    q: &FixedSizeMixture,
    state: &mut ChainState,
    rng: &mut R,
) {
    debug_assert_eq!(state.current.len(), q.size());
    let log_q_s = match state.log_q {
        Some(v) => v,
        None => {
            let v = q.log_pdf(state.current);
            state.log_q = Some(v);
            v
        }
    };
    let proposal = q.sample(rng);
    let log_q_r = q.log_pdf(proposal);
    let log_f_r = model.log_potential(proposal);
    let log_ratio = (log_f_r + log_q_s) - (state.log_f + log_q_r);
    let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
    if accept {
        state.current = proposal;
        state.log_f = log_f_r;
        state.log_q = Some(log_q_r);
    }
    state.step_count += 1;
}

/// Combined chain at fixed cardinality.
pub fn combined_fixed_size_step<F: SetFunction, R: Rng + ?Sized>(
    model: &F,
    q: &FixedSizeMixture,
    alpha: f64,
    state: &mut ChainState,
    rng: &mut R,
) {
    if rng.random::<f64>() < alpha {
        gibbs_swap_step(model, state, rng);
    } else {
        m3_fixed_size_step(model, q, state, rng);
    }
}

/// An independent RNG stream for `(seed, stream)`; streams with distinct
/// indices never overlap.
pub fn chain_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Recorded output of a multi-chain run: the n-bit membership mask and
/// cumulative wall-clock nanoseconds at every recorded step, per chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trace {
    pub n: usize,
    pub record_every: usize,
    pub seed: u64,
    /// `masks[chain][record]`.
    pub masks: Vec<Vec<u64>>,
    /// `wallclock_ns[chain][record]`, cumulative within each chain.
    pub wallclock_ns: Vec<Vec<u64>>,
}

impl Trace {
    pub fn chains(&self) -> usize {
        self.masks.len()
    }

    /// Number of recorded steps per chain (including the initial state).
    pub fn records(&self) -> usize {
        self.masks.first().map_or(0, |c| c.len())
    }

    /// Membership indicator of element `v` at `(chain, record)`, as 0/1.
    pub fn indicator(&self, chain: usize, record: usize, v: usize) -> f64 {
        (self.masks[chain][record] >> v & 1) as f64
    }

    /// Global step index of a recorded sample.
    pub fn step_of_record(&self, record: usize) -> usize {
        record * self.record_every
    }

    /// CSV with header `chain,step,wallclock_ns,bit_0,…,bit_{n-1}`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("chain,step,wallclock_ns");
        for v in 0..self.n {
            out.push_str(&format!(",bit_{v}"));
        }
        out.push('\n');
        for chain in 0..self.chains() {
            for record in 0..self.records() {
                out.push_str(&format!(
                    "{},{},{}",
                    chain,
                    self.step_of_record(record),
                    self.wallclock_ns[chain][record]
                ));
                for v in 0..self.n {
                    out.push_str(if self.masks[chain][record] >> v & 1 == 1 {
                        ",1"
                    } else {
                        ",0"
                    });
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Runs `chains` independent chains of the given sampler for `steps` steps
/// each, recording every `record_every`-th state (step 0 included).
///
/// Chain `c` uses the RNG stream `(seed, c)`; chains run in parallel and
/// the trace contents are bit-identical for identical `(model, sampler,
/// dimensions, seed)` regardless of thread count (wall-clock columns
/// excepted).
///
/// Initial states are over-dispersed: drawn from the proposal mixture when
/// the sampler has one, otherwise uniform over the state space (uniform
/// over size-ℓ subsets for fixed-size samplers).
pub fn run_chains<F: SetFunction>(
    model: &F,
    sampler: &SamplerSpec,
    chains: usize,
    steps: usize,
    record_every: usize,
    seed: u64,
) -> Result<Trace, ChainError> {
    let n = model.ground_size();
    sampler.validate(n)?;
    if chains == 0 {
        return Err(ChainError::NoChains);
    }
    if record_every == 0 {
        return Err(ChainError::BadRecordEvery);
    }
    let fixed = match sampler {
        SamplerSpec::M3FixedSize { mixture, size }
        | SamplerSpec::CombinedFixedSize { mixture, size, .. } => {
            Some(FixedSizeMixture::new(mixture, *size)?)
        }
        _ => None,
    };

    let per_chain: Vec<(Vec<u64>, Vec<u64>)> = (0..chains)
        .into_par_iter()
        .map(|chain| {
            let mut rng = chain_rng(seed, chain as u64);
            run_single_chain(model, sampler, fixed.as_ref(), steps, record_every, &mut rng)
        })
        .collect();

    let (masks, wallclock_ns) = per_chain.into_iter().unzip();
    Ok(Trace {
        n,
        record_every,
        seed,
        masks,
        wallclock_ns,
    })
}

fn run_single_chain<F: SetFunction>(
    model: &F,
    sampler: &SamplerSpec,
    fixed: Option<&FixedSizeMixture>,
    steps: usize,
    record_every: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<u64>, Vec<u64>) {
    let n = model.ground_size();
    let gs = GroundSet::new(n).expect("model ground size validated");
    let start = match sampler {
        SamplerSpec::Gibbs => gs.random_subset(rng),
        SamplerSpec::M3 { mixture } | SamplerSpec::Combined { mixture, .. } => mixture.sample(rng),
        SamplerSpec::GibbsSwap { size } => gs.random_subset_of_size(*size, rng),
        SamplerSpec::M3FixedSize { .. } | SamplerSpec::CombinedFixedSize { .. } => {
            fixed.expect("fixed-size machinery prepared").sample(rng)
        }
    };
    let mut state = ChainState::new(model, start);
    let expected_records = steps / record_every + 1;
    let mut masks = Vec::with_capacity(expected_records);
    let mut clocks = Vec::with_capacity(expected_records);
    let t0 = Instant::now();
    masks.push(state.current.bits());
    clocks.push(0u64);
    for step in 1..=steps {
        match sampler {
            SamplerSpec::Gibbs => gibbs_step(model, &mut state, rng),
            SamplerSpec::M3 { mixture } => m3_step(model, mixture, &mut state, rng),
            SamplerSpec::Combined { mixture, alpha } => {
                combined_step(model, mixture, *alpha, &mut state, rng)
            }
            SamplerSpec::GibbsSwap { .. } => gibbs_swap_step(model, &mut state, rng),
            SamplerSpec::M3FixedSize { .. } => {
                m3_fixed_size_step(model, fixed.unwrap(), &mut state, rng)
            }
            SamplerSpec::CombinedFixedSize { alpha, .. } => {
                combined_fixed_size_step(model, fixed.unwrap(), *alpha, &mut state, rng)
            }
        }
        if step % record_every == 0 {
            masks.push(state.current.bits());
            clocks.push(t0.elapsed().as_nanos() as u64);
        }
    }
    (masks, clocks)
}
