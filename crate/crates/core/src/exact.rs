//! Brute-force exact inference and spectral analysis at desk scale.
//!
//! Everything here is dense: distributions are `2^n` tables, transition
//! matrices are `2^n × 2^n` (or `C(n,ℓ)` squared for fixed-cardinality
//! chains), and spectral gaps come from a symmetric eigensolver applied to
//! the similarity transform `D^{1/2} P D^{-1/2}` — reversibility makes the
//! spectrum real, so no general nonsymmetric solver is ever needed.
//!
//! Matrices are built from the closed-form chain definitions, never by
//! simulation, which is what lets this module act as an independent oracle
//! for the samplers in [`crate::chains`].
//!
//! Default limits: tables up to `n = 20`, dense matrices and spectral
//! operations up to `n = 13` (a 8192² matrix is half a GiB). Both limits
//! are caller-supplied, so larger hosts can raise them.

use ndarray::{Array1, Array2};
use ndarray_linalg::{EigValshInto, UPLO};
use thiserror::Error;

use crate::chains::SamplerSpec;
use crate::logmodular::FixedSizeMixture;
use crate::model::SetFunction;
use crate::numeric::{logistic, logsumexp};
use crate::subset::{GroundSet, Subset};

/// Default cap for dense `2^n` tables.
pub const DEFAULT_ENUM_LIMIT: usize = 20;
/// Default cap for dense transition matrices and eigensolves.
pub const DEFAULT_MATRIX_LIMIT: usize = 13;

/// Tolerance used when checking reversibility before a spectral solve.
pub const REVERSIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ExactError {
    #[error("ground set size {n} exceeds the exact-operation limit {limit}")]
    GroundSetTooLarge { n: usize, limit: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("chain is not reversible: max detailed-balance residual {residual:e} exceeds {tol:e}")]
    NotReversible { residual: f64, tol: f64 },
    #[error("matrix row {row} sums to {sum}, not 1")]
    NotStochastic { row: usize, sum: f64 },
    #[error("negative transition entry {value:e} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("block {block} of the partition is empty")]
    EmptyBlock { block: usize },
    #[error("bottleneck set is empty or has zero probability")]
    EmptyBottleneckSet,
    #[error("parameter out of domain: {0}")]
    BadParameter(String),
    #[error("eigensolver failure: {0}")]
    Eigensolver(String),
    #[error(transparent)]
    Chain(#[from] crate::chains::ChainError),
    #[error(transparent)]
    Mixture(#[from] crate::logmodular::MixtureError),
}

/// The exact distribution `pi(S) = exp(F(S) - log Z)` as a dense table
/// indexed by subset bitmask.
#[derive(Debug, Clone)]
pub struct DistributionTable {
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub log_z: f64,
}

impl DistributionTable {
    pub fn n(&self) -> usize {
        self.probs.len().ilog2() as usize
    }
}

/// Enumerates `pi` over all `2^n` subsets; `log Z` by log-sum-exp.
pub fn enumerate_distribution<F: SetFunction>(
    model: &F,
    limit: usize,
) -> Result<DistributionTable, ExactError> {
    let n = model.ground_size();
    if n > limit {
        return Err(ExactError::GroundSetTooLarge { n, limit });
    }
    let gs = GroundSet::new(n).expect("validated");
    let log_f: Vec<f64> = gs.subsets().map(|s| model.log_potential(s)).collect();
    let log_z = logsumexp(&log_f);
    let log_probs: Vec<f64> = log_f.iter().map(|&f| f - log_z).collect();
    let probs = log_probs.iter().map(|&lp| lp.exp()).collect();
    Ok(DistributionTable {
        probs,
        log_probs,
        log_z,
    })
}

/// `P(v ∈ S)` for each element, by summation over the table.
pub fn exact_marginals(table: &DistributionTable) -> Vec<f64> {
    let n = table.n();
    let mut marginals = vec![0.0; n];
    for (mask, &p) in table.probs.iter().enumerate() {
        let mut bits = mask;
        while bits != 0 {
            let v = bits.trailing_zeros() as usize;
            marginals[v] += p;
            bits &= bits - 1;
        }
    }
    marginals
}

/// Total variation distance `½ Σ |p_i - q_i|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64, ExactError> {
    if p.len() != q.len() {
        return Err(ExactError::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0)
}

/// The state space a dense transition matrix is built over: row `i`
/// corresponds to the subset with bitmask `masks[i]`.
#[derive(Debug, Clone)]
pub struct StateSpace {
    pub n: usize,
    pub masks: Vec<u64>,
}

impl StateSpace {
    pub fn full(n: usize) -> Self {
        StateSpace {
            n,
            masks: (0..(1u64 << n)).collect(),
        }
    }

    pub fn fixed_size(n: usize, size: usize) -> Self {
        let gs = GroundSet::new(n).expect("n validated upstream");
        StateSpace {
            n,
            masks: gs.subsets_of_size(size).iter().map(|s| s.bits()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    /// Row index of a mask; masks are stored in increasing order.
    pub fn index_of(&self, mask: u64) -> Option<usize> {
        self.masks.binary_search(&mask).ok()
    }

    /// Is this the full `2^n` space (identity indexing)?
    pub fn is_full(&self) -> bool {
        self.masks.len() == 1usize << self.n
    }
}

/// A dense transition matrix over an explicit state space.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    pub entries: Array2<f64>,
    pub space: StateSpace,
}

impl TransitionMatrix {
    /// Wraps raw entries, checking row-stochasticity and nonnegativity
    /// (entries in `[-1e-12, 0)` are clamped to zero).
    pub fn from_entries(mut entries: Array2<f64>, space: StateSpace) -> Result<Self, ExactError> {
        let m = space.len();
        if entries.nrows() != m || entries.ncols() != m {
            return Err(ExactError::LengthMismatch {
                left: entries.nrows(),
                right: m,
            });
        }
        for ((i, j), v) in entries.indexed_iter_mut() {
            if *v < 0.0 {
                if *v < -1e-12 {
                    return Err(ExactError::NegativeEntry {
                        row: i,
                        col: j,
                        value: *v,
                    });
                }
                *v = 0.0;
            }
        }
        for (i, row) in entries.rows().into_iter().enumerate() {
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(ExactError::NotStochastic { row: i, sum });
            }
        }
        Ok(TransitionMatrix { entries, space })
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    /// `(I + P) / 2`: halves off-diagonal mass and shifts the spectrum
    /// into `[0, 1]`.
    pub fn lazify(&self) -> TransitionMatrix {
        let m = self.len();
        let mut entries = self.entries.clone() * 0.5;
        for i in 0..m {
            entries[[i, i]] += 0.5;
        }
        TransitionMatrix {
            entries,
            space: self.space.clone(),
        }
    }
}

/// `pi` conditioned on (normalized over) the given state space.
pub fn conditioned_distribution<F: SetFunction>(
    model: &F,
    space: &StateSpace,
) -> Result<Vec<f64>, ExactError> {
    let log_f: Vec<f64> = space
        .masks
        .iter()
        .map(|&m| model.log_potential(Subset::from_bits(m)))
        .collect();
    let log_z = logsumexp(&log_f);
    Ok(log_f.iter().map(|&f| (f - log_z).exp()).collect())
}

/// Builds the dense transition matrix of a sampler from its closed-form
/// definition (no simulation). Fixed-size samplers are built over the
/// `C(n, ℓ)` restricted space.
pub fn build_transition_matrix<F: SetFunction>(
    model: &F,
    sampler: &SamplerSpec,
    limit: usize,
) -> Result<TransitionMatrix, ExactError> {
    let n = model.ground_size();
    if n > limit {
        return Err(ExactError::GroundSetTooLarge { n, limit });
    }
    sampler.validate(n)?;
    match sampler {
        SamplerSpec::Gibbs => build_gibbs(model),
        SamplerSpec::M3 { mixture } => {
            let space = StateSpace::full(n);
            let log_q: Vec<f64> = space
                .masks
                .iter()
                .map(|&m| mixture.log_pdf(Subset::from_bits(m)))
                .collect();
            build_independence_metropolis(model, space, &log_q)
        }
        SamplerSpec::Combined { mixture, alpha } => {
            let g = build_gibbs(model)?;
            let m3 = build_transition_matrix(
                model,
                &SamplerSpec::M3 {
                    mixture: mixture.clone(),
                },
                limit,
            )?;
            let entries = &g.entries * *alpha + &m3.entries * (1.0 - *alpha);
            TransitionMatrix::from_entries(entries, g.space)
        }
        SamplerSpec::GibbsSwap { size } => build_gibbs_swap(model, *size),
        SamplerSpec::M3FixedSize { mixture, size } => {
            let fq = FixedSizeMixture::new(mixture, *size)?;
            let space = StateSpace::fixed_size(n, *size);
            let log_q: Vec<f64> = space
                .masks
                .iter()
                .map(|&m| fq.log_pdf(Subset::from_bits(m)))
                .collect();
            build_independence_metropolis(model, space, &log_q)
        }
        SamplerSpec::CombinedFixedSize {
            mixture,
            alpha,
            size,
        } => {
            let g = build_gibbs_swap(model, *size)?;
            let m3 = build_transition_matrix(
                model,
                &SamplerSpec::M3FixedSize {
                    mixture: mixture.clone(),
                    size: *size,
                },
                limit,
            )?;
            let entries = &g.entries * *alpha + &m3.entries * (1.0 - *alpha);
            TransitionMatrix::from_entries(entries, g.space)
        }
    }
}

fn build_gibbs<F: SetFunction>(model: &F) -> Result<TransitionMatrix, ExactError> {
    let n = model.ground_size();
    let space = StateSpace::full(n);
    let m = space.len();
    let log_f: Vec<f64> = (0..m as u64)
        .map(|b| model.log_potential(Subset::from_bits(b)))
        .collect();
    let mut entries = Array2::zeros((m, m));
    let inv_n = 1.0 / n as f64;
    for s in 0..m {
        let mut stay = 1.0;
        for v in 0..n {
            let r = s ^ (1 << v);
            let p = inv_n * logistic(log_f[r] - log_f[s]);
            entries[[s, r]] = p;
            stay -= p;
        }
        entries[[s, s]] = stay;
    }
    TransitionMatrix::from_entries(entries, space)
}

/// Metropolis chain with a state-independent proposal given by per-state
/// log densities: `P(S, R) = q(R) min{1, exp((F(R)+log q(S)) - (F(S)+log q(R)))}`.
fn build_independence_metropolis<F: SetFunction>(
    model: &F,
    space: StateSpace,
    log_q: &[f64],
) -> Result<TransitionMatrix, ExactError> {
    let m = space.len();
    let log_f: Vec<f64> = space
        .masks
        .iter()
        .map(|&b| model.log_potential(Subset::from_bits(b)))
        .collect();
    let mut entries = Array2::zeros((m, m));
    for s in 0..m {
        let mut stay = 1.0;
        for r in 0..m {
            if r == s {
                continue;
            }
            let log_ratio = (log_f[r] + log_q[s]) - (log_f[s] + log_q[r]);
            let p = (log_q[r] + log_ratio.min(0.0)).exp();
            entries[[s, r]] = p;
            stay -= p;
        }
        entries[[s, s]] = stay;
    }
    TransitionMatrix::from_entries(entries, space)
}

fn build_gibbs_swap<F: SetFunction>(model: &F, size: usize) -> Result<TransitionMatrix, ExactError> {
    let n = model.ground_size();
    let space = StateSpace::fixed_size(n, size);
    let m = space.len();
    let log_f: Vec<f64> = space
        .masks
        .iter()
        .map(|&b| model.log_potential(Subset::from_bits(b)))
        .collect();
    let mut entries = Array2::zeros((m, m));
    if size == 0 || size == n {
        for s in 0..m {
            entries[[s, s]] = 1.0;
        }
        return TransitionMatrix::from_entries(entries, space);
    }
    let pair_prob = 1.0 / (size * (n - size)) as f64;
    for s in 0..m {
        let subset = Subset::from_bits(space.masks[s]);
        let mut stay = 1.0;
        for v in subset.members() {
            for u in subset.complement(n).members() {
                let target = subset.without(v).with(u);
                let r = space
                    .index_of(target.bits())
                    .expect("swap target stays in the fixed-size space");
                let p = pair_prob * logistic(log_f[r] - log_f[s]);
                entries[[s, r]] += p;
                stay -= p;
            }
        }
        entries[[s, s]] = stay;
    }
    TransitionMatrix::from_entries(entries, space)
}

/// `max_{S,R} |pi(S) P(S,R) - pi(R) P(R,S)|`.
pub fn detailed_balance_residual(p: &TransitionMatrix, pi: &[f64]) -> Result<f64, ExactError> {
    let m = p.len();
    if pi.len() != m {
        return Err(ExactError::LengthMismatch {
            left: pi.len(),
            right: m,
        });
    }
    let mut worst: f64 = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            let d = (pi[i] * p.entries[[i, j]] - pi[j] * p.entries[[j, i]]).abs();
            if d > worst {
                worst = d;
            }
        }
    }
    Ok(worst)
}

/// `max_S |Σ_R pi(R) P(R,S) - pi(S)|`: residual of `pi P = pi`.
pub fn stationarity_residual(p: &TransitionMatrix, pi: &[f64]) -> Result<f64, ExactError> {
    let m = p.len();
    if pi.len() != m {
        return Err(ExactError::LengthMismatch {
            left: pi.len(),
            right: m,
        });
    }
    let pi_v = Array1::from(pi.to_vec());
    let mapped = pi_v.dot(&p.entries);
    Ok(mapped
        .iter()
        .zip(pi)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// `max_row |Σ_j P(row, j) - 1|`.
pub fn row_stochasticity_residual(p: &TransitionMatrix) -> f64 {
    p.entries
        .rows()
        .into_iter()
        .map(|r| (r.sum() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Spectral summary of a reversible chain.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    /// `gamma = 1 - lambda_2`.
    pub gap: f64,
    pub lambda2: f64,
    /// All eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
}

/// Eigenvalues of `D^{1/2} P D^{-1/2}` (symmetric because the chain is
/// reversible; this is checked first). Only a symmetric eigensolver is
/// used.
pub fn spectral_gap(p: &TransitionMatrix, pi: &[f64]) -> Result<SpectralReport, ExactError> {
    let residual = detailed_balance_residual(p, pi)?;
    if residual > REVERSIBILITY_TOL {
        return Err(ExactError::NotReversible {
            residual,
            tol: REVERSIBILITY_TOL,
        });
    }
    let m = p.len();
    let sqrt_pi: Vec<f64> = pi.iter().map(|&x| x.sqrt()).collect();
    let mut sym = Array2::zeros((m, m));
    for i in 0..m {
        for j in 0..=i {
            // Detailed balance makes the two symmetrized entries equal up
            // to roundoff; average them to enforce exact symmetry.
            let a = if sqrt_pi[j] > 0.0 {
                p.entries[[i, j]] * sqrt_pi[i] / sqrt_pi[j]
            } else {
                0.0
            };
            let b = if sqrt_pi[i] > 0.0 {
                p.entries[[j, i]] * sqrt_pi[j] / sqrt_pi[i]
            } else {
                0.0
            };
            let v = 0.5 * (a + b);
            sym[[i, j]] = v;
            sym[[j, i]] = v;
        }
    }
    let vals = sym
        .eigvalsh_into(UPLO::Lower)
        .map_err(|e| ExactError::Eigensolver(e.to_string()))?;
    let mut eigenvalues: Vec<f64> = vals.to_vec();
    eigenvalues.reverse();
    let lambda2 = if m >= 2 { eigenvalues[1] } else { eigenvalues[0] };
    Ok(SpectralReport {
        gap: 1.0 - lambda2,
        lambda2,
        eigenvalues,
    })
}

/// Mixing-time bounds from the spectral gap of a lazy reversible chain:
/// `lower = (1/γ - 1) log(1/(2ε))`, `upper = (1/γ) log(1/(ε π_min))`.
pub fn mixing_time_bounds(
    gamma: f64,
    pi_min: f64,
    epsilon: f64,
) -> Result<(f64, f64), ExactError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(ExactError::BadParameter(format!(
            "gamma must be in (0, 1], got {gamma}"
        )));
    }
    if !(pi_min > 0.0 && pi_min <= 1.0) {
        return Err(ExactError::BadParameter(format!(
            "pi_min must be in (0, 1], got {pi_min}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(ExactError::BadParameter(format!(
            "epsilon must be in (0, 1), got {epsilon}"
        )));
    }
    let lower = (1.0 / gamma - 1.0) * (1.0 / (2.0 * epsilon)).ln();
    let upper = (1.0 / gamma) * (1.0 / (epsilon * pi_min)).ln();
    Ok((lower, upper))
}

/// Projects a reversible chain onto blocks: `pī(i) = Σ_{S∈Ω_i} pi(S)`,
/// `P̄(i,j) = Σ_{S∈Ω_i, R∈Ω_j} pi(S) P(S,R) / pī(i)`.
///
/// `labels[s]` is the block id of state `s`; ids must cover `0..k`.
pub fn project_chain(
    p: &TransitionMatrix,
    pi: &[f64],
    labels: &[usize],
) -> Result<(TransitionMatrix, Vec<f64>), ExactError> {
    let m = p.len();
    if labels.len() != m || pi.len() != m {
        return Err(ExactError::LengthMismatch {
            left: labels.len(),
            right: m,
        });
    }
    let k = labels.iter().max().map_or(0, |&x| x + 1);
    let mut pi_bar = vec![0.0; k];
    for (s, &b) in labels.iter().enumerate() {
        pi_bar[b] += pi[s];
    }
    if let Some(block) = pi_bar.iter().position(|&x| x == 0.0) {
        return Err(ExactError::EmptyBlock { block });
    }
    let mut flows = Array2::zeros((k, k));
    for s in 0..m {
        for r in 0..m {
            flows[[labels[s], labels[r]]] += pi[s] * p.entries[[s, r]];
        }
    }
    for i in 0..k {
        for j in 0..k {
            flows[[i, j]] /= pi_bar[i];
        }
    }
    let space = StateSpace {
        n: p.space.n,
        masks: (0..k as u64).collect(),
    };
    let projected = TransitionMatrix::from_entries(flows, space)?;
    Ok((projected, pi_bar))
}

/// Restriction of a chain to a block: off-diagonal entries are copied
/// within the block and the diagonal absorbs all mass that would leak out.
/// Returns the restricted matrix and the conditioned stationary law.
pub fn restrict_chain(
    p: &TransitionMatrix,
    pi: &[f64],
    block: &[usize],
) -> Result<(TransitionMatrix, Vec<f64>), ExactError> {
    if block.is_empty() {
        return Err(ExactError::EmptyBlock { block: 0 });
    }
    let k = block.len();
    let mut entries = Array2::zeros((k, k));
    for (a, &s) in block.iter().enumerate() {
        let mut stay = 1.0;
        for (b, &r) in block.iter().enumerate() {
            if a == b {
                continue;
            }
            let v = p.entries[[s, r]];
            entries[[a, b]] = v;
            stay -= v;
        }
        entries[[a, a]] = stay;
    }
    let mass: f64 = block.iter().map(|&s| pi[s]).sum();
    if mass <= 0.0 {
        return Err(ExactError::EmptyBottleneckSet);
    }
    let pi_cond: Vec<f64> = block.iter().map(|&s| pi[s] / mass).collect();
    let space = StateSpace {
        n: p.space.n,
        masks: block.iter().map(|&s| p.space.masks[s]).collect(),
    };
    let restricted = TransitionMatrix::from_entries(entries, space)?;
    Ok((restricted, pi_cond))
}

/// Bottleneck ratio `Φ(A) = Σ_{S∈A, R∉A} pi(S) P(S,R) / pi(A)`.
pub fn bottleneck_ratio(
    p: &TransitionMatrix,
    pi: &[f64],
    in_set: &[bool],
) -> Result<f64, ExactError> {
    let m = p.len();
    if in_set.len() != m || pi.len() != m {
        return Err(ExactError::LengthMismatch {
            left: in_set.len(),
            right: m,
        });
    }
    let mass: f64 = (0..m).filter(|&s| in_set[s]).map(|s| pi[s]).sum();
    if mass <= 0.0 {
        return Err(ExactError::EmptyBottleneckSet);
    }
    let mut flow = 0.0;
    for s in 0..m {
        if !in_set[s] {
            continue;
        }
        for r in 0..m {
            if !in_set[r] {
                flow += pi[s] * p.entries[[s, r]];
            }
        }
    }
    Ok(flow / mass)
}

/// Worst-case total variation distance from stationarity after each of
/// `1..=t_max` steps: `d(t) = max_{X_0} TV(P^t(X_0, ·), pi)`.
pub fn exact_distance_curve(
    p: &TransitionMatrix,
    pi: &[f64],
    t_max: usize,
) -> Result<Vec<f64>, ExactError> {
    let m = p.len();
    if pi.len() != m {
        return Err(ExactError::LengthMismatch {
            left: pi.len(),
            right: m,
        });
    }
    let mut power = p.entries.clone();
    let mut curve = Vec::with_capacity(t_max);
    for t in 0..t_max {
        if t > 0 {
            power = power.dot(&p.entries);
        }
        let mut worst: f64 = 0.0;
        for row in power.rows() {
            let tv: f64 = row.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum::<f64>() / 2.0;
            worst = worst.max(tv);
        }
        curve.push(worst);
    }
    Ok(curve)
}

/// Block labels for the two-halves split: states with `|S| ≤ n/2` map to
/// block 0 (ties at `n/2` included), the rest to block 1.
pub fn half_split_labels(space: &StateSpace) -> Vec<usize> {
    space
        .masks
        .iter()
        .map(|&m| {
            if 2 * (m.count_ones() as usize) <= space.n {
                0
            } else {
                1
            }
        })
        .collect()
}
