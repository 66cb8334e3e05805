//! Convergence diagnostics over multi-chain traces.
//!
//! PSRF follows the classic Gelman–Rubin construction, applied to the
//! binary membership indicator of each element treated as a real scalar
//! series: with `m ≥ 2` chains of `L` post-burn-in samples,
//!
//! ```text
//! W = mean_j s_j²,  B = L · var_j(x̄_j),  R̂ = sqrt((L-1)/L + B/(L·W)),
//! ```
//!
//! without chain splitting or degrees-of-freedom correction. A split-chain
//! variant (each chain halved before the computation) is available behind
//! [`PsrfVariant::Split`]. Degenerate cases: `W = 0, B = 0` reports 1,
//! `W = 0, B > 0` reports the `+inf` sentinel.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chains::Trace;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("PSRF needs at least 2 chains, got {0}")]
    TooFewChains(usize),
    #[error("PSRF needs at least 4 post-burn-in samples, got {0}")]
    TooFewSamples(usize),
    #[error("burn-in fraction must lie in [0, 1), got {0}")]
    BadBurnIn(f64),
    #[error("checkpoints must be sorted ascending and nonzero, got {0:?}")]
    BadCheckpoints(Vec<usize>),
    #[error("checkpoint {checkpoint} exceeds the {available} recorded samples")]
    CheckpointOutOfRange { checkpoint: usize, available: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PsrfVariant {
    #[default]
    Classic,
    /// Each chain is split in half, doubling the chain count.
    Split,
}

/// Per-element PSRF values plus max/mean aggregates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsrfReport {
    pub per_element: Vec<f64>,
    /// Max over elements (the default aggregate).
    pub aggregate: f64,
    pub aggregate_mean: f64,
    /// Post-burn-in samples per chain that entered the computation.
    pub samples: usize,
}

/// PSRF over the full trace after discarding a leading fraction of each
/// chain.
pub fn psrf(trace: &Trace, burn_in_fraction: f64) -> Result<PsrfReport, DiagnosticsError> {
    psrf_prefix(trace, trace.records(), burn_in_fraction, PsrfVariant::Classic)
}

/// PSRF variant selection; see [`PsrfVariant`].
pub fn psrf_with_variant(
    trace: &Trace,
    burn_in_fraction: f64,
    variant: PsrfVariant,
) -> Result<PsrfReport, DiagnosticsError> {
    psrf_prefix(trace, trace.records(), burn_in_fraction, variant)
}

/// PSRF over the first `records` recorded samples of each chain.
pub fn psrf_prefix(
    trace: &Trace,
    records: usize,
    burn_in_fraction: f64,
    variant: PsrfVariant,
) -> Result<PsrfReport, DiagnosticsError> {
    if !(0.0..1.0).contains(&burn_in_fraction) {
        return Err(DiagnosticsError::BadBurnIn(burn_in_fraction));
    }
    if records > trace.records() {
        return Err(DiagnosticsError::CheckpointOutOfRange {
            checkpoint: records,
            available: trace.records(),
        });
    }
    let chains = trace.chains();
    if chains < 2 {
        return Err(DiagnosticsError::TooFewChains(chains));
    }
    let burn = (records as f64 * burn_in_fraction).floor() as usize;
    let kept = records - burn;
    if kept < 4 {
        return Err(DiagnosticsError::TooFewSamples(kept));
    }

    // Build the (chain, window) list; Split halves each chain. Odd-length
    // windows drop the middle sample, matching the usual convention.
    let windows: Vec<(usize, usize, usize)> = match variant {
        PsrfVariant::Classic => (0..chains).map(|c| (c, burn, kept)).collect(),
        PsrfVariant::Split => {
            let half = kept / 2;
            let mut w = Vec::with_capacity(2 * chains);
            for c in 0..chains {
                w.push((c, burn, half));
                w.push((c, burn + kept - half, half));
            }
            w
        }
    };
    let len = windows[0].2;
    if len < 4 {
        return Err(DiagnosticsError::TooFewSamples(len));
    }

    let n = trace.n;
    let mut per_element = Vec::with_capacity(n);
    for v in 0..n {
        let mut means = Vec::with_capacity(windows.len());
        let mut vars = Vec::with_capacity(windows.len());
        for &(c, start, count) in &windows {
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for r in start..start + count {
                let x = trace.indicator(c, r, v);
                sum += x;
                sumsq += x * x;
            }
            let lf = count as f64;
            let mean = sum / lf;
            // Sample variance with ddof = 1; indicators keep this exact.
            let var = (sumsq - lf * mean * mean).max(0.0) / (lf - 1.0);
            means.push(mean);
            vars.push(var);
        }
        let m = windows.len() as f64;
        let lf = len as f64;
        let w: f64 = vars.iter().sum::<f64>() / m;
        let grand = means.iter().sum::<f64>() / m;
        let b = lf / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
        let rhat = if w == 0.0 {
            if b == 0.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            ((lf - 1.0) / lf + b / (lf * w)).sqrt()
        };
        per_element.push(rhat);
    }
    let aggregate = per_element.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let aggregate_mean = per_element.iter().sum::<f64>() / n as f64;
    Ok(PsrfReport {
        per_element,
        aggregate,
        aggregate_mean,
        samples: len,
    })
}

/// PSRF at each prefix length in `checkpoints` (counts of recorded
/// samples, sorted ascending).
pub fn psrf_curve(
    trace: &Trace,
    checkpoints: &[usize],
    burn_in_fraction: f64,
    variant: PsrfVariant,
) -> Result<Vec<(usize, PsrfReport)>, DiagnosticsError> {
    if checkpoints.is_empty()
        || checkpoints.windows(2).any(|w| w[0] >= w[1])
        || checkpoints[0] == 0
    {
        return Err(DiagnosticsError::BadCheckpoints(checkpoints.to_vec()));
    }
    checkpoints
        .iter()
        .map(|&cp| Ok((cp, psrf_prefix(trace, cp, burn_in_fraction, variant)?)))
        .collect()
}

/// Evenly spaced checkpoint prefix lengths ending exactly at `records`.
pub fn default_checkpoints(records: usize, count: usize) -> Vec<usize> {
    let count = count.max(1);
    let mut cps: Vec<usize> = (1..=count)
        .map(|i| (records * i + count - 1) / count)
        .filter(|&c| c >= 4)
        .collect();
    cps.dedup();
    if cps.last() != Some(&records) && records >= 4 {
        cps.push(records);
    }
    cps
}

/// Mean membership indicator per element, pooled over chains post-burn-in.
pub fn empirical_marginals(trace: &Trace, burn_in_fraction: f64) -> Vec<f64> {
    let records = trace.records();
    let burn = (records as f64 * burn_in_fraction).floor() as usize;
    let kept = records.saturating_sub(burn).max(1);
    let start = records - kept;
    let mut sums = vec![0.0; trace.n];
    for c in 0..trace.chains() {
        for r in start..records {
            let mask = trace.masks[c][r];
            let mut bits = mask;
            while bits != 0 {
                let v = bits.trailing_zeros() as usize;
                sums[v] += 1.0;
                bits &= bits - 1;
            }
        }
    }
    let total = (trace.chains() * kept) as f64;
    sums.iter().map(|s| s / total).collect()
}
