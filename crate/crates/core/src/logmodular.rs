//! Log-modular distributions, mixtures of them, and exact
//! fixed-cardinality variants.
//!
//! A log-modular distribution over subsets has independent element
//! inclusions with `P(v ∈ S) = σ(m_v)`; its normalizer is available in
//! closed form, `log Z = Σ_v log(1 + exp(m_v))`. A mixture with positive
//! weights `w_i` and normalized modular exponents `m_i` has density
//!
//! ```text
//! q(S) = (1/Z_q) Σ_i w_i exp(m_i(S)),   Z_q = Σ_i w_i Z_i,
//! ```
//!
//! which supports O(n + r) exact sampling (pick component `i` with
//! probability `w_i Z_i / Z_q`, then sample the component) and O(n·r)
//! density evaluation. Everything is carried in log space: the equal-mass
//! weighting `w_i = 1/Z_i` used throughout spans hundreds of orders of
//! magnitude once `n` reaches experiment scale.
//!
//! Fixed-cardinality versions condition on `|S| = ℓ`. Sampling uses the
//! elementary-symmetric-polynomial recursion over suffix tables
//! (O(nℓ) precompute, O(n) per draw); the standard exact method costs
//! O(nℓ) rather than O(n), and this crate prefers exactness.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modular::ModularFunction;
use crate::numeric::{log1pexp, logaddexp, logistic, logsumexp};
use crate::subset::Subset;

#[derive(Debug, Error)]
pub enum MixtureError {
    #[error("mixture must have at least one component")]
    Empty,
    #[error("component {index} has non-finite or non-positive weight (log_w = {log_w})")]
    BadWeight { index: usize, log_w: f64 },
    #[error("component {index} has {found} weights, expected {expected}")]
    InconsistentGroundSize {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("weights must be finite")]
    NonFiniteWeights,
    #[error("requested cardinality {size} exceeds ground set size {n}")]
    SizeTooLarge { size: usize, n: usize },
}

/// `log Z` of the log-modular distribution induced by a modular function:
/// `c + Σ_v log(1 + exp(m_v))`. Overflow-safe for |m_v| up to 700.
pub fn log_partition(m: &ModularFunction) -> f64 {
    m.offset + m.weights.iter().map(|&w| log1pexp(w)).sum::<f64>()
}

/// A normalized log-modular distribution with cached normalizer and
/// inclusion probabilities.
#[derive(Debug, Clone)]
pub struct LogModular {
    weights: Vec<f64>,
    log_z: f64,
    inclusion: Vec<f64>,
}

impl LogModular {
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, MixtureError> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(MixtureError::NonFiniteWeights);
        }
        let log_z = weights.iter().map(|&w| log1pexp(w)).sum();
        let inclusion = weights.iter().map(|&w| logistic(w)).collect();
        Ok(LogModular {
            weights,
            log_z,
            inclusion,
        })
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    /// `P(v ∈ S) = σ(m_v)`.
    pub fn inclusion_probabilities(&self) -> &[f64] {
        &self.inclusion
    }

    pub fn log_pdf(&self, s: Subset) -> f64 {
        let mut acc = -self.log_z;
        for v in s.members() {
            acc += self.weights[v];
        }
        acc
    }

    /// One independent-inclusion draw; O(n).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Subset {
        let mut s = Subset::EMPTY;
        for (v, &p) in self.inclusion.iter().enumerate() {
            if rng.random::<f64>() < p {
                s.insert(v);
            }
        }
        s
    }
}

/// One mixture component: `w_i exp(m_i(S))` with `m_i` normalized.
#[derive(Debug, Clone)]
pub struct MixtureComponent {
    pub log_w: f64,
    dist: LogModular,
}

impl MixtureComponent {
    pub fn weights(&self) -> &[f64] {
        self.dist.weights()
    }

    pub fn log_z(&self) -> f64 {
        self.dist.log_z()
    }
}

/// A state-independent proposal distribution: a mixture of log-modular
/// distributions (Eq. (2) of the M³ construction).
#[derive(Debug, Clone)]
pub struct MixtureProposal {
    components: Vec<MixtureComponent>,
    log_z_q: f64,
    /// Cumulative component-selection probabilities `w_i Z_i / Z_q`.
    selection_cdf: Vec<f64>,
}

impl MixtureProposal {
    /// Builds a mixture from `(log w_i, weights_i)` pairs.
    pub fn new(parts: Vec<(f64, Vec<f64>)>) -> Result<Self, MixtureError> {
        if parts.is_empty() {
            return Err(MixtureError::Empty);
        }
        let n = parts[0].1.len();
        let mut components = Vec::with_capacity(parts.len());
        for (index, (log_w, weights)) in parts.into_iter().enumerate() {
            if !log_w.is_finite() {
                return Err(MixtureError::BadWeight { index, log_w });
            }
            if weights.len() != n {
                return Err(MixtureError::InconsistentGroundSize {
                    index,
                    expected: n,
                    found: weights.len(),
                });
            }
            let dist = LogModular::from_weights(weights)?;
            components.push(MixtureComponent { log_w, dist });
        }
        let mass: Vec<f64> = components
            .iter()
            .map(|c| c.log_w + c.dist.log_z())
            .collect();
        let log_z_q = logsumexp(&mass);
        let mut selection_cdf = Vec::with_capacity(components.len());
        let mut acc = 0.0;
        for &m in &mass {
            acc += (m - log_z_q).exp();
            selection_cdf.push(acc);
        }
        Ok(MixtureProposal {
            components,
            log_z_q,
            selection_cdf,
        })
    }

    /// Equal-selection-mass mixture: `w_i = 1/Z_i`, so each component is
    /// picked with probability `1/r`. This is the weighting used by the
    /// semigradient construction.
    pub fn equal_mass(modulars: &[ModularFunction]) -> Result<Self, MixtureError> {
        let parts = modulars
            .iter()
            .map(|m| {
                let (norm, _) = m.normalize();
                let log_z: f64 = norm.weights.iter().map(|&w| log1pexp(w)).sum();
                (-log_z, norm.weights)
            })
            .collect();
        MixtureProposal::new(parts)
    }

    pub fn r(&self) -> usize {
        self.components.len()
    }

    pub fn n(&self) -> usize {
        self.components[0].dist.n()
    }

    /// `log Z_q = log Σ_i w_i Z_i`.
    pub fn log_z_q(&self) -> f64 {
        self.log_z_q
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    /// `log q(S)`; O(n·r). Components are accumulated in index order so
    /// results are reproducible.
    pub fn log_pdf(&self, s: Subset) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut scores = Vec::with_capacity(self.components.len());
        for c in &self.components {
            let mut m = c.log_w;
            for v in s.members() {
                m += c.dist.weights()[v];
            }
            if m > best {
                best = m;
            }
            scores.push(m);
        }
        if best == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let sum: f64 = scores.iter().map(|&m| (m - best).exp()).sum();
        best + sum.ln() - self.log_z_q
    }

    /// One draw from the mixture: component with probability
    /// `w_i Z_i / Z_q`, then an independent-inclusion draw; O(n + r).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Subset {
        let u: f64 = rng.random();
        let idx = self
            .selection_cdf
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.components.len() - 1);
        self.components[idx].dist.sample(rng)
    }

    /// Component-selection probabilities `w_i Z_i / Z_q`.
    pub fn selection_probabilities(&self) -> Vec<f64> {
        let mut probs = Vec::with_capacity(self.selection_cdf.len());
        let mut prev = 0.0;
        for &c in &self.selection_cdf {
            probs.push(c - prev);
            prev = c;
        }
        probs
    }
}

/// JSON wire format: `{"components": [{"log_w": .., "weights": [..]}]}`.
#[derive(Serialize, Deserialize)]
struct MixtureWire {
    components: Vec<ComponentWire>,
}

#[derive(Serialize, Deserialize)]
struct ComponentWire {
    log_w: f64,
    weights: Vec<f64>,
}

impl Serialize for MixtureProposal {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let wire = MixtureWire {
            components: self
                .components
                .iter()
                .map(|c| ComponentWire {
                    log_w: c.log_w,
                    weights: c.dist.weights().to_vec(),
                })
                .collect(),
        };
        wire.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for MixtureProposal {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let wire = MixtureWire::deserialize(de)?;
        MixtureProposal::new(
            wire.components
                .into_iter()
                .map(|c| (c.log_w, c.weights))
                .collect(),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// `log e_ℓ(exp(m_1), …, exp(m_n))`: log of the ℓ-th elementary symmetric
/// polynomial, evaluated stably in log space.
pub fn fixed_size_log_partition(weights: &[f64], size: usize) -> Result<f64, MixtureError> {
    let n = weights.len();
    if size > n {
        return Err(MixtureError::SizeTooLarge { size, n });
    }
    // e[j] over the processed prefix; log-space DP.
    let mut e = vec![f64::NEG_INFINITY; size + 1];
    e[0] = 0.0;
    for &m in weights {
        for j in (1..=size).rev() {
            e[j] = logaddexp(e[j], m + e[j - 1]);
        }
    }
    Ok(e[size])
}

/// Exact sampler for a log-modular distribution conditioned on `|S| = ℓ`,
/// via sequential conditioning on suffix elementary-symmetric tables.
#[derive(Debug, Clone)]
pub struct FixedSizeSampler {
    weights: Vec<f64>,
    size: usize,
    /// `suffix[v][j] = log e_j(exp(m_v), …, exp(m_{n-1}))`.
    suffix: Vec<Vec<f64>>,
}

impl FixedSizeSampler {
    pub fn new(weights: &[f64], size: usize) -> Result<Self, MixtureError> {
        let n = weights.len();
        if size > n {
            return Err(MixtureError::SizeTooLarge { size, n });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(MixtureError::NonFiniteWeights);
        }
        let mut suffix = vec![vec![f64::NEG_INFINITY; size + 1]; n + 1];
        suffix[n][0] = 0.0;
        for v in (0..n).rev() {
            suffix[v][0] = 0.0;
            for j in 1..=size {
                suffix[v][j] = logaddexp(suffix[v + 1][j], weights[v] + suffix[v + 1][j - 1]);
            }
        }
        Ok(FixedSizeSampler {
            weights: weights.to_vec(),
            size,
            suffix,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// `log e_ℓ` over the full ground set.
    pub fn log_partition(&self) -> f64 {
        self.suffix[0][self.size]
    }

    /// `log P(S) = m(S) - log e_ℓ` for `|S| = ℓ`; `-inf` otherwise.
    pub fn log_pdf(&self, s: Subset) -> f64 {
        if s.len() != self.size {
            return f64::NEG_INFINITY;
        }
        let mut acc = -self.log_partition();
        for v in s.members() {
            acc += self.weights[v];
        }
        acc
    }

    /// One exact draw; O(n) given the precomputed tables.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Subset {
        let mut s = Subset::EMPTY;
        let mut remaining = self.size;
        for v in 0..self.weights.len() {
            if remaining == 0 {
                break;
            }
            // P(v ∈ S | suffix needs `remaining`) =
            //   x_v e_{t-1}(suffix after v) / e_t(suffix from v)
            let log_p =
                self.weights[v] + self.suffix[v + 1][remaining - 1] - self.suffix[v][remaining];
            let p = log_p.exp().clamp(0.0, 1.0);
            if rng.random::<f64>() < p {
                s.insert(v);
                remaining -= 1;
            }
        }
        debug_assert_eq!(remaining, 0);
        s
    }
}

/// One draw of a size-`ℓ` subset from the log-modular distribution with
/// exponent `m`; builds the DP tables for a single use.
pub fn sample_fixed_size<R: Rng + ?Sized>(
    m: &ModularFunction,
    size: usize,
    rng: &mut R,
) -> Result<Subset, MixtureError> {
    let (norm, _) = m.normalize();
    Ok(FixedSizeSampler::new(&norm.weights, size)?.sample(rng))
}

/// A mixture proposal conditioned on `|S| = ℓ`.
///
/// Components are selected with probability `w_i e_ℓ^{(i)} / Σ_j w_j
/// e_ℓ^{(j)}`, after which the chosen component is sampled at fixed size;
/// the resulting density is `q_ℓ(S) = Σ_i w_i exp(m_i(S)) / Σ_j w_j
/// e_ℓ^{(j)}` — the unrestricted numerator with a conditioned normalizer.
#[derive(Debug, Clone)]
pub struct FixedSizeMixture {
    samplers: Vec<FixedSizeSampler>,
    log_ws: Vec<f64>,
    log_z_ql: f64,
    selection_cdf: Vec<f64>,
    size: usize,
}

impl FixedSizeMixture {
    pub fn new(q: &MixtureProposal, size: usize) -> Result<Self, MixtureError> {
        let n = q.n();
        if size > n {
            return Err(MixtureError::SizeTooLarge { size, n });
        }
        let mut samplers = Vec::with_capacity(q.r());
        let mut log_ws = Vec::with_capacity(q.r());
        let mut mass = Vec::with_capacity(q.r());
        for c in q.components() {
            let s = FixedSizeSampler::new(c.weights(), size)?;
            mass.push(c.log_w + s.log_partition());
            log_ws.push(c.log_w);
            samplers.push(s);
        }
        let log_z_ql = logsumexp(&mass);
        let mut selection_cdf = Vec::with_capacity(mass.len());
        let mut acc = 0.0;
        for &m in &mass {
            acc += (m - log_z_ql).exp();
            selection_cdf.push(acc);
        }
        Ok(FixedSizeMixture {
            samplers,
            log_ws,
            log_z_ql,
            selection_cdf,
            size,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn log_pdf(&self, s: Subset) -> f64 {
        if s.len() != self.size {
            return f64::NEG_INFINITY;
        }
        let scores: Vec<f64> = self
            .samplers
            .iter()
            .zip(&self.log_ws)
            .map(|(sampler, &log_w)| {
                let mut m = log_w;
                for v in s.members() {
                    m += sampler.weights[v];
                }
                m
            })
            .collect();
        logsumexp(&scores) - self.log_z_ql
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Subset {
        let u: f64 = rng.random();
        let idx = self
            .selection_cdf
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.samplers.len() - 1);
        self.samplers[idx].sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subset::GroundSet;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn modular(weights: &[f64]) -> ModularFunction {
        ModularFunction::normalized(weights.to_vec()).unwrap()
    }

    #[test]
    fn log_partition_uniform_case() {
        let m = modular(&[0.0; 10]);
        assert_abs_diff_eq!(
            log_partition(&m),
            10.0 * std::f64::consts::LN_2,
            epsilon = 1e-12
        );
    }

    #[test]
    fn log_partition_hand_value() {
        // (1+3)^2 = 16
        let m = modular(&[3f64.ln(), 3f64.ln()]);
        assert_abs_diff_eq!(log_partition(&m), 16f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn log_partition_no_overflow() {
        let m = modular(&[1000.0]);
        assert_abs_diff_eq!(log_partition(&m), 1000.0, epsilon = 1e-9);
        let with_offset = ModularFunction::new(2.0, vec![1000.0]).unwrap();
        assert_abs_diff_eq!(log_partition(&with_offset), 1002.0, epsilon = 1e-9);
    }

    #[test]
    fn logmodular_degenerate_weights_sample_empty() {
        let d = LogModular::from_weights(vec![-1e6; 8]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert!(d.sample(&mut rng).is_empty());
        }
    }

    #[test]
    fn logmodular_sampling_matches_density_tv() {
        let n = 8;
        let d = LogModular::from_weights(vec![0.0; n]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = 1_000_000usize;
        let mut counts = vec![0u64; 1 << n];
        for _ in 0..draws {
            counts[d.sample(&mut rng).bits() as usize] += 1;
        }
        let uniform = 1.0 / (1 << n) as f64;
        let tv: f64 = counts
            .iter()
            .map(|&c| (c as f64 / draws as f64 - uniform).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "tv = {tv}");
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let d = LogModular::from_weights(vec![0.3, -0.7, 1.1]).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..32).map(|_| d.sample(&mut rng).bits()).collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
        assert_ne!(draw(5), draw(6));
    }

    #[test]
    fn single_uniform_component_log_pdf() {
        let n = 6;
        let q = MixtureProposal::new(vec![(0.0, vec![0.0; n])]).unwrap();
        for bits in [0u64, 5, 63] {
            assert_abs_diff_eq!(
                q.log_pdf(Subset::from_bits(bits)),
                -(n as f64) * std::f64::consts::LN_2,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn mixture_normalizes_by_enumeration() {
        let n = 8;
        let q = MixtureProposal::new(vec![
            (0.2, vec![0.5, -1.0, 0.0, 2.0, -0.3, 0.8, 0.0, -2.0]),
            (-0.5, vec![-0.5; 8]),
            (1.0, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]),
        ])
        .unwrap();
        let gs = GroundSet::new(n).unwrap();
        let total: f64 = gs.subsets().map(|s| q.log_pdf(s).exp()).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn log_z_q_identity() {
        let q = MixtureProposal::new(vec![
            (0.3, vec![1.0, -2.0, 0.5]),
            (-0.8, vec![0.0, 0.0, 0.0]),
        ])
        .unwrap();
        let expect = logsumexp(&[
            0.3 + log_partition(&modular(&[1.0, -2.0, 0.5])),
            -0.8 + log_partition(&modular(&[0.0, 0.0, 0.0])),
        ]);
        let rel = ((q.log_z_q() - expect) / expect).abs();
        assert!(rel < 1e-12);
    }

    #[test]
    fn equal_mass_selection_is_uniform() {
        let mods = vec![modular(&[2.0, -1.0]), modular(&[-3.0, 4.0]), modular(&[0.0, 0.0])];
        let q = MixtureProposal::equal_mass(&mods).unwrap();
        for p in q.selection_probabilities() {
            assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(q.log_z_q(), 3f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn single_component_mixture_reduces_to_logmodular() {
        let w = vec![0.4, -0.9, 1.3, 0.0];
        let q = MixtureProposal::new(vec![(0.7, w.clone())]).unwrap();
        let d = LogModular::from_weights(w).unwrap();
        let mut rq = ChaCha8Rng::seed_from_u64(9);
        let mut rd = ChaCha8Rng::seed_from_u64(9);
        // The mixture consumes one component-selection draw first; align
        // the plain sampler's stream by discarding one value.
        let sq = q.sample(&mut rq);
        let _ = rd.random::<f64>();
        let sd = d.sample(&mut rd);
        assert_eq!(sq, sd);
        for bits in 0..16u64 {
            let s = Subset::from_bits(bits);
            assert_abs_diff_eq!(q.log_pdf(s), d.log_pdf(s), epsilon = 1e-12);
        }
    }

    #[test]
    fn mixture_sampler_matches_density_tv() {
        let n = 8;
        let q = MixtureProposal::new(vec![
            (0.0, vec![1.2, -0.5, 0.0, 0.3, -1.0, 0.7, 0.2, -0.2]),
            (0.5, vec![-1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0]),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 1_000_000usize;
        let mut counts = vec![0u64; 1 << n];
        for _ in 0..draws {
            counts[q.sample(&mut rng).bits() as usize] += 1;
        }
        let tv: f64 = (0..1u64 << n)
            .map(|b| {
                let p = q.log_pdf(Subset::from_bits(b)).exp();
                (counts[b as usize] as f64 / draws as f64 - p).abs()
            })
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.01, "tv = {tv}");
    }

    #[test]
    fn mixture_json_roundtrip() {
        let q = MixtureProposal::new(vec![(0.25, vec![1.0, 2.0]), (-1.5, vec![0.0, -3.0])]).unwrap();
        let js = serde_json::to_string(&q).unwrap();
        assert!(js.starts_with("{\"components\":[{\"log_w\":"));
        let back: MixtureProposal = serde_json::from_str(&js).unwrap();
        assert_eq!(back.r(), 2);
        for bits in 0..4u64 {
            let s = Subset::from_bits(bits);
            assert_abs_diff_eq!(back.log_pdf(s), q.log_pdf(s), epsilon = 1e-14);
        }
    }

    #[test]
    fn fixed_size_log_partition_values() {
        assert_abs_diff_eq!(
            fixed_size_log_partition(&[0.5, -1.0, 2.0], 0).unwrap(),
            0.0,
            epsilon = 0.0
        );
        assert_abs_diff_eq!(
            fixed_size_log_partition(&[0.0, 0.0], 1).unwrap(),
            2f64.ln(),
            epsilon = 1e-12
        );
        // x = (1,2,3,4): e_2 = 35
        let m: Vec<f64> = [1.0f64, 2.0, 3.0, 4.0].iter().map(|x| x.ln()).collect();
        assert_abs_diff_eq!(
            fixed_size_log_partition(&m, 2).unwrap(),
            35f64.ln(),
            epsilon = 1e-12
        );
        assert!(fixed_size_log_partition(&m, 5).is_err());
    }

    #[test]
    fn fixed_size_full_cardinality_is_deterministic() {
        let s = FixedSizeSampler::new(&[0.1, -5.0, 3.0], 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(s.sample(&mut rng), Subset::full(3));
    }

    #[test]
    fn fixed_size_pair_probability_12_over_35() {
        let m: Vec<f64> = [1.0f64, 2.0, 3.0, 4.0].iter().map(|x| x.ln()).collect();
        let s = FixedSizeSampler::new(&m, 2).unwrap();
        // P({2,3}) = x_2 x_3 / e_2 = 12/35 by enumerating all six pairs.
        assert_abs_diff_eq!(
            s.log_pdf(Subset::from_members([2, 3])).exp(),
            12.0 / 35.0,
            epsilon = 1e-12
        );
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let draws = 1_000_000usize;
        let mut hits = 0u64;
        for _ in 0..draws {
            if s.sample(&mut rng) == Subset::from_members([2, 3]) {
                hits += 1;
            }
        }
        let freq = hits as f64 / draws as f64;
        assert!((freq - 12.0 / 35.0).abs() < 0.005, "freq = {freq}");
    }

    #[test]
    fn fixed_size_uniform_chi_square() {
        // Constant weights: uniform over all C(8,3) = 56 subsets.
        let n = 8;
        let s = FixedSizeSampler::new(&[0.4; 8], 3).unwrap();
        let gs = GroundSet::new(n).unwrap();
        let cells = gs.subsets_of_size(3);
        let mut counts = std::collections::HashMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let draws = 560_000usize;
        for _ in 0..draws {
            *counts.entry(s.sample(&mut rng).bits()).or_insert(0u64) += 1;
        }
        let expected = draws as f64 / cells.len() as f64;
        let chi2: f64 = cells
            .iter()
            .map(|c| {
                let o = *counts.get(&c.bits()).unwrap_or(&0) as f64;
                (o - expected).powi(2) / expected
            })
            .sum();
        // 99.9% quantile of chi-square with 55 degrees of freedom.
        assert!(chi2 < 93.17, "chi2 = {chi2}");
    }

    #[test]
    fn fixed_size_sampler_matches_conditional_density() {
        let n = 7;
        let weights = [0.8, -0.6, 0.1, 1.4, -1.2, 0.0, 0.5];
        let s = FixedSizeSampler::new(&weights, 3).unwrap();
        let gs = GroundSet::new(n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let draws = 1_000_000usize;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..draws {
            *counts.entry(s.sample(&mut rng).bits()).or_insert(0u64) += 1;
        }
        let tv: f64 = gs
            .subsets_of_size(3)
            .iter()
            .map(|&sub| {
                let p = s.log_pdf(sub).exp();
                let f = *counts.get(&sub.bits()).unwrap_or(&0) as f64 / draws as f64;
                (p - f).abs()
            })
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.02, "tv = {tv}");
    }

    #[test]
    fn fixed_size_mixture_density_normalizes() {
        let q = MixtureProposal::new(vec![
            (0.1, vec![0.5, -0.5, 1.0, 0.0, -1.0, 0.2]),
            (-0.4, vec![-0.2, 0.8, 0.0, 1.5, 0.3, -0.7]),
        ])
        .unwrap();
        let fq = FixedSizeMixture::new(&q, 3).unwrap();
        let gs = GroundSet::new(6).unwrap();
        let total: f64 = gs
            .subsets_of_size(3)
            .iter()
            .map(|&s| fq.log_pdf(s).exp())
            .sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        assert_eq!(fq.log_pdf(Subset::from_members([0])), f64::NEG_INFINITY);
    }

    proptest! {
        // Σ_ℓ e_ℓ(x) = Π_v (1 + x_v), in log space.
        #[test]
        fn elementary_symmetric_sum_identity(
            weights in proptest::collection::vec(-3.0f64..3.0, 1..9)
        ) {
            let n = weights.len();
            let per_level: Vec<f64> = (0..=n)
                .map(|l| fixed_size_log_partition(&weights, l).unwrap())
                .collect();
            let lhs = logsumexp(&per_level);
            let rhs: f64 = weights.iter().map(|&w| log1pexp(w)).sum();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }

        #[test]
        fn fixed_size_draws_have_requested_cardinality(
            weights in proptest::collection::vec(-2.0f64..2.0, 4..10),
            seed in 0u64..1000
        ) {
            let n = weights.len();
            let size = n / 2;
            let s = FixedSizeSampler::new(&weights, size).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            prop_assert_eq!(s.sample(&mut rng).len(), size);
        }
    }
}
