//! Semigradient machinery and automatic mixture construction.
//!
//! The construction loop alternates two steps, `r` times: pick a
//! permutation of the ground set (greedily against the mixture built so
//! far, or uniformly at random), then fit a modular function to `F` along
//! that permutation. Components get weights `w_i = 1/Z_i`, so every
//! component is proposed with equal probability.
//!
//! Two modular fits are provided. [`subgradient`] takes marginal gains
//! along permutation prefixes; for submodular `F` it lower-bounds `F`
//! tightly at every prefix, and for supermodular `F` the same construction
//! upper-bounds `F` there. [`supergradient`] is the endpoint-gain fit
//! (`ḡ_Y`-style): it uses the gain at the full set for the first `k`
//! elements and the singleton value for the rest, and is tight at the
//! anchor `Y = {σ_1, …, σ_k}`; it upper-bounds submodular `F` and
//! lower-bounds supermodular `F` there. [`semigradient_check`] verifies
//! either bound direction exhaustively at desk scale.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::exact::{enumerate_distribution, ExactError};
use crate::logmodular::{MixtureError, MixtureProposal};
use crate::model::{Model, SetFunction};
use crate::modular::ModularFunction;
use crate::numeric::logsumexp;
use crate::subset::{GroundSet, Subset};

/// A bijection on `{0, …, n-1}`; `order[i]` is the element at position `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    order: Vec<usize>,
}

impl Permutation {
    pub fn new(order: Vec<usize>) -> Option<Self> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &v in &order {
            if v >= n || seen[v] {
                return None;
            }
            seen[v] = true;
        }
        Some(Permutation { order })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            order: (0..n).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        Permutation { order }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PermutationMode {
    Greedy,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SemigradientKind {
    Sub,
    Super,
}

/// Domain the supergradient anchor size `k` is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KRange {
    /// `k ∈ {0, 1, …, n}`; `k = 0` realizes the empty-anchor component.
    ZeroToN,
    /// `k ∈ {1, …, n}`.
    OneToN,
}

impl Default for KRange {
    fn default() -> Self {
        KRange::ZeroToN
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstructionConfig {
    pub r: usize,
    pub permutation_mode: PermutationMode,
    pub semigradient_kind: SemigradientKind,
    pub seed: u64,
    #[serde(default)]
    pub k_range: KRange,
}

/// Builds a permutation by repeatedly taking the element maximizing the
/// marginal difference `D(A ∪ {v}) - D(A)` where
/// `D(S) = F(S) - log Σ_j exp(m_j(S))` measures where the model and the
/// current mixture disagree most. With an empty mixture `D = F`.
///
/// Ties break toward the lowest element index. Costs `n(n+1)/2` oracle
/// calls (one fresh evaluation per candidate per round).
pub fn greedy_permutation<F: SetFunction>(
    model: &F,
    mixture_so_far: &[ModularFunction],
) -> Permutation {
    let n = model.ground_size();
    let mut order = Vec::with_capacity(n);
    let mut picked = Subset::EMPTY;
    // Running m_j(A) per existing component.
    let mut comp_scores: Vec<f64> = mixture_so_far.iter().map(|m| m.offset).collect();
    let mut scratch = vec![0.0; mixture_so_far.len()];
    for _ in 0..n {
        let mut best_v = usize::MAX;
        let mut best_score = f64::NEG_INFINITY;
        for v in 0..n {
            if picked.contains(v) {
                continue;
            }
            // D(A) is constant within a round, so maximizing D(A ∪ {v})
            // is enough.
            let f_val = model.log_potential(picked.with(v));
            let mix_val = if mixture_so_far.is_empty() {
                0.0
            } else {
                for (j, m) in mixture_so_far.iter().enumerate() {
                    scratch[j] = comp_scores[j] + m.weights[v];
                }
                logsumexp(&scratch)
            };
            let score = f_val - mix_val;
            if score > best_score {
                best_score = score;
                best_v = v;
            }
        }
        picked.insert(best_v);
        order.push(best_v);
        for (j, m) in mixture_so_far.iter().enumerate() {
            comp_scores[j] += m.weights[best_v];
        }
    }
    Permutation { order }
}

/// Prefix marginal-gain fit plus the anchor prefixes where it is tight.
#[derive(Debug, Clone)]
pub struct Subgradient {
    pub modular: ModularFunction,
    /// `{σ_1, …, σ_k}` for `k = 0..=n`; the fit satisfies
    /// `m(S_k) = F(S_k) - F(∅)` at each.
    pub prefixes: Vec<Subset>,
}

/// Marginal gains along the permutation: `m_{σ_v} = F(A ∪ {σ_v}) - F(A)`
/// with `A` the preceding prefix. Exactly `n + 1` oracle calls.
pub fn subgradient<F: SetFunction>(model: &F, sigma: &Permutation) -> Subgradient {
    let n = model.ground_size();
    assert_eq!(sigma.len(), n, "permutation length must match ground set");
    let mut weights = vec![0.0; n];
    let mut prefixes = Vec::with_capacity(n + 1);
    let mut prefix = Subset::EMPTY;
    prefixes.push(prefix);
    let mut f_prev = model.log_potential(prefix);
    for &v in sigma.order() {
        let next = prefix.with(v);
        let f_next = model.log_potential(next);
        weights[v] = f_next - f_prev;
        prefix = next;
        f_prev = f_next;
        prefixes.push(prefix);
    }
    Subgradient {
        modular: ModularFunction {
            offset: 0.0,
            weights,
        },
        prefixes,
    }
}

/// Endpoint-gain fit, tight at the anchor `Y = {σ_1, …, σ_k}`.
#[derive(Debug, Clone)]
pub struct Supergradient {
    pub modular: ModularFunction,
    pub anchor: Subset,
    pub k: usize,
}

/// Endpoint-gain fit at a fixed anchor size: the first `k` elements of
/// the permutation get `F(V) - F(V∖{v})`, the rest get `F({v})`.
pub fn supergradient_at<F: SetFunction>(model: &F, sigma: &Permutation, k: usize) -> Supergradient {
    let n = model.ground_size();
    assert_eq!(sigma.len(), n, "permutation length must match ground set");
    assert!(k <= n, "anchor size out of range");
    let full = Subset::full(n);
    let f_full = model.log_potential(full);
    let mut weights = vec![0.0; n];
    let mut anchor = Subset::EMPTY;
    for (pos, &v) in sigma.order().iter().enumerate() {
        if pos < k {
            weights[v] = f_full - model.log_potential(full.without(v));
            anchor.insert(v);
        } else {
            weights[v] = model.log_potential(Subset::EMPTY.with(v));
        }
    }
    Supergradient {
        modular: ModularFunction {
            offset: 0.0,
            weights,
        },
        anchor,
        k,
    }
}

/// [`supergradient_at`] with `k` drawn uniformly from the configured range.
pub fn supergradient<F: SetFunction, R: Rng + ?Sized>(
    model: &F,
    sigma: &Permutation,
    k_range: KRange,
    rng: &mut R,
) -> Supergradient {
    let n = model.ground_size();
    let k = match k_range {
        KRange::ZeroToN => rng.random_range(0..=n),
        KRange::OneToN => rng.random_range(1..=n),
    };
    supergradient_at(model, sigma, k)
}

/// Construction provenance for one mixture component.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstructionEntry {
    pub component: usize,
    pub permutation: Vec<usize>,
    pub kind: SemigradientKind,
    /// Anchor size for endpoint-gain components.
    pub k: Option<usize>,
    /// Anchor set bitmask (`k`-prefix for endpoint-gain fits, empty set
    /// for prefix-gain fits whose anchors are every prefix).
    pub anchor_mask: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstructionLog {
    pub entries: Vec<ConstructionEntry>,
}

/// Iterative semigradient-based mixture construction.
///
/// Deterministic for a fixed `(model, config)`: the permutation stream and
/// anchor draws come from a ChaCha stream seeded by `config.seed`.
pub fn build_mixture<F: SetFunction>(
    model: &F,
    config: &ConstructionConfig,
) -> Result<(MixtureProposal, ConstructionLog), MixtureError> {
    if config.r == 0 {
        return Err(MixtureError::Empty);
    }
    let n = model.ground_size();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut components: Vec<ModularFunction> = Vec::with_capacity(config.r);
    let mut entries = Vec::with_capacity(config.r);
    for i in 0..config.r {
        let sigma = match config.permutation_mode {
            PermutationMode::Greedy => greedy_permutation(model, &components),
            PermutationMode::Random => Permutation::random(n, &mut rng),
        };
        let (modular, kind, k, anchor_mask) = match config.semigradient_kind {
            SemigradientKind::Sub => {
                let sg = subgradient(model, &sigma);
                (sg.modular, SemigradientKind::Sub, None, 0u64)
            }
            SemigradientKind::Super => {
                let sg = supergradient(model, &sigma, config.k_range, &mut rng);
                (
                    sg.modular,
                    SemigradientKind::Super,
                    Some(sg.k),
                    sg.anchor.bits(),
                )
            }
        };
        entries.push(ConstructionEntry {
            component: i,
            permutation: sigma.order().to_vec(),
            kind,
            k,
            anchor_mask,
        });
        components.push(modular);
    }
    let mixture = MixtureProposal::equal_mass(&components)?;
    Ok((mixture, ConstructionLog { entries }))
}

/// The handcrafted two-component mixture for the complete-graph Ising
/// model at `beta = ln n`: one component concentrated near the empty set,
/// one near the full set, with equal selection mass (`w_i = 1/Z_i`).
///
/// These are exactly the endpoint-gain fits anchored at `∅` and at `V`.
pub fn ising_two_component_mixture(n: usize) -> Result<MixtureProposal, MixtureError> {
    let delta = 2.0 * (n as f64).ln() / n as f64;
    let a = delta * (n - 1) as f64;
    let low = ModularFunction {
        offset: 0.0,
        weights: vec![-a; n],
    };
    let high = ModularFunction {
        offset: 0.0,
        weights: vec![a; n],
    };
    MixtureProposal::equal_mass(&[low, high])
}

/// One mixture component per subset: `m_{iv} = ±β` by membership in
/// `S_i`, weighted `w_i = pi(S_i) / Z_i`. The resulting proposal converges
/// to `pi` in total variation as `β` grows; exponentially many components
/// make it an analysis tool only.
pub fn exhaustive_mixture(
    model: &Model,
    beta: f64,
    limit: usize,
) -> Result<MixtureProposal, ExactError> {
    let n = model.ground_size();
    let table = enumerate_distribution(model, limit)?;
    let gs = GroundSet::new(n).expect("validated");
    let mut parts = Vec::with_capacity(1 << n);
    for s in gs.subsets() {
        let weights: Vec<f64> = (0..n)
            .map(|v| if s.contains(v) { beta } else { -beta })
            .collect();
        let log_z: f64 = weights.iter().map(|&w| crate::numeric::log1pexp(w)).sum();
        let log_w = table.log_probs[s.bits() as usize] - log_z;
        parts.push((log_w, weights));
    }
    Ok(MixtureProposal::new(parts)?)
}

/// Exhaustively verifies the modular-bound inequality at an anchor:
/// for `Sub`, `F(R) ≥ F(anchor) + m(R) - m(anchor)` for every `R`;
/// for `Super` the inequality is reversed. Tolerance `1e-9`.
pub fn semigradient_check<F: SetFunction>(
    model: &F,
    m: &ModularFunction,
    anchor: Subset,
    kind: SemigradientKind,
    limit: usize,
) -> Result<bool, ExactError> {
    let n = model.ground_size();
    if n > limit {
        return Err(ExactError::GroundSetTooLarge { n, limit });
    }
    let gs = GroundSet::new(n).expect("validated");
    let f_anchor = model.log_potential(anchor);
    let m_anchor = m.eval(anchor);
    for r in gs.subsets() {
        let lhs = model.log_potential(r);
        let rhs = f_anchor + m.eval(r) - m_anchor;
        let ok = match kind {
            SemigradientKind::Sub => lhs >= rhs - 1e-9,
            SemigradientKind::Super => lhs <= rhs + 1e-9,
        };
        if !ok {
            return Ok(false);
        }
    }
    Ok(true)
}
