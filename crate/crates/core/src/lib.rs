//! Sampling toolkit for discrete probabilistic models of the form
//! `pi(S) ∝ exp(F(S))` over subsets `S` of a finite ground set.
//!
//! The crate provides:
//!
//! * set-function models (`model`): Ising on the complete graph, facility
//!   location, regularized log-det DPPs, facility-location diversity,
//!   modular functions, and explicit tables;
//! * log-modular distributions and mixtures of them (`logmodular`),
//!   including exact fixed-cardinality sampling;
//! * three samplers (`chains`): single-site Gibbs, the mixture-proposal
//!   Metropolis chain (M³), and their convex combination, plus
//!   cardinality-constrained variants and a seeded multi-chain runner;
//! * semigradient-based automatic construction of proposal mixtures
//!   (`semigrad`);
//! * a brute-force exact-inference and spectral-analysis oracle (`exact`)
//!   for desk-scale verification: transition matrices, spectral gaps,
//!   projection/restriction chains, bottleneck ratios, mixing-time bounds;
//! * convergence diagnostics (`diagnostics`): Gelman–Rubin PSRF over
//!   single-element marginal indicators.

pub mod bench;
pub mod chains;
pub mod data;
pub mod diagnostics;
pub mod exact;
pub mod logmodular;
pub mod model;
pub mod modular;
pub mod numeric;
pub mod semigrad;
pub mod subset;

pub use chains::{run_chains, ChainState, SamplerSpec, Trace};
pub use logmodular::{LogModular, MixtureProposal};
pub use model::{Model, ModelError, SetFunction};
pub use modular::ModularFunction;
pub use subset::{GroundSet, Subset};
