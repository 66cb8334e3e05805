//! Modular set functions `m(S) = c + Σ_{v∈S} m_v`.

use serde::{Deserialize, Serialize};

use crate::model::ModelError;
use crate::subset::Subset;

/// A modular set function with per-element weights and a constant offset.
///
/// A "normalized" modular function has `offset = 0`, i.e. `m(∅) = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModularFunction {
    pub offset: f64,
    pub weights: Vec<f64>,
}

impl ModularFunction {
    pub fn new(offset: f64, weights: Vec<f64>) -> Result<Self, ModelError> {
        if !offset.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(ModelError::NonFiniteParameter);
        }
        Ok(ModularFunction { offset, weights })
    }

    /// Normalized modular function (`offset = 0`).
    pub fn normalized(weights: Vec<f64>) -> Result<Self, ModelError> {
        ModularFunction::new(0.0, weights)
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.offset == 0.0
    }

    /// Splits into a normalized part and the dropped offset.
    pub fn normalize(&self) -> (ModularFunction, f64) {
        (
            ModularFunction {
                offset: 0.0,
                weights: self.weights.clone(),
            },
            self.offset,
        )
    }

    pub fn eval(&self, s: Subset) -> f64 {
        debug_assert!(s.fits(self.n()));
        let mut acc = self.offset;
        for v in s.members() {
            acc += self.weights[v];
        }
        acc
    }
}
