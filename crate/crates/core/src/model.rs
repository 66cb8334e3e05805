//! Set-function models used as log-potentials `F` in `pi(S) ∝ exp(F(S))`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modular::ModularFunction;
use crate::subset::{Subset, MAX_GROUND_SIZE};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter is not finite")]
    NonFiniteParameter,
    #[error("ground set size {n} is invalid (must be 1..={MAX_GROUND_SIZE})")]
    BadGroundSize { n: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("kernel matrix is not symmetric: |K[{i},{j}] - K[{j},{i}]| = {delta:e} exceeds 1e-9")]
    KernelNotSymmetric { i: usize, j: usize, delta: f64 },
    #[error("kernel is not positive definite after adding sigma^2 I (sigma = {sigma})")]
    KernelNotPositiveDefinite { sigma: f64 },
    #[error("noise parameter sigma must be > 0, got {0}")]
    BadSigma(f64),
    #[error("explicit table length {len} is not a power of two or exceeds 2^{MAX_GROUND_SIZE}")]
    BadTableLength { len: usize },
}

/// A set function `F : 2^V -> R` over a ground set of known size.
///
/// Implementations must be pure: equal inputs give bitwise-equal outputs.
pub trait SetFunction: Sync {
    fn ground_size(&self) -> usize;
    fn log_potential(&self, s: Subset) -> f64;
}

/// The model families shipped with the crate.
///
/// Serialized as JSON with a `kind` discriminator; matrices are nested
/// row-major arrays. See the repository README for the exact schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Model {
    /// Ising model on the complete graph (Curie–Weiss):
    /// `F(S) = -(2 beta / n) |S| (n - |S|)`.
    IsingComplete { n: usize, beta: f64 },
    /// Facility location coverage: `F(S) = Σ_j max_{i∈S} c_ij`, with the
    /// max over the empty set defined as 0. Rows are ground-set elements.
    FacilityLocation {
        #[serde(with = "matrix_serde")]
        coverage: Array2<f64>,
    },
    /// Regularized log-det DPP potential:
    /// `F(S) = log det(K_{S,S} + sigma^2 I)`, `F(∅) = 0`.
    LogDetDpp {
        #[serde(with = "matrix_serde")]
        kernel: Array2<f64>,
        sigma: f64,
    },
    /// Facility location plus per-element quality weights:
    /// `F(S) = Σ_{v∈S} w_v + Σ_j max_{i∈S} c_ij`.
    FlDiversity {
        weights: Vec<f64>,
        #[serde(with = "matrix_serde")]
        coverage: Array2<f64>,
    },
    /// Modular `F`; the induced distribution is log-modular.
    Modular(ModularFunction),
    /// `F` tabulated over all `2^n` subsets, indexed by bitmask.
    ExplicitTable { log_values: Vec<f64> },
}

impl Model {
    pub fn ising(n: usize, beta: f64) -> Result<Self, ModelError> {
        let m = Model::IsingComplete { n, beta };
        m.validate()?;
        Ok(m)
    }

    /// Ising model at the critical-slowdown temperature `beta = ln n`.
    pub fn ising_log_n(n: usize) -> Result<Self, ModelError> {
        Model::ising(n, (n as f64).ln())
    }

    pub fn facility_location(coverage: Array2<f64>) -> Result<Self, ModelError> {
        let m = Model::FacilityLocation { coverage };
        m.validate()?;
        Ok(m)
    }

    pub fn log_det_dpp(kernel: Array2<f64>, sigma: f64) -> Result<Self, ModelError> {
        let m = Model::LogDetDpp { kernel, sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn fl_diversity(weights: Vec<f64>, coverage: Array2<f64>) -> Result<Self, ModelError> {
        let m = Model::FlDiversity { weights, coverage };
        m.validate()?;
        Ok(m)
    }

    pub fn modular(f: ModularFunction) -> Self {
        Model::Modular(f)
    }

    pub fn explicit_table(log_values: Vec<f64>) -> Result<Self, ModelError> {
        let m = Model::ExplicitTable { log_values };
        m.validate()?;
        Ok(m)
    }

    /// Checks every structural invariant of the variant. Deserialized
    /// models must be validated before use.
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            Model::IsingComplete { n, beta } => {
                check_ground_size(*n)?;
                if !beta.is_finite() {
                    return Err(ModelError::NonFiniteParameter);
                }
            }
            Model::FacilityLocation { coverage } => {
                check_ground_size(coverage.nrows())?;
                check_finite_matrix(coverage)?;
            }
            Model::LogDetDpp { kernel, sigma } => {
                let n = kernel.nrows();
                check_ground_size(n)?;
                if kernel.ncols() != n {
                    return Err(ModelError::DimensionMismatch(format!(
                        "kernel must be square, got {}x{}",
                        n,
                        kernel.ncols()
                    )));
                }
                check_finite_matrix(kernel)?;
                if !sigma.is_finite() || *sigma <= 0.0 {
                    return Err(ModelError::BadSigma(*sigma));
                }
                for i in 0..n {
                    for j in (i + 1)..n {
                        let delta = (kernel[[i, j]] - kernel[[j, i]]).abs();
                        if delta > 1e-9 {
                            return Err(ModelError::KernelNotSymmetric { i, j, delta });
                        }
                    }
                }
                // Positive definiteness of K + sigma^2 I guarantees (by
                // eigenvalue interlacing) that every principal submatrix
                // factorizes, so evaluation cannot fail later.
                let mut full = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        full[i * n + j] = kernel[[i, j]];
                    }
                    full[i * n + i] += sigma * sigma;
                }
                if cholesky_log_det(&mut full, n).is_none() {
                    return Err(ModelError::KernelNotPositiveDefinite { sigma: *sigma });
                }
            }
            Model::FlDiversity { weights, coverage } => {
                check_ground_size(coverage.nrows())?;
                check_finite_matrix(coverage)?;
                if weights.len() != coverage.nrows() {
                    return Err(ModelError::DimensionMismatch(format!(
                        "weights length {} != coverage rows {}",
                        weights.len(),
                        coverage.nrows()
                    )));
                }
                if weights.iter().any(|w| !w.is_finite()) {
                    return Err(ModelError::NonFiniteParameter);
                }
            }
            Model::Modular(f) => {
                check_ground_size(f.n())?;
                if !f.offset.is_finite() || f.weights.iter().any(|w| !w.is_finite()) {
                    return Err(ModelError::NonFiniteParameter);
                }
            }
            Model::ExplicitTable { log_values } => {
                let len = log_values.len();
                if len < 2 || !len.is_power_of_two() || len.ilog2() as usize > MAX_GROUND_SIZE {
                    return Err(ModelError::BadTableLength { len });
                }
                if log_values.iter().any(|v| !v.is_finite()) {
                    return Err(ModelError::NonFiniteParameter);
                }
            }
        }
        Ok(())
    }

    /// `F(S)`, with factorization failures surfaced as errors.
    ///
    /// For models validated at construction this cannot fail; it exists so
    /// that a numerically degenerate kernel surfaces an explicit error
    /// rather than a silent NaN.
    pub fn try_log_potential(&self, s: Subset) -> Result<f64, ModelError> {
        match self {
            Model::LogDetDpp { kernel, sigma } => {
                if s.is_empty() {
                    return Ok(0.0);
                }
                let members: Vec<usize> = s.members().collect();
                let k = members.len();
                let mut sub = vec![0.0; k * k];
                for (a, &i) in members.iter().enumerate() {
                    for (b, &j) in members.iter().enumerate() {
                        sub[a * k + b] = kernel[[i, j]];
                    }
                    sub[a * k + a] += sigma * sigma;
                }
                cholesky_log_det(&mut sub, k)
                    .ok_or(ModelError::KernelNotPositiveDefinite { sigma: *sigma })
            }
            _ => Ok(self.log_potential_infallible(s)),
        }
    }

    fn log_potential_infallible(&self, s: Subset) -> f64 {
        match self {
            Model::IsingComplete { n, beta } => {
                let k = s.len() as f64;
                let nf = *n as f64;
                // Grouped so F(S) and F(V∖S) are bitwise equal.
                -(2.0 * beta / nf) * (k * (nf - k))
            }
            Model::FacilityLocation { coverage } => coverage_sum(coverage, s),
            Model::LogDetDpp { .. } => unreachable!("handled by try_log_potential"),
            Model::FlDiversity { weights, coverage } => {
                let mut acc = 0.0;
                for v in s.members() {
                    acc += weights[v];
                }
                acc + coverage_sum(coverage, s)
            }
            Model::Modular(f) => f.eval(s),
            Model::ExplicitTable { log_values } => log_values[s.bits() as usize],
        }
    }
}

impl SetFunction for Model {
    fn ground_size(&self) -> usize {
        match self {
            Model::IsingComplete { n, .. } => *n,
            Model::FacilityLocation { coverage } => coverage.nrows(),
            Model::LogDetDpp { kernel, .. } => kernel.nrows(),
            Model::FlDiversity { coverage, .. } => coverage.nrows(),
            Model::Modular(f) => f.n(),
            Model::ExplicitTable { log_values } => log_values.len().ilog2() as usize,
        }
    }

    fn log_potential(&self, s: Subset) -> f64 {
        debug_assert!(s.fits(self.ground_size()));
        match self {
            Model::LogDetDpp { .. } => self
                .try_log_potential(s)
                .expect("kernel validated positive definite at construction"),
            _ => self.log_potential_infallible(s),
        }
    }
}

/// `Σ_j max_{i∈S} c_ij` with the empty max defined as 0.
fn coverage_sum(coverage: &Array2<f64>, s: Subset) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    let l = coverage.ncols();
    let mut best = vec![f64::NEG_INFINITY; l];
    for i in s.members() {
        let row = coverage.row(i);
        for j in 0..l {
            if row[j] > best[j] {
                best[j] = row[j];
            }
        }
    }
    best.iter().sum()
}

/// In-place Cholesky of a row-major `k x k` matrix; returns
/// `log det = 2 Σ log L_ii`, or `None` if a pivot is non-positive.
fn cholesky_log_det(a: &mut [f64], k: usize) -> Option<f64> {
    let mut log_det = 0.0;
    for i in 0..k {
        for j in 0..=i {
            let mut sum = a[i * k + j];
            for p in 0..j {
                sum -= a[i * k + p] * a[j * k + p];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                let root = sum.sqrt();
                a[i * k + i] = root;
                log_det += 2.0 * root.ln();
            } else {
                a[i * k + j] = sum / a[j * k + j];
            }
        }
    }
    Some(log_det)
}

fn check_ground_size(n: usize) -> Result<(), ModelError> {
    if n == 0 || n > MAX_GROUND_SIZE {
        Err(ModelError::BadGroundSize { n })
    } else {
        Ok(())
    }
}

fn check_finite_matrix(m: &Array2<f64>) -> Result<(), ModelError> {
    if m.iter().any(|v| !v.is_finite()) {
        Err(ModelError::NonFiniteParameter)
    } else {
        Ok(())
    }
}

/// Nested-array (de)serialization for row-major matrices.
pub mod matrix_serde {
    use ndarray::Array2;
    use serde::de::Error as DeError;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Array2<f64>, ser: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.rows().into_iter().map(|r| r.to_vec()).collect();
        rows.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Array2<f64>, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(de)?;
        if rows.is_empty() {
            return Err(D::Error::custom("matrix must have at least one row"));
        }
        let ncols = rows[0].len();
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("matrix rows have unequal lengths"));
        }
        let nrows = rows.len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Array2::from_shape_vec((nrows, ncols), flat).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::arr2;

    #[test]
    fn ising_empty_set_is_zero() {
        let m = Model::ising(6, 6f64.ln()).unwrap();
        assert_eq!(m.log_potential(Subset::EMPTY), 0.0);
        assert_eq!(m.log_potential(Subset::full(6)), 0.0);
    }

    #[test]
    fn ising_midpoint_value() {
        // -(2 ln 6 / 6) * 3 * 3 = -3 ln 6
        let m = Model::ising(6, 6f64.ln()).unwrap();
        let s = Subset::from_members([0, 2, 4]);
        assert_abs_diff_eq!(
            m.log_potential(s),
            -3.0 * 6f64.ln(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(m.log_potential(s), -5.375278407684166, epsilon = 1e-12);
    }

    #[test]
    fn ising_complement_symmetry_exhaustive() {
        let n = 12;
        let m = Model::ising(n, 0.7).unwrap();
        let gs = crate::subset::GroundSet::new(n).unwrap();
        for s in gs.subsets() {
            assert_eq!(m.log_potential(s), m.log_potential(s.complement(n)));
        }
    }

    #[test]
    fn facility_location_column_maxima() {
        let m = Model::facility_location(arr2(&[[1.0, 2.0], [3.0, 0.0]])).unwrap();
        assert_eq!(m.log_potential(Subset::from_members([0, 1])), 5.0);
        assert_eq!(m.log_potential(Subset::from_members([0])), 3.0);
        assert_eq!(m.log_potential(Subset::EMPTY), 0.0);
    }

    #[test]
    fn facility_location_monotone_when_nonnegative() {
        let m = Model::facility_location(arr2(&[
            [1.0, 0.5, 0.0],
            [0.2, 2.0, 0.1],
            [0.0, 0.0, 3.0],
            [1.5, 0.1, 0.2],
        ]))
        .unwrap();
        let gs = crate::subset::GroundSet::new(4).unwrap();
        for s in gs.subsets() {
            let base = m.log_potential(s);
            for v in 0..4 {
                if !s.contains(v) {
                    assert!(m.log_potential(s.with(v)) >= base - 1e-12);
                }
            }
        }
    }

    #[test]
    fn dpp_singleton_identity_kernel() {
        let m = Model::log_det_dpp(arr2(&[[1.0, 0.0], [0.0, 1.0]]), 1.0).unwrap();
        assert_abs_diff_eq!(
            m.log_potential(Subset::from_members([0])),
            2f64.ln(),
            epsilon = 1e-14
        );
        assert_eq!(m.log_potential(Subset::EMPTY), 0.0);
    }

    #[test]
    fn dpp_matches_dense_determinant() {
        // 3x3 PSD kernel built as G G^T; compare log det against the
        // cofactor expansion computed by hand below.
        let g = arr2(&[[1.0, 0.5], [0.3, 1.0], [-0.2, 0.4]]);
        let k = g.dot(&g.t());
        let sigma = 0.7;
        let m = Model::log_det_dpp(k.clone(), sigma).unwrap();
        let s = Subset::from_members([0, 2]);
        let a = k[[0, 0]] + sigma * sigma;
        let b = k[[0, 2]];
        let c = k[[2, 0]];
        let d = k[[2, 2]] + sigma * sigma;
        assert_abs_diff_eq!(
            m.log_potential(s),
            (a * d - b * c).ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn dpp_rejects_asymmetric_and_indefinite_kernels() {
        let asym = arr2(&[[1.0, 0.2], [0.1, 1.0]]);
        assert!(matches!(
            Model::log_det_dpp(asym, 1.0),
            Err(ModelError::KernelNotSymmetric { .. })
        ));
        // Eigenvalue -2 stays negative after adding sigma^2 = 1.
        let indef = arr2(&[[0.0, 2.0], [2.0, 0.0]]);
        assert!(matches!(
            Model::log_det_dpp(indef, 1.0),
            Err(ModelError::KernelNotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn dpp_submodular_exhaustive_small() {
        let n = 6;
        let mut g = Array2::zeros((n, 3));
        let mut x = 0.37;
        for i in 0..n {
            for j in 0..3 {
                x = (x * 997.0 + 13.0) % 1.0;
                g[[i, j]] = x - 0.5;
            }
        }
        let k = g.dot(&g.t());
        let m = Model::log_det_dpp(k, 0.8).unwrap();
        let gs = crate::subset::GroundSet::new(n).unwrap();
        let f: Vec<f64> = gs.subsets().map(|s| m.log_potential(s)).collect();
        for s in gs.subsets() {
            for r in gs.subsets() {
                if !s.is_subset_of(r) {
                    continue;
                }
                for v in 0..n {
                    if r.contains(v) {
                        continue;
                    }
                    let gain_r = f[r.with(v).bits() as usize] - f[r.bits() as usize];
                    let gain_s = f[s.with(v).bits() as usize] - f[s.bits() as usize];
                    assert!(gain_r <= gain_s + 1e-9, "submodularity violated");
                }
            }
        }
    }

    #[test]
    fn ising_supermodular_exhaustive_small() {
        let n = 7;
        let m = Model::ising_log_n(n).unwrap();
        let gs = crate::subset::GroundSet::new(n).unwrap();
        let f: Vec<f64> = gs.subsets().map(|s| m.log_potential(s)).collect();
        for s in gs.subsets() {
            for r in gs.subsets() {
                if !s.is_subset_of(r) {
                    continue;
                }
                for v in 0..n {
                    if r.contains(v) {
                        continue;
                    }
                    let gain_r = f[r.with(v).bits() as usize] - f[r.bits() as usize];
                    let gain_s = f[s.with(v).bits() as usize] - f[s.bits() as usize];
                    assert!(gain_r >= gain_s - 1e-9, "supermodularity violated");
                }
            }
        }
    }

    #[test]
    fn explicit_table_validation() {
        assert!(Model::explicit_table(vec![0.0; 8]).is_ok());
        assert!(matches!(
            Model::explicit_table(vec![0.0; 6]),
            Err(ModelError::BadTableLength { len: 6 })
        ));
    }

    #[test]
    fn json_roundtrip_keeps_kind_discriminator() {
        let m = Model::facility_location(arr2(&[[1.0, 2.0], [3.0, 0.0]])).unwrap();
        let js = serde_json::to_string(&m).unwrap();
        assert!(js.contains("\"kind\":\"facility-location\""));
        let back: Model = serde_json::from_str(&js).unwrap();
        back.validate().unwrap();
        assert_eq!(
            back.log_potential(Subset::from_members([0, 1])),
            m.log_potential(Subset::from_members([0, 1]))
        );

        let ising = Model::ising(5, 1.25).unwrap();
        let js = serde_json::to_string(&ising).unwrap();
        assert!(js.contains("\"kind\":\"ising-complete\""));
        let back: Model = serde_json::from_str(&js).unwrap();
        assert_eq!(back.log_potential(Subset::from_members([1, 3])), ising.log_potential(Subset::from_members([1, 3])));
    }

    #[test]
    fn evaluation_is_deterministic() {
        let g = arr2(&[[0.4, 1.1, -0.3], [0.9, 0.2, 0.5], [0.1, 0.1, 2.0]]);
        let k = g.dot(&g.t());
        let m = Model::log_det_dpp(k, 1.0).unwrap();
        let s = Subset::from_members([0, 2]);
        let a = m.log_potential(s);
        let b = m.log_potential(s);
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
