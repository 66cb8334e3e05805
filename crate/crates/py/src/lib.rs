//! Python bindings for the subsetmc toolkit.
//!
//! Exposes the model families, proposal mixtures, the chain runner, PSRF
//! diagnostics, and the exact desk-scale oracle. Subsets cross the
//! boundary as sorted member lists; traces as per-chain lists of bitmasks.
//!
//! Build with `cargo build --release -p subsetmc-py`, then import the
//! produced shared library as `subsetmc_py` (see python/smoke_test.py).

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use subsetmc::chains::{run_chains, SamplerSpec};
use subsetmc::data::{synthesize_model, SynthKind};
use subsetmc::diagnostics::{empirical_marginals, psrf, psrf_curve, PsrfVariant};
use subsetmc::exact::{
    build_transition_matrix, conditioned_distribution, detailed_balance_residual,
    enumerate_distribution, exact_marginals, spectral_gap, tv_distance, DEFAULT_ENUM_LIMIT,
    DEFAULT_MATRIX_LIMIT,
};
use subsetmc::semigrad::{
    build_mixture, ising_two_component_mixture, ConstructionConfig, KRange, PermutationMode,
    SemigradientKind,
};
use subsetmc::{Model as CoreModel, MixtureProposal, SetFunction, Subset};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn subset_from_members(members: Vec<usize>, n: usize) -> PyResult<Subset> {
    for &v in &members {
        if v >= n {
            return Err(PyValueError::new_err(format!(
                "element {v} out of range for ground set of size {n}"
            )));
        }
    }
    Ok(Subset::from_members(members))
}

/// A set-function model `F` with distribution `pi(S) ∝ exp(F(S))`.
#[pyclass(name = "Model")]
#[derive(Clone)]
struct PyModel {
    inner: CoreModel,
}

#[pymethods]
impl PyModel {
    /// Parse a model from its JSON document (kind-discriminated).
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner: CoreModel = serde_json::from_str(text).map_err(value_err)?;
        inner.validate().map_err(value_err)?;
        Ok(PyModel { inner })
    }

    /// Complete-graph Ising model; `beta` defaults to `ln n`.
    #[staticmethod]
    #[pyo3(signature = (n, beta=None))]
    fn ising(n: usize, beta: Option<f64>) -> PyResult<Self> {
        let beta = beta.unwrap_or((n as f64).ln());
        Ok(PyModel {
            inner: CoreModel::ising(n, beta).map_err(value_err)?,
        })
    }

    /// Synthetic benchmark stand-in: kind is "water-like", "sensor-like",
    /// or "game-like".
    #[staticmethod]
    #[pyo3(signature = (kind, n, l, seed=0))]
    fn synthesize(kind: &str, n: usize, l: usize, seed: u64) -> PyResult<Self> {
        let kind: SynthKind = kind.parse().map_err(value_err)?;
        Ok(PyModel {
            inner: synthesize_model(kind, n, l, seed).map_err(value_err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.ground_size()
    }

    /// `F(S)` for a subset given as a member list.
    fn log_potential(&self, members: Vec<usize>) -> PyResult<f64> {
        let s = subset_from_members(members, self.inner.ground_size())?;
        Ok(self.inner.log_potential(s))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(runtime_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(kind={}, n={})",
            match &self.inner {
                CoreModel::IsingComplete { .. } => "ising-complete",
                CoreModel::FacilityLocation { .. } => "facility-location",
                CoreModel::LogDetDpp { .. } => "log-det-dpp",
                CoreModel::FlDiversity { .. } => "fl-diversity",
                CoreModel::Modular(_) => "modular",
                CoreModel::ExplicitTable { .. } => "explicit-table",
            },
            self.inner.ground_size()
        )
    }
}

/// A mixture-of-log-modulars proposal distribution.
#[pyclass(name = "Mixture")]
#[derive(Clone)]
struct PyMixture {
    inner: MixtureProposal,
}

#[pymethods]
impl PyMixture {
    /// Semigradient-based construction against a model.
    #[staticmethod]
    #[pyo3(signature = (model, r, permutation_mode="greedy", semigradient_kind="sub", seed=0))]
    fn build(
        model: &PyModel,
        r: usize,
        permutation_mode: &str,
        semigradient_kind: &str,
        seed: u64,
    ) -> PyResult<Self> {
        let permutation_mode = match permutation_mode {
            "greedy" => PermutationMode::Greedy,
            "random" => PermutationMode::Random,
            other => return Err(PyValueError::new_err(format!(
                "permutation_mode must be \"greedy\" or \"random\", got {other:?}"
            ))),
        };
        let semigradient_kind = match semigradient_kind {
            "sub" => SemigradientKind::Sub,
            "super" => SemigradientKind::Super,
            other => return Err(PyValueError::new_err(format!(
                "semigradient_kind must be \"sub\" or \"super\", got {other:?}"
            ))),
        };
        let config = ConstructionConfig {
            r,
            permutation_mode,
            semigradient_kind,
            seed,
            k_range: KRange::ZeroToN,
        };
        let (inner, _) = build_mixture(&model.inner, &config).map_err(value_err)?;
        Ok(PyMixture { inner })
    }

    /// The handcrafted two-component mixture for the Ising model.
    #[staticmethod]
    fn ising_two_component(n: usize) -> PyResult<Self> {
        Ok(PyMixture {
            inner: ising_two_component_mixture(n).map_err(value_err)?,
        })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyMixture {
            inner: serde_json::from_str(text).map_err(value_err)?,
        })
    }

    #[getter]
    fn r(&self) -> usize {
        self.inner.r()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    fn log_pdf(&self, members: Vec<usize>) -> PyResult<f64> {
        let s = subset_from_members(members, self.inner.n())?;
        Ok(self.inner.log_pdf(s))
    }

    /// One draw, returned as a sorted member list.
    fn sample(&self, seed: u64) -> Vec<usize> {
        let mut rng = subsetmc::chains::chain_rng(seed, 0);
        self.inner.sample(&mut rng).members().collect()
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(runtime_err)
    }

    fn __repr__(&self) -> String {
        format!("Mixture(r={}, n={})", self.inner.r(), self.inner.n())
    }
}

fn sampler_spec(
    kind: &str,
    mixture: Option<&PyMixture>,
    alpha: f64,
    fixed_size: Option<usize>,
) -> PyResult<SamplerSpec> {
    let need_mixture = || {
        mixture
            .map(|m| m.inner.clone())
            .ok_or_else(|| PyValueError::new_err(format!("sampler {kind:?} needs a mixture")))
    };
    let need_size = || {
        fixed_size.ok_or_else(|| {
            PyValueError::new_err(format!("sampler {kind:?} needs fixed_size"))
        })
    };
    Ok(match kind {
        "gibbs" => SamplerSpec::Gibbs,
        "m3" => SamplerSpec::M3 {
            mixture: need_mixture()?,
        },
        "combined" => SamplerSpec::Combined {
            mixture: need_mixture()?,
            alpha,
        },
        "gibbs-swap" => SamplerSpec::GibbsSwap { size: need_size()? },
        "m3-fixed-size" => SamplerSpec::M3FixedSize {
            mixture: need_mixture()?,
            size: need_size()?,
        },
        "combined-fixed-size" => SamplerSpec::CombinedFixedSize {
            mixture: need_mixture()?,
            alpha,
            size: need_size()?,
        },
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown sampler kind {other:?}"
            )))
        }
    })
}

/// A recorded multi-chain run.
#[pyclass(name = "Trace")]
struct PyTrace {
    inner: subsetmc::Trace,
}

#[pymethods]
impl PyTrace {
    #[getter]
    fn chains(&self) -> usize {
        self.inner.chains()
    }

    #[getter]
    fn records(&self) -> usize {
        self.inner.records()
    }

    /// Recorded bitmasks, one list per chain.
    fn masks(&self) -> Vec<Vec<u64>> {
        self.inner.masks.clone()
    }

    /// Pooled post-burn-in element marginals.
    #[pyo3(signature = (burn_in=0.0))]
    fn marginals(&self, burn_in: f64) -> Vec<f64> {
        empirical_marginals(&self.inner, burn_in)
    }

    /// `(per_element, aggregate_max)` Gelman-Rubin PSRF.
    #[pyo3(signature = (burn_in=0.0))]
    fn psrf(&self, burn_in: f64) -> PyResult<(Vec<f64>, f64)> {
        let report = psrf(&self.inner, burn_in).map_err(value_err)?;
        Ok((report.per_element, report.aggregate))
    }

    /// Aggregate PSRF at each prefix length (in recorded samples).
    #[pyo3(signature = (checkpoints, burn_in=0.0))]
    fn psrf_at(&self, checkpoints: Vec<usize>, burn_in: f64) -> PyResult<Vec<f64>> {
        let curve = psrf_curve(&self.inner, &checkpoints, burn_in, PsrfVariant::Classic)
            .map_err(value_err)?;
        Ok(curve.into_iter().map(|(_, r)| r.aggregate).collect())
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }
}

/// Run independent chains of a sampler; see the README for kinds.
#[pyfunction]
#[pyo3(signature = (model, kind, chains, steps, mixture=None, alpha=0.5, fixed_size=None, record_every=1, seed=0))]
#[allow(clippy::too_many_arguments)]
fn run(
    model: &PyModel,
    kind: &str,
    chains: usize,
    steps: usize,
    mixture: Option<&PyMixture>,
    alpha: f64,
    fixed_size: Option<usize>,
    record_every: usize,
    seed: u64,
) -> PyResult<PyTrace> {
    let spec = sampler_spec(kind, mixture, alpha, fixed_size)?;
    let inner = run_chains(&model.inner, &spec, chains, steps, record_every, seed)
        .map_err(value_err)?;
    Ok(PyTrace { inner })
}

/// Exact element marginals by enumeration (desk scale).
#[pyfunction]
fn exact_marginals_of(model: &PyModel) -> PyResult<Vec<f64>> {
    let table = enumerate_distribution(&model.inner, DEFAULT_ENUM_LIMIT).map_err(value_err)?;
    Ok(exact_marginals(&table))
}

/// Exact `TV(pi, q)` by enumeration.
#[pyfunction]
fn exact_tv(model: &PyModel, mixture: &PyMixture) -> PyResult<f64> {
    let table = enumerate_distribution(&model.inner, DEFAULT_ENUM_LIMIT).map_err(value_err)?;
    let n = model.inner.ground_size();
    let q: Vec<f64> = (0..1u64 << n)
        .map(|b| mixture.inner.log_pdf(Subset::from_bits(b)).exp())
        .collect();
    tv_distance(&table.probs, &q).map_err(value_err)
}

/// Spectral gap of a sampler's exact transition matrix, with its
/// detailed-balance residual: returns `(gap, lambda2, db_residual)`.
#[pyfunction]
#[pyo3(signature = (model, kind, mixture=None, alpha=0.5, fixed_size=None))]
fn exact_spectral_gap(
    model: &PyModel,
    kind: &str,
    mixture: Option<&PyMixture>,
    alpha: f64,
    fixed_size: Option<usize>,
) -> PyResult<(f64, f64, f64)> {
    let spec = sampler_spec(kind, mixture, alpha, fixed_size)?;
    let p = build_transition_matrix(&model.inner, &spec, DEFAULT_MATRIX_LIMIT)
        .map_err(value_err)?;
    let pi = if spec.fixed_size().is_some() {
        conditioned_distribution(&model.inner, &p.space).map_err(runtime_err)?
    } else {
        enumerate_distribution(&model.inner, DEFAULT_ENUM_LIMIT)
            .map_err(value_err)?
            .probs
    };
    let residual = detailed_balance_residual(&p, &pi).map_err(runtime_err)?;
    let report = spectral_gap(&p, &pi).map_err(runtime_err)?;
    Ok((report.gap, report.lambda2, residual))
}

#[pymodule]
fn subsetmc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyMixture>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(exact_marginals_of, m)?)?;
    m.add_function(wrap_pyfunction!(exact_tv, m)?)?;
    m.add_function(wrap_pyfunction!(exact_spectral_gap, m)?)?;
    Ok(())
}
