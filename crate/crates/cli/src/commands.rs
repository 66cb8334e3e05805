//! The five subcommands: sample, construct, exact, benchmark, synth-data.

use std::path::Path;

use serde::Serialize;
use subsetmc::bench::measure_sampler;
use subsetmc::chains::{run_chains, SamplerSpec, Trace};
use subsetmc::data::{synthesize_model, SynthKind};
use subsetmc::diagnostics::{default_checkpoints, psrf_curve, PsrfReport};
use subsetmc::exact::{
    bottleneck_ratio, build_transition_matrix, conditioned_distribution,
    detailed_balance_residual, enumerate_distribution, exact_marginals, half_split_labels,
    mixing_time_bounds, project_chain, restrict_chain, row_stochasticity_residual, spectral_gap,
    stationarity_residual, tv_distance, StateSpace,
};
use subsetmc::logmodular::FixedSizeMixture;
use subsetmc::semigrad::{PermutationMode, SemigradientKind};
use subsetmc::{Model, MixtureProposal, SetFunction, Subset};

use crate::config::{ExperimentConfig, SamplerConfig};
use crate::manifest::OutputDir;
use crate::CliError;

/// Weyl-sequence derivation of per-repetition seeds from the master seed.
pub fn repetition_seed(seed: u64, rep: usize) -> u64 {
    seed.wrapping_add((rep as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn config_json(config: &ExperimentConfig) -> serde_json::Value {
    serde_json::to_value(config).unwrap_or(serde_json::Value::Null)
}

struct ResolvedSampler {
    label: String,
    spec: SamplerSpec,
}

/// Resolves every sampler, caching constructed mixtures and logs to disk.
fn resolve_samplers(
    config: &ExperimentConfig,
    model: &Model,
    out: &mut OutputDir,
) -> Result<Vec<ResolvedSampler>, CliError> {
    let mut resolved = Vec::with_capacity(config.samplers.len());
    for sampler in &config.samplers {
        let mixture = if sampler.kind.needs_mixture() {
            let (q, log) = config.resolve_mixture(model, sampler)?;
            let mixture_json = serde_json::to_string_pretty(&q)
                .map_err(|e| CliError::Runtime(format!("serializing mixture: {e}")))?;
            out.write(&format!("{}_mixture.json", sampler.label), &mixture_json)?;
            if let Some(log) = log {
                let log_json = serde_json::to_string_pretty(&log)
                    .map_err(|e| CliError::Runtime(format!("serializing log: {e}")))?;
                out.write(
                    &format!("{}_construction_log.json", sampler.label),
                    &log_json,
                )?;
            }
            Some(q)
        } else {
            None
        };
        let spec = config.resolve_sampler(model, sampler, mixture)?;
        resolved.push(ResolvedSampler {
            label: sampler.label.clone(),
            spec,
        });
    }
    Ok(resolved)
}

fn fmt_float(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

/// Accumulated PSRF curves over repetitions, averaged pointwise.
struct CurveAccumulator {
    checkpoints: Vec<usize>,
    n: usize,
    reps: usize,
    sum_aggregate: Vec<f64>,
    sum_mean: Vec<f64>,
    sum_elements: Vec<Vec<f64>>,
    sum_wallclock: Vec<f64>,
}

impl CurveAccumulator {
    fn new(checkpoints: Vec<usize>, n: usize) -> Self {
        let k = checkpoints.len();
        CurveAccumulator {
            checkpoints,
            n,
            reps: 0,
            sum_aggregate: vec![0.0; k],
            sum_mean: vec![0.0; k],
            sum_elements: vec![vec![0.0; n]; k],
            sum_wallclock: vec![0.0; k],
        }
    }

    fn add(&mut self, curve: &[(usize, PsrfReport)], trace: &Trace) {
        self.reps += 1;
        for (i, (cp, report)) in curve.iter().enumerate() {
            self.sum_aggregate[i] += report.aggregate;
            self.sum_mean[i] += report.aggregate_mean;
            for v in 0..self.n {
                self.sum_elements[i][v] += report.per_element[v];
            }
            // Median cumulative wall clock across chains at this prefix.
            let mut clocks: Vec<u64> = (0..trace.chains())
                .map(|c| trace.wallclock_ns[c][cp - 1])
                .collect();
            clocks.sort_unstable();
            let median = if clocks.len() % 2 == 1 {
                clocks[clocks.len() / 2] as f64
            } else {
                (clocks[clocks.len() / 2 - 1] + clocks[clocks.len() / 2]) as f64 / 2.0
            };
            self.sum_wallclock[i] += median;
        }
    }

    fn csv_vs_iteration(&self, record_every: usize) -> String {
        let mut out = String::from("checkpoint,psrf_aggregate");
        for v in 0..self.n {
            out.push_str(&format!(",psrf_elem_{v}"));
        }
        out.push_str(",psrf_mean\n");
        let reps = self.reps as f64;
        for (i, cp) in self.checkpoints.iter().enumerate() {
            let step = (cp - 1) * record_every;
            out.push_str(&format!(
                "{step},{}",
                fmt_float(self.sum_aggregate[i] / reps)
            ));
            for v in 0..self.n {
                out.push_str(&format!(",{}", fmt_float(self.sum_elements[i][v] / reps)));
            }
            out.push_str(&format!(",{}\n", fmt_float(self.sum_mean[i] / reps)));
        }
        out
    }

    fn csv_vs_wallclock(&self) -> String {
        let mut out = String::from("wallclock_ns,psrf_aggregate");
        for v in 0..self.n {
            out.push_str(&format!(",psrf_elem_{v}"));
        }
        out.push_str(",psrf_mean\n");
        let reps = self.reps as f64;
        for i in 0..self.checkpoints.len() {
            out.push_str(&format!(
                "{:.0},{}",
                self.sum_wallclock[i] / reps,
                fmt_float(self.sum_aggregate[i] / reps)
            ));
            for v in 0..self.n {
                out.push_str(&format!(",{}", fmt_float(self.sum_elements[i][v] / reps)));
            }
            out.push_str(&format!(",{}\n", fmt_float(self.sum_mean[i] / reps)));
        }
        out
    }
}

/// `sample`: run every sampler for every repetition, writing traces and
/// averaged PSRF curves (vs iteration and vs wall clock).
pub fn cmd_sample(config: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let model = config.resolve_model()?;
    let mut out = OutputDir::create(out_dir)?;
    let samplers = resolve_samplers(config, &model, &mut out)?;
    let records = config.steps / config.record_every + 1;
    // Degenerate runs (fewer than 4 recorded samples, or a single chain)
    // still emit traces; PSRF files are skipped since the statistic is
    // undefined there.
    let checkpoints = if config.chains >= 2 {
        default_checkpoints(records, config.checkpoints)
    } else {
        Vec::new()
    };
    let rep_seeds: Vec<u64> = (0..config.repetitions)
        .map(|rep| repetition_seed(config.seed, rep))
        .collect();

    for sampler in &samplers {
        let mut acc = CurveAccumulator::new(checkpoints.clone(), model.ground_size());
        for (rep, &rep_seed) in rep_seeds.iter().enumerate() {
            let trace = run_chains(
                &model,
                &sampler.spec,
                config.chains,
                config.steps,
                config.record_every,
                rep_seed,
            )
            .map_err(|e| CliError::Runtime(format!("sampler {}: {e}", sampler.label)))?;
            out.write(
                &format!("{}_rep{rep:03}_trace.csv", sampler.label),
                &trace.to_csv(),
            )?;
            if !checkpoints.is_empty() {
                let curve =
                    psrf_curve(&trace, &checkpoints, config.burn_in, config.psrf_variant)
                        .map_err(|e| {
                            CliError::Runtime(format!("psrf for {}: {e}", sampler.label))
                        })?;
                acc.add(&curve, &trace);
            }
        }
        if !checkpoints.is_empty() {
            out.write(
                &format!("{}_psrf_iter.csv", sampler.label),
                &acc.csv_vs_iteration(config.record_every),
            )?;
            out.write(
                &format!("{}_psrf_wallclock.csv", sampler.label),
                &acc.csv_vs_wallclock(),
            )?;
        }
        eprintln!("sample: finished {}", sampler.label);
    }
    out.finalize("sample", config.seed, rep_seeds, config_json(config))?;
    Ok(())
}

/// `construct`: build and cache the mixtures only.
pub fn cmd_construct(config: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let model = config.resolve_model()?;
    let mut out = OutputDir::create(out_dir)?;
    let _ = resolve_samplers(config, &model, &mut out)?;
    out.finalize("construct", config.seed, Vec::new(), config_json(config))?;
    Ok(())
}

#[derive(Serialize)]
struct HalfSplitReport {
    pi_bar: Vec<f64>,
    projection_gap: f64,
    restriction_gap_block0: f64,
    restriction_gap_block1: f64,
    bottleneck_ratio_block0: f64,
}

#[derive(Serialize)]
struct SamplerExactReport {
    label: String,
    states: usize,
    row_stochasticity_residual: f64,
    detailed_balance_residual: f64,
    stationarity_residual: f64,
    gap: f64,
    lambda2: f64,
    lazy_gap: f64,
    pi_min: f64,
    epsilon: f64,
    mixing_time_lower: f64,
    mixing_time_upper: f64,
    tv_pi_q: Option<f64>,
    half_split: HalfSplitReport,
}

#[derive(Serialize)]
struct ExactReport {
    n: usize,
    log_z: f64,
    marginals: Vec<f64>,
    samplers: Vec<SamplerExactReport>,
}

/// `exact`: dense verification report (gaps, residuals, projections,
/// bottlenecks, mixing-time bounds, proposal TV).
pub fn cmd_exact(config: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let model = config.resolve_model()?;
    let n = model.ground_size();
    if n > config.matrix_limit {
        return Err(CliError::Validation(format!(
            "exact analysis refused: n = {n} exceeds matrix_limit = {} (dense 2^n x 2^n build)",
            config.matrix_limit
        )));
    }
    let mut out = OutputDir::create(out_dir)?;
    let samplers = resolve_samplers(config, &model, &mut out)?;
    let table = enumerate_distribution(&model, config.enum_limit)
        .map_err(|e| CliError::Runtime(format!("enumeration: {e}")))?;
    let marginals = exact_marginals(&table);

    let mut reports = Vec::with_capacity(samplers.len());
    for sampler in &samplers {
        let p = build_transition_matrix(&model, &sampler.spec, config.matrix_limit)
            .map_err(|e| CliError::Runtime(format!("matrix for {}: {e}", sampler.label)))?;
        let pi = if sampler.spec.fixed_size().is_some() {
            conditioned_distribution(&model, &p.space)
                .map_err(|e| CliError::Runtime(format!("conditioning: {e}")))?
        } else {
            table.probs.clone()
        };
        let run = |e: subsetmc::exact::ExactError| CliError::Runtime(e.to_string());
        let spectral = spectral_gap(&p, &pi).map_err(run)?;
        let lazy = spectral_gap(&p.lazify(), &pi).map_err(run)?;
        let pi_min = pi.iter().cloned().fold(f64::INFINITY, f64::min).max(1e-300);
        let (lower, upper) =
            mixing_time_bounds(lazy.gap.max(1e-15), pi_min, config.epsilon).map_err(run)?;
        let tv_pi_q = tv_against_mixture(&model, &sampler.spec, &p.space, &pi)?;
        // Fixed-size spaces can land entirely in one half; relabel so the
        // occupied block is block 0 and the projection stays well-formed.
        let mut labels = half_split_labels(&p.space);
        if labels.iter().all(|&b| b == 1) {
            labels.iter_mut().for_each(|b| *b = 0);
        }
        let (proj, pi_bar) = project_chain(&p, &pi, &labels).map_err(run)?;
        let projection_gap = spectral_gap(&proj, &pi_bar).map_err(run)?.gap;
        let block0: Vec<usize> = (0..p.len()).filter(|&s| labels[s] == 0).collect();
        let block1: Vec<usize> = (0..p.len()).filter(|&s| labels[s] == 1).collect();
        let gap_of_block = |block: &[usize]| -> Result<f64, CliError> {
            if block.is_empty() {
                return Ok(f64::NAN);
            }
            let (restricted, pi_cond) = restrict_chain(&p, &pi, block).map_err(run)?;
            Ok(spectral_gap(&restricted, &pi_cond).map_err(run)?.gap)
        };
        let in_block0: Vec<bool> = labels.iter().map(|&b| b == 0).collect();
        reports.push(SamplerExactReport {
            label: sampler.label.clone(),
            states: p.len(),
            row_stochasticity_residual: row_stochasticity_residual(&p),
            detailed_balance_residual: detailed_balance_residual(&p, &pi).map_err(run)?,
            stationarity_residual: stationarity_residual(&p, &pi).map_err(run)?,
            gap: spectral.gap,
            lambda2: spectral.lambda2,
            lazy_gap: lazy.gap,
            pi_min,
            epsilon: config.epsilon,
            mixing_time_lower: lower,
            mixing_time_upper: upper,
            tv_pi_q,
            half_split: HalfSplitReport {
                pi_bar: pi_bar.clone(),
                projection_gap,
                restriction_gap_block0: gap_of_block(&block0)?,
                restriction_gap_block1: gap_of_block(&block1)?,
                bottleneck_ratio_block0: bottleneck_ratio(&p, &pi, &in_block0).map_err(run)?,
            },
        });
        eprintln!("exact: finished {}", sampler.label);
    }
    let report = ExactReport {
        n,
        log_z: table.log_z,
        marginals,
        samplers: reports,
    };
    let body = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Runtime(format!("serializing report: {e}")))?;
    out.write("exact_report.json", &body)?;
    out.finalize("exact", config.seed, Vec::new(), config_json(config))?;
    Ok(())
}

/// TV between the stationary law and the proposal, over the sampler's
/// state space.
fn tv_against_mixture(
    model: &Model,
    spec: &SamplerSpec,
    space: &StateSpace,
    pi: &[f64],
) -> Result<Option<f64>, CliError> {
    let Some(q) = spec.mixture() else {
        return Ok(None);
    };
    let q_probs: Vec<f64> = match spec.fixed_size() {
        None => space
            .masks
            .iter()
            .map(|&m| q.log_pdf(Subset::from_bits(m)).exp())
            .collect(),
        Some(size) => {
            let fq = FixedSizeMixture::new(q, size)
                .map_err(|e| CliError::Runtime(format!("fixed-size mixture: {e}")))?;
            space
                .masks
                .iter()
                .map(|&m| fq.log_pdf(Subset::from_bits(m)).exp())
                .collect()
        }
    };
    let _ = model;
    tv_distance(pi, &q_probs)
        .map(Some)
        .map_err(|e| CliError::Runtime(e.to_string()))
}

/// `benchmark`: step-rate table for Gibbs and the mixture chain at
/// r ∈ {1, 20, 200} on the configured model.
pub fn cmd_benchmark(config: &ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let model = config.resolve_model()?;
    let n = model.ground_size();
    let mut out = OutputDir::create(out_dir)?;
    let mut csv = String::from("sampler,r,n,steps,ns_per_step,steps_per_sec\n");

    let gibbs_steps = config.benchmark_steps.max(1_000_000);
    let timing = measure_sampler(&model, &SamplerSpec::Gibbs, gibbs_steps, config.seed)
        .map_err(|e| CliError::Runtime(format!("benchmark gibbs: {e}")))?;
    csv.push_str(&format!(
        "gibbs,0,{n},{},{:.2},{:.0}\n",
        timing.steps, timing.ns_per_step, timing.steps_per_sec
    ));
    eprintln!("benchmark: gibbs {:.0} steps/s", timing.steps_per_sec);

    for r in [1usize, 20, 200] {
        let mixture = random_benchmark_mixture(&model, r, config.seed);
        let spec = SamplerSpec::M3 { mixture };
        let timing = measure_sampler(&model, &spec, config.benchmark_steps, config.seed)
            .map_err(|e| CliError::Runtime(format!("benchmark m3 r={r}: {e}")))?;
        csv.push_str(&format!(
            "m3,{r},{n},{},{:.2},{:.0}\n",
            timing.steps, timing.ns_per_step, timing.steps_per_sec
        ));
        eprintln!("benchmark: m3 r={r} {:.0} steps/s", timing.steps_per_sec);
    }
    out.write("benchmark.csv", &csv)?;
    out.finalize("benchmark", config.seed, Vec::new(), config_json(config))?;
    Ok(())
}

/// Random-permutation mixture used purely for step timing: construction
/// cost must not contaminate the per-step numbers.
pub fn random_benchmark_mixture(model: &Model, r: usize, seed: u64) -> MixtureProposal {
    let config = subsetmc::semigrad::ConstructionConfig {
        r,
        permutation_mode: PermutationMode::Random,
        semigradient_kind: match model {
            Model::IsingComplete { .. } => SemigradientKind::Super,
            _ => SemigradientKind::Sub,
        },
        seed,
        k_range: subsetmc::semigrad::KRange::ZeroToN,
    };
    subsetmc::semigrad::build_mixture(model, &config)
        .expect("benchmark mixture construction")
        .0
}

/// `synth-data`: write a synthesized model as JSON.
pub fn cmd_synth_data(
    kind: SynthKind,
    n: usize,
    l: usize,
    seed: u64,
    out_path: &Path,
) -> Result<(), CliError> {
    let model = synthesize_model(kind, n, l, seed)
        .map_err(|e| CliError::Validation(format!("synth: {e}")))?;
    let body = serde_json::to_string_pretty(&model)
        .map_err(|e| CliError::Runtime(format!("serializing model: {e}")))?;
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Runtime(format!("creating {}: {e}", parent.display())))?;
        }
    }
    std::fs::write(out_path, body)
        .map_err(|e| CliError::Runtime(format!("writing {}: {e}", out_path.display())))?;
    eprintln!("synth-data: wrote {}", out_path.display());
    Ok(())
}
