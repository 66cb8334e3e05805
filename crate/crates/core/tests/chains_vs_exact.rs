//! Cross-checks of the simulated step rules against the closed-form
//! transition matrices: one-step frequencies, long-run marginals, and
//! reversibility of every sampler at desk scale.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use subsetmc::chains::{
    chain_rng, combined_step, gibbs_step, m3_fixed_size_step, m3_step, run_chains, ChainState,
    SamplerSpec,
};
use subsetmc::diagnostics::empirical_marginals;
use subsetmc::exact::{
    build_transition_matrix, conditioned_distribution, detailed_balance_residual,
    enumerate_distribution, exact_marginals, row_stochasticity_residual, stationarity_residual,
    StateSpace,
};
use subsetmc::logmodular::FixedSizeMixture;
use subsetmc::semigrad::ising_two_component_mixture;
use subsetmc::{Model, MixtureProposal, SetFunction, Subset};

const MATRIX_LIMIT: usize = 13;

fn ising6_mixture() -> MixtureProposal {
    ising_two_component_mixture(6).unwrap()
}

/// Empirical one-step distribution from a fixed start, as a dense row.
fn one_step_frequencies<S: Fn(&mut ChainState, &mut ChaCha8Rng)>(
    model: &Model,
    start: Subset,
    space: &StateSpace,
    trials: usize,
    step: S,
) -> Vec<f64> {
    let mut rng = chain_rng(2024, 0);
    let mut counts = vec![0u64; space.len()];
    for _ in 0..trials {
        let mut state = ChainState::new(model, start);
        step(&mut state, &mut rng);
        let idx = space.index_of(state.current.bits()).unwrap();
        counts[idx] += 1;
    }
    counts.iter().map(|&c| c as f64 / trials as f64).collect()
}

fn assert_row_close(expected: &[f64], observed: &[f64], tol: f64) {
    for (i, (e, o)) in expected.iter().zip(observed).enumerate() {
        assert!(
            (e - o).abs() < tol,
            "entry {i}: expected {e}, observed {o}"
        );
    }
}

#[test]
fn gibbs_one_step_matches_exact_row() {
    let model = Model::ising_log_n(6).unwrap();
    let p = build_transition_matrix(&model, &SamplerSpec::Gibbs, MATRIX_LIMIT).unwrap();
    let start = Subset::from_members([0, 3]);
    let row = p.entries.row(start.bits() as usize).to_vec();
    let freq = one_step_frequencies(&model, start, &p.space, 1_000_000, |state, rng| {
        gibbs_step(&model, state, rng)
    });
    assert_row_close(&row, &freq, 3e-3);
}

#[test]
fn m3_one_step_matches_exact_row() {
    let model = Model::ising_log_n(6).unwrap();
    let q = ising6_mixture();
    let p = build_transition_matrix(
        &model,
        &SamplerSpec::M3 {
            mixture: q.clone(),
        },
        MATRIX_LIMIT,
    )
    .unwrap();
    let start = Subset::from_members([1, 2, 4]);
    let row = p.entries.row(start.bits() as usize).to_vec();
    let freq = one_step_frequencies(&model, start, &p.space, 1_000_000, |state, rng| {
        m3_step(&model, &q, state, rng)
    });
    assert_row_close(&row, &freq, 3e-3);
}

#[test]
fn combined_one_step_matches_exact_row() {
    let model = Model::ising_log_n(6).unwrap();
    let q = ising6_mixture();
    let p = build_transition_matrix(
        &model,
        &SamplerSpec::Combined {
            mixture: q.clone(),
            alpha: 0.5,
        },
        MATRIX_LIMIT,
    )
    .unwrap();
    let start = Subset::from_members([0]);
    let row = p.entries.row(start.bits() as usize).to_vec();
    let freq = one_step_frequencies(&model, start, &p.space, 1_000_000, |state, rng| {
        combined_step(&model, &q, 0.5, state, rng)
    });
    assert_row_close(&row, &freq, 3e-3);
}

#[test]
fn fixed_size_m3_one_step_matches_exact_row() {
    let model = Model::ising_log_n(6).unwrap();
    let q = ising6_mixture();
    let sampler = SamplerSpec::M3FixedSize {
        mixture: q.clone(),
        size: 3,
    };
    let p = build_transition_matrix(&model, &sampler, MATRIX_LIMIT).unwrap();
    assert_eq!(p.len(), 20);
    let fq = FixedSizeMixture::new(&q, 3).unwrap();
    let start = Subset::from_members([0, 1, 2]);
    let row = p
        .entries
        .row(p.space.index_of(start.bits()).unwrap())
        .to_vec();
    let freq = one_step_frequencies(&model, start, &p.space, 1_000_000, |state, rng| {
        m3_fixed_size_step(&model, &fq, state, rng)
    });
    assert_row_close(&row, &freq, 3e-3);
}

#[test]
fn combined_long_run_marginals_match_enumeration() {
    // 10^7 combined steps at n = 8 keep element marginals within 0.01 of
    // the exact values.
    let n = 8;
    let model = Model::ising_log_n(n).unwrap();
    let q = ising_two_component_mixture(n).unwrap();
    let table = enumerate_distribution(&model, 20).unwrap();
    let exact = exact_marginals(&table);
    let mut rng = chain_rng(55, 3);
    let mut state = ChainState::new(&model, q.sample(&mut rng));
    let steps = 10_000_000usize;
    let mut counts = vec![0u64; n];
    for _ in 0..steps {
        combined_step(&model, &q, 0.5, &mut state, &mut rng);
        let mut bits = state.current.bits();
        while bits != 0 {
            counts[bits.trailing_zeros() as usize] += 1;
            bits &= bits - 1;
        }
    }
    for v in 0..n {
        let m = counts[v] as f64 / steps as f64;
        assert!((m - exact[v]).abs() < 0.01, "element {v}: {m} vs {}", exact[v]);
    }
}

#[test]
fn run_chains_gibbs_marginals_match_enumeration() {
    // Fast-mixing facility-location target at n = 8.
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut c = ndarray::Array2::zeros((8, 8));
    for i in 0..8 {
        for j in 0..8 {
            c[[i, j]] = 0.5 * rng.random::<f64>();
        }
    }
    let model = Model::facility_location(c).unwrap();
    let table = enumerate_distribution(&model, 20).unwrap();
    let exact = exact_marginals(&table);
    let trace = run_chains(&model, &SamplerSpec::Gibbs, 2, 1_000_000, 1, 99).unwrap();
    let empirical = empirical_marginals(&trace, 0.1);
    for v in 0..8 {
        assert!(
            (empirical[v] - exact[v]).abs() < 0.01,
            "element {v}: {} vs {}",
            empirical[v],
            exact[v]
        );
    }
}

#[test]
fn every_sampler_matrix_is_reversible_and_stationary_at_n8() {
    let n = 8;
    let model = Model::ising_log_n(n).unwrap();
    let q = ising_two_component_mixture(n).unwrap();
    let full = enumerate_distribution(&model, 20).unwrap();
    let samplers = [
        SamplerSpec::Gibbs,
        SamplerSpec::M3 { mixture: q.clone() },
        SamplerSpec::Combined {
            mixture: q.clone(),
            alpha: 0.5,
        },
        SamplerSpec::GibbsSwap { size: 4 },
        SamplerSpec::M3FixedSize {
            mixture: q.clone(),
            size: 4,
        },
        SamplerSpec::CombinedFixedSize {
            mixture: q,
            alpha: 0.5,
            size: 4,
        },
    ];
    for sampler in &samplers {
        let p = build_transition_matrix(&model, sampler, MATRIX_LIMIT).unwrap();
        let pi = if sampler.fixed_size().is_some() {
            conditioned_distribution(&model, &p.space).unwrap()
        } else {
            full.probs.clone()
        };
        assert!(row_stochasticity_residual(&p) < 1e-9);
        assert!(detailed_balance_residual(&p, &pi).unwrap() < 1e-10);
        assert!(stationarity_residual(&p, &pi).unwrap() < 1e-10);
    }
}
