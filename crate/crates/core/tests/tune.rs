// Scratch calibration sweeps (run explicitly with --ignored). Not part of
// the test suite.

use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use subsetmc::exact::{enumerate_distribution, tv_distance};
use subsetmc::semigrad::{build_mixture, ConstructionConfig, KRange, PermutationMode, SemigradientKind};
use subsetmc::subset::GroundSet;
use subsetmc::Model;

fn facility(n: usize, l: usize, seed: u64, family: &str) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Array2::zeros((n, l));
    for i in 0..n {
        for j in 0..l {
            let u: f64 = rng.random();
            c[[i, j]] = match family {
                "unif05" => 0.5 * u,
                "unif1" => u,
                "unif15" => 1.5 * u,
                "unif2" => 2.0 * u,
                "unif4" => 4.0 * u,
                "exp1" => -u.max(1e-12).ln(),
                "exp2" => -2.0 * u.max(1e-12).ln(),
                "exp4" => -4.0 * u.max(1e-12).ln(),
                _ => unreachable!(),
            };
        }
    }
    if family == "sparse" {
        for i in 0..n {
            for j in 0..l {
                if rng.random::<f64>() < 0.7 {
                    c[[i, j]] = 0.0;
                } else {
                    c[[i, j]] *= 3.0;
                }
            }
        }
    }
    Model::facility_location(c).unwrap()
}

#[test]
#[ignore]
fn probe_water_like_psrf() {
    use subsetmc::chains::{run_chains, SamplerSpec};
    use subsetmc::data::{synthesize_model, SynthKind};
    use subsetmc::diagnostics::{psrf_prefix, PsrfVariant};
    use subsetmc::semigrad::{
        build_mixture, ConstructionConfig, KRange, PermutationMode, SemigradientKind,
    };

    let n = 50;
    let l = 500;
    let model = synthesize_model(SynthKind::WaterLike, n, l, 11).unwrap();
    let t0 = std::time::Instant::now();
    let (q, _) = build_mixture(
        &model,
        &ConstructionConfig {
            r: 200,
            permutation_mode: PermutationMode::Greedy,
            semigradient_kind: SemigradientKind::Sub,
            seed: 7,
            k_range: KRange::ZeroToN,
        },
    )
    .unwrap();
    println!("construction took {:?}", t0.elapsed());

    // Rough M3 acceptance rate inside the combined chain.
    let mut rng = subsetmc::chains::chain_rng(0, 0);
    let mut state = subsetmc::chains::ChainState::new(&model, q.sample(&mut rng));
    let mut accepts = 0u32;
    let trials = 2000;
    for _ in 0..trials {
        let before = state.current;
        subsetmc::chains::m3_step(&model, &q, &mut state, &mut rng);
        if state.current != before {
            accepts += 1;
        }
    }
    println!("m3 move rate: {}", accepts as f64 / trials as f64);

    for steps in [300usize, 400, 500, 700, 1000] {
        let re = 1;
        let mut ok_batches = 0;
        let mut gibbs_finals = Vec::new();
        let mut combo_finals = Vec::new();
        for batch in 0..10u64 {
            let spec_c = SamplerSpec::Combined {
                mixture: q.clone(),
                alpha: 0.5,
            };
            let tg = run_chains(&model, &SamplerSpec::Gibbs, 20, steps, re, 1000 + batch).unwrap();
            let tc = run_chains(&model, &spec_c, 20, steps, re, 1000 + batch).unwrap();
            let g = psrf_prefix(&tg, tg.records(), 0.0, PsrfVariant::Classic)
                .unwrap()
                .aggregate;
            let c = psrf_prefix(&tc, tc.records(), 0.0, PsrfVariant::Classic)
                .unwrap()
                .aggregate;
            if g > 1.2 && c <= 1.2 {
                ok_batches += 1;
            }
            gibbs_finals.push((g * 1000.0).round() / 1000.0);
            combo_finals.push((c * 1000.0).round() / 1000.0);
        }
        println!("steps={steps}: separated {ok_batches}/10");
        println!("  gibbs {gibbs_finals:?}");
        println!("  combo {combo_finals:?}");
    }
    println!("total {:?}", t0.elapsed());
}

#[test]
#[ignore]
fn probe_ising7_psrf_crossing() {
    use subsetmc::chains::{run_chains, SamplerSpec};
    use subsetmc::diagnostics::{psrf_curve, PsrfVariant};
    use subsetmc::semigrad::{
        build_mixture, ising_two_component_mixture, ConstructionConfig, KRange, PermutationMode,
        SemigradientKind,
    };

    let n = 7;
    let model = Model::ising_log_n(n).unwrap();
    let handcrafted = ising_two_component_mixture(n).unwrap();
    let (constructed, _) = build_mixture(
        &model,
        &ConstructionConfig {
            r: 20,
            permutation_mode: PermutationMode::Greedy,
            semigradient_kind: SemigradientKind::Super,
            seed: 7,
            k_range: KRange::ZeroToN,
        },
    )
    .unwrap();
    let steps = 10_000usize;
    let re = 5usize;
    let records = steps / re + 1;
    // Log-spaced prefix lengths.
    let mut checkpoints: Vec<usize> = Vec::new();
    let mut c = 4.0f64;
    while (c as usize) < records {
        checkpoints.push(c as usize);
        c *= 1.3;
    }
    checkpoints.push(records);
    checkpoints.dedup();

    let reps = 50;
    for (label, spec) in [
        ("gibbs", SamplerSpec::Gibbs),
        (
            "combo-f",
            SamplerSpec::Combined {
                mixture: handcrafted.clone(),
                alpha: 0.5,
            },
        ),
        (
            "combo-i",
            SamplerSpec::Combined {
                mixture: constructed.clone(),
                alpha: 0.5,
            },
        ),
    ] {
        let mut sums = vec![0.0f64; checkpoints.len()];
        for rep in 0..reps {
            let seed = 1u64.wrapping_add((rep as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let trace = run_chains(&model, &spec, 20, steps, re, seed).unwrap();
            let curve = psrf_curve(&trace, &checkpoints, 0.0, PsrfVariant::Classic).unwrap();
            for (i, (_, r)) in curve.iter().enumerate() {
                sums[i] += r.aggregate;
            }
        }
        let avg: Vec<f64> = sums.iter().map(|s| s / reps as f64).collect();
        let crossing = checkpoints
            .iter()
            .zip(&avg)
            .find(|(_, &v)| v <= 1.1)
            .map(|(&cp, _)| (cp - 1) * re);
        println!("{label}: first step with avg psrf <= 1.1: {crossing:?}");
        let pts: Vec<String> = checkpoints
            .iter()
            .zip(&avg)
            .map(|(&cp, &v)| format!("{}:{:.3}", (cp - 1) * re, v))
            .collect();
        println!("  curve {}", pts.join(" "));
    }
}

#[test]
#[ignore]
fn probe_spectral_pipeline_n11() {
    use subsetmc::chains::SamplerSpec;
    use subsetmc::exact::{
        build_transition_matrix, half_split_labels, project_chain, spectral_gap,
    };
    use subsetmc::semigrad::ising_two_component_mixture;
    let t0 = std::time::Instant::now();
    for n in [11usize] {
        let model = Model::ising_log_n(n).unwrap();
        let q = ising_two_component_mixture(n).unwrap();
        let pi = enumerate_distribution(&model, 20).unwrap().probs;
        let pg = build_transition_matrix(&model, &SamplerSpec::Gibbs, 13).unwrap();
        let gg = spectral_gap(&pg, &pi).unwrap().gap;
        let pm = build_transition_matrix(&model, &SamplerSpec::M3 { mixture: q.clone() }, 13).unwrap();
        let labels = half_split_labels(&pm.space);
        let (proj_m, pi_bar) = project_chain(&pm, &pi, &labels).unwrap();
        let gap_proj_m = spectral_gap(&proj_m, &pi_bar).unwrap().gap;
        let pc = build_transition_matrix(
            &model,
            &SamplerSpec::Combined { mixture: q, alpha: 0.5 },
            13,
        )
        .unwrap();
        let gc = spectral_gap(&pc, &pi).unwrap().gap;
        println!(
            "n={n}: gamma_G={gg:.6e} gamma_C={gc:.6e} gap(proj M)={gap_proj_m:.4} elapsed={:?}",
            t0.elapsed()
        );
    }
}

#[test]
#[ignore]
fn sweep_mixture_size_monotonicity() {
    let n = 8;
    for (family, l) in [("unif1", 6usize), ("unif05", 8), ("unif05", 10)] {
        for base in [0u64, 5000, 90000, 777777] {
            let mut hold = 0;
            let total = 50;
            for seed in 0..total {
                let model = facility(n, l, base + seed, family);
                let pi = enumerate_distribution(&model, 20).unwrap();
                let gs = GroundSet::new(n).unwrap();
                let tv_for = |r: usize| {
                    let config = ConstructionConfig {
                        r,
                        permutation_mode: PermutationMode::Greedy,
                        semigradient_kind: SemigradientKind::Sub,
                        seed: 0,
                        k_range: KRange::ZeroToN,
                    };
                    let (q, _) = build_mixture(&model, &config).unwrap();
                    let qp: Vec<f64> = gs.subsets().map(|s| q.log_pdf(s).exp()).collect();
                    tv_distance(&pi.probs, &qp).unwrap()
                };
                let (t1, t5, t20) = (tv_for(1), tv_for(5), tv_for(20));
                if t1 >= t5 - 1e-12 && t5 >= t20 - 1e-12 {
                    hold += 1;
                }
            }
            println!("family={family} L={l} base={base}: monotone {hold}/{total}");
        }
    }
}
