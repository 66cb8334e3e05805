//! Step-rate measurement for the samplers.

use std::time::Instant;

use crate::chains::{chain_rng, ChainError, ChainState, SamplerSpec};
use crate::chains::{
    combined_fixed_size_step, combined_step, gibbs_step, gibbs_swap_step, m3_fixed_size_step,
    m3_step,
};
use crate::logmodular::FixedSizeMixture;
use crate::model::SetFunction;
use crate::subset::GroundSet;

#[derive(Debug, Clone, Copy)]
pub struct StepTiming {
    pub steps: usize,
    pub ns_per_step: f64,
    pub steps_per_sec: f64,
}

/// Times `steps` steps of one chain (after a 10% warmup) and reports the
/// sustained rate.
pub fn measure_sampler<F: SetFunction>(
    model: &F,
    sampler: &SamplerSpec,
    steps: usize,
    seed: u64,
) -> Result<StepTiming, ChainError> {
    let n = model.ground_size();
    sampler.validate(n)?;
    let fixed = match sampler {
        SamplerSpec::M3FixedSize { mixture, size }
        | SamplerSpec::CombinedFixedSize { mixture, size, .. } => {
            Some(FixedSizeMixture::new(mixture, *size)?)
        }
        _ => None,
    };
    let mut rng = chain_rng(seed, 0);
    let gs = GroundSet::new(n).expect("model ground size validated");
    let start = match sampler {
        SamplerSpec::Gibbs => gs.random_subset(&mut rng),
        SamplerSpec::M3 { mixture } | SamplerSpec::Combined { mixture, .. } => {
            mixture.sample(&mut rng)
        }
        SamplerSpec::GibbsSwap { size } => gs.random_subset_of_size(*size, &mut rng),
        _ => fixed.as_ref().unwrap().sample(&mut rng),
    };
    let mut state = ChainState::new(model, start);

    let run = |count: usize, state: &mut ChainState, rng: &mut rand_chacha::ChaCha8Rng| {
        for _ in 0..count {
            match sampler {
                SamplerSpec::Gibbs => gibbs_step(model, state, rng),
                SamplerSpec::M3 { mixture } => m3_step(model, mixture, state, rng),
                SamplerSpec::Combined { mixture, alpha } => {
                    combined_step(model, mixture, *alpha, state, rng)
                }
                SamplerSpec::GibbsSwap { .. } => gibbs_swap_step(model, state, rng),
                SamplerSpec::M3FixedSize { .. } => {
                    m3_fixed_size_step(model, fixed.as_ref().unwrap(), state, rng)
                }
                SamplerSpec::CombinedFixedSize { alpha, .. } => {
                    combined_fixed_size_step(model, fixed.as_ref().unwrap(), *alpha, state, rng)
                }
            }
        }
    };

    run(steps / 10, &mut state, &mut rng);
    let t0 = Instant::now();
    run(steps, &mut state, &mut rng);
    let elapsed = t0.elapsed().as_secs_f64().max(1e-12);
    Ok(StepTiming {
        steps,
        ns_per_step: elapsed * 1e9 / steps as f64,
        steps_per_sec: steps as f64 / elapsed,
    })
}
