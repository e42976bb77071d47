//! Multi-restart single-bit-flip Metropolis simulated annealing.
//!
//! Each restart owns a generator derived from the request seed and its
//! restart index, so chains are independent of execution order and may run
//! in parallel; results merge by (energy, little-endian bits), which is
//! order-free. Chain-best energies are re-evaluated exactly before they
//! leave this module.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::qubo::QuboInstance;
use crate::rng::{derived_rng, stream};
use crate::solver::{
    result_from_samples, AnnealerParams, Backend, DeltaEvaluator, Sample, SolveError, SolveResult,
};

/// Floor for derived temperatures so a zero matrix still anneals.
const MIN_TEMPERATURE: f64 = 1e-12;

/// Runs `params.restarts` annealing chains of `params.sweeps` full sweeps
/// each and returns the best assignment seen by any chain.
pub fn solve_annealer(
    instance: &QuboInstance,
    params: &AnnealerParams,
    seed: u64,
) -> Result<SolveResult, SolveError> {
    params.validate()?;
    let started = Instant::now();
    let eval = DeltaEvaluator::new(instance);

    let scale = instance.max_abs_entry().max(MIN_TEMPERATURE);
    let t_initial = params.initial_temperature.unwrap_or(scale).max(MIN_TEMPERATURE);
    let t_final = params
        .final_temperature
        .unwrap_or(1e-3 * t_initial)
        .max(MIN_TEMPERATURE)
        .min(t_initial);

    let samples: Vec<Sample> = (0..params.restarts)
        .into_par_iter()
        .map(|restart| {
            let bits = run_chain(instance, &eval, params.sweeps, t_initial, t_final, seed, restart);
            let energy = instance.objective(&bits).expect("chain preserves length");
            Sample { bits, energy, multiplicity: 1 }
        })
        .collect();

    Ok(result_from_samples(samples, Backend::Annealer, started))
}

fn run_chain(
    instance: &QuboInstance,
    eval: &DeltaEvaluator,
    sweeps: usize,
    t_initial: f64,
    t_final: f64,
    seed: u64,
    restart: usize,
) -> Vec<bool> {
    let size = instance.size();
    let mut rng = derived_rng(seed, &[stream::ANNEAL_CHAIN, restart as u64]);

    let mut bits: Vec<bool> = (0..size).map(|_| rng.random()).collect();
    let mut energy = instance.objective(&bits).expect("length matches");
    let mut best_bits = bits.clone();
    let mut best_energy = energy;

    let ratio = if sweeps > 1 {
        (t_final / t_initial).powf(1.0 / (sweeps - 1) as f64)
    } else {
        1.0
    };
    let mut temperature = t_initial;

    for _ in 0..sweeps {
        for b in 0..size {
            let delta = eval.flip_delta(&bits, b);
            let accept = delta <= 0.0 || rng.random::<f64>() < (-delta / temperature).exp();
            if accept {
                bits[b] = !bits[b];
                energy += delta;
                if energy < best_energy {
                    best_energy = energy;
                    best_bits.copy_from_slice(&bits);
                }
            }
        }
        temperature *= ratio;
    }

    best_bits
}
