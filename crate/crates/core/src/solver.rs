//! Minimum-energy search for QUBO instances behind one interface:
//! exhaustive enumeration (oracle-grade, small instances), multi-restart
//! simulated annealing (the default), and a remote sampler speaking a
//! line-oriented text protocol over HTTP.
//!
//! Every backend re-evaluates reported energies locally, so
//! `best_energy == instance.objective(&best_bits)` holds exactly no matter
//! where the bits came from. Ties between equal-energy bit vectors are
//! broken everywhere by the smaller vector in little-endian integer order
//! (bit 0 is the lowest-order bit), matching enumeration order.

mod annealer;
mod remote;

pub use annealer::solve_annealer;
pub use remote::{parse_sample_lines, serialize_qubo, solve_remote};

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qubo::{QuboError, QuboInstance};

/// Hard cap for exhaustive enumeration.
pub const EXHAUSTIVE_CAP: usize = 26;

/// Environment variable overriding the remote solver endpoint.
pub const REMOTE_URL_ENV: &str = "SONOSHAPE_SOLVER_URL";

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("instance size {size} exceeds exhaustive cap {EXHAUSTIVE_CAP}")]
    SizeCapExceeded { size: usize },
    #[error("invalid annealer parameters: {0}")]
    BadAnnealerParams(String),
    #[error("remote backend selected but no endpoint configured (set `remote.endpoint` or {REMOTE_URL_ENV})")]
    RemoteEndpointUnset,
    #[error("remote solver transport failure: {0}")]
    RemoteTransport(String),
    #[error("remote solver returned malformed response at line {line}: {msg}")]
    RemoteMalformed { line: usize, msg: String },
    #[error("remote solver returned no samples")]
    RemoteEmpty,
    #[error(transparent)]
    Qubo(#[from] QuboError),
}

/// Which minimizer runs the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Exhaustive,
    Annealer,
    Remote,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Exhaustive => write!(f, "exhaustive"),
            Backend::Annealer => write!(f, "annealer"),
            Backend::Remote => write!(f, "remote"),
        }
    }
}

/// Simulated-annealing budget and schedule. Temperatures left unset are
/// derived from the instance: initial = max |entry|, final = 1e-3 initial.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealerParams {
    pub sweeps: usize,
    pub restarts: usize,
    pub initial_temperature: Option<f64>,
    pub final_temperature: Option<f64>,
}

impl Default for AnnealerParams {
    fn default() -> Self {
        AnnealerParams { sweeps: 200, restarts: 20, initial_temperature: None, final_temperature: None }
    }
}

impl AnnealerParams {
    pub fn validate(&self) -> Result<(), SolveError> {
        if self.sweeps == 0 || self.restarts == 0 {
            return Err(SolveError::BadAnnealerParams("sweeps and restarts must be >= 1".into()));
        }
        if let (Some(t0), Some(t1)) = (self.initial_temperature, self.final_temperature) {
            if t0 < t1 {
                return Err(SolveError::BadAnnealerParams(format!(
                    "initial temperature {t0} below final {t1}"
                )));
            }
        }
        for t in [self.initial_temperature, self.final_temperature].into_iter().flatten() {
            if t.is_nan() || t <= 0.0 {
                return Err(SolveError::BadAnnealerParams(format!("temperature {t} must be positive")));
            }
        }
        Ok(())
    }
}

/// Remote sampler endpoint configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteSettings {
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
}

impl Default for RemoteSettings {
    fn default() -> Self {
        RemoteSettings { endpoint: None, timeout_ms: 30_000 }
    }
}

/// Backend-selection settings as they appear in experiment configuration;
/// everything except the instance and the seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub backend: Backend,
    pub num_reads: usize,
    pub annealer: AnnealerParams,
    pub remote: RemoteSettings,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            backend: Backend::Annealer,
            num_reads: 20,
            annealer: AnnealerParams::default(),
            remote: RemoteSettings::default(),
        }
    }
}

/// One solve: instance plus settings plus the seed driving any stochastic
/// backend.
#[derive(Debug, Clone)]
pub struct SolveRequest {
    pub instance: QuboInstance,
    pub num_reads: usize,
    pub backend: Backend,
    pub annealer: AnnealerParams,
    pub remote: RemoteSettings,
    pub seed: u64,
}

impl SolveRequest {
    pub fn new(instance: QuboInstance, settings: &SolverSettings, seed: u64) -> Self {
        SolveRequest {
            instance,
            num_reads: settings.num_reads,
            backend: settings.backend,
            annealer: settings.annealer.clone(),
            remote: settings.remote.clone(),
            seed,
        }
    }
}

/// A candidate assignment with its locally verified energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub bits: Vec<bool>,
    pub energy: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub best_bits: Vec<bool>,
    pub best_energy: f64,
    /// Sorted by energy ascending, ties by little-endian bit order.
    pub samples: Vec<Sample>,
    pub backend_used: Backend,
    pub wall_time: Duration,
}

/// Compares bit vectors as little-endian integers (bit 0 lowest order).
pub fn bits_le_cmp(a: &[bool], b: &[bool]) -> Ordering {
    debug_assert_eq!(a.len(), b.len());
    a.iter().rev().cmp(b.iter().rev())
}

fn sample_cmp(a: &Sample, b: &Sample) -> Ordering {
    a.energy.total_cmp(&b.energy).then_with(|| bits_le_cmp(&a.bits, &b.bits))
}

/// Deduplicates identical bit vectors (summing multiplicities) and sorts
/// by (energy, bits).
fn finalize_samples(mut samples: Vec<Sample>) -> Vec<Sample> {
    samples.sort_by(sample_cmp);
    let mut out: Vec<Sample> = Vec::with_capacity(samples.len());
    for s in samples {
        match out.last_mut() {
            Some(last) if last.bits == s.bits => last.multiplicity += s.multiplicity,
            _ => out.push(s),
        }
    }
    out
}

fn result_from_samples(
    samples: Vec<Sample>,
    backend: Backend,
    started: Instant,
) -> SolveResult {
    let samples = finalize_samples(samples);
    let best = samples.first().expect("at least one sample");
    SolveResult {
        best_bits: best.bits.clone(),
        best_energy: best.energy,
        samples,
        backend_used: backend,
        wall_time: started.elapsed(),
    }
}

/// Dense scratch form of an instance for O(degree) energy deltas.
pub(crate) struct DeltaEvaluator {
    diag: Vec<f64>,
    adjacency: Vec<Vec<(usize, f64)>>,
    abs_sum: f64,
}

impl DeltaEvaluator {
    pub(crate) fn new(instance: &QuboInstance) -> Self {
        let n = instance.size();
        let mut diag = vec![0.0; n];
        let mut adjacency = vec![Vec::new(); n];
        let mut abs_sum = 0.0;
        for ((row, col), value) in instance.entries() {
            abs_sum += value.abs();
            if row == col {
                diag[row] += value;
            } else {
                adjacency[row].push((col, value));
                adjacency[col].push((row, value));
            }
        }
        DeltaEvaluator { diag, adjacency, abs_sum }
    }

    /// Energy change from flipping bit `b` in `bits`.
    pub(crate) fn flip_delta(&self, bits: &[bool], b: usize) -> f64 {
        let mut sum = self.diag[b];
        for &(j, q) in &self.adjacency[b] {
            if bits[j] {
                sum += q;
            }
        }
        if bits[b] {
            -sum
        } else {
            sum
        }
    }

    /// Slack for comparing incrementally accumulated energies: generous
    /// against drift, far below any meaningful energy difference.
    pub(crate) fn drift_margin(&self) -> f64 {
        1e-9 * (1.0 + self.abs_sum)
    }
}

/// Enumerates all `2^size` assignments (Gray-code order with incremental
/// deltas) and returns the global minimum. Candidate records are confirmed
/// with an exact re-evaluation, so the result and its tie-break do not
/// depend on accumulated float drift.
pub fn solve_exhaustive(instance: &QuboInstance) -> Result<SolveResult, SolveError> {
    let size = instance.size();
    if size > EXHAUSTIVE_CAP {
        return Err(SolveError::SizeCapExceeded { size });
    }
    let started = Instant::now();
    let eval = DeltaEvaluator::new(instance);
    let margin = eval.drift_margin();

    let mut bits = vec![false; size];
    let mut energy = 0.0;
    let mut best_bits = bits.clone();
    let mut best_energy = instance.objective(&bits)?;

    for counter in 1u64..(1u64 << size) {
        let flip = counter.trailing_zeros() as usize;
        energy += eval.flip_delta(&bits, flip);
        bits[flip] = !bits[flip];
        if energy <= best_energy + margin {
            let exact = instance.objective(&bits)?;
            let better = exact.total_cmp(&best_energy).then_with(|| bits_le_cmp(&bits, &best_bits));
            if better == Ordering::Less {
                best_energy = exact;
                best_bits.copy_from_slice(&bits);
            }
        }
    }

    let samples = vec![Sample { bits: best_bits, energy: best_energy, multiplicity: 1 }];
    Ok(result_from_samples(samples, Backend::Exhaustive, started))
}

/// Dispatches to the requested backend. The remote endpoint may be
/// overridden through [`REMOTE_URL_ENV`]; selecting the remote backend
/// without any endpoint fails before any network activity.
pub fn solve(request: &SolveRequest) -> Result<SolveResult, SolveError> {
    match request.backend {
        Backend::Exhaustive => solve_exhaustive(&request.instance),
        Backend::Annealer => solve_annealer(&request.instance, &request.annealer, request.seed),
        Backend::Remote => {
            let endpoint = std::env::var(REMOTE_URL_ENV)
                .ok()
                .filter(|v| !v.is_empty())
                .or_else(|| request.remote.endpoint.clone())
                .ok_or(SolveError::RemoteEndpointUnset)?;
            solve_remote(
                &request.instance,
                request.num_reads,
                &endpoint,
                Duration::from_millis(request.remote.timeout_ms),
            )
        }
    }
}
