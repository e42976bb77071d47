//! The iterative shape-optimization loop.
//!
//! Each iteration draws K candidate displacements per vertex inside a
//! shrinking radius `R_i = beta * rho_i * t^(-mu)`, fills the K^3
//! partial-loss table per simplex, builds the penalized QUBO, solves it,
//! decodes the one-hot bitstring into a configuration and deforms the mesh
//! accordingly. `rho_i` is a conservative per-vertex bound (one third of
//! the nearest-neighbor distance) that keeps adjacent triangles from
//! inverting for beta <= 1.
//!
//! Search modes follow evolutionary-strategy conventions: `comma` draws all
//! K mutations at random (the incumbent may be lost), `plus` reserves
//! mutation 0 as the zero displacement so the incumbent always survives.

use std::f64::consts::{PI, TAU};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use glam::DVec3;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acoustics::{build_partial_loss_table, total_loss, AcousticsError, Scene};
use crate::mesh::{export_mesh, Mesh, MeshError};
use crate::qubo::{build_qubo, choose_penalty, default_alpha, Configuration, QuboError};
use crate::rng::{derive_seed, derived_rng, stream};
use crate::solver::{solve, SolveError, SolveRequest, SolverSettings};

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("vertex {0} has no neighbors")]
    IsolatedVertex(usize),
    #[error("no feasible configuration found at iteration {t} after retries and re-rolls")]
    NoFeasibleConfiguration { t: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Acoustics(#[from] AcousticsError),
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("iteration {t} failed: {source}")]
    Aborted {
        t: usize,
        /// History up to the failed iteration, final mesh = last good mesh.
        partial: Box<RunHistory>,
        source: Box<OptimizeError>,
    },
}

/// `comma` = (1, K) search, `plus` = (1 + [K-1]) search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Comma,
    Plus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerParams {
    /// Candidate mutations per vertex.
    pub k: usize,
    /// Step-size control.
    pub beta: f64,
    /// Radius decay exponent.
    pub mu: f64,
    /// Iteration budget.
    pub iterations: usize,
    pub search_mode: SearchMode,
    pub rays_per_simplex: u32,
    pub seed: u64,
    pub solver: SolverSettings,
    /// Solver retries (and mutation re-rolls in comma mode) tolerated when
    /// a solve returns no feasible assignment.
    pub infeasible_retries: usize,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        OptimizerParams {
            k: 3,
            beta: 0.7,
            mu: 0.18,
            iterations: 30,
            search_mode: SearchMode::Comma,
            rays_per_simplex: 50,
            seed: 1,
            solver: SolverSettings::default(),
            infeasible_retries: 3,
        }
    }
}

impl OptimizerParams {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        let fail = |msg: String| Err(OptimizeError::InvalidParams(msg));
        if self.k == 0 {
            return fail("K must be >= 1".into());
        }
        if self.search_mode == SearchMode::Plus && self.k < 2 {
            return fail("plus mode reserves mutation 0 for the zero displacement, so K must be >= 2".into());
        }
        if self.beta.is_nan() || self.beta <= 0.0 {
            return fail(format!("beta must be positive, got {}", self.beta));
        }
        if self.mu.is_nan() || self.mu <= 0.0 {
            return fail(format!("mu must be positive, got {}", self.mu));
        }
        if self.iterations == 0 {
            return fail("iterations must be >= 1".into());
        }
        if self.rays_per_simplex == 0 {
            return fail("rays_per_simplex must be >= 1".into());
        }
        Ok(())
    }
}

/// K candidate displacements per vertex, vertex-major.
#[derive(Debug, Clone)]
pub struct MutationSet {
    k: usize,
    n_vertices: usize,
    displacements: Vec<DVec3>,
}

impl MutationSet {
    pub fn new(n_vertices: usize, k: usize, displacements: Vec<DVec3>) -> Self {
        assert_eq!(displacements.len(), n_vertices * k);
        MutationSet { k, n_vertices, displacements }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn displacement(&self, vertex: usize, j: usize) -> DVec3 {
        self.displacements[vertex * self.k + j]
    }

    /// All-zero displacements (every configuration is the identity).
    pub fn zeros(n_vertices: usize, k: usize) -> Self {
        MutationSet { k, n_vertices, displacements: vec![DVec3::ZERO; n_vertices * k] }
    }
}

/// Conservative convexity bound for one vertex: one third of the distance
/// to its nearest one-ring neighbor. Displacing the vertex by less than
/// this cannot invert or near-degenerate an adjacent triangle.
pub fn convexity_bound(mesh: &Mesh, vertex: usize) -> Result<f64, OptimizeError> {
    let neighbors = mesh.vertex_neighbors(vertex);
    if neighbors.is_empty() {
        return Err(OptimizeError::IsolatedVertex(vertex));
    }
    let position = mesh.position(vertex);
    let min_dist = neighbors
        .iter()
        .map(|&w| position.distance(mesh.position(w)))
        .fold(f64::INFINITY, f64::min);
    Ok(min_dist / 3.0)
}

/// Shrinking mutation radius `beta * rho * t^(-mu)`, `t >= 1`.
pub fn mutation_radius(t: usize, beta: f64, mu: f64, rho: f64) -> f64 {
    beta * rho * (t as f64).powf(-mu)
}

/// Draws K displacements per vertex: direction from uniform polar and
/// azimuthal angles, radius uniform in `[0, R_i)`. In plus mode the first
/// displacement of every vertex is forced to zero.
pub fn generate_mutations(
    mesh: &Mesh,
    t: usize,
    params: &OptimizerParams,
    rng: &mut impl Rng,
) -> Result<MutationSet, OptimizeError> {
    let n = mesh.vertex_count();
    let mut displacements = Vec::with_capacity(n * params.k);
    for vertex in 0..n {
        let rho = convexity_bound(mesh, vertex)?;
        let radius = mutation_radius(t, params.beta, params.mu, rho);
        for j in 0..params.k {
            if params.search_mode == SearchMode::Plus && j == 0 {
                displacements.push(DVec3::ZERO);
                continue;
            }
            let theta: f64 = rng.random::<f64>() * PI;
            let phi: f64 = rng.random::<f64>() * TAU;
            let r: f64 = rng.random::<f64>() * radius;
            let (sin_t, cos_t) = theta.sin_cos();
            let (sin_p, cos_p) = phi.sin_cos();
            displacements.push(r * DVec3::new(sin_t * cos_p, sin_t * sin_p, cos_t));
        }
    }
    Ok(MutationSet::new(n, params.k, displacements))
}

/// Applies a decoded configuration: vertex `i` moves by its chosen
/// displacement; adjacency is unchanged and normals are recomputed.
pub fn apply_configuration(
    mesh: &Mesh,
    mutations: &MutationSet,
    chosen: &Configuration,
) -> Result<Mesh, OptimizeError> {
    if chosen.n_vertices() != mesh.vertex_count() || mutations.n_vertices() != mesh.vertex_count() {
        return Err(OptimizeError::InvalidParams(format!(
            "configuration covers {} vertices, mutation set {}, mesh has {}",
            chosen.n_vertices(),
            mutations.n_vertices(),
            mesh.vertex_count()
        )));
    }
    let displacements: Vec<DVec3> = chosen
        .assignment
        .iter()
        .enumerate()
        .map(|(vertex, &j)| {
            if j < mutations.k() {
                Ok(mutations.displacement(vertex, j))
            } else {
                Err(OptimizeError::Qubo(QuboError::MutationOutOfRange { vertex, j, k: mutations.k() }))
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(mesh.apply_displacements(&displacements)?)
}

/// Seeds for every randomized stage of one iteration, derived from the run
/// seed. Public so oracle tests can rebuild the exact table and mutations
/// an iteration saw.
#[derive(Debug, Clone, Copy)]
pub struct IterationSeeds {
    pub mutation: u64,
    pub table: u64,
    pub eval: u64,
}

impl IterationSeeds {
    pub fn new(run_seed: u64, t: usize, reroll: usize) -> Self {
        IterationSeeds {
            mutation: derive_seed(run_seed, &[stream::MUTATION, t as u64, reroll as u64]),
            table: derive_seed(run_seed, &[stream::RAY_TABLE, t as u64, reroll as u64]),
            eval: derive_seed(run_seed, &[stream::RAY_EVAL, t as u64]),
        }
    }

    pub fn solve_attempt(run_seed: u64, t: usize, reroll: usize, attempt: usize) -> u64 {
        derive_seed(run_seed, &[stream::SOLVE_ATTEMPT, t as u64, reroll as u64, attempt as u64])
    }
}

/// Outcome of one iteration.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub t: usize,
    pub loss_before: f64,
    pub loss_after: f64,
    /// QUBO objective of the applied configuration.
    pub solver_energy: f64,
    /// False when the identity fallback was applied because no feasible
    /// assignment came back from the solver.
    pub feasible: bool,
    pub chosen: Configuration,
    pub wall: Duration,
}

/// Full run outcome.
#[derive(Debug, Clone)]
pub struct RunHistory {
    pub records: Vec<IterationRecord>,
    pub final_mesh: Mesh,
    pub initial_loss: f64,
    pub converged: bool,
}

impl RunHistory {
    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(self.initial_loss, |r| r.loss_after)
    }

    pub fn iterations_run(&self) -> usize {
        self.records.len()
    }
}

/// Runs one iteration against `mesh` at iteration index `t >= 1`,
/// generating mutations from the run seed. Returns the deformed mesh and
/// the record.
pub fn run_iteration(
    mesh: &Mesh,
    t: usize,
    params: &OptimizerParams,
    scene: &Scene,
) -> Result<(Mesh, IterationRecord), OptimizeError> {
    run_iteration_inner(mesh, t, params, scene, None)
}

/// As [`run_iteration`], but with a caller-supplied mutation set (re-rolls
/// are disabled: an infeasible dead end is an error).
pub fn run_iteration_with_mutations(
    mesh: &Mesh,
    t: usize,
    params: &OptimizerParams,
    scene: &Scene,
    mutations: &MutationSet,
) -> Result<(Mesh, IterationRecord), OptimizeError> {
    run_iteration_inner(mesh, t, params, scene, Some(mutations))
}

fn run_iteration_inner(
    mesh: &Mesh,
    t: usize,
    params: &OptimizerParams,
    scene: &Scene,
    fixed_mutations: Option<&MutationSet>,
) -> Result<(Mesh, IterationRecord), OptimizeError> {
    if t == 0 {
        return Err(OptimizeError::InvalidParams("iteration index starts at 1".into()));
    }
    params.validate()?;
    let started = Instant::now();
    let eval_seed = IterationSeeds::new(params.seed, t, 0).eval;
    let loss_before = total_loss(mesh, scene, params.rays_per_simplex, eval_seed);

    let max_rerolls = if fixed_mutations.is_some() {
        0
    } else if params.search_mode == SearchMode::Comma {
        params.infeasible_retries
    } else {
        0 // plus mode falls back to the identity instead of re-rolling
    };

    for reroll in 0..=max_rerolls {
        let seeds = IterationSeeds::new(params.seed, t, reroll);
        let generated;
        let mutations = match fixed_mutations {
            Some(m) => m,
            None => {
                let mut rng = derived_rng(seeds.mutation, &[]);
                generated = generate_mutations(mesh, t, params, &mut rng)?;
                &generated
            }
        };

        let table = build_partial_loss_table(mesh, mutations, scene, params.rays_per_simplex, seeds.table)?;
        let loss_only = build_qubo(mesh, &table, 1.0, 0.0)?;
        let alpha = default_alpha(&loss_only);
        let scaled = build_qubo(mesh, &table, alpha, 0.0)?;
        let lambda = choose_penalty(&scaled);
        let instance = scaled.with_penalty(lambda);

        // Solve, retrying with a fresh seed when the best assignment is
        // infeasible; failing that, keep the best feasible sample any
        // attempt returned.
        let mut applied: Option<(Configuration, f64)> = None;
        let mut best_feasible_sample: Option<(Configuration, f64)> = None;
        for attempt in 0..=params.infeasible_retries {
            let seed = IterationSeeds::solve_attempt(params.seed, t, reroll, attempt);
            let request = SolveRequest::new(instance.clone(), &params.solver, seed);
            let result = solve(&request)?;
            match instance.decode_bitstring(&result.best_bits) {
                Ok(configuration) => {
                    applied = Some((configuration, result.best_energy));
                    break;
                }
                Err(QuboError::Infeasible(_)) => {
                    // Samples are sorted, so the first feasible one is the
                    // best of this read.
                    for sample in &result.samples {
                        if let Ok(configuration) = instance.decode_bitstring(&sample.bits) {
                            if best_feasible_sample.as_ref().is_none_or(|(_, e)| sample.energy < *e) {
                                best_feasible_sample = Some((configuration, sample.energy));
                            }
                            break;
                        }
                    }
                }
                Err(other) => return Err(other.into()),
            }
        }
        let applied = applied.or(best_feasible_sample);

        let (chosen, solver_energy, feasible) = match applied {
            Some((configuration, energy)) => (configuration, energy, true),
            None if params.search_mode == SearchMode::Plus => {
                let identity = Configuration::identity(mesh.vertex_count());
                let energy = instance.feasible_objective(&identity)?;
                (identity, energy, false)
            }
            None => continue, // comma mode: re-roll mutations
        };

        let deformed = apply_configuration(mesh, mutations, &chosen)?;
        let loss_after = total_loss(&deformed, scene, params.rays_per_simplex, eval_seed);
        let record = IterationRecord {
            t,
            loss_before,
            loss_after,
            solver_energy,
            feasible,
            chosen,
            wall: started.elapsed(),
        };
        return Ok((deformed, record));
    }

    Err(OptimizeError::NoFeasibleConfiguration { t })
}

/// Writes per-iteration artifacts: `history.csv` (one row per iteration)
/// and `iter_<t>.obj` snapshots.
struct RunWriter {
    dir: PathBuf,
    history: BufWriter<File>,
}

impl RunWriter {
    const HEADER: &'static str = "t,loss_before,loss_after,solver_energy,feasible,wall_ms";

    fn create(dir: &Path) -> Result<Self, OptimizeError> {
        let io_err = |path: &Path, source: std::io::Error| OptimizeError::Io {
            path: path.display().to_string(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let history_path = dir.join("history.csv");
        let mut history = BufWriter::new(File::create(&history_path).map_err(|e| io_err(&history_path, e))?);
        writeln!(history, "{}", Self::HEADER).map_err(|e| io_err(&history_path, e))?;
        Ok(RunWriter { dir: dir.to_path_buf(), history })
    }

    fn record(&mut self, record: &IterationRecord) -> Result<(), OptimizeError> {
        let path = self.dir.join("history.csv");
        writeln!(
            self.history,
            "{},{},{},{},{},{}",
            record.t,
            record.loss_before,
            record.loss_after,
            record.solver_energy,
            record.feasible,
            record.wall.as_millis()
        )
        .and_then(|_| self.history.flush())
        .map_err(|e| OptimizeError::Io { path: path.display().to_string(), source: e })
    }

    fn snapshot(&self, t: usize, mesh: &Mesh) -> Result<(), OptimizeError> {
        Ok(export_mesh(mesh, self.dir.join(format!("iter_{t}.obj")))?)
    }
}

/// Runs up to `params.iterations` iterations, stopping early once the
/// total loss has been zero for three consecutive iterations. When
/// `out_dir` is set, `history.csv` and per-iteration `iter_<t>.obj`
/// snapshots are written there as the run progresses. An iteration failure
/// aborts the run with the partial history attached.
pub fn optimize(
    initial_mesh: &Mesh,
    params: &OptimizerParams,
    scene: &Scene,
    out_dir: Option<&Path>,
) -> Result<RunHistory, OptimizeError> {
    params.validate()?;
    initial_mesh.validate_closed()?;
    scene.microphone.validate()?;

    let mut writer = match out_dir {
        Some(dir) => Some(RunWriter::create(dir)?),
        None => None,
    };

    let initial_loss = total_loss(
        initial_mesh,
        scene,
        params.rays_per_simplex,
        IterationSeeds::new(params.seed, 1, 0).eval,
    );

    let mut mesh = initial_mesh.clone();
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut zero_streak = 0usize;
    let mut converged = false;

    for t in 1..=params.iterations {
        let step = run_iteration(&mesh, t, params, scene);
        let (next, record) = match step {
            Ok(ok) => ok,
            Err(source) => {
                let partial = RunHistory { records, final_mesh: mesh, initial_loss, converged: false };
                return Err(OptimizeError::Aborted { t, partial: Box::new(partial), source: Box::new(source) });
            }
        };
        if let Some(w) = writer.as_mut() {
            w.record(&record)?;
            w.snapshot(t, &next)?;
        }
        zero_streak = if record.loss_after == 0.0 { zero_streak + 1 } else { 0 };
        records.push(record);
        mesh = next;
        if zero_streak >= 3 {
            converged = true;
            break;
        }
    }

    Ok(RunHistory { records, final_mesh: mesh, initial_loss, converged })
}
