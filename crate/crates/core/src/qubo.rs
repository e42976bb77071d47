//! QUBO construction from partial-loss tables, one-hot penalty, objective
//! evaluation, bitstring decoding and the Ising-form transform.
//!
//! Variables are one bit per (vertex, mutation) pair, flattened as
//! `vertex * K + mutation`. An edge (i1, i2) of the mesh contributes to the
//! off-diagonal entry for ((i1, j1), (i2, j2)) the sum, over the two
//! simplices adjacent to that edge, of the partial losses over all K
//! mutations of each simplex's third vertex, scaled by `alpha`. The one-hot
//! constraint "exactly one mutation per vertex" enters as `-lambda` on each
//! diagonal and `+2 lambda` on the off-diagonals inside a vertex's own K x K
//! block; the constant `lambda * N` dropped by this form shifts every
//! objective equally and cannot move the argmin.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acoustics::PartialLossTable;
use crate::mesh::Mesh;

#[derive(Debug, Error)]
pub enum QuboError {
    #[error("bit vector has {got} entries, instance has {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("loss table covers {table_k} mutations, instance expects {mesh_k}")]
    KMismatch { table_k: usize, mesh_k: usize },
    #[error("loss table covers {table} simplices, mesh has {mesh}")]
    SimplexMismatch { table: usize, mesh: usize },
    #[error("instance size {size} is not divisible by K={k}")]
    BadShape { size: usize, k: usize },
    #[error("entry ({row},{col}) is below the diagonal")]
    LowerTriangular { row: usize, col: usize },
    #[error("non-finite entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },
    #[error("infeasible assignment: vertices {0:?} are not one-hot")]
    Infeasible(Vec<usize>),
    #[error("configuration has {got} entries, expected {expected}")]
    ConfigurationLength { got: usize, expected: usize },
    #[error("configuration assigns mutation {j} at vertex {vertex}, K={k}")]
    MutationOutOfRange { vertex: usize, j: usize, k: usize },
}

/// A complete assignment of one mutation index (0-based, in `[0, K)`) to
/// every vertex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Configuration {
    pub assignment: Vec<usize>,
}

impl Configuration {
    pub fn identity(n_vertices: usize) -> Self {
        Configuration { assignment: vec![0; n_vertices] }
    }

    pub fn n_vertices(&self) -> usize {
        self.assignment.len()
    }

    /// The one-hot bit vector of this configuration for block size `k`.
    pub fn to_bits(&self, k: usize) -> Vec<bool> {
        let mut bits = vec![false; self.assignment.len() * k];
        for (vertex, &j) in self.assignment.iter().enumerate() {
            bits[vertex * k + j] = true;
        }
        bits
    }
}

/// An upper-triangular QUBO instance over `size = N * K` binary variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuboInstance {
    size: usize,
    k: usize,
    /// Upper-triangular entries: key `(row, col)` with `row <= col`.
    entries: BTreeMap<(usize, usize), f64>,
    alpha: f64,
    lambda: f64,
}

impl QuboInstance {
    /// Builds an instance from raw upper-triangular entries. `size` must be
    /// a multiple of `k`; entries below the diagonal or non-finite are
    /// rejected.
    pub fn from_entries(
        size: usize,
        k: usize,
        entries: impl IntoIterator<Item = ((usize, usize), f64)>,
        alpha: f64,
        lambda: f64,
    ) -> Result<Self, QuboError> {
        if k == 0 || !size.is_multiple_of(k) {
            return Err(QuboError::BadShape { size, k });
        }
        let mut map = BTreeMap::new();
        for ((row, col), value) in entries {
            if row > col {
                return Err(QuboError::LowerTriangular { row, col });
            }
            if !value.is_finite() {
                return Err(QuboError::NonFinite { row, col });
            }
            if value != 0.0 {
                *map.entry((row, col)).or_insert(0.0) += value;
            }
        }
        Ok(QuboInstance { size, k, entries: map, alpha, lambda })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_vertices(&self) -> usize {
        self.size / self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Flat variable index of (vertex, mutation).
    pub fn flat_index(&self, vertex: usize, mutation: usize) -> usize {
        vertex * self.k + mutation
    }

    /// Inverse of [`flat_index`](Self::flat_index).
    pub fn vertex_mutation(&self, flat: usize) -> (usize, usize) {
        (flat / self.k, flat % self.k)
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.entries.get(&(row, col)).copied().unwrap_or(0.0)
    }

    /// Upper-triangular non-zero entries in deterministic (row, col) order.
    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.entries.iter().map(|(&rc, &v)| (rc, v))
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Largest absolute entry, 0 for an empty matrix.
    pub fn max_abs_entry(&self) -> f64 {
        self.entries.values().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `x^T Q x` with the upper-triangular convention: each unordered pair
    /// is counted once.
    pub fn objective(&self, bits: &[bool]) -> Result<f64, QuboError> {
        if bits.len() != self.size {
            return Err(QuboError::LengthMismatch { got: bits.len(), expected: self.size });
        }
        let mut total = 0.0;
        for (&(row, col), &value) in &self.entries {
            if bits[row] && bits[col] {
                total += value;
            }
        }
        Ok(total)
    }

    /// Objective of a complete configuration via its one-hot encoding. For
    /// feasible vectors the penalty part contributes exactly `-lambda * N`.
    pub fn feasible_objective(&self, configuration: &Configuration) -> Result<f64, QuboError> {
        if configuration.n_vertices() != self.n_vertices() {
            return Err(QuboError::ConfigurationLength {
                got: configuration.n_vertices(),
                expected: self.n_vertices(),
            });
        }
        for (vertex, &j) in configuration.assignment.iter().enumerate() {
            if j >= self.k {
                return Err(QuboError::MutationOutOfRange { vertex, j, k: self.k });
            }
        }
        self.objective(&configuration.to_bits(self.k))
    }

    /// Decodes a bit vector into a configuration, requiring every vertex
    /// block to be exactly one-hot. Violating vertices are reported so the
    /// caller can resample.
    pub fn decode_bitstring(&self, bits: &[bool]) -> Result<Configuration, QuboError> {
        if bits.len() != self.size {
            return Err(QuboError::LengthMismatch { got: bits.len(), expected: self.size });
        }
        let mut assignment = Vec::with_capacity(self.n_vertices());
        let mut violations = Vec::new();
        for vertex in 0..self.n_vertices() {
            let block = &bits[vertex * self.k..(vertex + 1) * self.k];
            let ones = block.iter().filter(|&&b| b).count();
            if ones == 1 {
                assignment.push(block.iter().position(|&b| b).unwrap());
            } else {
                violations.push(vertex);
                assignment.push(0);
            }
        }
        if violations.is_empty() {
            Ok(Configuration { assignment })
        } else {
            Err(QuboError::Infeasible(violations))
        }
    }

    /// Returns this instance with the one-hot penalty re-applied at a new
    /// `lambda` (the loss-derived entries are kept unchanged).
    pub fn with_penalty(&self, lambda: f64) -> QuboInstance {
        let mut out = self.clone();
        let delta = lambda - self.lambda;
        for vertex in 0..self.n_vertices() {
            for j in 0..self.k {
                let flat = self.flat_index(vertex, j);
                *out.entries.entry((flat, flat)).or_insert(0.0) += -delta;
                for j2 in j + 1..self.k {
                    let flat2 = self.flat_index(vertex, j2);
                    *out.entries.entry((flat, flat2)).or_insert(0.0) += 2.0 * delta;
                }
            }
        }
        out.entries.retain(|_, v| *v != 0.0);
        out.lambda = lambda;
        out
    }
}

/// Builds the QUBO for one iteration: loss terms on edge off-diagonals per
/// the partial-loss aggregation described in the module docs, then the
/// one-hot penalty within each vertex block.
pub fn build_qubo(
    mesh: &Mesh,
    table: &PartialLossTable,
    alpha: f64,
    lambda: f64,
) -> Result<QuboInstance, QuboError> {
    let k = table.k();
    if table.n_simplices() != mesh.simplex_count() {
        return Err(QuboError::SimplexMismatch { table: table.n_simplices(), mesh: mesh.simplex_count() });
    }
    let n = mesh.vertex_count();
    let size = n * k;
    let mut entries: BTreeMap<(usize, usize), f64> = BTreeMap::new();

    for &(v1, v2) in mesh.edges() {
        let adjacent = mesh
            .edge_simplices((v1, v2))
            .expect("closed mesh edge has two simplices");
        for j1 in 0..k {
            for j2 in 0..k {
                let mut sum = 0.0;
                for &s in &adjacent {
                    let simplex = &mesh.simplices()[s];
                    let slot1 = simplex.slot_of(v1).expect("edge endpoint in simplex");
                    let slot2 = simplex.slot_of(v2).expect("edge endpoint in simplex");
                    let slot3 = 3 - slot1 - slot2;
                    let mut j = [0usize; 3];
                    j[slot1] = j1;
                    j[slot2] = j2;
                    for third in 0..k {
                        j[slot3] = third;
                        sum += table.get(s, j);
                    }
                }
                if sum != 0.0 {
                    let row = v1 * k + j1;
                    let col = v2 * k + j2;
                    debug_assert!(row < col, "edges are stored with v1 < v2");
                    *entries.entry((row, col)).or_insert(0.0) += alpha * sum;
                }
            }
        }
    }

    let loss_only = QuboInstance { size, k, entries, alpha, lambda: 0.0 };
    Ok(loss_only.with_penalty(lambda))
}

/// The default energy scale: normalizes the largest loss-derived entry to
/// magnitude 1 so instances stay well-scaled for any backend.
pub fn default_alpha(loss_only: &QuboInstance) -> f64 {
    let max = loss_only.max_abs_entry();
    if max > 0.0 {
        1.0 / max
    } else {
        1.0
    }
}

/// A certified one-hot penalty: `1 +` the sum of absolute loss-derived
/// entries. No bit flip that breaks one-hot can gain more than the total
/// loss mass, so every global minimum of the penalized instance is
/// feasible.
pub fn choose_penalty(loss_only: &QuboInstance) -> f64 {
    1.0 + loss_only.entries.values().map(|v| v.abs()).sum::<f64>()
}

/// Ising form of a QUBO: `x^T Q x = sum h_i s_i + sum J_ij s_i s_j + offset`
/// under `x_i = (s_i + 1) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingInstance {
    pub h: Vec<f64>,
    /// Strictly upper-triangular couplings.
    pub j: BTreeMap<(usize, usize), f64>,
    pub offset: f64,
}

impl IsingInstance {
    pub fn energy(&self, spins: &[i8]) -> f64 {
        let linear: f64 = self.h.iter().zip(spins).map(|(h, &s)| h * s as f64).sum();
        let coupled: f64 = self
            .j
            .iter()
            .map(|(&(a, b), &j)| j * spins[a] as f64 * spins[b] as f64)
            .sum();
        linear + coupled + self.offset
    }
}

/// Substitutes `x = (s + 1) / 2` into the quadratic form.
pub fn qubo_to_ising(q: &QuboInstance) -> IsingInstance {
    let mut h = vec![0.0; q.size()];
    let mut j: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut offset = 0.0;
    for ((row, col), value) in q.entries() {
        if row == col {
            // Q_ii x_i = Q_ii (s_i + 1) / 2
            h[row] += value / 2.0;
            offset += value / 2.0;
        } else {
            // Q_ij x_i x_j = Q_ij (s_i s_j + s_i + s_j + 1) / 4
            *j.entry((row, col)).or_insert(0.0) += value / 4.0;
            h[row] += value / 4.0;
            h[col] += value / 4.0;
            offset += value / 4.0;
        }
    }
    j.retain(|_, v| *v != 0.0);
    IsingInstance { h, j, offset }
}
