//! Triangle surface meshes: spherical lattice generation, convex-hull
//! triangulation, edge adjacency, outward normals and vertex displacement.
//!
//! A [`Mesh`] is a closed orientable 2-manifold: every undirected edge is
//! shared by exactly two simplices and the Euler characteristic
//! `V - E + S` equals 2. Meshes are immutable once built; deforming
//! operations return a new value.

mod hull;
mod obj;

pub use hull::triangulate;
pub use obj::{export_mesh, import_mesh};

use std::collections::BTreeMap;
use std::f64::consts::PI;

use glam::DVec3;
use thiserror::Error;

/// Triangles with less area than this are treated as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("lattice {n_theta}x{n_phi} produces fewer than 4 distinct vertices")]
    LatticeTooSmall { n_theta: usize, n_phi: usize },
    #[error("need at least 4 non-coplanar points for triangulation, got {0}")]
    TooFewPoints(usize),
    #[error("input points are degenerate (coplanar or collinear)")]
    DegenerateInput,
    #[error("simplex {simplex} is degenerate (area {area:.3e} < {DEGENERATE_AREA:.0e})")]
    DegenerateSimplex { simplex: usize, area: f64 },
    #[error("mesh not closed: edges with adjacent simplex count != 2: {0:?}")]
    NotClosed(Vec<(usize, usize)>),
    #[error("simplex {simplex} references vertex {vertex} out of range (N={n})")]
    VertexOutOfRange { simplex: usize, vertex: usize, n: usize },
    #[error("simplex {0} repeats a vertex")]
    RepeatedVertex(usize),
    #[error("Euler characteristic violated: V={v} E={e} S={s}")]
    EulerViolation { v: usize, e: usize, s: usize },
    #[error("displacement list has {got} entries, mesh has {expected} vertices")]
    DisplacementLength { got: usize, expected: usize },
    #[error("non-finite coordinate in vertex {0}")]
    NonFinite(usize),
    #[error("refusing to export empty mesh")]
    EmptyMesh,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
}

/// A mesh vertex: position plus its stable id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub position: DVec3,
    pub index: usize,
}

/// A triangular surface element. `vertices` are wound counter-clockwise
/// when viewed from outside; `normal` follows the right-hand rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simplex {
    pub vertices: [usize; 3],
    pub normal: DVec3,
}

impl Simplex {
    /// The vertex of this simplex that is not an endpoint of `edge`.
    pub fn opposite_vertex(&self, edge: (usize, usize)) -> Option<usize> {
        self.vertices
            .iter()
            .copied()
            .find(|&v| v != edge.0 && v != edge.1)
    }

    /// Position of vertex id `v` within this simplex (0, 1 or 2).
    pub fn slot_of(&self, v: usize) -> Option<usize> {
        self.vertices.iter().position(|&w| w == v)
    }
}

/// A closed triangulated surface.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Vertex>,
    simplices: Vec<Simplex>,
    /// Undirected edges as (lo, hi) pairs, lexicographically sorted.
    edges: Vec<(usize, usize)>,
    /// Every edge maps to the exactly two simplices sharing it.
    edge_adjacency: BTreeMap<(usize, usize), [usize; 2]>,
}

impl Mesh {
    /// Builds a mesh from positions and triangle index triples, deriving
    /// adjacency and outward normals. Fails if the surface is not closed.
    pub fn from_triangles(positions: Vec<DVec3>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let mut mesh = Self::assemble(positions, triangles, true)?;
        mesh.orient_normals_outward()?;
        Ok(mesh)
    }

    /// Builds a mesh without requiring closedness. Open meshes cannot drive
    /// the optimizer; this exists for single-surface experiments where a
    /// lone reflector is evaluated directly.
    pub fn from_triangles_open(positions: Vec<DVec3>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let mut mesh = Self::assemble(positions, triangles, false)?;
        mesh.orient_normals_outward()?;
        Ok(mesh)
    }

    fn assemble(positions: Vec<DVec3>, triangles: Vec<[usize; 3]>, require_closed: bool) -> Result<Self, MeshError> {
        for (i, p) in positions.iter().enumerate() {
            if !p.is_finite() {
                return Err(MeshError::NonFinite(i));
            }
        }
        let n = positions.len();
        for (s, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= n {
                    return Err(MeshError::VertexOutOfRange { simplex: s, vertex: v, n });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::RepeatedVertex(s));
            }
        }

        let vertices = positions
            .into_iter()
            .enumerate()
            .map(|(index, position)| Vertex { position, index })
            .collect();
        let simplices = triangles
            .into_iter()
            .map(|vertices| Simplex { vertices, normal: DVec3::ZERO })
            .collect();

        let mut mesh = Mesh { vertices, simplices, edges: Vec::new(), edge_adjacency: BTreeMap::new() };
        mesh.rebuild_edge_adjacency(require_closed)?;
        if require_closed {
            mesh.check_euler()?;
        }
        Ok(mesh)
    }

    /// Recomputes the edge list and edge-to-simplex adjacency. For a closed
    /// mesh every edge must have exactly two adjacent simplices, which also
    /// forces `2E = 3S`.
    fn rebuild_edge_adjacency(&mut self, require_closed: bool) -> Result<(), MeshError> {
        let mut slots: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (s, simplex) in self.simplices.iter().enumerate() {
            let [a, b, c] = simplex.vertices;
            for (u, v) in [(a, b), (b, c), (c, a)] {
                let key = (u.min(v), u.max(v));
                slots.entry(key).or_default().push(s);
            }
        }

        if require_closed {
            let bad: Vec<(usize, usize)> = slots
                .iter()
                .filter(|(_, adj)| adj.len() != 2)
                .map(|(&e, _)| e)
                .collect();
            if !bad.is_empty() {
                return Err(MeshError::NotClosed(bad));
            }
        }

        self.edges = slots.keys().copied().collect();
        self.edge_adjacency = slots
            .into_iter()
            .filter(|(_, adj)| adj.len() == 2)
            .map(|(e, adj)| (e, [adj[0], adj[1]]))
            .collect();
        Ok(())
    }

    fn check_euler(&self) -> Result<(), MeshError> {
        let (v, e, s) = (self.vertices.len(), self.edges.len(), self.simplices.len());
        if v + s != e + 2 {
            return Err(MeshError::EulerViolation { v, e, s });
        }
        Ok(())
    }

    /// Recomputes every simplex normal as the normalized cross product of
    /// its edge vectors, flipping normal and winding where needed so the
    /// normal points away from the mesh centroid. Exact for convex meshes
    /// and for the star-shaped deformations this pipeline produces.
    /// Idempotent.
    pub fn orient_normals_outward(&mut self) -> Result<(), MeshError> {
        let centroid = self.centroid();
        for s in 0..self.simplices.len() {
            let [a, b, c] = self.simplices[s].vertices;
            let (pa, pb, pc) = (self.position(a), self.position(b), self.position(c));
            let cross = (pb - pa).cross(pc - pa);
            let area = 0.5 * cross.length();
            if area < DEGENERATE_AREA {
                return Err(MeshError::DegenerateSimplex { simplex: s, area });
            }
            let mut normal = cross / cross.length();
            let face_centroid = (pa + pb + pc) / 3.0;
            if normal.dot(face_centroid - centroid) < 0.0 {
                normal = -normal;
                self.simplices[s].vertices = [a, c, b];
            }
            self.simplices[s].normal = normal;
        }
        Ok(())
    }

    /// Moves every vertex by its displacement and recomputes normals.
    /// Topology (simplices, edges, adjacency) is unchanged.
    pub fn apply_displacements(&self, displacements: &[DVec3]) -> Result<Mesh, MeshError> {
        if displacements.len() != self.vertices.len() {
            return Err(MeshError::DisplacementLength { got: displacements.len(), expected: self.vertices.len() });
        }
        let mut moved = self.clone();
        for (vertex, dv) in moved.vertices.iter_mut().zip(displacements) {
            vertex.position += *dv;
            if !vertex.position.is_finite() {
                return Err(MeshError::NonFinite(vertex.index));
            }
        }
        moved.orient_normals_outward()?;
        Ok(moved)
    }

    /// Checks the closed-manifold invariants: every edge shared by exactly
    /// two simplices, `2E = 3S`, and `V - E + S = 2`.
    pub fn validate_closed(&self) -> Result<(), MeshError> {
        let bad: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter(|e| !self.edge_adjacency.contains_key(e))
            .copied()
            .collect();
        if !bad.is_empty() || self.edge_adjacency.len() != self.edges.len() {
            return Err(MeshError::NotClosed(bad));
        }
        if 2 * self.edges.len() != 3 * self.simplices.len() {
            return Err(MeshError::EulerViolation {
                v: self.vertices.len(),
                e: self.edges.len(),
                s: self.simplices.len(),
            });
        }
        self.check_euler()
    }

    pub fn centroid(&self) -> DVec3 {
        let sum: DVec3 = self.vertices.iter().map(|v| v.position).sum();
        sum / self.vertices.len().max(1) as f64
    }

    pub fn position(&self, vertex: usize) -> DVec3 {
        self.vertices[vertex].position
    }

    /// The three corner positions of simplex `s`, in winding order.
    pub fn simplex_positions(&self, s: usize) -> [DVec3; 3] {
        let [a, b, c] = self.simplices[s].vertices;
        [self.position(a), self.position(b), self.position(c)]
    }

    pub fn simplex_centroid(&self, s: usize) -> DVec3 {
        let [a, b, c] = self.simplex_positions(s);
        (a + b + c) / 3.0
    }

    /// One-ring neighbor vertex ids of `vertex`, ascending.
    pub fn vertex_neighbors(&self, vertex: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == vertex {
                    Some(b)
                } else if b == vertex {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.dedup();
        out
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// The two simplices adjacent to an undirected edge.
    pub fn edge_simplices(&self, edge: (usize, usize)) -> Option<[usize; 2]> {
        let key = (edge.0.min(edge.1), edge.0.max(edge.1));
        self.edge_adjacency.get(&key).copied()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn simplex_count(&self) -> usize {
        self.simplices.len()
    }
}

/// Generates a closed triangulated unit sphere from an `n_theta` x `n_phi`
/// rectangular lattice in spherical coordinates, mapped through
/// `x = sin(theta)cos(phi)`, `y = sin(theta)sin(phi)`, `z = cos(theta)`.
/// The `n_phi` coincident lattice points at each pole are merged into a
/// single pole vertex before triangulation; the phi seam closes naturally
/// because the 3D convex hull works on the mapped points directly.
pub fn generate_sphere_mesh(n_theta: usize, n_phi: usize) -> Result<Mesh, MeshError> {
    if n_theta < 3 || n_phi < 3 {
        return Err(MeshError::LatticeTooSmall { n_theta, n_phi });
    }
    // Interior rings plus two poles.
    let mut points = Vec::with_capacity((n_theta - 2) * n_phi + 2);
    points.push(DVec3::new(0.0, 0.0, 1.0));
    for i in 1..n_theta - 1 {
        let theta = PI * i as f64 / (n_theta - 1) as f64;
        let (sin_t, cos_t) = theta.sin_cos();
        for j in 0..n_phi {
            let phi = 2.0 * PI * j as f64 / n_phi as f64;
            let (sin_p, cos_p) = phi.sin_cos();
            points.push(DVec3::new(sin_t * cos_p, sin_t * sin_p, cos_t));
        }
    }
    points.push(DVec3::new(0.0, 0.0, -1.0));

    let triangles = triangulate(&points)?;
    Mesh::from_triangles(points, triangles)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn tetra_points() -> Vec<DVec3> {
        let s = 1.0 / 3f64.sqrt();
        vec![
            DVec3::new(s, s, s),
            DVec3::new(s, -s, -s),
            DVec3::new(-s, s, -s),
            DVec3::new(-s, -s, s),
        ]
    }

    pub(crate) fn tetra_mesh() -> Mesh {
        let points = tetra_points();
        let tris = triangulate(&points).unwrap();
        Mesh::from_triangles(points, tris).unwrap()
    }

    #[test]
    fn minimal_sphere_lattice_is_closed() {
        let mesh = generate_sphere_mesh(3, 3).unwrap();
        mesh.validate_closed().unwrap();
        assert_eq!(mesh.vertex_count(), 5);
    }

    #[test]
    fn sphere_vertices_have_unit_norm() {
        for (nt, np) in [(3, 3), (4, 5), (6, 8), (9, 12)] {
            let mesh = generate_sphere_mesh(nt, np).unwrap();
            for v in mesh.vertices() {
                assert!((v.position.length() - 1.0).abs() < 1e-12, "lattice {nt}x{np}");
            }
        }
    }

    #[test]
    fn lattice_6x8_counts() {
        // 4 interior rings of 8 plus 2 poles; E and S follow from Euler.
        let mesh = generate_sphere_mesh(6, 8).unwrap();
        assert_eq!(mesh.vertex_count(), 34);
        assert_eq!(mesh.edge_count(), 96);
        assert_eq!(mesh.simplex_count(), 64);
    }

    #[test]
    fn lattice_sweep_stays_closed() {
        // Lattice quads are exactly coplanar, so this sweeps the hull's
        // coplanar handling across resolutions.
        for nt in 3..=9 {
            for np in 3..=12 {
                let mesh = generate_sphere_mesh(nt, np).unwrap_or_else(|e| panic!("{nt}x{np}: {e}"));
                mesh.validate_closed().unwrap_or_else(|e| panic!("{nt}x{np}: {e}"));
                assert_eq!(mesh.vertex_count(), (nt - 2) * np + 2);
            }
        }
    }

    #[test]
    fn rejects_tiny_lattices() {
        assert!(matches!(generate_sphere_mesh(2, 5), Err(MeshError::LatticeTooSmall { .. })));
        assert!(matches!(generate_sphere_mesh(5, 2), Err(MeshError::LatticeTooSmall { .. })));
    }

    #[test]
    fn sphere_normals_point_outward() {
        let mesh = generate_sphere_mesh(5, 6).unwrap();
        for s in 0..mesh.simplex_count() {
            let n = mesh.simplices()[s].normal;
            assert!((n.length() - 1.0).abs() < 1e-9);
            assert!(n.dot(mesh.simplex_centroid(s)) > 0.0);
        }
    }

    #[test]
    fn symmetric_face_normal() {
        let points = vec![
            DVec3::new(1.0, 0.0, 0.0),
            DVec3::new(0.0, 1.0, 0.0),
            DVec3::new(0.0, 0.0, 1.0),
            DVec3::new(-0.5, -0.5, -0.5),
        ];
        let tris = triangulate(&points).unwrap();
        let mesh = Mesh::from_triangles(points, tris).unwrap();
        let s = mesh
            .simplices()
            .iter()
            .position(|s| !s.vertices.contains(&3))
            .expect("face opposite the fourth point");
        let expected = DVec3::ONE / 3f64.sqrt();
        assert!((mesh.simplices()[s].normal - expected).length() < 1e-12);
    }

    #[test]
    fn normals_are_unit_after_deformation() {
        let mesh = tetra_mesh();
        let dv = vec![
            DVec3::new(0.05, -0.02, 0.01),
            DVec3::new(-0.03, 0.04, 0.0),
            DVec3::new(0.0, 0.01, -0.06),
            DVec3::new(0.02, 0.02, 0.02),
        ];
        let moved = mesh.apply_displacements(&dv).unwrap();
        for s in moved.simplices() {
            assert!((s.normal.length() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn orienting_normals_is_idempotent() {
        let mut mesh = generate_sphere_mesh(4, 5).unwrap();
        let once = mesh.clone();
        mesh.orient_normals_outward().unwrap();
        for (a, b) in once.simplices().iter().zip(mesh.simplices()) {
            assert_eq!(a.vertices, b.vertices);
            assert_eq!(a.normal, b.normal);
        }
    }

    #[test]
    fn tetrahedron_adjacency() {
        let mesh = tetra_mesh();
        assert_eq!(mesh.edge_count(), 6);
        for &e in mesh.edges() {
            assert!(mesh.edge_simplices(e).is_some());
        }
    }

    #[test]
    fn closed_mesh_edge_identity() {
        let mesh = generate_sphere_mesh(5, 7).unwrap();
        assert_eq!(2 * mesh.edge_count(), 3 * mesh.simplex_count());
    }

    #[test]
    fn missing_face_reports_boundary_edges() {
        let points = tetra_points();
        let mut tris = triangulate(&points).unwrap();
        tris.pop();
        match Mesh::from_triangles(points, tris) {
            Err(MeshError::NotClosed(edges)) => assert_eq!(edges.len(), 3),
            other => panic!("expected NotClosed, got {other:?}"),
        }
    }

    #[test]
    fn zero_displacement_is_identity() {
        let mesh = tetra_mesh();
        let moved = mesh.apply_displacements(&[DVec3::ZERO; 4]).unwrap();
        for (a, b) in mesh.vertices().iter().zip(moved.vertices()) {
            assert_eq!(a.position, b.position);
        }
        for (a, b) in mesh.simplices().iter().zip(moved.simplices()) {
            assert_eq!(a.vertices, b.vertices);
            assert_eq!(a.normal, b.normal);
        }
    }

    #[test]
    fn moving_one_vertex_only_touches_adjacent_normals() {
        let mesh = generate_sphere_mesh(5, 6).unwrap();
        let mut dv = vec![DVec3::ZERO; mesh.vertex_count()];
        let moved_vertex = 7;
        dv[moved_vertex] = DVec3::new(1e-3, 0.0, 0.0);
        let moved = mesh.apply_displacements(&dv).unwrap();
        for (s, (a, b)) in mesh.simplices().iter().zip(moved.simplices()).enumerate() {
            if a.vertices.contains(&moved_vertex) {
                continue;
            }
            assert_eq!(a.normal, b.normal, "simplex {s} does not touch the moved vertex");
        }
    }

    #[test]
    fn displacement_length_checked() {
        let mesh = tetra_mesh();
        assert!(matches!(
            mesh.apply_displacements(&[DVec3::ZERO; 3]),
            Err(MeshError::DisplacementLength { .. })
        ));
    }
}
