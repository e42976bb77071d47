//! Ray-based sound model.
//!
//! Sound from a monopole source is approximated by straight rays. Each
//! mesh simplex is scored by sampling rays from the monopole onto the
//! triangle, reflecting them specularly, and counting the fraction that
//! crosses a rectangular microphone plane: the partial loss of that
//! simplex. Reflected rays are tested only against the microphone, never
//! re-intersected with the mesh (single-bounce model), and a simplex whose
//! outward normal faces away from the monopole contributes zero without
//! any rays being cast.
//!
//! All randomized entry points take a master seed and derive one generator
//! per (simplex, configuration) cell, so tables are reproducible and
//! independent of evaluation order and thread count.

use glam::DVec3;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{Mesh, DEGENERATE_AREA};
use crate::optimizer::MutationSet;
use crate::rng::{derived_rng, stream};

/// Rays must travel at least this far before a hit counts, which keeps a
/// reflected ray from hitting the surface it just left.
pub const RAY_MIN_T: f64 = 1e-9;

/// Barycentric slack when classifying a hit as inside the triangle.
const BARY_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AcousticsError {
    #[error("degenerate triangle (area < {DEGENERATE_AREA:.0e})")]
    DegenerateTriangle,
    #[error("microphone half-axes must be non-zero and orthogonal (u.v = {dot:.3e})")]
    BadMicrophone { dot: f64 },
    #[error("mutation set has K={table_k}, expected {mesh_k}")]
    MutationMismatch { table_k: usize, mesh_k: usize },
}

/// A point sound source emitting spherical waves, approximated as rays.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Monopole {
    pub position: DVec3,
}

/// A rectangularly bounded measurement plane: the rectangle spanned by
/// `center +/- half_axis_u +/- half_axis_v`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Microphone {
    pub center: DVec3,
    pub half_axis_u: DVec3,
    pub half_axis_v: DVec3,
}

impl Microphone {
    /// Half-axes must be finite, non-zero and orthogonal within 1e-9.
    pub fn validate(&self) -> Result<(), AcousticsError> {
        let (u, v) = (self.half_axis_u, self.half_axis_v);
        let dot = u.dot(v);
        let well_formed =
            self.center.is_finite() && u.is_finite() && v.is_finite() && u.length() > 0.0 && v.length() > 0.0;
        if !well_formed || dot.abs() > 1e-9 {
            return Err(AcousticsError::BadMicrophone { dot });
        }
        Ok(())
    }

    /// Unit normal of the microphone plane.
    pub fn normal(&self) -> DVec3 {
        self.half_axis_u.cross(self.half_axis_v).normalize()
    }
}

/// Monopole and microphone as one experiment context.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Scene {
    pub monopole: Monopole,
    pub microphone: Microphone,
}

/// A half-line with unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: DVec3,
    pub direction: DVec3,
}

impl Ray {
    pub fn new(origin: DVec3, direction: DVec3) -> Self {
        Ray { origin, direction: direction.normalize() }
    }

    pub fn at(&self, t: f64) -> DVec3 {
        self.origin + t * self.direction
    }
}

/// Per-simplex K^3 array of partial-loss fractions: entry
/// `(s, j0, j1, j2)` is the loss of simplex `s` when its first vertex
/// takes mutation `j0`, its second `j1` and its third `j2`.
#[derive(Debug, Clone)]
pub struct PartialLossTable {
    k: usize,
    n_simplices: usize,
    rays_per_sample: u32,
    values: Vec<f64>,
}

impl PartialLossTable {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_simplices(&self) -> usize {
        self.n_simplices
    }

    pub fn rays_per_sample(&self) -> u32 {
        self.rays_per_sample
    }

    pub fn get(&self, simplex: usize, j: [usize; 3]) -> f64 {
        self.values[self.flat(simplex, j)]
    }

    fn flat(&self, simplex: usize, j: [usize; 3]) -> usize {
        debug_assert!(j[0] < self.k && j[1] < self.k && j[2] < self.k);
        ((simplex * self.k + j[0]) * self.k + j[1]) * self.k + j[2]
    }

    /// Sum of the K^3 entries of one simplex.
    pub fn simplex_sum(&self, simplex: usize) -> f64 {
        let k3 = self.k * self.k * self.k;
        self.values[simplex * k3..(simplex + 1) * k3].iter().sum()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Builds a table from raw values, for tests and synthetic instances.
    /// `values` is simplex-major with the last mutation index fastest.
    pub fn from_values(n_simplices: usize, k: usize, rays_per_sample: u32, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n_simplices * k * k * k);
        PartialLossTable { k, n_simplices, rays_per_sample, values }
    }
}

/// Samples `n_rays` rays from the monopole toward points drawn uniformly
/// on the triangle (uniform barycentric sampling, folded so u + v <= 1).
pub fn sample_rays(
    monopole: &Monopole,
    triangle: [DVec3; 3],
    n_rays: u32,
    rng: &mut impl Rng,
) -> Result<Vec<Ray>, AcousticsError> {
    if triangle_area(triangle) < DEGENERATE_AREA {
        return Err(AcousticsError::DegenerateTriangle);
    }
    let e1 = triangle[1] - triangle[0];
    let e2 = triangle[2] - triangle[0];
    let mut rays = Vec::with_capacity(n_rays as usize);
    for _ in 0..n_rays {
        let mut u: f64 = rng.random();
        let mut v: f64 = rng.random();
        if u + v > 1.0 {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        let target = triangle[0] + u * e1 + v * e2;
        rays.push(Ray::new(monopole.position, target - monopole.position));
    }
    Ok(rays)
}

pub fn triangle_area(triangle: [DVec3; 3]) -> f64 {
    0.5 * (triangle[1] - triangle[0]).cross(triangle[2] - triangle[0]).length()
}

/// Moller-Trumbore ray/triangle intersection. Returns the parameter
/// `t > RAY_MIN_T` and the hit point for a hit on the triangle interior or
/// boundary (barycentric slack `BARY_EPS`), `None` otherwise.
pub fn ray_triangle_intersect(ray: &Ray, triangle: [DVec3; 3]) -> Option<(f64, DVec3)> {
    let e1 = triangle[1] - triangle[0];
    let e2 = triangle[2] - triangle[0];
    let pvec = ray.direction.cross(e2);
    let det = e1.dot(pvec);
    if det.abs() < 1e-16 {
        return None; // parallel to the triangle plane
    }
    let inv_det = 1.0 / det;
    let tvec = ray.origin - triangle[0];
    let u = tvec.dot(pvec) * inv_det;
    if !(-BARY_EPS..=1.0 + BARY_EPS).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(e1);
    let v = ray.direction.dot(qvec) * inv_det;
    if v < -BARY_EPS || u + v > 1.0 + BARY_EPS {
        return None;
    }
    let t = e2.dot(qvec) * inv_det;
    if t <= RAY_MIN_T {
        return None;
    }
    Some((t, ray.at(t)))
}

/// Specular reflection of unit `direction` about unit `normal`:
/// `r = d - 2 (d.n) n`.
pub fn reflect(direction: DVec3, normal: DVec3) -> DVec3 {
    direction - 2.0 * direction.dot(normal) * normal
}

/// Whether the ray crosses the microphone rectangle at some `t > RAY_MIN_T`.
/// Rays parallel to the plane (within 1e-12) never hit. Only reflected rays
/// should be tested; incoming rays are excluded by construction.
pub fn ray_hits_microphone(ray: &Ray, mic: &Microphone) -> bool {
    let normal = mic.half_axis_u.cross(mic.half_axis_v);
    let denom = ray.direction.dot(normal);
    if denom.abs() < 1e-12 * normal.length() {
        return false;
    }
    let t = (mic.center - ray.origin).dot(normal) / denom;
    if t <= RAY_MIN_T {
        return false;
    }
    let offset = ray.at(t) - mic.center;
    let alpha_u = offset.dot(mic.half_axis_u) / mic.half_axis_u.length_squared();
    let alpha_v = offset.dot(mic.half_axis_v) / mic.half_axis_v.length_squared();
    alpha_u.abs() <= 1.0 && alpha_v.abs() <= 1.0
}

/// Partial loss of one configured simplex: the fraction of `n_rays` rays,
/// cast from the monopole onto the (possibly mutated) triangle, whose
/// specular reflection crosses the microphone.
///
/// The configured triangle keeps the orientation of `base_normal_hint`
/// (its winding normal is flipped to agree with the hint), so mutations
/// cannot silently turn a face inside out. An unilluminated simplex
/// (outward normal facing away from the monopole) returns 0 without
/// casting; a degenerate configured triangle reflects nothing and returns
/// 0 with a warning.
pub fn partial_loss(
    triangle: [DVec3; 3],
    base_normal_hint: DVec3,
    monopole: &Monopole,
    mic: &Microphone,
    n_rays: u32,
    rng: &mut impl Rng,
) -> f64 {
    if n_rays == 0 {
        return 0.0;
    }
    if triangle_area(triangle) < DEGENERATE_AREA {
        log::warn!("degenerate configured triangle treated as reflecting nothing");
        return 0.0;
    }
    let mut normal = (triangle[1] - triangle[0])
        .cross(triangle[2] - triangle[0])
        .normalize();
    if normal.dot(base_normal_hint) < 0.0 {
        normal = -normal;
    }
    let centroid = (triangle[0] + triangle[1] + triangle[2]) / 3.0;
    if normal.dot(monopole.position - centroid) <= 0.0 {
        return 0.0; // not illuminated
    }
    let rays = sample_rays(monopole, triangle, n_rays, rng).expect("area checked above");
    let mut count = 0u32;
    for ray in &rays {
        // Each ray was aimed at a point on the triangle plane; recover the
        // hit point by intersecting with that plane and reflect there.
        let hit_t = (centroid - ray.origin).dot(normal) / ray.direction.dot(normal);
        let hit_point = ray.at(hit_t);
        let reflected = Ray { origin: hit_point, direction: reflect(ray.direction, normal) };
        if ray_hits_microphone(&reflected, mic) {
            count += 1;
        }
    }
    count as f64 / n_rays as f64
}

/// Total loss of the unmutated mesh: the sum of per-simplex partial losses
/// at the identity configuration. Per-simplex generators are derived from
/// `master_seed` exactly as [`build_partial_loss_table`] derives its
/// identity cells, so the two agree cell for cell.
pub fn total_loss(mesh: &Mesh, scene: &Scene, n_rays: u32, master_seed: u64) -> f64 {
    per_simplex_loss(mesh, scene, n_rays, master_seed).iter().sum()
}

/// Unmutated per-simplex losses, indexed by simplex id.
pub fn per_simplex_loss(mesh: &Mesh, scene: &Scene, n_rays: u32, master_seed: u64) -> Vec<f64> {
    let mut losses = vec![0.0; mesh.simplex_count()];
    losses
        .par_iter_mut()
        .enumerate()
        .for_each(|(s, out)| {
            let mut rng = derived_rng(master_seed, &[stream::RAY_TABLE, s as u64, 0, 0, 0]);
            *out = partial_loss(
                mesh.simplex_positions(s),
                mesh.simplices()[s].normal,
                &scene.monopole,
                &scene.microphone,
                n_rays,
                &mut rng,
            );
        });
    losses
}

/// Per-simplex loss plus the variant normalized to the maximum loss of any
/// simplex (all zeros when nothing is lost).
pub fn shade_partial_loss(
    mesh: &Mesh,
    scene: &Scene,
    n_rays: u32,
    master_seed: u64,
) -> Vec<(f64, f64)> {
    let losses = per_simplex_loss(mesh, scene, n_rays, master_seed);
    let max = losses.iter().copied().fold(0.0f64, f64::max);
    losses
        .into_iter()
        .map(|l| if max > 0.0 { (l, l / max) } else { (l, 0.0) })
        .collect()
}

/// Fills the K^3 partial-loss entries of every simplex for the given
/// mutation set. Cell `(s, j0, j1, j2)` uses a generator derived from
/// `(master_seed, s, j0, j1, j2)`, making the table deterministic and
/// independent of evaluation order.
pub fn build_partial_loss_table(
    mesh: &Mesh,
    mutations: &MutationSet,
    scene: &Scene,
    n_rays: u32,
    master_seed: u64,
) -> Result<PartialLossTable, AcousticsError> {
    if mutations.n_vertices() != mesh.vertex_count() {
        return Err(AcousticsError::MutationMismatch {
            table_k: mutations.n_vertices(),
            mesh_k: mesh.vertex_count(),
        });
    }
    let k = mutations.k();
    let k3 = k * k * k;
    let n_simplices = mesh.simplex_count();
    let mut values = vec![0.0; n_simplices * k3];

    values
        .par_chunks_mut(k3)
        .enumerate()
        .for_each(|(s, chunk)| {
            let simplex = &mesh.simplices()[s];
            let base = mesh.simplex_positions(s);
            for j0 in 0..k {
                for j1 in 0..k {
                    for j2 in 0..k {
                        let triangle = [
                            base[0] + mutations.displacement(simplex.vertices[0], j0),
                            base[1] + mutations.displacement(simplex.vertices[1], j1),
                            base[2] + mutations.displacement(simplex.vertices[2], j2),
                        ];
                        let mut rng = derived_rng(
                            master_seed,
                            &[stream::RAY_TABLE, s as u64, j0 as u64, j1 as u64, j2 as u64],
                        );
                        chunk[(j0 * k + j1) * k + j2] = partial_loss(
                            triangle,
                            simplex.normal,
                            &scene.monopole,
                            &scene.microphone,
                            n_rays,
                            &mut rng,
                        );
                    }
                }
            }
        });

    Ok(PartialLossTable { k, n_simplices, rays_per_sample: n_rays, values })
}
