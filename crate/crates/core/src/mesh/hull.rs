//! Incremental 3D convex hull for points in near-spherical position.
//!
//! Points are inserted one at a time: faces visible from the new point are
//! removed and the horizon ring is re-fanned to the point. Visibility floods
//! outward from strictly visible faces through coplanar ones, which keeps
//! the visible region connected while still absorbing points that lie
//! exactly in the plane of an existing face (a regular (theta, phi) lattice
//! produces exactly coplanar quads, so this case is routine, not exotic).

use glam::DVec3;

use super::MeshError;

/// Distance below which a point counts as lying in a face plane.
const PLANE_EPS: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
struct Face {
    v: [usize; 3],
    /// Unit outward normal.
    normal: DVec3,
    alive: bool,
}

impl Face {
    fn directed_edges(&self) -> [(usize, usize); 3] {
        let [a, b, c] = self.v;
        [(a, b), (b, c), (c, a)]
    }
}

/// Returns the triangles of the 3D convex hull of `points`, wound so that
/// face normals point out of the hull. For points on a sphere this is also
/// the Delaunay triangulation of the sphere.
pub fn triangulate(points: &[DVec3]) -> Result<Vec<[usize; 3]>, MeshError> {
    if points.len() < 4 {
        return Err(MeshError::TooFewPoints(points.len()));
    }
    if let Some(i) = points.iter().position(|p| !p.is_finite()) {
        return Err(MeshError::NonFinite(i));
    }
    let scale = points
        .iter()
        .map(|p| p.abs().max_element())
        .fold(0.0f64, f64::max);
    let eps = PLANE_EPS * (1.0 + scale);

    let seed = initial_tetrahedron(points, eps)?;
    let mut faces = seed_faces(points, seed);

    for p in 0..points.len() {
        if seed.contains(&p) {
            continue;
        }
        insert_point(points, &mut faces, p, eps);
    }

    let hull: Vec<[usize; 3]> = faces.iter().filter(|f| f.alive).map(|f| f.v).collect();
    verify_closed(&hull)?;
    Ok(hull)
}

/// Picks four affinely independent points: lexicographic minimum, farthest
/// point, farthest from their line, farthest from their plane.
fn initial_tetrahedron(points: &[DVec3], eps: f64) -> Result<[usize; 4], MeshError> {
    let i0 = (0..points.len())
        .min_by(|&a, &b| {
            points[a]
                .to_array()
                .partial_cmp(&points[b].to_array())
                .expect("non-finite point")
        })
        .unwrap();

    let i1 = (0..points.len())
        .max_by(|&a, &b| {
            points[a]
                .distance_squared(points[i0])
                .total_cmp(&points[b].distance_squared(points[i0]))
        })
        .unwrap();
    let axis = points[i1] - points[i0];
    if axis.length() <= eps {
        return Err(MeshError::DegenerateInput);
    }

    let line_dist = |p: DVec3| axis.cross(p - points[i0]).length() / axis.length();
    let i2 = (0..points.len())
        .max_by(|&a, &b| line_dist(points[a]).total_cmp(&line_dist(points[b])))
        .unwrap();
    if line_dist(points[i2]) <= eps {
        return Err(MeshError::DegenerateInput);
    }

    let normal = (points[i1] - points[i0])
        .cross(points[i2] - points[i0])
        .normalize();
    let plane_dist = |p: DVec3| normal.dot(p - points[i0]);
    let i3 = (0..points.len())
        .max_by(|&a, &b| plane_dist(points[a]).abs().total_cmp(&plane_dist(points[b]).abs()))
        .unwrap();
    if plane_dist(points[i3]).abs() <= eps {
        return Err(MeshError::DegenerateInput);
    }

    Ok([i0, i1, i2, i3])
}

fn seed_faces(points: &[DVec3], seed: [usize; 4]) -> Vec<Face> {
    let centroid = (points[seed[0]] + points[seed[1]] + points[seed[2]] + points[seed[3]]) / 4.0;
    let tris = [
        [seed[0], seed[1], seed[2]],
        [seed[0], seed[1], seed[3]],
        [seed[0], seed[2], seed[3]],
        [seed[1], seed[2], seed[3]],
    ];
    tris.iter().map(|&t| make_face(points, t, centroid)).collect()
}

/// Builds a face wound so its normal points away from `interior`.
fn make_face(points: &[DVec3], mut v: [usize; 3], interior: DVec3) -> Face {
    let normal = face_normal(points, v);
    let to_face = points[v[0]] - interior;
    let normal = if normal.dot(to_face) < 0.0 {
        v.swap(1, 2);
        -normal
    } else {
        normal
    };
    Face { v, normal, alive: true }
}

fn face_normal(points: &[DVec3], v: [usize; 3]) -> DVec3 {
    (points[v[1]] - points[v[0]])
        .cross(points[v[2]] - points[v[0]])
        .normalize()
}

fn signed_dist(points: &[DVec3], face: &Face, p: usize) -> f64 {
    face.normal.dot(points[p] - points[face.v[0]])
}

fn insert_point(points: &[DVec3], faces: &mut Vec<Face>, p: usize, eps: f64) {
    let alive: Vec<usize> = (0..faces.len()).filter(|&f| faces[f].alive).collect();

    // Map each undirected edge to the (two) alive faces that share it.
    let mut edge_faces: std::collections::BTreeMap<(usize, usize), Vec<usize>> = std::collections::BTreeMap::new();
    for &f in &alive {
        for (a, b) in faces[f].directed_edges() {
            edge_faces.entry((a.min(b), a.max(b))).or_default().push(f);
        }
    }

    // Flood visibility from strictly visible faces through coplanar ones.
    let mut visible = vec![false; faces.len()];
    let mut queue: Vec<usize> = alive
        .iter()
        .copied()
        .filter(|&f| signed_dist(points, &faces[f], p) > eps)
        .collect();
    if queue.is_empty() {
        return; // interior or duplicate point
    }
    for &f in &queue {
        visible[f] = true;
    }
    while let Some(f) = queue.pop() {
        for (a, b) in faces[f].directed_edges() {
            for &g in &edge_faces[&(a.min(b), a.max(b))] {
                if !visible[g] && signed_dist(points, &faces[g], p) > -eps {
                    visible[g] = true;
                    queue.push(g);
                }
            }
        }
    }

    // Horizon: directed edges of visible faces whose cross-edge neighbor
    // stays. Keeping the visible face's edge direction keeps the new fan
    // wound outward.
    let mut new_faces = Vec::new();
    for &f in &alive {
        if !visible[f] {
            continue;
        }
        for (a, b) in faces[f].directed_edges() {
            let hidden_neighbor = edge_faces[&(a.min(b), a.max(b))]
                .iter()
                .any(|&g| g != f && !visible[g]);
            if hidden_neighbor {
                let v = [a, b, p];
                new_faces.push(Face { v, normal: face_normal(points, v), alive: true });
            }
        }
        faces[f].alive = false;
    }
    faces.extend(new_faces);
}

/// Every undirected edge of a closed triangulated hull is shared by exactly
/// two faces. A violation means the input broke the position assumptions.
fn verify_closed(hull: &[[usize; 3]]) -> Result<(), MeshError> {
    let mut counts: std::collections::BTreeMap<(usize, usize), usize> = std::collections::BTreeMap::new();
    for tri in hull {
        let [a, b, c] = *tri;
        for (u, v) in [(a, b), (b, c), (c, a)] {
            *counts.entry((u.min(v), u.max(v))).or_default() += 1;
        }
    }
    if counts.values().any(|&c| c != 2) {
        return Err(MeshError::DegenerateInput);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tetrahedron_hull() {
        let s = 1.0 / 3f64.sqrt();
        let points = vec![
            DVec3::new(s, s, s),
            DVec3::new(s, -s, -s),
            DVec3::new(-s, s, -s),
            DVec3::new(-s, -s, s),
        ];
        let hull = triangulate(&points).unwrap();
        assert_eq!(hull.len(), 4);
    }

    #[test]
    fn octahedron_hull() {
        let points = vec![
            DVec3::X,
            DVec3::NEG_X,
            DVec3::Y,
            DVec3::NEG_Y,
            DVec3::Z,
            DVec3::NEG_Z,
        ];
        let hull = triangulate(&points).unwrap();
        assert_eq!(hull.len(), 8);
        let mut edges = std::collections::BTreeSet::new();
        for tri in &hull {
            let [a, b, c] = *tri;
            for (u, v) in [(a, b), (b, c), (c, a)] {
                edges.insert((u.min(v), u.max(v)));
            }
        }
        assert_eq!(edges.len(), 12);
    }

    #[test]
    fn hull_normals_point_outward() {
        let points = vec![
            DVec3::X,
            DVec3::NEG_X,
            DVec3::Y,
            DVec3::NEG_Y,
            DVec3::Z,
            DVec3::NEG_Z,
        ];
        for tri in triangulate(&points).unwrap() {
            let n = face_normal(&points, tri);
            let centroid = (points[tri[0]] + points[tri[1]] + points[tri[2]]) / 3.0;
            assert!(n.dot(centroid) > 0.0, "face {tri:?} wound inward");
        }
    }

    #[test]
    fn rejects_coplanar_input() {
        let points = vec![
            DVec3::new(0.0, 0.0, 0.0),
            DVec3::new(1.0, 0.0, 0.0),
            DVec3::new(0.0, 1.0, 0.0),
            DVec3::new(1.0, 1.0, 0.0),
            DVec3::new(0.3, 0.7, 0.0),
        ];
        assert!(matches!(triangulate(&points), Err(MeshError::DegenerateInput)));
    }

    #[test]
    fn rejects_too_few_points() {
        let points = vec![DVec3::X, DVec3::Y, DVec3::Z];
        assert!(matches!(triangulate(&points), Err(MeshError::TooFewPoints(3))));
    }

    #[test]
    fn interior_points_are_absorbed() {
        let mut points = vec![
            DVec3::X,
            DVec3::NEG_X,
            DVec3::Y,
            DVec3::NEG_Y,
            DVec3::Z,
            DVec3::NEG_Z,
        ];
        points.push(DVec3::new(0.01, 0.02, 0.03));
        let hull = triangulate(&points).unwrap();
        assert_eq!(hull.len(), 8);
        assert!(hull.iter().all(|tri| !tri.contains(&6)));
    }
}
