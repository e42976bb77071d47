//! Independent geometric oracles.
//!
//! Each oracle here re-derives a result through a deliberately different
//! route than the library: facet enumeration instead of incremental hull,
//! plane-then-barycentric instead of Moller-Trumbore, and an explicit
//! intersect-reflect-test ray tracer instead of the plane-projection
//! shortcut in `partial_loss`.

use glam::DVec3;
use rand::Rng;
use sonoshape::acoustics::{
    build_partial_loss_table, partial_loss, ray_hits_microphone, ray_triangle_intersect, reflect,
    sample_rays, Microphone, Monopole, Ray, Scene,
};
use sonoshape::mesh::triangulate;
use sonoshape::optimizer::{generate_mutations, MutationSet, OptimizerParams};
use sonoshape::rng::{derived_rng, stream};

fn random_unit(rng: &mut impl Rng) -> DVec3 {
    loop {
        let v = DVec3::new(
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        );
        let len = v.length();
        if len > 1e-3 && len <= 1.0 {
            return v / len;
        }
    }
}

/// Brute-force convex hull: a triple is a hull facet iff all other points
/// lie strictly on one side of its plane. O(n^4), usable as an oracle for
/// point sets without four near-coplanar points.
fn hull_by_facet_enumeration(points: &[DVec3]) -> Vec<[usize; 3]> {
    let n = points.len();
    let mut faces = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let normal = (points[b] - points[a]).cross(points[c] - points[a]);
                if normal.length() < 1e-12 {
                    continue;
                }
                let mut positive = 0usize;
                let mut negative = 0usize;
                for (i, p) in points.iter().enumerate() {
                    if i == a || i == b || i == c {
                        continue;
                    }
                    let d = normal.dot(*p - points[a]);
                    if d > 0.0 {
                        positive += 1;
                    } else if d < 0.0 {
                        negative += 1;
                    } else {
                        // Coplanar fourth point: ambiguous facet, bail out.
                        positive += 1;
                        negative += 1;
                    }
                }
                if positive == 0 || negative == 0 {
                    faces.push([a, b, c]);
                }
            }
        }
    }
    faces
}

fn normalized_face_set(faces: &[[usize; 3]]) -> std::collections::BTreeSet<[usize; 3]> {
    faces
        .iter()
        .map(|&[a, b, c]| {
            let mut f = [a, b, c];
            f.sort_unstable();
            f
        })
        .collect()
}

#[test]
fn hull_matches_facet_enumeration_on_random_sphere_points() {
    let mut rng = derived_rng(0xA001, &[]);
    for case in 0..100 {
        let n = rng.random_range(4usize..=50);
        let points: Vec<DVec3> = (0..n).map(|_| random_unit(&mut rng)).collect();
        let incremental = triangulate(&points).unwrap_or_else(|e| panic!("case {case}: {e}"));
        let oracle = hull_by_facet_enumeration(&points);
        assert_eq!(
            normalized_face_set(&incremental),
            normalized_face_set(&oracle),
            "case {case} with {n} points"
        );
    }
}

#[test]
fn hull_satisfies_euler_on_random_sphere_points() {
    let mut rng = derived_rng(0xA002, &[]);
    for _ in 0..50 {
        let n = rng.random_range(4usize..=50);
        let points: Vec<DVec3> = (0..n).map(|_| random_unit(&mut rng)).collect();
        let faces = triangulate(&points).unwrap();
        let mut edges = std::collections::BTreeSet::new();
        let mut vertices = std::collections::BTreeSet::new();
        for f in &faces {
            for (u, v) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                edges.insert((u.min(v), u.max(v)));
            }
            vertices.extend(f.iter().copied());
        }
        assert_eq!(vertices.len() + faces.len(), edges.len() + 2);
    }
}

/// Second-route intersection: intersect the ray with the triangle plane,
/// then decide containment with barycentric coordinates from dot products.
fn intersect_by_plane_barycentric(ray: &Ray, tri: [DVec3; 3]) -> Option<(f64, DVec3)> {
    let normal = (tri[1] - tri[0]).cross(tri[2] - tri[0]);
    let denom = ray.direction.dot(normal);
    if denom.abs() < 1e-16 {
        return None;
    }
    let t = (tri[0] - ray.origin).dot(normal) / denom;
    if t <= 1e-9 {
        return None;
    }
    let p = ray.at(t);
    let v0 = tri[1] - tri[0];
    let v1 = tri[2] - tri[0];
    let v2 = p - tri[0];
    let d00 = v0.dot(v0);
    let d01 = v0.dot(v1);
    let d11 = v1.dot(v1);
    let d20 = v2.dot(v0);
    let d21 = v2.dot(v1);
    let det = d00 * d11 - d01 * d01;
    let u = (d11 * d20 - d01 * d21) / det;
    let v = (d00 * d21 - d01 * d20) / det;
    let eps = 1e-12;
    if u >= -eps && v >= -eps && u + v <= 1.0 + eps {
        Some((t, p))
    } else {
        None
    }
}

#[test]
fn moller_trumbore_agrees_with_plane_barycentric_route() {
    let mut rng = derived_rng(0xA003, &[]);
    let mut hits = 0usize;
    for case in 0..1000 {
        let tri = [
            random_unit(&mut rng) * 2.0,
            random_unit(&mut rng) * 2.0,
            random_unit(&mut rng) * 2.0,
        ];
        let origin = random_unit(&mut rng) * 4.0;
        // Half the rays aim near the triangle so both branches get traffic.
        let direction = if case % 2 == 0 {
            ((tri[0] + tri[1] + tri[2]) / 3.0 - origin).normalize()
        } else {
            random_unit(&mut rng)
        };
        let ray = Ray { origin, direction };

        let ours = ray_triangle_intersect(&ray, tri);
        let oracle = intersect_by_plane_barycentric(&ray, tri);
        match (ours, oracle) {
            (None, None) => {}
            (Some((t1, p1)), Some((t2, p2))) => {
                hits += 1;
                assert!((t1 - t2).abs() < 1e-8, "case {case}: t {t1} vs {t2}");
                assert!(p1.distance(p2) < 1e-8, "case {case}");
            }
            (a, b) => {
                // The two routes may only disagree within their epsilon
                // bands; everywhere else this is a failure.
                let boundary = a.or(b).unwrap();
                let p = boundary.1;
                let bary_gap = barycentric_boundary_distance(p, tri);
                assert!(bary_gap < 1e-9, "case {case}: routes disagree away from the boundary");
            }
        }
    }
    assert!(hits >= 400, "only {hits} intersecting cases sampled");
}

fn barycentric_boundary_distance(p: DVec3, tri: [DVec3; 3]) -> f64 {
    let v0 = tri[1] - tri[0];
    let v1 = tri[2] - tri[0];
    let v2 = p - tri[0];
    let det = v0.dot(v0) * v1.dot(v1) - v0.dot(v1) * v0.dot(v1);
    let u = (v1.dot(v1) * v2.dot(v0) - v0.dot(v1) * v2.dot(v1)) / det;
    let v = (v0.dot(v0) * v2.dot(v1) - v0.dot(v1) * v2.dot(v0)) / det;
    u.abs().min(v.abs()).min((1.0 - u - v).abs())
}

/// Brute-force ray tracer sharing the library's sampler stream: for each
/// sampled ray, intersect the configured triangle explicitly, reflect at
/// the hit point, and test the microphone. Unilluminated and degenerate
/// cases score zero like the library.
fn partial_loss_by_explicit_tracing(
    triangle: [DVec3; 3],
    hint: DVec3,
    monopole: &Monopole,
    mic: &Microphone,
    n_rays: u32,
    rng: &mut impl Rng,
) -> f64 {
    let area = 0.5 * (triangle[1] - triangle[0]).cross(triangle[2] - triangle[0]).length();
    if area < 1e-12 {
        return 0.0;
    }
    let mut normal = (triangle[1] - triangle[0]).cross(triangle[2] - triangle[0]).normalize();
    if normal.dot(hint) < 0.0 {
        normal = -normal;
    }
    let centroid = (triangle[0] + triangle[1] + triangle[2]) / 3.0;
    if normal.dot(monopole.position - centroid) <= 0.0 {
        return 0.0;
    }
    let rays = sample_rays(monopole, triangle, n_rays, rng).unwrap();
    let mut hits = 0u32;
    for ray in &rays {
        // Here the hit point comes from explicit intersection, not from
        // projecting onto the sampled plane point.
        if let Some((_, point)) = ray_triangle_intersect(ray, triangle) {
            let reflected = Ray { origin: point, direction: reflect(ray.direction, normal) };
            if ray_hits_microphone(&reflected, mic) {
                hits += 1;
            }
        }
    }
    hits as f64 / n_rays as f64
}

fn section5_scene() -> Scene {
    Scene {
        monopole: Monopole { position: DVec3::new(2.5, 0.0, 0.0) },
        microphone: Microphone {
            center: DVec3::new(2.0, 0.0, 0.0),
            half_axis_u: DVec3::new(0.0, 2.0, 0.0),
            half_axis_v: DVec3::new(0.0, 0.0, 1.15),
        },
    }
}

#[test]
fn per_simplex_losses_match_an_explicit_ray_tracer() {
    let scene = section5_scene();
    let mesh = sonoshape::generate_sphere_mesh(6, 8).unwrap();
    let seed = 0xA004;
    let n_rays = 50;
    for s in 0..mesh.simplex_count() {
        let ours = partial_loss(
            mesh.simplex_positions(s),
            mesh.simplices()[s].normal,
            &scene.monopole,
            &scene.microphone,
            n_rays,
            &mut derived_rng(seed, &[stream::RAY_TABLE, s as u64, 0, 0, 0]),
        );
        let oracle = partial_loss_by_explicit_tracing(
            mesh.simplex_positions(s),
            mesh.simplices()[s].normal,
            &scene.monopole,
            &scene.microphone,
            n_rays,
            &mut derived_rng(seed, &[stream::RAY_TABLE, s as u64, 0, 0, 0]),
        );
        assert_eq!(ours, oracle, "simplex {s}");
    }
}

#[test]
fn mutated_table_matches_the_explicit_tracer_on_a_tetrahedron() {
    let scene = section5_scene();
    let s3 = 1.0 / 3f64.sqrt();
    let points = vec![
        DVec3::new(s3, s3, s3),
        DVec3::new(s3, -s3, -s3),
        DVec3::new(-s3, s3, -s3),
        DVec3::new(-s3, -s3, s3),
    ];
    let tris = triangulate(&points).unwrap();
    let mesh = sonoshape::Mesh::from_triangles(points, tris).unwrap();

    let params = OptimizerParams { k: 2, ..Default::default() };
    let mut mut_rng = derived_rng(0xA005, &[]);
    let mutations: MutationSet = generate_mutations(&mesh, 1, &params, &mut mut_rng).unwrap();

    let seed = 0xA006;
    let n_rays = 20;
    let table = build_partial_loss_table(&mesh, &mutations, &scene, n_rays, seed).unwrap();

    assert_eq!(table.values().len(), 4 * 8);
    for s in 0..4 {
        let simplex = &mesh.simplices()[s];
        let base = mesh.simplex_positions(s);
        for j0 in 0..2 {
            for j1 in 0..2 {
                for j2 in 0..2 {
                    let configured = [
                        base[0] + mutations.displacement(simplex.vertices[0], j0),
                        base[1] + mutations.displacement(simplex.vertices[1], j1),
                        base[2] + mutations.displacement(simplex.vertices[2], j2),
                    ];
                    let oracle = partial_loss_by_explicit_tracing(
                        configured,
                        simplex.normal,
                        &scene.monopole,
                        &scene.microphone,
                        n_rays,
                        &mut derived_rng(
                            seed,
                            &[stream::RAY_TABLE, s as u64, j0 as u64, j1 as u64, j2 as u64],
                        ),
                    );
                    assert_eq!(table.get(s, [j0, j1, j2]), oracle, "cell ({s},{j0},{j1},{j2})");
                }
            }
        }
    }
}
