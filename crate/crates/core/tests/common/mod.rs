//! Random inputs shared by the integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use scenetok::corpus;
use scenetok::geometry::compute_unit_cube_frame;
use scenetok::mesh::{TriangleMesh, Vec3};
use scenetok::pose::GravityBox;

/// A gravity-aligned box whose corners stay inside `[-1, 1]^3`, with every
/// side at least `min_side`.
pub fn box_inside(rng: &mut impl Rng, min_side: f64) -> GravityBox {
    let scale = Vec3::from_fn(|_, _| rng.gen_range(min_side..1.0));
    let yaw: f64 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let (s, c) = yaw.sin_cos();
    // horizontal half-extents of the rotated footprint
    let hx = 0.5 * (c.abs() * scale.x + s.abs() * scale.z);
    let hz = 0.5 * (s.abs() * scale.x + c.abs() * scale.z);
    let half = Vec3::new(hx, 0.5 * scale.y, hz);
    let center = Vec3::from_fn(|i, _| {
        let room = (1.0 - half[i]).max(0.0);
        if room > 0.0 {
            rng.gen_range(-room..room)
        } else {
            0.0
        }
    });
    GravityBox::new(center, scale, yaw).unwrap()
}

/// Any box with a positive size, not necessarily inside the unit cube.
pub fn any_box(rng: &mut impl Rng) -> GravityBox {
    let center = Vec3::from_fn(|_, _| rng.gen_range(-2.0..2.0));
    let scale = Vec3::from_fn(|_, _| rng.gen_range(0.01..3.0));
    GravityBox::new(center, scale, rng.gen_range(-4.0..4.0)).unwrap()
}

fn shuffle_mesh(rng: &mut impl Rng, m: &TriangleMesh) -> TriangleMesh {
    let mut perm: Vec<u32> = (0..m.vertices.len() as u32).collect();
    perm.shuffle(rng);
    let mut vertices = vec![Vec3::zeros(); m.vertices.len()];
    for (old, &new) in perm.iter().enumerate() {
        vertices[new as usize] = m.vertices[old];
    }
    let mut faces: Vec<[u32; 3]> = m
        .faces
        .iter()
        .map(|f| {
            let f = f.map(|i| perm[i as usize]);
            let r = rng.gen_range(0..3);
            [f[r], f[(r + 1) % 3], f[(r + 2) % 3]]
        })
        .collect();
    faces.shuffle(rng);
    TriangleMesh::new(vertices, faces)
}

/// Small manifold meshes, closed or with boundary, jittered, shuffled and
/// fitted to the unit cube.
pub fn small_manifold(rng: &mut impl Rng) -> TriangleMesh {
    let mut m = match rng.gen_range(0..8) {
        0 => corpus::tetrahedron(),
        1 => corpus::octahedron(),
        2 => corpus::icosphere(rng.gen_range(0..2)),
        3 => corpus::grid_box(Vec3::repeat(-0.7), Vec3::repeat(0.7), rng.gen_range(1..3)),
        4 => corpus::torus(rng.gen_range(5..10), rng.gen_range(3..6), 0.6, 0.25),
        5 => corpus::plane_grid(rng.gen_range(1..6), rng.gen_range(1..6)),
        6 => corpus::open_strip(rng.gen_range(1..10)),
        _ => corpus::cylinder(rng.gen_range(3..10), rng.gen_range(1..4), 0.5, 1.2),
    };
    if rng.gen_bool(0.3) && m.faces.len() > 4 {
        // punch a hole
        let i = rng.gen_range(0..m.faces.len());
        m.faces.remove(i);
    }
    let jitter = rng.gen_range(0.0..0.05);
    for p in &mut m.vertices {
        *p += Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0) * jitter);
    }
    let m = shuffle_mesh(rng, &m);
    compute_unit_cube_frame(&m.vertices).unwrap().apply_mesh(&m)
}

pub fn random_cloud(rng: &mut impl Rng, n: usize) -> Vec<Vec3> {
    let clustered = rng.gen_bool(0.5);
    (0..n)
        .map(|_| {
            let p = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            if clustered {
                // lattice points produce exact distance ties
                p.map(|c| (c * 8.0).round() / 8.0)
            } else {
                p
            }
        })
        .collect()
}
