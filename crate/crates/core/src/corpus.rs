//! Small procedurally built meshes used as a test and benchmark corpus.
//!
//! Every mesh fits inside `[-1, 1]^3`. Closed shapes are consistently
//! oriented with outward normals.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::mesh::{TriangleMesh, Vec3};

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub mesh: TriangleMesh,
}

pub fn triangle() -> TriangleMesh {
    TriangleMesh::new(
        vec![
            Vec3::new(-0.8, -0.6, 0.1),
            Vec3::new(0.7, -0.5, 0.0),
            Vec3::new(0.1, 0.9, -0.2),
        ],
        vec![[0, 1, 2]],
    )
}

/// Unit square in the xy-plane split into two triangles.
pub fn unit_square() -> TriangleMesh {
    TriangleMesh::new(
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
    )
}

pub fn tetrahedron() -> TriangleMesh {
    let s = 0.9;
    TriangleMesh::new(
        vec![
            Vec3::new(s, s, s),
            Vec3::new(s, -s, -s),
            Vec3::new(-s, s, -s),
            Vec3::new(-s, -s, s),
        ],
        vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
    )
}

/// Axis-aligned box from `lo` to `hi`, each side split into `n x n` quads.
pub fn grid_box(lo: Vec3, hi: Vec3, n: usize) -> TriangleMesh {
    let mut b = Builder::default();
    // (normal axis, sign) with the in-plane axes ordered for outward winding
    let sides = [
        (0, 1.0, 1, 2),
        (0, -1.0, 2, 1),
        (1, 1.0, 2, 0),
        (1, -1.0, 0, 2),
        (2, 1.0, 0, 1),
        (2, -1.0, 1, 0),
    ];
    for (axis, sign, u_ax, v_ax) in sides {
        let mut id = vec![vec![0u32; n + 1]; n + 1];
        for (i, row) in id.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                let mut p = Vec3::zeros();
                p[axis] = if sign > 0.0 { hi[axis] } else { lo[axis] };
                p[u_ax] = lo[u_ax] + (hi[u_ax] - lo[u_ax]) * i as f64 / n as f64;
                p[v_ax] = lo[v_ax] + (hi[v_ax] - lo[v_ax]) * j as f64 / n as f64;
                *slot = b.vertex(p);
            }
        }
        for i in 0..n {
            for j in 0..n {
                let (a, c, d, e) = (id[i][j], id[i + 1][j], id[i + 1][j + 1], id[i][j + 1]);
                b.faces.push([a, c, d]);
                b.faces.push([a, d, e]);
            }
        }
    }
    b.finish()
}

/// The 12-triangle cube `[-0.5, 0.5]^3`.
pub fn cube() -> TriangleMesh {
    grid_box(Vec3::repeat(-0.5), Vec3::repeat(0.5), 1)
}

/// Icosahedron subdivided `level` times and projected onto a sphere of
/// radius 0.9; `20 * 4^level` faces.
pub fn icosphere(level: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ];
    let mut vertices: Vec<Vec3> = raw
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Vec3>| {
            let key = if a < b { (a, b) } else { (b, a) };
            *mid.entry(key).or_insert_with(|| {
                vertices.push(((vertices[a as usize] + vertices[b as usize]) * 0.5).normalize());
                vertices.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(vertices.into_iter().map(|v| v * 0.9).collect(), faces)
}

/// Latitude/longitude sphere with poles.
pub fn uv_sphere(rings: usize, segments: usize, radius: f64) -> TriangleMesh {
    let mut b = Builder::default();
    let top = b.vertex(Vec3::new(0.0, radius, 0.0));
    let mut grid = Vec::new();
    for r in 1..rings {
        let phi = PI * r as f64 / rings as f64;
        let row: Vec<u32> = (0..segments)
            .map(|s| {
                let th = 2.0 * PI * s as f64 / segments as f64;
                b.vertex(Vec3::new(
                    radius * phi.sin() * th.cos(),
                    radius * phi.cos(),
                    radius * phi.sin() * th.sin(),
                ))
            })
            .collect();
        grid.push(row);
    }
    let bottom = b.vertex(Vec3::new(0.0, -radius, 0.0));
    for s in 0..segments {
        let s1 = (s + 1) % segments;
        b.faces.push([top, grid[0][s1], grid[0][s]]);
        for r in 0..grid.len() - 1 {
            let (a, c) = (&grid[r], &grid[r + 1]);
            b.faces.push([a[s], a[s1], c[s1]]);
            b.faces.push([a[s], c[s1], c[s]]);
        }
        let last = grid.last().unwrap();
        b.faces.push([bottom, last[s], last[s1]]);
    }
    b.finish()
}

pub fn torus(major: usize, minor: usize, big_r: f64, small_r: f64) -> TriangleMesh {
    let mut b = Builder::default();
    let mut id = vec![vec![0u32; minor]; major];
    for (i, row) in id.iter_mut().enumerate() {
        let u = 2.0 * PI * i as f64 / major as f64;
        for (j, slot) in row.iter_mut().enumerate() {
            let v = 2.0 * PI * j as f64 / minor as f64;
            let r = big_r + small_r * v.cos();
            *slot = b.vertex(Vec3::new(r * u.cos(), small_r * v.sin(), r * u.sin()));
        }
    }
    for i in 0..major {
        for j in 0..minor {
            let (i1, j1) = ((i + 1) % major, (j + 1) % minor);
            b.faces.push([id[i][j], id[i][j1], id[i1][j1]]);
            b.faces.push([id[i][j], id[i1][j1], id[i1][j]]);
        }
    }
    b.finish()
}

/// Open tube around the y axis (no caps).
pub fn cylinder(segments: usize, stacks: usize, radius: f64, height: f64) -> TriangleMesh {
    let mut b = Builder::default();
    let mut id = vec![vec![0u32; segments]; stacks + 1];
    for (k, row) in id.iter_mut().enumerate() {
        let y = -height / 2.0 + height * k as f64 / stacks as f64;
        for (s, slot) in row.iter_mut().enumerate() {
            let th = 2.0 * PI * s as f64 / segments as f64;
            *slot = b.vertex(Vec3::new(radius * th.cos(), y, radius * th.sin()));
        }
    }
    for k in 0..stacks {
        for s in 0..segments {
            let s1 = (s + 1) % segments;
            b.faces.push([id[k][s], id[k + 1][s], id[k + 1][s1]]);
            b.faces.push([id[k][s], id[k + 1][s1], id[k][s1]]);
        }
    }
    b.finish()
}

/// Closed cone: apex up, fan-triangulated base.
pub fn cone(segments: usize) -> TriangleMesh {
    let mut b = Builder::default();
    let apex = b.vertex(Vec3::new(0.0, 0.8, 0.0));
    let base = b.vertex(Vec3::new(0.0, -0.8, 0.0));
    let ring: Vec<u32> = (0..segments)
        .map(|s| {
            let th = 2.0 * PI * s as f64 / segments as f64;
            b.vertex(Vec3::new(0.7 * th.cos(), -0.8, 0.7 * th.sin()))
        })
        .collect();
    for s in 0..segments {
        let s1 = (s + 1) % segments;
        b.faces.push([apex, ring[s1], ring[s]]);
        b.faces.push([base, ring[s], ring[s1]]);
    }
    b.finish()
}

/// Flat `n x m` grid in the xz-plane (open surface with boundary).
pub fn plane_grid(n: usize, m: usize) -> TriangleMesh {
    let mut b = Builder::default();
    let mut id = vec![vec![0u32; m + 1]; n + 1];
    for (i, row) in id.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            let x = -0.9 + 1.8 * i as f64 / n as f64;
            let z = -0.9 + 1.8 * j as f64 / m as f64;
            *slot = b.vertex(Vec3::new(x, 0.05 * (3.0 * x).sin() * (2.0 * z).cos(), z));
        }
    }
    for i in 0..n {
        for j in 0..m {
            b.faces.push([id[i][j], id[i][j + 1], id[i + 1][j + 1]]);
            b.faces.push([id[i][j], id[i + 1][j + 1], id[i + 1][j]]);
        }
    }
    b.finish()
}

/// A single row of triangles.
pub fn open_strip(len: usize) -> TriangleMesh {
    let mut b = Builder::default();
    let top: Vec<u32> = (0..=len)
        .map(|i| b.vertex(Vec3::new(-0.9 + 1.8 * i as f64 / len as f64, 0.2, 0.0)))
        .collect();
    let bot: Vec<u32> = (0..=len)
        .map(|i| b.vertex(Vec3::new(-0.9 + 1.8 * i as f64 / len as f64, -0.2, 0.1)))
        .collect();
    for i in 0..len {
        b.faces.push([bot[i], bot[i + 1], top[i + 1]]);
        b.faces.push([bot[i], top[i + 1], top[i]]);
    }
    b.finish()
}

/// Three triangles hinged on one edge: a non-manifold edge.
pub fn fin_triple() -> TriangleMesh {
    TriangleMesh::new(
        vec![
            Vec3::new(0.0, -0.5, 0.0),
            Vec3::new(0.0, 0.5, 0.0),
            Vec3::new(0.8, 0.0, 0.0),
            Vec3::new(-0.4, 0.0, 0.7),
            Vec3::new(-0.4, 0.0, -0.7),
        ],
        vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]],
    )
}

/// Two triangles touching at one vertex.
pub fn bowtie() -> TriangleMesh {
    TriangleMesh::new(
        vec![
            Vec3::zeros(),
            Vec3::new(0.8, 0.3, 0.0),
            Vec3::new(0.8, -0.3, 0.0),
            Vec3::new(-0.8, 0.3, 0.1),
            Vec3::new(-0.8, -0.3, 0.1),
        ],
        vec![[0, 2, 1], [0, 3, 4]],
    )
}

/// A twisted band whose faces cannot be oriented consistently.
pub fn mobius(segments: usize) -> TriangleMesh {
    let mut b = Builder::default();
    let mut inner = Vec::new();
    let mut outer = Vec::new();
    for s in 0..segments {
        let u = 2.0 * PI * s as f64 / segments as f64;
        for (w, dst) in [(-0.25, &mut inner), (0.25, &mut outer)] {
            let r = 0.6 + w * (u / 2.0).cos();
            dst.push(b.vertex(Vec3::new(r * u.cos(), w * (u / 2.0).sin(), r * u.sin())));
        }
    }
    for s in 0..segments {
        let (a, c) = (inner[s], outer[s]);
        let (d, e) = if s + 1 < segments {
            (inner[s + 1], outer[s + 1])
        } else {
            // the twist swaps the two rails
            (outer[0], inner[0])
        };
        b.faces.push([a, d, e]);
        b.faces.push([a, e, c]);
    }
    b.finish()
}

/// Low-poly chair made of six overlapping boxes (648 faces).
pub fn chair() -> TriangleMesh {
    let parts = [
        (Vec3::new(-0.5, -0.05, -0.5), Vec3::new(0.5, 0.05, 0.5)),
        (Vec3::new(-0.5, -0.9, -0.5), Vec3::new(-0.4, -0.05, -0.4)),
        (Vec3::new(0.4, -0.9, -0.5), Vec3::new(0.5, -0.05, -0.4)),
        (Vec3::new(-0.5, -0.9, 0.4), Vec3::new(-0.4, -0.05, 0.5)),
        (Vec3::new(0.4, -0.9, 0.4), Vec3::new(0.5, -0.05, 0.5)),
        (Vec3::new(-0.5, 0.05, 0.4), Vec3::new(0.5, 0.9, 0.5)),
    ];
    let boxes: Vec<TriangleMesh> = parts.iter().map(|(lo, hi)| grid_box(*lo, *hi, 3)).collect();
    TriangleMesh::concat(&boxes)
}

pub fn table() -> TriangleMesh {
    let mut parts = vec![grid_box(
        Vec3::new(-0.9, 0.3, -0.6),
        Vec3::new(0.9, 0.4, 0.6),
        2,
    )];
    for (x, z) in [(-0.8, -0.5), (0.7, -0.5), (-0.8, 0.4), (0.7, 0.4)] {
        parts.push(cylinder_closed(
            Vec3::new(x + 0.05, -0.6, z + 0.05),
            0.05,
            0.9,
            8,
        ));
    }
    TriangleMesh::concat(&parts)
}

/// Capped cylinder centered at `c` (bottom at `c.y`).
pub fn cylinder_closed(c: Vec3, radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let mut b = Builder::default();
    let bot_c = b.vertex(c);
    let top_c = b.vertex(c + Vec3::new(0.0, height, 0.0));
    let ring = |b: &mut Builder, y: f64| -> Vec<u32> {
        (0..segments)
            .map(|s| {
                let th = 2.0 * PI * s as f64 / segments as f64;
                b.vertex(c + Vec3::new(radius * th.cos(), y, radius * th.sin()))
            })
            .collect()
    };
    let lo = ring(&mut b, 0.0);
    let hi = ring(&mut b, height);
    for s in 0..segments {
        let s1 = (s + 1) % segments;
        b.faces.push([lo[s], hi[s], hi[s1]]);
        b.faces.push([lo[s], hi[s1], lo[s1]]);
        b.faces.push([bot_c, lo[s], lo[s1]]);
        b.faces.push([top_c, hi[s1], hi[s]]);
    }
    b.finish()
}

pub fn octahedron() -> TriangleMesh {
    let v = vec![
        Vec3::new(0.8, 0.0, 0.0),
        Vec3::new(-0.8, 0.0, 0.0),
        Vec3::new(0.0, 0.8, 0.0),
        Vec3::new(0.0, -0.8, 0.0),
        Vec3::new(0.0, 0.0, 0.8),
        Vec3::new(0.0, 0.0, -0.8),
    ];
    let f = vec![
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ];
    TriangleMesh::new(v, f)
}

/// Terrain-like height field over a grid.
pub fn terrain(n: usize) -> TriangleMesh {
    let mut m = plane_grid(n, n);
    for p in &mut m.vertices {
        p.y = 0.3 * (2.5 * p.x).sin() * (1.7 * p.z).cos() + 0.1 * (5.0 * p.x * p.z).sin();
    }
    m
}

/// Hand-built meshes covering closed, open, multi-component, genus-one,
/// non-manifold and non-orientable cases.
pub fn bundled() -> Vec<CorpusEntry> {
    let two_components = TriangleMesh::concat(&[
        grid_box(Vec3::new(-0.9, -0.4, -0.4), Vec3::new(-0.1, 0.4, 0.4), 1),
        tetrahedron().map_vertices(|p| p * 0.4 + Vec3::new(0.5, 0.0, 0.0)),
    ]);
    let mixed = TriangleMesh::concat(&[
        icosphere(1).map_vertices(|p| p * 0.5 + Vec3::new(-0.4, 0.0, 0.0)),
        fin_triple().map_vertices(|p| p * 0.5 + Vec3::new(0.5, 0.0, 0.0)),
    ]);
    vec![
        CorpusEntry {
            name: "triangle",
            mesh: triangle(),
        },
        CorpusEntry {
            name: "quad",
            mesh: unit_square(),
        },
        CorpusEntry {
            name: "tetrahedron",
            mesh: tetrahedron(),
        },
        CorpusEntry {
            name: "cube",
            mesh: cube(),
        },
        CorpusEntry {
            name: "grid_cube",
            mesh: grid_box(Vec3::repeat(-0.8), Vec3::repeat(0.8), 4),
        },
        CorpusEntry {
            name: "octahedron",
            mesh: octahedron(),
        },
        CorpusEntry {
            name: "icosahedron",
            mesh: icosphere(0),
        },
        CorpusEntry {
            name: "icosphere1",
            mesh: icosphere(1),
        },
        CorpusEntry {
            name: "icosphere2",
            mesh: icosphere(2),
        },
        CorpusEntry {
            name: "icosphere3",
            mesh: icosphere(3),
        },
        CorpusEntry {
            name: "uv_sphere",
            mesh: uv_sphere(12, 24, 0.9),
        },
        CorpusEntry {
            name: "torus",
            mesh: torus(24, 12, 0.6, 0.25),
        },
        CorpusEntry {
            name: "tube",
            mesh: cylinder(16, 4, 0.5, 1.6),
        },
        CorpusEntry {
            name: "cone",
            mesh: cone(20),
        },
        CorpusEntry {
            name: "open_strip",
            mesh: open_strip(12),
        },
        CorpusEntry {
            name: "plane",
            mesh: plane_grid(10, 8),
        },
        CorpusEntry {
            name: "terrain",
            mesh: terrain(20),
        },
        CorpusEntry {
            name: "two_components",
            mesh: two_components,
        },
        CorpusEntry {
            name: "fin_nonmanifold",
            mesh: fin_triple(),
        },
        CorpusEntry {
            name: "bowtie",
            mesh: bowtie(),
        },
        CorpusEntry {
            name: "mobius",
            mesh: mobius(24),
        },
        CorpusEntry {
            name: "mixed",
            mesh: mixed,
        },
        CorpusEntry {
            name: "chair",
            mesh: chair(),
        },
        CorpusEntry {
            name: "table",
            mesh: table(),
        },
    ]
}

#[derive(Default)]
struct Builder {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    index: HashMap<[u64; 3], u32>,
}

impl Builder {
    /// Add a vertex, sharing exact duplicates.
    fn vertex(&mut self, p: Vec3) -> u32 {
        let key = [p.x, p.y, p.z].map(|c| (c + 0.0).to_bits());
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        self.vertices.push(p);
        let i = self.vertices.len() as u32 - 1;
        self.index.insert(key, i);
        i
    }

    fn finish(self) -> TriangleMesh {
        TriangleMesh::new(self.vertices, self.faces)
    }
}
