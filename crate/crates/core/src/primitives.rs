//! Procedural meshes: test solids, the objects used by the grasp generator,
//! and the pieces the synthetic hand is assembled from.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Matrix3, Rotation3};

use crate::mesh::TriMesh;
use crate::Vec3;

/// Axis-aligned cube centred at the origin, 8 vertices and 12 faces.
///
/// Every face is split along the diagonal through the corners with an even
/// sign parity, so the area-weighted corner normals are symmetric.
pub fn cube(half_side: f64) -> TriMesh {
    let vertices: Vec<Vec3> = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { -half_side } else { half_side },
                if i & 2 == 0 { -half_side } else { half_side },
                if i & 4 == 0 { -half_side } else { half_side },
            )
        })
        .collect();
    let even = |i: usize| vertices[i].iter().filter(|c| **c < 0.0).count() % 2 == 0;
    // faces as quads in outward CCW order
    let quads = [
        [0, 2, 3, 1], // -z
        [4, 5, 7, 6], // +z
        [0, 1, 5, 4], // -y
        [2, 6, 7, 3], // +y
        [0, 4, 6, 2], // -x
        [1, 3, 7, 5], // +x
    ];
    let mut faces = Vec::with_capacity(12);
    for q in quads {
        if even(q[0]) {
            faces.push([q[0], q[1], q[2]]);
            faces.push([q[0], q[2], q[3]]);
        } else {
            faces.push([q[1], q[2], q[3]]);
            faces.push([q[1], q[3], q[0]]);
        }
    }
    TriMesh::new(vertices, faces).expect("cube is valid")
}

/// Axis-aligned box centred at the origin with `divisions` cells per edge.
pub fn subdivided_box(half_extents: Vec3, divisions: usize) -> TriMesh {
    let n = divisions.max(1) as i64;
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut vertex = |key: [i64; 3], vertices: &mut Vec<Vec3>| -> usize {
        *index.entry(key).or_insert_with(|| {
            let p = Vec3::from_fn(|c, _| {
                -half_extents[c] + 2.0 * half_extents[c] * key[c] as f64 / n as f64
            });
            vertices.push(p);
            vertices.len() - 1
        })
    };
    for axis in 0..3 {
        for side in [0, n] {
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            let mut outward = Vec3::zeros();
            outward[axis] = if side == 0 { -1.0 } else { 1.0 };
            for i in 0..n {
                for j in 0..n {
                    let corner = |di: i64, dj: i64| {
                        let mut k = [0i64; 3];
                        k[axis] = side;
                        k[u] = i + di;
                        k[v] = j + dj;
                        k
                    };
                    let q = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)]
                        .map(|k| vertex(k, &mut vertices));
                    let mut tris = [[q[0], q[1], q[2]], [q[0], q[2], q[3]]];
                    let c = crate::mesh::face_cross(&vertices, &tris[0]);
                    if c.dot(&outward) < 0.0 {
                        for t in &mut tris {
                            t.swap(1, 2);
                        }
                    }
                    faces.extend(tris);
                }
            }
        }
    }
    TriMesh::new(vertices, faces).expect("box is valid")
}

/// Icosphere centred at the origin.
pub fn icosphere(radius: f64, subdivisions: usize) -> TriMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
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
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
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
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
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
    let vertices = vertices.into_iter().map(|v| v * radius).collect();
    TriMesh::new(vertices, faces).expect("icosphere is valid")
}

/// Closed surface of revolution about +z: a bottom pole, rings ordered
/// bottom to top (each counter-clockwise seen from +z), a top pole.
fn ring_stack(bottom: Vec3, rings: &[Vec<Vec3>], top: Vec3) -> TriMesh {
    let segments = rings[0].len();
    let mut vertices = vec![bottom];
    for ring in rings {
        vertices.extend_from_slice(ring);
    }
    let top_index = vertices.len();
    vertices.push(top);
    let at = |ring: usize, k: usize| 1 + ring * segments + k % segments;
    let mut faces = Vec::new();
    for k in 0..segments {
        faces.push([0, at(0, k + 1), at(0, k)]);
    }
    for r in 0..rings.len() - 1 {
        for k in 0..segments {
            let (a, b, c, d) = (at(r, k), at(r, k + 1), at(r + 1, k + 1), at(r + 1, k));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    let last = rings.len() - 1;
    for k in 0..segments {
        faces.push([at(last, k), at(last, k + 1), top_index]);
    }
    TriMesh::new(vertices, faces).expect("ring stack is valid")
}

fn ring(radius: f64, z: f64, segments: usize) -> Vec<Vec3> {
    (0..segments)
        .map(|k| {
            let a = TAU * k as f64 / segments as f64;
            Vec3::new(radius * a.cos(), radius * a.sin(), z)
        })
        .collect()
}

/// Capped cylinder along z, centred at the origin.
pub fn cylinder(radius: f64, half_height: f64, segments: usize, rings: usize) -> TriMesh {
    let rings = rings.max(2);
    let stack: Vec<Vec<Vec3>> = (0..rings)
        .map(|i| {
            let z = -half_height + 2.0 * half_height * i as f64 / (rings - 1) as f64;
            ring(radius, z, segments)
        })
        .collect();
    ring_stack(
        Vec3::new(0.0, 0.0, -half_height),
        &stack,
        Vec3::new(0.0, 0.0, half_height),
    )
}

/// Capsule whose core segment runs from the origin to `length` along z.
pub fn capsule(
    radius: f64,
    length: f64,
    segments: usize,
    body_rings: usize,
    cap_rings: usize,
) -> TriMesh {
    let mut stack = Vec::new();
    for i in 1..=cap_rings {
        let phi = -FRAC_PI_2 + FRAC_PI_2 * i as f64 / (cap_rings + 1) as f64;
        stack.push(ring(radius * phi.cos(), radius * phi.sin(), segments));
    }
    let body_rings = body_rings.max(2);
    for i in 0..body_rings {
        stack.push(ring(
            radius,
            length * i as f64 / (body_rings - 1) as f64,
            segments,
        ));
    }
    for i in 1..=cap_rings {
        let phi = FRAC_PI_2 * i as f64 / (cap_rings + 1) as f64;
        stack.push(ring(
            radius * phi.cos(),
            length + radius * phi.sin(),
            segments,
        ));
    }
    ring_stack(
        Vec3::new(0.0, 0.0, -radius),
        &stack,
        Vec3::new(0.0, 0.0, length + radius),
    )
}

/// Superellipsoid centred at the origin. `exponent` < 1 gives a boxy shape.
pub fn superellipsoid(half_extents: Vec3, exponent: f64, rings: usize, segments: usize) -> TriMesh {
    let shape = |p: Vec3| {
        Vec3::from_fn(|c, _| half_extents[c] * p[c].signum() * p[c].abs().powf(exponent))
    };
    let stack: Vec<Vec<Vec3>> = (1..=rings)
        .map(|i| {
            let phi = -FRAC_PI_2 + PI * i as f64 / (rings + 1) as f64;
            ring(phi.cos(), phi.sin(), segments)
                .into_iter()
                .map(shape)
                .collect()
        })
        .collect();
    ring_stack(
        Vec3::new(0.0, 0.0, -half_extents.z),
        &stack,
        Vec3::new(0.0, 0.0, half_extents.z),
    )
}

/// Flat square grid in the z = 0 plane with normals along +z. Not closed.
pub fn grid_patch(half_size: f64, divisions: usize) -> TriMesh {
    let n = divisions.max(1);
    let mut vertices = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            vertices.push(Vec3::new(
                -half_size + 2.0 * half_size * i as f64 / n as f64,
                -half_size + 2.0 * half_size * j as f64 / n as f64,
                0.0,
            ));
        }
    }
    let at = |i: usize, j: usize| j * (n + 1) + i;
    let mut faces = Vec::new();
    for j in 0..n {
        for i in 0..n {
            faces.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
            faces.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    TriMesh::new(vertices, faces).expect("grid is valid")
}

/// Rotation taking +z onto `direction`.
pub fn rotation_from_z(direction: &Vec3) -> Matrix3<f64> {
    let d = direction.normalize();
    Rotation3::rotation_between(&Vec3::z(), &d)
        .unwrap_or_else(|| Rotation3::from_axis_angle(&Vec3::x_axis(), PI))
        .into_inner()
}
