//! Procedurally generated hand: a palm, two fingers and a thumb, seven
//! joints. Stands in for licensed hand models in tests and experiments.

use nalgebra::{DMatrix, DVector};

use crate::hand::{FingerChain, HandModel};
use crate::mesh::TriMesh;
use crate::primitives::{capsule, rotation_from_z, superellipsoid};
use crate::Vec3;

/// Radians of flexion per unit flexion coefficient.
pub const FLEX_SCALE: f64 = 0.5;

struct Digit {
    name: &'static str,
    /// Knuckle (proximal joint) position.
    knuckle: Vec3,
    direction: Vec3,
    /// Direction the digit curls towards.
    curl: Vec3,
    proximal: f64,
    distal: f64,
    radius: f64,
    abduction_scale: f64,
    twist_scale: f64,
}

impl Digit {
    fn flex_axis(&self) -> Vec3 {
        self.direction.cross(&self.curl).normalize()
    }
    fn abduction_axis(&self) -> Vec3 {
        self.direction.cross(&self.flex_axis()).normalize()
    }
}

fn digits() -> [Digit; 3] {
    let finger = |name, x: f64| Digit {
        name,
        knuckle: Vec3::new(x, 76.0, 0.0),
        direction: Vec3::y(),
        curl: -Vec3::z(),
        proximal: 40.0,
        distal: 32.0,
        radius: 8.5,
        abduction_scale: 0.2,
        twist_scale: 0.1,
    };
    [
        finger("index", -11.0),
        finger("middle", 11.0),
        Digit {
            name: "thumb",
            knuckle: Vec3::new(-17.0, 24.0, -3.0),
            direction: Vec3::new(-0.55, 0.8, -0.12).normalize(),
            curl: Vec3::new(0.55, 0.2, -1.0).normalize(),
            proximal: 34.0,
            distal: 30.0,
            radius: 9.0,
            abduction_scale: 0.25,
            twist_scale: 0.15,
        },
    ]
}

fn ramp(s: f64, lo: f64, hi: f64) -> f64 {
    ((s - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// The bundled synthetic hand with 15 pose coefficients and a fixed shape.
pub fn synthetic_hand() -> HandModel {
    build(false)
}

/// Same hand with two shape coefficients (uniform scale about the wrist and
/// surface inflation along the rest normals).
pub fn synthetic_hand_with_shape() -> HandModel {
    build(true)
}

fn build(with_shape: bool) -> HandModel {
    let digits = digits();
    let palm = superellipsoid(Vec3::new(22.0, 38.0, 11.0), 0.45, 9, 14)
        .transformed(|v| v + Vec3::new(0.0, 40.0, 0.0))
        .expect("palm");
    let mut parts = vec![palm.clone()];
    let mut skinning: Vec<Vec<(usize, f64)>> = vec![vec![(0, 1.0)]; palm.vertices.len()];
    let mut joints_rest = vec![Vec3::zeros()];
    let mut parents = vec![None];
    let mut names = vec!["wrist".to_string()];
    let mut fingers = Vec::new();
    let overlap = 9.0;
    for (d, digit) in digits.iter().enumerate() {
        let (pj, dj) = (1 + 2 * d, 2 + 2 * d);
        joints_rest.push(digit.knuckle);
        joints_rest.push(digit.knuckle + digit.direction * digit.proximal);
        parents.push(Some(0));
        parents.push(Some(pj));
        names.push(format!("{}_proximal", digit.name));
        names.push(format!("{}_distal", digit.name));
        fingers.push(FingerChain {
            name: digit.name.to_string(),
            joints: vec![pj, dj],
            flex_coefficients: vec![2 * d, 2 * d + 1],
        });
        let base = digit.knuckle - digit.direction * overlap;
        let core = overlap + digit.proximal + digit.distal - digit.radius;
        let rot = rotation_from_z(&digit.direction);
        let tube = capsule(digit.radius, core, 10, 11, 2)
            .transformed(|v| rot * v + base)
            .expect("digit");
        for v in &tube.vertices {
            let s = (v - base).dot(&digit.direction);
            let w_prox = ramp(s, overlap - 6.0, overlap + 6.0);
            let w_dist = ramp(s, overlap + digit.proximal - 6.0, overlap + digit.proximal + 6.0);
            let row: Vec<(usize, f64)> = [(0, 1.0 - w_prox), (pj, w_prox * (1.0 - w_dist)), (dj, w_prox * w_dist)]
                .into_iter()
                .filter(|&(_, w)| w > 0.0)
                .collect();
            skinning.push(row);
        }
        parts.push(tube);
    }
    let mesh = TriMesh::merge(&parts).expect("hand mesh");

    // pose basis: flexion of every digit joint, then abduction and twist of
    // the proximal joints, then abduction of the distal joints
    let n_joints = joints_rest.len();
    let mut columns: Vec<(usize, Vec3)> = Vec::new();
    for (d, digit) in digits.iter().enumerate() {
        columns.push((1 + 2 * d, digit.flex_axis() * FLEX_SCALE));
        columns.push((2 + 2 * d, digit.flex_axis() * FLEX_SCALE));
    }
    for (d, digit) in digits.iter().enumerate() {
        columns.push((1 + 2 * d, digit.abduction_axis() * digit.abduction_scale));
    }
    for (d, digit) in digits.iter().enumerate() {
        columns.push((1 + 2 * d, digit.direction * digit.twist_scale));
    }
    for (d, digit) in digits.iter().enumerate() {
        columns.push((2 + 2 * d, digit.abduction_axis() * 0.1));
    }
    let mut pose_basis = DMatrix::zeros(3 * n_joints, columns.len());
    for (c, (joint, axis)) in columns.iter().enumerate() {
        for k in 0..3 {
            pose_basis[(3 * joint + k, c)] = axis[k];
        }
    }

    let shape_basis = with_shape.then(|| {
        let mut s = DMatrix::zeros(3 * mesh.vertices.len(), 2);
        for (v, (p, n)) in mesh.vertices.iter().zip(&mesh.vertex_normals).enumerate() {
            for k in 0..3 {
                s[(3 * v + k, 0)] = 0.05 * p[k];
                s[(3 * v + k, 1)] = 2.0 * n[k];
            }
        }
        s
    });

    HandModel::new(
        mesh,
        names,
        joints_rest,
        parents,
        skinning,
        pose_basis,
        DVector::zeros(3 * n_joints),
        shape_basis,
        fingers,
    )
    .expect("synthetic hand is valid")
}
