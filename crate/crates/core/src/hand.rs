//! Parametric articulated hand: rest mesh, joint tree, linear blend skinning
//! and a linear pose subspace, with analytic Jacobians of the posed vertices.

use std::path::Path;

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::rotation::{canonicalize_rotation, exp_so3, left_jacobian, skew};
use crate::Vec3;

pub const MAX_INFLUENCES: usize = 8;

/// Optimisation variable: pose coefficients, shape coefficients, and the
/// rigid translation (mm) / axis-angle rotation (rad) relative to the object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandParams {
    pub theta: Vec<f64>,
    #[serde(default)]
    pub beta: Vec<f64>,
    pub translation: [f64; 3],
    pub rotation: [f64; 3],
}

/// Offsets of each parameter block inside the flat vector `[theta, beta, t, R]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    pub n_pose: usize,
    pub n_shape: usize,
}

impl ParamLayout {
    pub fn dim(&self) -> usize {
        self.n_pose + self.n_shape + 6
    }
    pub fn pose(&self) -> std::ops::Range<usize> {
        0..self.n_pose
    }
    pub fn shape(&self) -> std::ops::Range<usize> {
        self.n_pose..self.n_pose + self.n_shape
    }
    pub fn translation(&self) -> std::ops::Range<usize> {
        let s = self.n_pose + self.n_shape;
        s..s + 3
    }
    pub fn rotation(&self) -> std::ops::Range<usize> {
        let s = self.n_pose + self.n_shape + 3;
        s..s + 3
    }
}

impl HandParams {
    pub fn zeros(layout: ParamLayout) -> Self {
        HandParams {
            theta: vec![0.0; layout.n_pose],
            beta: vec![0.0; layout.n_shape],
            translation: [0.0; 3],
            rotation: [0.0; 3],
        }
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout {
            n_pose: self.theta.len(),
            n_shape: self.beta.len(),
        }
    }

    pub fn translation(&self) -> Vec3 {
        Vec3::from(self.translation)
    }

    pub fn rotation(&self) -> Vec3 {
        Vec3::from(self.rotation)
    }

    pub fn set_translation(&mut self, t: Vec3) {
        self.translation = t.into();
    }

    pub fn set_rotation(&mut self, r: Vec3) {
        self.rotation = r.into();
    }

    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.layout().dim());
        v.extend_from_slice(&self.theta);
        v.extend_from_slice(&self.beta);
        v.extend_from_slice(&self.translation);
        v.extend_from_slice(&self.rotation);
        DVector::from_vec(v)
    }

    pub fn from_vector(layout: ParamLayout, v: &DVector<f64>) -> Self {
        let s = v.as_slice();
        let t = layout.translation().start;
        let r = layout.rotation().start;
        HandParams {
            theta: s[layout.pose()].to_vec(),
            beta: s[layout.shape()].to_vec(),
            translation: [s[t], s[t + 1], s[t + 2]],
            rotation: [s[r], s[r + 1], s[r + 2]],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|x| x.is_finite())
    }

    /// Copy with the global rotation reduced to angle `[0, pi]`.
    pub fn canonicalized(&self) -> Self {
        let mut p = self.clone();
        p.set_rotation(canonicalize_rotation(&self.rotation()));
        p
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let p: HandParams = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        if !p.is_finite() {
            return Err(Error::format(path, "parameters must be finite"));
        }
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("params serialise");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// A kinematic chain the grasp generator can close, with the pose
/// coefficients that flex each of its joints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerChain {
    pub name: String,
    pub joints: Vec<usize>,
    pub flex_coefficients: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct HandModel {
    pub rest_mesh: TriMesh,
    pub joint_names: Vec<String>,
    pub joints_rest: Vec<Vec3>,
    pub parents: Vec<Option<usize>>,
    /// Sparse skinning rows: `(joint, weight)` per vertex.
    pub skinning: Vec<Vec<(usize, f64)>>,
    /// `3J x K`, per-joint local axis-angle per pose coefficient.
    pub pose_basis: DMatrix<f64>,
    pub pose_mean: DVector<f64>,
    /// `3V x B` vertex displacements per shape coefficient.
    pub shape_basis: Option<DMatrix<f64>>,
    pub fingers: Vec<FingerChain>,
    /// `ancestors[i]` = `[i, parent(i), ..., 0]`.
    ancestors: Vec<Vec<usize>>,
}

/// Posed mesh and joint positions in the object frame.
#[derive(Debug, Clone)]
pub struct PosedHand {
    pub mesh: TriMesh,
    pub joints: Vec<Vec3>,
}

struct Forward {
    world_rot: Vec<Matrix3<f64>>,
    joint_pos: Vec<Vec3>,
    shaped: Vec<Vec3>,
    lbs: Vec<Vec3>,
    global_rot: Matrix3<f64>,
}

impl HandModel {
    pub fn new(
        rest_mesh: TriMesh,
        joint_names: Vec<String>,
        joints_rest: Vec<Vec3>,
        parents: Vec<Option<usize>>,
        skinning: Vec<Vec<(usize, f64)>>,
        pose_basis: DMatrix<f64>,
        pose_mean: DVector<f64>,
        shape_basis: Option<DMatrix<f64>>,
        fingers: Vec<FingerChain>,
    ) -> Result<Self> {
        let n_joints = joints_rest.len();
        let invalid = |m: String| Err(Error::InvalidModel(m));
        if n_joints == 0 {
            return invalid("model has no joints".into());
        }
        if parents.len() != n_joints || joint_names.len() != n_joints {
            return invalid("joint arrays disagree in length".into());
        }
        if parents[0].is_some() {
            return invalid("joint 0 must be the root".into());
        }
        for (j, p) in parents.iter().enumerate().skip(1) {
            match p {
                Some(p) if *p < j => {}
                _ => return invalid(format!("joint {j} must have a parent with a lower index")),
            }
        }
        if skinning.len() != rest_mesh.vertices.len() {
            return invalid("one skinning row per vertex required".into());
        }
        for (v, row) in skinning.iter().enumerate() {
            if row.is_empty() || row.len() > MAX_INFLUENCES {
                return invalid(format!("vertex {v} has {} influences", row.len()));
            }
            let mut sum = 0.0;
            for &(j, w) in row {
                if j >= n_joints || !(w >= 0.0) {
                    return invalid(format!("vertex {v} has invalid influence ({j}, {w})"));
                }
                sum += w;
            }
            if (sum - 1.0).abs() > 1e-6 {
                return invalid(format!("vertex {v} weights sum to {sum}"));
            }
        }
        let k = pose_basis.ncols();
        if pose_basis.nrows() != 3 * n_joints || pose_mean.len() != 3 * n_joints {
            return invalid("pose basis and mean need 3J rows".into());
        }
        if k > 3 * n_joints {
            return invalid("more pose coefficients than joint rotation dimensions".into());
        }
        if k > 0 {
            let sv = pose_basis.clone().svd(false, false).singular_values;
            let max = sv.max();
            if sv.min() <= 1e-9 * max.max(1e-300) {
                return invalid("pose basis columns are linearly dependent".into());
            }
        }
        if let Some(s) = &shape_basis {
            if s.nrows() != 3 * rest_mesh.vertices.len() {
                return invalid("shape basis needs 3V rows".into());
            }
        }
        for f in &fingers {
            if f.joints.iter().any(|&j| j >= n_joints) || f.flex_coefficients.iter().any(|&c| c >= k) {
                return invalid(format!("finger {} references unknown joints or coefficients", f.name));
            }
        }
        let ancestors = (0..n_joints)
            .map(|i| {
                let mut chain = vec![i];
                let mut cur = i;
                while let Some(p) = parents[cur] {
                    chain.push(p);
                    cur = p;
                }
                chain
            })
            .collect();
        Ok(HandModel {
            rest_mesh,
            joint_names,
            joints_rest,
            parents,
            skinning,
            pose_basis,
            pose_mean,
            shape_basis,
            fingers,
            ancestors,
        })
    }

    pub fn n_joints(&self) -> usize {
        self.joints_rest.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.rest_mesh.vertices.len()
    }

    pub fn n_pose(&self) -> usize {
        self.pose_basis.ncols()
    }

    pub fn n_shape(&self) -> usize {
        self.shape_basis.as_ref().map_or(0, |s| s.ncols())
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout {
            n_pose: self.n_pose(),
            n_shape: self.n_shape(),
        }
    }

    pub fn zero_params(&self) -> HandParams {
        HandParams::zeros(self.layout())
    }

    /// Joint dominating each vertex's skinning (lowest joint index on ties).
    pub fn dominant_joint(&self, vertex: usize) -> usize {
        self.skinning[vertex]
            .iter()
            .fold((usize::MAX, -1.0), |best, &(j, w)| {
                if w > best.1 || (w == best.1 && j < best.0) {
                    (j, w)
                } else {
                    best
                }
            })
            .0
    }

    fn check(&self, params: &HandParams) -> Result<()> {
        Error::check_len("pose coefficients", self.n_pose(), params.theta.len())?;
        Error::check_len("shape coefficients", self.n_shape(), params.beta.len())
    }

    fn forward(&self, params: &HandParams) -> Result<Forward> {
        self.check(params)?;
        let theta = DVector::from_column_slice(&params.theta);
        let local: DVector<f64> = &self.pose_mean + &self.pose_basis * &theta;
        let n = self.n_joints();
        let mut world_rot = Vec::with_capacity(n);
        let mut joint_pos = Vec::with_capacity(n);
        for j in 0..n {
            let r = exp_so3(&Vec3::new(local[3 * j], local[3 * j + 1], local[3 * j + 2]));
            match self.parents[j] {
                None => {
                    world_rot.push(r);
                    joint_pos.push(self.joints_rest[j]);
                }
                Some(p) => {
                    world_rot.push(world_rot[p] * r);
                    let pos = world_rot[p] * (self.joints_rest[j] - self.joints_rest[p]) + joint_pos[p];
                    joint_pos.push(pos);
                }
            }
        }
        let mut shaped = self.rest_mesh.vertices.clone();
        if let Some(basis) = &self.shape_basis {
            if !params.beta.is_empty() {
                let d = basis * DVector::from_column_slice(&params.beta);
                for (v, p) in shaped.iter_mut().enumerate() {
                    *p += Vec3::new(d[3 * v], d[3 * v + 1], d[3 * v + 2]);
                }
            }
        }
        let lbs = shaped
            .iter()
            .zip(&self.skinning)
            .map(|(x, row)| {
                row.iter().fold(Vec3::zeros(), |acc, &(i, w)| {
                    acc + (world_rot[i] * (x - self.joints_rest[i]) + joint_pos[i]) * w
                })
            })
            .collect();
        Ok(Forward {
            world_rot,
            joint_pos,
            shaped,
            lbs,
            global_rot: exp_so3(&params.rotation()),
        })
    }

    fn to_object_frame(&self, fw: &Forward, params: &HandParams, p: &Vec3) -> Vec3 {
        let pivot = self.joints_rest[0];
        fw.global_rot * (p - pivot) + pivot + params.translation()
    }

    /// Poses the hand: blend-skinned rest vertices under the per-joint
    /// rotations `pose_mean + pose_basis * theta`, then rotated about the
    /// root joint and translated.
    pub fn pose(&self, params: &HandParams) -> Result<PosedHand> {
        let fw = self.forward(params)?;
        let vertices = fw
            .lbs
            .iter()
            .map(|u| self.to_object_frame(&fw, params, u))
            .collect();
        let joints = fw
            .joint_pos
            .iter()
            .map(|p| self.to_object_frame(&fw, params, p))
            .collect();
        Ok(PosedHand {
            mesh: self.rest_mesh.with_vertices(vertices)?,
            joints,
        })
    }

    /// Jacobian of the selected posed vertices, `3|subset| x dim(P)`, rows
    /// ordered `(v0.x, v0.y, v0.z, v1.x, ...)`.
    pub fn jacobian(&self, params: &HandParams, subset: &[usize]) -> Result<DMatrix<f64>> {
        let fw = self.forward(params)?;
        for &v in subset {
            if v >= self.n_vertices() {
                return Err(Error::DimensionMismatch {
                    what: "vertex index",
                    expected: self.n_vertices(),
                    actual: v,
                });
            }
        }
        Ok(self.jacobian_rows(&fw, params, subset))
    }

    /// Posed hand together with the full `3V x dim(P)` vertex Jacobian.
    pub fn pose_with_jacobian(&self, params: &HandParams) -> Result<(PosedHand, DMatrix<f64>)> {
        let posed = self.pose(params)?;
        let fw = self.forward(params)?;
        let all: Vec<usize> = (0..self.n_vertices()).collect();
        Ok((posed, self.jacobian_rows(&fw, params, &all)))
    }

    fn jacobian_rows(&self, fw: &Forward, params: &HandParams, subset: &[usize]) -> DMatrix<f64> {
        let layout = self.layout();
        let theta = DVector::from_column_slice(&params.theta);
        let local: DVector<f64> = &self.pose_mean + &self.pose_basis * &theta;
        let k = layout.n_pose;
        let n = self.n_joints();
        // world-frame rotation generator of each joint per pose coefficient
        let generators: Vec<DMatrix<f64>> = (0..n)
            .map(|j| {
                let parent_rot = self.parents[j].map_or(Matrix3::identity(), |p| fw.world_rot[p]);
                let a = Vec3::new(local[3 * j], local[3 * j + 1], local[3 * j + 2]);
                let m = parent_rot * left_jacobian(&a);
                let block = self.pose_basis.rows(3 * j, 3);
                let m = DMatrix::from_iterator(3, 3, m.iter().copied());
                m * block
            })
            .collect();
        let global_rot = DMatrix::from_iterator(3, 3, fw.global_rot.iter().copied());
        let global_jl = left_jacobian(&params.rotation());
        let pivot = self.joints_rest[0];
        let mut jac = DMatrix::zeros(3 * subset.len(), layout.dim());
        let mut lever = vec![Vec3::zeros(); n];
        let mut touched = Vec::with_capacity(n);
        for (row, &v) in subset.iter().enumerate() {
            let x = fw.shaped[v];
            touched.clear();
            for &(i, w) in &self.skinning[v] {
                let y = fw.world_rot[i] * (x - self.joints_rest[i]) + fw.joint_pos[i];
                for &j in &self.ancestors[i] {
                    if !touched.contains(&j) {
                        touched.push(j);
                        lever[j] = Vec3::zeros();
                    }
                    lever[j] += (y - fw.joint_pos[j]) * w;
                }
            }
            let mut block = jac.view_mut((3 * row, 0), (3, layout.dim()));
            if k > 0 {
                let mut pose = DMatrix::zeros(3, k);
                for &j in &touched {
                    let s = -skew(&lever[j]);
                    let s = DMatrix::from_iterator(3, 3, s.iter().copied());
                    pose += s * &generators[j];
                }
                block.columns_mut(0, k).copy_from(&(&global_rot * pose));
            }
            if let Some(basis) = &self.shape_basis {
                let mut blend = Matrix3::zeros();
                for &(i, w) in &self.skinning[v] {
                    blend += fw.world_rot[i] * w;
                }
                let blend = fw.global_rot * blend;
                let blend = DMatrix::from_iterator(3, 3, blend.iter().copied());
                let shape = blend * basis.rows(3 * v, 3);
                block.columns_mut(layout.shape().start, layout.n_shape).copy_from(&shape);
            }
            let t = layout.translation().start;
            block.fixed_view_mut::<3, 3>(0, t).copy_from(&Matrix3::identity());
            let arm = fw.global_rot * (fw.lbs[v] - pivot);
            let r = layout.rotation().start;
            block
                .fixed_view_mut::<3, 3>(0, r)
                .copy_from(&(-skew(&arm) * global_jl));
        }
        jac
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: HandModelFile = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        file.into_model().map_err(|e| match e {
            Error::InvalidModel(m) | Error::InvalidConfig(m) => Error::format(path, m),
            Error::DegenerateFace { face, area } => {
                Error::format(path, format!("face {face} is degenerate (area {area:e})"))
            }
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(&HandModelFile::from_model(self)).expect("model serialises");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Free-function forms of the model methods.
pub fn pose_hand(model: &HandModel, params: &HandParams) -> Result<PosedHand> {
    model.pose(params)
}

pub fn pose_jacobian(model: &HandModel, params: &HandParams, subset: &[usize]) -> Result<DMatrix<f64>> {
    model.jacobian(params, subset)
}

pub const MODEL_FORMAT: &str = "handcontact-hand-model";

#[derive(Debug, Serialize, Deserialize)]
struct JointRecord {
    name: String,
    parent: Option<usize>,
    position: [f64; 3],
}

/// On-disk hand model: a JSON header describing the joint tree and
/// dimensions, followed by the array payloads.
#[derive(Debug, Serialize, Deserialize)]
struct HandModelFile {
    format: String,
    version: u32,
    joints: Vec<JointRecord>,
    num_pose_coefficients: usize,
    num_shape_coefficients: usize,
    vertices: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
    skinning: Vec<Vec<(usize, f64)>>,
    /// Row-major `3J x K`.
    pose_basis: Vec<Vec<f64>>,
    pose_mean: Vec<f64>,
    /// Row-major `3V x B`, absent for a fixed shape.
    #[serde(default)]
    shape_basis: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    fingers: Vec<FingerChain>,
}

fn rows_to_matrix(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
        return Err(Error::InvalidModel(format!(
            "{what} row {bad} has {} entries, expected {ncols}",
            rows[bad].len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl HandModelFile {
    fn into_model(self) -> Result<HandModel> {
        if self.format != MODEL_FORMAT {
            return Err(Error::InvalidModel(format!("unknown format {:?}", self.format)));
        }
        if self.version != 1 {
            return Err(Error::InvalidModel(format!("unsupported version {}", self.version)));
        }
        let mesh = TriMesh::new(
            self.vertices.iter().map(|&v| Vec3::from(v)).collect(),
            self.faces,
        )?;
        let pose_basis = rows_to_matrix(&self.pose_basis, self.num_pose_coefficients, "pose_basis")?;
        let shape_basis = match self.shape_basis {
            Some(rows) if self.num_shape_coefficients > 0 => {
                Some(rows_to_matrix(&rows, self.num_shape_coefficients, "shape_basis")?)
            }
            _ => None,
        };
        HandModel::new(
            mesh,
            self.joints.iter().map(|j| j.name.clone()).collect(),
            self.joints.iter().map(|j| Vec3::from(j.position)).collect(),
            self.joints.iter().map(|j| j.parent).collect(),
            self.skinning,
            pose_basis,
            DVector::from_vec(self.pose_mean),
            shape_basis,
            self.fingers,
        )
    }

    fn from_model(m: &HandModel) -> Self {
        HandModelFile {
            format: MODEL_FORMAT.to_string(),
            version: 1,
            joints: (0..m.n_joints())
                .map(|j| JointRecord {
                    name: m.joint_names[j].clone(),
                    parent: m.parents[j],
                    position: m.joints_rest[j].into(),
                })
                .collect(),
            num_pose_coefficients: m.n_pose(),
            num_shape_coefficients: m.n_shape(),
            vertices: m.rest_mesh.vertices.iter().map(|&v| v.into()).collect(),
            faces: m.rest_mesh.faces.clone(),
            skinning: m.skinning.clone(),
            pose_basis: matrix_to_rows(&m.pose_basis),
            pose_mean: m.pose_mean.iter().copied().collect(),
            shape_basis: m.shape_basis.as_ref().map(matrix_to_rows),
            fingers: m.fingers.clone(),
        }
    }
}
