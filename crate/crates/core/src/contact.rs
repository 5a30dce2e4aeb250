//! Virtual-capsule contact maps and their gradients.
//!
//! Every vertex of one mesh carries a capsule: the segment
//! `anchor + alpha * normal` for `alpha` in `[-c_bot, c_top]` with full-contact
//! radius `c_rad`. The contact value at that vertex is `min(c_rad / phi, 1)`
//! where `phi` is the smallest segment distance over the other mesh's vertices.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, Matrix3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{face_cross, TriMesh};
use crate::spatial::PointIndex;
use crate::Vec3;

/// Capsule geometry in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapsuleConfig {
    /// Segment extent outward along the normal.
    pub c_top: f64,
    /// Segment extent inward along the normal.
    pub c_bot: f64,
    /// Distance below which contact saturates at 1.
    pub c_rad: f64,
}

impl Default for CapsuleConfig {
    fn default() -> Self {
        CapsuleConfig {
            c_top: 0.5,
            c_bot: 1.0,
            c_rad: 1.0,
        }
    }
}

impl CapsuleConfig {
    pub fn validate(&self) -> Result<()> {
        let all_positive = [self.c_top, self.c_bot, self.c_rad]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0);
        if !all_positive {
            return Err(Error::InvalidConfig(format!(
                "capsule extents and radius must be positive, got {self:?}"
            )));
        }
        if self.c_bot < self.c_top {
            return Err(Error::InvalidConfig(format!(
                "capsule c_bot ({}) must be at least c_top ({})",
                self.c_bot, self.c_top
            )));
        }
        if self.c_bot == self.c_top {
            log::warn!("capsule is symmetric (c_bot == c_top == {})", self.c_top);
        }
        Ok(())
    }

    /// Half the segment length.
    fn half_length(&self) -> f64 {
        0.5 * (self.c_top + self.c_bot)
    }

    fn center_offset(&self) -> f64 {
        0.5 * (self.c_top - self.c_bot)
    }
}

/// Closest point of a capsule segment to a query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentHit {
    /// Distance from the query to the segment.
    pub phi: f64,
    /// Clamped position along the normal.
    pub alpha: f64,
    /// `query - closest segment point`.
    pub offset: Vec3,
}

impl SegmentHit {
    /// Unit direction of `offset`, zero when the query lies on the segment.
    pub fn direction(&self) -> Vec3 {
        if self.phi > 0.0 {
            self.offset / self.phi
        } else {
            Vec3::zeros()
        }
    }
}

pub fn capsule_segment_hit(query: &Vec3, anchor: &Vec3, normal: &Vec3, cfg: &CapsuleConfig) -> SegmentHit {
    let rel = query - anchor;
    let alpha = rel.dot(normal).clamp(-cfg.c_bot, cfg.c_top);
    let offset = rel - normal * alpha;
    SegmentHit {
        phi: offset.norm(),
        alpha,
        offset,
    }
}

/// Distance from `query` to the capsule segment at `anchor` along `normal`.
pub fn capsule_distance(query: &Vec3, anchor: &Vec3, normal: &Vec3, cfg: &CapsuleConfig) -> f64 {
    capsule_segment_hit(query, anchor, normal, cfg).phi
}

/// `min(c_rad / phi, 1)`.
pub fn contact_value(phi: f64, cfg: &CapsuleConfig) -> f64 {
    if phi <= cfg.c_rad {
        1.0
    } else {
        cfg.c_rad / phi
    }
}

/// Derivative of [`contact_value`] in `phi`; zero on the saturated branch
/// including its boundary.
pub fn contact_value_slope(phi: f64, cfg: &CapsuleConfig) -> f64 {
    if phi <= cfg.c_rad {
        0.0
    } else {
        -cfg.c_rad / (phi * phi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeshSide {
    Hand,
    Object,
}

impl fmt::Display for MeshSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MeshSide::Hand => "hand",
            MeshSide::Object => "object",
        })
    }
}

/// Per-vertex contact values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactMap {
    pub mesh: MeshSide,
    pub values: Vec<f64>,
}

impl ContactMap {
    pub fn new(mesh: MeshSide, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig(format!(
                "{mesh} contact value {} at vertex {i} is outside [0, 1]",
                values[i]
            )));
        }
        Ok(ContactMap { mesh, values })
    }

    pub fn zeros(mesh: MeshSide, len: usize) -> Self {
        ContactMap {
            mesh,
            values: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Reads the JSON form `{"mesh": "hand"|"object", "values": [...]}`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let map: ContactMap = serde_json::from_str(&text).map_err(|e| Error::format(path, e))?;
        ContactMap::new(map.mesh, map.values).map_err(|e| Error::format(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("contact map serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// `index,value` rows under a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,value\n");
        for (i, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{i},{v}\n"));
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Parses `index,value` rows under a header line; indices must run
    /// 0, 1, 2, ... in order.
    pub fn from_csv(text: &str, mesh: MeshSide) -> std::result::Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next().map(str::trim) {
            Some("index,value") => {}
            other => return Err(format!("expected header `index,value`, found {other:?}")),
        }
        let mut values = Vec::new();
        for (row, line) in lines.enumerate() {
            let (index, value) = line
                .split_once(',')
                .ok_or_else(|| format!("row {}: expected `index,value`", row + 1))?;
            let index: usize = index.trim().parse().map_err(|e| format!("row {}: index: {e}", row + 1))?;
            if index != row {
                return Err(format!("row {}: index {index} out of order", row + 1));
            }
            values.push(value.trim().parse().map_err(|e| format!("row {}: value: {e}", row + 1))?);
        }
        ContactMap::new(mesh, values).map_err(|e| e.to_string())
    }

    /// Reads a map for `mesh` from JSON, or from CSV when the extension is
    /// `.csv`. A JSON map labelled with the other side is rejected.
    pub fn load_for(path: &Path, mesh: MeshSide) -> Result<Self> {
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            return ContactMap::from_csv(&text, mesh).map_err(|e| Error::format(path, e));
        }
        let map = ContactMap::load(path)?;
        if map.mesh != mesh {
            return Err(Error::format(path, format!("expected a {mesh} contact map, found {}", map.mesh)));
        }
        Ok(map)
    }
}

/// For each capsule-carrying vertex, the opposing vertex minimizing `phi`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactCorrespondence {
    pub nearest: Vec<usize>,
    pub phi: Vec<f64>,
}

impl ContactCorrespondence {
    pub fn len(&self) -> usize {
        self.nearest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nearest.is_empty()
    }

    pub fn check(&self, anchors: usize, queries: usize) -> Result<()> {
        if self.nearest.len() != anchors || self.phi.len() != anchors {
            return Err(Error::StaleCorrespondence {
                expected: self.nearest.len(),
                actual: anchors,
            });
        }
        if let Some(&bad) = self.nearest.iter().find(|&&j| j >= queries) {
            return Err(Error::StaleCorrespondence {
                expected: bad + 1,
                actual: queries,
            });
        }
        Ok(())
    }
}

/// Both contact maps with the correspondences that produced them.
#[derive(Debug, Clone)]
pub struct ContactState {
    pub object: ContactMap,
    pub hand: ContactMap,
    /// Capsules on object vertices, queried by hand vertices.
    pub object_to_hand: ContactCorrespondence,
    /// Capsules on hand vertices, queried by object vertices.
    pub hand_to_object: ContactCorrespondence,
}

/// The `phi`-minimizing query for the capsule at `anchor`; ties go to the
/// lowest index.
pub fn capsule_argmin(anchor: &Vec3, normal: &Vec3, queries: &PointIndex, cfg: &CapsuleConfig) -> Option<(usize, f64)> {
    // phi(q) >= |q - center| - half_length, which bounds whole subtrees
    let center = anchor + normal * cfg.center_offset();
    let points = queries.points();
    queries.nearest_by(&center, cfg.half_length() * (1.0 + 1e-12) + 1e-12, |j| {
        capsule_distance(&points[j], anchor, normal, cfg)
    })
}

/// Linear-scan version of [`capsule_argmin`].
pub fn capsule_argmin_brute_force(
    anchor: &Vec3,
    normal: &Vec3,
    queries: &[Vec3],
    cfg: &CapsuleConfig,
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, q) in queries.iter().enumerate() {
        let phi = capsule_distance(q, anchor, normal, cfg);
        if best.is_none_or(|(_, b)| phi < b) {
            best = Some((j, phi));
        }
    }
    best
}

/// Capsules on every vertex of `anchors` (with `normals`) against the
/// indexed query points.
pub fn one_sided_contact(
    anchors: &[Vec3],
    normals: &[Vec3],
    queries: &PointIndex,
    cfg: &CapsuleConfig,
) -> Result<ContactCorrespondence> {
    if anchors.is_empty() || queries.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let pairs: Vec<(usize, f64)> = anchors
        .par_iter()
        .zip(normals.par_iter())
        .map(|(a, n)| capsule_argmin(a, n, queries, cfg).expect("query set is non-empty"))
        .collect();
    let (nearest, phi) = pairs.into_iter().unzip();
    Ok(ContactCorrespondence { nearest, phi })
}

fn map_from(side: MeshSide, corr: &ContactCorrespondence, cfg: &CapsuleConfig) -> ContactMap {
    ContactMap {
        mesh: side,
        values: corr.phi.iter().map(|&p| contact_value(p, cfg)).collect(),
    }
}

/// Object and hand contact maps, reusing a prebuilt index over the object
/// vertices.
pub fn contact_maps_indexed(
    object: &TriMesh,
    object_index: &PointIndex,
    hand: &TriMesh,
    cfg: &CapsuleConfig,
) -> Result<ContactState> {
    if object.is_empty() || hand.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let hand_index = PointIndex::new(&hand.vertices);
    let object_to_hand = one_sided_contact(&object.vertices, &object.vertex_normals, &hand_index, cfg)?;
    let hand_to_object = one_sided_contact(&hand.vertices, &hand.vertex_normals, object_index, cfg)?;
    Ok(ContactState {
        object: map_from(MeshSide::Object, &object_to_hand, cfg),
        hand: map_from(MeshSide::Hand, &hand_to_object, cfg),
        object_to_hand,
        hand_to_object,
    })
}

pub fn contact_maps(object: &TriMesh, hand: &TriMesh, cfg: &CapsuleConfig) -> Result<ContactState> {
    contact_maps_indexed(object, &PointIndex::new(&object.vertices), hand, cfg)
}

/// Reference implementation: the double loop over all vertex pairs.
pub fn contact_maps_brute_force(object: &TriMesh, hand: &TriMesh, cfg: &CapsuleConfig) -> Result<ContactState> {
    if object.is_empty() || hand.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let side = |anchors: &TriMesh, queries: &TriMesh| {
        let (nearest, phi) = anchors
            .vertices
            .iter()
            .zip(&anchors.vertex_normals)
            .map(|(a, n)| capsule_argmin_brute_force(a, n, &queries.vertices, cfg).unwrap())
            .unzip();
        ContactCorrespondence { nearest, phi }
    };
    let object_to_hand = side(object, hand);
    let hand_to_object = side(hand, object);
    Ok(ContactState {
        object: map_from(MeshSide::Object, &object_to_hand, cfg),
        hand: map_from(MeshSide::Hand, &hand_to_object, cfg),
        object_to_hand,
        hand_to_object,
    })
}

/// Gradient of `weight * contact` for one object capsule with respect to
/// its corresponding hand vertex.
fn object_term(
    object: &TriMesh,
    hand: &TriMesh,
    i: usize,
    j: usize,
    cfg: &CapsuleConfig,
    weight: f64,
) -> Option<Vec3> {
    let hit = capsule_segment_hit(&hand.vertices[j], &object.vertices[i], &object.vertex_normals[i], cfg);
    let slope = contact_value_slope(hit.phi, cfg);
    (slope != 0.0).then(|| hit.direction() * (weight * slope))
}

/// Adjoint of the hand vertex normals: maps gradients with respect to the
/// unit normals onto the vertex positions.
pub struct NormalAdjoint {
    vertex_faces: Vec<Vec<usize>>,
}

impl NormalAdjoint {
    pub fn new(mesh: &TriMesh) -> Self {
        NormalAdjoint {
            vertex_faces: mesh.vertex_faces(),
        }
    }

    /// Adds `d/d(position)` of `normal_grad . n_v` to `out` for every vertex
    /// the normal of `v` depends on.
    pub fn accumulate(&self, mesh: &TriMesh, v: usize, normal_grad: &Vec3, out: &mut impl FnMut(usize, Vec3)) {
        let faces = &self.vertex_faces[v];
        let m: Vec3 = faces.iter().map(|&f| face_cross(&mesh.vertices, &mesh.faces[f])).sum();
        let len = m.norm();
        if len == 0.0 {
            return;
        }
        let n = m / len;
        let g = (Matrix3::identity() - n * n.transpose()) * normal_grad / len;
        for &f in faces {
            let [ia, ib, ic] = mesh.faces[f];
            let (a, b, c) = (mesh.vertices[ia], mesh.vertices[ib], mesh.vertices[ic]);
            out(ia, (b - c).cross(&g));
            out(ib, (c - a).cross(&g));
            out(ic, (a - b).cross(&g));
        }
    }
}

/// Gradient of `weight * contact` for one hand capsule with respect to the
/// hand vertex positions (anchor and, through the normal, its neighbours).
fn hand_term(
    object: &TriMesh,
    hand: &TriMesh,
    adjoint: &NormalAdjoint,
    j: usize,
    i: usize,
    cfg: &CapsuleConfig,
    weight: f64,
    out: &mut impl FnMut(usize, Vec3),
) {
    let hit = capsule_segment_hit(&object.vertices[i], &hand.vertices[j], &hand.vertex_normals[j], cfg);
    let slope = contact_value_slope(hit.phi, cfg);
    if slope == 0.0 {
        return;
    }
    let d = hit.direction() * (weight * slope);
    out(j, -d);
    if hit.alpha != 0.0 {
        adjoint.accumulate(hand, j, &(-d * hit.alpha), out);
    }
}

/// Gradient with respect to hand vertex positions of
/// `sum_i object_weights[i] * C_O[i] + sum_j hand_weights[j] * C_H[j]`,
/// with correspondences held fixed.
pub fn weighted_contact_vertex_grad(
    object: &TriMesh,
    hand: &TriMesh,
    adjoint: &NormalAdjoint,
    state: &ContactState,
    cfg: &CapsuleConfig,
    object_weights: &[f64],
    hand_weights: Option<&[f64]>,
) -> Result<Vec<Vec3>> {
    state.object_to_hand.check(object.len(), hand.len())?;
    state.hand_to_object.check(hand.len(), object.len())?;
    Error::check_len("object weights", object.len(), object_weights.len())?;
    let mut grad = vec![Vec3::zeros(); hand.len()];
    for (i, &w) in object_weights.iter().enumerate() {
        if w != 0.0 {
            let j = state.object_to_hand.nearest[i];
            if let Some(g) = object_term(object, hand, i, j, cfg, w) {
                grad[j] += g;
            }
        }
    }
    if let Some(weights) = hand_weights {
        Error::check_len("hand weights", hand.len(), weights.len())?;
        for (j, &w) in weights.iter().enumerate() {
            if w != 0.0 {
                let i = state.hand_to_object.nearest[j];
                hand_term(object, hand, adjoint, j, i, cfg, w, &mut |v, g| grad[v] += g);
            }
        }
    }
    Ok(grad)
}

/// `row_v^T` times the `3 x D` block of `jacobian` for vertex `v`.
fn project(jacobian: &DMatrix<f64>, v: usize, g: &Vec3, row: &mut [f64]) {
    for (c, out) in row.iter_mut().enumerate() {
        *out += g.x * jacobian[(3 * v, c)] + g.y * jacobian[(3 * v + 1, c)] + g.z * jacobian[(3 * v + 2, c)];
    }
}

/// Projects per-vertex position gradients through a `3V x D` vertex Jacobian.
pub fn vertex_grad_to_params(jacobian: &DMatrix<f64>, grad: &[Vec3]) -> Result<Vec<f64>> {
    Error::check_len("jacobian rows", 3 * grad.len(), jacobian.nrows())?;
    let mut out = vec![0.0; jacobian.ncols()];
    for (v, g) in grad.iter().enumerate() {
        if *g != Vec3::zeros() {
            project(jacobian, v, g, &mut out);
        }
    }
    Ok(out)
}

/// Per-value parameter gradients of both contact maps: row `i` of the first
/// matrix is `dC_O[i]/dP`, row `j` of the second is `dC_H[j]/dP`.
///
/// `hand_jacobian` is the full `3V x D` Jacobian of the posed hand vertices.
pub fn contact_maps_grad(
    object: &TriMesh,
    hand: &TriMesh,
    state: &ContactState,
    cfg: &CapsuleConfig,
    hand_jacobian: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    state.object_to_hand.check(object.len(), hand.len())?;
    state.hand_to_object.check(hand.len(), object.len())?;
    if hand_jacobian.nrows() != 3 * hand.len() {
        return Err(Error::StaleCorrespondence {
            expected: hand_jacobian.nrows() / 3,
            actual: hand.len(),
        });
    }
    let dim = hand_jacobian.ncols();
    let mut d_object = DMatrix::zeros(object.len(), dim);
    let mut row = vec![0.0; dim];
    for i in 0..object.len() {
        let j = state.object_to_hand.nearest[i];
        if let Some(g) = object_term(object, hand, i, j, cfg, 1.0) {
            row.fill(0.0);
            project(hand_jacobian, j, &g, &mut row);
            d_object.row_mut(i).copy_from_slice(&row);
        }
    }
    let adjoint = NormalAdjoint::new(hand);
    let mut d_hand = DMatrix::zeros(hand.len(), dim);
    for j in 0..hand.len() {
        let i = state.hand_to_object.nearest[j];
        row.fill(0.0);
        hand_term(object, hand, &adjoint, j, i, cfg, 1.0, &mut |v, g| {
            project(hand_jacobian, v, &g, &mut row)
        });
        d_hand.row_mut(j).copy_from_slice(&row);
    }
    Ok((d_object, d_hand))
}
