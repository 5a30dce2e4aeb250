//! Contact and penetration losses and their gradients with respect to the
//! hand parameters.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::contact::{
    contact_maps_indexed, vertex_grad_to_params, weighted_contact_vertex_grad, CapsuleConfig, ContactCorrespondence,
    ContactMap, ContactState, MeshSide, NormalAdjoint,
};
use crate::error::{Error, Result};
use crate::hand::{HandModel, HandParams, PosedHand};
use crate::mesh::TriMesh;
use crate::spatial::PointIndex;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Weight on under-contact residuals relative to over-contact ones.
    pub lambda_miss: f64,
    /// Weight of the object contact term.
    #[serde(rename = "lambda_O")]
    pub lambda_object: f64,
    /// Weight of the penetration term.
    pub lambda_pen: f64,
    /// Penetration depth (mm) tolerated before the penetration term engages.
    pub c_pen: f64,
    /// Which object vertices the penetration term considers.
    pub penetration_scope: PenetrationScope,
}

/// Object vertices entering the penetration term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenetrationScope {
    /// Every object vertex.
    AllVertices,
    /// Object vertices behind the surface of their corresponding hand vertex,
    /// i.e. `(v_O - v_H) . n_H < 0`. Vertices on the far side of the object
    /// from the hand are then ignored.
    #[default]
    InsideHand,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda_miss: 3.0,
            lambda_object: 1.0,
            lambda_pen: 3.0,
            c_pen: 2.0,
            penetration_scope: PenetrationScope::default(),
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.lambda_miss, self.lambda_object, self.lambda_pen, self.c_pen]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.lambda_miss < 1.0 || self.lambda_object < 0.0 || self.lambda_pen < 0.0 || self.c_pen < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "loss weights need lambda_miss >= 1 and non-negative lambda_O, lambda_pen, c_pen; got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Target contact maps; the hand term is dropped when `hand` is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub object: ContactMap,
    pub hand: Option<ContactMap>,
}

/// Mean asymmetric residual: `lambda_miss * (target - value)` where the value
/// falls short of the target, `value - target` otherwise.
pub fn contact_loss(values: &[f64], target: &[f64], lambda_miss: f64) -> Result<f64> {
    Error::check_len("contact map", target.len(), values.len())?;
    if values.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = values
        .iter()
        .zip(target)
        .map(|(&c, &t)| if c < t { lambda_miss * (t - c) } else { c - t })
        .sum();
    Ok(sum / values.len() as f64)
}

/// Per-value derivative of [`contact_loss`]; zero where value equals target.
fn contact_loss_slopes(values: &[f64], target: &[f64], lambda_miss: f64, weight: f64) -> Vec<f64> {
    let scale = weight / values.len().max(1) as f64;
    values
        .iter()
        .zip(target)
        .map(|(&c, &t)| {
            if c < t {
                -lambda_miss * scale
            } else if c > t {
                scale
            } else {
                0.0
            }
        })
        .collect()
}

pub fn loss_object(current: &ContactMap, target: &ContactMap, cfg: &LossConfig) -> Result<f64> {
    contact_loss(&current.values, &target.values, cfg.lambda_miss)
}

/// Zero when there is no hand target.
pub fn loss_hand(current: &ContactMap, target: Option<&ContactMap>, cfg: &LossConfig) -> Result<f64> {
    match target {
        Some(t) => contact_loss(&current.values, &t.values, cfg.lambda_miss),
        None => Ok(0.0),
    }
}

/// Mean over object vertices of `max(0, (v_O - v_H) . n_O - c_pen)` where
/// `v_H` is the corresponding hand vertex, restricted to the vertices
/// selected by [`LossConfig::penetration_scope`].
pub fn loss_penetration(
    object: &TriMesh,
    hand: &TriMesh,
    correspondence: &ContactCorrespondence,
    cfg: &LossConfig,
) -> Result<f64> {
    correspondence.check(object.len(), hand.len())?;
    if object.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = (0..object.len())
        .map(|i| penetration_excess(object, hand, i, correspondence.nearest[i], cfg))
        .sum();
    Ok(sum / object.len() as f64)
}

fn penetration_excess(object: &TriMesh, hand: &TriMesh, i: usize, j: usize, cfg: &LossConfig) -> f64 {
    let offset = object.vertices[i] - hand.vertices[j];
    if cfg.penetration_scope == PenetrationScope::InsideHand && offset.dot(&hand.vertex_normals[j]) >= 0.0 {
        return 0.0;
    }
    (offset.dot(&object.vertex_normals[i]) - cfg.c_pen).max(0.0)
}

pub fn total_loss(hand: f64, object: f64, penetration: f64, cfg: &LossConfig) -> f64 {
    hand + cfg.lambda_object * object + cfg.lambda_pen * penetration
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    pub hand: f64,
    pub object: f64,
    pub penetration: f64,
    pub total: f64,
}

impl LossTerms {
    pub fn is_finite(&self) -> bool {
        self.hand.is_finite() && self.object.is_finite() && self.penetration.is_finite() && self.total.is_finite()
    }
}

/// Everything computed at one parameter vector.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub terms: LossTerms,
    pub posed: PosedHand,
    pub contact: ContactState,
}

/// The full objective for one object and set of targets.
pub struct Objective<'a> {
    model: &'a HandModel,
    object: &'a TriMesh,
    object_index: PointIndex,
    targets: &'a Targets,
    capsule: CapsuleConfig,
    loss: LossConfig,
    adjoint: NormalAdjoint,
}

impl<'a> Objective<'a> {
    pub fn new(
        model: &'a HandModel,
        object: &'a TriMesh,
        targets: &'a Targets,
        capsule: CapsuleConfig,
        loss: LossConfig,
    ) -> Result<Self> {
        capsule.validate()?;
        loss.validate()?;
        if object.is_empty() {
            return Err(Error::EmptyMesh);
        }
        check_targets(targets, object.len(), model.n_vertices())?;
        Ok(Objective {
            model,
            object,
            object_index: PointIndex::new(&object.vertices),
            targets,
            capsule,
            loss,
            adjoint: NormalAdjoint::new(&model.rest_mesh),
        })
    }

    pub fn model(&self) -> &HandModel {
        self.model
    }

    pub fn object(&self) -> &TriMesh {
        self.object
    }

    pub fn capsule(&self) -> &CapsuleConfig {
        &self.capsule
    }

    pub fn loss_config(&self) -> &LossConfig {
        &self.loss
    }

    fn terms(&self, hand: &TriMesh, contact: &ContactState) -> Result<LossTerms> {
        let e_hand = loss_hand(&contact.hand, self.targets.hand.as_ref(), &self.loss)?;
        let e_object = loss_object(&contact.object, &self.targets.object, &self.loss)?;
        let e_pen = loss_penetration(self.object, hand, &contact.object_to_hand, &self.loss)?;
        Ok(LossTerms {
            hand: e_hand,
            object: e_object,
            penetration: e_pen,
            total: total_loss(e_hand, e_object, e_pen, &self.loss),
        })
    }

    pub fn evaluate(&self, params: &HandParams) -> Result<Evaluation> {
        let posed = self.model.pose(params)?;
        let contact = contact_maps_indexed(self.object, &self.object_index, &posed.mesh, &self.capsule)?;
        let terms = self.terms(&posed.mesh, &contact)?;
        Ok(Evaluation { terms, posed, contact })
    }

    pub fn loss(&self, params: &HandParams) -> Result<LossTerms> {
        Ok(self.evaluate(params)?.terms)
    }

    /// Loss terms and the gradient of the total in the `[theta, beta, t, R]`
    /// ordering of [`HandParams::to_vector`].
    pub fn gradient(&self, params: &HandParams) -> Result<(LossTerms, DVector<f64>)> {
        let (posed, jacobian) = self.model.pose_with_jacobian(params)?;
        let hand = &posed.mesh;
        let contact = contact_maps_indexed(self.object, &self.object_index, hand, &self.capsule)?;
        let terms = self.terms(hand, &contact)?;

        let object_weights = contact_loss_slopes(
            &contact.object.values,
            &self.targets.object.values,
            self.loss.lambda_miss,
            self.loss.lambda_object,
        );
        let hand_weights = self
            .targets
            .hand
            .as_ref()
            .map(|t| contact_loss_slopes(&contact.hand.values, &t.values, self.loss.lambda_miss, 1.0));
        let mut vertex_grad = weighted_contact_vertex_grad(
            self.object,
            hand,
            &self.adjoint,
            &contact,
            &self.capsule,
            &object_weights,
            hand_weights.as_deref(),
        )?;
        self.add_penetration_grad(hand, &contact.object_to_hand, &mut vertex_grad);
        let grad = vertex_grad_to_params(&jacobian, &vertex_grad)?;
        Ok((terms, DVector::from_vec(grad)))
    }

    /// The discrete choices the gradient holds fixed at `params`: both
    /// correspondences, which contact values saturate, which side of its
    /// target each value lies on, and which penetration terms are active.
    /// The loss is smooth wherever this stays constant.
    pub fn active_set(&self, params: &HandParams) -> Result<ActiveSet> {
        let eval = self.evaluate(params)?;
        let c = &eval.contact;
        let side = |values: &[f64], target: &[f64]| -> Vec<i8> {
            values
                .iter()
                .zip(target)
                .map(|(v, t)| v.partial_cmp(t).map_or(0, |o| o as i8))
                .collect()
        };
        let saturated = |phi: &[f64]| phi.iter().map(|&p| p <= self.capsule.c_rad).collect();
        Ok(ActiveSet {
            object_nearest: c.object_to_hand.nearest.clone(),
            hand_nearest: c.hand_to_object.nearest.clone(),
            object_saturated: saturated(&c.object_to_hand.phi),
            hand_saturated: saturated(&c.hand_to_object.phi),
            object_side: side(&c.object.values, &self.targets.object.values),
            hand_side: self
                .targets
                .hand
                .as_ref()
                .map(|t| side(&c.hand.values, &t.values))
                .unwrap_or_default(),
            penetrating: (0..self.object.len())
                .map(|i| penetration_excess(self.object, &eval.posed.mesh, i, c.object_to_hand.nearest[i], &self.loss) > 0.0)
                .collect(),
        })
    }

    fn add_penetration_grad(&self, hand: &TriMesh, corr: &ContactCorrespondence, grad: &mut [Vec3]) {
        if self.loss.lambda_pen == 0.0 {
            return;
        }
        let scale = self.loss.lambda_pen / self.object.len() as f64;
        for (i, &j) in corr.nearest.iter().enumerate() {
            if penetration_excess(self.object, hand, i, j, &self.loss) > 0.0 {
                grad[j] -= self.object.vertex_normals[i] * scale;
            }
        }
    }
}

/// See [`Objective::active_set`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    pub object_nearest: Vec<usize>,
    pub hand_nearest: Vec<usize>,
    pub object_saturated: Vec<bool>,
    pub hand_saturated: Vec<bool>,
    pub object_side: Vec<i8>,
    pub hand_side: Vec<i8>,
    pub penetrating: Vec<bool>,
}

/// Checks map lengths and sides against the meshes they describe.
pub fn check_targets(targets: &Targets, object_len: usize, hand_len: usize) -> Result<()> {
    if targets.object.mesh != MeshSide::Object {
        return Err(Error::InvalidConfig("object target map is labelled as a hand map".into()));
    }
    Error::check_len("object target map", object_len, targets.object.len())?;
    if let Some(hand) = &targets.hand {
        if hand.mesh != MeshSide::Hand {
            return Err(Error::InvalidConfig("hand target map is labelled as an object map".into()));
        }
        Error::check_len("hand target map", hand_len, hand.len())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{contact_maps, ContactCorrespondence};
    use crate::primitives::grid_patch;

    #[test]
    fn contact_loss_branches() {
        assert_eq!(contact_loss(&[0.3, 0.7], &[0.3, 0.7], 3.0).unwrap(), 0.0);
        assert!((contact_loss(&[0.2], &[0.8], 3.0).unwrap() - 1.8).abs() < 1e-12);
        assert!((contact_loss(&[0.8], &[0.2], 3.0).unwrap() - 0.6).abs() < 1e-12);
        assert!(contact_loss(&[0.2], &[0.8, 0.1], 3.0).is_err());
    }

    #[test]
    fn hand_loss_matches_object_loss() {
        let cfg = LossConfig::default();
        let c = ContactMap::new(MeshSide::Hand, vec![0.1, 0.9, 0.4]).unwrap();
        let t = ContactMap::new(MeshSide::Hand, vec![0.5, 0.2, 0.4]).unwrap();
        assert_eq!(loss_hand(&c, None, &cfg).unwrap(), 0.0);
        assert_eq!(loss_hand(&c, Some(&t), &cfg).unwrap(), loss_object(&c, &t, &cfg).unwrap());
    }

    #[test]
    fn total_is_weighted_sum() {
        let cfg = LossConfig {
            lambda_object: 1.0,
            lambda_pen: 1.0,
            ..LossConfig::default()
        };
        assert_eq!(total_loss(0.0, 0.0, 0.0, &cfg), 0.0);
        assert_eq!(total_loss(1.0, 2.0, 3.0, &cfg), 6.0);
    }

    /// Object patch at z = 0 facing +z; hand patch at z = -depth facing
    /// `hand_facing` (±1 along z).
    fn one_vertex_penetration(depth: f64, hand_facing: f64, scope: PenetrationScope) -> f64 {
        let object = grid_patch(5.0, 1);
        let vertices = object.vertices.iter().map(|v| v - Vec3::z() * depth).collect();
        let faces = if hand_facing > 0.0 {
            object.faces.clone()
        } else {
            object.faces.iter().map(|f| [f[0], f[2], f[1]]).collect()
        };
        let hand = TriMesh::new(vertices, faces).unwrap();
        let corr = ContactCorrespondence {
            nearest: vec![0, 1, 2, 3],
            phi: vec![0.0; 4],
        };
        let cfg = LossConfig {
            penetration_scope: scope,
            ..LossConfig::default()
        };
        // every vertex sits at the same depth, so the mean is the per-vertex value
        loss_penetration(&object, &hand, &corr, &cfg).unwrap()
    }

    #[test]
    fn penetration_examples() {
        for scope in [PenetrationScope::AllVertices, PenetrationScope::InsideHand] {
            assert_eq!(one_vertex_penetration(-3.0, -1.0, scope), 0.0);
            assert_eq!(one_vertex_penetration(1.5, -1.0, scope), 0.0);
            assert!((one_vertex_penetration(5.0, -1.0, scope) - 3.0).abs() < 1e-12);
        }
        assert!((one_vertex_penetration(5.0, 1.0, PenetrationScope::AllVertices) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn vertices_outside_the_hand_are_not_penetrating() {
        assert_eq!(one_vertex_penetration(5.0, 1.0, PenetrationScope::InsideHand), 0.0);
    }

    #[test]
    fn stale_correspondence_is_rejected() {
        let object = grid_patch(5.0, 1);
        let state = contact_maps(&object, &object, &CapsuleConfig::default()).unwrap();
        let small = TriMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]]).unwrap();
        let err = loss_penetration(&small, &object, &state.object_to_hand, &LossConfig::default());
        assert!(matches!(err, Err(Error::StaleCorrespondence { .. })));
    }

    #[test]
    fn config_serializes_with_object_weight_key() {
        let text = serde_json::to_string(&LossConfig::default()).unwrap();
        assert!(text.contains("\"lambda_O\":1.0"));
        assert!(LossConfig {
            lambda_miss: 0.5,
            ..LossConfig::default()
        }
        .validate()
        .is_err());
    }
}
