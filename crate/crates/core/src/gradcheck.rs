//! Finite-difference checks of the analytic loss gradient.

use nalgebra::DVector;
use rand::Rng;

use crate::contact::{ContactMap, MeshSide};
use crate::error::Result;
use crate::hand::{HandModel, HandParams};
use crate::loss::{Objective, Targets};
use crate::mesh::TriMesh;
use crate::primitives::icosphere;
use crate::Vec3;

/// An object, random targets and a random hand pose near it.
pub struct GradientScene {
    pub object: TriMesh,
    pub targets: Targets,
    pub params: HandParams,
}

/// A sphere pressed against the palm, uniform random targets and random
/// pose, shape, translation and rotation.
pub fn random_scene(model: &HandModel, rng: &mut impl Rng) -> GradientScene {
    let radius = rng.random_range(20.0..30.0);
    let center = Vec3::new(
        rng.random_range(-5.0..5.0),
        rng.random_range(30.0..60.0),
        -11.0 - radius + rng.random_range(-3.0..3.0),
    );
    let object = icosphere(radius, 3).transformed(|p| p + center).expect("translated sphere");
    let mut params = model.zero_params();
    for t in &mut params.theta {
        *t = rng.random_range(-0.5..0.5);
    }
    for b in &mut params.beta {
        *b = rng.random_range(-0.5..0.5);
    }
    params.translation = [0, 1, 2].map(|_| rng.random_range(-2.0..2.0));
    params.rotation = [0, 1, 2].map(|_| rng.random_range(-0.1..0.1));
    let mut random_map = |side, n| {
        ContactMap::new(side, (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).expect("values in [0, 1]")
    };
    let targets = Targets {
        object: random_map(MeshSide::Object, object.len()),
        hand: Some(random_map(MeshSide::Hand, model.n_vertices())),
    };
    GradientScene { object, targets, params }
}

/// Central differences of the total loss, or `None` when a correspondence,
/// saturation or penetration flag changes within the stencil.
pub fn finite_difference_gradient(objective: &Objective, params: &HandParams, step: f64) -> Result<Option<DVector<f64>>> {
    let layout = params.layout();
    let x = params.to_vector();
    let reference = objective.active_set(params)?;
    let mut out = DVector::zeros(layout.dim());
    for c in 0..layout.dim() {
        let mut total = [0.0; 2];
        for (k, sign) in [1.0, -1.0].into_iter().enumerate() {
            let mut y = x.clone();
            y[c] += sign * step;
            let p = HandParams::from_vector(layout, &y);
            if objective.active_set(&p)? != reference {
                return Ok(None);
            }
            total[k] = objective.loss(&p)?.total;
        }
        out[c] = (total[0] - total[1]) / (2.0 * step);
    }
    Ok(Some(out))
}

/// Largest absolute difference relative to the largest numeric component.
pub fn relative_error(analytic: &DVector<f64>, numeric: &DVector<f64>) -> f64 {
    let scale = numeric.amax();
    (analytic - numeric).amax() / scale
}
