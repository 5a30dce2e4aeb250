use handcontact::hand::{HandModel, HandParams};
use handcontact::rotation::{compose, exp_so3};
use handcontact::synthetic::{synthetic_hand, synthetic_hand_with_shape};
use handcontact::Vec3;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Central differences of the selected posed vertices; translation uses
/// `translation_step`, every other coordinate `step`.
fn finite_difference(
    model: &HandModel,
    params: &HandParams,
    subset: &[usize],
    step: f64,
    translation_step: f64,
) -> DMatrix<f64> {
    let layout = params.layout();
    let x0 = params.to_vector();
    let mut jac = DMatrix::zeros(3 * subset.len(), layout.dim());
    for c in 0..layout.dim() {
        let h = if layout.translation().contains(&c) { translation_step } else { step };
        let eval = |sign: f64| {
            let mut x: DVector<f64> = x0.clone();
            x[c] += sign * h;
            model.pose(&HandParams::from_vector(layout, &x)).unwrap().mesh.vertices
        };
        let (plus, minus) = (eval(1.0), eval(-1.0));
        for (r, &v) in subset.iter().enumerate() {
            let d = (plus[v] - minus[v]) / (2.0 * h);
            for k in 0..3 {
                jac[(3 * r + k, c)] = d[k];
            }
        }
    }
    jac
}

fn relative_error(analytic: &DMatrix<f64>, numeric: &DMatrix<f64>) -> f64 {
    (analytic - numeric).abs().max() / numeric.abs().max()
}

fn random_params(model: &HandModel, rng: &mut ChaCha8Rng) -> HandParams {
    let mut p = model.zero_params();
    for t in &mut p.theta {
        *t = rng.random_range(-1.0..1.0);
    }
    for b in &mut p.beta {
        *b = rng.random_range(-1.0..1.0);
    }
    p.translation = [0, 1, 2].map(|_| rng.random_range(-50.0..50.0));
    p.rotation = [0, 1, 2].map(|_| rng.random_range(-1.5..1.5));
    p
}

#[test]
fn jacobian_at_rest_matches_finite_differences() {
    let model = synthetic_hand_with_shape();
    let params = model.zero_params();
    let all: Vec<usize> = (0..model.n_vertices()).collect();
    let analytic = model.jacobian(&params, &all).unwrap();
    let numeric = finite_difference(&model, &params, &all, 1e-4, 1e-2);
    let err = relative_error(&analytic, &numeric);
    assert!(err < 1e-4, "relative error {err}");
}

#[test]
fn jacobian_random_vertices() {
    let model = synthetic_hand();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let params = random_params(&model, &mut rng);
    let subset: Vec<usize> = (0..20).map(|_| rng.random_range(0..model.n_vertices())).collect();
    let analytic = model.jacobian(&params, &subset).unwrap();
    let numeric = finite_difference(&model, &params, &subset, 1e-4, 1e-2);
    assert!(relative_error(&analytic, &numeric) < 1e-3);
}

#[test]
fn jacobian_fifty_random_points() {
    let model = synthetic_hand_with_shape();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let params = random_params(&model, &mut rng);
        let subset: Vec<usize> = (0..30).map(|_| rng.random_range(0..model.n_vertices())).collect();
        let analytic = model.jacobian(&params, &subset).unwrap();
        let numeric = finite_difference(&model, &params, &subset, 1e-4, 1e-2);
        let err = relative_error(&analytic, &numeric);
        assert!(err < 1e-3, "relative error {err} at {params:?}");
    }
}

#[test]
fn pose_is_equivariant_under_global_rotation() {
    let model = synthetic_hand();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..10 {
        let p = random_params(&model, &mut rng);
        let extra = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let mut q = p.clone();
        q.set_rotation(compose(&extra, &p.rotation()));
        let a = model.pose(&p).unwrap();
        let b = model.pose(&q).unwrap();
        // rotation about the posed root joint
        let pivot = a.joints[0];
        let r = exp_so3(&extra);
        for (va, vb) in a.mesh.vertices.iter().zip(&b.mesh.vertices) {
            assert!((r * (va - pivot) + pivot - vb).norm() < 1e-9);
        }
        for (na, nb) in a.mesh.vertex_normals.iter().zip(&b.mesh.vertex_normals) {
            assert!((r * na - nb).norm() < 1e-9);
        }
    }
}

#[test]
fn joints_stay_near_their_skinned_vertices() {
    let model = synthetic_hand();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let p = random_params(&model, &mut rng);
        let posed = model.pose(&p).unwrap();
        for j in 0..model.n_joints() {
            let mut lo = Vec3::repeat(f64::INFINITY);
            let mut hi = Vec3::repeat(f64::NEG_INFINITY);
            for (v, row) in model.skinning.iter().enumerate() {
                if row.iter().any(|&(i, w)| i == j && w > 0.0) {
                    lo = lo.inf(&posed.mesh.vertices[v]);
                    hi = hi.sup(&posed.mesh.vertices[v]);
                }
            }
            let q = posed.joints[j];
            let inside = (0..3).all(|k| q[k] >= lo[k] - 20.0 && q[k] <= hi[k] + 20.0);
            assert!(inside, "joint {j} at {q:?} outside {lo:?}..{hi:?}");
        }
    }
}
