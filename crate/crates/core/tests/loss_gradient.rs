use handcontact::gradcheck::{finite_difference_gradient, random_scene, relative_error};
use handcontact::loss::{Objective, Targets};
use handcontact::synthetic::synthetic_hand_with_shape;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn total_loss_gradient_matches_finite_differences() {
    let model = synthetic_hand_with_shape();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < 30 {
        attempts += 1;
        assert!(attempts < 300, "too few smooth configurations");
        let scene = random_scene(&model, &mut rng);
        let objective = Objective::new(&model, &scene.object, &scene.targets, Default::default(), Default::default()).unwrap();
        let Some(numeric) = finite_difference_gradient(&objective, &scene.params, 1e-6).unwrap() else {
            continue;
        };
        let (terms, analytic) = objective.gradient(&scene.params).unwrap();
        assert!(terms.penetration >= 0.0);
        let err = relative_error(&analytic, &numeric);
        assert!(err < 1e-3, "relative error {err}\nanalytic {analytic:?}\nnumeric {numeric:?}");
        checked += 1;
    }
}

#[test]
fn reference_targets_are_a_stationary_point() {
    let model = synthetic_hand_with_shape();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let scene = random_scene(&model, &mut rng);
    let posed = model.pose(&scene.params).unwrap();
    let state = handcontact::contact::contact_maps(&scene.object, &posed.mesh, &Default::default()).unwrap();
    let targets = Targets {
        object: state.object,
        hand: Some(state.hand),
    };
    let loss = handcontact::loss::LossConfig {
        lambda_pen: 0.0,
        ..Default::default()
    };
    let objective = Objective::new(&model, &scene.object, &targets, Default::default(), loss).unwrap();
    let (terms, grad) = objective.gradient(&scene.params).unwrap();
    assert_eq!(terms.total, 0.0);
    assert!(grad.iter().all(|g| *g == 0.0));
}
