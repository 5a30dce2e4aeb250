use handcontact::contact::{
    capsule_distance, capsule_segment_hit, contact_maps, contact_value, CapsuleConfig, ContactMap, MeshSide,
};
use handcontact::dataset::{perturb, PerturbConfig};
use handcontact::loss::{contact_loss, Objective};
use handcontact::mesh::compute_normals;
use handcontact::metrics::{contact_coverage, contact_precision_recall, mpjpe, precision_recall, MetricsConfig};
use handcontact::optim::{optimize, OptimConfig};
use handcontact::primitives::{cube, grid_patch, icosphere, subdivided_box};
use handcontact::rng::rng_for;
use handcontact::rotation::exp_so3;
use handcontact::spatial::{intersection_volume, nearest_brute_force, PointIndex, SignedDistance};
use handcontact::synthetic::synthetic_hand;
use handcontact::target::{dequantize_contact, extract_features, quantize_contact, resolve_targets, TargetSource};
use handcontact::{TriMesh, Vec3};
use proptest::prelude::*;

fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn rigid() -> impl Strategy<Value = (nalgebra::Matrix3<f64>, Vec3)> {
    (vec3(3.0), vec3(100.0)).prop_map(|(w, t)| (exp_so3(&w), t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nearest_matches_linear_scan(
        points in prop::collection::vec(vec3(50.0), 1..2000),
        queries in prop::collection::vec(vec3(80.0), 1..20),
    ) {
        let index = PointIndex::new(&points);
        for q in &queries {
            prop_assert_eq!(index.nearest(q), nearest_brute_force(&points, q));
        }
    }

    #[test]
    fn signed_distance_is_one_lipschitz(p in vec3(40.0), q in vec3(40.0)) {
        let sdf = SignedDistance::new(&subdivided_box(Vec3::new(15.0, 10.0, 20.0), 3)).unwrap();
        prop_assert!((sdf.eval(&p) - sdf.eval(&q)).abs() <= (p - q).norm() + 1e-9);
    }

    #[test]
    fn normals_follow_vertex_permutation(seed in any::<u64>()) {
        let mesh = icosphere(10.0, 2);
        let mut order: Vec<usize> = (0..mesh.len()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng_for(seed, &[]));
        let mut new_of_old = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            new_of_old[old] = new;
        }
        let vertices: Vec<Vec3> = order.iter().map(|&old| mesh.vertices[old]).collect();
        let faces: Vec<[usize; 3]> = mesh.faces.iter().map(|f| f.map(|v| new_of_old[v])).collect();
        let (normals, _) = compute_normals(&vertices, &faces);
        for (new, &old) in order.iter().enumerate() {
            prop_assert!((normals[new] - mesh.vertex_normals[old]).norm() < 1e-12);
        }
    }

    #[test]
    fn contact_is_bounded_and_saturates_inside_the_radius(phi in 0.0f64..50.0, c_rad in 0.1f64..3.0) {
        let cfg = CapsuleConfig { c_rad, ..CapsuleConfig::default() };
        let c = contact_value(phi, &cfg);
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert_eq!(c == 1.0, phi <= c_rad);
    }

    #[test]
    fn moving_away_never_increases_contact(
        query in vec3(5.0),
        axis in vec3(1.0),
        step in 1e-3f64..5.0,
    ) {
        prop_assume!(axis.norm() > 1e-3);
        let cfg = CapsuleConfig::default();
        let anchor = Vec3::zeros();
        let normal = axis.normalize();
        let hit = capsule_segment_hit(&query, &anchor, &normal, &cfg);
        prop_assume!(hit.phi > 1e-6);
        let moved = query + hit.direction() * step;
        let before = contact_value(capsule_distance(&query, &anchor, &normal, &cfg), &cfg);
        let after = contact_value(capsule_distance(&moved, &anchor, &normal, &cfg), &cfg);
        prop_assert!(after <= before);
    }

    #[test]
    fn facing_parallel_patches_have_equal_contact(gap in -1.5f64..4.0) {
        let object = grid_patch(5.0, 3);
        let faces: Vec<[usize; 3]> = object.faces.iter().map(|f| [f[0], f[2], f[1]]).collect();
        let vertices: Vec<Vec3> = object.vertices.iter().map(|v| v + Vec3::z() * gap).collect();
        let hand = TriMesh::new(vertices, faces).unwrap();
        let state = contact_maps(&object, &hand, &CapsuleConfig::default()).unwrap();
        for (a, b) in state.object.values.iter().zip(&state.hand.values) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn contact_loss_is_nonnegative_and_zero_only_at_target(
        pairs in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..50),
    ) {
        let (values, target): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let loss = contact_loss(&values, &target, 3.0).unwrap();
        prop_assert!(loss >= 0.0);
        prop_assert_eq!(loss == 0.0, values == target);
    }

    #[test]
    fn quantization_error_is_at_most_half_a_bin(
        values in prop::collection::vec(0.0f64..=1.0, 1..100),
        n_bins in 2usize..64,
    ) {
        let map = ContactMap::new(MeshSide::Object, values.clone()).unwrap();
        let bins = quantize_contact(&map, n_bins).unwrap();
        let back = dequantize_contact(&bins, n_bins, MeshSide::Object).unwrap();
        for (a, b) in values.iter().zip(&back.values) {
            prop_assert!((a - b).abs() <= 0.5 / n_bins as f64 + 1e-12);
        }
    }

    #[test]
    fn precision_recall_swap_under_exchange(
        pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..200),
    ) {
        let (predicted, truth): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
        let (p, r) = precision_recall(&predicted, &truth).unwrap();
        let (p2, r2) = precision_recall(&truth, &predicted).unwrap();
        prop_assert!((0.0..=100.0).contains(&p) && (0.0..=100.0).contains(&r));
        prop_assert_eq!((p, r), (r2, p2));
    }

    #[test]
    fn mpjpe_ignores_consistent_reordering(
        pairs in prop::collection::vec((vec3(100.0), vec3(100.0)), 1..30),
        seed in any::<u64>(),
    ) {
        let (a, b): (Vec<Vec3>, Vec<Vec3>) = pairs.into_iter().unzip();
        let mut order: Vec<usize> = (0..a.len()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng_for(seed, &[]));
        let pa: Vec<Vec3> = order.iter().map(|&i| a[i]).collect();
        let pb: Vec<Vec3> = order.iter().map(|&i| b[i]).collect();
        prop_assert!((mpjpe(&a, &b).unwrap() - mpjpe(&pa, &pb).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn features_are_reproducible(seed in any::<u64>(), n in 1usize..200) {
        let object = icosphere(20.0, 2);
        let hand = icosphere(6.0, 1).transformed(|p| p + Vec3::new(0.0, 0.0, 25.0)).unwrap();
        prop_assert_eq!(
            extract_features(&object, &hand, n, seed).unwrap(),
            extract_features(&object, &hand, n, seed).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn intersection_volume_is_symmetric_and_converges(offset in vec3(8.0), radius in 8.0f64..14.0) {
        let a = icosphere(radius, 3);
        let b = cube(10.0).transformed(|p| p + offset).unwrap();
        let ab = intersection_volume(&a, &b, 1.0).unwrap();
        let ba = intersection_volume(&b, &a, 1.0).unwrap();
        prop_assert_eq!(ab, ba);
        let fine = intersection_volume(&a, &b, 0.5).unwrap();
        prop_assert!((fine - ab).abs() < 0.1 * fine, "1 mm {ab} vs 0.5 mm {fine}");
    }

    #[test]
    fn metrics_are_invariant_under_rigid_motion((rotation, translation) in rigid(), lift in -3.0f64..3.0) {
        let object = icosphere(20.0, 3);
        let hand = icosphere(8.0, 2).transformed(|p| p + Vec3::new(0.0, 0.0, 28.0 + lift)).unwrap();
        let truth = contact_maps(&object, &hand, &CapsuleConfig::default()).unwrap().object;
        let cfg = MetricsConfig::default();
        let moved_object = object.transformed(|p| rotation * p + translation).unwrap();
        let moved_hand = hand.transformed(|p| rotation * p + translation).unwrap();
        let coverage = contact_coverage(&hand, &SignedDistance::new(&object).unwrap(), &cfg);
        let moved_coverage = contact_coverage(&moved_hand, &SignedDistance::new(&moved_object).unwrap(), &cfg);
        prop_assert_eq!(coverage, moved_coverage);
        prop_assert_eq!(
            contact_precision_recall(&hand, &object, &truth, &cfg).unwrap(),
            contact_precision_recall(&moved_hand, &moved_object, &truth, &cfg).unwrap()
        );
    }
}

#[test]
fn perturbation_noise_matches_configured_sigmas() {
    let model = synthetic_hand();
    let cfg = PerturbConfig::default();
    let base = model.zero_params();
    let mut rng = rng_for(9, &[]);
    let n = 10_000;
    let (mut theta_sq, mut trans_sq, mut angle_sq) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let p = perturb(&base, &cfg, &mut rng);
        theta_sq += p.theta[0].powi(2);
        trans_sq += p.translation[1].powi(2);
        angle_sq += p.rotation().norm().powi(2);
    }
    let rms = |s: f64| (s / n as f64).sqrt();
    let within = |measured: f64, sigma: f64| (measured - sigma).abs() <= 0.05 * sigma;
    assert!(within(rms(theta_sq), cfg.sigma_theta), "theta {}", rms(theta_sq));
    assert!(within(rms(trans_sq), cfg.sigma_translation), "translation {}", rms(trans_sq));
    assert!(
        within(rms(angle_sq).to_degrees(), cfg.sigma_rotation),
        "rotation {}",
        rms(angle_sq).to_degrees()
    );
}

/// Targets from the starting pose: the loss never ends above its start, the
/// hand moves less than 1 mm RMS and runs are bit-identical. At exact fixed
/// points (zero loss) the smoothed trace never rises.
#[test]
fn reference_targets_keep_the_start() {
    let model = synthetic_hand();
    let grasps = handcontact::dataset::synth_grasps(&model, 6, 4, &CapsuleConfig::default()).unwrap();
    let mut fixed_points = 0;
    for grasp in &grasps {
        let targets = resolve_targets(
            &TargetSource::FromReferencePose(grasp.params.clone()),
            &grasp.object,
            &model,
            &CapsuleConfig::default(),
        )
        .unwrap();
        let objective = Objective::new(&model, &grasp.object, &targets, Default::default(), Default::default()).unwrap();
        let initial = objective.loss(&grasp.params).unwrap().total;
        let cfg = OptimConfig {
            iterations: 100,
            ..OptimConfig::default()
        };
        let result = optimize(&objective, &grasp.params, &cfg).unwrap();
        assert!(result.final_loss <= initial);
        let start = model.pose(&grasp.params).unwrap().mesh.vertices;
        let end = model.pose(&result.params).unwrap().mesh.vertices;
        let rms = (start.iter().zip(&end).map(|(a, b)| (a - b).norm_squared()).sum::<f64>() / start.len() as f64).sqrt();
        assert!(rms < 1.0, "moved {rms} mm RMS");
        let again = optimize(&objective, &grasp.params, &cfg).unwrap();
        assert_eq!(result.loss_trace, again.loss_trace);
        if initial == 0.0 {
            fixed_points += 1;
            let smoothed: Vec<f64> = result.loss_trace.windows(25).map(|w| w.iter().sum::<f64>() / 25.0).collect();
            assert!(smoothed.windows(2).all(|w| w[1] <= w[0]), "smoothed trace rises: {smoothed:?}");
        }
    }
    assert!(fixed_points > 0);
}

#[test]
fn perturbed_dataset_has_expected_mpjpe_magnitude() {
    let model = synthetic_hand();
    let config = handcontact::config::RunConfig::default();
    let dataset = handcontact::experiment::roundtrip_dataset(&model, 12, &config, 0).unwrap();
    let errors: Vec<f64> = dataset
        .samples
        .iter()
        .map(|s| {
            let truth = model.pose(&s.true_params).unwrap().joints;
            let perturbed = model.pose(&s.perturbed_params).unwrap().joints;
            mpjpe(&perturbed, &truth).unwrap()
        })
        .collect();
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    assert!((40.0..=120.0).contains(&mean), "mean MPJPE {mean} mm");
}
