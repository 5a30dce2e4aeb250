//! Axis-angle rotations and the SO(3) helpers used by the kinematics.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Rotation3};

use crate::Vec3;

pub fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues' formula. Uses Taylor coefficients below 1e-4 rad.
pub fn exp_so3(axis_angle: &Vec3) -> Matrix3<f64> {
    let theta2 = axis_angle.norm_squared();
    let theta = theta2.sqrt();
    let k = skew(axis_angle);
    let (a, b) = if theta < 1e-4 {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Left Jacobian of SO(3): `exp(a + d) ~= exp(J_l(a) d) exp(a)` to first order.
pub fn left_jacobian(axis_angle: &Vec3) -> Matrix3<f64> {
    let theta2 = axis_angle.norm_squared();
    let theta = theta2.sqrt();
    let k = skew(axis_angle);
    let (a, b) = if theta < 1e-4 {
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        (
            (1.0 - theta.cos()) / theta2,
            (theta - theta.sin()) / (theta2 * theta),
        )
    };
    Matrix3::identity() + k * a + k * k * b
}

pub fn log_so3(rotation: &Matrix3<f64>) -> Vec3 {
    Rotation3::from_matrix_unchecked(*rotation).scaled_axis()
}

/// Axis-angle of `exp(left) * exp(right)`.
pub fn compose(left: &Vec3, right: &Vec3) -> Vec3 {
    log_so3(&(exp_so3(left) * exp_so3(right)))
}

/// Maps any finite axis-angle vector to the equivalent one with angle in `[0, pi]`.
pub fn canonicalize_rotation(axis_angle: &Vec3) -> Vec3 {
    let angle = axis_angle.norm();
    if angle == 0.0 || !angle.is_finite() {
        return *axis_angle;
    }
    let axis = axis_angle / angle;
    let reduced = angle.rem_euclid(TAU);
    if reduced > PI {
        -axis * (TAU - reduced)
    } else {
        axis * reduced
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn canonical_zero() {
        assert_eq!(canonicalize_rotation(&Vec3::zeros()), Vec3::zeros());
    }

    #[test]
    fn canonical_three_half_pi_about_z() {
        let r = canonicalize_rotation(&Vec3::new(0.0, 0.0, 1.5 * PI));
        assert!((r - Vec3::new(0.0, 0.0, -0.5 * PI)).norm() < 1e-12);
    }

    #[test]
    fn canonical_preserves_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let axis = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalize();
            let v = axis * rng.random_range(0.0..4.0 * PI);
            let c = canonicalize_rotation(&v);
            assert!(c.norm() <= PI + 1e-12);
            assert!((exp_so3(&v) - exp_so3(&c)).abs().max() < 1e-9);
        }
    }

    #[test]
    fn exp_matches_nalgebra() {
        let v = Vec3::new(0.3, -1.2, 0.7);
        let reference = Rotation3::from_scaled_axis(v);
        assert!((exp_so3(&v) - reference.matrix()).abs().max() < 1e-12);
        assert!((log_so3(&exp_so3(&v)) - v).norm() < 1e-12);
    }

    #[test]
    fn left_jacobian_first_order() {
        let a = Vec3::new(0.4, 0.9, -0.3);
        let d = Vec3::new(1e-6, -2e-6, 0.5e-6);
        let lhs = exp_so3(&(a + d));
        let rhs = exp_so3(&(left_jacobian(&a) * d)) * exp_so3(&a);
        assert!((lhs - rhs).abs().max() < 1e-11);
        let tiny = Vec3::new(1e-6, 0.0, 2e-6);
        assert!((left_jacobian(&tiny) - Matrix3::identity()).abs().max() < 1e-5);
    }
}
