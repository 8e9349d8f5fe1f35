use crate::geometry::Vec3;

use super::{BodyState, CableSpec, SimParams};

/// Force on the first endpoint of a tension-only spring-damper. The second
/// endpoint receives the negation.
#[inline]
pub(crate) fn tension_on_first(
    pa: &Vec3,
    pb: &Vec3,
    va: &Vec3,
    vb: &Vec3,
    rest_length: f64,
    stiffness: f64,
    damping: f64,
) -> Vec3 {
    let d = pb - pa;
    let length = d.norm();
    if length <= rest_length {
        return Vec3::zeros();
    }
    let dir = d / length;
    let rate = (vb - va).dot(&dir);
    let tension = stiffness * (length - rest_length) + damping * rate;
    if tension <= 0.0 {
        return Vec3::zeros();
    }
    dir * tension
}

/// Forces on the two endpoints of `cable` using its stored rest length.
///
/// Cables only pull: a cable at or below its rest length exerts nothing, and
/// damping can never turn the tension into a push.
pub fn cable_force(state: &BodyState, cable: &CableSpec) -> [Vec3; 2] {
    let [a, b] = cable.endpoints;
    let f = tension_on_first(
        &state.positions[a],
        &state.positions[b],
        &state.velocities[a],
        &state.velocities[b],
        cable.rest_length,
        cable.stiffness,
        cable.damping,
    );
    [f, -f]
}

/// Magnitude of the ground's normal reaction on a node, zero when the node is
/// above the plane `z = 0` or separating fast enough to cancel the penalty.
#[inline]
pub(crate) fn ground_normal(position: &Vec3, velocity: &Vec3, params: &SimParams) -> f64 {
    if !params.ground_enabled || position.z >= 0.0 {
        return 0.0;
    }
    let depth = -position.z;
    (params.ground_normal_stiffness * depth - params.ground_normal_damping * velocity.z).max(0.0)
}

/// Penalty contact with regularized Coulomb friction against the plane `z = 0`.
///
/// Friction opposes the tangential velocity with magnitude `mu * N`, scaled
/// down linearly below the regularization speed.
pub fn ground_contact_force(position: &Vec3, velocity: &Vec3, params: &SimParams) -> Vec3 {
    let normal = ground_normal(position, velocity, params);
    if normal == 0.0 {
        return Vec3::zeros();
    }
    let tangential = Vec3::new(velocity.x, velocity.y, 0.0);
    let speed = tangential.norm();
    let scale = params.friction_coefficient * normal / speed.max(params.friction_regularization_speed);
    Vec3::new(-tangential.x * scale, -tangential.y * scale, normal)
}

/// Implicit update of a contact node's tangential velocity under the same
/// regularized friction law: solves `m (v - v') = h f(v')` for `v'`.
#[inline]
pub(crate) fn apply_friction(velocity: &mut Vec3, normal: f64, mass: f64, params: &SimParams) {
    let speed = (velocity.x * velocity.x + velocity.y * velocity.y).sqrt();
    if speed == 0.0 {
        return;
    }
    let drop = params.timestep * params.friction_coefficient * normal / mass;
    let eps = params.friction_regularization_speed;
    let scale = if speed - drop >= eps {
        1.0 - drop / speed
    } else {
        1.0 / (1.0 + drop / eps)
    };
    velocity.x *= scale;
    velocity.y *= scale;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(pa: Vec3, pb: Vec3) -> BodyState {
        BodyState {
            positions: vec![pa, pb],
            velocities: vec![Vec3::zeros(); 2],
            time: 0.0,
        }
    }

    fn cable(rest_length: f64) -> CableSpec {
        CableSpec {
            endpoints: [0, 1],
            rest_length,
            stiffness: 200.0,
            damping: 0.5,
            actuation_group: None,
        }
    }

    #[test]
    fn hooke_tension() {
        let s = state(Vec3::zeros(), Vec3::new(0.15, 0.0, 0.0));
        let [fa, fb] = cable_force(&s, &cable(0.10));
        assert!((fa - Vec3::new(10.0, 0.0, 0.0)).norm() < 1e-12);
        assert_eq!(fa + fb, Vec3::zeros());
    }

    #[test]
    fn slack_cable_is_silent() {
        let s = state(Vec3::zeros(), Vec3::new(0.0, 0.08, 0.0));
        assert_eq!(cable_force(&s, &cable(0.10)), [Vec3::zeros(); 2]);
        let s = state(Vec3::new(1.0, 2.0, 3.0), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(cable_force(&s, &cable(0.10)), [Vec3::zeros(); 2]);
    }

    #[test]
    fn damping_never_pushes() {
        let mut s = state(Vec3::zeros(), Vec3::new(0.101, 0.0, 0.0));
        s.velocities[1] = Vec3::new(-10.0, 0.0, 0.0);
        assert_eq!(cable_force(&s, &cable(0.10)), [Vec3::zeros(); 2]);
    }

    #[test]
    fn contact_cases() {
        let params = SimParams::default();
        let above = ground_contact_force(&Vec3::new(0.0, 0.0, 0.01), &Vec3::new(1.0, 0.0, -1.0), &params);
        assert_eq!(above, Vec3::zeros());

        let resting = ground_contact_force(&Vec3::new(0.3, 0.2, -0.001), &Vec3::zeros(), &params);
        assert_eq!((resting.x, resting.y), (0.0, 0.0));
        assert!(resting.z > 0.0);

        for speed in [1e-5, 5e-4, 1e-3, 0.2, 5.0] {
            let f = ground_contact_force(&Vec3::new(0.0, 0.0, -0.002), &Vec3::new(speed, -speed, 0.1), &params);
            let tangential = (f.x * f.x + f.y * f.y).sqrt();
            assert!(tangential <= params.friction_coefficient * f.z + 1e-12);
            assert!(f.x < 0.0 && f.y > 0.0);
        }
    }

    #[test]
    fn implicit_friction_never_reverses_sliding() {
        let params = SimParams::default();
        for speed in [1e-6, 1e-3, 0.01, 1.0] {
            let mut v = Vec3::new(speed, 0.0, 0.0);
            apply_friction(&mut v, 5.0, 0.01, &params);
            assert!(v.x >= 0.0 && v.x < speed);
        }
    }
}
