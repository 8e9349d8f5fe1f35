use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::DecodedRobot;
use crate::geometry::Vec3;
use crate::physics::Trajectory;

pub const MIN_CLASSIFIABLE_DURATION: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gait {
    /// Peristaltic wave along a chain of modules.
    #[serde(rename = "CAT")]
    Caterpillar,
    #[serde(rename = "Hop")]
    Hop,
    #[serde(rename = "Rol")]
    Roll,
    /// Both the hop and the roll thresholds fire.
    #[serde(rename = "Hop/Rol")]
    HopRoll,
    #[serde(rename = "Mixed")]
    Mixed,
    #[serde(rename = "Static")]
    Static,
}

impl Gait {
    pub fn label(self) -> &'static str {
        match self {
            Gait::Caterpillar => "CAT",
            Gait::Hop => "Hop",
            Gait::Roll => "Rol",
            Gait::HopRoll => "Hop/Rol",
            Gait::Mixed => "Mixed",
            Gait::Static => "Static",
        }
    }

    pub fn hops(self) -> bool {
        matches!(self, Gait::Hop | Gait::HopRoll)
    }

    pub fn rolls(self) -> bool {
        matches!(self, Gait::Roll | Gait::HopRoll)
    }
}

impl std::fmt::Display for Gait {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaitThresholds {
    /// m; below this the robot is static.
    pub static_displacement: f64,
    /// Airborne sample fraction above which the robot hops.
    pub hop_airborne_fraction: f64,
    /// Airborne sample fraction a crawler may not exceed.
    pub crawl_airborne_fraction: f64,
    /// rad of net body rotation about the horizontal axis across the travel
    /// direction.
    pub roll_angle: f64,
    /// |Spearman correlation| between chain position and phase.
    pub phase_wave_correlation: f64,
    pub caterpillar_min_modules: usize,
}

impl Default for GaitThresholds {
    fn default() -> Self {
        Self {
            static_displacement: 0.02,
            hop_airborne_fraction: 0.15,
            crawl_airborne_fraction: 0.05,
            roll_angle: std::f64::consts::PI,
            phase_wave_correlation: 0.7,
            caterpillar_min_modules: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitFeatures {
    pub displacement: f64,
    pub airborne_fraction: f64,
    pub roll_angle: f64,
    pub phase_wave: f64,
    pub module_count: usize,
}

/// Best-fit rotation taking the centered point cloud `from` onto `to`.
fn kabsch(from: &[Vec3], to: &[Vec3]) -> Matrix3<f64> {
    let n = from.len() as f64;
    let cf: Vec3 = from.iter().sum::<Vec3>() / n;
    let ct: Vec3 = to.iter().sum::<Vec3>() / n;
    let mut h = Matrix3::zeros();
    for (p, q) in from.iter().zip(to) {
        h += (p - cf) * (q - ct).transpose();
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    let d = (v_t.transpose() * u.transpose()).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d));
    v_t.transpose() * fix * u.transpose()
}

/// Net body rotation about `axis`, accumulated sample to sample so that full
/// turns are counted.
fn accumulated_rotation(trajectory: &Trajectory, axis: &Vec3) -> f64 {
    trajectory
        .positions
        .windows(2)
        .map(|w| {
            let r = Rotation3::from_matrix_unchecked(kabsch(&w[0], &w[1]));
            UnitQuaternion::from_rotation_matrix(&r).scaled_axis().dot(axis)
        })
        .sum()
}

fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mean_rank = (i + j) as f64 / 2.0;
        for &k in &order[i..=j] {
            out[k] = mean_rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; 0 when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

pub fn gait_features(trajectory: &Trajectory, decoded: &DecodedRobot) -> Result<GaitFeatures> {
    let duration = trajectory.duration();
    if trajectory.len() < 2 || duration < MIN_CLASSIFIABLE_DURATION {
        return Err(Error::ClassificationUnavailable {
            duration,
            required: MIN_CLASSIFIABLE_DURATION,
        });
    }
    let displacement = trajectory.horizontal_displacement();
    let airborne = (0..trajectory.len()).filter(|&i| trajectory.contact_count(i) == 0).count();

    let (first, last) = (trajectory.com[0], trajectory.com[trajectory.len() - 1]);
    let travel = Vec3::new(last.x - first.x, last.y - first.y, 0.0);
    let roll_angle = if travel.norm() > 0.0 {
        let across = Vec3::z().cross(&travel).normalize();
        accumulated_rotation(trajectory, &across)
    } else {
        0.0
    };

    let depth: Vec<f64> = decoded.depths().into_iter().map(|d| d as f64).collect();
    let phase: Vec<f64> = decoded.control.iter().map(|c| c.phase).collect();
    Ok(GaitFeatures {
        displacement,
        airborne_fraction: airborne as f64 / trajectory.len() as f64,
        roll_angle,
        phase_wave: spearman(&depth, &phase),
        module_count: decoded.module_count(),
    })
}

/// Labels the locomotion strategy seen in a trajectory.
///
/// Module chain position is the module's depth in the body tree.
pub fn classify_gait(trajectory: &Trajectory, decoded: &DecodedRobot, thresholds: &GaitThresholds) -> Result<Gait> {
    let f = gait_features(trajectory, decoded)?;
    if f.displacement < thresholds.static_displacement {
        return Ok(Gait::Static);
    }
    let hop = f.airborne_fraction > thresholds.hop_airborne_fraction;
    let roll = f.roll_angle.abs() > thresholds.roll_angle;
    Ok(match (hop, roll) {
        (true, true) => Gait::HopRoll,
        (true, false) => Gait::Hop,
        (false, true) => Gait::Roll,
        (false, false)
            if f.airborne_fraction <= thresholds.crawl_airborne_fraction
                && f.phase_wave.abs() > thresholds.phase_wave_correlation
                && f.module_count >= thresholds.caterpillar_min_modules =>
        {
            Gait::Caterpillar
        }
        _ => Gait::Mixed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::ControlGene;
    use crate::geometry::{build_canonical_module, ModuleSpec};

    fn chain(phases: &[f64]) -> DecodedRobot {
        DecodedRobot {
            modules: (0..phases.len())
                .map(|i| ModuleSpec {
                    parent: i.checked_sub(1),
                    parent_face: 0,
                    orientation: 0,
                    actuation_face: 0,
                })
                .collect(),
            control: phases
                .iter()
                .map(|&phase| ControlGene {
                    frequency: 0.5,
                    amplitude: 0.5,
                    phase,
                })
                .collect(),
        }
    }

    /// Rigid body sliding along x (rotating about y by `turns` full turns),
    /// touching the ground except where `airborne` says otherwise.
    fn synthetic(distance: f64, turns: f64, airborne: impl Fn(usize) -> bool) -> Trajectory {
        let body = build_canonical_module(0.2).unwrap().nodes;
        let samples = 501;
        let mut t = Trajectory {
            times: vec![],
            positions: vec![],
            contacts: vec![],
            com: vec![],
        };
        for k in 0..samples {
            let s = k as f64 / (samples - 1) as f64;
            let rot = Rotation3::from_axis_angle(&Vec3::y_axis(), turns * 2.0 * std::f64::consts::PI * s);
            let shift = Vec3::new(distance * s, 0.0, 0.2);
            let nodes: Vec<Vec3> = body.iter().map(|p| rot * p + shift).collect();
            t.com.push(nodes.iter().sum::<Vec3>() / nodes.len() as f64);
            t.contacts.push((0..nodes.len()).map(|i| i == 0 && !airborne(k)).collect());
            t.positions.push(nodes);
            t.times.push(k as f64 * 0.01);
        }
        t
    }

    #[test]
    fn caterpillar() {
        let d = chain(&[0.0, 0.1, 0.2, 0.3, 0.4, 0.5]);
        let t = synthetic(0.3, 0.0, |_| false);
        assert_eq!(classify_gait(&t, &d, &GaitThresholds::default()).unwrap(), Gait::Caterpillar);
        // too few modules for a peristaltic wave
        let d = chain(&[0.0, 0.2, 0.4]);
        assert_eq!(classify_gait(&t, &d, &GaitThresholds::default()).unwrap(), Gait::Mixed);
    }

    #[test]
    fn hop() {
        let d = chain(&[0.0, 0.3]);
        let t = synthetic(0.3, 0.0, |k| k % 10 < 3);
        let f = gait_features(&t, &d).unwrap();
        assert!((f.airborne_fraction - 0.3).abs() < 0.01);
        assert_eq!(classify_gait(&t, &d, &GaitThresholds::default()).unwrap(), Gait::Hop);
    }

    #[test]
    fn roll_and_hop_roll() {
        let d = chain(&[0.0, 0.3]);
        let t = synthetic(0.6, 0.75, |_| false);
        let f = gait_features(&t, &d).unwrap();
        assert!((f.roll_angle.abs() - 1.5 * std::f64::consts::PI).abs() < 1e-6, "roll {}", f.roll_angle);
        assert_eq!(classify_gait(&t, &d, &GaitThresholds::default()).unwrap(), Gait::Roll);
        let t = synthetic(0.6, 0.75, |k| k % 10 < 3);
        assert_eq!(classify_gait(&t, &d, &GaitThresholds::default()).unwrap(), Gait::HopRoll);
    }

    #[test]
    fn static_robot() {
        let d = chain(&[0.0, 0.3]);
        let t = synthetic(0.0, 0.0, |k| k % 2 == 0);
        assert_eq!(classify_gait(&t, &d, &GaitThresholds::default()).unwrap(), Gait::Static);
    }

    #[test]
    fn short_trajectory_is_unclassifiable() {
        let d = chain(&[0.0, 0.3]);
        let mut t = synthetic(0.3, 0.0, |_| false);
        t.times.truncate(150);
        t.positions.truncate(150);
        t.contacts.truncate(150);
        t.com.truncate(150);
        assert!(matches!(
            classify_gait(&t, &d, &GaitThresholds::default()),
            Err(Error::ClassificationUnavailable { .. })
        ));
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 1.0, 0.0]) + 1.0).abs() < 1e-12);
        assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![1.5, 0.0, 1.5]);
    }
}
