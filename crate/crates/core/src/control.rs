//! Open-loop sawtooth actuation.
//!
//! Each module carries one servo-driven tendon group: three cables crossing
//! the module center from the vertices of its actuation face to the antipodal
//! vertices. The servo winds the tendons in along a sawtooth and releases them
//! instantly at the end of every period.

use serde::{Deserialize, Serialize};

/// Largest fraction of its natural length a tendon can be wound in.
pub const MAX_CONTRACTION: f64 = 0.35;

/// Tendon stiffness relative to the passive cable stiffness of the module.
pub const ACTUATION_STIFFNESS_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlGene {
    /// Hz, in `[0, 1]`.
    pub frequency: f64,
    /// Fraction of the full servo stroke, in `[0, 1]`.
    pub amplitude: f64,
    /// Fraction of one period, in `[0, 1)`.
    pub phase: f64,
}

impl ControlGene {
    pub const REST: ControlGene = ControlGene {
        frequency: 0.0,
        amplitude: 0.0,
        phase: 0.0,
    };

    pub fn in_range(&self) -> bool {
        (0.0..=1.0).contains(&self.frequency) && (0.0..=1.0).contains(&self.amplitude) && (0.0..1.0).contains(&self.phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuationGroup {
    /// Indices into the robot's cable list.
    pub cable_ids: [usize; 3],
    /// Vertex-to-antipode distance in the canonical module.
    pub natural_length: f64,
    pub max_contraction: f64,
}

/// Servo position in `[0, 1)`: `frac(frequency * t + phase)`.
pub fn sawtooth(t: f64, gene: &ControlGene) -> f64 {
    let x = gene.frequency * t + gene.phase;
    let s = x - x.floor();
    // frac can round up to exactly 1.0 for tiny negative x
    if s >= 1.0 {
        0.0
    } else {
        s
    }
}

/// Rest length of every tendon in `group` at time `t`.
pub fn rest_length_at(t: f64, gene: &ControlGene, group: &ActuationGroup) -> f64 {
    group.natural_length * (1.0 - group.max_contraction * gene.amplitude * sawtooth(t, gene))
}

/// Source of tendon rest lengths while stepping the physics.
pub trait ActuationSchedule {
    fn rest_length(&self, group_index: usize, group: &ActuationGroup, t: f64) -> f64;
}

/// Every tendon held at its natural length.
#[derive(Debug, Clone, Copy, Default)]
pub struct Relaxed;

impl ActuationSchedule for Relaxed {
    fn rest_length(&self, _: usize, group: &ActuationGroup, _: f64) -> f64 {
        group.natural_length
    }
}

/// Tendons frozen at whatever rest length they had at a given instant.
#[derive(Debug, Clone)]
pub struct Frozen(pub Vec<f64>);

impl ActuationSchedule for Frozen {
    fn rest_length(&self, group_index: usize, _: &ActuationGroup, _: f64) -> f64 {
        self.0[group_index]
    }
}

/// One control gene per module, indexed like the actuation groups.
impl ActuationSchedule for [ControlGene] {
    fn rest_length(&self, group_index: usize, group: &ActuationGroup, t: f64) -> f64 {
        rest_length_at(t, &self[group_index], group)
    }
}

impl ActuationSchedule for Vec<ControlGene> {
    fn rest_length(&self, group_index: usize, group: &ActuationGroup, t: f64) -> f64 {
        self.as_slice().rest_length(group_index, group, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const GROUP: ActuationGroup = ActuationGroup {
        cable_ids: [0, 1, 2],
        natural_length: 0.2,
        max_contraction: MAX_CONTRACTION,
    };

    fn gene(frequency: f64, amplitude: f64, phase: f64) -> ControlGene {
        ControlGene {
            frequency,
            amplitude,
            phase,
        }
    }

    #[test]
    fn sawtooth_values() {
        assert_eq!(sawtooth(0.0, &gene(0.7, 1.0, 0.0)), 0.0);
        assert_eq!(sawtooth(0.5, &gene(1.0, 1.0, 0.0)), 0.5);
        assert_eq!(sawtooth(0.0, &gene(0.5, 1.0, 0.5)), 0.5);
    }

    #[test]
    fn rest_length_examples() {
        for t in [0.0, 0.3, 7.9] {
            assert_eq!(rest_length_at(t, &gene(0.8, 0.0, 0.3), &GROUP), GROUP.natural_length);
            assert_eq!(rest_length_at(t, &gene(0.0, 1.0, 0.0), &GROUP), GROUP.natural_length);
        }
        // just before the reset
        let almost = rest_length_at(0.999_999_999, &gene(1.0, 1.0, 0.0), &GROUP);
        assert!((almost - 0.65 * GROUP.natural_length).abs() < 1e-9);
        for amplitude in [0.0, 0.4, 1.0] {
            let r = rest_length_at(0.0, &gene(0.5, amplitude, 0.5), &GROUP);
            assert!((r - GROUP.natural_length * (1.0 - 0.175 * amplitude)).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn periodic(f in 0.01f64..=1.0, a in 0.0f64..=1.0, p in 0.0f64..1.0, t in 0.0f64..20.0) {
            let g = gene(f, a, p);
            let d = (sawtooth(t + 1.0 / f, &g) - sawtooth(t, &g)).abs();
            // near a reset the two values may sit on opposite sides of it
            prop_assert!(d < 1e-12 || (1.0 - d) < 1e-12);
        }

        #[test]
        fn bounded(f in 0.0f64..=1.0, a in 0.0f64..=1.0, p in 0.0f64..1.0, t in 0.0f64..100.0) {
            let s = sawtooth(t, &gene(f, a, p));
            prop_assert!((0.0..1.0).contains(&s));
            let r = rest_length_at(t, &gene(f, a, p), &GROUP);
            prop_assert!(r <= GROUP.natural_length);
            prop_assert!(r >= GROUP.natural_length * (1.0 - MAX_CONTRACTION));
        }

        #[test]
        fn phase_shift_is_time_shift(f in 0.05f64..=1.0, p in 0.0f64..0.5, d in 0.0f64..0.5, t in 0.0f64..10.0) {
            let shifted = sawtooth(t, &gene(f, 1.0, p + d));
            let delayed = sawtooth(t + d / f, &gene(f, 1.0, p));
            let diff = (shifted - delayed).abs();
            prop_assert!(diff < 1e-12 || (1.0 - diff) < 1e-12);
        }

        #[test]
        fn non_increasing_between_resets(f in 0.05f64..=1.0, a in 0.0f64..=1.0, p in 0.0f64..1.0) {
            let g = gene(f, a, p);
            let period = 1.0 / f;
            let start = (1.0 - p) / f; // first reset
            let mut prev = f64::INFINITY;
            for k in 0..100 {
                let t = start + period * (k as f64 + 0.5) / 101.0;
                let r = rest_length_at(t, &g, &GROUP);
                prop_assert!(r <= prev + 1e-15);
                prev = r;
            }
        }
    }
}
