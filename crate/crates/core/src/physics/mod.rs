//! Point-mass tensegrity dynamics.
//!
//! Nodes carry all the mass. Cables are tension-only spring-dampers, struts
//! and inter-module latches are hard distance constraints enforced by position
//! projection after every semi-implicit Euler step, and nodes touch a flat
//! ground through a penalty spring-damper with regularized Coulomb friction.

mod forces;
mod trajectory;

use serde::{Deserialize, Serialize};

use crate::control::{ActuationSchedule, ControlGene, Relaxed};
use crate::error::{Error, Result};
use crate::geometry::{AssembledRobot, Vec3, NODE_MASS};

pub use forces::{cable_force, ground_contact_force};
pub use trajectory::Trajectory;

pub const LOW_YOUNGS_MODULUS: f64 = 20e6;
pub const HIGH_STIFFNESS_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StiffnessRegime {
    #[serde(rename = "LOW")]
    Low,
    #[serde(rename = "HIGH")]
    High,
}

impl StiffnessRegime {
    pub fn youngs_modulus(self, low: f64) -> f64 {
        match self {
            StiffnessRegime::Low => low,
            StiffnessRegime::High => HIGH_STIFFNESS_FACTOR * low,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            StiffnessRegime::Low => "LOW",
            StiffnessRegime::High => "HIGH",
        }
    }
}

impl std::fmt::Display for StiffnessRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for StiffnessRegime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LOW" => Ok(StiffnessRegime::Low),
            "HIGH" => Ok(StiffnessRegime::High),
            other => Err(Error::InvalidArgument(format!("unknown stiffness regime {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialParams {
    /// Pa, within the soft elastic range 10-100 MPa.
    pub youngs_modulus: f64,
    /// m².
    pub cable_cross_section: f64,
    pub cable_damping_ratio: f64,
    /// Passive cables rest at `(1 - prestrain)` times their canonical length.
    pub cable_prestrain: f64,
    /// Pa. Tendon stiffness is `ACTUATION_STIFFNESS_FACTOR` times that of a
    /// passive cable made of this material; the servo side of a module does
    /// not change with the printed material.
    pub actuator_youngs_modulus: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            youngs_modulus: LOW_YOUNGS_MODULUS,
            cable_cross_section: 1e-6,
            cable_damping_ratio: 0.1,
            cable_prestrain: 0.1,
            actuator_youngs_modulus: LOW_YOUNGS_MODULUS,
        }
    }
}

impl MaterialParams {
    pub fn for_regime(regime: StiffnessRegime) -> Self {
        MaterialSettings::default().for_regime(regime)
    }

    pub fn validate(&self) -> Result<()> {
        if !(10e6..=100e6).contains(&self.youngs_modulus) {
            return Err(Error::InvalidArgument(format!(
                "Young's modulus {} Pa is outside the 10-100 MPa elastic range",
                self.youngs_modulus
            )));
        }
        if !(self.cable_cross_section > 0.0) || !(self.cable_damping_ratio >= 0.0) {
            return Err(Error::InvalidArgument("cable cross-section must be positive and damping non-negative".into()));
        }
        if !(self.actuator_youngs_modulus > 0.0 && self.actuator_youngs_modulus.is_finite()) {
            return Err(Error::InvalidArgument("actuator modulus must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.cable_prestrain) {
            return Err(Error::InvalidArgument(format!("cable prestrain {} not in [0, 1)", self.cable_prestrain)));
        }
        Ok(())
    }
}

/// Material as configured for an experiment: the HIGH regime uses
/// `HIGH_STIFFNESS_FACTOR` times the LOW modulus for its cables, while the
/// tendons keep the LOW-based stiffness in both regimes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaterialSettings {
    pub low_youngs_modulus: f64,
    pub cable_cross_section: f64,
    pub cable_damping_ratio: f64,
    pub cable_prestrain: f64,
}

impl Default for MaterialSettings {
    fn default() -> Self {
        let m = MaterialParams::default();
        Self {
            low_youngs_modulus: LOW_YOUNGS_MODULUS,
            cable_cross_section: m.cable_cross_section,
            cable_damping_ratio: m.cable_damping_ratio,
            cable_prestrain: m.cable_prestrain,
        }
    }
}

impl MaterialSettings {
    pub fn for_regime(&self, regime: StiffnessRegime) -> MaterialParams {
        MaterialParams {
            youngs_modulus: regime.youngs_modulus(self.low_youngs_modulus),
            cable_cross_section: self.cable_cross_section,
            cable_damping_ratio: self.cable_damping_ratio,
            cable_prestrain: self.cable_prestrain,
            actuator_youngs_modulus: self.low_youngs_modulus,
        }
    }

    /// Both regimes must be valid materials.
    pub fn validate(&self) -> Result<()> {
        self.for_regime(StiffnessRegime::Low).validate()?;
        self.for_regime(StiffnessRegime::High).validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CableSpec {
    pub endpoints: [usize; 2],
    pub rest_length: f64,
    /// N/m.
    pub stiffness: f64,
    /// N·s/m.
    pub damping: f64,
    /// Set for tendons; their rest length comes from the actuation schedule.
    pub actuation_group: Option<usize>,
}

impl CableSpec {
    pub fn actuated(&self) -> bool {
        self.actuation_group.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub timestep: f64,
    /// Downward acceleration, m/s².
    pub gravity: f64,
    /// When false nodes fly through `z = 0`.
    pub ground_enabled: bool,
    pub ground_normal_stiffness: f64,
    pub ground_normal_damping: f64,
    pub friction_coefficient: f64,
    /// Below this tangential speed friction is viscous rather than Coulomb.
    pub friction_regularization_speed: f64,
    pub constraint_iterations: usize,
    /// Viscous drag on every node, N·s/m.
    pub node_damping: f64,
    pub settle_duration: f64,
    /// Node drag used in place of `node_damping` while settling, N·s/m.
    pub settle_damping: f64,
    pub sample_interval: f64,
}

const GROUND_STIFFNESS: f64 = 4000.0;

impl Default for SimParams {
    fn default() -> Self {
        Self {
            timestep: 5e-4,
            gravity: 9.81,
            ground_enabled: true,
            ground_normal_stiffness: GROUND_STIFFNESS,
            // critical for a single node
            ground_normal_damping: 2.0 * (GROUND_STIFFNESS * NODE_MASS).sqrt(),
            friction_coefficient: 0.6,
            friction_regularization_speed: 1e-3,
            constraint_iterations: 4,
            node_damping: 0.0,
            settle_duration: 2.0,
            settle_damping: 0.1,
            sample_interval: 0.01,
        }
    }
}

impl SimParams {
    /// Gravity off, no ground.
    pub fn free_space() -> Self {
        Self {
            gravity: 0.0,
            ground_enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if !(self.timestep > 0.0 && self.timestep.is_finite()) {
            return bad("timestep must be positive");
        }
        if !(self.friction_coefficient >= 0.0) || !(self.friction_regularization_speed > 0.0) {
            return bad("friction coefficient must be non-negative and regularization speed positive");
        }
        if !(self.ground_normal_stiffness >= 0.0 && self.ground_normal_damping >= 0.0) {
            return bad("ground stiffness and damping must be non-negative");
        }
        if self.constraint_iterations == 0 {
            return bad("constraint_iterations must be at least 1");
        }
        if !(self.node_damping >= 0.0 && self.settle_damping >= 0.0) {
            return bad("node damping must be non-negative");
        }
        if !(self.settle_duration >= 0.0) || !self.gravity.is_finite() {
            return bad("settle duration must be non-negative and gravity finite");
        }
        let ratio = self.sample_interval / self.timestep;
        if !(ratio >= 1.0) || (ratio - ratio.round()).abs() > 1e-6 {
            return bad("sample_interval must be a positive multiple of timestep");
        }
        Ok(())
    }

    pub fn steps_for(&self, duration: f64) -> usize {
        (duration / self.timestep).round() as usize
    }

    pub fn steps_per_sample(&self) -> usize {
        (self.sample_interval / self.timestep).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BodyState {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub time: f64,
}

impl BodyState {
    /// Robot at its assembled pose, motionless, at `t = 0`.
    pub fn at_rest(robot: &AssembledRobot) -> Self {
        Self {
            positions: robot.node_positions.clone(),
            velocities: vec![Vec3::zeros(); robot.node_count()],
            time: 0.0,
        }
    }

    pub fn center_of_mass(&self) -> Vec3 {
        let sum: Vec3 = self.positions.iter().sum();
        sum / self.positions.len() as f64
    }

    pub fn momentum(&self, node_mass: f64) -> Vec3 {
        self.velocities.iter().sum::<Vec3>() * node_mass
    }

    pub fn max_speed(&self) -> f64 {
        self.velocities.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn kinetic_energy(&self, node_mass: f64) -> f64 {
        0.5 * node_mass * self.velocities.iter().map(|v| v.norm_squared()).sum::<f64>()
    }

    fn is_finite(&self) -> bool {
        self.positions.iter().chain(&self.velocities).all(|v| v.iter().all(|c| c.is_finite()))
    }
}

/// Mechanical energy split by source, in joules.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Energy {
    pub kinetic: f64,
    pub gravitational: f64,
    pub cable: f64,
    pub ground: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.kinetic + self.gravitational + self.cable + self.ground
    }
}

/// Stepper bound to one robot. Holds scratch buffers so stepping does not
/// allocate.
///
/// Latched nodes always coincide, so each set of latched nodes is stepped as
/// one body carrying their combined mass; nodes without latches are bodies of
/// their own.
pub struct Simulator<'a> {
    robot: &'a AssembledRobot,
    params: SimParams,
    body_of: Vec<usize>,
    body_mass: Vec<f64>,
    struts: Vec<([usize; 2], f64)>,
    forces: Vec<Vec3>,
    normals: Vec<f64>,
    rest: Vec<f64>,
    position: Vec<Vec3>,
    velocity: Vec<Vec3>,
    previous: Vec<Vec3>,
    friction_impulse: Vec<Vec3>,
}

const SWEEP_LIMIT: usize = 100;
const STRUT_TOLERANCE: f64 = 1e-12;
/// Metres.
const CONTACT_TOLERANCE: f64 = 1e-12;

impl<'a> Simulator<'a> {
    pub fn new(robot: &'a AssembledRobot, params: SimParams) -> Result<Self> {
        params.validate()?;
        let body_of = weld_bodies(robot);
        let bodies = body_of.iter().copied().max().map_or(0, |b| b + 1);
        let mut body_mass = vec![0.0; bodies];
        for &b in &body_of {
            body_mass[b] += robot.node_mass;
        }
        let struts = robot
            .struts
            .iter()
            .map(|s| ([body_of[s.nodes[0]], body_of[s.nodes[1]]], s.target_length))
            .collect();
        Ok(Self {
            robot,
            params,
            body_of,
            body_mass,
            struts,
            forces: vec![Vec3::zeros(); bodies],
            normals: vec![0.0; bodies],
            rest: vec![0.0; robot.actuation_groups.len()],
            position: vec![Vec3::zeros(); bodies],
            velocity: vec![Vec3::zeros(); bodies],
            previous: vec![Vec3::zeros(); bodies],
            friction_impulse: vec![Vec3::zeros(); bodies],
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    fn sample_rest_lengths(&mut self, schedule: &(impl ActuationSchedule + ?Sized), t: f64) {
        for (g, group) in self.robot.actuation_groups.iter().enumerate() {
            self.rest[g] = schedule.rest_length(g, group, t);
        }
    }

    fn cable_rest(&self, cable: &CableSpec) -> f64 {
        match cable.actuation_group {
            Some(g) => self.rest[g],
            None => cable.rest_length,
        }
    }

    /// Advances `state` by one timestep.
    ///
    /// Forces are evaluated at the start of the step and velocities updated
    /// (node drag implicitly), then positions. Ground friction and struts are
    /// then resolved together on positions, and velocities are re-derived
    /// from the resulting displacement.
    pub fn step(&mut self, state: &mut BodyState, schedule: &(impl ActuationSchedule + ?Sized)) -> Result<()> {
        let h = self.params.timestep;
        let m = self.robot.node_mass;
        self.sample_rest_lengths(schedule, state.time);

        for b in 0..self.position.len() {
            self.position[b] = Vec3::zeros();
            self.velocity[b] = Vec3::zeros();
            self.normals[b] = 0.0;
            self.forces[b] = Vec3::new(0.0, 0.0, -self.params.gravity * self.body_mass[b]);
        }
        for (i, &b) in self.body_of.iter().enumerate() {
            self.position[b] += state.positions[i] * m;
            self.velocity[b] += state.velocities[i] * m;
            let normal = forces::ground_normal(&state.positions[i], &state.velocities[i], &self.params);
            self.normals[b] += normal;
            self.forces[b].z += normal;
        }
        for cable in &self.robot.cables {
            let [a, b] = cable.endpoints;
            let f = forces::tension_on_first(
                &state.positions[a],
                &state.positions[b],
                &state.velocities[a],
                &state.velocities[b],
                self.cable_rest(cable),
                cable.stiffness,
                cable.damping,
            );
            self.forces[self.body_of[a]] += f;
            self.forces[self.body_of[b]] -= f;
        }

        let drag = 1.0 / (1.0 + h * self.params.node_damping / m);
        for b in 0..self.position.len() {
            let inv_mass = 1.0 / self.body_mass[b];
            self.position[b] *= inv_mass;
            self.previous[b] = self.position[b];
            let v = &mut self.velocity[b];
            *v *= inv_mass;
            *v += self.forces[b] * (h * inv_mass);
            *v *= drag;
            self.position[b] += *v * h;
        }

        self.resolve();
        let inv_h = 1.0 / h;
        for b in 0..self.position.len() {
            self.velocity[b] = (self.position[b] - self.previous[b]) * inv_h;
        }
        for (i, &b) in self.body_of.iter().enumerate() {
            state.positions[i] = self.position[b];
            state.velocities[i] = self.velocity[b];
        }
        state.time += h;
        if !state.is_finite() {
            return Err(Error::SimulationDiverged { time: state.time });
        }
        Ok(())
    }

    /// Gauss-Seidel passes over ground friction and struts on the end-of-step
    /// positions: at least `constraint_iterations` of them, and more while
    /// contacts or strut lengths are still moving. Friction acts on the displacement over the step and keeps
    /// its accumulated impulse per body, so repeated passes solve one
    /// implicit friction law rather than applying it again. Struts are
    /// corrected along their direction at the start of the step (SHAKE),
    /// split by inverse mass.
    fn resolve(&mut self) {
        let h = self.params.timestep;
        for p in self.friction_impulse.iter_mut() {
            *p = Vec3::zeros();
        }
        let mut converged = false;
        let rounds = self.params.constraint_iterations.max(SWEEP_LIMIT);
        for round in 1..=rounds {
            let mut moved = 0.0f64;
            for b in 0..self.position.len() {
                let normal = self.normals[b];
                if normal <= 0.0 {
                    continue;
                }
                let mass = self.body_mass[b];
                let step = self.position[b] - self.previous[b];
                let mut v = Vec3::new(step.x / h, step.y / h, 0.0) + self.friction_impulse[b] / mass;
                let free = v;
                forces::apply_friction(&mut v, normal, mass, &self.params);
                self.friction_impulse[b] = (free - v) * mass;
                let x = self.previous[b].x + v.x * h;
                let y = self.previous[b].y + v.y * h;
                moved = moved.max((x - self.position[b].x).abs()).max((y - self.position[b].y).abs());
                self.position[b].x = x;
                self.position[b].y = y;
            }
            let error = self.strut_sweep();
            converged = moved <= CONTACT_TOLERANCE && error <= STRUT_TOLERANCE;
            if converged && round >= self.params.constraint_iterations {
                break;
            }
        }
        if !converged {
            for _ in 0..SWEEP_LIMIT {
                if self.strut_sweep() <= STRUT_TOLERANCE {
                    break;
                }
            }
        }
    }

    /// One pass over all struts; returns the largest relative length error
    /// seen before correction.
    fn strut_sweep(&mut self) -> f64 {
        let mut worst = 0.0f64;
        for &([a, b], target) in &self.struts {
            let d = self.position[b] - self.position[a];
            let length = d.norm();
            worst = worst.max((length - target).abs() / target);
            let g = self.previous[b] - self.previous[a];
            let shift = shake_shift(&d, &g, target).unwrap_or_else(|| {
                if length > 0.0 {
                    d * ((length - target) / length)
                } else {
                    Vec3::zeros()
                }
            });
            let (wa, wb) = (1.0 / self.body_mass[a], 1.0 / self.body_mass[b]);
            let total = wa + wb;
            self.position[a] += shift * (wa / total);
            self.position[b] -= shift * (wb / total);
        }
        worst
    }

    /// Contact flags as reported in trajectories.
    pub fn contacts(&self, state: &BodyState) -> Vec<bool> {
        state
            .positions
            .iter()
            .zip(&state.velocities)
            .map(|(p, v)| ground_contact_force(p, v, &self.params) != Vec3::zeros())
            .collect()
    }

    /// Mechanical energy with tendons at the rest lengths `schedule` gives at
    /// the state's time.
    pub fn energy(&mut self, state: &BodyState, schedule: &(impl ActuationSchedule + ?Sized)) -> Energy {
        self.sample_rest_lengths(schedule, state.time);
        let m = self.robot.node_mass;
        let mut energy = Energy {
            kinetic: state.kinetic_energy(m),
            ..Energy::default()
        };
        for p in &state.positions {
            energy.gravitational += m * self.params.gravity * p.z;
            if self.params.ground_enabled && p.z < 0.0 {
                energy.ground += 0.5 * self.params.ground_normal_stiffness * p.z * p.z;
            }
        }
        for cable in &self.robot.cables {
            let [a, b] = cable.endpoints;
            let stretch = (state.positions[b] - state.positions[a]).norm() - self.cable_rest(cable);
            if stretch > 0.0 {
                energy.cable += 0.5 * cable.stiffness * stretch * stretch;
            }
        }
        energy
    }
}

/// The displacement `s·g` with `|d - s·g| = target` and the smallest `|s|`.
fn shake_shift(d: &Vec3, g: &Vec3, target: f64) -> Option<Vec3> {
    let a = g.norm_squared();
    if a == 0.0 {
        return None;
    }
    let half_b = -d.dot(g);
    let c = d.norm_squared() - target * target;
    let disc = half_b * half_b - a * c;
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    let s = if half_b > 0.0 { c / (-half_b - root) } else { c / (-half_b + root) };
    if !s.is_finite() {
        return None;
    }
    Some(g * s)
}

/// Body index per node, nodes joined through welds sharing one
/// (union-find over weld pairs). Bodies are numbered by lowest member node.
fn weld_bodies(robot: &AssembledRobot) -> Vec<usize> {
    let n = robot.node_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for weld in &robot.welds {
        let (a, b) = (find(&mut parent, weld.nodes[0]), find(&mut parent, weld.nodes[1]));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut index = vec![usize::MAX; n];
    let mut next = 0;
    (0..n)
        .map(|i| {
            let root = find(&mut parent, i);
            if index[root] == usize::MAX {
                index[root] = next;
                next += 1;
            }
            index[root]
        })
        .collect()
}

/// One timestep on a copy of `state`.
pub fn step(
    state: &BodyState,
    robot: &AssembledRobot,
    schedule: &(impl ActuationSchedule + ?Sized),
    params: &SimParams,
) -> Result<BodyState> {
    let mut sim = Simulator::new(robot, *params)?;
    let mut next = state.clone();
    sim.step(&mut next, schedule)?;
    Ok(next)
}

/// Lets the robot drop and come to rest with every tendon relaxed, under
/// `settle_damping` node drag.
pub fn settle(robot: &AssembledRobot, params: &SimParams) -> Result<BodyState> {
    let settling = SimParams {
        node_damping: params.settle_damping,
        ..*params
    };
    let mut sim = Simulator::new(robot, settling)?;
    let mut state = BodyState::at_rest(robot);
    for _ in 0..params.steps_for(params.settle_duration) {
        sim.step(&mut state, &Relaxed)?;
    }
    Ok(state)
}

/// Runs the actuated robot from `initial` for `duration` seconds.
///
/// The control clock starts at zero regardless of `initial.time`. Samples are
/// taken every `sample_interval`, including both ends.
pub fn run(
    robot: &AssembledRobot,
    initial: &BodyState,
    controls: &[ControlGene],
    duration: f64,
    params: &SimParams,
) -> Result<Trajectory> {
    if !(duration > 0.0) {
        return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
    }
    if controls.len() != robot.actuation_groups.len() {
        return Err(Error::InvalidArgument(format!(
            "{} control genes for {} modules",
            controls.len(),
            robot.actuation_groups.len()
        )));
    }
    let mut sim = Simulator::new(robot, *params)?;
    let mut state = BodyState {
        time: 0.0,
        ..initial.clone()
    };
    let per_sample = params.steps_per_sample();
    let samples = params.steps_for(duration) / per_sample + 1;
    let mut trajectory = Trajectory {
        times: Vec::with_capacity(samples),
        positions: Vec::with_capacity(samples),
        contacts: Vec::with_capacity(samples),
        com: Vec::with_capacity(samples),
    };
    let mut record = |sim: &Simulator, state: &BodyState, k: usize| {
        trajectory.times.push(k as f64 * params.sample_interval);
        trajectory.contacts.push(sim.contacts(state));
        trajectory.com.push(state.center_of_mass());
        trajectory.positions.push(state.positions.clone());
    };
    record(&sim, &state, 0);
    for k in 1..samples {
        for _ in 0..per_sample {
            sim.step(&mut state, controls)?;
        }
        record(&sim, &state, k);
    }
    Ok(trajectory)
}
