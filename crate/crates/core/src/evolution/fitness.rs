use crate::error::Result;
use crate::genome::{decode, DecodedRobot, Genome};
use crate::geometry::{build_canonical_module, build_robot, AssembledRobot, ModuleTemplate, DEFAULT_STRUT_LENGTH};
use crate::physics::{run, settle, MaterialParams, MaterialSettings, SimParams, Trajectory};

use super::{EvolutionConfig, Evaluation, Objective};

/// Full simulated life of one genome.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub decoded: DecodedRobot,
    pub robot: AssembledRobot,
    pub trajectory: Trajectory,
}

impl Simulation {
    /// Horizontal center-of-mass travel over the actuated run.
    pub fn fitness(&self) -> f64 {
        let d = self.trajectory.horizontal_displacement();
        if d.is_finite() {
            d
        } else {
            0.0
        }
    }
}

/// Decode, assemble, settle, run, and score by distance traveled.
#[derive(Debug, Clone)]
pub struct PhysicsObjective {
    pub sim: SimParams,
    pub material: MaterialParams,
    pub sim_duration: f64,
    template: ModuleTemplate,
}

impl PhysicsObjective {
    pub fn new(sim: SimParams, material: MaterialParams, sim_duration: f64) -> Result<Self> {
        sim.validate()?;
        material.validate()?;
        Ok(Self {
            sim,
            material,
            sim_duration,
            template: build_canonical_module(DEFAULT_STRUT_LENGTH)?,
        })
    }

    pub fn simulate(&self, genome: &Genome) -> Result<Simulation> {
        let decoded = decode(genome);
        let robot = build_robot(&decoded.modules, &self.template, &self.material)?;
        let rested = settle(&robot, &self.sim)?;
        let trajectory = run(&robot, &rested, &decoded.control, self.sim_duration, &self.sim)?;
        Ok(Simulation {
            decoded,
            robot,
            trajectory,
        })
    }
}

impl Objective for PhysicsObjective {
    fn evaluate(&self, genome: &Genome) -> Evaluation {
        let module_count = genome.module_count();
        match self.simulate(genome) {
            Ok(s) => Evaluation {
                fitness: s.fitness(),
                module_count,
            },
            Err(e) => {
                log::debug!("genome {} scored 0: {e}", genome.to_hex());
                Evaluation {
                    fitness: 0.0,
                    module_count,
                }
            }
        }
    }
}

/// Fitness of `genome` under the config's regime and duration; 0 when the
/// simulation diverges.
pub fn evaluate_fitness(
    genome: &Genome,
    config: &EvolutionConfig,
    sim: &SimParams,
    material: &MaterialSettings,
) -> Result<f64> {
    let objective = PhysicsObjective::new(*sim, material.for_regime(config.stiffness_regime), config.sim_duration)?;
    Ok(objective.evaluate(genome).fitness)
}
