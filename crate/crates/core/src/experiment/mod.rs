//! Batch experiments: evolution runs laid out on disk, champion replay and
//! template export.
//!
//! Every run owns the directory `<output>/<REGIME>_seed<seed>/` holding
//! `history.csv`, `best_genome.json` and, once both are complete, a `done`
//! marker. A rerun of the same config skips runs whose marker is present.
//! The batch summary (`summary.csv`, `summary.txt`) is written after every
//! run has finished.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::control::ControlGene;
use crate::error::{Error, Result};
use crate::evolution::{classify_gait, run_evolution, write_history_csv, Gait, GaitThresholds, PhysicsObjective, Simulation};
use crate::genome::{decode, Genome};
use crate::geometry::{build_canonical_module, ModuleTemplate, DEFAULT_STRUT_LENGTH};
use crate::physics::StiffnessRegime;

pub use config::{EvolutionSettings, ExperimentConfig, RunSpec, SCHEMA_VERSION};

pub const HISTORY_FILE: &str = "history.csv";
pub const GENOME_FILE: &str = "best_genome.json";
pub const DONE_MARKER: &str = "done";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_TXT: &str = "summary.txt";

/// One module of a decoded morphology, as stored in genome artifacts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleRecord {
    pub parent: Option<usize>,
    pub parent_face: usize,
    pub orientation: usize,
    pub actuation_face: usize,
}

/// A saved champion: the genome bits plus everything decoded and measured
/// from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenomeArtifact {
    pub genome_hex: String,
    pub regime: StiffnessRegime,
    pub seed: u64,
    pub fitness: f64,
    /// Absent when the run was too short to classify.
    pub gait: Option<Gait>,
    pub module_count: usize,
    pub morphology: Vec<ModuleRecord>,
    pub control: Vec<ControlGene>,
}

impl GenomeArtifact {
    pub fn new(genome: &Genome, regime: StiffnessRegime, seed: u64, fitness: f64, gait: Option<Gait>) -> Self {
        let decoded = decode(genome);
        Self {
            genome_hex: genome.to_hex(),
            regime,
            seed,
            fitness,
            gait,
            module_count: decoded.module_count(),
            morphology: decoded
                .modules
                .iter()
                .map(|m| ModuleRecord {
                    parent: m.parent,
                    parent_face: m.parent_face,
                    orientation: m.orientation,
                    actuation_face: m.actuation_face,
                })
                .collect(),
            control: decoded.control,
        }
    }

    pub fn genome(&self) -> Result<Genome> {
        Genome::from_hex(&self.genome_hex)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Artifact(format!("cannot read genome {}: {e}", path.display())))?;
        let artifact: Self =
            serde_json::from_str(&text).map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))?;
        artifact
            .genome()
            .map_err(|e| Error::Artifact(format!("{}: {e}", path.display())))?;
        Ok(artifact)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact serializes") + "\n"
    }
}

/// Outcome of one evolution run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub run: RunSpec,
    pub best_fitness: f64,
    pub best_module_count: usize,
    pub gait: Option<Gait>,
    /// Taken from an earlier completed run rather than recomputed.
    pub resumed: bool,
}

/// Writes `contents` next to `path` and renames it into place.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn objective_for(config: &ExperimentConfig, regime: StiffnessRegime) -> Result<PhysicsObjective> {
    PhysicsObjective::new(config.sim, config.material.for_regime(regime), config.evolution.sim_duration)
}

fn classify(simulation: &Simulation, thresholds: &GaitThresholds) -> Option<Gait> {
    match classify_gait(&simulation.trajectory, &simulation.decoded, thresholds) {
        Ok(g) => Some(g),
        Err(e) => {
            log::warn!("{e}");
            None
        }
    }
}

/// Runs (or resumes) one evolution and writes its directory.
pub fn run_one(config: &ExperimentConfig, run: RunSpec) -> Result<RunSummary> {
    let dir = config.output_directory.join(run.directory_name());
    if dir.join(DONE_MARKER).is_file() {
        if let Ok(artifact) = GenomeArtifact::load(&dir.join(GENOME_FILE)) {
            if artifact.regime == run.regime && artifact.seed == run.seed {
                log::info!("{}: already complete", run.directory_name());
                return Ok(RunSummary {
                    run,
                    best_fitness: artifact.fitness,
                    best_module_count: artifact.module_count,
                    gait: artifact.gait,
                    resumed: true,
                });
            }
        }
        log::warn!("{}: completion marker without a matching genome, rerunning", run.directory_name());
    }
    fs::create_dir_all(&dir)?;
    let _ = fs::remove_file(dir.join(DONE_MARKER));

    let objective = objective_for(config, run.regime)?;
    let result = run_evolution(&config.evolution.for_run(run.regime, run.seed), &objective, 0)?;
    let best = result.best();
    log::info!(
        "{}: best {:.4} m with {} modules after {} evaluations",
        run.directory_name(),
        best.fitness,
        best.module_count,
        result.evaluations
    );
    let gait = match objective.simulate(&best.genome) {
        Ok(s) => classify(&s, &config.gait),
        Err(e) => {
            log::warn!("{}: champion replay failed: {e}", run.directory_name());
            None
        }
    };

    let mut history = Vec::new();
    write_history_csv(&result.history, &mut history)?;
    write_atomic(&dir.join(HISTORY_FILE), &history)?;
    let artifact = GenomeArtifact::new(&best.genome, run.regime, run.seed, best.fitness, gait);
    write_atomic(&dir.join(GENOME_FILE), artifact.to_json().as_bytes())?;
    fs::write(dir.join(DONE_MARKER), b"")?;
    Ok(RunSummary {
        run,
        best_fitness: best.fitness,
        best_module_count: best.module_count,
        gait,
        resumed: false,
    })
}

fn gait_label(gait: Option<Gait>) -> &'static str {
    gait.map_or("-", Gait::label)
}

pub const SUMMARY_HEADER: &str = "evolution,seed,regime,best_fitness,best_module_count,gait";

pub fn summary_csv(rows: &[RunSummary]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for (i, r) in rows.iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            i + 1,
            r.run.seed,
            r.run.regime,
            r.best_fitness,
            r.best_module_count,
            gait_label(r.gait)
        )
        .unwrap();
    }
    out
}

/// One column per run, one row per attribute.
pub fn summary_table(rows: &[RunSummary]) -> String {
    let columns: Vec<[String; 6]> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            [
                (i + 1).to_string(),
                r.run.seed.to_string(),
                r.run.regime.to_string(),
                r.best_module_count.to_string(),
                format!("{:.4}", r.best_fitness),
                gait_label(r.gait).to_string(),
            ]
        })
        .collect();
    let labels = [
        "Evolution",
        "Seed",
        "Stiffness",
        "Best individual's number of modules",
        "Best fitness (m)",
        "Locomotion strategy",
    ];
    let label_width = labels.iter().map(|l| l.len()).max().unwrap_or(0);
    let widths: Vec<usize> = columns.iter().map(|c| c.iter().map(String::len).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (row, label) in labels.iter().enumerate() {
        let mut line = format!("{label:<label_width$}");
        for (col, width) in columns.iter().zip(&widths) {
            write!(line, " | {:>width$}", col[row]).unwrap();
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Runs every evolution of the batch, in parallel on `workers` threads (one
/// per CPU when 0), then writes the summary files.
pub fn cmd_evolve(config: &ExperimentConfig, workers: usize) -> Result<Vec<RunSummary>> {
    fs::create_dir_all(&config.output_directory)?;
    let runs = config.runs();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {workers} workers: {e}")))?;
    let rows = pool.install(|| runs.par_iter().map(|&run| run_one(config, run)).collect::<Result<Vec<_>>>())?;
    write_atomic(&config.output_directory.join(SUMMARY_CSV), summary_csv(&rows).as_bytes())?;
    write_atomic(&config.output_directory.join(SUMMARY_TXT), summary_table(&rows).as_bytes())?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub regime: StiffnessRegime,
    pub fitness: f64,
    pub gait: Option<Gait>,
}

/// Re-simulates a saved champion and writes its trajectory CSV to `out`.
///
/// The genome's own regime is used when the config lists it; otherwise the
/// config's first regime is used, with a warning. Nothing is written unless
/// the simulation succeeds.
pub fn cmd_replay(genome_path: &Path, config: &ExperimentConfig, out: &Path) -> Result<ReplayReport> {
    let artifact = GenomeArtifact::load(genome_path)?;
    let genome = artifact.genome()?;
    let regime = match config.regimes.first() {
        None => artifact.regime,
        Some(_) if config.regimes.contains(&artifact.regime) => artifact.regime,
        Some(&first) => {
            log::warn!("genome was evolved under {} stiffness; replaying under {first}", artifact.regime);
            first
        }
    };
    let simulation = objective_for(config, regime)?.simulate(&genome)?;
    let gait = classify(&simulation, &config.gait);
    let mut csv = Vec::new();
    simulation.trajectory.write_csv(&mut csv)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_atomic(out, &csv)?;
    Ok(ReplayReport {
        regime,
        fitness: simulation.fitness(),
        gait,
    })
}

/// JSON description of a module template.
pub fn template_json(template: &ModuleTemplate) -> String {
    let xyz = |p: &crate::geometry::Vec3| [p.x, p.y, p.z];
    let doc = json!({
        "strut_length": template.strut_length,
        "nodes": template.nodes.iter().map(xyz).collect::<Vec<_>>(),
        "struts": template.struts,
        "cables": template.cables,
        "faces": template.faces.iter().map(|f| json!({
            "id": f.id,
            "vertex_ids": f.vertex_ids,
            "outward_normal": xyz(&f.outward_normal),
        })).collect::<Vec<_>>(),
    });
    serde_json::to_string_pretty(&doc).expect("template serializes") + "\n"
}

/// Writes the canonical module as JSON.
pub fn cmd_dump_module(out: &Path) -> Result<()> {
    let template = build_canonical_module(DEFAULT_STRUT_LENGTH)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_atomic(out, template_json(&template).as_bytes())
}
