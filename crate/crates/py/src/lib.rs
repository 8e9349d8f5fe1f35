//! Python bindings: genomes, robot assembly, simulation, gait labels and
//! evolution runs.

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tensegrity_evo::evolution::{classify_gait, run_evolution, PhysicsObjective};
use tensegrity_evo::experiment::{template_json, EvolutionSettings, ExperimentConfig, GenomeArtifact};
use tensegrity_evo::genome::{decode, random_genome, Genome as CoreGenome, GENOME_BITS};
use tensegrity_evo::geometry::{build_canonical_module, build_robot, DEFAULT_STRUT_LENGTH};
use tensegrity_evo::physics::{settle, MaterialSettings, SimParams, StiffnessRegime};
use tensegrity_evo::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        e @ Error::SimulationDiverged { .. } => PyRuntimeError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn parse_regime(regime: &str) -> PyResult<StiffnessRegime> {
    regime.parse().map_err(py_err)
}

fn sim_params(settle_duration: f64) -> PyResult<SimParams> {
    let params = SimParams {
        settle_duration,
        ..SimParams::default()
    };
    params.validate().map_err(py_err)?;
    Ok(params)
}

/// A 327-bit genome encoding morphology and control.
#[pyclass(module = "pytensegrity", frozen, eq, hash, skip_from_py_object)]
#[derive(Clone, PartialEq, Eq, Hash)]
struct Genome {
    inner: CoreGenome,
}

#[pymethods]
impl Genome {
    #[new]
    fn new(hex: &str) -> PyResult<Self> {
        Ok(Self {
            inner: CoreGenome::from_hex(hex).map_err(py_err)?,
        })
    }

    /// Genome of independent fair coin flips from `seed`.
    #[staticmethod]
    fn random(seed: u64) -> Self {
        Self {
            inner: random_genome(seed),
        }
    }

    #[staticmethod]
    fn from_bits(bits: Vec<bool>) -> PyResult<Self> {
        Ok(Self {
            inner: CoreGenome::from_bits(bits).map_err(py_err)?,
        })
    }

    fn to_hex(&self) -> String {
        self.inner.to_hex()
    }

    fn bits(&self) -> Vec<bool> {
        self.inner.bits().to_vec()
    }

    fn module_count(&self) -> usize {
        self.inner.module_count()
    }

    /// Decoded morphology and controller as a dict with `modules` (list of
    /// dicts) and `control` (list of `(frequency, amplitude, phase)`).
    fn decode<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = decode(&self.inner);
        let modules = d
            .modules
            .iter()
            .map(|m| {
                let row = PyDict::new(py);
                row.set_item("parent", m.parent)?;
                row.set_item("parent_face", m.parent_face)?;
                row.set_item("orientation", m.orientation)?;
                row.set_item("actuation_face", m.actuation_face)?;
                Ok(row)
            })
            .collect::<PyResult<Vec<_>>>()?;
        let control: Vec<(f64, f64, f64)> = d.control.iter().map(|c| (c.frequency, c.amplitude, c.phase)).collect();
        let out = PyDict::new(py);
        out.set_item("modules", modules)?;
        out.set_item("control", control)?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!("Genome('{}')", self.inner.to_hex())
    }

    #[classattr]
    const BITS: usize = GENOME_BITS;
}

/// Outcome of simulating one genome.
#[pyclass(module = "pytensegrity", frozen, get_all)]
struct Simulation {
    fitness: f64,
    gait: Option<String>,
    module_count: usize,
    times: Vec<f64>,
    com: Vec<(f64, f64, f64)>,
    contact_counts: Vec<usize>,
}

#[pymethods]
impl Simulation {
    fn __repr__(&self) -> String {
        format!(
            "Simulation(fitness={:.4}, gait={}, module_count={}, samples={})",
            self.fitness,
            self.gait.as_deref().map_or("None".to_string(), |g| format!("'{g}'")),
            self.module_count,
            self.times.len()
        )
    }
}

/// Settles and runs `genome` under `regime` ("LOW" or "HIGH") and scores it.
#[pyfunction]
#[pyo3(signature = (genome, regime = "LOW", duration = 10.0, settle_duration = 2.0))]
fn simulate(py: Python<'_>, genome: &Genome, regime: &str, duration: f64, settle_duration: f64) -> PyResult<Simulation> {
    let regime = parse_regime(regime)?;
    let params = sim_params(settle_duration)?;
    let genome = genome.inner.clone();
    py.detach(move || {
        let objective = PhysicsObjective::new(params, MaterialSettings::default().for_regime(regime), duration)?;
        let s = objective.simulate(&genome)?;
        let gait = classify_gait(&s.trajectory, &s.decoded, &Default::default()).ok();
        Ok::<_, Error>(Simulation {
            fitness: s.fitness(),
            gait: gait.map(|g| g.label().to_string()),
            module_count: s.decoded.module_count(),
            times: s.trajectory.times.clone(),
            com: s.trajectory.com.iter().map(|c| (c.x, c.y, c.z)).collect(),
            contact_counts: (0..s.trajectory.len()).map(|i| s.trajectory.contact_count(i)).collect(),
        })
    })
    .map_err(py_err)
}

/// Node positions of the assembled, settled robot as `(x, y, z)` tuples.
#[pyfunction]
#[pyo3(signature = (genome, regime = "LOW", settle_duration = 2.0))]
fn settled_pose(genome: &Genome, regime: &str, settle_duration: f64) -> PyResult<Vec<(f64, f64, f64)>> {
    let regime = parse_regime(regime)?;
    let params = sim_params(settle_duration)?;
    let template = build_canonical_module(DEFAULT_STRUT_LENGTH).map_err(py_err)?;
    let d = decode(&genome.inner);
    let robot = build_robot(&d.modules, &template, &MaterialSettings::default().for_regime(regime)).map_err(py_err)?;
    let state = settle(&robot, &params).map_err(py_err)?;
    Ok(state.positions.iter().map(|p| (p.x, p.y, p.z)).collect())
}

/// Canonical module (nodes, struts, cables, faces) as a JSON string.
#[pyfunction]
#[pyo3(signature = (strut_length = DEFAULT_STRUT_LENGTH))]
fn canonical_module_json(strut_length: f64) -> PyResult<String> {
    Ok(template_json(&build_canonical_module(strut_length).map_err(py_err)?))
}

/// Result of a full evolution run.
#[pyclass(module = "pytensegrity", frozen, get_all)]
struct Evolution {
    best_genome: Genome,
    best_fitness: f64,
    best_module_count: usize,
    /// `(generation, best, mean, std, best_module_count)` per generation.
    history: Vec<(usize, f64, f64, f64, usize)>,
    evaluations: usize,
}

/// Runs the steady-state GA with physics fitness.
#[pyfunction]
#[pyo3(signature = (
    regime = "LOW",
    seed = 1,
    population_size = 50,
    generations = 200,
    sim_duration = 10.0,
    settle_duration = 2.0,
    workers = 0
))]
#[allow(clippy::too_many_arguments)]
fn evolve(
    py: Python<'_>,
    regime: &str,
    seed: u64,
    population_size: usize,
    generations: usize,
    sim_duration: f64,
    settle_duration: f64,
    workers: usize,
) -> PyResult<Evolution> {
    let regime = parse_regime(regime)?;
    let params = sim_params(settle_duration)?;
    let config = EvolutionSettings {
        population_size,
        generations,
        sim_duration,
        ..EvolutionSettings::default()
    }
    .for_run(regime, seed);
    py.detach(move || {
        let objective = PhysicsObjective::new(params, MaterialSettings::default().for_regime(regime), sim_duration)?;
        let r = run_evolution(&config, &objective, workers)?;
        let best = r.best();
        Ok::<_, Error>(Evolution {
            best_genome: Genome {
                inner: best.genome.clone(),
            },
            best_fitness: best.fitness,
            best_module_count: best.module_count,
            history: r
                .history
                .iter()
                .map(|h| (h.generation, h.best_fitness, h.mean_fitness, h.std_fitness, h.best_module_count))
                .collect(),
            evaluations: r.evaluations,
        })
    })
    .map_err(py_err)
}

/// Validates an experiment config document and returns it normalized, with
/// every default filled in.
#[pyfunction]
fn normalize_config(text: &str) -> PyResult<String> {
    Ok(ExperimentConfig::parse(text).map_err(py_err)?.to_json())
}

/// Loads a saved champion; returns `(genome, regime, seed, fitness, gait)`.
#[pyfunction]
fn load_champion(path: std::path::PathBuf) -> PyResult<(Genome, String, u64, f64, Option<String>)> {
    let a = GenomeArtifact::load(&path).map_err(py_err)?;
    let genome = Genome {
        inner: a.genome().map_err(py_err)?,
    };
    Ok((genome, a.regime.to_string(), a.seed, a.fitness, a.gait.map(|g| g.label().to_string())))
}

#[pymodule]
fn pytensegrity(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Genome>()?;
    m.add_class::<Simulation>()?;
    m.add_class::<Evolution>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(settled_pose, m)?)?;
    m.add_function(wrap_pyfunction!(canonical_module_json, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_config, m)?)?;
    m.add_function(wrap_pyfunction!(load_champion, m)?)?;
    Ok(())
}
