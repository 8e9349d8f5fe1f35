//! Steady-state genetic algorithm over binary genomes.
//!
//! Each generation breeds `population_size * replacement_fraction` offspring
//! from roulette-selected parent pairs (one-point crossover, then per-bit
//! mutation), adds them to the population and drops the worst individuals
//! until the population is back to size. The best individual therefore never
//! leaves.
//!
//! Random numbers are drawn in a fixed order before any offspring is
//! evaluated. For every offspring pair: one uniform for each parent, one for
//! the crossover decision, one cut point (drawn even when crossover is
//! skipped), then 327 uniforms for each child's mutation mask. When an odd
//! number of offspring is needed the second child of the last pair is
//! discarded after its mask is drawn. Evaluation order and worker count thus
//! never change the outcome.

mod fitness;
mod gait;

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::{crossover_at, mutate, random_genome_with, Genome, GENOME_BITS};
use crate::physics::StiffnessRegime;

pub use fitness::{evaluate_fitness, PhysicsObjective, Simulation};
pub use gait::{classify_gait, gait_features, Gait, GaitFeatures, GaitThresholds, MIN_CLASSIFIABLE_DURATION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub generations: usize,
    pub replacement_fraction: f64,
    pub crossover_rate: f64,
    pub mutation_rate_per_bit: f64,
    /// Seconds of actuated, scored simulation.
    pub sim_duration: f64,
    pub stiffness_regime: StiffnessRegime,
    pub master_seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population_size: 50,
            generations: 200,
            replacement_fraction: 0.5,
            crossover_rate: 0.9,
            mutation_rate_per_bit: 0.01,
            sim_duration: 10.0,
            stiffness_regime: StiffnessRegime::Low,
            master_seed: 0,
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidArgument(what));
        if self.population_size < 2 {
            return bad(format!("population_size must be at least 2, got {}", self.population_size));
        }
        if !(self.replacement_fraction > 0.0 && self.replacement_fraction <= 1.0) {
            return bad(format!("replacement_fraction must be in (0, 1], got {}", self.replacement_fraction));
        }
        for (name, p) in [("crossover_rate", self.crossover_rate), ("mutation_rate_per_bit", self.mutation_rate_per_bit)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if !(self.sim_duration > 0.0 && self.sim_duration.is_finite()) {
            return bad(format!("sim_duration must be positive, got {}", self.sim_duration));
        }
        Ok(())
    }

    pub fn offspring_per_generation(&self) -> usize {
        ((self.population_size as f64 * self.replacement_fraction).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Non-negative and finite.
    pub fitness: f64,
    pub module_count: usize,
}

/// Anything that scores a genome. Must be pure: the same genome always gets
/// the same evaluation.
pub trait Objective: Sync {
    fn evaluate(&self, genome: &Genome) -> Evaluation;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Genome,
    pub fitness: f64,
    pub module_count: usize,
    /// Generation in which the individual was created.
    pub born: usize,
}

/// Memoizing, optionally parallel front end to an objective.
pub struct Evaluator<'a, O: Objective + ?Sized> {
    objective: &'a O,
    cache: HashMap<Genome, Evaluation>,
    pool: Option<rayon::ThreadPool>,
    pub cache_hits: usize,
    pub evaluations: usize,
}

impl<'a, O: Objective + ?Sized> Evaluator<'a, O> {
    /// `workers == 0` uses rayon's global pool.
    pub fn new(objective: &'a O, workers: usize) -> Result<Self> {
        let pool = if workers == 0 {
            None
        } else {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| Error::InvalidArgument(format!("cannot start {workers} workers: {e}")))?,
            )
        };
        Ok(Self {
            objective,
            cache: HashMap::new(),
            pool,
            cache_hits: 0,
            evaluations: 0,
        })
    }

    pub fn evaluate_all(&mut self, genomes: &[Genome]) -> Vec<Evaluation> {
        let mut fresh: Vec<&Genome> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for g in genomes {
            if !self.cache.contains_key(g) && seen.insert(g) {
                fresh.push(g);
            }
        }
        self.cache_hits += genomes.len() - fresh.len();
        self.evaluations += fresh.len();
        let objective = self.objective;
        let work = || fresh.par_iter().map(|g| objective.evaluate(g)).collect::<Vec<_>>();
        let results = match &self.pool {
            Some(pool) => pool.install(work),
            None => work(),
        };
        for (g, e) in fresh.into_iter().zip(results) {
            self.cache.insert(g.clone(), sanitize(e));
        }
        genomes.iter().map(|g| self.cache[g]).collect()
    }
}

fn sanitize(e: Evaluation) -> Evaluation {
    if e.fitness.is_finite() && e.fitness > 0.0 {
        e
    } else {
        Evaluation { fitness: 0.0, ..e }
    }
}

/// Fitness-proportionate pick; uniform when no one has positive fitness.
fn roulette(population: &[Individual], total: f64, u: f64) -> usize {
    let n = population.len();
    if !(total > 0.0 && total.is_finite()) {
        return ((u * n as f64) as usize).min(n - 1);
    }
    let target = u * total;
    let mut acc = 0.0;
    for (i, ind) in population.iter().enumerate() {
        acc += ind.fitness;
        if acc > target {
            return i;
        }
    }
    n - 1
}

/// Best first; ties go to the older individual, then to the earlier entry.
fn rank(individuals: &mut [Individual]) {
    individuals.sort_by(|a, b| b.fitness.total_cmp(&a.fitness).then(a.born.cmp(&b.born)));
}

/// Offspring genomes for one generation, drawing randomness in the documented
/// order.
pub fn breed(population: &[Individual], config: &EvolutionConfig, rng: &mut impl Rng) -> Vec<Genome> {
    let wanted = config.offspring_per_generation();
    let total: f64 = population.iter().map(|i| i.fitness).sum();
    let mut children = Vec::with_capacity(wanted + 1);
    while children.len() < wanted {
        let a = &population[roulette(population, total, rng.random::<f64>())].genome;
        let b = &population[roulette(population, total, rng.random::<f64>())].genome;
        let cross = rng.random::<f64>() < config.crossover_rate;
        let cut = rng.random_range(1..GENOME_BITS);
        let (c1, c2) = if cross { crossover_at(a, b, cut) } else { (a.clone(), b.clone()) };
        children.push(mutate(&c1, config.mutation_rate_per_bit, rng));
        let second = mutate(&c2, config.mutation_rate_per_bit, rng);
        if children.len() < wanted {
            children.push(second);
        }
    }
    children
}

/// One steady-state replacement wave. `population` must be evaluated.
pub fn ga_generation<O: Objective + ?Sized>(
    population: &[Individual],
    config: &EvolutionConfig,
    rng: &mut impl Rng,
    evaluator: &mut Evaluator<'_, O>,
    generation: usize,
) -> Vec<Individual> {
    let children = breed(population, config, rng);
    let scores = evaluator.evaluate_all(&children);
    let mut merged: Vec<Individual> = population.to_vec();
    merged.extend(children.into_iter().zip(scores).map(|(genome, e)| Individual {
        genome,
        fitness: e.fitness,
        module_count: e.module_count,
        born: generation,
    }));
    rank(&mut merged);
    merged.truncate(config.population_size);
    merged
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    /// Population standard deviation.
    pub std_fitness: f64,
    pub best_genome: Genome,
    pub best_module_count: usize,
}

impl GenerationRecord {
    fn of(generation: usize, ranked: &[Individual]) -> Self {
        let n = ranked.len() as f64;
        let mean = ranked.iter().map(|i| i.fitness).sum::<f64>() / n;
        let var = ranked.iter().map(|i| (i.fitness - mean).powi(2)).sum::<f64>() / n;
        Self {
            generation,
            best_fitness: ranked[0].fitness,
            mean_fitness: mean,
            std_fitness: var.sqrt(),
            best_genome: ranked[0].genome.clone(),
            best_module_count: ranked[0].module_count,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EvolutionResult {
    /// Row 0 describes the initial population.
    pub history: Vec<GenerationRecord>,
    /// Final population, best first.
    pub population: Vec<Individual>,
    pub evaluations: usize,
    pub cache_hits: usize,
}

impl EvolutionResult {
    pub fn best(&self) -> &Individual {
        &self.population[0]
    }
}

/// Runs a full evolution from `config.master_seed`.
pub fn run_evolution<O: Objective + ?Sized>(config: &EvolutionConfig, objective: &O, workers: usize) -> Result<EvolutionResult> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
    let mut evaluator = Evaluator::new(objective, workers)?;
    let genomes: Vec<Genome> = (0..config.population_size).map(|_| random_genome_with(&mut rng)).collect();
    let scores = evaluator.evaluate_all(&genomes);
    let mut population: Vec<Individual> = genomes
        .into_iter()
        .zip(scores)
        .map(|(genome, e)| Individual {
            genome,
            fitness: e.fitness,
            module_count: e.module_count,
            born: 0,
        })
        .collect();
    rank(&mut population);
    let mut history = vec![GenerationRecord::of(0, &population)];
    for generation in 1..=config.generations {
        population = ga_generation(&population, config, &mut rng, &mut evaluator, generation);
        history.push(GenerationRecord::of(generation, &population));
        log::debug!(
            "generation {generation}: best {:.4} mean {:.4}",
            history[generation].best_fitness,
            history[generation].mean_fitness
        );
    }
    Ok(EvolutionResult {
        history,
        population,
        evaluations: evaluator.evaluations,
        cache_hits: evaluator.cache_hits,
    })
}

pub const HISTORY_HEADER: &str = "generation,best_fitness,mean_fitness,std_fitness,best_module_count";

pub fn write_history_csv<W: Write>(history: &[GenerationRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{HISTORY_HEADER}")?;
    for r in history {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.generation, r.best_fitness, r.mean_fitness, r.std_fitness, r.best_module_count
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    struct OneMax;

    impl Objective for OneMax {
        fn evaluate(&self, genome: &Genome) -> Evaluation {
            Evaluation {
                fitness: genome.count_ones() as f64,
                module_count: genome.module_count(),
            }
        }
    }

    struct Flat;

    impl Objective for Flat {
        fn evaluate(&self, genome: &Genome) -> Evaluation {
            Evaluation {
                fitness: 1.0,
                module_count: genome.module_count(),
            }
        }
    }

    struct Zero;

    impl Objective for Zero {
        fn evaluate(&self, _: &Genome) -> Evaluation {
            Evaluation {
                fitness: f64::NAN,
                module_count: 2,
            }
        }
    }

    fn small(generations: usize) -> EvolutionConfig {
        EvolutionConfig {
            population_size: 12,
            generations,
            master_seed: 4,
            ..EvolutionConfig::default()
        }
    }

    #[test]
    fn offspring_count() {
        assert_eq!(EvolutionConfig::default().offspring_per_generation(), 25);
        let mut c = small(1);
        c.population_size = 7;
        c.replacement_fraction = 0.1;
        assert_eq!(c.offspring_per_generation(), 1);
    }

    #[test]
    fn zero_generations_records_initial_population() {
        let r = run_evolution(&small(0), &OneMax, 0).unwrap();
        assert_eq!(r.history.len(), 1);
        assert_eq!(r.history[0].generation, 0);
    }

    #[test]
    fn elitism_is_monotone() {
        let r = run_evolution(&small(30), &OneMax, 0).unwrap();
        for w in r.history.windows(2) {
            assert!(w[1].best_fitness >= w[0].best_fitness);
        }
    }

    #[test]
    fn cloning_keeps_parent_material() {
        let mut c = small(0);
        c.crossover_rate = 0.0;
        c.mutation_rate_per_bit = 0.0;
        let start = run_evolution(&c, &OneMax, 0).unwrap().population;
        let mut evaluator = Evaluator::new(&OneMax, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let next = ga_generation(&start, &c, &mut rng, &mut evaluator, 1);
        for ind in &next {
            assert!(start.iter().any(|p| p.genome == ind.genome && p.fitness == ind.fitness));
        }
        // Under a flat objective nothing can displace a parent.
        let start = run_evolution(&c, &Flat, 0).unwrap().population;
        let next = ga_generation(&start, &c, &mut rng, &mut evaluator_for(&Flat), 1);
        assert_eq!(next, start);
    }

    fn evaluator_for<O: Objective>(o: &O) -> Evaluator<'_, O> {
        Evaluator::new(o, 0).unwrap()
    }

    #[test]
    fn degenerate_fitness_falls_back_to_uniform() {
        let r = run_evolution(&small(3), &Zero, 0).unwrap();
        assert!(r.population.iter().all(|i| i.fitness == 0.0));
        let pop = &r.population;
        let picks: std::collections::HashSet<usize> =
            (0..100).map(|k| roulette(pop, 0.0, k as f64 / 100.0)).collect();
        assert_eq!(picks.len(), pop.len());
    }

    #[test]
    fn roulette_is_proportionate() {
        let mk = |fitness| Individual {
            genome: Genome::zeros(),
            fitness,
            module_count: 2,
            born: 0,
        };
        let pop = vec![mk(1.0), mk(3.0)];
        assert_eq!(roulette(&pop, 4.0, 0.2), 0);
        assert_eq!(roulette(&pop, 4.0, 0.3), 1);
        assert_eq!(roulette(&pop, 4.0, 0.999), 1);
    }

    #[test]
    fn worker_count_does_not_matter() {
        let a = run_evolution(&small(5), &OneMax, 1).unwrap();
        let b = run_evolution(&small(5), &OneMax, 3).unwrap();
        assert_eq!(a.history, b.history);
    }

    #[test]
    fn cache_counts_repeats() {
        let mut e = Evaluator::new(&OneMax, 0).unwrap();
        let g = vec![Genome::zeros(), Genome::zeros(), crate::genome::random_genome(1)];
        e.evaluate_all(&g);
        e.evaluate_all(&g);
        assert_eq!(e.evaluations, 2);
        assert_eq!(e.cache_hits, 4);
    }

    #[test]
    fn history_csv_layout() {
        let r = run_evolution(&small(2), &OneMax, 0).unwrap();
        let mut buf = Vec::new();
        write_history_csv(&r.history, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], HISTORY_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("2,"));
    }

    #[test]
    fn invalid_configs() {
        let mut c = small(1);
        c.population_size = 1;
        assert!(c.validate().is_err());
        let mut c = small(1);
        c.replacement_fraction = 0.0;
        assert!(c.validate().is_err());
    }
}
