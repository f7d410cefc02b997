//! Evolving explanations: chromosomes decode to masked images, the
//! classifier's probability for the original label on the masked image is
//! the fitness, and a generational binary GA with a best-so-far archive
//! searches the superpixel subsets.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

use crate::chromosome::Chromosome;
use crate::classifier::Classifier;
use crate::error::{Error, Result};
use crate::explanation::{Explanation, Method};
use crate::labels::SuperpixelMap;
use crate::raster::RasterImage;

/// Largest superpixel count `exhaustive_best` will enumerate.
pub const EXHAUSTIVE_LIMIT: usize = 20;

/// Keeps the pixels of selected superpixels and blackens the rest.
pub fn decode_mask(c: &Chromosome, img: &RasterImage, map: &SuperpixelMap) -> Result<RasterImage> {
    if img.dimensions() != map.dimensions() {
        return Err(Error::Input(format!(
            "image is {:?} but the map is {:?}",
            img.dimensions(),
            map.dimensions()
        )));
    }
    if !c.is_valid_for(map) {
        return Err(Error::Input(format!(
            "chromosome has {} bits, map has {} superpixels",
            c.len(),
            map.ns()
        )));
    }
    let bits = c.bits();
    let data = img
        .pixels()
        .iter()
        .zip(map.labels())
        .map(|(&p, &l)| if bits[l as usize] { p } else { [0, 0, 0] })
        .collect();
    RasterImage::new(img.width(), img.height(), data)
}

/// Probability of `target` on the image masked by `c`.
pub fn evaluate_fitness(
    model: &dyn Classifier,
    img: &RasterImage,
    target: usize,
    c: &Chromosome,
    map: &SuperpixelMap,
) -> Result<f64> {
    if target >= model.num_classes() {
        return Err(Error::Param(format!(
            "target class {target} but the classifier has {} classes",
            model.num_classes()
        )));
    }
    let masked = decode_mask(c, img, map)?;
    let probs = model.predict(&masked)?;
    probs.get(target).ok_or_else(|| {
        Error::Protocol(format!(
            "classifier returned {} probabilities, target is {target}",
            probs.num_classes()
        ))
    })
}

/// How two parents exchange genes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossoverKind {
    #[default]
    SinglePoint,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaParams {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Probability that an offspring is mutated at all; a mutated offspring
    /// flips each bit independently with probability `1 / ns`.
    pub mutation_rate: f64,
    pub tournament_size: usize,
    pub crossover: CrossoverKind,
    /// Put the all-ones chromosome into the initial population.
    pub seed_all_ones: bool,
    pub seed: u64,
    /// Fitness evaluation threads; results do not depend on it.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            population_size: 100,
            generations: 50,
            crossover_rate: 0.9,
            mutation_rate: 0.2,
            tournament_size: 3,
            crossover: CrossoverKind::SinglePoint,
            seed_all_ones: false,
            seed: 0,
            workers: 1,
        }
    }
}

impl GaParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 || self.population_size % 2 != 0 {
            return Err(Error::Param(format!(
                "population size must be even and at least 2, got {}",
                self.population_size
            )));
        }
        if self.generations == 0 {
            return Err(Error::Param("generations must be at least 1".into()));
        }
        for (name, rate) in [("crossover", self.crossover_rate), ("mutation", self.mutation_rate)] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::Param(format!("{name} rate {rate} outside [0, 1]")));
            }
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return Err(Error::Param(format!(
                "tournament size {} outside [1, {}]",
                self.tournament_size, self.population_size
            )));
        }
        if self.workers == 0 {
            return Err(Error::Param("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// Classifier calls one run makes: one per individual per generation
    /// including the initial population, plus the original prediction.
    pub fn expected_calls(&self) -> usize {
        self.population_size * (self.generations + 1) + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedIndividual {
    pub chromosome: Chromosome,
    pub fitness: f64,
}

/// Fans fitness evaluation out over a fixed pool. Results are indexed by
/// individual, so the worker count never changes an outcome.
pub(crate) struct Evaluator<'a> {
    model: &'a dyn Classifier,
    img: &'a RasterImage,
    map: &'a SuperpixelMap,
    target: usize,
    pool: Option<ThreadPool>,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(
        model: &'a dyn Classifier,
        img: &'a RasterImage,
        map: &'a SuperpixelMap,
        target: usize,
        workers: usize,
    ) -> Result<Self> {
        let pool = if workers > 1 {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| Error::Param(format!("cannot start {workers} workers: {e}")))?,
            )
        } else {
            None
        };
        Ok(Self { model, img, map, target, pool })
    }

    fn one(&self, c: &Chromosome) -> Result<f64> {
        evaluate_fitness(self.model, self.img, self.target, c, self.map)
    }

    pub(crate) fn all(&self, population: &[Chromosome], generation: Option<usize>) -> Result<Vec<f64>> {
        let results: Vec<Result<f64>> = match &self.pool {
            Some(pool) => pool.install(|| population.par_iter().map(|c| self.one(c)).collect()),
            None => population.iter().map(|c| self.one(c)).collect(),
        };
        results
            .into_iter()
            .enumerate()
            .map(|(individual, r)| {
                r.map_err(|e| Error::Fitness { generation, individual, source: Box::new(e) })
            })
            .collect()
    }
}

/// Lowest index among the maxima.
fn best_index(fitness: &[f64]) -> usize {
    crate::prob::argmax(fitness)
}

fn tournament(fitness: &[f64], size: usize, rng: &mut ChaCha8Rng) -> usize {
    let mut winner = rng.gen_range(0..fitness.len());
    for _ in 1..size {
        let challenger = rng.gen_range(0..fitness.len());
        if fitness[challenger] > fitness[winner] {
            winner = challenger;
        }
    }
    winner
}

fn crossover(a: &Chromosome, b: &Chromosome, kind: CrossoverKind, rng: &mut ChaCha8Rng) -> (Chromosome, Chromosome) {
    let ns = a.len();
    let (mut x, mut y) = (a.bits().to_vec(), b.bits().to_vec());
    match kind {
        CrossoverKind::SinglePoint => {
            if ns >= 2 {
                let point = rng.gen_range(1..ns);
                x[point..].swap_with_slice(&mut y[point..]);
            }
        }
        CrossoverKind::Uniform => {
            for j in 0..ns {
                if rng.gen_bool(0.5) {
                    std::mem::swap(&mut x[j], &mut y[j]);
                }
            }
        }
    }
    (Chromosome::new(x), Chromosome::new(y))
}

fn mutate(c: &mut Chromosome, rate: f64, rng: &mut ChaCha8Rng) {
    if rng.gen::<f64>() < rate {
        let per_bit = 1.0 / c.len() as f64;
        for j in 0..c.len() {
            if rng.gen::<f64>() < per_bit {
                c.flip(j);
            }
        }
    }
}

/// Runs the GA and returns the best chromosome ever evaluated.
///
/// The target label is the argmax of the prediction on the unmasked image
/// and stays fixed for the whole run. Offspring replace the population
/// wholesale each generation; the archive is replaced only on a strict
/// improvement. Random draws happen in a fixed order (initial bits row by
/// row, then per offspring pair: two tournaments, the crossover coin and
/// point, then each child's mutation coin and bit flips), so a seed fully
/// determines the result regardless of `workers`.
pub fn evolve(model: &dyn Classifier, img: &RasterImage, map: &SuperpixelMap, params: &GaParams) -> Result<Explanation> {
    params.validate()?;
    if img.dimensions() != map.dimensions() {
        return Err(Error::Input(format!(
            "image is {:?} but the map is {:?}",
            img.dimensions(),
            map.dimensions()
        )));
    }
    let started = Instant::now();
    let ns = map.ns();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let original = model.predict(img)?;
    let target = original.argmax();
    let original_probability = original.probs()[target];
    let evaluator = Evaluator::new(model, img, map, target, params.workers)?;

    let mut population: Vec<Chromosome> = (0..params.population_size)
        .map(|_| Chromosome::new((0..ns).map(|_| rng.gen_bool(0.5)).collect()))
        .collect();
    if params.seed_all_ones {
        population[0] = Chromosome::ones(ns);
    }
    let mut fitness = evaluator.all(&population, None)?;
    let i = best_index(&fitness);
    let mut best = EvaluatedIndividual { chromosome: population[i].clone(), fitness: fitness[i] };
    let mut history = Vec::with_capacity(params.generations + 1);
    history.push(best.fitness);

    for generation in 0..params.generations {
        let mut offspring = Vec::with_capacity(params.population_size);
        while offspring.len() < params.population_size {
            let a = tournament(&fitness, params.tournament_size, &mut rng);
            let b = tournament(&fitness, params.tournament_size, &mut rng);
            let (mut x, mut y) = if rng.gen::<f64>() < params.crossover_rate {
                crossover(&population[a], &population[b], params.crossover, &mut rng)
            } else {
                (population[a].clone(), population[b].clone())
            };
            mutate(&mut x, params.mutation_rate, &mut rng);
            mutate(&mut y, params.mutation_rate, &mut rng);
            offspring.push(x);
            offspring.push(y);
        }
        fitness = evaluator.all(&offspring, Some(generation))?;
        population = offspring;

        let i = best_index(&fitness);
        if fitness[i] > best.fitness {
            best = EvaluatedIndividual { chromosome: population[i].clone(), fitness: fitness[i] };
        }
        history.push(best.fitness);
    }

    Ok(Explanation {
        method: Method::Elime,
        best_fitness: best.fitness,
        best: best.chromosome,
        target_label: target,
        original_probability,
        history,
        wall_time: started.elapsed(),
        seed: params.seed,
        classifier_calls: params.expected_calls(),
        params: serde_json::to_value(params)?,
    })
}

/// Evaluates all `2^ns` chromosomes and returns the fittest; ties go to the
/// lowest value of the bits read MSB-first.
pub fn exhaustive_best(
    model: &dyn Classifier,
    img: &RasterImage,
    map: &SuperpixelMap,
    target: usize,
) -> Result<EvaluatedIndividual> {
    exhaustive_best_with_workers(model, img, map, target, 1)
}

pub fn exhaustive_best_with_workers(
    model: &dyn Classifier,
    img: &RasterImage,
    map: &SuperpixelMap,
    target: usize,
    workers: usize,
) -> Result<EvaluatedIndividual> {
    let ns = map.ns();
    if ns > EXHAUSTIVE_LIMIT {
        return Err(Error::Refused(format!(
            "exhaustive search over {ns} superpixels exceeds the limit of {EXHAUSTIVE_LIMIT}"
        )));
    }
    let evaluator = Evaluator::new(model, img, map, target, workers)?;
    let candidates: Vec<Chromosome> = (0..1u64 << ns).map(|v| Chromosome::from_index(v, ns)).collect();
    let fitness = evaluator.all(&candidates, None)?;
    let i = best_index(&fitness);
    Ok(EvaluatedIndividual { chromosome: candidates[i].clone(), fitness: fitness[i] })
}
