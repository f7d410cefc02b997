//! Repeated-run benchmark over synthetic scenarios with known salient
//! superpixels. Reports mirror the usual results table: original
//! probability, best and mean±std fitness, shortest and mean±std time, plus
//! IoU against the ground truth and the gap to the exhaustive optimum.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chromosome::Chromosome;
use crate::classifier::{Classifier, CountingClassifier, LinearSuperpixelClassifier};
use crate::error::{Error, Result};
use crate::explainer::{evolve, exhaustive_best, GaParams, EXHAUSTIVE_LIMIT};
use crate::explanation::Explanation;
use crate::labels::SuperpixelMap;
use crate::lime::{explain_lime, LimeParams};
use crate::raster::RasterImage;
use crate::slic::{grid_shape, segment, SlicParams};

/// The suite shipped with the crate.
pub const DEFAULT_SUITE: &str = include_str!("../suites/default.toml");

/// Target class of every scenario classifier; class 1 is the background.
pub const SCENARIO_TARGET: usize = 0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub ns: usize,
    pub salient: usize,
    pub distractors: usize,
    pub weight: f64,
    pub width: u32,
    pub height: u32,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub reference: RasterImage,
    pub map: SuperpixelMap,
    pub classifier: LinearSuperpixelClassifier,
    pub salient: BTreeSet<usize>,
    pub distractors: BTreeSet<usize>,
}

impl Scenario {
    pub fn name(&self) -> &str {
        &self.spec.name
    }
}

/// Builds a block image with random non-black colors, segments it, and
/// assigns `+weight` to salient superpixels and `-weight` to distractors in
/// the target row (the background row is the negation).
pub fn make_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    if spec.ns == 0 {
        return Err(Error::Param(format!("scenario {}: ns must be at least 1", spec.name)));
    }
    if spec.salient + spec.distractors > spec.ns {
        return Err(Error::Param(format!(
            "scenario {}: {} salient + {} distractors exceed {} superpixels",
            spec.name, spec.salient, spec.distractors, spec.ns
        )));
    }
    if !(spec.weight.is_finite() && spec.weight >= 0.0) {
        return Err(Error::Param(format!("scenario {}: weight must be finite and nonnegative", spec.name)));
    }
    if spec.width == 0 || spec.height == 0 || (spec.width as usize * spec.height as usize) < spec.ns {
        return Err(Error::Param(format!(
            "scenario {}: {}x{} image cannot hold {} superpixels",
            spec.name, spec.width, spec.height, spec.ns
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (cols, rows) = grid_shape(spec.ns, spec.width, spec.height);
    let palette: Vec<[u8; 3]> = (0..cols * rows)
        .map(|_| [rng.gen_range(40..=255), rng.gen_range(40..=255), rng.gen_range(40..=255)])
        .collect();
    let (w, h) = (spec.width as usize, spec.height as usize);
    let reference = RasterImage::from_fn(spec.width, spec.height, |x, y| {
        let col = x as usize * cols / w;
        let row = y as usize * rows / h;
        palette[row * cols + col]
    })?;

    let map = segment(&reference, &SlicParams::new(spec.ns))?;
    if map.ns() != spec.ns {
        return Err(Error::Param(format!(
            "scenario {}: segmentation produced {} superpixels instead of {}; adjust the image size",
            spec.name,
            map.ns(),
            spec.ns
        )));
    }

    let mut order: Vec<usize> = (0..spec.ns).collect();
    order.shuffle(&mut rng);
    let salient: BTreeSet<usize> = order[..spec.salient].iter().copied().collect();
    let distractors: BTreeSet<usize> = order[spec.salient..spec.salient + spec.distractors].iter().copied().collect();

    let target_row: Vec<f64> = (0..spec.ns)
        .map(|j| {
            if salient.contains(&j) {
                spec.weight
            } else if distractors.contains(&j) {
                -spec.weight
            } else {
                0.0
            }
        })
        .collect();
    let background_row = target_row.iter().map(|w| -w).collect();
    let classifier =
        LinearSuperpixelClassifier::new(reference.clone(), map.clone(), vec![target_row, background_row], vec![0.0, 0.0])?;

    Ok(Scenario { spec: spec.clone(), reference, map, classifier, salient, distractors })
}

/// `|A ∩ B| / |A ∪ B|`; two empty sets count as a perfect match.
pub fn iou(selected: &Chromosome, truth: &BTreeSet<usize>) -> f64 {
    let chosen: BTreeSet<usize> = selected.selected().into_iter().collect();
    let union = chosen.union(truth).count();
    if union == 0 {
        return 1.0;
    }
    chosen.intersection(truth).count() as f64 / union as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchMethod {
    Elime,
    Lime,
}

impl BenchMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            BenchMethod::Elime => "elime",
            BenchMethod::Lime => "lime",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub runs: usize,
    pub first_seed: u64,
    pub methods: Vec<BenchMethod>,
    pub ga: GaParams,
    pub lime: LimeParams,
    /// Runs executed concurrently; each run still evaluates per its params.
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            runs: 30,
            first_seed: 0,
            methods: vec![BenchMethod::Elime, BenchMethod::Lime],
            ga: GaParams::default(),
            lime: LimeParams::default(),
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub method: String,
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub original_probability: f64,
    pub best_fitness: Vec<f64>,
    /// Maximum of `best_fitness` over runs.
    pub best: f64,
    pub mean_fitness: f64,
    pub std_fitness: f64,
    pub time_s: Vec<f64>,
    pub shortest_time_s: f64,
    pub mean_time_s: f64,
    pub std_time_s: f64,
    pub selected: Vec<usize>,
    pub iou: Vec<f64>,
    pub mean_iou: f64,
    pub oracle_fitness: Option<f64>,
    pub oracle_gaps: Option<Vec<f64>>,
    /// Median of `oracle_gaps`.
    pub oracle_gap: Option<f64>,
    /// Classifier calls per run, as counted during the runs.
    pub classifier_calls: usize,
    /// `history[0]` of each E-LIME run: the best initial fitness.
    pub initial_best: Option<Vec<f64>>,
    /// Whether every E-LIME history was non-decreasing.
    pub monotone_history: bool,
}

/// Population mean and standard deviation; `(0, 0)` for empty input.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => sorted[n / 2],
        _ => (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0,
    }
}

/// One seed's results for every requested method.
struct SeedOutcome {
    elime: Explanation,
    elime_calls: usize,
    lime: Option<(Explanation, usize)>,
}

fn run_seed(scenario: &Scenario, config: &BenchConfig, seed: u64) -> Result<SeedOutcome> {
    let counter = CountingClassifier::new(&scenario.classifier);
    let ga = GaParams { seed, ..config.ga.clone() };
    let elime = evolve(&counter, &scenario.reference, &scenario.map, &ga)?;
    let elime_calls = counter.calls();

    let lime = if config.methods.contains(&BenchMethod::Lime) {
        counter.reset();
        let params = LimeParams { seed, ..config.lime.clone() };
        let budget = elime.selected_count().max(1);
        let e = explain_lime(&counter, &scenario.reference, &scenario.map, &params, budget)?;
        Some((e, counter.calls()))
    } else {
        None
    };
    Ok(SeedOutcome { elime, elime_calls, lime })
}

fn summarize(
    scenario: &Scenario,
    method: BenchMethod,
    seeds: &[u64],
    runs: &[(&Explanation, usize)],
    oracle: Option<f64>,
) -> Result<RunReport> {
    let calls = runs[0].1;
    if let Some((_, c)) = runs.iter().find(|(_, c)| *c != calls) {
        return Err(Error::Numeric(format!(
            "scenario {}: classifier call count varied between runs ({calls} vs {c})",
            scenario.name()
        )));
    }
    let best_fitness: Vec<f64> = runs.iter().map(|(e, _)| e.best_fitness).collect();
    let time_s: Vec<f64> = runs.iter().map(|(e, _)| e.wall_time.as_secs_f64()).collect();
    let iou_values: Vec<f64> = runs.iter().map(|(e, _)| iou(&e.best, &scenario.salient)).collect();
    let (mean_fitness, std_fitness) = mean_std(&best_fitness);
    let (mean_time_s, std_time_s) = mean_std(&time_s);
    let oracle_gaps = oracle.map(|o| best_fitness.iter().map(|f| o - f).collect::<Vec<_>>());
    let is_elime = method == BenchMethod::Elime;
    Ok(RunReport {
        scenario: scenario.name().to_string(),
        method: method.as_str().to_string(),
        runs: runs.len(),
        seeds: seeds.to_vec(),
        original_probability: runs[0].0.original_probability,
        best: best_fitness.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_fitness,
        std_fitness,
        shortest_time_s: time_s.iter().copied().fold(f64::INFINITY, f64::min),
        mean_time_s,
        std_time_s,
        time_s,
        selected: runs.iter().map(|(e, _)| e.selected_count()).collect(),
        mean_iou: mean_std(&iou_values).0,
        iou: iou_values,
        oracle_fitness: oracle,
        oracle_gap: oracle_gaps.as_deref().map(median),
        oracle_gaps,
        classifier_calls: calls,
        initial_best: is_elime.then(|| runs.iter().map(|(e, _)| e.history[0]).collect()),
        monotone_history: runs.iter().all(|(e, _)| e.history.windows(2).all(|w| w[0] <= w[1])),
        best_fitness,
    })
}

/// Runs every method `config.runs` times per scenario with seeds
/// `first_seed..first_seed + runs`. The baseline's feature budget in each
/// seed is the number of superpixels E-LIME selected with that seed, so
/// E-LIME always runs when the baseline is requested.
pub fn run_suite(scenarios: &[Scenario], config: &BenchConfig) -> Result<Vec<RunReport>> {
    if config.runs == 0 {
        return Err(Error::Param("runs must be at least 1".into()));
    }
    if config.jobs == 0 {
        return Err(Error::Param("jobs must be at least 1".into()));
    }
    config.ga.validate()?;
    let seeds: Vec<u64> = (0..config.runs as u64).map(|i| config.first_seed + i).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Param(format!("cannot start {} jobs: {e}", config.jobs)))?;

    let mut reports = Vec::new();
    for scenario in scenarios {
        let oracle = if scenario.map.ns() <= EXHAUSTIVE_LIMIT {
            let target = scenario.classifier.predict(&scenario.reference)?.argmax();
            Some(exhaustive_best(&scenario.classifier, &scenario.reference, &scenario.map, target)?.fitness)
        } else {
            None
        };

        let tag = |seed: u64| {
            move |e: Error| Error::Run { scenario: scenario.name().to_string(), seed, source: Box::new(e) }
        };
        let outcomes: Vec<SeedOutcome> = if config.jobs > 1 {
            pool.install(|| {
                seeds
                    .par_iter()
                    .map(|&s| run_seed(scenario, config, s).map_err(tag(s)))
                    .collect::<Result<Vec<_>>>()
            })?
        } else {
            seeds
                .iter()
                .map(|&s| run_seed(scenario, config, s).map_err(tag(s)))
                .collect::<Result<Vec<_>>>()?
        };

        for method in [BenchMethod::Elime, BenchMethod::Lime] {
            if !config.methods.contains(&method) {
                continue;
            }
            let runs: Vec<(&Explanation, usize)> = match method {
                BenchMethod::Elime => outcomes.iter().map(|o| (&o.elime, o.elime_calls)).collect(),
                BenchMethod::Lime => outcomes
                    .iter()
                    .map(|o| o.lime.as_ref().map(|(e, c)| (e, *c)).expect("lime requested"))
                    .collect(),
            };
            reports.push(summarize(scenario, method, &seeds, &runs, oracle)?);
        }
    }
    Ok(reports)
}

/// A parsed suite file.
#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub methods: Option<Vec<BenchMethod>>,
    pub ga: Option<GaParams>,
    pub lime: Option<LimeParams>,
    pub scenarios: Vec<ScenarioSpec>,
}

impl Suite {
    /// Parses the TOML suite format: optional `runs`, `seed`, `methods`,
    /// `[ga]` and `[lime]` tables, and one or more `[[scenario]]` entries.
    pub fn parse(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            runs: Option<usize>,
            seed: Option<u64>,
            methods: Option<Vec<BenchMethod>>,
            ga: Option<GaParams>,
            lime: Option<LimeParams>,
            #[serde(default)]
            scenario: Vec<ScenarioSpec>,
        }
        let raw: Raw = toml::from_str(text).map_err(|e| Error::Input(format!("suite file: {e}")))?;
        if raw.scenario.is_empty() {
            return Err(Error::Input("suite file declares no [[scenario]]".into()));
        }
        let mut names = BTreeSet::new();
        for s in &raw.scenario {
            if !names.insert(s.name.as_str()) {
                return Err(Error::Input(format!("duplicate scenario name {:?}", s.name)));
            }
        }
        if let Some(methods) = &raw.methods {
            if methods.is_empty() {
                return Err(Error::Input("methods list is empty".into()));
            }
        }
        Ok(Self {
            runs: raw.runs,
            seed: raw.seed,
            methods: raw.methods,
            ga: raw.ga,
            lime: raw.lime,
            scenarios: raw.scenario,
        })
    }

    pub fn packaged() -> Self {
        Self::parse(DEFAULT_SUITE).expect("packaged suite parses")
    }

    /// Suite values layered over `base`.
    pub fn config(&self, base: &BenchConfig) -> BenchConfig {
        let mut config = base.clone();
        if let Some(runs) = self.runs {
            config.runs = runs;
        }
        if let Some(seed) = self.seed {
            config.first_seed = seed;
        }
        if let Some(methods) = &self.methods {
            config.methods = methods.clone();
        }
        if let Some(ga) = &self.ga {
            config.ga = GaParams { workers: base.ga.workers, ..ga.clone() };
        }
        if let Some(lime) = &self.lime {
            config.lime = LimeParams { workers: base.lime.workers, ..lime.clone() };
        }
        config
    }

    pub fn build_scenarios(&self) -> Result<Vec<Scenario>> {
        self.scenarios.iter().map(make_scenario).collect()
    }
}

/// Looks up a scenario of the packaged suite by name.
pub fn packaged_scenario(name: &str) -> Result<Scenario> {
    let suite = Suite::packaged();
    let spec = suite
        .scenarios
        .iter()
        .find(|s| s.name == name)
        .ok_or_else(|| {
            let known: Vec<&str> = suite.scenarios.iter().map(|s| s.name.as_str()).collect();
            Error::Input(format!("unknown builtin scenario {name:?}; known: {}", known.join(", ")))
        })?;
    make_scenario(spec)
}

pub fn reports_to_json(reports: &[RunReport]) -> Result<String> {
    let mut text = serde_json::to_string_pretty(reports)?;
    text.push('\n');
    Ok(text)
}

pub const CSV_HEADER: [&str; 15] = [
    "scenario",
    "method",
    "runs",
    "original",
    "best",
    "mean_fitness",
    "std_fitness",
    "shortest_time_s",
    "mean_time_s",
    "std_time_s",
    "mean_iou",
    "mean_selected",
    "oracle_fitness",
    "median_oracle_gap",
    "classifier_calls",
];

/// One row per scenario × method with the aggregate columns.
pub fn write_csv<W: Write>(reports: &[RunReport], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    writer.write_record(CSV_HEADER).map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in reports {
        let mean_selected = r.selected.iter().sum::<usize>() as f64 / r.selected.len().max(1) as f64;
        writer
            .write_record([
                r.scenario.clone(),
                r.method.clone(),
                r.runs.to_string(),
                r.original_probability.to_string(),
                r.best.to_string(),
                r.mean_fitness.to_string(),
                r.std_fitness.to_string(),
                r.shortest_time_s.to_string(),
                r.mean_time_s.to_string(),
                r.std_time_s.to_string(),
                r.mean_iou.to_string(),
                mean_selected.to_string(),
                opt(r.oracle_fitness),
                opt(r.oracle_gap),
                r.classifier_calls.to_string(),
            ])
            .map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

/// Explains one image with E-LIME and then with the baseline at E-LIME's
/// cardinality, so both masks select the same number of superpixels.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub elime: Explanation,
    pub lime: Explanation,
}

pub fn compare(
    model: &dyn Classifier,
    img: &RasterImage,
    map: &SuperpixelMap,
    ga: &GaParams,
    lime: &LimeParams,
) -> Result<Comparison> {
    let elime = evolve(model, img, map, ga)?;
    let budget = elime.selected_count();
    if budget == 0 {
        return Err(Error::Refused(
            "the evolved explanation selects no superpixels, there is no budget to compare at".into(),
        ));
    }
    let lime = explain_lime(model, img, map, lime, budget)?;
    Ok(Comparison { elime, lime })
}
