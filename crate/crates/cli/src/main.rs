use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evoxplain::bench::{self, BenchConfig, Scenario, Suite};
use evoxplain::classifier::check_health;
use evoxplain::config::ConfigFile;
use evoxplain::explainer::CrossoverKind;
use evoxplain::render::boundary_overlay;
use evoxplain::{
    decode_mask, evolve, explain_lime, segment, Classifier, Error, ErrorClass, Explanation, GaParams, LimeParams,
    RasterImage, RemoteClassifier, Result, SlicParams, SuperpixelMap,
};

#[derive(Parser)]
#[command(name = "evoxplain", version, about = "Evolutionary superpixel explanations for image classifiers")]
struct Cli {
    /// Plain `key = value` file with defaults for any flag; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Segment an image into SLIC superpixels.
    Segment(SegmentArgs),
    /// Explain a classifier's prediction on one image.
    Explain(ExplainArgs),
    /// Run the repeated-run benchmark suite.
    Bench(BenchArgs),
    /// Query a remote classifier's health endpoint.
    CheckModel(CheckModelArgs),
    /// Write the reference image of a builtin scenario.
    DemoImage(DemoImageArgs),
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    superpixels: Option<usize>,
    #[arg(long)]
    compactness: Option<f64>,
    /// Boundary overlay PNG.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Label map JSON.
    #[arg(long)]
    map_out: Option<PathBuf>,
    /// Verify the map invariants and fail if any is violated.
    #[arg(long)]
    check: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Elime,
    Lime,
    Compare,
}

#[derive(Args)]
struct ExplainArgs {
    /// Input PNG; optional for builtin models, which default to their reference image.
    #[arg(long)]
    image: Option<PathBuf>,
    /// `builtin:<scenario>` or `http://host:port`.
    #[arg(long, env = "EVOXPLAIN_MODEL_URL")]
    model: Option<String>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    superpixels: Option<usize>,
    #[arg(long)]
    compactness: Option<f64>,
    #[arg(long)]
    population_size: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    crossover_rate: Option<f64>,
    #[arg(long)]
    mutation_rate: Option<f64>,
    #[arg(long)]
    tournament_size: Option<usize>,
    /// `single-point` or `uniform`.
    #[arg(long)]
    crossover: Option<String>,
    #[arg(long)]
    seed_all_ones: bool,
    #[arg(long)]
    num_samples: Option<usize>,
    #[arg(long)]
    kernel_width: Option<f64>,
    #[arg(long)]
    ridge_lambda: Option<f64>,
    /// Superpixels the baseline may select.
    #[arg(long)]
    budget: Option<usize>,
    /// Take the baseline budget from a previous E-LIME report.
    #[arg(long, conflicts_with = "budget")]
    budget_from: Option<PathBuf>,
    /// Fitness evaluation threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Remote request timeout in milliseconds.
    #[arg(long)]
    timeout_ms: Option<u64>,
    /// Concurrent remote requests; defaults to --jobs.
    #[arg(long)]
    max_in_flight: Option<usize>,
    /// Record wall time in the report (makes it run-dependent).
    #[arg(long)]
    timing: bool,
    /// Masked image PNG of the explanation (E-LIME's in compare mode).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Baseline masked image PNG in compare mode.
    #[arg(long)]
    baseline_out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Suite TOML; the packaged suite when absent.
    #[arg(long)]
    suite: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Seeds run concurrently.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct CheckModelArgs {
    #[arg(long, env = "EVOXPLAIN_MODEL_URL")]
    model: Option<String>,
    #[arg(long)]
    timeout_ms: Option<u64>,
}

#[derive(Args)]
struct DemoImageArgs {
    #[arg(long, default_value = "demo")]
    scenario: String,
    #[arg(long)]
    out: PathBuf,
}

const DEFAULT_SUPERPIXELS: usize = 100;
const DEFAULT_COMPACTNESS: f64 = 10.0;
const DEFAULT_TIMEOUT_MS: u64 = 30_000;

const CONFIG_KEYS: &[&str] = &[
    "superpixels",
    "compactness",
    "model",
    "method",
    "seed",
    "population-size",
    "generations",
    "crossover-rate",
    "mutation-rate",
    "tournament-size",
    "crossover",
    "seed-all-ones",
    "num-samples",
    "kernel-width",
    "ridge-lambda",
    "budget",
    "jobs",
    "timeout-ms",
    "max-in-flight",
    "runs",
    "out-dir",
];

/// Flag value, else config value, else nothing.
fn pick<T: FromStr>(flag: Option<T>, config: &ConfigFile, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => config.get(key),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Input => 2,
                ErrorClass::Transport => 3,
                ErrorClass::Protocol => 4,
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => ConfigFile::read(path)?,
        None => ConfigFile::default(),
    };
    config.check_keys(CONFIG_KEYS)?;
    match cli.command {
        Command::Segment(args) => cmd_segment(args, &config),
        Command::Explain(args) => cmd_explain(args, &config),
        Command::Bench(args) => cmd_bench(args, &config),
        Command::CheckModel(args) => cmd_check_model(args, &config),
        Command::DemoImage(args) => {
            let scenario = bench::packaged_scenario(&args.scenario)?;
            scenario.reference.write_png(&args.out)
        }
    }
}

fn slic_params(superpixels: Option<usize>, compactness: Option<f64>, config: &ConfigFile) -> Result<SlicParams> {
    let k = pick(superpixels, config, "superpixels")?.unwrap_or(DEFAULT_SUPERPIXELS);
    let m = pick(compactness, config, "compactness")?.unwrap_or(DEFAULT_COMPACTNESS);
    Ok(SlicParams::new(k).with_compactness(m))
}

fn cmd_segment(args: SegmentArgs, config: &ConfigFile) -> Result<()> {
    let params = slic_params(args.superpixels, args.compactness, config)?;
    let img = RasterImage::read_png(&args.image)?;
    let map = segment(&img, &params)?;
    println!("superpixels: {}", map.ns());
    if args.check {
        if map.ns() > params.k {
            return Err(Error::Numeric(format!("{} superpixels exceed the requested {}", map.ns(), params.k)));
        }
        if map.sizes().contains(&0) {
            return Err(Error::Numeric("a superpixel is empty".into()));
        }
        if !map.is_four_connected() {
            return Err(Error::Numeric("a superpixel is not 4-connected".into()));
        }
        println!("check: ok");
    }
    if let Some(path) = &args.out {
        boundary_overlay(&img, &map)?.write_png(path)?;
    }
    if let Some(path) = &args.map_out {
        write_text(path, &map.to_json()?)?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))
}

/// The classifier together with the image and segmentation to explain.
struct Subject {
    model: Box<dyn Classifier>,
    image: RasterImage,
    map: SuperpixelMap,
}

fn load_subject(args: &ExplainArgs, config: &ConfigFile, jobs: usize) -> Result<Subject> {
    let spec = match &args.model {
        Some(m) => m.clone(),
        None => config
            .get_str("model")
            .map(str::to_string)
            .ok_or_else(|| Error::Input("no model given; pass --model or set EVOXPLAIN_MODEL_URL".into()))?,
    };
    if let Some(name) = spec.strip_prefix("builtin:") {
        let Scenario { reference, map, classifier, .. } = bench::packaged_scenario(name)?;
        let image = match &args.image {
            Some(path) => RasterImage::read_png(path)?,
            None => reference,
        };
        return Ok(Subject { model: Box::new(classifier), image, map });
    }
    if spec.starts_with("http://") || spec.starts_with("https://") {
        let image_path =
            args.image.as_ref().ok_or_else(|| Error::Input("--image is required with a remote model".into()))?;
        let image = RasterImage::read_png(image_path)?;
        let params = slic_params(args.superpixels, args.compactness, config)?;
        let map = segment(&image, &params)?;
        let timeout = Duration::from_millis(pick(args.timeout_ms, config, "timeout-ms")?.unwrap_or(DEFAULT_TIMEOUT_MS));
        let in_flight = pick(args.max_in_flight, config, "max-in-flight")?.unwrap_or(jobs);
        let model = RemoteClassifier::connect(&spec, timeout, in_flight)?;
        return Ok(Subject { model: Box::new(model), image, map });
    }
    Err(Error::Input(format!("unrecognized model {spec:?}; expected builtin:<name> or http://host:port")))
}

fn ga_params(args: &ExplainArgs, config: &ConfigFile, seed: u64, jobs: usize) -> Result<GaParams> {
    let d = GaParams::default();
    let crossover = match pick(args.crossover.clone(), config, "crossover")?.as_deref() {
        None | Some("single-point") => CrossoverKind::SinglePoint,
        Some("uniform") => CrossoverKind::Uniform,
        Some(other) => return Err(Error::Param(format!("unknown crossover {other:?}"))),
    };
    let params = GaParams {
        population_size: pick(args.population_size, config, "population-size")?.unwrap_or(d.population_size),
        generations: pick(args.generations, config, "generations")?.unwrap_or(d.generations),
        crossover_rate: pick(args.crossover_rate, config, "crossover-rate")?.unwrap_or(d.crossover_rate),
        mutation_rate: pick(args.mutation_rate, config, "mutation-rate")?.unwrap_or(d.mutation_rate),
        tournament_size: pick(args.tournament_size, config, "tournament-size")?.unwrap_or(d.tournament_size),
        crossover,
        seed_all_ones: args.seed_all_ones || config.get("seed-all-ones")?.unwrap_or(false),
        seed,
        workers: jobs,
    };
    params.validate()?;
    Ok(params)
}

fn lime_params(args: &ExplainArgs, config: &ConfigFile, seed: u64, jobs: usize) -> Result<LimeParams> {
    let d = LimeParams::default();
    Ok(LimeParams {
        num_samples: pick(args.num_samples, config, "num-samples")?.unwrap_or(d.num_samples),
        kernel_width: pick(args.kernel_width, config, "kernel-width")?,
        ridge_lambda: pick(args.ridge_lambda, config, "ridge-lambda")?.unwrap_or(d.ridge_lambda),
        seed,
        workers: jobs,
    })
}

fn print_summary(e: &Explanation, ns: usize) {
    println!(
        "{}: label {} original {:.6} best {:.6} selected {}/{} calls {}",
        e.method.as_str(),
        e.target_label,
        e.original_probability,
        e.best_fitness,
        e.selected_count(),
        ns,
        e.classifier_calls
    );
}

fn cmd_explain(args: ExplainArgs, config: &ConfigFile) -> Result<()> {
    let method = match args.method {
        Some(m) => m,
        None => match config.get_str("method") {
            None | Some("elime") => MethodArg::Elime,
            Some("lime") => MethodArg::Lime,
            Some("compare") => MethodArg::Compare,
            Some(other) => return Err(Error::Input(format!("unknown method {other:?}"))),
        },
    };
    let seed = pick(args.seed, config, "seed")?.unwrap_or(0);
    let jobs = pick(args.jobs, config, "jobs")?.unwrap_or(1);
    if jobs == 0 {
        return Err(Error::Param("--jobs must be at least 1".into()));
    }
    let subject = load_subject(&args, config, jobs)?;
    let (model, image, map) = (subject.model.as_ref(), &subject.image, &subject.map);
    let ns = map.ns();

    let (report, masks) = match method {
        MethodArg::Elime => {
            let e = evolve(model, image, map, &ga_params(&args, config, seed, jobs)?)?;
            print_summary(&e, ns);
            (e.to_json(args.timing)?, vec![e])
        }
        MethodArg::Lime => {
            let budget = match &args.budget_from {
                Some(path) => {
                    let text = std::fs::read_to_string(path)
                        .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
                    Explanation::from_json(&text)?.selected_count()
                }
                None => pick(args.budget, config, "budget")?
                    .ok_or_else(|| Error::Input("the lime method needs --budget or --budget-from".into()))?,
            };
            let e = explain_lime(model, image, map, &lime_params(&args, config, seed, jobs)?, budget)?;
            print_summary(&e, ns);
            (e.to_json(args.timing)?, vec![e])
        }
        MethodArg::Compare => {
            let c = bench::compare(
                model,
                image,
                map,
                &ga_params(&args, config, seed, jobs)?,
                &lime_params(&args, config, seed, jobs)?,
            )?;
            print_summary(&c.elime, ns);
            print_summary(&c.lime, ns);
            let both = serde_json::json!({
                "elime": serde_json::from_str::<serde_json::Value>(&c.elime.to_json(args.timing)?)?,
                "lime": serde_json::from_str::<serde_json::Value>(&c.lime.to_json(args.timing)?)?,
            });
            let mut text = serde_json::to_string_pretty(&both)?;
            text.push('\n');
            (text, vec![c.elime, c.lime])
        }
    };

    if let Some(path) = &args.report {
        write_text(path, &report)?;
    }
    if let Some(path) = &args.out {
        decode_mask(&masks[0].best, image, map)?.write_png(path)?;
    }
    if let Some(path) = &args.baseline_out {
        let e = masks
            .get(1)
            .ok_or_else(|| Error::Input("--baseline-out is only meaningful with --method compare".into()))?;
        decode_mask(&e.best, image, map)?.write_png(path)?;
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs, config: &ConfigFile) -> Result<()> {
    let suite = match &args.suite {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Input(format!("cannot read suite {}: {e}", path.display())))?;
            Suite::parse(&text)?
        }
        None => Suite::packaged(),
    };
    let mut bench_config = suite.config(&BenchConfig::default());
    if let Some(runs) = pick(args.runs, config, "runs")? {
        bench_config.runs = runs;
    }
    if let Some(seed) = pick(args.seed, config, "seed")? {
        bench_config.first_seed = seed;
    }
    bench_config.jobs = pick(args.jobs, config, "jobs")?.unwrap_or(1);
    let out_dir = pick(args.out_dir, config, "out-dir")?.unwrap_or_else(|| PathBuf::from("bench-out"));

    let scenarios = suite.build_scenarios()?;
    let reports = bench::run_suite(&scenarios, &bench_config)?;
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| Error::Input(format!("cannot create {}: {e}", out_dir.display())))?;
    write_text(&out_dir.join("report.json"), &bench::reports_to_json(&reports)?)?;
    let csv_path = out_dir.join("summary.csv");
    let file = std::fs::File::create(&csv_path)
        .map_err(|e| Error::Input(format!("cannot write {}: {e}", csv_path.display())))?;
    bench::write_csv(&reports, file)?;
    for r in &reports {
        println!(
            "{} {}: original {:.6} mean {:.6} ± {:.6} best {:.6} iou {:.3}",
            r.scenario, r.method, r.original_probability, r.mean_fitness, r.std_fitness, r.best, r.mean_iou
        );
    }
    println!("wrote {}", out_dir.display());
    Ok(())
}

fn cmd_check_model(args: CheckModelArgs, config: &ConfigFile) -> Result<()> {
    let url = match args.model {
        Some(m) => m,
        None => config
            .get_str("model")
            .map(str::to_string)
            .ok_or_else(|| Error::Input("no model given; pass --model or set EVOXPLAIN_MODEL_URL".into()))?,
    };
    let timeout = Duration::from_millis(pick(args.timeout_ms, config, "timeout-ms")?.unwrap_or(DEFAULT_TIMEOUT_MS));
    let classes = check_health(&url, timeout)?;
    println!("classes: {classes}");
    Ok(())
}
