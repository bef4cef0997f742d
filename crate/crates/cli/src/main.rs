//! `gridnet`: generate datasets, train, probe, run experiments, render
//! figures and serve the HTTP API.
//!
//! Exit codes: 0 success, 1 runtime error or failed checks, 2 usage error.

use std::collections::BTreeMap;
use std::fs;
use std::net::IpAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridnet::datasets::{
    dataset_load, dataset_save, make_digit_dataset, make_random_dataset, rebalance_classes,
    replace_class_with_random, Dataset, GlyphSet, VariantSpec, DEFAULT_RANDOM_DENSITY, NOT_A_DIGIT,
};
use gridnet::experiments::{run, run_sweep, ExperimentKind, ExperimentReport, ExperimentSpec};
use gridnet::network::{model_load, model_save};
use gridnet::training::{
    fit, predict, Hyperparams, SeedPlan, TrainingHistory, DEFAULT_SPLIT_FRACTION,
};
use gridnet::viz::{prediction_caption, render_curves, render_diagram, DiagramSpec};
use gridnet::{Activation, Network, NetworkConfig};
use gridnet_service::{default_class_names, ServeOptions, DEFAULT_PORT};

mod image;

use image::ImageSpec;

#[derive(Debug, Parser)]
#[command(
    name = "gridnet",
    version,
    about = "Tiny feedforward networks on 6x6 pixel grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate or modify dataset documents
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Split, initialize and train a network on a dataset document
    Train(TrainArgs),
    /// Classify one image with a saved model
    Predict(PredictArgs),
    /// Run a reference experiment for one seed or a range of seeds
    Experiment(ExperimentArgs),
    /// Render figures from saved documents
    #[command(subcommand)]
    Render(RenderCommand),
    /// Serve the HTTP API
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DatasetKind {
    Digits,
    Random,
}

#[derive(Debug, Subcommand)]
enum DatasetCommand {
    /// Generate a dataset
    Gen(GenArgs),
    /// Replace a class with random images or shrink classes
    Surgery(SurgeryArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "digits")]
    kind: DatasetKind,
    /// Examples per class (random: number of images)
    #[arg(long, default_value_t = VariantSpec::default().per_class)]
    per_class: usize,
    #[arg(long, default_value_t = VariantSpec::default().flip_prob)]
    flip_prob: f64,
    #[arg(long, default_value_t = VariantSpec::default().shift_max)]
    shift_max: usize,
    /// Probability that a random-image pixel is lit
    #[arg(long, default_value_t = DEFAULT_RANDOM_DENSITY)]
    density: f64,
    /// Class name for random images
    #[arg(long, default_value = NOT_A_DIGIT)]
    name: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("op").required(true).args(["replace_class", "rebalance"]))]
struct SurgeryArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Replace every image of this class with random images
    #[arg(long)]
    replace_class: Option<usize>,
    /// New name for the replaced class
    #[arg(long, default_value = NOT_A_DIGIT, requires = "replace_class")]
    name: String,
    #[arg(long, default_value_t = DEFAULT_RANDOM_DENSITY, requires = "replace_class")]
    density: f64,
    /// Keep a fraction of one class, e.g. `7=0.1`; repeatable
    #[arg(long, value_parser = parse_proportion)]
    rebalance: Vec<(usize, f64)>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum HiddenActivation {
    Relu,
    Sigmoid,
    Linear,
}

impl From<HiddenActivation> for Activation {
    fn from(a: HiddenActivation) -> Self {
        match a {
            HiddenActivation::Relu => Activation::Relu,
            HiddenActivation::Sigmoid => Activation::Sigmoid,
            HiddenActivation::Linear => Activation::Linear,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Hidden layer widths, comma separated
    #[arg(long, value_delimiter = ',', default_value = "20")]
    hidden: Vec<usize>,
    #[arg(long, value_enum, default_value = "relu")]
    activation: HiddenActivation,
    #[arg(long, default_value_t = Hyperparams::default().learning_rate)]
    lr: f64,
    #[arg(long, default_value_t = Hyperparams::default().epochs,
          value_parser = positive)]
    epochs: usize,
    #[arg(long, default_value_t = Hyperparams::default().batch_size,
          value_parser = positive)]
    batch: usize,
    /// Fraction of each class used for training
    #[arg(long, default_value_t = DEFAULT_SPLIT_FRACTION)]
    split: f64,
    /// Seeds initialization; split and shuffle seeds are derived from it
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_model: Option<PathBuf>,
    #[arg(long)]
    out_history: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// checkerboard[:PHASE], glyph:N, file:PATH or pixels:CSV
    #[arg(long)]
    image: ImageSpec,
    /// Class names, comma separated (default: output indices)
    #[arg(long, value_delimiter = ',', conflicts_with = "dataset")]
    classes: Option<Vec<String>>,
    /// Take class names from this dataset document
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Also write the activation diagram here
    #[arg(long)]
    diagram: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(value_parser = parse_kind)]
    kind: ExperimentKind,
    #[arg(long, default_value_t = 42, conflicts_with = "seeds")]
    seed: u64,
    /// Inclusive seed range, e.g. `1..10`
    #[arg(long, value_parser = parse_seed_range)]
    seeds: Option<(u64, u64)>,
    #[arg(long, default_value = "runs")]
    out_dir: PathBuf,
    /// Override a setting, e.g. `epochs=200`; repeatable
    #[arg(long = "set", value_parser = parse_override)]
    overrides: Vec<(String, f64)>,
}

#[derive(Debug, Subcommand)]
enum RenderCommand {
    /// Loss and accuracy curves from a history document
    Curves {
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Activation diagram of a model for one input
    Diagram {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "checkerboard")]
        input: ImageSpec,
        #[arg(long, value_delimiter = ',')]
        classes: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    #[arg(long, default_value_t = DEFAULT_PORT)]
    port: u16,
    #[arg(long)]
    state_dir: Option<PathBuf>,
    #[arg(long)]
    cors_origin: Option<String>,
    /// Serve static files (the browser UI) from this directory
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("{s:?} is not a positive integer")),
    }
}

fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    s.parse().map_err(|e: gridnet::Error| e.to_string())
}

fn parse_proportion(s: &str) -> Result<(usize, f64), String> {
    let (class, frac) = s.split_once('=').ok_or("expected CLASS=FRACTION")?;
    let class = class
        .trim()
        .parse()
        .map_err(|_| format!("bad class {class:?}"))?;
    let frac = frac
        .trim()
        .parse()
        .map_err(|_| format!("bad fraction {frac:?}"))?;
    Ok((class, frac))
}

fn parse_seed_range(s: &str) -> Result<(u64, u64), String> {
    let (a, b) = s.split_once("..").ok_or("expected A..B")?;
    let a: u64 = a.parse().map_err(|_| format!("bad seed {a:?}"))?;
    let b: u64 = b
        .trim_start_matches('=')
        .parse()
        .map_err(|_| format!("bad seed {b:?}"))?;
    if a > b {
        return Err(format!("empty range {a}..{b}"));
    }
    Ok((a, b))
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (key, value) = s.split_once('=').ok_or("expected KEY=VALUE")?;
    let value = value.parse().map_err(|_| format!("bad value {value:?}"))?;
    Ok((key.to_owned(), value))
}

enum Failure {
    Usage(String),
    Runtime(String),
}

type CliResult<T = ()> = Result<T, Failure>;

fn usage(e: impl ToString) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: impl ToString) -> Failure {
    Failure::Runtime(e.to_string())
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| runtime(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> CliResult {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| runtime(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn load_dataset(path: &Path) -> CliResult<Dataset> {
    dataset_load(&read(path)?).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> CliResult<Network> {
    model_load(&read(path)?).map_err(|e| runtime(format!("{}: {e}", path.display())))
}

fn summarize(path: &Path, ds: &Dataset) -> String {
    let counts: Vec<String> = ds
        .classes()
        .iter()
        .zip(ds.class_counts())
        .map(|(name, n)| format!("{name}:{n}"))
        .collect();
    format!(
        "{}: {} examples [{}]",
        path.display(),
        ds.len(),
        counts.join(" ")
    )
}

fn dataset_gen(args: GenArgs) -> CliResult {
    let ds = match args.kind {
        DatasetKind::Digits => {
            let spec = VariantSpec {
                per_class: args.per_class,
                flip_prob: args.flip_prob,
                shift_max: args.shift_max,
                seed: args.seed,
            };
            spec.validate().map_err(usage)?;
            make_digit_dataset(&GlyphSet::standard(), &spec).map_err(runtime)?
        }
        DatasetKind::Random => {
            make_random_dataset(args.per_class, args.density, args.seed, &args.name)
                .map_err(usage)?
        }
    };
    write(&args.out, &dataset_save(&ds))?;
    println!("{}", summarize(&args.out, &ds));
    Ok(())
}

fn dataset_surgery(args: SurgeryArgs) -> CliResult {
    let ds = load_dataset(&args.input)?;
    let out = match args.replace_class {
        Some(class) => {
            if !args.rebalance.is_empty() {
                return Err(usage("--replace-class and --rebalance are exclusive"));
            }
            replace_class_with_random(&ds, class, &args.name, args.density, args.seed)
                .map_err(usage)?
        }
        None => {
            let proportions: BTreeMap<usize, f64> = args.rebalance.into_iter().collect();
            rebalance_classes(&ds, &proportions, args.seed).map_err(usage)?
        }
    };
    write(&args.out, &dataset_save(&out))?;
    println!("{}", summarize(&args.out, &out));
    Ok(())
}

fn train(args: TrainArgs) -> CliResult {
    let hp_probe = Hyperparams {
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch,
        shuffle_seed: 0,
    };
    hp_probe.validate().map_err(usage)?;
    if !(args.split > 0.0 && args.split <= 1.0) {
        return Err(usage(format!("--split {} must be in (0, 1]", args.split)));
    }
    let ds = load_dataset(&args.dataset)?;
    let mut config = NetworkConfig::default()
        .with_hidden(&args.hidden, args.activation.into())
        .with_seed(args.seed);
    config.output_units = ds.classes().len();
    config.validate().map_err(usage)?;

    let seeds = SeedPlan::from_seed(args.seed);
    let hp = Hyperparams {
        shuffle_seed: seeds.shuffle,
        ..hp_probe
    };
    let out = fit(&ds, config, args.split, seeds.split, &hp, None).map_err(runtime)?;
    if let Some(path) = &args.out_model {
        write(path, &model_save(&out.network))?;
    }
    if let Some(path) = &args.out_history {
        write(path, &out.history.to_json())?;
    }
    let last = out.history.last().expect("at least one epoch");
    println!(
        "epochs={} train_loss={} train_acc={} val_loss={} val_acc={}",
        last.epoch, last.train_loss, last.train_acc, last.val_loss, last.val_acc
    );
    Ok(())
}

fn class_names(
    net: &Network,
    given: Option<Vec<String>>,
    dataset: Option<&Path>,
) -> CliResult<Vec<String>> {
    let names = match (given, dataset) {
        (Some(names), _) => names,
        (None, Some(path)) => load_dataset(path)?.classes().to_vec(),
        (None, None) => default_class_names(net.output_units()),
    };
    if names.len() != net.output_units() {
        return Err(usage(format!(
            "{} class names for a model with {} outputs",
            names.len(),
            net.output_units()
        )));
    }
    Ok(names)
}

fn diagram_svg(net: &Network, image: &ImageSpec, names: &[String]) -> CliResult<(String, String)> {
    let grid = image.load().map_err(runtime)?;
    let prediction = predict(net, &grid, names).map_err(runtime)?;
    let caption = prediction_caption(&image.to_string(), &prediction);
    let line = format!(
        "class={} probability={:.4} status={}",
        prediction.class_name,
        prediction.probability(),
        match prediction.status {
            gridnet::training::Confidence::Confident => "confident",
            gridnet::training::Confidence::Unsure => "unsure",
        }
    );
    let svg = render_diagram(&net.forward(&grid), &DiagramSpec::default(), Some(&caption))
        .map_err(runtime)?;
    Ok((line, svg))
}

fn predict_cmd(args: PredictArgs) -> CliResult {
    let net = load_model(&args.model)?;
    let names = class_names(&net, args.classes, args.dataset.as_deref())?;
    let (line, svg) = diagram_svg(&net, &args.image, &names)?;
    if let Some(path) = &args.diagram {
        write(path, &svg)?;
    }
    println!("{line}");
    Ok(())
}

fn report_line(report: &ExperimentReport, dir: &Path) -> String {
    let passed = report.checks.iter().filter(|c| c.passed).count();
    let mut line = format!(
        "{} seed {}: {passed}/{} checks passed -> {}",
        report.spec.kind,
        report.spec.seed,
        report.checks.len(),
        dir.display()
    );
    let failed = report.failed_checks();
    if !failed.is_empty() {
        line.push_str(&format!(" (failed: {})", failed.join(", ")));
    }
    line
}

fn experiment(args: ExperimentArgs) -> CliResult {
    let overrides: BTreeMap<String, f64> = args.overrides.into_iter().collect();
    gridnet::experiments::Settings::resolve(&overrides).map_err(usage)?;

    match args.seeds {
        None => {
            let spec = ExperimentSpec {
                kind: args.kind,
                seed: args.seed,
                overrides,
            };
            let result = run(&spec).map_err(runtime)?;
            let dir = result.write_to(&args.out_dir).map_err(runtime)?;
            println!("{}", report_line(&result.report, &dir));
            for c in &result.report.checks {
                println!(
                    "  {} {}: {}",
                    if c.passed { "pass" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            if result.report.all_passed() {
                Ok(())
            } else {
                Err(runtime(format!(
                    "failed checks: {}",
                    result.report.failed_checks().join(", ")
                )))
            }
        }
        Some((a, b)) => {
            let (runs, summary) = run_sweep(args.kind, a..=b, &overrides).map_err(runtime)?;
            for r in &runs {
                let dir = r.write_to(&args.out_dir).map_err(runtime)?;
                println!("{}", report_line(&r.report, &dir));
            }
            for t in &summary.tallies {
                println!("{}: {}/{}", t.name, t.passed, t.total);
            }
            let path = args
                .out_dir
                .join(format!("{}-seeds{a}-{b}.json", args.kind));
            write(&path, &summary.to_json())?;
            if summary.passed {
                println!("sweep passed");
                Ok(())
            } else {
                Err(runtime("sweep failed"))
            }
        }
    }
}

fn render(cmd: RenderCommand) -> CliResult {
    match cmd {
        RenderCommand::Curves { history, out } => {
            let h = TrainingHistory::from_json(&read(&history)?)
                .map_err(|e| runtime(format!("{}: {e}", history.display())))?;
            write(&out, &render_curves(&h).map_err(runtime)?)?;
        }
        RenderCommand::Diagram {
            model,
            input,
            classes,
            out,
        } => {
            let net = load_model(&model)?;
            let names = class_names(&net, classes, None)?;
            let (_, svg) = diagram_svg(&net, &input, &names)?;
            write(&out, &svg)?;
        }
    }
    Ok(())
}

fn serve(args: ServeArgs) -> CliResult {
    let opts = ServeOptions {
        host: args.host,
        port: args.port,
        state_dir: args.state_dir,
        cors_origin: args.cors_origin,
        static_dir: args.static_dir,
    };
    let rt = tokio::runtime::Runtime::new().map_err(runtime)?;
    rt.block_on(gridnet_service::serve(opts)).map_err(runtime)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Dataset(DatasetCommand::Gen(a)) => dataset_gen(a),
        Command::Dataset(DatasetCommand::Surgery(a)) => dataset_surgery(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Experiment(a) => experiment(a),
        Command::Render(c) => render(c),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
