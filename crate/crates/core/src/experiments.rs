//! End-to-end, seed-parameterized experiment pipelines:
//!
//! - `basic`: ten digit classes, train, evaluate, probe the checkerboard.
//! - `not_digit`: digit 0 replaced by random images, then probe the
//!   checkerboard and fresh random images.
//! - `imbalance`: a balanced control and an arm with one class subsampled,
//!   paired on initial weights, compared on held-out per-class recall.
//!
//! A run is a pure function of its [`ExperimentSpec`]. Reports carry only
//! relative artifact names and no timestamps, so their bytes are reproducible.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datasets::{
    make_checkerboard, make_digit_dataset, make_random_images, rebalance_classes,
    replace_class_with_random, DatasetSummary, GlyphSet, VariantSpec, DEFAULT_RANDOM_DENSITY,
    NOT_A_DIGIT,
};
use crate::error::{Error, Result};
use crate::grid::PixelGrid;
use crate::network::{model_save, Activation, Network, NetworkConfig};
use crate::rng::derive_seed;
use crate::training::{
    evaluate, fit, predict, split, train, EpochRecord, EvalReport, Hyperparams, Prediction,
    SeedPlan, SplitDataset, TrainingHistory,
};
use crate::viz::{prediction_caption, render_curves, render_diagram, DiagramSpec};

const RANDOM_CLASS_STREAM: u64 = 3;
const PROBE_STREAM: u64 = 4;
const TEST_SET_STREAM: u64 = 5;
const REBALANCE_STREAM: u64 = 6;

pub const RANDOM_PROBE_COUNT: usize = 20;
/// Share of seeds that must reject the checkerboard for a not-digit sweep to pass.
pub const NOT_DIGIT_SWEEP_FRACTION: f64 = 0.7;
pub const BASIC_MIN_TRAIN_ACC: f64 = 0.95;
pub const BASIC_MIN_VAL_ACC: f64 = 0.80;
pub const LOSS_REDUCTION_FACTOR: f64 = 0.5;
pub const IMBALANCE_MIN_RECALL_DROP: f64 = 0.2;

pub const MODEL_FILE: &str = "model.json";
pub const HISTORY_FILE: &str = "history.json";
pub const CURVES_FILE: &str = "curves.svg";
pub const DIAGRAM_FILE: &str = "diagram.svg";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Basic,
    NotDigit,
    Imbalance,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Basic => "basic",
            ExperimentKind::NotDigit => "not-digit",
            ExperimentKind::Imbalance => "imbalance",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "basic" => Ok(ExperimentKind::Basic),
            "not-digit" | "not_digit" => Ok(ExperimentKind::NotDigit),
            "imbalance" => Ok(ExperimentKind::Imbalance),
            other => Err(Error::Argument(format!(
                "unknown experiment {other:?} (expected basic, not-digit or imbalance)"
            ))),
        }
    }
}

/// Keys accepted in [`ExperimentSpec::overrides`].
pub const OVERRIDE_KEYS: &[&str] = &[
    "per_class",
    "flip_prob",
    "shift_max",
    "split_fraction",
    "hidden_units",
    "learning_rate",
    "epochs",
    "batch_size",
    "random_density",
    "imbalance_class",
    "imbalance_proportion",
    "imbalance_seeds",
    "test_per_class",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, seed: u64) -> Self {
        ExperimentSpec {
            kind,
            seed,
            overrides: BTreeMap::new(),
        }
    }

    pub fn with_override(mut self, key: &str, value: f64) -> Self {
        self.overrides.insert(key.to_owned(), value);
        self
    }

    /// Directory name for this run's artifacts: `<kind>-seed<seed>`.
    pub fn run_dir_name(&self) -> String {
        format!("{}-seed{}", self.kind, self.seed)
    }
}

/// Fully resolved parameters of a run, defaults merged with overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub per_class: usize,
    pub flip_prob: f64,
    pub shift_max: usize,
    pub split_fraction: f64,
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub random_density: f64,
    pub imbalance_class: usize,
    pub imbalance_proportion: f64,
    pub imbalance_seeds: usize,
    pub test_per_class: usize,
}

impl Default for Settings {
    fn default() -> Self {
        let hp = Hyperparams::default();
        let variants = VariantSpec::default();
        Settings {
            per_class: variants.per_class,
            flip_prob: variants.flip_prob,
            shift_max: variants.shift_max,
            split_fraction: crate::training::DEFAULT_SPLIT_FRACTION,
            hidden_units: crate::network::DEFAULT_HIDDEN_UNITS,
            learning_rate: hp.learning_rate,
            epochs: hp.epochs,
            batch_size: hp.batch_size,
            random_density: DEFAULT_RANDOM_DENSITY,
            imbalance_class: 7,
            imbalance_proportion: 0.1,
            imbalance_seeds: 5,
            test_per_class: 50,
        }
    }
}

fn as_count(key: &str, v: f64) -> Result<usize> {
    if v.fract() != 0.0 || v < 0.0 || !v.is_finite() {
        return Err(Error::config(
            format!("overrides.{key}"),
            format!("{v} is not a non-negative integer"),
        ));
    }
    Ok(v as usize)
}

impl Settings {
    pub fn resolve(overrides: &BTreeMap<String, f64>) -> Result<Self> {
        let mut s = Settings::default();
        for (key, &v) in overrides {
            match key.as_str() {
                "per_class" => s.per_class = as_count(key, v)?,
                "flip_prob" => s.flip_prob = v,
                "shift_max" => s.shift_max = as_count(key, v)?,
                "split_fraction" => s.split_fraction = v,
                "hidden_units" => s.hidden_units = as_count(key, v)?,
                "learning_rate" => s.learning_rate = v,
                "epochs" => s.epochs = as_count(key, v)?,
                "batch_size" => s.batch_size = as_count(key, v)?,
                "random_density" => s.random_density = v,
                "imbalance_class" => s.imbalance_class = as_count(key, v)?,
                "imbalance_proportion" => s.imbalance_proportion = v,
                "imbalance_seeds" => s.imbalance_seeds = as_count(key, v)?,
                "test_per_class" => s.test_per_class = as_count(key, v)?,
                other => {
                    return Err(Error::config(
                        format!("overrides.{other}"),
                        format!("unknown override; allowed: {}", OVERRIDE_KEYS.join(", ")),
                    ))
                }
            }
        }
        if s.imbalance_class >= 10 {
            return Err(Error::config(
                "overrides.imbalance_class",
                "must be a digit 0-9",
            ));
        }
        if s.imbalance_seeds == 0 {
            return Err(Error::config(
                "overrides.imbalance_seeds",
                "must be positive",
            ));
        }
        if s.test_per_class == 0 {
            return Err(Error::config(
                "overrides.test_per_class",
                "must be positive",
            ));
        }
        Ok(s)
    }

    fn variant_spec(&self, seed: u64) -> VariantSpec {
        VariantSpec {
            per_class: self.per_class,
            flip_prob: self.flip_prob,
            shift_max: self.shift_max,
            seed,
        }
    }

    fn network_config(&self, seed: u64) -> NetworkConfig {
        NetworkConfig::default()
            .with_hidden(&[self.hidden_units], Activation::Relu)
            .with_seed(seed)
    }

    fn hyperparams(&self, shuffle_seed: u64) -> Hyperparams {
        Hyperparams {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            shuffle_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub name: String,
    pub pixels: Vec<f64>,
    pub prediction: Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check {
            name: name.to_owned(),
            passed,
            detail,
        }
    }
}

/// File names of a run's artifacts, relative to the run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub directory: String,
    pub model: String,
    pub history: String,
    pub curves: String,
    pub diagram: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotDigitResults {
    pub random_probe_count: usize,
    pub random_probe_rejected: usize,
    /// Recall of the not-a-digit class on the validation split.
    pub validation_random_recall: f64,
    pub canonical_digits_correct: Vec<usize>,
    pub sweep_required_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceArm {
    pub train_counts: Vec<usize>,
    pub validation_eval: EvalReport,
    pub test_eval: EvalReport,
    pub target_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceSeedResult {
    pub seed: u64,
    pub initial_weights_identical: bool,
    pub balanced: ImbalanceArm,
    pub imbalanced: ImbalanceArm,
    pub delta_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceResults {
    pub target_class: usize,
    pub proportion: f64,
    pub test_per_class: usize,
    pub runs: Vec<ImbalanceSeedResult>,
    pub mean_recall_balanced: f64,
    pub mean_recall_imbalanced: f64,
    /// Mean over seeds of imbalanced minus balanced held-out recall for the target class.
    pub delta_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub spec: ExperimentSpec,
    pub settings: Settings,
    pub seeds: SeedPlan,
    pub dataset: DatasetSummary,
    pub train_eval: EvalReport,
    pub validation_eval: EvalReport,
    pub first_epoch: EpochRecord,
    pub final_epoch: EpochRecord,
    pub probes: Vec<Probe>,
    pub artifacts: Artifacts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub not_digit: Option<NotDigitResults>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imbalance: Option<ImbalanceResults>,
    pub checks: Vec<Check>,
}

impl ExperimentReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn probe(&self, name: &str) -> Option<&Probe> {
        self.probes.iter().find(|p| p.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::load("", format!("malformed JSON: {e}")))?;
        crate::network::model_io::parse_with_path(value)
    }
}

/// A finished run: the report plus every artifact's bytes.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub network: Network,
    pub history: TrainingHistory,
    pub model_json: String,
    pub history_json: String,
    pub curves_svg: String,
    pub diagram_svg: String,
}

impl ExperimentRun {
    /// Writes `<base>/<kind>-seed<seed>/{report,model,history}.json` and both figures.
    pub fn write_to(&self, base: &Path) -> Result<PathBuf> {
        let dir = base.join(&self.report.artifacts.directory);
        std::fs::create_dir_all(&dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let a = &self.report.artifacts;
        for (name, body) in [
            (REPORT_FILE, self.report.to_json()),
            (a.model.as_str(), self.model_json.clone()),
            (a.history.as_str(), self.history_json.clone()),
            (a.curves.as_str(), self.curves_svg.clone()),
            (a.diagram.as_str(), self.diagram_svg.clone()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })?;
        }
        Ok(dir)
    }
}

fn artifacts_for(spec: &ExperimentSpec) -> Artifacts {
    Artifacts {
        directory: spec.run_dir_name(),
        model: MODEL_FILE.into(),
        history: HISTORY_FILE.into(),
        curves: CURVES_FILE.into(),
        diagram: DIAGRAM_FILE.into(),
    }
}

fn probe(net: &Network, name: &str, image: &PixelGrid, classes: &[String]) -> Result<Probe> {
    Ok(Probe {
        name: name.to_owned(),
        pixels: image.pixels().to_vec(),
        prediction: predict(net, image, classes)?,
    })
}

fn loss_check(history: &TrainingHistory) -> Check {
    let first = history.epochs[0].train_loss;
    let last = history.last().expect("nonempty history").train_loss;
    Check::new(
        "train_loss_halved",
        last < LOSS_REDUCTION_FACTOR * first,
        format!(
            "final train_loss {last:.6} < {LOSS_REDUCTION_FACTOR} x epoch-1 train_loss {first:.6}"
        ),
    )
}

fn diagram_for(
    net: &Network,
    image: &PixelGrid,
    prediction: &Prediction,
    label: &str,
) -> Result<String> {
    let caption = prediction_caption(label, prediction);
    render_diagram(&net.forward(image), &DiagramSpec::default(), Some(&caption))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    spec: &ExperimentSpec,
    settings: Settings,
    seeds: SeedPlan,
    dataset: DatasetSummary,
    network: Network,
    split_data: &SplitDataset,
    history: TrainingHistory,
    probes: Vec<Probe>,
    diagram_svg: String,
    checks: Vec<Check>,
) -> Result<ExperimentRun> {
    let report = ExperimentReport {
        spec: spec.clone(),
        settings,
        seeds,
        dataset,
        train_eval: evaluate(&network, &split_data.train)?,
        validation_eval: evaluate(&network, &split_data.validation)?,
        first_epoch: history.epochs[0],
        final_epoch: *history.last().expect("nonempty history"),
        probes,
        artifacts: artifacts_for(spec),
        not_digit: None,
        imbalance: None,
        checks,
    };
    Ok(ExperimentRun {
        model_json: model_save(&network),
        history_json: history.to_json(),
        curves_svg: render_curves(&history)?,
        diagram_svg,
        report,
        network,
        history,
    })
}

fn expect_kind(spec: &ExperimentSpec, kind: ExperimentKind) -> Result<()> {
    if spec.kind != kind {
        return Err(Error::Argument(format!(
            "expected a {kind} spec, got {}",
            spec.kind
        )));
    }
    Ok(())
}

pub fn run(spec: &ExperimentSpec) -> Result<ExperimentRun> {
    match spec.kind {
        ExperimentKind::Basic => run_basic(spec),
        ExperimentKind::NotDigit => run_not_digit(spec),
        ExperimentKind::Imbalance => run_imbalance(spec),
    }
}

pub fn run_basic(spec: &ExperimentSpec) -> Result<ExperimentRun> {
    expect_kind(spec, ExperimentKind::Basic)?;
    let settings = Settings::resolve(&spec.overrides)?;
    let seeds = SeedPlan::from_seed(spec.seed);
    let ds = make_digit_dataset(&GlyphSet::standard(), &settings.variant_spec(spec.seed))?;
    let out = fit(
        &ds,
        settings.network_config(seeds.init),
        settings.split_fraction,
        seeds.split,
        &settings.hyperparams(seeds.shuffle),
        None,
    )?;

    let board = make_checkerboard(0)?;
    let board_probe = probe(&out.network, "checkerboard", &board, ds.classes())?;
    let digit_names: Vec<String> = (0..10).map(|d| d.to_string()).collect();
    let last = out.history.last().expect("nonempty history");
    let checks = vec![
        Check::new(
            "train_acc",
            last.train_acc >= BASIC_MIN_TRAIN_ACC,
            format!("train_acc {:.4} >= {BASIC_MIN_TRAIN_ACC}", last.train_acc),
        ),
        Check::new(
            "val_acc",
            last.val_acc >= BASIC_MIN_VAL_ACC,
            format!("val_acc {:.4} >= {BASIC_MIN_VAL_ACC}", last.val_acc),
        ),
        loss_check(&out.history),
        Check::new(
            "checkerboard_labeled_digit",
            digit_names.contains(&board_probe.prediction.class_name),
            format!(
                "checkerboard -> {:?} with p = {:.4}; a digits-only network must answer with a digit",
                board_probe.prediction.class_name,
                board_probe.prediction.probability()
            ),
        ),
    ];
    let diagram = diagram_for(
        &out.network,
        &board,
        &board_probe.prediction,
        "checkerboard",
    )?;
    finish(
        spec,
        settings,
        seeds,
        ds.summary(),
        out.network,
        &out.split,
        out.history,
        vec![board_probe],
        diagram,
        checks,
    )
}

pub fn run_not_digit(spec: &ExperimentSpec) -> Result<ExperimentRun> {
    expect_kind(spec, ExperimentKind::NotDigit)?;
    let settings = Settings::resolve(&spec.overrides)?;
    let seeds = SeedPlan::from_seed(spec.seed);
    let glyphs = GlyphSet::standard();
    let digits = make_digit_dataset(&glyphs, &settings.variant_spec(spec.seed))?;
    let ds = replace_class_with_random(
        &digits,
        0,
        NOT_A_DIGIT,
        settings.random_density,
        derive_seed(spec.seed, RANDOM_CLASS_STREAM),
    )?;
    let out = fit(
        &ds,
        settings.network_config(seeds.init),
        settings.split_fraction,
        seeds.split,
        &settings.hyperparams(seeds.shuffle),
        None,
    )?;
    let classes = ds.classes();

    let board = make_checkerboard(0)?;
    let mut probes = vec![
        probe(&out.network, "checkerboard", &board, classes)?,
        probe(
            &out.network,
            "checkerboard_phase1",
            &make_checkerboard(1)?,
            classes,
        )?,
    ];
    let randoms = make_random_images(
        RANDOM_PROBE_COUNT,
        settings.random_density,
        derive_seed(spec.seed, PROBE_STREAM),
    )?;
    let mut rejected = 0;
    for (i, img) in randoms.iter().enumerate() {
        let p = probe(&out.network, &format!("random_{i:02}"), img, classes)?;
        if p.prediction.class_index == 0 {
            rejected += 1;
        }
        probes.push(p);
    }
    let mut canonical_correct = Vec::new();
    for d in 1..10 {
        let p = probe(&out.network, &format!("glyph_{d}"), glyphs.get(d), classes)?;
        if p.prediction.class_index == d {
            canonical_correct.push(d);
        }
        probes.push(p);
    }

    let board_pred = &probes[0].prediction;
    let glyph0_count = ds
        .examples()
        .iter()
        .filter(|e| &e.image == glyphs.get(0))
        .count();
    let checks = vec![
        Check::new(
            "checkerboard_not_digit",
            board_pred.class_name == NOT_A_DIGIT,
            format!(
                "checkerboard -> {:?} with p = {:.4}; sweeps pass when at least {:.0}% of seeds answer {NOT_A_DIGIT:?}",
                board_pred.class_name,
                board_pred.probability(),
                100.0 * NOT_DIGIT_SWEEP_FRACTION
            ),
        ),
        Check::new(
            "canonical_digits_correct",
            canonical_correct.len() == 9,
            format!("{}/9 canonical glyphs 1-9 classified correctly", canonical_correct.len()),
        ),
        Check::new(
            "no_digit0_glyph_in_dataset",
            glyph0_count == 0,
            format!("{glyph0_count} examples equal the canonical 0 glyph"),
        ),
    ];

    let validation_random_recall =
        evaluate(&out.network, &out.split.validation)?.per_class_recall[0];
    let diagram = diagram_for(&out.network, &board, board_pred, "checkerboard")?;
    let mut run = finish(
        spec,
        settings,
        seeds,
        ds.summary(),
        out.network,
        &out.split,
        out.history,
        probes,
        diagram,
        checks,
    )?;
    run.report.not_digit = Some(NotDigitResults {
        random_probe_count: RANDOM_PROBE_COUNT,
        random_probe_rejected: rejected,
        validation_random_recall,
        canonical_digits_correct: canonical_correct,
        sweep_required_fraction: NOT_DIGIT_SWEEP_FRACTION,
    });
    Ok(run)
}

struct ArmOutcome {
    network: Network,
    history: TrainingHistory,
    split: SplitDataset,
    arm: ImbalanceArm,
}

fn train_arm(
    initial: &Network,
    split_data: SplitDataset,
    hp: &Hyperparams,
    test: &crate::datasets::Dataset,
    target: usize,
) -> Result<ArmOutcome> {
    let mut network = initial.clone();
    let history = train(&mut network, &split_data, hp, None)?;
    let test_eval = evaluate(&network, test)?;
    let arm = ImbalanceArm {
        train_counts: split_data.train.class_counts(),
        validation_eval: evaluate(&network, &split_data.validation)?,
        target_recall: test_eval.per_class_recall[target],
        test_eval,
    };
    Ok(ArmOutcome {
        network,
        history,
        split: split_data,
        arm,
    })
}

/// Runs seeds `spec.seed .. spec.seed + imbalance_seeds`. For each seed the
/// dataset is split once, then the training partition of one arm has the
/// target class subsampled; both arms start from the same weights and are
/// scored on a separately generated balanced test set.
pub fn run_imbalance(spec: &ExperimentSpec) -> Result<ExperimentRun> {
    expect_kind(spec, ExperimentKind::Imbalance)?;
    let settings = Settings::resolve(&spec.overrides)?;
    let glyphs = GlyphSet::standard();
    let target = settings.imbalance_class;
    let proportions = BTreeMap::from([(target, settings.imbalance_proportion)]);

    let mut results = Vec::new();
    let mut first: Option<(ArmOutcome, crate::datasets::Dataset, SeedPlan)> = None;
    for offset in 0..settings.imbalance_seeds as u64 {
        let seed = spec.seed.wrapping_add(offset);
        let seeds = SeedPlan::from_seed(seed);
        let ds = make_digit_dataset(&glyphs, &settings.variant_spec(seed))?;
        let test = make_digit_dataset(
            &glyphs,
            &VariantSpec {
                per_class: settings.test_per_class,
                ..settings.variant_spec(derive_seed(seed, TEST_SET_STREAM))
            },
        )?;
        let balanced_split = split(&ds, settings.split_fraction, seeds.split)?;
        let imbalanced_split = SplitDataset {
            train: rebalance_classes(
                &balanced_split.train,
                &proportions,
                derive_seed(seed, REBALANCE_STREAM),
            )?,
            validation: balanced_split.validation.clone(),
            fraction: balanced_split.fraction,
        };
        let init_a = Network::new(settings.network_config(seeds.init))?;
        let init_b = Network::new(settings.network_config(seeds.init))?;
        let identical = init_a
            .flat_parameters()
            .iter()
            .zip(init_b.flat_parameters())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        let hp = settings.hyperparams(seeds.shuffle);
        let balanced = train_arm(&init_a, balanced_split, &hp, &test, target)?;
        let imbalanced = train_arm(&init_b, imbalanced_split, &hp, &test, target)?;
        results.push(ImbalanceSeedResult {
            seed,
            initial_weights_identical: identical,
            delta_recall: imbalanced.arm.target_recall - balanced.arm.target_recall,
            balanced: balanced.arm,
            imbalanced: imbalanced.arm.clone(),
        });
        if first.is_none() {
            first = Some((imbalanced, ds, seeds));
        }
    }

    let n = results.len() as f64;
    let mean_bal = results
        .iter()
        .map(|r| r.balanced.target_recall)
        .sum::<f64>()
        / n;
    let mean_imb = results
        .iter()
        .map(|r| r.imbalanced.target_recall)
        .sum::<f64>()
        / n;
    let delta = results.iter().map(|r| r.delta_recall).sum::<f64>() / n;
    let paired = results.iter().all(|r| r.initial_weights_identical);
    let counts_match = results.iter().all(|r| {
        (0..10).all(|c| c == target || r.balanced.train_counts[c] == r.imbalanced.train_counts[c])
    });

    let (arm, ds, seeds) = first.expect("at least one seed");
    let classes = ds.classes().to_vec();
    let glyph = glyphs.get(target);
    let target_probe = probe(&arm.network, &format!("glyph_{target}"), glyph, &classes)?;
    let checks = vec![
        Check::new(
            "recall_drop",
            delta <= -IMBALANCE_MIN_RECALL_DROP,
            format!(
                "mean class-{target} recall {mean_imb:.4} (imbalanced) - {mean_bal:.4} (balanced) = {delta:.4} <= -{IMBALANCE_MIN_RECALL_DROP} over {} seeds",
                results.len()
            ),
        ),
        Check::new(
            "paired_initial_weights",
            paired,
            "both arms start from bit-identical weights for every seed".into(),
        ),
        Check::new(
            "non_target_counts_equal",
            counts_match,
            format!("training counts of classes other than {target} match across arms"),
        ),
    ];
    let diagram = diagram_for(
        &arm.network,
        glyph,
        &target_probe.prediction,
        &format!("glyph {target}"),
    )?;
    let mut run = finish(
        spec,
        settings.clone(),
        seeds,
        ds.summary(),
        arm.network,
        &arm.split,
        arm.history,
        vec![target_probe],
        diagram,
        checks,
    )?;
    run.report.imbalance = Some(ImbalanceResults {
        target_class: target,
        proportion: settings.imbalance_proportion,
        test_per_class: settings.test_per_class,
        runs: results,
        mean_recall_balanced: mean_bal,
        mean_recall_imbalanced: mean_imb,
        delta_recall: delta,
    });
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckTally {
    pub name: String,
    pub passed: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub kind: ExperimentKind,
    pub seeds: Vec<u64>,
    pub tallies: Vec<CheckTally>,
    pub passed: bool,
}

impl SweepSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep summary serializes")
    }

    pub fn tally(&self, name: &str) -> Option<&CheckTally> {
        self.tallies.iter().find(|t| t.name == name)
    }

    /// Builds tallies from finished reports. A not-digit sweep passes when
    /// the checkerboard is rejected in at least 70% of runs; other kinds
    /// need every check of every run.
    pub fn from_reports(kind: ExperimentKind, reports: &[&ExperimentReport]) -> Self {
        let mut tallies: Vec<CheckTally> = Vec::new();
        for r in reports {
            for c in &r.checks {
                let t = match tallies.iter_mut().find(|t| t.name == c.name) {
                    Some(t) => t,
                    None => {
                        tallies.push(CheckTally {
                            name: c.name.clone(),
                            passed: 0,
                            total: 0,
                        });
                        tallies.last_mut().unwrap()
                    }
                };
                t.total += 1;
                if c.passed {
                    t.passed += 1;
                }
            }
        }
        let passed = match kind {
            ExperimentKind::NotDigit => tallies
                .iter()
                .find(|t| t.name == "checkerboard_not_digit")
                .is_some_and(|t| t.passed as f64 >= NOT_DIGIT_SWEEP_FRACTION * t.total as f64),
            _ => !reports.is_empty() && reports.iter().all(|r| r.all_passed()),
        };
        SweepSummary {
            kind,
            seeds: reports.iter().map(|r| r.spec.seed).collect(),
            tallies,
            passed,
        }
    }
}

/// Runs `kind` once per seed with shared overrides.
pub fn run_sweep(
    kind: ExperimentKind,
    seeds: impl IntoIterator<Item = u64>,
    overrides: &BTreeMap<String, f64>,
) -> Result<(Vec<ExperimentRun>, SweepSummary)> {
    let runs = seeds
        .into_iter()
        .map(|seed| {
            run(&ExperimentSpec {
                kind,
                seed,
                overrides: overrides.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<&ExperimentReport> = runs.iter().map(|r| &r.report).collect();
    let summary = SweepSummary::from_reports(kind, &reports);
    Ok((runs, summary))
}
