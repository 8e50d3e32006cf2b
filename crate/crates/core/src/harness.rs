//! Experiment runner: sweeps, seeded trials, per-trial CSV rows and summaries.
//!
//! Every trial draws its own random context, objects, placement and resonator
//! initialisation from a stream derived from `(seed, sweep point, trial id)`.
//! Encodings and variants of one trial share that draw, so comparisons
//! between them are paired. Trials run in parallel; rows are emitted in
//! `(sweep point, variant, encoding, trial id)` order regardless.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::datasets::{gen_bars_shapes, load_idx, load_idx_labels, load_letter_assets, place_scene, Combine};
use crate::encoder::{
    canonicalize, encode_pixel, encode_sparse, Codebooks, EncoderContext, EncodingMode,
};
use crate::error::{Error, Result};
use crate::hd::{normalize, Codebook, ComplexVector};
use crate::multi::{factorize_multi, graded_accuracy_with, ExplainAway, MultiSceneTruth, Placement};
use crate::resonator::{run, FactorizationResult, StopKind, StoppingCriterion};
use crate::sparse::container::load_dictionary;
use crate::sparse::{infer_maps, Dictionary, FeatureMaps, Image, SparseConfig};
use crate::whitening::{apply_whitening_image, apply_whitening_maps, fit_whitening_images, fit_whitening_maps, Centering};

/// Environment variable that replaces the configured seed.
pub const SEED_ENV: &str = "RESONATOR_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    BarsScaling,
    MnistScaling,
    Letters,
    MultiObject,
    Confidence,
    Whitening,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::BarsScaling,
        ExperimentKind::MnistScaling,
        ExperimentKind::Letters,
        ExperimentKind::MultiObject,
        ExperimentKind::Confidence,
        ExperimentKind::Whitening,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::BarsScaling => "bars_scaling",
            ExperimentKind::MnistScaling => "mnist_scaling",
            ExperimentKind::Letters => "letters",
            ExperimentKind::MultiObject => "multi_object",
            ExperimentKind::Confidence => "confidence",
            ExperimentKind::Whitening => "whitening",
        }
    }

    /// Name of the swept quantity.
    pub fn sweep_axis(self) -> &'static str {
        match self {
            ExperimentKind::BarsScaling => "K",
            ExperimentKind::MultiObject => "m",
            _ => "L",
        }
    }

    fn variants(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::Confidence => &["fixed_point", "confidence"],
            ExperimentKind::Whitening => &["unwhitened", "whitened"],
            _ => &["-"],
        }
    }

    fn uses_bars(self) -> bool {
        matches!(self, ExperimentKind::BarsScaling | ExperimentKind::MultiObject)
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
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind `{s}`")))
    }
}

/// How the sparse code of a placed object is obtained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SceneMaps {
    /// Shift the canonical template's maps; equal to inference on the placed
    /// scene because the solver commutes with circular shifts.
    #[default]
    Shift,
    /// Run inference on every scene.
    Infer,
}

impl FromStr for SceneMaps {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shift" => Ok(SceneMaps::Shift),
            "infer" => Ok(SceneMaps::Infer),
            other => Err(Error::Config(format!("unknown scene_maps `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub dim: usize,
    /// Scene sides; the sweep for MNIST-style kinds, a single value for bars.
    pub sides: Vec<usize>,
    /// Codebook sizes (bars scaling) or object counts (multi-object).
    pub counts: Vec<usize>,
    /// Number of object classes where it is not swept.
    pub classes: usize,
    pub lambda: f64,
    pub trials: usize,
    pub seed: u64,
    pub stop: StopKind,
    pub epsilon: f64,
    pub max_iters: usize,
    pub conf_sparse: f64,
    pub conf_pixel: f64,
    pub encodings: Vec<EncodingMode>,
    pub output: Option<PathBuf>,
    pub bars_per_shape: usize,
    pub combine: Combine,
    pub explain_away: ExplainAway,
    /// Toroidal position tolerance for graded accuracy.
    pub tolerance: usize,
    pub dictionary: PathBuf,
    pub mnist_images: PathBuf,
    pub mnist_labels: PathBuf,
    pub letters_dir: PathBuf,
    /// Training-file indices of the digit templates; first of each class if unset.
    pub templates: Option<Vec<usize>>,
    pub whiten_epsilon: f64,
    pub whiten_center: Centering,
    pub sparse_iters: usize,
    pub sparse_tol: f64,
    pub scene_maps: SceneMaps,
    /// Adds a wall-time column, which makes the CSV non-reproducible.
    pub record_time: bool,
}

impl ExperimentConfig {
    /// Desk-scale defaults for `kind`.
    pub fn new(kind: ExperimentKind) -> Self {
        let mut cfg = Self {
            kind,
            dim: 2500,
            sides: vec![100],
            counts: vec![5, 15, 30, 50],
            classes: 10,
            lambda: 0.1,
            trials: 200,
            seed: 0,
            stop: StopKind::FixedPoint,
            epsilon: 0.01,
            max_iters: 100,
            conf_sparse: 0.6,
            conf_pixel: 0.3,
            encodings: EncodingMode::ALL.to_vec(),
            output: None,
            bars_per_shape: 2,
            combine: Combine::Max,
            explain_away: ExplainAway::Raw,
            tolerance: 0,
            dictionary: PathBuf::from("data/mnist_dict16.cscd"),
            mnist_images: PathBuf::from("data/mnist/train-images-idx3-ubyte"),
            mnist_labels: PathBuf::from("data/mnist/train-labels-idx1-ubyte"),
            letters_dir: PathBuf::from("data/letters"),
            templates: None,
            whiten_epsilon: crate::whitening::DEFAULT_EPSILON,
            whiten_center: Centering::Mean,
            sparse_iters: 200,
            sparse_tol: 1e-6,
            scene_maps: SceneMaps::Shift,
            record_time: false,
        };
        match kind {
            ExperimentKind::BarsScaling => {}
            ExperimentKind::MultiObject => cfg.counts = vec![1, 2, 3, 4, 5],
            ExperimentKind::MnistScaling | ExperimentKind::Letters | ExperimentKind::Confidence => {
                cfg.dim = 5000;
                cfg.sides = if kind == ExperimentKind::Confidence { vec![120] } else { vec![60, 120] };
                cfg.lambda = 0.2;
                cfg.epsilon = 0.05;
                cfg.max_iters = 20;
                if kind == ExperimentKind::Letters {
                    cfg.classes = 26;
                }
            }
            ExperimentKind::Whitening => {
                cfg.sides = vec![60];
                cfg.lambda = 0.2;
                cfg.epsilon = 0.05;
                cfg.max_iters = 20;
                cfg.trials = 300;
            }
        }
        cfg
    }

    /// Sets one field from its config-file key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "kind" => {
                let kind: ExperimentKind = value.parse()?;
                if kind != self.kind {
                    return Err(Error::Config("`kind` must come first and cannot change".into()));
                }
            }
            "dim" | "D" => self.dim = num(key, value)?,
            "sides" | "side" | "L" => self.sides = list(key, value)?,
            "counts" | "K" | "m" => self.counts = list(key, value)?,
            "classes" => self.classes = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "trials" => self.trials = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "stop" => self.stop = value.parse()?,
            "epsilon" => self.epsilon = num(key, value)?,
            "max_iters" => self.max_iters = num(key, value)?,
            "conf_sparse" => self.conf_sparse = num(key, value)?,
            "conf_pixel" => self.conf_pixel = num(key, value)?,
            "encodings" => {
                self.encodings = value
                    .split(',')
                    .map(|s| match s.trim() {
                        "both" => Ok(None),
                        s => s.parse::<EncodingMode>().map(Some),
                    })
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .try_fold(Vec::new(), |mut acc, m| {
                        match m {
                            None => acc.extend(EncodingMode::ALL),
                            Some(m) => acc.push(m),
                        }
                        Ok::<_, Error>(acc)
                    })?;
            }
            "output" => self.output = (!value.is_empty()).then(|| PathBuf::from(value)),
            "bars_per_shape" => self.bars_per_shape = num(key, value)?,
            "combine" => {
                self.combine = match value {
                    "max" => Combine::Max,
                    "sum_clip" => Combine::SumClip,
                    other => return Err(Error::Config(format!("unknown combine rule `{other}`"))),
                }
            }
            "explain_away" => self.explain_away = value.parse()?,
            "tolerance" => self.tolerance = num(key, value)?,
            "dictionary" => self.dictionary = PathBuf::from(value),
            "mnist_images" => self.mnist_images = PathBuf::from(value),
            "mnist_labels" => self.mnist_labels = PathBuf::from(value),
            "letters_dir" => self.letters_dir = PathBuf::from(value),
            "templates" => self.templates = Some(list(key, value)?),
            "whiten_epsilon" => self.whiten_epsilon = num(key, value)?,
            "whiten_center" => self.whiten_center = value.parse()?,
            "sparse_iters" => self.sparse_iters = num(key, value)?,
            "sparse_tol" => self.sparse_tol = num(key, value)?,
            "scene_maps" => self.scene_maps = value.parse()?,
            "record_time" => self.record_time = num(key, value)?,
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Parses flat `key = value` text; `#` starts a comment and `kind` is required.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let kind = pairs
            .iter()
            .find(|(k, _)| k == "kind")
            .ok_or_else(|| Error::Config("missing `kind`".into()))?
            .1
            .parse()?;
        let mut cfg = Self::new(kind);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Reads a config file and applies the seed override from the environment.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.apply_env()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV}=`{v}` is not an unsigned integer")))?;
        }
        Ok(())
    }

    /// Resolves relative data paths against `root`.
    pub fn with_data_root(mut self, root: &Path) -> Self {
        for p in [
            &mut self.dictionary,
            &mut self.mnist_images,
            &mut self.mnist_labels,
            &mut self.letters_dir,
        ] {
            if p.is_relative() {
                *p = root.join(&*p);
            }
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.dim == 0 {
            return bad("dim must be >= 1".into());
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.sides.is_empty() || self.sides.contains(&0) {
            return bad("sides must be a non-empty list of positive values".into());
        }
        if self.kind.uses_bars() {
            if self.sides.len() != 1 {
                return bad(format!("{} takes a single side", self.kind));
            }
            if self.counts.is_empty() || self.counts.contains(&0) {
                return bad("counts must be a non-empty list of positive values".into());
            }
            if !(1..=3).contains(&self.bars_per_shape) {
                return bad("bars_per_shape must be 1, 2 or 3".into());
            }
        }
        if self.kind == ExperimentKind::MultiObject && self.counts.iter().any(|&m| m > self.classes) {
            return bad("every object count must be <= classes".into());
        }
        if self.classes == 0 {
            return bad("classes must be >= 1".into());
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return bad(format!("lambda must be > 0, got {}", self.lambda));
        }
        if !(self.epsilon > 0.0) || self.max_iters == 0 {
            return bad("epsilon and max_iters must be positive".into());
        }
        for t in [self.conf_sparse, self.conf_pixel] {
            if !(0.0..=1.0).contains(&t) {
                return bad(format!("confidence threshold {t} is outside [0, 1]"));
            }
        }
        if self.encodings.is_empty() {
            return bad("at least one encoding is required".into());
        }
        for (i, m) in self.encodings.iter().enumerate() {
            if self.encodings[..i].contains(m) {
                return bad(format!("encoding `{m}` is listed twice"));
            }
        }
        if !(self.whiten_epsilon > 0.0) || self.sparse_iters == 0 || !(self.sparse_tol > 0.0) {
            return bad("whiten_epsilon, sparse_iters and sparse_tol must be positive".into());
        }
        Ok(())
    }

    fn sparse_config(&self) -> SparseConfig {
        SparseConfig {
            lambda: self.lambda,
            max_iters: self.sparse_iters,
            tol: self.sparse_tol,
            ..SparseConfig::default()
        }
    }

    fn criterion(&self, mode: EncodingMode, variant: &str) -> StoppingCriterion {
        let kind = match variant {
            "fixed_point" => StopKind::FixedPoint,
            "confidence" => StopKind::Confidence,
            _ => self.stop,
        };
        match kind {
            StopKind::FixedPoint => StoppingCriterion::fixed_point(self.epsilon, self.max_iters),
            StopKind::Confidence => StoppingCriterion::confidence(
                match mode {
                    EncodingMode::Sparse => self.conf_sparse,
                    EncodingMode::Pixel => self.conf_pixel,
                },
                self.max_iters,
            ),
            StopKind::MaxItersOnly => StoppingCriterion::max_iters_only(self.max_iters),
        }
    }

    fn sweep_values(&self) -> &[usize] {
        if self.kind.uses_bars() {
            &self.counts
        } else {
            &self.sides
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| num(key, v.trim())).collect()
}

/// One resonator run (or one multi-object extraction sequence).
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub sweep: &'static str,
    pub value: usize,
    pub variant: &'static str,
    pub encoding: EncodingMode,
    pub trial: usize,
    /// 1 or 0 for single objects, graded for multi-object scenes.
    pub correct: f64,
    pub iterations: usize,
    pub converged: bool,
    pub confidences: [f64; 3],
    pub wall_ms: f64,
}

impl TrialRecord {
    pub fn mean_confidence(&self) -> f64 {
        self.confidences.iter().sum::<f64>() / 3.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub sweep: &'static str,
    pub value: usize,
    pub variant: &'static str,
    pub encoding: EncodingMode,
    pub trials: usize,
    pub accuracy: f64,
    pub iter_median: usize,
    pub iter_p25: usize,
    pub iter_p75: usize,
    pub iter_mean: f64,
    pub convergence_rate: f64,
    /// Mean confidence of fully correct runs, if any.
    pub conf_correct: Option<f64>,
    pub conf_incorrect: Option<f64>,
}

/// Nearest-rank percentile of sorted data: the value at rank `ceil(p/100 * n)`.
pub fn nearest_rank(sorted: &[usize], p: f64) -> usize {
    let n = sorted.len();
    let rank = ((p / 100.0) * n as f64).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

/// One row per `(sweep point, variant, encoding)` in order of first appearance.
pub fn summarize(records: &[TrialRecord]) -> Result<Vec<SummaryRow>> {
    if records.is_empty() {
        return Err(Error::invalid("cannot summarize zero records"));
    }
    let mut order = Vec::new();
    let mut groups: HashMap<_, Vec<&TrialRecord>> = HashMap::new();
    for r in records {
        let key = (r.sweep, r.value, r.variant, r.encoding);
        groups
            .entry(key)
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    Ok(order
        .into_iter()
        .map(|key| {
            let rs = &groups[&key];
            let n = rs.len() as f64;
            let mut iters: Vec<usize> = rs.iter().map(|r| r.iterations).collect();
            iters.sort_unstable();
            let mean_of = |pick: &dyn Fn(&TrialRecord) -> bool| {
                let sel: Vec<f64> = rs.iter().filter(|r| pick(r)).map(|r| r.mean_confidence()).collect();
                (!sel.is_empty()).then(|| sel.iter().sum::<f64>() / sel.len() as f64)
            };
            SummaryRow {
                sweep: key.0,
                value: key.1,
                variant: key.2,
                encoding: key.3,
                trials: rs.len(),
                accuracy: rs.iter().map(|r| r.correct).sum::<f64>() / n,
                iter_median: nearest_rank(&iters, 50.0),
                iter_p25: nearest_rank(&iters, 25.0),
                iter_p75: nearest_rank(&iters, 75.0),
                iter_mean: iters.iter().sum::<usize>() as f64 / n,
                convergence_rate: rs.iter().filter(|r| r.converged).count() as f64 / n,
                conf_correct: mean_of(&|r| r.correct == 1.0),
                conf_incorrect: mean_of(&|r| r.correct < 1.0),
            }
        })
        .collect())
}

pub fn write_records_csv<W: Write>(out: &mut W, records: &[TrialRecord], with_time: bool) -> Result<()> {
    write!(
        out,
        "sweep,value,variant,encoding,trial,correct,iterations,converged,conf_h,conf_v,conf_o"
    )?;
    writeln!(out, "{}", if with_time { ",wall_ms" } else { "" })?;
    for r in records {
        write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.sweep,
            r.value,
            r.variant,
            r.encoding,
            r.trial,
            r.correct,
            r.iterations,
            r.converged as u8,
            r.confidences[0],
            r.confidences[1],
            r.confidences[2]
        )?;
        if with_time {
            write!(out, ",{:.3}", r.wall_ms)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(out: &mut W, rows: &[SummaryRow]) -> Result<()> {
    writeln!(
        out,
        "sweep,value,variant,encoding,trials,accuracy,iter_median,iter_p25,iter_p75,iter_mean,convergence_rate,conf_correct,conf_incorrect"
    )?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.sweep,
            r.value,
            r.variant,
            r.encoding,
            r.trials,
            r.accuracy,
            r.iter_median,
            r.iter_p25,
            r.iter_p75,
            r.iter_mean,
            r.convergence_rate,
            opt(r.conf_correct),
            opt(r.conf_incorrect)
        )?;
    }
    Ok(())
}

/// `results/run.csv` -> `results/run.summary.csv`
pub fn summary_path(output: &Path) -> PathBuf {
    output.with_extension("summary.csv")
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentOutput {
    /// The summary row for one group, if present.
    pub fn row(&self, value: usize, variant: &str, encoding: EncodingMode) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.value == value && r.variant == variant && r.encoding == encoding)
    }
}

/// Runs every sweep point and writes the CSVs when an output path is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let source = ObjectSource::load(cfg)?;
    let variants = cfg.kind.variants();
    let mut records = Vec::new();
    for (vi, &value) in cfg.sweep_values().iter().enumerate() {
        let prepared = source.prepare(cfg, value)?;
        let per_trial: Vec<Vec<Outcome>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = stream_rng(cfg.seed, ((vi as u64) << 32) | t as u64);
                run_trial(cfg, &prepared, value, &mut rng)
            })
            .collect::<Result<_>>()?;
        for (ai, &variant) in variants.iter().enumerate() {
            for (mi, &encoding) in cfg.encodings.iter().enumerate() {
                for (t, outcomes) in per_trial.iter().enumerate() {
                    let o = &outcomes[ai * cfg.encodings.len() + mi];
                    records.push(TrialRecord {
                        sweep: cfg.kind.sweep_axis(),
                        value,
                        variant,
                        encoding,
                        trial: t,
                        correct: o.correct,
                        iterations: o.iterations,
                        converged: o.converged,
                        confidences: o.confidences,
                        wall_ms: o.wall_ms,
                    });
                }
            }
        }
    }
    let summary = summarize(&records)?;
    if let Some(path) = &cfg.output {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &records, cfg.record_time)?;
        fs::write(path, buf)?;
        let mut buf = Vec::new();
        write_summary_csv(&mut buf, &summary)?;
        fs::write(summary_path(path), buf)?;
    }
    Ok(ExperimentOutput { records, summary })
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Outcome {
    correct: f64,
    iterations: usize,
    converged: bool,
    confidences: [f64; 3],
    wall_ms: f64,
}

impl Outcome {
    fn single(res: &FactorizationResult, truth: (usize, usize, usize), started: Instant) -> Self {
        Self {
            correct: if res.triple() == truth { 1.0 } else { 0.0 },
            iterations: res.iterations,
            converged: res.converged,
            confidences: res.final_confidences,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        }
    }
}

/// Labelled images for the MNIST-style kinds.
enum ObjectSource {
    Bars,
    Images {
        images: Vec<Image>,
        dict: Option<Dictionary>,
    },
}

/// Canonical templates at one scene side.
enum Prepared {
    Bars { side: usize },
    Images(ImageSet),
}

struct ImageSet {
    side: usize,
    canonical: Vec<Image>,
    maps: Option<Vec<FeatureMaps>>,
    dict: Option<Dictionary>,
    /// Whitened canonical images and maps, for the whitening experiment.
    white_images: Option<Vec<Image>>,
    white_maps: Option<Vec<FeatureMaps>>,
}

impl ObjectSource {
    fn load(cfg: &ExperimentConfig) -> Result<Self> {
        let images = match cfg.kind {
            ExperimentKind::BarsScaling | ExperimentKind::MultiObject => return Ok(ObjectSource::Bars),
            ExperimentKind::Letters => {
                let letters = load_letter_assets(&cfg.letters_dir)?;
                letters.into_iter().take(cfg.classes).map(|(_, img)| img).collect()
            }
            _ => {
                let all = load_idx(&cfg.mnist_images)?;
                let idx = match &cfg.templates {
                    Some(idx) => idx.clone(),
                    None => first_of_each_class(&load_idx_labels(&cfg.mnist_labels)?, cfg.classes)?,
                };
                idx.iter()
                    .map(|&i| {
                        all.get(i).cloned().ok_or_else(|| {
                            Error::Config(format!("template index {i} is beyond the {} images", all.len()))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        let dict = if cfg.encodings.contains(&EncodingMode::Sparse) {
            Some(load_dictionary(&cfg.dictionary)?)
        } else {
            None
        };
        Ok(ObjectSource::Images { images, dict })
    }

    fn prepare(&self, cfg: &ExperimentConfig, value: usize) -> Result<Prepared> {
        let (images, dict) = match self {
            ObjectSource::Bars => return Ok(Prepared::Bars { side: cfg.sides[0] }),
            ObjectSource::Images { images, dict } => (images, dict),
        };
        let side = value;
        let canonical = images
            .iter()
            .map(|img| canonicalize(img, side))
            .collect::<Result<Vec<_>>>()?;
        let maps = match dict {
            Some(d) => {
                let sc = cfg.sparse_config();
                Some(
                    canonical
                        .par_iter()
                        .map(|img| infer_maps(img, d, &sc))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            None => None,
        };
        let (mut white_images, mut white_maps) = (None, None);
        if cfg.kind == ExperimentKind::Whitening {
            if cfg.encodings.contains(&EncodingMode::Pixel) {
                let wt = fit_whitening_images(&canonical, cfg.whiten_epsilon, cfg.whiten_center)?;
                white_images = Some(
                    canonical
                        .iter()
                        .map(|img| apply_whitening_image(&wt, img))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            if let Some(maps) = &maps {
                let wt = fit_whitening_maps(maps, cfg.whiten_epsilon, cfg.whiten_center)?;
                white_maps = Some(
                    maps.iter()
                        .map(|m| apply_whitening_maps(&wt, m))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
        }
        Ok(Prepared::Images(ImageSet {
            side,
            canonical,
            maps,
            dict: dict.clone(),
            white_images,
            white_maps,
        }))
    }
}

/// Training-file index of the first image of each class `0..classes`.
pub fn first_of_each_class(labels: &[u8], classes: usize) -> Result<Vec<usize>> {
    (0..classes)
        .map(|c| {
            labels
                .iter()
                .position(|&l| l as usize == c)
                .ok_or_else(|| Error::Config(format!("no image of class {c} in the label file")))
        })
        .collect()
}

/// All outcomes of one trial, variant-major then encoding.
fn run_trial(cfg: &ExperimentConfig, prepared: &Prepared, value: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Outcome>> {
    match prepared {
        Prepared::Bars { side } if cfg.kind == ExperimentKind::MultiObject => multi_trial(cfg, *side, value, rng),
        Prepared::Bars { side } => bars_trial(cfg, *side, value, rng),
        Prepared::Images(set) => image_trial(cfg, set, rng),
    }
}

fn embed_maps(maps: &FeatureMaps, side: usize) -> Result<FeatureMaps> {
    FeatureMaps::new(maps.maps().iter().map(|m| m.embed(side)).collect::<Result<_>>()?)
}

fn position_codebooks(ctx: &EncoderContext, o: Vec<ComplexVector>) -> Result<Codebooks> {
    Codebooks::new(
        Codebook::from_fpe(ctx.h_base()),
        Codebook::from_fpe(ctx.v_base()),
        Codebook::indexed(o.iter().map(normalize).collect())?,
    )
}

fn bars_trial(cfg: &ExperimentConfig, side: usize, k_count: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Outcome>> {
    let ctx = EncoderContext::random(cfg.dim, side, 2, rng)?;
    let shapes = gen_bars_shapes(k_count, cfg.bars_per_shape, rng)?;
    let k = rng.gen_range(0..k_count);
    let x = rng.gen_range(0..side);
    let y = rng.gen_range(0..side);
    let init_seed: u64 = rng.gen();
    cfg.encodings
        .iter()
        .map(|&mode| {
            let started = Instant::now();
            let vectors = shapes
                .iter()
                .map(|s| match mode {
                    EncodingMode::Sparse => encode_sparse(&embed_maps(&s.maps, side)?, &ctx),
                    EncodingMode::Pixel => encode_pixel(&s.grid.embed(side)?, &ctx),
                })
                .collect::<Result<Vec<_>>>()?;
            let z = ctx.shift_vector(&vectors[k], x as i64, y as i64)?;
            let cbs = position_codebooks(&ctx, vectors)?;
            let res = run(&z, &cbs, &cfg.criterion(mode, "-"), &mut ChaCha8Rng::seed_from_u64(init_seed))?;
            Ok(Outcome::single(&res, (k, x, y), started))
        })
        .collect()
}

/// `m` distinct shapes from a codebook of `classes`, explained away one by one.
/// Iterations are summed over extractions; confidences are averaged.
fn multi_trial(cfg: &ExperimentConfig, side: usize, m: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Outcome>> {
    let ctx = EncoderContext::random(cfg.dim, side, 2, rng)?;
    let shapes = gen_bars_shapes(cfg.classes, cfg.bars_per_shape, rng)?;
    let chosen: Vec<(usize, i64, i64)> = sample(rng, cfg.classes, m)
        .into_iter()
        .map(|k| (k, rng.gen_range(0..side) as i64, rng.gen_range(0..side) as i64))
        .collect();
    let init_seed: u64 = rng.gen();
    let objects: Vec<(usize, &Image, i64, i64)> =
        chosen.iter().map(|&(k, x, y)| (k, &shapes[k].grid, x, y)).collect();
    let scene = place_scene(&objects, side, cfg.combine)?;
    cfg.encodings
        .iter()
        .map(|&mode| {
            let started = Instant::now();
            let (vectors, z) = match mode {
                EncodingMode::Sparse => {
                    let maps = shapes
                        .iter()
                        .map(|s| embed_maps(&s.maps, side))
                        .collect::<Result<Vec<_>>>()?;
                    let mut scene_maps = FeatureMaps::zeros(2, side);
                    for &(k, x, y) in &chosen {
                        scene_maps.add_scaled(1.0, &maps[k].shift(x, y));
                    }
                    let v = maps.iter().map(|m| encode_sparse(m, &ctx)).collect::<Result<Vec<_>>>()?;
                    (v, encode_sparse(&scene_maps, &ctx)?)
                }
                EncodingMode::Pixel => {
                    let v = shapes
                        .iter()
                        .map(|s| encode_pixel(&s.grid.embed(side)?, &ctx))
                        .collect::<Result<Vec<_>>>()?;
                    (v, encode_pixel(&scene.image, &ctx)?)
                }
            };
            let cbs = position_codebooks(&ctx, vectors)?;
            let results = factorize_multi(
                &z,
                &cbs,
                m,
                &cfg.criterion(mode, "-"),
                cfg.explain_away,
                &mut ChaCha8Rng::seed_from_u64(init_seed),
            )?;
            let found: Vec<Placement> = results.iter().map(Placement::from).collect();
            let mut confidences = [0.0; 3];
            for r in &results {
                for (c, v) in confidences.iter_mut().zip(r.final_confidences) {
                    *c += v / m as f64;
                }
            }
            Ok(Outcome {
                correct: graded_accuracy_with(&found, &scene.truth, cfg.tolerance, side),
                iterations: results.iter().map(|r| r.iterations).sum(),
                converged: results.iter().all(|r| r.converged),
                confidences,
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
            })
        })
        .collect()
}

fn image_trial(cfg: &ExperimentConfig, set: &ImageSet, rng: &mut ChaCha8Rng) -> Result<Vec<Outcome>> {
    let side = set.side;
    let n_filters = set.dict.as_ref().map_or(1, |d| d.count());
    let ctx = EncoderContext::random(cfg.dim, side, n_filters, rng)?;
    let k = rng.gen_range(0..set.canonical.len());
    let x = rng.gen_range(0..side);
    let y = rng.gen_range(0..side);
    let init_seed: u64 = rng.gen();
    let truth = MultiSceneTruth::new(vec![Placement::new(k, x, y)])?;
    let mut out = Vec::new();
    for &variant in cfg.kind.variants() {
        for &mode in &cfg.encodings {
            let started = Instant::now();
            let whitened = variant == "whitened";
            let (templates, z) = match mode {
                EncodingMode::Sparse => {
                    let maps = set.maps.as_ref().expect("sparse maps are prepared when requested");
                    let raw_k = encode_sparse(&maps[k], &ctx)?;
                    let z = match cfg.scene_maps {
                        SceneMaps::Shift => ctx.shift_vector(&raw_k, x as i64, y as i64)?,
                        SceneMaps::Infer => {
                            let dict = set.dict.as_ref().expect("dictionary is loaded for sparse runs");
                            let scene = set.canonical[k].shift(x as i64, y as i64);
                            encode_sparse(&infer_maps(&scene, dict, &cfg.sparse_config())?, &ctx)?
                        }
                    };
                    let source = if whitened { set.white_maps.as_ref().expect("whitened maps") } else { maps };
                    let t = source.iter().map(|m| encode_sparse(m, &ctx)).collect::<Result<Vec<_>>>()?;
                    (t, z)
                }
                EncodingMode::Pixel => {
                    let placed = set.canonical[k].shift(x as i64, y as i64);
                    let z = encode_pixel(&placed, &ctx)?;
                    let source = if whitened {
                        set.white_images.as_ref().expect("whitened images")
                    } else {
                        &set.canonical
                    };
                    let t = source.iter().map(|m| encode_pixel(m, &ctx)).collect::<Result<Vec<_>>>()?;
                    (t, z)
                }
            };
            for (i, t) in templates.iter().enumerate() {
                if t.is_zero() {
                    return Err(Error::DegenerateTemplate(format!("class {i}")));
                }
            }
            let cbs = position_codebooks(&ctx, templates)?;
            let res = run(
                &z,
                &cbs,
                &cfg.criterion(mode, variant),
                &mut ChaCha8Rng::seed_from_u64(init_seed),
            )?;
            let mut o = Outcome::single(&res, (k, x, y), started);
            o.correct = graded_accuracy_with(&[Placement::from(&res)], &truth, cfg.tolerance, side);
            out.push(o);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(value: usize, correct: f64, iterations: usize, conf: f64) -> TrialRecord {
        TrialRecord {
            sweep: "K",
            value,
            variant: "-",
            encoding: EncodingMode::Sparse,
            trial: 0,
            correct,
            iterations,
            converged: true,
            confidences: [conf; 3],
            wall_ms: 0.0,
        }
    }

    #[test]
    fn nearest_rank_quartiles() {
        let recs: Vec<_> = (1..=5).map(|i| rec(5, 1.0, i, 0.5)).collect();
        let s = &summarize(&recs).unwrap()[0];
        assert_eq!((s.iter_median, s.iter_p25, s.iter_p75), (3, 2, 4));
        assert_eq!(s.iter_mean, 3.0);
        assert_eq!(s.accuracy, 1.0);
        assert_eq!(nearest_rank(&[7], 25.0), 7);
        assert_eq!(nearest_rank(&[1, 2, 3, 4], 50.0), 2);
    }

    #[test]
    fn confidence_means_split_by_correctness() {
        let recs = vec![rec(5, 1.0, 3, 0.9), rec(5, 0.0, 3, 0.2), rec(5, 1.0, 3, 0.7), rec(5, 0.5, 3, 0.4)];
        let s = &summarize(&recs).unwrap()[0];
        assert!((s.conf_correct.unwrap() - 0.8).abs() < 1e-12);
        assert!((s.conf_incorrect.unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(s.accuracy, 0.625);
        let s = &summarize(&recs[..1]).unwrap()[0];
        assert_eq!(s.conf_incorrect, None);
    }

    #[test]
    fn single_trial_summary_equals_the_trial() {
        let r = rec(7, 0.0, 11, 0.25);
        let s = &summarize(std::slice::from_ref(&r)).unwrap()[0];
        assert_eq!((s.accuracy, s.iter_median, s.iter_p25, s.iter_p75), (0.0, 11, 11, 11));
        assert_eq!(s.conf_incorrect, Some(0.25));
        assert_eq!(s.convergence_rate, 1.0);
    }

    #[test]
    fn groups_keep_first_appearance_order() {
        let mut recs = vec![rec(10, 1.0, 1, 0.5), rec(5, 1.0, 1, 0.5), rec(10, 0.0, 1, 0.5)];
        recs[1].encoding = EncodingMode::Pixel;
        let s = summarize(&recs).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].value, s[0].trials), (10, 2));
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn config_text_round_trip() {
        let cfg = ExperimentConfig::parse(
            "# bars\nkind = bars_scaling\nK = 5, 10\ntrials=50\nencodings = both\nseed = 3 # trailing\n",
        )
        .unwrap();
        assert_eq!(cfg.kind, ExperimentKind::BarsScaling);
        assert_eq!(cfg.counts, vec![5, 10]);
        assert_eq!(cfg.trials, 50);
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.encodings, EncodingMode::ALL.to_vec());
        cfg.validate().unwrap();
    }

    #[test]
    fn config_errors() {
        for bad in [
            "K = 5",
            "kind = nope",
            "kind = letters\nfoo = 1",
            "kind = letters\ntrials = x",
            "kind = letters\nkind = bars_scaling",
            "kind = letters\nno equals sign",
        ] {
            assert!(matches!(ExperimentConfig::parse(bad), Err(Error::Config(_))), "{bad}");
        }
        for bad in [
            "trials = 0",
            "dim = 0",
            "lambda = 0",
            "lambda = -1",
            "sides = 50, 60",
            "K = 0",
            "encodings = sparse, sparse",
            "conf_sparse = 1.5",
            "bars_per_shape = 4",
            "epsilon = 0",
        ] {
            let cfg = ExperimentConfig::parse(&format!("kind = bars_scaling\n{bad}")).unwrap();
            assert!(matches!(cfg.validate(), Err(Error::Config(_))), "{bad}");
        }
        let cfg = ExperimentConfig::parse("kind = multi_object\nclasses = 3\nm = 4").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn class_templates_default_to_first_occurrence() {
        assert_eq!(first_of_each_class(&[3, 0, 1, 0, 2, 3], 4).unwrap(), vec![1, 2, 4, 0]);
        assert!(first_of_each_class(&[0, 0], 2).is_err());
    }

    #[test]
    fn bars_rows_are_accounted_and_replayable() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::BarsScaling);
        cfg.dim = 500;
        cfg.sides = vec![16];
        cfg.counts = vec![3, 4];
        cfg.trials = 6;
        cfg.seed = 11;
        let a = run_experiment(&cfg).unwrap();
        assert_eq!(a.records.len(), 2 * 2 * 6);
        assert_eq!(a.summary.len(), 4);
        let b = run_experiment(&cfg).unwrap();
        let csv = |o: &ExperimentOutput| {
            let mut buf = Vec::new();
            write_records_csv(&mut buf, &o.records, false).unwrap();
            buf
        };
        assert_eq!(csv(&a), csv(&b));
        assert!(a.records.iter().all(|r| (0.0..=1.0).contains(&r.correct)));
        let trials: Vec<_> = a.records[..6].iter().map(|r| r.trial).collect();
        assert_eq!(trials, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn multi_object_rows() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::MultiObject);
        cfg.dim = 1000;
        cfg.sides = vec![20];
        cfg.counts = vec![1, 2];
        cfg.classes = 5;
        cfg.trials = 4;
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.records.len(), 2 * 2 * 4);
        assert!(out.records.iter().all(|r| (0.0..=1.0).contains(&r.correct)));
    }

    #[test]
    fn seed_changes_the_draws() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::BarsScaling);
        cfg.dim = 300;
        cfg.sides = vec![12];
        cfg.counts = vec![8];
        cfg.trials = 8;
        cfg.max_iters = 3;
        let a = run_experiment(&cfg).unwrap();
        cfg.seed = 1;
        let b = run_experiment(&cfg).unwrap();
        assert_ne!(a.records, b.records);
    }
}
