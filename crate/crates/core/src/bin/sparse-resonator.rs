use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparse_resonator::datasets::{
    bars_dictionary, encode_pgm, gen_bars_shapes, load_idx, parse_pgm, place_scene, write_truth_csv, Combine,
};
use sparse_resonator::encoder::{
    build_codebooks, canonicalize, encode_pixel, encode_sparse, make_object_template, EncoderContext, EncodingMode,
};
use sparse_resonator::harness::{run_experiment, summary_path, ExperimentConfig, ExperimentKind, SummaryRow};
use sparse_resonator::hd::container::{load_vectors, save_vectors};
use sparse_resonator::resonator::{run_with, write_trace_csv, RunOptions, StopKind, StoppingCriterion, UpdateOrder};
use sparse_resonator::sparse::container::{load_dictionary, save_dictionary, save_maps};
use sparse_resonator::sparse::{infer_maps, learn_dictionary, Dictionary, FeatureMaps, Image, LearnConfig, SparseConfig};
use sparse_resonator::{Error, Result};

#[derive(Parser)]
#[command(name = "sparse-resonator", version, about = "Sparse-coded scene vectors and resonator factorization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Random bars shapes and scenes with ground-truth codes.
    GenBars(GenBars),
    /// Learn a convolutional dictionary from IDX images.
    TrainDict(TrainDict),
    /// Encode one image, optionally shifted, into a scene vector.
    Encode(Encode),
    /// Factorize a scene vector against a set of templates.
    Factorize(Factorize),
    /// Run an experiment sweep and write its CSVs.
    Experiment(Experiment),
}

#[derive(Args)]
struct GenBars {
    /// Number of distinct shapes.
    #[arg(long, default_value_t = 10)]
    shapes: usize,
    #[arg(long, default_value_t = 2)]
    bars_per_shape: usize,
    #[arg(long, default_value_t = 10)]
    scenes: usize,
    /// Objects per scene.
    #[arg(long, default_value_t = 1)]
    objects: usize,
    #[arg(long, default_value_t = 100)]
    side: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    sum_clip: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainDict {
    #[arg(long)]
    images: PathBuf,
    /// Use the first N images.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 16)]
    filters: usize,
    #[arg(long, default_value_t = 12)]
    patch: usize,
    #[arg(long, default_value_t = 0.2)]
    lambda: f64,
    #[arg(long, default_value_t = 50)]
    rounds: usize,
    /// Inference iterations per round.
    #[arg(long, default_value_t = 50)]
    inner_iters: usize,
    /// Filter gradient steps per round.
    #[arg(long, default_value_t = 20)]
    filter_steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Shared by `encode` and `factorize` so both rebuild the same random context.
#[derive(Args, Clone)]
struct EncodingArgs {
    #[arg(long, default_value = "sparse")]
    mode: EncodingMode,
    #[arg(long, default_value_t = 5000)]
    dim: usize,
    #[arg(long)]
    side: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSCD dictionary; required in sparse mode.
    #[arg(long)]
    dictionary: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    lambda: f64,
}

#[derive(Args)]
struct Encode {
    #[command(flatten)]
    enc: EncodingArgs,
    /// A PGM file, or an IDX image file together with --index.
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    index: Option<usize>,
    #[arg(long, default_value_t = 0)]
    x: i64,
    #[arg(long, default_value_t = 0)]
    y: i64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Factorize {
    #[command(flatten)]
    enc: EncodingArgs,
    #[arg(long)]
    scene: PathBuf,
    /// Template PGM files, or an IDX file together with --indices.
    #[arg(long, value_delimiter = ',', required = true)]
    templates: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    indices: Vec<usize>,
    #[arg(long, default_value = "fixed_point")]
    stop: StopKind,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.6)]
    threshold: f64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value = "hvo")]
    order: UpdateOrder,
    /// Seed of the random initial state.
    #[arg(long, default_value_t = 0)]
    init_seed: u64,
    /// Per-iteration confidences and distances as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct Experiment {
    /// Flat key=value config file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    kind: Option<ExperimentKind>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    sides: Option<String>,
    #[arg(long)]
    counts: Option<String>,
    #[arg(long)]
    classes: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    stop: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    encodings: Option<String>,
    #[arg(long)]
    output: Option<String>,
    /// Any other config key, as key=value; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    extra: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenBars(a) => gen_bars(a),
        Command::TrainDict(a) => train_dict(a),
        Command::Encode(a) => encode(a),
        Command::Factorize(a) => factorize(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::InvalidArgument(_) => 2,
                Error::NumericFailure(_) => 3,
                _ => 1,
            })
        }
    }
}

fn gen_bars(a: GenBars) -> Result<()> {
    fs::create_dir_all(&a.out)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let shapes = gen_bars_shapes(a.shapes, a.bars_per_shape, &mut rng)?;
    save_dictionary(&a.out.join("dictionary.cscd"), &bars_dictionary())?;
    for (k, s) in shapes.iter().enumerate() {
        save_maps(&a.out.join(format!("shape_{k:03}.csca")), &s.maps)?;
        fs::write(a.out.join(format!("shape_{k:03}.pgm")), encode_pgm(&s.grid))?;
    }
    if a.objects > shapes.len() {
        return Err(Error::Config("--objects exceeds --shapes".into()));
    }
    let combine = if a.sum_clip { Combine::SumClip } else { Combine::Max };
    let mut truths = Vec::with_capacity(a.scenes);
    for i in 0..a.scenes {
        let picks = rand::seq::index::sample(&mut rng, shapes.len(), a.objects).into_vec();
        let placed: Vec<(usize, &Image, i64, i64)> = picks
            .iter()
            .map(|&k| (k, &shapes[k].grid, rng.gen_range(0..a.side) as i64, rng.gen_range(0..a.side) as i64))
            .collect();
        let scene = place_scene(&placed, a.side, combine)?;
        let mut maps = FeatureMaps::zeros(2, a.side);
        for &(k, _, x, y) in &placed {
            let embedded = FeatureMaps::new(
                shapes[k].maps.maps().iter().map(|m| m.embed(a.side)).collect::<Result<_>>()?,
            )?;
            maps.add_scaled(1.0, &embedded.shift(x, y));
        }
        save_maps(&a.out.join(format!("scene_{i:04}.csca")), &maps)?;
        fs::write(a.out.join(format!("scene_{i:04}.pgm")), encode_pgm(&scene.image))?;
        truths.push(scene.truth);
    }
    let mut csv = Vec::new();
    write_truth_csv(&mut csv, &truths.iter().enumerate().collect::<Vec<_>>())?;
    fs::write(a.out.join("truth.csv"), csv)?;
    println!("wrote {} shapes and {} scenes to {}", shapes.len(), a.scenes, a.out.display());
    Ok(())
}

fn train_dict(a: TrainDict) -> Result<()> {
    let mut images = load_idx(&a.images)?;
    images.truncate(a.count);
    let cfg = LearnConfig {
        rounds: a.rounds,
        sparse: SparseConfig {
            lambda: a.lambda,
            max_iters: a.inner_iters,
            ..SparseConfig::default()
        },
        filter_steps: a.filter_steps,
        seed: a.seed,
    };
    let learned = learn_dictionary(&images, a.filters, a.patch, &cfg)?;
    save_dictionary(&a.out, &learned.dict)?;
    for (r, obj) in learned.objective_history.iter().enumerate() {
        println!("round {r}: objective {obj:.6}");
    }
    println!("wrote {} filters of {}x{} to {}", a.filters, a.patch, a.patch, a.out.display());
    Ok(())
}

fn load_object(path: &Path, index: Option<usize>) -> Result<Image> {
    match index {
        Some(i) => load_idx(path)?
            .into_iter()
            .nth(i)
            .ok_or_else(|| Error::Config(format!("index {i} is beyond {}", path.display()))),
        None => parse_pgm(&fs::read(path)?, path),
    }
}

impl EncodingArgs {
    fn dictionary(&self) -> Result<Option<Dictionary>> {
        match (self.mode, &self.dictionary) {
            (EncodingMode::Pixel, _) => Ok(None),
            (EncodingMode::Sparse, Some(p)) => load_dictionary(p).map(Some),
            (EncodingMode::Sparse, None) => Err(Error::Config("sparse mode needs --dictionary".into())),
        }
    }

    fn context(&self, dict: Option<&Dictionary>) -> Result<EncoderContext> {
        let n = dict.map_or(1, Dictionary::count);
        EncoderContext::random(self.dim, self.side, n, &mut ChaCha8Rng::seed_from_u64(self.seed))
    }

    fn sparse_config(&self) -> SparseConfig {
        SparseConfig::with_lambda(self.lambda)
    }
}

fn encode(a: Encode) -> Result<()> {
    let dict = a.enc.dictionary()?;
    let ctx = a.enc.context(dict.as_ref())?;
    let object = load_object(&a.image, a.index)?;
    let scene = object.embed(a.enc.side)?.shift(a.x, a.y);
    let z = match &dict {
        Some(d) => encode_sparse(&infer_maps(&scene, d, &a.enc.sparse_config())?, &ctx)?,
        None => encode_pixel(&scene, &ctx)?,
    };
    save_vectors(&a.out, &[z])?;
    println!("wrote a {}-dimensional {} scene vector to {}", a.enc.dim, a.enc.mode, a.out.display());
    Ok(())
}

fn factorize(a: Factorize) -> Result<()> {
    let dict = a.enc.dictionary()?;
    let ctx = a.enc.context(dict.as_ref())?;
    let objects: Vec<(String, Image)> = if a.indices.is_empty() {
        a.templates
            .iter()
            .map(|p| Ok((p.display().to_string(), load_object(p, None)?)))
            .collect::<Result<_>>()?
    } else {
        let [file] = a.templates.as_slice() else {
            return Err(Error::Config("--indices takes exactly one IDX file in --templates".into()));
        };
        let all = load_idx(file)?;
        a.indices
            .iter()
            .map(|&i| {
                all.get(i)
                    .cloned()
                    .map(|img| (format!("#{i}"), img))
                    .ok_or_else(|| Error::Config(format!("index {i} is beyond {}", file.display())))
            })
            .collect::<Result<_>>()?
    };
    let bars = bars_dictionary();
    let templates = objects
        .iter()
        .map(|(id, img)| {
            let canonical = canonicalize(img, a.enc.side)?;
            make_object_template(
                id.clone(),
                &canonical,
                dict.as_ref().unwrap_or(&bars),
                &ctx,
                &a.enc.sparse_config(),
                a.enc.mode,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let cbs = build_codebooks(&ctx, &templates)?;
    let z = load_vectors(&a.scene)?
        .into_iter()
        .next()
        .ok_or_else(|| Error::Config("scene file holds no vector".into()))?;
    let criterion = match a.stop {
        StopKind::FixedPoint => StoppingCriterion::fixed_point(a.epsilon, a.max_iters),
        StopKind::Confidence => StoppingCriterion::confidence(a.threshold, a.max_iters),
        StopKind::MaxItersOnly => StoppingCriterion::max_iters_only(a.max_iters),
    };
    let opts = RunOptions {
        order: a.order,
        trace: a.trace.is_some(),
    };
    let res = run_with(&z, &cbs, &criterion, &opts, &mut ChaCha8Rng::seed_from_u64(a.init_seed))?;
    if let Some(path) = &a.trace {
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &res.trace)?;
        fs::write(path, buf)?;
    }
    let [ch, cv, co] = res.final_confidences;
    println!(
        "object={} ({}) x={} y={} iterations={} converged={} confidence_h={ch:.4} confidence_v={cv:.4} confidence_o={co:.4}",
        res.k_index, templates[res.k_index].id, res.x_index, res.y_index, res.iterations, res.converged
    );
    Ok(())
}

fn experiment(a: Experiment) -> Result<()> {
    let mut cfg = match (&a.config, a.kind) {
        (Some(path), kind) => {
            let cfg = ExperimentConfig::load(path)?;
            if kind.is_some_and(|k| k != cfg.kind) {
                return Err(Error::Config("--kind disagrees with the config file".into()));
            }
            cfg
        }
        (None, Some(kind)) => {
            let mut cfg = ExperimentConfig::new(kind);
            cfg.apply_env()?;
            cfg
        }
        (None, None) => return Err(Error::Config("give --config or --kind".into())),
    };
    let flags = [
        ("dim", &a.dim),
        ("sides", &a.sides),
        ("counts", &a.counts),
        ("classes", &a.classes),
        ("lambda", &a.lambda),
        ("trials", &a.trials),
        ("seed", &a.seed),
        ("stop", &a.stop),
        ("epsilon", &a.epsilon),
        ("max_iters", &a.max_iters),
        ("encodings", &a.encodings),
        ("output", &a.output),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    for kv in &a.extra {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v)?;
    }
    let out = run_experiment(&cfg)?;
    print_summary(&out.summary);
    if let Some(path) = &cfg.output {
        println!("wrote {} and {}", path.display(), summary_path(path).display());
    }
    Ok(())
}

fn print_summary(rows: &[SummaryRow]) {
    println!(
        "{:>6} {:>12} {:>7} {:>7} {:>9} {:>7} {:>11} {:>8} {:>9} {:>9}",
        "sweep", "variant", "enc", "trials", "accuracy", "median", "p25-p75", "mean", "conf_ok", "conf_bad"
    );
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
    for r in rows {
        println!(
            "{:>6} {:>12} {:>7} {:>7} {:>9.3} {:>7} {:>11} {:>8.2} {:>9} {:>9}",
            format!("{}={}", r.sweep, r.value),
            r.variant,
            r.encoding.as_str(),
            r.trials,
            r.accuracy,
            r.iter_median,
            format!("{}-{}", r.iter_p25, r.iter_p75),
            r.iter_mean,
            opt(r.conf_correct),
            opt(r.conf_incorrect)
        );
    }
}
