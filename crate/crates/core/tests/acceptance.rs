//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparse_resonator::datasets::{all_bars_shapes, bars_dictionary, gen_bars_shapes, load_idx, load_idx_labels};
use sparse_resonator::encoder::{canonicalize, compose_query, Codebooks, EncodingMode};
use sparse_resonator::harness::{first_of_each_class, run_experiment, ExperimentConfig, ExperimentKind, ExperimentOutput};
use sparse_resonator::hd::{bind, conjugate, fpe_base, fpe_power, normalize, random_phasor, Codebook, ComplexVector, Hypervector, C64};
use sparse_resonator::resonator::{run, StoppingCriterion};
use sparse_resonator::sparse::container::load_dictionary;
use sparse_resonator::sparse::{
    infer_maps, learn_dictionary, reconstruct, Dictionary, FeatureMaps, Grid, LearnConfig, SparseCoder, SparseConfig,
};
use sparse_resonator::whitening::{apply_whitening, fit_whitening, WhiteningTransform};

const SEED: u64 = 2024;
/// Accuracy tolerance for orderings stated with a two-point slack.
const TWO_POINTS: f64 = 0.02;

/// Workspace root; default data paths are relative to it.
fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn experiment(kind: ExperimentKind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(kind).with_data_root(&repo_root());
    cfg.seed = SEED;
    cfg
}

struct Check {
    ok: bool,
    details: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Self { ok: true, details: Vec::new() }
    }

    fn expect(&mut self, cond: bool, what: String) {
        if !cond {
            self.ok = false;
        }
        self.details.push(format!("{}{what}", if cond { "" } else { "NOT " }));
    }

    fn within(&mut self, elapsed: Duration, budget: Duration) {
        self.expect(
            elapsed <= budget,
            format!("runtime {:.1}s <= {}s", elapsed.as_secs_f64(), budget.as_secs()),
        );
    }
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn acc(out: &ExperimentOutput, value: usize, variant: &str, mode: EncodingMode) -> f64 {
    out.row(value, variant, mode).expect("summary row").accuracy
}

fn median(out: &ExperimentOutput, value: usize, variant: &str, mode: EncodingMode) -> usize {
    out.row(value, variant, mode).expect("summary row").iter_median
}

fn algebra() -> Check {
    let started = Instant::now();
    let mut c = Check::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut unbind, mut period, mut additive, mut idem) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let a = random_phasor(10_000, &mut rng).unwrap();
        let b = random_phasor(10_000, &mut rng).unwrap();
        let back = bind(&bind(&a, &b).unwrap(), &conjugate(&b)).unwrap();
        unbind = unbind.max(max_diff(back.components(), a.components()));

        let l = rng.gen_range(2..200u32);
        let base = fpe_base(10_000, l, &mut rng).unwrap();
        let (x, y) = (rng.gen_range(-500..500i64), rng.gen_range(-500..500i64));
        period = period.max(max_diff(
            fpe_power(&base, x + l as i64).components(),
            fpe_power(&base, x).components(),
        ));
        let sum = bind(&fpe_power(&base, x), &fpe_power(&base, y)).unwrap();
        additive = additive.max(max_diff(sum.components(), fpe_power(&base, x + y).components()));

        let v = ComplexVector::new(
            (0..10_000)
                .map(|_| C64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)))
                .collect(),
        );
        let once = normalize(&v);
        idem = idem.max(max_diff(normalize(&once).components(), once.components()));
    }
    c.expect(unbind <= 1e-9, format!("unbinding error {unbind:.1e} <= 1e-9"));
    c.expect(period <= 1e-9, format!("periodicity error {period:.1e} <= 1e-9"));
    c.expect(additive <= 1e-9, format!("additivity error {additive:.1e} <= 1e-9"));
    c.expect(idem <= 1e-9, format!("normalize idempotence error {idem:.1e} <= 1e-9"));
    c.within(started.elapsed(), Duration::from_secs(10));
    c
}

/// Resonator answers against an exhaustive scan of all `L * L * K` triples.
fn oracle() -> Check {
    let started = Instant::now();
    let mut c = Check::new();
    let (dim, side, k_count, trials) = (2500, 20usize, 10usize, 500);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let crit = StoppingCriterion::fixed_point(0.01, 100);
    let mut agree = 0;
    for _ in 0..trials {
        let h = fpe_base(dim, side as u32, &mut rng).unwrap();
        let v = fpe_base(dim, side as u32, &mut rng).unwrap();
        let o: Vec<_> = (0..k_count).map(|_| random_phasor(dim, &mut rng).unwrap()).collect();
        let cbs = Codebooks::new(Codebook::from_fpe(&h), Codebook::from_fpe(&v), Codebook::indexed(o).unwrap()).unwrap();
        let (x, y, k) = (rng.gen_range(0..side), rng.gen_range(0..side), rng.gen_range(0..k_count));
        let z = compose_query(x, y, k, &cbs).unwrap();

        let mut best = (f64::MIN, (0, 0, 0));
        for kk in 0..k_count {
            let ok = cbs.o.entry(kk).unwrap().components();
            let u: Vec<C64> = z.components().iter().zip(ok).map(|(a, b)| a * b.conj()).collect();
            for xx in 0..side {
                let hx = cbs.h.entry(xx).unwrap().components();
                for yy in 0..side {
                    let vy = cbs.v.entry(yy).unwrap().components();
                    let s: C64 = u.iter().zip(hx).zip(vy).map(|((a, p), q)| a * (p * q).conj()).sum();
                    if s.norm() > best.0 {
                        best = (s.norm(), (kk, xx, yy));
                    }
                }
            }
        }
        let res = run(&z, &cbs, &crit, &mut rng).unwrap();
        if res.triple() == best.1 {
            agree += 1;
        }
    }
    let rate = agree as f64 / trials as f64;
    c.expect(rate >= 0.99, format!("agreement {agree}/{trials} = {rate:.3} >= 0.99"));
    c.within(started.elapsed(), Duration::from_secs(300));
    c
}

fn bars_scaling() -> Check {
    let started = Instant::now();
    let mut c = Check::new();
    let cfg = experiment(ExperimentKind::BarsScaling);
    let out = run_experiment(&cfg).unwrap();
    for &k in &cfg.counts {
        let (s, p) = (acc(&out, k, "-", EncodingMode::Sparse), acc(&out, k, "-", EncodingMode::Pixel));
        let (ms, mp) = (median(&out, k, "-", EncodingMode::Sparse), median(&out, k, "-", EncodingMode::Pixel));
        if k == *cfg.counts.last().unwrap() {
            c.expect(s > p, format!("K={k}: sparse {s:.3} > pixel {p:.3}"));
        } else {
            c.expect(s >= p - TWO_POINTS, format!("K={k}: sparse {s:.3} >= pixel {p:.3} - 0.02"));
        }
        c.expect(ms <= mp, format!("K={k}: median iters sparse {ms} <= pixel {mp}"));
    }
    c.within(started.elapsed(), Duration::from_secs(30 * 60));
    c
}

fn multi_object() -> Check {
    let started = Instant::now();
    let mut c = Check::new();
    let cfg = experiment(ExperimentKind::MultiObject);
    let out = run_experiment(&cfg).unwrap();
    for mode in EncodingMode::ALL {
        let accs: Vec<f64> = cfg.counts.iter().map(|&m| acc(&out, m, "-", mode)).collect();
        let text = accs.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>().join(", ");
        c.expect(accs.windows(2).all(|w| w[1] <= w[0]), format!("{mode} non-increasing in m: [{text}]"));
    }
    for &m in &cfg.counts {
        let (s, p) = (acc(&out, m, "-", EncodingMode::Sparse), acc(&out, m, "-", EncodingMode::Pixel));
        c.expect(s >= p - TWO_POINTS, format!("m={m}: sparse {s:.3} >= pixel {p:.3} - 0.02"));
    }
    c.within(started.elapsed(), Duration::from_secs(30 * 60));
    c
}

fn mnist_scaling() -> Check {
    let started = Instant::now();
    let mut c = Check::new();
    let cfg = experiment(ExperimentKind::MnistScaling);
    let out = run_experiment(&cfg).unwrap();
    for &l in &cfg.sides {
        let (s, p) = (acc(&out, l, "-", EncodingMode::Sparse), acc(&out, l, "-", EncodingMode::Pixel));
        c.details.push(format!("L={l}: sparse {s:.3}, pixel {p:.3}"));
    }
    let (s, p) = (acc(&out, 120, "-", EncodingMode::Sparse), acc(&out, 120, "-", EncodingMode::Pixel));
    c.expect(s >= 0.9, format!("L=120: sparse {s:.3} >= 0.9"));
    c.expect(s > p, format!("L=120: sparse {s:.3} > pixel {p:.3}"));
    c.within(started.elapsed(), Duration::from_secs(45 * 60));
    c
}

fn confidence_stopping() -> Check {
    let started = Instant::now();
    let mut c = Check::new();
    let cfg = experiment(ExperimentKind::Confidence);
    let l = cfg.sides[0];
    let out = run_experiment(&cfg).unwrap();
    for mode in EncodingMode::ALL {
        let fp = out.row(l, "fixed_point", mode).unwrap();
        let cs = out.row(l, "confidence", mode).unwrap();
        c.expect(
            cs.iter_median < fp.iter_median,
            format!("{mode}: median iters confidence {} < fixed-point {}", cs.iter_median, fp.iter_median),
        );
        c.expect(
            (cs.accuracy - fp.accuracy).abs() <= TWO_POINTS,
            format!("{mode}: |accuracy {:.3} - {:.3}| <= 0.02", cs.accuracy, fp.accuracy),
        );
        match (fp.conf_correct, fp.conf_incorrect) {
            (Some(a), Some(b)) => c.expect(a > b, format!("{mode}: mean confidence correct {a:.3} > incorrect {b:.3}")),
            (a, b) => c.expect(false, format!("{mode}: both outcome classes present (correct {a:?}, incorrect {b:?})")),
        }
    }
    c.within(started.elapsed(), Duration::from_secs(45 * 60));
    c
}

/// Filter correlation with the best of `learned`, allowing sign flips and shifts within the patch.
fn best_match(truth: &Grid, learned: &[Grid]) -> f64 {
    let p = truth.side() as i64;
    let mut best: f64 = 0.0;
    for g in learned {
        for dy in -(p - 1)..p {
            for dx in -(p - 1)..p {
                let mut s = 0.0;
                for y in 0..p {
                    for x in 0..p {
                        let (gx, gy) = (x - dx, y - dy);
                        if (0..p).contains(&gx) && (0..p).contains(&gy) {
                            s += truth.get(x as usize, y as usize) * g.get(gx as usize, gy as usize);
                        }
                    }
                }
                best = best.max(s.abs() / (truth.norm() * g.norm()));
            }
        }
    }
    best
}

fn sparse_coding() -> Check {
    let started = Instant::now();
    let mut c = Check::new();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let dict = Dictionary::random(4, 5, &mut rng).unwrap();
    let ista = SparseConfig {
        lambda: 0.1,
        max_iters: 100,
        tol: 1e-12,
        momentum: false,
        ..SparseConfig::default()
    };
    let coder = SparseCoder::new(&dict, 20, ista).unwrap();
    let mut worst_rise = f64::MIN;
    for _ in 0..100 {
        let img = Grid::from_fn(20, |_, _| rng.gen_range(0.0..1.0));
        let inf = coder.infer(&img, None).unwrap();
        for w in inf.trace.windows(2) {
            worst_rise = worst_rise.max(w[1] - w[0]);
        }
    }
    c.expect(worst_rise <= 1e-10, format!("ISTA objective rise {worst_rise:.1e} <= 1e-10 on 100 inputs"));

    let bars = bars_dictionary();
    let cfg = SparseConfig {
        tol: 1e-10,
        max_iters: 500,
        ..SparseConfig::with_lambda(0.1)
    };
    let mut shapes = all_bars_shapes(1).unwrap();
    shapes.extend(all_bars_shapes(2).unwrap());
    shapes.extend(gen_bars_shapes(40, 3, &mut rng).unwrap());
    let mut recovered = 0;
    for s in &shapes {
        let (dx, dy) = (rng.gen_range(0..24), rng.gen_range(0..24));
        let img = s.grid.embed(24).unwrap().shift(dx, dy);
        let maps = infer_maps(&img, &bars, &cfg).unwrap();
        let active = maps.active(1e-3 * maps.max_abs());
        let all = s.bars.iter().all(|b| {
            let (x, y) = ((b.x as i64 + dx) as usize % 24, (b.y as i64 + dy) as usize % 24);
            active.iter().any(|&(j, ax, ay, _)| j == b.orientation.filter() && ax == x && ay == y)
        });
        recovered += all as usize;
    }
    c.expect(
        recovered == shapes.len(),
        format!("bars support recovered in {recovered}/{} shapes", shapes.len()),
    );

    let images: Vec<Grid> = (0..30)
        .map(|_| {
            let mut maps = FeatureMaps::zeros(2, 24);
            for j in 0..2 {
                for _ in 0..3 {
                    let (x, y) = (rng.gen_range(0..24), rng.gen_range(0..24));
                    maps.maps_mut()[j].set(x, y, rng.gen_range(1.0..2.0));
                }
            }
            reconstruct(&bars, &maps).unwrap()
        })
        .collect();
    let learn = LearnConfig {
        rounds: 40,
        sparse: SparseConfig {
            max_iters: 100,
            ..SparseConfig::with_lambda(0.1)
        },
        filter_steps: 20,
        seed: SEED,
    };
    let learned = learn_dictionary(&images, 2, 8, &learn).unwrap();
    for (j, f) in bars.filters().iter().enumerate() {
        let r = best_match(f, learned.dict.filters());
        c.expect(r >= 0.95, format!("synthetic filter {j} correlation {r:.4} >= 0.95"));
    }
    c.within(started.elapsed(), Duration::from_secs(10 * 60));
    c
}

/// `U^T C U` for the whitened templates, which should be the identity.
fn span_covariance(wt: &WhiteningTransform, templates: &[Vec<f64>]) -> DMatrix<f64> {
    let white: Vec<Vec<f64>> = templates.iter().map(|t| apply_whitening(wt, t).unwrap()).collect();
    let n = white.len();
    let d = white[0].len();
    let mean: Vec<f64> = (0..d).map(|i| white.iter().map(|w| w[i]).sum::<f64>() / n as f64).collect();
    let centered = DMatrix::from_fn(d, n, |i, j| white[j][i] - mean[i]);
    let p = wt.basis().transpose() * centered;
    &p * p.transpose() / (n as f64 - 1.0)
}

fn whitening() -> Check {
    let started = Instant::now();
    let mut c = Check::new();
    let cfg = experiment(ExperimentKind::Whitening);
    let l = cfg.sides[0];
    let images = load_idx(&cfg.mnist_images).unwrap();
    let labels = load_idx_labels(&cfg.mnist_labels).unwrap();
    let canonical: Vec<Grid> = first_of_each_class(&labels, 10)
        .unwrap()
        .into_iter()
        .map(|i| canonicalize(&images[i], l).unwrap())
        .collect();
    let dict = load_dictionary(&cfg.dictionary).unwrap();
    let sc = SparseConfig::with_lambda(cfg.lambda);
    let pixel: Vec<Vec<f64>> = canonical.iter().map(|g| g.data().to_vec()).collect();
    let maps: Vec<Vec<f64>> = canonical.iter().map(|g| infer_maps(g, &dict, &sc).unwrap().flatten()).collect();
    for (name, data) in [("pixel", &pixel), ("sparse", &maps)] {
        let wt = fit_whitening(data, cfg.whiten_epsilon).unwrap();
        let cov = span_covariance(&wt, data);
        let err = (&cov - DMatrix::identity(cov.nrows(), cov.ncols())).abs().max();
        c.expect(err <= 1e-6, format!("{name}: span covariance error {err:.1e} <= 1e-6 (rank {})", wt.rank()));
    }
    let out = run_experiment(&cfg).unwrap();
    for mode in EncodingMode::ALL {
        let (w, u) = (acc(&out, l, "whitened", mode), acc(&out, l, "unwhitened", mode));
        c.expect(w >= u, format!("{mode}: whitened {w:.3} >= unwhitened {u:.3}"));
    }
    c.within(started.elapsed(), Duration::from_secs(45 * 60));
    c
}

fn letters() -> Check {
    let started = Instant::now();
    let mut c = Check::new();
    let cfg = experiment(ExperimentKind::Letters);
    let out = run_experiment(&cfg).unwrap();
    for &l in &cfg.sides {
        let (s, p) = (acc(&out, l, "-", EncodingMode::Sparse), acc(&out, l, "-", EncodingMode::Pixel));
        let (ms, mp) = (median(&out, l, "-", EncodingMode::Sparse), median(&out, l, "-", EncodingMode::Pixel));
        c.expect(s > p, format!("L={l}: sparse {s:.3} > pixel {p:.3}"));
        c.expect(ms < mp, format!("L={l}: median iters sparse {ms} < pixel {mp}"));
    }
    c.within(started.elapsed(), Duration::from_secs(45 * 60));
    c
}

type Criterion = (&'static str, fn() -> Check);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1 algebraic invariants", algebra),
        ("2 oracle equivalence", oracle),
        ("3 bars scaling", bars_scaling),
        ("4 multi-object", multi_object),
        ("5 MNIST scaling", mnist_scaling),
        ("6 confidence stopping", confidence_stopping),
        ("7 sparse coding", sparse_coding),
        ("8 whitening", whitening),
        ("9 letters", letters),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let started = Instant::now();
        let (ok, details) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(c) => (c.ok, c.details.join("; ")),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        failed += !ok as usize;
        println!(
            "[{}] criterion {name} ({:.1}s): {details}",
            if ok { "PASS" } else { "FAIL" },
            started.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
