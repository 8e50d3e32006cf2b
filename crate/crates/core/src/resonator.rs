//! Resonator network factorization of `z = h(x) . v(y) . o(k)`.
//!
//! Each factor estimate is refreshed by unbinding the other two from `z`,
//! projecting through its codebook (`M M^H`), and normalizing to phasors.
//! One iteration is one full sweep over the three factors.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;

use crate::encoder::Codebooks;
use crate::error::{check_dims, Error, Result};
use crate::hd::{normalize, random_phasor, Codebook, ComplexVector, Hypervector, PhasorVector, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Factor {
    H,
    V,
    O,
}

impl Factor {
    fn index(self) -> usize {
        match self {
            Factor::H => 0,
            Factor::V => 1,
            Factor::O => 2,
        }
    }
}

/// The order in which factors are refreshed within one sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UpdateOrder([Factor; 3]);

impl UpdateOrder {
    pub fn new(order: [Factor; 3]) -> Result<Self> {
        let mut seen = [false; 3];
        for f in order {
            if std::mem::replace(&mut seen[f.index()], true) {
                return Err(Error::invalid(format!("update order repeats {f:?}")));
            }
        }
        Ok(Self(order))
    }

    pub fn factors(&self) -> [Factor; 3] {
        self.0
    }
}

impl Default for UpdateOrder {
    fn default() -> Self {
        Self([Factor::H, Factor::V, Factor::O])
    }
}

impl FromStr for UpdateOrder {
    type Err = Error;

    /// Parses a permutation of `hvo`, e.g. `"ohv"`.
    fn from_str(s: &str) -> Result<Self> {
        let fs: Vec<Factor> = s
            .trim()
            .chars()
            .map(|c| match c.to_ascii_lowercase() {
                'h' => Ok(Factor::H),
                'v' => Ok(Factor::V),
                'o' => Ok(Factor::O),
                other => Err(Error::Config(format!("unknown factor `{other}` in update order"))),
            })
            .collect::<Result<_>>()?;
        let arr: [Factor; 3] = fs
            .try_into()
            .map_err(|_| Error::Config(format!("update order `{s}` must name three factors")))?;
        Self::new(arr).map_err(|e| Error::Config(e.to_string()))
    }
}

impl fmt::Display for UpdateOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for x in self.0 {
            f.write_str(match x {
                Factor::H => "h",
                Factor::V => "v",
                Factor::O => "o",
            })?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResonatorState {
    pub est_h: PhasorVector,
    pub est_v: PhasorVector,
    pub est_o: PhasorVector,
    pub iteration: usize,
    /// Confidences `[h, v, o]` after each recorded iteration.
    pub confidence_trace: Vec<[f64; 3]>,
}

impl ResonatorState {
    pub fn new(est_h: PhasorVector, est_v: PhasorVector, est_o: PhasorVector) -> Result<Self> {
        check_dims(est_h.dim(), est_v.dim())?;
        check_dims(est_h.dim(), est_o.dim())?;
        Ok(Self {
            est_h,
            est_v,
            est_o,
            iteration: 0,
            confidence_trace: Vec::new(),
        })
    }

    /// Random phasor estimates drawn in the order h, v, o.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self> {
        let h = random_phasor(dim, rng)?;
        let v = random_phasor(dim, rng)?;
        let o = random_phasor(dim, rng)?;
        Self::new(h, v, o)
    }

    pub fn dim(&self) -> usize {
        self.est_h.dim()
    }

    fn get(&self, f: Factor) -> &PhasorVector {
        match f {
            Factor::H => &self.est_h,
            Factor::V => &self.est_v,
            Factor::O => &self.est_o,
        }
    }

    fn set(&mut self, f: Factor, v: PhasorVector) {
        match f {
            Factor::H => self.est_h = v,
            Factor::V => self.est_v = v,
            Factor::O => self.est_o = v,
        }
    }

    /// `h . v . o`
    pub fn estimate(&self) -> ComplexVector {
        let c = self
            .est_h
            .components()
            .iter()
            .zip(self.est_v.components())
            .zip(self.est_o.components())
            .map(|((a, b), c)| a * b * c)
            .collect();
        ComplexVector::new(c)
    }

    /// Confidences of the current estimates against their codebooks.
    pub fn confidences(&self, cbs: &Codebooks) -> Result<[f64; 3]> {
        Ok([
            confidence(&cbs.h, &self.est_h)?,
            confidence(&cbs.v, &self.est_v)?,
            confidence(&cbs.o, &self.est_o)?,
        ])
    }
}

fn codebook(cbs: &Codebooks, f: Factor) -> &Codebook {
    match f {
        Factor::H => &cbs.h,
        Factor::V => &cbs.v,
        Factor::O => &cbs.o,
    }
}

/// One sweep in the default `H, V, O` order.
pub fn resonator_step(state: &ResonatorState, z: &ComplexVector, cbs: &Codebooks) -> Result<ResonatorState> {
    resonator_step_ordered(state, z, cbs, UpdateOrder::default())
}

/// One sweep; every update sees the freshest values of the other two factors.
pub fn resonator_step_ordered(
    state: &ResonatorState,
    z: &ComplexVector,
    cbs: &Codebooks,
    order: UpdateOrder,
) -> Result<ResonatorState> {
    check_dims(cbs.dim(), z.dim())?;
    check_dims(cbs.dim(), state.dim())?;
    let mut next = state.clone();
    let mut u = vec![C64::new(0.0, 0.0); z.dim()];
    for f in order.factors() {
        let (a, b) = match f {
            Factor::H => (&next.est_v, &next.est_o),
            Factor::V => (&next.est_h, &next.est_o),
            Factor::O => (&next.est_h, &next.est_v),
        };
        for (((ud, zd), ad), bd) in u
            .iter_mut()
            .zip(z.components())
            .zip(a.components())
            .zip(b.components())
        {
            *ud = zd * (ad * bd).conj();
        }
        let p = codebook(cbs, f).project(&u);
        next.set(f, normalize(&ComplexVector::new(p)));
    }
    next.iteration += 1;
    Ok(next)
}

/// `(a - b) / a` over the two largest `|similarity|` values.
///
/// A single-entry codebook gives 1 whenever `a > 0`; `a = 0` gives 0.
pub fn confidence<V: Hypervector + ?Sized>(cb: &Codebook, estimate: &V) -> Result<f64> {
    let mags = cb.similarity_magnitudes(estimate)?;
    let (mut a, mut b) = (0.0f64, 0.0f64);
    for m in mags {
        if m > a {
            b = a;
            a = m;
        } else if m > b {
            b = m;
        }
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    Ok(((a - b) / a).clamp(0.0, 1.0))
}

/// Mean absolute componentwise difference over the three concatenated estimates.
pub fn fixed_point_distance(prev: &ResonatorState, cur: &ResonatorState) -> f64 {
    let d = prev.dim();
    let sum: f64 = [Factor::H, Factor::V, Factor::O]
        .iter()
        .map(|&f| {
            prev.get(f)
                .components()
                .iter()
                .zip(cur.get(f).components())
                .map(|(a, b)| (a - b).norm())
                .sum::<f64>()
        })
        .sum();
    sum / (3 * d) as f64
}

/// Index of the largest `|similarity|` and its value; ties go to the lowest index.
pub fn decode<V: Hypervector + ?Sized>(estimate: &V, cb: &Codebook) -> Result<(usize, f64)> {
    if cb.is_empty() {
        return Err(Error::invalid("cannot decode against an empty codebook"));
    }
    let mags = cb.similarity_magnitudes(estimate)?;
    let mut best = (0, mags[0]);
    for (i, &m) in mags.iter().enumerate().skip(1) {
        if m > best.1 {
            best = (i, m);
        }
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopKind {
    FixedPoint,
    Confidence,
    MaxItersOnly,
}

impl FromStr for StopKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fixed_point" => Ok(StopKind::FixedPoint),
            "confidence" => Ok(StopKind::Confidence),
            "max_iters_only" | "max_iters" => Ok(StopKind::MaxItersOnly),
            other => Err(Error::Config(format!("unknown stopping criterion `{other}`"))),
        }
    }
}

impl fmt::Display for StopKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopKind::FixedPoint => "fixed_point",
            StopKind::Confidence => "confidence",
            StopKind::MaxItersOnly => "max_iters_only",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StoppingCriterion {
    pub kind: StopKind,
    pub epsilon: f64,
    pub conf_threshold: f64,
    pub max_iters: usize,
}

impl StoppingCriterion {
    pub fn fixed_point(epsilon: f64, max_iters: usize) -> Self {
        Self {
            kind: StopKind::FixedPoint,
            epsilon,
            conf_threshold: 1.0,
            max_iters,
        }
    }

    pub fn confidence(conf_threshold: f64, max_iters: usize) -> Self {
        Self {
            kind: StopKind::Confidence,
            epsilon: 0.01,
            conf_threshold,
            max_iters,
        }
    }

    pub fn max_iters_only(max_iters: usize) -> Self {
        Self {
            kind: StopKind::MaxItersOnly,
            epsilon: 0.01,
            conf_threshold: 1.0,
            max_iters,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(0.0..=1.0).contains(&self.conf_threshold) {
            return Err(Error::invalid(format!(
                "confidence threshold must lie in [0, 1], got {}",
                self.conf_threshold
            )));
        }
        Ok(())
    }
}

/// One row of the per-iteration trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub conf: [f64; 3],
    pub distance: f64,
}

#[derive(Clone, Debug)]
pub struct FactorizationResult {
    pub x_index: usize,
    pub y_index: usize,
    pub k_index: usize,
    /// `|similarity|` of each estimate with its decoded codeword.
    pub scores: [f64; 3],
    pub converged: bool,
    pub iterations: usize,
    pub final_confidences: [f64; 3],
    /// `h . v . o` from the final estimates.
    pub final_estimate: ComplexVector,
    pub state: ResonatorState,
    /// Filled only when tracing is enabled.
    pub trace: Vec<TraceRow>,
}

impl FactorizationResult {
    /// `(k, x, y)`
    pub fn triple(&self) -> (usize, usize, usize) {
        (self.k_index, self.x_index, self.y_index)
    }

    pub fn mean_confidence(&self) -> f64 {
        self.final_confidences.iter().sum::<f64>() / 3.0
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub order: UpdateOrder,
    pub trace: bool,
}

/// Factorizes `z` from a random initial state.
pub fn run<R: Rng + ?Sized>(
    z: &ComplexVector,
    cbs: &Codebooks,
    criterion: &StoppingCriterion,
    rng: &mut R,
) -> Result<FactorizationResult> {
    run_with(z, cbs, criterion, &RunOptions::default(), rng)
}

pub fn run_with<R: Rng + ?Sized>(
    z: &ComplexVector,
    cbs: &Codebooks,
    criterion: &StoppingCriterion,
    opts: &RunOptions,
    rng: &mut R,
) -> Result<FactorizationResult> {
    criterion.validate()?;
    check_dims(cbs.dim(), z.dim())?;
    let init = ResonatorState::random(cbs.dim(), rng)?;
    run_from(init, z, cbs, criterion, opts)
}

/// Iterates from a given state; deterministic.
pub fn run_from(
    init: ResonatorState,
    z: &ComplexVector,
    cbs: &Codebooks,
    criterion: &StoppingCriterion,
    opts: &RunOptions,
) -> Result<FactorizationResult> {
    criterion.validate()?;
    let track_conf = opts.trace || criterion.kind == StopKind::Confidence;
    let mut state = init;
    let mut converged = false;
    let mut trace = Vec::new();
    while state.iteration < criterion.max_iters {
        let next = resonator_step_ordered(&state, z, cbs, opts.order)?;
        let dist = fixed_point_distance(&state, &next);
        if !dist.is_finite() {
            return Err(Error::NumericFailure(format!(
                "resonator state became non-finite at iteration {}",
                next.iteration
            )));
        }
        state = next;
        let conf = if track_conf {
            let c = state.confidences(cbs)?;
            state.confidence_trace.push(c);
            Some(c)
        } else {
            None
        };
        if opts.trace {
            trace.push(TraceRow {
                t: state.iteration,
                conf: conf.unwrap_or([0.0; 3]),
                distance: dist,
            });
        }
        let stop = match criterion.kind {
            StopKind::FixedPoint => dist < criterion.epsilon,
            StopKind::Confidence => conf
                .map(|c| c.iter().all(|&v| v >= criterion.conf_threshold))
                .unwrap_or(false),
            StopKind::MaxItersOnly => false,
        };
        if stop {
            converged = true;
            break;
        }
    }

    let (x, sx) = decode(&state.est_h, &cbs.h)?;
    let (y, sy) = decode(&state.est_v, &cbs.v)?;
    let (k, sk) = decode(&state.est_o, &cbs.o)?;
    let final_confidences = match state.confidence_trace.last() {
        Some(c) if track_conf && state.iteration > 0 => *c,
        _ => state.confidences(cbs)?,
    };
    Ok(FactorizationResult {
        x_index: x,
        y_index: y,
        k_index: k,
        scores: [sx, sy, sk],
        converged,
        iterations: state.iteration,
        final_confidences,
        final_estimate: state.estimate(),
        state,
        trace,
    })
}

/// CSV with columns `t,conf_h,conf_v,conf_o,fixed_point_distance`.
pub fn write_trace_csv<W: Write>(out: &mut W, trace: &[TraceRow]) -> Result<()> {
    writeln!(out, "t,conf_h,conf_v,conf_o,fixed_point_distance")?;
    for r in trace {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.t, r.conf[0], r.conf[1], r.conf[2], r.distance
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{build_codebooks, compose_query, EncoderContext, ObjectTemplate};
    use crate::hd::FpeBase;
    use crate::sparse::Grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_codebooks(dim: usize, side: u32, k: usize, seed: u64) -> Codebooks {
        let mut r = rng(seed);
        let h = FpeBase::random(dim, side, &mut r).unwrap();
        let v = FpeBase::random(dim, side, &mut r).unwrap();
        let o = (0..k).map(|_| random_phasor(dim, &mut r).unwrap()).collect();
        Codebooks::new(
            Codebook::from_fpe(&h),
            Codebook::from_fpe(&v),
            Codebook::indexed(o).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn singleton_codebooks_decode_to_zero() {
        let mut r = rng(1);
        let c = EncoderContext::random(64, 1, 1, &mut r).unwrap();
        let t = ObjectTemplate::from_pixels("a", Grid::from_fn(1, |_, _| 1.0), &c).unwrap();
        let cbs = build_codebooks(&c, &[t]).unwrap();
        let z = compose_query(0, 0, 0, &cbs).unwrap();
        let s0 = ResonatorState::random(64, &mut r).unwrap();
        let s1 = resonator_step(&s0, &z, &cbs).unwrap();
        assert_eq!(s1.iteration, 1);
        assert_eq!(decode(&s1.est_h, &cbs.h).unwrap().0, 0);
        assert_eq!(decode(&s1.est_o, &cbs.o).unwrap().0, 0);
        let s = similarity_mag(&s1.estimate(), &z);
        assert!((s - 1.0).abs() < 1e-9);
    }

    fn similarity_mag<A: Hypervector, B: Hypervector>(a: &A, b: &B) -> f64 {
        crate::hd::similarity(a, b).unwrap().norm()
    }

    #[test]
    fn ground_truth_is_a_fixed_point() {
        let cbs = random_codebooks(1024, 10, 10, 2);
        for (x, y, k) in [(0, 0, 0), (3, 7, 2), (9, 9, 9), (5, 1, 4)] {
            let z = compose_query(x, y, k, &cbs).unwrap();
            let s = ResonatorState::new(
                cbs.h.entries()[x].clone(),
                cbs.v.entries()[y].clone(),
                cbs.o.entries()[k].clone(),
            )
            .unwrap();
            let n = resonator_step(&s, &z, &cbs).unwrap();
            assert_eq!(decode(&n.est_h, &cbs.h).unwrap().0, x);
            assert_eq!(decode(&n.est_v, &cbs.v).unwrap().0, y);
            assert_eq!(decode(&n.est_o, &cbs.o).unwrap().0, k);
            assert!(fixed_point_distance(&s, &n) < 0.05);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let cbs = random_codebooks(500, 8, 5, 3);
        let z = compose_query(2, 6, 1, &cbs).unwrap();
        let crit = StoppingCriterion::fixed_point(0.01, 50);
        let a = run(&z, &cbs, &crit, &mut rng(9)).unwrap();
        let b = run(&z, &cbs, &crit, &mut rng(9)).unwrap();
        assert_eq!(a.state, b.state);
        assert_eq!(a.triple(), b.triple());
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn confidence_conventions() {
        let cbs = random_codebooks(2000, 5, 4, 4);
        let e = cbs.o.entries()[2].clone();
        assert!(confidence(&cbs.o, &e).unwrap() > 0.9);

        // exactly orthogonal codebook: b = 0 gives 1
        let d = 4;
        let rows: Vec<PhasorVector> = (0..d)
            .map(|i| {
                PhasorVector::new(
                    (0..d)
                        .map(|j| C64::from_polar(1.0, std::f64::consts::TAU * (i * j) as f64 / d as f64))
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        let cb = Codebook::indexed(rows.clone()).unwrap();
        assert!((confidence(&cb, &rows[1]).unwrap() - 1.0).abs() < 1e-12);

        // equidistant from the top two entries gives 0
        let mid = ComplexVector::new(
            rows[0]
                .components()
                .iter()
                .zip(rows[1].components())
                .map(|(a, b)| a + b)
                .collect(),
        );
        assert!(confidence(&cb, &mid).unwrap().abs() < 1e-12);

        assert_eq!(confidence(&cb, &ComplexVector::zeros(d)).unwrap(), 0.0);
        let single = Codebook::indexed(vec![rows[0].clone()]).unwrap();
        assert_eq!(confidence(&single, &ComplexVector::zeros(d)).unwrap(), 0.0);
        assert_eq!(confidence(&single, &rows[0]).unwrap(), 1.0);
    }

    #[test]
    fn random_estimates_have_low_confidence() {
        let mut r = rng(5);
        let cb = Codebook::indexed((0..50).map(|_| random_phasor(5000, &mut r).unwrap()).collect()).unwrap();
        let mut low = 0;
        for _ in 0..1000 {
            let e = random_phasor(5000, &mut r).unwrap();
            if confidence(&cb, &e).unwrap() < 0.5 {
                low += 1;
            }
        }
        assert!(low > 900, "{low}");
    }

    #[test]
    fn distance_conventions() {
        let mut r = rng(6);
        let s = ResonatorState::random(300, &mut r).unwrap();
        assert_eq!(fixed_point_distance(&s, &s), 0.0);
        let mut flipped = s.clone();
        flipped.est_v = PhasorVector::new(s.est_v.components().iter().map(|c| -c).collect()).unwrap();
        assert!((fixed_point_distance(&s, &flipped) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_iterations_decodes_the_initial_state() {
        let cbs = random_codebooks(400, 6, 3, 7);
        let z = compose_query(1, 2, 0, &cbs).unwrap();
        let res = run(&z, &cbs, &StoppingCriterion::max_iters_only(0), &mut rng(1)).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations, 0);
        let init = ResonatorState::random(400, &mut rng(1)).unwrap();
        assert_eq!(res.x_index, decode(&init.est_h, &cbs.h).unwrap().0);
        assert_eq!(res.k_index, decode(&init.est_o, &cbs.o).unwrap().0);
    }

    #[test]
    fn zero_confidence_threshold_stops_after_one_step() {
        let cbs = random_codebooks(400, 6, 3, 8);
        let z = compose_query(1, 2, 0, &cbs).unwrap();
        let res = run(&z, &cbs, &StoppingCriterion::confidence(0.0, 50), &mut rng(2)).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 1);
    }

    #[test]
    fn decode_exact_noisy_and_ties() {
        let cbs = random_codebooks(2500, 12, 2, 9);
        let (i, s) = decode(&cbs.h.entries()[7], &cbs.h).unwrap();
        assert_eq!(i, 7);
        assert!((s - 1.0).abs() < 1e-12);

        let mut r = rng(10);
        let mut hits = 0;
        for _ in 0..50 {
            let noise = random_phasor(2500, &mut r).unwrap();
            let mut v = cbs.h.entries()[7].to_complex();
            v.add_scaled(0.1, &noise).unwrap();
            let (i, s) = decode(&normalize(&v), &cbs.h).unwrap();
            if i == 7 && s > 0.9 {
                hits += 1;
            }
        }
        assert_eq!(hits, 50);

        let e = cbs.o.entries()[0].clone();
        let dup = Codebook::new(vec![e.clone(), e.clone()], vec!["a".into(), "b".into()]).unwrap();
        assert_eq!(decode(&e, &dup).unwrap().0, 0);
    }

    #[test]
    fn recovers_composed_queries() {
        let cbs = random_codebooks(2500, 20, 10, 11);
        let mut r = rng(12);
        let crit = StoppingCriterion::fixed_point(0.01, 100);
        let mut ok = 0;
        for _ in 0..40 {
            let (x, y, k) = (r.gen_range(0..20), r.gen_range(0..20), r.gen_range(0..10));
            let z = compose_query(x, y, k, &cbs).unwrap();
            let res = run(&z, &cbs, &crit, &mut r).unwrap();
            if res.triple() == (k, x, y) {
                ok += 1;
            }
        }
        assert!(ok >= 38, "{ok}/40");
    }

    #[test]
    fn custom_order_and_trace() {
        let cbs = random_codebooks(800, 8, 4, 13);
        let z = compose_query(3, 4, 2, &cbs).unwrap();
        let opts = RunOptions {
            order: "ohv".parse().unwrap(),
            trace: true,
        };
        let res = run_with(&z, &cbs, &StoppingCriterion::fixed_point(0.01, 30), &opts, &mut rng(3)).unwrap();
        assert_eq!(res.trace.len(), res.iterations);
        assert!(res.trace.iter().all(|t| t.conf.iter().all(|c| (0.0..=1.0).contains(c))));
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &res.trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,conf_h,conf_v,conf_o,fixed_point_distance\n"));
        assert_eq!(text.lines().count(), res.iterations + 1);
        assert!("hhv".parse::<UpdateOrder>().is_err());
        assert!("hv".parse::<UpdateOrder>().is_err());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let cbs = random_codebooks(100, 4, 2, 14);
        let z = ComplexVector::zeros(99);
        assert!(run(&z, &cbs, &StoppingCriterion::fixed_point(0.01, 5), &mut rng(1)).is_err());
        assert!(StoppingCriterion::fixed_point(0.0, 5).validate().is_err());
        assert!(StoppingCriterion::confidence(1.5, 5).validate().is_err());
    }
}
