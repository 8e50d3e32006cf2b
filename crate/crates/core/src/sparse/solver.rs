use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{soft_threshold, Dictionary, FeatureMaps, Fft2, Grid, Image, SparseConfig, Step};
use crate::error::{check_dims, Error, Result};
use crate::hd::C64;

const POWER_ITERS: usize = 200;
// Power iteration approaches Lip from below.
const LIP_MARGIN: f64 = 1.02;

/// Synthesis operator `A -> sum_j phi_j * A_j` on `L x L` maps, with its adjoint.
#[derive(Clone, Debug)]
pub struct CscOperator {
    fft: Fft2,
    filter_spectra: Vec<Vec<C64>>,
}

impl CscOperator {
    pub fn new(dict: &Dictionary, side: usize) -> Result<Self> {
        if dict.patch() > side {
            return Err(Error::invalid(format!(
                "filter side {} exceeds image side {side}",
                dict.patch()
            )));
        }
        let fft = Fft2::new(side);
        let filter_spectra = dict.filters().iter().map(|f| fft.forward(f)).collect();
        Ok(Self {
            fft,
            filter_spectra,
        })
    }

    pub fn side(&self) -> usize {
        self.fft.side()
    }

    pub fn count(&self) -> usize {
        self.filter_spectra.len()
    }

    pub fn check_maps(&self, maps: &FeatureMaps) -> Result<()> {
        check_dims(self.count(), maps.count())?;
        check_dims(self.side(), maps.side())
    }

    pub fn check_image(&self, image: &Image) -> Result<()> {
        check_dims(self.side(), image.side())
    }

    pub fn synthesize(&self, maps: &FeatureMaps) -> Grid {
        let n = self.side() * self.side();
        let mut acc = vec![C64::new(0.0, 0.0); n];
        for (m, fs) in maps.maps().iter().zip(&self.filter_spectra) {
            if m.data().iter().all(|&v| v == 0.0) {
                continue;
            }
            let ms = self.fft.forward(m);
            for ((a, x), f) in acc.iter_mut().zip(&ms).zip(fs) {
                *a += x * f;
            }
        }
        self.fft.inverse_real(acc)
    }

    /// Correlates `r` with every filter: the gradient direction for the maps.
    pub fn adjoint(&self, r: &Grid) -> FeatureMaps {
        let rs = self.fft.forward(r);
        let maps = self
            .filter_spectra
            .iter()
            .map(|fs| {
                self.fft
                    .inverse_real(rs.iter().zip(fs).map(|(x, f)| x * f.conj()).collect())
            })
            .collect();
        FeatureMaps::new(maps).expect("non-empty dictionary")
    }

    pub fn objective(&self, maps: &FeatureMaps, image: &Image, lambda: f64) -> f64 {
        let recon = self.synthesize(maps);
        data_term(&recon, image) + lambda * maps.l1()
    }

    /// Largest eigenvalue of `A^T A` by power iteration.
    ///
    /// The operator is diagonal over spatial frequencies (one rank-1 `n x n`
    /// block per frequency), so the iteration runs on the spectra directly.
    pub fn lipschitz_power(&self, iters: usize) -> f64 {
        let n = self.side() * self.side();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut x: Vec<Vec<C64>> = self
            .filter_spectra
            .iter()
            .map(|_| {
                (0..n)
                    .map(|_| C64::from_polar(1.0, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)))
                    .collect()
            })
            .collect();
        let mut estimate = 0.0;
        for _ in 0..iters {
            let norm_x = spectra_norm(&x);
            if norm_x == 0.0 {
                return 0.0;
            }
            let mut y = vec![vec![C64::new(0.0, 0.0); n]; x.len()];
            for w in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for (fs, xs) in self.filter_spectra.iter().zip(&x) {
                    s += fs[w] * xs[w];
                }
                for (fs, ys) in self.filter_spectra.iter().zip(y.iter_mut()) {
                    ys[w] = fs[w].conj() * s;
                }
            }
            estimate = spectra_norm(&y) / norm_x;
            let ny = spectra_norm(&y);
            if ny == 0.0 {
                return 0.0;
            }
            // keep the iterate at unit scale to avoid overflow
            for ys in y.iter_mut() {
                ys.iter_mut().for_each(|v| *v /= ny);
            }
            x = y;
        }
        estimate
    }

    /// `max_w sum_j |Phi_j(w)|^2`, the exact spectral norm squared.
    pub fn lipschitz_exact(&self) -> f64 {
        let n = self.side() * self.side();
        (0..n)
            .map(|w| self.filter_spectra.iter().map(|f| f[w].norm_sqr()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

fn spectra_norm(x: &[Vec<C64>]) -> f64 {
    x.iter()
        .flat_map(|v| v.iter())
        .map(|c| c.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn data_term(recon: &Grid, image: &Image) -> f64 {
    0.5 * recon
        .data()
        .iter()
        .zip(image.data())
        .map(|(r, i)| (i - r) * (i - r))
        .sum::<f64>()
}

/// Result of one sparse inference.
#[derive(Clone, Debug)]
pub struct Inference {
    pub maps: FeatureMaps,
    pub objective: f64,
    pub iterations: usize,
    /// Objective of the initial point followed by every accepted iterate.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// FISTA solver bound to one dictionary and image side.
#[derive(Clone, Debug)]
pub struct SparseCoder {
    op: CscOperator,
    cfg: SparseConfig,
    step: f64,
}

impl SparseCoder {
    pub fn new(dict: &Dictionary, side: usize, cfg: SparseConfig) -> Result<Self> {
        cfg.validate()?;
        let op = CscOperator::new(dict, side)?;
        let step = match cfg.step {
            Step::Fixed(s) => s,
            Step::Auto => {
                let lip = op.lipschitz_power(POWER_ITERS) * LIP_MARGIN;
                if !(lip > 0.0) || !lip.is_finite() {
                    return Err(Error::NumericFailure(format!(
                        "Lipschitz estimate {lip} is not positive"
                    )));
                }
                1.0 / lip
            }
        };
        Ok(Self { op, cfg, step })
    }

    pub fn operator(&self) -> &CscOperator {
        &self.op
    }

    pub fn config(&self) -> &SparseConfig {
        &self.cfg
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn infer(&self, image: &Image, init: Option<&FeatureMaps>) -> Result<Inference> {
        self.op.check_image(image)?;
        if !image.is_finite() {
            return Err(Error::NumericFailure("image has non-finite pixels".into()));
        }
        let lambda = self.cfg.lambda;
        let step = self.step;
        let mut x = match init {
            Some(m) => {
                self.op.check_maps(m)?;
                m.clone()
            }
            None => FeatureMaps::zeros(self.op.count(), self.op.side()),
        };
        let mut recon_x = self.op.synthesize(&x);
        let mut f_x = data_term(&recon_x, image) + lambda * x.l1();
        let mut trace = vec![f_x];

        let mut y = x.clone();
        let mut recon_y = recon_x.clone();
        let mut t = 1.0f64;
        let mut converged = false;
        let mut iterations = 0;

        for it in 1..=self.cfg.max_iters {
            iterations = it;
            let mut residual = recon_y.clone();
            residual.add_scaled(-1.0, image);
            let grad = self.op.adjoint(&residual);

            let mut cand = y.clone();
            for (cm, gm) in cand.maps_mut().iter_mut().zip(grad.maps()) {
                for (c, g) in cm.data_mut().iter_mut().zip(gm.data()) {
                    *c = soft_threshold(*c - step * g, step * lambda);
                }
            }
            let recon_c = self.op.synthesize(&cand);
            let f_c = data_term(&recon_c, image) + lambda * cand.l1();
            if !f_c.is_finite() || !cand.is_finite() {
                return Err(Error::NumericFailure(format!(
                    "non-finite objective at iteration {it}"
                )));
            }

            if self.cfg.momentum && f_c > f_x {
                // restart: drop momentum and take a plain proximal step from x next
                t = 1.0;
                y = x.clone();
                recon_y = recon_x.clone();
                continue;
            }

            let rel = (f_x - f_c).abs() / f_x.abs().max(f64::MIN_POSITIVE);
            if self.cfg.momentum {
                let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
                let beta = (t - 1.0) / t_next;
                y = cand.clone();
                y.add_scaled(beta, &cand);
                y.add_scaled(-beta, &x);
                recon_y = recon_c.clone();
                recon_y.add_scaled(beta, &recon_c);
                recon_y.add_scaled(-beta, &recon_x);
                t = t_next;
            } else {
                y = cand.clone();
                recon_y = recon_c.clone();
            }
            x = cand;
            recon_x = recon_c;
            f_x = f_c;
            trace.push(f_x);

            if rel < self.cfg.tol || f_x == 0.0 {
                converged = true;
                break;
            }
        }

        Ok(Inference {
            maps: x,
            objective: f_x,
            iterations,
            trace,
            converged,
        })
    }
}

/// Infers coefficient maps for `image` from a zero start.
pub fn infer_maps(image: &Image, dict: &Dictionary, cfg: &SparseConfig) -> Result<FeatureMaps> {
    let coder = SparseCoder::new(dict, image.side(), cfg.clone())?;
    Ok(coder.infer(image, None)?.maps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{objective, reconstruct};
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn bars(len: usize) -> Dictionary {
        let v = Grid::from_fn(len, |x, _| if x == 0 { 1.0 } else { 0.0 });
        let h = Grid::from_fn(len, |_, y| if y == 0 { 1.0 } else { 0.0 });
        Dictionary::normalized(vec![v, h]).unwrap()
    }

    #[test]
    fn power_iteration_matches_spectral_norm() {
        for (dict, side) in [
            (bars(8), 32),
            (Dictionary::random(4, 5, &mut rng(1)).unwrap(), 20),
            (Dictionary::random(16, 12, &mut rng(2)).unwrap(), 28),
        ] {
            let op = CscOperator::new(&dict, side).unwrap();
            let exact = op.lipschitz_exact();
            let est = op.lipschitz_power(POWER_ITERS);
            assert!(est <= exact * (1.0 + 1e-12), "{est} > {exact}");
            assert!(est * LIP_MARGIN >= exact, "{est} too far below {exact}");
        }
    }

    #[test]
    fn adjoint_is_the_transpose() {
        let dict = Dictionary::random(3, 4, &mut rng(3)).unwrap();
        let op = CscOperator::new(&dict, 9).unwrap();
        let mut r = rng(4);
        let a = FeatureMaps::new(
            (0..3)
                .map(|_| Grid::from_fn(9, |_, _| r.gen_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap();
        let b = Grid::from_fn(9, |_, _| r.gen_range(-1.0..1.0));
        let lhs = op.synthesize(&a).dot(&b);
        let rhs: f64 = a
            .maps()
            .iter()
            .zip(op.adjoint(&b).maps())
            .map(|(x, y)| x.dot(y))
            .sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn zero_image_is_a_fixed_point() {
        let dict = bars(4);
        let maps = infer_maps(&Grid::zeros(12), &dict, &SparseConfig::default()).unwrap();
        assert_eq!(maps, FeatureMaps::zeros(2, 12));
    }

    #[test]
    fn ista_is_monotone() {
        let dict = Dictionary::random(3, 5, &mut rng(5)).unwrap();
        let mut r = rng(6);
        let cfg = SparseConfig {
            lambda: 0.05,
            max_iters: 60,
            momentum: false,
            tol: 1e-14,
            ..SparseConfig::default()
        };
        let coder = SparseCoder::new(&dict, 16, cfg).unwrap();
        for _ in 0..5 {
            let img = Grid::from_fn(16, |_, _| r.gen_range(0.0..1.0));
            let inf = coder.infer(&img, None).unwrap();
            for w in inf.trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-10, "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn fista_never_ends_above_start() {
        let dict = Dictionary::random(4, 5, &mut rng(7)).unwrap();
        let mut r = rng(8);
        let img = Grid::from_fn(20, |_, _| r.gen_range(0.0..1.0));
        let cfg = SparseConfig::with_lambda(0.1);
        let inf = SparseCoder::new(&dict, 20, cfg.clone()).unwrap().infer(&img, None).unwrap();
        let start = objective(&dict, &FeatureMaps::zeros(4, 20), &img, 0.1).unwrap();
        assert!(inf.objective <= start);
        let direct = objective(&dict, &inf.maps, &img, 0.1).unwrap();
        assert!((direct - inf.objective).abs() < 1e-8 * direct.max(1.0));
        for w in inf.trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn large_lambda_zeroes_everything_in_one_step() {
        let dict = Dictionary::random(3, 4, &mut rng(9)).unwrap();
        let mut r = rng(10);
        let img = Grid::from_fn(12, |_, _| r.gen_range(0.0..1.0));
        let op = CscOperator::new(&dict, 12).unwrap();
        let mut neg = img.clone();
        neg.data_mut().iter_mut().for_each(|v| *v = -*v);
        let g0 = op.adjoint(&neg).max_abs();
        let cfg = SparseConfig {
            lambda: g0 * 1.001,
            max_iters: 1,
            ..SparseConfig::default()
        };
        let inf = SparseCoder::new(&dict, 12, cfg).unwrap().infer(&img, None).unwrap();
        assert_eq!(inf.maps.max_abs(), 0.0);
    }

    #[test]
    fn recovers_isolated_bars() {
        let dict = bars(8);
        let mut truth = FeatureMaps::zeros(2, 24);
        let s = 8f64.sqrt();
        truth.maps_mut()[0].set(3, 2, s);
        truth.maps_mut()[1].set(12, 15, s);
        let img = reconstruct(&dict, &truth).unwrap();
        let cfg = SparseConfig {
            lambda: 0.1,
            max_iters: 500,
            tol: 1e-10,
            ..SparseConfig::default()
        };
        let maps = infer_maps(&img, &dict, &cfg).unwrap();
        let thr = 1e-3 * maps.max_abs();
        let active: Vec<_> = maps.active(0.5).iter().map(|&(j, x, y, _)| (j, x, y)).collect();
        assert!(active.contains(&(0, 3, 2)));
        assert!(active.contains(&(1, 12, 15)));
        assert!(maps.active(thr).len() >= 2);
    }

    #[test]
    fn non_finite_image_is_rejected() {
        let dict = bars(3);
        let coder = SparseCoder::new(&dict, 6, SparseConfig::default()).unwrap();
        let mut img = Grid::zeros(6);
        img.data_mut()[4] = f64::INFINITY;
        assert!(matches!(coder.infer(&img, None), Err(Error::NumericFailure(_))));
    }

    #[test]
    fn inference_is_shift_covariant() {
        let dict = Dictionary::random(3, 4, &mut rng(11)).unwrap();
        let mut r = rng(12);
        let img = Grid::from_fn(16, |_, _| r.gen_range(0.0..1.0));
        let cfg = SparseConfig::with_lambda(0.05);
        let coder = SparseCoder::new(&dict, 16, cfg).unwrap();
        let a = coder.infer(&img.shift(5, -3), None).unwrap().maps;
        let b = coder.infer(&img, None).unwrap().maps.shift(5, -3);
        for (ma, mb) in a.maps().iter().zip(b.maps()) {
            for (x, y) in ma.data().iter().zip(mb.data()) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }
}
