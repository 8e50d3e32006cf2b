use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Dictionary, FeatureMaps, Fft2, Grid, Image, SparseCoder, SparseConfig};
use crate::error::{Error, Result};
use crate::hd::C64;

#[derive(Clone, Debug, PartialEq)]
pub struct LearnConfig {
    pub rounds: usize,
    pub sparse: SparseConfig,
    /// Projected gradient steps on the filters per round.
    pub filter_steps: usize,
    pub seed: u64,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            rounds: 50,
            sparse: SparseConfig::with_lambda(0.2),
            filter_steps: 20,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LearnedDictionary {
    pub dict: Dictionary,
    /// Total training objective after each inference pass; one entry per
    /// round plus a final pass with the last filters.
    pub objective_history: Vec<f64>,
}

/// Alternating minimization started from unit-norm patches cut from the data.
pub fn learn_dictionary(
    images: &[Image],
    count: usize,
    patch: usize,
    cfg: &LearnConfig,
) -> Result<LearnedDictionary> {
    if count == 0 {
        return Err(Error::invalid("dictionary size must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = match data_patches(images, count, patch, &mut rng) {
        Some(filters) => Dictionary::new(filters)?,
        None => Dictionary::random(count, patch, &mut rng)?,
    };
    learn_dictionary_from(images, init, cfg)
}

/// Random patches whose energy is at least half the mean patch energy.
/// Random noise filters that no code ever uses stay noise, so seeding from
/// the data avoids dead atoms. `None` when the data has too little content.
fn data_patches(images: &[Image], count: usize, patch: usize, rng: &mut ChaCha8Rng) -> Option<Vec<Grid>> {
    let side = images.first()?.side();
    if patch > side {
        return None;
    }
    let cut = |img: &Image, x0: usize, y0: usize| Grid::from_fn(patch, |x, y| img.get((x0 + x) % side, (y0 + y) % side));
    let probe: Vec<f64> = (0..256)
        .map(|_| {
            let img = &images[rng.gen_range(0..images.len())];
            cut(img, rng.gen_range(0..side), rng.gen_range(0..side)).norm()
        })
        .collect();
    let floor = 0.5 * probe.iter().sum::<f64>() / probe.len() as f64;
    if !(floor > 0.0) {
        return None;
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count * 1000 {
        let img = &images[rng.gen_range(0..images.len())];
        let g = cut(img, rng.gen_range(0..side), rng.gen_range(0..side));
        let n = g.norm();
        if n >= floor {
            out.push(g.scaled(1.0 / n));
            if out.len() == count {
                return Some(out);
            }
        }
    }
    None
}

/// Each round: one inference pass with the filters fixed, then a few projected
/// gradient steps on the filters, each followed by projection onto the unit
/// ball. Afterwards each filter is rescaled to unit norm, with the matching maps scaled
/// by the same factor so the reconstruction is unchanged and the L1 term does
/// not grow. Inference warm-starts from those rescaled maps, which keeps the
/// total objective non-increasing from round to round.
pub fn learn_dictionary_from(
    images: &[Image],
    init: Dictionary,
    cfg: &LearnConfig,
) -> Result<LearnedDictionary> {
    let first = images
        .first()
        .ok_or_else(|| Error::invalid("cannot learn a dictionary from an empty dataset"))?;
    let side = first.side();
    if images.iter().any(|i| i.side() != side) {
        return Err(Error::invalid("training images must share one side"));
    }
    if init.patch() > side {
        return Err(Error::invalid(format!(
            "patch {} exceeds image side {side}",
            init.patch()
        )));
    }
    cfg.sparse.validate()?;

    let fft = Fft2::new(side);
    let mut dict = init;
    let mut warm: Vec<Option<FeatureMaps>> = vec![None; images.len()];
    let mut history = Vec::with_capacity(cfg.rounds + 1);

    for round in 0..=cfg.rounds {
        let coder = SparseCoder::new(&dict, side, cfg.sparse.clone())?;
        let results = images
            .par_iter()
            .zip(warm.par_iter())
            .map(|(img, w)| coder.infer(img, w.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        history.push(results.iter().map(|r| r.objective).sum::<f64>());
        let maps: Vec<FeatureMaps> = results.into_iter().map(|r| r.maps).collect();
        if round == cfg.rounds {
            break;
        }

        let system = FilterSystem::new(&fft, images, &maps);
        if !(system.lip > 0.0) {
            // all maps are zero: the filters receive no gradient
            warm = maps.into_iter().map(Some).collect();
            continue;
        }
        let mut filters = dict.filters().to_vec();
        for _ in 0..cfg.filter_steps.max(1) {
            let grads = system.gradients(&fft, &filters, dict.patch());
            for (f, g) in filters.iter_mut().zip(&grads) {
                f.add_scaled(-1.0 / system.lip, g);
                let norm = f.norm();
                if !norm.is_finite() {
                    return Err(Error::NumericFailure(format!(
                        "filter update diverged in round {round}"
                    )));
                }
                if norm > 1.0 {
                    *f = f.scaled(1.0 / norm);
                }
            }
        }
        let mut scales = Vec::with_capacity(dict.count());
        for (f, old) in filters.iter_mut().zip(dict.filters()) {
            let norm = f.norm();
            if norm == 0.0 {
                *f = old.clone();
                scales.push(1.0);
            } else {
                *f = f.scaled(1.0 / norm);
                scales.push(norm);
            }
        }
        dict = Dictionary::normalized(filters)?;
        warm = maps
            .into_iter()
            .map(|mut m| {
                for (g, &s) in m.maps_mut().iter_mut().zip(&scales) {
                    g.data_mut().iter_mut().for_each(|v| *v *= s);
                }
                Some(m)
            })
            .collect();
    }

    Ok(LearnedDictionary {
        dict,
        objective_history: history,
    })
}

/// The filter subproblem with the maps fixed, per frequency `w`:
/// `S_jk(w) = sum_i conj(A_ij(w)) A_ik(w)` and `b_j(w) = sum_i conj(A_ij(w)) X_i(w)`,
/// so the data-term gradient for filter `j` is the inverse transform of
/// `sum_k S_jk D_k - b_j`, cropped to the patch.
struct FilterSystem {
    n: usize,
    gram: Vec<C64>,
    rhs: Vec<C64>,
    /// Upper bound on the largest eigenvalue of any `S(w)`: the smaller of its
    /// trace and its largest absolute row sum.
    lip: f64,
}

impl FilterSystem {
    fn new(fft: &Fft2, images: &[Image], maps: &[FeatureMaps]) -> Self {
        let n = maps.first().map_or(0, FeatureMaps::count);
        let freqs = fft.side() * fft.side();
        let zero = C64::new(0.0, 0.0);
        let (gram, rhs) = images
            .par_iter()
            .zip(maps.par_iter())
            .map(|(img, m)| {
                let x = fft.forward(img);
                let a: Vec<Vec<C64>> = m.maps().iter().map(|g| fft.forward(g)).collect();
                let mut gram = vec![zero; freqs * n * n];
                let mut rhs = vec![zero; freqs * n];
                for w in 0..freqs {
                    for j in 0..n {
                        let aj = a[j][w].conj();
                        rhs[w * n + j] = aj * x[w];
                        for k in 0..n {
                            gram[(w * n + j) * n + k] = aj * a[k][w];
                        }
                    }
                }
                (gram, rhs)
            })
            .reduce(
                || (vec![zero; freqs * n * n], vec![zero; freqs * n]),
                |(mut g1, mut r1), (g2, r2)| {
                    g1.iter_mut().zip(&g2).for_each(|(a, b)| *a += b);
                    r1.iter_mut().zip(&r2).for_each(|(a, b)| *a += b);
                    (g1, r1)
                },
            );
        let lip = (0..freqs)
            .map(|w| {
                let block = &gram[w * n * n..(w + 1) * n * n];
                let trace: f64 = (0..n).map(|j| block[j * n + j].re).sum();
                let rows = (0..n)
                    .map(|j| block[j * n..(j + 1) * n].iter().map(|c| c.norm()).sum::<f64>())
                    .fold(0.0, f64::max);
                trace.min(rows)
            })
            .fold(0.0, f64::max);
        Self { n, gram, rhs, lip }
    }

    fn gradients(&self, fft: &Fft2, filters: &[Grid], patch: usize) -> Vec<Grid> {
        let n = self.n;
        let spectra: Vec<Vec<C64>> = filters.iter().map(|f| fft.forward(f)).collect();
        let freqs = fft.side() * fft.side();
        (0..n)
            .map(|j| {
                let spec = (0..freqs)
                    .map(|w| {
                        let row = &self.gram[(w * n + j) * n..(w * n + j + 1) * n];
                        row.iter().zip(&spectra).map(|(s, d)| s * d[w]).sum::<C64>() - self.rhs[w * n + j]
                    })
                    .collect();
                fft.inverse_real(spec).crop(patch)
            })
            .collect()
    }
}
