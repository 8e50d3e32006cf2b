//! Convolutional sparse coding.
//!
//! An image is modelled as `I = sum_j A_j * phi_j + noise` with circular
//! convolution. Coefficient maps are inferred by minimizing
//! `E = 1/2 ||I - sum_j phi_j * A_j||^2 + lambda * sum_j ||A_j||_1`
//! with FISTA, and filters are learned by alternating minimization.

pub mod container;
mod conv;
mod grid;
mod learn;
mod solver;

pub use conv::{convolve_circular, Fft2};
pub use grid::{FeatureMaps, Grid, Image};
pub use learn::{learn_dictionary, LearnConfig, LearnedDictionary};
pub use solver::{infer_maps, CscOperator, Inference, SparseCoder};

use rand::Rng;

use crate::error::{Error, Result};

/// Tolerance on `||phi_j|| = 1`.
pub const NORM_TOL: f64 = 1e-9;

/// `n` unit-norm filters of side `P`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dictionary {
    filters: Vec<Grid>,
}

impl Dictionary {
    pub fn new(filters: Vec<Grid>) -> Result<Self> {
        let first = filters
            .first()
            .ok_or_else(|| Error::invalid("dictionary needs at least one filter"))?;
        let p = first.side();
        for (j, f) in filters.iter().enumerate() {
            if f.side() != p {
                return Err(Error::invalid(format!(
                    "filter {j} has side {}, expected {p}",
                    f.side()
                )));
            }
            if (f.norm() - 1.0).abs() > NORM_TOL {
                return Err(Error::invalid(format!(
                    "filter {j} has norm {} (expected 1)",
                    f.norm()
                )));
            }
        }
        Ok(Self { filters })
    }

    /// Rescales each filter to unit norm; zero filters are rejected.
    pub fn normalized(filters: Vec<Grid>) -> Result<Self> {
        let filters = filters
            .into_iter()
            .enumerate()
            .map(|(j, f)| {
                let n = f.norm();
                if n == 0.0 || !n.is_finite() {
                    Err(Error::invalid(format!("filter {j} cannot be normalized")))
                } else {
                    Ok(f.scaled(1.0 / n))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(filters)
    }

    /// Zero-mean random filters with unit norm.
    pub fn random<R: Rng + ?Sized>(count: usize, patch: usize, rng: &mut R) -> Result<Self> {
        if count == 0 || patch == 0 {
            return Err(Error::invalid("dictionary needs n >= 1 and P >= 1"));
        }
        let filters = (0..count)
            .map(|_| {
                let mut g = Grid::from_fn(patch, |_, _| rng.gen_range(-1.0..1.0));
                let mean = g.data().iter().sum::<f64>() / (patch * patch) as f64;
                g.data_mut().iter_mut().for_each(|v| *v -= mean);
                if g.norm() == 0.0 {
                    g.set(0, 0, 1.0);
                }
                g
            })
            .collect();
        Self::normalized(filters)
    }

    pub fn count(&self) -> usize {
        self.filters.len()
    }

    pub fn patch(&self) -> usize {
        self.filters[0].side()
    }

    pub fn filters(&self) -> &[Grid] {
        &self.filters
    }

    pub fn filter(&self, j: usize) -> &Grid {
        &self.filters[j]
    }
}

/// Step-size rule for the sparse solver.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Step {
    /// `1 / Lip`, with `Lip` from power iteration on the synthesis operator.
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseConfig {
    pub lambda: f64,
    pub max_iters: usize,
    pub step: Step,
    /// Stop when the relative objective change falls below this.
    pub tol: f64,
    /// FISTA momentum; `false` runs plain ISTA.
    pub momentum: bool,
}

impl Default for SparseConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            max_iters: 200,
            step: Step::Auto,
            tol: 1e-6,
            momentum: true,
        }
    }
}

impl SparseConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be >= 1"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("tol must be > 0"));
        }
        if let Step::Fixed(s) = self.step {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::invalid("fixed step must be > 0"));
            }
        }
        Ok(())
    }
}

/// `sign(x) * max(|x| - theta, 0)`
pub fn soft_threshold(x: f64, theta: f64) -> f64 {
    if x > theta {
        x - theta
    } else if x < -theta {
        x + theta
    } else {
        0.0
    }
}

/// `sum_j A_j * phi_j`, unclipped.
pub fn reconstruct(dict: &Dictionary, maps: &FeatureMaps) -> Result<Image> {
    let op = CscOperator::new(dict, maps.side())?;
    op.check_maps(maps)?;
    Ok(op.synthesize(maps))
}

/// `1/2 ||I - sum_j phi_j * A_j||^2 + lambda * sum_j ||A_j||_1`
pub fn objective(dict: &Dictionary, maps: &FeatureMaps, image: &Image, lambda: f64) -> Result<f64> {
    let op = CscOperator::new(dict, image.side())?;
    op.check_maps(maps)?;
    Ok(op.objective(maps, image, lambda))
}
