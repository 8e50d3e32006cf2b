use std::f64::consts::TAU;

use rand::Rng;

use super::{PhasorVector, C64};
use crate::error::{Error, Result};

/// Base of a periodic fractional power encoding.
///
/// Phase `d` is `2*pi*k_d/L` with the integer index `k_d` stored instead of the
/// angle, so `power(x)` and `power(x + L)` are bit-identical.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FpeBase {
    indices: Vec<u32>,
    period: u32,
}

impl FpeBase {
    pub fn random<R: Rng + ?Sized>(dim: usize, period: u32, rng: &mut R) -> Result<Self> {
        if period == 0 {
            return Err(Error::invalid("FPE period must be >= 1"));
        }
        if dim == 0 {
            return Err(Error::invalid("dim must be >= 1"));
        }
        let indices = (0..dim).map(|_| rng.gen_range(0..period)).collect();
        Ok(Self { indices, period })
    }

    pub fn from_indices(indices: Vec<u32>, period: u32) -> Result<Self> {
        if period == 0 {
            return Err(Error::invalid("FPE period must be >= 1"));
        }
        if indices.is_empty() {
            return Err(Error::invalid("dim must be >= 1"));
        }
        if let Some(k) = indices.iter().find(|&&k| k >= period) {
            return Err(Error::invalid(format!(
                "phase index {k} out of range for period {period}"
            )));
        }
        Ok(Self { indices, period })
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn period(&self) -> u32 {
        self.period
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn phases(&self) -> Vec<f64> {
        let l = self.period as f64;
        self.indices.iter().map(|&k| TAU * k as f64 / l).collect()
    }

    /// Component `d` is `exp(i * omega_d * x)`, computed as root index `k_d * x mod L`.
    pub fn power(&self, x: i64) -> PhasorVector {
        let roots = roots_of_unity(self.period);
        PhasorVector::from_unit(self.power_with(&roots, x))
    }

    pub(crate) fn power_with(&self, roots: &[C64], x: i64) -> Vec<C64> {
        let l = self.period as i64;
        let step = x.rem_euclid(l);
        self.indices
            .iter()
            .map(|&k| roots[((k as i64 * step) % l) as usize])
            .collect()
    }
}

/// `exp(2*pi*i*j/L)` for `j in 0..L`.
pub(crate) fn roots_of_unity(period: u32) -> Vec<C64> {
    let l = period as f64;
    (0..period)
        .map(|j| {
            if j == 0 {
                C64::new(1.0, 0.0)
            } else {
                C64::from_polar(1.0, TAU * j as f64 / l)
            }
        })
        .collect()
}

pub fn fpe_base<R: Rng + ?Sized>(dim: usize, period: u32, rng: &mut R) -> Result<FpeBase> {
    FpeBase::random(dim, period, rng)
}

pub fn fpe_power(base: &FpeBase, x: i64) -> PhasorVector {
    base.power(x)
}
