//! Complex phasor hypervectors.
//!
//! Two vector kinds share one algebra: [`PhasorVector`] holds unit-modulus
//! components only (codewords, factor estimates), [`ComplexVector`] holds
//! arbitrary complex components (bundles, scene vectors). Binding is the
//! Hadamard product, unbinding is binding with the conjugate, and
//! similarity is the Hermitian inner product divided by the dimension.

mod codebook;
pub mod container;
mod fpe;

pub use codebook::Codebook;
pub use fpe::{fpe_base, fpe_power, FpeBase};
pub(crate) use fpe::roots_of_unity;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{check_dims, Error, Result};

pub type C64 = Complex64;

/// Tolerance on |z| = 1 for phasor components.
pub const UNIT_TOL: f64 = 1e-9;

/// Anything that exposes a fixed-length slice of complex components.
pub trait Hypervector {
    fn components(&self) -> &[C64];

    fn dim(&self) -> usize {
        self.components().len()
    }
}

/// A vector of unit-modulus complex components.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasorVector {
    components: Vec<C64>,
}

/// A vector of unconstrained complex components.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVector {
    components: Vec<C64>,
}

impl Hypervector for PhasorVector {
    fn components(&self) -> &[C64] {
        &self.components
    }
}

impl Hypervector for ComplexVector {
    fn components(&self) -> &[C64] {
        &self.components
    }
}

impl PhasorVector {
    /// Builds a phasor vector, rejecting components off the unit circle.
    pub fn new(components: Vec<C64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("phasor vector must have dim >= 1"));
        }
        if let Some((d, c)) = components
            .iter()
            .enumerate()
            .find(|(_, c)| !((c.norm() - 1.0).abs() <= UNIT_TOL))
        {
            return Err(Error::invalid(format!(
                "component {d} has modulus {} (expected 1)",
                c.norm()
            )));
        }
        Ok(Self { components })
    }

    pub fn from_phases(phases: &[f64]) -> Result<Self> {
        Self::new(phases.iter().map(|&w| C64::from_polar(1.0, w)).collect())
    }

    pub(crate) fn from_unit(components: Vec<C64>) -> Self {
        debug_assert!(components.iter().all(|c| (c.norm() - 1.0).abs() < 1e-6));
        Self { components }
    }

    pub fn ones(dim: usize) -> Self {
        Self {
            components: vec![C64::new(1.0, 0.0); dim],
        }
    }

    pub fn bind(&self, other: &PhasorVector) -> Result<PhasorVector> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self::from_unit(hadamard(&self.components, &other.components)))
    }

    pub fn conj(&self) -> PhasorVector {
        Self::from_unit(self.components.iter().map(|c| c.conj()).collect())
    }

    pub fn phases(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.arg()).collect()
    }

    pub fn to_complex(&self) -> ComplexVector {
        ComplexVector {
            components: self.components.clone(),
        }
    }

    pub fn into_complex(self) -> ComplexVector {
        ComplexVector {
            components: self.components,
        }
    }
}

impl ComplexVector {
    pub fn new(components: Vec<C64>) -> Self {
        Self { components }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            components: vec![C64::new(0.0, 0.0); dim],
        }
    }

    pub fn components_mut(&mut self) -> &mut [C64] {
        &mut self.components
    }

    pub fn into_components(self) -> Vec<C64> {
        self.components
    }

    pub fn bind<V: Hypervector + ?Sized>(&self, other: &V) -> Result<ComplexVector> {
        check_dims(self.dim(), other.dim())?;
        Ok(Self::new(hadamard(&self.components, other.components())))
    }

    pub fn conj(&self) -> ComplexVector {
        Self::new(self.components.iter().map(|c| c.conj()).collect())
    }

    pub fn scale(&self, w: f64) -> ComplexVector {
        Self::new(self.components.iter().map(|c| c * w).collect())
    }

    /// `self += w * other`
    pub fn add_scaled<V: Hypervector + ?Sized>(&mut self, w: f64, other: &V) -> Result<()> {
        check_dims(self.dim(), other.dim())?;
        for (a, b) in self.components.iter_mut().zip(other.components()) {
            *a += b * w;
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl From<PhasorVector> for ComplexVector {
    fn from(v: PhasorVector) -> Self {
        v.into_complex()
    }
}

/// Random phasor with phases i.i.d. uniform on [-pi, pi).
pub fn random_phasor<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<PhasorVector> {
    if dim == 0 {
        return Err(Error::invalid("dim must be >= 1"));
    }
    let components = (0..dim)
        .map(|_| {
            let w = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            C64::from_polar(1.0, w)
        })
        .collect();
    Ok(PhasorVector::from_unit(components))
}

/// Component-wise product of two same-kind vectors.
pub fn bind(a: &PhasorVector, b: &PhasorVector) -> Result<PhasorVector> {
    a.bind(b)
}

pub fn conjugate(a: &PhasorVector) -> PhasorVector {
    a.conj()
}

/// Weighted component-wise sum.
pub fn bundle<'a, V, I>(terms: I) -> Result<ComplexVector>
where
    V: Hypervector + ?Sized + 'a,
    I: IntoIterator<Item = (f64, &'a V)>,
{
    let mut iter = terms.into_iter();
    let (w0, v0) = iter
        .next()
        .ok_or_else(|| Error::invalid("bundle of an empty term list"))?;
    let mut acc = ComplexVector::zeros(v0.dim());
    acc.add_scaled(w0, v0)?;
    for (w, v) in iter {
        acc.add_scaled(w, v)?;
    }
    Ok(acc)
}

/// (1/D) * sum_d a_d * conj(b_d)
pub fn similarity<A, B>(a: &A, b: &B) -> Result<C64>
where
    A: Hypervector + ?Sized,
    B: Hypervector + ?Sized,
{
    check_dims(a.dim(), b.dim())?;
    Ok(inner(a.components(), b.components()) / a.dim() as f64)
}

/// Divides every component by its modulus; exact zeros map to 1 + 0i.
pub fn normalize<V: Hypervector + ?Sized>(a: &V) -> PhasorVector {
    let mut c = a.components().to_vec();
    normalize_in_place(&mut c);
    PhasorVector::from_unit(c)
}

pub(crate) fn normalize_in_place(c: &mut [C64]) {
    for z in c.iter_mut() {
        let m = z.norm();
        *z = if m == 0.0 {
            C64::new(1.0, 0.0)
        } else {
            *z / m
        };
    }
}

pub(crate) fn hadamard(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Unnormalized Hermitian inner product sum_d a_d * conj(b_d).
pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.im * y.re - x.re * y.im;
    }
    C64::new(re, im)
}
