//! SVD whitening of template sets.
//!
//! With the data matrix `X = U S V^T` (one template per column),
//! `W = sqrt(N - 1) * U diag(1 / max(s, eps * s_max)) U^T`. Under
//! [`Centering::Mean`] the SVD is taken of the mean-subtracted matrix, and the
//! sample covariance of the centered whitened templates is the identity on
//! the data span. Under [`Centering::None`] the SVD is of `X` itself, and the
//! whitened templates are mutually orthogonal with equal norms, i.e. their
//! second-moment matrix `(1 / (N - 1)) (W X)(W X)^T` is the identity on the span.
//! Directions outside the numerical rank are dropped, so `W` is stored in its
//! factored form `(U, scales)` and never materialized as a `d x d` matrix.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dims, Error, Result};
use crate::io::{put_f64, put_u16, put_u32, to_u32, ByteReader};
use crate::sparse::{FeatureMaps, Grid, Image};

pub const DEFAULT_EPSILON: f64 = 1e-8;
pub const MAGIC: &[u8; 4] = b"WHTN";
pub const VERSION: u16 = 1;

/// Whether the template mean is removed before the SVD.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Centering {
    #[default]
    Mean,
    None,
}

impl std::str::FromStr for Centering {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mean" => Ok(Centering::Mean),
            "none" => Ok(Centering::None),
            other => Err(Error::Config(format!("unknown centering `{other}` (mean or none)"))),
        }
    }
}

/// Shape of the space a transform was fit on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Flat(usize),
    Image { side: usize },
    Maps { count: usize, side: usize },
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Flat(n) => n,
            Shape::Image { side } => side * side,
            Shape::Maps { count, side } => count * side * side,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WhiteningTransform {
    /// `d x r` orthonormal basis of the data span.
    basis: DMatrix<f64>,
    scales: Vec<f64>,
    epsilon: f64,
    shape: Shape,
}

impl WhiteningTransform {
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Number of retained directions.
    pub fn rank(&self) -> usize {
        self.scales.len()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// `W x` for a flattened vector.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dims(self.shape.len(), x.len())?;
        let v = DVector::from_column_slice(x);
        let mut c = self.basis.tr_mul(&v);
        for (ci, s) in c.iter_mut().zip(&self.scales) {
            *ci *= s;
        }
        Ok((&self.basis * c).as_slice().to_vec())
    }

    /// The dense `d x d` matrix; only sensible for small `d`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.basis.nrows(), self.rank(), |i, j| self.basis[(i, j)] * self.scales[j]);
        scaled * self.basis.transpose()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let d = self.basis.nrows();
        let r = self.rank();
        let mut out = Vec::with_capacity(32 + 8 * (r + d * r));
        out.extend_from_slice(MAGIC);
        put_u16(&mut out, VERSION);
        let (kind, count, side) = match self.shape {
            Shape::Flat(n) => (0, 1, n),
            Shape::Image { side } => (1, 1, side),
            Shape::Maps { count, side } => (2, count, side),
        };
        put_u16(&mut out, kind);
        put_u32(&mut out, to_u32(count, "count")?);
        put_u32(&mut out, to_u32(side, "side")?);
        put_u32(&mut out, to_u32(d, "rows")?);
        put_u32(&mut out, to_u32(r, "rank")?);
        put_f64(&mut out, self.epsilon);
        for &s in &self.scales {
            put_f64(&mut out, s);
        }
        for i in 0..d {
            for j in 0..r {
                put_f64(&mut out, self.basis[(i, j)]);
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut rd = ByteReader::new(bytes, path);
        rd.expect_magic(MAGIC)?;
        let version = rd.u16_le("version")?;
        if version != VERSION {
            return Err(rd.err(format!("unsupported version {version}")));
        }
        let kind = rd.u16_le("shape kind")?;
        let count = rd.u32_le("count")? as usize;
        let side = rd.u32_le("side")? as usize;
        let shape = match kind {
            0 => Shape::Flat(side),
            1 => Shape::Image { side },
            2 => Shape::Maps { count, side },
            k => return Err(rd.err(format!("unknown shape kind {k}"))),
        };
        let d = rd.u32_le("rows")? as usize;
        if d != shape.len() {
            return Err(rd.err(format!("{d} rows do not match shape of {} values", shape.len())));
        }
        let r = rd.u32_le("rank")? as usize;
        let epsilon = rd.f64_le("epsilon")?;
        rd.require(r.saturating_mul(d.saturating_add(1)), 8, "matrix payload")?;
        let scales = (0..r).map(|_| rd.f64_le("scale")).collect::<Result<Vec<_>>>()?;
        let mut vals = Vec::with_capacity(d * r);
        for _ in 0..d * r {
            vals.push(rd.f64_le("basis")?);
        }
        rd.finish()?;
        if !vals.iter().chain(&scales).all(|v| v.is_finite()) {
            return Err(Error::parse(path, 32, "non-finite matrix entries"));
        }
        Ok(Self {
            basis: DMatrix::from_row_slice(d, r, &vals),
            scales,
            epsilon,
            shape,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?, path)
    }
}

/// Fits on flattened templates; `epsilon` is relative to the largest singular value.
/// Centered fit.
pub fn fit_whitening(templates: &[Vec<f64>], epsilon: f64) -> Result<WhiteningTransform> {
    fit_whitening_with(templates, epsilon, Centering::Mean)
}

pub fn fit_whitening_with(templates: &[Vec<f64>], epsilon: f64, centering: Centering) -> Result<WhiteningTransform> {
    let len = templates.first().map(Vec::len).unwrap_or(0);
    fit_shaped(templates, epsilon, Shape::Flat(len), centering)
}

pub fn fit_whitening_images(images: &[Image], epsilon: f64, centering: Centering) -> Result<WhiteningTransform> {
    let side = images.first().map(Grid::side).unwrap_or(0);
    let flat: Vec<Vec<f64>> = images.iter().map(|g| g.data().to_vec()).collect();
    fit_shaped(&flat, epsilon, Shape::Image { side }, centering)
}

pub fn fit_whitening_maps(maps: &[FeatureMaps], epsilon: f64, centering: Centering) -> Result<WhiteningTransform> {
    let (count, side) = maps.first().map(|m| (m.count(), m.side())).unwrap_or((0, 0));
    let flat: Vec<Vec<f64>> = maps.iter().map(FeatureMaps::flatten).collect();
    fit_shaped(&flat, epsilon, Shape::Maps { count, side }, centering)
}

fn fit_shaped(templates: &[Vec<f64>], epsilon: f64, shape: Shape, centering: Centering) -> Result<WhiteningTransform> {
    let n = templates.len();
    if n < 2 {
        return Err(Error::invalid(format!("whitening needs at least 2 templates, got {n}")));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let d = shape.len();
    if d == 0 {
        return Err(Error::invalid("templates are empty"));
    }
    for t in templates {
        check_dims(d, t.len())?;
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericFailure("template has non-finite values".into()));
        }
    }
    let mut x = DMatrix::from_fn(d, n, |i, j| templates[j][i]);
    if centering == Centering::Mean {
        let mean = x.column_mean();
        for mut c in x.column_iter_mut() {
            c -= &mean;
        }
    }
    let svd = x.svd(true, false);
    let u = svd.u.ok_or_else(|| Error::NumericFailure("SVD did not return U".into()))?;
    let s = svd.singular_values;
    let s_max = s.iter().copied().fold(0.0, f64::max);
    if !(s_max > 0.0) {
        return Err(Error::NumericFailure("templates are all identical".into()));
    }
    let rank_tol = s_max * (d.max(n) as f64) * f64::EPSILON;
    let floor = s_max * epsilon;
    let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > rank_tol).collect();
    let scale0 = ((n - 1) as f64).sqrt();
    let scales: Vec<f64> = keep.iter().map(|&i| scale0 / s[i].max(floor)).collect();
    let basis = u.select_columns(&keep);
    if !scales.iter().all(|v| v.is_finite()) || basis.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericFailure("whitening transform is not finite".into()));
    }
    Ok(WhiteningTransform {
        basis,
        scales,
        epsilon,
        shape,
    })
}

pub fn apply_whitening(wt: &WhiteningTransform, x: &[f64]) -> Result<Vec<f64>> {
    wt.apply(x)
}

pub fn apply_whitening_image(wt: &WhiteningTransform, image: &Image) -> Result<Image> {
    if !side_matches(wt.shape, image.side()) {
        return Err(Error::invalid(format!(
            "transform was fit on {:?}, got an image of side {}",
            wt.shape,
            image.side()
        )));
    }
    Grid::from_vec(image.side(), wt.apply(image.data())?)
}

fn side_matches(shape: Shape, side: usize) -> bool {
    match shape {
        Shape::Image { side: s } => s == side,
        Shape::Flat(n) => n == side * side,
        Shape::Maps { .. } => false,
    }
}

pub fn apply_whitening_maps(wt: &WhiteningTransform, maps: &FeatureMaps) -> Result<FeatureMaps> {
    match wt.shape {
        Shape::Maps { count, side } if count == maps.count() && side == maps.side() => {
            FeatureMaps::from_flat(count, side, &wt.apply(&maps.flatten())?)
        }
        _ => Err(Error::invalid(format!(
            "transform was fit on {:?}, got {} maps of side {}",
            wt.shape,
            maps.count(),
            maps.side()
        ))),
    }
}

/// Sample covariance `(1 / (N - 1)) Xc Xc^T` of flattened vectors.
pub fn sample_covariance(data: &[Vec<f64>]) -> DMatrix<f64> {
    let n = data.len();
    let d = data[0].len();
    let mut x = DMatrix::from_fn(d, n, |i, j| data[j][i]);
    let mean = x.column_mean();
    for mut c in x.column_iter_mut() {
        c -= &mean;
    }
    (&x * x.transpose()) / (n - 1) as f64
}
