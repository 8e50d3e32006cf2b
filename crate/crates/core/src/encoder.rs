//! Scene vectors from feature maps or pixels, object templates, and the
//! H / V / O codebooks consumed by the resonator.
//!
//! A coefficient `A_j(x, y)` contributes `A_j(x, y) * h(x) . v(y) . b(j)`,
//! where `h` and `v` are FPE vectors with period `L` and `b(j)` is a random
//! phasor per filter. A pixel `I(x, y)` contributes `I(x, y) * h(x) . v(y)`.
//! Circularly shifting the input by `(dx, dy)` binds the result with
//! `h(dx) . v(dy)`, which is what makes factorization by position possible.

use std::cell::OnceCell;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::error::{check_dims, Error, Result};
use crate::hd::{normalize, random_phasor, roots_of_unity, Codebook, ComplexVector, FpeBase, Hypervector, PhasorVector, C64};
use crate::sparse::{infer_maps, Dictionary, FeatureMaps, Fft2, Grid, Image, SparseConfig};

/// Coefficients and pixels with magnitude below this are skipped.
pub const SKIP_BELOW: f64 = 1e-8;

/// Random vectors shared by every encoding of one experiment.
#[derive(Clone, Debug)]
pub struct EncoderContext {
    h_base: FpeBase,
    v_base: FpeBase,
    basis: Codebook,
    roots: Vec<C64>,
}

impl EncoderContext {
    pub fn new(h_base: FpeBase, v_base: FpeBase, basis: Codebook) -> Result<Self> {
        if h_base.period() != v_base.period() {
            return Err(Error::invalid(format!(
                "h and v periods differ ({} vs {})",
                h_base.period(),
                v_base.period()
            )));
        }
        check_dims(h_base.dim(), v_base.dim())?;
        check_dims(h_base.dim(), basis.dim())?;
        let roots = roots_of_unity(h_base.period());
        Ok(Self {
            h_base,
            v_base,
            basis,
            roots,
        })
    }

    /// Draws `h`, then `v`, then the `n` basis phasors from `rng`.
    pub fn random<R: Rng + ?Sized>(dim: usize, side: usize, n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("need at least one basis vector"));
        }
        let period = u32::try_from(side).map_err(|_| Error::invalid("side too large"))?;
        let h = FpeBase::random(dim, period, rng)?;
        let v = FpeBase::random(dim, period, rng)?;
        let basis = (0..n)
            .map(|_| random_phasor(dim, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(h, v, Codebook::indexed(basis)?)
    }

    pub fn dim(&self) -> usize {
        self.h_base.dim()
    }

    /// Scene side `L`, equal to the FPE period.
    pub fn side(&self) -> usize {
        self.h_base.period() as usize
    }

    pub fn h_base(&self) -> &FpeBase {
        &self.h_base
    }

    pub fn v_base(&self) -> &FpeBase {
        &self.v_base
    }

    pub fn basis(&self) -> &Codebook {
        &self.basis
    }

    /// `h(x) . v(y)`
    pub fn position(&self, x: i64, y: i64) -> PhasorVector {
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        self.accumulate_position(&mut out, x, y, 1.0);
        PhasorVector::from_unit(out)
    }

    /// Binds `v` with `h(dx) . v(dy)`.
    pub fn shift_vector<V: Hypervector + ?Sized>(&self, v: &V, dx: i64, dy: i64) -> Result<ComplexVector> {
        check_dims(self.dim(), v.dim())?;
        ComplexVector::new(v.components().to_vec()).bind(&self.position(dx, dy))
    }

    fn accumulate_position(&self, out: &mut [C64], x: i64, y: i64, w: f64) {
        let l = self.h_base.period() as u64;
        let x = x.rem_euclid(l as i64) as u64;
        let y = y.rem_euclid(l as i64) as u64;
        let kh = self.h_base.indices();
        let kv = self.v_base.indices();
        for ((o, &a), &b) in out.iter_mut().zip(kh).zip(kv) {
            let k = (a as u64 * x + b as u64 * y) % l;
            *o += self.roots[k as usize] * w;
        }
    }

    fn direct_sum(&self, out: &mut [C64], g: &Grid) {
        let side = g.side();
        for (i, &c) in g.data().iter().enumerate() {
            if c.abs() >= SKIP_BELOW {
                self.accumulate_position(out, (i % side) as i64, (i / side) as i64, c);
            }
        }
    }

    /// Rough operation counts of the direct sum against one FFT plus a gather.
    fn dense_is_cheaper(&self, nnz: usize) -> bool {
        let l = self.side() as f64;
        (nnz * self.dim()) as f64 > 8.0 * l * l * l.log2().max(1.0) + self.dim() as f64
    }

    /// The same sum read off a 2-D DFT: component `d` is the conjugate of the
    /// spectrum at frequency `(kh_d, kv_d)`, since the input is real.
    fn spectral_sum(&self, g: &Grid, fft: &Fft2) -> Vec<C64> {
        let l = self.side();
        let masked = Grid::from_fn(l, |x, y| {
            let v = g.get(x, y);
            if v.abs() < SKIP_BELOW { 0.0 } else { v }
        });
        let spec = fft.forward(&masked);
        self.h_base
            .indices()
            .iter()
            .zip(self.v_base.indices())
            .map(|(&kh, &kv)| spec[kv as usize * l + kh as usize].conj())
            .collect()
    }

    fn check_side(&self, side: usize) -> Result<()> {
        if side != self.side() {
            return Err(Error::DimMismatch {
                expected: self.side(),
                actual: side,
            });
        }
        Ok(())
    }
}

/// `sum_{j,x,y} A_j(x, y) * h(x) . v(y) . b(j)`, skipping near-zero coefficients.
pub fn encode_sparse(maps: &FeatureMaps, ctx: &EncoderContext) -> Result<ComplexVector> {
    ctx.check_side(maps.side())?;
    check_dims(ctx.basis.len(), maps.count())?;
    let d = ctx.dim();
    let mut out = vec![C64::new(0.0, 0.0); d];
    let mut acc = vec![C64::new(0.0, 0.0); d];
    let fft = OnceCell::new();
    for (j, m) in maps.maps().iter().enumerate() {
        let nnz = count_active(m);
        if nnz == 0 {
            continue;
        }
        if ctx.dense_is_cheaper(nnz) {
            acc = ctx.spectral_sum(m, fft.get_or_init(|| Fft2::new(ctx.side())));
        } else {
            acc.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
            ctx.direct_sum(&mut acc, m);
        }
        let b = ctx.basis.entries()[j].components();
        for ((o, a), bj) in out.iter_mut().zip(&acc).zip(b) {
            *o += a * bj;
        }
    }
    Ok(ComplexVector::new(out))
}

/// `sum_{x,y} I(x, y) * h(x) . v(y)`
pub fn encode_pixel(image: &Image, ctx: &EncoderContext) -> Result<ComplexVector> {
    ctx.check_side(image.side())?;
    if ctx.dense_is_cheaper(count_active(image)) {
        return Ok(ComplexVector::new(ctx.spectral_sum(image, &Fft2::new(ctx.side()))));
    }
    let mut out = vec![C64::new(0.0, 0.0); ctx.dim()];
    ctx.direct_sum(&mut out, image);
    Ok(ComplexVector::new(out))
}

fn count_active(g: &Grid) -> usize {
    g.data().iter().filter(|v| v.abs() >= SKIP_BELOW).count()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EncodingMode {
    Sparse,
    Pixel,
}

impl EncodingMode {
    pub const ALL: [EncodingMode; 2] = [EncodingMode::Sparse, EncodingMode::Pixel];

    pub fn as_str(self) -> &'static str {
        match self {
            EncodingMode::Sparse => "sparse",
            EncodingMode::Pixel => "pixel",
        }
    }
}

impl fmt::Display for EncodingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncodingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sparse" => Ok(EncodingMode::Sparse),
            "pixel" => Ok(EncodingMode::Pixel),
            other => Err(Error::Config(format!("unknown encoding `{other}`"))),
        }
    }
}

/// An object in its canonical frame together with its vector.
#[derive(Clone, Debug)]
pub struct ObjectTemplate {
    pub id: String,
    pub mode: EncodingMode,
    pub canonical_image: Image,
    /// Feature maps behind a sparse template.
    pub maps: Option<FeatureMaps>,
    /// The unnormalized encoding; the O codebook stores its phase-normalized form.
    pub vector: ComplexVector,
}

impl ObjectTemplate {
    /// Sparse template from known maps, e.g. a ground-truth code.
    pub fn from_maps(
        id: impl Into<String>,
        canonical_image: Image,
        maps: FeatureMaps,
        ctx: &EncoderContext,
    ) -> Result<Self> {
        let id = id.into();
        let vector = encode_sparse(&maps, ctx)?;
        check_degenerate(&id, &vector)?;
        Ok(Self {
            id,
            mode: EncodingMode::Sparse,
            canonical_image,
            maps: Some(maps),
            vector,
        })
    }

    /// Pixel template of an image that is already in its canonical frame.
    pub fn from_pixels(id: impl Into<String>, canonical_image: Image, ctx: &EncoderContext) -> Result<Self> {
        let id = id.into();
        let vector = encode_pixel(&canonical_image, ctx)?;
        check_degenerate(&id, &vector)?;
        Ok(Self {
            id,
            mode: EncodingMode::Pixel,
            canonical_image,
            maps: None,
            vector,
        })
    }

    pub fn dim(&self) -> usize {
        self.vector.dim()
    }
}

fn check_degenerate(id: &str, v: &ComplexVector) -> Result<()> {
    if v.is_zero() {
        return Err(Error::DegenerateTemplate(id.to_string()));
    }
    if !v.is_finite() {
        return Err(Error::NumericFailure(format!(
            "template `{id}` has non-finite components"
        )));
    }
    Ok(())
}

/// Moves the bounding box of `object` to the top-left corner of an `L x L` frame.
pub fn canonicalize(object: &Image, side: usize) -> Result<Image> {
    let Some((x0, y0, x1, y1)) = object.bounding_box() else {
        return Err(Error::DegenerateTemplate("<empty image>".into()));
    };
    let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
    if w > side || h > side {
        return Err(Error::invalid(format!(
            "object of {w}x{h} pixels does not fit a {side}x{side} frame"
        )));
    }
    let mut out = Grid::zeros(side);
    for y in 0..h {
        for x in 0..w {
            out.set(x, y, object.get(x0 + x, y0 + y));
        }
    }
    Ok(out)
}

/// Encodes an object that is already in its canonical frame.
///
/// Sparse mode infers its feature maps with `dict`; pixel mode ignores `dict`.
pub fn make_object_template(
    id: impl Into<String>,
    object_image: &Image,
    dict: &Dictionary,
    ctx: &EncoderContext,
    cfg: &SparseConfig,
    mode: EncodingMode,
) -> Result<ObjectTemplate> {
    ctx.check_side(object_image.side())?;
    match mode {
        EncodingMode::Pixel => ObjectTemplate::from_pixels(id, object_image.clone(), ctx),
        EncodingMode::Sparse => {
            let maps = infer_maps(object_image, dict, cfg)?;
            ObjectTemplate::from_maps(id, object_image.clone(), maps, ctx)
        }
    }
}

/// Codebooks for horizontal position, vertical position and object identity.
#[derive(Clone, Debug)]
pub struct Codebooks {
    pub h: Codebook,
    pub v: Codebook,
    pub o: Codebook,
}

impl Codebooks {
    pub fn new(h: Codebook, v: Codebook, o: Codebook) -> Result<Self> {
        check_dims(h.dim(), v.dim())?;
        check_dims(h.dim(), o.dim())?;
        Ok(Self { h, v, o })
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    /// `L * L * K`
    pub fn search_space(&self) -> usize {
        self.h.len() * self.v.len() * self.o.len()
    }
}

/// `H = [h^0 .. h^(L-1)]`, `V` likewise, `O` = phase-normalized templates.
pub fn build_codebooks(ctx: &EncoderContext, templates: &[ObjectTemplate]) -> Result<Codebooks> {
    if templates.is_empty() {
        return Err(Error::invalid("need at least one object template"));
    }
    for t in templates {
        check_dims(ctx.dim(), t.dim())?;
    }
    let entries = templates.iter().map(|t| normalize(&t.vector)).collect();
    let labels = templates.iter().map(|t| t.id.clone()).collect();
    Codebooks::new(
        Codebook::from_fpe(&ctx.h_base),
        Codebook::from_fpe(&ctx.v_base),
        Codebook::new(entries, labels)?,
    )
}

/// `H[x] . V[y] . O[k]`
pub fn compose_query(x: usize, y: usize, k: usize, cbs: &Codebooks) -> Result<ComplexVector> {
    fn get<'a>(cb: &'a Codebook, i: usize, name: &str) -> Result<&'a PhasorVector> {
        cb.entry(i)
            .ok_or_else(|| Error::invalid(format!("{name} index {i} out of range 0..{}", cb.len())))
    }
    let h = get(&cbs.h, x, "x")?;
    let v = get(&cbs.v, y, "y")?;
    let o = get(&cbs.o, k, "k")?;
    Ok(h.bind(v)?.bind(o)?.into_complex())
}

/// Writes `key=value` metadata for a template set.
pub fn write_template_sidecar(path: &Path, templates: &[ObjectTemplate]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "count={}", templates.len())?;
    for (k, t) in templates.iter().enumerate() {
        writeln!(out, "template.{k}.id={}", t.id)?;
        writeln!(out, "template.{k}.mode={}", t.mode)?;
        writeln!(out, "template.{k}.origin=0,0")?;
        writeln!(out, "template.{k}.side={}", t.canonical_image.side())?;
    }
    out.flush()?;
    Ok(())
}
