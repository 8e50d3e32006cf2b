//! `VSAC` binary container for codebooks and FPE bases.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "VSAC"
//! 4       2     version (u16 LE, currently 1)
//! 6       4     dim D (u32 LE)
//! 10      4     count M (u32 LE); 0 marks an FPE base
//! 14      4     period L (u32 LE); 0 if the codebook is not FPE-derived
//! 18      ...   M >= 1: M*D pairs of f64 LE (re, im), entry-major
//!               M == 0: D phase indices, u32 LE, each < L
//! ```
//!
//! Scene vectors use the same layout with arbitrary complex entries and
//! period 0; only [`decode_vectors`] accepts entries off the unit circle.

use std::fs;
use std::path::Path;

use super::{Codebook, ComplexVector, FpeBase, Hypervector, PhasorVector, C64};
use crate::error::Result;
use crate::io::{put_f64, put_u16, put_u32, to_u32, ByteReader};

pub const MAGIC: &[u8; 4] = b"VSAC";
pub const VERSION: u16 = 1;

pub fn encode_codebook(cb: &Codebook) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(18 + cb.len() * cb.dim() * 16);
    out.extend_from_slice(MAGIC);
    put_u16(&mut out, VERSION);
    put_u32(&mut out, to_u32(cb.dim(), "dim")?);
    put_u32(&mut out, to_u32(cb.len(), "count")?);
    put_u32(&mut out, cb.fpe_base().map_or(0, |b| b.period()));
    for e in cb.entries() {
        for c in e.components() {
            put_f64(&mut out, c.re);
            put_f64(&mut out, c.im);
        }
    }
    Ok(out)
}

pub fn encode_fpe_base(base: &FpeBase) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(18 + base.dim() * 4);
    out.extend_from_slice(MAGIC);
    put_u16(&mut out, VERSION);
    put_u32(&mut out, to_u32(base.dim(), "dim")?);
    put_u32(&mut out, 0);
    put_u32(&mut out, base.period());
    for &k in base.indices() {
        put_u32(&mut out, k);
    }
    Ok(out)
}

/// Either payload a `VSAC` file can hold.
#[derive(Clone, Debug)]
pub enum Container {
    Codebook(Codebook),
    FpeBase(FpeBase),
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Container> {
    let mut r = ByteReader::new(bytes, path);
    r.expect_magic(MAGIC)?;
    let version = r.u16_le("version")?;
    if version != VERSION {
        return Err(r.err(format!("unsupported version {version}")));
    }
    let dim = r.u32_le("dim")? as usize;
    let count = r.u32_le("count")? as usize;
    let period = r.u32_le("period")?;
    if dim == 0 {
        return Err(r.err("dim must be >= 1"));
    }
    if count == 0 {
        r.require(dim, 4, "phase indices")?;
        let mut indices = Vec::with_capacity(dim);
        for _ in 0..dim {
            let at = r.pos();
            let k = r.u32_le("phase index")?;
            if k >= period {
                return Err(crate::error::Error::parse(
                    path,
                    at,
                    format!("phase index {k} >= period {period}"),
                ));
            }
            indices.push(k);
        }
        r.finish()?;
        return Ok(Container::FpeBase(FpeBase::from_indices(indices, period)?));
    }
    r.require(count.saturating_mul(dim), 16, "codebook payload")?;
    let mut entries = Vec::with_capacity(count);
    for m in 0..count {
        let at = r.pos();
        let mut comps = Vec::with_capacity(dim);
        for _ in 0..dim {
            let re = r.f64_le("re")?;
            let im = r.f64_le("im")?;
            comps.push(C64::new(re, im));
        }
        let v = PhasorVector::new(comps)
            .map_err(|e| crate::error::Error::parse(path, at, format!("entry {m}: {e}")))?;
        entries.push(v);
    }
    r.finish()?;
    let cb = Codebook::indexed(entries)?;
    if period != 0 {
        // recover the integer phase indices from entry 1 so the fast projection path survives a round trip
        if let Some(base) = recover_fpe(&cb, period) {
            if let Some(with) = cb.clone().with_fpe(base) {
                return Ok(Container::Codebook(with));
            }
        }
    }
    Ok(Container::Codebook(cb))
}

fn recover_fpe(cb: &Codebook, period: u32) -> Option<FpeBase> {
    if period == 1 {
        return FpeBase::from_indices(vec![0; cb.dim()], 1).ok();
    }
    let e1 = cb.entry(1)?;
    let l = period as f64;
    let indices = e1
        .components()
        .iter()
        .map(|c| {
            let k = (c.arg() * l / std::f64::consts::TAU).round() as i64;
            k.rem_euclid(period as i64) as u32
        })
        .collect();
    FpeBase::from_indices(indices, period).ok()
}

pub fn encode_vectors(vectors: &[ComplexVector]) -> Result<Vec<u8>> {
    let first = vectors
        .first()
        .ok_or_else(|| crate::error::Error::invalid("need at least one vector"))?;
    let dim = first.dim();
    for v in vectors {
        crate::error::check_dims(dim, v.dim())?;
    }
    let mut out = Vec::with_capacity(18 + vectors.len() * dim * 16);
    out.extend_from_slice(MAGIC);
    put_u16(&mut out, VERSION);
    put_u32(&mut out, to_u32(dim, "dim")?);
    put_u32(&mut out, to_u32(vectors.len(), "count")?);
    put_u32(&mut out, 0);
    for v in vectors {
        for c in v.components() {
            put_f64(&mut out, c.re);
            put_f64(&mut out, c.im);
        }
    }
    Ok(out)
}

/// Reads the entries of a codebook-layout file without requiring unit modulus.
pub fn decode_vectors(bytes: &[u8], path: &Path) -> Result<Vec<ComplexVector>> {
    let mut r = ByteReader::new(bytes, path);
    r.expect_magic(MAGIC)?;
    let version = r.u16_le("version")?;
    if version != VERSION {
        return Err(r.err(format!("unsupported version {version}")));
    }
    let dim = r.u32_le("dim")? as usize;
    let count = r.u32_le("count")? as usize;
    r.u32_le("period")?;
    if dim == 0 || count == 0 {
        return Err(r.err("expected dim >= 1 and count >= 1"));
    }
    r.require(count.saturating_mul(dim), 16, "vector payload")?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut comps = Vec::with_capacity(dim);
        for _ in 0..dim {
            let at = r.pos();
            let c = C64::new(r.f64_le("re")?, r.f64_le("im")?);
            if !c.is_finite() {
                return Err(crate::error::Error::parse(path, at, "non-finite component"));
            }
            comps.push(c);
        }
        out.push(ComplexVector::new(comps));
    }
    r.finish()?;
    Ok(out)
}

pub fn save_vectors(path: &Path, vectors: &[ComplexVector]) -> Result<()> {
    fs::write(path, encode_vectors(vectors)?)?;
    Ok(())
}

pub fn load_vectors(path: &Path) -> Result<Vec<ComplexVector>> {
    decode_vectors(&fs::read(path)?, path)
}

pub fn save_codebook(path: &Path, cb: &Codebook) -> Result<()> {
    fs::write(path, encode_codebook(cb)?)?;
    Ok(())
}

pub fn save_fpe_base(path: &Path, base: &FpeBase) -> Result<()> {
    fs::write(path, encode_fpe_base(base)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Container> {
    let bytes = fs::read(path)?;
    decode(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::hd::random_phasor;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn raw_vectors_round_trip() {
        let v = ComplexVector::new(vec![C64::new(2.5, -1.0), C64::new(0.0, 0.0)]);
        let bytes = encode_vectors(std::slice::from_ref(&v)).unwrap();
        assert_eq!(decode_vectors(&bytes, p()).unwrap(), vec![v]);
        assert!(decode(&bytes, p()).is_err());
        assert!(decode_vectors(&bytes[..bytes.len() - 1], p()).is_err());
        let cb = Codebook::indexed(vec![PhasorVector::ones(3)]).unwrap();
        let back = decode_vectors(&encode_codebook(&cb).unwrap(), p()).unwrap();
        assert_eq!(back[0], PhasorVector::ones(3).to_complex());
    }

    #[test]
    fn header_layout_is_exact() {
        let base = FpeBase::from_indices(vec![1, 0, 2], 3).unwrap();
        let bytes = encode_fpe_base(&base).unwrap();
        assert_eq!(
            bytes,
            [
                b'V', b'S', b'A', b'C', 1, 0, 3, 0, 0, 0, 0, 0, 0, 0, 3, 0, 0, 0, 1, 0, 0, 0, 0, 0,
                0, 0, 2, 0, 0, 0
            ]
        );
        let cb = Codebook::indexed(vec![PhasorVector::ones(1)]).unwrap();
        let bytes = encode_codebook(&cb).unwrap();
        assert_eq!(bytes.len(), 18 + 16);
        assert_eq!(&bytes[18..26], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[26..34], &0.0f64.to_le_bytes());
    }

    #[test]
    fn fpe_codebook_round_trip_keeps_fast_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let base = FpeBase::random(64, 10, &mut rng).unwrap();
        let cb = Codebook::from_fpe(&base);
        let bytes = encode_codebook(&cb).unwrap();
        match decode(&bytes, p()).unwrap() {
            Container::Codebook(back) => {
                assert_eq!(back.fpe_base(), Some(&base));
                assert_eq!(back.entries(), cb.entries());
            }
            _ => panic!("expected codebook"),
        }
    }

    #[test]
    fn bad_magic_and_truncation() {
        let cb = Codebook::indexed(vec![PhasorVector::ones(4)]).unwrap();
        let mut bytes = encode_codebook(&cb).unwrap();
        let short = &bytes[..bytes.len() - 5];
        match decode(short, p()) {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("5 missing"), "{msg}"),
            other => panic!("{other:?}"),
        }
        bytes[0] = b'X';
        match decode(&bytes, p()) {
            Err(Error::Parse { offset, msg, .. }) => {
                assert_eq!(offset, 0);
                assert!(msg.contains("VSAC"));
            }
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn codebook_round_trip(seed in any::<u64>(), dim in 1usize..40, count in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let entries: Vec<_> = (0..count).map(|_| random_phasor(dim, &mut rng).unwrap()).collect();
            let cb = Codebook::indexed(entries).unwrap();
            let bytes = encode_codebook(&cb).unwrap();
            match decode(&bytes, p()).unwrap() {
                Container::Codebook(back) => prop_assert_eq!(back.entries(), cb.entries()),
                _ => prop_assert!(false),
            }
        }

        #[test]
        fn fpe_base_round_trip(seed in any::<u64>(), dim in 1usize..60, period in 1u32..50) {
            let base = FpeBase::random(dim, period, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            match decode(&encode_fpe_base(&base).unwrap(), p()).unwrap() {
                Container::FpeBase(back) => prop_assert_eq!(back, base),
                _ => prop_assert!(false),
            }
        }
    }
}
