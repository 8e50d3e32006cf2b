//! `CSCD` (dictionary) and `CSCA` (feature maps) binary containers.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "CSCD" or "CSCA"
//! 4       2     version (u16 LE, currently 1)
//! 6       4     n, number of filters / maps (u32 LE)
//! 10      4     side: P for CSCD, L for CSCA (u32 LE)
//! 14      ...   n * side * side f64 LE, grid-major, each grid row-major
//! ```

use std::fs;
use std::path::Path;

use super::{Dictionary, FeatureMaps, Grid};
use crate::error::{Error, Result};
use crate::io::{put_f64, put_u16, put_u32, to_u32, ByteReader};

pub const DICT_MAGIC: &[u8; 4] = b"CSCD";
pub const MAPS_MAGIC: &[u8; 4] = b"CSCA";
pub const VERSION: u16 = 1;

fn encode_grids(magic: &[u8; 4], grids: &[Grid]) -> Result<Vec<u8>> {
    let side = grids[0].side();
    let mut out = Vec::with_capacity(14 + grids.len() * side * side * 8);
    out.extend_from_slice(magic);
    put_u16(&mut out, VERSION);
    put_u32(&mut out, to_u32(grids.len(), "count")?);
    put_u32(&mut out, to_u32(side, "side")?);
    for g in grids {
        for &v in g.data() {
            put_f64(&mut out, v);
        }
    }
    Ok(out)
}

fn decode_grids(magic: &[u8; 4], bytes: &[u8], path: &Path) -> Result<Vec<Grid>> {
    let mut r = ByteReader::new(bytes, path);
    r.expect_magic(magic)?;
    let version = r.u16_le("version")?;
    if version != VERSION {
        return Err(r.err(format!("unsupported version {version}")));
    }
    let n = r.u32_le("count")? as usize;
    let side = r.u32_le("side")? as usize;
    if n == 0 || side == 0 {
        return Err(r.err("count and side must be >= 1"));
    }
    let per = side
        .checked_mul(side)
        .ok_or_else(|| r.err("side overflows"))?;
    r.require(n.saturating_mul(per), 8, "grid payload")?;
    let mut grids = Vec::with_capacity(n);
    for _ in 0..n {
        let mut data = Vec::with_capacity(per);
        for _ in 0..per {
            data.push(r.f64_le("value")?);
        }
        grids.push(Grid::from_vec(side, data).map_err(|e| r.err(e.to_string()))?);
    }
    r.finish()?;
    Ok(grids)
}

pub fn encode_dictionary(dict: &Dictionary) -> Result<Vec<u8>> {
    encode_grids(DICT_MAGIC, dict.filters())
}

pub fn decode_dictionary(bytes: &[u8], path: &Path) -> Result<Dictionary> {
    let grids = decode_grids(DICT_MAGIC, bytes, path)?;
    Dictionary::new(grids).map_err(|e| match e {
        Error::InvalidArgument(msg) => Error::parse(path, 14, msg),
        other => other,
    })
}

pub fn encode_maps(maps: &FeatureMaps) -> Result<Vec<u8>> {
    encode_grids(MAPS_MAGIC, maps.maps())
}

pub fn decode_maps(bytes: &[u8], path: &Path) -> Result<FeatureMaps> {
    FeatureMaps::new(decode_grids(MAPS_MAGIC, bytes, path)?)
}

pub fn save_dictionary(path: &Path, dict: &Dictionary) -> Result<()> {
    fs::write(path, encode_dictionary(dict)?)?;
    Ok(())
}

pub fn load_dictionary(path: &Path) -> Result<Dictionary> {
    decode_dictionary(&fs::read(path)?, path)
}

pub fn save_maps(path: &Path, maps: &FeatureMaps) -> Result<()> {
    fs::write(path, encode_maps(maps)?)?;
    Ok(())
}

pub fn load_maps(path: &Path) -> Result<FeatureMaps> {
    decode_maps(&fs::read(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn header_is_exact() {
        let d = Dictionary::new(vec![Grid::from_vec(1, vec![1.0]).unwrap()]).unwrap();
        let b = encode_dictionary(&d).unwrap();
        assert_eq!(&b[..14], b"CSCD\x01\x00\x01\x00\x00\x00\x01\x00\x00\x00");
        assert_eq!(&b[14..], &1.0f64.to_le_bytes());
    }

    #[test]
    fn wrong_magic_and_truncation() {
        let d = Dictionary::random(2, 3, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let b = encode_dictionary(&d).unwrap();
        assert!(decode_maps(&b, Path::new("x")).is_err());
        match decode_dictionary(&b[..b.len() - 3], Path::new("x")) {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("3 missing")),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn dictionary_round_trip(seed in any::<u64>(), n in 1usize..5, p in 1usize..7) {
            let d = Dictionary::random(n, p, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let back = decode_dictionary(&encode_dictionary(&d).unwrap(), Path::new("x")).unwrap();
            prop_assert_eq!(back, d);
        }

        #[test]
        fn maps_round_trip(vals in proptest::collection::vec(-5.0f64..5.0, 18)) {
            let maps = FeatureMaps::from_flat(2, 3, &vals).unwrap();
            let back = decode_maps(&encode_maps(&maps).unwrap(), Path::new("x")).unwrap();
            prop_assert_eq!(back, maps);
        }
    }
}
