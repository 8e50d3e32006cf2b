//! IDX files: a big-endian magic (`0x00000803` for images, `0x00000801` for
//! labels), one big-endian u32 per dimension, then u8 payload.

use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::io::ByteReader;
use crate::sparse::{Grid, Image};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn magic(r: &mut ByteReader<'_>, want: u32) -> Result<()> {
    let at = r.pos();
    let got = r.u32_be("magic")?;
    if got != want {
        let mut e = r.err(format!("bad magic: expected {want:#010x}, found {got:#010x}"));
        if let crate::Error::Parse { offset, .. } = &mut e {
            *offset = at;
        }
        return Err(e);
    }
    Ok(())
}

/// Images scaled to `[0, 1]`; non-square images are padded to a square with black.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<Vec<Image>> {
    let mut r = ByteReader::new(bytes, path);
    magic(&mut r, IMAGES_MAGIC)?;
    let n = r.u32_be("image count")? as usize;
    let rows = r.u32_be("row count")? as usize;
    let cols = r.u32_be("column count")? as usize;
    let per = rows
        .checked_mul(cols)
        .ok_or_else(|| r.err("image dimensions overflow"))?;
    let total = n.checked_mul(per).ok_or_else(|| r.err("payload size overflows"))?;
    r.require(total, 1, "pixel payload")?;
    let side = rows.max(cols);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let px = r.take(per, "image")?;
        let mut g = Grid::zeros(side);
        for y in 0..rows {
            for x in 0..cols {
                g.set(x, y, px[y * cols + x] as f64 / 255.0);
            }
        }
        out.push(g);
    }
    r.finish()?;
    Ok(out)
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let mut r = ByteReader::new(bytes, path);
    magic(&mut r, LABELS_MAGIC)?;
    let n = r.u32_be("label count")? as usize;
    let labels = r.take(n, "label payload")?.to_vec();
    r.finish()?;
    Ok(labels)
}

pub fn load_idx(path: &Path) -> Result<Vec<Image>> {
    parse_idx_images(&fs::read(path)?, path)
}

pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    parse_idx_labels(&fs::read(path)?, path)
}
