//! Letter raster fixtures: one binary PGM (`P5`, maxval <= 255) per capital letter.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::{Grid, Image};

pub const LETTERS: [char; 26] = [
    'A', 'B', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'J', 'K', 'L', 'M', 'N', 'O', 'P', 'Q', 'R', 'S', 'T', 'U', 'V',
    'W', 'X', 'Y', 'Z',
];

/// Loads `A.pgm` .. `Z.pgm` from `dir`, in alphabetical order.
pub fn load_letter_assets(dir: &Path) -> Result<Vec<(String, Image)>> {
    let mut missing = Vec::new();
    let mut out = Vec::with_capacity(26);
    for c in LETTERS {
        let path = dir.join(format!("{c}.pgm"));
        if !path.is_file() {
            missing.push(c.to_string());
            continue;
        }
        out.push((c.to_string(), parse_pgm(&fs::read(&path)?, &path)?));
    }
    if !missing.is_empty() {
        return Err(Error::MissingLetters {
            dir: dir.to_path_buf(),
            missing,
        });
    }
    Ok(out)
}

/// Parses a binary PGM into `[0, 1]` values, padding to a square with black
/// below or to the right.
pub fn parse_pgm(bytes: &[u8], path: &Path) -> Result<Image> {
    let mut pos = 0;
    if bytes.get(..2) != Some(b"P5") {
        return Err(Error::parse(path, 0, "expected binary PGM magic `P5`"));
    }
    pos += 2;
    let mut fields = [0usize; 3];
    for (i, name) in ["width", "height", "maxval"].iter().enumerate() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::parse(path, start, format!("expected {name}")));
        }
        fields[i] = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(path, start, format!("{name} is out of range")))?;
    }
    let [w, h, maxval] = fields;
    if w == 0 || h == 0 {
        return Err(Error::parse(path, pos, "image has a zero dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::parse(path, pos, format!("maxval {maxval} is not in 1..=255")));
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::parse(path, pos, "expected whitespace after the header"));
    }
    pos += 1;
    let need = w.checked_mul(h).ok_or_else(|| Error::parse(path, pos, "dimensions overflow"))?;
    let have = bytes.len() - pos;
    if have < need {
        return Err(Error::parse(
            path,
            pos,
            format!("truncated pixels: need {need} bytes, {have} available ({} missing)", need - have),
        ));
    }
    let side = w.max(h);
    let mut g = Grid::zeros(side);
    for y in 0..h {
        for x in 0..w {
            g.set(x, y, bytes[pos + y * w + x] as f64 / maxval as f64);
        }
    }
    Ok(g)
}

/// Binary PGM with maxval 255; values are clamped to `[0, 1]`.
pub fn encode_pgm(image: &Image) -> Vec<u8> {
    let side = image.side();
    let mut out = format!("P5\n{side} {side}\n255\n").into_bytes();
    out.extend(image.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pgm(w: usize, h: usize) -> Vec<u8> {
        let mut b = format!("P5\n# made by hand\n{w} {h}\n255\n").into_bytes();
        b.extend((0..w * h).map(|i| (i * 10 % 256) as u8));
        b
    }

    #[test]
    fn parses_and_pads() {
        let g = parse_pgm(&pgm(3, 2), Path::new("x")).unwrap();
        assert_eq!(g.side(), 3);
        assert_eq!(g.get(1, 0), 10.0 / 255.0);
        assert_eq!(g.get(0, 1), 30.0 / 255.0);
        assert_eq!(g.get(2, 2), 0.0);
    }

    #[test]
    fn malformed_headers() {
        assert!(parse_pgm(b"P2\n1 1\n255\n\x00", Path::new("x")).is_err());
        assert!(parse_pgm(b"P5\n1 1\n256\n\x00", Path::new("x")).is_err());
        let full = pgm(4, 4);
        match parse_pgm(&full[..full.len() - 3], Path::new("x")) {
            Err(Error::Parse { msg, .. }) => assert!(msg.contains("3 missing"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn writer_round_trips_bytes() {
        let g = parse_pgm(&pgm(4, 4), Path::new("x")).unwrap();
        assert_eq!(parse_pgm(&encode_pgm(&g), Path::new("x")).unwrap(), g);
    }

    #[test]
    fn directory_loading() {
        let dir = tempfile::tempdir().unwrap();
        match load_letter_assets(dir.path()) {
            Err(Error::MissingLetters { missing, .. }) => assert_eq!(missing.len(), 26),
            other => panic!("{other:?}"),
        }
        for c in LETTERS.iter().filter(|&&c| c != 'Q') {
            fs::write(dir.path().join(format!("{c}.pgm")), pgm(4, 5)).unwrap();
        }
        match load_letter_assets(dir.path()) {
            Err(Error::MissingLetters { missing, .. }) => assert_eq!(missing, vec!["Q".to_string()]),
            other => panic!("{other:?}"),
        }
        fs::write(dir.path().join("Q.pgm"), pgm(4, 5)).unwrap();
        let all = load_letter_assets(dir.path()).unwrap();
        assert_eq!(all.len(), 26);
        assert_eq!(all[16].0, "Q");
        assert_eq!(all[0].1.side(), 5);
    }
}
