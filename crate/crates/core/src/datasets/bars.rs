use std::collections::HashSet;

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::sparse::{reconstruct, Dictionary, FeatureMaps, Grid, Image};

/// Bar length and shape frame side.
pub const BAR_LEN: usize = 8;
pub const SHAPE_SIDE: usize = 8;

/// Filter 0 is the vertical bar, filter 1 the horizontal bar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orientation {
    Vertical,
    Horizontal,
}

impl Orientation {
    pub fn filter(self) -> usize {
        match self {
            Orientation::Vertical => 0,
            Orientation::Horizontal => 1,
        }
    }
}

/// A bar whose top-left pixel is at `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bar {
    pub orientation: Orientation,
    pub x: usize,
    pub y: usize,
}

/// Two 1-pixel-wide bars of length 8 crossing at the origin, each of unit norm.
pub fn bars_dictionary() -> Dictionary {
    let v = 1.0 / (BAR_LEN as f64).sqrt();
    let vertical = Grid::from_fn(BAR_LEN, |x, _| if x == 0 { v } else { 0.0 });
    let horizontal = Grid::from_fn(BAR_LEN, |_, y| if y == 0 { v } else { 0.0 });
    Dictionary::new(vec![vertical, horizontal]).expect("bar filters have unit norm")
}

/// A binary shape in an 8 x 8 frame with its exact sparse code.
#[derive(Clone, Debug, PartialEq)]
pub struct BarsShape {
    pub grid: Image,
    pub bars: Vec<Bar>,
    /// Coefficient `sqrt(8)` per bar, so every bar pixel reconstructs to 1.
    pub maps: FeatureMaps,
}

impl BarsShape {
    /// Builds the shape and moves its bounding box to the origin.
    pub fn from_bars(bars: &[Bar]) -> Result<Self> {
        if bars.is_empty() {
            return Err(Error::invalid("a bars shape needs at least one bar"));
        }
        for b in bars {
            let fits = match b.orientation {
                Orientation::Vertical => b.x < SHAPE_SIDE && b.y + BAR_LEN <= SHAPE_SIDE,
                Orientation::Horizontal => b.y < SHAPE_SIDE && b.x + BAR_LEN <= SHAPE_SIDE,
            };
            if !fits {
                return Err(Error::invalid(format!("{b:?} leaves the {SHAPE_SIDE}x{SHAPE_SIDE} frame")));
            }
        }
        let raw = Self::build(bars.to_vec());
        let (x0, y0, _, _) = raw.grid.bounding_box().expect("non-empty shape");
        let mut moved: Vec<Bar> = bars
            .iter()
            .map(|b| Bar {
                orientation: b.orientation,
                x: b.x - x0,
                y: b.y - y0,
            })
            .collect();
        moved.sort();
        moved.dedup();
        Ok(Self::build(moved))
    }

    fn build(bars: Vec<Bar>) -> Self {
        let mut maps = FeatureMaps::zeros(2, SHAPE_SIDE);
        let c = (BAR_LEN as f64).sqrt();
        for b in &bars {
            maps.maps_mut()[b.orientation.filter()].set(b.x, b.y, c);
        }
        let recon = reconstruct(&bars_dictionary(), &maps).expect("matching shapes");
        // crossings reconstruct to 2; the shape itself is binary
        let grid = Grid::from_fn(SHAPE_SIDE, |x, y| if recon.get(x, y) > 0.5 { 1.0 } else { 0.0 });
        Self { grid, bars, maps }
    }
}

/// Every distinct canonical shape made of `bars_per_shape` distinct bars, in a fixed order.
pub fn all_bars_shapes(bars_per_shape: usize) -> Result<Vec<BarsShape>> {
    if !(1..=3).contains(&bars_per_shape) {
        return Err(Error::invalid(format!("bars per shape must be 1..=3, got {bars_per_shape}")));
    }
    let lines: Vec<Bar> = (0..SHAPE_SIDE)
        .map(|x| Bar {
            orientation: Orientation::Vertical,
            x,
            y: 0,
        })
        .chain((0..SHAPE_SIDE).map(|y| Bar {
            orientation: Orientation::Horizontal,
            x: 0,
            y,
        }))
        .collect();
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut pick = Vec::with_capacity(bars_per_shape);
    combos(&lines, bars_per_shape, 0, &mut pick, &mut |bars| {
        let shape = BarsShape::from_bars(bars).expect("lines fit the frame");
        let key: Vec<u8> = shape.grid.data().iter().map(|&v| v as u8).collect();
        if seen.insert(key) {
            out.push(shape);
        }
    });
    Ok(out)
}

fn combos(items: &[Bar], k: usize, start: usize, pick: &mut Vec<Bar>, f: &mut dyn FnMut(&[Bar])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in start..items.len() {
        pick.push(items[i]);
        combos(items, k, i + 1, pick, f);
        pick.pop();
    }
}

/// `count` distinct shapes drawn without replacement from [`all_bars_shapes`].
pub fn gen_bars_shapes<R: Rng + ?Sized>(count: usize, bars_per_shape: usize, rng: &mut R) -> Result<Vec<BarsShape>> {
    if count == 0 {
        return Err(Error::invalid("need at least one shape"));
    }
    let pool = all_bars_shapes(bars_per_shape)?;
    if count > pool.len() {
        return Err(Error::invalid(format!(
            "only {} distinct shapes exist with {bars_per_shape} bars, asked for {count}",
            pool.len()
        )));
    }
    Ok(sample(rng, pool.len(), count).into_iter().map(|i| pool[i].clone()).collect())
}
