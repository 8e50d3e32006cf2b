use crate::error::{Error, Result};

/// A square, row-major grid of reals. `x` is the column, `y` the row.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    side: usize,
    data: Vec<f64>,
}

/// Grayscale image, nominally in [0, 1].
pub type Image = Grid;

impl Grid {
    pub fn zeros(side: usize) -> Self {
        Self {
            side,
            data: vec![0.0; side * side],
        }
    }

    pub fn from_vec(side: usize, data: Vec<f64>) -> Result<Self> {
        if side == 0 {
            return Err(Error::invalid("grid side must be >= 1"));
        }
        if data.len() != side * side {
            return Err(Error::invalid(format!(
                "grid of side {side} needs {} values, got {}",
                side * side,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid values must be finite"));
        }
        Ok(Self { side, data })
    }

    /// No validation; non-finite values are caught by the solver's checks.
    pub(crate) fn from_raw(side: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), side * side);
        Self { side, data }
    }

    pub fn from_fn(side: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut g = Self::zeros(side);
        for y in 0..side {
            for x in 0..side {
                g.data[y * side + x] = f(x, y);
            }
        }
        g
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.side + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.side + x] = v;
    }

    /// Circular shift: the value at `(x, y)` moves to `(x + dx, y + dy) mod side`.
    pub fn shift(&self, dx: i64, dy: i64) -> Grid {
        let s = self.side as i64;
        let mut out = Grid::zeros(self.side);
        for y in 0..self.side {
            let ny = (y as i64 + dy).rem_euclid(s) as usize;
            for x in 0..self.side {
                let nx = (x as i64 + dx).rem_euclid(s) as usize;
                out.data[ny * self.side + nx] = self.data[y * self.side + x];
            }
        }
        out
    }

    /// Copies this grid into the top-left corner of a larger zero grid.
    pub fn embed(&self, side: usize) -> Result<Grid> {
        if side < self.side {
            return Err(Error::invalid(format!(
                "cannot embed side {} into side {side}",
                self.side
            )));
        }
        let mut out = Grid::zeros(side);
        for y in 0..self.side {
            out.data[y * side..y * side + self.side]
                .copy_from_slice(&self.data[y * self.side..(y + 1) * self.side]);
        }
        Ok(out)
    }

    /// Top-left `size x size` window.
    pub fn crop(&self, size: usize) -> Grid {
        let size = size.min(self.side);
        Grid::from_fn(size, |x, y| self.get(x, y))
    }

    /// `(x0, y0, x1, y1)` of the nonzero support, inclusive, or `None` if all zero.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for y in 0..self.side {
            for x in 0..self.side {
                if self.get(x, y) != 0.0 {
                    bb = Some(match bb {
                        None => (x, y, x, y),
                        Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
                    });
                }
            }
        }
        bb
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn l1(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &Grid) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, w: f64) -> Grid {
        Grid {
            side: self.side,
            data: self.data.iter().map(|v| v * w).collect(),
        }
    }

    pub fn add_scaled(&mut self, w: f64, other: &Grid) {
        debug_assert_eq!(self.side, other.side);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += w * b;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// `n` coefficient maps of equal side.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMaps {
    maps: Vec<Grid>,
}

impl FeatureMaps {
    pub fn new(maps: Vec<Grid>) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| Error::invalid("feature maps need at least one map"))?;
        let side = first.side();
        if maps.iter().any(|m| m.side() != side) {
            return Err(Error::invalid("feature maps must share one side"));
        }
        Ok(Self { maps })
    }

    pub fn zeros(count: usize, side: usize) -> Self {
        Self {
            maps: vec![Grid::zeros(side); count],
        }
    }

    pub fn count(&self) -> usize {
        self.maps.len()
    }

    pub fn side(&self) -> usize {
        self.maps[0].side()
    }

    pub fn maps(&self) -> &[Grid] {
        &self.maps
    }

    pub fn maps_mut(&mut self) -> &mut [Grid] {
        &mut self.maps
    }

    pub fn map(&self, j: usize) -> &Grid {
        &self.maps[j]
    }

    pub fn shift(&self, dx: i64, dy: i64) -> FeatureMaps {
        FeatureMaps {
            maps: self.maps.iter().map(|m| m.shift(dx, dy)).collect(),
        }
    }

    pub fn l1(&self) -> f64 {
        self.maps.iter().map(Grid::l1).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.maps.iter().fold(0.0, |m, g| m.max(g.max_abs()))
    }

    pub fn scaled(&self, w: f64) -> FeatureMaps {
        FeatureMaps {
            maps: self.maps.iter().map(|m| m.scaled(w)).collect(),
        }
    }

    pub fn add_scaled(&mut self, w: f64, other: &FeatureMaps) {
        for (a, b) in self.maps.iter_mut().zip(&other.maps) {
            a.add_scaled(w, b);
        }
    }

    /// `(j, x, y, value)` for every coefficient with `|value| > threshold`.
    pub fn active(&self, threshold: f64) -> Vec<(usize, usize, usize, f64)> {
        let mut out = Vec::new();
        for (j, m) in self.maps.iter().enumerate() {
            let s = m.side();
            for (i, &v) in m.data().iter().enumerate() {
                if v.abs() > threshold {
                    out.push((j, i % s, i / s, v));
                }
            }
        }
        out
    }

    /// Maps concatenated in order, each row-major.
    pub fn flatten(&self) -> Vec<f64> {
        self.maps.iter().flat_map(|m| m.data().iter().copied()).collect()
    }

    pub fn from_flat(count: usize, side: usize, data: &[f64]) -> Result<Self> {
        if data.len() != count * side * side {
            return Err(Error::invalid(format!(
                "expected {} values for {count} maps of side {side}, got {}",
                count * side * side,
                data.len()
            )));
        }
        let maps = data
            .chunks(side * side)
            .map(|c| Grid::from_vec(side, c.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(maps)
    }

    pub fn is_finite(&self) -> bool {
        self.maps.iter().all(Grid::is_finite)
    }
}
