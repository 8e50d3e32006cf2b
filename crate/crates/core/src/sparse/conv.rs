//! Circular 2-D convolution through the FFT.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use super::Grid;
use crate::error::{Error, Result};
use crate::hd::C64;

/// Square 2-D FFT of a fixed side, planned once.
#[derive(Clone)]
pub struct Fft2 {
    side: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("side", &self.side).finish()
    }
}

impl Fft2 {
    pub fn new(side: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            side,
            fwd: planner.plan_fft_forward(side),
            inv: planner.plan_fft_inverse(side),
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    /// Spectrum of a real grid, zero-padded from the top-left when smaller.
    pub fn forward(&self, g: &Grid) -> Vec<C64> {
        let s = self.side;
        let gs = g.side();
        let mut buf = vec![C64::new(0.0, 0.0); s * s];
        for y in 0..gs.min(s) {
            for x in 0..gs.min(s) {
                buf[y * s + x] = C64::new(g.get(x, y), 0.0);
            }
        }
        self.transform(&mut buf, &self.fwd);
        buf
    }

    /// Real part of the inverse transform, scaled by `1/side^2`.
    pub fn inverse_real(&self, mut spec: Vec<C64>) -> Grid {
        self.transform(&mut spec, &self.inv);
        let n = (self.side * self.side) as f64;
        Grid::from_raw(self.side, spec.into_iter().map(|c| c.re / n).collect())
    }

    fn transform(&self, buf: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let s = self.side;
        plan.process(buf);
        transpose(buf, s);
        plan.process(buf);
        transpose(buf, s);
    }
}

fn transpose(buf: &mut [C64], s: usize) {
    for y in 0..s {
        for x in y + 1..s {
            buf.swap(y * s + x, x * s + y);
        }
    }
}

/// `out(x, y) = sum_{p,q} map(x - q, y - p) * filter(q, p)` with indices mod `L`.
///
/// A unit coefficient at `(x0, y0)` reproduces the filter with its top-left
/// corner at `(x0, y0)`.
pub fn convolve_circular(map: &Grid, filter: &Grid) -> Result<Grid> {
    if filter.side() > map.side() {
        return Err(Error::invalid(format!(
            "filter side {} exceeds map side {}",
            filter.side(),
            map.side()
        )));
    }
    let fft = Fft2::new(map.side());
    let a = fft.forward(map);
    let b = fft.forward(filter);
    Ok(fft.inverse_real(a.iter().zip(&b).map(|(x, y)| x * y).collect()))
}
