use std::collections::HashSet;

use super::fpe::roots_of_unity;
use super::{inner, FpeBase, Hypervector, PhasorVector, C64};
use crate::error::{check_dims, Error, Result};

/// An ordered, labelled set of codewords (the columns of a D x M matrix).
///
/// Codebooks built from an [`FpeBase`] keep the base, which lets `M^H u` and
/// `M c` run in `O(D + L^2)` by grouping components that share a phase index.
#[derive(Clone, Debug)]
pub struct Codebook {
    entries: Vec<PhasorVector>,
    labels: Vec<String>,
    fpe: Option<FpeBase>,
}

impl Codebook {
    pub fn new(entries: Vec<PhasorVector>, labels: Vec<String>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("codebook must have at least one entry"));
        }
        if labels.len() != entries.len() {
            return Err(Error::invalid(format!(
                "{} labels for {} entries",
                labels.len(),
                entries.len()
            )));
        }
        let dim = entries[0].dim();
        for e in &entries {
            check_dims(dim, e.dim())?;
        }
        let mut seen = HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::invalid(format!("duplicate codebook label `{dup}`")));
        }
        Ok(Self {
            entries,
            labels,
            fpe: None,
        })
    }

    /// Entries labelled `0..M`.
    pub fn indexed(entries: Vec<PhasorVector>) -> Result<Self> {
        let labels = (0..entries.len()).map(|i| i.to_string()).collect();
        Self::new(entries, labels)
    }

    /// `[base^0, base^1, ..., base^(L-1)]`, labelled by exponent.
    pub fn from_fpe(base: &FpeBase) -> Self {
        let roots = roots_of_unity(base.period());
        let entries = (0..base.period() as i64)
            .map(|x| PhasorVector::from_unit(base.power_with(&roots, x)))
            .collect();
        let labels = (0..base.period()).map(|x| x.to_string()).collect();
        Self {
            entries,
            labels,
            fpe: Some(base.clone()),
        }
    }

    /// Attaches an FPE base after checking that entry `x` equals `base^x`.
    pub(crate) fn with_fpe(mut self, base: FpeBase) -> Option<Self> {
        if base.period() as usize != self.len() || base.dim() != self.dim() {
            return None;
        }
        let roots = roots_of_unity(base.period());
        let ok = self.entries.iter().enumerate().all(|(x, e)| {
            base.power_with(&roots, x as i64)
                .iter()
                .zip(e.components())
                .all(|(a, b)| (a - b).norm() < 1e-9)
        });
        if ok {
            self.fpe = Some(base);
            Some(self)
        } else {
            None
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.entries[0].dim()
    }

    pub fn entries(&self) -> &[PhasorVector] {
        &self.entries
    }

    pub fn entry(&self, i: usize) -> Option<&PhasorVector> {
        self.entries.get(i)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn fpe_base(&self) -> Option<&FpeBase> {
        self.fpe.as_ref()
    }

    /// `M^H u`: unnormalized inner products of `u` with every entry.
    pub fn correlate(&self, u: &[C64]) -> Vec<C64> {
        match &self.fpe {
            Some(base) => fpe_correlate(base, u),
            None => self.correlate_dense(u),
        }
    }

    /// `M c`: codeword superposition weighted by `c`.
    pub fn synthesize(&self, coeffs: &[C64]) -> Vec<C64> {
        match &self.fpe {
            Some(base) => fpe_synthesize(base, coeffs),
            None => self.synthesize_dense(coeffs),
        }
    }

    /// `M M^H u`
    pub fn project(&self, u: &[C64]) -> Vec<C64> {
        self.synthesize(&self.correlate(u))
    }

    /// |similarity| of `v` against every entry.
    pub fn similarity_magnitudes<V: Hypervector + ?Sized>(&self, v: &V) -> Result<Vec<f64>> {
        check_dims(self.dim(), v.dim())?;
        let d = self.dim() as f64;
        Ok(self
            .correlate(v.components())
            .iter()
            .map(|c| c.norm() / d)
            .collect())
    }

    pub fn correlate_dense(&self, u: &[C64]) -> Vec<C64> {
        self.entries.iter().map(|e| inner(u, e.components())).collect()
    }

    pub fn synthesize_dense(&self, coeffs: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        for (c, e) in coeffs.iter().zip(&self.entries) {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            for (o, x) in out.iter_mut().zip(e.components()) {
                *o += c * x;
            }
        }
        out
    }
}

// c_x = sum_d u_d * conj(w^(k_d x)) = sum_k s_k * w^(-k x), with s_k the sum of u_d over k_d = k
fn fpe_correlate(base: &FpeBase, u: &[C64]) -> Vec<C64> {
    let l = base.period() as usize;
    let roots = roots_of_unity(base.period());
    let mut s = vec![C64::new(0.0, 0.0); l];
    for (&k, &ud) in base.indices().iter().zip(u) {
        s[k as usize] += ud;
    }
    (0..l)
        .map(|x| {
            let mut acc = C64::new(0.0, 0.0);
            for (k, sk) in s.iter().enumerate() {
                acc += sk * roots[(l - (k * x) % l) % l];
            }
            acc
        })
        .collect()
}

// out_d = t_{k_d} with t_k = sum_x c_x * w^(k x)
fn fpe_synthesize(base: &FpeBase, coeffs: &[C64]) -> Vec<C64> {
    let l = base.period() as usize;
    let roots = roots_of_unity(base.period());
    let t: Vec<C64> = (0..l)
        .map(|k| {
            let mut acc = C64::new(0.0, 0.0);
            for (x, c) in coeffs.iter().enumerate() {
                acc += c * roots[(k * x) % l];
            }
            acc
        })
        .collect();
    base.indices().iter().map(|&k| t[k as usize]).collect()
}
