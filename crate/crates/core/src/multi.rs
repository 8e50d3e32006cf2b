//! Sequential factorization of multi-object scenes by explaining away.

use rand::Rng;

use crate::encoder::{compose_query, Codebooks};
use crate::error::{check_dims, Error, Result};
use crate::hd::{inner, ComplexVector, Hypervector};
use crate::resonator::{run, FactorizationResult, StoppingCriterion};

/// One object at one position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Placement {
    pub k: usize,
    pub x: usize,
    pub y: usize,
}

impl Placement {
    pub fn new(k: usize, x: usize, y: usize) -> Self {
        Self { k, x, y }
    }
}

impl From<&FactorizationResult> for Placement {
    fn from(r: &FactorizationResult) -> Self {
        Placement::new(r.k_index, r.x_index, r.y_index)
    }
}

/// Ground truth of a scene with `m >= 1` objects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiSceneTruth {
    placements: Vec<Placement>,
}

impl MultiSceneTruth {
    pub fn new(placements: Vec<Placement>) -> Result<Self> {
        if placements.is_empty() {
            return Err(Error::invalid("a scene needs at least one placement"));
        }
        Ok(Self { placements })
    }

    pub fn placements(&self) -> &[Placement] {
        &self.placements
    }

    pub fn count(&self) -> usize {
        self.placements.len()
    }
}

/// `z - (|<zhat, z>| / D) * zhat`
pub fn explain_away<A, B>(z: &A, z_hat: &B) -> Result<ComplexVector>
where
    A: Hypervector + ?Sized,
    B: Hypervector + ?Sized,
{
    check_dims(z.dim(), z_hat.dim())?;
    let coef = inner(z_hat.components(), z.components()).norm() / z.dim() as f64;
    let c = z
        .components()
        .iter()
        .zip(z_hat.components())
        .map(|(a, b)| a - b * coef)
        .collect();
    Ok(ComplexVector::new(c))
}

/// What is subtracted from the scene after each extraction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExplainAway {
    /// The resonator's own output `h . v . o`.
    #[default]
    Raw,
    /// The codebook entries of the decoded triple.
    Cleaned,
}

impl std::str::FromStr for ExplainAway {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "raw" => Ok(ExplainAway::Raw),
            "cleaned" => Ok(ExplainAway::Cleaned),
            other => Err(Error::Config(format!("unknown explain-away variant `{other}`"))),
        }
    }
}

/// `m` runs, each followed by explaining away its result; results in extraction order.
pub fn factorize_multi<R: Rng + ?Sized>(
    z: &ComplexVector,
    cbs: &Codebooks,
    m: usize,
    criterion: &StoppingCriterion,
    variant: ExplainAway,
    rng: &mut R,
) -> Result<Vec<FactorizationResult>> {
    if m == 0 {
        return Err(Error::invalid("number of objects must be >= 1"));
    }
    let mut residual = z.clone();
    let mut out = Vec::with_capacity(m);
    for r in 0..m {
        let res = run(&residual, cbs, criterion, rng)?;
        if r + 1 < m {
            residual = match variant {
                ExplainAway::Raw => explain_away(&residual, &res.final_estimate)?,
                ExplainAway::Cleaned => {
                    let q = compose_query(res.x_index, res.y_index, res.k_index, cbs)?;
                    explain_away(&residual, &q)?
                }
            };
        }
        out.push(res);
    }
    Ok(out)
}

/// Fraction of truth placements matched one-to-one by exactly equal results.
pub fn graded_accuracy(found: &[Placement], truth: &MultiSceneTruth) -> f64 {
    graded_accuracy_with(found, truth, 0, usize::MAX)
}

/// Like [`graded_accuracy`], but positions may differ by up to `tol` pixels
/// per axis, measured on a torus of side `side`.
pub fn graded_accuracy_with(found: &[Placement], truth: &MultiSceneTruth, tol: usize, side: usize) -> f64 {
    let close = |a: usize, b: usize| {
        let d = a.abs_diff(b);
        d.min(side.saturating_sub(d)) <= tol
    };
    let matches = |t: &Placement, f: &Placement| t.k == f.k && close(t.x, f.x) && close(t.y, f.y);
    let n = max_matching(truth.placements(), found, matches);
    n as f64 / truth.count() as f64
}

/// Maximum bipartite matching size (augmenting paths).
fn max_matching<A, B>(left: &[A], right: &[B], edge: impl Fn(&A, &B) -> bool) -> usize {
    fn augment<A, B>(
        i: usize,
        left: &[A],
        right: &[B],
        edge: &dyn Fn(&A, &B) -> bool,
        seen: &mut [bool],
        owner: &mut [Option<usize>],
    ) -> bool {
        for j in 0..right.len() {
            if seen[j] || !edge(&left[i], &right[j]) {
                continue;
            }
            seen[j] = true;
            let free = match owner[j] {
                None => true,
                Some(o) => augment(o, left, right, edge, seen, owner),
            };
            if free {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; right.len()];
    let mut n = 0;
    for i in 0..left.len() {
        let mut seen = vec![false; right.len()];
        if augment(i, left, right, &edge, &mut seen, &mut owner) {
            n += 1;
        }
    }
    n
}
