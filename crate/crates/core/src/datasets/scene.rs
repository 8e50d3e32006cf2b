use std::io::Write;

use crate::error::{Error, Result};
use crate::multi::{MultiSceneTruth, Placement};
use crate::sparse::{Grid, Image};

/// How overlapping objects combine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Combine {
    /// Pixel-wise maximum.
    #[default]
    Max,
    /// Sum, then clip to `[0, 1]`.
    SumClip,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub side: usize,
    pub image: Image,
    pub truth: MultiSceneTruth,
}

/// Places `(k, object, x, y)` tuples on an `L x L` torus; `(x, y)` is where
/// the object's top-left corner lands.
pub fn place_scene(objects: &[(usize, &Image, i64, i64)], side: usize, combine: Combine) -> Result<SceneSpec> {
    if objects.is_empty() {
        return Err(Error::invalid("a scene needs at least one object"));
    }
    let mut image = Grid::zeros(side);
    let mut placements = Vec::with_capacity(objects.len());
    for &(k, obj, x, y) in objects {
        let placed = obj.embed(side)?.shift(x, y);
        for (p, &v) in image.data_mut().iter_mut().zip(placed.data()) {
            *p = match combine {
                Combine::Max => p.max(v),
                Combine::SumClip => (*p + v).clamp(0.0, 1.0),
            };
        }
        let l = side as i64;
        placements.push(Placement::new(k, x.rem_euclid(l) as usize, y.rem_euclid(l) as usize));
    }
    Ok(SceneSpec {
        side,
        image,
        truth: MultiSceneTruth::new(placements)?,
    })
}

/// CSV with columns `scene_id,k,x,y`.
pub fn write_truth_csv<W: Write>(out: &mut W, scenes: &[(usize, &MultiSceneTruth)]) -> Result<()> {
    writeln!(out, "scene_id,k,x,y")?;
    for (id, truth) in scenes {
        for p in truth.placements() {
            writeln!(out, "{id},{},{},{}", p.k, p.x, p.y)?;
        }
    }
    Ok(())
}
