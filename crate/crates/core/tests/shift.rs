//! Translating an image translates its code, so a shifted scene vector equals the bound template.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparse_resonator::datasets::{bars_dictionary, gen_bars_shapes};
use sparse_resonator::encoder::{encode_pixel, encode_sparse, EncoderContext};
use sparse_resonator::hd::Hypervector;
use sparse_resonator::sparse::{infer_maps, SparseConfig};

#[test]
fn inference_and_encoding_commute_with_translation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let side = 40;
    let dict = bars_dictionary();
    let ctx = EncoderContext::random(1500, side, dict.count(), &mut rng).unwrap();
    let cfg = SparseConfig {
        tol: 1e-12,
        max_iters: 400,
        ..SparseConfig::with_lambda(0.1)
    };
    for shape in gen_bars_shapes(5, 3, &mut rng).unwrap() {
        let img = shape.grid.embed(side).unwrap();
        let (dx, dy) = (rng.gen_range(0..side as i64), rng.gen_range(0..side as i64));
        let maps = infer_maps(&img, &dict, &cfg).unwrap();
        let moved = infer_maps(&img.shift(dx, dy), &dict, &cfg).unwrap();
        let err = maps
            .shift(dx, dy)
            .maps()
            .iter()
            .zip(moved.maps())
            .flat_map(|(a, b)| a.data().iter().zip(b.data()).map(|(p, q)| (p - q).abs()))
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "maps differ by {err}");

        let scene = encode_sparse(&moved, &ctx).unwrap();
        let bound = ctx.shift_vector(&encode_sparse(&maps, &ctx).unwrap(), dx, dy).unwrap();
        let scale = scene.norm();
        let diff = scene
            .components()
            .iter()
            .zip(bound.components())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-6 * scale, "sparse vectors differ by {diff}");

        let pix = encode_pixel(&img.shift(dx, dy), &ctx).unwrap();
        let pbound = ctx.shift_vector(&encode_pixel(&img, &ctx).unwrap(), dx, dy).unwrap();
        let diff = pix
            .components()
            .iter()
            .zip(pbound.components())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-9 * pix.norm(), "pixel vectors differ by {diff}");
    }
}
