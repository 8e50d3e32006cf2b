//! Random Bars generation, scene placement, and MNIST / letter ingestion.

mod bars;
mod idx;
mod letters;
mod scene;

pub use bars::{all_bars_shapes, bars_dictionary, gen_bars_shapes, Bar, BarsShape, Orientation, BAR_LEN, SHAPE_SIDE};
pub use idx::{load_idx, load_idx_labels, parse_idx_images, parse_idx_labels};
pub use letters::{encode_pgm, load_letter_assets, parse_pgm, LETTERS};
pub use scene::{place_scene, write_truth_csv, Combine, SceneSpec};
