//! Synthetic graphs, dataset files and train/test splits.

pub mod io;
pub mod split;
pub mod synthetic;

pub use io::{load_dataset, load_dir, save_dataset};
pub use split::{split_dataset, SplitSpec};
pub use synthetic::{generate_synthetic, RelationSpec, SyntheticSpec};
