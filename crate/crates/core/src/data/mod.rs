//! Datasets: the parametric synthetic face generator with analytic ground
//! truth, and manifest-based loading of fixed-topology mesh collections.

mod manifest;
mod synth;

pub use manifest::{load_manifest, select_coma_style_frames, DatasetManifest, ManifestRecord, Split};
pub use synth::{
    generate_dataset, generate_sample, write_dataset, SynthConfig, SynthDataset, SynthGroundTruth,
};
