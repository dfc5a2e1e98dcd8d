//! Configuration and the end-to-end commands behind the `tecr` binary.

pub mod config;
pub mod data;
pub mod run;

pub use config::{CommonsenseConfig, CommonsenseProvider, DataConfig, Preset, RunConfig};
pub use data::{build_inputs, build_split, inference_map, InferenceMap, Split};
pub use run::{
    explain, gen_inferences, load_datasets, load_seed, predict, score_file, score_gold, synth, synthetic_splits,
    train, AttentionTrace, Datasets, Manifest, SeedResult, TrainSummary,
};
