//! Experiment plumbing: configuration, data sources, trace files and the
//! drivers behind the command-line tool.

mod config;
mod data;
mod experiment;
mod pgm;
mod trace;

pub use config::{apply_override, AlgorithmKind, DataSpec, ExperimentConfig, GraphSpec, ProblemSpec, SeedPlan};
pub use data::{
    add_noise, extract_patches, partition_data, reconstruct_from_patches, synth_instance, synthetic_image,
    SynthInstance,
};
pub use experiment::{
    build, build_data, build_graph, check_saved_state, compare, denoise, execute, gen_data, gen_graph,
    merge_traces, run_experiment, Built, CheckReport, DenoiseReport, ExperimentSummary, ImageContext, SavedState,
};
pub use pgm::{decode_pgm, encode_pgm, read_pgm, write_pgm};
pub use trace::{parse_trace_row, read_trace, row_cells, CsvTraceWriter, FLUSH_EVERY, TRACE_COLUMNS};
