//! Run configuration, built-in profiles, dataset files and the command
//! implementations behind the CLI.

pub mod commands;
pub mod config;
pub mod records;

pub use commands::{
    cmd_analyze, cmd_gen_dataset, cmd_gen_grammar, cmd_kernel_check, cmd_oracle_eval, cmd_param_report,
    load_grammar, parse_models, EvalOutcome, GrammarArtifacts,
};
pub use config::{profile, RunConfig, PROFILES};
pub use records::{read_dataset, write_dataset, DataFormat, LoadedDataset, Manifest};
