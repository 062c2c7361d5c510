//! Configuration, presets, run directories and the drivers behind the
//! command-line interface.
//!
//! A run directory starts with `manifest.jsonl`: its first line holds the
//! full configuration, its hash and the per-member seeds, and a completion
//! line with wall-clock statistics is appended at the end. Everything else in
//! the directory can be regenerated bit for bit from the first line.

mod config;
mod initial;
mod manifest;
mod output;
mod runner;

pub use config::{
    ConvergenceSection, DependenceSection, DomainConfig, EnsembleConfig, InitialSpec, ObserverConfig,
    PerturbationSpec, PotentialConfig, RegularizationConfig, RunConfig, StepperSection,
};
pub use initial::{initial_state, perturbation};
pub use manifest::{config_hash, member_seed, Completion, ManifestLine, MemberSeed, RunManifest, MANIFEST_FILE};
pub use output::{line_plot, write_csv, write_json, write_jsonl, Curve};
pub use runner::{
    converge, dependence, ensemble, pressure, resolve_workers, run, EnsembleOutcome, EnsembleVerdict, MemberRow,
    PressureOutcome, RunOptions, RunOutcome, RunSummary, VerdictStatus, WORKERS_ENV,
};

#[cfg(test)]
mod tests;
