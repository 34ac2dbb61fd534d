//! Configuration, orchestration and CSV reporting for the command-line tool.

pub mod commands;
pub mod config;
pub mod csv;

pub use commands::{
    coeffs, compare, header_block, simulate, soliton_setup, spectrum, sweep, CoeffsRun, ComparisonRun,
    SimulationRun, SnapshotComparison, SolitonSetup, SpectrumRun, SweepRun,
};
pub use config::{RunConfig, PRESET_NAMES};
