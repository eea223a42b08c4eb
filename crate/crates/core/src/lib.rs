//! Distributed Nash equilibrium seeking for aggregative games with compressed,
//! privacy-preserving communication.
//!
//! Players on a connected graph each control a box-constrained decision and
//! track the network average through a dynamic-average-consensus estimate.
//! CP-DNES transmits only stochastically quantized estimates; the quantizer's
//! randomness both saves bits and yields per-iteration `(0, δ_k)` differential
//! privacy of the players' objectives.
//!
//! ```
//! use std::sync::Arc;
//! use cpdnes_core::{
//!     run, Compressor, EnergyGame, EnergyGameParams, EngineConfig, InitialRule, QuantizerParams,
//!     StepSchedule, Topology, Variant, ne_linear,
//! };
//!
//! let params = EnergyGameParams::default();
//! let x_star = ne_linear(&params).unwrap().x_star.into_vec();
//! let cfg = EngineConfig {
//!     game: Arc::new(EnergyGame::new(params).unwrap()),
//!     topology: Arc::new(Topology::ring(5, 1.0).unwrap()),
//!     schedule: StepSchedule::energy_game(),
//!     variant: Variant::CpDnes {
//!         compressor: Compressor::Quantizer(QuantizerParams::new(40.0, 90.0).unwrap()),
//!     },
//!     iterations: 200,
//!     initial: InitialRule::Midpoint,
//! };
//! let record = run(&cfg, 7, Some(&x_star)).unwrap();
//! assert_eq!(record.bits_cum[200], 200 * 5 * 2);
//! ```

pub mod compress;
pub mod config;
pub mod engines;
mod error;
pub mod game;
pub mod harness;
pub mod network;
pub mod oracle;
pub mod plot;
pub mod privacy;
pub mod schedule;
pub mod stream;

pub use compress::{bits_for, CompressionStats, Compressor, CompressorSpec, QuantizerParams};
pub use config::{EngineSpec, ExperimentConfig, PrivacySpec, ReferenceSource, VariantSpec};
pub use engines::{
    run, step, ConventionalStep, DscParams, EngineConfig, InitialRule, OverflowPolicy, PlayerState, RunRecord,
    Trajectory, Variant,
};
pub use error::{Error, Result};
pub use game::{
    AggregativeGame, BoxConstraint, ClippedGame, DecisionProfile, EnergyGame, EnergyGameParams, GameBounds,
};
pub use harness::{
    bits_to_threshold, emit_csv, run_experiment, AggregateSeries, CsvRow, Experiment, Metric, Threshold,
};
pub use network::{Topology, TopologySpec};
pub use oracle::{ne_fixed_point, ne_linear, FixedPointOptions, NeMethod, NeSolution};
pub use privacy::{LedgerMode, PrivacyLedger};
pub use schedule::{check_conditions, Condition, ScheduleVerdict, StepSchedule};
