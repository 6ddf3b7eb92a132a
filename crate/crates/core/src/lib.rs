//! Earliest-deadline-first single-server queue: discrete-event simulation,
//! heavy-traffic scaling, limit-theory formulas and replication experiments.

// `!(x > 0.0)` style checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clock;
pub mod config;
pub mod dist;
pub mod engine;
pub mod error;
pub mod harness;
pub mod limit;
pub mod quadrature;
pub mod rng;
pub mod scaling;
pub mod stats;
pub mod svg;

pub use dist::{ArrivalLaw, LeadTimeLaw, LeadTimeSpec, ServiceLaw};
pub use engine::{run_replication, run_sim, Discipline, SimConfig, SimOutput, SimState, Snapshot};
pub use error::{Error, Result};
pub use limit::{LimitParams, LimitSampler};
pub use scaling::{scale, ScaledSnapshot};
