//! Dataflow exploration for SIMD direct convolution.
//!
//! A layer is scheduled under one of three anchoring dataflows (input,
//! weight or output stationary), optionally extended with auxiliary stashes
//! held in spare vector variables. Schedules are verified on an abstract
//! vector machine against a scalar oracle, costed by instruction counts,
//! emitted as C, and combined across a network by a layout DP.

pub mod emit;
pub mod error;
pub mod model;
pub mod pipeline;
pub mod reuse;
pub mod schedule;
pub mod simvm;
pub mod workload;

pub use error::{Error, ExecError, ExecErrorKind, Result};
pub use model::{
    Anchor, AuxKind, DataflowSpec, LayerConfig, Layout, Mode, PackedTensor, TensorKind, VectorMachineConfig,
};
pub use schedule::{Instr, ScheduleIr};
pub use simvm::{CostReport, Counts};
