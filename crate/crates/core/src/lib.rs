//! Bit-exact model of distributed-arithmetic (DA) FIR filtering.
//!
//! The crate is split along the datapath:
//!
//! * [`numerics`] holds fixed-point formats, coefficient quantization, the
//!   exact accumulator and the direct-form FIR reference that every DA path
//!   is checked against.
//! * [`da_engine`] builds and partitions the DA lookup tables, generates
//!   partial products either from stored tables or a multiplexer network, and
//!   runs the bit-serial shift-accumulate schedule with a per-cycle trace.
//! * [`adder_models`] simulates ripple-carry, carry-save and carry-lookahead
//!   adders bit by bit and prices them under a unit-gate cost model.
//! * [`resource_report`] aggregates memory, gate, depth and area-delay
//!   figures per architecture and compares architectures side by side.
//! * [`design`] is the persisted filter design and its JSON document.
//!
//! All datapath values are exact integers. Samples are L-bit two's-complement
//! integers and coefficients are W-bit two's-complement integers, so a DA
//! result is the integer inner product `sum(A_k * x_k)` with no scaling.

pub mod adder_models;
pub mod da_engine;
pub mod design;
mod error;
pub mod numerics;
pub mod resource_report;

pub use adder_models::{AdderKind, BitVector, CostModel, GateCost};
pub use da_engine::{
    CycleRecord, CycleTrace, DaEngine, DaFilter, DaLut, DelayLine, PartitionPlan, PpgMode,
};
pub use design::{DesignFile, FilterDesign};
pub use error::{Error, Result};
pub use numerics::{Coefficient, CoefficientSet, DirectFir, FixedFormat, Sample, WideAccumulator};
pub use resource_report::{ArchConfig, Comparison, ResourceReport};
