//! Pauli-quaternion analysis of dq-frame converter/grid interaction.
//!
//! The crate is `no_std` and needs only `alloc`. Scalar transfer elements
//! live in [`freqresp`], the quaternion algebra in [`pauli`], the converter
//! and grid models in [`models`], the minor-loop assessment in
//! [`stability`], and brute-force cross-checks in [`oracles`].
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;

pub mod error;
pub mod freqresp;
pub mod models;
pub mod oracles;
pub mod pauli;
pub mod stability;

pub use error::{Error, Result};
pub use freqresp::{FrequencyGrid, GridSettings, TransferElement};
pub use models::{ConverterParams, GridParams, OperatingPoint, U1Reference};
pub use pauli::{DqMatrix, PauliQuaternion, QuaternionElement};
pub use stability::{AnalyticCase, LoopPoint, StabilityReport, Verdict};
