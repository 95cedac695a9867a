//! Deterministic simulator of a wafer-scale processing-element grid running
//! streaming SpMM and SDDMM dataflow kernels.

pub mod error;
pub mod exec;
pub mod fabric;
pub mod formats;
pub mod harness;
pub mod oracle;
pub mod sddmm;
pub mod spmm;

pub use error::{Error, Result};
pub use exec::Exec;
