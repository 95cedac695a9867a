//! Dense ground truth for the simulated kernels, seeded generators and
//! tolerance-based comparison.

mod compare;
mod generate;
mod reference;

pub use compare::{compare, compare_sparse, ComparisonReport};
pub use generate::{
    measure_random, random_dense, random_dense_signed, random_sparse, random_sparse_with,
    RowSampler,
};
pub use reference::{sddmm_ref, spmm_ref, spmm_ref_with};

/// Relative tolerance used for every kernel-vs-oracle comparison.
pub const REL_TOL: f64 = 1e-4;
/// Absolute floor for elements whose reference value is (near) zero.
pub const ABS_TOL: f64 = 1e-6;
