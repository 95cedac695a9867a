//! Sparse and dense matrix representations, the SELLPACK-like streaming
//! encoding, COO tiling and storage footprints.

mod config;
mod coo;
mod csr;
mod dense;
pub mod footprint;
pub mod mtx;
mod sellpack;

pub use config::{KernelConfig, MAX_ROWS};
pub use coo::{coo_tiles, CooTile, CooTileSet};
pub use csr::{csr_from_dense, dense_from_csr, CsrMatrix};
pub use dense::DenseMatrix;
pub use footprint::{csr_footprint_bytes, csr_valued_footprint_bytes, dense_footprint_bytes};
pub use sellpack::{
    measure_rows, sellpack_decode, sellpack_encode, sellpack_encode_with, sellpack_measure,
    sellpack_stream_stats, Pair, PairKind, SellpackChunk, SellpackImage, SellpackStats,
};

/// Padding index/value word.
pub const NULL_WORD: u32 = 0xFFFF_FFFF;
/// Row-termination index word; the paired value word is the run length.
pub const END_ROW: u32 = 0xFFFF_FFFE;
/// 16-bit row-completion token sent from routers to workers.
pub const DONE: u16 = 0xFFFF;
