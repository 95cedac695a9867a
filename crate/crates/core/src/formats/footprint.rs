//! Byte-exact storage footprints.

use crate::error::{Error, Result};

pub const GIB: f64 = (1u64 << 30) as f64;
pub const MIB: f64 = (1u64 << 20) as f64;

/// Dense 32-bit adjacency matrix: `4 n^2` bytes.
pub fn dense_footprint_bytes(n: u64) -> Result<u64> {
    n.checked_mul(n)
        .and_then(|x| x.checked_mul(4))
        .ok_or(Error::Overflow("dense footprint"))
}

/// Binary CSR adjacency (row pointers plus column indices, no value array):
/// `4 (n + 1) + 4 nnz` bytes.
pub fn csr_footprint_bytes(n: u64, nnz: u64) -> Result<u64> {
    check_nnz(n, nnz)?;
    let ptr = n
        .checked_add(1)
        .and_then(|x| x.checked_mul(4))
        .ok_or(Error::Overflow("csr footprint"))?;
    nnz.checked_mul(4)
        .and_then(|x| x.checked_add(ptr))
        .ok_or(Error::Overflow("csr footprint"))
}

/// CSR with an explicit 32-bit value per nonzero: `4 (n + 1) + 8 nnz` bytes.
pub fn csr_valued_footprint_bytes(n: u64, nnz: u64) -> Result<u64> {
    let base = csr_footprint_bytes(n, nnz)?;
    nnz.checked_mul(4)
        .and_then(|x| x.checked_add(base))
        .ok_or(Error::Overflow("csr footprint"))
}

fn check_nnz(n: u64, nnz: u64) -> Result<()> {
    match n.checked_mul(n) {
        Some(cells) if nnz > cells => Err(Error::InvalidMatrix(format!(
            "{nnz} nonzeros exceed {n}x{n} cells"
        ))),
        _ => Ok(()),
    }
}

pub fn to_gib(bytes: u64) -> f64 {
    bytes as f64 / GIB
}

pub fn to_mib(bytes: u64) -> f64 {
    bytes as f64 / MIB
}

/// A row of the graph-benchmark footprint table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphFootprint {
    pub name: &'static str,
    pub nodes: u64,
    pub edges: u64,
    /// Published dense size in GiB.
    pub dense_gib: f64,
    /// Published binary-CSR size in GiB.
    pub csr_gib: f64,
}

/// Published node/edge counts (as rounded in the source table) and sizes.
pub const GRAPH_BENCHMARKS: [GraphFootprint; 4] = [
    GraphFootprint {
        name: "cora",
        nodes: 2_710,
        edges: 10_900,
        dense_gib: 2.73e-2,
        csr_gib: 5.05e-5,
    },
    GraphFootprint {
        name: "pubmed",
        nodes: 19_700,
        edges: 108_000,
        dense_gib: 1.45,
        csr_gib: 4.77e-4,
    },
    GraphFootprint {
        name: "arxiv",
        nodes: 169_000,
        edges: 1_170_000,
        dense_gib: 1.07e2,
        csr_gib: 4.98e-3,
    },
    GraphFootprint {
        name: "products",
        nodes: 2_450_000,
        edges: 61_900_000,
        dense_gib: 2.23e4,
        csr_gib: 2.40e-1,
    },
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_examples() {
        assert_eq!(dense_footprint_bytes(1).unwrap(), 4);
        assert_eq!(dense_footprint_bytes(2710).unwrap(), 29_376_400);
        // Table rounds cora's 2,708 nodes up to 2.71E+03.
        assert!((to_gib(dense_footprint_bytes(2710).unwrap()) / 2.73e-2 - 1.0).abs() < 0.01);
        let g = to_gib(dense_footprint_bytes(100_000).unwrap());
        assert!((g - 37.25).abs() < 0.01, "{g}");
        assert_eq!(dense_footprint_bytes(u64::MAX / 2), Err(Error::Overflow("dense footprint")));
    }

    #[test]
    fn csr_examples() {
        assert_eq!(csr_footprint_bytes(4, 0).unwrap(), 20);
        assert_eq!(csr_footprint_bytes(19_700, 108_000).unwrap(), 510_804);
        assert_eq!(csr_footprint_bytes(2_710, 10_900).unwrap(), 54_444);
        let pubmed = to_gib(510_804);
        assert!((pubmed / 4.77e-4 - 1.0).abs() < 0.01);
        let cora = to_gib(54_444);
        assert!((cora / 5.05e-5 - 1.0).abs() < 0.02);
        assert_eq!(csr_valued_footprint_bytes(4, 2).unwrap(), 36);
        assert!(csr_footprint_bytes(2, 5).is_err());
    }
}
