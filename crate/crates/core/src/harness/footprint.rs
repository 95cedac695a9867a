use serde::{Deserialize, Serialize};

use super::SweepSpec;
use crate::error::{Error, Result};
use crate::formats::footprint::{to_gib, GRAPH_BENCHMARKS};
use crate::formats::{csr_footprint_bytes, csr_valued_footprint_bytes, dense_footprint_bytes};
use crate::oracle::measure_random;
use crate::Exec;

/// Streamed-pair counts of one seeded random matrix next to the closed-form
/// CSR and dense sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FootprintRow {
    pub n: usize,
    pub density: f64,
    pub myc: usize,
    pub mvpp: usize,
    pub seed: u64,
    pub nnz: u64,
    pub total_pairs: u64,
    pub endrow_pairs: u64,
    pub null_pairs: u64,
    pub ratio: f64,
    pub bytes: u64,
    /// Row pointers and column indices only.
    pub csr_bytes: u64,
    /// Row pointers, column indices and values.
    pub csr_valued_bytes: u64,
    pub dense_bytes: u64,
}

/// One row per (n, density, myc, mvpp, seed), sorted by those keys. Counts
/// stream pairs without materialising the matrix.
pub fn footprint_rows(spec: &SweepSpec, exec: Exec) -> Result<Vec<FootprintRow>> {
    let mut keys = Vec::new();
    for &n in &spec.n {
        for &density in &spec.density {
            if !(density > 0.0 && density <= 1.0) {
                return Err(Error::InvalidConfig(format!("density {density} outside (0, 1]")));
            }
            for &myc in &spec.myc {
                if !myc.is_power_of_two() {
                    return Err(Error::NotPowerOfTwo(myc));
                }
                for &mvpp in &spec.mvpp {
                    if mvpp == 0 {
                        return Err(Error::InvalidConfig("max_v_per_pe must be positive".into()));
                    }
                    for &seed in &spec.seeds {
                        keys.push((n, density, myc, mvpp, seed));
                    }
                }
            }
        }
    }
    if keys.is_empty() {
        return Err(Error::InvalidConfig("footprint sweep has an empty axis".into()));
    }
    keys.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(a.1.total_cmp(&b.1))
            .then(a.2.cmp(&b.2))
            .then(a.3.cmp(&b.3))
            .then(a.4.cmp(&b.4))
    });
    let mut rows = Vec::with_capacity(keys.len());
    for (n, density, myc, mvpp, seed) in keys {
        // Each row is already parallel inside.
        let s = measure_random(n, density, seed, myc, mvpp, exec)?;
        let n64 = n as u64;
        rows.push(FootprintRow {
            n,
            density,
            myc,
            mvpp,
            seed,
            nnz: s.nnz_pairs,
            total_pairs: s.total_pairs,
            endrow_pairs: s.endrow_pairs,
            null_pairs: s.null_pairs,
            ratio: s.ratio(),
            bytes: s.bytes(),
            csr_bytes: csr_footprint_bytes(n64, s.nnz_pairs)?,
            csr_valued_bytes: csr_valued_footprint_bytes(n64, s.nnz_pairs)?,
            dense_bytes: dense_footprint_bytes(n64)?,
        });
    }
    Ok(rows)
}

/// Closed-form sizes of the benchmark graphs against the published values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphTableRow {
    pub name: String,
    pub nodes: u64,
    pub edges: u64,
    pub csr_bytes: u64,
    pub dense_bytes: u64,
    pub csr_gib: f64,
    pub dense_gib: f64,
    pub published_csr_gib: f64,
    pub published_dense_gib: f64,
    pub csr_rel_err: f64,
    pub dense_rel_err: f64,
}

pub fn graph_table_rows() -> Result<Vec<GraphTableRow>> {
    GRAPH_BENCHMARKS
        .iter()
        .map(|g| {
            let csr_bytes = csr_footprint_bytes(g.nodes, g.edges)?;
            let dense_bytes = dense_footprint_bytes(g.nodes)?;
            let (csr_gib, dense_gib) = (to_gib(csr_bytes), to_gib(dense_bytes));
            Ok(GraphTableRow {
                name: g.name.to_string(),
                nodes: g.nodes,
                edges: g.edges,
                csr_bytes,
                dense_bytes,
                csr_gib,
                dense_gib,
                published_csr_gib: g.csr_gib,
                published_dense_gib: g.dense_gib,
                csr_rel_err: (csr_gib / g.csr_gib - 1.0).abs(),
                dense_rel_err: (dense_gib / g.dense_gib - 1.0).abs(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_within_two_percent() {
        let rows = graph_table_rows().unwrap();
        assert_eq!(rows.len(), 4);
        for r in rows {
            assert!(r.csr_rel_err < 0.02 && r.dense_rel_err < 0.02, "{r:?}");
        }
    }

    #[test]
    fn full_density_ratio_near_one() {
        let spec = SweepSpec {
            n: vec![64],
            density: vec![1.0],
            myc: vec![16],
            mvpp: vec![64],
            ..Default::default()
        };
        let rows = footprint_rows(&spec, Exec::Sequential).unwrap();
        let r = &rows[0];
        assert_eq!(r.nnz, 64 * 64);
        assert_eq!(r.null_pairs, 0);
        assert_eq!(r.total_pairs, 64 * 64 + 64);
        assert!(r.ratio > 1.0 && r.ratio < 1.02);
        assert_eq!(r.dense_bytes, 4 * 64 * 64);
    }

    #[test]
    fn sorted_and_deterministic() {
        let spec = SweepSpec {
            n: vec![512, 256],
            density: vec![0.1, 0.01],
            myc: vec![64],
            mvpp: vec![64],
            seeds: vec![3],
            ..Default::default()
        };
        let a = footprint_rows(&spec, Exec::Parallel).unwrap();
        let b = footprint_rows(&spec, Exec::Sequential).unwrap();
        assert_eq!(a, b);
        let keys: Vec<_> = a.iter().map(|r| (r.n, r.density)).collect();
        assert_eq!(keys, vec![(256, 0.01), (256, 0.1), (512, 0.01), (512, 0.1)]);
    }
}
