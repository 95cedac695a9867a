//! Streaming SpMM `Y = A H` on the simulated grid, in three variants:
//! a single CSR stream filtered down a router chain (V1), per-router padded
//! streams over several host channels (V2), and V2 with one accumulator row
//! per chunk so outputs leave in a single copy at the end (V3).

mod build;
mod programs;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use build::{build_spmm, check_fits, host_script_streams, host_script_v1, Geometry, HostDriverPlan, SpmmBuild};
pub use programs::{
    accumulator_bytes, worker_bytes, ChainRouter, StackedAccumulator, StreamRouter, StreamingAccumulator, WorkerRow,
};

use crate::error::{Error, Result};
use crate::fabric::{Fabric, FabricConfig, HostOutput, SharedTrace, SimReport};
use crate::formats::{sellpack_encode_with, CsrMatrix, DenseMatrix, KernelConfig, MAX_ROWS};
use crate::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    V1,
    V2,
    V3,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::V1, Variant::V2, Variant::V3];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::V1 => "v1",
            Variant::V2 => "v2",
            Variant::V3 => "v3",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "v1" | "1" => Ok(Variant::V1),
            "v2" | "2" => Ok(Variant::V2),
            "v3" | "3" => Ok(Variant::V3),
            other => Err(Error::InvalidConfig(format!("unknown SpMM variant '{other}'"))),
        }
    }
}

/// Knobs that do not change the numerical result.
#[derive(Clone, Default)]
pub struct RunOptions {
    pub fabric: FabricConfig,
    pub trace: Option<SharedTrace>,
}

pub fn spmm(v: Variant, a: &CsrMatrix, h: &DenseMatrix, cfg: &KernelConfig) -> Result<(DenseMatrix, SimReport)> {
    spmm_with(v, a, h, cfg, &RunOptions::default())
}

/// Runs one fabric pass per 65536-column panel of A and sums the panel
/// outputs on the host in panel order.
pub fn spmm_with(
    v: Variant,
    a: &CsrMatrix,
    h: &DenseMatrix,
    cfg: &KernelConfig,
    opts: &RunOptions,
) -> Result<(DenseMatrix, SimReport)> {
    cfg.validate_spmm()?;
    let n = a.n_rows();
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!("A is {}x{}, expected square", n, a.n_cols())));
    }
    if h.n_rows() != n || h.n_cols() != cfg.d {
        return Err(Error::DimensionMismatch(format!(
            "H is {}x{}, expected {}x{}",
            h.n_rows(),
            h.n_cols(),
            n,
            cfg.d
        )));
    }
    if cfg.n != n {
        return Err(Error::DimensionMismatch(format!("config n = {}, A has {n} rows", cfg.n)));
    }
    let panels = n.div_ceil(MAX_ROWS);
    check_config(v, cfg, &opts.fabric)?;

    let mut y: Option<DenseMatrix> = None;
    let mut report = SimReport::default();
    for p in 0..panels {
        let start = p * MAX_ROWS;
        let end = (start + MAX_ROWS).min(n);
        let (a_p, h_p) = if panels == 1 {
            (a.clone(), h.clone())
        } else {
            (a.column_panel(start, end), h.row_block(start, end))
        };
        let (y_p, r) = run_panel(v, &a_p, &h_p, cfg, opts)?;
        report.accumulate(&r);
        y = Some(match y {
            None => y_p,
            Some(acc) => acc.add(&y_p)?,
        });
    }
    Ok((y.expect("at least one panel"), report))
}

/// Placement checks that need no matrix data: chunking, grid cap and the
/// per-PE memory budget.
pub fn check_config(v: Variant, cfg: &KernelConfig, fabric: &FabricConfig) -> Result<()> {
    cfg.validate_spmm()?;
    let g = Geometry::new(cfg, cfg.n.min(MAX_ROWS));
    check_fits(&g, v, fabric)?;
    let budget = fabric.pe_memory_bytes;
    let worker = worker_bytes(g.myc, g.mvpp, g.mcpp);
    if worker > budget {
        return Err(Error::MemoryBudget {
            row: 0,
            col: 1,
            role: "worker",
            bytes: worker,
            budget,
        });
    }
    let acc = accumulator_bytes(g.myc, g.mcpp);
    if acc > budget {
        return Err(Error::MemoryBudget {
            row: g.routers,
            col: 1,
            role: "accumulator",
            bytes: acc,
            budget,
        });
    }
    Ok(())
}

fn run_panel(
    v: Variant,
    a: &CsrMatrix,
    h: &DenseMatrix,
    cfg: &KernelConfig,
    opts: &RunOptions,
) -> Result<(DenseMatrix, SimReport)> {
    let SpmmBuild {
        placement,
        mut plan,
        geometry: g,
    } = build_spmm(v, cfg, h, &opts.fabric)?;
    match v {
        Variant::V1 => host_script_v1(&mut plan, &g, a),
        Variant::V2 | Variant::V3 => {
            let img = sellpack_encode_with(a, cfg, Exec::Sequential)?;
            host_script_streams(&mut plan, &g, &img);
        }
    }
    let mut fabric = Fabric::new(opts.fabric.clone());
    fabric.load_program(placement)?;
    if let Some(t) = &opts.trace {
        fabric.set_trace(Box::new(t.clone()));
    }
    let (report, out) = fabric.run(&plan.script)?;
    if let Some(t) = &opts.trace {
        t.clone().flush()?;
    }
    let y = assemble(&g, &plan, &out)?;
    Ok((y, report))
}

/// Host-side reassembly: word `q` of a chunk's drain is lane `q % lanes` of
/// bundle `q / lanes`.
fn assemble(g: &Geometry, plan: &HostDriverPlan, out: &HostOutput) -> Result<DenseMatrix> {
    let mut y = DenseMatrix::zeros(g.n_rows, g.d);
    let mut chunk_words: Vec<&[u32]> = Vec::with_capacity(g.chunks);
    for (i, op) in plan.script.ops.iter().enumerate() {
        if op.is_d2h() {
            chunk_words.extend(out.d2h(i).iter().map(Vec::as_slice));
        }
    }
    if chunk_words.len() != g.chunks {
        return Err(Error::Script(format!("{} output drains for {} chunks", chunk_words.len(), g.chunks)));
    }
    for (k, words) in chunk_words.into_iter().enumerate() {
        let base = k * g.myc;
        if words.len() != g.chunk_rows(k) * g.d {
            return Err(Error::Script(format!("chunk {k}: received {} words", words.len())));
        }
        for (q, &w) in words.iter().enumerate() {
            let (j, c) = (q / g.lanes, q % g.lanes);
            let (slot, m) = (j / g.mcpp, j % g.mcpp);
            y.set(base + slot, c * g.mcpp + m, f32::from_bits(w));
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{compare, random_dense, random_sparse, spmm_ref, ABS_TOL, REL_TOL};

    fn cfg(n: usize, d: usize, myc: usize, mvpp: usize) -> KernelConfig {
        KernelConfig::spmm(n, d, myc, mvpp)
    }

    #[test]
    fn identity_is_exact() {
        let a = CsrMatrix::identity(256);
        let h = random_dense(256, 4, 3);
        for v in Variant::ALL {
            let (y, r) = spmm(v, &a, &h, &cfg(256, 4, 64, 64)).unwrap();
            assert!(y.bit_eq(&h), "{v}");
            assert_eq!(r.fmacs, 256 * 4);
            assert_eq!(r.counter("chunk_order_violations"), 0);
        }
        let a = CsrMatrix::identity(128);
        let h = random_dense(128, 4, 5);
        let (y, _) = spmm(Variant::V1, &a, &h, &cfg(128, 4, 32, 64)).unwrap();
        assert!(y.bit_eq(&h));
    }

    #[test]
    fn zero_matrix_does_no_work() {
        let a = CsrMatrix::zeros(256, 256);
        let h = random_dense(256, 8, 1);
        for v in Variant::ALL {
            let (y, r) = spmm(v, &a, &h, &cfg(256, 8, 64, 64)).unwrap();
            assert!(y.data().iter().all(|&x| x == 0.0));
            assert_eq!(r.fmacs, 0);
        }
    }

    #[test]
    fn empty_rows_stream_single_end_row() {
        let a = CsrMatrix::zeros(128, 128);
        let c = cfg(128, 4, 64, 32);
        let img = crate::formats::sellpack_encode(&a, &c).unwrap();
        for k in 0..img.chunk_count() {
            for s in 0..img.streams {
                assert_eq!(img.stream(k, s), &[crate::formats::Pair::end_row(64)]);
            }
        }
        let (y, _) = spmm(Variant::V2, &a, &random_dense(128, 4, 0), &c).unwrap();
        assert!(y.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn variants_agree_with_oracle_and_each_other() {
        let n = 512;
        let a = random_sparse(n, 0.05, 11).unwrap();
        let h = random_dense(n, 8, 12);
        let want = spmm_ref(&a, &h).unwrap();
        let c = cfg(n, 8, 64, 64);
        let outs: Vec<_> = Variant::ALL.iter().map(|&v| spmm(v, &a, &h, &c).unwrap()).collect();
        for (y, r) in &outs {
            assert!(compare(y, &want, REL_TOL, ABS_TOL).unwrap().pass);
            assert_eq!(r.fmacs, (a.nnz() * 8) as u64);
            assert_eq!(r.residual_wavelets, 0);
            assert_eq!(r.counter("chunk_order_violations"), 0);
        }
        assert!(outs[0].0.bit_eq(&outs[1].0));
        assert!(outs[0].0.bit_eq(&outs[2].0));
    }

    #[test]
    fn mcpp_does_not_change_output() {
        let n = 256;
        let a = random_sparse(n, 0.1, 2).unwrap();
        let h = random_dense(n, 8, 3);
        let base = spmm(Variant::V2, &a, &h, &cfg(n, 8, 64, 32)).unwrap();
        for m in [2, 4, 8] {
            let (y, r) = spmm(Variant::V2, &a, &h, &cfg(n, 8, 64, 32).with_mcpp(m)).unwrap();
            assert!(y.bit_eq(&base.0), "mcpp {m}");
            assert_eq!(r.fmacs, base.1.fmacs);
            assert!(r.pe_count < base.1.pe_count);
        }
    }

    #[test]
    fn partial_chunk_and_ragged_window() {
        // 200 rows: chunks of 64 leave 8; windows of 48 leave a short last one.
        let n = 200;
        let a = random_sparse(n, 0.05, 9).unwrap();
        let h = random_dense(n, 4, 10);
        let want = spmm_ref(&a, &h).unwrap();
        let outs: Vec<_> = Variant::ALL
            .iter()
            .map(|&v| spmm(v, &a, &h, &cfg(n, 4, 64, 48)).unwrap().0)
            .collect();
        for y in &outs {
            assert!(compare(y, &want, REL_TOL, ABS_TOL).unwrap().pass);
        }
        assert!(outs[0].bit_eq(&outs[1]) && outs[1].bit_eq(&outs[2]));
    }

    #[test]
    fn few_io_channels() {
        let n = 512;
        let a = random_sparse(n, 0.02, 4).unwrap();
        let h = random_dense(n, 4, 4);
        let (full, rf) = spmm(Variant::V2, &a, &h, &cfg(n, 4, 64, 64)).unwrap();
        let (three, r3) = spmm(Variant::V2, &a, &h, &cfg(n, 4, 64, 64).with_io_channels(3)).unwrap();
        assert!(full.bit_eq(&three));
        assert!(r3.phases.stream_in > rf.phases.stream_in);
    }

    #[test]
    fn cost_ordering() {
        let n = 1024;
        let a = random_sparse(n, 0.05, 21).unwrap();
        let h = random_dense(n, 16, 22);
        let c = cfg(n, 16, 128, 64);
        let r: Vec<_> = Variant::ALL.iter().map(|&v| spmm(v, &a, &h, &c).unwrap().1).collect();
        assert!(r[1].phases.stream_in <= r[0].phases.stream_in);
        assert!(r[2].total_cycles <= r[1].total_cycles, "{} {}", r[2].total_cycles, r[1].total_cycles);
        assert!(r[1].total_cycles <= r[0].total_cycles);
    }

    #[test]
    fn single_chunk_v3_matches_v2_phases() {
        let n = 256;
        let a = random_sparse(n, 0.05, 6).unwrap();
        let h = random_dense(n, 4, 6);
        let c = cfg(n, 4, 256, 64);
        let (y2, r2) = spmm(Variant::V2, &a, &h, &c).unwrap();
        let (y3, r3) = spmm(Variant::V3, &a, &h, &c).unwrap();
        assert!(y2.bit_eq(&y3));
        assert_eq!(r2.phases.stream_in, r3.phases.stream_in);
        assert_eq!(r2.d2h_words, r3.d2h_words);
    }

    #[test]
    fn placement_errors() {
        let a = CsrMatrix::identity(64);
        let h = random_dense(64, 4, 0);
        assert!(matches!(
            spmm(Variant::V1, &a, &h, &cfg(64, 4, 100, 64)),
            Err(Error::NotPowerOfTwo(100))
        ));
        let big = cfg(64, 4, 16384, 64);
        assert!(matches!(
            spmm(Variant::V2, &a, &h, &big),
            Err(Error::MemoryBudget { bytes: 65_792, .. })
        ));
        assert!(spmm(Variant::V2, &a, &h, &cfg(64, 4, 2048, 64)).is_ok());
        let wide = random_dense(64, 1024, 0);
        assert!(matches!(spmm(Variant::V2, &a, &wide, &cfg(64, 1024, 64, 64)), Err(Error::GridCap { .. })));
        assert!(matches!(spmm(Variant::V2, &a, &h, &cfg(64, 8, 64, 64)), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn v3_accumulator_rows_capped() {
        let n = 8192;
        let a = CsrMatrix::identity(n);
        let h = random_dense(n, 4, 0);
        let fabric = FabricConfig {
            grid_rows: 200,
            ..Default::default()
        };
        let opts = RunOptions { fabric, trace: None };
        match spmm_with(Variant::V3, &a, &h, &cfg(n, 4, 64, 64), &opts) {
            Err(e @ Error::GridCap { .. }) => assert!(e.to_string().contains("max_y_chunk"), "{e}"),
            other => panic!("{other:?}"),
        }
    }
}
