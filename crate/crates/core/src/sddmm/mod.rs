//! SDDMM `Y = A ⊙ (B C)` on the simulated grid. Each worker owns one COO
//! tile of A; B columns enter from the west, C rows from the north, one
//! feature step at a time with a barrier between steps.

mod programs;

use std::io::Write;

pub use programs::{worker_bytes, Neighbours, NorthRouter, Relay, SddmmWorker, HOST_PORT};

use crate::error::{Error, Result};
use crate::fabric::{
    ChannelDrain, ChannelId, ChannelStream, CopyOp, Direction, Edge, Fabric, FabricConfig, HostScript, Placement,
    Port, SimReport, Wavelet,
};
use crate::formats::{coo_tiles, CooTileSet, CsrMatrix, DenseMatrix, KernelConfig, NULL_WORD};
use crate::spmm::RunOptions;

/// Tile sides tried by [`fit_tile`], largest first.
pub const TILE_SIDES: [usize; 3] = [64, 32, 16];

/// Largest square tile from [`TILE_SIDES`] that divides `n` and keeps every
/// tile of `a` within `mnz` nonzeros.
pub fn fit_tile(a: &CsrMatrix, mnz: usize) -> Option<usize> {
    let n = a.n_rows();
    TILE_SIDES.into_iter().filter(|&s| n.is_multiple_of(s)).find(|&s| {
        let tc = n / s;
        let mut counts = vec![0usize; (n / s) * tc];
        a.iter().all(|(i, j, _)| {
            let c = &mut counts[(i / s) * tc + j / s];
            *c += 1;
            *c <= mnz
        })
    })
}

/// Checks that need no matrix data: tiling, grid cap and worker memory.
pub fn check_config(cfg: &KernelConfig, fabric: &FabricConfig) -> Result<()> {
    cfg.validate_sddmm()?;
    let (tr, tc) = (cfg.n / cfg.local_height, cfg.n / cfg.local_width);
    check_grid(tr, tc, fabric)?;
    let bytes = worker_bytes(cfg.max_nonzeros, cfg.local_height, cfg.local_width);
    if bytes > fabric.pe_memory_bytes {
        return Err(Error::MemoryBudget {
            row: 1,
            col: 1,
            role: "sddmm_worker",
            bytes,
            budget: fabric.pe_memory_bytes,
        });
    }
    Ok(())
}

fn check_grid(tr: usize, tc: usize, fabric: &FabricConfig) -> Result<()> {
    if tr + 1 > fabric.grid_rows || tc + 1 > fabric.grid_cols {
        return Err(Error::GridCap {
            rows: tr + 1,
            cols: tc + 1,
            cap_rows: fabric.grid_rows,
            cap_cols: fabric.grid_cols,
            hint: "; raise local_height/local_width (and max_nonzeros) for fewer tiles",
        });
    }
    Ok(())
}

/// Placement plus the channels the host script needs.
pub struct SddmmBuild {
    pub placement: Placement,
    pub c_channel: ChannelId,
    /// `(channel, routes)`: each channel feeds a contiguous block of west routers.
    pub b_channels: Vec<(ChannelId, std::ops::Range<usize>)>,
    /// One east-edge drain per worker row; route `c` is the worker in column `c`.
    pub out_channels: Vec<ChannelId>,
    pub tile_rows: usize,
    pub tile_cols: usize,
}

/// Corner router at (0,0), north routers along row 0, west routers down
/// column 0, one worker per tile below and right of them.
pub fn build_sddmm(tiles: &CooTileSet, cfg: &KernelConfig, fabric: &FabricConfig) -> Result<SddmmBuild> {
    let (tr, tc) = (tiles.tile_rows, tiles.tile_cols);
    let (lh, lw) = (tiles.local_height, tiles.local_width);
    check_grid(tr, tc, fabric)?;
    let mut p = Placement::new();
    let corner = p.add_node(0, 0, 1, Box::new(Relay::new("corner_router", Port::WEST, Port::EAST)));
    let north: Vec<_> = (0..tc)
        .map(|c| p.add_node(0, c + 1, 1, Box::new(NorthRouter::new(lw, (tc - c - 1) * lw))))
        .collect();
    let west: Vec<_> = (0..tr)
        .map(|r| p.add_node(r + 1, 0, 1, Box::new(Relay::new("west_router", Port::WEST, Port::EAST))))
        .collect();
    let mut workers = Vec::with_capacity(tr * tc);
    for r in 0..tr {
        for c in 0..tc {
            let nb = Neighbours {
                west: c > 0,
                north: r > 0,
                east: c + 1 < tc,
                south: r + 1 < tr,
            };
            let w = SddmmWorker::new(tiles.tile(r, c).clone(), lh, lw, cfg.d, nb, fabric.fmac_cycles);
            workers.push(p.add_node(r + 1, c + 1, 1, Box::new(w)));
        }
    }
    let at = |r: usize, c: usize| workers[r * tc + c];

    p.connect(corner, Port::EAST, north[0], Port::WEST, 1);
    for c in 0..tc {
        if c + 1 < tc {
            p.connect(north[c], Port::EAST, north[c + 1], Port::WEST, 1);
        }
        p.connect(north[c], Port::SOUTH, at(0, c), Port::NORTH, 1);
    }
    for r in 0..tr {
        p.connect(west[r], Port::EAST, at(r, 0), Port::WEST, 1);
        for c in 0..tc {
            if c + 1 < tc {
                p.connect(at(r, c), Port::EAST, at(r, c + 1), Port::WEST, 1);
            }
            if r + 1 < tr {
                p.connect(at(r, c), Port::SOUTH, at(r + 1, c), Port::NORTH, 1);
            }
        }
    }

    let c_channel = p.add_channel(Edge::West, 0, Direction::HostToDevice);
    p.feed(c_channel, corner, Port::WEST, 1);
    let groups = cfg.io_channels.unwrap_or(tr).clamp(1, tr);
    let mut b_channels = Vec::with_capacity(groups);
    for g in 0..groups {
        let block = (g * tr / groups)..((g + 1) * tr / groups);
        let ch = p.add_channel(Edge::West, block.start + 1, Direction::HostToDevice);
        for (offset, r) in block.clone().enumerate() {
            p.feed(ch, west[r], Port::WEST, 1 + offset as u64);
        }
        b_channels.push((ch, block));
    }
    let mut out_channels = Vec::with_capacity(tr);
    for r in 0..tr {
        let ch = p.add_channel(Edge::East, r + 1, Direction::DeviceToHost);
        for c in 0..tc {
            p.drain(at(r, c), HOST_PORT, ch, (tc - c) as u64);
        }
        out_channels.push(ch);
    }
    Ok(SddmmBuild {
        placement: p,
        c_channel,
        b_channels,
        out_channels,
        tile_rows: tr,
        tile_cols: tc,
    })
}

/// Per step: column `t` of B and row `t` of C in one copy, then a one-word
/// read of the barrier token. After the last step, every output buffer.
pub fn host_script(build: &SddmmBuild, b: &DenseMatrix, c: &DenseMatrix, lh: usize, mnz: usize) -> HostScript {
    let d = b.n_cols();
    let mut script = HostScript::new();
    for t in 0..d {
        let mut streams = Vec::with_capacity(build.b_channels.len() + 1);
        let mut cs = ChannelStream::new(build.c_channel);
        for &x in c.row(t) {
            cs.push(Wavelet::data(x));
        }
        streams.push(cs);
        for (ch, block) in &build.b_channels {
            let mut s = ChannelStream::new(*ch);
            for i in 0..lh {
                for (route, r) in block.clone().enumerate() {
                    s.push_to(route as u16, Wavelet::data(b.get(r * lh + i, t)));
                }
            }
            streams.push(s);
        }
        script.push(CopyOp::h2d(streams, false));
        if t + 1 < d {
            let last = *build.out_channels.last().expect("at least one worker row");
            script.push(CopyOp::d2h(vec![ChannelDrain::new(last).read(build.tile_cols - 1, 1)], false));
        }
    }
    let drains = build
        .out_channels
        .iter()
        .map(|&ch| (0..build.tile_cols).fold(ChannelDrain::new(ch), |dr, c| dr.read(c, mnz)))
        .collect();
    script.push(CopyOp::d2h(drains, false));
    script
}

pub fn sddmm(a: &CsrMatrix, b: &DenseMatrix, c: &DenseMatrix, cfg: &KernelConfig) -> Result<(CsrMatrix, SimReport)> {
    sddmm_with(a, b, c, cfg, &RunOptions::default())
}

pub fn sddmm_with(
    a: &CsrMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
    cfg: &KernelConfig,
    opts: &RunOptions,
) -> Result<(CsrMatrix, SimReport)> {
    check_config(cfg, &opts.fabric)?;
    let n = cfg.n;
    if a.n_rows() != n || a.n_cols() != n {
        return Err(Error::DimensionMismatch(format!("A is {}x{}, config n = {n}", a.n_rows(), a.n_cols())));
    }
    if b.shape() != (n, cfg.d) || c.shape() != (cfg.d, n) {
        return Err(Error::DimensionMismatch(format!(
            "B is {}x{}, C is {}x{}; expected {n}x{d} and {d}x{n}",
            b.n_rows(),
            b.n_cols(),
            c.n_rows(),
            c.n_cols(),
            d = cfg.d
        )));
    }
    let tiles = coo_tiles(a, cfg)?;
    let build = build_sddmm(&tiles, cfg, &opts.fabric)?;
    let script = host_script(&build, b, c, cfg.local_height, cfg.max_nonzeros);
    let out_channels = build.out_channels.len();
    let mut fabric = Fabric::new(opts.fabric.clone());
    fabric.load_program(build.placement)?;
    if let Some(t) = &opts.trace {
        fabric.set_trace(Box::new(t.clone()));
    }
    let (report, out) = fabric.run(&script)?;
    if let Some(t) = &opts.trace {
        t.clone().flush()?;
    }
    let rows = out.d2h(script.ops.len() - 1);
    if rows.len() != out_channels {
        return Err(Error::Script(format!("{} output drains for {out_channels} worker rows", rows.len())));
    }
    let y = assemble(a, &tiles, rows)?;
    Ok((y, report))
}

/// Maps each tile's output slots back onto A's pattern. Tiles list their
/// entries in CSR order, so the `k`-th entry of A falling in a tile is slot
/// `k` of that tile.
fn assemble(a: &CsrMatrix, tiles: &CooTileSet, rows: &[Vec<u32>]) -> Result<CsrMatrix> {
    let (lh, lw, mnz, tc) = (tiles.local_height, tiles.local_width, tiles.max_nonzeros, tiles.tile_cols);
    for (r, words) in rows.iter().enumerate() {
        if words.len() != tc * mnz {
            return Err(Error::Script(format!("worker row {r}: received {} words", words.len())));
        }
        for c in 0..tc {
            let len = tiles.tile(r, c).len;
            let slots = &words[c * mnz..(c + 1) * mnz];
            if let Some(k) = (len..mnz).find(|&k| slots[k] != NULL_WORD) {
                return Err(Error::Corruption(format!("worker ({r}, {c}) slot {k} should be NULL")));
            }
        }
    }
    let mut next = vec![0usize; tiles.tiles.len()];
    let values = a
        .iter()
        .map(|(i, j, _)| {
            let (r, c) = (i / lh, j / lw);
            let slot = &mut next[r * tc + c];
            let w = rows[r][c * mnz + *slot];
            *slot += 1;
            f32::from_bits(w)
        })
        .collect();
    a.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{compare_sparse, random_dense, random_sparse, sddmm_ref, ABS_TOL, REL_TOL};

    fn ones(n: usize, d: usize) -> (DenseMatrix, DenseMatrix) {
        (DenseMatrix::from_fn(n, d, |_, _| 1.0), DenseMatrix::from_fn(d, n, |_, _| 1.0))
    }

    #[test]
    fn forced_twos() {
        let a = random_sparse(128, 0.05, 1).unwrap().with_uniform_values(2.0);
        let (b, c) = ones(128, 1);
        let (y, r) = sddmm(&a, &b, &c, &KernelConfig::sddmm(128, 1, 64, 512)).unwrap();
        assert!(y.same_pattern(&a));
        assert!(y.values().iter().all(|&v| v == 2.0));
        assert_eq!(r.fmacs, a.nnz() as u64);
        assert_eq!(r.fmuls, a.nnz() as u64);
        assert_eq!(r.host_tokens, 0);
    }

    #[test]
    fn pattern_of_ones_matches_oracle() {
        let a = random_sparse(128, 0.1, 2).unwrap().with_uniform_values(1.0);
        let b = random_dense(128, 2, 3);
        let c = random_dense(2, 128, 4);
        let (y, r) = sddmm(&a, &b, &c, &KernelConfig::sddmm(128, 2, 64, 1024)).unwrap();
        let want = sddmm_ref(&a, &b, &c).unwrap();
        assert!(compare_sparse(&y, &want, REL_TOL, ABS_TOL).unwrap().pass);
        assert_eq!(r.fmacs, 2 * a.nnz() as u64);
        assert_eq!(r.host_tokens, 1);
        assert_eq!(r.d2h_words, 4 * 1024);
    }

    #[test]
    fn zero_matrix() {
        let a = CsrMatrix::zeros(64, 64);
        let (b, c) = ones(64, 2);
        let (y, r) = sddmm(&a, &b, &c, &KernelConfig::sddmm(64, 2, 32, 512)).unwrap();
        assert_eq!(y.nnz(), 0);
        assert_eq!(r.fmacs, 0);
        assert_eq!(r.d2h_words, 4 * 512);
    }

    #[test]
    fn mnz_doubles_output_words_only() {
        let a = random_sparse(256, 0.05, 5).unwrap();
        let b = random_dense(256, 2, 6);
        let c = random_dense(2, 256, 7);
        let (y1, r1) = sddmm(&a, &b, &c, &KernelConfig::sddmm(256, 2, 64, 512)).unwrap();
        let (y2, r2) = sddmm(&a, &b, &c, &KernelConfig::sddmm(256, 2, 64, 1024)).unwrap();
        assert_eq!(y1, y2);
        assert_eq!(r2.d2h_words, 2 * r1.d2h_words);
        assert_eq!(r1.h2d_words, r2.h2d_words);
        assert!(r2.phases.stream_out > r1.phases.stream_out);
    }

    #[test]
    fn single_tile() {
        let a = random_sparse(32, 0.3, 8).unwrap();
        let b = random_dense(32, 2, 9);
        let c = random_dense(2, 32, 10);
        let (y, r) = sddmm(&a, &b, &c, &KernelConfig::sddmm(32, 2, 32, 512)).unwrap();
        let want = sddmm_ref(&a, &b, &c).unwrap();
        assert!(compare_sparse(&y, &want, REL_TOL, ABS_TOL).unwrap().pass);
        assert_eq!(r.roles["sddmm_worker"].pes, 1);
    }

    #[test]
    fn grouped_channels_and_rectangular_tiles() {
        let a = random_sparse(128, 0.05, 11).unwrap();
        let b = random_dense(128, 2, 12);
        let c = random_dense(2, 128, 13);
        let mut cfg = KernelConfig::sddmm(128, 2, 32, 512).with_io_channels(2);
        cfg.local_height = 16;
        let (y, _) = sddmm(&a, &b, &c, &cfg).unwrap();
        let want = sddmm_ref(&a, &b, &c).unwrap();
        assert!(compare_sparse(&y, &want, REL_TOL, ABS_TOL).unwrap().pass);
    }

    #[test]
    fn tile_fitting() {
        let a = random_sparse(256, 0.3, 14).unwrap();
        assert_eq!(fit_tile(&a, 1024), Some(32));
        assert_eq!(fit_tile(&CsrMatrix::identity(128), 512), Some(64));
        assert_eq!(fit_tile(&CsrMatrix::identity(24), 512), None);
    }

    #[test]
    fn errors() {
        let a = random_sparse(64, 0.5, 15).unwrap();
        let (b, c) = ones(64, 1);
        let err = sddmm(&a, &b, &c, &KernelConfig::sddmm(64, 1, 64, 512)).unwrap_err();
        assert!(matches!(err, Error::TileOverflow { .. }));
        let err = sddmm(&a, &b, &c, &KernelConfig::sddmm(64, 2, 32, 1024)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
        let err = sddmm(&a, &b, &c, &KernelConfig::sddmm(64, 1, 16, 12000)).unwrap_err();
        assert!(matches!(err, Error::MemoryBudget { .. }));
    }
}
