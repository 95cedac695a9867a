//! Placements and host scripts for the three SpMM variants.

use serde::{Deserialize, Serialize};

use super::programs::{ChainRouter, StackedAccumulator, StreamRouter, StreamingAccumulator, WorkerRow};
use super::Variant;
use crate::error::{Error, Result};
use crate::fabric::{
    ChannelDrain, ChannelId, ChannelStream, CopyOp, Direction, Edge, FabricConfig, HostScript, Placement, Port,
    Wavelet,
};
use crate::formats::{CsrMatrix, DenseMatrix, KernelConfig, SellpackImage, END_ROW};

/// Shape of one kernel pass over a column panel of A.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub n_rows: usize,
    pub panel_cols: usize,
    pub d: usize,
    pub mcpp: usize,
    pub lanes: usize,
    pub myc: usize,
    pub mvpp: usize,
    pub routers: usize,
    pub chunks: usize,
    pub io_channels: usize,
}

impl Geometry {
    pub fn new(cfg: &KernelConfig, panel_cols: usize) -> Self {
        let mcpp = cfg.max_col_per_pe;
        let routers = panel_cols.div_ceil(cfg.max_v_per_pe);
        Self {
            n_rows: cfg.n,
            panel_cols,
            d: cfg.d,
            mcpp,
            lanes: cfg.d / mcpp,
            myc: cfg.max_y_chunk,
            mvpp: cfg.max_v_per_pe,
            routers,
            chunks: cfg.chunk_count(),
            io_channels: cfg.io_channels().min(routers).max(1),
        }
    }

    pub fn chunk_rows(&self, k: usize) -> usize {
        self.myc.min(self.n_rows - k * self.myc)
    }

    pub fn accumulator_rows(&self, v: Variant) -> usize {
        match v {
            Variant::V1 | Variant::V2 => 1,
            Variant::V3 => self.chunks,
        }
    }

    /// Routers fed by h2d channel `g`: a contiguous block.
    pub fn channel_group(&self, g: usize) -> std::ops::Range<usize> {
        let c = self.io_channels;
        (g * self.routers / c)..((g + 1) * self.routers / c)
    }
}

/// Which host channels carry what, plus the copy schedule.
#[derive(Debug, Clone)]
pub struct HostDriverPlan {
    pub variant: Variant,
    pub h2d_channels: Vec<ChannelId>,
    /// `(channel index, route within channel)` for each router's stream.
    pub stream_routes: Vec<(usize, u16)>,
    pub d2h_channels: Vec<ChannelId>,
    pub script: HostScript,
}

/// Placement and channel layout; the script is filled in by `host_script`.
pub struct SpmmBuild {
    pub placement: Placement,
    pub plan: HostDriverPlan,
    pub geometry: Geometry,
}

pub fn check_fits(g: &Geometry, v: Variant, fabric: &FabricConfig) -> Result<()> {
    let rows = g.routers + g.accumulator_rows(v);
    let cols = 1 + g.lanes;
    if rows > fabric.grid_rows || cols > fabric.grid_cols {
        let hint = if v == Variant::V3 && g.routers < fabric.grid_rows && cols <= fabric.grid_cols {
            "; raise max_y_chunk to need fewer accumulator rows"
        } else {
            "; raise max_v_per_pe (fewer worker rows) or max_col_per_pe (fewer worker columns)"
        };
        return Err(Error::GridCap {
            rows,
            cols,
            cap_rows: fabric.grid_rows,
            cap_cols: fabric.grid_cols,
            hint,
        });
    }
    Ok(())
}

/// Places routers in column 0, one lock-step worker row per router and the
/// accumulator row(s) below. `h` holds the H rows of this panel.
pub fn build_spmm(v: Variant, cfg: &KernelConfig, h: &DenseMatrix, fabric: &FabricConfig) -> Result<SpmmBuild> {
    cfg.validate_spmm()?;
    let g = Geometry::new(cfg, h.n_rows());
    if h.n_cols() != cfg.d {
        return Err(Error::DimensionMismatch(format!("H has {} columns, d = {}", h.n_cols(), cfg.d)));
    }
    check_fits(&g, v, fabric)?;
    let mut p = Placement::new();
    let chunk_rows: Vec<usize> = (0..g.chunks).map(|k| g.chunk_rows(k)).collect();

    let mut routers = Vec::with_capacity(g.routers);
    let mut workers = Vec::with_capacity(g.routers);
    for r in 0..g.routers {
        let first = (r * g.mvpp) as u32;
        let last = ((r + 1) * g.mvpp - 1) as u32;
        let router: Box<dyn crate::fabric::Program> = match v {
            Variant::V1 => {
                let input = if r == 0 { Port::WEST } else { Port::NORTH };
                Box::new(ChainRouter::new(first, last, input, r + 1 == g.routers))
            }
            Variant::V2 | Variant::V3 => Box::new(StreamRouter::new(first)),
        };
        routers.push(p.add_node(r, 0, 1, router));
        let mut x = vec![0.0f32; g.mvpp * g.d];
        for i in 0..g.mvpp {
            let hr = r * g.mvpp + i;
            if hr < h.n_rows() {
                x[i * g.d..(i + 1) * g.d].copy_from_slice(h.row(hr));
            }
        }
        let worker = WorkerRow::new(
            r == 0,
            v != Variant::V1,
            x,
            g.d,
            g.mcpp,
            g.myc,
            g.mvpp,
            chunk_rows.clone(),
            fabric.fmac_cycles,
        );
        workers.push(p.add_node(r, 1, g.lanes, Box::new(worker)));
    }
    for r in 0..g.routers {
        p.connect(routers[r], Port::EAST, workers[r], Port::WEST, 1);
        if r + 1 < g.routers {
            if v == Variant::V1 {
                p.connect(routers[r], Port::SOUTH, routers[r + 1], Port::NORTH, 1);
            }
            p.connect(workers[r], Port::SOUTH, workers[r + 1], Port::NORTH, 1);
        }
    }

    let mut h2d_channels = Vec::new();
    let mut stream_routes = Vec::new();
    match v {
        Variant::V1 => {
            let ch = p.add_channel(Edge::West, 0, Direction::HostToDevice);
            p.feed(ch, routers[0], Port::WEST, 1);
            h2d_channels.push(ch);
        }
        Variant::V2 | Variant::V3 => {
            stream_routes = vec![(0, 0); g.routers];
            for c in 0..g.io_channels {
                let group = g.channel_group(c);
                let ch = p.add_channel(Edge::West, group.start, Direction::HostToDevice);
                for (offset, r) in group.enumerate() {
                    let route = p.feed(ch, routers[r], Port::WEST, 1 + offset as u64);
                    stream_routes[r] = (c, route as u16);
                }
                h2d_channels.push(ch);
            }
        }
    }

    let last_worker = *workers.last().expect("at least one worker row");
    let mut d2h_channels = Vec::new();
    // Accumulator words cross the span and exit on the east edge.
    let out_latency = g.lanes as u64;
    match v {
        Variant::V1 | Variant::V2 => {
            let acc = p.add_node(g.routers, 1, g.lanes, Box::new(StreamingAccumulator::new(g.lanes, g.myc, g.mcpp)));
            p.connect(last_worker, Port::SOUTH, acc, Port::NORTH, 1);
            let ch = p.add_channel(Edge::East, g.routers, Direction::DeviceToHost);
            p.drain(acc, Port::EAST, ch, out_latency);
            d2h_channels.push(ch);
        }
        Variant::V3 => {
            let mut above = last_worker;
            for k in 0..g.chunks {
                let acc = p.add_node(
                    g.routers + k,
                    1,
                    g.lanes,
                    Box::new(StackedAccumulator::new(chunk_rows[k] * g.mcpp, k + 1 == g.chunks, g.myc, g.mcpp)),
                );
                p.connect(above, Port::SOUTH, acc, Port::NORTH, 1);
                let ch = p.add_channel(Edge::East, g.routers + k, Direction::DeviceToHost);
                p.drain(acc, Port::EAST, ch, out_latency);
                d2h_channels.push(ch);
                above = acc;
            }
        }
    }

    Ok(SpmmBuild {
        placement: p,
        plan: HostDriverPlan {
            variant: v,
            h2d_channels,
            stream_routes,
            d2h_channels,
            script: HostScript::new(),
        },
        geometry: g,
    })
}

fn push_pair(s: &mut ChannelStream, route: Option<u16>, index: Wavelet, value: Wavelet) {
    match route {
        Some(r) => {
            s.push_to(r, index);
            s.push_to(r, value);
        }
        None => {
            s.push(index);
            s.push(value);
        }
    }
}

/// One drain per chunk, chunk `k` on `channels[k - chunks.start]`.
fn d2h_for_chunks(g: &Geometry, chunks: std::ops::Range<usize>, channels: &[ChannelId]) -> Vec<ChannelDrain> {
    chunks
        .zip(channels)
        .map(|(k, &ch)| ChannelDrain::new(ch).read(0, g.chunk_rows(k) * g.d))
        .collect()
}

/// V1: per chunk, every row's pairs in column order then `(END_ROW, 1)`, all
/// into the top router; then a d2h of that chunk's outputs.
pub fn host_script_v1(plan: &mut HostDriverPlan, g: &Geometry, a: &CsrMatrix) {
    let mut script = HostScript::new();
    for k in 0..g.chunks {
        let mut s = ChannelStream::new(plan.h2d_channels[0]);
        for r in k * g.myc..k * g.myc + g.chunk_rows(k) {
            let (cols, vals) = a.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                push_pair(&mut s, None, Wavelet::index(c), Wavelet::value(v));
            }
            push_pair(&mut s, None, Wavelet::sentinel(END_ROW), Wavelet::sentinel(1));
        }
        script.push(CopyOp::h2d(vec![s], true));
        let drains = d2h_for_chunks(g, k..k + 1, &plan.d2h_channels);
        script.push(CopyOp::d2h(drains, true));
    }
    plan.script = script;
}

/// V2/V3: each router's SELLPACK stream through its channel, round-robin
/// per pair within a channel's router group.
pub fn host_script_streams(plan: &mut HostDriverPlan, g: &Geometry, img: &SellpackImage) {
    let mut script = HostScript::new();
    for k in 0..g.chunks {
        let len = img.stream_len(k);
        let mut streams = Vec::with_capacity(g.io_channels);
        for c in 0..g.io_channels {
            let mut s = ChannelStream::new(plan.h2d_channels[c]);
            let group = g.channel_group(c);
            s.words.reserve(2 * len * group.len());
            s.routes.reserve(2 * len * group.len());
            for i in 0..len {
                for r in group.clone() {
                    let pair = img.stream(k, r)[i];
                    let route = Some(plan.stream_routes[r].1);
                    push_pair(&mut s, route, Wavelet::index(pair.index), Wavelet::raw_value(pair.value));
                }
            }
            streams.push(s);
        }
        script.push(CopyOp::h2d(streams, true));
        if plan.variant == Variant::V2 {
            let drains = d2h_for_chunks(g, k..k + 1, &plan.d2h_channels);
            script.push(CopyOp::d2h(drains, true));
        }
    }
    if plan.variant == Variant::V3 {
        let drains = d2h_for_chunks(g, 0..g.chunks, &plan.d2h_channels);
        script.push(CopyOp::d2h(drains, false));
    }
    plan.script = script;
}
