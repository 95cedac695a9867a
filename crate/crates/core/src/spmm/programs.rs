//! Router, worker and accumulator task code for the SpMM variants.

use std::any::Any;

use crate::fabric::{OutputStatus, Payload, Port, PortMask, Program, TaskCtx, Wavelet};
use crate::formats::{DONE, END_ROW, NULL_WORD};

const DONE_WORD: u32 = DONE as u32;

/// H slice plus partial outputs.
pub fn worker_bytes(myc: usize, mvpp: usize, mcpp: usize) -> usize {
    4 * mcpp * (myc + mvpp)
}

pub fn accumulator_bytes(myc: usize, mcpp: usize) -> usize {
    4 * myc * mcpp
}

fn word(p: &Payload) -> Result<u32, String> {
    p.word().map(|w| w.word).ok_or_else(|| "expected a single wavelet".to_string())
}

/// Single-stream router: filters one CSR-ordered stream by column window,
/// passing the rest south.
pub struct ChainRouter {
    pub first: u32,
    pub last: u32,
    pub input: Port,
    pub is_last: bool,
    row_end: bool,
    index: Option<u32>,
    dropped: u64,
}

impl ChainRouter {
    pub fn new(first: u32, last: u32, input: Port, is_last: bool) -> Self {
        Self {
            first,
            last,
            input,
            is_last,
            row_end: false,
            index: None,
            dropped: 0,
        }
    }
}

impl Program for ChainRouter {
    fn role(&self) -> &'static str {
        "router"
    }

    fn memory_bytes(&self) -> usize {
        16
    }

    fn listening(&self, _: &OutputStatus) -> PortMask {
        PortMask::only(self.input)
    }

    fn on_receive(&mut self, _: Port, p: Payload, ctx: &mut TaskCtx) -> Result<(), String> {
        let w = word(&p)?;
        let Some(col) = self.index.take() else {
            self.index = Some(w);
            return Ok(());
        };
        if col > self.last {
            if !self.row_end {
                ctx.send(Port::EAST, Wavelet::sentinel(DONE_WORD));
                self.row_end = true;
            }
            if col == END_ROW {
                self.row_end = false;
            }
            if self.is_last {
                self.dropped += 1;
            } else {
                ctx.send(Port::SOUTH, Wavelet::index(col));
                ctx.send(Port::SOUTH, Wavelet::raw_value(w));
            }
        } else if col >= self.first {
            ctx.send(Port::EAST, Wavelet::index(col - self.first));
            ctx.send(Port::EAST, Wavelet::raw_value(w));
        } else {
            return Err(format!("column {col} below window start {}", self.first));
        }
        Ok(())
    }

    fn counters(&self) -> Vec<(&'static str, u64)> {
        vec![("router_south_dropped", self.dropped)]
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Router fed directly by its own padded stream.
pub struct StreamRouter {
    pub first: u32,
    index: Option<u32>,
    nulls: u64,
}

impl StreamRouter {
    pub fn new(first: u32) -> Self {
        Self {
            first,
            index: None,
            nulls: 0,
        }
    }
}

impl Program for StreamRouter {
    fn role(&self) -> &'static str {
        "router"
    }

    fn memory_bytes(&self) -> usize {
        16
    }

    fn listening(&self, _: &OutputStatus) -> PortMask {
        PortMask::only(Port::WEST)
    }

    fn on_receive(&mut self, _: Port, p: Payload, ctx: &mut TaskCtx) -> Result<(), String> {
        let w = word(&p)?;
        let Some(col) = self.index.take() else {
            self.index = Some(w);
            return Ok(());
        };
        match col {
            NULL_WORD => self.nulls += 1,
            END_ROW => {
                ctx.send(Port::EAST, Wavelet::sentinel(DONE_WORD));
                ctx.send(Port::EAST, Wavelet::sentinel(w));
            }
            _ => {
                let local = col
                    .checked_sub(self.first)
                    .filter(|&l| l < DONE_WORD)
                    .ok_or_else(|| format!("column {col} outside window starting at {}", self.first))?;
                ctx.send(Port::EAST, Wavelet::index(local));
                ctx.send(Port::EAST, Wavelet::raw_value(w));
            }
        }
        Ok(())
    }

    fn counters(&self) -> Vec<(&'static str, u64)> {
        vec![("router_nulls_dropped", self.nulls)]
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum WorkerState {
    Ready,
    Index(u32),
    /// DONE seen; the next word is the run length.
    Run,
    /// Adding bundles from the north into the local partial outputs.
    Reducing { next: usize },
}

/// A row of workers in lock step: `d / mcpp` PEs, each holding `mcpp` columns
/// of an `max_v_per_pe`-row slice of H and `mcpp` interleaved output buffers.
pub struct WorkerRow {
    top: bool,
    run_length: bool,
    d: usize,
    mcpp: usize,
    fmac_cycles: u64,
    bytes: usize,
    /// `x[index * d + col]`
    x: Vec<f32>,
    /// `y[slot * d + col]`
    y: Vec<f32>,
    chunk_rows: Vec<usize>,
    chunk: usize,
    slot: usize,
    state: WorkerState,
    violations: u64,
}

impl WorkerRow {
    /// `x` is the row's H slice (`mvpp x d`, row-major, zero-padded).
    pub fn new(
        top: bool,
        run_length: bool,
        x: Vec<f32>,
        d: usize,
        mcpp: usize,
        myc: usize,
        mvpp: usize,
        chunk_rows: Vec<usize>,
        fmac_cycles: u64,
    ) -> Self {
        debug_assert_eq!(x.len(), mvpp * d);
        Self {
            top,
            run_length,
            d,
            mcpp,
            fmac_cycles,
            bytes: worker_bytes(myc, mvpp, mcpp),
            x,
            y: vec![0.0; myc * d],
            chunk_rows,
            chunk: 0,
            slot: 0,
            state: WorkerState::Ready,
            violations: 0,
        }
    }

    fn lanes(&self) -> usize {
        self.d / self.mcpp
    }

    /// Words of bundle `j`: lane `c` holds output column `c*mcpp + j%mcpp` of slot `j/mcpp`.
    fn bundle(&self, j: usize) -> impl Iterator<Item = f32> + '_ {
        let base = (j / self.mcpp) * self.d + j % self.mcpp;
        (0..self.lanes()).map(move |c| self.y[base + c * self.mcpp])
    }

    fn advance(&mut self, rows: usize, ctx: &mut TaskCtx) -> Result<(), String> {
        let want = *self
            .chunk_rows
            .get(self.chunk)
            .ok_or_else(|| format!("row completion after the last chunk ({})", self.chunk))?;
        self.slot += rows;
        if self.slot > want {
            return Err(format!("chunk {} overran: {} of {want} rows", self.chunk, self.slot));
        }
        if self.slot < want {
            return Ok(());
        }
        if self.top {
            for j in 0..want * self.mcpp {
                let lanes: Box<[f32]> = self.bundle(j).collect();
                ctx.send_async(Port::SOUTH, Payload::Lanes(lanes));
            }
            self.finish_chunk();
        } else {
            self.state = WorkerState::Reducing { next: 0 };
        }
        Ok(())
    }

    fn finish_chunk(&mut self) {
        self.y.iter_mut().for_each(|v| *v = 0.0);
        self.slot = 0;
        self.chunk += 1;
        self.state = WorkerState::Ready;
    }
}

impl Program for WorkerRow {
    fn role(&self) -> &'static str {
        "worker"
    }

    fn memory_bytes(&self) -> usize {
        self.bytes
    }

    fn listening(&self, out: &OutputStatus) -> PortMask {
        match self.state {
            WorkerState::Reducing { .. } => PortMask::only(Port::NORTH),
            // The outgoing reduction reads y; hold new rows until it has left.
            _ if out.async_idle(Port::SOUTH) => PortMask::only(Port::WEST),
            _ => PortMask::NONE,
        }
    }

    fn on_receive(&mut self, port: Port, p: Payload, ctx: &mut TaskCtx) -> Result<(), String> {
        if port == Port::NORTH {
            let WorkerState::Reducing { next } = self.state else {
                return Err("partial outputs arrived outside a reduction".into());
            };
            let Payload::Lanes(incoming) = p else {
                return Err("expected a lane bundle from the north".into());
            };
            let out: Box<[f32]> = incoming.iter().zip(self.bundle(next)).map(|(a, b)| a + b).collect();
            ctx.send_async(Port::SOUTH, Payload::Lanes(out));
            let total = self.chunk_rows[self.chunk] * self.mcpp;
            if next + 1 == total {
                self.finish_chunk();
            } else {
                self.state = WorkerState::Reducing { next: next + 1 };
            }
            return Ok(());
        }
        let w = word(&p)?;
        match self.state {
            WorkerState::Reducing { .. } => {
                self.violations += 1;
                Err("row data arrived during a reduction".into())
            }
            WorkerState::Ready if w == DONE_WORD => {
                if self.run_length {
                    self.state = WorkerState::Run;
                    Ok(())
                } else {
                    self.advance(1, ctx)
                }
            }
            WorkerState::Ready => {
                self.state = WorkerState::Index(w);
                Ok(())
            }
            WorkerState::Run => {
                self.state = WorkerState::Ready;
                if w == 0 {
                    return Err("zero run length".into());
                }
                self.advance(w as usize, ctx)
            }
            WorkerState::Index(i) => {
                self.state = WorkerState::Ready;
                if !ctx.status().async_idle(Port::SOUTH) {
                    self.violations += 1;
                }
                let i = i as usize;
                let d = self.d;
                if (i + 1) * d > self.x.len() {
                    return Err(format!("local index {i} outside the H slice"));
                }
                let v = f32::from_bits(w);
                let xs = &self.x[i * d..(i + 1) * d];
                let ys = &mut self.y[self.slot * d..(self.slot + 1) * d];
                for (y, &x) in ys.iter_mut().zip(xs) {
                    *y += v * x;
                }
                ctx.count_fmacs(d as u64);
                ctx.spend(self.mcpp as u64 * self.fmac_cycles - 1);
                Ok(())
            }
        }
    }

    fn counters(&self) -> Vec<(&'static str, u64)> {
        vec![("chunk_order_violations", self.violations)]
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Accumulator row that streams every reduced bundle straight to its host
/// channel, buffering at most one chunk.
pub struct StreamingAccumulator {
    lanes: usize,
    capacity_words: usize,
    bytes: usize,
}

impl StreamingAccumulator {
    pub fn new(lanes: usize, myc: usize, mcpp: usize) -> Self {
        Self {
            lanes,
            capacity_words: myc * mcpp * lanes,
            bytes: accumulator_bytes(myc, mcpp),
        }
    }
}

impl Program for StreamingAccumulator {
    fn role(&self) -> &'static str {
        "accumulator"
    }

    fn memory_bytes(&self) -> usize {
        self.bytes
    }

    fn listening(&self, out: &OutputStatus) -> PortMask {
        if out.async_pending[Port::EAST.idx()] as usize + self.lanes <= self.capacity_words {
            PortMask::only(Port::NORTH)
        } else {
            PortMask::NONE
        }
    }

    fn on_receive(&mut self, _: Port, p: Payload, ctx: &mut TaskCtx) -> Result<(), String> {
        let Payload::Lanes(l) = p else {
            return Err("expected a lane bundle".into());
        };
        for &v in l.iter() {
            ctx.send_async(Port::EAST, Wavelet::data(v));
        }
        Ok(())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Accumulator row `k` of a stack: keeps chunk `k`, passes later chunks south.
pub struct StackedAccumulator {
    keep: usize,
    seen: usize,
    is_last: bool,
    bytes: usize,
}

impl StackedAccumulator {
    pub fn new(keep_bundles: usize, is_last: bool, myc: usize, mcpp: usize) -> Self {
        Self {
            keep: keep_bundles,
            seen: 0,
            is_last,
            bytes: accumulator_bytes(myc, mcpp),
        }
    }
}

impl Program for StackedAccumulator {
    fn role(&self) -> &'static str {
        "accumulator"
    }

    fn memory_bytes(&self) -> usize {
        self.bytes
    }

    fn listening(&self, _: &OutputStatus) -> PortMask {
        PortMask::only(Port::NORTH)
    }

    fn on_receive(&mut self, _: Port, p: Payload, ctx: &mut TaskCtx) -> Result<(), String> {
        let Payload::Lanes(l) = p else {
            return Err("expected a lane bundle".into());
        };
        self.seen += 1;
        if self.seen <= self.keep {
            for &v in l.iter() {
                ctx.send_async(Port::EAST, Wavelet::data(v));
            }
        } else if self.is_last {
            return Err("bundle beyond the last accumulator row".into());
        } else {
            ctx.send(Port::SOUTH, Payload::Lanes(l));
        }
        Ok(())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
