//! Router and worker task code for SDDMM.

use std::any::Any;

use crate::fabric::{OutputStatus, Payload, Port, PortMask, Program, Tag, TaskCtx, Wavelet};
use crate::formats::{CooTile, NULL_WORD};

/// Host drain route of a worker (a separate color from the east mesh link).
pub const HOST_PORT: Port = Port(4);

/// COO indices and values, output buffer and both slabs.
pub fn worker_bytes(mnz: usize, lh: usize, lw: usize) -> usize {
    4 * (4 * mnz + lh + lw)
}

fn data(p: &Payload) -> Result<Wavelet, String> {
    p.word().ok_or_else(|| "expected a single wavelet".to_string())
}

/// Passes every word from `input` to `output`.
pub struct Relay {
    role: &'static str,
    input: Port,
    output: Port,
}

impl Relay {
    pub fn new(role: &'static str, input: Port, output: Port) -> Self {
        Self { role, input, output }
    }
}

impl Program for Relay {
    fn role(&self) -> &'static str {
        self.role
    }

    fn memory_bytes(&self) -> usize {
        16
    }

    fn listening(&self, _: &OutputStatus) -> PortMask {
        PortMask::only(self.input)
    }

    fn on_receive(&mut self, _: Port, p: Payload, ctx: &mut TaskCtx) -> Result<(), String> {
        ctx.send(self.output, p);
        Ok(())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Takes the first `width` words of each C row south into its tile column
/// and forwards the remaining `rest` words east.
pub struct NorthRouter {
    width: usize,
    rest: usize,
    seen: usize,
}

impl NorthRouter {
    pub fn new(width: usize, rest: usize) -> Self {
        Self { width, rest, seen: 0 }
    }
}

impl Program for NorthRouter {
    fn role(&self) -> &'static str {
        "north_router"
    }

    fn memory_bytes(&self) -> usize {
        16
    }

    fn listening(&self, _: &OutputStatus) -> PortMask {
        PortMask::only(Port::WEST)
    }

    fn on_receive(&mut self, _: Port, p: Payload, ctx: &mut TaskCtx) -> Result<(), String> {
        let port = if self.seen < self.width { Port::SOUTH } else { Port::EAST };
        ctx.send(port, p);
        self.seen += 1;
        if self.seen == self.width + self.rest {
            self.seen = 0;
        }
        Ok(())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Where a worker sits relative to the grid edges.
#[derive(Debug, Clone, Copy)]
pub struct Neighbours {
    pub west: bool,
    pub north: bool,
    pub east: bool,
    pub south: bool,
}

/// Holds one COO tile, captures its B and C slabs each step and accumulates
/// the sampled products. Completion tokens travel east and south; the last
/// worker reports to the host.
pub struct SddmmWorker {
    tile: CooTile,
    nb: Neighbours,
    steps: usize,
    fmac_cycles: u64,
    y: Vec<f32>,
    b: Vec<f32>,
    c: Vec<f32>,
    b_got: usize,
    c_got: usize,
    step: usize,
    computed: bool,
    west_token: bool,
    north_token: bool,
}

impl SddmmWorker {
    pub fn new(tile: CooTile, lh: usize, lw: usize, steps: usize, nb: Neighbours, fmac_cycles: u64) -> Self {
        let mnz = tile.capacity();
        Self {
            tile,
            nb,
            steps,
            fmac_cycles,
            y: vec![0.0; mnz],
            b: vec![0.0; lh],
            c: vec![0.0; lw],
            b_got: 0,
            c_got: 0,
            step: 0,
            computed: false,
            west_token: false,
            north_token: false,
        }
    }

    fn compute(&mut self, ctx: &mut TaskCtx) {
        let n = self.tile.len;
        for k in 0..n {
            let (i, j) = (self.tile.row_idx[k] as usize, self.tile.col_idx[k] as usize);
            self.y[k] += self.b[i] * self.c[j];
        }
        ctx.count_fmacs(n as u64);
        ctx.spend(n as u64 * self.fmac_cycles);
        self.computed = true;
    }

    fn finish(&mut self, ctx: &mut TaskCtx) {
        let n = self.tile.len;
        for k in 0..n {
            self.y[k] *= self.tile.values[k];
        }
        ctx.count_fmuls(n as u64);
        ctx.spend(n as u64 * self.fmac_cycles);
        for k in 0..self.y.len() {
            let w = if k < n { self.y[k].to_bits() } else { NULL_WORD };
            ctx.send_async(HOST_PORT, Wavelet::raw_value(w));
        }
        self.step = self.steps;
    }

    fn try_advance(&mut self, ctx: &mut TaskCtx) {
        if !self.computed && self.b_got == self.b.len() && self.c_got == self.c.len() {
            self.compute(ctx);
        }
        if !self.computed {
            return;
        }
        if self.step + 1 == self.steps {
            self.finish(ctx);
            return;
        }
        if (self.nb.west && !self.west_token) || (self.nb.north && !self.north_token) {
            return;
        }
        if self.nb.east {
            ctx.send(Port::EAST, Wavelet::token(self.step as u32));
        }
        if self.nb.south {
            ctx.send(Port::SOUTH, Wavelet::token(self.step as u32));
        }
        if !self.nb.east && !self.nb.south {
            ctx.send(HOST_PORT, Wavelet::token(self.step as u32));
        }
        self.step += 1;
        self.b_got = 0;
        self.c_got = 0;
        self.computed = false;
        self.west_token = false;
        self.north_token = false;
    }
}

impl Program for SddmmWorker {
    fn role(&self) -> &'static str {
        "sddmm_worker"
    }

    fn memory_bytes(&self) -> usize {
        worker_bytes(self.y.len(), self.b.len(), self.c.len())
    }

    fn listening(&self, _: &OutputStatus) -> PortMask {
        if self.step == self.steps {
            PortMask::NONE
        } else {
            PortMask::only(Port::WEST).with(Port::NORTH)
        }
    }

    fn on_receive(&mut self, port: Port, p: Payload, ctx: &mut TaskCtx) -> Result<(), String> {
        let w = data(&p)?;
        match (port, w.tag) {
            (Port::WEST, Tag::Token) => self.west_token = true,
            (Port::NORTH, Tag::Token) => self.north_token = true,
            (Port::WEST, _) => {
                if self.b_got == self.b.len() {
                    return Err(format!("B slab overflow in step {}", self.step));
                }
                self.b[self.b_got] = w.as_f32();
                self.b_got += 1;
                if self.nb.east {
                    ctx.send(Port::EAST, w);
                }
            }
            (Port::NORTH, _) => {
                if self.c_got == self.c.len() {
                    return Err(format!("C slab overflow in step {}", self.step));
                }
                self.c[self.c_got] = w.as_f32();
                self.c_got += 1;
                if self.nb.south {
                    ctx.send(Port::SOUTH, w);
                }
            }
            _ => return Err(format!("unexpected input on {port}")),
        }
        self.try_advance(ctx);
        Ok(())
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}
