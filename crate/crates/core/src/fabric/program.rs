use std::any::Any;

use super::{Payload, Port, PortMask};

/// Output-side state visible to a program when it decides what to listen to.
#[derive(Debug, Clone, Copy, Default)]
pub struct OutputStatus {
    /// Payloads still queued on each port's asynchronous (DSD-style) output.
    pub async_pending: [u32; Port::COUNT],
}

impl OutputStatus {
    pub fn async_idle(&self, p: Port) -> bool {
        self.async_pending[p.idx()] == 0
    }

    pub fn all_async_idle(&self) -> bool {
        self.async_pending.iter().all(|&n| n == 0)
    }
}

/// Side effects of one task activation.
#[derive(Debug, Default)]
pub struct TaskCtx {
    pub(crate) sync_out: Vec<(Port, Payload)>,
    pub(crate) async_out: Vec<(Port, Payload)>,
    pub(crate) cost: u64,
    pub(crate) fmacs: u64,
    pub(crate) fmuls: u64,
    pub(crate) status: OutputStatus,
}

impl TaskCtx {
    /// Blocking send: the PE takes no further task until it has left.
    pub fn send(&mut self, port: Port, payload: impl Into<Payload>) {
        self.sync_out.push((port, payload.into()));
    }

    /// Background send from local memory; does not block the processor.
    pub fn send_async(&mut self, port: Port, payload: impl Into<Payload>) {
        self.async_out.push((port, payload.into()));
    }

    /// Extra processor cycles this task occupies beyond its first.
    pub fn spend(&mut self, cycles: u64) {
        self.cost += cycles;
    }

    pub fn count_fmacs(&mut self, n: u64) {
        self.fmacs += n;
    }

    pub fn count_fmuls(&mut self, n: u64) {
        self.fmuls += n;
    }

    /// Output queues as they stood when the task started.
    pub fn status(&self) -> &OutputStatus {
        &self.status
    }
}

/// Task code placed on a PE (or on a lock-step span of identical PEs).
pub trait Program: Send {
    fn role(&self) -> &'static str;

    /// Local memory needed by each PE running this program.
    fn memory_bytes(&self) -> usize;

    /// Ports whose arrivals may trigger a task in the current state.
    fn listening(&self, out: &OutputStatus) -> PortMask;

    fn on_receive(&mut self, port: Port, payload: Payload, ctx: &mut TaskCtx) -> Result<(), String>;

    /// Named instrumentation counters, summed across PEs into the report.
    fn counters(&self) -> Vec<(&'static str, u64)> {
        Vec::new()
    }

    fn as_any(&self) -> &dyn Any;
}
