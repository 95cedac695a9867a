use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCycles {
    pub stream_in: u64,
    pub compute: u64,
    pub stream_out: u64,
}

impl PhaseCycles {
    pub fn total(&self) -> u64 {
        self.stream_in + self.compute + self.stream_out
    }
}

/// PEs whose busy-cycle count falls in `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistBucket {
    pub lo: u64,
    pub hi: u64,
    pub pes: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleStats {
    pub pes: u64,
    pub busy_cycles: u64,
    pub max_busy: u64,
    pub tasks: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub total_cycles: u64,
    pub phases: PhaseCycles,
    pub h2d_words: u64,
    /// Data words read by the host; control tokens are counted separately.
    pub d2h_words: u64,
    pub host_tokens: u64,
    pub fmacs: u64,
    pub fmuls: u64,
    pub tasks: u64,
    pub pe_count: u64,
    pub peak_pe_memory_bytes: u64,
    pub busy_histogram: Vec<HistBucket>,
    pub roles: BTreeMap<String, RoleStats>,
    /// Wavelets left in links or output queues after every copy completed.
    pub residual_wavelets: u64,
    pub counters: BTreeMap<String, u64>,
    pub panel_passes: u32,
}

impl SimReport {
    /// Adds a subsequent run (e.g. another column panel) executed back to back.
    pub fn accumulate(&mut self, o: &SimReport) {
        self.total_cycles += o.total_cycles;
        self.phases.stream_in += o.phases.stream_in;
        self.phases.compute += o.phases.compute;
        self.phases.stream_out += o.phases.stream_out;
        self.h2d_words += o.h2d_words;
        self.d2h_words += o.d2h_words;
        self.host_tokens += o.host_tokens;
        self.fmacs += o.fmacs;
        self.fmuls += o.fmuls;
        self.tasks += o.tasks;
        self.pe_count = self.pe_count.max(o.pe_count);
        self.peak_pe_memory_bytes = self.peak_pe_memory_bytes.max(o.peak_pe_memory_bytes);
        for b in &o.busy_histogram {
            match self.busy_histogram.iter_mut().find(|x| x.lo == b.lo) {
                Some(x) => x.pes += b.pes,
                None => self.busy_histogram.push(*b),
            }
        }
        self.busy_histogram.sort_by_key(|b| b.lo);
        for (k, r) in &o.roles {
            let e = self.roles.entry(k.clone()).or_default();
            e.pes = e.pes.max(r.pes);
            e.busy_cycles += r.busy_cycles;
            e.max_busy = e.max_busy.max(r.max_busy);
            e.tasks += r.tasks;
        }
        self.residual_wavelets += o.residual_wavelets;
        for (k, v) in &o.counters {
            *self.counters.entry(k.clone()).or_default() += v;
        }
        self.panel_passes += o.panel_passes;
    }

    pub fn counter(&self, name: &str) -> u64 {
        self.counters.get(name).copied().unwrap_or(0)
    }
}

/// Log2 buckets: `[0,1)`, `[1,2)`, `[2,4)`, ...
pub(crate) fn histogram(samples: impl IntoIterator<Item = (u64, u64)>) -> Vec<HistBucket> {
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for (busy, pes) in samples {
        let b = if busy == 0 { 0 } else { 64 - busy.leading_zeros() };
        *counts.entry(b).or_default() += pes;
    }
    counts
        .into_iter()
        .map(|(b, pes)| {
            let (lo, hi) = if b == 0 { (0, 1) } else { (1u64 << (b - 1), 1u64.checked_shl(b).unwrap_or(u64::MAX)) };
            HistBucket { lo, hi, pes }
        })
        .collect()
}
