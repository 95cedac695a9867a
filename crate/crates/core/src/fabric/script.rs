use super::{ChannelId, Wavelet};

/// Words written by the host through one channel, in order.
#[derive(Debug, Clone, Default)]
pub struct ChannelStream {
    pub channel: ChannelId,
    pub words: Vec<Wavelet>,
    /// Route index (within the channel) per word; empty means route 0 for all.
    pub routes: Vec<u16>,
}

impl ChannelStream {
    pub fn new(channel: ChannelId) -> Self {
        Self {
            channel,
            words: Vec::new(),
            routes: Vec::new(),
        }
    }

    pub fn push(&mut self, w: Wavelet) {
        self.words.push(w);
    }

    /// Pushes with an explicit route; once used, every word must carry one.
    pub fn push_to(&mut self, route: u16, w: Wavelet) {
        debug_assert_eq!(self.routes.len(), self.words.len());
        self.words.push(w);
        self.routes.push(route);
    }

    pub(crate) fn route(&self, i: usize) -> usize {
        self.routes.get(i).copied().unwrap_or(0) as usize
    }
}

/// Ordered reads from one d2h channel: `(route, words)`.
#[derive(Debug, Clone, Default)]
pub struct ChannelDrain {
    pub channel: ChannelId,
    pub reads: Vec<(usize, usize)>,
}

impl ChannelDrain {
    pub fn new(channel: ChannelId) -> Self {
        Self {
            channel,
            reads: Vec::new(),
        }
    }

    pub fn read(mut self, route: usize, words: usize) -> Self {
        self.reads.push((route, words));
        self
    }

    pub fn total_words(&self) -> usize {
        self.reads.iter().map(|r| r.1).sum()
    }
}

#[derive(Debug, Clone)]
pub enum CopyKind {
    H2d(Vec<ChannelStream>),
    D2h(Vec<ChannelDrain>),
}

/// One host memcpy. A blocking copy waits for every earlier copy and blocks
/// every later one.
#[derive(Debug, Clone)]
pub struct CopyOp {
    pub kind: CopyKind,
    pub nonblocking: bool,
}

impl CopyOp {
    pub fn h2d(streams: Vec<ChannelStream>, nonblocking: bool) -> Self {
        Self {
            kind: CopyKind::H2d(streams),
            nonblocking,
        }
    }

    pub fn d2h(drains: Vec<ChannelDrain>, nonblocking: bool) -> Self {
        Self {
            kind: CopyKind::D2h(drains),
            nonblocking,
        }
    }

    pub fn channels(&self) -> Vec<ChannelId> {
        match &self.kind {
            CopyKind::H2d(s) => s.iter().map(|s| s.channel).collect(),
            CopyKind::D2h(d) => d.iter().map(|d| d.channel).collect(),
        }
    }

    pub fn words(&self) -> usize {
        match &self.kind {
            CopyKind::H2d(s) => s.iter().map(|s| s.words.len()).sum(),
            CopyKind::D2h(d) => d.iter().map(|d| d.total_words()).sum(),
        }
    }

    pub fn is_d2h(&self) -> bool {
        matches!(self.kind, CopyKind::D2h(_))
    }
}

/// Host-side sequence of copies.
#[derive(Debug, Clone, Default)]
pub struct HostScript {
    pub ops: Vec<CopyOp>,
}

impl HostScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, op: CopyOp) {
        self.ops.push(op);
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

/// Words received by each d2h copy, per drain in script order.
#[derive(Debug, Clone, Default)]
pub struct HostOutput {
    pub copies: Vec<Option<Vec<Vec<u32>>>>,
}

impl HostOutput {
    pub fn d2h(&self, op: usize) -> &[Vec<u32>] {
        self.copies[op].as_deref().unwrap_or(&[])
    }
}
