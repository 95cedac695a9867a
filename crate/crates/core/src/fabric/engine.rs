use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::placement::{ChannelSpec, Direction, Endpoint, LinkId, NodeId, Placement};
use super::report::{histogram, PhaseCycles, RoleStats, SimReport};
use super::script::{CopyKind, HostOutput, HostScript};
use super::{OutputStatus, Payload, Port, PortMask, Program, Tag, TaskCtx, Wavelet};
use crate::error::{Error, Result};

pub const TRACE_HEADER: &str = "cycle,pe_row,pe_col,port,word_hex,task";

/// Machine parameters of the simulated wafer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FabricConfig {
    pub pe_memory_bytes: usize,
    /// Wavelets a link buffers, in addition to one slot per cycle of latency.
    pub fifo_capacity: usize,
    /// Words per cycle per host channel.
    pub channel_bandwidth: usize,
    pub grid_rows: usize,
    pub grid_cols: usize,
    /// Processor cycles for one FMAC on one PE.
    pub fmac_cycles: u64,
    pub max_cycles: Option<u64>,
}

impl Default for FabricConfig {
    fn default() -> Self {
        Self {
            pe_memory_bytes: 46 * 1024,
            fifo_capacity: 4,
            channel_bandwidth: 1,
            grid_rows: 1172,
            grid_cols: 762,
            fmac_cycles: 1,
            max_cycles: None,
        }
    }
}

struct Flit {
    ready: u64,
    payload: Payload,
}

struct Link {
    fifo: VecDeque<Flit>,
    cap: usize,
    latency: u64,
    to: Endpoint,
    from: Endpoint,
    /// Cycle of the last push, plus one (0 = never).
    last_push: u64,
}

impl Link {
    fn can_push(&self, t: u64) -> bool {
        self.fifo.len() < self.cap && self.last_push != t + 1
    }

    fn push(&mut self, t: u64, payload: Payload) {
        self.fifo.push_back(Flit {
            ready: t + self.latency,
            payload,
        });
        self.last_push = t + 1;
    }

    fn ready_head(&self, t: u64) -> bool {
        self.fifo.front().is_some_and(|f| f.ready <= t)
    }
}

struct Node {
    row: usize,
    col: usize,
    width: usize,
    program: Box<dyn Program>,
    inputs: [Option<LinkId>; Port::COUNT],
    outputs: [Option<LinkId>; Port::COUNT],
    sync_q: SyncQueue,
    async_q: Vec<VecDeque<Payload>>,
    async_mask: u8,
    status: OutputStatus,
    busy_until: u64,
    busy: u64,
    tasks: u64,
    fmacs: u64,
    fmuls: u64,
}

impl Node {
    fn pending(&self, inbox: u8, t: u64) -> bool {
        self.busy_until > t + 1 || !self.sync_q.is_empty() || self.async_mask != 0 || inbox != 0
    }
}

/// FIFO of staged sync sends; takes over the task's output buffer when empty.
#[derive(Default)]
struct SyncQueue {
    items: Vec<(Port, Payload)>,
    head: usize,
}

impl SyncQueue {
    fn is_empty(&self) -> bool {
        self.head == self.items.len()
    }

    fn len(&self) -> usize {
        self.items.len() - self.head
    }

    fn front(&self) -> Option<&(Port, Payload)> {
        self.items.get(self.head)
    }

    fn pop_front(&mut self) -> Payload {
        let filler = Payload::Word(Wavelet::token(0));
        let p = std::mem::replace(&mut self.items[self.head].1, filler);
        self.head += 1;
        p
    }

    fn append(&mut self, out: &mut Vec<(Port, Payload)>) {
        if self.is_empty() {
            self.items.clear();
            self.head = 0;
            std::mem::swap(&mut self.items, out);
        } else {
            self.items.append(out);
        }
    }
}

/// PEs to visit next cycle, iterated in ascending order.
struct NodeSet {
    bits: Vec<u64>,
}

impl NodeSet {
    fn new(n: usize) -> Self {
        Self {
            bits: vec![0; n.div_ceil(64)],
        }
    }

    fn insert(&mut self, i: NodeId) {
        self.bits[i / 64] |= 1 << (i % 64);
    }

    fn drain_sorted(&mut self, out: &mut Vec<NodeId>) {
        out.clear();
        for (w, word) in self.bits.iter_mut().enumerate() {
            let mut x = std::mem::take(word);
            while x != 0 {
                out.push(w * 64 + x.trailing_zeros() as usize);
                x &= x - 1;
            }
        }
    }
}

/// Pushes onto a link and wakes its receiving PE.
fn deliver(links: &mut [Link], inbox: &mut [u8], next: &mut NodeSet, l: LinkId, t: u64, payload: Payload) {
    let link = &mut links[l];
    link.push(t, payload);
    if let Endpoint::Pe { node, port } = link.to {
        inbox[node] |= 1 << port.0;
        next.insert(node);
    }
}

#[derive(Default)]
struct CopyState {
    started: bool,
    done: bool,
    /// Next word per stream (h2d) or `(read, taken)` per drain (d2h).
    pos: Vec<(usize, usize)>,
    out: Vec<Vec<u32>>,
}

/// Cycle-stepped model of a PE grid with host channels.
pub struct Fabric {
    cfg: FabricConfig,
    nodes: Vec<Node>,
    links: Vec<Link>,
    channels: Vec<ChannelSpec>,
    trace: Option<Box<dyn Write + Send>>,
    ctx: TaskCtx,
    /// Per PE, the input ports whose links hold flits.
    inbox: Vec<u8>,
}

impl Fabric {
    pub fn new(cfg: FabricConfig) -> Self {
        Self {
            cfg,
            nodes: Vec::new(),
            links: Vec::new(),
            channels: Vec::new(),
            trace: None,
            ctx: TaskCtx::default(),
            inbox: Vec::new(),
        }
    }

    pub fn config(&self) -> &FabricConfig {
        &self.cfg
    }

    /// Writes one CSV line per task activation (see [`TRACE_HEADER`]).
    pub fn set_trace(&mut self, w: Box<dyn Write + Send>) {
        self.trace = Some(w);
    }

    pub fn program(&self, node: NodeId) -> &dyn Program {
        self.nodes[node].program.as_ref()
    }

    /// Places programs and routes, checking grid bounds and per-PE memory.
    pub fn load_program(&mut self, p: Placement) -> Result<()> {
        let Placement {
            nodes,
            links,
            channels,
        } = p;
        let mut rows = 0;
        let mut cols = 0;
        for n in &nodes {
            rows = rows.max(n.row + 1);
            cols = cols.max(n.col + n.width);
        }
        if rows > self.cfg.grid_rows || cols > self.cfg.grid_cols {
            return Err(Error::GridCap {
                rows,
                cols,
                cap_rows: self.cfg.grid_rows,
                cap_cols: self.cfg.grid_cols,
                hint: "",
            });
        }
        for n in &nodes {
            let bytes = n.program.memory_bytes();
            if bytes > self.cfg.pe_memory_bytes {
                return Err(Error::MemoryBudget {
                    row: n.row,
                    col: n.col,
                    role: n.program.role(),
                    bytes,
                    budget: self.cfg.pe_memory_bytes,
                });
            }
        }
        let mut out_nodes: Vec<Node> = nodes
            .into_iter()
            .map(|n| Node {
                row: n.row,
                col: n.col,
                width: n.width,
                program: n.program,
                inputs: [None; Port::COUNT],
                outputs: [None; Port::COUNT],
                sync_q: SyncQueue::default(),
                async_q: (0..Port::COUNT).map(|_| VecDeque::new()).collect(),
                async_mask: 0,
                status: OutputStatus::default(),
                busy_until: 0,
                busy: 0,
                tasks: 0,
                fmacs: 0,
                fmuls: 0,
            })
            .collect();
        let mut out_links = Vec::with_capacity(links.len());
        for (id, l) in links.iter().enumerate() {
            for (ep, is_out) in [(l.from, true), (l.to, false)] {
                match ep {
                    Endpoint::Pe { node, port } => {
                        let n = out_nodes
                            .get_mut(node)
                            .ok_or_else(|| Error::Placement(format!("link {id} names missing node {node}")))?;
                        if port.idx() >= Port::COUNT {
                            return Err(Error::Placement(format!("port {} out of range", port.0)));
                        }
                        let slot = if is_out {
                            &mut n.outputs[port.idx()]
                        } else {
                            &mut n.inputs[port.idx()]
                        };
                        if slot.is_some() {
                            return Err(Error::Placement(format!(
                                "PE({},{}) {} port {port} routed twice",
                                n.row,
                                n.col,
                                if is_out { "output" } else { "input" }
                            )));
                        }
                        *slot = Some(id);
                    }
                    Endpoint::Host { channel } => {
                        let ch = channels
                            .get(channel)
                            .ok_or_else(|| Error::Placement(format!("link {id} names missing channel {channel}")))?;
                        let want = if is_out {
                            Direction::HostToDevice
                        } else {
                            Direction::DeviceToHost
                        };
                        if ch.direction != want {
                            return Err(Error::Placement(format!("channel {channel} used against its direction")));
                        }
                    }
                }
            }
            out_links.push(Link {
                fifo: VecDeque::new(),
                cap: self.cfg.fifo_capacity.max(1) + l.latency as usize - 1,
                latency: l.latency,
                to: l.to,
                from: l.from,
                last_push: 0,
            });
        }
        self.inbox = vec![0; out_nodes.len()];
        self.nodes = out_nodes;
        self.links = out_links;
        self.channels = channels;
        Ok(())
    }

    fn validate_script(&self, s: &HostScript) -> Result<()> {
        for (i, op) in s.ops.iter().enumerate() {
            let mut seen = Vec::new();
            let check = |ch: usize, dir: Direction, seen: &mut Vec<usize>| -> Result<&ChannelSpec> {
                let spec = self
                    .channels
                    .get(ch)
                    .ok_or_else(|| Error::Script(format!("copy {i}: unknown channel {ch}")))?;
                if spec.direction != dir {
                    return Err(Error::Script(format!("copy {i}: channel {ch} has the wrong direction")));
                }
                if seen.contains(&ch) {
                    return Err(Error::Script(format!("copy {i}: channel {ch} listed twice")));
                }
                seen.push(ch);
                Ok(spec)
            };
            match &op.kind {
                CopyKind::H2d(streams) => {
                    for st in streams {
                        let spec = check(st.channel, Direction::HostToDevice, &mut seen)?;
                        if !st.routes.is_empty() && st.routes.len() != st.words.len() {
                            return Err(Error::Script(format!("copy {i}: route list length mismatch")));
                        }
                        let max_route = st.routes.iter().copied().max().unwrap_or(0) as usize;
                        if !st.words.is_empty() && max_route >= spec.links.len() {
                            return Err(Error::Script(format!("copy {i}: route {max_route} missing on channel {}", st.channel)));
                        }
                    }
                }
                CopyKind::D2h(drains) => {
                    for d in drains {
                        let spec = check(d.channel, Direction::DeviceToHost, &mut seen)?;
                        if let Some(&(r, _)) = d.reads.iter().find(|r| r.0 >= spec.links.len()) {
                            return Err(Error::Script(format!("copy {i}: route {r} missing on channel {}", d.channel)));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Executes the host script to completion.
    pub fn run(&mut self, script: &HostScript) -> Result<(SimReport, HostOutput)> {
        self.validate_script(script)?;
        let ops = &script.ops;
        let mut st: Vec<CopyState> = ops
            .iter()
            .map(|op| match &op.kind {
                CopyKind::H2d(s) => CopyState {
                    pos: vec![(0, 0); s.len()],
                    ..Default::default()
                },
                CopyKind::D2h(d) => CopyState {
                    pos: vec![(0, 0); d.len()],
                    out: d.iter().map(|d| Vec::with_capacity(d.total_words())).collect(),
                    ..Default::default()
                },
            })
            .collect();
        let channel_sets: Vec<Vec<usize>> = ops.iter().map(|o| o.channels()).collect();
        let mut remaining = ops.len();
        let mut running: Vec<usize> = Vec::new();
        let mut starts_dirty = true;

        let bw = self.cfg.channel_bandwidth.max(1);
        let mut active: Vec<NodeId> = Vec::new();
        let mut timers: BinaryHeap<Reverse<(u64, NodeId)>> = BinaryHeap::new();
        let mut next = NodeSet::new(self.nodes.len());
        let mut phases = PhaseCycles::default();
        let mut h2d_words = 0u64;
        let mut d2h_words = 0u64;
        let mut host_tokens = 0u64;
        let mut t: u64 = 0;

        loop {
            if let Some(limit) = self.cfg.max_cycles {
                if t >= limit {
                    return Err(Error::Script(format!("cycle limit {limit} reached")));
                }
            }
            let mut progress = false;

            if starts_dirty {
                starts_dirty = false;
                for j in 0..ops.len() {
                    if st[j].started || st[j].done {
                        continue;
                    }
                    let ok = (0..j).all(|i| {
                        st[i].done
                            || (ops[i].nonblocking
                                && ops[j].nonblocking
                                && !(ops[i].is_d2h() && !ops[j].is_d2h())
                                && channel_sets[i].iter().all(|c| !channel_sets[j].contains(c)))
                    });
                    if ok {
                        st[j].started = true;
                        running.push(j);
                        progress = true;
                    }
                }
            }
            let h2d_running = running.iter().any(|&j| !ops[j].is_d2h());

            // Host writes.
            for &j in &running {
                let CopyKind::H2d(streams) = &ops[j].kind else { continue };
                let mut complete = true;
                for (si, s) in streams.iter().enumerate() {
                    let mut pos = st[j].pos[si].0;
                    let mut sent = 0;
                    while sent < bw && pos < s.words.len() {
                        let l = self.channels[s.channel].links[s.route(pos)];
                        if !self.links[l].can_push(t) {
                            break;
                        }
                        deliver(&mut self.links, &mut self.inbox, &mut next, l, t, Payload::Word(s.words[pos]));
                        pos += 1;
                        sent += 1;
                    }
                    if sent > 0 {
                        progress = true;
                        h2d_words += sent as u64;
                    }
                    st[j].pos[si].0 = pos;
                    complete &= pos == s.words.len();
                }
                if complete {
                    st[j].done = true;
                }
            }

            // PEs, ascending. A PE that did nothing sleeps until a timer or
            // a neighbour's push/pop wakes it.
            for &i in &active {
                let did = self.step(i, t, &mut next)?;
                progress |= did;
                if !self.nodes[i].pending(self.inbox[i], t) {
                    continue;
                }
                if did {
                    next.insert(i);
                } else if let Some(w) = self.wake_time(i, t) {
                    if w == t + 1 {
                        next.insert(i);
                    } else {
                        timers.push(Reverse((w, i)));
                    }
                }
            }

            // Host reads.
            let mut d2h_moved = false;
            for &j in &running {
                let CopyKind::D2h(drains) = &ops[j].kind else { continue };
                let mut complete = true;
                for (di, d) in drains.iter().enumerate() {
                    let (mut read, mut taken) = st[j].pos[di];
                    let mut got = 0;
                    while read < d.reads.len() {
                        let (route, words) = d.reads[read];
                        if taken == words {
                            read += 1;
                            taken = 0;
                            continue;
                        }
                        if got == bw {
                            break;
                        }
                        let l = self.channels[d.channel].links[route];
                        if !self.links[l].ready_head(t) {
                            break;
                        }
                        let flit = self.links[l].fifo.pop_front().expect("ready head");
                        let Payload::Word(w) = flit.payload else {
                            return Err(Error::Script(format!("lane bundle reached host channel {}", d.channel)));
                        };
                        st[j].out[di].push(w.word);
                        if w.tag == Tag::Token {
                            host_tokens += 1;
                        }
                        taken += 1;
                        got += 1;
                        if let Endpoint::Pe { node, .. } = self.links[l].from {
                            next.insert(node);
                        }
                    }
                    if got > 0 {
                        d2h_moved = true;
                        d2h_words += got as u64;
                    }
                    st[j].pos[di] = (read, taken);
                    complete &= read == d.reads.len();
                }
                if complete {
                    st[j].done = true;
                }
            }
            progress |= d2h_moved;

            let finished_before = running.len();
            running.retain(|&j| {
                if st[j].done {
                    remaining -= 1;
                    false
                } else {
                    true
                }
            });
            if running.len() != finished_before {
                starts_dirty = true;
                progress = true;
            }

            if h2d_running {
                phases.stream_in += 1;
            } else if d2h_moved {
                phases.stream_out += 1;
            } else {
                phases.compute += 1;
            }

            while let Some(&Reverse((w, i))) = timers.peek() {
                if w > t + 1 {
                    break;
                }
                timers.pop();
                next.insert(i);
            }
            next.drain_sorted(&mut active);

            if progress || !active.is_empty() {
                if remaining == 0 && active.is_empty() && timers.is_empty() {
                    break;
                }
                t += 1;
                continue;
            }

            match self.next_event(t, timers.peek().map(|r| r.0 .0), &running, ops) {
                Some(e) => {
                    // Nothing can happen before cycle `e`.
                    let skipped = e - t - 1;
                    if h2d_running {
                        phases.stream_in += skipped;
                    } else {
                        phases.compute += skipped;
                    }
                    t = e;
                    while let Some(&Reverse((w, i))) = timers.peek() {
                        if w > t {
                            break;
                        }
                        timers.pop();
                        next.insert(i);
                    }
                    next.drain_sorted(&mut active);
                }
                None => {
                    // This cycle did nothing; it is not part of the run.
                    if h2d_running {
                        phases.stream_in -= 1;
                    } else {
                        phases.compute -= 1;
                    }
                    if remaining == 0 {
                        break;
                    }
                    return Err(Error::Deadlock {
                        cycle: t,
                        diagnostic: self.diagnose(t, &running, ops, &st),
                    });
                }
            }
        }

        if let Some(w) = self.trace.as_mut() {
            w.flush()?;
        }
        let mut report = self.report(phases, h2d_words, d2h_words - host_tokens);
        report.host_tokens = host_tokens;
        let copies = st
            .into_iter()
            .zip(ops)
            .map(|(s, op)| op.is_d2h().then_some(s.out))
            .collect();
        Ok((report, HostOutput { copies }))
    }

    /// Runs one PE for cycle `t`; returns whether anything happened.
    fn step(&mut self, i: NodeId, t: u64, next: &mut NodeSet) -> Result<bool> {
        let Fabric {
            nodes,
            links,
            trace,
            ctx,
            inbox,
            ..
        } = self;
        let node = &mut nodes[i];
        let mut progress = false;

        if inbox[i] != 0 && node.busy_until <= t && node.sync_q.is_empty() {
            let mask: PortMask = node.program.listening(&node.status);
            let mut best: Option<(u64, usize)> = None;
            let mut cand = mask.0 & inbox[i];
            while cand != 0 {
                let p = cand.trailing_zeros() as usize;
                cand &= cand - 1;
                let Some(l) = node.inputs[p] else { continue };
                if let Some(f) = links[l].fifo.front() {
                    if f.ready <= t && best.is_none_or(|b| f.ready < b.0) {
                        best = Some((f.ready, p));
                    }
                }
            }
            if let Some((_, p)) = best {
                let l = node.inputs[p].expect("listened port has a link");
                let flit = links[l].fifo.pop_front().expect("ready head");
                if links[l].fifo.is_empty() {
                    inbox[i] &= !(1 << p);
                }
                if let Endpoint::Pe { node: src, .. } = links[l].from {
                    // Space freed; a stalled sender may proceed.
                    next.insert(src);
                }
                if let Some(w) = trace.as_mut() {
                    writeln!(
                        w,
                        "{t},{},{},{},{},{}",
                        node.row,
                        node.col,
                        Port(p as u8),
                        flit.payload,
                        node.program.role()
                    )?;
                }
                ctx.cost = 0;
                ctx.fmacs = 0;
                ctx.fmuls = 0;
                ctx.status = node.status;
                node.program
                    .on_receive(Port(p as u8), flit.payload, ctx)
                    .map_err(|message| Error::ProgramFault {
                        row: node.row,
                        col: node.col,
                        message,
                    })?;
                let cost = 1 + ctx.cost;
                node.busy_until = t + cost;
                node.busy += cost;
                node.tasks += 1;
                node.fmacs += ctx.fmacs;
                node.fmuls += ctx.fmuls;
                node.sync_q.append(&mut ctx.sync_out);
                for (port, payload) in ctx.async_out.drain(..) {
                    node.async_q[port.idx()].push_back(payload);
                    node.status.async_pending[port.idx()] += 1;
                    node.async_mask |= 1 << port.0;
                }
                progress = true;
            }
        }

        let mut used = 0u8;
        if t + 1 >= node.busy_until {
            while let Some(&(port, _)) = node.sync_q.front() {
                let p = port.idx();
                if used & (1 << p) != 0 {
                    break;
                }
                let l = node.outputs[p].ok_or_else(|| Error::ProgramFault {
                    row: node.row,
                    col: node.col,
                    message: format!("{} sent on unrouted port {port}", node.program.role()),
                })?;
                if !links[l].can_push(t) {
                    break;
                }
                let payload = node.sync_q.pop_front();
                deliver(links, inbox, next, l, t, payload);
                used |= 1 << p;
                progress = true;
            }
        }
        let mut pending_async = node.async_mask & !used;
        while pending_async != 0 {
            let p = pending_async.trailing_zeros() as usize;
            pending_async &= pending_async - 1;
            let l = node.outputs[p].ok_or_else(|| Error::ProgramFault {
                row: node.row,
                col: node.col,
                message: format!("{} sent async on unrouted port {}", node.program.role(), Port(p as u8)),
            })?;
            if !links[l].can_push(t) {
                continue;
            }
            let payload = node.async_q[p].pop_front().expect("non-empty");
            node.status.async_pending[p] -= 1;
            if node.async_q[p].is_empty() {
                node.async_mask &= !(1 << p);
            }
            deliver(links, inbox, next, l, t, payload);
            progress = true;
        }
        Ok(progress)
    }

    /// Cycle at which sleeping PE `i` may act again, if nothing wakes it sooner.
    fn wake_time(&self, i: NodeId, t: u64) -> Option<u64> {
        let n = &self.nodes[i];
        let mut w = u64::MAX;
        if n.busy_until > t {
            // Staged output may leave in the task's last cycle.
            let free = if n.sync_q.is_empty() { n.busy_until } else { n.busy_until - 1 };
            w = free.max(t + 1);
        }
        let mut ports = self.inbox[i];
        while ports != 0 {
            let p = ports.trailing_zeros() as usize;
            ports &= ports - 1;
            if let Some(f) = n.inputs[p].and_then(|l| self.links[l].fifo.front()) {
                if f.ready > t {
                    w = w.min(f.ready);
                }
            }
        }
        (w != u64::MAX).then_some(w)
    }

    /// Earliest future cycle at which a PE wakes or a flit reaches the host.
    fn next_event(&self, t: u64, timer: Option<u64>, running: &[usize], ops: &[super::CopyOp]) -> Option<u64> {
        let mut e = timer.unwrap_or(u64::MAX);
        for &j in running {
            if let CopyKind::D2h(drains) = &ops[j].kind {
                for d in drains {
                    for &l in &self.channels[d.channel].links {
                        if let Some(f) = self.links[l].fifo.front() {
                            if f.ready > t {
                                e = e.min(f.ready);
                            }
                        }
                    }
                }
            }
        }
        (e != u64::MAX).then_some(e.max(t + 1))
    }

    fn diagnose(&self, t: u64, running: &[usize], ops: &[super::CopyOp], st: &[CopyState]) -> String {
        let active: Vec<NodeId> = (0..self.nodes.len()).filter(|&i| self.nodes[i].pending(self.inbox[i], t)).collect();
        let mut s = String::new();
        for (j, op) in ops.iter().enumerate() {
            if st[j].done {
                continue;
            }
            let state = if running.contains(&j) { "running" } else { "waiting" };
            let _ = write!(
                s,
                "copy {j} ({}, {} words, {state}); ",
                if op.is_d2h() { "d2h" } else { "h2d" },
                op.words()
            );
        }
        for &i in active.iter().take(12) {
            let n = &self.nodes[i];
            let _ = write!(s, "PE({},{}) {}:", n.row, n.col, n.program.role());
            for p in 0..Port::COUNT {
                if let Some(l) = n.inputs[p] {
                    let f = &self.links[l].fifo;
                    if let Some(head) = f.front() {
                        let _ = write!(s, " in {} {}/{} head {}", Port(p as u8), f.len(), self.links[l].cap, head.payload);
                    }
                }
            }
            let _ = write!(s, " listening {:#04x}", n.program.listening(&n.status).0);
            if let Some((p, _)) = n.sync_q.front() {
                let _ = write!(s, " blocked sending {} on {p}", n.sync_q.len());
            }
            let _ = write!(s, "; ");
        }
        if active.len() > 12 {
            let _ = write!(s, "... {} more PEs", active.len() - 12);
        }
        s
    }

    fn report(&self, phases: PhaseCycles, h2d_words: u64, d2h_words: u64) -> SimReport {
        let mut roles: BTreeMap<String, RoleStats> = BTreeMap::new();
        let mut counters: BTreeMap<String, u64> = BTreeMap::new();
        let mut r = SimReport {
            total_cycles: phases.total(),
            phases,
            h2d_words,
            d2h_words,
            panel_passes: 1,
            ..Default::default()
        };
        for n in &self.nodes {
            let w = n.width as u64;
            r.fmacs += n.fmacs;
            r.fmuls += n.fmuls;
            r.tasks += n.tasks;
            r.pe_count += w;
            r.peak_pe_memory_bytes = r.peak_pe_memory_bytes.max(n.program.memory_bytes() as u64);
            let e = roles.entry(n.program.role().to_string()).or_default();
            e.pes += w;
            e.busy_cycles += n.busy * w;
            e.max_busy = e.max_busy.max(n.busy);
            e.tasks += n.tasks;
            for (k, v) in n.program.counters() {
                *counters.entry(k.to_string()).or_default() += v;
            }
        }
        r.busy_histogram = histogram(self.nodes.iter().map(|n| (n.busy, n.width as u64)));
        r.roles = roles;
        r.counters = counters;
        let staged: u64 = self
            .nodes
            .iter()
            .map(|n| (n.sync_q.len() + n.async_q.iter().map(VecDeque::len).sum::<usize>()) as u64)
            .sum();
        r.residual_wavelets = staged + self.links.iter().map(|l| l.fifo.len() as u64).sum::<u64>();
        r
    }
}
