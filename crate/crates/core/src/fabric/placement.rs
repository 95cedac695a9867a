use super::{Port, Program};

pub type NodeId = usize;
pub type LinkId = usize;
pub type ChannelId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    West,
    North,
    East,
    South,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    HostToDevice,
    DeviceToHost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Pe { node: NodeId, port: Port },
    Host { channel: ChannelId },
}

/// A program placed at `(row, col)`, covering `width` PEs to the east.
pub struct NodeSpec {
    pub row: usize,
    pub col: usize,
    pub width: usize,
    pub program: Box<dyn Program>,
}

#[derive(Debug, Clone, Copy)]
pub struct LinkSpec {
    pub from: Endpoint,
    pub to: Endpoint,
    /// Cycles from push to visibility at the receiver.
    pub latency: u64,
}

#[derive(Debug, Clone)]
pub struct ChannelSpec {
    pub edge: Edge,
    pub lane: usize,
    pub direction: Direction,
    /// Links the host writes (h2d) or reads (d2h), indexed by the script.
    pub links: Vec<LinkId>,
}

/// Programs, routes and host channels for one run.
#[derive(Default)]
pub struct Placement {
    pub(crate) nodes: Vec<NodeSpec>,
    pub(crate) links: Vec<LinkSpec>,
    pub(crate) channels: Vec<ChannelSpec>,
}

impl Placement {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn add_node(&mut self, row: usize, col: usize, width: usize, program: Box<dyn Program>) -> NodeId {
        self.nodes.push(NodeSpec {
            row,
            col,
            width: width.max(1),
            program,
        });
        self.nodes.len() - 1
    }

    /// PE-to-PE route; `latency` is the hop count.
    pub fn connect(&mut self, from: NodeId, out: Port, to: NodeId, inp: Port, latency: u64) -> LinkId {
        self.push_link(
            Endpoint::Pe { node: from, port: out },
            Endpoint::Pe { node: to, port: inp },
            latency,
        )
    }

    pub fn add_channel(&mut self, edge: Edge, lane: usize, direction: Direction) -> ChannelId {
        self.channels.push(ChannelSpec {
            edge,
            lane,
            direction,
            links: Vec::new(),
        });
        self.channels.len() - 1
    }

    /// Adds a host-to-PE route on an h2d channel; returns its index within the channel.
    pub fn feed(&mut self, channel: ChannelId, to: NodeId, inp: Port, latency: u64) -> usize {
        let l = self.push_link(
            Endpoint::Host { channel },
            Endpoint::Pe { node: to, port: inp },
            latency,
        );
        self.channels[channel].links.push(l);
        self.channels[channel].links.len() - 1
    }

    /// Adds a PE-to-host route on a d2h channel; returns its index within the channel.
    pub fn drain(&mut self, from: NodeId, out: Port, channel: ChannelId, latency: u64) -> usize {
        let l = self.push_link(
            Endpoint::Pe { node: from, port: out },
            Endpoint::Host { channel },
            latency,
        );
        self.channels[channel].links.push(l);
        self.channels[channel].links.len() - 1
    }

    fn push_link(&mut self, from: Endpoint, to: Endpoint, latency: u64) -> LinkId {
        self.links.push(LinkSpec {
            from,
            to,
            latency: latency.max(1),
        });
        self.links.len() - 1
    }
}
