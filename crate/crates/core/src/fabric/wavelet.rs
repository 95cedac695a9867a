use std::fmt;

/// Simulation-only label for traces; never inspected by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    Index,
    Value,
    Sentinel,
    Data,
    Token,
}

/// A 32-bit data packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Wavelet {
    pub word: u32,
    pub tag: Tag,
}

impl Wavelet {
    pub fn index(word: u32) -> Self {
        Self {
            word,
            tag: Tag::Index,
        }
    }

    pub fn value(v: f32) -> Self {
        Self {
            word: v.to_bits(),
            tag: Tag::Value,
        }
    }

    pub fn raw_value(word: u32) -> Self {
        Self {
            word,
            tag: Tag::Value,
        }
    }

    pub fn sentinel(word: u32) -> Self {
        Self {
            word,
            tag: Tag::Sentinel,
        }
    }

    pub fn data(v: f32) -> Self {
        Self {
            word: v.to_bits(),
            tag: Tag::Data,
        }
    }

    pub fn token(word: u32) -> Self {
        Self {
            word,
            tag: Tag::Token,
        }
    }

    pub fn as_f32(self) -> f32 {
        f32::from_bits(self.word)
    }
}

/// What travels over a link in one cycle.
///
/// `Lanes` is used between lock-step spans of equal width: one 32-bit word per
/// PE of the span, all crossing their own physical link in the same cycle.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Word(Wavelet),
    Lanes(Box<[f32]>),
}

impl Payload {
    /// 32-bit words carried (one per lane for `Lanes`).
    pub fn words(&self) -> usize {
        match self {
            Payload::Word(_) => 1,
            Payload::Lanes(l) => l.len(),
        }
    }

    pub fn word(&self) -> Option<Wavelet> {
        match self {
            Payload::Word(w) => Some(*w),
            Payload::Lanes(_) => None,
        }
    }
}

impl From<Wavelet> for Payload {
    fn from(w: Wavelet) -> Self {
        Payload::Word(w)
    }
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::Word(w) => write!(f, "{:08x}", w.word),
            Payload::Lanes(l) => write!(f, "lanes[{}]", l.len()),
        }
    }
}

/// Input or output port of a PE. Ports 0..4 are the cardinal directions;
/// higher numbers are extra routes (colors) sharing a direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Port(pub u8);

impl Port {
    pub const WEST: Port = Port(0);
    pub const NORTH: Port = Port(1);
    pub const EAST: Port = Port(2);
    pub const SOUTH: Port = Port(3);
    pub const COUNT: usize = 8;

    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0 => f.write_str("W"),
            1 => f.write_str("N"),
            2 => f.write_str("E"),
            3 => f.write_str("S"),
            n => write!(f, "C{n}"),
        }
    }
}

/// Set of ports a program is currently willing to take a task from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PortMask(pub u8);

impl PortMask {
    pub const NONE: PortMask = PortMask(0);

    pub fn only(p: Port) -> Self {
        PortMask(1 << p.0)
    }

    pub fn with(self, p: Port) -> Self {
        PortMask(self.0 | (1 << p.0))
    }

    pub fn contains(self, p: Port) -> bool {
        self.0 & (1 << p.0) != 0
    }
}
