//! Cycle-level model of the PE grid: links with bounded FIFOs, one task per PE
//! per cycle, host channels driven by a copy script.

mod engine;
mod placement;
mod program;
mod report;
mod script;
mod trace;
mod wavelet;

pub use engine::{Fabric, FabricConfig, TRACE_HEADER};
pub use trace::SharedTrace;
pub use placement::{ChannelId, ChannelSpec, Direction, Edge, Endpoint, LinkId, LinkSpec, NodeId, NodeSpec, Placement};
pub use program::{OutputStatus, Program, TaskCtx};
pub use report::{HistBucket, PhaseCycles, RoleStats, SimReport};
pub use script::{ChannelDrain, ChannelStream, CopyKind, CopyOp, HostOutput, HostScript};
pub use wavelet::{Payload, Port, PortMask, Tag, Wavelet};

#[cfg(test)]
mod tests {
    use std::any::Any;
    use std::io::Write;
    use std::sync::{Arc, Mutex};

    use super::*;
    use crate::Error;

    /// Counts words arriving from the west.
    struct Sink {
        got: Vec<u32>,
        listen: bool,
    }

    impl Program for Sink {
        fn role(&self) -> &'static str {
            "sink"
        }
        fn memory_bytes(&self) -> usize {
            4
        }
        fn listening(&self, _: &OutputStatus) -> PortMask {
            if self.listen {
                PortMask::only(Port::WEST)
            } else {
                PortMask::NONE
            }
        }
        fn on_receive(&mut self, _: Port, p: Payload, _: &mut TaskCtx) -> Result<(), String> {
            self.got.push(p.word().unwrap().word);
            Ok(())
        }
        fn counters(&self) -> Vec<(&'static str, u64)> {
            vec![("received", self.got.len() as u64)]
        }
        fn as_any(&self) -> &dyn Any {
            self
        }
    }

    /// Forwards west input east, optionally spending extra cycles.
    struct Relay {
        extra: u64,
        bytes: usize,
    }

    impl Program for Relay {
        fn role(&self) -> &'static str {
            "relay"
        }
        fn memory_bytes(&self) -> usize {
            self.bytes
        }
        fn listening(&self, _: &OutputStatus) -> PortMask {
            PortMask::only(Port::WEST)
        }
        fn on_receive(&mut self, _: Port, p: Payload, ctx: &mut TaskCtx) -> Result<(), String> {
            ctx.spend(self.extra);
            ctx.send(Port::EAST, p);
            Ok(())
        }
        fn as_any(&self) -> &dyn Any {
            self
        }
    }

    fn relay(extra: u64) -> Box<dyn Program> {
        Box::new(Relay { extra, bytes: 8 })
    }

    fn words(n: u32) -> Vec<Wavelet> {
        (0..n).map(Wavelet::index).collect()
    }

    /// Host -> relay chain of `hops` -> host.
    fn chain(hops: usize, extra: u64) -> (Placement, usize, usize) {
        let mut p = Placement::new();
        let ids: Vec<_> = (0..hops).map(|c| p.add_node(0, c, 1, relay(extra))).collect();
        for w in ids.windows(2) {
            p.connect(w[0], Port::EAST, w[1], Port::WEST, 1);
        }
        let cin = p.add_channel(Edge::West, 0, Direction::HostToDevice);
        p.feed(cin, ids[0], Port::WEST, 1);
        let cout = p.add_channel(Edge::East, 0, Direction::DeviceToHost);
        p.drain(*ids.last().unwrap(), Port::EAST, cout, 1);
        (p, cin, cout)
    }

    fn h2d(ch: usize, w: Vec<Wavelet>, nonblocking: bool) -> CopyOp {
        CopyOp::h2d(
            vec![ChannelStream {
                channel: ch,
                words: w,
                routes: vec![],
            }],
            nonblocking,
        )
    }

    #[derive(Clone, Default)]
    struct Buf(Arc<Mutex<Vec<u8>>>);

    impl Write for Buf {
        fn write(&mut self, b: &[u8]) -> std::io::Result<usize> {
            self.0.lock().unwrap().extend_from_slice(b);
            Ok(b.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn empty_script_is_zero_cycles() {
        let mut f = Fabric::new(FabricConfig::default());
        f.load_program(Placement::new()).unwrap();
        let (r, out) = f.run(&HostScript::new()).unwrap();
        assert_eq!(r.total_cycles, 0);
        assert_eq!(r.phases, PhaseCycles::default());
        assert!(out.copies.is_empty());
    }

    #[test]
    fn ten_word_stream_in() {
        let mut p = Placement::new();
        let s = p.add_node(0, 0, 1, Box::new(Sink { got: vec![], listen: true }));
        let ch = p.add_channel(Edge::West, 0, Direction::HostToDevice);
        p.feed(ch, s, Port::WEST, 1);
        let mut f = Fabric::new(FabricConfig::default());
        f.load_program(p).unwrap();
        let mut script = HostScript::new();
        script.push(h2d(ch, words(10), false));
        let (r, _) = f.run(&script).unwrap();
        assert_eq!(r.phases.stream_in, 10);
        assert_eq!(r.h2d_words, 10);
        // The last word is consumed one cycle after it was written.
        assert_eq!(r.total_cycles, 11);
        let sink = f.program(s).as_any().downcast_ref::<Sink>().unwrap();
        assert_eq!(sink.got, (0..10).collect::<Vec<_>>());
        assert_eq!(r.counter("received"), 10);
    }

    #[test]
    fn one_hop_per_cycle() {
        let (p, cin, cout) = chain(3, 0);
        let mut f = Fabric::new(FabricConfig::default());
        f.load_program(p).unwrap();
        let mut buf = Buf::default();
        writeln!(buf, "{TRACE_HEADER}").unwrap();
        f.set_trace(Box::new(buf.clone()));
        let mut script = HostScript::new();
        script.push(h2d(cin, vec![Wavelet::index(0xab)], true));
        script.push(CopyOp::d2h(vec![ChannelDrain::new(cout).read(0, 1)], true));
        let (r, out) = f.run(&script).unwrap();
        assert_eq!(out.d2h(1), &[vec![0xab]]);
        let text = String::from_utf8(buf.0.lock().unwrap().clone()).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "cycle,pe_row,pe_col,port,word_hex,task");
        assert_eq!(lines[1], "1,0,0,W,000000ab,relay");
        assert_eq!(lines[2], "2,0,1,W,000000ab,relay");
        assert_eq!(lines[3], "3,0,2,W,000000ab,relay");
        // Host reads it at cycle 4.
        assert_eq!(r.total_cycles, 5);
        assert_eq!(r.phases.stream_out, 1);
    }

    #[test]
    fn pipelined_throughput_and_busy_time() {
        let (p, cin, cout) = chain(4, 0);
        let mut f = Fabric::new(FabricConfig::default());
        f.load_program(p).unwrap();
        let mut script = HostScript::new();
        script.push(h2d(cin, words(100), true));
        script.push(CopyOp::d2h(vec![ChannelDrain::new(cout).read(0, 100)], true));
        let (r, out) = f.run(&script).unwrap();
        assert_eq!(out.d2h(1)[0], (0..100).collect::<Vec<_>>());
        // One word per cycle, plus the pipeline depth.
        assert_eq!(r.total_cycles, 100 + 5);
        assert_eq!(r.tasks, 400);
        assert_eq!(r.residual_wavelets, 0);

        let (p, cin, cout) = chain(2, 2);
        let mut f = Fabric::new(FabricConfig::default());
        f.load_program(p).unwrap();
        let mut script = HostScript::new();
        script.push(h2d(cin, words(20), true));
        script.push(CopyOp::d2h(vec![ChannelDrain::new(cout).read(0, 20)], true));
        let (r, out) = f.run(&script).unwrap();
        assert_eq!(out.d2h(1)[0].len(), 20);
        // Three cycles per task bounds throughput.
        assert!(r.total_cycles >= 60, "{}", r.total_cycles);
        assert!(r.total_cycles <= 70, "{}", r.total_cycles);
        assert_eq!(r.roles["relay"].busy_cycles, 2 * 20 * 3);
    }

    #[test]
    fn deterministic_trace() {
        let run = || {
            let (p, cin, cout) = chain(5, 1);
            let mut f = Fabric::new(FabricConfig::default());
            f.load_program(p).unwrap();
            let buf = Buf::default();
            f.set_trace(Box::new(buf.clone()));
            let mut script = HostScript::new();
            script.push(h2d(cin, words(50), true));
            script.push(CopyOp::d2h(vec![ChannelDrain::new(cout).read(0, 50)], true));
            let (r, _) = f.run(&script).unwrap();
            let t = buf.0.lock().unwrap().clone();
            (serde_json::to_string(&r).unwrap(), t)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn blocking_copy_waits() {
        let (p, cin, cout) = chain(1, 0);
        let mut f = Fabric::new(FabricConfig::default());
        f.load_program(p).unwrap();
        let mut script = HostScript::new();
        script.push(h2d(cin, words(3), false));
        script.push(CopyOp::d2h(vec![ChannelDrain::new(cout).read(0, 3)], false));
        let (r, out) = f.run(&script).unwrap();
        assert_eq!(out.d2h(1)[0], vec![0, 1, 2]);
        assert_eq!(r.phases.stream_in, 3);
        assert_eq!(r.d2h_words, 3);
    }

    #[test]
    fn leftover_wavelets_are_residual() {
        let mut p = Placement::new();
        let s = p.add_node(0, 0, 1, Box::new(Sink { got: vec![], listen: false }));
        let ch = p.add_channel(Edge::West, 0, Direction::HostToDevice);
        p.feed(ch, s, Port::WEST, 1);
        let mut f = Fabric::new(FabricConfig::default());
        f.load_program(p).unwrap();
        let mut script = HostScript::new();
        script.push(h2d(ch, words(3), false));
        let (r, _) = f.run(&script).unwrap();
        assert_eq!(r.residual_wavelets, 3);
        assert_eq!(r.h2d_words, 3);
    }

    #[test]
    fn stalled_stream_deadlocks_with_diagnostic() {
        let mut p = Placement::new();
        let s = p.add_node(2, 5, 1, Box::new(Sink { got: vec![], listen: false }));
        let ch = p.add_channel(Edge::West, 2, Direction::HostToDevice);
        p.feed(ch, s, Port::WEST, 1);
        let mut f = Fabric::new(FabricConfig::default());
        f.load_program(p).unwrap();
        let mut script = HostScript::new();
        script.push(h2d(ch, words(10), false));
        match f.run(&script) {
            Err(Error::Deadlock { diagnostic, .. }) => {
                assert!(diagnostic.contains("PE(2,5) sink"), "{diagnostic}");
                assert!(diagnostic.contains("in W 4/4"), "{diagnostic}");
                assert!(diagnostic.contains("copy 0 (h2d, 10 words, running)"), "{diagnostic}");
            }
            other => panic!("expected deadlock, got {other:?}"),
        }
    }

    #[test]
    fn conservation() {
        let (p, cin, cout) = chain(3, 0);
        let mut f = Fabric::new(FabricConfig::default());
        f.load_program(p).unwrap();
        let mut script = HostScript::new();
        script.push(h2d(cin, words(40), true));
        script.push(CopyOp::d2h(vec![ChannelDrain::new(cout).read(0, 25)], true));
        let (r, _) = f.run(&script).unwrap();
        assert_eq!(r.h2d_words, r.d2h_words + r.residual_wavelets);
    }

    #[test]
    fn memory_and_grid_limits() {
        let mut p = Placement::new();
        p.add_node(3, 7, 1, Box::new(Relay { extra: 0, bytes: 65_792 }));
        let mut f = Fabric::new(FabricConfig::default());
        match f.load_program(p) {
            Err(Error::MemoryBudget { row, col, bytes, budget, .. }) => {
                assert_eq!((row, col, bytes, budget), (3, 7, 65_792, 47_104));
            }
            other => panic!("{other:?}"),
        }
        let mut p = Placement::new();
        p.add_node(0, 0, 1, Box::new(Relay { extra: 0, bytes: 47_104 }));
        f.load_program(p).unwrap();

        let mut p = Placement::new();
        p.add_node(1172, 0, 1, relay(0));
        assert!(matches!(f.load_program(p), Err(Error::GridCap { rows: 1173, .. })));
        let mut p = Placement::new();
        p.add_node(0, 700, 63, relay(0));
        assert!(matches!(f.load_program(p), Err(Error::GridCap { cols: 763, .. })));
    }

    #[test]
    fn bad_routes_rejected() {
        let mut p = Placement::new();
        let a = p.add_node(0, 0, 1, relay(0));
        let b = p.add_node(0, 1, 1, relay(0));
        p.connect(a, Port::EAST, b, Port::WEST, 1);
        p.connect(b, Port::EAST, a, Port::WEST, 1);
        p.connect(a, Port::EAST, b, Port::NORTH, 1);
        let mut f = Fabric::new(FabricConfig::default());
        assert!(matches!(f.load_program(p), Err(Error::Placement(_))));

        let (p, cin, _) = chain(1, 0);
        let mut f = Fabric::new(FabricConfig::default());
        f.load_program(p).unwrap();
        let mut script = HostScript::new();
        script.push(CopyOp::d2h(vec![ChannelDrain::new(cin).read(0, 1)], false));
        assert!(matches!(f.run(&script), Err(Error::Script(_))));
    }

    #[test]
    fn latency_links_and_time_skip() {
        let mut p = Placement::new();
        let a = p.add_node(0, 0, 1, relay(0));
        let b = p.add_node(0, 1, 1, relay(1000));
        p.connect(a, Port::EAST, b, Port::WEST, 50);
        let cin = p.add_channel(Edge::West, 0, Direction::HostToDevice);
        p.feed(cin, a, Port::WEST, 1);
        let cout = p.add_channel(Edge::East, 0, Direction::DeviceToHost);
        p.drain(b, Port::EAST, cout, 1);
        let mut f = Fabric::new(FabricConfig::default());
        f.load_program(p).unwrap();
        let mut script = HostScript::new();
        script.push(h2d(cin, words(1), true));
        script.push(CopyOp::d2h(vec![ChannelDrain::new(cout).read(0, 1)], true));
        let (r, _) = f.run(&script).unwrap();
        // a at 1, b at 51 for 1001 cycles, sends at 1051, host reads at 1052.
        assert_eq!(r.total_cycles, 1053);
        assert_eq!(r.phases.total(), r.total_cycles);
    }
}
