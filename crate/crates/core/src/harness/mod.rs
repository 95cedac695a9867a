//! Experiment driver: sweep specifications, seeded instances, run records
//! and footprint tables.

mod footprint;

use std::cmp::Ordering;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use footprint::{footprint_rows, graph_table_rows, FootprintRow, GraphTableRow};

use crate::error::{Error, Result};
use crate::fabric::{FabricConfig, SimReport};
use crate::formats::{CsrMatrix, DenseMatrix, KernelConfig};
use crate::oracle::{compare, compare_sparse, random_dense, random_sparse, sddmm_ref, spmm_ref, ABS_TOL, REL_TOL};
use crate::sddmm::{fit_tile, sddmm_with, TILE_SIDES};
use crate::spmm::{spmm_with, RunOptions, Variant};
use crate::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Spmm,
    Sddmm,
}

impl KernelKind {
    pub fn default_d(self) -> usize {
        match self {
            KernelKind::Spmm => 256,
            KernelKind::Sddmm => 2,
        }
    }
}

/// Axes of a sweep. Every point of the cross product is checked before any
/// simulation starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub kernels: Vec<KernelKind>,
    pub n: Vec<usize>,
    pub density: Vec<f64>,
    pub myc: Vec<usize>,
    pub mvpp: Vec<usize>,
    pub mcpp: Vec<usize>,
    pub mnz: Vec<usize>,
    /// Empty means 256 for SpMM and 2 for SDDMM.
    pub d: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Independent instances per seed.
    pub repeat: usize,
    pub variants: Vec<Variant>,
    /// SDDMM tile side; `None` picks the largest of 64, 32, 16 that fits.
    pub tile: Option<usize>,
    pub io_channels: Option<usize>,
    pub verify: bool,
    pub out: Option<PathBuf>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            kernels: vec![KernelKind::Spmm, KernelKind::Sddmm],
            n: (11..=16).map(|e| 1 << e).collect(),
            density: vec![1e-4, 1e-3, 1e-2, 1e-1, 0.3],
            myc: vec![512],
            mvpp: vec![64],
            mcpp: vec![1],
            mnz: vec![512],
            d: Vec::new(),
            seeds: vec![1],
            repeat: 1,
            variants: Variant::ALL.to_vec(),
            tile: None,
            io_channels: None,
            verify: false,
            out: None,
        }
    }
}

/// One simulation of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub kernel: KernelKind,
    pub variant: Option<Variant>,
    pub n: usize,
    pub density: f64,
    pub seed: u64,
    pub repeat: usize,
    pub d: usize,
    pub myc: usize,
    pub mvpp: usize,
    pub mcpp: usize,
    pub mnz: usize,
}

impl Point {
    /// Seed of the random instance; repeats of one seed draw distinct instances.
    pub fn instance_seed(&self) -> u64 {
        self.seed.wrapping_add((self.repeat as u64).wrapping_mul(1_000_003))
    }

    pub fn spmm_config(&self, io_channels: Option<usize>) -> KernelConfig {
        let mut cfg = KernelConfig::spmm(self.n, self.d, self.myc, self.mvpp).with_mcpp(self.mcpp);
        cfg.io_channels = io_channels;
        cfg
    }

    pub fn sddmm_config(&self, tile: usize, io_channels: Option<usize>) -> KernelConfig {
        let mut cfg = KernelConfig::sddmm(self.n, self.d, tile, self.mnz);
        cfg.io_channels = io_channels;
        cfg
    }

    fn instance_key(&self) -> (KernelKind, usize, u64, u64, usize, usize) {
        (self.kernel, self.n, self.density.to_bits(), self.seed, self.repeat, self.d)
    }
}

fn sort_key_cmp(a: &Point, b: &Point) -> Ordering {
    a.kernel
        .cmp(&b.kernel)
        .then(a.n.cmp(&b.n))
        .then(a.density.total_cmp(&b.density))
        .then(a.myc.cmp(&b.myc))
        .then(a.mvpp.cmp(&b.mvpp))
        .then(a.mcpp.cmp(&b.mcpp))
        .then(a.d.cmp(&b.d))
        .then(a.mnz.cmp(&b.mnz))
        .then(a.seed.cmp(&b.seed))
        .then(a.repeat.cmp(&b.repeat))
        .then(a.variant.cmp(&b.variant))
}

fn non_empty<T>(name: &str, v: &[T], errors: &mut Vec<String>) {
    if v.is_empty() {
        errors.push(format!("axis '{name}' is empty"));
    }
}

impl SweepSpec {
    fn d_values(&self, k: KernelKind) -> Vec<usize> {
        if self.d.is_empty() {
            vec![k.default_d()]
        } else {
            self.d.clone()
        }
    }

    /// Expands the cross product in sorted order, rejecting the whole spec if
    /// any point is invalid.
    pub fn points(&self, fabric: &FabricConfig) -> Result<Vec<Point>> {
        let mut errors = Vec::new();
        non_empty("kernels", &self.kernels, &mut errors);
        non_empty("n", &self.n, &mut errors);
        non_empty("density", &self.density, &mut errors);
        non_empty("seeds", &self.seeds, &mut errors);
        if self.repeat == 0 {
            errors.push("repeat must be at least 1".into());
        }
        for &x in &self.density {
            if !(x > 0.0 && x <= 1.0) {
                errors.push(format!("density {x} outside (0, 1]"));
            }
        }
        let mut points = Vec::new();
        for &kernel in &self.kernels {
            match kernel {
                KernelKind::Spmm => {
                    non_empty("myc", &self.myc, &mut errors);
                    non_empty("mvpp", &self.mvpp, &mut errors);
                    non_empty("mcpp", &self.mcpp, &mut errors);
                    non_empty("variants", &self.variants, &mut errors);
                }
                KernelKind::Sddmm => non_empty("mnz", &self.mnz, &mut errors),
            }
            for &n in &self.n {
                for d in self.d_values(kernel) {
                    let base = Point {
                        kernel,
                        variant: None,
                        n,
                        density: 0.0,
                        seed: 0,
                        repeat: 0,
                        d,
                        myc: 0,
                        mvpp: 0,
                        mcpp: 0,
                        mnz: 0,
                    };
                    let shapes: Vec<Point> = match kernel {
                        KernelKind::Spmm => {
                            let mut v = Vec::new();
                            for &myc in &self.myc {
                                for &mvpp in &self.mvpp {
                                    for &mcpp in &self.mcpp {
                                        for &variant in &self.variants {
                                            let p = Point {
                                                variant: Some(variant),
                                                myc,
                                                mvpp,
                                                mcpp,
                                                ..base.clone()
                                            };
                                            let cfg = p.spmm_config(self.io_channels);
                                            if let Err(e) = crate::spmm::check_config(variant, &cfg, fabric) {
                                                errors.push(format!("spmm {variant} n={n} d={d} myc={myc} mvpp={mvpp} mcpp={mcpp}: {e}"));
                                            }
                                            v.push(p);
                                        }
                                    }
                                }
                            }
                            v
                        }
                        KernelKind::Sddmm => {
                            let mut v = Vec::new();
                            for &mnz in &self.mnz {
                                let p = Point { mnz, ..base.clone() };
                                if let Err(e) = self.check_sddmm(&p, fabric) {
                                    errors.push(format!("sddmm n={n} d={d} mnz={mnz}: {e}"));
                                }
                                v.push(p);
                            }
                            v
                        }
                    };
                    for &density in &self.density {
                        for &seed in &self.seeds {
                            for repeat in 0..self.repeat {
                                points.extend(shapes.iter().map(|p| Point {
                                    density,
                                    seed,
                                    repeat,
                                    ..p.clone()
                                }));
                            }
                        }
                    }
                }
            }
        }
        errors.dedup();
        if !errors.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "{} problem(s) in sweep spec: {}",
                errors.len(),
                errors.join("; ")
            )));
        }
        points.sort_by(sort_key_cmp);
        Ok(points)
    }

    /// With an automatic tile, the grid is checked with the smallest
    /// candidate and the memory budget with the largest.
    fn check_sddmm(&self, p: &Point, fabric: &FabricConfig) -> Result<()> {
        match self.tile {
            Some(t) => crate::sddmm::check_config(&p.sddmm_config(t, self.io_channels), fabric),
            None => {
                let fits: Vec<usize> = TILE_SIDES.into_iter().filter(|&s| p.n.is_multiple_of(s)).collect();
                let (Some(&big), Some(&small)) = (fits.first(), fits.last()) else {
                    return Err(Error::InvalidConfig(format!(
                        "n = {} is not a multiple of any tile side {TILE_SIDES:?}",
                        p.n
                    )));
                };
                crate::sddmm::check_config(&p.sddmm_config(small, self.io_channels), fabric)?;
                crate::sddmm::check_config(&p.sddmm_config(big, self.io_channels), fabric)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycles {
    #[serde(rename = "in")]
    pub stream_in: u64,
    pub compute: u64,
    pub out: u64,
    pub total: u64,
}

/// One emitted result line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub kernel: KernelKind,
    pub variant: Option<Variant>,
    pub n: usize,
    pub d: usize,
    pub density: f64,
    pub seed: u64,
    pub repeat: usize,
    pub nnz: usize,
    pub myc: Option<usize>,
    pub mvpp: Option<usize>,
    pub mcpp: Option<usize>,
    pub mnz: Option<usize>,
    pub local_width: Option<usize>,
    pub local_height: Option<usize>,
    pub cycles: Cycles,
    pub h2d_words: u64,
    pub d2h_words: u64,
    pub fmacs: u64,
    pub fmuls: u64,
    pub pe_count: u64,
    pub panel_passes: u32,
    pub oracle_pass: Option<bool>,
    pub max_rel_err: Option<f64>,
    /// SHA-256 of the output values' bit patterns, row-major.
    pub checksum: String,
    pub simulator: String,
}

impl RunRecord {
    fn new(p: &Point, nnz: usize, r: &SimReport, checksum: String) -> Self {
        let spmm = p.kernel == KernelKind::Spmm;
        let some_if = |cond: bool, v: usize| cond.then_some(v);
        Self {
            kernel: p.kernel,
            variant: p.variant,
            n: p.n,
            d: p.d,
            density: p.density,
            seed: p.seed,
            repeat: p.repeat,
            nnz,
            myc: some_if(spmm, p.myc),
            mvpp: some_if(spmm, p.mvpp),
            mcpp: some_if(spmm, p.mcpp),
            mnz: some_if(!spmm, p.mnz),
            local_width: None,
            local_height: None,
            cycles: Cycles {
                stream_in: r.phases.stream_in,
                compute: r.phases.compute,
                out: r.phases.stream_out,
                total: r.total_cycles,
            },
            h2d_words: r.h2d_words,
            d2h_words: r.d2h_words,
            fmacs: r.fmacs,
            fmuls: r.fmuls,
            pe_count: r.pe_count,
            panel_passes: r.panel_passes,
            oracle_pass: None,
            max_rel_err: None,
            checksum,
            simulator: concat!("wafersim ", env!("CARGO_PKG_VERSION")).to_string(),
        }
    }
}

pub fn checksum(values: &[f32]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Seeded operands shared by every point of one instance.
pub struct Instance {
    pub a: CsrMatrix,
    pub h: DenseMatrix,
    /// SDDMM's C; empty for SpMM.
    pub c: DenseMatrix,
}

impl Instance {
    pub fn generate(p: &Point) -> Result<Self> {
        let s = p.instance_seed();
        let a = random_sparse(p.n, p.density, s)?;
        let h = random_dense(p.n, p.d, s.wrapping_add(1));
        let c = match p.kernel {
            KernelKind::Spmm => DenseMatrix::zeros(0, 0),
            KernelKind::Sddmm => random_dense(p.d, p.n, s.wrapping_add(2)),
        };
        Ok(Self { a, h, c })
    }
}

/// Everything a run needs besides the point itself.
#[derive(Clone, Default)]
pub struct RunSettings {
    pub opts: RunOptions,
    pub tile: Option<usize>,
    pub io_channels: Option<usize>,
    pub verify: bool,
}

impl RunSettings {
    pub fn from_spec(spec: &SweepSpec, opts: RunOptions) -> Self {
        Self {
            opts,
            tile: spec.tile,
            io_channels: spec.io_channels,
            verify: spec.verify,
        }
    }
}

/// Runs the points of one instance (they must share its key), computing the
/// oracle at most once.
pub fn run_instance(points: &[Point], inst: &Instance, s: &RunSettings) -> Result<Vec<RunRecord>> {
    let mut spmm_want: Option<DenseMatrix> = None;
    let mut sddmm_want: Option<CsrMatrix> = None;
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let rec = match p.kernel {
            KernelKind::Spmm => {
                let v = p.variant.ok_or_else(|| Error::InvalidConfig("SpMM point without a variant".into()))?;
                let (y, r) = spmm_with(v, &inst.a, &inst.h, &p.spmm_config(s.io_channels), &s.opts)?;
                let mut rec = RunRecord::new(p, inst.a.nnz(), &r, checksum(y.data()));
                if s.verify {
                    if spmm_want.is_none() {
                        spmm_want = Some(spmm_ref(&inst.a, &inst.h)?);
                    }
                    let c = compare(&y, spmm_want.as_ref().expect("computed above"), REL_TOL, ABS_TOL)?;
                    rec.oracle_pass = Some(c.pass);
                    rec.max_rel_err = Some(c.max_rel_err);
                }
                rec
            }
            KernelKind::Sddmm => {
                let tile = match s.tile {
                    Some(t) => t,
                    None => fit_tile(&inst.a, p.mnz).ok_or_else(|| {
                        Error::InvalidConfig(format!(
                            "no tile side in {TILE_SIDES:?} keeps n={} density={} within mnz={}",
                            p.n, p.density, p.mnz
                        ))
                    })?,
                };
                let cfg = p.sddmm_config(tile, s.io_channels);
                let (y, r) = sddmm_with(&inst.a, &inst.h, &inst.c, &cfg, &s.opts)?;
                let mut rec = RunRecord::new(p, inst.a.nnz(), &r, checksum(y.values()));
                rec.local_width = Some(cfg.local_width);
                rec.local_height = Some(cfg.local_height);
                if s.verify {
                    if sddmm_want.is_none() {
                        sddmm_want = Some(sddmm_ref(&inst.a, &inst.h, &inst.c)?);
                    }
                    let c = compare_sparse(&y, sddmm_want.as_ref().expect("computed above"), REL_TOL, ABS_TOL)?;
                    rec.oracle_pass = Some(c.pass);
                    rec.max_rel_err = Some(c.max_rel_err);
                }
                rec
            }
        };
        out.push(rec);
    }
    Ok(out)
}

/// Groups points by instance (keeping sorted order within each group).
pub fn group_by_instance(points: &[Point]) -> Vec<Vec<Point>> {
    let mut groups: Vec<Vec<Point>> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for p in points {
        let g = *index.entry(p.instance_key()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(p.clone());
    }
    groups
}

/// Validates the whole spec, then runs every point; instances run in
/// parallel under `exec`. Records come back in sorted point order.
pub fn run_sweep(spec: &SweepSpec, opts: RunOptions, exec: Exec) -> Result<Vec<RunRecord>> {
    let points = spec.points(&opts.fabric)?;
    let settings = RunSettings::from_spec(spec, opts);
    let groups = group_by_instance(&points);
    let results = exec.map(&groups, |g| {
        let inst = Instance::generate(&g[0])?;
        run_instance(g, &inst, &settings).map(|recs| g.iter().cloned().zip(recs).collect::<Vec<_>>())
    });
    let mut all = Vec::with_capacity(points.len());
    for r in results {
        all.extend(r?);
    }
    all.sort_by(|a, b| sort_key_cmp(&a.0, &b.0));
    Ok(all.into_iter().map(|(_, r)| r).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SweepSpec {
        SweepSpec {
            kernels: vec![KernelKind::Spmm, KernelKind::Sddmm],
            n: vec![128],
            density: vec![0.05, 0.01],
            myc: vec![64],
            mvpp: vec![64],
            mcpp: vec![1, 2],
            mnz: vec![512],
            d: vec![2],
            seeds: vec![7],
            verify: true,
            ..Default::default()
        }
    }

    #[test]
    fn expands_and_sorts() {
        let pts = small().points(&FabricConfig::default()).unwrap();
        assert_eq!(pts.len(), 2 * 2 * 3 + 2);
        assert!(pts.windows(2).all(|w| sort_key_cmp(&w[0], &w[1]) != Ordering::Greater));
        assert_eq!(pts[0].density, 0.01);
        assert_eq!(group_by_instance(&pts).len(), 4);
    }

    #[test]
    fn rejects_before_running() {
        let spec = SweepSpec {
            myc: vec![100, 64],
            density: vec![0.0],
            ..small()
        };
        let err = spec.points(&FabricConfig::default()).unwrap_err().to_string();
        assert!(err.contains("density 0 outside"), "{err}");
        assert!(err.contains("not a power of two"), "{err}");
        let spec = SweepSpec {
            kernels: vec![KernelKind::Sddmm],
            n: vec![24],
            ..small()
        };
        assert!(spec.points(&FabricConfig::default()).is_err());
    }

    #[test]
    fn sweep_records_verify_and_repeat() {
        let records = run_sweep(&small(), RunOptions::default(), Exec::Parallel).unwrap();
        assert_eq!(records.len(), 14);
        assert!(records.iter().all(|r| r.oracle_pass == Some(true)));
        for r in &records {
            assert_eq!(r.fmacs, (r.nnz * r.d) as u64);
        }
        let spmm: Vec<_> = records.iter().filter(|r| r.kernel == KernelKind::Spmm && r.density == 0.05).collect();
        assert!(spmm.windows(2).all(|w| w[0].checksum == w[1].checksum));
        let again = run_sweep(&small(), RunOptions::default(), Exec::Sequential).unwrap();
        assert_eq!(records, again);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = small();
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<SweepSpec>(&text).unwrap(), spec);
        let partial: SweepSpec = serde_json::from_str(r#"{"n": [256], "variants": ["v2"]}"#).unwrap();
        assert_eq!(partial.myc, vec![512]);
        assert!(serde_json::from_str::<SweepSpec>(r#"{"bogus": 1}"#).is_err());
    }
}
