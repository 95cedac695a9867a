use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use wafersim::fabric::SharedTrace;
use wafersim::harness::{footprint_rows, run_sweep, graph_table_rows, KernelKind, RunRecord, SweepSpec};
use wafersim::spmm::{RunOptions, Variant};
use wafersim::Exec;

#[derive(Parser)]
#[command(name = "wafersim", version, about = "Cycle-level PE grid simulator for streaming SpMM and SDDMM")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Streamed-pair counts and CSR/dense sizes of random matrices.
    Footprint {
        #[command(flatten)]
        axes: Axes,
        /// Print the benchmark graph table instead of a sweep.
        #[arg(long)]
        graphs: bool,
    },
    /// Run the SpMM variants.
    Spmm(Axes),
    /// Run the SDDMM kernel.
    Sddmm(Axes),
    /// Run every kernel listed in the spec.
    Sweep {
        #[command(flatten)]
        axes: Axes,
        #[arg(long, value_enum, value_delimiter = ',')]
        kernel: Vec<KernelArg>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Spmm,
    Sddmm,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "jsonl",
        }
    }
}

/// List-valued flags replace the matching axis of the spec; values are
/// comma separated.
#[derive(Args)]
struct Axes {
    /// JSON sweep spec; flags given on the command line override its axes.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    density: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    myc: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    mvpp: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    mcpp: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    mnz: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    d: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long)]
    repeat: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    variant: Vec<Variant>,
    /// SDDMM tile side (default: largest of 64, 32, 16 that fits).
    #[arg(long)]
    tile: Option<usize>,
    #[arg(long)]
    io_channels: Option<usize>,
    /// Compare against the dense oracle; exit nonzero on any mismatch.
    #[arg(long)]
    verify: bool,
    /// Output file. Defaults to $WAFERSIM_OUT_DIR/<command>.<ext> if that
    /// variable is set, otherwise stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "WAFERSIM_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write a per-event trace (cycle,pe_row,pe_col,port,word_hex,task).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Run sweep points one after another.
    #[arg(long)]
    sequential: bool,
}

impl Axes {
    fn spec(&self) -> Result<SweepSpec> {
        let mut spec = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => SweepSpec::default(),
        };
        fn set<T: Clone>(axis: &mut Vec<T>, v: &[T]) {
            if !v.is_empty() {
                *axis = v.to_vec();
            }
        }
        set(&mut spec.n, &self.n);
        set(&mut spec.density, &self.density);
        set(&mut spec.myc, &self.myc);
        set(&mut spec.mvpp, &self.mvpp);
        set(&mut spec.mcpp, &self.mcpp);
        set(&mut spec.mnz, &self.mnz);
        set(&mut spec.d, &self.d);
        set(&mut spec.seeds, &self.seed);
        set(&mut spec.variants, &self.variant);
        if let Some(r) = self.repeat {
            spec.repeat = r;
        }
        if self.tile.is_some() {
            spec.tile = self.tile;
        }
        if self.io_channels.is_some() {
            spec.io_channels = self.io_channels;
        }
        spec.verify |= self.verify;
        if self.out.is_some() {
            spec.out = self.out.clone();
        }
        Ok(spec)
    }

    fn exec(&self) -> Exec {
        if self.sequential || self.trace.is_some() {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    fn sink(&self, spec: &SweepSpec, command: &str) -> Result<Box<dyn Write>> {
        let path = spec
            .out
            .clone()
            .or_else(|| self.out_dir.as_ref().map(|d| d.join(format!("{command}.{}", self.format.ext()))));
        match path {
            Some(p) => {
                if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                }
                let f = File::create(&p).with_context(|| format!("creating {}", p.display()))?;
                Ok(Box::new(BufWriter::new(f)))
            }
            None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        }
    }

    fn options(&self) -> Result<RunOptions> {
        let mut opts = RunOptions::default();
        if let Some(p) = &self.trace {
            let f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
            opts.trace = Some(SharedTrace::new(Box::new(BufWriter::new(f))));
        }
        Ok(opts)
    }
}

/// Run record with the cycle breakdown inlined, for CSV.
#[derive(Serialize)]
struct FlatRecord {
    kernel: KernelKind,
    variant: Option<Variant>,
    n: usize,
    d: usize,
    density: f64,
    seed: u64,
    repeat: usize,
    nnz: usize,
    myc: Option<usize>,
    mvpp: Option<usize>,
    mcpp: Option<usize>,
    mnz: Option<usize>,
    local_width: Option<usize>,
    local_height: Option<usize>,
    cycles_in: u64,
    cycles_compute: u64,
    cycles_out: u64,
    cycles_total: u64,
    h2d_words: u64,
    d2h_words: u64,
    fmacs: u64,
    fmuls: u64,
    pe_count: u64,
    panel_passes: u32,
    oracle_pass: Option<bool>,
    max_rel_err: Option<f64>,
    checksum: String,
    simulator: String,
}

impl From<&RunRecord> for FlatRecord {
    fn from(r: &RunRecord) -> Self {
        Self {
            kernel: r.kernel,
            variant: r.variant,
            n: r.n,
            d: r.d,
            density: r.density,
            seed: r.seed,
            repeat: r.repeat,
            nnz: r.nnz,
            myc: r.myc,
            mvpp: r.mvpp,
            mcpp: r.mcpp,
            mnz: r.mnz,
            local_width: r.local_width,
            local_height: r.local_height,
            cycles_in: r.cycles.stream_in,
            cycles_compute: r.cycles.compute,
            cycles_out: r.cycles.out,
            cycles_total: r.cycles.total,
            h2d_words: r.h2d_words,
            d2h_words: r.d2h_words,
            fmacs: r.fmacs,
            fmuls: r.fmuls,
            pe_count: r.pe_count,
            panel_passes: r.panel_passes,
            oracle_pass: r.oracle_pass,
            max_rel_err: r.max_rel_err,
            checksum: r.checksum.clone(),
            simulator: r.simulator.clone(),
        }
    }
}

fn emit<T: Serialize, C: Serialize>(
    rows: &[T],
    format: Format,
    out: &mut dyn Write,
    flat: impl Fn(&T) -> C,
) -> Result<()> {
    match format {
        Format::Json => {
            for r in rows {
                serde_json::to_writer(&mut *out, r)?;
                writeln!(out)?;
            }
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(&mut *out);
            for r in rows {
                w.serialize(flat(r))?;
            }
            w.flush()?;
        }
    }
    out.flush()?;
    Ok(())
}

fn run_kernels(axes: &Axes, kernels: Option<Vec<KernelKind>>, command: &str) -> Result<ExitCode> {
    let mut spec = axes.spec()?;
    if let Some(k) = kernels {
        spec.kernels = k;
    }
    let opts = axes.options()?;
    let trace = opts.trace.clone();
    let records = run_sweep(&spec, opts, axes.exec())?;
    if let Some(mut t) = trace {
        t.flush()?;
    }
    let mut out = axes.sink(&spec, command)?;
    emit(&records, axes.format, &mut *out, |r| FlatRecord::from(r))?;
    let failed = records.iter().filter(|r| r.oracle_pass == Some(false)).count();
    if failed > 0 {
        eprintln!("verification failed for {failed} of {} runs", records.len());
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Command::Footprint { axes, graphs } => {
            let spec = axes.spec()?;
            let mut out = axes.sink(&spec, "footprint")?;
            if graphs {
                emit(&graph_table_rows()?, axes.format, &mut *out, |r| r.clone())?;
            } else {
                let rows = footprint_rows(&spec, axes.exec())?;
                emit(&rows, axes.format, &mut *out, |r| r.clone())?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Spmm(axes) => run_kernels(&axes, Some(vec![KernelKind::Spmm]), "spmm"),
        Command::Sddmm(axes) => run_kernels(&axes, Some(vec![KernelKind::Sddmm]), "sddmm"),
        Command::Sweep { axes, kernel } => {
            let kernels = (!kernel.is_empty()).then(|| {
                kernel
                    .iter()
                    .map(|k| match k {
                        KernelArg::Spmm => KernelKind::Spmm,
                        KernelArg::Sddmm => KernelKind::Sddmm,
                    })
                    .collect()
            });
            run_kernels(&axes, kernels, "sweep")
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
