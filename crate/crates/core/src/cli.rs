//! Command-line interface: `synth`, `infer`, `eval`, `bench` and `make-suite`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bench::{self, BenchOptions, SuiteParams};
use crate::error::{Error, Result};
use crate::field::{synth_field, FeatureField, SynthParams};
use crate::layout::{Catalog, LayoutFile};
use crate::metrics::evaluate;
use crate::optim::{run, select_topology, Method, NaiveMode, OptimConfig};

pub const CATALOG_ENV: &str = "LAYOUT_CATALOG";

#[derive(Debug, Parser)]
#[command(name = "roomlayout", version, about = "Room layout inference on edge-likelihood fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic feature field from a layout file.
    Synth(SynthArgs),
    /// Fit a layout to a feature field.
    Infer(InferArgs),
    /// Score a predicted layout against a ground truth.
    Eval(EvalArgs),
    /// Run NO and/or PIO over a directory of cases.
    Bench(BenchArgs),
    /// Write a seeded synthetic case directory.
    MakeSuite(MakeSuiteArgs),
}

#[derive(Debug, Args)]
pub struct CatalogArgs {
    /// Topology catalog JSON; defaults to $LAYOUT_CATALOG, then the built-in catalog.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
}

impl CatalogArgs {
    pub fn load(&self) -> Result<Catalog> {
        let path = self
            .catalog
            .clone()
            .or_else(|| std::env::var_os(CATALOG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
        match path {
            Some(p) => Catalog::load(&p),
            None => Ok(Catalog::default_catalog()),
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub layout: PathBuf,
    #[arg(long)]
    pub w: usize,
    #[arg(long)]
    pub h: usize,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub noise: f64,
    /// Number of occlusion boxes on the wall-floor channel.
    #[arg(long, default_value_t = 0)]
    pub occ: usize,
    /// Largest occlusion side as a fraction of min(w, h).
    #[arg(long, default_value_t = 0.2)]
    pub occ_frac: f64,
    #[arg(long, default_value_t = 1)]
    pub thickness: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub catalog: CatalogArgs,
}

#[derive(Debug, Args)]
pub struct OptimArgs {
    /// Finite-difference window in pixels.
    #[arg(long, default_value_t = 3.0)]
    pub window: f64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha_min: f64,
    #[arg(long, default_value_t = 3.0)]
    pub alpha_max: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub stop_eps: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1)]
    pub thickness: usize,
    /// Fixed step gain; calibrated from the first sweep when omitted.
    #[arg(long)]
    pub gain: Option<f64>,
    /// Compute NO gradients from complete rasters (slow reference path).
    #[arg(long)]
    pub full_raster: bool,
}

impl OptimArgs {
    pub fn config(&self) -> Result<OptimConfig> {
        let cfg = OptimConfig {
            window: self.window,
            alpha_min: self.alpha_min,
            alpha_max: self.alpha_max,
            stop_eps: self.stop_eps,
            max_iters: self.max_iters,
            thickness: self.thickness,
            gain: self.gain,
            naive_mode: if self.full_raster {
                NaiveMode::FullRaster
            } else {
                NaiveMode::Incremental
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub field: PathBuf,
    #[arg(long, default_value = "pio")]
    pub method: Method,
    /// Optimize only this topology instead of sweeping the catalog.
    #[arg(long)]
    pub topology: Option<u32>,
    /// JSON-lines energy/point trace of the chosen run.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub catalog: CatalogArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub w: usize,
    #[arg(long)]
    pub h: usize,
    /// Metrics JSON; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub catalog: CatalogArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub cases: PathBuf,
    /// Comma-separated subset of `no,pio`.
    #[arg(long, value_delimiter = ',', default_value = "no,pio")]
    pub methods: Vec<Method>,
    /// Sweep the whole catalog per case instead of starting from the
    /// ground-truth topology.
    #[arg(long)]
    pub select: bool,
    #[arg(long)]
    pub report: PathBuf,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub catalog: CatalogArgs,
}

#[derive(Debug, Args)]
pub struct MakeSuiteArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 320)]
    pub w: usize,
    #[arg(long, default_value_t = 320)]
    pub h: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,6,7,8")]
    pub topologies: Vec<u32>,
    #[arg(long, default_value_t = 50)]
    pub per_topology: usize,
    /// Ground-truth offset from the average state, fraction of the image side.
    #[arg(long, default_value_t = 0.025)]
    pub jitter: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    pub noise: f64,
    #[arg(long, default_value_t = 2)]
    pub occ: usize,
    #[arg(long, default_value_t = 0.15)]
    pub occ_frac: f64,
    #[arg(long, default_value_t = 2017)]
    pub seed: u64,
    #[command(flatten)]
    pub catalog: CatalogArgs,
}

/// Outcome of a successful command; `Partial` maps to a nonzero exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    Partial,
}

#[derive(Debug, Serialize)]
pub struct TopologyEnergy {
    pub topology_id: u32,
    pub e: f64,
}

#[derive(Debug, Serialize)]
pub struct InferReport {
    pub method: Method,
    pub topology_id: u32,
    pub final_e: f64,
    pub iters: usize,
    pub elapsed: f64,
    pub no_progress: bool,
    pub hit_max_iters: bool,
    pub per_topology_e: Vec<TopologyEnergy>,
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// `out.lff` -> `out.gt.json`.
pub fn gt_copy_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}{}", bench::GT_SUFFIX))
}

pub fn cmd_synth(args: &SynthArgs) -> Result<Outcome> {
    let params = SynthParams {
        thickness: args.thickness,
        blur_sigma: args.sigma,
        noise_sigma: args.noise,
        occlusion_count: args.occ,
        occlusion_max_frac: args.occ_frac,
        seed: args.seed,
    };
    params.validate()?;
    let catalog = args.catalog.load()?;
    let layout = LayoutFile::load(&args.layout)?;
    let gt = layout.to_state(&catalog, args.w, args.h)?;
    let field = synth_field(&gt, args.w, args.h, &params)?;
    field.save(&args.out)?;
    let copy = gt_copy_path(&args.out);
    gt.to_file().save(&copy)?;
    println!("wrote {} ({}x{}) and {}", args.out.display(), args.w, args.h, copy.display());
    Ok(Outcome::Ok)
}

pub fn cmd_infer(args: &InferArgs) -> Result<Outcome> {
    let cfg = args.optim.config()?;
    let catalog = args.catalog.load()?;
    let field = FeatureField::load(&args.field)?;
    let (w, h) = (field.width(), field.height());
    let (best, all) = match args.topology {
        Some(id) => {
            let spec = catalog
                .get(id)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown topology id {id}")))?;
            let r = run(&field, &crate::layout::average_init(spec, w, h)?, &cfg, args.method)?;
            (r.clone(), vec![r])
        }
        None => select_topology(&field, &catalog, &cfg, args.method)?,
    };
    best.final_state.to_file().save(&args.out)?;
    if let Some(trace) = &args.trace {
        best.write_trace(trace)?;
    }
    let report = InferReport {
        method: best.method,
        topology_id: best.topology_id,
        final_e: best.final_energy,
        iters: best.iters,
        elapsed: all.iter().map(|r| r.elapsed_secs).sum(),
        no_progress: best.no_progress,
        hit_max_iters: best.hit_max_iters,
        per_topology_e: all
            .iter()
            .map(|r| TopologyEnergy {
                topology_id: r.topology_id,
                e: r.final_energy,
            })
            .collect(),
    };
    if let Some(path) = &args.report {
        write_json(&report, path)?;
    }
    if best.no_progress {
        log::warn!("optimizer made no progress (degenerate field?)");
    }
    println!(
        "{}: topology {} e = {:.6} after {} iterations",
        best.method.as_str(),
        best.topology_id,
        best.final_energy,
        best.iters
    );
    Ok(Outcome::Ok)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<Outcome> {
    let catalog = args.catalog.load()?;
    let pred = LayoutFile::load(&args.pred)?.to_state(&catalog, args.w, args.h)?;
    let gt = LayoutFile::load(&args.gt)?.to_state(&catalog, args.w, args.h)?;
    let result = evaluate(&pred, &gt, args.w, args.h)?;
    match &args.out {
        Some(path) => {
            write_json(&result, path)?;
            println!("e_corner = {:.6}, e_pixel = {:.6}", result.e_corner, result.e_pixel);
        }
        None => {
            let text = serde_json::to_string_pretty(&result).map_err(|e| Error::Parse(e.to_string()))?;
            println!("{text}");
        }
    }
    Ok(Outcome::Ok)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<Outcome> {
    let cfg = args.optim.config()?;
    let catalog = args.catalog.load()?;
    let mut methods = args.methods.clone();
    methods.dedup();
    let opts = BenchOptions {
        methods,
        config: cfg,
        select_topology: args.select,
    };
    let report = bench::bench_dir(&args.cases, &catalog, &opts)?;
    report.save(&args.report)?;
    for s in &report.summary {
        println!(
            "{:<4} cases {:>4}  e_pixel {:.4}  e_corner {:.4}  artpf {:.6}s  topology hits {}",
            s.method.as_str(),
            s.cases,
            s.mean_e_pixel,
            s.mean_e_corner,
            s.artpf,
            s.topology_hits
        );
    }
    if let Some(x) = report.speedup {
        println!("speedup NO/PIO {x:.2}");
    }
    if report.skipped.is_empty() {
        Ok(Outcome::Ok)
    } else {
        eprintln!("{} case(s) skipped", report.skipped.len());
        Ok(Outcome::Partial)
    }
}

pub fn cmd_make_suite(args: &MakeSuiteArgs) -> Result<Outcome> {
    let catalog = args.catalog.load()?;
    let params = SuiteParams {
        w: args.w,
        h: args.h,
        topologies: args.topologies.clone(),
        cases_per_topology: args.per_topology,
        jitter: args.jitter,
        synth: SynthParams {
            thickness: 1,
            blur_sigma: args.sigma,
            noise_sigma: args.noise,
            occlusion_count: args.occ,
            occlusion_max_frac: args.occ_frac,
            seed: 0,
        },
        seed: args.seed,
    };
    let cases = bench::make_suite(&catalog, &params)?;
    bench::write_suite(&cases, &args.out)?;
    println!("wrote {} cases to {}", cases.len(), args.out.display());
    Ok(Outcome::Ok)
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Infer(a) => cmd_infer(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
        Command::MakeSuite(a) => cmd_make_suite(a),
    }
}
