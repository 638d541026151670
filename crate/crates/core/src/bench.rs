//! Synthetic case suites and the NO-vs-PIO benchmark.
//!
//! A case directory holds pairs `<id>.lff` (feature field) and `<id>.gt.json`
//! (ground-truth layout). Cases are processed in id order.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{synth_field, FeatureField, SynthParams};
use crate::layout::{apply_anchor, average_init, move_point, Catalog, LayoutFile, LayoutState, Point2, TopologySpec};
use crate::metrics::evaluate;
use crate::optim::{run, select_topology, Method, OptimConfig, OptimReport};
use crate::raster::rasterize_regions;

pub const GT_SUFFIX: &str = ".gt.json";
pub const FIELD_SUFFIX: &str = ".lff";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteParams {
    pub w: usize,
    pub h: usize,
    pub topologies: Vec<u32>,
    pub cases_per_topology: usize,
    /// Maximum ground-truth displacement from the average state, as a
    /// fraction of `w - 1` (x) and `h - 1` (y).
    pub jitter: f64,
    /// Field synthesis settings; `synth.seed` is replaced per case.
    pub synth: SynthParams,
    pub seed: u64,
}

impl Default for SuiteParams {
    fn default() -> Self {
        SuiteParams {
            w: 320,
            h: 320,
            topologies: vec![1, 6, 7, 8],
            cases_per_topology: 50,
            jitter: 0.025,
            synth: SynthParams {
                thickness: 1,
                blur_sigma: 2.0,
                noise_sigma: 0.05,
                occlusion_count: 2,
                occlusion_max_frac: 0.15,
                seed: 0,
            },
            seed: 2017,
        }
    }
}

impl SuiteParams {
    pub fn validate(&self) -> Result<()> {
        if self.w < crate::field::MIN_FIELD_SIZE || self.h < crate::field::MIN_FIELD_SIZE {
            return Err(Error::InvalidArgument(format!("suite size {}x{} is below 16x16", self.w, self.h)));
        }
        if !(0.0..0.5).contains(&self.jitter) {
            return Err(Error::InvalidArgument(format!("jitter must be in [0, 0.5), got {}", self.jitter)));
        }
        if self.topologies.is_empty() || self.cases_per_topology == 0 {
            return Err(Error::InvalidArgument("suite has no cases".into()));
        }
        self.synth.validate()
    }
}

#[derive(Clone, Debug)]
pub struct Case {
    pub id: String,
    pub field: FeatureField,
    pub gt: LayoutState,
}

/// Moves every conjunction of the average state by a uniform random offset,
/// respecting anchors, until the faces rasterize without self-intersection.
pub fn random_layout(spec: &std::sync::Arc<TopologySpec>, w: usize, h: usize, jitter: f64, rng: &mut ChaCha8Rng) -> Result<LayoutState> {
    let avg = average_init(spec, w, h)?;
    let (jx, jy) = (jitter * (w - 1) as f64, jitter * (h - 1) as f64);
    for _ in 0..100 {
        let points: Vec<Point2> = avg
            .points()
            .iter()
            .zip(&spec.anchors)
            .map(|(p, a)| {
                let dx = if jx > 0.0 { rng.random_range(-jx..=jx) } else { 0.0 };
                let dy = if jy > 0.0 { rng.random_range(-jy..=jy) } else { 0.0 };
                let d = apply_anchor(Point2::new(dx, dy), *a, *p, w, h);
                move_point(*p, d, *a, w, h)
            })
            .collect();
        let state = LayoutState::new(spec.clone(), points, w, h)?;
        if rasterize_regions(&state, w, h).is_ok() {
            return Ok(state);
        }
    }
    Err(Error::InvalidArgument(format!(
        "no valid layout for topology {} at jitter {jitter}",
        spec.id
    )))
}

pub fn case_id(topology_id: u32, k: usize) -> String {
    format!("t{topology_id:02}_{k:03}")
}

/// Builds the suite in memory. Each case has its own seed, so a case does
/// not depend on which other cases are generated.
pub fn make_suite(catalog: &Catalog, params: &SuiteParams) -> Result<Vec<Case>> {
    params.validate()?;
    let mut cases = Vec::new();
    for &tid in &params.topologies {
        let spec = catalog
            .get(tid)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown topology id {tid}")))?;
        for k in 0..params.cases_per_topology {
            let seed = params
                .seed
                .wrapping_mul(1_000_003)
                .wrapping_add(tid as u64 * 10_007)
                .wrapping_add(k as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt = random_layout(spec, params.w, params.h, params.jitter, &mut rng)?;
            let synth = SynthParams { seed, ..params.synth };
            let field = synth_field(&gt, params.w, params.h, &synth)?;
            cases.push(Case {
                id: case_id(tid, k),
                field,
                gt,
            });
        }
    }
    cases.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(cases)
}

pub fn write_suite(cases: &[Case], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for c in cases {
        c.field.save(&dir.join(format!("{}{FIELD_SUFFIX}", c.id)))?;
        c.gt.to_file().save(&dir.join(format!("{}{GT_SUFFIX}", c.id)))?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedCase {
    pub id: String,
    pub reason: String,
}

/// Loads every `<id>.gt.json` with a matching `<id>.lff`, sorted by id.
/// Malformed cases are logged and returned as skipped; a directory without
/// any loadable case is an error.
pub fn load_cases(dir: &Path, catalog: &Catalog) -> Result<(Vec<Case>, Vec<SkippedCase>)> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut ids: Vec<String> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(id) = name.strip_suffix(GT_SUFFIX) {
            ids.push(id.to_string());
        }
    }
    ids.sort();
    let mut cases = Vec::new();
    let mut skipped = Vec::new();
    for id in ids {
        match load_case(dir, &id, catalog) {
            Ok(c) => cases.push(c),
            Err(e) => {
                log::warn!("skipping case {id}: {e}");
                skipped.push(SkippedCase {
                    id,
                    reason: e.to_string(),
                });
            }
        }
    }
    if cases.is_empty() {
        return Err(Error::NoCases(dir.to_path_buf()));
    }
    Ok((cases, skipped))
}

fn load_case(dir: &Path, id: &str, catalog: &Catalog) -> Result<Case> {
    let field = FeatureField::load(&dir.join(format!("{id}{FIELD_SUFFIX}")))?;
    let gt = LayoutFile::load(&dir.join(format!("{id}{GT_SUFFIX}")))?.to_state(catalog, field.width(), field.height())?;
    Ok(Case {
        id: id.to_string(),
        field,
        gt,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodCaseResult {
    pub method: Method,
    pub topology_id: u32,
    pub e_pixel: f64,
    pub e_corner: f64,
    pub final_energy: f64,
    pub iters: usize,
    /// Optimizer wall time only; for topology selection, summed over the
    /// catalog.
    pub elapsed_secs: f64,
    /// Final energy per tried topology (selection runs only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_topology_e: Vec<(u32, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub id: String,
    pub topology_id: u32,
    pub results: Vec<MethodCaseResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub cases: usize,
    pub mean_e_pixel: f64,
    pub mean_e_corner: f64,
    /// Average running time per frame, seconds.
    pub artpf: f64,
    /// Cases where the selected topology equals the ground truth's.
    pub topology_hits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub select_topology: bool,
    pub config: OptimConfig,
    pub cases: Vec<CaseResult>,
    pub summary: Vec<MethodSummary>,
    /// `artpf(NO) / artpf(PIO)` when both methods ran.
    pub speedup: Option<f64>,
    pub skipped: Vec<SkippedCase>,
}

impl BenchReport {
    pub fn summary_for(&self, method: Method) -> Option<&MethodSummary> {
        self.summary.iter().find(|s| s.method == method)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Debug)]
pub struct BenchOptions {
    pub methods: Vec<Method>,
    pub config: OptimConfig,
    /// Run every catalog topology and keep the lowest energy instead of
    /// starting from the ground-truth topology.
    pub select_topology: bool,
}

/// Scores a prediction; a layout whose faces cannot be rasterized counts as
/// every pixel wrong.
fn score(pred: &LayoutState, gt: &LayoutState, w: usize, h: usize) -> Result<(f64, f64)> {
    match evaluate(pred, gt, w, h) {
        Ok(r) => Ok((r.e_pixel, r.e_corner)),
        Err(Error::SelfIntersectingFace { face, label }) => {
            log::warn!("prediction face {face} ({label}) self-intersects; e_pixel = 1");
            let (e_corner, _) = crate::metrics::corner_error(pred, gt, w, h);
            Ok((1.0, e_corner))
        }
        Err(e) => Err(e),
    }
}

pub fn run_case(case: &Case, catalog: &Catalog, opts: &BenchOptions, method: Method) -> Result<MethodCaseResult> {
    let (w, h) = (case.field.width(), case.field.height());
    let (best, per_topology_e, elapsed): (OptimReport, Vec<(u32, f64)>, f64) = if opts.select_topology {
        let (best, all) = select_topology(&case.field, catalog, &opts.config, method)?;
        let per = all.iter().map(|r| (r.topology_id, r.final_energy)).collect();
        let elapsed = all.iter().map(|r| r.elapsed_secs).sum();
        (best, per, elapsed)
    } else {
        let init = average_init(case.gt.topology(), w, h)?;
        let r = run(&case.field, &init, &opts.config, method)?;
        let elapsed = r.elapsed_secs;
        (r, Vec::new(), elapsed)
    };
    let (e_pixel, e_corner) = score(&best.final_state, &case.gt, w, h)?;
    Ok(MethodCaseResult {
        method,
        topology_id: best.topology_id,
        e_pixel,
        e_corner,
        final_energy: best.final_energy,
        iters: best.iters,
        elapsed_secs: elapsed,
        per_topology_e,
    })
}

pub fn run_bench(cases: &[Case], catalog: &Catalog, opts: &BenchOptions) -> Result<BenchReport> {
    opts.config.validate()?;
    if opts.methods.is_empty() {
        return Err(Error::InvalidArgument("no methods selected".into()));
    }
    if cases.is_empty() {
        return Err(Error::InvalidArgument("no cases".into()));
    }
    let mut results = Vec::with_capacity(cases.len());
    for case in cases {
        let per_method = opts
            .methods
            .iter()
            .map(|&m| run_case(case, catalog, opts, m))
            .collect::<Result<Vec<_>>>()?;
        log::info!("case {} done", case.id);
        results.push(CaseResult {
            id: case.id.clone(),
            topology_id: case.gt.topology().id,
            results: per_method,
        });
    }
    results.sort_by(|a, b| a.id.cmp(&b.id));
    let summary: Vec<MethodSummary> = opts
        .methods
        .iter()
        .enumerate()
        .map(|(k, &method)| {
            let n = results.len() as f64;
            let rs = results.iter().map(|c| (&c.results[k], c.topology_id));
            let (mut ep, mut ec, mut t, mut hits) = (0.0, 0.0, 0.0, 0);
            for (r, tid) in rs {
                ep += r.e_pixel;
                ec += r.e_corner;
                t += r.elapsed_secs;
                hits += usize::from(r.topology_id == tid);
            }
            MethodSummary {
                method,
                cases: results.len(),
                mean_e_pixel: ep / n,
                mean_e_corner: ec / n,
                artpf: t / n,
                topology_hits: hits,
            }
        })
        .collect();
    let artpf = |m: Method| summary.iter().find(|s| s.method == m).map(|s| s.artpf);
    let speedup = match (artpf(Method::No), artpf(Method::Pio)) {
        (Some(no), Some(pio)) if pio > 0.0 => Some(no / pio),
        _ => None,
    };
    Ok(BenchReport {
        select_topology: opts.select_topology,
        config: opts.config,
        cases: results,
        summary,
        speedup,
        skipped: Vec::new(),
    })
}

/// Loads a case directory and benchmarks it; skipped cases are carried
/// into the report.
pub fn bench_dir(dir: &Path, catalog: &Catalog, opts: &BenchOptions) -> Result<BenchReport> {
    let (cases, skipped) = load_cases(dir, catalog)?;
    let mut report = run_bench(&cases, catalog, opts)?;
    report.skipped = skipped;
    Ok(report)
}

/// Errors of the average-state starting point, for context next to the
/// optimized errors.
pub fn init_errors(cases: &[Case]) -> Result<(f64, f64)> {
    let (mut ep, mut ec) = (0.0, 0.0);
    for c in cases {
        let (w, h) = (c.field.width(), c.field.height());
        let (p, k) = score(&average_init(c.gt.topology(), w, h)?, &c.gt, w, h)?;
        ep += p;
        ec += k;
    }
    let n = cases.len().max(1) as f64;
    Ok((ep / n, ec / n))
}

pub fn suite_paths(dir: &Path, id: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{id}{FIELD_SUFFIX}")), dir.join(format!("{id}{GT_SUFFIX}")))
}
