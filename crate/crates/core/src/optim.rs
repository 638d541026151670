//! Layout optimizers.
//!
//! Both optimizers descend `e = -CO` from an initial state with Jacobi-style
//! sweeps: every conjunction's displacement is computed from the state at
//! the start of the sweep, then all are applied at once and the full energy
//! is re-evaluated. A sweep is accepted only while it lowers the energy by
//! more than `stop_eps`.
//!
//! * [`Method::No`] differentiates the full raster energy by central finite
//!   differences, re-rasterizing only the edges incident to the displaced
//!   conjunction.
//! * [`Method::Pio`] treats every edge as a spring in the potential field of
//!   its own channel: each endpoint feels the finite-difference gradient of
//!   `e2 = -F_c` at its position and a conjunction moves by the vector sum
//!   of the forces of its incident edges.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FeatureField;
use crate::layout::{apply_anchor, average_init, Catalog, EdgeSpec, Endpoint, LabelClass, LayoutState, Point2, Vec2};
use crate::objective::{endpoint_energy, energy, SparseEnergy};
use crate::raster::for_each_segment_pixel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "NO")]
    No,
    #[serde(rename = "PIO")]
    Pio,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::No => "NO",
            Method::Pio => "PIO",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "no" => Ok(Method::No),
            "pio" => Ok(Method::Pio),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

/// How the NO gradient rasterizes displaced layouts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaiveMode {
    /// Only the edges incident to the displaced conjunction (linear cost).
    Incremental,
    /// Two complete rasters and two full energy sums per axis.
    FullRaster,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    /// Finite-difference step in pixels, same on both axes.
    pub window: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub stop_eps: f64,
    pub max_iters: usize,
    pub thickness: usize,
    /// Fixed gain for [`adaptive_scale`]; `None` calibrates it from the
    /// first sweep of each run.
    pub gain: Option<f64>,
    pub naive_mode: NaiveMode,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            window: 3.0,
            alpha_min: 1.0,
            alpha_max: 3.0,
            stop_eps: 1e-6,
            max_iters: 500,
            thickness: 1,
            gain: None,
            naive_mode: NaiveMode::Incremental,
        }
    }
}

impl OptimConfig {
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if !(self.window >= 1.0) {
            return Err(Error::InvalidArgument(format!("window {} must be >= 1", self.window)));
        }
        if !(self.alpha_min > 0.0 && self.alpha_min <= self.alpha_max) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < alpha_min <= alpha_max, got {} and {}",
                self.alpha_min, self.alpha_max
            )));
        }
        if !(self.stop_eps > 0.0) {
            return Err(Error::InvalidArgument(format!("stop_eps {} must be > 0", self.stop_eps)));
        }
        if self.thickness == 0 {
            return Err(Error::InvalidArgument("thickness must be >= 1".into()));
        }
        if let Some(g) = self.gain {
            if !(g > 0.0 && g.is_finite()) {
                return Err(Error::InvalidArgument(format!("gain {g} must be positive")));
            }
        }
        Ok(())
    }
}

/// Rescales a nonzero vector to length `clamp(|raw| * gain, alpha_min, alpha_max)`.
///
/// Zero stays zero, so flat regions of the field produce no motion.
pub fn scale_with_gain(raw: Vec2, gain: f64, alpha_min: f64, alpha_max: f64) -> Vec2 {
    let norm = raw.norm();
    if norm == 0.0 {
        return Vec2::ZERO;
    }
    let len = (norm * gain).clamp(alpha_min, alpha_max);
    raw * (len / norm)
}

pub fn adaptive_scale(raw: Vec2, cfg: &OptimConfig) -> Vec2 {
    scale_with_gain(raw, cfg.gain.unwrap_or(1.0), cfg.alpha_min, cfg.alpha_max)
}

/// Gain chosen as the reciprocal of the median nonzero raw magnitude of the
/// first sweep, then frozen for the rest of the run.
#[derive(Clone, Copy, Debug)]
struct Scaler {
    gain: Option<f64>,
    alpha_min: f64,
    alpha_max: f64,
}

impl Scaler {
    fn new(cfg: &OptimConfig) -> Self {
        Scaler {
            gain: cfg.gain,
            alpha_min: cfg.alpha_min,
            alpha_max: cfg.alpha_max,
        }
    }

    fn calibrate(&mut self, raws: &[Vec2]) {
        if self.gain.is_some() {
            return;
        }
        let mut mags: Vec<f64> = raws.iter().map(|v| v.norm()).filter(|&m| m > 0.0).collect();
        if mags.is_empty() {
            return;
        }
        mags.sort_by(f64::total_cmp);
        self.gain = Some(1.0 / mags[mags.len() / 2]);
    }

    fn scale(&self, raw: Vec2) -> Vec2 {
        scale_with_gain(raw, self.gain.unwrap_or(1.0), self.alpha_min, self.alpha_max)
    }
}

/// Position of conjunction `j` after a probe displacement.
fn probe(state: &LayoutState, j: usize, delta: Vec2, w: usize, h: usize) -> Point2 {
    let p = state.point(j);
    let anchor = state.topology().anchors[j];
    (p + apply_anchor(delta, anchor, p, w, h)).clamp_to_image(w, h)
}

/// Incremental evaluator for the NO finite differences.
///
/// Holds, for the current state, a per-pixel bitmask of the edges covering
/// each pixel. A probe re-rasterizes only the incident edges of the moved
/// conjunction; every other pixel keeps its label, so the energy difference
/// is a sum over the pixels those edges touch in either probe.
pub struct NaiveGradient<'a> {
    field: &'a FeatureField,
    thickness: usize,
    cover: Vec<u64>,
    cover_touched: Vec<usize>,
    incident: Vec<Vec<usize>>,
    plus: Vec<(usize, u8)>,
    minus: Vec<(usize, u8)>,
    labels: Vec<(usize, u8, u8)>,
}

impl<'a> NaiveGradient<'a> {
    pub fn new(field: &'a FeatureField, thickness: usize) -> Self {
        NaiveGradient {
            field,
            thickness,
            cover: vec![0; field.width() * field.height()],
            cover_touched: Vec::new(),
            incident: Vec::new(),
            plus: Vec::new(),
            minus: Vec::new(),
            labels: Vec::new(),
        }
    }

    /// Rebuilds the coverage masks for `state`.
    pub fn prepare(&mut self, state: &LayoutState) {
        for &i in &self.cover_touched {
            self.cover[i] = 0;
        }
        self.cover_touched.clear();
        let (w, h) = (self.field.width(), self.field.height());
        let spec = state.topology();
        let pts = state.points();
        for (k, e) in spec.edges.iter().enumerate() {
            let bit = 1u64 << k;
            let (cover, touched) = (&mut self.cover, &mut self.cover_touched);
            for_each_segment_pixel(pts[e.a], pts[e.b], self.thickness, w, h, |i| {
                if cover[i] == 0 {
                    touched.push(i);
                }
                cover[i] |= bit;
            });
        }
        self.incident = (0..spec.num_conjunctions())
            .map(|j| {
                spec.edges
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| e.a == j || e.b == j)
                    .map(|(k, _)| k)
                    .collect()
            })
            .collect();
    }

    fn rasterize_incident(
        &self,
        state: &LayoutState,
        j: usize,
        moved: Point2,
        out: &mut Vec<(usize, u8)>,
    ) {
        out.clear();
        let (w, h) = (self.field.width(), self.field.height());
        let spec = state.topology();
        let pts = state.points();
        for &k in &self.incident[j] {
            let e = spec.edges[k];
            let a = if e.a == j { moved } else { pts[e.a] };
            let b = if e.b == j { moved } else { pts[e.b] };
            for_each_segment_pixel(a, b, self.thickness, w, h, |i| out.push((i, k as u8)));
        }
        out.sort_unstable();
        out.dedup();
    }

    /// `e(plus) - e(minus)` where conjunction `j` sits at `plus` / `minus`.
    ///
    /// Terms are accumulated channel by channel in increasing pixel index,
    /// matching a dense `sum_l sum_p F_l * (M_l[plus] - M_l[minus])` exactly.
    /// [`prepare`](Self::prepare) must have been called with `state`.
    pub fn energy_difference(&mut self, state: &LayoutState, j: usize, plus: Point2, minus: Point2) -> f64 {
        let mut plus_px = std::mem::take(&mut self.plus);
        let mut minus_px = std::mem::take(&mut self.minus);
        self.rasterize_incident(state, j, plus, &mut plus_px);
        self.rasterize_incident(state, j, minus, &mut minus_px);

        let spec = state.topology();
        let inc_mask: u64 = self.incident[j].iter().fold(0, |m, &k| m | (1u64 << k));
        let label_of = |top: Option<usize>| -> u8 {
            top.map(|k| spec.edges[k].class.code()).unwrap_or(LabelClass::Bg.code())
        };
        let rest_top = |p: usize| -> Option<usize> {
            let rest = self.cover[p] & !inc_mask;
            (rest != 0).then(|| 63 - rest.leading_zeros() as usize)
        };

        let mut labels = std::mem::take(&mut self.labels);
        labels.clear();
        let (mut a, mut b) = (0, 0);
        while a < plus_px.len() || b < minus_px.len() {
            let pa = plus_px.get(a).map(|t| t.0).unwrap_or(usize::MAX);
            let pb = minus_px.get(b).map(|t| t.0).unwrap_or(usize::MAX);
            let p = pa.min(pb);
            let mut top_plus = None;
            while a < plus_px.len() && plus_px[a].0 == p {
                top_plus = Some(plus_px[a].1 as usize);
                a += 1;
            }
            let mut top_minus = None;
            while b < minus_px.len() && minus_px[b].0 == p {
                top_minus = Some(minus_px[b].1 as usize);
                b += 1;
            }
            let rest = rest_top(p);
            let lp = label_of(top_plus.max(rest));
            let lm = label_of(top_minus.max(rest));
            labels.push((p, lp, lm));
        }

        let mut s = 0.0f64;
        for l in 0..4u8 {
            for &(p, lp, lm) in &labels {
                if lp == l && lm != l {
                    s += self.field.at(l, p);
                } else if lm == l && lp != l {
                    s += -self.field.at(l, p);
                }
            }
        }
        self.plus = plus_px;
        self.minus = minus_px;
        self.labels = labels;
        let n = (self.field.width() * self.field.height()) as f64;
        -(s / n)
    }

    /// Central-difference gradient `(e(x+d) - e(x-d), e(y+d) - e(y-d))` for slot `j`.
    pub fn gradient(&mut self, state: &LayoutState, j: usize, window: f64) -> Vec2 {
        let (w, h) = (self.field.width(), self.field.height());
        let gx = self.energy_difference(
            state,
            j,
            probe(state, j, Vec2::new(window, 0.0), w, h),
            probe(state, j, Vec2::new(-window, 0.0), w, h),
        );
        let gy = self.energy_difference(
            state,
            j,
            probe(state, j, Vec2::new(0.0, window), w, h),
            probe(state, j, Vec2::new(0.0, -window), w, h),
        );
        Vec2::new(gx, gy)
    }
}

/// Full-raster NO gradient: two complete rasters and energies per axis.
fn full_raster_gradient(field: &FeatureField, state: &LayoutState, j: usize, cfg: &OptimConfig) -> Vec2 {
    let (w, h) = (field.width(), field.height());
    let diff = |d: Vec2| {
        let plus = state.with_point(j, probe(state, j, d, w, h));
        let minus = state.with_point(j, probe(state, j, -d, w, h));
        let e = |s: &LayoutState| {
            let map = crate::raster::rasterize_edges(s, w, h, cfg.thickness);
            -crate::objective::consistency(field, &map).expect("field and map share dimensions")
        };
        e(&plus) - e(&minus)
    };
    Vec2::new(diff(Vec2::new(cfg.window, 0.0)), diff(Vec2::new(0.0, cfg.window)))
}

/// NO gradient `(de/dx, de/dy)` of conjunction `j`.
pub fn no_gradient(field: &FeatureField, state: &LayoutState, j: usize, cfg: &OptimConfig) -> Vec2 {
    match cfg.naive_mode {
        NaiveMode::FullRaster => full_raster_gradient(field, state, j, cfg),
        NaiveMode::Incremental => {
            let mut ctx = NaiveGradient::new(field, cfg.thickness);
            ctx.prepare(state);
            ctx.gradient(state, j, cfg.window)
        }
    }
}

/// Finite-difference gradient of `e2` on channel `class` at `q`.
pub fn endpoint_gradient(field: &FeatureField, q: Point2, class: LabelClass, window: f64) -> Vec2 {
    let e2 = |x: f64, y: f64| endpoint_energy(field, Point2::new(x, y), class);
    Vec2::new(
        e2(q.x + window, q.y) - e2(q.x - window, q.y),
        e2(q.x, q.y + window) - e2(q.x, q.y - window),
    )
}

/// Force on one endpoint of `edge`, after adaptive scaling with `cfg.gain`.
pub fn pio_force(
    field: &FeatureField,
    state: &LayoutState,
    edge: &EdgeSpec,
    endpoint: Endpoint,
    cfg: &OptimConfig,
) -> Vec2 {
    let q = state.point(edge.slot(endpoint));
    adaptive_scale(-endpoint_gradient(field, q, edge.class, cfg.window), cfg)
}

/// Parallelogram composition of endpoint forces.
pub fn compose_forces(forces: &[Vec2]) -> Vec2 {
    forces.iter().fold(Vec2::ZERO, |acc, f| acc + *f)
}

#[derive(Clone, Debug)]
pub struct OptimReport {
    pub method: Method,
    pub topology_id: u32,
    pub initial: LayoutState,
    pub final_state: LayoutState,
    pub final_energy: f64,
    /// Energy after each evaluated sweep; entry 0 is the initial state.
    pub energy_trace: Vec<f64>,
    pub state_trace: Vec<Vec<Point2>>,
    /// Evaluated sweeps, including a final rejected one.
    pub iters: usize,
    pub elapsed_secs: f64,
    pub no_progress: bool,
    pub hit_max_iters: bool,
}

impl OptimReport {
    /// Writes one JSON object per trace entry: `{"iter", "e", "points"}`.
    pub fn write_trace(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for (i, (e, pts)) in self.energy_trace.iter().zip(&self.state_trace).enumerate() {
            let rec = TraceRecord {
                iter: i,
                e: *e,
                points: pts.iter().map(|p| [p.x, p.y]).collect(),
            };
            serde_json::to_writer(&mut out, &rec).map_err(|e| Error::Parse(e.to_string()))?;
            out.push(b'\n');
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&out).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub e: f64,
    pub points: Vec<[f64; 2]>,
}

fn sweep_no(ctx: &mut NaiveGradient, field: &FeatureField, state: &LayoutState, cfg: &OptimConfig) -> Vec<Vec2> {
    let n = state.topology().num_conjunctions();
    match cfg.naive_mode {
        NaiveMode::Incremental => {
            ctx.prepare(state);
            (0..n).map(|j| -ctx.gradient(state, j, cfg.window)).collect()
        }
        NaiveMode::FullRaster => (0..n).map(|j| -full_raster_gradient(field, state, j, cfg)).collect(),
    }
}

/// Raw (unscaled) descent vectors of every incident edge endpoint, grouped
/// by conjunction.
fn sweep_pio(field: &FeatureField, state: &LayoutState, cfg: &OptimConfig) -> Vec<Vec<Vec2>> {
    let spec = state.topology();
    (0..spec.num_conjunctions())
        .map(|j| {
            let q = state.point(j);
            spec.edges
                .iter()
                .filter(|e| e.a == j || e.b == j)
                .map(|e| -endpoint_gradient(field, q, e.class, cfg.window))
                .collect()
        })
        .collect()
}

/// Runs one optimizer from `state0`.
pub fn run(field: &FeatureField, state0: &LayoutState, cfg: &OptimConfig, method: Method) -> Result<OptimReport> {
    cfg.validate()?;
    let (w, h) = (field.width(), field.height());
    state0.validate(w, h)?;
    let degenerate = field.is_degenerate();
    let start = Instant::now();
    let mut sparse = SparseEnergy::new(field, cfg.thickness);
    let mut naive = match method {
        Method::No => Some(NaiveGradient::new(field, cfg.thickness)),
        Method::Pio => None,
    };
    let mut scaler = Scaler::new(cfg);
    let mut state = state0.clone();
    let mut e = sparse.energy(&state);
    let mut report = OptimReport {
        method,
        topology_id: state0.topology().id,
        initial: state0.clone(),
        final_state: state0.clone(),
        final_energy: e,
        energy_trace: vec![e],
        state_trace: vec![state.points().to_vec()],
        iters: 0,
        elapsed_secs: 0.0,
        no_progress: false,
        hit_max_iters: false,
    };
    if degenerate {
        report.no_progress = true;
        report.elapsed_secs = start.elapsed().as_secs_f64();
        return Ok(report);
    }

    let anchors = &state0.topology().anchors;
    let mut converged = false;
    while report.iters < cfg.max_iters {
        let steps: Vec<Vec2> = match naive.as_mut() {
            Some(naive) => {
                let raw = sweep_no(naive, field, &state, cfg);
                scaler.calibrate(&raw);
                raw.iter().map(|r| scaler.scale(*r)).collect()
            }
            None => {
                let raw = sweep_pio(field, &state, cfg);
                let flat: Vec<Vec2> = raw.iter().flatten().copied().collect();
                scaler.calibrate(&flat);
                raw.iter()
                    .map(|forces| {
                        let scaled: Vec<Vec2> = forces.iter().map(|f| scaler.scale(*f)).collect();
                        compose_forces(&scaled)
                    })
                    .collect()
            }
        };
        let deltas: Vec<Vec2> = steps
            .iter()
            .zip(anchors)
            .enumerate()
            .map(|(j, (d, a))| apply_anchor(*d, *a, state.point(j), w, h))
            .collect();
        if deltas.iter().all(|d| *d == Vec2::ZERO) {
            if report.iters == 0 {
                report.no_progress = true;
            }
            converged = true;
            break;
        }
        let candidate = state.displaced(&deltas, w, h);
        let e_new = sparse.energy(&candidate);
        report.iters += 1;
        report.energy_trace.push(e_new);
        report.state_trace.push(candidate.points().to_vec());
        if e - e_new > cfg.stop_eps {
            state = candidate;
            e = e_new;
        } else {
            converged = true;
            break;
        }
    }
    report.hit_max_iters = !converged;
    report.final_state = state;
    report.final_energy = e;
    report.elapsed_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

pub fn run_no(field: &FeatureField, state0: &LayoutState, cfg: &OptimConfig) -> Result<OptimReport> {
    run(field, state0, cfg, Method::No)
}

pub fn run_pio(field: &FeatureField, state0: &LayoutState, cfg: &OptimConfig) -> Result<OptimReport> {
    run(field, state0, cfg, Method::Pio)
}

/// Optimizes every catalog topology from its average state and returns the
/// lowest-energy report together with all reports (catalog order).
pub fn select_topology(
    field: &FeatureField,
    catalog: &Catalog,
    cfg: &OptimConfig,
    method: Method,
) -> Result<(OptimReport, Vec<OptimReport>)> {
    if catalog.is_empty() {
        return Err(Error::InvalidArgument("catalog is empty".into()));
    }
    let (w, h) = (field.width(), field.height());
    let all = catalog
        .iter()
        .map(|spec| run(field, &average_init(spec, w, h)?, cfg, method))
        .collect::<Result<Vec<_>>>()?;
    let best = all
        .iter()
        .min_by(|a, b| a.final_energy.total_cmp(&b.final_energy))
        .cloned()
        .expect("catalog is non-empty");
    Ok((best, all))
}

/// Full-raster energy of a state; a convenience for reports.
pub fn layout_energy(field: &FeatureField, state: &LayoutState) -> Result<f64> {
    energy(field, state, field.width(), field.height())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{synth_field, SynthParams};
    use crate::layout::{Catalog, LayoutState};
    use crate::raster::rasterize_edges;
    use proptest::prelude::*;

    fn t6(y: f64, w: usize, h: usize) -> LayoutState {
        let c = Catalog::default_catalog();
        LayoutState::new(
            c.get(6).unwrap().clone(),
            vec![Point2::new(0.0, y), Point2::new((w - 1) as f64, y)],
            w,
            h,
        )
        .unwrap()
    }

    fn ridge_field(y: usize, w: usize, h: usize, blur: f64) -> FeatureField {
        synth_field(&t6(y as f64, w, h), w, h, &SynthParams { blur_sigma: blur, ..SynthParams::default() }).unwrap()
    }

    #[test]
    fn adaptive_scale_examples() {
        let cfg = OptimConfig::default();
        assert_eq!(adaptive_scale(Vec2::ZERO, &cfg), Vec2::ZERO);
        let long = adaptive_scale(Vec2::new(6.0, 8.0), &cfg);
        assert!((long.norm() - 3.0).abs() < 1e-12);
        assert!((long.x / long.y - 0.75).abs() < 1e-12);
        let short = adaptive_scale(Vec2::new(0.06, 0.08), &cfg);
        assert!((short.norm() - 1.0).abs() < 1e-12);
        let mid = adaptive_scale(Vec2::new(0.0, 2.0), &cfg);
        assert_eq!(mid, Vec2::new(0.0, 2.0));
        let gained = adaptive_scale(Vec2::new(1.0, 0.0), &OptimConfig { gain: Some(10.0), ..cfg });
        assert_eq!(gained, Vec2::new(3.0, 0.0));
    }

    #[test]
    fn compose_examples() {
        assert_eq!(compose_forces(&[Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]), Vec2::new(1.0, 1.0));
        assert_eq!(compose_forces(&[Vec2::new(2.0, 0.0), Vec2::new(-2.0, 0.0)]), Vec2::ZERO);
        assert_eq!(compose_forces(&[Vec2::new(0.3, -2.0)]), Vec2::new(0.3, -2.0));
    }

    #[test]
    fn no_gradient_vanishes_on_the_ridge() {
        let f = ridge_field(6, 16, 16, 0.0);
        let s = t6(6.0, 16, 16);
        for j in 0..2 {
            let g = no_gradient(&f, &s, j, &OptimConfig::default());
            assert!(g.norm() < 1e-9, "{g:?}");
        }
    }

    #[test]
    fn no_gradient_points_toward_ridge() {
        let (w, h) = (16, 16);
        let f = ridge_field(6, w, h, 0.0);
        let s = t6(4.0, w, h);
        let cfg = OptimConfig { window: 1.0, ..OptimConfig::default() };
        // brute force over the three rasters y = 3, 4, 5 via the full energy
        let e_at = |y: f64| energy(&f, &t6(y, w, h), w, h).unwrap();
        for j in 0..2 {
            let g = no_gradient(&f, &s, j, &cfg);
            // x is pinned by the boundary anchor
            assert_eq!(g.x, 0.0);
            assert!(g.y <= 0.0);
        }
        assert!(e_at(5.0) <= e_at(3.0));
        // moving the whole edge toward the ridge lowers the energy
        assert!(e_at(6.0) < e_at(4.0));
    }

    #[test]
    fn boundary_slot_gets_no_perpendicular_update() {
        let (w, h) = (40, 40);
        let f = ridge_field(20, w, h, 2.0);
        let s = t6(15.0, w, h);
        let r = run_no(&f, &s, &OptimConfig::default()).unwrap();
        for pts in &r.state_trace {
            assert_eq!(pts[0].x, 0.0);
            assert_eq!(pts[1].x, 39.0);
        }
    }

    #[test]
    fn incremental_matches_full_raster_gradient() {
        let c = Catalog::default_catalog();
        for id in 1..=11 {
            let s = average_init(c.get(id).unwrap(), 48, 40).unwrap();
            let params = SynthParams { noise_sigma: 0.1, seed: id as u64, ..SynthParams::default() };
            let f = synth_field(&s, 48, 40, &params).unwrap();
            let shifted = s.displaced(&vec![Vec2::new(2.0, -1.0); s.points().len()], 48, 40);
            for j in 0..s.points().len() {
                let inc = no_gradient(&f, &shifted, j, &OptimConfig::default());
                let full = no_gradient(
                    &f,
                    &shifted,
                    j,
                    &OptimConfig { naive_mode: NaiveMode::FullRaster, ..OptimConfig::default() },
                );
                assert!((inc - full).norm() < 1e-12, "id {id} slot {j}: {inc:?} vs {full:?}");
            }
        }
    }

    #[test]
    fn pio_force_examples() {
        let (w, h) = (40, 40);
        let f = ridge_field(20, w, h, 2.0);
        let s = t6(20.0, w, h);
        let edge = s.topology().edges[0];
        let cfg = OptimConfig::default();
        assert_eq!(pio_force(&f, &s, &edge, Endpoint::A, &cfg).norm(), 0.0);

        let above = t6(18.0, w, h);
        let force = pio_force(&f, &above, &edge, Endpoint::A, &cfg);
        // analytic blurred profile exp(-d^2/8) at d = 2 -+ 3
        let raw_y = -(-(-1.0f64 / 8.0).exp() + (-25.0f64 / 8.0).exp());
        assert!(raw_y > 0.0);
        assert!(force.y > 0.0 && force.x == 0.0);
        assert!((1.0 - 1e-12..=3.0 + 1e-12).contains(&force.norm()), "{}", force.norm());
        let grad = endpoint_gradient(&f, above.point(0), LabelClass::Wf, 3.0);
        assert!((-grad.y - raw_y).abs() < 1e-6, "{} vs {raw_y}", -grad.y);

        let plateau = FeatureField::zeros(w, h);
        assert_eq!(pio_force(&plateau, &above, &edge, Endpoint::A, &cfg), Vec2::ZERO);
    }

    #[test]
    fn degenerate_field_reports_no_progress() {
        let s = t6(10.0, 32, 32);
        for m in [Method::No, Method::Pio] {
            let r = run(&FeatureField::zeros(32, 32), &s, &OptimConfig::default(), m).unwrap();
            assert!(r.no_progress);
            assert_eq!(r.iters, 0);
            assert_eq!(r.final_state, s);
        }
    }

    #[test]
    fn fixed_point_at_ground_truth() {
        let (w, h) = (64, 64);
        let c = Catalog::default_catalog();
        let gt = average_init(c.get(1).unwrap(), w, h).unwrap();
        let f = synth_field(&gt, w, h, &SynthParams::default()).unwrap();
        for m in [Method::No, Method::Pio] {
            let r = run(&f, &gt, &OptimConfig::default(), m).unwrap();
            assert!(r.iters <= 2, "{m:?} took {}", r.iters);
            for (a, b) in r.final_state.points().iter().zip(gt.points()) {
                assert!(a.distance(*b) <= 1.0);
            }
        }
    }

    #[test]
    fn converges_to_shifted_ridge() {
        let (w, h) = (64, 64);
        let f = ridge_field(30, w, h, 2.0);
        for m in [Method::No, Method::Pio] {
            let r = run(&f, &t6(25.0, w, h), &OptimConfig::default(), m).unwrap();
            for p in r.final_state.points() {
                assert!((p.y - 30.0).abs() <= 1.5, "{m:?}: {p:?}");
            }
        }
    }

    #[test]
    fn single_topology_selection() {
        let (w, h) = (48, 48);
        let f = ridge_field(24, w, h, 2.0);
        let cat = Catalog::default_catalog().subset(&[6]).unwrap();
        let (best, all) = select_topology(&f, &cat, &OptimConfig::default(), Method::Pio).unwrap();
        assert_eq!(best.topology_id, 6);
        assert_eq!(all.len(), 1);
    }

    #[test]
    fn clean_t6_field_selects_t6() {
        let (w, h) = (64, 64);
        let c = Catalog::default_catalog();
        let mut hits = 0;
        // ridges within the capture range of the average start (blur support + window)
        for y in 26..39 {
            let f = ridge_field(y, w, h, 2.0);
            let (best, all) = select_topology(&f, &c, &OptimConfig::default(), Method::Pio).unwrap();
            assert_eq!(all.len(), 11);
            if best.topology_id == 6 {
                hits += 1;
            }
        }
        assert_eq!(hits, 13);
    }

    #[test]
    fn trace_file_lines() {
        let (w, h) = (40, 40);
        let f = ridge_field(20, w, h, 2.0);
        let r = run_pio(&f, &t6(16.0, w, h), &OptimConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        r.write_trace(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let recs: Vec<TraceRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(recs.len(), r.energy_trace.len());
        assert!(recs.len() >= 2);
        assert_eq!(recs[0].points.len(), 2);
    }

    #[test]
    fn config_validation() {
        assert!(OptimConfig { window: 0.0, ..OptimConfig::default() }.validate().is_err());
        assert!(OptimConfig { alpha_min: 4.0, ..OptimConfig::default() }.validate().is_err());
        assert!(OptimConfig { stop_eps: 0.0, ..OptimConfig::default() }.validate().is_err());
        assert!(OptimConfig::default().validate().is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn traces_are_monotone_and_states_valid(
            id in 1u32..=11, seed in any::<u64>(), noise in 0.0f64..0.1,
            shift in prop::collection::vec(-6.0f64..6.0, 2),
            pio in any::<bool>(),
        ) {
            let (w, h) = (48, 48);
            let c = Catalog::default_catalog();
            let avg = average_init(c.get(id).unwrap(), w, h).unwrap();
            let gt = avg.displaced(&vec![Vec2::new(shift[0], shift[1]); avg.points().len()], w, h);
            let f = synth_field(&gt, w, h, &SynthParams { noise_sigma: noise, seed, ..SynthParams::default() }).unwrap();
            let method = if pio { Method::Pio } else { Method::No };
            let r = run(&f, &avg, &OptimConfig::default(), method).unwrap();
            prop_assert_eq!(r.energy_trace.len(), r.state_trace.len());
            let accepted = if r.hit_max_iters { r.energy_trace.len() } else { r.energy_trace.len().saturating_sub(1) };
            for k in 1..accepted {
                prop_assert!(r.energy_trace[k] < r.energy_trace[k - 1]);
            }
            for pts in &r.state_trace {
                let s = LayoutState::new(avg.topology().clone(), pts.clone(), w, h);
                prop_assert!(s.is_ok(), "{:?}", s.err());
            }
            prop_assert!(r.final_energy <= r.energy_trace[0]);
            let full = -crate::objective::consistency(&f, &rasterize_edges(&r.final_state, w, h, 1)).unwrap();
            prop_assert!((full - r.final_energy).abs() < 1e-12);
        }
    }
}
