//! Consistency objective between a feature field and a rasterized layout.
//!
//! Energies are kept in the log domain: `e = -CO` for a whole layout and
//! `e2 = -F_c(q)` for a single endpoint. The exponential form is never
//! evaluated.

use crate::error::{Error, Result};
use crate::field::{FeatureField, CHANNELS};
use crate::layout::{LabelClass, LayoutState, Point2};
use crate::raster::{for_each_segment_pixel, rasterize_edges, LabelMap};

/// Kahan-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Compensated sum with independent lanes, so the additions pipeline.
fn lane_sum(values: &[f32]) -> f64 {
    const LANES: usize = 8;
    let mut lanes = [KahanSum::default(); LANES];
    let chunks = values.chunks_exact(LANES);
    let tail = chunks.remainder();
    for chunk in chunks {
        for (acc, v) in lanes.iter_mut().zip(chunk) {
            acc.add(*v as f64);
        }
    }
    let mut total = KahanSum::default();
    for v in tail {
        total.add(*v as f64);
    }
    for acc in lanes {
        total.add(acc.value());
    }
    total.value()
}

fn check_dims(field: &FeatureField, w: usize, h: usize) -> Result<()> {
    if field.width() != w || field.height() != h {
        return Err(Error::DimensionMismatch(format!(
            "field is {}x{}, map is {w}x{h}",
            field.width(),
            field.height()
        )));
    }
    Ok(())
}

/// Per-channel partial sums `sum_p F_l(p) * [M(p) == l]`, unnormalized.
pub fn channel_sums(field: &FeatureField, map: &LabelMap) -> Result<[f64; CHANNELS]> {
    check_dims(field, map.w, map.h)?;
    let mut sums = [KahanSum::default(); CHANNELS];
    for (l, sum) in sums.iter_mut().enumerate() {
        let plane = field.channel(LabelClass::ALL[l]);
        for (v, &m) in plane.iter().zip(&map.data) {
            if m as usize == l {
                sum.add(*v as f64);
            }
        }
    }
    Ok(sums.map(|s| s.value()))
}

/// `CO = (1 / wh) * sum_l sum_p F_l(p) * M_l(p)`.
pub fn consistency(field: &FeatureField, map: &LabelMap) -> Result<f64> {
    check_dims(field, map.w, map.h)?;
    let mut total = KahanSum::default();
    for (l, class) in LabelClass::ALL.iter().enumerate() {
        let plane = field.channel(*class);
        for (v, &m) in plane.iter().zip(&map.data) {
            if m as usize == l {
                total.add(*v as f64);
            }
        }
    }
    Ok(total.value() / (map.w * map.h) as f64)
}

/// `e = -CO` of the 1 px edge raster of `state`.
pub fn energy(field: &FeatureField, state: &LayoutState, w: usize, h: usize) -> Result<f64> {
    check_dims(field, w, h)?;
    state.validate(w, h)?;
    Ok(-consistency(field, &rasterize_edges(state, w, h, 1))?)
}

/// `e2 = -F_c(q)` with bilinear sampling.
pub fn endpoint_energy(field: &FeatureField, q: Point2, c: LabelClass) -> f64 {
    -field.sample(c, q.x, q.y)
}

/// Evaluates `e` without touching background pixels.
///
/// Uses `CO * wh = sum_p F_bg(p) + sum_{p on an edge} (F_M(p)(p) - F_bg(p))`,
/// with the first term precomputed once per field. Cost is linear in the
/// number of edge pixels.
pub struct SparseEnergy<'a> {
    field: &'a FeatureField,
    thickness: usize,
    bg_total: f64,
    scratch: Vec<u8>,
    touched: Vec<usize>,
}

impl<'a> SparseEnergy<'a> {
    pub fn new(field: &'a FeatureField, thickness: usize) -> Self {
        SparseEnergy {
            field,
            thickness,
            bg_total: lane_sum(field.channel(LabelClass::Bg)),
            scratch: vec![0; field.width() * field.height()],
            touched: Vec::new(),
        }
    }

    pub fn energy(&mut self, state: &LayoutState) -> f64 {
        let (w, h) = (self.field.width(), self.field.height());
        let pts = state.points();
        for e in &state.topology().edges {
            let code = e.class.code();
            let (scratch, touched) = (&mut self.scratch, &mut self.touched);
            for_each_segment_pixel(pts[e.a], pts[e.b], self.thickness, w, h, |i| {
                if scratch[i] == 0 {
                    touched.push(i);
                }
                scratch[i] = code;
            });
        }
        let mut sum = KahanSum::default();
        sum.add(self.bg_total);
        for &i in &self.touched {
            let c = self.scratch[i];
            sum.add(self.field.at(c, i) - self.field.at(0, i));
            self.scratch[i] = 0;
        }
        self.touched.clear();
        -sum.value() / (w * h) as f64
    }
}
