//! Four-channel edge-likelihood fields: storage, LFF file I/O, bilinear
//! sampling and the synthetic generator.
//!
//! LFF layout (little endian): `b"LFF1"`, `u32 w`, `u32 h`, `u32 channels`
//! (always 4), then `channels * h * w` `f32` values, channel-major and
//! row-major within a channel, channels ordered bg, wf, ww, wc.
//!
//! The generator draws all randomness from `ChaCha8Rng` seeded with the
//! 64-bit seed via `SeedableRng::seed_from_u64`, so fields are reproducible
//! across platforms.

use std::path::Path;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::layout::{LabelClass, LayoutState};
use crate::raster::for_each_segment_pixel;

pub const LFF_MAGIC: [u8; 4] = *b"LFF1";
pub const CHANNELS: usize = 4;
pub const MIN_FIELD_SIZE: usize = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureField {
    w: usize,
    h: usize,
    data: Vec<f32>,
}

impl FeatureField {
    pub fn zeros(w: usize, h: usize) -> Self {
        FeatureField {
            w,
            h,
            data: vec![0.0; CHANNELS * w * h],
        }
    }

    /// Builds a field from channel-major data (`4 * w * h` values).
    pub fn from_data(w: usize, h: usize, data: Vec<f32>) -> Result<Self> {
        if w == 0 || h == 0 {
            return Err(Error::InvalidArgument("field dimensions must be positive".into()));
        }
        if data.len() != CHANNELS * w * h {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values for a {w}x{h} field, got {}",
                CHANNELS * w * h,
                data.len()
            )));
        }
        check_finite(w, h, &data)?;
        Ok(FeatureField { w, h, data })
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn channel(&self, c: LabelClass) -> &[f32] {
        let n = self.w * self.h;
        let k = c.code() as usize;
        &self.data[k * n..(k + 1) * n]
    }

    pub fn channel_mut(&mut self, c: LabelClass) -> &mut [f32] {
        let n = self.w * self.h;
        let k = c.code() as usize;
        &mut self.data[k * n..(k + 1) * n]
    }

    #[inline]
    pub fn get(&self, c: LabelClass, x: usize, y: usize) -> f32 {
        self.data[(c.code() as usize * self.h + y) * self.w + x]
    }

    #[inline]
    pub fn set(&mut self, c: LabelClass, x: usize, y: usize, v: f32) {
        self.data[(c.code() as usize * self.h + y) * self.w + x] = v;
    }

    /// Value at pixel index `idx` (row-major) of channel `c`.
    #[inline]
    pub(crate) fn at(&self, c: u8, idx: usize) -> f64 {
        self.data[c as usize * self.w * self.h + idx] as f64
    }

    /// All channels identically zero.
    pub fn is_degenerate(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Bilinear sample of channel `c` with clamp-to-edge addressing.
    pub fn sample(&self, c: LabelClass, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.w - 1) as f64);
        let y = y.clamp(0.0, (self.h - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let x1 = (x0 + 1).min(self.w - 1);
        let y1 = (y0 + 1).min(self.h - 1);
        let v00 = self.get(c, x0, y0) as f64;
        if fx == 0.0 && fy == 0.0 {
            return v00;
        }
        let v10 = self.get(c, x1, y0) as f64;
        let v01 = self.get(c, x0, y1) as f64;
        let v11 = self.get(c, x1, y1) as f64;
        let top = v00 + (v10 - v00) * fx;
        let bottom = v01 + (v11 - v01) * fx;
        top + (bottom - top) * fy
    }

    pub fn to_lff_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.data.len());
        out.extend_from_slice(&LFF_MAGIC);
        out.extend_from_slice(&(self.w as u32).to_le_bytes());
        out.extend_from_slice(&(self.h as u32).to_le_bytes());
        out.extend_from_slice(&(CHANNELS as u32).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_lff_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::Parse(format!("LFF header truncated ({} bytes)", bytes.len())));
        }
        let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
        if magic != LFF_MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
        let (w, h, channels) = (word(4) as usize, word(8) as usize, word(12));
        if channels as usize != CHANNELS {
            return Err(Error::ChannelCount(channels));
        }
        if w < MIN_FIELD_SIZE || h < MIN_FIELD_SIZE {
            return Err(Error::InvalidArgument(format!(
                "field must be at least {MIN_FIELD_SIZE}x{MIN_FIELD_SIZE}, got {w}x{h}"
            )));
        }
        let n = CHANNELS * w * h;
        let body = &bytes[16..];
        if body.len() != 4 * n {
            return Err(Error::Parse(format!(
                "LFF body has {} bytes, expected {}",
                body.len(),
                4 * n
            )));
        }
        let data: Vec<f32> = body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        check_finite(w, h, &data)?;
        let field = FeatureField { w, h, data };
        if field.is_degenerate() {
            warn!("degenerate field: all channels are zero");
        }
        Ok(field)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_lff_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_lff_bytes(&bytes)
    }
}

fn check_finite(w: usize, h: usize, data: &[f32]) -> Result<()> {
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        let n = w * h;
        return Err(Error::NonFinite {
            index,
            channel: index / n,
            x: index % n % w,
            y: index % n / w,
        });
    }
    Ok(())
}

pub fn load_field(path: &Path) -> Result<FeatureField> {
    FeatureField::load(path)
}

pub fn save_field(field: &FeatureField, path: &Path) -> Result<()> {
    field.save(path)
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthParams {
    /// Brush side (px) used to draw the ground-truth edges.
    pub thickness: usize,
    pub blur_sigma: f64,
    pub noise_sigma: f64,
    pub occlusion_count: usize,
    /// Maximum occluder side as a fraction of `min(w, h)`.
    pub occlusion_max_frac: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            thickness: 1,
            blur_sigma: 2.0,
            noise_sigma: 0.0,
            occlusion_count: 0,
            occlusion_max_frac: 0.2,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.thickness == 0 {
            return Err(Error::InvalidArgument("thickness must be >= 1".into()));
        }
        if !(self.blur_sigma >= 0.0 && self.blur_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("blur sigma {} must be >= 0", self.blur_sigma)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise sigma {} must be >= 0", self.noise_sigma)));
        }
        if !(0.0..=0.5).contains(&self.occlusion_max_frac) {
            return Err(Error::InvalidArgument(format!(
                "occlusion_max_frac {} must be in [0, 0.5]",
                self.occlusion_max_frac
            )));
        }
        Ok(())
    }
}

/// Normalized Gaussian kernel truncated at `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|d| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / sum).collect()
}

/// Mirror index into `[0, n)` without repeating the edge sample.
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - m;
    }
    m as usize
}

/// Separable Gaussian blur with reflective borders.
pub fn gaussian_blur(plane: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return plane.to_vec();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                acc += kv * row[reflect(x as i64 + t as i64 - r, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                acc += kv * tmp[reflect(y as i64 + t as i64 - r, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Renders a synthetic feature field from a ground-truth layout.
pub fn synth_field(gt: &LayoutState, w: usize, h: usize, params: &SynthParams) -> Result<FeatureField> {
    params.validate()?;
    gt.validate(w, h)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = w * h;
    let edge_classes = [LabelClass::Wf, LabelClass::Ww, LabelClass::Wc];
    let mut planes: Vec<Vec<f64>> = vec![vec![0.0; n]; 3];
    let pts = gt.points();
    for e in &gt.topology().edges {
        let plane = &mut planes[e.class.code() as usize - 1];
        for_each_segment_pixel(pts[e.a], pts[e.b], params.thickness, w, h, |i| plane[i] = 1.0);
    }

    for plane in planes.iter_mut() {
        let mut blurred = gaussian_blur(plane, w, h, params.blur_sigma);
        let max = blurred.iter().copied().fold(0.0, f64::max);
        if max > 0.0 {
            blurred.iter_mut().for_each(|v| *v /= max);
        }
        *plane = blurred;
    }

    let max_side = (params.occlusion_max_frac * w.min(h) as f64).floor() as usize;
    for _ in 0..params.occlusion_count {
        if max_side == 0 {
            break;
        }
        let bw = rng.random_range(1..=max_side);
        let bh = rng.random_range(1..=max_side);
        let x0 = rng.random_range(0..=w - bw);
        let y0 = rng.random_range(0..=h - bh);
        let wf = &mut planes[0];
        for y in y0..y0 + bh {
            wf[y * w + x0..y * w + x0 + bw].iter_mut().for_each(|v| *v = 0.0);
        }
    }

    if params.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, params.noise_sigma)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for plane in planes.iter_mut() {
            for v in plane.iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
    }

    let mut field = FeatureField::zeros(w, h);
    for (plane, class) in planes.iter().zip(edge_classes) {
        let out = field.channel_mut(class);
        for (o, v) in out.iter_mut().zip(plane) {
            *o = v.clamp(0.0, 1.0) as f32;
        }
    }
    for i in 0..n {
        let m = (1..CHANNELS).map(|c| field.data[c * n + i]).fold(0.0f32, f32::max);
        field.data[i] = 1.0 - m;
    }
    Ok(field)
}
