//! Conversion of layout states into pixel rasters.
//!
//! Edges are drawn with an integer line stepper between endpoints rounded to
//! the nearest pixel; overlapping edges are resolved by edge-list order.
//! Faces are filled by a scanline pass that samples pixel centers with a
//! half-open crossing rule, so faces sharing an edge never both claim a pixel.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::layout::{max_x, max_y, LabelClass, LayoutState, Point2, RegionLabel, Vertex};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    pub w: usize,
    pub h: usize,
    pub data: Vec<u8>,
}

impl LabelMap {
    pub fn background(w: usize, h: usize) -> Self {
        LabelMap {
            w,
            h,
            data: vec![LabelClass::Bg.code(); w * h],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> LabelClass {
        LabelClass::from_code(self.data[y * self.w + x]).expect("valid label code")
    }

    pub fn count(&self, class: LabelClass) -> usize {
        self.data.iter().filter(|&&c| c == class.code()).count()
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        write_pgm(path, self.w, self.h, &self.data)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    pub w: usize,
    pub h: usize,
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

pub fn binary_mask(map: &LabelMap, class: LabelClass) -> BinaryMask {
    BinaryMask {
        w: map.w,
        h: map.h,
        data: map.data.iter().map(|&c| c == class.code()).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionMap {
    pub w: usize,
    pub h: usize,
    /// [`RegionLabel::code`] per pixel.
    pub data: Vec<u8>,
}

impl RegionMap {
    pub fn get(&self, x: usize, y: usize) -> RegionLabel {
        RegionLabel::from_code(self.data[y * self.w + x]).expect("valid region code")
    }

    pub fn count(&self, label: RegionLabel) -> usize {
        self.data.iter().filter(|&&c| c == label.code()).count()
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        write_pgm(path, self.w, self.h, &self.data)
    }
}

/// Writes an 8-bit PGM with each label code scaled by 60.
fn write_pgm(path: &Path, w: usize, h: usize, codes: &[u8]) -> Result<()> {
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend(codes.iter().map(|c| c.saturating_mul(60)));
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn round_px(p: Point2) -> (i64, i64) {
    (p.x.round() as i64, p.y.round() as i64)
}

/// Visits the integer line from `(x0, y0)` to `(x1, y1)`, both ends included.
pub fn for_each_line_pixel(x0: i64, y0: i64, x1: i64, y1: i64, mut f: impl FnMut(i64, i64)) {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let (mut x, mut y) = (x0, y0);
    let mut err = dx + dy;
    loop {
        f(x, y);
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Visits every in-image pixel of a segment drawn with a square brush of
/// side `thickness`. Pixels may be visited more than once when `thickness > 1`.
pub fn for_each_segment_pixel(
    p: Point2,
    q: Point2,
    thickness: usize,
    w: usize,
    h: usize,
    mut f: impl FnMut(usize),
) {
    let t = thickness.max(1) as i64;
    let lo = -(t - 1) / 2;
    let hi = t / 2;
    let (x0, y0) = round_px(p);
    let (x1, y1) = round_px(q);
    let (wi, hi_img) = (w as i64, h as i64);
    for_each_line_pixel(x0, y0, x1, y1, |x, y| {
        for oy in lo..=hi {
            let yy = y + oy;
            if yy < 0 || yy >= hi_img {
                continue;
            }
            for ox in lo..=hi {
                let xx = x + ox;
                if xx >= 0 && xx < wi {
                    f(yy as usize * w + xx as usize);
                }
            }
        }
    });
}

/// Draws the edges of `state` into a label map, later edges overwriting
/// earlier ones.
pub fn rasterize_edges(state: &LayoutState, w: usize, h: usize, thickness: usize) -> LabelMap {
    let mut map = LabelMap::background(w, h);
    let pts = state.points();
    for e in &state.topology().edges {
        let code = e.class.code();
        for_each_segment_pixel(pts[e.a], pts[e.b], thickness, w, h, |i| map.data[i] = code);
    }
    map
}

fn expand_coord(v: f64, max: f64) -> f64 {
    if v <= 0.0 {
        -0.5
    } else if v >= max {
        max + 0.5
    } else {
        v
    }
}

/// Face polygon in pixel-center coordinates. Vertices on the image border
/// are pushed half a pixel outward so the faces cover every pixel center.
fn face_polygon(state: &LayoutState, cycle: &[Vertex], w: usize, h: usize) -> Vec<Point2> {
    let (mx, my) = (max_x(w), max_y(h));
    cycle
        .iter()
        .map(|v| match v {
            Vertex::Slot(j) => {
                let p = state.point(*j);
                Point2::new(expand_coord(p.x, mx), expand_coord(p.y, my))
            }
            Vertex::TopLeft => Point2::new(-0.5, -0.5),
            Vertex::TopRight => Point2::new(mx + 0.5, -0.5),
            Vertex::BottomLeft => Point2::new(-0.5, my + 0.5),
            Vertex::BottomRight => Point2::new(mx + 0.5, my + 0.5),
        })
        .collect()
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_cross(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let o1 = orient(a, b, c);
    let o2 = orient(a, b, d);
    let o3 = orient(c, d, a);
    let o4 = orient(c, d, b);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// True when two non-adjacent sides of the polygon properly cross.
/// Touching and collinear overlap are allowed (degenerate faces).
pub fn polygon_self_intersects(poly: &[Point2]) -> bool {
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        for k in i + 2..n {
            if i == 0 && k == n - 1 {
                continue;
            }
            let (c, d) = (poly[k], poly[(k + 1) % n]);
            if segments_cross(a, b, c, d) {
                return true;
            }
        }
    }
    false
}

/// Scanline fill over pixel centers with even-odd spans `[xa, xb)`.
fn fill_polygon(poly: &[Point2], w: usize, h: usize, mut f: impl FnMut(usize)) {
    let n = poly.len();
    let y_min = poly.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
    let y_max = poly.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
    let row_lo = y_min.ceil().max(0.0) as usize;
    let row_hi = (y_max.ceil() as i64).min(h as i64);
    let mut xs: Vec<f64> = Vec::with_capacity(n);
    for row in row_lo as i64..row_hi {
        let yc = row as f64;
        xs.clear();
        for i in 0..n {
            let (p, q) = (poly[i], poly[(i + 1) % n]);
            if p.y == q.y {
                continue;
            }
            // orient low-to-high so shared sides give bit-identical crossings
            let (lo, hi) = if p.y < q.y { (p, q) } else { (q, p) };
            if lo.y <= yc && yc < hi.y {
                xs.push(lo.x + (yc - lo.y) * (hi.x - lo.x) / (hi.y - lo.y));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let start = pair[0].ceil().max(0.0);
            let end = (pair[1].ceil()).min(w as f64);
            if end <= start {
                continue;
            }
            let base = row as usize * w;
            for x in start as usize..end as usize {
                f(base + x);
            }
        }
    }
}

fn checked_polygons(state: &LayoutState, w: usize, h: usize) -> Result<Vec<Vec<Point2>>> {
    state
        .topology()
        .faces
        .iter()
        .enumerate()
        .map(|(i, face)| {
            let poly = face_polygon(state, &face.cycle, w, h);
            if polygon_self_intersects(&poly) {
                Err(Error::SelfIntersectingFace {
                    face: i,
                    label: face.label.as_str().to_string(),
                })
            } else {
                Ok(poly)
            }
        })
        .collect()
}

/// Number of faces claiming each pixel. A valid tiling gives all ones.
pub fn region_claims(state: &LayoutState, w: usize, h: usize) -> Result<Vec<u8>> {
    let mut claims = vec![0u8; w * h];
    for poly in checked_polygons(state, w, h)? {
        fill_polygon(&poly, w, h, |i| claims[i] = claims[i].saturating_add(1));
    }
    Ok(claims)
}

/// Fills the faces of `state` into a region map.
///
/// The first face (in catalog order) claiming a pixel wins. Pixels left
/// unclaimed by an invalid embedding inherit the previous pixel's label.
pub fn rasterize_regions(state: &LayoutState, w: usize, h: usize) -> Result<RegionMap> {
    const UNSET: u8 = u8::MAX;
    let polys = checked_polygons(state, w, h)?;
    let faces = &state.topology().faces;
    let mut data = vec![UNSET; w * h];
    for (poly, face) in polys.iter().zip(faces) {
        let code = face.label.code();
        fill_polygon(poly, w, h, |i| {
            if data[i] == UNSET {
                data[i] = code;
            }
        });
    }
    let mut prev = faces[0].label.code();
    for v in data.iter_mut() {
        if *v == UNSET {
            *v = prev;
        }
        prev = *v;
    }
    Ok(RegionMap { w, h, data })
}
