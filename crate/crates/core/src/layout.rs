//! Layout topologies, layout states and conjunction anchoring.
//!
//! A topology is a fixed graph of conjunctions (room corners or their
//! intersections with the image border) joined by labeled edges, plus the
//! face cycles that turn a layout into a region mask. Topologies are data:
//! the default catalog ships as `data/catalog.json` and any other catalog
//! with the same schema can be loaded at runtime.
//!
//! Coordinates are continuous pixels where pixel `(i, j)` has its center at
//! `(i, j)`. The valid rectangle for conjunctions is `[0, w-1] x [0, h-1]`.

use std::collections::HashSet;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance (px) within which a point counts as lying on an image border.
pub const BORDER_TOLERANCE: f64 = 0.5;

pub const DEFAULT_CATALOG_JSON: &str = include_str!("../data/catalog.json");

/// Per-pixel edge classes. Integer codes are stable and used in files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum LabelClass {
    Bg = 0,
    Wf = 1,
    Ww = 2,
    Wc = 3,
}

impl LabelClass {
    pub const ALL: [LabelClass; 4] = [
        LabelClass::Bg,
        LabelClass::Wf,
        LabelClass::Ww,
        LabelClass::Wc,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LabelClass::Bg => "bg",
            LabelClass::Wf => "wf",
            LabelClass::Ww => "ww",
            LabelClass::Wc => "wc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.as_str() == s)
    }
}

impl fmt::Display for LabelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A continuous 2D coordinate, also used as a displacement vector.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

pub type Vec2 = Point2;

impl Point2 {
    pub const ZERO: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Point2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Clamps into the conjunction rectangle `[0, w-1] x [0, h-1]`.
    pub fn clamp_to_image(self, w: usize, h: usize) -> Self {
        Point2 {
            x: self.x.clamp(0.0, max_x(w)),
            y: self.y.clamp(0.0, max_y(h)),
        }
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, s: f64) -> Point2 {
        Point2::new(self.x * s, self.y * s)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

pub(crate) fn max_x(w: usize) -> f64 {
    w.saturating_sub(1) as f64
}

pub(crate) fn max_y(h: usize) -> f64 {
    h.saturating_sub(1) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Top,
    Bottom,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Top => "top",
            Side::Bottom => "bottom",
        }
    }

    fn is_vertical_border(self) -> bool {
        matches!(self, Side::Left | Side::Right)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AnchorConstraint {
    Interior,
    /// The slot starts on the named border. It may later slide onto an
    /// adjacent border through an image corner, but always stays on one.
    Boundary(Side),
}

impl AnchorConstraint {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "interior" => AnchorConstraint::Interior,
            "left" => AnchorConstraint::Boundary(Side::Left),
            "right" => AnchorConstraint::Boundary(Side::Right),
            "top" => AnchorConstraint::Boundary(Side::Top),
            "bottom" => AnchorConstraint::Boundary(Side::Bottom),
            _ => return None,
        })
    }

    pub fn is_boundary(self) -> bool {
        matches!(self, AnchorConstraint::Boundary(_))
    }
}

/// Borders that `at` lies on, within [`BORDER_TOLERANCE`].
fn borders_at(at: Point2, w: usize, h: usize) -> (Option<Side>, Option<Side>) {
    let vertical = if at.x <= BORDER_TOLERANCE {
        Some(Side::Left)
    } else if at.x >= max_x(w) - BORDER_TOLERANCE {
        Some(Side::Right)
    } else {
        None
    };
    let horizontal = if at.y <= BORDER_TOLERANCE {
        Some(Side::Top)
    } else if at.y >= max_y(h) - BORDER_TOLERANCE {
        Some(Side::Bottom)
    } else {
        None
    };
    (vertical, horizontal)
}

/// Restricts a displacement according to the anchor of the conjunction at `at`.
///
/// Interior slots are unconstrained here (rectangle clamping happens after
/// the update). A boundary slot loses the component perpendicular to its
/// border. At an image corner only the components pointing out of the image
/// are removed, so the slot can stay put or slide onto either border.
pub fn apply_anchor(delta: Vec2, anchor: AnchorConstraint, at: Point2, w: usize, h: usize) -> Vec2 {
    let named = match anchor {
        AnchorConstraint::Interior => return delta,
        AnchorConstraint::Boundary(side) => side,
    };
    match borders_at(at, w, h) {
        (Some(v), Some(hz)) => {
            let mut out = delta;
            if (v == Side::Left && out.x < 0.0) || (v == Side::Right && out.x > 0.0) {
                out.x = 0.0;
            }
            if (hz == Side::Top && out.y < 0.0) || (hz == Side::Bottom && out.y > 0.0) {
                out.y = 0.0;
            }
            out
        }
        (Some(_), None) => Vec2::new(0.0, delta.y),
        (None, Some(_)) => Vec2::new(delta.x, 0.0),
        (None, None) => {
            if named.is_vertical_border() {
                Vec2::new(0.0, delta.y)
            } else {
                Vec2::new(delta.x, 0.0)
            }
        }
    }
}

/// Puts a boundary slot back onto the nearest border after an update.
pub fn snap_to_border(p: Point2, w: usize, h: usize) -> Point2 {
    let p = p.clamp_to_image(w, h);
    let (mx, my) = (max_x(w), max_y(h));
    let candidates = [
        (p.x, Point2::new(0.0, p.y)),
        (mx - p.x, Point2::new(mx, p.y)),
        (p.y, Point2::new(p.x, 0.0)),
        (my - p.y, Point2::new(p.x, my)),
    ];
    candidates
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|c| c.1)
        .unwrap_or(p)
}

fn on_border_exactly(p: Point2, w: usize, h: usize) -> bool {
    p.x == 0.0 || p.y == 0.0 || p.x == max_x(w) || p.y == max_y(h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Endpoint {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeSpec {
    pub a: usize,
    pub b: usize,
    pub class: LabelClass,
}

impl EdgeSpec {
    pub fn slot(&self, end: Endpoint) -> usize {
        match end {
            Endpoint::A => self.a,
            Endpoint::B => self.b,
        }
    }
}

/// Region labels used for the pixel-error mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RegionLabel {
    Floor,
    Ceiling,
    /// Wall index in `1..=3`.
    Wall(u8),
}

impl RegionLabel {
    pub const COUNT: usize = 5;

    pub const ALL: [RegionLabel; 5] = [
        RegionLabel::Floor,
        RegionLabel::Ceiling,
        RegionLabel::Wall(1),
        RegionLabel::Wall(2),
        RegionLabel::Wall(3),
    ];

    pub fn code(self) -> u8 {
        match self {
            RegionLabel::Floor => 0,
            RegionLabel::Ceiling => 1,
            RegionLabel::Wall(k) => 1 + k,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "floor" => RegionLabel::Floor,
            "ceiling" => RegionLabel::Ceiling,
            "wall1" => RegionLabel::Wall(1),
            "wall2" => RegionLabel::Wall(2),
            "wall3" => RegionLabel::Wall(3),
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::Floor => "floor",
            RegionLabel::Ceiling => "ceiling",
            RegionLabel::Wall(1) => "wall1",
            RegionLabel::Wall(2) => "wall2",
            RegionLabel::Wall(_) => "wall3",
        }
    }
}

/// A vertex of a face cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Vertex {
    Slot(usize),
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl Vertex {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "TL" => Vertex::TopLeft,
            "TR" => Vertex::TopRight,
            "BL" => Vertex::BottomLeft,
            "BR" => Vertex::BottomRight,
            _ => Vertex::Slot(s.strip_prefix('P')?.parse().ok()?),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FaceSpec {
    pub label: RegionLabel,
    pub cycle: Vec<Vertex>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopologySpec {
    pub id: u32,
    pub name: String,
    pub anchors: Vec<AnchorConstraint>,
    pub edges: Vec<EdgeSpec>,
    pub faces: Vec<FaceSpec>,
    /// Fractions of `(w, h)` for each slot.
    pub average_state: Vec<[f64; 2]>,
}

impl TopologySpec {
    pub fn num_conjunctions(&self) -> usize {
        self.anchors.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edges touching slot `j`, with the endpoint of the edge that is `j`.
    pub fn incident_edges(&self, j: usize) -> Result<Vec<(usize, EdgeSpec, Endpoint)>> {
        if j >= self.num_conjunctions() {
            return Err(Error::InvalidArgument(format!(
                "slot {j} out of range for topology {} with {} conjunctions",
                self.id,
                self.num_conjunctions()
            )));
        }
        Ok(self
            .edges
            .iter()
            .enumerate()
            .filter_map(|(k, e)| {
                if e.a == j {
                    Some((k, *e, Endpoint::A))
                } else if e.b == j {
                    Some((k, *e, Endpoint::B))
                } else {
                    None
                }
            })
            .collect())
    }

    fn schema_err(&self, reason: impl Into<String>) -> Error {
        Error::Schema {
            id: self.id,
            reason: reason.into(),
        }
    }

    /// Checks every structural invariant of a topology.
    pub fn validate(&self) -> Result<()> {
        let nc = self.num_conjunctions();
        if nc == 0 {
            return Err(self.schema_err("no conjunctions"));
        }
        if self.edges.is_empty() {
            return Err(self.schema_err("no edges"));
        }
        if self.edges.len() > 64 {
            return Err(self.schema_err("more than 64 edges"));
        }
        let mut referenced = vec![false; nc];
        for (k, e) in self.edges.iter().enumerate() {
            if e.a >= nc || e.b >= nc {
                return Err(self.schema_err(format!("edge {k} references a slot >= {nc}")));
            }
            if e.a == e.b {
                return Err(self.schema_err(format!("edge {k} joins slot {} to itself", e.a)));
            }
            if e.class == LabelClass::Bg {
                return Err(self.schema_err(format!("edge {k} has class bg")));
            }
            referenced[e.a] = true;
            referenced[e.b] = true;
        }
        if let Some(j) = referenced.iter().position(|r| !r) {
            return Err(self.schema_err(format!("slot {j} is not referenced by any edge")));
        }
        if self.faces.is_empty() {
            return Err(self.schema_err("no faces"));
        }
        let mut walls = HashSet::new();
        for (f, face) in self.faces.iter().enumerate() {
            if face.cycle.len() < 3 {
                return Err(self.schema_err(format!("face {f} has fewer than 3 vertices")));
            }
            for v in &face.cycle {
                if let Vertex::Slot(s) = v {
                    if *s >= nc {
                        return Err(self.schema_err(format!("face {f} references slot P{s}")));
                    }
                }
            }
            if let RegionLabel::Wall(k) = face.label {
                if !(1..=3).contains(&k) {
                    return Err(self.schema_err(format!("face {f} has wall index {k}")));
                }
                walls.insert(k);
            }
        }
        if self.average_state.len() != nc {
            return Err(self.schema_err(format!(
                "average_state has {} entries, expected {nc}",
                self.average_state.len()
            )));
        }
        for (j, (frac, anchor)) in self.average_state.iter().zip(&self.anchors).enumerate() {
            if !frac.iter().all(|v| (0.0..=1.0).contains(v)) {
                return Err(self.schema_err(format!("average_state[{j}] outside [0,1]^2")));
            }
            let ok = match anchor {
                AnchorConstraint::Interior => true,
                AnchorConstraint::Boundary(Side::Left) => frac[0] == 0.0,
                AnchorConstraint::Boundary(Side::Right) => frac[0] == 1.0,
                AnchorConstraint::Boundary(Side::Top) => frac[1] == 0.0,
                AnchorConstraint::Boundary(Side::Bottom) => frac[1] == 1.0,
            };
            if !ok {
                return Err(self.schema_err(format!(
                    "average_state[{j}] does not respect its anchor {anchor:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Scales a topology's average state to an image of `w x h` pixels.
pub fn average_init(spec: &Arc<TopologySpec>, w: usize, h: usize) -> Result<LayoutState> {
    if w < 16 || h < 16 {
        return Err(Error::InvalidArgument(format!(
            "image must be at least 16x16, got {w}x{h}"
        )));
    }
    let points = spec
        .average_state
        .iter()
        .zip(&spec.anchors)
        .map(|(frac, anchor)| constrain_point(Point2::new(frac[0] * w as f64, frac[1] * h as f64), *anchor, w, h))
        .collect();
    LayoutState::new(spec.clone(), points, w, h)
}

/// Clamps a point to the rectangle, and boundary slots onto a border.
pub fn constrain_point(p: Point2, anchor: AnchorConstraint, w: usize, h: usize) -> Point2 {
    match anchor {
        AnchorConstraint::Interior => p.clamp_to_image(w, h),
        AnchorConstraint::Boundary(side) => {
            let p = p.clamp_to_image(w, h);
            // a point on the named border stays there even if another border is nearer
            match side {
                Side::Left if p.x <= BORDER_TOLERANCE => Point2::new(0.0, p.y),
                Side::Right if p.x >= max_x(w) - BORDER_TOLERANCE => Point2::new(max_x(w), p.y),
                Side::Top if p.y <= BORDER_TOLERANCE => Point2::new(p.x, 0.0),
                Side::Bottom if p.y >= max_y(h) - BORDER_TOLERANCE => Point2::new(p.x, max_y(h)),
                _ => snap_to_border(p, w, h),
            }
        }
    }
}

/// A concrete parameterization of one topology on a `w x h` image.
#[derive(Clone, Debug, PartialEq)]
pub struct LayoutState {
    topology: Arc<TopologySpec>,
    points: Vec<Point2>,
}

impl LayoutState {
    pub fn new(topology: Arc<TopologySpec>, points: Vec<Point2>, w: usize, h: usize) -> Result<Self> {
        let state = LayoutState { topology, points };
        state.validate(w, h)?;
        Ok(state)
    }

    /// Builds a state without checking it against an image size.
    pub(crate) fn from_parts(topology: Arc<TopologySpec>, points: Vec<Point2>) -> Self {
        LayoutState { topology, points }
    }

    pub fn topology(&self) -> &Arc<TopologySpec> {
        &self.topology
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn point(&self, j: usize) -> Point2 {
        self.points[j]
    }

    pub fn validate(&self, w: usize, h: usize) -> Result<()> {
        let spec = &self.topology;
        if self.points.len() != spec.num_conjunctions() {
            return Err(Error::InvalidLayout(format!(
                "topology {} expects {} points, got {}",
                spec.id,
                spec.num_conjunctions(),
                self.points.len()
            )));
        }
        for (j, (p, anchor)) in self.points.iter().zip(&spec.anchors).enumerate() {
            if !p.is_finite() {
                return Err(Error::InvalidLayout(format!("point {j} is not finite")));
            }
            if p.x < 0.0 || p.y < 0.0 || p.x > max_x(w) || p.y > max_y(h) {
                return Err(Error::InvalidLayout(format!(
                    "point {j} ({}, {}) outside the {w}x{h} image",
                    p.x, p.y
                )));
            }
            if anchor.is_boundary() && !on_border_exactly(*p, w, h) {
                return Err(Error::InvalidLayout(format!(
                    "boundary point {j} ({}, {}) is not on an image border",
                    p.x, p.y
                )));
            }
        }
        Ok(())
    }

    /// Returns a copy with each point displaced by `deltas[j]`, then
    /// clamped and snapped. Deltas are expected to be anchor-filtered.
    pub fn displaced(&self, deltas: &[Vec2], w: usize, h: usize) -> LayoutState {
        let points = self
            .points
            .iter()
            .zip(deltas)
            .zip(&self.topology.anchors)
            .map(|((p, d), anchor)| move_point(*p, *d, *anchor, w, h))
            .collect();
        LayoutState::from_parts(self.topology.clone(), points)
    }

    pub fn with_point(&self, j: usize, p: Point2) -> LayoutState {
        let mut points = self.points.clone();
        points[j] = p;
        LayoutState::from_parts(self.topology.clone(), points)
    }

    pub fn to_file(&self) -> LayoutFile {
        LayoutFile {
            topology_id: self.topology.id,
            points: self.points.iter().map(|p| [p.x, p.y]).collect(),
        }
    }
}

/// Moves a point by an anchor-filtered delta and restores its constraints.
pub fn move_point(p: Point2, delta: Vec2, anchor: AnchorConstraint, w: usize, h: usize) -> Point2 {
    let q = (p + delta).clamp_to_image(w, h);
    match anchor {
        AnchorConstraint::Interior => q,
        AnchorConstraint::Boundary(_) => {
            if on_border_exactly(q, w, h) {
                q
            } else {
                snap_to_border(q, w, h)
            }
        }
    }
}

/// The on-disk layout representation: `{"topology_id": k, "points": [[x, y], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutFile {
    pub topology_id: u32,
    pub points: Vec<[f64; 2]>,
}

impl LayoutFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn to_state(&self, catalog: &Catalog, w: usize, h: usize) -> Result<LayoutState> {
        let spec = catalog.get(self.topology_id).ok_or_else(|| {
            Error::InvalidLayout(format!("unknown topology id {}", self.topology_id))
        })?;
        let points = self.points.iter().map(|p| Point2::new(p[0], p[1])).collect();
        LayoutState::new(spec.clone(), points, w, h)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Catalog {
    topologies: Vec<Arc<TopologySpec>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    topologies: Vec<TopologyRecord>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyRecord {
    id: u32,
    #[serde(default)]
    name: String,
    anchors: Vec<String>,
    edges: Vec<(usize, usize, String)>,
    faces: Vec<FaceRecord>,
    average_state: Vec<[f64; 2]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FaceRecord {
    label: String,
    cycle: Vec<String>,
}

impl TopologyRecord {
    fn into_spec(self) -> Result<TopologySpec> {
        let id = self.id;
        let err = |reason: String| Error::Schema { id, reason };
        let anchors = self
            .anchors
            .iter()
            .map(|a| AnchorConstraint::parse(a).ok_or_else(|| err(format!("unknown anchor {a:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let edges = self
            .edges
            .iter()
            .map(|(a, b, c)| {
                let class = LabelClass::parse(c).ok_or_else(|| err(format!("unknown edge class {c:?}")))?;
                Ok(EdgeSpec { a: *a, b: *b, class })
            })
            .collect::<Result<Vec<_>>>()?;
        let faces = self
            .faces
            .iter()
            .map(|f| {
                let label = RegionLabel::parse(&f.label)
                    .ok_or_else(|| err(format!("unknown face label {:?}", f.label)))?;
                let cycle = f
                    .cycle
                    .iter()
                    .map(|v| Vertex::parse(v).ok_or_else(|| err(format!("unknown vertex {v:?}"))))
                    .collect::<Result<Vec<_>>>()?;
                Ok(FaceSpec { label, cycle })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TopologySpec {
            id,
            name: self.name,
            anchors,
            edges,
            faces,
            average_state: self.average_state,
        })
    }
}

impl Catalog {
    /// Builds a catalog from topologies, validating each one.
    pub fn new(topologies: Vec<TopologySpec>) -> Result<Self> {
        let mut ids = HashSet::new();
        for t in &topologies {
            if !ids.insert(t.id) {
                return Err(Error::Schema {
                    id: t.id,
                    reason: "duplicate topology id".into(),
                });
            }
            t.validate()?;
            check_partition(t)?;
        }
        Ok(Catalog {
            topologies: topologies.into_iter().map(Arc::new).collect(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: CatalogFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let specs = file
            .topologies
            .into_iter()
            .map(TopologyRecord::into_spec)
            .collect::<Result<Vec<_>>>()?;
        Catalog::new(specs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Catalog::from_json(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// The built-in 11-topology catalog.
    pub fn default_catalog() -> Self {
        Catalog::from_json(DEFAULT_CATALOG_JSON).expect("built-in catalog is valid")
    }

    pub fn len(&self) -> usize {
        self.topologies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topologies.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&Arc<TopologySpec>> {
        self.topologies.iter().find(|t| t.id == id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<TopologySpec>> {
        self.topologies.iter()
    }

    /// A catalog restricted to the given ids, in the given order.
    pub fn subset(&self, ids: &[u32]) -> Result<Catalog> {
        let topologies = ids
            .iter()
            .map(|id| {
                self.get(*id)
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown topology id {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Catalog { topologies })
    }
}

/// Faces must tile the image: rasterize the average state and require
/// every pixel to be claimed by exactly one face.
fn check_partition(spec: &TopologySpec) -> Result<()> {
    const SIZE: usize = 64;
    let spec = Arc::new(spec.clone());
    let state = average_init(&spec, SIZE, SIZE)?;
    let claims = crate::raster::region_claims(&state, SIZE, SIZE).map_err(|e| Error::Schema {
        id: spec.id,
        reason: e.to_string(),
    })?;
    if let Some(idx) = claims.iter().position(|&c| c != 1) {
        return Err(Error::Schema {
            id: spec.id,
            reason: format!(
                "faces do not partition the image: pixel ({}, {}) claimed {} times",
                idx % SIZE,
                idx / SIZE,
                claims[idx]
            ),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn catalog() -> Catalog {
        Catalog::default_catalog()
    }

    #[test]
    fn default_catalog_has_eleven_topologies() {
        let c = catalog();
        assert_eq!(c.len(), 11);
        let ids: Vec<u32> = c.iter().map(|t| t.id).collect();
        assert_eq!(ids, (1..=11).collect::<Vec<_>>());
    }

    #[test]
    fn single_full_box_catalog() {
        let full = catalog().get(1).unwrap().as_ref().clone();
        let c = Catalog::new(vec![full]).unwrap();
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn bg_edge_is_rejected() {
        let text = r#"{"topologies":[{"id":3,"anchors":["left","right"],
            "edges":[[0,1,"bg"]],
            "faces":[{"label":"wall1","cycle":["TL","TR","P1","P0"]},
                     {"label":"floor","cycle":["P0","P1","BR","BL"]}],
            "average_state":[[0,0.5],[1,0.5]]}]}"#;
        match Catalog::from_json(text) {
            Err(Error::Schema { id, reason }) => {
                assert_eq!(id, 3);
                assert!(reason.contains("bg"), "{reason}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn unreferenced_slot_is_rejected() {
        let text = r#"{"topologies":[{"id":2,"anchors":["left","right","interior"],
            "edges":[[0,1,"wf"]],
            "faces":[{"label":"wall1","cycle":["TL","TR","P1","P0"]},
                     {"label":"floor","cycle":["P0","P1","BR","BL"]}],
            "average_state":[[0,0.5],[1,0.5],[0.5,0.5]]}]}"#;
        let err = Catalog::from_json(text).unwrap_err();
        assert!(err.to_string().contains("slot 2"), "{err}");
    }

    #[test]
    fn overlapping_faces_are_rejected() {
        let text = r#"{"topologies":[{"id":9,"anchors":["left","right"],
            "edges":[[0,1,"wf"]],
            "faces":[{"label":"wall1","cycle":["TL","TR","BR","BL"]},
                     {"label":"floor","cycle":["P0","P1","BR","BL"]}],
            "average_state":[[0,0.5],[1,0.5]]}]}"#;
        let err = Catalog::from_json(text).unwrap_err();
        assert!(err.to_string().contains("partition"), "{err}");
    }

    #[test]
    fn average_init_scales_full_box_corners() {
        let c = catalog();
        let spec = c.get(1).unwrap();
        let s = average_init(spec, 100, 100).unwrap();
        let expected = [(30.0, 30.0), (70.0, 30.0), (70.0, 70.0), (30.0, 70.0)];
        for (j, (x, y)) in expected.iter().enumerate() {
            assert_eq!(s.point(j), Point2::new(*x, *y));
        }
    }

    #[test]
    fn average_init_left_anchor() {
        let c = catalog();
        let spec = c.get(6).unwrap();
        assert_eq!(spec.anchors[0], AnchorConstraint::Boundary(Side::Left));
        assert_eq!(spec.average_state[0], [0.0, 0.5]);
        let s = average_init(spec, 200, 100).unwrap();
        assert_eq!(s.point(0), Point2::new(0.0, 50.0));
        assert_eq!(s.point(1), Point2::new(199.0, 50.0));
    }

    #[test]
    fn topology_six_boundary_points_on_border() {
        let c = catalog();
        let s = average_init(c.get(6).unwrap(), 320, 320).unwrap();
        assert_eq!(s.point(0).x, 0.0);
        assert_eq!(s.point(1).x, 319.0);
    }

    #[test]
    fn average_init_rejects_tiny_images() {
        let c = catalog();
        assert!(average_init(c.get(1).unwrap(), 15, 100).is_err());
    }

    #[test]
    fn incident_edges_of_full_box_corner() {
        let c = catalog();
        let spec = c.get(1).unwrap();
        // enumerate directly from the edge list
        for j in 0..4 {
            let expected: Vec<usize> = spec
                .edges
                .iter()
                .enumerate()
                .filter(|(_, e)| e.a == j || e.b == j)
                .map(|(k, _)| k)
                .collect();
            let got = spec.incident_edges(j).unwrap();
            assert_eq!(got.len(), 3);
            assert_eq!(got.iter().map(|g| g.0).collect::<Vec<_>>(), expected);
            let ww = got.iter().filter(|g| g.1.class == LabelClass::Ww).count();
            assert_eq!(ww, 1);
            for (_, e, end) in &got {
                assert_eq!(e.slot(*end), j);
            }
        }
    }

    #[test]
    fn incident_edges_single_edge_topology() {
        let c = catalog();
        let spec = c.get(6).unwrap();
        assert_eq!(spec.incident_edges(0).unwrap().len(), 1);
        assert!(spec.incident_edges(2).is_err());
    }

    #[test]
    fn anchor_examples() {
        let d = Vec2::new(2.0, 3.0);
        let left = AnchorConstraint::Boundary(Side::Left);
        assert_eq!(apply_anchor(d, left, Point2::new(0.0, 50.0), 100, 100), Vec2::new(0.0, 3.0));
        assert_eq!(
            apply_anchor(d, AnchorConstraint::Interior, Point2::new(40.0, 50.0), 100, 100),
            d
        );
        assert_eq!(
            apply_anchor(Vec2::new(-2.0, 3.0), left, Point2::new(0.0, 0.0), 100, 100),
            Vec2::new(0.0, 3.0)
        );
    }

    #[test]
    fn corner_sign_cases() {
        // enumerate all sign combinations at each image corner
        let (w, h) = (50, 40);
        let corners = [
            (Point2::new(0.0, 0.0), (-1.0, -1.0)),
            (Point2::new(49.0, 0.0), (1.0, -1.0)),
            (Point2::new(0.0, 39.0), (-1.0, 1.0)),
            (Point2::new(49.0, 39.0), (1.0, 1.0)),
        ];
        let anchor = AnchorConstraint::Boundary(Side::Top);
        for (at, (ox, oy)) in corners {
            for sx in [-1.0, 1.0] {
                for sy in [-1.0, 1.0] {
                    let d = Vec2::new(2.0 * sx, 3.0 * sy);
                    let out = apply_anchor(d, anchor, at, w, h);
                    let ex = if sx == ox { 0.0 } else { d.x };
                    let ey = if sy == oy { 0.0 } else { d.y };
                    assert_eq!(out, Vec2::new(ex, ey), "at {at:?} d {d:?}");
                }
            }
        }
    }

    #[test]
    fn corner_slide_onto_other_border() {
        let anchor = AnchorConstraint::Boundary(Side::Left);
        let at = Point2::new(0.0, 0.0);
        let d = apply_anchor(Vec2::new(5.0, 1.0), anchor, at, 100, 100);
        let moved = move_point(at, d, anchor, 100, 100);
        assert_eq!(moved, Point2::new(5.0, 0.0));
    }

    #[test]
    fn layout_file_round_trip() {
        let c = catalog();
        let s = average_init(c.get(1).unwrap(), 100, 80).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.json");
        s.to_file().save(&path).unwrap();
        let back = LayoutFile::load(&path).unwrap().to_state(&c, 100, 80).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn layout_file_rejects_off_border_anchor() {
        let c = catalog();
        let f = LayoutFile {
            topology_id: 6,
            points: vec![[3.0, 10.0], [99.0, 10.0]],
        };
        assert!(f.to_state(&c, 100, 100).is_err());
    }

    fn arb_anchor() -> impl Strategy<Value = AnchorConstraint> {
        prop_oneof![
            Just(AnchorConstraint::Interior),
            Just(AnchorConstraint::Boundary(Side::Left)),
            Just(AnchorConstraint::Boundary(Side::Right)),
            Just(AnchorConstraint::Boundary(Side::Top)),
            Just(AnchorConstraint::Boundary(Side::Bottom)),
        ]
    }

    proptest! {
        #[test]
        fn apply_anchor_is_idempotent(
            dx in -10.0f64..10.0, dy in -10.0f64..10.0,
            x in 0.0f64..63.0, y in 0.0f64..47.0,
            snap_x in prop::option::of(prop::bool::ANY),
            snap_y in prop::option::of(prop::bool::ANY),
            anchor in arb_anchor(),
        ) {
            let (w, h) = (64, 48);
            let x = match snap_x { Some(true) => 63.0, Some(false) => 0.0, None => x };
            let y = match snap_y { Some(true) => 47.0, Some(false) => 0.0, None => y };
            let at = Point2::new(x, y);
            let once = apply_anchor(Vec2::new(dx, dy), anchor, at, w, h);
            let twice = apply_anchor(once, anchor, at, w, h);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn random_updates_keep_states_valid(
            id in 1u32..=11,
            w in 16usize..200, h in 16usize..200,
            steps in prop::collection::vec(prop::collection::vec((-40.0f64..40.0, -40.0f64..40.0), 8), 1..6),
        ) {
            let c = Catalog::default_catalog();
            let spec = c.get(id).unwrap();
            let mut s = average_init(spec, w, h).unwrap();
            prop_assert!(s.validate(w, h).is_ok());
            for step in steps {
                let deltas: Vec<Vec2> = (0..spec.num_conjunctions())
                    .map(|j| {
                        let (dx, dy) = step[j % step.len()];
                        apply_anchor(Vec2::new(dx, dy), spec.anchors[j], s.point(j), w, h)
                    })
                    .collect();
                s = s.displaced(&deltas, w, h);
                prop_assert!(s.validate(w, h).is_ok(), "{:?}", s.validate(w, h));
            }
        }
    }
}
