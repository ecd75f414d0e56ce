//! Geometry of the square lattice δZ²: colouring, the η gauge, Temperleyan domains,
//! half-plane truncations, faces, and dual cut paths.
//!
//! Vertices are integer pairs; the physical position is `δ·(x, y)`. The origin is black,
//! so a site is black iff `x + y` is even. Faces are unit squares named by their
//! lower-left corner.

use std::collections::HashSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatticeError {
    #[error("polygon is not simple")]
    NonSimplePolygon,
    #[error("polygon is not an axis-parallel closed path on one black sublattice of the doubled lattice: {0}")]
    InvalidPolygon(String),
    #[error("root {0:?} is not on the polygon")]
    RootNotOnBoundary(Site),
    #[error("root {0:?} is not a black vertex")]
    RootWrongColor(Site),
    #[error("box of half-width {half_width} and height {height} is degenerate")]
    DegenerateBox { half_width: i32, height: i32 },
    #[error("face {0:?} is not an interior face of the domain")]
    FaceNotInterior(Site),
    #[error("cut from face {0:?} collides with an existing cut")]
    CutCollision(Site),
    #[error("malformed domain description: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub x: i32,
    pub y: i32,
}

impl Site {
    pub const fn new(x: i32, y: i32) -> Self {
        Site { x, y }
    }
    pub fn is_black(self) -> bool {
        (self.x + self.y).rem_euclid(2) == 0
    }
    pub fn color(self) -> Color {
        if self.is_black() {
            Color::Black
        } else {
            Color::White
        }
    }
    /// Black sublattice tag: Γ holds (even, even), Γ† holds (odd, odd).
    pub fn sublattice(self) -> Option<Sublattice> {
        match (self.x.rem_euclid(2), self.y.rem_euclid(2)) {
            (0, 0) => Some(Sublattice::Gamma),
            (1, 1) => Some(Sublattice::GammaDagger),
            _ => None,
        }
    }
    pub fn z(self) -> Complex64 {
        Complex64::new(self.x as f64, self.y as f64)
    }
    pub fn conj(self) -> Site {
        Site::new(self.x, -self.y)
    }
    pub fn offset(self, dx: i32, dy: i32) -> Site {
        Site::new(self.x + dx, self.y + dy)
    }
    /// The four lattice neighbours, in the order +1, +i, −1, −i.
    pub fn neighbors(self) -> [Site; 4] {
        DIRS.map(|(dx, dy)| self.offset(dx, dy))
    }
}

/// Unit steps in the order +1, +i, −1, −i.
pub const DIRS: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Color {
    Black,
    White,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sublattice {
    Gamma,
    GammaDagger,
}

/// η_u = 1 if Im u is even, −i if odd.
pub fn eta(u: Site) -> Complex64 {
    if u.y.rem_euclid(2) == 0 {
        Complex64::new(1.0, 0.0)
    } else {
        Complex64::new(0.0, -1.0)
    }
}

/// η_u² as a real sign.
pub fn eta2(u: Site) -> f64 {
    if u.y.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Face with lower-left corner `f`; its centre is `f + (1+i)/2`.
pub fn face_center(f: Site) -> Complex64 {
    Complex64::new(f.x as f64 + 0.5, f.y as f64 + 0.5)
}

/// Face containing a point given in lattice units; points on grid lines go to the lower/left face.
pub fn face_containing_lattice_point(px: f64, py: f64) -> Site {
    fn snap(q: f64) -> i32 {
        let r = q.round();
        if (q - r).abs() < 1e-9 {
            r as i32 - 1
        } else {
            q.floor() as i32
        }
    }
    Site::new(snap(px), snap(py))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainKind {
    /// Polygon on the doubled lattice with one boundary black removed.
    Temperleyan,
    /// Temperleyan box whose bottom side sits on the first row above the real axis.
    HalfPlaneBox,
    /// Plain rectangular grid graph (no root), used for small test blocks.
    Block,
}

/// A finite bicoloured subgraph of δZ².
#[derive(Debug, Clone)]
pub struct LatticeDomain {
    mesh: f64,
    kind: DomainKind,
    x0: i32,
    y0: i32,
    w: i32,
    h: i32,
    member: Vec<bool>,
    blacks: Vec<Site>,
    whites: Vec<Site>,
    black_idx: Vec<u32>,
    white_idx: Vec<u32>,
    boundary: Vec<Site>,
    root: Option<Site>,
    polygon: Option<Vec<Site>>,
    tree_sublattice: Option<Sublattice>,
    faces: Vec<Site>,
    face_mask: Vec<bool>,
}

const NONE: u32 = u32::MAX;

impl LatticeDomain {
    fn from_member_sites(
        mesh: f64,
        kind: DomainKind,
        sites: &[Site],
        boundary: Vec<Site>,
        root: Option<Site>,
        polygon: Option<Vec<Site>>,
        tree_sublattice: Option<Sublattice>,
    ) -> Self {
        let x0 = sites.iter().map(|s| s.x).min().unwrap_or(0) - 1;
        let y0 = sites.iter().map(|s| s.y).min().unwrap_or(0) - 1;
        let x1 = sites.iter().map(|s| s.x).max().unwrap_or(0) + 1;
        let y1 = sites.iter().map(|s| s.y).max().unwrap_or(0) + 1;
        let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
        let n = (w * h) as usize;
        let mut member = vec![false; n];
        for s in sites {
            member[((s.y - y0) * w + (s.x - x0)) as usize] = true;
        }
        let mut blacks = Vec::new();
        let mut whites = Vec::new();
        let mut black_idx = vec![NONE; n];
        let mut white_idx = vec![NONE; n];
        for y in y0..=y1 {
            for x in x0..=x1 {
                let k = ((y - y0) * w + (x - x0)) as usize;
                if !member[k] {
                    continue;
                }
                let s = Site::new(x, y);
                if s.is_black() {
                    black_idx[k] = blacks.len() as u32;
                    blacks.push(s);
                } else {
                    white_idx[k] = whites.len() as u32;
                    whites.push(s);
                }
            }
        }
        let mut d = LatticeDomain {
            mesh,
            kind,
            x0,
            y0,
            w,
            h,
            member,
            blacks,
            whites,
            black_idx,
            white_idx,
            boundary,
            root,
            polygon,
            tree_sublattice,
            faces: Vec::new(),
            face_mask: vec![false; n],
        };
        let mut faces = Vec::new();
        for y in y0..y1 {
            for x in x0..x1 {
                let f = Site::new(x, y);
                if d.contains(f) && d.contains(f.offset(1, 0)) && d.contains(f.offset(0, 1)) && d.contains(f.offset(1, 1)) {
                    faces.push(f);
                    let k = d.grid(f).unwrap();
                    d.face_mask[k] = true;
                }
            }
        }
        d.faces = faces;
        d
    }

    /// Temperleyan domain from a polygon on one black sublattice of 2δZ² (corner list) and a root.
    pub fn build_temperleyan(mesh: f64, polygon: &[Site], root: Site) -> Result<Self, LatticeError> {
        Self::build_temperleyan_kind(mesh, polygon, root, DomainKind::Temperleyan)
    }

    fn build_temperleyan_kind(mesh: f64, polygon: &[Site], root: Site, kind: DomainKind) -> Result<Self, LatticeError> {
        if !(mesh > 0.0) {
            return Err(LatticeError::Malformed("mesh must be positive".into()));
        }
        let path = expand_polygon(polygon)?;
        let sub = polygon[0].sublattice().ok_or_else(|| LatticeError::InvalidPolygon("corner is not black".into()))?;
        if !root.is_black() {
            return Err(LatticeError::RootWrongColor(root));
        }
        let on_boundary: HashSet<Site> = path.iter().copied().collect();
        if !on_boundary.contains(&root) {
            return Err(LatticeError::RootNotOnBoundary(root));
        }
        let mut sites = rasterize(polygon, &on_boundary);
        let before_black = sites.iter().filter(|s| s.is_black()).count();
        let before_white = sites.len() - before_black;
        if before_black != before_white + 1 {
            return Err(LatticeError::InvalidPolygon(format!(
                "Temperleyan count violated: {before_black} blacks, {before_white} whites"
            )));
        }
        sites.retain(|s| *s != root);
        let mut boundary: Vec<Site> = path.into_iter().filter(|s| *s != root).collect();
        boundary.sort();
        boundary.dedup();
        Ok(Self::from_member_sites(mesh, kind, &sites, boundary, Some(root), Some(polygon.to_vec()), Some(sub)))
    }

    /// Temperleyan truncation of the upper half-plane: columns |x| ≤ a, rows 1..=t with a, t odd,
    /// `a` the smallest odd integer ≥ `half_width` and `t` the smallest odd integer ≥ `height`.
    /// The bottom side lies on the first row above the real axis; the root is the bottom-row black
    /// nearest to the midpoint, ties going to the smaller real part.
    pub fn build_halfplane_box(mesh: f64, half_width: i32, height: i32) -> Result<Self, LatticeError> {
        if half_width < 2 || height < 2 {
            return Err(LatticeError::DegenerateBox { half_width, height });
        }
        let a = half_width | 1;
        let t = height | 1;
        let t = t.max(3);
        let polygon = vec![Site::new(-a, 1), Site::new(a, 1), Site::new(a, t), Site::new(-a, t)];
        let root = Site::new(-1, 1);
        Self::build_temperleyan_kind(mesh, &polygon, root, DomainKind::HalfPlaneBox)
    }

    /// Rectangular grid graph with `width × height` vertices and lower-left corner at `origin`.
    pub fn block(mesh: f64, width: i32, height: i32, origin: Site) -> Result<Self, LatticeError> {
        if width < 1 || height < 1 {
            return Err(LatticeError::DegenerateBox { half_width: width, height });
        }
        let mut sites = Vec::new();
        for y in 0..height {
            for x in 0..width {
                sites.push(origin.offset(x, y));
            }
        }
        let boundary = sites
            .iter()
            .copied()
            .filter(|s| s.x == origin.x || s.y == origin.y || s.x == origin.x + width - 1 || s.y == origin.y + height - 1)
            .collect();
        Ok(Self::from_member_sites(mesh, DomainKind::Block, &sites, boundary, None, None, None))
    }

    /// Arbitrary vertex set (no root), boundary = vertices with fewer than four in-set neighbours.
    pub fn from_sites(mesh: f64, sites: &[Site]) -> Self {
        let set: HashSet<Site> = sites.iter().copied().collect();
        let boundary = sites.iter().copied().filter(|s| s.neighbors().iter().any(|n| !set.contains(n))).collect();
        Self::from_member_sites(mesh, DomainKind::Block, sites, boundary, None, None, None)
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }
    pub fn kind(&self) -> DomainKind {
        self.kind
    }
    pub fn root(&self) -> Option<Site> {
        self.root
    }
    pub fn polygon(&self) -> Option<&[Site]> {
        self.polygon.as_deref()
    }
    /// Black sublattice carrying the primal spanning tree (Temperleyan domains only).
    pub fn tree_sublattice(&self) -> Option<Sublattice> {
        self.tree_sublattice
    }
    pub fn blacks(&self) -> &[Site] {
        &self.blacks
    }
    pub fn whites(&self) -> &[Site] {
        &self.whites
    }
    pub fn boundary(&self) -> &[Site] {
        &self.boundary
    }
    pub fn faces(&self) -> &[Site] {
        &self.faces
    }
    pub fn vertex_count(&self) -> usize {
        self.blacks.len() + self.whites.len()
    }
    /// Bounding box (x0, y0, width, height) of the internal grid, including a one-site margin.
    pub fn grid_box(&self) -> (i32, i32, i32, i32) {
        (self.x0, self.y0, self.w, self.h)
    }

    pub fn grid(&self, s: Site) -> Option<usize> {
        let (dx, dy) = (s.x - self.x0, s.y - self.y0);
        if dx < 0 || dy < 0 || dx >= self.w || dy >= self.h {
            None
        } else {
            Some((dy * self.w + dx) as usize)
        }
    }

    pub fn contains(&self, s: Site) -> bool {
        self.grid(s).map(|k| self.member[k]).unwrap_or(false)
    }

    pub fn is_face(&self, f: Site) -> bool {
        self.grid(f).map(|k| self.face_mask[k]).unwrap_or(false)
    }

    pub fn black_index(&self, s: Site) -> Option<usize> {
        self.grid(s).and_then(|k| (self.black_idx[k] != NONE).then(|| self.black_idx[k] as usize))
    }

    pub fn white_index(&self, s: Site) -> Option<usize> {
        self.grid(s).and_then(|k| (self.white_idx[k] != NONE).then(|| self.white_idx[k] as usize))
    }

    /// Edges of the domain as (white, black) pairs.
    pub fn edges(&self) -> Vec<(Site, Site)> {
        let mut e = Vec::new();
        for &w in &self.whites {
            for b in w.neighbors() {
                if self.contains(b) {
                    e.push((w, b));
                }
            }
        }
        e
    }

    /// Face containing a point given in macroscopic units.
    pub fn face_at(&self, p: Complex64) -> Site {
        face_containing_lattice_point(p.re / self.mesh, p.im / self.mesh)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let dto = DomainDto {
            mesh: self.mesh,
            kind: self.kind,
            root: self.root,
            polygon: self.polygon.clone(),
            blacks: self.blacks.clone(),
            whites: self.whites.clone(),
        };
        serde_json::to_value(dto).expect("serializable")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, LatticeError> {
        let dto: DomainDto = serde_json::from_value(v.clone()).map_err(|e| LatticeError::Malformed(e.to_string()))?;
        match (dto.kind, &dto.polygon, dto.root) {
            (DomainKind::Temperleyan | DomainKind::HalfPlaneBox, Some(p), Some(r)) => {
                Self::build_temperleyan_kind(dto.mesh, p, r, dto.kind)
            }
            _ => {
                let mut sites = dto.blacks.clone();
                sites.extend(dto.whites.iter().copied());
                let mut d = Self::from_sites(dto.mesh, &sites);
                d.kind = dto.kind;
                Ok(d)
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DomainDto {
    mesh: f64,
    kind: DomainKind,
    root: Option<Site>,
    polygon: Option<Vec<Site>>,
    blacks: Vec<Site>,
    whites: Vec<Site>,
}

/// Expands a corner list into the closed sequence of doubled-lattice vertices along the polygon
/// (every lattice site on it, blacks and white midpoints), checking simplicity.
fn expand_polygon(corners: &[Site]) -> Result<Vec<Site>, LatticeError> {
    if corners.len() < 4 {
        return Err(LatticeError::InvalidPolygon("need at least four corners".into()));
    }
    let sub = corners[0].sublattice().ok_or_else(|| LatticeError::InvalidPolygon("corner is not black".into()))?;
    if corners.iter().any(|c| c.sublattice() != Some(sub)) {
        return Err(LatticeError::InvalidPolygon("corners on different sublattices".into()));
    }
    let mut doubled = Vec::new();
    for i in 0..corners.len() {
        let (a, b) = (corners[i], corners[(i + 1) % corners.len()]);
        if a.x != b.x && a.y != b.y {
            return Err(LatticeError::InvalidPolygon(format!("segment {a:?}-{b:?} is not axis-parallel")));
        }
        if a == b {
            return Err(LatticeError::InvalidPolygon("repeated corner".into()));
        }
        let (dx, dy) = ((b.x - a.x).signum(), (b.y - a.y).signum());
        let mut p = a;
        while p != b {
            p = p.offset(2 * dx, 2 * dy);
            doubled.push(p);
        }
    }
    let mut seen = HashSet::new();
    for p in &doubled {
        if !seen.insert(*p) {
            return Err(LatticeError::NonSimplePolygon);
        }
    }
    let mut path = Vec::with_capacity(doubled.len() * 2);
    for i in 0..doubled.len() {
        let (a, b) = (doubled[i], doubled[(i + 1) % doubled.len()]);
        path.push(a);
        path.push(Site::new((a.x + b.x) / 2, (a.y + b.y) / 2));
    }
    Ok(path)
}

/// Lattice sites inside or on a rectilinear polygon.
fn rasterize(corners: &[Site], on_boundary: &HashSet<Site>) -> Vec<Site> {
    let ymin = corners.iter().map(|c| c.y).min().unwrap();
    let ymax = corners.iter().map(|c| c.y).max().unwrap();
    let n = corners.len();
    let mut out = Vec::new();
    for y in ymin..=ymax {
        let mut xs: Vec<i32> = Vec::new();
        for i in 0..n {
            let (a, b) = (corners[i], corners[(i + 1) % n]);
            if a.x == b.x {
                let (lo, hi) = (a.y.min(b.y), a.y.max(b.y));
                if lo <= y && y < hi {
                    xs.push(a.x);
                }
            }
        }
        xs.sort();
        for pair in xs.chunks(2) {
            if pair.len() == 2 {
                for x in pair[0]..=pair[1] {
                    out.push(Site::new(x, y));
                }
            }
        }
        let row_boundary: Vec<Site> = on_boundary.iter().copied().filter(|s| s.y == y).collect();
        out.extend(row_boundary);
    }
    out.sort();
    out.dedup();
    out
}

/// An oriented step between two adjacent faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DualEdge {
    pub from: Site,
    pub to: Site,
}

impl DualEdge {
    /// The primal edge crossed by this dual edge, as (left vertex, right vertex) relative to the
    /// direction of travel.
    pub fn left_right(&self) -> (Site, Site) {
        let d = (self.to.x - self.from.x, self.to.y - self.from.y);
        let n = (-d.1, d.0);
        // face centre = from + (1/2, 1/2); crossing midpoint = centre + d/2; endpoints ± n/2.
        let twice_mid = (2 * self.from.x + 1 + d.0, 2 * self.from.y + 1 + d.1);
        let left = Site::new((twice_mid.0 + n.0) / 2, (twice_mid.1 + n.1) / 2);
        let right = Site::new((twice_mid.0 - n.0) / 2, (twice_mid.1 - n.1) / 2);
        (left, right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutTarget {
    Boundary,
    Face(Site),
}

/// Route policy for a cut ending on the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CutRoute {
    /// Straight down (default).
    Down,
    /// `k` steps sideways (negative = west) then down; used to test route independence.
    SidewaysThenDown(i32),
}

/// A simple path of dual edges from a puncture face to the boundary or to a second face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutPath {
    pub puncture: Site,
    pub target: CutTarget,
    pub edges: Vec<DualEdge>,
}

/// A primal edge crossed by a cut, with the left/right vertices of the crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crossing {
    pub left: Site,
    pub right: Site,
}

impl CutPath {
    /// Path through the given face sequence (consecutive faces must be adjacent).
    pub fn through(faces: &[Site], target: CutTarget) -> Self {
        let edges = faces.windows(2).map(|p| DualEdge { from: p[0], to: p[1] }).collect();
        CutPath { puncture: faces[0], target, edges }
    }

    /// Straight vertical (then horizontal) dual path between two faces without reference to a domain.
    pub fn between_faces(a: Site, b: Site) -> Self {
        let mut faces = vec![a];
        let mut cur = a;
        while cur.y != b.y {
            cur = cur.offset(0, (b.y - cur.y).signum());
            faces.push(cur);
        }
        while cur.x != b.x {
            cur = cur.offset((b.x - cur.x).signum(), 0);
            faces.push(cur);
        }
        Self::through(&faces, CutTarget::Face(b))
    }

    /// Straight down from `a` through `depth` dual edges.
    pub fn straight_down(a: Site, depth: usize) -> Self {
        let faces: Vec<Site> = (0..=depth as i32).map(|k| a.offset(0, -k)).collect();
        Self::through(&faces, CutTarget::Boundary)
    }

    pub fn dual_vertices(&self) -> Vec<Site> {
        let mut v = vec![self.puncture];
        v.extend(self.edges.iter().map(|e| e.to));
        v
    }

    pub fn crossings(&self) -> Vec<Crossing> {
        self.edges
            .iter()
            .map(|e| {
                let (left, right) = e.left_right();
                Crossing { left, right }
            })
            .collect()
    }

    /// Side of a crossed edge: +1 if `b` is on the left, −1 if on the right, 0 if the edge is not crossed.
    pub fn edge_side(&self, w: Site, b: Site) -> i32 {
        for c in self.crossings() {
            if c.left == b && c.right == w {
                return 1;
            }
            if c.right == b && c.left == w {
                return -1;
            }
        }
        0
    }

    /// Signed number of crossings of the segment u1→u2 with this cut: +1 per crossing from right
    /// to left, −1 per crossing from left to right. Returns (signed, total).
    pub fn segment_crossings(&self, u1: Site, u2: Site) -> (i32, usize) {
        let (a, b) = ((2 * u1.x as i64, 2 * u1.y as i64), (2 * u2.x as i64, 2 * u2.y as i64));
        let mut signed = 0;
        let mut total = 0;
        for e in &self.edges {
            let c1 = (2 * e.from.x as i64 + 1, 2 * e.from.y as i64 + 1);
            let c2 = (2 * e.to.x as i64 + 1, 2 * e.to.y as i64 + 1);
            let o1 = perturbed_orient(a, b, c1);
            let o2 = perturbed_orient(a, b, c2);
            if o1 == o2 {
                continue;
            }
            let s1 = orient(c1, c2, a).signum();
            let s2 = orient(c1, c2, b).signum();
            if s1 == s2 || s1 == 0 || s2 == 0 {
                continue;
            }
            total += 1;
            // u1 right of the dual edge (negative orientation) and u2 left: positive crossing.
            signed += if s1 < 0 { 1 } else { -1 };
        }
        (signed, total)
    }
}

fn orient(a: (i64, i64), b: (i64, i64), c: (i64, i64)) -> i64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

/// Sign of orient(a, b, c + (ε, ε²)) for infinitesimal ε > 0.
fn perturbed_orient(a: (i64, i64), b: (i64, i64), c: (i64, i64)) -> i64 {
    let o = orient(a, b, c);
    if o != 0 {
        return o.signum();
    }
    let d1 = -(b.1 - a.1);
    if d1 != 0 {
        return d1.signum();
    }
    (b.0 - a.0).signum()
}

/// Deterministic cut from an interior face: to the boundary (straight down, or the requested
/// sideways route) or to a second face (vertical then horizontal). Cuts in `existing` are avoided
/// by shifting one column east (then west) just above the collision.
pub fn make_cut(
    domain: &LatticeDomain,
    puncture: Site,
    target: CutTarget,
    existing: &[CutPath],
) -> Result<CutPath, LatticeError> {
    make_cut_routed(domain, puncture, target, CutRoute::Down, existing)
}

pub fn make_cut_routed(
    domain: &LatticeDomain,
    puncture: Site,
    target: CutTarget,
    route: CutRoute,
    existing: &[CutPath],
) -> Result<CutPath, LatticeError> {
    if !domain.is_face(puncture) {
        return Err(LatticeError::FaceNotInterior(puncture));
    }
    let used: HashSet<Site> = existing.iter().flat_map(|c| c.dual_vertices()).collect();
    if used.contains(&puncture) {
        return Err(LatticeError::CutCollision(puncture));
    }
    let crosses_domain_edge = |f: Site, g: Site| {
        let (l, r) = DualEdge { from: f, to: g }.left_right();
        domain.contains(l) && domain.contains(r)
    };
    match target {
        CutTarget::Face(t) => {
            if !domain.is_face(t) {
                return Err(LatticeError::FaceNotInterior(t));
            }
            let c = CutPath::between_faces(puncture, t);
            if c.dual_vertices().iter().any(|v| used.contains(v)) {
                return Err(LatticeError::CutCollision(puncture));
            }
            Ok(c)
        }
        CutTarget::Boundary => {
            let mut faces = vec![puncture];
            let mut cur = puncture;
            if let CutRoute::SidewaysThenDown(k) = route {
                for _ in 0..k.unsigned_abs() {
                    let next = cur.offset(k.signum(), 0);
                    if used.contains(&next) {
                        return Err(LatticeError::CutCollision(puncture));
                    }
                    if !crosses_domain_edge(cur, next) {
                        return Ok(CutPath::through(&faces, CutTarget::Boundary));
                    }
                    faces.push(next);
                    cur = next;
                }
            }
            let mut shifted = false;
            loop {
                let mut next = cur.offset(0, -1);
                if used.contains(&next) {
                    if shifted {
                        return Err(LatticeError::CutCollision(puncture));
                    }
                    let mut moved = false;
                    for dx in [1, -1] {
                        let side = cur.offset(dx, 0);
                        let below = side.offset(0, -1);
                        if !used.contains(&side) && !used.contains(&below) && domain.is_face(side) {
                            faces.push(side);
                            cur = side;
                            next = below;
                            moved = true;
                            break;
                        }
                    }
                    if !moved {
                        return Err(LatticeError::CutCollision(puncture));
                    }
                    shifted = true;
                }
                if !crosses_domain_edge(cur, next) {
                    break;
                }
                faces.push(next);
                cur = next;
                if faces.len() > (domain.grid_box().3 as usize + 4) * 4 {
                    return Err(LatticeError::CutCollision(puncture));
                }
            }
            Ok(CutPath::through(&faces, CutTarget::Boundary))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(side: i32) -> Vec<Site> {
        vec![Site::new(0, 0), Site::new(side, 0), Site::new(side, side), Site::new(0, side)]
    }

    #[test]
    fn smallest_polygon_balances_colours() {
        let d = LatticeDomain::build_temperleyan(1.0, &square(2), Site::new(0, 0)).unwrap();
        assert_eq!(d.blacks().len(), d.whites().len());
        assert_eq!(d.vertex_count(), 8);
    }

    #[test]
    fn self_intersecting_polygon_rejected() {
        let bowtie = vec![
            Site::new(0, 0),
            Site::new(4, 0),
            Site::new(4, 2),
            Site::new(2, 2),
            Site::new(2, -2),
            Site::new(0, -2),
        ];
        // closes back across the first segment
        assert_eq!(LatticeDomain::build_temperleyan(1.0, &bowtie, Site::new(0, 0)).unwrap_err(), LatticeError::NonSimplePolygon);
    }

    #[test]
    fn root_validation() {
        assert_eq!(
            LatticeDomain::build_temperleyan(1.0, &square(4), Site::new(1, 0)).unwrap_err(),
            LatticeError::RootWrongColor(Site::new(1, 0))
        );
        assert_eq!(
            LatticeDomain::build_temperleyan(1.0, &square(4), Site::new(2, 2)).unwrap_err(),
            LatticeError::RootNotOnBoundary(Site::new(2, 2))
        );
    }

    #[test]
    fn halfplane_box_geometry() {
        let d = LatticeDomain::build_halfplane_box(1.0, 4, 4).unwrap();
        assert!(d.is_face(face_containing_lattice_point(2.0, 2.0)));
        assert!(d.contains(Site::new(0, 1)) && !d.contains(Site::new(0, 0)));
        assert_eq!(d.blacks().len(), d.whites().len());
        assert_eq!(d.kind(), DomainKind::HalfPlaneBox);
        assert_eq!(
            LatticeDomain::build_halfplane_box(1.0, 1, 1).unwrap_err(),
            LatticeError::DegenerateBox { half_width: 1, height: 1 }
        );
    }

    #[test]
    fn eta_values() {
        assert_eq!(eta(Site::new(3, 4)), Complex64::new(1.0, 0.0));
        assert_eq!(eta(Site::new(3, -1)), Complex64::new(0.0, -1.0));
        for y in -3..4 {
            let e = eta(Site::new(0, y));
            assert!((e.powi(4) - 1.0).norm() < 1e-15);
        }
    }

    #[test]
    fn down_cut_reaches_real_axis() {
        let d = LatticeDomain::build_halfplane_box(1.0, 9, 9).unwrap();
        let f = Site::new(0, 4);
        let c = make_cut(&d, f, CutTarget::Boundary, &[]).unwrap();
        assert_eq!(c.edges.len(), 4);
        assert_eq!(c.edges.last().unwrap().to, Site::new(0, 0));
        assert!(!d.is_face(Site::new(0, 0)));
        for x in c.crossings() {
            assert!(d.contains(x.left) && d.contains(x.right));
            assert_eq!(x.left.x, x.right.x + 1);
        }
    }

    #[test]
    fn same_column_cuts_are_offset() {
        let d = LatticeDomain::build_halfplane_box(1.0, 9, 9).unwrap();
        let low = make_cut(&d, Site::new(0, 2), CutTarget::Boundary, &[]).unwrap();
        let high = make_cut(&d, Site::new(0, 6), CutTarget::Boundary, &[low.clone()]).unwrap();
        let a: HashSet<Site> = low.dual_vertices().into_iter().collect();
        assert!(high.dual_vertices().iter().all(|v| !a.contains(v)));
        let thin = LatticeDomain::build_temperleyan(1.0, &[Site::new(0, 0), Site::new(2, 0), Site::new(2, 8), Site::new(0, 8)], Site::new(0, 0)).unwrap();
        let l = make_cut(&thin, Site::new(0, 1), CutTarget::Boundary, &[]).unwrap();
        let r = make_cut(&thin, Site::new(1, 3), CutTarget::Boundary, &[l.clone()]).unwrap();
        assert_eq!(make_cut(&thin, Site::new(0, 5), CutTarget::Boundary, &[l, r]).unwrap_err(), LatticeError::CutCollision(Site::new(0, 5)));
    }

    #[test]
    fn crossing_count_matches_hand_count() {
        let c = CutPath::straight_down(Site::new(0, 0), 5);
        // horizontal segment from (-2,-3) to (3,-3) crosses the cut once, right to left
        assert_eq!(c.segment_crossings(Site::new(-2, -3), Site::new(3, -3)), (1, 1));
        assert_eq!(c.segment_crossings(Site::new(3, -3), Site::new(-2, -3)), (-1, 1));
        // above the puncture: no crossing
        assert_eq!(c.segment_crossings(Site::new(-2, 2), Site::new(3, 2)), (0, 0));
        // segments through a face centre on the cut still count once
        assert_eq!(c.segment_crossings(Site::new(-1, -2), Site::new(2, -1)).1, 1);
        // a vertical segment west of the cut never crosses
        assert_eq!(c.segment_crossings(Site::new(0, -4), Site::new(0, 2)), (0, 0));
    }

    #[test]
    fn json_roundtrip() {
        let d = LatticeDomain::build_halfplane_box(0.5, 3, 3).unwrap();
        let back = LatticeDomain::from_json(&d.to_json()).unwrap();
        assert_eq!(back.blacks(), d.blacks());
        assert_eq!(back.root(), d.root());
    }
}
