use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use super::{DimerCover, SamplerError};
use crate::lattice::{LatticeDomain, Site};

/// An oriented double-dimer loop. Vertices are listed in traversal order, starting at a white;
/// D₁ dimers are traversed black → white.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Loop {
    pub vertices: Vec<Site>,
    /// +1 counterclockwise, −1 clockwise.
    pub orientation: i8,
}

impl Loop {
    /// Contribution to the height inside the loop: +1 per crossing from left to right, so −1 for
    /// a counterclockwise loop.
    pub fn sign(&self) -> i32 {
        -(self.orientation as i32)
    }
    pub fn len(&self) -> usize {
        self.vertices.len()
    }
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// Horizontal loop edge in one column: edge from (x, y) to (x+1, y), traversed in direction `dir` (±1 in x).
#[derive(Debug, Clone, Copy)]
struct ColumnEdge {
    y: i32,
    loop_id: u32,
    dir: i8,
}

#[derive(Debug, Clone)]
pub struct DoubleDimerConfig {
    domain: Arc<LatticeDomain>,
    pub loops: Vec<Loop>,
    /// Doubled edges as (white, black).
    pub doubled_edges: Vec<(Site, Site)>,
    columns: HashMap<i32, Vec<ColumnEdge>>,
}

pub fn superimpose(d1: &DimerCover, d2: &DimerCover) -> Result<DoubleDimerConfig, SamplerError> {
    if !Arc::ptr_eq(d1.domain(), d2.domain()) && d1.domain().blacks() != d2.domain().blacks() {
        return Err(SamplerError::DomainMismatch);
    }
    let dom = d1.domain().clone();
    let nw = dom.whites().len();
    if d1.partners().len() != nw || d2.partners().len() != nw {
        return Err(SamplerError::DomainMismatch);
    }
    let mut inv1 = vec![0u32; dom.blacks().len()];
    for (i, &j) in d1.partners().iter().enumerate() {
        inv1[j as usize] = i as u32;
    }
    let mut seen = vec![false; nw];
    let mut loops = Vec::new();
    let mut doubled = Vec::new();
    for start in 0..nw {
        if seen[start] {
            continue;
        }
        if d1.partners()[start] == d2.partners()[start] {
            seen[start] = true;
            doubled.push((dom.whites()[start], dom.blacks()[d1.partners()[start] as usize]));
            continue;
        }
        let mut verts = Vec::new();
        let mut i = start;
        loop {
            seen[i] = true;
            verts.push(dom.whites()[i]);
            let b = d2.partners()[i] as usize;
            verts.push(dom.blacks()[b]);
            i = inv1[b] as usize;
            if i == start {
                break;
            }
        }
        let area2: i64 = (0..verts.len())
            .map(|k| {
                let (p, q) = (verts[k], verts[(k + 1) % verts.len()]);
                p.x as i64 * q.y as i64 - q.x as i64 * p.y as i64
            })
            .sum();
        loops.push(Loop { vertices: verts, orientation: if area2 > 0 { 1 } else { -1 } });
    }
    Ok(DoubleDimerConfig::from_parts(dom, loops, doubled))
}

impl DoubleDimerConfig {
    fn from_parts(domain: Arc<LatticeDomain>, loops: Vec<Loop>, doubled_edges: Vec<(Site, Site)>) -> Self {
        let mut columns: HashMap<i32, Vec<ColumnEdge>> = HashMap::new();
        for (id, l) in loops.iter().enumerate() {
            let n = l.vertices.len();
            for k in 0..n {
                let (p, q) = (l.vertices[k], l.vertices[(k + 1) % n]);
                if p.y == q.y {
                    let x = p.x.min(q.x);
                    columns.entry(x).or_default().push(ColumnEdge { y: p.y, loop_id: id as u32, dir: (q.x - p.x) as i8 });
                }
            }
        }
        for v in columns.values_mut() {
            v.sort_by_key(|e| e.y);
        }
        DoubleDimerConfig { domain, loops, doubled_edges, columns }
    }

    pub fn domain(&self) -> &Arc<LatticeDomain> {
        &self.domain
    }

    /// Same skeleton with loop orientations replaced by `orientations` (±1 each).
    pub fn with_orientations(&self, orientations: &[i8]) -> Self {
        let loops = self
            .loops
            .iter()
            .zip(orientations)
            .map(|(l, &o)| {
                if o == l.orientation {
                    l.clone()
                } else {
                    let mut v = l.vertices.clone();
                    v.reverse();
                    Loop { vertices: v, orientation: o }
                }
            })
            .collect();
        Self::from_parts(self.domain.clone(), loops, self.doubled_edges.clone())
    }

    /// Independent fair orientation for every loop.
    pub fn resample_orientations<R: Rng>(&self, rng: &mut R) -> Self {
        let o: Vec<i8> = self.loops.iter().map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        self.with_orientations(&o)
    }

    fn check_face(&self, f: Site) -> Result<(), SamplerError> {
        if self.domain.is_face(f) {
            Ok(())
        } else {
            Err(SamplerError::FaceOutsideDomain(f))
        }
    }

    /// Indices of the loops surrounding face `f` (any face of the plane).
    pub fn enclosing_loops(&self, f: Site) -> Vec<usize> {
        let mut parity: HashMap<u32, bool> = HashMap::new();
        if let Some(col) = self.columns.get(&f.x) {
            for e in col.iter().take_while(|e| e.y <= f.y) {
                let p = parity.entry(e.loop_id).or_insert(false);
                *p = !*p;
            }
        }
        let mut ids: Vec<usize> = parity.into_iter().filter(|(_, odd)| *odd).map(|(id, _)| id as usize).collect();
        ids.sort();
        ids
    }

    /// Number of loops surrounding every listed face.
    pub fn nesting_number(&self, faces: &[Site]) -> Result<usize, SamplerError> {
        for &f in faces {
            self.check_face(f)?;
        }
        let Some((&first, rest)) = faces.split_first() else {
            return Ok(0);
        };
        let mut common = self.enclosing_loops(first);
        for &f in rest {
            let e = self.enclosing_loops(f);
            common.retain(|id| e.binary_search(id).is_ok());
        }
        Ok(common.len())
    }

    /// Height at a face: +1 for each loop edge crossed left to right on the way up from below.
    pub fn height_at(&self, f: Site) -> i32 {
        self.columns
            .get(&f.x)
            .map(|col| col.iter().take_while(|e| e.y <= f.y).map(|e| -(e.dir as i32)).sum())
            .unwrap_or(0)
    }

    /// Height and nesting over the domain's face bounding box, computed by column sweeps.
    pub fn height(&self) -> HeightField {
        let (x0, y0, w, h) = self.domain.grid_box();
        let mut values = vec![0i32; (w * h) as usize];
        let mut nesting = vec![0u32; (w * h) as usize];
        for x in x0..x0 + w {
            let Some(col) = self.columns.get(&x) else { continue };
            let mut k = 0;
            let (mut hv, mut nv) = (0i32, 0i32);
            for y in y0..y0 + h {
                while k < col.len() && col[k].y <= y {
                    let e = col[k];
                    hv -= e.dir as i32;
                    nv += e.dir as i32 * self.loops[e.loop_id as usize].orientation as i32;
                    k += 1;
                }
                let idx = ((y - y0) * w + (x - x0)) as usize;
                values[idx] = hv;
                nesting[idx] = nv as u32;
            }
        }
        HeightField { x0, y0, w, h, values, nesting }
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Dto<'a> {
            loops: &'a [Loop],
            doubled_edges: &'a [(Site, Site)],
        }
        serde_json::to_value(Dto { loops: &self.loops, doubled_edges: &self.doubled_edges }).expect("serializable")
    }
}

/// Face-indexed height h and nesting count N over a rectangular window of faces.
#[derive(Debug, Clone)]
pub struct HeightField {
    pub x0: i32,
    pub y0: i32,
    pub w: i32,
    pub h: i32,
    values: Vec<i32>,
    nesting: Vec<u32>,
}

impl HeightField {
    fn index(&self, f: Site) -> Option<usize> {
        let (dx, dy) = (f.x - self.x0, f.y - self.y0);
        (dx >= 0 && dy >= 0 && dx < self.w && dy < self.h).then(|| (dy * self.w + dx) as usize)
    }
    /// Height at a face (0 outside the window).
    pub fn get(&self, f: Site) -> i32 {
        self.index(f).map(|k| self.values[k]).unwrap_or(0)
    }
    /// Number of loops surrounding a face.
    pub fn nesting(&self, f: Site) -> u32 {
        self.index(f).map(|k| self.nesting[k]).unwrap_or(0)
    }
    pub fn values(&self) -> &[i32] {
        &self.values
    }

    /// CSV grid, one row of faces per line, bottom row first.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for y in 0..self.h {
            let row: Vec<String> = (0..self.w).map(|x| self.values[(y * self.w + x) as usize].to_string()).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}
