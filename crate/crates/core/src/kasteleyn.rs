//! Kasteleyn operators on lattice domains, with scalar or SL₂ monodromy along cuts.
//!
//! Rows are whites, columns blacks. The untwisted entry for the edge (w, w+e) is δ·e.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::lattice::{CutPath, LatticeDomain, Site};
use crate::linalg::iterative::LinearOperator;
use crate::scalar::{Cx, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KasteleynError {
    #[error("cut from face {0:?} leaves the domain")]
    CutOutsideDomain(Site),
    #[error("segment {0:?}-{1:?} crosses the cut {2} times")]
    MultipleCrossings(Site, Site, usize),
    #[error("SL2 weight has determinant {0} (expected 1)")]
    NotUnimodular(Complex64),
}

/// Monodromy attached to one cut.
#[derive(Debug, Clone, PartialEq)]
pub enum Weight {
    /// e^{2πis}
    Scalar(Complex64),
    Sl2(Matrix2<Complex64>),
}

impl Weight {
    pub fn phase(s: f64) -> Self {
        Weight::Scalar(Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * s))
    }
    /// The unipotent matrix [[1, t], [0, 1]].
    pub fn upper_unipotent(t: f64) -> Self {
        Weight::Sl2(Matrix2::new(Complex64::one(), Complex64::new(t, 0.0), Complex64::zero(), Complex64::one()))
    }
    /// The unipotent matrix [[1, 0], [t, 1]].
    pub fn lower_unipotent(t: f64) -> Self {
        Weight::Sl2(Matrix2::new(Complex64::one(), Complex64::zero(), Complex64::new(t, 0.0), Complex64::one()))
    }
    pub fn diagonal_phase(s: f64) -> Self {
        let p = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * s);
        Weight::Sl2(Matrix2::new(p, Complex64::zero(), Complex64::zero(), p.inv()))
    }
    pub fn as_matrix(&self) -> Matrix2<Complex64> {
        match self {
            Weight::Scalar(z) => Matrix2::new(*z, Complex64::zero(), Complex64::zero(), *z),
            Weight::Sl2(m) => *m,
        }
    }
}

/// A list of cuts with their weights.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonodromyRep {
    pub cuts: Vec<(CutPath, Weight)>,
}

impl MonodromyRep {
    pub fn trivial() -> Self {
        Self::default()
    }
    pub fn scalar(cut: CutPath, s: f64) -> Self {
        MonodromyRep { cuts: vec![(cut, Weight::phase(s))] }
    }
    pub fn with(mut self, cut: CutPath, w: Weight) -> Self {
        self.cuts.push((cut, w));
        self
    }
    pub fn is_sl2(&self) -> bool {
        self.cuts.iter().any(|(_, w)| matches!(w, Weight::Sl2(_)))
    }
    pub fn punctures(&self) -> Vec<Site> {
        self.cuts.iter().map(|(c, _)| c.puncture).collect()
    }
    pub fn validate(&self) -> Result<(), KasteleynError> {
        for (_, w) in &self.cuts {
            let d = match w {
                Weight::Scalar(z) => Complex64::new(z.norm(), 0.0),
                Weight::Sl2(m) => m.determinant(),
            };
            if (d - 1.0).norm() > 1e-12 {
                return Err(KasteleynError::NotUnimodular(d));
            }
        }
        Ok(())
    }
}

/// χ for the segment u₁u₂: e^{2πis} if u₁ is right of the cut and u₂ left, e^{−2πis} in the
/// opposite case, 1 otherwise.
pub fn chi(s: f64, cut: &CutPath, u1: Site, u2: Site) -> Result<Complex64, KasteleynError> {
    let (signed, total) = cut.segment_crossings(u1, u2);
    if total > 1 {
        return Err(KasteleynError::MultipleCrossings(u1, u2, total));
    }
    Ok(Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * s * signed as f64))
}

/// Sparse Kasteleyn operator in compressed-row form with inline b×b blocks.
#[derive(Debug, Clone)]
pub struct KasteleynOperator<T: Real> {
    domain: Arc<LatticeDomain>,
    block: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    vals: Vec<Cx<T>>,
}

/// Untwisted weight e = b − w.
pub fn edge_weight(w: Site, b: Site) -> Complex64 {
    Complex64::new((b.x - w.x) as f64, (b.y - w.y) as f64)
}

pub fn assemble_k<T: Real>(domain: Arc<LatticeDomain>) -> KasteleynOperator<T> {
    let mesh = T::lit(domain.mesh());
    let mut row_ptr = vec![0];
    let mut col_idx = Vec::new();
    let mut vals = Vec::new();
    for &w in domain.whites() {
        for b in w.neighbors() {
            if let Some(j) = domain.black_index(b) {
                let e = edge_weight(w, b);
                col_idx.push(j as u32);
                vals.push(Cx::new(mesh * T::lit(e.re), mesh * T::lit(e.im)));
            }
        }
        row_ptr.push(col_idx.len());
    }
    KasteleynOperator { domain, block: 1, row_ptr, col_idx, vals }
}

fn to_t<T: Real>(z: Complex64) -> Cx<T> {
    Cx::new(T::lit(z.re), T::lit(z.im))
}

impl<T: Real> KasteleynOperator<T> {
    pub fn domain(&self) -> &Arc<LatticeDomain> {
        &self.domain
    }
    pub fn block_size(&self) -> usize {
        self.block
    }
    pub fn n_whites(&self) -> usize {
        self.row_ptr.len() - 1
    }
    pub fn n_blacks(&self) -> usize {
        self.domain.blacks().len()
    }
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Structural entries of a row as (black index, block values row-major).
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, &[Cx<T>])> {
        let bb = self.block * self.block;
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.col_idx[k] as usize, &self.vals[k * bb..(k + 1) * bb]))
    }

    /// Scalar entry K(w, b) (block (0,0) entry for SL₂ operators).
    pub fn entry(&self, w: Site, b: Site) -> Cx<T> {
        let (Some(i), Some(j)) = (self.domain.white_index(w), self.domain.black_index(b)) else {
            return Cx::zero();
        };
        self.row(i).find(|(c, _)| *c == j).map(|(_, v)| v[0]).unwrap_or_else(Cx::zero)
    }

    /// Twisted copy: entries of edges crossing cut i get ρ_i if b is left of the cut, ρ_i⁻¹ otherwise.
    pub fn twist(&self, rep: &MonodromyRep) -> Result<Self, KasteleynError> {
        rep.validate()?;
        let sl2 = rep.is_sl2();
        let mut factors: HashMap<(Site, Site), Matrix2<Complex64>> = HashMap::new();
        for (cut, weight) in &rep.cuts {
            if !self.domain.is_face(cut.puncture) {
                return Err(KasteleynError::CutOutsideDomain(cut.puncture));
            }
            let m = weight.as_matrix();
            let minv = m.try_inverse().ok_or(KasteleynError::NotUnimodular(Complex64::zero()))?;
            for c in cut.crossings() {
                if !(self.domain.contains(c.left) && self.domain.contains(c.right)) {
                    return Err(KasteleynError::CutOutsideDomain(cut.puncture));
                }
                let (w, b, f) = if c.left.is_black() { (c.right, c.left, m) } else { (c.left, c.right, minv) };
                let e = factors.entry((w, b)).or_insert_with(Matrix2::identity);
                *e *= f;
            }
        }
        let block = if sl2 { 2 } else { 1 };
        let mut out = KasteleynOperator {
            domain: self.domain.clone(),
            block,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            vals: Vec::with_capacity(self.col_idx.len() * block * block),
        };
        let bb0 = self.block * self.block;
        for i in 0..self.n_whites() {
            let w = self.domain.whites()[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let b = self.domain.blacks()[self.col_idx[k] as usize];
                let base = self.vals[k * bb0];
                let f = factors.get(&(w, b));
                if sl2 {
                    let m = f.copied().unwrap_or_else(Matrix2::identity);
                    for r in 0..2 {
                        for c in 0..2 {
                            out.vals.push(base * to_t::<T>(m[(r, c)]));
                        }
                    }
                } else {
                    let z = f.map(|m| m[(0, 0)]).unwrap_or_else(Complex64::one);
                    out.vals.push(base * to_t::<T>(z));
                }
            }
        }
        Ok(out)
    }

    /// Copy with a single entry's sign flipped (negative control for the harness).
    pub fn corrupted(&self, white_index: usize, slot: usize) -> Self {
        let mut out = self.clone();
        let bb = self.block * self.block;
        let k = self.row_ptr[white_index] + slot;
        for v in &mut out.vals[k * bb..(k + 1) * bb] {
            *v = -*v;
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<Cx<T>> {
        let bs = self.block;
        let mut m = DMatrix::zeros(self.n_whites() * bs, self.n_blacks() * bs);
        for i in 0..self.n_whites() {
            for (j, v) in self.row(i) {
                for r in 0..bs {
                    for c in 0..bs {
                        m[(i * bs + r, j * bs + c)] = v[r * bs + c];
                    }
                }
            }
        }
        m
    }

    /// Coordinate text: one `row col re im` line per stored scalar.
    pub fn to_coordinate_text(&self) -> String {
        let bs = self.block;
        let mut s = String::new();
        for i in 0..self.n_whites() {
            for (j, v) in self.row(i) {
                for r in 0..bs {
                    for c in 0..bs {
                        let z = v[r * bs + c];
                        let (re, im) = (z.re.to_f64().unwrap_or(f64::NAN), z.im.to_f64().unwrap_or(f64::NAN));
                        let _ = writeln!(s, "{} {} {:e} {:e}", i * bs + r, j * bs + c, re, im);
                    }
                }
            }
        }
        s
    }
}

impl<T: Real> LinearOperator<T> for KasteleynOperator<T> {
    fn nrows(&self) -> usize {
        self.n_whites() * self.block
    }
    fn ncols(&self) -> usize {
        self.n_blacks() * self.block
    }
    fn apply(&self, x: &[Cx<T>], y: &mut [Cx<T>]) {
        let bs = self.block;
        for i in 0..self.n_whites() {
            for r in 0..bs {
                let mut acc = Cx::zero();
                for (j, v) in self.row(i) {
                    for c in 0..bs {
                        acc += v[r * bs + c] * x[j * bs + c];
                    }
                }
                y[i * bs + r] = acc;
            }
        }
    }
    fn apply_adjoint(&self, x: &[Cx<T>], y: &mut [Cx<T>]) {
        let bs = self.block;
        y.iter_mut().for_each(|v| *v = Cx::zero());
        for i in 0..self.n_whites() {
            for (j, v) in self.row(i) {
                for r in 0..bs {
                    for c in 0..bs {
                        y[j * bs + c] += v[r * bs + c].conj() * x[i * bs + r];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_cut, CutTarget};
    use crate::linalg::dense::ComplexLu;

    fn block(w: i32, h: i32) -> Arc<LatticeDomain> {
        Arc::new(LatticeDomain::block(1.0, w, h, Site::new(0, 0)).unwrap())
    }

    #[test]
    fn entries_are_scaled_edge_vectors() {
        let d = Arc::new(LatticeDomain::block(0.25, 3, 3, Site::new(0, 0)).unwrap());
        let k = assemble_k::<f64>(d);
        let w = Site::new(1, 0);
        assert_eq!(k.entry(w, Site::new(2, 0)), Complex64::new(0.25, 0.0));
        assert_eq!(k.entry(w, Site::new(1, 1)), Complex64::new(0.0, 0.25));
        assert_eq!(k.entry(w, Site::new(0, 0)), Complex64::new(-0.25, 0.0));
        assert!(k.n_whites() > 0 && (0..k.n_whites()).all(|i| k.row(i).count() <= 4));
    }

    #[test]
    fn two_by_two_determinant_counts_matchings() {
        let k = assemble_k::<f64>(block(2, 2));
        let lu = ComplexLu::new(k.to_dense()).unwrap();
        assert!((lu.det().norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn twist_factors() {
        let d = Arc::new(LatticeDomain::build_halfplane_box(1.0, 5, 5).unwrap());
        let k = assemble_k::<f64>(d.clone());
        assert_eq!(k.twist(&MonodromyRep::trivial()).unwrap().to_dense(), k.to_dense());
        let cut = make_cut(&d, Site::new(0, 2), CutTarget::Boundary, &[]).unwrap();
        let s = 0.1;
        let ks = k.twist(&MonodromyRep::scalar(cut.clone(), s)).unwrap();
        let ph = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * s);
        for c in cut.crossings() {
            let (w, b) = if c.left.is_black() { (c.right, c.left) } else { (c.left, c.right) };
            let expect = if c.left.is_black() { ph } else { ph.inv() };
            assert!((ks.entry(w, b) - k.entry(w, b) * expect).norm() < 1e-15);
            assert!((chi(s, &cut, w, b).unwrap() - expect).norm() < 1e-15);
        }
        assert_eq!(chi(0.0, &cut, Site::new(-1, 1), Site::new(3, 1)).unwrap(), Complex64::one());
        assert_eq!(chi(s, &cut, Site::new(-1, 5), Site::new(3, 5)).unwrap(), Complex64::one());
    }

    #[test]
    fn chi_around_a_loop_telescopes() {
        let cut = CutPath::straight_down(Site::new(0, 0), 10);
        let s = 0.37;
        // lattice loop not enclosing the puncture face (0,0)
        let lp: Vec<Site> = vec![(2, -3), (5, -3), (5, -1), (-3, -1), (-3, -6), (2, -6)]
            .into_iter()
            .map(|(x, y)| Site::new(x, y))
            .collect();
        let mut prod = Complex64::one();
        for i in 0..lp.len() {
            prod *= chi(s, &cut, lp[i], lp[(i + 1) % lp.len()]).unwrap();
        }
        assert!((prod - 1.0).norm() < 1e-14);
        let far = CutPath::straight_down(Site::new(0, 0), 3);
        assert!(matches!(
            chi(s, &far, Site::new(-2, -1), Site::new(-2, -1)),
            Ok(z) if z == Complex64::one()
        ));
    }

    #[test]
    fn negative_s_is_eta_conjugate() {
        let d = Arc::new(LatticeDomain::build_halfplane_box(1.0, 5, 7).unwrap());
        let k = assemble_k::<f64>(d.clone());
        let cut = make_cut(&d, Site::new(1, 3), CutTarget::Boundary, &[]).unwrap();
        let kp = k.twist(&MonodromyRep::scalar(cut.clone(), 0.2)).unwrap();
        let km = k.twist(&MonodromyRep::scalar(cut, -0.2)).unwrap();
        for (w, b) in d.edges() {
            let g = crate::lattice::eta2(w) * crate::lattice::eta2(b);
            assert!((km.entry(w, b) - kp.entry(w, b).conj() * g).norm() < 1e-15);
        }
    }

    #[test]
    fn coordinate_export_lists_every_entry() {
        let k = assemble_k::<f32>(block(2, 4));
        assert_eq!(k.to_coordinate_text().lines().count(), k.nnz());
    }
}
