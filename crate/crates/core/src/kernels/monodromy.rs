//! Inverses of scalar-twisted full-plane operators by a finite-rank correction supported on the
//! crossed edges: K_ρ = K + Σ_k c_k e_{w_k} e_{b_k}ᵀ, so
//! K_ρ⁻¹ = K⁻¹ − K⁻¹ A (C⁻¹ + B K⁻¹ A)⁻¹ B K⁻¹.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::KernelError;
use crate::kasteleyn::edge_weight;
use crate::lattice::{CutPath, Site};
use crate::linalg::dense::ComplexLu;

/// A base inverse kernel K⁻¹(b, w).
pub type BaseKernel = fn(Site, Site) -> Complex64;

pub struct CutResolvent {
    base: BaseKernel,
    whites: Vec<Site>,
    blacks: Vec<Site>,
    lu: Option<ComplexLu<f64>>,
}

impl CutResolvent {
    /// Scalar monodromy e^{2πi s_k} on each cut (edges get the phase when b is left of the cut).
    pub fn new(base: BaseKernel, cuts: &[(CutPath, f64)]) -> Result<Self, KernelError> {
        let mut whites = Vec::new();
        let mut blacks = Vec::new();
        let mut coef = Vec::new();
        for (cut, s) in cuts {
            for c in cut.crossings() {
                let (w, b, sign) = if c.left.is_black() { (c.right, c.left, 1.0) } else { (c.left, c.right, -1.0) };
                let phase = Complex64::from_polar(1.0, 2.0 * PI * s * sign);
                let ck = (phase - 1.0) * edge_weight(w, b);
                if let Some(k) = whites.iter().zip(&blacks).position(|(&ww, &bb)| ww == w && bb == b) {
                    // an edge crossed twice accumulates both phases
                    let prev: Complex64 = coef[k];
                    let total = (prev / edge_weight(w, b) + 1.0) * phase;
                    coef[k] = (total - 1.0) * edge_weight(w, b);
                } else {
                    whites.push(w);
                    blacks.push(b);
                    coef.push(ck);
                }
            }
        }
        // untwisted edges (phase 1) carry no correction
        let keep: Vec<usize> = (0..whites.len()).filter(|&k| coef[k].norm() > 1e-300).collect();
        let whites: Vec<Site> = keep.iter().map(|&k| whites[k]).collect();
        let blacks: Vec<Site> = keep.iter().map(|&k| blacks[k]).collect();
        let coef: Vec<Complex64> = keep.iter().map(|&k| coef[k]).collect();
        let m = whites.len();
        let rows: Vec<Vec<Complex64>> = (0..m).into_par_iter().map(|j| (0..m).map(|k| base(blacks[j], whites[k])).collect()).collect();
        let mut mat = DMatrix::from_fn(m, m, |j, k| rows[j][k]);
        for k in 0..m {
            mat[(k, k)] += coef[k].inv();
        }
        let lu = if m == 0 { None } else { Some(ComplexLu::new(mat).map_err(|_| KernelError::SingularSystem)?) };
        Ok(CutResolvent { base, whites, blacks, lu })
    }

    pub fn rank(&self) -> usize {
        self.whites.len()
    }

    /// Column w of K_ρ⁻¹, evaluated lazily at any black.
    pub fn column(&self, w: Site) -> ResolventColumn<'_> {
        let rhs: Vec<Complex64> = self.blacks.iter().map(|&b| (self.base)(b, w)).collect();
        let y = self.lu.as_ref().map(|lu| lu.solve(&rhs)).unwrap_or_default();
        ResolventColumn { owner: self, w, y }
    }

    pub fn eval(&self, b: Site, w: Site) -> Complex64 {
        self.column(w).at(b)
    }
}

pub struct ResolventColumn<'a> {
    owner: &'a CutResolvent,
    w: Site,
    y: Vec<Complex64>,
}

impl ResolventColumn<'_> {
    pub fn source(&self) -> Site {
        self.w
    }
    pub fn at(&self, b: Site) -> Complex64 {
        let o = self.owner;
        let corr: Complex64 = o.whites.iter().zip(&self.y).map(|(&wk, &yk)| (o.base)(b, wk) * yk).sum();
        (o.base)(b, self.w) - corr
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kasteleyn::chi;
    use crate::kernels::fullplane_kinv;

    #[test]
    fn twisted_inverse_satisfies_twisted_equation() {
        let v = Site::new(-1, 5);
        let vb = Site::new(-1, -6);
        let cut = CutPath::between_faces(v, vb);
        let s = 0.13;
        let r = CutResolvent::new(fullplane_kinv, &[(cut.clone(), s)]).unwrap();
        assert_eq!(r.rank(), 11);
        let w0 = Site::new(2, 1);
        let col = r.column(w0);
        for x in -8..=8 {
            for y in -9..=9 {
                let w = Site::new(x, y);
                if w.is_black() {
                    continue;
                }
                let sum: Complex64 = w
                    .neighbors()
                    .iter()
                    .map(|&b| chi(s, &cut, w, b).unwrap() * edge_weight(w, b) * col.at(b))
                    .sum();
                let target = if w == w0 { 1.0 } else { 0.0 };
                assert!((sum - target).norm() < 1e-11, "{w:?}: {sum}");
            }
        }
    }
}
