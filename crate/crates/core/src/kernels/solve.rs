//! Kernel columns: storage, residual bookkeeping, and sparse solves on finite regions.

use std::collections::HashMap;
use std::fmt::Write as _;

use num_complex::Complex64;

use super::KernelError;
use crate::kasteleyn::{edge_weight, KasteleynOperator};
use crate::lattice::{CutPath, Site};
use crate::linalg::iterative::cgnr;

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum KernelMethod {
    Integral,
    Solve,
    Reflection,
    /// finite-rank correction of a closed-form inverse along the cut
    Woodbury,
}

/// One column b ↦ K⁻¹(b, w).
#[derive(Debug, Clone)]
pub struct KernelColumn {
    pub source: Site,
    pub values: HashMap<Site, C>,
    pub method: KernelMethod,
    /// max |K·col − δ_w| over whites all of whose neighbours carry a value
    pub residual: f64,
}

/// Product of cut phases for the edge (w, b): e^{2πis} per crossing with b on the left.
pub fn edge_phase(cuts: &[(CutPath, f64)], w: Site, b: Site) -> C {
    cuts.iter().fold(C::new(1.0, 0.0), |acc, (cut, s)| {
        let (k, _) = cut.segment_crossings(w, b);
        acc * C::from_polar(1.0, 2.0 * std::f64::consts::PI * s * k as f64)
    })
}

impl KernelColumn {
    /// Tabulate a closed-form column on the given blacks; the residual is measured, not assumed.
    pub fn from_fn(source: Site, blacks: &[Site], method: KernelMethod, cuts: &[(CutPath, f64)], f: impl Fn(Site) -> C) -> Self {
        let values: HashMap<Site, C> = blacks.iter().map(|&b| (b, f(b))).collect();
        let mut col = KernelColumn { source, values, method, residual: 0.0 };
        col.residual = col.interior_residual(cuts, 1.0);
        col
    }

    pub fn get(&self, b: Site) -> Option<C> {
        self.values.get(&b).copied()
    }

    /// max over interior whites of |Σ_b χ K(w',b) col(b) − δ_{w'w}|, at the given mesh.
    pub fn interior_residual(&self, cuts: &[(CutPath, f64)], mesh: f64) -> f64 {
        let mut whites: Vec<Site> = self.values.keys().flat_map(|b| b.neighbors()).collect();
        whites.sort();
        whites.dedup();
        let mut worst: f64 = 0.0;
        for w in whites {
            let mut acc = if w == self.source { C::new(-1.0, 0.0) } else { C::new(0.0, 0.0) };
            let mut complete = true;
            for b in w.neighbors() {
                match self.values.get(&b) {
                    Some(v) => acc += edge_phase(cuts, w, b) * edge_weight(w, b) * mesh * v,
                    None => {
                        complete = false;
                        break;
                    }
                }
            }
            if complete {
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    /// CSV with columns b_re,b_im,value_re,value_im,reference_re,reference_im,deviation.
    pub fn to_csv(&self, reference: impl Fn(Site) -> C) -> String {
        let mut keys: Vec<&Site> = self.values.keys().collect();
        keys.sort();
        let mut out = String::from("b_re,b_im,value_re,value_im,reference_re,reference_im,deviation\n");
        for b in keys {
            let v = self.values[b];
            let r = reference(*b);
            let _ = writeln!(out, "{},{},{:e},{:e},{:e},{:e},{:e}", b.x, b.y, v.re, v.im, r.re, r.im, (v - r).norm());
        }
        out
    }
}

/// Prescribed values at blacks outside the solve region, with the cuts that twist boundary edges.
pub struct BoundaryData<'a> {
    pub values: &'a dyn Fn(Site) -> C,
    pub cuts: &'a [(CutPath, f64)],
}

/// Solve K x = δ_w on the operator's domain, moving boundary contributions to the right-hand side.
/// `k` must already carry the twist for edges inside the domain.
pub fn solve_kernel_column(k: &KasteleynOperator<f64>, w: Site, boundary: Option<&BoundaryData>) -> Result<KernelColumn, KernelError> {
    if k.block_size() != 1 {
        return Err(KernelError::Invalid("scalar operator expected".into()));
    }
    let dom = k.domain().clone();
    let wi = dom.white_index(w).ok_or_else(|| KernelError::Invalid(format!("{w:?} is not a white of the region")))?;
    if k.n_whites() != k.n_blacks() {
        return Err(KernelError::Invalid(format!("{} whites vs {} blacks", k.n_whites(), k.n_blacks())));
    }
    let mesh = dom.mesh();
    let mut rhs = vec![C::new(0.0, 0.0); k.n_whites()];
    rhs[wi] = C::new(1.0, 0.0);
    if let Some(bd) = boundary {
        for (i, &wj) in dom.whites().iter().enumerate() {
            for b in wj.neighbors() {
                if dom.black_index(b).is_none() {
                    rhs[i] -= edge_phase(bd.cuts, wj, b) * edge_weight(wj, b) * mesh * (bd.values)(b);
                }
            }
        }
    }
    let n = k.n_blacks();
    let out = cgnr(k, &rhs, None, 1e-13, 40 * n + 1000).map_err(|e| match e {
        crate::linalg::LinalgError::NoConvergence { residual, iterations } => {
            KernelError::NoConvergence(format!("relative residual {residual:e} after {iterations} iterations"))
        }
        other => KernelError::NoConvergence(other.to_string()),
    })?;
    if out.condition_estimate > 1e12 {
        return Err(KernelError::IllConditioned(out.condition_estimate));
    }
    if !out.x.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(KernelError::SingularSystem);
    }
    // residual of the interior equations, in absolute terms
    let mut kx = vec![C::new(0.0, 0.0); k.n_whites()];
    crate::linalg::iterative::LinearOperator::apply(k, &out.x, &mut kx);
    let residual = kx.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let values = dom.blacks().iter().copied().zip(out.x).collect();
    Ok(KernelColumn { source: w, values, method: KernelMethod::Solve, residual })
}
