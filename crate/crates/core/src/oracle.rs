//! Ground truth on tiny domains by exhaustive enumeration of covers and ordered cover pairs.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use std::f64::consts::PI;

use crate::determinants::{laplace_transform_n, loop_weight_expectation, operator_determinant_ratio, unipotent_pair, DenseInverse, DeterminantError};
use crate::kasteleyn::{assemble_k, KasteleynOperator, MonodromyRep, Weight};
use crate::lattice::{make_cut, CutTarget, LatticeDomain, Site};
use crate::observables::p_polynomials;
use crate::linalg::exact::{bareiss_det, GaussInt};
use crate::sampler::{superimpose, DimerCover, DoubleDimerConfig};
use crate::scalar::ExactField;
use num_rational::BigRational;

/// Default hard cap on the number of vertices.
pub const VERTEX_CAP: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("domain has {0} vertices, above the enumeration cap {1}")]
    TooLarge(usize, usize),
    #[error("face {0:?} is not an interior face")]
    FaceOutsideDomain(Site),
    #[error("determinant evaluation failed: {0}")]
    Determinant(String),
}

#[derive(Debug, Clone)]
pub struct EnumerationTable {
    domain: Arc<LatticeDomain>,
    covers: Vec<DimerCover>,
    configs: Vec<DoubleDimerConfig>,
}

/// All covers by backtracking over whites in domain order, then every ordered pair superimposed.
pub fn enumerate_covers(domain: &Arc<LatticeDomain>) -> Result<EnumerationTable, OracleError> {
    enumerate_covers_capped(domain, VERTEX_CAP)
}

pub fn enumerate_covers_capped(domain: &Arc<LatticeDomain>, cap: usize) -> Result<EnumerationTable, OracleError> {
    let nv = domain.vertex_count();
    if nv > cap {
        return Err(OracleError::TooLarge(nv, cap));
    }
    let d = domain.as_ref();
    let nbrs: Vec<Vec<u32>> = d
        .whites()
        .iter()
        .map(|w| w.neighbors().iter().filter_map(|b| d.black_index(*b)).map(|j| j as u32).collect())
        .collect();
    let mut covers = Vec::new();
    if d.whites().len() == d.blacks().len() {
        let mut used = vec![false; d.blacks().len()];
        let mut partner = vec![0u32; d.whites().len()];
        backtrack(0, &nbrs, &mut used, &mut partner, &mut |p| covers.push(DimerCover::new(domain.clone(), p.to_vec())));
    }
    let configs = covers
        .par_iter()
        .flat_map_iter(|a| covers.iter().map(move |b| superimpose(a, b).expect("same domain")))
        .collect();
    Ok(EnumerationTable { domain: domain.clone(), covers, configs })
}

fn backtrack(i: usize, nbrs: &[Vec<u32>], used: &mut [bool], partner: &mut [u32], out: &mut impl FnMut(&[u32])) {
    if i == nbrs.len() {
        out(partner);
        return;
    }
    for &j in &nbrs[i] {
        if !used[j as usize] {
            used[j as usize] = true;
            partner[i] = j;
            backtrack(i + 1, nbrs, used, partner, out);
            used[j as usize] = false;
        }
    }
}

/// |det K| computed exactly over the Gaussian integers (unit mesh).
pub fn kasteleyn_count(domain: &LatticeDomain) -> u128 {
    let (ws, bs) = (domain.whites(), domain.blacks());
    if ws.len() != bs.len() {
        return 0;
    }
    let m: Vec<Vec<GaussInt>> = ws
        .iter()
        .map(|w| {
            bs.iter()
                .map(|b| {
                    let (dx, dy) = (b.x - w.x, b.y - w.y);
                    if dx.abs() + dy.abs() == 1 {
                        Complex::new(dx as i128, dy as i128)
                    } else {
                        Complex::new(0, 0)
                    }
                })
                .collect()
        })
        .collect();
    let det = bareiss_det(m);
    let n2 = det.re * det.re + det.im * det.im;
    (n2 as f64).sqrt().round() as u128
}

impl EnumerationTable {
    pub fn domain(&self) -> &Arc<LatticeDomain> {
        &self.domain
    }
    pub fn covers(&self) -> &[DimerCover] {
        &self.covers
    }
    /// Ordered pairs (D₁, D₂), each with probability 1/#covers².
    pub fn configs(&self) -> &[DoubleDimerConfig] {
        &self.configs
    }
    pub fn count(&self) -> usize {
        self.covers.len()
    }
}

/// Exact average of a statistic over all ordered cover pairs (orientations as induced by D₁, D₂).
pub fn exact_expectation<F: ExactField + Send + Sync>(
    table: &EnumerationTable,
    stat: impl Fn(&DoubleDimerConfig) -> F + Sync,
) -> F {
    let n = table.configs.len() as i64;
    // parallel map, sequential fold: the result does not depend on the thread count
    let vals: Vec<F> = table.configs.par_iter().map(&stat).collect();
    let sum = vals.into_iter().fold(F::zero(), |a, b| a + b);
    sum / F::from_i64(n.max(1))
}

/// Same average with each skeleton's orientations summed over all 2^{#loops} assignments.
pub fn exact_expectation_sign_sum<F: ExactField + Send + Sync>(
    table: &EnumerationTable,
    stat: impl Fn(&DoubleDimerConfig) -> F + Sync,
) -> F {
    let n = table.configs.len() as i64;
    let vals: Vec<F> = table
        .configs
        .par_iter()
        .map(|c| {
            let k = c.loops.len();
            assert!(k <= 16, "too many loops for sign enumeration");
            let mut inner = F::zero();
            for mask in 0..(1u32 << k) {
                let o: Vec<i8> = (0..k).map(|i| if mask >> i & 1 == 1 { 1 } else { -1 }).collect();
                inner = inner + stat(&c.with_orientations(&o));
            }
            inner / F::from_i64(1 << k)
        })
        .collect();
    let total = vals.into_iter().fold(F::zero(), |a, b| a + b);
    total / F::from_i64(n.max(1))
}

/// E ∏_γ cos(Σ_{i: γ surrounds x_i} t_i), the orientation-marginalized characteristic function.
pub fn exact_cos_product(table: &EnumerationTable, faces: &[Site], t: &[f64]) -> f64 {
    exact_expectation(table, |c| {
        let enc: Vec<Vec<usize>> = faces.iter().map(|&f| c.enclosing_loops(f)).collect();
        (0..c.loops.len())
            .map(|g| {
                let arg: f64 = enc.iter().zip(t).filter(|(e, _)| e.binary_search(&g).is_ok()).map(|(_, t)| t).sum();
                arg.cos()
            })
            .product::<f64>()
    })
}

/// One line of the identity report.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityCheck {
    pub name: String,
    pub max_dev: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<IdentityCheck>,
}

impl VerificationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }
    fn push(&mut self, name: impl Into<String>, dev: f64, tol: f64) {
        let name = name.into();
        match self.checks.iter_mut().find(|c| c.name == name) {
            Some(c) => {
                c.max_dev = c.max_dev.max(dev);
                c.pass = c.max_dev < tol;
            }
            None => self.checks.push(IdentityCheck { name, max_dev: dev, pass: dev < tol }),
        }
    }
}

/// Faces x, y and a horizontal offset ε; x, x+ε, y, y+ε must be faces of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PointSet {
    pub x: Site,
    pub y: Site,
    pub eps: i32,
}

impl PointSet {
    pub fn new(x: Site, y: Site, eps: i32) -> Self {
        PointSet { x, y, eps }
    }
}

pub const IDENTITY_TOLERANCE: f64 = 1e-8;

/// Small domains with two point sets each, used by the exact verification suite.
pub fn bundled_tiny_domains() -> Vec<(String, Arc<LatticeDomain>, Vec<PointSet>)> {
    let block = |w, h| Arc::new(LatticeDomain::block(1.0, w, h, Site::new(0, 0)).expect("valid block"));
    let square = [Site::new(0, 0), Site::new(4, 0), Site::new(4, 4), Site::new(0, 4)];
    let temperleyan = Arc::new(LatticeDomain::build_temperleyan(1.0, &square, Site::new(0, 0)).expect("valid polygon"));
    vec![
        ("block-4x4".into(), block(4, 4), vec![PointSet::new(Site::new(0, 1), Site::new(1, 2), 1), PointSet::new(Site::new(0, 0), Site::new(1, 1), 1)]),
        ("block-6x4".into(), block(6, 4), vec![PointSet::new(Site::new(1, 1), Site::new(3, 1), 1), PointSet::new(Site::new(0, 2), Site::new(2, 1), 2)]),
        ("temperleyan-4x4".into(), temperleyan, vec![PointSet::new(Site::new(1, 1), Site::new(2, 2), 1), PointSet::new(Site::new(0, 2), Site::new(2, 1), 1)]),
    ]
}

type Q = BigRational;

fn q(n: i64) -> Q {
    <Q as ExactField>::from_i64(n)
}

fn nest(c: &DoubleDimerConfig, faces: &[Site]) -> i64 {
    c.nesting_number(faces).expect("faces checked") as i64
}

fn qdev(a: &Q, b: &Q) -> f64 {
    (a.clone() - b.clone()).to_f64().abs()
}

/// E f(h(x₁), …, h(x_n)) with the orientations of the loops surrounding some x_i summed over
/// exactly; loops surrounding none of the faces do not enter.
fn height_sign_sum(table: &EnumerationTable, faces: &[Site], f: &(dyn Fn(&[i64]) -> i64 + Sync)) -> Q {
    let vals: Vec<Q> = table
        .configs
        .par_iter()
        .map(|c| {
            let enc: Vec<Vec<usize>> = faces.iter().map(|&x| c.enclosing_loops(x)).collect();
            let mut relevant: Vec<usize> = enc.iter().flatten().copied().collect();
            relevant.sort_unstable();
            relevant.dedup();
            let k = relevant.len();
            let mut sum = 0i64;
            let mut h = vec![0i64; faces.len()];
            for mask in 0..(1u64 << k) {
                for (hi, e) in h.iter_mut().zip(&enc) {
                    *hi = e.iter().map(|g| if mask >> relevant.binary_search(g).expect("relevant") & 1 == 1 { 1 } else { -1 }).sum();
                }
                sum += f(&h);
            }
            Q::new(sum.into(), (1i64 << k).into())
        })
        .collect();
    let n = q(table.configs.len() as i64);
    vals.into_iter().fold(q(0), |a, b| a + b) / n
}

/// Exact check of every height/nesting identity and every determinant formula on one domain.
pub fn verify_identities(domain: &Arc<LatticeDomain>, points: &[PointSet]) -> Result<VerificationReport, OracleError> {
    verify_identities_with(domain, points, &assemble_k::<f64>(domain.clone()))
}

/// As [`verify_identities`], with the full-determinant checks run on the given operator (the
/// negative control passes a corrupted one).
pub fn verify_identities_with(domain: &Arc<LatticeDomain>, points: &[PointSet], k: &KasteleynOperator<f64>) -> Result<VerificationReport, OracleError> {
    for p in points {
        for f in [p.x, p.y, p.x.offset(p.eps, 0), p.y.offset(p.eps, 0)] {
            if !domain.is_face(f) {
                return Err(OracleError::FaceOutsideDomain(f));
            }
        }
    }
    let table = enumerate_covers(domain)?;
    let mut report = VerificationReport { checks: Vec::new() };
    let count_dev = (table.count() as f64 - kasteleyn_count(domain) as f64).abs();
    report.push("cover count equals |det K|", count_dev, 0.5);
    let det_err = |e: DeterminantError| OracleError::Determinant(e.to_string());
    let inverse = DenseInverse::new(domain.clone()).map_err(det_err)?;
    let en = |f: &(dyn Fn(&DoubleDimerConfig) -> i64 + Sync)| exact_expectation(&table, |c| q(f(c)));
    let eh = |faces: &[Site], f: &(dyn Fn(&[i64]) -> i64 + Sync)| height_sign_sum(&table, faces, f);
    for p in points {
        let (x, y) = (p.x, p.y);
        let (xe, ye) = (x.offset(p.eps, 0), y.offset(p.eps, 0));
        for (a, b) in [(x, y), (x, x), (xe, y)] {
            let lhs = en(&|c| nest(c, &[a, b]));
            let rhs = eh(&[a, b], &|h| h[0] * h[1]);
            report.push("E N(x,y) = E h(x)h(y)", qdev(&lhs, &rhs), IDENTITY_TOLERANCE);
        }
        let h4 = eh(&[x], &|h| h[0].pow(4));
        let n_mom = en(&|c| 3 * nest(c, &[x]).pow(2) - 2 * nest(c, &[x]));
        report.push("E h(x)^4 = 3 E N(x)^2 - 2 E N(x)", qdev(&h4, &n_mom), IDENTITY_TOLERANCE);
        for xs in [[x, xe, y, ye], [x, x, y, ye], [x, y, y, y]] {
            let hh = eh(&xs, &|h| h.iter().product());
            let nn = en(&|c| {
                let [a, b, cc, d] = xs;
                nest(c, &[a, b]) * nest(c, &[cc, d]) + nest(c, &[a, cc]) * nest(c, &[b, d]) + nest(c, &[a, d]) * nest(c, &[b, cc]) - 2 * nest(c, &xs)
            });
            report.push("four-point height moment via nesting", qdev(&hh, &nn), IDENTITY_TOLERANCE);
        }
        // E ψ(a)ψ(b) − E φ(a)φ(b) with ψ from products of two heights, φ from nesting counts
        let field_pair = |a: [Site; 2], b: [Site; 2]| {
            let hh = eh(&[a[0], a[1], b[0], b[1]], &|h| h.iter().product());
            let ha = eh(&a, &|h| h[0] * h[1]);
            let hb = eh(&b, &|h| h[0] * h[1]);
            let nn = en(&|c| nest(c, &a) * nest(c, &b));
            let na = en(&|c| nest(c, &a));
            let nb = en(&|c| nest(c, &b));
            (hh - ha * hb) - (nn - na * nb)
        };
        let polys = |k: usize| {
            exact_expectation(&table, |c| {
                let pp = p_polynomials(c, x, y, p.eps).expect("faces checked");
                q([pp.p, pp.p_eps_xy, pp.p_eps_eps][k].round() as i64)
            })
        };
        report.push("psi-psi minus phi-phi equals E P", qdev(&field_pair([x, x], [y, y]), &polys(0)), IDENTITY_TOLERANCE);
        report.push("psi-psi_eps minus phi-phi_eps equals E P_eps", qdev(&field_pair([x, x], [y, ye]), &polys(1)), IDENTITY_TOLERANCE);
        report.push("psi_eps-psi_eps minus phi_eps-phi_eps equals E P_eps_eps", qdev(&field_pair([x, xe], [y, ye]), &polys(2)), IDENTITY_TOLERANCE);

        let t = 0.7;
        let product = exact_cos_product(&table, &[x], &[t]);
        let signed = exact_expectation_sign_sum(&table, |c| (t * c.height_at(x) as f64).cos());
        report.push("cosine product form equals orientation sum", (product - signed).abs(), IDENTITY_TOLERANCE);

        let lx = make_cut(domain, x, CutTarget::Boundary, &[]).map_err(|e| OracleError::Determinant(e.to_string()))?;
        let ly = make_cut(domain, y, CutTarget::Boundary, &[lx.clone()]).map_err(|e| OracleError::Determinant(e.to_string()))?;
        let (s1, s2) = (0.07, 0.19);
        let rep = MonodromyRep::trivial().with(lx.clone(), Weight::diagonal_phase(s1)).with(ly.clone(), Weight::diagonal_phase(s2));
        let det = operator_determinant_ratio(k, &rep).map_err(det_err)?;
        let exact = exact_cos_product(&table, &[x, y], &[2.0 * PI * s1, 2.0 * PI * s2]);
        report.push("det K_rho / det K^2 equals E prod Tr rho/2", (det - exact).norm(), IDENTITY_TOLERANCE);
        for tt in [0.3f64, 1.0] {
            let exact = exact_expectation(&table, |c| (1.0 + tt * tt / 2.0).powi(nest(c, &[x, y]) as i32));
            let rep = unipotent_pair(&lx, &ly, tt);
            let full = operator_determinant_ratio(k, &rep).map_err(det_err)?;
            report.push("det K_rho / det K^2 equals E prod Tr rho/2", (full - exact).norm(), IDENTITY_TOLERANCE);
            let cut = loop_weight_expectation(&inverse, &rep).map_err(det_err)?;
            report.push("unipotent pair determinant equals E((2+t^2)/2)^N(x,y)", (cut - exact).norm(), IDENTITY_TOLERANCE);
        }
        for s in [0.05, 0.2] {
            let exact = exact_expectation(&table, |c| (2.0 * PI * s).cos().powi(nest(c, &[x]) as i32));
            let v = laplace_transform_n(&inverse, &lx, s).map_err(det_err)?;
            report.push("monodromy determinant equals E cos(2 pi s)^N(x)", (v.value - exact).abs() + v.imag_residue.abs(), IDENTITY_TOLERANCE);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(w: i32, h: i32) -> Arc<LatticeDomain> {
        Arc::new(LatticeDomain::block(1.0, w, h, Site::new(0, 0)).unwrap())
    }

    #[test]
    fn block_counts_match_determinant() {
        for (w, h, n) in [(2, 2, 2), (2, 4, 5), (4, 4, 36)] {
            let d = block(w, h);
            let t = enumerate_covers(&d).unwrap();
            assert_eq!(t.count(), n);
            assert_eq!(kasteleyn_count(&d), n as u128);
        }
    }

    #[test]
    fn temperleyan_counts_are_spanning_tree_counts() {
        // 2x2, 3x2 and 3x3 grids have 4, 15 and 192 spanning trees
        for (a, b, n) in [(2, 2, 4), (4, 2, 15), (4, 4, 192)] {
            let poly = [Site::new(0, 0), Site::new(a, 0), Site::new(a, b), Site::new(0, b)];
            let d = Arc::new(LatticeDomain::build_temperleyan(1.0, &poly, Site::new(0, 0)).unwrap());
            assert_eq!(enumerate_covers(&d).unwrap().count(), n);
            assert_eq!(kasteleyn_count(&d), n as u128);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let d = block(7, 6);
        assert_eq!(enumerate_covers(&d).unwrap_err(), OracleError::TooLarge(42, 40));
    }
}
