//! Loop statistics from determinants of K_ρ K⁻¹ restricted to whites next to the cuts.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::kasteleyn::{assemble_k, edge_weight, KasteleynError, KasteleynOperator, MonodromyRep, Weight};
use crate::kernels::halfplane_kinv;
use crate::lattice::{CutPath, LatticeDomain, LatticeError, Site};
use crate::linalg::dense::{det_or_zero, ComplexLu};
use crate::linalg::fit::even_polynomial_fit;

type C = Complex64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DeterminantError {
    #[error("Kasteleyn matrix is singular")]
    SingularK,
    #[error("polynomial fit is ill-conditioned (condition {0:e})")]
    FitIllConditioned(f64),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Kasteleyn(#[from] KasteleynError),
}

/// K_Id⁻¹(b, w) at unit mesh.
pub trait InverseKernel: Sync {
    fn kinv(&self, b: Site, w: Site) -> C;
}

/// Upper half-plane {y ≥ 1} via the reflection formula.
pub struct HalfPlane;

impl InverseKernel for HalfPlane {
    fn kinv(&self, b: Site, w: Site) -> C {
        halfplane_kinv(b, w)
    }
}

/// Finite domain: columns of K⁻¹ from one dense LU, computed on demand and cached.
pub struct DenseInverse {
    domain: Arc<LatticeDomain>,
    lu: ComplexLu<f64>,
    columns: Mutex<HashMap<Site, Arc<Vec<C>>>>,
}

impl DenseInverse {
    pub fn new(domain: Arc<LatticeDomain>) -> Result<Self, DeterminantError> {
        let k = assemble_k::<f64>(domain.clone()).to_dense();
        if k.nrows() != k.ncols() || k.nrows() == 0 {
            return Err(DeterminantError::SingularK);
        }
        let lu = ComplexLu::new(k).map_err(|_| DeterminantError::SingularK)?;
        Ok(DenseInverse { domain, lu, columns: Mutex::new(HashMap::new()) })
    }

    pub fn domain(&self) -> &Arc<LatticeDomain> {
        &self.domain
    }

    fn column(&self, w: Site) -> Option<Arc<Vec<C>>> {
        let i = self.domain.white_index(w)?;
        if let Some(c) = self.columns.lock().expect("column cache").get(&w) {
            return Some(c.clone());
        }
        let mut e = vec![C::new(0.0, 0.0); self.lu.dim()];
        e[i] = C::new(1.0, 0.0);
        let col = Arc::new(self.lu.solve(&e));
        self.columns.lock().expect("column cache").insert(w, col.clone());
        Some(col)
    }
}

impl InverseKernel for DenseInverse {
    fn kinv(&self, b: Site, w: Site) -> C {
        match (self.domain.black_index(b), self.column(w)) {
            // the dense K carries the mesh; undo it
            (Some(j), Some(col)) => col[j] * self.domain.mesh(),
            _ => C::new(0.0, 0.0),
        }
    }
}

/// L_ρ = K_ρ K⁻¹ restricted to the whites adjacent to the cuts.
#[derive(Debug, Clone)]
pub struct CutSupportedMatrix {
    pub whites: Vec<Site>,
    pub block: usize,
    pub matrix: DMatrix<C>,
}

impl CutSupportedMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
    pub fn det(&self) -> C {
        if self.dim() == 0 {
            return C::new(1.0, 0.0);
        }
        det_or_zero(self.matrix.clone())
    }
}

/// Crossed edges (w, b) with their accumulated twist factor, in first-crossing order.
fn crossed_edges(rep: &MonodromyRep) -> Result<Vec<(Site, Site, Matrix2<C>)>, DeterminantError> {
    rep.validate()?;
    let mut order = Vec::new();
    let mut factors: HashMap<(Site, Site), Matrix2<C>> = HashMap::new();
    for (cut, weight) in &rep.cuts {
        let m = weight.as_matrix();
        let minv = m.try_inverse().ok_or_else(|| DeterminantError::Invalid("weight not invertible".into()))?;
        for c in cut.crossings() {
            let (w, b, f) = if c.left.is_black() { (c.right, c.left, m) } else { (c.left, c.right, minv) };
            let e = factors.entry((w, b)).or_insert_with(|| {
                order.push((w, b));
                Matrix2::identity()
            });
            *e *= f;
        }
    }
    Ok(order.into_iter().map(|(w, b)| (w, b, factors[&(w, b)])).collect())
}

pub fn cut_supported_matrix(kinv: &dyn InverseKernel, rep: &MonodromyRep) -> Result<CutSupportedMatrix, DeterminantError> {
    let edges = crossed_edges(rep)?;
    let block = if rep.is_sl2() { 2 } else { 1 };
    let mut whites: Vec<Site> = Vec::new();
    for (w, _, _) in &edges {
        if !whites.contains(w) {
            whites.push(*w);
        }
    }
    let n = whites.len();
    let idx: HashMap<Site, usize> = whites.iter().enumerate().map(|(i, w)| (*w, i)).collect();
    let mut m = DMatrix::<C>::identity(n * block, n * block);
    for (w, b, f) in &edges {
        let i = idx[w];
        let d = f - Matrix2::identity();
        let kw = edge_weight(*w, *b);
        for (j, u) in whites.iter().enumerate() {
            let g = kw * kinv.kinv(*b, *u);
            if block == 1 {
                m[(i, j)] += g * d[(0, 0)];
            } else {
                for r in 0..2 {
                    for c in 0..2 {
                        m[(2 * i + r, 2 * j + c)] += g * d[(r, c)];
                    }
                }
            }
        }
    }
    Ok(CutSupportedMatrix { whites, block, matrix: m })
}

/// det(K_ρ K⁻¹) on the cut-supported subspace. For SL₂ weights this is the double-dimer
/// average E ∏_γ Tr ρ(γ)/2; for scalar weights it is a single-dimer average.
pub fn loop_weight_expectation(kinv: &dyn InverseKernel, rep: &MonodromyRep) -> Result<C, DeterminantError> {
    Ok(cut_supported_matrix(kinv, rep)?.det())
}

/// det(K_ρ)/det(K)^block from the full dense matrices (small domains only).
pub fn full_determinant_ratio(domain: &Arc<LatticeDomain>, rep: &MonodromyRep) -> Result<C, DeterminantError> {
    operator_determinant_ratio(&assemble_k::<f64>(domain.clone()), rep)
}

/// Same ratio for a given (possibly modified) operator.
pub fn operator_determinant_ratio(k: &KasteleynOperator<f64>, rep: &MonodromyRep) -> Result<C, DeterminantError> {
    let kr = k.twist(rep)?;
    let d0 = det_or_zero(k.to_dense());
    if d0.norm() == 0.0 {
        return Err(DeterminantError::SingularK);
    }
    let d1 = det_or_zero(kr.to_dense());
    Ok(d1 / d0.powi(kr.block_size() as i32))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LaplaceValue {
    pub s: f64,
    pub value: f64,
    pub imag_residue: f64,
}

/// E (cos 2πs)^{N(v)} = det(K_s K⁻¹)·det(K_{−s} K⁻¹) for the cut from v.
pub fn laplace_transform_n(kinv: &dyn InverseKernel, cut: &CutPath, s: f64) -> Result<LaplaceValue, DeterminantError> {
    if !(0.0..=0.25).contains(&s) {
        return Err(DeterminantError::Invalid(format!("s = {s} outside [0, 1/4]")));
    }
    let plus = loop_weight_expectation(kinv, &MonodromyRep::scalar(cut.clone(), s))?;
    let minus = loop_weight_expectation(kinv, &MonodromyRep::scalar(cut.clone(), -s))?;
    let v = plus * minus;
    Ok(LaplaceValue { s, value: v.re, imag_residue: v.im })
}

/// Cut from a face of the upper half-plane straight down to the real axis.
pub fn halfplane_cut(face: Site) -> Result<CutPath, DeterminantError> {
    if face.y < 1 {
        return Err(DeterminantError::Invalid(format!("face {face:?} is not above the first row")));
    }
    Ok(CutPath::straight_down(face, face.y as usize))
}

/// The unipotent pair ρ_{t1} = [[1,t],[0,1]] on l₁ and ρ_{t2} = [[1,0],[t,1]] on l₂.
pub fn unipotent_pair(l1: &CutPath, l2: &CutPath, t: f64) -> MonodromyRep {
    MonodromyRep::trivial().with(l1.clone(), Weight::upper_unipotent(t)).with(l2.clone(), Weight::lower_unipotent(t))
}

/// t = 0.1·k, k = 1..=j+3.
pub fn default_t_grid(j: usize) -> Vec<f64> {
    (1..=j + 3).map(|k| 0.1 * k as f64).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentEstimate {
    pub j: usize,
    /// E C(N, m) for m = 0..=j
    pub binomial: Vec<f64>,
    /// E N^j
    pub raw: f64,
    pub fit_condition: f64,
}

/// Stirling numbers of the second kind S(n, k) for k = 0..=n.
fn stirling2(n: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for i in 1..=n {
        let mut next = vec![0.0; i + 1];
        for k in 1..=i {
            let a = if k < row.len() { k as f64 * row[k] } else { 0.0 };
            next[k] = a + row[k - 1];
        }
        row = next;
    }
    row
}

/// E C(N,m) → E N^j through E N^j = Σ_m S(j,m)·m!·E C(N,m).
pub fn raw_moment_from_binomial(binomial: &[f64], j: usize) -> f64 {
    let s = stirling2(j);
    let mut fact = 1.0;
    let mut acc = 0.0;
    for m in 0..=j {
        if m > 0 {
            fact *= m as f64;
        }
        acc += s[m] * fact * binomial.get(m).copied().unwrap_or(0.0);
    }
    acc
}

/// E N(x,y)^j from an even-polynomial fit of det(K_ρt K⁻¹) = E((2+t²)/2)^N in t; the t^{2m}
/// coefficient is E C(N,m)/2^m.
pub fn moments_via_unipotent(kinv: &dyn InverseKernel, l1: &CutPath, l2: &CutPath, j: usize, t_grid: &[f64]) -> Result<MomentEstimate, DeterminantError> {
    if j == 0 || j > 4 {
        return Err(DeterminantError::Invalid(format!("moment order {j} outside 1..=4")));
    }
    let degree = 2 * j + 2;
    if t_grid.len() < degree / 2 + 1 {
        return Err(DeterminantError::Invalid("t grid too short for the fit".into()));
    }
    let mut vals = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        vals.push(loop_weight_expectation(kinv, &unipotent_pair(l1, l2, t))?.re);
    }
    let (coef, cond) = even_polynomial_fit(t_grid, &vals, degree);
    if !(cond < 1e10) {
        return Err(DeterminantError::FitIllConditioned(cond));
    }
    let binomial: Vec<f64> = (0..=j).map(|m| coef[m] * 2f64.powi(m as i32)).collect();
    let raw = raw_moment_from_binomial(&binomial, j);
    Ok(MomentEstimate { j, binomial, raw, fit_condition: cond })
}

/// Cross-check of E N(x,y) by a central second difference of the determinant at t = 0.
pub fn first_moment_by_difference(kinv: &dyn InverseKernel, l1: &CutPath, l2: &CutPath, h: f64) -> Result<f64, DeterminantError> {
    let d = |t: f64| loop_weight_expectation(kinv, &unipotent_pair(l1, l2, t)).map(|z| z.re);
    Ok((d(h)? - 2.0 * d(0.0)? + d(-h)?) / (h * h))
}

/// d(bw)* = K(w,b) if b is left of the path, −K(w,b) otherwise (unit mesh).
pub fn dual_edge_weights(cut: &CutPath) -> Vec<(Site, Site, C)> {
    cut.crossings()
        .into_iter()
        .map(|c| if c.left.is_black() { (c.left, c.right, edge_weight(c.right, c.left)) } else { (c.right, c.left, -edge_weight(c.left, c.right)) })
        .collect()
}

/// E[h₁(x₁)···h₁(x_n)] for the centred single-dimer height, as the sum over edges of the paths of
/// det[K⁻¹(b_i,w_j)·1(i≠j)]·∏ d(b_iw_i)*. Paths must be edge-disjoint.
pub fn single_height_moment(kinv: &dyn InverseKernel, paths: &[CutPath]) -> C {
    let edges: Vec<Vec<(Site, Site, C)>> = paths.iter().map(dual_edge_weights).collect();
    let n = paths.len();
    let mut pick = vec![0usize; n];
    let mut total = C::new(0.0, 0.0);
    if edges.iter().any(|e| e.is_empty()) {
        return total;
    }
    loop {
        let mut m = DMatrix::<C>::zeros(n, n);
        let mut weight = C::new(1.0, 0.0);
        for i in 0..n {
            let (bi, _, di) = edges[i][pick[i]];
            weight *= di;
            for k in 0..n {
                if i != k {
                    m[(i, k)] = kinv.kinv(bi, edges[k][pick[k]].1);
                }
            }
        }
        total += weight * if n == 0 { C::new(1.0, 0.0) } else { m.determinant() };
        let mut i = 0;
        loop {
            if i == n {
                return total;
            }
            pick[i] += 1;
            if pick[i] < edges[i].len() {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
    }
}

/// E N(x,y) = E h(x)h(y) = 2·E h₁(x)h₁(y) = −2 Σ_{l₁}Σ_{l₂} K⁻¹(b₁,w₂)K⁻¹(b₂,w₁) d₁ d₂.
pub fn expected_nxy_double_sum(kinv: &dyn InverseKernel, l1: &CutPath, l2: &CutPath) -> f64 {
    2.0 * single_height_moment(kinv, &[l1.clone(), l2.clone()]).re
}

/// How X_δ = (N − μ)/σ is centred in the log-Laplace scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Centering {
    /// μ = −(1/π²) log δ, σ² = −(2/(3π²)) log δ
    Theory,
    /// one (μ, σ) per domain of the family, e.g. Monte-Carlo estimates
    Given(Vec<(f64, f64)>),
    /// first two cumulants of N extracted from the determinant itself
    Exact,
}

/// log E e^{−cN} at c = −log cos 2πs.
fn log_laplace(kinv: &dyn InverseKernel, cut: &CutPath, c: f64) -> Result<f64, DeterminantError> {
    let s = (-c).exp().acos() / (2.0 * PI);
    Ok(laplace_transform_n(kinv, cut, s)?.value.ln())
}

/// (κ₁, κ₂) of N from a polynomial fit of log E e^{−cN} on small c.
pub fn cumulants_from_determinant(kinv: &dyn InverseKernel, cut: &CutPath) -> Result<(f64, f64), DeterminantError> {
    let cs: Vec<f64> = (1..=10).map(|k| 0.004 * k as f64).collect();
    let mut ys = Vec::new();
    for &c in &cs {
        ys.push(log_laplace(kinv, cut, c)?);
    }
    // y = −κ₁c + κ₂c²/2 − κ₃c³/6 + κ₄c⁴/24
    let a = DMatrix::from_fn(cs.len(), 4, |i, k| cs[i].powi(k as i32 + 1));
    let sol = a.svd(true, true).solve(&DVector::from_column_slice(&ys), 1e-300).map_err(|e| DeterminantError::Invalid(e.to_string()))?;
    Ok((-sol[0], 2.0 * sol[1]))
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub delta: f64,
    pub lambda: f64,
    pub value: f64,
    pub deviation: f64,
    pub mu: f64,
    pub sigma: f64,
}

/// d/dλ log E e^{−λX_δ} by central differences of log E(cos 2πs_δ(λ))^N with
/// s_δ(λ) = (2π)⁻¹ arccos e^{−λ/σ}. Each family member is (δ, inverse kernel, cut from v).
pub fn log_laplace_derivative_scan(family: &[(f64, &dyn InverseKernel, CutPath)], lambdas: &[f64], centering: &Centering) -> Result<Vec<ScanRow>, DeterminantError> {
    if lambdas.iter().any(|&l| !(l > 0.0 && l <= 3.0)) {
        return Err(DeterminantError::Invalid("λ grid must lie in (0, 3]".into()));
    }
    let mut rows = Vec::new();
    for (i, (delta, kinv, cut)) in family.iter().enumerate() {
        let (mu, sigma) = match centering {
            Centering::Theory => (-delta.ln() / (PI * PI), (-(2.0 / (3.0 * PI * PI)) * delta.ln()).sqrt()),
            Centering::Given(v) => *v.get(i).ok_or_else(|| DeterminantError::Invalid("missing (μ, σ) for a family member".into()))?,
            Centering::Exact => {
                let (k1, k2) = cumulants_from_determinant(*kinv, cut)?;
                (k1, k2.sqrt())
            }
        };
        for &lambda in lambdas {
            let h = 1e-3 * lambda.max(0.1);
            let f = |l: f64| log_laplace(*kinv, cut, l / sigma);
            let value = mu / sigma + (f(lambda + h)? - f(lambda - h)?) / (2.0 * h);
            rows.push(ScanRow { delta: *delta, lambda, value, deviation: (value - lambda).abs(), mu, sigma });
        }
    }
    Ok(rows)
}

pub fn scan_to_csv(rows: &[ScanRow]) -> String {
    let mut out = String::from("delta,lambda,value,deviation,mu,sigma\n");
    for r in rows {
        out.push_str(&format!("{},{},{:.10},{:.10},{:.10},{:.10}\n", r.delta, r.lambda, r.value, r.deviation, r.mu, r.sigma));
    }
    out
}
