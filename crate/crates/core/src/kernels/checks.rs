//! Numerical checks of solved monodromy kernels against the closed-form references.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, LazyLock, Mutex};

use num_complex::Complex64;
use serde::Serialize;

use super::reference::{OnePuncture, Regime, TwoPuncture};
use super::solve::{edge_phase, KernelColumn};
use super::{fullplane_kinv, CutResolvent, KernelError};
use crate::kasteleyn::{assemble_k, KasteleynOperator, MonodromyRep};
use crate::lattice::{CutPath, LatticeDomain, Site};
use crate::linalg::fit::linear_fit;

type C = Complex64;

/// Site of the requested colour nearest to z.
pub fn nearest_site(z: C, black: bool) -> Site {
    let s = Site::new(z.re.round() as i32, z.im.round() as i32);
    if s.is_black() == black {
        return s;
    }
    let mut best = s.offset(1, 0);
    for n in s.neighbors() {
        if (n.z() - z).norm() < (best.z() - z).norm() {
            best = n;
        }
    }
    best
}

/// One-puncture K_s⁻¹ as the limit of a pair of punctures at depth D → ∞: the finite-D error is
/// O(1/D), removed by the extrapolation 2X(2D) − X(D).
pub struct OnePunctureKernel {
    pub puncture: OnePuncture,
    pub depth: usize,
    near: CutResolvent,
    far: CutResolvent,
}

static ONE_PUNCTURE_CACHE: LazyLock<Mutex<HashMap<(i32, i32, u64, usize), Arc<OnePunctureKernel>>>> = LazyLock::new(|| Mutex::new(HashMap::new()));

impl OnePunctureKernel {
    pub fn new(puncture: OnePuncture, depth: usize) -> Result<Self, KernelError> {
        let f = puncture.face;
        let cut = |d: usize| CutPath::between_faces(f, f.offset(0, -(d as i32)));
        let near = CutResolvent::new(fullplane_kinv, &[(cut(depth), puncture.s)])?;
        let far = CutResolvent::new(fullplane_kinv, &[(cut(2 * depth), puncture.s)])?;
        Ok(OnePunctureKernel { puncture, depth, near, far })
    }

    /// Shared instance per (face, s, depth).
    pub fn cached(puncture: OnePuncture, depth: usize) -> Result<Arc<Self>, KernelError> {
        let key = (puncture.face.x, puncture.face.y, puncture.s.to_bits(), depth);
        if let Some(k) = ONE_PUNCTURE_CACHE.lock().expect("cache lock").get(&key) {
            return Ok(k.clone());
        }
        let k = Arc::new(Self::new(puncture, depth)?);
        ONE_PUNCTURE_CACHE.lock().expect("cache lock").insert(key, k.clone());
        Ok(k)
    }

    /// Column at w, tabulated on `blacks`.
    pub fn column(&self, w: Site, blacks: &[Site]) -> KernelColumn {
        let (a, b) = (self.near.column(w), self.far.column(w));
        let cut = CutPath::straight_down(self.puncture.face, 4 * self.depth);
        KernelColumn::from_fn(w, blacks, super::KernelMethod::Woodbury, &[(cut, self.puncture.s)], |u| 2.0 * b.at(u) - a.at(u))
    }

    pub fn eval(&self, b: Site, w: Site) -> C {
        2.0 * self.far.eval(b, w) - self.near.eval(b, w)
    }
}

pub const ONE_PUNCTURE_DEPTH: usize = 500;

#[derive(Debug, Clone, Serialize)]
pub struct GammaRow {
    pub b: (i32, i32),
    pub solved: (f64, f64),
    pub predicted: (f64, f64),
    /// |solved/predicted − 1|
    pub deviation: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GammaReport {
    pub s: f64,
    pub w0: (i32, i32),
    pub rows: Vec<GammaRow>,
    pub max_deviation: f64,
}

/// Blacks at radii in [r_min, r_max] around the puncture, twelve directions per radius.
pub fn annulus_sample(p: &OnePuncture, r_min: f64, r_max: f64, n_radii: usize) -> Vec<Site> {
    let mut out = Vec::new();
    for i in 0..n_radii {
        let r = if n_radii == 1 { r_min } else { r_min + (r_max - r_min) * i as f64 / (n_radii - 1) as f64 };
        for k in 0..12 {
            let t = 2.0 * PI * (k as f64 + 0.25) / 12.0;
            out.push(nearest_site(p.centre() + C::from_polar(r, t), true));
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Ratio of the solved K_s⁻¹(b, w₀) to the Γ(1∓s)-weighted main term.
pub fn gamma_factor_check(s: f64, face: Site, b_range: &[Site]) -> Result<GammaReport, KernelError> {
    if !(s > 0.0 && s < 0.5) {
        return Err(KernelError::Invalid(format!("s = {s} outside (0, 1/2)")));
    }
    let p = OnePuncture::new(face, s)?;
    let k = OnePunctureKernel::cached(p, ONE_PUNCTURE_DEPTH)?;
    let w0 = p.w0();
    let col = k.column(w0, b_range);
    let mut rows = Vec::new();
    for &b in b_range {
        let solved = col.get(b).unwrap();
        let predicted = p.kinv_at_w0(b);
        rows.push(GammaRow { b: (b.x, b.y), solved: (solved.re, solved.im), predicted: (predicted.re, predicted.im), deviation: (solved / predicted - 1.0).norm() });
    }
    let max_deviation = rows.iter().map(|r| r.deviation).fold(0.0, f64::max);
    Ok(GammaReport { s, w0: (w0.x, w0.y), rows, max_deviation })
}

/// |solved − χ⁻¹(K⁻¹ + (s/2π)[1/w − (η_bη_w)²/w̄])| for a pair near the diagonal.
pub fn near_diagonal_check(kernel: &OnePunctureKernel, w: Site, b: Site) -> Result<f64, KernelError> {
    let p = &kernel.puncture;
    if (p.rel(b) - p.rel(w)).norm() > p.rel(w).norm().powf(0.75) {
        return Err(KernelError::Invalid("pair is not near the diagonal".into()));
    }
    Ok((kernel.eval(b, w) - p.kinv_near_diagonal(b, w)).norm())
}

#[derive(Debug, Clone, Serialize)]
pub struct NearDiagonalScan {
    pub s: f64,
    pub radii: Vec<f64>,
    pub deviations: Vec<f64>,
    /// −slope of log deviation against log |w|
    pub exponent: f64,
}

/// Worst near-diagonal deviation over the four neighbours of a white at each radius along a
/// fixed direction, with the fitted decay exponent.
pub fn near_diagonal_scan(s: f64, face: Site, radii: &[f64]) -> Result<NearDiagonalScan, KernelError> {
    let p = OnePuncture::new(face, s)?;
    let k = OnePunctureKernel::cached(p, ONE_PUNCTURE_DEPTH)?;
    let dir = C::from_polar(1.0, 0.6);
    let mut deviations = Vec::new();
    for &r in radii {
        let w = nearest_site(p.centre() + dir * r, false);
        let mut worst: f64 = 0.0;
        for b in w.neighbors() {
            worst = worst.max(near_diagonal_check(&k, w, b)?);
        }
        deviations.push(worst);
    }
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = deviations.iter().map(|d| d.ln()).collect();
    let (slope, _, _) = linear_fit(&xs, &ys);
    Ok(NearDiagonalScan { s, radii: radii.to_vec(), deviations, exponent: -slope })
}

/// Δ_s f(b) = Σ_{|b̃−b|=2} χ(b,b̃) f(b̃) − 4 f(b), with χ composed through the middle white.
pub fn twisted_laplacian(col: &KernelColumn, cuts: &[(CutPath, f64)], b: Site) -> Option<C> {
    let fb = col.get(b)?;
    let mut acc = -4.0 * fb;
    for (dx, dy) in [(2, 0), (-2, 0), (0, 2), (0, -2)] {
        let bt = b.offset(dx, dy);
        let w = b.offset(dx / 2, dy / 2);
        let chi = edge_phase(cuts, w, b).conj() * edge_phase(cuts, w, bt);
        acc += chi * col.get(bt)?;
    }
    Some(acc)
}

#[derive(Debug, Clone, Serialize)]
pub struct LaplacianReport {
    /// |Δ_s f(b₀) − i(e^{−2πis} − 1) f(b₀†)|
    pub puncture_defect: f64,
    /// the same with the opposite phase convention, for diagnosing sign mismatches
    pub flipped_defect: f64,
    /// max |Δ_s f| over checked blacks away from b₀, b₀† and the source
    pub bulk_max: f64,
    pub scale: f64,
}

/// Laplacian-with-monodromy identities for a column discrete holomorphic near the puncture.
pub fn laplacian_check(col: &KernelColumn, p: &OnePuncture, cuts: &[(CutPath, f64)]) -> Option<LaplacianReport> {
    let (b0, b0d) = p.puncture_blacks();
    let lhs = twisted_laplacian(col, cuts, b0)?;
    let f0d = col.get(b0d)?;
    let i = C::new(0.0, 1.0);
    let rhs = i * (C::from_polar(1.0, -2.0 * PI * p.s) - 1.0) * f0d;
    let flipped = i * (1.0 - C::from_polar(1.0, 2.0 * PI * p.s)) * f0d;
    let w = col.source;
    let mut bulk: f64 = 0.0;
    for &b in col.values.keys() {
        if b == b0 || b == b0d || (b.z() - w.z()).norm() < 3.5 {
            continue;
        }
        // the diagonal terms only cancel when all eight surrounding blacks are present
        if [(1, 1), (1, -1), (-1, 1), (-1, -1)].iter().any(|&(x, y)| col.get(b.offset(x, y)).is_none()) {
            continue;
        }
        if let Some(l) = twisted_laplacian(col, cuts, b) {
            bulk = bulk.max(l.norm());
        }
    }
    Some(LaplacianReport { puncture_defect: (lhs - rhs).norm(), flipped_defect: (lhs - flipped).norm(), bulk_max: bulk, scale: f0d.norm().max(col.get(b0)?.norm()) })
}

#[derive(Debug, Clone, Serialize)]
pub struct MaxPrincipleReport {
    pub radius: f64,
    pub interior_max: f64,
    pub ring_max: f64,
    pub puncture_max: f64,
    pub holds: bool,
}

/// |f| inside the ball |b| < R − 2 around the puncture against the ring R − 2 ≤ |b| ≤ R plus
/// twice the puncture values. The source must lie outside the ball.
pub fn maximum_principle_check(col: &KernelColumn, p: &OnePuncture, radius: f64) -> Result<MaxPrincipleReport, KernelError> {
    if p.rel(col.source).norm() <= radius + 1.0 {
        return Err(KernelError::Invalid("source lies inside the ball".into()));
    }
    let (b0, b0d) = p.puncture_blacks();
    let mut interior: f64 = 0.0;
    let mut ring: f64 = 0.0;
    for (&b, v) in &col.values {
        let r = p.rel(b).norm();
        if r < radius - 2.0 {
            interior = interior.max(v.norm());
        } else if r <= radius {
            ring = ring.max(v.norm());
        }
    }
    let pm = col.get(b0).map(|v| v.norm()).unwrap_or(0.0).max(col.get(b0d).map(|v| v.norm()).unwrap_or(0.0));
    Ok(MaxPrincipleReport { radius, interior_max: interior, ring_max: ring, puncture_max: pm, holds: interior <= ring + 2.0 * pm })
}

/// Exact K_{s,−s}⁻¹ for the conjugate pair (finite-rank correction along the cut v → v̄).
pub struct TwoPunctureKernel {
    pub reference: TwoPuncture,
    resolvent: CutResolvent,
}

impl TwoPunctureKernel {
    pub fn new(reference: TwoPuncture) -> Result<Self, KernelError> {
        let resolvent = CutResolvent::new(fullplane_kinv, &[(reference.cut(), reference.s)])?;
        Ok(TwoPunctureKernel { reference, resolvent })
    }
    pub fn eval(&self, b: Site, w: Site) -> C {
        self.resolvent.eval(b, w)
    }
}

/// Test pairs whose geometry scales with Im v, covering every regime of the parametrix.
pub fn scaled_test_pairs(p: &TwoPuncture) -> Vec<(Site, Site)> {
    let y = p.im_v();
    let v = p.v();
    let vb = v.conj();
    let at = |c: C, dx: f64, dy: f64, black: bool| nearest_site(c + C::new(dx, dy) * y, black);
    let mut pairs = Vec::new();
    // w away from both punctures
    for (wx, wy) in [(1.5, -0.4), (-1.3, -1.6), (0.4, 1.0)] {
        let w = at(v, wx, wy, false);
        pairs.push((at(v, 0.25, 0.2, true), w));
        pairs.push((at(v, -0.2, -0.3, true), w));
        pairs.push((at(vb, -0.3, 0.1, true), w));
        pairs.push((at(w.z(), 0.2, -0.15, true), w));
        pairs.push((w.offset(1, 0), w));
        pairs.push((at(v, -1.9, 0.7, true), w));
    }
    // w near v, mirrored for v̄
    for (wx, wy) in [(0.3, -0.25), (-0.35, 0.3)] {
        for mirror in [false, true] {
            let w0 = at(v, wx, wy, false);
            let wsite = if mirror { Site::new(w0.x, -w0.y) } else { w0 };
            let (c, cb) = if mirror { (vb, v) } else { (v, vb) };
            let sgn = if mirror { -1.0 } else { 1.0 };
            pairs.push((at(c, -0.2, 0.5 * sgn, true), wsite));
            pairs.push((wsite.offset(0, 1), wsite));
            pairs.push((at(cb, 0.3, 0.2, true), wsite));
            pairs.push((at(c, 1.4, 0.8 * sgn, true), wsite));
        }
    }
    pairs
}

#[derive(Debug, Clone, Serialize)]
pub struct ParametrixRow {
    pub b: (i32, i32),
    pub w: (i32, i32),
    pub regime: String,
    pub solved: (f64, f64),
    pub parametrix: (f64, f64),
    pub error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParametrixReport {
    pub im_v: f64,
    pub s: f64,
    pub rows: Vec<ParametrixRow>,
    pub sup_error: f64,
}

/// Solved two-puncture kernel minus the parametrix over the scaled test set.
pub fn parametrix_error(s: f64, face: Site) -> Result<ParametrixReport, KernelError> {
    let p = TwoPuncture::new(face, s, 0.01)?;
    let k = TwoPunctureKernel::new(p)?;
    let mut rows = Vec::new();
    for (b, w) in scaled_test_pairs(&p) {
        let regime: Regime = p.regime(b, w)?;
        let sv = k.eval(b, w);
        let pv = p.parametrix(b, w)?;
        rows.push(ParametrixRow { b: (b.x, b.y), w: (w.x, w.y), regime: format!("{regime:?}"), solved: (sv.re, sv.im), parametrix: (pv.re, pv.im), error: (sv - pv).norm() });
    }
    let sup_error = rows.iter().map(|r| r.error).fold(0.0, f64::max);
    Ok(ParametrixReport { im_v: p.im_v(), s, rows, sup_error })
}

/// Temperleyan box with corners (±L, ±L), L odd, and the cut from `face` straight down to the
/// bottom side. Returns the twisted operator and the cut.
pub fn puncture_box(half: i32, face: Site, s: f64) -> Result<(KasteleynOperator<f64>, Vec<(CutPath, f64)>), KernelError> {
    let l = half | 1;
    let poly = [Site::new(-l, -l), Site::new(l, -l), Site::new(l, l), Site::new(-l, l)];
    let dom = LatticeDomain::build_temperleyan(1.0, &poly, Site::new(l, l)).map_err(|e| KernelError::Invalid(e.to_string()))?;
    let cut = CutPath::straight_down(face, (face.y + l + 1).max(0) as usize);
    let k = assemble_k::<f64>(Arc::new(dom));
    let k = if s == 0.0 { k } else { k.twist(&MonodromyRep::scalar(cut.clone(), s)).map_err(|e| KernelError::Invalid(e.to_string()))? };
    Ok((k, vec![(cut, s)]))
}
