//! Nesting and height-square fields, loop/height polynomial statistics, Monte-Carlo summaries.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use rayon::prelude::*;

use crate::lattice::{LatticeDomain, Site};
use crate::linalg::fit::weighted_linear_fit;
use crate::oracle::{exact_expectation, EnumerationTable};
use crate::sampler::{sample_cover_stream, superimpose, DimerCover, DoubleDimerConfig, SamplerError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObservableError {
    #[error("face {0:?} is outside the domain")]
    FaceOutsideDomain(Site),
    #[error("means table does not match: {0}")]
    MeansMismatch(String),
    #[error("window does not fit the field: {0}")]
    WindowMismatch(String),
    #[error("not enough samples ({0})")]
    TooFewSamples(usize),
}

impl From<SamplerError> for ObservableError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::FaceOutsideDomain(f) => ObservableError::FaceOutsideDomain(f),
            other => ObservableError::MeansMismatch(other.to_string()),
        }
    }
}

/// Mean and standard error of a named statistic.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatReport {
    pub name: String,
    pub params: serde_json::Value,
    pub seed: Option<u64>,
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
}

impl StatReport {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }
    pub fn with_params(mut self, params: serde_json::Value) -> Self {
        self.params = params;
        self
    }
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("serializable")
    }
}

/// Running mean and second central moment, mergeable across workers.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }
    pub fn merge(&mut self, other: &Welford) {
        if other.n == 0 {
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64) * (other.n as f64) / n as f64;
        self.n = n;
    }
    pub fn count(&self) -> usize {
        self.n
    }
    pub fn mean(&self) -> f64 {
        self.mean
    }
    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }
    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
    pub fn report(&self, name: impl Into<String>) -> StatReport {
        StatReport { name: name.into(), params: serde_json::Value::Null, seed: None, n: self.n, mean: self.mean, stderr: self.stderr() }
    }
}

impl FromIterator<f64> for Welford {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut w = Welford::new();
        for x in iter {
            w.push(x);
        }
        w
    }
}

/// Rectangle of faces, lower-left corner included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Window {
    pub corner: Site,
    pub width: i32,
    pub height: i32,
}

impl Window {
    pub fn new(corner: Site, width: i32, height: i32) -> Self {
        Window { corner, width, height }
    }
    pub fn len(&self) -> usize {
        (self.width.max(0) * self.height.max(0)) as usize
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn faces(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.height).flat_map(move |dy| (0..self.width).map(move |dx| self.corner.offset(dx, dy)))
    }
    fn index(&self, f: Site) -> Option<usize> {
        let (dx, dy) = (f.x - self.corner.x, f.y - self.corner.y);
        (dx >= 0 && dy >= 0 && dx < self.width && dy < self.height).then(|| (dy * self.width + dx) as usize)
    }
}

/// Face values of one realization of a field over a window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSample {
    pub window: Window,
    pub delta: f64,
    /// row-major, bottom row first
    pub values: Vec<f64>,
}

impl FieldSample {
    pub fn new(window: Window, delta: f64, values: Vec<f64>) -> Result<Self, ObservableError> {
        if values.len() != window.len() {
            return Err(ObservableError::WindowMismatch(format!("{} values for a {}×{} window", values.len(), window.width, window.height)));
        }
        Ok(FieldSample { window, delta, values })
    }
    pub fn from_fn(window: Window, delta: f64, f: impl Fn(Site) -> f64) -> Self {
        FieldSample { window, delta, values: window.faces().map(f).collect() }
    }
    pub fn get(&self, f: Site) -> Option<f64> {
        self.window.index(f).map(|k| self.values[k])
    }
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len().max(1) as f64
    }
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for row in self.values.chunks(self.window.width.max(1) as usize) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }
}

/// Face-wise expectations used to centre the fields: E N(x), E N(x, x+ε), E h(x)², E h(x)h(x+ε).
/// ε is a horizontal displacement by an integer number of faces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeansTable {
    pub window: Window,
    pub eps: i32,
    pub mesh: f64,
    pub n: usize,
    /// seed of the independent first pass, `None` for exact tables
    pub seed: Option<u64>,
    pub n1: Vec<f64>,
    pub n_eps: Vec<f64>,
    pub h2: Vec<f64>,
    pub h_eps: Vec<f64>,
}

fn face_stats(c: &DoubleDimerConfig, x: Site, eps: i32) -> Result<[f64; 4], ObservableError> {
    let y = x.offset(eps, 0);
    let n1 = c.nesting_number(&[x])? as f64;
    let ne = c.nesting_number(&[x, y])? as f64;
    let (hx, hy) = (c.height_at(x) as f64, c.height_at(y) as f64);
    Ok([n1, ne, hx * hx, hx * hy])
}

impl MeansTable {
    /// Sample averages over an independent batch.
    pub fn from_samples(batch: &[DoubleDimerConfig], window: Window, eps: i32, seed: Option<u64>) -> Result<Self, ObservableError> {
        let first = batch.first().ok_or(ObservableError::TooFewSamples(0))?;
        let mut acc = vec![[0.0; 4]; window.len()];
        for c in batch {
            for (k, x) in window.faces().enumerate() {
                let s = face_stats(c, x, eps)?;
                for i in 0..4 {
                    acc[k][i] += s[i];
                }
            }
        }
        let n = batch.len() as f64;
        let col = |i: usize| acc.iter().map(|a| a[i] / n).collect();
        Ok(MeansTable { window, eps, mesh: first.domain().mesh(), n: batch.len(), seed, n1: col(0), n_eps: col(1), h2: col(2), h_eps: col(3) })
    }

    /// Exact averages under the enumerated measure.
    pub fn from_oracle(table: &EnumerationTable, window: Window, eps: i32) -> Result<Self, ObservableError> {
        let d = table.domain();
        for x in window.faces() {
            for f in [x, x.offset(eps, 0)] {
                if !d.is_face(f) {
                    return Err(ObservableError::FaceOutsideDomain(f));
                }
            }
        }
        let mut cols = vec![Vec::with_capacity(window.len()); 4];
        for x in window.faces() {
            for (i, col) in cols.iter_mut().enumerate() {
                col.push(exact_expectation(table, |c| face_stats(c, x, eps).expect("faces checked")[i]));
            }
        }
        let h_eps = cols.pop().expect("four columns");
        let h2 = cols.pop().expect("four columns");
        let n_eps = cols.pop().expect("four columns");
        let n1 = cols.pop().expect("four columns");
        Ok(MeansTable { window, eps, mesh: d.mesh(), n: table.count(), seed: None, n1, n_eps, h2, h_eps })
    }

    fn check(&self, c: &DoubleDimerConfig, eps: i32) -> Result<(), ObservableError> {
        if self.eps != eps {
            return Err(ObservableError::MeansMismatch(format!("table ε = {}, requested {eps}", self.eps)));
        }
        if self.mesh != c.domain().mesh() {
            return Err(ObservableError::MeansMismatch(format!("table mesh {}, sample mesh {}", self.mesh, c.domain().mesh())));
        }
        Ok(())
    }
}

/// φ(x) = N(x) − E N(x) and φ^ε(x) = N(x, x+ε) − E N(x, x+ε) over the table's window.
pub fn phi_fields(c: &DoubleDimerConfig, means: &MeansTable, eps: i32) -> Result<(FieldSample, FieldSample), ObservableError> {
    means.check(c, eps)?;
    let mut phi = Vec::with_capacity(means.window.len());
    let mut phi_e = Vec::with_capacity(means.window.len());
    for (k, x) in means.window.faces().enumerate() {
        let s = face_stats(c, x, eps)?;
        phi.push(s[0] - means.n1[k]);
        phi_e.push(s[1] - means.n_eps[k]);
    }
    Ok((FieldSample { window: means.window, delta: means.mesh, values: phi }, FieldSample { window: means.window, delta: means.mesh, values: phi_e }))
}

/// ψ(x) = h(x)² − E h(x)² and ψ^ε(x) = h(x)h(x+ε) − E h(x)h(x+ε).
pub fn psi_fields(c: &DoubleDimerConfig, means: &MeansTable, eps: i32) -> Result<(FieldSample, FieldSample), ObservableError> {
    means.check(c, eps)?;
    let mut psi = Vec::with_capacity(means.window.len());
    let mut psi_e = Vec::with_capacity(means.window.len());
    for (k, x) in means.window.faces().enumerate() {
        let s = face_stats(c, x, eps)?;
        psi.push(s[2] - means.h2[k]);
        psi_e.push(s[3] - means.h_eps[k]);
    }
    Ok((FieldSample { window: means.window, delta: means.mesh, values: psi }, FieldSample { window: means.window, delta: means.mesh, values: psi_e }))
}

/// The three loop polynomials relating ψψ to φφ moments, with P_ε evaluated in both orders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PPolynomials {
    pub p: f64,
    pub p_eps_xy: f64,
    pub p_eps_yx: f64,
    pub p_eps_eps: f64,
}

pub fn p_polynomials(c: &DoubleDimerConfig, x: Site, y: Site, eps: i32) -> Result<PPolynomials, ObservableError> {
    let (xe, ye) = (x.offset(eps, 0), y.offset(eps, 0));
    let n = |f: &[Site]| c.nesting_number(f).map(|k| k as f64);
    let nxy = n(&[x, y])?;
    let p = 2.0 * nxy * nxy - 2.0 * nxy;
    let p_eps_xy = 2.0 * nxy * n(&[x, ye])? - 2.0 * n(&[x, y, ye])?;
    let p_eps_yx = 2.0 * nxy * n(&[y, xe])? - 2.0 * n(&[y, x, xe])?;
    let p_eps_eps = nxy * n(&[xe, ye])? + n(&[x, ye])? * n(&[xe, y])? - 2.0 * n(&[x, xe, y, ye])?;
    Ok(PPolynomials { p, p_eps_xy, p_eps_yx, p_eps_eps })
}

/// Per-sample h₁h₂h₃h₄ − (N₁₂N₃₄ + N₁₃N₂₄ + N₁₄N₂₃ − 2N₁₂₃₄); zero in expectation.
pub fn four_point_statistic(c: &DoubleDimerConfig, xs: [Site; 4]) -> Result<f64, ObservableError> {
    let n = |f: &[Site]| c.nesting_number(f).map(|k| k as f64);
    let h: f64 = xs.iter().map(|&f| c.height_at(f) as f64).product();
    let [a, b, cc, d] = xs;
    let pairs = n(&[a, b])? * n(&[cc, d])? + n(&[a, cc])? * n(&[b, d])? + n(&[a, d])? * n(&[b, cc])?;
    Ok(h - pairs + 2.0 * n(&xs)?)
}

pub fn four_point_identity(batch: &[DoubleDimerConfig], xs: [Site; 4]) -> Result<StatReport, ObservableError> {
    let mut w = Welford::new();
    for c in batch {
        w.push(four_point_statistic(c, xs)?);
    }
    Ok(w.report("four_point_defect"))
}

/// Wick defect E[h₁h₂h₃h₄] − Σ_pairings E[hh]E[hh] with a delta-method standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WickDefect {
    pub defect: StatReport,
    /// Σ_pairings E[hh]E[hh]
    pub pairing_sum: f64,
}

const PAIRINGS: [[(usize, usize); 2]; 3] = [[(0, 1), (2, 3)], [(0, 2), (1, 3)], [(0, 3), (1, 2)]];

/// Wick defect from per-sample values of the four heights.
pub fn wick_defect_from_values(samples: &[[f64; 4]]) -> Result<WickDefect, ObservableError> {
    if samples.len() < 2 {
        return Err(ObservableError::TooFewSamples(samples.len()));
    }
    let n = samples.len() as f64;
    let m = |i: usize, j: usize| samples.iter().map(|s| s[i] * s[j]).sum::<f64>() / n;
    let m4 = samples.iter().map(|s| s.iter().product::<f64>()).sum::<f64>() / n;
    let pairing_sum: f64 = PAIRINGS.iter().map(|[(a, b), (c, d)]| m(*a, *b) * m(*c, *d)).sum();
    let influence: Welford = samples
        .iter()
        .map(|s| {
            let mut v = s.iter().product::<f64>();
            for [(a, b), (c, d)] in PAIRINGS {
                v -= m(c, d) * s[a] * s[b] + m(a, b) * s[c] * s[d];
            }
            v
        })
        .collect();
    let defect = StatReport { name: "wick_defect".into(), params: serde_json::Value::Null, seed: None, n: samples.len(), mean: m4 - pairing_sum, stderr: influence.stderr() };
    Ok(WickDefect { defect, pairing_sum })
}

pub fn wick_defect(batch: &[DoubleDimerConfig], xs: [Site; 4]) -> Result<WickDefect, ObservableError> {
    let d = batch.first().ok_or(ObservableError::TooFewSamples(0))?.domain().clone();
    if let Some(f) = xs.iter().find(|f| !d.is_face(**f)) {
        return Err(ObservableError::FaceOutsideDomain(*f));
    }
    let vals: Vec<[f64; 4]> = batch.iter().map(|c| xs.map(|f| c.height_at(f) as f64)).collect();
    wick_defect_from_values(&vals)
}

/// Estimates of E e^{ith(x)} (real and imaginary parts) and E (cos t)^{N(x)}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharFunction {
    pub t: f64,
    pub exp_re: StatReport,
    pub exp_im: StatReport,
    pub cos_power: StatReport,
}

pub fn char_function_identity(batch: &[DoubleDimerConfig], x: Site, t: f64) -> Result<CharFunction, ObservableError> {
    let (mut re, mut im, mut cp) = (Welford::new(), Welford::new(), Welford::new());
    for c in batch {
        let n = c.nesting_number(&[x])?;
        let z = Complex64::from_polar(1.0, t * c.height_at(x) as f64);
        re.push(z.re);
        im.push(z.im);
        cp.push(t.cos().powi(n as i32));
    }
    Ok(CharFunction { t, exp_re: re.report("exp_ith_re"), exp_im: im.report("exp_ith_im"), cos_power: cp.report("cos_t_pow_n") })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoPointRow {
    /// |x − y| in lattice units
    pub separation: f64,
    pub hh: StatReport,
    pub nn: StatReport,
}

/// Slopes of E h(x)h(y) and E N(x,y) against −log|x − y|.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoPointFit {
    pub rows: Vec<TwoPointRow>,
    pub slope_h: f64,
    pub slope_h_se: f64,
    pub slope_n: f64,
    pub slope_n_se: f64,
}

pub fn two_point_slope(batch: &[DoubleDimerConfig], pairs: &[(Site, Site)]) -> Result<TwoPointFit, ObservableError> {
    if pairs.len() < 2 {
        return Err(ObservableError::TooFewSamples(pairs.len()));
    }
    let mut rows = Vec::new();
    for &(x, y) in pairs {
        let (mut hh, mut nn) = (Welford::new(), Welford::new());
        for c in batch {
            hh.push((c.height_at(x) * c.height_at(y)) as f64);
            nn.push(c.nesting_number(&[x, y])? as f64);
        }
        let sep = (((x.x - y.x).pow(2) + (x.y - y.y).pow(2)) as f64).sqrt();
        rows.push(TwoPointRow { separation: sep, hh: hh.report("h_x_h_y"), nn: nn.report("n_xy") });
    }
    Ok(two_point_fit_from_rows(rows))
}

/// Σ_k (1+|k|²)^{−1−ν} |ĉ_k|² for the field restricted to a square window, pulled back to the
/// torus (−π, π]² with ĉ_k = (2π)⁻² ∫ e^{−iz·k} f(z) dz approximated on the face grid.
pub fn sobolev_norm(field: &FieldSample, window: Window, nu: f64) -> Result<f64, ObservableError> {
    if window.width != window.height || window.width <= 0 {
        return Err(ObservableError::WindowMismatch("window must be a non-empty square".into()));
    }
    let m = window.width as usize;
    let far = window.corner.offset(window.width - 1, window.height - 1);
    if field.window.index(window.corner).is_none() || field.window.index(far).is_none() {
        return Err(ObservableError::WindowMismatch(format!("{window:?} is not inside {:?}", field.window)));
    }
    let mut grid: Vec<Complex64> = window.faces().map(|f| Complex64::new(field.get(f).expect("inside"), 0.0)).collect();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
    for row in grid.chunks_mut(m) {
        fft.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); m];
    for x in 0..m {
        for y in 0..m {
            col[y] = grid[y * m + x];
        }
        fft.process(&mut col);
        for y in 0..m {
            grid[y * m + x] = col[y];
        }
    }
    let freq = |i: usize| if i < m.div_ceil(2) { i as f64 } else { i as f64 - m as f64 };
    let norm = (m * m) as f64;
    let mut total = 0.0;
    for y in 0..m {
        for x in 0..m {
            let k2 = freq(x).powi(2) + freq(y).powi(2);
            total += (1.0 + k2).powf(-1.0 - nu) * (grid[y * m + x].norm() / norm).powi(2);
        }
    }
    Ok(total)
}

/// Kolmogorov–Smirnov distance of already standardized values to N(0, 1).
pub fn ks_standard_normal(values: &[f64]) -> f64 {
    let normal = Normal::standard();
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in v.iter().enumerate() {
        let f = normal.cdf(*x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d
}

/// KS distance of (x − mean)/sd to N(0, 1), with the sample mean and sd.
pub fn ks_to_normal(values: &[f64]) -> f64 {
    let w: Welford = values.iter().copied().collect();
    let sd = w.variance().sqrt();
    if sd == 0.0 {
        return 1.0;
    }
    let z: Vec<f64> = values.iter().map(|x| (x - w.mean()) / sd).collect();
    ks_standard_normal(&z)
}

/// Leading-order mean and variance of N_δ at a bulk point: −(1/π²) log δ and −(2/(3π²)) log δ.
pub fn theory_mean_var(delta: f64) -> (f64, f64) {
    (-delta.ln() / (PI * PI), -2.0 * delta.ln() / (3.0 * PI * PI))
}

/// Uncentred single-dimer height h^{(D, D_ref)} at a face; centring by E over D gives h_{δ,1}.
pub fn single_dimer_height(d: &DimerCover, reference: &DimerCover, f: Site) -> Result<i32, ObservableError> {
    Ok(superimpose(d, reference)?.height_at(f))
}

/// Per-sample values at a fixed set of faces and face pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointStats {
    pub nesting: Vec<u32>,
    pub height: Vec<i32>,
    pub pair_nesting: Vec<u32>,
    pub pair_height: Vec<i64>,
    /// h^{(D₁, D_ref)} at each face (uncentred), when a reference cover is given
    pub single_height: Vec<i32>,
}

/// Draw `n` double-dimer samples (sample i on streams 2i, 2i+1 of `seed`) and record point
/// statistics; samples are not retained. Output order is the sample order.
pub fn collect_point_statistics(
    domain: &Arc<LatticeDomain>,
    faces: &[Site],
    pairs: &[(Site, Site)],
    reference: Option<&DimerCover>,
    n: usize,
    seed: u64,
) -> Result<Vec<PointStats>, ObservableError> {
    for &f in faces.iter().chain(pairs.iter().flat_map(|(a, b)| [a, b])) {
        if !domain.is_face(f) {
            return Err(ObservableError::FaceOutsideDomain(f));
        }
    }
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let d1 = sample_cover_stream(domain, seed, 2 * i)?;
            let d2 = sample_cover_stream(domain, seed, 2 * i + 1)?;
            let c = superimpose(&d1, &d2)?;
            let single_height = match reference {
                Some(r) => {
                    let s = superimpose(&d1, r)?;
                    faces.iter().map(|&f| s.height_at(f)).collect()
                }
                None => Vec::new(),
            };
            Ok(PointStats {
                nesting: faces.iter().map(|&f| c.nesting_number(&[f]).map(|k| k as u32)).collect::<Result<_, _>>()?,
                height: faces.iter().map(|&f| c.height_at(f)).collect(),
                pair_nesting: pairs.iter().map(|&(a, b)| c.nesting_number(&[a, b]).map(|k| k as u32)).collect::<Result<_, _>>()?,
                pair_height: pairs.iter().map(|&(a, b)| c.height_at(a) as i64 * c.height_at(b) as i64).collect(),
                single_height,
            })
        })
        .collect()
}

/// Half-plane scan setup: boxes of macroscopic half-width and height 1 (lattice size 1/δ),
/// observation point v = i·v_height, pair separations in lattice units around v.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HalfPlaneScan {
    pub deltas: Vec<f64>,
    pub n: usize,
    pub seed: u64,
    pub v_height: f64,
    pub separations: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleRow {
    pub delta: f64,
    pub vertices: usize,
    pub mean: StatReport,
    pub variance: f64,
    pub variance_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScaleRow>,
    pub mean_slope: f64,
    pub mean_slope_se: f64,
    pub var_slope: f64,
    pub var_slope_se: f64,
    /// KS of (N − mean)/sd at the finest δ
    pub ks_nesting: f64,
    /// KS of √(−2π²/log δ)·(h₁ − mean h₁) at the finest δ
    pub ks_single_height: f64,
    /// two-point fit at the finest δ, when separations were requested
    pub two_point: Option<TwoPointFit>,
}

/// Variance with a standard error from the fourth central moment.
fn variance_with_se(x: &[f64]) -> (f64, f64) {
    let w: Welford = x.iter().copied().collect();
    let n = x.len() as f64;
    let m4 = x.iter().map(|v| (v - w.mean()).powi(4)).sum::<f64>() / n;
    let var = w.variance();
    (var, ((m4 - var * var * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt())
}

pub fn halfplane_scan(spec: &HalfPlaneScan) -> Result<ScalingReport, ObservableError> {
    if spec.deltas.len() < 2 || spec.n < 4 {
        return Err(ObservableError::TooFewSamples(spec.n.min(spec.deltas.len())));
    }
    let mut deltas = spec.deltas.clone();
    deltas.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::new();
    let mut finest = None;
    for (k, &delta) in deltas.iter().enumerate() {
        let size = (1.0 / delta).round() as i32;
        let domain = Arc::new(LatticeDomain::build_halfplane_box(delta, size, size).map_err(|e| ObservableError::WindowMismatch(e.to_string()))?);
        let v = domain.face_at(Complex64::new(0.0, spec.v_height));
        let last = k + 1 == deltas.len();
        let pairs: Vec<(Site, Site)> = if last { spec.separations.iter().map(|&r| (v.offset(-r / 2, 0), v.offset(r - r / 2, 0))).collect() } else { Vec::new() };
        let reference = if last { Some(sample_cover_stream(&domain, spec.seed ^ 0x5eed, u64::MAX)?) } else { None };
        let stats = collect_point_statistics(&domain, &[v], &pairs, reference.as_ref(), spec.n, spec.seed.wrapping_add(k as u64))?;
        let ns: Vec<f64> = stats.iter().map(|s| s.nesting[0] as f64).collect();
        let w: Welford = ns.iter().copied().collect();
        let (variance, variance_se) = variance_with_se(&ns);
        rows.push(ScaleRow { delta, vertices: domain.vertex_count(), mean: w.report("nesting_mean"), variance, variance_se });
        if last {
            finest = Some((delta, stats, pairs));
        }
    }
    let lx: Vec<f64> = rows.iter().map(|r| -r.delta.ln()).collect();
    let (mean_slope, _, mean_slope_se) = weighted_linear_fit(&lx, &rows.iter().map(|r| r.mean.mean).collect::<Vec<_>>(), &rows.iter().map(|r| r.mean.stderr).collect::<Vec<_>>());
    let (var_slope, _, var_slope_se) = weighted_linear_fit(&lx, &rows.iter().map(|r| r.variance).collect::<Vec<_>>(), &rows.iter().map(|r| r.variance_se).collect::<Vec<_>>());
    let (delta, stats, pairs) = finest.expect("at least one scale");
    let ns: Vec<f64> = stats.iter().map(|s| s.nesting[0] as f64).collect();
    let h1: Vec<f64> = stats.iter().map(|s| s.single_height[0] as f64).collect();
    let h1_mean = h1.iter().sum::<f64>() / h1.len() as f64;
    let scale = (-2.0 * PI * PI / delta.ln()).sqrt();
    let h1_scaled: Vec<f64> = h1.iter().map(|h| scale * (h - h1_mean)).collect();
    let two_point = if pairs.len() >= 2 {
        let mut rows = Vec::new();
        for (j, &(x, y)) in pairs.iter().enumerate() {
            let hh: Welford = stats.iter().map(|s| s.pair_height[j] as f64).collect();
            let nn: Welford = stats.iter().map(|s| s.pair_nesting[j] as f64).collect();
            rows.push(TwoPointRow { separation: ((x.x - y.x) as f64).hypot((x.y - y.y) as f64), hh: hh.report("h_x_h_y"), nn: nn.report("n_xy") });
        }
        Some(two_point_fit_from_rows(rows))
    } else {
        None
    };
    Ok(ScalingReport { rows, mean_slope, mean_slope_se, var_slope, var_slope_se, ks_nesting: ks_to_normal(&ns), ks_single_height: ks_standard_normal(&h1_scaled), two_point })
}

fn two_point_fit_from_rows(rows: Vec<TwoPointRow>) -> TwoPointFit {
    let lx: Vec<f64> = rows.iter().map(|r| -r.separation.ln()).collect();
    let fit = |get: &dyn Fn(&TwoPointRow) -> &StatReport| {
        let y: Vec<f64> = rows.iter().map(|r| get(r).mean).collect();
        let sd: Vec<f64> = rows.iter().map(|r| get(r).stderr.max(1e-12)).collect();
        weighted_linear_fit(&lx, &y, &sd)
    };
    let (slope_h, _, slope_h_se) = fit(&|r| &r.hh);
    let (slope_n, _, slope_n_se) = fit(&|r| &r.nn);
    TwoPointFit { rows, slope_h, slope_h_se, slope_n, slope_n_se }
}
