//! Closed-form reference asymptotics for monodromy inverses.
//!
//! Positions are taken relative to the puncture (a face centre). Multivalued powers use the
//! logarithm whose cut runs along the monodromy cut: straight down from a single puncture, and
//! along the vertical segment v → v̄ for a conjugate pair.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::special::{gamma, log_cut, pow_conj_cut, pow_cut, CutDirection};
use super::{fullplane_kinv, KernelError};
use crate::lattice::{eta2, face_center, CutPath, Site};

type C = Complex64;

fn unit_phase(s: f64, k: i32) -> C {
    C::from_polar(1.0, 2.0 * PI * s * k as f64)
}

/// Coefficient of z^{s−1} in the refined expansion of f_s (s > 0).
pub fn f_correction(s: f64) -> C {
    if s <= 0.0 {
        return C::new(0.0, 0.0);
    }
    C::from_polar(2f64.powf(s) / 2f64.sqrt(), PI / 4.0) * (gamma(1.0 - s) / gamma(s))
}

/// Main term of f_s at relative position z with relative η² = `e2`, including the z^{s−1}
/// correction for s > 0. Negative s uses f_{−s} = η²·conj(g_s).
pub fn f_main(s: f64, z: C, e2: f64, dir: CutDirection) -> C {
    if s >= 0.0 {
        e2 * pow_conj_cut(z, -s, dir) + f_correction(s) * pow_cut(z, s - 1.0, dir)
    } else {
        e2 * g_main(-s, z, e2, dir).conj()
    }
}

/// Main term of g_s; negative s uses g_{−s} = η²·conj(f_s).
pub fn g_main(s: f64, z: C, e2: f64, dir: CutDirection) -> C {
    if s >= 0.0 {
        pow_cut(z, s, dir)
    } else {
        e2 * f_main(-s, z, e2, dir).conj()
    }
}

/// Single puncture at a face centre, cut straight down.
#[derive(Debug, Clone, Copy)]
pub struct OnePuncture {
    pub face: Site,
    pub s: f64,
}

impl OnePuncture {
    /// The puncture face must have black lower-left and upper-right corners.
    pub fn new(face: Site, s: f64) -> Result<Self, KernelError> {
        if !face.is_black() {
            return Err(KernelError::Invalid(format!("face {face:?} has a white lower-left corner")));
        }
        Ok(OnePuncture { face, s })
    }

    pub fn centre(&self) -> C {
        face_center(self.face)
    }
    pub fn rel(&self, u: Site) -> C {
        u.z() - self.centre()
    }
    /// η² in the puncture-centred convention (1 iff Im(u − centre) ∈ 2Z + 1/2).
    pub fn eta2_rel(&self, u: Site) -> f64 {
        if (u.y - self.face.y - 1).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        }
    }
    fn log(&self, u: Site) -> C {
        log_cut(self.rel(u), CutDirection::Down)
    }
    /// b₀ (upper-right) and b₀† (lower-left) corners of the puncture face.
    pub fn puncture_blacks(&self) -> (Site, Site) {
        (self.face.offset(1, 1), self.face)
    }
    /// The white corner whose relative position is (−1+i)/2.
    pub fn w0(&self) -> Site {
        self.face.offset(0, 1)
    }

    /// χ for the downward ray: e^{2πis} if the segment u1→u2 crosses from right (west) to left.
    pub fn chi(&self, u1: Site, u2: Site) -> C {
        let c = self.centre();
        let (x1, x2) = (u1.x as f64 - c.re, u2.x as f64 - c.re);
        if x1.signum() == x2.signum() {
            return C::new(1.0, 0.0);
        }
        let t = x1 / (x1 - x2);
        let y = u1.y as f64 + t * (u2.y - u1.y) as f64;
        if y >= c.im {
            return C::new(1.0, 0.0);
        }
        unit_phase(self.s, if x1 < 0.0 { 1 } else { -1 })
    }

    pub fn f(&self, u: Site) -> C {
        f_main(self.s, self.rel(u), self.eta2_rel(u), CutDirection::Down)
    }
    pub fn g(&self, u: Site) -> C {
        g_main(self.s, self.rel(u), self.eta2_rel(u), CutDirection::Down)
    }
    /// Exact values at b₀, b₀†: f = Γ(1−s)η²b̄^{−s}, g = Γ(1+s)b^s.
    pub fn f_at_puncture(&self, b: Site) -> C {
        gamma(1.0 - self.s) * self.eta2_rel(b) * pow_conj_cut(self.rel(b), -self.s, CutDirection::Down)
    }
    pub fn g_at_puncture(&self, b: Site) -> C {
        gamma(1.0 + self.s) * pow_cut(self.rel(b), self.s, CutDirection::Down)
    }

    /// Kinv[s](b,w) = (b/w)^s/(2π(b−w)) + (η_bη_w)²(w̄/b̄)^s/(2π(b̄−w̄)).
    pub fn kinv_s(&self, b: Site, w: Site) -> C {
        let s = self.s;
        let d = self.rel(b) - self.rel(w);
        let (lb, lw) = (self.log(b), self.log(w));
        let e = eta2(b) * eta2(w);
        ((lb - lw) * s).exp() / (2.0 * PI * d) + e * ((lw.conj() - lb.conj()) * s).exp() / (2.0 * PI * d.conj())
    }

    /// χ(w,b)⁻¹·(K⁻¹(b,w) + (s/2π)[1/w − (η_bη_w)²/w̄]).
    pub fn kinv_near_diagonal(&self, b: Site, w: Site) -> C {
        let zw = self.rel(w);
        let e = eta2(b) * eta2(w);
        let corr = self.s / (2.0 * PI) * (zw.inv() - e * zw.conj().inv());
        (fullplane_kinv(b, w) + corr) / self.chi(w, b)
    }

    /// −g_s(b)/(2π w^{1+s}) − η_w² f_s(b)/(2π w̄^{1−s}).
    pub fn kinv_near_zero(&self, b: Site, w: Site) -> C {
        let s = self.s;
        let lw = self.log(w);
        -self.g(b) / (2.0 * PI * (lw * (1.0 + s)).exp()) - self.eta2_rel(w) * self.f(b) / (2.0 * PI * (lw.conj() * (1.0 - s)).exp())
    }

    /// Γ-weighted main term of K_s⁻¹(b, w₀) for the white w₀ at relative position (−1+i)/2.
    pub fn kinv_at_w0(&self, b: Site) -> C {
        let s = self.s;
        let w = self.w0();
        let d = self.rel(b) - self.rel(w);
        let (lb, lw) = (self.log(b), self.log(w));
        let e = eta2(b) * eta2(w);
        gamma(1.0 - s) * ((lb - lw) * s).exp() / (2.0 * PI * d) + gamma(1.0 + s) * e * ((lw.conj() - lb.conj()) * s).exp() / (2.0 * PI * d.conj())
    }

    /// Piecewise approximate inverse: near the puncture, near the diagonal, or far.
    pub fn parametrix(&self, b: Site, w: Site) -> C {
        let (zb, zw) = (self.rel(b), self.rel(w));
        let rw = zw.norm();
        if (zb - zw).norm() <= rw.powf(0.75) {
            self.kinv_near_diagonal(b, w)
        } else if zb.norm() <= rw.sqrt() {
            self.kinv_near_zero(b, w)
        } else {
            self.kinv_s(b, w)
        }
    }
}

/// Which closed-form piece the two-puncture parametrix used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Far,
    NearV,
    NearVBar,
    NearDiagonal,
    BWNearV,
    BNearVBarWNearV,
    WNearV,
    BWNearVBar,
    BNearVWNearVBar,
    WNearVBar,
}

/// Conjugate pair of punctures v (upper half-plane, monodromy e^{2πis}) and v̄, joined by the
/// vertical cut v → v̄.
#[derive(Debug, Clone, Copy)]
pub struct TwoPuncture {
    pub face: Site,
    pub s: f64,
    pub a: f64,
}

impl TwoPuncture {
    pub fn new(face: Site, s: f64, a: f64) -> Result<Self, KernelError> {
        if face.y < 0 {
            return Err(KernelError::RegimeUndefined("puncture must lie in the upper half-plane".into()));
        }
        if !face.is_black() {
            return Err(KernelError::Invalid(format!("face {face:?} has a white lower-left corner")));
        }
        Ok(TwoPuncture { face, s, a })
    }
    pub fn v(&self) -> C {
        face_center(self.face)
    }
    pub fn vbar_face(&self) -> Site {
        Site::new(self.face.x, -self.face.y - 1)
    }
    pub fn im_v(&self) -> f64 {
        self.v().im
    }
    pub fn cut(&self) -> CutPath {
        CutPath::between_faces(self.face, self.vbar_face())
    }
    pub fn radii(&self) -> (f64, f64, f64) {
        let y = self.im_v();
        (y.powf(1.0 - 10.0 * self.a), y.powf(1.0 - 3.0 * self.a), y.powf(1.0 - self.a))
    }
    fn one(&self) -> OnePuncture {
        OnePuncture { face: self.face, s: self.s }
    }
    /// Relative η² convention of the puncture v (equals the global η² when the face row is odd).
    fn kappa(&self, u: Site) -> f64 {
        eta2(u) * self.one().eta2_rel(u)
    }

    /// Multiplicative gauge E(z) = ((z−v)/(z−v̄))^s, cut along the segment.
    fn gauge(&self, z: C) -> C {
        let (v, vb) = (self.v(), self.v().conj());
        ((log_cut(z - v, CutDirection::Down) - log_cut(z - vb, CutDirection::Down)) * self.s).exp()
    }

    /// D_{s,−s}(b,w) = E(b)/(2π(b−w)E(w)) + (η_bη_w)² conj(E(w))/(2π(b̄−w̄) conj(E(b))).
    pub fn continuum(&self, b: Site, w: Site) -> C {
        let (zb, zw) = (b.z(), w.z());
        let (eb, ew) = (self.gauge(zb), self.gauge(zw));
        let e = eta2(b) * eta2(w);
        eb / (2.0 * PI * (zb - zw) * ew) + e * ew.conj() / (2.0 * PI * (zb - zw).conj() * eb.conj())
    }

    /// (C_{b≈w}, C*_{b≈w}) with the η_w² inside C*.
    pub fn coeff_near_diagonal(&self, w: Site) -> (C, C) {
        let (s, y, x) = (self.s, self.im_v(), self.v().re);
        let zw = w.z();
        let pre = C::new(0.0, s * y / PI);
        (pre / ((zw - x) * (zw - x) + y * y), pre * eta2(w) / ((zw.conj() - x) * (zw.conj() - x) + y * y))
    }

    /// (C_{b≈v}, C*_{b≈v}): coefficients of g_s(b−v) and f_s(b−v).
    pub fn coeff_near_v(&self, b: Site, w: Site) -> (C, C) {
        let (s, v) = (self.s, self.v());
        let ev = (-log_cut(v - v.conj(), CutDirection::Down) * s).exp();
        let ew = self.gauge(w.z());
        let c = ev / (2.0 * PI * (v - w.z()) * ew);
        let cs = self.kappa(b) * eta2(w) * ew.conj() / (2.0 * PI * (v - w.z()).conj() * ev.conj());
        (c, cs)
    }

    /// (C_{b≈v,w≈v̄}, C*_{b≈v,w≈v̄}) for g_s(w−v̄)g_s(b−v) and f_s(w−v̄)f_s(b−v).
    pub fn coeff_v_vbar(&self, b: Site, w: Site) -> (C, C) {
        let (s, y) = (self.s, self.im_v());
        let kb = self.kappa(b);
        let kw = self.kappa_vbar(w);
        (C::new(0.0, -1.0) * (2.0 * y).powf(-2.0 * s - 1.0) / (2.0 * PI), kb * kw * C::new(0.0, 1.0) * (2.0 * y).powf(2.0 * s - 1.0) / (2.0 * PI))
    }

    /// (C_{b≈w≈v}, C*_{b≈w≈v}) = (si/(4π Im v), si/(4π Im v)).
    pub fn coeff_bw_near_v(&self) -> C {
        C::new(0.0, self.s / (4.0 * PI * self.im_v()))
    }

    fn eta2_rel_vbar(&self, u: Site) -> f64 {
        let f = self.vbar_face();
        if (u.y - f.y - 1).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        }
    }
    fn kappa_vbar(&self, u: Site) -> f64 {
        eta2(u) * self.eta2_rel_vbar(u)
    }
    fn rel_v(&self, u: Site) -> C {
        u.z() - self.v()
    }
    fn rel_vbar(&self, u: Site) -> C {
        u.z() - self.v().conj()
    }

    /// Kinv[b≈v](b,w).
    pub fn kinv_near_v(&self, b: Site, w: Site) -> C {
        let (c, cs) = self.coeff_near_v(b, w);
        let one = self.one();
        c * one.g(b) + cs * one.f(b)
    }

    /// Kinv[b≈w](b,w) = χ(w,b)⁻¹(K⁻¹(b,w) + C_{b≈w} + η_b² C*_{b≈w}).
    pub fn kinv_near_diagonal(&self, b: Site, w: Site) -> C {
        let (c, cs) = self.coeff_near_diagonal(w);
        let chi = match self.cut().segment_crossings(w, b) {
            (k, _) => unit_phase(self.s, k),
        };
        (fullplane_kinv(b, w) + c + eta2(b) * cs) / chi
    }

    /// Kinv[w≈v](b,w): the far form with the w-dependence near v replaced by g_{−s}, f_{−s}.
    pub fn kinv_w_near_v(&self, b: Site, w: Site) -> C {
        let s = self.s;
        let (zb, zw) = (b.z(), w.z());
        let vb = self.v().conj();
        let eb = self.gauge(zb);
        let lw = log_cut(zw - vb, CutDirection::Down);
        let one = self.one();
        let t1 = eb * (lw * s).exp() / (2.0 * PI * (zb - zw)) * one.g_neg(w);
        let t2 = eta2(b) * self.kappa(w) * one.f_neg(w) * (-lw.conj() * s).exp() / (2.0 * PI * (zb - zw).conj() * eb.conj());
        t1 + t2
    }

    /// Kinv[b≈w≈v](b,w) with the one-puncture kernel at v approximated by its parametrix.
    pub fn kinv_bw_near_v(&self, b: Site, w: Site) -> C {
        let one = self.one();
        let c = self.coeff_bw_near_v();
        let kb = self.kappa(b);
        let kw = self.kappa(w);
        one.parametrix(b, w) + c * one.g_neg(w) * one.g(b) + c * kb * kw * one.f_neg(w) * one.f(b)
    }

    /// Kinv[b≈v,w≈v̄](b,w); near v̄ the cut runs upward.
    pub fn kinv_b_near_v_w_near_vbar(&self, b: Site, w: Site) -> C {
        let (c, cs) = self.coeff_v_vbar(b, w);
        let one = self.one();
        let (zw, e2w) = (self.rel_vbar(w), self.eta2_rel_vbar(w));
        c * g_main(self.s, zw, e2w, CutDirection::Up) * one.g(b) + cs * f_main(self.s, zw, e2w, CutDirection::Up) * one.f(b)
    }

    /// Regime selection of the two-puncture parametrix.
    pub fn regime(&self, b: Site, w: Site) -> Result<Regime, KernelError> {
        if !b.is_black() || w.is_black() {
            return Err(KernelError::Invalid("expected a black b and a white w".into()));
        }
        let (r1, r2, r3) = self.radii();
        let (dbv, dbvb) = (self.rel_v(b).norm(), self.rel_vbar(b).norm());
        let (dwv, dwvb) = (self.rel_v(w).norm(), self.rel_vbar(w).norm());
        if dbv.min(dbvb).min(dwv).min(dwvb) < 0.5 || self.im_v() < 0.5 {
            return Err(KernelError::RegimeUndefined("marked points coincide".into()));
        }
        Ok(if dwv > r2 && dwvb > r2 {
            if dbv <= r1 {
                Regime::NearV
            } else if dbvb <= r1 {
                Regime::NearVBar
            } else if (b.z() - w.z()).norm() <= r1 {
                Regime::NearDiagonal
            } else {
                Regime::Far
            }
        } else if dwv <= r2 {
            if dbv <= r3 {
                Regime::BWNearV
            } else if dbvb <= r3 {
                Regime::BNearVBarWNearV
            } else {
                Regime::WNearV
            }
        } else if dbvb <= r3 {
            Regime::BWNearVBar
        } else if dbv <= r3 {
            Regime::BNearVWNearVBar
        } else {
            Regime::WNearVBar
        })
    }

    /// The parametrix S_{s,−s}(b,w). Regimes around v̄ use the exact reflection symmetry
    /// K⁻¹(b,w) = η_b²η_w² K⁻¹(b̄,w̄).
    pub fn parametrix(&self, b: Site, w: Site) -> Result<C, KernelError> {
        let refl = |f: &dyn Fn(Site, Site) -> C| eta2(b) * eta2(w) * f(b.conj(), w.conj());
        Ok(match self.regime(b, w)? {
            Regime::Far => self.continuum(b, w),
            Regime::NearV => self.kinv_near_v(b, w),
            Regime::NearVBar => refl(&|b, w| self.kinv_near_v(b, w)),
            Regime::NearDiagonal => self.kinv_near_diagonal(b, w),
            Regime::BWNearV => self.kinv_bw_near_v(b, w),
            Regime::BNearVBarWNearV => refl(&|b, w| self.kinv_b_near_v_w_near_vbar(b, w)),
            Regime::WNearV => self.kinv_w_near_v(b, w),
            Regime::BWNearVBar => refl(&|b, w| self.kinv_bw_near_v(b, w)),
            Regime::BNearVWNearVBar => self.kinv_b_near_v_w_near_vbar(b, w),
            Regime::WNearVBar => refl(&|b, w| self.kinv_w_near_v(b, w)),
        })
    }
}

impl OnePuncture {
    /// g_{−s} at a white (or black) vertex.
    pub fn g_neg(&self, u: Site) -> C {
        g_main(-self.s, self.rel(u), self.eta2_rel(u), CutDirection::Down)
    }
    pub fn f_neg(&self, u: Site) -> C {
        f_main(-self.s, self.rel(u), self.eta2_rel(u), CutDirection::Down)
    }
}
