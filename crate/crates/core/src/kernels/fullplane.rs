//! Full-plane and half-plane inverse Kasteleyn kernels.
//!
//! With d = b − w = (x, y) and a(θ) = √(1+sin²θ) − sin θ, the translation-invariant inverse is
//! K⁻¹ = (1/π)∫₀^{π/2} sin(xθ) a^{|y|}/√(1+sin²θ) dθ for even y and
//! K⁻¹ = (−i·sgn y/π)∫₀^{π/2} cos(xθ) a^{|y|}/√(1+sin²θ) dθ for odd y.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{LazyLock, RwLock};

use num_complex::Complex64;
use quadrature::double_exponential;

use crate::lattice::{eta2, Site};

static CACHE: LazyLock<RwLock<HashMap<(i32, i32), Complex64>>> = LazyLock::new(|| RwLock::new(HashMap::new()));

fn integral(x: i32, y: i32) -> Complex64 {
    let ay = y.unsigned_abs() as i32;
    let xf = x as f64;
    let even = y % 2 == 0;
    let f = move |t: f64| {
        let s = t.sin();
        let r = (1.0 + s * s).sqrt();
        let g = (r - s).powi(ay) / r;
        if even {
            (xf * t).sin() * g
        } else {
            (xf * t).cos() * g
        }
    };
    let v = double_exponential::integrate(f, 0.0, FRAC_PI_2, 1e-16).integral / PI;
    if even {
        Complex64::new(v, 0.0)
    } else {
        Complex64::new(0.0, -(y.signum() as f64) * v)
    }
}

/// Full-plane K⁻¹(b, w) at unit mesh. Zero unless b is black and w white.
pub fn fullplane_kinv(b: Site, w: Site) -> Complex64 {
    if !b.is_black() || w.is_black() {
        return Complex64::new(0.0, 0.0);
    }
    let key = (b.x - w.x, b.y - w.y);
    if let Some(v) = CACHE.read().expect("cache lock").get(&key) {
        return *v;
    }
    let v = integral(key.0, key.1);
    CACHE.write().expect("cache lock").insert(key, v);
    v
}

/// K_δ⁻¹ = K⁻¹/δ.
pub fn fullplane_kinv_scaled(mesh: f64, b: Site, w: Site) -> Complex64 {
    fullplane_kinv(b, w) / mesh
}

/// K⁻¹ for the half-plane {y ≥ 1}: reflection through the row y = 0.
pub fn halfplane_kinv(b: Site, w: Site) -> Complex64 {
    fullplane_kinv(b, w) - eta2(b) * fullplane_kinv(b.conj(), w)
}

pub fn halfplane_kinv_scaled(mesh: f64, b: Site, w: Site) -> Complex64 {
    halfplane_kinv(b, w) / mesh
}

/// 1/(2π(b−w)) + (η_bη_w)²/(2π(b̄−w̄)).
pub fn kinv_main_term(b: Site, w: Site) -> Complex64 {
    let d = b.z() - w.z();
    let e = eta2(b) * eta2(w);
    (d.inv() + e * d.conj().inv()) / (2.0 * PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kasteleyn::edge_weight;

    #[test]
    fn edge_probability_is_one_quarter() {
        let w = Site::new(1, 0);
        for b in w.neighbors() {
            let p = edge_weight(w, b) * fullplane_kinv(b, w);
            assert!((p - Complex64::new(0.25, 0.0)).norm() < 1e-13, "{b:?}: {p}");
        }
    }

    #[test]
    fn inverts_k_on_a_window() {
        let w0 = Site::new(0, 1);
        for x in -6..=6 {
            for y in -6..=6 {
                let w = Site::new(x, y);
                if w.is_black() {
                    continue;
                }
                let s: Complex64 = w.neighbors().iter().map(|&b| edge_weight(w, b) * fullplane_kinv(b, w0)).sum();
                let target = if w == w0 { 1.0 } else { 0.0 };
                assert!((s - target).norm() < 1e-13, "{w:?}: {s}");
            }
        }
    }

    #[test]
    fn main_term_error_decays_like_inverse_square() {
        let w = Site::new(0, 1);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for r in [21, 41, 61, 81, 101] {
            let b = Site::new(r, 1);
            let err = (fullplane_kinv(b, w) - kinv_main_term(b, w)).norm();
            xs.push((r as f64).ln());
            ys.push(err.ln());
        }
        let (slope, _, _) = crate::linalg::fit::linear_fit(&xs, &ys);
        assert!(slope <= -1.8, "slope {slope}");
        let b = Site::new(101, 1);
        assert!((fullplane_kinv(b, w) - kinv_main_term(b, w)).norm() * 101.0f64.powi(2) < 1.0);
    }

    #[test]
    fn gauge_relation_at_zero_monodromy() {
        // K⁻¹ = η_b²η_w² conj(K⁻¹)
        for (b, w) in [(Site::new(3, 5), Site::new(0, 1)), (Site::new(-4, 2), Site::new(1, 3)), (Site::new(2, 0), Site::new(0, 7))] {
            let v = fullplane_kinv(b, w);
            assert!((v - eta2(b) * eta2(w) * v.conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn halfplane_inverse_and_image_suppression() {
        let w0 = Site::new(2, 3);
        for x in -5..=8 {
            for y in 1..=8 {
                let w = Site::new(x, y);
                if w.is_black() {
                    continue;
                }
                let s: Complex64 = w
                    .neighbors()
                    .iter()
                    .filter(|b| b.y >= 1)
                    .map(|&b| edge_weight(w, b) * halfplane_kinv(b, w0))
                    .sum();
                let target = if w == w0 { 1.0 } else { 0.0 };
                assert!((s - target).norm() < 1e-12, "{w:?}: {s}");
            }
        }
        // b next to the boundary, w deep in the bulk
        for (b, w) in [(Site::new(0, 2), Site::new(0, 11)), (Site::new(2, 2), Site::new(2, 21))] {
            assert!(halfplane_kinv(b, w).norm() < fullplane_kinv(b, w).norm());
        }
    }
}
