//! Gamma function and the branch conventions for multivalued powers.

use std::f64::consts::PI;

use num_complex::Complex64;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Γ(x) for real x (Lanczos, g = 7, with reflection below 1/2). Poles return ±∞.
pub fn gamma(x: f64) -> f64 {
    if x < 0.5 {
        let s = (PI * x).sin();
        if s == 0.0 {
            return f64::INFINITY;
        }
        return PI / (s * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Direction of the branch cut of a logarithm centred at a puncture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutDirection {
    /// arg ∈ (−π/2, 3π/2]
    Down,
    /// arg ∈ (−3π/2, π/2]
    Up,
}

/// Logarithm with the cut along the given vertical ray from 0.
pub fn log_cut(z: Complex64, dir: CutDirection) -> Complex64 {
    let mut a = z.arg();
    match dir {
        CutDirection::Down => {
            if a <= -PI / 2.0 {
                a += 2.0 * PI;
            }
        }
        CutDirection::Up => {
            if a > PI / 2.0 {
                a -= 2.0 * PI;
            }
        }
    }
    Complex64::new(z.norm().ln(), a)
}

/// z^p with the cut along `dir`.
pub fn pow_cut(z: Complex64, p: f64, dir: CutDirection) -> Complex64 {
    (log_cut(z, dir) * p).exp()
}

/// z̄^p continued as the conjugate branch, i.e. exp(p·conj(log z)). Its monodromy around 0 is e^{−2πip}.
pub fn pow_conj_cut(z: Complex64, p: f64, dir: CutDirection) -> Complex64 {
    (log_cut(z, dir).conj() * p).exp()
}
