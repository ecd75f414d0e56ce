use num_traits::{Float, Zero};

use super::LinalgError;
use crate::scalar::{Cx, Real};

/// Matrix-free linear operator with an adjoint.
pub trait LinearOperator<T: Real> {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// y = A x
    fn apply(&self, x: &[Cx<T>], y: &mut [Cx<T>]);
    /// y = A* x
    fn apply_adjoint(&self, x: &[Cx<T>], y: &mut [Cx<T>]);
}

#[derive(Debug, Clone)]
pub struct CgnrOutcome<T: Real> {
    pub x: Vec<Cx<T>>,
    pub iterations: usize,
    /// ‖b − A x‖ / ‖b‖
    pub relative_residual: T,
    /// sqrt(λ_max/λ_min) of A*A from the Lanczos tridiagonal built by CG.
    pub condition_estimate: T,
}

fn norm2<T: Real>(v: &[Cx<T>]) -> T {
    v.iter().fold(T::zero(), |s, z| s + z.norm_sqr())
}

/// Conjugate gradients on the normal equations A*A x = A*b.
pub fn cgnr<T: Real, Op: LinearOperator<T>>(
    op: &Op,
    b: &[Cx<T>],
    x0: Option<&[Cx<T>]>,
    tol: T,
    max_iter: usize,
) -> Result<CgnrOutcome<T>, LinalgError> {
    let (m, n) = (op.nrows(), op.ncols());
    if b.len() != m {
        return Err(LinalgError::Dimension(format!("rhs has {} entries, operator has {} rows", b.len(), m)));
    }
    let mut x = match x0 {
        Some(v) => v.to_vec(),
        None => vec![Cx::zero(); n],
    };
    let bnorm = Float::sqrt(norm2(b));
    if bnorm.is_zero() {
        return Ok(CgnrOutcome { x: vec![Cx::zero(); n], iterations: 0, relative_residual: T::zero(), condition_estimate: T::one() });
    }
    let mut r = b.to_vec();
    let mut w = vec![Cx::zero(); m];
    op.apply(&x, &mut w);
    for (ri, wi) in r.iter_mut().zip(&w) {
        *ri = *ri - *wi;
    }
    let mut z = vec![Cx::zero(); n];
    op.apply_adjoint(&r, &mut z);
    let mut p = z.clone();
    let mut zz = norm2(&z);
    let mut diag: Vec<T> = Vec::new();
    let mut off: Vec<T> = Vec::new();
    let mut prev_alpha = T::zero();
    let mut prev_beta = T::zero();
    let mut it = 0;
    let mut rel = Float::sqrt(norm2(&r)) / bnorm;
    while rel > tol && it < max_iter {
        op.apply(&p, &mut w);
        let ww = norm2(&w);
        if ww.is_zero() || zz.is_zero() {
            break;
        }
        let alpha = zz / ww;
        for (xi, pi) in x.iter_mut().zip(&p) {
            *xi = *xi + *pi * alpha;
        }
        for (ri, wi) in r.iter_mut().zip(&w) {
            *ri = *ri - *wi * alpha;
        }
        op.apply_adjoint(&r, &mut z);
        let zz_new = norm2(&z);
        let beta = zz_new / zz;
        let d = if it == 0 { T::one() / alpha } else { T::one() / alpha + prev_beta / prev_alpha };
        diag.push(d);
        if it > 0 {
            off.push(Float::sqrt(prev_beta) / prev_alpha);
        }
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = *zi + *pi * beta;
        }
        prev_alpha = alpha;
        prev_beta = beta;
        zz = zz_new;
        it += 1;
        rel = Float::sqrt(norm2(&r)) / bnorm;
    }
    let cond = if diag.is_empty() {
        T::one()
    } else {
        let (lo, hi) = tridiagonal_extreme_eigenvalues(&diag, &off);
        if lo <= T::zero() {
            <T as Float>::infinity()
        } else {
            Float::sqrt(hi / lo)
        }
    };
    if !(rel <= tol) {
        return Err(LinalgError::NoConvergence { residual: rel.to_f64().unwrap_or(f64::NAN), iterations: it });
    }
    Ok(CgnrOutcome { x, iterations: it, relative_residual: rel, condition_estimate: cond })
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix (Sturm count).
fn sturm_count<T: Real>(diag: &[T], off: &[T], x: T) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < T::zero() {
        count += 1;
    }
    for i in 1..diag.len() {
        let e = off[i - 1];
        let denom = if q.is_zero() { T::lit(1e-300) } else { q };
        q = diag[i] - x - e * e / denom;
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

/// Smallest and largest eigenvalue of a symmetric tridiagonal matrix by bisection.
pub fn tridiagonal_extreme_eigenvalues<T: Real>(diag: &[T], off: &[T]) -> (T, T) {
    let n = diag.len();
    let mut lo = <T as Float>::infinity();
    let mut hi = <T as Float>::neg_infinity();
    for i in 0..n {
        let r = (if i > 0 { Float::abs(off[i - 1]) } else { T::zero() })
            + (if i + 1 < n { Float::abs(off[i]) } else { T::zero() });
        lo = Float::min(lo, diag[i] - r);
        hi = Float::max(hi, diag[i] + r);
    }
    let bisect = |k: usize| {
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = (a + b) / T::lit(2.0);
            if sturm_count(diag, off, mid) > k {
                b = mid;
            } else {
                a = mid;
            }
        }
        (a + b) / T::lit(2.0)
    };
    (bisect(0), bisect(n - 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Diag(Vec<Cx<f64>>);
    impl LinearOperator<f64> for Diag {
        fn nrows(&self) -> usize {
            self.0.len()
        }
        fn ncols(&self) -> usize {
            self.0.len()
        }
        fn apply(&self, x: &[Cx<f64>], y: &mut [Cx<f64>]) {
            for i in 0..x.len() {
                y[i] = self.0[i] * x[i];
            }
        }
        fn apply_adjoint(&self, x: &[Cx<f64>], y: &mut [Cx<f64>]) {
            for i in 0..x.len() {
                y[i] = self.0[i].conj() * x[i];
            }
        }
    }

    #[test]
    fn solves_diagonal_and_estimates_condition() {
        let d: Vec<Cx<f64>> = (1..=10).map(|k| Cx::new(0.0, k as f64)).collect();
        let op = Diag(d);
        let b = vec![Cx::new(1.0, 0.0); 10];
        let out = cgnr(&op, &b, None, 1e-13, 100).unwrap();
        assert!((out.x[3] - Cx::new(0.0, -0.25)).norm() < 1e-12);
        assert!((out.condition_estimate - 10.0).abs() < 1e-6);
    }

    #[test]
    fn tridiagonal_eigs() {
        let (lo, hi) = tridiagonal_extreme_eigenvalues(&[2.0, 2.0, 2.0], &[-1.0, -1.0]);
        assert!((lo - (2.0 - 2f64.sqrt())).abs() < 1e-10);
        assert!((hi - (2.0 + 2f64.sqrt())).abs() < 1e-10);
    }
}
