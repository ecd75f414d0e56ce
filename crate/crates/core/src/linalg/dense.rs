use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use super::LinalgError;
use crate::scalar::{Cx, Real};

/// Relative pivot size below which a factorization is reported singular.
pub const PIVOT_THRESHOLD: f64 = 1e-14;

pub type CMatrix<T> = DMatrix<Cx<T>>;

/// LU factorization with partial pivoting of a square complex matrix.
pub struct ComplexLu<T: Real> {
    lu: nalgebra::LU<Cx<T>, nalgebra::Dyn, nalgebra::Dyn>,
    n: usize,
    min_pivot: T,
    scale: T,
}

impl<T: Real> ComplexLu<T> {
    pub fn new(a: CMatrix<T>) -> Result<Self, LinalgError> {
        if a.nrows() != a.ncols() {
            return Err(LinalgError::Dimension(format!("{}x{} is not square", a.nrows(), a.ncols())));
        }
        let n = a.nrows();
        let scale = a.iter().fold(T::zero(), |m, z| Float::max(m, z.norm()));
        let lu = a.lu();
        let mut min_pivot = <T as Float>::infinity();
        let mut col = 0;
        {
            let u = lu.u();
            for i in 0..n {
                let p = u[(i, i)].norm();
                if p < min_pivot {
                    min_pivot = p;
                    col = i;
                }
            }
        }
        let f = Self { lu, n, min_pivot, scale };
        if n > 0 && (f.scale.is_zero() || f.min_pivot <= T::lit(PIVOT_THRESHOLD) * f.scale) {
            return Err(LinalgError::Singular { pivot: f.min_pivot.to_f64().unwrap_or(0.0), column: col });
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn det(&self) -> Cx<T> {
        self.lu.determinant()
    }

    pub fn solve(&self, b: &[Cx<T>]) -> Vec<Cx<T>> {
        let v = DVector::from_column_slice(b);
        self.lu.solve(&v).expect("factorization checked nonsingular").as_slice().to_vec()
    }

    pub fn solve_matrix(&self, b: &CMatrix<T>) -> CMatrix<T> {
        self.lu.solve(b).expect("factorization checked nonsingular")
    }

    pub fn inverse(&self) -> CMatrix<T> {
        self.lu.try_inverse().expect("factorization checked nonsingular")
    }

    /// Ratio of smallest pivot to the largest matrix entry.
    pub fn pivot_ratio(&self) -> T {
        if self.scale.is_zero() {
            T::zero()
        } else {
            self.min_pivot / self.scale
        }
    }
}

/// Determinant that reports exact zero for singular inputs instead of an error.
pub fn det_or_zero<T: Real>(a: CMatrix<T>) -> Cx<T> {
    if a.nrows() == 0 {
        return Cx::new(T::one(), T::zero());
    }
    match ComplexLu::new(a.clone()) {
        Ok(lu) => lu.det(),
        Err(_) => a.lu().determinant(),
    }
}

pub fn max_abs_deviation_from_identity<T: Real>(m: &CMatrix<T>) -> T {
    let mut worst = T::zero();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let target = if i == j { T::one() } else { T::zero() };
            let d = (m[(i, j)] - Cx::new(target, T::zero())).norm();
            worst = Float::max(worst, d);
        }
    }
    worst
}
