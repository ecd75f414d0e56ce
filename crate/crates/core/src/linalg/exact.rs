use num_complex::Complex;
use num_traits::Num;

/// Gaussian integer, the natural entry type of an unscaled Kasteleyn matrix.
pub type GaussInt = Complex<i128>;

/// Fraction-free (Bareiss) determinant over an integral domain with exact division.
pub fn bareiss_det<R: Num + Clone>(mut a: Vec<Vec<R>>) -> R {
    let n = a.len();
    if n == 0 {
        return R::one();
    }
    let mut negate = false;
    let mut prev = R::one();
    for k in 0..n - 1 {
        if a[k][k].is_zero() {
            match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                Some(i) => {
                    a.swap(i, k);
                    negate = !negate;
                }
                None => return R::zero(),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = a[i][j].clone() * a[k][k].clone() - a[i][k].clone() * a[k][j].clone();
                a[i][j] = v / prev.clone();
            }
        }
        prev = a[k][k].clone();
    }
    let d = a[n - 1][n - 1].clone();
    if negate {
        R::zero() - d
    } else {
        d
    }
}
