//! Double-dimer loops on the square lattice: Kasteleyn operators with monodromy, exact samplers
//! and oracles, kernel asymptotics, determinant formulas and nesting statistics.

pub mod lattice;
pub mod linalg;
pub mod scalar;
pub mod kasteleyn;
pub mod kernels;
pub mod sampler;
pub mod oracle;
pub mod determinants;
pub mod observables;
pub mod cle_reference;

pub use scalar::{Cx, Real};

pub type Complex64 = num_complex::Complex64;
pub type KasteleynF64 = kasteleyn::KasteleynOperator<f64>;
pub type KasteleynF32 = kasteleyn::KasteleynOperator<f32>;
pub type DenseLuF64 = linalg::dense::ComplexLu<f64>;
