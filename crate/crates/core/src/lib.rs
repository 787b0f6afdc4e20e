//! Numerical engine for the noncommutative 2-torus `A_α` and its Anzai
//! skew-products `Φ_{θ,f}`: exact twisted-polynomial algebra, cocycle
//! iteration by binary doubling, weighted Cesaro averages, GNS spectral
//! measures, cohomological-equation diagnostics, classical cross-checks, and
//! the Liouville-angle non-convergence construction.

pub mod angle;
pub mod anzai;
pub mod circle;
pub mod classical;
pub mod cohomology;
pub mod counterexample;
pub mod gns;
pub mod linalg;
pub mod special;
pub mod torus;

pub use angle::Angle;
pub use num_complex::Complex64;
