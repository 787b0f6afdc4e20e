//! The GNS representation of (A_α, τ): finite-support vectors on the ℤ²
//! lattice of basis vectors e_{mn} = π_τ(U^mVⁿ)ξ_τ, the Koopman isometry of
//! an Anzai skew-product, correlation sequences, and spectral-measure
//! estimation (Wiener atom masses and Fejér densities).
//!
//! Finite-support vectors are identified with their NcPoly coordinates;
//! the basis {e_{mn}} is orthonormal, so norms and inner products are exact
//! coefficient sums.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::anzai::{AnzaiError, AnzaiMap, FourierPolicy};
use crate::linalg::hermitian_min_eig;
use crate::torus::{AlgebraError, NcPoly};

const TWO_PI: f64 = std::f64::consts::TAU;

#[derive(Debug, Error)]
pub enum GnsError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Anzai(#[from] AnzaiError),
    #[error("the vector must be nonzero")]
    ZeroVector,
    #[error("correlation horizon {0} is too short")]
    HorizonTooShort(usize),
}

/// A finitely supported vector Σ c_{m,n} e_{m,n} in H_τ ≅ ℓ²(ℤ²).
#[derive(Clone, Debug)]
pub struct GnsVector {
    poly: NcPoly,
}

impl GnsVector {
    /// The cyclic trace vector ξ_τ.
    pub fn vacuum(alpha: f64) -> Self {
        GnsVector { poly: NcPoly::one(alpha) }
    }

    /// The basis vector e_{m,n}.
    pub fn basis(alpha: f64, m: i64, n: i64) -> Self {
        GnsVector { poly: NcPoly::monomial(alpha, m, n, C64::new(1.0, 0.0)) }
    }

    pub fn from_poly(poly: NcPoly) -> Self {
        GnsVector { poly }
    }

    pub fn poly(&self) -> &NcPoly {
        &self.poly
    }

    pub fn alpha(&self) -> f64 {
        self.poly.alpha()
    }

    pub fn norm_sq(&self) -> f64 {
        self.poly.gns_norm_sq()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn inner(&self, other: &GnsVector) -> Result<C64, GnsError> {
        Ok(self.poly.gns_inner(&other.poly)?)
    }

    pub fn add(&self, other: &GnsVector) -> Result<GnsVector, GnsError> {
        Ok(GnsVector { poly: self.poly.add(&other.poly)? })
    }

    pub fn sub(&self, other: &GnsVector) -> Result<GnsVector, GnsError> {
        Ok(GnsVector { poly: self.poly.sub(&other.poly)? })
    }

    pub fn scale(&self, c: C64) -> GnsVector {
        GnsVector { poly: self.poly.scale(c) }
    }
}

/// π_τ(x)ξ: the left action of the algebra on a finite-support vector.
pub fn act(x: &NcPoly, xi: &GnsVector) -> Result<GnsVector, GnsError> {
    Ok(GnsVector { poly: x.mul(&xi.poly)? })
}

/// The Koopman isometry power V^k_{τ,Φ} applied to a finite-support vector.
pub fn koopman(map: &AnzaiMap, xi: &GnsVector, k: i64) -> Result<GnsVector, GnsError> {
    Ok(GnsVector { poly: map.apply_iter(&xi.poly, k)? })
}

/// ‖V_Φ ξ − λξ‖ / ‖ξ‖: how far ξ is from being a λ-eigenvector.
pub fn eigen_residual(map: &AnzaiMap, xi: &GnsVector, lambda: C64) -> Result<f64, GnsError> {
    let n = xi.norm();
    if n == 0.0 {
        return Err(GnsError::ZeroVector);
    }
    let moved = koopman(map, xi, 1)?;
    Ok(moved.sub(&xi.scale(lambda))?.norm() / n)
}

/// The correlation sequence μ̂_ξ(n) = ⟨V^n ξ, ξ⟩ for n = 0..=horizon,
/// the Fourier transform of the spectral measure of ξ.
#[derive(Clone, Debug)]
pub struct CorrSeq {
    values: Vec<C64>,
}

impl CorrSeq {
    pub fn from_values(values: Vec<C64>) -> Self {
        CorrSeq { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// μ̂(n), with μ̂(−n) = conj(μ̂(n)).
    pub fn value(&self, n: i64) -> C64 {
        if n >= 0 {
            self.values[n as usize]
        } else {
            self.values[(-n) as usize].conj()
        }
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    /// Minimum eigenvalue of the (k+1)×(k+1) Toeplitz matrix [μ̂(i−j)];
    /// must be ≥ −1e-8 for any honest correlation sequence.
    pub fn toeplitz_min_eig(&self, k: usize) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        let k = k.min(self.values.len() - 1);
        let n = k + 1;
        let mut a = vec![vec![C64::new(0.0, 0.0); n]; n];
        for i in 0..n {
            for j in 0..n {
                a[i][j] = self.value(i as i64 - j as i64);
            }
        }
        hermitian_min_eig(&a, 1e-10)
    }
}

/// Stream μ̂_ξ(n) = ⟨V^n ξ, ξ⟩ for n ≤ horizon with one diagonal multiply
/// per mode per step.
pub fn correlation(map: &AnzaiMap, xi: &GnsVector, horizon: usize)
    -> Result<CorrSeq, GnsError>
{
    if xi.norm_sq() == 0.0 {
        return Err(GnsError::ZeroVector);
    }
    let grid = match map.policy() {
        FourierPolicy::Grid { grid, .. } => grid,
        FourierPolicy::Sparse { .. } => 4096,
    };
    let all: Vec<usize> = (0..grid).collect();
    let mut streams = map.streams_for(&xi.poly, C64::new(1.0, 0.0), grid, &all)?;
    // conj samples of each reference mode, scaled by 1/G
    let refs: Vec<Vec<C64>> = streams
        .iter()
        .map(|s| {
            xi.poly
                .coeff_fn(s.mode)
                .eval_on_grid(grid)
                .into_iter()
                .map(|v| v.conj() / grid as f64)
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(horizon + 1);
    let mut buf = Vec::with_capacity(grid);
    for _ in 0..=horizon {
        let mut acc = C64::new(0.0, 0.0);
        let mut comp = C64::new(0.0, 0.0);
        for (s, r) in streams.iter().zip(&refs) {
            s.current_values(&mut buf);
            for (v, c) in buf.iter().zip(r) {
                let y = v * c - comp;
                let t = acc + y;
                comp = (t - acc) - y;
                acc = t;
            }
        }
        values.push(acc);
        for s in streams.iter_mut() {
            s.advance();
        }
    }
    Ok(CorrSeq { values })
}

/// A Wiener-average estimate of the spectral-measure point mass at λ.
#[derive(Clone, Debug)]
pub struct AtomMass {
    pub mass: f64,
    /// Running averages at dyadic checkpoints (N, W_N).
    pub trace: Vec<(usize, C64)>,
}

impl AtomMass {
    /// Detection heuristic: mass above 0.01 with the last three dyadic
    /// checkpoints varying by less than 20% relatively.
    pub fn is_atom(&self) -> bool {
        if self.mass <= 0.01 || self.trace.len() < 3 {
            return false;
        }
        let tail = &self.trace[self.trace.len() - 3..];
        tail.windows(2).all(|w| {
            let a = w[0].1.norm();
            let b = w[1].1.norm();
            (a - b).abs() <= 0.2 * a.max(b).max(1e-300)
        })
    }
}

/// Estimate μ_ξ({angle of λ}) by the Wiener average (1/N) Σ_{n<N} λ^{−n} μ̂(n).
pub fn atom_mass(corr: &CorrSeq, lambda: C64) -> Result<AtomMass, GnsError> {
    let n_max = corr.len();
    if n_max < 64 {
        return Err(GnsError::HorizonTooShort(n_max));
    }
    let lam_inv = lambda.conj();
    let mut pow = C64::new(1.0, 0.0);
    let mut sum = C64::new(0.0, 0.0);
    let mut comp = C64::new(0.0, 0.0);
    let mut trace = Vec::new();
    let mut next_mark = 64usize;
    for n in 0..n_max {
        let y = pow * corr.values[n] - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        pow *= lam_inv;
        let count = n + 1;
        if count == next_mark || count == n_max {
            trace.push((count, sum / count as f64));
            if count == next_mark {
                next_mark *= 2;
            }
        }
    }
    let mass = trace.last().map(|&(_, w)| w.norm()).unwrap_or(0.0);
    Ok(AtomMass { mass, trace })
}

/// Fejér-smoothed density samples of μ_ξ on a uniform angle grid; the
/// trapezoid integral over [0, 2π] recovers ‖ξ‖².
pub fn fejer_density(corr: &CorrSeq, grid: usize) -> Vec<f64> {
    let n = corr.len() as i64;
    (0..grid)
        .map(|i| {
            let t = TWO_PI * i as f64 / grid as f64;
            let mut acc = corr.value(0).re;
            for k in 1..n {
                let w = 1.0 - k as f64 / n as f64;
                // μ̂(k)e^{ikt} + conj pair
                acc += 2.0 * w * (corr.value(k) * C64::new((k as f64 * t).cos(), (k as f64 * t).sin())).re;
            }
            acc / TWO_PI
        })
        .collect()
}
