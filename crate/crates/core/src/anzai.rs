//! The Anzai skew-product Φ_{θ,f} on A_α: U ↦ e^{iθ}U, V ↦ f(U)V.
//!
//! The action on a mode c(U)Vⁿ is c ↦ (c∘R_θ)·f_n, where f_n is the
//! α-cocycle of f. Iterates multiply by the θ-cocycle
//! f_n^{[k]}(z) = ∏_{j<k} f_n(e^{ijθ} z), computed in O(log k) log-form
//! products via f_n^{[j+k]}(z) = f_n^{[j]}(z)·f_n^{[k]}(e^{ijθ}z).
//!
//! The weighted Cesaro engine streams mode functions pointwise on a grid:
//! the cocycle update is a diagonal multiply, so each step costs O(grid)
//! per mode, and checkpoints reconstruct coefficients by FFT.

use std::collections::{BTreeMap, HashMap};
use std::sync::RwLock;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use thiserror::Error;

use crate::angle::Angle;
use crate::circle::{CircleError, GridFn, TrigPoly, WindingMap};
use crate::torus::{AlgebraError, NcPoly, DROP_TOLERANCE};

const TWO_PI: f64 = std::f64::consts::TAU;

#[derive(Debug, Error)]
pub enum AnzaiError {
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Circle(#[from] CircleError),
    #[error("Fourier tail {tail:.3e} of mode {mode} exceeds the tolerance {tol:.3e}")]
    TailTooLarge { mode: i64, tail: f64, tol: f64 },
    #[error("checkpoint schedule must be strictly increasing and positive")]
    InvalidSchedule,
    #[error("|lambda| must be 1, got {0}")]
    LambdaNotUnimodular(f64),
}

/// How mode functions are projected back to Fourier coefficients.
#[derive(Clone, Copy, Debug)]
pub enum FourierPolicy {
    /// Sample on a power-of-two grid, FFT, truncate to [−trunc, trunc];
    /// abort with `TailTooLarge` instead of silently discarding mass.
    Grid { grid: usize, trunc: i64, tail_tol: f64 },
    /// Exact sparse Jacobi–Anger expansion; needed when f lives at
    /// frequencies no realistic grid can resolve.
    Sparse { drop_tol: f64 },
}

impl Default for FourierPolicy {
    fn default() -> Self {
        FourierPolicy::Grid { grid: 4096, trunc: 512, tail_tol: 1e-8 }
    }
}

pub struct AnzaiMap {
    theta: Angle,
    alpha: f64,
    f: WindingMap,
    policy: FourierPolicy,
    alpha_cocycles: RwLock<HashMap<i64, WindingMap>>,
    theta_cocycles: RwLock<HashMap<(i64, u64), WindingMap>>,
}

impl Clone for AnzaiMap {
    fn clone(&self) -> Self {
        AnzaiMap::with_policy(self.theta, self.alpha, self.f.clone(), self.policy)
    }
}

impl AnzaiMap {
    pub fn new(theta: Angle, alpha: f64, f: WindingMap) -> Self {
        AnzaiMap::with_policy(theta, alpha, f, FourierPolicy::default())
    }

    pub fn with_policy(theta: Angle, alpha: f64, f: WindingMap, policy: FourierPolicy) -> Self {
        AnzaiMap {
            theta,
            alpha,
            f,
            policy,
            alpha_cocycles: RwLock::new(HashMap::new()),
            theta_cocycles: RwLock::new(HashMap::new()),
        }
    }

    /// The right-handed convention Φ(V) = V·f(U) reduces to this map with
    /// f replaced by f∘R_{−α}.
    pub fn from_right_convention(theta: Angle, alpha: f64, f: WindingMap) -> Self {
        let rotated = f.rotate(&Angle::two_pi_times(alpha).neg());
        AnzaiMap::new(theta, alpha, rotated)
    }

    pub fn theta(&self) -> &Angle {
        &self.theta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn f(&self) -> &WindingMap {
        &self.f
    }

    pub fn policy(&self) -> FourierPolicy {
        self.policy
    }

    /// The inverse skew-product Φ^{-1} = Φ_{−θ, conj(f∘R_{−θ})}.
    pub fn inverse(&self) -> AnzaiMap {
        let f_inv = self.f.rotate(&self.theta.neg()).conj();
        AnzaiMap::with_policy(self.theta.neg(), self.alpha, f_inv, self.policy)
    }

    /// The α-cocycle f_n: products of α-rotated copies of f (conjugated for
    /// n < 0), governing how Φ acts on the Vⁿ mode.
    pub fn alpha_cocycle(&self, n: i64) -> WindingMap {
        if let Some(hit) = self.alpha_cocycles.read().unwrap().get(&n) {
            return hit.clone();
        }
        let two_pi_alpha = Angle::two_pi_times(self.alpha);
        let mut acc = WindingMap::one();
        if n > 0 {
            for l in 0..n {
                acc = acc.mul(&self.f.rotate(&two_pi_alpha.mul_int_angle(-l)));
            }
        } else {
            for l in 1..=(-n) {
                acc = acc.mul(&self.f.rotate(&two_pi_alpha.mul_int_angle(l)).conj());
            }
        }
        self.alpha_cocycles.write().unwrap().entry(n).or_insert(acc.clone());
        acc
    }

    /// The θ-cocycle f_n^{[k]} for the k-th iterate, by binary doubling.
    pub fn theta_cocycle(&self, n: i64, k: u64) -> WindingMap {
        if k == 0 {
            return WindingMap::one();
        }
        if let Some(hit) = self.theta_cocycles.read().unwrap().get(&(n, k)) {
            return hit.clone();
        }
        let base = self.alpha_cocycle(n);
        let mut acc = WindingMap::one();
        let mut done: i64 = 0; // acc = f_n^{[done]}
        let bits = 64 - k.leading_zeros();
        for b in (0..bits).rev() {
            // f^{[2m]}(z) = f^{[m]}(z) · f^{[m]}(e^{imθ}z)
            acc = acc.mul(&acc.rotate(&self.theta.mul_int_angle(done)));
            done *= 2;
            if (k >> b) & 1 == 1 {
                acc = acc.mul(&base.rotate(&self.theta.mul_int_angle(done)));
                done += 1;
            }
        }
        debug_assert_eq!(done as u64, k);
        self.theta_cocycles.write().unwrap().entry((n, k)).or_insert(acc.clone());
        acc
    }

    fn project_mode(&self, n: i64, product_of: &TrigPoly, cocycle: &WindingMap)
        -> Result<TrigPoly, AnzaiError>
    {
        match self.policy {
            FourierPolicy::Grid { grid, trunc, tail_tol } => {
                let c_grid = GridFn::from_trig_poly(product_of, grid)?;
                let f_grid = cocycle.to_grid(grid);
                let (mut poly, tail) = c_grid.mul_pointwise(&f_grid).to_fourier(trunc)?;
                if tail > tail_tol {
                    return Err(AnzaiError::TailTooLarge { mode: n, tail, tol: tail_tol });
                }
                poly.prune(DROP_TOLERANCE);
                Ok(poly)
            }
            FourierPolicy::Sparse { drop_tol } => {
                let mut out = product_of.mul(&cocycle.fourier_sparse(drop_tol)?);
                out.prune(DROP_TOLERANCE);
                Ok(out)
            }
        }
    }

    /// Single application of Φ.
    pub fn apply(&self, x: &NcPoly) -> Result<NcPoly, AnzaiError> {
        self.apply_iter(x, 1)
    }

    /// The k-th iterate Φ^k, for any k ∈ ℤ; negative k goes through the
    /// closed-form inverse map.
    pub fn apply_iter(&self, x: &NcPoly, k: i64) -> Result<NcPoly, AnzaiError> {
        if x.alpha().to_bits() != self.alpha.to_bits() {
            return Err(AlgebraError::AlphaMismatch { left: self.alpha, right: x.alpha() }.into());
        }
        if k == 0 {
            return Ok(x.clone());
        }
        if k < 0 {
            return self.inverse().apply_iter(x, -k);
        }
        let shift = self.theta.mul_int_angle(k);
        let mut modes = Vec::new();
        for n in x.modes() {
            let rotated = x.coeff_fn(n).rotate(&shift);
            let cocycle = self.theta_cocycle(n, k as u64);
            modes.push((n, self.project_mode(n, &rotated, &cocycle)?));
        }
        Ok(NcPoly::from_modes(self.alpha, modes))
    }

    /// Weighted Cesaro averages M_{a,λ}(N) = (1/N)Σ_{k<N} λ^{−k}Φ^k(a),
    /// streamed on the policy grid and emitted at the scheduled N.
    ///
    /// `candidate` shifts the reported GNS norm to ‖π(M − candidate)ξ_τ‖,
    /// for comparing against a conjectured limit.
    ///
    /// Checkpoint coefficients are resolved mod the grid: `gns_norm` stays
    /// exact as long as the average's frequencies are distinct residues
    /// (always true for N ≤ grid), but the reconstructed `average` element
    /// folds anything beyond ±grid/2. Size the grid to the support you
    /// intend to read off.
    pub fn cesaro(
        &self,
        a: &NcPoly,
        lambda: C64,
        schedule: &[u64],
        candidate: Option<&NcPoly>,
    ) -> Result<CesaroResult, AnzaiError> {
        let grid = match self.policy {
            FourierPolicy::Grid { grid, .. } => grid,
            FourierPolicy::Sparse { .. } => 4096,
        };
        let all: Vec<usize> = (0..grid).collect();
        let streams = self.make_streams(a, lambda, grid, &all)?;
        validate_schedule(schedule)?;

        let mut streams = streams;
        let mut checkpoints = Vec::new();
        let mut k: u64 = 0;
        for &region in schedule {
            // per-mode streams are independent between checkpoints; results
            // do not depend on the thread count
            let steps = region - k;
            streams.par_iter_mut().for_each(|s| {
                for _ in 0..steps {
                    s.accumulate_step();
                }
            });
            k = region;
            checkpoints.push(self.emit_checkpoint(&streams, k, grid, candidate)?);
        }
        Ok(CesaroResult { lambda, checkpoints })
    }

    /// Same accumulation as [`AnzaiMap::cesaro`], but evaluated only at the
    /// chosen grid indices and returned as raw per-mode point values.
    pub fn cesaro_pointwise(
        &self,
        a: &NcPoly,
        lambda: C64,
        eval_grid: usize,
        indices: &[usize],
        schedule: &[u64],
    ) -> Result<Vec<PointwiseCheckpoint>, AnzaiError> {
        validate_schedule(schedule)?;
        let mut streams = self.make_streams(a, lambda, eval_grid, indices)?;
        let mut out = Vec::new();
        let mut k: u64 = 0;
        for &region in schedule {
            while k < region {
                for s in streams.iter_mut() {
                    s.accumulate_step();
                }
                k += 1;
            }
            let modes = streams
                .iter()
                .map(|s| (s.mode, s.averages(k)))
                .collect::<BTreeMap<_, _>>();
            out.push(PointwiseCheckpoint { n: k, modes });
        }
        Ok(out)
    }

    pub(crate) fn streams_for(
        &self,
        a: &NcPoly,
        lambda: C64,
        grid: usize,
        indices: &[usize],
    ) -> Result<Vec<ModeStream>, AnzaiError> {
        self.make_streams(a, lambda, grid, indices)
    }

    fn make_streams(
        &self,
        a: &NcPoly,
        lambda: C64,
        grid: usize,
        indices: &[usize],
    ) -> Result<Vec<ModeStream>, AnzaiError> {
        if (lambda.norm() - 1.0).abs() > 1e-9 {
            return Err(AnzaiError::LambdaNotUnimodular(lambda.norm()));
        }
        if a.alpha().to_bits() != self.alpha.to_bits() {
            return Err(AlgebraError::AlphaMismatch { left: self.alpha, right: a.alpha() }.into());
        }
        Ok(a.modes()
            .into_iter()
            .map(|n| ModeStream::new(self, n, &a.coeff_fn(n), lambda, grid, indices))
            .collect())
    }

    fn emit_checkpoint(
        &self,
        streams: &[ModeStream],
        n_steps: u64,
        grid: usize,
        candidate: Option<&NcPoly>,
    ) -> Result<CesaroCheckpoint, AnzaiError> {
        let mut gns_sq = 0.0;
        let mut modes = Vec::new();
        let mut recon_tail: f64 = 0.0;
        let mut cand_modes: Vec<i64> = candidate.map(|c| c.modes()).unwrap_or_default();
        for s in streams {
            let avg = s.averages(n_steps);
            let avg = GridFn::from_samples(avg);
            let shifted = match candidate {
                Some(l) => {
                    cand_modes.retain(|&m| m != s.mode);
                    let lg = l.coeff_fn(s.mode).eval_on_grid(grid);
                    GridFn::from_samples(
                        avg.samples().iter().zip(&lg).map(|(a, b)| a - b).collect(),
                    )
                }
                None => avg.clone(),
            };
            gns_sq += shifted.parseval_norm_sq();
            let (poly, tail) = avg.to_fourier(grid as i64 / 2 - 1)?;
            recon_tail = recon_tail.max(tail);
            modes.push((s.mode, poly));
        }
        // candidate modes the average does not touch still contribute
        if let Some(l) = candidate {
            for m in cand_modes {
                gns_sq += GridFn::from_samples(l.coeff_fn(m).eval_on_grid(grid)).parseval_norm_sq();
            }
        }
        let average = NcPoly::from_modes(self.alpha, modes);
        let (lower, upper) = average.norm_bounds(grid);
        Ok(CesaroCheckpoint {
            n: n_steps,
            average,
            lower_norm: lower,
            upper_norm: upper,
            gns_norm: gns_sq.sqrt(),
            recon_tail,
        })
    }
}

fn validate_schedule(schedule: &[u64]) -> Result<(), AnzaiError> {
    if schedule.is_empty() || schedule[0] == 0 || schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(AnzaiError::InvalidSchedule);
    }
    Ok(())
}

/// Streaming state for one V-mode of a Cesaro or correlation run.
///
/// Holds the current cocycle values f_n^{[k]}(z_j) at the evaluation points
/// and phase rotators for evaluating f_n and c_n at the rotated arguments,
/// so each step is a pointwise multiply. λ^{−k} is folded into the
/// coefficient rotators.
pub(crate) struct ModeStream {
    pub(crate) mode: i64,
    npts: usize,
    // running Kahan-compensated sums of λ^{−k}·(c_n∘R_{kθ})·f_n^{[k]} per point
    sum: Vec<C64>,
    comp: Vec<C64>,
    // current cocycle f_n^{[k]} per point
    cocycle: Vec<C64>,
    // winding of f_n: e^{iw(t_j+kθ)} = wrot·wj[idx]
    wrot: C64,
    wrot_step: C64,
    wj: Vec<C64>,
    // phase of f_n: h(t_j+kθ) = Σ_q rho_q·ω^{qj}
    rho: Vec<C64>,
    rho_step: Vec<C64>,
    rho_omega: Vec<Vec<C64>>,
    // λ^{−k}·c_n∘R_{kθ}: Σ_m gamma_m·ω^{mj}
    gamma: Vec<C64>,
    gamma_step: Vec<C64>,
    gamma_omega: Vec<Vec<C64>>,
}

fn omega_row(freq: i64, grid: usize, indices: &[usize]) -> Vec<C64> {
    indices
        .iter()
        .map(|&j| {
            let r = (freq as i128 * j as i128).rem_euclid(grid as i128) as usize;
            let t = TWO_PI * (r as f64 / grid as f64);
            C64::new(t.cos(), t.sin())
        })
        .collect()
}

impl ModeStream {
    fn new(
        map: &AnzaiMap,
        mode: i64,
        coeff: &TrigPoly,
        lambda: C64,
        grid: usize,
        indices: &[usize],
    ) -> Self {
        let fn_cocycle = map.alpha_cocycle(mode);
        let npts = indices.len();
        let lam_inv = lambda.conj();
        let mut rho = Vec::new();
        let mut rho_step = Vec::new();
        let mut rho_omega = Vec::new();
        for (q, c) in fn_cocycle.phase().iter() {
            rho.push(c);
            rho_step.push(map.theta.cis_int(q));
            rho_omega.push(omega_row(q, grid, indices));
        }
        let mut gamma = Vec::new();
        let mut gamma_step = Vec::new();
        let mut gamma_omega = Vec::new();
        for (m, c) in coeff.iter() {
            gamma.push(c);
            gamma_step.push(lam_inv * map.theta.cis_int(m));
            gamma_omega.push(omega_row(m, grid, indices));
        }
        let w = fn_cocycle.winding();
        ModeStream {
            mode,
            npts,
            sum: vec![C64::new(0.0, 0.0); npts],
            comp: vec![C64::new(0.0, 0.0); npts],
            cocycle: vec![C64::new(1.0, 0.0); npts],
            wrot: C64::new(1.0, 0.0),
            wrot_step: map.theta.cis_int(w),
            wj: omega_row(w, grid, indices),
            rho,
            rho_step,
            rho_omega,
            gamma,
            gamma_step,
            gamma_omega,
        }
    }

    /// λ^{−k}·(c_n∘R_{kθ})(z_j)·f_n^{[k]}(z_j) at the current k.
    pub(crate) fn current_values(&self, out: &mut Vec<C64>) {
        out.clear();
        for idx in 0..self.npts {
            let mut cval = C64::new(0.0, 0.0);
            for (g, row) in self.gamma.iter().zip(&self.gamma_omega) {
                cval += g * row[idx];
            }
            out.push(cval * self.cocycle[idx]);
        }
    }

    /// Advance k → k+1: fold f_n(e^{ikθ}z_j) into the cocycle, rotate.
    pub(crate) fn advance(&mut self) {
        for idx in 0..self.npts {
            let mut h = 0.0;
            for (r, row) in self.rho.iter().zip(&self.rho_omega) {
                h += (r * row[idx]).re;
            }
            let fval = self.wrot * self.wj[idx] * C64::new(h.cos(), h.sin());
            self.cocycle[idx] *= fval;
        }
        self.wrot *= self.wrot_step;
        for (r, s) in self.rho.iter_mut().zip(&self.rho_step) {
            *r *= s;
        }
        for (g, s) in self.gamma.iter_mut().zip(&self.gamma_step) {
            *g *= s;
        }
    }

    /// One Cesaro step: add the current term into the running sum, advance.
    fn accumulate_step(&mut self) {
        for idx in 0..self.npts {
            let mut cval = C64::new(0.0, 0.0);
            for (g, row) in self.gamma.iter().zip(&self.gamma_omega) {
                cval += g * row[idx];
            }
            let term = cval * self.cocycle[idx];
            // Kahan
            let y = term - self.comp[idx];
            let t = self.sum[idx] + y;
            self.comp[idx] = (t - self.sum[idx]) - y;
            self.sum[idx] = t;
        }
        self.advance();
    }

    fn averages(&self, n_steps: u64) -> Vec<C64> {
        let inv = 1.0 / n_steps as f64;
        self.sum.iter().map(|s| s * inv).collect()
    }
}

#[derive(Clone, Debug)]
pub struct CesaroCheckpoint {
    pub n: u64,
    pub average: NcPoly,
    pub lower_norm: f64,
    pub upper_norm: f64,
    /// ‖π(M)ξ_τ‖, or ‖π(M − candidate)ξ_τ‖ when a candidate limit was given;
    /// computed from the streamed grid by Parseval, before any truncation.
    pub gns_norm: f64,
    /// ℓ²-mass the checkpoint reconstruction could not keep.
    pub recon_tail: f64,
}

#[derive(Clone, Debug)]
pub struct CesaroResult {
    pub lambda: C64,
    pub checkpoints: Vec<CesaroCheckpoint>,
}

#[derive(Clone, Debug)]
pub struct PointwiseCheckpoint {
    pub n: u64,
    pub modes: BTreeMap<i64, Vec<C64>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn golden_map(alpha: f64) -> AnzaiMap {
        let f = WindingMap::character(c(1.0, 0.0), 1).unwrap();
        AnzaiMap::new(Angle::golden(), alpha, f)
    }

    #[test]
    fn alpha_cocycle_character_closed_form() {
        // f(z) = z, n = 2, α = 1/3: f_2(z) = e^{−2πi/3} z²
        let map = golden_map(1.0 / 3.0);
        let f2 = map.alpha_cocycle(2);
        assert_eq!(f2.winding(), 2);
        let expected_phase = -TWO_PI / 3.0;
        let got = f2.phase().coeff(0).re;
        assert!((crate::angle::reduce_radians(got - expected_phase)).abs() < 1e-12);
        // f_0 = 1
        let f0 = map.alpha_cocycle(0);
        assert_eq!(f0.winding(), 0);
        assert!(f0.phase().is_empty());
    }

    #[test]
    fn alpha_cocycle_matches_pointwise_products() {
        let f = WindingMap::exp_sin(0.8, 2)
            .mul(&WindingMap::character(c(0.28, 0.96), 1).unwrap());
        let alpha = 0.2137;
        let map = AnzaiMap::new(Angle::golden(), alpha, f.clone());
        let two_pi_alpha = Angle::two_pi_times(alpha);
        for n in -3..=3i64 {
            let fx = map.alpha_cocycle(n);
            for j in 0..32 {
                let t = TWO_PI * j as f64 / 32.0;
                let mut direct = c(1.0, 0.0);
                if n > 0 {
                    for l in 0..n {
                        direct *= f.eval(t + two_pi_alpha.mul_int(-l));
                    }
                } else {
                    for l in 1..=(-n) {
                        direct *= f.eval(t + two_pi_alpha.mul_int(l)).conj();
                    }
                }
                assert!(
                    (fx.eval(t) - direct).norm() < 1e-11,
                    "cocycle mismatch n={n} t={t}"
                );
            }
        }
    }

    #[test]
    fn alpha_cocycle_identity() {
        // f_{m+n}(z) = f_m(z) · f_n(e^{−2πimα} z)
        let f = WindingMap::exp_cos(0.5, 1).mul(&WindingMap::character(c(1.0, 0.0), -2).unwrap());
        let alpha = 0.377;
        let map = AnzaiMap::new(Angle::golden(), alpha, f);
        let two_pi_alpha = Angle::two_pi_times(alpha);
        for m in -4..=4i64 {
            for n in -4..=4i64 {
                let lhs = map.alpha_cocycle(m + n);
                let fm = map.alpha_cocycle(m);
                let fn_rot = map.alpha_cocycle(n).rotate(&two_pi_alpha.mul_int_angle(-m));
                let rhs = fm.mul(&fn_rot);
                for j in 0..32 {
                    let t = TWO_PI * j as f64 / 32.0;
                    assert!(
                        (lhs.eval(t) - rhs.eval(t)).norm() < 1e-11,
                        "identity failed at m={m} n={n}"
                    );
                }
            }
        }
    }

    #[test]
    fn alpha_cocycle_negative_branch_closed_form() {
        // f(z) = z, α = 1/3, n = −2: the conjugated product collapses to
        // z^{−2} exactly (the accumulated phase is a full turn)
        let map = golden_map(1.0 / 3.0);
        let fm2 = map.alpha_cocycle(-2);
        assert_eq!(fm2.winding(), -2);
        let phase = crate::angle::reduce_radians(fm2.phase().coeff(0).re);
        assert!(phase.abs() < 1e-12, "phase {phase}");
        // and n = −1: f_{−1}(z) = e^{−2πiα} z^{−1}
        let fm1 = map.alpha_cocycle(-1);
        assert_eq!(fm1.winding(), -1);
        let expected = -TWO_PI / 3.0;
        let dev = crate::angle::reduce_radians(fm1.phase().coeff(0).re - expected);
        assert!(dev.abs() < 1e-12, "dev {dev}");
    }

    #[test]
    fn cocycle_caches_are_thread_safe() {
        let map = std::sync::Arc::new(AnzaiMap::new(
            Angle::golden(),
            0.25,
            WindingMap::exp_sin(0.5, 1),
        ));
        let mut handles = Vec::new();
        for _ in 0..4 {
            let m = map.clone();
            handles.push(std::thread::spawn(move || {
                let mut acc = 0.0;
                for n in -3..=3i64 {
                    for k in [1u64, 7, 13, 64] {
                        acc += m.theta_cocycle(n, k).eval(0.3).re;
                    }
                }
                acc
            }));
        }
        let results: Vec<f64> = handles.into_iter().map(|h| h.join().unwrap()).collect();
        for r in &results[1..] {
            assert_eq!(*r, results[0]);
        }
    }

    #[test]
    fn theta_cocycle_trivial_and_single() {
        let map = golden_map(0.25);
        let k0 = map.theta_cocycle(1, 0);
        assert_eq!(k0.winding(), 0);
        assert!(k0.phase().is_empty());
        let k1 = map.theta_cocycle(1, 1);
        let f1 = map.alpha_cocycle(1);
        for j in 0..16 {
            let t = TWO_PI * j as f64 / 16.0;
            assert!((k1.eval(t) - f1.eval(t)).norm() < 1e-14);
        }
    }

    #[test]
    fn theta_cocycle_character_closed_form() {
        // f(z) = z, n = 1: f^{[k]}(z) = e^{iθk(k−1)/2} z^k
        let map = golden_map(0.0);
        let theta = Angle::golden();
        for k in [1u64, 2, 3, 7, 16] {
            let fk = map.theta_cocycle(1, k);
            assert_eq!(fk.winding(), k as i64);
            let t = 0.77;
            let expect_phase = theta.mul_int((k * (k - 1) / 2) as i64);
            let expected = C64::new(
                (k as f64 * t + expect_phase).cos(),
                (k as f64 * t + expect_phase).sin(),
            );
            assert!((fk.eval(t) - expected).norm() < 1e-12, "k = {k}");
        }
    }

    #[test]
    fn theta_cocycle_doubling_matches_naive() {
        let f = WindingMap::exp_sin(0.6, 1).mul(&WindingMap::character(c(0.6, 0.8), 1).unwrap());
        let theta = Angle::golden();
        let map = AnzaiMap::new(theta, 0.31, f);
        let n = 2i64;
        let k = 13u64;
        let fk = map.theta_cocycle(n, k);
        let fn_base = map.alpha_cocycle(n);
        for j in 0..32 {
            let t = TWO_PI * j as f64 / 32.0;
            let mut direct = c(1.0, 0.0);
            for i in 0..k {
                direct *= fn_base.eval(t + theta.mul_int(i as i64));
            }
            assert!((fk.eval(t) - direct).norm() < 1e-10);
        }
    }

    #[test]
    fn theta_cocycle_composition_identity() {
        // f_n^{[j+k]}(z) = f_n^{[j]}(z)·f_n^{[k]}(e^{ijθ}z)
        let f = WindingMap::exp_cos(0.9, 2);
        let theta = Angle::golden();
        let map = AnzaiMap::new(theta, 0.1, f);
        for &j in &[1u64, 2, 3, 5, 8] {
            for &k in &[1u64, 2, 3, 5, 8] {
                let lhs = map.theta_cocycle(1, j + k);
                let rhs = map
                    .theta_cocycle(1, j)
                    .mul(&map.theta_cocycle(1, k).rotate(&theta.mul_int_angle(j as i64)));
                for p in 0..16 {
                    let t = TWO_PI * p as f64 / 16.0;
                    assert!((lhs.eval(t) - rhs.eval(t)).norm() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn apply_on_generators() {
        let alpha = 1.0 / 3.0;
        let theta = Angle::golden();
        let f = WindingMap::exp_sin(0.7, 1);
        let map = AnzaiMap::new(theta, alpha, f.clone());
        // Φ(U) = e^{iθ}U
        let u = NcPoly::u_pow(alpha, 1);
        let fu = map.apply(&u).unwrap();
        assert_eq!(fu.num_terms(), 1);
        assert!((fu.coeff(1, 0) - theta.cis_int(1)).norm() < 1e-13);
        // Φ(V) = f(U)V: mode-1 coefficients are the Fourier series of f
        let v = NcPoly::v_pow(alpha, 1);
        let fv = map.apply(&v).unwrap();
        let (fhat, _) = f.to_fourier(4096, 512).unwrap();
        let got = fv.coeff_fn(1);
        for k in -8..=8i64 {
            assert!((got.coeff(k) - fhat.coeff(k)).norm() < 1e-12);
        }
    }

    #[test]
    fn apply_iter_u_monomials() {
        let alpha = 0.25;
        let theta = Angle::golden();
        let map = AnzaiMap::new(theta, alpha, WindingMap::exp_cos(0.4, 1));
        for (m, k) in [(1i64, 5i64), (3, 11), (-2, 7)] {
            let x = NcPoly::u_pow(alpha, m);
            let y = map.apply_iter(&x, k).unwrap();
            assert!((y.coeff(m, 0) - theta.cis_int(k * m)).norm() < 1e-12);
        }
    }

    #[test]
    fn apply_iter_matches_composition() {
        let alpha = 0.3;
        let map = AnzaiMap::new(Angle::golden(), alpha, WindingMap::exp_sin(0.5, 1));
        let x = NcPoly::from_terms(
            alpha,
            [(1, 1, c(0.7, 0.1)), (0, -1, c(0.0, 0.4)), (2, 0, c(0.3, 0.0))],
        );
        let mut five = x.clone();
        for _ in 0..5 {
            five = map.apply(&five).unwrap();
        }
        let direct = map.apply_iter(&x, 5).unwrap();
        assert!(direct.max_coeff_diff(&five) < 1e-10);
        // k = 0 is the identity
        assert!(map.apply_iter(&x, 0).unwrap().max_coeff_diff(&x) < 1e-15);
    }

    #[test]
    fn apply_is_multiplicative_and_star_compatible() {
        let alpha = 0.41;
        let map = AnzaiMap::new(Angle::golden(), alpha, WindingMap::exp_sin(0.6, 2));
        let x = NcPoly::from_terms(alpha, [(1, 1, c(0.5, 0.2)), (0, 0, c(1.0, 0.0))]);
        let y = NcPoly::from_terms(alpha, [(0, 1, c(0.3, -0.7)), (2, -1, c(0.1, 0.0))]);
        let lhs = map.apply(&x.mul(&y).unwrap()).unwrap();
        let rhs = map.apply(&x).unwrap().mul(&map.apply(&y).unwrap()).unwrap();
        assert!(lhs.max_coeff_diff(&rhs) < 1e-10);
        let star_lhs = map.apply(&x.adjoint()).unwrap();
        let star_rhs = map.apply(&x).unwrap().adjoint();
        assert!(star_lhs.max_coeff_diff(&star_rhs) < 1e-10);
    }

    #[test]
    fn right_convention_reduces_to_rotated_twist() {
        // the map with Φ(V) = V·f(U) is the standard one for f∘R_{−α}:
        // check Φ(V) against the algebra product V·f(U)
        let alpha = 0.3;
        let theta = Angle::golden();
        let f = WindingMap::exp_sin(0.6, 2).mul(&WindingMap::character(c(0.8, 0.6), 1).unwrap());
        let map = AnzaiMap::from_right_convention(theta, alpha, f.clone());
        let fv = map.apply(&NcPoly::v_pow(alpha, 1)).unwrap();
        let (f_hat, _) = f.to_fourier(4096, 512).unwrap();
        let f_poly = NcPoly::from_modes(alpha, [(0, f_hat)]);
        let direct = NcPoly::v_pow(alpha, 1).mul(&f_poly).unwrap();
        assert!(fv.max_coeff_diff(&direct) < 1e-12);
    }

    #[test]
    fn trace_is_invariant() {
        let alpha = 0.15;
        let map = AnzaiMap::new(Angle::golden(), alpha, WindingMap::exp_sin(0.9, 1));
        let x = NcPoly::from_terms(
            alpha,
            [(0, 0, c(0.4, -0.2)), (1, 2, c(1.0, 1.0)), (-1, 0, c(0.0, 0.5))],
        );
        for k in [1i64, 2, 10, 100] {
            let y = map.apply_iter(&x, k).unwrap();
            assert!((y.trace() - x.trace()).norm() < 1e-12);
        }
    }

    #[test]
    fn inverse_roundtrip() {
        let alpha = 0.29;
        let f = WindingMap::exp_sin(0.8, 1).mul(&WindingMap::character(c(1.0, 0.0), 1).unwrap());
        let map = AnzaiMap::new(Angle::golden(), alpha, f);
        let inv = map.inverse();
        let v = NcPoly::v_pow(alpha, 1);
        let back = inv.apply(&map.apply(&v).unwrap()).unwrap();
        assert!(back.max_coeff_diff(&v) < 1e-10);
        let x = NcPoly::from_terms(alpha, [(1, 1, c(0.3, 0.3)), (0, 2, c(0.5, 0.0))]);
        let back = inv.apply(&map.apply(&x).unwrap()).unwrap();
        assert!(back.max_coeff_diff(&x) < 1e-10);
        // involution: inverse of the inverse is the original map
        let twice = inv.inverse();
        for j in 0..32 {
            let t = TWO_PI * j as f64 / 32.0;
            assert!((twice.f().eval(t) - map.f().eval(t)).norm() < 1e-12);
        }
        assert!((twice.theta().radians() - map.theta().radians()).abs() < 1e-15);
    }

    #[test]
    fn apply_iter_negative_k() {
        let alpha = 0.33;
        let map = AnzaiMap::new(Angle::golden(), alpha, WindingMap::exp_cos(0.6, 1));
        let x = NcPoly::from_terms(alpha, [(0, 1, c(1.0, 0.0)), (1, -1, c(0.2, 0.6))]);
        let fwd = map.apply_iter(&x, 3).unwrap();
        let back = map.apply_iter(&fwd, -3).unwrap();
        assert!(back.max_coeff_diff(&x) < 1e-9);
    }

    #[test]
    fn gauge_equivariance() {
        // ρ_{1,z} ∘ Φ = Φ ∘ ρ_{1,z}
        let alpha = 0.22;
        let map = AnzaiMap::new(Angle::golden(), alpha, WindingMap::exp_sin(0.5, 1));
        let g = crate::torus::GaugePair::new(c(1.0, 0.0), c(0.6, 0.8)).unwrap();
        let x = NcPoly::from_terms(alpha, [(1, 1, c(0.9, 0.0)), (0, -2, c(0.0, 0.7))]);
        let lhs = map.apply(&x.gauge(&g)).unwrap();
        let rhs = map.apply(&x).unwrap().gauge(&g);
        assert!(lhs.max_coeff_diff(&rhs) < 1e-12);
    }

    #[test]
    fn cesaro_eigenvector_is_fixed() {
        // a = U^m, λ = e^{imθ}: every checkpoint equals U^m exactly
        let alpha = 0.4;
        let theta = Angle::golden();
        let map = AnzaiMap::new(theta, alpha, WindingMap::exp_sin(0.7, 1));
        let m = 2i64;
        let a = NcPoly::u_pow(alpha, m);
        let lambda = theta.cis_int(m);
        let result = map.cesaro(&a, lambda, &[16, 64, 256], None).unwrap();
        for cp in &result.checkpoints {
            assert!(cp.average.max_coeff_diff(&a) < 1e-11, "N = {}", cp.n);
            assert!((cp.gns_norm - 1.0).abs() < 1e-11);
        }
    }

    #[test]
    fn cesaro_identity_element() {
        let alpha = 0.0;
        let map = AnzaiMap::new(Angle::golden(), alpha, WindingMap::exp_sin(0.3, 1));
        let one = NcPoly::one(alpha);
        let result = map.cesaro(&one, c(1.0, 0.0), &[8, 32], None).unwrap();
        for cp in &result.checkpoints {
            assert!(cp.average.max_coeff_diff(&one) < 1e-13);
        }
    }

    #[test]
    fn cesaro_norm_law() {
        // f(z) = z, a = V, λ = 1: ‖π(M(N))ξ_τ‖² = 1/N exactly
        for alpha in [0.0, 1.0 / 3.0] {
            let map = golden_map(alpha);
            let a = NcPoly::v_pow(alpha, 1);
            let result = map.cesaro(&a, c(1.0, 0.0), &[64, 256, 1024], None).unwrap();
            for cp in &result.checkpoints {
                let expect = 1.0 / cp.n as f64;
                assert!(
                    (cp.gns_norm.powi(2) - expect).abs() < 1e-10,
                    "N = {}, got {}",
                    cp.n,
                    cp.gns_norm.powi(2)
                );
            }
        }
    }

    #[test]
    fn cesaro_rejects_bad_inputs() {
        let map = golden_map(0.0);
        let a = NcPoly::v_pow(0.0, 1);
        assert!(matches!(
            map.cesaro(&a, c(1.0, 0.0), &[8, 8], None),
            Err(AnzaiError::InvalidSchedule)
        ));
        assert!(matches!(
            map.cesaro(&a, c(2.0, 0.0), &[8], None),
            Err(AnzaiError::LambdaNotUnimodular(_))
        ));
    }

    #[test]
    fn cesaro_pointwise_matches_grid() {
        let alpha = 0.25;
        let map = AnzaiMap::new(Angle::golden(), alpha, WindingMap::exp_sin(0.5, 1));
        let a = NcPoly::from_terms(alpha, [(1, 1, c(1.0, 0.0)), (0, 0, c(0.5, 0.0))]);
        let lambda = Angle::golden().cis_int(1);
        let grid_run = map.cesaro(&a, lambda, &[32], None).unwrap();
        let idx: Vec<usize> = (0..8).map(|i| i * 512).collect();
        let pt_run = map.cesaro_pointwise(&a, lambda, 4096, &idx, &[32]).unwrap();
        let avg = &grid_run.checkpoints[0].average;
        for (pos, &j) in idx.iter().enumerate() {
            let t = TWO_PI * j as f64 / 4096.0;
            for (&mode, vals) in &pt_run[0].modes {
                let expect = avg.coeff_fn(mode).eval(t);
                assert!((vals[pos] - expect).norm() < 1e-9, "mode {mode} at {j}");
            }
        }
    }

    #[test]
    fn tail_abort_fires() {
        // a rough map iterated on a coarse grid must refuse to truncate
        let alpha = 0.0;
        let f = WindingMap::character(c(1.0, 0.0), 1).unwrap();
        let map = AnzaiMap::with_policy(
            Angle::golden(),
            alpha,
            f,
            FourierPolicy::Grid { grid: 64, trunc: 8, tail_tol: 1e-8 },
        );
        let v = NcPoly::v_pow(alpha, 1);
        match map.apply_iter(&v, 20) {
            Err(AnzaiError::TailTooLarge { .. }) => {}
            other => panic!("expected tail error, got {other:?}"),
        }
    }
}
