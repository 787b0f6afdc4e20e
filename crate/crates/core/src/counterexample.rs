//! Desk-scale realization of the non-convergence construction: a Liouville
//! angle from continued-fraction convergents with super-exponential
//! denominators, a truncated rough transfer function
//! g_N(e^{it}) = exp(i·Σ a_k cos(q_k t)) on those denominators, the twisted
//! map f̃ = e^{iν}·g/(g∘R_θ), the measurable eigenvector g(U)Vξ_τ, the G_k
//! functions, and a finite-window oscillation statistic for the weighted
//! Cesaro means.
//!
//! The working angle is the exact rational 2π·p_{L+1}/q_{L+1} one convergent
//! deeper than the levels in use, so every identity the construction
//! manipulates is checkable to near machine precision while ‖q_kθ‖ stays
//! honestly positive for k ≤ L. Amplitudes default to a_k = 1/k: square
//! summable at every truncation while Σ a_k diverges, the mechanism that
//! makes the limit function rough.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::angle::Angle;
use crate::anzai::{AnzaiError, AnzaiMap, FourierPolicy};
use crate::circle::{CircleError, TrigPoly, WindingMap};
use crate::gns::{eigen_residual, GnsError, GnsVector};
use crate::torus::NcPoly;

/// Frequencies must stay exactly representable, and the θ-denominator must
/// survive i128 modular products.
const MAX_FREQ: i128 = 1 << 53;
const MAX_DENOM: i128 = 1 << 120;

#[derive(Debug, Error)]
pub enum CounterexampleError {
    #[error("convergent denominator at level {level} exceeds the exact-arithmetic range")]
    Overflow { level: usize },
    #[error("requested {requested} levels but the angle only carries {available}")]
    LevelsUnavailable { requested: usize, available: usize },
    #[error("dual-path G_{k} computations diverge by {dev:.3e}")]
    Consistency { k: u64, dev: f64 },
    #[error("|∮ h·g⁻¹ dm| = {value:.3e} is too close to zero for the oscillation run")]
    PreconditionFailed { value: f64 },
    #[error("oscillation window must satisfy 0 < N_min ≤ N_max")]
    BadWindow,
    #[error(transparent)]
    Anzai(#[from] AnzaiError),
    #[error(transparent)]
    Gns(#[from] GnsError),
    #[error(transparent)]
    Circle(#[from] CircleError),
}

/// How the continued-fraction partial quotients grow.
#[derive(Clone, Debug)]
pub enum GrowthSchedule {
    /// a_1 = seed, a_{k+1} = q_k² + 1: denominators cube each level.
    SquarePlusOne { seed: i64 },
    /// Explicit partial quotients.
    Quotients(Vec<i64>),
    /// All quotients 1 (golden-type): the non-Liouville negative control.
    AllOnes,
}

impl Default for GrowthSchedule {
    fn default() -> Self {
        GrowthSchedule::SquarePlusOne { seed: 3 }
    }
}

/// An angle built from continued-fraction convergents, with exact rational
/// value 2π·p_{L+1}/q_{L+1}.
#[derive(Clone, Debug)]
pub struct LiouvilleAngle {
    quotients: Vec<i64>,
    convergents: Vec<(i128, i128)>,
    theta: Angle,
    levels: usize,
    norms: Vec<f64>,
    liouville_score: f64,
}

/// θ with ‖q_kθ‖ ≤ 2π/q_{k+1} for each stored level.
pub fn liouville_theta(
    levels: usize,
    growth: &GrowthSchedule,
) -> Result<LiouvilleAngle, CounterexampleError> {
    assert!(levels >= 1);
    let mut quotients: Vec<i64> = Vec::new();
    let mut convergents: Vec<(i128, i128)> = Vec::new();
    let (mut p_prev, mut q_prev): (i128, i128) = (1, 0);
    let (mut p, mut q): (i128, i128) = (0, 1);
    for level in 1..=levels + 1 {
        let mut a: i128 = match growth {
            GrowthSchedule::SquarePlusOne { seed } => {
                if level == 1 {
                    *seed as i128
                } else {
                    q.checked_mul(q)
                        .and_then(|s| s.checked_add(1))
                        .ok_or(CounterexampleError::Overflow { level })?
                }
            }
            GrowthSchedule::Quotients(qs) => *qs
                .get(level - 1)
                .ok_or(CounterexampleError::Overflow { level })?
                as i128,
            GrowthSchedule::AllOnes => 1,
        };
        if level == levels + 1 {
            // the θ-level quotient only needs to dwarf the last stored level
            a = a.min(1 << 50);
        }
        let p_next = a
            .checked_mul(p)
            .and_then(|v| v.checked_add(p_prev))
            .ok_or(CounterexampleError::Overflow { level })?;
        let q_next = a
            .checked_mul(q)
            .and_then(|v| v.checked_add(q_prev))
            .ok_or(CounterexampleError::Overflow { level })?;
        let cap = if level <= levels { MAX_FREQ } else { MAX_DENOM };
        if q_next > cap {
            return Err(CounterexampleError::Overflow { level });
        }
        quotients.push(a as i64);
        convergents.push((p_next, q_next));
        (p_prev, q_prev) = (p, q);
        (p, q) = (p_next, q_next);
    }
    let (p_theta, q_theta) = convergents[levels];
    let theta = Angle::two_pi_ratio(p_theta, q_theta);
    let norms = (0..levels)
        .map(|k| {
            let qk = convergents[k].1 as i64;
            // exact: ‖q_k θ‖ = 2π·dist(q_k·p/q, ℤ)
            theta.mul_int(qk).abs()
        })
        .collect();
    // growth exponent of the denominators; ≈3 for the cubing schedule,
    // →1 for golden-type quotients
    let mut score = f64::INFINITY;
    for k in 1..levels {
        let q0 = convergents[k - 1].1 as f64;
        let q1 = convergents[k].1 as f64;
        if q0 >= 2.0 {
            score = score.min(q1.ln() / q0.ln());
        }
    }
    if !score.is_finite() {
        // single usable level: fall back to the θ-level ratio
        let q0 = convergents[levels - 1].1 as f64;
        let q1 = convergents[levels].1 as f64;
        score = if q0 >= 2.0 { q1.ln() / q0.ln() } else { q1.ln() / 2f64.ln() };
    }
    Ok(LiouvilleAngle {
        quotients,
        convergents,
        theta,
        levels,
        norms,
        liouville_score: score,
    })
}

/// Denominators grow at least like q^2 from level to level.
pub const LIOUVILLE_SCORE_THRESHOLD: f64 = 2.0;

impl LiouvilleAngle {
    pub fn theta(&self) -> &Angle {
        &self.theta
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn quotients(&self) -> &[i64] {
        &self.quotients
    }

    /// Convergents (p_k, q_k), the extra θ-level last.
    pub fn convergents(&self) -> &[(i128, i128)] {
        &self.convergents
    }

    pub fn denominator(&self, level: usize) -> i64 {
        self.convergents[level - 1].1 as i64
    }

    /// ‖q_k θ‖ in radians, exact.
    pub fn norm_at(&self, level: usize) -> f64 {
        self.norms[level - 1]
    }

    pub fn liouville_score(&self) -> f64 {
        self.liouville_score
    }

    pub fn is_liouville_like(&self) -> bool {
        self.liouville_score >= LIOUVILLE_SCORE_THRESHOLD
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "quotients": self.quotients,
            "convergents": self.convergents.iter()
                .map(|&(p, q)| serde_json::json!([p.to_string(), q.to_string()]))
                .collect::<Vec<_>>(),
            "theta_radians": self.theta.radians(),
            "levels": self.levels,
            "norms": self.norms,
            "liouville_score": self.liouville_score,
        })
    }
}

/// The truncated rough transfer function g_N = exp(i·Σ_{k≤N} a_k cos(q_k t)).
#[derive(Clone, Debug)]
pub struct RoughSolution {
    freqs: Vec<i64>,
    amps: Vec<f64>,
}

impl RoughSolution {
    /// Default amplitude schedule a_k = 1/k: Σ a_k² stays bounded at every
    /// truncation while Σ a_k diverges.
    pub fn new(
        angle: &LiouvilleAngle,
        levels: usize,
        amps: Option<Vec<f64>>,
    ) -> Result<Self, CounterexampleError> {
        if levels > angle.levels() {
            return Err(CounterexampleError::LevelsUnavailable {
                requested: levels,
                available: angle.levels(),
            });
        }
        let freqs: Vec<i64> = (1..=levels).map(|k| angle.denominator(k)).collect();
        let amps = amps.unwrap_or_else(|| (1..=levels).map(|k| 1.0 / k as f64).collect());
        assert_eq!(freqs.len(), amps.len());
        Ok(RoughSolution { freqs, amps })
    }

    pub fn levels(&self) -> usize {
        self.freqs.len()
    }

    pub fn freqs(&self) -> &[i64] {
        &self.freqs
    }

    pub fn amps(&self) -> &[f64] {
        &self.amps
    }

    pub fn as_winding_map(&self) -> WindingMap {
        let mut phase = TrigPoly::zero();
        for (&q, &a) in self.freqs.iter().zip(&self.amps) {
            phase.add_term(q, C64::new(a / 2.0, 0.0));
            phase.add_term(-q, C64::new(a / 2.0, 0.0));
        }
        WindingMap::new(0, phase).expect("cosine phases are real")
    }

    /// Fourier coefficients of g via the lacunary Jacobi–Anger expansion.
    pub fn fourier(&self, drop_tol: f64) -> Result<TrigPoly, CounterexampleError> {
        Ok(self.as_winding_map().fourier_sparse(drop_tol)?)
    }
}

/// The twisted Furstenberg-type map f̃ = e^{iν}·g/(g∘R_θ), together with the
/// top-level Cauchy increment bound 2·a_L·‖q_Lθ‖ of the uniform limit.
pub fn furstenberg_f(
    angle: &LiouvilleAngle,
    g: &RoughSolution,
    nu: f64,
) -> (WindingMap, f64) {
    let g_map = g.as_winding_map();
    let f = g_map.mul(&g_map.rotate(angle.theta()).conj());
    let f_tilde = WindingMap::constant(nu).mul(&f);
    let tail = match g.levels() {
        0 => 0.0,
        l => 2.0 * g.amps()[l - 1] * angle.norm_at(l),
    };
    (f_tilde, tail)
}

/// Sparse skew-product for the construction: grids cannot host frequencies
/// at the convergent denominators.
pub fn construction_map(angle: &LiouvilleAngle, f_tilde: &WindingMap, alpha: f64) -> AnzaiMap {
    AnzaiMap::with_policy(
        *angle.theta(),
        alpha,
        f_tilde.clone(),
        FourierPolicy::Sparse { drop_tol: 1e-15 },
    )
}

/// The candidate measurable eigenvector g(U)Vξ_τ and its Koopman residual
/// at eigenvalue e^{iν}.
pub fn eigenvector(
    angle: &LiouvilleAngle,
    g: &RoughSolution,
    nu: f64,
    alpha: f64,
) -> Result<(GnsVector, f64), CounterexampleError> {
    let g_hat = g.fourier(1e-15)?;
    let poly = NcPoly::from_modes(alpha, [(1, g_hat)]);
    let xi = GnsVector::from_poly(poly);
    let (f_tilde, _) = furstenberg_f(angle, g, nu);
    let map = construction_map(angle, &f_tilde, alpha);
    let lambda = C64::new(nu.cos(), nu.sin());
    let residual = eigen_residual(&map, &xi, lambda)?;
    Ok((xi, residual))
}

/// G_k with Φ^k(h(U)V)V^{−1} = G_k(U), computed along two independent paths:
/// (a) iterating the skew-product on h(U)V and stripping V, and
/// (b) the closed form G_k(z) = h(e^{ikθ}z)·g(e^{ikθ}z)^{−1}·g(z).
/// The paths must agree within 1e-9 or the run is rejected.
pub fn gk_functions(
    angle: &LiouvilleAngle,
    g: &RoughSolution,
    h: &TrigPoly,
    ks: &[u64],
    alpha: f64,
) -> Result<Vec<TrigPoly>, CounterexampleError> {
    let (f_tilde, _) = furstenberg_f(angle, g, 0.0); // ν = 0: the untwisted f
    let map = construction_map(angle, &f_tilde, alpha);
    let g_map = g.as_winding_map();
    let a = NcPoly::from_modes(alpha, [(1, h.clone())]);
    let v_inv = NcPoly::v_pow(alpha, -1);
    let mut out = Vec::new();
    for &k in ks {
        let iterated = map.apply_iter(&a, k as i64)?;
        let path_a = iterated.mul(&v_inv).map_err(AnzaiError::from)?.coeff_fn(0);
        let shift = angle.theta().mul_int_angle(k as i64);
        let ratio = g_map.rotate(&shift).conj().mul(&g_map);
        let path_b = h.rotate(&shift).mul(&ratio.fourier_sparse(1e-15)?);
        let dev: f64 = path_a.sub(&path_b).iter().map(|(_, c)| c.norm()).sum();
        if dev > 1e-9 {
            return Err(CounterexampleError::Consistency { k, dev });
        }
        out.push(path_a);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct OscillationStat {
    /// max over dyadic pairs (N₁,N₂) and evaluation points of
    /// |M(N₁) − M(N₂)| for the mode-1 coefficient function.
    pub osc: f64,
    /// Mode-1 values at the evaluation points, per dyadic checkpoint.
    pub checkpoints: Vec<(u64, Vec<C64>)>,
    /// ∮ h·g⁻¹ dm, the pairing the non-convergence argument divides by.
    pub pairing: C64,
}

pub const OSC_POINTS: usize = 32;

/// Finite-window non-settling statistic for M_{h(U)V, e^{iν}}(N).
pub fn oscillation_stat(
    angle: &LiouvilleAngle,
    g: &RoughSolution,
    h: &TrigPoly,
    nu: f64,
    window: (u64, u64),
    alpha: f64,
) -> Result<OscillationStat, CounterexampleError> {
    let (f_tilde, _) = furstenberg_f(angle, g, nu);
    oscillation_for_map(&construction_map(angle, &f_tilde, alpha), g, h, nu, window, alpha)
}

/// The same statistic for an arbitrary skew-product; used for control runs
/// on convergent systems.
pub fn oscillation_for_map(
    map: &AnzaiMap,
    g: &RoughSolution,
    h: &TrigPoly,
    nu: f64,
    window: (u64, u64),
    alpha: f64,
) -> Result<OscillationStat, CounterexampleError> {
    if window.0 == 0 || window.0 > window.1 {
        return Err(CounterexampleError::BadWindow);
    }
    // ∮ h·g⁻¹ dm = ⟨h, g⟩, via the sparse expansion of g
    let g_hat = g.fourier(1e-15)?;
    let pairing = h.inner(&g_hat);
    if pairing.norm() < 0.1 {
        return Err(CounterexampleError::PreconditionFailed { value: pairing.norm() });
    }
    let mut schedule = Vec::new();
    let mut n = window.0;
    while n <= window.1 {
        schedule.push(n);
        if n > window.1 / 2 {
            break;
        }
        n *= 2;
    }
    let a = NcPoly::from_modes(alpha, [(1, h.clone())]);
    let lambda = C64::new(nu.cos(), nu.sin());
    let indices: Vec<usize> = (0..OSC_POINTS).collect();
    let run = map.cesaro_pointwise(&a, lambda, OSC_POINTS, &indices, &schedule)?;
    let checkpoints: Vec<(u64, Vec<C64>)> = run
        .into_iter()
        .map(|cp| (cp.n, cp.modes.get(&1).cloned().unwrap_or_default()))
        .collect();
    let mut osc: f64 = 0.0;
    for i in 0..checkpoints.len() {
        for j in i + 1..checkpoints.len() {
            for (a1, a2) in checkpoints[i].1.iter().zip(&checkpoints[j].1) {
                osc = osc.max((a1 - a2).norm());
            }
        }
    }
    Ok(OscillationStat { osc, checkpoints, pairing })
}

/// Reproducibility manifest for a construction.
pub fn construction_manifest(
    angle: &LiouvilleAngle,
    g: &RoughSolution,
    nu: f64,
    tail_bound: f64,
) -> serde_json::Value {
    serde_json::json!({
        "angle": angle.to_json(),
        "freqs": g.freqs(),
        "amps": g.amps(),
        "nu_radians": nu,
        "tail_bound": tail_bound,
    })
}
