//! Classical Anzai skew-products on 𝕋² and skew-product processes over an
//! abstract base, used both as a standalone simulator and as an independent
//! oracle for the α = 0 noncommutative computation.
//!
//! The bridge at α = 0: U^mVⁿ ↔ e^{i(ms+nt)} and the skew-product action is
//! composition with T_{θ,h}(s,t) = (s+θ, t+h(s)), where f = e^{ih}.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::angle::{reduce_radians, Angle};
use crate::anzai::{AnzaiError, AnzaiMap};
use crate::circle::WindingMap;
use crate::torus::NcPoly;

#[derive(Debug, Error)]
pub enum ClassicalError {
    #[error("the classical cross-check needs alpha = 0, got {0}")]
    AlphaNotZero(f64),
    #[error(transparent)]
    Anzai(#[from] AnzaiError),
}

/// A point (s, t) on the 2-torus, coordinates kept unreduced in radians.
#[derive(Clone, Copy, Debug)]
pub struct TorusPoint {
    pub s: f64,
    pub t: f64,
}

impl TorusPoint {
    pub fn new(s: f64, t: f64) -> Self {
        TorusPoint { s, t }
    }

    /// e^{i(p·s + q·t)}, phase-stable for coordinates up to ~10⁹ radians.
    pub fn character(&self, p: i64, q: i64) -> C64 {
        let ps = Angle::from_radians(self.s).mul_int(p);
        let qt = Angle::from_radians(self.t).mul_int(q);
        let total = reduce_radians(ps + qt);
        C64::new(total.cos(), total.sin())
    }
}

/// The lift h(s) = w·s + phase(s) of the circle-valued map f = e^{ih}.
fn lift(h: &WindingMap, s: f64) -> f64 {
    let phase = h.phase().eval(s);
    debug_assert!(phase.im.abs() < 1e-9);
    h.winding() as f64 * s + phase.re
}

/// One step of T_{θ,h}: (s, t) ↦ (s + θ, t + h(s)).
pub fn anzai_step(theta: &Angle, h: &WindingMap, p: &TorusPoint) -> TorusPoint {
    TorusPoint { s: p.s + theta.radians(), t: p.t + lift(h, p.s) }
}

/// The inverse step (s, t) ↦ (s − θ, t − h(s − θ)).
pub fn anzai_step_inverse(theta: &Angle, h: &WindingMap, p: &TorusPoint) -> TorusPoint {
    let s = p.s - theta.radians();
    TorusPoint { s, t: p.t - lift(h, s) }
}

#[derive(Clone, Debug)]
pub struct BirkhoffResult {
    pub average: C64,
    pub checkpoints: Vec<(u64, C64)>,
}

/// Weighted Birkhoff average (1/N) Σ_{k<N} λ^{−k} e^{i(p·s_k + q·t_k)} along
/// the orbit of `start`, with dyadic checkpoints.
pub fn birkhoff(
    theta: &Angle,
    h: &WindingMap,
    start: &TorusPoint,
    character: (i64, i64),
    lambda: C64,
    n: u64,
) -> BirkhoffResult {
    let (p, q) = character;
    let lam_inv = lambda.conj();
    let mut lam_pow = C64::new(1.0, 0.0);
    let mut sum = C64::new(0.0, 0.0);
    let mut comp = C64::new(0.0, 0.0);
    let mut checkpoints = Vec::new();
    let mut mark = 64u64.min(n);
    // t is accumulated from mod-2π-reduced fiber increments with Kahan
    // compensation: characters cannot tell, and the phase stays accurate
    // over orbits where the raw t would grow like k².
    let mut tc = (start.t, 0.0f64);
    for k in 0..n {
        // s_k from k·θ directly: no additive drift over long orbits
        let sk = start.s + theta.mul_int(k as i64);
        let term = lam_pow * TorusPoint::new(sk, tc.0).character(p, q);
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        let dt = reduce_radians(lift(h, sk));
        let y2 = dt - tc.1;
        let t2 = tc.0 + y2;
        tc.1 = (t2 - tc.0) - y2;
        tc.0 = t2;
        lam_pow *= lam_inv;
        if k + 1 == mark {
            checkpoints.push((k + 1, sum / (k + 1) as f64));
            mark = (mark * 2).min(n);
        }
    }
    if checkpoints.last().map(|&(m, _)| m) != Some(n) {
        checkpoints.push((n, sum / n as f64));
    }
    BirkhoffResult { average: sum / n as f64, checkpoints }
}

/// Compare the α = 0 noncommutative Cesaro average, evaluated as a function
/// on 𝕋², against the classical Birkhoff average of the same function along
/// the same orbit. Returns the worst deviation over the sample points.
pub fn crosscheck_alpha0(
    map: &AnzaiMap,
    a: &NcPoly,
    n: u64,
    points: &[TorusPoint],
) -> Result<f64, ClassicalError> {
    if map.alpha() != 0.0 {
        return Err(ClassicalError::AlphaNotZero(map.alpha()));
    }
    let result = map.cesaro(a, C64::new(1.0, 0.0), &[n], None)?;
    let average = &result.checkpoints[0].average;
    let theta = map.theta();
    let h = map.f();
    let mut worst: f64 = 0.0;
    for start in points {
        // classical side: (1/N) Σ_k a(T^k(s,t)) with a(s,t) = Σ c_{mn} e^{i(ms+nt)}
        let mut sum = C64::new(0.0, 0.0);
        let mut comp = C64::new(0.0, 0.0);
        let mut tc = (start.t, 0.0f64);
        for k in 0..n {
            let sk = start.s + theta.mul_int(k as i64);
            let pk = TorusPoint::new(sk, tc.0);
            let mut val = C64::new(0.0, 0.0);
            for (m, nn, c) in a.terms() {
                val += c * pk.character(m, nn);
            }
            let y = val - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            let dt = reduce_radians(lift(h, sk));
            let y2 = dt - tc.1;
            let t2 = tc.0 + y2;
            tc.1 = (t2 - tc.0) - y2;
            tc.0 = t2;
        }
        let classical = sum / n as f64;
        // noncommutative side evaluated at the same point
        let mut nc = C64::new(0.0, 0.0);
        for mode in average.modes() {
            let cval = average.coeff_fn(mode).eval(start.s);
            let qt = Angle::from_radians(start.t).mul_int(mode);
            nc += cval * C64::new(qt.cos(), qt.sin());
        }
        worst = worst.max((classical - nc).norm());
    }
    Ok(worst)
}

/// A base dynamical system for skew-product processes T(x, z) = (T₀x, f(x)z).
pub trait ProcessBase {
    type Point: Clone;
    fn step(&self, p: &Self::Point) -> Self::Point;
    /// A point distributed per the invariant measure, from two uniforms.
    fn sample(&self, u1: f64, u2: f64) -> Self::Point;
}

/// Irrational rotation on the circle.
pub struct CircleRotation {
    pub theta: Angle,
}

impl ProcessBase for CircleRotation {
    type Point = f64;
    fn step(&self, p: &f64) -> f64 {
        p + self.theta.radians()
    }
    fn sample(&self, u1: f64, _u2: f64) -> f64 {
        std::f64::consts::TAU * u1
    }
}

/// Product rotation on the 2-torus.
pub struct TorusRotation {
    pub theta1: Angle,
    pub theta2: Angle,
}

impl ProcessBase for TorusRotation {
    type Point = TorusPoint;
    fn step(&self, p: &TorusPoint) -> TorusPoint {
        TorusPoint { s: p.s + self.theta1.radians(), t: p.t + self.theta2.radians() }
    }
    fn sample(&self, u1: f64, u2: f64) -> TorusPoint {
        TorusPoint::new(std::f64::consts::TAU * u1, std::f64::consts::TAU * u2)
    }
}

/// The unimodular fiber map of a skew-product process.
pub type FiberMap<P> = Box<dyn Fn(&P) -> C64 + Send + Sync>;

/// A process on the torus: a base system with a unimodular fiber map.
pub struct ProcessSystem<B: ProcessBase> {
    pub base: B,
    pub fiber: FiberMap<B::Point>,
}

impl<B: ProcessBase> ProcessSystem<B> {
    /// T(x, z) = (T₀x, f(x)·z).
    pub fn step(&self, state: &(B::Point, C64)) -> (B::Point, C64) {
        let (x, z) = state;
        (self.base.step(x), (self.fiber)(x) * z)
    }
}
