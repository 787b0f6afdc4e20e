//! Scalar functions on the unit circle: sparse trigonometric polynomials,
//! continuous circle-valued maps in log form, and sampled grids.
//!
//! Circle-valued maps `f: 𝕋 → 𝕋` are stored as `f(e^{it}) = e^{i(w·t + h(t))}`
//! with an integer winding `w` and a real trigonometric phase series `h`.
//! Pointwise products then reduce to integer and coefficient additions, so
//! long cocycle products stay exact and their Fourier support never grows.

use std::collections::BTreeMap;

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::angle::Angle;
use crate::special::bessel_j;

const TWO_PI: f64 = std::f64::consts::TAU;

#[derive(Debug, Error)]
pub enum CircleError {
    #[error("grid of size {grid} cannot resolve frequency {freq}")]
    GridTooSmall { grid: usize, freq: i64 },
    #[error("truncation K={trunc} must satisfy K < grid/2 = {grid}/2")]
    InvalidTruncation { trunc: i64, grid: usize },
    #[error("samples deviate from the unit circle by {dev:.3e} at index {index}")]
    NotUnimodular { index: usize, dev: f64 },
    #[error("argument jump of {jump:.4} rad at index {index}; grid too coarse for winding extraction")]
    Aliasing { index: usize, jump: f64 },
    #[error("phase series is not real-valued: asymmetry {dev:.3e} at frequency {freq}")]
    PhaseNotReal { freq: i64, dev: f64 },
    #[error("sinusoid amplitude {amp:.2} exceeds the safe range of the series expansion")]
    AmplitudeTooLarge { amp: f64 },
}

mod fft {
    use num_complex::Complex64 as C64;
    use rustfft::FftPlanner;
    use std::cell::RefCell;

    thread_local! {
        static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
    }

    pub fn forward(buf: &mut [C64]) {
        let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
        fft.process(buf);
    }

    pub fn inverse(buf: &mut [C64]) {
        let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
        fft.process(buf);
    }
}

/// e^{2πi r/g} for r in 0..g; g is a power of two so r/g is exact.
fn root_of_unity(r: usize, g: usize) -> C64 {
    let t = TWO_PI * (r as f64 / g as f64);
    C64::new(t.cos(), t.sin())
}

fn grid_index(freq: i64, j: usize, grid: usize) -> usize {
    (freq as i128 * j as i128).rem_euclid(grid as i128) as usize
}

/// A finitely supported Fourier series Σ_k c_k z^k on the circle.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrigPoly {
    coeffs: BTreeMap<i64, C64>,
}

impl TrigPoly {
    pub fn zero() -> Self {
        TrigPoly { coeffs: BTreeMap::new() }
    }

    pub fn constant(c: C64) -> Self {
        let mut p = TrigPoly::zero();
        p.add_term(0, c);
        p
    }

    /// The character z ↦ z^k.
    pub fn character(k: i64) -> Self {
        let mut p = TrigPoly::zero();
        p.add_term(k, C64::new(1.0, 0.0));
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (i64, C64)>>(terms: I) -> Self {
        let mut p = TrigPoly::zero();
        for (k, c) in terms {
            p.add_term(k, c);
        }
        p
    }

    pub fn add_term(&mut self, k: i64, c: C64) {
        let entry = self.coeffs.entry(k).or_insert(C64::new(0.0, 0.0));
        *entry += c;
        if entry.norm_sqr() == 0.0 {
            self.coeffs.remove(&k);
        }
    }

    pub fn coeff(&self, k: i64) -> C64 {
        self.coeffs.get(&k).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        self.coeffs.iter().map(|(&k, &c)| (k, c))
    }

    pub fn support_len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Largest |k| in the support.
    pub fn support_radius(&self) -> i64 {
        self.coeffs.keys().map(|k| k.abs()).max().unwrap_or(0)
    }

    pub fn prune(&mut self, tol: f64) {
        self.coeffs.retain(|_, c| c.norm() > tol);
    }

    pub fn add(&self, other: &TrigPoly) -> TrigPoly {
        let mut out = self.clone();
        for (k, c) in other.iter() {
            out.add_term(k, c);
        }
        out
    }

    pub fn sub(&self, other: &TrigPoly) -> TrigPoly {
        let mut out = self.clone();
        for (k, c) in other.iter() {
            out.add_term(k, -c);
        }
        out
    }

    pub fn scale(&self, c: C64) -> TrigPoly {
        TrigPoly {
            coeffs: self.coeffs.iter().map(|(&k, &v)| (k, v * c)).collect(),
        }
    }

    /// Pointwise product (coefficient convolution).
    pub fn mul(&self, other: &TrigPoly) -> TrigPoly {
        let mut out = TrigPoly::zero();
        for (k1, c1) in self.iter() {
            for (k2, c2) in other.iter() {
                out.add_term(k1 + k2, c1 * c2);
            }
        }
        out
    }

    /// Multiplication by z^d.
    pub fn shift(&self, d: i64) -> TrigPoly {
        TrigPoly {
            coeffs: self.coeffs.iter().map(|(&k, &c)| (k + d, c)).collect(),
        }
    }

    /// The conjugate function z ↦ conj(p(z)); on |z|=1 this sends c_k to conj(c_{-k}).
    pub fn conj_fn(&self) -> TrigPoly {
        TrigPoly {
            coeffs: self.coeffs.iter().map(|(&k, &c)| (-k, c.conj())).collect(),
        }
    }

    /// rotate(p, β)(e^{it}) = p(e^{i(t+β)}): coefficients pick up e^{ikβ}.
    pub fn rotate(&self, beta: &Angle) -> TrigPoly {
        TrigPoly {
            coeffs: self
                .coeffs
                .iter()
                .map(|(&k, &c)| (k, c * beta.cis_int(k)))
                .collect(),
        }
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum()
    }

    /// ⟨p, q⟩ = Σ_k p_k conj(q_k), the L²(𝕋) inner product.
    pub fn inner(&self, other: &TrigPoly) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (k, c) in self.iter() {
            acc += c * other.coeff(k).conj();
        }
        acc
    }

    /// None when the series is a real-valued function (within tol), else the
    /// worst offending frequency.
    pub fn realness_defect(&self, tol: f64) -> Option<(i64, f64)> {
        let mut worst: Option<(i64, f64)> = None;
        for (k, c) in self.iter() {
            if k < 0 {
                continue;
            }
            let dev = if k == 0 {
                c.im.abs()
            } else {
                (c.conj() - self.coeff(-k)).norm()
            };
            if dev > tol && worst.is_none_or(|(_, w)| dev > w) {
                worst = Some((k, dev));
            }
        }
        worst
    }

    pub fn eval(&self, t: f64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (k, c) in self.iter() {
            let phase = k as f64 * t;
            acc += c * C64::new(phase.cos(), phase.sin());
        }
        acc
    }

    /// Evaluate at t = 2πj/grid + shift with every per-frequency phase reduced
    /// exactly; this is safe even for frequencies near 2^53.
    pub fn eval_grid_shifted(&self, j: usize, grid: usize, shift: &Angle) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (k, c) in self.iter() {
            let zg = root_of_unity(grid_index(k, j, grid), grid);
            acc += c * zg * shift.cis_int(k);
        }
        acc
    }

    /// Samples on the uniform grid t_j = 2πj/G, via FFT when the support fits
    /// and by exact sparse evaluation otherwise.
    pub fn eval_on_grid(&self, grid: usize) -> Vec<C64> {
        debug_assert!(grid.is_power_of_two());
        if self.support_radius() < grid as i64 / 2 {
            let mut buf = vec![C64::new(0.0, 0.0); grid];
            for (k, c) in self.iter() {
                buf[k.rem_euclid(grid as i64) as usize] += c;
            }
            fft::inverse(&mut buf);
            buf
        } else {
            (0..grid)
                .map(|j| {
                    let mut acc = C64::new(0.0, 0.0);
                    for (k, c) in self.iter() {
                        acc += c * root_of_unity(grid_index(k, j, grid), grid);
                    }
                    acc
                })
                .collect()
        }
    }

    /// Rigorous two-sided bound for sup |p| on the circle: the grid maximum
    /// from below, plus the derivative correction (2π/G)·Σ|k||c_k| from above.
    pub fn sup_norm(&self, grid: usize) -> (f64, f64) {
        if self.is_empty() {
            return (0.0, 0.0);
        }
        let lower = self
            .eval_on_grid(grid)
            .iter()
            .map(|s| s.norm())
            .fold(0.0, f64::max);
        let deriv: f64 = self.iter().map(|(k, c)| k.abs() as f64 * c.norm()).sum();
        (lower, lower + TWO_PI / grid as f64 * deriv)
    }
}

/// A continuous map 𝕋 → 𝕋 in log form: f(e^{it}) = e^{i(w·t + h(t))}.
#[derive(Clone, Debug)]
pub struct WindingMap {
    winding: i64,
    phase: TrigPoly,
}

impl WindingMap {
    /// The constant map 1.
    pub fn one() -> Self {
        WindingMap { winding: 0, phase: TrigPoly::zero() }
    }

    pub fn new(winding: i64, phase: TrigPoly) -> Result<Self, CircleError> {
        if let Some((freq, dev)) = phase.realness_defect(1e-12) {
            return Err(CircleError::PhaseNotReal { freq, dev });
        }
        Ok(WindingMap { winding, phase })
    }

    /// z ↦ z0·z^w for |z0| = 1.
    pub fn character(z0: C64, winding: i64) -> Result<Self, CircleError> {
        let dev = (z0.norm() - 1.0).abs();
        if dev > 1e-12 {
            return Err(CircleError::NotUnimodular { index: 0, dev });
        }
        let mut phase = TrigPoly::zero();
        let arg = z0.im.atan2(z0.re);
        if arg != 0.0 {
            phase.add_term(0, C64::new(arg, 0.0));
        }
        Ok(WindingMap { winding, phase })
    }

    /// The constant map e^{ia}.
    pub fn constant(a: f64) -> Self {
        let mut phase = TrigPoly::zero();
        if a != 0.0 {
            phase.add_term(0, C64::new(a, 0.0));
        }
        WindingMap { winding: 0, phase }
    }

    /// e^{i·amp·sin(freq·t)}, winding zero.
    pub fn exp_sin(amp: f64, freq: i64) -> Self {
        let mut phase = TrigPoly::zero();
        phase.add_term(freq, C64::new(0.0, -amp / 2.0));
        phase.add_term(-freq, C64::new(0.0, amp / 2.0));
        WindingMap { winding: 0, phase }
    }

    /// e^{i·amp·cos(freq·t)}, winding zero.
    pub fn exp_cos(amp: f64, freq: i64) -> Self {
        let mut phase = TrigPoly::zero();
        phase.add_term(freq, C64::new(amp / 2.0, 0.0));
        phase.add_term(-freq, C64::new(amp / 2.0, 0.0));
        WindingMap { winding: 0, phase }
    }

    pub fn winding(&self) -> i64 {
        self.winding
    }

    pub fn phase(&self) -> &TrigPoly {
        &self.phase
    }

    /// Pointwise product: windings and phases add.
    pub fn mul(&self, other: &WindingMap) -> WindingMap {
        WindingMap {
            winding: self.winding + other.winding,
            phase: self.phase.add(&other.phase),
        }
    }

    /// Pointwise conjugate (= inverse, since |f| = 1).
    pub fn conj(&self) -> WindingMap {
        WindingMap {
            winding: -self.winding,
            phase: self.phase.scale(C64::new(-1.0, 0.0)),
        }
    }

    /// rotate(f, β)(e^{it}) = f(e^{i(t+β)}): the phase rotates and the winding
    /// contributes the constant w·β.
    pub fn rotate(&self, beta: &Angle) -> WindingMap {
        let mut phase = self.phase.rotate(beta);
        if self.winding != 0 {
            phase.add_term(0, C64::new(beta.mul_int(self.winding), 0.0));
        }
        WindingMap { winding: self.winding, phase }
    }

    fn phase_value(&self, raw: C64) -> f64 {
        debug_assert!(raw.im.abs() < 1e-9, "phase drifted off the real axis");
        raw.re
    }

    pub fn eval(&self, t: f64) -> C64 {
        let h = self.phase_value(self.phase.eval(t));
        let total = self.winding as f64 * t + h;
        C64::new(total.cos(), total.sin())
    }

    /// Exact-reduction evaluation at t = 2πj/grid + shift.
    pub fn eval_grid_shifted(&self, j: usize, grid: usize, shift: &Angle) -> C64 {
        let h = self.phase_value(self.phase.eval_grid_shifted(j, grid, shift));
        let zh = C64::new(h.cos(), h.sin());
        if self.winding == 0 {
            return zh;
        }
        let zw = root_of_unity(grid_index(self.winding, j, grid), grid)
            * shift.cis_int(self.winding);
        zw * zh
    }

    /// Samples on the uniform grid.
    pub fn to_grid(&self, grid: usize) -> GridFn {
        let hs = self.phase.eval_on_grid(grid);
        let samples = (0..grid)
            .map(|j| {
                let h = self.phase_value(hs[j]);
                let zh = C64::new(h.cos(), h.sin());
                if self.winding == 0 {
                    zh
                } else {
                    root_of_unity(grid_index(self.winding, j, grid), grid) * zh
                }
            })
            .collect();
        GridFn { samples }
    }

    /// Truncated Fourier series via FFT on `grid` samples, together with the
    /// ℓ²-mass left outside [−trunc, trunc].
    pub fn to_fourier(&self, grid: usize, trunc: i64) -> Result<(TrigPoly, f64), CircleError> {
        self.to_grid(grid).to_fourier(trunc)
    }

    /// Exact sparse Fourier expansion: each sinusoid in the phase is expanded
    /// by Jacobi–Anger and the factors are convolved. Complements the FFT
    /// route when the phase lives at frequencies the grid cannot resolve.
    pub fn fourier_sparse(&self, drop_tol: f64) -> Result<TrigPoly, CircleError> {
        let mut acc = TrigPoly::constant(C64::new(1.0, 0.0));
        for (q, c) in self.phase.iter() {
            if q < 0 {
                continue;
            }
            if q == 0 {
                let a = self.phase_value(c);
                acc = acc.scale(C64::new(a.cos(), a.sin()));
                continue;
            }
            // 2·Re(c e^{iqt}) = A cos(qt + ψ); e^{iA cos φ} = Σ_m i^m J_m(A) e^{imφ}
            let amp = 2.0 * c.norm();
            if amp > 25.0 {
                return Err(CircleError::AmplitudeTooLarge { amp });
            }
            let psi = c.im.atan2(c.re);
            let mut factor = TrigPoly::zero();
            let mut m = 0i64;
            loop {
                let jm = bessel_j(m, amp);
                if jm.abs() >= drop_tol {
                    // i^m, kept exact
                    let im = match m.rem_euclid(4) {
                        0 => C64::new(1.0, 0.0),
                        1 => C64::new(0.0, 1.0),
                        2 => C64::new(-1.0, 0.0),
                        _ => C64::new(0.0, -1.0),
                    };
                    let up = im * jm * C64::new((m as f64 * psi).cos(), (m as f64 * psi).sin());
                    factor.add_term(m * q, up);
                    if m > 0 {
                        let down =
                            im * jm * C64::new((m as f64 * psi).cos(), -(m as f64 * psi).sin());
                        factor.add_term(-m * q, down);
                    }
                } else if m as f64 > amp + 2.0 {
                    break;
                }
                m += 1;
            }
            acc = acc.mul(&factor);
            acc.prune(drop_tol);
        }
        Ok(acc.shift(self.winding))
    }
}

/// Uniform samples of a function at t_j = 2πj/G, G a power of two.
#[derive(Clone, Debug)]
pub struct GridFn {
    samples: Vec<C64>,
}

impl GridFn {
    pub fn from_samples(samples: Vec<C64>) -> Self {
        assert!(samples.len().is_power_of_two(), "grid size must be a power of two");
        GridFn { samples }
    }

    pub fn from_fn<F: FnMut(f64) -> C64>(grid: usize, mut f: F) -> Self {
        assert!(grid.is_power_of_two());
        GridFn {
            samples: (0..grid)
                .map(|j| f(TWO_PI * (j as f64 / grid as f64)))
                .collect(),
        }
    }

    pub fn from_trig_poly(p: &TrigPoly, grid: usize) -> Result<Self, CircleError> {
        let radius = p.support_radius();
        if radius >= grid as i64 / 2 {
            return Err(CircleError::GridTooSmall { grid, freq: radius });
        }
        Ok(GridFn { samples: p.eval_on_grid(grid) })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn mul_pointwise(&self, other: &GridFn) -> GridFn {
        assert_eq!(self.len(), other.len());
        GridFn {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    /// (1/G)·Σ|s_j|², i.e. the L²(𝕋) norm² of the trigonometric interpolant.
    pub fn parseval_norm_sq(&self) -> f64 {
        let mut sum = 0.0;
        let mut comp = 0.0;
        for s in &self.samples {
            let y = s.norm_sqr() - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum / self.len() as f64
    }

    /// Fourier coefficients in [−K, K] plus the ℓ²-mass of the discarded bins.
    pub fn to_fourier(&self, trunc: i64) -> Result<(TrigPoly, f64), CircleError> {
        let g = self.len();
        if trunc < 0 || trunc as usize >= g / 2 {
            return Err(CircleError::InvalidTruncation { trunc, grid: g });
        }
        let mut buf = self.samples.clone();
        fft::forward(&mut buf);
        let scale = 1.0 / g as f64;
        let mut poly = TrigPoly::zero();
        let mut tail = 0.0;
        for (b, v) in buf.iter().enumerate() {
            let freq = if b < g / 2 { b as i64 } else { b as i64 - g as i64 };
            let c = v * scale;
            if freq.abs() <= trunc {
                if c.norm() > 0.0 {
                    poly.add_term(freq, c);
                }
            } else {
                tail += c.norm_sqr();
            }
        }
        Ok((poly, tail.sqrt()))
    }

    /// Total winding of unimodular samples around the circle.
    pub fn winding_number(&self) -> Result<i64, CircleError> {
        let g = self.len();
        for (index, s) in self.samples.iter().enumerate() {
            let dev = (s.norm() - 1.0).abs();
            if dev > 1e-6 {
                return Err(CircleError::NotUnimodular { index, dev });
            }
        }
        let mut total = 0.0;
        for j in 0..g {
            let ratio = self.samples[(j + 1) % g] * self.samples[j].conj();
            let jump = ratio.im.atan2(ratio.re);
            if jump.abs() >= std::f64::consts::PI - 1e-9 {
                return Err(CircleError::Aliasing { index: j, jump });
            }
            total += jump;
        }
        let w = total / TWO_PI;
        let rounded = w.round();
        debug_assert!((w - rounded).abs() < 1e-6);
        Ok(rounded as i64)
    }
}
