//! Angles kept in unreduced double-double form, with an optional exact
//! rational representation `2π·p/q` for angles coming from continued-fraction
//! convergents.
//!
//! Phases of the form `e^{ikθ}` for large `k` are the backbone of every
//! cocycle computation here. Reducing `k·θ` mod 2π in plain `f64` loses all
//! accuracy once `k·θ ≫ 2π/ε`, so the angle is split into high/low parts and
//! the reduction is carried out in roughly 106-bit arithmetic. When the angle
//! is known to be `2π·p/q` the reduction `k·p mod q` is done in exact integer
//! arithmetic instead, which keeps phases exact even for `k·q ≈ 10^14`.

/// Error-free sum: returns `(s, e)` with `s = fl(a+b)` and `a+b = s+e` exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Error-free product via FMA: `a·b = p + e` exactly.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = f64::mul_add(a, b, -p);
    (p, e)
}

#[inline]
fn dd_add(ah: f64, al: f64, bh: f64, bl: f64) -> (f64, f64) {
    let (s, e) = two_sum(ah, bh);
    let e = e + al + bl;
    let s2 = s + e;
    (s2, e - (s2 - s))
}

#[inline]
fn dd_mul_f64(ah: f64, al: f64, b: f64) -> (f64, f64) {
    let (p, e) = two_prod(ah, b);
    let e = f64::mul_add(al, b, e);
    let s = p + e;
    (s, e - (s - p))
}

// 2π split into high/low doubles (hi + lo = 2π to ~32 decimal digits).
const TWO_PI_HI: f64 = std::f64::consts::TAU;
const TWO_PI_LO: f64 = 2.4492935982947064e-16;

/// `a·b mod m` for non-negative operands, safe against i128 overflow.
fn mul_mod_i128(a: i128, b: i128, m: i128) -> i128 {
    debug_assert!(m > 0 && a >= 0 && b >= 0);
    if let Some(p) = a.checked_mul(b) {
        return p % m;
    }
    let mut acc: i128 = 0;
    let mut base = a % m;
    let mut k = b;
    while k > 0 {
        if k & 1 == 1 {
            acc = (acc + base) % m;
        }
        base = (base + base) % m;
        k >>= 1;
    }
    acc
}

/// An angle in radians, stored unreduced as a double-double, optionally
/// tagged with the exact value `2π·p/q`.
#[derive(Clone, Copy, Debug)]
pub struct Angle {
    hi: f64,
    lo: f64,
    rational: Option<(i128, i128)>,
}

impl Angle {
    pub const ZERO: Angle = Angle { hi: 0.0, lo: 0.0, rational: Some((0, 1)) };

    pub fn from_radians(x: f64) -> Self {
        Angle { hi: x, lo: 0.0, rational: None }
    }

    /// The angle `2π·x` with the product carried out in double-double.
    pub fn two_pi_times(x: f64) -> Self {
        let (p, e) = two_prod(TWO_PI_HI, x);
        let e = f64::mul_add(TWO_PI_LO, x, e);
        let hi = p + e;
        let lo = e - (hi - p);
        Angle { hi, lo, rational: None }
    }

    /// The exact angle `2π·p/q` (`q > 0`); `p` is reduced into `[0, q)`.
    pub fn two_pi_ratio(p: i128, q: i128) -> Self {
        assert!(q > 0, "denominator must be positive");
        let p = p.rem_euclid(q);
        // double-double approximation of p/q via staged integer division
        let int = (p / q) as f64; // zero after rem_euclid, kept for clarity
        let r0 = p % q;
        let d1 = (r0 << 26) / q;
        let r1 = (r0 << 26) - d1 * q;
        let d2 = (r1 << 26) / q;
        let r2 = (r1 << 26) - d2 * q;
        let d3 = (r2 << 26) / q;
        let scale = (1u64 << 26) as f64;
        let frac = ((d3 as f64 / scale + d2 as f64) / scale + d1 as f64) / scale;
        let (h1, l1) = dd_mul_f64(TWO_PI_HI, TWO_PI_LO, int + frac);
        Angle { hi: h1, lo: l1, rational: Some((p, q)) }
    }

    /// The golden rotation `2π·(√5−1)/2`.
    pub fn golden() -> Self {
        Angle::two_pi_times((5.0_f64.sqrt() - 1.0) / 2.0)
    }

    pub fn radians(&self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_zero(&self) -> bool {
        self.hi == 0.0 && self.lo == 0.0
    }

    pub fn rational(&self) -> Option<(i128, i128)> {
        self.rational
    }

    pub fn neg(&self) -> Self {
        Angle {
            hi: -self.hi,
            lo: -self.lo,
            rational: self.rational.map(|(p, q)| ((-p).rem_euclid(q), q)),
        }
    }

    pub fn add(&self, other: &Angle) -> Self {
        let (hi, lo) = dd_add(self.hi, self.lo, other.hi, other.lo);
        let rational = match (self.rational, other.rational) {
            (Some((p1, q1)), Some((p2, q2))) if q1 == q2 => Some(((p1 + p2) % q1, q1)),
            (Some((p1, 1)), Some((p2, 1))) => Some((p1 + p2, 1)),
            _ => None,
        };
        Angle { hi, lo, rational }
    }

    /// `k·θ` reduced into `(−π, π]`, in high accuracy.
    pub fn mul_int(&self, k: i64) -> f64 {
        if let Some((p, q)) = self.rational {
            // exact reduction in ℤ: kθ mod 2π = 2π·((k·p mod q)/q)
            let (ka, sign) = if k < 0 { (-(k as i128), -1.0) } else { (k as i128, 1.0) };
            let mut r = mul_mod_i128(ka, p, q);
            let mut s = sign;
            if 2 * r > q {
                r = q - r;
                s = -s;
            }
            return s * TWO_PI_HI * (r as f64 / q as f64);
        }
        let (rh, rl) = self.mul_int_dd(k);
        rh + rl
    }

    fn mul_int_dd(&self, k: i64) -> (f64, f64) {
        let kf = k as f64;
        let (p1, e1) = two_prod(self.hi, kf);
        let (p2, e2) = two_prod(self.lo, kf);
        let (th, tl) = dd_add(p1, e1, p2, e2);
        // subtract the nearest multiple of 2π
        let n = (th / TWO_PI_HI).round();
        if n == 0.0 {
            return (th, tl);
        }
        let (m1, f1) = two_prod(TWO_PI_HI, n);
        let (m2, f2) = two_prod(TWO_PI_LO, n);
        let (sh, sl) = dd_add(th, tl, -m1, -f1);
        dd_add(sh, sl, -m2, -f2)
    }

    /// `e^{ikθ}` with the argument reduced first.
    pub fn cis_int(&self, k: i64) -> num_complex::Complex64 {
        if self.rational.is_some() {
            let t = self.mul_int(k);
            return num_complex::Complex64::new(t.cos(), t.sin());
        }
        let (rh, rl) = self.mul_int_dd(k);
        let (s, c) = rh.sin_cos();
        // first-order correction for the low part
        num_complex::Complex64::new(c - rl * s, s + rl * c)
    }

    /// The angle `k·θ`, staying exact when `θ` is rational.
    pub fn mul_int_angle(&self, k: i64) -> Angle {
        if let Some((p, q)) = self.rational {
            let ka = k as i128;
            let r = if ka >= 0 {
                mul_mod_i128(ka, p, q)
            } else {
                (q - mul_mod_i128(-ka, p, q)) % q
            };
            return Angle::two_pi_ratio(r, q);
        }
        let kf = k as f64;
        let (p1, e1) = two_prod(self.hi, kf);
        let e1 = f64::mul_add(self.lo, kf, e1);
        let hi = p1 + e1;
        let lo = e1 - (hi - p1);
        Angle { hi, lo, rational: None }
    }
}

/// Reduce a plain `f64` angle into `(−π, π]`.
pub fn reduce_radians(t: f64) -> f64 {
    let n = (t / TWO_PI_HI).round();
    if n == 0.0 {
        return t;
    }
    let (m1, f1) = two_prod(TWO_PI_HI, n);
    let (s, e) = two_sum(t, -m1);
    s + (e - f64::mul_add(TWO_PI_LO, n, f1))
}
