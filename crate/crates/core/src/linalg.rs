//! Complex banded linear algebra: Givens QR, smallest-singular-value
//! extraction by inverse iteration, and Hermitian inertia bisection.

use num_complex::Complex64 as C64;

/// Complex banded matrix with `bl` sub- and `bu` super-diagonals, stored
/// row-major as `data[i * width + (j − i + bl)]`.
#[derive(Clone, Debug)]
pub struct BandedMatrix {
    n: usize,
    bl: usize,
    bu: usize,
    data: Vec<C64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bl: usize, bu: usize) -> Self {
        BandedMatrix {
            n,
            bl,
            bu,
            data: vec![C64::new(0.0, 0.0); n * (bl + bu + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.bl, self.bu)
    }

    #[inline]
    fn width(&self) -> usize {
        self.bl + self.bu + 1
    }

    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.bl >= i && j <= i + self.bu
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        if self.in_band(i, j) {
            self.data[i * self.width() + (j + self.bl - i)]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        debug_assert!(self.in_band(i, j), "({i},{j}) outside band");
        let w = self.width();
        self.data[i * w + (j + self.bl - i)] = v;
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bl);
            let hi = (i + self.bu).min(self.n - 1);
            let mut acc = C64::new(0.0, 0.0);
            for j in lo..=hi {
                acc += self.get(i, j) * x[j];
            }
            out[i] = acc;
        }
        out
    }

    /// R factor of the QR decomposition by Givens rotations; upper bandwidth
    /// grows to `bl + bu`.
    pub fn qr_r(&self) -> BandedMatrix {
        let n = self.n;
        let bu_r = (self.bl + self.bu).min(n.saturating_sub(1));
        let mut r = BandedMatrix::zeros(n, 0, bu_r);
        // widen into a working copy that still tracks sub-diagonals
        let mut w = BandedMatrix::zeros(n, self.bl, bu_r);
        for i in 0..n {
            let lo = i.saturating_sub(self.bl);
            let hi = (i + self.bu).min(n - 1);
            for j in lo..=hi {
                w.set(i, j, self.get(i, j));
            }
        }
        for j in 0..n {
            let last = (j + self.bl).min(n - 1);
            for i in (j + 1..=last).rev() {
                let a = w.get(i - 1, j);
                let b = w.get(i, j);
                if b.norm_sqr() == 0.0 {
                    continue;
                }
                let (c, s) = givens(a, b);
                let cols_hi = ((i - 1) + bu_r).min(n - 1);
                for col in j..=cols_hi {
                    let top = if w.in_band(i - 1, col) { w.get(i - 1, col) } else { C64::new(0.0, 0.0) };
                    let bot = if w.in_band(i, col) { w.get(i, col) } else { C64::new(0.0, 0.0) };
                    let new_top = c * top + s * bot;
                    let new_bot = -s.conj() * top + c * bot;
                    if w.in_band(i - 1, col) {
                        w.set(i - 1, col, new_top);
                    }
                    if w.in_band(i, col) {
                        w.set(i, col, new_bot);
                    }
                }
            }
        }
        for i in 0..n {
            for j in i..=(i + bu_r).min(n - 1) {
                r.set(i, j, w.get(i, j));
            }
        }
        r
    }
}

/// Complex Givens rotation zeroing b against a: returns real c and complex s
/// with c² + |s|² = 1 and −conj(s)·a + c·b = 0.
fn givens(a: C64, b: C64) -> (f64, C64) {
    let na = a.norm();
    let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
    if na == 0.0 {
        (0.0, b.conj() / b.norm())
    } else {
        (na / r, (a / na) * b.conj() / r)
    }
}

// Kept well above sqrt(f64::MIN_POSITIVE): complex division squares the
// divisor norm, so a smaller floor would underflow to inf.
const DIAG_FLOOR: f64 = 1e-140;

/// Solve R x = b for upper-banded R; near-zero pivots are floored so that
/// inverse iteration simply blows up along the null direction.
fn solve_upper(r: &BandedMatrix, b: &[C64]) -> Vec<C64> {
    let n = r.n();
    let (_, bu) = r.bandwidths();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let hi = (i + bu).min(n - 1);
        let mut acc = x[i];
        for j in i + 1..=hi {
            acc -= r.get(i, j) * x[j];
        }
        let mut d = r.get(i, i);
        if d.norm() < DIAG_FLOOR {
            d = C64::new(DIAG_FLOOR, 0.0);
        }
        x[i] = acc / d;
    }
    x
}

/// Solve R* y = b (conjugate transpose of upper-banded R is lower-banded).
fn solve_upper_conj_transpose(r: &BandedMatrix, b: &[C64]) -> Vec<C64> {
    let n = r.n();
    let (_, bu) = r.bandwidths();
    let mut y = b.to_vec();
    for i in 0..n {
        let lo = i.saturating_sub(bu);
        let mut acc = y[i];
        for j in lo..i {
            acc -= r.get(j, i).conj() * y[j];
        }
        let mut d = r.get(i, i).conj();
        if d.norm() < DIAG_FLOOR {
            d = C64::new(DIAG_FLOOR, 0.0);
        }
        y[i] = acc / d;
    }
    y
}

fn norm(x: &[C64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Divide out the largest component magnitude; returns that magnitude.
fn rescale_by_max(x: &mut [C64]) -> f64 {
    let m = x.iter().map(|v| v.re.abs().max(v.im.abs())).fold(0.0, f64::max);
    if m > 0.0 && m.is_finite() {
        x.iter_mut().for_each(|v| *v /= m);
    }
    m
}

/// Smallest singular value of a banded matrix and the corresponding right
/// singular vector, via inverse iteration on M*M = R*R.
pub fn smallest_singular(m: &BandedMatrix) -> (f64, Vec<C64>) {
    let n = m.n();
    let r = m.qr_r();
    // deterministic full-spectrum seed
    let mut x: Vec<C64> = (0..n)
        .map(|j| {
            let t = 0.7 * (j * j % 97) as f64 + 0.3 * j as f64;
            C64::new(t.cos(), t.sin())
        })
        .collect();
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut sigma = f64::INFINITY;
    for _ in 0..500 {
        // rescale between the solves: a near-singular R sends intermediate
        // vectors toward the overflow range
        let mut y = solve_upper_conj_transpose(&r, &x);
        rescale_by_max(&mut y);
        let mut z = solve_upper(&r, &y);
        z.iter_mut().for_each(|v| {
            if !v.re.is_finite() || !v.im.is_finite() {
                *v = C64::new(0.0, 0.0);
            }
        });
        if rescale_by_max(&mut z) == 0.0 {
            break;
        }
        let nz = norm(&z);
        z.iter_mut().for_each(|v| *v /= nz);
        let new_sigma = norm(&m.matvec(&z));
        x = z;
        if (sigma - new_sigma).abs() <= 1e-12 * new_sigma + 1e-300 {
            break;
        }
        sigma = new_sigma;
    }
    let _ = sigma;
    (norm(&m.matvec(&x)), x)
}

/// Number of eigenvalues of a dense Hermitian matrix strictly below `shift`,
/// by the inertia of the LDL* factorization of (A − shift·I).
fn count_below(a: &[Vec<C64>], shift: f64) -> Option<usize> {
    let n = a.len();
    let mut l = vec![vec![C64::new(0.0, 0.0); n]; n];
    let mut d = vec![0.0f64; n];
    for j in 0..n {
        let mut dj = a[j][j].re - shift;
        for k in 0..j {
            dj -= l[j][k].norm_sqr() * d[k];
        }
        if dj == 0.0 {
            return None; // exact hit; caller nudges the shift
        }
        d[j] = dj;
        for i in j + 1..n {
            let mut acc = a[i][j];
            for k in 0..j {
                acc -= l[i][k] * l[j][k].conj() * d[k];
            }
            l[i][j] = acc / dj;
        }
    }
    Some(d.iter().filter(|&&v| v < 0.0).count())
}

/// Minimum eigenvalue of a dense Hermitian matrix via bisection on the
/// inertia count, to absolute tolerance `tol`.
pub fn hermitian_min_eig(a: &[Vec<C64>], tol: f64) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    // Gershgorin enclosure
    let bound = (0..n)
        .map(|i| (0..n).map(|j| a[i][j].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut lo = -bound - 1.0;
    let mut hi = bound + 1.0;
    while hi - lo > tol {
        let mut mid = 0.5 * (lo + hi);
        let mut count = count_below(a, mid);
        let mut nudge = tol * 1e-3 + 1e-300;
        while count.is_none() {
            mid += nudge;
            nudge *= 2.0;
            count = count_below(a, mid);
        }
        if count.unwrap() == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
