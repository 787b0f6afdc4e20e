//! Small special-function kernels needed by the series expansions.

/// Bessel function of the first kind `J_m(x)` for integer order, via the
/// ascending series. Accurate to near machine precision for `|x| ≲ 15`;
/// callers that expand sinusoid exponentials keep amplitudes well below that.
pub fn bessel_j(m: i64, x: f64) -> f64 {
    let (m, sign) = if m < 0 {
        (-m as u64, if m % 2 == 0 { 1.0 } else { -1.0 })
    } else {
        (m as u64, 1.0)
    };
    let half = 0.5 * x;
    // t_0 = (x/2)^m / m!, built incrementally to dodge overflow
    let mut term = 1.0;
    for i in 1..=m {
        term *= half / i as f64;
    }
    let mut sum = term;
    let q = -half * half;
    let mut j = 1.0;
    let mut mj = m as f64 + 1.0;
    for _ in 0..220 {
        term *= q / (j * mj);
        sum += term;
        if term.abs() < 1e-20 * sum.abs() + 1e-280 {
            break;
        }
        j += 1.0;
        mj += 1.0;
    }
    sign * sum
}
