//! Exact finite arithmetic in the universal algebra A_α generated by two
//! unitaries with UV = e^{2πiα} VU.
//!
//! Elements are finitely supported sums Σ c_{m,n} U^m V^n. Moving V^b past
//! U^c costs the phase e^{−2πiα·bc}, which fixes the monomial product rule
//!     (U^a V^b)(U^c V^d) = e^{−2πiα·bc} U^{a+c} V^{b+d}
//! and the adjoint rule (c U^m V^n)* = conj(c) e^{−2πiα·mn} U^{−m} V^{−n}.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::angle::Angle;
use crate::circle::TrigPoly;

/// Coefficients below this are pruned after every product.
pub const DROP_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("deformation parameters differ: {left} vs {right}")]
    AlphaMismatch { left: f64, right: f64 },
    #[error("gauge element deviates from the unit circle by {dev:.3e}")]
    NotUnimodular { dev: f64 },
}

/// A finitely supported element Σ c_{m,n} U^m V^n of A_α.
///
/// Keys are stored as (n, m) so that the V-modes needed by the skew-product
/// action are contiguous; the public interface speaks (m, n) throughout.
#[derive(Clone, Debug)]
pub struct NcPoly {
    alpha: f64,
    coeffs: BTreeMap<(i64, i64), C64>,
}

impl NcPoly {
    pub fn zero(alpha: f64) -> Self {
        NcPoly { alpha, coeffs: BTreeMap::new() }
    }

    pub fn one(alpha: f64) -> Self {
        NcPoly::monomial(alpha, 0, 0, C64::new(1.0, 0.0))
    }

    pub fn u_pow(alpha: f64, m: i64) -> Self {
        NcPoly::monomial(alpha, m, 0, C64::new(1.0, 0.0))
    }

    pub fn v_pow(alpha: f64, n: i64) -> Self {
        NcPoly::monomial(alpha, 0, n, C64::new(1.0, 0.0))
    }

    pub fn monomial(alpha: f64, m: i64, n: i64, c: C64) -> Self {
        let mut coeffs = BTreeMap::new();
        if c.norm() > 0.0 {
            coeffs.insert((n, m), c);
        }
        NcPoly { alpha, coeffs }
    }

    pub fn from_terms<I: IntoIterator<Item = (i64, i64, C64)>>(alpha: f64, terms: I) -> Self {
        let mut out = NcPoly::zero(alpha);
        for (m, n, c) in terms {
            out.add_term(m, n, c);
        }
        out
    }

    /// Reassemble from per-mode coefficient functions: x = Σ_n c_n(U) V^n.
    pub fn from_modes<I: IntoIterator<Item = (i64, TrigPoly)>>(alpha: f64, modes: I) -> Self {
        let mut out = NcPoly::zero(alpha);
        for (n, p) in modes {
            for (m, c) in p.iter() {
                out.add_term(m, n, c);
            }
        }
        out
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn add_term(&mut self, m: i64, n: i64, c: C64) {
        let entry = self.coeffs.entry((n, m)).or_insert(C64::new(0.0, 0.0));
        *entry += c;
        if entry.norm_sqr() == 0.0 {
            self.coeffs.remove(&(n, m));
        }
    }

    pub fn coeff(&self, m: i64, n: i64) -> C64 {
        self.coeffs.get(&(n, m)).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    /// Terms as (m, n, c), ordered by (n, m).
    pub fn terms(&self) -> impl Iterator<Item = (i64, i64, C64)> + '_ {
        self.coeffs.iter().map(|(&(n, m), &c)| (m, n, c))
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// The V-degrees carrying nonzero coefficient functions.
    pub fn modes(&self) -> Vec<i64> {
        let mut out: Vec<i64> = Vec::new();
        for &(n, _) in self.coeffs.keys() {
            if out.last() != Some(&n) {
                out.push(n);
            }
        }
        out
    }

    /// The coefficient function c_{n,x} with x = Σ_n c_{n,x}(U) V^n.
    pub fn coeff_fn(&self, n: i64) -> TrigPoly {
        let mut p = TrigPoly::zero();
        for (&(nn, m), &c) in self.coeffs.range((n, i64::MIN)..=(n, i64::MAX)) {
            debug_assert_eq!(nn, n);
            p.add_term(m, c);
        }
        p
    }

    pub fn prune(&mut self, tol: f64) {
        self.coeffs.retain(|_, c| c.norm() > tol);
    }

    fn check_alpha(&self, other: &NcPoly) -> Result<(), AlgebraError> {
        if self.alpha.to_bits() != other.alpha.to_bits() {
            return Err(AlgebraError::AlphaMismatch { left: self.alpha, right: other.alpha });
        }
        Ok(())
    }

    pub fn add(&self, other: &NcPoly) -> Result<NcPoly, AlgebraError> {
        self.check_alpha(other)?;
        let mut out = self.clone();
        for (m, n, c) in other.terms() {
            out.add_term(m, n, c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &NcPoly) -> Result<NcPoly, AlgebraError> {
        self.check_alpha(other)?;
        let mut out = self.clone();
        for (m, n, c) in other.terms() {
            out.add_term(m, n, -c);
        }
        Ok(out)
    }

    pub fn scale(&self, c: C64) -> NcPoly {
        NcPoly {
            alpha: self.alpha,
            coeffs: self.coeffs.iter().map(|(&k, &v)| (k, v * c)).collect(),
        }
    }

    /// Twisted product. The commutation phase is hoisted per (V-mode of x,
    /// U-degree of y) pair, so large sparse operands stay affordable.
    pub fn mul(&self, other: &NcPoly) -> Result<NcPoly, AlgebraError> {
        self.check_alpha(other)?;
        let two_pi_alpha = Angle::two_pi_times(self.alpha);
        // group x by V-mode
        let mut x_modes: Vec<(i64, Vec<(i64, C64)>)> = Vec::new();
        for (&(n, m), &c) in &self.coeffs {
            match x_modes.last_mut() {
                Some((ln, terms)) if *ln == n => terms.push((m, c)),
                _ => x_modes.push((n, vec![(m, c)])),
            }
        }
        let mut acc: HashMap<(i64, i64), C64> =
            HashMap::with_capacity(self.coeffs.len().max(other.coeffs.len()));
        for (&(d, cdeg), &cy) in &other.coeffs {
            for (n, terms) in &x_modes {
                // (U^a V^n)(U^c V^d) = e^{−2πiα·n·c} U^{a+c} V^{n+d}
                let phase = two_pi_alpha.cis_int(-(n * cdeg));
                let w = cy * phase;
                for &(a, cx) in terms {
                    *acc.entry((n + d, a + cdeg)).or_insert(C64::new(0.0, 0.0)) += cx * w;
                }
            }
        }
        let mut coeffs = BTreeMap::new();
        for (k, c) in acc {
            if c.norm() > DROP_TOLERANCE {
                coeffs.insert(k, c);
            }
        }
        Ok(NcPoly { alpha: self.alpha, coeffs })
    }

    /// Adjoint: antilinear, (xy)* = y*x*.
    pub fn adjoint(&self) -> NcPoly {
        let two_pi_alpha = Angle::two_pi_times(self.alpha);
        let mut out = NcPoly::zero(self.alpha);
        for (m, n, c) in self.terms() {
            let phase = two_pi_alpha.cis_int(-(m * n));
            out.add_term(-m, -n, c.conj() * phase);
        }
        out
    }

    /// The canonical trace: τ(U^m V^n) = δ_{m,0} δ_{n,0}.
    pub fn trace(&self) -> C64 {
        self.coeff(0, 0)
    }

    /// GNS norm²: τ(x*x) = Σ |c_{m,n}|².
    pub fn gns_norm_sq(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum()
    }

    /// GNS inner product ⟨x, y⟩ = τ(y*x).
    pub fn gns_inner(&self, other: &NcPoly) -> Result<C64, AlgebraError> {
        self.check_alpha(other)?;
        let mut acc = C64::new(0.0, 0.0);
        for (&k, &c) in &self.coeffs {
            if let Some(&d) = other.coeffs.get(&k) {
                acc += c * d.conj();
            }
        }
        Ok(acc)
    }

    pub fn gauge(&self, g: &GaugePair) -> NcPoly {
        let au = Angle::from_radians(g.zu.im.atan2(g.zu.re));
        let av = Angle::from_radians(g.zv.im.atan2(g.zv.re));
        let mut out = NcPoly::zero(self.alpha);
        for (m, n, c) in self.terms() {
            out.add_term(m, n, c * au.cis_int(m) * av.cis_int(n));
        }
        out
    }

    /// Two-sided bound for the C*-norm: each coefficient sup-norm from below
    /// (E_U is a norm-one projection), the mode sum of sup-norms from above.
    pub fn norm_bounds(&self, grid: usize) -> (f64, f64) {
        let mut lower: f64 = 0.0;
        let mut upper: f64 = 0.0;
        for n in self.modes() {
            let p = self.coeff_fn(n);
            let span = p.support_radius();
            if span.saturating_mul(8) <= (1 << 22) {
                let g = grid.max(((8 * span.max(1)) as usize).next_power_of_two());
                let (lo, hi) = p.sup_norm(g);
                lower = lower.max(lo);
                upper += hi;
            } else {
                // supports too wide to sample: L² from below, ℓ¹ from above
                lower = lower.max(p.l2_norm_sq().sqrt());
                upper += p.iter().map(|(_, c)| c.norm()).sum::<f64>();
            }
        }
        (lower, upper)
    }

    /// Largest coefficientwise deviation from another element.
    pub fn max_coeff_diff(&self, other: &NcPoly) -> f64 {
        let mut worst: f64 = 0.0;
        for (&k, &c) in &self.coeffs {
            worst = worst.max((c - other.coeffs.get(&k).copied().unwrap_or(C64::new(0.0, 0.0))).norm());
        }
        for (&k, &c) in &other.coeffs {
            if !self.coeffs.contains_key(&k) {
                worst = worst.max(c.norm());
            }
        }
        worst
    }

    /// JSON object {alpha, terms: [[m, n, re, im], ...]} sorted by (m, n),
    /// bit-stable across runs.
    pub fn to_json(&self) -> serde_json::Value {
        let mut terms: Vec<(i64, i64, C64)> = self.terms().collect();
        terms.sort_by_key(|&(m, n, _)| (m, n));
        serde_json::json!({
            "alpha": self.alpha,
            "terms": terms
                .iter()
                .map(|&(m, n, c)| serde_json::json!([m, n, c.re, c.im]))
                .collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Option<NcPoly> {
        let alpha = v.get("alpha")?.as_f64()?;
        let mut out = NcPoly::zero(alpha);
        for t in v.get("terms")?.as_array()? {
            let t = t.as_array()?;
            out.add_term(
                t[0].as_i64()?,
                t[1].as_i64()?,
                C64::new(t[2].as_f64()?, t[3].as_f64()?),
            );
        }
        Some(out)
    }
}

/// A pair of unit scalars defining the gauge automorphism U ↦ zu·U, V ↦ zv·V.
#[derive(Clone, Copy, Debug)]
pub struct GaugePair {
    pub zu: C64,
    pub zv: C64,
}

impl GaugePair {
    pub fn new(zu: C64, zv: C64) -> Result<Self, AlgebraError> {
        for z in [zu, zv] {
            let dev = (z.norm() - 1.0).abs();
            if dev > 1e-12 {
                return Err(AlgebraError::NotUnimodular { dev });
            }
        }
        Ok(GaugePair { zu, zv })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Multiply two words in U, V by repeated pairwise swaps VU → e^{−2πiα}UV.
    /// Independent oracle for the monomial product rule.
    fn word_product_oracle(alpha: f64, word: &[char]) -> (i64, i64, C64) {
        let mut letters: Vec<char> = word.to_vec();
        let mut phase = c(1.0, 0.0);
        let swap = Angle::two_pi_times(alpha).cis_int(-1);
        loop {
            let mut swapped = false;
            for i in 0..letters.len().saturating_sub(1) {
                if letters[i] == 'V' && letters[i + 1] == 'U' {
                    letters.swap(i, i + 1);
                    phase *= swap;
                    swapped = true;
                }
            }
            if !swapped {
                break;
            }
        }
        let m = letters.iter().filter(|&&l| l == 'U').count() as i64;
        let n = letters.iter().filter(|&&l| l == 'V').count() as i64;
        (m, n, phase)
    }

    #[test]
    fn uv_squared_at_quarter() {
        // α = 1/4: (UV)² = −i U²V²
        let alpha = 0.25;
        let uv = NcPoly::from_terms(alpha, [(1, 1, c(1.0, 0.0))]);
        let sq = uv.mul(&uv).unwrap();
        assert_eq!(sq.num_terms(), 1);
        assert!((sq.coeff(2, 2) - c(0.0, -1.0)).norm() < 1e-15);
        let (m, n, phase) = word_product_oracle(alpha, &['U', 'V', 'U', 'V']);
        assert_eq!((m, n), (2, 2));
        assert!((sq.coeff(2, 2) - phase).norm() < 1e-15);
    }

    #[test]
    fn unit_is_neutral() {
        let alpha = 1.0 / 3.0;
        let x = NcPoly::from_terms(
            alpha,
            [(0, 0, c(0.3, 0.1)), (2, -1, c(-1.0, 0.5)), (-3, 4, c(0.0, 2.0))],
        );
        let one = NcPoly::one(alpha);
        assert!(x.mul(&one).unwrap().max_coeff_diff(&x) < 1e-15);
        assert!(one.mul(&x).unwrap().max_coeff_diff(&x) < 1e-15);
    }

    #[test]
    fn alpha_zero_is_commutative() {
        let x = NcPoly::from_terms(0.0, [(1, 0, c(1.0, 0.0)), (0, 2, c(0.5, -0.5))]);
        let y = NcPoly::from_terms(0.0, [(0, 1, c(0.0, 1.0)), (3, -1, c(0.2, 0.0))]);
        let xy = x.mul(&y).unwrap();
        let yx = y.mul(&x).unwrap();
        assert!(xy.max_coeff_diff(&yx) < 1e-15);
    }

    #[test]
    fn alpha_mismatch_is_an_error() {
        let x = NcPoly::one(0.25);
        let y = NcPoly::one(0.25 + 1e-17);
        assert!(x.mul(&y).is_ok()); // 1e-17 is below an ulp of 0.25
        let z = NcPoly::one(0.26);
        assert!(matches!(x.mul(&z), Err(AlgebraError::AlphaMismatch { .. })));
    }

    #[test]
    fn commutation_relation_exact() {
        let alpha = 1.0 / 3.0;
        let u = NcPoly::u_pow(alpha, 1);
        let v = NcPoly::v_pow(alpha, 1);
        let uv = u.mul(&v).unwrap();
        let vu = v.mul(&u).unwrap();
        let twisted = vu.scale(Angle::two_pi_times(alpha).cis_int(1));
        assert!(uv.max_coeff_diff(&twisted) < 1e-15);
    }

    #[test]
    fn adjoint_of_uv() {
        // α = 1/3: (UV)* = e^{−2πi/3} U^{−1}V^{−1}, cross-checked by reversing
        // and conjugating the word V^{−1}U^{−1}
        let alpha = 1.0 / 3.0;
        let uv = NcPoly::from_terms(alpha, [(1, 1, c(1.0, 0.0))]);
        let adj = uv.adjoint();
        let expected = Angle::two_pi_times(alpha).cis_int(-1);
        assert!((adj.coeff(-1, -1) - expected).norm() < 1e-15);
        // unitarity: (UV)*·(UV) = 1
        let prod = adj.mul(&uv).unwrap();
        assert!(prod.max_coeff_diff(&NcPoly::one(alpha)) < 1e-12);
        // involution
        assert!(adj.adjoint().max_coeff_diff(&uv) < 1e-15);
        assert!(NcPoly::one(alpha).adjoint().max_coeff_diff(&NcPoly::one(alpha)) < 1e-15);
    }

    #[test]
    fn trace_examples() {
        let alpha = 0.37;
        assert_eq!(NcPoly::one(alpha).trace(), c(1.0, 0.0));
        for (m, n) in [(1, 0), (0, 1), (2, -3), (-1, -1)] {
            assert_eq!(NcPoly::monomial(alpha, m, n, c(1.0, 0.0)).trace(), c(0.0, 0.0));
        }
        // τ(x x*) = Σ|c|²
        let x = NcPoly::from_terms(
            alpha,
            [(0, 0, c(0.3, 0.1)), (2, -1, c(-1.0, 0.5)), (-3, 4, c(0.0, 2.0))],
        );
        let t = x.mul(&x.adjoint()).unwrap().trace();
        assert!((t.re - x.gns_norm_sq()).abs() < 1e-12 && t.im.abs() < 1e-12);
    }

    #[test]
    fn coeff_fn_roundtrip() {
        let alpha = 0.1;
        let x = NcPoly::from_terms(
            alpha,
            [(2, 3, c(1.0, 0.0)), (1, 3, c(0.0, -1.0)), (5, -2, c(0.4, 0.4))],
        );
        let p = x.coeff_fn(3);
        assert!((p.coeff(2) - c(1.0, 0.0)).norm() < 1e-15);
        assert!((p.coeff(1) - c(0.0, -1.0)).norm() < 1e-15);
        assert!(x.coeff_fn(7).is_empty());
        let back = NcPoly::from_modes(alpha, x.modes().into_iter().map(|n| (n, x.coeff_fn(n))));
        assert!(back.max_coeff_diff(&x) < 1e-15);
    }

    #[test]
    fn gauge_properties() {
        let alpha = 0.21;
        let x = NcPoly::from_terms(
            alpha,
            [(1, 1, c(1.0, 0.0)), (0, 2, c(0.5, 0.5)), (-2, 0, c(0.0, 1.0))],
        );
        let id = GaugePair::new(c(1.0, 0.0), c(1.0, 0.0)).unwrap();
        assert!(x.gauge(&id).max_coeff_diff(&x) < 1e-15);
        let g = GaugePair::new(c(0.6, 0.8), c(0.0, -1.0)).unwrap();
        assert!((x.gauge(&g).trace() - x.trace()).norm() < 1e-15);
        // multiplicative
        let y = NcPoly::from_terms(alpha, [(2, -1, c(0.3, -0.2)), (0, 0, c(1.0, 0.0))]);
        let lhs = x.mul(&y).unwrap().gauge(&g);
        let rhs = x.gauge(&g).mul(&y.gauge(&g)).unwrap();
        assert!(lhs.max_coeff_diff(&rhs) < 1e-12);
    }

    #[test]
    fn gauge_rejects_non_unit() {
        assert!(GaugePair::new(c(1.1, 0.0), c(1.0, 0.0)).is_err());
    }

    #[test]
    fn norm_bounds_examples() {
        let alpha = 0.125;
        for (m, n) in [(0, 0), (3, 0), (1, -2)] {
            let (lo, hi) = NcPoly::monomial(alpha, m, n, c(1.0, 0.0)).norm_bounds(4096);
            assert!((lo - 1.0).abs() < 1e-9 && hi >= 1.0 && (hi - 1.0) < 1e-2);
        }
        assert_eq!(NcPoly::zero(alpha).norm_bounds(64), (0.0, 0.0));
        // x = (1 + U)/2 has norm exactly 1
        let x = NcPoly::from_terms(alpha, [(0, 0, c(0.5, 0.0)), (1, 0, c(0.5, 0.0))]);
        let (lo, hi) = x.norm_bounds(4096);
        assert!((lo - 1.0).abs() < 1e-3 && hi >= 1.0);
    }

    #[test]
    fn json_roundtrip_is_sorted_and_stable() {
        let alpha = 2.0 / 7.0;
        let x = NcPoly::from_terms(
            alpha,
            [(3, -1, c(0.25, -0.5)), (-2, 4, c(1.0 / 3.0, 0.0)), (0, 0, c(1.0, 1.0))],
        );
        let j = x.to_json();
        let terms = j.get("terms").unwrap().as_array().unwrap();
        assert_eq!(terms[0][0].as_i64().unwrap(), -2);
        let s1 = serde_json::to_string(&j).unwrap();
        let s2 = serde_json::to_string(&x.to_json()).unwrap();
        assert_eq!(s1, s2);
        let back = NcPoly::from_json(&j).unwrap();
        assert!(back.max_coeff_diff(&x) < 1e-18);
        assert_eq!(back.alpha().to_bits(), x.alpha().to_bits());
    }

    #[test]
    fn json_byte_format_is_pinned() {
        let x = NcPoly::from_terms(0.5, [(1, -2, c(0.25, -1.0)), (-1, 0, c(2.0, 0.0))]);
        let s = serde_json::to_string(&x.to_json()).unwrap();
        assert_eq!(
            s,
            r#"{"alpha":0.5,"terms":[[-1,0,2.0,0.0],[1,-2,0.25,-1.0]]}"#
        );
    }

    #[test]
    fn random_word_products_match_oracle() {
        // words of length ≤ 6 in {U, V}: build the product both ways
        let alpha = 0.3721;
        let words = [
            vec!['U', 'V', 'V', 'U'],
            vec!['V', 'U', 'V', 'U', 'U'],
            vec!['V', 'V', 'U', 'U', 'V', 'U'],
        ];
        for word in &words {
            let mut prod = NcPoly::one(alpha);
            for &l in word {
                let factor = match l {
                    'U' => NcPoly::u_pow(alpha, 1),
                    _ => NcPoly::v_pow(alpha, 1),
                };
                prod = prod.mul(&factor).unwrap();
            }
            let (m, n, phase) = word_product_oracle(alpha, word);
            assert_eq!(prod.num_terms(), 1);
            assert!((prod.coeff(m, n) - phase).norm() < 1e-13, "word {word:?}");
        }
    }
}
