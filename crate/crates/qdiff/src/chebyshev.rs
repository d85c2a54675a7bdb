//! Expansion coefficients of `e^{-itH/2}` in the non-backtracking basis.
//!
//! `α_k(t) = (2/π) ∫_{-1}^{1} sqrt(1-ζ²) e^{-itζ} U_k(ζ) dζ` with U_k the
//! Chebyshev polynomial of the second kind, and
//! `a_m(t) = Σ_{k≥0} α_{m+2k}(t) / (M-1)^k`.
//!
//! α is evaluated by Gauss-Chebyshev quadrature of the second kind; the
//! Bessel-function identity `α_k(t) = 2(-i)^k (k+1) J_{k+1}(t)/t` serves as an
//! independent cross-check in the test suite, not as the implementation.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::QdiffError;

/// Gauss-Chebyshev-U node count for polynomial degree k and time t:
/// exactness for the polynomial part plus oscillation resolution.
fn node_count(k: usize, t: f64) -> usize {
    (2 * k + 2 * t.abs().ceil() as usize).max(64)
}

/// `α_k(t)` to absolute accuracy 1e-12.
///
/// With nodes `ζ_j = cos θ_j`, `θ_j = jπ/(n+1)`, the quadrature reads
/// `α_k(t) ≈ (2/(n+1)) Σ_j sin θ_j sin((k+1)θ_j) e^{-it cos θ_j}`,
/// using `U_k(cos θ) = sin((k+1)θ)/sin θ`.
pub fn alpha_coeff(k: usize, t: f64) -> Complex64 {
    if t == 0.0 {
        // orthogonality of the weighted Chebyshev polynomials
        return Complex64::new(if k == 0 { 1.0 } else { 0.0 }, 0.0);
    }
    let n = node_count(k, t);
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 1..=n {
        let theta = j as f64 * std::f64::consts::PI / (n + 1) as f64;
        let phase = Complex64::from_polar(1.0, -t * theta.cos());
        acc += theta.sin() * ((k + 1) as f64 * theta).sin() * phase;
    }
    acc * (2.0 / (n + 1) as f64)
}

/// Termination bound `|α_j(t)| ≤ 2(j+1) min(1, (e|t|/(2j+2))^{j+1} 2/|t|)`.
pub fn alpha_bound(j: usize, t: f64) -> f64 {
    let ta = t.abs();
    let base = 2.0 * (j + 1) as f64;
    if ta == 0.0 {
        return if j == 0 { base } else { 0.0 };
    }
    let decay = (std::f64::consts::E * ta / (2 * j + 2) as f64).powi(j as i32 + 1) * 2.0 / ta;
    base * decay.min(1.0)
}

/// `a_m(t)` with guaranteed series tail below `tol`.
pub fn a_coeff(m: usize, t: f64, big_m: usize, tol: f64) -> Complex64 {
    assert!(big_m >= 2, "M must be >= 2");
    assert!(tol > 0.0);
    let ratio = 1.0 / (big_m as f64 - 1.0);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut geom = 1.0;
    let mut k = 0usize;
    loop {
        acc += alpha_coeff(m + 2 * k, t) * geom;
        geom *= ratio;
        k += 1;
        // past the decay onset the α bound at least halves every step of 2 in
        // the order, so the remaining tail is below twice the next term bound
        let next = alpha_bound(m + 2 * k, t) * geom;
        let decaying = (m + 2 * k) as f64 + 1.0 > std::f64::consts::E * t.abs() / 2.0 + 2.0;
        if decaying && 2.0 * next <= tol {
            break;
        }
        assert!(k < 10_000, "a_coeff series failed to terminate");
    }
    acc
}

/// Table of `a_0..a_{m_max}` for fixed (t, M), sharing one α evaluation grid.
#[derive(Debug, Clone, Serialize)]
pub struct CoefficientTable {
    pub t: f64,
    pub big_m: usize,
    pub m_max: usize,
    pub a: Vec<Complex64>,
    /// Bound on the dropped series tails (both in k and in m).
    pub tail_bound: f64,
}

impl CoefficientTable {
    pub fn build(t: f64, big_m: usize, m_max: usize, tol: f64) -> Result<Self, QdiffError> {
        if big_m < 2 {
            return Err(QdiffError::Config(format!("M must be >= 2, got {big_m}")));
        }
        if tol <= 0.0 {
            return Err(QdiffError::Config("tol must be positive".into()));
        }
        let ratio = 1.0 / (big_m as f64 - 1.0);
        // inner k-truncation shared by every m: the next dropped term is
        // α_{m+2(k_max+1)} ratio^{k_max+1}, largest at m = 0 once the α bound
        // is in its decay regime, where it at least halves per step
        let mut k_max = 0usize;
        loop {
            let order = 2 * (k_max + 1);
            let decaying = order as f64 + 1.0 > std::f64::consts::E * t.abs() / 2.0 + 2.0;
            if decaying && 2.0 * alpha_bound(order, t) * ratio.powi(k_max as i32 + 1) <= tol {
                break;
            }
            k_max += 1;
            if k_max > 10_000 {
                return Err(QdiffError::CheckFailed("coefficient series not terminating".into()));
            }
        }
        let top = m_max + 2 * k_max;
        let alpha: Vec<Complex64> = (0..=top).map(|k| alpha_coeff(k, t)).collect();
        let a: Vec<Complex64> = (0..=m_max)
            .map(|m| {
                let mut acc = Complex64::new(0.0, 0.0);
                let mut geom = 1.0;
                for k in 0..=k_max {
                    acc += alpha[m + 2 * k] * geom;
                    geom *= ratio;
                }
                acc
            })
            .collect();
        Ok(CoefficientTable {
            t,
            big_m,
            m_max,
            a,
            tail_bound: tol,
        })
    }

    /// `Σ_{m ≤ m_max} |a_m|²`; close to 1 up to O(1/M) for large m_max.
    pub fn sum_sq(&self) -> f64 {
        self.a.iter().map(|z| z.norm_sqr()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adaptive Simpson oracle for the defining integral, on the θ
    /// substitution `α_k = (2/π) ∫_0^π sin²θ e^{-it cos θ} U_k(cos θ) dθ`.
    mod oracle {
        use num_complex::Complex64;

        fn integrand(k: usize, t: f64, theta: f64) -> Complex64 {
            let s = theta.sin();
            let u = if s.abs() > 1e-9 {
                ((k + 1) as f64 * theta).sin() / s
            } else {
                // U_k(±1) limits
                let sign = if theta < 1.0 { 1.0 } else { (-1.0f64).powi(k as i32) };
                sign * (k + 1) as f64
            };
            s * s * u * Complex64::from_polar(1.0, -t * theta.cos())
        }

        fn simpson(k: usize, t: f64, a: f64, b: f64) -> Complex64 {
            let m = 0.5 * (a + b);
            (integrand(k, t, a) + 4.0 * integrand(k, t, m) + integrand(k, t, b)) * ((b - a) / 6.0)
        }

        fn adaptive(k: usize, t: f64, a: f64, b: f64, whole: Complex64, eps: f64, depth: u32) -> Complex64 {
            let m = 0.5 * (a + b);
            let left = simpson(k, t, a, m);
            let right = simpson(k, t, m, b);
            let delta = left + right - whole;
            if delta.norm() <= 15.0 * eps || depth > 40 {
                left + right + delta / 15.0
            } else {
                adaptive(k, t, a, m, left, eps / 2.0, depth + 1)
                    + adaptive(k, t, m, b, right, eps / 2.0, depth + 1)
            }
        }

        pub fn alpha(k: usize, t: f64) -> Complex64 {
            let pi = std::f64::consts::PI;
            // split into enough panels to resolve both oscillations
            let panels = (4 * (k + 1) + 4 * t.abs().ceil() as usize).max(16);
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..panels {
                let a = pi * j as f64 / panels as f64;
                let b = pi * (j + 1) as f64 / panels as f64;
                acc += adaptive(k, t, a, b, simpson(k, t, a, b), 1e-14 / panels as f64, 0);
            }
            acc * (2.0 / pi)
        }

        /// `J_n(t)` by Miller's downward recurrence (independent of the
        /// quadrature path entirely).
        pub fn bessel_j(n: usize, t: f64) -> f64 {
            if t == 0.0 {
                return if n == 0 { 1.0 } else { 0.0 };
            }
            let start = (n + 20 + (2.0 * t.abs()) as usize) | 1;
            let mut jp1 = 0.0f64;
            let mut j = 1e-30f64;
            let mut result = 0.0;
            let mut norm = 0.0;
            for m in (0..=start).rev() {
                let jm1 = 2.0 * (m as f64 + 1.0) / t * j - jp1;
                jp1 = j;
                j = jm1;
                if m % 2 == 0 {
                    norm += 2.0 * j;
                }
                if m == n {
                    result = j;
                }
                // rescale to avoid overflow
                if j.abs() > 1e100 {
                    jp1 /= 1e100;
                    j /= 1e100;
                    norm /= 1e100;
                    result /= 1e100;
                }
            }
            norm -= j;
            result / norm
        }
    }

    #[test]
    fn alpha_at_zero() {
        assert!((alpha_coeff(0, 0.0) - Complex64::new(1.0, 0.0)).norm() <= 1e-13);
        for k in 1..20 {
            assert!(alpha_coeff(k, 0.0).norm() <= 1e-13, "k={k}");
        }
    }

    #[test]
    fn alpha_matches_adaptive_quadrature_oracle() {
        for &t in &[0.1, 1.0, 5.0, 17.3] {
            for k in [0usize, 1, 2, 3, 7, 20, 41] {
                let got = alpha_coeff(k, t);
                let want = oracle::alpha(k, t);
                assert!(
                    (got - want).norm() <= 1e-12,
                    "k={k} t={t}: got {got}, want {want}, diff {}",
                    (got - want).norm()
                );
            }
        }
    }

    #[test]
    fn alpha_first_order_value() {
        // α_1(0.1) = -4i J_2(0.1)/0.1 ≈ -0.0499583i
        let a = alpha_coeff(1, 0.1);
        assert!(a.re.abs() <= 1e-12);
        assert!((a.im + 0.0499583).abs() <= 1e-5);
    }

    #[test]
    fn alpha_matches_bessel_identity() {
        // α_k(t) = 2 (-i)^k (k+1) J_{k+1}(t) / t; Miller recurrence oracle
        for &t in &[0.5, 2.0, 10.0, 50.0] {
            for k in (0..=100).step_by(9) {
                let want = Complex64::new(0.0, -1.0).powi(k as i32)
                    * (2.0 * (k + 1) as f64 * oracle::bessel_j(k + 1, t) / t);
                let got = alpha_coeff(k, t);
                assert!(
                    (got - want).norm() <= 1e-10,
                    "k={k} t={t}: diff {}",
                    (got - want).norm()
                );
            }
        }
    }

    #[test]
    fn alpha_bound_holds() {
        for &t in &[0.3, 2.0, 8.0] {
            for k in 0..60 {
                assert!(alpha_coeff(k, t).norm() <= alpha_bound(k, t) + 1e-12, "k={k} t={t}");
            }
        }
    }

    #[test]
    fn a_at_zero_is_kronecker() {
        for big_m in [2usize, 5, 50] {
            assert!((a_coeff(0, 0.0, big_m, 1e-12) - Complex64::new(1.0, 0.0)).norm() <= 1e-12);
            for m in 1..10 {
                assert!(a_coeff(m, 0.0, big_m, 1e-12).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn a_normalization_near_one() {
        let table = CoefficientTable::build(5.0, 100, 200, 1e-12).unwrap();
        let delta = table.sum_sq() - 1.0;
        assert!(delta.abs() <= 10.0 / 100.0, "delta={delta}");
    }

    #[test]
    fn a_growth_bound() {
        let t = 2.0;
        let mut factorial = 1.0f64;
        for m in 0..=40usize {
            if m > 0 {
                factorial *= m as f64;
            }
            let a = a_coeff(m, t, 50, 1e-13).norm();
            assert!(a <= 3.0 * t.powi(m as i32) / factorial + 1e-13, "m={m} a={a}");
        }
    }

    #[test]
    fn table_agrees_with_single_calls() {
        let table = CoefficientTable::build(3.0, 20, 40, 1e-12).unwrap();
        for m in 0..=40 {
            let single = a_coeff(m, 3.0, 20, 1e-13);
            assert!((table.a[m] - single).norm() <= 1e-11, "m={m}");
        }
    }
}
