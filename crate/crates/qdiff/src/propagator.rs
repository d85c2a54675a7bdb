//! Truncated propagation `ψ ≈ e^{-itH/2} e_0` via the non-backtracking
//! column recursion, with a dense eigendecomposition oracle.
//!
//! `H^{(0)} = Id`, `H^{(1)} = H` and for the phase ensemble (where
//! `|H_xy|² = S_xy` holds deterministically) the columns satisfy
//! `v_2 = H v_1 - (M/(M-1)) v_0` and `v_{m+1} = H v_m - v_{m-1}` for m ≥ 2.
//! The recursion is gated on agreement with the definition-based path
//! enumeration [`nb_power_bruteforce`].

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::chebyshev::{alpha_bound, CoefficientTable};
use crate::error::QdiffError;
use crate::sampler::BandMatrixSample;

/// Columns `v_m = H^{(m)} e_0` for m = 0..m_max via the three-term recursion.
pub fn nb_column(h: &BandMatrixSample, m_max: usize) -> Vec<Vec<Complex64>> {
    let nsites = h.config.num_sites();
    let ratio = {
        let m = h.band_size() as f64;
        m / (m - 1.0)
    };
    let mut e0 = vec![Complex64::new(0.0, 0.0); nsites];
    e0[h.config.linear_index(&h.config.origin())] = Complex64::new(1.0, 0.0);
    let mut out = vec![e0];
    if m_max >= 1 {
        let v1 = h.apply(&out[0]).expect("length matches");
        out.push(v1);
    }
    for m in 1..m_max {
        let hv = h.apply(&out[m]).expect("length matches");
        let next: Vec<Complex64> = if m == 1 {
            hv.iter()
                .zip(&out[0])
                .map(|(a, b)| a - ratio * b)
                .collect()
        } else {
            hv.iter().zip(&out[m - 1]).map(|(a, b)| a - b).collect()
        };
        out.push(next);
    }
    out
}

/// Definition-based column `H^{(n)} e_0`: exact sum over band paths
/// `0 = x_0, x_1, ..., x_n` with `x_i ≠ x_{i+2}`, of `Π H_{x_i x_{i+1}}`.
///
/// Note `(H^{(n)} e_0)_y = H^{(n)}_{y0}`; paths run from 0 and the product is
/// accumulated in reverse-index form `H_{x_n x_{n-1}} ... H_{x_1 x_0}`.
pub fn nb_power_bruteforce(
    h: &BandMatrixSample,
    n: usize,
) -> Result<Vec<Complex64>, QdiffError> {
    let nsites = h.config.num_sites();
    if n > 6 || nsites > 4096 {
        return Err(QdiffError::ResourceLimit(format!(
            "nb_power_bruteforce supports n <= 6, N^d <= 4096 (got n={n}, N^d={nsites})"
        )));
    }
    let origin = h.config.linear_index(&h.config.origin());
    let mut out = vec![Complex64::new(0.0, 0.0); nsites];
    if n == 0 {
        out[origin] = Complex64::new(1.0, 0.0);
        return Ok(out);
    }
    // depth-first over band steps; path[i] = x_i, product carries H_{x_{i+1} x_i} factors
    fn recurse(
        h: &BandMatrixSample,
        path: &mut Vec<usize>,
        product: Complex64,
        n: usize,
        out: &mut [Complex64],
    ) {
        let depth = path.len() - 1;
        if depth == n {
            out[*path.last().unwrap()] += product;
            return;
        }
        let cur = *path.last().unwrap();
        for (next, _) in h.row(cur) {
            if depth >= 1 && next == path[depth - 1] {
                continue; // backtracking step x_{i+2} = x_i
            }
            path.push(next);
            recurse(h, path, product * h.entry(next, cur), n, out);
            path.pop();
        }
    }
    let mut path = vec![origin];
    recurse(h, &mut path, Complex64::new(1.0, 0.0), n, &mut out);
    Ok(out)
}

/// Truncation order for [`propagate_column`]: the smallest m whose dropped
/// tail `Σ_{m' > m} |a_{m'}| ‖v_{m'}‖` is provably below `0.01 tol`.
///
/// `‖v_m‖ ≤ (‖H‖ + 1)^m ≤ (√(M-1) + 1)^m` and in the decay regime
/// `|a_m| ≤ 2 α_bound(m)`, so the tail is geometric once the per-step ratio
/// drops below 1/2. Cutting here matters: computed coefficients bottom out at
/// the quadrature noise floor instead of decaying, and the noise would be
/// amplified by the column growth.
fn truncation_order(t: f64, tol: f64, big_m: usize) -> usize {
    let growth = (big_m as f64 - 1.0).sqrt() + 1.0;
    let target = 0.01 * tol;
    let mut m = 1usize;
    loop {
        let next = m + 1;
        // ratio ≤ 1/2 per step keeps the remaining tail under twice the
        // first dropped term
        let ratio_ok =
            std::f64::consts::E * t.abs() / (2 * next + 2) as f64 * growth <= 0.5;
        let first_dropped = 2.0 * alpha_bound(next, t) * growth.powi(next as i32);
        if ratio_ok && 2.0 * first_dropped <= target {
            return m;
        }
        m = next;
        assert!(m < 100_000, "truncation order search failed to terminate");
    }
}

/// `ψ = Σ_{m ≤ m_max} a_m(t) v_m`, with an a-posteriori unitarity check.
///
/// Each coefficient carries an error up to the table tolerance (plus a
/// rounding floor), amplified in ψ by the column norm ‖v_m‖, which grows
/// slowly with m; the check allows `tol` on top of that propagated budget.
pub fn propagate_column(
    h: &BandMatrixSample,
    t: f64,
    tol: f64,
) -> Result<Vec<Complex64>, QdiffError> {
    if tol <= 0.0 {
        return Err(QdiffError::Config("tol must be positive".into()));
    }
    let m_max = truncation_order(t, tol, h.band_size());
    let coeff_tol = (tol * 1e-2).min(1e-12);
    let table = CoefficientTable::build(t, h.band_size(), m_max, coeff_tol)?;
    let nsites = h.config.num_sites();
    let ratio = {
        let m = h.band_size() as f64;
        m / (m - 1.0)
    };
    // stream the recursion instead of materializing every column
    let col_norm =
        |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut psi = vec![Complex64::new(0.0, 0.0); nsites];
    let mut prev = vec![Complex64::new(0.0, 0.0); nsites];
    prev[h.config.linear_index(&h.config.origin())] = Complex64::new(1.0, 0.0);
    for (x, p) in psi.iter_mut().zip(&prev) {
        *x += table.a[0] * p;
    }
    let mut norm_sum = 1.0; // Σ_m ‖v_m‖, the coefficient-error amplification
    if m_max >= 1 {
        let mut cur = h.apply(&prev)?;
        norm_sum += col_norm(&cur);
        for (x, c) in psi.iter_mut().zip(&cur) {
            *x += table.a[1] * c;
        }
        for m in 1..m_max {
            let hv = h.apply(&cur)?;
            let next: Vec<Complex64> = if m == 1 {
                hv.iter().zip(&prev).map(|(a, b)| a - ratio * b).collect()
            } else {
                hv.iter().zip(&prev).map(|(a, b)| a - b).collect()
            };
            prev = cur;
            cur = next;
            norm_sum += col_norm(&cur);
            for (x, c) in psi.iter_mut().zip(&cur) {
                *x += table.a[m + 1] * c;
            }
        }
    }
    let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    // per-coefficient error: series truncation (coeff_tol) plus quadrature
    // and summation rounding
    let budget = tol + (coeff_tol + 1e-14) * norm_sum;
    if (norm - 1.0).abs() > budget {
        return Err(QdiffError::CheckFailed(format!(
            "propagation norm check failed: ||psi|| = {norm}, budget = {budget} \
             (truncation too aggressive)"
        )));
    }
    Ok(psi)
}

/// Eigendecomposition oracle: `ψ = U e^{-itΛ/2} U* e_0` from the densified H.
pub fn dense_expm_oracle(
    h: &BandMatrixSample,
    t: f64,
) -> Result<Vec<Complex64>, QdiffError> {
    let nsites = h.config.num_sites();
    if nsites > 4096 {
        return Err(QdiffError::ResourceLimit(format!(
            "dense_expm_oracle supports N^d <= 4096, got {nsites}"
        )));
    }
    let (eigvals, eigvecs) = dense_spectrum(h)?;
    let origin = h.config.linear_index(&h.config.origin());
    // ψ = U diag(e^{-i t λ / 2}) U* e_0; (U* e_0)_j = conj(U_{0j})
    let mut psi = vec![Complex64::new(0.0, 0.0); nsites];
    for j in 0..nsites {
        let weight =
            Complex64::from_polar(1.0, -t * eigvals[j] / 2.0) * eigvecs[(origin, j)].conj();
        for x in 0..nsites {
            psi[x] += eigvecs[(x, j)] * weight;
        }
    }
    Ok(psi)
}

/// Real eigenvalues and unitary eigenvectors of the densified H.
pub fn dense_spectrum(
    h: &BandMatrixSample,
) -> Result<(Vec<f64>, DMatrix<Complex64>), QdiffError> {
    let nsites = h.config.num_sites();
    if nsites > 4096 {
        return Err(QdiffError::ResourceLimit(format!(
            "dense_spectrum supports N^d <= 4096, got {nsites}"
        )));
    }
    let mut dense = DMatrix::<Complex64>::zeros(nsites, nsites);
    for x in 0..nsites {
        for (y, v) in h.row(x) {
            dense[(x, y)] = v;
        }
    }
    let eigen = dense.symmetric_eigen();
    let eigvals: Vec<f64> = eigen.eigenvalues.iter().copied().collect();
    Ok((eigvals, eigen.eigenvectors))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeConfig;
    use crate::sampler::{sample_band_matrix, SeedSpec};

    fn sample(d: usize, n: i64, w: i64, seed: u64) -> BandMatrixSample {
        let cfg = LatticeConfig::new(d, n, w).unwrap();
        sample_band_matrix(&cfg, SeedSpec::new(seed, 0))
    }

    #[test]
    fn nb_column_first_orders() {
        let h = sample(1, 8, 2, 1);
        let cols = nb_column(&h, 2);
        let origin = h.config.linear_index(&h.config.origin());
        assert_eq!(cols[0][origin], Complex64::new(1.0, 0.0));
        let mut e0 = vec![Complex64::new(0.0, 0.0); h.config.num_sites()];
        e0[origin] = Complex64::new(1.0, 0.0);
        let he0 = h.apply(&e0).unwrap();
        assert_eq!(cols[1], he0);
        // v_2 = (H^2 - (M/(M-1)) Id) e_0
        let m = h.band_size() as f64;
        let h2e0 = h.apply(&he0).unwrap();
        for x in 0..h.config.num_sites() {
            let expect = h2e0[x] - (m / (m - 1.0)) * e0[x];
            assert!((cols[2][x] - expect).norm() <= 1e-14);
        }
    }

    #[test]
    fn recursion_matches_bruteforce_1d() {
        for seed in 0..5 {
            let h = sample(1, 8, 2, seed);
            let cols = nb_column(&h, 5);
            for n in 0..=5 {
                let brute = nb_power_bruteforce(&h, n).unwrap();
                for x in 0..h.config.num_sites() {
                    assert!(
                        (cols[n][x] - brute[x]).norm() <= 1e-12,
                        "seed={seed} n={n} x={x}"
                    );
                }
            }
        }
    }

    #[test]
    fn recursion_matches_bruteforce_2d() {
        let h = sample(2, 6, 2, 3);
        let cols = nb_column(&h, 4);
        for n in 0..=4 {
            let brute = nb_power_bruteforce(&h, n).unwrap();
            for x in 0..h.config.num_sites() {
                assert!((cols[n][x] - brute[x]).norm() <= 1e-12, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn bruteforce_resource_limit() {
        let h = sample(1, 8, 2, 0);
        assert!(matches!(
            nb_power_bruteforce(&h, 7),
            Err(QdiffError::ResourceLimit(_))
        ));
    }

    #[test]
    fn propagate_at_zero_time() {
        let h = sample(1, 16, 2, 5);
        let psi = propagate_column(&h, 0.0, 1e-10).unwrap();
        let origin = h.config.linear_index(&h.config.origin());
        for (x, z) in psi.iter().enumerate() {
            let expect = if x == origin { 1.0 } else { 0.0 };
            assert!((z - Complex64::new(expect, 0.0)).norm() <= 1e-12);
        }
    }

    #[test]
    fn propagate_unitary_norm() {
        let h = sample(1, 64, 8, 7);
        for &t in &[1.0, 5.0, 10.0] {
            let psi = propagate_column(&h, t, 1e-10).unwrap();
            let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
            assert!((norm.sqrt() - 1.0).abs() <= 1e-10, "t={t}");
        }
    }

    #[test]
    fn propagate_matches_dense_oracle() {
        let h = sample(1, 64, 8, 11);
        for &t in &[1.0, 10.0] {
            let psi = propagate_column(&h, t, 1e-10).unwrap();
            let oracle = dense_expm_oracle(&h, t).unwrap();
            let max_dev = psi
                .iter()
                .zip(&oracle)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(max_dev <= 1e-8, "t={t} max_dev={max_dev}");
        }
    }

    #[test]
    fn oracle_unitary_and_identity_at_zero() {
        let h = sample(1, 32, 4, 2);
        let psi0 = dense_expm_oracle(&h, 0.0).unwrap();
        let origin = h.config.linear_index(&h.config.origin());
        for (x, z) in psi0.iter().enumerate() {
            let expect = if x == origin { 1.0 } else { 0.0 };
            assert!((z - Complex64::new(expect, 0.0)).norm() <= 1e-10);
        }
        let psi = dense_expm_oracle(&h, 3.0).unwrap();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm.sqrt() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn spectrum_essentially_in_band() {
        let h = sample(1, 256, 8, 13);
        let (eigvals, _) = dense_spectrum(&h).unwrap();
        let max_abs = eigvals.iter().fold(0.0f64, |acc, &l| acc.max(l.abs()));
        assert!(max_abs <= 2.5, "spectral radius {max_abs}");
    }
}
