//! The transition profile P(t,x), the scaled observable Y_T(φ), Monte Carlo
//! variance estimation, and the variance-scaling study over W.
//!
//! Macroscopic coordinates: `t = W^{dκ} T` and `x = W^{1+dκ/2} X`, so that
//! `Y_T(φ) = Σ_x P(t,x) φ(x / W^{1+dκ/2})` with x over canonical signed
//! coordinates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::QdiffError;
use crate::lattice::LatticeConfig;
use crate::propagator::propagate_column;
use crate::sampler::{sample_band_matrix, BandMatrixSample, SeedSpec};

/// Macroscopic time and the diffusive scaling exponent κ.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScalingParams {
    pub t_macro: f64,
    pub kappa: f64,
}

impl ScalingParams {
    pub fn new(t_macro: f64, kappa: f64) -> Result<Self, QdiffError> {
        if !(0.0..1.0 / 3.0).contains(&kappa) || kappa == 0.0 {
            return Err(QdiffError::Config(format!(
                "kappa must lie in (0, 1/3), got {kappa}"
            )));
        }
        if t_macro < 0.0 {
            return Err(QdiffError::Config("T must be nonnegative".into()));
        }
        Ok(ScalingParams { t_macro, kappa })
    }

    /// Microscopic time `t = W^{dκ} T`.
    pub fn micro_time(&self, d: usize, w: i64) -> f64 {
        (w as f64).powf(d as f64 * self.kappa) * self.t_macro
    }

    /// Spatial scale `W^{1+dκ/2}`.
    pub fn space_scale(&self, d: usize, w: i64) -> f64 {
        (w as f64).powf(1.0 + d as f64 * self.kappa / 2.0)
    }
}

/// Bounded test functions φ on ℝ^d, selectable by CLI string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "param")]
pub enum TestFunction {
    /// φ ≡ c.
    Constant(f64),
    /// `exp(-|X|² / (2σ²))`.
    Gaussian(f64),
    /// Indicator of the cube `max_i |X_i| ≤ h`.
    Box(f64),
    /// `Π_i cos(2π f X_i)`.
    Cosine(f64),
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            TestFunction::Constant(c) => c,
            TestFunction::Gaussian(sigma) => {
                let r2: f64 = x.iter().map(|&c| c * c).sum();
                (-r2 / (2.0 * sigma * sigma)).exp()
            }
            TestFunction::Box(h) => {
                if x.iter().all(|&c| c.abs() <= h) {
                    1.0
                } else {
                    0.0
                }
            }
            TestFunction::Cosine(f) => x
                .iter()
                .map(|&c| (std::f64::consts::TAU * f * c).cos())
                .product(),
        }
    }

    /// `sup |φ|`, which enters the variance bound.
    pub fn sup_norm(&self) -> f64 {
        match *self {
            TestFunction::Constant(c) => c.abs(),
            TestFunction::Gaussian(_) | TestFunction::Box(_) | TestFunction::Cosine(_) => 1.0,
        }
    }

    /// Parses `kind:param` strings such as `gaussian:1.0` or `const:1`.
    pub fn parse(s: &str) -> Result<Self, QdiffError> {
        let (kind, param) = s.split_once(':').unwrap_or((s, "1"));
        let p: f64 = param
            .parse()
            .map_err(|_| QdiffError::Config(format!("bad test-function parameter in '{s}'")))?;
        match kind {
            "const" | "constant" => Ok(TestFunction::Constant(p)),
            "gaussian" => Ok(TestFunction::Gaussian(p)),
            "box" => Ok(TestFunction::Box(p)),
            "cosine" | "cos" => Ok(TestFunction::Cosine(p)),
            _ => Err(QdiffError::Config(format!("unknown test function '{kind}'"))),
        }
    }

    pub fn descriptor(&self) -> String {
        match *self {
            TestFunction::Constant(c) => format!("const:{c}"),
            TestFunction::Gaussian(s) => format!("gaussian:{s}"),
            TestFunction::Box(h) => format!("box:{h}"),
            TestFunction::Cosine(f) => format!("cosine:{f}"),
        }
    }
}

/// `P(t,x) = |(e^{-itH/2})_{0x}|²` over linear site indices.
#[derive(Debug, Clone)]
pub struct TransitionProfile {
    pub config: LatticeConfig,
    pub t: f64,
    pub seed: SeedSpec,
    pub values: Vec<f64>,
}

/// Computes the transition profile for one sampled H.
pub fn transition_profile(
    h: &BandMatrixSample,
    t: f64,
    tol: f64,
) -> Result<TransitionProfile, QdiffError> {
    let psi = propagate_column(h, t, tol)?;
    Ok(TransitionProfile {
        config: h.config.clone(),
        t,
        seed: h.seed,
        values: psi.iter().map(|z| z.norm_sqr()).collect(),
    })
}

impl TransitionProfile {
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// `Y = Σ_x P(t,x) φ(x / scale)` with x in canonical signed coordinates.
pub fn y_observable(p: &TransitionProfile, phi: &TestFunction, scale: f64) -> f64 {
    let cfg = &p.config;
    let mut y = 0.0;
    for (idx, &mass) in p.values.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let site = cfg.site_from_index(idx);
        let x: Vec<f64> = site.0.iter().map(|&c| c as f64 / scale).collect();
        y += mass * phi.eval(&x);
    }
    y
}

/// Monte Carlo estimate of Var(Y_T(φ)) with run metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarianceReport {
    pub d: usize,
    pub n: i64,
    pub w: i64,
    pub kappa: f64,
    pub t_macro: f64,
    pub t_micro: f64,
    pub phi: String,
    pub phi_sup_norm: f64,
    pub replicas: u64,
    pub mean_y: f64,
    /// Unbiased sample variance of Y across replicas.
    pub variance: f64,
    /// Jackknife standard error of the variance estimate.
    pub jackknife_se: f64,
    pub master_seed: u64,
    pub below_size_hypothesis: bool,
    pub valid: bool,
    pub wall_time_s: f64,
}

/// Unbiased sample variance together with its jackknife standard error.
pub fn variance_with_jackknife(samples: &[f64]) -> (f64, f64) {
    let r = samples.len();
    assert!(r >= 2);
    let rf = r as f64;
    let mean: f64 = samples.iter().sum::<f64>() / rf;
    let ss: f64 = samples.iter().map(|&y| (y - mean) * (y - mean)).sum();
    let variance = ss / (rf - 1.0);
    // leave-one-out variances
    let mut loo = Vec::with_capacity(r);
    for i in 0..r {
        // sum of squares about the leave-one-out mean
        let ss_i = ss - (samples[i] - mean) * (samples[i] - mean) * rf / (rf - 1.0);
        loo.push(ss_i.max(0.0) / (rf - 2.0));
    }
    let loo_mean: f64 = loo.iter().sum::<f64>() / rf;
    let se = ((rf - 1.0) / rf
        * loo.iter().map(|&v| (v - loo_mean) * (v - loo_mean)).sum::<f64>())
    .sqrt();
    (variance, se)
}

/// Runs R independent replicas and reduces them in replica-index order.
///
/// Per-replica work is parallelized with rayon; every replica is an isolated
/// stream, so the report is a pure function of `(cfg, sp, phi, replicas,
/// master_seed)` regardless of worker count.
pub fn mc_variance(
    cfg: &LatticeConfig,
    sp: &ScalingParams,
    phi: &TestFunction,
    replicas: u64,
    master_seed: u64,
    tol: f64,
) -> Result<VarianceReport, QdiffError> {
    if replicas < 2 {
        return Err(QdiffError::Config(format!(
            "need at least 2 replicas, got {replicas}"
        )));
    }
    let started = std::time::Instant::now();
    let t_micro = sp.micro_time(cfg.d, cfg.w);
    let scale = sp.space_scale(cfg.d, cfg.w);
    let size_hypothesis = (cfg.w as f64).powf(1.0 + cfg.d as f64 / 6.0);
    let below = (cfg.n as f64) < size_hypothesis;
    if below {
        eprintln!(
            "warning: N = {} is below the size hypothesis W^(1+d/6) = {:.1}; \
             variance decay in this regime is measured, not asserted",
            cfg.n, size_hypothesis
        );
    }
    let results: Vec<Result<f64, QdiffError>> = (0..replicas)
        .into_par_iter()
        .map(|replica| {
            let h = sample_band_matrix(cfg, SeedSpec::new(master_seed, replica));
            let p = transition_profile(&h, t_micro, tol)?;
            Ok(y_observable(&p, phi, scale))
        })
        .collect();
    let mut ys = Vec::with_capacity(replicas as usize);
    let mut valid = true;
    for r in results {
        match r {
            Ok(y) => ys.push(y),
            Err(e) => {
                eprintln!("replica failed: {e}");
                valid = false;
            }
        }
    }
    let (variance, se) = if ys.len() >= 2 {
        variance_with_jackknife(&ys)
    } else {
        (f64::NAN, f64::NAN)
    };
    let mean_y = ys.iter().sum::<f64>() / ys.len().max(1) as f64;
    Ok(VarianceReport {
        d: cfg.d,
        n: cfg.n,
        w: cfg.w,
        kappa: sp.kappa,
        t_macro: sp.t_macro,
        t_micro,
        phi: phi.descriptor(),
        phi_sup_norm: phi.sup_norm(),
        replicas,
        mean_y,
        variance,
        jackknife_se: se,
        master_seed,
        below_size_hypothesis: below,
        valid,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Result of the log Var vs log W fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalingSweep {
    pub reports: Vec<VarianceReport>,
    /// None when every variance is zero (degenerate sweep).
    pub slope: Option<f64>,
    pub slope_se: Option<f64>,
    pub degenerate: bool,
    pub beta_target: f64,
    /// `slope ≤ -d β_target + tolerance` (one-sided; the bound is an upper bound).
    pub pass: Option<bool>,
}

/// Default lattice size for a sweep point: `max(2W+2, ceil(W^{1+d/6}))`,
/// rounded up to at least `n_floor`.
pub fn sweep_lattice_size(d: usize, w: i64, n_floor: i64) -> i64 {
    let hyp = (w as f64).powf(1.0 + d as f64 / 6.0).ceil() as i64;
    (2 * w + 2).max(hyp).max(n_floor)
}

/// Weighted least squares of `log Var` on `log W` with weights 1/SE².
///
/// Returns `(slope, slope_se)`.
pub fn fit_log_log(points: &[(f64, f64, f64)]) -> Option<(f64, f64)> {
    // points: (w, var, se_of_var); propagate SE into log space
    if points.len() < 2 || points.iter().any(|&(_, v, _)| v <= 0.0) {
        return None;
    }
    let data: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|&(w, v, se)| {
            let sigma = if se > 0.0 { se / v } else { 1.0 };
            (w.ln(), v.ln(), 1.0 / (sigma * sigma))
        })
        .collect();
    let sw: f64 = data.iter().map(|&(_, _, wt)| wt).sum();
    let sx: f64 = data.iter().map(|&(x, _, wt)| wt * x).sum();
    let sy: f64 = data.iter().map(|&(_, y, wt)| wt * y).sum();
    let sxx: f64 = data.iter().map(|&(x, _, wt)| wt * x * x).sum();
    let sxy: f64 = data.iter().map(|&(x, y, wt)| wt * x * y).sum();
    let denom = sw * sxx - sx * sx;
    if denom <= 0.0 {
        return None;
    }
    let slope = (sw * sxy - sx * sy) / denom;
    let slope_se = (sw / denom).sqrt();
    Some((slope, slope_se))
}

/// Runs `mc_variance` across a strictly increasing W list and fits the
/// scaling exponent.
#[allow(clippy::too_many_arguments)]
pub fn scaling_sweep(
    d: usize,
    w_list: &[i64],
    n_floor: i64,
    sp: &ScalingParams,
    phi: &TestFunction,
    replicas: u64,
    master_seed: u64,
    tol: f64,
    beta_target: f64,
    slope_tolerance: f64,
) -> Result<ScalingSweep, QdiffError> {
    if w_list.windows(2).any(|p| p[0] >= p[1]) {
        return Err(QdiffError::Config("w_list must be strictly increasing".into()));
    }
    let mut reports = Vec::new();
    for (i, &w) in w_list.iter().enumerate() {
        let n = sweep_lattice_size(d, w, n_floor);
        let cfg = LatticeConfig::new(d, n, w)?;
        // distinct master seed per sweep point keeps points independent
        let seed = master_seed.wrapping_add(i as u64).wrapping_mul(0x9e3779b97f4a7c15);
        let report = mc_variance(&cfg, sp, phi, replicas, seed, tol)?;
        if !report.valid {
            return Err(QdiffError::CheckFailed(format!(
                "invalid variance report at W={w} invalidates the sweep"
            )));
        }
        reports.push(report);
    }
    let points: Vec<(f64, f64, f64)> = reports
        .iter()
        .map(|r| (r.w as f64, r.variance, r.jackknife_se))
        .collect();
    // a bounded deterministic Y still carries ~1e-24 of truncation noise;
    // anything at or below 1e-18 counts as exactly zero variance
    let degenerate = points.iter().all(|&(_, v, _)| v <= 1e-18);
    let fit = if degenerate { None } else { fit_log_log(&points) };
    let pass = fit.map(|(slope, _)| slope <= -(d as f64) * beta_target + slope_tolerance);
    Ok(ScalingSweep {
        reports,
        slope: fit.map(|f| f.0),
        slope_se: fit.map(|f| f.1),
        degenerate,
        beta_target,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::sample_band_matrix;

    fn profile(d: usize, n: i64, w: i64, t: f64) -> TransitionProfile {
        let cfg = LatticeConfig::new(d, n, w).unwrap();
        let h = sample_band_matrix(&cfg, SeedSpec::new(17, 0));
        transition_profile(&h, t, 1e-10).unwrap()
    }

    #[test]
    fn profile_at_zero_is_delta() {
        let p = profile(1, 16, 2, 0.0);
        let origin = p.config.linear_index(&p.config.origin());
        for (idx, &v) in p.values.iter().enumerate() {
            if idx == origin {
                assert!((v - 1.0).abs() <= 1e-12);
            } else {
                assert!(v <= 1e-24);
            }
        }
    }

    #[test]
    fn profile_normalized() {
        let p = profile(1, 64, 4, 5.0);
        assert!((p.total_mass() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn profile_ballistic_support() {
        // order m spreads at most mW sites, and the coefficient tail beyond
        // m = ⌈2e·t⌉ is below 3t^m/m! · O(1), so the mass outside radius
        // W⌈2e·t⌉ is negligible
        let (w, t) = (4i64, 8.0f64);
        let p = profile(1, 512, w, t);
        let radius = (w as f64) * (2.0 * std::f64::consts::E * t).ceil();
        let outside: f64 = (0..p.config.num_sites())
            .filter(|&idx| {
                let s = p.config.site_from_index(idx);
                (s.0[0] as f64).abs() > radius
            })
            .map(|idx| p.values[idx])
            .sum();
        assert!(outside <= 1e-20, "outside mass {outside}");
    }

    #[test]
    fn y_for_constant_and_zero_phi() {
        let p = profile(1, 64, 4, 3.0);
        let y1 = y_observable(&p, &TestFunction::Constant(1.0), 8.0);
        assert!((y1 - 1.0).abs() <= 1e-10);
        let y0 = y_observable(&p, &TestFunction::Constant(0.0), 8.0);
        assert_eq!(y0, 0.0);
    }

    #[test]
    fn y_at_time_zero_hits_phi_origin() {
        let p = profile(1, 16, 2, 0.0);
        let y = y_observable(&p, &TestFunction::Gaussian(1.0), 4.0);
        assert!((y - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn y_bounded_by_sup_norm_and_scale_equivariance() {
        let p = profile(1, 64, 8, 6.0);
        let phi = TestFunction::Gaussian(1.0);
        let y = y_observable(&p, &phi, 10.0);
        assert!(y >= 0.0 && y <= phi.sup_norm() + 1e-12);
        // φ(c ·) at scale s equals φ(·) at scale s/c for the Gaussian family
        let c = 2.0;
        let y_scaled = y_observable(&p, &TestFunction::Gaussian(1.0 / c), 10.0 * c);
        assert!((y - y_scaled).abs() <= 1e-12);
    }

    #[test]
    fn jackknife_matches_direct_computation() {
        let samples = [0.2, 0.5, 0.9, 0.4, 0.7, 0.1];
        let (var, se) = variance_with_jackknife(&samples);
        // direct unbiased variance
        let mean: f64 = samples.iter().sum::<f64>() / 6.0;
        let direct: f64 =
            samples.iter().map(|&y| (y - mean) * (y - mean)).sum::<f64>() / 5.0;
        assert!((var - direct).abs() <= 1e-14);
        // direct leave-one-out recomputation
        let mut loo = Vec::new();
        for i in 0..6 {
            let rest: Vec<f64> = samples
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &y)| y)
                .collect();
            let m: f64 = rest.iter().sum::<f64>() / 5.0;
            loo.push(rest.iter().map(|&y| (y - m) * (y - m)).sum::<f64>() / 4.0);
        }
        let lm: f64 = loo.iter().sum::<f64>() / 6.0;
        let want = (5.0 / 6.0 * loo.iter().map(|&v| (v - lm) * (v - lm)).sum::<f64>()).sqrt();
        assert!((se - want).abs() <= 1e-12);
    }

    #[test]
    fn mc_variance_constant_phi_is_deterministic() {
        let cfg = LatticeConfig::new(1, 32, 4).unwrap();
        let sp = ScalingParams::new(0.5, 0.1).unwrap();
        let r = mc_variance(&cfg, &sp, &TestFunction::Constant(1.0), 8, 5, 1e-10).unwrap();
        assert!(r.variance.abs() <= 1e-18, "variance {}", r.variance);
        assert!(r.valid);
    }

    #[test]
    fn mc_variance_is_worker_independent() {
        let cfg = LatticeConfig::new(1, 32, 4).unwrap();
        let sp = ScalingParams::new(0.5, 0.1).unwrap();
        let phi = TestFunction::Gaussian(1.0);
        let run = || mc_variance(&cfg, &sp, &phi, 6, 42, 1e-10).unwrap();
        let a = run();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(run);
        assert_eq!(a.variance.to_bits(), b.variance.to_bits());
        assert_eq!(a.mean_y.to_bits(), b.mean_y.to_bits());
        assert_eq!(a.jackknife_se.to_bits(), b.jackknife_se.to_bits());
    }

    #[test]
    fn mc_variance_rejects_tiny_replica_count() {
        let cfg = LatticeConfig::new(1, 32, 4).unwrap();
        let sp = ScalingParams::new(0.5, 0.1).unwrap();
        assert!(mc_variance(&cfg, &sp, &TestFunction::Constant(1.0), 1, 0, 1e-10).is_err());
    }

    #[test]
    fn fit_recovers_exact_power_law() {
        let points: Vec<(f64, f64, f64)> =
            [8.0f64, 16.0, 32.0].iter().map(|&w| (w, w.powf(-0.5), 0.01)).collect();
        let (slope, _) = fit_log_log(&points).unwrap();
        assert!((slope + 0.5).abs() <= 1e-10);
    }

    #[test]
    fn sweep_constant_phi_is_degenerate() {
        let sp = ScalingParams::new(0.5, 0.1).unwrap();
        let sweep = scaling_sweep(
            1,
            &[4, 6],
            10,
            &sp,
            &TestFunction::Constant(1.0),
            4,
            3,
            1e-10,
            0.3,
            0.2,
        )
        .unwrap();
        assert!(sweep.degenerate);
        assert!(sweep.slope.is_none());
    }

    #[test]
    fn kappa_validation() {
        assert!(ScalingParams::new(1.0, 0.0).is_err());
        assert!(ScalingParams::new(1.0, 0.4).is_err());
        assert!(ScalingParams::new(1.0, 0.1).is_ok());
    }
}
