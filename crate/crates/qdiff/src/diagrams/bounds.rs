//! Inequality spot-checks, degenerate-case classification, and Monte Carlo
//! consistency for the covariance expansion.
//!
//! The central bound replaces the exact lumping sum by a sum over connected
//! pairings:
//! `|⟨P(t,y1); P(t,y2)⟩| ≤ Σ_Π |a a̅ a a̅| Σ_x Q(x) Π S_{x_e} Π J_π(x)`.
//! All checks run at desk scale where both sides are exactly computable.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::chebyshev::{a_coeff, alpha_bound};
use crate::diagrams::graph::{edge_sites, q_indicator, ChainGraph};
use crate::diagrams::lumping::{covariance_bruteforce, for_each_pinned_labeling};
use crate::diagrams::orbit::orbit_partition;
use crate::diagrams::pairing::{enumerate_pairings, j_indicator, Pairing};
use crate::diagrams::skeleton::{enumerate_skeletons, Skeleton};
use crate::error::QdiffError;
use crate::lattice::{BandProfile, LatticeConfig};
use crate::propagator::nb_column;
use crate::sampler::{sample_band_matrix, SeedSpec};

/// `Σ_x Q_{y1,y2}(x) Π_{{e,e'}} S_{x_e} Π_π J_π(x)` for one pairing.
pub fn pairing_sum(
    cfg: &LatticeConfig,
    p: &Pairing,
    y1: usize,
    y2: usize,
) -> Result<f64, QdiffError> {
    let profile = BandProfile::new(cfg.clone());
    let g = &p.graph;
    let bridges = p.bridges();
    let origin = cfg.linear_index(&cfg.origin());
    let mut acc = 0.0;
    for_each_pinned_labeling(cfg, g, y1, y2, |labels| {
        if !q_indicator(g, labels, origin, y1, y2) {
            return;
        }
        if !bridges.iter().all(|&b| j_indicator(g, b, labels)) {
            return;
        }
        let mut term = 1.0;
        for &(e, _) in &bridges {
            let (u, v) = edge_sites(g, labels, e);
            term *= profile.entry(&cfg.site_from_index(u), &cfg.site_from_index(v));
            if term == 0.0 {
                return;
            }
        }
        acc += term;
    })?;
    Ok(acc)
}

#[derive(Debug, Clone, Serialize)]
pub struct PairingBoundReport {
    pub t: f64,
    pub y1: usize,
    pub y2: usize,
    pub order: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub tail: f64,
    /// Whether the inequality already holds without the truncation allowance.
    pub strict: bool,
    pub pass: bool,
}

/// Numerical bound on `|a_m(t)|` from the quadrature-free series bound
/// `|a_m| ≤ Σ_k |α_{m+2k}| (M-1)^{-k}`.
fn a_coeff_bound(m: usize, t: f64, big_m: usize) -> f64 {
    let ratio = 1.0 / (big_m as f64 - 1.0);
    let mut acc = 0.0;
    let mut weight = 1.0;
    for k in 0..200 {
        let term = alpha_bound(m + 2 * k, t) * weight;
        acc += term;
        if term < 1e-18 * (acc + 1e-300) {
            break;
        }
        weight *= ratio;
    }
    acc
}

/// Bound on the total contribution of all tuples with `n11+n12+n21+n22 > order`
/// to both sides: per tuple the covariance satisfies
/// `|cov| ≤ (#labelings) · max|A| ≤ M^{n-2} · 2 (M-1)^{-n/2}`.
fn truncation_tail(t: f64, big_m: usize, order: usize) -> f64 {
    let m = big_m as f64;
    let max_n = 160usize;
    let a: Vec<f64> = (0..=max_n).map(|n| a_coeff_bound(n, t, big_m)).collect();
    // chain factor: Σ_{n1+n2=p} |a_{n1}||a_{n2}|
    let mut chain = vec![0.0f64; max_n + 1];
    for (p, c) in chain.iter_mut().enumerate() {
        for i in 0..=p {
            *c += a[i] * a[p - i];
        }
    }
    let mut tail = 0.0;
    for n in (order + 1)..=max_n {
        if n % 2 != 0 {
            continue;
        }
        let mut tuples = 0.0;
        for p in 1..n {
            tuples += chain[p] * chain[n - p];
        }
        let term = tuples * 2.0 * m.powi(n as i32 - 2) / (m - 1.0).powf(n as f64 / 2.0);
        tail += term;
        if term < 1e-18 * (tail + 1e-300) {
            break;
        }
    }
    tail
}

/// Verifies the pairing bound at a fixed `(y1, y2)` with all tuple totals
/// `≤ order` computed exactly and the discarded tuples covered by
/// [`truncation_tail`].
pub fn pairing_bound_check(
    cfg: &LatticeConfig,
    t: f64,
    y1: usize,
    y2: usize,
    order: usize,
) -> Result<PairingBoundReport, QdiffError> {
    if t.abs() > 1.0 {
        return Err(QdiffError::Config("pairing bound check requires |t| <= 1".into()));
    }
    let big_m = BandProfile::new(cfg.clone()).band_size();
    let a: Vec<Complex64> =
        (0..=order).map(|n| a_coeff(n, t, big_m, 1e-14)).collect();
    let mut tuples = Vec::new();
    for n11 in 0..=order {
        for n12 in 0..=order - n11 {
            if n11 + n12 == 0 {
                continue;
            }
            for n21 in 0..=order - n11 - n12 {
                for n22 in 0..=order - n11 - n12 - n21 {
                    if n21 + n22 == 0 {
                        continue;
                    }
                    tuples.push((n11, n12, n21, n22));
                }
            }
        }
    }
    // evaluate tuples in parallel but reduce in tuple order, so the sums are
    // independent of the worker count
    let contributions: Result<Vec<(Complex64, f64)>, QdiffError> = tuples
        .par_iter()
        .map(|&(n11, n12, n21, n22)| {
            let coeff = a[n11] * a[n12].conj() * a[n21] * a[n22].conj();
            if coeff.norm() < 1e-300 {
                return Ok((Complex64::new(0.0, 0.0), 0.0));
            }
            let g = ChainGraph::new(n11, n12, n21, n22)?;
            let cov = covariance_bruteforce(cfg, &g, y1, y2)?;
            let mut pair_total = 0.0;
            for p in enumerate_pairings(&g)? {
                pair_total += pairing_sum(cfg, &p, y1, y2)?;
            }
            Ok((coeff * cov, coeff.norm() * pair_total))
        })
        .collect();
    let mut lhs_sum = Complex64::new(0.0, 0.0);
    let mut rhs = 0.0;
    for (c, r) in contributions? {
        lhs_sum += c;
        rhs += r;
    }
    let tail = truncation_tail(t, big_m, order);
    let lhs = lhs_sum.norm();
    Ok(PairingBoundReport {
        t,
        y1,
        y2,
        order,
        lhs,
        rhs,
        tail,
        strict: lhs <= rhs,
        pass: lhs <= rhs + tail,
    })
}

/// Expanded chain orders `n_ij(Σ, l)`: the total multiplicity carried by the
/// edges of each root→summit / summit→root segment.
pub fn expanded_orders(sk: &Skeleton, l: &[u32]) -> (usize, usize, usize, usize) {
    let g = &sk.pairing.graph;
    let bridges = sk.pairing.bridges();
    let mut bridge_of_edge = vec![0usize; sk.pairing.partner.len()];
    for (b, &(e, ep)) in bridges.iter().enumerate() {
        bridge_of_edge[e] = b;
        bridge_of_edge[ep] = b;
    }
    let mut n = [0usize; 4];
    for e in 0..sk.pairing.partner.len() {
        let chain = g.chain_of_edge(e);
        let up = g.edge_on_upward_path(e);
        let slot = (chain - 1) * 2 + usize::from(!up);
        n[slot] += l[bridge_of_edge[e]] as usize;
    }
    (n[0], n[1], n[2], n[3])
}

/// `Σ_{l ∈ ℕ^Σ, |l| ≤ cutoff} |a_{n11} a_{n12} a_{n21} a_{n22}|` at the
/// expanded orders, with `cutoff = ⌊M^μ⌋`.
pub fn coeff_sum_cutoff(
    sk: &Skeleton,
    t: f64,
    big_m: usize,
    mu: f64,
) -> Result<f64, QdiffError> {
    let m = sk.num_bridges();
    let cutoff = (big_m as f64).powf(mu).floor() as usize;
    if cutoff > 24 {
        return Err(QdiffError::ResourceLimit(format!(
            "cutoff M^mu = {cutoff} exceeds 24"
        )));
    }
    let max_order = 2 * cutoff;
    let a_abs: Vec<f64> =
        (0..=max_order).map(|n| a_coeff(n, t, big_m, 1e-14).norm()).collect();
    if m == 0 || cutoff < m {
        return Ok(0.0);
    }
    let mut l = vec![1u32; m];
    let mut acc = 0.0;
    loop {
        let total: u32 = l.iter().sum();
        if total as usize <= cutoff {
            let (n11, n12, n21, n22) = expanded_orders(sk, &l);
            acc += a_abs[n11] * a_abs[n12] * a_abs[n21] * a_abs[n22];
        }
        // advance within the simplex |l| ≤ cutoff
        let mut k = 0;
        loop {
            if k == m {
                return Ok(acc);
            }
            l[k] += 1;
            if l.iter().sum::<u32>() as usize <= cutoff {
                break;
            }
            l[k] = 1;
            k += 1;
        }
    }
}

/// Largest observed ratio of [`coeff_sum_cutoff`] to
/// `M^{μ(|Σ|-2)} / (|Σ|-3)!` over all skeletons with `|Σ| ∈ {3, 4}`.
pub fn coeff_cutoff_envelope(t: f64, big_m: usize, mu: f64) -> Result<f64, QdiffError> {
    let mut worst: f64 = 0.0;
    for m in 3..=4usize {
        let denom: f64 = (1..=m.saturating_sub(3)).product::<usize>() as f64;
        let bound = (big_m as f64).powf(mu * (m as f64 - 2.0)) / denom.max(1.0);
        for sk in enumerate_skeletons(m)? {
            let v = coeff_sum_cutoff(&sk, t, big_m, mu)?;
            worst = worst.max(v / bound);
        }
    }
    Ok(worst)
}

// ---------------------------------------------------------------------------
// degenerate cases
// ---------------------------------------------------------------------------

/// Covariance of two length-1 chains vanishes identically: `|H_xy|^2` is
/// deterministic, so nothing with total order 2 contributes.
pub fn total_order_two_vanishes(cfg: &LatticeConfig) -> Result<bool, QdiffError> {
    for counts in [(1, 0, 1, 0), (1, 0, 0, 1), (0, 1, 1, 0), (0, 1, 0, 1)] {
        let g = ChainGraph::new(counts.0, counts.1, counts.2, counts.3)?;
        for y1 in 0..cfg.num_sites() {
            for y2 in 0..cfg.num_sites() {
                if covariance_bruteforce(cfg, &g, y1, y2)?.abs() > 1e-15 {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

fn remap(p: &Pairing, counts: (usize, usize, usize, usize), edge_map: &[usize]) -> Pairing {
    let mut partner = vec![usize::MAX; p.partner.len()];
    for (e, &pe) in p.partner.iter().enumerate() {
        partner[edge_map[e]] = edge_map[pe];
    }
    Pairing { graph: ChainGraph { counts }, partner }
}

fn swap_chains(p: &Pairing) -> Pairing {
    let (n11, n12, n21, n22) = p.graph.counts;
    let m1 = p.graph.chain_len(1);
    let m2 = p.graph.chain_len(2);
    let edge_map: Vec<usize> =
        (0..m1 + m2).map(|e| if e < m1 { e + m2 } else { e - m1 }).collect();
    remap(p, (n21, n22, n11, n12), &edge_map)
}

fn reverse_chain(p: &Pairing, chain: usize) -> Pairing {
    let (n11, n12, n21, n22) = p.graph.counts;
    let counts = if chain == 1 {
        (n12, n11, n21, n22)
    } else {
        (n11, n12, n22, n21)
    };
    let m1 = p.graph.chain_len(1);
    let len = p.graph.chain_len(chain);
    let base = if chain == 1 { 0 } else { m1 };
    let edge_map: Vec<usize> = (0..p.partner.len())
        .map(|e| {
            if e >= base && e < base + len {
                base + (len - 1 - (e - base))
            } else {
                e
            }
        })
        .collect();
    remap(p, counts, &edge_map)
}

type CanonicalKey = ((usize, usize, usize, usize), Vec<(usize, usize)>);

fn canonical_key(p: &Pairing) -> CanonicalKey {
    (p.graph.counts, p.bridges())
}

/// Classes of skeletons under chain swap and per-chain direction reversal.
pub fn skeleton_symmetry_classes(skeletons: &[Skeleton]) -> Vec<Vec<usize>> {
    let mut class_of_key: std::collections::HashMap<CanonicalKey, usize> =
        std::collections::HashMap::new();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (i, sk) in skeletons.iter().enumerate() {
        let mut images = Vec::new();
        for s in [false, true] {
            for r1 in [false, true] {
                for r2 in [false, true] {
                    let mut q = sk.pairing.clone();
                    if r1 {
                        q = reverse_chain(&q, 1);
                    }
                    if r2 {
                        q = reverse_chain(&q, 2);
                    }
                    if s {
                        q = swap_chains(&q);
                    }
                    images.push(canonical_key(&q));
                }
            }
        }
        let rep = images.iter().min().unwrap().clone();
        if let Some(&c) = class_of_key.get(&rep) {
            classes[c].push(i);
        } else {
            let c = classes.len();
            classes.push(vec![i]);
            for key in images {
                class_of_key.insert(key, c);
            }
        }
    }
    classes
}

/// Configuration shape of a two-bridge skeleton.
///
/// A bridge touches segments of the chains (a segment is the upward or
/// downward part of a chain); chain swap and per-chain direction reversal
/// permute segments without changing the shape. The shapes are: one bridge
/// inside a single chain plus one connecting bridge (0), or two connecting
/// bridges covering 2, 3, or 4 distinct segments (1, 2, 3).
pub fn two_bridge_configuration(sk: &Skeleton) -> usize {
    let g = &sk.pairing.graph;
    let bridges = sk.pairing.bridges();
    assert_eq!(bridges.len(), 2, "expected a two-bridge skeleton");
    if bridges.iter().any(|&(e, ep)| g.chain_of_edge(e) == g.chain_of_edge(ep)) {
        return 0;
    }
    let segment =
        |e: usize| 2 * (g.chain_of_edge(e) - 1) + usize::from(!g.edge_on_upward_path(e));
    let mut segs = std::collections::HashSet::new();
    for &(e, ep) in &bridges {
        segs.insert(segment(e));
        segs.insert(segment(ep));
    }
    segs.len() - 1
}

/// The summit labels of a two-bridge skeleton are forced equal: either both
/// summits share one τ-orbit, or each sits in a root orbit (labels 0).
pub fn forces_equal_summits(sk: &Skeleton) -> bool {
    let g = &sk.pairing.graph;
    let orbits = orbit_partition(&sk.pairing);
    let (z1, z2) = orbits.summit_classes(g);
    let roots = [orbits.orbit_of[g.root(1)], orbits.orbit_of[g.root(2)]];
    z1 == z2 || (roots.contains(&z1) && roots.contains(&z2))
}

// ---------------------------------------------------------------------------
// Monte Carlo consistency
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct McCovarianceReport {
    pub counts: (usize, usize, usize, usize),
    pub y1: usize,
    pub y2: usize,
    pub replicas: u64,
    pub estimate_re: f64,
    pub estimate_im: f64,
    pub se: f64,
    pub exact: f64,
    pub pass: bool,
}

/// Sample covariance of the two chain products over independent matrix
/// replicas, with a jackknife standard error, compared against the exact
/// brute-force value at 5 standard errors.
pub fn mc_chain_covariance(
    cfg: &LatticeConfig,
    g: &ChainGraph,
    y1: usize,
    y2: usize,
    replicas: u64,
    master_seed: u64,
) -> Result<McCovarianceReport, QdiffError> {
    if replicas < 16 {
        return Err(QdiffError::Config("need at least 16 replicas".into()));
    }
    let (n11, n12, n21, n22) = g.counts;
    let m_max = n11.max(n12).max(n21).max(n22);
    let samples: Vec<(Complex64, Complex64)> = (0..replicas)
        .into_par_iter()
        .map(|replica_index| {
            let h = sample_band_matrix(cfg, SeedSpec { master_seed, replica_index });
            let cols = nb_column(&h, m_max);
            // H^{(n)}_{0y} = conj(H^{(n)}_{y0}) by Hermiticity of H^{(n)}
            let z1 = cols[n11][y1].conj() * cols[n12][y1];
            let z2 = cols[n21][y2].conj() * cols[n22][y2];
            (z1, z2)
        })
        .collect();
    let r = replicas as f64;
    let mut s1 = Complex64::new(0.0, 0.0);
    let mut s2 = Complex64::new(0.0, 0.0);
    let mut s12 = Complex64::new(0.0, 0.0);
    for &(z1, z2) in &samples {
        s1 += z1;
        s2 += z2;
        s12 += z1 * z2;
    }
    let est = s12 / r - (s1 / r) * (s2 / r);
    // jackknife over leave-one-out covariances
    let mut jack = Vec::with_capacity(samples.len());
    for &(z1, z2) in &samples {
        let c = (s12 - z1 * z2) / (r - 1.0)
            - ((s1 - z1) / (r - 1.0)) * ((s2 - z2) / (r - 1.0));
        jack.push(c);
    }
    let jmean = jack.iter().sum::<Complex64>() / r;
    let mut var_re = 0.0;
    let mut var_im = 0.0;
    for c in &jack {
        var_re += (c.re - jmean.re).powi(2);
        var_im += (c.im - jmean.im).powi(2);
    }
    let se = ((r - 1.0) / r * (var_re + var_im)).sqrt();
    let exact = covariance_bruteforce(cfg, g, y1, y2)?;
    let diff = (est - Complex64::new(exact, 0.0)).norm();
    Ok(McCovarianceReport {
        counts: g.counts,
        y1,
        y2,
        replicas,
        estimate_re: est.re,
        estimate_im: est.im,
        se,
        exact,
        pass: diff <= 5.0 * se.max(1e-15),
    })
}
