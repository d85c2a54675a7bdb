//! The lattice value `R(Σ)` of a skeleton with bridge multiplicities.
//!
//! `R(Σ) = Σ_x 1(x_{r1}=0) 1(x_{r2}=0) Π_σ (S^{l_σ})_{x_e} Π_σ J_σ(x)`.
//! The bridge indicators force `x` to be constant on τ-orbits, so the sum
//! reduces to one free lattice label per rootless orbit.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::diagrams::graph::Labeling;
use crate::diagrams::orbit::orbit_partition;
use crate::diagrams::pairing::j_indicator;
use crate::diagrams::skeleton::{enumerate_skeletons, Skeleton};
use crate::error::QdiffError;
use crate::lattice::{BandProfile, LatticeConfig, Site};

const MAX_FREE_ORBITS: usize = 6;

fn neg_site(cfg: &LatticeConfig, s: &Site) -> Site {
    cfg.canonicalize(&s.0.iter().map(|&c| -c).collect::<Vec<_>>())
}

/// `(S^l)_{x,y}` looked up in a precomputed origin-column kernel.
fn kernel_entry(cfg: &LatticeConfig, kernel: &[f64], x: &Site, y: &Site) -> f64 {
    let diff = cfg.add(y, &neg_site(cfg, x));
    kernel[cfg.linear_index(&diff)]
}

/// Exact `R(Σ)` by orbit-reduced summation.
pub fn r_value(profile: &BandProfile, sk: &Skeleton, l: &[u32]) -> Result<f64, QdiffError> {
    let p = &sk.pairing;
    let g = &p.graph;
    let bridges = p.bridges();
    if l.len() != bridges.len() {
        return Err(QdiffError::Config(format!(
            "expected {} multiplicities, got {}",
            bridges.len(),
            l.len()
        )));
    }
    if l.iter().any(|&v| v == 0) {
        return Err(QdiffError::Config("multiplicities must be >= 1".into()));
    }
    let cfg = &profile.config;
    let orbits = orbit_partition(p);
    let root_orbits = [orbits.orbit_of[g.root(1)], orbits.orbit_of[g.root(2)]];
    let free: Vec<usize> =
        (0..orbits.orbits.len()).filter(|i| !root_orbits.contains(i)).collect();
    if free.len() > MAX_FREE_ORBITS {
        return Err(QdiffError::ResourceLimit(format!(
            "{} free orbits exceed the cap of {MAX_FREE_ORBITS}",
            free.len()
        )));
    }
    let mut kernels: HashMap<u32, Vec<f64>> = HashMap::new();
    for &lv in l {
        kernels.entry(lv).or_insert_with(|| profile.power_kernel(lv));
    }
    // per-bridge orbit classes (ζ1, ζ2) for the smaller edge of the bridge
    let classes: Vec<(usize, usize)> = bridges
        .iter()
        .map(|&(e, _)| (orbits.orbit_of[g.edge_tail(e)], orbits.orbit_of[g.edge_head(e)]))
        .collect();

    let origin = cfg.origin();
    let nsites = cfg.num_sites();
    let mut orbit_site: Vec<Site> = vec![origin.clone(); orbits.orbits.len()];
    let mut counter = vec![0usize; free.len()];
    let mut acc = 0.0;
    loop {
        for (slot, &orb) in free.iter().enumerate() {
            orbit_site[orb] = cfg.site_from_index(counter[slot]);
        }
        let mut term = 1.0;
        for (b, &(z1, z2)) in classes.iter().enumerate() {
            let kernel = &kernels[&l[b]];
            term *= kernel_entry(cfg, kernel, &orbit_site[z1], &orbit_site[z2]);
            if term == 0.0 {
                break;
            }
        }
        acc += term;
        let mut k = 0;
        loop {
            if k == free.len() {
                return Ok(acc);
            }
            counter[k] += 1;
            if counter[k] < nsites {
                break;
            }
            counter[k] = 0;
            k += 1;
        }
    }
}

/// `R(Σ)` by full enumeration over all vertex labelings (test oracle).
pub fn r_value_naive(profile: &BandProfile, sk: &Skeleton, l: &[u32]) -> Result<f64, QdiffError> {
    let p = &sk.pairing;
    let g = &p.graph;
    let bridges = p.bridges();
    let cfg = &profile.config;
    let nsites = cfg.num_sites();
    let nv = g.num_vertices();
    let total = (nsites as u64).checked_pow(nv as u32).unwrap_or(u64::MAX);
    if total > 10_000_000 {
        return Err(QdiffError::ResourceLimit(format!("{total} labelings")));
    }
    let mut kernels: HashMap<u32, Vec<f64>> = HashMap::new();
    for &lv in l {
        kernels.entry(lv).or_insert_with(|| profile.power_kernel(lv));
    }
    let origin = cfg.linear_index(&cfg.origin());
    let sites: Vec<Site> = (0..nsites).map(|i| cfg.site_from_index(i)).collect();
    let mut labels = Labeling(vec![0usize; nv]);
    let mut acc = 0.0;
    for code in 0..total {
        let mut c = code;
        for v in 0..nv {
            labels.0[v] = (c % nsites as u64) as usize;
            c /= nsites as u64;
        }
        if labels.0[g.root(1)] != origin || labels.0[g.root(2)] != origin {
            continue;
        }
        if !bridges.iter().all(|&b| j_indicator(g, b, &labels)) {
            continue;
        }
        let mut term = 1.0;
        for (b, &(e, _)) in bridges.iter().enumerate() {
            let kernel = &kernels[&l[b]];
            let x = &sites[labels.0[g.edge_tail(e)]];
            let y = &sites[labels.0[g.edge_head(e)]];
            term *= kernel_entry(cfg, kernel, x, y);
        }
        acc += term;
    }
    Ok(acc)
}

/// Largest observed ratio `R(Σ) / ((M/(M-1))^{|l|} M^{-|Σ|/3 + 2/3})` over
/// the grid `|Σ| ≤ max_bridges`, multiplicity entries `≤ max_l`, d = 1,
/// `W ∈ w_list` with `N = 2W + 2`.
pub fn r_bound_envelope(
    w_list: &[i64],
    max_bridges: usize,
    max_l: u32,
) -> Result<f64, QdiffError> {
    let mut worst: f64 = 0.0;
    for m in 1..=max_bridges {
        let skeletons = enumerate_skeletons(m)?;
        for &w in w_list {
            let cfg = LatticeConfig::new(1, 2 * w + 2, w)?;
            let profile = BandProfile::new(cfg);
            let big_m = profile.band_size() as f64;
            // max over skeletons is order-independent, so parallelize freely
            let per_skeleton: Result<Vec<f64>, QdiffError> = skeletons
                .par_iter()
                .map(|sk| {
                    let mut sk_worst: f64 = 0.0;
                    let mut l = vec![1u32; m];
                    loop {
                        let r = r_value(&profile, sk, &l)?;
                        let total_l: u32 = l.iter().sum();
                        let bound = (big_m / (big_m - 1.0)).powi(total_l as i32)
                            * big_m.powf(-(m as f64) / 3.0 + 2.0 / 3.0);
                        sk_worst = sk_worst.max(r / bound);
                        // advance the multiplicity vector
                        let mut k = 0;
                        loop {
                            if k == m {
                                break;
                            }
                            l[k] += 1;
                            if l[k] <= max_l {
                                break;
                            }
                            l[k] = 1;
                            k += 1;
                        }
                        if k == m {
                            break;
                        }
                    }
                    Ok(sk_worst)
                })
                .collect();
            for v in per_skeleton? {
                worst = worst.max(v);
            }
        }
    }
    Ok(worst)
}
