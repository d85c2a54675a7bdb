//! Lumpings of the chain-graph edges and the exact covariance identity.
//!
//! A lumping is the partition of edges induced by coinciding unordered
//! endpoint-label pairs. Summing the value `V(Γ) = Σ_x 1(Γ(x)=Γ) Q A` over
//! connected even lumpings reproduces the exact covariance
//! `⟨H^{(n11)}_{0y1} H^{(n12)}_{y1 0} ; H^{(n21)}_{0y2} H^{(n22)}_{y2 0}⟩`.

use std::collections::HashMap;

use crate::diagrams::graph::{edge_sites, q_indicator, ChainGraph, Labeling};
use crate::error::QdiffError;
use crate::lattice::{BandProfile, LatticeConfig};

/// Partition of edges in restricted-growth-string form: `block[e]` is the
/// index of e's block, blocks numbered by first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Lumping {
    pub block: Vec<u8>,
}

impl Lumping {
    pub fn num_blocks(&self) -> usize {
        self.block.iter().map(|&b| b as usize + 1).max().unwrap_or(0)
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.num_blocks()];
        for &b in &self.block {
            sizes[b as usize] += 1;
        }
        sizes
    }

    /// Every lump has even size.
    pub fn is_even(&self) -> bool {
        self.block_sizes().iter().all(|&s| s % 2 == 0)
    }

    /// Some lump meets both chains.
    pub fn is_connected(&self, g: &ChainGraph) -> bool {
        let nb = self.num_blocks();
        let mut meets = vec![[false, false]; nb];
        for (e, &b) in self.block.iter().enumerate() {
            meets[b as usize][g.chain_of_edge(e) - 1] = true;
        }
        meets.iter().any(|m| m[0] && m[1])
    }

    /// A pairing is a lumping with all blocks of size 2.
    pub fn is_pairing(&self) -> bool {
        self.block_sizes().iter().all(|&s| s == 2)
    }
}

/// The lumping induced by a labeling: `e ∼ e'` iff the unordered endpoint
/// label pairs coincide.
pub fn lumping_of_labels(g: &ChainGraph, labels: &Labeling) -> Lumping {
    let num = g.num_edges();
    let mut keys: Vec<(usize, usize)> = Vec::with_capacity(num);
    for e in 0..num {
        let (a, b) = edge_sites(g, labels, e);
        keys.push(if a <= b { (a, b) } else { (b, a) });
    }
    let mut assignment: HashMap<(usize, usize), u8> = HashMap::new();
    let mut block = Vec::with_capacity(num);
    for key in keys {
        let next = assignment.len() as u8;
        block.push(*assignment.entry(key).or_insert(next));
    }
    Lumping { block }
}

/// Exact expectation of a product of H entries over directed site pairs.
///
/// Pairs are grouped by unordered support {u, v}; a group with p copies of
/// (u,v) and q copies of (v,u) contributes `S_uv^p` iff p = q, and the whole
/// product vanishes otherwise (unpaired phases average to zero). Any pair
/// with zero profile support, including loops, kills the product.
///
/// The nonzero result is exactly `(M-1)^{-k}`; the returned value is the
/// exponent k, `None` meaning the expectation is 0.
pub fn edge_product_expectation(
    cfg: &LatticeConfig,
    profile: &BandProfile,
    pairs: &[(usize, usize)],
) -> Option<u32> {
    let mut groups: HashMap<(usize, usize), (u32, u32)> = HashMap::new();
    for &(u, v) in pairs {
        let su = cfg.site_from_index(u);
        let sv = cfg.site_from_index(v);
        if profile.entry(&su, &sv) == 0.0 {
            return None;
        }
        let (key, forward) = if u <= v { ((u, v), true) } else { ((v, u), false) };
        let entry = groups.entry(key).or_insert((0, 0));
        if forward {
            entry.0 += 1;
        } else {
            entry.1 += 1;
        }
    }
    let mut exponent = 0u32;
    for (p, q) in groups.values() {
        if p != q {
            return None;
        }
        exponent += p;
    }
    Some(exponent)
}

/// `A(x) = E Π_{E(𝓛)} H - E Π_{E(𝓛_1)} H · E Π_{E(𝓛_2)} H`.
pub fn a_value(
    cfg: &LatticeConfig,
    profile: &BandProfile,
    g: &ChainGraph,
    labels: &Labeling,
) -> f64 {
    let all: Vec<(usize, usize)> = (0..g.num_edges()).map(|e| edge_sites(g, labels, e)).collect();
    let m1 = g.chain_len(1);
    let base = 1.0 / (profile.band_size() as f64 - 1.0);
    let full = edge_product_expectation(cfg, profile, &all)
        .map(|k| base.powi(k as i32))
        .unwrap_or(0.0);
    let left = edge_product_expectation(cfg, profile, &all[..m1])
        .map(|k| base.powi(k as i32))
        .unwrap_or(0.0);
    let right = edge_product_expectation(cfg, profile, &all[m1..])
        .map(|k| base.powi(k as i32))
        .unwrap_or(0.0);
    full - left * right
}

const MAX_LABELINGS: u64 = 10_000_000;

/// Iterates all labelings with roots pinned to the origin and summits to
/// (y1, y2), visiting `f(labels)` for each.
pub(crate) fn for_each_pinned_labeling<F: FnMut(&Labeling)>(
    cfg: &LatticeConfig,
    g: &ChainGraph,
    y1: usize,
    y2: usize,
    mut f: F,
) -> Result<(), QdiffError> {
    let origin = cfg.linear_index(&cfg.origin());
    let nsites = cfg.num_sites();
    let nv = g.num_vertices();
    let mut labels = Labeling(vec![usize::MAX; nv]);
    // pinned vertices; conflicting pins (r = s with y ≠ 0) give zero terms
    let pins = [
        (g.root(1), origin),
        (g.root(2), origin),
        (g.summit(1), y1),
        (g.summit(2), y2),
    ];
    for &(v, val) in &pins {
        if labels.0[v] != usize::MAX && labels.0[v] != val {
            return Ok(()); // contradictory pinning, empty sum
        }
        labels.0[v] = val;
    }
    let free: Vec<usize> = (0..nv).filter(|&v| labels.0[v] == usize::MAX).collect();
    let total = (nsites as u64).checked_pow(free.len() as u32).unwrap_or(u64::MAX);
    if total > MAX_LABELINGS {
        return Err(QdiffError::ResourceLimit(format!(
            "{} labelings exceed the {} cap",
            total, MAX_LABELINGS
        )));
    }
    let mut counter = vec![0usize; free.len()];
    loop {
        for (slot, &v) in free.iter().enumerate() {
            labels.0[v] = counter[slot];
        }
        f(&labels);
        // advance
        let mut k = 0;
        loop {
            if k == free.len() {
                return Ok(());
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

/// Exact covariance by direct summation over all pinned labelings.
pub fn covariance_bruteforce(
    cfg: &LatticeConfig,
    g: &ChainGraph,
    y1: usize,
    y2: usize,
) -> Result<f64, QdiffError> {
    let profile = BandProfile::new(cfg.clone());
    let origin = cfg.linear_index(&cfg.origin());
    let mut acc = 0.0;
    for_each_pinned_labeling(cfg, g, y1, y2, |labels| {
        if q_indicator(g, labels, origin, y1, y2) {
            acc += a_value(cfg, &profile, g, labels);
        }
    })?;
    Ok(acc)
}

/// Values `V_{y1,y2}(Γ)` for every lumping realized by some labeling.
pub fn lumping_values(
    cfg: &LatticeConfig,
    g: &ChainGraph,
    y1: usize,
    y2: usize,
) -> Result<HashMap<Lumping, f64>, QdiffError> {
    let profile = BandProfile::new(cfg.clone());
    let origin = cfg.linear_index(&cfg.origin());
    let mut values: HashMap<Lumping, f64> = HashMap::new();
    for_each_pinned_labeling(cfg, g, y1, y2, |labels| {
        if q_indicator(g, labels, origin, y1, y2) {
            let a = a_value(cfg, &profile, g, labels);
            if a != 0.0 {
                *values.entry(lumping_of_labels(g, labels)).or_insert(0.0) += a;
            }
        }
    })?;
    Ok(values)
}

/// Covariance assembled from connected even lumpings only.
pub fn covariance_via_lumpings(
    cfg: &LatticeConfig,
    g: &ChainGraph,
    y1: usize,
    y2: usize,
) -> Result<f64, QdiffError> {
    let values = lumping_values(cfg, g, y1, y2)?;
    Ok(values
        .iter()
        .filter(|(lumping, _)| lumping.is_even() && lumping.is_connected(g))
        .map(|(_, v)| v)
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeConfig;

    fn small_cfg() -> LatticeConfig {
        // N=5 < 2W+2 is intentional for the diagram desk scale; build directly
        LatticeConfig { d: 1, n: 6, w: 2 }
    }

    #[test]
    fn lumping_from_labels_basic() {
        let g = ChainGraph::new(1, 1, 1, 1).unwrap();
        // chain 1: labels (0, y); both edges carry {0, y}
        let l = lumping_of_labels(&g, &Labeling(vec![0, 3, 0, 4]));
        assert_eq!(l.block, vec![0, 0, 1, 1]);
        assert!(l.is_even());
        assert!(!l.is_connected(&g));
        // distinct labels along chain 1 give singleton lumps there; the two
        // edges of the length-2 chain 2 always share one unordered pair
        let g2 = ChainGraph::new(3, 1, 1, 1).unwrap();
        let l2 = lumping_of_labels(&g2, &Labeling(vec![0, 1, 2, 3, 0, 4]));
        assert_eq!(l2.num_blocks(), 5);
        assert!(!l2.is_even());
    }

    #[test]
    fn lumping_is_direction_insensitive() {
        // (2,2) chain labeled 0,a,0,a: the four edges alternate {0,a} pairs
        let g = ChainGraph::new(2, 2, 1, 1).unwrap();
        let l = lumping_of_labels(&g, &Labeling(vec![0, 5, 0, 5, 0, 1]));
        // all four chain-1 edges carry {0,5}
        assert_eq!(&l.block[..4], &[0, 0, 0, 0]);
    }

    #[test]
    fn expectation_grouping_rules() {
        let cfg = small_cfg();
        let profile = BandProfile::new(cfg.clone());
        let u = cfg.linear_index(&cfg.canonicalize(&[0]));
        let v = cfg.linear_index(&cfg.canonicalize(&[1]));
        let w = cfg.linear_index(&cfg.canonicalize(&[2]));
        // {(u,v),(v,u)} → S_uv, exponent 1
        assert_eq!(edge_product_expectation(&cfg, &profile, &[(u, v), (v, u)]), Some(1));
        // {(u,v),(u,v)} → 0, unpaired phase
        assert_eq!(edge_product_expectation(&cfg, &profile, &[(u, v), (u, v)]), None);
        // independence across pairs
        assert_eq!(
            edge_product_expectation(&cfg, &profile, &[(u, v), (v, u), (v, w), (w, v)]),
            Some(2)
        );
        // loop has no band support
        assert_eq!(edge_product_expectation(&cfg, &profile, &[(u, u), (u, u)]), None);
    }

    #[test]
    fn square_covariance_vanishes() {
        // ⟨|H_{0y1}|² ; |H_{0y2}|²⟩ = 0: |H|² is deterministic
        let cfg = small_cfg();
        let g = ChainGraph::new(1, 1, 1, 1).unwrap();
        for y1 in 0..cfg.num_sites() {
            for y2 in 0..cfg.num_sites() {
                let c = covariance_bruteforce(&cfg, &g, y1, y2).unwrap();
                assert!(c.abs() <= 1e-15, "y1={y1} y2={y2} c={c}");
            }
        }
    }

    #[test]
    fn out_of_reach_summit_gives_zero() {
        let cfg = LatticeConfig { d: 1, n: 8, w: 2 };
        let g = ChainGraph::new(1, 1, 2, 2).unwrap();
        // y1 at distance 3 > W from the origin: no contributing path
        let y1 = cfg.linear_index(&cfg.canonicalize(&[3]));
        for y2 in 0..cfg.num_sites() {
            assert_eq!(covariance_bruteforce(&cfg, &g, y1, y2).unwrap(), 0.0);
        }
    }

    #[test]
    fn lumping_identity_on_small_instances() {
        let cfg = LatticeConfig { d: 1, n: 5, w: 2 };
        let origin = cfg.linear_index(&cfg.origin());
        for (counts, y1, y2) in [
            ((2, 2, 1, 1), origin, origin),
            ((2, 2, 2, 2), origin, origin),
            ((2, 1, 2, 1), 1, 1),
            ((1, 1, 2, 2), 2, origin),
        ] {
            let g = ChainGraph::new(counts.0, counts.1, counts.2, counts.3).unwrap();
            let brute = covariance_bruteforce(&cfg, &g, y1, y2).unwrap();
            let lumped = covariance_via_lumpings(&cfg, &g, y1, y2).unwrap();
            assert!(
                (brute - lumped).abs() <= 1e-10,
                "{counts:?} y1={y1} y2={y2}: {brute} vs {lumped}"
            );
        }
    }

    #[test]
    fn complement_cancels_and_odd_lumps_vanish() {
        let cfg = LatticeConfig { d: 1, n: 5, w: 2 };
        let g = ChainGraph::new(2, 2, 1, 1).unwrap();
        let origin = cfg.linear_index(&cfg.origin());
        let values = lumping_values(&cfg, &g, origin, origin).unwrap();
        let mut complement = 0.0;
        for (lumping, v) in &values {
            if !lumping.is_even() {
                // unpaired phase: value must vanish identically
                assert!(v.abs() <= 1e-12, "odd lumping with value {v}");
            }
            if !(lumping.is_even() && lumping.is_connected(&g)) {
                complement += v;
            }
        }
        assert!(complement.abs() <= 1e-10, "complement {complement}");
    }

    #[test]
    fn golden_value_2222() {
        // (2,2,2,2), d=1, N=5, W=2, y1=y2=1: frozen value 2/27; at y=0 the
        // phase ensemble makes |H^{(2)}_{00}|² deterministic, so y=1 is the
        // smallest genuinely random instance
        let cfg = LatticeConfig { d: 1, n: 5, w: 2 };
        let g = ChainGraph::new(2, 2, 2, 2).unwrap();
        let v = covariance_bruteforce(&cfg, &g, 1, 1).unwrap();
        assert!((v - 2.0 / 27.0).abs() <= 1e-12, "covariance {v}");
        let lumped = covariance_via_lumpings(&cfg, &g, 1, 1).unwrap();
        assert!((v - lumped).abs() <= 1e-10);
    }

    #[test]
    fn resource_limit_enforced() {
        let cfg = LatticeConfig { d: 1, n: 30, w: 2 };
        let g = ChainGraph::new(4, 4, 4, 4).unwrap();
        assert!(matches!(
            covariance_bruteforce(&cfg, &g, 0, 0),
            Err(QdiffError::ResourceLimit(_))
        ));
    }
}
