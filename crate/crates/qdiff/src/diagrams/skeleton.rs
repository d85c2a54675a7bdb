//! Skeletons: parallel-bridge-free pairings with bridge multiplicities.
//!
//! Bridges `{e1, e1'}` and `{e2, e2'}` are parallel when `b(e1) = a(e2)` and
//! `b(e2') = a(e1')`, both shared vertices black. Collapsing every maximal
//! run of parallel bridges into a single bridge with multiplicity `l_σ`
//! gives a bijection between pairings and couples `(Σ, l_Σ)`.

use std::collections::HashSet;

use crate::diagrams::graph::{ChainGraph, EdgeId};
use crate::diagrams::pairing::{enumerate_pairings, has_immediate_backtracking, Pairing};
use crate::error::QdiffError;

/// A pairing with no parallel bridges, plus per-bridge multiplicities.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Skeleton {
    pub pairing: Pairing,
}

impl Skeleton {
    pub fn num_bridges(&self) -> usize {
        self.pairing.num_bridges()
    }
}

/// Whether the bridges of `e1` and `next(e1)` are parallel in Π.
fn glued(p: &Pairing, e1: EdgeId) -> bool {
    let g = &p.graph;
    let e2 = g.next_edge(e1);
    if e2 == e1 || p.partner[e1] == e2 {
        return false;
    }
    let junction = g.edge_head(e1);
    if g.is_white(junction) {
        return false;
    }
    let e1p = p.partner[e1];
    let e2p = p.partner[e2];
    // b(e2') = a(e1') with a black shared vertex
    if g.next_edge(e2p) != e1p || e2p == e1p {
        return false;
    }
    let junction2 = g.edge_head(e2p);
    !g.is_white(junction2)
}

/// True when the pairing has no parallel bridges and no bridge pairing
/// consecutive edges at a black vertex (is its own skeleton).
pub fn is_skeleton(p: &Pairing) -> bool {
    !has_immediate_backtracking(p) && (0..p.partner.len()).all(|e| !glued(p, e))
}

/// Collapses all maximal runs of parallel bridges.
///
/// Returns the skeleton and the multiplicity of each of its bridges, indexed
/// like [`Pairing::bridges`].
pub fn collapse_parallel_bridges(p: &Pairing) -> (Skeleton, Vec<u32>) {
    let g = &p.graph;
    let num = p.partner.len();
    // edge runs: maximal chains e, next(e), ... with the glue condition
    let glue: Vec<bool> = (0..num).map(|e| glued(p, e)).collect();
    // an edge survives unless it is glued to its predecessor on the kept side
    // or is a non-final edge of the discarded side of its run; resolve by
    // walking runs from their start edges
    let mut run_start: Vec<bool> = (0..num).map(|e| !glue[g.prev_edge(e)]).collect();
    // self-loop chains of length 1 have next_edge(e) == e; they are never glued
    for e in 0..num {
        if g.next_edge(e) == e {
            run_start[e] = true;
        }
    }
    let mut deleted = vec![false; num];
    let mut multiplicity_of_edge = vec![1u32; num];
    let mut visited = vec![false; num];
    for start in 0..num {
        if !run_start[start] || visited[start] {
            continue;
        }
        // walk the run
        let mut run = vec![start];
        let mut cur = start;
        while glue[cur] {
            cur = g.next_edge(cur);
            run.push(cur);
        }
        for &e in &run {
            visited[e] = true;
        }
        if run.len() == 1 {
            continue;
        }
        let partner_run: Vec<EdgeId> = run.iter().map(|&e| p.partner[e]).collect();
        // the partner side of this run is the same bridge set seen from its
        // other edge sequence; process each physical run once, keyed by its
        // smaller start edge
        let partner_start = *partner_run.last().unwrap();
        if partner_start < start {
            continue;
        }
        debug_assert!(run_start[partner_start]);
        let l = run.len() as u32;
        // keep the first edge of this run and its partner (the last edge of
        // the partner-side run); delete the rest
        for &e in &run[1..] {
            deleted[e] = true;
        }
        for &e in &partner_run[1..] {
            // partner_run[1..] are partners of run[1..]: all but the kept one
            deleted[e] = true;
        }
        multiplicity_of_edge[start] = l;
        multiplicity_of_edge[p.partner[start]] = l;
    }

    // rebuild the collapsed chain graph
    let survivors: Vec<EdgeId> = (0..num).filter(|&e| !deleted[e]).collect();
    let seg_count = |chain: usize, upward: bool| {
        survivors
            .iter()
            .filter(|&&e| g.chain_of_edge(e) == chain && g.edge_on_upward_path(e) == upward)
            .count()
    };
    let counts = (
        seg_count(1, true),
        seg_count(1, false),
        seg_count(2, true),
        seg_count(2, false),
    );
    let new_graph = ChainGraph { counts };
    let mut new_index = vec![usize::MAX; num];
    for (i, &e) in survivors.iter().enumerate() {
        new_index[e] = i;
    }
    let mut partner = vec![usize::MAX; survivors.len()];
    let mut mult = vec![0u32; survivors.len() / 2];
    for &e in &survivors {
        let pe = p.partner[e];
        debug_assert!(!deleted[pe], "partner of a surviving edge must survive");
        partner[new_index[e]] = new_index[pe];
    }
    let pairing = Pairing { graph: new_graph, partner };
    for (b, &(e, _)) in pairing.bridges().iter().enumerate() {
        mult[b] = multiplicity_of_edge[survivors[e]];
    }
    (Skeleton { pairing }, mult)
}

/// Expands each bridge `σ` of the skeleton into `l_σ` parallel bridges.
pub fn expand_skeleton(sk: &Skeleton, mult: &[u32]) -> Pairing {
    let g = &sk.pairing.graph;
    let bridges = sk.pairing.bridges();
    assert_eq!(bridges.len(), mult.len());
    assert!(mult.iter().all(|&l| l >= 1));
    let num = sk.pairing.partner.len();
    let mut l_of_edge = vec![0u32; num];
    for (b, &(e, ep)) in bridges.iter().enumerate() {
        l_of_edge[e] = mult[b];
        l_of_edge[ep] = mult[b];
    }
    // expanded edge layout: each old edge e becomes l_of_edge[e] consecutive
    // copies at its position, preserving chain order
    let mut first_copy = vec![0usize; num];
    let mut total = 0usize;
    for e in 0..num {
        first_copy[e] = total;
        total += l_of_edge[e] as usize;
    }
    let seg_sum = |chain: usize, upward: bool| {
        (0..num)
            .filter(|&e| g.chain_of_edge(e) == chain && g.edge_on_upward_path(e) == upward)
            .map(|e| l_of_edge[e] as usize)
            .sum::<usize>()
    };
    let counts = (
        seg_sum(1, true),
        seg_sum(1, false),
        seg_sum(2, true),
        seg_sum(2, false),
    );
    let new_graph = ChainGraph { counts };
    let mut partner = vec![usize::MAX; total];
    for &(e, ep) in &bridges {
        let l = l_of_edge[e] as usize;
        for i in 0..l {
            // copy i of e pairs with copy l-1-i of e', anti-ordered so every
            // consecutive pair of new bridges is parallel
            let a = first_copy[e] + i;
            let b = first_copy[ep] + (l - 1 - i);
            partner[a] = b;
            partner[b] = a;
        }
    }
    Pairing { graph: new_graph, partner }
}

/// All skeletons with exactly `m` bridges, up to the canonical labeling.
///
/// Bottom-up per the definition `𝔊 = {S(Π)}`: enumerate connected pairings
/// on every chain graph with 2m edges, collapse, and keep (deduplicated)
/// results that still have m bridges.
pub fn enumerate_skeletons(m: usize) -> Result<Vec<Skeleton>, QdiffError> {
    if m == 0 || m > 5 {
        return Err(QdiffError::ResourceLimit(format!(
            "skeleton enumeration supports 1 <= m <= 5, got {m}"
        )));
    }
    let total_edges = 2 * m;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for len1 in 1..total_edges {
        let len2 = total_edges - len1;
        if len2 == 0 {
            continue;
        }
        for n11 in 0..=len1 {
            for n21 in 0..=len2 {
                let g = ChainGraph { counts: (n11, len1 - n11, n21, len2 - n21) };
                for pairing in enumerate_pairings(&g)? {
                    if has_immediate_backtracking(&pairing) {
                        continue;
                    }
                    let (sk, mult) = collapse_parallel_bridges(&pairing);
                    if mult.iter().all(|&l| l == 1) && sk.num_bridges() == m {
                        debug_assert!(is_skeleton(&sk.pairing));
                        if seen.insert(sk.pairing.clone()) {
                            out.push(sk);
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairing_without_parallels_is_fixed_by_collapse() {
        let g = ChainGraph::new(1, 1, 1, 1).unwrap();
        for pairing in enumerate_pairings(&g).unwrap() {
            let (sk, mult) = collapse_parallel_bridges(&pairing);
            assert_eq!(sk.pairing, pairing);
            assert!(mult.iter().all(|&l| l == 1));
        }
    }

    #[test]
    fn ladder_collapses_to_single_bridge() {
        // chains of length 3 each, fully cross-paired anti-parallel: a run of
        // 3 parallel bridges
        let g = ChainGraph::new(3, 0, 3, 0).unwrap();
        // chain 1 edges 0,1,2; chain 2 edges 3,4,5; pair i with 5-i
        let partner = vec![5, 4, 3, 2, 1, 0];
        let p = Pairing { graph: g, partner };
        let (sk, mult) = collapse_parallel_bridges(&p);
        assert_eq!(sk.num_bridges(), 1);
        assert_eq!(mult, vec![3]);
        let back = expand_skeleton(&sk, &mult);
        assert_eq!(back, p);
    }

    #[test]
    fn expand_identity_for_unit_multiplicities() {
        let g = ChainGraph::new(2, 2, 1, 1).unwrap();
        for pairing in enumerate_pairings(&g).unwrap() {
            let (sk, mult) = collapse_parallel_bridges(&pairing);
            let ones: Vec<u32> = vec![1; sk.num_bridges()];
            if mult == ones {
                assert_eq!(expand_skeleton(&sk, &ones), pairing);
            }
        }
    }

    #[test]
    fn roundtrip_collapse_expand_exhaustive() {
        // expand(collapse(Π)) = Π for every connected pairing with |E| ≤ 8
        for total in [2usize, 4, 6, 8] {
            for len1 in 1..total {
                let len2 = total - len1;
                for n11 in 0..=len1 {
                    for n21 in 0..=len2 {
                        let g = ChainGraph { counts: (n11, len1 - n11, n21, len2 - n21) };
                        for pairing in enumerate_pairings(&g).unwrap() {
                            if has_immediate_backtracking(&pairing) {
                                continue;
                            }
                            let (sk, mult) = collapse_parallel_bridges(&pairing);
                            assert!(is_skeleton(&sk.pairing));
                            let back = expand_skeleton(&sk, &mult);
                            assert_eq!(back, pairing, "graph {:?}", g.counts);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn roundtrip_expand_collapse_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let mut tried = 0;
        'outer: for m in 1..=3usize {
            for sk in enumerate_skeletons(m).unwrap() {
                for _ in 0..10 {
                    let mult: Vec<u32> =
                        (0..sk.num_bridges()).map(|_| rng.gen_range(1..=3)).collect();
                    let expanded = expand_skeleton(&sk, &mult);
                    let (sk2, mult2) = collapse_parallel_bridges(&expanded);
                    assert_eq!(sk2.pairing, sk.pairing);
                    assert_eq!(mult2, mult);
                    tried += 1;
                    if tried >= 200 {
                        break 'outer;
                    }
                }
            }
        }
        assert!(tried >= 100);
    }

    #[test]
    fn expansion_doubles_edge_total_with_multiplicity_sum() {
        let sk = &enumerate_skeletons(2).unwrap()[0];
        let mult = vec![2u32, 3];
        let p = expand_skeleton(sk, &mult);
        let l_total: u32 = mult.iter().sum();
        assert_eq!(p.partner.len(), 2 * l_total as usize);
        // p1 + p2 = |l_Σ| where p_k is half the k-th chain length
        let (n11, n12, n21, n22) = p.graph.counts;
        assert_eq!(n11 + n12 + n21 + n22, 2 * l_total as usize);
    }

    #[test]
    fn skeleton_counts_within_bound() {
        // the 2^m m! bound counts skeletons on a fixed pair of chains: any
        // matching count on 2m edges is (2m-1)!! ≤ 2^m m!
        for m in 1..=4usize {
            let skeletons = enumerate_skeletons(m).unwrap();
            let mut per_graph: std::collections::HashMap<_, usize> =
                std::collections::HashMap::new();
            for sk in &skeletons {
                *per_graph.entry(sk.pairing.graph.counts).or_insert(0) += 1;
            }
            let bound = 2usize.pow(m as u32) * (1..=m).product::<usize>();
            for (counts, n) in per_graph {
                assert!(n <= bound, "m={m} {counts:?}: {n} skeletons > bound {bound}");
            }
            assert!(!skeletons.is_empty());
        }
    }

    #[test]
    fn adjacency_only_at_white_vertices() {
        // paired edges adjacent only if they share a white vertex
        for m in 1..=4usize {
            for sk in enumerate_skeletons(m).unwrap() {
                let g = &sk.pairing.graph;
                for (e, ep) in sk.pairing.bridges() {
                    let verts = [g.edge_tail(e), g.edge_head(e)];
                    for v in [g.edge_tail(ep), g.edge_head(ep)] {
                        if verts.contains(&v) {
                            assert!(g.is_white(v), "m={m} shared black vertex {v}");
                        }
                    }
                }
            }
        }
    }
}
