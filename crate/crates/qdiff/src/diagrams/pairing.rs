//! Connected pairings of chain-graph edges.
//!
//! A pairing is a lumping with every lump of size 2 (a bridge); it is
//! connected when some bridge meets both chains. The bridge indicator
//! `J_{{e,e'}}(x) = 1(x_{a(e)} = x_{b(e')}) 1(x_{a(e')} = x_{b(e)})`
//! identifies the two edges with opposite orientation.

use crate::diagrams::graph::{ChainGraph, EdgeId, Labeling};
use crate::error::QdiffError;

/// A perfect matching on the edges: `partner[e]` is the edge paired with e.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pairing {
    pub graph: ChainGraph,
    pub partner: Vec<EdgeId>,
}

impl Pairing {
    pub fn num_bridges(&self) -> usize {
        self.partner.len() / 2
    }

    /// Bridges as ordered pairs `(e, e')` with `e < e'`.
    pub fn bridges(&self) -> Vec<(EdgeId, EdgeId)> {
        self.partner
            .iter()
            .enumerate()
            .filter(|&(e, &p)| e < p)
            .map(|(e, &p)| (e, p))
            .collect()
    }

    /// Some bridge meets both chains.
    pub fn is_connected(&self) -> bool {
        self.bridges()
            .iter()
            .any(|&(e, p)| self.graph.chain_of_edge(e) != self.graph.chain_of_edge(p))
    }
}

/// True when some bridge pairs consecutive edges meeting at a black vertex.
///
/// The anti-parallel identification of such a bridge forces the walk to
/// backtrack across the shared vertex, which the non-backtracking powers
/// forbid; these pairings contribute nothing and no skeleton contains one.
pub fn has_immediate_backtracking(p: &Pairing) -> bool {
    let g = &p.graph;
    p.bridges().iter().any(|&(e, ep)| {
        (g.next_edge(e) == ep && g.next_edge(e) != e && !g.is_white(g.edge_head(e)))
            || (g.next_edge(ep) == e && g.next_edge(ep) != ep && !g.is_white(g.edge_head(ep)))
    })
}

/// `J` for one bridge under a labeling: anti-parallel identification of the
/// two edge label pairs.
pub fn j_indicator(g: &ChainGraph, bridge: (EdgeId, EdgeId), labels: &Labeling) -> bool {
    let (e, ep) = bridge;
    labels.0[g.edge_tail(e)] == labels.0[g.edge_head(ep)]
        && labels.0[g.edge_tail(ep)] == labels.0[g.edge_head(e)]
}

/// All perfect matchings on the edge set, connected ones only.
///
/// Returns the empty list for odd edge counts (no even pairing exists).
pub fn enumerate_pairings(g: &ChainGraph) -> Result<Vec<Pairing>, QdiffError> {
    let num = g.num_edges();
    if num > 12 {
        return Err(QdiffError::ResourceLimit(format!(
            "pairing enumeration supports |E| <= 12, got {num}"
        )));
    }
    if num % 2 != 0 {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut partner = vec![usize::MAX; num];
    fn recurse(g: &ChainGraph, partner: &mut Vec<usize>, out: &mut Vec<Pairing>) {
        let first = match partner.iter().position(|&p| p == usize::MAX) {
            Some(e) => e,
            None => {
                let pairing = Pairing { graph: g.clone(), partner: partner.clone() };
                if pairing.is_connected() {
                    out.push(pairing);
                }
                return;
            }
        };
        for mate in first + 1..partner.len() {
            if partner[mate] == usize::MAX {
                partner[first] = mate;
                partner[mate] = first;
                recurse(g, partner, out);
                partner[first] = usize::MAX;
                partner[mate] = usize::MAX;
            }
        }
    }
    recurse(g, &mut partner, &mut out);
    Ok(out)
}

/// All perfect matchings regardless of connectedness (cross-check helper).
pub fn enumerate_all_matchings(num_edges: usize) -> Vec<Vec<EdgeId>> {
    if num_edges % 2 != 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut partner = vec![usize::MAX; num_edges];
    fn recurse(partner: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let first = match partner.iter().position(|&p| p == usize::MAX) {
            Some(e) => e,
            None => {
                out.push(partner.clone());
                return;
            }
        };
        for mate in first + 1..partner.len() {
            if partner[mate] == usize::MAX {
                partner[first] = mate;
                partner[mate] = first;
                recurse(partner, out);
                partner[first] = usize::MAX;
                partner[mate] = usize::MAX;
            }
        }
    }
    recurse(&mut partner, &mut out);
    out
}

fn double_factorial(n: usize) -> usize {
    if n <= 1 {
        1
    } else {
        n * double_factorial(n - 2)
    }
}

/// `(|E| - 1)!!`, the total matching count for even |E|.
pub fn matching_count(num_edges: usize) -> usize {
    if num_edges == 0 {
        1
    } else {
        double_factorial(num_edges - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_squares_have_two_connected_pairings() {
        let g = ChainGraph::new(1, 1, 1, 1).unwrap();
        assert_eq!(enumerate_all_matchings(4).len(), 3);
        let connected = enumerate_pairings(&g).unwrap();
        assert_eq!(connected.len(), 2);
    }

    #[test]
    fn odd_edge_count_yields_no_pairings() {
        let g = ChainGraph::new(2, 1, 1, 1).unwrap();
        assert!(enumerate_pairings(&g).unwrap().is_empty());
    }

    #[test]
    fn connected_count_matches_inclusion_exclusion() {
        // |E| = 6 split (4, 2): connected = total - (per-chain matchings product)
        let g = ChainGraph::new(2, 2, 1, 1).unwrap();
        let connected = enumerate_pairings(&g).unwrap();
        let total = matching_count(6);
        assert_eq!(enumerate_all_matchings(6).len(), total);
        let within = matching_count(4) * matching_count(2);
        assert_eq!(connected.len(), total - within);
    }

    #[test]
    fn j_indicator_cases() {
        let g = ChainGraph::new(1, 1, 1, 1).unwrap();
        // edges 0: 0→1, 1: 1→0 on chain 1
        let labels = Labeling(vec![0, 4, 0, 0]);
        assert!(j_indicator(&g, (0, 1), &labels));
        assert!(j_indicator(&g, (1, 0), &labels));
        // parallel-oriented labels fail
        let g2 = ChainGraph::new(2, 2, 1, 1).unwrap();
        // edges 0:0→1, 2:2→3; labels make a(0)=a(2)=7 but heads differ
        let labels2 = Labeling(vec![7, 1, 7, 2, 0, 0]);
        assert!(!j_indicator(&g2, (0, 2), &labels2));
    }

    #[test]
    fn resource_limit() {
        let g = ChainGraph::new(4, 4, 3, 3).unwrap();
        assert!(enumerate_pairings(&g).is_err());
    }
}
