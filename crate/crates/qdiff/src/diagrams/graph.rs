//! The double-chain graph underlying the covariance expansion.
//!
//! A chain graph consists of two disjoint directed cycles. Chain k has
//! `n_{k1} + n_{k2} ≥ 1` edges; the directed path from its root to its summit
//! has length `n_{k1}`, and root and summit coincide iff `n_{k1} = 0` or
//! `n_{k2} = 0`. Roots and summits are white, every other vertex black.
//!
//! Canonical numbering: chain 1 first, vertices in cyclic order from the
//! root; edge j of a chain runs from its j-th vertex to the next.

use crate::lattice::{LatticeConfig, Site};

/// Edge counts `(n11, n12, n21, n22)`.
pub type ChainCounts = (usize, usize, usize, usize);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChainGraph {
    pub counts: ChainCounts,
}

/// Vertex and edge handles are plain indices into the canonical numbering.
pub type VertexId = usize;
pub type EdgeId = usize;

impl ChainGraph {
    pub fn new(n11: usize, n12: usize, n21: usize, n22: usize) -> Result<Self, crate::QdiffError> {
        if n11 + n12 == 0 || n21 + n22 == 0 {
            return Err(crate::QdiffError::Config(
                "each chain must have at least one edge".into(),
            ));
        }
        Ok(ChainGraph { counts: (n11, n12, n21, n22) })
    }

    pub fn chain_len(&self, chain: usize) -> usize {
        match chain {
            1 => self.counts.0 + self.counts.1,
            2 => self.counts.2 + self.counts.3,
            _ => panic!("chain must be 1 or 2"),
        }
    }

    /// Total number of edges (= number of vertices).
    pub fn num_edges(&self) -> usize {
        self.chain_len(1) + self.chain_len(2)
    }

    pub fn num_vertices(&self) -> usize {
        self.num_edges()
    }

    fn chain_of_vertex(&self, v: VertexId) -> (usize, usize) {
        let m1 = self.chain_len(1);
        if v < m1 {
            (1, v)
        } else {
            (2, v - m1)
        }
    }

    /// Chain membership of an edge (edges and vertices share the numbering).
    pub fn chain_of_edge(&self, e: EdgeId) -> usize {
        self.chain_of_vertex(e).0
    }

    /// Predecessor vertex of edge e.
    pub fn edge_tail(&self, e: EdgeId) -> VertexId {
        e
    }

    /// Successor vertex of edge e.
    pub fn edge_head(&self, e: EdgeId) -> VertexId {
        let (chain, pos) = self.chain_of_vertex(e);
        let len = self.chain_len(chain);
        let base = if chain == 1 { 0 } else { self.chain_len(1) };
        base + (pos + 1) % len
    }

    /// The unique outgoing edge of a vertex.
    pub fn out_edge(&self, v: VertexId) -> EdgeId {
        v
    }

    /// The unique incoming edge of a vertex.
    pub fn in_edge(&self, v: VertexId) -> EdgeId {
        let (chain, pos) = self.chain_of_vertex(v);
        let len = self.chain_len(chain);
        let base = if chain == 1 { 0 } else { self.chain_len(1) };
        base + (pos + len - 1) % len
    }

    /// Predecessor vertex of a vertex.
    pub fn vertex_pred(&self, v: VertexId) -> VertexId {
        self.edge_tail(self.in_edge(v))
    }

    /// Successor vertex of a vertex.
    pub fn vertex_succ(&self, v: VertexId) -> VertexId {
        self.edge_head(self.out_edge(v))
    }

    /// Next edge along the cycle.
    pub fn next_edge(&self, e: EdgeId) -> EdgeId {
        self.out_edge(self.edge_head(e))
    }

    /// Previous edge along the cycle.
    pub fn prev_edge(&self, e: EdgeId) -> EdgeId {
        self.in_edge(self.edge_tail(e))
    }

    pub fn root(&self, chain: usize) -> VertexId {
        match chain {
            1 => 0,
            2 => self.chain_len(1),
            _ => panic!("chain must be 1 or 2"),
        }
    }

    pub fn summit(&self, chain: usize) -> VertexId {
        let (n_up, len, base) = match chain {
            1 => (self.counts.0, self.chain_len(1), 0),
            2 => (self.counts.2, self.chain_len(2), self.chain_len(1)),
            _ => panic!("chain must be 1 or 2"),
        };
        base + n_up % len
    }

    pub fn is_white(&self, v: VertexId) -> bool {
        v == self.root(1) || v == self.root(2) || v == self.summit(1) || v == self.summit(2)
    }

    pub fn white_vertices(&self) -> Vec<VertexId> {
        (0..self.num_vertices()).filter(|&v| self.is_white(v)).collect()
    }

    pub fn black_vertices(&self) -> Vec<VertexId> {
        (0..self.num_vertices()).filter(|&v| !self.is_white(v)).collect()
    }

    /// Edge position within its chain, and whether it lies on the root→summit
    /// path (positions `< n_{k1}`).
    pub fn edge_on_upward_path(&self, e: EdgeId) -> bool {
        let (chain, pos) = self.chain_of_vertex(e);
        let n_up = if chain == 1 { self.counts.0 } else { self.counts.2 };
        pos < n_up
    }
}

/// Vertex labels: one site per vertex, by linear site index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Labeling(pub Vec<usize>);

/// `Q_{y1,y2}(x)`: roots labeled 0, summits labeled y1 and y2, and every
/// black vertex i satisfying `x_{a(i)} ≠ x_{b(i)}` (non-backtracking).
pub fn q_indicator(
    g: &ChainGraph,
    labels: &Labeling,
    origin: usize,
    y1: usize,
    y2: usize,
) -> bool {
    if labels.0[g.root(1)] != origin || labels.0[g.root(2)] != origin {
        return false;
    }
    if labels.0[g.summit(1)] != y1 || labels.0[g.summit(2)] != y2 {
        return false;
    }
    for v in 0..g.num_vertices() {
        if !g.is_white(v) && labels.0[g.vertex_pred(v)] == labels.0[g.vertex_succ(v)] {
            return false;
        }
    }
    true
}

/// Directed site pair carried by an edge under a labeling.
pub fn edge_sites(g: &ChainGraph, labels: &Labeling, e: EdgeId) -> (usize, usize) {
    (labels.0[g.edge_tail(e)], labels.0[g.edge_head(e)])
}

/// All sites as canonical coordinate tuples, for distance evaluation.
pub fn site_of(cfg: &LatticeConfig, idx: usize) -> Site {
    cfg.site_from_index(idx)
}
