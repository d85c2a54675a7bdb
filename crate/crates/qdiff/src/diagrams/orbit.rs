//! Vertex orbits of a pairing and the 2/3 counting rule.
//!
//! The map `τ(v) = b(partner(out_edge(v)))` is a bijection on vertices: the
//! bridge indicators identify exactly the labels along its cycles, so each
//! orbit carries one free lattice label. `Z*` drops the orbits containing a
//! root, and `L(Σ) = |Z*|` controls the size of a skeleton's contribution.

use crate::diagrams::graph::{ChainGraph, VertexId};
use crate::diagrams::pairing::Pairing;

/// Orbit partition of the vertices under `τ`.
#[derive(Debug, Clone)]
pub struct OrbitPartition {
    /// orbit index of each vertex
    pub orbit_of: Vec<usize>,
    /// vertices of each orbit
    pub orbits: Vec<Vec<VertexId>>,
}

/// `τ(v)`: follow the outgoing edge across its bridge to the partner's head.
pub fn tau(p: &Pairing, v: VertexId) -> VertexId {
    p.graph.edge_head(p.partner[p.graph.out_edge(v)])
}

pub fn orbit_partition(p: &Pairing) -> OrbitPartition {
    let n = p.graph.num_vertices();
    let mut orbit_of = vec![usize::MAX; n];
    let mut orbits = Vec::new();
    for start in 0..n {
        if orbit_of[start] != usize::MAX {
            continue;
        }
        let idx = orbits.len();
        let mut cycle = Vec::new();
        let mut v = start;
        while orbit_of[v] == usize::MAX {
            orbit_of[v] = idx;
            cycle.push(v);
            v = tau(p, v);
        }
        debug_assert_eq!(v, start, "tau must be a bijection");
        orbits.push(cycle);
    }
    OrbitPartition { orbit_of, orbits }
}

impl OrbitPartition {
    /// Orbit indices containing neither root.
    pub fn rootless_orbits(&self, g: &ChainGraph) -> Vec<usize> {
        let r1 = self.orbit_of[g.root(1)];
        let r2 = self.orbit_of[g.root(2)];
        (0..self.orbits.len()).filter(|&i| i != r1 && i != r2).collect()
    }

    /// `L(Σ) = |Z*(Σ)|`, the number of rootless orbits.
    pub fn l_value(&self, g: &ChainGraph) -> usize {
        self.rootless_orbits(g).len()
    }

    /// Whether the two summits fall in the same orbit, or each lies in a
    /// root orbit (either way their labels are forced equal at `y1 = y2`
    /// only in the first case; in the second both are forced to 0).
    pub fn summit_classes(&self, g: &ChainGraph) -> (usize, usize) {
        (self.orbit_of[g.summit(1)], self.orbit_of[g.summit(2)])
    }
}

/// The two vertex classes of a bridge `{e, e'}` with `e < e'`:
/// `ζ1 = [a(e)]` and `ζ2 = [b(e)]` (equal to `[b(e')]` and `[a(e')]`).
pub fn bridge_classes(p: &Pairing, orbits: &OrbitPartition, bridge: usize) -> (usize, usize) {
    let (e, ep) = p.bridges()[bridge];
    let g = &p.graph;
    let z1 = orbits.orbit_of[g.edge_tail(e)];
    let z2 = orbits.orbit_of[g.edge_head(e)];
    debug_assert_eq!(z1, orbits.orbit_of[g.edge_head(ep)]);
    debug_assert_eq!(z2, orbits.orbit_of[g.edge_tail(ep)]);
    (z1, z2)
}

/// Checks `L(Σ) ≤ 2|Σ|/3 + 2/3` for one skeleton pairing.
pub fn two_thirds_rule_holds(p: &Pairing) -> bool {
    let orbits = orbit_partition(p);
    let l = orbits.l_value(&p.graph) as f64;
    let m = p.num_bridges() as f64;
    l <= 2.0 * m / 3.0 + 2.0 / 3.0 + 1e-12
}
