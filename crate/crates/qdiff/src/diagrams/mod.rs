//! Diagrammatic machinery for the covariance of the propagation profile:
//! chain graphs, lumpings, pairings, skeletons, orbits, lattice values, and
//! the inequality checks built on them.

pub mod bounds;
pub mod graph;
pub mod lumping;
pub mod orbit;
pub mod pairing;
pub mod rvalue;
pub mod skeleton;

pub use bounds::{
    coeff_sum_cutoff, mc_chain_covariance, pairing_bound_check, pairing_sum,
    skeleton_symmetry_classes,
};
pub use graph::{ChainGraph, Labeling};
pub use lumping::{covariance_bruteforce, covariance_via_lumpings, Lumping};
pub use orbit::{orbit_partition, OrbitPartition};
pub use pairing::{enumerate_pairings, Pairing};
pub use rvalue::r_value;
pub use skeleton::{collapse_parallel_bridges, enumerate_skeletons, expand_skeleton, Skeleton};
