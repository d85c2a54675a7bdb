//! Reproducible sampling of the Hermitian band matrix H.
//!
//! `H_xy = sqrt(S_xy) A_xy` with A Hermitian and its upper-triangular entries
//! (in linearized-index order x < y) independent and uniform on the unit
//! circle. Each replica gets its own counter-based stream derived from
//! `(master_seed, replica_index)`, so replicas parallelize without
//! communication and the output is independent of worker count.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::QdiffError;
use crate::lattice::{BandProfile, LatticeConfig, Site};

/// Seed for one replica stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub replica_index: u64,
}

/// splitmix64 finalizer; the standard 64-bit mixing function.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

impl SeedSpec {
    pub fn new(master_seed: u64, replica_index: u64) -> Self {
        SeedSpec { master_seed, replica_index }
    }

    /// Derived 64-bit stream seed. Fixed mixing of the pair: distinct replica
    /// indices give distinct streams.
    pub fn stream_seed(&self) -> u64 {
        splitmix64(self.master_seed ^ splitmix64(self.replica_index))
    }
}

/// One sampled Hermitian H, stored as the dense band: for each site x the M
/// entries `H_{x, x+o}` over the canonical band offsets o.
#[derive(Debug, Clone)]
pub struct BandMatrixSample {
    pub config: LatticeConfig,
    pub seed: SeedSpec,
    /// `entries[x * M + k] = H_{x, neighbor(x, k)}`.
    entries: Vec<Complex64>,
    /// `neighbors[x * M + k]` = linear index of `x + offset_k`.
    neighbors: Vec<u32>,
    band_size: usize,
}

/// Maps one uniform 64-bit draw to an angle in `[0, 2π)` using the top 53 bits.
fn angle_from_u64(u: u64) -> f64 {
    (u >> 11) as f64 * (std::f64::consts::TAU / (1u64 << 53) as f64)
}

/// Samples H for the given config and replica stream.
///
/// For each unordered band pair {x, y} with x < y in linearized order, one
/// angle θ is drawn and `H_xy = sqrt(S_xy) e^{iθ}`, `H_yx` its conjugate.
/// Draw order is fixed (ascending x, then canonical offset order), so the
/// output is identical across runs and platforms for a given
/// [`GENERATOR_VERSION`](crate::GENERATOR_VERSION).
pub fn sample_band_matrix(cfg: &LatticeConfig, seed: SeedSpec) -> BandMatrixSample {
    let profile = BandProfile::new(cfg.clone());
    let m = profile.band_size();
    let nsites = cfg.num_sites();
    let offsets = cfg.band_offsets();
    let modulus = profile.entry_value().sqrt();

    // position of the opposite offset, for locating the conjugate entry
    let mut opposite = vec![usize::MAX; m];
    for (k, o) in offsets.iter().enumerate() {
        let neg = Site(o.0.iter().map(|&c| -c).collect());
        let neg = cfg.canonicalize(&neg.0);
        opposite[k] = offsets.iter().position(|p| *p == neg).expect("band is symmetric");
    }

    let mut neighbors = vec![0u32; nsites * m];
    for x in 0..nsites {
        let site = cfg.site_from_index(x);
        for (k, o) in offsets.iter().enumerate() {
            neighbors[x * m + k] = cfg.linear_index(&cfg.add(&site, o)) as u32;
        }
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed.stream_seed());
    let mut entries = vec![Complex64::new(0.0, 0.0); nsites * m];
    for x in 0..nsites {
        for k in 0..m {
            let y = neighbors[x * m + k] as usize;
            if y > x {
                let theta = angle_from_u64(rng.gen::<u64>());
                let value = Complex64::from_polar(modulus, theta);
                entries[x * m + k] = value;
                // H_yx = conj(H_xy); y sees x through the opposite offset
                let back = opposite[k];
                debug_assert_eq!(neighbors[y * m + back] as usize, x);
                entries[y * m + back] = value.conj();
            }
        }
    }

    BandMatrixSample {
        config: cfg.clone(),
        seed,
        entries,
        neighbors,
        band_size: m,
    }
}

impl BandMatrixSample {
    pub fn band_size(&self) -> usize {
        self.band_size
    }

    /// Iterates the nonzero entries of row x as `(column, value)`.
    pub fn row(&self, x: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let m = self.band_size;
        (0..m).map(move |k| {
            (self.neighbors[x * m + k] as usize, self.entries[x * m + k])
        })
    }

    /// `H_xy` by linear indices (zero outside the band).
    pub fn entry(&self, x: usize, y: usize) -> Complex64 {
        self.row(x)
            .find(|&(col, _)| col == y)
            .map(|(_, v)| v)
            .unwrap_or_else(|| Complex64::new(0.0, 0.0))
    }

    /// Sparse matrix-vector product `Hv`.
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>, QdiffError> {
        let nsites = self.config.num_sites();
        if v.len() != nsites {
            return Err(QdiffError::DimensionMismatch(format!(
                "expected vector of length {nsites}, got {}",
                v.len()
            )));
        }
        let m = self.band_size;
        let mut out = vec![Complex64::new(0.0, 0.0); nsites];
        for x in 0..nsites {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..m {
                acc += self.entries[x * m + k] * v[self.neighbors[x * m + k] as usize];
            }
            out[x] = acc;
        }
        Ok(out)
    }

    /// Densifies H (testing aid; quadratic memory).
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let nsites = self.config.num_sites();
        let mut dense = vec![vec![Complex64::new(0.0, 0.0); nsites]; nsites];
        for x in 0..nsites {
            for (y, v) in self.row(x) {
                dense[x][y] = v;
            }
        }
        dense
    }

    /// JSON dump of the sample (testing aid).
    pub fn dump_json(&self) -> serde_json::Value {
        let mut pairs = Vec::new();
        for x in 0..self.config.num_sites() {
            for (y, v) in self.row(x) {
                if y > x {
                    pairs.push(serde_json::json!([x, y, v.re, v.im]));
                }
            }
        }
        serde_json::json!({
            "pairs": pairs,
            "seed": self.seed,
            "generator_version": crate::GENERATOR_VERSION,
        })
    }
}
