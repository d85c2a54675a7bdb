//! Periodic lattice, band count M(W), and the step-profile matrix S.
//!
//! The lattice is the cube `([-N/2, N/2) ∩ ℤ)^d` with periodic addition and
//! periodic Euclidean distance. Sites are stored as canonical signed
//! coordinates and linearized row-major for vector indexing.

use serde::{Deserialize, Serialize};

use crate::error::QdiffError;

/// Lattice parameters: dimension `d`, linear size `n`, band width `w`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub d: usize,
    pub n: i64,
    pub w: i64,
}

/// A lattice site in canonical coordinates, each in `[-N/2, N/2)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Site(pub Vec<i64>);

impl LatticeConfig {
    /// Validates `d ≥ 1`, `W ≥ 2` and `N ≥ 2W + 2`.
    ///
    /// The size bound guarantees the periodic band neighborhood of a site has
    /// no wrap-around double counting, so the per-row nonzero count of S
    /// equals the infinite-lattice count M(W).
    pub fn new(d: usize, n: i64, w: i64) -> Result<Self, QdiffError> {
        if d < 1 {
            return Err(QdiffError::Config("dimension d must be >= 1".into()));
        }
        if w < 2 {
            return Err(QdiffError::Config(format!("band width W must be >= 2, got {w}")));
        }
        if n < 2 * w + 2 {
            return Err(QdiffError::Config(format!(
                "linear size N must be >= 2W+2 = {}, got {n}",
                2 * w + 2
            )));
        }
        Ok(LatticeConfig { d, n, w })
    }

    /// Number of sites `N^d`.
    pub fn num_sites(&self) -> usize {
        (self.n as usize).pow(self.d as u32)
    }

    /// M(W): number of infinite-lattice points at Euclidean distance in `[1, W]`.
    pub fn band_size(&self) -> usize {
        band_count(self.d, self.w).expect("validated config")
    }

    /// Canonical representative of a single coordinate.
    pub fn canonical_coord(&self, c: i64) -> i64 {
        let r = c.rem_euclid(self.n);
        // the window [-N/2, N/2) contains r - N for r >= ceil(N/2)
        if 2 * r >= self.n {
            r - self.n
        } else {
            r
        }
    }

    /// Canonicalizes all coordinates of a site.
    pub fn canonicalize(&self, coords: &[i64]) -> Site {
        Site(coords.iter().map(|&c| self.canonical_coord(c)).collect())
    }

    /// Periodic componentwise addition, back into the canonical window.
    pub fn add(&self, x: &Site, y: &Site) -> Site {
        Site(
            x.0.iter()
                .zip(&y.0)
                .map(|(&a, &b)| self.canonical_coord(a + b))
                .collect(),
        )
    }

    /// Row-major linear index of a canonical site.
    ///
    /// Coordinate c maps to the digit `c mod N` in `[0, N)`; the first
    /// coordinate is the most significant digit. This order is fixed so that
    /// outputs are bit-reproducible.
    pub fn linear_index(&self, site: &Site) -> usize {
        let mut idx = 0usize;
        for &c in &site.0 {
            debug_assert!(self.canonical_coord(c) == c, "site not canonical");
            idx = idx * self.n as usize + c.rem_euclid(self.n) as usize;
        }
        idx
    }

    /// Inverse of [`linear_index`](Self::linear_index).
    pub fn site_from_index(&self, mut idx: usize) -> Site {
        let n = self.n as usize;
        let mut coords = vec![0i64; self.d];
        for slot in coords.iter_mut().rev() {
            *slot = self.canonical_coord((idx % n) as i64);
            idx /= n;
        }
        Site(coords)
    }

    /// The site at the origin.
    pub fn origin(&self) -> Site {
        Site(vec![0; self.d])
    }

    /// Periodic Euclidean distance between two canonical sites.
    ///
    /// Infimum over `ν ∈ ℤ^d` of `|x - y + Nν|`; for canonical representatives
    /// the minimizer has every component of `ν` in `{-1, 0, 1}`, so each
    /// coordinate can be minimized independently.
    pub fn periodic_distance(&self, x: &Site, y: &Site) -> f64 {
        let mut sq = 0f64;
        for (&a, &b) in x.0.iter().zip(&y.0) {
            let diff = a - b;
            let m = [-1i64, 0, 1]
                .iter()
                .map(|&nu| (diff + nu * self.n).abs())
                .min()
                .unwrap();
            sq += (m * m) as f64;
        }
        sq.sqrt()
    }

    /// The canonical offsets of the band annulus `1 ≤ |o| ≤ W`, in row-major
    /// order of the cube `[-W, W]^d`. Length equals M(W).
    pub fn band_offsets(&self) -> Vec<Site> {
        let mut out = Vec::new();
        let w = self.w;
        let mut offset = vec![-w; self.d];
        loop {
            let norm_sq: i64 = offset.iter().map(|&c| c * c).sum();
            if norm_sq >= 1 && norm_sq <= w * w {
                out.push(Site(offset.clone()));
            }
            // advance the cube counter
            let mut k = self.d;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                offset[k] += 1;
                if offset[k] <= w {
                    break;
                }
                offset[k] = -w;
            }
        }
    }
}

/// M(W) on the infinite lattice, by enumerating the cube `[-W, W]^d`.
pub fn band_count(d: usize, w: i64) -> Result<usize, QdiffError> {
    if w < 2 {
        return Err(QdiffError::Config(format!("band width W must be >= 2, got {w}")));
    }
    let mut count = 0usize;
    let mut offset = vec![-w; d];
    loop {
        let norm_sq: i64 = offset.iter().map(|&c| c * c).sum();
        if norm_sq >= 1 && norm_sq <= w * w {
            count += 1;
        }
        let mut k = d;
        loop {
            if k == 0 {
                return Ok(count);
            }
            k -= 1;
            offset[k] += 1;
            if offset[k] <= w {
                break;
            }
            offset[k] = -w;
        }
    }
}

/// The profile matrix `S_xy = 1(1 ≤ |x-y| ≤ W) / (M-1)`, held implicitly.
#[derive(Debug, Clone)]
pub struct BandProfile {
    pub config: LatticeConfig,
    m: usize,
}

/// Report of the `S^l` identities: row sums `(M/(M-1))^l` and the sup-entry
/// bound `(M/(M-1))^{l-1} / (M-1)`.
#[derive(Debug, Clone, Serialize)]
pub struct SPowerReport {
    pub l: u32,
    pub row_sum_max_error: f64,
    pub sup_entry: f64,
    pub sup_bound: f64,
}

impl BandProfile {
    pub fn new(config: LatticeConfig) -> Self {
        let m = config.band_size();
        BandProfile { config, m }
    }

    pub fn band_size(&self) -> usize {
        self.m
    }

    /// Common entry value `1/(M-1)`.
    pub fn entry_value(&self) -> f64 {
        1.0 / (self.m as f64 - 1.0)
    }

    /// `S_xy`.
    pub fn entry(&self, x: &Site, y: &Site) -> f64 {
        let dist = self.config.periodic_distance(x, y);
        if dist >= 1.0 && dist <= self.config.w as f64 {
            self.entry_value()
        } else {
            0.0
        }
    }

    /// The column `(S^l)_{·,0}` as a dense vector over linear indices.
    ///
    /// S is a convolution on the torus, so this column determines every entry
    /// through `(S^l)_{xy} = kernel[y - x]`.
    pub fn power_kernel(&self, l: u32) -> Vec<f64> {
        let cfg = &self.config;
        let nsites = cfg.num_sites();
        let offsets = cfg.band_offsets();
        let val = self.entry_value();
        let mut v = vec![0.0f64; nsites];
        v[cfg.linear_index(&cfg.origin())] = 1.0;
        for _ in 0..l {
            let mut next = vec![0.0f64; nsites];
            for idx in 0..nsites {
                if v[idx] == 0.0 {
                    continue;
                }
                let site = cfg.site_from_index(idx);
                for o in &offsets {
                    let tgt = cfg.add(&site, o);
                    next[cfg.linear_index(&tgt)] += val * v[idx];
                }
            }
            v = next;
        }
        v
    }

    /// Verifies the `S^l` row-sum and sup-entry identities.
    pub fn s_power_checks(&self, l: u32) -> Result<SPowerReport, QdiffError> {
        let nsites = self.config.num_sites();
        if l == 0 || l > 8 || nsites > 100_000 {
            return Err(QdiffError::ResourceLimit(format!(
                "s_power_checks supports 1 <= l <= 8 and N^d <= 1e5 (got l={l}, N^d={nsites})"
            )));
        }
        let m = self.m as f64;
        let expected_row_sum = (m / (m - 1.0)).powi(l as i32);
        // row sums of S^l via l sparse applications to the all-ones vector
        let offsets = self.config.band_offsets();
        let val = self.entry_value();
        let mut ones = vec![1.0f64; nsites];
        for _ in 0..l {
            let mut next = vec![0.0f64; nsites];
            for idx in 0..nsites {
                let site = self.config.site_from_index(idx);
                let mut acc = 0.0;
                for o in &offsets {
                    let src = self.config.add(&site, o);
                    acc += val * ones[self.config.linear_index(&src)];
                }
                next[idx] = acc;
            }
            ones = next;
        }
        let row_sum_max_error = ones
            .iter()
            .map(|&s| (s - expected_row_sum).abs())
            .fold(0.0, f64::max);
        let kernel = self.power_kernel(l);
        let sup_entry = kernel.iter().cloned().fold(0.0, f64::max);
        let sup_bound = (m / (m - 1.0)).powi(l as i32 - 1) / (m - 1.0);
        Ok(SPowerReport {
            l,
            row_sum_max_error,
            sup_entry,
            sup_bound,
        })
    }
}
