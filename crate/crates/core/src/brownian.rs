//! Seed-addressed Brownian paths on dyadic time grids.
//!
//! Every path is a pure function of `(seed, sample_index, level)`; streams
//! come from ChaCha8 keyed by `(seed, level)` with `sample_index` as the
//! stream id, so paths do not depend on generation order or thread count.
//! Refinement inserts Brownian-bridge midpoints and keeps the coarse
//! positions bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{config, Result};

/// Largest supported number of steps.
pub const MAX_STEPS: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return config(format!("time horizon must be positive, got {horizon}"));
        }
        if steps < 2 || !steps.is_power_of_two() || steps > MAX_STEPS {
            return config(format!("step count must be a power of two in [2, 2^24], got {steps}"));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        self.horizon * i as f64 / self.steps as f64
    }

    /// Grid index of time `t`, which must lie on the grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = t / self.horizon * self.steps as f64;
        let i = x.round();
        if (x - i).abs() > 1e-9 || i < 0.0 || i as usize > self.steps {
            return config(format!("time {t} is not a node of the grid"));
        }
        Ok(i as usize)
    }

    pub fn refined(&self) -> Result<Self> {
        Self::new(self.horizon, self.steps * 2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    dim: usize,
    grid: TimeGrid,
    /// `steps × dim`, row `i` is `B_{t_{i+1}} - B_{t_i}`
    increments: Vec<f64>,
    /// `(steps + 1) × dim`, row `i` is `B_{t_i}`
    positions: Vec<f64>,
    seed: u64,
    sample_index: u64,
    level: u32,
    zero: bool,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn stream(seed: u64, sample_index: u64, level: u32) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut z = seed;
    for (i, chunk) in key.chunks_mut(8).enumerate() {
        z = splitmix(z ^ ((level as u64) << 32) ^ i as u64);
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(sample_index);
    rng
}

/// Path for `(seed, sample_index)` on `grid`, with `N(0, dt)` increments.
pub fn sample_path(seed: u64, sample_index: u64, dim: usize, grid: TimeGrid) -> BrownianPath {
    let n = grid.steps();
    let sd = grid.dt().sqrt();
    let mut rng = stream(seed, sample_index, 0);
    let increments: Vec<f64> = (0..n * dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect();
    let mut positions = vec![0.0; (n + 1) * dim];
    for i in 0..n {
        for k in 0..dim {
            positions[(i + 1) * dim + k] = positions[i * dim + k] + increments[i * dim + k];
        }
    }
    BrownianPath { dim, grid, increments, positions, seed, sample_index, level: 0, zero: false }
}

impl BrownianPath {
    /// The identically zero path, for deterministic (zero-noise) runs.
    pub fn zero(dim: usize, grid: TimeGrid) -> Self {
        let n = grid.steps();
        Self {
            dim,
            grid,
            increments: vec![0.0; n * dim],
            positions: vec![0.0; (n + 1) * dim],
            seed: 0,
            sample_index: 0,
            level: 0,
            zero: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sample_index(&self) -> u64 {
        self.sample_index
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    /// Row `i` of the increment array, `0 ≤ i < n`.
    pub fn increment(&self, i: usize) -> Result<&[f64]> {
        if i >= self.grid.steps() {
            return config(format!("increment index {i} out of range 0..{}", self.grid.steps()));
        }
        Ok(self.increment_unchecked(i))
    }

    #[inline]
    pub(crate) fn increment_unchecked(&self, i: usize) -> &[f64] {
        &self.increments[i * self.dim..(i + 1) * self.dim]
    }

    /// `B_{t_i}`, `0 ≤ i ≤ n`.
    pub fn position(&self, i: usize) -> Result<&[f64]> {
        if i > self.grid.steps() {
            return config(format!("position index {i} out of range 0..={}", self.grid.steps()));
        }
        Ok(&self.positions[i * self.dim..(i + 1) * self.dim])
    }

    /// Increments in reversed time order: row `i` is `increments[n-1-i]`.
    pub fn reversed_increments(&self) -> Vec<f64> {
        let n = self.grid.steps();
        (0..n).rev().flat_map(|i| self.increment_unchecked(i).to_vec()).collect()
    }

    /// Bridge refinement onto the doubled grid.
    pub fn refine(&self) -> Result<BrownianPath> {
        let n = self.grid.steps();
        if 2 * n > MAX_STEPS {
            return config(format!("refining {n} steps would exceed 2^24"));
        }
        let grid = self.grid.refined()?;
        let d = self.dim;
        let level = self.level + 1;
        let mut positions = vec![0.0; (2 * n + 1) * d];
        if !self.zero {
            let sd = (self.grid.dt() / 4.0).sqrt();
            let mut rng = stream(self.seed, self.sample_index, level);
            for i in 0..n {
                for k in 0..d {
                    let a = self.positions[i * d + k];
                    let b = self.positions[(i + 1) * d + k];
                    let z: f64 = StandardNormal.sample(&mut rng);
                    positions[2 * i * d + k] = a;
                    positions[(2 * i + 1) * d + k] = 0.5 * (a + b) + sd * z;
                }
            }
            positions[2 * n * d..].copy_from_slice(&self.positions[n * d..]);
        }
        let increments = (0..2 * n * d).map(|j| positions[j + d] - positions[j]).collect();
        Ok(BrownianPath { grid, increments, positions, level, ..self.clone() })
    }

    pub fn refine_times(&self, times: u32) -> Result<BrownianPath> {
        let mut p = self.clone();
        for _ in 0..times {
            p = p.refine()?;
        }
        Ok(p)
    }

    /// Every second position, on the halved grid.
    pub fn downsample(&self) -> Result<BrownianPath> {
        let n = self.grid.steps();
        let grid = TimeGrid::new(self.grid.horizon(), n / 2)?;
        let d = self.dim;
        let positions: Vec<f64> = (0..=n / 2).flat_map(|i| self.positions[2 * i * d..(2 * i + 1) * d].to_vec()).collect();
        let increments = (0..(n / 2) * d).map(|j| positions[j + d] - positions[j]).collect();
        Ok(BrownianPath { grid, increments, positions, level: self.level.saturating_sub(1), ..self.clone() })
    }

    /// FNV-1a over the bit patterns of increments `from..to`.
    pub fn checksum(&self, from: usize, to: usize) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for v in &self.increments[from * self.dim..to * self.dim] {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }
}

/// Addresses a family of coupled paths: sample `i` is
/// `sample_path(seed, i, ..)` refined `level` times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSource {
    pub seed: u64,
    pub dim: usize,
    pub base_grid: TimeGrid,
    pub level: u32,
    pub zero_noise: bool,
}

impl PathSource {
    pub fn new(seed: u64, dim: usize, base_grid: TimeGrid) -> Self {
        Self { seed, dim, base_grid, level: 0, zero_noise: false }
    }

    pub fn zero_noise(dim: usize, grid: TimeGrid) -> Self {
        Self { seed: 0, dim, base_grid: grid, level: 0, zero_noise: true }
    }

    pub fn at_level(self, level: u32) -> Self {
        Self { level, ..self }
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.base_grid.horizon(), self.base_grid.steps() << self.level)
            .expect("refined grid within limits")
    }

    pub fn path(&self, sample_index: u64) -> BrownianPath {
        if self.zero_noise {
            return BrownianPath::zero(self.dim, self.grid());
        }
        sample_path(self.seed, sample_index, self.dim, self.base_grid)
            .refine_times(self.level)
            .expect("refined grid within limits")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(1.0, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(1.0, 1000).is_err());
        assert!(TimeGrid::new(1.0, 1).is_err());
        assert!(TimeGrid::new(0.0, 8).is_err());
        assert_eq!(grid(8).index_of(0.25).unwrap(), 2);
        assert!(grid(8).index_of(0.3).is_err());
    }

    #[test]
    fn same_key_same_path() {
        let a = sample_path(7, 0, 2, grid(64));
        let b = sample_path(7, 0, 2, grid(64));
        assert_eq!(a, b);
        assert_ne!(a, sample_path(7, 1, 2, grid(64)));
        assert_ne!(a, sample_path(8, 0, 2, grid(64)));
    }

    #[test]
    fn increment_statistics() {
        let n = 1 << 14;
        let g = grid(n);
        let p = sample_path(11, 3, 1, g);
        let xs: Vec<f64> = (0..n).map(|i| p.increment(i).unwrap()[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() <= 3.0 * (g.dt() / n as f64).sqrt(), "mean {mean}");
        assert!((var / g.dt() - 1.0).abs() <= 0.05, "var ratio {}", var / g.dt());
    }

    #[test]
    fn positions_are_prefix_sums() {
        let p = sample_path(5, 2, 2, grid(128));
        assert_eq!(p.position(0).unwrap(), &[0.0, 0.0]);
        for k in [0, 17, 64] {
            for c in 0..2 {
                let s: f64 = (k..128).map(|i| p.increment(i).unwrap()[c]).sum();
                let diff = p.position(128).unwrap()[c] - p.position(k).unwrap()[c];
                assert!((s - diff).abs() < 1e-12);
            }
        }
        assert!(p.position(129).is_err());
        assert!(p.increment(128).is_err());
    }

    #[test]
    fn reversed_increments_are_reversed_rows() {
        let p = sample_path(5, 2, 2, grid(16));
        let rev = p.reversed_increments();
        for i in 0..16 {
            assert_eq!(&rev[2 * i..2 * i + 2], p.increment(15 - i).unwrap());
        }
    }

    #[test]
    fn refinement_chain_embeds_coarse_positions_exactly() {
        let base = sample_path(9, 4, 2, grid(32));
        let mut fine = base.clone();
        for level in 1..=4u32 {
            fine = fine.refine().unwrap();
            assert_eq!(fine.level(), level);
            let stride = 1usize << level;
            for i in 0..=32 {
                assert_eq!(fine.position(i * stride).unwrap(), base.position(i).unwrap());
            }
        }
        let back = base.refine().unwrap().downsample().unwrap();
        assert_eq!(back.positions, base.positions);
        assert_eq!(base.refine_times(2).unwrap(), base.refine_times(2).unwrap());
    }

    #[test]
    fn bridge_midpoint_variance() {
        let n = 16;
        let g = grid(n);
        let samples = 1 << 12;
        let mut acc = 0.0;
        let mut count = 0;
        for s in 0..samples {
            let p = sample_path(21, s, 1, g);
            let f = p.refine().unwrap();
            for i in 0..n {
                let a = p.position(i).unwrap()[0];
                let b = p.position(i + 1).unwrap()[0];
                let m = f.position(2 * i + 1).unwrap()[0];
                acc += (m - 0.5 * (a + b)).powi(2);
                count += 1;
            }
        }
        let ratio = acc / count as f64 / (g.dt() / 4.0);
        assert!((ratio - 1.0).abs() <= 0.05, "ratio {ratio}");
    }

    #[test]
    fn refinement_limit() {
        let p = BrownianPath::zero(1, TimeGrid::new(1.0, MAX_STEPS).unwrap());
        assert!(p.refine().is_err());
    }

    #[test]
    fn terminal_covariance_is_identity() {
        let g = grid(16);
        let n = 1 << 12;
        let mut c = [[0.0; 2]; 2];
        for s in 0..n {
            let p = sample_path(3, s, 2, g);
            let b = p.position(16).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    c[i][j] += b[i] * b[j] / n as f64;
                }
            }
        }
        assert!((c[0][0] - 1.0).abs() < 0.05 && (c[1][1] - 1.0).abs() < 0.05);
        assert!(c[0][1].abs() < 0.05);
    }
}
