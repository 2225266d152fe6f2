//! Counter-based Gaussian increments.
//!
//! Every variate is a pure function of `(seed, n, k, sub)`: the seed is
//! expanded into a ChaCha key, the step index `n` selects the ChaCha stream
//! and `(k, sub)` select a fixed block position inside the stream. Nothing is
//! ever drawn "sequentially", so coarse and fine levels, ensemble members and
//! threads can request variates in any order and always see the same path.
//!
//! `sub = 0` is the step increment `X^{n+1}_k`; `sub >= 1` are the Lévy
//! midpoint variates used to refine a step into a Brownian bridge.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Result};

/// Words reserved per variate. The normal sampler consumes a variable but
/// tiny number of words; the reservation keeps variates disjoint.
const WORDS_PER_VARIATE: u128 = 64;

/// SplitMix64 finalizer; used to derive keys and per-path seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of ensemble member `path` under a master seed.
pub fn path_seed(master: u64, path: u64) -> u64 {
    splitmix64(master ^ splitmix64(path.wrapping_add(0x5EED)))
}

fn key_from_seed(seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    let mut s = seed;
    for chunk in key.chunks_exact_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    key
}

/// The Brownian path of one trajectory, sampled at step granularity.
#[derive(Debug, Clone)]
pub struct WienerIncrements {
    seed: u64,
    key: [u8; 32],
}

impl WienerIncrements {
    pub fn new(seed: u64) -> Self {
        WienerIncrements { seed, key: key_from_seed(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Standard normal variate addressed by `(n, k, sub)`.
    pub fn normal(&self, n: u64, k: u32, sub: u64) -> f64 {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(n);
        // ChaCha word positions have 68 bits: 32 for `k`, 30 for `sub`, 6 spare.
        debug_assert!(sub < 1 << 30);
        let slot = ((k as u128) << 30) | sub as u128;
        rng.set_word_pos(slot * WORDS_PER_VARIATE);
        StandardNormal.sample(&mut rng)
    }

    /// `X^{n+1}_k` for `k = 0..k_max`.
    pub fn sample(&self, n: usize, k_max: usize) -> Vec<f64> {
        (0..k_max).map(|k| self.normal(n as u64, k as u32, 0)).collect()
    }

    /// Brownian bridge of mode `k` on step `n`: values of `β_k(t) − β_k(t_n)`
    /// at `t = t_n + j·dt/2^levels`, `j = 0..=2^levels`, pinned to the step
    /// increment `√dt·X^{n+1}_k` at the right end.
    pub fn bridge(&self, n: usize, k: usize, dt: f64, levels: u32) -> Vec<f64> {
        let end = dt.sqrt() * self.normal(n as u64, k as u32, 0);
        self.bridge_to(n, k, dt, levels, end)
    }

    /// Same as [`bridge`](Self::bridge) with an explicit endpoint value.
    pub fn bridge_to(&self, n: usize, k: usize, dt: f64, levels: u32, end: f64) -> Vec<f64> {
        let j = 1usize << levels;
        let mut b = vec![0.0; j + 1];
        b[j] = end;
        for level in 0..levels {
            let intervals = 1usize << level;
            let span = j >> level;
            // conditional variance of the midpoint of an interval of length τ is τ/4
            let std = (dt / (intervals as f64) / 4.0).sqrt();
            for i in 0..intervals {
                let lo = i * span;
                let hi = lo + span;
                let z = self.normal(n as u64, k as u32, (intervals + i) as u64);
                b[lo + span / 2] = 0.5 * (b[lo] + b[hi]) + std * z;
            }
        }
        b
    }
}

/// Supplies the Gaussian vector `X^{n+1}` consumed by step `n`.
pub trait IncrementSource: Sync {
    fn fill(&self, n: usize, out: &mut [f64]);
}

impl IncrementSource for WienerIncrements {
    fn fill(&self, n: usize, out: &mut [f64]) {
        for (k, x) in out.iter_mut().enumerate() {
            *x = self.normal(n as u64, k as u32, 0);
        }
    }
}

/// Increment of a coarse step assembled from the fine increments tiling it:
/// `X = Σ_j √δt_j X_j / √Δt`.
pub fn couple_time_refinement(coarse_dt: f64, fine_dts: &[f64], fine_x: &[f64]) -> Result<f64> {
    if fine_dts.len() != fine_x.len() || fine_dts.is_empty() {
        return Err(Error::Tiling(format!("{} substeps but {} variates", fine_dts.len(), fine_x.len())));
    }
    let total: f64 = fine_dts.iter().sum();
    if (total - coarse_dt).abs() > 1e-12 * coarse_dt.max(1e-300) {
        return Err(Error::Tiling(format!("substeps sum to {total:e}, coarse step is {coarse_dt:e}")));
    }
    if fine_dts.len() == 1 {
        return Ok(fine_x[0]);
    }
    let s: f64 = fine_dts.iter().zip(fine_x).map(|(dt, x)| dt.sqrt() * x).sum();
    Ok(s / coarse_dt.sqrt())
}
