//! Steinhaus phase draws and synthesis of the intensity `|S_N(x)|^2` on the
//! unit torus.
//!
//! Modes are indexed by `n` in `[-N, N]^d`, stored row-major with the first
//! coordinate slowest. Each realization gets its own ChaCha stream seeded
//! from `(master_seed, index)`, so any subset of realizations can be
//! regenerated independently and in any order.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Largest supported torus dimension.
pub const MAX_DIM: usize = 3;

/// Default cap on the number of grid values, `2^26`.
pub const DEFAULT_GRID_CAP: usize = 1 << 26;

pub const DEFAULT_OVERSAMPLE: usize = 4;

/// Full configuration of one field experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: usize,
    pub cutoff: usize,
    pub gain: f64,
    pub oversample: usize,
    pub master_seed: u64,
}

impl ModelParams {
    pub fn new(dim: usize, cutoff: usize, gain: f64) -> Result<Self> {
        let p = Self {
            dim,
            cutoff,
            gain,
            oversample: DEFAULT_OVERSAMPLE,
            master_seed: 0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_oversample(mut self, oversample: usize) -> Result<Self> {
        self.oversample = oversample;
        self.validate()?;
        Ok(self)
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn with_gain(mut self, gain: f64) -> Result<Self> {
        self.gain = gain;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DIM).contains(&self.dim) {
            return domain(format!("dimension must be 1, 2 or 3, got {}", self.dim));
        }
        if !(self.gain.is_finite() && self.gain > 0.0) {
            return domain(format!(
                "gain must be positive and finite, got {}",
                self.gain
            ));
        }
        if self.oversample == 0 {
            return domain("oversample factor must be at least 1");
        }
        Ok(())
    }

    /// Modes per dimension, `2N+1`.
    pub fn side(&self) -> usize {
        2 * self.cutoff + 1
    }

    /// Total number of modes, `(2N+1)^d`, as a float (it may exceed `usize`
    /// only in pathological configurations, but is used in exponents).
    pub fn modes(&self) -> f64 {
        (self.side() as f64).powi(self.dim as i32)
    }

    pub fn grid_side(&self) -> usize {
        self.oversample * self.side()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of realization `index`. Distinct indices give distinct seeds for a
/// fixed master seed, since `splitmix64` is a bijection.
pub fn realization_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ index)
}

pub fn realization_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(realization_seed(master_seed, index))
}

/// One draw of the `(2N+1)^d` i.i.d. uniform phases.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRealization {
    pub index: u64,
    pub dim: usize,
    pub cutoff: usize,
    pub theta: Vec<f64>,
}

impl PhaseRealization {
    /// Builds a realization from explicit phases (tests, fixed patterns).
    pub fn from_phases(dim: usize, cutoff: usize, theta: Vec<f64>) -> Result<Self> {
        let expected = (2 * cutoff + 1).pow(dim as u32);
        if theta.len() != expected {
            return Err(Error::Usage(format!(
                "expected {expected} phases for d={dim}, N={cutoff}, got {}",
                theta.len()
            )));
        }
        Ok(Self {
            index: 0,
            dim,
            cutoff,
            theta,
        })
    }

    pub fn side(&self) -> usize {
        2 * self.cutoff + 1
    }
}

pub fn sample_phases(params: &ModelParams, index: u64) -> PhaseRealization {
    let count = params.side().pow(params.dim as u32);
    let mut rng = realization_rng(params.master_seed, index);
    let theta = (0..count).map(|_| rng.gen_range(0.0..TAU)).collect();
    PhaseRealization {
        index,
        dim: params.dim,
        cutoff: params.cutoff,
        theta,
    }
}

/// `|S_N(x)|^2` by direct summation over all modes. Slow; used as the
/// reference for [`intensity_grid`].
pub fn intensity_at(phases: &PhaseRealization, x: &[f64]) -> f64 {
    assert_eq!(x.len(), phases.dim, "point dimension mismatch");
    let side = phases.side();
    let n = phases.cutoff as i64;
    let mut re = 0.0;
    let mut im = 0.0;
    let mut digits = vec![0usize; phases.dim];
    for &theta in &phases.theta {
        let mut angle = theta;
        for (j, &digit) in digits.iter().enumerate() {
            angle += TAU * (digit as i64 - n) as f64 * x[j];
        }
        let (s, c) = angle.sin_cos();
        re += c;
        im += s;
        // Advance the mixed-radix counter, last coordinate fastest.
        for digit in digits.iter_mut().rev() {
            *digit += 1;
            if *digit < side {
                break;
            }
            *digit = 0;
        }
    }
    (re * re + im * im) / phases.theta.len() as f64
}

/// `|S_N|^2` at the nodes `x_j = j / side` of a uniform torus grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityGrid {
    pub dim: usize,
    pub cutoff: usize,
    /// Nodes per dimension.
    pub side: usize,
    /// Row-major values, first coordinate slowest.
    pub values: Vec<f64>,
}

impl IntensityGrid {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Torus coordinates of node `flat`.
    pub fn node(&self, flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let mut rest = flat;
        for slot in out.iter_mut().rev() {
            *slot = (rest % self.side) as f64 / self.side as f64;
            rest /= self.side;
        }
        out
    }
}

pub fn intensity_grid(phases: &PhaseRealization, oversample: usize) -> Result<IntensityGrid> {
    intensity_grid_capped(phases, oversample, DEFAULT_GRID_CAP)
}

/// Zero-padded inverse FFT of the unit-modulus mode coefficients, one axis at
/// a time.
pub fn intensity_grid_capped(
    phases: &PhaseRealization,
    oversample: usize,
    cap: usize,
) -> Result<IntensityGrid> {
    if oversample == 0 {
        return domain("oversample factor must be at least 1");
    }
    let dim = phases.dim;
    let side = oversample
        .checked_mul(phases.side())
        .ok_or_else(|| Error::Resource("grid side overflows".into()))?;
    let total = side
        .checked_pow(dim as u32)
        .filter(|&t| t <= cap)
        .ok_or_else(|| {
            Error::Resource(format!(
                "grid of {side}^{dim} values exceeds the cap of {cap} values"
            ))
        })?;

    let norm = 1.0 / (phases.theta.len() as f64).sqrt();
    let mut buf = vec![Complex64::new(0.0, 0.0); total];
    let mode_side = phases.side();
    let n = phases.cutoff as i64;
    for (k, &theta) in phases.theta.iter().enumerate() {
        let mut rest = k;
        let mut flat = 0usize;
        let mut stride = 1usize;
        for _ in 0..dim {
            let digit = (rest % mode_side) as i64 - n;
            rest /= mode_side;
            flat += digit.rem_euclid(side as i64) as usize * stride;
            stride *= side;
        }
        buf[flat] = Complex64::from_polar(norm, theta);
    }

    let fft = FftPlanner::new().plan_fft_inverse(side);
    let mut line = vec![Complex64::new(0.0, 0.0); side];
    for axis in 0..dim {
        let stride = side.pow((dim - 1 - axis) as u32);
        if stride == 1 {
            for chunk in buf.chunks_exact_mut(side) {
                fft.process(chunk);
            }
            continue;
        }
        let block = stride * side;
        for outer in 0..total / block {
            for inner in 0..stride {
                let base = outer * block + inner;
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = buf[base + i * stride];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    buf[base + i * stride] = *v;
                }
            }
        }
    }

    Ok(IntensityGrid {
        dim,
        cutoff: phases.cutoff,
        side,
        values: buf.iter().map(|z| z.norm_sqr()).collect(),
    })
}

/// Largest grid value; a lower bound on the continuum supremum.
pub fn sup_intensity(grid: &IntensityGrid) -> f64 {
    grid.values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Intensity threshold `2 (2N+1)^{d(2 alpha - 1)}`, the square of the
/// almost-sure eventual bound on `sup |S_N|`.
pub fn appendix_bound(cutoff: usize, dim: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.5 && alpha <= 1.0) {
        return domain(format!("alpha must lie in (1/2, 1], got {alpha}"));
    }
    let side = (2 * cutoff + 1) as f64;
    Ok(2.0 * side.powf(dim as f64 * (2.0 * alpha - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params(dim: usize, cutoff: usize) -> ModelParams {
        ModelParams::new(dim, cutoff, 1.0).unwrap().with_seed(42)
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(0, 1, 1.0).is_err());
        assert!(ModelParams::new(4, 1, 1.0).is_err());
        assert!(ModelParams::new(1, 1, 0.0).is_err());
        assert!(ModelParams::new(1, 1, f64::NAN).is_err());
        assert!(ModelParams::new(1, 1, 1.0)
            .unwrap()
            .with_oversample(0)
            .is_err());
        let p = ModelParams::new(2, 3, 0.5).unwrap();
        assert_eq!(p.modes(), 49.0);
        assert_eq!(p.grid_side(), 28);
    }

    #[test]
    fn phases_are_deterministic_and_separated() {
        let p = params(2, 3);
        let a = sample_phases(&p, 5);
        assert_eq!(a, sample_phases(&p, 5));
        assert_ne!(a.theta, sample_phases(&p, 6).theta);
        assert_ne!(a.theta, sample_phases(&p.with_seed(43), 5).theta);
        assert_eq!(a.theta.len(), 49);
        assert!(a.theta.iter().all(|&t| (0.0..TAU).contains(&t)));
        let single = sample_phases(&params(1, 0), 0);
        assert_eq!(single.theta.len(), 1);
    }

    #[test]
    fn direct_sum_special_cases() {
        let single = sample_phases(&params(3, 0), 9);
        assert!((intensity_at(&single, &[0.3, 0.1, 0.7]) - 1.0).abs() < 1e-15);

        let coherent = PhaseRealization::from_phases(2, 2, vec![0.0; 25]).unwrap();
        assert!((intensity_at(&coherent, &[0.0, 0.0]) - 25.0).abs() < 1e-12);

        // Dirichlet kernel: |S(x)|^2 = sin^2(pi M x) / (M sin^2(pi x)).
        for cutoff in [1usize, 3, 7] {
            let m = (2 * cutoff + 1) as f64;
            let flat = PhaseRealization::from_phases(1, cutoff, vec![0.0; 2 * cutoff + 1]).unwrap();
            for x in [1.0 / m, 0.5 / m, 0.37] {
                let expected = (PI * m * x).sin().powi(2) / (m * (PI * x).sin().powi(2));
                assert!((intensity_at(&flat, &[x]) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_cutoff_grid_is_all_ones() {
        let g = intensity_grid(&sample_phases(&params(2, 0), 1), 3).unwrap();
        assert_eq!(g.len(), 9);
        assert!(g.values.iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn grid_mean_is_one() {
        for c in [1, 2, 4] {
            let g = intensity_grid(&sample_phases(&params(1, 8), 3), c).unwrap();
            assert!((g.mean() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_matches_direct_sum_in_2d() {
        let ph = sample_phases(&params(2, 3), 11);
        let g = intensity_grid(&ph, 2).unwrap();
        let mut rng = realization_rng(7, 7);
        for _ in 0..20 {
            let flat = rng.gen_range(0..g.len());
            let direct = intensity_at(&ph, &g.node(flat));
            assert!((g.values[flat] - direct).abs() <= 1e-10 * direct.max(1.0));
        }
    }

    #[test]
    fn grid_respects_cap() {
        let ph = sample_phases(&params(2, 3), 0);
        match intensity_grid_capped(&ph, 4, 100) {
            Err(Error::Resource(_)) => {}
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn sup_norm_cases() {
        let coherent = PhaseRealization::from_phases(1, 4, vec![0.0; 9]).unwrap();
        let g = intensity_grid(&coherent, 4).unwrap();
        assert!((sup_intensity(&g) - 9.0).abs() < 1e-12);
        assert!((g.values[0] - 9.0).abs() < 1e-12);

        let ph = sample_phases(&params(1, 10), 2);
        let coarse = sup_intensity(&intensity_grid(&ph, 1).unwrap());
        let fine = sup_intensity(&intensity_grid(&ph, 4).unwrap());
        assert!(fine >= coarse - 1e-12);
    }

    #[test]
    fn appendix_bound_arithmetic() {
        assert!((appendix_bound(12, 1, 0.75).unwrap() - 10.0).abs() < 1e-12);
        // 2 * 9^{2(2*1-1)} = 162.
        assert!((appendix_bound(4, 2, 1.0).unwrap() - 162.0).abs() < 1e-12);
        assert!(appendix_bound(4, 1, 0.5).is_err());
        assert!(appendix_bound(4, 1, 1.01).is_err());
        assert!((appendix_bound(0, 1, 0.75).unwrap() - 2.0).abs() < 1e-15);
    }
}
