//! Per-realization spatial statistics of `E_N(x, g)` on a grid.
//!
//! `log_m[p] = ln mean_x exp(g p I(x))` is the log of the p-th spatial moment
//! (`E^p` at gain `g` equals `E` at gain `g p`). The power-mean inequality
//! makes `log_m[p] / p` nondecreasing in `p`; intermittency shows up as the
//! gaps `L[p] = log_m[p+1]/(p+1) - log_m[p]/p` growing without bound.

use crate::error::{domain, Error, Result};
use crate::field::{intensity_grid_capped, IntensityGrid, PhaseRealization};
use crate::moments::MomentReport;

/// Upper limit on the moment order.
pub const MAX_POWER: usize = 8;

pub const DEFAULT_P_MAX: usize = 4;

/// Fraction of total `E^p` mass used for concentration fractions.
pub const CONCENTRATION_LEVEL: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMoments {
    pub gain: f64,
    pub p_max: usize,
    /// Indexed by `p = 0..=p_max`; `log_m[0] = 0`.
    pub log_m: Vec<f64>,
}

impl SpatialMoments {
    /// Power-mean gaps `L[p]` for `p = 1..p_max`, stored at index `p - 1`.
    pub fn log_ratios(&self) -> Vec<f64> {
        (1..self.p_max)
            .map(|p| self.log_m[p + 1] / (p + 1) as f64 - self.log_m[p] / p as f64)
            .collect()
    }
}

/// Neumaier-compensated sum.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `ln mean exp(scale * I)`, shifted by the largest exponent.
pub fn log_mean_exp(values: &[f64], scale: f64) -> f64 {
    let top = values
        .iter()
        .map(|&v| scale * v)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum = compensated_sum(values.iter().map(|&v| (scale * v - top).exp()));
    top + (sum / values.len() as f64).ln()
}

pub fn spatial_moments(grid: &IntensityGrid, gain: f64, p_max: usize) -> Result<SpatialMoments> {
    if !(1..=MAX_POWER).contains(&p_max) {
        return Err(Error::Usage(format!(
            "p_max must lie in 1..={MAX_POWER}, got {p_max}"
        )));
    }
    if grid.is_empty() {
        return Err(Error::Usage("empty intensity grid".into()));
    }
    let mut log_m = Vec::with_capacity(p_max + 1);
    log_m.push(0.0);
    for p in 1..=p_max {
        log_m.push(log_mean_exp(&grid.values, gain * p as f64));
    }
    Ok(SpatialMoments { gain, p_max, log_m })
}

/// Log of the ratio between the spatial mean of `E` and its ensemble mean.
pub fn ergodic_ratio_log(moments: &SpatialMoments, report: &MomentReport) -> Result<f64> {
    if moments.gain != report.params.gain {
        return Err(Error::Usage(format!(
            "spatial moments at g = {} but ensemble report at g = {}",
            moments.gain, report.params.gain
        )));
    }
    Ok(moments.log_m[1] - report.log_mean_gain)
}

/// Fraction of grid nodes where `g I(x) >= log_f`, i.e. `E >= f`.
pub fn exceedance_volume(grid: &IntensityGrid, gain: f64, log_f: f64) -> f64 {
    let hits = grid.values.iter().filter(|&&v| gain * v >= log_f).count();
    hits as f64 / grid.len() as f64
}

/// Smallest fraction of grid volume, taken in decreasing order of intensity,
/// that carries at least `q` of the total `E^p` mass.
pub fn mass_concentration(grid: &IntensityGrid, gain: f64, p: usize, q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return domain(format!("mass fraction must lie in (0, 1), got {q}"));
    }
    let scale = gain * p as f64;
    let mut sorted = grid.values.clone();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let top = scale * sorted[0];
    let weights: Vec<f64> = sorted.iter().map(|&v| (scale * v - top).exp()).collect();
    let total = compensated_sum(weights.iter().copied());
    let target = q * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if acc >= target {
            return Ok((i + 1) as f64 / sorted.len() as f64);
        }
    }
    Ok(1.0)
}

/// Empirical quantile of the grid intensities (nearest-rank).
pub fn intensity_quantile(grid: &IntensityGrid, level: f64) -> f64 {
    let mut sorted = grid.values.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let rank = ((level * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Exceedance of `E` over a quantile threshold, paired with the Markov bound
/// `mean(E^k) / f^k` for `k = order`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovCheck {
    pub order: usize,
    pub log_f: f64,
    pub fraction: f64,
    pub bound: f64,
}

impl MarkovCheck {
    pub fn holds(&self) -> bool {
        self.fraction <= self.bound
    }
}

/// Threshold for order `k` sits at the `1 - 10^{-k}` quantile of `E`.
pub fn markov_check(
    grid: &IntensityGrid,
    moments: &SpatialMoments,
    order: usize,
) -> Result<MarkovCheck> {
    if order == 0 || order > moments.p_max {
        return Err(Error::Usage(format!(
            "Markov order {order} outside 1..={}",
            moments.p_max
        )));
    }
    let level = 1.0 - 10f64.powi(-(order as i32));
    let log_f = moments.gain * intensity_quantile(grid, level);
    let fraction = exceedance_volume(grid, moments.gain, log_f);
    let bound = (moments.log_m[order] - order as f64 * log_f).exp();
    Ok(MarkovCheck {
        order,
        log_f,
        fraction,
        bound,
    })
}

/// Intermittency summary of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport {
    pub cutoff: usize,
    pub index: u64,
    pub oversample: usize,
    pub moments: SpatialMoments,
    /// `L[p]` for `p = 1..p_max`, at index `p - 1`.
    pub log_ratios: Vec<f64>,
    pub log_ergodic_ratio: f64,
    /// Markov checks of order `1..p_max`, at index `order - 1`.
    pub exceedance: Vec<MarkovCheck>,
    /// Volume fraction holding [`CONCENTRATION_LEVEL`] of the `E^p` mass, at index `p - 1`.
    pub concentration: Vec<f64>,
}

pub fn chain_report(
    grid: &IntensityGrid,
    index: u64,
    oversample: usize,
    report: &MomentReport,
    p_max: usize,
) -> Result<ChainReport> {
    let moments = spatial_moments(grid, report.params.gain, p_max)?;
    let log_ergodic_ratio = ergodic_ratio_log(&moments, report)?;
    let exceedance = (1..=p_max)
        .map(|k| markov_check(grid, &moments, k))
        .collect::<Result<Vec<_>>>()?;
    let concentration = (1..=p_max)
        .map(|p| mass_concentration(grid, moments.gain, p, CONCENTRATION_LEVEL))
        .collect::<Result<Vec<_>>>()?;
    Ok(ChainReport {
        cutoff: grid.cutoff,
        index,
        oversample,
        log_ratios: moments.log_ratios(),
        moments,
        log_ergodic_ratio,
        exceedance,
        concentration,
    })
}

/// Refinement policy for grids used in spatial integrals of `exp(g p I)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub start: usize,
    pub max_oversample: usize,
    /// Largest accepted relative change of the top moment on doubling.
    pub rel_change: f64,
    pub cap: usize,
}

impl Default for Refinement {
    fn default() -> Self {
        Self {
            start: crate::field::DEFAULT_OVERSAMPLE,
            max_oversample: 256,
            rel_change: 0.01,
            cap: crate::field::DEFAULT_GRID_CAP,
        }
    }
}

/// Doubles the oversampling factor until `mean exp(top_gain I)` changes by
/// at most `rel_change`, and returns the finer of the last two grids.
pub fn resolved_grid(
    phases: &PhaseRealization,
    top_gain: f64,
    policy: &Refinement,
) -> Result<(IntensityGrid, usize)> {
    let mut c = policy.start.max(1);
    let mut grid = intensity_grid_capped(phases, c, policy.cap)?;
    let mut current = log_mean_exp(&grid.values, top_gain);
    while 2 * c <= policy.max_oversample {
        let finer = intensity_grid_capped(phases, 2 * c, policy.cap)?;
        let next = log_mean_exp(&finer.values, top_gain);
        c *= 2;
        grid = finer;
        let change = (next - current).exp_m1().abs();
        current = next;
        if change <= policy.rel_change {
            return Ok((grid, c));
        }
    }
    Err(Error::Numeric(format!(
        "grid for realization {} not converged at oversample {c} (gain {top_gain})",
        phases.index
    )))
}
