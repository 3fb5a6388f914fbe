//! Independent routes to `<E_N(g)>` used to validate the quadrature.
//!
//! * Combinatorial: `E|sum_{j=1}^M e^{i theta_j}|^{2k}` counted exactly, then
//!   `<E> = sum_k g^k / (k! M^k) * moment_k`, which converges for `g < 1`.
//! * Monte Carlo: sample mean of `exp(g I(0))` over independent phase draws.
//!   The field is stationary, so the origin stands in for every point.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::field::{intensity_at, sample_phases, ModelParams};

/// Largest number of compositions enumerated for one moment.
pub const MAX_COMPOSITIONS: u64 = 5_000_000;

pub const MIN_MC_REALIZATIONS: u64 = 1000;

/// Series truncation target, relative to the partial sum.
pub const SERIES_TAIL_TOL: f64 = 1e-12;

fn binomial(n: u64, k: u64) -> Option<u64> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

fn composition_count(modes: usize, k: usize) -> Option<u64> {
    binomial((k + modes - 1) as u64, (modes - 1) as u64)
}

fn factorials(k: usize) -> Vec<BigUint> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(BigUint::one());
    for i in 1..=k {
        let next = &out[i - 1] * BigUint::from(i);
        out.push(next);
    }
    out
}

/// Calls `visit` on every composition `k_1 + ... + k_M = k` with `k_i >= 0`,
/// in lexicographic order of the parts.
fn for_each_composition(modes: usize, k: usize, visit: &mut impl FnMut(&[usize])) {
    fn recurse(parts: &mut Vec<usize>, slot: usize, left: usize, visit: &mut impl FnMut(&[usize])) {
        if slot + 1 == parts.len() {
            parts[slot] = left;
            visit(parts);
            return;
        }
        for take in 0..=left {
            parts[slot] = take;
            recurse(parts, slot + 1, left - take, visit);
        }
    }
    let mut parts = vec![0; modes];
    recurse(&mut parts, 0, k, visit);
}

/// Sum over compositions of the squared multinomial coefficient, given the
/// factorial table and a way to order the parts.
fn moment_from_parts(
    modes: usize,
    k: usize,
    fact: &[BigUint],
    order: impl Fn(&[usize]) -> Vec<usize>,
) -> BigUint {
    let mut total = BigUint::zero();
    for_each_composition(modes, k, &mut |parts| {
        let arranged = order(parts);
        let denom = arranged
            .iter()
            .fold(BigUint::one(), |acc, &p| acc * &fact[p]);
        let multinomial = &fact[k] / denom;
        total += &multinomial * &multinomial;
    });
    total
}

fn check_moment_size(modes: usize, k: usize) -> Result<()> {
    if modes == 0 {
        return domain("number of modes must be at least 1");
    }
    match composition_count(modes, k) {
        Some(n) if n <= MAX_COMPOSITIONS => Ok(()),
        _ => Err(Error::Resource(format!(
            "enumerating compositions of {k} into {modes} parts exceeds {MAX_COMPOSITIONS}"
        ))),
    }
}

/// Exact `E|sum_{j=1}^M e^{i theta_j}|^{2k}` for i.i.d. uniform phases.
pub fn steinhaus_abs_moment(modes: usize, k: usize) -> Result<BigUint> {
    check_moment_size(modes, k)?;
    let fact = factorials(k);
    Ok(moment_from_parts(modes, k, &fact, |p| p.to_vec()))
}

/// Same count with the mode labels reversed; must agree with
/// [`steinhaus_abs_moment`].
pub fn steinhaus_abs_moment_relabeled(modes: usize, k: usize) -> Result<BigUint> {
    check_moment_size(modes, k)?;
    let fact = factorials(k);
    Ok(moment_from_parts(modes, k, &fact, |p| {
        p.iter().rev().copied().collect()
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub modes: usize,
    pub k_max: usize,
    pub moments: Vec<BigUint>,
}

pub fn moment_table(modes: usize, k_max: usize) -> Result<MomentTable> {
    let moments = (0..=k_max)
        .map(|k| steinhaus_abs_moment(modes, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentTable {
        modes,
        k_max,
        moments,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesEstimate {
    pub value: f64,
    /// Geometric extrapolation of the omitted terms.
    pub tail: f64,
    pub terms: usize,
}

impl SeriesEstimate {
    pub fn converged(&self) -> bool {
        self.tail <= SERIES_TAIL_TOL * self.value
    }
}

/// `sum_k g^k / (k! M^k) E|sum e^{i theta}|^{2k}`, stopping once the
/// ratio-test tail drops below [`SERIES_TAIL_TOL`] or at `k_max`.
pub fn series_mean_gain(modes: usize, gain: f64, k_max: usize) -> Result<SeriesEstimate> {
    if !(gain.is_finite() && gain >= 0.0) {
        return domain(format!("gain must be finite and non-negative, got {gain}"));
    }
    if gain >= 1.0 {
        return domain(format!("moment series is used only for g < 1, got {gain}"));
    }
    if modes == 0 {
        return domain("number of modes must be at least 1");
    }
    let m = modes as f64;
    let mut value = 1.0;
    let mut prev_term = 1.0;
    let mut tail = f64::INFINITY;
    let mut log_fact = 0.0;
    let mut terms = 1;
    if gain == 0.0 {
        return Ok(SeriesEstimate {
            value,
            tail: 0.0,
            terms,
        });
    }
    for k in 1..=k_max {
        let kf = k as f64;
        log_fact += kf.ln();
        let moment = steinhaus_abs_moment(modes, k)?;
        let log_moment = moment
            .to_f64()
            .filter(|v| v.is_finite())
            .map(f64::ln)
            .ok_or_else(|| Error::Resource(format!("moment {k} overflows f64")))?;
        let term = (kf * (gain / m).ln() - log_fact + log_moment).exp();
        value += term;
        terms += 1;
        let ratio = term / prev_term;
        prev_term = term;
        tail = if ratio < 1.0 {
            term * ratio / (1.0 - ratio)
        } else {
            f64::INFINITY
        };
        if tail <= SERIES_TAIL_TOL * value {
            break;
        }
    }
    Ok(SeriesEstimate { value, tail, terms })
}

/// Number of series terms after which `(g M)^k / k!`, an upper bound on the
/// k-th term, falls below `1e-13`, or `None` when enumerating that many
/// moments would exceed the composition budget.
pub fn series_terms_needed(modes: usize, gain: f64) -> Option<usize> {
    if modes == 0 || !(gain > 0.0 && gain < 1.0) {
        return None;
    }
    let log_gm = (gain * modes as f64).ln();
    let mut log_bound = 0.0;
    let mut k = 0usize;
    while log_bound > -13.0 * std::f64::consts::LN_10 {
        k += 1;
        log_bound += log_gm - (k as f64).ln();
    }
    let k = k + 5;
    let mut total = 0u64;
    for j in 0..=k {
        total = total.checked_add(composition_count(modes, j)?)?;
    }
    (total <= MAX_COMPOSITIONS).then_some(k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub realizations: u64,
    /// Set for `g > 1` with `N > 0`, where the estimator is dominated by
    /// rare large intensities and its standard error is unreliable.
    pub heavy_tail_warning: bool,
}

/// Monte Carlo estimate of `<exp(g I(0))>` over realizations `0..R`.
/// Runs on the current rayon pool; the reduction is sequential in index
/// order, so the result does not depend on the number of workers.
pub fn mc_mean_gain(params: &ModelParams, realizations: u64) -> Result<McEstimate> {
    params.validate()?;
    if realizations < MIN_MC_REALIZATIONS {
        return domain(format!(
            "Monte Carlo needs at least {MIN_MC_REALIZATIONS} realizations, got {realizations}"
        ));
    }
    let origin = vec![0.0; params.dim];
    let samples: Vec<f64> = (0..realizations)
        .into_par_iter()
        .map(|r| (params.gain * intensity_at(&sample_phases(params, r), &origin)).exp())
        .collect();
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(McEstimate {
        mean,
        std_error: (var / n).sqrt(),
        realizations,
        heavy_tail_warning: params.gain > 1.0 && params.cutoff > 0,
    })
}
