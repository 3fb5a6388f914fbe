//! Log-scaled modified Bessel functions of order zero and one.
//!
//! Only `ln I0(x)` and the ratio `I1(x)/I0(x)` are exposed. Downstream code
//! works with exponents of size `(2N+1)^d`, so `I0` itself is never formed.
//!
//! Two regimes are used: the ascending power series for `x <= 20` and the
//! large-argument (Hankel) expansion above that. The expansion is divergent,
//! so it is summed only while its terms keep shrinking; at `x > 20` the
//! smallest term is below `1e-17`.

use std::f64::consts::PI;

use crate::error::{domain, Result};

/// Argument at which evaluation switches from the power series to the
/// asymptotic expansion.
pub const SERIES_CUTOFF: f64 = 20.0;

const TERM_EPS: f64 = 1e-17;
const MAX_TERMS: usize = 500;

/// `ln I0(x)` and `I1(x)/I0(x)` at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEval {
    pub x: f64,
    pub log_i0: f64,
    pub ratio_i1_i0: f64,
}

impl BesselEval {
    pub fn at(x: f64) -> Result<Self> {
        check_arg(x)?;
        let (log_i0, ratio_i1_i0) = if x <= SERIES_CUTOFF {
            series(x)
        } else {
            asymptotic(x)
        };
        Ok(Self {
            x,
            log_i0,
            ratio_i1_i0,
        })
    }
}

/// Natural logarithm of the modified Bessel function `I0(x)` for `x >= 0`.
pub fn log_bessel_i0(x: f64) -> Result<f64> {
    BesselEval::at(x).map(|b| b.log_i0)
}

/// `I1(x) / I0(x)` for `x >= 0`; the logarithmic derivative of `I0`.
pub fn bessel_ratio(x: f64) -> Result<f64> {
    BesselEval::at(x).map(|b| b.ratio_i1_i0)
}

fn check_arg(x: f64) -> Result<()> {
    if !x.is_finite() {
        return domain(format!("Bessel argument must be finite, got {x}"));
    }
    if x < 0.0 {
        return domain(format!("Bessel argument must be non-negative, got {x}"));
    }
    Ok(())
}

/// Power series in `t = x^2/4`:
/// `I0 = sum t^k/(k!)^2`, `I1 = (x/2) sum t^k/(k!(k+1)!)`.
/// All terms are positive, so there is no cancellation.
fn series(x: f64) -> (f64, f64) {
    if x == 0.0 {
        return (0.0, 0.0);
    }
    let t = 0.25 * x * x;

    // I0 - 1, kept separate so that ln_1p stays accurate for tiny x.
    let mut i0_tail = 0.0;
    let mut term = 1.0;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= t / (kf * kf);
        i0_tail += term;
        if term < TERM_EPS * i0_tail {
            break;
        }
    }

    let mut i1_sum = 1.0;
    let mut term = 1.0;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= t / (kf * (kf + 1.0));
        i1_sum += term;
        if term < TERM_EPS * i1_sum {
            break;
        }
    }

    let log_i0 = i0_tail.ln_1p();
    let ratio = 0.5 * x * i1_sum / (1.0 + i0_tail);
    (log_i0, ratio)
}

/// `I_nu(x) ~ e^x / sqrt(2 pi x) * sum_k c_k(nu) / x^k` for nu = 0, 1.
fn asymptotic(x: f64) -> (f64, f64) {
    // Corrections beyond the leading 1, for nu = 0 and nu = 1.
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut t0: f64 = 1.0;
    let mut t1: f64 = 1.0;
    let mut live0 = true;
    let mut live1 = true;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        if live0 {
            let next = t0 * odd * odd / (8.0 * kf * x);
            if next.abs() >= t0.abs() {
                live0 = false;
            } else {
                t0 = next;
                s0 += t0;
                live0 = t0.abs() >= TERM_EPS;
            }
        }
        if live1 {
            let next = t1 * (odd * odd - 4.0) / (8.0 * kf * x);
            if next.abs() >= t1.abs() {
                live1 = false;
            } else {
                t1 = next;
                s1 += t1;
                live1 = t1.abs() >= TERM_EPS;
            }
        }
        if !live0 && !live1 {
            break;
        }
    }
    let log_i0 = x - 0.5 * (2.0 * PI * x).ln() + s0.ln_1p();
    let ratio = (1.0 + s1) / (1.0 + s0);
    (log_i0, ratio)
}
