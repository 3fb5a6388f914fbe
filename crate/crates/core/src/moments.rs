//! Ensemble average of `E_N(x, g) = exp(g |S_N(x)|^2)`.
//!
//! With `M = (2N+1)^d` modes the average reduces to the one-dimensional
//! integral `<E_N(g)> = M * int_0^inf exp(-M f_g(u)) du`, where
//! `f_g(u) = u - ln I0(2 sqrt(g u))`. For `g < 1` the integrand is a boundary
//! layer at `u = 0`; for `g > 1` it peaks at the interior minimiser `u0` of
//! `f_g`, and `<E_N>` grows like `exp(gamma_g M)` with `gamma_g = -f_g(u0)`.
//! Everything is evaluated in log domain after shifting out the peak.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::field::ModelParams;
use crate::quadrature::{integrate, QuadConfig};
use crate::special::BesselEval;

/// Relative tolerance of the mean-gain quadrature.
pub const QUAD_REL_TOL: f64 = 1e-10;

/// Neglected tail of the integral, relative to its value.
pub const TAIL_REL_TOL: f64 = 1e-14;

/// Stationarity tolerance used when the saddle is needed internally.
pub const SADDLE_TOL: f64 = 1e-13;

/// Lower end of the saddle bracket.
const BRACKET_LO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Subcritical => "subcritical",
            Regime::Critical => "critical",
            Regime::Supercritical => "supercritical",
        })
    }
}

pub fn classify_regime(gain: f64) -> Regime {
    if gain < 1.0 {
        Regime::Subcritical
    } else if gain == 1.0 {
        Regime::Critical
    } else {
        Regime::Supercritical
    }
}

/// The rate function `f_g` at a fixed gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFunction {
    pub gain: f64,
}

impl RateFunction {
    pub fn new(gain: f64) -> Result<Self> {
        if !(gain.is_finite() && gain > 0.0) {
            return domain(format!("gain must be positive and finite, got {gain}"));
        }
        Ok(Self { gain })
    }

    pub fn value(&self, u: f64) -> Result<f64> {
        if !(u.is_finite() && u >= 0.0) {
            return domain(format!("rate function argument must be >= 0, got {u}"));
        }
        if u == 0.0 {
            return Ok(0.0);
        }
        let b = BesselEval::at(2.0 * (self.gain * u).sqrt())?;
        Ok(u - b.log_i0)
    }

    /// `f'_g(u) = 1 - sqrt(g/u) I1(s)/I0(s)` with `s = 2 sqrt(g u)`; the
    /// limit `1 - g` is returned at `u = 0`.
    pub fn derivative(&self, u: f64) -> Result<f64> {
        if !(u.is_finite() && u >= 0.0) {
            return domain(format!("rate function argument must be >= 0, got {u}"));
        }
        let s = 2.0 * (self.gain * u).sqrt();
        if s == 0.0 {
            return Ok(1.0 - self.gain);
        }
        let b = BesselEval::at(s)?;
        // sqrt(g/u) = 2g/s.
        Ok(1.0 - 2.0 * self.gain * b.ratio_i1_i0 / s)
    }

    /// Analytic `f''_g(u)`, using `r'(s) = 1 - r/s - r^2` for `r = I1/I0`.
    fn second_derivative(&self, u: f64) -> Result<f64> {
        let s = 2.0 * (self.gain * u).sqrt();
        let r = BesselEval::at(s)?.ratio_i1_i0;
        let dr = 1.0 - r / s - r * r;
        let root = (self.gain / u).sqrt();
        Ok(root * r / (2.0 * u) - self.gain / u * dr)
    }
}

pub fn rate_function(gain: f64, u: f64) -> Result<f64> {
    RateFunction::new(gain)?.value(u)
}

pub fn rate_function_derivative(gain: f64, u: f64) -> Result<f64> {
    RateFunction::new(gain)?.derivative(u)
}

/// Interior minimum of `f_g` for `g > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleData {
    pub gain: f64,
    pub u0: f64,
    pub gamma: f64,
    /// `f''_g(u0)` by central differences of `f'_g`.
    pub f2_u0: f64,
}

/// Bracketed Newton iteration on `f'_g`, falling back to bisection whenever a
/// Newton step leaves the bracket.
pub fn saddle_point(gain: f64, tol: f64) -> Result<SaddleData> {
    let rate = RateFunction::new(gain)?;
    if gain <= 1.0 {
        return domain(format!(
            "saddle point exists only for g > 1, got g = {gain}"
        ));
    }
    if !(tol.is_finite() && tol >= 1e-14) {
        return domain(format!("saddle tolerance must be >= 1e-14, got {tol}"));
    }

    let mut lo = BRACKET_LO;
    while rate.derivative(lo)? >= 0.0 {
        lo *= 1e-4;
        if lo < 1e-300 {
            return Err(Error::Numeric(format!(
                "no sign change of f' near the origin for g = {gain}"
            )));
        }
    }
    let mut hi = (4.0 * gain).max(10.0);
    if rate.derivative(hi)? <= 0.0 {
        return Err(Error::Numeric(format!(
            "f' not positive at {hi} for g = {gain}"
        )));
    }

    // Small-u expansion f' ~ (1-g) + g^2 u / 2 near threshold, u ~ g otherwise.
    let guess = if gain < 1.5 {
        2.0 * (gain - 1.0) / (gain * gain)
    } else {
        gain - 0.5
    };
    let mut u = guess.clamp(lo, hi);
    let mut converged = false;
    for _ in 0..300 {
        let d1 = rate.derivative(u)?;
        if d1 == 0.0 {
            converged = true;
            break;
        }
        if d1 < 0.0 {
            lo = u;
        } else {
            hi = u;
        }
        let d2 = rate.second_derivative(u)?;
        let mut next = u - d1 / d2;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - u).abs();
        u = next;
        if step <= 4.0 * f64::EPSILON * u || hi - lo <= 4.0 * f64::EPSILON * u {
            converged = true;
            break;
        }
    }
    let slope = rate.derivative(u)?;
    if !converged || slope.abs() > tol {
        return Err(Error::Numeric(format!(
            "saddle solve for g = {gain} ended at u = {u} with f' = {slope:e}"
        )));
    }

    let mut h = (1e-6f64).max(1e-6 * u);
    if u - h <= 0.0 {
        h = 0.5 * u;
    }
    let f2_u0 = (rate.derivative(u + h)? - rate.derivative(u - h)?) / (2.0 * h);
    let gamma = -rate.value(u)?;
    if !(f2_u0 > 0.0 && gamma > 0.0) {
        return Err(Error::Numeric(format!(
            "degenerate saddle at g = {gain}: gamma = {gamma:e}, f'' = {f2_u0:e}"
        )));
    }
    Ok(SaddleData {
        gain,
        u0: u,
        gamma,
        f2_u0,
    })
}

/// Exact and asymptotic description of `<E_N(g)>` for one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub params: ModelParams,
    /// `ln <E_N(g)>` from quadrature.
    pub log_mean_gain: f64,
    /// `-ln(1-g)` for `g < 1`, `+inf` otherwise.
    pub upper_bound_log: f64,
    /// Log of the Laplace approximant, for `g > 1` only.
    pub asymptotic_log: Option<f64>,
    pub regime: Regime,
}

/// Characteristic width of the integrand's peak, used to seed breakpoints.
fn peak_width(gain: f64, modes: f64, saddle: Option<&SaddleData>) -> f64 {
    match saddle {
        Some(s) => 1.0 / (modes * s.f2_u0).sqrt(),
        None => {
            let quadratic = 2.0 / (gain * modes.sqrt());
            if gain < 1.0 {
                quadratic.min(1.0 / (modes * (1.0 - gain)))
            } else {
                quadratic
            }
        }
    }
}

/// Geometric breakpoints around `peak`, clipped to `[0, hi]`.
fn breakpoints(peak: f64, width: f64, hi: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    let mut left: Vec<f64> = Vec::new();
    let mut step = width;
    while peak - step > 0.0 {
        left.push(peak - step);
        step *= 2.0;
    }
    pts.extend(left.into_iter().rev());
    if peak > 0.0 && peak < hi {
        pts.push(peak);
    }
    let mut step = width;
    while peak + step < hi {
        pts.push(peak + step);
        step *= 2.0;
    }
    pts.push(hi);
    pts.dedup_by(|a, b| *a <= *b);
    pts
}

/// `ln <E_N(g)>` by adaptive quadrature of the peak-shifted integrand.
pub fn mean_gain_exact(params: &ModelParams) -> Result<MomentReport> {
    params.validate()?;
    let gain = params.gain;
    let modes = params.modes();
    let rate = RateFunction::new(gain)?;
    let regime = classify_regime(gain);

    let saddle = match regime {
        Regime::Supercritical => Some(saddle_point(gain, SADDLE_TOL)?),
        _ => None,
    };
    let (peak, gamma) = saddle.map_or((0.0, 0.0), |s| (s.u0, s.gamma));
    let width = peak_width(gain, modes, saddle.as_ref());

    // exp(-M (f(u) + gamma)); the exponent is <= 0 up to rounding.
    let integrand = |u: f64| match rate.value(u) {
        Ok(f) => (-modes * (f + gamma)).exp(),
        Err(_) => f64::NAN,
    };

    // For u >= 16 g, f(u) >= u - 2 sqrt(g u) >= u / 2, so the tail beyond hi
    // is at most (2/M) exp(-M (hi/2 + gamma)).
    let mut hi = (16.0 * gain).max(peak + 64.0 * width);
    let config = QuadConfig {
        rel_tol: QUAD_REL_TOL,
        ..QuadConfig::default()
    };
    let mut integral = integrate(integrand, &breakpoints(peak, width, hi), config)?.value;
    loop {
        if integral.is_nan() || integral <= 0.0 {
            return Err(Error::Numeric(format!(
                "mean-gain integral not positive for {params:?}"
            )));
        }
        let log_tail = (2.0 / modes).ln() - modes * (0.5 * hi + gamma);
        if log_tail <= TAIL_REL_TOL.ln() + integral.ln() {
            break;
        }
        let extension = integrate(integrand, &[hi, 2.0 * hi], config)?.value;
        integral += extension;
        hi *= 2.0;
    }

    let log_mean_gain = modes.ln() + modes * gamma + integral.ln();
    let upper_bound_log = if gain < 1.0 {
        -(-gain).ln_1p()
    } else {
        f64::INFINITY
    };
    let asymptotic_log = match saddle {
        Some(s) => Some(mean_gain_asymptotic(params, &s)?),
        None => None,
    };
    Ok(MomentReport {
        params: *params,
        log_mean_gain,
        upper_bound_log,
        asymptotic_log,
        regime,
    })
}

/// Log of the Laplace approximant
/// `sqrt(2 pi / f''(u0)) (2N+1)^{d/2} exp(gamma_g (2N+1)^d)`.
pub fn mean_gain_asymptotic(params: &ModelParams, saddle: &SaddleData) -> Result<f64> {
    if params.gain <= 1.0 {
        return domain(format!(
            "the Laplace approximant needs g > 1, got g = {}",
            params.gain
        ));
    }
    if saddle.gain != params.gain {
        return Err(Error::Usage(format!(
            "saddle computed at g = {} but params have g = {}",
            saddle.gain, params.gain
        )));
    }
    let side = params.side() as f64;
    Ok(saddle.gamma * params.modes()
        + 0.5 * params.dim as f64 * side.ln()
        + 0.5 * (2.0 * PI / saddle.f2_u0).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regimes() {
        assert_eq!(classify_regime(0.5), Regime::Subcritical);
        assert_eq!(classify_regime(1.0), Regime::Critical);
        assert_eq!(classify_regime(2.0), Regime::Supercritical);
        assert_eq!(Regime::Supercritical.to_string(), "supercritical");
    }

    #[test]
    fn rate_function_examples() {
        assert_eq!(rate_function(0.5, 0.0).unwrap(), 0.0);
        assert!((rate_function(2.0, 1e-8).unwrap() + 1e-8).abs() < 1e-12);
        let expected = 2.0 - 2.424_972_795_515_459;
        assert!((rate_function(2.0, 2.0).unwrap() - expected).abs() < 1e-13);
        assert!(rate_function(2.0, -1.0).is_err());
        assert!(rate_function(-2.0, 1.0).is_err());
        assert!(rate_function(2.0, f64::NAN).is_err());
    }

    #[test]
    fn derivative_limits() {
        assert_eq!(rate_function_derivative(0.5, 0.0).unwrap(), 0.5);
        assert_eq!(rate_function_derivative(1.0, 0.0).unwrap(), 0.0);
        assert!((rate_function_derivative(0.5, 1e-14).unwrap() - 0.5).abs() < 1e-12);
        assert!((rate_function_derivative(3.0, 1e8).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn analytic_second_derivative_matches_differences() {
        let f = RateFunction::new(2.5).unwrap();
        for u in [0.01, 0.3, 2.0, 40.0] {
            let h = 1e-5 * u;
            let fd = (f.derivative(u + h).unwrap() - f.derivative(u - h).unwrap()) / (2.0 * h);
            assert!((f.second_derivative(u).unwrap() - fd).abs() < 1e-6);
        }
    }

    #[test]
    fn saddle_rejects_subcritical() {
        assert!(matches!(saddle_point(1.0, 1e-12), Err(Error::Domain(_))));
        assert!(matches!(saddle_point(0.5, 1e-12), Err(Error::Domain(_))));
        assert!(saddle_point(2.0, 1e-16).is_err());
    }

    #[test]
    fn saddle_near_threshold() {
        let s = saddle_point(1.0 + 1e-6, 1e-12).unwrap();
        assert!(s.u0 > 0.0 && s.u0 < 1e-2);
        assert!(s.gamma > 0.0 && s.gamma < 1e-6);
    }

    #[test]
    fn saddle_reference_values() {
        // 40-digit reference minimisers.
        let s = saddle_point(2.0, 1e-12).unwrap();
        assert!((s.u0 - 1.382_658_197_216_897_3).abs() < 1e-11);
        assert!((s.gamma - 0.470_215_442_331_190_9).abs() < 1e-12);
        assert!((s.f2_u0 - 0.276_755_454_086_292_7).abs() < 1e-8);
    }

    #[test]
    fn single_mode_mean_gain_is_exp_g() {
        for g in [0.25, 0.5, 1.0, 2.0, 4.0] {
            let r = mean_gain_exact(&ModelParams::new(1, 0, g).unwrap()).unwrap();
            assert!(
                (r.log_mean_gain - g).abs() < 1e-10,
                "g = {g}: {}",
                r.log_mean_gain
            );
        }
    }

    #[test]
    fn report_fields() {
        let sub = mean_gain_exact(&ModelParams::new(1, 3, 0.5).unwrap()).unwrap();
        assert_eq!(sub.regime, Regime::Subcritical);
        assert!((sub.upper_bound_log - 2f64.ln()).abs() < 1e-15);
        assert!(sub.asymptotic_log.is_none());
        assert!(sub.log_mean_gain >= 0.0 && sub.log_mean_gain <= sub.upper_bound_log);

        let sup = mean_gain_exact(&ModelParams::new(1, 3, 2.0).unwrap()).unwrap();
        assert_eq!(sup.regime, Regime::Supercritical);
        assert!(sup.upper_bound_log.is_infinite());
        assert!(sup.asymptotic_log.is_some());

        let crit = mean_gain_exact(&ModelParams::new(2, 3, 1.0).unwrap()).unwrap();
        assert_eq!(crit.regime, Regime::Critical);
        assert!(crit.asymptotic_log.is_none());
    }

    #[test]
    fn asymptotic_formula_instantiation() {
        let params = ModelParams::new(1, 12, 2.0).unwrap();
        let s = saddle_point(2.0, 1e-12).unwrap();
        let expected = s.gamma * 25.0 + 0.5 * 25f64.ln() + 0.5 * (2.0 * PI / s.f2_u0).ln();
        assert!((mean_gain_asymptotic(&params, &s).unwrap() - expected).abs() < 1e-12);

        let sub = ModelParams::new(1, 12, 0.5).unwrap();
        assert!(mean_gain_asymptotic(&sub, &s).is_err());
        let other = ModelParams::new(1, 12, 3.0).unwrap();
        assert!(matches!(
            mean_gain_asymptotic(&other, &s),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn asymptotic_near_threshold_is_prefactor_only() {
        let g = 1.0 + 1e-6;
        let s = saddle_point(g, 1e-12).unwrap();
        let params = ModelParams::new(1, 5, g).unwrap();
        let prefactor = 0.5 * 11f64.ln() + 0.5 * (2.0 * PI / s.f2_u0).ln();
        assert!((mean_gain_asymptotic(&params, &s).unwrap() - prefactor).abs() < 1e-9);
    }
}
