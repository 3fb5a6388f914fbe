//! Experiment drivers. Each produces a [`Table`]; realizations fan out over
//! the current rayon pool and are reduced in index order.

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind};
use super::table::{float, median, opt_float, Table};
use crate::diagnostics::{
    chain_report, ergodic_ratio_log, resolved_grid, spatial_moments, Refinement,
};
use crate::error::{Error, Result};
use crate::field::{appendix_bound, intensity_grid, sample_phases, sup_intensity, ModelParams};
use crate::moments::{
    mean_gain_exact, rate_function_derivative, saddle_point, MomentReport, SADDLE_TOL,
};
use crate::oracles::{mc_mean_gain, series_mean_gain, series_terms_needed};

/// Runs `config` on a dedicated pool of `workers` threads (all cores when
/// `None`).
pub fn run_experiment(config: &ExperimentConfig, workers: Option<usize>) -> Result<Table> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match config.kind {
        ExperimentKind::MeanGain => run_mean_gain(config),
        ExperimentKind::Saddle => run_saddle(config),
        ExperimentKind::ScanErgodicity => run_scan_ergodicity(config),
        ExperimentKind::ScanChain => run_scan_chain(config),
        ExperimentKind::Supnorm => run_supnorm(config),
        ExperimentKind::OracleCheck => run_oracle_check(config),
    })
}

fn params_for(
    config: &ExperimentConfig,
    dim: usize,
    cutoff: usize,
    gain: f64,
) -> Result<ModelParams> {
    Ok(ModelParams::new(dim, cutoff, gain)?
        .with_oversample(config.oversample)?
        .with_seed(config.master_seed))
}

/// All `(d, N, g)` combinations, `d` slowest.
fn sweep(config: &ExperimentConfig) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for &d in &config.dims {
        for &n in &config.cutoffs {
            for &g in &config.gains {
                out.push((d, n, g));
            }
        }
    }
    out
}

fn fan_out<T: Send>(count: u64, task: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..count).into_par_iter().map(task).collect()
}

fn refinement(config: &ExperimentConfig) -> Refinement {
    Refinement {
        start: config.oversample,
        ..Refinement::default()
    }
}

pub fn run_mean_gain(config: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(vec![
        "d",
        "N",
        "g",
        "log_mean_gain",
        "upper_bound_log",
        "asymptotic_log",
        "regime",
    ]);
    for (d, n, g) in sweep(config) {
        let report = mean_gain_exact(&params_for(config, d, n, g)?)?;
        table.push(vec![
            d.to_string(),
            n.to_string(),
            float(g),
            float(report.log_mean_gain),
            float(report.upper_bound_log),
            opt_float(report.asymptotic_log),
            report.regime.to_string(),
        ]);
    }
    Ok(table)
}

pub fn run_saddle(config: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(vec!["g", "u0", "gamma_g", "f2_u0", "fprime_u0"]);
    for &g in &config.gains {
        let s = saddle_point(g, SADDLE_TOL)?;
        table.push(vec![
            float(g),
            float(s.u0),
            float(s.gamma),
            float(s.f2_u0),
            float(rate_function_derivative(g, s.u0)?),
        ]);
    }
    Ok(table)
}

pub fn run_scan_ergodicity(config: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(vec![
        "d",
        "g",
        "N",
        "realization",
        "oversample",
        "log_m1",
        "log_mean_gain",
        "log_ratio",
    ]);
    let policy = refinement(config);
    for (d, n, g) in sweep(config) {
        let params = params_for(config, d, n, g)?;
        let report = mean_gain_exact(&params)?;
        let rows = fan_out(config.realizations, |r| {
            let phases = sample_phases(&params, r);
            let (grid, c) = resolved_grid(&phases, g, &policy)?;
            let moments = spatial_moments(&grid, g, 1)?;
            Ok((c, moments.log_m[1], ergodic_ratio_log(&moments, &report)?))
        })?;
        let prefix = [d.to_string(), float(g), n.to_string()];
        for (r, (c, log_m1, ratio)) in rows.iter().enumerate() {
            let mut row = prefix.to_vec();
            row.extend([
                r.to_string(),
                c.to_string(),
                float(*log_m1),
                float(report.log_mean_gain),
                float(*ratio),
            ]);
            table.push(row);
        }
        let log_m1: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let ratios: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let mut row = prefix.to_vec();
        row.extend([
            "median".to_string(),
            String::new(),
            float(median(&log_m1)),
            float(report.log_mean_gain),
            float(median(&ratios)),
        ]);
        table.push(row);
    }
    Ok(table)
}

pub const CHAIN_HEADER: [&str; 13] = [
    "d",
    "g",
    "N",
    "realization",
    "oversample",
    "p",
    "log_m_p",
    "L_p",
    "concentration_p",
    "log_f_p",
    "exceedance_p",
    "markov_bound_p",
    "log_ratio",
];

pub fn run_scan_chain(config: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(CHAIN_HEADER.to_vec());
    let policy = refinement(config);
    let p_max = config.p_max;
    for (d, n, g) in sweep(config) {
        let params = params_for(config, d, n, g)?;
        let report: MomentReport = mean_gain_exact(&params)?;
        let reports = fan_out(config.realizations, |r| {
            let phases = sample_phases(&params, r);
            let (grid, c) = resolved_grid(&phases, g * p_max as f64, &policy)?;
            chain_report(&grid, r, c, &report, p_max)
        })?;
        let prefix = [d.to_string(), float(g), n.to_string()];
        for rep in &reports {
            for p in 1..=p_max {
                let check = &rep.exceedance[p - 1];
                let mut row = prefix.to_vec();
                row.extend([
                    rep.index.to_string(),
                    rep.oversample.to_string(),
                    p.to_string(),
                    float(rep.moments.log_m[p]),
                    opt_float(rep.log_ratios.get(p - 1).copied()),
                    float(rep.concentration[p - 1]),
                    float(check.log_f),
                    float(check.fraction),
                    float(check.bound),
                    float(rep.log_ergodic_ratio),
                ]);
                table.push(row);
            }
        }
        for p in 1..=p_max {
            let col = |f: &dyn Fn(&crate::diagnostics::ChainReport) -> f64| {
                median(&reports.iter().map(f).collect::<Vec<_>>())
            };
            let l_p = (p < p_max).then(|| col(&|r| r.log_ratios[p - 1]));
            let mut row = prefix.to_vec();
            row.extend([
                "median".to_string(),
                String::new(),
                p.to_string(),
                float(col(&|r| r.moments.log_m[p])),
                opt_float(l_p),
                float(col(&|r| r.concentration[p - 1])),
                float(col(&|r| r.exceedance[p - 1].log_f)),
                float(col(&|r| r.exceedance[p - 1].fraction)),
                float(col(&|r| r.exceedance[p - 1].bound)),
                float(col(&|r| r.log_ergodic_ratio)),
            ]);
            table.push(row);
        }
    }
    Ok(table)
}

pub fn run_supnorm(config: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(vec![
        "d",
        "N",
        "alpha",
        "realization",
        "sup_intensity",
        "bound",
        "violated",
    ]);
    for &d in &config.dims {
        for &n in &config.cutoffs {
            // Gain plays no role here.
            let params = params_for(config, d, n, 1.0)?;
            let bound = appendix_bound(n, d, config.alpha)?;
            let sups = fan_out(config.realizations, |r| {
                Ok(sup_intensity(&intensity_grid(
                    &sample_phases(&params, r),
                    config.oversample,
                )?))
            })?;
            let prefix = [d.to_string(), n.to_string(), float(config.alpha)];
            let mut violations = 0usize;
            for (r, &sup) in sups.iter().enumerate() {
                let violated = sup >= bound;
                violations += violated as usize;
                let mut row = prefix.to_vec();
                row.extend([
                    r.to_string(),
                    float(sup),
                    float(bound),
                    (violated as u8).to_string(),
                ]);
                table.push(row);
            }
            let mut row = prefix.to_vec();
            row.extend([
                "rate".to_string(),
                float(median(&sups)),
                float(bound),
                float(violations as f64 / sups.len() as f64),
            ]);
            table.push(row);
        }
    }
    Ok(table)
}

/// Absolute agreement demanded of the moment series against quadrature.
pub const SERIES_AGREEMENT: f64 = 1e-8;

/// Monte Carlo agreement, in standard errors.
pub const MC_SIGMAS: f64 = 4.0;

pub fn run_oracle_check(config: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(vec!["route", "configuration", "value", "tolerance", "pass"]);
    for (d, n, g) in sweep(config) {
        let params = params_for(config, d, n, g)?;
        let modes = params.side();
        let label = format!("d={d};N={n};M={modes};g={g}");
        let reference = mean_gain_exact(&params)?.log_mean_gain.exp();
        let mut push = |route: &str, value: f64, tol: f64| {
            table.push(vec![
                route.to_string(),
                label.clone(),
                float(value),
                float(tol),
                ((value - reference).abs() <= tol).to_string(),
            ]);
        };
        push("quadrature", reference, 0.0);
        if n == 0 {
            push("closed-form", g.exp(), 1e-10 * g.exp());
        }
        if let Some(k_max) = series_terms_needed(modes, g) {
            let s = series_mean_gain(modes, g, k_max)?;
            push("series", s.value, SERIES_AGREEMENT);
        }
        let mc = mc_mean_gain(&params, config.realizations)?;
        push(
            "monte-carlo",
            mc.mean,
            (MC_SIGMAS * mc.std_error).max(1e-10 * reference),
        );
    }
    Ok(table)
}
