//! The subcommands. Each turns a resolved configuration into a table plus
//! optional JSON and SVG side outputs.

use std::sync::Arc;

use kzwork::dynamics::{ExcitationModel, Registry, Spectrum};
use kzwork::ising::{adiabatic_work_per_site, ChainSize, QuenchProtocol};
use kzwork::ldp::{find_dqpt, rate_function, RateStatus, Scgf};
use kzwork::scaling::{
    fit_fixed_power, fit_power_law, predict_delta, sweep_cumulants, CriticalExponents, ExponentPrediction, ScalingFit,
};
use kzwork::workstats::{cfw_finite_t, cfw_zero_t, cumulants_finite_t, cumulants_zero_t};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{Cell, Column, ResultTable};
use crate::svg;
use crate::CliError;

pub struct Outcome {
    pub table: ResultTable,
    pub json: Option<serde_json::Value>,
    pub svg: Option<String>,
    /// Line printed to stdout when the table goes to a file.
    pub summary: Option<String>,
}

impl Outcome {
    fn table(table: ResultTable) -> Self {
        Outcome {
            table,
            json: None,
            svg: None,
            summary: None,
        }
    }
}

const ENERGY_POWERS: [&str; 6] = ["energy", "energy^2", "energy^3", "energy^4", "energy^5", "energy^6"];

fn model(cfg: &RunConfig) -> Result<Arc<dyn ExcitationModel>, CliError> {
    Registry::standard()
        .get(cfg.protocol.method.name())
        .map_err(|e| CliError::Config(format!("protocol.method: {e}")))
}

fn spectrum(cfg: &RunConfig, protocol: &QuenchProtocol) -> Result<Spectrum, CliError> {
    let m = model(cfg)?;
    Ok(match cfg.protocol.n {
        ChainSize::Continuum => Spectrum::continuum(protocol, m)?,
        ChainSize::Finite(n) => Spectrum::finite(protocol, n, m.as_ref())?,
    })
}

fn check_order(cfg: &RunConfig) -> Result<usize, CliError> {
    let n = cfg.protocol.n_max;
    let max = if cfg.protocol.beta.is_some() { 2 } else { 6 };
    if n > max {
        return Err(CliError::Config(format!(
            "protocol.n_max: {n} exceeds {max} for this temperature"
        )));
    }
    Ok(n)
}

fn cumulant_columns(n_max: usize, with_kappa1: bool) -> Vec<Column> {
    let mut cols = vec![Column::new("v", "energy"), Column::new("mu", "energy")];
    if with_kappa1 {
        cols.push(Column::new("kappa1", "energy"));
    }
    cols.push(Column::new("kappa1_excess", "energy"));
    for n in 2..=n_max {
        cols.push(Column::new(format!("kappa{n}"), ENERGY_POWERS[n - 1]));
    }
    cols
}

/// Per-site cumulants at one rate.
pub fn cumulants(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let protocol = cfg.protocol()?;
    let n_max = check_order(cfg)?;
    let spec = spectrum(cfg, &protocol)?;
    let mut c = if protocol.is_zero_temperature() {
        cumulants_zero_t(&protocol, &spec, n_max)?
    } else {
        cumulants_finite_t(&protocol, &spec)?
    };
    c.values.truncate(n_max);
    let mu = match c.mu {
        Some(m) => m,
        None => adiabatic_work_per_site(&protocol, spec.size())?,
    };
    let excess = c.kappa1_excess.unwrap_or(c.values[0] - mu);
    let mut table = ResultTable::new(cumulant_columns(n_max, true));
    let mut row = vec![Cell::Num(protocol.v), Cell::Num(mu), Cell::Num(c.values[0]), Cell::Num(excess)];
    row.extend(c.values[1..].iter().map(|&x| Cell::Num(x)));
    table.push(row);
    Ok(Outcome::table(table))
}

#[derive(Debug, Serialize)]
struct CumulantFit {
    cumulant: String,
    predicted: ExponentPrediction,
    /// Sign of the column; fits use its magnitude.
    sign: f64,
    power_law: ScalingFit,
    with_log: Option<ScalingFit>,
    fixed_square: Option<ScalingFit>,
}

#[derive(Debug, Serialize)]
struct SweepSummary {
    end_at_critical: bool,
    fits: Vec<CumulantFit>,
}

/// Cumulants over a grid of rates with power-law fits per column.
pub fn sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let v_list = cfg.v_grid()?;
    let n_max = check_order(cfg)?;
    for &v in &v_list {
        cfg.protocol_at(v)?;
    }
    let template = cfg.protocol_at(v_list[0])?;
    let rows = sweep_cumulants(&template, &v_list, n_max, model(cfg)?, cfg.protocol.n)?;

    let mut table = ResultTable::new(cumulant_columns(n_max, false));
    for r in &rows {
        let mu = r.cumulants.mu.unwrap_or(0.0);
        let mut row = vec![Cell::Num(r.v), Cell::Num(mu)];
        row.extend((1..=n_max).map(|n| Cell::Num(r.column(n))));
        table.push(row);
    }

    let (lo, hi) = (cfg.grid.fit_min, cfg.grid.fit_max);
    let in_window: Vec<_> = rows.iter().filter(|r| r.v >= lo * (1.0 - 1e-12) && r.v <= hi * (1.0 + 1e-12)).collect();
    let critical_end = template.lambda1 == 0.0 || template.lambda1 == 2.0;
    let mut fits = Vec::new();
    let mut series = Vec::new();
    for n in 1..=n_max {
        let name = if n == 1 { "kappa1_excess".to_string() } else { format!("kappa{n}") };
        let predicted = predict_delta(CriticalExponents::ising(), n as u32, critical_end)?;
        let pts: Vec<(f64, f64)> = in_window.iter().map(|r| (r.v, r.column(n).abs())).collect();
        let sign = in_window.iter().map(|r| r.column(n)).sum::<f64>().signum();
        let power_law = fit_power_law(&pts, false).map_err(|e| CliError::Numerical(format!("{name}: {e}")))?;
        let (with_log, fixed_square) = if predicted.log_correction {
            (Some(fit_power_law(&pts, true)?), Some(fit_fixed_power(&pts, 2.0)?))
        } else {
            (None, None)
        };
        let all: Vec<(f64, f64)> = rows.iter().map(|r| (r.v, r.column(n).abs())).collect();
        let (a, d) = (power_law.prefactor, power_law.exponent);
        series.push(svg::Series {
            label: format!("|{name}|"),
            points: all,
            fit: Some((Box::new(move |v: f64| a * v.powf(d)) as Box<dyn Fn(f64) -> f64>, format!("delta = {d:.3}"))),
        });
        fits.push(CumulantFit {
            cumulant: name,
            predicted,
            sign,
            power_law,
            with_log,
            fixed_square,
        });
    }
    let summary_line = fits
        .iter()
        .map(|f| format!("{} exponent {:.4}", f.cumulant, f.power_law.exponent))
        .collect::<Vec<_>>()
        .join(", ");
    let json = serde_json::to_value(SweepSummary {
        end_at_critical: critical_end,
        fits,
    })
    .map_err(CliError::io)?;
    let svg = cfg.output.svg.as_ref().map(|_| {
        svg::loglog(
            &format!("cumulants per site, lambda0 = {}, lambda1 = {}", template.lambda0, template.lambda1),
            "v",
            "|kappa_n| / N",
            &series,
        )
    });
    Ok(Outcome {
        table,
        json: Some(json),
        svg,
        summary: Some(summary_line),
    })
}

/// Samples of `ln chi(u) / N`.
pub fn cfw(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let protocol = cfg.protocol()?;
    let u = cfg.u_grid()?;
    let spec = spectrum(cfg, &protocol)?;
    let samples = if protocol.is_zero_temperature() {
        cfw_zero_t(&protocol, &spec, &u)?
    } else {
        cfw_finite_t(&protocol, &spec, &u)?
    };
    let mut table = ResultTable::new(vec![
        Column::new("u", "1/energy"),
        Column::new("re_lnchi_per_site", "1"),
        Column::new("im_lnchi_per_site", "1"),
        Column::new("branch_flags", "-"),
    ]);
    for ((u, z), f) in samples.u_grid.iter().zip(&samples.log_chi_per_site).zip(&samples.flags) {
        table.push(vec![Cell::Num(*u), Cell::Num(z.re), Cell::Num(z.im), Cell::Text(f.describe())]);
    }
    Ok(Outcome::table(table))
}

fn require_ground_state(protocol: &QuenchProtocol) -> Result<(), CliError> {
    if !protocol.is_zero_temperature() {
        return Err(CliError::Config("protocol.beta: this command needs beta = \"inf\"".into()));
    }
    Ok(())
}

/// Large-deviation rate function of the work per site.
pub fn rate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let protocol = cfg.protocol()?;
    require_ground_state(&protocol)?;
    let spec = spectrum(cfg, &protocol)?;
    let g = Scgf::new(&protocol, &spec)?;
    let mean = g.derivative(0.0)?;
    let (_, upper) = g.range()?;
    let lo = cfg.grid.w_min.unwrap_or(g.mu());
    let hi = cfg.grid.w_max.unwrap_or_else(|| (mean + 3.0 * (mean - g.mu())).min(upper));
    if !(hi >= lo) {
        return Err(CliError::Config("grid.w_min: need w_min <= w_max".into()));
    }
    if cfg.grid.w_points == 0 {
        return Err(CliError::Config("grid.w_points: empty w grid".into()));
    }
    let mut w = kzwork::ldp::w_grid(lo, hi, cfg.grid.w_points);
    if !w.contains(&mean) && mean > lo && mean < hi {
        let at = w.partition_point(|&x| x < mean);
        w.insert(at, mean);
    }
    let r = rate_function(&protocol, &spec, &w)?;
    let mut table = ResultTable::new(vec![
        Column::new("w", "energy"),
        Column::new("rate", "1"),
        Column::new("s_star", "1/energy"),
        Column::new("status", "-"),
    ]);
    for i in 0..w.len() {
        let status = match r.status[i] {
            RateStatus::Interior => "interior",
            RateStatus::Boundary => "boundary",
            RateStatus::Saturated => "saturated",
            RateStatus::Forbidden => "forbidden",
        };
        table.push(vec![
            Cell::Num(w[i]),
            Cell::Num(r.i_values[i]),
            r.s_star[i].map(Cell::Num).unwrap_or_else(|| Cell::Text(String::new())),
            Cell::Text(status.into()),
        ]);
    }
    Ok(Outcome {
        table,
        json: None,
        svg: None,
        summary: Some(format!("mean work per site {mean:.10e}")),
    })
}

/// Zeros of the zero-temperature CFW on the real u axis.
pub fn dqpt(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let protocol = cfg.protocol()?;
    require_ground_state(&protocol)?;
    if cfg.protocol.n != ChainSize::Continuum {
        return Err(CliError::Config(
            "protocol.N: zeros are located in the continuum only (N = \"continuum\")".into(),
        ));
    }
    let spec = spectrum(cfg, &protocol)?;
    let points = find_dqpt(&protocol, &spec, cfg.grid.u_max)?;
    let mut table = ResultTable::new(vec![
        Column::new("k_star", "1"),
        Column::new("p", "1"),
        Column::new("omega1", "energy"),
        Column::new("m", "-"),
        Column::new("u_star", "1/energy"),
        Column::new("residual", "1"),
    ]);
    for p in &points {
        for (m, (u, res)) in p.u_star.iter().zip(&p.residuals).enumerate() {
            table.push(vec![
                Cell::Num(p.k_star),
                Cell::Num(p.p_at_k_star),
                Cell::Num(p.omega1),
                Cell::Int(m as i64),
                Cell::Num(*u),
                Cell::Num(*res),
            ]);
        }
    }
    let count: usize = points.iter().map(|p| p.u_star.len()).sum();
    Ok(Outcome {
        table,
        json: Some(serde_json::to_value(&points).map_err(CliError::io)?),
        svg: None,
        summary: Some(format!("{count} zeros up to u = {}", cfg.grid.u_max)),
    })
}

/// Piecewise Kibble-Zurek exponent for given critical exponents.
pub fn predict(d: u32, z: f64, nu: f64, n: u32, critical: bool) -> Result<Outcome, CliError> {
    let ex = CriticalExponents::new(d, z, nu).map_err(|e| CliError::Config(format!("exponents: {e}")))?;
    let p = predict_delta(ex, n, critical).map_err(|e| CliError::Config(format!("n: {e}")))?;
    let mut table = ResultTable::new(vec![
        Column::new("d", "-"),
        Column::new("z", "1"),
        Column::new("nu", "1"),
        Column::new("n", "-"),
        Column::new("end_at_critical", "-"),
        Column::new("delta", "1"),
        Column::new("log_correction", "-"),
    ]);
    table.push(vec![
        Cell::Int(d as i64),
        Cell::Num(z),
        Cell::Num(nu),
        Cell::Int(n as i64),
        Cell::Text(critical.to_string()),
        Cell::Num(p.delta),
        Cell::Text(p.log_correction.to_string()),
    ]);
    Ok(Outcome {
        table,
        json: Some(serde_json::to_value(p).map_err(CliError::io)?),
        svg: None,
        summary: Some(p.to_string()),
    })
}
