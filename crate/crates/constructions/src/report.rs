//! Error-versus-budget ladders for the four constructions.

use crate::advection::{build_adv_fno, build_adv_sdon};
use crate::burgers::{build_burg_fno, build_burg_sdon};
use crate::mc::par_map;
use crate::{ConstructionError, Result};
use hyperop_core::exact_pde::BoxWaveParams;
use hyperop_core::measures::{sample_box, substream};
use hyperop_core::stats;
use hyperop_nets::operator_nets::ModelSize;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::Write;

/// Midpoints per period used for the Burgers error integrals.
pub const PROFILE_LATTICE: usize = 1 << 14;

/// Which construction to run; the budget axis is `m` for the advection
/// shift-DeepONet, `N` for the advection FNO and `eps` for both Burgers nets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Builder {
    AdvSdon { eps: f64 },
    AdvFno,
    BurgSdon { t: f64 },
    BurgFno { t: f64, n: usize },
}

impl Builder {
    pub fn name(&self) -> &'static str {
        match self {
            Builder::AdvSdon { .. } => "adv-sdon",
            Builder::AdvFno => "adv-fno",
            Builder::BurgSdon { .. } => "burg-sdon",
            Builder::BurgFno { .. } => "burg-fno",
        }
    }

    pub fn budget_kind(&self) -> &'static str {
        match self {
            Builder::AdvSdon { .. } => "m",
            Builder::AdvFno => "N",
            _ => "eps",
        }
    }

    /// Error scale the constructions are expected to track.
    fn rate(&self, budget: f64) -> f64 {
        match self {
            Builder::AdvSdon { eps } => eps + 1.0 / budget,
            Builder::AdvFno => 1.0 / budget,
            _ => budget,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub budget: f64,
    pub size: usize,
    pub depth: usize,
    pub width: usize,
    pub mean_err: f64,
    pub median_err: f64,
}

/// Least-squares line `y = slope·x + intercept` with its residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub x: String,
    pub y: String,
    pub slope: f64,
    pub intercept: f64,
    pub residuals: Vec<f64>,
}

impl Fit {
    fn new(x: &str, y: &str, xs: &[f64], ys: &[f64]) -> Option<Self> {
        let line = stats::fit_line(xs, ys)?;
        let residuals = xs.iter().zip(ys).map(|(x, y)| y - line.slope * x - line.intercept).collect();
        Some(Self { x: x.into(), y: y.into(), slope: line.slope, intercept: line.intercept, residuals })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    pub builder: Builder,
    pub budget_kind: String,
    pub n_mc: usize,
    pub seed: u64,
    pub rows: Vec<ReportRow>,
    /// `log(mean_err)` against `log(budget)`.
    pub error_fit: Option<Fit>,
    /// `log(size)` against `log(log(1/eps))`, for eps budgets.
    pub size_fit: Option<Fit>,
    /// Largest `mean_err / rate(budget)` with rate `eps + 1/m`, `1/N` or `eps`.
    pub rate_constant: f64,
    pub notes: Vec<String>,
    #[serde(default)]
    pub config_hash: Option<String>,
}

impl ConstructionReport {
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "budget,size,depth,width,mean_err,median_err")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{},{}", r.budget, r.size, r.depth, r.width, r.mean_err, r.median_err)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

fn as_count(b: f64, kind: &str) -> Result<usize> {
    if b >= 1.0 && b.fract() == 0.0 && b < 1e9 {
        Ok(b as usize)
    } else {
        Err(ConstructionError::Precondition(format!("{kind} = {b} is not a positive integer")))
    }
}

/// Stratified phases `2π(i + U_i)/n`.
pub fn phase_draws(n: usize, seed: u64) -> Vec<f64> {
    (0..n).map(|i| TAU * (i as f64 + substream(seed, i as u64).random::<f64>()) / n as f64).collect()
}

/// Box parameters for draw `i` of the default advection measure.
pub fn box_draws(n: usize, seed: u64) -> Result<Vec<BoxWaveParams>> {
    let spec = crate::advection::AdvectionSetup::default().measure();
    (0..n).map(|i| Ok(sample_box(&spec, &mut substream(seed, i as u64))?)).collect()
}

/// Builds the network for each budget and estimates its expected L1 error
/// over `n_mc` draws. The same draws are used for every budget.
pub fn scaling_report(builder: &Builder, budgets: &[f64], n_mc: usize, seed: u64, threads: usize) -> Result<ConstructionReport> {
    if budgets.is_empty() {
        return Err(ConstructionError::Precondition("no budgets given".into()));
    }
    if n_mc == 0 {
        return Err(ConstructionError::Precondition("no Monte-Carlo draws".into()));
    }
    let mut notes = Vec::new();
    let mut rows = Vec::with_capacity(budgets.len());
    for &b in budgets {
        let (size, errors): (ModelSize, Vec<f64>) = match *builder {
            Builder::AdvSdon { eps } => {
                let net = build_adv_sdon(eps, as_count(b, "m")?)?;
                let draws = box_draws(n_mc, seed)?;
                (net.operator_model().size(), par_map(n_mc, threads, |i| net.l1_error(&draws[i]))?)
            }
            Builder::AdvFno => {
                let net = build_adv_fno(as_count(b, "N")?)?;
                let draws = box_draws(n_mc, seed)?;
                (net.operator_model().size(), par_map(n_mc, threads, |i| net.l1_error(&draws[i]))?)
            }
            Builder::BurgSdon { t } => {
                let net = build_burg_sdon(b, t)?;
                notes.extend(net.warnings.iter().cloned());
                let lattice = net.lattice(PROFILE_LATTICE)?;
                let xi = phase_draws(n_mc, seed);
                (net.operator_model().size(), par_map(n_mc, threads, |i| net.l1_error(xi[i], &lattice))?)
            }
            Builder::BurgFno { t, n } => {
                let net = build_burg_fno(b, t, n)?;
                notes.extend(net.warnings.iter().cloned());
                let lattice = net.lattice(PROFILE_LATTICE)?;
                let xi = phase_draws(n_mc, seed);
                (net.operator_model().size(), par_map(n_mc, threads, |i| net.l1_error(xi[i], &lattice))?)
            }
        };
        rows.push(ReportRow {
            budget: b,
            size: size.size,
            depth: size.depth,
            width: size.width,
            mean_err: stats::mean(&errors),
            median_err: stats::median(&errors),
        });
    }
    notes.dedup();
    let distinct = {
        let mut v: Vec<f64> = budgets.to_vec();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.len()
    };
    let (error_fit, size_fit) = if distinct < 2 {
        notes.push("single budget: no fit".into());
        (None, None)
    } else {
        let lb: Vec<f64> = rows.iter().map(|r| r.budget.ln()).collect();
        let le: Vec<f64> = rows.iter().map(|r| r.mean_err.ln()).collect();
        let error_fit = Fit::new("log budget", "log mean_err", &lb, &le);
        let size_fit = if builder.budget_kind() == "eps" {
            let ll: Vec<f64> = rows.iter().map(|r| (1.0 / r.budget).ln().ln()).collect();
            let ls: Vec<f64> = rows.iter().map(|r| (r.size as f64).ln()).collect();
            Fit::new("log log(1/eps)", "log size", &ll, &ls)
        } else {
            None
        };
        (error_fit, size_fit)
    };
    let rate_constant = rows.iter().map(|r| r.mean_err / builder.rate(r.budget)).fold(0.0, f64::max);
    Ok(ConstructionReport {
        builder: *builder,
        budget_kind: builder.budget_kind().into(),
        n_mc,
        seed,
        rows,
        error_fit,
        size_fit,
        rate_constant,
        notes,
        config_hash: None,
    })
}
