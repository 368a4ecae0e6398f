use std::path::Path;

use clap::ValueEnum;
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use gwde_core::dimension::{bad_set_dimension, dimension_curve, entropy_oracle, BadSetDimension};
use gwde_core::dynamics::{CirclePoint, EnvironmentMap, PeriodicOrbit};
use gwde_core::ergodic::{
    classify, fibre_exponent, fibre_rate_check, CriticalityReport, FibreExponentReport, FibreRate,
};
use gwde_core::extinction::{
    convergence_profile, holder_seminorm, pgf_iterate, residual, solve_lower, solve_q,
    ExtinctionError, ExtinctionSolution, GridFunction, HolderReport,
};
use gwde_core::reproduction::ReproductionFamily;
use gwde_core::simulate::{extinction_frequency, simulate_trajectory, ExtinctionEstimate};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{Cell, OutputDir};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Extinction,
    Classify,
    Dimension,
    Simulate,
    Lyapunov,
    Holder,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Extinction => "extinction",
            Command::Classify => "classify",
            Command::Dimension => "dimension",
            Command::Simulate => "simulate",
            Command::Lyapunov => "lyapunov",
            Command::Holder => "holder",
        }
    }
}

/// Runs `command` and writes its files under `dir`. Files written before a
/// soft failure stay in place.
pub fn run(command: Command, config: &RunConfig, dir: &Path) -> Result<OutputDir, CliError> {
    config.validate()?;
    let mut out = OutputDir::create(
        dir,
        config.output.format,
        command.name(),
        &config.hash(),
        config.run.seed,
    )?;
    std::fs::write(dir.join("run_config.txt"), config.emit())?;
    info!("{} → {}", command.name(), dir.display());
    match command {
        Command::Extinction => extinction(config, &mut out),
        Command::Classify => classify_cmd(config, &mut out),
        Command::Dimension => dimension(config, &mut out),
        Command::Simulate => simulate(config, &mut out),
        Command::Lyapunov => lyapunov(config, &mut out),
        Command::Holder => holder(config, &mut out),
    }?;
    Ok(out)
}

#[derive(Serialize)]
struct ExtinctionReport {
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    grid: usize,
    tol: f64,
    residual: f64,
    constant_one_residual: f64,
    bracket_width: Option<f64>,
    #[serde(rename = "K")]
    k: Option<f64>,
    #[serde(rename = "N")]
    n: Option<usize>,
    q_min: f64,
    q_max: f64,
    q_at_zero: f64,
}

fn grid_rows(sol: &ExtinctionSolution<f64>, status: &str) -> Vec<Vec<Cell>> {
    let q = &sol.q;
    (0..q.len())
        .map(|j| {
            let (lo, hi) = match &sol.certificate {
                Some(c) => (Some(c.lower.samples[j]), Some(c.upper.samples[j])),
                None => (None, None),
            };
            vec![
                q.node(j).value().into(),
                q.samples[j].into(),
                lo.into(),
                hi.into(),
                status.into(),
            ]
        })
        .collect()
}

fn extinction(config: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let map = config.environment();
    let family = &config.family;
    let e = &config.extinction;
    let header = ["x", "q", "lower", "upper", "status"];
    let (sol, status, reason) = match solve_q(&map, family, e.grid, e.tol, e.max_blocks) {
        Ok(sol) => (sol, "certified", None),
        Err(ExtinctionError::NoUpperBracket { reason }) => {
            warn!("no upper bracket ({reason}); writing the lower iterate");
            let lower = solve_lower(&map, family, e.grid, e.tol, e.max_blocks)?;
            (
                ExtinctionSolution {
                    q: lower,
                    certificate: None,
                },
                "lower-only",
                Some(reason),
            )
        }
        Err(err) => return Err(err.into()),
    };
    out.table("q", &header, &grid_rows(&sol, status))?;
    out.report("q", &sol)?;
    let cert = sol.certificate.as_ref();
    let report = ExtinctionReport {
        status,
        reason: reason.clone(),
        grid: e.grid,
        tol: e.tol,
        residual: residual(&map, family, &sol.q),
        constant_one_residual: residual(&map, family, &GridFunction::constant(e.grid, 1.0)),
        bracket_width: cert.map(|c| c.width),
        k: cert.map(|c| c.k),
        n: cert.map(|c| c.block),
        q_min: sol.q.min(),
        q_max: sol.q.max(),
        q_at_zero: sol.q.samples[0],
    };
    out.report("extinction_report", &report)?;
    match reason {
        Some(r) => Err(CliError::Partial(format!("no upper bracket: {r}"))),
        None => Ok(()),
    }
}

fn orbit_text(orbit: &PeriodicOrbit<f64>) -> String {
    match &orbit.exact {
        Some(points) => points.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(" "),
        None => orbit
            .points
            .iter()
            .map(|p| format!("{:.16e}", p.value()))
            .collect::<Vec<_>>()
            .join(" "),
    }
}

fn reparametrised(
    family: &ReproductionFamily<f64>,
    value: f64,
) -> Result<ReproductionFamily<f64>, CliError> {
    family.with_parameter(value).ok_or_else(|| {
        CliError::Precondition(format!("family cannot take parameter value {value}"))
    })
}

fn classify_cmd(config: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let map = config.environment();
    let c = &config.classify;
    let report = classify(&map, &config.family, c.max_period, c.probe_len)?;
    out.report("classify_report", &report)?;
    if c.lambdas.is_empty() {
        return Ok(());
    }
    let families = c
        .lambdas
        .iter()
        .map(|&l| reparametrised(&config.family, l))
        .collect::<Result<Vec<_>, _>>()?;
    let reports: Vec<CriticalityReport<f64>> = families
        .iter()
        .map(|f| classify(&map, f, c.max_period, c.probe_len))
        .collect::<Result<_, _>>()?;
    let rows: Vec<Vec<Cell>> = c
        .lambdas
        .iter()
        .zip(&reports)
        .map(|(&l, r)| {
            vec![
                l.into(),
                r.lambda_min.into(),
                r.lambda_max.into(),
                r.regime.as_str().into(),
                orbit_text(&r.witness_min).into(),
                orbit_text(&r.witness_max).into(),
            ]
        })
        .collect();
    out.table(
        "regime_line",
        &["lambda", "lambda_min", "lambda_max", "regime", "witness_min", "witness_max"],
        &rows,
    )?;
    Ok(())
}

struct AppendixRow {
    lambda: f64,
    d: f64,
    coarse: Option<f64>,
    oracle: Option<f64>,
}

fn dimension(config: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let map = config.environment();
    let d = &config.dimension;
    let grid = match &d.lambdas {
        Some(g) => g.clone(),
        None => vec![config.family.parameter().ok_or_else(|| {
            CliError::Precondition("dimension.lambdas is required for this family".into())
        })?],
    };
    if grid.is_empty() {
        out.table("dimension_curve", &CURVE_HEADER, &[])?;
        out.table("dimension_appendix", &APPENDIX_HEADER, &[])?;
        return Ok(());
    }
    let curve = dimension_curve(&map, &config.family, &grid, d.depth, d.tol)?;
    let rows: Vec<Vec<Cell>> = curve
        .iter()
        .map(|p| match &p.outcome {
            Ok(b) => curve_row(p.parameter, b, d.depth),
            Err(e) => {
                let mut row = vec![p.parameter.into()];
                row.extend(std::iter::repeat_n(Cell::Empty, CURVE_HEADER.len() - 2));
                row.push(e.to_string().into());
                row
            }
        })
        .collect();
    out.table("dimension_curve", &CURVE_HEADER, &rows)?;

    let coarse_depth = d.depth.checked_sub(2).filter(|&c| c >= 1);
    let appendix: Vec<AppendixRow> = curve
        .par_iter()
        .filter_map(|p| p.outcome.as_ref().ok().map(|b| (p.parameter, b)))
        .map(|(lambda, b)| {
            let family = config.family.with_parameter(lambda).expect("used for the curve");
            let coarse = coarse_depth
                .and_then(|c| bad_set_dimension(&map, &family, c, d.tol).ok())
                .map(|r| r.dimension);
            let oracle = (!b.plateau)
                .then(|| entropy_oracle(&map, &family, 0.0, d.memory).ok())
                .flatten()
                .map(|o| o.value);
            AppendixRow {
                lambda,
                d: b.dimension,
                coarse,
                oracle,
            }
        })
        .collect();
    let rows: Vec<Vec<Cell>> = appendix
        .iter()
        .map(|r| {
            vec![
                r.lambda.into(),
                r.d.into(),
                r.coarse.into(),
                r.coarse.map(|c| (r.d - c).abs()).into(),
                r.oracle.into(),
                r.oracle.map(|o| (r.d - o).abs()).into(),
            ]
        })
        .collect();
    out.table("dimension_appendix", &APPENDIX_HEADER, &rows)?;
    Ok(())
}

const CURVE_HEADER: [&str; 9] = [
    "lambda",
    "D",
    "t",
    "pressure_residual",
    "constraint_residual",
    "depth",
    "plateau",
    "acip_mean",
    "errors",
];

const APPENDIX_HEADER: [&str; 6] = ["lambda", "D", "D_coarse", "depth_gap", "oracle", "oracle_gap"];

fn curve_row(lambda: f64, b: &BadSetDimension<f64>, depth: usize) -> Vec<Cell> {
    let detail = b.detail.as_ref();
    vec![
        lambda.into(),
        b.dimension.into(),
        detail.map(|r| r.gibbs_parameter).into(),
        detail.map(|r| r.pressure_residual).into(),
        detail.map(|r| r.constraint_residual).into(),
        depth.into(),
        b.plateau.into(),
        b.acip_mean.into(),
        Cell::Empty,
    ]
}

#[derive(Serialize)]
struct SimulationReport {
    estimate: ExtinctionEstimate<f64>,
    pgf_iterate: f64,
    cap: u64,
}

fn simulate(config: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let map = config.environment();
    let s = &config.simulate;
    let x = CirclePoint::new(s.x);
    let seed = config.run.seed;
    let estimate =
        extinction_frequency(&map, &config.family, x, s.generations, s.trials, s.cap, seed)?;
    let exact = pgf_iterate(&map, &config.family, x, 0.0, s.generations)?;
    out.report(
        "simulation",
        &SimulationReport {
            estimate,
            pgf_iterate: exact,
            cap: s.cap,
        },
    )?;
    let traj = simulate_trajectory(&map, &config.family, x, s.generations, s.cap, seed)?;
    let rows: Vec<Vec<Cell>> = traj
        .sizes
        .iter()
        .enumerate()
        .map(|(n, &z)| vec![n.into(), Cell::Int(z as i64)])
        .collect();
    out.table("trajectory", &["generation", "size"], &rows)?;
    Ok(())
}

fn load_or_solve(
    config: &RunConfig,
    map: &EnvironmentMap<f64>,
) -> Result<ExtinctionSolution<f64>, CliError> {
    let e = &config.extinction;
    match &e.q_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|err| CliError::Config(format!("{path}: {err}")))?;
            let sol: ExtinctionSolution<f64> = serde_json::from_str(&text)
                .map_err(|err| CliError::Config(format!("{path}: {err}")))?;
            if !sol.q.len().is_power_of_two() {
                return Err(CliError::Precondition(format!(
                    "{path}: grid of {} points is not a power of two",
                    sol.q.len()
                )));
            }
            Ok(sol)
        }
        None => Ok(solve_q(map, &config.family, e.grid, e.tol, e.max_blocks)?),
    }
}

#[derive(Serialize)]
struct LyapunovReport {
    exponent: FibreExponentReport<f64>,
    rate: FibreRate<f64>,
    slope_within_bracket: bool,
}

fn lyapunov(config: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let map = config.environment();
    let l = &config.lyapunov;
    let sol = load_or_solve(config, &map)?;
    let exponent = fibre_exponent(&map, &config.family, &sol, l.max_period, l.probe_len)?;
    let rate = fibre_rate_check(&map, &config.family, &sol, l.a, l.n_max)?;
    let rows: Vec<Vec<Cell>> = rate
        .sup_averages
        .iter()
        .map(|&(n, v)| vec![n.into(), v.into()])
        .collect();
    out.table("fibre_rate", &["n", "sup_average"], &rows)?;
    let slope_within_bracket = exponent.brackets(rate.slope, 0.05);
    out.report(
        "fibre_report",
        &LyapunovReport {
            exponent,
            rate,
            slope_within_bracket,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct HolderOutput {
    alpha_star: f64,
    beta: f64,
    holder: HolderReport<f64>,
}

fn holder(config: &RunConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let map = config.environment();
    let h = &config.holder;
    let sol = load_or_solve(config, &map)?;
    let l = &config.lyapunov;
    let exponent = fibre_exponent(&map, &config.family, &sol, l.max_period, l.probe_len)?;
    let alpha = h.alpha.unwrap_or(exponent.alpha_star);
    let beta = h.beta.unwrap_or(exponent.alpha_star / 2.0);
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(CliError::Precondition(format!(
            "Hölder exponents must be positive (alpha = {alpha}, beta = {beta})"
        )));
    }
    let report = holder_seminorm(&sol.q, alpha);
    let rows: Vec<Vec<Cell>> = report
        .seminorm_by_scale
        .iter()
        .map(|&(scale, v)| vec![scale.into(), v.into()])
        .collect();
    out.table("holder_scales", &["h", "seminorm"], &rows)?;
    let profile = convergence_profile(&map, &config.family, &sol, beta, h.n_max)?;
    let rows: Vec<Vec<Cell>> = profile
        .iter()
        .map(|r| vec![r.n.into(), r.sup_norm.into(), r.beta_norm.into()])
        .collect();
    out.table("convergence_profile", &["n", "sup_norm", "beta_norm"], &rows)?;
    out.report(
        "holder_report",
        &HolderOutput {
            alpha_star: exponent.alpha_star,
            beta,
            holder: report,
        },
    )?;
    Ok(())
}
