//! Subcommand implementations. Each returns the table, JSON result, optional plot and summary lines.

use std::f64::consts::PI;

use serde_json::{json, Value};
use waveguide_core::certify::{certify, optimal_eta, variational_energy};
use waveguide_core::effective::{effective_mass, large_mass_gap};
use waveguide_core::geometry::{check_width, CurvatureProfile, TubeGeometry};
use waveguide_core::spectrum::discrete_spectrum;
use waveguide_core::strip::StripGrid;
use waveguide_core::transverse::{
    bracket, essential_edge, first_energy, large_mass_check, shifted_square_edge, small_mass_check, solve_root,
};

use crate::config::{RunConfig, SweepConfig, SweepVariable};
use crate::emit::{Cell, Table};
use crate::plot::{Plot, Series, Style};

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    NotConverged(String),
    Io(String),
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::NotConverged(_) => 3,
            Failure::Io(_) | Failure::Internal(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::NotConverged(m) | Failure::Io(m) | Failure::Internal(m) => m,
        }
    }
}

impl From<waveguide_core::Error> for Failure {
    fn from(e: waveguide_core::Error) -> Self {
        use waveguide_core::Error as E;
        let text = e.to_string();
        match e {
            E::NotConverged(r) => Failure::NotConverged(format!(
                "{text}; residuals {:?}",
                r.residuals.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>()
            )),
            E::IndefiniteMass | E::SingularShift { .. } => Failure::NotConverged(text),
            E::Io(_) => Failure::Io(text),
            E::NoSignChange { .. } => Failure::Internal(text),
            _ => Failure::Validation(text),
        }
    }
}

pub type Outcome = Result<Artifacts, Failure>;

pub struct Artifacts {
    pub table: Table,
    pub result: Value,
    pub plot: Option<Plot>,
    pub summary: Vec<String>,
}

fn geometry(cfg: &RunConfig) -> Result<TubeGeometry, Failure> {
    let geom = check_width(CurvatureProfile::new(cfg.curve)?, cfg.epsilon)?;
    Ok(match cfg.grid.s_override {
        Some(s) => geom.with_truncation(s)?,
        None => geom,
    })
}

fn resolve_sweep(cfg: &mut RunConfig, variable: SweepVariable, default: Vec<f64>) -> Result<Vec<f64>, Failure> {
    let values = cfg.sweep_values(variable, default).map_err(Failure::Validation)?;
    cfg.sweep = Some(SweepConfig { variable, values: values.clone() });
    Ok(values)
}

const ROOT_TOL: f64 = 1e-14;

pub fn transverse(cfg: &mut RunConfig) -> Outcome {
    let mass = cfg.mass;
    let mut table = Table::new(&["p", "mass", "E_p", "bracket_lo", "bracket_hi", "residual"]);
    let mut roots = Vec::new();
    for p in cfg.bands.iter() {
        let r = solve_root(mass, p, ROOT_TOL)?;
        let [lo, hi] = bracket(p);
        table.push(vec![Cell::Int(p as i64), Cell::Float(mass), Cell::Float(r.energy), Cell::Float(lo), Cell::Float(hi), Cell::Float(r.residual)]);
        roots.push(r);
    }
    let small: Vec<Value> = [1e-4, 1e-3, 1e-2]
        .iter()
        .map(|&m| Ok(json!({ "mass": m, "deviation": small_mass_check(m)? })))
        .collect::<Result<_, Failure>>()?;
    let large: Vec<Value> = [1e2, 1e3]
        .iter()
        .map(|&m| {
            let e1 = first_energy(m)?;
            Ok(json!({ "mass": m, "deviation": large_mass_check(m)?, "ratio": m * (PI * PI / 4.0 - e1) / (PI * PI / 4.0) }))
        })
        .collect::<Result<_, Failure>>()?;
    let summary = roots
        .iter()
        .map(|r| format!("E_{}({mass}) = {:.15} in [{:.6}, {:.6}), |F| = {:.1e}", r.p, r.energy, r.bracket[0], r.bracket[1], r.residual))
        .collect();
    Ok(Artifacts {
        table,
        result: json!({ "roots": roots, "asymptotics": { "small_mass": small, "large_mass": large } }),
        plot: None,
        summary,
    })
}

pub fn dispersion(cfg: &mut RunConfig) -> Outcome {
    let default: Vec<f64> = (0..=100).map(|i| -5.0 + 0.1 * i as f64).collect();
    let ks = resolve_sweep(cfg, SweepVariable::K, default)?;
    let mass = cfg.mass;
    let mut table = Table::new(&["k", "p", "lambda_minus", "lambda_plus", "E_p"]);
    let mut plot = Plot {
        title: format!("Dispersion of the straight strip, m = {mass}"),
        x_label: "k".into(),
        y_label: "λ".into(),
        ..Default::default()
    };
    let mut bands = Vec::new();
    for p in cfg.bands.iter() {
        let e = solve_root(mass, p, ROOT_TOL)?.energy;
        let mut upper = Vec::new();
        for &k in &ks {
            let plus = (mass * mass + k * k + e).sqrt();
            table.push(vec![Cell::Float(k), Cell::Int(p as i64), Cell::Float(-plus), Cell::Float(plus), Cell::Float(e)]);
            upper.push((k, plus));
        }
        let lower = upper.iter().map(|&(k, l)| (k, -l)).collect();
        let group = p - cfg.bands.first;
        plot.series.push(Series { label: format!("±λ_{p}(k)"), group, points: upper, style: Style::Line });
        plot.series.push(Series { label: String::new(), group, points: lower, style: Style::Line });
        bands.push(json!({ "p": p, "E_p": e, "gap_edge": (mass * mass + e).sqrt() }));
    }
    let summary = vec![format!("{} bands at {} wavenumbers, lowest |λ| = {:.12}", bands.len(), ks.len(), (mass * mass + first_energy(mass)?).sqrt())];
    Ok(Artifacts { table, result: json!({ "bands": bands }), plot: Some(plot), summary })
}

fn edge_row(eps: f64, m: f64) -> Result<(Vec<Cell>, Value), Failure> {
    let e1 = first_energy(m * eps)?;
    let edge = essential_edge(eps, m)?;
    let shifted = shifted_square_edge(eps, m)?;
    let renormalized = edge - PI / (4.0 * eps);
    let me = effective_mass(m);
    let row = vec![Cell::Float(eps), Cell::Float(m), Cell::Float(e1), Cell::Float(edge), Cell::Float(shifted), Cell::Float(renormalized), Cell::Float(me)];
    let value = json!({ "epsilon": eps, "m": m, "E_1": e1, "edge": edge, "shifted_edge": shifted, "renormalized": renormalized, "effective_mass": me });
    Ok((row, value))
}

pub fn edge(cfg: &mut RunConfig) -> Outcome {
    let eps_values = resolve_sweep(cfg, SweepVariable::Epsilon, vec![cfg.epsilon])?;
    let mut table = Table::new(&["epsilon", "m", "E_1", "edge", "shifted_edge", "renormalized", "effective_mass"]);
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &eps in &eps_values {
        let (row, value) = edge_row(eps, cfg.mass)?;
        summary.push(format!(
            "eps = {eps}: edge = {:.15}, edge - π/(4ε) = {:.12} (2m/π = {:.12})",
            value["edge"].as_f64().unwrap_or(f64::NAN),
            value["renormalized"].as_f64().unwrap_or(f64::NAN),
            effective_mass(cfg.mass)
        ));
        table.push(row);
        rows.push(value);
    }
    Ok(Artifacts { table, result: json!({ "rows": rows }), plot: None, summary })
}

pub fn thin_sweep(cfg: &mut RunConfig) -> Outcome {
    let eps_values = resolve_sweep(cfg, SweepVariable::Epsilon, vec![1e-4, 1e-3, 1e-2])?;
    let m = cfg.mass;
    let limit = effective_mass(m);
    let mut table = Table::new(&["epsilon", "renormalized", "effective_mass", "error", "slope", "richardson"]);
    let mut rows = Vec::new();
    let mut points = Vec::new();
    let mut prev: Option<(f64, f64, f64)> = None;
    for &eps in &eps_values {
        let r = essential_edge(eps, m)? - PI / (4.0 * eps);
        let err = (r - limit).abs();
        // first-order extrapolation to eps = 0 from this and the previous width
        let (slope, richardson) = match prev {
            Some((e0, r0, err0)) if err0 > 0.0 && err > 0.0 => {
                ((err0 / err).ln() / (e0 / eps).ln(), Some((e0 * r - eps * r0) / (e0 - eps)))
            }
            _ => (f64::NAN, None),
        };
        table.push(vec![
            Cell::Float(eps),
            Cell::Float(r),
            Cell::Float(limit),
            Cell::Float(err),
            if slope.is_nan() { Cell::Empty } else { Cell::Float(slope) },
            richardson.map_or(Cell::Empty, Cell::Float),
        ]);
        rows.push(json!({ "epsilon": eps, "renormalized": r, "error": err, "slope": (!slope.is_nan()).then_some(slope), "richardson": richardson }));
        points.push((eps, err));
        prev = Some((eps, r, err));
    }
    let plot = Plot {
        title: format!("Thin-width limit, m = {m}"),
        x_label: "ε".into(),
        y_label: "|λ_ess(ε) − π/(4ε) − 2m/π|".into(),
        log_x: true,
        log_y: true,
        series: vec![Series { label: "error".into(), group: 0, points, style: Style::Line }],
        levels: Vec::new(),
    };
    let summary = vec![format!("limit 2m/π = {limit:.15}; error at eps = {} is {:.3e}", eps_values[0], table_error(&rows))];
    Ok(Artifacts { table, result: json!({ "limit": limit, "rows": rows }), plot: Some(plot), summary })
}

fn table_error(rows: &[Value]) -> f64 {
    rows.first().and_then(|r| r["error"].as_f64()).unwrap_or(f64::NAN)
}

pub fn mass_sweep(cfg: &mut RunConfig) -> Outcome {
    let eps = cfg.epsilon;
    let default = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0].iter().map(|x| x / eps).collect();
    let masses = resolve_sweep(cfg, SweepVariable::Mass, default)?;
    let geom = geometry(cfg)?;
    let grid = StripGrid::for_geometry(&geom, cfg.grid.n_s, cfg.grid.n_t)?;
    let gaps = large_mass_gap(&geom, &grid, &masses, &cfg.solver.options())?;
    let mut table = Table::new(&["m", "m_epsilon", "mu_q_m", "mu_q_inf", "gap", "relative_gap"]);
    let mut points = Vec::new();
    for r in &gaps.rows {
        table.push(vec![
            Cell::Float(r.m),
            Cell::Float(r.m * eps),
            Cell::Float(r.mu_q_m),
            Cell::Float(r.mu_q_inf),
            Cell::Float(r.gap),
            Cell::Float(r.relative_gap()),
        ]);
        points.push((r.m * eps, r.relative_gap()));
    }
    let plot = Plot {
        title: format!("Large-mass limit, ε = {eps}"),
        x_label: "mε".into(),
        y_label: "(μ₁(q_∞) − μ₁(q_m)) / μ₁(q_∞)".into(),
        log_x: true,
        log_y: true,
        series: vec![Series { label: "relative gap".into(), group: 0, points, style: Style::Line }],
        levels: Vec::new(),
    };
    let summary = vec![
        format!("μ₁(q_∞) = {:.12}", gaps.rows[0].mu_q_inf),
        format!(
            "below Dirichlet: {}, nondecreasing: {}, gap decreasing: {}",
            gaps.below_dirichlet, gaps.nondecreasing, gaps.gap_decreasing
        ),
    ];
    Ok(Artifacts { table, result: serde_json::to_value(&gaps).map_err(|e| Failure::Internal(e.to_string()))?, plot: Some(plot), summary })
}

pub fn spectrum(cfg: &mut RunConfig) -> Outcome {
    let geom = geometry(cfg)?;
    let grid = StripGrid::for_geometry(&geom, cfg.grid.n_s, cfg.grid.n_t)?;
    let report = discrete_spectrum(&geom, cfg.mass, &grid, &cfg.solver.options())?;
    let m2 = cfg.mass * cfg.mass;
    let mut table = Table::new(&["index", "mu", "residual", "below_edge", "dirac_lambda"]);
    for (j, (&mu, &res)) in report.eigenvalues.iter().zip(&report.residuals).enumerate() {
        table.push(vec![
            Cell::Int(j as i64 + 1),
            Cell::Float(mu),
            Cell::Float(res),
            Cell::Bool(mu < report.discrete_edge),
            Cell::Float((mu + m2).max(0.0).sqrt()),
        ]);
    }
    let mut summary = vec![format!(
        "edge E_1(mε)/ε² = {:.12}, discrete edge = {:.12}, inertia count below edge = {}",
        report.edge, report.discrete_edge, report.count_below_edge
    )];
    if report.bound_states.is_empty() {
        summary.push("no discrete eigenvalues below edge".into());
    } else {
        for (&(mu, mult), lambda) in report.bound_states.iter().zip(&report.dirac_eigenvalues) {
            summary.push(format!("μ = {mu:.12} (multiplicity {mult}), Dirac eigenvalues ±{lambda:.12}"));
        }
    }
    let plot = Plot {
        title: format!("Lowest eigenvalues of the shifted square, ε = {}, m = {}", cfg.epsilon, cfg.mass),
        x_label: "j".into(),
        y_label: "μ_j".into(),
        series: vec![Series {
            label: "μ_j".into(),
            group: 0,
            points: report.eigenvalues.iter().enumerate().map(|(j, &v)| (j as f64 + 1.0, v)).collect(),
            style: Style::Markers,
        }],
        levels: vec![(report.discrete_edge, "discrete edge".into()), (report.edge, "E₁(mε)/ε²".into())],
        ..Default::default()
    };
    let result = serde_json::to_value(&report).map_err(|e| Failure::Internal(e.to_string()))?;
    Ok(Artifacts { table, result, plot: Some(plot), summary })
}

pub fn certificate(cfg: &mut RunConfig) -> Outcome {
    let geom = geometry(cfg)?;
    let cert = certify(&geom, cfg.mass)?;
    let eta = optimal_eta(&geom, cfg.mass);
    let trial = variational_energy(&geom, cfg.mass, eta)?;
    let mut table = Table::new(&["I_epsilon", "m0_bound", "condition_holds", "predicted_discrete_count_at_least", "mass", "eta", "q_value"]);
    table.push(vec![
        Cell::Float(cert.i_epsilon),
        Cell::Float(cert.m0_bound),
        Cell::Bool(cert.condition_holds),
        Cell::Int(cert.predicted_discrete_count_at_least as i64),
        Cell::Float(cfg.mass),
        Cell::Float(eta),
        Cell::Float(trial.q_value),
    ]);
    let summary = vec![
        format!("I_ε = {:.12}, condition holds: {}", cert.i_epsilon, cert.condition_holds),
        if cert.m0_bound.is_finite() {
            format!("m₀ ≤ {:.6e}; at m = {} at least {} discrete eigenvalues predicted", cert.m0_bound, cfg.mass, cert.predicted_discrete_count_at_least)
        } else {
            "no mass threshold available".into()
        },
    ];
    Ok(Artifacts { table, result: json!({ "certificate": cert, "trial": trial }), plot: None, summary })
}
