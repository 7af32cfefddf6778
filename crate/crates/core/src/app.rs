//! Scenario runners behind the command-line tool. Each returns in-memory
//! tables plus a JSON summary; [`write_report`] puts them on disk.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConfigError, NamedProtocol, OutputFormat, ScenarioConfig, Spacing};
use crate::equivalence::{
    chain_equivalence, check_equivalence, r_f_bound, solve_equivalence, EndState, EquivalenceError,
};
use crate::ermakov::{end_state, solve, ErmakovError, ErmakovTrajectory};
use crate::protocols::{omega_from_rho, FrequencyProtocol, ProtocolError, RhoProfile, SegmentKind};
use crate::squeeze::{final_squeeze, record, SqueezeError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("expulsive regime: {0}")]
    Expulsive(String),
    #[error("output error: {0}")]
    Output(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::Output(_) => 2,
            AppError::Solver(_) => 3,
            AppError::Expulsive(_) => 4,
        }
    }
}

fn from_protocol(context: &str, e: ProtocolError) -> AppError {
    match e {
        ProtocolError::ExpulsiveRegime { .. } => AppError::Expulsive(format!("{context}: {e}")),
        other => AppError::Config(ConfigError::new(context, other.to_string())),
    }
}

fn from_ermakov(context: &str, e: ErmakovError) -> AppError {
    match e {
        ErmakovError::Protocol(p) => from_protocol(context, p),
        other => AppError::Solver(format!("{context}: {other}")),
    }
}

fn from_equivalence(context: &str, e: EquivalenceError) -> AppError {
    match e {
        EquivalenceError::Ermakov(inner) => from_ermakov(context, inner),
        EquivalenceError::InvalidInput(msg) => AppError::Config(ConfigError::new(context, msg)),
        other => AppError::Solver(format!("{context}: {other}")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(name: String, columns: &[&str]) -> Self {
        Self {
            name,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Numeric values of one column (`NaN` for text cells).
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(
            self.rows
                .iter()
                .map(|r| r[i].as_f64().unwrap_or(f64::NAN))
                .collect(),
        )
    }

    pub fn text_column(&self, name: &str) -> Option<Vec<String>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i].render()).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub tables: Vec<Table>,
    pub summary: Value,
}

impl Report {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

fn num(v: f64) -> Cell {
    Cell::Num(v)
}

fn nan_row(t: f64, tau: f64, width: usize) -> Vec<Cell> {
    let mut row = vec![num(t), num(t / tau)];
    row.resize(width, num(f64::NAN));
    row
}

fn negative_runs(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut runs = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    for &(t, w2) in points {
        if w2 < 0.0 {
            open = Some(open.map_or((t, t), |(a, _)| (a, t)));
        } else if let Some(run) = open.take() {
            runs.push(run);
        }
    }
    runs.extend(open);
    runs
}

struct Simulated {
    protocol: FrequencyProtocol,
    entry: NamedProtocol,
    trajectory: ErmakovTrajectory,
    end: EndState,
}

fn simulate_one(
    cfg: &ScenarioConfig,
    entry: &NamedProtocol,
    grid: &[f64],
) -> Result<Simulated, AppError> {
    let ctx = format!("protocol {:?}", entry.name);
    let protocol = entry
        .protocol
        .build(cfg.units.m0)
        .map_err(|e| from_protocol(&ctx, e))?;
    let route = entry.route.unwrap_or(cfg.solver.route);
    let opts = cfg.options();
    let trajectory = solve(&protocol, grid, route, &opts).map_err(|e| from_ermakov(&ctx, e))?;
    let s = end_state(&protocol, route, &opts).map_err(|e| from_ermakov(&ctx, e))?;
    let end = EndState {
        delta: s.rho,
        epsilon: s.rho_dot,
        omegaf: protocol.omegaf,
    };
    Ok(Simulated {
        protocol,
        entry: entry.clone(),
        trajectory,
        end,
    })
}

fn rho_table(sim: &Simulated) -> Table {
    let tau = sim.protocol.tau;
    let mut table = Table::new(
        format!("{}_rho", sim.entry.name),
        &[
            "t",
            "t_over_tau",
            "rho",
            "rho_dot",
            "omega",
            "omega_sq",
            "segment",
        ],
    );
    for p in &sim.trajectory.points {
        let omega = if p.omega_sq >= 0.0 {
            p.omega_sq.sqrt()
        } else {
            f64::NAN
        };
        table.rows.push(vec![
            num(p.t),
            num(p.t / tau),
            num(p.rho),
            num(p.rho_dot),
            num(omega),
            num(p.omega_sq),
            Cell::Text(p.region.tag()),
        ]);
    }
    table
}

fn squeeze_table(cfg: &ScenarioConfig, sim: &Simulated, n: u32) -> (Table, usize) {
    const COLUMNS: [&str; 11] = [
        "t",
        "t_over_tau",
        "r",
        "phi",
        "sigma_x2",
        "sigma_p2",
        "E",
        "sigma_H2",
        "N",
        "Qstar",
        "segment",
    ];
    let tau = sim.protocol.tau;
    let mut table = Table::new(format!("{}_squeeze_n{n}", sim.entry.name), &COLUMNS);
    let mut undefined = 0;
    for p in &sim.trajectory.points {
        let rec = (p.omega_sq > 0.0)
            .then(|| record(&p.state(), p.omega_sq.sqrt(), n, cfg.units).ok())
            .flatten();
        let mut row = match rec {
            Some(s) => vec![
                num(p.t),
                num(p.t / tau),
                num(s.r),
                num(s.phi),
                num(s.sigma_x2),
                num(s.sigma_p2),
                num(s.energy),
                num(s.sigma_h2),
                num(s.excitations),
                num(s.qstar),
            ],
            None => {
                undefined += 1;
                nan_row(p.t, tau, COLUMNS.len() - 1)
            }
        };
        row.push(Cell::Text(p.region.tag()));
        table.rows.push(row);
    }
    (table, undefined)
}

fn final_summary(cfg: &ScenarioConfig, end: &EndState) -> Result<Value, SqueezeError> {
    let f = final_squeeze(end.delta, end.epsilon, end.omegaf, cfg.units.m0)?;
    let levels: Vec<Value> = cfg
        .quantum_numbers
        .iter()
        .map(|&n| json!({"n": n, "E_f": f.energy(n, cfg.units.hbar), "N_f": f.excitations(n)}))
        .collect();
    Ok(json!({"r_f": f.r_f, "lambda_f": f.lambda_f, "Qstar_f": f.qstar(), "levels": levels}))
}

/// Trajectories, squeezing tables and end-state equivalence for every protocol.
pub fn run_simulate(cfg: &ScenarioConfig) -> Result<Report, AppError> {
    let grid = cfg.validate_series()?.nodes();
    let sims: Vec<Simulated> = cfg
        .protocols
        .par_iter()
        .map(|p| simulate_one(cfg, p, &grid))
        .collect::<Result<_, _>>()?;

    let mut tables = Vec::new();
    let mut summaries = Vec::new();
    for sim in &sims {
        if cfg.observables.contains(&crate::config::Observable::Rho) {
            tables.push(rho_table(sim));
        }
        let mut undefined = 0;
        if cfg
            .observables
            .contains(&crate::config::Observable::Squeeze)
        {
            for &n in &cfg.quantum_numbers {
                let (t, u) = squeeze_table(cfg, sim, n);
                undefined = undefined.max(u);
                tables.push(t);
            }
        }
        let w2: Vec<(f64, f64)> = sim
            .trajectory
            .points
            .iter()
            .map(|p| (p.t, p.omega_sq))
            .collect();
        let min_w2 = w2.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        let final_part = final_summary(cfg, &sim.end)
            .map_err(|e| AppError::Solver(format!("protocol {:?}: {e}", sim.entry.name)))?;
        summaries.push(json!({
            "name": sim.entry.name,
            "protocol": sim.entry.protocol,
            "route": sim.trajectory.route,
            "tau": sim.protocol.tau,
            "omega0": sim.protocol.omega0,
            "omegaf": sim.protocol.omegaf,
            "delta": sim.end.delta,
            "epsilon": sim.end.epsilon,
            "final": final_part,
            "max_relative_residual": sim.trajectory.max_relative_residual(),
            "min_omega_sq_ratio": min_w2 / (sim.protocol.omega0 * sim.protocol.omega0),
            "expulsive_intervals": negative_runs(&w2),
            "undefined_squeeze_points": undefined,
        }));
    }

    let mut summary = json!({"scenario": cfg.name, "command": "simulate", "protocols": summaries});
    if sims.len() >= 2 {
        let ends: Vec<EndState> = sims.iter().map(|s| s.end).collect();
        let all = chain_equivalence(&ends, cfg.tolerance)
            .map_err(|e| from_equivalence("equivalence", e))?;
        let mut pairs = Vec::new();
        for (i, a) in sims.iter().enumerate() {
            for b in &sims[i + 1..] {
                let check = check_equivalence(&a.end, &b.end, cfg.tolerance)
                    .map_err(|e| from_equivalence("equivalence", e))?;
                pairs.push(json!({
                    "a": a.entry.name,
                    "b": b.entry.name,
                    "equivalent": check.equivalent,
                    "residuals": {"omegaf": check.residuals[0], "delta": check.residuals[1], "epsilon": check.residuals[2]},
                    "r_f_bound": r_f_bound(&a.end, &b.end, cfg.units.m0, cfg.tolerance),
                }));
            }
        }
        summary["equivalence"] =
            json!({"all_equivalent": all, "tolerance": cfg.tolerance, "pairs": pairs});
    }
    Ok(Report { tables, summary })
}

fn rho_profile(protocol: &FrequencyProtocol) -> Option<&RhoProfile> {
    protocol.segments.iter().find_map(|s| match &s.kind {
        SegmentKind::FromRho(p) => Some(p),
        _ => None,
    })
}

/// Inverted frequencies of every designed protocol on `[0, τ]`, with a
/// feasibility report.
pub fn run_design(cfg: &ScenarioConfig) -> Result<Report, AppError> {
    let spec = cfg.validate_series()?;
    let designed: Vec<&NamedProtocol> = cfg
        .protocols
        .iter()
        .filter(|p| p.protocol.is_designed())
        .collect();
    if designed.is_empty() {
        return Err(ConfigError::new(
            "protocols",
            "design needs at least one ansatz or quasi_optimal protocol",
        )
        .into());
    }
    let m0 = cfg.units.m0;
    let mut tables = Vec::new();
    let mut reports = Vec::new();
    for entry in designed {
        let ctx = format!("protocol {:?}", entry.name);
        let protocol = entry
            .protocol
            .build(m0)
            .map_err(|e| from_protocol(&ctx, e))?;
        let profile =
            rho_profile(&protocol).expect("designed protocols carry an amplitude profile");
        let tau = protocol.tau;
        let grid: Vec<f64> = (0..spec.points)
            .map(|i| tau * i as f64 / (spec.points - 1) as f64)
            .collect();
        let freq = omega_from_rho(profile, m0, &grid, cfg.solver.expulsive)
            .map_err(|e| from_protocol(&ctx, e))?;
        let mut table = Table::new(
            format!("{}_design", entry.name),
            &[
                "t",
                "t_over_tau",
                "rho",
                "rho_dot",
                "rho_ddot",
                "omega_sq",
                "omega",
            ],
        );
        for (i, (&t, s)) in freq.t.iter().zip(&freq.rho).enumerate() {
            table.rows.push(vec![
                num(t),
                num(t / tau),
                num(s.rho),
                num(s.rho_dot),
                num(s.rho_ddot),
                num(freq.omega_sq[i]),
                num(freq.omega(i).unwrap_or(f64::NAN)),
            ]);
        }
        tables.push(table);
        let w0sq = protocol.omega0 * protocol.omega0;
        let (i_min, min_w2) =
            freq.omega_sq
                .iter()
                .copied()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |acc, (i, w)| if w < acc.1 { (i, w) } else { acc },
                );
        let boundary = match profile {
            RhoProfile::Ansatz(a) => json!({"boundary_residual": a.boundary_residual()}),
            RhoProfile::QuasiOptimal(q) => json!({"stitch_residual": q.stitch_residual()}),
            RhoProfile::Constant { .. } => json!({}),
        };
        let end = profile.eval(tau);
        let start = profile.eval(0.0);
        reports.push(json!({
            "name": entry.name,
            "protocol": entry.protocol,
            "min_omega_sq_ratio": min_w2 / w0sq,
            "t_at_min": freq.t[i_min],
            "expulsive_intervals": freq.expulsive,
            "feasible": freq.expulsive.is_empty(),
            "omega_at_tau": end.omega_squared(m0).max(0.0).sqrt(),
            "omegaf": protocol.omegaf,
            "omega_at_zero": start.omega_squared(m0).max(0.0).sqrt(),
            "rho_at_zero": start.rho,
            "rho0": protocol.rho0(),
            "residuals": boundary,
        }));
    }
    Ok(Report {
        tables,
        summary: json!({"scenario": cfg.name, "command": "design", "protocols": reports}),
    })
}

/// `r_f`, `N_f`, `E_f` and `Q*_f` over the Cartesian product of sweep ranges.
/// Failing points become tagged rows.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<Report, AppError> {
    cfg.validate_common()?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| ConfigError::new("sweep", "missing"))?;
    if sweep.ranges.is_empty() {
        return Err(ConfigError::new("sweep.ranges", "at least one range is required").into());
    }
    for r in &sweep.ranges {
        let field = format!("sweep.ranges.{}", r.param);
        if r.points == 0 || !(r.lo.is_finite() && r.hi.is_finite()) || r.hi < r.lo {
            return Err(ConfigError::new(field, "need finite lo <= hi and points >= 1").into());
        }
        if r.spacing == Spacing::Log && !(r.lo > 0.0) {
            return Err(ConfigError::new(field, "log spacing needs lo > 0").into());
        }
    }
    let total = sweep
        .ranges
        .iter()
        .try_fold(1usize, |acc, r| acc.checked_mul(r.points))
        .unwrap_or(usize::MAX);
    if total > sweep.max_points {
        return Err(ConfigError::new(
            "sweep.max_points",
            format!("{total} points exceed the cap {}", sweep.max_points),
        )
        .into());
    }
    let points = sweep.points();
    sweep.protocol_at(&points[0])?;
    let n = cfg.quantum_numbers.first().copied().unwrap_or(0);
    let (m0, hbar) = (cfg.units.m0, cfg.units.hbar);
    let opts = cfg.options();
    let route = cfg.solver.route;

    let rows: Vec<Vec<Cell>> = points
        .par_iter()
        .map(|values| {
            let outcome = (|| -> Result<[f64; 6], (String, String)> {
                let pc = sweep
                    .protocol_at(values)
                    .map_err(|e| ("invalid_protocol".to_string(), e.to_string()))?;
                let protocol = pc
                    .build(m0)
                    .map_err(|e| ("invalid_protocol".to_string(), e.to_string()))?;
                let s = end_state(&protocol, route, &opts).map_err(|e| match e {
                    ErmakovError::Protocol(p @ ProtocolError::ExpulsiveRegime { .. }) => {
                        ("expulsive".to_string(), p.to_string())
                    }
                    other => ("solver".to_string(), other.to_string()),
                })?;
                let f = final_squeeze(s.rho, s.rho_dot, protocol.omegaf, m0)
                    .map_err(|e| ("non_physical".to_string(), e.to_string()))?;
                Ok([
                    s.rho,
                    s.rho_dot,
                    f.r_f,
                    f.excitations(n),
                    f.energy(n, hbar),
                    f.qstar(),
                ])
            })();
            let mut row: Vec<Cell> = values.iter().map(|v| num(*v)).collect();
            match outcome {
                Ok(vals) => {
                    row.extend(vals.iter().map(|v| num(*v)));
                    row.push(Cell::Text("ok".into()));
                }
                Err((tag, msg)) => {
                    row.extend(std::iter::repeat_n(num(f64::NAN), 6));
                    row.push(Cell::Text(format!("{tag}: {msg}")));
                }
            }
            row
        })
        .collect();

    let mut columns: Vec<&str> = sweep.ranges.iter().map(|r| r.param.as_str()).collect();
    columns.extend(["delta", "epsilon", "r_f", "N_f", "E_f", "Qstar_f", "status"]);
    let mut table = Table::new("sweep".into(), &columns);
    table.rows = rows;
    let failed = table
        .rows
        .iter()
        .filter(|r| !matches!(r.last(), Some(Cell::Text(s)) if s == "ok"))
        .count();
    let summary = json!({
        "scenario": cfg.name,
        "command": "sweep",
        "points": total,
        "failed": failed,
        "level": n,
    });
    Ok(Report {
        tables: vec![table],
        summary,
    })
}

/// Roots of the configured equivalence problem.
pub fn run_equivalence(cfg: &ScenarioConfig) -> Result<Report, AppError> {
    cfg.validate_common()?;
    let eq = cfg
        .equivalence
        .as_ref()
        .ok_or_else(|| ConfigError::new("equivalence", "missing"))?;
    let opts = cfg.options();
    let mut solver = eq.solver;
    solver.keep_scan = eq.scan;
    let problem = eq
        .problem
        .build(opts, solver)
        .map_err(|e| from_equivalence("equivalence.problem", e))?;
    let sol = solve_equivalence(&problem).map_err(|e| from_equivalence("equivalence", e))?;
    let m0 = eq.problem.m0();
    let mut roots = Vec::new();
    for root in &sol.roots {
        let (a, b) = eq
            .problem
            .end_states(&root.params, &opts)
            .map_err(|e| from_equivalence("equivalence", e))?;
        let ra = final_squeeze(a.delta, a.epsilon, a.omegaf, m0)
            .map(|f| f.r_f)
            .unwrap_or(f64::NAN);
        let rb = final_squeeze(b.delta, b.epsilon, b.omegaf, m0)
            .map(|f| f.r_f)
            .unwrap_or(f64::NAN);
        roots.push(json!({
            "params": root.params,
            "residuals": root.residuals,
            "residual_norm": root.residual_norm,
            "iterations": root.iterations,
            "r_f": ra,
            "r_f_prime": rb,
            "delta": a.delta,
            "epsilon": a.epsilon,
        }));
    }
    let names: Vec<&str> = problem.params.iter().map(|p| p.name.as_str()).collect();
    let mut tables = Vec::new();
    if let Some(scan) = &sol.scan {
        let mut columns: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        columns.extend(["residual_delta", "residual_epsilon", "residual_norm"].map(String::from));
        let mut table = Table {
            name: "equivalence_scan".into(),
            columns,
            rows: Vec::new(),
        };
        for (p, r) in scan {
            let mut row: Vec<Cell> = p.iter().map(|v| num(*v)).collect();
            match r {
                Some(r) => {
                    row.extend(r.iter().map(|v| num(*v)));
                    row.push(num(r.iter().map(|v| v * v).sum::<f64>().sqrt()));
                }
                None => row.extend(std::iter::repeat_n(num(f64::NAN), 3)),
            }
            table.rows.push(row);
        }
        tables.push(table);
    }
    let summary = json!({
        "scenario": cfg.name,
        "command": "equivalence solve",
        "problem": eq.problem,
        "param_names": names,
        "degenerate": sol.degenerate,
        "evaluations": sol.evaluations,
        "roots": roots,
        "scans": tables.first().map(|_| "equivalence_scan.csv"),
    });
    Ok(Report { tables, summary })
}

fn write_csv(path: &Path, table: &Table) -> Result<(), AppError> {
    let io = |e: csv::Error| AppError::Output(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(&table.columns).map_err(io)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render)).map_err(io)?;
    }
    w.flush()
        .map_err(|e| AppError::Output(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), AppError> {
    fs::write(path, text).map_err(|e| AppError::Output(format!("{}: {e}", path.display())))
}

/// Tables as `<name>.csv` (or `.json`) plus `summary.json` in `dir`.
pub fn write_report(
    report: &Report,
    dir: &Path,
    format: OutputFormat,
) -> Result<Vec<PathBuf>, AppError> {
    fs::create_dir_all(dir).map_err(|e| AppError::Output(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for table in &report.tables {
        let path = match format {
            OutputFormat::Csv => {
                let path = dir.join(format!("{}.csv", table.name));
                write_csv(&path, table)?;
                path
            }
            OutputFormat::Json => {
                let path = dir.join(format!("{}.json", table.name));
                let text = serde_json::to_string_pretty(table)
                    .map_err(|e| AppError::Output(e.to_string()))?;
                write_text(&path, &text)?;
                path
            }
        };
        written.push(path);
    }
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&report.summary)
        .map_err(|e| AppError::Output(e.to_string()))?;
    write_text(&path, &text)?;
    written.push(path);
    Ok(written)
}
