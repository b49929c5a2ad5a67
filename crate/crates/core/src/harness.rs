//! Parameter sweeps over (problem, β, α, h, solver) and their CSV, plot-data
//! and JSON outputs.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assembly::DiscreteState;
use crate::error::{Error, Result};
use crate::fas::{MgConfig, Multigrid};
use crate::level::Level;
use crate::mesh::build_uniform_square_mesh;
use crate::pr::{pr_solve, PrConfig, SolveReport};
use crate::problems::{compute_errors, eoc, make_problem, ErrorReport, ManufacturedProblem, ProblemName};
use crate::saddle::LinearSolverKind;

pub const DOF_CONVENTION: &str =
    "DoFs = 2 * triangles + vertices (two velocity components per triangle, one pressure value per vertex); 5185 at h = 1/16";
pub const H_CONVENTION: &str = "h_inv counts cells per unit length; the square (-1,1)^2 is split into 2 * h_inv intervals per side";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    Pr,
    Mg,
}

impl FromStr for SolverChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pr" => Ok(Self::Pr),
            "mg" => Ok(Self::Mg),
            _ => Err(Error::InvalidArgument(format!("unknown solver '{s}' (expected pr or mg)"))),
        }
    }
}

impl fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pr => "pr",
            Self::Mg => "mg",
        })
    }
}

/// Splitting parameter: `auto` means 1/β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AlphaRepr", into = "AlphaRepr")]
pub enum AlphaRule {
    Auto,
    Fixed(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum AlphaRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<AlphaRepr> for AlphaRule {
    type Error = Error;
    fn try_from(r: AlphaRepr) -> Result<Self> {
        match r {
            AlphaRepr::Number(v) => AlphaRule::fixed(v),
            AlphaRepr::Text(s) => s.parse(),
        }
    }
}

impl From<AlphaRule> for AlphaRepr {
    fn from(a: AlphaRule) -> Self {
        match a {
            AlphaRule::Auto => AlphaRepr::Text("auto".into()),
            AlphaRule::Fixed(v) => AlphaRepr::Number(v),
        }
    }
}

impl AlphaRule {
    fn fixed(v: f64) -> Result<Self> {
        if v > 0.0 && v.is_finite() {
            Ok(Self::Fixed(v))
        } else {
            Err(Error::Parameter(format!("alpha must be positive and finite, got {v}")))
        }
    }

    pub fn resolve(self, beta: f64) -> f64 {
        match self {
            Self::Auto => PrConfig::auto_alpha(beta),
            Self::Fixed(v) => v,
        }
    }
}

impl FromStr for AlphaRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        let v: f64 = s.parse().map_err(|_| Error::Parameter(format!("alpha must be 'auto' or a number, got '{s}'")))?;
        Self::fixed(v)
    }
}

impl fmt::Display for AlphaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Fixed(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TolMode {
    #[default]
    Fixed,
    /// tol = 1.95 h
    HScaled,
}

impl FromStr for TolMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "h-scaled" => Ok(Self::HScaled),
            _ => Err(Error::InvalidArgument(format!("unknown tolerance mode '{s}'"))),
        }
    }
}

/// Shape of the summary table written next to the raw rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableKind {
    /// PR iterations for α = 1 against α = 1/β.
    AlphaRule,
    /// Iterations and timings of PR and MG over h.
    Complexity,
    /// MG cycles over h and β.
    BetaRobustness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub name: String,
    pub problems: Vec<ProblemName>,
    pub betas: Vec<f64>,
    pub h_inv: Vec<usize>,
    pub solvers: Vec<SolverChoice>,
    pub alphas: Vec<AlphaRule>,
    /// Linear solvers for the PR rows.
    pub linear_solvers: Vec<LinearSolverKind>,
    pub mg_linear_solver: LinearSolverKind,
    /// Finest h_inv for direct LU rows; finer ones are recorded as skipped.
    pub max_direct_h_inv: usize,
    pub tol: f64,
    pub tol_mode: TolMode,
    pub max_iters: usize,
    pub max_cycles: usize,
    pub smooth_steps: usize,
    pub coarse_h_inv: usize,
    pub levels: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub table: Option<TableKind>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        let mg = MgConfig::default();
        Self {
            name: "sweep".into(),
            problems: vec![ProblemName::Problem1],
            betas: vec![30.0],
            h_inv: vec![16, 32, 64],
            solvers: vec![SolverChoice::Pr, SolverChoice::Mg],
            alphas: vec![AlphaRule::Auto],
            linear_solvers: vec![LinearSolverKind::Schur],
            mg_linear_solver: LinearSolverKind::Schur,
            max_direct_h_inv: 128,
            tol: 1e-6,
            tol_mode: TolMode::Fixed,
            max_iters: PrConfig::default().max_iters,
            max_cycles: mg.max_cycles,
            smooth_steps: mg.smooth_steps,
            coarse_h_inv: mg.coarse_h_inv,
            levels: None,
            output_dir: None,
            table: None,
        }
    }
}

impl SweepConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(b) = self.betas.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
            return Err(Error::Config(format!("beta must be nonnegative, got {b}")));
        }
        if self.h_inv.contains(&0) {
            return Err(Error::Config("h_inv entries must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.smooth_steps == 0 {
            return Err(Error::Config("smooth_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn tolerance(&self, h_inv: usize) -> f64 {
        match self.tol_mode {
            TolMode::Fixed => self.tol,
            TolMode::HScaled => 1.95 / h_inv as f64,
        }
    }

    /// Cases in output order: problem, β, α, h, solver, linear solver.
    pub fn cases(&self) -> Vec<Case> {
        let mut out = Vec::new();
        for &problem in &self.problems {
            for &beta in &self.betas {
                for &alpha in &self.alphas {
                    for &h_inv in &self.h_inv {
                        for &solver in &self.solvers {
                            let kinds = match solver {
                                SolverChoice::Pr => self.linear_solvers.clone(),
                                SolverChoice::Mg => vec![self.mg_linear_solver],
                            };
                            for linear_solver in kinds {
                                out.push(Case { problem, beta, alpha, h_inv, solver, linear_solver });
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// One of the six preset benchmark tables.
    pub fn table_preset(n: u8) -> Result<Self> {
        let base = Self { name: format!("table{n}"), ..Self::default() };
        let both = vec![ProblemName::Problem1, ProblemName::Problem2];
        Ok(match n {
            1 | 2 => Self {
                problems: both,
                betas: if n == 1 { vec![10.0, 20.0, 30.0] } else { vec![40.0, 50.0, 60.0] },
                h_inv: vec![64],
                solvers: vec![SolverChoice::Pr],
                alphas: vec![AlphaRule::Fixed(1.0), AlphaRule::Auto],
                table: Some(TableKind::AlphaRule),
                ..base
            },
            3 | 5 => Self {
                problems: vec![if n == 3 { ProblemName::Problem1 } else { ProblemName::Problem2 }],
                betas: vec![30.0],
                h_inv: vec![16, 32, 64, 128, 256],
                linear_solvers: vec![LinearSolverKind::Direct, LinearSolverKind::Schur],
                table: Some(TableKind::Complexity),
                ..base
            },
            4 | 6 => Self {
                problems: vec![if n == 4 { ProblemName::Problem1 } else { ProblemName::Problem2 }],
                betas: vec![10.0, 20.0, 30.0, 40.0, 50.0],
                h_inv: vec![32, 64, 128, 256],
                solvers: vec![SolverChoice::Mg],
                table: Some(TableKind::BetaRobustness),
                ..base
            },
            _ => return Err(Error::InvalidArgument(format!("no table {n}; expected 1 to 6"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case {
    pub problem: ProblemName,
    pub beta: f64,
    pub alpha: AlphaRule,
    pub h_inv: usize,
    pub solver: SolverChoice,
    pub linear_solver: LinearSolverKind,
}

/// One solver run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub problem: ProblemName,
    pub beta: f64,
    pub alpha_rule: String,
    pub alpha: f64,
    pub h_inv: usize,
    pub solver: SolverChoice,
    pub linear_solver: LinearSolverKind,
    pub dofs: usize,
    pub tol: f64,
    pub iterations: usize,
    pub coarse_iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub seconds: f64,
    pub err_u_l2: f64,
    pub err_p_h1: f64,
    pub err_p_w1_32: f64,
    pub eoc_u: Option<f64>,
    pub eoc_p: Option<f64>,
    pub constraint_violation: f64,
    pub error: Option<String>,
}

/// Runs one case, returning the solution with its row.
pub fn run_case_with_state(case: &Case, cfg: &SweepConfig) -> Result<(DiscreteState, SweepRow)> {
    if case.linear_solver == LinearSolverKind::Direct && case.h_inv > cfg.max_direct_h_inv {
        return Err(Error::InvalidArgument(format!(
            "skipped: direct LU limited to h_inv <= {} (max_direct_h_inv)",
            cfg.max_direct_h_inv
        )));
    }
    let problem = make_problem(case.problem, case.beta)?;
    let alpha = case.alpha.resolve(case.beta);
    let tol = cfg.tolerance(case.h_inv);
    let (state, report, mesh) = match case.solver {
        SolverChoice::Pr => {
            let mesh = build_uniform_square_mesh(problem.domain(), 2 * case.h_inv)?;
            let level = Level::new(mesh, &problem.params, alpha, case.linear_solver)?;
            let pr = PrConfig { alpha, tol, max_iters: cfg.max_iters, ..PrConfig::default() };
            let (state, report) = pr_solve(&level, &level.problem_rhs(), &pr, None)?;
            (state, report, level.mesh)
        }
        SolverChoice::Mg => {
            let mg = MgConfig {
                alpha,
                tol,
                smooth_steps: cfg.smooth_steps,
                coarse_h_inv: cfg.coarse_h_inv,
                levels: cfg.levels,
                max_cycles: cfg.max_cycles,
                coarse_max_iters: cfg.max_iters,
                ..MgConfig::default()
            };
            let mg = Multigrid::new(&problem.params, problem.domain(), case.h_inv, mg, case.linear_solver)?;
            let (state, report) = mg.solve(None)?;
            let mesh = mg.finest().mesh.clone();
            (state, report, mesh)
        }
    };
    let errors = compute_errors(&state, &problem, &mesh);
    let row = make_row(case, &problem, alpha, tol, mesh.dofs(), &report, &errors);
    Ok((state, row))
}

fn make_row(
    case: &Case,
    problem: &ManufacturedProblem,
    alpha: f64,
    tol: f64,
    dofs: usize,
    report: &SolveReport,
    errors: &ErrorReport,
) -> SweepRow {
    SweepRow {
        problem: problem.name,
        beta: case.beta,
        alpha_rule: case.alpha.to_string(),
        alpha,
        h_inv: case.h_inv,
        solver: case.solver,
        linear_solver: case.linear_solver,
        dofs,
        tol,
        iterations: report.iterations,
        coarse_iterations: report.coarse_iterations,
        converged: report.converged,
        residual: report.final_residual.r,
        seconds: report.seconds,
        err_u_l2: errors.err_u_l2,
        err_p_h1: errors.err_p_h1,
        err_p_w1_32: errors.err_p_w1_32,
        eoc_u: None,
        eoc_p: None,
        constraint_violation: report.constraint.max_violation,
        error: None,
    }
}

fn failed_row(case: &Case, cfg: &SweepConfig, err: &Error) -> SweepRow {
    SweepRow {
        problem: case.problem,
        beta: case.beta,
        alpha_rule: case.alpha.to_string(),
        alpha: case.alpha.resolve(case.beta),
        h_inv: case.h_inv,
        solver: case.solver,
        linear_solver: case.linear_solver,
        dofs: 0,
        tol: cfg.tolerance(case.h_inv),
        iterations: 0,
        coarse_iterations: 0,
        converged: false,
        residual: f64::NAN,
        seconds: 0.0,
        err_u_l2: f64::NAN,
        err_p_h1: f64::NAN,
        err_p_w1_32: f64::NAN,
        eoc_u: None,
        eoc_p: None,
        constraint_violation: f64::NAN,
        error: Some(err.to_string()),
    }
}

pub fn run_case(case: &Case, cfg: &SweepConfig) -> SweepRow {
    run_case_with_state(case, cfg).map(|(_, row)| row).unwrap_or_else(|e| failed_row(case, cfg, &e))
}

/// Runs every case in order; failures become rows with `error` set.
pub fn run_sweep(cfg: &SweepConfig, mut progress: impl FnMut(&SweepRow)) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = cfg
        .cases()
        .iter()
        .map(|c| {
            let row = run_case(c, cfg);
            progress(&row);
            row
        })
        .collect();
    annotate_eoc(&mut rows);
    rows
}

type SeriesKey = (ProblemName, u64, String, SolverChoice, LinearSolverKind);

fn series_key(r: &SweepRow) -> SeriesKey {
    (r.problem, r.beta.to_bits(), r.alpha_rule.clone(), r.solver, r.linear_solver)
}

/// Fills `eoc_u`/`eoc_p` against the next coarser h of the same series.
pub fn annotate_eoc(rows: &mut [SweepRow]) {
    let mut series: BTreeMap<SeriesKey, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        if r.error.is_none() {
            series.entry(series_key(r)).or_default().push(i);
        }
    }
    for idx in series.values_mut() {
        idx.sort_by_key(|&i| rows[i].h_inv);
        for w in idx.windows(2) {
            let (c, f) = (&rows[w[0]], &rows[w[1]]);
            if f.h_inv == 2 * c.h_inv {
                let (eu, ep) = (eoc(c.err_u_l2, f.err_u_l2), eoc(c.err_p_h1, f.err_p_h1));
                rows[w[1]].eoc_u = Some(eu);
                rows[w[1]].eoc_p = Some(ep);
            }
        }
    }
}

/// Least-squares slope of log(y) against log(x).
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn h_label(h_inv: usize) -> String {
    format!("1/{h_inv}")
}

fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if v == 0.0 || (1e-3..1e6).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

const ROW_HEADER: [&str; 21] = [
    "problem",
    "beta",
    "alpha_rule",
    "alpha",
    "h",
    "h_inv",
    "solver",
    "linear_solver",
    "DoFs",
    "tol",
    "iterations",
    "coarse_iterations",
    "converged",
    "residual",
    "seconds",
    "err_u_l2",
    "err_p_h1",
    "eoc_u",
    "eoc_p",
    "constraint_violation",
    "error",
];

pub fn rows_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(ROW_HEADER)?;
    for r in rows {
        w.write_record([
            r.problem.to_string(),
            num(r.beta),
            r.alpha_rule.clone(),
            num(r.alpha),
            h_label(r.h_inv),
            r.h_inv.to_string(),
            r.solver.to_string(),
            r.linear_solver.to_string(),
            r.dofs.to_string(),
            num(r.tol),
            r.iterations.to_string(),
            r.coarse_iterations.to_string(),
            r.converged.to_string(),
            num(r.residual),
            format!("{:.4}", r.seconds),
            num(r.err_u_l2),
            num(r.err_p_h1),
            opt(r.eoc_u),
            opt(r.eoc_p),
            num(r.constraint_violation),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    finish_csv(w)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn find(rows: &[SweepRow], pred: impl Fn(&SweepRow) -> bool) -> Option<&SweepRow> {
    rows.iter().find(|r| r.error.is_none() && pred(r))
}

fn iters_cell(r: Option<&SweepRow>) -> String {
    match r {
        Some(r) if r.converged => r.iterations.to_string(),
        Some(r) => format!("{}*", r.iterations),
        None => String::new(),
    }
}

fn secs_cell(r: Option<&SweepRow>) -> String {
    r.map(|r| format!("{:.3}", r.seconds)).unwrap_or_default()
}

fn distinct<T: PartialEq + Copy>(it: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for v in it {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Summary table in the requested shape. Unconverged counts carry a `*`.
pub fn table_csv(kind: TableKind, rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match kind {
        TableKind::AlphaRule => {
            w.write_record(["problem", "h", "beta", "I_alpha_1", "I_alpha_inv_beta"])?;
            let keys = distinct(rows.iter().map(|r| (r.problem, r.h_inv, r.beta.to_bits())));
            for (problem, h_inv, beta) in keys {
                let pick = |auto: bool| {
                    find(rows, |r| {
                        r.problem == problem
                            && r.h_inv == h_inv
                            && r.beta.to_bits() == beta
                            && r.solver == SolverChoice::Pr
                            && if auto { r.alpha_rule == "auto" } else { r.alpha == 1.0 && r.alpha_rule != "auto" }
                    })
                };
                w.write_record([
                    problem.to_string(),
                    h_label(h_inv),
                    num(f64::from_bits(beta)),
                    iters_cell(pick(false)),
                    iters_cell(pick(true)),
                ])?;
            }
        }
        TableKind::Complexity => {
            let multi = distinct(rows.iter().map(|r| (r.problem, r.beta.to_bits()))).len() > 1;
            let mut header = vec!["h", "DoFs", "I_pr", "I_mg", "CPU_s1", "CPU_s2", "CPU_mg"];
            if multi {
                header.splice(0..0, ["problem", "beta"]);
            }
            w.write_record(&header)?;
            for (problem, beta) in distinct(rows.iter().map(|r| (r.problem, r.beta.to_bits()))) {
                for h_inv in distinct(rows.iter().filter(|r| r.problem == problem).map(|r| r.h_inv)) {
                    let base = |r: &SweepRow| r.problem == problem && r.beta.to_bits() == beta && r.h_inv == h_inv;
                    let pr_direct = find(rows, |r| base(r) && r.solver == SolverChoice::Pr && r.linear_solver == LinearSolverKind::Direct);
                    let pr_schur = find(rows, |r| base(r) && r.solver == SolverChoice::Pr && r.linear_solver != LinearSolverKind::Direct);
                    let mg = find(rows, |r| base(r) && r.solver == SolverChoice::Mg);
                    let dofs = find(rows, base).map(|r| r.dofs.to_string()).unwrap_or_default();
                    let mut rec = vec![
                        h_label(h_inv),
                        dofs,
                        iters_cell(pr_schur.or(pr_direct)),
                        iters_cell(mg),
                        secs_cell(pr_direct),
                        secs_cell(pr_schur),
                        secs_cell(mg),
                    ];
                    if multi {
                        rec.splice(0..0, [problem.to_string(), num(f64::from_bits(beta))]);
                    }
                    w.write_record(&rec)?;
                }
            }
        }
        TableKind::BetaRobustness => {
            let betas = distinct(rows.iter().map(|r| r.beta.to_bits()));
            let mut header = vec!["problem".to_string(), "h".to_string()];
            header.extend(betas.iter().map(|b| format!("beta={}", f64::from_bits(*b))));
            w.write_record(&header)?;
            for problem in distinct(rows.iter().map(|r| r.problem)) {
                for h_inv in distinct(rows.iter().filter(|r| r.problem == problem).map(|r| r.h_inv)) {
                    let mut rec = vec![problem.to_string(), h_label(h_inv)];
                    for &b in &betas {
                        rec.push(iters_cell(find(rows, |r| {
                            r.problem == problem && r.h_inv == h_inv && r.beta.to_bits() == b && r.solver == SolverChoice::Mg
                        })));
                    }
                    w.write_record(&rec)?;
                }
            }
        }
    }
    finish_csv(w)
}

/// Two-column (N, value) series keyed by file stem, in deterministic order.
pub fn plot_series(rows: &[SweepRow]) -> BTreeMap<(String, &'static str), Vec<(usize, f64)>> {
    let mut out: BTreeMap<(String, &'static str), Vec<(usize, f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.error.is_none()) {
        let stem = format!("{}_beta{}_alpha-{}_{}_{}", r.problem, r.beta, r.alpha_rule, r.solver, r.linear_solver);
        for (q, v) in [("err_u", r.err_u_l2), ("err_p", r.err_p_h1), ("time", r.seconds)] {
            out.entry((stem.clone(), q)).or_default().push((r.dofs, v));
        }
    }
    for s in out.values_mut() {
        s.sort_by_key(|p| p.0);
    }
    out
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    package: &'static str,
    version: &'static str,
    dof_convention: &'static str,
    h_convention: &'static str,
    residual: &'static str,
    seeds: Vec<u64>,
    rows: usize,
    failures: usize,
    config: &'a SweepConfig,
}

/// Writes `<name>_rows.csv`, the summary table, plot data and `<name>_meta.json` into `dir`.
pub fn emit_outputs(rows: &[SweepRow], cfg: &SweepConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |file: String, text: String| -> Result<()> {
        let path = dir.join(file);
        fs::write(&path, text)?;
        written.push(path);
        Ok(())
    };
    put(format!("{}_rows.csv", cfg.name), rows_csv(rows)?)?;
    if let Some(kind) = cfg.table {
        put(format!("{}.csv", cfg.name), table_csv(kind, rows)?)?;
    }
    for ((stem, q), series) in plot_series(rows) {
        let mut text = format!("# N {q}\n");
        for (n, v) in series {
            text.push_str(&format!("{n} {v:e}\n"));
        }
        put(format!("{}_{stem}_{q}.dat", cfg.name), text)?;
    }
    let meta = Metadata {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        dof_convention: DOF_CONVENTION,
        h_convention: H_CONVENTION,
        residual: "r = |f - A(u) - Bp| / |f| + |B^T u - w| / |w| in the Euclidean norm of the assembled vectors",
        seeds: Vec::new(),
        rows: rows.len(),
        failures: rows.iter().filter(|r| r.error.is_some()).count(),
        config: cfg,
    };
    put(format!("{}_meta.json", cfg.name), serde_json::to_string_pretty(&meta)?)?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parses_alpha_rules_and_defaults() {
        let cfg = SweepConfig::from_toml(
            r#"
            name = "demo"
            problems = ["problem2"]
            betas = [10.0]
            h_inv = [4]
            alphas = ["auto", 1.0]
            tol_mode = "h-scaled"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.alphas, vec![AlphaRule::Auto, AlphaRule::Fixed(1.0)]);
        assert_eq!(cfg.smooth_steps, 3);
        assert!((cfg.tolerance(4) - 1.95 / 4.0).abs() < 1e-15);
        assert_eq!(cfg.cases().len(), 4);
        assert!(SweepConfig::from_toml("bogus = 1").is_err());
        assert!(SweepConfig::from_toml("alphas = [0.0]").is_err());
        assert!(SweepConfig::from_toml("betas = [-1.0]").is_err());
    }

    #[test]
    fn presets_exist_for_six_tables() {
        for n in 1..=6 {
            assert!(SweepConfig::table_preset(n).is_ok());
        }
        assert!(SweepConfig::table_preset(7).is_err());
    }

    #[test]
    fn empty_sweep_gives_header_only() {
        let cfg = SweepConfig { h_inv: vec![], table: Some(TableKind::Complexity), ..SweepConfig::default() };
        let rows = run_sweep(&cfg, |_| {});
        assert!(rows.is_empty());
        let table = table_csv(TableKind::Complexity, &rows).unwrap();
        assert_eq!(table, "h,DoFs,I_pr,I_mg,CPU_s1,CPU_s2,CPU_mg\n");
    }

    #[test]
    fn failed_case_is_recorded_and_sweep_continues() {
        let cfg = SweepConfig { h_inv: vec![3, 4], solvers: vec![SolverChoice::Mg], coarse_h_inv: 2, ..SweepConfig::default() };
        let rows = run_sweep(&cfg, |_| {});
        assert_eq!(rows.len(), 2);
        assert!(rows[0].error.is_some());
        assert!(rows[1].error.is_none() && rows[1].converged);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.2)).collect();
        assert!((loglog_slope(&x, &y) - 1.2).abs() < 1e-12);
    }
}
