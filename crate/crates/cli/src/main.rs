use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dfmg::checks::run_checks;
use dfmg::harness::{emit_outputs, rows_csv, run_sweep, table_csv, AlphaRule, SolverChoice, SweepConfig, SweepRow, TolMode};
use dfmg::mesh::build_uniform_square_mesh;
use dfmg::{LinearSolverKind, ProblemName, Rect};

#[derive(Parser)]
#[command(name = "dfmg", version, about = "Darcy-Forchheimer solver benchmarks: Peaceman-Rachford and FAS multigrid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep from a config file, with optional overrides.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        over: Overrides,
    },
    /// Run one of the six preset benchmark tables.
    Table {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=6))]
        number: u8,
        #[command(flatten)]
        over: Overrides,
    },
    /// Run the randomized property checks.
    Check {
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Write the uniform mesh in node/element text format.
    Mesh {
        #[arg(long)]
        h_inv: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long, value_delimiter = ',')]
    problem: Vec<ProblemName>,
    #[arg(long, value_delimiter = ',')]
    beta: Vec<f64>,
    /// Cells per unit length, e.g. 64 for h = 1/64.
    #[arg(long, value_delimiter = ',')]
    h_inv: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    solver: Vec<SolverChoice>,
    /// Splitting parameter: a number or `auto` (1/β).
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<AlphaRule>,
    #[arg(long)]
    tol: Option<f64>,
    /// `fixed` or `h-scaled` (tol = 1.95 h).
    #[arg(long)]
    tol_mode: Option<TolMode>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    max_cycles: Option<usize>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    smooth_steps: Option<usize>,
    #[arg(long)]
    coarse_h_inv: Option<usize>,
    /// schur (s2), direct (s1) or cg.
    #[arg(long)]
    linear_solver: Option<LinearSolverKind>,
    /// Finest h_inv for direct LU runs (memory bound).
    #[arg(long)]
    max_direct_h_inv: Option<usize>,
    /// Output directory for CSV, plot data and metadata.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn apply(self, cfg: &mut SweepConfig) {
        fn set<T>(dst: &mut Vec<T>, src: Vec<T>) {
            if !src.is_empty() {
                *dst = src;
            }
        }
        set(&mut cfg.problems, self.problem);
        set(&mut cfg.betas, self.beta);
        set(&mut cfg.h_inv, self.h_inv);
        set(&mut cfg.solvers, self.solver);
        set(&mut cfg.alphas, self.alpha);
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.tol_mode {
            cfg.tol_mode = v;
        }
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.max_cycles {
            cfg.max_cycles = v;
        }
        if self.levels.is_some() {
            cfg.levels = self.levels;
        }
        if let Some(v) = self.smooth_steps {
            cfg.smooth_steps = v;
        }
        if let Some(v) = self.coarse_h_inv {
            cfg.coarse_h_inv = v;
        }
        if let Some(k) = self.linear_solver {
            cfg.linear_solvers = vec![k];
            cfg.mg_linear_solver = k;
        }
        if let Some(v) = self.max_direct_h_inv {
            cfg.max_direct_h_inv = v;
        }
        if self.out.is_some() {
            cfg.output_dir = self.out;
        }
    }
}

fn progress(row: &SweepRow) {
    match &row.error {
        Some(e) => eprintln!("{} beta={} h=1/{} {}: failed: {e}", row.problem, row.beta, row.h_inv, row.solver),
        None => eprintln!(
            "{} beta={} alpha={} h=1/{} {}/{}: {} its{} r={:.2e} {:.2}s err_u={:.3e}",
            row.problem,
            row.beta,
            row.alpha_rule,
            row.h_inv,
            row.solver,
            row.linear_solver,
            row.iterations,
            if row.converged { "" } else { " (not converged)" },
            row.residual,
            row.seconds,
            row.err_u_l2
        ),
    }
}

fn sweep(mut cfg: SweepConfig, over: Overrides) -> dfmg::Result<()> {
    over.apply(&mut cfg);
    cfg.validate()?;
    let rows = run_sweep(&cfg, progress);
    match cfg.table {
        Some(kind) => print!("{}", table_csv(kind, &rows)?),
        None => print!("{}", rows_csv(&rows)?),
    }
    if let Some(dir) = &cfg.output_dir {
        for path in emit_outputs(&rows, &cfg, dir)? {
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> dfmg::Result<bool> {
    match cli.command {
        Command::Run { config, over } => {
            let cfg = match config {
                Some(path) => SweepConfig::load(&path)?,
                None => SweepConfig::default(),
            };
            sweep(cfg, over)?;
        }
        Command::Table { number, over } => sweep(SweepConfig::table_preset(number)?, over)?,
        Command::Check { seed } => {
            let outcomes = run_checks(seed)?;
            for c in &outcomes {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            return Ok(outcomes.iter().all(|c| c.passed));
        }
        Command::Mesh { h_inv, out } => {
            let mesh = build_uniform_square_mesh(Rect::reference_square(), 2 * h_inv)?;
            match out {
                Some(path) => mesh.write_node_element(BufWriter::new(File::create(path)?))?,
                None => mesh.write_node_element(io::stdout().lock())?,
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(dfmg::Error::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
