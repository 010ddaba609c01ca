use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde_json::json;

use tfjko::caputo_l1::FractionalOrder;
use tfjko::entropic_ot::DykstraParams;
use tfjko::experiments::{
    mc_validate, run_convergence_study, second_moment, ExperimentConfig, FieldTable, McValidation,
    Metadata, OutputFormat,
};
use tfjko::forcing::Forcing;
use tfjko::grid::{build_grid, DiscreteDensity};
use tfjko::jko_solver::{free_energy, solve, JkoSolver, SolverConfig};
use tfjko::{Error, Result};

/// Time-fractional Fokker-Planck solver built on entropic JKO steps.
///
/// Any flag can also come from a key=value file given with `--config FILE`;
/// flags on the command line take precedence.
#[derive(Parser, Debug)]
#[command(name = "tfjko", version, args_override_self = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one problem and print the final density.
    Solve(SolveArgs),
    /// Temporal convergence study against a fine reference solve.
    Study(StudyArgs),
    /// Compare a Monte-Carlo endpoint histogram with the JKO solution.
    McValidate(McArgs),
    /// Time the Dykstra proximal steps of a short run.
    ProxBench(BenchArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// zero, linear (x), half-square (x^2/2) or sum-2d (x1+x2)
    #[arg(long, default_value = "linear")]
    forcing: Forcing,
    /// Cells per axis; defaults to 128 in 1D and 32 in 2D
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    /// Dykstra tolerance; defaults to 1e-8 times the cell count
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, default_value_t = DykstraParams::DEFAULT_MAX_ITER)]
    max_iters: usize,
    /// Output file; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv, json or pretty
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

impl Common {
    fn grid_size(&self) -> usize {
        self.grid_size
            .unwrap_or(if self.forcing.dim() == 2 { 32 } else { 128 })
    }

    fn solver_config(&self, alpha: f64, steps: usize) -> Result<SolverConfig> {
        let grid = build_grid(self.forcing.dim(), self.grid_size())?;
        let mut cfg = SolverConfig::new(
            FractionalOrder::new(alpha)?,
            self.horizon,
            steps,
            self.forcing.potential(&grid)?,
            DiscreteDensity::uniform(grid),
        )?;
        if let Some(eps) = self.eps {
            cfg.dykstra.tolerance = eps;
        }
        cfg.dykstra.max_iter = self.max_iters;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long, default_value_t = 0.6)]
    alpha: f64,
    #[arg(long, default_value_t = 160)]
    steps: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct StudyArgs {
    /// Comma-separated orders
    #[arg(long, value_delimiter = ',', default_value = "0.6,0.8,1.0")]
    alpha: Vec<f64>,
    /// Comma-separated step counts
    #[arg(long, value_delimiter = ',', default_value = "20,40,80,160,320")]
    steps: Vec<usize>,
    #[arg(long, default_value_t = 1280)]
    ref_steps: usize,
    /// Fixed entropic parameter for W errors; 1/N of each run when absent
    #[arg(long)]
    gamma_eval: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct McArgs {
    #[arg(long, default_value_t = 0.8)]
    alpha: f64,
    /// Time steps of the deterministic solve
    #[arg(long, default_value_t = 320)]
    steps: usize,
    #[arg(long, default_value_t = 200_000)]
    paths: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cells per axis of the histogram
    #[arg(long, default_value_t = 32)]
    grid_size: usize,
    #[arg(long, default_value = "linear")]
    forcing: Forcing,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1e-3)]
    ds: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = 0.6)]
    alpha: f64,
    /// Step count that fixes tau and gamma
    #[arg(long, default_value_t = 320)]
    steps: usize,
    /// Number of levels to run
    #[arg(long, default_value_t = 10)]
    levels: usize,
    #[command(flatten)]
    common: Common,
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_solve(args: SolveArgs) -> Result<()> {
    let cfg = args.common.solver_config(args.alpha, args.steps)?;
    let grid = *cfg.grid();
    let (tau, gamma, eps) = (cfg.tau(), cfg.gamma(), cfg.dykstra.tolerance);
    let psi = cfg.potential.clone();
    let traj = solve(cfg)?;
    let last = traj.last();
    let mut m = Metadata::default();
    m.push("tool", concat!("tfjko ", env!("CARGO_PKG_VERSION")));
    m.push("alpha", args.alpha);
    m.push("forcing", args.common.forcing);
    m.push("grid_size", grid.cells_per_axis());
    m.push("horizon", args.common.horizon);
    m.push("steps", args.steps);
    m.push("tau", format!("{tau:e}"));
    m.push("gamma", format!("{gamma:e}"));
    m.push("dykstra_eps", format!("{eps:e}"));
    m.push("free_energy", format!("{:e}", free_energy(last, &psi)));
    m.push("second_moment", format!("{:e}", second_moment(last, &grid)?));
    let iters = traj.reports().iter().map(|r| r.iterations).max().unwrap_or(0);
    m.push("max_dykstra_iterations", iters);
    let mut table = FieldTable::cells(m, &grid, &[("prob", last)])?;
    table.columns.push("density".into());
    for (row, u) in table.rows.iter_mut().zip(last.function_values()) {
        row.push(u);
    }
    emit(&table.render(args.common.format), args.common.out.as_deref())
}

fn run_study(args: StudyArgs) -> Result<()> {
    let config = ExperimentConfig {
        forcing: args.common.forcing,
        alphas: args.alpha,
        steps: args.steps,
        ref_steps: args.ref_steps,
        grid_size: args.common.grid_size(),
        horizon: args.common.horizon,
        gamma_eval: args.gamma_eval,
        eps: args.common.eps,
        max_iter: args.common.max_iters,
    };
    let table = run_convergence_study(&config)?;
    emit(&table.render(args.common.format), args.common.out.as_deref())
}

fn run_mc(args: McArgs) -> Result<()> {
    let cfg = McValidation {
        alpha: args.alpha,
        forcing: args.forcing,
        grid_size: args.grid_size,
        horizon: args.horizon,
        steps: args.steps,
        paths: args.paths,
        seed: args.seed,
        ds: args.ds,
        dt: args.dt,
    };
    let table = mc_validate(&cfg)?.to_table(&cfg)?;
    emit(&table.render(args.format), args.out.as_deref())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let cfg = args.common.solver_config(args.alpha, args.steps)?;
    let grid = *cfg.grid();
    let mut m = Metadata::default();
    m.push("tool", concat!("tfjko ", env!("CARGO_PKG_VERSION")));
    m.push("alpha", args.alpha);
    m.push("forcing", args.common.forcing);
    m.push("grid_size", grid.cells_per_axis());
    m.push("steps", args.steps);
    m.push("gamma", format!("{:e}", cfg.gamma()));
    m.push("kernel", format!("{:?}", cfg.representation()));
    let mut solver = JkoSolver::new(cfg)?;
    let mut rows = Vec::new();
    for _ in 0..args.levels.min(args.steps) {
        let start = Instant::now();
        solver.step()?;
        let secs = start.elapsed().as_secs_f64();
        let r = solver.reports().last().expect("one report per level");
        rows.push(vec![r.level as f64, r.iterations as f64, r.violation, secs]);
    }
    let table = FieldTable {
        metadata: m,
        columns: ["level", "iterations", "violation", "seconds"].map(String::from).to_vec(),
        rows,
    };
    emit(&table.render(args.common.format), args.common.out.as_deref())
}

/// Long flag names accepted by a subcommand.
fn known_flags(sub: &str) -> HashSet<String> {
    Cli::command()
        .find_subcommand(sub)
        .map(|c| {
            c.get_arguments()
                .filter_map(|a| a.get_long().map(String::from))
                .collect()
        })
        .unwrap_or_default()
}

/// Pulls `--config FILE` out of `argv` and splices the file's settings in
/// directly after the subcommand, ahead of the user's own flags.
fn expand_config(argv: Vec<String>) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(argv.len());
    let mut config: Option<String> = None;
    let mut it = argv.into_iter();
    while let Some(arg) = it.next() {
        if arg == "--config" {
            let path = it
                .next()
                .ok_or_else(|| Error::InvalidConfig("--config needs a file".into()))?;
            config = Some(path);
        } else if let Some(path) = arg.strip_prefix("--config=") {
            config = Some(path.to_string());
        } else {
            rest.push(arg);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {path}: {e}")))?;
    let Some(sub_at) = rest.iter().skip(1).position(|a| !a.starts_with('-')).map(|i| i + 1) else {
        return Ok(rest);
    };
    let known = known_flags(&rest[sub_at]);
    // list flags append rather than override, so settings given on the
    // command line are dropped from the file instead
    let given: HashSet<&str> = rest[sub_at + 1..]
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split_once('=').map_or(a, |(k, _)| k))
        .collect();
    let mut injected = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("{path}:{}: expected key=value", lineno + 1))
        })?;
        let key = key.trim().replace('_', "-");
        if !known.contains(&key) {
            return Err(Error::InvalidConfig(format!(
                "{path}:{}: '{key}' is not a flag of {}",
                lineno + 1,
                rest[sub_at]
            )));
        }
        if !given.contains(key.as_str()) {
            injected.push(format!("--{key}={}", value.trim()));
        }
    }
    rest.splice(sub_at + 1..sub_at + 1, injected);
    Ok(rest)
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let argv = match expand_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => return fail(e.kind(), e.to_string(), 2),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.render().to_string().trim().to_string(), 2),
    };
    let result = match cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Study(a) => run_study(a),
        Command::McValidate(a) => run_mc(a),
        Command::ProxBench(a) => run_bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.to_string(), 1),
    }
}
