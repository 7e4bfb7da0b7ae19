use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use semilab_core::harness::{
    export, rows_to_csv, run, verify, CellRunner, ExperimentSpec, ExportFormat, Functional, HarnessError, Report, ResolvedSpec, RunOptions,
};
use semilab_core::helmholtz::{solve_full, solve_rescaled, solve_shifted_only, solve_single, SpectralSolution};
use semilab_core::model::Scenario;
use std::path::PathBuf;
use std::process::ExitCode;

const REFERENCE_CONFIG: &str = include_str!("../../../configs/reference.toml");

#[derive(Parser, Debug)]
#[command(name = "semilab", version, about = "Semiclassical Helmholtz experiments and acceptance checks")]
struct Cli {
    /// Experiment config (TOML); defaults to the built-in reference config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Monte Carlo seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Relative tolerance of pairing quadratures.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output directory for results, reports and the cell cache.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a spectral solution at points.
    Solve {
        #[arg(long)]
        eps: f64,
        /// full, shifted, rescaled0, rescaled1, single0 or single1.
        #[arg(long, default_value = "full")]
        kind: String,
        /// Comma-separated point; repeatable. Defaults to the origin.
        #[arg(long = "at")]
        at: Vec<String>,
    },
    /// Pair a^eps with test fields.
    Pair {
        #[arg(long)]
        eps: Vec<f64>,
        #[arg(long)]
        id: Vec<String>,
    },
    /// Wigner pairings <W^eps, a> (or the cross term) for observables.
    Wigner {
        #[arg(long)]
        eps: Vec<f64>,
        #[arg(long)]
        id: Vec<String>,
        #[arg(long)]
        cross: bool,
    },
    /// Ray-measure pairings for observables.
    Mu {
        #[arg(long)]
        id: Vec<String>,
    },
    /// Run the configured sweep and criteria; writes results.csv and report.json.
    Sweep,
    /// Run an acceptance suite on the reference scenario: identities, sweeps, all, or one criterion id.
    Verify {
        #[arg(default_value = "identities")]
        suite: String,
    },
    /// Run the configured sweep and write one output file.
    Export {
        /// csv or json-report.
        #[arg(long)]
        format: String,
        #[arg(long)]
        path: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.chain().any(|c| matches!(c.downcast_ref::<HarnessError>(), Some(HarnessError::Config(_))));
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    HarnessError::Config(msg.into()).into()
}

fn load_spec(cli: &Cli) -> Result<ExperimentSpec> {
    let mut spec = match &cli.config {
        Some(p) => ExperimentSpec::load(p)?,
        None => ExperimentSpec::from_toml(REFERENCE_CONFIG)?,
    };
    if let Some(s) = cli.seed {
        spec.quad.seed = s;
    }
    if let Some(t) = cli.tol {
        spec.quad.rel_tol = t;
    }
    if let Some(o) = &cli.out {
        spec.output.dir = o.clone();
    }
    Ok(spec)
}

fn opts(cli: &Cli) -> RunOptions {
    RunOptions { jobs: cli.jobs, ..RunOptions::default() }
}

fn dispatch(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Solve { eps, kind, at } => {
            let r = load_spec(cli)?.resolve()?;
            solve(&r.scenario, *eps, kind, at)
        }
        Command::Pair { eps, id } => cells(cli, Functional::AEpsPairing, eps, id),
        Command::Wigner { eps, id, cross } => cells(cli, if *cross { Functional::CrossTerm } else { Functional::Wigner }, eps, id),
        Command::Mu { id } => cells(cli, Functional::Mu, &[], id),
        Command::Sweep => {
            let spec = load_spec(cli)?;
            let out = run(&spec, &opts(cli))?;
            export(&out, ExportFormat::Csv, &spec.output.dir.join("results.csv"))?;
            export(&out, ExportFormat::JsonReport, &spec.output.dir.join("report.json"))?;
            print_report(&out.report);
            Ok(out.report.all_passed())
        }
        Command::Verify { suite } => {
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let report = verify(suite, &opts(cli), Some(dir.join("cache")))?;
            std::fs::create_dir_all(&dir).with_context(|| dir.display().to_string())?;
            std::fs::write(dir.join(format!("verify-{suite}.json")), report.to_json())?;
            print_report(&report);
            Ok(report.all_passed())
        }
        Command::Export { format, path } => {
            let fmt: ExportFormat = format.parse().map_err(config_err)?;
            let spec = load_spec(cli)?;
            let path = path.clone().unwrap_or_else(|| {
                spec.output.dir.join(match fmt {
                    ExportFormat::Csv => "results.csv",
                    ExportFormat::JsonReport => "report.json",
                })
            });
            let out = run(&spec, &opts(cli))?;
            export(&out, fmt, &path)?;
            println!("wrote {}", path.display());
            Ok(out.report.all_passed())
        }
    }
}

fn print_report(r: &Report) {
    for c in &r.criteria {
        println!("{}", c.line());
    }
    for f in &r.failures {
        eprintln!("cell failure: {f:?}");
    }
}

fn cells(cli: &Cli, f: Functional, eps: &[f64], ids: &[String]) -> Result<bool> {
    let spec = load_spec(cli)?;
    let r: ResolvedSpec = spec.resolve()?;
    let grid = if f.eps_independent() { vec![0.0] } else if eps.is_empty() { r.epsilons.clone() } else { eps.to_vec() };
    if grid.iter().any(|e| !(*e > 0.0) && !f.eps_independent()) {
        return Err(config_err("eps must be positive"));
    }
    let targets = r.targets(f, ids)?;
    let cache = spec.output.cache.then(|| spec.output.dir.join("cache"));
    let runner = CellRunner::new(r.scenario.clone(), &spec.scenario.id, spec.quad.pairing_quad(), cache);
    let work = || {
        for (id, t) in &targets {
            for &e in &grid {
                let _ = runner.eval(f, id, t, e);
            }
        }
    };
    match cli.jobs {
        Some(n) => rayon_pool(n)?.install(work),
        None => work(),
    }
    print!("{}", rows_to_csv(&runner.rows()));
    let failures = runner.failures();
    for fl in &failures {
        eprintln!("cell failure: {fl:?}");
    }
    Ok(failures.is_empty())
}

fn rayon_pool(n: usize) -> Result<semilab_core::harness::ThreadPool> {
    semilab_core::harness::thread_pool(n).map_err(Into::into)
}

fn solve(s: &Scenario, eps: f64, kind: &str, at: &[String]) -> Result<bool> {
    if !(eps > 0.0) {
        return Err(config_err("eps must be positive"));
    }
    let sol: SpectralSolution = match kind {
        "full" => solve_full(s, eps),
        "shifted" => solve_shifted_only(s, eps),
        "rescaled0" => solve_rescaled(s, eps, 0),
        "rescaled1" => solve_rescaled(s, eps, 1),
        "single0" => solve_single(s, eps, 0),
        "single1" => solve_single(s, eps, 1),
        _ => return Err(config_err(format!("unknown solution kind {kind}"))),
    };
    let points: Vec<Vec<f64>> = if at.is_empty() {
        vec![vec![0.0; s.d]]
    } else {
        at.iter()
            .map(|p| {
                let v = p.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>().map_err(|e| config_err(format!("point {p}: {e}")))?;
                if v.len() != s.d {
                    bail!(config_err(format!("point {p} has {} coordinates, expected {}", v.len(), s.d)));
                }
                Ok(v)
            })
            .collect::<Result<_>>()?
    };
    println!("point,value_re,value_im");
    for x in &points {
        let v = sol.evaluate_exact(x)?;
        let p = x.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(" ");
        println!("{p},{:.16e},{:.16e}", v.re, v.im);
    }
    Ok(true)
}
