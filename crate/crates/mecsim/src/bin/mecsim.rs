use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mecsim::env::DemandModel;
use mecsim::scenario::load_scenario;
use mecsim::sim::{PathMode, PlannerKind, SimConfig};
use mecsim::sweep::{
    run_once, run_sweep, trace_to_jsonl, SweepAxis, SweepSpec, METRICS_HEADER, SWEEP_HEADER,
};

#[derive(Parser)]
#[command(name = "mecsim", about = "Multi-UAV mobile-edge-computing path planning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML)
    #[arg(long)]
    scenario: PathBuf,
    /// Override the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    /// Planner: rl or astar
    #[arg(long)]
    planner: Option<String>,
    /// Demand model: sigmoid or linear
    #[arg(long)]
    demand: Option<String>,
    /// Path extraction: descent or verbatim
    #[arg(long = "path-mode")]
    path_mode: Option<String>,
    /// Risk tolerance weight
    #[arg(long = "K")]
    k_risk: Option<f64>,
    /// Service priority weight
    #[arg(long = "M")]
    m_demand: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long = "max-ticks")]
    max_ticks: Option<usize>,
    /// Output directory (metrics.csv, trace.jsonl); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a single run and emit a metrics row plus a trace
    Run(RunArgs),
    /// Sweep K or M over a list of values with derived per-repetition seeds
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Sweep axis: K or M
        #[arg(long)]
        axis: String,
        /// Comma-separated, strictly increasing values
        #[arg(long)]
        values: String,
        /// Repetitions per value
        #[arg(long, default_value_t = 1)]
        reps: usize,
    },
    /// Parse and validate a scenario without running it
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn apply_overrides(config: &mut SimConfig, args: &RunArgs) -> Result<(), String> {
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(p) = &args.planner {
        config.planner_kind = match p.as_str() {
            "rl" => PlannerKind::Rl,
            "astar" => PlannerKind::Astar,
            other => return Err(format!("unknown planner '{other}' (expected rl|astar)")),
        };
    }
    if let Some(d) = &args.demand {
        config.demand_model = match d.as_str() {
            "sigmoid" => DemandModel::Sigmoid,
            "linear" => DemandModel::linear_default(),
            other => return Err(format!("unknown demand model '{other}' (expected sigmoid|linear)")),
        };
    }
    if let Some(m) = &args.path_mode {
        config.path_mode = match m.as_str() {
            "descent" => PathMode::Descent,
            "verbatim" => PathMode::Verbatim,
            other => return Err(format!("unknown path mode '{other}' (expected descent|verbatim)")),
        };
    }
    if let Some(k) = args.k_risk {
        config.reward_params.k_risk = k;
    }
    if let Some(m) = args.m_demand {
        config.reward_params.m_demand = m;
    }
    if let Some(t) = args.max_ticks {
        config.max_ticks = t;
    }
    // eta/beta rebuild the demand params through the validating constructor
    if args.eta.is_some() || args.beta.is_some() {
        let dp = config.world.demand_params;
        let new = mecsim::env::DemandParams::new(
            args.eta.unwrap_or(dp.eta),
            args.beta.unwrap_or(dp.beta),
            dp.tau,
            dp.epsilon,
        )
        .map_err(|e| e.to_string())?;
        config.world.demand_params = new;
    }
    Ok(())
}

fn write_outputs(out: &Option<PathBuf>, metrics_csv: &str, trace: Option<&str>) -> Result<(), String> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
            let mpath = dir.join("metrics.csv");
            std::fs::write(&mpath, metrics_csv)
                .map_err(|e| format!("cannot write {}: {e}", mpath.display()))?;
            if let Some(t) = trace {
                let tpath = dir.join("trace.jsonl");
                std::fs::write(&tpath, t)
                    .map_err(|e| format!("cannot write {}: {e}", tpath.display()))?;
            }
        }
        None => {
            print!("{metrics_csv}");
            if let Some(t) = trace {
                print!("{t}");
            }
        }
    }
    Ok(())
}

fn main_inner() -> Result<(), String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let (_, mut config) = load_scenario(&args.scenario).map_err(|e| e.to_string())?;
            apply_overrides(&mut config, &args)?;
            let (trace, row) = run_once(&config).map_err(|e| e.to_string())?;
            let csv = format!("{METRICS_HEADER}\n{}\n", row.csv_line(false));
            write_outputs(&args.out, &csv, Some(&trace_to_jsonl(&trace)))?;
            Ok(())
        }
        Command::Sweep {
            run,
            axis,
            values,
            reps,
        } => {
            let (_, mut config) = load_scenario(&run.scenario).map_err(|e| e.to_string())?;
            apply_overrides(&mut config, &run)?;
            let axis = match axis.as_str() {
                "K" => SweepAxis::K,
                "M" => SweepAxis::M,
                other => return Err(format!("unknown axis '{other}' (expected K|M)")),
            };
            let values: Vec<f64> = values
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad value '{v}': {e}")))
                .collect::<Result<_, _>>()?;
            let spec = SweepSpec { axis, values, reps };
            let (rows, failures) = run_sweep(&config, &spec).map_err(|e| e.to_string())?;
            let mut csv = String::from(SWEEP_HEADER);
            csv.push('\n');
            for row in &rows {
                csv.push_str(&row.csv_line(true));
                csv.push('\n');
            }
            write_outputs(&run.out, &csv, None)?;
            for f in &failures {
                eprintln!("sweep point failed: {f}");
            }
            Ok(())
        }
        Command::Validate { scenario } => {
            let (world, config) = load_scenario(&scenario).map_err(|e| e.to_string())?;
            println!(
                "ok: grid {n}x{n}, {obs} obstacles, {users} users, {uavs} UAVs, max_ticks {ticks}",
                n = world.grid_n,
                obs = world.obstacles.len(),
                users = world.users.len(),
                uavs = config.uav_starts.len(),
                ticks = config.max_ticks,
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
