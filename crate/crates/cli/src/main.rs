use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use acbc::bounds::{estimate_l_c, estimate_l_theta, lipschitz_for_box_class};
use acbc::instance::InstanceSpec;
use acbc::mesh::verify_meshes;
use acbc::oracle::{naive_minimax, table_mismatches};
use acbc::pipeline::{run_sweep, solve, sweep_csv, Solution, SolveOptions};
use acbc::play::{
    deviate_opponent, deviate_player, extract_policies, greedy_player, simulate, GameContext, OpponentStrategy,
    OptimalOpponent, OptimalPlayer, PlayerStrategy, RandomOpponent, Trajectory,
};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

/// Solver for adversarial convex body chasing games over box bodies.
#[derive(Parser)]
#[command(name = "acbc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
    /// Use this L_theta in the schedule instead of the box-class value 1.
    #[arg(long)]
    l_theta_override: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Validate an instance: feasibility and Lipschitz estimates.
    Check {
        #[command(flatten)]
        common: Common,
        /// Sample pairs for each Lipschitz estimate.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
    },
    /// Build and verify the meshes for a target error.
    Mesh {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: f64,
    },
    /// Solve the discretized game.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: f64,
        /// Write the full value tables as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cross-check the tables against exhaustive search (small instances only).
        #[arg(long, hide = true)]
        oracle: bool,
    },
    /// Play one game with the given strategies.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: f64,
        /// optimal | greedy | random | deviate:T:K
        #[arg(long, default_value = "optimal")]
        player: String,
        /// optimal | random[:SEED] | deviate:T:K
        #[arg(long, default_value = "optimal")]
        opponent: String,
        /// Write the trajectory as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve for several target errors and report the achieved error.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated target errors.
        #[arg(long, value_delimiter = ',', required = true)]
        epsilons: Vec<f64>,
        /// Known value of the continuous game.
        #[arg(long, allow_hyphen_values = true)]
        true_value: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write value slices and the equilibrium trajectory as CSV files.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        epsilon: f64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    /// Bad input: exit 1.
    Invalid(String),
    /// The pipeline contradicted itself: exit 2.
    Internal(String),
}

type CliResult = Result<Value, Failure>;

fn invalid(e: impl ToString) -> Failure {
    Failure::Invalid(e.to_string())
}

fn internal(e: impl ToString) -> Failure {
    Failure::Internal(e.to_string())
}

fn load(common: &Common) -> Result<InstanceSpec, Failure> {
    let text = fs::read_to_string(&common.instance)
        .map_err(|e| invalid(format!("cannot read {}: {e}", common.instance.display())))?;
    InstanceSpec::from_json(&text).map_err(invalid)
}

/// Loads the instance and rejects it unless every transition is feasible.
fn load_feasible(common: &Common) -> Result<InstanceSpec, Failure> {
    let spec = load(common)?;
    let report = spec.check_feasibility();
    if let Some(v) = report.violations.first() {
        return Err(invalid(format!(
            "infeasible instance: t={} {} -> {} axis {} endpoint {:?} (overlap {})",
            v.t, v.from, v.to, v.axis, v.endpoint, v.overlap
        )));
    }
    Ok(spec)
}

fn solve_with(spec: &InstanceSpec, common: &Common, epsilon: f64) -> Result<Solution, Failure> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    solve(
        spec,
        &SolveOptions {
            epsilon,
            l_theta_override: common.l_theta_override,
        },
    )
    .map_err(internal)
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))
}

fn check(common: &Common, samples: usize) -> CliResult {
    let spec = load(common)?;
    let report = spec.check_feasibility();
    let (l_c, l_theta) = lipschitz_for_box_class();
    let summary = json!({
        "feasible": report.is_pass(),
        "violations": report.violations,
        "declared": { "l_c": l_c, "l_theta": common.l_theta_override.unwrap_or(l_theta) },
        "estimated": {
            "l_c": estimate_l_c(&spec, samples, common.seed).ok(),
            "l_theta": estimate_l_theta(&spec, samples, common.seed).ok(),
            "samples": samples,
            "seed": common.seed,
        },
    });
    if report.is_pass() {
        Ok(summary)
    } else {
        println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
        Err(invalid("infeasible instance"))
    }
}

fn mesh(common: &Common, epsilon: f64) -> CliResult {
    let spec = load_feasible(common)?;
    let sol = solve_with(&spec, common, epsilon)?;
    let report = verify_meshes(&spec, &sol.schedule, &sol.meshes);
    let summary = json!({
        "epsilon": epsilon,
        "delta": sol.schedule.delta,
        "sizes": sol.meshes.sizes(),
        "total": sol.meshes.total_vertices(),
        "verified": report.is_pass(),
        "report": report,
    });
    if !report.is_pass() {
        println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
        return Err(internal("mesh failed its coverage criteria"));
    }
    Ok(summary)
}

fn solve_cmd(common: &Common, epsilon: f64, out: Option<&Path>, oracle: bool) -> CliResult {
    let spec = load_feasible(common)?;
    let sol = solve_with(&spec, common, epsilon)?;
    let v0: Vec<Value> = (0..spec.node_count())
        .filter_map(|i| {
            sol.tables
                .initial(i)
                .map(|e| json!({ "node": i, "value": e.value, "vertex": e.best }))
        })
        .collect();
    let mut summary = json!({
        "epsilon": epsilon,
        "l_c": sol.schedule.lipschitz.l_c,
        "l_theta": sol.schedule.lipschitz.l_theta,
        "delta": sol.schedule.delta,
        "error_bound": sol.schedule.error_bound(),
        "mesh_sizes": sol.meshes.sizes(),
        "mesh_total": sol.meshes.total_vertices(),
        "U0": sol.game_value(),
        "V0": v0,
        "wall_ms": sol.wall_ms,
    });
    if let Some(path) = out {
        write(path, &sol.tables.to_csv())?;
    }
    if oracle {
        let naive = naive_minimax(&spec, &sol.meshes).map_err(invalid)?;
        let mismatches = table_mismatches(&naive, &sol.tables);
        summary["oracle"] = json!({ "leaves": naive.leaves, "mismatches": mismatches.len() });
        if !mismatches.is_empty() {
            println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
            return Err(internal(format!(
                "tables disagree with exhaustive search: {}",
                mismatches[0]
            )));
        }
    }
    Ok(summary)
}

fn parse_deviation(text: &str) -> Option<(usize, usize)> {
    let rest = text.strip_prefix("deviate:")?;
    let (t, k) = rest.split_once(':')?;
    Some((t.parse().ok()?, k.parse().ok()?))
}

fn simulate_cmd(common: &Common, epsilon: f64, player: &str, opponent: &str, out: Option<&Path>) -> CliResult {
    let spec = load_feasible(common)?;
    let sol = solve_with(&spec, common, epsilon)?;
    let policy = extract_policies(&sol.tables);
    let ctx = GameContext::new(&spec, &sol.meshes);

    let mut p: Box<dyn PlayerStrategy> = match player {
        "optimal" => Box::new(OptimalPlayer(&policy)),
        "greedy" => Box::new(greedy_player()),
        "random" => Box::new(acbc::play::RandomPlayer::new(common.seed)),
        s => match parse_deviation(s) {
            Some((t, k)) => Box::new(deviate_player(&policy, &sol.tables, t, k).map_err(invalid)?),
            None => return Err(invalid(format!("unknown player strategy '{s}'"))),
        },
    };
    let mut o: Box<dyn OpponentStrategy> = match opponent {
        "optimal" => Box::new(OptimalOpponent(&policy)),
        "random" => Box::new(RandomOpponent::new(common.seed)),
        s if s.starts_with("random:") => {
            let seed = s["random:".len()..]
                .parse()
                .map_err(|_| invalid(format!("bad seed in '{s}'")))?;
            Box::new(RandomOpponent::new(seed))
        }
        s => match parse_deviation(s) {
            Some((t, k)) => Box::new(deviate_opponent(&policy, &sol.tables, t, k).map_err(invalid)?),
            None => return Err(invalid(format!("unknown opponent strategy '{s}'"))),
        },
    };

    let traj = simulate(&ctx, p.as_mut(), o.as_mut()).map_err(internal)?;
    traj.check(&spec).map_err(internal)?;
    let u0 = sol.game_value();
    if player == "optimal" && opponent == "optimal" && traj.total_cost != u0 {
        return Err(internal(format!(
            "equilibrium cost {} differs from U0 {u0}",
            traj.total_cost
        )));
    }
    if let Some(path) = out {
        write(path, &traj.to_csv())?;
    }
    Ok(json!({
        "player": player,
        "opponent": opponent,
        "U0": u0,
        "total_cost": traj.total_cost,
        "nodes": traj.nodes,
        "points": traj.points,
        "step_costs": traj.step_costs,
    }))
}

fn sweep_cmd(common: &Common, epsilons: &[f64], true_value: f64, out: Option<&Path>) -> CliResult {
    let spec = load_feasible(common)?;
    if let Some(bad) = epsilons.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(invalid(format!("epsilon must be positive, got {bad}")));
    }
    let rows = run_sweep(&spec, epsilons, true_value, common.l_theta_override).map_err(internal)?;
    let csv = sweep_csv(&rows);
    match out {
        Some(path) => write(path, &csv)?,
        None => print!("{csv}"),
    }
    if let Some(r) = rows.iter().find(|r| r.actual_error > r.desired_error) {
        return Err(internal(format!(
            "actual error {} exceeds the target {}",
            r.actual_error, r.desired_error
        )));
    }
    Ok(Value::Null)
}

fn value_slices(spec: &InstanceSpec, sol: &Solution) -> String {
    use std::fmt::Write as _;
    let mut out = String::from("t,node,vertex_id");
    for k in 0..spec.dimension() {
        let _ = write!(out, ",x{k}");
    }
    out.push_str(",value,best_action\n");
    let mut row = |t: usize, node: usize, vertex: usize, coords: &[f64], value: f64, best: usize| {
        let _ = write!(out, "{t},{node},{vertex}");
        for c in coords {
            let _ = write!(out, ",{c}");
        }
        let _ = writeln!(out, ",{value},{best}");
    };
    // V_0(i) is reported at the chosen initial vertex
    for i in 0..spec.node_count() {
        if let Some(e) = sol.tables.initial(i) {
            row(0, i, e.best, sol.meshes.vertex(0, e.best), e.value, e.best);
        }
    }
    for t in 1..=spec.horizon() {
        let stage = sol.tables.stage(t).expect("stage within horizon");
        for (v, node, e) in stage.player_entries() {
            row(t, node, v, sol.meshes.vertex(t - 1, v), e.value, e.best);
        }
    }
    out
}

fn export(common: &Common, epsilon: f64, dir: &Path) -> CliResult {
    let spec = load_feasible(common)?;
    let sol = solve_with(&spec, common, epsilon)?;
    let policy = extract_policies(&sol.tables);
    let ctx = GameContext::new(&spec, &sol.meshes);
    let traj: Trajectory =
        simulate(&ctx, &mut OptimalPlayer(&policy), &mut OptimalOpponent(&policy)).map_err(internal)?;
    fs::create_dir_all(dir).map_err(|e| invalid(format!("cannot create {}: {e}", dir.display())))?;
    let values = dir.join("values.csv");
    let trajectory = dir.join("trajectory.csv");
    write(&values, &value_slices(&spec, &sol))?;
    write(&trajectory, &traj.to_csv())?;
    Ok(json!({
        "values": values.display().to_string(),
        "trajectory": trajectory.display().to_string(),
        "U0": sol.game_value(),
    }))
}

fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Check { common, samples } => check(common, *samples),
        Command::Mesh { common, epsilon } => mesh(common, *epsilon),
        Command::Solve {
            common,
            epsilon,
            out,
            oracle,
        } => solve_cmd(common, *epsilon, out.as_deref(), *oracle),
        Command::Simulate {
            common,
            epsilon,
            player,
            opponent,
            out,
        } => simulate_cmd(common, *epsilon, player, opponent, out.as_deref()),
        Command::Sweep {
            common,
            epsilons,
            true_value,
            out,
        } => sweep_cmd(common, epsilons, *true_value, out.as_deref()),
        Command::Export { common, epsilon, out } => export(common, *epsilon, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(Value::Null) => ExitCode::SUCCESS,
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
            ExitCode::SUCCESS
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}
