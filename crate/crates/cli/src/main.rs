use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use platform_sim::abm::run_strategies;
use platform_sim::dynamics::{
    check_theorems, AxisSpec, DpConfig, DpSolver, MarketState, PlatformModel, StateGrid, AXIS_NAMES,
};
use platform_sim::equilibrium::{check_lemma_orderings, sample_instance, solve_static, surplus_report, InstanceFamily};
use platform_sim::report::{aggregate_runs, export, read_timeseries, Format};
use platform_sim::{derive_stream, Objective, Profile, SimConfig, StaticParams, StreamId, Strategy};

#[derive(Parser, Debug)]
#[command(name = "platform-sim", version, about = "Food-delivery platform economics: static game, dynamic program and agent-based market")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the one-period game for the GMV and SW objectives.
    Static(StaticArgs),
    /// Solve the infinite-horizon program by value iteration.
    Dp(DpArgs),
    /// Run the agent-based market and export the aggregate report.
    Run(RunArgs),
    /// Re-aggregate an exported timeseries.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Config file (TOML), or `default` for the built-in dictionary.
    #[arg(long, value_name = "PATH", default_value = "default")]
    config: String,
    /// Named preset applied on top of the config.
    #[arg(long, value_name = "NAME", default_value = "default", value_parser = parse_profile)]
    profile: Profile,
}

#[derive(Args, Debug)]
struct SeedArg {
    /// Master seed; falls back to PLATFORM_SIM_SEED.
    #[arg(long, value_name = "U64", env = "PLATFORM_SIM_SEED", default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Debug)]
struct StaticArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    seed: SeedArg,
    /// Objectives to solve.
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_value = "GMV,SW", value_parser = parse_objective)]
    objective: Vec<Objective>,
    /// Parameter file (TOML with theta, eta, delta, beta_time, gamma, v, fixed_cost, delivery_time).
    #[arg(long, value_name = "PATH", conflicts_with = "instances")]
    params: Option<PathBuf>,
    /// Random instances to draw instead of the canonical parameters.
    #[arg(long, value_name = "N")]
    instances: Option<usize>,
    /// Family for random instances.
    #[arg(long, value_enum, default_value_t = Family::General)]
    family: Family,
    /// Write static.json here instead of printing JSON lines.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    General,
    Typical,
}

#[derive(Args, Debug)]
struct DpArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Objectives to solve.
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_value = "GMV,SW", value_parser = parse_objective)]
    objective: Vec<Objective>,
    /// Discount factor.
    #[arg(long, value_name = "BETA", default_value_t = 0.9)]
    discount: f64,
    /// Sup-norm stopping tolerance.
    #[arg(long, value_name = "TOL", default_value_t = 1e-6)]
    tol: f64,
    /// Iteration cap.
    #[arg(long, value_name = "N", default_value_t = 10_000)]
    max_iter: usize,
    /// State grid: a point count for every axis, or AXIS=lo:hi:n entries
    /// (axes R, C, W, Phi) overriding R=0:200:9,C=0:2000:9,W=0:300:9,Phi=0:1:9.
    #[arg(long, value_name = "SPEC", default_value = "9", value_parser = parse_grid)]
    grid: StateGrid,
    /// Points per control axis.
    #[arg(long, value_name = "N", default_value_t = 5)]
    control_points: usize,
    /// Compare the SW-optimal and GMV-optimal policies (needs both objectives).
    #[arg(long)]
    check_theorems: bool,
    /// Write dp.json here instead of printing it.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also write values_<OBJ>.csv with one row per grid node (needs --out).
    #[arg(long, requires = "out")]
    dump_values: bool,
    #[command(flatten)]
    jobs: JobsArg,
}

#[derive(Args, Debug)]
struct JobsArg {
    /// Worker threads; 0 uses every core.
    #[arg(long, value_name = "N", default_value_t = 0)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Strategies, run under paired seeds.
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_value = "GMV,SW,HYBRID", value_parser = parse_strategy)]
    strategy: Vec<Strategy>,
    /// Runs per strategy [default: DEFAULT_RUNS from the config, 5; 50 under paper-experiment].
    #[arg(long, value_name = "N")]
    runs: Option<usize>,
    /// Periods per run [default: N_PERIODS from the config, 200; 500 under paper-experiment].
    #[arg(long, value_name = "N")]
    periods: Option<usize>,
    #[command(flatten)]
    seed: SeedArg,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Output format: csv or json.
    #[arg(long, value_name = "FORMAT", default_value = "csv", value_parser = parse_format)]
    format: Format,
    #[command(flatten)]
    jobs: JobsArg,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// An exported timeseries.csv, or the directory holding it.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "report")]
    out: PathBuf,
    /// Output format: csv or json.
    #[arg(long, value_name = "FORMAT", default_value = "csv", value_parser = parse_format)]
    format: Format,
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    s.parse()
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    s.parse()
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.trim().parse().map_err(|e| format!("{e}"))
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_grid(spec: &str) -> Result<StateGrid, String> {
    let mut grid = StateGrid::default();
    if let Ok(n) = spec.trim().parse::<usize>() {
        for ax in &mut grid.axes {
            *ax = AxisSpec::new(ax.lo, ax.hi, n);
        }
        return grid.validate().map(|_| grid);
    }
    for entry in spec.split(',') {
        let (name, range) = entry
            .split_once('=')
            .ok_or_else(|| format!("grid entry `{entry}` is not AXIS=lo:hi:n"))?;
        let k = AXIS_NAMES
            .iter()
            .position(|a| a.eq_ignore_ascii_case(name.trim()))
            .ok_or_else(|| format!("unknown grid axis `{name}`; valid axes are {{R, C, W, Phi}}"))?;
        let parts: Vec<&str> = range.split(':').collect();
        let [lo, hi, n] = parts[..] else {
            return Err(format!("grid entry `{entry}` is not AXIS=lo:hi:n"));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("bad number `{x}` in `{entry}`"));
        let n = n.trim().parse::<usize>().map_err(|_| format!("bad point count in `{entry}`"))?;
        grid.axes[k] = AxisSpec::new(num(lo)?, num(hi)?, n);
    }
    grid.validate().map(|_| grid)
}

/// A runtime failure tagged with the module it came from.
struct Failure {
    module: &'static str,
    message: String,
}

impl Failure {
    fn new(module: &'static str, e: impl fmt::Display) -> Failure {
        Failure {
            module,
            message: e.to_string(),
        }
    }
}

enum Exit {
    Usage(String),
    Runtime(Failure),
}

impl From<Failure> for Exit {
    fn from(f: Failure) -> Exit {
        Exit::Runtime(f)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Exit::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(Exit::Runtime(f)) => {
            eprintln!("error [{}]: {}", f.module, f.message);
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Exit> {
    match command {
        Command::Static(a) => cmd_static(a),
        Command::Dp(a) => with_jobs(a.jobs.jobs, || cmd_dp(a)),
        Command::Run(a) => with_jobs(a.jobs.jobs, || cmd_run(a)),
        Command::Report(a) => cmd_report(a),
    }
}

fn with_jobs<T>(jobs: usize, f: impl FnOnce() -> Result<T, Exit> + Send) -> Result<T, Exit>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::new("cli", e))?;
    pool.install(f)
}

fn load_config(args: &ConfigArgs) -> Result<SimConfig, Failure> {
    let mut cfg = if args.config == "default" {
        SimConfig::default()
    } else {
        SimConfig::from_path(Path::new(&args.config)).map_err(|e| Failure::new("model_core", e))?
    };
    args.profile.apply(&mut cfg);
    Ok(cfg)
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::new("cli", format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, text).map_err(io)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values always serialize");
    s.push('\n');
    s
}

fn cmd_static(a: StaticArgs) -> Result<(), Exit> {
    let cfg = load_config(&a.config)?;
    let bounds = cfg.control_bounds();
    let instances: Vec<StaticParams> = match (&a.params, a.instances) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::new("static_equilibrium", format!("{}: {e}", path.display())))?;
            let p: StaticParams = toml::from_str(&text)
                .map_err(|e| Failure::new("static_equilibrium", format!("{}: {e}", path.display())))?;
            vec![p]
        }
        (None, Some(n)) => {
            let family = match a.family {
                Family::General => InstanceFamily::General,
                Family::Typical => InstanceFamily::Typical,
            };
            (0..n)
                .map(|i| sample_instance(family, &bounds, &mut derive_stream(a.seed.seed, i, StreamId::Market)).0)
                .collect()
        }
        (None, None) => vec![StaticParams::canonical()],
    };

    let mut records = Vec::with_capacity(instances.len());
    for (i, p) in instances.iter().enumerate() {
        let fail = |e: platform_sim::equilibrium::StaticError| Failure::new("static_equilibrium", format!("instance {i}: {e}"));
        p.validate().map_err(|e| Failure::new("static_equilibrium", format!("instance {i}: {e}")))?;
        let mut optima = serde_json::Map::new();
        for &obj in &a.objective {
            let s = solve_static(obj, p, &bounds).map_err(fail)?;
            let surplus = surplus_report(&s.controls, p).map_err(fail)?;
            optima.insert(obj.to_string(), json!({ "solution": s, "surplus": surplus }));
        }
        let mut record = json!({ "instance": i, "params": p, "optima": optima });
        if a.objective.contains(&Objective::Gmv) && a.objective.contains(&Objective::Sw) {
            let lemma = check_lemma_orderings(p, &bounds).map_err(fail)?;
            record["lemmas"] = json!({
                "orderings_hold": lemma.orderings_hold(),
                "sw_dominates": lemma.sw_dominates,
                "detail": lemma,
            });
        }
        records.push(record);
    }

    match a.out {
        Some(dir) => write_file(&dir.join("static.json"), &pretty(&Value::Array(records)))?,
        None => {
            let mut out = std::io::stdout().lock();
            for r in &records {
                writeln!(out, "{r}").map_err(|e| Failure::new("cli", e))?;
            }
        }
    }
    Ok(())
}

fn summary(values: &[f64]) -> Value {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    json!({ "min": min, "max": max, "mean": mean })
}

fn cmd_dp(a: DpArgs) -> Result<(), Exit> {
    if a.check_theorems && !(a.objective.contains(&Objective::Gmv) && a.objective.contains(&Objective::Sw)) {
        return Err(Exit::Usage("--check-theorems needs --objective GMV,SW".into()));
    }
    let sim = load_config(&a.config)?;
    let cfg = DpConfig {
        discount: a.discount,
        grid: a.grid,
        tol: a.tol,
        max_iter: a.max_iter,
        ..DpConfig::with_bounds(&sim.control_bounds(), a.control_points)
    };
    let model = PlatformModel::canonical();
    let solver = DpSolver::new(&model, cfg.clone()).map_err(|e| Failure::new("dynamic_program", e))?;
    let s0 = MarketState::canonical();

    let mut objectives = a.objective.clone();
    objectives.dedup();
    let mut solved = Vec::new();
    let mut out = serde_json::Map::new();
    for &obj in &objectives {
        let (vf, policy) = solver.value_iteration(obj).map_err(|e| Failure::new("dynamic_program", e))?;
        let mut usage = vec![0usize; policy.control_set.len()];
        for &k in &policy.actions {
            usage[k as usize] += 1;
        }
        let table: Vec<Value> = policy
            .control_set
            .iter()
            .zip(&usage)
            .filter(|(_, &n)| n > 0)
            .map(|(c, n)| json!({ "commission": c.commission, "delivery_fee": c.delivery_fee, "wage": c.wage, "nodes": n }))
            .collect();
        out.insert(
            obj.to_string(),
            json!({
                "iterations": vf.residual_history.len(),
                "residual_history": vf.residual_history,
                "values": summary(&vf.values),
                "value_at_s0": solver.grid().interpolate(&vf.values, &s0),
                "policy_table": table,
            }),
        );
        solved.push((obj, vf, policy));
    }

    let mut report = json!({
        "discount": cfg.discount,
        "tol": cfg.tol,
        "grid": cfg.grid.axes.iter().zip(AXIS_NAMES).map(|(ax, n)| json!({ "axis": n, "lo": ax.lo, "hi": ax.hi, "n": ax.n })).collect::<Vec<_>>(),
        "controls": solver.control_set().len(),
        "s0": s0,
        "objectives": out,
    });
    if a.check_theorems {
        let policy = |o| &solved.iter().find(|(x, _, _)| *x == o).expect("both objectives solved").2;
        let r = check_theorems(&solver, policy(Objective::Sw), policy(Objective::Gmv), s0, a.tol);
        report["theorems"] = json!(r);
    }

    match a.out {
        Some(dir) => {
            write_file(&dir.join("dp.json"), &pretty(&report))?;
            if a.dump_values {
                for (obj, vf, policy) in &solved {
                    let mut text = String::from("R,C,W,Phi,value,alpha,D,p\n");
                    for node in 0..solver.nodes() {
                        let s = solver.grid().node_state(node);
                        let c = policy.controls(node);
                        text.push_str(&format!(
                            "{},{},{},{},{},{},{},{}\n",
                            s.restaurants, s.consumers, s.workers, s.reputation, vf.values[node], c.commission, c.delivery_fee, c.wage
                        ));
                    }
                    write_file(&dir.join(format!("values_{obj}.csv")), &text)?;
                }
            }
        }
        None => print!("{}", pretty(&report)),
    }
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<(), Exit> {
    let cfg = load_config(&a.config)?;
    let runs = a.runs.unwrap_or(cfg.default_runs);
    let periods = a.periods.unwrap_or(cfg.n_periods);
    if runs == 0 || periods == 0 {
        return Err(Exit::Usage("--runs and --periods must be at least 1".into()));
    }
    let mut strategies = a.strategy.clone();
    strategies.sort();
    strategies.dedup();
    let results = run_strategies(&cfg, &strategies, a.seed.seed, runs, periods);
    let report = aggregate_runs(&results).map_err(|e| Failure::new("metrics_report", e))?;
    let files = export(&report, &a.out, a.format).map_err(|e| Failure::new("metrics_report", e))?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<(), Exit> {
    let input = if a.input.is_dir() {
        a.input.join("timeseries.csv")
    } else {
        a.input.clone()
    };
    let results = read_timeseries(&input).map_err(|e| Failure::new("metrics_report", e))?;
    let report = aggregate_runs(&results).map_err(|e| Failure::new("metrics_report", e))?;
    let files = export(&report, &a.out, a.format).map_err(|e| Failure::new("metrics_report", e))?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}
