//! Command-line front end: run scenarios, compare algorithms, seeded sweeps
//! with CSV output, plan verification, and reduced-graph export.
//!
//! CSV schemas:
//!   run/verify metrics: scenario,algorithm,objectives,seed,cycles,replans,
//!                       replan_wall_mean,replan_wall_std
//!   sweep:              axis,value,algorithm,objectives,seed,cycles,replans

use clap::{Args, Parser, Subcommand, ValueEnum};
use dtstar::{
    build_reduced_graph, dy_cost, emit_smtlib, load_scenario, run_with_objectives, Algorithm,
    EventSource, ExecutionLog, ObjectiveConfig, Scenario,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

mod warehouse;

#[derive(Parser)]
#[command(name = "dtstar", about = "Repetitive-task planning under timed blockages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario with one or more algorithms and emit logs + metrics.
    Run(RunArgs),
    /// Vary one experiment parameter, 50 seeds each by default, CSV out.
    Sweep(SweepArgs),
    /// Run and check every emitted plan against the mission automaton.
    Verify(CommonArgs),
    /// Print the reduced product graph of a scenario as JSON.
    DumpGraph(DumpArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Algorithms to run (comma-separated: dtstar, greedy1, greedy2, all).
    #[arg(long, default_value = "all", value_delimiter = ',')]
    algo: Vec<String>,
    /// Number of seeds (0..N); scripted scenarios ignore the seed value.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Override the scenario's planning horizon.
    #[arg(long)]
    horizon: Option<u32>,
    /// Override the scenario's charged computation time per solve.
    #[arg(long)]
    time_comp: Option<u32>,
    /// Override the scenario's mission duration.
    #[arg(long)]
    total_time: Option<u32>,
    /// Objective set for the exact solver.
    #[arg(long, value_enum, default_value_t = Objectives::Full)]
    objectives: Objectives,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Directory for per-run execution logs and metrics.csv (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the first horizon solve's constraint model as SMT-LIB here.
    #[arg(long)]
    emit_smt: Option<PathBuf>,
    /// Check every emitted plan against the automaton; fail nonzero otherwise.
    #[arg(long)]
    verify: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Parameter to vary; the rest stay at the scenario's values.
    #[arg(long, value_enum)]
    axis: Axis,
    /// CSV output file (stdout otherwise).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for fanning runs out.
    #[arg(long, default_value_t = 4)]
    jobs: usize,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Objectives {
    /// cy_count only.
    Cycles,
    /// cy_count, then last cycle length.
    CyclesLen,
    /// All three lexicographic objectives.
    Full,
}

impl Objectives {
    fn config(self) -> ObjectiveConfig {
        match self {
            Objectives::Cycles => ObjectiveConfig::only_cycles(),
            Objectives::CyclesLen => ObjectiveConfig { use_last_len: true, use_t_total: false },
            Objectives::Full => ObjectiveConfig::default(),
        }
    }

    fn name(self) -> &'static str {
        match self {
            Objectives::Cycles => "cycles",
            Objectives::CyclesLen => "cycles+len",
            Objectives::Full => "full",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Axis {
    /// Number of pickup/drop pairs in a generated warehouse.
    Propositions,
    /// Mean seconds between environment changes.
    Arrival,
    /// Mean blockage duration.
    Duration,
    /// Maximum cells blocked per change.
    MaxBlocked,
    /// Warehouse side length (generated layout).
    GridSize,
    /// Objective subsets for the exact solver (DT* only).
    Objectives,
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Verify(args) => cmd_verify(args),
        Command::DumpGraph(args) => cmd_dump(args),
    }
}

fn load(common: &CommonArgs) -> Result<Scenario, ExitCode> {
    let mut s = load_scenario(&common.scenario).map_err(|e| fail(2, e))?;
    if let Some(h) = common.horizon {
        s.horizon = h;
    }
    if let Some(c) = common.time_comp {
        s.time_comp = c;
    }
    if let Some(t) = common.total_time {
        s.total_time = t;
    }
    Ok(s)
}

fn algorithms(names: &[String]) -> Result<Vec<Algorithm>, ExitCode> {
    let mut out = Vec::new();
    for n in names {
        if n == "all" {
            return Ok(vec![Algorithm::DtStar, Algorithm::Greedy1, Algorithm::Greedy2]);
        }
        out.push(n.parse::<Algorithm>().map_err(|e| fail(2, e))?);
    }
    Ok(out)
}

struct Outcome {
    algo: Algorithm,
    seed: u64,
    log: ExecutionLog,
}

fn execute(
    s: &Scenario,
    algos: &[Algorithm],
    seeds: u64,
    cfg: ObjectiveConfig,
) -> Result<Vec<Outcome>, ExitCode> {
    if seeds == 0 {
        return Err(fail(2, "--seeds must be at least 1"));
    }
    let mut out = Vec::new();
    for &algo in algos {
        for seed in 0..seeds {
            let log = run_with_objectives(s, algo, seed, cfg).map_err(|e| fail(1, e))?;
            out.push(Outcome { algo, seed, log });
        }
    }
    Ok(out)
}

fn metrics_csv(s: &Scenario, scenario_name: &str, obj: Objectives, runs: &[Outcome]) -> String {
    let mut csv = String::from(
        "scenario,algorithm,objectives,seed,cycles,replans,replan_wall_mean,replan_wall_std\n",
    );
    for r in runs {
        let m = dtstar::metrics(&r.log, s.total_time);
        csv.push_str(&format!(
            "{},{},{},{},{},{},{:.6},{:.6}\n",
            scenario_name,
            r.algo.name(),
            obj.name(),
            r.seed,
            m.cycles,
            m.replan_count,
            m.replan_wall_mean,
            m.replan_wall_std
        ));
    }
    csv
}

fn scenario_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into())
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), ExitCode> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| fail(1, format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let s = match load(&args.common) {
        Ok(s) => s,
        Err(c) => return c,
    };
    let algos = match algorithms(&args.common.algo) {
        Ok(a) => a,
        Err(c) => return c,
    };
    if let Some(path) = &args.emit_smt {
        if let Err(c) = emit_first_model(&s, args.common.objectives.config(), path) {
            return c;
        }
    }
    let runs = match execute(&s, &algos, args.common.seeds, args.common.objectives.config()) {
        Ok(r) => r,
        Err(c) => return c,
    };
    if args.verify {
        for r in &runs {
            for (i, p) in r.log.plans.iter().enumerate() {
                match s.automaton.verify_plan(&s.workspace, p) {
                    Ok(true) => {}
                    Ok(false) => {
                        return fail(
                            1,
                            format!("{} seed {} plan {i} violates the mission", r.algo.name(), r.seed),
                        )
                    }
                    Err(e) => return fail(1, format!("{} seed {} plan {i}: {e}", r.algo.name(), r.seed)),
                }
            }
        }
    }
    let name = scenario_name(&args.common.scenario);
    let csv = metrics_csv(&s, &name, args.common.objectives, &runs);
    if let Some(dir) = &args.out {
        if let Err(e) = std::fs::create_dir_all(dir) {
            return fail(1, format!("{}: {e}", dir.display()));
        }
        for r in &runs {
            let file = dir.join(format!("run_{}_{}.json", r.algo.name(), r.seed));
            let text = serde_json::to_string_pretty(&r.log).expect("log serializes");
            if let Err(e) = std::fs::write(&file, text) {
                return fail(1, format!("{}: {e}", file.display()));
            }
        }
        if let Err(c) = write_or_print(Some(&dir.join("metrics.csv")), &csv) {
            return c;
        }
    } else if let Err(c) = write_or_print(None, &csv) {
        return c;
    }
    ExitCode::SUCCESS
}

/// SMT-LIB export of the first receding-horizon model (t = 0, visible events).
fn emit_first_model(s: &Scenario, cfg: ObjectiveConfig, path: &Path) -> Result<(), ExitCode> {
    let events = match &s.events {
        EventSource::Scripted(ev) => ev.clone(),
        EventSource::Generated(_) => Vec::new(), // nothing announced at t = 0
    };
    let g = build_reduced_graph(&s.workspace, &s.automaton).map_err(|e| fail(1, e))?;
    let costs = dy_cost(&g, 0, s.horizon, &s.workspace, &s.automaton, &events);
    let dag = dtstar::expand(&g, 0, s.horizon, &costs);
    let cons = dtstar::gen_cons(&dag);
    let obj = dtstar::objectives(&cons);
    let text = emit_smtlib(&cons, &obj, cfg);
    std::fs::write(path, text).map_err(|e| fail(1, format!("{}: {e}", path.display())))
}

fn cmd_verify(common: CommonArgs) -> ExitCode {
    let s = match load(&common) {
        Ok(s) => s,
        Err(c) => return c,
    };
    let algos = match algorithms(&common.algo) {
        Ok(a) => a,
        Err(c) => return c,
    };
    let runs = match execute(&s, &algos, common.seeds, common.objectives.config()) {
        Ok(r) => r,
        Err(c) => return c,
    };
    let mut checked = 0usize;
    for r in &runs {
        for (i, p) in r.log.plans.iter().enumerate() {
            match s.automaton.verify_plan(&s.workspace, p) {
                Ok(true) => checked += 1,
                Ok(false) => {
                    return fail(
                        1,
                        format!("{} seed {} plan {i} violates the mission", r.algo.name(), r.seed),
                    )
                }
                Err(e) => return fail(1, format!("{} seed {} plan {i}: {e}", r.algo.name(), r.seed)),
            }
        }
    }
    println!("verified {checked} plans across {} runs", runs.len());
    ExitCode::SUCCESS
}

fn cmd_dump(args: DumpArgs) -> ExitCode {
    let s = match load_scenario(&args.scenario).map_err(|e| fail(2, e)) {
        Ok(s) => s,
        Err(c) => return c,
    };
    let g = match build_reduced_graph(&s.workspace, &s.automaton) {
        Ok(g) => g,
        Err(e) => return fail(1, e),
    };
    let v = g.dump_json(&s.automaton);
    let text = serde_json::to_string_pretty(&v).expect("graph serializes");
    match write_or_print(args.out.as_deref(), &(text + "\n")) {
        Ok(()) => ExitCode::SUCCESS,
        Err(c) => c,
    }
}

/// One sweep point: a concrete scenario plus its CSV identity.
struct Job {
    value: String,
    algo: Algorithm,
    obj: Objectives,
    seed: u64,
    scenario: Scenario,
}

fn sweep_jobs(args: &SweepArgs, base: &Scenario) -> Result<Vec<Job>, ExitCode> {
    let algos = algorithms(&args.common.algo)?;
    let seeds = 0..args.common.seeds;
    let mut jobs = Vec::new();
    let mut push_points = |points: Vec<(String, Scenario)>| {
        for (value, sc) in points {
            for &algo in &algos {
                for seed in seeds.clone() {
                    jobs.push(Job {
                        value: value.clone(),
                        algo,
                        obj: args.common.objectives,
                        seed,
                        scenario: sc.clone(),
                    });
                }
            }
        }
    };
    let generated = |s: &Scenario| -> Result<dtstar::GeneratorParams, ExitCode> {
        match &s.events {
            EventSource::Generated(g) => Ok(g.clone()),
            EventSource::Scripted(_) => Err(fail(
                2,
                "this axis needs a scenario with a `generator` block",
            )),
        }
    };
    match args.axis {
        Axis::Arrival => {
            let g0 = generated(base)?;
            push_points(
                [60.0, 80.0, 100.0, 120.0, 140.0]
                    .iter()
                    .map(|&mean| {
                        let mut s = base.clone();
                        let mut g = g0.clone();
                        g.arrival_mean = mean;
                        s.events = EventSource::Generated(g);
                        (format!("{mean}"), s)
                    })
                    .collect(),
            );
        }
        Axis::Duration => {
            let g0 = generated(base)?;
            push_points(
                [30.0, 50.0, 70.0, 90.0, 110.0]
                    .iter()
                    .map(|&mean| {
                        let mut s = base.clone();
                        let mut g = g0.clone();
                        g.duration_mean = mean;
                        s.events = EventSource::Generated(g);
                        (format!("{mean}"), s)
                    })
                    .collect(),
            );
        }
        Axis::MaxBlocked => {
            let g0 = generated(base)?;
            push_points(
                (1..=4)
                    .map(|k| {
                        let mut s = base.clone();
                        let mut g = g0.clone();
                        g.max_cells = k;
                        s.events = EventSource::Generated(g);
                        (format!("{k}"), s)
                    })
                    .collect(),
            );
        }
        Axis::GridSize => {
            let g0 = generated(base)?;
            let mut points = Vec::new();
            for side in [20u16, 30, 40, 50] {
                let mut s = base.clone();
                s.workspace = warehouse::layout(side, 3).map_err(|e| fail(1, e))?;
                s.events = EventSource::Generated(g0.clone());
                points.push((format!("{side}"), s));
            }
            push_points(points);
        }
        Axis::Propositions => {
            let g0 = generated(base)?;
            let mut points = Vec::new();
            for pairs in [1usize, 2, 3, 4, 5] {
                let mut s = base.clone();
                s.workspace = warehouse::layout(20, pairs).map_err(|e| fail(1, e))?;
                s.events = EventSource::Generated(g0.clone());
                points.push((format!("{pairs}"), s));
            }
            push_points(points);
        }
        Axis::Objectives => {
            for obj in [Objectives::Cycles, Objectives::CyclesLen, Objectives::Full] {
                for seed in seeds.clone() {
                    jobs.push(Job {
                        value: obj.name().into(),
                        algo: Algorithm::DtStar,
                        obj,
                        seed,
                        scenario: base.clone(),
                    });
                }
            }
        }
    }
    Ok(jobs)
}

fn cmd_sweep(args: SweepArgs) -> ExitCode {
    let base = match load(&args.common) {
        Ok(s) => s,
        Err(c) => return c,
    };
    let jobs = match sweep_jobs(&args, &base) {
        Ok(j) => j,
        Err(c) => return c,
    };
    let rows: Vec<Mutex<Option<Result<String, String>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = args.jobs.clamp(1, 64);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(job) = jobs.get(i) else { break };
                let row = run_with_objectives(&job.scenario, job.algo, job.seed, job.obj.config())
                    .map(|log| {
                        let m = dtstar::metrics(&log, job.scenario.total_time);
                        format!(
                            "{},{},{},{},{},{}\n",
                            args.axis
                                .to_possible_value()
                                .expect("visible variant")
                                .get_name(),
                            job.value,
                            job.algo.name(),
                            job.obj.name(),
                            job.seed,
                            m.cycles
                        )
                    })
                    .map_err(|e| e.to_string());
                *rows[i].lock().unwrap() = Some(row);
            });
        }
    });
    let mut csv = String::from("axis,value,algorithm,objectives,seed,cycles\n");
    for row in &rows {
        match row.lock().unwrap().take().expect("all jobs ran") {
            Ok(line) => csv.push_str(&line),
            Err(e) => return fail(1, e),
        }
    }
    match write_or_print(args.out.as_deref(), &csv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(c) => c,
    }
}
