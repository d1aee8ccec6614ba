//! Receding-horizon execution loop: move the robot along the current plan,
//! observe announced events, replan with computation-time accounting, and
//! record completions and metrics.  Deterministic given the scenario seed.

use crate::buchi::{BuchiAutomaton, StateId};
use crate::plan::TimedPlan;
use crate::product::{build_reduced_graph, GraphError, ProductNode};
use crate::dyncost::dy_cost;
use crate::solvers::{greedy1, greedy2, plan_in_h, static_plan_timed, ObjectiveConfig};
use crate::workspace::{Cell, DynamicEvent, Time, Workspace};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    DtStar,
    Greedy1,
    Greedy2,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::DtStar => "dtstar",
            Algorithm::Greedy1 => "greedy1",
            Algorithm::Greedy2 => "greedy2",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "dtstar" | "dt*" => Ok(Algorithm::DtStar),
            "greedy1" => Ok(Algorithm::Greedy1),
            "greedy2" => Ok(Algorithm::Greedy2),
            other => Err(format!("unknown algorithm `{other}`")),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub arrival_mean: f64,
    pub arrival_std: f64,
    pub duration_mean: f64,
    pub duration_std: f64,
    /// Cells blocked per change (1..=max_cells chosen uniformly).
    pub max_cells: usize,
    /// Restrict blockages to proposition cells (the common case).
    pub proposition_only: bool,
}

#[derive(Clone, Debug)]
pub enum EventSource {
    Scripted(Vec<DynamicEvent>),
    Generated(GeneratorParams),
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub workspace: Workspace,
    pub automaton: BuchiAutomaton,
    pub events: EventSource,
    pub horizon: Time,
    pub time_comp: Time,
    pub total_time: Time,
}

/// Sample the full event ledger for one run.  Arrival gaps and durations are
/// rounded Gaussians clamped to ≥ 1 s; each change blocks 1..=max_cells cells
/// chosen uniformly without replacement; announcement coincides with arrival.
pub fn env_changes(
    gen: &GeneratorParams,
    w: &Workspace,
    total_time: Time,
    rng: &mut impl Rng,
) -> Vec<DynamicEvent> {
    let pool: Vec<Cell> = if gen.proposition_only {
        w.labeled_cells().map(|(c, _)| c).collect()
    } else {
        (0..w.height())
            .flat_map(|y| (0..w.width()).map(move |x| Cell::new(x, y)))
            .filter(|c| w.is_free(*c) && *c != w.initial())
            .collect()
    };
    let arrival = Normal::new(gen.arrival_mean, gen.arrival_std.max(0.0)).unwrap();
    let duration = Normal::new(gen.duration_mean, gen.duration_std.max(0.0)).unwrap();
    let sample = |rng: &mut dyn rand::RngCore, d: &Normal<f64>| -> Time {
        let v = d.sample(rng).round();
        if v < 1.0 {
            1
        } else {
            v as Time
        }
    };
    let mut events = Vec::new();
    if pool.is_empty() {
        return events;
    }
    let mut t: Time = 0;
    loop {
        t = t.saturating_add(sample(rng, &arrival));
        if t > total_time {
            break;
        }
        let kmax = gen.max_cells.clamp(1, pool.len());
        let k = rng.random_range(1..=kmax);
        let picked = rand::seq::index::sample(rng, pool.len(), k);
        for i in picked.iter() {
            let dur = sample(rng, &duration);
            events.push(DynamicEvent {
                cell: pool[i],
                t_start: t,
                t_end: t + dur,
                announced_at: t,
            });
        }
    }
    events
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplanTrigger {
    /// An event's announcement tick was reached.
    Change,
    /// A blockage released (greedy baselines revisit their commitment).
    Release,
    /// The current plan ran out.
    Exhausted,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ReplanRecord {
    pub trigger: ReplanTrigger,
    /// Tick at which replanning was triggered.
    pub time: Time,
    /// Simulated seconds charged (time_comp per solver attempt; 0 for greedy).
    pub charged: Time,
    /// Measured wall-clock seconds of the solve.
    pub wall: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub cell: Cell,
    pub q: usize,
    pub time: Time,
    pub len: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExecutionLog {
    /// trace[t] = robot cell at tick t, t = 0..=total_time.
    pub trace: Vec<Cell>,
    pub events: Vec<DynamicEvent>,
    pub replans: Vec<ReplanRecord>,
    pub completions: Vec<CompletionRecord>,
    /// Every plan handed to the executor, in order.
    pub plans: Vec<TimedPlan>,
}

#[derive(Error, Debug)]
pub enum SimError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("simulation error: {0}")]
    Other(String),
}

/// Execute one scenario with one algorithm.  DT* runs the receding-horizon
/// loop (replanning on announced changes and plan exhaustion, charging
/// time_comp per solver attempt while the robot waits); the greedy baselines
/// additionally revisit their commitment when a blockage releases, and their
/// planning time is ignored.
pub fn run(s: &Scenario, algo: Algorithm, seed: u64) -> Result<ExecutionLog, SimError> {
    run_with_objectives(s, algo, seed, ObjectiveConfig::default())
}

pub fn run_with_objectives(
    s: &Scenario,
    algo: Algorithm,
    seed: u64,
    cfg: ObjectiveConfig,
) -> Result<ExecutionLog, SimError> {
    let w = &s.workspace;
    let b = &s.automaton;
    let events: Vec<DynamicEvent> = match &s.events {
        EventSource::Scripted(list) => list.clone(),
        EventSource::Generated(gen) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            env_changes(gen, w, s.total_time, &mut rng)
        }
    };
    let g0 = build_reduced_graph(w, b)?;

    let mut change_triggers: BTreeSet<Time> = events
        .iter()
        .map(|e| e.announced_at)
        .filter(|t| *t <= s.total_time)
        .collect();
    let mut release_triggers: BTreeSet<Time> = if algo == Algorithm::DtStar {
        BTreeSet::new()
    } else {
        events
            .iter()
            .map(|e| e.t_end)
            .filter(|t| *t <= s.total_time)
            .collect()
    };

    let mut t: Time = 0;
    let mut cell = w.initial();
    let mut q: StateId = *b.initial_states().iter().min().unwrap();
    let mut trace = vec![cell];
    let mut completions: Vec<CompletionRecord> = Vec::new();
    let mut last_acc: Option<(ProductNode, Time)> = None;
    let mut replans: Vec<ReplanRecord> = Vec::new();
    let mut plans: Vec<TimedPlan> = Vec::new();
    let mut queue: VecDeque<(Time, Cell)> = VecDeque::new();

    let install = |plans: &mut Vec<TimedPlan>,
                       queue: &mut VecDeque<(Time, Cell)>,
                       plan: TimedPlan,
                       t: Time,
                       cell: Cell| {
        debug_assert_eq!(plan.steps[0], (t, cell));
        queue.clear();
        queue.extend(plan.steps[1..].iter().copied());
        plans.push(plan);
    };

    // offline initial plan (events are invisible before the mission starts)
    if !(change_triggers.contains(&0) || release_triggers.contains(&0)) {
        let plan = match algo {
            Algorithm::DtStar | Algorithm::Greedy1 => {
                static_plan_timed(&g0, w, b, s.total_time)?
            }
            Algorithm::Greedy2 => greedy2(&g0, w, b, &[], 0, s.total_time)?,
        };
        install(&mut plans, &mut queue, plan, t, cell);
    }

    'sim: while t < s.total_time {
        let pending_change = change_triggers.first().copied().filter(|tt| *tt <= t);
        let pending_release = release_triggers.first().copied().filter(|tt| *tt <= t);
        if pending_change.is_some() || pending_release.is_some() || queue.is_empty() {
            let trigger = if pending_change.is_some() {
                ReplanTrigger::Change
            } else if pending_release.is_some() {
                ReplanTrigger::Release
            } else {
                ReplanTrigger::Exhausted
            };
            let trigger_time = t;
            change_triggers.retain(|tt| *tt > t);
            release_triggers.retain(|tt| *tt > t);
            let pos = ProductNode { cell, q };
            let g = g0.update_graph(w, b, pos)?;
            match algo {
                Algorithm::DtStar => {
                    let mut charged = 0;
                    let mut wall = 0.0f64;
                    loop {
                        // the robot waits while the solver runs
                        let budget = s.time_comp.max(0);
                        for _ in 0..budget {
                            if t >= s.total_time {
                                break;
                            }
                            t += 1;
                            trace.push(cell);
                            charged += 1;
                        }
                        if t >= s.total_time {
                            replans.push(ReplanRecord {
                                trigger,
                                time: trigger_time,
                                charged,
                                wall,
                            });
                            break 'sim;
                        }
                        let clock = std::time::Instant::now();
                        let costs = dy_cost(&g, t, s.horizon, w, b, &events);
                        let result = plan_in_h(&g, w, b, &events, t, s.horizon, &costs, cfg)?;
                        wall += clock.elapsed().as_secs_f64();
                        match result {
                            Some(hp) => {
                                install(&mut plans, &mut queue, hp.plan, t, cell);
                                replans.push(ReplanRecord {
                                    trigger,
                                    time: trigger_time,
                                    charged,
                                    wall,
                                });
                                break;
                            }
                            None => {
                                if s.time_comp == 0 {
                                    // avoid a zero-progress loop: wait one tick
                                    if t >= s.total_time {
                                        break 'sim;
                                    }
                                    t += 1;
                                    trace.push(cell);
                                    charged += 1;
                                }
                            }
                        }
                    }
                }
                Algorithm::Greedy1 | Algorithm::Greedy2 => {
                    let clock = std::time::Instant::now();
                    let plan = if algo == Algorithm::Greedy1 {
                        greedy1(&g, w, b, &events, t, s.total_time)?
                    } else {
                        greedy2(&g, w, b, &events, t, s.total_time)?
                    };
                    let wall = clock.elapsed().as_secs_f64();
                    install(&mut plans, &mut queue, plan, t, cell);
                    replans.push(ReplanRecord {
                        trigger,
                        time: trigger_time,
                        charged: 0,
                        wall,
                    });
                }
            }
            continue;
        }

        let (t1, c1) = queue.pop_front().expect("queue nonempty");
        debug_assert_eq!(t1, t + 1);
        t = t1;
        trace.push(c1);
        if c1 != cell {
            // moving reads the destination label; waiting reads nothing
            let nexts = b.step(q, w.label_of(c1));
            let Some(&q1) = nexts.iter().min() else {
                return Err(SimError::Other(format!(
                    "plan stepped {} -> {} with no automaton transition",
                    cell, c1
                )));
            };
            q = q1;
            if b.is_accepting(q) {
                let node = ProductNode { cell: c1, q };
                if let Some((prev, t0)) = last_acc {
                    if prev == node {
                        completions.push(CompletionRecord {
                            cell: c1,
                            q: q.0,
                            time: t,
                            len: t - t0,
                        });
                    }
                }
                last_acc = Some((node, t));
            }
        }
        cell = c1;
    }

    debug_assert_eq!(trace.len() as u32, s.total_time + 1);
    Ok(ExecutionLog {
        trace,
        events,
        replans,
        completions,
        plans,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricsReport {
    pub cycles: u32,
    pub replan_count: usize,
    pub replan_wall_mean: f64,
    pub replan_wall_std: f64,
}

pub fn metrics(log: &ExecutionLog, t_end: Time) -> MetricsReport {
    let cycles = log.completions.iter().filter(|c| c.time <= t_end).count() as u32;
    let walls: Vec<f64> = log.replans.iter().map(|r| r.wall).collect();
    let (mean, std) = mean_std(&walls);
    MetricsReport {
        cycles,
        replan_count: log.replans.len(),
        replan_wall_mean: mean,
        replan_wall_std: std,
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
    (mean, var.sqrt())
}
