//! Planning engine and scenario simulator for repetitive temporal-logic
//! missions on grid workspaces with timed dynamic blockages: receding-horizon
//! optimizer, greedy baselines, plan verifier, and a deterministic simulator.

pub mod buchi;
pub mod dyncost;
pub mod horizon;
pub mod plan;
pub mod product;
pub mod scenario;
pub mod simulator;
pub mod solvers;
pub mod workspace;

pub use buchi::{BuchiAutomaton, Guard, LassoTrace, StateId};
pub use dyncost::{dy_cost, timed_shortest_path, EdgeCostTable, TimedPath};
pub use horizon::{expand, gen_cons, objectives, DecisionDag, DecisionNode};
pub use plan::TimedPlan;
pub use product::{build_reduced_graph, NodeId, ProductNode, ReducedGraph};
pub use scenario::{load_scenario, parse_scenario, ScenarioError};
pub use simulator::{
    env_changes, metrics, run, run_with_objectives, Algorithm, EventSource, ExecutionLog,
    GeneratorParams, Scenario,
};
pub use solvers::{
    emit_smtlib, greedy1, greedy2, plan_in_h, solve_exact, static_plan_timed, HorizonPlan,
    ObjectiveConfig,
};
pub use workspace::{Cell, DynamicEvent, Time, Workspace};
