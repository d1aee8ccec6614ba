//! Shared fixtures and independent oracles for the integration tests.  The
//! oracles deliberately re-derive results with simpler algorithms (plain BFS,
//! exhaustive enumeration) so the optimized implementations are checked
//! against separately written code.

#![allow(dead_code)]

use dtstar::buchi::{BuchiAutomaton, StateId};
use dtstar::dyncost::wait_ok;
use dtstar::horizon::{DecisionDag, EdgeKind};
use dtstar::product::{ProductNode, ReducedGraph};
use dtstar::simulator::Scenario;
use dtstar::solvers::ObjectiveConfig;
use dtstar::workspace::{BlockIndex, Cell, DynamicEvent, Time, Workspace};
use rand::Rng;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::path::{Path, PathBuf};

pub const PICKDROP_JSON: &str = include_str!("../../fixtures/automaton_pickdrop.json");
pub const FIG1A_JSON: &str = include_str!("../../fixtures/automaton_fig1a.json");

pub fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

pub fn load_fixture(name: &str) -> Scenario {
    dtstar::load_scenario(&scenario_path(name)).expect("bundled scenario loads")
}

/// Print a line that escapes libtest's output capture (the capture hooks the
/// print macros, not the file descriptor), so pass/fail lines show up in
/// plain `cargo test` output.
pub fn report(line: String) {
    use std::io::Write;
    let mut out = std::fs::OpenOptions::new()
        .write(true)
        .open("/dev/stdout")
        .expect("stdout available");
    writeln!(out, "{line}").unwrap();
}

/// Oracle: plain layered BFS over time-expanded product states, no heuristic.
/// Mirrors the traversal semantics (interior cells label-silent, destination
/// entered via its label, moves rejected into cells blocked at arrival, waits
/// per `wait_ok`) with independent code.
pub fn oracle_timed_cost(
    w: &Workspace,
    b: &BuchiAutomaton,
    blocks: &BlockIndex,
    src_cell: Cell,
    src_qs: &[StateId],
    dst: ProductNode,
    depart: Time,
    deadline: Time,
) -> Option<u32> {
    let mut frontier: HashSet<(Cell, StateId)> =
        src_qs.iter().map(|&q| (src_cell, q)).collect();
    let mut t = depart;
    while t < deadline {
        let t1 = t + 1;
        let mut next: HashSet<(Cell, StateId)> = HashSet::new();
        for &(c, q) in &frontier {
            if wait_ok(blocks, src_cell, c, t1) {
                next.insert((c, q));
            }
            let Ok(neigh) = w.neighbors(c) else { continue };
            for (_, c2) in neigh {
                if blocks.blocked(c2, t1) {
                    continue;
                }
                let label = w.label_of(c2);
                if c2 == dst.cell && b.step(q, label).contains(&dst.q) {
                    return Some(t1 - depart);
                }
                if label.is_empty() {
                    for q2 in b.step(q, label) {
                        next.insert((c2, q2));
                    }
                }
            }
        }
        if next.is_empty() {
            return None;
        }
        frontier = next;
        t = t1;
    }
    None
}

/// Oracle: static label-silent product distances from (src_cell, qs) to every
/// proposition node, by plain BFS (unit costs).  Used to cross-check G_r edge
/// weights.
pub fn oracle_silent_dists(
    w: &Workspace,
    b: &BuchiAutomaton,
    src_cell: Cell,
    src_qs: &[StateId],
) -> HashMap<ProductNode, u32> {
    let mut seen: HashSet<(Cell, StateId)> = src_qs.iter().map(|&q| (src_cell, q)).collect();
    let mut queue: VecDeque<(Cell, StateId, u32)> =
        src_qs.iter().map(|&q| (src_cell, q, 0)).collect();
    let mut out: HashMap<ProductNode, u32> = HashMap::new();
    while let Some((c, q, d)) = queue.pop_front() {
        let Ok(neigh) = w.neighbors(c) else { continue };
        for (_, c2) in neigh {
            let label = w.label_of(c2);
            if label.is_empty() {
                for q2 in b.step(q, label) {
                    if seen.insert((c2, q2)) {
                        queue.push_back((c2, q2, d + 1));
                    }
                }
            } else {
                for q2 in b.step(q, label) {
                    out.entry(ProductNode { cell: c2, q: q2 }).or_insert(d + 1);
                }
            }
        }
    }
    out
}

/// Oracle: exhaustive enumeration of every root-to-leaf decision sequence
/// (stopping is allowed at any node), returning the lexicographically best
/// objective triple under `cfg` plus the number of sequences enumerated.
/// `None` in the first slot when no sequence completes a cycle, or when the
/// sequence count exceeds `cap`.
pub fn enumerate_best(
    dag: &DecisionDag,
    cfg: ObjectiveConfig,
    cap: usize,
) -> (Option<(u32, Option<u32>, Option<Time>)>, Option<usize>) {
    type Key = (i64, i64, i64);
    fn key(cfg: ObjectiveConfig, cy: u32, last: Option<(u32, Time)>) -> Key {
        let (ll, tt) = last.map_or((0, 0), |(l, t)| (l as i64, t as i64));
        (
            -(cy as i64),
            if cfg.use_last_len { ll } else { 0 },
            if cfg.use_t_total { tt } else { 0 },
        )
    }
    let mut best: Option<(Key, (u32, Option<u32>, Option<Time>))> = None;
    let mut count = 0usize;
    let mut stack = vec![(dag.root, 0u32, None::<(u32, Time)>)];
    // explicit DFS; every popped state is one complete sequence (stop here)
    while let Some((id, cy, last)) = stack.pop() {
        count += 1;
        if count > cap {
            return (None, None);
        }
        if cy >= 1 {
            let k = key(cfg, cy, last);
            if best.as_ref().is_none_or(|(bk, _)| k < *bk) {
                best = Some((k, (cy, last.map(|(l, _)| l), last.map(|(_, t)| t))));
            }
        }
        let node = dag.node(id);
        for e in dag.out_edges(id) {
            let to = dag.node(e.to);
            match e.kind {
                EdgeKind::Cycle => {
                    // the newest cycle is always the latest-completing one
                    stack.push((e.to, cy + 1, Some((to.t - node.t, to.t))));
                }
                EdgeKind::Prefix => stack.push((e.to, cy, last)),
            }
        }
    }
    (best.map(|(_, v)| v), Some(count))
}

pub struct RandInstance {
    pub w: Workspace,
    pub b: BuchiAutomaton,
    pub events: Vec<DynamicEvent>,
}

/// Random pickup/drop instance on a small grid; `None` when the sampled layout
/// is infeasible (caller retries).
pub fn rand_instance(rng: &mut impl Rng, min_side: u16, max_side: u16) -> Option<RandInstance> {
    let b = BuchiAutomaton::parse_automaton(PICKDROP_JSON).unwrap();
    let side = rng.random_range(min_side..=max_side);
    let initial = Cell::new(
        rng.random_range(0..side),
        rng.random_range(0..side),
    );
    let mut obstacles: BTreeSet<Cell> = BTreeSet::new();
    for y in 0..side {
        for x in 0..side {
            let c = Cell::new(x, y);
            if c != initial && rng.random_bool(0.15) {
                obstacles.insert(c);
            }
        }
    }
    let mut free: Vec<Cell> = (0..side)
        .flat_map(|y| (0..side).map(move |x| Cell::new(x, y)))
        .filter(|c| !obstacles.contains(c) && *c != initial)
        .collect();
    let n_p = rng.random_range(1..=2usize);
    let n_d = rng.random_range(1..=2usize);
    if free.len() < n_p + n_d {
        return None;
    }
    let mut labels: BTreeMap<Cell, BTreeSet<String>> = BTreeMap::new();
    for i in 0..(n_p + n_d) {
        let j = rng.random_range(0..free.len());
        let c = free.swap_remove(j);
        let prop = if i < n_p { "p" } else { "d" };
        labels.insert(c, BTreeSet::from([prop.to_string()]));
    }
    let w = Workspace::new(side, side, obstacles, labels, initial, 1).ok()?;
    dtstar::build_reduced_graph(&w, &b).ok()?;
    let mut events = Vec::new();
    for _ in 0..rng.random_range(0..=3usize) {
        let cell = Cell::new(rng.random_range(0..side), rng.random_range(0..side));
        if !w.is_free(cell) {
            continue;
        }
        let t_start = rng.random_range(0..30);
        let dur = rng.random_range(1..=20);
        events.push(DynamicEvent {
            cell,
            t_start,
            t_end: t_start + dur,
            announced_at: t_start,
        });
    }
    Some(RandInstance { w, b, events })
}

/// Convenience: id of the G_r node at `(cell, state name)`.
pub fn node_at(g: &ReducedGraph, b: &BuchiAutomaton, x: u16, y: u16, q: &str) -> dtstar::NodeId {
    g.nodes()
        .iter()
        .position(|n| n.cell == Cell::new(x, y) && n.q == b.state_id(q).unwrap())
        .map(dtstar::NodeId)
        .expect("node present")
}
