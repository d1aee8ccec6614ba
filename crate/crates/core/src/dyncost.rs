//! Time-dependent traversal costs of G_r edges under timed blockages.
//!
//! Waiting is an explicit unit-time action, so blocked-cell entry costs like
//! the "wait until release" law fall out of plain shortest-path search over
//! time-expanded states.

use crate::buchi::{BuchiAutomaton, StateId};
use crate::product::{NodeId, ProductNode, ReducedGraph};
use crate::workspace::{visible_events, BlockIndex, Cell, DynamicEvent, Time, Workspace};
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimedPath {
    /// Arrival-time delta in seconds (arrival − departure).
    pub cost: u32,
    /// Timed cell path; `steps[0]` is (depart, src cell).
    pub steps: Vec<(Time, Cell)>,
}

/// Waiting at `c` through tick `t1`: permitted on unblocked cells, and always
/// on the search's start cell (the robot already occupies it and is never
/// evicted).  Shared with the brute-force oracle so both searches agree.
pub fn wait_ok(blocks: &BlockIndex, start: Cell, c: Cell, t1: Time) -> bool {
    c == start || !blocks.blocked(c, t1)
}

/// A* over time-expanded product states (cell, q, t) with 4 moves + wait, each
/// 1 s.  Moves into cells blocked at the arrival tick are rejected; interior
/// cells must be label-silent; the destination is entered with `dst.q` enabled
/// by its label.  Heuristic: Manhattan distance (admissible, unit costs).
pub fn timed_shortest_path(
    w: &Workspace,
    b: &BuchiAutomaton,
    blocks: &BlockIndex,
    src: ProductNode,
    dst: ProductNode,
    depart: Time,
    deadline: Time,
) -> Option<TimedPath> {
    timed_shortest_path_multi(w, b, blocks, src.cell, &[src.q], dst, depart, deadline)
}

#[allow(clippy::too_many_arguments)]
pub fn timed_shortest_path_multi(
    w: &Workspace,
    b: &BuchiAutomaton,
    blocks: &BlockIndex,
    src_cell: Cell,
    src_qs: &[StateId],
    dst: ProductNode,
    depart: Time,
    deadline: Time,
) -> Option<TimedPath> {
    type State = (Cell, StateId, Time);
    // f = earliest conceivable arrival: Manhattan distance, pushed past any
    // blockage of the destination cell itself.  Consistent, and it collapses
    // the wait-until-release plateaus that plain Manhattan would flood.
    let h = |c: Cell, t: Time| blocks.next_free(dst.cell, t + c.manhattan(dst.cell));
    let mut open: BinaryHeap<Reverse<(u64, Reverse<Time>, u16, u16, usize)>> = BinaryHeap::new();
    let mut parent: HashMap<State, State> = HashMap::new();
    let mut closed: HashMap<State, ()> = HashMap::new();
    let push = |open: &mut BinaryHeap<_>, c: Cell, q: StateId, t: Time| {
        open.push(Reverse((h(c, t) as u64, Reverse(t), c.y, c.x, q.0)));
    };
    for &q in src_qs {
        push(&mut open, src_cell, q, depart);
    }
    while let Some(Reverse((_, Reverse(t), y, x, qi))) = open.pop() {
        let (c, q) = (Cell::new(x, y), StateId(qi));
        if closed.insert((c, q, t), ()).is_some() {
            continue;
        }
        if c == dst.cell && q == dst.q && t > depart {
            // reconstruct witness
            let mut steps = vec![(t, c)];
            let mut cur: State = (c, q, t);
            while let Some(&p) = parent.get(&cur) {
                steps.push((p.2, p.0));
                cur = p;
            }
            steps.push((depart, src_cell));
            // the loop above already reached a start state; drop the duplicate
            if steps.len() >= 2 && steps[steps.len() - 1] == steps[steps.len() - 2] {
                steps.pop();
            }
            steps.reverse();
            return Some(TimedPath {
                cost: t - depart,
                steps,
            });
        }
        let t1 = t + 1;
        if t1 > deadline {
            continue;
        }
        let relax = |open: &mut BinaryHeap<_>,
                         parent: &mut HashMap<State, State>,
                         c2: Cell,
                         q2: StateId| {
            if !closed.contains_key(&(c2, q2, t1)) {
                parent.entry((c2, q2, t1)).or_insert((c, q, t));
                push(open, c2, q2, t1);
            }
        };
        // wait
        if wait_ok(blocks, src_cell, c, t1) {
            relax(&mut open, &mut parent, c, q);
        }
        // moves
        if let Ok(neigh) = w.neighbors(c) {
            for (_, c2) in neigh {
                if blocks.blocked(c2, t1) {
                    continue;
                }
                let label = w.label_of(c2);
                if c2 == dst.cell && b.step(q, label).contains(&dst.q) {
                    relax(&mut open, &mut parent, c2, dst.q);
                }
                if label.is_empty() {
                    for q2 in b.step(q, label) {
                        relax(&mut open, &mut parent, c2, q2);
                    }
                }
            }
        }
    }
    None
}

/// Per-edge, per-departure-time traversal costs for departures in
/// `[horizon_start, horizon_start + horizon_len]`.  `None` entries are
/// unreachable within the (generous) search deadline.
#[derive(Clone, Debug)]
pub struct EdgeCostTable {
    pub horizon_start: Time,
    pub horizon_len: Time,
    costs: HashMap<(NodeId, NodeId), Vec<Option<u32>>>,
}

impl EdgeCostTable {
    pub fn cost(&self, u: NodeId, v: NodeId, t: Time) -> Option<u32> {
        if t < self.horizon_start || t > self.horizon_start + self.horizon_len {
            return None;
        }
        self.costs
            .get(&(u, v))
            .and_then(|row| row[(t - self.horizon_start) as usize])
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.costs.keys().copied()
    }
}

/// Alg-style precomputation: fills the table for every G_r edge and every
/// departure time in the horizon.  An edge whose stored witness is untouched
/// by blockages keeps its static weight (the static weight is a lower bound,
/// so a clean witness is optimal); otherwise a fresh time-expanded search runs.
pub fn dy_cost(
    g: &ReducedGraph,
    time_cur: Time,
    horizon: Time,
    w: &Workspace,
    b: &BuchiAutomaton,
    events: &[DynamicEvent],
) -> EdgeCostTable {
    let visible = visible_events(events, time_cur);
    let blocks = BlockIndex::new(&visible);
    let mut costs = HashMap::new();
    let slots = horizon as usize + 1;
    for (u, v, info) in g.all_edges() {
        let touched = info.witness[1..]
            .iter()
            .any(|c| blocks.has_events_on(*c));
        let row: Vec<Option<u32>> = if !touched {
            vec![Some(info.weight); slots]
        } else {
            let deadline = (time_cur + horizon).max(blocks.max_t_end()) + info.weight;
            (0..slots as u32)
                .map(|i| {
                    let t = time_cur + i;
                    let clean = info.witness[1..]
                        .iter()
                        .enumerate()
                        .all(|(j, c)| !blocks.blocked(*c, t + j as u32 + 1));
                    if clean {
                        Some(info.weight)
                    } else {
                        timed_shortest_path_multi(
                            w,
                            b,
                            &blocks,
                            g.node(u).cell,
                            g.start_qs(u),
                            g.node(v),
                            t,
                            deadline,
                        )
                        .map(|p| p.cost)
                    }
                })
                .collect()
        };
        costs.insert((u, v), row);
    }
    EdgeCostTable {
        horizon_start: time_cur,
        horizon_len: horizon,
        costs,
    }
}
