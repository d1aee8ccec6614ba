//! Finite decision DAG within the planning horizon and the boolean constraint
//! system over the X / C / A / B decision variables, with the three
//! lexicographic objectives (cycle count, last-cycle length, last-completion
//! time).

use crate::dyncost::EdgeCostTable;
use crate::product::{NodeId, ReducedGraph};
use crate::workspace::Time;
use std::collections::{BTreeMap, BTreeSet, HashMap};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct DagNodeId(pub usize);

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct DecisionNode {
    pub loc: NodeId,
    pub t: Time,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EdgeKind {
    Prefix,
    Cycle,
}

#[derive(Clone, Debug)]
pub struct DagEdge {
    pub to: DagNodeId,
    pub kind: EdgeKind,
    /// G_r node sequence from the source location to the target location
    /// (inclusive); cycles start and end at the same location.
    pub route: Vec<NodeId>,
}

#[derive(Clone, Debug)]
pub struct DecisionDag {
    pub nodes: Vec<DecisionNode>,
    pub edges: Vec<Vec<DagEdge>>,
    pub root: DagNodeId,
    pub horizon_end: Time,
}

impl DecisionDag {
    pub fn node(&self, id: DagNodeId) -> DecisionNode {
        self.nodes[id.0]
    }

    pub fn out_edges(&self, id: DagNodeId) -> &[DagEdge] {
        &self.edges[id.0]
    }
}

/// Earliest arrivals over G_r from `src` departing at `depart`, using
/// time-dependent edge costs; expansion stops at `cap`.  Also reports the
/// earliest nonzero-length return to `src` (the shortest cycle) and its last
/// hop.  FIFO edge costs make label-setting Dijkstra exact here.
pub struct TimedDijkstra {
    pub arrival: Vec<Option<Time>>,
    pub pred: Vec<Option<NodeId>>,
    pub ret: Option<(Time, NodeId)>,
}

pub fn timed_dijkstra<F: FnMut(NodeId, NodeId, Time) -> Option<u32>>(
    g: &ReducedGraph,
    mut cost: F,
    src: NodeId,
    depart: Time,
    cap: Time,
) -> TimedDijkstra {
    let n = g.nodes().len();
    let mut arrival: Vec<Option<Time>> = vec![None; n];
    let mut pred: Vec<Option<NodeId>> = vec![None; n];
    let mut ret: Option<(Time, NodeId)> = None;
    let mut heap = std::collections::BinaryHeap::new();
    arrival[src.0] = Some(depart);
    heap.push(std::cmp::Reverse((depart, src)));
    while let Some(std::cmp::Reverse((t, u))) = heap.pop() {
        if arrival[u.0] != Some(t) {
            continue;
        }
        let targets: Vec<NodeId> = g.edges_from(u).map(|(v, _)| v).collect();
        for v in targets {
            let Some(c) = cost(u, v, t) else { continue };
            let at = t + c;
            if at > cap {
                continue;
            }
            if v == src {
                if ret.is_none_or(|(bt, bu)| (at, u) < (bt, bu)) {
                    ret = Some((at, u));
                }
                continue;
            }
            match arrival[v.0] {
                Some(old) if old < at => {}
                Some(old) if old == at => {
                    if pred[v.0].is_none_or(|p| u < p) {
                        pred[v.0] = Some(u);
                    }
                }
                _ => {
                    arrival[v.0] = Some(at);
                    pred[v.0] = Some(u);
                    heap.push(std::cmp::Reverse((at, v)));
                }
            }
        }
    }
    TimedDijkstra { arrival, pred, ret }
}

pub fn route_to(td: &TimedDijkstra, src: NodeId, dst: NodeId) -> Vec<NodeId> {
    let mut route = vec![dst];
    let mut cur = dst;
    while cur != src {
        cur = td.pred[cur.0].expect("pred chain broken");
        route.push(cur);
    }
    route.reverse();
    route
}

/// Expand the decision DAG from (root of g, time_cur): per node, a prefix edge
/// to every other reachable final within the horizon, plus a shortest-cycle
/// edge when the node's location is itself a final.  Nodes merge on (loc, t).
pub fn expand(
    g: &ReducedGraph,
    time_cur: Time,
    horizon: Time,
    costs: &EdgeCostTable,
) -> DecisionDag {
    let horizon_end = time_cur + horizon;
    let mut nodes = vec![DecisionNode {
        loc: g.root(),
        t: time_cur,
    }];
    let mut edges: Vec<Vec<DagEdge>> = vec![Vec::new()];
    let mut index: HashMap<DecisionNode, DagNodeId> = HashMap::new();
    index.insert(nodes[0], DagNodeId(0));
    let mut work = 0usize;
    while work < nodes.len() {
        let id = DagNodeId(work);
        let DecisionNode { loc, t } = nodes[work];
        work += 1;
        let td = timed_dijkstra(g, |u, v, t| costs.cost(u, v, t), loc, t, horizon_end);
        let mut out: Vec<DagEdge> = Vec::new();
        let mut intern =
            |nodes: &mut Vec<DecisionNode>, edges: &mut Vec<Vec<DagEdge>>, n: DecisionNode| {
                *index.entry(n).or_insert_with(|| {
                    nodes.push(n);
                    edges.push(Vec::new());
                    DagNodeId(nodes.len() - 1)
                })
            };
        // suffix-cycle edge first
        if g.finals().contains(&loc) {
            if let Some((at, last)) = td.ret {
                let mut route = route_to(&td, loc, last);
                route.push(loc);
                let to = intern(&mut nodes, &mut edges, DecisionNode { loc, t: at });
                out.push(DagEdge {
                    to,
                    kind: EdgeKind::Cycle,
                    route,
                });
            }
        }
        // prefix edges to the other finals, id order
        for &f in g.finals() {
            if f == loc {
                continue;
            }
            let Some(at) = td.arrival[f.0] else { continue };
            let route = route_to(&td, loc, f);
            let to = intern(&mut nodes, &mut edges, DecisionNode { loc: f, t: at });
            out.push(DagEdge {
                to,
                kind: EdgeKind::Prefix,
                route,
            });
        }
        edges[id.0] = out;
    }
    DecisionDag {
        nodes,
        edges,
        root: DagNodeId(0),
        horizon_end,
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct VarId(pub usize);

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum VarKind {
    /// Robot is at `loc` at time `t` (a decision point).
    X { loc: NodeId, t: Time },
    /// A cycle of length `len` completes at `loc` at time `t`.
    C { loc: NodeId, t: Time, len: u32 },
    /// The decision to move from `from` (at `t`) to `to` was taken.
    A { from: NodeId, to: NodeId, t: Time },
    /// Some decision point lies strictly inside (t_i, t_j).
    B { t_i: Time, t_j: Time },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Clause {
    /// The root X is true.
    Root { x: VarId },
    /// x implies the disjunction of its successors (no stopping mid-DAG).
    Succ { x: VarId, options: Vec<VarId> },
    /// Two successors of one node are mutually exclusive.
    Excl { a: VarId, b: VarId },
    /// c holds iff both cycle endpoints hold.
    CycleDef { c: VarId, start: VarId, end: VarId },
    /// Two locations at one timestamp are mutually exclusive.
    TimeExcl { a: VarId, b: VarId },
    /// a holds iff both edge endpoints hold.
    ADef { a: VarId, from: VarId, to: VarId },
    /// b holds iff some decision point strictly inside the interval holds.
    BDef { b: VarId, inner: Vec<VarId> },
    /// Taking a decision forbids intermediate decision points.
    Continuity { a: VarId, b: VarId },
}

#[derive(Clone, Debug, Default)]
pub struct ConstraintSet {
    pub vars: Vec<VarKind>,
    pub clauses: Vec<Clause>,
    /// X variable per DAG node, same indexing as the DAG's nodes.
    pub x_of_node: Vec<VarId>,
    /// C variable per (node, out-edge index) for cycle edges.
    pub c_of_edge: HashMap<(DagNodeId, usize), VarId>,
}

impl ConstraintSet {
    pub fn eval_clause(&self, clause: &Clause, assign: &[bool]) -> bool {
        let v = |id: VarId| assign[id.0];
        match clause {
            Clause::Root { x } => v(*x),
            Clause::Succ { x, options } => !v(*x) || options.iter().any(|o| v(*o)),
            Clause::Excl { a, b } | Clause::TimeExcl { a, b } | Clause::Continuity { a, b } => {
                !(v(*a) && v(*b))
            }
            Clause::CycleDef { c, start, end } => v(*c) == (v(*start) && v(*end)),
            Clause::ADef { a, from, to } => v(*a) == (v(*from) && v(*to)),
            Clause::BDef { b, inner } => v(*b) == inner.iter().any(|i| v(*i)),
        }
    }

    pub fn satisfied(&self, assign: &[bool]) -> bool {
        self.clauses.iter().all(|c| self.eval_clause(c, assign))
    }
}

/// Emit the boolean constraint system for a decision DAG.
pub fn gen_cons(dag: &DecisionDag) -> ConstraintSet {
    let mut cs = ConstraintSet::default();
    let mut var_index: HashMap<VarKind, VarId> = HashMap::new();
    let mut intern = |cs: &mut ConstraintSet, k: VarKind| -> VarId {
        *var_index.entry(k.clone()).or_insert_with(|| {
            cs.vars.push(k);
            VarId(cs.vars.len() - 1)
        })
    };

    for n in &dag.nodes {
        let x = intern(&mut cs, VarKind::X { loc: n.loc, t: n.t });
        cs.x_of_node.push(x);
    }

    // root occupancy
    cs.clauses.push(Clause::Root {
        x: cs.x_of_node[dag.root.0],
    });

    // successor choice and pairwise exclusion
    for (i, out) in dag.edges.iter().enumerate() {
        if out.is_empty() {
            continue;
        }
        let options: Vec<VarId> = out.iter().map(|e| cs.x_of_node[e.to.0]).collect();
        cs.clauses.push(Clause::Succ {
            x: cs.x_of_node[i],
            options: options.clone(),
        });
        for a in 0..options.len() {
            for b in a + 1..options.len() {
                cs.clauses.push(Clause::Excl {
                    a: options[a],
                    b: options[b],
                });
            }
        }
    }

    // cycle completion variables
    for (i, out) in dag.edges.iter().enumerate() {
        for (j, e) in out.iter().enumerate() {
            if e.kind != EdgeKind::Cycle {
                continue;
            }
            let (from, to) = (dag.nodes[i], dag.nodes[e.to.0]);
            let c = intern(
                &mut cs,
                VarKind::C {
                    loc: from.loc,
                    t: to.t,
                    len: to.t - from.t,
                },
            );
            cs.c_of_edge.insert((DagNodeId(i), j), c);
            cs.clauses.push(Clause::CycleDef {
                c,
                start: cs.x_of_node[i],
                end: cs.x_of_node[e.to.0],
            });
        }
    }

    // integrity per timestamp
    let mut by_time: BTreeMap<Time, Vec<VarId>> = BTreeMap::new();
    for (i, n) in dag.nodes.iter().enumerate() {
        by_time.entry(n.t).or_default().push(cs.x_of_node[i]);
    }
    for xs in by_time.values() {
        for a in 0..xs.len() {
            for b in a + 1..xs.len() {
                cs.clauses.push(Clause::TimeExcl { a: xs[a], b: xs[b] });
            }
        }
    }

    // decision variables A, witnesses B, continuity
    let times: BTreeSet<(Time, VarId)> = dag
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.t, cs.x_of_node[i]))
        .collect();
    let mut b_of_span: HashMap<(Time, Time), VarId> = HashMap::new();
    for (i, out) in dag.edges.iter().enumerate() {
        for e in out {
            let (t_i, t_j) = (dag.nodes[i].t, dag.nodes[e.to.0].t);
            let a = intern(
                &mut cs,
                VarKind::A {
                    from: dag.nodes[i].loc,
                    to: dag.nodes[e.to.0].loc,
                    t: t_i,
                },
            );
            cs.clauses.push(Clause::ADef {
                a,
                from: cs.x_of_node[i],
                to: cs.x_of_node[e.to.0],
            });
            let b = *b_of_span.entry((t_i, t_j)).or_insert_with(|| {
                let b = intern(&mut cs, VarKind::B { t_i, t_j });
                let inner: Vec<VarId> = times
                    .iter()
                    .filter(|(t, _)| t_i < *t && *t < t_j)
                    .map(|(_, x)| *x)
                    .collect();
                cs.clauses.push(Clause::BDef { b, inner });
                b
            });
            cs.clauses.push(Clause::Continuity { a, b });
        }
    }
    cs
}

/// The cycle-completion atoms the objectives are built from, ordered by
/// decreasing completion time (the objective recursion runs latest-first).
#[derive(Clone, Debug)]
pub struct Objectives {
    pub completions: Vec<(VarId, Time, u32)>,
}

pub fn objectives(cs: &ConstraintSet) -> Objectives {
    let mut completions: Vec<(VarId, Time, u32)> = cs
        .vars
        .iter()
        .enumerate()
        .filter_map(|(i, v)| match v {
            VarKind::C { t, len, .. } => Some((VarId(i), *t, *len)),
            _ => None,
        })
        .collect();
    completions.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    Objectives { completions }
}

impl Objectives {
    /// (cy_count, last_len, T_total) of an assignment; the latter two are None
    /// when no cycle completes.
    pub fn triple(&self, assign: &[bool]) -> (u32, Option<u32>, Option<Time>) {
        let cy = self
            .completions
            .iter()
            .filter(|(v, _, _)| assign[v.0])
            .count() as u32;
        match self.completions.iter().find(|(v, _, _)| assign[v.0]) {
            Some((_, t, len)) => (cy, Some(*len), Some(*t)),
            None => (cy, None, None),
        }
    }
}
