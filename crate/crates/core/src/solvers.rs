//! Exact lexicographic solver over the decision DAG, SMT-LIB emission for
//! external cross-checking, plan decoding, and the Greedy1/Greedy2 baselines.

use crate::buchi::BuchiAutomaton;
use crate::dyncost::{timed_shortest_path_multi, EdgeCostTable, TimedPath};
use crate::horizon::{
    expand, gen_cons, route_to, timed_dijkstra, Clause, ConstraintSet, DagNodeId,
    DecisionDag, DecisionNode, EdgeKind, Objectives, VarKind,
};
use crate::plan::TimedPlan;
use crate::product::{GraphError, NodeId, ReducedGraph};
use crate::workspace::{
    visible_events, BlockIndex, Cell, DynamicEvent, Time, Workspace,
};
use std::collections::HashMap;
use std::fmt::Write as _;

/// Which of the two tie-breaking objectives participate; the cycle count is
/// always the primary objective.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ObjectiveConfig {
    pub use_last_len: bool,
    pub use_t_total: bool,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            use_last_len: true,
            use_t_total: true,
        }
    }
}

impl ObjectiveConfig {
    pub fn only_cycles() -> Self {
        ObjectiveConfig {
            use_last_len: false,
            use_t_total: false,
        }
    }
}

/// A solved root-to-leaf decision path and its objective value.
#[derive(Clone, Debug)]
pub struct DecisionSequence {
    pub steps: Vec<DecisionNode>,
    /// Taken edges as (source DAG node, out-edge index).
    pub edges: Vec<(DagNodeId, usize)>,
    /// (cy_count, last cycle length, last completion time).
    pub objective: (u32, Option<u32>, Option<Time>),
}

/// Value of the best decision suffix from a DAG node.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct SufVal {
    cycles: u32,
    /// (length, completion time) of the path's last cycle, if any.
    last: Option<(u32, Time)>,
    /// Number of decisions; final tie-break so ties avoid junk steps.
    steps: u32,
}

impl SufVal {
    const STOP: SufVal = SufVal {
        cycles: 0,
        last: None,
        steps: 0,
    };

    fn key(self, cfg: ObjectiveConfig) -> (i64, i64, i64, i64) {
        let (ll, tt) = self.last.map_or((0, 0), |(l, t)| (l as i64, t as i64));
        (
            -(self.cycles as i64),
            if cfg.use_last_len { ll } else { 0 },
            if cfg.use_t_total { tt } else { 0 },
            self.steps as i64,
        )
    }
}

fn best_suffix(
    dag: &DecisionDag,
    cfg: ObjectiveConfig,
    memo: &mut [Option<(SufVal, Option<usize>)>],
    id: DagNodeId,
) -> (SufVal, Option<usize>) {
    if let Some(v) = memo[id.0] {
        return v;
    }
    let node = dag.node(id);
    // the successor constraint forbids stopping while successors exist, so
    // only leaves may stop;
    // continuing along prefix edges never changes the objective triple.
    let mut best: Option<(SufVal, Option<usize>)> = dag
        .out_edges(id)
        .is_empty()
        .then_some((SufVal::STOP, None));
    for (j, e) in dag.out_edges(id).iter().enumerate() {
        let (sub, _) = best_suffix(dag, cfg, memo, e.to);
        let to = dag.node(e.to);
        let val = match e.kind {
            EdgeKind::Cycle => SufVal {
                cycles: sub.cycles + 1,
                last: Some(if sub.cycles > 0 {
                    sub.last.expect("cycles imply a last cycle")
                } else {
                    (to.t - node.t, to.t)
                }),
                steps: sub.steps + 1,
            },
            EdgeKind::Prefix => SufVal {
                steps: sub.steps + 1,
                ..sub
            },
        };
        if best.is_none_or(|(b, _)| val.key(cfg) < b.key(cfg)) {
            best = Some((val, Some(j)));
        }
    }
    let best = best.expect("leaf or at least one edge");
    memo[id.0] = Some(best);
    best
}

/// Exact lexicographic optimum over all root-to-leaf decision paths:
/// maximize cy_count, then (per config) minimize last_len and T_total.
/// `None` when not even one cycle fits in the horizon.
pub fn solve_exact(dag: &DecisionDag, cfg: ObjectiveConfig) -> Option<DecisionSequence> {
    let mut memo = vec![None; dag.nodes.len()];
    let (val, _) = best_suffix(dag, cfg, &mut memo, dag.root);
    if val.cycles == 0 {
        return None;
    }
    let mut steps = vec![dag.node(dag.root)];
    let mut edges = Vec::new();
    let mut cur = dag.root;
    while let (_, Some(j)) = memo[cur.0].expect("memoized") {
        edges.push((cur, j));
        cur = dag.out_edges(cur)[j].to;
        steps.push(dag.node(cur));
    }
    Some(DecisionSequence {
        steps,
        edges,
        objective: (
            val.cycles,
            val.last.map(|(l, _)| l),
            val.last.map(|(_, t)| t),
        ),
    })
}

/// The variable assignment a decision sequence induces: X at every visited
/// decision point, C for every taken cycle edge, A and B by their definitions.
pub fn assignment_for_sequence(
    cs: &ConstraintSet,
    dag: &DecisionDag,
    seq: &DecisionSequence,
) -> Vec<bool> {
    let mut assign = vec![false; cs.vars.len()];
    let node_index: HashMap<DecisionNode, DagNodeId> = dag
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (*n, DagNodeId(i)))
        .collect();
    for s in &seq.steps {
        assign[cs.x_of_node[node_index[s].0].0] = true;
    }
    for &(n, j) in &seq.edges {
        if let Some(c) = cs.c_of_edge.get(&(n, j)) {
            assign[c.0] = true;
        }
    }
    for clause in &cs.clauses {
        match clause {
            Clause::ADef { a, from, to } => assign[a.0] = assign[from.0] && assign[to.0],
            Clause::BDef { b, inner } => assign[b.0] = inner.iter().any(|i| assign[i.0]),
            _ => {}
        }
    }
    assign
}

fn smt_var_name(k: &VarKind) -> String {
    match k {
        VarKind::X { loc, t } => format!("x_l{}_t{}", loc.0, t),
        VarKind::C { loc, t, len } => format!("c_l{}_t{}_d{}", loc.0, t, len),
        VarKind::A { from, to, t } => format!("a_l{}_l{}_t{}", from.0, to.0, t),
        VarKind::B { t_i, t_j } => format!("b_t{}_t{}", t_i, t_j),
    }
}

/// Sentinel objective value when no cycle completes (rejected upstream).
const SMT_SENTINEL: u64 = 1_000_000;

/// SMT-LIB v2 script: boolean declarations, one assertion per clause, and
/// lexicographic optimization directives (z3-opt style maximize/minimize).
/// The last_len / T_total terms are if-then-else chains over completion
/// timestamps in decreasing order.
pub fn emit_smtlib(cs: &ConstraintSet, obj: &Objectives, cfg: ObjectiveConfig) -> String {
    let name = |v: crate::horizon::VarId| smt_var_name(&cs.vars[v.0]);
    let mut s = String::new();
    let _ = writeln!(s, "; decision-horizon model");
    let _ = writeln!(
        s,
        "; vars={} clauses={} completions={}",
        cs.vars.len(),
        cs.clauses.len(),
        obj.completions.len()
    );
    for v in &cs.vars {
        let _ = writeln!(s, "(declare-const {} Bool)", smt_var_name(v));
    }
    for c in &cs.clauses {
        let text = match c {
            Clause::Root { x } => name(*x),
            Clause::Succ { x, options } => {
                let opts = options
                    .iter()
                    .map(|o| name(*o))
                    .collect::<Vec<_>>()
                    .join(" ");
                format!("(=> {} (or {}))", name(*x), opts)
            }
            Clause::Excl { a, b } | Clause::TimeExcl { a, b } | Clause::Continuity { a, b } => {
                format!("(not (and {} {}))", name(*a), name(*b))
            }
            Clause::CycleDef { c, start, end } => {
                format!("(= {} (and {} {}))", name(*c), name(*start), name(*end))
            }
            Clause::ADef { a, from, to } => {
                format!("(= {} (and {} {}))", name(*a), name(*from), name(*to))
            }
            Clause::BDef { b, inner } => {
                if inner.is_empty() {
                    format!("(= {} false)", name(*b))
                } else {
                    let xs = inner.iter().map(|i| name(*i)).collect::<Vec<_>>().join(" ");
                    format!("(= {} (or {}))", name(*b), xs)
                }
            }
        };
        let _ = writeln!(s, "(assert {text})");
    }
    // objective 1: number of completed cycles
    let _ = writeln!(s, "(declare-const cy_count Int)");
    if obj.completions.is_empty() {
        let _ = writeln!(s, "(assert (= cy_count 0))");
    } else {
        let sum = obj
            .completions
            .iter()
            .map(|(v, _, _)| format!("(ite {} 1 0)", name(*v)))
            .collect::<Vec<_>>()
            .join(" ");
        let _ = writeln!(s, "(assert (= cy_count (+ {sum})))");
    }
    let _ = writeln!(s, "(maximize cy_count)");
    // group completions by timestamp, ascending; wrap so the latest timestamp
    // is tested first
    let mut groups: Vec<(Time, Vec<(crate::horizon::VarId, u32)>)> = Vec::new();
    for &(v, t, len) in obj.completions.iter().rev() {
        match groups.last_mut() {
            Some((gt, g)) if *gt == t => g.push((v, len)),
            _ => groups.push((t, vec![(v, len)])),
        }
    }
    let chain = |value_of: &dyn Fn(Time, u32) -> u64| -> String {
        let mut expr = SMT_SENTINEL.to_string();
        for (t, g) in &groups {
            let guard = if g.len() == 1 {
                name(g[0].0)
            } else {
                format!(
                    "(or {})",
                    g.iter().map(|(v, _)| name(*v)).collect::<Vec<_>>().join(" ")
                )
            };
            let mut pick = value_of(*t, g.last().unwrap().1).to_string();
            for (v, len) in g.iter().rev().skip(1).rev().collect::<Vec<_>>().iter().rev() {
                pick = format!("(ite {} {} {})", name(*v), value_of(*t, *len), pick);
            }
            expr = format!("(ite {guard} {pick} {expr})");
        }
        expr
    };
    if cfg.use_last_len {
        let _ = writeln!(s, "(declare-const last_len Int)");
        let _ = writeln!(s, "(assert (= last_len {}))", chain(&|_, len| len as u64));
        let _ = writeln!(s, "(minimize last_len)");
    }
    if cfg.use_t_total {
        let _ = writeln!(s, "(declare-const t_total Int)");
        let _ = writeln!(s, "(assert (= t_total {}))", chain(&|t, _| t as u64));
        let _ = writeln!(s, "(minimize t_total)");
    }
    let _ = writeln!(s, "(check-sat)");
    let _ = writeln!(s, "(get-objectives)");
    s
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SmtToken {
    LParen,
    RParen,
    Atom(String),
}

/// Minimal SMT-LIB lexer, used as a self-parse smoke check on emitted scripts.
pub fn smtlib_lex(text: &str) -> Result<Vec<SmtToken>, String> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        match c {
            ';' => {
                while chars.peek().is_some_and(|&(_, c)| c != '\n') {
                    chars.next();
                }
            }
            '(' => {
                out.push(SmtToken::LParen);
                chars.next();
            }
            ')' => {
                out.push(SmtToken::RParen);
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            c if c.is_alphanumeric() || "_-+=<>!:.".contains(c) => {
                let mut atom = String::new();
                while chars
                    .peek()
                    .is_some_and(|&(_, c)| c.is_alphanumeric() || "_-+=<>!:.".contains(c))
                {
                    atom.push(chars.next().unwrap().1);
                }
                out.push(SmtToken::Atom(atom));
            }
            c => return Err(format!("unexpected character `{c}` at byte {i}")),
        }
    }
    let mut depth = 0i64;
    for t in &out {
        match t {
            SmtToken::LParen => depth += 1,
            SmtToken::RParen => {
                depth -= 1;
                if depth < 0 {
                    return Err("unbalanced `)`".into());
                }
            }
            SmtToken::Atom(_) => {}
        }
    }
    if depth != 0 {
        return Err("unbalanced `(`".into());
    }
    Ok(out)
}

/// On-demand time-dependent edge costs with witness-reuse fast path, shared by
/// plan decoding and the greedy planners.
pub struct EdgeCosts<'a> {
    g: &'a ReducedGraph,
    w: &'a Workspace,
    b: &'a BuchiAutomaton,
    blocks: BlockIndex,
    memo: HashMap<(NodeId, NodeId, Time), Option<u32>>,
}

impl<'a> EdgeCosts<'a> {
    pub fn new(
        g: &'a ReducedGraph,
        w: &'a Workspace,
        b: &'a BuchiAutomaton,
        events: &[DynamicEvent],
        now: Time,
    ) -> Self {
        EdgeCosts {
            g,
            w,
            b,
            blocks: BlockIndex::new(&visible_events(events, now)),
            memo: HashMap::new(),
        }
    }

    pub fn blocks(&self) -> &BlockIndex {
        &self.blocks
    }

    fn witness_clean(&self, u: NodeId, v: NodeId, t: Time) -> Option<bool> {
        let e = self.g.edge(u, v)?;
        Some(
            e.witness[1..]
                .iter()
                .enumerate()
                .all(|(j, c)| !self.blocks.blocked(*c, t + j as u32 + 1)),
        )
    }

    pub fn cost(&mut self, u: NodeId, v: NodeId, t: Time) -> Option<u32> {
        match self.witness_clean(u, v, t) {
            None => None,
            Some(true) => Some(self.g.edge(u, v).unwrap().weight),
            Some(false) => {
                if let Some(&c) = self.memo.get(&(u, v, t)) {
                    return c;
                }
                let c = self.search(u, v, t).map(|p| p.cost);
                self.memo.insert((u, v, t), c);
                c
            }
        }
    }

    /// Full timed witness for traversing edge (u, v) departing at `t`.
    pub fn timed_witness(&mut self, u: NodeId, v: NodeId, t: Time) -> Option<TimedPath> {
        match self.witness_clean(u, v, t)? {
            true => {
                let e = self.g.edge(u, v).unwrap();
                let steps = e
                    .witness
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (t + i as u32, *c))
                    .collect();
                Some(TimedPath {
                    cost: e.weight,
                    steps,
                })
            }
            false => self.search(u, v, t),
        }
    }

    fn search(&self, u: NodeId, v: NodeId, t: Time) -> Option<TimedPath> {
        let weight = self.g.edge(u, v)?.weight;
        let deadline = t.max(self.blocks.max_t_end()) + weight;
        timed_shortest_path_multi(
            self.w,
            self.b,
            &self.blocks,
            self.g.node(u).cell,
            self.g.start_qs(u),
            self.g.node(v),
            t,
            deadline,
        )
    }
}

/// Expand a G_r node route into timed cells appended to `steps`; `steps` must
/// end at the route's first node's cell.
fn append_route(
    ec: &mut EdgeCosts,
    steps: &mut Vec<(Time, Cell)>,
    route: &[NodeId],
) -> Result<(), GraphError> {
    for hop in route.windows(2) {
        let (t, c) = *steps.last().expect("nonempty steps");
        debug_assert_eq!(c, ec.g.node(hop[0]).cell);
        let tp = ec
            .timed_witness(hop[0], hop[1], t)
            .ok_or_else(|| GraphError::Infeasible("edge became untraversable".into()))?;
        steps.extend_from_slice(&tp.steps[1..]);
    }
    Ok(())
}

/// Everything a horizon solve produces, kept for verification and SMT export.
pub struct HorizonPlan {
    pub plan: TimedPlan,
    pub sequence: DecisionSequence,
    pub dag: DecisionDag,
    pub cons: ConstraintSet,
}

/// One receding-horizon solve: expand the decision DAG, generate constraints,
/// solve exactly, and decode the optimal sequence into a timed cell plan.
/// `None` when not even one cycle fits within the horizon.
#[allow(clippy::too_many_arguments)]
pub fn plan_in_h(
    g: &ReducedGraph,
    w: &Workspace,
    b: &BuchiAutomaton,
    events: &[DynamicEvent],
    time_cur: Time,
    horizon: Time,
    costs: &EdgeCostTable,
    cfg: ObjectiveConfig,
) -> Result<Option<HorizonPlan>, GraphError> {
    let dag = expand(g, time_cur, horizon, costs);
    let cons = gen_cons(&dag);
    let Some(seq) = solve_exact(&dag, cfg) else {
        return Ok(None);
    };
    let mut ec = EdgeCosts::new(g, w, b, events, time_cur);
    let mut steps = vec![(time_cur, g.node(g.root()).cell)];
    let mut loop_start = 0;
    // prefix edges after the last completed cycle are model bookkeeping (a
    // sequence must run to a leaf); the executable plan ends with the cycle
    let last_cycle = seq
        .edges
        .iter()
        .rposition(|&(nid, j)| dag.out_edges(nid)[j].kind == EdgeKind::Cycle)
        .expect("a solved sequence completes a cycle");
    for &(nid, j) in &seq.edges[..=last_cycle] {
        let e = &dag.out_edges(nid)[j];
        if e.kind == EdgeKind::Cycle {
            loop_start = steps.len() - 1;
        }
        append_route(&mut ec, &mut steps, &e.route)?;
        debug_assert_eq!(steps.last().unwrap().0, dag.node(e.to).t);
    }
    let plan = TimedPlan { steps, loop_start };
    Ok(Some(HorizonPlan {
        plan,
        sequence: seq,
        dag,
        cons,
    }))
}

/// Prefix + repeated suffix laps extended until the plan's end time exceeds
/// `until`.
fn build_lasso_plan(
    ec: &mut EdgeCosts,
    time_cur: Time,
    start_cell: Cell,
    prefix_route: &[NodeId],
    cycle_route: &[NodeId],
    until: Time,
) -> Result<TimedPlan, GraphError> {
    let mut steps = vec![(time_cur, start_cell)];
    append_route(ec, &mut steps, prefix_route)?;
    let mut loop_start;
    loop {
        loop_start = steps.len() - 1;
        append_route(ec, &mut steps, cycle_route)?;
        if steps.last().unwrap().0 > until {
            break;
        }
    }
    Ok(TimedPlan { steps, loop_start })
}

fn greedy_candidates(
    g: &ReducedGraph,
    ec: &mut EdgeCosts,
    time_cur: Time,
    until: Time,
) -> Vec<(NodeId, Time, Time, crate::horizon::TimedDijkstra, crate::horizon::TimedDijkstra)> {
    // a cap large enough that reachable-ever targets stay reachable
    let total_weight: u32 = g.all_edges().map(|(_, _, e)| e.weight).sum();
    let cap = until.max(ec.blocks.max_t_end()) + 2 * total_weight + 2;
    let root = g.root();
    let td = timed_dijkstra(g, |u, v, t| ec.cost(u, v, t), root, time_cur, cap);
    let mut out = Vec::new();
    for &f in g.finals() {
        let arrival = if f == root {
            time_cur
        } else {
            match td.arrival[f.0] {
                Some(a) => a,
                None => continue,
            }
        };
        let tdf = timed_dijkstra(g, |u, v, t| ec.cost(u, v, t), f, arrival, cap);
        let Some((ret, _)) = tdf.ret else { continue };
        out.push((f, arrival, ret, td_clone(&td), tdf));
    }
    out
}

fn td_clone(td: &crate::horizon::TimedDijkstra) -> crate::horizon::TimedDijkstra {
    crate::horizon::TimedDijkstra {
        arrival: td.arrival.clone(),
        pred: td.pred.clone(),
        ret: td.ret,
    }
}

fn greedy_plan_for(
    g: &ReducedGraph,
    ec: &mut EdgeCosts,
    time_cur: Time,
    until: Time,
    choice: (NodeId, Time, Time, crate::horizon::TimedDijkstra, crate::horizon::TimedDijkstra),
) -> Result<TimedPlan, GraphError> {
    let (f, _arrival, _, td, tdf) = choice;
    let root = g.root();
    let prefix_route = if f == root {
        vec![root]
    } else {
        route_to(&td, root, f)
    };
    let (_, last) = tdf.ret.expect("candidate has a cycle");
    let mut cycle_route = route_to(&tdf, f, last);
    cycle_route.push(f);
    build_lasso_plan(
        ec,
        time_cur,
        g.node(root).cell,
        &prefix_route,
        &cycle_route,
        until,
    )
}

/// Greedy1: commit to the final whose current shortest suffix cycle is
/// cheapest (cycle cost evaluated at the prefix's arrival time).
pub fn greedy1(
    g: &ReducedGraph,
    w: &Workspace,
    b: &BuchiAutomaton,
    events: &[DynamicEvent],
    time_cur: Time,
    until: Time,
) -> Result<TimedPlan, GraphError> {
    let mut ec = EdgeCosts::new(g, w, b, events, time_cur);
    let cands = greedy_candidates(g, &mut ec, time_cur, until);
    let choice = cands
        .into_iter()
        .min_by_key(|(f, arrival, ret, _, _)| (ret - arrival, *f))
        .ok_or_else(|| GraphError::Infeasible("no final node reachable".into()))?;
    greedy_plan_for(g, &mut ec, time_cur, until, choice)
}

/// Greedy2: commit to the (prefix, suffix) pair whose first cycle completes
/// earliest.
pub fn greedy2(
    g: &ReducedGraph,
    w: &Workspace,
    b: &BuchiAutomaton,
    events: &[DynamicEvent],
    time_cur: Time,
    until: Time,
) -> Result<TimedPlan, GraphError> {
    let mut ec = EdgeCosts::new(g, w, b, events, time_cur);
    let cands = greedy_candidates(g, &mut ec, time_cur, until);
    let choice = cands
        .into_iter()
        .min_by_key(|(f, _, ret, _, _)| (*ret, *f))
        .ok_or_else(|| GraphError::Infeasible("no final node reachable".into()))?;
    greedy_plan_for(g, &mut ec, time_cur, until, choice)
}

/// The offline static plan expanded into a timed cell plan from t = 0 (no
/// events are visible before the mission starts).
pub fn static_plan_timed(
    g: &ReducedGraph,
    w: &Workspace,
    b: &BuchiAutomaton,
    until: Time,
) -> Result<TimedPlan, GraphError> {
    let (prefix, cycle) = g.static_plan()?;
    let mut ec = EdgeCosts::new(g, w, b, &[], 0);
    build_lasso_plan(&mut ec, 0, g.node(g.root()).cell, &prefix, &cycle, until)
}
