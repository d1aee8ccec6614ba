//! Product of the grid transition system with the Büchi automaton, and the
//! reduced graph G_r whose nodes are proposition-bearing (cell, state) pairs
//! plus the root.  G_r edges summarize shortest label-silent product paths.

use crate::buchi::{BuchiAutomaton, StateId};
use crate::workspace::{Cell, Workspace};
use serde_json::json;
use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct NodeId(pub usize);

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct ProductNode {
    pub cell: Cell,
    pub q: StateId,
}

#[derive(Error, Debug)]
pub enum GraphError {
    #[error("infeasible mission: {0}")]
    Infeasible(String),
    #[error("position {0:?} is not a reachable product state")]
    BadPosition(ProductNode),
}

/// Successors of a product state: move to a free neighbor cell, with the Büchi
/// state advanced over the destination cell's label.  This is the implicit
/// product-graph oracle; the full product is never materialized.
pub fn product_successors(w: &Workspace, b: &BuchiAutomaton, n: ProductNode) -> Vec<ProductNode> {
    let mut out = Vec::new();
    if let Ok(neigh) = w.neighbors(n.cell) {
        for (_, c) in neigh {
            for q in b.step(n.q, w.label_of(c)) {
                out.push(ProductNode { cell: c, q });
            }
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct EdgeInfo {
    pub weight: u32,
    /// Representative shortest cell path, including both endpoint cells.
    /// Interior cells are unlabeled, so the Büchi state only changes on entry
    /// to the destination.
    pub witness: Vec<Cell>,
}

#[derive(Clone, Debug)]
pub struct ReducedGraph {
    nodes: Vec<ProductNode>,
    root: NodeId,
    /// Büchi states the root fans out from (several when the automaton has
    /// several initial states; a single state after re-rooting).
    root_qs: Vec<StateId>,
    adj: Vec<BTreeMap<NodeId, EdgeInfo>>,
    finals: Vec<NodeId>,
    /// Number of proposition nodes; a dedicated root, when present, is the
    /// single node at index `prop_count`.
    prop_count: usize,
}

impl ReducedGraph {
    pub fn nodes(&self) -> &[ProductNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> ProductNode {
        self.nodes[id.0]
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn finals(&self) -> &[NodeId] {
        &self.finals
    }

    pub fn edges_from(&self, id: NodeId) -> impl Iterator<Item = (NodeId, &EdgeInfo)> {
        self.adj[id.0].iter().map(|(k, v)| (*k, v))
    }

    pub fn edge(&self, from: NodeId, to: NodeId) -> Option<&EdgeInfo> {
        self.adj[from.0].get(&to)
    }

    pub fn all_edges(&self) -> impl Iterator<Item = (NodeId, NodeId, &EdgeInfo)> {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, m)| m.iter().map(move |(j, e)| (NodeId(i), *j, e)))
    }

    /// Büchi states a path may start from at this node.  Only the dedicated
    /// root can fan out over several states.
    pub fn start_qs(&self, id: NodeId) -> &[StateId] {
        if id == self.root {
            &self.root_qs
        } else {
            std::slice::from_ref(&self.nodes[id.0].q)
        }
    }

    pub fn find_node(&self, p: ProductNode) -> Option<NodeId> {
        self.nodes
            .iter()
            .position(|n| *n == p)
            .map(NodeId)
            .or_else(|| {
                // a dedicated root matches any of its fan-out states
                let r = self.nodes[self.root.0];
                (r.cell == p.cell && self.root_qs.contains(&p.q)).then_some(self.root)
            })
    }

    /// Static shortest-path tree from `src` over edge weights.
    /// Returns (dist, pred); ties prefer the lower predecessor id.
    pub fn dijkstra_static(&self, src: NodeId) -> (Vec<Option<u32>>, Vec<Option<NodeId>>) {
        let n = self.nodes.len();
        let mut dist: Vec<Option<u32>> = vec![None; n];
        let mut pred: Vec<Option<NodeId>> = vec![None; n];
        let mut heap = std::collections::BinaryHeap::new();
        dist[src.0] = Some(0);
        heap.push(std::cmp::Reverse((0u32, src)));
        while let Some(std::cmp::Reverse((d, u))) = heap.pop() {
            if dist[u.0] != Some(d) {
                continue;
            }
            for (v, e) in self.adj[u.0].iter() {
                let nd = d + e.weight;
                match dist[v.0] {
                    Some(old) if old < nd => {}
                    Some(old) if old == nd => {
                        if pred[v.0].is_none_or(|p| u < p) {
                            pred[v.0] = Some(u);
                        }
                    }
                    _ => {
                        dist[v.0] = Some(nd);
                        pred[v.0] = Some(u);
                        heap.push(std::cmp::Reverse((nd, *v)));
                    }
                }
            }
        }
        (dist, pred)
    }

    /// Shortest cycle through final `f` over static weights: (cost, node path
    /// f..f).  None when no cycle exists.
    pub fn shortest_cycle_static(&self, f: NodeId) -> Option<(u32, Vec<NodeId>)> {
        let (dist, pred) = self.dijkstra_static(f);
        let mut best: Option<(u32, NodeId)> = None;
        for (u, v, e) in self.all_edges() {
            if v != f {
                continue;
            }
            if let Some(du) = dist[u.0] {
                let c = du + e.weight;
                if best.is_none_or(|(bc, bu)| (c, u) < (bc, bu)) {
                    best = Some((c, u));
                }
            }
        }
        let (cost, u) = best?;
        let mut path = vec![f];
        let mut cur = u;
        while cur != f {
            path.push(cur);
            cur = pred[cur.0].expect("pred chain broken");
        }
        path.push(f);
        path.reverse();
        Some((cost, path))
    }

    /// Offline plan: among finals, the one with the cheapest static cycle
    /// (ties: lower node id); prefix = shortest root path to it.
    pub fn static_plan(&self) -> Result<(Vec<NodeId>, Vec<NodeId>), GraphError> {
        let (dist, pred) = self.dijkstra_static(self.root);
        let mut best: Option<(u32, NodeId, Vec<NodeId>)> = None;
        for &f in &self.finals {
            if dist[f.0].is_none() {
                continue;
            }
            if let Some((c, cyc)) = self.shortest_cycle_static(f) {
                if best.as_ref().is_none_or(|(bc, bf, _)| (c, f) < (*bc, *bf)) {
                    best = Some((c, f, cyc));
                }
            }
        }
        let (_, f, cycle) = best.ok_or_else(|| {
            GraphError::Infeasible("no reachable final node with a suffix cycle".into())
        })?;
        let mut prefix = vec![f];
        let mut cur = f;
        while cur != self.root {
            cur = pred[cur.0].expect("pred chain broken");
            prefix.push(cur);
        }
        prefix.reverse();
        Ok((prefix, cycle))
    }

    pub fn dump_json(&self, b: &BuchiAutomaton) -> serde_json::Value {
        let nodes: Vec<_> = self
            .nodes
            .iter()
            .map(|n| json!({ "cell": [n.cell.x, n.cell.y], "q": b.state_name(n.q) }))
            .collect();
        let edges: Vec<_> = self
            .all_edges()
            .map(|(u, v, e)| {
                json!({
                    "from": u.0,
                    "to": v.0,
                    "weight": e.weight,
                    "witness": e.witness.iter().map(|c| [c.x, c.y]).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({
            "root": self.root.0,
            "root_qs": self.root_qs.iter().map(|q| b.state_name(*q)).collect::<Vec<_>>(),
            "finals": self.finals.iter().map(|f| f.0).collect::<Vec<_>>(),
            "nodes": nodes,
            "edges": edges,
        })
    }

    /// Re-root G_r at the robot's current product state, recomputing the
    /// root's outgoing edges; all proposition nodes and their edges carry over.
    pub fn update_graph(
        &self,
        w: &Workspace,
        b: &BuchiAutomaton,
        pos: ProductNode,
    ) -> Result<ReducedGraph, GraphError> {
        let prop_count = self.prop_count;
        let mut nodes: Vec<ProductNode> = self.nodes[..prop_count].to_vec();
        let mut adj: Vec<BTreeMap<NodeId, EdgeInfo>> = self.adj[..prop_count].to_vec();
        let key: HashMap<ProductNode, NodeId> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (*n, NodeId(i)))
            .collect();
        let root = if let Some(&id) = key.get(&pos) {
            id
        } else {
            if w.is_labeled(pos.cell) {
                return Err(GraphError::BadPosition(pos));
            }
            nodes.push(pos);
            adj.push(silent_edges(w, b, pos.cell, &[pos.q], &key));
            NodeId(nodes.len() - 1)
        };
        Ok(ReducedGraph {
            nodes,
            root,
            root_qs: vec![pos.q],
            adj,
            finals: self.finals.clone(),
            prop_count,
        })
    }
}

/// BFS over label-silent product states from `cell` (starting Büchi states
/// `qs`), yielding one edge per reachable proposition node, with a shortest
/// witness path.
fn silent_edges(
    w: &Workspace,
    b: &BuchiAutomaton,
    cell: Cell,
    qs: &[StateId],
    key: &HashMap<ProductNode, NodeId>,
) -> BTreeMap<NodeId, EdgeInfo> {
    #[derive(Clone, Copy)]
    struct Parent {
        prev: Option<(Cell, StateId)>,
    }
    let mut seen: HashMap<(Cell, StateId), Parent> = HashMap::new();
    let mut found: BTreeMap<NodeId, (u32, (Cell, StateId))> = BTreeMap::new();
    let mut queue: VecDeque<(Cell, StateId, u32)> = VecDeque::new();
    for &q in qs {
        if seen
            .insert((cell, q), Parent { prev: None })
            .is_none()
        {
            queue.push_back((cell, q, 0));
        }
    }
    while let Some((c, q, d)) = queue.pop_front() {
        let Ok(neigh) = w.neighbors(c) else { continue };
        for (_, c2) in neigh {
            let label = w.label_of(c2);
            if label.is_empty() {
                for q2 in b.step(q, label) {
                    if let std::collections::hash_map::Entry::Vacant(e) = seen.entry((c2, q2)) {
                        e.insert(Parent { prev: Some((c, q)) });
                        queue.push_back((c2, q2, d + 1));
                    }
                }
            } else {
                for q2 in b.step(q, label) {
                    if let Some(&id) = key.get(&ProductNode { cell: c2, q: q2 }) {
                        found.entry(id).or_insert((d + 1, (c, q)));
                    }
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    for (id, (dist, mut at)) in found {
        let target = key.iter().find(|(_, v)| **v == id).unwrap().0.cell;
        let mut witness = vec![target];
        loop {
            witness.push(at.0);
            match seen[&at].prev {
                Some(p) => at = p,
                None => break,
            }
        }
        witness.reverse();
        out.insert(
            id,
            EdgeInfo {
                weight: dist * w.action_cost(),
                witness,
            },
        );
    }
    out
}

/// Build G_r: reachable (labeled cell, Büchi state) pairs plus the root, with
/// label-silent shortest-path edges.
pub fn build_reduced_graph(
    w: &Workspace,
    b: &BuchiAutomaton,
) -> Result<ReducedGraph, GraphError> {
    // reachable product states, full product BFS
    let mut reach: HashSet<ProductNode> = HashSet::new();
    let mut queue: VecDeque<ProductNode> = VecDeque::new();
    for &q in b.initial_states() {
        let n = ProductNode { cell: w.initial(), q };
        if reach.insert(n) {
            queue.push_back(n);
        }
    }
    while let Some(n) = queue.pop_front() {
        for s in product_successors(w, b, n) {
            if reach.insert(s) {
                queue.push_back(s);
            }
        }
    }

    // proposition nodes in row-major cell order, then automaton-state order
    let mut nodes: Vec<ProductNode> = reach
        .iter()
        .filter(|n| w.is_labeled(n.cell))
        .copied()
        .collect();
    nodes.sort_by_key(|n| (n.cell.y, n.cell.x, n.q));
    let key: HashMap<ProductNode, NodeId> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (*n, NodeId(i)))
        .collect();

    let prop_count = nodes.len();
    let mut adj: Vec<BTreeMap<NodeId, EdgeInfo>> = nodes
        .iter()
        .map(|n| silent_edges(w, b, n.cell, &[n.q], &key))
        .collect();

    let root_qs: Vec<StateId> = b.initial_states().to_vec();
    let root = if let Some(&id) = (root_qs.len() == 1)
        .then(|| {
            key.get(&ProductNode {
                cell: w.initial(),
                q: root_qs[0],
            })
        })
        .flatten()
    {
        id
    } else {
        nodes.push(ProductNode {
            cell: w.initial(),
            q: root_qs[0],
        });
        adj.push(silent_edges(w, b, w.initial(), &root_qs, &key));
        NodeId(nodes.len() - 1)
    };

    let finals: Vec<NodeId> = nodes
        .iter()
        .enumerate()
        .filter(|(i, n)| *i < prop_count && b.is_accepting(n.q))
        .map(|(i, _)| NodeId(i))
        .collect();

    let g = ReducedGraph {
        nodes,
        root,
        root_qs,
        adj,
        finals,
        prop_count,
    };

    // feasibility: some final reachable from root, with a cycle through it
    let (dist, _) = g.dijkstra_static(g.root);
    let feasible = g
        .finals
        .iter()
        .any(|f| dist[f.0].is_some() && g.shortest_cycle_static(*f).is_some());
    if !feasible {
        return Err(GraphError::Infeasible(
            "no reachable final node with a suffix cycle".into(),
        ));
    }
    Ok(g)
}
