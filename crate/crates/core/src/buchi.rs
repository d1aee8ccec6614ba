//! Büchi automata: guard evaluation, lasso acceptance, and plan verification.
//!
//! Automata are ingested from a small JSON format (states, initial, accepting,
//! alphabet, guarded transitions); guards are boolean formulas over proposition
//! literals.

use crate::plan::{PlanError, TimedPlan};
use crate::workspace::Workspace;
use serde::Deserialize;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct StateId(pub usize);

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Guard {
    True,
    Atom(String),
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

#[derive(Error, Debug)]
pub enum AutomatonError {
    #[error("guard syntax error at column {col}: {msg}")]
    GuardSyntax { col: usize, msg: String },
    #[error("undeclared proposition `{0}` in guard")]
    UndeclaredProposition(String),
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("accepting set is empty")]
    EmptyAccepting,
    #[error("initial set is empty")]
    EmptyInitial,
    #[error("automaton JSON: {0}")]
    Json(String),
}

impl Guard {
    pub fn eval(&self, labels: &BTreeSet<String>) -> bool {
        match self {
            Guard::True => true,
            Guard::Atom(p) => labels.contains(p),
            Guard::Not(g) => !g.eval(labels),
            Guard::And(a, b) => a.eval(labels) && b.eval(labels),
            Guard::Or(a, b) => a.eval(labels) || b.eval(labels),
        }
    }

    pub fn atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            Guard::True => {}
            Guard::Atom(p) => {
                out.insert(p.clone());
            }
            Guard::Not(g) => g.atoms(out),
            Guard::And(a, b) | Guard::Or(a, b) => {
                a.atoms(out);
                b.atoms(out);
            }
        }
    }

    /// Recursive-descent parser for `!`, `&`, `|`, parentheses, `true`.
    pub fn parse(text: &str) -> Result<Guard, AutomatonError> {
        let mut p = GuardParser {
            chars: text.char_indices().peekable(),
            len: text.len(),
        };
        let g = p.expr()?;
        p.skip_ws();
        match p.chars.peek() {
            None => Ok(g),
            Some(&(i, c)) => Err(AutomatonError::GuardSyntax {
                col: i + 1,
                msg: format!("unexpected `{c}`"),
            }),
        }
    }
}

struct GuardParser<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    len: usize,
}

impl GuardParser<'_> {
    fn skip_ws(&mut self) {
        while self.chars.peek().is_some_and(|&(_, c)| c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn expr(&mut self) -> Result<Guard, AutomatonError> {
        let mut g = self.term()?;
        loop {
            self.skip_ws();
            if self.chars.peek().is_some_and(|&(_, c)| c == '|') {
                self.chars.next();
                g = Guard::Or(Box::new(g), Box::new(self.term()?));
            } else {
                return Ok(g);
            }
        }
    }

    fn term(&mut self) -> Result<Guard, AutomatonError> {
        let mut g = self.factor()?;
        loop {
            self.skip_ws();
            if self.chars.peek().is_some_and(|&(_, c)| c == '&') {
                self.chars.next();
                g = Guard::And(Box::new(g), Box::new(self.factor()?));
            } else {
                return Ok(g);
            }
        }
    }

    fn factor(&mut self) -> Result<Guard, AutomatonError> {
        self.skip_ws();
        match self.chars.peek().copied() {
            Some((_, '!')) => {
                self.chars.next();
                Ok(Guard::Not(Box::new(self.factor()?)))
            }
            Some((_, '(')) => {
                self.chars.next();
                let g = self.expr()?;
                self.skip_ws();
                match self.chars.next() {
                    Some((_, ')')) => Ok(g),
                    other => Err(AutomatonError::GuardSyntax {
                        col: other.map_or(self.len, |(i, _)| i) + 1,
                        msg: "expected `)`".into(),
                    }),
                }
            }
            Some((i, c)) if c.is_alphanumeric() || c == '_' => {
                let mut name = String::new();
                while self
                    .chars
                    .peek()
                    .is_some_and(|&(_, c)| c.is_alphanumeric() || c == '_')
                {
                    name.push(self.chars.next().unwrap().1);
                }
                if name == "true" {
                    Ok(Guard::True)
                } else if name == "false" {
                    Ok(Guard::Not(Box::new(Guard::True)))
                } else if name.chars().next().unwrap().is_ascii_digit() {
                    Err(AutomatonError::GuardSyntax {
                        col: i + 1,
                        msg: format!("bad atom `{name}`"),
                    })
                } else {
                    Ok(Guard::Atom(name))
                }
            }
            Some((i, c)) => Err(AutomatonError::GuardSyntax {
                col: i + 1,
                msg: format!("unexpected `{c}`"),
            }),
            None => Err(AutomatonError::GuardSyntax {
                col: self.len + 1,
                msg: "unexpected end of guard".into(),
            }),
        }
    }
}

/// A (possibly nondeterministic) Büchi automaton over proposition valuations.
#[derive(Clone, Debug)]
pub struct BuchiAutomaton {
    state_names: Vec<String>,
    initial: Vec<StateId>,
    accepting: BTreeSet<StateId>,
    alphabet: BTreeSet<String>,
    /// Outgoing guarded transitions per source state, target-sorted.
    transitions: Vec<Vec<(Guard, StateId)>>,
    /// step(q, {}) precomputed — the hot case during path search.
    empty_succ: Vec<Vec<StateId>>,
}

#[derive(Deserialize)]
struct AutomatonFile {
    states: Vec<String>,
    initial: Vec<String>,
    accepting: Vec<String>,
    alphabet: Vec<String>,
    transitions: Vec<TransitionFile>,
}

#[derive(Deserialize)]
struct TransitionFile {
    from: String,
    to: String,
    guard: String,
}

impl BuchiAutomaton {
    pub fn new(
        state_names: Vec<String>,
        initial: Vec<StateId>,
        accepting: BTreeSet<StateId>,
        alphabet: BTreeSet<String>,
        transition_list: Vec<(StateId, Guard, StateId)>,
    ) -> Result<Self, AutomatonError> {
        if initial.is_empty() {
            return Err(AutomatonError::EmptyInitial);
        }
        if accepting.is_empty() {
            return Err(AutomatonError::EmptyAccepting);
        }
        let n = state_names.len();
        for q in initial.iter().chain(accepting.iter()) {
            if q.0 >= n {
                return Err(AutomatonError::UnknownState(format!("#{}", q.0)));
            }
        }
        let mut transitions: Vec<Vec<(Guard, StateId)>> = vec![Vec::new(); n];
        for (src, g, dst) in transition_list {
            if src.0 >= n || dst.0 >= n {
                return Err(AutomatonError::UnknownState(format!("#{}", src.0.max(dst.0))));
            }
            let mut atoms = BTreeSet::new();
            g.atoms(&mut atoms);
            for a in atoms {
                if !alphabet.contains(&a) {
                    return Err(AutomatonError::UndeclaredProposition(a));
                }
            }
            transitions[src.0].push((g, dst));
        }
        for out in &mut transitions {
            out.sort_by_key(|(_, dst)| *dst);
        }
        let empty = BTreeSet::new();
        let empty_succ = (0..n)
            .map(|q| step_raw(&transitions, StateId(q), &empty))
            .collect();
        let mut initial = initial;
        initial.sort();
        initial.dedup();
        Ok(BuchiAutomaton {
            state_names,
            initial,
            accepting,
            alphabet,
            transitions,
            empty_succ,
        })
    }

    pub fn parse_automaton(text: &str) -> Result<Self, AutomatonError> {
        let file: AutomatonFile =
            serde_json::from_str(text).map_err(|e| AutomatonError::Json(e.to_string()))?;
        let names = file.states.clone();
        let id_of = |name: &str| -> Result<StateId, AutomatonError> {
            names
                .iter()
                .position(|n| n == name)
                .map(StateId)
                .ok_or_else(|| AutomatonError::UnknownState(name.to_string()))
        };
        let initial = file
            .initial
            .iter()
            .map(|s| id_of(s))
            .collect::<Result<Vec<_>, _>>()?;
        let accepting = file
            .accepting
            .iter()
            .map(|s| id_of(s))
            .collect::<Result<BTreeSet<_>, _>>()?;
        let alphabet: BTreeSet<String> = file.alphabet.into_iter().collect();
        let transitions = file
            .transitions
            .iter()
            .map(|t| Ok((id_of(&t.from)?, Guard::parse(&t.guard)?, id_of(&t.to)?)))
            .collect::<Result<Vec<_>, AutomatonError>>()?;
        Self::new(file.states, initial, accepting, alphabet, transitions)
    }

    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn state_name(&self, q: StateId) -> &str {
        &self.state_names[q.0]
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.state_names.iter().position(|n| n == name).map(StateId)
    }

    pub fn initial_states(&self) -> &[StateId] {
        &self.initial
    }

    pub fn accepting_states(&self) -> &BTreeSet<StateId> {
        &self.accepting
    }

    pub fn alphabet(&self) -> &BTreeSet<String> {
        &self.alphabet
    }

    pub fn is_accepting(&self, q: StateId) -> bool {
        self.accepting.contains(&q)
    }

    /// All successors of `q` under the valuation that sets exactly `labels` true.
    pub fn step(&self, q: StateId, labels: &BTreeSet<String>) -> Vec<StateId> {
        if labels.is_empty() {
            return self.empty_succ[q.0].clone();
        }
        step_raw(&self.transitions, q, labels)
    }

    pub fn step_set(&self, qs: &[StateId], labels: &BTreeSet<String>) -> Vec<StateId> {
        let mut out: Vec<StateId> = qs.iter().flat_map(|&q| self.step(q, labels)).collect();
        out.sort();
        out.dedup();
        out
    }

    /// Büchi acceptance of prefix · loop^ω by nondeterministic state-set
    /// simulation of the prefix, then accepting-cycle detection on the
    /// (state, loop position) graph.
    pub fn accepts_lasso(&self, trace: &LassoTrace) -> bool {
        if trace.looped.is_empty() {
            return false;
        }
        let mut set: Vec<StateId> = self.initial.clone();
        for letter in &trace.prefix {
            set = self.step_set(&set, letter);
            if set.is_empty() {
                return false;
            }
        }
        let l = trace.looped.len();
        let n = self.num_states();
        // nodes (q, i): about to read looped[i]
        let idx = |q: StateId, i: usize| q.0 * l + i;
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n * l];
        for q in 0..n {
            for i in 0..l {
                for q2 in self.step(StateId(q), &trace.looped[i]) {
                    succ[idx(StateId(q), i)].push(idx(q2, (i + 1) % l));
                }
            }
        }
        // reachable nodes from the post-prefix set at loop position 0
        let mut reach = vec![false; n * l];
        let mut stack: Vec<usize> = set.iter().map(|&q| idx(q, 0)).collect();
        for &s in &stack {
            reach[s] = true;
        }
        while let Some(v) = stack.pop() {
            for &s in &succ[v] {
                if !reach[s] {
                    reach[s] = true;
                    stack.push(s);
                }
            }
        }
        // an accepting node on a reachable cycle?
        for &q in &self.accepting {
            for i in 0..l {
                let a = idx(q, i);
                if !reach[a] {
                    continue;
                }
                // nonzero-length path a -> a
                let mut seen = vec![false; n * l];
                let mut stack: Vec<usize> = succ[a].clone();
                while let Some(v) = stack.pop() {
                    if v == a {
                        return true;
                    }
                    if !seen[v] {
                        seen[v] = true;
                        stack.extend_from_slice(&succ[v]);
                    }
                }
            }
        }
        false
    }

    /// Soundness gate on planner output: expand the plan's cells to labels and
    /// check lasso acceptance.  Letters are emitted on cell changes only —
    /// waiting does not re-trigger a proposition.
    pub fn verify_plan(&self, w: &Workspace, plan: &TimedPlan) -> Result<bool, PlanError> {
        plan.validate()?;
        for (i, &(_, c)) in plan.steps.iter().enumerate() {
            if !w.is_free(c) {
                return Err(PlanError::NotAdjacent(i));
            }
        }
        let letters = |range: std::ops::Range<usize>| -> Vec<BTreeSet<String>> {
            range
                .filter(|&i| plan.steps[i].1 != plan.steps[i - 1].1)
                .map(|i| w.label_of(plan.steps[i].1).clone())
                .collect()
        };
        let prefix = letters(1..plan.loop_start + 1);
        let mut looped = letters(plan.loop_start + 1..plan.steps.len());
        if looped.is_empty() {
            // degenerate all-wait loop: the automaton keeps reading empty letters
            looped.push(BTreeSet::new());
        }
        Ok(self.accepts_lasso(&LassoTrace { prefix, looped }))
    }
}

fn step_raw(
    transitions: &[Vec<(Guard, StateId)>],
    q: StateId,
    labels: &BTreeSet<String>,
) -> Vec<StateId> {
    let mut out: Vec<StateId> = transitions[q.0]
        .iter()
        .filter(|(g, _)| g.eval(labels))
        .map(|(_, dst)| *dst)
        .collect();
    out.dedup();
    out
}

/// An ultimately-periodic word of label-sets: prefix · looped^ω.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LassoTrace {
    pub prefix: Vec<BTreeSet<String>>,
    pub looped: Vec<BTreeSet<String>>,
}
