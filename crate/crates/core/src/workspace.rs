//! Grid workspace: static obstacles, proposition labels, timed blockage events.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// Timestamps and durations are integer seconds throughout.
pub type Time = u32;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Cell {
    pub x: u16,
    pub y: u16,
}

impl Cell {
    pub const fn new(x: u16, y: u16) -> Self {
        Cell { x, y }
    }

    pub fn manhattan(self, other: Cell) -> u32 {
        (self.x.abs_diff(other.x) as u32) + (self.y.abs_diff(other.y) as u32)
    }

    /// True if the cells are 4-connected neighbors (not equal).
    pub fn adjacent(self, other: Cell) -> bool {
        self.manhattan(other) == 1
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Action {
    Left,
    Right,
    Up,
    Down,
    Wait,
}

impl Action {
    pub const MOVES: [Action; 4] = [Action::Left, Action::Right, Action::Up, Action::Down];
}

#[derive(Error, Debug)]
pub enum WorkspaceError {
    #[error("cell {0} is out of bounds")]
    OutOfBounds(Cell),
    #[error("cell {0} is a static obstacle")]
    Obstacle(Cell),
    #[error("invalid workspace: {0}")]
    Invalid(String),
}

/// A timed blockage of a single cell over the half-open interval
/// [t_start, t_end): the cell is free again exactly at t_end.
/// Planners only see events whose `announced_at` has passed.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct DynamicEvent {
    pub cell: Cell,
    pub t_start: Time,
    pub t_end: Time,
    pub announced_at: Time,
}

impl DynamicEvent {
    pub fn blocks(&self, c: Cell, t: Time) -> bool {
        self.cell == c && self.t_start <= t && t < self.t_end
    }
}

/// True iff some event announced by `now` blocks cell `c` at time `t`.
pub fn blocked_during(events: &[DynamicEvent], c: Cell, t: Time, now: Time) -> bool {
    events
        .iter()
        .any(|e| e.announced_at <= now && e.blocks(c, t))
}

/// Keep only the events visible to a planner invoked at `now`.
pub fn visible_events(events: &[DynamicEvent], now: Time) -> Vec<DynamicEvent> {
    events
        .iter()
        .copied()
        .filter(|e| e.announced_at <= now)
        .collect()
}

#[derive(Clone, Debug)]
pub struct Workspace {
    width: u16,
    height: u16,
    obstacles: BTreeSet<Cell>,
    labels: BTreeMap<Cell, BTreeSet<String>>,
    initial: Cell,
    action_cost: u32,
}

impl Workspace {
    pub fn new(
        width: u16,
        height: u16,
        obstacles: BTreeSet<Cell>,
        labels: BTreeMap<Cell, BTreeSet<String>>,
        initial: Cell,
        action_cost: u32,
    ) -> Result<Self, WorkspaceError> {
        let w = Workspace {
            width,
            height,
            obstacles,
            labels,
            initial,
            action_cost,
        };
        if width == 0 || height == 0 {
            return Err(WorkspaceError::Invalid("zero-sized grid".into()));
        }
        if action_cost == 0 {
            return Err(WorkspaceError::Invalid("action_cost must be positive".into()));
        }
        if !w.in_bounds(initial) {
            return Err(WorkspaceError::OutOfBounds(initial));
        }
        if w.obstacles.contains(&initial) {
            return Err(WorkspaceError::Invalid(format!(
                "initial cell {initial} is a static obstacle"
            )));
        }
        for o in &w.obstacles {
            if !w.in_bounds(*o) {
                return Err(WorkspaceError::OutOfBounds(*o));
            }
        }
        for c in w.labels.keys() {
            if !w.in_bounds(*c) {
                return Err(WorkspaceError::OutOfBounds(*c));
            }
            if w.obstacles.contains(c) {
                return Err(WorkspaceError::Invalid(format!(
                    "labeled cell {c} is a static obstacle"
                )));
            }
        }
        Ok(w)
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn initial(&self) -> Cell {
        self.initial
    }

    pub fn action_cost(&self) -> u32 {
        self.action_cost
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn is_obstacle(&self, c: Cell) -> bool {
        self.obstacles.contains(&c)
    }

    /// In bounds and not a static obstacle.
    pub fn is_free(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.is_obstacle(c)
    }

    pub fn label_of(&self, c: Cell) -> &BTreeSet<String> {
        static EMPTY: std::sync::OnceLock<BTreeSet<String>> = std::sync::OnceLock::new();
        self.labels
            .get(&c)
            .unwrap_or_else(|| EMPTY.get_or_init(BTreeSet::new))
    }

    pub fn is_labeled(&self, c: Cell) -> bool {
        self.labels.get(&c).is_some_and(|s| !s.is_empty())
    }

    pub fn labeled_cells(&self) -> impl Iterator<Item = (Cell, &BTreeSet<String>)> {
        self.labels
            .iter()
            .filter(|(_, l)| !l.is_empty())
            .map(|(c, l)| (*c, l))
    }

    /// 4-connected free neighbors of `c`.  `wait` is not listed here; the
    /// time-dependent search adds it as a pseudo-action.
    pub fn neighbors(&self, c: Cell) -> Result<Vec<(Action, Cell)>, WorkspaceError> {
        if !self.in_bounds(c) {
            return Err(WorkspaceError::OutOfBounds(c));
        }
        if self.is_obstacle(c) {
            return Err(WorkspaceError::Obstacle(c));
        }
        let mut out = Vec::with_capacity(4);
        for a in Action::MOVES {
            if let Some(n) = self.shift(c, a) {
                if self.is_free(n) {
                    out.push((a, n));
                }
            }
        }
        Ok(out)
    }

    fn shift(&self, c: Cell, a: Action) -> Option<Cell> {
        match a {
            Action::Left => c.x.checked_sub(1).map(|x| Cell::new(x, c.y)),
            Action::Right => (c.x + 1 < self.width).then(|| Cell::new(c.x + 1, c.y)),
            Action::Down => c.y.checked_sub(1).map(|y| Cell::new(c.x, y)),
            Action::Up => (c.y + 1 < self.height).then(|| Cell::new(c.x, c.y + 1)),
            Action::Wait => Some(c),
        }
    }
}

/// Per-cell index of blocking intervals; speeds up the hot `blocked` checks in
/// the time-dependent searches (events are assumed already visibility-filtered).
#[derive(Clone, Debug, Default)]
pub struct BlockIndex {
    by_cell: BTreeMap<Cell, Vec<(Time, Time)>>,
    max_t_end: Time,
}

impl BlockIndex {
    pub fn new(visible: &[DynamicEvent]) -> Self {
        let mut by_cell: BTreeMap<Cell, Vec<(Time, Time)>> = BTreeMap::new();
        let mut max_t_end = 0;
        for e in visible {
            if e.t_start < e.t_end {
                by_cell.entry(e.cell).or_default().push((e.t_start, e.t_end));
                max_t_end = max_t_end.max(e.t_end);
            }
        }
        BlockIndex { by_cell, max_t_end }
    }

    pub fn blocked(&self, c: Cell, t: Time) -> bool {
        self.by_cell
            .get(&c)
            .is_some_and(|iv| iv.iter().any(|&(a, b)| a <= t && t < b))
    }

    pub fn has_events_on(&self, c: Cell) -> bool {
        self.by_cell.contains_key(&c)
    }

    /// Earliest τ ≥ t at which `c` is not blocked.
    pub fn next_free(&self, c: Cell, t: Time) -> Time {
        let Some(ivs) = self.by_cell.get(&c) else {
            return t;
        };
        let mut t = t;
        // intervals may overlap and are unordered; iterate to a fixed point
        loop {
            let mut moved = false;
            for &(a, b) in ivs {
                if a <= t && t < b {
                    t = b;
                    moved = true;
                }
            }
            if !moved {
                return t;
            }
        }
    }

    /// Latest release instant among indexed events (0 if none).
    pub fn max_t_end(&self) -> Time {
        self.max_t_end
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3(obstacles: &[Cell]) -> Workspace {
        Workspace::new(
            3,
            3,
            obstacles.iter().copied().collect(),
            BTreeMap::new(),
            Cell::new(0, 0),
            1,
        )
        .unwrap()
    }

    #[test]
    fn neighbors_interior() {
        let w = grid3(&[]);
        let n = w.neighbors(Cell::new(1, 1)).unwrap();
        let cells: BTreeSet<Cell> = n.iter().map(|(_, c)| *c).collect();
        assert_eq!(
            cells,
            [
                Cell::new(0, 1),
                Cell::new(2, 1),
                Cell::new(1, 2),
                Cell::new(1, 0)
            ]
            .into_iter()
            .collect()
        );
    }

    #[test]
    fn neighbors_excludes_obstacle() {
        let w = grid3(&[Cell::new(2, 1)]);
        let n = w.neighbors(Cell::new(1, 1)).unwrap();
        assert_eq!(n.len(), 3);
        assert!(n.iter().all(|(_, c)| *c != Cell::new(2, 1)));
    }

    #[test]
    fn neighbors_corner() {
        let w = grid3(&[]);
        let n = w.neighbors(Cell::new(0, 0)).unwrap();
        let cells: BTreeSet<Cell> = n.iter().map(|(_, c)| *c).collect();
        assert_eq!(
            cells,
            [Cell::new(1, 0), Cell::new(0, 1)].into_iter().collect()
        );
    }

    #[test]
    fn neighbors_rejects_bad_input() {
        let w = grid3(&[Cell::new(1, 1)]);
        assert!(matches!(
            w.neighbors(Cell::new(5, 5)),
            Err(WorkspaceError::OutOfBounds(_))
        ));
        assert!(matches!(
            w.neighbors(Cell::new(1, 1)),
            Err(WorkspaceError::Obstacle(_))
        ));
    }

    #[test]
    fn blocked_during_examples() {
        // P3 blocked over [10,25), announced at 10.
        let ev = [DynamicEvent {
            cell: Cell::new(5, 2),
            t_start: 10,
            t_end: 25,
            announced_at: 10,
        }];
        assert!(blocked_during(&ev, Cell::new(5, 2), 12, 10));
        // release instant is available (half-open interval)
        assert!(!blocked_during(&ev, Cell::new(5, 2), 25, 10));
        // unannounced events are invisible
        assert!(!blocked_during(&ev, Cell::new(5, 2), 12, 5));
        // other cells unaffected
        assert!(!blocked_during(&ev, Cell::new(5, 3), 12, 10));
    }

    #[test]
    fn workspace_validation() {
        assert!(Workspace::new(
            3,
            3,
            [Cell::new(0, 0)].into_iter().collect(),
            BTreeMap::new(),
            Cell::new(0, 0),
            1
        )
        .is_err());
        let mut labels = BTreeMap::new();
        labels.insert(Cell::new(9, 9), ["p".to_string()].into_iter().collect());
        assert!(Workspace::new(3, 3, BTreeSet::new(), labels, Cell::new(0, 0), 1).is_err());
    }
}
