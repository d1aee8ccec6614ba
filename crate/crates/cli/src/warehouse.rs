//! Parametric warehouse layouts for sweep axes that change the workspace
//! itself: shelf columns every 4 cells with open top/bottom aisles, and a
//! configurable number of pickup/drop pairs spread over the free cells.

use dtstar::{Cell, Workspace};
use std::collections::{BTreeMap, BTreeSet};

pub fn layout(side: u16, pairs: usize) -> Result<Workspace, String> {
    if side < 12 {
        return Err(format!("warehouse side {side} too small"));
    }
    if pairs == 0 {
        return Err("need at least one pickup/drop pair".into());
    }
    let initial = Cell::new(0, 0);
    let mut obstacles: BTreeSet<Cell> = BTreeSet::new();
    let mut x = 4;
    while x + 3 < side {
        for y in 2..=side - 3 {
            obstacles.insert(Cell::new(x, y));
        }
        x += 4;
    }
    let free: Vec<Cell> = (0..side)
        .flat_map(|y| (0..side).map(move |x| Cell::new(x, y)))
        .filter(|c| !obstacles.contains(c) && *c != initial)
        .collect();
    let stride = free.len() / (2 * pairs);
    if stride == 0 {
        return Err(format!("side {side} cannot host {pairs} pairs"));
    }
    let mut labels: BTreeMap<Cell, BTreeSet<String>> = BTreeMap::new();
    for j in 0..2 * pairs {
        let prop = if j % 2 == 0 { "p" } else { "d" };
        let cell = free[stride / 2 + j * stride];
        labels.insert(cell, BTreeSet::from([prop.to_string()]));
    }
    Workspace::new(side, side, obstacles, labels, initial, 1).map_err(|e| e.to_string())
}
