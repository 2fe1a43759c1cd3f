//! Single-robot shortest paths on the grid.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use crate::map::{Cell, Point, WorldMap};

const DIRS: [(i32, i32); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

/// Free 8-connected neighbours with their step cost in cells. A diagonal
/// step needs both orthogonal cells it passes between to be free.
pub fn neighbors(map: &WorldMap, c: Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
    DIRS.iter().filter_map(move |&(dx, dy)| {
        let n = (c.0 + dx, c.1 + dy);
        if !map.is_free(n) {
            return None;
        }
        if dx != 0 && dy != 0 {
            if !map.is_free((c.0 + dx, c.1)) || !map.is_free((c.0, c.1 + dy)) {
                return None;
            }
            Some((n, std::f64::consts::SQRT_2))
        } else {
            Some((n, 1.0))
        }
    })
}

pub fn octile(a: Cell, b: Cell) -> f64 {
    let dx = (a.0 - b.0).abs() as f64;
    let dy = (a.1 - b.1).abs() as f64;
    dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy)
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    g: f64,
    cell: Cell,
}

impl Eq for Open {}

impl Ord for Open {
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&o.g))
            .then_with(|| o.cell.cmp(&self.cell))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Cheapest cell sequence from `start` to `goal`, both inclusive.
pub fn grid_path(map: &WorldMap, start: Cell, goal: Cell) -> Option<Vec<Cell>> {
    if !map.is_free(start) || !map.is_free(goal) {
        return None;
    }
    let mut open = BinaryHeap::new();
    let mut best: HashMap<Cell, f64> = HashMap::new();
    let mut parent: HashMap<Cell, Cell> = HashMap::new();
    best.insert(start, 0.0);
    open.push(Open {
        f: octile(start, goal),
        g: 0.0,
        cell: start,
    });
    while let Some(Open { g, cell, .. }) = open.pop() {
        if cell == goal {
            let mut path = vec![goal];
            let mut c = goal;
            while let Some(&p) = parent.get(&c) {
                path.push(p);
                c = p;
            }
            path.reverse();
            return Some(path);
        }
        if g > best[&cell] {
            continue;
        }
        for (n, cost) in neighbors(map, cell) {
            let ng = g + cost;
            if best.get(&n).is_none_or(|&b| ng < b - 1e-12) {
                best.insert(n, ng);
                parent.insert(n, cell);
                open.push(Open {
                    f: ng + octile(n, goal),
                    g: ng,
                    cell: n,
                });
            }
        }
    }
    None
}

/// Keeps the farthest visible point from each anchor, so no interior
/// point can be dropped without losing line of sight.
pub fn simplify(map: &WorldMap, pts: &[Point]) -> Vec<Point> {
    if pts.len() <= 2 {
        return pts.to_vec();
    }
    let mut out = vec![pts[0]];
    let mut anchor = 0;
    while anchor < pts.len() - 1 {
        let next = (anchor + 1..pts.len())
            .rev()
            .find(|&j| j == anchor + 1 || map.line_of_sight(pts[anchor], pts[j]))
            .unwrap_or(anchor + 1);
        out.push(pts[next]);
        anchor = next;
    }
    out
}

pub fn path_length(pts: &[Point]) -> f64 {
    pts.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Grid path from `start` to `goal` through cell centres, with the exact
/// endpoints in place of their cells' centres.
pub fn raw_path(map: &WorldMap, start: Point, goal: Point) -> Option<Vec<Point>> {
    let cells = grid_path(map, map.cell_of(start), map.cell_of(goal))?;
    let mut pts: Vec<Point> = cells.iter().map(|c| map.center(*c)).collect();
    pts[0] = start;
    if cells.len() == 1 {
        pts.push(goal);
    } else {
        *pts.last_mut().unwrap() = goal;
    }
    Some(pts)
}

/// The simplified single-robot path. Its length is the reference every
/// joint plan is compared against.
pub fn shortest_path(map: &WorldMap, start: Point, goal: Point) -> Option<Vec<Point>> {
    let raw = raw_path(map, start, goal)?;
    let mut pts = simplify(map, &raw);
    if pts.len() == 2 && pts[0] == pts[1] {
        pts.pop();
    }
    Some(pts)
}

/// Travel time in seconds for a lone robot moving at `speed`.
pub fn estimate(map: &WorldMap, start: Point, goal: Point, speed: f64) -> Option<f64> {
    shortest_path(map, start, goal).map(|p| path_length(&p) / speed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_map_is_a_straight_line() {
        let m = WorldMap::empty(10, 10, 1.0);
        let p = shortest_path(&m, Point::new(0.5, 0.5), Point::new(9.5, 9.5)).unwrap();
        assert_eq!(p, vec![Point::new(0.5, 0.5), Point::new(9.5, 9.5)]);
    }

    #[test]
    fn adjacent_cell_costs_one_resolution() {
        let m = WorldMap::empty(3, 3, 0.5);
        let t = estimate(&m, m.center((0, 0)), m.center((1, 0)), 0.25).unwrap();
        assert!((t - 2.0).abs() < 1e-12);
    }

    #[test]
    fn walls_force_a_detour() {
        let m = WorldMap::parse("5 5 1\n.....\n.....\n####.\n.....\n.....\n").unwrap();
        let p = shortest_path(&m, Point::new(0.5, 0.5), Point::new(0.5, 4.5)).unwrap();
        assert!(path_length(&p) > 4.0 + 1.0);
        assert!(p.windows(2).all(|w| m.line_of_sight(w[0], w[1])));
    }

    #[test]
    fn unreachable_goal() {
        let m = WorldMap::parse("3 1 1\n.#.\n").unwrap();
        assert!(shortest_path(&m, Point::new(0.5, 0.5), Point::new(2.5, 0.5)).is_none());
    }

    #[test]
    fn no_corner_cutting() {
        let m = WorldMap::parse("2 2 1\n.#\n#.\n").unwrap();
        assert!(grid_path(&m, (0, 0), (1, 1)).is_none());
    }
}
