//! Occupancy grids and the text map format.
//!
//! ```text
//! 4 3 0.5
//! ....
//! .##.
//! ....
//! dock 0.25 0.25 0
//! lobby 1.75 1.25 1.57
//! ```
//!
//! The header is `width height resolution`. The next `height` lines are
//! rows of `.` (free) and `#` (occupied); the first row is `y = 0`. Every
//! remaining non-blank line is a named location `name x y theta` in meters.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use resh_protocol::Pose;
use thiserror::Error;

/// Grid coordinates of a cell.
pub type Cell = (i32, i32);

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    pub fn lerp(self, o: Point, s: f64) -> Point {
        Point::new(self.x + (o.x - self.x) * s, self.y + (o.y - self.y) * s)
    }
}

impl From<Pose> for Point {
    fn from(p: Pose) -> Self {
        Point::new(p.x, p.y)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MapError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("location {0} is outside the map or on an occupied cell")]
    BlockedLocation(String),
    #[error("duplicate location {0}")]
    DuplicateLocation(String),
    #[error("cannot read map: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap {
    pub width: usize,
    pub height: usize,
    /// Cell edge length in meters.
    pub resolution: f64,
    occupied: Vec<bool>,
    pub locations: BTreeMap<String, Pose>,
}

impl WorldMap {
    /// An obstacle-free map.
    pub fn empty(width: usize, height: usize, resolution: f64) -> Self {
        WorldMap {
            width,
            height,
            resolution,
            occupied: vec![false; width * height],
            locations: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, MapError> {
        let text = std::fs::read_to_string(path).map_err(|e| MapError::Io(e.to_string()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, MapError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end()))
            .filter(|(_, l)| !l.trim().is_empty());
        let syntax = |line: usize, reason: &str| MapError::Syntax {
            line,
            reason: reason.to_string(),
        };
        let (hl, header) = lines.next().ok_or_else(|| syntax(1, "missing header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(syntax(hl, "expected `width height resolution`"));
        }
        let width: usize = fields[0].parse().map_err(|_| syntax(hl, "bad width"))?;
        let height: usize = fields[1].parse().map_err(|_| syntax(hl, "bad height"))?;
        let resolution: f64 = fields[2].parse().map_err(|_| syntax(hl, "bad resolution"))?;
        if width == 0 || height == 0 || !(resolution > 0.0 && resolution.is_finite()) {
            return Err(syntax(hl, "dimensions and resolution must be positive"));
        }
        let mut map = WorldMap::empty(width, height, resolution);
        for y in 0..height {
            let (ln, row) = lines.next().ok_or_else(|| syntax(hl, "too few rows"))?;
            let row = row.trim();
            if row.chars().count() != width {
                return Err(syntax(ln, &format!("row must have {width} cells")));
            }
            for (x, c) in row.chars().enumerate() {
                match c {
                    '.' => {}
                    '#' => map.occupied[y * width + x] = true,
                    _ => return Err(syntax(ln, &format!("unexpected cell {c:?}"))),
                }
            }
        }
        for (ln, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(syntax(ln, "expected `name x y theta`"));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| syntax(ln, "bad number"));
            let pose = Pose::new(num(f[1])?, num(f[2])?, num(f[3])?);
            map.add_location(f[0], pose)?;
        }
        Ok(map)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {}\n", self.width, self.height, self.resolution);
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(if self.occupied[y * self.width + x] { '#' } else { '.' });
            }
            out.push('\n');
        }
        for (name, p) in &self.locations {
            let _ = writeln!(out, "{name} {} {} {}", p.x, p.y, p.theta);
        }
        out
    }

    pub fn add_location(&mut self, name: &str, pose: Pose) -> Result<(), MapError> {
        if self.locations.contains_key(name) {
            return Err(MapError::DuplicateLocation(name.to_string()));
        }
        if !self.point_is_free(pose.into()) {
            return Err(MapError::BlockedLocation(name.to_string()));
        }
        self.locations.insert(name.to_string(), pose);
        Ok(())
    }

    pub fn location(&self, name: &str) -> Option<Pose> {
        self.locations.get(name).copied()
    }

    pub fn set_occupied(&mut self, c: Cell, occupied: bool) {
        if self.in_bounds(c) {
            self.occupied[c.1 as usize * self.width + c.0 as usize] = occupied;
        }
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.0 >= 0 && c.1 >= 0 && (c.0 as usize) < self.width && (c.1 as usize) < self.height
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.occupied[c.1 as usize * self.width + c.0 as usize]
    }

    pub fn cell_of(&self, p: Point) -> Cell {
        (
            (p.x / self.resolution).floor() as i32,
            (p.y / self.resolution).floor() as i32,
        )
    }

    pub fn center(&self, c: Cell) -> Point {
        Point::new(
            (c.0 as f64 + 0.5) * self.resolution,
            (c.1 as f64 + 0.5) * self.resolution,
        )
    }

    pub fn point_is_free(&self, p: Point) -> bool {
        p.x.is_finite() && p.y.is_finite() && self.is_free(self.cell_of(p))
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height as i32)
            .flat_map(move |y| (0..self.width as i32).map(move |x| (x, y)))
            .filter(|c| self.is_free(*c))
    }

    /// True when every cell the segment touches is free. A segment
    /// passing exactly through a cell corner must have both cells beside
    /// the corner free, so diagonal squeezes between obstacles are refused.
    pub fn line_of_sight(&self, a: Point, b: Point) -> bool {
        let r = self.resolution;
        let (ax, ay, bx, by) = (a.x / r, a.y / r, b.x / r, b.y / r);
        let mut c = self.cell_of(a);
        let end = self.cell_of(b);
        if !self.is_free(c) || !self.is_free(end) {
            return false;
        }
        let (dx, dy) = (bx - ax, by - ay);
        let step_x = if dx > 0.0 { 1 } else { -1 };
        let step_y = if dy > 0.0 { 1 } else { -1 };
        let t_delta_x = if dx == 0.0 { f64::INFINITY } else { 1.0 / dx.abs() };
        let t_delta_y = if dy == 0.0 { f64::INFINITY } else { 1.0 / dy.abs() };
        let boundary = |p: f64, cell: i32, step: i32| {
            if step > 0 {
                (cell + 1) as f64 - p
            } else {
                p - cell as f64
            }
        };
        let mut t_max_x = if dx == 0.0 {
            f64::INFINITY
        } else {
            boundary(ax, c.0, step_x) * t_delta_x
        };
        let mut t_max_y = if dy == 0.0 {
            f64::INFINITY
        } else {
            boundary(ay, c.1, step_y) * t_delta_y
        };
        const EPS: f64 = 1e-9;
        while c != end {
            if t_max_x.min(t_max_y) > 1.0 + EPS {
                break;
            }
            if (t_max_x - t_max_y).abs() < EPS {
                if !self.is_free((c.0 + step_x, c.1)) || !self.is_free((c.0, c.1 + step_y)) {
                    return false;
                }
                c = (c.0 + step_x, c.1 + step_y);
                t_max_x += t_delta_x;
                t_max_y += t_delta_y;
            } else if t_max_x < t_max_y {
                c.0 += step_x;
                t_max_x += t_delta_x;
            } else {
                c.1 += step_y;
                t_max_y += t_delta_y;
            }
            if !self.is_free(c) {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "4 3 0.5\n....\n.##.\n....\ndock 0.25 0.25 0\nlobby 1.75 1.25 1.5\n";

    #[test]
    fn parse_and_print_round_trip() {
        let m = WorldMap::parse(SAMPLE).unwrap();
        assert_eq!((m.width, m.height), (4, 3));
        assert!(!m.is_free((1, 1)));
        assert!(m.is_free((0, 1)));
        assert_eq!(m.location("lobby"), Some(Pose::new(1.75, 1.25, 1.5)));
        assert_eq!(WorldMap::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn rejects_bad_maps() {
        assert!(matches!(
            WorldMap::parse("2 2 1\n..\n.\n"),
            Err(MapError::Syntax { line: 3, .. })
        ));
        assert!(matches!(
            WorldMap::parse("2 1 1\n.#\nx 1.5 0.5 0\n"),
            Err(MapError::BlockedLocation(_))
        ));
        assert!(WorldMap::parse("0 1 1\n").is_err());
    }

    #[test]
    fn sight_lines_respect_walls_and_corners() {
        let m = WorldMap::parse(SAMPLE).unwrap();
        assert!(m.line_of_sight(Point::new(0.25, 0.25), Point::new(1.75, 0.25)));
        assert!(!m.line_of_sight(Point::new(0.25, 0.75), Point::new(1.75, 0.75)));
        assert!(!m.line_of_sight(Point::new(0.25, 0.25), Point::new(1.75, 1.25)));
        let mut d = WorldMap::empty(2, 2, 1.0);
        d.set_occupied((1, 0), true);
        assert!(!d.line_of_sight(Point::new(0.5, 0.5), Point::new(1.5, 1.5)));
    }
}
