//! Corridor mazes with T-junctions and light signals.
//!
//! A maze is a chain of straight legs starting northwards from the origin.
//! Each junction is a T: the corridor ends in a wall and branches both
//! ways; the wrong branch is a short dead end. A light on the centreline
//! of the leg before a junction is on when the robot should turn left.
//! The last leg opens into a square room whose centre is the target.

use serde::{Deserialize, Serialize};

use super::{Light, Pose, Scenario, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Turn {
    Left,
    Right,
}

impl Turn {
    pub fn parse_pattern(pattern: &str) -> Option<Vec<Turn>> {
        pattern
            .chars()
            .map(|c| match c.to_ascii_uppercase() {
                'L' => Some(Turn::Left),
                'R' => Some(Turn::Right),
                _ => None,
            })
            .collect()
    }

    fn rotate(self, u: [f64; 2]) -> [f64; 2] {
        match self {
            Turn::Left => [-u[1], u[0]],
            Turn::Right => [u[1], -u[0]],
        }
    }

    fn other(self) -> Turn {
        match self {
            Turn::Left => Turn::Right,
            Turn::Right => Turn::Left,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MazeSpec {
    pub corridor_width: f64,
    /// One more leg than there are junctions.
    pub legs: Vec<f64>,
    pub dead_end_length: f64,
    pub room_size: f64,
}

impl Default for MazeSpec {
    fn default() -> Self {
        MazeSpec {
            corridor_width: 140.0,
            legs: vec![300.0, 400.0, 400.0, 300.0],
            dead_end_length: 150.0,
            room_size: 400.0,
        }
    }
}

/// Closed axis-aligned box `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    fn spanning(a: [f64; 2], b: [f64; 2], half_width: f64) -> Rect {
        Rect {
            x0: a[0].min(b[0]) - half_width,
            y0: a[1].min(b[1]) - half_width,
            x1: a[0].max(b[0]) + half_width,
            y1: a[1].max(b[1]) + half_width,
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        self.x0 <= x && x <= self.x1 && self.y0 <= y && y <= self.y1
    }
}

fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

/// Boundary of the union of `rects`, as maximal straight segments.
pub fn outline(rects: &[Rect]) -> Vec<Segment> {
    let xs = sorted_unique(rects.iter().flat_map(|r| [r.x0, r.x1]).collect());
    let ys = sorted_unique(rects.iter().flat_map(|r| [r.y0, r.y1]).collect());
    let (nx, ny) = (xs.len().saturating_sub(1), ys.len().saturating_sub(1));
    let inside: Vec<Vec<bool>> = (0..nx)
        .map(|i| {
            (0..ny)
                .map(|j| {
                    let (cx, cy) = (0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]));
                    rects.iter().any(|r| r.contains(cx, cy))
                })
                .collect()
        })
        .collect();
    let cell = |i: isize, j: isize| {
        i >= 0 && j >= 0 && (i as usize) < nx && (j as usize) < ny && inside[i as usize][j as usize]
    };

    let mut walls = Vec::new();
    // vertical lines x = xs[i], edges along y
    for i in 0..xs.len() {
        let mut run: Option<usize> = None;
        for j in 0..=ny {
            let edge = j < ny && cell(i as isize - 1, j as isize) != cell(i as isize, j as isize);
            match (edge, run) {
                (true, None) => run = Some(j),
                (false, Some(start)) => {
                    walls.push(Segment::new([xs[i], ys[start]], [xs[i], ys[j]]));
                    run = None;
                }
                _ => {}
            }
        }
    }
    for j in 0..ys.len() {
        let mut run: Option<usize> = None;
        for i in 0..=nx {
            let edge = i < nx && cell(i as isize, j as isize - 1) != cell(i as isize, j as isize);
            match (edge, run) {
                (true, None) => run = Some(i),
                (false, Some(start)) => {
                    walls.push(Segment::new([xs[start], ys[j]], [xs[i], ys[j]]));
                    run = None;
                }
                _ => {}
            }
        }
    }
    walls
}

fn offset(p: [f64; 2], u: [f64; 2], s: f64) -> [f64; 2] {
    [p[0] + s * u[0], p[1] + s * u[1]]
}

pub fn build_maze(name: &str, turns: &[Turn], spec: &MazeSpec) -> Scenario {
    assert_eq!(
        spec.legs.len(),
        turns.len() + 1,
        "one leg per junction plus the last"
    );
    let hw = 0.5 * spec.corridor_width;
    let mut rects = Vec::new();
    let mut lights = Vec::new();
    let mut u = [0.0, 1.0];
    let mut p = [0.0, 0.0];
    for (k, &len) in spec.legs.iter().enumerate() {
        let end = offset(p, u, len);
        // legs overlap the junction squares at both ends
        rects.push(Rect::spanning(p, end, hw));
        if let Some(&turn) = turns.get(k) {
            lights.push(Light {
                position: offset(p, u, 0.5 * len),
                on: turn == Turn::Left,
            });
            let wrong = turn.other().rotate(u);
            let stub = offset(end, wrong, spec.dead_end_length);
            rects.push(Rect::spanning(end, stub, hw));
            u = turn.rotate(u);
        }
        p = end;
    }
    let half_room = 0.5 * spec.room_size;
    let target = offset(p, u, half_room);
    rects.push(Rect::spanning(target, target, half_room));
    Scenario {
        name: name.to_string(),
        walls: outline(&rects),
        lights,
        start: Pose::new(0.0, 0.0, std::f64::consts::FRAC_PI_2),
        target,
    }
}

pub const TRAINING_PATTERNS: [&str; 4] = ["LRL", "RLR", "LLR", "RRL"];
pub const HELD_OUT_PATTERN: &str = "RLL";

pub fn pattern_maze(pattern: &str, spec: &MazeSpec) -> Scenario {
    let turns = Turn::parse_pattern(pattern).expect("pattern of L and R");
    build_maze(&pattern.to_ascii_lowercase(), &turns, spec)
}

pub fn training_suite() -> Vec<Scenario> {
    let spec = MazeSpec::default();
    TRAINING_PATTERNS
        .iter()
        .map(|p| pattern_maze(p, &spec))
        .collect()
}

pub fn held_out_maze() -> Scenario {
    let mut s = pattern_maze(HELD_OUT_PATTERN, &MazeSpec::default());
    s.name = format!("{}_held_out", s.name);
    s
}
