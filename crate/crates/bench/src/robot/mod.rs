//! A small differential-drive robot in a walled arena.
//!
//! Units are millimetres, seconds and radians. The robot is a disc with
//! eight proximity sensors on its rim and one ambient-light reading taken
//! at its centre.

mod apriori;
mod episode;
pub mod maze;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use apriori::load_apriori_table;
pub use episode::{
    dims, fitness_episode, fitness_term, robot_fitness, write_episode_csv, EpisodeLog,
    EpisodeOutcome, LogRow, RobotConfig,
};

pub const ROBOT_RADIUS: f64 = 27.5;
pub const WHEEL_BASE: f64 = 53.0;
pub const MAX_WHEEL_SPEED: f64 = 80.0;
pub const TIME_STEP: f64 = 0.1;
pub const PROXIMITY_RANGE: f64 = 50.0;
pub const LIGHT_RANGE: f64 = 300.0;

/// Sensor bearings relative to the heading, in degrees: left pair, front
/// pair, right pair, back pair.
pub const SENSOR_ANGLES_DEG: [f64; 8] = [85.0, 45.0, 10.0, -10.0, -45.0, -85.0, -170.0, 170.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Wraps into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl Segment {
    pub fn new(a: [f64; 2], b: [f64; 2]) -> Self {
        Segment { a, b }
    }

    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        let (dx, dy) = (self.b[0] - self.a[0], self.b[1] - self.a[1]);
        let len_sq = dx * dx + dy * dy;
        let s = if len_sq > 0.0 {
            (((p[0] - self.a[0]) * dx + (p[1] - self.a[1]) * dy) / len_sq).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (cx, cy) = (self.a[0] + s * dx - p[0], self.a[1] + s * dy - p[1]);
        (cx * cx + cy * cy).sqrt()
    }

    /// Distance along the unit ray `origin + t dir` to this segment.
    pub fn ray_hit(&self, origin: [f64; 2], dir: [f64; 2]) -> Option<f64> {
        let e = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let denom = dir[0] * e[1] - dir[1] * e[0];
        if denom.abs() < 1e-12 {
            return None;
        }
        let w = [self.a[0] - origin[0], self.a[1] - origin[1]];
        let t = (w[0] * e[1] - w[1] * e[0]) / denom;
        let s = (w[0] * dir[1] - w[1] * dir[0]) / denom;
        (t >= 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s)).then_some(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Light {
    pub position: [f64; 2],
    pub on: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub walls: Vec<Segment>,
    pub lights: Vec<Light>,
    pub start: Pose,
    pub target: [f64; 2],
}

impl Scenario {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn clearance(&self, p: [f64; 2]) -> f64 {
        self.walls
            .iter()
            .map(|w| w.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn collides(&self, p: [f64; 2]) -> bool {
        self.walls.iter().any(|w| w.distance_to(p) < ROBOT_RADIUS)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SensorReading {
    pub proximity: [f64; 8],
    pub light: f64,
}

impl SensorReading {
    pub fn max_proximity(&self) -> f64 {
        self.proximity.iter().copied().fold(0.0, f64::max)
    }
}

pub fn sense(scenario: &Scenario, pose: &Pose) -> SensorReading {
    let mut proximity = [0.0; 8];
    for (p, deg) in proximity.iter_mut().zip(SENSOR_ANGLES_DEG) {
        let a = pose.theta + deg.to_radians();
        let dir = [a.cos(), a.sin()];
        let origin = [
            pose.x + ROBOT_RADIUS * dir[0],
            pose.y + ROBOT_RADIUS * dir[1],
        ];
        let d = scenario
            .walls
            .iter()
            .filter_map(|w| w.ray_hit(origin, dir))
            .fold(f64::INFINITY, f64::min);
        *p = (1.0 - d / PROXIMITY_RANGE).clamp(0.0, 1.0);
    }
    let light = scenario
        .lights
        .iter()
        .filter(|l| l.on)
        .map(|l| {
            let d = ((l.position[0] - pose.x).powi(2) + (l.position[1] - pose.y).powi(2)).sqrt();
            1.0 - d / LIGHT_RANGE
        })
        .fold(0.0, f64::max)
        .clamp(0.0, 1.0);
    SensorReading { proximity, light }
}

/// `(left, front, right, back, light)`, each pair averaged.
pub fn controller_inputs(reading: &SensorReading) -> [f64; 5] {
    let p = &reading.proximity;
    [
        0.5 * (p[0] + p[1]),
        0.5 * (p[2] + p[3]),
        0.5 * (p[4] + p[5]),
        0.5 * (p[6] + p[7]),
        reading.light,
    ]
}

/// Exact arc integration over one time step. On collision the pose is
/// returned unchanged with `true`.
pub fn step_robot(scenario: &Scenario, pose: &Pose, motors: (f64, f64)) -> (Pose, bool) {
    let (ml, mr) = (motors.0.clamp(0.0, 1.0), motors.1.clamp(0.0, 1.0));
    let v = MAX_WHEEL_SPEED * 0.5 * (ml + mr);
    let omega = MAX_WHEEL_SPEED * (mr - ml) / WHEEL_BASE;
    let dtheta = omega * TIME_STEP;
    let (x, y) = if dtheta.abs() < 1e-12 {
        (
            pose.x + v * TIME_STEP * pose.theta.cos(),
            pose.y + v * TIME_STEP * pose.theta.sin(),
        )
    } else {
        let r = v / omega;
        (
            pose.x + r * ((pose.theta + dtheta).sin() - pose.theta.sin()),
            pose.y - r * ((pose.theta + dtheta).cos() - pose.theta.cos()),
        )
    };
    if scenario.collides([x, y]) {
        return (*pose, true);
    }
    (Pose::new(x, y, pose.theta + dtheta), false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open() -> Scenario {
        Scenario {
            name: "open".into(),
            walls: vec![],
            lights: vec![],
            start: Pose::new(0.0, 0.0, 0.0),
            target: [1000.0, 0.0],
        }
    }

    #[test]
    fn angles_wrap_into_half_open_interval() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn segment_queries() {
        let s = Segment::new([0.0, -1.0], [0.0, 1.0]);
        assert_eq!(s.distance_to([3.0, 0.0]), 3.0);
        assert_eq!(s.distance_to([0.0, 5.0]), 4.0);
        assert_eq!(s.ray_hit([-2.0, 0.0], [1.0, 0.0]), Some(2.0));
        assert_eq!(s.ray_hit([-2.0, 0.0], [-1.0, 0.0]), None);
        assert_eq!(s.ray_hit([-2.0, 3.0], [1.0, 0.0]), None);
    }

    #[test]
    fn nothing_to_sense_in_the_open() {
        let r = sense(&open(), &Pose::new(0.0, 0.0, 0.3));
        assert_eq!(r, SensorReading::default());
        assert_eq!(controller_inputs(&r), [0.0; 5]);
    }

    #[test]
    fn straight_and_pivot_steps() {
        let (p, hit) = step_robot(&open(), &Pose::new(0.0, 0.0, 0.0), (1.0, 1.0));
        assert!(!hit);
        assert!((p.x - 8.0).abs() < 1e-12 && p.y.abs() < 1e-12);
        let (p, _) = step_robot(&open(), &Pose::new(0.0, 0.0, 0.0), (1.0, 0.0));
        assert!((p.theta + MAX_WHEEL_SPEED * TIME_STEP / WHEEL_BASE).abs() < 1e-12);
        // clockwise arc about the right wheel, which sits at (0, -26.5)
        let rw = WHEEL_BASE / 2.0;
        assert!(((p.x).powi(2) + (p.y + rw).powi(2)).sqrt() - rw < 1e-9);
    }

    #[test]
    fn light_falls_off_linearly() {
        let mut s = open();
        s.lights.push(Light {
            position: [150.0, 0.0],
            on: true,
        });
        s.lights.push(Light {
            position: [0.0, 10.0],
            on: false,
        });
        assert!((sense(&s, &Pose::new(0.0, 0.0, 0.0)).light - 0.5).abs() < 1e-12);
        assert_eq!(sense(&s, &Pose::new(-200.0, 0.0, 0.0)).light, 0.0);
    }
}
