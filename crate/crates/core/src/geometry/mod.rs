//! Delaunay geometry over rule sites.
//!
//! The input domain of a fuzzy system is an axis-aligned box. Rule sites are
//! triangulated together with the vertices of a large enclosing simplex so
//! that every point of the box falls into some Delaunay simplex. Membership
//! of a query in a rule is the barycentric weight of the rule's site in the
//! simplex containing the query.

mod bounding;
mod delaunay;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bounding::regular_bounding_simplex;
pub use delaunay::{Simplex, SimplexId, Triangulation};

/// Largest supported dimension.
pub const MAX_DIM: usize = 8;

/// Tolerance on barycentric weights used for containment tests.
pub const CONTAINMENT_TOL: f64 = 1e-9;

/// Relative tolerance of the in-sphere predicate.
pub const INSPHERE_TOL: f64 = 1e-10;

/// Two sites closer than this fraction of the box width are duplicates.
pub const SPACING_FRACTION: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported dimension {0} (must be 1..={MAX_DIM})")]
    UnsupportedDimension(usize),
    #[error("at least one site is required")]
    NoSites,
    #[error("site {index} has a non-finite coordinate")]
    NonFinite { index: usize },
    #[error("site {index} lies outside the domain box")]
    OutsideDomain { index: usize },
    #[error("sites {first} and {second} are closer than the spacing tolerance")]
    DuplicateSite { first: usize, second: usize },
    #[error("query point has a non-finite coordinate")]
    NonFiniteQuery,
    #[error("query point lies outside the bounding simplex")]
    OutsideBoundingSimplex,
    #[error("invalid simplex id {0}")]
    InvalidSimplex(usize),
    #[error("invalid site index {0}")]
    InvalidSite(usize),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
}

/// Axis-aligned box `[lower, upper]` in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        let domain = Domain { lower, upper };
        domain.validate()?;
        Ok(domain)
    }

    /// The unit cube `[0, 1]^d`.
    pub fn unit(dim: usize) -> Self {
        Domain {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.lower.len() != self.upper.len() {
            return Err(GeometryError::InvalidDomain(format!(
                "lower has {} components, upper has {}",
                self.lower.len(),
                self.upper.len()
            )));
        }
        let dim = self.lower.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(GeometryError::UnsupportedDimension(dim));
        }
        for (j, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(GeometryError::InvalidDomain(format!(
                    "axis {j} has bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Largest side length.
    pub fn width(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max)
    }

    pub fn side(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect()
    }

    /// Radius of the ball circumscribing the box.
    pub fn circumradius(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| 0.25 * (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    pub fn clamp(&self, p: &[f64]) -> Vec<f64> {
        let mut out = p.to_vec();
        self.clamp_in_place(&mut out);
        out
    }

    pub fn clamp_in_place(&self, p: &mut [f64]) {
        for ((x, lo), hi) in p.iter_mut().zip(&self.lower).zip(&self.upper) {
            *x = x.clamp(*lo, *hi);
        }
    }

    /// Minimum distance between two sites below which they are duplicates.
    pub fn spacing_tolerance(&self) -> f64 {
        SPACING_FRACTION * self.width()
    }

    /// Whether two points are closer than the duplicate-site tolerance.
    pub fn too_close(&self, a: &[f64], b: &[f64]) -> bool {
        let tol = self.spacing_tolerance();
        squared_distance(a, b) < tol * tol
    }

    /// Sub-box made of a contiguous range of axes.
    pub fn slice(&self, axes: std::ops::Range<usize>) -> Domain {
        Domain {
            lower: self.lower[axes.clone()].to_vec(),
            upper: self.upper[axes].to_vec(),
        }
    }
}

/// Which support the membership function of a rule has.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MembershipMode {
    /// Barycentric weight over every simplex incident to the site.
    #[default]
    ApplicationArea,
    /// Barycentric weight only while the query lies in the site's Voronoi cell.
    VoronoiCell,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TriangulationConfig {
    /// Inradius of the bounding simplex over the circumradius of the box.
    pub bounding_scale: f64,
    pub membership: MembershipMode,
}

impl Default for TriangulationConfig {
    fn default() -> Self {
        TriangulationConfig {
            bounding_scale: 1e3,
            membership: MembershipMode::ApplicationArea,
        }
    }
}

/// Barycentric coordinates of a point with respect to one simplex, in the
/// simplex's vertex order.
#[derive(Debug, Clone, PartialEq)]
pub struct Barycentric {
    pub simplex: SimplexId,
    pub weights: Vec<f64>,
}

impl Barycentric {
    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
