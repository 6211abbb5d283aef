//! Finite compact subsets of the complex plane, the Hausdorff metric on
//! them, and the square lattices that sublevel selections are cut from.
//!
//! Everything a tower emits is a finite subset of a grid, so compact sets
//! are represented as deduplicated point clouds. The Hausdorff distance is
//! undefined on the empty set; threshold operations therefore return an
//! explicit [`Sublevel::Empty`] outcome instead of an empty set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Points closer than this are considered the same grid point.
pub const DEDUP_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum HyperspaceError {
    /// The Hausdorff distance is not defined when either side has no points.
    #[error("Hausdorff distance undefined: {0} set is empty")]
    EmptySet(&'static str),
    /// Point components must be finite.
    #[error("non-finite component in complex point ({0}, {1})")]
    NonFinite(f64, f64),
}

/// A point of the complex plane with finite components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoint {
    pub re: f64,
    pub im: f64,
}

impl ComplexPoint {
    pub fn new(re: f64, im: f64) -> Result<Self, HyperspaceError> {
        if re.is_finite() && im.is_finite() {
            Ok(ComplexPoint { re, im })
        } else {
            Err(HyperspaceError::NonFinite(re, im))
        }
    }

    /// Euclidean distance to another point.
    pub fn dist(&self, other: &ComplexPoint) -> f64 {
        (self.re - other.re).hypot(self.im - other.im)
    }

    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }
}

impl From<ComplexPoint> for num_complex::Complex64 {
    fn from(p: ComplexPoint) -> Self {
        num_complex::Complex64::new(p.re, p.im)
    }
}

/// Which grid a thresholded set was cut from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOrigin {
    pub resolution: u32,
    pub half_width: f64,
}

/// A finite point cloud standing for a compact subset of the plane.
///
/// Construction deduplicates points within [`DEDUP_TOL`], keeping first
/// occurrences in order, so equality of the underlying sets can be tested
/// with [`CompactSet::set_eq`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompactSet {
    points: Vec<ComplexPoint>,
    origin: Option<GridOrigin>,
}

impl CompactSet {
    pub fn from_points(points: Vec<ComplexPoint>) -> Self {
        Self::with_origin(points, None)
    }

    pub fn with_origin(points: Vec<ComplexPoint>, origin: Option<GridOrigin>) -> Self {
        let mut kept: Vec<ComplexPoint> = Vec::with_capacity(points.len());
        for p in points {
            if !kept.iter().any(|q| q.dist(&p) <= DEDUP_TOL) {
                kept.push(p);
            }
        }
        CompactSet { points: kept, origin }
    }

    pub fn points(&self) -> &[ComplexPoint] {
        &self.points
    }

    pub fn origin(&self) -> Option<GridOrigin> {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Set equality up to [`DEDUP_TOL`], ignoring point order.
    pub fn set_eq(&self, other: &CompactSet) -> bool {
        let covers = |a: &CompactSet, b: &CompactSet| {
            a.points
                .iter()
                .all(|p| b.points.iter().any(|q| p.dist(q) <= DEDUP_TOL))
        };
        covers(self, other) && covers(other, self)
    }

    /// CSV rows `re,im`, one point per line, with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("re,im\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.re, p.im));
        }
        out
    }

    /// JSON array of `[re, im]` pairs.
    pub fn to_json(&self) -> String {
        let pairs: Vec<[f64; 2]> = self.points.iter().map(|p| [p.re, p.im]).collect();
        serde_json::to_string(&pairs).expect("finite floats serialize")
    }
}

/// The directed distance sup_{a in A} inf_{b in B} |a - b|.
fn directed(a: &CompactSet, b: &CompactSet) -> f64 {
    a.points
        .iter()
        .map(|p| {
            b.points
                .iter()
                .map(|q| p.dist(q))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Hausdorff distance: the max of the two directed sup-inf distances.
///
/// Errors with [`HyperspaceError::EmptySet`] if either cloud is empty.
pub fn hausdorff_distance(a: &CompactSet, b: &CompactSet) -> Result<f64, HyperspaceError> {
    if a.is_empty() {
        return Err(HyperspaceError::EmptySet("left"));
    }
    if b.is_empty() {
        return Err(HyperspaceError::EmptySet("right"));
    }
    Ok(directed(a, b).max(directed(b, a)))
}

/// Square lattice of spacing `1/n` clipped to the closed box `|re|,|im| <= R`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub resolution: u32,
    pub half_width: f64,
    pub spacing: f64,
    points: Vec<ComplexPoint>,
}

impl Grid {
    pub fn points(&self) -> &[ComplexPoint] {
        &self.points
    }

    pub fn origin_descriptor(&self) -> GridOrigin {
        GridOrigin {
            resolution: self.resolution,
            half_width: self.half_width,
        }
    }
}

/// Largest integer a with a/n <= r under correctly rounded division.
fn max_index(n: u32, r: f64) -> i64 {
    let nf = n as f64;
    let mut a = (r * nf).floor() as i64;
    while ((a + 1) as f64) / nf <= r {
        a += 1;
    }
    while a > 0 && (a as f64) / nf > r {
        a -= 1;
    }
    a
}

/// The lattice { (a/n, b/n) : |a/n| <= R, |b/n| <= R }.
///
/// Coordinates are computed as single divisions `a/n`, so grids are nested
/// exactly for divisible resolutions: if n divides m then every point of
/// `make_grid(n, R)` is bit-identical to a point of `make_grid(m, R)`.
///
/// Panics if `n == 0` or `R <= 0`; the arguments are configuration, not data.
pub fn make_grid(n: u32, half_width: f64) -> Grid {
    assert!(n >= 1, "grid resolution must be positive");
    assert!(
        half_width > 0.0 && half_width.is_finite(),
        "grid half-width must be positive and finite"
    );
    let amax = max_index(n, half_width);
    let nf = n as f64;
    let mut points = Vec::with_capacity(((2 * amax + 1) * (2 * amax + 1)) as usize);
    for a in -amax..=amax {
        for b in -amax..=amax {
            points.push(ComplexPoint {
                re: (a as f64) / nf,
                im: (b as f64) / nf,
            });
        }
    }
    Grid {
        resolution: n,
        half_width,
        spacing: 1.0 / nf,
        points,
    }
}

/// Outcome of a strict sublevel selection: possibly no grid point passes.
#[derive(Debug, Clone, PartialEq)]
pub enum Sublevel {
    Set(CompactSet),
    Empty,
}

impl Sublevel {
    pub fn as_set(&self) -> Option<&CompactSet> {
        match self {
            Sublevel::Set(s) => Some(s),
            Sublevel::Empty => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Sublevel::Empty)
    }

    /// Number of selected points (0 for `Empty`).
    pub fn len(&self) -> usize {
        self.as_set().map_or(0, CompactSet::len)
    }
}

/// Grid points whose field value is strictly below `tau`.
///
/// `values` must list one field value per grid point, in grid order; a
/// length mismatch is a programming error and panics. An empty selection
/// is a legitimate outcome, reported as [`Sublevel::Empty`].
pub fn threshold_sublevel(grid: &Grid, values: &[f64], tau: f64) -> Sublevel {
    assert_eq!(
        values.len(),
        grid.points.len(),
        "field must be total on the grid"
    );
    let selected: Vec<ComplexPoint> = grid
        .points
        .iter()
        .zip(values)
        .filter(|(_, &v)| v < tau)
        .map(|(p, _)| *p)
        .collect();
    if selected.is_empty() {
        Sublevel::Empty
    } else {
        Sublevel::Set(CompactSet::with_origin(
            selected,
            Some(grid.origin_descriptor()),
        ))
    }
}
