//! Simplex convex-hull arithmetic in R^N, N in {1, 2, 3}.
//!
//! A sensor deployment is exactly N+1 points spanning a non-degenerate
//! simplex. This module owns barycentric coordinates with respect to that
//! simplex, open-hull membership, uniform interior sampling, and the
//! perpendicular-bisector predicates used by the uniqueness arguments.
//!
//! All values are immutable after construction and safe to share across
//! worker threads; sampling takes an explicit [`RandomStream`].

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::rng::{self, RandomStream};

/// Maximum supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// Relative determinant threshold below which a sensor set is rejected as
/// lying on an (N-1)-dimensional hyperplane.
pub const DEGENERACY_REL_TOL: f64 = 1e-9;

/// Barycentric weights must sum to 1 within this absolute tolerance.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Open-hull membership margin as a fraction of the hull diameter: a point
/// is inside iff every barycentric weight exceeds `1e-9 * diameter`. A strict
/// `> 0` test is fragile in floating point; this is the robust proxy for
/// openness.
pub const HULL_MARGIN_REL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("coordinate vector length {0} outside supported range 1..=3")]
    BadDimension(usize),
    #[error("non-finite coordinate")]
    NonFiniteCoordinate,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("expected {expected} sensors for dimension {dim}, got {got}")]
    WrongSensorCount {
        expected: usize,
        got: usize,
        dim: usize,
    },
    #[error("sensors lie on an (N-1)-dimensional hyperplane (|det| {det:.3e} below tolerance)")]
    DegenerateArray { det: f64 },
    #[error("barycentric weights must sum to 1 (got {0})")]
    BadWeightSum(f64),
    #[error("weight vector length {got} does not match sensor count {expected}")]
    WrongWeightCount { expected: usize, got: usize },
    #[error("points must be distinct")]
    CoincidentPoints,
}

/// A location in R^N, N in {1, 2, 3}. Coordinates are finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    coords: [f64; MAX_DIM],
    dim: usize,
}

impl Point {
    pub fn new(coords: &[f64]) -> Result<Self, GeometryError> {
        let dim = coords.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(GeometryError::BadDimension(dim));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFiniteCoordinate);
        }
        let mut buf = [0.0; MAX_DIM];
        buf[..dim].copy_from_slice(coords);
        Ok(Self { coords: buf, dim })
    }

    /// 1-D convenience constructor.
    pub fn scalar(x: f64) -> Result<Self, GeometryError> {
        Self::new(&[x])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim]
    }

    pub fn distance(&self, other: &Point) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            let d = self.coords[i] - other.coords[i];
            acc += d * d;
        }
        acc.sqrt()
    }

    pub fn dot(&self, other: &Point) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            acc += self.coords[i] * other.coords[i];
        }
        acc
    }

    pub fn sub(&self, other: &Point) -> Point {
        let mut coords = [0.0; MAX_DIM];
        for i in 0..self.dim {
            coords[i] = self.coords[i] - other.coords[i];
        }
        Point {
            coords,
            dim: self.dim,
        }
    }

    /// self + scale * dir.
    pub fn add_scaled(&self, dir: &[f64], scale: f64) -> Point {
        let mut coords = [0.0; MAX_DIM];
        for i in 0..self.dim {
            coords[i] = self.coords[i] + scale * dir[i];
        }
        Point {
            coords,
            dim: self.dim,
        }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl Serialize for Point {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.coords().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let coords = Vec::<f64>::deserialize(deserializer)?;
        Point::new(&coords).map_err(D::Error::custom)
    }
}

/// The N+1 sensor positions spanning a non-degenerate simplex in R^N.
///
/// Construction enforces the full-rank requirement on the edge vectors
/// `x_i - x_{N+1}`: the edge-matrix determinant must exceed
/// [`DEGENERACY_REL_TOL`] relative to `scale^N`, where `scale` is the largest
/// pairwise sensor distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensorArray {
    sensors: Vec<Point>,
    dim: usize,
    #[serde(skip)]
    diameter: f64,
}

impl SensorArray {
    pub fn new(sensors: Vec<Point>) -> Result<Self, GeometryError> {
        let dim = sensors.first().map(Point::dim).unwrap_or(0);
        if dim == 0 || dim > MAX_DIM {
            return Err(GeometryError::BadDimension(dim));
        }
        if sensors.len() != dim + 1 {
            return Err(GeometryError::WrongSensorCount {
                expected: dim + 1,
                got: sensors.len(),
                dim,
            });
        }
        if let Some(p) = sensors.iter().find(|p| p.dim() != dim) {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                got: p.dim(),
            });
        }

        let diameter = max_pairwise_distance(&sensors);
        let det = edge_determinant(&sensors, dim);
        if diameter <= 0.0 || det.abs() <= DEGENERACY_REL_TOL * diameter.powi(dim as i32) {
            return Err(GeometryError::DegenerateArray { det });
        }

        Ok(Self {
            sensors,
            dim,
            diameter,
        })
    }

    /// Build from raw coordinate rows.
    pub fn from_coords(rows: &[Vec<f64>]) -> Result<Self, GeometryError> {
        let sensors = rows
            .iter()
            .map(|r| Point::new(r))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(sensors)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: always N+1 >= 2 sensors
    }

    pub fn sensors(&self) -> &[Point] {
        &self.sensors
    }

    pub fn sensor(&self, i: usize) -> &Point {
        &self.sensors[i]
    }

    /// Largest pairwise sensor distance.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Open-hull membership margin on barycentric weights.
    pub fn hull_margin(&self) -> f64 {
        HULL_MARGIN_REL * self.diameter
    }

    pub fn centroid(&self) -> Point {
        let mut coords = [0.0; MAX_DIM];
        for s in &self.sensors {
            for i in 0..self.dim {
                coords[i] += s.coords[i];
            }
        }
        let n = self.sensors.len() as f64;
        for c in coords.iter_mut() {
            *c /= n;
        }
        Point {
            coords,
            dim: self.dim,
        }
    }

    /// Point with the given barycentric weights: sum_i w_i x_i.
    pub fn weighted_point(&self, weights: &[f64]) -> Point {
        debug_assert_eq!(weights.len(), self.sensors.len());
        let mut coords = [0.0; MAX_DIM];
        for (w, s) in weights.iter().zip(&self.sensors) {
            for i in 0..self.dim {
                coords[i] += w * s.coords[i];
            }
        }
        Point {
            coords,
            dim: self.dim,
        }
    }
}

/// Barycentric weights of a point with respect to a [`SensorArray`].
/// The weights sum to 1; the point lies in the open hull iff all are
/// positive (within the array's hull margin).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Barycentric {
    weights: Vec<f64>,
}

impl Barycentric {
    pub fn new(weights: Vec<f64>) -> Result<Self, GeometryError> {
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(GeometryError::BadWeightSum(sum));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn max_pairwise_distance(points: &[Point]) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            best = best.max(points[i].distance(&points[j]));
        }
    }
    best
}

/// Determinant of the N x N matrix of edge vectors x_i - x_{N+1}.
fn edge_determinant(sensors: &[Point], dim: usize) -> f64 {
    let base = &sensors[dim];
    let mut m = [[0.0f64; MAX_DIM]; MAX_DIM];
    for (col, s) in sensors[..dim].iter().enumerate() {
        let e = s.sub(base);
        for row in 0..dim {
            m[row][col] = e.coords[row];
        }
    }
    match dim {
        1 => m[0][0],
        2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
        3 => {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        }
        _ => unreachable!("dimension validated at construction"),
    }
}

/// Solve the N x N system `m * x = rhs` by Gaussian elimination with partial
/// pivoting. The edge matrix is full rank by the array invariant.
fn solve_linear(mut m: [[f64; MAX_DIM]; MAX_DIM], mut rhs: [f64; MAX_DIM], n: usize) -> [f64; MAX_DIM] {
    for k in 0..n {
        let mut pivot = k;
        for i in (k + 1)..n {
            if m[i][k].abs() > m[pivot][k].abs() {
                pivot = i;
            }
        }
        if pivot != k {
            m.swap(k, pivot);
            rhs.swap(k, pivot);
        }
        for i in (k + 1)..n {
            let f = m[i][k] / m[k][k];
            for j in k..n {
                m[i][j] -= f * m[k][j];
            }
            rhs[i] -= f * rhs[k];
        }
    }
    let mut x = [0.0; MAX_DIM];
    for i in (0..n).rev() {
        let mut acc = rhs[i];
        for j in (i + 1)..n {
            acc -= m[i][j] * x[j];
        }
        x[i] = acc / m[i][i];
    }
    x
}

/// Barycentric coordinates of `p` with respect to `array`.
///
/// Solves the N x N edge system with `x_{N+1}` as the base vertex; the last
/// weight is `1 - sum` of the others, so the weights sum to 1 exactly up to
/// rounding.
pub fn barycentric(array: &SensorArray, p: &Point) -> Result<Barycentric, GeometryError> {
    let n = array.dim();
    if p.dim() != n {
        return Err(GeometryError::DimensionMismatch {
            expected: n,
            got: p.dim(),
        });
    }
    let base = array.sensor(n);
    let mut m = [[0.0f64; MAX_DIM]; MAX_DIM];
    for (col, s) in array.sensors()[..n].iter().enumerate() {
        let e = s.sub(base);
        for row in 0..n {
            m[row][col] = e.coords[row];
        }
    }
    let d = p.sub(base);
    let mut rhs = [0.0; MAX_DIM];
    rhs[..n].copy_from_slice(&d.coords[..n]);

    let x = solve_linear(m, rhs, n);
    let mut weights = Vec::with_capacity(n + 1);
    let mut sum = 0.0;
    for xi in x.iter().take(n) {
        weights.push(*xi);
        sum += *xi;
    }
    weights.push(1.0 - sum);
    Barycentric::new(weights)
}

/// True iff `p` lies in the open convex hull of the sensors: every
/// barycentric weight exceeds the array's hull margin.
pub fn contains_open(array: &SensorArray, p: &Point) -> Result<bool, GeometryError> {
    Ok(barycentric(array, p)?.min_weight() > array.hull_margin())
}

/// Draw a point uniformly over barycentric weights (flat Dirichlet): N+1
/// unit exponentials, normalized. The returned point always satisfies
/// [`contains_open`]; draws landing inside the numeric hull margin are
/// rejected and redrawn.
pub fn sample_interior(array: &SensorArray, rng: &mut RandomStream) -> Point {
    loop {
        let mut weights = [0.0f64; MAX_DIM + 1];
        let n = array.len();
        let mut sum = 0.0;
        for w in weights.iter_mut().take(n) {
            *w = rng::exponential(rng);
            sum += *w;
        }
        for w in weights.iter_mut().take(n) {
            *w /= sum;
        }
        let p = array.weighted_point(&weights[..n]);
        if contains_open(array, &p).unwrap_or(false) {
            return p;
        }
    }
}

/// Signed margin of the closed half-space test `|eta - y| <= |eta - y*|`,
/// quadratic-distance form. Nonnegative iff `eta` is weakly closer to `y`.
pub fn halfspace_margin_quadratic(y: &Point, y_star: &Point, eta: &Point) -> f64 {
    let dy = eta.distance(y);
    let ds = eta.distance(y_star);
    ds * ds - dy * dy
}

/// Same margin in the linear half-space form
/// `2 eta^T (y - y*) - y^T y + y*^T y*`. Algebraically identical to the
/// quadratic form; exposed separately so tests can check the two routes
/// against each other.
pub fn halfspace_margin_linear(y: &Point, y_star: &Point, eta: &Point) -> f64 {
    let diff = y.sub(y_star);
    2.0 * eta.dot(&diff) - y.dot(y) + y_star.dot(y_star)
}

/// True iff `eta` is weakly closer to `y` than to `y_star`
/// (`|eta - y| <= |eta - y*|`, the half-space of the perpendicular
/// bisector, boundary included).
pub fn halfspace_closer(y: &Point, y_star: &Point, eta: &Point) -> Result<bool, GeometryError> {
    if y == y_star {
        return Err(GeometryError::CoincidentPoints);
    }
    Ok(halfspace_margin_quadratic(y, y_star, eta) >= 0.0)
}

/// Strict variant of [`halfspace_closer`]: boundary excluded.
pub fn halfspace_closer_strict(
    y: &Point,
    y_star: &Point,
    eta: &Point,
) -> Result<bool, GeometryError> {
    if y == y_star {
        return Err(GeometryError::CoincidentPoints);
    }
    Ok(halfspace_margin_quadratic(y, y_star, eta) > 0.0)
}

/// True iff the perpendicular bisector of `(y, y_star)` strictly separates a
/// sensor pair: at least one sensor strictly closer to `y` and at least one
/// strictly closer to `y_star`. Guaranteed to hold whenever both points lie
/// in the hull and differ; exposed as a predicate so property tests can
/// sweep random configurations.
pub fn closer_pair_exists(
    array: &SensorArray,
    y: &Point,
    y_star: &Point,
) -> Result<bool, GeometryError> {
    if y == y_star {
        return Err(GeometryError::CoincidentPoints);
    }
    let mut closer_to_y = false;
    let mut closer_to_star = false;
    for s in array.sensors() {
        let dy = s.distance(y);
        let ds = s.distance(y_star);
        if dy < ds {
            closer_to_y = true;
        } else if ds < dy {
            closer_to_star = true;
        }
    }
    Ok(closer_to_y && closer_to_star)
}

/// Random non-degenerate sensor array with vertices uniform in
/// `[0, scale]^N`. Used by the uniqueness sweeps; degenerate draws are
/// rejected and redrawn.
pub fn random_array(dim: usize, scale: f64, rng: &mut RandomStream) -> Result<SensorArray, GeometryError> {
    if dim == 0 || dim > MAX_DIM {
        return Err(GeometryError::BadDimension(dim));
    }
    loop {
        let sensors = (0..=dim)
            .map(|_| {
                let coords: Vec<f64> = (0..dim).map(|_| scale * rng::uniform(rng)).collect();
                Point::new(&coords).expect("finite coords")
            })
            .collect::<Vec<_>>();
        if let Ok(array) = SensorArray::new(sensors) {
            return Ok(array);
        }
    }
}
