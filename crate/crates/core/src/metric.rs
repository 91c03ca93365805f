//! Finite metric spaces, discrete probability measures and the set
//! primitives (balls, spheres, diameters) the partition builder needs.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for every mass comparison in the crate.
pub const MASS_TOL: f64 = 1e-12;

/// Input weights may drift this far from 1 before we refuse to renormalize.
const INPUT_SUM_TOL: f64 = 1e-9;

/// A labeled point set together with a validated distance matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace", into = "RawSpace")]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    dist: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct RawSpace {
    labels: Vec<String>,
    dist: Vec<Vec<f64>>,
}

impl TryFrom<RawSpace> for FiniteMetricSpace {
    type Error = Error;

    fn try_from(raw: RawSpace) -> Result<Self> {
        FiniteMetricSpace::new(raw.labels, raw.dist)
    }
}

impl From<FiniteMetricSpace> for RawSpace {
    fn from(space: FiniteMetricSpace) -> Self {
        RawSpace {
            labels: space.labels,
            dist: space.dist,
        }
    }
}

impl FiniteMetricSpace {
    /// Validates symmetry, the zero diagonal, positivity off the diagonal and
    /// the triangle inequality (O(n^3)).
    pub fn new(labels: Vec<String>, dist: Vec<Vec<f64>>) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidMetric("empty space".into()));
        }
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidMetric(format!(
                "distance matrix must be {n}x{n}"
            )));
        }
        let scale = dist
            .iter()
            .flatten()
            .fold(1.0_f64, |acc, &d| acc.max(d.abs()));
        let tol = MASS_TOL * scale;
        for i in 0..n {
            for j in 0..n {
                let d = dist[i][j];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::InvalidMetric(format!(
                        "dist[{i}][{j}] = {d} is not a finite non-negative number"
                    )));
                }
                if (d - dist[j][i]).abs() > tol {
                    return Err(Error::InvalidMetric(format!(
                        "asymmetric: dist[{i}][{j}] = {d} but dist[{j}][{i}] = {}",
                        dist[j][i]
                    )));
                }
                if i == j && d != 0.0 {
                    return Err(Error::InvalidMetric(format!(
                        "non-zero diagonal at {i}: {d}"
                    )));
                }
                if i != j && d == 0.0 {
                    return Err(Error::InvalidMetric(format!(
                        "distinct points {i} and {j} at distance 0"
                    )));
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if dist[i][k] > dist[i][j] + dist[j][k] + tol {
                        return Err(Error::InvalidMetric(format!(
                            "triangle inequality fails: d({i},{k}) = {} > d({i},{j}) + d({j},{k}) = {}",
                            dist[i][k],
                            dist[i][j] + dist[j][k]
                        )));
                    }
                }
            }
        }
        Ok(FiniteMetricSpace { labels, dist })
    }

    /// Space with points `0..n` labeled by index and the given distance function.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let labels = (0..n).map(|i| format!("p{i}")).collect();
        let dist = (0..n).map(|i| (0..n).map(|j| f(i, j)).collect()).collect();
        Self::new(labels, dist)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i][j]
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.dist
    }

    pub fn check_point(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::InvalidPoint {
                index: i,
                len: self.len(),
            })
        }
    }

    pub fn all_points(&self) -> PointSet {
        PointSet::from_iter(0..self.len())
    }

    /// Diameter of the whole space.
    pub fn diameter(&self) -> f64 {
        diameter(self, &self.all_points())
    }
}

/// A set of point indices. Kept sorted so serialization is canonical.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointSet(BTreeSet<usize>);

impl PointSet {
    pub fn new() -> Self {
        PointSet(BTreeSet::new())
    }

    pub fn singleton(i: usize) -> Self {
        PointSet(BTreeSet::from([i]))
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.contains(&i)
    }

    pub fn insert(&mut self, i: usize) -> bool {
        self.0.insert(i)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn is_subset(&self, other: &PointSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_disjoint(&self, other: &PointSet) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn intersection(&self, other: &PointSet) -> PointSet {
        PointSet(self.0.intersection(&other.0).copied().collect())
    }

    pub fn union(&self, other: &PointSet) -> PointSet {
        PointSet(self.0.union(&other.0).copied().collect())
    }

    pub fn difference(&self, other: &PointSet) -> PointSet {
        PointSet(self.0.difference(&other.0).copied().collect())
    }
}

impl FromIterator<usize> for PointSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        PointSet(iter.into_iter().collect())
    }
}

/// Probability weights indexed by the points of a finite space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiscreteMeasure {
    w: Vec<f64>,
}

impl TryFrom<Vec<f64>> for DiscreteMeasure {
    type Error = Error;

    /// Stored weights are taken verbatim so that files round-trip bit for bit.
    fn try_from(w: Vec<f64>) -> Result<Self> {
        let total = DiscreteMeasure::validate(&w)?;
        if (total - 1.0).abs() > INPUT_SUM_TOL {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(DiscreteMeasure { w })
    }
}

impl From<DiscreteMeasure> for Vec<f64> {
    fn from(m: DiscreteMeasure) -> Self {
        m.w
    }
}

impl DiscreteMeasure {
    /// Accepts weights summing to one (up to 1e-9) and renormalizes them.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        let total = Self::validate(&w)?;
        if (total - 1.0).abs() > INPUT_SUM_TOL {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self::normalized(w, total))
    }

    /// Accepts any non-negative weights with positive total.
    pub fn from_unnormalized(w: Vec<f64>) -> Result<Self> {
        let total = Self::validate(&w)?;
        if total <= 0.0 {
            return Err(Error::InvalidMeasure("total mass is zero".into()));
        }
        Ok(Self::normalized(w, total))
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        let mut w = vec![0.0; n];
        w[at] = 1.0;
        DiscreteMeasure { w }
    }

    pub fn uniform(n: usize) -> Self {
        DiscreteMeasure {
            w: vec![1.0 / n as f64; n],
        }
    }

    /// `(1 - t) * self + t * other`.
    pub fn mix(&self, other: &DiscreteMeasure, t: f64) -> Result<Self> {
        same_space(self, other)?;
        let w = self
            .w
            .iter()
            .zip(&other.w)
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        Self::from_unnormalized(w)
    }

    fn validate(w: &[f64]) -> Result<f64> {
        if w.is_empty() {
            return Err(Error::InvalidMeasure("no weights".into()));
        }
        if let Some((i, x)) = w
            .iter()
            .enumerate()
            .find(|(_, x)| !x.is_finite() || **x < 0.0)
        {
            return Err(Error::InvalidMeasure(format!("weight {i} is {x}")));
        }
        Ok(w.iter().sum())
    }

    fn normalized(mut w: Vec<f64>, total: f64) -> Self {
        if total != 1.0 {
            for x in &mut w {
                *x /= total;
            }
        }
        DiscreteMeasure { w }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.w[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn mass(&self, set: &PointSet) -> f64 {
        set.iter().fold(0.0, |acc, i| acc + self.w[i])
    }

    pub fn mass_where(&self, mut pred: impl FnMut(usize) -> bool) -> f64 {
        (0..self.w.len())
            .filter(|&i| pred(i))
            .fold(0.0, |acc, i| acc + self.w[i])
    }

    pub fn support(&self) -> PointSet {
        (0..self.w.len()).filter(|&i| self.w[i] > 0.0).collect()
    }

    pub fn check_space(&self, space: &FiniteMetricSpace) -> Result<()> {
        if self.len() == space.len() {
            Ok(())
        } else {
            Err(Error::SpaceMismatch {
                left: self.len(),
                right: space.len(),
            })
        }
    }
}

fn same_space(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    if mu.len() == nu.len() {
        Ok(())
    } else {
        Err(Error::SpaceMismatch {
            left: mu.len(),
            right: nu.len(),
        })
    }
}

/// Open ball `{ x : d(center, x) < r }`.
pub fn ball(space: &FiniteMetricSpace, center: usize, r: f64) -> Result<PointSet> {
    space.check_point(center)?;
    if !(r >= 0.0) {
        return Err(Error::Domain(format!("radius {r} must be non-negative")));
    }
    Ok((0..space.len())
        .filter(|&x| space.dist(center, x) < r)
        .collect())
}

/// Mass of the sphere `{ x : d(center, x) = r }`, which contains the boundary
/// of the open ball of radius `r` in a finite space.
pub fn boundary_mass(
    space: &FiniteMetricSpace,
    center: usize,
    r: f64,
    mu: &DiscreteMeasure,
) -> Result<f64> {
    space.check_point(center)?;
    mu.check_space(space)?;
    Ok(mu.mass_where(|x| space.dist(center, x) == r))
}

pub fn diameter(space: &FiniteMetricSpace, cell: &PointSet) -> f64 {
    let pts: Vec<usize> = cell.iter().collect();
    let mut best = 0.0_f64;
    for (a, &i) in pts.iter().enumerate() {
        for &j in &pts[a + 1..] {
            best = best.max(space.dist(i, j));
        }
    }
    best
}

pub fn total_variation(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    same_space(mu, nu)?;
    let l1: f64 = mu.w.iter().zip(&nu.w).map(|(a, b)| (a - b).abs()).sum();
    Ok(0.5 * l1)
}

/// `A -> mu(A ∩ cell) / mu(cell)`.
pub fn conditional(mu: &DiscreteMeasure, cell: &PointSet) -> Result<DiscreteMeasure> {
    if let Some(bad) = cell.iter().find(|&i| i >= mu.len()) {
        return Err(Error::InvalidPoint {
            index: bad,
            len: mu.len(),
        });
    }
    let mass = mu.mass(cell);
    if mass <= 0.0 {
        return Err(Error::NullConditioning { mass });
    }
    let w = (0..mu.len())
        .map(|i| {
            if cell.contains(i) {
                mu.w[i] / mass
            } else {
                0.0
            }
        })
        .collect();
    Ok(DiscreteMeasure { w })
}
