//! Nested partitions of a finite metric space into P∞-continuity cells.
//!
//! Level `k` holds a remainder cell `C_{0,k}` and cells `C_{1,k}, …, C_{q(k),k}`
//! with
//!
//! * `diam(C_{j,k}) ≤ 2^{-k} Δ` for `j ≥ 1`,
//! * `P∞(C_{0,k}) ≤ 2^{-k} ε`,
//! * every `C_{j,k}` (j ≥ 1, k ≥ 2) inside a single cell of level `k − 1`,
//! * every cell built from open balls whose spheres carry no P∞ mass.
//!
//! Level `k + 1` is obtained by covering each level-`k` cell (the remainder
//! included) separately, so nesting holds by construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{
    ball, boundary_mass, diameter, DiscreteMeasure, FiniteMetricSpace, PointSet, MASS_TOL,
};

/// Center and radius of one covering ball, kept so the continuity of every
/// cell can be audited after the fact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: usize,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionLevel {
    pub k: usize,
    /// `cells[0]` is the remainder (possibly empty).
    pub cells: Vec<PointSet>,
    /// Parent cell at level `k − 1` for each cell index; `None` at level 1
    /// and for the remainder.
    pub parent_of: Vec<Option<usize>>,
    /// Ball that generated each non-remainder cell (`None` for index 0).
    pub balls: Vec<Option<BallSpec>>,
    /// Inverted index: point → cell index.
    pub cell_of: Vec<usize>,
}

impl PartitionLevel {
    /// q(k): number of non-remainder cells.
    pub fn q(&self) -> usize {
        self.cells.len() - 1
    }

    pub fn remainder(&self) -> &PointSet {
        &self.cells[0]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionTree {
    pub delta: f64,
    pub eps: f64,
    pub levels: Vec<PartitionLevel>,
    /// I(k) = { j : P∞(C_{j,k}) > 0 }, stored per level.
    pub i_of: Vec<Vec<usize>>,
}

impl PartitionTree {
    pub fn k_max(&self) -> usize {
        self.levels.len()
    }

    /// Level `k` (1-based).
    pub fn level(&self, k: usize) -> &PartitionLevel {
        &self.levels[k - 1]
    }

    pub fn cell(&self, k: usize, j: usize) -> &PointSet {
        &self.level(k).cells[j]
    }

    /// I(k), 1-based level.
    pub fn active(&self, k: usize) -> &[usize] {
        &self.i_of[k - 1]
    }

    /// Δ_k = 2^{-k} Δ.
    pub fn delta_at(&self, k: usize) -> f64 {
        level_scale(self.delta, k)
    }

    /// ε_k = 2^{-k} ε.
    pub fn eps_at(&self, k: usize) -> f64 {
        level_scale(self.eps, k)
    }

    /// Recomputes every structural invariant from the raw cell sets and
    /// returns a description of each violation found.
    pub fn violations(&self, space: &FiniteMetricSpace, p_inf: &DiscreteMeasure) -> Vec<String> {
        let mut out = Vec::new();
        let n = space.len();
        if p_inf.len() != n {
            out.push(format!("P∞ has {} weights for {n} points", p_inf.len()));
            return out;
        }
        if !(self.delta > 0.0) || !(self.eps > 0.0 && self.eps < 1.0) {
            out.push(format!(
                "bad parameters Δ = {}, ε = {}",
                self.delta, self.eps
            ));
        }
        if self.i_of.len() != self.levels.len() {
            out.push("I(k) table does not match the number of levels".into());
        }
        for (idx, level) in self.levels.iter().enumerate() {
            let k = idx + 1;
            if level.k != k {
                out.push(format!("level at position {k} is labeled {}", level.k));
            }
            if level.cells.is_empty() {
                out.push(format!("level {k} has no remainder slot"));
                continue;
            }
            if level.parent_of.len() != level.cells.len() || level.balls.len() != level.cells.len()
            {
                out.push(format!(
                    "level {k}: parent/ball tables have the wrong length"
                ));
                continue;
            }
            // partition property, checked point by point
            let mut seen = vec![0usize; n];
            for cell in &level.cells {
                for x in cell.iter() {
                    if x >= n {
                        out.push(format!("level {k}: point {x} out of range"));
                    } else {
                        seen[x] += 1;
                    }
                }
            }
            for (x, &count) in seen.iter().enumerate() {
                if count != 1 {
                    out.push(format!("level {k}: point {x} lies in {count} cells"));
                }
            }
            if level.cell_of.len() != n {
                out.push(format!("level {k}: inverted index has wrong length"));
            } else {
                for x in 0..n {
                    let j = level.cell_of[x];
                    if j >= level.cells.len() || !level.cells[j].contains(x) {
                        out.push(format!("level {k}: inverted index wrong for point {x}"));
                    }
                }
            }
            let bound = self.delta_at(k);
            for (j, cell) in level.cells.iter().enumerate().skip(1) {
                let d = diameter(space, cell);
                if d > bound {
                    out.push(format!("level {k}: diam(C_{j}) = {d} > {bound}"));
                }
                if cell.is_empty() {
                    out.push(format!("level {k}: cell {j} is empty"));
                }
                match &level.balls[j] {
                    Some(b) => {
                        let sphere = boundary_mass(space, b.center, b.radius, p_inf).unwrap_or(1.0);
                        if sphere > 0.0 {
                            out.push(format!(
                                "level {k}: ball of cell {j} has sphere mass {sphere}"
                            ));
                        }
                        if let Ok(full) = ball(space, b.center, b.radius) {
                            if !cell.is_subset(&full) {
                                out.push(format!("level {k}: cell {j} escapes its ball"));
                            }
                        }
                    }
                    None => out.push(format!("level {k}: cell {j} has no generating ball")),
                }
            }
            let rem = p_inf.mass(level.remainder());
            if rem > self.eps_at(k) + MASS_TOL {
                out.push(format!("level {k}: P∞(C_0) = {rem} > {}", self.eps_at(k)));
            }
            if k >= 2 {
                let prev = &self.levels[idx - 1];
                for (j, cell) in level.cells.iter().enumerate().skip(1) {
                    match level.parent_of[j] {
                        Some(p) if p < prev.cells.len() => {
                            if !cell.is_subset(&prev.cells[p]) {
                                out.push(format!(
                                    "level {k}: C_{j} not inside parent C_{p} of level {}",
                                    k - 1
                                ));
                            }
                        }
                        other => out.push(format!("level {k}: cell {j} has parent {other:?}")),
                    }
                }
            }
            if let Some(stored) = self.i_of.get(idx) {
                let recomputed = active_cells(level, p_inf);
                if *stored != recomputed {
                    out.push(format!(
                        "level {k}: stored I(k) = {stored:?}, recomputed {recomputed:?}"
                    ));
                }
            }
        }
        out
    }

    /// Per-level summary: q(k), P∞(C_{0,k}), max cell diameter.
    pub fn summary(&self, space: &FiniteMetricSpace, p_inf: &DiscreteMeasure) -> Vec<LevelSummary> {
        self.levels
            .iter()
            .map(|level| LevelSummary {
                k: level.k,
                q: level.q(),
                remainder_mass: p_inf.mass(level.remainder()),
                remainder_bound: self.eps_at(level.k),
                max_diameter: level
                    .cells
                    .iter()
                    .skip(1)
                    .map(|c| diameter(space, c))
                    .fold(0.0, f64::max),
                diameter_bound: self.delta_at(level.k),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub k: usize,
    pub q: usize,
    pub remainder_mass: f64,
    pub remainder_bound: f64,
    pub max_diameter: f64,
    pub diameter_bound: f64,
}

pub(crate) fn level_scale(x: f64, k: usize) -> f64 {
    x * 0.5_f64.powi(k as i32)
}

fn active_cells(level: &PartitionLevel, p_inf: &DiscreteMeasure) -> Vec<usize> {
    level
        .cells
        .iter()
        .enumerate()
        .filter(|(_, c)| p_inf.mass(c) > MASS_TOL)
        .map(|(j, _)| j)
        .collect()
}

/// Smallest radius in `[target, 2 target]` whose sphere around `center`
/// carries no mass: the target itself when its sphere is empty, otherwise
/// the midpoint of the gap up to the next mass-carrying distance.
pub fn continuity_radius(
    space: &FiniteMetricSpace,
    center: usize,
    target: f64,
    mu: &DiscreteMeasure,
) -> Result<f64> {
    space.check_point(center)?;
    mu.check_space(space)?;
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::Domain(format!(
            "target radius {target} must be positive"
        )));
    }
    if boundary_mass(space, center, target, mu)? == 0.0 {
        return Ok(target);
    }
    let next = (0..space.len())
        .filter(|&x| mu.weight(x) > 0.0)
        .map(|x| space.dist(center, x))
        .filter(|&d| d > target)
        .fold(f64::INFINITY, f64::min);
    let upper = next.min(2.0 * target);
    Ok(0.5 * (target + upper))
}

/// Greedy cover of `survivors` by P∞-continuity balls of diameter below
/// `2^{-k} Δ`, clipped to `survivors`. Centers are taken by decreasing atom
/// mass (ties by index) until the uncovered mass is at most
/// `2^{-k} ε · P∞(survivors)`.
pub fn cover_level(
    space: &FiniteMetricSpace,
    p_inf: &DiscreteMeasure,
    k: usize,
    delta: f64,
    eps: f64,
    survivors: &PointSet,
) -> Result<Vec<(BallSpec, PointSet)>> {
    if k == 0 {
        return Err(Error::Domain("levels start at 1".into()));
    }
    let budget = level_scale(eps, k) * p_inf.mass(survivors);
    // open ball of radius ≤ Δ_k / 2 has diameter < Δ_k
    let target = level_scale(delta, k) / 4.0;

    let mut centers: Vec<usize> = survivors
        .iter()
        .filter(|&x| p_inf.weight(x) > 0.0)
        .collect();
    centers.sort_by(|&a, &b| p_inf.weight(b).total_cmp(&p_inf.weight(a)).then(a.cmp(&b)));

    let mut covered = PointSet::new();
    let mut out = Vec::new();
    for c in centers {
        let uncovered = p_inf.mass(&survivors.difference(&covered));
        if uncovered <= budget {
            break;
        }
        if covered.contains(c) {
            continue;
        }
        let radius = continuity_radius(space, c, target, p_inf)?;
        let b = ball(space, c, radius)?.intersection(survivors);
        covered = covered.union(&b);
        out.push((BallSpec { center: c, radius }, b));
    }
    Ok(out)
}

/// Result of [`disjointify`]: the non-empty cells and, for each, the index of
/// the input set it was carved from.
#[derive(Clone, Debug, PartialEq)]
pub struct Disjointified {
    pub cells: Vec<PointSet>,
    pub source: Vec<usize>,
}

/// `C_1 = D_1`, `C_j = D_j \ (D_1 ∪ … ∪ D_{j−1})`, dropping empty results.
pub fn disjointify(sets: &[PointSet]) -> Disjointified {
    let mut seen = PointSet::new();
    let mut cells = Vec::new();
    let mut source = Vec::new();
    for (i, d) in sets.iter().enumerate() {
        let c = d.difference(&seen);
        seen = seen.union(d);
        if !c.is_empty() {
            cells.push(c);
            source.push(i);
        }
    }
    Disjointified { cells, source }
}

pub fn build_partition_tree(
    space: &FiniteMetricSpace,
    p_inf: &DiscreteMeasure,
    delta: f64,
    eps: f64,
    k_max: usize,
) -> Result<PartitionTree> {
    p_inf.check_space(space)?;
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!("Δ = {delta} must be positive")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("ε = {eps} must lie in (0, 1)")));
    }
    if k_max == 0 {
        return Err(Error::Domain("k_max must be at least 1".into()));
    }

    let n = space.len();
    let mut levels: Vec<PartitionLevel> = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let parents: Vec<(Option<usize>, PointSet)> = match levels.last() {
            None => vec![(None, space.all_points())],
            Some(prev) => prev
                .cells
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_empty())
                .map(|(j, c)| (Some(j), c.clone()))
                .collect(),
        };

        let mut cells = vec![PointSet::new()];
        let mut parent_of = vec![None];
        let mut balls = vec![None];
        for (parent, region) in &parents {
            let cover = cover_level(space, p_inf, k, delta, eps, region)?;
            let sets: Vec<PointSet> = cover.iter().map(|(_, b)| b.clone()).collect();
            let split = disjointify(&sets);
            for (cell, src) in split.cells.into_iter().zip(split.source) {
                cells.push(cell);
                parent_of.push(*parent);
                balls.push(Some(cover[src].0.clone()));
            }
        }
        let mut cell_of = vec![0usize; n];
        for (j, cell) in cells.iter().enumerate().skip(1) {
            for x in cell.iter() {
                cell_of[x] = j;
            }
        }
        cells[0] = (0..n).filter(|&x| cell_of[x] == 0).collect();
        levels.push(PartitionLevel {
            k,
            cells,
            parent_of,
            balls,
            cell_of,
        });
    }
    let i_of = levels.iter().map(|l| active_cells(l, p_inf)).collect();
    Ok(PartitionTree {
        delta,
        eps,
        levels,
        i_of,
    })
}

/// The unique `j` with `s ∈ C_{j,k}`.
pub fn locate_cell(tree: &PartitionTree, k: usize, s: usize) -> Result<usize> {
    if k == 0 || k > tree.k_max() {
        return Err(Error::Domain(format!(
            "level {k} outside 1..={}",
            tree.k_max()
        )));
    }
    tree.level(k)
        .cell_of
        .get(s)
        .copied()
        .ok_or(Error::InvalidPoint {
            index: s,
            len: tree.level(k).cell_of.len(),
        })
}
