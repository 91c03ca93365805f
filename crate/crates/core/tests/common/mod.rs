#![allow(dead_code)]

use std::path::PathBuf;

use skorohod::coupling::build_plan;
use skorohod::instance::InstanceSpec;
use skorohod::partition::build_partition_tree;
use skorohod::{CouplingPlan, DiscreteMeasure, FiniteMetricSpace, PartitionTree};

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

pub fn reference() -> InstanceSpec {
    InstanceSpec::load(&data("reference.json")).unwrap()
}

pub fn reference_tree() -> (FiniteMetricSpace, DiscreteMeasure, PartitionTree) {
    let spec = reference();
    let space = spec.space().unwrap().clone();
    let p_inf = spec.p_inf().unwrap();
    let tree = build_partition_tree(&space, &p_inf, spec.delta, spec.eps, spec.k_max).unwrap();
    (space, p_inf, tree)
}

pub fn reference_plan() -> CouplingPlan {
    plan_for(reference().family().unwrap())
}

/// Plan on the reference space and tree for another family.
pub fn plan_for(family: Vec<DiscreteMeasure>) -> CouplingPlan {
    let spec = reference();
    let (space, p_inf, tree) = reference_tree();
    build_plan(space, p_inf, family, tree, spec.beta).unwrap()
}

/// Brute-force diameter: max pairwise distance.
pub fn brute_diameter(space: &FiniteMetricSpace, pts: &[usize]) -> f64 {
    let mut d: f64 = 0.0;
    for &a in pts {
        for &b in pts {
            d = d.max(space.dist(a, b));
        }
    }
    d
}

pub fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// `(cell points, P∞ mass)` of every non-remainder cell at level k, taken
/// from the raw sets rather than from any stored index.
pub fn cells_at(tree: &PartitionTree, k: usize) -> Vec<Vec<usize>> {
    tree.level(k).cells[1..]
        .iter()
        .map(|c| c.iter().collect())
        .collect()
}

pub fn set_mass(m: &DiscreteMeasure, pts: &[usize]) -> f64 {
    pts.iter().map(|&i| m.weight(i)).sum()
}

pub fn beta(k: usize) -> f64 {
    0.5f64.powi(k as i32)
}

pub fn beta_star(k: usize) -> f64 {
    1.0 - 0.5f64.powi(k as i32)
}

/// Exact conditional-cell-plus-remainder mass of `{d(X_α, X∞) > r}`, written
/// directly from the kernel case split: with probability β*_ℓ the coordinate
/// is drawn from P_α restricted to the cell of s, otherwise from H_α.
pub fn oracle_far_mass(plan: &CouplingPlan, alpha: usize, r: f64) -> f64 {
    let n = plan.space.len();
    let l = match plan.ell(alpha).finite() {
        Some(l) => l,
        None => return 0.0,
    };
    let h = plan.h_alpha(alpha).unwrap();
    let pa = plan.p_alpha(alpha);
    let cells = cells_at(&plan.tree, l);
    let mut total = 0.0;
    for s in 0..n {
        let ps = plan.p_inf.weight(s);
        if ps == 0.0 {
            continue;
        }
        let cell = cells.iter().find(|c| c.contains(&s));
        let near = match cell {
            Some(c) => {
                let m = set_mass(pa, c);
                c.iter()
                    .filter(|&&x| plan.space.dist(x, s) > r)
                    .map(|&x| pa.weight(x) / m)
                    .sum::<f64>()
            }
            None => {
                let rem: Vec<usize> = plan.tree.level(l).cells[0].iter().collect();
                let m = set_mass(pa, &rem);
                if m == 0.0 {
                    // null cell: the kernel is δ_s
                    0.0
                } else {
                    rem.iter()
                        .filter(|&&x| plan.space.dist(x, s) > r)
                        .map(|&x| pa.weight(x) / m)
                        .sum::<f64>()
                }
            }
        };
        let far_h: f64 = (0..n)
            .filter(|&x| plan.space.dist(x, s) > r)
            .map(|x| h.weight(x))
            .sum();
        total += ps * (beta_star(l) * near + (1.0 - beta_star(l)) * far_h);
    }
    total
}
