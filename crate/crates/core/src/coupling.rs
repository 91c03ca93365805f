//! The coupling measure ν = Σ_j β_j ν_j built on a partition tree.
//!
//! For each index α the plan stores a level ℓ(α) and, when ℓ(α) is finite,
//! the remainder measure
//!
//! ```text
//! H_α(A) = P_α(A)/(1 − β*_ℓ) − β*_ℓ/(1 − β*_ℓ) · Σ_{p ∈ I(ℓ)} P_α(A | C_{p,ℓ}) P∞(C_{p,ℓ})
//! ```
//!
//! Given a mixture component `j` and a value `s` of X∞, the coordinate X_α is
//! drawn from `P_α(· | C_{p(s),ℓ(α)})` when `j ≤ ℓ(α)`, from `H_α` when
//! `j > ℓ(α)`, and equals `s` when ℓ(α) = ∞. Coordinates are independent
//! given `(j, s)`.

use std::cell::Cell;
use std::fmt;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{conditional, total_variation, DiscreteMeasure, FiniteMetricSpace, MASS_TOL};
use crate::partition::{locate_cell, PartitionTree};

/// Allowed atomwise defect in the mixture identity `P_α = (1 − β*)H_α + β* Σ …`.
pub const INVERSION_TOL: f64 = 1e-10;

/// Geometric weights `β_k = (1 − r) r^{k−1}`, so `β*_k = 1 − r^k`.
/// The default `r = 1/2` gives `β_k = 2^{-k}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BetaSchedule {
    Geometric { ratio: f64 },
}

impl Default for BetaSchedule {
    fn default() -> Self {
        BetaSchedule::Geometric { ratio: 0.5 }
    }
}

impl BetaSchedule {
    pub fn geometric(ratio: f64) -> Result<Self> {
        if ratio > 0.0 && ratio < 1.0 {
            Ok(BetaSchedule::Geometric { ratio })
        } else {
            Err(Error::Domain(format!(
                "geometric ratio {ratio} must lie in (0, 1)"
            )))
        }
    }

    pub fn ratio(&self) -> f64 {
        match *self {
            BetaSchedule::Geometric { ratio } => ratio,
        }
    }

    pub fn beta(&self, k: usize) -> f64 {
        let r = self.ratio();
        (1.0 - r) * r.powi(k as i32 - 1)
    }

    pub fn beta_star(&self, k: usize) -> f64 {
        1.0 - self.tail(k)
    }

    /// `1 − β*_k = Σ_{j > k} β_j`, computed without cancellation.
    pub fn tail(&self, k: usize) -> f64 {
        self.ratio().powi(k as i32)
    }

    /// Inverse-CDF draw of the mixture component `j ≥ 1`.
    pub fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
        1 + (u.ln() / self.ratio().ln()).floor() as u64
    }
}

/// The level ℓ(α): a finite level, or ∞ when P_α coincides with P∞.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ell {
    Finite(usize),
    Infinite,
}

impl Ell {
    pub fn finite(self) -> Option<usize> {
        match self {
            Ell::Finite(k) => Some(k),
            Ell::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        self == Ell::Infinite
    }

    /// Whether a component `j` falls in the conditional (`j ≤ ℓ`) regime.
    pub fn covers(self, j: u64) -> bool {
        match self {
            Ell::Finite(k) => j <= k as u64,
            Ell::Infinite => true,
        }
    }
}

impl fmt::Display for Ell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ell::Finite(k) => write!(f, "{k}"),
            Ell::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Ell {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Ell::Finite(k) => ser.serialize_u64(*k as u64),
            Ell::Infinite => ser.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Ell {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Level(usize),
            Tag(String),
        }
        match Raw::deserialize(de)? {
            Raw::Level(k) => Ok(Ell::Finite(k)),
            Raw::Tag(t) if t == "inf" => Ok(Ell::Infinite),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!("bad level {t:?}"))),
        }
    }
}

/// Cell ratios η_{α,k,p} = P_α(C_{p,k}) / P∞(C_{p,k}) for p ∈ I(k), their
/// minima, and the deviations δ_{α,k} = max_h |P_α(C_{h,k}) − P∞(C_{h,k})|.
/// Indexed `[α − 1][k − 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioTable {
    pub eta: Vec<Vec<Vec<(usize, f64)>>>,
    pub eta_min: Vec<Vec<f64>>,
    pub delta_dev: Vec<Vec<f64>>,
    /// TV(P_α, P∞), used to decide ℓ(α) = ∞.
    pub tv_to_limit: Vec<f64>,
}

impl RatioTable {
    pub fn n_alpha(&self) -> usize {
        self.eta.len()
    }

    pub fn eta(&self, alpha: usize, k: usize, p: usize) -> Option<f64> {
        self.eta[alpha - 1][k - 1]
            .iter()
            .find(|(q, _)| *q == p)
            .map(|(_, e)| *e)
    }

    pub fn eta_min(&self, alpha: usize, k: usize) -> f64 {
        self.eta_min[alpha - 1][k - 1]
    }

    pub fn delta_dev(&self, alpha: usize, k: usize) -> f64 {
        self.delta_dev[alpha - 1][k - 1]
    }
}

pub fn ratio_table(
    p_inf: &DiscreteMeasure,
    p_alpha: &[DiscreteMeasure],
    tree: &PartitionTree,
) -> Result<RatioTable> {
    let mut eta = Vec::with_capacity(p_alpha.len());
    let mut eta_min = Vec::with_capacity(p_alpha.len());
    let mut delta_dev = Vec::with_capacity(p_alpha.len());
    let mut tv_to_limit = Vec::with_capacity(p_alpha.len());
    for pa in p_alpha {
        let mut eta_a = Vec::with_capacity(tree.k_max());
        let mut min_a = Vec::with_capacity(tree.k_max());
        let mut dev_a = Vec::with_capacity(tree.k_max());
        for level in &tree.levels {
            let ratios: Vec<(usize, f64)> = tree
                .active(level.k)
                .iter()
                .map(|&p| {
                    let cell = &level.cells[p];
                    (p, pa.mass(cell) / p_inf.mass(cell))
                })
                .collect();
            min_a.push(ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min));
            dev_a.push(
                level
                    .cells
                    .iter()
                    .map(|c| (pa.mass(c) - p_inf.mass(c)).abs())
                    .fold(0.0, f64::max),
            );
            eta_a.push(ratios);
        }
        eta.push(eta_a);
        eta_min.push(min_a);
        delta_dev.push(dev_a);
        tv_to_limit.push(total_variation(pa, p_inf)?);
    }
    Ok(RatioTable {
        eta,
        eta_min,
        delta_dev,
        tv_to_limit,
    })
}

/// ℓ(α) = ∞ when P_α = P∞; otherwise the largest `k ≤ k_max` such that
/// `β*_{k'} ≤ min_p η_{α,k',p}` and `δ_{α,k'} ≤ β_{k'}` for every `k' ≤ k`
/// (0 when level 1 already fails).
pub fn compute_ell(table: &RatioTable, betas: &BetaSchedule, k_max: usize) -> Vec<Ell> {
    (1..=table.n_alpha())
        .map(|alpha| {
            if table.tv_to_limit[alpha - 1] <= MASS_TOL {
                return Ell::Infinite;
            }
            let mut ell = 0;
            for k in 1..=k_max.min(table.eta_min[alpha - 1].len()) {
                if level_admissible(table, betas, alpha, k).is_err() {
                    break;
                }
                ell = k;
            }
            Ell::Finite(ell)
        })
        .collect()
}

/// Checks both level conditions, returning the first offending cell and a
/// description on failure.
fn level_admissible(
    table: &RatioTable,
    betas: &BetaSchedule,
    alpha: usize,
    k: usize,
) -> std::result::Result<(), (usize, String)> {
    let bs = betas.beta_star(k);
    for &(p, eta) in &table.eta[alpha - 1][k - 1] {
        if bs > eta + MASS_TOL {
            return Err((p, format!("eta = {eta} < beta*_{k} = {bs}")));
        }
    }
    let dev = table.delta_dev(alpha, k);
    if dev > betas.beta(k) + MASS_TOL {
        return Err((
            usize::MAX,
            format!("delta_{k} = {dev} > beta_{k} = {}", betas.beta(k)),
        ));
    }
    Ok(())
}

/// The remainder measure at level `k`, evaluated atomwise from its defining
/// formula. Fails with [`Error::Negativity`] when some active cell has
/// `η_{α,k,p} < β*_k`.
pub fn build_h_measure(
    alpha: usize,
    p_alpha: &DiscreteMeasure,
    p_inf: &DiscreteMeasure,
    tree: &PartitionTree,
    k: usize,
    betas: &BetaSchedule,
) -> Result<DiscreteMeasure> {
    let bs = betas.beta_star(k);
    let tail = betas.tail(k);
    let level = tree.level(k);
    for &p in tree.active(k) {
        let cell = &level.cells[p];
        let eta = p_alpha.mass(cell) / p_inf.mass(cell);
        if bs > eta + MASS_TOL {
            return Err(Error::Negativity {
                alpha,
                level: k,
                cell: p,
                beta_star: bs,
                eta,
            });
        }
    }
    let active = tree.active(k);
    let mut w = Vec::with_capacity(p_alpha.len());
    for x in 0..p_alpha.len() {
        let p = level.cell_of[x];
        let mut mixture = 0.0;
        if active.contains(&p) {
            let cell = &level.cells[p];
            let pa_cell = p_alpha.mass(cell);
            if pa_cell > 0.0 {
                mixture = p_alpha.weight(x) / pa_cell * p_inf.mass(cell);
            }
        }
        let mut h = p_alpha.weight(x) / tail - bs / tail * mixture;
        if h < 0.0 {
            // rounding at η = β*; anything larger was rejected above
            if h < -1e-9 {
                return Err(Error::Negativity {
                    alpha,
                    level: k,
                    cell: p,
                    beta_star: bs,
                    eta: p_alpha.mass(&level.cells[p]) / p_inf.mass(&level.cells[p]),
                });
            }
            h = 0.0;
        }
        w.push(h);
    }
    let total: f64 = w.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidMeasure(format!(
            "H measure for alpha {alpha} has total mass {total}"
        )));
    }
    DiscreteMeasure::new(w)
}

/// Max atomwise defect of
/// `P_α = (1 − β*_k) H + β*_k Σ_{p ∈ I(k)} P∞(C_{p,k}) P_α(· | C_{p,k})`.
pub fn check_inversion(
    p_alpha: &DiscreteMeasure,
    h: &DiscreteMeasure,
    p_inf: &DiscreteMeasure,
    tree: &PartitionTree,
    k: usize,
    betas: &BetaSchedule,
) -> f64 {
    let bs = betas.beta_star(k);
    let level = tree.level(k);
    let mut rhs: Vec<f64> = h.weights().iter().map(|x| betas.tail(k) * x).collect();
    for &p in tree.active(k) {
        let cell = &level.cells[p];
        if let Ok(cond) = conditional(p_alpha, cell) {
            let w = bs * p_inf.mass(cell);
            for (r, c) in rhs.iter_mut().zip(cond.weights()) {
                *r += w * c;
            }
        }
    }
    p_alpha
        .weights()
        .iter()
        .zip(&rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Everything needed to sample or enumerate ν.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingPlan {
    pub space: FiniteMetricSpace,
    pub p_inf: DiscreteMeasure,
    pub p_alpha: Vec<DiscreteMeasure>,
    pub tree: PartitionTree,
    pub betas: BetaSchedule,
    pub ell: Vec<Ell>,
    /// `H_α` for finite ℓ(α), `None` otherwise.
    pub h_alpha: Vec<Option<DiscreteMeasure>>,
}

/// Ranges of the cell ratios and deviations, for the CLI diagnostics block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanDiagnostics {
    pub alpha: usize,
    pub ell: Ell,
    pub eta_min: f64,
    pub eta_max: f64,
    /// max_{k,p} |η_{α,k,p} − 1|: the smallest band constant that fits.
    pub band: f64,
    pub delta_dev: Vec<f64>,
    pub tv_to_limit: f64,
    pub inversion_defect: Option<f64>,
}

pub fn build_plan(
    space: FiniteMetricSpace,
    p_inf: DiscreteMeasure,
    p_alpha: Vec<DiscreteMeasure>,
    tree: PartitionTree,
    betas: BetaSchedule,
) -> Result<CouplingPlan> {
    p_inf.check_space(&space)?;
    for pa in &p_alpha {
        pa.check_space(&space)?;
    }
    if p_alpha.is_empty() {
        return Err(Error::Domain("the family of measures is empty".into()));
    }
    let broken = tree.violations(&space, &p_inf);
    if !broken.is_empty() {
        return Err(Error::Domain(format!(
            "partition tree is invalid: {}",
            broken.join("; ")
        )));
    }
    let table = ratio_table(&p_inf, &p_alpha, &tree)?;
    let ell = compute_ell(&table, &betas, tree.k_max());
    let mut h_alpha = Vec::with_capacity(p_alpha.len());
    for (i, (pa, l)) in p_alpha.iter().zip(&ell).enumerate() {
        let alpha = i + 1;
        match l {
            Ell::Infinite => h_alpha.push(None),
            Ell::Finite(0) => {
                let (cell, reason) = level_admissible(&table, &betas, alpha, 1)
                    .err()
                    .unwrap_or((0, "level 1 rejected".into()));
                return Err(Error::NotConverged {
                    alpha,
                    cell,
                    reason,
                });
            }
            Ell::Finite(k) => {
                let h = build_h_measure(alpha, pa, &p_inf, &tree, *k, &betas)?;
                let defect = check_inversion(pa, &h, &p_inf, &tree, *k, &betas);
                if defect > INVERSION_TOL {
                    return Err(Error::InvalidMeasure(format!(
                        "mixture identity fails for alpha {alpha}: defect {defect:e}"
                    )));
                }
                h_alpha.push(Some(h));
            }
        }
    }
    Ok(CouplingPlan {
        space,
        p_inf,
        p_alpha,
        tree,
        betas,
        ell,
        h_alpha,
    })
}

impl CouplingPlan {
    pub fn n_alpha(&self) -> usize {
        self.p_alpha.len()
    }

    pub fn alphas(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n_alpha()
    }

    pub fn ell(&self, alpha: usize) -> Ell {
        self.ell[alpha - 1]
    }

    pub fn p_alpha(&self, alpha: usize) -> &DiscreteMeasure {
        &self.p_alpha[alpha - 1]
    }

    pub fn h_alpha(&self, alpha: usize) -> Option<&DiscreteMeasure> {
        self.h_alpha[alpha - 1].as_ref()
    }

    fn check_alpha(&self, alpha: usize) -> Result<()> {
        if alpha >= 1 && alpha <= self.n_alpha() {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "alpha {alpha} outside 1..={}",
                self.n_alpha()
            )))
        }
    }

    pub fn diagnostics(&self) -> Result<Vec<PlanDiagnostics>> {
        let table = ratio_table(&self.p_inf, &self.p_alpha, &self.tree)?;
        Ok(self
            .alphas()
            .map(|alpha| {
                let etas = table.eta[alpha - 1].iter().flatten().map(|e| e.1);
                let (lo, hi) = etas.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
                    (lo.min(e), hi.max(e))
                });
                let inversion_defect = match (self.ell(alpha), self.h_alpha(alpha)) {
                    (Ell::Finite(k), Some(h)) => Some(check_inversion(
                        self.p_alpha(alpha),
                        h,
                        &self.p_inf,
                        &self.tree,
                        k,
                        &self.betas,
                    )),
                    _ => None,
                };
                PlanDiagnostics {
                    alpha,
                    ell: self.ell(alpha),
                    eta_min: lo,
                    eta_max: hi,
                    band: (1.0 - lo).abs().max((hi - 1.0).abs()),
                    delta_dev: table.delta_dev[alpha - 1].clone(),
                    tv_to_limit: table.tv_to_limit[alpha - 1],
                    inversion_defect,
                }
            })
            .collect())
    }

    /// The kernel ν_{j,s,α}.
    pub fn kernel(&self, j: u64, s: usize, alpha: usize) -> Result<DiscreteMeasure> {
        self.check_alpha(alpha)?;
        self.space.check_point(s)?;
        if j == 0 {
            return Err(Error::Domain("mixture components start at 1".into()));
        }
        let n = self.space.len();
        Ok(match self.ell(alpha) {
            Ell::Infinite => DiscreteMeasure::point_mass(n, s),
            Ell::Finite(k) if j > k as u64 => self
                .h_alpha(alpha)
                .cloned()
                .ok_or_else(|| Error::Domain(format!("no H stored for alpha {alpha}")))?,
            Ell::Finite(k) => {
                let p = locate_cell(&self.tree, k, s)?;
                match conditional(self.p_alpha(alpha), self.tree.cell(k, p)) {
                    Ok(m) => m,
                    Err(Error::NullConditioning { .. }) => DiscreteMeasure::point_mass(n, s),
                    Err(e) => return Err(e),
                }
            }
        })
    }

    /// The j-axis collapsed into blocks on which every kernel for `alphas` is
    /// constant: `(weight, representative j)`.
    pub fn blocks(&self, alphas: &[usize]) -> Vec<(f64, u64)> {
        let mut cuts: Vec<usize> = alphas
            .iter()
            .filter_map(|&a| self.ell(a).finite())
            .collect();
        cuts.sort_unstable();
        cuts.dedup();
        let mut out = Vec::with_capacity(cuts.len() + 1);
        let mut prev = 0usize;
        for &c in &cuts {
            let w = self.betas.beta_star(c)
                - if prev == 0 {
                    0.0
                } else {
                    self.betas.beta_star(prev)
                };
            out.push((w, c as u64));
            prev = c;
        }
        out.push((self.betas.tail(prev), prev as u64 + 1));
        out
    }

    fn kernel_table(&self, alphas: &[usize]) -> Result<KernelTable> {
        for &a in alphas {
            self.check_alpha(a)?;
        }
        let blocks = self.blocks(alphas);
        let n = self.space.len();
        let mut rows = Vec::with_capacity(blocks.len());
        for &(_, j) in &blocks {
            let mut per_s = Vec::with_capacity(n);
            for s in 0..n {
                let ks = alphas
                    .iter()
                    .map(|&a| {
                        self.kernel(j, s, a).map(|m| {
                            m.weights()
                                .iter()
                                .enumerate()
                                .filter(|(_, w)| **w > 0.0)
                                .map(|(x, w)| (x, *w))
                                .collect::<Vec<_>>()
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                per_s.push(ks);
            }
            rows.push(per_s);
        }
        Ok(KernelTable { blocks, rows })
    }
}

type SparseKernel = Vec<(usize, f64)>;

/// Sparse kernels `[block][s][position in alphas] -> [(x, weight)]`.
struct KernelTable {
    blocks: Vec<(f64, u64)>,
    rows: Vec<Vec<Vec<SparseKernel>>>,
}

/// What an event predicate sees during exact enumeration: the value of X∞ and
/// the coordinates listed in the enumeration's index set.
pub struct EventView<'a> {
    s: usize,
    alphas: &'a [usize],
    values: &'a [usize],
    violation: &'a Cell<Option<usize>>,
}

impl EventView<'_> {
    pub fn s(&self) -> usize {
        self.s
    }

    /// Value of X_α. Reading an α outside the enumerated set is recorded and
    /// turns the whole enumeration into [`Error::ContractViolation`].
    pub fn x(&self, alpha: usize) -> usize {
        match self.alphas.iter().position(|&a| a == alpha) {
            Some(i) => self.values[i],
            None => {
                self.violation.set(Some(alpha));
                self.s
            }
        }
    }
}

/// Exact ν(event) for an event that depends on X∞ and on X_α for α in
/// `alphas` only. Cost is the product of the kernel support sizes.
pub fn enumerate_nu(
    plan: &CouplingPlan,
    alphas: &[usize],
    event: impl Fn(&EventView) -> bool,
) -> Result<f64> {
    Ok(enumerate_nu_blocks(plan, alphas, event)?
        .iter()
        .map(|b| b.weight * b.conditional)
        .sum())
}

/// One block of the collapsed j-axis: its ν-weight `Σ_{j ∈ block} β_j`, a
/// representative component, and the event probability given the block.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockMass {
    pub weight: f64,
    pub j: u64,
    pub conditional: f64,
}

/// [`enumerate_nu`] split by block of the j-axis.
pub fn enumerate_nu_blocks(
    plan: &CouplingPlan,
    alphas: &[usize],
    event: impl Fn(&EventView) -> bool,
) -> Result<Vec<BlockMass>> {
    let table = plan.kernel_table(alphas)?;
    let violation = Cell::new(None);
    let mut values = vec![0usize; alphas.len()];
    let mut out = Vec::with_capacity(table.blocks.len());
    for (b, &(weight, j)) in table.blocks.iter().enumerate() {
        let mut block = 0.0;
        for s in 0..plan.space.len() {
            let ps = plan.p_inf.weight(s);
            if ps == 0.0 {
                continue;
            }
            let kernels = &table.rows[b][s];
            let mut acc = 0.0;
            walk(kernels, 0, 1.0, &mut values, &mut |vals, w| {
                let view = EventView {
                    s,
                    alphas,
                    values: vals,
                    violation: &violation,
                };
                if event(&view) {
                    acc += w;
                }
            });
            block += ps * acc;
        }
        out.push(BlockMass {
            weight,
            j,
            conditional: block,
        });
    }
    if let Some(alpha) = violation.get() {
        return Err(Error::ContractViolation { alpha });
    }
    Ok(out)
}

fn walk(
    kernels: &[Vec<(usize, f64)>],
    depth: usize,
    weight: f64,
    values: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize], f64),
) {
    if depth == kernels.len() {
        visit(values, weight);
        return;
    }
    for &(x, w) in &kernels[depth] {
        values[depth] = x;
        walk(kernels, depth + 1, weight * w, values, visit);
    }
}

/// Exact ν of a product-form event
/// `{X∞ ∈ A} ∩ ⋂_{α ∈ alphas} {X_α ∈ E_α(X∞)}`, whose α-sections may depend
/// on the value of X∞. Linear in the number of indices.
pub fn enumerate_product_event(
    plan: &CouplingPlan,
    alphas: &[usize],
    accept_s: impl Fn(usize) -> bool,
    section: impl Fn(usize, usize, usize) -> bool,
) -> Result<f64> {
    let table = plan.kernel_table(alphas)?;
    let mut total = 0.0;
    for (b, &(wb, _)) in table.blocks.iter().enumerate() {
        let mut block = 0.0;
        for s in 0..plan.space.len() {
            let ps = plan.p_inf.weight(s);
            if ps == 0.0 || !accept_s(s) {
                continue;
            }
            let prod: f64 = table.rows[b][s]
                .iter()
                .zip(alphas)
                .map(|(kernel, &a)| {
                    kernel
                        .iter()
                        .filter(|(x, _)| section(s, a, *x))
                        .map(|(_, w)| w)
                        .sum::<f64>()
                })
                .product();
            block += ps * prod;
        }
        total += wb * block;
    }
    Ok(total)
}

/// Exact law of X_α under ν (α = 0 selects X∞).
pub fn coordinate_law(plan: &CouplingPlan, alpha: usize) -> Result<Vec<f64>> {
    let n = plan.space.len();
    (0..n)
        .map(|x| {
            if alpha == 0 {
                enumerate_nu(plan, &[], |v| v.s() == x)
            } else {
                enumerate_nu(plan, &[alpha], |v| v.x(alpha) == x)
            }
        })
        .collect()
}

/// One draw ω = (j, X∞, (X_α)_α). `x[α − 1]` holds X_α.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoupledSample {
    pub j: u64,
    pub s: usize,
    pub x: Vec<usize>,
}

impl CoupledSample {
    pub fn x(&self, alpha: usize) -> usize {
        self.x[alpha - 1]
    }
}

const CHUNK: usize = 4096;

/// SplitMix64 finalizer, used to derive independent per-chunk seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

enum Draw {
    Fixed,
    Weighted(WeightedIndex<f64>),
}

/// Per-α samplers for the two kernel regimes.
struct AlphaSampler {
    ell: Ell,
    /// Indexed by cell at level ℓ(α); `Fixed` means δ_s.
    low: Vec<Draw>,
    high: Option<WeightedIndex<f64>>,
}

fn weighted(m: &DiscreteMeasure) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(m.weights().iter().copied())
        .map_err(|e| Error::InvalidMeasure(e.to_string()))
}

/// `n` independent draws from ν. Work is split into fixed-size chunks, each
/// with a seed derived from `seed`, so the output does not depend on the
/// thread count.
pub fn sample_coupled(plan: &CouplingPlan, seed: u64, n: usize) -> Result<Vec<CoupledSample>> {
    let p_inf = weighted(&plan.p_inf)?;
    let mut samplers = Vec::with_capacity(plan.n_alpha());
    for alpha in plan.alphas() {
        let ell = plan.ell(alpha);
        let (low, high) = match ell {
            Ell::Infinite => (Vec::new(), None),
            Ell::Finite(k) => {
                let level = plan.tree.level(k);
                let low = level
                    .cells
                    .iter()
                    .map(|cell| match conditional(plan.p_alpha(alpha), cell) {
                        Ok(m) => weighted(&m).map(Draw::Weighted),
                        Err(_) => Ok(Draw::Fixed),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let h = plan
                    .h_alpha(alpha)
                    .ok_or_else(|| Error::Domain(format!("no H stored for alpha {alpha}")))?;
                (low, Some(weighted(h)?))
            }
        };
        samplers.push(AlphaSampler { ell, low, high });
    }

    let chunks = n.div_ceil(CHUNK);
    let out: Vec<Vec<CoupledSample>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(c as u64)));
            let len = CHUNK.min(n - c * CHUNK);
            (0..len)
                .map(|_| {
                    let j = plan.betas.sample_component(&mut rng);
                    let s = p_inf.sample(&mut rng);
                    let x = samplers
                        .iter()
                        .map(|smp| match smp.ell {
                            Ell::Infinite => s,
                            Ell::Finite(k) if j > k as u64 => {
                                smp.high.as_ref().map_or(s, |h| h.sample(&mut rng))
                            }
                            Ell::Finite(k) => match &smp.low[plan.tree.level(k).cell_of[s]] {
                                Draw::Fixed => s,
                                Draw::Weighted(w) => w.sample(&mut rng),
                            },
                        })
                        .collect();
                    CoupledSample { j, s, x }
                })
                .collect()
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}
