//! Exact and statistical checks of a coupling plan.
//!
//! Exact quantities come from enumeration and involve no randomness; the
//! statistical checks record their seed, sample size and the bound they used.

use serde::{Deserialize, Serialize};

use crate::coupling::{
    build_h_measure, check_inversion, compute_ell, coordinate_law, enumerate_nu_blocks,
    enumerate_product_event, ratio_table, sample_coupled, CouplingPlan, Ell, INVERSION_TOL,
};
use crate::error::{Error, Result};
use crate::metric::{total_variation, DiscreteMeasure};
use crate::quantile::{cdf_eval, StepCdf};

/// Allowed TV distance between an enumerated coordinate law and its target.
pub const MARGINAL_TOL: f64 = 1e-10;

/// Minimum sample count for [`verify_as_convergence`].
pub const MIN_AS_SAMPLES: usize = 1_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalDefect {
    /// `None` for X∞.
    pub alpha: Option<usize>,
    pub tv: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyCheck {
    pub alpha: usize,
    pub stored_ell: Ell,
    pub recomputed_ell: Ell,
    /// max atomwise |stored H − recomputed H|.
    pub h_difference: f64,
    pub inversion_defect: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcBound {
    pub alpha: usize,
    pub k: usize,
    pub h: usize,
    /// Exact ν(d(X_α, X∞) > 2^{-k} Δ).
    pub mass: f64,
    /// Contribution of components `j ≤ ℓ(α)` (conditional kernels).
    pub conditional_part: f64,
    /// Contribution of components `j > ℓ(α)` (the H_α kernel).
    pub remainder_part: f64,
    /// ε_h = 2^{-h} ε.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    pub k: usize,
    pub alphas: usize,
    /// Exact ν(∪_{ℓ(α) ≥ k} {d(X_α, X∞) > 2^{-k} Δ}).
    pub mass: f64,
    /// 2^{1−k} ε.
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsRow {
    pub k: usize,
    pub rate: f64,
    pub bound: f64,
    /// Binomial standard error at the bound.
    pub sigma_bound: f64,
    pub pass_bound: bool,
    pub exact: f64,
    /// Binomial standard error at the exact value.
    pub sigma_exact: f64,
    pub pass_agreement: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsConvergence {
    pub seed: u64,
    pub n: usize,
    pub rows: Vec<AsRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DkwResult {
    pub n: usize,
    pub sup_distance: f64,
    pub bound: f64,
    pub confidence: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub tree_violations: Vec<String>,
    pub consistency: Vec<ConsistencyCheck>,
    pub marginal_defects: Vec<MarginalDefect>,
    pub cc_bounds: Vec<CcBound>,
    pub tail_bounds: Vec<TailBound>,
    pub as_convergence: Option<AsConvergence>,
}

impl VerificationReport {
    /// Names of the check families with at least one failed flag.
    pub fn failed_checks(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.tree_violations.is_empty() {
            out.push("partition");
        }
        if self.consistency.iter().any(|c| !c.pass) {
            out.push("consistency");
        }
        if self.marginal_defects.iter().any(|m| !m.pass) {
            out.push("marginals");
        }
        if self.cc_bounds.iter().any(|c| !c.pass) {
            out.push("cc_bound");
        }
        if self.tail_bounds.iter().any(|t| !t.pass) {
            out.push("tail_bound");
        }
        if let Some(a) = &self.as_convergence {
            if a.rows.iter().any(|r| !r.pass_bound) {
                out.push("as_convergence");
            }
            if a.rows.iter().any(|r| !r.pass_agreement) {
                out.push("sampler_agreement");
            }
        }
        out
    }

    pub fn all_pass(&self) -> bool {
        self.failed_checks().is_empty()
    }

    /// Fixed-width text table, one line per check family.
    pub fn summary(&self) -> String {
        let mut lines = Vec::new();
        let mut row = |name: &str, total: usize, failed: usize, worst: String| {
            let status = if failed == 0 { "PASS" } else { "FAIL" };
            lines.push(format!(
                "{status}  {name:<18} {:>5}/{:<5} {worst}",
                total - failed,
                total
            ));
        };
        row(
            "partition",
            1,
            usize::from(!self.tree_violations.is_empty()),
            self.tree_violations.first().cloned().unwrap_or_default(),
        );
        row(
            "consistency",
            self.consistency.len(),
            self.consistency.iter().filter(|c| !c.pass).count(),
            format!(
                "max |ΔH| = {:.3e}",
                self.consistency
                    .iter()
                    .map(|c| c.h_difference)
                    .fold(0.0, f64::max)
            ),
        );
        row(
            "marginals",
            self.marginal_defects.len(),
            self.marginal_defects.iter().filter(|m| !m.pass).count(),
            format!(
                "max TV = {:.3e}",
                self.marginal_defects
                    .iter()
                    .map(|m| m.tv)
                    .fold(0.0, f64::max)
            ),
        );
        row(
            "cc_bound",
            self.cc_bounds.len(),
            self.cc_bounds.iter().filter(|c| !c.pass).count(),
            format!(
                "max mass/bound = {:.3}",
                self.cc_bounds
                    .iter()
                    .map(|c| c.mass / c.bound)
                    .fold(0.0, f64::max)
            ),
        );
        row(
            "tail_bound",
            self.tail_bounds.len(),
            self.tail_bounds.iter().filter(|t| !t.pass).count(),
            format!(
                "max mass/bound = {:.3}",
                self.tail_bounds
                    .iter()
                    .map(|t| t.mass / t.bound)
                    .fold(0.0, f64::max)
            ),
        );
        if let Some(a) = &self.as_convergence {
            row(
                "as_convergence",
                a.rows.len(),
                a.rows.iter().filter(|r| !r.pass_bound).count(),
                format!("seed {} n {}", a.seed, a.n),
            );
            row(
                "sampler_agreement",
                a.rows.len(),
                a.rows.iter().filter(|r| !r.pass_agreement).count(),
                format!("seed {} n {}", a.seed, a.n),
            );
        }
        lines.join("\n")
    }
}

/// TV between each enumerated coordinate law and its prescribed law: P∞ for
/// X∞ and for X_α with ℓ(α) = ∞, P_α otherwise.
pub fn verify_marginals(plan: &CouplingPlan) -> Result<Vec<MarginalDefect>> {
    let mut out = Vec::with_capacity(plan.n_alpha() + 1);
    let law = DiscreteMeasure::from_unnormalized(coordinate_law(plan, 0)?)?;
    let tv = total_variation(&law, &plan.p_inf)?;
    out.push(MarginalDefect {
        alpha: None,
        tv,
        pass: tv <= MARGINAL_TOL,
    });
    for alpha in plan.alphas() {
        let raw = coordinate_law(plan, alpha)?;
        let target = match plan.ell(alpha) {
            Ell::Infinite => &plan.p_inf,
            Ell::Finite(_) => plan.p_alpha(alpha),
        };
        // unnormalized on purpose: a leaking kernel must show up here
        let tv = 0.5
            * raw
                .iter()
                .zip(target.weights())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>();
        out.push(MarginalDefect {
            alpha: Some(alpha),
            tv,
            pass: tv <= MARGINAL_TOL,
        });
    }
    Ok(out)
}

/// Rebuilds ℓ and every H_α from the plan's own inputs and compares them with
/// what the plan stores.
pub fn verify_consistency(plan: &CouplingPlan) -> Result<Vec<ConsistencyCheck>> {
    let table = ratio_table(&plan.p_inf, &plan.p_alpha, &plan.tree)?;
    let ell = compute_ell(&table, &plan.betas, plan.tree.k_max());
    let mut out = Vec::with_capacity(plan.n_alpha());
    for alpha in plan.alphas() {
        let stored_ell = plan.ell(alpha);
        let recomputed_ell = ell[alpha - 1];
        let stored_h = plan.h_alpha(alpha);
        let (h_difference, inversion_defect, h_ok) = match (recomputed_ell, stored_h) {
            (Ell::Infinite, None) => (0.0, None, true),
            (Ell::Finite(k), Some(h)) if k >= 1 => {
                let inv = check_inversion(
                    plan.p_alpha(alpha),
                    h,
                    &plan.p_inf,
                    &plan.tree,
                    k,
                    &plan.betas,
                );
                match build_h_measure(
                    alpha,
                    plan.p_alpha(alpha),
                    &plan.p_inf,
                    &plan.tree,
                    k,
                    &plan.betas,
                ) {
                    Ok(fresh) if fresh.len() == h.len() => {
                        let diff = fresh
                            .weights()
                            .iter()
                            .zip(h.weights())
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max);
                        (
                            diff,
                            Some(inv),
                            diff <= INVERSION_TOL && inv <= INVERSION_TOL,
                        )
                    }
                    _ => (f64::INFINITY, Some(inv), false),
                }
            }
            _ => (f64::INFINITY, None, false),
        };
        out.push(ConsistencyCheck {
            alpha,
            stored_ell,
            recomputed_ell,
            h_difference,
            inversion_defect,
            pass: h_ok && stored_ell == recomputed_ell,
        });
    }
    Ok(out)
}

/// Exact ν(d(X_α, X∞) > 2^{-k} Δ) against ε_h, for `h ≥ ℓ(α) ≥ k`. When
/// ℓ(α) = ∞ any `h ≥ k` is accepted.
pub fn verify_cc_bound(plan: &CouplingPlan, k: usize, alpha: usize, h: usize) -> Result<CcBound> {
    if alpha == 0 || alpha > plan.n_alpha() {
        return Err(Error::Domain(format!("alpha {alpha} out of range")));
    }
    let ell = plan.ell(alpha);
    let ok = k >= 1
        && match ell {
            Ell::Finite(l) => h >= l && l >= k,
            Ell::Infinite => h >= k,
        };
    if !ok {
        return Err(Error::Domain(format!(
            "need h ≥ ℓ(α) ≥ k, got h = {h}, ℓ({alpha}) = {ell}, k = {k}"
        )));
    }
    let radius = plan.tree.delta_at(k);
    let blocks = enumerate_nu_blocks(plan, &[alpha], |v| {
        plan.space.dist(v.x(alpha), v.s()) > radius
    })?;
    let mut conditional_part = 0.0;
    let mut remainder_part = 0.0;
    for b in &blocks {
        if ell.covers(b.j) {
            conditional_part += b.weight * b.conditional;
        } else {
            remainder_part += b.weight * b.conditional;
        }
    }
    let mass = conditional_part + remainder_part;
    let bound = plan.tree.eps_at(h);
    Ok(CcBound {
        alpha,
        k,
        h,
        mass,
        conditional_part,
        remainder_part,
        bound,
        pass: mass <= bound,
    })
}

/// Every admissible `(α, k, h)` with `h ≤ k_max`.
pub fn verify_all_cc_bounds(plan: &CouplingPlan) -> Result<Vec<CcBound>> {
    let k_max = plan.tree.k_max();
    let mut out = Vec::new();
    for alpha in plan.alphas() {
        let (top, h_from) = match plan.ell(alpha) {
            Ell::Finite(l) => (l.min(k_max), l),
            Ell::Infinite => (k_max, 1),
        };
        for k in 1..=top {
            for h in h_from.max(k)..=k_max {
                out.push(verify_cc_bound(plan, k, alpha, h)?);
            }
        }
    }
    Ok(out)
}

/// Exact mass of `∪_{ℓ(α) ≥ k} {d(X_α, X∞) > 2^{-k} Δ}`, through the
/// product-form complement.
pub fn tail_union_mass(plan: &CouplingPlan, k: usize) -> Result<(usize, f64)> {
    let alphas: Vec<usize> = plan
        .alphas()
        .filter(|&a| plan.ell(a) >= Ell::Finite(k))
        .collect();
    if alphas.is_empty() {
        return Ok((0, 0.0));
    }
    let radius = plan.tree.delta_at(k);
    let stay = enumerate_product_event(
        plan,
        &alphas,
        |_| true,
        |s, _, x| plan.space.dist(x, s) <= radius,
    )?;
    Ok((alphas.len(), (1.0 - stay).max(0.0)))
}

pub fn verify_tail_bound(plan: &CouplingPlan, k: usize) -> Result<TailBound> {
    if k == 0 || k > plan.tree.k_max() {
        return Err(Error::Domain(format!(
            "level {k} outside 1..={}",
            plan.tree.k_max()
        )));
    }
    let (alphas, mass) = tail_union_mass(plan, k)?;
    let bound = 2.0 * plan.tree.eps_at(k);
    Ok(TailBound {
        k,
        alphas,
        mass,
        bound,
        pass: mass <= bound,
    })
}

/// Empirical rate of `max_{ℓ(α) ≥ k} d(X_α, X∞) > 2^{-k} Δ` per level, against
/// the tail bound (+3σ) and against the exact union mass (±3σ).
pub fn verify_as_convergence(plan: &CouplingPlan, seed: u64, n: usize) -> Result<AsConvergence> {
    if n < MIN_AS_SAMPLES {
        return Err(Error::Domain(format!(
            "need at least {MIN_AS_SAMPLES} samples, got {n}"
        )));
    }
    let samples = sample_coupled(plan, seed, n)?;
    let mut rows = Vec::with_capacity(plan.tree.k_max());
    for k in 1..=plan.tree.k_max() {
        let radius = plan.tree.delta_at(k);
        let alphas: Vec<usize> = plan
            .alphas()
            .filter(|&a| plan.ell(a) >= Ell::Finite(k))
            .collect();
        let hits = samples
            .iter()
            .filter(|w| {
                alphas
                    .iter()
                    .any(|&a| plan.space.dist(w.x(a), w.s) > radius)
            })
            .count();
        let rate = hits as f64 / n as f64;
        let bound = 2.0 * plan.tree.eps_at(k);
        let sigma_bound = binomial_sigma(bound, n);
        let (_, exact) = tail_union_mass(plan, k)?;
        let sigma_exact = binomial_sigma(exact, n);
        rows.push(AsRow {
            k,
            rate,
            bound,
            sigma_bound,
            pass_bound: rate <= bound + 3.0 * sigma_bound,
            exact,
            sigma_exact,
            pass_agreement: (rate - exact).abs() <= 3.0 * sigma_exact,
        });
    }
    Ok(AsConvergence { seed, n, rows })
}

fn binomial_sigma(p: f64, n: usize) -> f64 {
    let p = p.clamp(0.0, 1.0);
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Sup distance between the empirical CDF of `samples` and `f`, against the
/// DKW radius `sqrt(ln(2 / (1 − confidence)) / (2n))`.
pub fn dkw_check(samples: &[f64], f: &StepCdf, confidence: f64) -> Result<DkwResult> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Domain(format!(
            "confidence {confidence} outside (0, 1)"
        )));
    }
    if samples.is_empty() {
        return Err(Error::Domain("no samples".into()));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("non-finite sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut points: Vec<f64> = sorted.clone();
    points.extend_from_slice(f.locations());
    points.sort_by(f64::total_cmp);
    points.dedup();
    // both CDFs are right-continuous steps with jumps in `points`
    let sup_distance = points
        .iter()
        .map(|&x| {
            let ecdf = sorted.partition_point(|&v| v <= x) as f64 / n as f64;
            (ecdf - cdf_eval(f, x)).abs()
        })
        .fold(0.0, f64::max);
    let bound = ((2.0 / (1.0 - confidence)).ln() / (2.0 * n as f64)).sqrt();
    Ok(DkwResult {
        n,
        sup_distance,
        bound,
        confidence,
        pass: sup_distance <= bound,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub n: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            seed: 42,
            n: 100_000,
        }
    }
}

pub fn verify_plan(plan: &CouplingPlan, options: VerifyOptions) -> Result<VerificationReport> {
    let tree_violations = plan.tree.violations(&plan.space, &plan.p_inf);
    let consistency = verify_consistency(plan)?;
    let marginal_defects = verify_marginals(plan)?;
    let cc_bounds = verify_all_cc_bounds(plan)?;
    let tail_bounds = (1..=plan.tree.k_max())
        .map(|k| verify_tail_bound(plan, k))
        .collect::<Result<Vec<_>>>()?;
    let as_convergence = Some(verify_as_convergence(plan, options.seed, options.n)?);
    Ok(VerificationReport {
        tree_violations,
        consistency,
        marginal_defects,
        cc_bounds,
        tail_bounds,
        as_convergence,
    })
}
