//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line and
//! then asserts the criterion at its stated tolerance and runtime.
//!
//! Runs without the libtest harness so every line is printed:
//! `cargo test -p skorohod --test acceptance`.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use skorohod::coupling::coordinate_law;
use skorohod::instance::InstanceSpec;
use skorohod::quantile::{generalized_inverse, quantile_couple, uniform_grid};
use skorohod::verification::{verify_as_convergence, VerificationReport};
use skorohod::{DiscreteMeasure, Ell};

fn report(n: u32, pass: bool, took: Duration, limit: Duration, detail: &str) {
    let status = if pass && took <= limit {
        "PASS"
    } else {
        "FAIL"
    };
    println!(
        "criterion {n}: {status} ({:.3}s, limit {}s) {detail}",
        took.as_secs_f64(),
        limit.as_secs()
    );
}

fn criterion_1_partition_invariants() {
    let start = Instant::now();
    let (space, p_inf, tree) = reference_tree();
    let took = start.elapsed();

    let n = space.len();
    let mut problems = Vec::new();
    for k in 1..=tree.k_max() {
        let level = tree.level(k);
        let mut seen = vec![0usize; n];
        for c in &level.cells {
            for x in c.iter() {
                seen[x] += 1;
            }
        }
        if seen.iter().any(|&c| c != 1) {
            problems.push(format!("k={k}: not a partition {seen:?}"));
        }
        let bound = 0.5f64.powi(k as i32);
        for c in cells_at(&tree, k) {
            let d = brute_diameter(&space, &c);
            if d > bound {
                problems.push(format!("k={k}: cell {c:?} has diameter {d} > {bound}"));
            }
        }
        let rem: Vec<usize> = level.cells[0].iter().collect();
        let rm = set_mass(&p_inf, &rem);
        if rm > 0.1 * bound {
            problems.push(format!("k={k}: remainder mass {rm} > {}", 0.1 * bound));
        }
        if k > 1 {
            let parent = tree.level(k - 1);
            for c in &level.cells {
                if !c.is_empty() && !parent.cells.iter().any(|p| c.is_subset(p)) {
                    problems.push(format!("k={k}: cell {c:?} straddles parents"));
                }
            }
        }
    }
    problems.extend(tree.violations(&space, &p_inf));
    let limit = Duration::from_secs(1);
    report(
        1,
        problems.is_empty(),
        took,
        limit,
        &format!("{} violations", problems.len()),
    );
    assert!(problems.is_empty(), "{problems:#?}");
    assert!(took <= limit);
}

fn criterion_2_remainder_measures() {
    let start = Instant::now();
    let plan = reference_plan();
    let took = start.elapsed();

    let n = plan.space.len();
    let mut worst_mass: f64 = 0.0;
    let mut worst_inversion: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    let mut negative = 0;
    let mut missing = 0;
    for alpha in plan.alphas() {
        let Some(l) = plan.ell(alpha).finite() else {
            missing += 1;
            continue;
        };
        let h = plan.h_alpha(alpha).unwrap();
        let pa = plan.p_alpha(alpha);
        let bs = beta_star(l);
        // cells with positive P∞ mass, remainder included
        let cells: Vec<Vec<usize>> = plan
            .tree
            .level(l)
            .cells
            .iter()
            .map(|c| c.iter().collect::<Vec<_>>())
            .filter(|c| set_mass(&plan.p_inf, c) > 1e-12)
            .collect();
        let mixture = |x: usize| -> f64 {
            cells
                .iter()
                .filter(|c| c.contains(&x))
                .map(|c| pa.weight(x) / set_mass(pa, c) * set_mass(&plan.p_inf, c))
                .sum()
        };
        let mut raw_sum = 0.0;
        for x in 0..n {
            let raw = pa.weight(x) / (1.0 - bs) - bs / (1.0 - bs) * mixture(x);
            raw_sum += raw;
            if h.weight(x) < 0.0 || raw < -1e-12 {
                negative += 1;
            }
            worst_oracle = worst_oracle.max((raw.max(0.0) - h.weight(x)).abs());
            let rebuilt = (1.0 - bs) * h.weight(x) + bs * mixture(x);
            worst_inversion = worst_inversion.max((pa.weight(x) - rebuilt).abs());
        }
        let stored: f64 = h.weights().iter().sum();
        worst_mass = worst_mass
            .max((stored - 1.0).abs())
            .max((raw_sum - 1.0).abs());
    }
    let pass = negative == 0
        && missing == 0
        && worst_mass <= 1e-12
        && worst_inversion <= 1e-10
        && worst_oracle <= 1e-10;
    let limit = Duration::from_secs(1);
    report(
        2,
        pass,
        took,
        limit,
        &format!(
            "negative={negative} |ΣH−1|≤{worst_mass:.1e} inversion≤{worst_inversion:.1e} oracle≤{worst_oracle:.1e}"
        ),
    );
    assert!(pass);
    assert!(took <= limit);
}

fn criterion_3_marginal_laws() {
    let start = Instant::now();
    let plan = reference_plan();
    // same family with every third member replaced by an exact copy of P∞
    let mut family = plan.p_alpha.clone();
    for (i, m) in family.iter_mut().enumerate() {
        if i % 3 == 2 {
            *m = plan.p_inf.clone();
        }
    }
    let mixed = plan_for(family);
    let copies = mixed
        .alphas()
        .filter(|&a| mixed.ell(a).is_infinite())
        .count();

    let mut worst: f64 = 0.0;
    for p in [&plan, &mixed] {
        let law = coordinate_law(p, 0).unwrap();
        worst = worst.max(tv(&law, p.p_inf.weights()));
        for alpha in p.alphas() {
            let law = coordinate_law(p, alpha).unwrap();
            let target = match p.ell(alpha) {
                Ell::Infinite => p.p_inf.weights(),
                Ell::Finite(_) => p.p_alpha(alpha).weights(),
            };
            worst = worst.max(tv(&law, target));
        }
    }
    let took = start.elapsed();
    let pass = worst <= 1e-10 && copies == 6;
    let limit = Duration::from_secs(5);
    report(
        3,
        pass,
        took,
        limit,
        &format!("max TV {worst:.2e}, {copies} copies of P∞ with ℓ = ∞"),
    );
    assert!(pass);
    assert!(took <= limit);
}

fn criterion_4_event_bound() {
    let start = Instant::now();
    let plan = reference_plan();
    let k_max = plan.tree.k_max();
    let mut checked = 0;
    let mut failed = 0;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    let mut worst_tv_floor: f64 = 0.0;
    let n = plan.space.len();
    let separation = (0..n)
        .flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b)))
        .map(|(a, b)| plan.space.dist(a, b))
        .fold(f64::INFINITY, f64::min);
    for alpha in plan.alphas() {
        let l = plan.ell(alpha).finite().unwrap();
        for k in 1..=l {
            let r = 0.5f64.powi(k as i32);
            let mass = skorohod::coupling::enumerate_nu(&plan, &[alpha], |v| {
                plan.space.dist(v.x(alpha), v.s()) > r
            })
            .unwrap();
            worst_oracle = worst_oracle.max((mass - oracle_far_mass(&plan, alpha, r)).abs());
            for h in l..=k_max {
                let bound = 0.5f64.powi(h as i32) * 0.1;
                checked += 1;
                if mass > bound {
                    failed += 1;
                    worst_ratio = worst_ratio.max(mass / bound);
                }
            }
        }
        // every coupling puts at least TV(P_α, P∞) on {X_α ≠ X∞}, which is
        // the event once 2^{-k} is below the closest pair of points
        if 0.5f64.powi(l as i32) < separation {
            let floor = tv(plan.p_alpha(alpha).weights(), plan.p_inf.weights());
            let bound = 0.5f64.powi(l as i32) * 0.1;
            worst_tv_floor = worst_tv_floor.max(floor / bound);
        }
    }
    let took = start.elapsed();
    let pass = failed == 0;
    let limit = Duration::from_secs(10);
    report(
        4,
        pass,
        took,
        limit,
        &format!(
            "{failed}/{checked} (α,k,h) exceed 2^-h·0.1, worst ratio {worst_ratio:.1}; \
             any-coupling floor TV/bound up to {worst_tv_floor:.1} at k = ℓ(α) ≥ 5; oracle gap {worst_oracle:.1e}"
        ),
    );
    assert!(
        worst_oracle <= 1e-12,
        "enumeration disagrees with the direct formula"
    );
    assert!(
        pass,
        "event bound violated on {failed} of {checked} triples"
    );
    assert!(took <= limit);
}

/// `1 − Σ_j β_j Σ_s P∞(s) Π_α ν_{j,s,α}(B(s, r])`, with the j-axis cut at
/// k_max + 1 because no kernel changes beyond ℓ ≤ k_max.
fn oracle_union(plan: &skorohod::CouplingPlan, alphas: &[usize], r: f64) -> f64 {
    let k_max = plan.tree.k_max() as u64;
    let n = plan.space.len();
    let mut stay = 0.0;
    for j in 1..=k_max + 1 {
        let w = if j <= k_max {
            beta(j as usize)
        } else {
            0.5f64.powi(k_max as i32)
        };
        for s in 0..n {
            let mut prod = plan.p_inf.weight(s);
            for &a in alphas {
                let kern = plan.kernel(j, s, a).unwrap();
                prod *= (0..n)
                    .filter(|&x| plan.space.dist(x, s) <= r)
                    .map(|x| kern.weight(x))
                    .sum::<f64>();
            }
            stay += w * prod;
        }
    }
    1.0 - stay
}

fn criterion_5_tail_bound() {
    let start = Instant::now();
    let plan = reference_plan();
    let mut lines = Vec::new();
    let mut failed = 0;
    let mut worst_oracle: f64 = 0.0;
    for k in 1..=plan.tree.k_max() {
        let tb = skorohod::verification::verify_tail_bound(&plan, k).unwrap();
        let alphas: Vec<usize> = plan
            .alphas()
            .filter(|&a| plan.ell(a) >= Ell::Finite(k))
            .collect();
        let oracle = oracle_union(&plan, &alphas, 0.5f64.powi(k as i32));
        worst_oracle = worst_oracle.max((oracle - tb.mass).abs());
        let bound = 2.0 * 0.5f64.powi(k as i32) * 0.1;
        if tb.mass > bound {
            failed += 1;
        }
        lines.push(format!("k={k}:{:.4}/{:.4}", tb.mass, bound));
    }
    let took = start.elapsed();
    let limit = Duration::from_secs(10);
    report(
        5,
        failed == 0,
        took,
        limit,
        &format!(
            "{failed} levels over bound [{}]; oracle gap {worst_oracle:.1e}",
            lines.join(" ")
        ),
    );
    assert!(
        worst_oracle <= 1e-12,
        "enumeration disagrees with the direct formula"
    );
    assert!(failed == 0, "tail bound violated at {failed} levels");
    assert!(took <= limit);
}

fn criterion_6_almost_sure_statistical() {
    let start = Instant::now();
    let plan = reference_plan();
    let spec = reference();
    let conv = verify_as_convergence(&plan, spec.seed, spec.samples).unwrap();
    let took = start.elapsed();
    let bound_fail = conv.rows.iter().filter(|r| !r.pass_bound).count();
    let agree_fail = conv.rows.iter().filter(|r| !r.pass_agreement).count();
    let rates: Vec<String> = conv
        .rows
        .iter()
        .map(|r| format!("k={}:{:.4}~{:.4}", r.k, r.rate, r.exact))
        .collect();
    let limit = Duration::from_secs(30);
    report(
        6,
        bound_fail == 0 && agree_fail == 0,
        took,
        limit,
        &format!(
            "n={} bound failures {bound_fail}, exact-agreement failures {agree_fail} [{}]",
            conv.n,
            rates.join(" ")
        ),
    );
    assert_eq!(agree_fail, 0, "sampler disagrees with exact tail masses");
    assert_eq!(bound_fail, 0, "empirical rates exceed the tail bound");
    assert!(took <= limit);
}

fn criterion_7_quantile_coupling() {
    let start = Instant::now();
    let spec = InstanceSpec::load(&data("bernoulli.json")).unwrap();
    let (fs, limit_cdf) = spec.line_family().unwrap();
    let grid: Vec<f64> = uniform_grid(10_000)
        .into_iter()
        .filter(|&u| u != 0.5)
        .collect();
    let off = quantile_couple(&fs, &limit_cdf, &grid).unwrap();
    let mut with_half = grid.clone();
    with_half.push(0.5);
    let on = quantile_couple(&fs, &limit_cdf, &with_half).unwrap();
    let took = start.elapsed();

    // F_n^{-1}(u) = 0 iff u ≤ F_n(0) = 1/2 − 1/(4n), increasing in n: a grid
    // point below 1/2 settles only once F_n(0) reaches it, so the last
    // member of the finite family leaves a window (F_N(0), 1/2) unsettled
    let horizon = fs.len() as f64;
    let last_f0 = 1.0 - (0.5 + 0.25 / horizon);
    let expected: Vec<f64> = grid
        .iter()
        .copied()
        .filter(|&u| u < 0.5 && u > last_f0)
        .collect();
    assert_eq!(
        off.failures, expected,
        "failure set differs from the analytic window"
    );
    assert!(on.failures.contains(&0.5));
    assert_eq!(generalized_inverse(&limit_cdf, 0.5).unwrap(), 0.0);
    assert!(fs
        .iter()
        .all(|f| generalized_inverse(f, 0.5).unwrap() == 1.0));

    let pass = off.failures.is_empty() && on.failures == vec![0.5];
    let limit = Duration::from_secs(5);
    report(
        7,
        pass,
        took,
        limit,
        &format!(
            "{} grid values unsettled by n = {} (window ({:.5}, 0.5)); with 0.5: {} failures",
            off.failures.len(),
            fs.len(),
            last_f0,
            on.failures.len()
        ),
    );
    assert!(
        off.failures.is_empty(),
        "paths not settled: {:?}",
        off.failures
    );
    assert_eq!(on.failures, vec![0.5]);
    assert!(took <= limit);
}

fn verify_exit(plan_path: &std::path::Path, out: &std::path::Path) -> (i32, VerificationReport) {
    let status = Command::new(env!("CARGO_BIN_EXE_skorohod"))
        .args(["verify", "--n", "1000", "--plan"])
        .arg(plan_path)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    let report: VerificationReport =
        serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    (status.status.code().unwrap(), report)
}

fn exact_checks_pass(r: &VerificationReport) -> bool {
    r.consistency.iter().all(|c| c.pass) && r.marginal_defects.iter().all(|m| m.pass)
}

fn criterion_8_mutation_sensitivity() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let plan = reference_plan();
    let file = skorohod::cli::PlanFile {
        diagnostics: plan.diagnostics().unwrap(),
        plan: plan.clone(),
    };
    let base_path = dir.path().join("base.json");
    std::fs::write(&base_path, serde_json::to_string(&file).unwrap()).unwrap();
    let (_, base) = verify_exit(&base_path, &dir.path().join("base_report.json"));
    assert!(
        exact_checks_pass(&base),
        "unmutated plan must pass the exact checks"
    );

    let mut jobs = Vec::new();
    let mut no_ops = Vec::new();
    for alpha in plan.alphas() {
        let Some(h) = plan.h_alpha(alpha) else {
            continue;
        };
        for x in 0..plan.space.len() {
            let mut w = h.weights().to_vec();
            w[x] += 1e-3;
            let mutated = DiscreteMeasure::from_unnormalized(w).unwrap();
            let moved = mutated
                .weights()
                .iter()
                .zip(h.weights())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if moved <= 1e-12 {
                // H_α is a point mass at x (up to rounding): renormalizing
                // undoes the bump
                no_ops.push((alpha, x));
            }
            let mut f = file.clone();
            f.plan.h_alpha[alpha - 1] = Some(mutated);
            let p = dir.path().join(format!("m_{alpha}_{x}.json"));
            std::fs::write(&p, serde_json::to_string(&f).unwrap()).unwrap();
            jobs.push((alpha, x, p));
        }
    }
    let outcomes: Vec<(usize, usize, i32, bool)> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .chunks(jobs.len().div_ceil(8))
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|(alpha, x, p)| {
                            let (code, r) = verify_exit(p, &p.with_extension("report.json"));
                            (*alpha, *x, code, exact_checks_pass(&r))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().unwrap())
            .collect()
    });
    let took = start.elapsed();
    let zero_exit: Vec<_> = outcomes.iter().filter(|o| o.2 == 0).collect();
    let undetected: Vec<_> = outcomes
        .iter()
        .filter(|o| o.3 && !no_ops.contains(&(o.0, o.1)))
        .collect();
    let pass = zero_exit.is_empty() && undetected.is_empty();
    let limit = Duration::from_secs(30);
    report(
        8,
        pass,
        took,
        limit,
        &format!(
            "{} mutations, {} exited 0, {} changed plans not caught by the exact checks, \
             {} no-op on a point-mass H {:?}",
            outcomes.len(),
            zero_exit.len(),
            undetected.len(),
            no_ops.len(),
            no_ops
        ),
    );
    assert!(zero_exit.is_empty(), "{zero_exit:?}");
    assert!(undetected.is_empty(), "{undetected:?}");
    assert!(took <= limit);
}

fn main() {
    let criteria: [(&str, fn()); 8] = [
        ("partition invariants", criterion_1_partition_invariants),
        ("remainder measures", criterion_2_remainder_measures),
        ("marginal laws", criterion_3_marginal_laws),
        ("event bound", criterion_4_event_bound),
        ("tail bound", criterion_5_tail_bound),
        ("almost-sure convergence, sampled", criterion_6_almost_sure_statistical),
        ("quantile coupling", criterion_7_quantile_coupling),
        ("mutation sensitivity", criterion_8_mutation_sensitivity),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        if std::panic::catch_unwind(run).is_err() {
            failed.push(name);
        }
    }
    println!(
        "acceptance: {} of {} criteria pass",
        criteria.len() - failed.len(),
        criteria.len()
    );
    if !failed.is_empty() {
        println!("failing: {}", failed.join(", "));
        std::process::exit(1);
    }
}
