//! Full verification of the reference plan, with the event-bound rows split
//! into the conditional and remainder contributions.

use skorohod::instance::InstanceSpec;
use skorohod::verification::{verify_plan, VerifyOptions};
use skorohod::{build_partition_tree, build_plan};

fn main() -> skorohod::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/reference.json");
    let spec = InstanceSpec::load(path.as_ref())?;
    let space = spec.space()?.clone();
    let p_inf = spec.p_inf()?;
    let tree = build_partition_tree(&space, &p_inf, spec.delta, spec.eps, spec.k_max)?;
    let plan = build_plan(space, p_inf, spec.family()?, tree, spec.beta)?;

    let report = verify_plan(
        &plan,
        VerifyOptions {
            seed: spec.seed,
            n: 20_000,
        },
    )?;
    println!("{}", report.summary());
    for row in report.cc_bounds.iter().filter(|r| r.h == r.k).take(6) {
        println!(
            "alpha={} k={}: mass {:.4} = {:.4} (cell part) + {:.4} (H part), bound {:.4}",
            row.alpha, row.k, row.mass, row.conditional_part, row.remainder_part, row.bound
        );
    }
    for t in &report.tail_bounds {
        println!("tail k={}: {:.4} vs {:.4}", t.k, t.mass, t.bound);
    }
    println!("failed checks: {:?}", report.failed_checks());
    Ok(())
}
