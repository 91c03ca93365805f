//! F_n^{-1}(U) for Bernoulli(1/2 + 1/(4n)): every path settles except at the
//! jump of the limit quantile function.

use skorohod::instance::InstanceSpec;
use skorohod::quantile::{quantile_couple, weak_convergence_defect};

fn main() -> skorohod::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/bernoulli.json");
    let spec = InstanceSpec::load(path.as_ref())?;
    let (fs, limit) = spec.line_family()?;

    let probe = weak_convergence_defect(&fs, &limit, &[0.5])?;
    println!(
        "|F_n(0.5) - F(0.5)|: n=1 {:.4}, n={} {:.5}, log-log slope {:.3}",
        probe[0].defects[0],
        fs.len(),
        probe[0].last,
        probe[0].log_log_slope.unwrap_or(f64::NAN)
    );

    let table = quantile_couple(&fs, &limit, &[0.1, 0.49, 0.499, 0.5, 0.75])?;
    for p in &table.paths {
        println!(
            "u={:<5} limit {} settled from n = {:?}",
            p.u, p.limit, p.settled_from
        );
    }
    println!(
        "unsettled {:?}, jumps of the limit inverse {:?}",
        table.failures, table.limit_discontinuities
    );
    Ok(())
}
