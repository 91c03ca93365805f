//! Levels ℓ(α) and remainder measures H_α for the contamination family.

use skorohod::instance::InstanceSpec;
use skorohod::{build_partition_tree, build_plan};

fn main() -> skorohod::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/reference.json");
    let spec = InstanceSpec::load(path.as_ref())?;
    let space = spec.space()?.clone();
    let p_inf = spec.p_inf()?;
    let tree = build_partition_tree(&space, &p_inf, spec.delta, spec.eps, spec.k_max)?;
    let plan = build_plan(space, p_inf, spec.family()?, tree, spec.beta)?;

    for d in plan.diagnostics()? {
        let h = plan.h_alpha(d.alpha).map(|h| {
            h.weights()
                .iter()
                .map(|w| format!("{w:.3}"))
                .collect::<Vec<_>>()
                .join(" ")
        });
        println!(
            "alpha={:2} ell={} TV={:.4} eta in [{:.3}, {:.3}] H=[{}] defect={:.1e}",
            d.alpha,
            d.ell,
            d.tv_to_limit,
            d.eta_min,
            d.eta_max,
            h.unwrap_or_default(),
            d.inversion_defect.unwrap_or(0.0)
        );
    }
    Ok(())
}
