//! Build the nested continuity partition of the reference instance and print
//! the per-level summary.

use skorohod::instance::InstanceSpec;
use skorohod::partition::build_partition_tree;

fn main() -> skorohod::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/reference.json");
    let spec = InstanceSpec::load(path.as_ref())?;
    let space = spec.space()?;
    let p_inf = spec.p_inf()?;
    let tree = build_partition_tree(space, &p_inf, spec.delta, spec.eps, spec.k_max)?;

    for s in tree.summary(space, &p_inf) {
        println!(
            "k={} cells={} remainder {:.4} (<= {:.4}) max diameter {:.4} (<= {:.4})",
            s.k, s.q, s.remainder_mass, s.remainder_bound, s.max_diameter, s.diameter_bound
        );
    }
    for k in 1..=tree.k_max() {
        let cells: Vec<Vec<&str>> = tree
            .level(k)
            .cells
            .iter()
            .map(|c| c.iter().map(|x| space.label(x)).collect())
            .collect();
        println!(
            "level {k}: remainder {:?}, cells {:?}",
            cells[0],
            &cells[1..]
        );
    }
    assert!(tree.violations(space, &p_inf).is_empty());
    Ok(())
}
