//! Draw from ν and compare empirical events with their exact values.

use skorohod::coupling::{enumerate_nu, sample_coupled};
use skorohod::instance::InstanceSpec;
use skorohod::{build_partition_tree, build_plan};

fn main() -> skorohod::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/reference.json");
    let spec = InstanceSpec::load(path.as_ref())?;
    let space = spec.space()?.clone();
    let p_inf = spec.p_inf()?;
    let tree = build_partition_tree(&space, &p_inf, spec.delta, spec.eps, spec.k_max)?;
    let plan = build_plan(space, p_inf, spec.family()?, tree, spec.beta)?;

    let n = 50_000;
    let samples = sample_coupled(&plan, spec.seed, n)?;
    for w in samples.iter().take(3) {
        println!("j={} s={} x={:?}", w.j, w.s, w.x);
    }
    for alpha in [1, 5, 20] {
        let exact = enumerate_nu(&plan, &[alpha], |v| v.x(alpha) != v.s())?;
        let rate = samples.iter().filter(|w| w.x(alpha) != w.s).count() as f64 / n as f64;
        println!("P(X_{alpha} != X_inf): exact {exact:.4}, sampled {rate:.4}");
    }
    Ok(())
}
