//! Balls, spheres, diameters and total variation on a small planar space.

use skorohod::metric::{ball, boundary_mass, conditional, diameter, total_variation};
use skorohod::{DiscreteMeasure, FiniteMetricSpace};

fn main() -> skorohod::Result<()> {
    let pts = [(0.0, 0.0), (0.3, 0.0), (0.0, 0.4), (1.0, 1.0)];
    let space = FiniteMetricSpace::from_fn(pts.len(), |i, j| {
        let (a, b) = (pts[i], pts[j]);
        f64::hypot(a.0 - b.0, a.1 - b.1)
    })?;
    let mu = DiscreteMeasure::new(vec![0.4, 0.3, 0.2, 0.1])?;
    let nu = DiscreteMeasure::uniform(4);

    let b = ball(&space, 0, 0.45)?;
    println!(
        "B(p0, 0.45) = {:?}, diameter {:.3}",
        b.iter().collect::<Vec<_>>(),
        diameter(&space, &b)
    );
    // the sphere at radius 0.4 holds p2, so 0.4 is not a continuity radius
    println!(
        "mass on {{d(p0, .) = 0.4}}: {}",
        boundary_mass(&space, 0, 0.4, &mu)?
    );
    println!(
        "mass on {{d(p0, .) = 0.45}}: {}",
        boundary_mass(&space, 0, 0.45, &mu)?
    );
    println!("TV(mu, uniform) = {:.3}", total_variation(&mu, &nu)?);
    println!(
        "mu restricted to the ball: {:?}",
        conditional(&mu, &b)?.weights()
    );
    Ok(())
}
