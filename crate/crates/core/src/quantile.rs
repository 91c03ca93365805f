//! Step CDFs on the real line, their generalized inverses, and the quantile
//! coupling `X_n = F_n^{-1}(U)` driven by a single uniform `U`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::MASS_TOL;

/// Right-continuous CDF of a finitely supported law:
/// `F(x) = Σ_{loc ≤ x} mass`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStepCdf", into = "RawStepCdf")]
pub struct StepCdf {
    locations: Vec<f64>,
    masses: Vec<f64>,
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawStepCdf {
    locations: Vec<f64>,
    masses: Vec<f64>,
}

impl TryFrom<RawStepCdf> for StepCdf {
    type Error = Error;

    fn try_from(raw: RawStepCdf) -> Result<Self> {
        StepCdf::new(raw.locations, raw.masses)
    }
}

impl From<StepCdf> for RawStepCdf {
    fn from(f: StepCdf) -> Self {
        RawStepCdf {
            locations: f.locations,
            masses: f.masses,
        }
    }
}

impl StepCdf {
    pub fn new(locations: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        if locations.is_empty() || locations.len() != masses.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} locations for {} masses",
                locations.len(),
                masses.len()
            )));
        }
        if locations.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidMeasure("non-finite jump location".into()));
        }
        if locations.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidMeasure(
                "jump locations must be strictly increasing".into(),
            ));
        }
        if masses.iter().any(|m| !(*m > 0.0) || !m.is_finite()) {
            return Err(Error::InvalidMeasure("jump masses must be positive".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidMeasure(format!(
                "jump masses sum to {total}, expected 1"
            )));
        }
        let mut cumulative: Vec<f64> = masses
            .iter()
            .scan(0.0, |acc, m| {
                *acc += m;
                Some(*acc)
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(StepCdf {
            locations,
            masses,
            cumulative,
        })
    }

    /// Drops zero masses before building the CDF.
    pub fn from_atoms(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let (locations, masses) = atoms.into_iter().filter(|(_, m)| *m > 0.0).unzip();
        Self::new(locations, masses)
    }

    pub fn point_mass(at: f64) -> Self {
        StepCdf {
            locations: vec![at],
            masses: vec![1.0],
            cumulative: vec![1.0],
        }
    }

    /// Law of a Bernoulli(p) variable on {0, 1}.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!(
                "Bernoulli parameter {p} outside [0, 1]"
            )));
        }
        Self::from_atoms([(0.0, 1.0 - p), (1.0, p)])
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// `F(x_i)` at each jump.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn is_jump(&self, x: f64) -> bool {
        self.locations.binary_search_by(|l| l.total_cmp(&x)).is_ok()
    }

    /// `u` values where `F^{-1}` jumps: `F(x_i)` for every jump but the last.
    pub fn inverse_discontinuities(&self) -> &[f64] {
        &self.cumulative[..self.cumulative.len() - 1]
    }
}

pub fn cdf_eval(f: &StepCdf, x: f64) -> f64 {
    let below = f.locations.partition_point(|&l| l <= x);
    if below == 0 {
        0.0
    } else {
        f.cumulative[below - 1]
    }
}

/// `F^{-1}(y) = inf { x : F(x) ≥ y }` for `y ∈ (0, 1]`.
pub fn generalized_inverse(f: &StepCdf, y: f64) -> Result<f64> {
    if !(y > 0.0 && y <= 1.0) {
        return Err(Error::Domain(format!("quantile level {y} outside (0, 1]")));
    }
    let i = f.cumulative.partition_point(|&c| c < y);
    Ok(f.locations[i.min(f.locations.len() - 1)])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeDefect {
    pub x: f64,
    /// `|F_n(x) − F∞(x)|` for n = 1, 2, …
    pub defects: Vec<f64>,
    pub last: f64,
    pub max: f64,
    /// Least-squares slope of `ln defect` against `ln n` over the non-zero
    /// defects; `None` with fewer than two of them.
    pub log_log_slope: Option<f64>,
    pub converging: bool,
}

/// CDF defects at continuity points of the limit. Probes on a jump of `f_inf`
/// are rejected.
pub fn weak_convergence_defect(
    fs: &[StepCdf],
    f_inf: &StepCdf,
    probes: &[f64],
) -> Result<Vec<ProbeDefect>> {
    let bad: Vec<f64> = probes
        .iter()
        .copied()
        .filter(|&x| f_inf.is_jump(x))
        .collect();
    if !bad.is_empty() {
        return Err(Error::DiscontinuityProbe(bad));
    }
    Ok(probes
        .iter()
        .map(|&x| {
            let limit = cdf_eval(f_inf, x);
            let defects: Vec<f64> = fs.iter().map(|f| (cdf_eval(f, x) - limit).abs()).collect();
            let last = defects.last().copied().unwrap_or(0.0);
            let max = defects.iter().copied().fold(0.0, f64::max);
            let log_log_slope = fit_slope(&defects);
            let converging = last <= MASS_TOL || log_log_slope.is_some_and(|s| s < 0.0);
            ProbeDefect {
                x,
                defects,
                last,
                max,
                log_log_slope,
                converging,
            }
        })
        .collect())
}

fn fit_slope(defects: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = defects
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 0.0)
        .map(|(i, d)| (((i + 1) as f64).ln(), d.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// The path `n ↦ F_n^{-1}(u)` for one uniform value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantilePath {
    pub u: f64,
    pub values: Vec<f64>,
    pub limit: f64,
    /// First `n` (1-based) from which the path stays equal to the limit.
    pub settled_from: Option<usize>,
}

impl QuantilePath {
    pub fn converged(&self) -> bool {
        self.settled_from.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileCoupling {
    pub paths: Vec<QuantilePath>,
    /// Grid values whose path does not settle on the limit within the family.
    pub failures: Vec<f64>,
    /// Jump points of `F∞^{-1}` inside (0, 1).
    pub limit_discontinuities: Vec<f64>,
}

impl QuantileCoupling {
    /// Whether every failure sits on a discontinuity of `F∞^{-1}`.
    pub fn failures_on_discontinuities(&self) -> bool {
        self.failures
            .iter()
            .all(|u| self.limit_discontinuities.contains(u))
    }
}

pub fn quantile_couple(
    fs: &[StepCdf],
    f_inf: &StepCdf,
    u_grid: &[f64],
) -> Result<QuantileCoupling> {
    if let Some(u) = u_grid.iter().find(|u| !(**u > 0.0 && **u < 1.0)) {
        return Err(Error::Domain(format!("grid value {u} outside (0, 1)")));
    }
    let mut paths = Vec::with_capacity(u_grid.len());
    let mut failures = Vec::new();
    for &u in u_grid {
        let limit = generalized_inverse(f_inf, u)?;
        let values = fs
            .iter()
            .map(|f| generalized_inverse(f, u))
            .collect::<Result<Vec<_>>>()?;
        let tail = values.iter().rev().take_while(|&&v| v == limit).count();
        let settled_from = (tail > 0).then(|| values.len() - tail + 1);
        if settled_from.is_none() {
            failures.push(u);
        }
        paths.push(QuantilePath {
            u,
            values,
            limit,
            settled_from,
        });
    }
    Ok(QuantileCoupling {
        paths,
        failures,
        limit_discontinuities: f_inf.inverse_discontinuities().to_vec(),
    })
}

/// `count` midpoints `(i − 1/2) / count` of a uniform partition of (0, 1).
pub fn uniform_grid(count: usize) -> Vec<f64> {
    (1..=count)
        .map(|i| (i as f64 - 0.5) / count as f64)
        .collect()
}
