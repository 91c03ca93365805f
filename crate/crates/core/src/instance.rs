//! Instance files: a finite metric space with P∞ and a family of measures,
//! or a "line" instance made of step CDFs.

use serde::{Deserialize, Serialize};

use crate::coupling::BetaSchedule;
use crate::error::{Error, Result};
use crate::metric::{DiscreteMeasure, FiniteMetricSpace};
use crate::quantile::StepCdf;

fn default_delta() -> f64 {
    1.0
}
fn default_eps() -> f64 {
    0.1
}
fn default_k_max() -> usize {
    6
}
fn default_seed() -> u64 {
    42
}
fn default_samples() -> usize {
    100_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<FiniteMetricSpace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_inf: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<LineSpec>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default)]
    pub beta: BetaSchedule,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

/// How the family (P_α)_{α = 1..N} is given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum FamilySpec {
    /// `P_α = (1 − 1/α) P∞ + (1/α) Q`, α = 1..count.
    Contamination {
        q: Vec<f64>,
        count: usize,
    },
    Explicit {
        measures: Vec<Vec<f64>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineSpec {
    pub limit: StepCdf,
    pub family: LineFamily,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LineFamily {
    Explicit {
        cdfs: Vec<StepCdf>,
    },
    /// Bernoulli(base + scale / n), n = 1..count.
    BernoulliShift {
        base: f64,
        scale: f64,
        count: usize,
    },
}

/// `(1 − 1/α) P∞ + (1/α) Q` for α = 1..count.
pub fn contamination_family(
    p_inf: &DiscreteMeasure,
    q: &DiscreteMeasure,
    count: usize,
) -> Result<Vec<DiscreteMeasure>> {
    (1..=count)
        .map(|alpha| p_inf.mix(q, 1.0 / alpha as f64))
        .collect()
}

impl InstanceSpec {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: InstanceSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.line.is_none() && self.space.is_none() {
            return Err(Error::Domain(
                "instance needs either a `space` or a `line` section".into(),
            ));
        }
        Ok(())
    }

    pub fn is_line(&self) -> bool {
        self.line.is_some()
    }

    pub fn space(&self) -> Result<&FiniteMetricSpace> {
        self.space
            .as_ref()
            .ok_or_else(|| Error::Domain("instance has no metric space".into()))
    }

    pub fn p_inf(&self) -> Result<DiscreteMeasure> {
        let w = self
            .p_inf
            .clone()
            .ok_or_else(|| Error::Domain("instance has no p_inf".into()))?;
        let m = DiscreteMeasure::new(w)?;
        m.check_space(self.space()?)?;
        Ok(m)
    }

    pub fn family(&self) -> Result<Vec<DiscreteMeasure>> {
        let p_inf = self.p_inf()?;
        let family = match self
            .family
            .as_ref()
            .ok_or_else(|| Error::Domain("instance has no family".into()))?
        {
            FamilySpec::Contamination { q, count } => {
                let q = DiscreteMeasure::new(q.clone())?;
                contamination_family(&p_inf, &q, *count)?
            }
            FamilySpec::Explicit { measures } => measures
                .iter()
                .map(|w| DiscreteMeasure::new(w.clone()))
                .collect::<Result<Vec<_>>>()?,
        };
        for m in &family {
            m.check_space(self.space()?)?;
        }
        Ok(family)
    }

    /// `(F_1, …, F_N)` and `F∞` of a line instance.
    pub fn line_family(&self) -> Result<(Vec<StepCdf>, StepCdf)> {
        let line = self
            .line
            .as_ref()
            .ok_or_else(|| Error::Domain("instance is not in line mode".into()))?;
        let fs = match &line.family {
            LineFamily::Explicit { cdfs } => cdfs.clone(),
            LineFamily::BernoulliShift { base, scale, count } => (1..=*count)
                .map(|n| StepCdf::bernoulli(base + scale / n as f64))
                .collect::<Result<Vec<_>>>()?,
        };
        Ok((fs, line.limit.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contamination_expands() {
        let p = DiscreteMeasure::new(vec![0.5, 0.5]).unwrap();
        let q = DiscreteMeasure::point_mass(2, 1);
        let fam = contamination_family(&p, &q, 4).unwrap();
        assert_eq!(fam[0], q);
        assert!((fam[3].weight(1) - (0.75 * 0.5 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn parses_line_instances() {
        let text = r#"{
            "line": {
                "limit": {"locations": [0.0, 1.0], "masses": [0.5, 0.5]},
                "family": {"rule": "bernoulli_shift", "base": 0.5, "scale": 0.25, "count": 3}
            }
        }"#;
        let spec: InstanceSpec = serde_json::from_str(text).unwrap();
        let (fs, lim) = spec.line_family().unwrap();
        assert_eq!(fs.len(), 3);
        assert_eq!(fs[0].masses(), &[0.25, 0.75]);
        assert_eq!(lim.locations(), &[0.0, 1.0]);
        assert!(spec.family().is_err());
    }

    #[test]
    fn rejects_asymmetric_space() {
        let text = r#"{
            "space": {"labels": ["a", "b"], "dist": [[0.0, 1.0], [2.0, 0.0]]},
            "p_inf": [0.5, 0.5]
        }"#;
        let err = serde_json::from_str::<InstanceSpec>(text).unwrap_err();
        assert!(err.to_string().contains("asymmetric"));
    }
}
