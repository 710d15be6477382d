use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SolutionField;
use crate::error::{Error, Result};
use crate::gp::{sample_variance, Dataset};
use crate::richards::SECONDS_PER_DAY;

/// Where and when the field is observed: depths (m, positive down) times
/// days. Rows are ordered day-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservationDesign {
    pub depths: Vec<f64>,
    pub days: Vec<f64>,
}

impl Default for ObservationDesign {
    /// Daily readings over 90 days at 0.05, 0.10, ..., 0.30 m.
    fn default() -> Self {
        Self {
            depths: (1..=6).map(|i| 0.05 * i as f64).collect(),
            days: (1..=90).map(|d| d as f64).collect(),
        }
    }
}

impl ObservationDesign {
    pub fn len(&self) -> usize {
        self.depths.len() * self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(z, t)` pairs in row order, `z = -depth`, `t` in seconds.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.days
            .iter()
            .flat_map(|d| self.depths.iter().map(move |z| (-z, d * SECONDS_PER_DAY)))
            .collect()
    }
}

/// Interpolates the field at the design points and adds iid Gaussian noise
/// with variance `b` times the sample variance of the noiseless values.
pub fn sample_observations(
    field: &SolutionField,
    design: &ObservationDesign,
    noise_rel_var: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(noise_rel_var >= 0.0 && noise_rel_var.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "relative noise variance must be non-negative, got {noise_rel_var}"
        )));
    }
    if design.is_empty() {
        return Err(Error::InvalidArgument("empty observation design".into()));
    }
    let pts = design.points();
    let clean = pts
        .iter()
        .map(|(z, t)| field.interpolate(*z, *t))
        .collect::<Result<Vec<_>>>()?;
    let sd = (noise_rel_var * sample_variance(&clean)).sqrt();
    let mut y = clean;
    if sd > 0.0 {
        let normal = Normal::new(0.0, sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in y.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    let z: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let t: Vec<f64> = pts.iter().map(|p| p.1).collect();
    Dataset::from_columns(&z, &t, &y)
}
