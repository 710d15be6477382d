use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marginal prior on one coordinate of theta.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorKind {
    Uniform { lo: f64, hi: f64 },
    Normal { mu: f64, sd: f64 },
}

/// Product of independent marginals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prior {
    pub coords: Vec<PriorKind>,
}

impl Default for Prior {
    /// Uniform on `beta in (0.75, 3)`, `L_m in (1, 4)`.
    fn default() -> Self {
        Self::uniform(&[(0.75, 3.0), (1.0, 4.0)])
    }
}

const NORMAL_BOX_SDS: f64 = 4.0;

impl Prior {
    pub fn uniform(bounds: &[(f64, f64)]) -> Self {
        Self {
            coords: bounds
                .iter()
                .map(|&(lo, hi)| PriorKind::Uniform { lo, hi })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.coords {
            let ok = match *c {
                PriorKind::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
                PriorKind::Normal { mu, sd } => mu.is_finite() && sd > 0.0 && sd.is_finite(),
            };
            if !ok {
                return Err(Error::InvalidArgument(format!("invalid prior {c:?}")));
            }
        }
        if self.coords.is_empty() {
            return Err(Error::InvalidArgument("prior has no coordinates".into()));
        }
        Ok(())
    }

    /// Log density up to a constant; `-inf` outside the support.
    pub fn log_density(&self, theta: &[f64]) -> f64 {
        if theta.len() != self.coords.len() {
            return f64::NEG_INFINITY;
        }
        let mut lp = 0.0;
        for (c, &x) in self.coords.iter().zip(theta) {
            if !x.is_finite() {
                return f64::NEG_INFINITY;
            }
            match *c {
                PriorKind::Uniform { lo, hi } => {
                    if x <= lo || x >= hi {
                        return f64::NEG_INFINITY;
                    }
                    lp -= (hi - lo).ln();
                }
                PriorKind::Normal { mu, sd } => {
                    let u = (x - mu) / sd;
                    lp -= 0.5 * u * u + sd.ln();
                }
            }
        }
        lp
    }

    /// Bounded box used for grids, proposals and optimization: the support
    /// for uniforms, `mu +- 4 sd` for normals.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.coords
            .iter()
            .map(|c| match *c {
                PriorKind::Uniform { lo, hi } => (lo, hi),
                PriorKind::Normal { mu, sd } => (mu - NORMAL_BOX_SDS * sd, mu + NORMAL_BOX_SDS * sd),
            })
            .collect()
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds().iter().map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.bounds().iter().map(|(a, b)| b - a).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.coords
            .iter()
            .map(|c| match *c {
                PriorKind::Uniform { lo, hi } => rng.random_range(lo..hi),
                PriorKind::Normal { mu, sd } => Normal::new(mu, sd).expect("validated").sample(rng),
            })
            .collect()
    }
}
