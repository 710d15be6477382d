use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regular 2-D grid of cells; densities are evaluated at cell centers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub n: [usize; 2],
}

impl GridSpec {
    pub fn new(lo: [f64; 2], hi: [f64; 2], n: [usize; 2]) -> Result<Self> {
        let g = Self { lo, hi, n };
        if n[0] == 0 || n[1] == 0 || !(0..2).all(|k| hi[k] > lo[k] && lo[k].is_finite() && hi[k].is_finite()) {
            return Err(Error::InvalidArgument(format!("bad grid {g:?}")));
        }
        Ok(g)
    }

    pub fn step(&self, k: usize) -> f64 {
        (self.hi[k] - self.lo[k]) / self.n[k] as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.step(0) * self.step(1)
    }

    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.lo[0] + (i as f64 + 0.5) * self.step(0),
            self.lo[1] + (j as f64 + 0.5) * self.step(1),
        ]
    }

    /// Cell containing `theta`, if it lies on the grid.
    pub fn locate(&self, theta: &[f64]) -> Option<(usize, usize)> {
        let mut idx = [0usize; 2];
        for k in 0..2 {
            let u = (theta[k] - self.lo[k]) / self.step(k);
            if !(u >= 0.0) || u > self.n[k] as f64 {
                return None;
            }
            idx[k] = (u.floor() as usize).min(self.n[k] - 1);
        }
        Some((idx[0], idx[1]))
    }

    /// Densities at all cell centers, `values[i * n1 + j]`.
    pub fn evaluate<F: Fn(&[f64]) -> f64 + Sync>(&self, density: F) -> Vec<f64> {
        use rayon::prelude::*;
        (0..self.n[0] * self.n[1])
            .into_par_iter()
            .map(|c| density(&self.center(c / self.n[1], c % self.n[1])))
            .collect()
    }
}

/// Highest-density region at a given probability level on a grid.
#[derive(Clone, Debug)]
pub struct HpdRegion {
    pub grid: GridSpec,
    pub level: f64,
    pub threshold: f64,
    /// Normalized mass of the included cells.
    pub mass: f64,
    inside: Vec<bool>,
    values: Vec<f64>,
}

impl HpdRegion {
    pub fn from_values(grid: &GridSpec, values: Vec<f64>, level: f64) -> Result<Self> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::InvalidArgument(format!("HPD level {level} not in (0, 1)")));
        }
        if values.len() != grid.n[0] * grid.n[1] {
            return Err(Error::InvalidArgument("grid values have the wrong length".into()));
        }
        let clean: Vec<f64> = values.iter().map(|v| if v.is_finite() && *v > 0.0 { *v } else { 0.0 }).collect();
        let total: f64 = clean.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateDensity);
        }
        let mut order: Vec<usize> = (0..clean.len()).collect();
        order.sort_by(|a, b| clean[*b].total_cmp(&clean[*a]));
        let mut acc = 0.0;
        let mut threshold = clean[order[0]];
        for &c in &order {
            acc += clean[c] / total;
            threshold = clean[c];
            if acc >= level {
                break;
            }
        }
        let inside: Vec<bool> = clean.iter().map(|v| *v >= threshold && *v > 0.0).collect();
        let mass = clean.iter().zip(&inside).filter(|(_, i)| **i).map(|(v, _)| v).sum::<f64>() / total;
        Ok(Self {
            grid: grid.clone(),
            level,
            threshold,
            mass,
            inside,
            values: clean,
        })
    }

    pub fn compute<F: Fn(&[f64]) -> f64 + Sync>(density: F, grid: &GridSpec, level: f64) -> Result<Self> {
        Self::from_values(grid, grid.evaluate(density), level)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_inside(&self, i: usize, j: usize) -> bool {
        self.inside[i * self.grid.n[1] + j]
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        self.grid.locate(theta).is_some_and(|(i, j)| self.is_inside(i, j))
    }

    /// Included cells as `(i, j)` pairs.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        let n1 = self.grid.n[1];
        (0..self.inside.len()).filter(|c| self.inside[*c]).map(|c| (c / n1, c % n1)).collect()
    }

    pub fn n_cells(&self) -> usize {
        self.inside.iter().filter(|b| **b).count()
    }

    /// Number of 4-connected components of the region.
    pub fn components(&self) -> usize {
        let (n0, n1) = (self.grid.n[0], self.grid.n[1]);
        let mut seen = vec![false; self.inside.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.inside.len() {
            if !self.inside[start] || seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(c) = stack.pop() {
                let (i, j) = (c / n1, c % n1);
                let mut nb = Vec::with_capacity(4);
                if i > 0 {
                    nb.push(c - n1);
                }
                if i + 1 < n0 {
                    nb.push(c + n1);
                }
                if j > 0 {
                    nb.push(c - 1);
                }
                if j + 1 < n1 {
                    nb.push(c + 1);
                }
                for q in nb {
                    if self.inside[q] && !seen[q] {
                        seen[q] = true;
                        stack.push(q);
                    }
                }
            }
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(x: &[f64], c: [f64; 2]) -> f64 {
        (-0.5 * ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2))).exp()
    }

    #[test]
    fn isotropic_region_is_a_single_disc() {
        let g = GridSpec::new([-5.0, -5.0], [5.0, 5.0], [100, 100]).unwrap();
        let r = HpdRegion::compute(|x| gauss(x, [0.0, 0.0]), &g, 0.9).unwrap();
        assert_eq!(r.components(), 1);
        let total: f64 = r.values().iter().sum();
        let max_cell = r.values().iter().cloned().fold(0.0, f64::max) / total;
        assert!(r.mass >= 0.9 && r.mass <= 0.9 + max_cell + 1e-12);
        // radius of the 90% disc of a standard 2-D normal is sqrt(-2 ln 0.1)
        let rad = (-2.0 * 0.1f64.ln()).sqrt();
        assert!(r.contains(&[rad - 0.15, 0.0]));
        assert!(!r.contains(&[rad + 0.15, 0.0]));
        assert!(!r.contains(&[7.0, 0.0]));
    }

    #[test]
    fn bimodal_splits() {
        let g = GridSpec::new([-6.0, -3.0], [6.0, 3.0], [120, 60]).unwrap();
        let r = HpdRegion::compute(|x| gauss(x, [-3.0, 0.0]) + gauss(x, [3.0, 0.0]), &g, 0.5).unwrap();
        assert_eq!(r.components(), 2);
    }

    #[test]
    fn zero_density_is_degenerate() {
        let g = GridSpec::new([0.0, 0.0], [1.0, 1.0], [4, 4]).unwrap();
        assert!(matches!(HpdRegion::compute(|_| 0.0, &g, 0.5), Err(Error::DegenerateDensity)));
    }
}
