use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::GaussianBlock;
use crate::error::Result;
use crate::linalg::{cholesky_jittered, max_diagonal};

/// `n` iid draws from the block, one per row. Deterministic given `seed`.
pub fn sample_gaussian(block: &GaussianBlock, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let q = block.len();
    let mut out = DMatrix::zeros(n, q);
    if max_diagonal(&block.covariance) == 0.0 {
        for i in 0..n {
            out.row_mut(i).copy_from(&block.mean.transpose());
        }
        return Ok(out);
    }
    let l = cholesky_jittered(&block.covariance)?.l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..n {
        let z = DVector::from_iterator(q, (0..q).map(|_| StandardNormal.sample(&mut rng)));
        let draw = &block.mean + &l * z;
        out.row_mut(i).copy_from(&draw.transpose());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{Derivative, Label};

    fn block(mean: Vec<f64>, cov: DMatrix<f64>) -> GaussianBlock {
        let labels = (0..mean.len())
            .map(|i| Label { point: i, derivative: Derivative::VALUE })
            .collect();
        GaussianBlock {
            mean: DVector::from_vec(mean),
            covariance: cov,
            labels,
        }
    }

    #[test]
    fn degenerate_block_returns_mean() {
        let b = block(vec![0.0, 1.5], DMatrix::zeros(2, 2));
        let s = sample_gaussian(&b, 5, 1).unwrap();
        for i in 0..5 {
            assert_eq!(s[(i, 0)], 0.0);
            assert_eq!(s[(i, 1)], 1.5);
        }
    }

    #[test]
    fn identity_sample_means() {
        let b = block(vec![1.0, -2.0, 0.5], DMatrix::identity(3, 3));
        let s = sample_gaussian(&b, 10_000, 42).unwrap();
        for j in 0..3 {
            let m = s.column(j).mean();
            assert!((m - b.mean[j]).abs() < 0.05, "coord {j}: {m}");
        }
    }

    #[test]
    fn seeded_draws_are_reproducible() {
        let b = block(vec![0.0, 0.0], DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]));
        let a = sample_gaussian(&b, 50, 9).unwrap();
        let c = sample_gaussian(&b, 50, 9).unwrap();
        assert_eq!(a, c);
    }
}
