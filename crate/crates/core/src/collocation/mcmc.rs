use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Output of a random-walk Metropolis-Hastings run. Entry `k` is the state
/// after iteration `k + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Chain {
    pub states: Vec<Vec<f64>>,
    pub log_target: Vec<f64>,
    pub accepted: Vec<bool>,
    pub acceptance_rate: f64,
    pub seed: u64,
    pub proposal_sd: Vec<f64>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn burn_in(&self, burn_in_frac: f64) -> usize {
        (self.len() as f64 * burn_in_frac).floor() as usize
    }
}

/// Gaussian random-walk Metropolis-Hastings. Non-finite target values count
/// as zero density.
pub fn metropolis_hastings<F>(
    mut log_target: F,
    init: &[f64],
    proposal_sd: &[f64],
    iters: usize,
    seed: u64,
) -> Result<Chain>
where
    F: FnMut(&[f64]) -> f64,
{
    if proposal_sd.len() != init.len() || proposal_sd.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidArgument("proposal scales do not match the state".into()));
    }
    let sanitize = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
    let mut cur = init.to_vec();
    let mut lp = sanitize(log_target(&cur));
    if lp == f64::NEG_INFINITY {
        return Err(Error::InvalidStart);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chain = Chain {
        states: Vec::with_capacity(iters),
        log_target: Vec::with_capacity(iters),
        accepted: Vec::with_capacity(iters),
        acceptance_rate: 0.0,
        seed,
        proposal_sd: proposal_sd.to_vec(),
    };
    let mut n_acc = 0usize;
    let mut prop = cur.clone();
    for _ in 0..iters {
        for (p, (c, s)) in prop.iter_mut().zip(cur.iter().zip(proposal_sd)) {
            let e: f64 = rng.sample(StandardNormal);
            *p = c + s * e;
        }
        let lp_new = sanitize(log_target(&prop));
        let u: f64 = rng.random();
        let accept = lp_new > f64::NEG_INFINITY && u.ln() < lp_new - lp;
        if accept {
            cur.copy_from_slice(&prop);
            lp = lp_new;
            n_acc += 1;
        }
        chain.states.push(cur.clone());
        chain.log_target.push(lp);
        chain.accepted.push(accept);
    }
    chain.acceptance_rate = if iters == 0 {
        0.0
    } else {
        n_acc as f64 / iters as f64
    };
    Ok(chain)
}

/// One retained state after thinning.
#[derive(Clone, Debug, PartialEq)]
pub struct ThinnedDraw {
    /// Zero-based position in the chain.
    pub index: usize,
    pub theta: Vec<f64>,
    pub log_target: f64,
}

/// `n_t` states at equal strides from the post-burn-in segment, ending with
/// the final state.
pub fn thin_chain(chain: &Chain, burn_in_frac: f64, n_t: usize) -> Result<Vec<ThinnedDraw>> {
    if !(0.0..1.0).contains(&burn_in_frac) {
        return Err(Error::Config(format!("burn-in fraction {burn_in_frac} not in [0, 1)")));
    }
    let burn = chain.burn_in(burn_in_frac);
    let tail = chain.len() - burn;
    if n_t == 0 || tail < n_t {
        return Err(Error::Config(format!(
            "cannot thin {tail} post-burn-in states to {n_t}"
        )));
    }
    let stride = tail / n_t;
    let last = chain.len() - 1;
    Ok((1..=n_t)
        .map(|k| {
            let index = last - stride * (n_t - k);
            ThinnedDraw {
                index,
                theta: chain.states[index].clone(),
                log_target: chain.log_target[index],
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dummy_chain(n: usize) -> Chain {
        Chain {
            states: (0..n).map(|i| vec![i as f64]).collect(),
            log_target: vec![0.0; n],
            accepted: vec![true; n],
            acceptance_rate: 1.0,
            seed: 0,
            proposal_sd: vec![1.0],
        }
    }

    #[test]
    fn stride_rule() {
        let c = dummy_chain(3000);
        let t = thin_chain(&c, 0.5, 15).unwrap();
        let idx: Vec<usize> = t.iter().map(|d| d.index + 1).collect();
        let expect: Vec<usize> = (1..=15).map(|k| 1500 + 100 * k).collect();
        assert_eq!(idx, expect);
    }

    #[test]
    fn whole_tail_and_single_state() {
        let c = dummy_chain(20);
        let t = thin_chain(&c, 0.5, 10).unwrap();
        assert_eq!(t.iter().map(|d| d.index).collect::<Vec<_>>(), (10..20).collect::<Vec<_>>());
        let t = thin_chain(&c, 0.5, 1).unwrap();
        assert_eq!(t[0].index, 19);
        assert!(thin_chain(&c, 0.5, 11).is_err());
    }

    #[test]
    fn invalid_start_rejected() {
        let r = metropolis_hastings(|_| f64::NEG_INFINITY, &[0.0], &[1.0], 10, 1);
        assert!(matches!(r, Err(Error::InvalidStart)));
    }

    #[test]
    fn zero_density_proposals_rejected() {
        let c = metropolis_hastings(
            |x| if x[0] < 0.0 { f64::NEG_INFINITY } else { -x[0] },
            &[0.5],
            &[1.0],
            2000,
            3,
        )
        .unwrap();
        assert!(c.states.iter().all(|s| s[0] >= 0.0));
    }
}
