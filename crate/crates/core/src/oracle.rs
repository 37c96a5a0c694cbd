//! Brute-force reference sampler and two-sample goodness of fit.
//!
//! Proposing `X_i ~ f_i` independently and keeping the proposal only when
//! `x_1 < ... < x_m` gives exact draws from `Π f_i(x_i) · 1{ordered}`. Sorting
//! the proposals instead would give ordinary (inid) order statistics, which
//! is a different law.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{validate_family, Distribution};
use crate::error::{Error, Result};
use crate::rng::{open_unit, stream_rng};

/// Consecutive rejections after which a single draw gives up. Reaching it
/// means the acceptance rate is below 1e-6 for this configuration.
pub const INFEASIBLE_WINDOW: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProposalCount {
    pub proposals: u64,
    pub accepted: u64,
}

/// One exact draw from the ordered target by rejection.
pub fn rejection_draw<R: Rng + ?Sized>(
    dists: &[Distribution],
    rng: &mut R,
    count: &mut ProposalCount,
) -> Result<Vec<f64>> {
    validate_family(dists)?;
    let mut x = vec![0.0; dists.len()];
    for _ in 0..INFEASIBLE_WINDOW {
        count.proposals += 1;
        for (xi, d) in x.iter_mut().zip(dists) {
            *xi = d.quantile_unchecked(open_unit(rng));
        }
        if x.windows(2).all(|w| w[0] < w[1]) {
            count.accepted += 1;
            return Ok(x);
        }
    }
    Err(Error::OracleInfeasible {
        proposals: count.proposals,
        accepted: count.accepted,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleBatch {
    pub draws: Vec<Vec<f64>>,
    pub proposals_used: u64,
    pub acceptance_rate: f64,
}

/// `count` rejection draws; draw `i` uses stream `i` of `seed`.
pub fn oracle_batch(dists: &[Distribution], count: usize, seed: u64) -> Result<OracleBatch> {
    if count == 0 {
        return Err(Error::Domain("draw count must be at least 1".into()));
    }
    validate_family(dists)?;
    let results: Vec<(Vec<f64>, ProposalCount)> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            let mut c = ProposalCount::default();
            rejection_draw(dists, &mut rng, &mut c).map(|x| (x, c))
        })
        .collect::<Result<_>>()?;
    let proposals_used: u64 = results.iter().map(|(_, c)| c.proposals).sum();
    let draws: Vec<Vec<f64>> = results.into_iter().map(|(x, _)| x).collect();
    let acceptance_rate = draws.len() as f64 / proposals_used as f64;
    Ok(OracleBatch {
        draws,
        proposals_used,
        acceptance_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic p-value.
pub fn two_sample_distance(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Domain("both samples must be nonempty".into()));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::Domain("samples must not contain NaN".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let ne = na * nb / (na + nb);
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_sf(lambda),
    })
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form of the cdf converges fast for small lambda.
        let y = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let cdf: f64 = (1..=6)
            .map(|k| {
                let odd = (2 * k - 1) as f64;
                (odd * odd * y).exp()
            })
            .sum::<f64>()
            * (2.0 * std::f64::consts::PI).sqrt()
            / lambda;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}
