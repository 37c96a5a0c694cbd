//! The forward Gibbs kernel for the order-constrained target
//! `f(x) ∝ Π f_i(x_i) · 1{x_1 < … < x_m}`.
//!
//! Component `i` is redrawn from `f_i` truncated to the interval between its
//! freshly updated left neighbour and its not yet updated right neighbour,
//! using one uniform per component. Components are visited in ascending
//! order, so the sweep is a deterministic, componentwise monotone function of
//! the previous state once the uniforms are fixed.

use rand::Rng;

use crate::distributions::Distribution;
use crate::error::{Error, Result};
use crate::rng::open_unit;

/// `F^{-1}(F(lower) + (F(upper) - F(lower)) u)`, clamped into `[lower, upper]`.
///
/// The probability is formed in the lower tail when it is at most one half
/// and in the upper (survival) tail otherwise. Equal bounds return the common
/// value.
pub fn truncated_draw(dist: &Distribution, lower: f64, upper: f64, u: f64) -> Result<f64> {
    if lower == upper {
        return Ok(lower);
    }
    if !(lower < upper) {
        return Err(Error::Contract(format!(
            "truncation interval must satisfy lower < upper, got [{lower}, {upper}]"
        )));
    }
    let (cdf_lo, sf_lo) = dist.tails(lower);
    let (cdf_hi, sf_hi) = dist.tails(upper);
    let p = cdf_lo + (cdf_hi - cdf_lo) * u;
    let x = if p <= 0.5 {
        dist.quantile_unchecked(p)
    } else {
        dist.inverse_sf_unchecked(sf_lo - (sf_lo - sf_hi) * u)
    };
    Ok(x.clamp(lower, upper))
}

/// One full Gibbs sweep, updating `state` in place.
///
/// The left neighbour of the first component is the support's lower end and
/// the right neighbour of the last is the support's upper end.
pub fn gibbs_sweep_in_place(dists: &[Distribution], state: &mut [f64], u: &[f64]) -> Result<()> {
    let m = dists.len();
    if state.len() != m || u.len() != m {
        return Err(Error::Contract(format!(
            "sweep needs {m} state values and uniforms, got {} and {}",
            state.len(),
            u.len()
        )));
    }
    if m == 0 {
        return Ok(());
    }
    let support = dists[0].support();
    for i in 0..m {
        let left = if i == 0 { support.lower } else { state[i - 1] };
        let right = if i + 1 == m {
            support.upper
        } else {
            state[i + 1]
        };
        state[i] = truncated_draw(&dists[i], left, right, u[i])?;
    }
    Ok(())
}

pub fn gibbs_sweep(dists: &[Distribution], state: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let mut next = state.to_vec();
    gibbs_sweep_in_place(dists, &mut next, u)?;
    Ok(next)
}

/// Conventional forward Gibbs sampling started from `init`, keeping every
/// `thin`-th state after `burn_in` sweeps.
pub fn run_forward<R: Rng + ?Sized>(
    dists: &[Distribution],
    init: &[f64],
    rng: &mut R,
    burn_in: usize,
    thin: usize,
    count: usize,
) -> Result<Vec<Vec<f64>>> {
    let thin = thin.max(1);
    let mut state = init.to_vec();
    let mut u = vec![0.0; dists.len()];
    let mut step = |state: &mut Vec<f64>, rng: &mut R| -> Result<()> {
        u.iter_mut().for_each(|v| *v = open_unit(rng));
        gibbs_sweep_in_place(dists, state, &u)
    };
    for _ in 0..burn_in {
        step(&mut state, rng)?;
    }
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        for _ in 0..thin {
            step(&mut state, rng)?;
        }
        out.push(state.clone());
    }
    Ok(out)
}
