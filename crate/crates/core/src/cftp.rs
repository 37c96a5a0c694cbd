//! Epsilon-perfect coupling from the past for the order-constrained target.
//!
//! A draw starts a pair of bounding chains at time `-n`, runs both forward to
//! time 0 with the same stored uniforms, and accepts when the squared distance
//! between them at time 0 falls below `epsilon`. Otherwise it restarts one step
//! further back, reusing every uniform already generated.
//!
//! * The upper chain starts from one sweep out of the all-`+inf` state.
//! * The lower chain cannot start from `-inf` (it would stay there), so its
//!   start is built by a descending recursion over the last component at time
//!   `-n-m+1` down to the first component at time `-n`. That single scalar is
//!   used as the start for every lower component.
//!
//! Uniforms live in a [`UniformStore`] indexed by time `t <= 0`. Depth `d`
//! holds the vector for time `-d`; deeper vectors are generated strictly in
//! order, so each stored vector is a fixed function of the stream seed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{validate_family, Distribution};
use crate::error::{Error, Result};
use crate::gibbs::truncated_draw;
use crate::rng::{open_unit, stream_rng};
use crate::stats::SummaryStats;

/// Lower values exceeding their upper partner by at most this relative amount
/// are rounding noise from the two inverse-cdf routes and are snapped onto it.
const SANDWICH_RTOL: f64 = 1e-10;

pub const DEFAULT_MAX_N: u64 = 10_000;

/// Time-indexed uniform vectors `V_t`, `t <= 0`, generated once and reused.
#[derive(Debug, Clone)]
pub struct UniformStore<R = ChaCha8Rng> {
    rng: R,
    dim: usize,
    data: Vec<f64>,
}

impl UniformStore<ChaCha8Rng> {
    pub fn from_seed(dim: usize, seed: u64, stream: u64) -> Self {
        Self::new(dim, stream_rng(seed, stream))
    }
}

impl<R: Rng> UniformStore<R> {
    pub fn new(dim: usize, rng: R) -> Self {
        Self {
            rng,
            dim,
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored vectors; they cover times `0, -1, ..., -(depth - 1)`.
    pub fn depth(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    /// Earliest stored time, or `None` when empty.
    pub fn earliest_time(&self) -> Option<i64> {
        (self.depth() > 0).then(|| -(self.depth() as i64 - 1))
    }

    /// Generates vectors back to and including time `t`.
    pub fn ensure_time(&mut self, t: i64) {
        let needed = (-t).max(0) as usize + 1;
        while self.depth() < needed {
            for _ in 0..self.dim {
                self.data.push(open_unit(&mut self.rng));
            }
        }
    }

    pub fn get(&self, t: i64) -> Option<&[f64]> {
        if t > 0 {
            return None;
        }
        let d = (-t) as usize;
        (d < self.depth()).then(|| &self.data[d * self.dim..(d + 1) * self.dim])
    }

    fn at(&self, t: i64) -> Result<&[f64]> {
        self.get(t)
            .ok_or_else(|| Error::Contract(format!("uniform store has no vector for time {t}")))
    }
}

/// Lower and upper bounding states at one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupledState {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub time: i64,
}

impl CoupledState {
    /// `sum_i (lower_i - upper_i)^2`.
    pub fn gap(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (l - u) * (l - u))
            .sum()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    fn check_sandwich(&self) -> Result<()> {
        for (component, (&lower, &upper)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lower <= upper) {
                return Err(Error::Sandwich {
                    time: self.time,
                    component,
                    lower,
                    upper,
                });
            }
        }
        Ok(())
    }
}

/// One accepted draw together with the bracket it was read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfectDraw {
    pub values: Vec<f64>,
    /// Backward coupling time: the start depth `n` that met the criterion.
    pub bct: u64,
    pub gap: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backoff {
    /// `n -> n + 1`, giving the minimal coupling depth.
    #[default]
    Increment,
    /// `n -> 2n`; fewer sweeps overall, coarser coupling times.
    Doubling,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CftpConfig {
    pub epsilon: f64,
    pub max_n: u64,
    pub backoff: Backoff,
}

impl CftpConfig {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            max_n: DEFAULT_MAX_N,
            backoff: Backoff::Increment,
        }
    }

    pub fn with_max_n(mut self, max_n: u64) -> Self {
        self.max_n = max_n;
        self
    }

    pub fn with_backoff(mut self, backoff: Backoff) -> Self {
        self.backoff = backoff;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Domain(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.max_n == 0 {
            return Err(Error::Domain("max_n must be at least 1".into()));
        }
        Ok(())
    }
}

/// Upper start at time `-n` from that time's uniforms: one sweep out of the
/// all-`+inf` state.
pub fn upper_start(dists: &[Distribution], u: &[f64]) -> Result<Vec<f64>> {
    let m = dists.len();
    if u.len() != m {
        return Err(Error::Contract(format!(
            "expected {m} uniforms, got {}",
            u.len()
        )));
    }
    let support = dists
        .first()
        .map(|d| d.support())
        .unwrap_or(crate::Support::REAL);
    let mut out = Vec::with_capacity(m);
    let mut left = support.lower;
    for (d, &v) in dists.iter().zip(u) {
        left = truncated_draw(d, left, support.upper, v)?;
        out.push(left);
    }
    Ok(out)
}

/// Scalar lower start at time `-n`.
///
/// Begins with `F_m^{-1}(V_m)` at time `-n-m+1` and walks down the components,
/// component `i` at time `-n-i+1` being drawn from `F_i` truncated above by
/// component `i+1` from one step earlier.
pub fn lower_start<R: Rng>(dists: &[Distribution], store: &UniformStore<R>, n: u64) -> Result<f64> {
    let m = dists.len();
    if m == 0 {
        return Err(Error::Contract("no distributions".into()));
    }
    let n = n as i64;
    let m_i = m as i64;
    let support = dists[0].support();
    let mut x = support.upper;
    // component index i (0-based) uses time -n - i
    for i in (0..m).rev() {
        let t = -n - i as i64;
        debug_assert!(t >= -n - m_i + 1);
        let v = store.at(t)?[i];
        x = truncated_draw(&dists[i], support.lower, x, v)?;
    }
    Ok(x)
}

/// Advances both bounding chains by one sweep with the shared uniforms `u`.
pub fn coupled_sweep(
    dists: &[Distribution],
    state: &CoupledState,
    u: &[f64],
) -> Result<CoupledState> {
    let mut next = state.clone();
    coupled_sweep_in_place(dists, &mut next, u)?;
    Ok(next)
}

fn coupled_sweep_in_place(
    dists: &[Distribution],
    state: &mut CoupledState,
    u: &[f64],
) -> Result<()> {
    let m = dists.len();
    if state.lower.len() != m || state.upper.len() != m || u.len() != m {
        return Err(Error::Contract(format!("coupled sweep needs {m}-vectors")));
    }
    state.check_sandwich()?;
    let support = dists[0].support();
    let time = state.time + 1;
    for i in 0..m {
        let d = &dists[i];
        let (l_left, u_left) = if i == 0 {
            (support.lower, support.lower)
        } else {
            (state.lower[i - 1], state.upper[i - 1])
        };
        let (l_right, u_right) = if i + 1 == m {
            (support.upper, support.upper)
        } else {
            (state.lower[i + 1], state.upper[i + 1])
        };
        let up = truncated_draw(d, u_left, u_right, u[i])?;
        let mut lo = truncated_draw(d, l_left, l_right, u[i])?;
        if lo > up {
            if lo - up <= SANDWICH_RTOL * up.abs().max(lo.abs()) {
                lo = up;
            } else {
                return Err(Error::Sandwich {
                    time,
                    component: i,
                    lower: lo,
                    upper: up,
                });
            }
        }
        state.lower[i] = lo;
        state.upper[i] = up;
    }
    state.time = time;
    Ok(())
}

/// Runs `state` forward to time 0 with the stored uniforms.
pub fn run_to_zero<R: Rng>(
    dists: &[Distribution],
    state: &mut CoupledState,
    store: &UniformStore<R>,
) -> Result<()> {
    while state.time < 0 {
        let u = store.at(state.time + 1)?;
        coupled_sweep_in_place(dists, state, u)?;
    }
    Ok(())
}

/// Both bounding chains at time `-n`.
pub fn start_state<R: Rng>(
    dists: &[Distribution],
    store: &UniformStore<R>,
    n: u64,
) -> Result<CoupledState> {
    let time = -(n as i64);
    let upper = upper_start(dists, store.at(time)?)?;
    let mut start = lower_start(dists, store, n)?;
    // the first lower component and the first upper component come from the
    // same uniform, so they may differ by rounding in either direction
    let floor = upper[0];
    if start > floor && start - floor <= SANDWICH_RTOL * start.abs().max(floor.abs()) {
        start = floor;
    }
    let state = CoupledState {
        lower: vec![start; dists.len()],
        upper,
        time,
    };
    state.check_sandwich()?;
    Ok(state)
}

/// One epsilon-perfect draw.
pub fn perfect_draw<R: Rng>(
    dists: &[Distribution],
    config: &CftpConfig,
    store: &mut UniformStore<R>,
) -> Result<PerfectDraw> {
    validate_family(dists)?;
    config.validate()?;
    let m = dists.len();
    if store.dim() != m {
        return Err(Error::Contract(format!(
            "store dimension {} != {m}",
            store.dim()
        )));
    }
    let mut n: u64 = 1;
    let mut last_gap = f64::INFINITY;
    loop {
        store.ensure_time(-(n as i64) - m as i64 + 1);
        let mut state = start_state(dists, store, n)?;
        run_to_zero(dists, &mut state, store)?;
        let gap = state.gap();
        if gap < config.epsilon {
            return Ok(PerfectDraw {
                values: state.midpoint(),
                bct: n,
                gap,
                lower: state.lower,
                upper: state.upper,
            });
        }
        if !gap.is_nan() {
            last_gap = gap;
        }
        if n >= config.max_n {
            return Err(Error::NonCoalescence {
                max_n: config.max_n,
                last_gap,
            });
        }
        n = match config.backoff {
            Backoff::Increment => n + 1,
            Backoff::Doubling => (2 * n).min(config.max_n),
        };
    }
}

/// Mean, extremes and standard error of a set of coupling times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BctSummary {
    pub mean_bct: f64,
    pub min_bct: u64,
    pub max_bct: u64,
    pub se_bct: f64,
    pub n_draws: u64,
    pub epsilon: f64,
    pub seed: u64,
}

impl BctSummary {
    pub fn from_bcts(bcts: &[u64], epsilon: f64, seed: u64) -> Result<Self> {
        let as_f64: Vec<f64> = bcts.iter().map(|&b| b as f64).collect();
        let s = SummaryStats::from_slice(&as_f64)?;
        Ok(Self {
            mean_bct: s.mean,
            min_bct: s.min as u64,
            max_bct: s.max as u64,
            se_bct: s.std_error(),
            n_draws: s.n,
            epsilon,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    /// Empty when the batch was run with `keep_draws = false`.
    pub draws: Vec<PerfectDraw>,
    pub bcts: Vec<u64>,
    pub summary: BctSummary,
}

/// `count` independent draws; draw `i` uses stream `i` of `seed`.
pub fn draw_batch(
    dists: &[Distribution],
    config: &CftpConfig,
    count: usize,
    seed: u64,
    keep_draws: bool,
) -> Result<Batch> {
    draw_batch_from(dists, config, count, seed, 0, keep_draws)
}

/// As [`draw_batch`], with draw `i` on stream `first_stream + i`.
pub fn draw_batch_from(
    dists: &[Distribution],
    config: &CftpConfig,
    count: usize,
    seed: u64,
    first_stream: u64,
    keep_draws: bool,
) -> Result<Batch> {
    if count == 0 {
        return Err(Error::Domain("draw count must be at least 1".into()));
    }
    validate_family(dists)?;
    config.validate()?;
    let m = dists.len();
    let results: Vec<PerfectDraw> = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut store = UniformStore::from_seed(m, seed, first_stream + i);
            perfect_draw(dists, config, &mut store).map(|mut d| {
                if !keep_draws {
                    d.values = Vec::new();
                    d.lower = Vec::new();
                    d.upper = Vec::new();
                }
                d
            })
        })
        .collect::<Result<_>>()?;
    let bcts: Vec<u64> = results.iter().map(|d| d.bct).collect();
    let summary = BctSummary::from_bcts(&bcts, config.epsilon, seed)?;
    let draws = if keep_draws { results } else { Vec::new() };
    Ok(Batch {
        draws,
        bcts,
        summary,
    })
}
