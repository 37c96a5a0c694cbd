//! Univariate laws on a common support, each exposing its density, both tail
//! probabilities and both tail inverses.
//!
//! Every family keeps the lower and upper tail in separate closed forms so that
//! truncated inverse-cdf draws deep in either tail keep relative precision.
//! The inverse-gamma inverses have no closed form and are found by safeguarded
//! Newton iteration on the incomplete gamma function.

use std::f64::consts::{FRAC_2_PI, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::special::pair_unchecked;

/// Interval on the extended real line; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Support {
    pub lower: f64,
    pub upper: f64,
}

impl Support {
    pub const POSITIVE: Support = Support {
        lower: 0.0,
        upper: f64::INFINITY,
    };
    pub const REAL: Support = Support {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

impl fmt::Display for Support {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lower, self.upper)
    }
}

/// The six supported families.
///
/// Scale families are written with an inverse scale (`rate`): the exponential
/// density is `rate * exp(-rate x)`, the Weibull density is
/// `shape rate^shape x^(shape-1) exp(-(rate x)^shape)`, and the Cauchy and
/// folded Cauchy densities are `rate f0(rate x)`. The Pareto family is the
/// shifted (Lomax) form `shape / (1 + x)^(shape + 1)` on `(0, inf)`. The
/// inverse gamma density is `rate^shape x^-(shape+1) exp(-rate/x) / Gamma(shape)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Distribution {
    Exponential { rate: f64 },
    Weibull { shape: f64, rate: f64 },
    Cauchy { rate: f64 },
    FoldedCauchy { rate: f64 },
    Pareto { shape: f64 },
    InverseGamma { shape: f64, rate: f64 },
}

fn check_param(name: &str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "probability must lie in [0, 1], got {p}"
        )))
    }
}

impl Distribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        Ok(Self::Exponential {
            rate: check_param("rate", rate)?,
        })
    }

    pub fn weibull(shape: f64, rate: f64) -> Result<Self> {
        Ok(Self::Weibull {
            shape: check_param("shape", shape)?,
            rate: check_param("rate", rate)?,
        })
    }

    pub fn cauchy(rate: f64) -> Result<Self> {
        Ok(Self::Cauchy {
            rate: check_param("rate", rate)?,
        })
    }

    pub fn folded_cauchy(rate: f64) -> Result<Self> {
        Ok(Self::FoldedCauchy {
            rate: check_param("rate", rate)?,
        })
    }

    pub fn pareto(shape: f64) -> Result<Self> {
        Ok(Self::Pareto {
            shape: check_param("shape", shape)?,
        })
    }

    pub fn inverse_gamma(shape: f64, rate: f64) -> Result<Self> {
        Ok(Self::InverseGamma {
            shape: check_param("shape", shape)?,
            rate: check_param("rate", rate)?,
        })
    }

    pub fn support(&self) -> Support {
        match self {
            Self::Cauchy { .. } => Support::REAL,
            _ => Support::POSITIVE,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// Natural log of the density; `-inf` outside the support.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x.is_nan() || !self.support().contains(x) || x.is_infinite() {
            return f64::NEG_INFINITY;
        }
        match *self {
            Self::Exponential { rate } => rate.ln() - rate * x,
            Self::Weibull { shape, rate } => {
                if x == 0.0 {
                    return match shape {
                        s if s < 1.0 => f64::INFINITY,
                        s if s == 1.0 => rate.ln(),
                        _ => f64::NEG_INFINITY,
                    };
                }
                shape.ln() + shape * rate.ln() + (shape - 1.0) * x.ln() - (rate * x).powf(shape)
            }
            Self::Cauchy { rate } => rate.ln() - PI.ln() - (rate * x).powi(2).ln_1p(),
            Self::FoldedCauchy { rate } => FRAC_2_PI.ln() + rate.ln() - (rate * x).powi(2).ln_1p(),
            Self::Pareto { shape } => shape.ln() - (shape + 1.0) * x.ln_1p(),
            Self::InverseGamma { shape, rate } => {
                if x == 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - rate / x
            }
        }
    }

    /// `(F(x), 1 - F(x))`, each computed in its own closed form.
    pub fn tails(&self, x: f64) -> (f64, f64) {
        let s = self.support();
        if x <= s.lower {
            return (0.0, 1.0);
        }
        if x >= s.upper {
            return (1.0, 0.0);
        }
        match *self {
            Self::Exponential { rate } => {
                let t = -rate * x;
                (-t.exp_m1(), t.exp())
            }
            Self::Weibull { shape, rate } => {
                let t = -(rate * x).powf(shape);
                (-t.exp_m1(), t.exp())
            }
            Self::Cauchy { rate } => {
                let y = rate * x;
                let small = (1.0 / y.abs()).atan() / PI;
                if y < 0.0 {
                    (small, 1.0 - small)
                } else {
                    (1.0 - small, small)
                }
            }
            Self::FoldedCauchy { rate } => {
                let y = rate * x;
                if y <= 1.0 {
                    let c = FRAC_2_PI * y.atan();
                    (c, 1.0 - c)
                } else {
                    let s = FRAC_2_PI * (1.0 / y).atan();
                    (1.0 - s, s)
                }
            }
            Self::Pareto { shape } => {
                let t = -shape * x.ln_1p();
                (-t.exp_m1(), t.exp())
            }
            Self::InverseGamma { shape, rate } => {
                let (p, q) = pair_unchecked(shape, rate / x);
                (q, p)
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.tails(x).0
    }

    /// Survival function `1 - F(x)`.
    pub fn sf(&self, x: f64) -> f64 {
        self.tails(x).1
    }

    /// `F^{-1}(p)`. `p = 0` and `p = 1` map to the support ends.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        Ok(self.quantile_unchecked(p))
    }

    /// Inverse survival function: the `x` with `1 - F(x) = s`.
    pub fn inverse_sf(&self, s: f64) -> Result<f64> {
        check_probability(s)?;
        Ok(self.inverse_sf_unchecked(s))
    }

    pub(crate) fn quantile_unchecked(&self, p: f64) -> f64 {
        let support = self.support();
        if p <= 0.0 {
            return support.lower;
        }
        if p >= 1.0 {
            return support.upper;
        }
        match *self {
            Self::Exponential { rate } => -(-p).ln_1p() / rate,
            Self::Weibull { shape, rate } => (-(-p).ln_1p()).powf(shape.recip()) / rate,
            Self::Cauchy { rate } => {
                if p < 0.5 {
                    -1.0 / (rate * (PI * p).tan())
                } else if p > 0.5 {
                    1.0 / (rate * (PI * (1.0 - p)).tan())
                } else {
                    0.0
                }
            }
            Self::FoldedCauchy { rate } => {
                if p <= 0.5 {
                    (0.5 * PI * p).tan() / rate
                } else {
                    1.0 / (rate * (0.5 * PI * (1.0 - p)).tan())
                }
            }
            Self::Pareto { shape } => (-(-p).ln_1p() / shape).exp_m1(),
            Self::InverseGamma { shape, rate } => {
                // F(x) = Q(shape, rate / x)
                rate / gamma_tail_inverse(shape, p, Tail::Upper)
            }
        }
    }

    pub(crate) fn inverse_sf_unchecked(&self, s: f64) -> f64 {
        let support = self.support();
        if s >= 1.0 {
            return support.lower;
        }
        if s <= 0.0 {
            return support.upper;
        }
        match *self {
            Self::Exponential { rate } => -s.ln() / rate,
            Self::Weibull { shape, rate } => (-s.ln()).powf(shape.recip()) / rate,
            Self::Cauchy { .. } => -self.quantile_unchecked(s),
            Self::FoldedCauchy { rate } => {
                if s <= 0.5 {
                    1.0 / (rate * (0.5 * PI * s).tan())
                } else {
                    (0.5 * PI * (1.0 - s)).tan() / rate
                }
            }
            Self::Pareto { shape } => (-s.ln() / shape).exp_m1(),
            Self::InverseGamma { shape, rate } => rate / gamma_tail_inverse(shape, s, Tail::Lower),
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exponential { rate } => write!(f, "exp:{rate}"),
            Self::Weibull { shape, rate } => write!(f, "weibull:{shape}:{rate}"),
            Self::Cauchy { rate } => write!(f, "cauchy:{rate}"),
            Self::FoldedCauchy { rate } => write!(f, "fcauchy:{rate}"),
            Self::Pareto { shape } => write!(f, "pareto:{shape}"),
            Self::InverseGamma { shape, rate } => write!(f, "invgamma:{shape}:{rate}"),
        }
    }
}

impl FromStr for Distribution {
    type Err = Error;

    /// Parses `exp:θ`, `weibull:α:θ`, `cauchy:θ`, `fcauchy:θ`, `pareto:θ` and
    /// `invgamma:α:β`.
    fn from_str(spec: &str) -> Result<Self> {
        let mut parts = spec.trim().split(':');
        let family = parts.next().unwrap_or_default().to_ascii_lowercase();
        let params = parts
            .map(|p| {
                p.trim().parse::<f64>().map_err(|_| {
                    Error::Domain(format!("bad parameter {p:?} in distribution {spec:?}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let arity = |n: usize| -> Result<()> {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::Domain(format!(
                    "distribution {spec:?} expects {n} parameter(s), got {}",
                    params.len()
                )))
            }
        };
        match family.as_str() {
            "exp" => arity(1).and_then(|_| Self::exponential(params[0])),
            "weibull" => arity(2).and_then(|_| Self::weibull(params[0], params[1])),
            "cauchy" => arity(1).and_then(|_| Self::cauchy(params[0])),
            "fcauchy" => arity(1).and_then(|_| Self::folded_cauchy(params[0])),
            "pareto" => arity(1).and_then(|_| Self::pareto(params[0])),
            "invgamma" => arity(2).and_then(|_| Self::inverse_gamma(params[0], params[1])),
            other => Err(Error::Domain(format!(
                "unknown distribution family {other:?}"
            ))),
        }
    }
}

/// Checks that every distribution shares the first one's support.
pub fn validate_family(dists: &[Distribution]) -> Result<()> {
    let first = dists
        .first()
        .ok_or_else(|| Error::Domain("at least one distribution is required".into()))?
        .support();
    for (index, d) in dists.iter().enumerate().skip(1) {
        if d.support() != first {
            return Err(Error::Config {
                index,
                message: format!(
                    "support {} of {d} differs from support {first} of {}",
                    d.support(),
                    dists[0]
                ),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tail {
    Lower,
    Upper,
}

const ROOT_RTOL: f64 = 1e-12;
const ROOT_MAX_ITER: usize = 300;

/// Solves `P(a, y) = target` (lower tail) or `Q(a, y) = target` (upper tail)
/// for `y > 0`, with `0 < target < 1`.
fn gamma_tail_inverse(a: f64, target: f64, tail: Tail) -> f64 {
    // Work in whichever tail is below one half; its complement is exact there.
    let (target, tail) = if target > 0.5 {
        (
            1.0 - target,
            if tail == Tail::Lower {
                Tail::Upper
            } else {
                Tail::Lower
            },
        )
    } else {
        (target, tail)
    };
    let ln_target = target.ln();
    let ln_gamma_a = ln_gamma(a);
    // g(y) = ln T(y) - ln target, increasing in y for the lower tail.
    let sign = if tail == Tail::Lower { 1.0 } else { -1.0 };
    let eval = |y: f64| -> (f64, f64) {
        let (p, q) = pair_unchecked(a, y);
        let t = if tail == Tail::Lower { p } else { q };
        let g = sign * (t.ln() - ln_target);
        // d/dy ln T = ±pdf / T, so d(sign * ln T)/dy = pdf / T > 0
        let ln_pdf = (a - 1.0) * y.ln() - y - ln_gamma_a;
        (g, (ln_pdf - t.ln()).exp())
    };

    let mut lo = 1e-6;
    let mut hi = (a + 1.0) * 1e6;
    while eval(lo).0 > 0.0 && lo > 1e-300 {
        hi = lo;
        lo *= 1e-3;
    }
    while eval(hi).0 < 0.0 && hi < 1e300 {
        lo = hi;
        hi *= 1e3;
    }

    let mut y = wilson_hilferty(a, target, tail)
        .filter(|&y| y > lo && y < hi)
        .unwrap_or((lo * hi).sqrt());
    for _ in 0..ROOT_MAX_ITER {
        let (g, dg) = eval(y);
        if g == 0.0 {
            return y;
        }
        if g < 0.0 {
            lo = y;
        } else {
            hi = y;
        }
        let newton = y - g / dg;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            (lo * hi).sqrt()
        };
        if (next - y).abs() <= ROOT_RTOL * 1e-1 * y || (hi - lo) <= ROOT_RTOL * 1e-1 * lo {
            return next;
        }
        y = next;
    }
    y
}

/// Wilson–Hilferty starting point for the gamma quantile.
fn wilson_hilferty(a: f64, target: f64, tail: Tail) -> Option<f64> {
    // z is the standard normal quantile of the lower-tail probability.
    let z = match tail {
        Tail::Lower => -std::f64::consts::SQRT_2 * erfc_inv(2.0 * target),
        Tail::Upper => std::f64::consts::SQRT_2 * erfc_inv(2.0 * target),
    };
    let c = 1.0 / (9.0 * a);
    let base = 1.0 - c + z * c.sqrt();
    (base > 0.0 && z.is_finite()).then(|| a * base.powi(3))
}
