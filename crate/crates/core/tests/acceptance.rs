//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use ocnid::bpca::{covariance_eigs, model_scan, simulate_eight_dim, LaplaceForm, ScanConfig};
use ocnid::cftp::{
    coupled_sweep, draw_batch, perfect_draw, start_state, Backoff, CftpConfig, CoupledState,
    PerfectDraw, UniformStore,
};
use ocnid::gibbs::gibbs_sweep;
use ocnid::oracle::{oracle_batch, two_sample_distance};
use ocnid::special::reg_incomplete_gamma;
use ocnid::stats::SummaryStats;
use ocnid::{Distribution, Error};

const EPS: f64 = 1e-4;

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn record(&mut self, pass: bool, label: &str, detail: String) {
        let line = format!("{} {label}: {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push((pass, line));
    }
}

fn parse(specs: &[&str]) -> Vec<Distribution> {
    specs.iter().map(|s| s.parse().unwrap()).collect()
}

fn exps(rates: &[f64]) -> Vec<Distribution> {
    rates
        .iter()
        .map(|&r| Distribution::exponential(r).unwrap())
        .collect()
}

fn bct_run(dists: &[Distribution], n: usize, seed: u64) -> ocnid::BctSummary {
    draw_batch(dists, &CftpConfig::new(EPS), n, seed, false)
        .unwrap()
        .summary
}

fn criterion_1_and_2(r: &mut Report) {
    let t = Instant::now();
    let desc = bct_run(&exps(&[8.0, 6.0, 4.0, 2.0]), 100_000, 1);
    let elapsed = t.elapsed();
    r.record(
        (6.4..=8.4).contains(&desc.mean_bct) && desc.min_bct == 1 && desc.max_bct <= 30,
        "criterion 1 (exponential (8,6,4,2), 1e5 draws)",
        format!(
            "mean BCT {:.3} ± {:.3} in [6.4, 8.4], min {} (need 1), max {} (need <= 30), {:.1?}",
            desc.mean_bct, desc.se_bct, desc.min_bct, desc.max_bct, elapsed
        ),
    );

    let asc = bct_run(&exps(&[2.0, 4.0, 6.0, 8.0]), 100_000, 2);
    let z = (asc.mean_bct - desc.mean_bct) / (asc.se_bct.powi(2) + desc.se_bct.powi(2)).sqrt();
    r.record(
        (9.7..=12.7).contains(&asc.mean_bct) && z > 5.0,
        "criterion 2 (ascending (2,4,6,8) vs descending)",
        format!(
            "mean BCT {:.3} ± {:.3} in [9.7, 12.7]; {z:.1} sigma above descending (need > 5)",
            asc.mean_bct, asc.se_bct
        ),
    );
}

fn criterion_3(r: &mut Report) {
    let cases: [(&str, Vec<&str>, f64); 5] = [
        (
            "exponential (8,6,4,1)",
            vec!["exp:8", "exp:6", "exp:4", "exp:1"],
            8.4,
        ),
        (
            "Weibull a=3 (8,6,4,1)",
            vec!["weibull:3:8", "weibull:3:6", "weibull:3:4", "weibull:3:1"],
            5.6,
        ),
        (
            "Cauchy (8,6,4,1)",
            vec!["cauchy:8", "cauchy:6", "cauchy:4", "cauchy:1"],
            12.1,
        ),
        (
            "Pareto (1.2,0.8,0.2,0.05)",
            vec!["pareto:1.2", "pareto:0.8", "pareto:0.2", "pareto:0.05"],
            20.7,
        ),
        (
            "Weibull a=3 m=8 (20,14,10,8,6,5,4,2)",
            vec![
                "weibull:3:20",
                "weibull:3:14",
                "weibull:3:10",
                "weibull:3:8",
                "weibull:3:6",
                "weibull:3:5",
                "weibull:3:4",
                "weibull:3:2",
            ],
            11.3,
        ),
    ];
    for (i, (name, specs, target)) in cases.iter().enumerate() {
        let s = bct_run(&parse(specs), 100_000, 30 + i as u64);
        let (lo, hi) = (0.8 * target, 1.2 * target);
        r.record(
            (lo..=hi).contains(&s.mean_bct),
            &format!("criterion 3 ({name}, 1e5 draws)"),
            format!(
                "mean BCT {:.3} ± {:.3}, target {target} ± 20% = [{lo:.2}, {hi:.2}]",
                s.mean_bct, s.se_bct
            ),
        );
    }
}

/// Per-component KS p-values and mean z-scores of perfect draws against the
/// oracle, and whether every component passes both.
fn compare_with_oracle(dists: &[Distribution], eps: f64, n: usize, seed: u64) -> (bool, String) {
    let perfect = draw_batch(dists, &CftpConfig::new(eps), n, seed, true).unwrap();
    let oracle = oracle_batch(dists, n, seed + 1000).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for c in 0..dists.len() {
        let a: Vec<f64> = perfect.draws.iter().map(|d| d.values[c]).collect();
        let b: Vec<f64> = oracle.draws.iter().map(|x| x[c]).collect();
        let ks = two_sample_distance(&a, &b).unwrap();
        let (sa, sb) = (
            SummaryStats::from_slice(&a).unwrap(),
            SummaryStats::from_slice(&b).unwrap(),
        );
        let z = (sa.mean - sb.mean) / (sa.std_error().powi(2) + sb.std_error().powi(2)).sqrt();
        ok &= ks.p_value > 1e-3 && z.abs() < 3.0;
        parts.push(format!("x{}: KS p={:.3} z={z:+.2}", c + 1, ks.p_value));
    }
    (ok, parts.join("; "))
}

fn criterion_4(r: &mut Report) {
    let configs: [(&str, Vec<&str>); 5] = [
        (
            "exponential (8,6,4,2)",
            vec!["exp:8", "exp:6", "exp:4", "exp:2"],
        ),
        (
            "Weibull a=3 (8,6,4,2)",
            vec!["weibull:3:8", "weibull:3:6", "weibull:3:4", "weibull:3:2"],
        ),
        (
            "Cauchy (8,6,4,2)",
            vec!["cauchy:8", "cauchy:6", "cauchy:4", "cauchy:2"],
        ),
        (
            "Pareto (8,6,4,2)",
            vec!["pareto:8", "pareto:6", "pareto:4", "pareto:2"],
        ),
        (
            "exponential/Weibull/folded Cauchy",
            vec!["exp:2", "weibull:3:2", "fcauchy:2"],
        ),
    ];
    let n = 100_000;
    for (i, (name, specs)) in configs.iter().enumerate() {
        let dists = parse(specs);
        let (ok, detail) = compare_with_oracle(&dists, EPS, n, 100 + i as u64);
        r.record(
            ok,
            &format!("criterion 4 ({name}, eps 1e-4, 1e5 vs 1e5)"),
            detail,
        );
        if !ok {
            // diagnostic only: separates bracket-width bias from sampler error
            let (ok_fine, detail) = compare_with_oracle(&dists, 1e-8, n, 100 + i as u64);
            println!(
                "     note: same comparison at eps 1e-8 {}: {detail}",
                if ok_fine { "agrees" } else { "also disagrees" }
            );
        }
    }
}

fn family() -> impl Strategy<Value = Vec<Distribution>> {
    let positive = prop_oneof![
        (0.1f64..10.0).prop_map(|r| Distribution::exponential(r).unwrap()),
        (0.5f64..4.0, 0.1f64..10.0).prop_map(|(k, r)| Distribution::weibull(k, r).unwrap()),
        (0.2f64..8.0).prop_map(|a| Distribution::pareto(a).unwrap()),
        (0.1f64..10.0).prop_map(|r| Distribution::folded_cauchy(r).unwrap()),
        (1.0f64..60.0, 0.5f64..300.0).prop_map(|(a, b)| Distribution::inverse_gamma(a, b).unwrap()),
    ];
    let real = (0.1f64..10.0).prop_map(|r| Distribution::cauchy(r).unwrap());
    prop_oneof![
        prop::collection::vec(positive, 1..6),
        prop::collection::vec(real, 1..6),
    ]
}

/// A family with an ordered state inside its support.
fn family_and_state() -> impl Strategy<Value = (Vec<Distribution>, Vec<f64>, Vec<f64>)> {
    family()
        .prop_flat_map(|d| {
            let m = d.len();
            let raw = prop::collection::vec(-4.0f64..4.0, m);
            (Just(d), raw.clone(), raw)
        })
        .prop_map(|(d, a, b)| {
            let to_state = |mut v: Vec<f64>| {
                v.sort_by(f64::total_cmp);
                if d[0].support().lower == 0.0 {
                    v.iter().map(|x| x.exp()).collect()
                } else {
                    v.iter().map(|x| 5.0 * x).collect::<Vec<f64>>()
                }
            };
            (d.clone(), to_state(a), to_state(b))
        })
}

fn uniforms(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-12f64..1.0 - 1e-12, m)
}

fn run_property<S: Strategy>(
    r: &mut Report,
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) {
    let cases = 10_000;
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let result = runner.run(&strategy, test);
    r.record(
        result.is_ok(),
        &format!("criterion 5 ({name})"),
        match result {
            Ok(()) => format!("{cases} randomized trials"),
            Err(e) => format!("{e}"),
        },
    );
}

/// A draw with doubling backoff and a depth cap; randomly generated families
/// can put concentrated laws in conflicting order, which couple very slowly
/// and say nothing about the properties checked here.
fn bounded_draw(
    d: &[Distribution],
    seed: u64,
    stream: u64,
) -> Result<Option<PerfectDraw>, TestCaseError> {
    let cfg = CftpConfig::new(EPS)
        .with_backoff(Backoff::Doubling)
        .with_max_n(4096);
    match perfect_draw(d, &cfg, &mut UniformStore::from_seed(d.len(), seed, stream)) {
        Ok(p) => Ok(Some(p)),
        Err(Error::NonCoalescence { .. }) => Ok(None),
        Err(e) => Err(TestCaseError::fail(e.to_string())),
    }
}

fn criterion_5(r: &mut Report) {
    run_property(
        r,
        "sandwich preserved by coupled_sweep",
        family_and_state().prop_flat_map(|(d, a, b)| {
            let m = d.len();
            (Just(d), Just(a), Just(b), uniforms(m))
        }),
        |(d, a, b, u)| {
            let lower: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect();
            let upper: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
            let s = CoupledState {
                lower,
                upper,
                time: -1,
            };
            let next = coupled_sweep(&d, &s, &u).map_err(|e| TestCaseError::fail(e.to_string()))?;
            for (l, h) in next.lower.iter().zip(&next.upper) {
                prop_assert!(l <= h, "{l} > {h}");
            }
            Ok(())
        },
    );
    run_property(
        r,
        "gibbs_sweep monotone in the state",
        family_and_state().prop_flat_map(|(d, a, b)| {
            let m = d.len();
            (Just(d), Just(a), Just(b), uniforms(m))
        }),
        |(d, a, b, u)| {
            let lo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.min(*y)).collect();
            let hi: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect();
            let x = gibbs_sweep(&d, &lo, &u).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let y = gibbs_sweep(&d, &hi, &u).map_err(|e| TestCaseError::fail(e.to_string()))?;
            for (p, q) in x.iter().zip(&y) {
                // both routes round independently; allow the snapping tolerance
                prop_assert!(*p <= *q + 1e-10 * q.abs().max(p.abs()), "{p} > {q}");
            }
            Ok(())
        },
    );
    run_property(
        r,
        "perfect draws strictly ordered",
        (family(), any::<u64>()),
        |(d, seed)| {
            let draw = bounded_draw(&d, seed, 0)?;
            prop_assume!(draw.is_some());
            let draw = draw.unwrap();
            prop_assert!(
                draw.values.windows(2).all(|w| w[0] < w[1]),
                "{:?}",
                draw.values
            );
            Ok(())
        },
    );
    run_property(
        r,
        "seed determinism",
        (family(), any::<u64>(), any::<u64>()),
        |(d, seed, stream)| {
            let a = bounded_draw(&d, seed, stream)?;
            prop_assume!(a.is_some());
            let a = a.unwrap();
            let b = bounded_draw(&d, seed, stream)?.unwrap();
            prop_assert_eq!(a.bct, b.bct);
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&a.values), bits(&b.values));
            prop_assert_eq!(bits(&a.lower), bits(&b.lower));
            prop_assert_eq!(bits(&a.upper), bits(&b.upper));
            Ok(())
        },
    );
    run_property(
        r,
        "coupling persists",
        family_and_state().prop_flat_map(|(d, a, _)| {
            let m = d.len();
            (Just(d), Just(a), prop::collection::vec(uniforms(m), 1..6))
        }),
        |(d, a, us)| {
            let mut s = CoupledState {
                lower: a.clone(),
                upper: a,
                time: -(us.len() as i64),
            };
            for u in &us {
                s = coupled_sweep(&d, &s, u).map_err(|e| TestCaseError::fail(e.to_string()))?;
                prop_assert_eq!(&s.lower, &s.upper);
            }
            Ok(())
        },
    );
    run_property(
        r,
        "uniform reuse across attempts",
        (family(), any::<u64>(), 1u64..12),
        |(d, seed, n)| {
            let m = d.len();
            let mut store = UniformStore::from_seed(m, seed, 0);
            store.ensure_time(-(n as i64) - m as i64 + 1);
            let trajectory = |store: &UniformStore| -> Result<Vec<CoupledState>, TestCaseError> {
                let mut s =
                    start_state(&d, store, n).map_err(|e| TestCaseError::fail(e.to_string()))?;
                let mut out = vec![s.clone()];
                while s.time < 0 {
                    s = coupled_sweep(&d, &s, store.get(s.time + 1).unwrap())
                        .map_err(|e| TestCaseError::fail(e.to_string()))?;
                    out.push(s.clone());
                }
                Ok(out)
            };
            let first = trajectory(&store)?;
            let shared: Vec<Vec<f64>> = (0..=n as i64)
                .map(|k| store.get(-k).unwrap().to_vec())
                .collect();
            // the next attempt extends the store one step further back
            store.ensure_time(-(n as i64 + 1) - m as i64 + 1);
            let again: Vec<Vec<f64>> = (0..=n as i64)
                .map(|k| store.get(-k).unwrap().to_vec())
                .collect();
            prop_assert_eq!(shared, again);
            prop_assert_eq!(first, trajectory(&store)?);
            Ok(())
        },
    );
}

fn criterion_6(r: &mut Report) {
    let configs = [
        vec!["exp:8", "exp:6", "exp:4", "exp:2"],
        vec!["cauchy:8", "cauchy:6", "cauchy:4", "cauchy:1"],
        vec!["pareto:1.2", "pareto:0.8", "pareto:0.2", "pareto:0.05"],
        vec!["exp:2", "weibull:3:2", "fcauchy:2"],
        vec!["invgamma:152:300", "invgamma:52:400", "invgamma:52:481.41"],
    ];
    let mut checked = 0usize;
    let mut worst_ratio: f64 = 0.0;
    let mut ok = true;
    for (i, specs) in configs.iter().enumerate() {
        let d = parse(specs);
        for eps in [1e-2, 1e-4, 1e-8] {
            let b = draw_batch(&d, &CftpConfig::new(eps), 5_000, 300 + i as u64, true).unwrap();
            for p in &b.draws {
                ok &= p.gap < eps;
                worst_ratio = worst_ratio.max(p.gap / eps);
                for ((x, l), u) in p.values.iter().zip(&p.lower).zip(&p.upper) {
                    ok &= l <= x && x <= u && (u - l) <= eps.sqrt();
                }
                checked += 1;
            }
        }
    }
    r.record(
        ok,
        "criterion 6 (epsilon accuracy)",
        format!("{checked} draws at eps in {{1e-2, 1e-4, 1e-8}}; max gap/eps = {worst_ratio:.3}; every value inside a bracket of width <= sqrt(eps)"),
    );
}

fn criterion_7(r: &mut Report) {
    let t = Instant::now();
    let rows = simulate_eight_dim(1).unwrap();
    let eig = covariance_eigs(&rows).unwrap();
    let table = model_scan(&eig, &ScanConfig::new(EPS, 10_000, 1)).unwrap();
    let elapsed = t.elapsed();
    let g: Vec<String> = eig.g.iter().map(|v| format!("{v:.3}")).collect();
    println!("     sample eigenvalues: [{}]", g.join(", "));
    for row in &table.rows {
        println!(
            "     q={} max log-lik {:.2}  BIC {:.2}  Laplace displayed {}  corrected {}  mean BCT {:.2}",
            row.q,
            row.max_log_likelihood,
            row.bic,
            row.laplace_displayed.map_or("n/a".into(), |v| format!("{v:.2}")),
            row.laplace_corrected.map_or("n/a".into(), |v| format!("{v:.2}")),
            row.mean_bct
        );
    }
    r.record(
        (30.0..=46.0).contains(&table.mean_bct),
        "criterion 7a (BPCA mean BCT)",
        format!(
            "{:.2} over all q, target [30, 46]; scan took {elapsed:.1?}",
            table.mean_bct
        ),
    );
    let lls: Vec<f64> = table.rows.iter().map(|r| r.max_log_likelihood).collect();
    r.record(
        lls.windows(2).all(|w| w[1] >= w[0]),
        "criterion 7b (max log-likelihood nondecreasing in q)",
        format!(
            "{:?}",
            lls.iter()
                .map(|v| (v * 100.0).round() / 100.0)
                .collect::<Vec<_>>()
        ),
    );
    r.record(
        table.argmax_bic() == Some(5),
        "criterion 7c (BIC argmax)",
        format!("argmax q = {:?}, need 5", table.argmax_bic()),
    );
    let disp = table.argmax_laplace(LaplaceForm::Displayed);
    let corr = table.argmax_laplace(LaplaceForm::Corrected);
    r.record(
        disp == Some(5) || corr == Some(5),
        "criterion 7d (Laplace argmax, either form)",
        format!("displayed form {disp:?}, corrected form {corr:?}, need 5 in at least one"),
    );
}

fn criterion_8(r: &mut Report) {
    let families = parse(&[
        "exp:2",
        "weibull:1.5:2",
        "weibull:0.7:1",
        "cauchy:1",
        "fcauchy:2",
        "pareto:0.8",
        "pareto:3",
        "invgamma:2:3",
        "invgamma:52:481.41",
    ]);
    let mut worst_rt: f64 = 0.0;
    let mut monotone = true;
    for d in &families {
        let mut prev = f64::NEG_INFINITY;
        for k in 0..1000 {
            let p = (k as f64 + 0.5) / 1000.0;
            let x = d.quantile(p).unwrap();
            monotone &= x > prev;
            prev = x;
            worst_rt = worst_rt.max((d.cdf(x) - p).abs());
        }
    }
    let mut worst_gamma: f64 = 0.0;
    for &a in &[0.5, 1.5, 2.5, 7.0, 30.0] {
        for k in 1..=10 {
            let x = a * k as f64 / 4.0;
            let lg = statrs::function::gamma::ln_gamma(a);
            let q = common::integrate(
                |u: f64| (-u.powf(1.0 / a) - lg).exp() / a,
                0.0,
                x.powf(a),
                1e-14,
            );
            worst_gamma = worst_gamma.max((reg_incomplete_gamma(a, x).unwrap() - q).abs());
        }
    }
    r.record(
        worst_rt < 1e-9 && worst_gamma < 1e-10 && monotone,
        "criterion 8 (round trips and incomplete gamma)",
        format!(
            "max |cdf(quantile(p)) - p| = {worst_rt:.2e} (< 1e-9); max |P(a,x) - quadrature| = {worst_gamma:.2e} (< 1e-10); quantiles monotone: {monotone}"
        ),
    );
}

fn main() {
    // `cargo test` passes harness flags such as --nocapture or a filter; a
    // filter that matches nothing here skips the suite.
    let args: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    if !args.is_empty() && !args.iter().any(|a| "acceptance".contains(a.as_str())) {
        return;
    }
    let mut r = Report { lines: Vec::new() };
    let t = Instant::now();
    criterion_1_and_2(&mut r);
    criterion_3(&mut r);
    criterion_4(&mut r);
    criterion_5(&mut r);
    criterion_6(&mut r);
    criterion_7(&mut r);
    criterion_8(&mut r);
    let failed: Vec<&String> = r.lines.iter().filter(|(p, _)| !p).map(|(_, l)| l).collect();
    println!(
        "\nacceptance: {} passed, {} failed ({:.1?})",
        r.lines.len() - failed.len(),
        failed.len(),
        t.elapsed()
    );
    if !failed.is_empty() {
        for l in failed {
            println!("  {l}");
        }
        std::process::exit(1);
    }
}
