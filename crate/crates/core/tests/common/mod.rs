#![allow(dead_code)]

// Gauss–Kronrod 7/15 nodes and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_3,
    0.949_107_912_342_758_524_526_189_684_047_9,
    0.864_864_423_359_769_072_789_712_788_640_9,
    0.741_531_185_599_394_439_863_864_773_280_8,
    0.586_087_235_467_691_130_294_144_845_693_0,
    0.405_845_151_377_397_166_906_606_412_076_9,
    0.207_784_955_007_898_467_600_689_403_773_2,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.104_790_010_322_250_183_839_876_322_541_5,
    0.140_653_259_715_525_918_745_189_590_510_2,
    0.169_004_726_639_267_902_826_583_426_598_6,
    0.190_350_578_064_785_409_913_256_402_421_0,
    0.204_432_940_075_298_892_414_161_999_234_6,
    0.209_482_141_084_727_828_012_999_174_891_7,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_1,
    0.279_705_391_489_276_667_901_467_771_423_8,
    0.381_830_050_505_118_944_950_369_775_489_0,
    0.417_959_183_673_469_387_755_102_040_816_3,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Part {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Part {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Part {}
impl PartialOrd for Part {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Part {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive: keep bisecting the interval with the largest error
/// estimate until the summed estimate drops below `tol`.
fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (value, err) = gk15(f, a, b);
    let mut total_err = err;
    let mut heap = std::collections::BinaryHeap::new();
    heap.push(Part {
        lo: a,
        hi: b,
        value,
        err,
    });
    for _ in 0..2000 {
        if total_err <= tol {
            break;
        }
        let p = heap.pop().unwrap();
        let mid = 0.5 * (p.lo + p.hi);
        let (v1, e1) = gk15(f, p.lo, mid);
        let (v2, e2) = gk15(f, mid, p.hi);
        total_err += e1 + e2 - p.err;
        heap.push(Part {
            lo: p.lo,
            hi: mid,
            value: v1,
            err: e1,
        });
        heap.push(Part {
            lo: mid,
            hi: p.hi,
            value: v2,
            err: e2,
        });
    }
    heap.iter().map(|p| p.value).sum()
}

/// Adaptive Gauss–Kronrod integral of `f` over `[a, b]`; `b` may be `+inf`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b.is_infinite() {
        // x = a + t / (1 - t), t in [0, 1)
        let g = |t: f64| {
            if t >= 1.0 {
                return 0.0;
            }
            let s = 1.0 - t;
            f(a + t / s) / (s * s)
        };
        return adapt(&g, 0.0, 1.0, tol);
    }
    adapt(&f, a, b, tol)
}

/// `P(K > lambda)` by the alternating series, for checking KS statistics.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let term = 2.0 * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}

/// One-sample KS distance between `sample` and the continuous cdf `cdf`,
/// with its asymptotic p-value.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sq = n.sqrt();
    (d, kolmogorov_tail((sq + 0.12 + 0.11 / sq) * d))
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard error of the mean.
pub fn std_error(x: &[f64]) -> f64 {
    let m = mean(x);
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0);
    (v / x.len() as f64).sqrt()
}
