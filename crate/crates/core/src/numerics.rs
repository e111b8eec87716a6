//! Small numerical kernels shared across the crate: adaptive
//! Gauss-Kronrod quadrature, bracketed bisection, golden-section
//! maximisation and a stable log-sum-exp.

/// Abscissae of the 15-point Kronrod rule (positive half, descending).
/// The 7-point Gauss nodes are the odd-indexed entries.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Gauss-Kronrod 15(7) evaluation on `[a, b]`.
/// Returns `(kronrod, |kronrod - gauss|)`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let f_center = f(center);
    let mut kronrod = WGK[7] * f_center;
    let mut gauss = WG[3] * f_center;

    for j in 0..7 {
        let x = half * XGK[j];
        let fsum = f(center - x) + f(center + x);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            gauss += WG[j / 2] * fsum;
        }
    }

    (kronrod * half, (kronrod - gauss).abs() * half.abs())
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (value, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return value;
    }
    let mid = 0.5 * (a + b);
    adaptive(f, a, mid, 0.5 * tol, depth - 1) + adaptive(f, mid, b, 0.5 * tol, depth - 1)
}

/// Adaptive quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub(crate) fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    adaptive(f, a, b, tol.max(f64::MIN_POSITIVE), 52)
}

/// Root of `f` on `[lo, hi]`, assuming `f(lo) <= 0 <= f(hi)`.
pub(crate) fn bisect<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64, x_tol: f64) -> f64 {
    debug_assert!(lo <= hi);
    for _ in 0..200 {
        if hi - lo <= x_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Golden-section maximisation of a unimodal `f` on `[a, b]`.
/// Returns `(argmax, max)`.
pub(crate) fn golden_max<F: Fn(f64) -> f64>(
    f: &F,
    mut a: f64,
    mut b: f64,
    x_tol: f64,
) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > x_tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// `target += scale * source`, elementwise over same-shape matrices.
#[inline]
pub(crate) fn add_scaled(
    target: &mut nalgebra::DMatrix<f64>,
    source: &nalgebra::DMatrix<f64>,
    scale: f64,
) {
    debug_assert_eq!(target.shape(), source.shape());
    for (t, &s) in target.as_mut_slice().iter_mut().zip(source.as_slice()) {
        *t += scale * s;
    }
}

/// Upper tail of the Gamma(height, 1) distribution:
/// `P(Gamma > x) = e^{-x} sum_{n < height} x^n / n!`, evaluated in log
/// space so large `x` and `height` cannot overflow the partial sums.
pub(crate) fn gamma_upper_tail(height: usize, x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if height == 0 {
        return 0.0;
    }
    if x == 0.0 {
        return 1.0;
    }
    let ln_x = x.ln();
    let mut ln_factorial = 0.0;
    let mut terms = Vec::with_capacity(height);
    for n in 0..height {
        if n > 0 {
            ln_factorial += (n as f64).ln();
        }
        terms.push(n as f64 * ln_x - ln_factorial - x);
    }
    log_sum_exp(&terms).exp().clamp(0.0, 1.0)
}

/// `ln(sum(exp(terms)))` without overflow; `-inf` terms are allowed.
pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = terms.iter().map(|&t| (t - max).exp()).sum();
    max + sum.ln()
}
