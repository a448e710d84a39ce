//! Special functions and quadrature shared by the kernel modules.

use std::f64::consts::PI;

use crate::error::{GreenError, Result};

pub use statrs::function::gamma::gamma;

/// Surface area of the unit sphere in `R^d`.
pub fn unit_sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    unit_sphere_area(d) / d as f64
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Exponentially scaled modified Bessel functions `e^{-z} I_k(z)` for
/// `k = 0..=kmax`, by Miller's backward recurrence normalized with
/// `e^{-z} (I_0 + 2 sum_k I_k) = 1`.
pub fn scaled_bessel_i(z: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if z <= 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = kmax + 30 + (80.0 * z).sqrt().ceil() as usize;
    let mut next = 0.0_f64;
    let mut cur = 1e-300_f64;
    let mut sum = 0.0_f64;
    for k in (1..=start).rev() {
        // cur = I_k, next = I_{k+1}
        let prev = 2.0 * k as f64 / z * cur + next;
        sum += 2.0 * cur;
        if k <= kmax {
            out[k] = cur;
        }
        next = cur;
        cur = prev;
        if cur > 1e250 {
            let s = 1e-250;
            cur *= s;
            next *= s;
            sum *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    out[0] = cur;
    sum += cur;
    for v in out.iter_mut() {
        *v /= sum;
    }
    out
}

/// Coefficients `a_m(k)` of the large-argument expansion
/// `e^{-z} I_k(z) ~ (2 pi z)^{-1/2} sum_m (-1)^m a_m(k) z^{-m}`.
pub fn hankel_coefficients(k: u64, order: usize) -> Vec<f64> {
    let mu = 4.0 * (k as f64) * (k as f64);
    let mut out = Vec::with_capacity(order + 1);
    let mut a = 1.0;
    out.push(1.0);
    for m in 1..=order {
        let odd = (2 * m - 1) as f64;
        a *= (mu - odd * odd) / (m as f64 * 8.0);
        out.push(if m % 2 == 1 { -a } else { a });
    }
    out
}

/// Multiplies two truncated power series in `1/z`.
pub fn series_mul(a: &[f64], b: &[f64], order: usize) -> Vec<f64> {
    let mut out = vec![0.0; order + 1];
    for (i, x) in a.iter().enumerate().take(order + 1) {
        for (j, y) in b.iter().enumerate() {
            if i + j > order {
                break;
            }
            out[i + j] += x * y;
        }
    }
    out
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const GAUSS7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * GK_WEIGHTS[7];
    let mut gauss = fc * GAUSS7_WEIGHTS[3];
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        kronrod += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            gauss += GAUSS7_WEIGHTS[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Globally adaptive Gauss-Kronrod (7/15) quadrature on `[a, b]`.
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol * |I|)`;
/// fails after `max_intervals` subdivisions.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    loop {
        let total: f64 = intervals.iter().map(|iv| iv.2).sum();
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if !total.is_finite() {
            return Err(GreenError::Quadrature("non-finite integrand".into()));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        if intervals.len() >= max_intervals {
            return Err(GreenError::Quadrature(format!(
                "{} intervals used, error estimate {err:e} on value {total:e}",
                intervals.len()
            )));
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Decimal rendering with `digits` significant digits; scientific notation
/// outside `[1e-4, 1e6)`.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    // exponent after rounding, so 9.9999996 counts as 10
    let e: i32 = sci.rsplit('e').next().and_then(|t| t.parse().ok()).unwrap_or(0);
    if (-4..6).contains(&e) {
        format!("{:.*}", (digits as i32 - 1 - e).max(0) as usize, x)
    } else {
        sci
    }
}
