//! Closed-form continuum Green kernels and their power / exponential
//! transforms, Riesz constants, and quadrature of kernel integrals over balls.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{GreenError, Result};
use crate::numerics::{gamma, integrate_adaptive, unit_sphere_area};

/// Default relative tolerance for [`ball_kernel_integral`].
pub const DEFAULT_QUAD_TOL: f64 = 1e-8;

/// Entrywise transform applied to a Green kernel or matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    /// `value^beta`, `beta >= 1`.
    Power(f64),
    /// `exp(alpha * value)`, `alpha > 0`.
    Exp(f64),
}

impl Transform {
    pub fn apply(&self, value: f64) -> f64 {
        match *self {
            Transform::Power(b) => {
                if value == 0.0 {
                    0.0
                } else {
                    value.powf(b)
                }
            }
            Transform::Exp(a) => (a * value).exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelBase {
    /// Newtonian kernel of `R^d`, `d >= 3`.
    Free,
    /// Green kernel of the planar disk of the given radius.
    Disk(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub d: usize,
    pub base: KernelBase,
    pub transform: Transform,
}

impl KernelSpec {
    pub fn new(d: usize, base: KernelBase, transform: Transform) -> Result<Self> {
        let spec = KernelSpec { d, base, transform };
        spec.validate()?;
        Ok(spec)
    }

    pub fn free_power(d: usize, beta: f64) -> Result<Self> {
        Self::new(d, KernelBase::Free, Transform::Power(beta))
    }

    pub fn validate(&self) -> Result<()> {
        match self.base {
            KernelBase::Free => {
                if self.d < 3 {
                    return Err(GreenError::OutOfRange(format!(
                        "free-space kernel needs d >= 3, got {}",
                        self.d
                    )));
                }
            }
            KernelBase::Disk(r) => {
                if self.d != 2 {
                    return Err(GreenError::OutOfRange("disk kernel requires d = 2".into()));
                }
                if !(r > 0.0 && r.is_finite()) {
                    return Err(GreenError::OutOfRange(format!("disk radius must be positive, got {r}")));
                }
            }
        }
        match self.transform {
            Transform::Power(b) => {
                if !(b >= 1.0 && b.is_finite()) {
                    return Err(GreenError::OutOfRange(format!("power must be >= 1, got {b}")));
                }
                if self.base == KernelBase::Free {
                    check_beta(self.d, b)?;
                }
            }
            Transform::Exp(a) => {
                if !matches!(self.base, KernelBase::Disk(_)) {
                    return Err(GreenError::OutOfRange(
                        "exponential transform is only defined for the 2D disk".into(),
                    ));
                }
                if !(a > 0.0 && a < 2.0 * PI) {
                    return Err(GreenError::OutOfRange(format!(
                        "exponential rate must lie in (0, 2pi), got {a}"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn check_beta(d: usize, beta: f64) -> Result<()> {
    if d < 3 {
        return Err(GreenError::OutOfRange(format!("Riesz range needs d >= 3, got {d}")));
    }
    let upper = d as f64 / (d as f64 - 2.0);
    if !(beta >= 1.0 && beta < upper) {
        return Err(GreenError::OutOfRange(format!(
            "beta must lie in [1, {upper}) for d = {d}, got {beta}"
        )));
    }
    Ok(())
}

/// `C(d) = Gamma(d/2 - 1) / (2 pi^{d/2})`.
pub fn green_constant(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    gamma(h - 1.0) / (2.0 * PI.powf(h))
}

fn check_dims(d: usize, x: &[f64], y: &[f64]) -> Result<()> {
    for p in [x, y] {
        if p.len() != d {
            return Err(GreenError::DimensionMismatch { expected: d, got: p.len() });
        }
    }
    Ok(())
}

fn dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// Newtonian kernel `C(d) |x - y|^{2-d}`; `+inf` on the diagonal.
pub fn free_green(d: usize, x: &[f64], y: &[f64]) -> Result<f64> {
    if d < 3 {
        return Err(GreenError::OutOfRange(format!("free-space kernel needs d >= 3, got {d}")));
    }
    check_dims(d, x, y)?;
    let r = dist(x, y);
    if r == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(green_constant(d) * r.powf(2.0 - d as f64))
}

/// Green kernel of the disk `B(0, R)` in the plane.
///
/// Uses `|x| |y - x*| = sqrt(|x|^2 |y|^2 - 2 R^2 x.y + R^4)` with
/// `x* = R^2 x / |x|^2`, which is symmetric in `x, y` and regular at `x = 0`.
pub fn disk_green_2d(radius: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(GreenError::OutOfRange(format!("radius must be positive, got {radius}")));
    }
    check_dims(2, x, y)?;
    let (nx, ny) = (norm(x), norm(y));
    if nx >= radius || ny >= radius {
        return Err(GreenError::OutsideDomain(format!(
            "points must lie in the open disk of radius {radius}"
        )));
    }
    let r = dist(x, y);
    if r == 0.0 {
        return Ok(f64::INFINITY);
    }
    if nx == 0.0 {
        return Ok(-(ny / radius).ln() / PI);
    }
    if ny == 0.0 {
        return Ok(-(nx / radius).ln() / PI);
    }
    let r2 = radius * radius;
    let dot = x[0] * y[0] + x[1] * y[1];
    let num = nx * nx * ny * ny - 2.0 * r2 * dot + r2 * r2;
    Ok((num / (r2 * r * r)).ln() / (2.0 * PI))
}

/// Base kernel of `spec` passed through its transform.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    spec.validate()?;
    let base = match spec.base {
        KernelBase::Free => free_green(spec.d, x, y)?,
        KernelBase::Disk(r) => disk_green_2d(r, x, y)?,
    };
    Ok(spec.transform.apply(base))
}

/// Parameters linking the `beta` power of the Newtonian kernel to a Riesz
/// kernel `|x|^{alpha - d}` and to the `alpha/2`-stable subordinated motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RieszParams {
    pub d: usize,
    pub beta: f64,
    pub alpha: f64,
    /// `G^(beta) F = D * E_x int F(B_{eta_t}) dt`.
    pub d_const: f64,
}

/// Normalizing constant of the Riesz kernel: `E int_0^inf p_t(x) dt` for the
/// subordinated motion equals `riesz_kernel_constant(d, alpha) |x|^{alpha - d}`.
pub fn riesz_kernel_constant(d: usize, alpha: f64) -> f64 {
    let df = d as f64;
    gamma((df - alpha) / 2.0) / (gamma(alpha / 2.0) * 2f64.powf(alpha / 2.0) * PI.powf(df / 2.0))
}

pub fn riesz_params(d: usize, beta: f64) -> Result<RieszParams> {
    check_beta(d, beta)?;
    let df = d as f64;
    let alpha = df - beta * (df - 2.0);
    let d_const = green_constant(d).powf((df - alpha) / (df - 2.0)) / riesz_kernel_constant(d, alpha);
    Ok(RieszParams { d, beta, alpha, d_const })
}

/// `D(d, beta, Omega) = C(d)^beta S(d) R^alpha / alpha` with `R` the diameter.
pub fn volume_bound(d: usize, beta: f64, diameter: f64) -> Result<f64> {
    check_beta(d, beta)?;
    if !(diameter >= 0.0) {
        return Err(GreenError::OutOfRange(format!("diameter must be nonnegative, got {diameter}")));
    }
    let alpha = d as f64 - beta * (d as f64 - 2.0);
    Ok(green_constant(d).powf(beta) * unit_sphere_area(d) * diameter.powf(alpha) / alpha)
}

/// `int_{B(center, r)} kernel(x, y) dy`.
///
/// Integrates in polar coordinates around `x`, which absorbs the diagonal
/// singularity. Free-space power kernels reduce to one angular integral with
/// the radial part in closed form; the disk kernels use nested adaptive
/// quadrature.
pub fn ball_kernel_integral(
    spec: &KernelSpec,
    x: &[f64],
    center: &[f64],
    r: f64,
    tol: f64,
) -> Result<f64> {
    spec.validate()?;
    check_dims(spec.d, x, center)?;
    if !(r >= 0.0) || !(tol > 0.0) {
        return Err(GreenError::OutOfRange("radius must be >= 0 and tol > 0".into()));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    if let KernelBase::Disk(big_r) = spec.base {
        if norm(center) + r > big_r * (1.0 + 1e-12) {
            return Err(GreenError::OutsideDomain("ball must lie inside the disk".into()));
        }
        if norm(x) >= big_r {
            return Err(GreenError::OutsideDomain("evaluation point outside the disk".into()));
        }
    }
    let e: Vec<f64> = x.iter().zip(center).map(|(a, b)| a - b).collect();
    let ne = norm(&e);
    match (spec.base, spec.transform) {
        (KernelBase::Free, Transform::Power(beta)) => {
            free_ball_integral(spec.d, beta, ne, r, tol)
        }
        _ => disk_ball_integral(spec, x, &e, ne, r, tol),
    }
}

/// Chord `[s1, s2]` of the ray `x + s w` inside the ball, given the cosine of
/// the angle between `w` and `center - x`.
fn chord(ne: f64, r: f64, cos_t: f64) -> Option<(f64, f64)> {
    let b = -ne * cos_t;
    let disc = b * b - ne * ne + r * r;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let s2 = -b + sq;
    if s2 <= 0.0 {
        return None;
    }
    let s1 = if ne < r { 0.0 } else { (-b - sq).max(0.0) };
    Some((s1, s2))
}

fn free_ball_integral(d: usize, beta: f64, ne: f64, r: f64, tol: f64) -> Result<f64> {
    let df = d as f64;
    let order = beta * (df - 2.0);
    let radial_pow = df - order;
    let scale = green_constant(d).powf(beta);
    if ne == 0.0 {
        return Ok(scale * unit_sphere_area(d) * r.powf(radial_pow) / radial_pow);
    }
    let radial = |s1: f64, s2: f64| (s2.powf(radial_pow) - s1.powf(radial_pow)) / radial_pow;
    // Axial symmetry about the line through x and the center.
    let ring = unit_sphere_area(d - 1);
    let angular = |theta: f64| -> f64 {
        match chord(ne, r, theta.cos()) {
            Some((s1, s2)) => radial(s1, s2) * theta.sin().powi(d as i32 - 2),
            None => 0.0,
        }
    };
    let value = if ne < r {
        integrate_adaptive(angular, 0.0, PI, tol, 0.0, 2000)?
    } else {
        // Square-root edge at the tangent cone; theta = tmax (1 - u^2).
        let tmax = (r / ne).asin();
        integrate_adaptive(
            |u: f64| 2.0 * u * tmax * angular(tmax * (1.0 - u * u)),
            0.0,
            1.0,
            tol,
            0.0,
            2000,
        )?
    };
    Ok(scale * ring * value)
}

fn disk_ball_integral(
    spec: &KernelSpec,
    x: &[f64],
    e: &[f64],
    ne: f64,
    r: f64,
    tol: f64,
) -> Result<f64> {
    let mut inner_err = None;
    let mut outer = |phi: f64| -> f64 {
        let w = [phi.cos(), phi.sin()];
        // cos of the angle between w and center - x
        let cos_t = if ne == 0.0 { 1.0 } else { -(w[0] * e[0] + w[1] * e[1]) / ne };
        let Some((s1, s2)) = chord(ne, r, cos_t) else {
            return 0.0;
        };
        // s = s1 + (s2 - s1) u^2 smooths the logarithmic singularity at s = 0.
        let f = |u: f64| -> f64 {
            let s = s1 + (s2 - s1) * u * u;
            if s == 0.0 {
                return 0.0;
            }
            let y = [x[0] + s * w[0], x[1] + s * w[1]];
            match kernel_eval(spec, x, &y) {
                Ok(k) => k * s * 2.0 * (s2 - s1) * u,
                Err(_) => 0.0,
            }
        };
        match integrate_adaptive(f, 0.0, 1.0, tol * 0.1, 0.0, 2000) {
            Ok(v) => v,
            Err(err) => {
                inner_err.get_or_insert(err);
                0.0
            }
        }
    };
    let v = integrate_adaptive(&mut outer, 0.0, 2.0 * PI, tol, 0.0, 2000)?;
    if let Some(err) = inner_err {
        return Err(err);
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn free_green_values() {
        assert!(free_green(3, &[0.0; 3], &[0.0; 3]).unwrap().is_infinite());
        assert_relative_eq!(
            free_green(3, &[0.0; 3], &[1.0, 0.0, 0.0]).unwrap(),
            1.0 / (2.0 * PI),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            free_green(3, &[1.0, 1.0, 0.0], &[1.0, 1.0, 2.0]).unwrap(),
            1.0 / (4.0 * PI),
            max_relative = 1e-14
        );
        assert!(matches!(
            free_green(3, &[0.0; 2], &[0.0; 3]),
            Err(GreenError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn green_constant_matches_gamma_closed_forms() {
        // C(4) = Gamma(1) / (2 pi^2), C(5) = Gamma(3/2) / (2 pi^{5/2}) = 1 / (4 pi^2)
        assert_relative_eq!(green_constant(4), 1.0 / (2.0 * PI * PI), max_relative = 1e-13);
        assert_relative_eq!(green_constant(5), 1.0 / (4.0 * PI * PI), max_relative = 1e-13);
    }

    #[test]
    fn disk_green_values() {
        let v = disk_green_2d(1.0, &[0.0, 0.0], &[0.5, 0.0]).unwrap();
        assert_relative_eq!(v, 2f64.ln() / PI, max_relative = 1e-14);
        // Nonzero x exercises the dual-point branch.
        let w = disk_green_2d(1.0, &[0.5, 0.0], &[0.0, 0.0]).unwrap();
        assert_relative_eq!(w, v, max_relative = 1e-14);
        // Direct evaluation with x* = (2, 0) written out.
        let x = [0.5, 0.1];
        let y = [-0.3, 0.2];
        let nx2 = x[0] * x[0] + x[1] * x[1];
        let xs = [x[0] / nx2, x[1] / nx2];
        let direct = -(1.0 / PI)
            * (dist(&x, &y).ln() - (nx2.sqrt() * dist(&y, &xs)).ln());
        assert_relative_eq!(disk_green_2d(1.0, &x, &y).unwrap(), direct, max_relative = 1e-13);
        assert!(disk_green_2d(1.0, &[0.2, 0.2], &[0.2, 0.2]).unwrap().is_infinite());
        assert!(matches!(
            disk_green_2d(1.0, &[1.0, 0.0], &[0.0, 0.0]),
            Err(GreenError::OutsideDomain(_))
        ));
    }

    #[test]
    fn disk_green_is_symmetric() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut pt = |r: f64| loop {
            let p = [rng.random_range(-r..r), rng.random_range(-r..r)];
            if norm(&p) < r {
                return p;
            }
        };
        for _ in 0..500 {
            let (x, y) = (pt(1.7), pt(1.7));
            let (a, b) = (disk_green_2d(1.7, &x, &y).unwrap(), disk_green_2d(1.7, &y, &x).unwrap());
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{x:?} {y:?}");
        }
    }

    #[test]
    fn disk_green_scaling() {
        let x = [0.3, -0.4];
        let y = [1.1, 0.6];
        let r = 2.5;
        let scaled = disk_green_2d(1.0, &[x[0] / r, x[1] / r], &[y[0] / r, y[1] / r]).unwrap();
        assert_relative_eq!(disk_green_2d(r, &x, &y).unwrap(), scaled, max_relative = 1e-13);
    }

    #[test]
    fn disk_green_vanishes_at_boundary() {
        let x = [0.1, 0.2];
        let mut last = f64::INFINITY;
        for k in 2..=6 {
            let rho = 1.0 - 10f64.powi(-k);
            let v = disk_green_2d(1.0, &x, &[0.0, rho]).unwrap();
            assert!(v < last && v > 0.0);
            last = v;
        }
        assert!(last < 1e-5);
    }

    #[test]
    fn kernel_eval_transforms() {
        let x = [0.0, 0.0, 0.0];
        let y = [0.0, 1.0, 0.0];
        let base = kernel_eval(&KernelSpec::free_power(3, 1.0).unwrap(), &x, &y).unwrap();
        assert_relative_eq!(base, free_green(3, &x, &y).unwrap());
        let sq = kernel_eval(&KernelSpec::free_power(3, 2.0).unwrap(), &x, &y).unwrap();
        assert_relative_eq!(sq, 1.0 / (4.0 * PI * PI), max_relative = 1e-14);
        let spec = KernelSpec::new(2, KernelBase::Disk(1.0), Transform::Exp(PI)).unwrap();
        let e = kernel_eval(&spec, &[0.0, 0.0], &[0.5, 0.0]).unwrap();
        assert_relative_eq!(e, 2.0, max_relative = 1e-13);
    }

    #[test]
    fn kernel_spec_ranges() {
        assert!(KernelSpec::free_power(3, 3.0).is_err());
        assert!(KernelSpec::free_power(3, 0.9).is_err());
        assert!(KernelSpec::free_power(2, 1.0).is_err());
        assert!(KernelSpec::new(3, KernelBase::Free, Transform::Exp(1.0)).is_err());
        assert!(KernelSpec::new(2, KernelBase::Disk(1.0), Transform::Exp(7.0)).is_err());
        assert!(KernelSpec::new(2, KernelBase::Disk(-1.0), Transform::Power(1.0)).is_err());
        assert!(KernelSpec::new(2, KernelBase::Disk(1.0), Transform::Power(4.0)).is_ok());
    }

    #[test]
    fn kernel_spec_json_shape() {
        let s = KernelSpec::free_power(3, 2.0).unwrap();
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"{"d":3,"base":"free","transform":{"power":2.0}}"#
        );
        let t: KernelSpec =
            serde_json::from_str(r#"{"d":2,"base":{"disk":1.0},"transform":{"exp":1.0}}"#).unwrap();
        assert_eq!(t.base, KernelBase::Disk(1.0));
        assert_eq!(t.transform, Transform::Exp(1.0));
    }

    #[test]
    fn riesz_values() {
        let p = riesz_params(3, 1.0).unwrap();
        assert_eq!(p.alpha, 2.0);
        assert_relative_eq!(p.d_const, 1.0, max_relative = 1e-12);
        let p = riesz_params(3, 2.0).unwrap();
        assert_relative_eq!(p.alpha, 1.0, max_relative = 1e-15);
        // independent route: C(3)^2 Gamma(1/2) sqrt(2) pi^{3/2}
        let c3 = 1.0 / (2.0 * PI);
        let route = c3 * c3 * PI.sqrt() * 2f64.sqrt() * PI.powf(1.5);
        assert_relative_eq!(p.d_const, route, max_relative = 1e-12);
        assert_relative_eq!(p.d_const, 2f64.sqrt() / 4.0, max_relative = 1e-12);
        let p = riesz_params(5, 4.0 / 3.0).unwrap();
        assert_relative_eq!(p.alpha, 1.0, max_relative = 1e-14);
        assert!(riesz_params(3, 3.0).is_err());
        assert!(riesz_params(2, 1.0).is_err());
    }

    #[test]
    fn volume_bound_values() {
        // alpha = 2 at beta = 1, so C(3) 4 pi / 2 = 1
        assert_relative_eq!(volume_bound(3, 1.0, 1.0).unwrap(), 1.0, max_relative = 1e-13);
        assert_relative_eq!(volume_bound(3, 2.0, 1.0).unwrap(), 1.0 / PI, max_relative = 1e-13);
        assert!(volume_bound(3, 1.5, 1e-12).unwrap() < 1e-12);
        assert!(volume_bound(3, 3.5, 1.0).is_err());
    }

    #[test]
    fn ball_integral_closed_forms() {
        let c = [0.0; 3];
        let s1 = KernelSpec::free_power(3, 1.0).unwrap();
        assert_relative_eq!(ball_kernel_integral(&s1, &c, &c, 1.0, 1e-10).unwrap(), 1.0, max_relative = 1e-12);
        let s15 = KernelSpec::free_power(3, 1.5).unwrap();
        let expected = (2.0 * PI).powf(-1.5) * 8.0 * PI / 3.0;
        assert_relative_eq!(ball_kernel_integral(&s15, &c, &c, 1.0, 1e-10).unwrap(), expected, max_relative = 1e-12);
        assert!((expected - 0.5318).abs() < 5e-4);
        assert_eq!(ball_kernel_integral(&s15, &c, &c, 0.0, 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn ball_integral_off_center_newtonian() {
        // Newtonian potential of a uniform ball: outside it is |B| C(3) / |x|,
        // inside it is C(3) * 2 pi (r^2 - |x|^2 / 3).
        let s = KernelSpec::free_power(3, 1.0).unwrap();
        let c = [0.0; 3];
        let vol = 4.0 * PI / 3.0;
        for dist in [1.5, 3.0, 10.0] {
            let v = ball_kernel_integral(&s, &[dist, 0.0, 0.0], &c, 1.0, 1e-10).unwrap();
            assert_relative_eq!(v, vol / (2.0 * PI * dist), max_relative = 1e-8);
        }
        for dist in [0.3, 0.9] {
            let v = ball_kernel_integral(&s, &[0.0, dist, 0.0], &c, 1.0, 1e-10).unwrap();
            assert_relative_eq!(v, (1.0 - dist * dist / 3.0), max_relative = 1e-8);
        }
    }

    #[test]
    fn ball_integral_disk_kernel_at_center() {
        // int_{B(0,r)} -(1/pi) log(|y|) dy over the unit disk, r = 0.5:
        // 2 int_0^r -s log s ds = r^2 (1/2 - log r)
        let spec = KernelSpec::new(2, KernelBase::Disk(1.0), Transform::Power(1.0)).unwrap();
        let v = ball_kernel_integral(&spec, &[0.0, 0.0], &[0.0, 0.0], 0.5, 1e-9).unwrap();
        let r: f64 = 0.5;
        assert_relative_eq!(v, r * r * (0.5 - r.ln()), max_relative = 1e-7);
    }
}
