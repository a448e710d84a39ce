//! Random-walk exit sampling, stable subordinators and occupation-time
//! estimators for subordinated Brownian motion.
//!
//! Trial `i` of a [`RngStream`] draws from ChaCha8 seeded with `seed`, on
//! stream `stream`, starting at word `i * 2^40`. Trials therefore read
//! disjoint stretches of one keystream and results do not depend on the
//! thread count.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuum::{green_constant, riesz_params};
use crate::domain::{grid_points, round_to_grid, DomainSpec, GridSpec};
use crate::error::{GreenError, Result};
use crate::lattice::{
    potential_kernel_2d_many, potential_kernel_constant, whole_space_table, LatticePoint, LatticeSet,
};
use crate::numerics::{gamma, unit_ball_volume, unit_sphere_area};
use crate::operator::kernel_scale;

pub const DEFAULT_STEP_BUDGET: u64 = 100_000_000;

const TRIAL_WORDS_LOG2: u32 = 40;
const MAX_TRIALS: usize = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub algorithm: RngAlgorithm,
    pub seed: u64,
    pub stream: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RngAlgorithm {
    ChaCha8,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { algorithm: RngAlgorithm::ChaCha8, seed, stream }
    }

    /// Generator positioned at the start of the stream.
    pub fn rng(&self) -> ChaCha8Rng {
        self.trial(0)
    }

    /// Generator for trial `i`.
    pub fn trial(&self, i: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos((i as u128) << TRIAL_WORDS_LOG2);
        rng
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < 2 {
        return Err(GreenError::OutOfRange(format!("need at least 2 trials, got {trials}")));
    }
    if trials > MAX_TRIALS {
        return Err(GreenError::OutOfRange(format!("at most {MAX_TRIALS} trials per stream")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tail_bound: Option<f64>,
}

impl McEstimate {
    /// Mean and standard error of the samples, summed in index order.
    pub fn from_samples(samples: &[f64], seed: u64) -> Result<Self> {
        check_trials(samples.len())?;
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        Ok(McEstimate { mean, stderr: (var / n).sqrt(), trials: samples.len(), seed, tail_bound: None })
    }
}

/// One walk from `start` until it first leaves `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitSample {
    pub exit: LatticePoint,
    pub steps: u64,
    /// Visits to each point of `E`, in the set's order.
    pub visits: Vec<u64>,
}

fn walk<R: Rng + ?Sized, V: FnMut(usize)>(
    set: &LatticeSet,
    start: &[i64],
    rng: &mut R,
    budget: u64,
    mut visit: V,
) -> Result<(LatticePoint, u64)> {
    let d = set.dim();
    let mut p = start.to_vec();
    let mut steps = 0u64;
    while let Some(i) = set.index_of(&p) {
        visit(i);
        if steps == budget {
            return Err(GreenError::StepBudget(budget));
        }
        let k = rng.random_range(0..2 * d);
        p[k / 2] += if k % 2 == 0 { 1 } else { -1 };
        steps += 1;
    }
    Ok((p, steps))
}

fn check_start(set: &LatticeSet, start: &[i64]) -> Result<()> {
    if start.len() != set.dim() {
        return Err(GreenError::DimensionMismatch { expected: set.dim(), got: start.len() });
    }
    if !set.contains(start) {
        return Err(GreenError::OutsideDomain(format!("start {start:?} is not in the set")));
    }
    Ok(())
}

/// Runs the simple walk from `start` until it leaves `E`.
pub fn sample_exit<R: Rng + ?Sized>(set: &LatticeSet, start: &[i64], rng: &mut R) -> Result<ExitSample> {
    sample_exit_with_budget(set, start, rng, DEFAULT_STEP_BUDGET)
}

pub fn sample_exit_with_budget<R: Rng + ?Sized>(
    set: &LatticeSet,
    start: &[i64],
    rng: &mut R,
    budget: u64,
) -> Result<ExitSample> {
    check_start(set, start)?;
    let mut visits = vec![0u64; set.len()];
    let (exit, steps) = walk(set, start, rng, budget, |i| visits[i] += 1)?;
    Ok(ExitSample { exit, steps, visits })
}

/// Mean visit counts over `trials` walks; estimates the row of the killed
/// Green matrix at `start`.
pub fn mean_visits(set: &LatticeSet, start: &[i64], trials: usize, stream: RngStream) -> Result<Vec<McEstimate>> {
    check_trials(trials)?;
    check_start(set, start)?;
    let runs: Vec<Vec<u64>> = (0..trials)
        .into_par_iter()
        .map(|t| sample_exit(set, start, &mut stream.trial(t)).map(|s| s.visits))
        .collect::<Result<_>>()?;
    (0..set.len())
        .map(|j| {
            let col: Vec<f64> = runs.iter().map(|r| r[j] as f64).collect();
            McEstimate::from_samples(&col, stream.seed)
        })
        .collect()
}

/// Exit points of `trials` walks from `start`.
pub fn sample_exits(set: &LatticeSet, start: &[i64], trials: usize, stream: RngStream) -> Result<Vec<LatticePoint>> {
    check_trials(trials)?;
    check_start(set, start)?;
    (0..trials)
        .into_par_iter()
        .map(|t| walk(set, start, &mut stream.trial(t), DEFAULT_STEP_BUDGET, |_| {}).map(|r| r.0))
        .collect()
}

/// Continuum-normalized free kernel on lattice offsets at scale `n`:
/// `s_n g(z)` for `d >= 3`, and `-(1/2) a(z) + (1/pi) log sqrt(n/2) + kappa/2`
/// in the plane, both approximating `g(0, z sqrt(d/n))`.
pub fn lattice_free_kernel(d: usize, n: u64, zs: &[LatticePoint]) -> Result<Vec<f64>> {
    if d == 2 {
        let pts: Vec<[i64; 2]> = zs.iter().map(|z| [z[0], z[1]]).collect();
        let shift = (0.5 * (n as f64 / 2.0).ln()) / PI + 0.5 * potential_kernel_constant();
        Ok(potential_kernel_2d_many(&pts).into_iter().map(|a| -0.5 * a + shift).collect())
    } else {
        let table = whole_space_table(d)?;
        let s = kernel_scale(d, n);
        Ok(zs.iter().map(|z| s * table.value(z)).collect())
    }
}

/// Continuum free kernel `g(x, y)`; logarithmic `(1/pi) log(1/|x-y|)` in the plane.
pub fn continuum_free_kernel(x: &[f64], y: &[f64]) -> f64 {
    let r = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let d = x.len();
    if d == 2 {
        -r.ln() / PI
    } else {
        green_constant(d) * r.powf(2.0 - d as f64)
    }
}

/// Monte Carlo estimate of `E_x[g(X_R, y)]` over exits of the walk from the
/// grid domain, with the lattice kernel normalized to the continuum one.
/// The difference `g(x, y) - estimate` approximates `g_domain(x, y)`.
pub fn estimate_boundary_term(
    domain: &DomainSpec,
    grid: &GridSpec,
    x: &[f64],
    y: &[f64],
    trials: usize,
    stream: RngStream,
) -> Result<McEstimate> {
    let d = grid.d;
    if x.len() != d || y.len() != d {
        return Err(GreenError::DimensionMismatch { expected: d, got: x.len().min(y.len()) });
    }
    if x == y {
        return Err(GreenError::Invalid("x and y must differ".into()));
    }
    if !domain.contains(x) {
        return Err(GreenError::OutsideDomain("x must lie in the domain".into()));
    }
    let set = grid_points(domain, grid)?;
    let start = round_to_grid(x, grid);
    let target = round_to_grid(y, grid);
    let exits = sample_exits(&set, &start, trials, stream)?;
    let offsets: Vec<LatticePoint> =
        exits.iter().map(|e| e.iter().zip(&target).map(|(a, b)| a - b).collect()).collect();
    let mut uniq = offsets.clone();
    uniq.sort();
    uniq.dedup();
    let vals = lattice_free_kernel(d, grid.n, &uniq)?;
    let lookup: HashMap<&LatticePoint, f64> = uniq.iter().zip(vals).collect();
    let samples: Vec<f64> = offsets.iter().map(|o| lookup[o]).collect();
    McEstimate::from_samples(&samples, stream.seed)
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// `eta_t = t^2 / (2 Z^2)`, the passage-time representation of the
/// subordinator with `E exp(-lambda eta_t) = exp(-t sqrt(lambda))`.
pub fn sample_half_stable<R: Rng + ?Sized>(t: f64, rng: &mut R) -> Result<f64> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(GreenError::OutOfRange(format!("time must be positive, got {t}")));
    }
    loop {
        let z = standard_normal(rng);
        if z != 0.0 {
            return Ok(t * t / (2.0 * z * z));
        }
    }
}

/// Positive stable increment over time `dt` with Laplace exponent
/// `lambda^{alpha/2}`, by Kanter's representation
/// `S = sin(a pi U) / sin(pi U)^{1/a} * (sin((1-a) pi U) / E)^{(1-a)/a}`
/// with `a = alpha/2`, scaled by `dt^{1/a}`.
pub fn sample_stable_increment<R: Rng + ?Sized>(alpha: f64, dt: f64, rng: &mut R) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(GreenError::OutOfRange(format!("alpha must lie in (0, 2), got {alpha}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(GreenError::OutOfRange(format!("time step must be positive, got {dt}")));
    }
    Ok(stable_unchecked(alpha / 2.0, dt, rng))
}

fn stable_unchecked<R: Rng + ?Sized>(a: f64, dt: f64, rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        let e: f64 = Exp1.sample(rng);
        if u == 0.0 || e == 0.0 {
            continue;
        }
        let s = (a * PI * u).sin() / (PI * u).sin().powf(1.0 / a)
            * (((1.0 - a) * PI * u).sin() / e).powf((1.0 - a) / a);
        if s.is_finite() && s > 0.0 {
            return dt.powf(1.0 / a) * s;
        }
    }
}

/// Parameters of a Riesz-potential occupation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RieszMcConfig {
    pub d: usize,
    pub beta: f64,
    pub center: Vec<f64>,
    pub radius: f64,
    pub x: Vec<f64>,
    pub time_step: f64,
    pub horizon: f64,
    pub trials: usize,
    /// Reject runs whose tail bound exceeds this.
    #[serde(default)]
    pub max_tail_bound: Option<f64>,
}

/// `D |B| p_1(0) H^{1-d/alpha} / (d/alpha - 1)`, bounding the expected
/// occupation of the ball after the horizon; `p_1(0)` is the density of
/// `X_1` at the origin.
pub fn riesz_tail_bound(d: usize, beta: f64, radius: f64, horizon: f64) -> Result<f64> {
    let p = riesz_params(d, beta)?;
    let df = d as f64;
    let p1 = (2.0 * PI).powf(-df) * unit_sphere_area(d) * 2f64.powf(df / 2.0) * gamma(df / p.alpha) / p.alpha;
    let vol = unit_ball_volume(d) * radius.powf(df);
    Ok(p.d_const * vol * p1 * horizon.powf(1.0 - df / p.alpha) / (df / p.alpha - 1.0))
}

/// `D E_x int_0^H F(B_{eta_t}) dt` for `F` the indicator of a ball, with
/// `eta` the `alpha/2`-stable subordinator (the identity when `beta = 1`).
/// The time integral uses the trapezoid rule on the step grid.
pub fn estimate_riesz_potential(cfg: &RieszMcConfig, stream: RngStream) -> Result<McEstimate> {
    let d = cfg.d;
    let params = riesz_params(d, cfg.beta)?;
    if cfg.center.len() != d || cfg.x.len() != d {
        return Err(GreenError::DimensionMismatch { expected: d, got: cfg.x.len() });
    }
    if !(cfg.radius > 0.0 && cfg.time_step > 0.0 && cfg.horizon > cfg.time_step) {
        return Err(GreenError::OutOfRange("need radius > 0 and 0 < time_step < horizon".into()));
    }
    check_trials(cfg.trials)?;
    let r2 = cfg.radius * cfg.radius;
    let dist2 = |p: &[f64]| p.iter().zip(&cfg.center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    if (dist2(&cfg.x) - r2).abs() <= 1e-12 * r2 {
        return Err(GreenError::Invalid("x lies on the boundary of the ball".into()));
    }
    let tail = riesz_tail_bound(d, cfg.beta, cfg.radius, cfg.horizon)?;
    if let Some(max) = cfg.max_tail_bound {
        if tail > max {
            return Err(GreenError::OutOfRange(format!(
                "tail bound {tail:e} exceeds {max:e}; raise the horizon"
            )));
        }
    }
    let steps = (cfg.horizon / cfg.time_step).round() as usize;
    let dt = cfg.time_step;
    let a = params.alpha / 2.0;
    let deterministic = (params.alpha - 2.0).abs() < 1e-12;
    let samples: Vec<f64> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream.trial(t);
            let mut p = cfg.x.clone();
            let mut prev = if dist2(&p) < r2 { 1.0 } else { 0.0 };
            let mut acc = 0.0;
            for _ in 0..steps {
                let deta = if deterministic { dt } else { stable_unchecked(a, dt, &mut rng) };
                let sd = deta.sqrt();
                for c in p.iter_mut() {
                    *c += sd * standard_normal(&mut rng);
                }
                let cur = if dist2(&p) < r2 { 1.0 } else { 0.0 };
                acc += 0.5 * (prev + cur);
                prev = cur;
            }
            params.d_const * dt * acc
        })
        .collect();
    let mut est = McEstimate::from_samples(&samples, stream.seed)?;
    est.tail_bound = Some(tail);
    Ok(est)
}

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(GreenError::EmptySet("KS test needs nonempty samples".into()));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j, mut stat) = (0usize, 0usize, 0.0f64);
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        stat = stat.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * stat;
    Ok((stat, kolmogorov_q(lambda)))
}

/// `Q(l) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 l^2)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::killed_green_matrix;

    #[test]
    fn singleton_exits_immediately() {
        let set = LatticeSet::new(2, vec![vec![0, 0]]).unwrap();
        let s = sample_exit(&set, &[0, 0], &mut RngStream::new(1, 0).rng()).unwrap();
        assert_eq!(s.steps, 1);
        assert_eq!(s.visits, vec![1]);
        assert!(set.outer_boundary().contains(&s.exit));
    }

    #[test]
    fn start_outside_rejected() {
        let set = LatticeSet::new(2, vec![vec![0, 0]]).unwrap();
        assert!(sample_exit(&set, &[1, 0], &mut RngStream::new(1, 0).rng()).is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let pts: Vec<Vec<i64>> = (-20..=20).flat_map(|i| (-20..=20).map(move |j| vec![i, j])).collect();
        let set = LatticeSet::new(2, pts).unwrap();
        let err = sample_exit_with_budget(&set, &[0, 0], &mut RngStream::new(3, 0).rng(), 5).unwrap_err();
        assert!(matches!(err, GreenError::StepBudget(5)));
    }

    #[test]
    fn pair_visits_match_exact() {
        let set = LatticeSet::new(2, vec![vec![0, 0], vec![1, 0]]).unwrap();
        let est = mean_visits(&set, &[0, 0], 100_000, RngStream::new(11, 0)).unwrap();
        for (e, exact) in est.iter().zip([16.0 / 15.0, 4.0 / 15.0]) {
            assert!((e.mean - exact).abs() <= 4.0 * e.stderr, "{e:?} vs {exact}");
        }
    }

    #[test]
    fn visits_match_killed_matrix_row() {
        let pts: Vec<Vec<i64>> = (0..5).flat_map(|i| (0..4).map(move |j| vec![i, j])).collect();
        let set = LatticeSet::new(2, pts).unwrap();
        let g = killed_green_matrix(&set).unwrap();
        let start = [2, 1];
        let row = set.index_of(&start).unwrap();
        let est = mean_visits(&set, &start, 100_000, RngStream::new(5, 2)).unwrap();
        for (j, e) in est.iter().enumerate() {
            let exact = g.entries[(row, j)];
            assert!((e.mean - exact).abs() <= 4.0 * e.stderr + 1e-12, "{j}: {e:?} vs {exact}");
        }
    }

    #[test]
    fn reproducible_streams() {
        let set = LatticeSet::new(2, vec![vec![0, 0], vec![1, 0], vec![2, 0]]).unwrap();
        let a = sample_exits(&set, &[1, 0], 500, RngStream::new(9, 4)).unwrap();
        let b = sample_exits(&set, &[1, 0], 500, RngStream::new(9, 4)).unwrap();
        let c = sample_exits(&set, &[1, 0], 500, RngStream::new(9, 5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn half_stable_laplace() {
        let mut rng = RngStream::new(21, 0).rng();
        let draws: Vec<f64> = (0..200_000).map(|_| (-sample_half_stable(1.0, &mut rng).unwrap()).exp()).collect();
        let e = McEstimate::from_samples(&draws, 21).unwrap();
        assert!((e.mean - (-1f64).exp()).abs() <= 4.0 * e.stderr, "{e:?}");
        assert!(sample_half_stable(0.0, &mut rng).is_err());
    }

    #[test]
    fn kanter_laplace_general_alpha() {
        let mut rng = RngStream::new(4, 0).rng();
        for alpha in [0.6, 1.0, 1.7] {
            let lam: f64 = 1.3;
            let draws: Vec<f64> = (0..100_000)
                .map(|_| (-lam * sample_stable_increment(alpha, 0.7, &mut rng).unwrap()).exp())
                .collect();
            let e = McEstimate::from_samples(&draws, 4).unwrap();
            let exact = (-0.7 * lam.powf(alpha / 2.0)).exp();
            assert!((e.mean - exact).abs() <= 4.0 * e.stderr, "alpha {alpha}: {e:?} vs {exact}");
        }
        assert!(sample_stable_increment(2.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn half_stable_scaling_ks() {
        let mut rng = RngStream::new(8, 0).rng();
        let a: Vec<f64> = (0..20_000).map(|_| sample_half_stable(3.0, &mut rng).unwrap() / 9.0).collect();
        let b: Vec<f64> = (0..20_000).map(|_| sample_half_stable(1.0, &mut rng).unwrap()).collect();
        let (_, p) = ks_two_sample(&a, &b).unwrap();
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn ks_detects_shift() {
        let a: Vec<f64> = (0..2000).map(|i| i as f64 / 2000.0).collect();
        let b: Vec<f64> = a.iter().map(|v| v + 0.2).collect();
        let (stat, p) = ks_two_sample(&a, &b).unwrap();
        assert!((stat - 0.2).abs() < 1e-3 && p < 1e-10);
    }

    #[test]
    fn far_ball_gives_small_estimate() {
        let cfg = RieszMcConfig {
            d: 3,
            beta: 2.0,
            center: vec![50.0, 0.0, 0.0],
            radius: 0.5,
            x: vec![0.0; 3],
            time_step: 0.05,
            horizon: 1.0,
            trials: 1000,
            max_tail_bound: None,
        };
        let e = estimate_riesz_potential(&cfg, RngStream::new(1, 0)).unwrap();
        assert!(e.mean < 1e-2);
        assert!(e.tail_bound.unwrap() > e.mean);
        let strict = RieszMcConfig { max_tail_bound: Some(1e-6), ..cfg };
        assert!(estimate_riesz_potential(&strict, RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn boundary_term_below_kernel_bound() {
        let ball = DomainSpec::ball(vec![0.0; 3], 0.5).unwrap();
        let grid = GridSpec::new(3, 243).unwrap();
        let y = [3.0, 0.0, 0.0];
        let e = estimate_boundary_term(&ball, &grid, &[0.1, 0.0, 0.0], &y, 2000, RngStream::new(2, 0)).unwrap();
        // exits sit within one spacing of the ball
        let bound = green_constant(3) / (3.0 - 0.5 - grid.h());
        assert!(e.mean > 0.0 && e.mean <= bound, "{e:?} vs {bound}");
        assert!(estimate_boundary_term(&ball, &grid, &[0.1, 0.0, 0.0], &[0.1, 0.0, 0.0], 10, RngStream::new(2, 0)).is_err());
    }

    #[test]
    fn estimate_json_shape() {
        let e = McEstimate { mean: 1.0, stderr: 0.5, trials: 4, seed: 3, tail_bound: None };
        assert_eq!(serde_json::to_string(&e).unwrap(), r#"{"mean":1.0,"stderr":0.5,"trials":4,"seed":3}"#);
        assert!(McEstimate::from_samples(&[1.0], 0).is_err());
    }
}
