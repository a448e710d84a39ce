//! The registered experiments. Each takes resolved flags and returns an
//! [`Outcome`]; missing flags fall back to the defaults documented on the
//! flag.

use std::f64::consts::PI;

use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{Outcome, RunError, UsageError};
use crate::continuum::{ball_kernel_integral, disk_green_2d, KernelSpec, Transform, DEFAULT_QUAD_TOL};
use crate::domain::{cubic_open_set, exterior_grid, grid_points, interior_grid, round_to_grid, DomainSpec, GridSpec, Shape};
use crate::lattice::{
    killed_green_matrix, potential_kernel_2d_many, potential_kernel_constant, whole_space_table, WholeSpaceGreen,
};
use crate::montecarlo::{
    continuum_free_kernel, estimate_boundary_term, estimate_riesz_potential, lattice_free_kernel, mean_visits,
    RieszMcConfig, RngStream,
};
use crate::numerics::format_sig;
use crate::operator::{converge_disk_kernel, converge_free_ball, kernel_scale, BumpFunction, DiscreteOperator};
use crate::potential::{
    classify, hadamard_exp, hadamard_power, is_inverse_m_matrix, load_matrix, potential_population, sample_cmp,
    Verdict, DEFAULT_TOL,
};

/// Stream indices under the global seed.
pub const RIESZ_STREAM: u64 = 1;
pub const EXIT_STREAM: u64 = 2;
pub const BOUNDARY_STREAM: u64 = 3;

fn parse_json_arg(s: &str) -> Result<Value, String> {
    if let Some(path) = s.strip_prefix('@') {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else if s.trim_start().starts_with('{') {
        serde_json::from_str(s).map_err(|e| e.to_string())
    } else {
        Ok(Value::String(s.to_string()))
    }
}

/// `unit-ball`, `two-cubes` or a JSON domain (inline or `@file`).
fn domain_from(v: Option<&Value>, d: usize) -> Result<DomainSpec, RunError> {
    match v {
        None => Ok(DomainSpec::ball(vec![0.0; d], 1.0)?),
        Some(Value::String(s)) => match s.as_str() {
            "unit-ball" | "unit-disk" => Ok(DomainSpec::ball(vec![0.0; d], 1.0)?),
            "two-cubes" => {
                let mut b = vec![0i64; d];
                let a = b.clone();
                b[0] = 1;
                Ok(cubic_open_set(d as u64, vec![a, b])?)
            }
            other => Err(UsageError(format!("unknown domain shorthand {other:?}")).into()),
        },
        Some(obj) => {
            let spec: DomainSpec = serde_json::from_value(obj.clone())
                .map_err(|e| UsageError(format!("bad domain: {e}")))?;
            if spec.d != d {
                return Err(UsageError(format!("domain has d = {} but --d is {d}", spec.d)).into());
            }
            Ok(spec)
        }
    }
}

fn transform_from(beta: Option<f64>, alpha: Option<f64>) -> Result<Transform, UsageError> {
    match (beta, alpha) {
        (Some(_), Some(_)) => Err(UsageError("give either --beta or --alpha, not both".into())),
        (None, Some(a)) => Ok(Transform::Exp(a)),
        (b, None) => Ok(Transform::Power(b.unwrap_or(1.0))),
    }
}

fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String, RunError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| RunError::Failed(e.into());
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(r).map_err(fail)?;
    }
    let bytes = w.into_inner().map_err(|e| RunError::Failed(std::io::Error::other(e.to_string()).into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn fmt_point<T: ToString>(p: &[T]) -> String {
    p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable report")
}

fn point_or(v: &Option<Vec<f64>>, d: usize, default: &[f64]) -> Result<Vec<f64>, UsageError> {
    let p = v.clone().unwrap_or_else(|| {
        let mut p = vec![0.0; d];
        for (a, b) in p.iter_mut().zip(default) {
            *a = *b;
        }
        p
    });
    if p.len() != d {
        return Err(UsageError(format!("point {p:?} does not have {d} coordinates")));
    }
    Ok(p)
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct LatticeGreenArgs {
    /// Dimension (default 3).
    #[arg(long)]
    pub d: Option<usize>,
    /// Largest coordinate tabulated along the axis and the diagonal (default 16).
    #[arg(long)]
    pub range: Option<u32>,
}

pub fn lattice_green(a: &LatticeGreenArgs) -> Result<Outcome, RunError> {
    let d = a.d.unwrap_or(3);
    let range = a.range.unwrap_or(16).max(1);
    let mut pts: Vec<(&str, Vec<i64>)> = Vec::new();
    for k in 1..=range as i64 {
        let mut axis = vec![0; d];
        axis[0] = k;
        pts.push(("axis", axis));
        pts.push(("diagonal", vec![k; d]));
    }
    let (values, asym, c0): (Vec<f64>, Vec<f64>, Option<f64>) = if d == 2 {
        let xs: Vec<[i64; 2]> = pts.iter().map(|(_, p)| [p[0], p[1]]).collect();
        let vals = potential_kernel_2d_many(&xs);
        let kappa = potential_kernel_constant();
        let asym = pts
            .iter()
            .map(|(_, p)| 2.0 / PI * ((p[0] * p[0] + p[1] * p[1]) as f64).sqrt().ln() + kappa)
            .collect();
        (vals, asym, None)
    } else if d >= 3 {
        let shared = whole_space_table(d)?;
        let table = if range <= shared.range() { shared } else { std::sync::Arc::new(WholeSpaceGreen::build(d, range)?) };
        (
            pts.iter().map(|(_, p)| table.value(p)).collect(),
            pts.iter().map(|(_, p)| table.asymptote(p)).collect(),
            Some(table.c0()),
        )
    } else {
        return Err(UsageError("dimension must be at least 2".into()).into());
    };
    let mut rows = Vec::new();
    let mut json_rows = Vec::new();
    let mut pass = true;
    for (((dir, p), v), s) in pts.iter().zip(&values).zip(&asym) {
        let norm = p.iter().map(|k| (k * k) as f64).sum::<f64>().sqrt();
        let ratio = v / s;
        if norm >= 10.0 {
            pass &= if d == 2 { (v - s).abs() <= 1e-3 } else { (ratio - 1.0).abs() <= 0.05 };
        }
        rows.push(vec![
            dir.to_string(),
            fmt_point(p),
            format_sig(norm, 6),
            format_sig(*v, 6),
            format_sig(*s, 6),
            format_sig(ratio, 6),
        ]);
        json_rows.push(json!({"direction": dir, "x": p, "norm": norm, "value": v, "asymptote": s, "ratio": ratio}));
    }
    Ok(Outcome {
        report: json!({"d": d, "range": range, "c0": c0, "rows": json_rows, "pass": pass}),
        csv: Some(csv_string(&["direction", "x", "norm", "value", "asymptote", "ratio"], &rows)?),
        pass,
        summary: format!("{} points, asymptote check at |x| >= 10", rows.len()),
    })
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct KilledGreenArgs {
    /// Dimension (default 2).
    #[arg(long)]
    pub d: Option<usize>,
    /// Grid scale n, spacing sqrt(d/n) (default 18).
    #[arg(long)]
    pub n: Option<u64>,
    /// Domain: unit-ball, two-cubes, inline JSON or @file (default unit-ball).
    #[arg(long, value_parser = parse_json_arg)]
    pub domain: Option<Value>,
    /// Relative tolerance of the inverse M-matrix test.
    #[arg(long)]
    pub tol: Option<f64>,
    /// CMP sampling trials (default 1000).
    #[arg(long)]
    pub trials: Option<usize>,
}

pub fn killed_green(a: &KilledGreenArgs) -> Result<Outcome, RunError> {
    let d = a.d.unwrap_or(2);
    let grid = GridSpec::new(d, a.n.unwrap_or(18))?;
    let domain = domain_from(a.domain.as_ref(), d)?;
    let set = grid_points(&domain, &grid)?;
    let g = killed_green_matrix(&set)?;
    let report = classify(&g.entries, a.tol.unwrap_or(DEFAULT_TOL), a.trials.unwrap_or(1000), 0)?;
    let mut csv = Vec::new();
    g.write_csv(&mut csv)?;
    let matrix: Value = serde_json::from_str(&g.to_json()?).map_err(crate::GreenError::from)?;
    let pass = report.verdict == Verdict::Potential;
    Ok(Outcome {
        report: json!({"n": grid.n, "h": grid.h(), "points": set.len(), "potential": to_value(&report), "matrix": matrix}),
        csv: Some(String::from_utf8(csv).expect("utf-8")),
        pass,
        summary: format!("{} points, verdict {:?}", set.len(), report.verdict),
    })
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct CheckPotentialArgs {
    /// Matrix file (.json or .csv).
    #[arg(long)]
    pub matrix: Option<String>,
    /// Relative tolerance of the inverse M-matrix test.
    #[arg(long)]
    pub tol: Option<f64>,
    /// CMP sampling trials (default 10000).
    #[arg(long)]
    pub trials: Option<usize>,
}

pub fn check_potential(a: &CheckPotentialArgs, seed: u64) -> Result<Outcome, RunError> {
    let path = a.matrix.as_ref().ok_or_else(|| UsageError("--matrix is required".into()))?;
    let u = load_matrix(std::path::Path::new(path)).map_err(|e| match e {
        crate::GreenError::Io(io) => RunError::Usage(UsageError(format!("{path}: {io}"))),
        other => other.into(),
    })?;
    let report = classify(&u, a.tol.unwrap_or(DEFAULT_TOL), a.trials.unwrap_or(10_000), seed)?;
    let pass = report.verdict == Verdict::Potential;
    Ok(Outcome {
        summary: format!("{}x{} matrix, verdict {:?}", u.nrows(), u.ncols(), report.verdict),
        report: to_value(&report),
        csv: None,
        pass,
    })
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepArgs {
    /// Dimension of the random sets; alternates 2 and 3 when absent.
    #[arg(long)]
    pub d: Option<usize>,
    /// Hadamard powers (default 1,1.5,2,3,3.7).
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    /// Exponential rates (default 0.1,0.5,1).
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Number of random matrices (default 200).
    #[arg(long)]
    pub count: Option<usize>,
    /// Smallest set size (default 2).
    #[arg(long)]
    pub min_size: Option<usize>,
    /// Largest set size (default 40).
    #[arg(long)]
    pub max_size: Option<usize>,
    /// Relative tolerance of the inverse M-matrix test.
    #[arg(long)]
    pub tol: Option<f64>,
}

impl SweepArgs {
    fn dims(&self) -> Vec<usize> {
        self.d.map(|d| vec![d]).unwrap_or_else(|| vec![2, 3])
    }

    fn sizes(&self) -> (usize, usize) {
        (self.min_size.unwrap_or(2), self.max_size.unwrap_or(40))
    }
}

fn sweep(
    a: &SweepArgs,
    seed: u64,
    params: &[f64],
    label: &str,
    transform: impl Fn(&nalgebra::DMatrix<f64>, f64) -> crate::Result<nalgebra::DMatrix<f64>> + Sync,
) -> Result<Outcome, RunError> {
    use rayon::prelude::*;
    let tol = a.tol.unwrap_or(DEFAULT_TOL);
    let pop = potential_population(&a.dims(), a.count.unwrap_or(200), a.sizes(), seed)?;
    let results: Vec<(usize, usize, usize, f64, crate::potential::PotentialReport)> = pop
        .par_iter()
        .enumerate()
        .flat_map_iter(|(k, g)| {
            params.iter().map(move |&p| (k, g, p))
        })
        .map(|(k, g, p)| {
            let t = transform(&g.entries, p)?;
            Ok((k, g.dim(), g.len(), p, is_inverse_m_matrix(&t, tol)))
        })
        .collect::<crate::Result<_>>()?;
    let passed = results.iter().filter(|r| r.4.verdict == Verdict::Potential).count();
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|(k, d, n, p, r)| {
            vec![
                k.to_string(),
                d.to_string(),
                n.to_string(),
                format_sig(*p, 6),
                to_value(&r.verdict).as_str().unwrap_or_default().to_string(),
                format_sig(r.max_offdiag_of_inverse, 6),
                format_sig(r.min_row_sum_of_inverse, 6),
            ]
        })
        .collect();
    let per_param: Vec<Value> = params
        .iter()
        .map(|p| {
            let of: Vec<_> = results.iter().filter(|r| r.3 == *p).collect();
            let ok = of.iter().filter(|r| r.4.verdict == Verdict::Potential).count();
            json!({label: p, "passed": ok, "total": of.len()})
        })
        .collect();
    let pass = passed == results.len();
    Ok(Outcome {
        report: json!({"tol": tol, "seed": seed, "matrices": pop.len(), "passed": passed, "total": results.len(), "by_parameter": per_param, "pass": pass}),
        csv: Some(csv_string(
            &["matrix", "d", "size", label, "verdict", "max_offdiag_of_inverse", "min_row_sum_of_inverse"],
            &rows,
        )?),
        pass,
        summary: format!("{passed}/{} passed", results.len()),
    })
}

pub fn hadamard_sweep(a: &SweepArgs, seed: u64) -> Result<Outcome, RunError> {
    let betas = a.betas.clone().unwrap_or_else(|| vec![1.0, 1.5, 2.0, 3.0, 3.7]);
    sweep(a, seed, &betas, "beta", hadamard_power)
}

pub fn exp_sweep(a: &SweepArgs, seed: u64) -> Result<Outcome, RunError> {
    let alphas = a.alphas.clone().unwrap_or_else(|| vec![0.1, 0.5, 1.0]);
    sweep(a, seed, &alphas, "alpha", hadamard_exp)
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct CmpRandomArgs {
    /// Dimension of the random sets; alternates 2 and 3 when absent.
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of random matrices (default 200).
    #[arg(long)]
    pub count: Option<usize>,
    /// Sampled vectors per matrix (default 10000).
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub min_size: Option<usize>,
    #[arg(long)]
    pub max_size: Option<usize>,
}

pub fn cmp_random(a: &CmpRandomArgs, seed: u64) -> Result<Outcome, RunError> {
    let dims = a.d.map(|d| vec![d]).unwrap_or_else(|| vec![2, 3]);
    let pop = potential_population(&dims, a.count.unwrap_or(200), (a.min_size.unwrap_or(2), a.max_size.unwrap_or(40)), seed)?;
    let trials = a.trials.unwrap_or(10_000);
    let mut rows = Vec::new();
    let mut worst = f64::INFINITY;
    let mut pass = true;
    for (k, g) in pop.iter().enumerate() {
        let s = sample_cmp(&g.entries, trials, seed.wrapping_add(k as u64))?;
        let scale = g.entries.amax();
        let ok = s.min_value >= -1e-10 * scale;
        pass &= ok;
        worst = worst.min(s.min_value / scale);
        rows.push(vec![k.to_string(), g.dim().to_string(), g.len().to_string(), format_sig(s.min_value, 6), format_sig(scale, 6), ok.to_string()]);
    }
    Ok(Outcome {
        report: json!({"matrices": pop.len(), "trials": trials, "seed": seed, "worst_relative_min": worst, "pass": pass}),
        csv: Some(csv_string(&["matrix", "d", "size", "min_value", "scale", "ok"], &rows)?),
        pass,
        summary: format!("worst relative minimum {worst:e}"),
    })
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct CmpFunctionalArgs {
    /// Dimension (default 3).
    #[arg(long)]
    pub d: Option<usize>,
    /// Grid scale (default 3 * 9).
    #[arg(long)]
    pub n: Option<u64>,
    /// Domain: unit-ball, two-cubes, inline JSON or @file.
    #[arg(long, value_parser = parse_json_arg)]
    pub domain: Option<Value>,
    /// Hadamard power (default 1).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Exponential rate (d = 2 only); excludes --beta.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Number of random sign-changing functions (default 20).
    #[arg(long)]
    pub functions: Option<usize>,
}

/// Result of the discrete CMP functional for one random function.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FunctionalSample {
    pub index: usize,
    pub amplitude: f64,
    pub value: f64,
    pub threshold: f64,
}

/// Random sign-changing bump functions on the operator's grid, scaled so
/// `K f` crosses 1; returns the functional values with their thresholds
/// `-1e-8 |f|_inf^2 vol`.
pub fn cmp_functional_samples(op: &DiscreteOperator, count: usize, seed: u64) -> crate::Result<Vec<FunctionalSample>> {
    let d = op.dim();
    let pts: Vec<Vec<f64>> = op.index.points().iter().map(|z| op.grid.to_point(z)).collect();
    let lo: Vec<f64> = (0..d).map(|j| pts.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..d).map(|j| pts.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max) + 1e-9).collect();
    let rowmax = op.matvec(&vec![1.0; op.len()])?.into_iter().fold(0.0, f64::max);
    let vol = op.len() as f64 * crate::operator::cell_volume(d, op.grid.n);
    (0..count)
        .map(|k| {
            let s = seed.wrapping_add(k as u64);
            let amplitude = (1.0 + 19.0 * ((s % 97) as f64 / 96.0)) / rowmax;
            let bumps = BumpFunction::random(&lo, &hi, 3 + k % 4, amplitude, s);
            let fv = op.sample(|p| bumps.eval(p));
            let sup = fv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            Ok(FunctionalSample {
                index: k,
                amplitude,
                value: op.cmp_functional_values(&fv)?,
                threshold: -1e-8 * sup * sup * vol,
            })
        })
        .collect()
}

pub fn cmp_functional(a: &CmpFunctionalArgs, seed: u64) -> Result<Outcome, RunError> {
    let d = a.d.unwrap_or(3);
    let grid = GridSpec::new(d, a.n.unwrap_or(d as u64 * 9))?;
    let domain = domain_from(a.domain.as_ref(), d)?;
    let t = transform_from(a.beta, a.alpha)?;
    let op = DiscreteOperator::killed(&domain, grid, t)?;
    let samples = cmp_functional_samples(&op, a.functions.unwrap_or(20), seed)?;
    let pass = samples.iter().all(|s| s.value >= s.threshold);
    let rows: Vec<Vec<String>> = samples
        .iter()
        .map(|s| vec![s.index.to_string(), format_sig(s.amplitude, 6), format_sig(s.value, 6), format_sig(s.threshold, 6)])
        .collect();
    let min = samples.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
    Ok(Outcome {
        report: json!({"n": grid.n, "points": op.len(), "transform": to_value(&t), "samples": to_value(&samples), "pass": pass}),
        csv: Some(csv_string(&["function", "amplitude", "value", "threshold"], &rows)?),
        pass,
        summary: format!("{} points, smallest functional {min:e}", op.len()),
    })
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct ConvergeDiskArgs {
    /// First point (default 0.2,0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    /// Second point (default -0.3,0.1).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y: Option<Vec<f64>>,
    /// Number of levels n = m 9^l (default 4).
    #[arg(long)]
    pub levels: Option<u32>,
    /// Coarsest scale m (default 2).
    #[arg(long)]
    pub m: Option<u64>,
    /// Final relative error required to pass (default 0.05).
    #[arg(long)]
    pub tol: Option<f64>,
}

pub fn converge_disk(a: &ConvergeDiskArgs) -> Result<Outcome, RunError> {
    let x = point_or(&a.x, 2, &[0.2, 0.0])?;
    let y = point_or(&a.y, 2, &[-0.3, 0.1])?;
    let tol = a.tol.unwrap_or(0.05);
    let rep = converge_disk_kernel(&x, &y, a.m.unwrap_or(2), a.levels.unwrap_or(4))?;
    let last = rep.final_rel_err().unwrap_or(f64::INFINITY);
    let pass = rep.is_monotone() && last <= tol;
    let mut csv = Vec::new();
    rep.write_csv(&mut csv)?;
    Ok(Outcome {
        report: to_value(&rep),
        csv: Some(String::from_utf8(csv).expect("utf-8")),
        pass,
        summary: format!("final relative error {last:.4}, monotone {}", rep.is_monotone()),
    })
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct ConvergeFreeArgs {
    /// Dimension (default 3).
    #[arg(long)]
    pub d: Option<usize>,
    /// Hadamard power (default 1).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Evaluation point (default origin).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    /// Centre of the indicator ball (default origin).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,
    /// Radius of the indicator ball (default 1).
    #[arg(long)]
    pub radius: Option<f64>,
    /// Number of levels (default 3).
    #[arg(long)]
    pub levels: Option<u32>,
    /// Coarsest scale m (default 3).
    #[arg(long)]
    pub m: Option<u64>,
    /// Final relative error required to pass (default 0.03).
    #[arg(long)]
    pub tol: Option<f64>,
}

pub fn converge_free(a: &ConvergeFreeArgs) -> Result<Outcome, RunError> {
    let d = a.d.unwrap_or(3);
    let x = point_or(&a.x, d, &[])?;
    let c = point_or(&a.center, d, &[])?;
    let tol = a.tol.unwrap_or(0.03);
    let rep = converge_free_ball(d, a.beta.unwrap_or(1.0), &x, &c, a.radius.unwrap_or(1.0), a.m.unwrap_or(3), a.levels.unwrap_or(3))?;
    let last = rep.final_rel_err().unwrap_or(f64::INFINITY);
    let mut csv = Vec::new();
    rep.write_csv(&mut csv)?;
    Ok(Outcome {
        report: to_value(&rep),
        csv: Some(String::from_utf8(csv).expect("utf-8")),
        pass: last <= tol,
        summary: format!("final relative error {last:.4}"),
    })
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct RieszMcArgs {
    /// Dimension (default 3).
    #[arg(long)]
    pub d: Option<usize>,
    /// Hadamard power (default 2).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Centre of the indicator ball (default origin).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub center: Option<Vec<f64>>,
    /// Radius of the indicator ball (default 1).
    #[arg(long)]
    pub radius: Option<f64>,
    /// Starting point (default origin).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    /// Time step (default 0.01).
    #[arg(long)]
    pub time_step: Option<f64>,
    /// Time horizon (default 6).
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Number of paths (default 100000).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Largest acceptable tail bound.
    #[arg(long)]
    pub max_tail_bound: Option<f64>,
}

pub fn riesz_mc(a: &RieszMcArgs, seed: u64) -> Result<Outcome, RunError> {
    let d = a.d.unwrap_or(3);
    let beta = a.beta.unwrap_or(2.0);
    let cfg = RieszMcConfig {
        d,
        beta,
        center: point_or(&a.center, d, &[])?,
        radius: a.radius.unwrap_or(1.0),
        x: point_or(&a.x, d, &[])?,
        time_step: a.time_step.unwrap_or(0.01),
        horizon: a.horizon.unwrap_or(6.0),
        trials: a.trials.unwrap_or(100_000),
        max_tail_bound: a.max_tail_bound,
    };
    let est = estimate_riesz_potential(&cfg, RngStream::new(seed, RIESZ_STREAM))?;
    let spec = KernelSpec::free_power(d, beta)?;
    let oracle = ball_kernel_integral(&spec, &cfg.x, &cfg.center, cfg.radius, DEFAULT_QUAD_TOL)?;
    let tail = est.tail_bound.unwrap_or(0.0);
    let allowed = 3.0 * est.stderr + tail;
    let pass = (est.mean - oracle).abs() <= allowed;
    Ok(Outcome {
        report: json!({"config": to_value(&cfg), "estimate": to_value(&est), "oracle": oracle, "allowed_error": allowed, "pass": pass}),
        csv: None,
        pass,
        summary: format!("estimate {:.5} +- {:.5} (tail {:.5}) vs {:.5}", est.mean, est.stderr, tail, oracle),
    })
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct ExitMcArgs {
    /// Dimension (default 2).
    #[arg(long)]
    pub d: Option<usize>,
    /// Grid scale (default 18).
    #[arg(long)]
    pub n: Option<u64>,
    /// Domain: unit-ball, two-cubes, inline JSON or @file.
    #[arg(long, value_parser = parse_json_arg)]
    pub domain: Option<Value>,
    /// Starting point (default 0.2 on the first axis).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Option<Vec<f64>>,
    /// Pole for the boundary-term estimate; skipped when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y: Option<Vec<f64>>,
    /// Number of walks (default 100000).
    #[arg(long)]
    pub trials: Option<usize>,
}

pub fn exit_mc(a: &ExitMcArgs, seed: u64) -> Result<Outcome, RunError> {
    let d = a.d.unwrap_or(2);
    let grid = GridSpec::new(d, a.n.unwrap_or(18))?;
    let domain = domain_from(a.domain.as_ref(), d)?;
    let x = point_or(&a.x, d, &[0.2])?;
    let trials = a.trials.unwrap_or(100_000);
    let set = grid_points(&domain, &grid)?;
    let start = round_to_grid(&x, &grid);
    if !set.contains(&start) {
        return Err(UsageError(format!("x rounds to {start:?}, which is not a grid point of the domain")).into());
    }
    let g = killed_green_matrix(&set)?;
    let row = set.index_of(&start).expect("checked above");
    let est = mean_visits(&set, &start, trials, RngStream::new(seed, EXIT_STREAM))?;
    let mut rows = Vec::new();
    let mut outliers = 0usize;
    for (j, e) in est.iter().enumerate() {
        let exact = g.entries[(row, j)];
        let ok = (e.mean - exact).abs() <= 4.0 * e.stderr + 1.0 / trials as f64;
        outliers += usize::from(!ok);
        rows.push(vec![fmt_point(set.point(j)), format_sig(e.mean, 6), format_sig(e.stderr, 6), format_sig(exact, 6)]);
    }
    let mut pass = outliers == 0;
    let mut boundary = Value::Null;
    if let Some(yv) = &a.y {
        let y = point_or(&Some(yv.clone()), d, &[])?;
        let b = estimate_boundary_term(&domain, &grid, &x, &y, trials, RngStream::new(seed, BOUNDARY_STREAM))?;
        let yn = round_to_grid(&y, &grid);
        let diff: Vec<i64> = start.iter().zip(&yn).map(|(p, q)| p - q).collect();
        let free = lattice_free_kernel(d, grid.n, &[diff])?[0];
        let exact = kernel_scale(d, grid.n) * g.get(&start, &yn);
        let ok = (free - b.mean - exact).abs() <= 4.0 * b.stderr + 1e-12;
        pass &= ok;
        let continuum = match &domain.shape {
            Shape::Ball { center, radius } if d == 2 && center.iter().all(|c| *c == 0.0) => {
                Some(disk_green_2d(*radius, &x, &y)?)
            }
            _ => None,
        };
        boundary = json!({
            "estimate": to_value(&b),
            "lattice_identity": {"free_minus_estimate": free - b.mean, "exact": exact, "ok": ok},
            "continuum": {"free_minus_estimate": continuum_free_kernel(&x, &y) - b.mean, "reference": continuum},
        });
    }
    Ok(Outcome {
        report: json!({"n": grid.n, "points": set.len(), "start": start, "trials": trials, "seed": seed, "visit_outliers": outliers, "boundary_term": boundary, "pass": pass}),
        csv: Some(csv_string(&["point", "mean_visits", "stderr", "exact"], &rows)?),
        pass,
        summary: format!("{} points, {outliers} entries beyond 4 stderr", set.len()),
    })
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Default)]
#[serde(deny_unknown_fields)]
pub struct DomainGridArgs {
    /// Dimension (default 2).
    #[arg(long)]
    pub d: Option<usize>,
    /// Grid scale (default 18).
    #[arg(long)]
    pub n: Option<u64>,
    /// Domain: unit-ball, two-cubes, inline JSON or @file.
    #[arg(long, value_parser = parse_json_arg)]
    pub domain: Option<Value>,
    /// grid, interior or exterior (default grid).
    #[arg(long)]
    pub kind: Option<String>,
}

pub fn domain_grid(a: &DomainGridArgs) -> Result<Outcome, RunError> {
    let d = a.d.unwrap_or(2);
    let grid = GridSpec::new(d, a.n.unwrap_or(18))?;
    let domain = domain_from(a.domain.as_ref(), d)?;
    let kind = a.kind.clone().unwrap_or_else(|| "grid".into());
    let set = match kind.as_str() {
        "grid" => grid_points(&domain, &grid)?,
        "interior" => interior_grid(&domain, &grid)?,
        "exterior" => exterior_grid(&domain, &grid)?,
        other => return Err(UsageError(format!("unknown grid kind {other:?}")).into()),
    };
    let rows: Vec<Vec<String>> = set
        .points()
        .iter()
        .map(|z| vec![fmt_point(z), fmt_point(&grid.to_point(z).iter().map(|v| format_sig(*v, 6)).collect::<Vec<_>>())])
        .collect();
    Ok(Outcome {
        report: json!({"n": grid.n, "h": grid.h(), "kind": kind, "count": set.len(), "domain": to_value(&domain)}),
        csv: Some(csv_string(&["index", "point"], &rows)?),
        pass: true,
        summary: format!("{} {kind} points at n = {}", set.len(), grid.n),
    })
}
