//! Potential matrices: the inverse M-matrix test, the quadratic-form
//! inequality `<(Uv - 1)^+, v> >= 0`, and Hadamard transforms.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GreenError, Result};
use crate::lattice::{killed_green_matrix, KilledGreenMatrix, LatticeSet};

pub const DEFAULT_TOL: f64 = 1e-8;
/// Above this 1-norm condition number the classification is not trusted.
pub const UNRELIABLE_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Potential,
    NotPotential,
    Singular,
    /// Nonsingular but too ill-conditioned to decide at the requested tolerance.
    Unreliable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialReport {
    pub nonsingular: bool,
    pub max_offdiag_of_inverse: f64,
    pub min_row_sum_of_inverse: f64,
    pub is_potential: bool,
    pub cmp_inequality_min: Option<f64>,
    pub trials: usize,
    pub seed: u64,
    pub condition: f64,
    pub tol: f64,
    pub verdict: Verdict,
}

fn check_square(u: &DMatrix<f64>) -> Result<()> {
    if u.nrows() != u.ncols() {
        return Err(GreenError::DimensionMismatch { expected: u.nrows(), got: u.ncols() });
    }
    Ok(())
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Inverse M-matrix classification: `U` is a nonsingular potential iff
/// `U^{-1}` has nonpositive off-diagonal entries and nonnegative row sums.
/// Both tests are relative to `scale = max |U^{-1}_{ij}|`.
pub fn is_inverse_m_matrix(u: &DMatrix<f64>, tol: f64) -> PotentialReport {
    let n = u.nrows();
    let mut report = PotentialReport {
        nonsingular: false,
        max_offdiag_of_inverse: f64::NAN,
        min_row_sum_of_inverse: f64::NAN,
        is_potential: false,
        cmp_inequality_min: None,
        trials: 0,
        seed: 0,
        condition: f64::INFINITY,
        tol,
        verdict: Verdict::Singular,
    };
    if n == 0 || n != u.ncols() {
        return report;
    }
    let Some(inv) = u.clone().lu().try_inverse() else {
        return report;
    };
    let condition = one_norm(u) * one_norm(&inv);
    if !condition.is_finite() || inv.iter().any(|v| !v.is_finite()) {
        return report;
    }
    report.nonsingular = true;
    report.condition = condition;
    let scale = inv.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut max_off = f64::NEG_INFINITY;
    let mut min_row = f64::INFINITY;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            let v = inv[(i, j)];
            row += v;
            if i != j {
                max_off = max_off.max(v);
            }
        }
        min_row = min_row.min(row);
    }
    if n == 1 {
        max_off = 0.0;
    }
    report.max_offdiag_of_inverse = max_off;
    report.min_row_sum_of_inverse = min_row;
    report.is_potential = max_off <= tol * scale && min_row >= -tol * scale;
    report.verdict = if condition > UNRELIABLE_CONDITION {
        Verdict::Unreliable
    } else if report.is_potential {
        Verdict::Potential
    } else {
        Verdict::NotPotential
    };
    report
}

/// `sum_j ((Uv)_j - 1)^+ v_j`.
pub fn cmp_inequality(u: &DMatrix<f64>, v: &[f64]) -> Result<f64> {
    check_square(u)?;
    if v.len() != u.ncols() {
        return Err(GreenError::DimensionMismatch { expected: u.ncols(), got: v.len() });
    }
    let uv = u * DVector::from_column_slice(v);
    Ok(uv.iter().zip(v).map(|(w, x)| (w - 1.0).max(0.0) * x).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmpSample {
    pub min_value: f64,
    pub argmin: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

fn deterministic_candidates(u: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = u.nrows();
    let mut out = Vec::new();
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; n];
            v[i] = s;
            out.push(v);
        }
    }
    // Violations concentrate near preimages of indicator vectors; rows and
    // columns of U^{-1} at several scales probe them.
    if let Some(inv) = u.clone().lu().try_inverse() {
        if inv.iter().all(|v| v.is_finite()) {
            for i in 0..n {
                for c in [0.5, 0.9, 1.1, 1.5, 2.0, 4.0, -1.0] {
                    out.push(inv.row(i).iter().map(|v| c * v).collect());
                    out.push(inv.column(i).iter().map(|v| c * v).collect());
                }
            }
            let ones: Vec<f64> = inv.row_sum().iter().copied().collect();
            for c in [0.9, 1.0, 1.1, 2.0] {
                out.push(ones.iter().map(|v| c * v).collect());
            }
        }
    }
    out
}

fn gaussian_candidate(n: usize, rowmax: f64, seed: u64, trial: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ trial as u64);
    // Even trials are standard normal; odd trials are rescaled so that Uv is
    // of order one, where the positive part is active.
    let scale = if trial.is_multiple_of(2) {
        1.0
    } else {
        10f64.powf(rng.random_range(-1.0..1.0)) / rowmax.max(f64::MIN_POSITIVE)
    };
    (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Randomized search for a negative value of [`cmp_inequality`].
///
/// Evaluates `trials` Gaussian vectors (trial `i` seeded with `seed ^ i`)
/// plus deterministic adversarial candidates; returns the minimum found.
pub fn sample_cmp(u: &DMatrix<f64>, trials: usize, seed: u64) -> Result<CmpSample> {
    check_square(u)?;
    if trials == 0 {
        return Err(GreenError::OutOfRange("sample_cmp needs at least one trial".into()));
    }
    let n = u.nrows();
    let rowmax = u.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let fixed = deterministic_candidates(u);
    let best_fixed = fixed
        .iter()
        .enumerate()
        .map(|(i, v)| (cmp_inequality(u, v).unwrap_or(f64::INFINITY), i))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let best_random = (0..trials)
        .into_par_iter()
        .map(|t| {
            let v = gaussian_candidate(n, rowmax, seed, t);
            (cmp_inequality(u, &v).unwrap_or(f64::INFINITY), t)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .expect("trials >= 1");
    let (min_value, argmin) = match best_fixed {
        Some((fv, fi)) if fv < best_random.0 => (fv, fixed[fi].clone()),
        _ => (best_random.0, gaussian_candidate(n, rowmax, seed, best_random.1)),
    };
    Ok(CmpSample { min_value, argmin, trials, seed })
}

/// Inverse M-matrix test plus a CMP sampling certificate in one report.
pub fn classify(u: &DMatrix<f64>, tol: f64, trials: usize, seed: u64) -> Result<PotentialReport> {
    check_square(u)?;
    let mut report = is_inverse_m_matrix(u, tol);
    if trials > 0 {
        let s = sample_cmp(u, trials, seed)?;
        report.cmp_inequality_min = Some(s.min_value);
        report.trials = trials;
        report.seed = seed;
    }
    // The inequality is only guaranteed when the transpose is a potential too;
    // otherwise the sampled value is reported but carries no verdict.
    if report.verdict == Verdict::Potential && (u - u.transpose()).amax() > 0.0 {
        let t = is_inverse_m_matrix(&u.transpose(), tol).verdict;
        if t != Verdict::Potential {
            log::warn!(
                "nonsymmetric potential whose transpose is {t:?}; CMP sample minimum {:?} is informational",
                report.cmp_inequality_min
            );
        }
    }
    Ok(report)
}

fn check_nonnegative(u: &DMatrix<f64>) -> Result<()> {
    if u.iter().any(|v| !(*v >= 0.0)) {
        return Err(GreenError::Invalid("matrix must be entrywise nonnegative".into()));
    }
    Ok(())
}

/// Entrywise power `U_{ij}^beta` with `0^beta = 0`.
pub fn hadamard_power(u: &DMatrix<f64>, beta: f64) -> Result<DMatrix<f64>> {
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(GreenError::OutOfRange(format!("Hadamard power needs beta >= 1, got {beta}")));
    }
    check_nonnegative(u)?;
    Ok(u.map(|v| if v == 0.0 { 0.0 } else { v.powf(beta) }))
}

/// Entrywise `exp(alpha U_{ij})`. Any real input is accepted; the stability
/// property only concerns potentials.
pub fn hadamard_exp(u: &DMatrix<f64>, alpha: f64) -> Result<DMatrix<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(GreenError::OutOfRange(format!("Hadamard exponential needs alpha > 0, got {alpha}")));
    }
    Ok(u.map(|v| (alpha * v).exp()))
}

/// Random connected subset of `Z^d` grown from the origin by a random walk,
/// returned with its killed Green matrix.
pub fn random_potential(d: usize, size_range: (usize, usize), seed: u64) -> Result<KilledGreenMatrix> {
    let (lo, hi) = size_range;
    if !(d == 2 || d == 3) || lo == 0 || lo > hi {
        return Err(GreenError::OutOfRange(format!(
            "random_potential needs d in {{2,3}} and 1 <= min <= max, got d={d}, {lo}..={hi}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = rng.random_range(lo..=hi);
    let mut cur = vec![0i64; d];
    let mut pts = vec![cur.clone()];
    let mut seen = std::collections::HashSet::new();
    seen.insert(cur.clone());
    while pts.len() < target {
        let axis = rng.random_range(0..d);
        cur[axis] += if rng.random_bool(0.5) { 1 } else { -1 };
        if seen.insert(cur.clone()) {
            pts.push(cur.clone());
        }
    }
    killed_green_matrix(&LatticeSet::new(d, pts)?)
}

/// `count` random killed Green matrices; matrix `k` uses seed `seed + k`
/// and dimension `dims[k % dims.len()]`.
pub fn potential_population(
    dims: &[usize],
    count: usize,
    size_range: (usize, usize),
    seed: u64,
) -> Result<Vec<KilledGreenMatrix>> {
    if dims.is_empty() {
        return Err(GreenError::Invalid("no dimensions given".into()));
    }
    (0..count)
        .into_par_iter()
        .map(|k| random_potential(dims[k % dims.len()], size_range, seed.wrapping_add(k as u64)))
        .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixRepr {
    Flat { n: usize, entries: Vec<f64> },
    Lattice { points: Vec<Vec<i64>>, entries: Vec<f64>, d: usize },
    Nested { entries: Vec<Vec<f64>> },
    Bare(Vec<Vec<f64>>),
}

fn from_rows(rows: Vec<Vec<f64>>) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(GreenError::Invalid("matrix must be square".into()));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Ok(DMatrix::from_row_slice(n, n, &flat))
}

pub fn matrix_from_json(text: &str) -> Result<DMatrix<f64>> {
    match serde_json::from_str::<MatrixRepr>(text)? {
        MatrixRepr::Flat { n, entries } => {
            if entries.len() != n * n {
                return Err(GreenError::Invalid(format!("expected {} entries", n * n)));
            }
            Ok(DMatrix::from_row_slice(n, n, &entries))
        }
        MatrixRepr::Lattice { .. } => Ok(KilledGreenMatrix::from_json(text)?.entries),
        MatrixRepr::Nested { entries } | MatrixRepr::Bare(entries) => from_rows(entries),
    }
}

pub fn matrix_to_json(u: &DMatrix<f64>) -> Result<String> {
    let n = u.nrows();
    let entries: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|ij| u[ij]).collect();
    Ok(serde_json::to_string(&MatrixRepr::Flat { n, entries })?)
}

pub fn matrix_from_csv<R: std::io::Read>(r: R) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(r);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| GreenError::Invalid(format!("bad number {f:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    from_rows(rows)
}

pub fn write_matrix_csv<W: std::io::Write>(u: &DMatrix<f64>, w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for i in 0..u.nrows() {
        wtr.write_record(u.row(i).iter().map(|v| format!("{v:e}")))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Loads a matrix from `.json` or `.csv`.
pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => matrix_from_csv(text.as_bytes()),
        _ => matrix_from_json(&text),
    }
}
