//! Green functions of the simple random walk on `Z^d`.
//!
//! Whole-space values come from the Fourier representation
//! `g(0,x) = (2 pi)^{-d} int (1 - phi(theta))^{-1} cos(theta . x) dtheta`,
//! integrated exactly over the torus after writing
//! `(1 - phi)^{-1} = int_0^inf e^{-t (1 - phi)} dt`; each angular factor is then
//! a scaled Bessel function and one time integral remains:
//! `g(0,x) = int_0^inf prod_j e^{-t/d} I_{x_j}(t/d) dt`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuum::green_constant;
use crate::error::{GreenError, Result};
use crate::numerics::{gauss_legendre, hankel_coefficients, scaled_bessel_i, series_mul};

/// Switch radius (sup norm) between tabulated and asymptotic whole-space values.
pub const DEFAULT_TABLE_RANGE: u32 = 16;
/// Largest set solved by dense Cholesky; larger sets use conjugate gradients.
pub const DENSE_SOLVE_LIMIT: usize = 5_000;
/// Largest set for which a full killed Green matrix is materialized.
pub const MAX_MATRIX_POINTS: usize = 20_000;

const HANKEL_ORDER: usize = 8;
const PANEL_NODES: usize = 30;

pub type LatticePoint = Vec<i64>;

/// Finite subset of `Z^d` in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeSet {
    d: usize,
    points: Vec<LatticePoint>,
    index: HashMap<LatticePoint, usize>,
}

impl LatticeSet {
    /// Sorts the points lexicographically; duplicates are rejected.
    pub fn new(d: usize, mut points: Vec<LatticePoint>) -> Result<Self> {
        if d == 0 {
            return Err(GreenError::OutOfRange("dimension must be positive".into()));
        }
        for p in &points {
            if p.len() != d {
                return Err(GreenError::DimensionMismatch { expected: d, got: p.len() });
            }
        }
        points.sort();
        if points.windows(2).any(|w| w[0] == w[1]) {
            return Err(GreenError::Invalid("duplicate lattice points".into()));
        }
        Ok(Self::from_sorted(d, points))
    }

    pub(crate) fn from_sorted(d: usize, points: Vec<LatticePoint>) -> Self {
        let index = points.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        LatticeSet { d, points, index }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[LatticePoint] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[i64] {
        &self.points[i]
    }

    pub fn index_of(&self, p: &[i64]) -> Option<usize> {
        self.index.get(p).copied()
    }

    pub fn contains(&self, p: &[i64]) -> bool {
        self.index.contains_key(p)
    }

    pub fn is_subset_of(&self, other: &LatticeSet) -> bool {
        self.d == other.d && self.points.iter().all(|p| other.contains(p))
    }

    /// For each point, the indices of its nearest neighbours inside the set.
    pub fn neighbor_lists(&self) -> Vec<Vec<usize>> {
        let mut buf = vec![0i64; self.d];
        self.points
            .iter()
            .map(|p| {
                let mut out = Vec::with_capacity(2 * self.d);
                buf.copy_from_slice(p);
                for j in 0..self.d {
                    for s in [-1, 1] {
                        buf[j] += s;
                        if let Some(&k) = self.index.get(buf.as_slice()) {
                            out.push(k);
                        }
                        buf[j] -= s;
                    }
                }
                out
            })
            .collect()
    }

    /// Lattice points outside the set adjacent to it (the exterior boundary).
    pub fn outer_boundary(&self) -> Vec<LatticePoint> {
        let mut out = Vec::new();
        for p in &self.points {
            for j in 0..self.d {
                for s in [-1, 1] {
                    let mut q = p.clone();
                    q[j] += s;
                    if !self.contains(&q) {
                        out.push(q);
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

#[derive(Serialize, Deserialize)]
struct LatticeSetRepr {
    d: usize,
    points: Vec<LatticePoint>,
}

impl Serialize for LatticeSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LatticeSetRepr { d: self.d, points: self.points.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for LatticeSet {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let r = LatticeSetRepr::deserialize(de)?;
        LatticeSet::new(r.d, r.points).map_err(serde::de::Error::custom)
    }
}

/// Doubling panels `[0, .5], [.5, 1], [1, 2], ...` up to `t_max`, with
/// Gauss-Legendre nodes in each.
fn time_nodes(t_max: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(PANEL_NODES);
    let mut edges = vec![0.0, 0.5, 1.0];
    while *edges.last().unwrap() < t_max {
        let last = *edges.last().unwrap();
        edges.push(2.0 * last);
    }
    let mut out = Vec::with_capacity(edges.len() * PANEL_NODES);
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        for (xi, wi) in x.iter().zip(&w) {
            out.push((c + h * xi, h * wi));
        }
    }
    out
}

/// Argument `z = t/d` beyond which the large-argument Bessel expansion is used.
fn tail_start(kmax: u64) -> f64 {
    let k = kmax as f64;
    (40.0 * k * k).max(400.0)
}

fn last_edge(t_min: f64) -> f64 {
    let mut e = 1.0;
    while e < t_min {
        e *= 2.0;
    }
    e
}

/// `int_0^inf prod_j e^{-t/d} I_{k_j}(t/d) dt` for each order tuple.
fn whole_space_integrals(d: usize, tuples: &[Vec<u64>]) -> Vec<f64> {
    let kmax = tuples.iter().flatten().copied().max().unwrap_or(0);
    let t_end = last_edge(d as f64 * tail_start(kmax));
    let nodes = time_nodes(t_end);
    let sums = nodes
        .par_iter()
        .map(|&(t, w)| {
            let ive = scaled_bessel_i(t / d as f64, kmax as usize);
            tuples
                .iter()
                .map(|tup| w * tup.iter().map(|&k| ive[k as usize]).product::<f64>())
                .collect::<Vec<f64>>()
        })
        .reduce(
            || vec![0.0; tuples.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let z_end = t_end / d as f64;
    let half_d = d as f64 / 2.0;
    tuples
        .iter()
        .zip(sums)
        .map(|(tup, body)| {
            let mut series = vec![1.0];
            for &k in tup {
                series = series_mul(&series, &hankel_coefficients(k, HANKEL_ORDER), HANKEL_ORDER);
            }
            let tail: f64 = series
                .iter()
                .enumerate()
                .map(|(m, c)| {
                    let p = half_d + m as f64 - 1.0;
                    c * z_end.powf(-p) / p
                })
                .sum::<f64>()
                * d as f64
                * (2.0 * PI).powf(-half_d);
            body + tail
        })
        .collect()
}

/// Tabulated whole-space Green function `g(0, x)` for `|x|_inf <= range`.
#[derive(Debug, Clone)]
pub struct WholeSpaceGreen {
    d: usize,
    range: u32,
    values: Vec<f64>,
    c0: f64,
}

impl WholeSpaceGreen {
    pub fn build(d: usize, range: u32) -> Result<Self> {
        if d < 3 {
            return Err(GreenError::OutOfRange(format!(
                "whole-space walk Green function needs d >= 3, got {d}"
            )));
        }
        let side = range as usize + 1;
        let cells = side.checked_pow(d as u32).unwrap_or(usize::MAX);
        if cells > 4_000_000 {
            return Err(GreenError::Resource(format!(
                "table of {side}^{d} entries is too large; lower the range"
            )));
        }
        // Sorted tuples of absolute coordinates cover the table by symmetry.
        let mut tuples: Vec<Vec<u64>> = vec![vec![]];
        for _ in 0..d {
            tuples = tuples
                .into_iter()
                .flat_map(|t| {
                    let lo = t.last().copied().unwrap_or(0);
                    (lo..=range as u64).map(move |k| {
                        let mut n = t.clone();
                        n.push(k);
                        n
                    })
                })
                .collect();
        }
        let ints = whole_space_integrals(d, &tuples);
        let lookup: HashMap<Vec<u64>, f64> = tuples.into_iter().zip(ints).collect();
        let mut values = vec![0.0; cells];
        let mut c0: f64 = 0.0;
        let mut key = vec![0u64; d];
        for (flat, v) in values.iter_mut().enumerate() {
            let mut r = flat;
            for k in key.iter_mut() {
                *k = (r % side) as u64;
                r /= side;
            }
            let mut sorted = key.clone();
            sorted.sort_unstable();
            *v = lookup[&sorted];
            let n2: u64 = key.iter().map(|k| k * k).sum();
            if n2 > 0 {
                c0 = c0.max(*v * (n2 as f64).powf((d as f64 - 2.0) / 2.0));
            }
        }
        log::info!("lattice Green table d={d} range={range}: c0 = {c0:.10}");
        Ok(WholeSpaceGreen { d, range, values, c0 })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn range(&self) -> u32 {
        self.range
    }

    /// Constant with `g(0,x) <= c0 |x|^{2-d}` for all `x != 0`.
    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn asymptote(&self, x: &[i64]) -> f64 {
        let n2: f64 = x.iter().map(|&k| (k * k) as f64).sum();
        self.d as f64 * green_constant(self.d) * n2.powf((2.0 - self.d as f64) / 2.0)
    }

    /// `g(0, x)`; tabulated inside the range, asymptotic beyond.
    pub fn value(&self, x: &[i64]) -> f64 {
        debug_assert_eq!(x.len(), self.d);
        let side = self.range as usize + 1;
        let mut flat = 0usize;
        let mut stride = 1usize;
        for &k in x {
            let a = k.unsigned_abs() as usize;
            if a > self.range as usize {
                return self.asymptote(x);
            }
            flat += a * stride;
            stride *= side;
        }
        self.values[flat]
    }

    pub fn between(&self, x: &[i64], y: &[i64]) -> f64 {
        let diff: Vec<i64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        self.value(&diff)
    }
}

/// Shared table with the default switch radius, built once per dimension.
pub fn whole_space_table(d: usize) -> Result<Arc<WholeSpaceGreen>> {
    static TABLES: OnceLock<Mutex<HashMap<usize, Arc<WholeSpaceGreen>>>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = tables.lock().expect("table cache poisoned");
    if let Some(t) = guard.get(&d) {
        return Ok(t.clone());
    }
    let mut range = DEFAULT_TABLE_RANGE;
    while ((range + 1) as usize).pow(d as u32) > 4_000_000 {
        range -= 1;
    }
    let t = Arc::new(WholeSpaceGreen::build(d, range)?);
    guard.insert(d, t.clone());
    Ok(t)
}

/// Expected number of visits to `x` of the simple walk started at 0.
pub fn whole_space_green(d: usize, x: &[i64]) -> Result<f64> {
    if x.len() != d {
        return Err(GreenError::DimensionMismatch { expected: d, got: x.len() });
    }
    Ok(whole_space_table(d)?.value(x))
}

/// Potential kernel `a(x) = sum_n p_n(0,0) - p_n(0,x)` of the planar walk,
/// for a batch of points.
pub fn potential_kernel_2d_many(xs: &[[i64; 2]]) -> Vec<f64> {
    let keys: Vec<(u64, u64)> = xs
        .iter()
        .map(|x| {
            let (a, b) = (x[0].unsigned_abs(), x[1].unsigned_abs());
            (a.min(b), a.max(b))
        })
        .collect();
    let mut uniq = keys.clone();
    uniq.sort_unstable();
    uniq.dedup();
    let kmax = uniq.iter().map(|k| k.1).max().unwrap_or(0);
    let t_end = last_edge(2.0 * tail_start(kmax));
    let nodes = time_nodes(t_end);
    let sums = nodes
        .par_iter()
        .map(|&(t, w)| {
            let ive = scaled_bessel_i(t / 2.0, kmax as usize);
            let base = ive[0] * ive[0];
            uniq.iter()
                .map(|&(a, b)| w * (base - ive[a as usize] * ive[b as usize]))
                .collect::<Vec<f64>>()
        })
        .reduce(
            || vec![0.0; uniq.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let z_end = t_end / 2.0;
    let h0 = hankel_coefficients(0, HANKEL_ORDER);
    let origin = series_mul(&h0, &h0, HANKEL_ORDER);
    let values: HashMap<(u64, u64), f64> = uniq
        .iter()
        .zip(sums)
        .map(|(&(a, b), body)| {
            if a == 0 && b == 0 {
                return ((a, b), 0.0);
            }
            let s = series_mul(
                &hankel_coefficients(a, HANKEL_ORDER),
                &hankel_coefficients(b, HANKEL_ORDER),
                HANKEL_ORDER,
            );
            let tail: f64 = (1..=HANKEL_ORDER)
                .map(|m| (origin[m] - s[m]) * z_end.powi(-(m as i32)) / m as f64)
                .sum::<f64>()
                * 2.0
                / (2.0 * PI);
            ((a, b), body + tail)
        })
        .collect();
    keys.iter().map(|k| values[k]).collect()
}

pub fn potential_kernel_2d(x: &[i64]) -> Result<f64> {
    if x.len() != 2 {
        return Err(GreenError::DimensionMismatch { expected: 2, got: x.len() });
    }
    Ok(potential_kernel_2d_many(&[[x[0], x[1]]])[0])
}

/// `(2 gamma + log 8) / pi`, the constant term of `a(x)` at infinity.
pub fn potential_kernel_constant() -> f64 {
    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
    (2.0 * EULER_GAMMA + 8f64.ln()) / PI
}

/// Symmetric matrix of expected visit counts before the walk leaves `E`.
#[derive(Debug, Clone)]
pub struct KilledGreenMatrix {
    pub set: LatticeSet,
    pub entries: DMatrix<f64>,
}

impl KilledGreenMatrix {
    pub fn dim(&self) -> usize {
        self.set.dim()
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    /// Entry for two lattice points; zero when either is outside the set.
    pub fn get(&self, x: &[i64], y: &[i64]) -> f64 {
        match (self.set.index_of(x), self.set.index_of(y)) {
            (Some(i), Some(j)) => self.entries[(i, j)],
            _ => 0.0,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let n = self.len();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(self.entries[(i, j)]);
            }
        }
        let repr = KilledGreenRepr { points: self.set.points.clone(), entries, d: self.dim() };
        Ok(serde_json::to_string(&repr)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: KilledGreenRepr = serde_json::from_str(text)?;
        let n = repr.points.len();
        if repr.entries.len() != n * n {
            return Err(GreenError::Invalid(format!(
                "expected {} entries for {n} points, got {}",
                n * n,
                repr.entries.len()
            )));
        }
        let raw = repr.points.clone();
        let set = LatticeSet::new(repr.d, repr.points)?;
        if set.points() != raw.as_slice() {
            return Err(GreenError::Invalid("points must be in lexicographic order".into()));
        }
        Ok(KilledGreenMatrix { set, entries: DMatrix::from_row_slice(n, n, &repr.entries) })
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        crate::potential::write_matrix_csv(&self.entries, w)
    }
}

#[derive(Serialize, Deserialize)]
struct KilledGreenRepr {
    points: Vec<LatticePoint>,
    entries: Vec<f64>,
    d: usize,
}

fn apply_generator(nbrs: &[Vec<usize>], inv2d: f64, u: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let s: f64 = nbrs[i].iter().map(|&k| u[k]).sum();
        *o = u[i] - inv2d * s;
    }
}

/// Solves `(I - P_E) u = rhs` by conjugate gradients (the diagonal of
/// `I - P_E` is the identity, so Jacobi preconditioning is implicit).
fn cg_solve(nbrs: &[Vec<usize>], d: usize, rhs: &[f64], rel_tol: f64) -> Result<Vec<f64>> {
    let n = rhs.len();
    let inv2d = 1.0 / (2.0 * d as f64);
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let norm_b = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_b == 0.0 {
        return Ok(x);
    }
    let mut rr = r.iter().map(|v| v * v).sum::<f64>();
    for _ in 0..(10 * n + 1000) {
        if rr.sqrt() <= rel_tol * norm_b {
            return Ok(x);
        }
        apply_generator(nbrs, inv2d, &p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(GreenError::Singular("I - P_E lost positive definiteness".into()));
        }
        let step = rr / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rr_new = r.iter().map(|v| v * v).sum::<f64>();
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(GreenError::Singular("conjugate gradients did not converge".into()))
}

const CG_TOL: f64 = 1e-13;

/// Column `g_E(., y)` for one point of the set (equal to the row by symmetry).
pub fn killed_green_column(set: &LatticeSet, y: usize) -> Result<Vec<f64>> {
    if y >= set.len() {
        return Err(GreenError::Invalid(format!("index {y} outside a set of {}", set.len())));
    }
    let nbrs = set.neighbor_lists();
    let mut rhs = vec![0.0; set.len()];
    rhs[y] = 1.0;
    cg_solve(&nbrs, set.dim(), &rhs, CG_TOL)
}

/// Killed Green matrix: `U = (I - P_E)^{-1}` with `P_E` the walk's transition
/// matrix restricted to `E`.
pub fn killed_green_matrix(set: &LatticeSet) -> Result<KilledGreenMatrix> {
    let n = set.len();
    if n == 0 {
        return Err(GreenError::EmptySet("killed Green matrix of an empty set".into()));
    }
    if n > MAX_MATRIX_POINTS {
        return Err(GreenError::Resource(format!(
            "{n} points exceeds the dense limit of {MAX_MATRIX_POINTS}"
        )));
    }
    let d = set.dim();
    let nbrs = set.neighbor_lists();
    let inv2d = 1.0 / (2.0 * d as f64);
    let entries = if n <= DENSE_SOLVE_LIMIT {
        let mut a = DMatrix::<f64>::identity(n, n);
        for (i, list) in nbrs.iter().enumerate() {
            for &k in list {
                a[(i, k)] -= inv2d;
            }
        }
        let chol = a
            .cholesky()
            .ok_or_else(|| GreenError::Singular("I - P_E is not positive definite".into()))?;
        let mut u = chol.inverse();
        u.fill_lower_triangle_with_upper_triangle();
        u
    } else {
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let mut rhs = vec![0.0; n];
                rhs[j] = 1.0;
                cg_solve(&nbrs, d, &rhs, CG_TOL)
            })
            .collect::<Result<_>>()?;
        let mut u = DMatrix::from_fn(n, n, |i, j| cols[j][i]);
        // symmetrize the iterative result
        let t = u.transpose();
        u = (u + t) * 0.5;
        u
    };
    Ok(KilledGreenMatrix { set: set.clone(), entries })
}

/// Exact law of the first exit point from `E` for the walk started at `x`:
/// `P_x(S_R = z) = sum_u g_E(x,u) / (2d)` over `u` in `E` adjacent to `z`.
pub fn exit_distribution(set: &LatticeSet, x: usize) -> Result<Vec<(LatticePoint, f64)>> {
    let row = killed_green_column(set, x)?;
    let d = set.dim();
    let inv2d = 1.0 / (2.0 * d as f64);
    let mut law: HashMap<LatticePoint, f64> = HashMap::new();
    for (i, p) in set.points().iter().enumerate() {
        for j in 0..d {
            for s in [-1, 1] {
                let mut q = p.clone();
                q[j] += s;
                if !set.contains(&q) {
                    *law.entry(q).or_insert(0.0) += row[i] * inv2d;
                }
            }
        }
    }
    let mut out: Vec<_> = law.into_iter().collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// `g_E(x, y)` from the whole-space kernel and an exit law from `x`:
/// `sum_z a(z - y) p(z) - a(x - y)` in the plane, and
/// `g(x - y) - sum_z g(z - y) p(z)` for `d >= 3`.
pub fn killed_green_via_kernel(
    set: &LatticeSet,
    x: &[i64],
    y: &[i64],
    exit_law: &[(LatticePoint, f64)],
) -> Result<f64> {
    let d = set.dim();
    if !set.contains(x) || !set.contains(y) {
        return Err(GreenError::OutsideDomain("x and y must belong to E".into()));
    }
    let mut total = 0.0;
    for (z, p) in exit_law {
        if z.len() != d {
            return Err(GreenError::DimensionMismatch { expected: d, got: z.len() });
        }
        if !(*p >= 0.0) {
            return Err(GreenError::Invalid(format!("negative exit probability {p}")));
        }
        total += p;
    }
    if total > 1.0 + 1e-9 {
        return Err(GreenError::Invalid(format!("exit law has total mass {total} > 1")));
    }
    let diff = |a: &[i64]| -> Vec<i64> { a.iter().zip(y).map(|(u, v)| u - v).collect() };
    if d == 2 {
        let mut pts: Vec<[i64; 2]> = exit_law
            .iter()
            .map(|(z, _)| {
                let v = diff(z);
                [v[0], v[1]]
            })
            .collect();
        let xy = diff(x);
        pts.push([xy[0], xy[1]]);
        let a = potential_kernel_2d_many(&pts);
        let (last, rest) = a.split_last().expect("nonempty");
        Ok(rest.iter().zip(exit_law).map(|(a, (_, p))| a * p).sum::<f64>() - last)
    } else {
        let table = whole_space_table(d)?;
        let hit: f64 = exit_law.iter().map(|(z, p)| table.value(&diff(z)) * p).sum();
        Ok(table.value(&diff(x)) - hit)
    }
}
