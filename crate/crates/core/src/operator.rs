//! Discretized Green operators on `Z^{d,n}`, their CMP functional, uniform
//! bounds and convergence studies against the continuum kernels.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuum::{check_beta, Transform};
use crate::domain::{exterior_grid, grid_points, round_to_grid, DomainSpec, GridSpec};
use crate::error::{GreenError, Result};
use crate::lattice::{
    killed_green_matrix, whole_space_table, KilledGreenMatrix, LatticeSet, WholeSpaceGreen,
    MAX_MATRIX_POINTS,
};
use crate::numerics::{format_sig, unit_ball_volume, unit_sphere_area};

#[derive(Debug, Clone)]
enum Source {
    Killed(KilledGreenMatrix),
    Free(Arc<WholeSpaceGreen>),
    /// Final entries supplied directly; used for probes.
    Matrix(DMatrix<f64>),
}

/// `K_{xw} = (d/n)^{d/2} T(s_n g(x, w))` over an index set of grid points,
/// with `s_n = n^{d/2-1}/d^{d/2}` for `d >= 3` and `1/2` for `d = 2`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: GridSpec,
    pub index: LatticeSet,
    pub transform: Transform,
    pub domain: Option<DomainSpec>,
    source: Source,
}

fn validate_transform(d: usize, t: Transform) -> Result<()> {
    match t {
        Transform::Power(b) if d >= 3 => check_beta(d, b),
        Transform::Power(b) => {
            if b >= 1.0 && b.is_finite() {
                Ok(())
            } else {
                Err(GreenError::OutOfRange(format!("power must be >= 1, got {b}")))
            }
        }
        Transform::Exp(a) if d == 2 => {
            if a > 0.0 && a < 2.0 * PI {
                Ok(())
            } else {
                Err(GreenError::OutOfRange(format!("exponential rate must lie in (0, 2pi), got {a}")))
            }
        }
        Transform::Exp(_) => Err(GreenError::OutOfRange("exponential transform needs d = 2".into())),
    }
}

/// Scale turning lattice Green values into continuum kernel values.
pub fn kernel_scale(d: usize, n: u64) -> f64 {
    if d == 2 {
        0.5
    } else {
        (n as f64).powf(d as f64 / 2.0 - 1.0) / (d as f64).powf(d as f64 / 2.0)
    }
}

/// Cell volume `(d/n)^{d/2}`.
pub fn cell_volume(d: usize, n: u64) -> f64 {
    (d as f64 / n as f64).powf(d as f64 / 2.0)
}

impl DiscreteOperator {
    /// Killed operator on the grid points of `domain`.
    pub fn killed(domain: &DomainSpec, grid: GridSpec, transform: Transform) -> Result<Self> {
        validate_transform(grid.d, transform)?;
        let set = grid_points(domain, &grid)?;
        let mut op = Self::killed_on_set(set, grid, transform)?;
        op.domain = Some(domain.clone());
        Ok(op)
    }

    /// Killed operator on an explicit lattice set (interior or exterior grids).
    pub fn killed_on_set(set: LatticeSet, grid: GridSpec, transform: Transform) -> Result<Self> {
        validate_transform(grid.d, transform)?;
        if set.dim() != grid.d {
            return Err(GreenError::DimensionMismatch { expected: grid.d, got: set.dim() });
        }
        if set.is_empty() {
            return Err(GreenError::EmptySet(format!("no grid points at n = {}", grid.n)));
        }
        let g = killed_green_matrix(&set)?;
        Ok(DiscreteOperator { grid, index: set, transform, domain: None, source: Source::Killed(g) })
    }

    /// Free-space operator (`d >= 3`) with rows indexed by the grid points
    /// within one spacing of `support`, so shifted evaluation is exact.
    pub fn free(support: &DomainSpec, grid: GridSpec, transform: Transform) -> Result<Self> {
        Self::free_with_table(support, grid, transform, whole_space_table(grid.d)?)
    }

    /// As [`DiscreteOperator::free`] with an explicit whole-space table,
    /// whose range sets where the asymptote takes over.
    pub fn free_with_table(
        support: &DomainSpec,
        grid: GridSpec,
        transform: Transform,
        table: Arc<WholeSpaceGreen>,
    ) -> Result<Self> {
        if grid.d < 3 {
            return Err(GreenError::OutOfRange("free-space operator needs d >= 3".into()));
        }
        if table.dim() != grid.d {
            return Err(GreenError::DimensionMismatch { expected: grid.d, got: table.dim() });
        }
        validate_transform(grid.d, transform)?;
        let set = exterior_grid(support, &grid)?;
        if set.len() > MAX_MATRIX_POINTS {
            return Err(GreenError::Resource(format!(
                "{} support points exceeds {MAX_MATRIX_POINTS}",
                set.len()
            )));
        }
        Ok(DiscreteOperator {
            grid,
            index: set,
            transform,
            domain: Some(support.clone()),
            source: Source::Free(table),
        })
    }

    /// Operator with prescribed entries; no Green structure is assumed.
    pub fn from_entries(grid: GridSpec, index: LatticeSet, entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != index.len() || entries.ncols() != index.len() {
            return Err(GreenError::DimensionMismatch { expected: index.len(), got: entries.nrows() });
        }
        Ok(DiscreteOperator {
            grid,
            index,
            transform: Transform::Power(1.0),
            domain: None,
            source: Source::Matrix(entries),
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.d
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn is_free(&self) -> bool {
        matches!(self.source, Source::Free(_))
    }

    /// Underlying killed Green matrix, when there is one.
    pub fn killed_green(&self) -> Option<&KilledGreenMatrix> {
        match &self.source {
            Source::Killed(g) => Some(g),
            _ => None,
        }
    }

    fn weigh(&self, g: f64) -> f64 {
        let (d, n) = (self.grid.d, self.grid.n);
        cell_volume(d, n) * self.transform.apply(kernel_scale(d, n) * g)
    }

    /// Entry between indices of the index set.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.source {
            Source::Killed(g) => self.weigh(g.entries[(i, j)]),
            Source::Free(t) => self.weigh(t.between(self.index.point(i), self.index.point(j))),
            Source::Matrix(m) => m[(i, j)],
        }
    }

    /// Entry between arbitrary lattice points. Killed and prescribed
    /// operators vanish off their index set.
    pub fn entry_at(&self, z: &[i64], w: &[i64]) -> f64 {
        match &self.source {
            Source::Free(t) => self.weigh(t.between(z, w)),
            _ => match (self.index.index_of(z), self.index.index_of(w)) {
                (Some(i), Some(j)) => self.entry(i, j),
                _ => 0.0,
            },
        }
    }

    /// Dense entry matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let rows: Vec<Vec<f64>> =
            (0..n).into_par_iter().map(|i| (0..n).map(|j| self.entry(i, j)).collect()).collect();
        DMatrix::from_fn(n, n, |i, j| rows[i][j])
    }

    /// `K f` over the index set.
    pub fn matvec(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.len() {
            return Err(GreenError::DimensionMismatch { expected: self.len(), got: f.len() });
        }
        Ok((0..self.len())
            .into_par_iter()
            .map(|i| (0..self.len()).map(|j| self.entry(i, j) * f[j]).sum())
            .collect())
    }

    /// `sum_w K_{x(n), w} F(h w + x - h x(n))`.
    pub fn apply<F: Fn(&[f64]) -> f64 + Sync>(&self, f: F, x: &[f64]) -> Result<f64> {
        let d = self.grid.d;
        if x.len() != d {
            return Err(GreenError::DimensionMismatch { expected: d, got: x.len() });
        }
        let h = self.grid.h();
        let z = round_to_grid(x, &self.grid);
        let shift: Vec<f64> = x.iter().zip(&z).map(|(xi, zi)| xi - h * *zi as f64).collect();
        let row: Option<usize> = self.index.index_of(&z);
        if row.is_none() && !self.is_free() {
            return Ok(0.0);
        }
        let total = self
            .index
            .points()
            .par_iter()
            .enumerate()
            .map(|(j, w)| {
                let p: Vec<f64> = w.iter().zip(&shift).map(|(wi, s)| h * *wi as f64 + s).collect();
                let v = f(&p);
                if v == 0.0 {
                    return 0.0;
                }
                let k = match row {
                    Some(i) => self.entry(i, j),
                    None => self.entry_at(&z, w),
                };
                k * v
            })
            .sum();
        Ok(total)
    }

    /// Samples `f` at the index points.
    pub fn sample<F: Fn(&[f64]) -> f64 + Sync>(&self, f: F) -> Vec<f64> {
        self.index.points().par_iter().map(|z| f(&self.grid.to_point(z))).collect()
    }

    /// `sum_x ((K f)(x) - 1)^+ f(x) h^d`, nonnegative for potential operators.
    pub fn cmp_functional<F: Fn(&[f64]) -> f64 + Sync>(&self, f: F) -> Result<f64> {
        self.cmp_functional_values(&self.sample(f))
    }

    /// [`DiscreteOperator::cmp_functional`] for values already on the index set.
    pub fn cmp_functional_values(&self, fv: &[f64]) -> Result<f64> {
        let kf = self.matvec(fv)?;
        let vol = cell_volume(self.grid.d, self.grid.n);
        Ok(kf.iter().zip(fv).map(|(k, v)| (k - 1.0).max(0.0) * v).sum::<f64>() * vol)
    }

    /// Whether every entry is at most the matching entry of `other` (up to
    /// `tol`), over this operator's index set.
    pub fn dominated_by(&self, other: &DiscreteOperator, tol: f64) -> bool {
        let pts = self.index.points();
        (0..pts.len()).into_par_iter().all(|i| {
            (0..pts.len()).all(|j| self.entry(i, j) <= other.entry_at(&pts[i], &pts[j]) + tol)
        })
    }
}

/// Whether `a.set ⊆ b.set` and `a <= b + tol` entrywise on `a.set`.
pub fn green_dominated(a: &KilledGreenMatrix, b: &KilledGreenMatrix, tol: f64) -> bool {
    if !a.set.is_subset_of(&b.set) {
        return false;
    }
    let map: Vec<usize> = a.set.points().iter().map(|p| b.set.index_of(p).unwrap()).collect();
    (0..map.len()).into_par_iter().all(|i| {
        (0..map.len()).all(|j| a.entries[(i, j)] <= b.entries[(map[i], map[j])] + tol)
    })
}

/// `sup_u int_S |u - z|^{-p} dz` bounded by the same integral over a ball
/// of equal volume centred at `u` (the rearrangement maximizer).
pub fn riesz_sup_integral(d: usize, p: f64, volume: f64) -> f64 {
    let rho = (volume / unit_ball_volume(d)).powf(1.0 / d as f64);
    unit_sphere_area(d) * rho.powf(d as f64 - p) / (d as f64 - p)
}

/// `Gamma(F) = g(0,0)^beta d^{(d/2)(1-beta)} + c_3 sup_u int |u-z|^{beta(2-d)} dz`
/// over the support dilated twice by `sqrt(d)` in the sup norm, with
/// `c_3 = ((c_0/d)(2 + sqrt d)^{d-2})^beta`. The integral is bounded over
/// the dilated bounding box of the support.
pub fn uniform_cap(d: usize, beta: f64, support: &DomainSpec) -> Result<f64> {
    check_beta(d, beta)?;
    let table = whole_space_table(d)?;
    let (lo, hi) = support
        .bounding_box()
        .ok_or_else(|| GreenError::Unsupported("uniform cap needs a bounded support".into()))?;
    let df = d as f64;
    let grow = 2.0 * df.sqrt();
    let volume: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a + 2.0 * grow).product();
    let g00 = table.value(&vec![0; d]);
    let c3 = ((table.c0() / df) * (2.0 + df.sqrt()).powf(df - 2.0)).powf(beta);
    Ok(g00.powf(beta) * df.powf(df / 2.0 * (1.0 - beta)) + c3 * riesz_sup_integral(d, beta * (df - 2.0), volume))
}

/// Oscillation `sup{|F(x) - F(y)| : |x - y|_inf <= delta}` estimated on a
/// grid of spacing `spacing` covering `[lo, hi]`.
pub fn oscillation<F: Fn(&[f64]) -> f64 + Sync>(
    f: F,
    lo: &[f64],
    hi: &[f64],
    spacing: f64,
    delta: f64,
) -> f64 {
    let d = lo.len();
    let counts: Vec<usize> = lo.iter().zip(hi).map(|(a, b)| ((b - a) / spacing).ceil() as usize + 1).collect();
    let reach = (delta / spacing - 1e-12).ceil().max(0.0) as i64;
    let total: usize = counts.iter().product();
    let offsets: Vec<Vec<i64>> = (0..d).fold(vec![vec![]], |acc, _| {
        acc.into_iter()
            .flat_map(|o| {
                (-reach..=reach).map(move |k| {
                    let mut q = o.clone();
                    q.push(k);
                    q
                })
            })
            .collect()
    });
    (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut base = vec![0.0; d];
            for j in (0..d).rev() {
                base[j] = lo[j] + (idx % counts[j]) as f64 * spacing;
                idx /= counts[j];
            }
            let fb = f(&base);
            offsets
                .iter()
                .map(|o| {
                    let p: Vec<f64> = base.iter().zip(o).map(|(b, k)| b + *k as f64 * spacing).collect();
                    (f(&p) - fb).abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub n: u64,
    pub value: f64,
    pub reference: f64,
    pub abs_err: f64,
    pub rel_err: f64,
    /// Observed order in the spacing, `ln(e_prev/e) / ln(h_prev/h)`.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub quantity: String,
    pub reference: f64,
    pub reference_source: String,
    pub levels: Vec<LevelResult>,
}

impl ConvergenceReport {
    pub fn from_values(
        quantity: &str,
        reference: f64,
        reference_source: &str,
        values: &[(u64, f64)],
    ) -> Result<Self> {
        if values.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(GreenError::Invalid("levels must be strictly increasing in n".into()));
        }
        let mut levels: Vec<LevelResult> = Vec::with_capacity(values.len());
        for &(n, value) in values {
            let abs_err = (value - reference).abs();
            let rate = levels.last().map(|prev| {
                (prev.abs_err / abs_err).ln() / (0.5 * (n as f64 / prev.n as f64).ln())
            });
            levels.push(LevelResult {
                n,
                value,
                reference,
                abs_err,
                rel_err: abs_err / reference.abs(),
                rate: rate.filter(|r| r.is_finite()),
            });
        }
        Ok(ConvergenceReport {
            quantity: quantity.to_string(),
            reference,
            reference_source: reference_source.to_string(),
            levels,
        })
    }

    pub fn final_rel_err(&self) -> Option<f64> {
        self.levels.last().map(|l| l.rel_err)
    }

    /// Errors strictly decrease from level to level.
    pub fn is_monotone(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].abs_err < w[0].abs_err)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["n", "value", "reference", "abs_err", "rel_err", "rate"])?;
        for l in &self.levels {
            wr.write_record([
                l.n.to_string(),
                format_sig(l.value, 6),
                format_sig(l.reference, 6),
                format_sig(l.abs_err, 6),
                format_sig(l.rel_err, 6),
                l.rate.map(|r| format_sig(r, 6)).unwrap_or_default(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Runs `value` at `n = m 9^l` for `l = 0..levels` and compares with `reference`.
pub fn converge<F: FnMut(&GridSpec) -> Result<f64>>(
    quantity: &str,
    d: usize,
    m: u64,
    levels: u32,
    reference: f64,
    reference_source: &str,
    mut value: F,
) -> Result<ConvergenceReport> {
    let mut values = Vec::with_capacity(levels as usize);
    for l in 0..levels {
        let grid = GridSpec::refinement(d, m, l)?;
        let v = value(&grid)?;
        log::info!("{quantity}: n = {} -> {v}", grid.n);
        values.push((grid.n, v));
    }
    ConvergenceReport::from_values(quantity, reference, reference_source, &values)
}

/// `(1/2) g_{E_n}(x(n), y(n))` on the unit-disk grids against the disk
/// Green kernel.
pub fn converge_disk_kernel(x: &[f64], y: &[f64], m: u64, levels: u32) -> Result<ConvergenceReport> {
    let disk = DomainSpec::ball(vec![0.0, 0.0], 1.0)?;
    if !disk.contains(x) || !disk.contains(y) {
        return Err(GreenError::OutsideDomain("x and y must lie in the unit disk".into()));
    }
    let reference = crate::continuum::disk_green_2d(1.0, x, y)?;
    converge("half killed lattice Green function", 2, m, levels, reference, "disk_green_2d", |grid| {
        let set = grid_points(&disk, grid)?;
        if set.is_empty() {
            return Ok(0.0);
        }
        let g = killed_green_matrix(&set)?;
        Ok(0.5 * g.get(&round_to_grid(x, grid), &round_to_grid(y, grid)))
    })
}

/// Free-space operator applied to the indicator of `B(center, r)` at `x`,
/// against the continuum ball integral.
pub fn converge_free_ball(
    d: usize,
    beta: f64,
    x: &[f64],
    center: &[f64],
    r: f64,
    m: u64,
    levels: u32,
) -> Result<ConvergenceReport> {
    let spec = crate::continuum::KernelSpec::free_power(d, beta)?;
    let reference =
        crate::continuum::ball_kernel_integral(&spec, x, center, r, crate::continuum::DEFAULT_QUAD_TOL)?;
    let support = DomainSpec::ball(center.to_vec(), r)?;
    let indicator = ball_indicator(center, r);
    converge("free-space operator on a ball indicator", d, m, levels, reference, "ball_kernel_integral", |grid| {
        DiscreteOperator::free(&support, *grid, Transform::Power(beta))?.apply(&indicator, x)
    })
}

/// Indicator of the open ball `B(center, r)`.
pub fn ball_indicator(center: &[f64], r: f64) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
    move |p: &[f64]| {
        let s: f64 = p.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
        if s < r * r {
            1.0
        } else {
            0.0
        }
    }
}

/// Sum of Gaussian bumps with alternating signs; a smooth sign-changing
/// test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpFunction {
    pub centers: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub width: f64,
}

impl BumpFunction {
    /// `count >= 2` bumps centred uniformly in `[lo, hi]`, weights of
    /// alternating sign with magnitudes in `[0.5, 1.5) * scale`.
    pub fn random(lo: &[f64], hi: &[f64], count: usize, scale: f64, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let count = count.max(2);
        let centers = (0..count)
            .map(|_| lo.iter().zip(hi).map(|(a, b)| rng.random_range(*a..*b)).collect())
            .collect();
        let weights = (0..count)
            .map(|k| {
                let m = scale * rng.random_range(0.5..1.5);
                if k % 2 == 0 {
                    m
                } else {
                    -m
                }
            })
            .collect();
        let diam = lo.iter().zip(hi).map(|(a, b)| b - a).fold(0.0, f64::max);
        let width = diam * rng.random_range(0.1..0.3);
        BumpFunction { centers, weights, width }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let s2 = 2.0 * self.width * self.width;
        self.centers
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| {
                let r2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                w * (-r2 / s2).exp()
            })
            .sum()
    }
}
