//! Continuum domains and their lattice discretizations on
//! `Z^{d,n} = sqrt(d/n) Z^d`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{GreenError, Result};
use crate::lattice::{LatticePoint, LatticeSet};
use crate::numerics::unit_ball_volume;

/// Refinement factor between successive levels; each point spawns `3^d` children.
pub const REFINEMENT_FACTOR: u64 = 9;

/// Slack for comparisons against cube faces and sphere boundaries.
const FACE_EPS: f64 = 1e-9;

mod unbounded {
    //! Box corners may be infinite; JSON spells those as `null`.
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| if x.is_finite() { Some(*x) } else { None }).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize_lo<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<f64>, D::Error> {
        let v: Vec<Option<f64>> = Vec::deserialize(de)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::NEG_INFINITY)).collect())
    }

    pub fn deserialize_hi<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<f64>, D::Error> {
        let v: Vec<Option<f64>> = Vec::deserialize(de)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// Open axis-aligned box; `null` corners are unbounded.
    Box {
        #[serde(serialize_with = "unbounded::serialize", deserialize_with = "unbounded::deserialize_lo")]
        lo: Vec<f64>,
        #[serde(serialize_with = "unbounded::serialize", deserialize_with = "unbounded::deserialize_hi")]
        hi: Vec<f64>,
    },
    /// Interior of the union of closed sup-norm cubes of side `sqrt(d/m)`
    /// centred at `sqrt(d/m) k` for `k` in the basis.
    Cubic {
        height: u64,
        basis: Vec<LatticePoint>,
    },
    /// `inner ∩ B(0, radius)`.
    IntersectWithBall {
        inner: std::boxed::Box<Shape>,
        radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RawDomain {
    d: usize,
    shape: Shape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDomain", into = "RawDomain")]
pub struct DomainSpec {
    pub d: usize,
    pub shape: Shape,
    basis_index: Option<HashSet<LatticePoint>>,
}

impl TryFrom<RawDomain> for DomainSpec {
    type Error = GreenError;
    fn try_from(raw: RawDomain) -> Result<Self> {
        DomainSpec::new(raw.d, raw.shape)
    }
}

impl From<DomainSpec> for RawDomain {
    fn from(s: DomainSpec) -> Self {
        RawDomain { d: s.d, shape: s.shape }
    }
}

impl DomainSpec {
    pub fn new(d: usize, shape: Shape) -> Result<Self> {
        let mut spec = DomainSpec { d, shape, basis_index: None };
        spec.prepare()?;
        Ok(spec)
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        Self::new(center.len(), Shape::Ball { center, radius })
    }

    pub fn axis_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        Self::new(lo.len(), Shape::Box { lo, hi })
    }

    pub fn intersect_with_ball(self, radius: f64) -> Result<Self> {
        Self::new(self.d, Shape::IntersectWithBall { inner: std::boxed::Box::new(self.shape), radius })
    }

    fn prepare(&mut self) -> Result<()> {
        let d = self.d;
        if d == 0 {
            return Err(GreenError::OutOfRange("dimension must be positive".into()));
        }
        validate_shape(d, &self.shape)?;
        self.basis_index = cubic_parts(&self.shape).map(|(_, b)| b.iter().cloned().collect());
        Ok(())
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        shape_contains(&self.shape, self.basis_index.as_ref(), p)
    }

    /// `d_inf(p, complement) > h`.
    pub fn deep_inside(&self, p: &[f64], h: f64) -> bool {
        shape_deep_inside(&self.shape, self.basis_index.as_ref(), p, h)
    }

    /// `d_inf(p, domain) < h`.
    pub fn near(&self, p: &[f64], h: f64) -> Result<bool> {
        match &self.shape {
            Shape::IntersectWithBall { inner, radius } => {
                let probe_lo: Vec<f64> = p.iter().map(|x| x - h).collect();
                let probe_hi: Vec<f64> = p.iter().map(|x| x + h).collect();
                let boxes = open_boxes(inner)?;
                let center = vec![0.0; self.d];
                Ok(boxes.iter().any(|(lo, hi)| {
                    let l: Vec<f64> = lo.iter().zip(&probe_lo).map(|(a, b)| a.max(*b)).collect();
                    let u: Vec<f64> = hi.iter().zip(&probe_hi).map(|(a, b)| a.min(*b)).collect();
                    l.iter().zip(&u).all(|(a, b)| a < b) && box_ball_distance(&l, &u, &center) < *radius
                }))
            }
            _ => Ok(shape_near(&self.shape, self.basis_index.as_ref(), p, h)),
        }
    }

    /// Finite bounding box, if the domain is bounded.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        shape_bbox(self.d, &self.shape)
    }

    /// Euclidean diameter bound from the bounding box (exact for balls).
    pub fn diameter(&self) -> Option<f64> {
        if let Shape::Ball { radius, .. } = &self.shape {
            return Some(2.0 * radius);
        }
        let (lo, hi) = self.bounding_box()?;
        Some(lo.iter().zip(&hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt())
    }

    /// Lebesgue measure, where it has a closed form.
    pub fn volume(&self) -> Option<f64> {
        match &self.shape {
            Shape::Ball { radius, .. } => Some(unit_ball_volume(self.d) * radius.powi(self.d as i32)),
            Shape::Box { lo, hi } => {
                let v: f64 = lo.iter().zip(hi).map(|(a, b)| b - a).product();
                v.is_finite().then_some(v)
            }
            Shape::Cubic { height, basis } => {
                let side = (self.d as f64 / *height as f64).sqrt();
                Some(basis.len() as f64 * side.powi(self.d as i32))
            }
            Shape::IntersectWithBall { .. } => None,
        }
    }
}

fn validate_shape(d: usize, shape: &Shape) -> Result<()> {
    let dim = |len: usize| -> Result<()> {
        if len != d {
            return Err(GreenError::DimensionMismatch { expected: d, got: len });
        }
        Ok(())
    };
    match shape {
        Shape::Ball { center, radius } => {
            dim(center.len())?;
            if !(*radius > 0.0 && radius.is_finite()) {
                return Err(GreenError::OutOfRange(format!("ball radius must be positive, got {radius}")));
            }
        }
        Shape::Box { lo, hi } => {
            dim(lo.len())?;
            dim(hi.len())?;
            if lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                return Err(GreenError::Invalid("box must have lo < hi in every coordinate".into()));
            }
        }
        Shape::Cubic { height, basis } => {
            if *height == 0 {
                return Err(GreenError::OutOfRange("cubic height must be positive".into()));
            }
            if basis.is_empty() {
                return Err(GreenError::EmptySet("cubic open set needs a nonempty basis".into()));
            }
            for b in basis {
                dim(b.len())?;
            }
        }
        Shape::IntersectWithBall { inner, radius } => {
            if !(*radius > 0.0) {
                return Err(GreenError::OutOfRange(format!("radius must be positive, got {radius}")));
            }
            if matches!(**inner, Shape::IntersectWithBall { .. }) {
                return Err(GreenError::Unsupported("nested ball intersections".into()));
            }
            validate_shape(d, inner)?;
        }
    }
    Ok(())
}

fn cubic_parts(shape: &Shape) -> Option<(u64, &Vec<LatticePoint>)> {
    match shape {
        Shape::Cubic { height, basis } => Some((*height, basis)),
        Shape::IntersectWithBall { inner, .. } => cubic_parts(inner),
        _ => None,
    }
}

fn cube_side(d: usize, height: u64) -> f64 {
    (d as f64 / height as f64).sqrt()
}

/// All cube indices `k` with `|k_j - u_j| <= reach` (closed, with slack) in every coordinate.
fn cube_candidates(u: &[f64], reach: f64, closed: bool) -> Vec<LatticePoint> {
    let mut out: Vec<LatticePoint> = vec![vec![]];
    let eps = if closed { FACE_EPS } else { -FACE_EPS };
    for &x in u {
        let lo = (x - reach - eps).ceil() as i64;
        let hi = (x + reach + eps).floor() as i64;
        out = out
            .into_iter()
            .flat_map(|p| {
                (lo..=hi).map(move |k| {
                    let mut q = p.clone();
                    q.push(k);
                    q
                })
            })
            .collect();
    }
    out
}

fn shape_contains(shape: &Shape, basis: Option<&HashSet<LatticePoint>>, p: &[f64]) -> bool {
    match shape {
        Shape::Ball { center, radius } => dist2(p, center) < radius * radius,
        Shape::Box { lo, hi } => p.iter().zip(lo.iter().zip(hi)).all(|(x, (a, b))| a < x && x < b),
        Shape::Cubic { height, .. } => {
            let basis = basis.expect("prepared cubic domain");
            let side = cube_side(p.len(), *height);
            let u: Vec<f64> = p.iter().map(|x| x / side).collect();
            // Interior iff every closed cube touching p is present.
            cube_candidates(&u, 0.5, true).iter().all(|k| basis.contains(k))
        }
        Shape::IntersectWithBall { inner, radius } => {
            p.iter().map(|x| x * x).sum::<f64>() < radius * radius && shape_contains(inner, basis, p)
        }
    }
}

fn shape_deep_inside(shape: &Shape, basis: Option<&HashSet<LatticePoint>>, p: &[f64], h: f64) -> bool {
    match shape {
        Shape::Ball { center, radius } => {
            // Farthest corner of the closed sup-ball must be strictly inside.
            let far: f64 = p.iter().zip(center).map(|(x, c)| ((x - c).abs() + h).powi(2)).sum();
            far < radius * radius * (1.0 - FACE_EPS)
        }
        Shape::Box { lo, hi } => p
            .iter()
            .zip(lo.iter().zip(hi))
            .all(|(x, (a, b))| x - a > h * (1.0 + FACE_EPS) && b - x > h * (1.0 + FACE_EPS)),
        Shape::Cubic { height, .. } => {
            let basis = basis.expect("prepared cubic domain");
            let side = cube_side(p.len(), *height);
            let u: Vec<f64> = p.iter().map(|x| x / side).collect();
            cube_candidates(&u, 0.5 + h / side, true).iter().all(|k| basis.contains(k))
        }
        Shape::IntersectWithBall { inner, radius } => {
            let ball = Shape::Ball { center: vec![0.0; p.len()], radius: *radius };
            shape_deep_inside(&ball, None, p, h) && shape_deep_inside(inner, basis, p, h)
        }
    }
}

fn shape_near(shape: &Shape, basis: Option<&HashSet<LatticePoint>>, p: &[f64], h: f64) -> bool {
    match shape {
        Shape::Ball { center, radius } => {
            let lo: Vec<f64> = p.iter().map(|x| x - h).collect();
            let hi: Vec<f64> = p.iter().map(|x| x + h).collect();
            box_ball_distance(&lo, &hi, center) < radius * (1.0 - FACE_EPS)
        }
        Shape::Box { lo, hi } => p
            .iter()
            .zip(lo.iter().zip(hi))
            .all(|(x, (a, b))| a - x < h * (1.0 - FACE_EPS) && x - b < h * (1.0 - FACE_EPS)),
        Shape::Cubic { height, .. } => {
            let basis = basis.expect("prepared cubic domain");
            let side = cube_side(p.len(), *height);
            let u: Vec<f64> = p.iter().map(|x| x / side).collect();
            cube_candidates(&u, 0.5 + h / side, false).iter().any(|k| basis.contains(k))
        }
        Shape::IntersectWithBall { .. } => unreachable!("handled by DomainSpec::near"),
    }
}

/// Decomposes a shape into open boxes whose union has the same closure.
fn open_boxes(shape: &Shape) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    match shape {
        Shape::Box { lo, hi } => Ok(vec![(lo.clone(), hi.clone())]),
        Shape::Cubic { height, basis } => {
            let d = basis[0].len();
            let side = cube_side(d, *height);
            Ok(basis
                .iter()
                .map(|k| {
                    let lo = k.iter().map(|&c| (c as f64 - 0.5) * side).collect();
                    let hi = k.iter().map(|&c| (c as f64 + 0.5) * side).collect();
                    (lo, hi)
                })
                .collect())
        }
        _ => Err(GreenError::Unsupported(
            "exterior grids of ball intersections need a box or cubic inner shape".into(),
        )),
    }
}

/// Euclidean distance from `c` to the closed box `[lo, hi]`.
fn box_ball_distance(lo: &[f64], hi: &[f64], c: &[f64]) -> f64 {
    lo.iter()
        .zip(hi)
        .zip(c)
        .map(|((a, b), x)| {
            let g = if x < a {
                a - x
            } else if x > b {
                x - b
            } else {
                0.0
            };
            g * g
        })
        .sum::<f64>()
        .sqrt()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn shape_bbox(d: usize, shape: &Shape) -> Option<(Vec<f64>, Vec<f64>)> {
    match shape {
        Shape::Ball { center, radius } => Some((
            center.iter().map(|c| c - radius).collect(),
            center.iter().map(|c| c + radius).collect(),
        )),
        Shape::Box { lo, hi } => {
            let ok = lo.iter().chain(hi).all(|v| v.is_finite());
            ok.then(|| (lo.clone(), hi.clone()))
        }
        Shape::Cubic { height, basis } => {
            let side = cube_side(d, *height);
            let mut lo = vec![f64::INFINITY; d];
            let mut hi = vec![f64::NEG_INFINITY; d];
            for k in basis {
                for j in 0..d {
                    lo[j] = lo[j].min((k[j] as f64 - 0.5) * side);
                    hi[j] = hi[j].max((k[j] as f64 + 0.5) * side);
                }
            }
            Some((lo, hi))
        }
        Shape::IntersectWithBall { inner, radius } => {
            let mut lo = vec![-radius; d];
            let mut hi = vec![*radius; d];
            if let Shape::Box { lo: a, hi: b } = &**inner {
                for j in 0..d {
                    lo[j] = lo[j].max(a[j]);
                    hi[j] = hi[j].min(b[j]);
                }
            } else if let Some((a, b)) = shape_bbox(d, inner) {
                for j in 0..d {
                    lo[j] = lo[j].max(a[j]);
                    hi[j] = hi[j].min(b[j]);
                }
            }
            Some((lo, hi))
        }
    }
}

/// Lattice scale `n`: the grid `sqrt(d/n) Z^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub d: usize,
    pub n: u64,
}

impl GridSpec {
    pub fn new(d: usize, n: u64) -> Result<Self> {
        if d == 0 || n == 0 {
            return Err(GreenError::OutOfRange(format!("grid needs d >= 1 and n >= 1, got d={d}, n={n}")));
        }
        Ok(GridSpec { d, n })
    }

    /// Level `level` of the nested sequence `n = m 9^level`.
    pub fn refinement(d: usize, m: u64, level: u32) -> Result<Self> {
        Self::new(d, m * REFINEMENT_FACTOR.pow(level))
    }

    /// Next level of the nested sequence.
    pub fn refine(&self) -> Self {
        GridSpec { d: self.d, n: self.n * REFINEMENT_FACTOR }
    }

    /// Whether `finer.n / self.n` is a power of nine, so that grids nest.
    pub fn nests_into(&self, finer: &GridSpec) -> bool {
        if finer.d != self.d || !finer.n.is_multiple_of(self.n) {
            return false;
        }
        let mut q = finer.n / self.n;
        while q.is_multiple_of(REFINEMENT_FACTOR) {
            q /= REFINEMENT_FACTOR;
        }
        q == 1
    }

    /// Spacing `sqrt(d/n)`.
    pub fn h(&self) -> f64 {
        (self.d as f64 / self.n as f64).sqrt()
    }

    pub fn to_point(&self, z: &[i64]) -> Vec<f64> {
        let h = self.h();
        z.iter().map(|&k| k as f64 * h).collect()
    }
}

/// Nearest grid point; ties go to the lexicographically smaller point.
pub fn round_to_grid(x: &[f64], grid: &GridSpec) -> LatticePoint {
    let h = grid.h();
    x.iter().map(|v| (v / h - 0.5).ceil() as i64).collect()
}

fn check_dim(domain: &DomainSpec, grid: &GridSpec) -> Result<()> {
    if domain.d != grid.d {
        return Err(GreenError::DimensionMismatch { expected: domain.d, got: grid.d });
    }
    Ok(())
}

fn enumerate<F: FnMut(&[f64]) -> bool>(
    grid: &GridSpec,
    lo: &[f64],
    hi: &[f64],
    mut keep: F,
) -> Result<LatticeSet> {
    let h = grid.h();
    let ranges: Vec<(i64, i64)> = lo
        .iter()
        .zip(hi)
        .map(|(a, b)| ((a / h).floor() as i64 - 1, (b / h).ceil() as i64 + 1))
        .collect();
    let count: f64 = ranges.iter().map(|(a, b)| (b - a + 1) as f64).product();
    if count > 5e8 {
        return Err(GreenError::Resource(format!("bounding box holds {count:e} lattice points")));
    }
    let mut pts = Vec::new();
    let mut z: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    let mut x = vec![0.0; grid.d];
    'outer: loop {
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi = *zi as f64 * h;
        }
        if keep(&x) {
            pts.push(z.clone());
        }
        // odometer with the last coordinate fastest keeps lexicographic order
        for j in (0..grid.d).rev() {
            if z[j] < ranges[j].1 {
                z[j] += 1;
                continue 'outer;
            }
            z[j] = ranges[j].0;
        }
        break;
    }
    Ok(LatticeSet::from_sorted(grid.d, pts))
}

fn bbox_or_err(domain: &DomainSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    domain
        .bounding_box()
        .ok_or_else(|| GreenError::Unsupported("grid enumeration needs a bounded domain".into()))
}

/// `E_n = sqrt(n/d) (Z^{d,n} ∩ domain)`, as integer points.
pub fn grid_points(domain: &DomainSpec, grid: &GridSpec) -> Result<LatticeSet> {
    check_dim(domain, grid)?;
    let (lo, hi) = bbox_or_err(domain)?;
    let set = enumerate(grid, &lo, &hi, |x| domain.contains(x))?;
    if set.is_empty() {
        log::warn!("grid n={} has no points inside the domain", grid.n);
    }
    Ok(set)
}

/// Grid points whose sup-norm distance to the complement exceeds the spacing.
pub fn interior_grid(domain: &DomainSpec, grid: &GridSpec) -> Result<LatticeSet> {
    check_dim(domain, grid)?;
    let (lo, hi) = bbox_or_err(domain)?;
    let h = grid.h();
    let set = enumerate(grid, &lo, &hi, |x| domain.deep_inside(x, h))?;
    if set.is_empty() {
        log::warn!("interior grid n={} is empty", grid.n);
    }
    Ok(set)
}

/// Grid points whose sup-norm distance to the domain is below the spacing.
pub fn exterior_grid(domain: &DomainSpec, grid: &GridSpec) -> Result<LatticeSet> {
    check_dim(domain, grid)?;
    let (lo, hi) = bbox_or_err(domain)?;
    let h = grid.h();
    let lo: Vec<f64> = lo.iter().map(|v| v - h).collect();
    let hi: Vec<f64> = hi.iter().map(|v| v + h).collect();
    let mut err = None;
    let set = enumerate(grid, &lo, &hi, |x| match domain.near(x, h) {
        Ok(b) => b,
        Err(e) => {
            err.get_or_insert(e.to_string());
            false
        }
    })?;
    if let Some(e) = err {
        return Err(GreenError::Unsupported(e));
    }
    Ok(set)
}

/// Cubic open set of the given height and basis.
pub fn cubic_open_set(height: u64, basis: Vec<LatticePoint>) -> Result<DomainSpec> {
    let d = basis.first().map(|b| b.len()).ok_or_else(|| {
        GreenError::EmptySet("cubic open set needs a nonempty basis".into())
    })?;
    DomainSpec::new(d, Shape::Cubic { height, basis })
}
