//! Feasible force and moment sets at hover, support queries and the
//! omnidirectional-lift (ODL) metric.
//!
//! Each propeller's reachable thrust set is inner-approximated by a polytope
//! `conv({0} ∪ vertices)`, so every support query is a small LP over convex
//! weights `λ` of the vertices.

use std::f64::consts::PI;

use nalgebra::{DVector, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::allocation::{moment_nullspace, null_space, numeric_rank, reduced_allocation, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpError};
use crate::platform::{thrust_direction, tilt_angles_of, wrap_angle, PlatformSpec, TiltCapability};

pub const DEFAULT_RESOLUTION: usize = 2048;
/// Icosphere subdivision level for dual-tilt thrust balls (642 vertices).
pub const DUAL_SUBDIVISIONS: usize = 3;
pub const RADIAL_CHORDS: usize = 64;

/// Near-uniform unit directions, closed under negation.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionGrid {
    pub directions: Vec<Vector3<f64>>,
}

impl DirectionGrid {
    /// Fibonacci lattice on the upper hemisphere plus its mirror image;
    /// `n` is rounded up to an even count.
    pub fn fibonacci(n: usize) -> Self {
        let half = n.div_ceil(2).max(1);
        let golden = PI * (3.0 - 5f64.sqrt());
        let mut directions = Vec::with_capacity(2 * half);
        for i in 0..half {
            let z = 1.0 - (i as f64 + 0.5) / half as f64;
            let rho = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            directions.push(Vector3::new(rho * phi.cos(), rho * phi.sin(), z));
        }
        let mirrored: Vec<_> = directions.iter().map(|d| -d).collect();
        directions.extend(mirrored);
        Self { directions }
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Typical angular spacing in radians.
    pub fn spacing(&self) -> f64 {
        (4.0 * PI / self.len().max(1) as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SetKind {
    Force,
    Moment,
}

/// A point cloud whose convex hull stands for a force or moment set.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledConvexSet {
    pub kind: SetKind,
    pub points: Vec<Vector3<f64>>,
}

impl SampledConvexSet {
    pub fn support(&self, d: &Vector3<f64>) -> Result<f64> {
        self.points
            .iter()
            .map(|p| p.dot(d))
            .reduce(f64::max)
            .ok_or(Error::EmptySet("support of an empty point cloud"))
    }
}

/// Whether the origin lies strictly inside the set, judged by the support
/// function over `grid`.
pub fn zero_in_interior(set: &SampledConvexSet, grid: &DirectionGrid, tol: f64) -> bool {
    grid.directions
        .iter()
        .all(|d| set.support(d).map(|h| h > tol).unwrap_or(false))
}

/// Unit-sphere vertices of a subdivided icosahedron.
pub fn icosphere(level: usize) -> Vec<Vector3<f64>> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<Vector3<f64>> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..level {
        let mut cache = std::collections::HashMap::new();
        let mut mid = |a: usize, b: usize, v: &mut Vec<Vector3<f64>>| {
            *cache.entry((a.min(b), a.max(b))).or_insert_with(|| {
                v.push((v[a] + v[b]).normalize());
                v.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut v);
            let bc = mid(b, c, &mut v);
            let ca = mid(c, a, &mut v);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    v
}

/// Polytope vertices of one propeller's reachable thrust set, in the
/// propeller's reduced coordinates.
pub fn propeller_vertices(p: &crate::platform::PropellerSpec) -> Vec<DVector<f64>> {
    let u = p.u_max;
    match &p.tilt {
        TiltCapability::Fixed { .. } => vec![DVector::from_element(1, u)],
        TiltCapability::RadialOnly { alpha } => {
            let angles: Vec<f64> = if alpha.is_full() {
                (0..RADIAL_CHORDS)
                    .map(|k| -PI + 2.0 * PI * k as f64 / RADIAL_CHORDS as f64)
                    .collect()
            } else {
                (0..=RADIAL_CHORDS)
                    .map(|k| alpha.min + (alpha.max - alpha.min) * k as f64 / RADIAL_CHORDS as f64)
                    .collect()
            };
            angles
                .into_iter()
                .map(|a| DVector::from_vec(vec![u * a.cos(), u * a.sin()]))
                .collect()
        }
        TiltCapability::Dual { alpha, beta } => {
            let reachable = |d: &Vector3<f64>| {
                let (a, b) = tilt_angles_of(d, p.gamma);
                let alt = (wrap_angle(a + PI), wrap_angle(PI - b));
                [(a, b), alt]
                    .iter()
                    .any(|&(a, b)| alpha.contains(a, 1e-12) && beta.contains(b, 1e-12))
            };
            let mut verts: Vec<DVector<f64>> = icosphere(DUAL_SUBDIVISIONS)
                .into_iter()
                .filter(|d| alpha.is_full() && beta.is_full() || reachable(d))
                .map(|d| DVector::from_column_slice((d * u).as_slice()))
                .collect();
            if verts.is_empty() {
                let d = thrust_direction(alpha.clamp(0.0), beta.clamp(0.0), p.gamma) * u;
                verts.push(DVector::from_column_slice(d.as_slice()));
            }
            verts
        }
    }
}

/// LP columns for the wrench produced by convex weights on every
/// propeller's polytope vertices.
#[derive(Debug, Clone)]
pub struct HoverPolytope {
    pub force: Vec<Vector3<f64>>,
    pub moment: Vec<Vector3<f64>>,
    /// Active-propeller slot owning each column.
    pub owner: Vec<usize>,
    reduced: Vec<DVector<f64>>,
    offsets: Vec<usize>,
    reduced_len: usize,
    n_active: usize,
}

impl HoverPolytope {
    pub fn new(platform: &PlatformSpec) -> Self {
        let a = reduced_allocation(platform);
        let mut out = Self {
            force: Vec::new(),
            moment: Vec::new(),
            owner: Vec::new(),
            reduced: Vec::new(),
            offsets: Vec::new(),
            reduced_len: a.ncols(),
            n_active: platform.num_active(),
        };
        let mut offset = 0;
        for (k, p) in platform.active().enumerate() {
            let c = p.tilt.num_reduced_columns();
            let block = a.matrix.columns(offset, c);
            out.offsets.push(offset);
            for x in propeller_vertices(p) {
                let w = block * &x;
                out.force.push(Vector3::new(w[0], w[1], w[2]));
                out.moment.push(Vector3::new(w[3], w[4], w[5]));
                out.owner.push(k);
                out.reduced.push(x);
            }
            offset += c;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.force.len()
    }

    pub fn is_empty(&self) -> bool {
        self.force.is_empty()
    }

    pub fn num_propellers(&self) -> usize {
        self.n_active
    }

    /// Adds `Σ_k λ_k moment_k = 0` and one `Σ_{k∈i} λ_k (+ slack) ≤ 1` row
    /// per propeller. `extra` appends that many trailing variables, and
    /// `margin_var` puts a coefficient 1 for that variable in each budget row.
    pub fn constrain(&self, lp: &mut LinearProgram, extra: usize, margin_var: Option<usize>) {
        let n = self.len() + extra;
        for axis in 0..3 {
            let mut row: Vec<f64> = self.moment.iter().map(|m| m[axis]).collect();
            row.resize(n, 0.0);
            lp.equality(row, 0.0);
        }
        for i in 0..self.n_active {
            let mut row: Vec<f64> = self
                .owner
                .iter()
                .map(|&o| if o == i { 1.0 } else { 0.0 })
                .collect();
            row.resize(n, 0.0);
            if let Some(j) = margin_var {
                row[j] = 1.0;
            }
            lp.at_most(row, 1.0);
        }
    }

    pub fn force_of(&self, lambda: &[f64]) -> Vector3<f64> {
        self.force
            .iter()
            .zip(lambda)
            .map(|(f, l)| f * *l)
            .sum()
    }

    pub fn moment_of(&self, lambda: &[f64]) -> Vector3<f64> {
        self.moment
            .iter()
            .zip(lambda)
            .map(|(m, l)| m * *l)
            .sum()
    }

    /// V′ corresponding to the weights `λ`.
    pub fn reduced_control(&self, lambda: &[f64]) -> DVector<f64> {
        let mut v = DVector::zeros(self.reduced_len);
        for ((x, &k), &l) in self.reduced.iter().zip(&self.owner).zip(lambda) {
            if l != 0.0 {
                let mut seg = v.rows_mut(self.offsets[k], x.len());
                seg += x * l;
            }
        }
        v
    }

    /// Support of the zero-moment force set: `max d·f` over feasible `λ`.
    pub fn force_support(&self, d: &Vector3<f64>) -> Result<(f64, Vec<f64>)> {
        let mut lp = LinearProgram::maximize(self.force.iter().map(|f| f.dot(d)).collect());
        self.constrain(&mut lp, 0, None);
        let sol = lp.solve()?;
        Ok((sol.value, sol.x))
    }

    /// Largest `t` with `t·d` in the zero-moment force set.
    pub fn force_radial(&self, d: &Vector3<f64>) -> Result<f64> {
        let n = self.len();
        let mut c = vec![0.0; n + 1];
        c[n] = 1.0;
        let mut lp = LinearProgram::maximize(c);
        self.constrain(&mut lp, 1, None);
        for axis in 0..3 {
            let mut row: Vec<f64> = self.force.iter().map(|f| f[axis]).collect();
            row.push(-d[axis]);
            lp.equality(row, 0.0);
        }
        Ok(lp.solve()?.value)
    }
}

fn ordered_map<T: Send, F>(grid: &DirectionGrid, f: F) -> Vec<T>
where
    F: Fn(&Vector3<f64>) -> T + Sync + Send,
{
    grid.directions.par_iter().map(f).collect()
}

/// The zero-moment force set: one LP maximizer per grid direction.
pub fn force_set_at_hover(platform: &PlatformSpec, resolution: usize) -> Result<SampledConvexSet> {
    let poly = HoverPolytope::new(platform);
    let grid = DirectionGrid::fibonacci(resolution);
    let points = ordered_map(&grid, |d| {
        poly.force_support(d).map(|(_, l)| poly.force_of(&l))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(SampledConvexSet {
        kind: SetKind::Force,
        points,
    })
}

/// The 26 unit directions toward the faces, edges and corners of a cube.
pub fn cube_directions() -> Vec<Vector3<f64>> {
    let mut out = Vec::with_capacity(26);
    for x in -1..=1 {
        for y in -1..=1 {
            for z in -1..=1 {
                if (x, y, z) != (0, 0, 0) {
                    out.push(Vector3::new(x as f64, y as f64, z as f64).normalize());
                }
            }
        }
    }
    out
}

/// Moments reachable while the force clears the weight: the union over 26
/// lift directions `ℓ` of `{m : ℓ·f ≥ mg}` maxima, one LP per direction.
pub fn moment_set_at_hover(platform: &PlatformSpec, resolution: usize) -> Result<SampledConvexSet> {
    let poly = HoverPolytope::new(platform);
    let grid = DirectionGrid::fibonacci(resolution);
    let mg = platform.weight();
    let n = poly.len();
    let budget_rows = |lp: &mut LinearProgram| {
        for i in 0..poly.num_propellers() {
            let row = poly.owner.iter().map(|&o| if o == i { 1.0 } else { 0.0 }).collect();
            lp.at_most(row, 1.0);
        }
    };
    let mut points = Vec::new();
    for lift in cube_directions() {
        let lift_row: Vec<f64> = poly.force.iter().map(|f| f.dot(&lift)).collect();
        let mut probe = LinearProgram::maximize(vec![0.0; n]);
        budget_rows(&mut probe);
        probe.at_least(lift_row.clone(), mg);
        if matches!(probe.solve(), Err(LpError::Infeasible(_))) {
            continue;
        }
        let found = ordered_map(&grid, |d| {
            let mut lp = LinearProgram::maximize(poly.moment.iter().map(|m| m.dot(d)).collect());
            budget_rows(&mut lp);
            lp.at_least(lift_row.clone(), mg);
            lp.solve().map(|s| poly.moment_of(&s.x))
        });
        for p in found {
            points.push(p?);
        }
    }
    if points.is_empty() {
        return Err(Error::EmptySet("no feasible control lifts the platform's weight"));
    }
    Ok(SampledConvexSet {
        kind: SetKind::Moment,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OdlResult {
    /// Inscribed-sphere radius of the zero-moment force set [N].
    pub odl: f64,
    pub resolution: usize,
    pub directions: usize,
    pub min_direction: [f64; 3],
}

/// Omnidirectional lift: the minimum over grid directions of the zero-moment
/// force-set support.
pub fn odl(platform: &PlatformSpec, resolution: usize) -> Result<OdlResult> {
    let grid = DirectionGrid::fibonacci(resolution);
    if let Some(d) = flat_force_direction(platform) {
        return Ok(OdlResult {
            odl: 0.0,
            resolution,
            directions: grid.len(),
            min_direction: [d.x, d.y, d.z],
        });
    }
    let poly = HoverPolytope::new(platform);
    let values = ordered_map(&grid, |d| poly.force_support(d).map(|(v, _)| v))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let (idx, &value) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is never empty");
    let d = grid.directions[idx];
    Ok(OdlResult {
        odl: value.max(0.0),
        resolution,
        directions: grid.len(),
        min_direction: [d.x, d.y, d.z],
    })
}

/// A unit normal to the zero-moment force map's image when that image is
/// not all of R³ (the force set then has no interior).
fn flat_force_direction(platform: &PlatformSpec) -> Option<Vector3<f64>> {
    let a = reduced_allocation(platform);
    let bm = moment_nullspace(&a, DEFAULT_RANK_TOL);
    if bm.ncols() == 0 {
        return Some(Vector3::z());
    }
    let hf = a.force_rows() * bm;
    if numeric_rank(&hf, DEFAULT_RANK_TOL) == 3 {
        return None;
    }
    let n = null_space(&hf.transpose(), DEFAULT_RANK_TOL);
    Some(Vector3::new(n[(0, 0)], n[(1, 0)], n[(2, 0)]).normalize())
}

/// Unit vectors spanning the plane orthogonal to `normal`.
fn plane_basis(normal: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let n = normal.normalize();
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let a = n.cross(&helper).normalize();
    (a, n.cross(&a))
}

/// Radius of the largest origin-centred disc in the plane orthogonal to
/// `normal` contained in the zero-moment force set, sampled at
/// `resolution` directions on the great circle.
pub fn planar_lift(platform: &PlatformSpec, normal: &Vector3<f64>, resolution: usize) -> Result<f64> {
    let poly = HoverPolytope::new(platform);
    planar_lift_with(&poly, normal, resolution)
}

fn planar_lift_with(poly: &HoverPolytope, normal: &Vector3<f64>, resolution: usize) -> Result<f64> {
    let (a, b) = plane_basis(normal);
    let n = resolution.max(4);
    let radii = (0..n)
        .into_par_iter()
        .map(|k| {
            let t = 2.0 * PI * k as f64 / n as f64;
            poly.force_radial(&(a * t.cos() + b * t.sin()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(radii.into_iter().fold(f64::INFINITY, f64::min).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanarLift {
    pub lift: f64,
    pub normal: [f64; 3],
}

/// Plane with the largest [`planar_lift`]: a coarse hemisphere search over
/// normals followed by local refinement.
pub fn best_planar_lift(
    platform: &PlatformSpec,
    normals: usize,
    circle_resolution: usize,
) -> Result<PlanarLift> {
    let poly = HoverPolytope::new(platform);
    let grid = DirectionGrid::fibonacci(2 * normals.max(1));
    let candidates: Vec<Vector3<f64>> = grid.directions[..grid.len() / 2].to_vec();
    let coarse = candidates
        .iter()
        .map(|n| planar_lift_with(&poly, n, circle_resolution).map(|v| (v, *n)))
        .collect::<Result<Vec<_>>>()?;
    let (mut best, mut best_n) = coarse
        .into_iter()
        .fold((f64::NEG_INFINITY, Vector3::z()), |acc, x| if x.0 > acc.0 { x } else { acc });
    let mut step = grid.spacing();
    for _ in 0..6 {
        let (a, b) = plane_basis(&best_n);
        let mut improved = false;
        for (da, db) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
            let n = (best_n + (a * da + b * db) * step).normalize();
            let v = planar_lift_with(&poly, &n, circle_resolution)?;
            if v > best {
                best = v;
                best_n = n;
                improved = true;
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    Ok(PlanarLift {
        lift: best,
        normal: [best_n.x, best_n.y, best_n.z],
    })
}
