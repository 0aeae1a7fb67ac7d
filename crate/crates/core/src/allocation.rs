//! Allocation maps from propeller inputs to the body wrench, plus rank and
//! null-space helpers.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::platform::{
    thrust_direction, thrust_direction_partials, tilt_angles_of, ControlInput, InputKind,
    PlatformSpec, PropellerSpec, TiltCapability,
};

pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Meaning of one allocation-matrix column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum ColumnKind {
    /// Component of the propeller's 3-D thrust vector (A).
    VectorComponent(usize),
    /// Coordinate in the propeller's reduction basis (A′ and F_fixed).
    Reduced(usize),
    /// Derivative with respect to a control input (F).
    Input(InputKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ColumnTag {
    /// Declaration index of the propeller.
    pub propeller: usize,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl ColumnTag {
    pub fn label(&self) -> String {
        let i = self.propeller + 1;
        match self.kind {
            ColumnKind::VectorComponent(c) => format!("v{i}{}", ["x", "y", "z"][c]),
            ColumnKind::Reduced(c) => format!("r{i}_{c}"),
            ColumnKind::Input(InputKind::Thrust) => format!("u{i}"),
            ColumnKind::Input(InputKind::Alpha) => format!("alpha{i}"),
            ColumnKind::Input(InputKind::Beta) => format!("beta{i}"),
        }
    }
}

/// A 6-row wrench map; rows 0–2 are force, rows 3–5 moment.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationMatrix {
    pub matrix: DMatrix<f64>,
    pub columns: Vec<ColumnTag>,
}

impl AllocationMatrix {
    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn force_rows(&self) -> DMatrix<f64> {
        self.matrix.rows(0, 3).into_owned()
    }

    pub fn moment_rows(&self) -> DMatrix<f64> {
        self.matrix.rows(3, 3).into_owned()
    }
}

fn block_column(p: &PropellerSpec, v: &Vector3<f64>) -> [f64; 6] {
    let m = p.moment_map() * v;
    [v.x, v.y, v.z, m.x, m.y, m.z]
}

fn assemble(cols: Vec<(ColumnTag, [f64; 6])>) -> AllocationMatrix {
    let matrix = DMatrix::from_fn(6, cols.len(), |r, c| cols[c].1[r]);
    AllocationMatrix {
        matrix,
        columns: cols.into_iter().map(|(t, _)| t).collect(),
    }
}

/// A: maps the stacked thrust vectors of the functional propellers to the
/// wrench; block i is `[I; skew(p_i) + r_i I]`.
pub fn vector_allocation(platform: &PlatformSpec) -> AllocationMatrix {
    let mut cols = Vec::new();
    for i in platform.active_indices() {
        let p = &platform.propellers[i];
        for c in 0..3 {
            let tag = ColumnTag {
                propeller: i,
                kind: ColumnKind::VectorComponent(c),
            };
            cols.push((tag, block_column(p, &Vector3::ith(c, 1.0))));
        }
    }
    assemble(cols)
}

/// Basis of the propeller's reachable thrust span: `v_i = W_i x_i`.
pub fn reduction_basis(p: &PropellerSpec) -> DMatrix<f64> {
    match &p.tilt {
        TiltCapability::Fixed { direction } => DMatrix::from_column_slice(3, 1, direction.as_slice()),
        TiltCapability::RadialOnly { .. } => {
            let w0 = thrust_direction(0.0, 0.0, p.gamma);
            let (w1, _) = thrust_direction_partials(0.0, 0.0, p.gamma);
            DMatrix::from_columns(&[DVector::from_column_slice(w0.as_slice()), DVector::from_column_slice(w1.as_slice())])
        }
        TiltCapability::Dual { .. } => DMatrix::identity(3, 3),
    }
}

/// A′: A with each propeller's block reduced to its tilt capability.
pub fn reduced_allocation(platform: &PlatformSpec) -> AllocationMatrix {
    let mut cols = Vec::new();
    for i in platform.active_indices() {
        let p = &platform.propellers[i];
        let w = reduction_basis(p);
        for c in 0..w.ncols() {
            let v = Vector3::new(w[(0, c)], w[(1, c)], w[(2, c)]);
            let tag = ColumnTag {
                propeller: i,
                kind: ColumnKind::Reduced(c),
            };
            cols.push((tag, block_column(p, &v)));
        }
    }
    assemble(cols)
}

/// F_fixed: one column `[v̂_i; (skew(p_i) + r_i I) v̂_i]` per propeller with
/// directions evaluated at the angles of `h0` (thrusts are ignored).
pub fn fixed_allocation(platform: &PlatformSpec, h0: &ControlInput) -> Result<AllocationMatrix> {
    h0.check_dims(platform)?;
    let cols = platform
        .active_indices()
        .into_iter()
        .enumerate()
        .map(|(k, i)| {
            let p = &platform.propellers[i];
            let (a, b) = h0.angles[k].unwrap_or((0.0, 0.0));
            let tag = ColumnTag {
                propeller: i,
                kind: ColumnKind::Reduced(0),
            };
            (tag, block_column(p, &p.direction(a, b)))
        })
        .collect();
    Ok(assemble(cols))
}

/// F: the analytic Jacobian of the wrench with respect to the flat input
/// vector, columns ordered as [`PlatformSpec::input_layout`].
pub fn full_jacobian(platform: &PlatformSpec, h0: &ControlInput) -> Result<AllocationMatrix> {
    h0.check_dims(platform)?;
    let active = platform.active_indices();
    let slot = |i: usize| active.iter().position(|&j| j == i).expect("active propeller");
    let cols = platform
        .input_layout()
        .into_iter()
        .map(|tag| {
            let k = slot(tag.propeller);
            let p = &platform.propellers[tag.propeller];
            let (a, b) = h0.angles[k].unwrap_or((0.0, 0.0));
            let b = if matches!(p.tilt, TiltCapability::RadialOnly { .. }) { 0.0 } else { b };
            let u = h0.thrust[k];
            let v = match tag.kind {
                InputKind::Thrust => p.direction(a, b),
                InputKind::Alpha => thrust_direction_partials(a, b, p.gamma).0 * u,
                InputKind::Beta => thrust_direction_partials(a, b, p.gamma).1 * u,
            };
            let ctag = ColumnTag {
                propeller: tag.propeller,
                kind: ColumnKind::Input(tag.kind),
            };
            (ctag, block_column(p, &v))
        })
        .collect();
    Ok(assemble(cols))
}

fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    m.clone().svd(false, false).singular_values
}

/// Number of singular values above `tol_rel · σ_max`.
pub fn numeric_rank(m: &DMatrix<f64>, tol_rel: f64) -> usize {
    let s = singular_values(m);
    let smax = s.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > tol_rel * smax).count()
}

/// Orthonormal basis of ker(M) under the same relative tolerance as
/// [`numeric_rank`]; zero columns when the kernel is trivial.
pub fn null_space(m: &DMatrix<f64>, tol_rel: f64) -> DMatrix<f64> {
    let n = m.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let rows = m.nrows().max(n);
    let mut padded = DMatrix::zeros(rows, n);
    padded.rows_mut(0, m.nrows()).copy_from(m);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let kernel: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| smax == 0.0 || s <= tol_rel * smax)
        .map(|(k, _)| vt.row(k).transpose())
        .collect();
    if kernel.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&kernel)
    }
}

/// B_m: basis of the null space of the moment rows of A′.
pub fn moment_nullspace(reduced: &AllocationMatrix, tol_rel: f64) -> DMatrix<f64> {
    null_space(&reduced.moment_rows(), tol_rel)
}

/// Damped (or plain, with `damping = 0`) pseudo-inverse via SVD.
pub fn pseudo_inverse(m: &DMatrix<f64>, tol_rel: f64) -> DMatrix<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.ncols(), m.nrows());
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.pseudo_inverse(tol_rel * smax.max(f64::MIN_POSITIVE))
        .expect("U and V were computed")
}

/// A vector V′ in the column basis of A′.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedControl {
    pub values: DVector<f64>,
}

impl ReducedControl {
    pub fn new(platform: &PlatformSpec, values: DVector<f64>) -> Result<Self> {
        let expected: usize = platform.active().map(|p| p.tilt.num_reduced_columns()).sum();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "reduced control",
                expected,
                found: values.len(),
            });
        }
        Ok(Self { values })
    }

    /// Per-propeller thrust vectors `W_i x_i`.
    pub fn to_vectors(&self, platform: &PlatformSpec) -> Vec<Vector3<f64>> {
        let mut offset = 0;
        platform
            .active()
            .map(|p| {
                let w = reduction_basis(p);
                let x = self.values.rows(offset, w.ncols());
                offset += w.ncols();
                let v = &w * x;
                Vector3::new(v[0], v[1], v[2])
            })
            .collect()
    }

    /// Lifts V′ to thrusts and tilt angles. Propellers with (near) zero
    /// thrust keep the angles of `previous`, or neutral angles.
    pub fn to_control(&self, platform: &PlatformSpec, previous: Option<&ControlInput>) -> ControlInput {
        let mut out = previous
            .cloned()
            .unwrap_or_else(|| ControlInput::neutral(platform));
        let mut offset = 0;
        for (k, p) in platform.active().enumerate() {
            let c = p.tilt.num_reduced_columns();
            let x = self.values.rows(offset, c);
            offset += c;
            match &p.tilt {
                TiltCapability::Fixed { .. } => out.thrust[k] = x[0].max(0.0),
                TiltCapability::RadialOnly { .. } => {
                    let u = x[0].hypot(x[1]);
                    out.thrust[k] = u;
                    if u > 1e-12 {
                        out.angles[k] = Some((x[1].atan2(x[0]), 0.0));
                    }
                }
                TiltCapability::Dual { .. } => {
                    let v = Vector3::new(x[0], x[1], x[2]);
                    let u = v.norm();
                    out.thrust[k] = u;
                    if u > 1e-12 {
                        out.angles[k] = Some(tilt_angles_of(&(v / u), p.gamma));
                    }
                }
            }
        }
        out
    }
}
