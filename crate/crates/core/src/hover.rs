//! Static-hover feasibility, hover-control solving, the hover-orientation
//! set and actuation classification.

use nalgebra::{DVector, Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::allocation::{
    moment_nullspace, numeric_rank, pseudo_inverse, reduced_allocation, ReducedControl,
    DEFAULT_RANK_TOL,
};
use crate::error::Result;
use crate::local_hover::fixed_orientation_sustain_check;
use crate::lp::{LinearProgram, LpError};
use crate::platform::{rot_x, rot_y, wrench_of, ControlInput, PlatformSpec, TiltCapability};
use crate::wrench_sets::{
    moment_set_at_hover, odl, zero_in_interior, DirectionGrid, HoverPolytope,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoverOptions {
    /// Thrusts must stay within `[m, 1 − m]·u_max` to count as interior.
    pub thrust_margin: f64,
    /// Minimum distance of limited tilt angles from their limits [rad].
    pub angle_margin: f64,
    pub force_tol: f64,
    pub moment_tol: f64,
    pub rank_tol: f64,
}

impl Default for HoverOptions {
    fn default() -> Self {
        Self {
            thrust_margin: 0.02,
            angle_margin: 2f64.to_radians(),
            force_tol: 1e-6,
            moment_tol: 1e-8,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

/// Hover orientation parametrized as a rotation about x_B by `phi`
/// followed by y_B by `theta`.
pub fn hover_rotation(phi: f64, theta: f64) -> Matrix3<f64> {
    rot_x(phi) * rot_y(theta)
}

/// Angles `(phi, theta)` of the orientation whose body-frame gravity
/// direction `R_hᵀ z_W` is `d`.
pub fn angles_for_body_lift(d: &Vector3<f64>) -> (f64, f64) {
    let d = d.normalize();
    (d.y.clamp(-1.0, 1.0).asin(), (-d.x).atan2(d.z))
}

/// Body-frame force that cancels gravity at orientation `r_h`.
pub fn hover_force(platform: &PlatformSpec, r_h: &Matrix3<f64>) -> Vector3<f64> {
    r_h.transpose() * Vector3::z() * platform.weight()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoverSolution {
    pub orientation: Matrix3<f64>,
    pub control: ControlInput,
    /// `‖f(H0) − R_hᵀ m g z_W‖` [N].
    pub force_error: f64,
    /// `‖m(H0)‖` [N·m].
    pub moment_norm: f64,
    /// Whether `H0` meets the thrust and angle interior margins.
    pub interior: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HoverOutcome {
    Hover(HoverSolution),
    Infeasible,
}

impl HoverOutcome {
    pub fn solution(&self) -> Option<&HoverSolution> {
        match self {
            Self::Hover(s) => Some(s),
            Self::Infeasible => None,
        }
    }

    pub fn is_interior(&self) -> bool {
        self.solution().is_some_and(|s| s.interior)
    }
}

fn is_interior(platform: &PlatformSpec, h: &ControlInput, opts: &HoverOptions) -> bool {
    platform.active().enumerate().all(|(k, p)| {
        let u = h.thrust[k];
        let m = opts.thrust_margin * p.u_max;
        if !(u >= m && u <= p.u_max - m) {
            return false;
        }
        let (a, b) = h.angles[k].unwrap_or((0.0, 0.0));
        match &p.tilt {
            TiltCapability::Fixed { .. } => true,
            TiltCapability::RadialOnly { alpha } => alpha.margin(a) >= opts.angle_margin,
            TiltCapability::Dual { alpha, beta } => {
                alpha.margin(a) >= opts.angle_margin && beta.margin(b) >= opts.angle_margin
            }
        }
    })
}

fn within_limits(platform: &PlatformSpec, h: &ControlInput) -> bool {
    h.validate(platform, 1e-9).is_ok()
}

fn evaluate(
    platform: &PlatformSpec,
    r_h: &Matrix3<f64>,
    h: ControlInput,
    opts: &HoverOptions,
) -> Option<HoverSolution> {
    if !within_limits(platform, &h) {
        return None;
    }
    let w = wrench_of(platform, &h).ok()?;
    let force_error = (w.force - hover_force(platform, r_h)).norm();
    let moment_norm = w.moment.norm();
    if force_error > opts.force_tol || moment_norm > opts.moment_tol {
        return None;
    }
    Some(HoverSolution {
        orientation: *r_h,
        interior: is_interior(platform, &h, opts),
        control: h,
        force_error,
        moment_norm,
    })
}

/// Minimum-norm V′ solving `A′ V′ = [R_hᵀ m g z_W; 0]`, if consistent.
fn min_norm_witness(platform: &PlatformSpec, r_h: &Matrix3<f64>, opts: &HoverOptions) -> Option<ControlInput> {
    let a = reduced_allocation(platform);
    let f = hover_force(platform, r_h);
    let target = DVector::from_vec(vec![f.x, f.y, f.z, 0.0, 0.0, 0.0]);
    let v = pseudo_inverse(&a.matrix, opts.rank_tol) * &target;
    if (&a.matrix * &v - &target).amax() > 1e-9 * (1.0 + platform.weight()) {
        return None;
    }
    // fixed propellers cannot reverse thrust
    let mut offset = 0;
    for p in platform.active() {
        if matches!(p.tilt, TiltCapability::Fixed { .. }) && v[offset] < 0.0 {
            return None;
        }
        offset += p.tilt.num_reduced_columns();
    }
    Some(ReducedControl::new(platform, v).ok()?.to_control(platform, None))
}

/// Max-margin witness over the polytope inner approximation:
/// maximize `t` with `Σ_{k∈i} λ_k + t ≤ 1`.
fn margin_witness(platform: &PlatformSpec, r_h: &Matrix3<f64>) -> Result<Option<ControlInput>> {
    let poly = HoverPolytope::new(platform);
    let n = poly.len();
    let f = hover_force(platform, r_h);
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut lp = LinearProgram::maximize(c);
    poly.constrain(&mut lp, 1, Some(n));
    for axis in 0..3 {
        let mut row: Vec<f64> = poly.force.iter().map(|v| v[axis]).collect();
        row.push(0.0);
        lp.equality(row, f[axis]);
    }
    match lp.solve() {
        Ok(sol) => {
            let v = poly.reduced_control(&sol.x[..n]);
            Ok(Some(ReducedControl::new(platform, v)?.to_control(platform, None)))
        }
        Err(LpError::Infeasible(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Finds a control that hovers the platform at orientation `r_h`.
///
/// The minimum-norm solution of the reduced allocation is tried first; if
/// it violates the interior margins, a max-margin LP over the polytope
/// approximation takes over.
pub fn solve_hover(platform: &PlatformSpec, r_h: &Matrix3<f64>, opts: &HoverOptions) -> Result<HoverOutcome> {
    let first = min_norm_witness(platform, r_h, opts).and_then(|h| evaluate(platform, r_h, h, opts));
    if let Some(s) = &first {
        if s.interior {
            return Ok(HoverOutcome::Hover(s.clone()));
        }
    }
    let second = margin_witness(platform, r_h)?.and_then(|h| evaluate(platform, r_h, h, opts));
    Ok(match (first, second) {
        (_, Some(s)) if s.interior => HoverOutcome::Hover(s),
        (Some(s), _) | (None, Some(s)) => HoverOutcome::Hover(s),
        (None, None) => HoverOutcome::Infeasible,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoverCheck {
    pub hoverable: bool,
    pub rank_am: usize,
    /// Largest zero-moment force magnitude found [N].
    pub max_lift: f64,
    /// Body-frame direction of that force.
    pub max_lift_direction: Vector3<f64>,
    /// Whether 0 is interior to the moment set at hover.
    pub moment_interior: bool,
    pub witness: Option<HoverSolution>,
}

/// Static-hover test: full moment rank, enough zero-moment lift, and a
/// hover control along the direction of largest lift (or level attitude
/// when that already works).
pub fn can_statically_hover(
    platform: &PlatformSpec,
    resolution: usize,
    opts: &HoverOptions,
) -> Result<HoverCheck> {
    let a = reduced_allocation(platform);
    let rank_am = numeric_rank(&a.moment_rows(), opts.rank_tol);
    let poly = HoverPolytope::new(platform);
    let grid = DirectionGrid::fibonacci(resolution);
    let supports = grid
        .directions
        .par_iter()
        .map(|d| poly.force_support(d).map(|(_, l)| poly.force_of(&l)))
        .collect::<Result<Vec<_>>>()?;
    let (max_lift, max_lift_direction) = supports
        .iter()
        .fold((0.0, Vector3::z()), |acc, f| {
            let n = f.norm();
            if n > acc.0 + 1e-12 {
                (n, f / n)
            } else {
                acc
            }
        });
    let mut check = HoverCheck {
        hoverable: false,
        rank_am,
        max_lift,
        max_lift_direction,
        moment_interior: false,
        witness: None,
    };
    if rank_am < 3 || max_lift < platform.weight() {
        return Ok(check);
    }
    let level = solve_hover(platform, &Matrix3::identity(), opts)?;
    let outcome = if level.is_interior() {
        level
    } else {
        let (phi, theta) = angles_for_body_lift(&max_lift_direction);
        match solve_hover(platform, &hover_rotation(phi, theta), opts)? {
            HoverOutcome::Infeasible => level,
            found => found,
        }
    };
    check.witness = outcome.solution().cloned();
    check.hoverable = check.witness.is_some();
    check.moment_interior = match moment_set_at_hover(platform, 64) {
        Ok(set) => zero_in_interior(&set, &DirectionGrid::fibonacci(64), 1e-9),
        Err(_) => false,
    };
    Ok(check)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoverCell {
    pub phi_deg: f64,
    pub theta_deg: f64,
    pub outcome: HoverOutcome,
}

/// Grid over `[−180°, 180°)` in both angles, one hover solve per cell.
pub fn orientation_grid(step_deg: f64) -> Vec<(f64, f64)> {
    let n = (360.0 / step_deg).round().max(1.0) as usize;
    let vals: Vec<f64> = (0..n).map(|k| -180.0 + step_deg * k as f64).collect();
    let mut cells = Vec::with_capacity(n * n);
    for &theta in &vals {
        for &phi in &vals {
            cells.push((phi, theta));
        }
    }
    cells
}

pub fn hover_orientation_set(
    platform: &PlatformSpec,
    step_deg: f64,
    opts: &HoverOptions,
) -> Result<Vec<HoverCell>> {
    orientation_grid(step_deg)
        .into_par_iter()
        .map(|(phi, theta)| {
            let r = hover_rotation(phi.to_radians(), theta.to_radians());
            Ok(HoverCell {
                phi_deg: phi,
                theta_deg: theta,
                outcome: solve_hover(platform, &r, opts)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ActuationClass {
    #[serde(rename = "UDT")]
    Udt,
    #[serde(rename = "MDT")]
    Mdt,
    #[serde(rename = "FA")]
    Fa,
    #[serde(rename = "OD")]
    Od,
    NotHoverable,
    NotClassified,
}

impl std::fmt::Display for ActuationClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Self::Udt => "UDT",
            Self::Mdt => "MDT",
            Self::Fa => "FA",
            Self::Od => "OD",
            Self::NotHoverable => "NotHoverable",
            Self::NotClassified => "NotClassified",
        };
        f.write_str(s)
    }
}

/// Class from the rank pair (hover-force rank, rank A′) and the ODL.
pub fn class_from_ranks(rank_hover_force: usize, rank_a: usize, odl: f64, weight: f64) -> ActuationClass {
    match (rank_hover_force, rank_a) {
        (1, 4) => ActuationClass::Udt,
        (3, 6) if odl >= weight => ActuationClass::Od,
        (3, 6) => ActuationClass::Fa,
        (2..=3, 5..=6) => ActuationClass::Mdt,
        _ => ActuationClass::NotClassified,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class: ActuationClass,
    pub rank_a: usize,
    /// Rank of the force rows of A′.
    pub rank_af: usize,
    pub rank_am: usize,
    /// Rank of the zero-moment force map `A′_f B_m`; this is the rank the
    /// class is decided on.
    pub rank_hover_force: usize,
    pub dof: usize,
    pub odl: f64,
    pub weight: f64,
    pub csh: bool,
    pub check: HoverCheck,
}

pub fn classify(platform: &PlatformSpec, resolution: usize, opts: &HoverOptions) -> Result<Classification> {
    let a = reduced_allocation(platform);
    let rank_a = numeric_rank(&a.matrix, opts.rank_tol);
    let rank_af = numeric_rank(&a.force_rows(), opts.rank_tol);
    let bm = moment_nullspace(&a, opts.rank_tol);
    let rank_hover_force = if bm.ncols() == 0 {
        0
    } else {
        numeric_rank(&(a.force_rows() * &bm), opts.rank_tol)
    };
    let check = can_statically_hover(platform, resolution.min(512), opts)?;
    let odl_value = odl(platform, resolution)?.odl;
    let weight = platform.weight();
    let class = if check.hoverable {
        class_from_ranks(rank_hover_force, rank_a, odl_value, weight)
    } else {
        ActuationClass::NotHoverable
    };
    let csh = csh_from_check(platform, &check)?;
    Ok(Classification {
        class,
        rank_a,
        rank_af,
        rank_am: check.rank_am,
        rank_hover_force,
        dof: platform.dof(),
        odl: odl_value,
        weight,
        csh,
        check,
    })
}

fn csh_from_check(platform: &PlatformSpec, check: &HoverCheck) -> Result<bool> {
    let Some(w) = &check.witness else {
        return Ok(false);
    };
    Ok(!fixed_orientation_sustain_check(platform, &w.control)?)
}

/// Critically statically hoverable: hovers, but not with its propellers
/// frozen at the hover witness.
pub fn is_csh(platform: &PlatformSpec, resolution: usize, opts: &HoverOptions) -> Result<bool> {
    let check = can_statically_hover(platform, resolution, opts)?;
    csh_from_check(platform, &check)
}
