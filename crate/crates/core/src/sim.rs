//! Rigid-body simulation with rate-limited actuators and a wrench-rate
//! allocation controller.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, Vector3, Vector6};
use serde::Serialize;

use crate::allocation::full_jacobian;
use crate::error::{Error, Result};
use crate::hover::{hover_force, solve_hover, HoverOptions, HoverOutcome};
use crate::local_hover::RateBox;
use crate::platform::{rot_x, skew, wrench_of, ControlInput, PlatformSpec, TiltCapability, Wrench};

pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct RigidBodyState {
    /// World frame [m].
    pub position: Vector3<f64>,
    /// World frame [m/s].
    pub velocity: Vector3<f64>,
    /// Body-to-world rotation.
    pub orientation: Matrix3<f64>,
    /// Body frame [rad/s].
    pub angular_velocity: Vector3<f64>,
    pub actuators: ControlInput,
    pub time: f64,
}

impl RigidBodyState {
    pub fn at_rest(orientation: Matrix3<f64>, actuators: ControlInput) -> Self {
        Self {
            position: Vector3::zeros(),
            velocity: Vector3::zeros(),
            orientation,
            angular_velocity: Vector3::zeros(),
            actuators,
            time: 0.0,
        }
    }

    fn is_finite(&self) -> bool {
        self.position.iter().all(|x| x.is_finite())
            && self.velocity.iter().all(|x| x.is_finite())
            && self.orientation.iter().all(|x| x.is_finite())
            && self.angular_velocity.iter().all(|x| x.is_finite())
    }
}

/// Rotation `exp(skew(θ))` via Rodrigues' formula.
pub fn so3_exp(theta: &Vector3<f64>) -> Matrix3<f64> {
    let a = theta.norm();
    let k = skew(theta);
    if a < 1e-8 {
        return Matrix3::identity() + k + k * k * 0.5;
    }
    Matrix3::identity() + k * (a.sin() / a) + k * k * ((1.0 - a.cos()) / (a * a))
}

/// Rotation vector of `r` (inverse of [`so3_exp`]).
pub fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let v = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]) * 0.5;
    let s = v.norm();
    let c = (r.trace() - 1.0) * 0.5;
    if c < -0.99 {
        return nalgebra::Rotation3::from_matrix(r).scaled_axis();
    }
    let a = s.atan2(c);
    if s < 1e-12 {
        v
    } else {
        v * (a / s)
    }
}

fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, vt) = (svd.u.expect("U"), svd.v_t.expect("V"));
    let mut out = u * vt;
    if out.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        out = u * vt;
    }
    out
}

/// Rate of the rotation vector `θ` in `R = R0·exp(θ)` for body rate `ω`,
/// truncated after the second-order term.
fn dexp_inv(theta: &Vector3<f64>, w: &Vector3<f64>) -> Vector3<f64> {
    let c = theta.cross(w);
    w + c * 0.5 + theta.cross(&c) / 12.0
}

#[derive(Clone, Copy)]
struct Deriv {
    dp: Vector3<f64>,
    dv: Vector3<f64>,
    dtheta: Vector3<f64>,
    dw: Vector3<f64>,
}

/// Advances the rigid body by `dt` with the wrench held at its value for
/// the current actuator state (RKMK4 on the rotation), then integrates the
/// saturated actuator rates and clamps to actuator limits.
pub fn step(
    platform: &PlatformSpec,
    state: &RigidBodyState,
    hdot: &DVector<f64>,
    dt: f64,
) -> Result<RigidBodyState> {
    let w = wrench_of(platform, &state.actuators)?;
    let mut next = integrate_body(platform, state, &w, dt);

    let rates = RateBox::of(platform);
    if hdot.len() != rates.bounds.len() {
        return Err(Error::DimensionMismatch {
            what: "actuator rates",
            expected: rates.bounds.len(),
            found: hdot.len(),
        });
    }
    let mut sat = hdot.as_slice().to_vec();
    rates.saturate(&mut sat);
    let x = state.actuators.to_vector(platform) + DVector::from_vec(sat) * dt;
    let mut h = ControlInput::from_vector(platform, &x)?;
    clamp_to_limits(platform, &mut h);
    next.actuators = h;
    if !next.is_finite() {
        return Err(Error::Diverged { t: next.time });
    }
    Ok(next)
}

fn clamp_to_limits(platform: &PlatformSpec, h: &mut ControlInput) {
    for (k, p) in platform.active().enumerate() {
        h.thrust[k] = h.thrust[k].clamp(0.0, p.u_max);
        if let Some((a, b)) = h.angles[k] {
            h.angles[k] = Some(match &p.tilt {
                TiltCapability::Fixed { .. } => (a, b),
                TiltCapability::RadialOnly { alpha } => (alpha.clamp(a), 0.0),
                TiltCapability::Dual { alpha, beta } => (alpha.clamp(a), beta.clamp(b)),
            });
        }
    }
}

fn integrate_body(platform: &PlatformSpec, s: &RigidBodyState, w: &Wrench, dt: f64) -> RigidBodyState {
    let m = platform.mass;
    let g = Vector3::new(0.0, 0.0, -platform.gravity);
    let j = platform.inertia;
    let j_inv = j.try_inverse().expect("inertia is positive-definite");
    let r0 = s.orientation;
    let f = |v: Vector3<f64>, theta: Vector3<f64>, om: Vector3<f64>| Deriv {
        dp: v,
        dv: g + r0 * so3_exp(&theta) * w.force / m,
        dtheta: dexp_inv(&theta, &om),
        dw: j_inv * (w.moment - om.cross(&(j * om))),
    };
    let (v0, w0, t0) = (s.velocity, s.angular_velocity, Vector3::zeros());
    let k1 = f(v0, t0, w0);
    let k2 = f(v0 + k1.dv * (dt / 2.0), t0 + k1.dtheta * (dt / 2.0), w0 + k1.dw * (dt / 2.0));
    let k3 = f(v0 + k2.dv * (dt / 2.0), t0 + k2.dtheta * (dt / 2.0), w0 + k2.dw * (dt / 2.0));
    let k4 = f(v0 + k3.dv * dt, t0 + k3.dtheta * dt, w0 + k3.dw * dt);
    let comb = |a: Vector3<f64>, b: Vector3<f64>, c: Vector3<f64>, d: Vector3<f64>| (a + (b + c) * 2.0 + d) * (dt / 6.0);
    let theta = comb(k1.dtheta, k2.dtheta, k3.dtheta, k4.dtheta);
    RigidBodyState {
        position: s.position + comb(k1.dp, k2.dp, k3.dp, k4.dp),
        velocity: v0 + comb(k1.dv, k2.dv, k3.dv, k4.dv),
        orientation: orthonormalize(&(r0 * so3_exp(&theta))),
        angular_velocity: w0 + comb(k1.dw, k2.dw, k3.dw, k4.dw),
        actuators: s.actuators.clone(),
        time: s.time + dt,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControllerGains {
    /// Wrench-error gain [1/s].
    pub k: f64,
    /// Damping of the pseudo-inverse.
    pub damping: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            k: 200.0,
            damping: 1e-3,
        }
    }
}

/// `Ḣ = Fᵀ (F Fᵀ + λ² I)⁻¹ K (w_des − w(H))`, saturated to the rate box.
pub fn wrench_rate_controller(
    platform: &PlatformSpec,
    h: &ControlInput,
    desired: &Wrench,
    gains: &ControllerGains,
) -> Result<DVector<f64>> {
    let f = full_jacobian(platform, h)?.matrix;
    let err: Vector6<f64> = (desired.to_vector() - wrench_of(platform, h)?.to_vector()) * gains.k;
    let fft: Matrix6<f64> = Matrix6::from_iterator((&f * f.transpose()).iter().cloned())
        + Matrix6::identity() * gains.damping.powi(2);
    let y = fft
        .cholesky()
        .map(|c| c.solve(&err))
        .or_else(|| fft.lu().solve(&err))
        .ok_or_else(|| Error::invariant("controller solve", "singular F Fᵀ + λ² I"))?;
    let mut hdot = f.transpose() * DMatrix::from_column_slice(6, 1, y.as_slice());
    RateBox::of(platform).saturate(hdot.as_mut_slice());
    Ok(DVector::from_column_slice(hdot.as_slice()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub position: Vector3<f64>,
    pub orientation: Matrix3<f64>,
    pub angular_velocity: Vector3<f64>,
    pub inputs: DVector<f64>,
    pub input_rates: DVector<f64>,
    pub commanded: Wrench,
    pub applied: Wrench,
    /// Angle between the applied and the desired force [rad].
    pub force_angle_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentSummary {
    /// First time the applied moment reaches 90% of the step [s].
    pub rise_time_90: Option<f64>,
    /// Applied moment along the step axis integrated over the first 50 ms [N·m·s].
    pub moment_integral_50ms: f64,
    /// Time after which the force-direction error stays within 0.5° [s].
    pub settle_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub dt: f64,
    pub samples: Vec<Sample>,
    pub summary: ExperimentSummary,
}

pub const SETTLE_TOLERANCE_DEG: f64 = 0.5;

fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (a.dot(b) / (na * nb)).clamp(-1.0, 1.0).acos()
}

fn hover_start(
    platform: &PlatformSpec,
    r_h: &Matrix3<f64>,
    opts: &HoverOptions,
) -> Result<ControlInput> {
    match solve_hover(platform, r_h, opts)? {
        HoverOutcome::Hover(s) => Ok(s.control),
        HoverOutcome::Infeasible => Err(Error::HoverInfeasible(
            "no hover control at the requested orientation".into(),
        )),
    }
}

/// Runs the controller against a constant desired wrench from hover at
/// `r_h`. The attitude is not fed back.
pub fn run_experiment(
    platform: &PlatformSpec,
    r_h: &Matrix3<f64>,
    h0: ControlInput,
    desired: Wrench,
    duration: f64,
    dt: f64,
    gains: &ControllerGains,
) -> Result<Vec<Sample>> {
    if !(dt > 0.0 && duration >= 0.0) {
        return Err(Error::invariant("dt > 0, duration >= 0", format!("dt = {dt}, duration = {duration}")));
    }
    let steps = (duration / dt).round() as usize;
    let mut state = RigidBodyState::at_rest(*r_h, h0);
    let mut samples = Vec::with_capacity(steps);
    for k in 0..steps {
        let hdot = wrench_rate_controller(platform, &state.actuators, &desired, gains)?;
        let applied = wrench_of(platform, &state.actuators)?;
        samples.push(Sample {
            t: k as f64 * dt,
            position: state.position,
            orientation: state.orientation,
            angular_velocity: state.angular_velocity,
            inputs: state.actuators.to_vector(platform),
            input_rates: hdot.clone(),
            commanded: desired,
            applied,
            force_angle_error: angle_between(&applied.force, &desired.force),
        });
        state = step(platform, &state, &hdot, dt)?;
        state.time = (k + 1) as f64 * dt;
    }
    Ok(samples)
}

fn settle_time(samples: &[Sample], dt: f64) -> Option<f64> {
    let tol = SETTLE_TOLERANCE_DEG.to_radians();
    match samples.iter().rposition(|s| s.force_angle_error > tol) {
        None => Some(0.0),
        Some(i) if i + 1 < samples.len() => Some((i + 1) as f64 * dt),
        Some(_) => None,
    }
}

/// Step of `magnitude` N·m about body axis `axis` (0, 1, 2) on top of the
/// hover force at `r_h`.
#[allow(clippy::too_many_arguments)]
pub fn moment_step_experiment(
    platform: &PlatformSpec,
    r_h: &Matrix3<f64>,
    axis: usize,
    magnitude: f64,
    duration: f64,
    dt: f64,
    gains: &ControllerGains,
    opts: &HoverOptions,
) -> Result<ExperimentResult> {
    if axis > 2 {
        return Err(Error::invariant("axis in 0..3", format!("axis = {axis}")));
    }
    let h0 = hover_start(platform, r_h, opts)?;
    let desired = Wrench {
        force: hover_force(platform, r_h),
        moment: Vector3::ith(axis, magnitude),
    };
    let samples = run_experiment(platform, r_h, h0, desired, duration, dt, gains)?;
    let rise_time_90 = if magnitude == 0.0 {
        None
    } else {
        samples
            .iter()
            .find(|s| s.applied.moment[axis] * magnitude.signum() >= 0.9 * magnitude.abs())
            .map(|s| s.t)
    };
    let window = (0.05 / dt).round() as usize;
    let moment_integral_50ms = samples
        .iter()
        .take(window)
        .map(|s| s.applied.moment[axis] * dt)
        .sum();
    let summary = ExperimentSummary {
        rise_time_90,
        moment_integral_50ms,
        settle_time: settle_time(&samples, dt),
    };
    Ok(ExperimentResult { dt, samples, summary })
}

/// Rotates the desired hover-force direction by `rotation_angle` about
/// body x and tracks it with zero desired moment.
pub fn force_orientation_experiment(
    platform: &PlatformSpec,
    r_h: &Matrix3<f64>,
    rotation_angle: f64,
    duration: f64,
    dt: f64,
    gains: &ControllerGains,
    opts: &HoverOptions,
) -> Result<ExperimentResult> {
    let h0 = hover_start(platform, r_h, opts)?;
    let desired = Wrench {
        force: rot_x(rotation_angle) * hover_force(platform, r_h),
        moment: Vector3::zeros(),
    };
    let samples = run_experiment(platform, r_h, h0, desired, duration, dt, gains)?;
    let window = (0.05 / dt).round() as usize;
    let summary = ExperimentSummary {
        rise_time_90: None,
        moment_integral_50ms: samples.iter().take(window).map(|s| s.applied.moment.x * dt).sum(),
        settle_time: settle_time(&samples, dt),
    };
    Ok(ExperimentResult { dt, samples, summary })
}
