//! Platform geometry, tilt kinematics and the per-propeller wrench map.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DVector, Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GRAVITY: f64 = 9.81;

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Unit thrust direction of a propeller tilted by `alpha` (radial axis) and
/// `beta` (tangential axis) on an arm at heading `gamma`.
pub fn thrust_direction(alpha: f64, beta: f64, gamma: f64) -> Vector3<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    rot_z(gamma) * Vector3::new(-sb, sa * cb, ca * cb)
}

/// Partial derivatives of [`thrust_direction`] with respect to alpha and beta.
pub fn thrust_direction_partials(
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> (Vector3<f64>, Vector3<f64>) {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let rz = rot_z(gamma);
    (
        rz * Vector3::new(0.0, ca * cb, -sa * cb),
        rz * Vector3::new(-cb, -sa * sb, -ca * sb),
    )
}

/// Inverts [`thrust_direction`] for a unit vector: returns `(alpha, beta)`.
/// At `beta = ±π/2` alpha is indeterminate and resolves to 0.
pub fn tilt_angles_of(direction: &Vector3<f64>, gamma: f64) -> (f64, f64) {
    let local = rot_z(-gamma) * direction;
    let beta = (-local.x).clamp(-1.0, 1.0).asin();
    let alpha = if local.y.hypot(local.z) < 1e-12 {
        0.0
    } else {
        local.y.atan2(local.z)
    };
    (alpha, beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleRange {
    pub min: f64,
    pub max: f64,
}

impl AngleRange {
    pub const FULL: AngleRange = AngleRange { min: -PI, max: PI };

    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || min > max || min < -PI - 1e-12 || max > PI + 1e-12
        {
            return Err(Error::invariant(
                "angle range within [-pi, pi]",
                format!("[{min}, {max}]"),
            ));
        }
        Ok(Self {
            min: min.max(-PI),
            max: max.min(PI),
        })
    }

    pub fn is_full(&self) -> bool {
        self.min <= -PI + 1e-12 && self.max >= PI - 1e-12
    }

    pub fn contains(&self, a: f64, tol: f64) -> bool {
        self.is_full() || (a >= self.min - tol && a <= self.max + tol)
    }

    pub fn clamp(&self, a: f64) -> f64 {
        if self.is_full() {
            wrap_angle(a)
        } else {
            a.clamp(self.min, self.max)
        }
    }

    /// Distance from the nearest limit; infinite for an unlimited range.
    pub fn margin(&self, a: f64) -> f64 {
        if self.is_full() {
            f64::INFINITY
        } else {
            (a - self.min).min(self.max - a)
        }
    }
}

impl Default for AngleRange {
    fn default() -> Self {
        Self::FULL
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        PI
    } else {
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TiltCapability {
    Fixed { direction: Vector3<f64> },
    RadialOnly { alpha: AngleRange },
    Dual { alpha: AngleRange, beta: AngleRange },
}

impl TiltCapability {
    pub fn num_angles(&self) -> usize {
        match self {
            Self::Fixed { .. } => 0,
            Self::RadialOnly { .. } => 1,
            Self::Dual { .. } => 2,
        }
    }

    /// Columns this propeller contributes to the reduced allocation matrix.
    pub fn num_reduced_columns(&self) -> usize {
        match self {
            Self::Fixed { .. } => 1,
            Self::RadialOnly { .. } => 2,
            Self::Dual { .. } => 3,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Fixed { .. } => "fixed",
            Self::RadialOnly { .. } => "radial",
            Self::Dual { .. } => "dual",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropellerSpec {
    pub position: Vector3<f64>,
    pub gamma: f64,
    pub drag_ratio: f64,
    pub tilt: TiltCapability,
    pub u_max: f64,
    pub u_rate_max: f64,
    pub angle_rate_max: f64,
    pub functional: bool,
}

impl PropellerSpec {
    /// A propeller whose heading is derived from its position.
    pub fn new(
        position: Vector3<f64>,
        drag_ratio: f64,
        tilt: TiltCapability,
        u_max: f64,
        u_rate_max: f64,
        angle_rate_max: f64,
    ) -> Self {
        Self {
            position,
            gamma: heading_of(&position),
            drag_ratio,
            tilt,
            u_max,
            u_rate_max,
            angle_rate_max,
            functional: true,
        }
    }

    /// Maps a thrust vector to the moment it produces: `skew(p) + r·I`.
    pub fn moment_map(&self) -> Matrix3<f64> {
        skew(&self.position) + Matrix3::identity() * self.drag_ratio
    }

    /// Thrust direction for the given tilt angles (ignored for fixed tilts).
    pub fn direction(&self, alpha: f64, beta: f64) -> Vector3<f64> {
        match &self.tilt {
            TiltCapability::Fixed { direction } => *direction,
            TiltCapability::RadialOnly { .. } => thrust_direction(alpha, 0.0, self.gamma),
            TiltCapability::Dual { .. } => thrust_direction(alpha, beta, self.gamma),
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        let ctx = |what: &str| format!("propeller {index}: {what}");
        if !self.position.iter().all(|x| x.is_finite()) || !self.drag_ratio.is_finite() {
            return Err(Error::invariant("finite geometry", ctx("non-finite value")));
        }
        if !(self.u_max > 0.0 && self.u_max.is_finite()) {
            return Err(Error::invariant(
                "u_max > 0",
                ctx(&format!("u_max = {}", self.u_max)),
            ));
        }
        if !(self.u_rate_max >= 0.0 && self.angle_rate_max >= 0.0) {
            return Err(Error::invariant(
                "rate limits >= 0",
                ctx(&format!(
                    "u_rate_max = {}, angle_rate_max = {}",
                    self.u_rate_max, self.angle_rate_max
                )),
            ));
        }
        if let TiltCapability::Fixed { direction } = &self.tilt {
            if (direction.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::invariant(
                    "unit fixed direction",
                    ctx(&format!("norm = {}", direction.norm())),
                ));
            }
        }
        let expected = heading_of(&self.position);
        if angle_distance(expected, self.gamma) > 1e-9 {
            return Err(Error::invariant(
                "gamma = atan2(p.y, p.x)",
                ctx(&format!("gamma = {}, expected {}", self.gamma, expected)),
            ));
        }
        Ok(())
    }
}

/// Arm heading of a propeller position; 0 on the body z axis.
pub fn heading_of(p: &Vector3<f64>) -> f64 {
    if p.x.hypot(p.y) < 1e-12 {
        0.0
    } else {
        p.y.atan2(p.x)
    }
}

fn angle_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlatformSpec {
    pub propellers: Vec<PropellerSpec>,
    pub mass: f64,
    pub inertia: Matrix3<f64>,
    pub gravity: f64,
}

impl PlatformSpec {
    pub fn new(
        propellers: Vec<PropellerSpec>,
        mass: f64,
        inertia: Matrix3<f64>,
        gravity: f64,
    ) -> Result<Self> {
        let spec = Self {
            propellers,
            mass,
            inertia,
            gravity,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::invariant("mass > 0", format!("mass = {}", self.mass)));
        }
        if !(self.gravity >= 0.0 && self.gravity.is_finite()) {
            return Err(Error::invariant(
                "gravity >= 0",
                format!("gravity = {}", self.gravity),
            ));
        }
        let asym = (self.inertia - self.inertia.transpose()).abs().max();
        if asym > 1e-12 {
            return Err(Error::invariant(
                "inertia symmetric",
                format!("max asymmetry {asym:e}"),
            ));
        }
        if self.inertia.cholesky().is_none() {
            return Err(Error::invariant(
                "inertia positive-definite",
                format!("{:?}", self.inertia.as_slice()),
            ));
        }
        for (i, p) in self.propellers.iter().enumerate() {
            p.validate(i)?;
        }
        if self.num_active() == 0 {
            return Err(Error::invariant(
                "at least one functional propeller",
                "all propellers are flagged non-functional",
            ));
        }
        Ok(())
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    /// Functional propellers in declaration order.
    pub fn active(&self) -> impl Iterator<Item = &PropellerSpec> + '_ {
        self.propellers.iter().filter(|p| p.functional)
    }

    /// Declaration indices of functional propellers.
    pub fn active_indices(&self) -> Vec<usize> {
        (0..self.propellers.len())
            .filter(|&i| self.propellers[i].functional)
            .collect()
    }

    pub fn num_active(&self) -> usize {
        self.active().count()
    }

    pub fn dof(&self) -> usize {
        self.active().map(|p| 1 + p.tilt.num_angles()).sum()
    }

    /// Column tags of the flat input vector: all thrusts first, then each
    /// propeller's active angles.
    pub fn input_layout(&self) -> Vec<InputTag> {
        let idx = self.active_indices();
        let mut tags: Vec<InputTag> = idx
            .iter()
            .map(|&i| InputTag {
                propeller: i,
                kind: InputKind::Thrust,
            })
            .collect();
        for &i in &idx {
            let n = self.propellers[i].tilt.num_angles();
            for kind in [InputKind::Alpha, InputKind::Beta].into_iter().take(n) {
                tags.push(InputTag { propeller: i, kind });
            }
        }
        tags
    }

    /// Per-input rate bounds ordered as [`Self::input_layout`].
    pub fn rate_bounds(&self) -> Vec<f64> {
        self.input_layout()
            .iter()
            .map(|t| {
                let p = &self.propellers[t.propeller];
                match t.kind {
                    InputKind::Thrust => p.u_rate_max,
                    _ => p.angle_rate_max,
                }
            })
            .collect()
    }

    /// Copy of the platform with every tilting propeller locked at the
    /// direction it has under `h`.
    pub fn freeze(&self, h: &ControlInput) -> Result<PlatformSpec> {
        h.check_dims(self)?;
        let mut out = self.clone();
        for (k, i) in self.active_indices().into_iter().enumerate() {
            let (a, b) = h.angles[k].unwrap_or((0.0, 0.0));
            let dir = self.propellers[i].direction(a, b);
            out.propellers[i].tilt = TiltCapability::Fixed { direction: dir };
        }
        Ok(out)
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }

    pub fn with_u_max(mut self, u_max: f64) -> Self {
        self.propellers.iter_mut().for_each(|p| p.u_max = u_max);
        self
    }

    pub fn with_u_rate(mut self, rate: f64) -> Self {
        self.propellers.iter_mut().for_each(|p| p.u_rate_max = rate);
        self
    }

    pub fn with_angle_rate(mut self, rate: f64) -> Self {
        self.propellers
            .iter_mut()
            .for_each(|p| p.angle_rate_max = rate);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Thrust,
    Alpha,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InputTag {
    /// Declaration index of the owning propeller.
    pub propeller: usize,
    pub kind: InputKind,
}

impl fmt::Display for InputTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            InputKind::Thrust => "u",
            InputKind::Alpha => "alpha",
            InputKind::Beta => "beta",
        };
        write!(f, "{k}{}", self.propeller + 1)
    }
}

/// Thrusts and tilt angles of the functional propellers, in declaration
/// order. Radial-only propellers carry `(alpha, 0)`, fixed ones `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlInput {
    pub thrust: Vec<f64>,
    pub angles: Vec<Option<(f64, f64)>>,
}

impl ControlInput {
    /// Zero thrust with every tilt at its neutral angle.
    pub fn neutral(platform: &PlatformSpec) -> Self {
        let angles = platform
            .active()
            .map(|p| match p.tilt {
                TiltCapability::Fixed { .. } => None,
                _ => Some((0.0, 0.0)),
            })
            .collect();
        Self {
            thrust: vec![0.0; platform.num_active()],
            angles,
        }
    }

    pub fn with_thrust(platform: &PlatformSpec, thrust: Vec<f64>) -> Self {
        Self {
            thrust,
            ..Self::neutral(platform)
        }
    }

    pub fn check_dims(&self, platform: &PlatformSpec) -> Result<()> {
        let n = platform.num_active();
        for (what, found) in [("thrust", self.thrust.len()), ("angles", self.angles.len())] {
            if found != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found,
                });
            }
        }
        for (k, p) in platform.active().enumerate() {
            let want = p.tilt.num_angles() > 0;
            if self.angles[k].is_some() != want {
                return Err(Error::invariant(
                    "angles match tilt capability",
                    format!("active propeller {k} is {}", p.tilt.kind_name()),
                ));
            }
        }
        Ok(())
    }

    /// Checks dimensions, thrust bounds and angle limits.
    pub fn validate(&self, platform: &PlatformSpec, tol: f64) -> Result<()> {
        self.check_dims(platform)?;
        for (k, p) in platform.active().enumerate() {
            let u = self.thrust[k];
            if !(u >= -tol && u <= p.u_max + tol) {
                return Err(Error::invariant(
                    "0 <= u <= u_max",
                    format!("active propeller {k}: u = {u}, u_max = {}", p.u_max),
                ));
            }
            let (a, b) = self.angles[k].unwrap_or((0.0, 0.0));
            let ok = match &p.tilt {
                TiltCapability::Fixed { .. } => true,
                TiltCapability::RadialOnly { alpha } => alpha.contains(a, tol),
                TiltCapability::Dual { alpha, beta } => {
                    alpha.contains(a, tol) && beta.contains(b, tol)
                }
            };
            if !ok {
                return Err(Error::invariant(
                    "angles within limits",
                    format!("active propeller {k}: alpha = {a}, beta = {b}"),
                ));
            }
        }
        Ok(())
    }

    /// Flat vector in [`PlatformSpec::input_layout`] order.
    pub fn to_vector(&self, platform: &PlatformSpec) -> DVector<f64> {
        let mut v: Vec<f64> = self.thrust.clone();
        for (k, p) in platform.active().enumerate() {
            let (a, b) = self.angles[k].unwrap_or((0.0, 0.0));
            match p.tilt.num_angles() {
                1 => v.push(a),
                2 => v.extend([a, b]),
                _ => {}
            }
        }
        DVector::from_vec(v)
    }

    pub fn from_vector(platform: &PlatformSpec, x: &DVector<f64>) -> Result<Self> {
        if x.len() != platform.dof() {
            return Err(Error::DimensionMismatch {
                what: "input vector",
                expected: platform.dof(),
                found: x.len(),
            });
        }
        let n = platform.num_active();
        let thrust = x.as_slice()[..n].to_vec();
        let mut cursor = n;
        let mut angles = Vec::with_capacity(n);
        for p in platform.active() {
            angles.push(match p.tilt.num_angles() {
                0 => None,
                1 => {
                    cursor += 1;
                    Some((x[cursor - 1], 0.0))
                }
                _ => {
                    cursor += 2;
                    Some((x[cursor - 2], x[cursor - 1]))
                }
            });
        }
        Ok(Self { thrust, angles })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Wrench {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
}

impl Wrench {
    pub fn zero() -> Self {
        Self {
            force: Vector3::zeros(),
            moment: Vector3::zeros(),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.force.x,
            self.force.y,
            self.force.z,
            self.moment.x,
            self.moment.y,
            self.moment.z,
        )
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Self {
            force: v.fixed_rows::<3>(0).into_owned(),
            moment: v.fixed_rows::<3>(3).into_owned(),
        }
    }
}

/// Per-propeller thrust vectors `v_i = u_i · v̂_i` of the functional propellers.
pub fn control_to_vectors(platform: &PlatformSpec, h: &ControlInput) -> Result<Vec<Vector3<f64>>> {
    h.check_dims(platform)?;
    Ok(platform
        .active()
        .enumerate()
        .map(|(k, p)| {
            let (a, b) = h.angles[k].unwrap_or((0.0, 0.0));
            p.direction(a, b) * h.thrust[k]
        })
        .collect())
}

pub fn wrench_of(platform: &PlatformSpec, h: &ControlInput) -> Result<Wrench> {
    let vs = control_to_vectors(platform, h)?;
    let mut w = Wrench::zero();
    for (p, v) in platform.active().zip(&vs) {
        w.force += v;
        w.moment += p.moment_map() * v;
    }
    Ok(w)
}

// ---------------------------------------------------------------------------
// Config documents

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum TiltKind {
    Fixed,
    Radial,
    Dual,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PropellerDoc {
    position: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma_deg: Option<f64>,
    drag_ratio: f64,
    tilt: TiltKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    direction: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha_range_deg: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta_range: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta_range_deg: Option<[f64; 2]>,
    u_max: f64,
    u_rate_max: f64,
    angle_rate_max: f64,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    functional: bool,
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

fn default_gravity() -> f64 {
    DEFAULT_GRAVITY
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlatformDoc {
    mass: f64,
    #[serde(default = "default_gravity")]
    gravity: f64,
    inertia: [[f64; 3]; 3],
    propellers: Vec<PropellerDoc>,
}

fn pick_angle(
    index: usize,
    name: &'static str,
    rad: Option<f64>,
    deg: Option<f64>,
) -> Result<Option<f64>> {
    match (rad, deg) {
        (Some(_), Some(_)) => Err(Error::Parse(format!(
            "propeller {index}: both `{name}` and `{name}_deg` given"
        ))),
        (Some(r), None) => Ok(Some(r)),
        (None, Some(d)) => Ok(Some(d.to_radians())),
        (None, None) => Ok(None),
    }
}

fn pick_range(
    index: usize,
    name: &'static str,
    rad: Option<[f64; 2]>,
    deg: Option<[f64; 2]>,
) -> Result<AngleRange> {
    let r = match (rad, deg) {
        (Some(_), Some(_)) => {
            return Err(Error::Parse(format!(
                "propeller {index}: both `{name}` and `{name}_deg` given"
            )))
        }
        (Some(r), None) => r,
        (None, Some(d)) => [d[0].to_radians(), d[1].to_radians()],
        (None, None) => return Ok(AngleRange::FULL),
    };
    AngleRange::new(r[0], r[1]).map_err(|e| match e {
        Error::Invariant { invariant, detail } => Error::Invariant {
            invariant,
            detail: format!("propeller {index} {name}: {detail}"),
        },
        other => other,
    })
}

impl PropellerDoc {
    fn into_spec(self, index: usize) -> Result<PropellerSpec> {
        let position = Vector3::from(self.position);
        let gamma = heading_of(&position);
        if let Some(given) = pick_angle(index, "gamma", self.gamma, self.gamma_deg)? {
            if angle_distance(given, gamma) > 1e-6 {
                return Err(Error::invariant(
                    "gamma = atan2(p.y, p.x)",
                    format!("propeller {index}: gamma = {given}, position implies {gamma}"),
                ));
            }
        }
        let tilt = match self.tilt {
            TiltKind::Fixed => {
                let d = Vector3::from(self.direction.unwrap_or([0.0, 0.0, 1.0]));
                let n = d.norm();
                if !(n > 0.0 && n.is_finite()) {
                    return Err(Error::invariant(
                        "unit fixed direction",
                        format!("propeller {index}: zero direction"),
                    ));
                }
                TiltCapability::Fixed {
                    direction: if (n - 1.0).abs() <= 1e-12 { d } else { d / n },
                }
            }
            TiltKind::Radial => TiltCapability::RadialOnly {
                alpha: pick_range(index, "alpha_range", self.alpha_range, self.alpha_range_deg)?,
            },
            TiltKind::Dual => TiltCapability::Dual {
                alpha: pick_range(index, "alpha_range", self.alpha_range, self.alpha_range_deg)?,
                beta: pick_range(index, "beta_range", self.beta_range, self.beta_range_deg)?,
            },
        };
        Ok(PropellerSpec {
            position,
            gamma,
            drag_ratio: self.drag_ratio,
            tilt,
            u_max: self.u_max,
            u_rate_max: self.u_rate_max,
            angle_rate_max: self.angle_rate_max,
            functional: self.functional,
        })
    }

    fn from_spec(p: &PropellerSpec) -> Self {
        let range = |r: &AngleRange| (!r.is_full()).then_some([r.min, r.max]);
        let (tilt, direction, alpha_range, beta_range) = match &p.tilt {
            TiltCapability::Fixed { direction } => {
                (TiltKind::Fixed, Some([direction.x, direction.y, direction.z]), None, None)
            }
            TiltCapability::RadialOnly { alpha } => (TiltKind::Radial, None, range(alpha), None),
            TiltCapability::Dual { alpha, beta } => {
                (TiltKind::Dual, None, range(alpha), range(beta))
            }
        };
        Self {
            position: [p.position.x, p.position.y, p.position.z],
            gamma: None,
            gamma_deg: None,
            drag_ratio: p.drag_ratio,
            tilt,
            direction,
            alpha_range,
            alpha_range_deg: None,
            beta_range,
            beta_range_deg: None,
            u_max: p.u_max,
            u_rate_max: p.u_rate_max,
            angle_rate_max: p.angle_rate_max,
            functional: p.functional,
        }
    }
}

/// Parses and validates a TOML platform document.
pub fn load_platform(text: &str) -> Result<PlatformSpec> {
    let doc: PlatformDoc = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let propellers = doc
        .propellers
        .into_iter()
        .enumerate()
        .map(|(i, p)| p.into_spec(i))
        .collect::<Result<Vec<_>>>()?;
    let j = doc.inertia;
    let inertia = Matrix3::from_fn(|r, c| j[r][c]);
    PlatformSpec::new(propellers, doc.mass, inertia, doc.gravity)
}

/// Writes a platform as a TOML document accepted by [`load_platform`].
pub fn serialize_platform(spec: &PlatformSpec) -> String {
    let doc = PlatformDoc {
        mass: spec.mass,
        gravity: spec.gravity,
        inertia: std::array::from_fn(|r| std::array::from_fn(|c| spec.inertia[(r, c)])),
        propellers: spec.propellers.iter().map(PropellerDoc::from_spec).collect(),
    };
    toml::to_string(&doc).expect("platform documents always serialize")
}

// ---------------------------------------------------------------------------
// Presets

pub const PRESET_NAMES: [&str; 6] = [
    "quadrotor",
    "birotor-dualtilt",
    "trirotor-tail",
    "trirotor-radial",
    "dualtilt-trirotor",
    "dualtilt-trirotor-failed3",
];

pub const ARM_LENGTH: f64 = 0.2;
pub const DRAG_RATIO: f64 = 0.012;
pub const DEFAULT_MASS: f64 = 2.0;
pub const DEFAULT_U_MAX: f64 = 15.0;
pub const DEFAULT_U_RATE: f64 = 200.0;
pub const DEFAULT_ANGLE_RATE: f64 = 4.1;

pub fn preset_description(name: &str) -> Option<&'static str> {
    Some(match name {
        "quadrotor" => "coplanar colinear '+' quadrotor, fixed propellers",
        "birotor-dualtilt" => "birotor, each propeller tilting about its arm",
        "trirotor-tail" => "trirotor with two fixed front propellers and a radially tilting tail",
        "trirotor-radial" => "trirotor, every propeller tilting about its arm",
        "dualtilt-trirotor" => "trirotor, every propeller tilting about two axes",
        "dualtilt-trirotor-failed3" => "dual-tilt trirotor with propeller 3 non-functional",
        _ => return None,
    })
}

fn default_inertia() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(0.01, 0.01, 0.02))
}

fn prop(x: f64, y: f64, z: f64, r: f64, tilt: TiltCapability) -> PropellerSpec {
    PropellerSpec::new(
        Vector3::new(x, y, z),
        r,
        tilt,
        DEFAULT_U_MAX,
        DEFAULT_U_RATE,
        DEFAULT_ANGLE_RATE,
    )
}

fn fixed_up() -> TiltCapability {
    TiltCapability::Fixed {
        direction: Vector3::z(),
    }
}

fn radial() -> TiltCapability {
    TiltCapability::RadialOnly {
        alpha: AngleRange::FULL,
    }
}

fn dual() -> TiltCapability {
    TiltCapability::Dual {
        alpha: AngleRange::FULL,
        beta: AngleRange::FULL,
    }
}

/// Three arms at 0°, 120° and 240° with drag signs (+, −, +).
fn trirotor(tilt: fn() -> TiltCapability) -> Vec<PropellerSpec> {
    let (l, r) = (ARM_LENGTH, DRAG_RATIO);
    let h = l * 3f64.sqrt() / 2.0;
    vec![
        prop(l, 0.0, 0.0, r, tilt()),
        prop(-l / 2.0, h, 0.0, -r, tilt()),
        prop(-l / 2.0, -h, 0.0, r, tilt()),
    ]
}

pub fn preset(name: &str) -> Result<PlatformSpec> {
    let (l, r) = (ARM_LENGTH, DRAG_RATIO);
    let propellers = match name {
        "quadrotor" => vec![
            prop(l, 0.0, 0.0, r, fixed_up()),
            prop(0.0, l, 0.0, -r, fixed_up()),
            prop(-l, 0.0, 0.0, r, fixed_up()),
            prop(0.0, -l, 0.0, -r, fixed_up()),
        ],
        "birotor-dualtilt" => vec![
            prop(l, 0.0, 0.05, r, radial()),
            prop(-l, 0.0, 0.05, -r, radial()),
        ],
        "trirotor-tail" => vec![
            prop(0.1, 0.15, 0.0, r, fixed_up()),
            prop(0.1, -0.15, 0.0, -r, fixed_up()),
            prop(-0.2, 0.0, 0.0, r, radial()),
        ],
        "trirotor-radial" => trirotor(radial),
        "dualtilt-trirotor" => trirotor(dual),
        "dualtilt-trirotor-failed3" => {
            let mut p = trirotor(dual);
            p[2].functional = false;
            p
        }
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    PlatformSpec::new(propellers, DEFAULT_MASS, default_inertia(), DEFAULT_GRAVITY)
}
