//! Hover sustainability: the rate-limited local moment set as a zonotope,
//! the local hoverability index (LHI) and related rank checks.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::allocation::{fixed_allocation, full_jacobian, numeric_rank, reduced_allocation, null_space};
use crate::error::{Error, Result};
use crate::hover::{hover_rotation, orientation_grid, solve_hover, HoverOptions, HoverOutcome};
use crate::platform::{ControlInput, InputTag, PlatformSpec};
use crate::wrench_sets::{moment_set_at_hover, zero_in_interior, DirectionGrid};

/// Symmetric rate bounds per control input, ordered like the Jacobian
/// columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RateBox {
    pub bounds: Vec<f64>,
    pub tags: Vec<InputTag>,
}

impl RateBox {
    pub fn of(platform: &PlatformSpec) -> Self {
        Self {
            bounds: platform.rate_bounds(),
            tags: platform.input_layout(),
        }
    }

    /// Componentwise saturation of a rate vector.
    pub fn saturate(&self, rates: &mut [f64]) {
        for (r, b) in rates.iter_mut().zip(&self.bounds) {
            *r = r.clamp(-b, *b);
        }
    }
}

/// Zero-centred zonotope `{Σ_j s_j g_j : |s_j| ≤ 1}` in moment-rate space.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentZonotope {
    pub generators: Vec<Vector3<f64>>,
    pub tags: Vec<InputTag>,
}

impl MomentZonotope {
    pub fn support(&self, d: &Vector3<f64>) -> f64 {
        self.generators.iter().map(|g| d.dot(g).abs()).sum()
    }

    pub fn rank(&self, tol_rel: f64) -> usize {
        numeric_rank(&self.matrix(), tol_rel)
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(3, self.generators.len(), |r, c| self.generators[c][r])
    }

    /// Radius of the largest origin-centred ball inside the zonotope and
    /// the direction attaining it. The minimum of the support function is
    /// taken over the facet normals (cross products of generator pairs)
    /// together with `grid`.
    pub fn inradius(&self, grid: &DirectionGrid, tol_rel: f64) -> (f64, Vector3<f64>) {
        if self.rank(tol_rel) < 3 {
            let ns = null_space(&self.matrix().transpose(), tol_rel);
            let d = if ns.ncols() > 0 {
                Vector3::new(ns[(0, 0)], ns[(1, 0)], ns[(2, 0)])
            } else {
                Vector3::z()
            };
            return (0.0, d);
        }
        let scale = self.generators.iter().map(|g| g.norm()).fold(0.0, f64::max);
        let mut best = (f64::INFINITY, Vector3::z());
        let mut consider = |d: Vector3<f64>| {
            let h = self.support(&d);
            if h < best.0 {
                best = (h, d);
            }
        };
        for (i, a) in self.generators.iter().enumerate() {
            for b in &self.generators[i + 1..] {
                let n = a.cross(b);
                if n.norm() > 1e-12 * scale * scale {
                    consider(n.normalize());
                }
            }
        }
        for d in &grid.directions {
            consider(*d);
        }
        best
    }
}

/// Moment rows of the Jacobian at `h0`, each column scaled by its rate bound.
pub fn local_moment_zonotope(platform: &PlatformSpec, h0: &ControlInput) -> Result<MomentZonotope> {
    let f = full_jacobian(platform, h0)?;
    let rates = RateBox::of(platform);
    let generators = (0..f.ncols())
        .map(|j| Vector3::new(f.matrix[(3, j)], f.matrix[(4, j)], f.matrix[(5, j)]) * rates.bounds[j])
        .collect();
    Ok(MomentZonotope {
        generators,
        tags: rates.tags,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LhiResult {
    /// [N·m/s]
    pub lhi: f64,
    pub min_direction: [f64; 3],
}

pub fn lhi(platform: &PlatformSpec, h0: &ControlInput, grid: &DirectionGrid, tol_rel: f64) -> Result<LhiResult> {
    let z = local_moment_zonotope(platform, h0)?;
    let (v, d) = z.inradius(grid, tol_rel);
    Ok(LhiResult {
        lhi: v,
        min_direction: [d.x, d.y, d.z],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LhiCell {
    pub phi_deg: f64,
    pub theta_deg: f64,
    /// `None` where the platform cannot hover.
    pub lhi: Option<f64>,
}

/// LHI at a hover orientation, `None` if the orientation is not hoverable.
pub fn lhi_at(
    platform: &PlatformSpec,
    r_h: &Matrix3<f64>,
    grid: &DirectionGrid,
    opts: &HoverOptions,
) -> Result<Option<f64>> {
    match solve_hover(platform, r_h, opts)? {
        HoverOutcome::Hover(s) => Ok(Some(lhi(platform, &s.control, grid, opts.rank_tol)?.lhi)),
        HoverOutcome::Infeasible => Ok(None),
    }
}

pub fn lhi_map(
    platform: &PlatformSpec,
    step_deg: f64,
    grid: &DirectionGrid,
    opts: &HoverOptions,
) -> Result<Vec<LhiCell>> {
    orientation_grid(step_deg)
        .into_par_iter()
        .map(|(phi, theta)| {
            let r = hover_rotation(phi.to_radians(), theta.to_radians());
            Ok(LhiCell {
                phi_deg: phi,
                theta_deg: theta,
                lhi: lhi_at(platform, &r, grid, opts)?,
            })
        })
        .collect()
}

/// rank F(H0) = rank A′.
pub fn rank_equivalence_check(platform: &PlatformSpec, h0: &ControlInput, tol_rel: f64) -> Result<bool> {
    let f = full_jacobian(platform, h0)?;
    let a = reduced_allocation(platform);
    Ok(numeric_rank(&f.matrix, tol_rel) == numeric_rank(&a.matrix, tol_rel))
}

/// Whether the platform, with every propeller frozen at its direction
/// under `h0`, still satisfies the static-hover conditions.
pub fn fixed_orientation_sustain_check(platform: &PlatformSpec, h0: &ControlInput) -> Result<bool> {
    let frozen = platform.freeze(h0)?;
    let f = fixed_allocation(platform, h0)?;
    if numeric_rank(&f.moment_rows(), crate::allocation::DEFAULT_RANK_TOL) < 3 {
        return Ok(false);
    }
    match moment_set_at_hover(&frozen, 64) {
        Ok(set) => Ok(zero_in_interior(&set, &DirectionGrid::fibonacci(64), 1e-9)),
        Err(Error::EmptySet(_)) => Ok(false),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LhiCalibration {
    /// Common factor applied to mass and every thrust-rate bound.
    pub scale: f64,
    pub mass: f64,
    pub u_rate_max: f64,
    pub lhi: f64,
}

/// Scales mass and thrust-rate bounds together (keeping angle rates) until
/// the LHI at `r_h` equals `target`. With the minimum-norm witness the LHI
/// is homogeneous of degree one in that scale, so the fixed-point update
/// converges in a step or two.
pub fn calibrate_lhi(
    platform: &PlatformSpec,
    r_h: &Matrix3<f64>,
    target: f64,
    grid: &DirectionGrid,
    opts: &HoverOptions,
) -> Result<(PlatformSpec, LhiCalibration)> {
    let scaled = |s: f64| {
        let mut p = platform.clone().with_mass(platform.mass * s);
        for (q, orig) in p.propellers.iter_mut().zip(&platform.propellers) {
            q.u_rate_max = orig.u_rate_max * s;
        }
        p
    };
    let mut s = 1.0;
    let mut value = f64::NAN;
    for _ in 0..30 {
        let p = scaled(s);
        value = lhi_at(&p, r_h, grid, opts)?
            .ok_or_else(|| Error::HoverInfeasible("calibration orientation is not hoverable".into()))?;
        if value <= 0.0 {
            return Err(Error::HoverInfeasible("LHI is zero at the calibration orientation".into()));
        }
        if (value - target).abs() <= 1e-12 * target {
            break;
        }
        s *= target / value;
    }
    let p = scaled(s);
    let cal = LhiCalibration {
        scale: s,
        mass: p.mass,
        u_rate_max: p.propellers[0].u_rate_max,
        lhi: value,
    };
    Ok((p, cal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hover::can_statically_hover;
    use crate::platform::preset;
    use std::f64::consts::FRAC_PI_2;

    fn witness(name: &str) -> (PlatformSpec, ControlInput) {
        let p = preset(name).unwrap();
        let w = can_statically_hover(&p, 128, &HoverOptions::default())
            .unwrap()
            .witness
            .unwrap();
        (p, w.control)
    }

    #[test]
    fn zero_rates_give_degenerate_zonotope() {
        let (p, h) = witness("dualtilt-trirotor");
        let p = p.with_u_rate(0.0).with_angle_rate(0.0);
        let z = local_moment_zonotope(&p, &h).unwrap();
        assert!(z.generators.iter().all(|g| g.norm() == 0.0));
        assert_eq!(lhi(&p, &h, &DirectionGrid::fibonacci(64), 1e-9).unwrap().lhi, 0.0);
    }

    #[test]
    fn single_generator_is_flat() {
        let z = MomentZonotope {
            generators: vec![Vector3::new(1.0, 2.0, 3.0)],
            tags: vec![],
        };
        assert_eq!(z.inradius(&DirectionGrid::fibonacci(64), 1e-9).0, 0.0);
    }

    #[test]
    fn cube_zonotope_inradius() {
        let z = MomentZonotope {
            generators: vec![Vector3::x(), Vector3::y() * 2.0, Vector3::z() * 0.5],
            tags: vec![],
        };
        let (r, d) = z.inradius(&DirectionGrid::fibonacci(16), 1e-9);
        assert!((r - 0.5).abs() < 1e-15);
        assert!((d.z.abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quadrotor_local_set_is_full_rank() {
        let (p, h) = witness("quadrotor");
        let z = local_moment_zonotope(&p, &h).unwrap();
        assert_eq!(z.generators.len(), 4);
        assert_eq!(z.rank(1e-9), 3);
        assert!(lhi(&p, &h, &DirectionGrid::fibonacci(256), 1e-9).unwrap().lhi > 0.0);
    }

    #[test]
    fn frozen_rates_at_hover_are_flat() {
        // angle rates zero: only thrust generators remain, rank 2 at hover
        let (p, h) = witness("dualtilt-trirotor");
        let p = p.with_angle_rate(0.0);
        let z = local_moment_zonotope(&p, &h).unwrap();
        assert_eq!(z.rank(1e-9), 2);
        assert_eq!(lhi(&p, &h, &DirectionGrid::fibonacci(64), 1e-9).unwrap().lhi, 0.0);
    }

    #[test]
    fn sustain_checks() {
        let (q, h) = witness("quadrotor");
        assert!(fixed_orientation_sustain_check(&q, &h).unwrap());
        for name in ["dualtilt-trirotor", "birotor-dualtilt", "trirotor-tail"] {
            let (p, h) = witness(name);
            assert!(!fixed_orientation_sustain_check(&p, &h).unwrap(), "{name}");
            assert!(lhi(&p, &h, &DirectionGrid::fibonacci(256), 1e-9).unwrap().lhi > 0.0, "{name}");
        }
    }

    #[test]
    fn rank_equivalence_examples() {
        let (p, h) = witness("dualtilt-trirotor");
        assert!(rank_equivalence_check(&p, &h, 1e-9).unwrap());
        let (q, h) = witness("quadrotor");
        assert!(rank_equivalence_check(&q, &h, 1e-9).unwrap());
    }

    #[test]
    fn lhi_map_marks_infeasible_cells() {
        let q = preset("quadrotor").unwrap();
        let cells = lhi_map(&q, 90.0, &DirectionGrid::fibonacci(64), &HoverOptions::default()).unwrap();
        assert_eq!(cells.len(), 16);
        let level = cells.iter().find(|c| c.phi_deg == 0.0 && c.theta_deg == 0.0).unwrap();
        assert!(level.lhi.unwrap() > 0.0);
        let side = cells.iter().find(|c| c.phi_deg == 90.0 && c.theta_deg == 0.0).unwrap();
        assert_eq!(side.lhi, None);
    }

    #[test]
    fn calibration_hits_target() {
        let p = preset("dualtilt-trirotor").unwrap();
        let r = hover_rotation(FRAC_PI_2, 0.0);
        let grid = DirectionGrid::fibonacci(128);
        let (cal_p, cal) = calibrate_lhi(&p, &r, 0.0215, &grid, &HoverOptions::default()).unwrap();
        assert!((cal.lhi - 0.0215).abs() < 1e-9);
        let check = lhi_at(&cal_p, &r, &grid, &HoverOptions::default()).unwrap().unwrap();
        assert!((check - 0.0215).abs() < 1e-9);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn lhi_scales_with_rates(k in 0.1..10.0f64) {
                let (p, h) = witness("dualtilt-trirotor");
                let grid = DirectionGrid::fibonacci(64);
                let base = lhi(&p, &h, &grid, 1e-9).unwrap().lhi;
                let q = p.clone().with_u_rate(p.propellers[0].u_rate_max * k)
                    .with_angle_rate(p.propellers[0].angle_rate_max * k);
                let scaled = lhi(&q, &h, &grid, 1e-9).unwrap().lhi;
                prop_assert!((scaled - k * base).abs() <= 1e-10 * (1.0 + k * base));
            }

            #[test]
            fn finer_grids_do_not_raise_lhi(n in 8usize..256) {
                // facet normals make the minimum exact, so the grid only adds candidates
                let (p, h) = witness("dualtilt-trirotor");
                let coarse = lhi(&p, &h, &DirectionGrid::fibonacci(n), 1e-9).unwrap().lhi;
                let fine = lhi(&p, &h, &DirectionGrid::fibonacci(4 * n), 1e-9).unwrap().lhi;
                prop_assert!(fine <= coarse + 1e-12);
            }

            #[test]
            fn small_rate_steps_keep_hover_force(eps in 1e-4..1e-2f64, seed in 0u64..1000) {
                use rand::{Rng, SeedableRng};
                let (p, h) = witness("dualtilt-trirotor");
                let f = full_jacobian(&p, &h).unwrap();
                let rates = RateBox::of(&p);
                let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
                let hdot = nalgebra::DVector::from_iterator(
                    rates.bounds.len(),
                    rates.bounds.iter().map(|b| rng.gen_range(-b..=*b)),
                );
                let dt = eps / (f.force_rows() * &hdot).norm().max(1e-300);
                let x = h.to_vector(&p) + hdot * dt;
                let moved = ControlInput::from_vector(&p, &x).unwrap();
                let before = crate::platform::wrench_of(&p, &h).unwrap().force;
                let after = crate::platform::wrench_of(&p, &moved).unwrap().force;
                prop_assert!((after - before).norm() <= 1.05 * eps);
            }
        }
    }
}
