#![allow(dead_code)]

use mrav_hover::platform::{
    AngleRange, ControlInput, PlatformSpec, PropellerSpec, TiltCapability, DEFAULT_GRAVITY,
};
use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::rngs::StdRng;
use rand::Rng;

pub fn random_position(rng: &mut StdRng) -> Vector3<f64> {
    Vector3::new(
        rng.gen_range(-0.4..0.4),
        rng.gen_range(-0.4..0.4),
        rng.gen_range(-0.1..0.1),
    )
}

pub fn random_unit(rng: &mut StdRng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_tilt(rng: &mut StdRng) -> TiltCapability {
    match rng.gen_range(0..3) {
        0 => TiltCapability::Fixed {
            direction: random_unit(rng),
        },
        1 => TiltCapability::RadialOnly {
            alpha: AngleRange::FULL,
        },
        _ => TiltCapability::Dual {
            alpha: AngleRange::FULL,
            beta: AngleRange::new(-1.2, 1.2).unwrap(),
        },
    }
}

/// `n` propellers built by `tilt`, random positions and drag ratios.
pub fn random_platform(
    rng: &mut StdRng,
    n: usize,
    mut tilt: impl FnMut(&mut StdRng) -> TiltCapability,
) -> PlatformSpec {
    let propellers = (0..n)
        .map(|_| {
            let pos = random_position(rng);
            let r = rng.gen_range(0.005..0.03) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let t = tilt(rng);
            PropellerSpec::new(pos, r, t, rng.gen_range(8.0..20.0), 200.0, 4.1)
        })
        .collect();
    PlatformSpec::new(
        propellers,
        rng.gen_range(0.5..1.5),
        Matrix3::from_diagonal(&Vector3::new(0.01, 0.012, 0.02)),
        DEFAULT_GRAVITY,
    )
    .unwrap()
}

/// Random control within the platform's limits.
pub fn random_control(rng: &mut StdRng, platform: &PlatformSpec) -> ControlInput {
    let mut h = ControlInput::neutral(platform);
    for (k, p) in platform.active().enumerate() {
        h.thrust[k] = rng.gen_range(0.0..p.u_max);
        h.angles[k] = match &p.tilt {
            TiltCapability::Fixed { .. } => None,
            TiltCapability::RadialOnly { alpha } => Some((sample(rng, alpha), 0.0)),
            TiltCapability::Dual { alpha, beta } => Some((sample(rng, alpha), sample(rng, beta))),
        };
    }
    h
}

fn sample(rng: &mut StdRng, r: &AngleRange) -> f64 {
    rng.gen_range(r.min.max(-3.0)..r.max.min(3.0))
}

/// Rank by Gaussian elimination with full pivoting.
pub fn rank_by_elimination(m: &DMatrix<f64>, tol: f64) -> usize {
    let mut a = m.clone();
    let scale = a.amax().max(1e-300);
    let (rows, cols) = a.shape();
    let mut rank = 0;
    for _ in 0..rows.min(cols) {
        let mut best = (0, 0, 0.0);
        for r in rank..rows {
            for c in rank..cols {
                if a[(r, c)].abs() > best.2 {
                    best = (r, c, a[(r, c)].abs());
                }
            }
        }
        if best.2 <= tol * scale {
            break;
        }
        a.swap_rows(rank, best.0);
        a.swap_columns(rank, best.1);
        for r in rank + 1..rows {
            let f = a[(r, rank)] / a[(rank, rank)];
            for c in rank..cols {
                a[(r, c)] -= f * a[(rank, c)];
            }
        }
        rank += 1;
    }
    rank
}

use mrav_hover::allocation::{fixed_allocation, full_jacobian, reduced_allocation, DEFAULT_RANK_TOL};
use mrav_hover::hover::{can_statically_hover, classify, hover_rotation, solve_hover, ActuationClass, HoverOptions};
use mrav_hover::local_hover::local_moment_zonotope;
use mrav_hover::platform::{preset, wrench_of, PRESET_NAMES};
use mrav_hover::sim::{so3_log, step, RigidBodyState};
use nalgebra::DVector;
use rand::SeedableRng;

pub struct FrozenRankReport {
    pub platforms: usize,
    pub max_rank: usize,
    pub violations: usize,
}

/// Hover-capable random platforms with two or three Dual propellers; the
/// moment map with propellers frozen at the hover witness.
pub fn frozen_rank_suite(seed: u64, count: usize) -> FrozenRankReport {
    let mut rng = StdRng::seed_from_u64(seed);
    let opts = HoverOptions::default();
    let mut report = FrozenRankReport {
        platforms: 0,
        max_rank: 0,
        violations: 0,
    };
    let mut attempts = 0;
    while report.platforms < count {
        attempts += 1;
        assert!(attempts < 50 * count, "too few hover-capable samples");
        let n = rng.gen_range(2..=3);
        let p = random_platform(&mut rng, n, |_| TiltCapability::Dual {
            alpha: AngleRange::FULL,
            beta: AngleRange::FULL,
        });
        let check = can_statically_hover(&p, 256, &opts).unwrap();
        let Some(w) = check.witness.filter(|_| check.hoverable) else {
            continue;
        };
        let f = fixed_allocation(&p, &w.control).unwrap();
        let rank = rank_by_elimination(&f.moment_rows(), 1e-9);
        report.platforms += 1;
        report.max_rank = report.max_rank.max(rank);
        if rank > 2 {
            report.violations += 1;
        }
    }
    report
}

pub struct RankEquivalenceReport {
    pub points: usize,
    pub mismatches: usize,
    pub presets: Vec<&'static str>,
}

/// Interior hover points at random orientations on the presets classified
/// FA or OD; compares rank F(H0) with rank A′.
pub fn rank_equivalence_suite(seed: u64, count: usize) -> RankEquivalenceReport {
    let opts = HoverOptions::default();
    let presets: Vec<(&'static str, PlatformSpec)> = PRESET_NAMES
        .iter()
        .map(|n| (*n, preset(n).unwrap()))
        .filter(|(_, p)| {
            matches!(classify(p, 256, &opts).unwrap().class, ActuationClass::Fa | ActuationClass::Od)
        })
        .collect();
    assert!(!presets.is_empty());
    let mut rng = StdRng::seed_from_u64(seed);
    let mut report = RankEquivalenceReport {
        points: 0,
        mismatches: 0,
        presets: presets.iter().map(|(n, _)| *n).collect(),
    };
    let mut attempts = 0;
    while report.points < count {
        attempts += 1;
        assert!(attempts < 100 * count, "too few interior hover points");
        let (_, p) = &presets[report.points % presets.len()];
        let r = hover_rotation(
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        let outcome = solve_hover(p, &r, &opts).unwrap();
        let Some(s) = outcome.solution().filter(|s| s.interior) else {
            continue;
        };
        let f = full_jacobian(p, &s.control).unwrap();
        let a = reduced_allocation(p);
        report.points += 1;
        if rank_by_elimination(&f.matrix, DEFAULT_RANK_TOL)
            != rank_by_elimination(&a.matrix, DEFAULT_RANK_TOL)
        {
            report.mismatches += 1;
        }
    }
    report
}

/// Largest `max|F − F_fd| / max|F|` over random platforms and controls,
/// with central differences of the wrench map.
pub fn jacobian_fd_suite(seed: u64, count: usize) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let n = rng.gen_range(1..=6);
        let p = random_platform(&mut rng, n, random_tilt);
        let h = random_control(&mut rng, &p);
        let f = full_jacobian(&p, &h).unwrap().matrix;
        let x = h.to_vector(&p);
        let eps = 1e-6;
        let mut fd = DMatrix::zeros(6, x.len());
        for j in 0..x.len() {
            let shifted = |s: f64| {
                let mut y = x.clone();
                y[j] += s;
                wrench_of(&p, &ControlInput::from_vector(&p, &y).unwrap()).unwrap().to_vector()
            };
            fd.set_column(j, &((shifted(eps) - shifted(-eps)) / (2.0 * eps)));
        }
        worst = worst.max((&f - &fd).amax() / f.amax());
    }
    worst
}

/// Largest gap between the zonotope support and a brute-force maximum over
/// every sign pattern of its generators.
pub fn zonotope_suite(seed: u64, directions: usize) -> f64 {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut platforms: Vec<PlatformSpec> = PRESET_NAMES.iter().map(|n| preset(n).unwrap()).collect();
    platforms.push(random_platform(&mut rng, 4, |_| TiltCapability::Dual {
        alpha: AngleRange::FULL,
        beta: AngleRange::FULL,
    }));
    let mut worst: f64 = 0.0;
    for p in &platforms {
        assert!(p.dof() <= 12);
        let h = random_control(&mut rng, p);
        let z = local_moment_zonotope(p, &h).unwrap();
        let m = z.generators.len();
        let vertices: Vec<Vector3<f64>> = (0..1u32 << m)
            .map(|mask| {
                z.generators
                    .iter()
                    .enumerate()
                    .map(|(j, g)| if mask >> j & 1 == 1 { *g } else { -g })
                    .sum()
            })
            .collect();
        for _ in 0..directions / platforms.len() + 1 {
            let d = random_unit(&mut rng);
            let brute = vertices.iter().map(|v| d.dot(v)).fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max((z.support(&d) - brute).abs());
        }
    }
    worst
}

/// Position and attitude drift after holding the hover witness with zero
/// input rates for `duration` seconds.
pub fn hover_drift(p: &PlatformSpec, duration: f64, dt: f64) -> Option<(f64, f64)> {
    let check = can_statically_hover(p, 512, &HoverOptions::default()).unwrap();
    let w = check.witness.filter(|_| check.hoverable)?;
    let r0 = w.orientation;
    let mut state = RigidBodyState::at_rest(r0, w.control.clone());
    let zero = DVector::zeros(p.dof());
    for _ in 0..(duration / dt).round() as usize {
        state = step(p, &state, &zero, dt).unwrap();
    }
    let attitude = so3_log(&(r0.transpose() * state.orientation)).norm();
    Some((state.position.norm(), attitude))
}
