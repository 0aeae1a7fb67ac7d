use mrav_hover::allocation::{
    fixed_allocation, full_jacobian, numeric_rank, reduced_allocation, vector_allocation, AllocationMatrix,
};
use mrav_hover::hover::{
    angles_for_body_lift, classify, hover_orientation_set, hover_rotation, solve_hover, HoverOptions,
    HoverOutcome, HoverSolution,
};
use mrav_hover::local_hover::{calibrate_lhi, lhi, lhi_map, local_moment_zonotope, LhiCalibration};
use mrav_hover::platform::{preset_description, ControlInput, PlatformSpec, PRESET_NAMES};
use mrav_hover::sim::{
    force_orientation_experiment, moment_step_experiment, so3_log, ControllerGains, ExperimentResult,
};
use mrav_hover::wrench_sets::{force_set_at_hover, moment_set_at_hover, odl, DirectionGrid, DEFAULT_RESOLUTION};
use nalgebra::{Matrix3, Vector3};
use serde_json::{json, Value};

use crate::args::{CliError, CliResult, CommonArgs, Format};
use crate::output::{json_document, num, vec3, Cell, Csv, Manifest, Sink};

const LHI_GRID: usize = 256;
const MOMENT_SET_RESOLUTION: usize = 512;

pub struct Ctx {
    pub manifest: Manifest,
    pub sink: Sink,
}

impl Ctx {
    pub fn new(subcommand: &'static str, common: Option<&CommonArgs>) -> Self {
        Self {
            manifest: Manifest::new(subcommand),
            sink: Sink {
                dir: common.and_then(|c| c.out_dir.clone()),
            },
        }
    }

    fn stem(&self) -> &'static str {
        self.manifest.subcommand
    }

    /// Emits a JSON document, or registers and writes a CSV built by `csv`.
    fn emit(&mut self, format: Format, body: impl FnOnce() -> Value, csv: impl FnOnce(&Manifest) -> String) -> CliResult<()> {
        let ext = match format {
            Format::Json => "json",
            Format::Csv => "csv",
        };
        let path = self.sink.path_for(self.stem(), ext);
        if let Some(p) = &path {
            self.manifest.outputs.push(p.clone());
        }
        let text = match format {
            Format::Json => json_document(&self.manifest, body()),
            Format::Csv => csv(&self.manifest),
        };
        self.sink.emit(path.as_deref(), &text)?;
        Ok(())
    }
}

fn json_only(common: &CommonArgs, subcommand: &str) -> CliResult<()> {
    match common.format {
        Some(Format::Csv) => Err(CliError::Input(format!("{subcommand} only emits JSON"))),
        _ => Ok(()),
    }
}

fn deg_rotation(phi_deg: f64, theta_deg: f64) -> Matrix3<f64> {
    hover_rotation(phi_deg.to_radians(), theta_deg.to_radians())
}

fn control_json(platform: &PlatformSpec, h: &ControlInput) -> Value {
    let items: Vec<Value> = platform
        .active_indices()
        .into_iter()
        .enumerate()
        .map(|(k, i)| {
            let (a, b) = match (h.angles[k], platform.propellers[i].tilt.num_angles()) {
                (Some((a, _)), 1) => (num(a), Value::Null),
                (Some((a, b)), 2) => (num(a), num(b)),
                _ => (Value::Null, Value::Null),
            };
            json!({"propeller": i + 1, "thrust": h.thrust[k], "alpha": a, "beta": b})
        })
        .collect();
    Value::Array(items)
}

fn solution_json(platform: &PlatformSpec, s: &HoverSolution) -> Value {
    let (phi, theta) = angles_for_body_lift(&(s.orientation.transpose() * Vector3::z()));
    json!({
        "phi_deg": phi.to_degrees(),
        "theta_deg": theta.to_degrees(),
        "interior": s.interior,
        "force_error": s.force_error,
        "moment_norm": s.moment_norm,
        "control": control_json(platform, &s.control),
    })
}

fn min_u_max(platform: &PlatformSpec) -> f64 {
    platform.active().map(|p| p.u_max).fold(f64::INFINITY, f64::min)
}

fn hover_at(platform: &PlatformSpec, phi: f64, theta: f64, opts: &HoverOptions) -> CliResult<HoverSolution> {
    match solve_hover(platform, &deg_rotation(phi, theta), opts)? {
        HoverOutcome::Hover(s) => Ok(s),
        HoverOutcome::Infeasible => Err(CliError::Domain(format!(
            "platform cannot hover at phi = {phi} deg, theta = {theta} deg"
        ))),
    }
}

pub fn analyze(common: &CommonArgs) -> CliResult<()> {
    json_only(common, "analyze")?;
    let mut ctx = Ctx::new("analyze", Some(common));
    let p = common.platform.load(&mut ctx.manifest)?;
    let res = common.resolution(DEFAULT_RESOLUTION, &mut ctx.manifest)?;
    let opts = common.hover_options(&mut ctx.manifest)?;
    let c = classify(&p, res, &opts)?;
    let u_max = min_u_max(&p);
    let body = json!({
        "platform": {
            "propellers": p.propellers.len(),
            "active": p.num_active(),
            "dof": c.dof,
            "mass": p.mass,
            "weight": c.weight,
            "u_max_min": u_max,
        },
        "class": c.class,
        "csh": c.csh,
        "ranks": {
            "a": c.rank_a,
            "a_force": c.rank_af,
            "a_moment": c.rank_am,
            "hover_force": c.rank_hover_force,
        },
        "odl": c.odl,
        "odl_over_u_max": c.odl / u_max,
        "od_force_test": c.odl >= c.weight,
        "od_mass_test": p.mass <= c.odl,
        "hover": {
            "hoverable": c.check.hoverable,
            "max_lift": c.check.max_lift,
            "max_lift_direction": vec3(&c.check.max_lift_direction),
            "moment_interior": c.check.moment_interior,
            "witness": c.check.witness.as_ref().map_or(Value::Null, |w| solution_json(&p, w)),
        },
    });
    ctx.emit(Format::Json, || body, |_| unreachable!())
}

pub fn hover_solve(common: &CommonArgs, phi: f64, theta: f64) -> CliResult<()> {
    json_only(common, "hover-solve")?;
    let mut ctx = Ctx::new("hover-solve", Some(common));
    let p = common.platform.load(&mut ctx.manifest)?;
    let opts = common.hover_options(&mut ctx.manifest)?;
    ctx.manifest.param("phi_deg", phi);
    ctx.manifest.param("theta_deg", theta);
    let outcome = solve_hover(&p, &deg_rotation(phi, theta), &opts)?;
    let body = match outcome.solution() {
        Some(s) => json!({"feasible": true, "solution": solution_json(&p, s)}),
        None => json!({"feasible": false, "solution": null}),
    };
    ctx.emit(Format::Json, || body, |_| unreachable!())?;
    if outcome.solution().is_none() {
        return Err(CliError::Domain(format!("no hover control at phi = {phi} deg, theta = {theta} deg")));
    }
    Ok(())
}

pub fn hover_map(common: &CommonArgs, step: f64) -> CliResult<()> {
    let mut ctx = Ctx::new("hover-map", Some(common));
    let p = common.platform.load(&mut ctx.manifest)?;
    let opts = common.hover_options(&mut ctx.manifest)?;
    check_step(step)?;
    ctx.manifest.param("step_deg", step);
    let cells = hover_orientation_set(&p, step, &opts)?;
    let fields = |o: &HoverOutcome| match o.solution() {
        Some(s) => (true, s.interior, Some(s.force_error), Some(s.moment_norm)),
        None => (false, false, None, None),
    };
    ctx.emit(
        common.format(Format::Csv),
        || {
            let rows: Vec<Value> = cells
                .iter()
                .map(|c| {
                    let (feasible, interior, fe, mn) = fields(&c.outcome);
                    json!({"phi_deg": c.phi_deg, "theta_deg": c.theta_deg, "feasible": feasible,
                           "interior": interior, "force_error": fe, "moment_norm": mn})
                })
                .collect();
            json!({"cells": rows})
        },
        |m| {
            let header = ["phi_deg", "theta_deg", "feasible", "interior", "force_error", "moment_norm"];
            let mut csv = Csv::new(m, &header.map(String::from));
            for c in &cells {
                let (feasible, interior, fe, mn) = fields(&c.outcome);
                csv.row([c.phi_deg.into(), c.theta_deg.into(), feasible.into(), interior.into(), fe.into(), mn.into()]);
            }
            csv.finish()
        },
    )
}

fn check_step(step: f64) -> CliResult<()> {
    if !(step > 0.0 && step <= 180.0) {
        return Err(CliError::Input("--step must be in (0, 180] degrees".into()));
    }
    Ok(())
}

pub fn odl_cmd(common: &CommonArgs) -> CliResult<()> {
    let mut ctx = Ctx::new("odl", Some(common));
    let p = common.platform.load(&mut ctx.manifest)?;
    let res = common.resolution(DEFAULT_RESOLUTION, &mut ctx.manifest)?;
    let r = odl(&p, res)?;
    let degenerate = r.odl <= 1e-9 * min_u_max(&p);
    let warning = if degenerate {
        let a = reduced_allocation(&p);
        let rank = numeric_rank(&a.force_rows(), mrav_hover::allocation::DEFAULT_RANK_TOL);
        let msg = format!("force set at hover has empty interior (force rank {rank}); odl = 0");
        eprintln!("warning: {msg}");
        Value::String(msg)
    } else {
        Value::Null
    };
    ctx.emit(
        common.format(Format::Json),
        || {
            json!({"odl": r.odl, "weight": p.weight(), "resolution": r.resolution,
                   "directions": r.directions, "min_direction": r.min_direction, "warning": warning})
        },
        |m| {
            let header = ["odl", "weight", "resolution", "directions", "dx", "dy", "dz"];
            let mut csv = Csv::new(m, &header.map(String::from));
            let d = r.min_direction;
            csv.row([r.odl.into(), p.weight().into(), r.resolution.into(), r.directions.into(),
                     d[0].into(), d[1].into(), d[2].into()]);
            csv.finish()
        },
    )
}

fn points_csv(m: &Manifest, sets: &[(&str, &[Vector3<f64>])]) -> String {
    let mut csv = Csv::new(m, &["set", "x", "y", "z"].map(String::from));
    for (name, pts) in sets {
        for v in *pts {
            csv.row([Cell::from(*name), v.x.into(), v.y.into(), v.z.into()]);
        }
    }
    csv.finish()
}

fn points_json(pts: &[Vector3<f64>]) -> Value {
    Value::Array(pts.iter().map(vec3).collect())
}

pub fn force_set(common: &CommonArgs) -> CliResult<()> {
    let mut ctx = Ctx::new("force-set", Some(common));
    let p = common.platform.load(&mut ctx.manifest)?;
    let res = common.resolution(DEFAULT_RESOLUTION, &mut ctx.manifest)?;
    let set = force_set_at_hover(&p, res)?;
    ctx.emit(
        common.format(Format::Csv),
        || json!({"points": points_json(&set.points)}),
        |m| points_csv(m, &[("force", &set.points)]),
    )
}

#[derive(Debug, Clone, Copy)]
pub struct Calibrate {
    pub target: f64,
    pub phi: f64,
    pub theta: f64,
}

fn maybe_calibrate(
    ctx: &mut Ctx,
    p: PlatformSpec,
    cal: Option<Calibrate>,
    grid: &DirectionGrid,
    opts: &HoverOptions,
) -> CliResult<(PlatformSpec, Option<LhiCalibration>)> {
    let Some(c) = cal else {
        return Ok((p, None));
    };
    if c.target.is_nan() || c.target <= 0.0 {
        return Err(CliError::Input("--calibrate target must be positive".into()));
    }
    ctx.manifest.param("calibrate_target", c.target);
    ctx.manifest.param("calibrate_phi_deg", c.phi);
    ctx.manifest.param("calibrate_theta_deg", c.theta);
    let (q, info) = calibrate_lhi(&p, &deg_rotation(c.phi, c.theta), c.target, grid, opts)?;
    Ok((q, Some(info)))
}

fn calibration_json(c: &Option<LhiCalibration>) -> Value {
    c.as_ref().map_or(Value::Null, |c| {
        json!({"scale": c.scale, "mass": c.mass, "u_rate_max": c.u_rate_max, "lhi": c.lhi})
    })
}

pub fn lhi_cmd(common: &CommonArgs, phi: f64, theta: f64, cal: Option<Calibrate>) -> CliResult<()> {
    let mut ctx = Ctx::new("lhi", Some(common));
    let p = common.platform.load(&mut ctx.manifest)?;
    let res = common.resolution(LHI_GRID, &mut ctx.manifest)?;
    let opts = common.hover_options(&mut ctx.manifest)?;
    ctx.manifest.param("phi_deg", phi);
    ctx.manifest.param("theta_deg", theta);
    let grid = DirectionGrid::fibonacci(res);
    let (p, calibration) = maybe_calibrate(&mut ctx, p, cal, &grid, &opts)?;
    let s = hover_at(&p, phi, theta, &opts)?;
    let r = lhi(&p, &s.control, &grid, opts.rank_tol)?;
    let z = local_moment_zonotope(&p, &s.control)?;
    let generators: Vec<Value> = z
        .tags
        .iter()
        .zip(&z.generators)
        .map(|(t, g)| json!({"input": t.to_string(), "moment_rate": vec3(g)}))
        .collect();
    ctx.emit(
        common.format(Format::Json),
        || {
            json!({"lhi": r.lhi, "min_direction": r.min_direction, "generators": generators,
                   "hover": solution_json(&p, &s), "calibration": calibration_json(&calibration)})
        },
        |m| {
            let mut csv = Csv::new(m, &["input", "mx_rate", "my_rate", "mz_rate"].map(String::from));
            for (t, g) in z.tags.iter().zip(&z.generators) {
                csv.row([Cell::S(t.to_string()), g.x.into(), g.y.into(), g.z.into()]);
            }
            csv.finish()
        },
    )
}

pub fn lhi_map_cmd(common: &CommonArgs, step: f64, cal: Option<Calibrate>) -> CliResult<()> {
    let mut ctx = Ctx::new("lhi-map", Some(common));
    let p = common.platform.load(&mut ctx.manifest)?;
    let res = common.resolution(LHI_GRID, &mut ctx.manifest)?;
    let opts = common.hover_options(&mut ctx.manifest)?;
    check_step(step)?;
    ctx.manifest.param("step_deg", step);
    let grid = DirectionGrid::fibonacci(res);
    let (p, calibration) = maybe_calibrate(&mut ctx, p, cal, &grid, &opts)?;
    let cells = lhi_map(&p, step, &grid, &opts)?;
    ctx.emit(
        common.format(Format::Csv),
        || {
            let rows: Vec<Value> = cells
                .iter()
                .map(|c| json!({"phi_deg": c.phi_deg, "theta_deg": c.theta_deg, "lhi": c.lhi, "feasible": c.lhi.is_some()}))
                .collect();
            json!({"calibration": calibration_json(&calibration), "cells": rows})
        },
        |m| {
            let mut csv = Csv::new(m, &["phi_deg", "theta_deg", "lhi", "feasible"].map(String::from));
            for c in &cells {
                csv.row([c.phi_deg.into(), c.theta_deg.into(), c.lhi.into(), c.lhi.is_some().into()]);
            }
            csv.finish()
        },
    )
}

pub fn moment_sets(common: &CommonArgs, phi: f64, theta: f64) -> CliResult<()> {
    let mut ctx = Ctx::new("moment-sets", Some(common));
    let p = common.platform.load(&mut ctx.manifest)?;
    let res = common.resolution(MOMENT_SET_RESOLUTION, &mut ctx.manifest)?;
    let opts = common.hover_options(&mut ctx.manifest)?;
    ctx.manifest.param("phi_deg", phi);
    ctx.manifest.param("theta_deg", theta);
    let m_set = moment_set_at_hover(&p, res)?;
    let s = hover_at(&p, phi, theta, &opts)?;
    let z = local_moment_zonotope(&p, &s.control)?;
    let grid = DirectionGrid::fibonacci(res);
    let local: Vec<Vector3<f64>> = grid
        .directions
        .iter()
        .map(|d| {
            z.generators
                .iter()
                .map(|g| if d.dot(g) >= 0.0 { *g } else { -g })
                .sum()
        })
        .collect();
    ctx.emit(
        common.format(Format::Csv),
        || {
            json!({"moment_set": points_json(&m_set.points), "local_moment_set": points_json(&local),
                   "hover": solution_json(&p, &s)})
        },
        |m| points_csv(m, &[("moment", &m_set.points), ("local_moment", &local)]),
    )
}

#[derive(Debug, Clone, Copy)]
pub enum Experiment {
    MomentStep { axis: usize, magnitude: f64 },
    ForceTrack { angle_deg: f64 },
}

pub struct SimulateArgs {
    pub experiment: Experiment,
    pub phi: f64,
    pub theta: f64,
    pub duration: f64,
    pub dt: f64,
    pub gains: ControllerGains,
}

pub fn simulate(common: &CommonArgs, a: &SimulateArgs) -> CliResult<()> {
    let mut ctx = Ctx::new("simulate", Some(common));
    let p = common.platform.load(&mut ctx.manifest)?;
    let opts = common.hover_options(&mut ctx.manifest)?;
    if !(a.dt > 0.0 && a.duration > 0.0 && a.dt <= a.duration) {
        return Err(CliError::Input("need 0 < --dt <= --duration".into()));
    }
    if !(a.gains.k > 0.0 && a.gains.damping >= 0.0) {
        return Err(CliError::Input("need --gain > 0 and --damping >= 0".into()));
    }
    let m = &mut ctx.manifest;
    m.param("phi_deg", a.phi);
    m.param("theta_deg", a.theta);
    m.param("duration", a.duration);
    m.param("dt", a.dt);
    m.param("gain", a.gains.k);
    m.param("damping", a.gains.damping);
    let r_h = deg_rotation(a.phi, a.theta);
    let result = match a.experiment {
        Experiment::MomentStep { axis, magnitude } => {
            m.param("experiment", "moment-step");
            m.param("axis", ["x", "y", "z"][axis]);
            m.param("magnitude", magnitude);
            moment_step_experiment(&p, &r_h, axis, magnitude, a.duration, a.dt, &a.gains, &opts)?
        }
        Experiment::ForceTrack { angle_deg } => {
            m.param("experiment", "force-track");
            m.param("angle_deg", angle_deg);
            force_orientation_experiment(&p, &r_h, angle_deg.to_radians(), a.duration, a.dt, &a.gains, &opts)?
        }
    };
    let summary = json!({
        "rise_time_90": result.summary.rise_time_90,
        "moment_integral_50ms": result.summary.moment_integral_50ms,
        "settle_time": result.summary.settle_time,
        "samples": result.samples.len(),
    });
    if ctx.sink.dir.is_some() {
        // both artifacts when writing to a directory
        let csv_path = ctx.sink.path_for("simulate", "csv");
        let json_path = ctx.sink.path_for("simulate", "json");
        ctx.manifest.outputs.extend([csv_path.clone().unwrap(), json_path.clone().unwrap()]);
        let csv = series_csv(&ctx.manifest, &p, &r_h, &result);
        let doc = json_document(&ctx.manifest, json!({"summary": summary}));
        ctx.sink.emit(csv_path.as_deref(), &csv)?;
        ctx.sink.emit(json_path.as_deref(), &doc)?;
        return Ok(());
    }
    ctx.emit(
        common.format(Format::Json),
        || json!({"summary": summary}),
        |m| series_csv(m, &p, &r_h, &result),
    )
}

fn series_csv(m: &Manifest, p: &PlatformSpec, r0: &Matrix3<f64>, r: &ExperimentResult) -> String {
    let mut header: Vec<String> = [
        "t", "x", "y", "z", "rot_x", "rot_y", "rot_z", "wx", "wy", "wz", "fx", "fy", "fz", "mx", "my", "mz",
        "fx_des", "fy_des", "fz_des", "mx_des", "my_des", "mz_des", "force_angle_error_deg",
    ]
    .map(String::from)
    .to_vec();
    let tags = p.input_layout();
    header.extend(tags.iter().map(|t| t.to_string()));
    header.extend(tags.iter().map(|t| format!("{t}_rate")));
    let mut csv = Csv::new(m, &header);
    for s in &r.samples {
        let rot = so3_log(&(r0.transpose() * s.orientation));
        let mut row: Vec<Cell> = vec![s.t.into()];
        for v in [&s.position, &rot, &s.angular_velocity, &s.applied.force, &s.applied.moment,
                  &s.commanded.force, &s.commanded.moment] {
            row.extend(v.iter().map(|x| Cell::F(*x)));
        }
        row.push(s.force_angle_error.to_degrees().into());
        row.extend(s.inputs.iter().map(|x| Cell::F(*x)));
        row.extend(s.input_rates.iter().map(|x| Cell::F(*x)));
        csv.row(row);
    }
    csv.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MatrixKind {
    /// Vectoring allocation A (3 columns per active propeller).
    Vector,
    /// Reduced allocation A′.
    Reduced,
    /// Fixed allocation at the hover control.
    Fixed,
    /// Full Jacobian F at the hover control.
    Jacobian,
}

pub fn dump_allocation(common: &CommonArgs, kind: MatrixKind, phi: f64, theta: f64) -> CliResult<()> {
    let mut ctx = Ctx::new("dump-allocation", Some(common));
    let p = common.platform.load(&mut ctx.manifest)?;
    let opts = common.hover_options(&mut ctx.manifest)?;
    let name = match kind {
        MatrixKind::Vector => "vector",
        MatrixKind::Reduced => "reduced",
        MatrixKind::Fixed => "fixed",
        MatrixKind::Jacobian => "jacobian",
    };
    ctx.manifest.param("matrix", name);
    let a: AllocationMatrix = match kind {
        MatrixKind::Vector => vector_allocation(&p),
        MatrixKind::Reduced => reduced_allocation(&p),
        MatrixKind::Fixed | MatrixKind::Jacobian => {
            ctx.manifest.param("phi_deg", phi);
            ctx.manifest.param("theta_deg", theta);
            let s = hover_at(&p, phi, theta, &opts)?;
            if kind == MatrixKind::Fixed {
                fixed_allocation(&p, &s.control)?
            } else {
                full_jacobian(&p, &s.control)?
            }
        }
    };
    let labels: Vec<String> = a.columns.iter().map(|c| c.label()).collect();
    let rows = ["fx", "fy", "fz", "mx", "my", "mz"];
    let rank = numeric_rank(&a.matrix, opts.rank_tol);
    ctx.emit(
        common.format(Format::Csv),
        || {
            let m: Vec<Vec<f64>> = (0..6).map(|r| a.matrix.row(r).iter().cloned().collect()).collect();
            json!({"rows": rows, "columns": labels, "matrix": m, "rank": rank})
        },
        |m| {
            let mut header = vec!["row".to_string()];
            header.extend(labels.iter().cloned());
            let mut csv = Csv::new(m, &header);
            for (r, name) in rows.iter().enumerate() {
                let mut row = vec![Cell::from(*name)];
                row.extend(a.matrix.row(r).iter().map(|x| Cell::F(*x)));
                csv.row(row);
            }
            csv.finish()
        },
    )
}

pub fn presets(format: Option<Format>, out_dir: Option<std::path::PathBuf>) -> CliResult<()> {
    let mut ctx = Ctx::new("presets", None);
    ctx.sink.dir = out_dir;
    let list: Vec<(&str, &str)> =
        PRESET_NAMES.iter().map(|n| (*n, preset_description(n).unwrap_or(""))).collect();
    ctx.emit(
        format.unwrap_or(Format::Json),
        || {
            let items: Vec<Value> = list.iter().map(|(n, d)| json!({"name": n, "description": d})).collect();
            json!({"presets": items})
        },
        |m| {
            let mut csv = Csv::new(m, &["name", "description"].map(String::from));
            for (n, d) in &list {
                csv.row([Cell::from(*n), Cell::from(*d)]);
            }
            csv.finish()
        },
    )
}
