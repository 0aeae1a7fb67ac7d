use clap::{Args, ValueEnum};
use mrav_hover::platform::{load_platform, preset, PlatformSpec};
use std::path::PathBuf;
use std::str::FromStr;

use crate::output::Manifest;

/// Failure kinds mapped to exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed config: exit 2.
    Input(String),
    /// The analysis itself is infeasible: exit 1.
    Domain(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            Self::Input(_) => 2,
            Self::Domain(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Input(m) | Self::Domain(m) => f.write_str(m),
        }
    }
}

impl From<mrav_hover::Error> for CliError {
    fn from(e: mrav_hover::Error) -> Self {
        if e.is_domain() {
            Self::Domain(e.to_string())
        } else {
            Self::Input(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// `v` for every propeller, `i=v` for propeller `i` (1-based), or a
/// comma-separated mix applied left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct PerPropeller {
    raw: String,
    items: Vec<(Option<usize>, f64)>,
}

impl FromStr for PerPropeller {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let items = s
            .split(',')
            .map(|item| {
                let item = item.trim();
                let (idx, val) = match item.split_once('=') {
                    Some((i, v)) => {
                        let i: usize = i.trim().parse().map_err(|_| format!("bad propeller index in '{item}'"))?;
                        if i == 0 {
                            return Err("propeller indices start at 1".to_string());
                        }
                        (Some(i - 1), v)
                    }
                    None => (None, item),
                };
                let v: f64 = val.trim().parse().map_err(|_| format!("bad number in '{item}'"))?;
                if !v.is_finite() {
                    return Err(format!("non-finite value in '{item}'"));
                }
                Ok((idx, v))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            raw: s.to_string(),
            items,
        })
    }
}

impl PerPropeller {
    fn apply(
        &self,
        platform: &mut PlatformSpec,
        flag: &str,
        set: impl Fn(&mut mrav_hover::platform::PropellerSpec, f64),
    ) -> CliResult<()> {
        for &(idx, v) in &self.items {
            match idx {
                None => platform.propellers.iter_mut().for_each(|p| set(p, v)),
                Some(i) => {
                    let n = platform.propellers.len();
                    let p = platform.propellers.get_mut(i).ok_or_else(|| {
                        CliError::Input(format!("{flag}: propeller {} out of range (1..={n})", i + 1))
                    })?;
                    set(p, v);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Args)]
pub struct PlatformArgs {
    /// Platform config file (TOML).
    #[arg(value_name = "CONFIG", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in platform (see `presets`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Platform mass [kg].
    #[arg(long)]
    pub mass: Option<f64>,
    /// Maximum thrust [N]: `v` or `i=v,...`.
    #[arg(long)]
    pub umax: Option<PerPropeller>,
    /// Thrust rate bound [N/s]: `v` or `i=v,...`.
    #[arg(long = "u-rate")]
    pub u_rate: Option<PerPropeller>,
    /// Tilt-angle rate bound [rad/s]: `v` or `i=v,...`.
    #[arg(long = "angle-rate")]
    pub angle_rate: Option<PerPropeller>,
}

impl PlatformArgs {
    pub fn load(&self, manifest: &mut Manifest) -> CliResult<PlatformSpec> {
        let mut p = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                manifest.source = Some(("config".into(), path.display().to_string()));
                load_platform(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
            }
            (None, Some(name)) => {
                manifest.source = Some(("preset".into(), name.clone()));
                preset(name).map_err(|e| CliError::Input(e.to_string()))?
            }
            (None, None) => return Err(CliError::Input("a CONFIG path or --preset is required".into())),
        };
        if let Some(m) = self.mass {
            manifest.overrides.push(("mass".into(), m.to_string()));
            p.mass = m;
        }
        if let Some(o) = &self.umax {
            manifest.overrides.push(("umax".into(), o.raw.clone()));
            o.apply(&mut p, "--umax", |q, v| q.u_max = v)?;
        }
        if let Some(o) = &self.u_rate {
            manifest.overrides.push(("u-rate".into(), o.raw.clone()));
            o.apply(&mut p, "--u-rate", |q, v| q.u_rate_max = v)?;
        }
        if let Some(o) = &self.angle_rate {
            manifest.overrides.push(("angle-rate".into(), o.raw.clone()));
            o.apply(&mut p, "--angle-rate", |q, v| q.angle_rate_max = v)?;
        }
        p.validate().map_err(|e| CliError::Input(e.to_string()))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[command(flatten)]
    pub platform: PlatformArgs,
    /// Number of sampled directions for set computations.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Relative singular-value tolerance for numeric ranks.
    #[arg(long = "rank-tol")]
    pub rank_tol: Option<f64>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Write artifacts into this directory instead of stdout.
    #[arg(long = "out-dir", env = "MRAV_HOVER_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
}

impl CommonArgs {
    pub fn resolution(&self, default: usize, manifest: &mut Manifest) -> CliResult<usize> {
        let r = self.resolution.unwrap_or(default);
        if r < 2 {
            return Err(CliError::Input("--resolution must be at least 2".into()));
        }
        manifest.param("resolution", r);
        Ok(r)
    }

    pub fn hover_options(&self, manifest: &mut Manifest) -> CliResult<mrav_hover::hover::HoverOptions> {
        let mut o = mrav_hover::hover::HoverOptions::default();
        if let Some(t) = self.rank_tol {
            if !(t > 0.0 && t < 1.0) {
                return Err(CliError::Input("--rank-tol must be in (0, 1)".into()));
            }
            o.rank_tol = t;
        }
        manifest.param("rank_tol", o.rank_tol);
        Ok(o)
    }

    pub fn format(&self, default: Format) -> Format {
        self.format.unwrap_or(default)
    }
}
