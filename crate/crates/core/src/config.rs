//! JSON experiment configuration.
//!
//! Scalar fields accept either a number or a string such as `"3pi/4"`,
//! `"-pi/2"`, `"2*pi"` or `"1/3"`. The original spelling is kept so a
//! configuration serializes back to what was read.
//!
//! ```json
//! {
//!   "name": "line",
//!   "trajectory": { "kind": "line", "speed": 1, "angle": "pi/2",
//!                   "offset": [0, 0], "interval": [1, 3] },
//!   "band": { "k_max": "3pi", "count": 18 },
//!   "directions": { "angles": ["pi/2"] },
//!   "grid": { "bounds": [[-2, 2], [0, 4]], "resolution": [201, 201] }
//! }
//! ```

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{FrequencyBand, NoiseSpec};
use crate::imaging::{SearchGrid, SliceSpec};
use crate::indicator::DEFAULT_THRESHOLD;
use crate::spectral::SpectrumMode;
use crate::trajectory::{Direction, Knot, TimeInterval, Trajectory};

/// A number or a `pi` expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Expr(String),
}

impl Scalar {
    pub fn value(&self) -> Result<f64> {
        match self {
            Scalar::Number(x) => Ok(*x),
            Scalar::Expr(s) => parse_expr(s),
        }
    }
}

impl From<f64> for Scalar {
    fn from(x: f64) -> Self {
        Scalar::Number(x)
    }
}

fn parse_number(s: &str, whole: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Config(format!("cannot read `{whole}` as a number")))
}

/// Evaluates `[sign][coef][*]pi[/den]`, `num/den` or a plain number.
pub fn parse_expr(input: &str) -> Result<f64> {
    let s: String = input
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_lowercase();
    if s.is_empty() {
        return Err(Error::Config("empty numeric expression".into()));
    }
    let (numer, denom) = match s.split_once('/') {
        Some((n, d)) => (n.to_string(), Some(parse_number(d, input)?)),
        None => (s.clone(), None),
    };
    let value = if let Some(coef) = numer.strip_suffix("pi").or_else(|| numer.strip_suffix('π')) {
        let coef = coef.strip_suffix('*').unwrap_or(coef);
        let c = match coef {
            "" | "+" => 1.0,
            "-" => -1.0,
            other => parse_number(other, input)?,
        };
        c * PI
    } else {
        parse_number(&numer, input)?
    };
    let value = match denom {
        Some(0.0) => return Err(Error::Config(format!("division by zero in `{input}`"))),
        Some(d) => value / d,
        None => value,
    };
    if !value.is_finite() {
        return Err(Error::Config(format!("`{input}` is not finite")));
    }
    Ok(value)
}

fn values(list: &[Scalar]) -> Result<Vec<f64>> {
    list.iter().map(Scalar::value).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectoryConfig {
    /// a(t) = offset + speed·t·u with u = (cos angle, sin angle) in 2D or `axis` in 3D.
    Line {
        speed: Scalar,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        angle: Option<Scalar>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        axis: Option<Vec<Scalar>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        offset: Option<Vec<Scalar>>,
        interval: [Scalar; 2],
    },
    /// a(t) = center + radius·(cos(±t + phase), sin(±t + phase)).
    Arc {
        center: [Scalar; 2],
        radius: Scalar,
        #[serde(default, skip_serializing_if = "std::ops::Not::not")]
        clockwise: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phase: Option<Scalar>,
        interval: [Scalar; 2],
    },
    /// Rows of `[t, x1, x2(, x3)]`.
    PiecewiseLinear {
        knots: Vec<Vec<Scalar>>,
    },
    Sampled {
        knots: Vec<Vec<Scalar>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub k_max: Scalar,
    pub count: usize,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self {
            k_max: Scalar::Expr("3pi".into()),
            count: 18,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DirectionsConfig {
    /// Planar polar angles.
    Angles(Vec<Scalar>),
    /// `count` planar directions θ_j = (j-1)·2π/count.
    Count(usize),
    /// `[θ, φ]` pairs for spatial directions.
    Spherical(Vec<[Scalar; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SliceConfig {
    /// 1-based ambient axis.
    pub axis: usize,
    pub offset: Scalar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub bounds: Vec<[Scalar; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slices: Vec<SliceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub delta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    pub trajectory: TrajectoryConfig,
    #[serde(default)]
    pub band: BandConfig,
    pub directions: DirectionsConfig,
    #[serde(default)]
    pub mode: SpectrumMode,
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Drop Picard terms with λ below this fraction of λ_max.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    /// Outside-margin for contrast statistics.
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_margin() -> f64 {
    0.25
}

/// Everything a command needs, with numbers evaluated and cross-checked.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub name: String,
    pub trajectory: Trajectory,
    pub band: FrequencyBand,
    pub directions: Vec<Direction>,
    pub mode: SpectrumMode,
    pub grid: SearchGrid,
    pub slices: Vec<SliceSpec>,
    pub noise: Option<NoiseSpec>,
    pub threshold: f64,
    pub cutoff: Option<f64>,
    pub margin: f64,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(format!("cannot read {}", path.display()), e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn build(&self) -> Result<Experiment> {
        let trajectory = self.trajectory.build()?;
        let dim = trajectory.dim();
        let band = FrequencyBand::new(self.band.k_max.value()?, self.band.count)?;
        let directions = self.directions.build()?;
        if directions.is_empty() {
            return Err(Error::Config("at least one direction is required".into()));
        }
        if let Some(d) = directions.iter().find(|d| d.dim() != dim) {
            return Err(Error::Config(format!("{}D direction for a {dim}D trajectory", d.dim())));
        }
        let bounds: Vec<(f64, f64)> = self
            .grid
            .bounds
            .iter()
            .map(|[lo, hi]| Ok((lo.value()?, hi.value()?)))
            .collect::<Result<_>>()?;
        if bounds.len() != dim {
            return Err(Error::Config(format!("{}D grid for a {dim}D trajectory", bounds.len())));
        }
        let resolution = match &self.grid.resolution {
            Some(r) => r.clone(),
            None => vec![if dim == 2 { 201 } else { 81 }; dim],
        };
        let grid = SearchGrid::new(&bounds, &resolution).map_err(|e| Error::Config(e.to_string()))?;
        if dim == 2 && !self.grid.slices.is_empty() {
            return Err(Error::Config("slices need a 3D grid".into()));
        }
        let slices = self
            .grid
            .slices
            .iter()
            .map(|s| {
                if !(1..=3).contains(&s.axis) {
                    return Err(Error::Config(format!("slice axis must be 1, 2 or 3, got {}", s.axis)));
                }
                let spec = SliceSpec {
                    axis: s.axis - 1,
                    offset: s.offset.value()?,
                };
                grid.slice(spec).map_err(|e| Error::Config(e.to_string()))?;
                Ok(spec)
            })
            .collect::<Result<Vec<_>>>()?;
        let noise = match &self.noise {
            Some(n) if !(n.delta >= 0.0 && n.delta.is_finite()) => {
                return Err(Error::Config(format!("noise delta must be ≥ 0, got {}", n.delta)))
            }
            Some(n) => Some(NoiseSpec {
                delta: n.delta,
                seed: n.seed,
            }),
            None => None,
        };
        if self.threshold.is_nan() || self.threshold <= 0.0 {
            return Err(Error::Config(format!("threshold must be > 0, got {}", self.threshold)));
        }
        if let Some(c) = self.cutoff {
            if !(0.0..1.0).contains(&c) {
                return Err(Error::Config(format!("cutoff must lie in [0, 1), got {c}")));
            }
        }
        if self.margin.is_nan() || self.margin < 0.0 {
            return Err(Error::Config(format!("margin must be ≥ 0, got {}", self.margin)));
        }
        Ok(Experiment {
            name: self.name.clone(),
            trajectory,
            band,
            directions,
            mode: self.mode,
            grid,
            slices,
            noise,
            threshold: self.threshold,
            cutoff: self.cutoff,
            margin: self.margin,
            output: self.output.clone(),
        })
    }
}

fn interval(pair: &[Scalar; 2]) -> Result<TimeInterval> {
    TimeInterval::new(pair[0].value()?, pair[1].value()?)
}

fn knots(rows: &[Vec<Scalar>]) -> Result<(usize, Vec<Knot>)> {
    let first = rows.first().ok_or_else(|| Error::Config("knot list is empty".into()))?;
    let dim = first.len().saturating_sub(1);
    if !(2..=3).contains(&dim) {
        return Err(Error::Config("knots must be [t, x1, x2] or [t, x1, x2, x3]".into()));
    }
    let knots = rows
        .iter()
        .map(|row| {
            if row.len() != dim + 1 {
                return Err(Error::Config("all knots need the same number of coordinates".into()));
            }
            let v = values(row)?;
            Ok(if dim == 2 {
                Knot::planar(v[0], v[1], v[2])
            } else {
                Knot::spatial(v[0], v[1], v[2], v[3])
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((dim, knots))
}

impl TrajectoryConfig {
    pub fn build(&self) -> Result<Trajectory> {
        match self {
            TrajectoryConfig::Line {
                speed,
                angle,
                axis,
                offset,
                interval: iv,
            } => {
                let iv = interval(iv)?;
                let speed = speed.value()?;
                let offset = offset.as_deref().map(values).transpose()?;
                match (angle, axis) {
                    (Some(angle), None) => {
                        let o = offset.unwrap_or_else(|| vec![0.0; 2]);
                        if o.len() != 2 {
                            return Err(Error::Config("a planar line needs a 2D offset".into()));
                        }
                        Trajectory::line_2d(speed, angle.value()?, [o[0], o[1]], iv)
                    }
                    (None, Some(axis)) => {
                        let a = values(axis)?;
                        let o = offset.unwrap_or_else(|| vec![0.0; 3]);
                        if a.len() != 3 || o.len() != 3 {
                            return Err(Error::Config("a spatial line needs a 3D axis and offset".into()));
                        }
                        Trajectory::line_3d(speed, [a[0], a[1], a[2]], [o[0], o[1], o[2]], iv)
                    }
                    _ => Err(Error::Config(
                        "a line needs exactly one of `angle` (2D) or `axis` (3D)".into(),
                    )),
                }
            }
            TrajectoryConfig::Arc {
                center,
                radius,
                clockwise,
                phase,
                interval: iv,
            } => {
                let rate = if *clockwise { -1.0 } else { 1.0 };
                let phase = phase.as_ref().map(Scalar::value).transpose()?.unwrap_or(0.0);
                Trajectory::arc_with_phase(
                    [center[0].value()?, center[1].value()?],
                    radius.value()?,
                    rate,
                    phase,
                    interval(iv)?,
                )
            }
            TrajectoryConfig::PiecewiseLinear { knots: rows } => {
                let (dim, k) = knots(rows)?;
                Trajectory::piecewise_linear(dim, k)
            }
            TrajectoryConfig::Sampled { knots: rows } => {
                let (dim, k) = knots(rows)?;
                Trajectory::sampled(dim, k)
            }
        }
        .map_err(|e| match e {
            Error::Domain(msg) => Error::Config(format!("trajectory: {msg}")),
            other => other,
        })
    }
}

impl DirectionsConfig {
    pub fn build(&self) -> Result<Vec<Direction>> {
        match self {
            DirectionsConfig::Angles(list) => Ok(values(list)?.into_iter().map(Direction::from_angle).collect()),
            DirectionsConfig::Count(m) => Ok(Direction::equally_spaced(*m)),
            DirectionsConfig::Spherical(pairs) => pairs
                .iter()
                .map(|[t, p]| Ok(Direction::from_spherical(t.value()?, p.value()?)))
                .collect(),
        }
    }
}
