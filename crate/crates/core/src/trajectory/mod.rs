//! Orbit functions of a moving point source and the retarded phase
//! h(t) = t + x̂·a(t).
//!
//! Four orbit families are supported: straight lines with constant speed,
//! circular arcs, piecewise-linear curves given by knots, and densely sampled
//! tables (also linearly interpolated). Everything here is immutable after
//! construction.

mod direction;
mod observability;

pub use direction::{wrap_angle, AngleSet, Direction};
pub use observability::{
    observable_set_arc, observable_set_line, Observability, ObservabilityReport, Strip, ThetaDomain,
    CLASSIFICATION_TOLERANCE, PLATEAU_THRESHOLD,
};

use std::f64::consts::TAU;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Points and vectors are stored in three components; planar orbits keep x₃ = 0.
pub type Point = Vector3<f64>;

/// Samples used by the generic extremum search.
pub const DENSE_SAMPLES: usize = 10_000;

/// Emission interval `[t_min, t_max]` of the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeInterval {
    t_min: f64,
    t_max: f64,
}

impl TimeInterval {
    pub fn new(t_min: f64, t_max: f64) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite()) {
            return Err(Error::Domain(format!("time interval [{t_min}, {t_max}] is not finite")));
        }
        if t_min < 0.0 || t_min >= t_max {
            return Err(Error::Domain(format!(
                "time interval requires 0 <= t_min < t_max, got [{t_min}, {t_max}]"
            )));
        }
        Ok(Self { t_min, t_max })
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    /// T = t_max - t_min.
    pub fn duration(&self) -> f64 {
        self.t_max - self.t_min
    }

    pub fn contains(&self, t: f64) -> bool {
        self.t_min <= t && t <= self.t_max
    }
}

/// A `(time, position)` pair of a piecewise-linear or sampled orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub time: f64,
    pub point: Point,
}

impl Knot {
    pub fn planar(time: f64, x1: f64, x2: f64) -> Self {
        Self {
            time,
            point: Vector3::new(x1, x2, 0.0),
        }
    }

    pub fn spatial(time: f64, x1: f64, x2: f64, x3: f64) -> Self {
        Self {
            time,
            point: Vector3::new(x1, x2, x3),
        }
    }
}

/// Shape of the orbit.
#[derive(Debug, Clone, PartialEq)]
pub enum Orbit {
    /// a(t) = offset + speed·t·axis, with `axis` a unit vector.
    Line {
        speed: f64,
        axis: Point,
        offset: Point,
    },
    /// a(t) = center + radius·(cos(rate·t + phase), sin(rate·t + phase)), rate = ±1.
    Arc {
        center: Point,
        radius: f64,
        rate: f64,
        phase: f64,
    },
    PiecewiseLinear {
        knots: Vec<Knot>,
    },
    /// Dense table; interpolated linearly like `PiecewiseLinear` but never
    /// given special treatment of its knots in the extremum search.
    Sampled {
        knots: Vec<Knot>,
    },
}

/// Velocity at a time instant, flagging a jump of a′ at knot times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocitySample {
    pub velocity: Point,
    pub discontinuous: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    orbit: Orbit,
    interval: TimeInterval,
    dim: usize,
}

fn planar(v: [f64; 2]) -> Point {
    Vector3::new(v[0], v[1], 0.0)
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be finite")))
    }
}

impl Trajectory {
    /// Planar line a(t) = offset + speed·t·(cos α, sin α).
    pub fn line_2d(speed: f64, angle: f64, offset: [f64; 2], interval: TimeInterval) -> Result<Self> {
        check_finite(&[speed, angle, offset[0], offset[1]], "line parameters")?;
        if speed < 0.0 {
            return Err(Error::Domain(format!("line speed must be >= 0, got {speed}")));
        }
        Ok(Self {
            orbit: Orbit::Line {
                speed,
                axis: Vector3::new(angle.cos(), angle.sin(), 0.0),
                offset: planar(offset),
            },
            interval,
            dim: 2,
        })
    }

    /// Spatial line a(t) = offset + speed·t·axis/|axis|.
    pub fn line_3d(speed: f64, axis: [f64; 3], offset: [f64; 3], interval: TimeInterval) -> Result<Self> {
        check_finite(&[speed], "line speed")?;
        check_finite(&axis, "line axis")?;
        check_finite(&offset, "line offset")?;
        if speed < 0.0 {
            return Err(Error::Domain(format!("line speed must be >= 0, got {speed}")));
        }
        let axis = Vector3::from(axis);
        let norm = axis.norm();
        if norm == 0.0 {
            return Err(Error::Domain("line axis must be nonzero".into()));
        }
        Ok(Self {
            orbit: Orbit::Line {
                speed,
                axis: axis / norm,
                offset: Vector3::from(offset),
            },
            interval,
            dim: 3,
        })
    }

    /// Planar arc a(t) = center + radius·(cos t, ±sin t); the minus sign when
    /// `clockwise` is set.
    pub fn arc(center: [f64; 2], radius: f64, clockwise: bool, interval: TimeInterval) -> Result<Self> {
        let rate = if clockwise { -1.0 } else { 1.0 };
        Self::arc_with_phase(center, radius, rate, 0.0, interval)
    }

    pub fn arc_with_phase(
        center: [f64; 2],
        radius: f64,
        rate: f64,
        phase: f64,
        interval: TimeInterval,
    ) -> Result<Self> {
        check_finite(&[center[0], center[1], radius, phase], "arc parameters")?;
        if radius <= 0.0 {
            return Err(Error::Domain(format!("arc radius must be > 0, got {radius}")));
        }
        if rate != 1.0 && rate != -1.0 {
            return Err(Error::Domain(format!("arc rate must be +1 or -1, got {rate}")));
        }
        Ok(Self {
            orbit: Orbit::Arc {
                center: planar(center),
                radius,
                rate,
                phase,
            },
            interval,
            dim: 2,
        })
    }

    /// Piecewise-linear orbit through `knots`; the interval is spanned by the
    /// first and last knot times.
    pub fn piecewise_linear(dim: usize, knots: Vec<Knot>) -> Result<Self> {
        let interval = Self::check_knots(dim, &knots)?;
        Ok(Self {
            orbit: Orbit::PiecewiseLinear { knots },
            interval,
            dim,
        })
    }

    pub fn sampled(dim: usize, knots: Vec<Knot>) -> Result<Self> {
        let interval = Self::check_knots(dim, &knots)?;
        Ok(Self {
            orbit: Orbit::Sampled { knots },
            interval,
            dim,
        })
    }

    /// Tabulates `f` at `count` uniform times and stores it as a sampled orbit.
    pub fn sample_from<F>(dim: usize, interval: TimeInterval, count: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Point,
    {
        if count < 2 {
            return Err(Error::Domain("a sampled orbit needs at least 2 samples".into()));
        }
        let knots = (0..count)
            .map(|i| {
                let time = if i + 1 == count {
                    interval.t_max()
                } else {
                    interval.t_min() + interval.duration() * i as f64 / (count - 1) as f64
                };
                Knot { time, point: f(time) }
            })
            .collect();
        Self::sampled(dim, knots)
    }

    fn check_knots(dim: usize, knots: &[Knot]) -> Result<TimeInterval> {
        if dim != 2 && dim != 3 {
            return Err(Error::Domain(format!("dimension must be 2 or 3, got {dim}")));
        }
        if knots.len() < 2 {
            return Err(Error::Domain("at least two knots are required".into()));
        }
        for k in knots {
            check_finite(&[k.time, k.point.x, k.point.y, k.point.z], "knots")?;
            if dim == 2 && k.point.z != 0.0 {
                return Err(Error::Domain("planar knots must have x3 = 0".into()));
            }
        }
        if knots.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(Error::Domain("knot times must be strictly increasing".into()));
        }
        TimeInterval::new(knots[0].time, knots[knots.len() - 1].time)
    }

    pub fn orbit(&self) -> &Orbit {
        &self.orbit
    }

    pub fn interval(&self) -> &TimeInterval {
        &self.interval
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn knots(&self) -> Option<&[Knot]> {
        match &self.orbit {
            Orbit::PiecewiseLinear { knots } | Orbit::Sampled { knots } => Some(knots),
            _ => None,
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if self.interval.contains(t) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "t = {t} outside [{}, {}]",
                self.interval.t_min, self.interval.t_max
            )))
        }
    }

    /// Index of the linear piece containing `t`, right-continuous at knots.
    fn piece_index(knots: &[Knot], t: f64) -> usize {
        let i = knots.partition_point(|k| k.time <= t);
        i.saturating_sub(1).min(knots.len() - 2)
    }

    /// a(t). Times must lie in the emission interval.
    pub fn position(&self, t: f64) -> Result<Point> {
        self.check_time(t)?;
        Ok(self.position_unchecked(t))
    }

    pub(crate) fn position_unchecked(&self, t: f64) -> Point {
        match &self.orbit {
            Orbit::Line { speed, axis, offset } => offset + axis * (speed * t),
            Orbit::Arc {
                center,
                radius,
                rate,
                phase,
            } => {
                let (s, c) = (rate * t + phase).sin_cos();
                center + Vector3::new(radius * c, radius * s, 0.0)
            }
            Orbit::PiecewiseLinear { knots } | Orbit::Sampled { knots } => {
                let i = Self::piece_index(knots, t);
                let (k0, k1) = (&knots[i], &knots[i + 1]);
                if t == k0.time {
                    return k0.point;
                }
                if t == k1.time {
                    return k1.point;
                }
                let s = (t - k0.time) / (k1.time - k0.time);
                k0.point + (k1.point - k0.point) * s
            }
        }
    }

    /// a′(t). At interior knots the right derivative is returned and
    /// `discontinuous` reports whether it differs from the left one; at
    /// `t_max` the left derivative is used.
    pub fn velocity(&self, t: f64) -> Result<VelocitySample> {
        self.check_time(t)?;
        match self.knots() {
            None => Ok(VelocitySample {
                velocity: self.piece_velocity(0, t),
                discontinuous: false,
            }),
            Some(knots) => {
                let i = Self::piece_index(knots, t);
                let velocity = self.piece_velocity(i, t);
                let discontinuous = i > 0 && knots[i].time == t && self.piece_velocity(i - 1, t) != velocity;
                Ok(VelocitySample {
                    velocity,
                    discontinuous,
                })
            }
        }
    }

    /// Velocity on smooth piece `piece` (see [`Trajectory::pieces`]).
    pub(crate) fn piece_velocity(&self, piece: usize, t: f64) -> Point {
        match &self.orbit {
            Orbit::Line { speed, axis, .. } => axis * *speed,
            Orbit::Arc {
                radius, rate, phase, ..
            } => {
                let (s, c) = (rate * t + phase).sin_cos();
                Vector3::new(-radius * rate * s, radius * rate * c, 0.0)
            }
            Orbit::PiecewiseLinear { knots } | Orbit::Sampled { knots } => {
                let (k0, k1) = (&knots[piece], &knots[piece + 1]);
                (k1.point - k0.point) / (k1.time - k0.time)
            }
        }
    }

    /// Maximal subintervals on which a(t) is smooth.
    pub fn pieces(&self) -> Vec<(f64, f64)> {
        match self.knots() {
            None => vec![(self.interval.t_min, self.interval.t_max)],
            Some(knots) => knots.windows(2).map(|w| (w[0].time, w[1].time)).collect(),
        }
    }

    /// Interior knot times where a′ may jump.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.knots() {
            None => Vec::new(),
            Some(knots) => knots[1..knots.len() - 1].iter().map(|k| k.time).collect(),
        }
    }

    /// Upper bound of |a′| on one smooth piece.
    pub(crate) fn piece_max_speed(&self, piece: usize) -> f64 {
        match &self.orbit {
            Orbit::Line { speed, .. } => *speed,
            Orbit::Arc { radius, .. } => *radius,
            Orbit::PiecewiseLinear { .. } | Orbit::Sampled { .. } => self.piece_velocity(piece, 0.0).norm(),
        }
    }

    /// h(t) = t + x̂·a(t).
    pub fn h_value(&self, dir: &Direction, t: f64) -> Result<f64> {
        Ok(t + dir.dot(&self.position(t)?))
    }

    /// h′(t) = 1 + x̂·a′(t), one-sided at knots as in [`Trajectory::velocity`].
    pub fn h_derivative(&self, dir: &Direction, t: f64) -> Result<f64> {
        Ok(1.0 + dir.dot(&self.velocity(t)?.velocity))
    }

    /// Same orbit traversed backwards: a(t_min + t_max - t).
    pub fn reversed(&self) -> Self {
        let span = self.interval.t_min + self.interval.t_max;
        let orbit = match &self.orbit {
            Orbit::Line { speed, axis, offset } => Orbit::Line {
                speed: *speed,
                axis: -axis,
                offset: offset + axis * (speed * span),
            },
            Orbit::Arc {
                center,
                radius,
                rate,
                phase,
            } => Orbit::Arc {
                center: *center,
                radius: *radius,
                rate: -rate,
                phase: (rate * span + phase).rem_euclid(TAU),
            },
            Orbit::PiecewiseLinear { knots } => Orbit::PiecewiseLinear {
                knots: reverse_knots(knots, span),
            },
            Orbit::Sampled { knots } => Orbit::Sampled {
                knots: reverse_knots(knots, span),
            },
        };
        Self {
            orbit,
            interval: self.interval,
            dim: self.dim,
        }
    }

    /// Orbit shifted rigidly by `shift`.
    pub fn translated(&self, shift: &Point) -> Self {
        let shift_knots = |knots: &[Knot]| {
            knots
                .iter()
                .map(|k| Knot {
                    time: k.time,
                    point: k.point + shift,
                })
                .collect()
        };
        let orbit = match &self.orbit {
            Orbit::Line { speed, axis, offset } => Orbit::Line {
                speed: *speed,
                axis: *axis,
                offset: offset + shift,
            },
            Orbit::Arc {
                center,
                radius,
                rate,
                phase,
            } => Orbit::Arc {
                center: center + shift,
                radius: *radius,
                rate: *rate,
                phase: *phase,
            },
            Orbit::PiecewiseLinear { knots } => Orbit::PiecewiseLinear {
                knots: shift_knots(knots),
            },
            Orbit::Sampled { knots } => Orbit::Sampled {
                knots: shift_knots(knots),
            },
        };
        Self {
            orbit,
            interval: self.interval,
            dim: self.dim,
        }
    }

    /// Range of f(t) = weight·t + x̂·a(t) over the emission interval.
    ///
    /// `weight = 1` gives [ξ_min, ξ_max]; `weight = 0` gives the projection
    /// of the orbit onto x̂.
    pub(crate) fn phase_range(&self, dir: &Direction, weight: f64) -> (f64, f64) {
        let f = |t: f64| weight * t + dir.dot(&self.position_unchecked(t));
        let (t0, t1) = (self.interval.t_min, self.interval.t_max);
        match &self.orbit {
            // linear in t: endpoints
            Orbit::Line { .. } => {
                let (a, b) = (f(t0), f(t1));
                (a.min(b), a.max(b))
            }
            Orbit::Arc {
                radius, rate, phase, ..
            } => {
                let x = dir.vector();
                let rho = x.x.hypot(x.y);
                let mut candidates = vec![t0, t1];
                let amp = radius * rho * rate;
                if amp != 0.0 {
                    let q = weight / amp;
                    if q.abs() <= 1.0 {
                        // f′ = weight - amp·sin(rate·t + phase - β)
                        let beta = x.y.atan2(x.x);
                        let v0 = q.asin();
                        for v in [v0, std::f64::consts::PI - v0] {
                            let lo = (rate * t0).min(rate * t1);
                            let hi = (rate * t0).max(rate * t1);
                            let n_lo = ((lo - beta - v + phase) / TAU).floor() as i64 - 1;
                            let n_hi = ((hi - beta - v + phase) / TAU).ceil() as i64 + 1;
                            for n in n_lo..=n_hi {
                                let t = (beta + v + TAU * n as f64 - phase) / rate;
                                if self.interval.contains(t) {
                                    candidates.push(t);
                                }
                            }
                        }
                    }
                }
                candidates
                    .into_iter()
                    .map(f)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
            }
            Orbit::PiecewiseLinear { .. } | Orbit::Sampled { .. } => {
                self.sampled_phase_range(dir, weight, DENSE_SAMPLES)
            }
        }
    }

    /// Variant-independent range search: dense sampling plus ternary
    /// refinement around the best samples. Knot times join the sample set.
    pub fn sampled_phase_range(&self, dir: &Direction, weight: f64, samples: usize) -> (f64, f64) {
        let f = |t: f64| weight * t + dir.dot(&self.position_unchecked(t));
        let (t0, t1) = (self.interval.t_min, self.interval.t_max);
        let samples = samples.max(2);
        let mut times: Vec<f64> = (0..samples)
            .map(|i| t0 + (t1 - t0) * i as f64 / (samples - 1) as f64)
            .collect();
        times[samples - 1] = t1;
        if let Some(knots) = self.knots() {
            times.extend(knots.iter().map(|k| k.time));
            times.sort_by(f64::total_cmp);
            times.dedup();
        }
        let values: Vec<f64> = times.iter().map(|&t| f(t)).collect();
        let argmin = (0..values.len())
            .min_by(|&a, &b| values[a].total_cmp(&values[b]))
            .expect("nonempty");
        let argmax = (0..values.len())
            .max_by(|&a, &b| values[a].total_cmp(&values[b]))
            .expect("nonempty");
        let bracket = |i: usize| (times[i.saturating_sub(1)], times[(i + 1).min(times.len() - 1)]);
        let (a, b) = bracket(argmin);
        let lo = ternary(a, b, f).min(values[argmin]);
        let (a, b) = bracket(argmax);
        let hi = (-ternary(a, b, |t| -f(t))).max(values[argmax]);
        (lo, hi)
    }
}

fn reverse_knots(knots: &[Knot], span: f64) -> Vec<Knot> {
    knots
        .iter()
        .rev()
        .map(|k| Knot {
            time: span - k.time,
            point: k.point,
        })
        .collect()
}

/// Minimum of a unimodal function on [a, b] by ternary search.
fn ternary<F: Fn(f64) -> f64>(mut a: f64, mut b: f64, f: F) -> f64 {
    for _ in 0..200 {
        if b - a <= 1e-13 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        let m1 = a + (b - a) / 3.0;
        let m2 = b - (b - a) / 3.0;
        if f(m1) <= f(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    f(a).min(f(b)).min(f(0.5 * (a + b)))
}
