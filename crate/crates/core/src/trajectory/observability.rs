//! Observable directions, strips and Θ-convex domains.
//!
//! A direction x̂ is observable when the range [ξ_min, ξ_max] of
//! h(t) = t + x̂·a(t) is at least as wide as the emission duration T. For
//! observable directions the recoverable set is the strip
//! {y : ξ_min - t_min ≤ x̂·y ≤ ξ_max - t_max}.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::Serialize;

use super::{AngleSet, Direction, Point, TimeInterval, Trajectory};
use crate::error::{Error, Result};

/// Slack on ξ_max - ξ_min - T below which a direction still counts as observable.
pub const CLASSIFICATION_TOLERANCE: f64 = 1e-9;

/// |h′| below this is treated as zero when locating plateaus.
pub const PLATEAU_THRESHOLD: f64 = 1e-10;

const BISECTION_TOLERANCE: f64 = 1e-10;
const MIN_DIVISION_SAMPLES: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Observability {
    Observable,
    NonObservable,
}

impl Observability {
    pub fn is_observable(self) -> bool {
        self == Observability::Observable
    }
}

impl std::fmt::Display for Observability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Observability::Observable => write!(f, "observable"),
            Observability::NonObservable => write!(f, "non-observable"),
        }
    }
}

/// Extremes of h over the emission interval and the resulting verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservabilityReport {
    pub xi_min: f64,
    pub xi_max: f64,
    pub width: f64,
    pub duration: f64,
    pub class: Observability,
}

/// The slab {y : lo ≤ x̂·y ≤ hi}. Non-observable directions carry an empty strip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Strip {
    pub direction: Direction,
    pub lo: f64,
    pub hi: f64,
    pub empty: bool,
}

impl Strip {
    pub fn contains(&self, y: &Point) -> bool {
        if self.empty {
            return false;
        }
        let p = self.direction.dot(y);
        self.lo <= p && p <= self.hi
    }

    pub fn width(&self) -> f64 {
        if self.empty {
            0.0
        } else {
            self.hi - self.lo
        }
    }
}

fn sign(v: f64) -> i8 {
    if v.abs() < PLATEAU_THRESHOLD {
        0
    } else if v > 0.0 {
        1
    } else {
        -1
    }
}

/// Bisects between `a` (where `pred` holds) and `b` (where it does not).
fn bisect<F: Fn(f64) -> bool>(mut a: f64, mut b: f64, pred: F) -> f64 {
    while (b - a).abs() > BISECTION_TOLERANCE {
        let m = 0.5 * (a + b);
        if pred(m) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

impl Trajectory {
    /// ξ_min, ξ_max and the observability class for `dir`.
    pub fn xi_extrema(&self, dir: &Direction) -> ObservabilityReport {
        let (xi_min, xi_max) = self.phase_range(dir, 1.0);
        let width = xi_max - xi_min;
        let duration = self.interval().duration();
        let class = if width >= duration - CLASSIFICATION_TOLERANCE {
            Observability::Observable
        } else {
            Observability::NonObservable
        };
        ObservabilityReport {
            xi_min,
            xi_max,
            width,
            duration,
            class,
        }
    }

    pub fn classify(&self, dir: &Direction) -> Observability {
        self.xi_extrema(dir).class
    }

    /// Interior times where h′ changes sign or enters/leaves a zero plateau.
    ///
    /// h′ is sampled at roughly `density` points over the interval. Isolated
    /// tangential zeros (no sign change on either side) are not reported. Knot
    /// times are reported when the one-sided signs of h′ differ.
    pub fn division_points(&self, dir: &Direction, density: usize) -> Vec<f64> {
        let density = density.max(MIN_DIVISION_SAMPLES);
        let total = self.interval().duration();
        let mut points = Vec::new();
        let mut previous_sign: Option<i8> = None;

        for (piece, (a, b)) in self.pieces().into_iter().enumerate() {
            let hp = |t: f64| 1.0 + dir.dot(&self.piece_velocity(piece, t));
            let n = ((density as f64 * (b - a) / total).ceil() as usize).max(2) + 1;
            let times: Vec<f64> = (0..n)
                .map(|i| {
                    if i + 1 == n {
                        b
                    } else {
                        a + (b - a) * i as f64 / (n - 1) as f64
                    }
                })
                .collect();
            let signs: Vec<i8> = times.iter().map(|&t| sign(hp(t))).collect();

            if let Some(prev) = previous_sign {
                if prev != signs[0] {
                    points.push(a);
                }
            }
            previous_sign = signs.last().copied();

            // runs of equal sign: (sign, first index, last index)
            let mut runs: Vec<(i8, usize, usize)> = Vec::new();
            for (i, &s) in signs.iter().enumerate() {
                match runs.last_mut() {
                    Some(run) if run.0 == s => run.2 = i,
                    _ => runs.push((s, i, i)),
                }
            }
            // drop isolated zero samples between nonzero runs; a sign change
            // across them is located by bisection below
            let mut merged: Vec<(i8, usize, usize)> = Vec::new();
            for (k, run) in runs.iter().enumerate() {
                let isolated_zero = run.0 == 0 && run.1 == run.2 && k > 0 && k + 1 < runs.len();
                if isolated_zero {
                    let (before, after) = (runs[k - 1].0, runs[k + 1].0);
                    if before != after {
                        points.push(times[run.1]);
                    }
                    continue;
                }
                match merged.last_mut() {
                    Some(last) if last.0 == run.0 => last.2 = run.2,
                    _ => merged.push(*run),
                }
            }

            for pair in merged.windows(2) {
                let (left, right) = (pair[0], pair[1]);
                let (ta, tb) = (times[left.2], times[right.1]);
                if right.1 != left.2 + 1 {
                    // an isolated zero sat between these runs; already handled
                    continue;
                }
                let t = match (left.0, right.0) {
                    (0, _) => bisect(ta, tb, |t| hp(t).abs() < PLATEAU_THRESHOLD),
                    (_, 0) => bisect(tb, ta, |t| hp(t).abs() < PLATEAU_THRESHOLD),
                    (s, _) => bisect(ta, tb, |t| sign(hp(t)) == s),
                };
                points.push(t);
            }
        }
        points.sort_by(f64::total_cmp);
        points
    }

    /// Analytic strip for `dir`; empty for non-observable directions.
    pub fn strip(&self, dir: &Direction) -> Strip {
        let report = self.xi_extrema(dir);
        let iv = self.interval();
        let mut lo = report.xi_min - iv.t_min();
        let mut hi = report.xi_max - iv.t_max();
        let observable = report.class.is_observable();
        if observable && hi < lo {
            // boundary case within the classification tolerance
            let mid = 0.5 * (lo + hi);
            lo = mid;
            hi = mid;
        }
        Strip {
            direction: *dir,
            lo,
            hi,
            empty: !observable,
        }
    }

    /// [inf x̂·Γ, sup x̂·Γ], the thinnest slab orthogonal to `dir` holding the orbit.
    pub fn projection_hull(&self, dir: &Direction) -> (f64, f64) {
        self.phase_range(dir, 0.0)
    }
}

/// Observable polar angles of the line a(t) = c·t·(cos α, sin α).
pub fn observable_set_line(speed: f64, alpha: f64) -> Result<AngleSet> {
    if speed.is_nan() || speed <= 0.0 {
        return Err(Error::Domain(format!("line speed must be > 0, got {speed}")));
    }
    let mut set = AngleSet::empty();
    set.push_interval(alpha - FRAC_PI_2, PI);
    if speed > 2.0 {
        let edge = (-2.0 / speed).acos();
        set.push_interval(alpha + edge, TAU - 2.0 * edge);
    }
    Ok(set)
}

/// Observable polar angles of a counter-clockwise unit arc traversed over `interval`.
pub fn observable_set_arc(interval: &TimeInterval) -> Result<AngleSet> {
    if interval.duration() >= TAU {
        return Err(Error::Unsupported(format!(
            "closed-form arc observability needs T < 2π, got T = {}",
            interval.duration()
        )));
    }
    let mut set = AngleSet::empty();
    set.push_interval(0.5 * (interval.t_min() + interval.t_max()), PI);
    Ok(set)
}

/// Intersection of the strips of the observable directions in a set.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaDomain {
    strips: Vec<Strip>,
}

impl ThetaDomain {
    pub fn new(traj: &Trajectory, dirs: &[Direction]) -> Result<Self> {
        if dirs.is_empty() {
            return Err(Error::Domain("at least one direction is required".into()));
        }
        let strips = dirs.iter().map(|d| traj.strip(d)).filter(|s| !s.empty).collect();
        Ok(Self { strips })
    }

    pub fn strips(&self) -> &[Strip] {
        &self.strips
    }

    /// True when no direction was observable.
    pub fn is_empty(&self) -> bool {
        self.strips.is_empty()
    }

    pub fn contains(&self, y: &Point) -> bool {
        !self.is_empty() && self.strips.iter().all(|s| s.contains(y))
    }
}
