//! Observation directions on the unit circle / sphere and sets of polar angles.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::Point;

/// Components smaller than this are rounded to zero so axis-aligned
/// directions (θ = π/2, π, ...) are exact.
const SNAP: f64 = 1e-15;

fn snap(v: f64) -> f64 {
    if v.abs() < SNAP {
        0.0
    } else {
        v
    }
}

/// A unit observation direction x̂ together with the angles it was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    vector: Point,
    dim: usize,
    theta: f64,
    phi: Option<f64>,
}

impl Direction {
    /// Planar direction x̂ = (cos θ, sin θ).
    pub fn from_angle(theta: f64) -> Self {
        Self {
            vector: Vector3::new(snap(theta.cos()), snap(theta.sin()), 0.0),
            dim: 2,
            theta,
            phi: None,
        }
    }

    /// Spatial direction x̂ = (sin θ cos φ, sin θ sin φ, cos θ) with polar angle θ
    /// measured from the x₃ axis.
    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self {
            vector: Vector3::new(snap(st * cp), snap(st * sp), snap(ct)),
            dim: 3,
            theta,
            phi: Some(phi),
        }
    }

    /// `count` equally spaced planar directions θ_j = (j-1)·2π/count.
    pub fn equally_spaced(count: usize) -> Vec<Self> {
        (0..count)
            .map(|j| Self::from_angle(j as f64 * TAU / count as f64))
            .collect()
    }

    pub fn vector(&self) -> &Point {
        &self.vector
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> Option<f64> {
        self.phi
    }

    pub fn dot(&self, y: &Point) -> f64 {
        self.vector.dot(y)
    }
}

/// Reduces an angle to `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// A finite union of closed angle intervals stored in canonical form inside
/// `[0, 2π]`; intervals that wrap past 2π are split in two.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AngleSet {
    intervals: Vec<(f64, f64)>,
}

impl AngleSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Adds the closed interval `[start, start + width]` (width ≤ 2π).
    pub fn push_interval(&mut self, start: f64, width: f64) {
        debug_assert!((0.0..=TAU).contains(&width));
        let lo = wrap_angle(start);
        let hi = lo + width;
        if hi > TAU {
            self.intervals.push((lo, TAU));
            self.intervals.push((0.0, hi - TAU));
        } else {
            self.intervals.push((lo, hi));
        }
        self.intervals
            .sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn contains(&self, theta: f64) -> bool {
        let t = wrap_angle(theta);
        self.intervals
            .iter()
            .any(|&(lo, hi)| lo <= t && t <= hi || (hi >= TAU && t == 0.0))
    }

    /// Circular distance from `theta` to the nearest interval endpoint.
    pub fn distance_to_boundary(&self, theta: f64) -> f64 {
        let t = wrap_angle(theta);
        self.intervals
            .iter()
            .flat_map(|&(lo, hi)| [lo, hi])
            .map(|e| {
                let d = (t - e).abs().rem_euclid(TAU);
                d.min(TAU - d)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Total angular measure.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo).sum()
    }
}

impl std::fmt::Display for AngleSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "{{}}");
        }
        let parts: Vec<String> = self
            .intervals
            .iter()
            .map(|(lo, hi)| format!("[{:.6}π, {:.6}π]", lo / PI, hi / PI))
            .collect();
        write!(f, "{}", parts.join(" ∪ "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn axis_directions_are_exact() {
        let up = Direction::from_angle(PI / 2.0);
        assert_eq!(up.vector(), &Vector3::new(0.0, 1.0, 0.0));
        let left = Direction::from_angle(PI);
        assert_eq!(left.vector(), &Vector3::new(-1.0, 0.0, 0.0));
        let pole = Direction::from_spherical(0.0, 1.3);
        assert_eq!(pole.vector(), &Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn wraparound_interval_is_split() {
        let mut set = AngleSet::empty();
        set.push_interval(-PI / 4.0, PI);
        assert_eq!(set.intervals().len(), 2);
        assert!(set.contains(0.0));
        assert!(set.contains(7.0 * PI / 4.0));
        assert!(set.contains(0.7 * PI));
        assert!(!set.contains(PI));
        assert!((set.measure() - PI).abs() < 1e-15);
    }

    #[test]
    fn boundary_distance_is_circular() {
        let mut set = AngleSet::empty();
        set.push_interval(0.5, 1.0);
        assert!((set.distance_to_boundary(TAU + 0.4) - 0.1).abs() < 1e-12);
        assert!((set.distance_to_boundary(1.2) - 0.3).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn constructors_produce_unit_vectors(theta in -10.0f64..10.0, phi in -10.0f64..10.0) {
            let d2 = Direction::from_angle(theta);
            prop_assert!((d2.vector().norm() - 1.0).abs() <= 1e-12);
            let d3 = Direction::from_spherical(theta, phi);
            prop_assert!((d3.vector().norm() - 1.0).abs() <= 1e-12);
        }
    }
}
