//! Multi-frequency far-field data of a moving point source.
//!
//! The far-field pattern in direction x̂ at wavenumber k is
//!
//! ```text
//! w(x̂, k) = ∫_{t_min}^{t_max} exp(-i k (x̂·a(t) + t)) dt
//! ```
//!
//! (no 1/√(2π) prefactor). Negative wavenumbers follow from
//! w(x̂, -k) = conj(w(x̂, k)).

use std::f64::consts::TAU;
use std::io::{BufRead, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::trajectory::{Direction, Point, TimeInterval, Trajectory};

/// Absolute tolerance of the adaptive quadrature.
pub const QUADRATURE_TOLERANCE: f64 = 1e-10;
/// Minimum number of quadrature nodes per oscillation of the integrand.
pub const NODES_PER_OSCILLATION: f64 = 20.0;

const RULE_ORDER: usize = 16;
const MAX_PANELS: usize = 1 << 16;

/// Frequency band (0, k_max) split into `count` cells of width `step`.
///
/// Samples sit at the midpoints k_n = (n - 1/2)·step; the test vectors use
/// the nodes τ_n = n·step, n = 1..count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyBand {
    k_max: f64,
    count: usize,
}

impl FrequencyBand {
    pub fn new(k_max: f64, count: usize) -> Result<Self> {
        if !(k_max.is_finite() && k_max > 0.0) {
            return Err(Error::Domain(format!("k_max must be positive, got {k_max}")));
        }
        if count == 0 {
            return Err(Error::Domain("the band needs at least one frequency".into()));
        }
        Ok(Self { k_max, count })
    }

    pub fn k_max(&self) -> f64 {
        self.k_max
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Δk = k_max / N.
    pub fn step(&self) -> f64 {
        self.k_max / self.count as f64
    }

    /// k_n for n = 1..=N.
    pub fn midpoint(&self, n: usize) -> f64 {
        (n as f64 - 0.5) * self.step()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (1..=self.count).map(|n| self.midpoint(n)).collect()
    }

    /// τ_n for n = 1..=N.
    pub fn nodes(&self) -> Vec<f64> {
        let step = self.step();
        (1..=self.count).map(|n| n as f64 * step).collect()
    }
}

/// Far-field values at the band midpoints for one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldSamples {
    pub direction: Direction,
    pub band: FrequencyBand,
    pub values: Vec<Complex64>,
}

impl FarFieldSamples {
    /// Samples multiplied by a real factor.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            direction: self.direction,
            band: self.band,
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }
}

/// Multiplicative noise level δ and generator seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub delta: f64,
    pub seed: u64,
}

/// Far-field pattern w(x̂, k) by adaptive composite Gauss–Legendre quadrature.
///
/// Each smooth piece of the orbit gets enough panels for at least
/// [`NODES_PER_OSCILLATION`] nodes per period of the integrand; the panel
/// count is then doubled until two successive sums agree to
/// [`QUADRATURE_TOLERANCE`].
pub fn far_field_value(traj: &Trajectory, dir: &Direction, k: f64) -> Result<Complex64> {
    if !k.is_finite() {
        return Err(Error::Domain(format!("wavenumber must be finite, got {k}")));
    }
    let rule = GaussLegendre::new(RULE_ORDER);
    let mut total = Complex64::new(0.0, 0.0);
    for (piece, (a, b)) in traj.pieces().into_iter().enumerate() {
        let integrand = |t: f64| {
            let phase = k * (t + dir.dot(&traj.position_unchecked(t)));
            Complex64::new(phase.cos(), -phase.sin())
        };
        let rate = k.abs() * (1.0 + traj.piece_max_speed(piece));
        let oscillations = rate * (b - a) / TAU;
        let mut panels = ((oscillations * NODES_PER_OSCILLATION) / RULE_ORDER as f64)
            .ceil()
            .max(1.0) as usize;
        if panels >= MAX_PANELS {
            return Err(Error::Quadrature {
                wavenumber: k,
                residual: f64::NAN,
                panels,
            });
        }
        let mut coarse: Complex64 = rule.integrate(a, b, panels, integrand);
        loop {
            let fine: Complex64 = rule.integrate(a, b, 2 * panels, integrand);
            let residual = (fine - coarse).norm();
            panels *= 2;
            if residual <= QUADRATURE_TOLERANCE {
                total += fine;
                break;
            }
            if panels >= MAX_PANELS {
                return Err(Error::Quadrature {
                    wavenumber: k,
                    residual,
                    panels,
                });
            }
            coarse = fine;
        }
    }
    Ok(total)
}

/// Exact far field of the line a(t) = offset + speed·t·axis (unit `axis`).
///
/// With β = 1 + speed·x̂·axis and κ = kβ:
/// w = exp(-ik x̂·offset) · (i/κ)(exp(-iκ t_max) - exp(-iκ t_min)),
/// and T·exp(-ik x̂·offset) in the limit κ → 0.
pub fn far_field_line_closed_form(
    speed: f64,
    axis: &Point,
    offset: &Point,
    dir: &Direction,
    interval: &TimeInterval,
    k: f64,
) -> Complex64 {
    let beta = 1.0 + speed * dir.dot(axis);
    let kappa = k * beta;
    let shift = Complex64::from_polar(1.0, -k * dir.dot(offset));
    shift * segment_integral(kappa, interval.t_min(), interval.t_max())
}

/// ∫_{t0}^{t1} exp(-iκt) dt without cancellation for small κ.
pub(crate) fn segment_integral(kappa: f64, t0: f64, t1: f64) -> Complex64 {
    let len = t1 - t0;
    let x = kappa * len;
    let i = Complex64::i();
    // (exp(-ix) - 1)/(-ix) · len, then shifted to t0
    let ratio = if x.abs() < 1e-4 {
        // series 1 - ix/2 - x²/6 + ix³/24
        Complex64::new(1.0 - x * x / 6.0, -x / 2.0 + x * x * x / 24.0)
    } else {
        (Complex64::from_polar(1.0, -x) - 1.0) / (-i * x)
    };
    Complex64::from_polar(1.0, -kappa * t0) * ratio * len
}

/// w(x̂, k_n) at every midpoint of the band. Frequencies are evaluated in parallel.
pub fn sample_band(traj: &Trajectory, dir: &Direction, band: &FrequencyBand) -> Result<FarFieldSamples> {
    let values = band
        .midpoints()
        .par_iter()
        .map(|&k| far_field_value(traj, dir, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(FarFieldSamples {
        direction: *dir,
        band: *band,
        values,
    })
}

/// Pollutes each sample as Re w·(1 + δγ₁) + i·Im w·(1 + δγ₂).
///
/// γ₁, γ₂ are standard normal draws clamped to [-1, 1]. Equivalent to
/// [`add_noise_indexed`] with direction index 0.
pub fn add_noise(samples: &FarFieldSamples, noise: &NoiseSpec) -> FarFieldSamples {
    add_noise_indexed(samples, noise, 0)
}

/// Like [`add_noise`], with the generator for sample n of direction
/// `direction_index` keyed on (seed, direction_index, n) so directions can be
/// polluted independently and in any order.
pub fn add_noise_indexed(samples: &FarFieldSamples, noise: &NoiseSpec, direction_index: u64) -> FarFieldSamples {
    if noise.delta == 0.0 {
        return samples.clone();
    }
    let values = samples
        .values
        .iter()
        .enumerate()
        .map(|(n, w)| {
            let mut rng = sample_rng(noise.seed, direction_index, n as u64);
            let g1 = clamped_normal(&mut rng);
            let g2 = clamped_normal(&mut rng);
            Complex64::new(w.re * (1.0 + noise.delta * g1), w.im * (1.0 + noise.delta * g2))
        })
        .collect();
    FarFieldSamples {
        direction: samples.direction,
        band: samples.band,
        values,
    }
}

fn sample_rng(seed: u64, direction_index: u64, sample_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(direction_index);
    // 16 words per block, rejection sampling rarely needs more than a few words per draw
    rng.set_word_pos(sample_index as u128 * 1024);
    rng
}

fn clamped_normal(rng: &mut ChaCha8Rng) -> f64 {
    let g: f64 = StandardNormal.sample(rng);
    g.clamp(-1.0, 1.0)
}

/// Writes samples as CSV with header `k,re,im`, one row per midpoint.
pub fn write_csv<W: Write>(samples: &FarFieldSamples, mut out: W) -> std::io::Result<()> {
    writeln!(out, "k,re,im")?;
    for (k, w) in samples.band.midpoints().iter().zip(&samples.values) {
        writeln!(out, "{k:.16e},{:.16e},{:.16e}", w.re, w.im)?;
    }
    Ok(())
}

pub fn write_csv_file(samples: &FarFieldSamples, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(format!("cannot create {}", path.display()), e))?;
    let mut buf = std::io::BufWriter::new(file);
    write_csv(samples, &mut buf)
        .and_then(|_| buf.flush())
        .map_err(|e| Error::io(format!("cannot write {}", path.display()), e))
}

/// Reads a `k,re,im` table and checks its wavenumbers against `band`.
pub fn read_csv<R: BufRead>(input: R, dir: &Direction, band: &FrequencyBand) -> Result<FarFieldSamples> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::io("reading far-field header", e))?
        .unwrap_or_default();
    if header.trim() != "k,re,im" {
        return Err(Error::Validation(format!(
            "far-field header must be `k,re,im`, found `{}`",
            header.trim()
        )));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io("reading far-field rows", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Validation(format!("line {}: {e}", lineno + 2)))?;
        if fields.len() != 3 {
            return Err(Error::Validation(format!(
                "line {}: expected 3 fields, found {}",
                lineno + 2,
                fields.len()
            )));
        }
        rows.push((fields[0], Complex64::new(fields[1], fields[2])));
    }
    if rows.len() != band.count() {
        return Err(Error::Validation(format!(
            "band mismatch: expected {} samples, found {}",
            band.count(),
            rows.len()
        )));
    }
    for (n, (k, _)) in rows.iter().enumerate() {
        let expected = band.midpoint(n + 1);
        if (k - expected).abs() > 1e-9 * expected.abs().max(1.0) {
            return Err(Error::Validation(format!(
                "band mismatch at row {}: k = {k}, expected {expected}",
                n + 1
            )));
        }
    }
    Ok(FarFieldSamples {
        direction: *dir,
        band: *band,
        values: rows.into_iter().map(|(_, w)| w).collect(),
    })
}
