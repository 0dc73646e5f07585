//! Pipeline helpers shared by the integration tests.
#![allow(dead_code)]

use msimg::forward::{add_noise_indexed, sample_band, FrequencyBand, NoiseSpec};
use msimg::imaging::{evaluate_field, FieldMeta, ScalarField, SearchGrid};
use msimg::indicator::{reciprocal, DirectionProbe};
use msimg::spectral::{build_operator, f_sharp_spectrum, SpectrumMode};
use msimg::trajectory::{Direction, TimeInterval, Trajectory};
use std::f64::consts::{FRAC_PI_2, PI};

pub fn default_band() -> FrequencyBand {
    FrequencyBand::new(3.0 * PI, 18).unwrap()
}

/// a(t) = (0, t) on [1, 3].
pub fn line_case1() -> Trajectory {
    Trajectory::line_2d(1.0, FRAC_PI_2, [0.0, 0.0], TimeInterval::new(1.0, 3.0).unwrap()).unwrap()
}

/// a(t) = 4t(cos π/4, sin π/4) on [1, 2].
pub fn line_case2() -> Trajectory {
    Trajectory::line_2d(4.0, PI / 4.0, [0.0, 0.0], TimeInterval::new(1.0, 2.0).unwrap()).unwrap()
}

pub fn grid(bounds: [(f64, f64); 2], res: usize) -> SearchGrid {
    SearchGrid::new(&bounds, &[res, res]).unwrap()
}

pub fn probe(traj: &Trajectory, dir: Direction, mode: SpectrumMode, noise: Option<(NoiseSpec, u64)>) -> DirectionProbe {
    let band = default_band();
    let mut samples = sample_band(traj, &dir, &band).unwrap();
    if let Some((spec, index)) = noise {
        samples = add_noise_indexed(&samples, &spec, index);
    }
    let spectrum = f_sharp_spectrum(&build_operator(&samples), mode).unwrap();
    DirectionProbe::new(spectrum, dir, *traj.interval(), &band)
}

/// Picard sums of one direction over a grid.
pub fn sum_field(probe: &DirectionProbe, grid: &SearchGrid) -> ScalarField {
    evaluate_field(
        |y| probe.sum(y),
        grid,
        FieldMeta::with_directions("sum", &[*probe.direction()]),
    )
}

pub fn reciprocal_field(sums: &[&ScalarField]) -> ScalarField {
    let mut out = sums[0].clone();
    for (i, v) in out.values.iter_mut().enumerate() {
        *v = reciprocal(sums.iter().map(|s| s.values[i]).sum());
    }
    out
}

pub fn indicator_field(traj: &Trajectory, dir: Direction, grid: &SearchGrid, mode: SpectrumMode) -> ScalarField {
    let p = probe(traj, dir, mode, None);
    reciprocal_field(&[&sum_field(&p, grid)])
}
