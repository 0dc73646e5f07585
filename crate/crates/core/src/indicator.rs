//! Test vectors, Picard sums and the single/multi-direction indicators.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::FrequencyBand;
use crate::spectral::Spectrum;
use crate::trajectory::{Direction, Point, TimeInterval};

/// Default Picard-sum threshold above which a direction is treated as
/// numerically non-observable.
pub const DEFAULT_THRESHOLD: f64 = 3.5e3;

/// Discretized test function φ_y for one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct TestVector {
    pub entries: Vec<Complex64>,
    pub direction: Direction,
    pub y: Point,
    pub interval: TimeInterval,
}

/// φ_n = (i/(T τ_n))(e^{-iτ_n t_max} - e^{-iτ_n t_min})·e^{-iτ_n x̂·y} at τ_n = n·Δk.
pub fn test_vector(dir: &Direction, y: &Point, interval: &TimeInterval, band: &FrequencyBand) -> TestVector {
    TestVector {
        entries: test_entries(dir.dot(y), interval, &band.nodes()),
        direction: *dir,
        y: *y,
        interval: *interval,
    }
}

/// Test-vector entries for a probe whose projection x̂·y equals `projection`.
pub fn test_entries(projection: f64, interval: &TimeInterval, nodes: &[f64]) -> Vec<Complex64> {
    let t = interval.duration();
    nodes
        .iter()
        .map(|&tau| {
            let shift = Complex64::cis(-tau * projection);
            if tau == 0.0 {
                return shift;
            }
            let window = Complex64::cis(-tau * interval.t_max()) - Complex64::cis(-tau * interval.t_min());
            Complex64::new(0.0, 1.0 / (t * tau)) * window * shift
        })
        .collect()
}

/// ⟨u, v⟩ = Σ u_m conj(v_m).
fn inner(u: &[Complex64], v: impl Iterator<Item = Complex64>) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardResult {
    pub sum: f64,
    pub terms: Vec<f64>,
}

/// Σ |⟨φ, ψ_n⟩|² / λ_n with floored eigenvalues.
pub fn picard_sum(spectrum: &Spectrum, phi: &[Complex64]) -> PicardResult {
    picard_with(&spectrum.floored_eigenvalues(), spectrum, phi)
}

fn picard_with(lambdas: &[f64], spectrum: &Spectrum, phi: &[Complex64]) -> PicardResult {
    assert_eq!(
        phi.len(),
        spectrum.eigenvectors.nrows(),
        "test vector and spectrum sizes differ"
    );
    let terms: Vec<f64> = lambdas
        .iter()
        .enumerate()
        .map(|(n, &lambda)| {
            if lambda <= 0.0 {
                return 0.0;
            }
            let c = inner(phi, spectrum.eigenvectors.column(n).iter().copied());
            c.norm_sqr() / lambda
        })
        .collect();
    PicardResult {
        sum: terms.iter().sum(),
        terms,
    }
}

/// Reciprocal of a Picard sum; +∞ only for a zero sum.
pub fn reciprocal(sum: f64) -> f64 {
    if sum == 0.0 {
        f64::INFINITY
    } else {
        1.0 / sum
    }
}

/// W(y) = 1 / Σ_n |⟨φ_y, ψ_n⟩|²/λ_n for one direction.
pub fn indicator_single(
    spectrum: &Spectrum,
    dir: &Direction,
    y: &Point,
    interval: &TimeInterval,
    band: &FrequencyBand,
) -> f64 {
    reciprocal(picard_sum(spectrum, &test_vector(dir, y, interval, band).entries).sum)
}

/// A direction's spectrum prepared for repeated Picard sums on a grid.
#[derive(Debug, Clone)]
pub struct DirectionProbe {
    direction: Direction,
    interval: TimeInterval,
    nodes: Vec<f64>,
    spectrum: Spectrum,
    lambdas: Vec<f64>,
}

impl DirectionProbe {
    pub fn new(spectrum: Spectrum, direction: Direction, interval: TimeInterval, band: &FrequencyBand) -> Self {
        let lambdas = spectrum.floored_eigenvalues();
        Self {
            direction,
            interval,
            nodes: band.nodes(),
            spectrum,
            lambdas,
        }
    }

    /// Drops terms whose eigenvalue is below `relative·λ_max`.
    pub fn with_cutoff(mut self, relative: f64) -> Self {
        let lambda_max = self.lambdas.iter().copied().fold(0.0, f64::max);
        for l in &mut self.lambdas {
            if *l < relative * lambda_max {
                *l = 0.0;
            }
        }
        self
    }

    pub fn direction(&self) -> &Direction {
        &self.direction
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn picard(&self, y: &Point) -> PicardResult {
        let phi = test_entries(self.direction.dot(y), &self.interval, &self.nodes);
        picard_with(&self.lambdas, &self.spectrum, &phi)
    }

    pub fn sum(&self, y: &Point) -> f64 {
        self.picard(y).sum
    }

    pub fn indicator(&self, y: &Point) -> f64 {
        reciprocal(self.sum(y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterStatus {
    Ok,
    AllDropped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterOutcome {
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    /// Minimum Picard sum over the grid per direction.
    pub minima: Vec<f64>,
    pub threshold: f64,
    pub status: FilterStatus,
}

/// Keeps direction j unless its Picard sum exceeds `threshold` everywhere on
/// the grid.
pub fn direction_filter(sums: &[Vec<f64>], threshold: f64) -> FilterOutcome {
    let minima: Vec<f64> = sums
        .iter()
        .map(|s| s.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    let (kept, dropped): (Vec<usize>, Vec<usize>) = (0..sums.len()).partition(|&j| minima[j] <= threshold);
    for &j in &dropped {
        log::info!(
            "direction {j} dropped: min Picard sum {:.3e} > {threshold:.3e}",
            minima[j]
        );
    }
    let status = if kept.is_empty() {
        log::warn!("every direction exceeded the Picard threshold");
        FilterStatus::AllDropped
    } else {
        FilterStatus::Ok
    };
    FilterOutcome {
        kept,
        dropped,
        minima,
        threshold,
        status,
    }
}

/// W(y) = 1 / Σ_{j ∈ kept} sum_j(y).
pub fn combine_sums(per_direction: &[f64], kept: &[usize]) -> Result<f64> {
    if kept.is_empty() {
        return Err(Error::Domain("no directions kept by the filter".into()));
    }
    Ok(reciprocal(kept.iter().map(|&j| per_direction[j]).sum()))
}

/// Multi-direction indicator at `y`.
///
/// The filter runs on the Picard sums at `y` alone; grid-wide filtering goes
/// through [`direction_filter`] and [`indicator_multi_kept`].
pub fn indicator_multi(
    spectra: &[Spectrum],
    dirs: &[Direction],
    y: &Point,
    interval: &TimeInterval,
    band: &FrequencyBand,
    threshold: f64,
) -> Result<f64> {
    if spectra.len() != dirs.len() {
        return Err(Error::Validation(format!(
            "{} spectra for {} directions",
            spectra.len(),
            dirs.len()
        )));
    }
    let sums: Vec<f64> = spectra
        .iter()
        .zip(dirs)
        .map(|(s, d)| picard_sum(s, &test_vector(d, y, interval, band).entries).sum)
        .collect();
    let outcome = direction_filter(&sums.iter().map(|&s| vec![s]).collect::<Vec<_>>(), threshold);
    combine_sums(&sums, &outcome.kept)
}

/// Multi-direction indicator using a precomputed set of kept directions.
pub fn indicator_multi_kept(probes: &[DirectionProbe], kept: &[usize], y: &Point) -> Result<f64> {
    if kept.is_empty() {
        return Err(Error::Domain("no directions kept by the filter".into()));
    }
    Ok(reciprocal(kept.iter().map(|&j| probes[j].sum(y)).sum()))
}
