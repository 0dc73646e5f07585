//! Discrete far-field operator and the eigensystem of its positive part.
//!
//! The operator for one direction is the N×N Toeplitz matrix
//! F[n][m] = w(x̂, (n - m + 1/2)·Δk)·Δk, where samples at negative
//! wavenumbers come from conjugation. Two eigensystems are offered:
//!
//! * [`SpectrumMode::Rigorous`] assembles F# = |Re F| + |Im F| with
//!   Re F = (F + F*)/2 and Im F = (F - F*)/(2i) and diagonalizes the
//!   Hermitian result.
//! * [`SpectrumMode::PaperShortcut`] diagonalizes F itself and takes
//!   λ_n = |Re λ̃_n| + |Im λ̃_n| with F's eigenvectors. This agrees with the
//!   rigorous path only when F is normal.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{FarFieldSamples, FrequencyBand};
use crate::trajectory::Direction;

pub type CMatrix = DMatrix<Complex64>;

/// Eigenvalues below this fraction of the largest are raised to it before
/// they appear in a denominator.
pub const EIGENVALUE_FLOOR: f64 = 1e-14;

/// Tolerance on ‖H - H*‖ accepted by [`hermitian_abs`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMode {
    #[default]
    Rigorous,
    #[serde(rename = "paper")]
    PaperShortcut,
}

impl SpectrumMode {
    pub fn name(self) -> &'static str {
        match self {
            SpectrumMode::Rigorous => "rigorous",
            SpectrumMode::PaperShortcut => "paper",
        }
    }
}

impl std::str::FromStr for SpectrumMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rigorous" => Ok(SpectrumMode::Rigorous),
            "paper" => Ok(SpectrumMode::PaperShortcut),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (expected `rigorous` or `paper`)"
            ))),
        }
    }
}

/// Toeplitz discretization of the far-field operator for one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldOperator {
    pub matrix: CMatrix,
    pub band: FrequencyBand,
    pub direction: Direction,
}

/// Eigenvalues in descending order with matching unit eigenvectors (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
    pub mode: SpectrumMode,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Eigenvalues with everything below `EIGENVALUE_FLOOR·λ_max` raised to
    /// that level. A zero spectrum stays zero.
    pub fn floored_eigenvalues(&self) -> Vec<f64> {
        let lambda_max = self.eigenvalues.iter().copied().fold(0.0, f64::max);
        let floor = EIGENVALUE_FLOOR * lambda_max;
        self.eigenvalues.iter().map(|&l| l.max(floor)).collect()
    }

    /// Writes `n,lambda` rows (1-based n).
    pub fn write_eigenvalues<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,lambda")?;
        for (n, l) in self.eigenvalues.iter().enumerate() {
            writeln!(out, "{},{l:.16e}", n + 1)?;
        }
        Ok(())
    }

    /// Writes `n,m,re,im` rows: component m of eigenvector n (both 1-based).
    pub fn write_eigenvectors<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n,m,re,im")?;
        for n in 0..self.eigenvectors.ncols() {
            for m in 0..self.eigenvectors.nrows() {
                let v = self.eigenvectors[(m, n)];
                writeln!(out, "{},{},{:.16e},{:.16e}", n + 1, m + 1, v.re, v.im)?;
            }
        }
        Ok(())
    }

    /// Writes `<stem>_eigenvalues.csv` and `<stem>_eigenvectors.csv` into `dir`.
    pub fn dump(&self, dir: &Path, stem: &str) -> Result<()> {
        let write = |name: String, f: &dyn Fn(&mut Vec<u8>) -> std::io::Result<()>| -> Result<()> {
            let path = dir.join(name);
            let mut buf = Vec::new();
            f(&mut buf).map_err(|e| Error::io("formatting spectrum", e))?;
            std::fs::write(&path, buf).map_err(|e| Error::io(format!("cannot write {}", path.display()), e))
        };
        write(format!("{stem}_eigenvalues.csv"), &|b| self.write_eigenvalues(b))?;
        write(format!("{stem}_eigenvectors.csv"), &|b| self.write_eigenvectors(b))
    }
}

/// Assembles the Toeplitz operator from far-field samples at the band midpoints.
pub fn build_operator(samples: &FarFieldSamples) -> FarFieldOperator {
    let n = samples.values.len();
    let dk = samples.band.step();
    let w = &samples.values;
    let matrix = CMatrix::from_fn(n, n, |row, col| {
        if row >= col {
            w[row - col] * dk
        } else {
            w[col - row - 1].conj() * dk
        }
    });
    FarFieldOperator {
        matrix,
        band: samples.band,
        direction: samples.direction,
    }
}

/// (Re F, Im F) with Re F = (F + F*)/2 and Im F = (F - F*)/(2i).
pub fn hermitian_parts(f: &CMatrix) -> (CMatrix, CMatrix) {
    let adj = f.adjoint();
    let re = (f + &adj) * Complex64::new(0.5, 0.0);
    // 1/(2i) = -i/2
    let im = (f - &adj) * Complex64::new(0.0, -0.5);
    (re, im)
}

fn hermitian_defect(h: &CMatrix) -> f64 {
    (h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// |H| = Q|Λ|Q* for Hermitian H.
pub fn hermitian_abs(h: &CMatrix) -> Result<CMatrix> {
    if !h.is_square() {
        return Err(Error::Domain("matrix must be square".into()));
    }
    let scale = h.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if hermitian_defect(h) > HERMITIAN_TOLERANCE * scale {
        return Err(Error::Domain("matrix is not Hermitian".into()));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Diagonalization {
            mode: "hermitian",
            reason: "non-finite matrix entries".into(),
        });
    }
    let eig = h.clone().symmetric_eigen();
    let q = &eig.eigenvectors;
    let abs_lambda = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|l| Complex64::new(l.abs(), 0.0)),
    );
    let scaled = CMatrix::from_fn(q.nrows(), q.ncols(), |r, c| q[(r, c)] * abs_lambda[c]);
    let mut out = scaled * q.adjoint();
    symmetrize(&mut out);
    Ok(out)
}

/// Replaces `m` by (m + m*)/2 to remove rounding asymmetry.
fn symmetrize(m: &mut CMatrix) {
    let n = m.nrows();
    for r in 0..n {
        m[(r, r)].im = 0.0;
        for c in (r + 1)..n {
            let avg = (m[(r, c)] + m[(c, r)].conj()) * 0.5;
            m[(r, c)] = avg;
            m[(c, r)] = avg.conj();
        }
    }
}

/// F# = |Re F| + |Im F|.
pub fn f_sharp(f: &CMatrix) -> Result<CMatrix> {
    let (re, im) = hermitian_parts(f);
    Ok(hermitian_abs(&re)? + hermitian_abs(&im)?)
}

/// Eigensystem of F# for `op` in the requested mode, sorted descending.
pub fn f_sharp_spectrum(op: &FarFieldOperator, mode: SpectrumMode) -> Result<Spectrum> {
    f_sharp_spectrum_of(&op.matrix, mode)
}

pub fn f_sharp_spectrum_of(f: &CMatrix, mode: SpectrumMode) -> Result<Spectrum> {
    let (values, vectors) = match mode {
        SpectrumMode::Rigorous => {
            let sharp = f_sharp(f)?;
            let eig = sharp.symmetric_eigen();
            (eig.eigenvalues.iter().copied().collect::<Vec<_>>(), eig.eigenvectors)
        }
        SpectrumMode::PaperShortcut => {
            let (lambdas, vectors) = general_eigen(f)?;
            let values = lambdas.iter().map(|l| l.re.abs() + l.im.abs()).collect();
            (values, vectors)
        }
    };
    Ok(sorted_spectrum(values, vectors, mode))
}

/// Orders eigenpairs by descending eigenvalue and fixes the phase of each
/// eigenvector so its first non-negligible component is real and positive.
fn sorted_spectrum(values: Vec<f64>, vectors: CMatrix, mode: SpectrumMode) -> Spectrum {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let n = vectors.nrows();
    let mut eigenvectors = CMatrix::zeros(n, order.len());
    for (dst, &src) in order.iter().enumerate() {
        let mut col = vectors.column(src).into_owned();
        let norm = col.norm();
        if norm > 0.0 {
            col /= Complex64::new(norm, 0.0);
        }
        let biggest = col.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if let Some(lead) = col.iter().find(|z| z.norm() > 1e-8 * biggest) {
            let phase = lead.conj() / lead.norm();
            col *= phase;
        }
        eigenvectors.set_column(dst, &col);
    }
    Spectrum {
        eigenvalues: order.iter().map(|&i| values[i]).collect(),
        eigenvectors,
        mode,
    }
}

/// Eigenvalues and unit eigenvectors of a general complex matrix via the
/// complex Schur form F = Q T Q* and back substitution in T.
pub fn general_eigen(f: &CMatrix) -> Result<(Vec<Complex64>, CMatrix)> {
    let n = f.nrows();
    let fail = |reason: String| Error::Diagonalization {
        mode: SpectrumMode::PaperShortcut.name(),
        reason,
    };
    if f.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(fail("non-finite matrix entries".into()));
    }
    let schur = Schur::try_new(f.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| fail("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let lambdas: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let tiny = 1e3 * f64::EPSILON * scale.max(f64::MIN_POSITIVE);

    let mut vectors = CMatrix::zeros(n, n);
    for k in 0..n {
        let lambda = lambdas[k];
        let mut x = DVector::<Complex64>::zeros(n);
        x[k] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut rhs = Complex64::new(0.0, 0.0);
            for l in (j + 1)..=k {
                rhs -= t[(j, l)] * x[l];
            }
            let pivot = t[(j, j)] - lambda;
            if pivot.norm() <= tiny {
                if rhs.norm() <= 1e3 * tiny {
                    x[j] = Complex64::new(0.0, 0.0);
                } else {
                    return Err(fail(format!("repeated eigenvalue {lambda} without a full eigenbasis")));
                }
            } else {
                x[j] = rhs / pivot;
            }
        }
        let v = &q * x;
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(fail(format!("degenerate eigenvector for eigenvalue {lambda}")));
        }
        vectors.set_column(k, &(v / Complex64::new(norm, 0.0)));
    }
    Ok((lambdas, vectors))
}

/// Largest entrywise deviation between the two modes' eigenvalue lists.
pub fn mode_disagreement(a: &Spectrum, b: &Spectrum) -> f64 {
    a.eigenvalues
        .iter()
        .zip(&b.eigenvalues)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::sample_band;
    use crate::trajectory::{Knot, TimeInterval, Trajectory};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Deterministic pseudo-random complex matrix.
    fn test_matrix(n: usize, seed: u64) -> CMatrix {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        CMatrix::from_fn(n, n, |_, _| c(next(), next()))
    }

    fn max_abs(m: &CMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn line_case1() -> Trajectory {
        let iv = TimeInterval::new(1.0, 3.0).unwrap();
        Trajectory::line_2d(1.0, FRAC_PI_2, [0.0, 0.0], iv).unwrap()
    }

    #[test]
    fn two_by_two_layout() {
        let band = FrequencyBand::new(2.0, 2).unwrap();
        let (w1, w2) = (c(1.0, 2.0), c(-0.5, 0.25));
        let samples = FarFieldSamples {
            direction: Direction::from_angle(0.0),
            band,
            values: vec![w1, w2],
        };
        let op = build_operator(&samples);
        let dk = band.step();
        assert_eq!(op.matrix[(0, 0)], w1 * dk);
        assert_eq!(op.matrix[(0, 1)], w1.conj() * dk);
        assert_eq!(op.matrix[(1, 0)], w2 * dk);
        assert_eq!(op.matrix[(1, 1)], w1 * dk);
    }

    #[test]
    fn operator_is_exactly_toeplitz() {
        let band = FrequencyBand::new(3.0 * PI, 18).unwrap();
        let samples = sample_band(&line_case1(), &Direction::from_angle(1.0), &band).unwrap();
        let op = build_operator(&samples);
        let m = &op.matrix;
        assert_eq!(m[(2, 0)], m[(3, 1)]);
        for r in 1..18 {
            for col in 1..18 {
                assert_eq!(m[(r, col)], m[(r - 1, col - 1)]);
            }
        }
        let zero = FarFieldSamples {
            values: vec![c(0.0, 0.0); 18],
            ..samples
        };
        assert!(build_operator(&zero).matrix.iter().all(|z| *z == c(0.0, 0.0)));
    }

    #[test]
    fn hermitian_parts_examples() {
        let f = CMatrix::from_element(1, 1, c(0.0, 1.0));
        let (re, im) = hermitian_parts(&f);
        assert_eq!(re[(0, 0)], c(0.0, 0.0));
        assert_eq!(im[(0, 0)], c(1.0, 0.0));

        let f = test_matrix(5, 1);
        let (re, im) = hermitian_parts(&f);
        assert!(max_abs(&(&re - re.adjoint())) <= 1e-14);
        assert!(max_abs(&(&im - im.adjoint())) <= 1e-14);
        assert!(max_abs(&(&re + &im * c(0.0, 1.0) - &f)) <= 1e-14);

        let h = &f + f.adjoint();
        let (_, im) = hermitian_parts(&h);
        assert!(max_abs(&im) <= 1e-15);
    }

    #[test]
    fn hermitian_abs_examples() {
        let d = CMatrix::from_diagonal(&DVector::from_vec(vec![c(3.0, 0.0), c(-2.0, 0.0)]));
        let a = hermitian_abs(&d).unwrap();
        assert!(max_abs(&(a - CMatrix::from_diagonal(&DVector::from_vec(vec![c(3.0, 0.0), c(2.0, 0.0)])))) < 1e-14);

        let swap = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let a = hermitian_abs(&swap).unwrap();
        assert!(max_abs(&(a - CMatrix::identity(2, 2))) < 1e-14);

        let g = test_matrix(6, 2);
        let psd = &g * g.adjoint();
        let a = hermitian_abs(&psd).unwrap();
        assert!(max_abs(&(a - &psd)) < 1e-12);

        assert!(hermitian_abs(&test_matrix(3, 3)).is_err());
    }

    #[test]
    fn one_by_one_modes_agree() {
        let f = CMatrix::from_element(1, 1, c(-2.0, 0.5));
        for mode in [SpectrumMode::Rigorous, SpectrumMode::PaperShortcut] {
            let s = f_sharp_spectrum_of(&f, mode).unwrap();
            assert!((s.eigenvalues[0] - 2.5).abs() < 1e-15);
            assert!((s.eigenvectors[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn rigorous_trace_and_positivity() {
        let f = test_matrix(6, 7);
        let s = f_sharp_spectrum_of(&f, SpectrumMode::Rigorous).unwrap();
        let sharp = f_sharp(&f).unwrap();
        let trace: f64 = (0..6).map(|i| sharp[(i, i)].re).sum();
        let sum: f64 = s.eigenvalues.iter().sum();
        assert!((trace - sum).abs() < 1e-10);
        assert!(s.eigenvalues.iter().all(|&l| l >= -1e-12));
        assert!(s.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let gram = s.eigenvectors.adjoint() * &s.eigenvectors;
        assert!(max_abs(&(gram - CMatrix::identity(6, 6))) < 1e-10);
    }

    #[test]
    fn shortcut_eigenpairs_satisfy_definition() {
        let f = test_matrix(7, 11);
        let (lambdas, vectors) = general_eigen(&f).unwrap();
        for (k, l) in lambdas.iter().enumerate() {
            let v = vectors.column(k);
            let residual = (&f * v - v * *l).norm();
            assert!(residual < 1e-10, "residual {residual}");
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        let s = f_sharp_spectrum_of(&f, SpectrumMode::PaperShortcut).unwrap();
        assert!(s.eigenvalues.iter().all(|&l| l >= 0.0));
    }

    #[test]
    fn shortcut_matches_rigorous_for_normal_matrices() {
        // diagonal in a unitary basis: F normal, both modes coincide
        let g = test_matrix(5, 5);
        let q = g.qr().q();
        let d = CMatrix::from_diagonal(&DVector::from_vec(vec![
            c(3.0, 1.0),
            c(-2.0, 0.5),
            c(1.0, -1.5),
            c(0.2, 0.1),
            c(-0.1, 0.05),
        ]));
        let f = &q * d * q.adjoint();
        let a = f_sharp_spectrum_of(&f, SpectrumMode::Rigorous).unwrap();
        let b = f_sharp_spectrum_of(&f, SpectrumMode::PaperShortcut).unwrap();
        assert!(mode_disagreement(&a, &b) < 1e-10);
        let expected = [4.0, 2.5, 2.5, 0.3, 0.15];
        for (got, want) in a.eigenvalues.iter().zip(expected) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn defective_matrix_is_rejected() {
        let jordan = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let err = f_sharp_spectrum_of(&jordan, SpectrumMode::PaperShortcut).unwrap_err();
        assert!(matches!(err, Error::Diagonalization { mode: "paper", .. }), "{err}");
    }

    #[test]
    fn default_band_spectrum_decays() {
        let band = FrequencyBand::new(3.0 * PI, 18).unwrap();
        let samples = sample_band(&line_case1(), &Direction::from_angle(FRAC_PI_2), &band).unwrap();
        let op = build_operator(&samples);
        let s = f_sharp_spectrum(&op, SpectrumMode::Rigorous).unwrap();
        let l1 = s.eigenvalues[0];
        assert!(l1 > 0.0);
        assert!(s.eigenvalues[17] / l1 < 1.0);
        // regression anchor for the leading eigenvalue
        assert!((l1 - 4.425106977516164).abs() < 1e-8, "λ₁ = {l1}");
        let min = s.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(min >= -1e-12 * l1);
    }

    #[test]
    fn static_source_is_numerically_low_rank() {
        let p = Knot::planar(1.0, 0.3, -0.4);
        let q = Knot::planar(3.0, 0.3, -0.4);
        let traj = Trajectory::piecewise_linear(2, vec![p, q]).unwrap();
        let band = FrequencyBand::new(3.0 * PI, 18).unwrap();
        let samples = sample_band(&traj, &Direction::from_angle(0.9), &band).unwrap();
        let sv = build_operator(&samples).matrix.singular_values();
        let mut sv: Vec<f64> = sv.iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        for s in &sv[9..] {
            assert!(*s < 1e-6 * sv[0], "{s} vs {}", sv[0]);
        }
    }

    #[test]
    fn scaling_samples_scales_eigenvalues() {
        let band = FrequencyBand::new(3.0 * PI, 18).unwrap();
        let samples = sample_band(&line_case1(), &Direction::from_angle(1.2), &band).unwrap();
        let a = f_sharp_spectrum(&build_operator(&samples), SpectrumMode::Rigorous).unwrap();
        let b = f_sharp_spectrum(&build_operator(&samples.scaled(3.5)), SpectrumMode::Rigorous).unwrap();
        let top = a.eigenvalues[0];
        for (n, (x, y)) in a.eigenvalues.iter().zip(&b.eigenvalues).enumerate() {
            assert!((y - 3.5 * x).abs() < 1e-10 * 3.5 * top);
            // ratios and eigenvectors are resolved where the gap dwarfs rounding
            if *x >= 1e-4 * top {
                assert!((y / x / 3.5 - 1.0).abs() < 1e-10, "λ_{n}: {x} {y}");
                let overlap = (a.eigenvectors.column(n).adjoint() * b.eigenvectors.column(n))[(0, 0)];
                assert!((overlap.norm() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dump_formats() {
        let f = test_matrix(3, 9);
        let s = f_sharp_spectrum_of(&f, SpectrumMode::Rigorous).unwrap();
        let mut buf = Vec::new();
        s.write_eigenvalues(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("n,lambda\n1,"));
        assert_eq!(text.lines().count(), 4);
        let mut buf = Vec::new();
        s.write_eigenvectors(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 10);
    }
}
