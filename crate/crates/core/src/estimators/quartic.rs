//! Quartic truncation of the weak-regime likelihood equation.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{record_diagnostics, Bins, EstimationResult, Method, WeakValueSource};
use crate::error::{Error, Result};
use crate::spectrum::MeasurementRecord;

/// Which form of the linear coefficient D to use.
///
/// Expanding the likelihood equation to first order in g gives
/// `(|A|² − 1) − 2 (Im A)²`; the published table prints `−2 Im A` instead.
/// Only the consistent form reproduces the first-order solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DCoefficient {
    #[default]
    Consistent,
    AsPrinted,
}

/// Which quartic truncation of the likelihood equation to build.
///
/// Writing each bin term as N/D, the published coefficients are those of
/// N·(2 − D), i.e. 1/D expanded to first order only; they agree with the
/// Taylor series of N/D through g¹. `Taylor` keeps every term through g⁴.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuarticForm {
    #[default]
    Published,
    Taylor,
}

/// `a g⁴ + b g³ + c g² + d g + e = 0`, with g in seconds.
///
/// `omega_scale` is the RMS frequency of the record; the solver works in
/// the dimensionless variable x = g·omega_scale so that the coefficients
/// are of comparable size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarticCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub omega_scale: f64,
}

impl QuarticCoefficients {
    /// Coefficients of the polynomial in x = g·omega_scale, highest first.
    pub fn scaled(&self) -> [f64; 5] {
        let k = self.omega_scale;
        [
            self.a / k.powi(4),
            self.b / k.powi(3),
            self.c / k.powi(2),
            self.d / k,
            self.e,
        ]
    }

    pub fn eval(&self, g: f64) -> f64 {
        (((self.a * g + self.b) * g + self.c) * g + self.d) * g + self.e
    }

    fn is_finite(&self) -> bool {
        [self.a, self.b, self.c, self.d, self.e, self.omega_scale]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// The five bin sums with the consistent D coefficient.
pub fn quartic_coefficients(
    record: &MeasurementRecord,
    model: &impl WeakValueSource,
) -> Result<QuarticCoefficients> {
    quartic_coefficients_with(record, model, QuarticForm::Published, DCoefficient::Consistent)
}

/// The five bin sums. Weak values are evaluated per bin, so a dispersive
/// model is accepted.
pub fn quartic_coefficients_with(
    record: &MeasurementRecord,
    model: &impl WeakValueSource,
    form: QuarticForm,
    d_form: DCoefficient,
) -> Result<QuarticCoefficients> {
    let bins = Bins::new(record, model)?;
    Ok(bins.quartic(form, d_form))
}

impl Bins {
    pub(crate) fn quartic(&self, form: QuarticForm, d_form: DCoefficient) -> QuarticCoefficients {
        let (mut a, mut b, mut c, mut d, mut e) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut weight = 0.0;
        let mut power = 0.0;
        for (i, &w) in self.omega.iter().enumerate() {
            let w2 = w * w;
            for j in 0..2 {
                let q = self.q[j][i];
                if q == 0.0 {
                    continue;
                }
                let (m, im) = (self.abs2[j][i] - 1.0, self.im[j][i]);
                let i2 = im * im;
                let (ka, kb, kc) = match form {
                    QuarticForm::Published => {
                        (2.0 * m * im, 4.0 * i2 - m * m, im * (1.0 - 3.0 * self.abs2[j][i]))
                    }
                    QuarticForm::Taylor => (
                        im * (16.0 * i2 * i2 - 20.0 * i2 * m - 8.0 * i2 + 5.0 * m * m + 2.0 * m),
                        -(8.0 * i2 * i2 - 8.0 * i2 * m - 4.0 * i2 + m * m),
                        -im * (3.0 * m + 2.0 - 4.0 * i2),
                    ),
                };
                a += q * w2 * w2 * w * ka;
                b += q * w2 * w2 * kb;
                c += q * w2 * w * kc;
                d += q * w2
                    * match d_form {
                        DCoefficient::Consistent => m - 2.0 * im * im,
                        DCoefficient::AsPrinted => m - 2.0 * im,
                    };
                e += q * w * im;
                weight += q;
                power += q * w2;
            }
        }
        let omega_scale = if power > 0.0 { (power / weight).sqrt() } else { 1.0 };
        QuarticCoefficients { a, b, c, d, e, omega_scale }
    }
}

// Relative size below which a leading coefficient is treated as zero.
const LEADING_CUTOFF: f64 = 1e-13;

/// Real roots of the quartic in seconds, ascending.
///
/// Roots come from the eigenvalues of the companion matrix of the scaled
/// monic polynomial and are then polished by Newton's method on the
/// unscaled-in-size polynomial.
pub fn real_roots(coeffs: &QuarticCoefficients) -> Result<Vec<f64>> {
    if !coeffs.is_finite() || !(coeffs.omega_scale > 0.0) {
        return Err(Error::Degenerate("quartic coefficients are not finite".into()));
    }
    let p = coeffs.scaled();
    let size = p.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if size == 0.0 {
        return Err(Error::Degenerate("all quartic coefficients vanish".into()));
    }
    let start = p
        .iter()
        .position(|v| v.abs() > LEADING_CUTOFF * size)
        .expect("nonzero coefficient exists");
    let poly = &p[start..];
    let degree = poly.len() - 1;
    if degree == 0 {
        return Ok(Vec::new());
    }

    let mut xs: Vec<f64> = if degree == 1 {
        vec![-poly[1] / poly[0]]
    } else {
        let mut companion = DMatrix::<f64>::zeros(degree, degree);
        for k in 0..degree {
            companion[(0, k)] = -poly[k + 1] / poly[0];
        }
        for k in 1..degree {
            companion[(k, k - 1)] = 1.0;
        }
        eigenvalues(companion, poly)
            .iter()
            .filter(|z| z.im.abs() <= 1e-8 * z.re.abs().max(1.0))
            .map(|z| polish(poly, z.re))
            .collect()
    };
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * a.abs().max(1e-300));
    Ok(xs.into_iter().map(|x| x / coeffs.omega_scale).collect())
}

// Companion eigenvalues, falling back to simultaneous Weierstrass
// iteration when the unshifted-QR Schur form stalls (x⁴ + 1 is one such
// case).
fn eigenvalues(companion: DMatrix<f64>, poly: &[f64]) -> Vec<Complex64> {
    if let Some(schur) = Schur::try_new(companion, f64::EPSILON, 500) {
        return schur.complex_eigenvalues().iter().cloned().collect();
    }
    durand_kerner(poly)
}

fn durand_kerner(poly: &[f64]) -> Vec<Complex64> {
    let n = poly.len() - 1;
    let monic: Vec<f64> = poly.iter().map(|c| c / poly[0]).collect();
    let radius = 1.0 + monic[1..].iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let seed = Complex64::from_polar(0.4 * radius, 0.9);
    let mut z: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32 + 1)).collect();
    let eval = |x: Complex64| monic.iter().fold(Complex64::new(0.0, 0.0), |f, &c| f * x + c);
    for _ in 0..500 {
        let mut change = 0.0f64;
        for i in 0..n {
            let den = (0..n)
                .filter(|&k| k != i)
                .fold(Complex64::new(1.0, 0.0), |d, k| d * (z[i] - z[k]));
            let step = eval(z[i]) / den;
            z[i] -= step;
            change = change.max(step.norm() / z[i].norm().max(1.0));
        }
        if change < 1e-15 {
            break;
        }
    }
    z
}

fn horner(poly: &[f64], x: f64) -> (f64, f64) {
    let mut f = 0.0;
    let mut df = 0.0;
    for &c in poly {
        df = df * x + f;
        f = f * x + c;
    }
    (f, df)
}

fn polish(poly: &[f64], mut x: f64) -> f64 {
    for _ in 0..8 {
        let (f, df) = horner(poly, x);
        if f == 0.0 || df == 0.0 {
            break;
        }
        let step = f / df;
        let next = x - step;
        if horner(poly, next).0.abs() >= f.abs() {
            break;
        }
        x = next;
    }
    x
}

/// Real root of the quartic nearest `hint` (s), usually the first-order
/// estimate.
pub fn solve_quartic(coeffs: &QuarticCoefficients, hint: f64) -> Result<EstimationResult> {
    let roots = real_roots(coeffs)?;
    let best = roots
        .iter()
        .cloned()
        .min_by(|a, b| (a - hint).abs().partial_cmp(&(b - hint).abs()).unwrap())
        .ok_or(Error::NoRealRoot {
            coefficients: [coeffs.a, coeffs.b, coeffs.c, coeffs.d, coeffs.e],
        })?;
    let diagnostics = super::Diagnostics {
        likelihood_residual: Some(coeffs.eval(best)),
        candidate_roots: roots,
        ..Default::default()
    };
    EstimationResult::new(best, Method::Quartic, diagnostics)
}

/// Quartic estimate from a record: coefficients, first-order hint, root.
pub fn estimate_quartic(
    record: &MeasurementRecord,
    model: &impl WeakValueSource,
    form: QuarticForm,
) -> Result<EstimationResult> {
    let bins = Bins::new(record, model)?;
    let coeffs = bins.quartic(form, DCoefficient::Consistent);
    let hint = if coeffs.d != 0.0 { -coeffs.e / coeffs.d } else { 0.0 };
    let mut result = solve_quartic(&coeffs, hint)?;
    let base = record_diagnostics(record)?;
    result.diagnostics.port_probabilities = base.port_probabilities;
    result.diagnostics.moments_used = base.moments_used;
    Ok(result)
}
