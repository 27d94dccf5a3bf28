//! Spectra, postselected pointer distributions and spectral moments.
//!
//! A [`Spectrum`] is a histogram over wavelength bins. Each bin is a point
//! mass at the angular frequency of its center wavelength, so integrals
//! against a spectrum are plain weighted sums and no dλ→dω Jacobian appears.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarization::{ideal_weak_values, Port, Postselection, QwpModel};

/// Vacuum speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Tolerance on the total weight of a normalized spectrum.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// ω = 2πc/λ for λ in nanometers.
pub fn wavelength_to_angular_frequency(lambda_nm: f64) -> Result<f64> {
    if !(lambda_nm > 0.0) || !lambda_nm.is_finite() {
        return Err(Error::domain(format!("wavelength must be positive, got {lambda_nm} nm")));
    }
    Ok(2.0 * PI * SPEED_OF_LIGHT / (lambda_nm * 1e-9))
}

/// λ in nanometers for angular frequency ω in rad/s.
pub fn angular_frequency_to_wavelength(omega: f64) -> Result<f64> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::domain(format!("angular frequency must be positive, got {omega}")));
    }
    Ok(2.0 * PI * SPEED_OF_LIGHT / omega * 1e9)
}

/// Spectral reshaping factor of a postselected port,
/// ζ = cos²(gω) + sin²(gω)|A_w|² + sin(2gω)·Im A_w.
///
/// For weak values of a physical postselection ζ = |cos(gω) − i sin(gω)A_w|²
/// is nonnegative; a clearly negative value means (A_w, g, ω) are
/// inconsistent and is reported as a model error.
pub fn zeta(omega: f64, g: f64, aw: Complex64) -> Result<f64> {
    let z = zeta_unchecked(omega * g, aw.norm_sqr(), aw.im);
    if !z.is_finite() {
        return Err(Error::Model(format!("non-finite zeta at omega {omega}, g {g}")));
    }
    if z < -1e-12 * (1.0 + aw.norm_sqr()) {
        return Err(Error::Model(format!(
            "negative zeta {z} at omega {omega}, g {g}, weak value {aw}"
        )));
    }
    Ok(z.max(0.0))
}

#[inline]
pub(crate) fn zeta_unchecked(phase: f64, abs2: f64, im: f64) -> f64 {
    let (s, c) = phase.sin_cos();
    c * c + s * s * abs2 + 2.0 * s * c * im
}

/// Shape of the default source spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineShape {
    Gaussian,
    Lorentzian,
}

/// Histogram over strictly increasing wavelength bins (nm).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid_nm: Vec<f64>,
    weights: Vec<f64>,
}

impl Spectrum {
    pub fn new(grid_nm: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if grid_nm.len() != weights.len() {
            return Err(Error::InvalidSpectrum(format!(
                "grid has {} samples but weights have {}",
                grid_nm.len(),
                weights.len()
            )));
        }
        if grid_nm.len() < 2 {
            return Err(Error::InvalidSpectrum("at least 2 samples are required".into()));
        }
        if let Some(i) = grid_nm.iter().position(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidSpectrum(format!(
                "wavelength {} at index {i} is not positive and finite",
                grid_nm[i]
            )));
        }
        if let Some(i) = grid_nm.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpectrum(format!(
                "grid not strictly increasing at index {}",
                i + 1
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidSpectrum(format!(
                "weight {} at index {i} is negative or not finite",
                weights[i]
            )));
        }
        Ok(Self { grid_nm, weights })
    }

    /// Uniform grid from `min_nm` to `max_nm` inclusive.
    pub fn uniform_grid(min_nm: f64, max_nm: f64, step_nm: f64) -> Result<Vec<f64>> {
        if !(step_nm > 0.0) || !(max_nm > min_nm) || !(min_nm > 0.0) {
            return Err(Error::InvalidSpectrum(format!(
                "bad grid {min_nm}..{max_nm} step {step_nm} nm"
            )));
        }
        let n = ((max_nm - min_nm) / step_nm).round() as usize + 1;
        Ok((0..n).map(|i| min_nm + i as f64 * step_nm).collect())
    }

    /// Normalized line of the given shape on a uniform wavelength grid.
    pub fn line(
        shape: LineShape,
        center_nm: f64,
        fwhm_nm: f64,
        min_nm: f64,
        max_nm: f64,
        step_nm: f64,
    ) -> Result<Self> {
        if !(fwhm_nm > 0.0) || !(center_nm > 0.0) {
            return Err(Error::InvalidSpectrum(format!(
                "line needs positive center and width, got {center_nm} / {fwhm_nm} nm"
            )));
        }
        let grid = Self::uniform_grid(min_nm, max_nm, step_nm)?;
        let weights = match shape {
            LineShape::Gaussian => {
                let sigma = fwhm_nm / (2.0 * (2.0 * 2f64.ln()).sqrt());
                grid.iter()
                    .map(|l| (-0.5 * ((l - center_nm) / sigma).powi(2)).exp())
                    .collect()
            }
            LineShape::Lorentzian => {
                let hw = 0.5 * fwhm_nm;
                grid.iter()
                    .map(|l| hw * hw / ((l - center_nm).powi(2) + hw * hw))
                    .collect()
            }
        };
        Self::new(grid, weights)?.normalized()
    }

    pub fn len(&self) -> usize {
        self.grid_nm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid_nm.is_empty()
    }

    pub fn grid_nm(&self) -> &[f64] {
        &self.grid_nm
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Bin-center angular frequencies, rad/s.
    pub fn omegas(&self) -> Vec<f64> {
        self.grid_nm
            .iter()
            .map(|&l| 2.0 * PI * SPEED_OF_LIGHT / (l * 1e-9))
            .collect()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total() - 1.0).abs() <= NORMALIZATION_TOLERANCE
    }

    pub fn normalized(&self) -> Result<Self> {
        let total = self.total();
        if !(total > 0.0) {
            return Err(Error::InvalidSpectrum("cannot normalize an all-zero spectrum".into()));
        }
        Ok(Self {
            grid_nm: self.grid_nm.clone(),
            weights: self.weights.iter().map(|w| w / total).collect(),
        })
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.grid_nm.clone(),
            self.weights.iter().map(|w| w * factor).collect(),
        )
    }

    /// Mean angular frequency ω₀ = Σ w·ω / Σ w.
    pub fn mean_omega(&self) -> Result<f64> {
        moments(self, self.total()).and_then(|m| m.m1_bar())
    }

    /// Frequency variance ⟨ω²⟩ − ⟨ω⟩² of the normalized spectrum.
    pub fn omega_variance(&self) -> Result<f64> {
        let m = moments(self, self.total())?;
        Ok(central_variance(&self.omegas(), &self.weights, m.m1_bar()?))
    }

    /// Bin-wise sum of two spectra on the same grid.
    pub fn pooled(&self, other: &Self) -> Result<Self> {
        if self.grid_nm != other.grid_nm {
            return Err(Error::InvalidSpectrum("cannot pool spectra on different grids".into()));
        }
        Self::new(
            self.grid_nm.clone(),
            self.weights.iter().zip(&other.weights).map(|(a, b)| a + b).collect(),
        )
    }
}

// Two-pass variance; the one-pass ⟨ω²⟩ − ⟨ω⟩² loses ~6 digits at optical
// frequencies.
fn central_variance(omegas: &[f64], weights: &[f64], mean: f64) -> f64 {
    let total: f64 = weights.iter().sum();
    omegas
        .iter()
        .zip(weights)
        .map(|(o, w)| w * (o - mean).powi(2))
        .sum::<f64>()
        / total
}

/// Provenance carried alongside a record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordMetadata {
    pub phi_nominal: Option<f64>,
    pub seed: Option<u64>,
    pub qwp: Option<QwpModel>,
}

/// Paired per-port spectra on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    port1: Spectrum,
    port2: Spectrum,
    /// Number of detected events when the weights are raw counts; `None`
    /// for expected (noise-free) probability records.
    pub total_events: Option<u64>,
    pub metadata: RecordMetadata,
}

impl MeasurementRecord {
    pub fn new(port1: Spectrum, port2: Spectrum) -> Result<Self> {
        if port1.grid_nm != port2.grid_nm {
            return Err(Error::InvalidSpectrum("port spectra must share one grid".into()));
        }
        Ok(Self {
            port1,
            port2,
            total_events: None,
            metadata: RecordMetadata::default(),
        })
    }

    /// Record of raw counts; the event total is checked against the counts.
    pub fn from_counts(port1: Spectrum, port2: Spectrum, total_events: u64) -> Result<Self> {
        let mut r = Self::new(port1, port2)?;
        let sum = r.total();
        if (sum - total_events as f64).abs() > 0.5 {
            return Err(Error::InvalidSpectrum(format!(
                "counts sum to {sum} but total_events is {total_events}"
            )));
        }
        r.total_events = Some(total_events);
        Ok(r)
    }

    pub fn with_metadata(mut self, metadata: RecordMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn port(&self, port: Port) -> &Spectrum {
        match port {
            Port::One => &self.port1,
            Port::Two => &self.port2,
        }
    }

    pub fn port1(&self) -> &Spectrum {
        &self.port1
    }

    pub fn port2(&self) -> &Spectrum {
        &self.port2
    }

    pub fn grid_nm(&self) -> &[f64] {
        self.port1.grid_nm()
    }

    pub fn len(&self) -> usize {
        self.port1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.port1.is_empty()
    }

    /// Total weight over both ports.
    pub fn total(&self) -> f64 {
        self.port1.total() + self.port2.total()
    }

    /// Sub-normalized moments of one port: the port weights are divided by
    /// the total over both ports, so that p0 is the port probability.
    pub fn moments(&self, port: Port) -> Result<SpectralMoments> {
        moments(self.port(port), self.total())
    }

    pub fn port_probabilities(&self) -> Result<[f64; 2]> {
        Ok([self.moments(Port::One)?.p0, self.moments(Port::Two)?.p0])
    }

    /// Frequency variance of both ports pooled together.
    pub fn pooled_variance(&self) -> Result<f64> {
        self.port1.pooled(&self.port2)?.omega_variance()
    }

    /// Both ports with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let mut r = Self::new(self.port1.scaled(factor)?, self.port2.scaled(factor)?)?;
        r.metadata = self.metadata.clone();
        Ok(r)
    }

    /// Ports exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            port1: self.port2.clone(),
            port2: self.port1.clone(),
            total_events: self.total_events,
            metadata: self.metadata.clone(),
        }
    }
}

/// Moments of one port against the sub-normalized measure Q_j.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralMoments {
    /// ∫Q_j, the port probability.
    pub p0: f64,
    /// ∫Q_j ω, rad/s.
    pub m1: f64,
    /// ∫Q_j ω², rad²/s².
    pub m2: f64,
}

impl SpectralMoments {
    fn require_nonempty(&self) -> Result<()> {
        if self.p0 > 0.0 {
            Ok(())
        } else {
            Err(Error::Degenerate(
                "port is empty; normalized moments are undefined".into(),
            ))
        }
    }

    /// m1 / p0
    pub fn m1_bar(&self) -> Result<f64> {
        self.require_nonempty()?;
        Ok(self.m1 / self.p0)
    }

    /// m2 / p0
    pub fn m2_bar(&self) -> Result<f64> {
        self.require_nonempty()?;
        Ok(self.m2 / self.p0)
    }
}

/// Moments of `port` with weights divided by `normalize_by_total`.
pub fn moments(port: &Spectrum, normalize_by_total: f64) -> Result<SpectralMoments> {
    if !(normalize_by_total > 0.0) || !normalize_by_total.is_finite() {
        return Err(Error::Degenerate(format!(
            "normalizing total must be positive, got {normalize_by_total}"
        )));
    }
    let (mut p0, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (w, o) in port.weights.iter().zip(port.omegas()) {
        let q = w / normalize_by_total;
        p0 += q;
        m1 += q * o;
        m2 += q * o * o;
    }
    Ok(SpectralMoments { p0, m1, m2 })
}

fn require_normalized(source: &Spectrum) -> Result<()> {
    if source.is_normalized() {
        Ok(())
    } else {
        Err(Error::InvalidSpectrum(format!(
            "source spectrum must be normalized, total is {}",
            source.total()
        )))
    }
}

/// Postselected (unnormalized) pointer distribution of one port with an
/// ω-independent weak value: overlap_sq · P₀(ω) · ζ(ω, g, A_w). Its total is
/// the port probability.
pub fn postselected_distribution(
    source: &Spectrum,
    g: f64,
    aw: Complex64,
    overlap_sq: f64,
) -> Result<Spectrum> {
    require_normalized(source)?;
    if !(0.0..=1.0).contains(&overlap_sq) {
        return Err(Error::domain(format!("overlap_sq {overlap_sq} not in [0, 1]")));
    }
    let weights = source
        .weights
        .iter()
        .zip(source.omegas())
        .map(|(w, o)| Ok(overlap_sq * w * zeta(o, g, aw)?))
        .collect::<Result<Vec<_>>>()?;
    Spectrum::new(source.grid_nm.clone(), weights)
}

/// Postselected distribution of one port for an arbitrary plate model; the
/// weak value is re-evaluated at every bin frequency.
pub fn port_distribution(
    source: &Spectrum,
    g: f64,
    postselection: &Postselection,
    port: Port,
) -> Result<Spectrum> {
    require_normalized(source)?;
    let weights = source
        .weights
        .iter()
        .zip(source.omegas())
        .map(|(w, o)| {
            let r = postselection.response(port, o)?;
            Ok(r.overlap_sq * w * zeta(o, g, r.weak_value)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Spectrum::new(source.grid_nm.clone(), weights)
}

/// Port probabilities (P_f1, P_f2) with an ideal quarter-wave plate,
/// integrated exactly over the source grid.
pub fn postselection_probabilities_exact(source: &Spectrum, tau: f64, phi: f64) -> Result<(f64, f64)> {
    let w = ideal_weak_values(phi)?;
    let (s, c) = (phi / 2.0).sin_cos();
    let p1 = postselected_distribution(source, tau, w.aw1, c * c)?.total();
    let p2 = postselected_distribution(source, tau, w.aw2, s * s)?.total();
    Ok((p1, p2))
}

/// Port probabilities for an arbitrary plate model.
pub fn postselection_probabilities(
    source: &Spectrum,
    tau: f64,
    postselection: &Postselection,
) -> Result<(f64, f64)> {
    Ok((
        port_distribution(source, tau, postselection, Port::One)?.total(),
        port_distribution(source, tau, postselection, Port::Two)?.total(),
    ))
}
